//! Portable seeded random number generator.
//!
//! The generator is xoshiro256** (Blackman & Vigna) seeded through
//! splitmix64, both with their published constants. The algorithm is fixed so
//! that a seed produces the identical stream on every platform; no
//! platform-dependent entropy or library generator is involved. One `Rng` is
//! owned by one logical task at a time — clone-free, no interior mutability.

/// splitmix64 step; used for seeding and for deriving sub-seeds.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a stable sub-seed from a root seed and a stream label.
///
/// Experiments use this to give independent factors (data order, weight
/// initialization, dropout, splits, ...) their own seed streams without
/// collisions: `derive_seed(root, s)` and `derive_seed(root, t)` are unrelated
/// for `s != t`.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    let mut state = root ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream.wrapping_add(1));
    splitmix64(&mut state);
    splitmix64(&mut state)
}

/// xoshiro256** generator with fixed, platform-independent behavior.
#[derive(Debug, Clone)]
pub struct Rng {
    s: [u64; 4],
}

impl Rng {
    /// Seeds the state through splitmix64; equal seeds yield equal streams.
    pub fn new(seed: u64) -> Self {
        let mut state = seed;
        let mut s = [0u64; 4];
        for slot in &mut s {
            *slot = splitmix64(&mut state);
        }
        if s == [0, 0, 0, 0] {
            s[0] = 1; // the all-zero state is the one forbidden state
        }
        Rng { s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform draw in `[0, 1)` using the top 53 bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `[0, n)`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index range must be nonempty");
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal draw via Box-Muller; consumes exactly two uniforms.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}
