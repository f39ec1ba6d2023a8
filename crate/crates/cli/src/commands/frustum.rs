//! `frustum`: train three-stage detector instances on synthetic scenes and
//! compare no ensembling, last-module ensembling, and all-module ensembling
//! under ground and 3D IoU.

use pointens::numerics::derive_seed;
use pointens::pipeline::{
    average_precision, ensemble_all, ensemble_last, generate_scene_set, iou, run_single,
    train_pipeline_set, write_scenes, Box3D, FrustumScene, IouMode, PipelineArch,
    PipelineInstance, SCENE_CLASSES,
};

use crate::commands::ensure_out_dir;
use crate::config::{train_config, ConfigMap};
use crate::report::{fmt_metric, Report};
use crate::{CliError, CliResult, CommonArgs};

const KEYS: [&str; 11] = [
    "n_train_scenes",
    "n_test_scenes",
    "n_object_points",
    "n_clutter_points",
    "n_instances",
    "iou_threshold",
    "epochs",
    "batch_size",
    "learning_rate",
    "momentum",
    "lr_decay",
];

fn predict_all(
    mode: &str,
    instances: &[PipelineInstance],
    scenes: &[FrustumScene],
) -> pointens::Result<Vec<Box3D>> {
    scenes
        .iter()
        .map(|scene| match mode {
            "none" => run_single(&instances[0], scene),
            "last" => ensemble_last(instances, scene),
            _ => ensemble_all(instances, scene),
        })
        .collect()
}

pub fn run(args: &CommonArgs) -> CliResult {
    let cfg = ConfigMap::load(args.config.as_deref())?;
    cfg.check_keys(&KEYS)?;

    let n_train_scenes = cfg.get_usize("n_train_scenes", 60)?;
    let n_test_scenes = cfg.get_usize("n_test_scenes", 24)?;
    let n_object_points = cfg.get_usize("n_object_points", 96)?;
    let n_clutter_points = cfg.get_usize("n_clutter_points", 64)?;
    let n_instances = cfg.get_usize("n_instances", 3)?;
    let iou_threshold = cfg.get_f64("iou_threshold", 0.5)?;
    if n_train_scenes == 0 || n_test_scenes == 0 || n_object_points == 0 {
        return Err(CliError::Config(
            "scene and object point counts must be at least 1".into(),
        ));
    }
    if n_instances == 0 {
        return Err(CliError::Config("n_instances must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(CliError::Config(format!(
            "iou_threshold must be in [0, 1], got {iou_threshold}"
        )));
    }
    let train_cfg = train_config(&cfg)?;

    let train_scenes = generate_scene_set(
        n_train_scenes,
        n_object_points,
        n_clutter_points,
        derive_seed(args.seed, 90),
    )?;
    let test_scenes = generate_scene_set(
        n_test_scenes,
        n_object_points,
        n_clutter_points,
        derive_seed(args.seed, 91),
    )?;
    let arch = PipelineArch::preset(SCENE_CLASSES.len());
    let instances = train_pipeline_set(
        &train_scenes,
        &arch,
        n_instances,
        derive_seed(args.seed, 92),
        &train_cfg,
    )?;

    ensure_out_dir(&args.out)?;
    write_scenes(&test_scenes, &args.out.join("scenes_test.pscene"))?;

    let gt: Vec<Box3D> = test_scenes.iter().map(|s| s.gt_box).collect();
    let mut summary = Report::new(
        "frustum",
        &cfg.hash(),
        args.seed,
        &[
            "expected trend: averaging all module outputs outperforms averaging only the last module",
            "mode `none` is the first instance alone; `last` averages box heads; `all` averages every stage",
        ],
    );
    summary.columns(&["mode", "iou_mode", "mean_iou", "accuracy"]);

    let mut detail_ground = Report::new("frustum", &cfg.hash(), args.seed, &[]);
    detail_ground.columns(&["scene_id", "mode", "iou", "correct"]);
    let mut detail_3d = Report::new("frustum", &cfg.hash(), args.seed, &[]);
    detail_3d.columns(&["scene_id", "mode", "iou", "correct"]);

    for mode in ["none", "last", "all"] {
        let boxes = predict_all(mode, &instances, &test_scenes)?;
        for iou_mode in [IouMode::Ground, IouMode::Full3d] {
            let mut total = 0.0;
            for (i, (b, g)) in boxes.iter().zip(&gt).enumerate() {
                let v = iou(b, g, iou_mode)?;
                total += v;
                let row = [
                    i.to_string(),
                    mode.to_string(),
                    fmt_metric(v),
                    ((v >= iou_threshold) as u8).to_string(),
                ];
                match iou_mode {
                    IouMode::Ground => detail_ground.row(&row),
                    IouMode::Full3d => detail_3d.row(&row),
                }
            }
            let ap = average_precision(&boxes, &gt, iou_threshold, iou_mode)?;
            summary.row(&[
                mode.to_string(),
                iou_mode.name().to_string(),
                fmt_metric(total / boxes.len() as f64),
                fmt_metric(ap),
            ]);
        }
    }

    let path = args.out.join("frustum.csv");
    summary.write(&path)?;
    detail_ground.write(&args.out.join("detections_ground.csv"))?;
    detail_3d.write(&args.out.join("detections_3d.csv"))?;
    println!("wrote {}", path.display());
    Ok(())
}
