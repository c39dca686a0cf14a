use std::fs;
use std::path::PathBuf;

use cosy::catalog::Catalog;
use cosy::scene_io::{load_models, save_models, save_observations, write_json};
use cosy::seeding::rng_for;
use cosy::simulation::{generate_observations, generate_scene, library, NoiseModel, ScenarioConfig};
use cosy::CameraIntrinsics;
use serde_json::json;

use crate::{config_err, path_str, CliError};

#[derive(clap::Args)]
pub struct Args {
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Model file to draw objects from; the built-in library when omitted.
    #[arg(long)]
    models: Option<PathBuf>,
    /// Comma-separated labels to draw from; every model when omitted.
    #[arg(long, value_delimiter = ',')]
    labels: Vec<String>,
    #[arg(long, default_value_t = 6)]
    n_objects: usize,
    #[arg(long, default_value_t = 4)]
    n_views: usize,
    /// Edge of the cube holding object centers, meters.
    #[arg(long, default_value_t = 0.5)]
    box_size: f64,
    #[arg(long, default_value_t = 1.0)]
    camera_distance_min: f64,
    #[arg(long, default_value_t = 1.4)]
    camera_distance_max: f64,
    #[arg(long, default_value_t = 600.0)]
    fx: f64,
    #[arg(long, default_value_t = 600.0)]
    fy: f64,
    #[arg(long, default_value_t = 320.0)]
    cx: f64,
    #[arg(long, default_value_t = 240.0)]
    cy: f64,
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 480)]
    height: u32,
    /// Rotation noise, degrees.
    #[arg(long, default_value_t = 5.0)]
    rot_sigma: f64,
    /// Translation noise per camera axis, meters.
    #[arg(long, default_value_t = 0.005)]
    trans_sigma: f64,
    /// Extra noise along the optical axis, meters.
    #[arg(long, default_value_t = 0.0)]
    depth_sigma: f64,
    #[arg(long, default_value_t = 0.2)]
    miss_prob: f64,
    #[arg(long, default_value_t = 0.3)]
    outlier_prob: f64,
    #[arg(long, default_value_t = 0.0)]
    label_confusion_prob: f64,
    /// Report true detections at their exact pose instead of a random
    /// symmetric equivalent.
    #[arg(long)]
    no_symmetry_ambiguity: bool,
    #[arg(long, default_value_t = cosy::symmetry::DEFAULT_ANGLES_PER_AXIS)]
    symmetry_angles: usize,
}

pub fn run(a: &Args) -> Result<(), CliError> {
    let db = match &a.models {
        Some(p) => load_models(p)?,
        None => library::builtin_models(),
    };
    let labels = if a.labels.is_empty() {
        db.labels().map(String::from).collect()
    } else {
        a.labels.clone()
    };
    let scenario = ScenarioConfig {
        n_objects: a.n_objects,
        box_size: a.box_size,
        n_views: a.n_views,
        camera_distance_range: [a.camera_distance_min, a.camera_distance_max],
        seed: a.seed,
        model_labels: labels,
        intrinsics: CameraIntrinsics {
            fx: a.fx,
            fy: a.fy,
            cx: a.cx,
            cy: a.cy,
            width: a.width,
            height: a.height,
        },
    };
    let noise = NoiseModel {
        rot_sigma: a.rot_sigma,
        trans_sigma: a.trans_sigma,
        depth_sigma_extra: a.depth_sigma,
        miss_prob: a.miss_prob,
        outlier_prob: a.outlier_prob,
        label_confusion_prob: a.label_confusion_prob,
        symmetry_ambiguity: !a.no_symmetry_ambiguity,
        ..NoiseModel::default()
    };
    noise.validate().map_err(config_err)?;
    let catalog = Catalog::new(&db, a.symmetry_angles).map_err(config_err)?;

    let scene = generate_scene(&scenario, &db, &mut rng_for(a.seed, &["scene"])).map_err(config_err)?;
    let (obs, provenance) =
        generate_observations(&scene, &catalog, &noise, &mut rng_for(a.seed, &["observations"]))
            .map_err(config_err)?;

    let config = json!({
        "seed": a.seed,
        "models": a.models.as_deref().map(path_str),
        "scenario": scenario,
        "noise": noise,
        "symmetry_angles": a.symmetry_angles,
    });
    fs::create_dir_all(&a.out).map_err(|e| config_err(format!("{}: {e}", a.out.display())))?;
    save_models(a.out.join("models.json"), &db)?;
    save_observations(a.out.join("observations.json"), &obs)?;
    write_json(a.out.join("ground_truth.json"), &scene.to_file(config, provenance.clone()))?;

    let outliers = provenance.iter().filter(|p| p.is_none()).count();
    println!(
        "scene: {} objects, {} views, {} candidates ({} outliers)",
        scene.objects.len(),
        scene.cameras.len(),
        obs.candidates.len(),
        outliers
    );
    for (i, c) in scene.cameras.iter().enumerate() {
        println!("  {}: {} visible, {} candidates", c.view_id, scene.visible_objects(i).len(), obs.candidates_in_view(&c.view_id).len());
    }
    println!("wrote {}", a.out.display());
    Ok(())
}
