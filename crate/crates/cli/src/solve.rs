use std::path::PathBuf;

use cosy::matching::MatchParams;
use cosy::pipeline::{solve, SolveConfig, SolveError};
use cosy::refinement::RefineConfig;
use cosy::scene_io::{load_models, load_observations, write_json, SolveStats};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{config_err, path_str, CliError};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    observations: PathBuf,
    /// Estimate file to write (a diagnostic report when no scene is found).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Candidates must score strictly above this.
    #[arg(long, default_value_t = 0.3)]
    min_score: f64,
    /// Symmetric-distance threshold for two candidates to match, meters.
    #[arg(long, default_value_t = 0.02)]
    inlier_threshold: f64,
    #[arg(long, default_value_t = 2000)]
    ransac_max_iters: usize,
    #[arg(long, default_value_t = 3)]
    min_inliers: usize,
    /// Rotations sampled per continuous symmetry axis.
    #[arg(long, default_value_t = 64)]
    symmetry_angles: usize,
    #[arg(long, default_value_t = 100)]
    lm_iters: usize,
    /// Per-point reprojection error cap, pixels.
    #[arg(long, default_value_t = 25.0)]
    truncation: f64,
    #[arg(long, default_value_t = 1e-4)]
    damping_init: f64,
    #[arg(long, default_value_t = 10.0)]
    damping_factor: f64,
    #[arg(long, default_value_t = 1e-6)]
    rel_tol: f64,
    /// Objects closer than this after refinement are merged, meters.
    #[arg(long, default_value_t = 0.02)]
    nms_radius: f64,
}

impl Args {
    fn config(&self) -> SolveConfig {
        SolveConfig {
            min_score: self.min_score,
            symmetry_angles: self.symmetry_angles,
            nms_radius: self.nms_radius,
            matching: MatchParams {
                inlier_threshold: self.inlier_threshold,
                max_iterations: self.ransac_max_iters,
                min_inliers: self.min_inliers,
                seed: self.seed,
            },
            refine: RefineConfig {
                max_iterations: self.lm_iters,
                truncation: self.truncation,
                damping_init: self.damping_init,
                damping_factor: self.damping_factor,
                rel_tol: self.rel_tol,
                seed: self.seed,
            },
            seed: self.seed,
        }
    }
}

/// Written in place of the estimate when no scene could be built.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticFile {
    pub config: serde_json::Value,
    pub status: String,
    pub message: String,
    pub stats: SolveStats,
}

pub fn run(a: &Args) -> Result<(), CliError> {
    let cfg = a.config();
    let echo = json!({
        "solve": cfg,
        "inputs": { "models": path_str(&a.models), "observations": path_str(&a.observations) },
    });
    let db = load_models(&a.models)?;
    let obs = load_observations(&a.observations, &db)?;

    let solution = match solve(&db, &obs, &cfg) {
        Ok(s) => s,
        Err(SolveError::NoScene(stats)) => {
            let message = "no two views share three consistent candidates".to_string();
            write_json(
                &a.out,
                &DiagnosticFile {
                    config: echo,
                    status: "no_scene".into(),
                    message: message.clone(),
                    stats: *stats,
                },
            )?;
            return Err(CliError::NoScene(format!("{message}; diagnostic written to {}", a.out.display())));
        }
        Err(e) => return Err(config_err(e)),
    };

    write_json(&a.out, &solution.to_estimate_file(echo))?;
    for (stage, t) in &solution.timings {
        eprintln!("timing {stage:<15} {:>10.3} ms", t.as_secs_f64() * 1e3);
    }
    let s = &solution.stats;
    println!(
        "candidates {} -> {} after score filter; {} view pairs, {} edges, {} components",
        s.candidates_in, s.candidates_after_filter, s.accepted_view_pairs, s.edges, s.components
    );
    println!(
        "{} objects from {} inliers; loss {:.4} -> {:.4} px in {} iterations",
        s.objects_after_nms, s.inliers, s.initial_loss, s.final_loss, s.lm_iterations
    );
    if !s.disconnected_views.is_empty() {
        println!("disconnected views: {}", s.disconnected_views.join(", "));
    }
    println!("wrote {}", a.out.display());
    Ok(())
}
