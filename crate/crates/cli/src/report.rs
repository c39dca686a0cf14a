use std::fmt::Write;
use std::path::PathBuf;

use cosy::evaluation::LabelMetrics;
use cosy::scene_io::{parse_json, EstimateFile, GroundTruthFile, SolveStats};

use crate::eval::MetricsFile;
use crate::solve::DiagnosticFile;
use crate::{config_err, CliError};

#[derive(clap::Args)]
pub struct Args {
    /// Estimate, diagnostic, metric or ground-truth files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

fn metric_row(out: &mut String, name: &str, m: &LabelMetrics) {
    let _ = writeln!(
        out,
        "{name:<14} {:>5} {:>6} {:>7} {:>9.2} {:>9.2} {:>7.3} {:>7.3} {:>7.3}",
        m.n_gt,
        m.n_pred,
        m.matched,
        m.add * 1e3,
        m.adds * 1e3,
        m.auc_adds,
        m.recall_0p1d,
        m.map_adds
    );
}

pub fn metrics_table(f: &MetricsFile) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>5} {:>6} {:>7} {:>9} {:>9} {:>7} {:>7} {:>7}",
        "label", "gt", "pred", "matched", "ADD mm", "ADD-S mm", "AUC", "0.1d", "mAP"
    );
    for (label, m) in &f.report.per_label {
        metric_row(&mut out, label, m);
    }
    metric_row(&mut out, "all", &f.report.aggregate);
    if let Some(r) = &f.refinement {
        let _ = writeln!(out, "\nADD-S errors (in mm)   before   after");
        let _ = writeln!(
            out,
            "inlier candidates    {:>8.2} {:>7.2}   (n = {} / {})",
            r.before_adds * 1e3,
            r.after_adds * 1e3,
            r.n_before,
            r.n_after
        );
    }
    out
}

fn stats_table(s: &SolveStats) -> String {
    let mut out = String::new();
    let rows: [(&str, String); 10] = [
        ("candidates", s.candidates_in.to_string()),
        ("after filter", s.candidates_after_filter.to_string()),
        ("view pairs", s.accepted_view_pairs.to_string()),
        ("edges", s.edges.to_string()),
        ("components", s.components.to_string()),
        ("inliers", s.inliers.to_string()),
        ("objects", s.objects_after_nms.to_string()),
        ("initial loss", format!("{:.4}", s.initial_loss)),
        ("final loss", format!("{:.4}", s.final_loss)),
        ("lm iterations", s.lm_iterations.to_string()),
    ];
    for (k, v) in rows {
        let _ = writeln!(out, "  {k:<14} {v}");
    }
    if !s.disconnected_views.is_empty() {
        let _ = writeln!(out, "  disconnected   {}", s.disconnected_views.join(", "));
    }
    out
}

fn describe(text: &str) -> Result<String, CliError> {
    let value: serde_json::Value = parse_json(text)?;
    let has = |k: &str| value.get(k).is_some();
    let mut out = String::new();
    if has("report") {
        out += &metrics_table(&parse_json::<MetricsFile>(text)?);
    } else if has("status") {
        let d: DiagnosticFile = parse_json(text)?;
        let _ = writeln!(out, "solve failed ({}): {}", d.status, d.message);
        out += &stats_table(&d.stats);
    } else if has("predictions") {
        let e: EstimateFile = parse_json(text)?;
        let _ = writeln!(out, "estimate: {} cameras, {} objects, {} per-view predictions", e.cameras.len(), e.objects.len(), e.predictions.len());
        out += &stats_table(&e.stats);
        for o in &e.objects {
            let views: Vec<&str> = o.members.iter().map(|m| m.view_id.as_str()).collect();
            let t = &o.pose;
            let _ = writeln!(
                out,
                "  object {:>3} {:<14} score {:>6.3} at ({:+.3}, {:+.3}, {:+.3}) seen in {}",
                o.id, o.label, o.score, t[3], t[7], t[11], views.join(" ")
            );
        }
    } else if has("provenance") {
        let g: GroundTruthFile = parse_json(text)?;
        let outliers = g.provenance.iter().filter(|p| p.is_none()).count();
        let _ = writeln!(
            out,
            "ground truth: {} objects, {} views, {} candidates ({} outliers)",
            g.objects.len(),
            g.views.len(),
            g.provenance.len(),
            outliers
        );
        for v in &g.views {
            let _ = writeln!(out, "  {}: visible {:?}", v.view_id, v.visible);
        }
    } else {
        return Err(config_err("not an estimate, diagnostic, metric or ground-truth file"));
    }
    Ok(out)
}

pub fn run(a: &Args) -> Result<(), CliError> {
    for path in &a.files {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let body = describe(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        println!("== {}", path.display());
        print!("{body}");
    }
    Ok(())
}
