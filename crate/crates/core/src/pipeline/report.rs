use std::fmt::Write;

use super::PipelineOutput;
use crate::analytics::{anomaly_scan, ThresholdMode};
use crate::ingest::format_timestamp;

/// Robust z-score used for the anomaly section of the report.
const REPORT_ANOMALY_Z: f64 = 5.0;
const REPORT_ANOMALY_ROWS: usize = 10;

/// Plain-text run summary. Holds no timings, so reruns render identically.
pub fn render_report(out: &PipelineOutput) -> String {
    let mut s = String::new();
    let (t, n, p) = out.contributions.dim();
    let f = &out.factorization;
    let _ = writeln!(s, "run {}", out.run_id);
    let _ = writeln!(s, "dataset {}", out.dataset_id);
    let _ = writeln!(
        s,
        "tensor: {t} timestamps x {n} stations x {} species, {} to {}",
        out.species.len(),
        format_timestamp(&out.contributions.time_index[0]),
        format_timestamp(&out.contributions.time_index[t - 1])
    );
    let _ = writeln!(s, "config: {}", serde_json::to_string(&out.config).unwrap_or_default());

    let _ = writeln!(s, "\n[imputation]");
    let _ = writeln!(
        s,
        "policy {:?}, {} cells filled",
        out.imputation.policy, out.imputation.total
    );
    for c in &out.imputation.counts {
        let _ = writeln!(s, "  {} / {}: {}", c.station, c.feature, c.count);
    }

    let _ = writeln!(s, "\n[factorization]");
    let _ = writeln!(s, "p = {p}, iterations = {}, converged = {}", f.iterations, f.converged);
    let _ = writeln!(
        s,
        "objective {:.6e} -> {:.6e}, explained variance {:.4}",
        f.objective_trace[0],
        f.objective(),
        f.explained_variance_ratio
    );
    for prof in &out.profiles {
        let top: Vec<&str> = prof.top_species.iter().take(5).map(String::as_str).collect();
        let _ = writeln!(s, "  source {}: {}", prof.source_id, top.join(", "));
    }

    let _ = writeln!(s, "\n[stations]");
    let e = &out.embedding;
    let _ = writeln!(
        s,
        "first-step PC1 explains {:.4}{}; {:?} layout; k = {}",
        e.pc1_explained,
        if e.first_step_degenerate { " (degenerate)" } else { "" },
        out.config.dr_method,
        e.k
    );
    for c in &out.transitions.clusters {
        let _ = writeln!(s, "  cluster {}: {}", c.cluster_id, c.members.join(" "));
    }

    let _ = writeln!(s, "\n[characteristics]");
    for c in &out.characteristics {
        let (lead, val) =
            c.loadings.iter().enumerate().fold(
                (0, 0.0f64),
                |best, (k, &v)| if v.abs() > best.1.abs() { (k, v) } else { best },
            );
        let _ = writeln!(
            s,
            "  cluster {}: alpha {:.4}, leading source {} ({:+.4}), eigengap {:.4e}{}",
            c.cluster_id,
            c.alpha,
            out.source_ids[lead],
            val,
            c.eigengap,
            if c.reliable { "" } else { ", unreliable" }
        );
    }

    if !out.correlations.cols.is_empty() {
        let _ = writeln!(s, "\n[correlations]");
        let _ = writeln!(s, "  source\t{}", out.correlations.cols.join("\t"));
        for (row, cells) in out.correlations.rows.iter().zip(&out.correlations.r) {
            let cells: Vec<String> = cells
                .iter()
                .map(|c| c.map_or_else(|| "-".to_string(), |r| format!("{r:+.3}")))
                .collect();
            let _ = writeln!(s, "  {row}\t{}", cells.join("\t"));
        }
    }

    if let Some(pm25) = &out.pm25 {
        let found = anomaly_scan(pm25, ThresholdMode::RobustZ(REPORT_ANOMALY_Z));
        let _ = writeln!(s, "\n[pm25 anomalies, robust z > {REPORT_ANOMALY_Z}]");
        let _ = writeln!(s, "{} flagged", found.len());
        for a in found.iter().take(REPORT_ANOMALY_ROWS) {
            let _ = writeln!(
                s,
                "  {} {} {:.2} (z {:.1})",
                a.station_id,
                format_timestamp(&a.timestamp),
                a.value,
                a.score
            );
        }
    }

    if !out.warnings.is_empty() {
        let _ = writeln!(s, "\n[warnings]");
        for w in &out.warnings {
            let _ = writeln!(s, "  {w}");
        }
    }
    s
}
