//! Sweeps over `(α, p, n)` with one task per cell.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{run_cell, write_cell, CellRecord};
use crate::config::Settings;
use crate::output::write_json;
use crate::Failure;

pub const MANIFEST: &str = "manifest.json";
pub const PHASE_CSV: &str = "phase.csv";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellOutcome {
    pub alpha: f64,
    pub p: f64,
    pub n: usize,
    pub converged: bool,
    pub p_energy: Option<f64>,
    pub case: Option<String>,
    pub m_n: Option<usize>,
    pub region_count: Option<usize>,
    pub consistent: bool,
    pub wall_seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub tool_version: String,
    pub settings: Settings,
    pub cells: Vec<CellOutcome>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("corrupt manifest {}: {e}", path.display())))
    }
}

pub struct SweepSummary {
    pub records: Vec<CellRecord>,
    pub failures: usize,
    pub inconsistent: usize,
}

/// Runs every cell, writes per-cell JSON and field dumps, the manifest and
/// the phase CSV. Cells finish in any order; outputs are ordered by cell.
pub fn run_sweep(settings: &Settings, out: &Path) -> Result<SweepSummary, Failure> {
    settings.validate().map_err(|e| Failure::Usage(e.0))?;
    fs::create_dir_all(out).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", out.display())))?;
    let cells: Vec<(f64, f64, usize)> = settings
        .alpha
        .iter()
        .flat_map(|&a| settings.p.iter().flat_map(move |&p| settings.n.iter().map(move |&n| (a, p, n))))
        .collect();
    let log = Mutex::new(
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(out.join("sweep.log"))
            .map_err(|e| Failure::Usage(e.to_string()))?,
    );
    let records: Vec<CellRecord> = cells
        .par_iter()
        .map(|&(a, p, n)| {
            let run = run_cell(settings, a, p, n);
            let write_err = write_cell(out, &run).err();
            let mut rec = run.record;
            if let Some(e) = write_err {
                rec.error.get_or_insert(format!("write failed: {e}"));
            }
            if let Ok(mut f) = log.lock() {
                let _ = writeln!(
                    f,
                    "alpha={} p={} n={} case={} converged={} consistent={} seconds={:.1}",
                    a,
                    p,
                    n,
                    rec.case.as_deref().unwrap_or("-"),
                    rec.converged,
                    rec.consistent,
                    rec.wall_seconds
                );
            }
            rec
        })
        .collect();
    let seconds = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest = Manifest {
        run_id: format!("{seconds}-{}", settings.seed),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        settings: settings.clone(),
        cells: records.iter().map(outcome).collect(),
    };
    write_json(&out.join(MANIFEST), &manifest).map_err(|e| Failure::Usage(e.to_string()))?;
    fs::write(out.join(PHASE_CSV), phase_csv(&records)).map_err(|e| Failure::Usage(e.to_string()))?;
    let failures = records.iter().filter(|r| r.failed()).count();
    let inconsistent = records.iter().filter(|r| !r.failed() && !r.consistent).count();
    Ok(SweepSummary { records, failures, inconsistent })
}

fn outcome(r: &CellRecord) -> CellOutcome {
    CellOutcome {
        alpha: r.alpha,
        p: r.p,
        n: r.n,
        converged: r.converged,
        p_energy: r.solution.as_ref().map(|s| s.p_energy),
        case: r.case.clone(),
        m_n: r.m_n,
        region_count: r.region_count,
        consistent: r.consistent,
        wall_seconds: r.wall_seconds,
        error: r.error.clone(),
    }
}

/// `alpha,p,n,case,regions,m_n,p_energy,predicted_admissible,consistent`.
pub fn phase_csv(records: &[CellRecord]) -> String {
    let mut s = String::from("alpha,p,n,case,regions,m_n,p_energy,predicted_admissible,consistent\n");
    for r in records {
        let opt = |v: Option<String>| v.unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.alpha,
            r.p,
            r.n,
            r.case.clone().unwrap_or_else(|| "failed".into()),
            opt(r.region_count.map(|c| c.to_string())),
            opt(r.m_n.map(|c| c.to_string())),
            opt(r.solution.as_ref().map(|s| format!("{:.16e}", s.p_energy))),
            r.predicted_admissible,
            r.consistent
        ));
    }
    s
}
