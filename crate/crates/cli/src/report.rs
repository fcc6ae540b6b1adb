//! Markdown and CSV summary of a sweep directory.

use std::fs;
use std::path::Path;

use henon_core::constants::{region_dirichlet_bound, region_energy_bound, AsymptoticConstants};

use crate::cell::{read_cell, CellRecord, RADIAL_ENERGY_SLACK};
use crate::output::sig10;
use crate::sweep::{Manifest, MANIFEST};
use crate::Failure;

/// Fraction of the asymptotic per-region bounds required at finite `p`.
pub const REGION_BOUND_FRACTION: f64 = 0.8;

pub struct Report {
    pub markdown: String,
    pub csv: String,
    pub flagged: usize,
    pub problems: Vec<String>,
}

struct Row {
    table: &'static str,
    alpha: f64,
    p: f64,
    n: usize,
    item: String,
    observed: String,
    expected: String,
    pass: bool,
}

pub fn build_report(dir: &Path) -> Result<Report, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", dir.display())))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|s| s.to_str()).unwrap_or("");
            name.starts_with("cell_") && name.ends_with(".json") && !name.ends_with("_field.json")
        })
        .collect();
    paths.sort();
    let mut problems = Vec::new();
    let mut cells = Vec::new();
    for p in &paths {
        match read_cell(p) {
            Ok(c) => cells.push(c),
            Err(e) => problems.push(format!("corrupt cell file {e}")),
        }
    }
    if let Ok(m) = Manifest::read(&dir.join(MANIFEST)) {
        for c in &m.cells {
            let stem = CellRecord::file_stem(c.alpha, c.p, c.n);
            if !dir.join(format!("{stem}.json")).exists() {
                problems.push(format!("missing cell file {stem}.json"));
            }
        }
    }
    if cells.is_empty() && problems.is_empty() {
        return Err(Failure::Usage(format!("no cell files in {}", dir.display())));
    }
    cells.sort_by(|a, b| (a.alpha, a.p, a.n).partial_cmp(&(b.alpha, b.p, b.n)).expect("finite parameters"));
    let rows = collect_rows(&cells);
    Ok(render(rows, problems))
}

fn collect_rows(cells: &[CellRecord]) -> Vec<Row> {
    let c = AsymptoticConstants::compute();
    let dbound = region_dirichlet_bound();
    let ebound = region_energy_bound();
    let mut rows = Vec::new();
    let mut seen_radial: Vec<(f64, f64)> = Vec::new();
    for cell in cells {
        let (a, p, n) = (cell.alpha, cell.p, cell.n);
        let target = c.radial_energy_limit(a);
        if let Some(rad) = cell.radial_p_energy {
            if !seen_radial.contains(&(a, p)) {
                seen_radial.push((a, p));
                rows.push(Row {
                    table: "energy",
                    alpha: a,
                    p,
                    n: 0,
                    item: "radial baseline p*E".into(),
                    observed: sig10(rad),
                    expected: format!("-> {}", sig10(target)),
                    pass: rad >= REGION_BOUND_FRACTION * 2.0 * ebound,
                });
            }
        }
        if let Some(err) = &cell.error {
            rows.push(Row {
                table: "energy",
                alpha: a,
                p,
                n,
                item: "solve".into(),
                observed: err.clone(),
                expected: "converged".into(),
                pass: false,
            });
            continue;
        }
        if let Some(s) = &cell.solution {
            let rad = cell.radial_p_energy.unwrap_or(f64::INFINITY);
            rows.push(Row {
                table: "energy",
                alpha: a,
                p,
                n,
                item: "p*E vs radial".into(),
                observed: sig10(s.p_energy),
                expected: format!("<= {}", sig10(rad)),
                pass: s.converged && s.p_energy <= rad + RADIAL_ENERGY_SLACK,
            });
            let k = cell.regions.len() as f64;
            rows.push(Row {
                table: "energy",
                alpha: a,
                p,
                n,
                item: "p*E vs 4*pi*e*regions".into(),
                observed: sig10(s.p_energy / (ebound * k.max(1.0))),
                expected: format!(">= {REGION_BOUND_FRACTION} (ratio)"),
                pass: s.p_energy >= REGION_BOUND_FRACTION * ebound * k,
            });
        }
        for (id, r) in cell.regions.iter().enumerate() {
            rows.push(Row {
                table: "regions",
                alpha: a,
                p,
                n,
                item: format!("region {id} ({}) p*D/8*pi*e", if r.sign > 0 { "+" } else { "-" }),
                observed: sig10(r.scaled_dirichlet / dbound),
                expected: format!(">= {REGION_BOUND_FRACTION}"),
                pass: r.scaled_dirichlet >= REGION_BOUND_FRACTION * dbound,
            });
            rows.push(Row {
                table: "regions",
                alpha: a,
                p,
                n,
                item: format!("region {id} p*E/4*pi*e"),
                observed: sig10(r.scaled_energy / ebound),
                expected: format!(">= {REGION_BOUND_FRACTION}"),
                pass: r.scaled_energy >= REGION_BOUND_FRACTION * ebound,
            });
        }
        if let Some(m) = cell.m_n {
            rows.push(Row {
                table: "morse",
                alpha: a,
                p,
                n,
                item: "m_n".into(),
                observed: m.to_string(),
                expected: "2".into(),
                pass: m == 2 && cell.morse.as_ref().is_none_or(|r| r.consistent),
            });
        }
        if let Some(count) = cell.region_count {
            rows.push(Row {
                table: "topology",
                alpha: a,
                p,
                n,
                item: "regions".into(),
                observed: count.to_string(),
                expected: format!("<= {}", cell.prediction.max_regions),
                pass: count as i64 <= cell.prediction.max_regions,
            });
        }
        if let Some(case) = &cell.case {
            rows.push(Row {
                table: "topology",
                alpha: a,
                p,
                n,
                item: "case".into(),
                observed: case.clone(),
                expected: admissible_set(cell),
                pass: cell.predicted_admissible,
            });
        }
    }
    rows
}

fn admissible_set(cell: &CellRecord) -> String {
    let pred = &cell.prediction;
    let mut set = Vec::new();
    if pred.case1_admissible {
        set.push("case1");
    }
    if pred.case2_admissible {
        set.push("case2");
    }
    set.push("case3");
    if cell.n as i64 > pred.multiplicity {
        set.push("radial");
    }
    set.join("/")
}

fn render(rows: Vec<Row>, problems: Vec<String>) -> Report {
    let flagged = rows.iter().filter(|r| !r.pass).count();
    let mut csv = String::from("table,alpha,p,n,item,observed,expected,status\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},\"{}\",\"{}\",\"{}\",{}\n",
            r.table,
            r.alpha,
            r.p,
            r.n,
            r.item,
            r.observed.replace('"', "'"),
            r.expected,
            if r.pass { "pass" } else { "flag" }
        ));
    }
    let mut md = String::from("# Sweep report\n\n");
    md.push_str(&format!("{} rows, {} flagged.\n", rows.len(), flagged));
    for (table, title) in [
        ("energy", "Energies"),
        ("regions", "Per-region energies"),
        ("morse", "Morse counts"),
        ("topology", "Nodal topology"),
    ] {
        md.push_str(&format!("\n## {title}\n\n| alpha | p | n | item | observed | expected | status |\n|---|---|---|---|---|---|---|\n"));
        for r in rows.iter().filter(|r| r.table == table) {
            let n = if r.n == 0 { "-".to_string() } else { r.n.to_string() };
            md.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {} |\n",
                r.alpha,
                r.p,
                n,
                r.item,
                r.observed,
                r.expected,
                if r.pass { "pass" } else { "**flag**" }
            ));
        }
    }
    if !problems.is_empty() {
        md.push_str("\n## Unreadable cells\n\n");
        for p in &problems {
            md.push_str(&format!("- {p}\n"));
        }
    }
    Report { markdown: md, csv, flagged, problems }
}
