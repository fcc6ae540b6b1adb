use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use henon_core::constants::{predict_cases, AsymptoticConstants, ProblemParams, GAMMA_QUOTED};
use henon_core::nehari::minimize;
use henon_core::nodal::{analyze, segment, write_labels_csv};
use henon_core::radial::{henon_radial, RadialProfile};
use henon_core::spectrum::{morse_index_full, morse_index_symmetric, radial_index_lower_bound};
use henon_core::SectorMesh;
use serde::Serialize;

use crate::cell::{read_field, write_field, SolutionRecord};
use crate::config::Settings;
use crate::output::{sig10, table, to_json, write_json};
use crate::report::build_report;
use crate::sweep::{phase_csv, run_sweep, Manifest};
use crate::{exit, Failure};

const AFTER_HELP: &str = "\
Lists: --alpha and --p take `a,b,c` or `start:stop:step` (stop included);
--n takes `a..b` (inclusive), `a,b` or a single value.
Config: --config FILE reads `key = value` lines (alpha, p, n, nr, ntheta,
grading, init, cycle_init, seed, restarts, max_iterations,
residual_tolerance, perturbation_amplitude, band_epsilon); flags win.
Env: HENON_THREADS caps the worker pool.
Exit codes: 0 ok, 2 usage or input error, 3 solver failure,
4 paper-consistency finding.";

#[derive(Debug, Parser)]
#[command(name = "henon", version, about = "Least-energy nodal solutions of the Hénon problem on the disc", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// t̄, κ, γ and the per-α threshold table.
    Constants(Common),
    /// Radial two-zone solutions by shooting.
    Radial(Common),
    /// Minimize on the symmetric nodal Nehari set for one (α, p, n).
    Solve(Common),
    /// Sweep over α, p and n; one JSON per cell plus manifest and phase CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Re-run the settings recorded in a previous manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Nodal regions and case of a field dump.
    Classify {
        field: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Morse index of a field dump.
    Morse {
        field: PathBuf,
        /// Count on the full space instead of the symmetric subspace.
        #[arg(long)]
        full: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Markdown and CSV tables from a sweep directory.
    Report {
        dir: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub nr: Option<String>,
    #[arg(long)]
    pub ntheta: Option<String>,
    /// radial-perturbed | two-bump | annular-split
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub restarts: Option<String>,
    /// auto | uniform | boundary | origin:<scale>
    #[arg(long)]
    pub grading: Option<String>,
    #[arg(long)]
    pub band_epsilon: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Common {
    fn settings(&self, base: Settings) -> Result<Settings, Failure> {
        let mut s = base;
        if let Some(path) = &self.config {
            s.apply_file(path)?;
        }
        let flags = [
            ("alpha", &self.alpha),
            ("p", &self.p),
            ("n", &self.n),
            ("nr", &self.nr),
            ("ntheta", &self.ntheta),
            ("init", &self.init),
            ("seed", &self.seed),
            ("restarts", &self.restarts),
            ("grading", &self.grading),
            ("band_epsilon", &self.band_epsilon),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                s.set(key, v)?;
            }
        }
        s.validate()?;
        Ok(s)
    }

    fn out_dir(&self) -> Result<Option<&Path>, Failure> {
        if let Some(d) = &self.out {
            fs::create_dir_all(d).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", d.display())))?;
        }
        Ok(self.out.as_deref())
    }
}

fn single<T: Copy>(v: &[T], what: &str) -> Result<T, Failure> {
    match v {
        [x] => Ok(*x),
        _ => Err(Failure::Usage(format!("{what} takes a single value here"))),
    }
}

fn emit<T: Serialize>(json: bool, value: &T, human: impl FnOnce() -> String) -> Result<(), Failure> {
    if json {
        print!("{}", to_json(value).map_err(|e| Failure::Usage(e.to_string()))?);
    } else {
        print!("{}", human());
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<i32, Failure> {
    match cli.command {
        Command::Constants(c) => constants(&c),
        Command::Radial(c) => radial(&c),
        Command::Solve(c) => solve(&c),
        Command::Sweep { common, manifest } => sweep(&common, manifest.as_deref()),
        Command::Classify { field, common } => classify(&field, &common),
        Command::Morse { field, full, common } => morse(&field, full, &common),
        Command::Report { dir, common } => report(&dir, &common),
    }
}

#[derive(Debug, Serialize)]
pub struct ThresholdRow {
    pub alpha: f64,
    pub multiplicity: i64,
    pub case1_max_n: i64,
    pub case2_max_n: i64,
    pub max_regions: i64,
    pub guaranteed_quasiradial: i64,
    pub radial_energy_limit: f64,
    pub radial_index_lower_bound: usize,
}

#[derive(Debug, Serialize)]
pub struct ConstantsReport {
    pub tbar: f64,
    pub tbar_residual: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub gamma_quoted: f64,
    pub gamma_discrepancy: f64,
    pub thresholds: Vec<ThresholdRow>,
}

pub fn constants_report(alphas: &[f64]) -> Result<ConstantsReport, Failure> {
    let c = AsymptoticConstants::compute();
    let thresholds = alphas
        .iter()
        .map(|&alpha| {
            let pred = predict_cases(&ProblemParams::new(alpha, 2.0, 1)?);
            Ok(ThresholdRow {
                alpha,
                multiplicity: pred.multiplicity,
                case1_max_n: pred.case1_max_n,
                case2_max_n: pred.case2_max_n,
                max_regions: pred.max_regions,
                guaranteed_quasiradial: pred.guaranteed_quasiradial,
                radial_energy_limit: c.radial_energy_limit(alpha),
                radial_index_lower_bound: radial_index_lower_bound(alpha),
            })
        })
        .collect::<henon_core::Result<Vec<_>>>()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(ConstantsReport {
        tbar: c.tbar,
        tbar_residual: c.tbar_residual(),
        kappa: c.kappa,
        gamma: c.gamma,
        gamma_quoted: GAMMA_QUOTED,
        gamma_discrepancy: c.gamma_discrepancy(),
        thresholds,
    })
}

fn constants(c: &Common) -> Result<i32, Failure> {
    let mut common = c.clone();
    if common.alpha.as_deref().is_some_and(|a| a.trim().is_empty()) {
        common.alpha = None;
    }
    let base = Settings { alpha: vec![0.0, 1.0, 2.0], ..Settings::default() };
    let s = common.settings(base)?;
    let rep = constants_report(&s.alpha)?;
    if let Some(dir) = common.out_dir()? {
        write_json(&dir.join("constants.json"), &rep)?;
    }
    emit(common.json, &rep, || {
        let mut out = format!(
            "tbar  = {}\nkappa = {}\ngamma = {} (quoted {}, difference {})\n\n",
            sig10(rep.tbar),
            sig10(rep.kappa),
            sig10(rep.gamma),
            rep.gamma_quoted,
            sig10(rep.gamma_discrepancy)
        );
        let rows: Vec<Vec<String>> = rep
            .thresholds
            .iter()
            .map(|r| {
                vec![
                    r.alpha.to_string(),
                    r.multiplicity.to_string(),
                    r.case1_max_n.to_string(),
                    r.case2_max_n.to_string(),
                    r.max_regions.to_string(),
                    r.guaranteed_quasiradial.to_string(),
                    sig10(r.radial_energy_limit),
                    r.radial_index_lower_bound.to_string(),
                ]
            })
            .collect();
        out.push_str(&table(
            &["alpha", "multiplicity", "case1 max n", "case2 max n", "max regions", "quasiradial", "radial pE limit", "radial index >="],
            &rows,
        ));
        out
    })?;
    Ok(exit::OK)
}

#[derive(Debug, Serialize)]
pub struct RadialRecord {
    pub p: f64,
    pub alpha: f64,
    pub interior_zero: f64,
    pub central_value: f64,
    pub dirichlet_energy: f64,
    pub p_energy: f64,
    pub target: f64,
}

impl RadialRecord {
    fn new(u: &RadialProfile, c: &AsymptoticConstants) -> Self {
        RadialRecord {
            p: u.p,
            alpha: u.alpha,
            interior_zero: u.interior_zero,
            central_value: u.central_value,
            dirichlet_energy: u.dirichlet_energy,
            p_energy: u.scaled_energy(),
            target: c.radial_energy_limit(u.alpha),
        }
    }
}

fn radial(c: &Common) -> Result<i32, Failure> {
    let s = c.settings(Settings::default())?;
    let dir = c.out_dir()?;
    let consts = AsymptoticConstants::compute();
    let mut records = Vec::new();
    for &alpha in &s.alpha {
        for &p in &s.p {
            let u = henon_radial(alpha, p, 1e-8).map_err(|e| Failure::Solver(e.to_string()))?;
            let rec = RadialRecord::new(&u, &consts);
            if let Some(dir) = dir {
                let stem = format!("radial_a{alpha}_p{p}");
                let mut csv = String::from("r,value\n");
                for (r, v) in u.nodes.iter().zip(&u.values) {
                    csv.push_str(&format!("{r:.16e},{v:.16e}\n"));
                }
                fs::write(dir.join(format!("{stem}.csv")), csv)?;
                write_json(&dir.join(format!("{stem}.json")), &rec)?;
            }
            records.push(rec);
        }
    }
    emit(c.json, &records, || {
        let rows: Vec<Vec<String>> = records
            .iter()
            .map(|r| {
                vec![
                    r.alpha.to_string(),
                    r.p.to_string(),
                    sig10(r.interior_zero),
                    sig10(r.central_value),
                    sig10(r.p * r.dirichlet_energy),
                    sig10(r.p_energy),
                    sig10(r.target),
                ]
            })
            .collect();
        table(&["alpha", "p", "interior zero", "u(0)", "p*D", "p*E", "limit"], &rows)
    })?;
    Ok(exit::OK)
}

fn solve(c: &Common) -> Result<i32, Failure> {
    let s = c.settings(Settings::default())?;
    let (alpha, p, n) = (single(&s.alpha, "--alpha")?, single(&s.p, "--p")?, single(&s.n, "--n")?);
    let params = ProblemParams::new(alpha, p, n)?;
    let grading = s.grading.resolve(alpha, p)?;
    let mesh = SectorMesh::new(n, s.nr, s.ntheta, grading, alpha)?;
    let sol = minimize(&s.solve_config(), &params, &mesh)?;
    let rec = SolutionRecord::from_solution(&sol);
    if let Some(dir) = c.out_dir()? {
        let stem = format!("solution_a{alpha}_p{p}_n{n}");
        write_json(&dir.join(format!("{stem}.json")), &rec)?;
        write_field(&dir.join(format!("{stem}_field.csv")), &mesh, &sol.field, p)?;
    }
    emit(c.json, &rec, || {
        format!(
            "p*E = {}\nresidual = {}\nconverged = {} after {} iterations ({} Newton)\ninit = {} seed = {}{}\n",
            sig10(rec.p_energy),
            sig10(rec.residual),
            rec.converged,
            rec.iterations_used,
            rec.newton_iterations,
            rec.init_kind,
            rec.seed,
            if rec.multi_basin { "\nrestarts reached different energies" } else { "" }
        )
    })?;
    Ok(if rec.converged { exit::OK } else { exit::SOLVER })
}

fn sweep(c: &Common, manifest: Option<&Path>) -> Result<i32, Failure> {
    let s = match manifest {
        Some(path) => {
            let m = Manifest::read(path)?;
            c.settings(m.settings)?
        }
        None => c.settings(Settings::default())?,
    };
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("sweep_out"));
    let summary = run_sweep(&s, &out)?;
    emit(c.json, &summary.records.iter().map(|r| &r.flags).collect::<Vec<_>>(), || {
        let mut out = phase_csv(&summary.records);
        for r in &summary.records {
            for f in &r.flags {
                out.push_str(&format!("finding alpha={} p={} n={}: {f}\n", r.alpha, r.p, r.n));
            }
            if let Some(e) = &r.error {
                out.push_str(&format!("failure alpha={} p={} n={}: {e}\n", r.alpha, r.p, r.n));
            }
        }
        out
    })?;
    Ok(if summary.failures > 0 {
        exit::SOLVER
    } else if summary.inconsistent > 0 {
        exit::INCONSISTENT
    } else {
        exit::OK
    })
}

fn classify(field: &Path, c: &Common) -> Result<i32, Failure> {
    let (side, mesh, u) = read_field(field).map_err(Failure::Usage)?;
    let mut s = c.settings(Settings::default())?;
    if c.band_epsilon.is_none() {
        s.band_epsilon = Settings::default().band_epsilon;
    }
    let params = ProblemParams::new(side.alpha, side.p, side.n)?;
    let rep = analyze(&mesh, &u, &params, s.band_epsilon)?;
    if let Some(dir) = c.out_dir()? {
        let seg = segment(&mesh, &u, s.band_epsilon)?;
        let f = fs::File::create(dir.join("labels.csv"))?;
        write_labels_csv(&mesh, &seg, std::io::BufWriter::new(f))?;
        write_json(&dir.join("nodal.json"), &rep)?;
    }
    emit(c.json, &rep, || {
        let mut out = format!(
            "case = {}{}\nregions = {} (per sector {})\nnodal set: origin {} boundary {}\nadmissible = {}\n\n",
            rep.case,
            if rep.quasiradial { " (quasiradial)" } else { "" },
            rep.region_count,
            rep.sector_region_count,
            rep.origin_in_nodal_set,
            rep.nodal_set_touches_boundary,
            rep.admissible
        );
        let rows: Vec<Vec<String>> = rep
            .regions
            .iter()
            .enumerate()
            .map(|(k, r)| {
                vec![
                    k.to_string(),
                    if r.sign > 0 { "+".into() } else { "-".into() },
                    r.is_n_invariant.to_string(),
                    sig10(r.scaled_dirichlet),
                    sig10(r.dirichlet_ratio),
                    sig10(r.energy_ratio),
                ]
            })
            .collect();
        out.push_str(&table(&["region", "sign", "invariant", "p*D", "p*D/8pie", "p*E/4pie"], &rows));
        out
    })?;
    Ok(if rep.admissible { exit::OK } else { exit::INCONSISTENT })
}

fn morse(field: &Path, full: bool, c: &Common) -> Result<i32, Failure> {
    let (side, mesh, u) = read_field(field).map_err(Failure::Usage)?;
    let rep = if full {
        morse_index_full(&mesh, &u, side.p)?
    } else {
        morse_index_symmetric(&mesh, &u, side.p)?
    };
    if let Some(dir) = c.out_dir()? {
        write_json(&dir.join("morse.json"), &rep)?;
    }
    emit(c.json, &rep, || {
        format!(
            "negative = {}\nmarginal = {}\nmethod = {:?} on {}\nconsistent = {}\nlowest = {}\n",
            rep.negative_count,
            rep.marginal_count,
            rep.method,
            rep.grid,
            rep.consistent,
            rep.smallest_eigenvalues.iter().map(|x| sig10(*x)).collect::<Vec<_>>().join(", ")
        )
    })?;
    Ok(exit::OK)
}

fn report(dir: &Path, c: &Common) -> Result<i32, Failure> {
    let rep = build_report(dir)?;
    let out = c.out.clone().unwrap_or_else(|| dir.to_path_buf());
    fs::create_dir_all(&out)?;
    fs::write(out.join("report.md"), &rep.markdown)?;
    fs::write(out.join("report.csv"), &rep.csv)?;
    print!("{}", rep.markdown);
    Ok(exit::OK)
}
