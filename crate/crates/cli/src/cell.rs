//! One `(α, p, n)` cell: minimize, classify, count, compare.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use henon_core::constants::{predict_cases, CasePrediction, ProblemParams};
use henon_core::nehari::{minimize, radial_baseline, InitKind, RestartRecord, Solution};
use henon_core::nodal::{analyze, NodalReport, Region};
use henon_core::spectrum::{morse_index_symmetric, SpectralReport};
use henon_core::{Field, Grading, HenonError, SectorMesh};
use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::output::write_json;

/// Slack on the comparison with the radial baseline energy.
pub const RADIAL_ENERGY_SLACK: f64 = 1e-6;

/// Everything the harness needs to rebuild the mesh of a field dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub n: usize,
    #[serde(rename = "N_r")]
    pub n_r: usize,
    #[serde(rename = "N_theta")]
    pub n_theta: usize,
    pub alpha: f64,
    pub p: f64,
    pub grading: Grading,
    pub full_disc: bool,
}

impl FieldSidecar {
    pub fn mesh(&self) -> henon_core::Result<SectorMesh> {
        SectorMesh::new(self.n, self.n_r, self.n_theta, self.grading, self.alpha)
    }
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes `<stem>.csv` and the `<stem>.json` sidecar.
pub fn write_field(csv: &Path, mesh: &SectorMesh, field: &Field, p: f64) -> std::io::Result<()> {
    let sidecar = FieldSidecar {
        n: mesh.n(),
        n_r: mesh.n_r(),
        n_theta: mesh.n_theta(),
        alpha: mesh.alpha(),
        p,
        grading: mesh.grading(),
        full_disc: mesh.n() == 1,
    };
    write_json(&sidecar_path(csv), &sidecar)?;
    let w = BufWriter::new(File::create(csv)?);
    mesh.write_csv(field, w).map_err(std::io::Error::other)
}

/// Reads a field dump through its sidecar.
pub fn read_field(csv: &Path) -> Result<(FieldSidecar, SectorMesh, Field), String> {
    let side = sidecar_path(csv);
    let text = fs::read_to_string(&side).map_err(|e| format!("cannot read sidecar {}: {e}", side.display()))?;
    let sidecar: FieldSidecar = serde_json::from_str(&text).map_err(|e| format!("corrupt sidecar {}: {e}", side.display()))?;
    let mesh = sidecar.mesh().map_err(|e| e.to_string())?;
    let file = File::open(csv).map_err(|e| format!("cannot read {}: {e}", csv.display()))?;
    let mut values = Vec::with_capacity(mesh.shape().dofs());
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if k == 0 {
            if line.trim() != "r,theta,value" {
                return Err(format!("{}: unexpected header '{line}'", csv.display()));
            }
            continue;
        }
        let v = line
            .rsplit(',')
            .next()
            .and_then(|t| t.trim().parse::<f64>().ok())
            .ok_or_else(|| format!("{}: bad row {}", csv.display(), k + 1))?;
        values.push(v);
    }
    let field = Field::new(mesh.shape(), values).map_err(|e| e.to_string())?;
    Ok((sidecar, mesh, field))
}

/// Solution record without the field values (those live in the CSV dump).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub alpha: f64,
    pub p: f64,
    pub n: usize,
    pub energy: f64,
    pub p_energy: f64,
    pub residual: f64,
    pub strong_residual: f64,
    pub nehari_defect_plus: f64,
    pub nehari_defect_minus: f64,
    pub iterations_used: usize,
    pub newton_iterations: usize,
    pub init_kind: InitKind,
    pub seed: u64,
    pub converged: bool,
    pub restarts: Vec<RestartRecord>,
    pub multi_basin: bool,
    pub final_energies: Vec<f64>,
}

impl SolutionRecord {
    pub fn from_solution(s: &Solution) -> Self {
        let h = &s.energy_history;
        SolutionRecord {
            alpha: s.params.alpha(),
            p: s.params.p(),
            n: s.params.n(),
            energy: s.energy,
            p_energy: s.scaled_energy,
            residual: s.residual,
            strong_residual: s.strong_residual,
            nehari_defect_plus: s.nehari_defect_plus,
            nehari_defect_minus: s.nehari_defect_minus,
            iterations_used: s.iterations_used,
            newton_iterations: s.newton_iterations,
            init_kind: s.init_kind,
            seed: s.seed,
            converged: s.converged,
            restarts: s.restarts.clone(),
            multi_basin: s.multi_basin,
            final_energies: h[h.len().saturating_sub(5)..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub alpha: f64,
    pub p: f64,
    pub n: usize,
    pub nr: usize,
    pub ntheta: usize,
    pub grading: Option<Grading>,
    pub converged: bool,
    pub solution: Option<SolutionRecord>,
    pub radial_p_energy: Option<f64>,
    pub case: Option<String>,
    pub quasiradial: bool,
    pub region_count: Option<usize>,
    pub sector_region_count: Option<usize>,
    pub regions: Vec<Region>,
    pub nodal: Option<NodalReport>,
    pub m_n: Option<usize>,
    pub morse: Option<SpectralReport>,
    pub prediction: CasePrediction,
    pub predicted_admissible: bool,
    pub consistent: bool,
    pub flags: Vec<String>,
    pub wall_seconds: f64,
    pub error: Option<String>,
}

impl CellRecord {
    pub fn file_stem(alpha: f64, p: f64, n: usize) -> String {
        format!("cell_a{alpha}_p{p}_n{n}")
    }

    pub fn stem(&self) -> String {
        Self::file_stem(self.alpha, self.p, self.n)
    }

    /// Failed solve as opposed to a paper-consistency finding.
    pub fn failed(&self) -> bool {
        self.error.is_some() || !self.converged
    }
}

pub struct CellRun {
    pub record: CellRecord,
    pub mesh: Option<SectorMesh>,
    pub solution: Option<Solution>,
}

/// Solves and analyses one cell; errors end up in the record.
pub fn run_cell(settings: &Settings, alpha: f64, p: f64, n: usize) -> CellRun {
    let t = Instant::now();
    let params = ProblemParams::new(alpha, p, n);
    let prediction = params.as_ref().map(predict_cases).unwrap_or(CasePrediction {
        max_regions: 0,
        case1_max_n: 0,
        case2_max_n: 0,
        case1_admissible: false,
        case2_admissible: false,
        case3_forced: false,
        multiplicity: 0,
        guaranteed_quasiradial: 0,
    });
    let mut record = CellRecord {
        alpha,
        p,
        n,
        nr: settings.nr,
        ntheta: settings.ntheta,
        grading: None,
        converged: false,
        solution: None,
        radial_p_energy: None,
        case: None,
        quasiradial: false,
        region_count: None,
        sector_region_count: None,
        regions: Vec::new(),
        nodal: None,
        m_n: None,
        morse: None,
        prediction,
        predicted_admissible: false,
        consistent: false,
        flags: Vec::new(),
        wall_seconds: 0.0,
        error: None,
    };
    let outcome = (|| -> henon_core::Result<(SectorMesh, Solution)> {
        let params = params?;
        let grading = settings.grading.resolve(alpha, p)?;
        record.grading = Some(grading);
        let mesh = SectorMesh::new(n, settings.nr, settings.ntheta, grading, alpha)?;
        let sol = minimize(&settings.solve_config(), &params, &mesh)?;
        record.converged = sol.converged;
        record.solution = Some(SolutionRecord::from_solution(&sol));
        record.radial_p_energy = radial_baseline(&mesh, p).ok().map(|b| b.scaled_energy);
        let nodal = analyze(&mesh, &sol.field, &params, settings.band_epsilon)?;
        let morse = morse_index_symmetric(&mesh, &sol.field, p)?;
        record.m_n = Some(morse.negative_count);
        record.morse = Some(morse);
        record.case = Some(nodal.case.to_string());
        record.quasiradial = nodal.quasiradial;
        record.region_count = Some(nodal.region_count);
        record.sector_region_count = Some(nodal.sector_region_count);
        record.regions = nodal.regions.clone();
        record.predicted_admissible = nodal.admissible;
        record.nodal = Some(nodal);
        Ok((mesh, sol))
    })();
    let (mesh, solution) = match outcome {
        Ok((m, s)) => (Some(m), Some(s)),
        Err(e) => {
            record.error = Some(e.to_string());
            (None, None)
        }
    };
    record.flags = consistency_flags(&record);
    record.consistent = record.error.is_none() && record.flags.is_empty();
    record.wall_seconds = t.elapsed().as_secs_f64();
    CellRun { record, mesh, solution }
}

/// Paper-consistency findings for a finished cell.
pub fn consistency_flags(r: &CellRecord) -> Vec<String> {
    let mut flags = Vec::new();
    if r.error.is_some() {
        return flags;
    }
    if !r.converged {
        flags.push("not converged".into());
    }
    if let Some(case) = &r.case {
        if !r.predicted_admissible {
            flags.push(format!("case {case} outside the admissible set"));
        }
    }
    if let Some(count) = r.region_count {
        if count as i64 > r.prediction.max_regions {
            flags.push(format!("{count} regions exceed the bound {}", r.prediction.max_regions));
        }
    }
    if let Some(m) = r.m_n {
        if m != 2 {
            flags.push(format!("symmetric Morse index {m}, expected 2"));
        }
    }
    if let Some(ms) = &r.morse {
        if !ms.consistent {
            flags.push("Morse count unstable under threshold shift".into());
        }
    }
    if let (Some(s), Some(rad)) = (&r.solution, r.radial_p_energy) {
        if s.p_energy > rad + RADIAL_ENERGY_SLACK {
            flags.push(format!("energy {} above the radial baseline {}", s.p_energy, rad));
        }
    }
    if let Some(nodal) = &r.nodal {
        if !nodal.band_stable {
            flags.push(format!("region count not stable under band changes {:?}", nodal.band_sweep));
        }
    }
    flags
}

pub fn write_cell(dir: &Path, run: &CellRun) -> std::io::Result<()> {
    let stem = run.record.stem();
    write_json(&dir.join(format!("{stem}.json")), &run.record)?;
    if let (Some(mesh), Some(sol)) = (&run.mesh, &run.solution) {
        write_field(&dir.join(format!("{stem}_field.csv")), mesh, &sol.field, sol.params.p())?;
    }
    Ok(())
}

pub fn read_cell(path: &Path) -> Result<CellRecord, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

impl From<HenonError> for crate::Failure {
    fn from(e: HenonError) -> Self {
        match e {
            HenonError::Config(m) | HenonError::MeshMismatch(m) => crate::Failure::Usage(m),
            other => crate::Failure::Solver(other.to_string()),
        }
    }
}
