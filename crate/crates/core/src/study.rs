//! Convergence studies and energy checks, plus CSV and markdown output of the
//! resulting error tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::analysis::{compute_error_norms, eoc, ErrorEvaluator, ErrorNorms, Sampling, Trajectory};
use crate::error::{Error, Result};
use crate::fem::{build_space, unit_square_mesh};
use crate::lifting::lift;
use crate::problems::ProblemId;
use crate::stepper::{integrate, make_system, InitialMode, TimePartition};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineMode {
    /// halve `tau` only, mesh fixed
    TimeOnly,
    /// halve `tau` and `h` together
    SpaceTime,
}

impl FromStr for RefineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "time_only" | "time" => Ok(RefineMode::TimeOnly),
            "spacetime" | "space_time" => Ok(RefineMode::SpaceTime),
            other => Err(Error::invalid(format!("unknown refine mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for RefineMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RefineMode::TimeOnly => "time_only",
            RefineMode::SpaceTime => "spacetime",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub problem: ProblemId,
    pub k: usize,
    pub r: usize,
    pub levels: usize,
    pub refine_mode: RefineMode,
    /// steps on level 0
    pub n0: usize,
    pub mesh_level0: usize,
    pub samples_per_slab: usize,
    /// Gauss points per slab for the `L^2`-in-time norms; `None` means `k + 3`
    pub time_quad_pts: Option<usize>,
    pub initial_mode: InitialMode,
    /// relative tolerance of the CG projection and mass solves
    pub cg_tol: f64,
    /// output prefix for `<prefix>_lifted.csv`, `<prefix>_unlifted.csv`, `<prefix>.md`
    pub output: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig::for_problem(ProblemId::Poly)
    }
}

impl StudyConfig {
    /// Defaults that follow the reference experiment for each problem.
    pub fn for_problem(problem: ProblemId) -> Self {
        let base = StudyConfig {
            problem,
            k: 2,
            r: 2,
            levels: 5,
            refine_mode: RefineMode::TimeOnly,
            n0: 10,
            mesh_level0: 0,
            samples_per_slab: 1000,
            time_quad_pts: None,
            initial_mode: InitialMode::Ritz,
            cg_tol: crate::fem::PROJECTION_TOL,
            output: None,
        };
        match problem {
            ProblemId::Poly => base,
            ProblemId::Trig => StudyConfig {
                r: 3,
                levels: 4,
                refine_mode: RefineMode::SpaceTime,
                ..base
            },
            ProblemId::Energy => StudyConfig {
                levels: 1,
                n0: 20,
                mesh_level0: 1,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.r < 1 || self.levels < 1 || self.n0 < 1 || self.samples_per_slab < 1 {
            return Err(Error::invalid("k, r, levels, n0 and samples_per_slab must all be at least 1"));
        }
        if !(self.cg_tol > 0.0) {
            return Err(Error::invalid("cg_tol must be positive"));
        }
        Ok(())
    }

    pub fn time_quad_pts(&self) -> usize {
        self.time_quad_pts.unwrap_or(self.k + 3)
    }

    pub fn steps(&self, level: usize) -> usize {
        self.n0 << level
    }

    pub fn mesh_level(&self, level: usize) -> usize {
        match self.refine_mode {
            RefineMode::TimeOnly => self.mesh_level0,
            RefineMode::SpaceTime => self.mesh_level0 + level,
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |e: std::num::ParseIntError| Error::invalid(format!("{key}: {e}"));
        match key.trim() {
            "problem" => self.problem = value.parse()?,
            "k" => self.k = value.parse().map_err(bad)?,
            "r" => self.r = value.parse().map_err(bad)?,
            "levels" => self.levels = value.parse().map_err(bad)?,
            "refine" | "refine_mode" => self.refine_mode = value.parse()?,
            "n0" => self.n0 = value.parse().map_err(bad)?,
            "mesh_level0" => self.mesh_level0 = value.parse().map_err(bad)?,
            "samples_per_slab" => self.samples_per_slab = value.parse().map_err(bad)?,
            "time_quad_pts" => self.time_quad_pts = Some(value.parse().map_err(bad)?),
            "initial" | "initial_mode" => self.initial_mode = value.parse()?,
            "cg_tol" => {
                self.cg_tol = value
                    .parse()
                    .map_err(|e| Error::invalid(format!("cg_tol: {e}")))?
            }
            "output" => self.output = Some(PathBuf::from(value)),
            other => return Err(Error::invalid(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    /// Parses a flat `key = value` file (`#` starts a comment). A `problem` key
    /// resets all other keys to that problem's defaults, so it is applied first.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("line {}: expected key = value", lineno + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let problem = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "problem")
            .map(|(_, v)| v.parse())
            .transpose()?
            .unwrap_or(ProblemId::Poly);
        let mut cfg = StudyConfig::for_problem(problem);
        for (k, v) in pairs.iter().filter(|(k, _)| k != "problem") {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Errors of one refinement level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub level: usize,
    pub tau: f64,
    /// mesh diameter
    pub h: f64,
    pub unlifted: ErrorNorms,
    pub lifted: ErrorNorms,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<LevelResult>,
}

impl ErrorReport {
    fn column(&self, lifted: bool, idx: usize) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| if lifted { r.lifted } else { r.unlifted }.as_array()[idx])
            .collect()
    }

    /// Per-level EOC of each of the six norms (first level: `None`).
    pub fn eoc(&self, lifted: bool) -> Vec<[Option<f64>; 6]> {
        let cols: Vec<Vec<Option<f64>>> = (0..6).map(|i| eoc(&self.column(lifted, i), 2.0)).collect();
        (0..self.rows.len())
            .map(|l| std::array::from_fn(|i| cols[i][l]))
            .collect()
    }

    /// EOC column of one named norm.
    pub fn eoc_of(&self, lifted: bool, norm: &str) -> Vec<Option<f64>> {
        let idx = ErrorNorms::NAMES.iter().position(|n| *n == norm).expect("unknown norm name");
        eoc(&self.column(lifted, idx), 2.0)
    }
}

/// Runs one level of a study.
pub fn run_level(config: &StudyConfig, level: usize) -> Result<LevelResult> {
    let problem = config.problem.build();
    let mesh = unit_square_mesh(config.mesh_level(level));
    let space = Arc::new(build_space(mesh, config.r)?.with_solver_tol(config.cg_tol));
    let system = make_system(space.clone(), &problem, config.initial_mode)?;
    let partition = TimePartition::uniform(problem.final_time, config.steps(level), config.k)?;
    let traj = integrate(&system, &partition)?;
    let lifted = lift(traj, &system)?;
    let evaluator = ErrorEvaluator::new(&space)?;
    let sampling = Sampling {
        samples_per_slab: config.samples_per_slab,
        time_quad_pts: config.time_quad_pts(),
    };
    let sols: [&dyn Trajectory; 2] = [lifted.base(), &lifted];
    let norms = compute_error_norms(&sols, &evaluator, &problem, sampling)?;
    Ok(LevelResult {
        level,
        tau: partition.max_tau(),
        h: mesh.diameter(),
        unlifted: norms[0],
        lifted: norms[1],
    })
}

/// Runs all levels, writing tables when an output prefix is configured.
pub fn run_study(config: &StudyConfig) -> Result<ErrorReport> {
    config.validate()?;
    let mut report = ErrorReport::default();
    for level in 0..config.levels {
        let row = run_level(config, level).map_err(|e| e.with_context(format!("level {level}")))?;
        report.rows.push(row);
    }
    if let Some(prefix) = &config.output {
        write_tables(&report, prefix)?;
    }
    Ok(report)
}

/// Nodal energies of the base and lifted solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub steps: usize,
    pub base: Vec<f64>,
    pub lifted: Vec<f64>,
}

impl EnergyReport {
    fn drift(e: &[f64]) -> f64 {
        let e0 = e[0];
        e.iter().map(|v| (v - e0).abs() / e0).fold(0.0, f64::max)
    }

    pub fn max_drift_base(&self) -> f64 {
        Self::drift(&self.base)
    }

    pub fn max_drift_lifted(&self) -> f64 {
        Self::drift(&self.lifted)
    }
}

/// Energy `U1^T M U1 + U0^T A U0` at every `t_n` for the base and lifted solution
/// of the finest configured level.
pub fn run_energy(config: &StudyConfig) -> Result<EnergyReport> {
    config.validate()?;
    let level = config.levels - 1;
    let problem = config.problem.build();
    let space = Arc::new(build_space(unit_square_mesh(config.mesh_level(level)), config.r)?.with_solver_tol(config.cg_tol));
    let system = make_system(space.clone(), &problem, config.initial_mode)?;
    let steps = config.steps(level);
    let partition = TimePartition::uniform(problem.final_time, steps, config.k)?;
    let traj = integrate(&system, &partition)?;
    let lifted = lift(traj, &system)?;
    let energy = |s: &[Vec<f64>; 2]| space.mass().quadratic_form(&s[1]) + space.stiffness().quadratic_form(&s[0]);
    let mut base = Vec::with_capacity(steps + 1);
    let mut lift_e = Vec::with_capacity(steps + 1);
    for n in 0..=steps {
        let state = [
            lifted.base().value_at_time_node(0, n).to_vec(),
            lifted.base().value_at_time_node(1, n).to_vec(),
        ];
        base.push(energy(&state));
        let slab = n.saturating_sub(1);
        lift_e.push(energy(&lifted.eval_in_slab(slab, partition.times()[n])));
    }
    Ok(EnergyReport {
        steps,
        base,
        lifted: lift_e,
    })
}

pub const CSV_HEADER: [&str; 15] = [
    "level",
    "tau",
    "h",
    "e0_linf",
    "eoc",
    "e1_linf",
    "eoc",
    "e0_l2",
    "eoc",
    "e1_l2",
    "eoc",
    "energy_linf",
    "eoc",
    "energy_l2",
    "eoc",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// CSV text of the lifted or unlifted block.
pub fn to_csv(report: &ErrorReport, lifted: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    let eocs = report.eoc(lifted);
    for (row, e) in report.rows.iter().zip(&eocs) {
        let vals = if lifted { row.lifted } else { row.unlifted }.as_array();
        let mut rec = vec![row.level.to_string(), format!("{:e}", row.tau), format!("{:e}", row.h)];
        for i in 0..6 {
            rec.push(format!("{:e}", vals[i]));
            rec.push(fmt_opt(e[i]));
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Parses one CSV block into `(level, tau, h, norms)` rows.
pub fn parse_csv(text: &str) -> Result<Vec<(usize, f64, f64, ErrorNorms)>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Parse("unexpected CSV header".into()));
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}")));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let level = rec[0].trim().parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?;
        let mut vals = [0.0; 6];
        for (i, v) in vals.iter_mut().enumerate() {
            *v = num(&rec[3 + 2 * i])?;
        }
        rows.push((level, num(&rec[1])?, num(&rec[2])?, ErrorNorms::from_array(vals)));
    }
    Ok(rows)
}

/// Rebuilds a report from its lifted and unlifted CSV blocks.
pub fn report_from_csv(lifted: &str, unlifted: &str) -> Result<ErrorReport> {
    let l = parse_csv(lifted)?;
    let u = parse_csv(unlifted)?;
    if l.len() != u.len() {
        return Err(Error::Parse("lifted and unlifted tables differ in length".into()));
    }
    let rows = l
        .into_iter()
        .zip(u)
        .map(|(a, b)| {
            if a.0 != b.0 {
                return Err(Error::Parse(format!("level mismatch: {} vs {}", a.0, b.0)));
            }
            Ok(LevelResult {
                level: a.0,
                tau: a.1,
                h: a.2,
                lifted: a.3,
                unlifted: b.3,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorReport { rows })
}

fn fmt_sci(v: f64) -> String {
    let s = format!("{v:.3e}");
    let (mant, exp) = s.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

fn fmt_eoc(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "--".to_string())
}

/// Markdown tables: `L^inf(L^2)`, `L^2(L^2)` and energy norms, each listing the
/// unlifted and lifted errors side by side.
pub fn to_markdown(report: &ErrorReport) -> String {
    let un_eoc = report.eoc(false);
    let li_eoc = report.eoc(true);
    let groups: [(&str, [(usize, &str); 2]); 3] = [
        ("L∞(L²)", [(0, "e⁰"), (1, "e¹")]),
        ("L²(L²)", [(2, "e⁰"), (3, "e¹")]),
        ("energy", [(4, "|||E|||_L∞"), (5, "|||E|||_L²")]),
    ];
    let mut out = String::new();
    for (title, cols) in groups {
        let _ = writeln!(out, "### Errors in {title}\n");
        let mut header = String::from("| τ | h |");
        for (_, name) in cols {
            let _ = write!(header, " {name} | EOC | {name} (lifted) | EOC |");
        }
        let _ = writeln!(out, "{header}");
        let _ = writeln!(out, "|---|---|{}", "---|".repeat(8));
        for (l, row) in report.rows.iter().enumerate() {
            let mut line = format!("| {} | {} |", fmt_sci(row.tau), fmt_sci(row.h));
            for (idx, _) in cols {
                let _ = write!(
                    line,
                    " {} | {} | {} | {} |",
                    fmt_sci(row.unlifted.as_array()[idx]),
                    fmt_eoc(un_eoc[l][idx]),
                    fmt_sci(row.lifted.as_array()[idx]),
                    fmt_eoc(li_eoc[l][idx])
                );
            }
            let _ = writeln!(out, "{line}");
        }
        out.push('\n');
    }
    out
}

pub fn table_paths(prefix: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let base = prefix.as_os_str().to_string_lossy().to_string();
    (
        PathBuf::from(format!("{base}_lifted.csv")),
        PathBuf::from(format!("{base}_unlifted.csv")),
        PathBuf::from(format!("{base}.md")),
    )
}

/// Writes `<prefix>_lifted.csv`, `<prefix>_unlifted.csv` and `<prefix>.md`.
pub fn write_tables(report: &ErrorReport, prefix: &Path) -> Result<()> {
    let (lifted, unlifted, md) = table_paths(prefix);
    std::fs::write(lifted, to_csv(report, true)?)?;
    std::fs::write(unlifted, to_csv(report, false)?)?;
    std::fs::write(md, to_markdown(report))?;
    Ok(())
}

/// Reads the two CSV blocks written by [`write_tables`].
pub fn read_tables(prefix: &Path) -> Result<ErrorReport> {
    let (lifted, unlifted, _) = table_paths(prefix);
    report_from_csv(&std::fs::read_to_string(lifted)?, &std::fs::read_to_string(unlifted)?)
}
