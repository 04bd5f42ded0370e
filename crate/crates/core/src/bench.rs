//! Benchmark runner, Dolan-More performance profiles and CSV output.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::driver::{run_dfo_tr, DfoConfig, DfoTrace, ModelNorm, Termination};
use crate::error::{Error, Result};
use crate::problems::{get_problem, list, Problem};
use crate::recovery::fmt_f64;

/// Ratio assigned to a solver that never reached the target accuracy.
pub const FAIL_RATIO: f64 = (1u64 << 30) as f64;

/// Subdivisions per unit of `log2(tau)` in the profile grid.
const TAU_STEPS_PER_OCTAVE: usize = 8;

pub const RECORDS_HEADER: [&str; 8] = [
    "problem",
    "n",
    "solver",
    "acc",
    "fevals",
    "final_f",
    "final_gnorm",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Budget 15000; a second pass with `eps_g = delta = 1e-7` when the first
    /// stops on its tolerances before reaching the accuracy.
    Table1,
    /// Budget 5000, `eps_g = delta = 1e-5`, one pass, every problem at `n = 20`.
    Table3,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "table1" => Ok(Preset::Table1),
            "table3" => Ok(Preset::Table3),
            _ => Err(Error::InvalidArgument(format!(
                "unknown preset '{s}' (expected table1 or table3)"
            ))),
        }
    }

    pub fn budget(self) -> usize {
        match self {
            Preset::Table1 => 15000,
            Preset::Table3 => 5000,
        }
    }

    pub fn default_n(self) -> Option<usize> {
        match self {
            Preset::Table1 => None,
            Preset::Table3 => Some(20),
        }
    }

    fn second_pass_tol(self) -> Option<f64> {
        match self {
            Preset::Table1 => Some(1e-7),
            Preset::Table3 => None,
        }
    }
}

pub fn parse_solver(s: &str) -> Result<ModelNorm> {
    match s.to_ascii_lowercase().as_str() {
        "frob" | "dfo-tr-frob" => Ok(ModelNorm::Frobenius),
        "l1" | "dfo-tr-l1" => Ok(ModelNorm::L1),
        _ => Err(Error::InvalidArgument(format!(
            "unknown solver '{s}' (expected frob or l1)"
        ))),
    }
}

/// One problem of a benchmark: registry name and optional dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemSpec {
    pub name: String,
    pub n: Option<usize>,
}

impl ProblemSpec {
    /// `NAME` or `NAME:N`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None => Ok(Self {
                name: s.trim().to_string(),
                n: None,
            }),
            Some((name, n)) => {
                let n = n.trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!("bad dimension in problem spec '{s}'"))
                })?;
                Ok(Self {
                    name: name.trim().to_string(),
                    n: Some(n),
                })
            }
        }
    }

    /// `all` expands to every registry problem with a known minimum.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(list()
                .into_iter()
                .filter(|name| !name.starts_with("SYNTH"))
                .map(|name| Self {
                    name: name.to_string(),
                    n: None,
                })
                .collect());
        }
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(Self::parse)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub problems: Vec<ProblemSpec>,
    pub solvers: Vec<ModelNorm>,
    pub accs: Vec<u32>,
    pub budget: usize,
    pub preset: Preset,
    pub seed: u64,
}

impl BenchConfig {
    pub fn new(problems: Vec<ProblemSpec>, preset: Preset) -> Self {
        Self {
            problems,
            solvers: vec![ModelNorm::Frobenius, ModelNorm::L1],
            accs: vec![4, 6],
            budget: preset.budget(),
            preset,
            seed: 0,
        }
    }

    fn resolve(&self) -> Result<Vec<Problem>> {
        if self.problems.is_empty() || self.solvers.is_empty() || self.accs.is_empty() {
            return Err(Error::InvalidArgument(
                "need at least one problem, solver and accuracy".into(),
            ));
        }
        if self.budget == 0 {
            return Err(Error::InvalidArgument("budget must be positive".into()));
        }
        self.problems
            .iter()
            .map(|spec| {
                let p = get_problem(&spec.name, spec.n.or(self.preset.default_n()))?;
                if p.f_best.is_none() {
                    return Err(Error::InvalidArgument(format!(
                        "{} has no reference minimum value",
                        p.name
                    )));
                }
                Ok(p)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    pub problem: String,
    pub n: usize,
    pub solver: ModelNorm,
    pub acc: u32,
    /// Evaluations until the first iterate within `10^-acc` of the minimum;
    /// `None` means FAIL.
    pub fevals: Option<usize>,
    pub final_f: f64,
    pub final_gnorm: f64,
    /// Seconds; not written to CSV so that output stays reproducible.
    pub wall_time: f64,
}

impl BenchmarkRecord {
    pub fn status(&self) -> &'static str {
        if self.fevals.is_some() {
            "ok"
        } else {
            "FAIL"
        }
    }

    fn sort_key(&self) -> (String, usize, &'static str, u32) {
        (self.problem.clone(), self.n, self.solver.label(), self.acc)
    }
}

fn run_cell(problem: &Problem, norm: ModelNorm, cfg: &BenchConfig) -> Option<DfoTrace> {
    let target = problem.f_best? + 10f64.powi(-(*cfg.accs.iter().max()? as i32));
    let base = DfoConfig {
        norm,
        max_fevals: cfg.budget,
        seed: cfg.seed,
        ..DfoConfig::default()
    };
    let first = run_dfo_tr(|x| problem.value(x), &problem.start, &base).ok()?;
    let reached = first.fevals_to_reach(target).is_some();
    match cfg.preset.second_pass_tol() {
        Some(tol) if !reached && first.termination != Termination::Budget => {
            let tight = DfoConfig {
                eps_g: tol,
                delta_stop: tol,
                ..base
            };
            run_dfo_tr(|x| problem.value(x), &problem.start, &tight)
                .ok()
                .or(Some(first))
        }
        _ => Some(first),
    }
}

/// Runs every (problem, solver) cell once and derives one record per
/// accuracy. A driver error makes all of that cell's records FAIL.
/// Records come back sorted by problem, dimension, solver and accuracy.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<Vec<BenchmarkRecord>> {
    let problems = cfg.resolve()?;
    let mut records = Vec::new();
    for problem in &problems {
        let f_best = problem.f_best.expect("checked in resolve");
        for &norm in &cfg.solvers {
            let started = Instant::now();
            let trace = run_cell(problem, norm, cfg);
            let wall_time = started.elapsed().as_secs_f64();
            for &acc in &cfg.accs {
                let target = f_best + 10f64.powi(-(acc as i32));
                records.push(BenchmarkRecord {
                    problem: problem.name.clone(),
                    n: problem.n,
                    solver: norm,
                    acc,
                    fevals: trace.as_ref().and_then(|t| t.fevals_to_reach(target)),
                    final_f: trace.as_ref().map_or(f64::NAN, |t| t.f),
                    final_gnorm: trace.as_ref().map_or(f64::NAN, |t| t.final_gnorm),
                    wall_time,
                });
            }
        }
    }
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    records.dedup_by(|a, b| a.sort_key() == b.sort_key());
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    pub acc: u32,
    /// Solver labels, one per column of `rho`.
    pub solvers: Vec<String>,
    /// Increasing, starting at 1.
    pub tau: Vec<f64>,
    /// `rho[s][k]`: fraction of problems with ratio at most `tau[k]`.
    pub rho: Vec<Vec<f64>>,
}

/// Performance profile of the records with accuracy `acc`. A problem is
/// identified by name and dimension. Ties credit every tied solver; FAIL
/// counts as ratio [`FAIL_RATIO`]. The grid is uniform in `log2(tau)` with
/// every finite ratio added, and ends at the largest finite ratio, where each
/// curve equals the solver's success fraction.
pub fn performance_profile(records: &[BenchmarkRecord], acc: u32) -> Result<ProfileTable> {
    let rows: Vec<&BenchmarkRecord> = records.iter().filter(|r| r.acc == acc).collect();
    if rows.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no benchmark records with accuracy {acc}"
        )));
    }
    let mut solvers: Vec<String> = rows.iter().map(|r| r.solver.label().to_string()).collect();
    solvers.sort();
    solvers.dedup();
    let mut problems: Vec<(String, usize)> =
        rows.iter().map(|r| (r.problem.clone(), r.n)).collect();
    problems.sort();
    problems.dedup();

    // ratios[s][p]
    let mut ratios = vec![vec![FAIL_RATIO; problems.len()]; solvers.len()];
    for (pi, (name, n)) in problems.iter().enumerate() {
        let cell = |s: &str| {
            rows.iter()
                .find(|r| &r.problem == name && r.n == *n && r.solver.label() == s)
                .map(|r| r.fevals)
        };
        let counts: Vec<Option<usize>> = solvers
            .iter()
            .map(|s| {
                cell(s).ok_or_else(|| {
                    Error::InvalidArgument(format!("no record for {name} (n = {n}) and solver {s}"))
                })
            })
            .collect::<Result<_>>()?;
        let best = counts.iter().flatten().min().copied();
        for (si, c) in counts.iter().enumerate() {
            if let (Some(t), Some(b)) = (c, best) {
                ratios[si][pi] = (*t as f64 / b.max(1) as f64).max(1.0);
            }
        }
    }

    let finite: Vec<f64> = ratios
        .iter()
        .flatten()
        .copied()
        .filter(|r| *r < FAIL_RATIO)
        .collect();
    let top = finite.iter().copied().fold(1.0f64, f64::max);
    let octaves = top.log2();
    let steps = (octaves * TAU_STEPS_PER_OCTAVE as f64).ceil() as usize;
    let mut tau: Vec<f64> = (0..=steps)
        .map(|k| (k as f64 / TAU_STEPS_PER_OCTAVE as f64).exp2())
        .filter(|t| *t < top)
        .chain(finite)
        .chain([1.0, top])
        .collect();
    tau.sort_by(f64::total_cmp);
    tau.dedup();

    let np = problems.len() as f64;
    let rho = ratios
        .iter()
        .map(|rs| {
            tau.iter()
                .map(|t| rs.iter().filter(|r| **r <= *t).count() as f64 / np)
                .collect()
        })
        .collect();
    Ok(ProfileTable {
        acc,
        solvers,
        tau,
        rho,
    })
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

pub fn write_records_csv(records: &[BenchmarkRecord], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(RECORDS_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for r in records {
        w.write_record([
            r.problem.clone(),
            r.n.to_string(),
            r.solver.label().to_string(),
            r.acc.to_string(),
            r.fevals.map_or_else(String::new, |v| v.to_string()),
            fmt_f64(r.final_f),
            fmt_f64(r.final_gnorm),
            r.status().to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a file written by [`write_records_csv`]. Wall times read back as 0.
pub fn read_records_csv(path: &Path) -> Result<Vec<BenchmarkRecord>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = rd.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(RECORDS_HEADER) {
        return Err(Error::InvalidArgument(format!(
            "{}: unexpected header",
            path.display()
        )));
    }
    let bad = |line: usize, what: &str| {
        Error::InvalidArgument(format!("{}: row {line}: bad {what}", path.display()))
    };
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = i + 2;
        let float = |k: usize, what: &str| row[k].parse::<f64>().map_err(|_| bad(line, what));
        let fevals = match (&row[4], &row[7]) {
            ("", "FAIL") => None,
            (v, "ok") => Some(v.parse().map_err(|_| bad(line, "fevals"))?),
            _ => return Err(bad(line, "status")),
        };
        out.push(BenchmarkRecord {
            problem: row[0].to_string(),
            n: row[1].parse().map_err(|_| bad(line, "n"))?,
            solver: parse_solver(&row[2]).map_err(|_| bad(line, "solver"))?,
            acc: row[3].parse().map_err(|_| bad(line, "acc"))?,
            fevals,
            final_f: float(5, "final_f")?,
            final_gnorm: float(6, "final_gnorm")?,
            wall_time: 0.0,
        });
    }
    Ok(out)
}

pub fn write_profile_csv(profile: &ProfileTable, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let header: Vec<String> = std::iter::once("tau".to_string())
        .chain(profile.solvers.iter().map(|s| format!("rho_{s}")))
        .collect();
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (k, t) in profile.tau.iter().enumerate() {
        let row: Vec<String> = std::iter::once(fmt_f64(*t))
            .chain(profile.rho.iter().map(|r| fmt_f64(r[k])))
            .collect();
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes `records.csv`, one `profile_acc<acc>.csv` per profile, and
/// `profile.csv` for the highest accuracy. Returns the paths written.
pub fn emit_outputs(
    records: &[BenchmarkRecord],
    profiles: &[ProfileTable],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    let path = dir.join("records.csv");
    write_records_csv(records, &path)?;
    written.push(path);
    for p in profiles {
        let path = dir.join(format!("profile_acc{}.csv", p.acc));
        write_profile_csv(p, &path)?;
        written.push(path);
    }
    if let Some(top) = profiles.iter().max_by_key(|p| p.acc) {
        let path = dir.join("profile.csv");
        write_profile_csv(top, &path)?;
        written.push(path);
    }
    Ok(written)
}

/// One profile per distinct accuracy in `records`, ascending.
pub fn profiles_for(records: &[BenchmarkRecord]) -> Result<Vec<ProfileTable>> {
    let mut accs: Vec<u32> = records.iter().map(|r| r.acc).collect();
    accs.sort_unstable();
    accs.dedup();
    accs.into_iter()
        .map(|a| performance_profile(records, a))
        .collect()
}
