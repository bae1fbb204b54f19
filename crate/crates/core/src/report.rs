//! Experiment records, CSV emission, and the verification checks.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::adapt::{adaptive_loop, morley_eigen_table, AdaptiveConfig};
use crate::bfs::bfs_eigen_table_with;
use crate::error::{Error, Result};
use crate::linalg::{EigenOptions, EigenPair};
use crate::mesh::Domain;

pub const CSV_HEADER: [&str; 10] = [
    "method", "domain", "tau", "iter", "h", "ndof", "lambda1", "lambda2", "eta2", "seconds",
];

/// One row of an experiment trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub domain: String,
    pub tau: f64,
    pub iter: usize,
    pub h: Option<f64>,
    pub ndof: usize,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub eta2: Option<f64>,
    pub seconds: Option<f64>,
}

impl RunRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        method: &str,
        domain: Domain,
        tau: f64,
        iter: usize,
        h: Option<f64>,
        ndof: usize,
        pairs: &[EigenPair],
        eta2: Option<f64>,
        seconds: f64,
    ) -> Self {
        RunRecord {
            method: method.to_string(),
            domain: domain.name().to_string(),
            tau,
            iter,
            h,
            ndof,
            lambda1: pairs.first().map(|p| p.lambda),
            lambda2: pairs.get(1).map(|p| p.lambda),
            eta2,
            seconds: Some(seconds),
        }
    }

    /// λ_j for j = 1, 2.
    pub fn lambda(&self, j: usize) -> Option<f64> {
        match j {
            1 => self.lambda1,
            2 => self.lambda2,
            _ => None,
        }
    }
}

/// Floats are written in shortest round-trip form, so reading back is exact.
pub fn write_csv<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::InvalidArgument(format!(
            "unexpected CSV header: {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn read_csv_path(path: &std::path::Path) -> Result<Vec<RunRecord>> {
    read_csv(std::fs::File::open(path)?)
}

/// Fixed-width table with eigenvalues at 3 decimals.
pub fn format_table(records: &[RunRecord]) -> String {
    let opt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |x| format!("{x:.prec$}"));
    let mut s = format!(
        "{:>4} {:>10} {:>8} {:>12} {:>12} {:>12} {:>9}\n",
        "iter", "h", "ndof", "lambda1", "lambda2", "eta2", "seconds"
    );
    for r in records {
        let eta = r.eta2.map_or("-".to_string(), |x| format!("{x:.4e}"));
        let _ = writeln!(
            s,
            "{:>4} {:>10} {:>8} {:>12} {:>12} {:>12} {:>9}",
            r.iter,
            opt(r.h, 6),
            r.ndof,
            opt(r.lambda1, 3),
            opt(r.lambda2, 3),
            eta,
            opt(r.seconds, 2)
        );
    }
    s
}

/// Whether each present λ column is nondecreasing in row order.
pub fn monotone_columns(records: &[RunRecord]) -> Vec<(usize, bool)> {
    let mut out = Vec::new();
    for j in 1..=2 {
        let values: Vec<f64> = records.iter().filter_map(|r| r.lambda(j)).collect();
        if values.is_empty() {
            continue;
        }
        out.push((j, values.windows(2).all(|w| w[0] <= w[1])));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct BracketRow {
    pub iter: usize,
    pub ndof: usize,
    pub j: usize,
    pub lower: f64,
    pub upper: f64,
}

impl BracketRow {
    pub fn margin(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn holds(&self) -> bool {
        self.lower <= self.upper
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BracketReport {
    pub rows: Vec<BracketRow>,
}

impl BracketReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.holds()).count()
    }
}

/// Every Morley λ_j against the finest BFS λ_j of the same domain and τ.
pub fn verify_bracket(lower: &[RunRecord], upper: &[RunRecord]) -> Result<BracketReport> {
    let finest = upper
        .iter()
        .max_by_key(|r| r.ndof)
        .ok_or_else(|| Error::InvalidArgument("upper-bound trace is empty".into()))?;
    let mut rows = Vec::new();
    for r in lower {
        if r.domain != finest.domain || r.tau != finest.tau {
            return Err(Error::InvalidArgument(format!(
                "row {} is {} tau={}, upper bounds are {} tau={}",
                r.iter, r.domain, r.tau, finest.domain, finest.tau
            )));
        }
        for j in 1..=2 {
            match (r.lambda(j), finest.lambda(j)) {
                (Some(lower), Some(upper)) => rows.push(BracketRow {
                    iter: r.iter,
                    ndof: r.ndof,
                    j,
                    lower,
                    upper,
                }),
                (None, _) => {}
                (Some(_), None) => {
                    return Err(Error::InvalidArgument(format!("upper-bound trace has no lambda{j} column")));
                }
            }
        }
    }
    Ok(BracketReport { rows })
}

/// Least-squares slope of log η² against log Ndof over the last `window` rows
/// carrying a positive η².
pub fn slope_report(records: &[RunRecord], window: usize) -> Result<f64> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.eta2.filter(|&e| e > 0.0).map(|e| ((r.ndof as f64).ln(), e.ln())))
        .collect();
    if window < 2 || points.len() < window {
        return Err(Error::InsufficientRows {
            needed: window.max(2),
            found: points.len(),
        });
    }
    let tail = &points[points.len() - window..];
    let m = window as f64;
    let mx = tail.iter().map(|p| p.0).sum::<f64>() / m;
    let my = tail.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("Ndof constant over the window".into()));
    }
    Ok(sxy / sxx)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    UniformMorley,
    UniformBfs,
    AdaptiveMorley,
    Verify,
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub domain: Domain,
    pub tau: f64,
    pub levels: Option<usize>,
    pub max_dof: Option<usize>,
    pub theta: f64,
    pub target: usize,
    pub k: usize,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub dump_mesh: Option<PathBuf>,
    /// Trace checked in verify mode.
    pub input: Option<PathBuf>,
    /// Upper-bound trace for the bracket check in verify mode.
    pub upper: Option<PathBuf>,
    /// Slope window in verify mode; no slope is fitted when absent.
    pub window: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(mode: Mode, domain: Domain) -> Self {
        ExperimentSpec {
            mode,
            domain,
            tau: 0.0,
            levels: None,
            max_dof: None,
            theta: 0.25,
            target: 1,
            k: 2,
            out: None,
            seed: 42,
            dump_mesh: None,
            input: None,
            upper: None,
            window: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return bad("--tau must be a finite nonnegative number");
        }
        if self.k == 0 {
            return bad("--k must be positive");
        }
        match self.mode {
            Mode::UniformMorley | Mode::UniformBfs => {
                if !self.levels.is_some_and(|l| l > 0) {
                    return bad("uniform modes need --levels >= 1");
                }
                if self.dump_mesh.is_some() {
                    return bad("--dump-mesh applies to adaptive-morley only");
                }
            }
            Mode::AdaptiveMorley => {
                if self.max_dof.is_none() {
                    return bad("adaptive-morley needs --max-dof");
                }
                if !(self.theta > 0.0 && self.theta < 1.0) {
                    return bad("--theta must lie in (0, 1)");
                }
                if self.target == 0 || self.target > self.k {
                    return bad("--eig-index must lie in 1..=k");
                }
            }
            Mode::Verify => {
                if self.input.is_none() {
                    return bad("verify needs --input");
                }
            }
        }
        Ok(())
    }

    fn eigen_options(&self) -> EigenOptions {
        EigenOptions {
            seed: self.seed,
            ..EigenOptions::default()
        }
    }
}

/// Runs one experiment, printing a table or report to `stdout` and writing
/// the CSV to the output path when one is given.
pub fn run<W: Write>(spec: &ExperimentSpec, stdout: &mut W) -> Result<()> {
    spec.validate()?;
    let opts = spec.eigen_options();
    let records = match spec.mode {
        Mode::UniformMorley => morley_eigen_table(spec.domain, spec.tau, spec.levels.unwrap_or(1), spec.k, &opts)?,
        Mode::UniformBfs => bfs_eigen_table_with(spec.domain, spec.tau, spec.levels.unwrap_or(1), spec.k, &opts)?,
        Mode::AdaptiveMorley => {
            let mut config = AdaptiveConfig::new(spec.domain, spec.tau, spec.target, spec.max_dof.unwrap_or(0));
            config.theta = spec.theta;
            config.k = spec.k;
            config.eigen = opts;
            config.mesh_dump = spec.dump_mesh.clone();
            adaptive_loop(&config)?
        }
        Mode::Verify => return verify(spec, stdout),
    };
    write!(stdout, "{}", format_table(&records))?;
    if let Some(path) = &spec.out {
        write_csv(std::fs::File::create(path)?, &records)?;
    }
    Ok(())
}

fn verify<W: Write>(spec: &ExperimentSpec, stdout: &mut W) -> Result<()> {
    let input = spec.input.as_deref().expect("validated");
    let records = read_csv_path(input)?;
    for (j, ok) in monotone_columns(&records) {
        writeln!(stdout, "lambda{j} monotone: {ok}")?;
    }
    let all = monotone_columns(&records).iter().all(|c| c.1);
    writeln!(stdout, "monotone: {all}")?;
    if let Some(path) = &spec.upper {
        let report = verify_bracket(&records, &read_csv_path(path)?)?;
        for r in &report.rows {
            writeln!(
                stdout,
                "iter {} ndof {} lambda{}: {:.3} <= {:.3} margin {:.3} {}",
                r.iter,
                r.ndof,
                r.j,
                r.lower,
                r.upper,
                r.margin(),
                if r.holds() { "ok" } else { "VIOLATED" }
            )?;
        }
        writeln!(stdout, "bracket violations: {}", report.violations())?;
    }
    if let Some(window) = spec.window {
        writeln!(stdout, "slope: {:.6}", slope_report(&records, window)?)?;
    }
    Ok(())
}
