//! Model files, run configuration and the bound-vs-simulation comparison.
//!
//! Model files are JSON or TOML with fields `states` (labels), `q`
//! (row-major rates), `f`, optional `nu` and optional `seed`. Numbers are
//! written with 17 significant digits so that values survive a round trip.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{
    bound_family, log_sobolev_from_gap, Analysis, BoundFamily, BoundsError, Diagnostics,
    FSobolevCertificate, LogSobolev, PowerSobolev, SobolevFunction,
};
use crate::markov::{check_detailed_balance, validate_q_matrix, MJPModel, MarkovError, Observable, ProbDist, DEFAULT_RATE_TOL};
use crate::simulate::{empirical_tails, SimulateError, TailEstimate};
use crate::tilted::lambda0_star;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error: {msg}")]
    Parse { path: String, msg: String },
    #[error("invalid model field {field}")]
    Validation {
        field: String,
        #[source]
        source: MarkovError,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// On-disk form of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<String>>,
    pub q: Vec<Vec<f64>>,
    pub f: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn field_of(err: &MarkovError) -> String {
    match err {
        MarkovError::NegativeRate(x, y) | MarkovError::NonFinite(x, y) => format!("q[{x}][{y}]"),
        MarkovError::RowSumViolation(x) => format!("q[{x}]"),
        MarkovError::NonFiniteObservable => "f".into(),
        MarkovError::InvalidDistribution(_) => "nu".into(),
        _ => "q".into(),
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<MJPModel, IoError> {
        self.into_model_with_tol(DEFAULT_RATE_TOL)
    }

    /// As [`Self::into_model`] with a custom relative row-sum tolerance.
    pub fn into_model_with_tol(self, rate_tol: f64) -> Result<MJPModel, IoError> {
        let wrap = |e: MarkovError| IoError::Validation {
            field: field_of(&e),
            source: e,
        };
        let q = validate_q_matrix(&self.q, rate_tol).map_err(wrap)?;
        let f = Observable::new(self.f).map_err(wrap)?;
        let nu = match self.nu {
            Some(w) => Some(ProbDist::new(w).map_err(|e| IoError::Validation {
                field: "nu".into(),
                source: e,
            })?),
            None => None,
        };
        let mut model = MJPModel::new(q, f, nu).map_err(wrap)?;
        if let Some(labels) = self.states {
            if labels.len() != model.n() {
                return Err(IoError::Validation {
                    field: "states".into(),
                    source: MarkovError::DimensionMismatch {
                        expected: model.n(),
                        got: labels.len(),
                    },
                });
            }
            model = model.with_labels(labels);
        }
        model.seed = self.seed;
        Ok(model)
    }

    pub fn from_model(model: &MJPModel) -> Self {
        ModelFile {
            states: Some(model.labels.clone()),
            q: model.q.rows(),
            f: model.f_raw.values().to_vec(),
            nu: Some(model.nu.weights().to_vec()),
            seed: model.seed,
        }
    }
}

fn is_toml(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()) == Some("toml")
}

pub fn parse_model_str(text: &str, toml_format: bool, path: &str) -> Result<MJPModel, IoError> {
    parse_model_str_with_tol(text, toml_format, path, DEFAULT_RATE_TOL)
}

pub fn parse_model_str_with_tol(text: &str, toml_format: bool, path: &str, rate_tol: f64) -> Result<MJPModel, IoError> {
    let parsed: ModelFile = if toml_format {
        toml::from_str(text).map_err(|e| IoError::Parse {
            path: path.into(),
            msg: e.to_string(),
        })?
    } else {
        serde_json::from_str(text).map_err(|e| IoError::Parse {
            path: path.into(),
            msg: format!("line {}, column {}: {e}", e.line(), e.column()),
        })?
    };
    parsed.into_model_with_tol(rate_tol)
}

/// Reads and validates a model; `.toml` files are TOML, all others JSON.
pub fn load_model(path: &Path) -> Result<MJPModel, IoError> {
    load_model_with_tol(path, DEFAULT_RATE_TOL)
}

pub fn load_model_with_tol(path: &Path, rate_tol: f64) -> Result<MJPModel, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_model_str_with_tol(&text, is_toml(path), &path.display().to_string(), rate_tol)
}

pub fn save_model(model: &MJPModel, path: &Path) -> Result<(), IoError> {
    let file = ModelFile::from_model(model);
    let text = if is_toml(path) {
        toml::to_string(&file).map_err(|e| IoError::Parse {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?
    } else {
        serde_json::to_string_pretty(&file).expect("model file serializes")
    };
    fs::write(path, text).map_err(|e| IoError::io(path, e))
}

/// Formats a float with 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Parses `lo:hi:n` (n evenly spaced points, inclusive) or a
/// comma-separated list; the result is sorted ascending.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, IoError> {
    let bad = |m: &str| IoError::Config(format!("grid `{spec}`: {m}"));
    let spec = spec.trim();
    if spec.is_empty() {
        return Err(bad("empty"));
    }
    let mut out: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected lo:hi:n"));
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad("bad lower end"))?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad("bad upper end"))?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad("bad count"))?;
        match n {
            0 => return Err(bad("count must be positive")),
            1 => vec![lo],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        }
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad("bad number")))
            .collect::<Result<_, _>>()?
    };
    if out.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite value"));
    }
    out.sort_by(|a, b| a.total_cmp(b));
    Ok(out)
}

/// Which F-Sobolev function the `fsobolev` family uses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SobolevSpec {
    /// `C·log` with `C` the log-Sobolev lower bound derived from the gap.
    #[default]
    LogFromGap,
    Log { c: f64, #[serde(default)] assume: bool },
    Power { c: f64, p: f64, #[serde(default)] assume: bool },
}

impl SobolevSpec {
    pub fn certificate(&self, a: &Analysis, seed: u64) -> Result<FSobolevCertificate, BoundsError> {
        let (function, assume): (Arc<dyn SobolevFunction>, bool) = match self {
            SobolevSpec::LogFromGap => {
                return Ok(FSobolevCertificate {
                    function: Arc::new(log_sobolev_from_gap(a)),
                    assumed: false,
                })
            }
            SobolevSpec::Log { c, assume } => (Arc::new(LogSobolev { c: *c }), *assume),
            SobolevSpec::Power { c, p, assume } => (Arc::new(PowerSobolev { c: *c, p: *p }), *assume),
        };
        if assume {
            Ok(FSobolevCertificate::assume(function))
        } else {
            FSobolevCertificate::verify(a, function, 16, seed)
        }
    }
}

/// Settings of a comparison run; flags on the command line take precedence
/// over a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: PathBuf,
    pub t_values: Vec<f64>,
    pub u_grid: Vec<f64>,
    #[serde(default = "default_families")]
    pub families: Vec<BoundFamily>,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "default_true")]
    pub timestamp: bool,
    #[serde(default)]
    pub resume: bool,
    #[serde(default)]
    pub sobolev: SobolevSpec,
    /// Initial law for the run; the model's own when absent.
    #[serde(default)]
    pub nu: Option<Vec<f64>>,
    /// Relative row-sum tolerance used when loading the model.
    #[serde(default = "default_rate_tol")]
    pub rate_tol: f64,
}

fn default_families() -> Vec<BoundFamily> {
    BoundFamily::ALL.to_vec()
}
fn default_samples() -> u64 {
    10_000
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_true() -> bool {
    true
}
fn default_rate_tol() -> f64 {
    DEFAULT_RATE_TOL
}

impl RunConfig {
    pub fn new(model: PathBuf, t_values: Vec<f64>, u_grid: Vec<f64>) -> Self {
        RunConfig {
            model,
            t_values,
            u_grid,
            families: default_families(),
            samples: default_samples(),
            seed: 0,
            out_dir: default_out(),
            timestamp: true,
            resume: false,
            sobolev: SobolevSpec::default(),
            nu: None,
            rate_tol: DEFAULT_RATE_TOL,
        }
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
        toml::from_str(&text).map_err(|e| IoError::Parse {
            path: path.display().to_string(),
            msg: e.to_string(),
        })
    }

    pub fn validate(&mut self) -> Result<(), IoError> {
        if self.u_grid.is_empty() {
            return Err(IoError::Config("empty u grid".into()));
        }
        if self.t_values.is_empty() {
            return Err(IoError::Config("empty t grid".into()));
        }
        if self.samples < 1 {
            return Err(IoError::Config("sample count must be at least 1".into()));
        }
        if self.t_values.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(IoError::Config("t values must be positive".into()));
        }
        if !(self.rate_tol >= 0.0 && self.rate_tol.is_finite()) {
            return Err(IoError::Config("rate tolerance must be a finite nonnegative number".into()));
        }
        if self.families.is_empty() {
            return Err(IoError::Config("no bound families selected".into()));
        }
        self.u_grid.sort_by(|a, b| a.total_cmp(b));
        Ok(())
    }

    pub fn csv_path(&self) -> PathBuf {
        self.out_dir.join("compare.csv")
    }

    pub fn summary_path(&self) -> PathBuf {
        self.out_dir.join("summary.json")
    }
}

/// Seed of the simulation batch for the `k`-th horizon.
fn batch_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn compare_header(families: &[BoundFamily]) -> String {
    let mut cols: Vec<String> = ["u", "t", "n", "hits", "p_hat", "ci_lo", "ci_hi"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for fam in families {
        cols.push(format!("rate_{fam}"));
        cols.push(format!("bound_{fam}"));
        cols.push(format!("dominated_{fam}"));
    }
    cols.push("lambda0_star".into());
    cols.push("sharpness_gap".into());
    cols.join(",")
}

#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub tail: TailEstimate,
    pub bounds: Vec<(BoundFamily, f64, f64, bool)>,
    pub lambda0_star: f64,
    /// `λ₀*(u) + log(p̂)/t`, reported for reversible models only.
    pub sharpness_gap: Option<f64>,
}

impl CellResult {
    fn csv_row(&self) -> String {
        let t = &self.tail;
        let mut cols = vec![
            fmt_num(t.u),
            fmt_num(t.t),
            t.n_samples.to_string(),
            t.hits.to_string(),
            fmt_num(t.p_hat),
            fmt_num(t.ci_lo),
            fmt_num(t.ci_hi),
        ];
        for (_, rate, bound, dom) in &self.bounds {
            cols.push(fmt_num(*rate));
            cols.push(fmt_num(*bound));
            cols.push(dom.to_string());
        }
        cols.push(fmt_num(self.lambda0_star));
        cols.push(self.sharpness_gap.map(fmt_num).unwrap_or_default());
        cols.join(",")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilySummary {
    pub family: BoundFamily,
    pub cells: usize,
    pub dominated: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareSummary {
    pub model: String,
    pub reversible: bool,
    pub diagnostics: Diagnostics,
    pub samples: u64,
    pub seed: u64,
    pub t_values: Vec<f64>,
    pub u_grid: Vec<f64>,
    pub families: Vec<FamilySummary>,
    pub all_dominated: bool,
    /// Sharpness gap per `u` across the `t` grid (reversible models only).
    pub sharpness: BTreeMap<String, Vec<Option<f64>>>,
    pub cells_written: usize,
    pub cells_resumed: usize,
}

/// Whether `p̂` stays below the bound up to three CI half-widths.
pub fn dominated(tail: &TailEstimate, bound: f64) -> bool {
    tail.p_hat <= bound + 3.0 * tail.ci_half_width
}

fn cell_key(u: f64, t: f64) -> (u64, u64) {
    (u.to_bits(), t.to_bits())
}

fn completed_cells(path: &Path, header: &str) -> Result<BTreeSet<(u64, u64)>, IoError> {
    let mut done = BTreeSet::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(_) => return Ok(done),
    };
    let mut lines = BufReader::new(file).lines().map_while(Result::ok).filter(|l| !l.starts_with('#'));
    match lines.next() {
        Some(h) if h == header => {}
        Some(_) => {
            return Err(IoError::Config(format!(
                "{} has a different column layout; refusing to resume",
                path.display()
            )))
        }
        None => return Ok(done),
    }
    for line in lines {
        let mut it = line.split(',');
        let (Some(u), Some(t)) = (it.next(), it.next()) else { continue };
        if let (Ok(u), Ok(t)) = (u.parse::<f64>(), t.parse::<f64>()) {
            done.insert(cell_key(u, t));
        }
    }
    Ok(done)
}

/// Simulates every `(u, t)` cell, evaluates the requested bounds and
/// writes `compare.csv` (one row per cell, flushed as it is produced) and
/// `summary.json`. With `resume`, cells already present in the CSV are
/// kept and only the missing ones are computed.
pub fn run_compare(config: &RunConfig) -> Result<CompareSummary, IoError> {
    let mut config = config.clone();
    config.validate()?;
    let mut model = load_model_with_tol(&config.model, config.rate_tol)?;
    if let Some(nu) = &config.nu {
        model = model.with_initial(ProbDist::new(nu.clone()).map_err(|e| IoError::Validation {
            field: "nu".into(),
            source: e,
        })?);
    }
    let reversible = check_detailed_balance(&model.q, &model.pi, 1e-10);
    let analysis = Analysis::new(model)?;
    let cert = if config.families.contains(&BoundFamily::Fsobolev) {
        Some(config.sobolev.certificate(&analysis, config.seed)?)
    } else {
        None
    };

    fs::create_dir_all(&config.out_dir).map_err(|e| IoError::io(&config.out_dir, e))?;
    let csv_path = config.csv_path();
    let header = compare_header(&config.families);
    let done = if config.resume {
        completed_cells(&csv_path, &header)?
    } else {
        BTreeSet::new()
    };
    let fresh = done.is_empty();
    let mut out = if fresh {
        File::create(&csv_path)
    } else {
        OpenOptions::new().append(true).open(&csv_path)
    }
    .map_err(|e| IoError::io(&csv_path, e))?;
    let w = |out: &mut File, s: &str| writeln!(out, "{s}").map_err(|e| IoError::io(&csv_path, e));
    if fresh {
        if config.timestamp {
            let secs = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            w(&mut out, &format!("# generated at unix time {secs}"))?;
        }
        w(&mut out, &header)?;
    }

    let stars: Vec<f64> = config
        .u_grid
        .iter()
        .map(|&u| {
            if u <= 0.0 {
                Ok(0.0)
            } else {
                lambda0_star(&analysis.sd, &analysis.model.f, u).map(|r| r.value)
            }
        })
        .collect::<Result<_, _>>()
        .map_err(BoundsError::from)?;

    let mut fam_stats: Vec<FamilySummary> = config
        .families
        .iter()
        .map(|&family| FamilySummary {
            family,
            cells: 0,
            dominated: 0,
        })
        .collect();
    let mut sharpness: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
    let (mut written, mut resumed) = (0, 0);

    for (k, &t) in config.t_values.iter().enumerate() {
        let pending: Vec<f64> = config
            .u_grid
            .iter()
            .copied()
            .filter(|&u| !done.contains(&cell_key(u, t)))
            .collect();
        resumed += config.u_grid.len() - pending.len();
        // the batch is deterministic, so a partial resume recomputes it
        // and keeps only the missing cells
        let tails = empirical_tails(
            &analysis.model,
            t,
            &config.u_grid,
            config.samples,
            batch_seed(config.seed, k),
        )?;
        for (i, tail) in tails.into_iter().enumerate() {
            let u = tail.u;
            let mut bounds = Vec::with_capacity(config.families.len());
            for (j, &fam) in config.families.iter().enumerate() {
                let p = bound_family(&analysis, fam, t, u, cert.as_ref())?;
                let dom = dominated(&tail, p.bound);
                fam_stats[j].cells += 1;
                fam_stats[j].dominated += dom as usize;
                bounds.push((fam, p.rate, p.bound, dom));
            }
            let gap = (reversible && tail.p_hat > 0.0).then(|| stars[i] + tail.p_hat.ln() / t);
            if reversible {
                sharpness.entry(fmt_num(u)).or_default().push(gap);
            }
            if pending.iter().any(|v| v.to_bits() == u.to_bits()) {
                let cell = CellResult {
                    tail,
                    bounds,
                    lambda0_star: stars[i],
                    sharpness_gap: gap,
                };
                w(&mut out, &cell.csv_row())?;
                out.flush().map_err(|e| IoError::io(&csv_path, e))?;
                written += 1;
            }
        }
    }

    let summary = CompareSummary {
        model: config.model.display().to_string(),
        reversible,
        diagnostics: analysis.diagnostics(),
        samples: config.samples,
        seed: config.seed,
        t_values: config.t_values.clone(),
        u_grid: config.u_grid.clone(),
        all_dominated: fam_stats.iter().all(|s| s.cells == s.dominated),
        families: fam_stats,
        sharpness,
        cells_written: written,
        cells_resumed: resumed,
    };
    let summary_path = config.summary_path();
    fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )
    .map_err(|e| IoError::io(&summary_path, e))?;
    Ok(summary)
}

/// Reads a CSV produced by this module, dropping `#` comment lines.
pub fn csv_body(path: &Path) -> Result<String, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    Ok(text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("0.3, 0.1").unwrap(), vec![0.1, 0.3]);
        assert_eq!(parse_grid("2:5:1").unwrap(), vec![2.0]);
        assert!(parse_grid("").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn number_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(fmt_num(f64::INFINITY), "inf");
    }

    #[test]
    fn negative_rate_names_entry() {
        let text = r#"{"q": [[-1, 1], [-2, 2]], "f": [1, -1]}"#;
        match parse_model_str(text, false, "m.json") {
            Err(IoError::Validation { field, .. }) => assert_eq!(field, "q[1][0]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn default_initial_law() {
        let text = "q = [[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [1.0, 0.0, -1.0]]\nf = [1.0, 0.0, -1.0]\n";
        let m = parse_model_str(text, true, "m.toml").unwrap();
        assert_eq!(m.nu.weights(), &[1.0, 0.0, 0.0]);
    }
}
