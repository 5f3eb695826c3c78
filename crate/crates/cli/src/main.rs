use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mjpc_core::bounds::{bound_curve, Analysis, BoundFamily, BoundsError};
use mjpc_core::io::{fmt_num, load_model, parse_grid, run_compare, IoError, RunConfig, SobolevSpec};
use mjpc_core::markov::{check_detailed_balance, MJPModel};
use mjpc_core::perturbation::{lambda0_coefficients, SeriesError};
use mjpc_core::simulate::empirical_tails;
use mjpc_core::spectral::variance_pi;
use mjpc_core::tilted::{lambda0, lambda0_extended, lambda0_star, TiltedError};
use mjpc_core::SpectralError;
use serde_json::json;

const THREADS_ENV: &str = "MJPC_THREADS";

#[derive(Parser, Debug)]
#[command(name = "mjpc", version, about = "Concentration bounds for time averages of finite Markov jump processes")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Seed for Monte Carlo and randomized checks (default: the model's seed, else 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to $MJPC_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (a directory for `compare` and `series`); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Omit the generation-time comment line from CSV output.
    #[arg(long, global = true)]
    no_timestamp: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a model file and print its invariant distribution.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Eigenvalues, gap and variances of the symmetrized generator, as JSON.
    Spectrum {
        #[arg(long)]
        model: PathBuf,
    },
    /// Empirical upper tails P(A_t/t >= u) from simulated paths.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        t: f64,
        /// One level, a comma-separated list, or lo:hi:n.
        #[arg(long)]
        u: String,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
    },
    /// Conjugate of the top tilted eigenvalue on a grid of levels.
    Rate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        u_grid: String,
    },
    /// Series coefficients of the top tilted eigenvalue and truncation errors.
    Series {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 6)]
        order: usize,
        /// Tilt values; defaults to 8 points in (0, gap/(2 sup|f|)].
        #[arg(long)]
        r_grid: Option<String>,
    },
    /// Tail bounds for every requested family.
    Bounds {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        u_grid: String,
        #[arg(long, default_value = "all")]
        families: String,
        #[command(flatten)]
        sobolev: SobolevArgs,
    },
    /// Simulation against bounds on a (u, t) grid; writes compare.csv and summary.json.
    Compare {
        /// TOML run configuration; command-line flags override its entries.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        t_grid: Option<String>,
        #[arg(long)]
        u_grid: Option<String>,
        #[arg(long)]
        families: Option<String>,
        #[arg(long)]
        samples: Option<u64>,
        /// Keep rows already present in compare.csv and compute the rest.
        #[arg(long)]
        resume: bool,
        /// Exit with status 4 unless every bound dominates its empirical tail.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        sobolev: SobolevArgs,
    },
}

#[derive(Args, Debug)]
struct SobolevArgs {
    /// Use C·log as the F-Sobolev function instead of the gap-derived constant.
    #[arg(long)]
    log_sobolev: Option<f64>,
    /// Accept the supplied Sobolev constant without the numerical check.
    #[arg(long, requires = "log_sobolev")]
    assume_sobolev: bool,
}

impl SobolevArgs {
    fn spec(&self) -> Option<SobolevSpec> {
        self.log_sobolev.map(|c| SobolevSpec::Log {
            c,
            assume: self.assume_sobolev,
        })
    }
}

/// `compare --strict` found a bound below its empirical tail.
#[derive(Debug)]
struct DominationFailure(usize);

impl std::fmt::Display for DominationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} bound cell(s) fail to dominate the empirical tail", self.0)
    }
}

impl std::error::Error for DominationFailure {}

fn bounds_code(e: &BoundsError) -> u8 {
    match e {
        BoundsError::NonPositiveHorizon(_)
        | BoundsError::MissingSobolev
        | BoundsError::InfeasibleSlice { .. }
        | BoundsError::UnknownFamily(_) => 2,
        _ => 3,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<DominationFailure>().is_some() {
        return 4;
    }
    if let Some(e) = err.downcast_ref::<IoError>() {
        return match e {
            IoError::Bounds(b) => bounds_code(b),
            _ => 2,
        };
    }
    if let Some(b) = err.downcast_ref::<BoundsError>() {
        return bounds_code(b);
    }
    if let Some(s) = err.downcast_ref::<SeriesError>() {
        return match s {
            SeriesError::Spectral(_) => 3,
            _ => 2,
        };
    }
    if err.downcast_ref::<SpectralError>().is_some() || err.downcast_ref::<TiltedError>().is_some() {
        return 3;
    }
    // bad arguments, unreadable files, invalid models
    2
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => {
            let n = v.trim().parse().with_context(|| format!("{THREADS_ENV}={v} is not a thread count"))?;
            Ok(Some(n))
        }
        _ => Ok(None),
    }
}

fn open_output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn timestamp_line(w: &mut dyn Write, enabled: bool) -> Result<()> {
    if enabled {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        writeln!(w, "# generated at unix time {secs}")?;
    }
    Ok(())
}

fn seed_for(global: &Global, model: &MJPModel) -> u64 {
    global.seed.or(model.seed).unwrap_or(0)
}

fn cmd_validate(model: &Path, out: Option<&Path>) -> Result<()> {
    let m = load_model(model)?;
    let report = json!({
        "model": model.display().to_string(),
        "states": m.labels,
        "n": m.n(),
        "pi": m.pi.weights(),
        "nu": m.nu.weights(),
        "f_mean": m.f_raw.values()[0] - m.f.values()[0],
        "reversible": check_detailed_balance(&m.q, &m.pi, 1e-10),
    });
    let mut w = open_output(out)?;
    writeln!(w, "{}", serde_json::to_string_pretty(&report)?)?;
    w.flush()?;
    Ok(())
}

fn cmd_spectrum(model: &Path, out: Option<&Path>) -> Result<()> {
    let a = Analysis::new(load_model(model)?)?;
    let report = json!({
        "eigenvalues": a.sd.eigenvalues.as_slice(),
        "gap": a.gap,
        "sigma_hat_sq": a.sigma_hat_sq,
        "sigma_tilde_sq": a.sigma_tilde_sq,
        "variance": variance_pi(&a.model.pi, a.model.f.values()),
        "diagnostics": a.diagnostics(),
    });
    let mut w = open_output(out)?;
    writeln!(w, "{}", serde_json::to_string_pretty(&report)?)?;
    w.flush()?;
    Ok(())
}

fn cmd_simulate(global: &Global, model: &Path, t: f64, u: &str, samples: u64) -> Result<()> {
    let m = load_model(model)?;
    let us = parse_grid(u)?;
    let seed = seed_for(global, &m);
    let tails = empirical_tails(&m, t, &us, samples, seed)?;
    let mut w = open_output(global.out.as_deref())?;
    timestamp_line(&mut *w, !global.no_timestamp)?;
    writeln!(w, "u,t,n,hits,p_hat,ci_lo,ci_hi")?;
    for e in tails {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            fmt_num(e.u),
            fmt_num(e.t),
            e.n_samples,
            e.hits,
            fmt_num(e.p_hat),
            fmt_num(e.ci_lo),
            fmt_num(e.ci_hi)
        )?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_rate(global: &Global, model: &Path, u_grid: &str) -> Result<()> {
    let a = Analysis::new(load_model(model)?)?;
    let us = parse_grid(u_grid)?;
    let mut w = open_output(global.out.as_deref())?;
    timestamp_line(&mut *w, !global.no_timestamp)?;
    writeln!(w, "u,lambda0_star,argmax_r,finite_flag")?;
    for u in us {
        let c = lambda0_star(&a.sd, &a.model.f, u)?;
        writeln!(
            w,
            "{},{},{},{}",
            fmt_num(u),
            fmt_num(c.value),
            c.argmax_r.map(fmt_num).unwrap_or_default(),
            c.is_finite()
        )?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_series(global: &Global, model: &Path, order: usize, r_grid: Option<&str>) -> Result<()> {
    let a = Analysis::new(load_model(model)?)?;
    let f = &a.model.f;
    let series = lambda0_coefficients(&a.sd, f, order)?;
    let radius = a.gap / (2.0 * a.f_sup);
    let rs = match r_grid {
        Some(g) => parse_grid(g)?,
        None => (1..=8).map(|k| radius * k as f64 / 8.0).collect(),
    };

    let mut coef = String::from("order,coefficient\n");
    for n in 1..=order {
        coef.push_str(&format!("{n},{}\n", fmt_num(series.coefficient(n))));
    }
    let mut table = String::from("r,lambda0");
    for n in 1..=order {
        table.push_str(&format!(",error_{n}"));
    }
    table.push('\n');
    for r in rs {
        // double-double evaluation inside the convergence disc keeps the
        // high-order errors above rounding
        let exact = lambda0_extended(&a.sd, f, r);
        let value = exact.map(f64::from).unwrap_or_else(|| lambda0(&a.sd, f, r));
        table.push_str(&format!("{},{}", fmt_num(r), fmt_num(value)));
        for n in 1..=order {
            let err = match exact {
                Some(x) => f64::from(x - series.partial_sum_extended(r, n)).abs(),
                None => (value - series.partial_sum(r, n)).abs(),
            };
            table.push_str(&format!(",{}", fmt_num(err)));
        }
        table.push('\n');
    }

    match global.out.as_deref() {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for (name, body) in [("series_coefficients.csv", &coef), ("series_errors.csv", &table)] {
                let mut w = open_output(Some(&dir.join(name)))?;
                timestamp_line(&mut *w, !global.no_timestamp)?;
                w.write_all(body.as_bytes())?;
                w.flush()?;
            }
        }
        None => {
            let mut w = open_output(None)?;
            timestamp_line(&mut *w, !global.no_timestamp)?;
            write!(w, "{coef}\n{table}")?;
            w.flush()?;
        }
    }
    Ok(())
}

fn cmd_bounds(global: &Global, model: &Path, t: f64, u_grid: &str, families: &str, sob: &SobolevArgs) -> Result<()> {
    let m = load_model(model)?;
    let seed = seed_for(global, &m);
    let a = Analysis::new(m)?;
    let us = parse_grid(u_grid)?;
    let fams = BoundFamily::parse_list(families)?;
    let cert = if fams.contains(&BoundFamily::Fsobolev) {
        Some(sob.spec().unwrap_or_default().certificate(&a, seed)?)
    } else {
        None
    };
    let mut w = open_output(global.out.as_deref())?;
    timestamp_line(&mut *w, !global.no_timestamp)?;
    writeln!(w, "u,family,rate,prefactor,bound,branch,notes")?;
    for fam in fams {
        let curve = bound_curve(&a, fam, t, &us, cert.as_ref())?;
        for p in curve.points {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                fmt_num(p.u),
                fam,
                fmt_num(p.rate),
                fmt_num(p.prefactor),
                fmt_num(p.bound),
                p.branch.unwrap_or_default(),
                p.notes.join("; ").replace(',', ";")
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_compare(
    global: &Global,
    config: Option<&Path>,
    model: Option<&Path>,
    t_grid: Option<&str>,
    u_grid: Option<&str>,
    families: Option<&str>,
    samples: Option<u64>,
    resume: bool,
    strict: bool,
    sob: &SobolevArgs,
) -> Result<()> {
    let mut cfg = match config {
        Some(p) => {
            let mut cfg = RunConfig::from_toml_file(p)?;
            // a relative model path is taken relative to the config file
            if cfg.model.is_relative() {
                if let Some(dir) = p.parent() {
                    cfg.model = dir.join(&cfg.model);
                }
            }
            cfg
        }
        None => {
            let Some(model) = model else {
                bail!(IoError::Config("compare needs --model or --config".into()));
            };
            let (Some(t), Some(u)) = (t_grid, u_grid) else {
                bail!(IoError::Config("compare needs --t-grid and --u-grid without --config".into()));
            };
            let mut cfg = RunConfig::new(model.to_path_buf(), parse_grid(t)?, parse_grid(u)?);
            cfg.seed = load_model(model)?.seed.unwrap_or(0);
            cfg
        }
    };
    if let Some(m) = model {
        cfg.model = m.to_path_buf();
    }
    if let Some(t) = t_grid {
        cfg.t_values = parse_grid(t)?;
    }
    if let Some(u) = u_grid {
        cfg.u_grid = parse_grid(u)?;
    }
    if let Some(f) = families {
        cfg.families = BoundFamily::parse_list(f)?;
    }
    if let Some(n) = samples {
        cfg.samples = n;
    }
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(o) = &global.out {
        cfg.out_dir = o.clone();
    }
    if global.no_timestamp {
        cfg.timestamp = false;
    }
    if resume {
        cfg.resume = true;
    }
    if let Some(spec) = sob.spec() {
        cfg.sobolev = spec;
    }

    let summary = run_compare(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if strict && !summary.all_dominated {
        let failed = summary.families.iter().map(|s| s.cells - s.dominated).sum();
        return Err(DominationFailure(failed).into());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = thread_count(cli.global.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::Validate { model } => cmd_validate(model, g.out.as_deref()),
        Command::Spectrum { model } => cmd_spectrum(model, g.out.as_deref()),
        Command::Simulate { model, t, u, samples } => cmd_simulate(g, model, *t, u, *samples),
        Command::Rate { model, u_grid } => cmd_rate(g, model, u_grid),
        Command::Series { model, order, r_grid } => cmd_series(g, model, *order, r_grid.as_deref()),
        Command::Bounds {
            model,
            t,
            u_grid,
            families,
            sobolev,
        } => cmd_bounds(g, model, *t, u_grid, families, sobolev),
        Command::Compare {
            config,
            model,
            t_grid,
            u_grid,
            families,
            samples,
            resume,
            strict,
            sobolev,
        } => cmd_compare(
            g,
            config.as_deref(),
            model.as_deref(),
            t_grid.as_deref(),
            u_grid.as_deref(),
            families.as_deref(),
            *samples,
            *resume,
            *strict,
            sobolev,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
