//! `qmap` command line: argument parsing, command dispatch and exit codes.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::classical::{classical_correlator, lyapunov_exponent, random_points};
use crate::config::{merge, read_config, Command, RunSpec};
use crate::ergodicity::{ergodicity_report, quantum_classical_compare};
use crate::error::{Error, Result};
use crate::model::PlanckScale;
use crate::output::{self, float, row, OutputDir};
use crate::quantization::{build_floquet, build_floquet_with_offsets, quantize_observable};
use crate::scaling::{scaling_study, Model, ScalingOptions};
use crate::spectral::diagonalize;
use crate::sweep::{shift_statistics, sweep_quantization, uniform_grid, Pairing, SweepOptions};

/// Worker-count cap for the global thread pool; `0` means one per core.
pub const THREADS_ENV: &str = "QMAP_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "qmap",
    version,
    about = "Quantization ambiguity and quantum ergodicity on kicked torus maps",
    after_help = "Exit status: 0 success, 1 numerical or I/O failure, 2 usage or configuration error."
)]
struct Cli {
    /// JSON run spec; command-line flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Sub>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Lyapunov exponent and classical vs quantum autocorrelation.
    Classical(Flags),
    /// Eigenphases of one Floquet operator.
    Spectrum(Flags),
    /// Tracked eigenphases over an r sweep.
    Sweep(Flags),
    /// Mean squared level shift across an N ladder, with model fits.
    Scaling(Flags),
    /// Diagonal matrix elements, their variance and F(T).
    Ergodicity(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    /// chaotic, regular, slow_ergodic or free.
    #[arg(long)]
    variant: Option<String>,
    /// Quantization parameter of the single operator.
    #[arg(long)]
    r: Option<f64>,
    /// Hilbert dimension; a comma list for scaling and ergodicity ladders.
    #[arg(long = "N", value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    r_step: Option<f64>,
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    r1: Option<f64>,
    /// cos2pi_q, cos2pi_p or identity.
    #[arg(long)]
    observable: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo sample count for classical averages.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    t_max: Option<usize>,
    /// Largest t of the quantum-classical comparison.
    #[arg(long)]
    t_range: Option<usize>,
    /// Comma list of Gaussian window widths for F(T).
    #[arg(long = "T-grid", value_delimiter = ',')]
    t_grid: Vec<f64>,
    /// Phase gap below which two levels count as degenerate.
    #[arg(long)]
    gap_tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep the spectral-average shift in the shift statistics.
    #[arg(long)]
    no_subtract_mean: bool,
    /// Pair levels by sorted index instead of eigenvector overlap.
    #[arg(long)]
    sorted_pairing: bool,
    /// Also write a gnuplot script for the outputs.
    #[arg(long)]
    emit_plot: bool,
}

impl Sub {
    fn split(self) -> (Command, Flags) {
        match self {
            Sub::Classical(f) => (Command::Classical, f),
            Sub::Spectrum(f) => (Command::Spectrum, f),
            Sub::Sweep(f) => (Command::Sweep, f),
            Sub::Scaling(f) => (Command::Scaling, f),
            Sub::Ergodicity(f) => (Command::Ergodicity, f),
        }
    }
}

impl Flags {
    /// The flags that were given, as run-spec JSON keys.
    fn overrides(self, command: Command) -> Map<String, Value> {
        let mut m = Map::new();
        let mut family = Map::new();
        if let Some(v) = self.variant {
            family.insert("variant".into(), json!(v));
        }
        if let Some(r) = self.r {
            family.insert("r".into(), json!(r));
        }
        if !family.is_empty() {
            m.insert("family".into(), Value::Object(family));
        }
        let ladder = command == Command::Scaling || self.n.len() > 1;
        match self.n.as_slice() {
            [] => {}
            [n] if !ladder => {
                m.insert("N".into(), json!(n));
            }
            list => {
                m.insert("N_list".into(), json!(list));
            }
        }
        if !self.t_grid.is_empty() {
            m.insert("T_grid".into(), json!(self.t_grid));
        }
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.into(), v);
            }
        };
        put("r_min", self.r_min.map(|x| json!(x)));
        put("r_max", self.r_max.map(|x| json!(x)));
        put("r_step", self.r_step.map(|x| json!(x)));
        put("r0", self.r0.map(|x| json!(x)));
        put("r1", self.r1.map(|x| json!(x)));
        put("observable", self.observable.map(|x| json!(x)));
        put("seed", self.seed.map(|x| json!(x)));
        put("samples", self.samples.map(|x| json!(x)));
        put("t_max", self.t_max.map(|x| json!(x)));
        put("t_range", self.t_range.map(|x| json!(x)));
        put("gap_tol", self.gap_tol.map(|x| json!(x)));
        put("out", self.out.map(|x| json!(x)));
        put("subtract_mean", self.no_subtract_mean.then_some(json!(false)));
        put("sorted_pairing", self.sorted_pairing.then_some(json!(true)));
        put("emit_plot", self.emit_plot.then_some(json!(true)));
        m
    }
}

/// Merges the config file (if any) with the command-line flags.
fn build_spec(cli: Cli) -> Result<RunSpec> {
    let mut base = match &cli.config {
        Some(path) => match read_config(path)? {
            Value::Object(m) => m,
            _ => unreachable!("read_config returns objects"),
        },
        None => Map::new(),
    };
    if let Some(sub) = cli.command {
        let (command, flags) = sub.split();
        if let Some(c) = base.get("command") {
            if c != &json!(command.name()) {
                return Err(Error::Config(format!(
                    "subcommand `{}` conflicts with command {c} in the config file",
                    command.name()
                )));
            }
        }
        base.insert("command".into(), json!(command.name()));
        merge(&mut base, flags.overrides(command));
    }
    if !base.contains_key("command") {
        return Err(Error::Config("no subcommand given (see `qmap --help`)".into()));
    }
    RunSpec::from_value(Value::Object(base))?.resolve()
}

/// Applies `QMAP_THREADS` to the global pool. Dense kernels run sequentially so
/// that results do not depend on the worker count.
fn configure_threads() -> Result<()> {
    faer::set_global_parallelism(faer::Par::Seq);
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a worker count")))?,
        Err(_) => 0,
    };
    // A pool that already exists (e.g. in tests) is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Parses `argv`, runs the command and returns the process exit status.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = configure_threads().and_then(|_| build_spec(cli)).and_then(|spec| execute(&spec));
    match outcome {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("qmap: {e}");
            e.exit_code()
        }
    }
}

/// Runs a resolved spec and returns the files written.
pub fn execute(spec: &RunSpec) -> Result<Vec<PathBuf>> {
    let mut out = OutputDir::create(spec)?;
    match spec.command {
        Command::Classical => run_classical(spec, &mut out)?,
        Command::Spectrum => run_spectrum(spec, &mut out)?,
        Command::Sweep => run_sweep(spec, &mut out)?,
        Command::Scaling => run_scaling(spec, &mut out)?,
        Command::Ergodicity => run_ergodicity(spec, &mut out)?,
    }
    Ok(out.written().to_vec())
}

fn title(spec: &RunSpec) -> String {
    format!("{} {}", spec.family.variant.name(), spec.command.name())
}

fn sweep_options(spec: &RunSpec) -> SweepOptions {
    SweepOptions {
        pairing: if spec.sorted_pairing { Pairing::Sorted } else { Pairing::Overlap },
        ..SweepOptions::default()
    }
}

fn run_classical(spec: &RunSpec, out: &mut OutputDir) -> Result<()> {
    let family = spec.family;
    let seeds = random_points(spec.lyapunov_seeds, spec.seed);
    let lyapunov = lyapunov_exponent(&family, &seeds, spec.lyapunov_steps)?;
    let curve = classical_correlator(&family, spec.observable, spec.t_max, spec.samples, spec.seed)?;
    let t_grid = spec.t_grid.as_deref().unwrap_or_default();
    let f_classical: Vec<[f64; 2]> = t_grid.iter().map(|&t| [t, curve.gaussian_average(t)]).collect();

    let mut f_quantum = Vec::new();
    let mut correspondence = Value::Null;
    if let Some(n) = spec.n {
        let scale = PlanckScale::for_family(n, &family)?;
        let floquet = build_floquet(&family, &scale)?;
        let a = quantize_observable(spec.observable, &scale);
        let report = quantum_classical_compare(&floquet, &a, &curve, spec.t_range)?;
        correspondence = json!({
            "N": n,
            "t_range": spec.t_range,
            "max_deviation": report.max_deviation,
            "ehrenfest_time": lyapunov.ehrenfest_time(n),
        });
        f_quantum = report.f_quantum;
    }

    let rows = curve.values.iter().map(|&(t, c)| match f_quantum.get(t) {
        Some(&f) => format!("{t},{},{}", float(c), float(f)),
        None => format!("{t},{},", float(c)),
    });
    out.csv("correlator.csv", "t,C_classical,f_quantum", rows)?;
    out.json(
        "classical.json",
        json!({
            "lyapunov": {
                "lambda": lyapunov.lambda,
                "median": lyapunov.median(),
                "spread": lyapunov.spread,
                "steps": lyapunov.steps,
                "seed_count": lyapunov.seed_count,
                "per_seed": lyapunov.per_seed,
            },
            "observable": curve.observable,
            "a0": curve.a0,
            "a0_sample": curve.a0_sample,
            "sample_count": curve.sample_count,
            "rng_seed": curve.rng_seed,
            "max_std_err": curve.std_err.iter().copied().fold(0.0, f64::max),
            "F_classical": f_classical,
            "correspondence": correspondence,
        }),
    )?;
    if spec.emit_plot {
        out.text("plot.gp", &output::correlator_plot(&title(spec)))?;
    }
    Ok(())
}

fn run_spectrum(spec: &RunSpec, out: &mut OutputDir) -> Result<()> {
    let n = spec.n.expect("resolved spectrum spec has N");
    let scale = PlanckScale::for_family(n, &spec.family)?;
    let floquet = build_floquet_with_offsets(&spec.family, &scale, spec.grid_offsets)?;
    let s = diagonalize(&floquet)?;
    let r = float(spec.family.r);
    let rows = s.phases.iter().enumerate().map(|(k, &phi)| format!("{r},{k},{}", float(phi)));
    out.csv("spectrum.csv", "r,level,eigenphase", rows)?;
    out.json(
        "spectrum.json",
        json!({
            "N": n,
            "h": scale.h(),
            "r": spec.family.r,
            "mean_spacing": s.mean_spacing(),
            "unitarity_defect": floquet.certificate,
            "max_residual": s.max_residual,
            "gram_error": s.gram_error,
        }),
    )?;
    if spec.emit_plot {
        out.text("plot.gp", &output::spectrum_plot(&title(spec)))?;
    }
    Ok(())
}

fn run_sweep(spec: &RunSpec, out: &mut OutputDir) -> Result<()> {
    let n = spec.n.expect("resolved sweep spec has N");
    let (r_min, r_max) = (spec.r_min.unwrap_or_default(), spec.r_max.unwrap_or_default());
    let scale = PlanckScale::for_family(n, &spec.family)?;
    let grid = uniform_grid(r_min, r_max, spec.r_step);
    let traj = sweep_quantization(&spec.family, &scale, &grid, sweep_options(spec))?;
    let stats = shift_statistics(&traj, r_min, r_max, spec.subtract_mean)?;

    let rows = traj.r_grid.iter().enumerate().flat_map(|(k, &r)| {
        let r = float(r);
        traj.phases
            .iter()
            .enumerate()
            .map(move |(level, p)| format!("{r},{level},{}", float(p[k])))
            .collect::<Vec<_>>()
    });
    out.csv("spectrum.csv", "r,level,eigenphase", rows)?;
    out.json(
        "sweep.json",
        json!({
            "N": n,
            "grid_points": traj.r_grid.len(),
            "pairing": traj.pairing,
            "crossings": traj.crossings,
            "min_overlap": traj.min_overlap,
            "refinements": traj.refinements,
            "max_total_displacement": traj.max_total_displacement(),
            "mean_shift": stats.mean_shift,
            "mean_sq_shift": stats.mean_sq,
            "subtract_mean": stats.subtract_mean,
        }),
    )?;
    if spec.emit_plot {
        out.text("plot.gp", &output::spectrum_plot(&title(spec)))?;
    }
    Ok(())
}

fn run_scaling(spec: &RunSpec, out: &mut OutputDir) -> Result<()> {
    let options = ScalingOptions {
        r_step: spec.r_step,
        subtract_mean: spec.subtract_mean,
        sweep: sweep_options(spec),
    };
    let (r0, r1) = (spec.r0.unwrap_or_default(), spec.r1.unwrap_or_default());
    let study = scaling_study(&spec.family, &spec.dimensions(), r0, r1, options)?;
    let rows = study
        .ladder
        .iter()
        .map(|p| format!("{},{},{}", p.n, float(p.h), float(p.mean_sq)));
    out.csv("shifts.csv", "N,h,mean_sq_shift_spacing_units", rows)?;
    let fit = &study.fit;
    let ratio = fit.model(Model::LogModel).residual_sum / fit.model(Model::PowerLaw).residual_sum;
    out.json(
        "fit.json",
        json!({
            "winner": fit.winner,
            "exponent": fit.exponent,
            "d": fit.d,
            "models": fit.models,
            "log_to_power_residual_ratio": ratio,
            "ladder": study.ladder,
        }),
    )?;
    if spec.emit_plot {
        out.text("plot.gp", &output::scaling_plot(&title(spec), fit))?;
    }
    Ok(())
}

fn run_ergodicity(spec: &RunSpec, out: &mut OutputDir) -> Result<()> {
    let dims = spec.dimensions();
    let t_grid = spec.t_grid.clone().unwrap_or_default();
    let a0 = spec.observable.torus_average();
    let reports = dims
        .par_iter()
        .map(|&n| {
            let scale = PlanckScale::for_family(n, &spec.family)?;
            let s = diagonalize(&build_floquet(&spec.family, &scale)?)?;
            let a = quantize_observable(spec.observable, &scale);
            ergodicity_report(&s, &a, a0, &t_grid, spec.gap_tol)
        })
        .collect::<Result<Vec<_>>>()?;

    let rows = reports
        .iter()
        .map(|r| format!("{},{},{}", r.n, float(r.diagonal.variance), float(r.f_curve.f_infinity)));
    out.csv("ergodicity.csv", "N,variance,F_infinity", rows)?;
    let blocks: Vec<(usize, Vec<String>)> = reports
        .iter()
        .map(|r| (r.n, r.f_curve.points.iter().map(|&(t, f)| row(&[t, f])).collect()))
        .collect();
    out.blocks("f_curve.csv", "T,F", &blocks)?;

    let per_n: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "N": r.n,
                "mean": r.diagonal.mean,
                "variance": r.diagonal.variance,
                "a0": r.diagonal.a0,
                "F_infinity": r.f_curve.f_infinity,
                "F_min": r.f_curve.min(),
                "F_non_increasing": r.f_curve.is_non_increasing(),
                "chain_holds": r.f_curve.f_infinity <= r.f_curve.min(),
                "offdiag": r.offdiag,
            })
        })
        .collect();
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .map(|r| ((r.n as f64).ln(), r.diagonal.variance.ln()))
        .collect();
    out.json(
        "ergodicity.json",
        json!({
            "observable": spec.observable,
            "reports": per_n,
            "log_variance_slope_vs_log_N": slope(&pts),
        }),
    )?;
    if spec.emit_plot {
        out.text("plot.gp", &output::ergodicity_plot(&title(spec), &dims))?;
    }
    Ok(())
}

/// Least-squares slope, `None` with fewer than two distinct abscissae.
pub fn slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
