//! Acceptance criteria, one test each. Every test writes a single
//! `ACCEPTANCE <id> PASS|FAIL` line before asserting.

use std::path::Path;
use std::sync::OnceLock;

use qmap::classical::{classical_correlator, lyapunov_exponent, random_points};
use qmap::config::default_t_grid;
use qmap::ergodicity::{ergodicity_report, quantum_classical_compare, ErgodicityReport};
use qmap::model::{MapFamily, Observable, PlanckScale, Variant};
use qmap::quantization::{build_floquet, quantize_observable};
use qmap::scaling::{scaling_study, Model, ScalingOptions, ScalingStudy};
use qmap::spectral::diagonalize;
use qmap::sweep::{sweep_quantization, uniform_grid, LevelTrajectories, SweepOptions, DEFAULT_R_STEP};
use qmap_acceptance::{verdict, LADDER};

const R0: f64 = 0.0;
const R1: f64 = 3.0;

fn study(variant: Variant) -> &'static ScalingStudy {
    static CELLS: [OnceLock<ScalingStudy>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let idx = match variant {
        Variant::Chaotic => 0,
        Variant::Regular => 1,
        _ => 2,
    };
    CELLS[idx].get_or_init(|| {
        scaling_study(&MapFamily::new(variant, 0.0), &LADDER, R0, R1, ScalingOptions::default())
            .expect("scaling study runs")
    })
}

fn sweep_512(variant: Variant) -> LevelTrajectories {
    let family = MapFamily::new(variant, 0.0);
    let scale = PlanckScale::for_family(512, &family).unwrap();
    let grid = uniform_grid(R0, R1, DEFAULT_R_STEP);
    sweep_quantization(&family, &scale, &grid, SweepOptions::default()).expect("sweep runs")
}

fn ergodicity_ladder() -> &'static [ErgodicityReport] {
    static CELL: OnceLock<Vec<ErgodicityReport>> = OnceLock::new();
    CELL.get_or_init(|| {
        let family = MapFamily::new(Variant::Chaotic, 0.0);
        LADDER
            .iter()
            .map(|&n| {
                let scale = PlanckScale::for_family(n, &family).unwrap();
                let s = diagonalize(&build_floquet(&family, &scale).unwrap()).unwrap();
                let a = quantize_observable(Observable::CosQ, &scale);
                ergodicity_report(&s, &a, 0.0, &default_t_grid(n), 1e-8).unwrap()
            })
            .collect()
    })
}

fn ladder_summary(study: &ScalingStudy) -> String {
    study
        .ladder
        .iter()
        .map(|p| format!("N={}:{:.4}", p.n, p.mean_sq))
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn criterion_01_unitarity_and_residuals() {
    let mut worst_u: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    for v in Variant::ALL {
        for r in [0.0, 3.0] {
            for n in [64, 512] {
                let family = MapFamily::new(v, r);
                let scale = PlanckScale::for_family(n, &family).unwrap();
                let u = build_floquet(&family, &scale).unwrap();
                let s = diagonalize(&u).unwrap();
                worst_u = worst_u.max(u.certificate);
                worst_res = worst_res.max(s.max_residual);
            }
        }
    }
    let pass = worst_u < 1e-12 && worst_res < 1e-10;
    verdict(1, "unitarity & residual certificates", pass,
        &format!("max |U†U−I| = {worst_u:.2e} (< 1e-12), max residual = {worst_res:.2e} (< 1e-10)"));
    assert!(pass);
}

#[test]
fn criterion_02_chaotic_rigidity() {
    let traj = sweep_512(Variant::Chaotic);
    let d = traj.max_total_displacement();
    let pass = d < 1.0;
    verdict(2, "chaotic N=512 levels move < 1 spacing over r 0→3", pass,
        &format!("max displacement = {d:.4} spacings, min overlap = {:.3}", traj.min_overlap));
    assert!(pass);
}

#[test]
fn criterion_03_regular_crossings() {
    let traj = sweep_512(Variant::Regular);
    let pass = traj.crossings >= 1;
    verdict(3, "regular N=512 tracked crossings over r 0→3", pass,
        &format!("crossings = {} (≥ 1), min overlap = {:.3}", traj.crossings, traj.min_overlap));
    assert!(pass);
}

#[test]
fn criterion_04_chaotic_linear_law() {
    let st = study(Variant::Chaotic);
    let s = st.fit.exponent;
    let pass = (s - 1.0).abs() <= 0.35;
    verdict(4, "chaotic mean_sq ∝ h^s with s = 1.0 ± 0.35", pass,
        &format!("s = {s:.3}, winner = {}, {}", st.fit.winner.name(), ladder_summary(st)));
    assert!(pass, "exponent {s}");
}

#[test]
fn criterion_05_regular_plateau() {
    let st = study(Variant::Regular);
    let s = st.fit.exponent;
    let pass = s.abs() < 0.35 && st.fit.winner == Model::Constant;
    verdict(5, "regular |s| < 0.35 and constant model wins", pass,
        &format!("s = {s:.3}, winner = {}, {}", st.fit.winner.name(), ladder_summary(st)));
    assert!(pass);
}

#[test]
fn criterion_06_slow_ergodic_log_law() {
    let st = study(Variant::SlowErgodic);
    let log = st.fit.model(Model::LogModel).residual_sum;
    let power = st.fit.model(Model::PowerLaw).residual_sum;
    let ratio = log / power;
    let monotone = st.ladder.windows(2).all(|w| w[1].mean_sq < w[0].mean_sq);
    let pass = ratio <= 0.5 && monotone;
    verdict(6, "slow-ergodic log model beats power law (ratio ≤ 0.5), mean_sq decreasing", pass,
        &format!("residual ratio = {ratio:.3}, monotone = {monotone}, {}", ladder_summary(st)));
    assert!(pass, "ratio {ratio}, monotone {monotone}");
}

#[test]
fn criterion_07_variance_scaling() {
    let reps = ergodicity_ladder();
    let pts: Vec<(f64, f64)> = reps
        .iter()
        .map(|r| ((r.n as f64).ln(), r.diagonal.variance.ln()))
        .collect();
    let slope = qmap::cli::slope(&pts).unwrap();
    let v512 = reps.last().unwrap().diagonal.variance;
    let pass = (slope + 1.0).abs() <= 0.4 && v512 < 1e-2;
    let vars: Vec<String> = reps.iter().map(|r| format!("N={}:{:.3e}", r.n, r.diagonal.variance)).collect();
    verdict(7, "chaotic ln(variance) vs ln N slope = −1 ± 0.4, variance(512) < 1e-2", pass,
        &format!("slope = {slope:.3}, {}", vars.join(" ")));
    assert!(pass);
}

#[test]
fn criterion_08_inequality_chain() {
    let reps = ergodicity_ladder();
    let mut pass = true;
    let mut details = Vec::new();
    for r in reps {
        let c = &r.f_curve;
        let chain = c.points.iter().all(|&(_, f)| c.f_infinity <= f);
        let mono = c.is_non_increasing();
        let tail = c.points.last().unwrap().1 - c.f_infinity;
        let ok = c.points.len() == 20 && chain && mono && tail < 1e-6;
        pass &= ok;
        details.push(format!("N={}: chain={chain} monotone={mono} F(T_large)−F∞={tail:.1e}", r.n));
    }
    verdict(8, "F∞ ≤ F(T), F non-increasing, F(T_large) − F∞ < 1e-6", pass, &details.join("; "));
    assert!(pass);
}

#[test]
fn criterion_09_quantum_classical_correspondence() {
    let family = MapFamily::new(Variant::Chaotic, 0.0);
    let scale = PlanckScale::for_family(512, &family).unwrap();
    let u = build_floquet(&family, &scale).unwrap();
    let a = quantize_observable(Observable::CosQ, &scale);
    let curve = classical_correlator(&family, Observable::CosQ, 5, 1_000_000, 1).unwrap();
    let rep = quantum_classical_compare(&u, &a, &curve, 5).unwrap();
    let lyap = lyapunov_exponent(&family, &random_points(10, 1), 100_000).unwrap();
    let t_ehr = lyap.ehrenfest_time(512).unwrap();
    let pass = rep.max_deviation < 0.05 && 5.0 < t_ehr;
    verdict(9, "chaotic N=512 |f(t) − C_cl(t)| < 0.05 for t ≤ 5", pass,
        &format!("max deviation = {:.2e}, T_Ehr = {t_ehr:.2}", rep.max_deviation));
    assert!(pass);
}

fn run_twice(args: &[&str], out: &Path) -> Vec<(String, Vec<u8>, Vec<u8>)> {
    let snapshot = || {
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(out)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    let argv: Vec<&str> = ["qmap"]
        .into_iter()
        .chain(args.iter().copied())
        .chain(["--out", out.to_str().unwrap()])
        .collect();
    let run = || {
        assert_eq!(qmap::cli::run_command(argv.iter().copied()), 0, "{args:?}");
        snapshot()
    };
    let first = run();
    let second = run();
    assert_eq!(first.len(), second.len());
    first
        .into_iter()
        .zip(second)
        .map(|((name, a), (_, b))| (name, a, b))
        .collect()
}

#[test]
fn criterion_10_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 5] = [
        &["classical", "--variant", "chaotic", "--N", "64", "--samples", "100000", "--t-max", "50", "--seed", "9"],
        &["spectrum", "--variant", "slow_ergodic", "--r", "2", "--N", "64"],
        &["sweep", "--variant", "regular", "--N", "64", "--r-max", "1", "--emit-plot"],
        &["scaling", "--variant", "chaotic", "--N", "16,32,64,128", "--r1", "1", "--emit-plot"],
        &["ergodicity", "--variant", "chaotic", "--N", "32,64"],
    ];
    let mut compared = 0;
    let mut differing = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        for (name, a, b) in run_twice(args, &dir.path().join(i.to_string())) {
            compared += 1;
            if a != b {
                differing.push(format!("{}/{name}", args[0]));
            }
        }
    }
    let pass = differing.is_empty() && compared > 0;
    verdict(10, "repeated runs give byte-identical outputs", pass,
        &format!("{compared} files compared, differing: {differing:?}"));
    assert!(pass);
}
