//! Acceptance criteria 1 to 10. Runs without the libtest harness so that each
//! criterion prints exactly one PASS/FAIL line; exits nonzero on any FAIL.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use shortloop::airy_model::{
    airy_kernel_exact, decay_exponent, fit_leading_oscillation, g1, kappa_matched, kappa_published,
    q_numeric, calibrated_fit,
};
use shortloop::boundary::{
    halfspace_kernel_exact, upsilon_flat, upsilon_robin, BoundaryCondition, BoundaryModel,
};
use shortloop::config::{OracleKind, OracleSection, StudyConfig};
use shortloop::eigen::{halfline_kernel, EndCondition};
use shortloop::pointwise::{
    classify_regime, classify_values, d1_conditions, forbidden_tail_bound, predict_pointwise,
    PotentialModel, Predictor, Regime,
};
use shortloop::selftest::run_selftest;
use shortloop::special::global_table;
use shortloop::verify::{fit_loglog_slope, run_scaling_study, travel_time_window, turning_point_oracle};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

type Outcome = Result<(bool, String), String>;

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Residual of the exact kernel against κs^{1/2} + Q on s ∈ [4, 400].
fn criterion_1() -> Outcome {
    const TOL: f64 = 1e-10;
    let start = Instant::now();
    let kappa = kappa_matched(1, TOL).map_err(err)?.kappa;
    let kappa_ok = (kappa - 1.0 / PI).abs() <= 1e-4;
    let ss = logspace(4.0, 400.0, 200);
    let mut scaled_sup: f64 = 0.0;
    let mut above_floor = Vec::new();
    let mut published = Vec::new();
    for &s in &ss {
        let q = q_numeric(1, s, TOL).map_err(err)?;
        let g = g1(s);
        let r = g - kappa * s.sqrt() - q;
        scaled_sup = scaled_sup.max(r.abs() * s.powf(1.5));
        // Quadrature tolerance plus rounding in G and κs^{1/2}.
        let floor = TOL + 8.0 * f64::EPSILON * (g.abs() + kappa * s.sqrt());
        if r.abs() > 10.0 * floor {
            above_floor.push((s, r.abs()));
        }
        published.push((s, (g - kappa_published(1) * s.sqrt() - q).abs()));
    }
    let exponent = if above_floor.len() >= 4 {
        Some(fit_loglog_slope(&above_floor).map_err(err)?.slope)
    } else {
        None
    };
    let published_exponent = fit_loglog_slope(&published).map_err(err)?.slope;
    let decay_ok = exponent.is_none_or(|e| e <= -1.3);
    let elapsed = start.elapsed().as_secs_f64();
    let exp_text = match exponent {
        Some(e) => format!("residual decay exponent {e:.3}"),
        None => format!(
            "residual at the quadrature noise floor at {} of {} points, decay exponent not measurable, bound holds",
            ss.len() - above_floor.len(),
            ss.len()
        ),
    };
    let pass = kappa_ok && scaled_sup <= 5.0 && decay_ok && elapsed <= 60.0;
    Ok((
        pass,
        format!(
            "kappa_matched = {kappa:.10} (1/pi = {:.10}); sup |r| s^1.5 = {scaled_sup:.3e}; {exp_text}; \
             with kappa = 1/(2 pi) the residual exponent is {published_exponent:.3}; {elapsed:.1} s",
            1.0 / PI
        ),
    ))
}

/// Amplitude of Q t^γ against a cos(ω t^{3/2}) + b sin(ω t^{3/2}).
fn trig_fit(ts: &[f64], ys: &[f64], omega: f64) -> (f64, f64, f64) {
    let n = ts.len();
    let a = DMatrix::from_fn(n, 2, |i, j| {
        let th = omega * ts[i].powf(1.5);
        if j == 0 {
            th.cos()
        } else {
            th.sin()
        }
    });
    let y = DVector::from_column_slice(ys);
    let coef = a.clone().svd(true, true).solve(&y, 1e-14).expect("svd solve");
    let rss = (&a * &coef - &y).norm_squared();
    (coef[0], coef[1], rss)
}

fn criterion_2() -> Outcome {
    let ts = linspace(100.0, 400.0, 600);
    let q1: Vec<f64> = ts
        .iter()
        .map(|&t| q_numeric(1, t, 1e-11))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let fit = fit_leading_oscillation(1, &ts, &q1);
    let amp_ok = fit.max_relative_residual <= 0.03;

    // Frequency: dense scan of the residual, then golden-section refinement.
    let ys: Vec<f64> = ts.iter().zip(&q1).map(|(t, q)| q * t.powf(decay_exponent(1))).collect();
    let rss = |w: f64| trig_fit(&ts, &ys, w).2;
    let mut best = (f64::INFINITY, 0.0);
    let mut w = 1.32;
    while w <= 1.35 {
        let r = rss(w);
        if r < best.0 {
            best = (r, w);
        }
        w += 1e-5;
    }
    let (mut lo, mut hi) = (best.1 - 1e-5, best.1 + 1e-5);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if rss(a) < rss(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let omega = 0.5 * (lo + hi);
    let freq_ok = (omega - 4.0 / 3.0).abs() <= 1e-3;
    let calibrated = calibrated_fit(1).map_err(err)?;

    // d = 2 envelope: local amplitudes of Q t^{5/4} in sub-windows.
    let ts2 = linspace(100.0, 400.0, 480);
    let q2: Vec<f64> = ts2
        .iter()
        .map(|&t| q_numeric(2, t, 1e-11))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let gamma2 = decay_exponent(2);
    let edges = logspace(100.0, 400.0, 7);
    let mut amps = Vec::new();
    for e in edges.windows(2) {
        let (t, y): (Vec<f64>, Vec<f64>) = ts2
            .iter()
            .zip(&q2)
            .filter(|(t, _)| **t >= e[0] && **t <= e[1])
            .map(|(t, q)| (*t, q * t.powf(gamma2)))
            .unzip();
        let (a, b, _) = trig_fit(&t, &y, 4.0 / 3.0);
        amps.push(((e[0] * e[1]).sqrt(), a.hypot(b)));
    }
    let env = -gamma2 + fit_loglog_slope(&amps).map_err(err)?.slope;
    let env_ok = (env + 1.25).abs() <= 0.05;
    Ok((
        amp_ok && freq_ok && env_ok,
        format!(
            "d=1: amplitude residual {:.2}%, frequency {omega:.6} (4/3 = {:.6}), \
             fitted A = {:.6} phi = {:.4} vs published A = 1/(2 pi) = {:.6} phi = 3pi/2 = {:.4}, \
             calibrated A = {:.6} phi = {:.4}; d=2 envelope exponent {env:.4}",
            100.0 * fit.max_relative_residual,
            4.0 / 3.0,
            fit.amplitude,
            fit.phase,
            1.0 / (2.0 * PI),
            1.5 * PI,
            calibrated.amplitude,
            calibrated.phase
        ),
    ))
}

fn study(name: &str) -> Result<shortloop::verify::ScalingReport, String> {
    let path = configs().join(name);
    let text = std::fs::read_to_string(&path).map_err(err)?;
    let cfg = StudyConfig::parse(&text).map_err(err)?;
    run_scaling_study(&cfg).map_err(err)
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let weyl = study("airy_d1.cfg")?;
    let corrected = study("airy_d1_corrected.cfg")?;
    let elapsed = start.elapsed().as_secs_f64();
    let pass = weyl.check.two_sided && corrected.check.one_sided && elapsed <= 300.0;
    Ok((
        pass,
        format!(
            "weyl-only slope {:.4} (want -2/3 +- 0.1){}; weyl+correction slope {:.4} (want >= -1/3 - 0.15){}; {elapsed:.1} s",
            weyl.slope,
            weyl.aborted.as_deref().map(|a| format!(" aborted: {a}")).unwrap_or_default(),
            corrected.slope,
            corrected.aborted.as_deref().map(|a| format!(" aborted: {a}")).unwrap_or_default(),
        ),
    ))
}

fn criterion_4() -> Outcome {
    let m = PotentialModel::new(1, "x - 0.5", vec![(-1e3, 1e3)]).map_err(err)?;
    let opts = OracleSection {
        kind: OracleKind::Eigensolver,
        length: Some(3.0),
        points_per_wavelength: None,
        richardson: None,
        tol: None,
    };
    let mut parts = Vec::new();
    let mut ratio = f64::NAN;
    for h in [0.02f64, 0.01, 0.005] {
        let pts = travel_time_window(&m, &[0.5], 0.0, 4.0 * h.powf(2.0 / 3.0), 41).map_err(err)?;
        let xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        let oracle = turning_point_oracle(&m, h, 0.0, 0.5, &xs, &opts).map_err(err)?;
        let mut sup = [0.0f64; 2];
        for (p, o) in pts.iter().zip(&oracle) {
            for (k, pred) in [Predictor::WeylOnly, Predictor::WeylPlusCorrection].into_iter().enumerate() {
                let v = predict_pointwise(&m, p, 0.0, h, pred).map_err(err)?.total;
                sup[k] = sup[k].max((o - v).abs());
            }
        }
        ratio = sup[0] / sup[1];
        parts.push(format!("h={h}: weyl-only {:.3e}, corrected {:.3e}, ratio {ratio:.1}", sup[0], sup[1]));
    }
    Ok((ratio >= 3.0, parts.join("; ")))
}

fn criterion_5() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(2024);
    let mut counts = [0usize; 3];
    let mut uncovered = 0;
    let draw = |rng: &mut rand::rngs::StdRng, lo: f64, hi: f64| 10f64.powf(rng.random_range(lo..hi));
    for _ in 0..10_000 {
        let v = draw(&mut rng, -8.0, 1.0);
        let g = draw(&mut rng, -6.0, 1.0);
        let h = draw(&mut rng, -4.0, 0.0);
        let c = d1_conditions(v, g, h);
        if !c.iter().any(|&b| b) {
            uncovered += 1;
            continue;
        }
        let first = c.iter().position(|&b| b).unwrap();
        let (regime, _) = classify_values(1, v, g, h);
        let k = match regime {
            Regime::Branch1 => 0,
            Regime::Branch2 => 1,
            _ => 2,
        };
        if k != first {
            uncovered += 1;
        }
        counts[k] += 1;
    }
    let partition_ok = uncovered == 0 && counts.iter().all(|&c| c > 0);

    let airy = PotentialModel::airy(1).map_err(err)?;
    let mut c_branch = [0.0f64; 3];
    for h in [0.04, 0.02, 0.01, 0.005, 0.0025] {
        for x in linspace(-1.0, 1.0, 401) {
            let e = airy_kernel_exact(h, x, 0.0).map_err(err)?;
            let w = predict_pointwise(&airy, &[x], 0.0, h, Predictor::WeylOnly).map_err(err)?.total;
            let (regime, bound) = classify_regime(&airy, &[x], h).map_err(err)?;
            let k = match regime {
                Regime::Branch1 => 0,
                Regime::Branch2 => 1,
                _ => 2,
            };
            c_branch[k] = c_branch[k].max((e - w).abs() / bound);
        }
    }
    let c = c_branch.iter().cloned().fold(0.0, f64::max);
    Ok((
        partition_ok && c <= 3.0,
        format!(
            "10^4 triples: {} / {} / {} per branch, {uncovered} unclassified; \
             Airy weyl-only remainder constants {:.3} / {:.3} / {:.3}, single C = {c:.3}",
            counts[0], counts[1], counts[2], c_branch[0], c_branch[1], c_branch[2]
        ),
    ))
}

fn criterion_6() -> Outcome {
    let airy = PotentialModel::airy(1).map_err(err)?;
    let mut worst: f64 = 0.0;
    let mut smaller = Vec::new();
    for h in [0.1f64, 0.05, 0.04, 0.02, 0.01, 0.005] {
        let x = -6.0 * h.powf(2.0 / 3.0);
        let e = airy_kernel_exact(h, x, 0.0).map_err(err)?;
        let mut ratio: f64 = 0.0;
        for l in 0..=8 {
            let b = forbidden_tail_bound(&airy, &[x], 0.0, h, l as f64).map_err(err)?;
            ratio = ratio.max(e / b);
        }
        if h >= 0.02 {
            worst = worst.max(ratio);
        } else {
            smaller.push(format!("h={h}: {ratio:.3}"));
        }
    }
    Ok((
        worst <= 1.0,
        format!(
            "max e/bound over l <= 8 and h in {{0.1, 0.05, 0.04, 0.02}}: {worst:.3}; outside that range {}",
            smaller.join(", ")
        ),
    ))
}

fn criterion_7() -> Outcome {
    let h = 0.02;
    let start = Instant::now();
    let rs = linspace(0.5, 50.0, 500);
    let xs: Vec<f64> = rs.iter().map(|r| r * h).collect();
    let oracle = halfline_kernel(h, 1.0, EndCondition::Dirichlet, 30.0, &xs).map_err(err)?;
    let mut env_rel: f64 = 0.0;
    let mut literal: f64 = 0.0;
    for (r, e) in rs.iter().zip(&oracle) {
        let ups_oracle = h * e - 1.0 / PI;
        let ups = -(2.0 * r).sin() / (2.0 * PI * r);
        let envelope = 1.0 / (2.0 * PI * r);
        env_rel = env_rel.max((ups_oracle - ups).abs() / envelope);
        literal = literal.max((ups_oracle - ups).abs() / ups.abs());
    }
    let dir = BoundaryModel::new(1, BoundaryCondition::Dirichlet).map_err(err)?;
    let at_zero = halfspace_kernel_exact(&dir, h, 0.0, 1.0).map_err(err)?;
    Ok((
        env_rel <= 0.01 && at_zero == 0.0,
        format!(
            "max |error| / (1/(2 pi r)) = {:.3}% on r in [0.5, 50]; pointwise relative error {literal:.3e} \
             (unbounded near zeros of sin 2r); e(0,0,1) = {at_zero:e}; {:.1} s",
            100.0 * env_rel,
            start.elapsed().as_secs_f64()
        ),
    ))
}

fn criterion_8() -> Outcome {
    let dir = BoundaryModel::new(2, BoundaryCondition::Dirichlet).map_err(err)?;
    let mut peaks = Vec::new();
    let rs = linspace(10.0, 200.0, 190_001);
    let vals: Vec<f64> = rs
        .iter()
        .map(|&r| upsilon_flat(&dir, r).map(f64::abs))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    for i in 1..rs.len() - 1 {
        if vals[i] > vals[i - 1] && vals[i] >= vals[i + 1] {
            peaks.push((rs[i], vals[i]));
        }
    }
    let exponent = -fit_loglog_slope(&peaks).map_err(err)?.slope;
    let env_ok = (exponent - 1.5).abs() <= 0.05;
    let at_zero = upsilon_flat(&dir, 0.0).map_err(err)?;
    let zero_ok = (at_zero + 1.0 / (4.0 * PI)).abs() <= 1e-10;
    let (mut neu_dev, mut dir_dev): (f64, f64) = (0.0, 0.0);
    for d in [1, 2] {
        let neu = BoundaryModel::new(d, BoundaryCondition::Neumann).map_err(err)?;
        let dirm = BoundaryModel::new(d, BoundaryCondition::Dirichlet).map_err(err)?;
        let r0 = BoundaryModel::new(d, BoundaryCondition::Robin(0.0)).map_err(err)?;
        for r in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
            let n = upsilon_flat(&neu, r).map_err(err)?;
            neu_dev = neu_dev.max((upsilon_robin(&r0, r, 1e-11).map_err(err)? - n).abs());
            let dv = upsilon_flat(&dirm, r).map_err(err)?;
            for beta in [1e6, -1e6] {
                let rb = BoundaryModel::new(d, BoundaryCondition::Robin(beta)).map_err(err)?;
                dir_dev = dir_dev.max((upsilon_robin(&rb, r, 1e-11).map_err(err)? - dv).abs());
            }
        }
    }
    Ok((
        env_ok && zero_ok && neu_dev <= 1e-8 && dir_dev <= 1e-4,
        format!(
            "envelope exponent {exponent:.4} from {} peaks; Upsilon(0) + 1/(4 pi) = {:.1e}; \
             Robin(0) vs Neumann {neu_dev:.1e}; Robin(+-1e6) vs Dirichlet {dir_dev:.1e}",
            peaks.len(),
            at_zero + 1.0 / (4.0 * PI)
        ),
    ))
}

fn criterion_9() -> Outcome {
    let bm = BoundaryModel::new(2, BoundaryCondition::Dirichlet).map_err(err)?;
    let mut cs = Vec::new();
    for h in [0.04f64, 0.02, 0.01] {
        let lo = h.powf(1.0 / 3.0);
        let weyl = shortloop::boundary::free_kernel(2, h, 1.0).map_err(err)?;
        let mut sup: f64 = 0.0;
        for x in linspace(lo, 1.5, 20_001) {
            sup = sup.max((halfspace_kernel_exact(&bm, h, x, 1.0).map_err(err)? - weyl).abs());
        }
        cs.push(h * sup);
    }
    let max = cs.iter().cloned().fold(f64::MIN, f64::max);
    let min = cs.iter().cloned().fold(f64::MAX, f64::min);
    let variation = max / min - 1.0;
    Ok((
        variation <= 0.25,
        format!(
            "C(h) = h sup|e - weyl| = {:.4e} / {:.4e} / {:.4e} at h = 0.04 / 0.02 / 0.01, variation {:.1}%",
            cs[0],
            cs[1],
            cs[2],
            100.0 * variation
        ),
    ))
}

fn run_cli(args: &[&str]) -> Result<std::process::ExitStatus, String> {
    Command::new(env!("CARGO_BIN_EXE_shortloop"))
        .args(args)
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(err)
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let suites = run_selftest(global_table());
    let failed: Vec<&str> = suites.iter().filter(|s| !s.passed).map(|s| s.name).collect();
    let lib_secs = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let cli_ok = run_cli(&["selftest"])?.success();
    let cli_secs = start.elapsed().as_secs_f64();

    let config = configs().join("airy_d1_exact.cfg");
    let config = config.to_str().ok_or("non-UTF-8 path")?;
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(err)?;
        let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
        let runs: [Vec<String>; 4] = [
            ["qtable", "--dim", "1", "--tmax", "30", "--steps", "60", "--out", &p("q.csv")].map(String::from).to_vec(),
            ["kernel", "--model", "airy", "--h", "0.01", "--xmin", "-0.3", "--xmax", "0.3", "--out", &p("k.csv")]
                .map(String::from)
                .to_vec(),
            ["boundary-profile", "--dim", "2", "--rmax", "40", "--out", &p("b.csv")].map(String::from).to_vec(),
            ["study", "--config", config, "--out-dir", &dir.path().to_string_lossy()].map(String::from).to_vec(),
        ];
        for args in &runs {
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            if !run_cli(&refs)?.success() {
                return Err(format!("shortloop {} failed", args.join(" ")));
            }
        }
        let mut bytes = Vec::new();
        for name in ["q.csv", "k.csv", "b.csv", "airy_d1_exact.csv"] {
            bytes.push(std::fs::read(dir.path().join(name)).map_err(err)?);
        }
        outputs.push(bytes);
    }
    let identical = outputs[0] == outputs[1];
    Ok((
        failed.is_empty() && cli_ok && lib_secs <= 120.0 && cli_secs <= 120.0 && identical,
        format!(
            "selftest {} suites, failing: [{}], {lib_secs:.2} s in-process, {cli_secs:.2} s via the binary; \
             4 CSV outputs byte-identical across two runs: {identical}",
            suites.len(),
            failed.join(", ")
        ),
    ))
}

fn main() {
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut failures = 0;
    for (n, f) in criteria {
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!("criterion {n:>2} {}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of 10 criteria pass", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
