//! Reduced-size invariant suites, one per module, run by `shortloop selftest`.
//!
//! Each suite is a handful of closed-form or structural checks that finish in
//! well under a second; together they exercise every numerical layer.

use crate::airy_model::{
    g_profile, kernel_identity_defect, q_numeric, weyl_profile, KERNEL_IDENTITY_TOL,
};
use crate::boundary::{halfspace_kernel_exact, upsilon_flat, upsilon_robin, BoundaryCondition, BoundaryModel};
use crate::config::StudyConfig;
use crate::eigen::{discretize, kernel_at, lowest_eigenvalues, sturm_count, EndCondition, Occupancy};
use crate::expr::parse_expr;
use crate::oscillatory::{
    integrate_beta, stationary_phase_expand, sum_expansion, CriticalPoint, OscillatoryIntegrand, Sense,
};
use crate::pointwise::{classify_values, d1_conditions, predict_pointwise, travel_time, PotentialModel, Predictor};
use crate::special::{eval_special_with, unit_ball_volume, AiryTable, SpecialKind};
use crate::verify::{check_slope, fit_loglog_slope, run_scaling_study};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    /// First failed check, empty on success.
    pub detail: String,
    pub elapsed: Duration,
}

type Check = std::result::Result<(), String>;

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn close(got: f64, want: f64, tol: f64, what: &str) -> Check {
    ensure((got - want).abs() <= tol, || {
        format!("{what}: got {got:.17e}, want {want:.17e} (tol {tol:e})")
    })
}

fn ok<T>(r: crate::Result<T>, what: &str) -> std::result::Result<T, String> {
    r.map_err(|e| format!("{what}: {e}"))
}

pub const SUITES: [&str; 8] = [
    "special_fn",
    "potential_parser",
    "oscillatory",
    "model_airy",
    "pointwise",
    "boundary_layer",
    "oracle_eigensolve",
    "verify",
];

/// Run every suite, with the special-function checks done against `table`.
pub fn run_selftest(table: &AiryTable) -> Vec<SuiteResult> {
    SUITES
        .iter()
        .map(|&name| {
            let start = Instant::now();
            let r = match name {
                "special_fn" => special_fn(table),
                "potential_parser" => potential_parser(),
                "oscillatory" => oscillatory(),
                "model_airy" => model_airy(),
                "pointwise" => pointwise(),
                "boundary_layer" => boundary_layer(),
                "oracle_eigensolve" => oracle_eigensolve(),
                _ => verify(),
            };
            SuiteResult {
                name,
                passed: r.is_ok(),
                detail: r.err().unwrap_or_default(),
                elapsed: start.elapsed(),
            }
        })
        .collect()
}

fn special_fn(table: &AiryTable) -> Check {
    let ai = |z| ok(eval_special_with(table, SpecialKind::Ai, z), "Ai");
    let aip = |z| ok(eval_special_with(table, SpecialKind::AiPrime, z), "Ai'");
    close(ai(0.0)?, 0.355_028_053_887_817_2, 1e-13, "Ai(0)")?;
    close(aip(0.0)?, -0.258_819_403_792_806_8, 1e-13, "Ai'(0)")?;
    close(ai(-2.338_107_410_459_767)?, 0.0, 1e-12, "first zero of Ai")?;
    close(ai(2.0)?, 0.034_924_130_423_274_38, 1e-14, "Ai(2)")?;
    close(aip(-5.0)?, 0.327_192_818_554_443_7, 1e-11, "Ai'(-5)")?;
    let defect = kernel_identity_defect(table);
    ensure(defect <= KERNEL_IDENTITY_TOL, || {
        format!("d/ds[Ai'(-s)^2 + s Ai(-s)^2] = Ai(-s)^2 violated by {defect:e}")
    })?;
    let j = ok(eval_special_with(table, SpecialKind::BesselJ1, 1.0), "J1")?;
    close(j, 0.440_050_585_744_933_5, 1e-13, "J1(1)")?;
    close(ok(unit_ball_volume(3), "ball")?, 4.0 * PI / 3.0, 1e-14, "|B^3|")
}

fn potential_parser() -> Check {
    let src = "-(x1) * (1 + 0.5*sin(x2)) + x2^2/exp(x1) - sqrt(abs(x2) + 1)";
    let e = ok(parse_expr(src), "parse")?;
    let again = ok(parse_expr(&e.to_string()), "reparse")?;
    for p in [[0.3, -1.2], [2.0, 0.5], [-1.0, 4.0]] {
        let a = ok(e.eval(&p), "eval")?;
        let b = ok(again.eval(&p), "eval")?;
        ensure(a.to_bits() == b.to_bits(), || format!("round trip changed value at {p:?}"))?;
        let g = ok(e.gradient(&p), "gradient")?;
        let step = 1e-5;
        for axis in 0..2 {
            let mut hi = p;
            let mut lo = p;
            hi[axis] += step;
            lo[axis] -= step;
            let fd = (ok(e.eval(&hi), "eval")? - ok(e.eval(&lo), "eval")?) / (2.0 * step);
            close(g[axis], fd, 1e-6 * (1.0 + fd.abs()), "gradient")?;
        }
    }
    ensure(parse_expr("x +").is_err(), || "accepted 'x +'".into())?;
    ensure(parse_expr("foo(x)").is_err(), || "accepted unknown function".into())?;
    ensure(ok(parse_expr("sqrt(x)"), "parse")?.eval(&[-1.0]).is_err(), || {
        "sqrt(-1) did not raise a domain error".into()
    })
}

fn oscillatory() -> Check {
    for t in [4.0, 9.0] {
        let s = OscillatoryIntegrand {
            p: 0.5,
            t,
            cubic: 0.0,
            sign_phase: -1.0,
            subtract_one: false,
            sense: Sense::AbsolutelyConvergent,
        };
        let r = ok(integrate_beta(&s, 1e-10), "Fresnel-type integral")?;
        close(r.value.re, 2.0 * (PI / (2.0 * t)).sqrt(), 1e-8, "Fresnel-type integral")?;
        close(r.value.im, 0.0, 1e-8, "Fresnel-type imaginary part")?;
    }
    let s = OscillatoryIntegrand::correction_d1(2.5);
    let a = ok(integrate_beta(&s, 1e-10), "correction integrand")?.value;
    let b = ok(integrate_beta(&s.conjugated(), 1e-10), "conjugated integrand")?.value;
    ensure((a - b.conj()).norm() <= 1e-9, || format!("conjugation symmetry: {a} vs {b}"))?;
    // ∫e^{iλx²}dx = (π/λ)^{1/2}e^{iπ/4}
    let lambda = 50.0;
    let terms = ok(
        stationary_phase_expand(&[CriticalPoint::new(0.0, 0.0, 2.0, 1.0)], lambda, 1),
        "stationary phase",
    )?;
    let want = Complex64::from_polar((PI / lambda).sqrt(), PI / 4.0);
    let got = sum_expansion(&terms, lambda);
    ensure((got - want).norm() <= 1e-12, || format!("Gaussian phase: {got} vs {want}"))
}

fn model_airy() -> Check {
    for (d, s) in [(1, -2.0), (1, 0.0), (1, 1.5), (1, 12.0), (2, -1.0), (2, 3.0)] {
        let g = ok(g_profile(d, s, 1e-11), "G")?;
        let q = ok(q_numeric(d, s, 1e-10), "Q")?;
        let r = g - weyl_profile(d, s) - q;
        ensure(r.abs() <= 1e-8, || {
            format!("G - weyl - Q = {r:e} at d = {d}, s = {s}")
        })?;
    }
    Ok(())
}

fn pointwise() -> Check {
    let logspace = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect()
    };
    for &h in &logspace(-4.0, 0.0, 5) {
        for &v in &logspace(-8.0, 1.0, 25) {
            for &g in &logspace(-6.0, 1.0, 25) {
                let c = d1_conditions(v, g, h);
                ensure(c.iter().any(|&b| b), || {
                    format!("no regime covers |V| = {v:e}, |grad V| = {g:e}, h = {h:e}")
                })?;
                let (_, bound) = classify_values(1, v, g, h);
                ensure(bound.is_finite() && bound > 0.0, || format!("bound {bound} at {v:e}"))?;
            }
        }
    }
    let airy = ok(PotentialModel::airy(1), "model")?;
    let h = 0.1;
    let p = ok(predict_pointwise(&airy, &[1.0], 0.0, h, Predictor::WeylOnly), "predict")?;
    close(p.weyl, 1.0 / (PI * h), 1e-12, "Weyl term of -x at x = 1")?;
    close(ok(travel_time(&airy, &[0.0], 0.0), "W")?, 0.0, 1e-14, "W at the turning point")?;
    let w = ok(travel_time(&airy, &[1.0], 0.0), "W")?;
    close(w.abs(), 1.0, 1e-10, "|W| of -x at x = 1")
}

fn boundary_layer() -> Check {
    let dir2 = ok(BoundaryModel::new(2, BoundaryCondition::Dirichlet), "model")?;
    close(ok(upsilon_flat(&dir2, 0.0), "upsilon")?, -1.0 / (4.0 * PI), 1e-12, "Dirichlet Υ(0), d = 2")?;
    let dir1 = ok(BoundaryModel::new(1, BoundaryCondition::Dirichlet), "model")?;
    close(ok(halfspace_kernel_exact(&dir1, 0.02, 0.0, 1.0), "kernel")?, 0.0, 1e-12, "Dirichlet e(0,0)")?;
    let r = 3.0;
    close(ok(upsilon_flat(&dir1, r), "upsilon")?, -(2.0 * r).sin() / (2.0 * PI * r), 1e-15, "Dirichlet Υ, d = 1")?;
    for d in [1, 2] {
        let neu = ok(BoundaryModel::new(d, BoundaryCondition::Neumann), "model")?;
        let dir = ok(BoundaryModel::new(d, BoundaryCondition::Dirichlet), "model")?;
        let rob0 = ok(BoundaryModel::new(d, BoundaryCondition::Robin(0.0)), "model")?;
        let robi = ok(BoundaryModel::new(d, BoundaryCondition::Robin(1e6)), "model")?;
        for r in [0.5, 4.0] {
            let n = ok(upsilon_flat(&neu, r), "upsilon")?;
            close(ok(upsilon_robin(&rob0, r, 1e-11), "Robin")?, n, 1e-10, "Robin β = 0 vs Neumann")?;
            let dv = ok(upsilon_flat(&dir, r), "upsilon")?;
            close(ok(upsilon_robin(&robi, r, 1e-11), "Robin")?, dv, 1e-4, "Robin β = 1e6 vs Dirichlet")?;
        }
    }
    Ok(())
}

fn oracle_eigensolve() -> Check {
    let free = ok(PotentialModel::new(1, "0", vec![(0.0, PI)]), "model")?;
    let dd = (EndCondition::Dirichlet, EndCondition::Dirichlet);
    let disc = ok(discretize(&free, 1.0, (0.0, PI), dd, 512, 30.0), "discretize")?;
    let ev = lowest_eigenvalues(&disc, 4);
    for (i, l) in ev.iter().enumerate() {
        let n = (i + 1) as f64;
        close(*l, n * n, 1e-3 * n * n, "Dirichlet box eigenvalue")?;
    }
    let mut last = 0;
    for tau in [0.5, 2.0, 5.0, 10.0, 17.0] {
        let c = sturm_count(&disc, tau);
        ensure(c >= last, || format!("Sturm count decreased at tau = {tau}"))?;
        last = c;
    }
    ensure(last == 4, || format!("{last} levels below 17, want 4"))?;
    let x = disc.x(100);
    let mut prev = 0.0;
    for tau in [2.0, 5.0, 10.0, 17.0] {
        let e = ok(kernel_at(&disc, x, tau, Occupancy::Sharp), "kernel")?;
        ensure(e >= prev, || format!("kernel not monotone in tau at {tau}"))?;
        prev = e;
    }
    // Sharp projector below 17 on the unit box: (2/π)Σ_{k≤4} sin²(kx).
    let want: f64 = (1..=4).map(|k| (k as f64 * x).sin().powi(2)).sum::<f64>() * 2.0 / PI;
    close(prev, want, 2e-3, "box projector diagonal")
}

const EXACT_STUDY: &str = r#"
[study]
id = "selftest"
anchor = "turning-point Weyl remainder"
expected_slope = -0.6666666666666666
tolerance = 0.1

[model]
kind = "potential"
potential = "-x"

[sweep]
h = [0.04, 0.02, 0.01, 0.004]

[sweep.x_set]
kind = "travel-time-window"
halfwidth = 1.0
exponent = 0.6666666666666666
points = 11

[oracle]
kind = "airy-exact"

[predictor]
variant = "weyl-only"

[output]
csv = "selftest.csv"
summary = "selftest.txt"
"#;

fn verify() -> Check {
    let pairs: Vec<(f64, f64)> = [0.1, 0.05, 0.02, 0.01]
        .iter()
        .map(|&h: &f64| (h, 3.0 * h.powf(0.667)))
        .collect();
    let fit = ok(fit_loglog_slope(&pairs), "fit")?;
    close(fit.slope, 0.667, 1e-12, "exact power-law slope")?;
    ensure(check_slope(-0.30, -1.0 / 3.0, 0.15).one_sided, || "slope -0.30 rejected".into())?;
    ensure(!check_slope(-0.70, -1.0 / 3.0, 0.15).one_sided, || "slope -0.70 accepted".into())?;
    ensure(fit_loglog_slope(&[(0.1, 0.0), (0.01, 1.0)]).is_err(), || {
        "zero error accepted by the log-log fit".into()
    })?;
    let cfg = ok(StudyConfig::parse(EXACT_STUDY), "config")?;
    let report = ok(run_scaling_study(&cfg), "study")?;
    ensure(report.verdict, || format!("exact Airy study failed: slope {}", report.slope))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::global_table;

    #[test]
    fn all_suites_pass() {
        for r in run_selftest(global_table()) {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn corrupted_table_names_special_fn() {
        let bad = global_table().perturbed(1e-3);
        let failed: Vec<_> = run_selftest(&bad).into_iter().filter(|r| !r.passed).collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].name, "special_fn");
    }
}
