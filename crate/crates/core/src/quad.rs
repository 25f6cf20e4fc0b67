//! Quadrature building blocks: adaptive Gauss–Kronrod (7/15), fixed
//! Gauss–Legendre rules and Wynn's epsilon extrapolation.

use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

/// Values that can be integrated: reals and complex numbers.
pub trait QuadValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_error: f64,
    pub converged: bool,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: (integral, error estimate).
pub fn gk15<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    let mut fv = [T::default(); 15];
    fv[7] = fc;
    for j in 0..7 {
        let dx = hl * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv[j] = f1;
        fv[14 - j] = f2;
        rk = rk + (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            rg = rg + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = rk * 0.5;
    let mut asc = 0.0;
    for j in 0..7 {
        asc += WGK[j] * ((fv[j] - mean).magnitude() + (fv[14 - j] - mean).magnitude());
    }
    asc += WGK[7] * (fc - mean).magnitude();
    let asc = asc * hl.abs();
    let value = rk * hl;
    let mut err = ((rk - rg) * hl).magnitude();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    // Guard against round-off making the estimate meaninglessly small.
    let floor = 50.0 * f64::EPSILON * value.magnitude();
    (value, err.max(floor))
}

/// Globally adaptive Gauss–Kronrod quadrature on [a, b].
pub fn adaptive<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> QuadResult<T> {
    let mut panels: Vec<(f64, f64, T, f64)> = Vec::new();
    let (v, e) = gk15(&mut f, a, b);
    panels.push((a, b, v, e));
    let mut evaluations = 15;
    loop {
        let mut total = T::default();
        let mut err = 0.0;
        let mut worst = 0;
        for (i, p) in panels.iter().enumerate() {
            total = total + p.2;
            err += p.3;
            if p.3 > panels[worst].3 {
                worst = i;
            }
        }
        let target = abs_tol.max(rel_tol * total.magnitude());
        if err <= target || panels.len() >= max_panels {
            return QuadResult {
                value: total,
                abs_error: err,
                converged: err <= target,
                evaluations,
            };
        }
        let (pa, pb, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (pa + pb);
        if mid <= pa.min(pb) || mid >= pa.max(pb) {
            // Interval cannot be split any further in floating point.
            return QuadResult {
                value: total,
                abs_error: err,
                converged: false,
                evaluations,
            };
        }
        let (v1, e1) = gk15(&mut f, pa, mid);
        let (v2, e2) = gk15(&mut f, mid, pb);
        evaluations += 30;
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Fixed composite Gauss–Legendre integral of f over [a, b] with `panels`
/// equal panels of an `n`-point rule.
pub fn composite_gl<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    rule: &(Vec<f64>, Vec<f64>),
) -> T {
    let width = (b - a) / panels as f64;
    let mut acc = T::default();
    for k in 0..panels {
        let lo = a + k as f64 * width;
        let c = lo + 0.5 * width;
        let mut part = T::default();
        for (x, w) in rule.0.iter().zip(rule.1.iter()) {
            part = part + f(c + 0.5 * width * x) * *w;
        }
        acc = acc + part * (0.5 * width);
    }
    acc
}

/// Wynn epsilon extrapolation of a sequence of partial sums. Returns the
/// extrapolated limit and an error estimate.
pub fn wynn_epsilon(partial: &[Complex64]) -> (Complex64, f64) {
    let n = partial.len();
    if n < 3 {
        let last = *partial.last().unwrap_or(&Complex64::default());
        let err = if n == 2 {
            (partial[1] - partial[0]).norm()
        } else {
            f64::INFINITY
        };
        return (last, err);
    }
    // e[k][j]: column k of the epsilon table.
    let mut prev: Vec<Complex64> = vec![Complex64::default(); n + 1];
    let mut cur: Vec<Complex64> = partial.to_vec();
    let mut best = partial[n - 1];
    let mut best_err = (partial[n - 1] - partial[n - 2]).norm();
    let mut k = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for j in 0..cur.len() - 1 {
            let diff = cur[j + 1] - cur[j];
            let base = if k == 0 { Complex64::default() } else { prev[j + 1] };
            if diff.norm() == 0.0 {
                next.push(Complex64::new(f64::INFINITY, 0.0));
            } else {
                next.push(base + diff.inv());
            }
        }
        k += 1;
        // Even columns hold estimates of the limit.
        if k % 2 == 0 && next.len() >= 2 {
            let m = next.len();
            let a = next[m - 1];
            let b = next[m - 2];
            if a.re.is_finite() && a.im.is_finite() && b.re.is_finite() && b.im.is_finite() {
                let err = (a - b).norm();
                if err < best_err {
                    best = a;
                    best_err = err;
                }
            }
        }
        prev = cur;
        cur = next;
    }
    (best, best_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(10);
        for p in 0..20 {
            let got: f64 = rule.0.iter().zip(&rule.1).map(|(x, w)| w * x.powi(p)).sum();
            let want = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((got - want).abs() < 1e-14, "p={p}: {got}");
        }
    }

    #[test]
    fn adaptive_handles_sqrt_endpoint() {
        let r = adaptive(|x: f64| x.sqrt(), 0.0, 1.0, 1e-12, 0.0, 500);
        assert!(r.converged);
        assert!((r.value - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn adaptive_complex() {
        let r = adaptive(
            |x: f64| Complex64::new(0.0, x).exp(),
            0.0,
            std::f64::consts::PI,
            1e-13,
            0.0,
            200,
        );
        assert!((r.value - Complex64::new(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // ln 2 = 1 − 1/2 + 1/3 − …
        let mut s = 0.0;
        let partial: Vec<Complex64> = (1..=15)
            .map(|k| {
                s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                Complex64::new(s, 0.0)
            })
            .collect();
        let (v, err) = wynn_epsilon(&partial);
        assert!((v.re - 2f64.ln()).abs() < 1e-10, "{v}");
        assert!(err < 1e-8);
    }
}
