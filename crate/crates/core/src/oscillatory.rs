//! Singular oscillatory integrals over the real line of the form
//!
//! ```text
//! ∫ |β|^{-p} e^{i c (π/4) sign β} e^{2iβt} F(β) dβ,
//! F(β) = e^{i a β³}   or   F(β) = e^{i a β³} − 1
//! ```
//!
//! and a generic stationary-phase expansion.
//!
//! Each half-line β = σu (σ = ±1, u > 0) is integrated separately:
//!
//! 1. a small cell [0, u₀] where the total phase varies by at most ~1/2 rad,
//!    integrated in v = √u (which removes the u^{-1/2} endpoint behaviour);
//!    non-integrable singularities are taken as Hadamard finite parts;
//! 2. panels on [u₀, U] no wider than a half period of the local phase nor
//!    wider than the stationary-phase width √(π/|ψ″|);
//! 3. tails beyond U, where the phase is monotone, split into exact half-period
//!    panels whose partial sums are accelerated by Wynn's epsilon algorithm.

use crate::error::{Error, Result};
use crate::quad::{adaptive, gk15, wynn_epsilon};
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    AbsolutelyConvergent,
    /// Non-integrable |β|^{-p} singularities are read as Hadamard finite parts.
    Distributional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatoryIntegrand {
    /// Exponent of the amplitude |β|^{-p}; one of 1/2, 1, 3/2, 2.
    pub p: f64,
    /// Coefficient t of 2β in the phase.
    pub t: f64,
    /// Coefficient a of β³ in the phase; 0 means no cubic term.
    pub cubic: f64,
    /// Coefficient c of the sign-dependent phase e^{i c (π/4) sign β}.
    pub sign_phase: f64,
    /// Replace e^{iaβ³} by e^{iaβ³} − 1.
    pub subtract_one: bool,
    pub sense: Sense,
}

impl OscillatoryIntegrand {
    pub const DEFAULT_CUBIC: f64 = -2.0 / 3.0;

    /// Integrand of the correction profile for the one-dimensional model.
    pub fn correction_d1(t: f64) -> Self {
        OscillatoryIntegrand {
            p: 1.5,
            t,
            cubic: Self::DEFAULT_CUBIC,
            sign_phase: -3.0,
            subtract_one: true,
            sense: Sense::AbsolutelyConvergent,
        }
    }

    /// Integrand of the correction profile for the two-dimensional model.
    pub fn correction_d2(t: f64) -> Self {
        OscillatoryIntegrand {
            p: 2.0,
            t,
            cubic: Self::DEFAULT_CUBIC,
            sign_phase: -4.0,
            subtract_one: true,
            sense: Sense::AbsolutelyConvergent,
        }
    }

    /// The same integral with t ↦ −t and every phase conjugated; its value is
    /// the complex conjugate of the original.
    pub fn conjugated(&self) -> Self {
        OscillatoryIntegrand {
            t: -self.t,
            cubic: -self.cubic,
            sign_phase: -self.sign_phase,
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        if ![0.5, 1.0, 1.5, 2.0].contains(&self.p) {
            return Err(Error::Contract(format!(
                "singularity exponent {} not in {{1/2, 1, 3/2, 2}}",
                self.p
            )));
        }
        if !self.t.is_finite() || !self.cubic.is_finite() || !self.sign_phase.is_finite() {
            return Err(Error::Contract("non-finite phase coefficient".into()));
        }
        if self.subtract_one && self.cubic == 0.0 {
            return Err(Error::Contract(
                "subtract_one needs a cubic phase term (the factor would vanish identically)".into(),
            ));
        }
        if self.p >= 1.0 && !self.subtract_one && self.sense == Sense::AbsolutelyConvergent {
            return Err(Error::Contract(format!(
                "|β|^-{} is not integrable at 0 without subtraction; use the distributional sense",
                self.p
            )));
        }
        if self.t == 0.0 && self.p <= 1.0 && (self.cubic == 0.0 || self.subtract_one) {
            return Err(Error::Contract(
                "integral diverges at infinity: no linear phase to make |β|^-p converge".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaIntegral {
    pub value: Complex64,
    pub abs_error: f64,
    /// True when the error estimate exceeds the requested tolerance.
    pub degraded: bool,
}

pub fn integrate_beta(spec: &OscillatoryIntegrand, tol: f64) -> Result<BetaIntegral> {
    if !(1e-12..=1e-4).contains(&tol) {
        return Err(Error::Contract(format!("tolerance {tol:e} outside [1e-12, 1e-4]")));
    }
    spec.validate()?;
    let mut value = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for sigma in [1.0, -1.0] {
        let half = HalfLine {
            p: spec.p,
            wl: 2.0 * sigma * spec.t,
            wc: sigma * spec.cubic,
            subtract: spec.subtract_one,
        };
        let (v, e) = half.integrate(tol / 2.0);
        let rot = Complex64::from_polar(1.0, sigma * spec.sign_phase * PI / 4.0);
        value += rot * v;
        err += e;
    }
    Ok(BetaIntegral {
        value,
        abs_error: err,
        degraded: err > tol,
    })
}

/// e^{z} − 1 without cancellation for small |z|.
fn em1(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        let mut term = z;
        let mut sum = z;
        for k in 2..30 {
            term *= z / k as f64;
            sum += term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        z.exp() - 1.0
    }
}

/// e^{z} − 1 − z without cancellation for small |z|.
fn em2(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        let mut term = z * z / 2.0;
        let mut sum = term;
        for k in 3..30 {
            term *= z / k as f64;
            sum += term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        z.exp() - 1.0 - z
    }
}

fn cis(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

/// ∫₀^∞ u^{-p} e^{i wl u} (e^{i wc u³} − [subtract]) du.
struct HalfLine {
    p: f64,
    wl: f64,
    wc: f64,
    subtract: bool,
}

impl HalfLine {
    fn phase(&self, u: f64) -> f64 {
        self.wl * u + self.wc * u * u * u
    }

    fn integrand(&self, u: f64) -> Complex64 {
        let amp = u.powf(-self.p);
        if self.subtract {
            cis(self.wl * u) * em1(Complex64::new(0.0, self.wc * u * u * u)) * amp
        } else {
            cis(self.phase(u)) * amp
        }
    }

    fn integrate(&self, tol: f64) -> (Complex64, f64) {
        let u0 = 1.0f64
            .min(0.25 / self.wl.abs().max(1e-300))
            .min((0.25 / self.wc.abs().max(1e-300)).cbrt());
        let (cell, e_cell) = self.cell(u0, tol / 4.0);

        let has_stationary = self.wc != 0.0 && self.wl * self.wc < 0.0;
        let mut upper = (2.0 * u0).max(1.0);
        if has_stationary {
            let ustar = (-self.wl / (3.0 * self.wc)).sqrt();
            upper = upper.max(2.0 * ustar);
        }
        let (mid, e_mid) = self.middle(u0, upper, tol / 4.0);

        let (tail, e_tail) = if self.wc == 0.0 {
            linear_tail(self.p, self.wl, upper, tol / 4.0)
        } else {
            let (ta, ea) = cubic_tail(self.p, self.wl, self.wc, upper, tol / 8.0);
            if self.subtract {
                let (tb, eb) = linear_tail(self.p, self.wl, upper, tol / 8.0);
                (ta - tb, ea + eb)
            } else {
                (ta, ea)
            }
        };
        (cell + mid + tail, e_cell + e_mid + e_tail)
    }

    /// Integral over [0, u0] in the variable v = √u.
    fn cell(&self, u0: f64, tol: f64) -> (Complex64, f64) {
        let p = self.p;
        let vmax = u0.sqrt();
        if self.subtract || p < 1.0 {
            let r = adaptive(
                |v: f64| {
                    let u = v * v;
                    self.integrand(u) * (2.0 * v)
                },
                0.0,
                vmax,
                tol,
                0.0,
                200,
            );
            return (r.value, r.abs_error);
        }
        // Hadamard finite part: subtract the Taylor polynomial of e^{iψ} at 0
        // of degree m and add the finite parts of its monomials analytically.
        let second = p >= 2.0;
        let r = adaptive(
            |v: f64| {
                let u = v * v;
                let z = Complex64::new(0.0, self.phase(u));
                let rem = if second {
                    em2(z) + Complex64::new(0.0, self.wc * u * u * u)
                } else {
                    em1(z)
                };
                rem * (2.0 * v.powf(1.0 - 2.0 * p))
            },
            0.0,
            vmax,
            tol,
            0.0,
            200,
        );
        let fp = |q: f64| -> f64 {
            // FP ∫₀^{u0} u^{q} du
            if q == -1.0 {
                u0.ln()
            } else {
                u0.powf(q + 1.0) / (q + 1.0)
            }
        };
        let mut analytic = Complex64::new(fp(-p), 0.0);
        if second {
            analytic += Complex64::new(0.0, self.wl) * fp(1.0 - p);
        }
        (r.value + analytic, r.abs_error)
    }

    fn middle(&self, lo: f64, hi: f64, tol: f64) -> (Complex64, f64) {
        let mut u = lo;
        let mut sum = Complex64::new(0.0, 0.0);
        let mut err = 0.0;
        let span = hi - lo;
        while u < hi {
            let dpsi = (self.wl + 3.0 * self.wc * u * u).abs().max(self.wl.abs());
            let d2psi = (6.0 * self.wc * u).abs();
            let mut w = 0.5 * u;
            if dpsi > 0.0 {
                w = w.min(PI / dpsi);
            }
            if d2psi > 0.0 {
                w = w.min((PI / d2psi).sqrt());
            }
            let b = (u + w).min(hi);
            let share = tol * (b - u) / span;
            let (v, e) = gk15(&mut |x: f64| self.integrand(x), u, b);
            if e <= share {
                sum += v;
                err += e;
            } else {
                let r = adaptive(|x: f64| self.integrand(x), u, b, share, 0.0, 64);
                sum += r.value;
                err += r.abs_error;
            }
            u = b;
        }
        (sum, err)
    }
}

/// ∫_U^∞ u^{-p} e^{i wl u} du.
fn linear_tail(p: f64, wl: f64, upper: f64, tol: f64) -> (Complex64, f64) {
    if wl == 0.0 {
        // Only reached for p > 1 (validated by the caller).
        return (Complex64::new(upper.powf(1.0 - p) / (p - 1.0), 0.0), 0.0);
    }
    let half = PI / wl.abs();
    panel_series(|u: f64| cis(wl * u) * u.powf(-p), |k| upper + k as f64 * half, tol)
}

/// ∫_U^∞ u^{-p} e^{i(wl u + wc u³)} du, phase monotone beyond U.
fn cubic_tail(p: f64, wl: f64, wc: f64, upper: f64, tol: f64) -> (Complex64, f64) {
    let psi = |u: f64| wl * u + wc * u * u * u;
    let dpsi = |u: f64| wl + 3.0 * wc * u * u;
    let dir = dpsi(upper).signum();
    let psi0 = psi(upper);
    let mut last = upper;
    let mut nodes = vec![upper];
    let node = move |k: usize, nodes: &mut Vec<f64>, last: &mut f64| -> f64 {
        while nodes.len() <= k {
            let target = psi0 + dir * PI * nodes.len() as f64;
            let mut u = *last + PI / dpsi(*last).abs();
            for _ in 0..60 {
                let du = (psi(u) - target) / dpsi(u);
                u -= du;
                if du.abs() < 1e-15 * u {
                    break;
                }
            }
            nodes.push(u);
            *last = u;
        }
        nodes[k]
    };
    panel_series(
        |u: f64| cis(psi(u)) * u.powf(-p),
        |k| node(k, &mut nodes, &mut last),
        tol,
    )
}

/// Sum of integrals over [x_k, x_{k+1}] for k = 0, 1, …, extrapolated with
/// Wynn's epsilon algorithm.
fn panel_series<F, N>(mut f: F, mut node: N, tol: f64) -> (Complex64, f64)
where
    F: FnMut(f64) -> Complex64,
    N: FnMut(usize) -> f64,
{
    let mut partial = Vec::new();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut quad_err = 0.0;
    let mut best = (Complex64::new(0.0, 0.0), f64::INFINITY);
    let mut k = 0;
    while k < 400 {
        let a = node(k);
        let b = node(k + 1);
        let (v, e) = gk15(&mut f, a, b);
        let (v, e) = if e > 1e-3 * tol {
            let r = adaptive(&mut f, a, b, 1e-3 * tol, 0.0, 32);
            (r.value, r.abs_error)
        } else {
            (v, e)
        };
        sum += v;
        quad_err += e;
        partial.push(sum);
        k += 1;
        if partial.len() >= 12 && partial.len() % 4 == 0 {
            let start = partial.len().saturating_sub(40);
            let (lim, err) = wynn_epsilon(&partial[start..]);
            if err < best.1 {
                best = (lim, err);
            }
            if best.1 + quad_err < tol {
                break;
            }
        }
    }
    (best.0, best.1 + quad_err)
}

/// A non-degenerate critical point of the phase with the local data needed for
/// the expansion. Higher derivatives default to zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CriticalPoint {
    pub location: f64,
    pub phase: f64,
    pub phase2: f64,
    pub amplitude: f64,
    pub phase3: f64,
    pub phase4: f64,
    pub amplitude1: f64,
    pub amplitude2: f64,
}

impl CriticalPoint {
    pub fn new(location: f64, phase: f64, phase2: f64, amplitude: f64) -> Self {
        CriticalPoint {
            location,
            phase,
            phase2,
            amplitude,
            ..Default::default()
        }
    }
}

/// One term c·λ^{power} of a stationary-phase expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionTerm {
    pub lambda_power: f64,
    pub coefficient: Complex64,
    pub location: f64,
}

/// Stationary-phase expansion of ∫ a(x) e^{iλφ(x)} dx through the given order
/// (0 or 1) at each critical point.
pub fn stationary_phase_expand(
    points: &[CriticalPoint],
    lambda: f64,
    order: usize,
) -> Result<Vec<ExpansionTerm>> {
    if order > 1 {
        return Err(Error::Contract(format!("expansion order {order} not supported (max 1)")));
    }
    if !(lambda > 0.0) {
        return Err(Error::Contract("large parameter must be positive".into()));
    }
    let mut terms = Vec::new();
    for cp in points {
        let s = cp.phase2;
        if s == 0.0 {
            return Err(Error::Degenerate(format!(
                "critical point at {} has vanishing second derivative",
                cp.location
            )));
        }
        let unit = cis(lambda * cp.phase + PI / 4.0 * s.signum());
        let pre = (2.0 * PI).sqrt() * s.abs().powf(-0.5) * unit;
        terms.push(ExpansionTerm {
            lambda_power: -0.5,
            coefficient: pre * cp.amplitude,
            location: cp.location,
        });
        if order >= 1 {
            let (a0, a1, a2) = (cp.amplitude, cp.amplitude1, cp.amplitude2);
            let (f3, f4) = (cp.phase3, cp.phase4);
            let bracket = a2 / (2.0 * s) - a0 * f4 / (8.0 * s * s) - a1 * f3 / (2.0 * s * s)
                + 5.0 * a0 * f3 * f3 / (24.0 * s * s * s);
            terms.push(ExpansionTerm {
                lambda_power: -1.5,
                coefficient: pre * Complex64::new(0.0, bracket),
                location: cp.location,
            });
        }
    }
    Ok(terms)
}

pub fn sum_expansion(terms: &[ExpansionTerm], lambda: f64) -> Complex64 {
    terms
        .iter()
        .map(|t| t.coefficient * lambda.powf(t.lambda_power))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(p: f64, t: f64, cubic: f64, c: f64, sub: bool, sense: Sense) -> OscillatoryIntegrand {
        OscillatoryIntegrand { p, t, cubic, sign_phase: c, subtract_one: sub, sense }
    }

    #[test]
    fn fresnel_type_closed_form() {
        // ∫|β|^{-1/2} e^{-iπ/4 sign β} e^{2iβt} dβ = 2 (π/(2t))^{1/2}
        for t in [4.0, 9.0, 16.0] {
            let s = spec(0.5, t, 0.0, -1.0, false, Sense::AbsolutelyConvergent);
            let r = integrate_beta(&s, 1e-11).unwrap();
            let want = 2.0 * (PI / (2.0 * t)).sqrt();
            assert!((r.value.re - want).abs() < 1e-9, "t={t}: {} vs {want}", r.value);
            assert!(r.value.im.abs() < 1e-10);
            assert!(!r.degraded);
        }
    }

    #[test]
    fn hadamard_finite_part_p1() {
        // FP ∫ |β|^{-1} e^{2iβt} dβ = −2(γ + ln(2|t|)) (scale 1).
        let t = 3.0;
        let s = spec(1.0, t, 0.0, 0.0, false, Sense::Distributional);
        let r = integrate_beta(&s, 1e-10).unwrap();
        let euler = 0.577_215_664_901_532_9;
        let want = -2.0 * (euler + (2.0 * t).ln());
        assert!((r.value.re - want).abs() < 1e-8, "{} vs {want}", r.value);
    }

    #[test]
    fn contract_violations() {
        let bad = spec(1.5, 1.0, -2.0 / 3.0, 0.0, false, Sense::AbsolutelyConvergent);
        assert!(matches!(integrate_beta(&bad, 1e-8), Err(Error::Contract(_))));
        let bad = spec(0.75, 1.0, 0.0, 0.0, false, Sense::AbsolutelyConvergent);
        assert!(integrate_beta(&bad, 1e-8).is_err());
        let ok = spec(0.5, 1.0, 0.0, 0.0, false, Sense::AbsolutelyConvergent);
        assert!(integrate_beta(&ok, 1e-3).is_err());
        assert!(integrate_beta(&ok, 1e-13).is_err());
    }

    #[test]
    fn conjugation_symmetry() {
        let s = OscillatoryIntegrand::correction_d1(2.5);
        let a = integrate_beta(&s, 1e-10).unwrap().value;
        let b = integrate_beta(&s.conjugated(), 1e-10).unwrap().value;
        assert!((a - b.conj()).norm() < 1e-9);
    }

    #[test]
    fn degenerate_point_rejected() {
        let cp = CriticalPoint::new(0.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            stationary_phase_expand(&[cp], 10.0, 0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn leading_term_instantiation() {
        let cp = CriticalPoint::new(0.0, 0.0, 2.0, 1.0);
        let terms = stationary_phase_expand(&[cp], 100.0, 0).unwrap();
        let v = sum_expansion(&terms, 100.0);
        let want = (2.0 * PI / 100.0).sqrt() * 2f64.powf(-0.5) * cis(PI / 4.0);
        assert!((v - want).norm() < 1e-15);
    }
}
