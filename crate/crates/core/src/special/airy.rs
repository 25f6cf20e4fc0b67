//! Airy functions Ai and Ai′ of a real argument.
//!
//! Three regimes:
//!
//! * z in [Z_MIN, Z_MAX]: local Taylor series around the nearest anchor of a
//!   table. The Taylor coefficients follow from the Airy equation y″ = z y, so
//!   only (Ai, Ai′) at each anchor is stored.
//! * z > Z_MAX: exponentially decaying asymptotic expansion.
//! * z < Z_MIN: modulus-phase asymptotic expansion.
//!
//! The anchor table is built once by Taylor-stepping the ODE: forward from the
//! Maclaurin data at 0 towards negative z (both solutions oscillate, so the
//! stepping is neutrally stable), and backward from the asymptotic values at
//! Z_MAX towards 0 (Ai grows in that direction, so the Bi contamination decays).

use std::f64::consts::PI;
use std::sync::OnceLock;

pub(crate) const AI0: f64 = 0.355_028_053_887_817_2;
pub(crate) const AIP0: f64 = -0.258_819_403_792_806_8;

const Z_MIN: f64 = -30.0;
const Z_MAX: f64 = 12.0;
const SPACING: f64 = 0.5;
const STEP_TERMS: usize = 48;
const EVAL_TERMS: usize = 34;

/// Anchor values (Ai, Ai′) on a uniform grid.
#[derive(Debug, Clone)]
pub struct AiryTable {
    anchors: Vec<(f64, f64)>,
}

impl AiryTable {
    pub fn build() -> Self {
        let n = ((Z_MAX - Z_MIN) / SPACING).round() as usize + 1;
        let i0 = ((0.0 - Z_MIN) / SPACING).round() as usize;
        let mut anchors = vec![(0.0, 0.0); n];

        anchors[i0] = (AI0, AIP0);
        let mut cur = (AI0, AIP0);
        for i in (0..i0).rev() {
            let z0 = Z_MIN + (i + 1) as f64 * SPACING;
            cur = taylor(z0, cur.0, cur.1, -SPACING, STEP_TERMS);
            anchors[i] = cur;
        }

        let mut cur = asymptotic_positive(Z_MAX);
        anchors[n - 1] = cur;
        for i in (i0 + 1..n - 1).rev() {
            let z0 = Z_MIN + (i + 1) as f64 * SPACING;
            cur = taylor(z0, cur.0, cur.1, -SPACING, STEP_TERMS);
            anchors[i] = cur;
        }
        AiryTable { anchors }
    }

    /// A copy whose stored Ai′ values are scaled by `1 + rel`; used to check
    /// that the self-test actually notices a damaged table.
    pub fn perturbed(&self, rel: f64) -> Self {
        let anchors = self
            .anchors
            .iter()
            .map(|&(a, b)| (a, b * (1.0 + rel)))
            .collect();
        AiryTable { anchors }
    }

    /// (Ai(z), Ai′(z)).
    pub fn eval(&self, z: f64) -> (f64, f64) {
        if z > Z_MAX {
            return asymptotic_positive(z);
        }
        if z < Z_MIN {
            return asymptotic_negative(-z);
        }
        let i = ((z - Z_MIN) / SPACING).round() as usize;
        let i = i.min(self.anchors.len() - 1);
        let z0 = Z_MIN + i as f64 * SPACING;
        let (a, b) = self.anchors[i];
        taylor(z0, a, b, z - z0, EVAL_TERMS)
    }
}

pub fn global_table() -> &'static AiryTable {
    static TABLE: OnceLock<AiryTable> = OnceLock::new();
    TABLE.get_or_init(AiryTable::build)
}

/// (Ai(z), Ai′(z)) using the shared table.
pub fn airy(z: f64) -> (f64, f64) {
    global_table().eval(z)
}

/// Taylor step of y″ = z y from z0 by dz, returning (y, y′) at z0 + dz.
fn taylor(z0: f64, y0: f64, yp0: f64, dz: f64, terms: usize) -> (f64, f64) {
    // c_n = a_n dz^n, with (n+2)(n+1) a_{n+2} = z0 a_n + a_{n-1}.
    let mut c = [0.0f64; 64];
    c[0] = y0;
    c[1] = yp0 * dz;
    c[2] = z0 * y0 * dz * dz / 2.0;
    for n in 1..terms - 2 {
        let nf = n as f64;
        c[n + 2] = (z0 * c[n] * dz * dz + c[n - 1] * dz * dz * dz) / ((nf + 2.0) * (nf + 1.0));
    }
    let mut y = 0.0;
    let mut yp = 0.0;
    for n in (0..terms).rev() {
        y += c[n];
        if n > 0 {
            yp += n as f64 * c[n];
        }
    }
    let yp = if dz == 0.0 { yp0 } else { yp / dz };
    (y, yp)
}

/// Coefficients u_k, v_k of the Airy asymptotic expansions.
fn uv_coeffs(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![1.0f64; count];
    let mut v = vec![1.0f64; count];
    for k in 1..count {
        let kf = k as f64;
        u[k] = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
            / ((2.0 * kf - 1.0) * 216.0 * kf);
        v[k] = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u[k];
    }
    (u, v)
}

/// Sum of an asymptotic series c_k (±1/ζ)^k truncated at the smallest term.
fn asym_sum(c: &[f64], zeta: f64, alternate: bool, parity: Option<usize>) -> f64 {
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    for (k, &ck) in c.iter().enumerate() {
        if let Some(p) = parity {
            if k % 2 != p {
                continue;
            }
        }
        let sign = if alternate {
            let j = match parity {
                Some(_) => k / 2,
                None => k,
            };
            if j % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        } else {
            1.0
        };
        let term = sign * ck / zeta.powi(k as i32);
        if term.abs() > last {
            break;
        }
        last = term.abs();
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn asymptotic_positive(z: f64) -> (f64, f64) {
    let zeta = 2.0 / 3.0 * z.powf(1.5);
    let (u, v) = uv_coeffs(40);
    let e = (-zeta).exp() / (2.0 * PI.sqrt());
    let su = asym_sum(&u, zeta, true, None);
    let sv = asym_sum(&v, zeta, true, None);
    (e * z.powf(-0.25) * su, -e * z.powf(0.25) * sv)
}

/// (Ai(−x), Ai′(−x)) for large positive x.
fn asymptotic_negative(x: f64) -> (f64, f64) {
    let zeta = 2.0 / 3.0 * x.powf(1.5);
    let (u, v) = uv_coeffs(40);
    let theta = zeta - PI / 4.0;
    let (s, c) = theta.sin_cos();
    let u_even = asym_sum(&u, zeta, true, Some(0));
    let u_odd = asym_sum(&u, zeta, true, Some(1));
    let v_even = asym_sum(&v, zeta, true, Some(0));
    let v_odd = asym_sum(&v, zeta, true, Some(1));
    let sp = PI.sqrt();
    let ai = x.powf(-0.25) / sp * (c * u_even + s * u_odd);
    let aip = x.powf(0.25) / sp * (s * v_even - c * v_odd);
    (ai, aip)
}
