//! Pointwise predictions for h²Σg^{jk}D_jD_k + V: Weyl term, scaling
//! functions, travel time to the turning point, the corrected prediction
//! with the short-loop term, and regime-dependent remainder bounds.

use crate::airy_model::{calibrated_fit, calibrated_form, q_numeric};
use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};
use crate::quad::adaptive;
use crate::special::unit_ball_volume;
use std::f64::consts::PI;

/// ε in γ = ε|V| + h^{2/3}/2.
pub const SCALE_EPSILON: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialModel {
    pub dim: usize,
    pub potential: Expr,
    /// Closed-form partial derivatives of V, when known.
    pub gradient: Option<Vec<Expr>>,
    /// Inverse metric g^{jk}, row-major d×d.
    pub metric: Vec<Expr>,
    /// Box [lo, hi] per coordinate.
    pub domain: Vec<(f64, f64)>,
    /// Smallest metric eigenvalue seen on the validation grid.
    pub ellipticity: f64,
}

impl PotentialModel {
    pub fn new(dim: usize, potential: &str, domain: Vec<(f64, f64)>) -> Result<Self> {
        let metric = identity_metric(dim)?;
        Self::with_metric(dim, potential, metric, domain)
    }

    pub fn with_metric(
        dim: usize,
        potential: &str,
        metric: Vec<Expr>,
        domain: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Domain(format!("dimension {dim} not in {{1, 2}}")));
        }
        if domain.len() != dim || domain.iter().any(|&(a, b)| !(a < b)) {
            return Err(Error::Contract("domain must give lo < hi for each coordinate".into()));
        }
        if metric.len() != dim * dim {
            return Err(Error::Contract(format!("metric needs {} entries", dim * dim)));
        }
        let potential = parse_expr(potential)?;
        if potential.arity() > dim {
            return Err(Error::Expr(format!(
                "potential uses x{} but the model has dimension {dim}",
                potential.arity()
            )));
        }
        let mut model = PotentialModel {
            dim,
            potential,
            gradient: None,
            metric,
            domain,
            ellipticity: 0.0,
        };
        model.ellipticity = model.validate_on_grid()?;
        Ok(model)
    }

    /// The linear model V = −c·x₁ on a large box.
    pub fn linear(dim: usize, c: f64) -> Result<Self> {
        let half = 60.0;
        let src = format!("-({c:?})*x1");
        let mut m = Self::new(dim, &src, vec![(-half, half); dim])?;
        let mut grad = vec![Expr::Num(-c)];
        if dim == 2 {
            grad.push(Expr::Num(0.0));
        }
        m.gradient = Some(grad);
        Ok(m)
    }

    pub fn airy(dim: usize) -> Result<Self> {
        Self::linear(dim, 1.0)
    }

    pub fn with_gradient(mut self, grad: &[&str]) -> Result<Self> {
        if grad.len() != self.dim {
            return Err(Error::Contract("gradient needs one entry per coordinate".into()));
        }
        self.gradient = Some(grad.iter().map(|s| parse_expr(s)).collect::<Result<_>>()?);
        Ok(self)
    }

    fn validate_on_grid(&self) -> Result<f64> {
        let n: usize = 9;
        let mut min_eig = f64::INFINITY;
        let mut point = vec![0.0; self.dim];
        let total = n.pow(self.dim as u32);
        for idx in 0..total {
            let mut k = idx;
            for (j, p) in point.iter_mut().enumerate() {
                let (a, b) = self.domain[j];
                *p = a + (b - a) * (k % n) as f64 / (n - 1) as f64;
                k /= n;
            }
            let v = self.v(&point)?;
            if !v.is_finite() {
                return Err(Error::Domain(format!("potential unbounded at {point:?}")));
            }
            let g = self.metric_at(&point)?;
            let eig = if self.dim == 1 {
                g[0][0]
            } else {
                let tr = g[0][0] + g[1][1];
                let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
                if (g[0][1] - g[1][0]).abs() > 1e-12 {
                    return Err(Error::Domain("metric not symmetric".into()));
                }
                0.5 * tr - (0.25 * tr * tr - det).max(0.0).sqrt()
            };
            min_eig = min_eig.min(eig);
        }
        if min_eig < 1e-8 {
            return Err(Error::Domain(format!(
                "metric not positive definite on the domain (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(min_eig)
    }

    pub fn v(&self, x: &[f64]) -> Result<f64> {
        self.potential.eval(x)
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.gradient {
            Some(g) => g.iter().map(|e| e.eval(x)).collect(),
            None => self.potential.gradient(x),
        }
    }

    /// g^{jk}(x) as a 2×2 array (only the leading d×d block is meaningful).
    pub fn metric_at(&self, x: &[f64]) -> Result<[[f64; 2]; 2]> {
        let mut g = [[0.0; 2]; 2];
        for j in 0..self.dim {
            for k in 0..self.dim {
                g[j][k] = self.metric[j * self.dim + k].eval(x)?;
            }
        }
        Ok(g)
    }

    /// √g = det(g_{jk})^{1/2} = det(g^{jk})^{-1/2}.
    pub fn sqrt_g(&self, x: &[f64]) -> Result<f64> {
        let g = self.metric_at(x)?;
        let det = if self.dim == 1 {
            g[0][0]
        } else {
            g[0][0] * g[1][1] - g[0][1] * g[1][0]
        };
        Ok(det.powf(-0.5))
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Contract(format!(
                "point has {} coordinates, model has {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

pub fn identity_metric(dim: usize) -> Result<Vec<Expr>> {
    Ok((0..dim * dim)
        .map(|i| Expr::Num(if i % (dim + 1) == 0 { 1.0 } else { 0.0 }))
        .collect())
}

/// Constant inverse metric from row-major entries.
pub fn constant_metric(entries: &[f64]) -> Vec<Expr> {
    entries.iter().map(|&v| Expr::Num(v)).collect()
}

/// (2π)^{-d} ϖ_d (τ − V)_+^{d/2} √g h^{-d}.
pub fn weyl_term(model: &PotentialModel, x: &[f64], tau: f64, h: f64) -> Result<f64> {
    model.check_point(x)?;
    let d = model.dim as f64;
    let gap = (tau - model.v(x)?).max(0.0);
    Ok((2.0 * PI).powf(-d)
        * unit_ball_volume(model.dim)?
        * gap.powf(d / 2.0)
        * model.sqrt_g(x)?
        * h.powf(-d))
}

/// |∇V|_g = (Σ g^{jk}∂_jV∂_kV)^{1/2}.
pub fn grad_norm_g(model: &PotentialModel, x: &[f64]) -> Result<f64> {
    model.check_point(x)?;
    let dv = model.grad(x)?;
    let g = model.metric_at(x)?;
    let mut s = 0.0;
    for j in 0..model.dim {
        for k in 0..model.dim {
            s += g[j][k] * dv[j] * dv[k];
        }
    }
    Ok(s.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalePoint {
    pub gamma: f64,
    pub rho: f64,
    pub gamma_bar: f64,
    pub rho_bar: f64,
}

pub fn scale_functions(model: &PotentialModel, x: &[f64], h: f64) -> Result<ScalePoint> {
    model.check_point(x)?;
    Ok(scale_from_v(model.v(x)?.abs(), h))
}

pub fn scale_from_v(v_abs: f64, h: f64) -> ScalePoint {
    let gamma_bar = 0.5 * h.powf(2.0 / 3.0);
    let gamma = SCALE_EPSILON * v_abs + gamma_bar;
    ScalePoint {
        gamma,
        rho: gamma.sqrt(),
        gamma_bar,
        rho_bar: h.powf(1.0 / 3.0),
    }
}

/// Root of V(·, x₂) − τ along the x₁ line nearest to x₁.
pub fn turning_point(model: &PotentialModel, x: &[f64], tau: f64) -> Result<f64> {
    model.check_point(x)?;
    let (lo, hi) = model.domain[0];
    let mut p = x.to_vec();
    let mut f = |y: f64| -> Result<f64> {
        p[0] = y;
        Ok(model.v(&p)? - tau)
    };
    let n = 4000;
    let mut best: Option<(f64, f64)> = None;
    let mut prev_y = lo;
    let mut prev_f = f(lo)?;
    if prev_f == 0.0 {
        best = Some((lo, lo));
    }
    for k in 1..=n {
        let y = lo + (hi - lo) * k as f64 / n as f64;
        let fy = f(y)?;
        if fy == 0.0 || prev_f * fy < 0.0 {
            let bracket = (prev_y, y);
            let mid = 0.5 * (bracket.0 + bracket.1);
            let better = match best {
                None => true,
                Some(b) => (mid - x[0]).abs() < (0.5 * (b.0 + b.1) - x[0]).abs(),
            };
            if better {
                best = Some(bracket);
            }
        }
        prev_y = y;
        prev_f = fy;
    }
    let (mut a, mut b) = best.ok_or_else(|| {
        Error::NoTurningPoint(format!("V - tau keeps one sign on [{lo}, {hi}] along x1"))
    })?;
    let mut fa = f(a)?;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm == 0.0 || (b - a) < 1e-15 * (1.0 + m.abs()) {
            a = m;
            b = m;
            break;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Ok(0.5 * (a + b))
}

/// Travel-time coordinate W(x): ((3/2)|∫_{x*}^{x₁}|τ−V|^{1/2}(g^{11})^{-1/2}dy|)^{2/3},
/// positive where τ > V (classically allowed) and negative beyond the turning
/// point x*. For d = 2 the integral runs along the x₁ line at fixed x₂.
pub fn travel_time(model: &PotentialModel, x: &[f64], tau: f64) -> Result<f64> {
    let xs = turning_point(model, x, tau)?;
    let mut p = x.to_vec();
    p[0] = xs;
    let slope = model.grad(&p)?[0];
    if slope.abs() < 1e-6 {
        return Err(Error::Degenerate(format!(
            "|dV/dx1| = {:e} at the turning point x1 = {xs}",
            slope.abs()
        )));
    }
    let gap = tau - model.v(x)?;
    let dx = x[0] - xs;
    if dx == 0.0 {
        return Ok(0.0);
    }
    // y = x* + dx·u² removes the square-root behaviour at the turning point.
    let mut q = x.to_vec();
    let mut err = None;
    let r = adaptive(
        |u: f64| {
            q[0] = xs + dx * u * u;
            let val = model
                .v(&q)
                .and_then(|v| Ok((v, model.metric_at(&q)?[0][0])));
            match val {
                Ok((v, g11)) => (tau - v).abs().sqrt() / g11.sqrt() * 2.0 * u * dx.abs(),
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            }
        },
        0.0,
        1.0,
        1e-13,
        1e-12,
        400,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let w = (1.5 * r.value).powf(2.0 / 3.0);
    Ok(if gap >= 0.0 { w } else { -w })
}

/// ϱ with W = (3/2)^{2/3} ϱ^{4/3}, i.e. ϱ = (∫|τ−V|^{1/2})^{1/2}.
pub fn loop_distance(model: &PotentialModel, x: &[f64], tau: f64) -> Result<f64> {
    let w = travel_time(model, x, tau)?.abs();
    Ok((w / 1.5f64.powf(2.0 / 3.0)).powf(0.75))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Bound C|V|^{-1/2}.
    Branch1,
    /// Bound C h^{-1/3}|∇V|^{-1/3}.
    Branch2,
    /// Bound C h^{-1/2}.
    Branch3,
    /// Two-dimensional bound C h^{-1}; `skip_correction` when
    /// h^{d-1}|∇V|^{d+1} ≤ |V|^{3d-1}.
    TwoDim { skip_correction: bool },
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Branch1 => "branch1",
            Regime::Branch2 => "branch2",
            Regime::Branch3 => "branch3",
            Regime::TwoDim { skip_correction: true } => "d2-skip-correction",
            Regime::TwoDim { skip_correction: false } => "d2",
        }
    }
}

/// Which of the three one-dimensional conditions hold (in listed order).
/// The first needs |V| > 0, where its bound |V|^{-1/2} is finite.
pub fn d1_conditions(v: f64, g: f64, h: f64) -> [bool; 3] {
    let hg = (h * g).powf(2.0 / 3.0);
    [
        v > 0.0 && ((hg <= v && v <= g * g) || v >= (g * g).max(h)),
        v <= hg && g >= h.sqrt(),
        v <= h && g <= h.sqrt(),
    ]
}

/// Regime and bound (with unit constant) for |V| = v, |∇V| = g.
pub fn classify_values(d: usize, v: f64, g: f64, h: f64) -> (Regime, f64) {
    if d == 2 {
        let skip = h * g.powi(3) <= v.powi(5);
        return (Regime::TwoDim { skip_correction: skip }, 1.0 / h);
    }
    let c = d1_conditions(v, g, h);
    if c[0] {
        (Regime::Branch1, v.powf(-0.5))
    } else if c[1] {
        (Regime::Branch2, h.powf(-1.0 / 3.0) * g.powf(-1.0 / 3.0))
    } else {
        // The three conditions cover every (v, g, h); see the partition test.
        debug_assert!(c[2]);
        (Regime::Branch3, h.powf(-0.5))
    }
}

pub fn classify_regime(model: &PotentialModel, x: &[f64], h: f64) -> Result<(Regime, f64)> {
    model.check_point(x)?;
    let v = model.v(x)?.abs();
    let g = grad_norm_g(model, x)?;
    Ok(classify_values(model.dim, v, g, h))
}

/// Magnitude h^{(1-d)/2}γ^{-(d+3)/4} of the correction term and whether it
/// falls below the remainder h^{1-d}γ^{(d-2)/2}.
pub fn correction_magnitude(d: usize, gamma: f64, h: f64) -> (f64, bool) {
    let df = d as f64;
    let mag = h.powf((1.0 - df) / 2.0) * gamma.powf(-(df + 3.0) / 4.0);
    let rem = h.powf(1.0 - df) * gamma.powf((df - 2.0) / 2.0);
    (mag, mag <= rem * (1.0 + 1e-12))
}

/// γ̄₁ = h^{(2d−2)/(3d−1)}.
pub fn correction_threshold(d: usize, h: f64) -> f64 {
    let df = d as f64;
    h.powf((2.0 * df - 2.0) / (3.0 * df - 1.0))
}

/// C′h^{-d}(1 + |V_* − τ|/h)^{-l}.
pub fn tail_bound_value(d: usize, v_star: f64, tau: f64, h: f64, l: f64, c_prime: f64) -> Result<f64> {
    if tau > v_star {
        return Err(Error::Domain(format!(
            "tau = {tau} above the potential floor {v_star}"
        )));
    }
    Ok(c_prime * h.powf(-(d as f64)) * (1.0 + (v_star - tau) / h).powf(-l))
}

/// Forbidden-region envelope at x, with V_* taken as V(x) (the local floor).
pub fn forbidden_tail_bound(model: &PotentialModel, x: &[f64], tau: f64, h: f64, l: f64) -> Result<f64> {
    model.check_point(x)?;
    tail_bound_value(model.dim, model.v(x)?, tau, h, l, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedKernel {
    pub x: Vec<f64>,
    pub h: f64,
    pub tau: f64,
    pub weyl: f64,
    pub correction: f64,
    pub total: f64,
    /// Remainder bound with unit constant.
    pub bound: f64,
    pub regime: Regime,
    /// The argument W h^{-2/3} passed to Q.
    pub q_argument: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predictor {
    WeylOnly,
    WeylPlusCorrection,
}

/// Largest argument for which Q is evaluated by quadrature; beyond it the
/// calibrated leading oscillation is used.
pub const Q_NUMERIC_MAX: f64 = 1e4;
/// Below this argument |Q| < 3e-9 and the correction is dropped.
pub const Q_NUMERIC_MIN: f64 = -5.0;
const Q_TOL: f64 = 1e-10;

fn q_value(d: usize, t: f64) -> Result<f64> {
    if t < Q_NUMERIC_MIN {
        Ok(0.0)
    } else if t > Q_NUMERIC_MAX {
        Ok(calibrated_form(d, t, &calibrated_fit(d)?))
    } else {
        q_numeric(d, t, Q_TOL)
    }
}

pub fn predict_pointwise(
    model: &PotentialModel,
    x: &[f64],
    tau: f64,
    h: f64,
    predictor: Predictor,
) -> Result<PredictedKernel> {
    model.check_point(x)?;
    let d = model.dim;
    let weyl = weyl_term(model, x, tau, h)?;
    let w = travel_time(model, x, tau)?;
    let t = w * h.powf(-2.0 / 3.0);
    let correction = match predictor {
        Predictor::WeylOnly => 0.0,
        Predictor::WeylPlusCorrection => {
            let df = d as f64;
            h.powf(-2.0 * df / 3.0)
                * grad_norm_g(model, x)?.powf(df / 3.0)
                * q_value(d, t)?
                * model.sqrt_g(x)?
        }
    };
    let gamma_eff = w.abs().max(h.powf(2.0 / 3.0));
    let bound = h.powf(1.0 - d as f64) * gamma_eff.powf((d as f64 - 2.0) / 2.0);
    let (regime, _) = classify_regime(model, x, h)?;
    Ok(PredictedKernel {
        x: x.to_vec(),
        h,
        tau,
        weyl,
        correction,
        total: weyl + correction,
        bound,
        regime,
        q_argument: t,
    })
}
