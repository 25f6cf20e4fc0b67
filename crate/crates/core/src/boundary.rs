//! Boundary-layer profiles Υ(r) for the flat half-space problem
//! −h²Δ − τ on {x₁ > 0} with Dirichlet, Neumann or Robin conditions, the
//! exact images-method kernel and the near-boundary prediction.
//!
//! For Dirichlet/Neumann (ς = ∓1) the reflected wave gives
//! Υ_ς(r) = ς(2π)^{-d}∫_{|ξ|≤1} e^{2irξ₁} dξ, so that the diagonal kernel at
//! τ = 1 is h^{-d}((2π)^{-d}ϖ_d + Υ_ς(x₁/h)).

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::quad::{adaptive, composite_gl, gauss_legendre};
use crate::special::{j1, unit_ball_volume, unit_sphere_area};
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    /// h∂_ν u + βu = 0 with ν the inward normal; β = 0 is Neumann and
    /// |β| → ∞ approaches Dirichlet.
    Robin(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryModel {
    pub dim: usize,
    pub condition: BoundaryCondition,
    pub tau: f64,
    /// Radius of the ξ′ disc kept in the Robin profile, in units of √τ.
    pub rho_cut: f64,
}

impl BoundaryModel {
    pub fn new(dim: usize, condition: BoundaryCondition) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("boundary model needs d >= 1".into()));
        }
        if let BoundaryCondition::Robin(b) = condition {
            if !b.is_finite() {
                return Err(Error::Domain("Robin coefficient must be finite and real".into()));
            }
        }
        Ok(BoundaryModel {
            dim,
            condition,
            tau: 1.0,
            rho_cut: 1.0,
        })
    }

    pub fn with_cutoff(mut self, rho_cut: f64) -> Result<Self> {
        if !(rho_cut > 0.0 && rho_cut <= 1.0) {
            return Err(Error::Domain(format!("cutoff radius {rho_cut} outside (0, 1]")));
        }
        self.rho_cut = rho_cut;
        Ok(self)
    }

    /// Reflection sign ς.
    pub fn varsigma(&self) -> Result<f64> {
        match self.condition {
            BoundaryCondition::Dirichlet => Ok(-1.0),
            BoundaryCondition::Neumann => Ok(1.0),
            BoundaryCondition::Robin(_) => Err(Error::Contract(
                "Robin conditions have no single reflection sign; use upsilon_robin".into(),
            )),
        }
    }
}

/// Υ_ς(r) for Dirichlet/Neumann.
pub fn upsilon_flat(bm: &BoundaryModel, r: f64) -> Result<f64> {
    let sigma = bm.varsigma()?;
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("r = {r} must be nonnegative")));
    }
    Ok(sigma * upsilon_unsigned(bm.dim, r))
}

fn upsilon_unsigned(d: usize, r: f64) -> f64 {
    match d {
        1 => {
            if r < 1e-8 {
                free_weight(1) * (1.0 - 2.0 * r * r / 3.0)
            } else {
                (2.0 * r).sin() / (2.0 * PI * r)
            }
        }
        2 => {
            if r < 1e-8 {
                free_weight(2) * (1.0 - r * r / 2.0)
            } else {
                j1(2.0 * r) / (4.0 * PI * r)
            }
        }
        _ => upsilon_polar_quadrature(d, r),
    }
}

/// (2π)^{-d}ϖ_d, the value of the unsigned profile at r = 0.
fn free_weight(d: usize) -> f64 {
    (2.0 * PI).powi(-(d as i32)) * unit_ball_volume(d).unwrap_or(f64::NAN)
}

/// (2π)^{-d}|S^{d-2}|∫₀¹ z^{d-1}∫₀^π cos(2zr cos φ) sin^{d-2}φ dφ dz.
pub fn upsilon_polar_quadrature(d: usize, r: f64) -> f64 {
    let rule = gauss_legendre(12);
    let outer_panels = 4 + (2.0 * r / PI).ceil() as usize;
    let inner = |z: f64| -> f64 {
        let panels = 4 + (2.0 * z * r / PI).ceil() as usize;
        composite_gl(
            |phi: f64| (2.0 * z * r * phi.cos()).cos() * phi.sin().powi(d as i32 - 2),
            0.0,
            PI,
            panels,
            &rule,
        ) * z.powi(d as i32 - 1)
    };
    let val = composite_gl(inner, 0.0, 1.0, outer_panels, &rule);
    (2.0 * PI).powi(-(d as i32)) * unit_sphere_area(d - 2) * val
}

fn gamma_half_integer(x: f64) -> f64 {
    // x a positive multiple of 1/2
    let mut g = if (x.fract() - 0.5).abs() < 1e-12 { PI.sqrt() } else { 1.0 };
    let mut y = if (x.fract() - 0.5).abs() < 1e-12 { 0.5 } else { 1.0 };
    while y < x - 1e-12 {
        g *= y;
        y += 1.0;
    }
    g
}

/// Leading large-r term of Υ: amplitude·r^{-(d+1)/2}·cos(2r − (d+1)π/4).
///
/// The amplitude comes from the endpoint contributions ξ₁ = ±1 of
/// ∫(1−ξ₁²)^{(d−1)/2}cos(2rξ₁)dξ₁.
pub fn upsilon_asymptotic(bm: &BoundaryModel, r: f64) -> Result<f64> {
    let d = bm.dim;
    if d < 2 {
        return Err(Error::Domain(
            "leading-term asymptotics apply for d >= 2; d = 1 is elementary".into(),
        ));
    }
    if r < 5.0 {
        return Err(Error::Domain(format!("asymptotic form needs r >= 5, got {r}")));
    }
    let sigma = bm.varsigma()?;
    let (amp, phase) = upsilon_asymptotic_constants(d);
    let e = (d as f64 + 1.0) / 2.0;
    Ok(sigma * amp * r.powf(-e) * (2.0 * r - phase).cos())
}

/// (amplitude, phase) of the leading term for the unsigned profile.
pub fn upsilon_asymptotic_constants(d: usize) -> (f64, f64) {
    let e = (d as f64 + 1.0) / 2.0;
    let amp = (2.0 * PI).powi(-(d as i32))
        * unit_ball_volume(d - 1).unwrap_or(f64::NAN)
        * 2f64.powf(e)
        * gamma_half_integer(e)
        * 2f64.powf(-e);
    (amp, e * PI / 2.0)
}

/// Envelope exponent of |Υ| for dimension d.
pub fn upsilon_decay_exponent(d: usize) -> f64 {
    if d == 1 {
        1.0
    } else {
        (d as f64 + 1.0) / 2.0
    }
}

/// Robin profile (2π)^{-d}∫_{|ξ′|≤ρ}∫_{λ₋}^{λ₊}(ξ₁+iβ)(ξ₁−iβ)^{-1}e^{2irξ₁}dξ₁dξ′ at
/// τ = 1, for d ∈ {1, 2}. Returns the real part; fails if the imaginary part
/// exceeds the tolerance.
pub fn upsilon_robin(bm: &BoundaryModel, r: f64, tol: f64) -> Result<f64> {
    let beta = match bm.condition {
        BoundaryCondition::Robin(b) => b,
        BoundaryCondition::Neumann => 0.0,
        BoundaryCondition::Dirichlet => {
            return Err(Error::Contract("Dirichlet has no finite Robin coefficient".into()))
        }
    };
    if bm.dim > 2 {
        return Err(Error::Domain("Robin profile implemented for d in {1, 2}".into()));
    }
    let d = bm.dim;
    let rho = bm.rho_cut;
    // Weight: measure of {ξ′ : |ξ′| ≤ ρ, |ξ′|² ≤ 1 − ξ₁²}.
    let weight = move |x: f64| -> f64 {
        if d == 1 {
            1.0
        } else {
            2.0 * (1.0 - x * x).max(0.0).sqrt().min(rho)
        }
    };
    let f = |x: f64| -> Complex64 {
        let num = Complex64::new(x, beta);
        let den = Complex64::new(x, -beta);
        num / den * Complex64::from_polar(1.0, 2.0 * r * x) * weight(x)
    };
    let mut breaks = vec![-1.0, 0.0, 1.0];
    if beta != 0.0 && beta.abs() < 0.5 {
        breaks = vec![-1.0, -4.0 * beta.abs(), 0.0, 4.0 * beta.abs(), 1.0];
    }
    if d == 2 && rho < 1.0 {
        let c = (1.0 - rho * rho).sqrt();
        breaks.extend([-c, c]);
        breaks.sort_by(f64::total_cmp);
    }
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for w in breaks.windows(2) {
        let res = adaptive(f, w[0], w[1], tol / 4.0, 0.0, 2000);
        total += res.value;
        err += res.abs_error;
    }
    let norm = (2.0 * PI).powi(-(d as i32));
    let (value, err) = (total * norm, err * norm);
    if err > tol {
        return Err(Error::Degraded {
            achieved: err,
            requested: tol,
            context: format!("Robin profile at r = {r}"),
        });
    }
    if value.im.abs() > tol.max(10.0 * err) {
        return Err(Error::Degraded {
            achieved: value.im.abs(),
            requested: tol,
            context: "Robin profile has a non-negligible imaginary part".into(),
        });
    }
    Ok(value.re)
}

/// (2πh)^{-d}ϖ_dτ^{d/2}.
pub fn free_kernel(d: usize, h: f64, tau: f64) -> Result<f64> {
    Ok((2.0 * PI * h).powi(-(d as i32)) * unit_ball_volume(d)? * tau.powf(d as f64 / 2.0))
}

/// Exact diagonal kernel of the Dirichlet/Neumann half-space problem.
pub fn halfspace_kernel_exact(bm: &BoundaryModel, h: f64, x1: f64, tau: f64) -> Result<f64> {
    if let BoundaryCondition::Robin(_) = bm.condition {
        return Err(Error::Contract(
            "no closed form for Robin; use the eigen-solver oracle".into(),
        ));
    }
    if !(tau > 0.0) || !(h > 0.0) || !(x1 >= 0.0) {
        return Err(Error::Domain("need tau > 0, h > 0, x1 >= 0".into()));
    }
    let d = bm.dim;
    let r = tau.sqrt() * x1 / h;
    // Same grouping on both terms, so that Dirichlet vanishes exactly at x₁ = 0.
    let scale = h.powi(-(d as i32)) * tau.powf(d as f64 / 2.0);
    Ok(scale * (free_weight(d) + upsilon_flat(bm, r)?))
}

/// h^{(d−1)/(d+1)}.
pub fn weyl_validity_threshold(d: usize, h: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("d must be >= 1".into()));
    }
    let df = d as f64;
    Ok(h.powf((df - 1.0) / (df + 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPrediction {
    pub x1: f64,
    pub h: f64,
    pub tau: f64,
    pub weyl: f64,
    /// Boundary-layer term h^{-d}τ^{d/2}Υ(τ^{1/2}x₁/h).
    pub correction: f64,
    pub total: f64,
    /// h^{-d}(τ^{1/2}x₁/h + 1)^{-(d+1)/2} + h^{1-d}, unit constants.
    pub bound: f64,
}

pub fn predict_near_boundary(
    bm: &BoundaryModel,
    h: f64,
    x1: f64,
    tau: f64,
    tol: f64,
) -> Result<BoundaryPrediction> {
    if !(tau > 0.0) || !(h > 0.0) || !(x1 >= 0.0) {
        return Err(Error::Domain("need tau > 0, h > 0, x1 >= 0".into()));
    }
    let d = bm.dim;
    let df = d as f64;
    let weyl = free_kernel(d, h, tau)?;
    let r = tau.sqrt() * x1 / h;
    let ups = match bm.condition {
        BoundaryCondition::Robin(beta) => {
            // h ↦ hτ^{-1/2} maps the condition to τ = 1 with β ↦ βτ^{-1/2}.
            let scaled = BoundaryModel {
                condition: BoundaryCondition::Robin(beta / tau.sqrt()),
                ..*bm
            };
            upsilon_robin(&scaled, r, tol)?
        }
        _ => upsilon_flat(bm, r)?,
    };
    let correction = h.powf(-df) * tau.powf(df / 2.0) * ups;
    let bound = h.powf(-df) * (r + 1.0).powf(-(df + 1.0) / 2.0) + h.powf(1.0 - df);
    Ok(BoundaryPrediction {
        x1,
        h,
        tau,
        weyl,
        correction,
        total: weyl + correction,
        bound,
    })
}

/// Complex boundary symbol given by real and imaginary parts over ξ′ (the
/// expression variables x1, x2 stand for the components of ξ′).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSymbol {
    pub re: Expr,
    pub im: Expr,
}

impl ComplexSymbol {
    pub fn constant(z: Complex64) -> Self {
        ComplexSymbol {
            re: Expr::Num(z.re),
            im: Expr::Num(z.im),
        }
    }

    pub fn eval(&self, xi: &[f64]) -> Result<Complex64> {
        Ok(Complex64::new(self.re.eval(xi)?, self.im.eval(xi)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipticityReport {
    /// min |b₀λ + b₁| over grid points outside the characteristic ball.
    pub min_value: f64,
    pub argmin: Vec<f64>,
    /// min of |b₀λ+b₁| + |∇_{ξ′}(b₀λ+b₁)|.
    pub min_microhyperbolic: f64,
    pub points_checked: usize,
    pub pass: bool,
    pub pass_microhyperbolic: bool,
}

pub const ELLIPTICITY_TOL: f64 = 1e-8;

fn symbol_combo(b0: &ComplexSymbol, b1: &ComplexSymbol, xi: &[f64], tau: f64) -> Result<Complex64> {
    let n2: f64 = xi.iter().map(|v| v * v).sum();
    let lambda = Complex64::new(0.0, (n2 - tau).max(0.0).sqrt());
    Ok(b0.eval(xi)? * lambda + b1.eval(xi)?)
}

pub fn ellipticity_check(
    b0: &ComplexSymbol,
    b1: &ComplexSymbol,
    tau: f64,
    grid: &[Vec<f64>],
) -> Result<EllipticityReport> {
    let mut min_value = f64::INFINITY;
    let mut argmin = Vec::new();
    let mut min_micro = f64::INFINITY;
    let mut checked = 0;
    for xi in grid {
        let n2: f64 = xi.iter().map(|v| v * v).sum();
        if n2 <= tau {
            continue;
        }
        checked += 1;
        let m = symbol_combo(b0, b1, xi, tau)?;
        let mut grad2 = 0.0;
        for k in 0..xi.len() {
            let step = 1e-6 * (1.0 + xi[k].abs());
            let mut up = xi.clone();
            let mut down = xi.clone();
            up[k] += step;
            down[k] -= step;
            let g = (symbol_combo(b0, b1, &up, tau)? - symbol_combo(b0, b1, &down, tau)?)
                / (2.0 * step);
            grad2 += g.norm_sqr();
        }
        let v = m.norm();
        if v < min_value {
            min_value = v;
            argmin = xi.clone();
        }
        min_micro = min_micro.min(v + grad2.sqrt());
    }
    Ok(EllipticityReport {
        min_value,
        argmin,
        min_microhyperbolic: min_micro,
        points_checked: checked,
        pass: min_value > ELLIPTICITY_TOL,
        pass_microhyperbolic: min_micro > ELLIPTICITY_TOL,
    })
}
