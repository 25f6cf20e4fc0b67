//! Special functions needed by the model kernels: Ai, Ai′, J₁ and the volume
//! of the unit ball.

mod airy;
mod bessel;

pub use airy::{airy, global_table, AiryTable};
pub use bessel::j1;

use crate::error::{Error, Result};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpecialKind {
    Ai,
    AiPrime,
    BesselJ1,
}

pub fn eval_special(kind: SpecialKind, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("{kind:?} at non-finite argument {z}")));
    }
    Ok(match kind {
        SpecialKind::Ai => airy(z).0,
        SpecialKind::AiPrime => airy(z).1,
        SpecialKind::BesselJ1 => j1(z),
    })
}

/// Same as [`eval_special`] but against a caller-supplied Airy table.
pub fn eval_special_with(table: &AiryTable, kind: SpecialKind, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("{kind:?} at non-finite argument {z}")));
    }
    Ok(match kind {
        SpecialKind::Ai => table.eval(z).0,
        SpecialKind::AiPrime => table.eval(z).1,
        SpecialKind::BesselJ1 => j1(z),
    })
}

/// Volume of the unit ball in R^d, π^{d/2}/Γ(d/2+1).
pub fn unit_ball_volume(d: usize) -> Result<f64> {
    match d {
        0 => Err(Error::Domain("unit ball volume needs d >= 1".into())),
        1 => Ok(2.0),
        2 => Ok(PI),
        _ => Ok(2.0 * PI / d as f64 * unit_ball_volume(d - 2)?),
    }
}

/// Surface area of the unit sphere S^{n} ⊂ R^{n+1}.
pub fn unit_sphere_area(n: usize) -> f64 {
    (n + 1) as f64 * unit_ball_volume(n + 1).unwrap_or(f64::NAN)
}
