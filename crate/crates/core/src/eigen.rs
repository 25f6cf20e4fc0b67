//! Dense ground truth for 1-D operators h²D g D + V: a cell-centred
//! three-point discretisation, eigenpairs by Sturm bisection plus inverse
//! iteration, and the diagonal of the spectral projector.

use crate::error::{Error, Result};
use crate::pointwise::PotentialModel;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Smallest admissible grid.
pub const MIN_POINTS: usize = 64;
/// Points per shortest local wavelength required by [`discretize`].
pub const POINTS_PER_WAVELENGTH: f64 = 16.0;
/// Eigenpairs are computed up to τ + `MARGIN_FACTOR`·h.
pub const MARGIN_FACTOR: f64 = 10.0;
/// Forbidden-side padding, in units of the decay length h/(2|V−τ|^{1/2}).
pub const PADDING_DECAY_LENGTHS: f64 = 15.0;
/// Relative eigen-residual above which a solve is reported as degraded.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Distance from an eigenvalue at which the projector jump is flagged.
pub const JUMP_FLAG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndCondition {
    Dirichlet,
    Neumann,
    /// h ∂_in u + β u = 0 with the inward normal.
    Robin(f64),
}

/// Symmetric tridiagonal matrix on the cell centres a + (i+½)δ.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    pub h: f64,
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub delta: f64,
    pub ends: (EndCondition, EndCondition),
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    /// Gershgorin bound on the spectral radius, at least 1.
    pub norm: f64,
}

impl Discretization {
    pub fn x(&self, i: usize) -> f64 {
        self.a + (i as f64 + 0.5) * self.delta
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Index of the grid point at `x`; errors unless `x` is a node.
    pub fn index_of(&self, x: f64) -> Result<usize> {
        let t = (x - self.a) / self.delta - 0.5;
        let i = t.round();
        if i < 0.0 || i >= self.n as f64 || (t - i).abs() > 1e-6 {
            return Err(Error::Contract(format!(
                "x = {x} is not a grid point (nearest index offset {:.3e})",
                t - i
            )));
        }
        Ok(i as usize)
    }

    pub fn nearest_index(&self, x: f64) -> usize {
        let t = ((x - self.a) / self.delta - 0.5).round();
        t.clamp(0.0, (self.n - 1) as f64) as usize
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            m[i][i] = self.diag[i];
            if i + 1 < self.n {
                m[i][i + 1] = self.off[i];
                m[i + 1][i] = self.off[i];
            }
        }
        m
    }

    fn gershgorin_upper(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let l = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
                let r = if i + 1 < self.n { self.off[i].abs() } else { 0.0 };
                self.diag[i].abs() + l + r
            })
            .fold(0.0, f64::max)
    }

    fn gershgorin_lower(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let l = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
                let r = if i + 1 < self.n { self.off[i].abs() } else { 0.0 };
                self.diag[i] - l - r
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Ghost-value factor ψ_ghost = f ψ_boundary for a wall half a cell away.
fn ghost_factor(end: EndCondition, h: f64, delta: f64) -> Result<f64> {
    Ok(match end {
        EndCondition::Dirichlet => -1.0,
        EndCondition::Neumann => 1.0,
        EndCondition::Robin(beta) => {
            if !beta.is_finite() {
                return Err(Error::Domain(format!("Robin coefficient {beta}")));
            }
            let r = h / delta;
            if beta * delta / (2.0 * h) >= 1.0 {
                return Err(Error::Contract(format!(
                    "Robin β = {beta} needs β δ/(2h) < 1; refine the grid (δ = {delta})"
                )));
            }
            (r + beta / 2.0) / (r - beta / 2.0)
        }
    })
}

/// Number of grid points the wavelength rule asks for on `interval` at
/// energies up to `tau_max`.
pub fn required_points(
    model: &PotentialModel,
    h: f64,
    interval: (f64, f64),
    tau_max: f64,
) -> Result<usize> {
    let (a, b) = interval;
    let samples = 2000;
    let mut kmax: f64 = 0.0;
    for j in 0..=samples {
        let x = a + (b - a) * j as f64 / samples as f64;
        let v = model.v(&[x])?;
        let g = model.metric_at(&[x])?[0][0];
        let excess = tau_max + MARGIN_FACTOR * h - v;
        if excess > 0.0 {
            kmax = kmax.max((excess / g).sqrt());
        }
    }
    if kmax == 0.0 {
        return Ok(MIN_POINTS);
    }
    let wavelength = 2.0 * PI * h / kmax;
    let n = (POINTS_PER_WAVELENGTH * (b - a) / wavelength).ceil() as usize;
    Ok(n.max(MIN_POINTS))
}

/// Assemble −h² d/dx g¹¹ d/dx + V on `n` cells of `interval`.
pub fn discretize(
    model: &PotentialModel,
    h: f64,
    interval: (f64, f64),
    ends: (EndCondition, EndCondition),
    n: usize,
    tau_max: f64,
) -> Result<Discretization> {
    if model.dim != 1 {
        return Err(Error::Contract(format!(
            "dense oracle is one-dimensional, model has dim {}",
            model.dim
        )));
    }
    let (a, b) = interval;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::Contract(format!("bad interval [{a}, {b}]")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Contract(format!("h must be positive, got {h}")));
    }
    let required = required_points(model, h, interval, tau_max)?;
    if n < required {
        return Err(Error::Resolution { required, given: n });
    }
    let delta = (b - a) / n as f64;
    let s = h * h / (delta * delta);

    // g¹¹ at the n+1 cell faces, including the two walls.
    let mut face = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let g = model.metric_at(&[a + i as f64 * delta])?[0][0];
        face.push(g);
    }
    let mut diag = Vec::with_capacity(n);
    for i in 0..n {
        let v = model.v(&[a + (i as f64 + 0.5) * delta])?;
        if !v.is_finite() {
            return Err(Error::Domain(format!("potential not bounded at x = {}", a + (i as f64 + 0.5) * delta)));
        }
        diag.push(s * (face[i] + face[i + 1]) + v);
    }
    let off: Vec<f64> = (1..n).map(|i| -s * face[i]).collect();

    let fl = ghost_factor(ends.0, h, delta)?;
    let fr = ghost_factor(ends.1, h, delta)?;
    diag[0] -= s * face[0] * fl;
    diag[n - 1] -= s * face[n] * fr;

    let mut disc = Discretization { h, a, b, n, delta, ends, diag, off, norm: 1.0 };
    disc.norm = disc.gershgorin_upper().max(1.0);
    Ok(disc)
}

/// Number of eigenvalues strictly below `x`.
pub fn sturm_count(disc: &Discretization, x: f64) -> usize {
    let pivmin = f64::MIN_POSITIVE.sqrt() * disc.norm;
    let mut count = 0;
    let mut q = disc.diag[0] - x;
    if q.abs() < pivmin {
        q = -pivmin;
    }
    count += (q < 0.0) as usize;
    for i in 1..disc.n {
        let e = disc.off[i - 1];
        q = disc.diag[i] - x - e * e / q;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        count += (q < 0.0) as usize;
    }
    count
}

/// Shifts evaluated per Sturm sweep during bisection.
const SHIFTS: usize = 7;

/// Sturm counts at several shifts in one sweep; the independent recurrences
/// overlap in the pipeline, so this costs about as much as a single count.
fn sturm_counts(disc: &Discretization, x: [f64; SHIFTS]) -> [usize; SHIFTS] {
    let pivmin = f64::MIN_POSITIVE.sqrt() * disc.norm;
    let mut q = [0.0; SHIFTS];
    let mut c = [0usize; SHIFTS];
    for j in 0..SHIFTS {
        q[j] = disc.diag[0] - x[j];
        if q[j].abs() < pivmin {
            q[j] = -pivmin;
        }
        c[j] += (q[j] < 0.0) as usize;
    }
    for i in 1..disc.n {
        let e2 = disc.off[i - 1] * disc.off[i - 1];
        let d = disc.diag[i];
        for j in 0..SHIFTS {
            let mut t = d - x[j] - e2 / q[j];
            if t.abs() < pivmin {
                t = -pivmin;
            }
            q[j] = t;
            c[j] += (t < 0.0) as usize;
        }
    }
    c
}

/// The `k`-th eigenvalue (0-based) by multisection inside `[lo, hi]`.
fn bisect_eigenvalue(disc: &Discretization, k: usize, mut lo: f64, mut hi: f64) -> f64 {
    let tol = 4.0 * f64::EPSILON * disc.norm;
    while hi - lo > tol {
        let w = (hi - lo) / (SHIFTS + 1) as f64;
        let mut pts = [0.0; SHIFTS];
        for (j, p) in pts.iter_mut().enumerate() {
            *p = lo + (j + 1) as f64 * w;
        }
        if pts[0] <= lo || pts[SHIFTS - 1] >= hi {
            break;
        }
        let c = sturm_counts(disc, pts);
        let j = c.iter().position(|&cj| cj > k).unwrap_or(SHIFTS);
        let nlo = if j == 0 { lo } else { pts[j - 1] };
        let nhi = if j == SHIFTS { hi } else { pts[j] };
        lo = nlo;
        hi = nhi;
    }
    0.5 * (lo + hi)
}

/// All eigenvalues with index < `count`, ascending.
pub fn lowest_eigenvalues(disc: &Discretization, count: usize) -> Vec<f64> {
    let lo = disc.gershgorin_lower() - 1.0;
    let hi = disc.gershgorin_upper() + 1.0;
    bracket_eigenvalues(disc, count, lo, hi)
}

/// Eigenvalues below `upper`, ascending.
pub fn eigenvalues_below(disc: &Discretization, upper: f64) -> Vec<f64> {
    let count = sturm_count(disc, upper);
    lowest_eigenvalues(disc, count)
}

fn bracket_eigenvalues(disc: &Discretization, count: usize, lo: f64, hi: f64) -> Vec<f64> {
    // Split [lo, hi] until each piece holds one eigenvalue, sharing the
    // early bisection levels between neighbouring indices.
    let mut brackets: Vec<(usize, f64, f64)> = Vec::with_capacity(count);
    let mut stack = vec![(lo, hi, 0usize, count.min(sturm_count(disc, hi)))];
    while let Some((l, r, cl, cr)) = stack.pop() {
        let lo_index = cl;
        let hi_index = cr.min(count);
        if hi_index <= lo_index {
            continue;
        }
        if cr - cl == 1 || r - l < 4.0 * f64::EPSILON * disc.norm {
            for k in lo_index..hi_index {
                brackets.push((k, l, r));
            }
            continue;
        }
        let w = (r - l) / (SHIFTS + 1) as f64;
        let mut pts = [0.0; SHIFTS];
        for (j, p) in pts.iter_mut().enumerate() {
            *p = l + (j + 1) as f64 * w;
        }
        let c = sturm_counts(disc, pts);
        let mut edges = vec![(l, cl)];
        edges.extend(pts.iter().copied().zip(c));
        edges.push((r, cr));
        for seg in edges.windows(2).rev() {
            stack.push((seg[0].0, seg[1].0, seg[0].1, seg[1].1));
        }
    }
    brackets.sort_by_key(|b| b.0);
    brackets
        .par_iter()
        .map(|&(k, l, r)| bisect_eigenvalue(disc, k, l, r))
        .collect()
}

/// LU factors of T − σ with partial pivoting (LAPACK gttrf layout).
struct ShiftedLu {
    d_inv: Vec<f64>,
    dl: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn new(disc: &Discretization, sigma: f64) -> Self {
        let n = disc.n;
        let tiny = f64::EPSILON * disc.norm;
        let mut d: Vec<f64> = disc.diag.iter().map(|v| v - sigma).collect();
        let mut dl = disc.off.clone();
        let mut du = disc.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let f = dl[i] / d[i];
                dl[i] = f;
                d[i + 1] -= f * du[i];
            } else {
                let f = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = f;
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - f * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -f;
                }
                swapped[i] = true;
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        let d_inv = d.iter().map(|v| 1.0 / v).collect();
        ShiftedLu { d_inv, dl, du, du2, swapped }
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                rhs.swap(i, i + 1);
            }
            rhs[i + 1] -= self.dl[i] * rhs[i];
        }
        rhs[n - 1] *= self.d_inv[n - 1];
        if n > 1 {
            rhs[n - 2] = (rhs[n - 2] - self.du[n - 2] * rhs[n - 1]) * self.d_inv[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            rhs[i] = (rhs[i] - self.du[i] * rhs[i + 1] - self.du2[i] * rhs[i + 2]) * self.d_inv[i];
        }
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
}

/// Unit eigenvector for the eigenvalue `lambda`, plus the relative residual
/// ‖Tv − λv‖/‖T‖ after Rayleigh refinement.
fn eigenvector(disc: &Discretization, lambda: f64, k: usize) -> (Vec<f64>, f64, f64) {
    let n = disc.n;
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * (0.7 + 1e-3 * k as f64)).sin())
        .collect();
    normalize(&mut v);
    let lu = ShiftedLu::new(disc, lambda);
    for _ in 0..2 {
        lu.solve(&mut v);
        normalize(&mut v);
    }
    let (rq, res) = rayleigh(disc, &v);
    (v, rq, res)
}

/// Rayleigh quotient of a unit vector and its relative residual.
fn rayleigh(disc: &Discretization, v: &[f64]) -> (f64, f64) {
    let n = disc.n;
    let mut tv = vec![0.0; n];
    for i in 0..n {
        let mut s = disc.diag[i] * v[i];
        if i > 0 {
            s += disc.off[i - 1] * v[i - 1];
        }
        if i + 1 < n {
            s += disc.off[i] * v[i + 1];
        }
        tv[i] = s;
    }
    let rq: f64 = tv.iter().zip(v).map(|(a, b)| a * b).sum();
    let res = tv
        .iter()
        .zip(v)
        .map(|(a, b)| (a - rq * b).powi(2))
        .sum::<f64>()
        .sqrt();
    (rq, res / disc.norm)
}

/// Eigenvalues and sampled eigenfunction densities ψ_n(x_i)² (continuum
/// normalisation δΣψ² = 1) at the grid indices `samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSet {
    pub values: Vec<f64>,
    pub samples: Vec<usize>,
    /// `density[n][j]` = ψ_n(x_{samples[j]})².
    pub density: Vec<Vec<f64>>,
    pub max_residual: f64,
}

/// The lowest `count` eigenpairs, keeping only the sampled densities.
pub fn eigenpairs(disc: &Discretization, count: usize, samples: &[usize]) -> Result<EigenSet> {
    if let Some(&bad) = samples.iter().find(|&&i| i >= disc.n) {
        return Err(Error::Contract(format!("sample index {bad} outside grid of {}", disc.n)));
    }
    let values = lowest_eigenvalues(disc, count);
    let norm = disc.norm;
    let cluster = 1e-9 * norm;
    // Nearly degenerate neighbours are solved together so their vectors can
    // be orthogonalised; everything else runs independently.
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k] - values[k - 1] > cluster {
            groups.push((start, k));
            start = k;
        }
    }
    let solved: Vec<Vec<(f64, Vec<f64>, f64)>> = groups
        .par_iter()
        .map(|&(s, e)| {
            let mut vecs: Vec<Vec<f64>> = Vec::new();
            let mut out = Vec::new();
            for k in s..e {
                let (mut v, mut rq, mut res) = eigenvector(disc, values[k], k);
                if !vecs.is_empty() {
                    for u in &vecs {
                        let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                        for (x, y) in v.iter_mut().zip(u) {
                            *x -= dot * y;
                        }
                    }
                    normalize(&mut v);
                    (rq, res) = rayleigh(disc, &v);
                }
                let dens = samples.iter().map(|&i| v[i] * v[i] / disc.delta).collect();
                out.push((rq, dens, res));
                vecs.push(v);
            }
            out
        })
        .collect();
    let mut vals = Vec::with_capacity(count);
    let mut density = Vec::with_capacity(count);
    let mut max_residual: f64 = 0.0;
    for (rq, dens, res) in solved.into_iter().flatten() {
        vals.push(rq);
        density.push(dens);
        max_residual = max_residual.max(res);
    }
    if max_residual > RESIDUAL_TOL {
        return Err(Error::Degraded {
            achieved: max_residual,
            requested: RESIDUAL_TOL,
            context: "tridiagonal eigensolve residual".into(),
        });
    }
    Ok(EigenSet { values: vals, samples: samples.to_vec(), density, max_residual })
}

/// How eigenvalues near τ enter the projector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Occupancy {
    /// Σ_{λ_n ≤ τ}: the projector itself.
    Sharp,
    /// Level n owns the energy cell between the midpoints to its neighbours
    /// and is weighted by the fraction of that cell below τ. On a box
    /// standing in for an unbounded problem this removes the staircase of
    /// the discrete spectrum.
    Continuum,
}

/// Occupation weights of the computed levels.
pub fn occupation(values: &[f64], tau: f64, occupancy: Occupancy) -> Vec<f64> {
    match occupancy {
        Occupancy::Sharp => values.iter().map(|&l| if l <= tau { 1.0 } else { 0.0 }).collect(),
        Occupancy::Continuum => {
            let m = values.len();
            (0..m)
                .map(|n| {
                    let lo = if n > 0 {
                        0.5 * (values[n - 1] + values[n])
                    } else if m > 1 {
                        values[0] - 0.5 * (values[1] - values[0])
                    } else {
                        values[0]
                    };
                    let hi = if n + 1 < m {
                        0.5 * (values[n] + values[n + 1])
                    } else {
                        values[n] + (values[n] - lo)
                    };
                    if hi <= lo {
                        return if values[n] <= tau { 1.0 } else { 0.0 };
                    }
                    ((tau - lo) / (hi - lo)).clamp(0.0, 1.0)
                })
                .collect()
        }
    }
}

/// e(x, x, τ) at a set of grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelProfile {
    pub x: Vec<f64>,
    pub e: Vec<f64>,
    /// τ lies within [`JUMP_FLAG_TOL`] of an eigenvalue.
    pub near_eigenvalue: bool,
    /// Eigenvalues at or below τ.
    pub levels_below: usize,
    pub max_residual: f64,
}

/// How many eigenpairs a projector at τ needs: everything below τ + margin
/// and at least one level above τ.
fn levels_needed(disc: &Discretization, tau: f64) -> usize {
    let below = sturm_count(disc, tau);
    let with_margin = sturm_count(disc, tau + MARGIN_FACTOR * disc.h);
    with_margin.max(below + 1).min(disc.n)
}

pub fn kernel_profile(
    disc: &Discretization,
    indices: &[usize],
    tau: f64,
    occupancy: Occupancy,
) -> Result<KernelProfile> {
    let count = levels_needed(disc, tau);
    let set = eigenpairs(disc, count, indices)?;
    Ok(profile_from_set(disc, &set, tau, occupancy))
}

/// Projector diagonal at several τ from one eigen set.
pub fn profile_from_set(
    disc: &Discretization,
    set: &EigenSet,
    tau: f64,
    occupancy: Occupancy,
) -> KernelProfile {
    let w = occupation(&set.values, tau, occupancy);
    let e = (0..set.samples.len())
        .map(|j| {
            set.density
                .iter()
                .zip(&w)
                .map(|(d, &wn)| wn * d[j])
                .sum::<f64>()
        })
        .collect();
    let flag_tol = JUMP_FLAG_TOL * tau.abs().max(1.0);
    KernelProfile {
        x: set.samples.iter().map(|&i| disc.x(i)).collect(),
        e,
        near_eigenvalue: set.values.iter().any(|&l| (l - tau).abs() <= flag_tol),
        levels_below: set.values.iter().filter(|&&l| l <= tau).count(),
        max_residual: set.max_residual,
    }
}

/// e(x, x, τ) = Σ_{λ_n ≤ τ} ψ_n(x)² at a grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub near_eigenvalue: bool,
}

pub fn spectral_kernel_bruteforce(disc: &Discretization, x: f64, tau: f64) -> Result<KernelValue> {
    let i = disc.index_of(x)?;
    let p = kernel_profile(disc, &[i], tau, Occupancy::Sharp)?;
    Ok(KernelValue { value: p.e[0], near_eigenvalue: p.near_eigenvalue })
}

/// Four-point Lagrange interpolation of a profile given at every node.
pub fn interpolate(disc: &Discretization, values: &[f64], x: f64) -> f64 {
    let t = (x - disc.a) / disc.delta - 0.5;
    let n = disc.n;
    let base = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut sum = 0.0;
    for j in 0..4 {
        let mut w = 1.0;
        for m in 0..4 {
            if m != j {
                w *= (t - (base + m) as f64) / (j as f64 - m as f64);
            }
        }
        sum += w * values[base + j];
    }
    sum
}

fn stencil_base(disc: &Discretization, x: f64) -> usize {
    let t = (x - disc.a) / disc.delta - 0.5;
    (t.floor() as isize - 1).clamp(0, disc.n as isize - 4) as usize
}

/// e(x, x, τ) at arbitrary points, interpolated from the four nearest nodes.
pub fn profile_at(
    disc: &Discretization,
    xs: &[f64],
    tau: f64,
    occupancy: Occupancy,
) -> Result<Vec<f64>> {
    if let Some(&x) = xs.iter().find(|&&x| !(x >= disc.a && x <= disc.b)) {
        return Err(Error::Contract(format!("x = {x} outside [{}, {}]", disc.a, disc.b)));
    }
    let mut idx: Vec<usize> = xs
        .iter()
        .flat_map(|&x| {
            let b = stencil_base(disc, x);
            b..b + 4
        })
        .collect();
    idx.sort_unstable();
    idx.dedup();
    let p = kernel_profile(disc, &idx, tau, occupancy)?;
    let mut full = vec![0.0; disc.n];
    for (k, &i) in idx.iter().enumerate() {
        full[i] = p.e[k];
    }
    Ok(xs.iter().map(|&x| interpolate(disc, &full, x)).collect())
}

/// e(x, x, τ) at an arbitrary x, interpolated from the four nearest nodes.
pub fn kernel_at(disc: &Discretization, x: f64, tau: f64, occupancy: Occupancy) -> Result<f64> {
    Ok(profile_at(disc, &[x], tau, occupancy)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A box standing in for a problem that is unbounded on one side. The open
/// end gets a Dirichlet and a Neumann wall in turn and the two projectors are
/// averaged, which cancels the wave reflected there to leading order; levels
/// enter with [`Occupancy::Continuum`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxedProblem {
    pub interval: (f64, f64),
    pub open: Side,
    /// Condition at the other end.
    pub closed: EndCondition,
    /// Grid density relative to the resolution rule.
    pub points_per_wavelength: f64,
    /// Combine grids N and 2N to cancel the O(δ²) error.
    pub richardson: bool,
}

impl BoxedProblem {
    pub fn new(interval: (f64, f64), open: Side, closed: EndCondition) -> Self {
        BoxedProblem {
            interval,
            open,
            closed,
            points_per_wavelength: 32.0,
            richardson: true,
        }
    }
}

pub fn boxed_kernel(
    model: &PotentialModel,
    h: f64,
    tau: f64,
    problem: &BoxedProblem,
    xs: &[f64],
) -> Result<Vec<f64>> {
    let base = required_points(model, h, problem.interval, tau)?;
    let n0 = (base as f64 * problem.points_per_wavelength / POINTS_PER_WAVELENGTH).ceil() as usize;
    let grids: Vec<usize> = if problem.richardson { vec![n0, 2 * n0] } else { vec![n0] };
    let mut per_grid = Vec::with_capacity(grids.len());
    for &n in &grids {
        let mut acc = vec![0.0; xs.len()];
        for far in [EndCondition::Dirichlet, EndCondition::Neumann] {
            let ends = match problem.open {
                Side::Left => (far, problem.closed),
                Side::Right => (problem.closed, far),
            };
            let disc = discretize(model, h, problem.interval, ends, n, tau)?;
            let e = profile_at(&disc, xs, tau, Occupancy::Continuum)?;
            for (a, v) in acc.iter_mut().zip(e) {
                *a += 0.5 * v;
            }
        }
        per_grid.push(acc);
    }
    Ok(match per_grid.as_slice() {
        [only] => only.clone(),
        [coarse, fine] => coarse
            .iter()
            .zip(fine)
            .map(|(c, f)| (4.0 * f - c) / 3.0)
            .collect(),
        _ => unreachable!(),
    })
}

/// Free half-line kernel of −h²D² on (0, ∞) with the given condition at 0,
/// from a boxed problem of the given length.
pub fn halfline_kernel(h: f64, tau: f64, closed: EndCondition, length: f64, xs: &[f64]) -> Result<Vec<f64>> {
    let free = PotentialModel::new(1, "0", vec![(0.0, length)])?;
    let problem = BoxedProblem::new((0.0, length), Side::Right, closed);
    boxed_kernel(&free, h, tau, &problem, xs)
}

/// Width of forbidden region giving `PADDING_DECAY_LENGTHS` decay lengths of
/// e(x,x,τ), measured from `from` in the direction `sign(dir)`.
pub fn agmon_padding(model: &PotentialModel, h: f64, tau: f64, from: f64, dir: f64) -> Result<f64> {
    let step = 1e-3;
    let mut acc = 0.0;
    let mut dist = 0.0;
    let dir = dir.signum();
    while 2.0 * acc / h < PADDING_DECAY_LENGTHS {
        let x = from + dir * (dist + 0.5 * step);
        let g = model.metric_at(&[x])?[0][0];
        let excess = model.v(&[x])? - tau;
        acc += (excess.max(0.0) / g).sqrt() * step;
        dist += step;
        if dist > 1e4 {
            return Err(Error::Domain(format!(
                "no forbidden region beyond x = {from} in direction {dir}"
            )));
        }
    }
    Ok(dist)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub ns: Vec<usize>,
    pub values: Vec<f64>,
    /// Successive differences e(N_{k+1}) − e(N_k).
    pub differences: Vec<f64>,
    /// Ratios of successive differences; 1/4 for second order and doubling.
    pub ratios: Vec<f64>,
    pub observed_order: f64,
    pub monotone: bool,
}

pub fn convergence_check(
    model: &PotentialModel,
    h: f64,
    interval: (f64, f64),
    ends: (EndCondition, EndCondition),
    tau: f64,
    x: f64,
    ns: &[usize],
    occupancy: Occupancy,
) -> Result<ConvergenceReport> {
    if ns.len() < 3 || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Contract("need at least three increasing grid sizes".into()));
    }
    let values = ns
        .iter()
        .map(|&n| {
            let disc = discretize(model, h, interval, ends, n, tau)?;
            kernel_at(&disc, x, tau, occupancy)
        })
        .collect::<Result<Vec<f64>>>()?;
    let differences: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let ratios: Vec<f64> = differences.windows(2).map(|w| w[1] / w[0]).collect();
    let monotone = differences.windows(2).all(|w| w[0] * w[1] > 0.0 && w[1].abs() < w[0].abs());
    // |d_k| ∝ N_k^{-p} for geometric grid sequences.
    let pts: Vec<(f64, f64)> = differences
        .iter()
        .zip(ns)
        .filter(|(d, _)| d.abs() > 0.0)
        .map(|(d, &n)| ((n as f64).ln(), d.abs().ln()))
        .collect();
    let observed_order = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        -sxy / sxx
    } else {
        f64::NAN
    };
    Ok(ConvergenceReport { ns: ns.to_vec(), values, differences, ratios, observed_order, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airy_model::airy_kernel_exact;

    fn free() -> PotentialModel {
        PotentialModel::new(1, "0", vec![(-1e3, 1e3)]).unwrap()
    }

    const DD: (EndCondition, EndCondition) = (EndCondition::Dirichlet, EndCondition::Dirichlet);
    const NN: (EndCondition, EndCondition) = (EndCondition::Neumann, EndCondition::Neumann);

    #[test]
    fn dirichlet_box_spectrum() {
        let d = discretize(&free(), 1.0, (0.0, PI), DD, 1024, 30.0).unwrap();
        let ev = lowest_eigenvalues(&d, 5);
        assert!((ev[0] - 1.0).abs() <= 1e-4);
        for (i, l) in ev.iter().enumerate() {
            let n = (i + 1) as f64;
            let rel = (l - n * n).abs() / (n * n);
            assert!(rel <= 1.1 * (n * d.delta).powi(2) / 12.0, "n={n} rel={rel:e}");
        }
    }

    #[test]
    fn neumann_ground_state_is_zero() {
        let d = discretize(&free(), 1.0, (0.0, PI), NN, 256, 10.0).unwrap();
        assert!(lowest_eigenvalues(&d, 1)[0].abs() <= 1e-10);
    }

    #[test]
    fn robin_zero_is_neumann() {
        let a = discretize(&free(), 0.1, (0.0, 1.0), NN, 400, 1.0).unwrap();
        let ends = (EndCondition::Robin(0.0), EndCondition::Robin(0.0));
        let b = discretize(&free(), 0.1, (0.0, 1.0), ends, 400, 1.0).unwrap();
        assert_eq!(a.diag, b.diag);
        assert_eq!(a.off, b.off);
    }

    #[test]
    fn matrix_is_exactly_symmetric() {
        let m = PotentialModel::new(1, "x^2 - 1", vec![(-5.0, 5.0)]).unwrap();
        let d = discretize(&m, 0.1, (-2.0, 2.0), (EndCondition::Robin(0.3), EndCondition::Neumann), 300, 0.0)
            .unwrap();
        let dense = d.to_dense();
        for i in 0..d.n {
            for j in 0..d.n {
                assert_eq!(dense[i][j].to_bits(), dense[j][i].to_bits());
            }
        }
    }

    #[test]
    fn resolution_rule_names_required_points() {
        let err = discretize(&free(), 0.01, (0.0, 10.0), DD, 100, 1.0).unwrap_err();
        match err {
            Error::Resolution { required, given } => {
                assert_eq!(given, 100);
                let expected = required_points(&free(), 0.01, (0.0, 10.0), 1.0).unwrap();
                assert_eq!(required, expected);
                assert!(required > 2500);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(discretize(&free(), 1.0, (0.0, 1.0), DD, 32, 1.0).is_err());
    }

    #[test]
    fn empty_projector_below_ground_state() {
        let d = discretize(&free(), 1.0, (0.0, PI), DD, 256, 1.0).unwrap();
        let x = d.x(100);
        let k = spectral_kernel_bruteforce(&d, x, 0.5).unwrap();
        assert_eq!(k.value, 0.0);
        assert!(spectral_kernel_bruteforce(&d, x + 0.3 * d.delta, 0.5).is_err());
    }

    #[test]
    fn jump_is_flagged() {
        let d = discretize(&free(), 1.0, (0.0, PI), DD, 256, 10.0).unwrap();
        let l = lowest_eigenvalues(&d, 2)[1];
        let k = spectral_kernel_bruteforce(&d, d.x(50), l).unwrap();
        assert!(k.near_eigenvalue);
        let k = spectral_kernel_bruteforce(&d, d.x(50), l + 0.5).unwrap();
        assert!(!k.near_eigenvalue);
    }

    #[test]
    fn half_line_surrogate_matches_images() {
        let m = PotentialModel::new(1, "-1", vec![(-1e3, 1e3)]).unwrap();
        let h = 0.05;
        let len = 40.0;
        let n = required_points(&m, h, (0.0, len), 0.0).unwrap();
        let d = discretize(&m, h, (0.0, len), DD, n, 0.0).unwrap();
        let i = d.nearest_index(10.0);
        let x = d.x(i);
        let e = spectral_kernel_bruteforce(&d, x, 0.0).unwrap().value;
        let r = x / h;
        let rr = (len - x) / h;
        let images = (1.0 - (2.0 * r).sin() / (2.0 * r) - (2.0 * rr).sin() / (2.0 * rr)) / (PI * h);
        assert!((e - images).abs() / images <= 0.02, "e={e} images={images}");
    }

    #[test]
    fn airy_surrogate_matches_exact_kernel() {
        let m = PotentialModel::new(1, "-x", vec![(-1e3, 1e3)]).unwrap();
        let h = 0.02;
        let p = BoxedProblem::new((-20.0, 8.0), Side::Right, EndCondition::Dirichlet);
        let xs: Vec<f64> = (0..30).map(|i| -0.3 + 2.3 * i as f64 / 29.0).collect();
        let e = boxed_kernel(&m, h, 0.0, &p, &xs).unwrap();
        let floor = 0.1 * h.powf(-2.0 / 3.0);
        let mut checked = 0;
        for (x, v) in xs.iter().zip(&e) {
            let exact = airy_kernel_exact(h, *x, 0.0).unwrap();
            if exact >= floor {
                checked += 1;
                assert!((v - exact).abs() / exact <= 0.01, "x={x} e={v} exact={exact}");
            }
        }
        assert!(checked >= 20);
    }

    #[test]
    fn convergence_is_second_order() {
        let ns = [128, 256, 512, 1024];
        let r = convergence_check(&free(), 1.0, (0.0, PI), DD, 10.0, 1.0, &ns, Occupancy::Continuum).unwrap();
        assert!((1.8..=2.2).contains(&r.observed_order), "{r:?}");
        for q in &r.ratios {
            assert!((0.2..=0.3).contains(q), "{r:?}");
        }
        assert!(r.monotone);
        let again = convergence_check(&free(), 1.0, (0.0, PI), DD, 10.0, 1.0, &ns, Occupancy::Continuum).unwrap();
        for (a, b) in r.values.iter().zip(&again.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(convergence_check(&free(), 1.0, (0.0, PI), DD, 10.0, 1.0, &ns[..2], Occupancy::Sharp).is_err());
    }

    #[test]
    fn non_monotone_convergence_is_flagged() {
        // Sharp projector with τ close to a level: the level crosses τ as the
        // grid is refined.
        let d = discretize(&free(), 1.0, (0.0, PI), DD, 128, 20.0).unwrap();
        let l = lowest_eigenvalues(&d, 4)[3];
        let tau = 0.5 * (l + 16.0);
        let r = convergence_check(&free(), 1.0, (0.0, PI), DD, tau, 1.0, &[128, 256, 512], Occupancy::Sharp).unwrap();
        assert!(!r.monotone, "{r:?}");
    }

    #[test]
    fn domain_stability_with_padding() {
        let m = PotentialModel::new(1, "x^2 - 1", vec![(-10.0, 10.0)]).unwrap();
        let h = 0.05;
        let pad = agmon_padding(&m, h, 0.0, 1.0, 1.0).unwrap();
        assert!(pad > 0.0);
        let half = 1.0 + pad;
        let mut vals = Vec::new();
        for scale in [1.0, 1.25] {
            let iv = (-half * scale, half * scale);
            let n = 2 * required_points(&m, h, iv, 0.0).unwrap();
            let d = discretize(&m, h, iv, DD, n, 0.0).unwrap();
            vals.push(kernel_at(&d, 0.3, 0.0, Occupancy::Sharp).unwrap());
        }
        assert!((vals[0] - vals[1]).abs() / vals[0] <= 5e-3, "{vals:?}");
    }

    #[test]
    fn occupation_weights() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(occupation(&v, 2.0, Occupancy::Sharp), vec![1.0, 1.0, 0.0, 0.0]);
        let w = occupation(&v, 2.75, Occupancy::Continuum);
        assert_eq!(w, vec![1.0, 1.0, 0.25, 0.0]);
    }

    #[test]
    fn dim_two_rejected() {
        let m = PotentialModel::airy(2).unwrap();
        assert!(matches!(discretize(&m, 0.1, (0.0, 1.0), DD, 100, 0.0), Err(Error::Contract(_))));
    }
}
