//! Carleson testing quantities and embedding-norm estimators.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{maximize, Budget, NormEstimate, SearchSpace};
use crate::geometry::{CarlesonSquare, DiskPoint, Lattice, Region, RegionKind};
use crate::kernel::{bergman_norm, kernel_atom, product_integral, AnalyticFunction, FunctionSpec};
use crate::measures::{ring_nodes, Measure};
use crate::quad::pow2_clamped;
use crate::weights::{product_weight, RadialWeight, Support};

/// Relative level below which a profile counts as decayed.
pub const DECAY_TOL: f64 = 1e-3;
/// Default radius cutoff for quadrature norms over the disk.
pub const DEFAULT_CUTOFF: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantityKind {
    SquareQuotient,
    DiskQuotient,
    M0,
    VanishingProfile,
    LambdaSequence,
    MuHat,
    Phi,
    Psi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Vanishing,
    NotVanishing,
}

impl Verdict {
    fn from_bool(vanishing: bool) -> Self {
        if vanishing {
            Verdict::Vanishing
        } else {
            Verdict::NotVanishing
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flag {
    /// Grid suprema bound the true supremum from below.
    GridLowerBound,
    /// Partial sums keep growing as lattice rings are added.
    DivergentUnderRefinement,
}

/// Smallest local decay exponent `d log v / d log(1-r)` accepted as
/// power-law decay of a radial profile.
pub const DECAY_EXPONENT: f64 = 0.05;
/// Largest step ratio accepted as geometric decay of a sequence.
pub const DECAY_RATIO: f64 = 0.95;

fn below_tolerance(values: &[f64]) -> Option<bool> {
    let max = values.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Some(true);
    }
    let n = values.len();
    if n < 4 {
        return Some(false);
    }
    if values[n - 3..].iter().all(|v| *v <= DECAY_TOL * max) {
        return Some(true);
    }
    None
}

/// Decay test for a profile over radii: the last three values are below
/// [`DECAY_TOL`] of the maximum, or the last three steps all decay like a
/// power of `1 - r` with exponent at least [`DECAY_EXPONENT`].
pub fn profile_decays(radii: &[f64], values: &[f64]) -> bool {
    if let Some(v) = below_tolerance(values) {
        return v;
    }
    let n = values.len();
    (n - 4..n - 1).all(|i| {
        let (g0, g1) = (1.0 - radii[i], 1.0 - radii[i + 1]);
        let (v0, v1) = (values[i], values[i + 1]);
        v0 > 0.0 && v1 < v0 && (v0 / v1).ln() / (g0 / g1).ln() >= DECAY_EXPONENT
    })
}

/// Decay test for a sequence: the last three values are below
/// [`DECAY_TOL`] of the maximum, or the last three steps each shrink by
/// the factor [`DECAY_RATIO`].
pub fn sequence_decays(values: &[f64]) -> bool {
    if let Some(v) = below_tolerance(values) {
        return v;
    }
    let n = values.len();
    values[n - 4..].windows(2).all(|w| w[1] <= DECAY_RATIO * w[0])
}

/// Point values of a testing quantity with its supremum or norm.
#[derive(Debug, Clone, Serialize)]
pub struct CarlesonReport {
    pub kind: QuantityKind,
    /// Supremum, sequence norm or integral norm.
    pub value: f64,
    pub witness: Option<DiskPoint>,
    pub verdict: Option<Verdict>,
    pub flags: Vec<Flag>,
    /// Hyperbolic radius of the disks, if any.
    pub radius: Option<f64>,
    /// Exponent of the sequence or integral norm.
    pub exponent: Option<f64>,
    pub count: usize,
    #[serde(skip)]
    pub points: Vec<DiskPoint>,
    #[serde(skip)]
    pub values: Vec<f64>,
}

impl CarlesonReport {
    fn new(kind: QuantityKind, value: f64, points: Vec<DiskPoint>, values: Vec<f64>) -> Self {
        Self {
            kind,
            value,
            witness: None,
            verdict: None,
            flags: Vec::new(),
            radius: None,
            exponent: None,
            count: points.len(),
            points,
            values,
        }
    }

    fn supremum(kind: QuantityKind, points: Vec<DiskPoint>, values: Vec<f64>) -> Self {
        let (idx, value) = argmax(&values);
        let mut rep = Self::new(kind, value.max(0.0), points, values);
        rep.witness = idx.map(|i| rep.points[i]);
        rep.flags.push(Flag::GridLowerBound);
        rep
    }

    /// Point data as CSV: `radius,value` for profiles, `re,im,value` otherwise.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        if self.kind == QuantityKind::VanishingProfile {
            writeln!(out, "radius,value")?;
            for (p, v) in self.points.iter().zip(&self.values) {
                writeln!(out, "{},{}", p.modulus(), v)?;
            }
        } else {
            writeln!(out, "re,im,value")?;
            for (p, v) in self.points.iter().zip(&self.values) {
                writeln!(out, "{},{},{}", p.z().re, p.z().im, v)?;
            }
        }
        Ok(())
    }
}

fn argmax(values: &[f64]) -> (Option<usize>, f64) {
    let mut best = (None, f64::NEG_INFINITY);
    for (i, v) in values.iter().enumerate() {
        if *v > best.1 {
            best = (Some(i), *v);
        }
    }
    best
}

/// Shells `r = 1 - 2^{-k/2}` with angular resolution growing towards the
/// boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellGrid {
    pub radii: Vec<f64>,
    pub max_angles: usize,
}

impl ShellGrid {
    pub fn geometric(k_max: u32) -> Self {
        let mut radii = vec![0.0];
        radii.extend((1..=2 * k_max).map(|k| 1.0 - (-(k as f64) / 2.0).exp2()));
        Self {
            radii,
            max_angles: 4096,
        }
    }

    pub fn with_radii(radii: Vec<f64>) -> Result<Self> {
        if let Some(r) = radii.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(Error::domain(format!("shell radius {r} outside [0, 1)")));
        }
        Ok(Self {
            radii,
            max_angles: 4096,
        })
    }

    fn angles(&self, r: f64, invariant: bool) -> usize {
        if invariant || r == 0.0 {
            1
        } else {
            pow2_clamped(16.0 / (1.0 - r), 16, self.max_angles)
        }
    }
}

impl Default for ShellGrid {
    fn default() -> Self {
        Self::geometric(10)
    }
}

fn rotation_invariant(mu: &Measure) -> bool {
    mu.is_zero() || matches!(mu, Measure::Radial { .. })
}

/// Masses of one region for `μ` and a list of weights. Weights are
/// radial, so their masses are computed once per shell.
struct Regions<'a> {
    mu: &'a Measure,
    weights: Vec<&'a RadialWeight>,
    kind: RegionKind,
}

impl Regions<'_> {
    fn weight_masses(&self, r: f64) -> Result<Vec<f64>> {
        let region = self.kind.at(DiskPoint::real(r)?)?;
        let mut out: Vec<f64> = Vec::with_capacity(self.weights.len());
        for (i, w) in self.weights.iter().enumerate() {
            let dup = (0..i).find(|&j| crate::toeplitz::same_weight(self.weights[j], w));
            out.push(match dup {
                Some(j) => out[j],
                None => w.region_weight(&region),
            });
        }
        Ok(out)
    }

    /// `f(μ(R_z), weight masses)` at every point of the shell of radius `r`.
    fn shell<F>(&self, r: f64, angles: usize, f: &F) -> Result<Vec<(DiskPoint, f64)>>
    where
        F: Fn(f64, &[f64]) -> f64 + Sync,
    {
        let wm = self.weight_masses(r)?;
        (0..angles)
            .into_par_iter()
            .map(|j| {
                let z = DiskPoint::polar(r, TAU * j as f64 / angles as f64)?;
                let m = self.mu.mass_of_region(&self.kind.at(z)?);
                Ok((z, f(m, &wm)))
            })
            .collect()
    }

    fn scan<F>(&self, grid: &ShellGrid, f: F) -> Result<Vec<Vec<(DiskPoint, f64)>>>
    where
        F: Fn(f64, &[f64]) -> f64 + Sync,
    {
        let inv = rotation_invariant(self.mu);
        grid.radii
            .iter()
            .map(|&r| self.shell(r, grid.angles(r, inv), &f))
            .collect()
    }
}

fn check_exponents(p: f64, q: f64) -> Result<()> {
    if !(p > 0.0 && q > 0.0 && p.is_finite() && q.is_finite()) {
        return Err(Error::param(format!("exponents must be positive and finite, got ({p}, {q})")));
    }
    Ok(())
}

fn require_p_le_q(p: f64, q: f64) -> Result<()> {
    check_exponents(p, q)?;
    if p > q {
        return Err(Error::param(format!("this quantity needs p <= q, got ({p}, {q})")));
    }
    Ok(())
}

/// `pq/(p-q)` for `q < p`.
fn require_q_lt_p(p: f64, q: f64) -> Result<f64> {
    check_exponents(p, q)?;
    if p == q {
        return Err(Error::Unsupported(
            "p = q has no finite pq/(p-q) exponent".into(),
        ));
    }
    if q > p {
        return Err(Error::param(format!("this quantity needs q < p, got ({p}, {q})")));
    }
    Ok(p * q / (p - q))
}

/// `μ(R_z) / w(R_z)^e` for a square or disk at `z`.
pub fn carleson_quotient(
    mu: &Measure,
    w: &RadialWeight,
    z: DiskPoint,
    kind: RegionKind,
    e: f64,
) -> Result<f64> {
    if !(e > 0.0) {
        return Err(Error::param(format!("quotient exponent must be positive, got {e}")));
    }
    let region = kind.at(z)?;
    let wm = w.region_weight(&region);
    if !(wm > 0.0) {
        return Err(Error::Internal(format!("region at {:?} has zero weight", z)));
    }
    Ok(mu.mass_of_region(&region) / wm.powf(e))
}

/// Grid supremum of [`carleson_quotient`].
pub fn quotient_sup(
    mu: &Measure,
    w: &RadialWeight,
    kind: RegionKind,
    e: f64,
    grid: &ShellGrid,
) -> Result<CarlesonReport> {
    if !(e > 0.0) {
        return Err(Error::param(format!("quotient exponent must be positive, got {e}")));
    }
    let regions = Regions {
        mu,
        weights: vec![w],
        kind,
    };
    let shells = regions.scan(grid, |m, wm| m / wm[0].powf(e))?;
    let (points, values): (Vec<_>, Vec<_>) = shells.into_iter().flatten().unzip();
    let qk = match kind {
        RegionKind::Square => QuantityKind::SquareQuotient,
        RegionKind::Disk { .. } => QuantityKind::DiskQuotient,
    };
    let mut rep = CarlesonReport::supremum(qk, points, values);
    rep.exponent = Some(e);
    if let RegionKind::Disk { radius } = kind {
        rep.radius = Some(radius);
    }
    Ok(rep)
}

fn m0_integrand(p: f64, q: f64) -> impl Fn(f64, &[f64]) -> f64 + Sync {
    move |m, wm| m / wm[0] * wm[2].powf(1.0 / q) / wm[1].powf(1.0 / p)
}

/// `M₀ = sup_z μ(D)/ω(D) · υ(D)^{1/q} / η(D)^{1/p}` over the grid.
pub fn m0_sup(
    mu: &Measure,
    omega: &RadialWeight,
    eta: &RadialWeight,
    upsilon: &RadialWeight,
    p: f64,
    q: f64,
    r: f64,
    grid: &ShellGrid,
) -> Result<CarlesonReport> {
    require_p_le_q(p, q)?;
    let regions = Regions {
        mu,
        weights: vec![omega, eta, upsilon],
        kind: RegionKind::Disk { radius: r },
    };
    let shells = regions.scan(grid, m0_integrand(p, q))?;
    let (points, values): (Vec<_>, Vec<_>) = shells.into_iter().flatten().unzip();
    let mut rep = CarlesonReport::supremum(QuantityKind::M0, points, values);
    rep.radius = Some(r);
    Ok(rep)
}

/// Shell maxima of the `M₀` integrand with a decay verdict.
pub fn vanishing_profile(
    mu: &Measure,
    omega: &RadialWeight,
    eta: &RadialWeight,
    upsilon: &RadialWeight,
    p: f64,
    q: f64,
    r: f64,
    grid: &ShellGrid,
) -> Result<CarlesonReport> {
    require_p_le_q(p, q)?;
    let regions = Regions {
        mu,
        weights: vec![omega, eta, upsilon],
        kind: RegionKind::Disk { radius: r },
    };
    let shells = regions.scan(grid, m0_integrand(p, q))?;
    let mut points = Vec::with_capacity(shells.len());
    let mut values = Vec::with_capacity(shells.len());
    for shell in shells {
        let (i, v) = shell
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, (_, v))| if *v > acc.1 { (i, *v) } else { acc });
        points.push(shell[i].0);
        values.push(v);
    }
    let (idx, value) = argmax(&values);
    let verdict = Verdict::from_bool(profile_decays(&grid.radii, &values));
    let mut rep = CarlesonReport::new(QuantityKind::VanishingProfile, value.max(0.0), points, values);
    rep.witness = idx.map(|i| rep.points[i]);
    rep.verdict = Some(verdict);
    rep.radius = Some(r);
    Ok(rep)
}

/// `λ_j` on a lattice and its `ℓ^{pq/(p-q)}` norm. Partial sums are
/// tracked ring by ring to flag growth under refinement.
pub fn lambda_seq_norm(
    mu: &Measure,
    omega: &RadialWeight,
    eta: &RadialWeight,
    upsilon: &RadialWeight,
    p: f64,
    q: f64,
    lattice: &Lattice,
    r: f64,
) -> Result<CarlesonReport> {
    let s = require_q_lt_p(p, q)?;
    let kind = RegionKind::Disk { radius: r };
    let f = m0_integrand(p, q);
    let weights = [omega, eta, upsilon];
    let values: Vec<f64> = lattice
        .points
        .par_iter()
        .map(|z| {
            let region = kind.at(*z)?;
            let wm: Vec<f64> = weights.iter().map(|w| w.region_weight(&region)).collect();
            Ok(f(mu.mass_of_region(&region), &wm))
        })
        .collect::<Result<Vec<f64>>>()?;
    let rings = lattice.ring_index.iter().copied().max().unwrap_or(0);
    let mut per_ring = vec![0.0; rings + 1];
    for (v, k) in values.iter().zip(&lattice.ring_index) {
        per_ring[*k] += v.powf(s);
    }
    let partial: Vec<f64> = per_ring
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    let total = partial.last().copied().unwrap_or(0.0);
    let mut rep = CarlesonReport::new(
        QuantityKind::LambdaSequence,
        total.powf(1.0 / s),
        lattice.points.clone(),
        values,
    );
    let n = partial.len();
    if n >= 3
        && partial[n - 1] > 1.25 * partial[n - 2]
        && partial[n - 2] > 1.25 * partial[n - 3]
    {
        rep.flags.push(Flag::DivergentUnderRefinement);
    }
    rep.radius = Some(r);
    rep.exponent = Some(s);
    Ok(rep)
}

/// `(∫_{|z| < 1-cutoff} F^s ω dA)^{1/s}` for a function sampled on rings.
fn ring_norm<F>(
    invariant: bool,
    omega: &RadialWeight,
    s: f64,
    cutoff: f64,
    kind: QuantityKind,
    f: F,
) -> Result<CarlesonReport>
where
    F: Fn(DiskPoint) -> Result<f64> + Sync,
{
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::param("cutoff must lie in (0, 1)"));
    }
    let rings = ring_nodes(Support::new(0.0, 1.0 - cutoff)?, &[], |g| omega.eval_gap(g));
    let per_ring: Vec<(Vec<DiskPoint>, Vec<f64>, f64)> = rings
        .par_iter()
        .map(|ring| {
            let n = if invariant {
                1
            } else {
                pow2_clamped(8.0 / ring.gap, 16, 1024)
            };
            let mut pts = Vec::with_capacity(n);
            let mut vals = Vec::with_capacity(n);
            for j in 0..n {
                let z = DiskPoint::polar(ring.s, TAU * j as f64 / n as f64)?;
                pts.push(z);
                vals.push(f(z)?);
            }
            let mean = vals.iter().map(|v| v.powf(s)).sum::<f64>() / n as f64;
            Ok((pts, vals, ring.weight * mean))
        })
        .collect::<Result<_>>()?;
    let total: f64 = per_ring.iter().map(|r| r.2).sum();
    let (mut points, mut values) = (Vec::new(), Vec::new());
    for (p, v, _) in per_ring {
        points.extend(p);
        values.extend(v);
    }
    let mut rep = CarlesonReport::new(kind, total.powf(1.0 / s), points, values);
    rep.exponent = Some(s);
    Ok(rep)
}

/// `‖μ̂_r‖_{L_ω^{pq/(p-q)}}` over `|z| < 1 - cutoff`.
pub fn mu_hat_norm(
    mu: &Measure,
    omega: &RadialWeight,
    eta: &RadialWeight,
    upsilon: &RadialWeight,
    p: f64,
    q: f64,
    r: f64,
    cutoff: f64,
) -> Result<CarlesonReport> {
    let s = require_q_lt_p(p, q)?;
    let kind = RegionKind::Disk { radius: r };
    let e = 1.0 + 1.0 / q - 1.0 / p;
    let mut rep = ring_norm(rotation_invariant(mu), omega, s, cutoff, QuantityKind::MuHat, |z| {
        let region = kind.at(z)?;
        let (w, et, u) = (
            omega.region_weight(&region),
            eta.region_weight(&region),
            upsilon.region_weight(&region),
        );
        Ok(mu.mass_of_region(&region) / w.powf(e) * u.powf(1.0 / q) / et.powf(1.0 / p))
    })?;
    rep.radius = Some(r);
    Ok(rep)
}

/// `‖μ(D)/ω(D)‖_{L_ω^{p/(p-q)}}` over `|z| < 1 - cutoff`.
pub fn phi_norm(
    mu: &Measure,
    omega: &RadialWeight,
    p: f64,
    q: f64,
    r: f64,
    cutoff: f64,
) -> Result<CarlesonReport> {
    require_q_lt_p(p, q)?;
    let s = p / (p - q);
    let kind = RegionKind::Disk { radius: r };
    let mut rep = ring_norm(rotation_invariant(mu), omega, s, cutoff, QuantityKind::Phi, |z| {
        let region = kind.at(z)?;
        Ok(mu.mass_of_region(&region) / omega.region_weight(&region))
    })?;
    rep.radius = Some(r);
    Ok(rep)
}

/// Circle mean of `|1 - x e^{iθ}|^{-γ}`, `0 <= x < 1`: the series
/// `Σ ((γ/2)_n / n!)^2 x^{2n}`.
pub fn circle_mean_kernel_pow(x: f64, gamma: f64) -> f64 {
    let y = x * x;
    let a = 0.5 * gamma;
    let (mut c, mut sum) = (1.0f64, 1.0f64);
    let mut yn = 1.0;
    for n in 1..2_000_000usize {
        c *= (a + n as f64 - 1.0) / n as f64;
        yn *= y;
        let term = c * c * yn;
        sum += term;
        if term < 1e-17 * sum && (n as f64) > a {
            break;
        }
    }
    sum
}

fn square_weight(omega: &RadialWeight, xi: Complex64) -> Result<f64> {
    let sq = Region::Square(CarlesonSquare::new(DiskPoint::new(xi)?)).normalized();
    Ok(omega.region_weight(&sq))
}

/// `Ψ(z) = ∫ ((1-|ξ|)/|1-z̄ξ|)^γ dμ(ξ)/ω(S_ξ)`.
pub fn psi_value(mu: &Measure, omega: &RadialWeight, gamma: f64, z: DiskPoint) -> Result<f64> {
    let z = z.z();
    match mu {
        Measure::Atomic { points, masses } => {
            let mut acc = 0.0;
            for (xi, m) in points.iter().zip(masses) {
                let x = xi.z();
                let k = (xi.gap() / (Complex64::new(1.0, 0.0) - z.conj() * x).norm()).powf(gamma);
                acc += m * k / square_weight(omega, x)?;
            }
            Ok(acc)
        }
        Measure::Radial {
            weight,
            scale,
            support,
        } => {
            let rings = ring_nodes(*support, &[], |g| scale * weight.eval_gap(g));
            let mut acc = 0.0;
            for ring in rings {
                let sw = square_weight(omega, Complex64::new(ring.s, 0.0))?;
                acc += ring.weight * ring.gap.powf(gamma) / sw
                    * circle_mean_kernel_pow(z.norm() * ring.s, gamma);
            }
            Ok(acc)
        }
        Measure::Density {
            density,
            scale,
            support,
        } => {
            let rings = ring_nodes(*support, &density.hints, |_| *scale);
            let mut acc = 0.0;
            for ring in rings {
                let sw = square_weight(omega, Complex64::new(ring.s, 0.0))?;
                let n = pow2_clamped(32.0 / (1.0 - z.norm() * ring.s), 64, 1 << 16);
                let mut mean = 0.0;
                for j in 0..n {
                    let xi = Complex64::from_polar(ring.s, TAU * j as f64 / n as f64);
                    mean += (density.f)(xi)
                        * (Complex64::new(1.0, 0.0) - z.conj() * xi).norm().powf(-gamma);
                }
                acc += ring.weight * ring.gap.powf(gamma) / sw * mean / n as f64;
            }
            Ok(acc)
        }
    }
}

/// `‖Ψ‖_{L_ω^{p/(p-q)}}` over `|z| < 1 - cutoff`.
pub fn psi_norm(
    mu: &Measure,
    omega: &RadialWeight,
    gamma: f64,
    p: f64,
    q: f64,
    cutoff: f64,
) -> Result<CarlesonReport> {
    require_q_lt_p(p, q)?;
    if !(gamma > 1.0 && gamma.is_finite()) {
        return Err(Error::param(format!("γ must exceed 1, got {gamma}")));
    }
    let s = p / (p - q);
    if mu.is_zero() {
        let mut rep = CarlesonReport::new(QuantityKind::Psi, 0.0, Vec::new(), Vec::new());
        rep.exponent = Some(s);
        return Ok(rep);
    }
    ring_norm(rotation_invariant(mu), omega, s, cutoff, QuantityKind::Psi, |z| {
        psi_value(mu, omega, gamma, z)
    })
}

/// `‖I_d‖_{A_ω^p → L_μ^q}` as a lower bound over test functions.
pub fn embedding_norm(
    omega: &RadialWeight,
    p: f64,
    mu: &Measure,
    q: f64,
    space: &SearchSpace,
    budget: &Budget,
) -> Result<NormEstimate> {
    check_exponents(p, q)?;
    if mu.is_zero() {
        return Ok(NormEstimate::zero());
    }
    maximize(
        |f: &AnalyticFunction| {
            let d = bergman_norm(f, omega, p)?;
            if d == 0.0 {
                return Ok(0.0);
            }
            Ok(product_integral(&[(f, q)], mu)?.powf(1.0 / q) / d)
        },
        space,
        budget,
    )
}

/// One factor `(ω_i, p_i, q_i)` of a multi-function quotient.
#[derive(Debug, Clone)]
pub struct FactorSpec {
    pub weight: RadialWeight,
    pub p: f64,
    pub q: f64,
}

/// Result of the multi-function supremum with its single-function reference.
#[derive(Debug, Clone, Serialize)]
pub struct MnEstimate {
    pub value: f64,
    pub lambda: f64,
    pub weight: String,
    pub witnesses: Vec<Option<FunctionSpec>>,
    /// `‖I_d‖_{A_ω^{1/λ} → L_μ^1}` for the product weight.
    pub reference: NormEstimate,
    pub evaluations: usize,
    pub exhausted: bool,
    pub lower_bound: bool,
}

fn quotient(specs: &[FactorSpec], fs: &[AnalyticFunction], mu: &Measure) -> Result<f64> {
    let mut denom = 1.0;
    for (s, f) in specs.iter().zip(fs) {
        let n = bergman_norm(f, &s.weight, s.p)?;
        if n == 0.0 {
            return Ok(0.0);
        }
        denom *= n.powf(s.q);
    }
    let factors: Vec<(&AnalyticFunction, f64)> = fs.iter().zip(specs).map(|(f, s)| (f, s.q)).collect();
    Ok(product_integral(&factors, mu)? / denom)
}

const SWEEPS: usize = 2;

/// Alternating ascent over `f_i`, `i >= first`, the others held fixed.
fn alternate(
    specs: &[FactorSpec],
    fs: &mut [AnalyticFunction],
    first: usize,
    mu: &Measure,
    space: &SearchSpace,
    budget: &Budget,
) -> Result<(f64, usize, bool)> {
    let mut best = quotient(specs, fs, mu)?;
    let free = specs.len() - first;
    if free == 0 {
        return Ok((best, 1, false));
    }
    let per_call = (budget.evaluations / (SWEEPS * free)).max(1);
    let (mut used, mut exhausted) = (1, false);
    for sweep in 0..SWEEPS {
        for j in first..specs.len() {
            let b = Budget {
                evaluations: per_call,
                seed: budget.seed.wrapping_add((sweep * specs.len() + j) as u64 * 1000),
            };
            let est = maximize(
                |g: &AnalyticFunction| {
                    let mut trial = fs.to_vec();
                    trial[j] = g.clone();
                    quotient(specs, &trial, mu)
                },
                space,
                &b,
            )?;
            used += est.evaluations;
            exhausted |= est.exhausted;
            if est.value > best {
                if let Some(w) = est.witness {
                    best = est.value;
                    fs[j] = w;
                }
            }
        }
    }
    Ok((best, used, exhausted))
}

fn check_specs(specs: &[FactorSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::param("at least one factor required"));
    }
    for s in specs {
        check_exponents(s.p, s.q)?;
    }
    Ok(())
}

/// `M_n = sup ∫ Π|f_i|^{q_i} dμ / Π ‖f_i‖^{q_i}` by alternating ascent,
/// with `λ`, the product weight and the reference embedding norm.
pub fn m_n_estimate(
    specs: &[FactorSpec],
    mu: &Measure,
    space: &SearchSpace,
    budget: &Budget,
) -> Result<MnEstimate> {
    check_specs(specs)?;
    let triples: Vec<(RadialWeight, f64, f64)> =
        specs.iter().map(|s| (s.weight.clone(), s.p, s.q)).collect();
    let (weight, lambda) = product_weight(&triples)?;
    let reference = embedding_norm(&weight, 1.0 / lambda, mu, 1.0, space, budget)?;
    if mu.is_zero() {
        return Ok(MnEstimate {
            value: 0.0,
            lambda,
            weight: weight.label().to_string(),
            witnesses: vec![None; specs.len()],
            reference,
            evaluations: 0,
            exhausted: false,
            lower_bound: true,
        });
    }
    // Start from the best diagonal candidate, every factor the same atom or
    // monomial; ascent from constants rarely finds joint concentration.
    let seeds: Vec<AnalyticFunction> = space
        .centers
        .iter()
        .map(|&a| kernel_atom(a, space.gamma, None).map(|(f, _)| f))
        .chain((0..=space.max_degree).map(|n| Ok(AnalyticFunction::monomial(n))))
        .collect::<Result<_>>()?;
    let scores = seeds
        .par_iter()
        .map(|g| quotient(specs, &vec![g.clone(); specs.len()], mu))
        .collect::<Result<Vec<f64>>>()?;
    let best = scores
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    let mut fs = vec![seeds[best].clone(); specs.len()];
    let (value, used, exhausted) = alternate(specs, &mut fs, 0, mu, space, budget)?;
    let evaluations = used + seeds.len();
    Ok(MnEstimate {
        value,
        lambda,
        weight: weight.label().to_string(),
        witnesses: fs.iter().map(|f| f.to_spec()).collect(),
        reference,
        evaluations,
        exhausted,
        lower_bound: true,
    })
}

/// `F(k)` for the null sequence `f_{1,k} = z^k / ‖z^k‖`.
#[derive(Debug, Clone, Serialize)]
pub struct NullSequenceReport {
    pub k: Vec<usize>,
    pub values: Vec<f64>,
    pub verdict: Verdict,
    /// Geometric mean of `F(k)/F(k-1)` over the second half of the run.
    pub decay_rate: Option<f64>,
}

pub fn vanishing_sequence_f(
    specs: &[FactorSpec],
    mu: &Measure,
    k_max: usize,
    space: &SearchSpace,
    budget: &Budget,
) -> Result<NullSequenceReport> {
    check_specs(specs)?;
    if k_max == 0 {
        return Err(Error::param("k_max must be at least 1"));
    }
    let ks: Vec<usize> = (1..=k_max).collect();
    let mut values = Vec::with_capacity(k_max);
    for &k in &ks {
        let mono = AnalyticFunction::monomial(k);
        let norm = bergman_norm(&mono, &specs[0].weight, specs[0].p)?;
        let mut fs = vec![AnalyticFunction::constant(1.0); specs.len()];
        fs[0] = mono.scaled(Complex64::new(1.0 / norm, 0.0));
        let b = Budget {
            evaluations: budget.evaluations,
            seed: budget.seed.wrapping_add(k as u64),
        };
        let (v, _, _) = alternate(specs, &mut fs, 1, mu, space, &b)?;
        values.push(v);
    }
    let verdict = Verdict::from_bool(sequence_decays(&values));
    let half = &values[values.len() / 2..];
    let decay_rate = (half.len() >= 2 && half.iter().all(|v| *v > 0.0)).then(|| {
        let logs: f64 = half.windows(2).map(|w| (w[1] / w[0]).ln()).sum();
        (logs / (half.len() - 1) as f64).exp()
    });
    Ok(NullSequenceReport {
        k: ks,
        values,
        verdict,
        decay_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_lattice;
    use approx::assert_relative_eq;

    fn std_w(a: f64) -> RadialWeight {
        RadialWeight::standard(a).unwrap()
    }

    fn small_grid() -> ShellGrid {
        ShellGrid::geometric(5)
    }

    #[test]
    fn quotient_examples() {
        let w = std_w(0.0);
        let mu = Measure::radial(w.clone());
        for z in [0.0, 0.3, 0.9] {
            let z = DiskPoint::real(z).unwrap();
            for kind in [RegionKind::Square, RegionKind::Disk { radius: 1.0 }] {
                let v = carleson_quotient(&mu, &w, z, kind, 1.0).unwrap();
                assert_relative_eq!(v, 1.0, max_relative = 1e-14);
            }
        }
        let atom = Measure::dirac(DiskPoint::ORIGIN, 1.0).unwrap();
        let z = DiskPoint::real(0.5).unwrap();
        assert_eq!(carleson_quotient(&atom, &w, z, RegionKind::Square, 1.0).unwrap(), 0.0);
        let a = carleson_quotient(&atom, &w, z, RegionKind::Disk { radius: 1.0 }, 1.5).unwrap();
        let b = carleson_quotient(&atom.scale(3.0).unwrap(), &w, z, RegionKind::Disk { radius: 1.0 }, 1.5)
            .unwrap();
        assert_eq!(b, 3.0 * a);
    }

    #[test]
    fn m0_identity_is_one_everywhere() {
        let w = std_w(1.0);
        let mu = Measure::radial(w.clone());
        let rep = m0_sup(&mu, &w, &w, &w, 2.0, 2.0, 1.0, &small_grid()).unwrap();
        assert!(rep.values.iter().all(|v| *v == 1.0));
        assert_eq!(rep.value, 1.0);
        assert!(m0_sup(&mu, &w, &w, &w, 3.0, 2.0, 1.0, &small_grid()).is_err());
    }

    #[test]
    fn m0_atom_matches_direct_search() {
        let w = std_w(0.0);
        let mu = Measure::dirac(DiskPoint::ORIGIN, 1.0).unwrap();
        let grid = small_grid();
        let rep = m0_sup(&mu, &w, &w, &w, 2.0, 2.0, 1.0, &grid).unwrap();
        // Independent oracle: 1/ω(D(z,1)) maximised over grid points whose
        // disk contains 0, i.e. β(z, 0) = atanh|z| <= 1.
        let mut best = 0.0f64;
        for &r in &grid.radii {
            if r.atanh() <= 1.0 {
                let d = crate::geometry::HyperbolicDisk::new(DiskPoint::real(r).unwrap(), 1.0).unwrap();
                best = best.max(1.0 / w.region_weight(&Region::Disk(d)));
            }
        }
        assert_relative_eq!(rep.value, best, max_relative = 1e-12);
        assert!(rep.witness.unwrap().modulus().atanh() <= 1.0);
    }

    #[test]
    fn vanishing_examples() {
        let w = std_w(0.0);
        let grid = small_grid();
        let id = vanishing_profile(&Measure::radial(w.clone()), &w, &w, &w, 2.0, 2.0, 1.0, &grid).unwrap();
        assert_eq!(id.verdict, Some(Verdict::NotVanishing));
        assert!(id.values.iter().all(|v| *v == 1.0));

        let decaying = Measure::power(0.5).unwrap();
        let rep = vanishing_profile(&decaying, &w, &w, &w, 2.0, 2.0, 1.0, &grid).unwrap();
        assert_eq!(rep.verdict, Some(Verdict::Vanishing));

        let pts = vec![DiskPoint::polar(0.5, 0.3).unwrap(), DiskPoint::real(-0.2).unwrap()];
        let atoms = Measure::atomic(pts, vec![1.0, 2.0]).unwrap();
        let rep = vanishing_profile(&atoms, &w, &w, &w, 2.0, 2.0, 0.5, &grid).unwrap();
        assert_eq!(rep.verdict, Some(Verdict::Vanishing));
        for (p, v) in rep.points.iter().zip(&rep.values) {
            if p.modulus() > 0.8 {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn decay_tests() {
        assert!(sequence_decays(&[0.0, 0.0]));
        assert!(!sequence_decays(&[1.0; 6]));
        assert!(sequence_decays(&[1.0, 0.5, 0.25, 0.125, 0.0625]));
        assert!(!sequence_decays(&[1.0, 0.5, 0.25, 0.25, 0.1]));
        assert!(sequence_decays(&[1.0, 1.0, 1e-4, 2e-4, 1e-4]));
        let radii: Vec<f64> = (0..8).map(|k| 1.0 - (-(k as f64)).exp2()).collect();
        let power: Vec<f64> = radii.iter().map(|r| (1.0 - r).powf(0.2)).collect();
        assert!(profile_decays(&radii, &power));
        // Converging to a positive constant is not decay.
        let settling: Vec<f64> = radii.iter().map(|r| 1.0 + 0.3 * (1.0 - r)).collect();
        assert!(!profile_decays(&radii, &settling));
    }

    #[test]
    fn lambda_sequence_behaviour() {
        let w = std_w(0.0);
        let lat = generate_lattice(0.5, 1.0, 1e-2).unwrap();
        // ωdA with (3,2): λ_j = ω(D_j)^{1/6}, summable.
        let id = lambda_seq_norm(&Measure::radial(w.clone()), &w, &w, &w, 3.0, 2.0, &lat, 1.0).unwrap();
        assert!(id.value.is_finite());
        assert!(!id.flags.contains(&Flag::DivergentUnderRefinement));
        for (z, v) in lat.points.iter().zip(&id.values) {
            let d = crate::geometry::HyperbolicDisk::new(*z, 1.0).unwrap();
            assert_relative_eq!(*v, w.region_weight(&Region::Disk(d)).powf(1.0 / 6.0), max_relative = 1e-12);
        }
        // (1-|z|)^{-1/3} dA makes λ_j comparable to 1.
        let heavy = Measure::power(-1.0 / 3.0).unwrap();
        let rep = lambda_seq_norm(&heavy, &w, &w, &w, 3.0, 2.0, &lat, 1.0).unwrap();
        assert!(rep.flags.contains(&Flag::DivergentUnderRefinement));
        let atoms = Measure::atomic(vec![DiskPoint::real(0.5).unwrap()], vec![2.0]).unwrap();
        let a = lambda_seq_norm(&atoms, &w, &w, &w, 3.0, 2.0, &lat, 1.0).unwrap();
        let b = lambda_seq_norm(&atoms.scale(0.5).unwrap(), &w, &w, &w, 3.0, 2.0, &lat, 1.0).unwrap();
        assert_relative_eq!(b.value, 0.5 * a.value, max_relative = 1e-12);
        assert!(matches!(
            lambda_seq_norm(&atoms, &w, &w, &w, 2.0, 2.0, &lat, 1.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn mu_hat_examples() {
        let w = std_w(0.0);
        let id = mu_hat_norm(&Measure::radial(w.clone()), &w, &w, &w, 3.0, 2.0, 1.0, DEFAULT_CUTOFF).unwrap();
        assert!(id.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        // ‖1‖ over |z| < 0.99 is (0.99^2)^{1/6}.
        assert_relative_eq!(id.value, 0.99f64.powf(2.0 / 6.0), max_relative = 1e-8);
        let zero = mu_hat_norm(&Measure::zero(), &w, &w, &w, 3.0, 2.0, 1.0, DEFAULT_CUTOFF).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn kernel_mean_matches_closed_form() {
        for x in [0.0, 0.3, 0.9, 0.99] {
            let y: f64 = x * x;
            assert_relative_eq!(
                circle_mean_kernel_pow(x, 4.0),
                (1.0 + y) / (1.0 - y).powi(3),
                max_relative = 1e-12
            );
            assert_relative_eq!(circle_mean_kernel_pow(x, 2.0), 1.0 / (1.0 - y), max_relative = 1e-12);
        }
        // Direct trapezoid for a non-integer exponent.
        let (x, g) = (0.7, 3.3);
        let n = 4096;
        let direct: f64 = (0..n)
            .map(|j| (Complex64::new(1.0, 0.0) - Complex64::from_polar(x, TAU * j as f64 / n as f64)).norm().powf(-g))
            .sum::<f64>()
            / n as f64;
        assert_relative_eq!(circle_mean_kernel_pow(x, g), direct, max_relative = 1e-12);
    }

    #[test]
    fn psi_atom_at_origin_is_one() {
        let w = std_w(0.0);
        let mu = Measure::dirac(DiskPoint::ORIGIN, 1.0).unwrap();
        let v = psi_value(&mu, &w, 4.0, DiskPoint::polar(0.6, 1.0).unwrap()).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-14);
        let rep = psi_norm(&mu, &w, 4.0, 3.0, 2.0, DEFAULT_CUTOFF).unwrap();
        // L_ω^3 norm of 1 over |z| < 0.99.
        assert_relative_eq!(rep.value, 0.99f64.powf(2.0 / 3.0), max_relative = 1e-8);
        assert_eq!(psi_norm(&Measure::zero(), &w, 4.0, 3.0, 2.0, DEFAULT_CUTOFF).unwrap().value, 0.0);
    }

    #[test]
    fn psi_radial_matches_density_path() {
        let w = std_w(0.0);
        let radial = Measure::power(0.5).unwrap();
        let dens = Measure::density("sqrt gap", |z| (1.0 - z.norm()).sqrt(), vec![]);
        let z = DiskPoint::polar(0.5, 0.4).unwrap();
        let a = psi_value(&radial, &w, 4.0, z).unwrap();
        let b = psi_value(&dens, &w, 4.0, z).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-9);
    }

    #[test]
    fn embedding_examples() {
        let w = std_w(0.0);
        let space = SearchSpace::standard(1e-2, 2, &[]);
        let budget = Budget::default();
        for m in [1.0, 4.0] {
            let mu = Measure::dirac(DiskPoint::ORIGIN, m).unwrap();
            let e = embedding_norm(&w, 2.0, &mu, 2.0, &space, &budget).unwrap();
            assert_relative_eq!(e.value, m.sqrt(), max_relative = 0.02);
        }
        let id = embedding_norm(&w, 2.0, &Measure::radial(w.clone()), 2.0, &space, &budget).unwrap();
        assert_relative_eq!(id.value, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn two_factor_desk_case() {
        let w = std_w(0.0);
        let specs = vec![
            FactorSpec { weight: w.clone(), p: 2.0, q: 2.0 },
            FactorSpec { weight: w.clone(), p: 2.0, q: 2.0 },
        ];
        let mu = Measure::dirac(DiskPoint::ORIGIN, 3.0).unwrap();
        let space = SearchSpace::standard(1e-2, 2, &[]);
        let est = m_n_estimate(&specs, &mu, &space, &Budget::default()).unwrap();
        assert_eq!(est.lambda, 2.0);
        assert!(est.value >= 0.95 * 3.0);
        assert!(est.reference.value >= 0.95 * 3.0);
        let r = est.value / est.reference.value;
        assert!((0.9..=1.1).contains(&r));
    }

    #[test]
    fn null_sequence_examples() {
        let w = std_w(0.0);
        let one = vec![FactorSpec { weight: w.clone(), p: 2.0, q: 2.0 }];
        let space = SearchSpace::standard(1e-1, 1, &[]);
        let budget = Budget { evaluations: 60, seed: 1 };
        let atom = Measure::dirac(DiskPoint::ORIGIN, 1.0).unwrap();
        let rep = vanishing_sequence_f(&one, &atom, 5, &space, &budget).unwrap();
        assert!(rep.values.iter().all(|v| *v == 0.0));
        assert_eq!(rep.verdict, Verdict::Vanishing);

        let id = vanishing_sequence_f(&one, &Measure::radial(w.clone()), 8, &space, &budget).unwrap();
        assert!(id.values.iter().all(|v| (v - 1.0).abs() < 1e-8), "{:?}", id.values);
        assert_eq!(id.verdict, Verdict::NotVanishing);

        let pts = vec![DiskPoint::real(0.5).unwrap(), DiskPoint::polar(0.4, 2.0).unwrap()];
        let compact = Measure::atomic(pts, vec![1.0, 1.0]).unwrap();
        let rep = vanishing_sequence_f(&one, &compact, 10, &space, &budget).unwrap();
        assert_eq!(rep.verdict, Verdict::Vanishing);
        assert!(rep.decay_rate.unwrap() < 0.3);
    }
}
