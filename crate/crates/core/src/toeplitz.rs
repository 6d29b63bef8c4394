//! Toeplitz operators `T_μ^ω f(z) = ∫ f(ξ) conj(B_z^ω(ξ)) dμ(ξ)`.

use std::f64::consts::TAU;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{maximize, refine_with, Budget, Method, NormEstimate, SearchSpace};
use crate::geometry::DiskPoint;
use crate::kernel::{
    bergman_norm, kernel_coeffs, kernel_combination, standard_kernel, AnalyticFunction,
    KernelSeries, DEFAULT_TERMS,
};
use crate::measures::{ring_nodes, Measure, MeasureNodes};
use crate::weights::{RadialWeight, Support};

/// Default Galerkin basis size.
pub const DEFAULT_BASIS: usize = 64;
const MAX_BASIS: usize = 1024;
/// Taylor degree of `T f` for non-radial densities.
const DENSITY_DEGREE: usize = 96;

/// Whether two weights define the same function (same object or equal
/// standard parameters).
pub fn same_weight(a: &RadialWeight, b: &RadialWeight) -> bool {
    a.same(b)
        || matches!((a.standard_alpha(), b.standard_alpha()), (Some(x), Some(y)) if x == y)
}

enum Kind {
    Atomic {
        points: Vec<DiskPoint>,
        masses: Vec<f64>,
        /// `G[j][k] = B_{ξ_k}(ξ_j)`.
        gram: OnceLock<Result<DMatrix<Complex64>>>,
    },
    Radial {
        weight: RadialWeight,
        scale: f64,
        support: Support,
        multipliers: Mutex<Vec<f64>>,
    },
    Density,
}

/// `T_μ^ω` with per-operator caches.
pub struct ToeplitzOperator {
    mu: Measure,
    omega: RadialWeight,
    kind: Kind,
    /// `ω_{2n+1}`, cached.
    omega_moments: Mutex<Vec<f64>>,
}

impl ToeplitzOperator {
    pub fn new(mu: &Measure, omega: &RadialWeight) -> Result<Self> {
        if !omega.is_integrable() {
            return Err(Error::NonIntegrable(omega.label().to_string()));
        }
        let kind = match mu {
            Measure::Atomic { points, masses } => Kind::Atomic {
                points: points.clone(),
                masses: masses.clone(),
                gram: OnceLock::new(),
            },
            Measure::Radial {
                weight,
                scale,
                support,
            } => Kind::Radial {
                weight: weight.clone(),
                scale: *scale,
                support: *support,
                multipliers: Mutex::new(Vec::new()),
            },
            Measure::Density { .. } => Kind::Density,
        };
        Ok(Self {
            mu: mu.clone(),
            omega: omega.clone(),
            kind,
            omega_moments: Mutex::new(Vec::new()),
        })
    }

    pub fn measure(&self) -> &Measure {
        &self.mu
    }

    pub fn weight(&self) -> &RadialWeight {
        &self.omega
    }

    /// `ω_{2n+1}` for `n < count`.
    fn omega_moments(&self, count: usize) -> Result<Vec<f64>> {
        let mut cache = self.omega_moments.lock().expect("moment cache poisoned");
        if cache.len() < count {
            let start = cache.len();
            let more: Vec<f64> = match self.omega.standard_alpha() {
                Some(_) => kernel_coeffs(&self.omega, count - 1)?.coeffs()[start..]
                    .iter()
                    .map(|k| 0.5 / k)
                    .collect(),
                None => (start..count)
                    .into_par_iter()
                    .map(|n| self.omega.moment(2.0 * n as f64 + 1.0))
                    .collect::<Result<Vec<f64>>>()?,
            };
            cache.extend(more);
        }
        Ok(cache[..count].to_vec())
    }

    /// Diagonal multipliers `T z^n = c_n z^n` of a radial measure.
    pub fn multipliers(&self, count: usize) -> Result<Option<Vec<f64>>> {
        let Kind::Radial {
            weight,
            scale,
            support,
            multipliers,
        } = &self.kind
        else {
            return Ok(None);
        };
        let om = self.omega_moments(count)?;
        let mut cache = multipliers.lock().expect("multiplier cache poisoned");
        if cache.len() < count {
            let start = cache.len();
            let more: Vec<f64> = (start..count)
                .into_par_iter()
                .map(|n| {
                    let x = 2 * n as i32 + 1;
                    let m = if support.lo == 0.0 && support.hi >= 1.0 {
                        weight.moment(x as f64)?
                    } else if support.is_empty() {
                        0.0
                    } else {
                        weight.interval_integral(support.lo, support.hi, |s| s.powi(x))
                    };
                    Ok(scale * m / om[n])
                })
                .collect::<Result<Vec<f64>>>()?;
            cache.extend(more);
        }
        Ok(Some(cache[..count].to_vec()))
    }

    /// Kernel values `B_{ξ_k}(z)` for the operator's weight.
    fn kernel_values(&self, z: Complex64, points: &[DiskPoint], series: Option<&KernelSeries>) -> Vec<Complex64> {
        points
            .iter()
            .map(|p| match self.omega.standard_alpha() {
                Some(alpha) => standard_kernel(alpha, p.z(), z),
                None => series.expect("series for generic weight").eval_at(p.z().conj() * z),
            })
            .collect()
    }

    fn series_for(&self, points: &[DiskPoint]) -> Result<Option<KernelSeries>> {
        if self.omega.standard_alpha().is_some() {
            return Ok(None);
        }
        let r = points.iter().map(|p| p.modulus()).fold(0.0, f64::max);
        let probe = kernel_coeffs(&self.omega, DEFAULT_TERMS)?;
        let n = probe.required_terms(r * r).max(DEFAULT_TERMS);
        Ok(Some(if n > DEFAULT_TERMS {
            kernel_coeffs(&self.omega, n)?
        } else {
            probe
        }))
    }

    fn gram(&self) -> Result<&DMatrix<Complex64>> {
        let Kind::Atomic { points, gram, .. } = &self.kind else {
            return Err(Error::Internal("Gram matrix requested for a non-atomic measure".into()));
        };
        let g = gram.get_or_init(|| {
            let series = self.series_for(points)?;
            let k = points.len();
            let rows: Vec<Vec<Complex64>> = points
                .par_iter()
                .map(|xj| self.kernel_values(xj.z(), points, series.as_ref()))
                .collect();
            Ok(DMatrix::from_fn(k, k, |j, l| rows[j][l]))
        });
        match g {
            Ok(m) => Ok(m),
            Err(e) => Err(Error::Internal(format!("kernel Gram matrix: {e}"))),
        }
    }

    /// Coefficients `m_k f(ξ_k)` of `T f = Σ c_k B_{ξ_k}` for atomic measures.
    fn atomic_coeffs(&self, f: &AnalyticFunction) -> Option<Vec<Complex64>> {
        match &self.kind {
            Kind::Atomic { points, masses, .. } => Some(
                points
                    .iter()
                    .zip(masses)
                    .map(|(p, m)| f.eval(p.z()) * *m)
                    .collect(),
            ),
            _ => None,
        }
    }

    /// `T f` as an analytic function.
    pub fn apply(&self, f: &AnalyticFunction) -> Result<AnalyticFunction> {
        if self.mu.is_zero() {
            return Ok(AnalyticFunction::constant(0.0));
        }
        match &self.kind {
            Kind::Atomic { points, .. } => {
                let c = self.atomic_coeffs(f).expect("atomic operator");
                kernel_combination(&self.omega, points, &c)
            }
            Kind::Radial { .. } => {
                let t = f.taylor().ok_or_else(|| Error::Accuracy {
                    message: "input has no finite Taylor expansion".into(),
                    required: 1 << 17,
                })?;
                let c = self.multipliers(t.len())?.expect("radial operator");
                let out: Vec<Complex64> = t.iter().zip(&c).map(|(a, c)| a * c).collect();
                Ok(AnalyticFunction::monomials(out).with_concentration(f.concentration()))
            }
            Kind::Density => self.apply_density(f),
        }
    }

    fn apply_density(&self, f: &AnalyticFunction) -> Result<AnalyticFunction> {
        let Measure::Density {
            density,
            scale,
            support,
        } = &self.mu
        else {
            unreachable!("density operator without density measure")
        };
        let d = DENSITY_DEGREE;
        let om = self.omega_moments(d + 1)?;
        let rings = ring_nodes(*support, &density.hints, |_| *scale);
        let parts: Vec<Vec<Complex64>> = rings
            .par_iter()
            .map(|r| {
                let n = f.angles_for(r.s).max(2 * (d + 1)).next_power_of_two();
                let mut v = f.sample_circle(r.s, n);
                for (j, x) in v.iter_mut().enumerate() {
                    *x *= (density.f)(Complex64::from_polar(r.s, TAU * j as f64 / n as f64));
                }
                FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut v);
                let mut pw = r.weight;
                (0..=d)
                    .map(|k| {
                        let c = v[k] / n as f64 * pw;
                        pw *= r.s;
                        c
                    })
                    .collect()
            })
            .collect();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); d + 1];
        for p in &parts {
            for (c, x) in coeffs.iter_mut().zip(p) {
                *c += x;
            }
        }
        for (n, c) in coeffs.iter_mut().enumerate() {
            *c *= 0.5 / om[n];
        }
        Ok(AnalyticFunction::monomials(coeffs))
    }

    /// `‖T f‖_{A_υ^q}`, exact through the kernel Gram matrix when possible.
    pub fn image_norm(&self, f: &AnalyticFunction, upsilon: &RadialWeight, q: f64) -> Result<f64> {
        if self.mu.is_zero() {
            return Ok(0.0);
        }
        if q == 2.0 && same_weight(upsilon, &self.omega) {
            if let Some(c) = self.atomic_coeffs(f) {
                let g = self.gram()?;
                let v = DVector::from_vec(c);
                let q = (v.adjoint() * g * &v)[(0, 0)].re;
                return Ok(q.max(0.0).sqrt());
            }
        }
        bergman_norm(&self.apply(f)?, upsilon, q)
    }

    /// Galerkin matrix `⟨T e_n, e_m⟩` in the orthonormal monomials.
    pub fn matrix(&self, m: usize) -> Result<DMatrix<Complex64>> {
        if m == 0 {
            return Err(Error::param("basis size must be positive"));
        }
        let om = self.omega_moments(m)?;
        let norm: Vec<f64> = om.iter().map(|w| (0.5 / w).sqrt()).collect();
        match &self.kind {
            Kind::Atomic { points, masses, .. } => {
                let mut t = DMatrix::zeros(m, m);
                for (p, mass) in points.iter().zip(masses) {
                    let mut pw = Vec::with_capacity(m);
                    let mut x = Complex64::new(1.0, 0.0);
                    for nk in &norm {
                        pw.push(x * nk);
                        x *= p.z();
                    }
                    for r in 0..m {
                        for c in 0..m {
                            t[(r, c)] += pw[c] * pw[r].conj() * *mass;
                        }
                    }
                }
                Ok(t)
            }
            Kind::Radial { .. } => {
                let c = self.multipliers(m)?.expect("radial operator");
                Ok(DMatrix::from_fn(m, m, |r, k| {
                    if r == k {
                        Complex64::new(c[r], 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                }))
            }
            Kind::Density => {
                let MeasureNodes::Rings { rings, angular } = self.mu.nodes() else {
                    unreachable!("density measure has ring nodes")
                };
                let dens = angular.expect("density factor");
                let n = (4 * m).next_power_of_two();
                let mut t = DMatrix::zeros(m, m);
                for r in &rings {
                    let mut v: Vec<Complex64> = (0..n)
                        .map(|j| Complex64::new(dens(Complex64::from_polar(r.s, TAU * j as f64 / n as f64)), 0.0))
                        .collect();
                    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut v);
                    // mean(ρ e^{i(c-r)θ}) is the Fourier coefficient at r - c.
                    for row in 0..m {
                        for col in 0..m {
                            let idx = (row as i64 - col as i64).rem_euclid(n as i64) as usize;
                            let f = v[idx] / n as f64;
                            t[(row, col)] += f
                                * r.weight
                                * r.s.powi((row + col) as i32)
                                * norm[row]
                                * norm[col];
                        }
                    }
                }
                Ok(t)
            }
        }
    }
}

fn top_eigen(h: &DMatrix<Complex64>) -> (f64, DVector<Complex64>) {
    let eig = h.clone().symmetric_eigen();
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    (val, eig.eigenvectors.column(idx).into_owned())
}

/// Norm on `A_ω^2` (equal weights, `p = q = 2`): kernel Gram spectrum for
/// atoms, largest multiplier for radial measures, Galerkin spectrum with
/// basis doubling otherwise.
pub fn toeplitz_norm_exact_22(op: &ToeplitzOperator, m: usize) -> Result<NormEstimate> {
    if op.mu.is_zero() {
        return Ok(NormEstimate::zero());
    }
    match &op.kind {
        Kind::Atomic { points, masses, .. } => {
            let g = op.gram()?;
            let k = points.len();
            let sq: Vec<f64> = masses.iter().map(|m| m.sqrt()).collect();
            let h = DMatrix::from_fn(k, k, |j, l| g[(j, l)] * sq[j] * sq[l]);
            let (val, vec) = top_eigen(&h);
            let coeffs: Vec<Complex64> = vec.iter().zip(&sq).map(|(v, s)| v * *s).collect();
            let witness = kernel_combination(&op.omega, points, &coeffs)?;
            Ok(NormEstimate::exact(val.max(0.0), Some(witness), Method::Spectral))
        }
        Kind::Radial { .. } => {
            let mut size = m.max(1);
            let mut prev = f64::NAN;
            loop {
                let c = op.multipliers(size)?.expect("radial operator");
                let (n, v) = c
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
                if (v - prev).abs() <= 1e-8 * v.abs() || size >= MAX_BASIS * 8 {
                    let mut est =
                        NormEstimate::exact(v, Some(AnalyticFunction::monomial(n)), Method::Spectral);
                    est.lower_bound = (v - prev).abs() > 1e-8 * v.abs();
                    return Ok(est);
                }
                prev = v;
                size *= 2;
            }
        }
        Kind::Density => {
            let mut size = m.max(1);
            let mut prev = f64::NAN;
            loop {
                let t = op.matrix(size)?;
                let (val, vec) = top_eigen(&t);
                let converged = (val - prev).abs() <= 1e-8 * val.abs();
                if converged || size >= MAX_BASIS {
                    let om = op.omega_moments(size)?;
                    let coeffs: Vec<Complex64> = vec
                        .iter()
                        .zip(&om)
                        .map(|(v, w)| v * (0.5 / w).sqrt())
                        .collect();
                    let mut est = NormEstimate::exact(
                        val,
                        Some(AnalyticFunction::monomials(coeffs)),
                        Method::Spectral,
                    );
                    est.lower_bound = !converged;
                    return Ok(est);
                }
                prev = val;
                size *= 2;
            }
        }
    }
}

/// Norm of `T` compressed to the first `m` orthonormal monomials on
/// `A_ω^2`: a lower bound resolving `μ` down to scale `1 - |z| ≈ 1/m`.
pub fn toeplitz_norm_galerkin(op: &ToeplitzOperator, m: usize) -> Result<NormEstimate> {
    if op.mu.is_zero() {
        return Ok(NormEstimate::zero());
    }
    let (val, vec) = top_eigen(&op.matrix(m)?);
    let om = op.omega_moments(m)?;
    let coeffs: Vec<Complex64> = vec.iter().zip(&om).map(|(v, w)| v * (0.5 / w).sqrt()).collect();
    let mut est = NormEstimate::exact(val.max(0.0), Some(AnalyticFunction::monomials(coeffs)), Method::Spectral);
    est.lower_bound = true;
    Ok(est)
}

/// Ratio `‖T f‖_{A_υ^q} / ‖f‖_{A_η^p}` maximised over test functions, with
/// a few steps of power iteration from the best witness.
pub fn toeplitz_norm_estimate(
    op: &ToeplitzOperator,
    eta: &RadialWeight,
    upsilon: &RadialWeight,
    p: f64,
    q: f64,
    space: &SearchSpace,
    budget: &Budget,
) -> Result<NormEstimate> {
    if !(p > 1.0 && q > 1.0 && p.is_finite() && q.is_finite()) {
        return Err(Error::param(format!("Toeplitz exponents need 1 < p, q < ∞, got ({p}, {q})")));
    }
    if op.mu.is_zero() {
        return Ok(NormEstimate::zero());
    }
    let objective = |f: &AnalyticFunction| -> Result<f64> {
        let denom = bergman_norm(f, eta, p)?;
        if denom == 0.0 {
            return Ok(0.0);
        }
        Ok(op.image_norm(f, upsilon, q)? / denom)
    };
    let est = maximize(objective, space, budget)?;
    let mut cands = Vec::new();
    if let Some(w) = &est.witness {
        let mut f = w.clone();
        for _ in 0..4 {
            f = op.apply(&f)?;
            if f.is_zero() {
                break;
            }
            cands.push(f.clone());
        }
    }
    refine_with(est, objective, cands)
}

/// Tail-norm curve `s ↦ ‖T_{μ_s}‖` with a decay verdict.
#[derive(Debug, Clone, Serialize)]
pub struct CompactnessProfile {
    pub radii: Vec<f64>,
    pub norms: Vec<f64>,
    pub compact_consistent: bool,
}

pub fn compactness_profile(
    mu: &Measure,
    omega: &RadialWeight,
    eta: &RadialWeight,
    upsilon: &RadialWeight,
    p: f64,
    q: f64,
    radii: &[f64],
    space: &SearchSpace,
    budget: &Budget,
) -> Result<CompactnessProfile> {
    let norms = radii
        .iter()
        .map(|&s| {
            let (tail, _) = mu.restrict_tail(s)?;
            let op = ToeplitzOperator::new(&tail, omega)?;
            if p == 2.0 && q == 2.0 && same_weight(eta, omega) && same_weight(upsilon, omega) {
                toeplitz_norm_exact_22(&op, DEFAULT_BASIS).map(|e| e.value)
            } else {
                toeplitz_norm_estimate(&op, eta, upsilon, p, q, space, budget).map(|e| e.value)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let compact_consistent = crate::carleson::profile_decays(radii, &norms);
    Ok(CompactnessProfile {
        radii: radii.to_vec(),
        norms,
        compact_consistent,
    })
}
