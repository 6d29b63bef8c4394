//! Reproducing kernels of `A_ω^2`, Bergman norms and the test-function
//! families built from kernels.

mod function;
mod rademacher;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{carleson_square, DiskPoint, HyperbolicDisk, Region};
use crate::weights::{doubling_profile, RadialWeight};

pub use function::{
    bergman_norm, bergman_norm_quadrature, disk_rings, inner_product_a2, lq_integral, product_integral,
    AnalyticFunction, FunctionSpec, KernelAtom, AtomSpec,
};
pub use rademacher::{
    kahane_ratio, khinchin_check, rademacher_combination, rademacher_eval, KhinchinResult,
};

/// Default truncation of kernel series.
pub const DEFAULT_TERMS: usize = 256;
/// Required relative accuracy of a truncated kernel evaluation.
pub const KERNEL_TOL: f64 = 1e-8;
/// Default exponent of kernel test atoms.
pub const DEFAULT_GAMMA: f64 = 4.0;

/// Truncated power series `B_z(ξ) = Σ k_n (z̄ξ)^n`, `k_n = 1/(2 ω_{2n+1})`.
#[derive(Debug, Clone)]
pub struct KernelSeries {
    weight: RadialWeight,
    coeffs: Vec<f64>,
}

/// `k_0..=k_n` of the kernel of `A_ω^2`.
pub fn kernel_coeffs(w: &RadialWeight, n: usize) -> Result<KernelSeries> {
    let coeffs = match w.standard_alpha() {
        // C(n+α+1, n) by the ratio recursion.
        Some(alpha) => {
            let mut c = Vec::with_capacity(n + 1);
            let mut k = 1.0;
            c.push(k);
            for j in 1..=n {
                k *= (j as f64 + alpha + 1.0) / j as f64;
                c.push(k);
            }
            c
        }
        None => (0..=n)
            .into_par_iter()
            .map(|j| w.moment(2.0 * j as f64 + 1.0).map(|m| 0.5 / m))
            .collect::<Result<Vec<f64>>>()?,
    };
    Ok(KernelSeries {
        weight: w.clone(),
        coeffs,
    })
}

impl KernelSeries {
    pub fn weight(&self) -> &RadialWeight {
        &self.weight
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Index of the last coefficient.
    pub fn truncation(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Largest successive coefficient ratio over the last terms.
    fn kappa(&self) -> f64 {
        let n = self.coeffs.len();
        let from = n.saturating_sub(16).max(1);
        (from..n)
            .map(|j| self.coeffs[j] / self.coeffs[j - 1])
            .fold(1.0, f64::max)
    }

    /// Bound on `Σ_{n>N} k_n ρ^n`; `None` when the geometric bound fails.
    pub fn tail_bound(&self, rho: f64) -> Option<f64> {
        let kr = self.kappa() * rho;
        if kr >= 1.0 {
            return None;
        }
        let n = self.truncation();
        Some(self.coeffs[n] * rho.powi(n as i32) * kr / (1.0 - kr))
    }

    fn partial_sum(&self, rho: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, k| acc * rho + k)
    }

    /// Whether the truncation meets [`KERNEL_TOL`] (relative) at `|z̄ξ| = ρ`.
    pub fn accurate_at(&self, rho: f64) -> bool {
        match self.tail_bound(rho) {
            Some(t) => t <= KERNEL_TOL * self.partial_sum(rho).max(1.0),
            None => false,
        }
    }

    /// Largest `ρ` at which the truncation is accurate.
    pub fn rho_max(&self) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.accurate_at(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Estimated truncation needed at `ρ`, from the observed polynomial
    /// growth of the coefficients.
    pub fn required_terms(&self, rho: f64) -> usize {
        if self.accurate_at(rho) {
            return self.truncation();
        }
        let n = self.truncation().max(2);
        let beta = (self.coeffs[n] / self.coeffs[n / 2]).ln() / 2f64.ln();
        let kn = self.coeffs[n];
        let sum = self.partial_sum(rho).max(1.0);
        let mut m = n;
        while m < (1 << 24) {
            m += (m / 32).max(1);
            let ratio = rho * (1.0 + beta.max(0.0) / m as f64);
            if ratio >= 1.0 {
                continue;
            }
            let km = kn * (m as f64 / n as f64).powf(beta.max(0.0));
            let bound = km * rho.powf(m as f64) * ratio / (1.0 - ratio);
            if bound <= KERNEL_TOL * sum {
                return m;
            }
        }
        1 << 24
    }

    /// Series evaluated at `x = z̄ξ` without an accuracy check.
    pub fn eval_at(&self, x: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &k| acc * x + k)
    }

    /// `B_z(ξ)`.
    pub fn eval(&self, z: Complex64, xi: Complex64) -> Result<Complex64> {
        let x = z.conj() * xi;
        let rho = x.norm();
        if !self.accurate_at(rho) {
            return Err(Error::Accuracy {
                message: format!(
                    "kernel series with {} terms is not accurate at |z̄ξ| = {rho}",
                    self.coeffs.len()
                ),
                required: self.required_terms(rho),
            });
        }
        Ok(self.eval_at(x))
    }
}

/// Checked evaluation of a truncated kernel.
pub fn kernel_eval(k: &KernelSeries, z: DiskPoint, xi: DiskPoint) -> Result<Complex64> {
    k.eval(z.z(), xi.z())
}

/// `(1 - z̄ξ)^{-(2+α)}`, the kernel of the standard weight.
pub fn standard_kernel(alpha: f64, z: Complex64, xi: Complex64) -> Complex64 {
    let w = Complex64::new(1.0, 0.0) - z.conj() * xi;
    let gamma = 2.0 + alpha;
    if gamma.fract() == 0.0 && gamma.abs() < 64.0 {
        w.powi(-(gamma as i32))
    } else {
        w.powf(-gamma)
    }
}

/// `B_z^ω` as an analytic function of `ξ`. For standard weights this is the
/// single atom `(1-|z|^2)^{-γ} F_z` with `γ = 2 + α`; otherwise a series
/// truncated so that it is accurate on the closed disk.
pub fn bergman_kernel_function(w: &RadialWeight, z: DiskPoint) -> Result<AnalyticFunction> {
    kernel_combination(w, &[z], &[Complex64::new(1.0, 0.0)])
}

/// `Σ c_j B_{z_j}^ω`.
pub fn kernel_combination(
    w: &RadialWeight,
    points: &[DiskPoint],
    coeffs: &[Complex64],
) -> Result<AnalyticFunction> {
    if points.len() != coeffs.len() {
        return Err(Error::param("one coefficient per kernel point required"));
    }
    if let Some(alpha) = w.standard_alpha() {
        let gamma = 2.0 + alpha;
        let atoms = points
            .iter()
            .zip(coeffs)
            .map(|(a, c)| KernelAtom {
                a: *a,
                c: c * (1.0 - a.z().norm_sqr()).powf(-gamma),
                gamma,
            })
            .collect();
        return Ok(AnalyticFunction::atoms(atoms));
    }
    let rho = points.iter().map(|p| p.modulus()).fold(0.0, f64::max);
    let probe = kernel_coeffs(w, DEFAULT_TERMS)?;
    let n = probe.required_terms(rho).max(DEFAULT_TERMS);
    let series = if n > DEFAULT_TERMS {
        kernel_coeffs(w, n)?
    } else {
        probe
    };
    Ok(AnalyticFunction::kernels(
        series,
        points.iter().map(|p| p.z()).collect(),
        coeffs.to_vec(),
    ))
}

/// `‖B_z^ω‖_{A_η^p} / (η(S_z)^{1/p} / ω(S_z))`.
pub fn kernel_norm_ratio(
    omega: &RadialWeight,
    eta: &RadialWeight,
    p: f64,
    z: DiskPoint,
) -> Result<f64> {
    let b = bergman_kernel_function(omega, z)?;
    let norm = bergman_norm(&b, eta, p)?;
    let sq = Region::Square(carleson_square(z));
    let denom = eta.region_weight(&sq).powf(1.0 / p) / omega.region_weight(&sq);
    Ok(norm / denom)
}

/// Smallest γ for which kernel atoms are considered safe for `w`:
/// `2 + log2` of the boundary doubling ratio of `ω̂`.
pub fn gamma_min(w: &RadialWeight) -> Result<f64> {
    let r = 1.0 - (-20f64).exp2();
    let prof = doubling_profile(w, &[r])?;
    Ok(2.0 + prof.ratios[0].log2())
}

/// Kernel atom `F_a = ((1-|a|^2)/(1-āz))^γ`, optionally normalised in
/// `A_w^p`. The flag is set when γ is below [`gamma_min`] for that weight.
pub fn kernel_atom(
    a: DiskPoint,
    gamma: f64,
    normalize_in: Option<(&RadialWeight, f64)>,
) -> Result<(AnalyticFunction, bool)> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param(format!("atom exponent must be positive, got {gamma}")));
    }
    let f = AnalyticFunction::atoms(vec![KernelAtom {
        a,
        c: Complex64::new(1.0, 0.0),
        gamma,
    }]);
    match normalize_in {
        None => Ok((f, false)),
        Some((w, p)) => {
            let low = gamma < gamma_min(w)?;
            let norm = bergman_norm(&f, w, p)?;
            Ok((f.scaled(Complex64::new(1.0 / norm, 0.0)), low))
        }
    }
}

/// Range of `|B_z(ξ)| / B_z(z)` over sample points of `D(z, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparabilityWindow {
    pub min: f64,
    pub max: f64,
}

pub fn local_comparability(w: &RadialWeight, z: DiskPoint, r: f64) -> Result<ComparabilityWindow> {
    let disk = HyperbolicDisk::new(z, r)?;
    let b = bergman_kernel_function(w, z)?;
    let center = b.eval(z.z()).re;
    let (mut min, mut max) = (f64::INFINITY, 0.0f64);
    for i in 0..=8 {
        let rad = disk.rho * i as f64 / 8.0 * (1.0 - 1e-12);
        for j in 0..32 {
            let xi = disk.c + Complex64::from_polar(rad, std::f64::consts::TAU * j as f64 / 32.0);
            let v = b.eval(xi).norm() / center;
            min = min.min(v);
            max = max.max(v);
        }
    }
    Ok(ComparabilityWindow { min, max })
}

/// `‖Σ c_j B_{z_j}/‖B_{z_j}‖_{A_η^p}‖_{A_η^p} / ‖c‖_{ℓ^p}`.
pub fn kernel_sum_ratio(
    omega: &RadialWeight,
    eta: &RadialWeight,
    p: f64,
    points: &[DiskPoint],
    c: &[Complex64],
) -> Result<f64> {
    let norms = points
        .iter()
        .map(|z| bergman_kernel_function(omega, *z).and_then(|b| bergman_norm(&b, eta, p)))
        .collect::<Result<Vec<f64>>>()?;
    let scaled: Vec<Complex64> = c.iter().zip(&norms).map(|(c, n)| c / n).collect();
    let f = kernel_combination(omega, points, &scaled)?;
    let lp = c.iter().map(|c| c.norm().powf(p)).sum::<f64>().powf(1.0 / p);
    Ok(bergman_norm(&f, eta, p)? / lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn std_w(a: f64) -> RadialWeight {
        RadialWeight::standard(a).unwrap()
    }

    #[test]
    fn coefficient_examples() {
        let k = kernel_coeffs(&std_w(0.0), 10).unwrap();
        assert_eq!(k.coeffs()[3], 4.0);
        let k = kernel_coeffs(&std_w(1.0), 10).unwrap();
        assert_eq!(k.coeffs()[1], 3.0);
        assert_eq!(k.coeffs()[0], 1.0);
    }

    #[test]
    fn generic_coefficients_match_binomials() {
        // Same profile as standard(1) but without the closed form.
        let w = RadialWeight::from_fn("2(1-r^2)", |r| 2.0 * (1.0 - r * r)).unwrap();
        let generic = kernel_coeffs(&w, 40).unwrap();
        let exact = kernel_coeffs(&std_w(1.0), 40).unwrap();
        for (a, b) in generic.coeffs().iter().zip(exact.coeffs()) {
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }

    #[test]
    fn eval_examples() {
        let k = kernel_coeffs(&std_w(0.0), DEFAULT_TERMS).unwrap();
        let o = DiskPoint::ORIGIN;
        assert_eq!(kernel_eval(&k, o, o).unwrap(), Complex64::new(1.0, 0.0));
        let h = DiskPoint::real(0.5).unwrap();
        assert_relative_eq!(kernel_eval(&k, h, h).unwrap().re, 16.0 / 9.0, max_relative = 1e-12);
        let a = DiskPoint::polar(0.7, 0.3).unwrap();
        let b = DiskPoint::polar(0.4, -2.0).unwrap();
        let ab = kernel_eval(&k, a, b).unwrap();
        let ba = kernel_eval(&k, b, a).unwrap();
        assert_relative_eq!(ab.re, ba.re, max_relative = 1e-14);
        assert_relative_eq!(ab.im, -ba.im, max_relative = 1e-14);
    }

    #[test]
    fn accuracy_error_carries_hint() {
        let k = kernel_coeffs(&std_w(0.0), 32).unwrap();
        let z = DiskPoint::real(0.99).unwrap();
        match kernel_eval(&k, z, z) {
            Err(Error::Accuracy { required, .. }) => {
                assert!(required > 32);
                let k2 = kernel_coeffs(&std_w(0.0), required).unwrap();
                assert!(k2.accurate_at(0.99 * 0.99));
            }
            other => panic!("expected accuracy error, got {other:?}"),
        }
    }

    #[test]
    fn kernel_atom_examples() {
        let (f, _) = kernel_atom(DiskPoint::ORIGIN, 4.0, None).unwrap();
        assert_eq!(f.eval(Complex64::new(0.3, 0.2)), Complex64::new(1.0, 0.0));
        let (f, _) = kernel_atom(DiskPoint::real(0.5).unwrap(), 4.0, None).unwrap();
        assert_relative_eq!(f.eval(Complex64::new(0.0, 0.0)).re, 0.31640625, max_relative = 1e-15);
        let w = std_w(0.0);
        let (g, low) = kernel_atom(DiskPoint::real(0.5).unwrap(), 4.0, Some((&w, 2.0))).unwrap();
        assert!(!low);
        assert_relative_eq!(bergman_norm(&g, &w, 2.0).unwrap(), 1.0, max_relative = 1e-10);
        assert!(kernel_atom(DiskPoint::ORIGIN, 0.0, None).is_err());
    }

    #[test]
    fn kernel_norm_ratio_examples() {
        let w = std_w(0.0);
        assert_relative_eq!(
            kernel_norm_ratio(&w, &w, 2.0, DiskPoint::ORIGIN).unwrap(),
            1.0,
            max_relative = 1e-10
        );
        let z = DiskPoint::real(0.5).unwrap();
        let sq = 0.25 * 1.5 / (2.0 * std::f64::consts::PI.powi(2));
        let expected = (4.0 / 3.0) / (sq.sqrt() / sq);
        assert_relative_eq!(kernel_norm_ratio(&w, &w, 2.0, z).unwrap(), expected, max_relative = 1e-8);
    }

    #[test]
    fn gamma_min_of_standard_weights() {
        assert_relative_eq!(gamma_min(&std_w(0.0)).unwrap(), 3.0, max_relative = 1e-6);
        assert_relative_eq!(gamma_min(&std_w(1.0)).unwrap(), 4.0, max_relative = 1e-5);
    }
}
