use std::cell::RefCell;
use std::f64::consts::TAU;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::KernelSeries;
use crate::error::{Error, Result};
use crate::geometry::DiskPoint;
use crate::measures::{ring_nodes, Measure, MeasureNodes, Ring};
use crate::quad::pow2_clamped;
use crate::weights::{RadialWeight, Support};

const MAX_ANGLES: usize = 1 << 16;
const MAX_TAYLOR: usize = 1 << 17;
/// Sums of more atoms than this are sampled through their Taylor series.
const DIRECT_ATOMS: usize = 4;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// `c ((1-|a|^2)/(1-āz))^γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelAtom {
    pub a: DiskPoint,
    pub c: Complex64,
    pub gamma: f64,
}

impl KernelAtom {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let a = self.a.z();
        let base = (1.0 - a.norm_sqr()) / (Complex64::new(1.0, 0.0) - a.conj() * z);
        self.c * cpow(base, self.gamma)
    }

    /// `sup_𝔻 |atom| <= |c| (1+|a|)^γ`.
    fn sup_bound(&self) -> f64 {
        self.c.norm() * (1.0 + self.a.modulus()).powf(self.gamma)
    }
}

fn cpow(w: Complex64, gamma: f64) -> Complex64 {
    if gamma.fract() == 0.0 && gamma.abs() < 64.0 {
        w.powi(gamma as i32)
    } else {
        w.powf(gamma)
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Monomial(Vec<Complex64>),
    Atoms(Vec<KernelAtom>),
    Kernels {
        series: Arc<KernelSeries>,
        points: Vec<Complex64>,
        coeffs: Vec<Complex64>,
    },
}

/// An analytic function on the disk with a finite description.
#[derive(Debug, Clone)]
pub struct AnalyticFunction {
    repr: Repr,
    taylor: OnceLock<Option<Arc<Vec<Complex64>>>>,
    /// Known concentration radius of a long Taylor polynomial.
    concentration: Option<f64>,
}

impl AnalyticFunction {
    fn from_repr(repr: Repr) -> Self {
        Self {
            repr,
            taylor: OnceLock::new(),
            concentration: None,
        }
    }

    /// Declares that the function varies on the scale `1 - s·c` on circles of
    /// radius `s` (used for long polynomials derived from kernel atoms).
    pub fn with_concentration(mut self, c: f64) -> Self {
        self.concentration = Some(c);
        self
    }

    /// `Σ c_n z^n`.
    pub fn monomials(coeffs: Vec<Complex64>) -> Self {
        Self::from_repr(Repr::Monomial(coeffs))
    }

    /// `z^n`.
    pub fn monomial(n: usize) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
        c[n] = Complex64::new(1.0, 0.0);
        Self::monomials(c)
    }

    pub fn constant(c: f64) -> Self {
        Self::monomials(vec![Complex64::new(c, 0.0)])
    }

    pub fn atoms(atoms: Vec<KernelAtom>) -> Self {
        Self::from_repr(Repr::Atoms(atoms))
    }

    /// `Σ c_j B_{ξ_j}` with a fixed truncated series.
    pub fn kernels(series: KernelSeries, points: Vec<Complex64>, coeffs: Vec<Complex64>) -> Self {
        Self::from_repr(Repr::Kernels {
            series: Arc::new(series),
            points,
            coeffs,
        })
    }

    pub fn is_zero(&self) -> bool {
        match &self.repr {
            Repr::Monomial(c) => c.iter().all(|c| c.norm() == 0.0),
            Repr::Atoms(a) => a.iter().all(|a| a.c.norm() == 0.0),
            Repr::Kernels { coeffs, .. } => coeffs.iter().all(|c| c.norm() == 0.0),
        }
    }

    /// JSON description, unavailable for general kernel series.
    pub fn to_spec(&self) -> Option<FunctionSpec> {
        match &self.repr {
            Repr::Monomial(c) => {
                let nonzero = c.iter().filter(|x| x.norm() > 0.0).count();
                Some(if 4 * nonzero < c.len() {
                    FunctionSpec::Terms {
                        terms: c.iter().enumerate().filter(|(_, x)| x.norm() > 0.0).map(|(n, x)| (n, *x)).collect(),
                    }
                } else {
                    FunctionSpec::Monomial { coeffs: c.clone() }
                })
            }
            Repr::Atoms(a) => Some(FunctionSpec::Atoms {
                atoms: a
                    .iter()
                    .map(|a| AtomSpec {
                        a: a.a,
                        c: a.c,
                        gamma: a.gamma,
                    })
                    .collect(),
            }),
            Repr::Kernels { .. } => None,
        }
    }

    /// Monomial coefficients when the function is a polynomial.
    pub fn monomial_coeffs(&self) -> Option<&[Complex64]> {
        match &self.repr {
            Repr::Monomial(c) => Some(c),
            _ => None,
        }
    }

    pub fn kernel_atoms(&self) -> Option<&[KernelAtom]> {
        match &self.repr {
            Repr::Atoms(a) => Some(a),
            _ => None,
        }
    }

    /// `c f`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let repr = match &self.repr {
            Repr::Monomial(v) => Repr::Monomial(v.iter().map(|x| x * c).collect()),
            Repr::Atoms(v) => Repr::Atoms(
                v.iter()
                    .map(|a| KernelAtom { c: a.c * c, ..*a })
                    .collect(),
            ),
            Repr::Kernels {
                series,
                points,
                coeffs,
            } => Repr::Kernels {
                series: series.clone(),
                points: points.clone(),
                coeffs: coeffs.iter().map(|x| x * c).collect(),
            },
        };
        let mut out = Self::from_repr(repr);
        out.concentration = self.concentration;
        out
    }

    /// `f(z)`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        match &self.repr {
            Repr::Monomial(c) => horner(c, z),
            Repr::Atoms(atoms) => {
                if atoms.len() > DIRECT_ATOMS {
                    if let Some(t) = self.taylor() {
                        return horner(t, z);
                    }
                }
                atoms.iter().map(|a| a.eval(z)).sum()
            }
            Repr::Kernels {
                series,
                points,
                coeffs,
            } => points
                .iter()
                .zip(coeffs)
                .map(|(p, c)| c * series.eval_at(p.conj() * z))
                .sum(),
        }
    }

    /// Upper bound for `sup_𝔻 |f|`.
    pub fn sup_bound(&self) -> f64 {
        match &self.repr {
            Repr::Monomial(c) => c.iter().map(|c| c.norm()).sum(),
            Repr::Atoms(a) => a.iter().map(|a| a.sup_bound()).sum(),
            Repr::Kernels {
                series,
                points,
                coeffs,
            } => points
                .iter()
                .zip(coeffs)
                .map(|(p, c)| c.norm() * series.eval_at(Complex64::new(p.norm(), 0.0)).re)
                .sum(),
        }
    }

    /// Largest `|a|` of the singularities' reflections (0 for polynomials).
    pub fn concentration(&self) -> f64 {
        if let Some(c) = self.concentration {
            return c;
        }
        match &self.repr {
            Repr::Monomial(_) => 0.0,
            Repr::Atoms(a) => a.iter().map(|a| a.a.modulus()).fold(0.0, f64::max),
            Repr::Kernels { points, .. } => points.iter().map(|p| p.norm()).fold(0.0, f64::max),
        }
    }

    fn degree_hint(&self) -> usize {
        match &self.repr {
            Repr::Monomial(_) if self.concentration.is_some() => 0,
            Repr::Monomial(c) => c.len(),
            _ => 0,
        }
    }

    /// Taylor coefficients, when a finite expansion accurate on the closed
    /// disk exists within [`MAX_TAYLOR`] terms.
    pub fn taylor(&self) -> Option<&[Complex64]> {
        self.taylor
            .get_or_init(|| self.build_taylor().map(Arc::new))
            .as_deref()
            .map(|v| v.as_slice())
    }

    fn build_taylor(&self) -> Option<Vec<Complex64>> {
        match &self.repr {
            Repr::Monomial(c) => Some(c.clone()),
            Repr::Kernels {
                series,
                points,
                coeffs,
            } => {
                let k = series.coeffs();
                let mut out = vec![Complex64::new(0.0, 0.0); k.len()];
                for (p, c) in points.iter().zip(coeffs) {
                    let pc = p.conj();
                    let mut pw = *c;
                    for (n, kn) in k.iter().enumerate() {
                        out[n] += pw * kn;
                        pw *= pc;
                    }
                }
                Some(out)
            }
            Repr::Atoms(atoms) => {
                // Coefficients of each atom: t_n = c (1-|a|^2)^γ (γ)_n/n! ā^n.
                let scale: f64 = atoms.iter().map(|a| a.sup_bound()).sum();
                let mut out: Vec<Complex64> = Vec::new();
                for atom in atoms {
                    let a = atom.a.z();
                    let abs = a.norm();
                    let mut t = atom.c * (1.0 - abs * abs).powf(atom.gamma);
                    let mut n = 0usize;
                    loop {
                        if out.len() <= n {
                            out.push(Complex64::new(0.0, 0.0));
                        }
                        out[n] += t;
                        n += 1;
                        let ratio = (atom.gamma + n as f64 - 1.0) / n as f64 * abs;
                        t *= a.conj() * ((atom.gamma + n as f64 - 1.0) / n as f64);
                        if ratio < 1.0 && t.norm() / (1.0 - ratio) < 1e-16 * scale {
                            break;
                        }
                        if n >= MAX_TAYLOR {
                            return None;
                        }
                        if abs == 0.0 {
                            break;
                        }
                    }
                }
                Some(out)
            }
        }
    }

    /// Values at `s e^{2πij/n}`, `j = 0..n`.
    pub fn sample_circle(&self, s: f64, n: usize) -> Vec<Complex64> {
        let direct = match &self.repr {
            Repr::Monomial(_) => false,
            Repr::Atoms(a) => a.len() <= DIRECT_ATOMS || self.taylor().is_none(),
            Repr::Kernels { .. } => false,
        };
        if direct {
            return (0..n)
                .map(|j| self.eval(Complex64::from_polar(s, TAU * j as f64 / n as f64)))
                .collect();
        }
        let coeffs = self.taylor().expect("taylor expansion available");
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut pw = 1.0;
        for (k, c) in coeffs.iter().enumerate() {
            buf[k % n] += c * pw;
            pw *= s;
            if pw == 0.0 {
                break;
            }
        }
        PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n).process(&mut buf));
        buf
    }

    /// Number of angles used on the circle of radius `s`.
    pub fn angles_for(&self, s: f64) -> usize {
        let conc = 32.0 / (1.0 - s * self.concentration()).max(1e-300);
        let deg = 4.0 * self.degree_hint() as f64;
        pow2_clamped(conc.max(deg).max(64.0), 64, MAX_ANGLES)
    }

    /// Mean of `|f|^p` over the circle of radius `s`.
    pub fn circle_mean_pow(&self, s: f64, p: f64) -> f64 {
        let n = self.angles_for(s);
        let vals = self.sample_circle(s, n);
        vals.iter().map(|v| pow_abs(*v, p)).sum::<f64>() / n as f64
    }
}

fn pow_abs(v: Complex64, p: f64) -> f64 {
    if p == 2.0 {
        v.norm_sqr()
    } else if p == 1.0 {
        v.norm()
    } else {
        v.norm_sqr().powf(0.5 * p)
    }
}

fn horner(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
}

/// Radial rings carrying `2 s w(s) ds` on the whole disk.
pub fn disk_rings(w: &RadialWeight) -> Vec<Ring> {
    ring_nodes(Support::FULL, &[], |g| w.eval_gap(g))
}

fn rings_integral<F: Fn(&Ring) -> f64 + Sync>(rings: &[Ring], f: F) -> f64 {
    let parts: Vec<f64> = rings.par_iter().map(|r| r.weight * f(r)).collect();
    parts.iter().sum()
}

/// `∫ |f|^p w dA` by ring quadrature.
fn norm_pow_quadrature(f: &AnalyticFunction, w: &RadialWeight, p: f64) -> f64 {
    rings_integral(&disk_rings(w), |r| f.circle_mean_pow(r.s, p))
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::param(format!("exponent must be positive, got {p}")));
    }
    Ok(())
}

/// `‖f‖_{A_w^p}`; exact Parseval sum for polynomials at `p = 2`.
pub fn bergman_norm(f: &AnalyticFunction, w: &RadialWeight, p: f64) -> Result<f64> {
    check_p(p)?;
    if let Some(c) = f.monomial_coeffs() {
        let nonzero: Vec<usize> = (0..c.len()).filter(|&n| c[n].norm() > 0.0).collect();
        if nonzero.is_empty() {
            return Ok(0.0);
        }
        // ‖c z^n‖_{A_w^p}^p = |c|^p · 2 w_{np+1}.
        if let [n] = nonzero[..] {
            let m = w.moment(n as f64 * p + 1.0)?;
            return Ok(c[n].norm() * (2.0 * m).powf(1.0 / p));
        }
    }
    if let (Some(c), true) = (f.monomial_coeffs(), p == 2.0) {
        let mut total = 0.0;
        for (n, c) in c.iter().enumerate() {
            if c.norm() > 0.0 {
                total += c.norm_sqr() * 2.0 * w.moment(2.0 * n as f64 + 1.0)?;
            }
        }
        return Ok(total.sqrt());
    }
    bergman_norm_quadrature(f, w, p)
}

/// `‖f‖_{A_w^p}` by quadrature only.
pub fn bergman_norm_quadrature(f: &AnalyticFunction, w: &RadialWeight, p: f64) -> Result<f64> {
    check_p(p)?;
    if !w.is_integrable() {
        return Err(Error::NonIntegrable(w.label().to_string()));
    }
    Ok(norm_pow_quadrature(f, w, p).powf(1.0 / p))
}

/// `⟨f, g⟩ = ∫ f ḡ w dA`.
pub fn inner_product_a2(f: &AnalyticFunction, g: &AnalyticFunction, w: &RadialWeight) -> Result<Complex64> {
    if let (Some(a), Some(b)) = (f.monomial_coeffs(), g.monomial_coeffs()) {
        let mut total = Complex64::new(0.0, 0.0);
        for (n, (x, y)) in a.iter().zip(b).enumerate() {
            if x.norm() > 0.0 && y.norm() > 0.0 {
                total += x * y.conj() * 2.0 * w.moment(2.0 * n as f64 + 1.0)?;
            }
        }
        return Ok(total);
    }
    let rings = disk_rings(w);
    let parts: Vec<Complex64> = rings
        .par_iter()
        .map(|r| {
            let n = f.angles_for(r.s).max(g.angles_for(r.s));
            let fv = f.sample_circle(r.s, n);
            let gv = g.sample_circle(r.s, n);
            let mean: Complex64 =
                fv.iter().zip(&gv).map(|(a, b)| a * b.conj()).sum::<Complex64>() / n as f64;
            mean * r.weight
        })
        .collect();
    Ok(parts.iter().sum())
}

/// `∫ |f|^q dμ`.
pub fn lq_integral(f: &AnalyticFunction, mu: &Measure, q: f64) -> Result<f64> {
    product_integral(&[(f, q)], mu)
}

/// `∫ Π |f_i|^{q_i} dμ`.
pub fn product_integral(factors: &[(&AnalyticFunction, f64)], mu: &Measure) -> Result<f64> {
    for (_, q) in factors {
        check_p(*q)?;
    }
    let at = |z: Complex64| -> f64 { factors.iter().map(|(f, q)| pow_abs(f.eval(z), *q)).product() };
    Ok(match mu.nodes() {
        MeasureNodes::Points(pts) => pts.iter().map(|(z, m)| m * at(*z)).sum(),
        MeasureNodes::Rings { rings, angular } => rings_integral(&rings, |r| {
            let n = factors.iter().map(|(f, _)| f.angles_for(r.s)).max().unwrap_or(64);
            let mut prod = vec![1.0; n];
            for (f, q) in factors {
                for (acc, v) in prod.iter_mut().zip(f.sample_circle(r.s, n)) {
                    *acc *= pow_abs(v, *q);
                }
            }
            if let Some(density) = angular {
                for (j, acc) in prod.iter_mut().enumerate() {
                    *acc *= density(Complex64::from_polar(r.s, TAU * j as f64 / n as f64));
                }
            }
            prod.iter().sum::<f64>() / n as f64
        }),
    })
}

/// JSON function specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum FunctionSpec {
    Monomial { coeffs: Vec<Complex64> },
    /// Sparse polynomial as `(degree, coefficient)` pairs.
    Terms { terms: Vec<(usize, Complex64)> },
    Atoms { atoms: Vec<AtomSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    pub a: DiskPoint,
    pub c: Complex64,
    pub gamma: f64,
}

impl FunctionSpec {
    pub fn build(&self) -> Result<AnalyticFunction> {
        Ok(match self {
            FunctionSpec::Monomial { coeffs } => AnalyticFunction::monomials(coeffs.clone()),
            FunctionSpec::Terms { terms } => {
                let len = terms.iter().map(|(n, _)| n + 1).max().unwrap_or(0);
                if len > MAX_TAYLOR {
                    return Err(Error::Config(format!("polynomial degree {} too large", len - 1)));
                }
                let mut coeffs = vec![Complex64::new(0.0, 0.0); len];
                for (n, c) in terms {
                    coeffs[*n] += c;
                }
                AnalyticFunction::monomials(coeffs)
            }
            FunctionSpec::Atoms { atoms } => {
                if atoms.iter().any(|a| !(a.gamma > 0.0)) {
                    return Err(Error::Config("atom exponents must be positive".into()));
                }
                AnalyticFunction::atoms(
                    atoms
                        .iter()
                        .map(|a| KernelAtom {
                            a: a.a,
                            c: a.c,
                            gamma: a.gamma,
                        })
                        .collect(),
                )
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{bergman_kernel_function, kernel_coeffs};
    use approx::assert_relative_eq;

    fn std_w(a: f64) -> RadialWeight {
        RadialWeight::standard(a).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn norm_examples() {
        let w0 = std_w(0.0);
        let one = AnalyticFunction::constant(1.0);
        for p in [0.5, 1.0, 2.0, 3.0] {
            assert_relative_eq!(bergman_norm(&one, &w0, p).unwrap(), 1.0, max_relative = 1e-10);
        }
        let z = AnalyticFunction::monomial(1);
        assert_relative_eq!(bergman_norm(&z, &w0, 2.0).unwrap(), 0.5f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn parseval_matches_quadrature() {
        for alpha in [0.0, 1.0, 2.0] {
            let w = std_w(alpha);
            for n in [0, 1, 5, 20] {
                let f = AnalyticFunction::monomial(n);
                let exact = 2.0 * w.moment(2.0 * n as f64 + 1.0).unwrap();
                let quad = bergman_norm_quadrature(&f, &w, 2.0).unwrap().powi(2);
                assert_relative_eq!(quad, exact, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn circle_sampling_paths_agree() {
        let atoms: Vec<KernelAtom> = (0..7)
            .map(|k| KernelAtom {
                a: DiskPoint::polar(0.3 + 0.1 * k as f64, k as f64).unwrap(),
                c: c(1.0, -0.5 * k as f64),
                gamma: 2.5,
            })
            .collect();
        let f = AnalyticFunction::atoms(atoms.clone());
        let s = 0.93;
        let n = f.angles_for(s);
        let fast = f.sample_circle(s, n);
        for (j, v) in fast.iter().enumerate().step_by(17) {
            let z = Complex64::from_polar(s, TAU * j as f64 / n as f64);
            let direct: Complex64 = atoms.iter().map(|a| a.eval(z)).sum();
            assert_relative_eq!(v.re, direct.re, epsilon = 1e-10, max_relative = 1e-10);
            assert_relative_eq!(v.im, direct.im, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn inner_products() {
        let w0 = std_w(0.0);
        let one = AnalyticFunction::constant(1.0);
        assert_relative_eq!(inner_product_a2(&one, &one, &w0).unwrap().re, 1.0, max_relative = 1e-12);
        let z2 = AnalyticFunction::monomial(2);
        let z3 = AnalyticFunction::monomial(3);
        assert_eq!(inner_product_a2(&z2, &z3, &w0).unwrap().norm(), 0.0);
        // Orthogonality also holds through quadrature.
        let k = bergman_kernel_function(&w0, DiskPoint::ORIGIN).unwrap();
        assert!(inner_product_a2(&z2, &k, &w0).unwrap().norm() < 1e-12);
    }

    #[test]
    fn reproducing_property_through_series() {
        let w = RadialWeight::from_fn("1+r", |r| 1.0 + r).unwrap();
        let z = DiskPoint::polar(0.6, 0.4).unwrap();
        let k = bergman_kernel_function(&w, z).unwrap();
        let f = AnalyticFunction::monomials(vec![c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 0.5)]);
        let lhs = inner_product_a2(&f, &k, &w).unwrap();
        let rhs = f.eval(z.z());
        assert!((lhs - rhs).norm() < 1e-6, "{lhs} vs {rhs}");
        let series = kernel_coeffs(&w, 64).unwrap();
        assert!(series.coeffs().iter().all(|k| *k > 0.0));
    }

    #[test]
    fn lq_integral_against_measures() {
        let f = AnalyticFunction::monomials(vec![c(2.0, 0.0), c(1.0, 1.0)]);
        let mu = Measure::dirac(DiskPoint::ORIGIN, 3.0).unwrap();
        assert_relative_eq!(lq_integral(&f, &mu, 2.0).unwrap(), 12.0);
        let area = Measure::radial(std_w(0.0));
        let v = lq_integral(&AnalyticFunction::monomial(1), &area, 2.0).unwrap();
        assert_relative_eq!(v, 0.5, max_relative = 1e-10);
        let dens = Measure::density("1", |_| 1.0, vec![]);
        let v = lq_integral(&AnalyticFunction::monomial(1), &dens, 2.0).unwrap();
        assert_relative_eq!(v, 0.5, max_relative = 1e-10);
    }

    #[test]
    fn function_spec_json() {
        let spec: FunctionSpec =
            serde_json::from_str(r#"{"type":"monomial","coeffs":[[1,0],[0,1]]}"#).unwrap();
        let f = spec.build().unwrap();
        assert_eq!(f.eval(c(0.5, 0.0)), c(1.0, 0.5));
        let spec: FunctionSpec = serde_json::from_str(
            r#"{"type":"atoms","atoms":[{"a":[0.5,0.0],"c":[1,0],"gamma":4}]}"#,
        )
        .unwrap();
        assert_relative_eq!(spec.build().unwrap().eval(c(0.0, 0.0)).re, 0.31640625);
    }
}
