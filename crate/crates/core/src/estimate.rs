//! Lower-bound maximisation of ratio functionals over test-function
//! families: kernel atoms, monomials and seeded coordinate ascent on
//! polynomial coefficients.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::DiskPoint;
use crate::kernel::{AnalyticFunction, FunctionSpec, KernelAtom, DEFAULT_GAMMA};

/// How a norm value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Spectral,
    Optimizer,
    ClosedForm,
}

/// A norm value with the function that attains it.
#[derive(Debug, Clone, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    #[serde(skip)]
    pub witness: Option<AnalyticFunction>,
    #[serde(rename = "witness")]
    pub witness_spec: Option<FunctionSpec>,
    pub method: Method,
    /// The value is only known to bound the true norm from below.
    pub lower_bound: bool,
    pub evaluations: usize,
    pub budget: usize,
    pub exhausted: bool,
}

impl NormEstimate {
    pub fn exact(value: f64, witness: Option<AnalyticFunction>, method: Method) -> Self {
        let witness_spec = witness.as_ref().and_then(|w| w.to_spec());
        Self {
            value,
            witness,
            witness_spec,
            method,
            lower_bound: false,
            evaluations: 0,
            budget: 0,
            exhausted: false,
        }
    }

    pub fn zero() -> Self {
        Self::exact(0.0, None, Method::ClosedForm)
    }
}

/// Evaluation budget and RNG seed of an optimisation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Budget {
    pub evaluations: usize,
    pub seed: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            evaluations: 400,
            seed: 0,
        }
    }
}

/// Candidate families searched by [`maximize`].
#[derive(Debug, Clone)]
pub struct SearchSpace {
    /// Centres of kernel atoms.
    pub centers: Vec<DiskPoint>,
    pub gamma: f64,
    /// Largest monomial degree tried and the coefficient-ascent degree.
    pub max_degree: usize,
    pub ascent_degree: usize,
    pub restarts: usize,
}

impl SearchSpace {
    /// Atoms on radii `1 - 2^{-k}` up to `1 - cutoff`, at `angles` equally
    /// spaced angles, plus `extra` centres.
    pub fn standard(cutoff: f64, angles: usize, extra: &[DiskPoint]) -> Self {
        let mut centers = vec![DiskPoint::ORIGIN];
        let mut k = 1;
        loop {
            let r = 1.0 - (-(k as f64)).exp2();
            if r > 1.0 - cutoff {
                break;
            }
            for j in 0..angles.max(1) {
                let theta = std::f64::consts::TAU * j as f64 / angles.max(1) as f64;
                centers.push(DiskPoint::polar(r, theta).expect("grid point inside disk"));
            }
            k += 1;
        }
        centers.extend(extra.iter().copied().filter(|p| p.modulus() <= 1.0 - cutoff));
        Self {
            centers,
            gamma: DEFAULT_GAMMA,
            max_degree: 24,
            ascent_degree: 8,
            restarts: 2,
        }
    }
}

struct Tracker<'a, F> {
    objective: &'a F,
    best: f64,
    witness: Option<AnalyticFunction>,
    used: usize,
    limit: usize,
}

impl<F> Tracker<'_, F>
where
    F: Fn(&AnalyticFunction) -> Result<f64> + Sync,
{
    fn remaining(&self) -> usize {
        self.limit.saturating_sub(self.used)
    }

    /// Evaluates a batch (truncated to the remaining budget); returns values.
    fn batch(&mut self, cands: Vec<AnalyticFunction>) -> Result<Vec<f64>> {
        let take = cands.len().min(self.remaining());
        let cands: Vec<AnalyticFunction> = cands.into_iter().take(take).collect();
        let vals = cands
            .par_iter()
            .map(|f| (self.objective)(f))
            .collect::<Result<Vec<f64>>>()?;
        self.used += take;
        for (f, v) in cands.into_iter().zip(&vals) {
            if v.is_finite() && *v > self.best {
                self.best = *v;
                self.witness = Some(f);
            }
        }
        Ok(vals)
    }
}

fn random_coeffs(rng: &mut ChaCha8Rng, degree: usize) -> Vec<Complex64> {
    (0..=degree)
        .map(|n| {
            let scale = 1.0 / (n as f64 + 1.0);
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * scale
        })
        .collect()
}

/// Coordinate ascent on polynomial coefficients from `start`.
fn ascend<F>(tracker: &mut Tracker<'_, F>, start: Vec<Complex64>) -> Result<()>
where
    F: Fn(&AnalyticFunction) -> Result<f64> + Sync,
{
    let mut coeffs = start;
    let mut current = match tracker.batch(vec![AnalyticFunction::monomials(coeffs.clone())])?.first() {
        Some(v) => *v,
        None => return Ok(()),
    };
    let mut step = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-3) * 0.5;
    let dirs = [
        Complex64::new(1.0, 0.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(0.0, -1.0),
    ];
    while step > 1e-3 && tracker.remaining() > 0 {
        let mut improved = false;
        for j in 0..coeffs.len() {
            let cands: Vec<Vec<Complex64>> = dirs
                .iter()
                .map(|d| {
                    let mut c = coeffs.clone();
                    c[j] += d * step;
                    c
                })
                .collect();
            let vals = tracker.batch(cands.iter().cloned().map(AnalyticFunction::monomials).collect())?;
            if vals.is_empty() {
                return Ok(());
            }
            let (i, v) = vals
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
            if v > current * (1.0 + 1e-12) {
                current = v;
                coeffs = cands[i].clone();
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(())
}

/// Maximises `objective` over the families of `space`. The result is a
/// lower bound whose witness attains the reported value.
pub fn maximize<F>(objective: F, space: &SearchSpace, budget: &Budget) -> Result<NormEstimate>
where
    F: Fn(&AnalyticFunction) -> Result<f64> + Sync,
{
    let mut tracker = Tracker {
        objective: &objective,
        best: 0.0,
        witness: None,
        used: 0,
        limit: budget.evaluations,
    };

    let monomials: Vec<AnalyticFunction> =
        (0..=space.max_degree).map(AnalyticFunction::monomial).collect();
    let mono_vals = tracker.batch(monomials)?;

    let atoms: Vec<AnalyticFunction> = space
        .centers
        .iter()
        .map(|a| {
            AnalyticFunction::atoms(vec![KernelAtom {
                a: *a,
                c: Complex64::new(1.0, 0.0),
                gamma: space.gamma,
            }])
        })
        .collect();
    tracker.batch(atoms)?;

    // Ascent from the best low-degree monomial, then from random restarts.
    let d = space.ascent_degree;
    let best_mono = mono_vals
        .iter()
        .take(d + 1)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc })
        .0;
    let mut start = vec![Complex64::new(0.0, 0.0); d + 1];
    start[best_mono.min(d)] = Complex64::new(1.0, 0.0);
    ascend(&mut tracker, start)?;
    for restart in 0..space.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(budget.seed.wrapping_add(restart as u64));
        let start = random_coeffs(&mut rng, d);
        ascend(&mut tracker, start)?;
    }

    let exhausted = tracker.remaining() == 0;
    let witness_spec = tracker.witness.as_ref().and_then(|w| w.to_spec());
    Ok(NormEstimate {
        value: tracker.best,
        witness: tracker.witness,
        witness_spec,
        method: Method::Optimizer,
        lower_bound: true,
        evaluations: tracker.used,
        budget: budget.evaluations,
        exhausted,
    })
}

/// Improves an estimate with extra candidate functions.
pub fn refine_with<F>(
    mut est: NormEstimate,
    objective: F,
    cands: Vec<AnalyticFunction>,
) -> Result<NormEstimate>
where
    F: Fn(&AnalyticFunction) -> Result<f64> + Sync,
{
    let vals = cands
        .par_iter()
        .map(&objective)
        .collect::<Result<Vec<f64>>>()?;
    est.evaluations += cands.len();
    for (f, v) in cands.into_iter().zip(vals) {
        if v.is_finite() && v > est.value {
            est.value = v;
            est.witness_spec = f.to_spec();
            est.witness = Some(f);
        }
    }
    Ok(est)
}
