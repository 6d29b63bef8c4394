//! Radial weights: evaluation, tail integrals, moments, regularity and
//! doubling diagnostics, and the derived weights `σ_{p,η}`, `W` and the
//! constant `A(p, η)`.
//!
//! Every weight is evaluated through its gap `g = 1 - r`, which keeps
//! boundary asymptotics accurate down to gaps far below `f64::EPSILON`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HyperbolicDisk, Region};
use crate::quad::{self, GaussLegendre};

/// Gap below which a sampled profile is extrapolated by a power law.
pub const PROFILE_EDGE_GAP: f64 = 1e-6;

const TAIL_STEPS_PER_OCTAVE: usize = 4;
const TAIL_OCTAVES: usize = 60;

type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum ProfileSource {
    Table { r: Vec<f64>, w: Vec<f64> },
    Function(ProfileFn),
}

/// A positive profile known on `[0, 1 - edge_gap]` and continued by
/// `edge_value * (g / edge_gap)^tail_slope` beyond.
#[derive(Clone)]
pub struct Profile {
    source: ProfileSource,
    edge_gap: f64,
    edge_value: f64,
    tail_slope: f64,
}

impl Profile {
    fn eval_r(&self, r: f64) -> f64 {
        match &self.source {
            ProfileSource::Function(f) => f(r),
            ProfileSource::Table { r: rs, w } => {
                if r <= rs[0] {
                    return w[0];
                }
                let last = rs.len() - 1;
                if r >= rs[last] {
                    return w[last];
                }
                let k = rs.partition_point(|&x| x <= r) - 1;
                let t = (r - rs[k]) / (rs[k + 1] - rs[k]);
                (w[k].ln() * (1.0 - t) + w[k + 1].ln() * t).exp()
            }
        }
    }

    fn eval_gap(&self, g: f64) -> f64 {
        if g >= self.edge_gap {
            self.eval_r(1.0 - g)
        } else {
            self.edge_value * (g / self.edge_gap).powf(self.tail_slope)
        }
    }
}

#[derive(Clone)]
pub enum WeightKind {
    /// `(α+1)(1-r^2)^α`, `α > -1`.
    Standard { alpha: f64 },
    /// `(1-r)^a`, `a > -1`.
    Power { exponent: f64 },
    /// Sampled or user-supplied profile.
    Profile(Profile),
    /// `Π w_i^{e_i}`.
    Product(Vec<(RadialWeight, f64)>),
}

struct TailCache {
    /// `tail0[k] = ∫_0^{g_k} ω(1-g) dg`, `g_k = 2^{-k/4}`.
    tail0: Vec<f64>,
    /// `tail1[k] = ∫_0^{g_k} (1-g) ω(1-g) dg`.
    tail1: Vec<f64>,
}

struct Inner {
    kind: WeightKind,
    label: String,
    tails: Option<TailCache>,
    moments: Mutex<HashMap<u64, f64>>,
}

/// A radial weight on the unit disk. Cheap to clone; immutable apart from a
/// memo of computed moments.
#[derive(Clone)]
pub struct RadialWeight(Arc<Inner>);

impl fmt::Debug for RadialWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialWeight")
            .field("label", &self.0.label)
            .field("integrable", &self.is_integrable())
            .finish()
    }
}

fn tail_gap(k: usize) -> f64 {
    (-(k as f64) / TAIL_STEPS_PER_OCTAVE as f64).exp2()
}

impl RadialWeight {
    fn build(kind: WeightKind, label: String) -> Self {
        let mut inner = Inner {
            kind,
            label,
            tails: None,
            moments: Mutex::new(HashMap::new()),
        };
        inner.tails = build_tails(&inner.kind);
        RadialWeight(Arc::new(inner))
    }

    /// Standard weight `(α+1)(1-|z|^2)^α`.
    pub fn standard(alpha: f64) -> Result<Self> {
        if !(alpha > -1.0 && alpha.is_finite()) {
            return Err(Error::param(format!("standard weight needs α > -1, got {alpha}")));
        }
        Ok(Self::build(
            WeightKind::Standard { alpha },
            format!("standard({alpha})"),
        ))
    }

    /// `(1-|z|)^a`.
    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent > -1.0 && exponent.is_finite()) {
            return Err(Error::NonIntegrable(format!("(1-r)^{exponent}")));
        }
        Ok(Self::build(
            WeightKind::Power { exponent },
            format!("power({exponent})"),
        ))
    }

    /// Log-linear interpolation of samples `(r_i, w_i)`; the last sample must
    /// satisfy `r < 1` and the profile is continued by the power law through
    /// the last two samples.
    pub fn table(r: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if r.len() != w.len() || r.len() < 2 {
            return Err(Error::param("weight table needs at least two (r, w) pairs of equal length"));
        }
        if r.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::param("weight table radii must be strictly increasing"));
        }
        if r[0] < 0.0 || *r.last().unwrap() >= 1.0 {
            return Err(Error::domain("weight table radii must lie in [0, 1)"));
        }
        if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::domain("weight table values must be positive and finite"));
        }
        let n = r.len();
        let (g1, g0) = (1.0 - r[n - 1], 1.0 - r[n - 2]);
        let slope = (w[n - 1] / w[n - 2]).ln() / (g1 / g0).ln();
        let profile = Profile {
            edge_gap: g1,
            edge_value: w[n - 1],
            tail_slope: slope,
            source: ProfileSource::Table { r, w },
        };
        Self::from_profile(profile, "table".to_string())
    }

    /// A weight given by a closure of `r`, trusted on `[0, 1 - 1e-6]`.
    pub fn from_fn<F>(label: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let g = PROFILE_EDGE_GAP;
        let (a, b) = (f(1.0 - g), f(1.0 - 2.0 * g));
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::domain("weight profile must be positive near the boundary"));
        }
        let slope = (a / b).ln() / 0.5f64.ln();
        let profile = Profile {
            source: ProfileSource::Function(Arc::new(f)),
            edge_gap: g,
            edge_value: a,
            tail_slope: slope,
        };
        Self::from_profile(profile, label.into())
    }

    fn from_profile(profile: Profile, label: String) -> Result<Self> {
        if profile.tail_slope <= -1.0 + 1e-9 {
            return Err(Error::NonIntegrable(label));
        }
        let w = Self::build(WeightKind::Profile(profile), label.clone());
        if !w.is_integrable() {
            return Err(Error::NonIntegrable(label));
        }
        Ok(w)
    }

    /// `Π w_i^{e_i}`, with identical factors merged. A single factor with
    /// exponent one is returned unchanged.
    pub fn product(factors: &[(RadialWeight, f64)]) -> RadialWeight {
        let mut flat: Vec<(RadialWeight, f64)> = Vec::new();
        fn push(flat: &mut Vec<(RadialWeight, f64)>, w: &RadialWeight, e: f64) {
            if let WeightKind::Product(inner) = &w.0.kind {
                for (iw, ie) in inner {
                    push(flat, iw, ie * e);
                }
                return;
            }
            if let Some(slot) = flat.iter_mut().find(|(x, _)| x.same(w)) {
                slot.1 += e;
            } else {
                flat.push((w.clone(), e));
            }
        }
        for (w, e) in factors {
            push(&mut flat, w, *e);
        }
        flat.retain(|(_, e)| e.abs() > 1e-15);
        for (_, e) in flat.iter_mut() {
            if (*e - e.round()).abs() < 1e-14 {
                *e = e.round();
            }
        }
        if flat.len() == 1 && flat[0].1 == 1.0 {
            return flat.pop().unwrap().0;
        }
        let label = flat
            .iter()
            .map(|(w, e)| format!("{}^{:.6}", w.label(), e))
            .collect::<Vec<_>>()
            .join("*");
        Self::build(WeightKind::Product(flat), label)
    }

    pub fn kind(&self) -> &WeightKind {
        &self.0.kind
    }

    pub fn label(&self) -> &str {
        &self.0.label
    }

    /// Identity (same underlying object).
    pub fn same(&self, other: &RadialWeight) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// `Some(α)` for standard weights.
    pub fn standard_alpha(&self) -> Option<f64> {
        match self.0.kind {
            WeightKind::Standard { alpha } => Some(alpha),
            _ => None,
        }
    }

    pub fn is_integrable(&self) -> bool {
        self.0.tails.is_some()
    }

    /// `ω(r)` for `0 <= r < 1`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::domain(format!("radius {r} outside [0, 1)")));
        }
        Ok(self.eval_gap(1.0 - r))
    }

    /// `ω(1 - g)`.
    pub fn eval_gap(&self, g: f64) -> f64 {
        match &self.0.kind {
            WeightKind::Standard { alpha } => {
                if *alpha == 0.0 {
                    1.0
                } else {
                    (alpha + 1.0) * (g * (2.0 - g)).powf(*alpha)
                }
            }
            WeightKind::Power { exponent } => g.powf(*exponent),
            WeightKind::Profile(p) => p.eval_gap(g),
            WeightKind::Product(fs) => fs
                .iter()
                .map(|(w, e)| e * w.eval_gap(g).ln())
                .sum::<f64>()
                .exp(),
        }
    }

    /// `ω̂(r) = ∫_r^1 ω`; `+∞` for non-integrable weights.
    pub fn tail_hat(&self, r: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::domain(format!("radius {r} outside [0, 1)")));
        }
        Ok(self.tail_hat_gap(1.0 - r))
    }

    pub fn tail_hat_gap(&self, g: f64) -> f64 {
        match &self.0.tails {
            None => f64::INFINITY,
            Some(t) => self.cached_tail(&t.tail0, g, |g| self.eval_gap(g)),
        }
    }

    /// `∫_{1-g}^1 s ω(s) ds`.
    pub fn first_moment_tail_gap(&self, g: f64) -> f64 {
        match &self.0.tails {
            None => f64::INFINITY,
            Some(t) => self.cached_tail(&t.tail1, g, |g| (1.0 - g) * self.eval_gap(g)),
        }
    }

    fn cached_tail<F: Fn(f64) -> f64>(&self, table: &[f64], g: f64, f: F) -> f64 {
        if g <= 0.0 {
            return 0.0;
        }
        let g = g.min(1.0);
        let k = (-(g.log2()) * TAIL_STEPS_PER_OCTAVE as f64).floor() as usize;
        if k + 1 >= table.len() {
            return quad::tail_integral(g, f).value;
        }
        let lo = tail_gap(k + 1);
        table[k + 1] + GaussLegendre::cached(16).integrate(lo, g, f)
    }

    /// `ω_x = ∫_0^1 s^x ω(s) ds`.
    pub fn moment(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::domain(format!("moment exponent must be >= 0, got {x}")));
        }
        if !self.is_integrable() {
            return Err(Error::NonIntegrable(self.label().to_string()));
        }
        let key = x.to_bits();
        if let Some(v) = self.0.moments.lock().expect("moment memo poisoned").get(&key) {
            return Ok(*v);
        }
        let v = self.interval_integral(0.0, 1.0, |s| s.powf(x));
        self.0
            .moments
            .lock()
            .expect("moment memo poisoned")
            .insert(key, v);
        Ok(v)
    }

    /// `∫_a^b h(s) ω(s) ds` for a smooth factor `h`; accurate up to `b = 1`.
    pub fn interval_integral<H: Fn(f64) -> f64>(&self, a: f64, b: f64, h: H) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut total = 0.0;
        if a < 0.5 {
            total += quad::radial_integral_fixed(a, b.min(0.5), 24, &[], |s, g| {
                h(s) * self.eval_gap(g)
            });
        }
        if b > 0.5 {
            let g_hi = 1.0 - a.max(0.5);
            let g_lo = 1.0 - b;
            let f = |g: f64| h(1.0 - g) * self.eval_gap(g);
            total += if g_lo <= 0.0 {
                quad::tail_integral(g_hi, f).value
            } else {
                quad::gap_range_integral(g_lo, g_hi, f)
            };
        }
        total
    }

    /// `∫_a^b s ω(s) ds` on the radial support `[a, b)`.
    fn radial_first_moment(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        if b >= 1.0 {
            self.first_moment_tail_gap(1.0 - a)
        } else {
            quad::gap_range_integral(1.0 - b, 1.0 - a, |g| (1.0 - g) * self.eval_gap(g))
        }
    }

    /// `∫_region ω dA` with normalised area measure.
    pub fn region_weight(&self, region: &Region) -> f64 {
        self.region_mass(region, Support::FULL)
    }

    /// `∫_{region ∩ {lo <= |z| < hi}} ω dA`.
    pub fn region_mass(&self, region: &Region, support: Support) -> f64 {
        match region.normalized() {
            Region::Whole => 2.0 * self.radial_first_moment(support.lo, support.hi),
            Region::Square(sq) => {
                let t = sq.inner_radius();
                let lo = support.lo.max(t);
                sq.vertex.gap() / (PI * PI) * self.radial_first_moment(lo, support.hi)
            }
            Region::Disk(d) => self.disk_mass(&d, support),
        }
    }

    fn disk_mass(&self, disk: &HyperbolicDisk, support: Support) -> f64 {
        let d = disk.c.norm();
        let rho = disk.rho;
        let outer_gap = disk.outer_gap();
        let s_hi = 1.0 - outer_gap;
        let mut total = 0.0;

        // Circles |ξ| = s < ρ - d lie entirely inside the disk.
        let full = (rho - d).max(0.0);
        if full > 0.0 {
            let lo = support.lo;
            let hi = support.hi.min(full);
            if hi > lo {
                total += 2.0 * quad::gap_range_integral(1.0 - hi, 1.0 - lo, |g| {
                    (1.0 - g) * self.eval_gap(g)
                });
            }
        }
        if d == 0.0 {
            return total;
        }

        // Partial circles: s = m - h cos φ, φ ∈ [0, π].
        let s_lo = (d - rho).abs();
        let m = 0.5 * (s_lo + s_hi);
        let h = 0.5 * (s_hi - s_lo);
        let phi_of = |s: f64| ((m - s) / h).clamp(-1.0, 1.0).acos();
        let s_a = s_lo.max(support.lo);
        let s_b = s_hi.min(support.hi);
        if s_b <= s_a {
            return total;
        }
        let (phi_a, phi_b) = (phi_of(s_a), phi_of(s_b));
        let integrand = |phi: f64| {
            let (sin, cos) = phi.sin_cos();
            let s = m - h * cos;
            let gap = outer_gap + h * (1.0 + cos);
            let a = h * (1.0 + cos); // ρ + d - s
            let b = if d >= rho { h * (1.0 - cos) } else { s + s_lo }; // ρ + s - d
            let c = if d >= rho { s + s_lo } else { h * (1.0 - cos) }; // s + d - ρ
            let e = s + d + rho;
            let denom = 2.0 * s * d;
            let one_minus_x = a * b / denom;
            let one_plus_x = c * e / denom;
            let x = 0.5 * (one_plus_x - one_minus_x);
            let theta = 2.0 * (one_minus_x * one_plus_x).max(0.0).sqrt().atan2(x);
            h * sin * s * theta * self.eval_gap(gap)
        };
        total += quad::adaptive(phi_a, phi_b, 1e-11, integrand).value / PI;
        total
    }
}

/// Radial support `[lo, hi)` of a restricted measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub lo: f64,
    pub hi: f64,
}

impl Support {
    pub const FULL: Support = Support { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::domain(format!("invalid radial support [{lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.lo && r < self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn intersect(&self, other: Support) -> Support {
        Support {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi).max(self.lo.max(other.lo)),
        }
    }
}

fn build_tails(kind: &WeightKind) -> Option<TailCache> {
    let probe = RadialWeightRef(kind);
    let n = TAIL_STEPS_PER_OCTAVE * TAIL_OCTAVES;
    let g_last = tail_gap(n);
    let deep0 = quad::tail_integral(g_last, |g| probe.eval_gap(g));
    let deep1 = quad::tail_integral(g_last, |g| (1.0 - g) * probe.eval_gap(g));
    // A non-integrable tail already shows at the deepest level; large values
    // upstream do not change integrability.
    let far = quad::tail_integral(1.0, |g| probe.eval_gap(g));
    if !deep0.integrable || !far.integrable || !deep0.value.is_finite() {
        return None;
    }
    let rule = GaussLegendre::cached(16);
    let mut tail0 = vec![0.0; n + 1];
    let mut tail1 = vec![0.0; n + 1];
    tail0[n] = deep0.value;
    tail1[n] = deep1.value;
    for k in (0..n).rev() {
        let (lo, hi) = (tail_gap(k + 1), tail_gap(k));
        tail0[k] = tail0[k + 1] + rule.integrate(lo, hi, |g| probe.eval_gap(g));
        tail1[k] = tail1[k + 1] + rule.integrate(lo, hi, |g| (1.0 - g) * probe.eval_gap(g));
    }
    if !tail0[0].is_finite() {
        return None;
    }
    Some(TailCache { tail0, tail1 })
}

/// Evaluation of a kind before the owning weight exists.
struct RadialWeightRef<'a>(&'a WeightKind);

impl RadialWeightRef<'_> {
    fn eval_gap(&self, g: f64) -> f64 {
        match self.0 {
            WeightKind::Standard { alpha } => {
                if *alpha == 0.0 {
                    1.0
                } else {
                    (alpha + 1.0) * (g * (2.0 - g)).powf(*alpha)
                }
            }
            WeightKind::Power { exponent } => g.powf(*exponent),
            WeightKind::Profile(p) => p.eval_gap(g),
            WeightKind::Product(fs) => fs
                .iter()
                .map(|(w, e)| e * w.eval_gap(g).ln())
                .sum::<f64>()
                .exp(),
        }
    }
}

/// Conjugate exponent `p' = p/(p-1)`.
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// Exponents shared by the Toeplitz and Carleson results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedExponents {
    pub p: f64,
    pub q: f64,
    pub p_conj: f64,
    /// `pq/(p-q)`, only when `q < p`.
    pub s: Option<f64>,
    /// `pq/(pq-p+q)`.
    pub t: f64,
}

impl DerivedExponents {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p > 0.0 && q > 0.0) {
            return Err(Error::param("exponents must be positive"));
        }
        let p_conj = if p > 1.0 { conjugate(p) } else { f64::INFINITY };
        let s = (q < p).then(|| p * q / (p - q));
        let t = p * q / (p * q - p + q);
        Ok(Self { p, q, p_conj, s, t })
    }

    /// `λ = Σ q_i / p_i`.
    pub fn lambda(pairs: &[(f64, f64)]) -> f64 {
        pairs.iter().map(|(p, q)| q / p).sum()
    }
}

/// Per-grid-point ratio profile with its extremes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioProfile {
    pub grid: Vec<f64>,
    pub ratios: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

impl RatioProfile {
    fn from_ratios(grid: &[f64], ratios: Vec<f64>) -> Self {
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            grid: grid.to_vec(),
            ratios,
            min,
            max,
        }
    }

    /// `max/min <= bound` and all ratios finite.
    pub fn bounded_by(&self, bound: f64) -> bool {
        self.min > 0.0 && self.max.is_finite() && self.max / self.min <= bound
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if let Some(r) = grid.iter().find(|r| !(0.0..1.0).contains(*r)) {
        return Err(Error::domain(format!("grid radius {r} outside [0, 1)")));
    }
    Ok(())
}

/// `ω̂(r) / ((1-r) ω(r))` on `grid`.
pub fn regularity_profile(w: &RadialWeight, grid: &[f64]) -> Result<RatioProfile> {
    check_grid(grid)?;
    if !w.is_integrable() {
        return Err(Error::NonIntegrable(w.label().to_string()));
    }
    let ratios = grid
        .iter()
        .map(|&r| {
            let g = 1.0 - r;
            w.tail_hat_gap(g) / (g * w.eval_gap(g))
        })
        .collect();
    Ok(RatioProfile::from_ratios(grid, ratios))
}

/// `ω̂(r) / ω̂((1+r)/2)` on `grid`.
pub fn doubling_profile(w: &RadialWeight, grid: &[f64]) -> Result<RatioProfile> {
    check_grid(grid)?;
    if !w.is_integrable() {
        return Err(Error::NonIntegrable(w.label().to_string()));
    }
    let ratios = grid
        .iter()
        .map(|&r| {
            let g = 1.0 - r;
            w.tail_hat_gap(g) / w.tail_hat_gap(0.5 * g)
        })
        .collect();
    Ok(RatioProfile::from_ratios(grid, ratios))
}

/// `σ_{p,η} = (ω / η^{1/p})^{p'}`. The result may be non-integrable, which
/// is reported by [`RadialWeight::is_integrable`] rather than as an error.
pub fn sigma_weight(omega: &RadialWeight, eta: &RadialWeight, p: f64) -> Result<RadialWeight> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::param(format!("σ_(p,η) needs p > 1, got {p}")));
    }
    let pc = conjugate(p);
    Ok(RadialWeight::product(&[
        (omega.clone(), pc),
        (eta.clone(), -pc / p),
    ]))
}

/// Geometric grid `r_k = 1 - 2^{-k}`, `k = 0..=k_max`.
pub fn geometric_grid(k_max: u32) -> Vec<f64> {
    (0..=k_max).map(|k| 1.0 - (-(k as f64)).exp2()).collect()
}

/// A grid supremum, reported as a lower bound for the true supremum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSupremum {
    pub value: f64,
    pub finite: bool,
    pub argmax: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

/// `A(p, η) = sup_r η̂^{1/p} σ̂^{1/p'} / ω̂` over `grid`.
pub fn bergman_const_a(
    omega: &RadialWeight,
    eta: &RadialWeight,
    p: f64,
    grid: &[f64],
) -> Result<GridSupremum> {
    check_grid(grid)?;
    let sigma = sigma_weight(omega, eta, p)?;
    if !sigma.is_integrable() {
        return Ok(GridSupremum {
            value: f64::INFINITY,
            finite: false,
            argmax: f64::NAN,
            grid: grid.to_vec(),
            values: vec![f64::INFINITY; grid.len()],
        });
    }
    let pc = conjugate(p);
    let values: Vec<f64> = grid
        .iter()
        .map(|&r| {
            let g = 1.0 - r;
            eta.tail_hat_gap(g).powf(1.0 / p) * sigma.tail_hat_gap(g).powf(1.0 / pc)
                / omega.tail_hat_gap(g)
        })
        .collect();
    let (mut value, mut argmax) = (f64::NEG_INFINITY, f64::NAN);
    for (&r, &v) in grid.iter().zip(&values) {
        if v > value {
            value = v;
            argmax = r;
        }
    }
    Ok(GridSupremum {
        value,
        finite: value.is_finite(),
        argmax,
        grid: grid.to_vec(),
        values,
    })
}

/// Fused weight `W = η^{q/(pq-p+q)} σ_{q,υ}^{(pq-p)/(pq-p+q)}`.
pub fn fusion_weight_w(
    eta: &RadialWeight,
    upsilon: &RadialWeight,
    omega: &RadialWeight,
    p: f64,
    q: f64,
) -> Result<RadialWeight> {
    if !(p > 1.0 && q > 1.0) {
        return Err(Error::param("fused weight needs p, q > 1"));
    }
    let sigma = sigma_weight(omega, upsilon, q)?;
    if !sigma.is_integrable() {
        return Err(Error::NonIntegrable(sigma.label().to_string()));
    }
    let denom = p * q - p + q;
    let (e_eta, e_sigma) = (q / denom, (p * q - p) / denom);
    let qc = conjugate(q);
    let (alt_eta, alt_sigma) = (qc / (p + qc), p / (p + qc));
    if (e_eta - alt_eta).abs() > 1e-14 || (e_sigma - alt_sigma).abs() > 1e-14 {
        return Err(Error::Internal(format!(
            "fused exponents disagree: ({e_eta}, {e_sigma}) vs ({alt_eta}, {alt_sigma})"
        )));
    }
    Ok(RadialWeight::product(&[(eta.clone(), e_eta), (sigma, e_sigma)]))
}

/// Geometric mean weight `Π ω_i^{q_i/(λ p_i)}` with `λ = Σ q_i/p_i`.
pub fn product_weight(specs: &[(RadialWeight, f64, f64)]) -> Result<(RadialWeight, f64)> {
    if specs.is_empty() {
        return Err(Error::param("product weight needs at least one factor"));
    }
    if specs.iter().any(|(_, p, q)| !(*p > 0.0 && *q > 0.0)) {
        return Err(Error::param("exponents p_i, q_i must be positive"));
    }
    let lambda: f64 = specs.iter().map(|(_, p, q)| q / p).sum();
    let factors: Vec<(RadialWeight, f64)> = specs
        .iter()
        .map(|(w, p, q)| (w.clone(), q / (lambda * p)))
        .collect();
    Ok((RadialWeight::product(&factors), lambda))
}

/// Both sides of the equivalence "A(p,η) finite ⇔ σ_{p,η} regular" on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityDiagnostic {
    pub a_constant: f64,
    pub a_finite: bool,
    pub sigma_regularity: Option<RatioProfile>,
    pub sigma_regular_on_grid: bool,
}

pub fn duality_diagnostic(
    omega: &RadialWeight,
    eta: &RadialWeight,
    p: f64,
    grid: &[f64],
    bound: f64,
) -> Result<DualityDiagnostic> {
    let a = bergman_const_a(omega, eta, p, grid)?;
    let sigma = sigma_weight(omega, eta, p)?;
    let prof = if sigma.is_integrable() {
        Some(regularity_profile(&sigma, grid)?)
    } else {
        None
    };
    let regular = prof.as_ref().map(|p| p.bounded_by(bound)).unwrap_or(false);
    Ok(DualityDiagnostic {
        a_constant: a.value,
        a_finite: a.finite,
        sigma_regularity: prof,
        sigma_regular_on_grid: regular,
    })
}

/// JSON weight specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum WeightSpec {
    Standard { alpha: f64 },
    Table { r: Vec<f64>, w: Vec<f64> },
    Power { a: f64 },
}

impl WeightSpec {
    pub fn build(&self) -> Result<RadialWeight> {
        match self {
            WeightSpec::Standard { alpha } => RadialWeight::standard(*alpha),
            WeightSpec::Table { r, w } => RadialWeight::table(r.clone(), w.clone()),
            WeightSpec::Power { a } => RadialWeight::power(*a),
        }
    }
}
