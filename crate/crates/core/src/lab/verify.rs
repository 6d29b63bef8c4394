//! Paired-quantity equivalence runs over scenario families.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carleson::{
    embedding_norm, lambda_seq_norm, m_n_estimate, mu_hat_norm, phi_norm, psi_norm,
    quotient_sup, vanishing_profile, vanishing_sequence_f, Verdict,
};
use crate::error::{Error, Result};
use crate::geometry::RegionKind;
use crate::toeplitz::{same_weight, toeplitz_norm_estimate, toeplitz_norm_galerkin, ToeplitzOperator};
use crate::weights::{fusion_weight_w, WeightSpec};

use super::scenario::{Prepared, Scenario};
use super::suite;

/// μ-scalings used for the homogeneity check.
pub const SCALES: [f64; 2] = [0.5, 3.0];
/// Allowed relative drift of a ratio under μ-scaling.
pub const SCALE_TOL: f64 = 0.02;
/// Largest admissible `max/min` of a pair's ratios.
pub const MAX_SPREAD: f64 = 50.0;
/// Padding factor applied on each side when recording windows.
pub const RECORD_PAD: f64 = 1.5;
/// Unbounded rows are rerun this many and its square times further from
/// the boundary.
pub const COARSEN: f64 = 4.0;
/// Neither quantity may fall below this fraction of its coarse value.
pub const DIVERGENCE_FLOOR: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "thm1")]
    Thm1,
    #[serde(rename = "thm1-iii")]
    Thm1Iii,
    #[serde(rename = "thm2")]
    Thm2,
    #[serde(rename = "thmA")]
    ThmA,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [Self::Thm1, Self::Thm1Iii, Self::Thm2, Self::ThmA];

    pub fn name(self) -> &'static str {
        match self {
            Self::Thm1 => "thm1",
            Self::Thm1Iii => "thm1-iii",
            Self::Thm2 => "thm2",
            Self::ThmA => "thmA",
        }
    }

    /// Scenario family run by default.
    pub fn default_family(self) -> Vec<Scenario> {
        match self {
            Self::Thm1 => {
                let mut s = suite::default_suite();
                s.extend(suite::compact_suite());
                s
            }
            Self::Thm1Iii => suite::default_suite().into_iter().filter(|s| s.q < s.p).collect(),
            Self::Thm2 => suite::product_suite(),
            Self::ThmA => suite::default_suite(),
        }
    }

    /// Pairs compared on a row; rows of the compact family only carry verdicts.
    fn pairs(self, s: &Scenario) -> Vec<(&'static str, &'static str)> {
        let compact = s.id.ends_with("-compact");
        match self {
            Self::Thm1 if compact => vec![],
            Self::Thm1 if s.p <= s.q => vec![("norm", "m0")],
            Self::Thm1 => vec![("norm", "lambda"), ("norm", "muhat"), ("norm", "psi")],
            Self::Thm1Iii => vec![("lambda", "muhat")],
            Self::Thm2 => vec![("mn", "reference")],
            Self::ThmA if s.p <= s.q => vec![("square", "disk"), ("embed", "disk")],
            Self::ThmA => vec![("phi", "psi"), ("embed", "phi"), ("embed", "psi")],
        }
    }
}

/// Ratio window `[lo, hi]` for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Observed range padded by [`RECORD_PAD`], shrunk so `hi/lo <= MAX_SPREAD`.
    pub fn padded(min: f64, max: f64) -> Self {
        let room = (MAX_SPREAD / (max / min)).max(1.0).sqrt();
        let pad = RECORD_PAD.min(room);
        Self {
            lo: min / pad,
            hi: max * pad,
        }
    }
}

/// Versioned window fixture: experiment → pair → window.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Windows {
    pub version: u32,
    pub windows: BTreeMap<String, BTreeMap<String, Window>>,
}

const BUILTIN_WINDOWS: &str = include_str!("../../fixtures/windows.json");

impl Windows {
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN_WINDOWS).expect("bundled window fixture parses")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("windows: {e}")))
    }

    pub fn get(&self, exp: Experiment, pair: &str) -> Option<Window> {
        self.windows.get(exp.name())?.get(pair).copied()
    }

    /// Records padded windows from the observed ratios of `report`.
    pub fn record(&mut self, report: &EquivalenceReport) {
        self.version = self.version.max(1);
        let entry = self.windows.entry(report.experiment.name().to_string()).or_default();
        for st in &report.stats {
            if st.count > 0 && st.min > 0.0 {
                entry.insert(st.pair.clone(), Window::padded(st.min, st.max));
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaledRatio {
    pub c: f64,
    pub ratio: Option<f64>,
    pub drift: f64,
}

/// An unbounded pair under refinement of the truncation. Values run from
/// the coarsest truncation to the one of the row.
#[derive(Debug, Clone, Serialize)]
pub struct Divergence {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub pass: bool,
}

impl Divergence {
    /// One quantity keeps growing by at least as much at each refinement;
    /// a convergent truncation gains less and less. Neither may shrink.
    fn new(a: [f64; 3], b: [f64; 3]) -> Self {
        let diverges = |x: &[f64; 3]| x[2] - x[1] > 0.0 && x[2] - x[1] >= x[1] - x[0];
        let holds = |x: &[f64; 3]| x[2] >= DIVERGENCE_FLOOR * x[1];
        Self {
            pass: (diverges(&a) || diverges(&b)) && holds(&a) && holds(&b),
            a,
            b,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairRow {
    pub scenario: String,
    pub pair: String,
    pub a: f64,
    pub b: f64,
    /// `a / b`, absent when `b = 0`.
    pub ratio: Option<f64>,
    pub scaled: Vec<ScaledRatio>,
    /// Present on rows expected to be unbounded; these stay out of the windows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<Divergence>,
    pub in_window: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairStats {
    pub pair: String,
    /// Rows inside the window statistics.
    pub count: usize,
    pub divergent_rows: usize,
    pub min: f64,
    pub max: f64,
    pub log_width: f64,
    pub log_stdev: f64,
    pub window: Option<Window>,
    pub max_scale_drift: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictCheck {
    pub scenario: String,
    pub quantity: String,
    pub expected: Verdict,
    pub observed: Verdict,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RowFailure {
    pub scenario: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub experiment: Experiment,
    pub scenarios: usize,
    pub rows: Vec<PairRow>,
    pub stats: Vec<PairStats>,
    pub verdicts: Vec<VerdictCheck>,
    /// Rows whose quantities failed an accuracy guard.
    pub accuracy_failures: Vec<RowFailure>,
    pub pass: bool,
}

impl EquivalenceReport {
    pub fn windows_pass(&self) -> bool {
        self.stats.iter().all(|s| s.pass) && self.verdicts.iter().all(|v| v.pass)
    }

    /// One line per row: `scenario,pair,a,b,ratio`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "scenario,pair,a,b,ratio")?;
        for r in &self.rows {
            let ratio = r.ratio.map(|x| x.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{},{}", r.scenario, r.pair, r.a, r.b, ratio)?;
        }
        Ok(())
    }
}

fn verdict(v: bool) -> Verdict {
    if v {
        Verdict::Vanishing
    } else {
        Verdict::NotVanishing
    }
}

struct RowData {
    values: BTreeMap<&'static str, f64>,
    verdict: Option<(String, Verdict)>,
}

/// `p = q = 2` rows use the compression to `basis` monomials, so the norm
/// resolves `μ` at the same scale as the truncated grids.
fn toeplitz_norm(prep: &Prepared) -> Result<f64> {
    let s = &prep.scenario;
    let op = ToeplitzOperator::new(&prep.mu, &prep.omega)?;
    let equal = same_weight(&prep.eta, &prep.omega) && same_weight(&prep.upsilon, &prep.omega);
    let est = if s.p == 2.0 && s.q == 2.0 && equal {
        toeplitz_norm_galerkin(&op, s.basis)?
    } else {
        toeplitz_norm_estimate(&op, &prep.eta, &prep.upsilon, s.p, s.q, &prep.space, &prep.budget)?
    };
    Ok(est.value)
}

fn compute(exp: Experiment, s: &Scenario, with_verdict: bool) -> Result<RowData> {
    let prep = s.prepare()?;
    let (p, q, r) = (s.p, s.q, s.radius);
    let (mu, omega, eta, upsilon) = (&prep.mu, &prep.omega, &prep.eta, &prep.upsilon);
    let mut values = BTreeMap::new();
    let mut out_verdict = None;
    let needed: Vec<&str> = exp.pairs(s).iter().flat_map(|(a, b)| [*a, *b]).collect();
    let want = |name: &str| needed.contains(&name);
    match exp {
        Experiment::Thm1 | Experiment::Thm1Iii => {
            if want("norm") {
                values.insert("norm", toeplitz_norm(&prep)?);
            }
            if p <= q && (want("m0") || with_verdict) {
                let prof = vanishing_profile(mu, omega, eta, upsilon, p, q, r, &prep.grid)?;
                values.insert("m0", prof.value);
                out_verdict = prof.verdict.map(|v| ("profile".to_string(), v));
            }
            if want("lambda") {
                let lat = s.lattice()?;
                values.insert("lambda", lambda_seq_norm(mu, omega, eta, upsilon, p, q, &lat, r)?.value);
            }
            if want("muhat") {
                values.insert("muhat", mu_hat_norm(mu, omega, eta, upsilon, p, q, r, s.cutoff)?.value);
            }
            if want("psi") {
                let w = fusion_weight_w(eta, upsilon, omega, p, q)?;
                let pt = p * q / (p * q - p + q);
                values.insert("psi", psi_norm(mu, &w, s.gamma, pt, 1.0, s.cutoff)?.value);
            }
        }
        Experiment::ThmA => {
            if want("square") {
                let rep = quotient_sup(mu, omega, RegionKind::Square, q / p, &prep.grid)?;
                values.insert("square", rep.value);
            }
            if want("disk") {
                let rep = quotient_sup(mu, omega, RegionKind::Disk { radius: r }, q / p, &prep.grid)?;
                values.insert("disk", rep.value);
            }
            if want("embed") {
                let est = embedding_norm(omega, p, mu, q, &prep.space, &prep.budget)?;
                values.insert("embed", est.value.powf(q));
            }
            if want("phi") {
                values.insert("phi", phi_norm(mu, omega, p, q, r, s.cutoff)?.value);
            }
            if want("psi") {
                values.insert("psi", psi_norm(mu, omega, s.gamma, p, q, s.cutoff)?.value);
            }
        }
        Experiment::Thm2 => {
            let specs = s.factor_specs()?;
            let est = m_n_estimate(&specs, mu, &prep.space, &prep.budget)?;
            values.insert("mn", est.value);
            values.insert("reference", est.reference.value);
            if with_verdict {
                let rep = vanishing_sequence_f(&specs, mu, s.k_max, &prep.space, &prep.budget)?;
                out_verdict = Some(("null-sequence".to_string(), rep.verdict));
            }
        }
    }
    // M₀ also serves the verdict; drop it when no pair asks for it.
    if !want("m0") {
        values.remove("m0");
    }
    Ok(RowData {
        values,
        verdict: out_verdict,
    })
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b > 0.0).then(|| a / b)
}

/// Whether `a, b` are a consistent pair when no ratio exists.
fn degenerate_ok(a: f64, b: f64) -> bool {
    a == 0.0 && b == 0.0
}

fn standard_alpha(w: &WeightSpec) -> Option<f64> {
    match w {
        WeightSpec::Standard { alpha } => Some(*alpha),
        _ => None,
    }
}

/// Whether the compared quantities stay finite as the truncation is removed,
/// for measures `(1-|z|)^a dA` against standard weights. `None` when the
/// scenario carries no boundary exponent or mixes weights.
pub fn expected_bounded(exp: Experiment, s: &Scenario) -> Option<bool> {
    let a = s.boundary_exponent?;
    if exp == Experiment::Thm2 {
        let mut lambda = 0.0;
        let mut beta = 0.0;
        for f in &s.factors {
            lambda += f.q / f.p;
            beta += f.q / f.p * standard_alpha(&f.weight)?;
        }
        // Product weight ≍ (1-|z|)^{β/λ}, exponents (1/λ, 1).
        return Some(suite::embedding_bounded(a, beta / lambda, 1.0 / lambda, 1.0));
    }
    let alpha = standard_alpha(&s.omega)?;
    for w in [&s.eta, &s.upsilon].into_iter().flatten() {
        if standard_alpha(w)? != alpha {
            return None;
        }
    }
    Some(match exp {
        Experiment::ThmA => suite::embedding_bounded(a, alpha, s.p, s.q),
        _ => suite::toeplitz_bounded(a, alpha, s.p, s.q),
    })
}

struct RowOutcome {
    rows: Vec<PairRow>,
    verdict: Option<VerdictCheck>,
}

fn run_row(exp: Experiment, s: &Scenario, windows: &Windows) -> Result<RowOutcome> {
    let base = compute(exp, s, s.expect_vanishing.is_some())?;
    let scaled: Vec<(f64, RowData)> = SCALES
        .iter()
        .map(|&c| Ok((c, compute(exp, &s.with_scale(c), false)?)))
        .collect::<Result<_>>()?;
    let coarse = match expected_bounded(exp, s) {
        Some(false) => Some([
            compute(exp, &s.coarsened(COARSEN * COARSEN), false)?,
            compute(exp, &s.coarsened(COARSEN), false)?,
        ]),
        _ => None,
    };
    let mut rows = Vec::new();
    for (an, bn) in exp.pairs(s) {
        let (a, b) = (base.values[an], base.values[bn]);
        let rt = ratio(a, b);
        let scaled_ratios = scaled
            .iter()
            .map(|(c, d)| {
                let sr = ratio(d.values[an], d.values[bn]);
                let drift = match (rt, sr) {
                    (Some(x), Some(y)) => (y / x - 1.0).abs(),
                    (None, None) => 0.0,
                    _ => f64::INFINITY,
                };
                ScaledRatio { c: *c, ratio: sr, drift }
            })
            .collect();
        let pair = format!("{an}/{bn}");
        let divergence = coarse.as_ref().map(|[c0, c1]| {
            Divergence::new(
                [c0.values[an], c1.values[an], a],
                [c0.values[bn], c1.values[bn], b],
            )
        });
        let in_window = match divergence {
            Some(_) => None,
            None => windows.get(exp, &pair).map(|w| match rt {
                Some(x) => w.contains(x),
                None => degenerate_ok(a, b),
            }),
        };
        rows.push(PairRow {
            scenario: s.id.clone(),
            pair,
            a,
            b,
            ratio: rt,
            scaled: scaled_ratios,
            divergence,
            in_window,
        });
    }
    let verdict = match (s.expect_vanishing, base.verdict) {
        (Some(e), Some((quantity, observed))) => Some(VerdictCheck {
            scenario: s.id.clone(),
            quantity,
            expected: verdict(e),
            observed,
            pass: verdict(e) == observed,
        }),
        _ => None,
    };
    Ok(RowOutcome { rows, verdict })
}

fn stats_for(exp: Experiment, pair: &str, all: &[&PairRow], windows: &Windows) -> PairStats {
    let (divergent, rows): (Vec<&PairRow>, Vec<&PairRow>) = all.iter().partition(|r| r.divergence.is_some());
    let logs: Vec<f64> = rows.iter().filter_map(|r| r.ratio).filter(|x| *x > 0.0).map(f64::ln).collect();
    let (min, max) = logs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)));
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n.max(1.0);
    let log_stdev = (logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n.max(1.0)).sqrt();
    let log_width = if logs.is_empty() { 0.0 } else { max - min };
    let max_scale_drift = all
        .iter()
        .flat_map(|r| r.scaled.iter().map(|s| s.drift))
        .fold(0.0, f64::max);
    let all_ratios_ok = rows.iter().all(|r| match r.ratio {
        Some(x) => x.is_finite() && x > 0.0,
        None => degenerate_ok(r.a, r.b),
    });
    let pass = all_ratios_ok
        && log_width <= MAX_SPREAD.ln()
        && max_scale_drift <= SCALE_TOL
        && rows.iter().all(|r| r.in_window != Some(false))
        && divergent.iter().all(|r| r.divergence.as_ref().is_some_and(|d| d.pass));
    PairStats {
        pair: pair.to_string(),
        count: logs.len(),
        divergent_rows: divergent.len(),
        min: if logs.is_empty() { 0.0 } else { min.exp() },
        max: if logs.is_empty() { 0.0 } else { max.exp() },
        log_width,
        log_stdev,
        window: windows.get(exp, pair),
        max_scale_drift,
        pass,
    }
}

/// Runs `exp` over `family`, comparing against `windows`. Accuracy errors
/// are collected per row; other errors abort the run.
pub fn run_experiment(exp: Experiment, family: &[Scenario], windows: &Windows) -> Result<EquivalenceReport> {
    let outcomes: Vec<(String, Result<RowOutcome>)> = family
        .par_iter()
        .map(|s| (s.id.clone(), run_row(exp, s, windows)))
        .collect();
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    let mut accuracy_failures = Vec::new();
    for (id, out) in outcomes {
        match out {
            Ok(o) => {
                rows.extend(o.rows);
                verdicts.extend(o.verdict);
            }
            Err(e @ Error::Accuracy { .. }) => accuracy_failures.push(RowFailure {
                scenario: id,
                message: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    let mut names: Vec<String> = Vec::new();
    for r in &rows {
        if !names.contains(&r.pair) {
            names.push(r.pair.clone());
        }
    }
    let stats: Vec<PairStats> = names
        .iter()
        .map(|n| {
            let sel: Vec<&PairRow> = rows.iter().filter(|r| &r.pair == n).collect();
            stats_for(exp, n, &sel, windows)
        })
        .collect();
    let mut report = EquivalenceReport {
        experiment: exp,
        scenarios: family.len(),
        rows,
        stats,
        verdicts,
        accuracy_failures,
        pass: false,
    };
    report.pass = report.windows_pass() && report.accuracy_failures.is_empty();
    Ok(report)
}
