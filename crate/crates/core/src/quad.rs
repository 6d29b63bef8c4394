//! Quadrature primitives on `[0,1)` and on circles.
//!
//! Radial integrals are split at `1/2`. The inner half uses panels that
//! shrink geometrically towards `0`, the outer half is parametrised by the
//! gap `g = 1 - s` with panels shrinking geometrically towards the boundary.
//! Integrands receive both `s` and `g`, so weights such as `(1-s^2)^alpha`
//! can be evaluated without cancellation arbitrarily close to the circle.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared, cached rule of order `n`.
    pub fn cached(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard
            .entry(n)
            .or_insert_with(|| Arc::new(GaussLegendre::new(n)))
            .clone()
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p, d)
}

/// A quadrature value together with its convergence status.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadValue {
    pub value: f64,
    pub converged: bool,
}

/// One radial node: position `s`, gap `1 - s` (computed without cancellation
/// on the outer half) and quadrature weight.
#[derive(Debug, Clone, Copy)]
pub struct RadialNode {
    pub s: f64,
    pub gap: f64,
    pub weight: f64,
}

/// Panels shrink down to this gap (or radius) before the remaining sliver is
/// handled by a single panel.
pub const DEFAULT_MIN_SCALE: f64 = 1e-14;

#[derive(Debug, Clone, Copy)]
enum Panel {
    /// `[lo, hi]` in the variable `s`.
    Inner(f64, f64),
    /// `[lo, hi]` in the gap variable `g = 1 - s`.
    Outer(f64, f64),
}

fn panels(a: f64, b: f64, breaks: &[f64], min_scale: f64) -> Vec<Panel> {
    let mut out = Vec::new();
    if b <= a {
        return out;
    }
    // Inner half, geometric towards 0.
    if a < 0.5 {
        let hi = b.min(0.5);
        let mut pts = vec![a, hi];
        let mut x = 0.5;
        while x > min_scale {
            x *= 0.5;
            if x > a && x < hi {
                pts.push(x);
            }
        }
        pts.extend(breaks.iter().copied().filter(|&t| t > a && t < hi));
        pts.sort_by(|x, y| x.total_cmp(y));
        pts.dedup();
        for w in pts.windows(2) {
            out.push(Panel::Inner(w[0], w[1]));
        }
    }
    // Outer half, geometric towards the boundary in the gap variable.
    if b > 0.5 {
        let g_hi = 1.0 - a.max(0.5);
        let g_lo = 1.0 - b;
        let mut pts = vec![g_lo, g_hi];
        let mut x = 0.5;
        while x > min_scale.max(g_lo * 0.5) {
            x *= 0.5;
            if x > g_lo && x < g_hi {
                pts.push(x);
            }
        }
        pts.extend(
            breaks
                .iter()
                .map(|&t| 1.0 - t)
                .filter(|&t| t > g_lo && t < g_hi),
        );
        pts.sort_by(|x, y| x.total_cmp(y));
        pts.dedup();
        for w in pts.windows(2) {
            out.push(Panel::Outer(w[0], w[1]));
        }
    }
    out
}

/// Radial nodes for `∫_a^b ... ds` using `order` Gauss-Legendre nodes per
/// panel. Extra breakpoints (kinks of the integrand) may be supplied.
pub fn radial_nodes(a: f64, b: f64, order: usize, breaks: &[f64]) -> Vec<RadialNode> {
    radial_nodes_scaled(a, b, order, breaks, DEFAULT_MIN_SCALE)
}

pub fn radial_nodes_scaled(
    a: f64,
    b: f64,
    order: usize,
    breaks: &[f64],
    min_scale: f64,
) -> Vec<RadialNode> {
    let rule = GaussLegendre::cached(order);
    let mut nodes = Vec::new();
    for panel in panels(a, b, breaks, min_scale) {
        match panel {
            Panel::Inner(lo, hi) => {
                for (s, w) in rule.mapped(lo, hi) {
                    nodes.push(RadialNode {
                        s,
                        gap: 1.0 - s,
                        weight: w,
                    });
                }
            }
            Panel::Outer(lo, hi) => {
                for (g, w) in rule.mapped(lo, hi) {
                    nodes.push(RadialNode {
                        s: 1.0 - g,
                        gap: g,
                        weight: w,
                    });
                }
            }
        }
    }
    nodes
}

/// `∫_a^b f(s, 1-s) ds` with a fixed order per panel.
pub fn radial_integral_fixed<F>(a: f64, b: f64, order: usize, breaks: &[f64], f: F) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    radial_nodes(a, b, order, breaks)
        .iter()
        .map(|n| n.weight * f(n.s, n.gap))
        .sum()
}

/// `∫_a^b f(s, 1-s) ds`, doubling the per-panel order until two successive
/// estimates agree to `rel_tol` (or the node cap is hit).
pub fn radial_integral<F>(a: f64, b: f64, breaks: &[f64], rel_tol: f64, f: F) -> QuadValue
where
    F: Fn(f64, f64) -> f64,
{
    const NODE_CAP: usize = 1 << 20;
    let mut order = 16;
    let mut prev = radial_integral_fixed(a, b, order, breaks, &f);
    loop {
        order *= 2;
        let cur = radial_integral_fixed(a, b, order, breaks, &f);
        let scale = cur.abs().max(prev.abs());
        if (cur - prev).abs() <= rel_tol * scale || scale == 0.0 {
            return QuadValue {
                value: cur,
                converged: true,
            };
        }
        if order * 200 > NODE_CAP {
            return QuadValue {
                value: cur,
                converged: false,
            };
        }
        prev = cur;
    }
}

/// Outcome of a tail integral `∫_0^{g0} f(g) dg` over a gap interval that
/// touches the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailValue {
    pub value: f64,
    pub integrable: bool,
}

/// `∫_0^{g0} f(g) dg` for an integrand that may blow up like a power at
/// `g = 0`. Dyadic panels are summed until they are negligible; a remainder
/// that still decays geometrically is extrapolated, one that does not is
/// reported as non-integrable.
pub fn tail_integral<F: Fn(f64) -> f64>(g0: f64, f: F) -> TailValue {
    const MAX_PANELS: usize = 400;
    if g0 <= 0.0 {
        return TailValue {
            value: 0.0,
            integrable: true,
        };
    }
    let rule = GaussLegendre::cached(16);
    let mut total = 0.0;
    let mut hi = g0;
    let mut history: Vec<f64> = Vec::with_capacity(MAX_PANELS);
    for _ in 0..MAX_PANELS {
        let lo = 0.5 * hi;
        let piece = rule.integrate(lo, hi, &f);
        if !piece.is_finite() {
            return TailValue {
                value: f64::INFINITY,
                integrable: false,
            };
        }
        total += piece;
        history.push(piece);
        hi = lo;
        let n = history.len();
        if n >= 6 && piece.abs() <= 1e-17 * total.abs() {
            let prev = history[n - 2].abs();
            if piece.abs() <= prev {
                return TailValue {
                    value: total,
                    integrable: true,
                };
            }
        }
        if total == 0.0 && n > 60 {
            return TailValue {
                value: 0.0,
                integrable: true,
            };
        }
    }
    // Geometric extrapolation from the last panels.
    let n = history.len();
    let ratio = (history[n - 1] / history[n - 2]).abs();
    let ratio_prev = (history[n - 2] / history[n - 3]).abs();
    if ratio < 0.995 && (ratio - ratio_prev).abs() < 1e-3 {
        TailValue {
            value: total + history[n - 1] * ratio / (1.0 - ratio),
            integrable: true,
        }
    } else {
        TailValue {
            value: f64::INFINITY,
            integrable: false,
        }
    }
}

/// `∫_{g_lo}^{g_hi} f(g) dg` on geometric panels anchored at `g_lo > 0`.
pub fn gap_range_integral<F: Fn(f64) -> f64>(g_lo: f64, g_hi: f64, f: F) -> f64 {
    if g_hi <= g_lo {
        return 0.0;
    }
    if g_lo <= 0.0 {
        let t = tail_integral(g_hi, f);
        return t.value;
    }
    let rule = GaussLegendre::cached(16);
    let mut total = 0.0;
    let mut lo = g_lo;
    while lo < g_hi {
        let hi = (2.0 * lo).min(g_hi);
        total += rule.integrate(lo, hi, &f);
        lo = hi;
    }
    total
}

/// Adaptive composite Gauss-Legendre on a finite interval: the number of
/// panels is doubled until successive estimates agree.
pub fn adaptive<F: Fn(f64) -> f64>(a: f64, b: f64, rel_tol: f64, f: F) -> QuadValue {
    let rule = GaussLegendre::cached(16);
    let composite = |panels: usize| -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|i| {
                let lo = a + h * i as f64;
                rule.integrate(lo, lo + h, &f)
            })
            .sum()
    };
    let mut panels = 1;
    let mut prev = composite(panels);
    while panels * 16 < (1 << 20) {
        panels *= 2;
        let cur = composite(panels);
        let scale = cur.abs().max(prev.abs());
        if (cur - prev).abs() <= rel_tol * scale || scale < 1e-300 {
            return QuadValue {
                value: cur,
                converged: true,
            };
        }
        prev = cur;
    }
    QuadValue {
        value: prev,
        converged: false,
    }
}

/// Smallest power of two `>= n`, clamped to `[lo, hi]`.
pub fn pow2_clamped(n: f64, lo: usize, hi: usize) -> usize {
    let n = if n.is_finite() { n.max(1.0) } else { hi as f64 };
    let mut m = lo.max(1);
    while (m as f64) < n && m < hi {
        m *= 2;
    }
    m.min(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        for n in [1, 2, 5, 16, 33] {
            let rule = GaussLegendre::new(n);
            let deg = 2 * n - 1;
            let v = rule.integrate(0.0, 1.0, |x| x.powi(deg as i32));
            assert_relative_eq!(v, 1.0 / (deg as f64 + 1.0), max_relative = 1e-13);
        }
        let rule = GaussLegendre::new(64);
        let total: f64 = rule.mapped(-1.0, 1.0).map(|(_, w)| w).sum();
        assert_relative_eq!(total, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn radial_integral_handles_boundary_power() {
        // ∫_0^1 (1-s)^{-1/2} ds = 2
        let v = radial_integral(0.0, 1.0, &[], 1e-10, |_, g| g.powf(-0.5));
        assert!(v.converged);
        assert_relative_eq!(v.value, 2.0, max_relative = 1e-6);
        // ∫_0^1 s^{1/2} ds = 2/3
        let v = radial_integral(0.0, 1.0, &[], 1e-10, |s, _| s.sqrt());
        assert_relative_eq!(v.value, 2.0 / 3.0, max_relative = 1e-10);
    }

    #[test]
    fn tail_detects_divergence() {
        let t = tail_integral(0.5, |g| 1.0 / g);
        assert!(!t.integrable);
        let t = tail_integral(0.5, |g| g.powf(-0.9));
        assert!(t.integrable);
        assert_relative_eq!(t.value, 10.0 * 0.5f64.powf(0.1), max_relative = 1e-6);
        let t = tail_integral(1.0, |g| 2.0 * (g * (2.0 - g)));
        assert_relative_eq!(t.value, 4.0 / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn adaptive_integrates_smooth_function() {
        let v = adaptive(0.0, std::f64::consts::PI, 1e-12, f64::sin);
        assert_relative_eq!(v.value, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn pow2_clamped_rounds_up() {
        assert_eq!(pow2_clamped(100.0, 64, 4096), 128);
        assert_eq!(pow2_clamped(1e9, 64, 4096), 4096);
        assert_eq!(pow2_clamped(3.0, 64, 4096), 64);
    }
}
