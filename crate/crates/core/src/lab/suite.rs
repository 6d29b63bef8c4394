//! Default scenario families for the `verify` experiments.

use num_complex::Complex64;

use crate::geometry::DiskPoint;
use crate::measures::MeasureSpec;
use crate::weights::WeightSpec;

use super::scenario::{FactorConfig, Scenario};

/// Exponent pairs of the default suite.
pub const EXPONENTS: [(f64, f64); 3] = [(2.0, 2.0), (2.0, 3.0), (3.0, 2.0)];
pub const ALPHAS: [f64; 2] = [0.0, 1.0];
/// Exponent of the `(1-|z|)^a dA` suite measure.
pub const POWER_A: f64 = 0.5;
/// Truncation of lattice rows; the atoms reach a little further out so the
/// outer shells see a full neighbourhood.
pub const LATTICE_ROW_CUTOFF: f64 = 0.0625;
pub const LATTICE_MEASURE_CUTOFF: f64 = 0.008;

fn standard(alpha: f64) -> WeightSpec {
    WeightSpec::Standard { alpha }
}

/// Decay exponent of the shell profile for `(1-|z|)^a dA` against
/// `standard(α)`; the profile vanishes iff it is positive.
pub fn profile_exponent(a: f64, alpha: f64, p: f64, q: f64) -> f64 {
    (2.0 + a) - (2.0 + alpha) * (1.0 + 1.0 / p - 1.0 / q)
}

/// Whether `(1-|z|)^a dA` gives a bounded Toeplitz operator
/// `A_α^p → A_α^q`: the profile exponent is nonnegative for `p <= q`, and for
/// `q < p` the quotient `μ(D)/ω(D) ~ (1-|z|)^{a-α}` lies in `L_α^{pq/(p-q)}`.
pub fn toeplitz_bounded(a: f64, alpha: f64, p: f64, q: f64) -> bool {
    if p <= q {
        profile_exponent(a, alpha, p, q) >= 0.0
    } else {
        in_lebesgue(a, alpha, p * q / (p - q))
    }
}

/// Whether `(1-|z|)^a dA` is a `q`-Carleson measure for `A_α^p`.
pub fn embedding_bounded(a: f64, alpha: f64, p: f64, q: f64) -> bool {
    if p <= q {
        (2.0 + a) - q / p * (2.0 + alpha) >= 0.0
    } else {
        in_lebesgue(a, alpha, p / (p - q))
    }
}

/// `(1-|z|)^{a-α} ∈ L_α^s`.
fn in_lebesgue(a: f64, alpha: f64, s: f64) -> bool {
    s * (a - alpha) + alpha > -1.0
}

fn tag(x: f64) -> String {
    format!("{x}").replace('.', "_")
}

/// `α ∈ {0,1}` × `(p,q) ∈ {(2,2),(2,3),(3,2)}` × `μ ∈ {ωdA, (1-|z|)^{1/2}dA,
/// boundary lattice}`.
pub fn default_suite() -> Vec<Scenario> {
    let mut out = Vec::new();
    for &alpha in &ALPHAS {
        for &(p, q) in &EXPONENTS {
            let base = Scenario {
                omega: standard(alpha),
                p,
                q,
                ..Scenario::default()
            };
            let measures = [
                ("area", MeasureSpec::Radial { weight: standard(alpha) }, alpha),
                (
                    "power",
                    MeasureSpec::Density {
                        name: "power".into(),
                        a: POWER_A,
                    },
                    POWER_A,
                ),
                (
                    "lattice",
                    MeasureSpec::BoundaryLattice {
                        separation: 0.5,
                        covering: 1.0,
                        cutoff: LATTICE_MEASURE_CUTOFF,
                        r_min: 0.5,
                        weight: standard(alpha),
                    },
                    alpha,
                ),
            ];
            for (name, measure, a) in measures {
                let expect = (p <= q).then(|| profile_exponent(a, alpha, p, q) > 0.0);
                let cutoff = if name == "lattice" { LATTICE_ROW_CUTOFF } else { base.cutoff };
                out.push(Scenario {
                    id: format!("a{}-p{}q{}-{name}", tag(alpha), tag(p), tag(q)),
                    measure,
                    cutoff,
                    expect_vanishing: expect,
                    boundary_exponent: Some(a),
                    ..base.clone()
                });
            }
        }
    }
    out
}

/// A few atoms well inside the disk.
pub fn compact_atoms() -> MeasureSpec {
    MeasureSpec::Atomic {
        points: [(0.0, 0.0), (0.3, 0.1), (-0.2, 0.4), (0.1, -0.5)]
            .iter()
            .map(|&(x, y)| DiskPoint::new(Complex64::new(x, y)).expect("inside disk"))
            .collect(),
        masses: vec![1.0, 0.5, 0.25, 0.75],
    }
}

/// Compactly supported rows with `p <= q`; all expected to vanish.
pub fn compact_suite() -> Vec<Scenario> {
    let mut out = Vec::new();
    for &alpha in &ALPHAS {
        for &(p, q) in EXPONENTS.iter().filter(|(p, q)| p <= q) {
            out.push(Scenario {
                id: format!("a{}-p{}q{}-compact", tag(alpha), tag(p), tag(q)),
                omega: standard(alpha),
                p,
                q,
                measure: compact_atoms(),
                expect_vanishing: Some(true),
                ..Scenario::default()
            });
        }
    }
    out
}

/// Multi-function families crossed with three measures.
pub fn product_suite() -> Vec<Scenario> {
    let f = |alpha: f64, p: f64, q: f64| FactorConfig {
        weight: standard(alpha),
        p,
        q,
    };
    let families = [
        ("s1", vec![f(0.0, 2.0, 2.0), f(0.0, 2.0, 2.0)]),
        ("s2", vec![f(0.0, 2.0, 1.0), f(1.0, 3.0, 2.0)]),
        ("s3", vec![f(1.0, 2.0, 2.0)]),
    ];
    let measures = [
        (
            "atom",
            MeasureSpec::Atomic {
                points: vec![DiskPoint::ORIGIN],
                masses: vec![2.0],
            },
            None,
        ),
        ("compact", compact_atoms(), None),
        (
            "power",
            MeasureSpec::Density {
                name: "power".into(),
                a: 3.0,
            },
            Some(3.0),
        ),
    ];
    let mut out = Vec::new();
    for (fam, factors) in &families {
        for (name, measure, a) in &measures {
            out.push(Scenario {
                id: format!("{fam}-{name}"),
                omega: factors[0].weight.clone(),
                factors: factors.clone(),
                measure: measure.clone(),
                expect_vanishing: Some(true),
                boundary_exponent: *a,
                k_max: 12,
                ..Scenario::default()
            });
        }
        // ω₁ dA: the null sequence must not vanish.
        let a = match factors[0].weight {
            WeightSpec::Standard { alpha } => Some(alpha),
            _ => None,
        };
        out.push(Scenario {
            id: format!("{fam}-area"),
            omega: factors[0].weight.clone(),
            factors: factors.clone(),
            measure: MeasureSpec::Radial {
                weight: factors[0].weight.clone(),
            },
            expect_vanishing: Some(false),
            boundary_exponent: a,
            ..Scenario::default()
        });
    }
    out
}
