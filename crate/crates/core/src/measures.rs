//! Positive Borel measures on the disk: atoms, radial densities and general
//! densities, with region masses, tail restriction and scaling.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{generate_lattice, DiskPoint, Region};
use crate::quad::GaussLegendre;
use crate::weights::{RadialWeight, Support, WeightSpec};

pub type DensityFn = Arc<dyn Fn(Complex64) -> f64 + Send + Sync>;

/// Gauss-Legendre order per radial panel of [`ring_nodes`].
const RING_ORDER: usize = 8;
/// Smallest gap resolved by ring quadrature.
const RING_MIN_GAP: f64 = 1e-12;

#[derive(Clone)]
pub struct Density {
    pub label: String,
    pub f: DensityFn,
    /// Radii where the density has kinks or concentrates.
    pub hints: Vec<f64>,
}

#[derive(Clone)]
pub enum Measure {
    Atomic {
        points: Vec<DiskPoint>,
        masses: Vec<f64>,
    },
    /// `dμ = scale · w(|z|) dA` on the annulus `support`.
    Radial {
        weight: RadialWeight,
        scale: f64,
        support: Support,
    },
    /// `dμ = scale · f(z) dA` on `support`.
    Density {
        density: Density,
        scale: f64,
        support: Support,
    },
}

impl fmt::Debug for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::Atomic { points, masses } => f
                .debug_struct("Atomic")
                .field("atoms", &points.len())
                .field("total", &masses.iter().sum::<f64>())
                .finish(),
            Measure::Radial {
                weight,
                scale,
                support,
            } => f
                .debug_struct("Radial")
                .field("weight", &weight.label())
                .field("scale", scale)
                .field("support", support)
                .finish(),
            Measure::Density {
                density,
                scale,
                support,
            } => f
                .debug_struct("Density")
                .field("density", &density.label)
                .field("scale", scale)
                .field("support", support)
                .finish(),
        }
    }
}

/// One circle of a radial quadrature: `∫ F dμ ≈ Σ weight · mean_θ F(s e^{iθ})`
/// (times the angular density for non-radial measures).
#[derive(Debug, Clone, Copy)]
pub struct Ring {
    pub s: f64,
    pub gap: f64,
    pub weight: f64,
}

/// Quadrature description of a measure.
pub enum MeasureNodes<'a> {
    Points(Vec<(Complex64, f64)>),
    Rings {
        rings: Vec<Ring>,
        /// Angular density factor for non-radial densities.
        angular: Option<&'a DensityFn>,
    },
}

impl Measure {
    pub fn zero() -> Self {
        Measure::Atomic {
            points: Vec::new(),
            masses: Vec::new(),
        }
    }

    pub fn atomic(points: Vec<DiskPoint>, masses: Vec<f64>) -> Result<Self> {
        if points.len() != masses.len() {
            return Err(Error::param("atomic measure needs one mass per point"));
        }
        if masses.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::domain("atom masses must be positive and finite"));
        }
        Ok(Measure::Atomic { points, masses })
    }

    /// A single atom of mass `m` at `z`.
    pub fn dirac(z: DiskPoint, m: f64) -> Result<Self> {
        Self::atomic(vec![z], vec![m])
    }

    /// `w(|z|) dA`.
    pub fn radial(weight: RadialWeight) -> Self {
        Measure::Radial {
            weight,
            scale: 1.0,
            support: Support::FULL,
        }
    }

    /// `(1-|z|)^a dA`.
    pub fn power(a: f64) -> Result<Self> {
        Ok(Self::radial(RadialWeight::power(a)?))
    }

    /// `f(z) dA` for a nonnegative, integrable `f`.
    pub fn density<F>(label: impl Into<String>, f: F, hints: Vec<f64>) -> Self
    where
        F: Fn(Complex64) -> f64 + Send + Sync + 'static,
    {
        Measure::Density {
            density: Density {
                label: label.into(),
                f: Arc::new(f),
                hints,
            },
            scale: 1.0,
            support: Support::FULL,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Measure::Atomic { points, .. } => points.is_empty(),
            Measure::Radial { support, .. } | Measure::Density { support, .. } => {
                support.is_empty()
            }
        }
    }

    /// `sup |ξ|` over the support (the closure for continuous measures).
    pub fn max_radius(&self) -> f64 {
        match self {
            Measure::Atomic { points, .. } => {
                points.iter().map(|p| p.modulus()).fold(0.0, f64::max)
            }
            Measure::Radial { support, .. } | Measure::Density { support, .. } => {
                if support.is_empty() {
                    0.0
                } else {
                    support.hi
                }
            }
        }
    }

    /// `μ(region)`.
    pub fn mass_of_region(&self, region: &Region) -> f64 {
        match self {
            Measure::Atomic { points, masses } => points
                .iter()
                .zip(masses)
                .filter(|(p, _)| region.contains(p.z()))
                .map(|(_, m)| m)
                .sum(),
            Measure::Radial {
                weight,
                scale,
                support,
            } => {
                if support.is_empty() {
                    0.0
                } else {
                    scale * weight.region_mass(region, *support)
                }
            }
            Measure::Density {
                density,
                scale,
                support,
            } => scale * density_region_mass(density, region, *support),
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.mass_of_region(&Region::Whole)
    }

    /// `(μ_s, μ_{s,-})`: the parts on `|z| >= s` and `|z| < s`.
    pub fn restrict_tail(&self, s: f64) -> Result<(Measure, Measure)> {
        if !(0.0..1.0).contains(&s) {
            return Err(Error::domain(format!("tail radius {s} outside [0, 1)")));
        }
        Ok(match self {
            Measure::Atomic { points, masses } => {
                let (mut outer, mut inner) = ((vec![], vec![]), (vec![], vec![]));
                for (p, m) in points.iter().zip(masses) {
                    let side = if p.modulus() >= s { &mut outer } else { &mut inner };
                    side.0.push(*p);
                    side.1.push(*m);
                }
                (
                    Measure::Atomic {
                        points: outer.0,
                        masses: outer.1,
                    },
                    Measure::Atomic {
                        points: inner.0,
                        masses: inner.1,
                    },
                )
            }
            Measure::Radial {
                weight,
                scale,
                support,
            } => {
                let (outer, inner) = split_support(*support, s);
                (
                    Measure::Radial {
                        weight: weight.clone(),
                        scale: *scale,
                        support: outer,
                    },
                    Measure::Radial {
                        weight: weight.clone(),
                        scale: *scale,
                        support: inner,
                    },
                )
            }
            Measure::Density {
                density,
                scale,
                support,
            } => {
                let (outer, inner) = split_support(*support, s);
                (
                    Measure::Density {
                        density: density.clone(),
                        scale: *scale,
                        support: outer,
                    },
                    Measure::Density {
                        density: density.clone(),
                        scale: *scale,
                        support: inner,
                    },
                )
            }
        })
    }

    /// `c μ`, `c > 0`.
    pub fn scale(&self, c: f64) -> Result<Measure> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param(format!("measure scale must be positive, got {c}")));
        }
        Ok(match self {
            Measure::Atomic { points, masses } => Measure::Atomic {
                points: points.clone(),
                masses: masses.iter().map(|m| m * c).collect(),
            },
            Measure::Radial {
                weight,
                scale,
                support,
            } => Measure::Radial {
                weight: weight.clone(),
                scale: scale * c,
                support: *support,
            },
            Measure::Density {
                density,
                scale,
                support,
            } => Measure::Density {
                density: density.clone(),
                scale: scale * c,
                support: *support,
            },
        })
    }

    /// Quadrature nodes for `∫ F dμ`.
    pub fn nodes(&self) -> MeasureNodes<'_> {
        match self {
            Measure::Atomic { points, masses } => MeasureNodes::Points(
                points.iter().zip(masses).map(|(p, m)| (p.z(), *m)).collect(),
            ),
            Measure::Radial {
                weight,
                scale,
                support,
            } => MeasureNodes::Rings {
                rings: ring_nodes(*support, &[], |g| scale * weight.eval_gap(g)),
                angular: None,
            },
            Measure::Density {
                density,
                scale,
                support,
            } => MeasureNodes::Rings {
                rings: ring_nodes(*support, &density.hints, |_| *scale),
                angular: Some(&density.f),
            },
        }
    }
}

fn split_support(support: Support, s: f64) -> (Support, Support) {
    let outer = support.intersect(Support { lo: s, hi: 1.0 });
    let inner = support.intersect(Support { lo: 0.0, hi: s });
    (outer, inner)
}

/// Radial rings on `support` with weights `2 s ρ(s) ds`: two panels on the
/// inner half, dyadic panels in the gap on the outer half.
pub fn ring_nodes<R: Fn(f64) -> f64>(support: Support, hints: &[f64], radial: R) -> Vec<Ring> {
    let mut rings = Vec::new();
    if support.is_empty() {
        return rings;
    }
    let rule = GaussLegendre::cached(RING_ORDER);
    let (lo, hi) = (support.lo, support.hi);
    let mut push = |s: f64, gap: f64, w: f64| {
        rings.push(Ring {
            s,
            gap,
            weight: 2.0 * s * radial(gap) * w,
        })
    };
    if lo < 0.5 {
        let top = hi.min(0.5);
        let mut cuts = vec![lo, top, 0.25];
        cuts.extend(hints.iter().copied());
        cuts.retain(|&x| x >= lo && x <= top);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for w in cuts.windows(2) {
            for (s, wt) in rule.mapped(w[0], w[1]) {
                push(s, 1.0 - s, wt);
            }
        }
    }
    if hi > 0.5 {
        let g_hi = 1.0 - lo.max(0.5);
        let g_lo = (1.0 - hi).max(0.0);
        let mut cuts = vec![g_lo.max(RING_MIN_GAP.min(g_hi)), g_hi];
        let mut g = 0.5;
        while g > RING_MIN_GAP {
            g *= 0.5;
            cuts.push(g);
        }
        cuts.extend(hints.iter().map(|r| 1.0 - r));
        let floor = cuts[0];
        cuts.retain(|&x| x >= floor && x <= g_hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for w in cuts.windows(2) {
            for (g, wt) in rule.mapped(w[0], w[1]) {
                push(1.0 - g, g, wt);
            }
        }
    }
    rings
}

fn density_region_mass(density: &Density, region: &Region, support: Support) -> f64 {
    let f = &density.f;
    let theta_rule = GaussLegendre::cached(32);
    // Integral of f over the arc |θ - center| <= half at radius s, divided by 2π.
    let arc = |s: f64, center: f64, half: f64| {
        theta_rule.integrate(center - half, center + half, |t| f(Complex64::from_polar(s, t)))
            / (2.0 * PI)
    };
    let annulus = |lo: f64, hi: f64, center: f64, half: f64| -> f64 {
        let support = support.intersect(Support { lo, hi });
        ring_nodes(support, &density.hints, |_| 1.0)
            .iter()
            .map(|ring| ring.weight * arc(ring.s, center, half))
            .sum()
    };
    match region.normalized() {
        Region::Whole => annulus(0.0, 1.0, 0.0, PI),
        Region::Square(sq) => annulus(sq.inner_radius(), 1.0, sq.vertex.z().arg(), sq.half_width()),
        Region::Disk(d) => {
            let m = d.c.norm();
            let full = (d.rho - m).max(0.0);
            let mut total = if full > 0.0 { annulus(0.0, full, 0.0, PI) } else { 0.0 };
            if m == 0.0 {
                return total;
            }
            // Partial circles, parametrised by s = mid - h cos φ so that the
            // square-root behaviour of the arc length at both ends is smoothed.
            let s_lo = (m - d.rho).abs();
            let s_hi = 1.0 - d.outer_gap();
            let (mid, h) = (0.5 * (s_lo + s_hi), 0.5 * (s_hi - s_lo));
            let lo = s_lo.max(support.lo);
            let hi = s_hi.min(support.hi);
            if hi <= lo {
                return total;
            }
            let phi = |s: f64| ((mid - s) / h).clamp(-1.0, 1.0).acos();
            total += crate::quad::adaptive(phi(lo), phi(hi), 1e-10, |p| {
                let (sin, cos) = p.sin_cos();
                let s = mid - h * cos;
                let x = (s * s + m * m - d.rho * d.rho) / (2.0 * s * m);
                2.0 * s * h * sin * arc(s, d.c.arg(), x.clamp(-1.0, 1.0).acos())
            })
            .value;
            total
        }
    }
}

/// JSON measure specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MeasureSpec {
    Atomic {
        points: Vec<DiskPoint>,
        masses: Vec<f64>,
    },
    Radial {
        weight: WeightSpec,
    },
    Density {
        name: String,
        a: f64,
    },
    /// Atoms on the outer part of a ring lattice with masses
    /// `(1-|a|^2)^2 w(a)`.
    #[serde(rename = "boundary-lattice")]
    BoundaryLattice {
        separation: f64,
        covering: f64,
        cutoff: f64,
        r_min: f64,
        weight: WeightSpec,
    },
}

impl MeasureSpec {
    pub fn build(&self) -> Result<Measure> {
        match self {
            MeasureSpec::Atomic { points, masses } => Measure::atomic(points.clone(), masses.clone()),
            MeasureSpec::Radial { weight } => Ok(Measure::radial(weight.build()?)),
            MeasureSpec::Density { name, a } => match name.as_str() {
                "power" => Measure::power(*a),
                other => Err(Error::Config(format!("unknown density '{other}'"))),
            },
            MeasureSpec::BoundaryLattice {
                separation,
                covering,
                cutoff,
                r_min,
                weight,
            } => {
                let w = weight.build()?;
                let lattice = generate_lattice(*separation, *covering, *cutoff)?;
                let points: Vec<DiskPoint> = lattice.outside(*r_min).collect();
                let masses = points
                    .iter()
                    .map(|a| (1.0 - a.z().norm_sqr()).powi(2) * w.eval_gap(a.gap()))
                    .collect();
                Measure::atomic(points, masses)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{carleson_square, HyperbolicDisk};
    use approx::assert_relative_eq;

    fn p(x: f64) -> DiskPoint {
        DiskPoint::real(x).unwrap()
    }

    #[test]
    fn atomic_region_mass_examples() {
        let mu = Measure::dirac(DiskPoint::ORIGIN, 1.0).unwrap();
        let d = Region::Disk(HyperbolicDisk::new(DiskPoint::ORIGIN, 1.0).unwrap());
        assert_eq!(mu.mass_of_region(&d), 1.0);
        assert_eq!(mu.mass_of_region(&Region::Square(carleson_square(p(0.5)))), 0.0);
    }

    #[test]
    fn radial_square_mass_matches_closed_form() {
        let mu = Measure::radial(RadialWeight::standard(0.0).unwrap());
        let m = mu.mass_of_region(&Region::Square(carleson_square(p(0.5))));
        assert_relative_eq!(m, 0.25 * 1.5 / (2.0 * PI * PI), max_relative = 1e-12);
    }

    #[test]
    fn restrict_tail_examples() {
        let mu = Measure::atomic(vec![p(0.3), p(0.8)], vec![2.0, 5.0]).unwrap();
        let (outer, inner) = mu.restrict_tail(0.5).unwrap();
        assert_eq!(outer.total_mass(), 5.0);
        assert_eq!(inner.total_mass(), 2.0);
        let (outer, inner) = mu.restrict_tail(0.0).unwrap();
        assert_eq!(outer.total_mass(), 7.0);
        assert!(inner.is_zero());

        let area = Measure::radial(RadialWeight::standard(0.0).unwrap());
        for s in [0.0, 0.3, 0.9, 0.999] {
            let (outer, inner) = area.restrict_tail(s).unwrap();
            assert_relative_eq!(outer.total_mass(), 1.0 - s * s, max_relative = 1e-10);
            assert_relative_eq!(
                outer.total_mass() + inner.total_mass(),
                1.0,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn scale_is_linear_and_rejects_nonpositive() {
        let mu = Measure::dirac(DiskPoint::ORIGIN, 1.0).unwrap();
        assert_eq!(mu.scale(3.0).unwrap().total_mass(), 3.0);
        assert!(mu.scale(0.0).is_err());
        assert!(mu.scale(-1.0).is_err());
    }

    #[test]
    fn generic_density_agrees_with_radial_path() {
        let radial = Measure::power(0.5).unwrap();
        let generic = Measure::density("(1-|z|)^0.5", |z| (1.0 - z.norm()).sqrt(), vec![]);
        let regions = [
            Region::Whole,
            Region::Square(carleson_square(p(0.7))),
            Region::Disk(HyperbolicDisk::new(DiskPoint::polar(0.6, 1.0).unwrap(), 1.0).unwrap()),
            Region::Disk(HyperbolicDisk::new(p(0.1), 0.5).unwrap()),
        ];
        for r in &regions {
            let a = radial.mass_of_region(r);
            let b = generic.mass_of_region(r);
            assert_relative_eq!(a, b, max_relative = 1e-6);
        }
    }

    #[test]
    fn ring_nodes_integrate_area() {
        let rings = ring_nodes(Support::FULL, &[], |_| 1.0);
        let total: f64 = rings.iter().map(|r| r.weight).sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-11);
        let rings = ring_nodes(Support::new(0.2, 0.9).unwrap(), &[], |_| 1.0);
        let total: f64 = rings.iter().map(|r| r.weight).sum();
        assert_relative_eq!(total, 0.81 - 0.04, max_relative = 1e-12);
    }

    #[test]
    fn measure_spec_json() {
        let spec: MeasureSpec =
            serde_json::from_str(r#"{"type":"atomic","points":[[0.0,0.0]],"masses":[2.0]}"#)
                .unwrap();
        assert_eq!(spec.build().unwrap().total_mass(), 2.0);
        let spec: MeasureSpec =
            serde_json::from_str(r#"{"type":"density","name":"power","a":0.5}"#).unwrap();
        assert_relative_eq!(
            spec.build().unwrap().total_mass(),
            // 2∫ s (1-s)^{1/2} ds = 2·4/15
            8.0 / 15.0,
            max_relative = 1e-10
        );
        let spec: MeasureSpec = serde_json::from_str(
            r#"{"type":"radial","weight":{"type":"standard","alpha":1.0}}"#,
        )
        .unwrap();
        assert_relative_eq!(spec.build().unwrap().total_mass(), 1.0, max_relative = 1e-12);
        assert!(serde_json::from_str::<MeasureSpec>(r#"{"type":"density","name":"x","a":1}"#)
            .unwrap()
            .build()
            .is_err());
    }
}
