//! Hyperbolic geometry of the unit disk: Möbius maps, the Bergman metric,
//! Bergman disks, Carleson squares and separated covering lattices.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the open unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", try_from = "[f64; 2]")]
pub struct DiskPoint(Complex64);

impl DiskPoint {
    pub fn new(z: Complex64) -> Result<Self> {
        if z.re.is_finite() && z.im.is_finite() && z.norm() < 1.0 {
            Ok(Self(z))
        } else {
            Err(Error::domain(format!("{z} is not inside the unit disk")))
        }
    }

    pub fn real(x: f64) -> Result<Self> {
        Self::new(Complex64::new(x, 0.0))
    }

    pub fn polar(r: f64, theta: f64) -> Result<Self> {
        Self::new(Complex64::from_polar(r, theta))
    }

    pub const ORIGIN: DiskPoint = DiskPoint(Complex64::new(0.0, 0.0));

    #[inline]
    pub fn z(self) -> Complex64 {
        self.0
    }

    #[inline]
    pub fn modulus(self) -> f64 {
        self.0.norm()
    }

    /// `1 - |z|`, exact for real points.
    #[inline]
    pub fn gap(self) -> f64 {
        if self.0.im == 0.0 {
            1.0 - self.0.re.abs()
        } else {
            1.0 - self.0.norm()
        }
    }
}

impl From<DiskPoint> for [f64; 2] {
    fn from(p: DiskPoint) -> Self {
        [p.0.re, p.0.im]
    }
}

impl TryFrom<[f64; 2]> for DiskPoint {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        DiskPoint::new(Complex64::new(v[0], v[1]))
    }
}

/// `φ_a(z) = (a - z) / (1 - conj(a) z)`.
pub fn mobius(a: DiskPoint, z: DiskPoint) -> DiskPoint {
    DiskPoint(mobius_raw(a.z(), z.z()))
}

#[inline]
pub(crate) fn mobius_raw(a: Complex64, z: Complex64) -> Complex64 {
    (a - z) / (Complex64::new(1.0, 0.0) - a.conj() * z)
}

/// Bergman (hyperbolic) distance `β(a, z) = artanh |φ_a(z)|`.
pub fn bergman_distance(a: DiskPoint, z: DiskPoint) -> f64 {
    bergman_distance_raw(a.z(), z.z())
}

pub(crate) fn bergman_distance_raw(a: Complex64, z: Complex64) -> f64 {
    let denom = (Complex64::new(1.0, 0.0) - a.conj() * z).norm();
    let x = (a - z).norm() / denom;
    if x == 0.0 {
        return 0.0;
    }
    // 1 - x^2 written without cancellation.
    let one_minus_x2 = (1.0 - a.norm_sqr()) * (1.0 - z.norm_sqr()) / (denom * denom);
    (1.0 + x).ln() - 0.5 * one_minus_x2.ln()
}

/// The Bergman disk `D(z, r)`, stored with its Euclidean description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperbolicDisk {
    pub center: DiskPoint,
    pub radius: f64,
    /// Euclidean center.
    pub c: Complex64,
    /// Euclidean radius.
    pub rho: f64,
    /// `1 - |c|`.
    pub center_gap: f64,
}

impl HyperbolicDisk {
    pub fn new(center: DiskPoint, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param(format!("hyperbolic radius must be positive, got {radius}")));
        }
        let (c, rho) = disk_euclidean(center, radius);
        let s = radius.tanh();
        let m = center.modulus();
        let center_gap = center.gap() * (1.0 + s * s * m) / (1.0 - s * s * m * m);
        Ok(Self {
            center,
            radius,
            c,
            rho,
            center_gap,
        })
    }

    /// `1 - (|c| + ρ)`: distance from the disk to the unit circle.
    pub fn outer_gap(&self) -> f64 {
        let s = self.radius.tanh();
        let m = self.center.modulus();
        self.center.gap() * (1.0 - s) / (1.0 + s * m)
    }

    pub fn contains(&self, xi: Complex64) -> bool {
        // Cheap Euclidean reject before the exact test.
        if (xi - self.c).norm() > self.rho * (1.0 + 1e-9) + 1e-15 {
            return false;
        }
        xi.norm() < 1.0 && bergman_distance_raw(self.center.z(), xi) <= self.radius
    }
}

/// Euclidean center and radius of `D(z, r)`.
pub fn disk_euclidean(z: DiskPoint, r: f64) -> (Complex64, f64) {
    let s = r.tanh();
    let s2 = s * s;
    let m2 = z.z().norm_sqr();
    let denom = 1.0 - s2 * m2;
    let c = z.z() * ((1.0 - s2) / denom);
    let rho = s * (1.0 - m2) / denom;
    (c, rho)
}

/// Carleson square `S_z`; the vertex `z = 0` denotes the whole disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarlesonSquare {
    pub vertex: DiskPoint,
}

impl CarlesonSquare {
    pub fn new(vertex: DiskPoint) -> Self {
        Self { vertex }
    }

    pub fn is_whole_disk(&self) -> bool {
        self.vertex.modulus() == 0.0
    }

    /// Inner radius `|z|`.
    pub fn inner_radius(&self) -> f64 {
        self.vertex.modulus()
    }

    /// Half of the angular opening, `(1-|z|)/(2π)`.
    pub fn half_width(&self) -> f64 {
        self.vertex.gap() / (2.0 * PI)
    }

    pub fn contains(&self, xi: Complex64) -> bool {
        let r = xi.norm();
        if r >= 1.0 {
            return false;
        }
        if self.is_whole_disk() {
            return true;
        }
        if r < self.inner_radius() {
            return false;
        }
        angle_distance(xi.arg(), self.vertex.z().arg()) <= self.half_width()
    }
}

pub fn carleson_square(z: DiskPoint) -> CarlesonSquare {
    CarlesonSquare::new(z)
}

/// `|θ - φ|` reduced to `[0, π]`.
pub fn angle_distance(theta: f64, phi: f64) -> f64 {
    let d = (theta - phi).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// A region on which weights and measures are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Disk(HyperbolicDisk),
    Square(CarlesonSquare),
    Whole,
}

impl Region {
    pub fn contains(&self, xi: Complex64) -> bool {
        match self {
            Region::Disk(d) => d.contains(xi),
            Region::Square(s) => s.contains(xi),
            Region::Whole => xi.norm() < 1.0,
        }
    }

    /// Square with vertex 0 is normalised to the whole disk.
    pub fn normalized(self) -> Region {
        match self {
            Region::Square(s) if s.is_whole_disk() => Region::Whole,
            other => other,
        }
    }
}

/// Which kind of region a testing quantity is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Square,
    Disk { radius: f64 },
}

impl RegionKind {
    pub fn at(self, z: DiskPoint) -> Result<Region> {
        Ok(match self {
            RegionKind::Square => Region::Square(CarlesonSquare::new(z)).normalized(),
            RegionKind::Disk { radius } => Region::Disk(HyperbolicDisk::new(z, radius)?),
        })
    }
}

/// A finite separated point set built ring by ring.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub points: Vec<DiskPoint>,
    pub ring_index: Vec<usize>,
    pub separation: f64,
    pub covering: f64,
    pub cutoff: f64,
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points with `|a| >= r_min`.
    pub fn outside(&self, r_min: f64) -> impl Iterator<Item = DiskPoint> + '_ {
        self.points.iter().copied().filter(move |p| p.modulus() >= r_min)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "re,im,ring_index")?;
        for (p, k) in self.points.iter().zip(&self.ring_index) {
            writeln!(out, "{},{},{}", p.z().re, p.z().im, k)?;
        }
        Ok(())
    }
}

/// Largest number of equally spaced points on the circle of hyperbolic
/// radius `t` whose neighbours stay at least `s` apart.
fn ring_count(t: f64, s: f64) -> usize {
    let r = t.tanh();
    let neighbour = |n: usize| {
        let b = Complex64::from_polar(r, 2.0 * PI / n as f64);
        bergman_distance_raw(Complex64::new(r, 0.0), b)
    };
    let circumference = PI * (2.0 * t).sinh();
    let mut n = ((circumference / s).floor() as usize).max(1);
    while n > 1 && neighbour(n) < s {
        n -= 1;
    }
    while neighbour(n + 1) >= s {
        n += 1;
    }
    n
}

/// Concentric-ring lattice: ring `k` sits at hyperbolic radius `k s`, and
/// rings are added while their Euclidean radius stays within `1 - cutoff`.
pub fn generate_lattice(separation: f64, covering: f64, cutoff: f64) -> Result<Lattice> {
    if !(separation > 0.0) {
        return Err(Error::param("lattice separation must be positive"));
    }
    if separation > covering {
        return Err(Error::param(format!(
            "separation {separation} exceeds covering radius {covering}"
        )));
    }
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::param("lattice cutoff must lie in (0, 1)"));
    }
    let mut points = vec![DiskPoint::ORIGIN];
    let mut ring_index = vec![0];
    for k in 1.. {
        let t = k as f64 * separation;
        let r = t.tanh();
        if r > 1.0 - cutoff {
            break;
        }
        let n = ring_count(t, separation);
        for j in 0..n {
            let theta = 2.0 * PI * j as f64 / n as f64;
            points.push(DiskPoint(Complex64::from_polar(r, theta)));
            ring_index.push(k);
        }
    }
    Ok(Lattice {
        points,
        ring_index,
        separation,
        covering,
        cutoff,
    })
}

/// Greedy maximal separated subset of `candidates`; kept as an independent
/// construction for cross-checking the ring lattice.
pub fn greedy_lattice(candidates: &[DiskPoint], separation: f64) -> Vec<DiskPoint> {
    let mut chosen: Vec<DiskPoint> = Vec::new();
    for &p in candidates {
        if chosen
            .iter()
            .all(|&q| bergman_distance(p, q) >= separation)
        {
            chosen.push(p);
        }
    }
    chosen
}

/// Quasi-uniform probe points in hyperbolic measure on `|z| <= 1 - cutoff`.
pub fn probe_points(cutoff: f64, count: usize) -> Vec<DiskPoint> {
    let t_max = (1.0 - cutoff).atanh();
    let sh = t_max.sinh();
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    (0..count)
        .map(|i| {
            let u = (i as f64 + 0.5) / count as f64;
            let t = (u.sqrt() * sh).asinh();
            let theta = 2.0 * PI * (i as f64 * golden).fract();
            DiskPoint(Complex64::from_polar(t.tanh(), theta))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeReport {
    pub points: usize,
    pub probes: usize,
    pub min_pairwise: f64,
    pub max_probe_distance: f64,
    pub separated: bool,
    pub covering: bool,
}

struct SortedByRadius {
    radius: Vec<f64>,
    points: Vec<Complex64>,
}

impl SortedByRadius {
    fn new(points: &[DiskPoint]) -> Self {
        let mut v: Vec<(f64, Complex64)> = points
            .iter()
            .map(|p| (p.modulus().atanh(), p.z()))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            radius: v.iter().map(|x| x.0).collect(),
            points: v.iter().map(|x| x.1).collect(),
        }
    }

    /// Distance from `z` to the nearest stored point.
    fn nearest(&self, z: Complex64) -> f64 {
        if self.points.is_empty() {
            return f64::INFINITY;
        }
        let t = z.norm().atanh();
        let start = self.radius.partition_point(|&x| x < t);
        let mut best = f64::INFINITY;
        let mut lo = start as isize - 1;
        let mut hi = start;
        loop {
            let mut progressed = false;
            if hi < self.points.len() && self.radius[hi] - t < best {
                best = best.min(bergman_distance_raw(z, self.points[hi]));
                hi += 1;
                progressed = true;
            }
            if lo >= 0 && t - self.radius[lo as usize] < best {
                best = best.min(bergman_distance_raw(z, self.points[lo as usize]));
                lo -= 1;
                progressed = true;
            }
            if !progressed {
                return best;
            }
        }
    }

    /// Number of other points within `dist` (strictly) of point `i`.
    fn neighbours_within(&self, i: usize, dist: f64) -> usize {
        let t = self.radius[i];
        let z = self.points[i];
        let mut count = 0;
        for j in (0..i).rev() {
            if t - self.radius[j] >= dist {
                break;
            }
            if bergman_distance_raw(z, self.points[j]) < dist {
                count += 1;
            }
        }
        for j in i + 1..self.points.len() {
            if self.radius[j] - t >= dist {
                break;
            }
            if bergman_distance_raw(z, self.points[j]) < dist {
                count += 1;
            }
        }
        count
    }
}

/// Minimum pairwise Bergman distance, pruned by hyperbolic radius since
/// `β(a, b) >= |β(0, a) - β(0, b)|`.
pub fn min_pairwise_distance(points: &[DiskPoint]) -> f64 {
    let sorted = SortedByRadius::new(points);
    let n = sorted.points.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = f64::INFINITY;
            for j in i + 1..n {
                if sorted.radius[j] - sorted.radius[i] >= best {
                    break;
                }
                best = best.min(bergman_distance_raw(sorted.points[i], sorted.points[j]));
            }
            best
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Checks separation and covering of `lattice` against `probes`.
pub fn verify_lattice(lattice: &Lattice, probes: &[DiskPoint]) -> LatticeReport {
    let min_pairwise = min_pairwise_distance(&lattice.points);
    let sorted = SortedByRadius::new(&lattice.points);
    let max_probe_distance = probes
        .par_iter()
        .map(|p| sorted.nearest(p.z()))
        .reduce(|| 0.0, f64::max);
    let max_probe_distance = if lattice.points.is_empty() && !probes.is_empty() {
        f64::INFINITY
    } else {
        max_probe_distance
    };
    LatticeReport {
        points: lattice.points.len(),
        probes: probes.len(),
        min_pairwise,
        max_probe_distance,
        separated: min_pairwise >= lattice.separation - 1e-9,
        covering: !probes.is_empty() && max_probe_distance <= lattice.covering + 1e-6,
    }
}

/// Largest number of other disks `D(a_i, R)` meeting one disk `D(a_j, R)`.
pub fn overlap_multiplicity(lattice: &Lattice, radius: f64) -> usize {
    let sorted = SortedByRadius::new(&lattice.points);
    (0..sorted.points.len())
        .into_par_iter()
        .map(|i| sorted.neighbours_within(i, 2.0 * radius))
        .max()
        .unwrap_or(0)
}
