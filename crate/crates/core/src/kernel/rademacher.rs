use num_complex::Complex64;
use serde::Serialize;

use super::function::{AnalyticFunction, KernelAtom};
use crate::error::{Error, Result};

/// Largest number of terms enumerated exactly.
pub const MAX_TERMS: usize = 20;

/// `r_k(t) = sign(sin(2^k π t))`, with `+1` on the null set where the sine
/// vanishes.
pub fn rademacher_eval(k: u32, t: f64) -> Result<i8> {
    if k == 0 || !(t > 0.0 && t < 1.0) {
        return Err(Error::domain(format!("Rademacher function needs k >= 1, t in (0,1); got k={k}, t={t}")));
    }
    // sin(πx) > 0 exactly when floor(x) is even; 2^k t is exact in binary.
    let x = t * (k as f64).exp2();
    if x.fract() == 0.0 {
        return Ok(1);
    }
    Ok(if (x.floor() as u64) % 2 == 0 { 1 } else { -1 })
}

/// `Σ c_k r_k(t) F_k` for kernel atoms `F_k`.
pub fn rademacher_combination(
    c: &[Complex64],
    atoms: &[KernelAtom],
    t: f64,
) -> Result<AnalyticFunction> {
    if c.len() != atoms.len() {
        return Err(Error::param("one coefficient per atom required"));
    }
    let mut out = Vec::with_capacity(atoms.len());
    for (k, (ck, atom)) in c.iter().zip(atoms).enumerate() {
        let sign = rademacher_eval(k as u32 + 1, t)? as f64;
        out.push(KernelAtom {
            c: atom.c * ck * sign,
            ..*atom
        });
    }
    Ok(AnalyticFunction::atoms(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KhinchinResult {
    /// `(Σ|c_k|^2)^{1/2}`.
    pub lhs: f64,
    /// `(∫_0^1 |Σ c_k r_k(t)|^p dt)^{1/p}`.
    pub rhs: f64,
    pub ratio: f64,
}

/// Visits `Σ ε_k x_k` for every sign pattern, in Gray-code order.
fn for_each_sign_sum<F: FnMut(&[Complex64])>(x: &[Vec<Complex64>], mut visit: F) {
    let k = x.len();
    let dim = x.first().map_or(1, |v| v.len());
    let mut signs = vec![1.0f64; k];
    let mut sum = vec![Complex64::new(0.0, 0.0); dim];
    for v in x {
        for (s, xi) in sum.iter_mut().zip(v) {
            *s += xi;
        }
    }
    visit(&sum);
    for step in 1u64..(1u64 << k) {
        let j = step.trailing_zeros() as usize;
        signs[j] = -signs[j];
        for (s, xi) in sum.iter_mut().zip(&x[j]) {
            *s += xi * (2.0 * signs[j]);
        }
        visit(&sum);
    }
}

fn check_terms(k: usize) -> Result<()> {
    if k > MAX_TERMS {
        return Err(Error::param(format!(
            "exact enumeration supports at most {MAX_TERMS} terms, got {k}"
        )));
    }
    Ok(())
}

/// Both sides of Khinchin's inequality, the average over `t` taken exactly
/// over all `2^K` sign patterns.
pub fn khinchin_check(c: &[Complex64], p: f64) -> Result<KhinchinResult> {
    check_terms(c.len())?;
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::param(format!("exponent must be positive, got {p}")));
    }
    let lhs = c.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let cols: Vec<Vec<Complex64>> = c.iter().map(|c| vec![*c]).collect();
    let mut acc = 0.0;
    for_each_sign_sum(&cols, |s| acc += s[0].norm().powf(p));
    let rhs = (acc / (1u64 << c.len()) as f64).powf(1.0 / p);
    Ok(KhinchinResult {
        lhs,
        rhs,
        ratio: lhs / rhs,
    })
}

/// `(E‖Σ ε_k x_k‖^p)^{1/p} / (E‖Σ ε_k x_k‖^q)^{1/q}` for vectors in `C^d`
/// with the Euclidean norm, by exact enumeration.
pub fn kahane_ratio(x: &[Vec<Complex64>], p: f64, q: f64) -> Result<f64> {
    check_terms(x.len())?;
    if !(p > 0.0 && q > 0.0) {
        return Err(Error::param("Kahane exponents must be positive"));
    }
    let dim = x.first().map_or(0, |v| v.len());
    if x.iter().any(|v| v.len() != dim) {
        return Err(Error::param("all vectors must have the same dimension"));
    }
    let (mut ap, mut aq) = (0.0, 0.0);
    for_each_sign_sum(x, |s| {
        let n = s.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        ap += n.powf(p);
        aq += n.powf(q);
    });
    let count = (1u64 << x.len()) as f64;
    Ok((ap / count).powf(1.0 / p) / (aq / count).powf(1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::geometry::DiskPoint;

    #[test]
    fn rademacher_examples() {
        assert_eq!(rademacher_eval(1, 0.3).unwrap(), 1);
        assert_eq!(rademacher_eval(2, 0.3).unwrap(), -1);
        assert!(rademacher_eval(0, 0.3).is_err());
        assert!(rademacher_eval(1, 1.0).is_err());
        // Midpoints of the dyadic intervals of length 2^{-k} alternate.
        for k in 1..8u32 {
            for j in 0..(1u32 << k) {
                let t = (2 * j + 1) as f64 / (1u64 << (k + 1)) as f64;
                let expect = if j % 2 == 0 { 1 } else { -1 };
                assert_eq!(rademacher_eval(k, t).unwrap(), expect);
            }
        }
    }

    #[test]
    fn rademacher_matches_sine_sign() {
        for k in 1..10u32 {
            for i in 1..200 {
                let t = i as f64 / 200.0 + 1e-4;
                let s = ((k as f64).exp2() * std::f64::consts::PI * t).sin();
                if s.abs() > 1e-9 {
                    assert_eq!(rademacher_eval(k, t).unwrap() as f64, s.signum());
                }
            }
        }
    }

    #[test]
    fn khinchin_examples() {
        let one = [Complex64::new(1.0, 0.0)];
        for p in [0.5, 1.0, 3.0] {
            assert_relative_eq!(khinchin_check(&one, p).unwrap().ratio, 1.0, max_relative = 1e-15);
        }
        let two = [Complex64::new(1.0, 0.0); 2];
        let r = khinchin_check(&two, 1.0).unwrap();
        assert_relative_eq!(r.rhs, 1.0);
        assert_relative_eq!(r.ratio, 2f64.sqrt(), max_relative = 1e-15);
        let c: Vec<Complex64> = (0..9).map(|k| Complex64::new(k as f64, 1.0 - k as f64)).collect();
        assert_relative_eq!(khinchin_check(&c, 2.0).unwrap().ratio, 1.0, max_relative = 1e-12);
        assert!(khinchin_check(&vec![Complex64::new(1.0, 0.0); 21], 1.0).is_err());
    }

    #[test]
    fn combination_signs() {
        let atoms = vec![
            KernelAtom {
                a: DiskPoint::ORIGIN,
                c: Complex64::new(1.0, 0.0),
                gamma: 4.0,
            };
            2
        ];
        let c = [Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)];
        let f = rademacher_combination(&c, &atoms, 0.3).unwrap();
        // r_1(0.3) = 1, r_2(0.3) = -1, atoms at 0 are constant 1.
        assert_relative_eq!(f.eval(Complex64::new(0.2, 0.0)).re, -1.0);
    }
}
