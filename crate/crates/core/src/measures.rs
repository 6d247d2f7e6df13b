//! Finite probability measures, total variation and Hellinger distances, and
//! the maximal coupling of two finite laws.

use rand::Rng;

use crate::error::{check_dims, Result, SmcError};

/// Entries below this (negative) value are rejected at construction.
pub const NEGATIVE_TOLERANCE: f64 = -1e-12;

/// A probability vector over the alphabet `{0, …, S-1}`.
///
/// Construction clamps tiny negative entries to zero and renormalises, so
/// every value of this type lies on the simplex up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePmf {
    probs: Vec<f64>,
}

impl DiscretePmf {
    /// Builds a pmf from non-negative masses (not necessarily normalised).
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(SmcError::Domain("empty alphabet".into()));
        }
        let mut probs = masses;
        for p in probs.iter_mut() {
            if !p.is_finite() || *p < NEGATIVE_TOLERANCE {
                return Err(SmcError::Domain(format!("invalid probability mass {p}")));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(SmcError::Domain("total mass must be positive and finite".into()));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(DiscretePmf { probs })
    }

    pub fn uniform(size: usize) -> Result<Self> {
        Self::new(vec![1.0; size])
    }

    /// Point mass at `symbol`.
    pub fn dirac(size: usize, symbol: usize) -> Result<Self> {
        if symbol >= size {
            return Err(SmcError::Domain(format!("symbol {symbol} outside alphabet of size {size}")));
        }
        let mut probs = vec![0.0; size];
        probs[symbol] = 1.0;
        Ok(DiscretePmf { probs })
    }

    /// Law on `{0, 1}` with mass `p` on 1.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(SmcError::Domain(format!("Bernoulli parameter {p} outside [0,1]")));
        }
        Ok(DiscretePmf { probs: vec![1.0 - p, p] })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, symbol: usize) -> f64 {
        self.probs.get(symbol).copied().unwrap_or(0.0)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// `Σ_s p_s f(s)`.
    pub fn expectation(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.probs.iter().enumerate().map(|(s, p)| p * f(s)).sum()
    }

    /// Inverse-CDF draw with a single uniform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_unnormalised(&self.probs, 1.0, rng)
    }
}

/// Inverse-CDF draw from masses summing to `total` (linear scan; alphabets
/// here are small).
pub(crate) fn sample_unnormalised<R: Rng + ?Sized>(masses: &[f64], total: f64, rng: &mut R) -> usize {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (s, &m) in masses.iter().enumerate() {
        if m > 0.0 {
            acc += m;
            last_positive = s;
            if u < acc {
                return s;
            }
        }
    }
    last_positive
}

/// Total variation distance `½ Σ |p_s − q_s|`.
pub fn tv_distance(p: &DiscretePmf, q: &DiscretePmf) -> Result<f64> {
    check_dims(p.len(), q.len())?;
    Ok(half_l1(p.probs(), q.probs()))
}

/// `½ Σ |a_s − b_s|` on raw slices of equal length.
pub fn half_l1(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Rounding can push the sum of two unit masses a few ulps past 2.
    (0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()).min(1.0)
}

/// Squared Hellinger distance `1 − Σ √(p_s q_s)`.
pub fn hellinger_sq(p: &DiscretePmf, q: &DiscretePmf) -> Result<f64> {
    check_dims(p.len(), q.len())?;
    let affinity: f64 = p.probs().iter().zip(q.probs()).map(|(a, b)| (a * b).sqrt()).sum();
    Ok((1.0 - affinity).clamp(0.0, 1.0))
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(SmcError::Domain(format!("{name} = {x} outside [0,1]")))
    }
}

/// Squared Hellinger distance between `n`-fold products of two laws whose
/// squared Hellinger distance is `h2`: `1 − (1 − h2)^n`.
pub fn hellinger_sq_product(h2: f64, n: u32) -> Result<f64> {
    check_unit("squared Hellinger distance", h2)?;
    if n == 0 {
        return Err(SmcError::Domain("number of factors must be positive".into()));
    }
    Ok(1.0 - (1.0 - h2).powi(n as i32))
}

/// Upper bound `1 − Π (1 − tv_i)` on the total variation between product
/// measures with per-factor distances `tvs`.
pub fn product_tv_upper(tvs: &[f64]) -> Result<f64> {
    let mut overlap = 1.0;
    for &t in tvs {
        check_unit("total variation", t)?;
        overlap *= 1.0 - t;
    }
    Ok(1.0 - overlap)
}

/// Le Cam upper bound on total variation from the squared Hellinger
/// distance: `√(1 − (1 − h2)²)`.
pub fn lecam_tv_upper(h2: f64) -> Result<f64> {
    check_unit("squared Hellinger distance", h2)?;
    let a = 1.0 - h2;
    Ok((1.0 - a * a).max(0.0).sqrt())
}

/// Draws `(x, y)` from a maximal coupling of `p` and `q`.
///
/// With probability `Σ min(p, q)` both coordinates share a draw from the
/// normalised overlap; otherwise they are drawn independently from the
/// normalised residuals `(p − q)⁺` and `(q − p)⁺`, whose supports are
/// disjoint. Hence `P(x ≠ y) = tv_distance(p, q)` exactly.
pub fn max_couple_discrete<R: Rng + ?Sized>(
    p: &DiscretePmf,
    q: &DiscretePmf,
    rng: &mut R,
) -> Result<(usize, usize)> {
    check_dims(p.len(), q.len())?;
    Ok(max_couple_slices(p.probs(), q.probs(), rng))
}

pub(crate) fn max_couple_slices<R: Rng + ?Sized>(p: &[f64], q: &[f64], rng: &mut R) -> (usize, usize) {
    let size = p.len();
    let mut overlap = Vec::with_capacity(size);
    let mut res_p = Vec::with_capacity(size);
    let mut res_q = Vec::with_capacity(size);
    for (&a, &b) in p.iter().zip(q) {
        let m = a.min(b);
        overlap.push(m);
        res_p.push(a - m);
        res_q.push(b - m);
    }
    let overlap_mass: f64 = overlap.iter().sum();
    let residual_mass_p: f64 = res_p.iter().sum();
    let residual_mass_q: f64 = res_q.iter().sum();
    let u = rng.random::<f64>();
    if residual_mass_p <= 0.0 || residual_mass_q <= 0.0 || u < overlap_mass {
        let z = sample_unnormalised(&overlap, overlap_mass, rng);
        (z, z)
    } else {
        let x = sample_unnormalised(&res_p, residual_mass_p, rng);
        let y = sample_unnormalised(&res_q, residual_mass_q, rng);
        (x, y)
    }
}

/// Given `x ~ p`, draws `y` so that `(x, y)` is a maximal coupling of
/// `(p, q)`: keep `x` with probability `1 ∧ q(x)/p(x)`, otherwise draw from
/// the normalised residual `(q − p)⁺`.
pub fn cond_max_couple_discrete<R: Rng + ?Sized>(
    x: usize,
    p: &DiscretePmf,
    q: &DiscretePmf,
    rng: &mut R,
) -> Result<usize> {
    check_dims(p.len(), q.len())?;
    let px = p.prob(x);
    let qx = q.prob(x);
    if px <= 0.0 {
        return Err(SmcError::Domain(format!("conditioning symbol {x} has zero mass")));
    }
    if qx >= px || rng.random::<f64>() < qx / px {
        return Ok(x);
    }
    let residual: Vec<f64> = p.probs().iter().zip(q.probs()).map(|(a, b)| (b - a).max(0.0)).collect();
    let mass: f64 = residual.iter().sum();
    Ok(sample_unnormalised(&residual, mass, rng))
}
