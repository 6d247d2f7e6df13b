//! Small statistical helpers for Monte Carlo summaries and tests.

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{check_dims, Result, SmcError};

/// Sample mean and its standard error (`s/√n`, with `s` the unbiased sd).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Linearly interpolated quantile of sorted data (`p ∈ [0, 1]`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Bootstrap standard error of `statistic` over `resamples` resamples.
pub fn bootstrap_stderr<R: Rng + ?Sized>(
    xs: &[f64],
    statistic: impl Fn(&[f64]) -> f64,
    resamples: usize,
    rng: &mut R,
) -> f64 {
    if xs.len() < 2 || resamples < 2 {
        return f64::NAN;
    }
    let mut buf = vec![0.0; xs.len()];
    let stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = xs[rng.random_range(0..xs.len())];
            }
            statistic(&buf)
        })
        .collect();
    let (_, se) = mean_stderr(&stats);
    se * (resamples as f64).sqrt()
}

/// Least-squares line `y ≈ intercept + slope · x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    check_dims(x.len(), y.len())?;
    if x.len() < 2 {
        return Err(SmcError::Domain("a line fit needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SmcError::Domain("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { intercept: my - slope * mx, slope, r_squared })
}

/// Pearson goodness-of-fit result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareTest {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

/// Pearson test of observed counts against probabilities. Adjacent bins are
/// merged left to right until each expected count is at least 5; a short
/// remainder joins the last merged bin.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquareTest> {
    check_dims(probs.len(), observed.len())?;
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(SmcError::Domain("no observations".into()));
    }
    let n = total as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &p) in observed.iter().zip(probs) {
        o += ob as f64;
        e += p * n;
        if e >= 5.0 {
            bins.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if o > 0.0 || e > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => bins.push((o, e)),
        }
    }
    if bins.len() < 2 {
        return Err(SmcError::Domain("fewer than two bins after merging".into()));
    }
    let statistic: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| SmcError::Domain(e.to_string()))?;
    Ok(ChiSquareTest { statistic, dof, p_value: 1.0 - dist.cdf(statistic) })
}

/// Counts of `values` in bins `0..size`.
pub fn histogram(values: impl IntoIterator<Item = usize>, size: usize) -> Vec<u64> {
    let mut h = vec![0u64; size];
    for v in values {
        h[v] += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_from_seed;

    #[test]
    fn mean_and_quantiles() {
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(quantile(&[0.0, 10.0], 0.9), 9.0);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 3.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn chi_square_reference_value() {
        // Statistic 4 on one degree of freedom.
        let t = chi_square_gof(&[60, 40], &[0.5, 0.5]).unwrap();
        assert_eq!(t.dof, 1);
        assert!((t.statistic - 4.0).abs() < 1e-12);
        assert!((t.p_value - 0.045_500_263_896_358).abs() < 1e-9);
        let t = chi_square_gof(&[10, 0, 0, 90], &[0.1, 0.001, 0.001, 0.898]).unwrap();
        assert_eq!(t.dof, 1);
    }

    #[test]
    fn bootstrap_of_mean_close_to_stderr() {
        let mut rng = stream_from_seed(1);
        let xs: Vec<f64> = (0..400).map(|i| (i % 7) as f64).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let b = bootstrap_stderr(&xs, mean, 2000, &mut rng);
        let (_, se) = mean_stderr(&xs);
        assert!((b / se - 1.0).abs() < 0.1, "{b} vs {se}");
    }
}
