//! Exact count-chain computations for two-state models.
//!
//! With states `{0, 1}` the particle filter is exchangeable, and the number
//! `C_n` of particles in state 1 is itself a Markov chain:
//! `C_n | C_{n−1} = c ~ Binomial(N, p_n(c))` with
//! `w(c) = g₁c / (g₀(N−c) + g₁c)` and
//! `p_n(c) = (1 − w(c)) M_n(0,1) + w(c) M_n(1,1)`, where `g = G_{n−1}`.
//! Total variation distances between exchangeable particle laws reduce to
//! distances between count laws, which are evolved here exactly.
//!
//! Binomial rows are evaluated from the mode outwards with the ratio
//! recurrence, re-anchored on the log-gamma formula every
//! [`ANCHOR_STRIDE`] entries. Standalone rows stop where the pmf underflows
//! `f64`. Inside a chain step, products `w_c · Binomial(N, p(c))(c′)` below
//! [`NEGLIGIBLE`] are skipped; with at most `(N+1)²` of them the mass lost
//! per step stays below `1e-21` for `N ≤ 8192`, well under the resolution
//! of `f64` at unit scale, and each step is renormalised.

use statrs::function::factorial::ln_factorial;

use crate::error::{check_dims, Result, SmcError};
use crate::fkmodel::{propagate, DiscreteFkModel};
use crate::measures::{half_l1, DiscretePmf};

/// Recurrence steps between exact log-gamma evaluations of a binomial row.
pub const ANCHOR_STRIDE: usize = 32;

/// Products of a source weight and a row entry below this are skipped.
pub const NEGLIGIBLE: f64 = 1e-30;

const TINY: f64 = f64::MIN_POSITIVE;

/// `ln n!` for `n = 0..=max`.
#[derive(Debug, Clone)]
pub struct LnFactorials(Vec<f64>);

impl LnFactorials {
    pub fn new(max: usize) -> Self {
        LnFactorials((0..=max as u64).map(ln_factorial).collect())
    }

    pub fn max(&self) -> usize {
        self.0.len() - 1
    }

    /// `ln Binomial(n, p)(j)`.
    pub fn ln_binomial_pmf(&self, n: usize, p: f64, j: usize) -> f64 {
        debug_assert!(n <= self.max() && j <= n);
        let t = &self.0;
        let lc = t[n] - t[j] - t[n - j];
        let a = if j == 0 { 0.0 } else { j as f64 * p.ln() };
        let b = if j == n { 0.0 } else { (n - j) as f64 * (-p).ln_1p() };
        lc + a + b
    }
}

/// The non-negligible part of a binomial pmf: entries `start..start+len`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinomialWindow {
    pub start: usize,
    pub values: Vec<f64>,
}

impl BinomialWindow {
    /// Expands into the full pmf over `0..=n`.
    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n + 1];
        out[self.start..self.start + self.values.len()].copy_from_slice(&self.values);
        out
    }
}

/// `Binomial(n, p)` restricted to entries at least the smallest normal
/// `f64`; `lnf` must cover `n`.
pub fn binomial_window(n: usize, p: f64, lnf: &LnFactorials) -> BinomialWindow {
    binomial_window_above(n, p, lnf, TINY)
}

/// The contiguous run of `Binomial(n, p)` entries around the mode that are
/// at least `threshold` (empty if the mode itself is below it).
pub fn binomial_window_above(n: usize, p: f64, lnf: &LnFactorials, threshold: f64) -> BinomialWindow {
    if p <= 0.0 {
        return BinomialWindow { start: 0, values: vec![1.0] };
    }
    if p >= 1.0 {
        return BinomialWindow { start: n, values: vec![1.0] };
    }
    let mode = (((n + 1) as f64 * p).floor() as usize).min(n);
    let odds = p / (1.0 - p);
    let exact = |j: usize| lnf.ln_binomial_pmf(n, p, j).exp();

    let mut right = Vec::new();
    let mut v = exact(mode);
    if v < threshold {
        return BinomialWindow { start: mode, values: right };
    }
    right.push(v);
    for j in mode + 1..=n {
        v = if (j - mode) % ANCHOR_STRIDE == 0 { exact(j) } else { v * odds * (n - j + 1) as f64 / j as f64 };
        if v < threshold {
            break;
        }
        right.push(v);
    }

    let mut left = Vec::new();
    let mut v = right[0];
    for j in (0..mode).rev() {
        v = if (mode - j) % ANCHOR_STRIDE == 0 { exact(j) } else { v / odds * (j + 1) as f64 / (n - j) as f64 };
        if v < threshold {
            break;
        }
        left.push(v);
    }

    let start = mode - left.len();
    left.reverse();
    left.extend(right);
    BinomialWindow { start, values: left }
}

fn require_two_state(model: &DiscreteFkModel) -> Result<()> {
    if model.states() == 2 {
        Ok(())
    } else {
        Err(SmcError::Unsupported(format!("count chain needs a two-state model, got {} states", model.states())))
    }
}

/// `p(c)` for the step from time `time` to `time + 1`.
fn success_probability(model: &DiscreteFkModel, time: usize, n: usize, c: usize) -> f64 {
    let g = model.potential_vector(time);
    let m = model.mutation(time + 1);
    let (w0, w1) = (g[0] * (n - c) as f64, g[1] * c as f64);
    let w = w1 / (w0 + w1);
    (1.0 - w) * m.get(0, 1) + w * m.get(1, 1)
}

/// Law of the number of particles in state 1 at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct CountChainDistribution {
    n_particles: usize,
    weights: Vec<f64>,
    time: usize,
}

impl CountChainDistribution {
    pub fn new(weights: Vec<f64>, time: usize) -> Result<Self> {
        if weights.is_empty() {
            return Err(SmcError::Domain("count law needs at least one entry".into()));
        }
        let pmf = DiscretePmf::new(weights)?;
        Ok(CountChainDistribution { n_particles: pmf.len() - 1, weights: pmf.into_vec(), time })
    }

    /// All particles equal: `c = 0` or `c = N`, or anything between.
    pub fn point_mass(n_particles: usize, count: usize, time: usize) -> Result<Self> {
        if count > n_particles {
            return Err(SmcError::Domain(format!("count {count} exceeds N = {n_particles}")));
        }
        let mut weights = vec![0.0; n_particles + 1];
        weights[count] = 1.0;
        Ok(CountChainDistribution { n_particles, weights, time })
    }

    /// `C_0 ~ Binomial(N, η₀(1))` for i.i.d. initial particles.
    pub fn initial(model: &DiscreteFkModel, n_particles: usize) -> Result<Self> {
        require_two_state(model)?;
        let lnf = LnFactorials::new(n_particles);
        let w = binomial_window(n_particles, model.initial().prob(1), &lnf);
        Ok(CountChainDistribution { n_particles, weights: w.to_dense(n_particles), time: 0 })
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn to_pmf(&self) -> DiscretePmf {
        DiscretePmf::new(self.weights.clone()).expect("count law stays on the simplex")
    }

    /// `E[C/N]`.
    pub fn mean_proportion(&self) -> f64 {
        let n = self.n_particles as f64;
        self.weights.iter().enumerate().map(|(c, w)| w * c as f64).sum::<f64>() / n
    }

    /// `Var[C/N]`.
    pub fn variance_proportion(&self) -> f64 {
        let n = self.n_particles as f64;
        let m = self.mean_proportion();
        self.weights.iter().enumerate().map(|(c, w)| w * (c as f64 / n - m).powi(2)).sum()
    }

    /// `½ Σ_c |P(C = c) − P(C̃ = c)|`.
    pub fn tv(&self, other: &Self) -> Result<f64> {
        check_dims(self.weights.len(), other.weights.len())?;
        Ok(half_l1(&self.weights, &other.weights))
    }
}

/// `Binomial(N, p(c))`: the law of the next count given `c` particles in
/// state 1 at time `time`.
pub fn count_transition_row(model: &DiscreteFkModel, n_particles: usize, c: usize, time: usize) -> Result<DiscretePmf> {
    require_two_state(model)?;
    if c > n_particles {
        return Err(SmcError::Domain(format!("count {c} exceeds N = {n_particles}")));
    }
    let lnf = LnFactorials::new(n_particles);
    let p = success_probability(model, time, n_particles, c);
    DiscretePmf::new(binomial_window(n_particles, p, &lnf).to_dense(n_particles))
}

fn evolve_with(dist: &CountChainDistribution, model: &DiscreteFkModel, lnf: &LnFactorials) -> CountChainDistribution {
    let n = dist.n_particles;
    let mut out = vec![0.0; n + 1];
    for (c, &w) in dist.weights.iter().enumerate() {
        if w < NEGLIGIBLE {
            continue;
        }
        let row = binomial_window_above(n, success_probability(model, dist.time, n, c), lnf, NEGLIGIBLE / w);
        for (o, v) in out[row.start..row.start + row.values.len()].iter_mut().zip(&row.values) {
            *o += w * v;
        }
    }
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    CountChainDistribution { n_particles: n, weights: out, time: dist.time + 1 }
}

/// One step of the count chain: `w′_{c′} = Σ_c w_c Binomial(N, p(c))(c′)`.
pub fn evolve_counts(dist: &CountChainDistribution, model: &DiscreteFkModel) -> Result<CountChainDistribution> {
    require_two_state(model)?;
    Ok(evolve_with(dist, model, &LnFactorials::new(dist.n_particles)))
}

/// The count laws at times `dist.time ..= dist.time + steps`.
pub fn evolve_counts_path(
    dist: &CountChainDistribution,
    model: &DiscreteFkModel,
    steps: usize,
) -> Result<Vec<CountChainDistribution>> {
    require_two_state(model)?;
    let lnf = LnFactorials::new(dist.n_particles);
    let mut path = Vec::with_capacity(steps + 1);
    path.push(dist.clone());
    for _ in 0..steps {
        let next = evolve_with(path.last().expect("nonempty"), model, &lnf);
        path.push(next);
    }
    Ok(path)
}

/// TV between the particle laws at time `k` started from all-zeros and
/// all-ones, for `k = 0..=k_max`.
pub fn forgetting_tv_profile(model: &DiscreteFkModel, n_particles: usize, k_max: usize) -> Result<Vec<f64>> {
    require_two_state(model)?;
    if n_particles == 0 {
        return Err(SmcError::Domain("N must be positive".into()));
    }
    let lnf = LnFactorials::new(n_particles);
    let mut zeros = CountChainDistribution::point_mass(n_particles, 0, 0)?;
    let mut ones = CountChainDistribution::point_mass(n_particles, n_particles, 0)?;
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(zeros.tv(&ones)?);
    for _ in 0..k_max {
        zeros = evolve_with(&zeros, model, &lnf);
        ones = evolve_with(&ones, model, &lnf);
        out.push(zeros.tv(&ones)?);
    }
    Ok(out)
}

/// `‖M_{0,k}(x₀, ·) − M_{0,k}(x̃₀, ·)‖_TV` for `x₀ = (0,…,0)` and
/// `x̃₀ = (1,…,1)`.
pub fn exact_forgetting_tv(model: &DiscreteFkModel, n_particles: usize, k: usize) -> Result<f64> {
    Ok(*forgetting_tv_profile(model, n_particles, k)?.last().expect("nonempty"))
}

/// `1 − (2/N)(1 − (1−2ε)²)^{−1}(1−2ε)^{−2k}`, a lower bound on the
/// forgetting TV of the flip model with constant potentials.
pub fn forgetting_lower_bound(epsilon: f64, n_particles: usize, k: usize) -> f64 {
    let r = 1.0 - 2.0 * epsilon;
    1.0 - 2.0 / n_particles as f64 / (1.0 - r * r) * r.powi(-2 * k as i32)
}

/// Closed-form moments of the proportion of ones for the flip model with
/// constant potentials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountMoments {
    /// `E[P_n]` for the chain started at all-ones.
    pub mean_p: f64,
    /// `E[P̃_n]` for the chain started at all-zeros.
    pub mean_ptilde: f64,
    /// Upper bound on both variances.
    pub var_upper: f64,
}

pub fn exact_moments(epsilon: f64, n_particles: usize, n: usize) -> Result<CountMoments> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(SmcError::Domain(format!("flip probability {epsilon} outside (0, 1/2)")));
    }
    if n_particles == 0 {
        return Err(SmcError::Domain("N must be positive".into()));
    }
    let r = 1.0 - 2.0 * epsilon;
    let half = r.powi(n as i32) / 2.0;
    Ok(CountMoments {
        mean_p: 0.5 + half,
        mean_ptilde: 0.5 - half,
        var_upper: 1.0 / (4.0 * n_particles as f64 * (1.0 - r * r)),
    })
}

/// `‖Law(X_k^{1:q}) − η_k^{⊗q}‖_TV` for each `q` in `qs`, particles
/// initialised i.i.d. from `η₀`.
pub fn exact_poc_tv_grid(model: &DiscreteFkModel, n_particles: usize, qs: &[usize], k: usize) -> Result<Vec<f64>> {
    require_two_state(model)?;
    if n_particles == 0 {
        return Err(SmcError::Domain("N must be positive".into()));
    }
    if let Some(&q) = qs.iter().find(|&&q| q == 0 || q > n_particles) {
        return Err(SmcError::Domain(format!("q = {q} outside 1..={n_particles}")));
    }
    if k == 0 {
        return Ok(vec![0.0; qs.len()]);
    }
    let lnf = LnFactorials::new(n_particles);
    let mut dist = CountChainDistribution::initial(model, n_particles)?;
    for _ in 0..k - 1 {
        dist = evolve_with(&dist, model, &lnf);
    }
    let eta_k = propagate(model, k, model.initial())?.prob(1);

    let mut out = Vec::with_capacity(qs.len());
    for &q in qs {
        let mut a = vec![0.0; q + 1];
        for (c, &w) in dist.weights.iter().enumerate() {
            if w < NEGLIGIBLE {
                continue;
            }
            let p = success_probability(model, k - 1, n_particles, c);
            let row = binomial_window_above(q, p, &lnf, NEGLIGIBLE / w);
            for (o, v) in a[row.start..row.start + row.values.len()].iter_mut().zip(&row.values) {
                *o += w * v;
            }
        }
        let b = binomial_window(q, eta_k, &lnf).to_dense(q);
        out.push(half_l1(&a, &b).min(1.0));
    }
    Ok(out)
}

pub fn exact_poc_tv(model: &DiscreteFkModel, n_particles: usize, q: usize, k: usize) -> Result<f64> {
    Ok(exact_poc_tv_grid(model, n_particles, &[q], k)?[0])
}

/// Powers of two below `n` followed by `n` itself.
pub fn default_q_grid(n: usize) -> Vec<usize> {
    let mut qs: Vec<usize> = std::iter::successors(Some(1usize), |q| q.checked_mul(2)).take_while(|&q| q < n).collect();
    qs.push(n);
    qs
}

/// Checks `TV ≤ (1 − ε^N)^k + 1e-12` with `ε = (M̲/M̄)²`.
pub fn verify_small_n_bound(model: &DiscreteFkModel, n_particles: usize, k: usize) -> Result<bool> {
    let bound = model.stability_constants()?.small_n_bound(n_particles, k);
    Ok(exact_forgetting_tv(model, n_particles, k)? <= bound + 1e-12)
}

/// `f(N) = (1 − (1 − b/N)^{2N})^{1/2}`, defined for `N > b`.
pub fn monotone_bound_value(b: f64, n: f64) -> f64 {
    (-(2.0 * n * (-b / n).ln_1p()).exp_m1()).sqrt()
}

/// Checks that `f` is non-increasing within 1e-12 along the grid points
/// above `b` (taken in increasing order).
pub fn monotone_bound_check(b: f64, grid: &[usize]) -> Result<bool> {
    if !(b > 1.0) || !b.is_finite() {
        return Err(SmcError::Domain(format!("b = {b} must exceed 1")));
    }
    let mut ns: Vec<usize> = grid.iter().copied().filter(|&n| n as f64 > b).collect();
    ns.sort_unstable();
    ns.dedup();
    let values: Vec<f64> = ns.iter().map(|&n| monotone_bound_value(b, n as f64)).collect();
    Ok(values.windows(2).all(|w| w[1] <= w[0] + 1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fkmodel::binary_model;

    fn flip(g0: f64, g1: f64) -> DiscreteFkModel {
        binary_model(0.1, g0, g1, 100).unwrap()
    }

    fn direct_binomial(n: usize, p: f64) -> Vec<f64> {
        (0..=n)
            .map(|j| {
                let lc: f64 = (0..j).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum();
                (lc + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()).exp()
            })
            .collect()
    }

    #[test]
    fn binomial_window_matches_direct_formula() {
        for &(n, p) in &[(1, 0.3), (10, 0.1), (37, 0.5), (200, 0.82727), (1000, 0.9)] {
            let lnf = LnFactorials::new(n);
            let dense = binomial_window(n, p, &lnf).to_dense(n);
            let direct = direct_binomial(n, p);
            // ln n! near 6000 at n = 1000 leaves ~1e-12 relative error after cancellation.
            for (a, b) in dense.iter().zip(&direct) {
                assert!((a - b).abs() <= 1e-11 * b.max(1e-300) || (*b < TINY && *a == 0.0), "n={n} p={p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn binomial_rows_sum_to_one_up_to_8192() {
        let lnf = LnFactorials::new(8192);
        for n in [1usize, 2, 64, 1000, 4096, 8192] {
            for p in [0.1, 0.5, 0.9, 1e-3, 0.999] {
                let s: f64 = binomial_window(n, p, &lnf).values.iter().sum();
                assert!((s - 1.0).abs() < 1e-10, "n={n} p={p}: {s}");
            }
        }
    }

    #[test]
    fn transition_row_examples() {
        let m = flip(1.0, 1.0);
        let row = count_transition_row(&m, 5, 0, 0).unwrap();
        for (a, b) in row.probs().iter().zip(direct_binomial(5, 0.1)) {
            assert!((a - b).abs() < 1e-15);
        }
        let row = count_transition_row(&flip(0.3, 2.0), 7, 7, 0).unwrap();
        let mean: f64 = row.expectation(|c| c as f64);
        assert!((mean - 7.0 * 0.9).abs() < 1e-12);
        let p = success_probability(&flip(0.1, 1.0), 0, 2, 1);
        assert!((p - (0.1 + 0.8 * 10.0 / 11.0)).abs() < 1e-15);
        assert!(count_transition_row(&m, 5, 6, 0).is_err());
    }

    #[test]
    fn evolve_examples() {
        let m = flip(1.0, 1.0);
        let d = CountChainDistribution::point_mass(20, 0, 0).unwrap();
        let e = evolve_counts(&d, &m).unwrap();
        assert_eq!(e.time(), 1);
        for (a, b) in e.weights().iter().zip(direct_binomial(20, 0.1)) {
            assert!((a - b).abs() < 1e-14);
        }
        let sym = CountChainDistribution::initial(&m, 30).unwrap();
        let path = evolve_counts_path(&sym, &m, 10).unwrap();
        for d in &path {
            assert!((d.mean_proportion() - 0.5).abs() < 1e-12);
        }
        let m2 = flip(0.1, 1.0);
        let d = CountChainDistribution::point_mass(12, 4, 0).unwrap();
        let e = evolve_counts(&d, &m2).unwrap();
        let expected = 12.0 * success_probability(&m2, 0, 12, 4);
        assert!((e.mean_proportion() * 12.0 - expected).abs() < 1e-12);
    }

    #[test]
    fn forgetting_examples() {
        let m = flip(1.0, 1.0);
        assert_eq!(exact_forgetting_tv(&m, 10, 0).unwrap(), 1.0);
        assert!((exact_forgetting_tv(&m, 1, 1).unwrap() - 0.8).abs() < 1e-15);
        for n in [16usize, 64, 256] {
            let prof = forgetting_tv_profile(&m, n, 10).unwrap();
            for (k, v) in prof.iter().enumerate() {
                assert!(*v >= forgetting_lower_bound(0.1, n, k) - 1e-12);
            }
        }
    }

    #[test]
    fn moments_examples() {
        let m = exact_moments(0.1, 10, 0).unwrap();
        assert_eq!((m.mean_p, m.mean_ptilde), (1.0, 0.0));
        let m = exact_moments(0.1, 10, 2).unwrap();
        assert!((m.mean_p - 0.82).abs() < 1e-15);
        let m = exact_moments(0.499_999_999, 10, 3).unwrap();
        assert!((m.mean_p - 0.5).abs() < 1e-9);
        assert!(exact_moments(0.5, 10, 3).is_err());
    }

    #[test]
    fn moments_match_count_chain() {
        let m = flip(1.0, 1.0);
        for n_particles in [1usize, 17, 256] {
            let start = CountChainDistribution::point_mass(n_particles, n_particles, 0).unwrap();
            let path = evolve_counts_path(&start, &m, 30).unwrap();
            for (n, d) in path.iter().enumerate() {
                let cm = exact_moments(0.1, n_particles, n).unwrap();
                assert!((d.mean_proportion() - cm.mean_p).abs() < 1e-10);
                assert!(d.variance_proportion() <= cm.var_upper + 1e-15);
            }
        }
    }

    #[test]
    fn poc_examples() {
        let m = flip(1.0, 1.0);
        for k in [1usize, 3, 7] {
            assert!(exact_poc_tv(&m, 20, 1, k).unwrap() < 1e-12);
        }
        assert!(exact_poc_tv(&m, 20, 21, 3).is_err());
        assert_eq!(exact_poc_tv(&m, 20, 5, 0).unwrap(), 0.0);
        let m2 = flip(0.1, 1.0);
        let v: Vec<f64> = [64usize, 256, 1024].iter().map(|&n| exact_poc_tv(&m2, n, 4, 20).unwrap()).collect();
        assert!(v[0] > v[1] && v[1] > v[2], "{v:?}");
        assert_eq!(default_q_grid(8), vec![1, 2, 4, 8]);
        assert_eq!(default_q_grid(6), vec![1, 2, 4, 6]);
        assert_eq!(default_q_grid(1), vec![1]);
    }

    #[test]
    fn small_n_bound_examples() {
        let m = flip(1.0, 1.0);
        assert!(verify_small_n_bound(&m, 1, 1).unwrap());
        assert!(verify_small_n_bound(&m, 3, 0).unwrap());
        let c = m.stability_constants().unwrap();
        assert!((c.small_n_bound(1, 1) - 80.0 / 81.0).abs() < 1e-15);
    }

    #[test]
    fn monotone_examples() {
        let grid: Vec<usize> = (1..=1000).collect();
        assert!(monotone_bound_check(2.0, &grid).unwrap());
        assert!(monotone_bound_check(1.0001, &grid).unwrap());
        assert!(monotone_bound_value(2.0, 2.0001) > 0.999);
        assert!(monotone_bound_check(1.0, &grid).is_err());
    }

    #[test]
    fn non_binary_models_are_rejected() {
        use crate::fkmodel::{Schedule, StochasticMatrix};
        let m = DiscreteFkModel::new(
            DiscretePmf::uniform(3).unwrap(),
            Schedule::constant(StochasticMatrix::identity(3)),
            Schedule::constant(vec![1.0; 3]),
            5,
        )
        .unwrap();
        assert!(matches!(exact_forgetting_tv(&m, 4, 2), Err(SmcError::Unsupported(_))));
    }
}
