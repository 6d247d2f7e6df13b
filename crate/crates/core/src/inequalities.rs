//! Randomised checks of the distance inequalities the stability results
//! rest on. Each check draws its own cases and reports the worst excess of
//! the left-hand side over the right-hand side.

use rand::Rng;

use crate::error::Result;
use crate::exact::monotone_bound_check;
use crate::fkmodel::{ideal_contraction_tv, psi_update, DiscreteFkModel, Schedule, StochasticMatrix};
use crate::measures::{
    hellinger_sq, hellinger_sq_product, lecam_tv_upper, product_tv_upper, tv_distance, DiscretePmf,
};

/// Slack allowed for floating-point error.
pub const TOLERANCE: f64 = 1e-12;

/// Outcome of one randomised check.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub name: &'static str,
    pub cases: usize,
    pub violations: usize,
    /// Largest `lhs − rhs` seen (negative when every case holds strictly).
    pub max_excess: f64,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

struct Tally {
    report: InequalityReport,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally { report: InequalityReport { name, cases: 0, violations: 0, max_excess: f64::NEG_INFINITY } }
    }

    fn record(&mut self, lhs: f64, rhs: f64) {
        let excess = lhs - rhs;
        self.report.cases += 1;
        self.report.max_excess = self.report.max_excess.max(excess);
        if !(excess <= TOLERANCE) {
            self.report.violations += 1;
        }
    }
}

/// A random pmf on `size` symbols; some draws are sparse or nearly
/// degenerate to exercise the edges of the simplex.
pub fn random_pmf<R: Rng + ?Sized>(size: usize, rng: &mut R) -> DiscretePmf {
    let style = rng.random_range(0..4);
    let masses: Vec<f64> = (0..size)
        .map(|_| match style {
            0 => rng.random::<f64>(),
            1 => -rng.random::<f64>().ln(),
            2 => {
                if rng.random_bool(0.5) {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            }
            _ => rng.random::<f64>().powi(8),
        })
        .collect();
    if masses.iter().all(|m| *m == 0.0) {
        return DiscretePmf::dirac(size, rng.random_range(0..size)).expect("valid symbol");
    }
    DiscretePmf::new(masses).expect("nonnegative masses")
}

fn product_pmf(factors: &[DiscretePmf]) -> DiscretePmf {
    let mut probs = vec![1.0];
    for f in factors {
        probs = probs.iter().flat_map(|a| f.probs().iter().map(move |b| a * b)).collect();
    }
    DiscretePmf::new(probs).expect("product of pmfs")
}

/// `TV² ≤ 1 − (1 − H²)²` on random pairs with alphabets of 2–16 symbols.
pub fn check_lecam<R: Rng + ?Sized>(cases: usize, rng: &mut R) -> Result<InequalityReport> {
    let mut t = Tally::new("le_cam");
    for _ in 0..cases {
        let size = rng.random_range(2..=16);
        let (p, q) = (random_pmf(size, rng), random_pmf(size, rng));
        let tv = tv_distance(&p, &q)?;
        t.record(tv, lecam_tv_upper(hellinger_sq(&p, &q)?)?);
    }
    Ok(t.report)
}

/// `TV(⊗p_i, ⊗q_i) ≤ 1 − Π(1 − TV(p_i, q_i))` on enumerated products of up
/// to four factors.
pub fn check_product_tv<R: Rng + ?Sized>(cases: usize, rng: &mut R) -> Result<InequalityReport> {
    let mut t = Tally::new("product_tv");
    for _ in 0..cases {
        let n = rng.random_range(1..=4);
        let sizes: Vec<usize> = (0..n).map(|_| rng.random_range(2..=5)).collect();
        let ps: Vec<DiscretePmf> = sizes.iter().map(|&s| random_pmf(s, rng)).collect();
        let qs: Vec<DiscretePmf> = sizes.iter().map(|&s| random_pmf(s, rng)).collect();
        let tvs = ps.iter().zip(&qs).map(|(p, q)| tv_distance(p, q)).collect::<Result<Vec<_>>>()?;
        t.record(tv_distance(&product_pmf(&ps), &product_pmf(&qs))?, product_tv_upper(&tvs)?);
    }
    Ok(t.report)
}

/// `H²(p^{⊗n}, q^{⊗n}) = 1 − (1 − H²(p, q))^n` on enumerated products,
/// checked in both directions.
pub fn check_hellinger_tensorisation<R: Rng + ?Sized>(cases: usize, rng: &mut R) -> Result<InequalityReport> {
    let mut t = Tally::new("hellinger_tensorisation");
    for _ in 0..cases {
        let n = rng.random_range(1..=4u32);
        let size = rng.random_range(2..=5);
        let (p, q) = (random_pmf(size, rng), random_pmf(size, rng));
        let pn = product_pmf(&vec![p.clone(); n as usize]);
        let qn = product_pmf(&vec![q.clone(); n as usize]);
        let direct = hellinger_sq(&pn, &qn)?;
        let formula = hellinger_sq_product(hellinger_sq(&p, &q)?, n)?;
        t.record((direct - formula).abs(), 0.0);
    }
    Ok(t.report)
}

/// `TV(Ψ(μ), Ψ(ν)) ≤ (Ḡ/G̲) TV(μ, ν)` for random positive potentials.
pub fn check_psi_lipschitz<R: Rng + ?Sized>(cases: usize, rng: &mut R) -> Result<InequalityReport> {
    let mut t = Tally::new("psi_lipschitz");
    for _ in 0..cases {
        let size = rng.random_range(2..=16);
        let (mu, nu) = (random_pmf(size, rng), random_pmf(size, rng));
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let g: Vec<f64> = (0..size).map(|_| scale * (0.01 + rng.random::<f64>())).collect();
        let (lo, hi) = g.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        let lhs = tv_distance(&psi_update(&mu, &g)?, &psi_update(&nu, &g)?)?;
        t.record(lhs, hi / lo * tv_distance(&mu, &nu)?);
    }
    Ok(t.report)
}

/// A random two-state model whose kernel entries lie in `[0.02, 0.98]`.
pub fn random_binary_model<R: Rng + ?Sized>(horizon: usize, rng: &mut R) -> Result<DiscreteFkModel> {
    let a = rng.random_range(0.02..0.98);
    let b = rng.random_range(0.02..0.98);
    let m = StochasticMatrix::from_rows(vec![vec![1.0 - a, a], vec![b, 1.0 - b]])?;
    let g = vec![rng.random_range(0.05..1.0), rng.random_range(0.05..1.0)];
    DiscreteFkModel::new(random_pmf(2, rng), Schedule::constant(m), Schedule::constant(g), horizon)
}

/// `‖Φ_{0,k}(δ_x) − Φ_{0,k}(δ_y)‖_TV ≤ β^k` for random two-state models
/// and `k ≤ 50`.
pub fn check_ideal_contraction<R: Rng + ?Sized>(cases: usize, rng: &mut R) -> Result<InequalityReport> {
    let mut t = Tally::new("ideal_contraction");
    for _ in 0..cases {
        let model = random_binary_model(50, rng)?;
        let beta = model.stability_constants()?.beta;
        let k = rng.random_range(0..=50);
        let (x, y) = (DiscretePmf::dirac(2, 0)?, DiscretePmf::dirac(2, 1)?);
        t.record(ideal_contraction_tv(&model, k, &x, &y)?, beta.powi(k as i32));
    }
    Ok(t.report)
}

/// `N ↦ (1 − (1 − b/N)^{2N})^{1/2}` non-increasing on random grids above
/// random `b > 1`.
pub fn check_monotone_bound<R: Rng + ?Sized>(cases: usize, rng: &mut R) -> Result<InequalityReport> {
    let mut t = Tally::new("monotone_bound");
    for _ in 0..cases {
        let b = 1.0 + 10f64.powf(rng.random_range(-4.0..1.7));
        let len = rng.random_range(2..=64);
        let lo = b.floor() as usize + 1;
        let grid: Vec<usize> = (0..len).map(|_| lo + rng.random_range(0..4 * lo + 100)).collect();
        let ok = monotone_bound_check(b, &grid)?;
        t.record(if ok { 0.0 } else { 1.0 }, 0.0);
    }
    Ok(t.report)
}

/// Every check above with `cases` draws each.
pub fn run_inequality_suite<R: Rng + ?Sized>(cases: usize, rng: &mut R) -> Result<Vec<InequalityReport>> {
    Ok(vec![
        check_lecam(cases, rng)?,
        check_product_tv(cases, rng)?,
        check_hellinger_tensorisation(cases, rng)?,
        check_psi_lipschitz(cases, rng)?,
        check_ideal_contraction(cases, rng)?,
        check_monotone_bound(cases, rng)?,
    ])
}
