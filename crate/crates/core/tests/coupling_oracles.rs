mod common;

use common::{product_bernoulli_tv, Flip};
use smc_forget::coupling::{couple_individual, couple_state, coupling_time, PredictiveLaw, Scheme};
use smc_forget::fkmodel::{binary_model, StochasticMatrix};
use smc_forget::measures::{max_couple_discrete, product_tv_upper, tv_distance};
use smc_forget::rng::{replicate_stream, stream_from_seed};
use smc_forget::smc::ParticleSystem;
use smc_forget::stats::{linear_fit, median};
use smc_forget::DiscretePmf;

fn systems(a: &[usize], b: &[usize]) -> (ParticleSystem<usize>, ParticleSystem<usize>) {
    (ParticleSystem::new(a.to_vec(), 0).unwrap(), ParticleSystem::new(b.to_vec(), 0).unwrap())
}

fn entry_pairs() -> Vec<(Vec<usize>, Vec<usize>)> {
    vec![
        (vec![0, 1], vec![1, 1]),
        (vec![0, 0, 0, 1], vec![1, 1, 0, 1]),
        (vec![0; 6], vec![1, 0, 1, 0, 1, 1]),
        (vec![1, 0, 0, 1, 1, 0, 1, 0, 0, 1], vec![1, 1, 1, 1, 0, 0, 1, 1, 1, 1]),
    ]
}

#[test]
fn discrete_max_coupling_mismatch_rate() {
    let p = DiscretePmf::new(vec![0.5, 0.2, 0.3, 0.0]).unwrap();
    let q = DiscretePmf::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let tv = tv_distance(&p, &q).unwrap();
    let mut rng = stream_from_seed(31);
    let draws = 100_000;
    let mism = (0..draws).filter(|_| {
        let (x, y) = max_couple_discrete(&p, &q, &mut rng).unwrap();
        x != y
    });
    let rate = mism.count() as f64 / draws as f64;
    assert!((rate - tv).abs() < 4.0 * (tv * (1.0 - tv) / draws as f64).sqrt());
}

#[test]
fn state_coupling_success_matches_enumerated_product_tv() {
    let f = Flip::new(0.1, 0.1, 1.0);
    let model = binary_model(f.eps, f.g0, f.g1, 5).unwrap();
    for (xa, xb) in entry_pairs() {
        let n = xa.len();
        let (a, b) = systems(&xa, &xb);
        let la = PredictiveLaw::new(&model, &a).unwrap();
        let lb = PredictiveLaw::new(&model, &b).unwrap();
        let pa = f.p_one(n, xa.iter().sum());
        let pb = f.p_one(n, xb.iter().sum());
        let success = 1.0 - product_bernoulli_tv(n, pa, pb);
        let reps = 10_000u64;
        let hits = (0..reps)
            .filter(|&i| {
                let (x, y) = couple_state(&la, &lb, n, &mut replicate_stream(41, i)).unwrap();
                x == y
            })
            .count();
        let rate = hits as f64 / reps as f64;
        let se = (success * (1.0 - success) / reps as f64).sqrt();
        assert!((rate - success).abs() < 4.0 * se, "N={n}: {rate} vs {success}");
    }
}

#[test]
fn individual_coupling_success_is_product_of_overlaps() {
    let f = Flip::new(0.1, 0.1, 1.0);
    let model = binary_model(f.eps, f.g0, f.g1, 5).unwrap();
    for (xa, xb) in entry_pairs() {
        let n = xa.len();
        let (a, b) = systems(&xa, &xb);
        let la = PredictiveLaw::new(&model, &a).unwrap();
        let lb = PredictiveLaw::new(&model, &b).unwrap();
        let tv1 = tv_distance(la.pmf().unwrap(), lb.pmf().unwrap()).unwrap();
        let success = 1.0 - product_tv_upper(&vec![tv1; n]).unwrap();
        assert!((success - (1.0 - tv1).powi(n as i32)).abs() < 1e-15);
        let reps = 10_000u64;
        let hits = (0..reps)
            .filter(|&i| {
                let (x, y) = couple_individual(&la, &lb, n, &mut replicate_stream(43, i)).unwrap();
                x == y
            })
            .count();
        let rate = hits as f64 / reps as f64;
        let se = (success * (1.0 - success) / reps as f64).sqrt().max(1e-4);
        assert!((rate - success).abs() < 4.0 * se, "N={n}: {rate} vs {success}");
        // The state coupling is maximal for the product laws.
        let state_success = 1.0 - product_bernoulli_tv(n, la.pmf().unwrap().prob(1), lb.pmf().unwrap().prob(1));
        assert!(state_success >= success - 1e-12);
    }
}

#[test]
fn empirical_prediction_error_decays_like_inverse_root_n() {
    let mu = DiscretePmf::bernoulli(0.3).unwrap();
    let m = StochasticMatrix::binary_flip(0.1).unwrap();
    let target = DiscretePmf::new(m.left_apply(mu.probs())).unwrap();
    let ns = [16usize, 32, 64, 128, 256, 512, 1024];
    let mut logs_n = Vec::new();
    let mut logs_e = Vec::new();
    for (j, &n) in ns.iter().enumerate() {
        let reps = 10_000u64;
        let total: f64 = (0..reps)
            .map(|i| {
                let mut rng = replicate_stream(50 + j as u64, i);
                let ones = (0..n).filter(|_| mu.sample(&mut rng) == 1).count();
                let emp = DiscretePmf::new(vec![(n - ones) as f64, ones as f64]).unwrap();
                tv_distance(&DiscretePmf::new(m.left_apply(emp.probs())).unwrap(), &target).unwrap()
            })
            .sum();
        logs_n.push((n as f64).ln());
        logs_e.push((total / reps as f64).ln());
    }
    let fit = linear_fit(&logs_n, &logs_e).unwrap();
    assert!((fit.slope + 0.5).abs() <= 0.1, "slope {}", fit.slope);
}

#[test]
fn median_coupling_time_grows_sublinearly() {
    let model = binary_model(0.1, 1.0, 1.0, 10_000).unwrap();
    let med = |n: usize| {
        let sig: Vec<f64> = (0..200u64)
            .map(|i| {
                let (a, b) = systems(&vec![0; n], &vec![1; n]);
                let out = coupling_time(&model, a, b, Scheme::State, 10_000, &mut replicate_stream(60, i)).unwrap();
                out.sigma().expect("no timeout") as f64
            })
            .collect();
        median(&sig)
    };
    let (m64, m1024) = (med(64), med(1024));
    assert!(m1024 / m64 <= (1024f64).ln() / (64f64).ln() * 1.5, "{m64} -> {m1024}");
}
