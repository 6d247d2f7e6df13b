//! Brute-force oracles for two-state models, written independently of the
//! library's count-chain code: particle vectors are enumerated as bit
//! patterns and their laws evolved directly.
#![allow(dead_code)]

/// Flip model parameters: `P(0→1) = P(1→0) = eps`, potentials `(g0, g1)`.
#[derive(Clone, Copy, Debug)]
pub struct Flip {
    pub eps: f64,
    pub g0: f64,
    pub g1: f64,
}

impl Flip {
    pub fn new(eps: f64, g0: f64, g1: f64) -> Self {
        Flip { eps, g0, g1 }
    }

    /// Probability that a fresh particle is 1, given `ones` of `n` parents.
    pub fn p_one(&self, n: usize, ones: usize) -> f64 {
        let a = self.g1 * ones as f64;
        let w = a / (a + self.g0 * (n - ones) as f64);
        self.eps * (1.0 - w) + (1.0 - self.eps) * w
    }

    /// One step of the ideal predictor on `P(X = 1)`.
    pub fn ideal_step(&self, eta1: f64) -> f64 {
        let w = self.g1 * eta1 / (self.g1 * eta1 + self.g0 * (1.0 - eta1));
        self.eps * (1.0 - w) + (1.0 - self.eps) * w
    }

    pub fn ideal(&self, eta0: f64, k: usize) -> f64 {
        (0..k).fold(eta0, |e, _| self.ideal_step(e))
    }
}

pub fn bernoulli_product(n: usize, p: f64, bits: usize) -> f64 {
    let ones = bits.count_ones() as usize;
    p.powi(ones as i32) * (1.0 - p).powi((n - ones) as i32)
}

/// One step of the law over all `2^n` particle vectors.
pub fn vector_step(model: &Flip, n: usize, law: &[f64]) -> Vec<f64> {
    let size = 1usize << n;
    let mut out = vec![0.0; size];
    for (x, &px) in law.iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        let p = model.p_one(n, x.count_ones() as usize);
        for (y, o) in out.iter_mut().enumerate() {
            *o += px * bernoulli_product(n, p, y);
        }
    }
    out
}

pub fn vector_law(model: &Flip, n: usize, init: &[f64], k: usize) -> Vec<f64> {
    (0..k).fold(init.to_vec(), |law, _| vector_step(model, n, &law))
}

pub fn point_law(n: usize, bits: usize) -> Vec<f64> {
    let mut v = vec![0.0; 1 << n];
    v[bits] = 1.0;
    v
}

pub fn iid_law(n: usize, p: f64) -> Vec<f64> {
    (0..1usize << n).map(|x| bernoulli_product(n, p, x)).collect()
}

pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Law of the first `q` coordinates (low bits) of a vector law.
pub fn marginal_first(n: usize, law: &[f64], q: usize) -> Vec<f64> {
    let mut out = vec![0.0; 1 << q];
    let mask = (1usize << q) - 1;
    debug_assert!(q <= n);
    for (x, p) in law.iter().enumerate() {
        out[x & mask] += p;
    }
    out
}

/// `TV(Bernoulli(p)^{⊗n}, Bernoulli(r)^{⊗n})` by enumeration.
pub fn product_bernoulli_tv(n: usize, p: f64, r: f64) -> f64 {
    tv(&iid_law(n, p), &iid_law(n, r))
}

/// Count law of a vector law.
pub fn count_law(n: usize, law: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for (x, p) in law.iter().enumerate() {
        out[x.count_ones() as usize] += p;
    }
    out
}
