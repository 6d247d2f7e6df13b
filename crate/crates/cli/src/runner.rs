//! Shared state for a command run and the worker pool.

use std::path::PathBuf;

use rayon::prelude::*;
use smc_forget::rng::{replicate_stream, RandomStream};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub struct Context {
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    pool: rayon::ThreadPool,
}

impl Context {
    /// `seed`, `threads` and `out_dir` override the config when given.
    pub fn new(
        config: ExperimentConfig,
        seed: Option<u64>,
        threads: Option<usize>,
        out_dir: Option<PathBuf>,
    ) -> Result<Self, CliError> {
        let threads = threads.or(config.run.threads).unwrap_or(0);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(Context {
            master_seed: seed.unwrap_or(config.run.master_seed),
            out_dir: out_dir.unwrap_or_else(|| config.output.directory.clone()),
            config,
            pool,
        })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn csv_path(&self, default_name: &str) -> PathBuf {
        self.out_dir.join(self.config.output.csv.as_deref().unwrap_or(default_name))
    }

    /// Maps `f` over `items` on the pool; results keep the input order.
    pub fn par_map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        self.pool.install(|| items.par_iter().map(f).collect())
    }

    /// Runs replicate `i = 0..replicates` with the stream
    /// `replicate_stream(master_seed, i)`; results are in replicate order.
    pub fn replicates<U, F>(&self, replicates: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize, &mut RandomStream) -> U + Sync + Send,
    {
        let seed = self.master_seed;
        self.pool.install(|| {
            (0..replicates)
                .into_par_iter()
                .map(|i| {
                    let mut rng = replicate_stream(seed, i as u64);
                    f(i, &mut rng)
                })
                .collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn ctx(threads: usize) -> Context {
        let cfg = ExperimentConfig::from_toml("[model]\nepsilon = 0.1\n[run]\nmaster_seed = 9\n").unwrap();
        Context::new(cfg, None, Some(threads), None).unwrap()
    }

    #[test]
    fn replicate_results_do_not_depend_on_thread_count() {
        let draw = |_: usize, rng: &mut RandomStream| rng.random::<u64>();
        let one = ctx(1).replicates(64, draw);
        let four = ctx(4).replicates(64, draw);
        assert_eq!(one, four);
        assert_eq!(one[3], replicate_stream(9, 3).random::<u64>());
    }

    #[test]
    fn overrides_take_precedence() {
        let cfg = ExperimentConfig::from_toml("[model]\nepsilon = 0.1\n[run]\nmaster_seed = 9\nthreads = 2\n").unwrap();
        let c = Context::new(cfg.clone(), Some(4), None, Some("elsewhere".into())).unwrap();
        assert_eq!(c.master_seed, 4);
        assert_eq!(c.threads(), 2);
        assert_eq!(c.csv_path("a.csv"), PathBuf::from("elsewhere/a.csv"));
        let c = Context::new(cfg, None, Some(3), None).unwrap();
        assert_eq!((c.master_seed, c.threads()), (9, 3));
    }
}
