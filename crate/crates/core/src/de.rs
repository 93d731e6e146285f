//! Differential evolution, `rand/1/bin` variant, over a box-bounded domain.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    pub population: usize,
    /// Differential weight `F`.
    pub differential_weight: f64,
    /// Crossover probability `CR`.
    pub crossover: f64,
    pub generations: usize,
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl DeConfig {
    /// Canonical defaults: 20 individuals, F = 0.5, CR = 0.9, 100 generations.
    pub fn new(bounds: Vec<(f64, f64)>, seed: u64) -> Self {
        Self {
            population: 20,
            differential_weight: 0.5,
            crossover: 0.9,
            generations: 100,
            bounds,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::InvalidParameter(format!(
                "population must be >= 4, got {}",
                self.population
            )));
        }
        if !(self.differential_weight > 0.0 && self.differential_weight <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "differential weight must lie in (0, 2], got {}",
                self.differential_weight
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(Error::InvalidParameter(format!(
                "crossover must lie in [0, 1], got {}",
                self.crossover
            )));
        }
        if self.bounds.is_empty() {
            return Err(Error::InvalidParameter("no search dimensions".into()));
        }
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParameter(format!(
                    "bad bounds [{lo}, {hi}] in dim {i}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeResult {
    pub best: Vec<f64>,
    pub best_fitness: f64,
    /// Best fitness after initialization, then after each generation.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Minimizes `objective` inside `config.bounds`. Non-finite objective values
/// count as `+inf`.
pub fn differential_evolution<F>(objective: F, config: &DeConfig) -> Result<DeResult>
where
    F: Fn(&[f64]) -> f64,
{
    config.validate()?;
    let dim = config.bounds.len();
    let np = config.population;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let eval = |x: &[f64]| {
        let f = objective(x);
        if f.is_nan() {
            f64::INFINITY
        } else {
            f
        }
    };

    let mut pop: Vec<Vec<f64>> = (0..np)
        .map(|_| {
            config
                .bounds
                .iter()
                .map(|&(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo..hi) })
                .collect()
        })
        .collect();
    let mut fit: Vec<f64> = pop.iter().map(|x| eval(x)).collect();
    let mut evaluations = np;
    let mut best = argmin(&fit);
    let mut history = Vec::with_capacity(config.generations + 1);
    history.push(fit[best]);

    let mut trial = vec![0.0; dim];
    for _ in 0..config.generations {
        for i in 0..np {
            let [a, b, c] = distinct_others(&mut rng, np, i);
            let forced = rng.gen_range(0..dim);
            for (j, t) in trial.iter_mut().enumerate() {
                let (lo, hi) = config.bounds[j];
                *t = if j == forced || rng.gen::<f64>() < config.crossover {
                    let v = pop[a][j] + config.differential_weight * (pop[b][j] - pop[c][j]);
                    v.clamp(lo, hi)
                } else {
                    pop[i][j]
                };
            }
            let f = eval(&trial);
            evaluations += 1;
            if f <= fit[i] {
                pop[i].copy_from_slice(&trial);
                fit[i] = f;
                if f <= fit[best] {
                    best = i;
                }
            }
        }
        history.push(fit[best]);
    }

    Ok(DeResult {
        best: pop[best].clone(),
        best_fitness: fit[best],
        history,
        evaluations,
    })
}

fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |best, (i, &f)| if f < v[best] { i } else { best })
}

fn distinct_others(rng: &mut ChaCha8Rng, n: usize, exclude: usize) -> [usize; 3] {
    let mut out = [exclude; 3];
    let mut k = 0;
    while k < 3 {
        let r = rng.gen_range(0..n);
        if r != exclude && !out[..k].contains(&r) {
            out[k] = r;
            k += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn sphere_converges() {
        let mut cfg = DeConfig::new(vec![(-5.0, 5.0); 5], 7);
        cfg.generations = 200;
        let r = differential_evolution(sphere, &cfg).unwrap();
        assert!(r.best_fitness <= 1e-6, "best {}", r.best_fitness);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r.history.len(), 201);
        assert_eq!(r.evaluations, 20 * 201);
    }

    #[test]
    fn constant_objective() {
        let cfg = DeConfig::new(vec![(0.0, 1.0); 3], 1);
        let r = differential_evolution(|_| 4.25, &cfg).unwrap();
        assert_eq!(r.best_fitness, 4.25);
        assert!(r.best.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn collapsed_bounds_return_the_point() {
        let cfg = DeConfig::new(vec![(1.5, 1.5), (-2.0, -2.0)], 1);
        let r = differential_evolution(sphere, &cfg).unwrap();
        assert_eq!(r.best, vec![1.5, -2.0]);
        assert_eq!(r.best_fitness, 6.25);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = DeConfig::new(vec![(-3.0, 3.0); 4], 99);
        let a = differential_evolution(sphere, &cfg).unwrap();
        let b = differential_evolution(sphere, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn population_stays_in_bounds() {
        let bounds = vec![(0.0, 1.0), (-1.0, 0.5), (10.0, 20.0)];
        let cfg = DeConfig::new(bounds.clone(), 5);
        // pulls every coordinate toward the far side of its box
        let r = differential_evolution(
            |x| {
                for (v, &(lo, hi)) in x.iter().zip(&bounds) {
                    assert!(*v >= lo && *v <= hi);
                }
                -x.iter().sum::<f64>()
            },
            &cfg,
        )
        .unwrap();
        assert!((r.best[2] - 20.0).abs() < 1e-6);
    }

    #[test]
    fn nan_objective_never_wins() {
        let cfg = DeConfig::new(vec![(-1.0, 1.0)], 3);
        let r =
            differential_evolution(|x| if x[0] > 0.0 { f64::NAN } else { -x[0] }, &cfg).unwrap();
        assert!(r.best[0] <= 0.0);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = DeConfig::new(vec![(0.0, 1.0)], 0);
        cfg.population = 3;
        assert!(differential_evolution(sphere, &cfg).is_err());
        let mut cfg = DeConfig::new(vec![(0.0, 1.0)], 0);
        cfg.differential_weight = 2.5;
        assert!(differential_evolution(sphere, &cfg).is_err());
        let cfg = DeConfig::new(vec![(1.0, 0.0)], 0);
        assert!(differential_evolution(sphere, &cfg).is_err());
        let cfg = DeConfig::new(vec![], 0);
        assert!(differential_evolution(sphere, &cfg).is_err());
    }
}
