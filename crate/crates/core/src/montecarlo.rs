//! Monte Carlo estimates of `P(A_n ≥ k)`.
//!
//! Path `i` draws its uniforms from the ChaCha8 stream `i` under the key
//! derived from the seed, so any path can be regenerated on its own and the
//! worker count has no effect on the output. Per-path record counts are
//! merged as integer histograms.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::law::{IncrementLaw, Orientation};
use crate::oracle::{Provenance, TailTable};

/// Jump sizes tabulated exactly for stable-family laws.
pub const STABLE_TABLE_LEN: usize = 10_000;
/// Further jump sizes used to resolve draws that land in the tail.
pub const STABLE_TAIL_LEN: usize = 100_000;
/// `z` of a two-sided 95% normal interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Inverse-CDF sampler over the order `+1, -0, -1, -2, …` (right) or its
/// mirror `-1, +0, +1, …` (left).
#[derive(Debug, Clone)]
pub struct IncrementSampler {
    sign: i64,
    cdf: Vec<f64>,
    tail: Option<StableTail>,
}

#[derive(Debug, Clone)]
struct StableTail {
    /// Conditional CDF of the jump given it exceeds the main table.
    cdf: Vec<f64>,
    first_jump: usize,
    beta: f64,
}

/// One sampled increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Draw {
    pub step: i64,
    /// The draw fell beyond the main table of a stable-family law.
    pub tail_hit: bool,
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

impl IncrementSampler {
    pub fn new(law: &IncrementLaw) -> Self {
        let sign = match law.orientation() {
            Orientation::Right => 1,
            Orientation::Left => -1,
        };
        match law.stable_params() {
            None => {
                let len = law.support_len().expect("explicit laws have finite support") + 1;
                Self {
                    sign,
                    cdf: cumulative(&law.sampling_weights(len)),
                    tail: None,
                }
            }
            Some((_, beta)) => {
                let all = law.sampling_weights(1 + STABLE_TABLE_LEN + STABLE_TAIL_LEN);
                let (main, rest) = all.split_at(1 + STABLE_TABLE_LEN);
                let mut tail_cdf = cumulative(rest);
                let rest_mass = 1.0 - main.iter().sum::<f64>();
                tail_cdf.iter_mut().for_each(|c| *c /= rest_mass);
                Self {
                    sign,
                    cdf: cumulative(main),
                    tail: Some(StableTail {
                        cdf: tail_cdf,
                        first_jump: STABLE_TABLE_LEN,
                        beta,
                    }),
                }
            }
        }
    }

    fn step_for_index(&self, idx: usize) -> i64 {
        if idx == 0 {
            self.sign
        } else {
            -self.sign * (idx as i64 - 1)
        }
    }

    /// Increment for a uniform `u ∈ [0, 1)`.
    pub fn sample(&self, u: f64) -> Draw {
        let idx = self.cdf.partition_point(|&c| c <= u);
        if idx < self.cdf.len() {
            return Draw {
                step: self.step_for_index(idx),
                tail_hit: false,
            };
        }
        let Some(tail) = &self.tail else {
            // Rounding left a sliver above the last cumulative weight.
            let last = self.cdf.len() - 1;
            return Draw {
                step: self.step_for_index(last),
                tail_hit: false,
            };
        };
        let top = *self.cdf.last().expect("nonempty table");
        let v = ((u - top) / (1.0 - top)).clamp(0.0, 1.0);
        let j = tail.cdf.partition_point(|&c| c <= v);
        let jump = if j < tail.cdf.len() {
            tail.first_jump + j
        } else {
            // Beyond the extended table, P(J ≥ m) decays like m^{-(1+β)}.
            let last = *tail.cdf.last().expect("nonempty tail");
            let w = ((1.0 - v) / (1.0 - last).max(f64::MIN_POSITIVE)).clamp(f64::MIN_POSITIVE, 1.0);
            let start = (tail.first_jump + tail.cdf.len()) as f64;
            (start * w.powf(-1.0 / (1.0 + tail.beta))).min(i64::MAX as f64 / 4.0) as usize
        };
        Draw {
            step: -self.sign * jump as i64,
            tail_hit: true,
        }
    }
}

/// [`IncrementSampler::sample`] with a freshly built table.
pub fn sample_increment(law: &IncrementLaw, uniform: f64) -> i64 {
    IncrementSampler::new(law).sample(uniform).step
}

/// Number of `m ∈ [1, n]` with `S_m ≥ max(S_0, …, S_{m-1})`, `S_0 = 0`.
pub fn count_weak_records(path: &[i64]) -> usize {
    let mut s = 0i64;
    let mut max = 0i64;
    let mut count = 0;
    for &x in path {
        s += x;
        if s >= max {
            count += 1;
            max = s;
        }
    }
    count
}

/// Visits to 0 at steps `1..=n` of `S̄_m = max(S̄_{m-1} - X_m, 0)`,
/// the reflected walk `M_m - S_m` built by Lindley's recursion.
pub fn reflected_zero_visits(path: &[i64]) -> usize {
    let mut w = 0i64;
    path.iter()
        .filter(|&&x| {
            w = (w - x).max(0);
            w == 0
        })
        .count()
}

/// Simulation settings; the output depends only on `(seed, n, paths)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub n: usize,
    pub paths: u64,
    pub seed: u64,
    pub workers: usize,
}

/// Smallest path count [`empirical_tail`] accepts.
pub const MIN_PATHS: u64 = 1000;

fn stream_key(seed: u64) -> [u8; 32] {
    ChaCha8Rng::seed_from_u64(seed).get_seed()
}

fn fill_path(sampler: &IncrementSampler, key: [u8; 32], index: u64, path: &mut [i64]) -> bool {
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    let mut hit = false;
    for x in path.iter_mut() {
        let d = sampler.sample(rng.random::<f64>());
        *x = d.step;
        hit |= d.tail_hit;
    }
    hit
}

/// Increments of path `index` under `seed`.
pub fn simulate_path(sampler: &IncrementSampler, seed: u64, index: u64, n: usize) -> Vec<i64> {
    let mut path = vec![0; n];
    fill_path(sampler, stream_key(seed), index, &mut path);
    path
}

/// Histogram of `A_n` over the simulated paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub counts: Vec<u64>,
    pub tail_hits: u64,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Input(format!("thread pool: {e}")))
}

pub fn simulate_histogram(law: &IncrementLaw, config: &SimConfig) -> Result<Histogram> {
    if config.n == 0 {
        return Err(Error::Input("path length n must be at least 1".into()));
    }
    let sampler = IncrementSampler::new(law);
    let key = stream_key(config.seed);
    let n = config.n;
    let zero = || Histogram {
        counts: vec![0; n + 1],
        tail_hits: 0,
    };
    let hist = pool(config.workers)?.install(|| {
        (0..config.paths)
            .into_par_iter()
            .fold(
                || (zero(), vec![0i64; n]),
                |(mut h, mut path), i| {
                    h.tail_hits += u64::from(fill_path(&sampler, key, i, &mut path));
                    h.counts[count_weak_records(&path)] += 1;
                    (h, path)
                },
            )
            .map(|(h, _)| h)
            .reduce(zero, |mut a, b| {
                a.counts.iter_mut().zip(&b.counts).for_each(|(x, y)| *x += y);
                a.tail_hits += b.tail_hits;
                a
            })
    });
    Ok(hist)
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Estimates of `P(A_n ≥ k)` for `k ≤ kmax` with Wilson 95% intervals.
pub fn empirical_tail(law: &IncrementLaw, config: &SimConfig, kmax: usize) -> Result<TailTable> {
    if config.paths < MIN_PATHS {
        return Err(Error::Input(format!(
            "at least {MIN_PATHS} paths are needed, got {}",
            config.paths
        )));
    }
    let hist = simulate_histogram(law, config)?;
    if hist.tail_hits > 0 {
        warn!("{} paths drew a jump beyond the tabulated stable law", hist.tail_hits);
    }
    let kmax = kmax.min(config.n);
    let mut entries = Vec::with_capacity(kmax + 1);
    let mut intervals = Vec::with_capacity(kmax + 1);
    let mut at_least = vec![0u64; kmax + 1];
    let mut acc: u64 = hist.counts[kmax + 1..].iter().sum();
    for k in (0..=kmax).rev() {
        acc += hist.counts[k];
        at_least[k] = acc;
    }
    let mut error_bound: f64 = 0.0;
    for (k, hits) in at_least.into_iter().enumerate() {
        let estimate = hits as f64 / config.paths as f64;
        if k > 0 && hits < 10 {
            warn!("P(A_n >= {k}) = {estimate:e} is below 10 / paths; plain Monte Carlo is unreliable here");
        }
        let ci = wilson_interval(hits, config.paths, Z95);
        error_bound = error_bound.max(0.5 * (ci.1 - ci.0));
        entries.push(estimate);
        intervals.push(ci);
    }
    Ok(TailTable {
        n: config.n,
        entries,
        provenance: Provenance::MonteCarlo,
        error_bound,
        truncated_mass: 0.0,
        intervals: Some(intervals),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::LawSpec;
    use crate::oracle;
    use proptest::prelude::{prop, prop_assert_eq, proptest};

    fn sym(o: Orientation) -> IncrementLaw {
        IncrementLaw::symmetric(o)
    }

    fn asym(o: Orientation) -> IncrementLaw {
        IncrementLaw::new(
            o,
            LawSpec::Explicit {
                q: 0.4,
                p: vec![0.3, 0.2, 0.1],
            },
        )
        .unwrap()
    }

    #[test]
    fn sampling_order_examples() {
        let law = sym(Orientation::Right);
        assert_eq!(sample_increment(&law, 0.25), 1);
        assert_eq!(sample_increment(&law, 0.75), -1);
        let left = sym(Orientation::Left);
        assert_eq!(sample_increment(&left, 0.25), -1);
        assert_eq!(sample_increment(&left, 0.75), 1);
        let a = asym(Orientation::Right);
        assert_eq!(sample_increment(&a, 0.39), 1);
        assert_eq!(sample_increment(&a, 0.41), 0);
        assert_eq!(sample_increment(&a, 0.71), -1);
        assert_eq!(sample_increment(&a, 0.95), -2);
        assert_eq!(sample_increment(&a, 1.0 - 1e-17), -2);
    }

    #[test]
    fn empirical_mean_is_zero() {
        let sampler = IncrementSampler::new(&sym(Orientation::Right));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sum: i64 = (0..1_000_000).map(|_| sampler.sample(rng.random()).step).sum();
        assert!((sum as f64 / 1e6).abs() < 3e-3);
    }

    #[test]
    fn stable_sampler_uses_tail_table() {
        let law = IncrementLaw::stable(Orientation::Right, 0.5, 0.5).unwrap();
        let sampler = IncrementSampler::new(&law);
        let d = sampler.sample(0.2);
        assert_eq!(d, Draw { step: 1, tail_hit: false });
        let far = sampler.sample(1.0 - 1e-9);
        assert!(far.tail_hit && far.step < -(STABLE_TABLE_LEN as i64) + 1);
        let farther = sampler.sample(1.0 - 1e-15);
        assert!(farther.step < far.step);
    }

    #[test]
    fn record_examples() {
        assert_eq!(count_weak_records(&[1, 1, 1]), 3);
        assert_eq!(count_weak_records(&[-1, 1, 1]), 2);
        assert_eq!(count_weak_records(&[-1, -1, -1]), 0);
        assert_eq!(reflected_zero_visits(&[-1, 1, 1]), 2);
    }

    #[test]
    fn paths_are_addressable() {
        let sampler = IncrementSampler::new(&asym(Orientation::Left));
        let a = simulate_path(&sampler, 9, 17, 50);
        let b = simulate_path(&sampler, 9, 17, 50);
        let c = simulate_path(&sampler, 9, 18, 50);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn wilson_interval_contains_estimate() {
        let (lo, hi) = wilson_interval(30, 100, Z95);
        assert!(lo < 0.3 && 0.3 < hi);
        assert!(wilson_interval(0, 100, Z95).0 < 1e-15);
        // Reference value for 30/100.
        assert!((lo - 0.2189).abs() < 1e-4 && (hi - 0.3958).abs() < 1e-4);
    }

    #[test]
    fn tail_examples() {
        for law in [sym(Orientation::Right), asym(Orientation::Left)] {
            let config = SimConfig {
                n: 1,
                paths: 200_000,
                seed: 1,
                workers: 2,
            };
            let t = empirical_tail(&law, &config, 1).unwrap();
            assert_eq!(t.entries[0], 1.0);
            let want = match law.orientation() {
                Orientation::Right => law.q() + law.p0(),
                Orientation::Left => 1.0 - law.q(),
            };
            let (lo, hi) = t.intervals.as_ref().unwrap()[1];
            assert!(lo - t.error_bound < want && want < hi + t.error_bound);
        }
        let few = SimConfig {
            n: 5,
            paths: 10,
            seed: 1,
            workers: 1,
        };
        assert!(empirical_tail(&sym(Orientation::Right), &few, 5).is_err());
    }

    #[test]
    fn matches_dp_and_ignores_worker_count() {
        let law = asym(Orientation::Right);
        let n = 12;
        let dp = oracle::dp_distribution(&law, n, n).unwrap();
        let mk = |workers| SimConfig {
            n,
            paths: 100_000,
            seed: 42,
            workers,
        };
        let one = empirical_tail(&law, &mk(1), n).unwrap();
        let four = empirical_tail(&law, &mk(4), n).unwrap();
        assert_eq!(one, four);
        let ci = one.intervals.as_ref().unwrap();
        for k in 0..=n {
            let half = 0.5 * (ci[k].1 - ci[k].0);
            assert!((one.entries[k] - dp.tail(k)).abs() <= 4.0 * half + 1e-15, "k={k}");
        }
    }

    proptest! {
        #[test]
        fn records_equal_reflected_zeros(path in prop::collection::vec(-4i64..=1, 1..60)) {
            prop_assert_eq!(count_weak_records(&path), reflected_zero_visits(&path));
            let mirrored: Vec<i64> = path.iter().map(|x| -x).collect();
            prop_assert_eq!(count_weak_records(&mirrored), reflected_zero_visits(&mirrored));
        }
    }
}
