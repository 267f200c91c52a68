//! Size sweeps of Glauber dynamics on the Curie-Weiss model: exact gap and
//! mixing time where the state space is enumerable, sampled mixing
//! estimates everywhere.

use serde::{Deserialize, Serialize};

use crate::combinatorics::binomial;
use crate::divergence::{mixing_time_worst, mlsi_mixing_bound, tv};
use crate::error::{Error, Result};
use crate::ising::IsingModel;
use crate::kernel::glauber_kernel;
use crate::rng::SeedSplitter;
use crate::spectrum::spectrum_report;
use crate::walk::GlauberSampler;
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleOptions {
    /// Largest `n` that gets exact gap and mixing columns.
    pub exact_cap: usize,
    pub epsilon: f64,
    /// Independent runs per empirical TV estimate.
    pub runs: usize,
    pub seed: u64,
}

impl Default for ScaleOptions {
    fn default() -> Self {
        Self {
            exact_cap: 14,
            epsilon: 0.25,
            runs: 4000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub n: usize,
    pub delta: f64,
    pub gap: Option<f64>,
    /// Worst-case exact mixing time over magnetization-class starts.
    pub tmix_exact: Option<u64>,
    /// `(1 − ‖J‖_OP)/n`.
    pub mlsi_lower: f64,
    /// Mixing bound from the worst point mass, taking `mlsi_lower` as the
    /// one-step KL contraction rate that rank-one couplings satisfy.
    pub bound: Option<u64>,
    /// First `t` on a `√2`-spaced grid where the sampled magnetization law
    /// from the all-minus start is within `ε` of the exact one.
    pub tmix_empirical: u64,
    /// Sampled magnetization TV at `tmix_exact` (or `tmix_empirical`).
    pub tv_empirical: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleTable {
    pub rows: Vec<ScaleRow>,
    /// Least-squares `a` in `gap ~ n^a` over the exact rows.
    pub gap_exponent: Option<f64>,
    /// Least-squares `b` in `t_mix ~ n^b log n` over the exact rows.
    pub tmix_exponent: Option<f64>,
}

/// Exact law of the magnetization `Σ x_i` under zero-field Curie-Weiss,
/// indexed by the number of `+1` spins.
pub fn curie_weiss_magnetization_law(n: usize, delta: f64) -> Vec<f64> {
    let c2 = (1.0 - delta) / n as f64;
    let logs: Vec<f64> = (0..=n)
        .map(|plus| {
            let m = 2.0 * plus as f64 - n as f64;
            binomial(n, plus).ln() + 0.5 * c2 * m * m
        })
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

/// Sampled law of the number of `+1` spins after `steps` Glauber steps.
fn sampled_plus_law(model: &IsingModel, steps: u64, runs: usize, seed: u64) -> Result<Vec<f64>> {
    let n = model.n();
    let base = GlauberSampler::new(model, &vec![-1; n])?;
    let splitter = SeedSplitter::new(seed);
    let counts: Vec<usize> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut s = base.clone();
            s.run(steps, &mut splitter.stream(r as u64));
            ((s.magnetization() + n as i64) / 2) as usize
        })
        .collect();
    let mut law = vec![0.0; n + 1];
    for c in counts {
        law[c] += 1.0 / runs as f64;
    }
    Ok(law)
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// One row per size for zero-field Curie-Weiss at `delta`.
pub fn scale_study(sizes: &[usize], delta: f64, opts: &ScaleOptions) -> Result<ScaleTable> {
    let splitter = SeedSplitter::new(opts.seed);
    let mut rows = Vec::with_capacity(sizes.len());
    for (idx, &n) in sizes.iter().enumerate() {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("sizes must be at least 2, got {n}")));
        }
        let model = IsingModel::curie_weiss(n, delta)?;
        let child = splitter.child(idx as u64);
        let (mut gap, mut tmix_exact, mut bound) = (None, None, None);
        let mlsi_lower = (1.0 - model.op_norm()) / n as f64;
        if n <= opts.exact_cap {
            let kernel = glauber_kernel(&model)?;
            gap = Some(spectrum_report(&kernel)?.gap);
            // the law is exchangeable, so one start per magnetization class suffices
            let starts: Vec<usize> = (0..=n).map(|plus| (1usize << plus) - 1).collect();
            tmix_exact = Some(mixing_time_worst(&kernel, Some(&starts), opts.epsilon)?.0);
            if mlsi_lower > 0.0 {
                bound = Some(mlsi_mixing_bound(
                    mlsi_lower,
                    kernel.stationary().expect("Glauber"),
                    None,
                    opts.epsilon,
                )?);
            }
        }
        let target = curie_weiss_magnetization_law(n, delta);
        let mut t = n as u64;
        let mut stream = 0u64;
        let tmix_empirical = loop {
            let law = sampled_plus_law(&model, t, opts.runs, child.child(stream).master())?;
            stream += 1;
            if tv(&law, &target) <= opts.epsilon || t > 1 << 40 {
                break t;
            }
            t = ((t as f64) * std::f64::consts::SQRT_2).ceil() as u64;
        };
        let check_at = tmix_exact.unwrap_or(tmix_empirical);
        let tv_empirical = tv(&sampled_plus_law(&model, check_at, opts.runs, child.master())?, &target);
        rows.push(ScaleRow {
            n,
            delta,
            gap,
            tmix_exact,
            mlsi_lower,
            bound,
            tmix_empirical,
            tv_empirical,
        });
    }
    let exact: Vec<&ScaleRow> = rows.iter().filter(|r| r.gap.is_some()).collect();
    let logn: Vec<f64> = exact.iter().map(|r| (r.n as f64).ln()).collect();
    let gap_exponent = fit_slope(&logn, &exact.iter().map(|r| r.gap.unwrap_or(1.0).ln()).collect::<Vec<_>>());
    let tmix_exponent = fit_slope(
        &logn,
        &exact
            .iter()
            .map(|r| (r.tmix_exact.unwrap_or(1).max(1) as f64 / (r.n as f64).ln()).ln())
            .collect::<Vec<_>>(),
    );
    Ok(ScaleTable {
        rows,
        gap_exponent,
        tmix_exponent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sizes() {
        let t = scale_study(&[], 0.5, &ScaleOptions::default()).unwrap();
        assert!(t.rows.is_empty() && t.gap_exponent.is_none());
    }

    #[test]
    fn free_spins_gap() {
        let t = scale_study(
            &[8],
            1.0,
            &ScaleOptions {
                runs: 500,
                ..ScaleOptions::default()
            },
        )
        .unwrap();
        assert!((t.rows[0].gap.unwrap() - 1.0 / 8.0).abs() < 1e-10);
        assert!((t.rows[0].mlsi_lower - 1.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn magnetization_law_matches_enumeration() {
        let (n, delta) = (6, 0.3);
        let model = IsingModel::curie_weiss(n, delta).unwrap();
        let probs = model.spin_density().unwrap().probabilities();
        let mut law = vec![0.0; n + 1];
        for (x, p) in probs.iter().enumerate() {
            law[(x as u64).count_ones() as usize] += p;
        }
        for (a, b) in law.iter().zip(curie_weiss_magnetization_law(n, delta)) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
