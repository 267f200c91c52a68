//! Samplers: the k ↔ ℓ down-up walk with exact superset completion, and
//! Glauber dynamics with cached local fields.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{random_sub_subset, sub_subsets};
use crate::error::{Error, Result};
use crate::ising::IsingModel;
use crate::kernel::StateSpace;
use crate::rng::SeedSplitter;
use crate::subset::SubsetDensity;

/// Largest `k − ℓ` the subset walker accepts by default.
pub const DEFAULT_MOVE_BUDGET: usize = 3;

/// Visited states of one seeded run, as bitmasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub space: StateSpace,
    pub states: Vec<u64>,
    pub step_count: usize,
}

impl Trajectory {
    pub fn last(&self) -> u64 {
        *self.states.last().expect("trajectories hold the start state")
    }

    /// Writes `step,state[,energy]` rows; the state is a hex bitmask.
    pub fn write_csv<W: Write>(&self, out: W, energy: Option<&dyn Fn(u64) -> f64>) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if energy.is_some() {
            w.write_record(["step", "state", "energy"])?;
        } else {
            w.write_record(["step", "state"])?;
        }
        for (t, &s) in self.states.iter().enumerate() {
            let hex = format!("{s:#x}");
            match energy {
                Some(e) => w.write_record([t.to_string(), hex, format!("{:e}", e(s))])?,
                None => w.write_record([t.to_string(), hex])?,
            }
        }
        w.flush()
    }
}

/// Exact sampler for the `k ↔ ℓ` down-up walk: drop to a uniform ℓ-subset,
/// then complete to a superset in `supp(μ)` with probability `∝ μ`.
#[derive(Clone, Debug)]
pub struct SubsetWalker {
    n: usize,
    k: usize,
    ell: usize,
    masks: Vec<u64>,
    completions: HashMap<u64, (Vec<usize>, WeightedIndex<f64>)>,
}

impl SubsetWalker {
    pub fn new(mu: &SubsetDensity, ell: usize) -> Result<Self> {
        Self::with_budget(mu, ell, DEFAULT_MOVE_BUDGET)
    }

    pub fn with_budget(mu: &SubsetDensity, ell: usize, budget: usize) -> Result<Self> {
        let k = mu.arity();
        if ell > k {
            return Err(Error::ArityOutOfRange { ell, k });
        }
        if k - ell > budget {
            return Err(Error::MoveBudgetExceeded(k - ell));
        }
        let mut lists: HashMap<u64, Vec<usize>> = HashMap::new();
        for (pos, &m) in mu.masks().iter().enumerate() {
            for t in sub_subsets(m, ell) {
                lists.entry(t).or_default().push(pos);
            }
        }
        let mut completions = HashMap::with_capacity(lists.len());
        for (t, list) in lists {
            let weights = list.iter().map(|&p| mu.weights()[p]);
            let dist = WeightedIndex::new(weights).map_err(|_| Error::ZeroMassRow(crate::combinatorics::indices_from_mask(t)))?;
            completions.insert(t, (list, dist));
        }
        Ok(Self {
            n: mu.ground_size(),
            k,
            ell,
            masks: mu.masks().to_vec(),
            completions,
        })
    }

    pub fn space(&self) -> StateSpace {
        StateSpace::Subsets { n: self.n, k: self.k }
    }

    pub fn step<R: Rng + ?Sized>(&self, state: u64, rng: &mut R) -> u64 {
        if self.ell == self.k {
            return state;
        }
        let t = random_sub_subset(state, self.ell, rng);
        let (list, dist) = &self.completions[&t];
        self.masks[list[dist.sample(rng)]]
    }

    fn check_start(&self, start: u64) -> Result<()> {
        if self.masks.binary_search(&start).is_err() {
            return Err(Error::InvalidStart);
        }
        Ok(())
    }

    pub fn run(&self, start: u64, steps: usize, seed: u64) -> Result<Trajectory> {
        self.check_start(start)?;
        let mut rng = SeedSplitter::new(seed).stream(0);
        let mut states = Vec::with_capacity(steps + 1);
        states.push(start);
        let mut s = start;
        for _ in 0..steps {
            s = self.step(s, &mut rng);
            states.push(s);
        }
        Ok(Trajectory {
            seed,
            space: self.space(),
            states,
            step_count: steps,
        })
    }

    /// Final states of `runs` independent walks of `steps` steps each; run
    /// `r` uses stream `r` of `seed`.
    pub fn endpoints(&self, start: u64, steps: usize, runs: usize, seed: u64) -> Result<Vec<u64>> {
        self.check_start(start)?;
        let splitter = SeedSplitter::new(seed);
        Ok((0..runs)
            .into_par_iter()
            .map(|r| {
                let mut rng = splitter.stream(r as u64);
                let mut s = start;
                for _ in 0..steps {
                    s = self.step(s, &mut rng);
                }
                s
            })
            .collect())
    }
}

/// Runs the `k ↔ ℓ` down-up walk from `start` for `steps` steps.
pub fn simulate_walk(mu: &SubsetDensity, ell: usize, start: u64, steps: usize, seed: u64) -> Result<Trajectory> {
    SubsetWalker::new(mu, ell)?.run(start, steps, seed)
}

/// Glauber dynamics on `±1` spins with an incrementally maintained local
/// field: `O(1)` per step for rank-one couplings, `O(n)` per flip otherwise.
#[derive(Clone, Debug)]
pub struct GlauberSampler {
    n: usize,
    h: Vec<f64>,
    spins: Vec<i8>,
    cache: FieldCache,
    flips: u64,
}

#[derive(Clone, Debug)]
enum FieldCache {
    /// `m = ⟨u, x⟩`.
    RankOne { u: Vec<f64>, m: f64 },
    /// `Jx` with the diagonal excluded.
    Dense { j: DMatrix<f64>, jx: Vec<f64> },
}

/// Rank-one sums are recomputed from scratch this often to cap drift.
const RESYNC_FLIPS: u64 = 1 << 20;

impl GlauberSampler {
    pub fn new(model: &IsingModel, start: &[i8]) -> Result<Self> {
        let n = model.n();
        if start.len() != n || start.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidStart);
        }
        let cache = match model.rank_one_vector() {
            Some(u) => FieldCache::RankOne { u: u.to_vec(), m: 0.0 },
            None => {
                let mut j = model.interaction();
                j.fill_diagonal(0.0);
                FieldCache::Dense { j, jx: vec![0.0; n] }
            }
        };
        let mut out = Self {
            n,
            h: model.field().to_vec(),
            spins: start.to_vec(),
            cache,
            flips: 0,
        };
        out.resync();
        Ok(out)
    }

    /// Start from the spin configuration encoded by `mask` (`n ≤ 64`).
    pub fn from_mask(model: &IsingModel, mask: u64) -> Result<Self> {
        let n = model.n();
        if n > 64 || (n < 64 && mask >> n != 0) {
            return Err(Error::InvalidStart);
        }
        let spins: Vec<i8> = (0..n).map(|i| if mask >> i & 1 == 1 { 1 } else { -1 }).collect();
        Self::new(model, &spins)
    }

    fn resync(&mut self) {
        let x = &self.spins;
        match &mut self.cache {
            FieldCache::RankOne { u, m } => *m = u.iter().zip(x).map(|(a, &s)| a * s as f64).sum(),
            FieldCache::Dense { j, jx } => {
                for (i, v) in jx.iter_mut().enumerate() {
                    *v = (0..x.len()).map(|c| j[(i, c)] * x[c] as f64).sum();
                }
            }
        }
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn mask(&self) -> u64 {
        self.spins
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0)
            .fold(0, |m, (i, _)| m | 1 << i)
    }

    pub fn magnetization(&self) -> i64 {
        self.spins.iter().map(|&s| s as i64).sum()
    }

    /// `Σ_{j≠i} J_ij x_j + h_i`.
    #[inline]
    pub fn local_field(&self, i: usize) -> f64 {
        match &self.cache {
            FieldCache::RankOne { u, m } => u[i] * (m - u[i] * self.spins[i] as f64) + self.h[i],
            FieldCache::Dense { jx, .. } => jx[i] + self.h[i],
        }
    }

    /// Resamples coordinate `i` from its conditional law.
    #[inline]
    pub fn update<R: Rng + ?Sized>(&mut self, i: usize, rng: &mut R) {
        let f = self.local_field(i);
        let p_plus = 1.0 / (1.0 + (-2.0 * f).exp());
        let new: i8 = if rng.random::<f64>() < p_plus { 1 } else { -1 };
        let old = self.spins[i];
        if new == old {
            return;
        }
        self.spins[i] = new;
        let delta = (new - old) as f64;
        match &mut self.cache {
            FieldCache::RankOne { u, m } => {
                *m += u[i] * delta;
                self.flips += 1;
                if self.flips.is_multiple_of(RESYNC_FLIPS) {
                    self.resync();
                }
            }
            FieldCache::Dense { j, jx } => {
                for (r, v) in jx.iter_mut().enumerate() {
                    *v += j[(r, i)] * delta;
                }
            }
        }
    }

    /// One Glauber step: a uniform coordinate, then a heat-bath update.
    #[inline]
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let i = rng.random_range(0..self.n);
        self.update(i, rng);
    }

    pub fn run<R: Rng + ?Sized>(&mut self, steps: u64, rng: &mut R) {
        for _ in 0..steps {
            self.step(rng);
        }
    }
}

/// Seeded Glauber trajectory from the spin mask `start` (`n ≤ 64`).
pub fn simulate_glauber(model: &IsingModel, start: u64, steps: usize, seed: u64) -> Result<Trajectory> {
    let mut sampler = GlauberSampler::from_mask(model, start)?;
    let mut rng = SeedSplitter::new(seed).stream(0);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(start);
    for _ in 0..steps {
        sampler.step(&mut rng);
        states.push(sampler.mask());
    }
    Ok(Trajectory {
        seed,
        space: StateSpace::Spins { n: model.n() },
        states,
        step_count: steps,
    })
}

/// Final spin masks of `runs` independent Glauber runs; run `r` uses
/// stream `r` of `seed`.
pub fn glauber_endpoints(model: &IsingModel, start: u64, steps: u64, runs: usize, seed: u64) -> Result<Vec<u64>> {
    let base = GlauberSampler::from_mask(model, start)?;
    let splitter = SeedSplitter::new(seed);
    Ok((0..runs)
        .into_par_iter()
        .map(|r| {
            let mut s = base.clone();
            let mut rng: ChaCha8Rng = splitter.stream(r as u64);
            s.run(steps, &mut rng);
            s.mask()
        })
        .collect())
}

/// Empirical law of `samples` over `states` (sorted), as frequencies.
pub fn empirical_law(states: &[u64], samples: &[u64]) -> Result<Vec<f64>> {
    let mut counts = vec![0usize; states.len()];
    for s in samples {
        let pos = states.binary_search(s).map_err(|_| Error::InvalidStart)?;
        counts[pos] += 1;
    }
    let total = samples.len().max(1) as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}
