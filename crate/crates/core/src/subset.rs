//! Homogeneous densities on `k`-subsets of a ground set `{0, .., n-1}`.
//!
//! Densities are stored unnormalized together with their normalizer; every
//! probability-valued accessor divides on read. Subsets are encoded as `u64`
//! bitmasks, so the ground set is limited to 64 elements. Spin systems on
//! `{±1}^m` are encoded as masks too, with bit `i` set iff `σ_i = +1`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, full_mask, indices_from_mask, k_subsets, mask_from_indices, sub_subsets};
use crate::error::{Error, Result};

/// Nonnegative weights on `k`-subsets of an `n`-element ground set.
#[derive(Clone, Debug)]
pub struct SubsetDensity {
    n: usize,
    k: usize,
    masks: Vec<u64>,
    weights: Vec<f64>,
    normalizer: f64,
    index: HashMap<u64, usize>,
}

impl PartialEq for SubsetDensity {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.k == other.k && self.masks == other.masks && self.weights == other.weights
    }
}

impl SubsetDensity {
    /// Validating constructor from sorted-index subsets.
    pub fn new(n: usize, k: usize, entries: &[(Vec<usize>, f64)]) -> Result<Self> {
        if n > 64 {
            return Err(Error::GroundTooLarge(n));
        }
        if k > n {
            return Err(Error::ArityOutOfRange { ell: k, k: n });
        }
        let mut seen = HashMap::with_capacity(entries.len());
        let mut pairs = Vec::with_capacity(entries.len());
        for (set, w) in entries {
            let mut sorted = set.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != set.len() || sorted.len() != k || sorted.iter().any(|&i| i >= n) {
                return Err(Error::ArityMismatch {
                    subset: set.clone(),
                    expected: k,
                    ground: n,
                });
            }
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::NegativeWeight(*w));
            }
            let mask = mask_from_indices(&sorted);
            if seen.insert(mask, ()).is_some() {
                return Err(Error::DuplicateKey(sorted));
            }
            pairs.push((mask, *w));
        }
        Self::from_masks(n, k, pairs)
    }

    /// Constructor from bitmask entries. Zero weights are dropped, duplicates
    /// rejected.
    pub fn from_masks(n: usize, k: usize, entries: Vec<(u64, f64)>) -> Result<Self> {
        if n > 64 {
            return Err(Error::GroundTooLarge(n));
        }
        if k > n {
            return Err(Error::ArityOutOfRange { ell: k, k: n });
        }
        let ground = full_mask(n);
        let mut pairs = Vec::with_capacity(entries.len());
        for (mask, w) in entries {
            if mask & !ground != 0 || mask.count_ones() as usize != k {
                return Err(Error::ArityMismatch {
                    subset: indices_from_mask(mask),
                    expected: k,
                    ground: n,
                });
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::NegativeWeight(w));
            }
            if w > 0.0 {
                pairs.push((mask, w));
            }
        }
        pairs.sort_unstable_by_key(|p| p.0);
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateKey(indices_from_mask(w[0].0)));
        }
        if pairs.is_empty() {
            return Err(Error::EmptySupport);
        }
        let masks: Vec<u64> = pairs.iter().map(|p| p.0).collect();
        let weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let normalizer = weights.iter().sum();
        let index = masks.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        Ok(Self {
            n,
            k,
            masks,
            weights,
            normalizer,
            index,
        })
    }

    /// Uniform density on all of `C([n], k)`.
    pub fn uniform(n: usize, k: usize) -> Result<Self> {
        if n > 64 {
            return Err(Error::GroundTooLarge(n));
        }
        Self::from_masks(n, k, k_subsets(n, k).map(|m| (m, 1.0)).collect())
    }

    /// Product-measure density: each support set is weighted by
    /// `∏_{i∈S} λ_i` over all of `C([n], k)`.
    pub fn product(n: usize, k: usize, lambda: &[f64]) -> Result<Self> {
        Self::uniform(n, k)?.external_field(lambda)
    }

    pub fn ground_size(&self) -> usize {
        self.n
    }

    pub fn arity(&self) -> usize {
        self.k
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Number of support sets.
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Support sets with their unnormalized weights, in increasing mask order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.masks.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn position(&self, mask: u64) -> Option<usize> {
        self.index.get(&mask).copied()
    }

    /// Unnormalized weight (zero off the support).
    pub fn weight(&self, mask: u64) -> f64 {
        self.position(mask).map_or(0.0, |i| self.weights[i])
    }

    pub fn prob(&self, mask: u64) -> f64 {
        self.weight(mask) / self.normalizer
    }

    /// Probabilities aligned with [`Self::masks`].
    pub fn probabilities(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w / self.normalizer).collect()
    }

    /// Same support, new weights aligned with [`Self::masks`].
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.masks.len() {
            return Err(Error::DimensionMismatch {
                expected: self.masks.len(),
                found: weights.len(),
            });
        }
        Self::from_masks(self.n, self.k, self.masks.iter().copied().zip(weights).collect())
    }

    /// `p = μ D_{k→1}`: `p_i = P[i ∈ S] / k`.
    pub fn marginals(&self) -> MarginalVector {
        let mut p = vec![0.0; self.n];
        if self.k == 0 {
            return MarginalVector(p);
        }
        for (mask, w) in self.iter() {
            let share = w / self.normalizer / self.k as f64;
            let mut m = mask;
            while m != 0 {
                p[m.trailing_zeros() as usize] += share;
                m &= m - 1;
            }
        }
        MarginalVector(p)
    }

    /// Inclusion probabilities `P[i ∈ S]` (sum to `k`).
    pub fn inclusion_probabilities(&self) -> Vec<f64> {
        let k = self.k.max(1) as f64;
        self.marginals().0.into_iter().map(|p| p * k).collect()
    }

    /// `g_μ(z) = Σ_S (μ(S)/Z) ∏_{i∈S} z_i`.
    pub fn gen_poly_eval(&self, z: &[f64]) -> Result<f64> {
        self.check_len(z.len())?;
        if let Some((index, &value)) = z.iter().enumerate().find(|(_, &v)| !(v >= 0.0)) {
            return Err(Error::NegativeCoordinate { index, value });
        }
        let mut acc = 0.0;
        for (mask, w) in self.iter() {
            let mut term = w / self.normalizer;
            let mut m = mask;
            while m != 0 {
                term *= z[m.trailing_zeros() as usize];
                m &= m - 1;
            }
            acc += term;
        }
        Ok(acc)
    }

    /// `log g_μ(e^y)`, evaluated with a log-sum-exp.
    pub fn log_gen_poly(&self, y: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .iter()
            .map(|(mask, w)| (w / self.normalizer).ln() + mask_sum(mask, y))
            .collect();
        log_sum_exp(&terms)
    }

    /// `λ ∗ μ`: weights multiplied by `∏_{i∈S} λ_i`, support unchanged.
    pub fn external_field(&self, lambda: &[f64]) -> Result<Self> {
        self.check_len(lambda.len())?;
        if let Some((index, &value)) = lambda.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
            return Err(Error::NonpositiveField { index, value });
        }
        let log_lambda: Vec<f64> = lambda.iter().map(|l| l.ln()).collect();
        self.reweight_log(&log_lambda)
    }

    /// External field given in log coordinates; rescaled so the largest
    /// weight stays at its original order of magnitude.
    pub fn reweight_log(&self, log_lambda: &[f64]) -> Result<Self> {
        self.check_len(log_lambda.len())?;
        let logs: Vec<f64> = self.iter().map(|(mask, w)| w.ln() + mask_sum(mask, log_lambda)).collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let entries = self.masks.iter().zip(&logs).map(|(&m, &l)| (m, (l - top).exp())).collect();
        Self::from_masks(self.n, self.k, entries)
    }

    /// The link `μ_T`: distribution of `S ∖ T` given `T ⊆ S`, on the ground
    /// set `[n] ∖ T` relabeled order-preservingly (see [`link_labels`]).
    pub fn condition_on(&self, t: &[usize]) -> Result<Self> {
        let t_mask = mask_from_indices(t);
        if t.iter().any(|&i| i >= self.n) || t_mask.count_ones() as usize != t.len() || t.len() > self.k {
            return Err(Error::ArityMismatch {
                subset: t.to_vec(),
                expected: t.len().min(self.k),
                ground: self.n,
            });
        }
        let keep = full_mask(self.n) & !t_mask;
        let entries: Vec<(u64, f64)> = self
            .iter()
            .filter(|(m, _)| m & t_mask == t_mask)
            .map(|(m, w)| (compress(m & keep, keep), w))
            .collect();
        if entries.is_empty() {
            return Err(Error::ZeroMassCondition);
        }
        Self::from_masks(self.n - t.len(), self.k - t.len(), entries)
    }

    /// `μ^{(r)}`: each support set `S` replaced by `S × [r]`, element `(a, i)`
    /// encoded as `a·r + i`.
    pub fn r_fold(&self, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidArgument("r must be at least 1".into()));
        }
        let n = self.n * r;
        if n > 64 {
            return Err(Error::GroundTooLarge(n));
        }
        let block = full_mask(r);
        let entries = self
            .iter()
            .map(|(mask, w)| {
                let lifted = indices_from_mask(mask).into_iter().fold(0u64, |acc, a| acc | (block << (a * r)));
                (lifted, w)
            })
            .collect();
        Self::from_masks(n, self.k * r, entries)
    }

    /// `ν D_{k→ℓ}` as a normalized density on `ℓ`-sets.
    pub fn down_project(&self, ell: usize) -> Result<Self> {
        if ell > self.k {
            return Err(Error::ArityOutOfRange { ell, k: self.k });
        }
        if ell == self.k {
            let weights = self.probabilities();
            return Self::from_masks(self.n, self.k, self.masks.iter().copied().zip(weights).collect());
        }
        let share = 1.0 / binomial(self.k, ell) / self.normalizer;
        let mut acc: HashMap<u64, f64> = HashMap::new();
        for (mask, w) in self.iter() {
            for t in sub_subsets(mask, ell) {
                *acc.entry(t).or_insert(0.0) += w * share;
            }
        }
        Self::from_masks(self.n, ell, acc.into_iter().collect())
    }

    /// Moments under `μ`: inclusion probabilities `P[i]` and the pairwise
    /// table `P[i ∧ j]` (diagonal holds `P[i]`).
    pub fn pair_moments(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n;
        let mut first = vec![0.0; n];
        let mut second = vec![vec![0.0; n]; n];
        for (mask, w) in self.iter() {
            let p = w / self.normalizer;
            let members = indices_from_mask(mask);
            for (a, &i) in members.iter().enumerate() {
                first[i] += p;
                for &j in &members[a..] {
                    second[i][j] += p;
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                second[i][j] = second[j][i];
            }
        }
        (first, second)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: len,
            });
        }
        Ok(())
    }

    pub fn to_file(&self) -> DensityFile {
        DensityFile {
            n: self.n,
            k: self.k,
            entries: self
                .iter()
                .map(|(m, w)| SetEntry {
                    set: indices_from_mask(m),
                    w,
                })
                .collect(),
        }
    }

    pub fn from_file(file: &DensityFile) -> Result<Self> {
        let entries: Vec<(Vec<usize>, f64)> = file.entries.iter().map(|e| (e.set.clone(), e.w)).collect();
        Self::new(file.n, file.k, &entries)
    }
}

/// Original labels of the elements kept by [`SubsetDensity::condition_on`].
pub fn link_labels(n: usize, t: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !t.contains(i)).collect()
}

/// Packs the bits of `mask` that lie under `keep` into the low positions.
fn compress(mask: u64, keep: u64) -> u64 {
    let mut out = 0u64;
    let mut bit = 0;
    let mut kp = keep;
    while kp != 0 {
        let low = kp & kp.wrapping_neg();
        if mask & low != 0 {
            out |= 1 << bit;
        }
        bit += 1;
        kp &= kp - 1;
    }
    out
}

#[inline]
pub(crate) fn mask_sum(mut mask: u64, v: &[f64]) -> f64 {
    let mut s = 0.0;
    while mask != 0 {
        s += v[mask.trailing_zeros() as usize];
        mask &= mask - 1;
    }
    s
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// `p = μ D_{k→1}`, a probability vector over the ground set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalVector(pub Vec<f64>);

impl MarginalVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = entries.iter().find(|p| !(**p >= 0.0 && **p <= 1.0)) {
            return Err(Error::NegativeWeight(bad));
        }
        let total: f64 = entries.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("marginal sums to {total}, not 1")));
        }
        Ok(Self(entries))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Fractional log-concavity exponents, uniform or per element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaVector {
    Uniform(f64),
    PerElement(Vec<f64>),
}

impl AlphaVector {
    pub fn uniform(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self::Uniform(alpha))
    }

    pub fn per_element(alphas: Vec<f64>) -> Result<Self> {
        for &a in &alphas {
            check_alpha(a)?;
        }
        Ok(Self::PerElement(alphas))
    }

    pub fn get(&self, i: usize) -> f64 {
        match self {
            Self::Uniform(a) => *a,
            Self::PerElement(v) => v[i],
        }
    }

    pub fn expand(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.get(i)).collect()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1]")));
    }
    Ok(())
}

/// Nonnegative weights on `{±1}^m`, indexed by spin mask.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinDensity {
    m: usize,
    weights: Vec<f64>,
}

impl SpinDensity {
    pub const MAX_SPINS: usize = 26;

    pub fn new(m: usize, entries: &[(Vec<i8>, f64)]) -> Result<Self> {
        if m > Self::MAX_SPINS {
            return Err(Error::StateSpaceTooLarge {
                states: 1usize << m.min(63),
                cap: 1 << Self::MAX_SPINS,
            });
        }
        let mut weights = vec![0.0; 1 << m];
        let mut seen = vec![false; 1 << m];
        for (sigma, w) in entries {
            if sigma.len() != m || sigma.iter().any(|&s| s != 1 && s != -1) {
                return Err(Error::ArityMismatch {
                    subset: sigma.iter().map(|&s| (s > 0) as usize).collect(),
                    expected: m,
                    ground: m,
                });
            }
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::NegativeWeight(*w));
            }
            let mask = spins_to_mask(sigma);
            if seen[mask as usize] {
                return Err(Error::DuplicateKey(sigma.iter().map(|&s| (s > 0) as usize).collect()));
            }
            seen[mask as usize] = true;
            weights[mask as usize] = *w;
        }
        Self::from_weights(m, weights)
    }

    /// Weights indexed by spin mask (bit `i` set iff `σ_i = +1`).
    pub fn from_weights(m: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != 1usize << m {
            return Err(Error::DimensionMismatch {
                expected: 1 << m,
                found: weights.len(),
            });
        }
        if let Some(&bad) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::NegativeWeight(bad));
        }
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(Error::EmptySupport);
        }
        Ok(Self { m, weights })
    }

    /// Normalized density from log-weights (stable under huge fields).
    pub fn from_log_weights(m: usize, log_weights: &[f64]) -> Result<Self> {
        let top = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = log_weights.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = raw.iter().sum();
        Self::from_weights(m, raw.into_iter().map(|w| w / z).collect())
    }

    pub fn spins(&self) -> usize {
        self.m
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let z: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / z).collect()
    }

    pub fn to_file(&self) -> SpinFile {
        SpinFile {
            m: self.m,
            entries: self
                .weights
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .map(|(x, &w)| SpinEntry {
                    sigma: mask_to_spins(x as u64, self.m),
                    w,
                })
                .collect(),
        }
    }

    pub fn from_file(file: &SpinFile) -> Result<Self> {
        let entries: Vec<(Vec<i8>, f64)> = file.entries.iter().map(|e| (e.sigma.clone(), e.w)).collect();
        Self::new(file.m, &entries)
    }
}

pub fn spins_to_mask(sigma: &[i8]) -> u64 {
    sigma
        .iter()
        .enumerate()
        .fold(0u64, |m, (i, &s)| if s > 0 { m | (1 << i) } else { m })
}

pub fn mask_to_spins(mask: u64, m: usize) -> Vec<i8> {
    (0..m).map(|i| if mask >> i & 1 == 1 { 1 } else { -1 }).collect()
}

/// `σ^hom`: element `i` for `σ_i = +1`, element `m + i` (the partner `ī`)
/// for `σ_i = -1`.
#[inline]
pub fn hom_mask(spin_mask: u64, m: usize) -> u64 {
    let full = full_mask(m);
    (spin_mask & full) | ((!spin_mask & full) << m)
}

/// Inverse of [`hom_mask`] on admissible sets.
#[inline]
pub fn spin_mask_of_hom(hom: u64, m: usize) -> u64 {
    hom & full_mask(m)
}

/// `μ^hom` on `C([2m], m)`, normalized exactly: `μ^hom(σ^hom) = μ(σ)/Z`.
pub fn homogenize(spin: &SpinDensity) -> Result<SubsetDensity> {
    let m = spin.spins();
    if 2 * m > 64 {
        return Err(Error::GroundTooLarge(2 * m));
    }
    let z: f64 = spin.weights().iter().sum();
    let entries = spin
        .weights()
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(x, &w)| (hom_mask(x as u64, m), w / z))
        .collect();
    SubsetDensity::from_masks(2 * m, m, entries)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetEntry {
    pub set: Vec<usize>,
    pub w: f64,
}

/// `{"n": .., "k": .., "entries": [{"set": [..], "w": ..}]}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityFile {
    pub n: usize,
    pub k: usize,
    pub entries: Vec<SetEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinEntry {
    pub sigma: Vec<i8>,
    pub w: f64,
}

/// `{"m": .., "entries": [{"sigma": [±1, ..], "w": ..}]}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinFile {
    pub m: usize,
    pub entries: Vec<SpinEntry>,
}
