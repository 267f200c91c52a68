//! Down and up operators, down-up walks, and Glauber dynamics as exact
//! sparse kernels.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, binomial_u64, indices_from_mask, k_subsets, sub_subsets};
use crate::error::{Error, Result};
use crate::ising::IsingModel;
use crate::subset::{hom_mask, SpinDensity, SubsetDensity};

/// Default cap on enumerated states (`2^20`).
pub const STATE_CAP: usize = 1 << 20;

/// What the row/column labels of a kernel encode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpace {
    /// `k`-subsets of `{0, .., n-1}` as bitmasks.
    Subsets { n: usize, k: usize },
    /// Spin vectors in `{±1}^n`, bit `i` set iff `σ_i = +1`.
    Spins { n: usize },
}

/// Which composite of the down and up operators to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    /// `D_{k→ℓ} U_{ℓ→k}` on `k`-sets: drop to a uniform `ℓ`-subset, then
    /// re-complete proportionally to `μ`.
    Upper,
    /// `U_{ℓ→k} D_{k→ℓ}` on `ℓ`-sets.
    Lower,
}

/// Row-stochastic matrix in compressed sparse row form.
///
/// Square kernels carry a stationary distribution over their rows; the
/// rectangular down/up operators do not.
#[derive(Clone, Debug)]
pub struct TransitionKernel {
    row_space: StateSpace,
    col_space: StateSpace,
    rows: Vec<u64>,
    cols: Vec<u64>,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    stationary: Option<Vec<f64>>,
    reversible: bool,
}

impl TransitionKernel {
    /// Builds a kernel from per-row `(column, value)` lists. Duplicate
    /// columns within a row are summed.
    pub fn from_rows(
        row_space: StateSpace,
        col_space: StateSpace,
        rows: Vec<u64>,
        cols: Vec<u64>,
        entries: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self> {
        if entries.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: entries.len(),
            });
        }
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in entries {
            row.sort_unstable_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if j >= cols.len() {
                    return Err(Error::DimensionMismatch {
                        expected: cols.len(),
                        found: j + 1,
                    });
                }
                if !(v >= 0.0) {
                    return Err(Error::NegativeWeight(v));
                }
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            row_space,
            col_space,
            rows,
            cols,
            indptr,
            indices,
            values,
            stationary: None,
            reversible: false,
        })
    }

    /// Builds a square kernel from a dense row-major matrix.
    pub fn from_dense(space: StateSpace, states: Vec<u64>, matrix: &[Vec<f64>], stationary: Option<Vec<f64>>) -> Result<Self> {
        let entries = matrix
            .iter()
            .map(|row| row.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (j, v)).collect())
            .collect();
        let mut kernel = Self::from_rows(space, space, states.clone(), states, entries)?;
        if let Some(pi) = stationary {
            kernel = kernel.with_stationary(pi)?;
        }
        Ok(kernel)
    }

    /// Identity kernel on the given states.
    pub fn identity(space: StateSpace, states: Vec<u64>, stationary: Option<Vec<f64>>) -> Result<Self> {
        let entries = (0..states.len()).map(|i| vec![(i, 1.0)]).collect();
        let mut kernel = Self::from_rows(space, space, states.clone(), states, entries)?;
        if let Some(pi) = stationary {
            kernel = kernel.with_stationary(pi)?;
        }
        Ok(kernel)
    }

    /// Rank-one kernel whose every row equals `pi`.
    pub fn rank_one(space: StateSpace, states: Vec<u64>, pi: Vec<f64>) -> Result<Self> {
        let row: Vec<(usize, f64)> = pi.iter().copied().enumerate().filter(|(_, v)| *v > 0.0).collect();
        let entries = vec![row; states.len()];
        Self::from_rows(space, space, states.clone(), states, entries)?.with_stationary(pi)
    }

    /// Attaches a stationary distribution and records whether detailed
    /// balance holds to `1e-10`.
    pub fn with_stationary(mut self, pi: Vec<f64>) -> Result<Self> {
        if pi.len() != self.rows.len() || !self.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.rows.len(),
                found: pi.len(),
            });
        }
        self.stationary = Some(pi);
        self.reversible = self.detailed_balance_residual() <= 1e-10;
        Ok(self)
    }

    pub fn row_space(&self) -> StateSpace {
        self.row_space
    }

    pub fn col_space(&self) -> StateSpace {
        self.col_space
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn cols(&self) -> &[u64] {
        &self.cols
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.row_space == self.col_space && self.rows == self.cols
    }

    pub fn stationary(&self) -> Option<&[f64]> {
        self.stationary.as_deref()
    }

    /// True when a stationary distribution is attached and detailed balance
    /// holds to `1e-10`.
    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    pub fn row_position(&self, state: u64) -> Option<usize> {
        self.rows.binary_search(&state).ok()
    }

    pub fn col_position(&self, state: u64) -> Option<usize> {
        self.cols.binary_search(&state).ok()
    }

    /// Nonzero entries `(column, value)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    /// `ν P` for a row vector `ν` over the rows.
    pub fn left_apply(&self, nu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols.len()];
        for (i, &w) in nu.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                out[j] += w * v;
            }
        }
        out
    }

    /// `P f` for a function `f` over the columns.
    pub fn right_apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.rows.len()).map(|i| self.row(i).map(|(j, v)| v * f[j]).sum()).collect()
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.rows.len())
            .map(|i| (self.row(i).map(|(_, v)| v).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max |π(x)P(x,y) − π(y)P(y,x)|`; infinite without a stationary law.
    pub fn detailed_balance_residual(&self) -> f64 {
        let Some(pi) = &self.stationary else {
            return f64::INFINITY;
        };
        let mut worst = 0.0f64;
        for i in 0..self.rows.len() {
            for (j, v) in self.row(i) {
                worst = worst.max((pi[i] * v - pi[j] * self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `max |π P − π|`.
    pub fn stationarity_residual(&self) -> f64 {
        let Some(pi) = &self.stationary else {
            return f64::INFINITY;
        };
        self.left_apply(pi).iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), self.cols.len());
        for i in 0..self.rows.len() {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Sparse product `self · other`.
    pub fn compose(&self, other: &TransitionKernel) -> Result<TransitionKernel> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols.len(),
                found: other.rows.len(),
            });
        }
        let entries = (0..self.rows.len())
            .map(|i| {
                let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
                for (mid, a) in self.row(i) {
                    for (j, b) in other.row(mid) {
                        *acc.entry(j).or_insert(0.0) += a * b;
                    }
                }
                acc.into_iter().collect()
            })
            .collect();
        TransitionKernel::from_rows(self.row_space, other.col_space, self.rows.clone(), other.cols.clone(), entries)
    }

    /// Whether every row of a square kernel can reach every other.
    pub fn is_irreducible(&self) -> bool {
        self.period().is_some()
    }

    /// Period of an irreducible square kernel, `None` if reducible.
    pub fn period(&self) -> Option<usize> {
        let n = self.rows.len();
        if n == 0 || !self.is_square() {
            return None;
        }
        // BFS levels from state 0 on the forward graph; reachability both ways
        let mut level = vec![usize::MAX; n];
        level[0] = 0;
        let mut queue = std::collections::VecDeque::from([0usize]);
        let mut g = 0usize;
        while let Some(i) = queue.pop_front() {
            for (j, v) in self.row(i) {
                if v <= 0.0 {
                    continue;
                }
                if level[j] == usize::MAX {
                    level[j] = level[i] + 1;
                    queue.push_back(j);
                } else {
                    let diff = (level[i] + 1).abs_diff(level[j]);
                    g = gcd(g, diff);
                }
            }
        }
        if level.contains(&usize::MAX) {
            return None;
        }
        // backward reachability to state 0
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            for (j, v) in self.row(i) {
                if v > 0.0 {
                    reverse[j].push(i);
                }
            }
        }
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut stack = vec![0usize];
        while let Some(j) = stack.pop() {
            for &i in &reverse[j] {
                if !seen[i] {
                    seen[i] = true;
                    stack.push(i);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return None;
        }
        Some(g.max(1))
    }

    pub fn is_ergodic(&self) -> bool {
        self.period() == Some(1)
    }

    pub fn to_dump(&self) -> KernelDump {
        KernelDump {
            row_space: self.row_space,
            col_space: self.col_space,
            rows: self.rows.iter().map(|&m| format!("{m:x}")).collect(),
            cols: self.cols.iter().map(|&m| format!("{m:x}")).collect(),
            matrix: (0..self.rows.len())
                .map(|i| {
                    let mut dense = vec![0.0; self.cols.len()];
                    for (j, v) in self.row(i) {
                        dense[j] = v;
                    }
                    dense
                })
                .collect(),
            stationary: self.stationary.clone(),
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// JSON dump of a (small) kernel: state index plus dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelDump {
    pub row_space: StateSpace,
    pub col_space: StateSpace,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    pub stationary: Option<Vec<f64>>,
}

fn check_cap(states: u64) -> Result<()> {
    if states > STATE_CAP as u64 {
        return Err(Error::StateSpaceTooLarge {
            states: states.min(usize::MAX as u64) as usize,
            cap: STATE_CAP,
        });
    }
    Ok(())
}

/// `D_{k→ℓ}` over all of `C([n],k) × C([n],ℓ)`; entry `1/C(k,ℓ)` iff `T ⊆ S`.
pub fn down_operator(n: usize, k: usize, ell: usize) -> Result<TransitionKernel> {
    if !(ell <= k && k <= n) {
        return Err(Error::ArityOutOfRange { ell, k });
    }
    if n > 64 {
        return Err(Error::GroundTooLarge(n));
    }
    check_cap(binomial_u64(n, k))?;
    check_cap(binomial_u64(n, ell))?;
    let rows: Vec<u64> = k_subsets(n, k).collect();
    let cols: Vec<u64> = k_subsets(n, ell).collect();
    let share = 1.0 / binomial(k, ell);
    let entries = rows
        .iter()
        .map(|&s| {
            sub_subsets(s, ell)
                .map(|t| (cols.binary_search(&t).expect("subset is enumerated"), share))
                .collect()
        })
        .collect();
    TransitionKernel::from_rows(StateSpace::Subsets { n, k }, StateSpace::Subsets { n, k: ell }, rows, cols, entries)
}

/// `D_{k→ℓ}` restricted to the support of `mu` (rows) and the `ℓ`-sets it
/// reaches (columns).
pub fn down_operator_on(mu: &SubsetDensity, ell: usize) -> Result<TransitionKernel> {
    let (n, k) = (mu.ground_size(), mu.arity());
    if ell > k {
        return Err(Error::ArityOutOfRange { ell, k });
    }
    let cols = reachable_subsets(mu, ell);
    let share = 1.0 / binomial(k, ell);
    let entries = mu
        .masks()
        .iter()
        .map(|&s| {
            sub_subsets(s, ell)
                .map(|t| (cols.binary_search(&t).expect("reachable"), share))
                .collect()
        })
        .collect();
    TransitionKernel::from_rows(
        StateSpace::Subsets { n, k },
        StateSpace::Subsets { n, k: ell },
        mu.masks().to_vec(),
        cols,
        entries,
    )
}

fn reachable_subsets(mu: &SubsetDensity, ell: usize) -> Vec<u64> {
    let mut out: Vec<u64> = mu.masks().iter().flat_map(|&s| sub_subsets(s, ell)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// `ℓ`-sets below the support, each with the support positions of its
/// supersets and their total weight.
fn superset_table(mu: &SubsetDensity, ell: usize) -> (Vec<u64>, Vec<Vec<usize>>, Vec<f64>) {
    let mut table: HashMap<u64, Vec<usize>> = HashMap::new();
    for (pos, &s) in mu.masks().iter().enumerate() {
        for t in sub_subsets(s, ell) {
            table.entry(t).or_default().push(pos);
        }
    }
    let mut lows: Vec<u64> = table.keys().copied().collect();
    lows.sort_unstable();
    let supers: Vec<Vec<usize>> = lows.iter().map(|t| table.remove(t).unwrap()).collect();
    let totals = supers.iter().map(|list| list.iter().map(|&p| mu.weights()[p]).sum()).collect();
    (lows, supers, totals)
}

/// `U_{ℓ→k}`: rows are the `ℓ`-sets below `supp(μ)`, entry
/// `μ(S)/Σ_{S'⊇T} μ(S')` iff `T ⊆ S`.
pub fn up_operator(mu: &SubsetDensity, ell: usize) -> Result<TransitionKernel> {
    let (n, k) = (mu.ground_size(), mu.arity());
    if ell > k {
        return Err(Error::ArityOutOfRange { ell, k });
    }
    let (lows, supers, totals) = superset_table(mu, ell);
    let mut entries = Vec::with_capacity(lows.len());
    for ((t, list), total) in lows.iter().zip(&supers).zip(&totals) {
        if !(*total > 0.0) {
            return Err(Error::ZeroMassRow(indices_from_mask(*t)));
        }
        entries.push(list.iter().map(|&p| (p, mu.weights()[p] / total)).collect());
    }
    TransitionKernel::from_rows(
        StateSpace::Subsets { n, k: ell },
        StateSpace::Subsets { n, k },
        lows,
        mu.masks().to_vec(),
        entries,
    )
}

/// The `k ↔ ℓ` down-up walk, at the chosen level, with its stationary law
/// attached (`μ` at the upper level, `μ D_{k→ℓ}` at the lower one).
pub fn down_up_kernel(mu: &SubsetDensity, ell: usize, level: Level) -> Result<TransitionKernel> {
    let (n, k) = (mu.ground_size(), mu.arity());
    if ell > k {
        return Err(Error::ArityOutOfRange { ell, k });
    }
    let (lows, supers, totals) = superset_table(mu, ell);
    let w = mu.weights();
    let share = 1.0 / binomial(k, ell);
    match level {
        Level::Upper => {
            let mut entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); mu.len()];
            for (list, total) in supers.iter().zip(&totals) {
                for &from in list {
                    for &to in list {
                        entries[from].push((to, w[to] / total));
                    }
                }
            }
            let states = mu.masks().to_vec();
            // divide once after summing so forced completions give exactly 1
            let mut kernel = TransitionKernel::from_rows(
                StateSpace::Subsets { n, k },
                StateSpace::Subsets { n, k },
                states.clone(),
                states,
                entries,
            )?;
            let count = binomial(k, ell);
            kernel.values.iter_mut().for_each(|v| *v /= count);
            kernel.with_stationary(mu.probabilities())
        }
        Level::Lower => {
            let low_pos: HashMap<u64, usize> = lows.iter().enumerate().map(|(i, &t)| (t, i)).collect();
            let entries = supers
                .iter()
                .zip(&totals)
                .map(|(list, total)| {
                    let mut row = Vec::new();
                    for &s in list {
                        let up = w[s] / total;
                        for t2 in sub_subsets(mu.masks()[s], ell) {
                            row.push((low_pos[&t2], up * share));
                        }
                    }
                    row
                })
                .collect();
            let projected = mu.down_project(ell)?;
            let pi = lows.iter().map(|&t| projected.prob(t)).collect();
            TransitionKernel::from_rows(
                StateSpace::Subsets { n, k: ell },
                StateSpace::Subsets { n, k: ell },
                lows.clone(),
                lows,
                entries,
            )?
            .with_stationary(pi)
        }
    }
}

/// Glauber dynamics of an Ising model over all `2^n` spin states.
pub fn glauber_kernel(model: &IsingModel) -> Result<TransitionKernel> {
    let n = model.n();
    if n > 20 {
        return Err(Error::StateSpaceTooLarge {
            states: 1usize << n.min(62),
            cap: STATE_CAP,
        });
    }
    glauber_kernel_from_log_weights(n, &model.log_weights()?)
}

/// Glauber dynamics of an arbitrary positive spin density.
pub fn glauber_kernel_spin(spin: &SpinDensity) -> Result<TransitionKernel> {
    if spin.weights().iter().any(|&w| w <= 0.0) {
        return Err(Error::InvalidArgument("Glauber kernel needs a full-support spin density".into()));
    }
    let logw: Vec<f64> = spin.weights().iter().map(|w| w.ln()).collect();
    glauber_kernel_from_log_weights(spin.spins(), &logw)
}

/// Glauber kernel from unnormalized log-weights indexed by spin mask:
/// `P(x, x^i) = (1/n) μ(x^i)/(μ(x)+μ(x^i))`.
pub fn glauber_kernel_from_log_weights(n: usize, logw: &[f64]) -> Result<TransitionKernel> {
    if logw.len() != 1usize << n {
        return Err(Error::DimensionMismatch {
            expected: 1 << n,
            found: logw.len(),
        });
    }
    check_cap(1u64 << n)?;
    let states: Vec<u64> = (0..1u64 << n).collect();
    let inv_n = 1.0 / n as f64;
    let entries = states
        .iter()
        .map(|&x| {
            let mut row = Vec::with_capacity(n + 1);
            let mut stay = 0.0;
            for i in 0..n {
                let y = x ^ (1 << i);
                // μ(y)/(μ(x)+μ(y)) as a logistic of the log-weight gap
                let go = 1.0 / (1.0 + (logw[x as usize] - logw[y as usize]).exp());
                row.push((y as usize, inv_n * go));
                stay += inv_n * (1.0 - go);
            }
            row.push((x as usize, stay));
            row
        })
        .collect();
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = raw.iter().sum();
    let pi = raw.into_iter().map(|w| w / z).collect();
    TransitionKernel::from_rows(StateSpace::Spins { n }, StateSpace::Spins { n }, states.clone(), states, entries)?.with_stationary(pi)
}

/// Position of each Glauber state (spin mask) in the row index of the
/// homogenized `n ↔ (n−1)` down-up kernel.
pub fn hom_relabeling(n: usize, hom_kernel: &TransitionKernel) -> Vec<Option<usize>> {
    (0..1u64 << n).map(|x| hom_kernel.row_position(hom_mask(x, n))).collect()
}

/// `E_P(f, g) = ⟨f, (I − P) g⟩_π`.
pub fn dirichlet_form(kernel: &TransitionKernel, f: &[f64], g: &[f64]) -> Result<f64> {
    let pi = kernel
        .stationary()
        .ok_or_else(|| Error::InvalidArgument("kernel has no stationary distribution".into()))?;
    let n = kernel.nrows();
    for len in [f.len(), g.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    let pg = kernel.right_apply(g);
    Ok((0..n).map(|x| pi[x] * f[x] * (g[x] - pg[x])).sum())
}

/// Glauber Dirichlet form through hypercube edge conductances
/// `Σ_{x∼y} [π(x)π(y)/(π(x)+π(y))] (f(x)−f(y))(g(x)−g(y))`, scaled by the
/// `1/n` coordinate-selection probability of the discrete-time chain.
pub fn glauber_dirichlet_conductance(n: usize, pi: &[f64], f: &[f64], g: &[f64]) -> Result<f64> {
    let states = 1usize << n;
    for len in [pi.len(), f.len(), g.len()] {
        if len != states {
            return Err(Error::DimensionMismatch {
                expected: states,
                found: len,
            });
        }
    }
    let mut total = 0.0;
    for x in 0..states {
        for i in 0..n {
            let y = x ^ (1 << i);
            if y < x {
                continue;
            }
            let c = pi[x] * pi[y] / (pi[x] + pi[y]);
            total += c * (f[x] - f[y]) * (g[x] - g[y]);
        }
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn down_operator_examples() {
        let d = down_operator(3, 2, 1).unwrap();
        let s = d.row_position(0b011).unwrap();
        let t = d.col_position(0b001).unwrap();
        assert_eq!(d.get(s, t), 0.5);
        assert!(d.max_row_sum_error() < 1e-15);
        for i in 0..d.nrows() {
            assert_eq!(d.row(i).count(), 2);
        }

        let id = down_operator(4, 2, 2).unwrap();
        assert_eq!(id.to_dense(), DMatrix::identity(6, 6));

        let zero = down_operator(4, 2, 0).unwrap();
        assert_eq!(zero.ncols(), 1);
        assert!(zero.to_dense().iter().all(|&v| v == 1.0));

        assert!(matches!(down_operator(3, 2, 3), Err(Error::ArityOutOfRange { .. })));
    }

    #[test]
    fn up_operator_examples() {
        let mu = SubsetDensity::uniform(3, 2).unwrap();
        let u = up_operator(&mu, 1).unwrap();
        let t = u.row_position(0b001).unwrap();
        let s = u.col_position(0b011).unwrap();
        assert_eq!(u.get(t, s), 0.5);

        let same = up_operator(&mu, 2).unwrap();
        assert_eq!(same.to_dense(), DMatrix::identity(3, 3));

        let skew = SubsetDensity::new(3, 2, &[(vec![0, 1], 3.0), (vec![0, 2], 1.0)]).unwrap();
        let u = up_operator(&skew, 1).unwrap();
        let t = u.row_position(0b001).unwrap();
        let s = u.col_position(0b011).unwrap();
        assert!((u.get(t, s) - 0.75).abs() < 1e-15);
        assert!(u.max_row_sum_error() < 1e-15);
    }

    #[test]
    fn adjointness_identity() {
        let mu = SubsetDensity::new(4, 2, &[(vec![0, 1], 1.0), (vec![0, 2], 2.5), (vec![1, 3], 0.7), (vec![2, 3], 4.0)]).unwrap();
        for ell in 0..=2 {
            let d = down_operator_on(&mu, ell).unwrap();
            let u = up_operator(&mu, ell).unwrap();
            let low = mu.down_project(ell).unwrap();
            assert_eq!(d.cols(), u.rows());
            for (si, &s) in mu.masks().iter().enumerate() {
                for (ti, &t) in d.cols().iter().enumerate() {
                    let lhs = mu.prob(s) * d.get(si, ti);
                    let rhs = low.prob(t) * u.get(ti, si);
                    assert!((lhs - rhs).abs() < 1e-12, "ell={ell}");
                }
            }
        }
    }

    #[test]
    fn down_up_examples() {
        let mu = SubsetDensity::uniform(3, 2).unwrap();
        let p = down_up_kernel(&mu, 1, Level::Upper).unwrap();
        let i = p.row_position(0b011).unwrap();
        assert!((p.get(i, i) - 0.5).abs() < 1e-15);
        assert!(p.is_reversible());

        let id = down_up_kernel(&mu, 2, Level::Upper).unwrap();
        assert_eq!(id.to_dense(), DMatrix::identity(3, 3));

        // k-level equals D·U built from the separate operators
        let du = down_operator_on(&mu, 1).unwrap().compose(&up_operator(&mu, 1).unwrap()).unwrap();
        assert!((du.to_dense() - p.to_dense()).abs().max() < 1e-15);
        let ud = up_operator(&mu, 1).unwrap().compose(&down_operator_on(&mu, 1).unwrap()).unwrap();
        let q = down_up_kernel(&mu, 1, Level::Lower).unwrap();
        assert!((ud.to_dense() - q.to_dense()).abs().max() < 1e-15);
    }

    #[test]
    fn two_fold_upper_walk_is_identity() {
        let mu = SubsetDensity::uniform(4, 2).unwrap().r_fold(2).unwrap();
        let p = down_up_kernel(&mu, 3, Level::Upper).unwrap();
        assert_eq!(p.to_dense(), DMatrix::identity(6, 6));
        assert!(!p.is_irreducible());
    }

    #[test]
    fn glauber_single_spin() {
        for h in [-1.3, 0.0, 0.4, 2.0] {
            let model = IsingModel::new(vec![vec![0.0]], vec![h]).unwrap();
            let p = glauber_kernel(&model).unwrap();
            // state 1 is +1, state 0 is −1
            let expected = 1.0 / (1.0 + (2.0 * h).exp());
            assert!((p.get(1, 0) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn glauber_free_spins_stay_half() {
        let model = IsingModel::new(vec![vec![0.0; 2]; 2], vec![0.0; 2]).unwrap();
        let p = glauber_kernel(&model).unwrap();
        for x in 0..4 {
            assert!((p.get(x, x) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn dirichlet_examples() {
        let space = StateSpace::Spins { n: 1 };
        let swap = TransitionKernel::from_dense(space, vec![0, 1], &[vec![0.0, 1.0], vec![1.0, 0.0]], Some(vec![0.5, 0.5])).unwrap();
        // ½ Σ π(x) P(x,y) (f(x) − f(y))² = ½ (½ + ½)
        assert!((dirichlet_form(&swap, &[1.0, 0.0], &[1.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(dirichlet_form(&swap, &[3.0, 3.0], &[3.0, 3.0]).unwrap(), 0.0);
        assert!(matches!(
            dirichlet_form(&swap, &[1.0], &[1.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn period_detection() {
        let space = StateSpace::Spins { n: 1 };
        let swap = TransitionKernel::from_dense(space, vec![0, 1], &[vec![0.0, 1.0], vec![1.0, 0.0]], None).unwrap();
        assert_eq!(swap.period(), Some(2));
        let lazy = TransitionKernel::from_dense(space, vec![0, 1], &[vec![0.5, 0.5], vec![0.5, 0.5]], None).unwrap();
        assert_eq!(lazy.period(), Some(1));
        let stuck = TransitionKernel::identity(space, vec![0, 1], None).unwrap();
        assert_eq!(stuck.period(), None);
    }
}
