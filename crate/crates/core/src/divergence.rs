//! KL and TV divergences, entropy functionals, MLSI brackets, entropy
//! contraction search, closed-form κ, mixing times, and the telescoping
//! profile of down-projections.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::binomial;
use crate::error::{Error, Result};
use crate::ising::random_simplex;
use crate::kernel::{down_operator_on, TransitionKernel};
use crate::linalg::sym_eigen;
use crate::rng::SeedSplitter;
use crate::subset::SubsetDensity;

/// `Σ ν log(ν/μ)` in nats; `∞` when `ν` charges a point `μ` does not.
pub fn kl(nu: &[f64], mu: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in nu.iter().zip(mu) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            acc += a * (a / b).ln();
        }
    }
    acc.max(0.0)
}

pub fn tv(nu: &[f64], mu: &[f64]) -> f64 {
    0.5 * nu.iter().zip(mu).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Divergences {
    pub kl: f64,
    pub tv: f64,
}

pub fn divergences(nu: &[f64], mu: &[f64]) -> Result<Divergences> {
    if nu.len() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            found: nu.len(),
        });
    }
    Ok(Divergences {
        kl: kl(nu, mu),
        tv: tv(nu, mu),
    })
}

/// Probability vectors of `ν` and `μ` over the union of their supports.
pub fn aligned(nu: &SubsetDensity, mu: &SubsetDensity) -> Result<(Vec<f64>, Vec<f64>)> {
    if nu.ground_size() != mu.ground_size() || nu.arity() != mu.arity() {
        return Err(Error::DimensionMismatch {
            expected: mu.ground_size(),
            found: nu.ground_size(),
        });
    }
    let mut masks: Vec<u64> = mu.masks().iter().chain(nu.masks()).copied().collect();
    masks.sort_unstable();
    masks.dedup();
    Ok((
        masks.iter().map(|&m| nu.prob(m)).collect(),
        masks.iter().map(|&m| mu.prob(m)).collect(),
    ))
}

pub fn density_divergences(nu: &SubsetDensity, mu: &SubsetDensity) -> Result<Divergences> {
    let (a, b) = aligned(nu, mu)?;
    divergences(&a, &b)
}

/// `Ent_μ[f] = E f log f − E f log E f`, with `0 log 0 = 0`.
pub fn entropy_functional(mu: &[f64], f: &[f64]) -> Result<f64> {
    if mu.len() != f.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            found: f.len(),
        });
    }
    if let Some(&bad) = f.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::NegativeFunction(bad));
    }
    let mean: f64 = mu.iter().zip(f).map(|(m, v)| m * v).sum();
    if mean <= 0.0 {
        return Ok(0.0);
    }
    let e: f64 = mu
        .iter()
        .zip(f)
        .filter(|(_, &v)| v > 0.0)
        .map(|(m, &v)| m * v * (v / mean).ln())
        .sum();
    Ok(e.max(0.0))
}

/// Bracketing estimate of the modified log-Sobolev constant
/// `ρ₀ = inf E(f, log f) / (2 Ent f)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlsiEstimate {
    /// Smallest ratio found; every evaluated ratio bounds `ρ₀` from above.
    pub upper: f64,
    /// `(1 − c)/2` where `c` is the measured one-step KL contraction.
    pub lower: f64,
    pub contraction: f64,
    /// Spectral gap of the kernel, the `f → 1` limit of the ratio.
    pub gap: f64,
    pub witness_f: Vec<f64>,
    pub seed: u64,
    pub starts: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlsiOptions {
    pub starts: usize,
    pub iterations: usize,
    pub contraction_trials: usize,
    pub seed: u64,
}

impl Default for MlsiOptions {
    fn default() -> Self {
        Self {
            starts: 24,
            iterations: 300,
            contraction_trials: 512,
            seed: 0,
        }
    }
}

/// Largest kernel accepted by the dense estimators.
pub const DENSE_CAP: usize = 4096;

pub fn mlsi_estimate(kernel: &TransitionKernel, opts: &MlsiOptions) -> Result<MlsiEstimate> {
    let pi = kernel
        .stationary()
        .ok_or_else(|| Error::InvalidArgument("kernel has no stationary distribution".into()))?
        .to_vec();
    let residual = kernel.detailed_balance_residual();
    if residual > 1e-10 {
        return Err(Error::NonReversibleKernel(residual));
    }
    let n = kernel.nrows();
    if n > DENSE_CAP {
        return Err(Error::StateSpaceTooLarge { states: n, cap: DENSE_CAP });
    }
    if n < 2 {
        return Err(Error::DegenerateBase);
    }
    let edges = conductances(kernel, &pi);
    let splitter = SeedSplitter::new(opts.seed);

    // spectral candidate
    let spectrum = crate::spectrum::spectrum_report(kernel)?;
    let gap = spectrum.gap;
    let mut best = (f64::INFINITY, vec![1.0; n]);
    if let Some(v) = second_eigenfunction(kernel, &pi) {
        let g: Vec<f64> = v.iter().map(|x| 1e-2 * x).collect();
        let r = mlsi_ratio(&edges, &pi, &g).0;
        best = (r, g.iter().map(|x| x.exp()).collect());
    }

    let results: Vec<(f64, Vec<f64>)> = (0..opts.starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = splitter.stream(s as u64);
            let g0 = mlsi_start(n, &pi, s, &mut rng);
            descend_ratio(&edges, &pi, g0, opts.iterations)
        })
        .collect();
    for (r, g) in results {
        if r < best.0 {
            best = (r, g.iter().map(|x| x.exp()).collect());
        }
    }
    let mut upper = best.0;
    let mut witness = best.1;
    if gap < upper {
        // the linearization limit: a valid bound approached as f → 1
        upper = gap;
        if let Some(v) = second_eigenfunction(kernel, &pi) {
            witness = v.iter().map(|x| (1e-2 * x).exp()).collect();
        }
    }
    let contraction = kernel_contraction(
        &pi,
        kernel,
        &ContractionOptions {
            trials: opts.contraction_trials,
            seed: opts.seed ^ 0x9e37_79b9,
            ..ContractionOptions::default()
        },
    )?
    .coefficient;
    Ok(MlsiEstimate {
        upper,
        lower: (1.0 - contraction) / 2.0,
        contraction,
        gap,
        witness_f: witness,
        seed: opts.seed,
        starts: opts.starts,
    })
}

/// Symmetric edge list `(x, y, π_x P_xy)` with `x < y`.
fn conductances(kernel: &TransitionKernel, pi: &[f64]) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for x in 0..kernel.nrows() {
        for (y, p) in kernel.row(x) {
            if y > x && p > 0.0 {
                out.push((x, y, pi[x] * p));
            }
        }
    }
    out
}

/// Ratio `E(e^g, g) / (2 Ent e^g)` and its gradient in `g`.
fn mlsi_ratio(edges: &[(usize, usize, f64)], pi: &[f64], g: &[f64]) -> (f64, Vec<f64>) {
    let n = g.len();
    let top = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // shift so the largest value of f is 1; the ratio is scale invariant
    let f: Vec<f64> = g.iter().map(|v| (v - top).exp()).collect();
    let mut energy = 0.0;
    let mut d_energy = vec![0.0; n];
    for &(x, y, q) in edges {
        let df = f[x] - f[y];
        let dg = g[x] - g[y];
        energy += q * df * dg;
        d_energy[x] += q * (f[x] * dg + df);
        d_energy[y] += q * (-f[y] * dg - df);
    }
    let mean: f64 = pi.iter().zip(&f).map(|(p, v)| p * v).sum();
    let lm = mean.ln();
    // Ent = mean · Σ π (r e^r − e^r + 1) with r = log(f/mean); every term is
    // nonnegative, which avoids cancellation when f is nearly constant
    let ent: f64 = mean * pi.iter().zip(g).map(|(p, gv)| p * entropy_term(gv - top - lm)).sum::<f64>();
    let spread = top - g.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(ent > 1e-300) || spread < 1e-6 {
        return (f64::INFINITY, vec![0.0; n]);
    }
    let ratio = energy / (2.0 * ent);
    let grad = (0..n)
        .map(|z| {
            let d_ent = pi[z] * f[z] * (g[z] - top - lm);
            (d_energy[z] - 2.0 * ratio * d_ent) / (2.0 * ent)
        })
        .collect();
    (ratio, grad)
}

/// `r e^r − e^r + 1`, with a series near zero.
fn entropy_term(r: f64) -> f64 {
    if r.abs() < 1e-2 {
        let r2 = r * r;
        r2 * (0.5 + r / 3.0 + r2 / 8.0 + r2 * r / 30.0)
    } else {
        r * r.exp() - r.exp_m1()
    }
}

fn mlsi_start<R: Rng + ?Sized>(n: usize, pi: &[f64], s: usize, rng: &mut R) -> Vec<f64> {
    match s % 4 {
        0 => (0..n).map(|_| rng.random_range(-0.1..0.1)).collect(),
        1 => (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
        2 => {
            // bump on a random low-mass state
            let mut g = vec![0.0; n];
            let x = rng.random_range(0..n);
            g[x] = (1.0 / pi[x].max(1e-300)).ln().min(30.0) * rng.random_range(0.2..1.0);
            g
        }
        _ => {
            // indicator of a random half
            (0..n)
                .map(|_| if rng.random::<bool>() { rng.random_range(0.5..4.0) } else { 0.0 })
                .collect()
        }
    }
}

fn descend_ratio(edges: &[(usize, usize, f64)], pi: &[f64], mut g: Vec<f64>, iterations: usize) -> (f64, Vec<f64>) {
    let (mut r, mut grad) = mlsi_ratio(edges, pi, &g);
    let mut step = 1.0;
    for _ in 0..iterations {
        let norm: f64 = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-14) {
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = g.iter().zip(&grad).map(|(a, b)| a - step * b / norm).collect();
            let (rt, gt) = mlsi_ratio(edges, pi, &trial);
            if rt < r {
                g = trial;
                r = rt;
                grad = gt;
                improved = true;
                step *= 1.5;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (r, g)
}

/// Second eigenfunction of a reversible kernel, normalized in `L²(π)`.
fn second_eigenfunction(kernel: &TransitionKernel, pi: &[f64]) -> Option<Vec<f64>> {
    let n = kernel.nrows();
    if !(2..=2048).contains(&n) || pi.iter().any(|&p| p <= 0.0) {
        return None;
    }
    let s = symmetrized(kernel, pi);
    let (_, vecs) = sym_eigen(&s);
    let col = vecs.column(1);
    Some((0..n).map(|x| col[x] / pi[x].sqrt()).collect())
}

/// `D^{1/2} P D^{-1/2}` with `D = diag(π)`.
pub(crate) fn symmetrized(kernel: &TransitionKernel, pi: &[f64]) -> DMatrix<f64> {
    let n = kernel.nrows();
    let mut s = DMatrix::zeros(n, n);
    for x in 0..n {
        for (y, p) in kernel.row(x) {
            s[(x, y)] = (pi[x] / pi[y]).sqrt() * p;
        }
    }
    s
}

/// Outcome of an entropy-contraction search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// Largest `KL(νK‖μK)/KL(ν‖μ)` found, clamped to `[0, 1]`.
    pub coefficient: f64,
    pub kappa_bound: Option<f64>,
    /// Maximizing `ν`, indexed like the rows of the projector.
    pub witness: Vec<f64>,
    pub iterations: usize,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionOptions {
    pub trials: usize,
    pub ascent_steps: usize,
    pub ascent_starts: usize,
    pub seed: u64,
}

impl Default for ContractionOptions {
    fn default() -> Self {
        Self {
            trials: 512,
            ascent_steps: 200,
            ascent_starts: 8,
            seed: 0,
        }
    }
}

/// What `ν ↦ νK` applies in a contraction search.
#[derive(Clone, Copy, Debug)]
pub enum Projector<'a> {
    /// `D_{k→ℓ}` restricted to the support of `μ`.
    Down {
        ell: usize,
    },
    Kernel(&'a TransitionKernel),
}

/// Sup of `KL(νK‖μK)/KL(ν‖μ)` over measures `ν ≪ μ` on `supp(μ)`.
pub fn contraction_coefficient(mu: &SubsetDensity, projector: Projector<'_>, opts: &ContractionOptions) -> Result<ContractionReport> {
    let pi = mu.probabilities();
    match projector {
        Projector::Down { ell } => {
            let d = down_operator_on(mu, ell)?;
            kernel_contraction(&pi, &d, opts)
        }
        Projector::Kernel(k) => {
            if k.nrows() != pi.len() || k.rows() != mu.masks() {
                return Err(Error::DimensionMismatch {
                    expected: pi.len(),
                    found: k.nrows(),
                });
            }
            kernel_contraction(&pi, k, opts)
        }
    }
}

/// Contraction search against a reference `mu` over the rows of `kernel`.
///
/// Candidates: flat-Dirichlet measures, all point masses, perturbations of
/// `mu` along the top singular direction, then softmax-parameterized ascent
/// from the best few.
pub fn kernel_contraction(mu: &[f64], kernel: &TransitionKernel, opts: &ContractionOptions) -> Result<ContractionReport> {
    let n = mu.len();
    if n != kernel.nrows() {
        return Err(Error::DimensionMismatch {
            expected: kernel.nrows(),
            found: n,
        });
    }
    let support: Vec<usize> = (0..n).filter(|&x| mu[x] > 0.0).collect();
    if support.len() < 2 {
        return Err(Error::DegenerateBase);
    }
    let image = kernel.left_apply(mu);
    let eval = |nu: &[f64]| -> Option<f64> {
        let base = kl(nu, mu);
        if !(base >= 1e-9) || !base.is_finite() {
            return None;
        }
        Some(kl(&kernel.left_apply(nu), &image) / base)
    };
    let splitter = SeedSplitter::new(opts.seed);

    let mut candidates: Vec<Vec<f64>> = (0..opts.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = splitter.stream(t as u64);
            let w = random_simplex(support.len(), &mut rng);
            let mut nu = vec![0.0; n];
            for (&x, v) in support.iter().zip(w) {
                nu[x] = v;
            }
            nu
        })
        .collect();
    let vertex_budget = support.len().min(4096);
    for &x in support.iter().take(vertex_budget) {
        let mut nu = vec![0.0; n];
        nu[x] = 1.0;
        candidates.push(nu);
    }
    candidates.extend(near_base_candidates(mu, kernel, &image));

    let mut scored: Vec<(f64, usize)> = candidates
        .par_iter()
        .enumerate()
        .filter_map(|(i, nu)| eval(nu).map(|r| (r, i)))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut best = scored
        .first()
        .map(|&(r, i)| (r, candidates[i].clone()))
        .unwrap_or((0.0, mu.to_vec()));

    let starts: Vec<usize> = scored.iter().take(opts.ascent_starts).map(|&(_, i)| i).collect();
    let ascended: Vec<(f64, Vec<f64>)> = starts
        .par_iter()
        .map(|&i| ascend_ratio(mu, kernel, &image, &support, &candidates[i], opts.ascent_steps))
        .collect();
    for (r, nu) in ascended {
        if r > best.0 {
            best = (r, nu);
        }
    }
    Ok(ContractionReport {
        coefficient: best.0.clamp(0.0, 1.0),
        kappa_bound: None,
        witness: best.1,
        iterations: opts.ascent_steps * starts.len(),
        trials: opts.trials,
        seed: opts.seed,
    })
}

/// `μ(1 + ε v)` along the top nontrivial singular direction of the
/// `L²(μ) → L²(μK)` adjoint, at a few small `ε`.
fn near_base_candidates(mu: &[f64], kernel: &TransitionKernel, image: &[f64]) -> Vec<Vec<f64>> {
    let n = mu.len();
    let m = kernel.ncols();
    if n > 1024 || m > 1024 {
        return Vec::new();
    }
    let rows: Vec<usize> = (0..n).filter(|&x| mu[x] > 0.0).collect();
    let cols: Vec<usize> = (0..m).filter(|&y| image[y] > 0.0).collect();
    let mut a = DMatrix::zeros(rows.len(), cols.len());
    let col_pos: std::collections::HashMap<usize, usize> = cols.iter().enumerate().map(|(i, &y)| (y, i)).collect();
    for (ri, &x) in rows.iter().enumerate() {
        for (y, p) in kernel.row(x) {
            if let Some(&ci) = col_pos.get(&y) {
                a[(ri, ci)] = mu[x].sqrt() * p / image[y].sqrt();
            }
        }
    }
    let gram = &a * a.transpose();
    let (vals, vecs) = sym_eigen(&gram);
    let mut out = Vec::new();
    // skip the constant direction (eigenvalue 1)
    for idx in 1..vals.len().min(3) {
        let v: Vec<f64> = (0..rows.len()).map(|r| vecs[(r, idx)] / mu[rows[r]].sqrt()).collect();
        let scale = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            continue;
        }
        for eps in [1e-2, 1e-1, 0.5] {
            for sign in [1.0, -1.0] {
                let mut nu = vec![0.0; n];
                for (r, &x) in rows.iter().enumerate() {
                    nu[x] = mu[x] * (1.0 + sign * eps * v[r] / scale);
                }
                let s: f64 = nu.iter().sum();
                nu.iter_mut().for_each(|p| *p /= s);
                out.push(nu);
            }
        }
    }
    out
}

fn ascend_ratio(mu: &[f64], kernel: &TransitionKernel, image: &[f64], support: &[usize], start: &[f64], steps: usize) -> (f64, Vec<f64>) {
    let n = mu.len();
    // softmax logits over the support; point masses get a tiny floor
    let mut theta: Vec<f64> = support.iter().map(|&x| (start[x] + 1e-9 * mu[x]).ln()).collect();
    let build = |theta: &[f64]| -> Vec<f64> {
        let top = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = theta.iter().map(|t| (t - top).exp()).collect();
        let s: f64 = w.iter().sum();
        let mut nu = vec![0.0; n];
        for (&x, v) in support.iter().zip(w) {
            nu[x] = v / s;
        }
        nu
    };
    let value_grad = |nu: &[f64]| -> Option<(f64, Vec<f64>)> {
        let base = kl(nu, mu);
        if !(base >= 1e-9) {
            return None;
        }
        let pushed = kernel.left_apply(nu);
        let top = kl(&pushed, image);
        let r = top / base;
        let log_ratio: Vec<f64> = pushed
            .iter()
            .zip(image)
            .map(|(a, b)| if *a > 0.0 { (a / b).ln() } else { 0.0 })
            .collect();
        let d_top = kernel.right_apply(&log_ratio);
        let g: Vec<f64> = support
            .iter()
            .map(|&x| {
                let d_base = if nu[x] > 0.0 { (nu[x] / mu[x]).ln() } else { 0.0 };
                (d_top[x] - r * d_base) / base
            })
            .collect();
        // chain rule through the softmax
        let mean: f64 = support.iter().zip(&g).map(|(&x, gv)| nu[x] * gv).sum();
        Some((r, support.iter().zip(&g).map(|(&x, gv)| nu[x] * (gv - mean)).collect()))
    };
    let mut nu = build(&theta);
    let Some((mut r, mut grad)) = value_grad(&nu) else {
        return (0.0, nu);
    };
    let mut step = 1.0;
    for _ in 0..steps {
        let norm: f64 = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-15) {
            break;
        }
        let mut moved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t + step * g / norm).collect();
            let cand = build(&trial);
            if let Some((rt, gt)) = value_grad(&cand) {
                if rt > r {
                    theta = trial;
                    nu = cand;
                    r = rt;
                    grad = gt;
                    moved = true;
                    step *= 1.5;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (r, nu)
}

/// Both closed forms of κ at `(k, ℓ, α)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaBounds {
    pub general: f64,
    /// `C(k−ℓ, 1/α) / C(k, 1/α)`, present when `1/α` is an integer.
    pub integer_form: Option<f64>,
}

impl KappaBounds {
    /// The larger (stronger) of the available bounds.
    pub fn best(&self) -> f64 {
        self.integer_form.map_or(self.general, |b| b.max(self.general))
    }
}

pub fn kappa_closed_form(k: usize, ell: usize, alpha: f64) -> Result<KappaBounds> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let inv = 1.0 / alpha;
    let rounded = inv.round();
    let integral = (inv - rounded).abs() < 1e-9;
    let inv = if integral { rounded } else { inv };
    let ceil = inv.ceil() as i64;
    let max = k as i64 - ceil;
    if ell as i64 > max {
        return Err(Error::EllTooLarge { ell, max });
    }
    let (k_f, l_f) = (k as f64, ell as f64);
    let prod: f64 = (0..ceil).map(|i| k_f - l_f - i as f64).product();
    let general = (k_f + 1.0 - l_f - inv).powf(inv - ceil as f64) * prod / (k_f + 1.0).powf(inv);
    let integer_form = integral.then(|| binomial(k - ell, inv as usize) / binomial(k, inv as usize));
    Ok(KappaBounds { general, integer_form })
}

/// Default tolerance for [`mixing_time`].
pub const DEFAULT_EPSILON: f64 = 0.25;
pub const MIXING_ITERATION_CAP: u64 = 10_000_000;

/// `min { t : d_tv(ν Pᵗ, π) ≤ ε }` by repeated vector-matrix products.
pub fn mixing_time(kernel: &TransitionKernel, start: &[f64], epsilon: f64) -> Result<u64> {
    check_mixing_inputs(kernel, epsilon)?;
    mixing_time_unchecked(kernel, start, epsilon, MIXING_ITERATION_CAP)
}

fn check_mixing_inputs(kernel: &TransitionKernel, epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if kernel.stationary().is_none() {
        return Err(Error::InvalidArgument("kernel has no stationary distribution".into()));
    }
    if !kernel.is_ergodic() {
        return Err(Error::NotErgodic);
    }
    Ok(())
}

fn mixing_time_unchecked(kernel: &TransitionKernel, start: &[f64], epsilon: f64, cap: u64) -> Result<u64> {
    let pi = kernel.stationary().expect("checked");
    if start.len() != pi.len() {
        return Err(Error::DimensionMismatch {
            expected: pi.len(),
            found: start.len(),
        });
    }
    let mut p = start.to_vec();
    let mut t = 0u64;
    while tv(&p, pi) > epsilon {
        if t >= cap {
            return Err(Error::IterationCapExceeded(cap));
        }
        p = kernel.left_apply(&p);
        t += 1;
    }
    Ok(t)
}

/// Worst mixing time over point-mass starts at the given row positions
/// (all rows when `starts` is `None`).
pub fn mixing_time_worst(kernel: &TransitionKernel, starts: Option<&[usize]>, epsilon: f64) -> Result<(u64, usize)> {
    check_mixing_inputs(kernel, epsilon)?;
    let all: Vec<usize>;
    let starts = match starts {
        Some(s) => s,
        None => {
            all = (0..kernel.nrows()).collect();
            &all
        }
    };
    let times: Vec<Result<u64>> = starts
        .par_iter()
        .map(|&x| {
            if x >= kernel.nrows() {
                return Err(Error::InvalidStart);
            }
            let mut p = vec![0.0; kernel.nrows()];
            p[x] = 1.0;
            mixing_time_unchecked(kernel, &p, epsilon, MIXING_ITERATION_CAP)
        })
        .collect();
    let mut worst = (0u64, starts.first().copied().unwrap_or(0));
    for (t, &x) in times.into_iter().zip(starts) {
        let t = t?;
        if t > worst.0 {
            worst = (t, x);
        }
    }
    Ok(worst)
}

/// `⌈ρ₀⁻¹ (max_x log log(ν(x)/μ(x)) + log(1/(2ε²)))⌉`, floored at zero;
/// `start = None` uses the worst case `log log(1/min μ)`.
pub fn mlsi_mixing_bound(rho0: f64, mu: &[f64], start: Option<&[f64]>, epsilon: f64) -> Result<u64> {
    if !(rho0 > 0.0) {
        return Err(Error::NonpositiveRho(rho0));
    }
    if mu.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::InvalidArgument("mu must have full support on its index".into()));
    }
    let warm = match start {
        None => {
            let min = mu.iter().cloned().fold(f64::INFINITY, f64::min);
            (1.0 / min).ln().ln()
        }
        Some(nu) => {
            if nu.len() != mu.len() {
                return Err(Error::DimensionMismatch {
                    expected: mu.len(),
                    found: nu.len(),
                });
            }
            nu.iter()
                .zip(mu)
                .filter(|(a, _)| **a > 0.0)
                .map(|(a, b)| {
                    let l = (a / b).ln();
                    if l > 0.0 {
                        l.ln()
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .fold(f64::NEG_INFINITY, f64::max)
        }
    };
    let value = (warm + (1.0 / (2.0 * epsilon * epsilon)).ln()) / rho0;
    Ok(if value > 0.0 { value.ceil() as u64 } else { 0 })
}

/// Level-by-level KL of the down-projections and their increments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelescopeProfile {
    /// `Δ_i = KL_{i+1} − KL_i`, `i = 0..k`.
    pub deltas: Vec<f64>,
    /// `KL_i = KL(ν D_{k→i} ‖ μ D_{k→i})`, `i = 0..=k`.
    pub levels: Vec<f64>,
    /// `β_i = 1/(α(k−i) − 1)` where `α(k−i) > 1`.
    pub betas: Vec<Option<f64>>,
    /// `β_i Σ_{j>i} Δ_j − Δ_i` where `β_i` is defined.
    pub chain_margins: Vec<Option<f64>>,
}

pub fn telescope_profile(nu: &SubsetDensity, mu: &SubsetDensity, alpha: Option<f64>) -> Result<TelescopeProfile> {
    if nu.ground_size() != mu.ground_size() || nu.arity() != mu.arity() {
        return Err(Error::DimensionMismatch {
            expected: mu.arity(),
            found: nu.arity(),
        });
    }
    if nu.masks().iter().any(|&m| mu.position(m).is_none()) {
        return Err(Error::SupportMismatch);
    }
    let k = mu.arity();
    let mut levels = Vec::with_capacity(k + 1);
    levels.push(0.0);
    for ell in 1..k {
        let a = nu.down_project(ell)?;
        let b = mu.down_project(ell)?;
        levels.push(density_divergences(&a, &b)?.kl);
    }
    if k > 0 {
        levels.push(density_divergences(nu, mu)?.kl);
    }
    let deltas: Vec<f64> = levels.windows(2).map(|w| w[1] - w[0]).collect();
    let betas: Vec<Option<f64>> = (0..k)
        .map(|i| {
            let a = alpha? * (k - i) as f64;
            (a > 1.0).then(|| 1.0 / (a - 1.0))
        })
        .collect();
    let chain_margins = (0..k)
        .map(|i| betas[i].map(|b| b * deltas[i + 1..].iter().sum::<f64>() - deltas[i]))
        .collect();
    Ok(TelescopeProfile {
        deltas,
        levels,
        betas,
        chain_margins,
    })
}
