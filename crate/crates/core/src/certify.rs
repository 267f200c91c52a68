//! Certificates for entropic independence, fractional log-concavity,
//! spectral independence and Dobrushin contraction, plus the KL dual that
//! ties them together.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{indices_from_mask, sub_subsets};
use crate::divergence::kl;
use crate::error::{Error, Result};
use crate::ising::random_simplex;
use crate::kernel::TransitionKernel;
use crate::linalg::{max_eigenvalue, sym_eigenvalues};
use crate::rng::SeedSplitter;
use crate::subset::{log_sum_exp, mask_sum, AlphaVector, MarginalVector, SpinDensity, SubsetDensity};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    EntropicIndependence,
    TangentInequality,
    Flc,
    SpectralIndependence,
    DobrushinContraction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedExact,
    EvidenceSampled,
    Falsified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Parameter {
    Scalar(f64),
    Vector(Vec<f64>),
}

/// Evidence attached to a falsified certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// A point `z > 0` where an inequality fails.
    Point { z: Vec<f64> },
    /// A marginal whose minimum KL is below the required amount.
    Marginal { q: Vec<f64>, dual_value: f64, required: f64 },
    /// A point and a direction of positive curvature.
    Direction { z: Vec<f64>, direction: Vec<f64>, curvature: f64 },
    /// A field shift where the rank-one chain fails.
    Field { h: Vec<f64>, hessian_max: f64, ineq_margin: f64 },
    /// A row or coordinate violating its bound.
    Coordinate { index: usize, value: f64 },
    /// A link `μ_T` that fails, with its own witness.
    Link { t: Vec<usize>, inner: Box<Witness> },
}

/// Outcome of an independence or concavity check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub property: Property,
    #[serde(rename = "alpha")]
    pub parameter: Parameter,
    pub verdict: Verdict,
    /// Worst slack found; negative on failure.
    pub margin: f64,
    pub witness: Option<Witness>,
    pub samples: usize,
    pub seed: Option<u64>,
}

impl Certificate {
    pub fn is_falsified(&self) -> bool {
        self.verdict == Verdict::Falsified
    }
}

/// Solution of the minimum relative entropy problem at marginal `q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    /// `inf { KL(ν‖μ) : ν D_{k→1} = q }`.
    pub value: f64,
    /// Minimizer `z* = e^{y*}`; coordinates with `q_i = 0` are 0.
    pub z_star: Vec<f64>,
    /// Primal witness `ν = z* ∗ μ` over `mu.masks()`.
    pub nu: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Minimizes `log g_μ(e^y) − k⟨q, y⟩` by damped Newton steps with a
/// pseudo-inverse Hessian.
pub fn min_entropy_dual(mu: &SubsetDensity, q: &[f64], tol: f64) -> Result<DualSolution> {
    let n = mu.ground_size();
    let k = mu.arity() as f64;
    if q.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: q.len(),
        });
    }
    let total: f64 = q.iter().sum();
    if q.iter().any(|&v| !(v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InfeasibleMarginal);
    }
    // the z_i → 0 limit for q_i = 0 removes every set containing i
    let zero_mask = q.iter().enumerate().filter(|(_, &v)| v == 0.0).fold(0u64, |m, (i, _)| m | 1 << i);
    let kept: Vec<usize> = (0..mu.len()).filter(|&s| mu.masks()[s] & zero_mask == 0).collect();
    if kept.is_empty() {
        return Err(Error::InfeasibleMarginal);
    }
    let covered = kept.iter().fold(0u64, |m, &s| m | mu.masks()[s]);
    if q.iter().enumerate().any(|(i, &v)| v > 0.0 && covered >> i & 1 == 0) {
        return Err(Error::InfeasibleMarginal);
    }
    let active: Vec<usize> = (0..n).filter(|&i| q[i] > 0.0).collect();
    let masks: Vec<u64> = kept.iter().map(|&s| mu.masks()[s]).collect();
    let logw: Vec<f64> = kept.iter().map(|&s| mu.prob(mu.masks()[s]).ln()).collect();
    let kq: Vec<f64> = active.iter().map(|&i| k * q[i]).collect();
    let problem = DualProblem {
        masks: &masks,
        logw: &logw,
        active: &active,
        kq: &kq,
        n,
    };

    let mut y = vec![0.0; n];
    let (mut f, mut grad, mut hess, mut pi) = problem.eval(&y, true);
    let mut iterations = 0;
    let mut gnorm = norm(&grad);
    while gnorm > tol && iterations < 500 {
        iterations += 1;
        let h = hess.as_ref().expect("requested");
        let step = newton_direction(h, &grad);
        let slope: f64 = step.iter().zip(&grad).map(|(a, b)| a * b).sum();
        // fall back to steepest descent if the pseudo-inverse step is not a descent direction
        let (dir, slope) = if slope < 0.0 {
            (step, slope)
        } else {
            (grad.iter().map(|g| -g).collect(), -gnorm * gnorm)
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-20 {
            let trial = problem.step(&y, &dir, t);
            let (ft, _, _, _) = problem.eval(&trial, false);
            if ft <= f + 1e-4 * t * slope {
                y = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        let next = problem.eval(&y, true);
        if !(next.0 > -1e300) {
            return Err(Error::InfeasibleMarginal);
        }
        f = next.0;
        grad = next.1;
        hess = next.2;
        pi = next.3;
        gnorm = norm(&grad);
    }
    if gnorm > tol.max(1e-6) {
        return Err(Error::NoConvergence(gnorm));
    }
    let mut z_star = vec![0.0; n];
    for &i in &active {
        z_star[i] = y[i].exp();
    }
    let mut nu = vec![0.0; mu.len()];
    for (&s, p) in kept.iter().zip(&pi) {
        nu[s] = *p;
    }
    Ok(DualSolution {
        value: (-f).max(0.0),
        z_star,
        nu,
        iterations,
        gradient_norm: gnorm,
    })
}

struct DualProblem<'a> {
    masks: &'a [u64],
    logw: &'a [f64],
    active: &'a [usize],
    kq: &'a [f64],
    n: usize,
}

impl DualProblem<'_> {
    fn step(&self, y: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
        let mut out = y.to_vec();
        for (a, &i) in self.active.iter().enumerate() {
            out[i] += t * dir[a];
        }
        out
    }

    /// Objective, gradient and Hessian over the active coordinates, plus the
    /// tilted law `π ∝ μ_S e^{y(S)}` over the kept sets.
    #[allow(clippy::type_complexity)]
    fn eval(&self, y: &[f64], derivatives: bool) -> (f64, Vec<f64>, Option<DMatrix<f64>>, Vec<f64>) {
        let terms: Vec<f64> = self.masks.iter().zip(self.logw).map(|(&m, &l)| l + mask_sum(m, y)).collect();
        let lse = log_sum_exp(&terms);
        let lin: f64 = self.active.iter().zip(self.kq).map(|(&i, &c)| c * y[i]).sum();
        let f = lse - lin;
        if !derivatives {
            return (f, Vec::new(), None, Vec::new());
        }
        let pi: Vec<f64> = terms.iter().map(|t| (t - lse).exp()).collect();
        let d = self.active.len();
        let mut pos = vec![usize::MAX; self.n];
        for (a, &i) in self.active.iter().enumerate() {
            pos[i] = a;
        }
        let mut first = vec![0.0; d];
        let mut second = DMatrix::zeros(d, d);
        for (&m, &p) in self.masks.iter().zip(&pi) {
            let members: Vec<usize> = indices_from_mask(m)
                .into_iter()
                .map(|i| pos[i])
                .filter(|&a| a != usize::MAX)
                .collect();
            for &a in &members {
                first[a] += p;
                for &b in &members {
                    second[(a, b)] += p;
                }
            }
        }
        let grad: Vec<f64> = first.iter().zip(self.kq).map(|(a, b)| a - b).collect();
        let fv = DVector::from_vec(first);
        let hess = second - &fv * fv.transpose();
        (f, grad, Some(hess), pi)
    }
}

fn newton_direction(h: &DMatrix<f64>, grad: &[f64]) -> Vec<f64> {
    let d = grad.len();
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cut = top * 1e-12;
    let g = DVector::from_column_slice(grad);
    let mut out = DVector::zeros(d);
    for (c, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > cut && lam > 0.0 {
            let v = eig.eigenvectors.column(c);
            out -= v * (v.dot(&g) / lam);
        }
    }
    out.iter().copied().collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Search settings for [`tangent_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentOptions {
    /// Log-uniform points on `[1e-3, 1e3]^n` added to the supplied ones.
    pub samples: usize,
    /// Axis and pair grids, dual-transferred points and local refinement.
    pub structured: bool,
    pub seed: u64,
}

impl Default for TangentOptions {
    fn default() -> Self {
        Self {
            samples: 1000,
            structured: true,
            seed: 0,
        }
    }
}

/// `Σ p_i z_i − g_μ(z^α)^{1/kα}` at one point.
pub fn tangent_slack(mu: &SubsetDensity, p: &[f64], alpha: f64, z: &[f64]) -> f64 {
    let k = mu.arity() as f64;
    let lin: f64 = p.iter().zip(z).map(|(a, b)| a * b).sum();
    if k == 0.0 {
        return lin - 1.0;
    }
    let y: Vec<f64> = z.iter().map(|v| alpha * v.ln()).collect();
    lin - (mu.log_gen_poly(&y) / (k * alpha)).exp()
}

/// Evaluates the tangent inequality `g_μ(z^α)^{1/kα} ≤ Σ p_i z_i` on the
/// supplied points plus sampled and structured ones.
pub fn tangent_check(mu: &SubsetDensity, alpha: f64, points: &[Vec<f64>], opts: &TangentOptions) -> Result<Certificate> {
    check_alpha(alpha)?;
    let n = mu.ground_size();
    if let Some(bad) = points.iter().find(|z| z.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    if let Some((index, value)) = points.iter().flatten().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NegativeCoordinate {
            index: index % n.max(1),
            value: *value,
        });
    }
    let p = mu.marginals().0;
    let mut all: Vec<Vec<f64>> = points.to_vec();
    let mut rng = SeedSplitter::new(opts.seed).stream(0);
    for _ in 0..opts.samples {
        all.push((0..n).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect());
    }
    if opts.structured {
        all.extend(structured_points(mu, alpha));
    }
    let slacks: Vec<f64> = all.par_iter().map(|z| tangent_slack(mu, &p, alpha, z)).collect();
    let mut worst = (f64::INFINITY, usize::MAX);
    for (i, &s) in slacks.iter().enumerate() {
        if s < worst.0 {
            worst = (s, i);
        }
    }
    let mut worst_point = all.get(worst.1).cloned().unwrap_or_else(|| vec![1.0; n]);
    if opts.structured && !slacks.is_empty() {
        let mut order: Vec<usize> = (0..slacks.len()).collect();
        order.sort_by(|&a, &b| scaled(&slacks, &all, &p, a).total_cmp(&scaled(&slacks, &all, &p, b)));
        let refined: Vec<(f64, Vec<f64>)> = order
            .iter()
            .take(4)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&&i| refine_tangent(mu, &p, alpha, &all[i]))
            .collect();
        for (s, z) in refined {
            if s < worst.0 {
                worst.0 = s;
                worst_point = z;
            }
        }
    }
    let samples = all.len();
    let margin = if worst.0.is_finite() { worst.0 } else { 0.0 };
    let falsified = margin < -1e-9;
    Ok(Certificate {
        property: Property::TangentInequality,
        parameter: Parameter::Scalar(alpha),
        verdict: if falsified { Verdict::Falsified } else { Verdict::EvidenceSampled },
        margin,
        witness: falsified.then_some(Witness::Point { z: worst_point }),
        samples,
        seed: Some(opts.seed),
    })
}

/// Slack relative to `Σ p_i z_i`; the inequality is degree-one homogeneous.
fn scaled(slacks: &[f64], points: &[Vec<f64>], p: &[f64], i: usize) -> f64 {
    let lin: f64 = p.iter().zip(&points[i]).map(|(a, b)| a * b).sum();
    slacks[i] / lin.max(1e-300)
}

fn structured_points(mu: &SubsetDensity, alpha: f64) -> Vec<Vec<f64>> {
    let n = mu.ground_size();
    let mut out = Vec::new();
    let axis: Vec<f64> = (0..25).map(|i| 10f64.powf(-3.0 + 0.25 * i as f64)).collect();
    for i in 0..n {
        for &t in &axis {
            let mut z = vec![1.0; n];
            z[i] = t;
            out.push(z);
        }
    }
    let coarse: Vec<f64> = (0..9).map(|i| 10f64.powf(-3.0 + 0.75 * i as f64)).collect();
    if n <= 24 {
        for i in 0..n {
            for j in i + 1..n {
                for &t in &coarse {
                    for &s in &coarse {
                        let mut z = vec![1.0; n];
                        z[i] = t;
                        z[j] = s;
                        out.push(z);
                    }
                }
            }
        }
    }
    // points transferred from dual minimizers at vertex marginals
    if mu.len() <= 256 && mu.arity() > 0 {
        let k = mu.arity() as f64;
        for &m in mu.masks() {
            let mut q = vec![0.0; n];
            for i in indices_from_mask(m) {
                q[i] = 1.0 / k;
            }
            if let Ok(sol) = min_entropy_dual(mu, &q, 1e-9) {
                for floor in [1e-3, 1e-6] {
                    out.push(sol.z_star.iter().map(|&v| v.max(floor).powf(1.0 / alpha)).collect());
                }
            }
        }
    }
    out
}

/// Multiplicative coordinate search that lowers the scaled slack.
fn refine_tangent(mu: &SubsetDensity, p: &[f64], alpha: f64, start: &[f64]) -> (f64, Vec<f64>) {
    let n = start.len();
    let lin = |z: &[f64]| -> f64 { p.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() };
    let score = |z: &[f64]| tangent_slack(mu, p, alpha, z) / lin(z).max(1e-300);
    let mut z = start.to_vec();
    let mut best = score(&z);
    let mut factor = 4.0f64;
    while factor > 1.0001 {
        let mut improved = false;
        for i in 0..n {
            for f in [factor, 1.0 / factor] {
                let old = z[i];
                z[i] = (old * f).clamp(1e-8, 1e8);
                let s = score(&z);
                if s < best {
                    best = s;
                    improved = true;
                } else {
                    z[i] = old;
                }
            }
        }
        if !improved {
            factor = factor.sqrt();
        }
    }
    // rescale so Σ p_i z_i = 1; the slack is then the scaled slack
    let l = lin(&z);
    let z: Vec<f64> = z.iter().map(|v| v / l).collect();
    (tangent_slack(mu, p, alpha, &z), z)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EiMode {
    ExactDual,
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EiOptions {
    pub mode: EiMode,
    /// Random interior marginals in the exact-dual mesh.
    pub mesh: usize,
    pub tangent: TangentOptions,
    pub seed: u64,
}

impl Default for EiOptions {
    fn default() -> Self {
        Self {
            mode: EiMode::ExactDual,
            mesh: 256,
            tangent: TangentOptions::default(),
            seed: 0,
        }
    }
}

/// Checks `KL(νD_{k→1}‖μD_{k→1}) ≤ KL(ν‖μ)/(αk)`. Exact-dual mode checks
/// `min_entropy_dual(μ, q) ≥ αk·KL(q‖p)` on vertex and random marginals and
/// runs the tangent check; sampled mode runs the tangent check only.
pub fn entropic_independence_certify(mu: &SubsetDensity, alpha: f64, opts: &EiOptions) -> Result<Certificate> {
    check_alpha(alpha)?;
    let tangent = tangent_check(
        mu,
        alpha,
        &[],
        &TangentOptions {
            seed: opts.seed,
            ..opts.tangent
        },
    )?;
    if opts.mode == EiMode::Sampled {
        return Ok(Certificate {
            property: Property::EntropicIndependence,
            ..tangent
        });
    }
    let n = mu.ground_size();
    let k = mu.arity();
    let p = mu.marginals().0;
    let mut mesh: Vec<Vec<f64>> = Vec::new();
    if k > 0 {
        for &m in mu.masks() {
            let mut q = vec![0.0; n];
            for i in indices_from_mask(m) {
                q[i] = 1.0 / k as f64;
            }
            mesh.push(q);
        }
        let splitter = SeedSplitter::new(opts.seed);
        for t in 0..opts.mesh {
            let mut rng = splitter.stream(t as u64 + 1);
            let w = random_simplex(mu.len(), &mut rng);
            let mut q = vec![0.0; n];
            for (&m, wi) in mu.masks().iter().zip(&w) {
                for i in indices_from_mask(m) {
                    q[i] += wi / k as f64;
                }
            }
            mesh.push(q);
        }
    }
    let scale = alpha * k as f64;
    let results: Vec<Result<(f64, f64, f64)>> = mesh
        .par_iter()
        .map(|q| {
            let required = scale * kl(q, &p);
            let sol = min_entropy_dual(mu, q, 1e-10)?;
            Ok((sol.value - required, sol.value, required))
        })
        .collect();
    let mut worst: Option<(f64, usize, f64, f64)> = None;
    for (i, r) in results.into_iter().enumerate() {
        let (slack, value, required) = r?;
        if worst.is_none_or(|w| slack < w.0) {
            worst = Some((slack, i, value, required));
        }
    }
    let dual_margin = worst.map_or(0.0, |w| w.0);
    let dual_falsified = dual_margin < -1e-9;
    let margin = dual_margin.min(tangent.margin);
    let witness = if dual_falsified {
        let (_, i, value, required) = worst.expect("nonempty mesh");
        Some(Witness::Marginal {
            q: mesh[i].clone(),
            dual_value: value,
            required,
        })
    } else {
        tangent.witness.clone()
    };
    let falsified = dual_falsified || tangent.is_falsified();
    Ok(Certificate {
        property: Property::EntropicIndependence,
        parameter: Parameter::Scalar(alpha),
        verdict: if falsified { Verdict::Falsified } else { Verdict::CertifiedExact },
        margin,
        witness,
        samples: mesh.len() + tangent.samples,
        seed: Some(opts.seed),
    })
}

/// Repeats [`entropic_independence_certify`] on `μ` and every link `μ_T`
/// with `|T| ≤ k − 2`, merging by worst margin.
pub fn entropic_independence_all_links(mu: &SubsetDensity, alpha: f64, opts: &EiOptions) -> Result<Certificate> {
    let k = mu.arity();
    let mut links: Vec<u64> = Vec::new();
    for size in 0..k.saturating_sub(1) {
        let mut level: Vec<u64> = mu.masks().iter().flat_map(|&m| sub_subsets(m, size)).collect();
        level.sort_unstable();
        level.dedup();
        links.extend(level);
    }
    let certs: Vec<Result<(u64, Certificate)>> = links
        .par_iter()
        .map(|&t| {
            let t_idx = indices_from_mask(t);
            let link = mu.condition_on(&t_idx)?;
            Ok((t, entropic_independence_certify(&link, alpha, opts)?))
        })
        .collect();
    let mut worst: Option<(u64, Certificate)> = None;
    let mut samples = 0;
    for c in certs {
        let (t, cert) = c?;
        samples += cert.samples;
        let replace = match &worst {
            None => true,
            Some((_, w)) => {
                (cert.is_falsified() && !w.is_falsified()) || (cert.is_falsified() == w.is_falsified() && cert.margin < w.margin)
            }
        };
        if replace {
            worst = Some((t, cert));
        }
    }
    let (t, cert) = worst.ok_or(Error::EmptySupport)?;
    let witness = cert.witness.map(|w| Witness::Link {
        t: indices_from_mask(t),
        inner: Box::new(w),
    });
    Ok(Certificate { witness, samples, ..cert })
}

/// Search settings for [`flc_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlcOptions {
    /// Random points, log-uniform on `[1e-2, 1e2]^n`.
    pub samples: usize,
    /// Random external fields `λ`, each checked at `1⃗` for `λ ∗ μ`.
    pub shifts: usize,
    /// Caller asserts `μ` belongs to a family with a structural proof.
    pub structural: bool,
    pub seed: u64,
}

impl Default for FlcOptions {
    fn default() -> Self {
        Self {
            samples: 200,
            shifts: 0,
            structural: false,
            seed: 0,
        }
    }
}

/// Hessian (up to the congruence `diag(1/z)`) of `z ↦ log g_μ(z^α)` at
/// `z = e^y`: `diag(α) Cov_π diag(α) − diag(α ∘ P_π)` with
/// `π ∝ μ_S e^{⟨α∘y, 1_S⟩}`.
pub fn flc_hessian(mu: &SubsetDensity, alphas: &[f64], y: &[f64]) -> Result<DMatrix<f64>> {
    let n = mu.ground_size();
    let ay: Vec<f64> = alphas.iter().zip(y).map(|(a, b)| a * b).collect();
    let tilted = mu.reweight_log(&ay)?;
    let (first, second) = tilted.pair_moments();
    let positive: Vec<f64> = first.iter().copied().filter(|&v| v > 0.0).collect();
    let hi = positive.iter().cloned().fold(0.0, f64::max);
    let lo = positive.iter().cloned().fold(f64::INFINITY, f64::min);
    if hi / lo > 1e12 {
        return Err(Error::NumericalBreakdown(hi / lo));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let cov = second[i][j] - first[i] * first[j];
        let diag = if i == j { alphas[i] * first[i] } else { 0.0 };
        alphas[i] * alphas[j] * cov - diag
    }))
}

/// Samples Hessians of `log g_μ(z^α)` and reports the largest eigenvalue.
pub fn flc_check(mu: &SubsetDensity, alpha: &AlphaVector, points: &[Vec<f64>], opts: &FlcOptions) -> Result<Certificate> {
    let n = mu.ground_size();
    let alphas = alpha.expand(n);
    if alphas.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: alphas.len(),
        });
    }
    let mut ys: Vec<Vec<f64>> = vec![vec![0.0; n]];
    for z in points {
        if z.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: z.len(),
            });
        }
        if let Some((index, &value)) = z.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NegativeCoordinate { index, value });
        }
        ys.push(z.iter().map(|v| v.ln()).collect());
    }
    let splitter = SeedSplitter::new(opts.seed);
    let mut rng = splitter.stream(0);
    for _ in 0..opts.samples {
        ys.push((0..n).map(|_| rng.random_range(-2.0..2.0) * std::f64::consts::LN_10).collect());
    }
    // a field λ at 1⃗ is the point z = λ^{1/α}
    let mut rng = splitter.stream(1);
    for _ in 0..opts.shifts {
        ys.push((0..n).map(|i| rng.random_range(-2.0..2.0) / alphas[i]).collect());
    }
    let results: Vec<Result<(f64, Vec<f64>)>> = ys
        .par_iter()
        .map(|y| {
            let h = flc_hessian(mu, &alphas, y)?;
            let eig = nalgebra::SymmetricEigen::new(h);
            let (idx, &top) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("nonempty");
            Ok((top, eig.eigenvectors.column(idx).iter().copied().collect()))
        })
        .collect();
    let mut worst = (f64::NEG_INFINITY, 0usize, Vec::new());
    for (i, r) in results.into_iter().enumerate() {
        let (top, v) = r?;
        if top > worst.0 {
            worst = (top, i, v);
        }
    }
    let falsified = worst.0 > 1e-8;
    let parameter = match alpha {
        AlphaVector::Uniform(a) => Parameter::Scalar(*a),
        AlphaVector::PerElement(v) => Parameter::Vector(v.clone()),
    };
    Ok(Certificate {
        property: Property::Flc,
        parameter,
        verdict: if falsified {
            Verdict::Falsified
        } else if opts.structural {
            Verdict::CertifiedExact
        } else {
            Verdict::EvidenceSampled
        },
        margin: -worst.0,
        witness: falsified.then(|| Witness::Direction {
            z: ys[worst.1].iter().map(|v| v.exp()).collect(),
            direction: worst.2.clone(),
            curvature: worst.0,
        }),
        samples: ys.len(),
        seed: Some(opts.seed),
    })
}

/// Closed-form Hessian of `log g(z^α)` at `1⃗`:
/// `H_ii = α_i(α_i−1)P[i] − α_i²P[i]²`, `H_ij = α_iα_j(P[i∧j] − P[i]P[j])`.
pub fn hessian_at_ones(mu_hom: &SubsetDensity, alphas: &[f64]) -> Result<DMatrix<f64>> {
    let n = mu_hom.ground_size();
    if alphas.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: alphas.len(),
        });
    }
    let (first, second) = mu_hom.pair_moments();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            alphas[i] * (alphas[i] - 1.0) * first[i] - alphas[i] * alphas[i] * first[i] * first[i]
        } else {
            alphas[i] * alphas[j] * (second[i][j] - first[i] * first[j])
        }
    }))
}

/// Pairwise influence and correlation matrices of a set distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceBundle {
    /// `Ψ(i,j) = P[j|i] − P[j|ī]`, zero diagonal.
    pub psi: Vec<Vec<f64>>,
    /// `Ψ̃(i,i) = 1 − P[i]`, `Ψ̃(i,j) = P[j|i] − P[j]`.
    pub corr: Vec<Vec<f64>>,
    /// Largest eigenvalue of `Ψ̃`.
    pub eigen_max: f64,
    /// Elements with `P[i] ∈ {0, 1}`, whose rows are set to zero.
    pub degenerate: Vec<usize>,
}

pub fn influence_bundle(mu: &SubsetDensity) -> InfluenceBundle {
    let n = mu.ground_size();
    let (p, pp) = mu.pair_moments();
    let tiny = 1e-15;
    let mut psi = vec![vec![0.0; n]; n];
    let mut corr = vec![vec![0.0; n]; n];
    let mut degenerate = Vec::new();
    for i in 0..n {
        let has_in = p[i] > tiny;
        let has_out = p[i] < 1.0 - tiny;
        if !(has_in && has_out) {
            degenerate.push(i);
        }
        if has_in {
            for j in 0..n {
                corr[i][j] = if i == j { 1.0 - p[i] } else { pp[i][j] / p[i] - p[j] };
            }
        }
        if has_in && has_out {
            for j in 0..n {
                if j != i {
                    psi[i][j] = pp[i][j] / p[i] - (p[j] - pp[i][j]) / (1.0 - p[i]);
                }
            }
        }
    }
    // Ψ̃ = D⁻¹C is similar to D^{-1/2} C D^{-1/2} on the elements with P[i] > 0
    let live: Vec<usize> = (0..n).filter(|&i| p[i] > tiny).collect();
    let sym = DMatrix::from_fn(live.len(), live.len(), |a, b| {
        let (i, j) = (live[a], live[b]);
        (pp[i][j] - p[i] * p[j]) / (p[i] * p[j]).sqrt()
    });
    let eigen_max = if live.is_empty() { 0.0 } else { max_eigenvalue(&sym) };
    InfluenceBundle {
        psi,
        corr,
        eigen_max,
        degenerate,
    }
}

/// `Ψ(i,j) = P[X_j=+1 | X_i=+1] − P[X_j=+1 | X_i=−1]` for a spin law.
pub fn spin_influence_matrix(spin: &SpinDensity) -> Vec<Vec<f64>> {
    let n = spin.spins();
    let probs = spin.probabilities();
    let mut p1 = vec![0.0; n];
    let mut p11 = vec![vec![0.0; n]; n];
    for (x, &w) in probs.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for i in 0..n {
            if x >> i & 1 == 1 {
                p1[i] += w;
                for j in 0..n {
                    if x >> j & 1 == 1 {
                        p11[i][j] += w;
                    }
                }
            }
        }
    }
    let mut psi = vec![vec![0.0; n]; n];
    for i in 0..n {
        if p1[i] <= 0.0 || p1[i] >= 1.0 {
            continue;
        }
        for j in 0..n {
            if j != i {
                psi[i][j] = p11[i][j] / p1[i] - (p1[j] - p11[i][j]) / (1.0 - p1[i]);
            }
        }
    }
    psi
}

/// Certifies `λ_max(Ψ̃) ≤ eta` from the exact correlation matrix.
pub fn spectral_independence_certify(mu: &SubsetDensity, eta: f64) -> Certificate {
    let bundle = influence_bundle(mu);
    let margin = eta - bundle.eigen_max;
    let falsified = margin < -1e-12;
    Certificate {
        property: Property::SpectralIndependence,
        parameter: Parameter::Scalar(eta),
        verdict: if falsified { Verdict::Falsified } else { Verdict::CertifiedExact },
        margin,
        witness: falsified.then_some(Witness::Coordinate {
            index: 0,
            value: bundle.eigen_max,
        }),
        samples: 1,
        seed: None,
    }
}

/// Law of the other spins given `X_i = value`, on `n − 1` spins.
pub fn pin_spin(spin: &SpinDensity, i: usize, value: i8) -> Result<SpinDensity> {
    let n = spin.spins();
    if i >= n || n < 2 {
        return Err(Error::InvalidArgument(format!("cannot pin spin {i} of {n}")));
    }
    let want = (value > 0) as usize;
    let low = (1usize << i) - 1;
    let mut out = vec![0.0; 1 << (n - 1)];
    for (x, &w) in spin.weights().iter().enumerate() {
        if x >> i & 1 == want {
            out[(x & low) | ((x >> (i + 1)) << i)] = w;
        }
    }
    SpinDensity::from_weights(n - 1, out).map_err(|e| match e {
        Error::EmptySupport => Error::ZeroMassCondition,
        other => other,
    })
}

/// `R_ij = max |μ(X_i=+|σ) − μ(X_i=+|σ^j)|` over configurations of the
/// other spins differing only at `j`.
pub fn dobrushin_matrix(spin: &SpinDensity) -> Result<DMatrix<f64>> {
    let n = spin.spins();
    if n > 20 {
        return Err(Error::StateSpaceTooLarge {
            states: 1 << n,
            cap: 1 << 20,
        });
    }
    let w = spin.weights();
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        let bit = 1usize << i;
        // conditional P(X_i = + | rest) indexed by the full mask with bit i clear
        let cond = |x: usize| -> Option<f64> {
            let plus = w[x | bit];
            let minus = w[x & !bit];
            let z = plus + minus;
            (z > 0.0).then(|| plus / z)
        };
        for j in 0..n {
            if j == i {
                continue;
            }
            let jb = 1usize << j;
            let mut best = 0.0f64;
            for x in 0..1usize << n {
                if x & bit != 0 || x & jb != 0 {
                    continue;
                }
                if let (Some(a), Some(b)) = (cond(x), cond(x | jb)) {
                    best = best.max((a - b).abs());
                }
            }
            r[(i, j)] = best;
        }
    }
    Ok(r)
}

/// Largest `ε` with `Σ_j R_ij w_j ≤ (1 − ε) w_i` for all `i`; certified iff
/// `ε ≥ target_eps`.
pub fn weighted_contraction_check(r: &DMatrix<f64>, w: &[f64], target_eps: f64) -> Result<Certificate> {
    let n = w.len();
    if r.nrows() != n || r.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: r.nrows(),
        });
    }
    if let Some((index, &value)) = w.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonpositiveField { index, value });
    }
    let mut eps = 1.0f64;
    let mut row = 0;
    for i in 0..n {
        let s: f64 = (0..n).map(|j| r[(i, j)] * w[j]).sum();
        let e = 1.0 - s / w[i];
        if e < eps {
            eps = e;
            row = i;
        }
    }
    let certified = eps >= target_eps - 1e-15;
    Ok(Certificate {
        property: Property::DobrushinContraction,
        parameter: Parameter::Scalar(target_eps),
        verdict: if certified { Verdict::CertifiedExact } else { Verdict::Falsified },
        margin: eps - target_eps,
        witness: (!certified).then_some(Witness::Coordinate { index: row, value: eps }),
        samples: n,
        seed: None,
    })
}

/// Both sides of the weighted marginal transfer inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub lhs: f64,
    pub rhs: f64,
    pub contraction_eps: f64,
    pub holds: bool,
}

/// `Σ w_i |P_μ[X_i=1] − P_ν[X_i=1]| ≤ (n/ε) E_{σ∼ν} Σ w_i |P_μ(σ→σⁱ) − P_ν(σ→σⁱ)|`,
/// after certifying the Dobrushin contraction of `μ` against `w` at `ε`.
pub fn marginal_transfer_check(
    mu: &SpinDensity,
    nu: &SpinDensity,
    kernel_mu: &TransitionKernel,
    kernel_nu: &TransitionKernel,
    w: &[f64],
    eps: f64,
) -> Result<TransferReport> {
    let n = mu.spins();
    if nu.spins() != n || w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: w.len(),
        });
    }
    let states = 1usize << n;
    for k in [kernel_mu, kernel_nu] {
        if k.nrows() != states || k.ncols() != states {
            return Err(Error::DimensionMismatch {
                expected: states,
                found: k.nrows(),
            });
        }
    }
    let cert = weighted_contraction_check(&dobrushin_matrix(mu)?, w, eps)?;
    if cert.is_falsified() || !(eps > 0.0) {
        return Err(Error::ContractionNotCertified);
    }
    let pm = mu.probabilities();
    let pn = nu.probabilities();
    let mm = crate::ising::spin_marginals(n, &pm);
    let mn = crate::ising::spin_marginals(n, &pn);
    let lhs: f64 = (0..n).map(|i| w[i] * (mm[i] - mn[i]).abs()).sum();
    let mut expectation = 0.0;
    for (x, &p) in pn.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let inner: f64 = (0..n)
            .map(|i| {
                let y = x ^ (1 << i);
                w[i] * (kernel_mu.get(x, y) - kernel_nu.get(x, y)).abs()
            })
            .sum();
        expectation += p * inner;
    }
    let rhs = n as f64 / eps * expectation;
    Ok(TransferReport {
        lhs,
        rhs,
        contraction_eps: cert.margin + eps,
        holds: lhs <= rhs + 1e-10,
    })
}

/// `MarginalVector` for `q` checks against `p`.
pub fn marginal_kl(q: &MarginalVector, p: &MarginalVector) -> f64 {
    kl(q.as_slice(), p.as_slice())
}

/// Eigenvalues of a general real matrix, as `(re, im)` pairs.
pub fn general_eigenvalues(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    m.complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect()
}

/// Real spectrum of the symmetric part (debug helper for influence checks).
pub fn symmetric_spectrum(m: &DMatrix<f64>) -> Vec<f64> {
    sym_eigenvalues(&((m + m.transpose()) * 0.5))
}
