//! Ising models `μ_{J,h}(x) ∝ exp(½⟨x,Jx⟩ + ⟨h,x⟩)` on `{±1}^n`, the rank-one
//! specialization, and the checks built on them.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::certify::{hessian_at_ones, spin_influence_matrix, Certificate, Parameter, Property, Verdict, Witness};
use crate::divergence::kl;
use crate::error::{Error, Result};
use crate::kernel::glauber_kernel;
use crate::linalg::{max_eigenvalue, sym_eigenvalues, sym_op_norm};
use crate::rng::SeedSplitter;
use crate::subset::{homogenize, SpinDensity};

/// Largest spin count for which the full `2^n` table is enumerated.
pub const ENUM_SPINS: usize = 26;

#[derive(Clone, Debug, PartialEq)]
enum Coupling {
    Dense(DMatrix<f64>),
    RankOne(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsingModel {
    n: usize,
    coupling: Coupling,
    field: Vec<f64>,
    op_norm: f64,
}

impl IsingModel {
    /// General model; `J` must be symmetric to `1e-12`.
    pub fn new(j: Vec<Vec<f64>>, h: Vec<f64>) -> Result<Self> {
        let n = h.len();
        if j.len() != n || j.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: j.len(),
            });
        }
        let m = DMatrix::from_fn(n, n, |r, c| j[r][c]);
        Self::from_matrix(m, h)
    }

    pub fn from_matrix(j: DMatrix<f64>, h: Vec<f64>) -> Result<Self> {
        let n = h.len();
        if j.nrows() != n || j.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: j.nrows(),
            });
        }
        let asym = (&j - j.transpose()).abs().max();
        if asym > 1e-12 || !j.iter().all(|v| v.is_finite()) {
            return Err(Error::AsymmetricMatrix(asym));
        }
        let j = (&j + j.transpose()) * 0.5;
        let op_norm = sym_op_norm(&j);
        Ok(Self {
            n,
            coupling: Coupling::Dense(j),
            field: h,
            op_norm,
        })
    }

    /// `J = uuᵀ`, `h = v`; never materializes `J`.
    pub fn rank_one(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                found: v.len(),
            });
        }
        let op_norm = u.iter().map(|x| x * x).sum();
        Ok(Self {
            n: u.len(),
            coupling: Coupling::RankOne(u),
            field: v,
            op_norm,
        })
    }

    /// Curie-Weiss with `J = ((1−δ)/n)·11ᵀ` and zero field, `δ ∈ (0, 1]`.
    pub fn curie_weiss(n: usize, delta: f64) -> Result<Self> {
        Self::curie_weiss_with_field(n, delta, vec![0.0; n])
    }

    pub fn curie_weiss_with_field(n: usize, delta: f64, h: Vec<f64>) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, 1], got {delta}")));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        let c = ((1.0 - delta) / n as f64).sqrt();
        Self::rank_one(vec![c; n], h)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    /// `u` when the model was built in rank-one form.
    pub fn rank_one_vector(&self) -> Option<&[f64]> {
        match &self.coupling {
            Coupling::RankOne(u) => Some(u),
            Coupling::Dense(_) => None,
        }
    }

    /// `‖J‖_OP = max |λ(J)|`.
    pub fn op_norm(&self) -> f64 {
        self.op_norm
    }

    #[inline]
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        match &self.coupling {
            Coupling::Dense(m) => m[(i, j)],
            Coupling::RankOne(u) => u[i] * u[j],
        }
    }

    /// Dense `J`; builds `uuᵀ` for rank-one models.
    pub fn interaction(&self) -> DMatrix<f64> {
        match &self.coupling {
            Coupling::Dense(m) => m.clone(),
            Coupling::RankOne(u) => DMatrix::from_fn(self.n, self.n, |r, c| u[r] * u[c]),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        sym_eigenvalues(&self.interaction()).last().copied().unwrap_or(0.0)
    }

    /// `Σ_{j≠i} J_ij x_j + h_i` for the spin configuration encoded by `x`.
    pub fn local_field(&self, i: usize, x: u64) -> f64 {
        let mut acc = self.field[i];
        match &self.coupling {
            Coupling::Dense(m) => {
                for j in 0..self.n {
                    if j != i {
                        acc += m[(i, j)] * spin(x, j);
                    }
                }
            }
            Coupling::RankOne(u) => {
                let dot: f64 = (0..self.n).filter(|&j| j != i).map(|j| u[j] * spin(x, j)).sum();
                acc += u[i] * dot;
            }
        }
        acc
    }

    /// Unnormalized log-weight `½⟨x,Jx⟩ + ⟨h,x⟩`.
    pub fn log_weight(&self, x: u64) -> f64 {
        let s: Vec<f64> = (0..self.n).map(|i| spin(x, i)).collect();
        let lin: f64 = s.iter().zip(&self.field).map(|(a, b)| a * b).sum();
        let quad = match &self.coupling {
            Coupling::Dense(m) => {
                let v = nalgebra::DVector::from_vec(s.clone());
                0.5 * v.dot(&(m * &v))
            }
            Coupling::RankOne(u) => {
                let d: f64 = u.iter().zip(&s).map(|(a, b)| a * b).sum();
                0.5 * d * d
            }
        };
        quad + lin
    }

    /// Log-weights of all `2^n` states indexed by spin mask, filled along a
    /// Gray code so each state costs `O(n)`.
    pub fn log_weights(&self) -> Result<Vec<f64>> {
        if self.n > ENUM_SPINS {
            return Err(Error::StateSpaceTooLarge {
                states: 1usize << self.n.min(62),
                cap: 1 << ENUM_SPINS,
            });
        }
        let total = 1usize << self.n;
        let mut out = vec![0.0; total];
        let mut x = 0u64;
        let mut lw = self.log_weight(0);
        out[0] = lw;
        for step in 1..total {
            let i = step.trailing_zeros() as usize;
            // flipping x_i changes the log-weight by −2 x_i · local field
            lw -= 2.0 * spin(x, i) * self.local_field(i, x);
            x ^= 1 << i;
            out[x as usize] = lw;
        }
        Ok(out)
    }

    pub fn spin_density(&self) -> Result<SpinDensity> {
        SpinDensity::from_log_weights(self.n, &self.log_weights()?)
    }

    /// `J − λ_min(J)·I`: same measure, positive semidefinite interaction.
    pub fn psd_shift(&self) -> Result<IsingModel> {
        if self.rank_one_vector().is_some() && self.n >= 2 {
            return Ok(self.clone());
        }
        let j = self.interaction();
        let shift = self.min_eigenvalue();
        let shifted = j - DMatrix::identity(self.n, self.n) * shift;
        IsingModel::from_matrix(shifted, self.field.clone())
    }

    pub fn with_field(&self, h: Vec<f64>) -> Result<IsingModel> {
        if h.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: h.len(),
            });
        }
        let mut out = self.clone();
        out.field = h;
        Ok(out)
    }

    pub fn to_file(&self) -> IsingFile {
        let coupling = match &self.coupling {
            Coupling::Dense(m) => CouplingSpec::Dense((0..self.n).map(|r| m.row(r).iter().copied().collect()).collect()),
            Coupling::RankOne(u) => CouplingSpec::RankOne { u: u.clone() },
        };
        IsingFile {
            n: self.n,
            coupling,
            h: self.field.clone(),
        }
    }

    pub fn from_file(file: &IsingFile) -> Result<Self> {
        if file.h.len() != file.n {
            return Err(Error::DimensionMismatch {
                expected: file.n,
                found: file.h.len(),
            });
        }
        match &file.coupling {
            CouplingSpec::Dense(j) => Self::new(j.clone(), file.h.clone()),
            CouplingSpec::RankOne { u } => Self::rank_one(u.clone(), file.h.clone()),
        }
    }
}

#[inline]
pub(crate) fn spin(x: u64, i: usize) -> f64 {
    if x >> i & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// On-disk Ising model: `{"n": .., "J": [[..]] | {"u": [..]}, "h": [..]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingFile {
    pub n: usize,
    #[serde(rename = "J")]
    pub coupling: CouplingSpec,
    pub h: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CouplingSpec {
    Dense(Vec<Vec<f64>>),
    RankOne { u: Vec<f64> },
}

/// `α_i = 1 − ‖u_{−i}‖²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaProfile {
    pub alphas: Vec<f64>,
    pub norm_u_sq: f64,
}

pub fn alpha_profile(u: &[f64]) -> AlphaProfile {
    let norm_u_sq: f64 = u.iter().map(|x| x * x).sum();
    AlphaProfile {
        alphas: u.iter().map(|x| 1.0 - (norm_u_sq - x * x)).collect(),
        norm_u_sq,
    }
}

/// Per-coordinate marginals `P[X_i = +1]`.
pub(crate) fn spin_marginals(n: usize, probs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (x, &p) in probs.iter().enumerate() {
        for (i, o) in out.iter_mut().enumerate() {
            if x >> i & 1 == 1 {
                *o += p;
            }
        }
    }
    out
}

/// Law of `X_{−i}` indexed by the remaining `n−1` bits packed low.
pub(crate) fn drop_coordinate(probs: &[f64], i: usize) -> Vec<f64> {
    let mut out = vec![0.0; probs.len() / 2];
    let low = (1usize << i) - 1;
    for (x, &p) in probs.iter().enumerate() {
        let y = (x & low) | ((x >> (i + 1)) << i);
        out[y] += p;
    }
    out
}

/// `KL(νD‖μD)` for `D = D_{n→n−1}` on the homogenized space, computed as
/// `(1/n) Σ_i KL(ν_{−i}‖μ_{−i})`.
pub fn hom_down_kl(n: usize, nu: &[f64], mu: &[f64]) -> f64 {
    (0..n).map(|i| kl(&drop_coordinate(nu, i), &drop_coordinate(mu, i))).sum::<f64>() / n as f64
}

fn bernoulli_kl(q: f64, p: f64) -> f64 {
    kl(&[q, 1.0 - q], &[p, 1.0 - p])
}

/// Random probability vector from a flat Dirichlet.
pub(crate) fn random_simplex<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Worst-case margins of the rank-one contraction chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOneContractionReport {
    pub n: usize,
    pub norm_u_sq: f64,
    pub factor_bound: f64,
    /// Largest measured `KL(νD‖μD)/KL(ν‖μ)`.
    pub max_ratio: f64,
    /// `min (bound·KL(ν‖μ) − KL(νD‖μD))`.
    pub contraction_margin: f64,
    /// `min (KL(νD‖μD) − KL(νP‖μ))`.
    pub data_processing_margin: f64,
    /// `min (KL(ν‖μ) − Σ α_i KL(ν_i‖μ_i))`.
    pub coordinate_margin: f64,
    pub trials: usize,
    pub holds: bool,
}

/// Draws `trials` measures `ν` and checks, exactly on `2^n` states,
/// `KL(νP‖μ) ≤ KL(νD‖μD) ≤ (1 − (1−‖u‖²)/n) KL(ν‖μ)` and
/// `Σ α_i KL(ν_i‖μ_i) ≤ KL(ν‖μ)`.
pub fn rank_one_contraction_check(u: &[f64], h: &[f64], trials: usize, seed: u64) -> Result<RankOneContractionReport> {
    let n = u.len();
    if n < 2 {
        return Err(Error::InvalidArgument("rank-one contraction needs n >= 2".into()));
    }
    let profile = alpha_profile(u);
    if profile.norm_u_sq >= 1.0 {
        return Err(Error::NormTooLarge(profile.norm_u_sq.sqrt()));
    }
    let model = IsingModel::rank_one(u.to_vec(), h.to_vec())?;
    let mu = model.spin_density()?.probabilities();
    let kernel = glauber_kernel(&model)?;
    let factor = 1.0 - (1.0 - profile.norm_u_sq) / n as f64;
    let mu_marg = spin_marginals(n, &mu);
    let splitter = SeedSplitter::new(seed);

    let mut report = RankOneContractionReport {
        n,
        norm_u_sq: profile.norm_u_sq,
        factor_bound: factor,
        max_ratio: 0.0,
        contraction_margin: f64::INFINITY,
        data_processing_margin: f64::INFINITY,
        coordinate_margin: f64::INFINITY,
        trials,
        holds: true,
    };
    for t in 0..trials {
        let mut rng = splitter.stream(t as u64);
        let nu = trial_measure(&mu, t, &mut rng);
        let full = kl(&nu, &mu);
        let down = hom_down_kl(n, &nu, &mu);
        let stepped = kl(&kernel.left_apply(&nu), &mu);
        let nu_marg = spin_marginals(n, &nu);
        let coord: f64 = (0..n).map(|i| profile.alphas[i] * bernoulli_kl(nu_marg[i], mu_marg[i])).sum();
        report.contraction_margin = report.contraction_margin.min(factor * full - down);
        report.data_processing_margin = report.data_processing_margin.min(down - stepped);
        report.coordinate_margin = report.coordinate_margin.min(full - coord);
        if full >= 1e-9 {
            report.max_ratio = report.max_ratio.max(down / full);
        }
    }
    report.holds = report.contraction_margin >= -1e-10 && report.data_processing_margin >= -1e-10 && report.coordinate_margin >= -1e-10;
    Ok(report)
}

/// Trial measures: flat Dirichlet, point masses, and `μ`-tilted mixtures so
/// both far and near regimes are covered.
fn trial_measure<R: Rng + ?Sized>(mu: &[f64], t: usize, rng: &mut R) -> Vec<f64> {
    match t % 4 {
        0 | 1 => random_simplex(mu.len(), rng),
        2 => {
            let mut v = vec![0.0; mu.len()];
            v[rng.random_range(0..mu.len())] = 1.0;
            v
        }
        _ => {
            let tilt: Vec<f64> = mu
                .iter()
                .map(|&m| {
                    let g: f64 = StandardNormal.sample(rng);
                    m * (0.5 * g).exp()
                })
                .collect();
            let s: f64 = tilt.iter().sum();
            tilt.into_iter().map(|v| v / s).collect()
        }
    }
}

/// Which `(σ, τ)` pairs an exchange sweep visits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ExchangePairs {
    All,
    Random { count: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExchangeReport {
    pub checked: u64,
    pub max_log_ratio: f64,
    pub log_bound: f64,
    /// `(σ, τ, i)` attaining the largest ratio, as spin masks.
    pub worst: Option<(u64, u64, usize)>,
    pub holds: bool,
}

/// `log[μ(σ)μ(τ) / (μ(σ')μ(τ'))]` where `σ'`, `τ'` swap coordinate `i`.
/// The field and normalizer cancel, leaving
/// `(σ_i − τ_i) Σ_{j≠i} J_ij (σ_j − τ_j)`.
pub fn exchange_log_ratio(model: &IsingModel, sigma: u64, tau: u64, i: usize) -> f64 {
    let si = spin(sigma, i);
    let ti = spin(tau, i);
    if si == ti {
        return 0.0;
    }
    let mut acc = 0.0;
    let diff = sigma ^ tau;
    for j in 0..model.n() {
        if j != i && diff >> j & 1 == 1 {
            acc += model.coupling(i, j) * (spin(sigma, j) - spin(tau, j));
        }
    }
    (si - ti) * acc
}

/// Sweeps `(σ, τ, i)` with `σ_i ≠ τ_i` and compares every exchange ratio
/// against `exp(4√n·‖J‖_OP)` in log space.
pub fn exchange_check(model: &IsingModel, pairs: ExchangePairs) -> Result<ExchangeReport> {
    let n = model.n();
    let log_bound = 4.0 * (n as f64).sqrt() * model.op_norm();
    let mut best = (f64::NEG_INFINITY, None);
    let mut checked = 0u64;
    let mut visit = |s: u64, t: u64, best: &mut (f64, Option<(u64, u64, usize)>)| {
        let diff = s ^ t;
        for i in 0..n {
            if diff >> i & 1 == 1 {
                checked += 1;
                let r = exchange_log_ratio(model, s, t, i);
                if r > best.0 {
                    *best = (r, Some((s, t, i)));
                }
            }
        }
    };
    match pairs {
        ExchangePairs::All => {
            if n > 16 {
                return Err(Error::StateSpaceTooLarge {
                    states: 1 << n.min(62),
                    cap: 1 << 16,
                });
            }
            for s in 0..1u64 << n {
                for t in 0..1u64 << n {
                    visit(s, t, &mut best);
                }
            }
        }
        ExchangePairs::Random { count, seed } => {
            let mut rng = SeedSplitter::new(seed).stream(0);
            let mask = crate::combinatorics::full_mask(n);
            for _ in 0..count {
                let s = rng.random::<u64>() & mask;
                let t = rng.random::<u64>() & mask;
                visit(s, t, &mut best);
            }
        }
    }
    let max_log_ratio = if checked == 0 { 0.0 } else { best.0 };
    Ok(ExchangeReport {
        checked,
        max_log_ratio,
        log_bound,
        worst: best.1,
        holds: max_log_ratio <= log_bound + 1e-10,
    })
}

/// `max_x (δ_start Pᵗ)(x)/μ(x)` for `t = 0..=steps` under exact Glauber
/// dynamics.
pub fn warm_start_probe(model: &IsingModel, start: u64, steps: usize) -> Result<Vec<f64>> {
    let kernel = glauber_kernel(model)?;
    let mu = kernel.stationary().expect("Glauber kernels carry μ").to_vec();
    let states = mu.len();
    if start as usize >= states {
        return Err(Error::InvalidStart);
    }
    let mut p = vec![0.0; states];
    p[start as usize] = 1.0;
    let mut out = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        out.push(p.iter().zip(&mu).map(|(a, b)| a / b).fold(0.0, f64::max));
        if t < steps {
            p = kernel.left_apply(&p);
        }
    }
    Ok(out)
}

/// Runs the rank-one fractional log-concavity chain for `shifts` random
/// field shifts: Hessian at `1⃗` of the homogenized measure under the
/// α-profile, and the influence-row inequality
/// `Σ_{j≠i} |Ψ(i,j)| |u_j| ≤ α_i⁻¹ |u_i| ‖u_{−i}‖²`.
pub fn rank_one_flc_certify(u: &[f64], h: &[f64], shifts: usize, seed: u64) -> Result<Certificate> {
    let norm: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1.0 {
        return Err(Error::NormTooLarge(norm));
    }
    rank_one_flc_probe(u, h, shifts, seed)
}

/// [`rank_one_flc_certify`] without the norm precondition.
pub fn rank_one_flc_probe(u: &[f64], h: &[f64], shifts: usize, seed: u64) -> Result<Certificate> {
    let n = u.len();
    if h.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: h.len(),
        });
    }
    let profile = alpha_profile(u);
    let parameter = Parameter::Vector(profile.alphas.clone());
    if let Some(i) = profile.alphas.iter().position(|&a| !(a > 0.0)) {
        return Ok(Certificate {
            property: Property::Flc,
            parameter,
            verdict: Verdict::Falsified,
            margin: profile.alphas[i],
            witness: Some(Witness::Coordinate {
                index: i,
                value: profile.alphas[i],
            }),
            samples: 0,
            seed: Some(seed),
        });
    }
    let alphas2: Vec<f64> = profile.alphas.iter().chain(&profile.alphas).copied().collect();
    let splitter = SeedSplitter::new(seed);
    let mut worst_hess = f64::NEG_INFINITY;
    let mut worst_ineq = f64::INFINITY;
    let mut witness = None;
    for s in 0..=shifts {
        // shift 0 is the unshifted field
        let field: Vec<f64> = if s == 0 {
            h.to_vec()
        } else {
            let mut rng = splitter.stream(s as u64);
            h.iter().map(|&hi| hi + rng.random_range(-3.0..3.0)).collect()
        };
        let model = IsingModel::rank_one(u.to_vec(), field.clone())?;
        let spin_mu = model.spin_density()?;
        let hom = homogenize(&spin_mu)?;
        let hess = hessian_at_ones(&hom, &alphas2)?;
        let top = max_eigenvalue(&hess);
        let psi = spin_influence_matrix(&spin_mu);
        let ineq = ineq_main_margins(u, &profile.alphas, &psi)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let bad = top > 1e-8 || ineq < -1e-10;
        if top > worst_hess {
            worst_hess = top;
        }
        if ineq < worst_ineq {
            worst_ineq = ineq;
        }
        if bad && witness.is_none() {
            witness = Some(Witness::Field {
                h: field,
                hessian_max: top,
                ineq_margin: ineq,
            });
        }
    }
    let falsified = witness.is_some();
    Ok(Certificate {
        property: Property::Flc,
        parameter,
        verdict: if falsified { Verdict::Falsified } else { Verdict::CertifiedExact },
        margin: (-worst_hess).min(worst_ineq),
        witness,
        samples: shifts + 1,
        seed: Some(seed),
    })
}

/// Per-row slack `α_i⁻¹ |u_i| ‖u_{−i}‖² − Σ_{j≠i} |Ψ(i,j)| |u_j|`.
pub fn ineq_main_margins(u: &[f64], alphas: &[f64], psi: &[Vec<f64>]) -> Vec<f64> {
    let norm_sq: f64 = u.iter().map(|x| x * x).sum();
    (0..u.len())
        .map(|i| {
            let rhs = u[i].abs() * (norm_sq - u[i] * u[i]) / alphas[i];
            let lhs: f64 = (0..u.len()).filter(|&j| j != i).map(|j| psi[i][j].abs() * u[j].abs()).sum();
            rhs - lhs
        })
        .collect()
}
