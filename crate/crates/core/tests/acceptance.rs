//! Acceptance suite: one PASS/FAIL line per criterion. Tolerances and
//! instance counts are pinned below; every check recomputes its reference
//! values independently of the library code path it is judging.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use entropywalks::certify::{min_entropy_dual, tangent_slack};
use entropywalks::combinatorics::{indices_from_mask, k_subsets};
use entropywalks::divergence::{
    contraction_coefficient, density_divergences, kappa_closed_form, kl, mixing_time_worst, mlsi_estimate, telescope_profile, tv,
    ContractionOptions, MlsiOptions, Projector,
};
use entropywalks::ising::{exchange_check, rank_one_contraction_check, rank_one_flc_certify, ExchangePairs};
use entropywalks::kernel::{down_up_kernel, glauber_kernel, Level};
use entropywalks::scaling::{scale_study, ScaleOptions};
use entropywalks::spectrum::spectrum_report;
use entropywalks::walk::{empirical_law, glauber_endpoints, GlauberSampler, SubsetWalker};
use entropywalks::{IsingModel, SeedSplitter, SpinDensity, SubsetDensity, TransitionKernel};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

const MASTER_SEED: u64 = 0x5eed_2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(stream: u64) -> ChaCha8Rng {
    SeedSplitter::new(MASTER_SEED).stream(stream)
}

fn simplex(len: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..len).map(|_| Exp1.sample(r)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn random_vector_with_norm(n: usize, norm: f64, r: &mut ChaCha8Rng) -> Vec<f64> {
    let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(r)).collect();
    let len = g.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
    g.into_iter().map(|x| x * norm / len).collect()
}

fn spin(x: usize, i: usize) -> f64 {
    if x >> i & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Normalized Ising law by direct enumeration of `½⟨x,Jx⟩ + ⟨h,x⟩`.
fn ising_law(j: &DMatrix<f64>, h: &[f64]) -> Vec<f64> {
    let n = h.len();
    let logw: Vec<f64> = (0..1usize << n)
        .map(|x| {
            let s = DVector::from_iterator(n, (0..n).map(|i| spin(x, i)));
            0.5 * s.dot(&(j * &s)) + s.iter().zip(h).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect();
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

/// Spin mask `x` to the homogenized set `{i : x_i = +} ∪ {n+i : x_i = −}`.
fn hom(x: usize, n: usize) -> u64 {
    let plus = x as u64;
    let minus = !plus & ((1u64 << n) - 1);
    plus | minus << n
}

fn hom_density(n: usize, probs: &[f64]) -> SubsetDensity {
    SubsetDensity::from_masks(n * 2, n, probs.iter().enumerate().map(|(x, &p)| (hom(x, n), p)).collect()).unwrap()
}

fn criterion_1() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut library_agrees = true;
    let mut r = rng(1);
    for n in 2..=5 {
        for inst in 0..50 {
            let norm_sq: f64 = r.random_range(0.0..0.9);
            let u = random_vector_with_norm(n, norm_sq.sqrt(), &mut r);
            let h: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
            let uu = DMatrix::from_fn(n, n, |a, b| u[a] * u[b]);
            let mu = ising_law(&uu, &h);
            let mu_hom = hom_density(n, &mu);
            let mu_down = mu_hom.down_project(n - 1).unwrap();
            let factor = 1.0 - (1.0 - norm_sq) / n as f64;
            for _ in 0..200 {
                let nu = simplex(1 << n, &mut r);
                let nu_hom = hom_density(n, &nu);
                let full = kl(&nu, &mu);
                let down = density_divergences(&nu_hom.down_project(n - 1).unwrap(), &mu_down).unwrap().kl;
                worst = worst.min(factor * full - down);
            }
            let report = rank_one_contraction_check(&u, &h, 200, MASTER_SEED ^ (n * 100 + inst) as u64).unwrap();
            library_agrees &= report.holds;
        }
    }
    outcome(
        worst >= -1e-10 && library_agrees,
        format!("min slack {worst:.3e} over 4x50x200 draws (tol -1e-10); library check holds: {library_agrees}"),
    )
}

fn criterion_2() -> Outcome {
    let mut r = rng(2);
    let pairs = [
        (2, 1),
        (3, 1),
        (3, 2),
        (4, 1),
        (4, 2),
        (4, 3),
        (5, 2),
        (5, 3),
        (5, 4),
        (6, 2),
        (6, 3),
        (6, 4),
        (6, 5),
        (7, 2),
        (7, 3),
        (7, 4),
        (7, 5),
        (8, 3),
        (8, 4),
        (8, 5),
    ];
    let mut worst = f64::INFINITY;
    let mut max_disagreement = 0.0f64;
    let mut evaluated = 0;
    for &(n, k) in &pairs {
        let base = SubsetDensity::uniform(n, k).unwrap();
        let lambda: Vec<f64> = (0..n).map(|_| 10f64.powf(r.random_range(-1.0..1.0))).collect();
        let shifted = base.external_field(&lambda).unwrap();
        for mu in [&base, &shifted] {
            let p = mu.marginals().0;
            for _ in 0..1000 {
                let z: Vec<f64> = (0..n).map(|_| 10f64.powf(r.random_range(-3.0..3.0))).collect();
                // reference: Σ_S μ(S) Π_{i∈S} z_i, computed directly
                let g: f64 = mu
                    .iter()
                    .map(|(m, _)| mu.prob(m) * indices_from_mask(m).iter().map(|&i| z[i]).product::<f64>())
                    .sum();
                let lin: f64 = p.iter().zip(&z).map(|(a, b)| a * b).sum();
                let slack = lin - g.powf(1.0 / k as f64);
                let lib = tangent_slack(mu, &p, 1.0, &z);
                max_disagreement = max_disagreement.max((slack - lib).abs() / lin);
                worst = worst.min(slack);
                evaluated += 1;
            }
        }
    }
    outcome(
        worst >= -1e-12 && max_disagreement < 1e-9,
        format!("min slack {worst:.3e} over {evaluated} points (tol -1e-12); library/reference relative gap {max_disagreement:.1e}"),
    )
}

/// Minimum of `KL(ν‖μ)` over `{ν ≥ 0 : ν D_{k→1} = q}` by a grid over the
/// null space of the marginal map followed by damped Newton steps.
fn primal_minimum(mu: &SubsetDensity, nu0: &[f64]) -> f64 {
    let n = mu.ground_size();
    let m = mu.len();
    let a = DMatrix::from_fn(n, m, |i, s| (mu.masks()[s] >> i & 1) as f64);
    // null space of the marginal map from the eigenvectors of AᵀA at zero
    let gram = SymmetricEigen::new(a.transpose() * &a);
    let scale = gram.eigenvalues.amax();
    let basis: Vec<DVector<f64>> = (0..m)
        .filter(|&c| gram.eigenvalues[c] < 1e-10 * scale)
        .map(|c| gram.eigenvectors.column(c).into_owned())
        .collect();
    let p: Vec<f64> = mu.probabilities();
    let objective = |nu: &[f64]| -> f64 {
        if nu.iter().any(|&v| v < 0.0) {
            return f64::INFINITY;
        }
        kl(nu, &p)
    };
    let point = |t: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|s| nu0[s] + basis.iter().zip(t).map(|(b, ti)| b[s] * ti).sum::<f64>())
            .collect()
    };
    let d = basis.len();
    let mut best_t = vec![0.0; d];
    let mut best = objective(nu0);
    if d > 0 {
        let steps = match d {
            1 => 400,
            2 => 120,
            _ => 40,
        };
        let total = (steps + 1usize).pow(d as u32);
        for idx in 0..total {
            let mut rem = idx;
            let t: Vec<f64> = (0..d)
                .map(|_| {
                    let c = rem % (steps + 1);
                    rem /= steps + 1;
                    -1.5 + 3.0 * c as f64 / steps as f64
                })
                .collect();
            let v = objective(&point(&t));
            if v < best {
                best = v;
                best_t = t;
            }
        }
        // polish: Newton on t with gradient Nᵀ(log(ν/p) + 1), Hessian Nᵀ diag(1/ν) N
        for _ in 0..100 {
            let nu = point(&best_t);
            if nu.iter().any(|&v| v <= 0.0) {
                break;
            }
            let grad = DVector::from_fn(d, |a, _| (0..m).map(|s| basis[a][s] * ((nu[s] / p[s]).ln() + 1.0)).sum::<f64>());
            let hess = DMatrix::from_fn(d, d, |a, b| (0..m).map(|s| basis[a][s] * basis[b][s] / nu[s]).sum::<f64>());
            let Some(step) = hess.cholesky().map(|c| c.solve(&grad)) else {
                break;
            };
            let mut t = 1.0;
            let mut moved = false;
            while t > 1e-12 {
                let trial: Vec<f64> = best_t.iter().zip(step.iter()).map(|(x, s)| x - t * s).collect();
                let v = objective(&point(&trial));
                if v < best {
                    best = v;
                    best_t = trial;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved || grad.norm() < 1e-13 {
                break;
            }
        }
    }
    best
}

fn criterion_3() -> Outcome {
    let mut r = rng(3);
    let mut worst_gap = 0.0f64;
    let mut instances = 0;
    let mut attempts = 0;
    let mut dims = Vec::new();
    while instances < 20 && attempts < 10_000 {
        attempts += 1;
        let n = r.random_range(4..=6);
        let k = r.random_range(2..=3);
        let all: Vec<u64> = k_subsets(n, k).collect();
        let size = r.random_range(n..=10.min(all.len()));
        let mut chosen = all.clone();
        for i in (1..chosen.len()).rev() {
            chosen.swap(i, r.random_range(0..=i));
        }
        chosen.truncate(size);
        let entries: Vec<(u64, f64)> = chosen.iter().map(|&m| (m, r.random_range(0.2..3.0))).collect();
        let mu = SubsetDensity::from_masks(n, k, entries).unwrap();
        let a = DMatrix::from_fn(n, mu.len(), |i, s| (mu.masks()[s] >> i & 1) as f64);
        let rank = a.rank(1e-10);
        // a free direction makes the primal search nontrivial; more than three keeps the grid small
        let nullity = mu.len() - rank;
        if !(1..=3).contains(&nullity) {
            continue;
        }
        dims.push(nullity);
        let nu0 = simplex(mu.len(), &mut r);
        let mut q = vec![0.0; n];
        for (s, &m) in mu.masks().iter().enumerate() {
            for i in indices_from_mask(m) {
                q[i] += nu0[s] / k as f64;
            }
        }
        let dual = min_entropy_dual(&mu, &q, 1e-10).unwrap().value;
        let primal = primal_minimum(&mu, &nu0);
        worst_gap = worst_gap.max((dual - primal).abs());
        instances += 1;
    }
    let boundary = min_entropy_dual(&SubsetDensity::uniform(3, 2).unwrap(), &[0.5, 0.5, 0.0], 1e-12)
        .unwrap()
        .value;
    let boundary_err = (boundary - 3f64.ln()).abs();
    outcome(
        instances == 20 && worst_gap <= 1e-4 && boundary_err <= 1e-6,
        format!("{instances} instances (free dimensions {dims:?}), max |dual - primal| {worst_gap:.2e} (tol 1e-4); log 3 example error {boundary_err:.1e} (tol 1e-6)"),
    )
}

fn criterion_4() -> Outcome {
    let base = SubsetDensity::uniform(4, 2).unwrap();
    let mu = base.r_fold(2).unwrap();
    let kappa = kappa_closed_form(4, 2, 0.5).unwrap();
    let kappa_ok = (kappa.integer_form.unwrap_or(f64::NAN) - 1.0 / 6.0).abs() < 1e-15;
    let report = contraction_coefficient(
        &mu,
        Projector::Down { ell: 2 },
        &ContractionOptions {
            seed: MASTER_SEED,
            ..ContractionOptions::default()
        },
    )
    .unwrap();
    let limit = 1.0 - 1.0 / 6.0 + 1e-8;
    let mut r = rng(4);
    let p = mu.probabilities();
    let mut worst_telescope = 0.0f64;
    for _ in 0..100 {
        let w = simplex(mu.len(), &mut r);
        let nu = mu.with_weights(w.clone()).unwrap();
        let prof = telescope_profile(&nu, &mu, Some(0.5)).unwrap();
        let sum: f64 = prof.deltas.iter().sum();
        worst_telescope = worst_telescope.max((sum - kl(&w, &p)).abs());
    }
    outcome(
        kappa_ok && report.coefficient <= limit && worst_telescope <= 1e-12,
        format!(
            "kappa = {:.6} (1/6 expected), measured contraction {:.6} <= {:.6}; telescoping error {worst_telescope:.1e} (tol 1e-12)",
            kappa.best(),
            report.coefficient,
            limit
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let bases = vec![
        SubsetDensity::uniform(4, 2).unwrap(),
        SubsetDensity::from_masks(5, 2, k_subsets(5, 2).map(|m| (m, r.random_range(0.5..2.0))).collect()).unwrap(),
        SubsetDensity::uniform(5, 3).unwrap(),
    ];
    let mut identity = true;
    let mut min_gap = f64::INFINITY;
    let mut irreducible = true;
    for base in &bases {
        let mu = base.r_fold(2).unwrap();
        let k = mu.arity();
        let one = down_up_kernel(&mu, k - 1, Level::Upper).unwrap();
        let d = one.to_dense();
        identity &= d == DMatrix::identity(mu.len(), mu.len());
        let two = down_up_kernel(&mu, k - 2, Level::Upper).unwrap();
        irreducible &= two.is_irreducible();
        min_gap = min_gap.min(spectrum_report(&two).unwrap().gap);
    }
    outcome(
        identity && irreducible && min_gap > 1e-9,
        format!("k<->k-1 exactly identity on 3 two-fold instances: {identity}; k<->k-2 irreducible: {irreducible}, min gap {min_gap:.4}"),
    )
}

/// `max λ(H)` and the worst influence-row slack for one rank-one field,
/// from direct enumeration.
fn rank_one_reference(u: &[f64], h: &[f64]) -> (f64, f64) {
    let n = u.len();
    let uu = DMatrix::from_fn(n, n, |a, b| u[a] * u[b]);
    let mu = ising_law(&uu, h);
    let norm_sq: f64 = u.iter().map(|x| x * x).sum();
    let alphas: Vec<f64> = (0..n).map(|i| 1.0 - norm_sq + u[i] * u[i]).collect();
    // elements 0..n are "x_i = +1", n..2n are "x_i = −1"
    let m = 2 * n;
    let member = |x: usize, e: usize| if e < n { x >> e & 1 == 1 } else { x >> (e - n) & 1 == 0 };
    let mut p1 = vec![0.0f64; m];
    let mut p2 = DMatrix::<f64>::zeros(m, m);
    for (x, &w) in mu.iter().enumerate() {
        for a in 0..m {
            if member(x, a) {
                p1[a] += w;
                for b in 0..m {
                    if member(x, b) {
                        p2[(a, b)] += w;
                    }
                }
            }
        }
    }
    let al = |e: usize| alphas[e % n];
    let hess = DMatrix::from_fn(m, m, |a, b| {
        if a == b {
            al(a) * (al(a) - 1.0) * p1[a] - al(a) * al(a) * p1[a] * p1[a]
        } else {
            al(a) * al(b) * (p2[(a, b)] - p1[a] * p1[b])
        }
    });
    let top = SymmetricEigen::new(hess)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut ineq = f64::INFINITY;
    for i in 0..n {
        let pi = p1[i];
        let mut lhs = 0.0;
        for j in 0..n {
            if j != i {
                let psi: f64 = p2[(i, j)] / pi - (p1[j] - p2[(i, j)]) / (1.0 - pi);
                lhs += psi.abs() * u[j].abs();
            }
        }
        let rhs = u[i].abs() * (norm_sq - u[i] * u[i]) / alphas[i];
        ineq = ineq.min(rhs - lhs);
    }
    (top, ineq)
}

fn criterion_6() -> Outcome {
    let mut r = rng(6);
    let mut worst_top = f64::NEG_INFINITY;
    let mut worst_ineq = f64::INFINITY;
    let mut library_certified = true;
    for inst in 0..100 {
        let n = r.random_range(2..=8);
        let norm = r.random_range(0.0..0.95);
        let u = random_vector_with_norm(n, norm, &mut r);
        let h: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        for s in 0..=200 {
            let field: Vec<f64> = if s == 0 {
                h.clone()
            } else {
                h.iter().map(|&v| v + r.random_range(-3.0..3.0)).collect()
            };
            let (top, ineq) = rank_one_reference(&u, &field);
            worst_top = worst_top.max(top);
            worst_ineq = worst_ineq.min(ineq);
        }
        let cert = rank_one_flc_certify(&u, &h, 200, MASTER_SEED + inst).unwrap();
        library_certified &= !cert.is_falsified();
    }
    outcome(
        worst_top <= 1e-8 && worst_ineq >= -1e-10 && library_certified,
        format!("max Hessian eigenvalue {worst_top:.2e} (tol 1e-8), min row slack {worst_ineq:.2e} (tol -1e-10), library certifies all: {library_certified}"),
    )
}

/// Upper MLSI estimates minus `(1−‖J‖)/n` and minus `(1−‖J‖)/(2n)` on 30
/// random PSD couplings with random fields, plus the bracket check.
fn glauber_mlsi_margins() -> (f64, f64, bool) {
    let mut r = rng(7);
    let mut stated = f64::INFINITY;
    let mut halved = f64::INFINITY;
    let mut bracket = true;
    for inst in 0..30 {
        let n = r.random_range(2..=5);
        let raw = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut r));
        let sym: DMatrix<f64> = (&raw + raw.transpose()) * 0.5;
        let shifted = IsingModel::from_matrix(sym, vec![0.0; n]).unwrap().psd_shift().unwrap();
        let target = r.random_range(0.05..0.9);
        let j = shifted.interaction() * (target / shifted.op_norm());
        let j = (&j + j.transpose()) * 0.5;
        let h: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let model = IsingModel::from_matrix(j, h).unwrap();
        let est = mlsi_estimate(
            &glauber_kernel(&model).unwrap(),
            &MlsiOptions {
                seed: MASTER_SEED + inst,
                ..MlsiOptions::default()
            },
        )
        .unwrap();
        let bound = (1.0 - model.op_norm()) / n as f64;
        stated = stated.min(est.upper - bound);
        halved = halved.min(est.upper - bound / 2.0);
        bracket &= est.lower <= est.upper;
    }
    (stated, halved, bracket)
}

fn criterion_7() -> Outcome {
    let (stated, _, bracket) = glauber_mlsi_margins();
    // one biased spin: resampling from (0.99, 0.01) with f = (1, 68.5)
    let (p, f) = ([0.99, 0.01], [1.0f64, 68.5]);
    let ef = p[0] * f[0] + p[1] * f[1];
    let elog = p[0] * f[0].ln() + p[1] * f[1].ln();
    let eflog = p[0] * f[0] * f[0].ln() + p[1] * f[1] * f[1].ln();
    let single = (eflog - ef * elog) / (2.0 * (eflog - ef * ef.ln()));
    outcome(
        stated >= -1e-8 && bracket,
        format!(
            "min (upper - (1-|J|)/n) = {stated:.3e} (tol -1e-8); bracket holds: {bracket}; single biased spin, J=0: ratio {single:.4} < 1"
        ),
    )
}

fn criterion_7_corrected() -> Outcome {
    let (_, halved, bracket) = glauber_mlsi_margins();
    outcome(
        halved >= -1e-8 && bracket,
        format!("min (upper - (1-|J|)/(2n)) = {halved:.3e} (tol -1e-8); bracket holds: {bracket}"),
    )
}

fn criterion_8() -> Outcome {
    let mut r = rng(8);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut finite = true;
    let mut disagreement = 0.0f64;
    for _ in 0..20 {
        let n = r.random_range(2..=8);
        let raw = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut r));
        let sym: DMatrix<f64> = (&raw + raw.transpose()) * 0.5;
        let norm = SymmetricEigen::new(sym.clone()).eigenvalues.amax();
        let j = sym * (r.random_range(0.1..1.0) / norm);
        let h: Vec<f64> = (0..n).map(|_| r.random_range(-1000.0..1000.0)).collect();
        let model = IsingModel::from_matrix(j.clone(), h).unwrap();
        let report = exchange_check(&model, ExchangePairs::All).unwrap();
        finite &= report.max_log_ratio.is_finite();
        worst_excess = worst_excess.max(report.max_log_ratio - 4.0 * (n as f64).sqrt() * model.op_norm());
        // reference: the coupling part of the Hamiltonian difference; the
        // field terms cancel exactly between the two sides
        let quad = |x: usize| {
            let s = DVector::from_iterator(n, (0..n).map(|i| spin(x, i)));
            0.5 * s.dot(&(&j * &s))
        };
        let mut max_ref = f64::NEG_INFINITY;
        for s in 0..1usize << n {
            for t in 0..1usize << n {
                let diff = s ^ t;
                for i in 0..n {
                    if diff >> i & 1 == 1 {
                        let bit = 1 << i;
                        let s2 = (s & !bit) | (t & bit);
                        let t2 = (t & !bit) | (s & bit);
                        max_ref = max_ref.max(quad(s) + quad(t) - quad(s2) - quad(t2));
                    }
                }
            }
        }
        disagreement = disagreement.max((max_ref - report.max_log_ratio).abs());
    }
    outcome(
        worst_excess <= 1e-10 && finite && disagreement < 1e-9,
        format!("max (log ratio - 4 sqrt(n)|J|) = {worst_excess:.3e}; all finite: {finite}; reference gap {disagreement:.1e}"),
    )
}

fn criterion_9() -> Outcome {
    let delta = 0.5;
    let table = scale_study(
        &[8, 10, 12],
        delta,
        &ScaleOptions {
            seed: MASTER_SEED,
            ..ScaleOptions::default()
        },
    )
    .unwrap();
    let band = |v: f64| (1.0 / 3.0..=3.0).contains(&v);
    let mut ok = true;
    let mut parts = Vec::new();
    for row in &table.rows {
        let n = row.n as f64;
        let g = row.gap.unwrap() * n / delta;
        let t = row.tmix_exact.unwrap() as f64 / (n * n.ln() / delta);
        ok &= band(g) && band(t);
        parts.push(format!("n={} gap*n/d={g:.3} tmix/(n ln n/d)={t:.3}", row.n));
    }
    let a = table.gap_exponent.unwrap();
    ok &= (a + 1.0).abs() <= 0.3;
    let free = scale_study(
        &[8],
        1.0,
        &ScaleOptions {
            seed: MASTER_SEED,
            runs: 500,
            ..ScaleOptions::default()
        },
    )
    .unwrap();
    let free_gap = free.rows[0].gap.unwrap();
    ok &= (free_gap - 0.125).abs() < 1e-10;
    outcome(
        ok,
        format!("{}; gap exponent {a:.3} (|a+1| <= 0.3); J=0 gap {free_gap:.6}", parts.join(", ")),
    )
}

fn endpoint_check(kernel: &TransitionKernel, sample: impl Fn(usize, u64) -> Vec<u64>) -> (f64, f64, u64) {
    let (t, start) = mixing_time_worst(kernel, None, 0.01).unwrap();
    let mut exact = vec![0.0; kernel.nrows()];
    exact[start] = 1.0;
    for _ in 0..t {
        exact = kernel.left_apply(&exact);
    }
    let ends = sample(start, t);
    let law = empirical_law(kernel.rows(), &ends).unwrap();
    (tv(&law, kernel.stationary().unwrap()), tv(&law, &exact), t)
}

fn criterion_10() -> Outcome {
    const RUNS: usize = 100_000;
    let mut r = rng(10);
    let weighted = SubsetDensity::from_masks(5, 3, k_subsets(5, 3).map(|m| (m, r.random_range(0.2..3.0))).collect()).unwrap();
    let subset_cases: Vec<(SubsetDensity, usize)> = vec![
        (SubsetDensity::uniform(4, 2).unwrap(), 1),
        (weighted, 2),
        (SubsetDensity::uniform(4, 2).unwrap().r_fold(2).unwrap(), 2),
    ];
    let mut worst_mu = 0.0f64;
    let mut worst_exact = 0.0f64;
    let mut times = Vec::new();
    for (case, (mu, ell)) in subset_cases.iter().enumerate() {
        let kernel = down_up_kernel(mu, *ell, Level::Upper).unwrap();
        let walker = SubsetWalker::new(mu, *ell).unwrap();
        let (a, b, t) = endpoint_check(&kernel, |start, t| {
            walker
                .endpoints(kernel.rows()[start], t as usize, RUNS, MASTER_SEED + case as u64)
                .unwrap()
        });
        worst_mu = worst_mu.max(a);
        worst_exact = worst_exact.max(b);
        times.push(t);
    }
    let rank_one = IsingModel::rank_one(vec![0.5, 0.4, 0.3, 0.2], vec![0.3, -0.2, 0.1, 0.0]).unwrap();
    let raw = DMatrix::from_fn(5, 5, |a, b| if a == b { 0.0 } else { 0.1 * ((a * 3 + b * 3) % 5) as f64 - 0.2 });
    let dense = IsingModel::from_matrix(raw, vec![0.2, 0.0, -0.3, 0.1, 0.05]).unwrap();
    for (case, model) in [rank_one, dense].iter().enumerate() {
        let kernel = glauber_kernel(model).unwrap();
        let (a, b, t) = endpoint_check(&kernel, |start, t| {
            glauber_endpoints(model, start as u64, t, RUNS, MASTER_SEED + 10 + case as u64).unwrap()
        });
        worst_mu = worst_mu.max(a);
        worst_exact = worst_exact.max(b);
        times.push(t);
    }

    // throughput: rank-one Glauber at n = 10^4, 10^7 steps
    let n = 10_000;
    let model = IsingModel::curie_weiss(n, 0.5).unwrap();
    let mut sampler = GlauberSampler::new(&model, &vec![1; n]).unwrap();
    let mut g = rng(11);
    let steps = 10_000_000u64;
    let clock = Instant::now();
    sampler.run(steps, &mut g);
    let elapsed = clock.elapsed();
    let rate = steps as f64 / elapsed.as_secs_f64();
    let fast = rate >= 1e6 && elapsed <= Duration::from_secs(10);
    outcome(
        worst_mu <= 0.05 && worst_exact <= 0.02 && fast,
        format!(
            "t_mix(0.01) = {times:?}; max TV to mu {worst_mu:.4} (tol 0.05), to exact law {worst_exact:.4} (tol 0.02); rank-one n=1e4: {:.2e} steps/s, 1e7 steps in {:.2}s",
            rate,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_11() -> Outcome {
    let mut r = rng(12);
    let mut worst = f64::NEG_INFINITY;
    let mut disagreement = 0.0f64;
    for _ in 0..50 {
        let n = r.random_range(2..=6);
        let norm = r.random_range(0.0..1.5);
        let u = random_vector_with_norm(n, norm, &mut r);
        let h: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let uu = DMatrix::from_fn(n, n, |a, b| u[a] * u[b]);
        let mu = ising_law(&uu, &h);
        let lib = entropywalks::certify::dobrushin_matrix(&SpinDensity::from_weights(n, mu.clone()).unwrap()).unwrap();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                // reference: scan all configurations of the other spins
                let mut best = 0.0f64;
                for x in 0..1usize << n {
                    if x >> i & 1 == 1 || x >> j & 1 == 1 {
                        continue;
                    }
                    let cond = |y: usize| mu[y | 1 << i] / (mu[y | 1 << i] + mu[y]);
                    best = best.max((cond(x) - cond(x | 1 << j)).abs());
                }
                worst = worst.max(best - (u[i] * u[j]).abs().tanh());
                disagreement = disagreement.max((best - lib[(i, j)]).abs());
            }
        }
    }
    outcome(
        worst <= 1e-12 && disagreement < 1e-12,
        format!("max (R_ij - tanh|u_i u_j|) = {worst:.3e} (tol 1e-12); library/reference gap {disagreement:.1e}"),
    )
}

/// Criteria whose statement is contradicted by an explicit instance. They
/// run and print FAIL, but do not fail the suite.
const UNATTAINABLE: &[(&str, &str)] = &[("7", "the stated bound fails for biased fields; see the single-spin ratio")];

type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("1", "rank-one down-projection contraction", criterion_1),
        ("2", "tangent inequality on uniform matroids and field shifts", criterion_2),
        ("3", "minimum-entropy dual matches primal", criterion_3),
        ("4", "closed-form kappa and telescoping identity", criterion_4),
        ("5", "two-fold product: reducible k-1 walk, irreducible k-2 walk", criterion_5),
        ("6", "rank-one fractional log-concavity certificate", criterion_6),
        ("7", "Glauber MLSI bound (1-|J|)/n for PSD couplings", criterion_7),
        ("7c", "Glauber MLSI bound (1-|J|)/(2n) for PSD couplings", criterion_7_corrected),
        ("8", "exchange ratio bound", criterion_8),
        ("9", "Curie-Weiss gap and mixing-time scaling", criterion_9),
        ("10", "simulator fidelity and rank-one throughput", criterion_10),
        ("11", "Dobrushin entries below tanh bound", criterion_11),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let clock = Instant::now();
        let out = run();
        let secs = clock.elapsed().as_secs_f64();
        let known = UNATTAINABLE.iter().find(|(k, _)| *k == id).map(|(_, why)| *why);
        let tag = if out.pass { "PASS" } else { "FAIL" };
        let note = match (out.pass, known) {
            (false, Some(why)) => format!(" (unattainable as stated: {why})"),
            _ => String::new(),
        };
        println!("{tag} {id:>3} {name} [{secs:.1}s] {}{note}", out.detail);
        if !out.pass && known.is_none() {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
