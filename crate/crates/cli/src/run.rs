//! One function per experiment kind. Each returns a deterministic summary,
//! optional tables, and a witness when something was falsified.

use entropywalks::certify::{
    entropic_independence_all_links, entropic_independence_certify, flc_check, spectral_independence_certify, Certificate, EiMode,
    EiOptions, FlcOptions, Parameter, TangentOptions,
};
use entropywalks::divergence::{
    contraction_coefficient, kappa_closed_form, mixing_time_worst, mlsi_estimate, tv, ContractionOptions, MlsiOptions, Projector,
    DEFAULT_EPSILON,
};
use entropywalks::ising::{exchange_check, rank_one_flc_certify, ExchangePairs};
use entropywalks::kernel::{down_up_kernel, glauber_kernel, glauber_kernel_spin};
use entropywalks::scaling::{scale_study, ScaleOptions};
use entropywalks::spectrum::spectrum_report;
use entropywalks::subset::{spins_to_mask, AlphaVector};
use entropywalks::walk::{simulate_glauber, simulate_walk};
use entropywalks::{Level, SeedSplitter, TransitionKernel};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::{Kind, Model, Params};
use crate::report::Table;
use crate::RunError;

pub struct Outcome {
    pub summary: Value,
    pub tables: Vec<Table>,
    pub witness: Option<Value>,
}

impl Outcome {
    fn verified(summary: Value, tables: Vec<Table>) -> Self {
        Self {
            summary,
            tables,
            witness: None,
        }
    }
}

pub fn dispatch(kind: Kind, model: Option<&Model>, params: &mut Params<'_>, seed: u64) -> Result<Outcome, RunError> {
    let splitter = SeedSplitter::new(seed);
    let need = || model.ok_or_else(|| RunError::Invalid(format!("{kind} needs an input")));
    match kind {
        Kind::Certify => certify(need()?, params, &splitter),
        Kind::Contraction => contraction(need()?, params, &splitter),
        Kind::Mlsi => mlsi(need()?, params, &splitter),
        Kind::Mix => mix(need()?, params),
        Kind::Scale => {
            if model.is_some() {
                return Err(RunError::Invalid("scale builds its own Curie-Weiss models; drop the input".into()));
            }
            scale(params, &splitter)
        }
        Kind::Exchange => exchange(need()?, params, &splitter),
        Kind::Walk => walk(need()?, params, &splitter),
    }
}

fn certificate_outcome(cert: Certificate) -> Outcome {
    let witness = cert.is_falsified().then(|| json!({ "certificate": &cert }));
    Outcome {
        summary: json!({ "verdict": cert.verdict, "certificate": cert }),
        tables: Vec::new(),
        witness,
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum CertifyProperty {
    EntropicIndependence,
    Flc,
    SpectralIndependence,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum Mode {
    Exact,
    Sampled,
}

fn certify(model: &Model, p: &mut Params<'_>, seeds: &SeedSplitter) -> Result<Outcome, RunError> {
    let property = p.or("property", CertifyProperty::EntropicIndependence)?;
    let cert = match property {
        CertifyProperty::EntropicIndependence => {
            let alpha: f64 = p.require("alpha")?;
            let mode = match p.or("mode", Mode::Exact)? {
                Mode::Exact => EiMode::ExactDual,
                Mode::Sampled => EiMode::Sampled,
            };
            let defaults = EiOptions::default();
            let opts = EiOptions {
                mode,
                mesh: p.or("mesh", defaults.mesh)?,
                tangent: TangentOptions {
                    samples: p.or("samples", defaults.tangent.samples)?,
                    seed: seeds.child(0).master(),
                    ..defaults.tangent
                },
                seed: seeds.child(1).master(),
            };
            let mu = model.density()?;
            if p.or("links", false)? {
                entropic_independence_all_links(&mu, alpha, &opts)?
            } else {
                entropic_independence_certify(&mu, alpha, &opts)?
            }
        }
        CertifyProperty::Flc => {
            let shifts = p.or("shifts", 0usize)?;
            let rank_one = match model {
                Model::Ising(m) => m.rank_one_vector().map(|u| (u.to_vec(), m.field().to_vec())),
                _ => None,
            };
            match rank_one {
                // the rank-one family carries its own α profile
                Some((u, h)) if p.get::<Parameter>("alpha")?.is_none() => rank_one_flc_certify(&u, &h, shifts, seeds.child(2).master())?,
                _ => {
                    let alpha = match p.require::<Parameter>("alpha")? {
                        Parameter::Scalar(a) => AlphaVector::uniform(a)?,
                        Parameter::Vector(v) => AlphaVector::per_element(v)?,
                    };
                    let defaults = FlcOptions::default();
                    let opts = FlcOptions {
                        samples: p.or("samples", defaults.samples)?,
                        shifts,
                        structural: p.or("structural", false)?,
                        seed: seeds.child(2).master(),
                    };
                    flc_check(&model.density()?, &alpha, &[], &opts)?
                }
            }
        }
        CertifyProperty::SpectralIndependence => {
            let eta: f64 = p.require("eta")?;
            spectral_independence_certify(&model.density()?, eta)
        }
    };
    Ok(certificate_outcome(cert))
}

fn contraction(model: &Model, p: &mut Params<'_>, seeds: &SeedSplitter) -> Result<Outcome, RunError> {
    let mu = model.density()?;
    let k = mu.arity();
    let alpha: f64 = p.require("alpha")?;
    let tol = p.or("tol", 1e-8)?;
    let ells: Vec<usize> = match p.get("ells")? {
        Some(v) => v,
        None => (1..k).filter(|&ell| kappa_closed_form(k, ell, alpha).is_ok()).collect(),
    };
    let defaults = ContractionOptions::default();
    let base = ContractionOptions {
        trials: p.or("trials", defaults.trials)?,
        ascent_steps: p.or("ascent_steps", defaults.ascent_steps)?,
        ascent_starts: p.or("ascent_starts", defaults.ascent_starts)?,
        seed: 0,
    };
    let rows: Vec<_> = ells
        .par_iter()
        .map(|&ell| {
            let kappa = kappa_closed_form(k, ell, alpha)?.best();
            let opts = ContractionOptions {
                seed: seeds.child(ell as u64).master(),
                ..base
            };
            let report = contraction_coefficient(&mu, Projector::Down { ell }, &opts)?;
            Ok((ell, kappa, report))
        })
        .collect::<Result<_, entropywalks::Error>>()?;
    let mut table = Table::new(
        "contraction",
        "alpha,ell,measured,kappa,margin; measured = largest KL(nu D)/KL(nu) found for D down to level ell; margin = 1 - kappa - measured",
        &["alpha", "ell", "measured", "kappa", "margin"],
    );
    let mut worst: Option<(f64, usize, Vec<f64>)> = None;
    let mut summary_rows = Vec::new();
    for (ell, kappa, report) in rows {
        let margin = 1.0 - kappa - report.coefficient;
        table.push([
            alpha.to_string(),
            ell.to_string(),
            report.coefficient.to_string(),
            kappa.to_string(),
            margin.to_string(),
        ]);
        summary_rows.push(json!({ "ell": ell, "measured": report.coefficient, "kappa": kappa, "margin": margin, "seed": report.seed }));
        if worst.as_ref().is_none_or(|w| margin < w.0) {
            worst = Some((margin, ell, report.witness));
        }
    }
    let min_margin = worst.as_ref().map(|w| w.0);
    let witness = worst
        .filter(|w| w.0 < -tol)
        .map(|(margin, ell, nu)| json!({ "ell": ell, "margin": margin, "states": hex_states(mu.masks()), "nu": nu }));
    Ok(Outcome {
        summary: json!({ "alpha": alpha, "k": k, "rows": summary_rows, "min_margin": min_margin, "tol": tol }),
        tables: vec![table],
        witness,
    })
}

/// Down-up kernel for set systems, Glauber dynamics for spin systems.
fn chain(model: &Model, p: &mut Params<'_>) -> Result<TransitionKernel, RunError> {
    Ok(match model {
        Model::Density(mu) => {
            let ell = p.or("ell", mu.arity().saturating_sub(1))?;
            let level = match p.or("level", "upper".to_string())?.as_str() {
                "upper" => Level::Upper,
                "lower" => Level::Lower,
                other => return Err(RunError::Invalid(format!("params.level must be upper or lower, got {other}"))),
            };
            down_up_kernel(mu, ell, level)?
        }
        Model::Spin(s) => glauber_kernel_spin(s)?,
        Model::Ising(m) => glauber_kernel(m)?,
    })
}

fn hex_states(states: &[u64]) -> Vec<String> {
    states.iter().map(|s| format!("{s:#x}")).collect()
}

fn mlsi(model: &Model, p: &mut Params<'_>, seeds: &SeedSplitter) -> Result<Outcome, RunError> {
    let kernel = chain(model, p)?;
    let defaults = MlsiOptions::default();
    let opts = MlsiOptions {
        starts: p.or("starts", defaults.starts)?,
        iterations: p.or("iterations", defaults.iterations)?,
        contraction_trials: p.or("contraction_trials", defaults.contraction_trials)?,
        seed: seeds.child(0).master(),
    };
    let est = mlsi_estimate(&kernel, &opts)?;
    let pi = kernel.stationary().expect("mlsi_estimate requires a stationary law");
    let mut table = Table::new(
        "mlsi_witness",
        "state,pi,f; state = hex bitmask, f = minimizing test function",
        &["state", "pi", "f"],
    );
    for ((s, q), f) in kernel.rows().iter().zip(pi).zip(&est.witness_f) {
        table.push([format!("{s:#x}"), q.to_string(), f.to_string()]);
    }
    let consistent = est.lower <= est.upper + 1e-9;
    let norm = match model {
        Model::Ising(m) => Some(m.op_norm()),
        _ => None,
    };
    let summary = json!({
        "upper": est.upper,
        "lower": est.lower,
        "contraction": est.contraction,
        "gap": est.gap,
        "starts": est.starts,
        "seed": est.seed,
        "states": kernel.nrows(),
        "coupling_norm": norm,
        "bracket_consistent": consistent,
    });
    let witness = (!consistent).then(|| json!({ "lower": est.lower, "upper": est.upper, "f": est.witness_f }));
    Ok(Outcome {
        summary,
        tables: vec![table],
        witness,
    })
}

fn mix(model: &Model, p: &mut Params<'_>) -> Result<Outcome, RunError> {
    let kernel = chain(model, p)?;
    let epsilon = p.or("epsilon", DEFAULT_EPSILON)?;
    let (tmix, worst) = mixing_time_worst(&kernel, None, epsilon)?;
    let gap = spectrum_report(&kernel)?.gap;
    let pi = kernel.stationary().expect("ergodic kernels carry a stationary law");
    let mut table = Table::new(
        "mix",
        "t,tv; tv = total variation from the worst point-mass start after t steps",
        &["t", "tv"],
    );
    let mut nu = vec![0.0; kernel.nrows()];
    nu[worst] = 1.0;
    for t in 0..=tmix {
        table.push([t.to_string(), tv(&nu, pi).to_string()]);
        nu = kernel.left_apply(&nu);
    }
    Ok(Outcome::verified(
        json!({
            "epsilon": epsilon,
            "tmix": tmix,
            "worst_start": format!("{:#x}", kernel.rows()[worst]),
            "gap": gap,
            "states": kernel.nrows(),
        }),
        vec![table],
    ))
}

fn scale(p: &mut Params<'_>, seeds: &SeedSplitter) -> Result<Outcome, RunError> {
    let sizes: Vec<usize> = p.require("sizes")?;
    let delta: f64 = p.require("delta")?;
    let defaults = ScaleOptions::default();
    let opts = ScaleOptions {
        exact_cap: p.or("exact_cap", defaults.exact_cap)?,
        epsilon: p.or("epsilon", defaults.epsilon)?,
        runs: p.or("runs", defaults.runs)?,
        seed: seeds.child(0).master(),
    };
    let table = scale_study(&sizes, delta, &opts)?;
    let mut csv = Table::new(
        "scale",
        "n,delta,gap,tmix,bound,tmix_exact,mlsi_lower,tmix_empirical,tv_empirical; tmix = tmix_exact where enumerable else tmix_empirical; bound = mixing bound from one-step KL contraction at rate mlsi_lower = (1-|J|)/n; blank = not computed",
        &["n", "delta", "gap", "tmix", "bound", "tmix_exact", "mlsi_lower", "tmix_empirical", "tv_empirical"],
    );
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in &table.rows {
        csv.push([
            r.n.to_string(),
            r.delta.to_string(),
            opt(r.gap.map(|g| g.to_string())),
            r.tmix_exact.unwrap_or(r.tmix_empirical).to_string(),
            opt(r.bound.map(|b| b.to_string())),
            opt(r.tmix_exact.map(|t| t.to_string())),
            r.mlsi_lower.to_string(),
            r.tmix_empirical.to_string(),
            r.tv_empirical.to_string(),
        ]);
    }
    Ok(Outcome::verified(json!({ "options": opts, "table": table }), vec![csv]))
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum PairSpec {
    All,
    Random(usize),
}

fn exchange(model: &Model, p: &mut Params<'_>, seeds: &SeedSplitter) -> Result<Outcome, RunError> {
    let m = model.ising()?;
    let pairs = match p.or("pairs", PairSpec::All)? {
        PairSpec::All => ExchangePairs::All,
        PairSpec::Random(count) => ExchangePairs::Random {
            count,
            seed: seeds.child(0).master(),
        },
    };
    let report = exchange_check(m, pairs)?;
    let witness = (!report.holds).then(|| {
        let (sigma, tau, i) = report.worst.expect("a failing check records its worst triple");
        json!({ "sigma": format!("{sigma:#x}"), "tau": format!("{tau:#x}"), "i": i, "log_ratio": report.max_log_ratio, "log_bound": report.log_bound })
    });
    Ok(Outcome {
        summary: json!({ "report": report }),
        tables: Vec::new(),
        witness,
    })
}

type Energy = Box<dyn Fn(u64) -> f64>;

fn walk(model: &Model, p: &mut Params<'_>, seeds: &SeedSplitter) -> Result<Outcome, RunError> {
    let steps: usize = p.require("steps")?;
    let seed = seeds.child(0).master();
    let (traj, energy): (_, Option<Energy>) = match model {
        Model::Density(mu) => {
            let ell = p.or("ell", mu.arity().saturating_sub(1))?;
            let start = match p.get::<Vec<usize>>("start")? {
                Some(set) => set.iter().fold(0u64, |m, &i| m | 1 << i),
                None => mu.masks()[0],
            };
            (simulate_walk(mu, ell, start, steps, seed)?, None)
        }
        Model::Ising(m) => {
            let start: Vec<i8> = p.or("start", vec![-1; m.n()])?;
            let energy_of = m.clone();
            let e: Energy = Box::new(move |x| -energy_of.log_weight(x));
            (simulate_glauber(m, spins_to_mask(&start), steps, seed)?, Some(e))
        }
        Model::Spin(_) => return Err(RunError::Invalid("walk takes a set-system density or an Ising model".into())),
    };
    let mut body = Vec::new();
    traj.write_csv(&mut body, energy.as_deref())?;
    let schema = if energy.is_some() {
        "step,state,energy; state = hex spin mask (bit i set iff spin i is +1); energy = -(x^T J x / 2 + h^T x)"
    } else {
        "step,state; state = hex bitmask of the current set"
    };
    let mut distinct = traj.states.clone();
    distinct.sort_unstable();
    distinct.dedup();
    Ok(Outcome::verified(
        json!({
            "steps": traj.step_count,
            "seed": traj.seed,
            "start": format!("{:#x}", traj.states[0]),
            "final": format!("{:#x}", traj.last()),
            "distinct_states": distinct.len(),
        }),
        vec![Table::raw("trajectory", schema, body)],
    ))
}
