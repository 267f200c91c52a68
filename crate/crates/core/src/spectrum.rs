//! Spectra of kernels with a stationary law, via the `diag(π)^{1/2}`
//! similarity.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::divergence::symmetrized;
use crate::error::{Error, Result};
use crate::kernel::{TransitionKernel, STATE_CAP};
use crate::linalg::{lanczos_top, sym_eigenvalues};

/// Largest kernel solved with a dense eigendecomposition.
pub const DENSE_SPECTRUM_CAP: usize = 2048;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Decreasing eigenvalues; only `[λ₁, λ₂]` for matrix-free solves.
    pub eigenvalues: Vec<f64>,
    /// `1 − λ₂`.
    pub gap: f64,
    pub min_eigenvalue: f64,
    pub detailed_balance_residual: f64,
    pub reversible: bool,
    /// Whether `eigenvalues` is the full spectrum.
    pub complete: bool,
}

pub fn spectrum_report(kernel: &TransitionKernel) -> Result<SpectrumReport> {
    let pi = kernel
        .stationary()
        .ok_or_else(|| Error::InvalidArgument("kernel has no stationary distribution".into()))?;
    let n = kernel.nrows();
    if n > STATE_CAP {
        return Err(Error::StateSpaceTooLarge { states: n, cap: STATE_CAP });
    }
    if pi.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::InvalidArgument("stationary law must be positive on every state".into()));
    }
    let residual = kernel.detailed_balance_residual();
    let reversible = residual <= 1e-10;
    if n <= DENSE_SPECTRUM_CAP {
        let eigenvalues = if reversible {
            let s = symmetrized(kernel, pi);
            sym_eigenvalues(&((&s + s.transpose()) * 0.5))
        } else {
            let mut re: Vec<f64> = kernel.to_dense().complex_eigenvalues().iter().map(|c| c.re).collect();
            re.sort_by(|a, b| b.total_cmp(a));
            re
        };
        let gap = if n > 1 { 1.0 - eigenvalues[1] } else { 0.0 };
        let min_eigenvalue = *eigenvalues.last().unwrap_or(&1.0);
        return Ok(SpectrumReport {
            eigenvalues,
            gap,
            min_eigenvalue,
            detailed_balance_residual: residual,
            reversible,
            complete: true,
        });
    }
    if !reversible {
        return Err(Error::NonReversibleKernel(residual));
    }
    Ok(matrix_free_report(kernel, pi, residual))
}

fn matrix_free_report(kernel: &TransitionKernel, pi: &[f64], residual: f64) -> SpectrumReport {
    let n = kernel.nrows();
    let sqrt_pi: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    let apply = |x: &DVector<f64>| -> DVector<f64> {
        // S x = D^{1/2} P D^{-1/2} x
        let scaled: Vec<f64> = x.iter().zip(&sqrt_pi).map(|(v, s)| v / s).collect();
        let px = kernel.right_apply(&scaled);
        DVector::from_iterator(n, px.iter().zip(&sqrt_pi).map(|(v, s)| v * s))
    };
    let top = DVector::from_vec(sqrt_pi.clone());
    let second = lanczos_top(apply, n, std::slice::from_ref(&top), 1, 400, 17)[0];
    let lowest = -lanczos_top(|x| -apply(x), n, &[], 1, 400, 29)[0];
    SpectrumReport {
        eigenvalues: vec![1.0, second],
        gap: 1.0 - second,
        min_eigenvalue: lowest,
        detailed_balance_residual: residual,
        reversible: true,
        complete: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::IsingModel;
    use crate::kernel::{down_up_kernel, glauber_kernel, Level, StateSpace};
    use crate::subset::SubsetDensity;

    #[test]
    fn identity_and_rank_one() {
        let space = StateSpace::Spins { n: 2 };
        let id = TransitionKernel::identity(space, vec![0, 1, 2, 3], Some(vec![0.25; 4])).unwrap();
        let r = spectrum_report(&id).unwrap();
        assert!(r.eigenvalues.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(r.gap.abs() < 1e-12);

        let pi = vec![0.1, 0.2, 0.3, 0.4];
        let r1 = TransitionKernel::rank_one(space, vec![0, 1, 2, 3], pi).unwrap();
        let r = spectrum_report(&r1).unwrap();
        assert!((r.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!(r.eigenvalues[1..].iter().all(|v| v.abs() < 1e-12));
        assert!((r.gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn glauber_product_gap() {
        let model = IsingModel::new(vec![vec![0.0; 4]; 4], vec![0.0; 4]).unwrap();
        let r = spectrum_report(&glauber_kernel(&model).unwrap()).unwrap();
        assert!((r.gap - 0.25).abs() < 1e-12);
    }

    #[test]
    fn lanczos_path_agrees_with_dense() {
        let n = 8;
        let j: Vec<Vec<f64>> = (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| if r == c { 0.0 } else { 0.15 * ((r + c) % 3) as f64 - 0.1 })
                    .collect()
            })
            .collect();
        let model = IsingModel::new(j, vec![0.2, -0.1, 0.0, 0.3, 0.1, -0.2, 0.05, 0.0]).unwrap();
        let k = glauber_kernel(&model).unwrap();
        let dense = spectrum_report(&k).unwrap();
        let free = matrix_free_report(&k, k.stationary().unwrap(), 0.0);
        assert!(dense.complete && !free.complete);
        assert!((dense.gap - free.gap).abs() < 1e-9, "{} vs {}", dense.gap, free.gap);
        assert!((dense.min_eigenvalue - free.min_eigenvalue).abs() < 1e-9);
    }

    #[test]
    fn down_up_spectra_nonnegative() {
        let mu = SubsetDensity::new(
            5,
            3,
            &[
                (vec![0, 1, 2], 1.0),
                (vec![0, 1, 3], 2.0),
                (vec![1, 2, 4], 0.5),
                (vec![0, 3, 4], 1.5),
                (vec![2, 3, 4], 3.0),
            ],
        )
        .unwrap();
        for ell in 0..3 {
            let up = spectrum_report(&down_up_kernel(&mu, ell, Level::Upper).unwrap()).unwrap();
            let low = spectrum_report(&down_up_kernel(&mu, ell, Level::Lower).unwrap()).unwrap();
            assert!(up.reversible && low.reversible);
            assert!(up.min_eigenvalue >= -1e-9 && low.min_eigenvalue >= -1e-9);
            let nz = |v: &[f64]| v.iter().copied().filter(|x| x.abs() > 1e-8).collect::<Vec<_>>();
            let (a, b) = (nz(&up.eigenvalues), nz(&low.eigenvalues));
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }
}
