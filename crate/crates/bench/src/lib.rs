//! Fixtures shared by the criterion benches, sized so each iteration
//! stays in the millisecond range.

use entropywalks::{IsingModel, SubsetDensity};

/// Product-weighted `k`-subsets of `[n]` with `λ_i = 1 + i/n`.
pub fn product_density(n: usize, k: usize) -> SubsetDensity {
    let lambda: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 / n as f64).collect();
    SubsetDensity::product(n, k, &lambda).expect("valid product density")
}

/// Rank-one model with `‖u‖² = 1/2` and a small alternating field.
pub fn rank_one_model(n: usize) -> IsingModel {
    let c = (0.5 / n as f64).sqrt();
    let h = (0..n).map(|i| if i % 2 == 0 { 0.1 } else { -0.1 }).collect();
    IsingModel::rank_one(vec![c; n], h).expect("valid rank-one model")
}

/// Dense ring coupling of strength `0.2` with zero field.
pub fn ring_model(n: usize) -> IsingModel {
    let j = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| if (r + 1) % n == c || (c + 1) % n == r { 0.2 } else { 0.0 })
                .collect()
        })
        .collect();
    IsingModel::new(j, vec![0.0; n]).expect("valid ring model")
}
