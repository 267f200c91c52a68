//! Small dense and matrix-free symmetric eigen helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Eigenvalues of a symmetric matrix in decreasing order, with matching
/// eigenvector columns.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut values: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// `max |λ|` of a symmetric matrix; dense up to 2048, power iteration above.
pub fn sym_op_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    if n <= 2048 {
        return sym_eigenvalues(m).iter().map(|v| v.abs()).fold(0.0, f64::max);
    }
    power_iteration(|x| m * x, n, 1000, 1e-12)
}

/// Largest `|λ|` of a symmetric operator by power iteration on `A²`.
pub fn power_iteration<F>(apply: F, n: usize, iters: usize, tol: f64) -> f64
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    x /= x.norm();
    let mut last = 0.0;
    for _ in 0..iters {
        let y = apply(&apply(&x));
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let est = norm.sqrt();
        x = y / norm;
        if (est - last).abs() <= tol * est.max(1.0) {
            return est;
        }
        last = est;
    }
    last
}

/// Top `count` eigenvalues of a symmetric operator via Lanczos with full
/// reorthogonalization against the given deflation vectors.
pub fn lanczos_top<F>(apply: F, n: usize, deflate: &[DVector<f64>], count: usize, max_iter: usize, seed: u64) -> Vec<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let project = |v: &mut DVector<f64>| {
        for d in deflate {
            let c = d.dot(v);
            v.axpy(-c, d, 1.0);
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    project(&mut q);
    q /= q.norm();
    let m = max_iter.min(n.saturating_sub(deflate.len())).max(1);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    basis.push(q);
    for j in 0..m {
        let mut w = apply(&basis[j]);
        project(&mut w);
        let a = basis[j].dot(&w);
        alpha.push(a);
        // two passes of Gram-Schmidt keep the basis orthogonal to roundoff
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w.axpy(-c, b, 1.0);
            }
            project(&mut w);
        }
        let b = w.norm();
        if j + 1 == m || b < 1e-12 {
            break;
        }
        beta.push(b);
        basis.push(w / b);
    }
    let size = alpha.len();
    let t = DMatrix::from_fn(size, size, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    let mut values = sym_eigenvalues(&t);
    values.truncate(count);
    values
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (vals, vecs) = sym_eigen(&m);
        assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        assert!((vecs[(0, 0)].abs() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((sym_op_norm(&DMatrix::from_row_slice(2, 2, &[-3.0, 0.0, 0.0, 1.0])) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lanczos_matches_dense() {
        let n = 60;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>());
        let s = &a + a.transpose();
        let dense = sym_eigenvalues(&s);
        let top = lanczos_top(|x| &s * x, n, &[], 3, n, 1);
        for (x, y) in dense.iter().zip(&top) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
        let p = power_iteration(|x| &s * x, n, 5000, 1e-14);
        let norm = dense.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!((p - norm).abs() < 1e-6);
    }
}
