//! The few dense routines the solvers need: a power-iteration spectral norm
//! and a Cholesky-based ridge least-squares solve.
//!
//! Everything here is dependency-free on purpose; problem sizes are small
//! (tens of nodes, embedding dimension ~32), so asymptotics don't matter but
//! determinism does.

use crate::rng::Rng;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Largest singular value of `a`, by power iteration on AᵀA.
///
/// `seed` fixes the random start vector so results are reproducible. If the
/// start vector happens to be annihilated, restarts from the basis vector of
/// the heaviest column before giving up (a zero matrix yields 0).
pub fn spectral_norm(a: ArrayView2<f64>, iters: usize, seed: u64) -> f64 {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return 0.0;
    }
    let mut rng = Rng::new(seed);
    let mut v = Array1::from_shape_fn(n, |_| rng.uniform(-1.0, 1.0));
    let norm = v.dot(&v).sqrt();
    if norm == 0.0 {
        v[0] = 1.0;
    } else {
        v /= norm;
    }

    let mut restarted = false;
    let mut i = 0;
    while i < iters {
        let w = a.dot(&v);
        let u = a.t().dot(&w);
        let norm = u.dot(&u).sqrt();
        if norm == 0.0 {
            if restarted {
                return 0.0;
            }
            restarted = true;
            // start over from the heaviest column's basis vector
            let heaviest = (0..n)
                .max_by(|&p, &q| {
                    let cp = a.column(p).dot(&a.column(p));
                    let cq = a.column(q).dot(&a.column(q));
                    cp.partial_cmp(&cq).unwrap()
                })
                .unwrap();
            if a.column(heaviest).dot(&a.column(heaviest)) == 0.0 {
                return 0.0;
            }
            v.fill(0.0);
            v[heaviest] = 1.0;
            i = 0;
            continue;
        }
        v = u / norm;
        i += 1;
    }
    let w = a.dot(&v);
    w.dot(&w).sqrt()
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// Returns None if a pivot is not strictly positive.
pub fn cholesky(a: ArrayView2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        l[[j, j]] = dj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / dj;
        }
    }
    Some(l)
}

/// Solves L Lᵀ x = b given the lower Cholesky factor.
pub fn cholesky_solve(l: &Array2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Minimizes ‖z − Φx‖² + ridge·‖x‖² via the normal equations.
///
/// The ridge keeps ΦᵀΦ positive definite under rank deficiency; callers pick
/// it small enough not to perturb the solution at the precision they compare.
pub fn ridge_least_squares(phi: ArrayView2<f64>, z: ArrayView1<f64>, ridge: f64) -> Array1<f64> {
    let n = phi.ncols();
    let mut gram = phi.t().dot(&phi);
    for i in 0..n {
        gram[[i, i]] += ridge;
    }
    let rhs = phi.t().dot(&z);
    let l = cholesky(gram.view())
        .expect("ridge-regularized normal equations must be positive definite");
    cholesky_solve(&l, rhs.view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn spectral_norm_of_diagonal_is_max_abs_entry() {
        let a = array![[3.0, 0.0, 0.0], [0.0, -7.0, 0.0], [0.0, 0.0, 2.0]];
        assert_relative_eq!(spectral_norm(a.view(), 100, 1), 7.0, max_relative = 1e-10);
    }

    #[test]
    fn spectral_norm_of_rank_one_is_product_of_norms() {
        // A = u vᵀ has a single nonzero singular value ‖u‖·‖v‖
        let u = array![1.0, 2.0, -2.0]; // norm 3
        let v = array![3.0, 4.0]; // norm 5
        let mut a = Array2::<f64>::zeros((3, 2));
        for i in 0..3 {
            for j in 0..2 {
                a[[i, j]] = u[i] * v[j];
            }
        }
        assert_relative_eq!(spectral_norm(a.view(), 100, 2), 15.0, max_relative = 1e-10);
    }

    #[test]
    fn spectral_norm_two_by_two_closed_form() {
        // For A = [[a,b],[c,d]], sigma_max^2 is the larger eigenvalue of AᵀA.
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let g = a.t().dot(&a);
        let tr: f64 = g[[0, 0]] + g[[1, 1]];
        let det: f64 = g[[0, 0]] * g[[1, 1]] - g[[0, 1]] * g[[1, 0]];
        let lam = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
        assert_relative_eq!(
            spectral_norm(a.view(), 100, 3),
            lam.sqrt(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn spectral_norm_scales_linearly() {
        let a = array![[0.5, -1.0, 2.0], [1.5, 0.0, -0.25]];
        let s1 = spectral_norm(a.view(), 100, 4);
        let s3 = spectral_norm((&a * 3.0).view(), 100, 4);
        assert_relative_eq!(s3, 3.0 * s1, max_relative = 1e-9);
    }

    #[test]
    fn spectral_norm_of_zero_matrix_is_zero() {
        let a = Array2::<f64>::zeros((4, 3));
        assert_eq!(spectral_norm(a.view(), 100, 5), 0.0);
    }

    #[test]
    fn spectral_norm_nilpotent() {
        // [[0,1],[0,0]] has sigma_max = 1 even though all eigenvalues are 0.
        let a = array![[0.0, 1.0], [0.0, 0.0]];
        assert_relative_eq!(spectral_norm(a.view(), 100, 6), 1.0, max_relative = 1e-10);
    }

    #[test]
    fn cholesky_round_trip() {
        let b = array![[1.0, 2.0, 0.5], [-1.0, 0.3, 2.0], [0.7, -0.2, 1.1]];
        let mut a = b.t().dot(&b);
        for i in 0..3 {
            a[[i, i]] += 1.0;
        }
        let l = cholesky(a.view()).expect("SPD");
        let back = l.dot(&l.t());
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(back[[i, j]], a[[i, j]], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]]; // eigenvalues 3 and -1
        assert!(cholesky(a.view()).is_none());
    }

    #[test]
    fn cholesky_solve_matches_direct_inverse() {
        let a = array![[4.0, 1.0], [1.0, 3.0]];
        let b = array![1.0, 2.0];
        // direct 2x2 inverse
        let det = 4.0 * 3.0 - 1.0;
        let expected = array![(3.0 * 1.0 - 1.0 * 2.0) / det, (4.0 * 2.0 - 1.0 * 1.0) / det];
        let l = cholesky(a.view()).unwrap();
        let x = cholesky_solve(&l, b.view());
        assert_relative_eq!(x[0], expected[0], max_relative = 1e-12);
        assert_relative_eq!(x[1], expected[1], max_relative = 1e-12);
    }

    #[test]
    fn ridge_least_squares_recovers_exact_solution() {
        // Tall consistent system: z = Phi * alpha_true exactly.
        let phi = array![[1.0, 0.0], [0.0, 2.0], [1.0, 1.0], [2.0, -1.0]];
        let alpha_true = array![0.5, -1.25];
        let z = phi.dot(&alpha_true);
        let alpha = ridge_least_squares(phi.view(), z.view(), 1e-12);
        assert_relative_eq!(alpha[0], alpha_true[0], epsilon = 1e-9);
        assert_relative_eq!(alpha[1], alpha_true[1], epsilon = 1e-9);
    }

    #[test]
    fn ridge_least_squares_handles_duplicate_columns() {
        // Rank-deficient design: identical columns; ridge picks the minimum
        // norm solution, which splits the weight evenly.
        let phi = array![[1.0, 1.0], [2.0, 2.0]];
        let z = array![2.0, 4.0]; // = 2 * col
        let alpha = ridge_least_squares(phi.view(), z.view(), 1e-12);
        // the tiny ridge leaves the normal equations with condition ~1e12,
        // so the even split is only accurate to ~1e-4; the fit itself is tight
        assert_relative_eq!(alpha[0], 1.0, epsilon = 1e-2);
        assert_relative_eq!(alpha[1], 1.0, epsilon = 1e-2);
        let fit = phi.dot(&alpha);
        assert_relative_eq!(fit[0], 2.0, epsilon = 1e-6);
        assert_relative_eq!(fit[1], 4.0, epsilon = 1e-6);
    }
}
