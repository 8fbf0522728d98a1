//! Small dense symmetric kernels: cyclic Jacobi eigendecomposition, Cholesky,
//! and least squares with dependent-column detection. Matrices here are tiny
//! (conditioning sets, selected-column blocks, covariate correlation matrices),
//! so simplicity and determinism win over asymptotics.

use ndarray::{Array1, Array2};

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues ascending with matching eigenvector columns: a = V Λ Vᵀ.
pub fn sym_eigen(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "sym_eigen needs a square matrix");
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-15 * frob.max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let mip = m[[i, p]];
                    let miq = m[[i, q]];
                    m[[i, p]] = c * mip - s * miq;
                    m[[i, q]] = s * mip + c * miq;
                }
                for j in 0..n {
                    let mpj = m[[p, j]];
                    let mqj = m[[q, j]];
                    m[[p, j]] = c * mpj - s * mqj;
                    m[[q, j]] = s * mpj + c * mqj;
                }
                for i in 0..n {
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = c * vip - s * viq;
                    v[[i, q]] = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).unwrap());
    let vals = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vecs[[i, dst]] = v[[i, src]];
        }
    }
    (vals, vecs)
}

/// Symmetric positive semi-definite square root via eigendecomposition.
/// Eigenvalues within rounding of zero are clamped to zero.
pub fn sym_sqrt(a: &Array2<f64>) -> Array2<f64> {
    let (vals, vecs) = sym_eigen(a);
    let n = a.nrows();
    debug_assert!(
        vals.iter().all(|&l| l > -1e-8 * vals[n - 1].abs().max(1.0)),
        "sym_sqrt expects a positive semi-definite matrix"
    );
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        let r = l.max(0.0).sqrt();
        for i in 0..n {
            scaled[[i, j]] *= r;
        }
    }
    scaled.dot(&vecs.t())
}

/// Ratio of the smallest to the largest singular value of a rectangular matrix,
/// computed from the eigenvalues of aᵀa. Used for rank checks.
pub fn singular_value_ratio(a: &Array2<f64>) -> f64 {
    let g = a.t().dot(a);
    let (vals, _) = sym_eigen(&g);
    let max = vals[vals.len() - 1].max(0.0);
    if max == 0.0 {
        return 0.0;
    }
    (vals[0].max(0.0) / max).sqrt()
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug)]
pub struct SpdFactor {
    l: Array2<f64>,
}

/// Factor a symmetric positive definite matrix; `Err(k)` names the first
/// column whose pivot is not strictly positive.
pub fn spd_factor(a: &Array2<f64>) -> Result<SpdFactor, usize> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "spd_factor needs a square matrix");
    let mut l = Array2::<f64>::zeros((n, n));
    for k in 0..n {
        let mut d = a[[k, k]];
        for j in 0..k {
            d -= l[[k, j]] * l[[k, j]];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(k);
        }
        let dk = d.sqrt();
        l[[k, k]] = dk;
        for i in (k + 1)..n {
            let mut s = a[[i, k]];
            for j in 0..k {
                s -= l[[i, j]] * l[[k, j]];
            }
            l[[i, k]] = s / dk;
        }
    }
    Ok(SpdFactor { l })
}

impl SpdFactor {
    /// Solve a x = b given the factorization of a.
    pub fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        let n = self.l.nrows();
        assert_eq!(b.len(), n, "rhs length must match factor dimension");
        let mut y = b.clone();
        for i in 0..n {
            for j in 0..i {
                let yj = y[j];
                y[i] -= self.l[[i, j]] * yj;
            }
            y[i] /= self.l[[i, i]];
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let yj = y[j];
                y[i] -= self.l[[j, i]] * yj;
            }
            y[i] /= self.l[[i, i]];
        }
        y
    }
}

/// Relative tolerance below which a column counts as linearly dependent on
/// the columns before it (rank checks and least-squares pivoting).
pub const RANK_TOL: f64 = 1e-10;

/// Orthonormal basis of the column span, computed by modified Gram-Schmidt
/// with one reorthogonalization pass (enough for machine-precision
/// orthogonality). `Err(k)` means column k is linearly dependent on the
/// columns before it: its residual norm fell below `RANK_TOL` of its
/// original norm.
pub fn orthonormal_basis(z: &Array2<f64>) -> Result<Array2<f64>, usize> {
    let (t, m) = z.dim();
    let mut q = z.clone();
    for k in 0..m {
        let orig: f64 = (0..t).map(|i| z[[i, k]] * z[[i, k]]).sum::<f64>().sqrt();
        for _ in 0..2 {
            for j in 0..k {
                let proj: f64 = (0..t).map(|i| q[[i, j]] * q[[i, k]]).sum();
                for i in 0..t {
                    q[[i, k]] -= proj * q[[i, j]];
                }
            }
        }
        let norm: f64 = (0..t).map(|i| q[[i, k]] * q[[i, k]]).sum::<f64>().sqrt();
        if norm <= RANK_TOL * orig.max(f64::MIN_POSITIVE) {
            return Err(k);
        }
        for i in 0..t {
            q[[i, k]] /= norm;
        }
    }
    Ok(q)
}

/// Least squares via normal equations, reporting every column whose pivot
/// collapses during elimination (the dependent columns) instead of solving a
/// rank-deficient system.
pub fn least_squares(w: &Array2<f64>, y: &Array1<f64>) -> Result<Array1<f64>, Vec<usize>> {
    let n = w.ncols();
    assert_eq!(w.nrows(), y.len(), "design rows must match target length");
    let g = w.t().dot(w);
    let b = w.t().dot(y);
    let mut l = Array2::<f64>::zeros((n, n));
    let mut active = vec![true; n];
    let mut dependent = Vec::new();
    for k in 0..n {
        let mut d = g[[k, k]];
        for j in 0..k {
            if active[j] {
                d -= l[[k, j]] * l[[k, j]];
            }
        }
        if d <= RANK_TOL * g[[k, k]].max(f64::MIN_POSITIVE) {
            active[k] = false;
            dependent.push(k);
            continue;
        }
        let dk = d.sqrt();
        l[[k, k]] = dk;
        for i in (k + 1)..n {
            let mut s = g[[i, k]];
            for j in 0..k {
                if active[j] {
                    s -= l[[i, j]] * l[[k, j]];
                }
            }
            l[[i, k]] = s / dk;
        }
    }
    if !dependent.is_empty() {
        return Err(dependent);
    }
    let factor = SpdFactor { l };
    Ok(factor.solve(&b))
}
