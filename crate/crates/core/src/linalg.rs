//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Standard-normal `rows x cols` matrix.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    // column-major fill keeps draws reproducible regardless of shape changes elsewhere
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
pub fn random_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    let qr = gaussian_matrix(dim, dim, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..dim {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// Singular values, unordered.
pub fn singular_values(p: &DMatrix<f64>) -> DVector<f64> {
    if p.is_empty() {
        return DVector::zeros(0);
    }
    p.clone().svd(false, false).singular_values
}

/// Unit vector spanning the direction of smallest singular value of `p`
/// (a null vector when `p` is column-rank deficient).
pub fn smallest_right_singular_vector(p: &DMatrix<f64>) -> DVector<f64> {
    let cols = p.ncols();
    // pad wide matrices so the SVD returns a full set of right singular vectors
    let padded = if p.nrows() < cols {
        let mut m = DMatrix::zeros(cols, cols);
        m.view_mut((0, 0), p.shape()).copy_from(p);
        m
    } else {
        p.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, &s)| if s < best.1 { (i, s) } else { best });
    let v = v_t.row(idx).transpose();
    let norm = v.norm();
    v / norm
}

/// `max |QᵀQ − I|`.
pub fn orthogonality_defect(q: &DMatrix<f64>) -> f64 {
    let gram = q.transpose() * q;
    (gram - DMatrix::identity(q.ncols(), q.ncols())).abs().max()
}

/// Ratio of smallest to largest singular value; 0 for singular input.
pub fn inverse_condition(w: &DMatrix<f64>) -> f64 {
    let s = singular_values(w);
    let max = s.max();
    if max == 0.0 {
        0.0
    } else {
        s.min() / max
    }
}
