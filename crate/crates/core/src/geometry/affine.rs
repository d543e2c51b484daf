//! Closest point of an affine hull to a reference point.
//!
//! Coefficients are parametrized as `alpha = 1/k + N g` where the columns of
//! `N` are an orthonormal (Helmert) basis of the sum-zero subspace, so the
//! affine constraint holds by construction. The reduced least-squares problem
//! in `g` is solved through an SVD pseudo-inverse; when the point set is
//! affinely dependent this yields the minimum-norm `alpha`.

use nalgebra::DMatrix;

use super::{GeometryError, MeasurementVec};

/// Gram eigenvalues below this fraction of the largest are treated as zero.
pub const GRAM_RELATIVE_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct AffineSolveResult {
    pub minimizer: MeasurementVec,
    /// Affine coefficients: may be negative, sum to one.
    pub weights: Vec<f64>,
    /// Affine dimension of the point set as seen by the solve (`k - 1` when
    /// the points are affinely independent).
    pub rank: usize,
    /// Sum-zero coefficient directions `d` with `sum_i d_i p_i ~ 0`; empty when
    /// the points are affinely independent.
    pub null_directions: Vec<Vec<f64>>,
}

impl AffineSolveResult {
    pub fn is_affinely_independent(&self) -> bool {
        self.null_directions.is_empty()
    }
}

/// Column `j` (0-based, `j < k - 1`) of the Helmert basis of `{a : sum a = 0}`.
fn helmert(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k - 1, |i, j| {
        let n = (j + 1) as f64;
        let scale = 1.0 / (n * (n + 1.0)).sqrt();
        if i <= j {
            scale
        } else if i == j + 1 {
            -n * scale
        } else {
            0.0
        }
    })
}

/// Minimizes `|sum_i a_i p_i - origin|` subject to `sum_i a_i = 1`.
pub fn affine_minimizer(
    points: &[MeasurementVec],
    origin: &MeasurementVec,
) -> Result<AffineSolveResult, GeometryError> {
    let Some(first) = points.first() else {
        return Err(GeometryError::EmptyPointSet);
    };
    let m = origin.len();
    if let Some(bad) = points.iter().find(|p| p.len() != m) {
        return Err(GeometryError::DimensionMismatch {
            expected: m,
            found: bad.len(),
        });
    }
    let k = points.len();
    if k == 1 {
        return Ok(AffineSolveResult {
            minimizer: first.clone(),
            weights: vec![1.0],
            rank: 0,
            null_directions: Vec::new(),
        });
    }

    // Origin-centered points as columns.
    let centered = DMatrix::from_fn(m, k, |r, c| points[c][r] - origin[r]);
    let basis = helmert(k);
    let reduced = &centered * &basis;
    let barycenter = centered.column_sum() / k as f64;

    let svd = reduced.svd(true, true);
    let sigma_max = svd.singular_values.max();
    let cutoff = sigma_max * GRAM_RELATIVE_TOL.sqrt();
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let u = svd.u.as_ref().expect("u requested");

    // g = -pinv(reduced) * barycenter
    let mut g = nalgebra::DVector::<f64>::zeros(k - 1);
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            let coeff = -u.column(i).dot(&barycenter) / s;
            g += v_t.row(i).transpose() * coeff;
        }
    }
    // Right singular vectors of dropped singular values, plus any directions
    // beyond min(m, k - 1) that the thin SVD does not return.
    let mut null_directions = Vec::new();
    if rank < k - 1 {
        let mut kept: Vec<nalgebra::DVector<f64>> = Vec::new();
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if s > cutoff && s > 0.0 {
                kept.push(v_t.row(i).transpose());
            }
        }
        let mut nulls: Vec<nalgebra::DVector<f64>> = Vec::new();
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if !(s > cutoff && s > 0.0) {
                nulls.push(v_t.row(i).transpose());
            }
        }
        // Complete the basis with Gram-Schmidt over unit vectors.
        for j in 0..k - 1 {
            if kept.len() + nulls.len() == k - 1 {
                break;
            }
            let mut e = nalgebra::DVector::<f64>::zeros(k - 1);
            e[j] = 1.0;
            for b in kept.iter().chain(nulls.iter()) {
                let proj = b.dot(&e);
                e -= b * proj;
            }
            let n = e.norm();
            if n > 1e-8 {
                nulls.push(e / n);
            }
        }
        for dir in nulls {
            null_directions.push((&basis * dir).iter().copied().collect());
        }
    }

    let alpha = basis * g + nalgebra::DVector::from_element(k, 1.0 / k as f64);
    let mut minimizer = MeasurementVec::zeros(m);
    for (p, &a) in points.iter().zip(alpha.iter()) {
        minimizer.axpy(a, p, 1.0);
    }
    Ok(AffineSolveResult {
        minimizer,
        weights: alpha.iter().copied().collect(),
        rank,
        null_directions,
    })
}
