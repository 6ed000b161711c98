//! Finite generalized eigenvalues of real matrix pencils `(A, E)` with
//! possibly singular `E`, computed by shift-and-invert reduction to a
//! standard eigenvalue problem.
//!
//! For a shift `σ` with `A − σE` invertible, `μ` is an eigenvalue of
//! `G = (A − σE)⁻¹E` exactly when the pencil has the eigenvalue
//! `s = σ + 1/μ`; infinite pencil eigenvalues map to `μ = 0`. This keeps the
//! whole pole/zero machinery on real dense matrices, where the Francis QR
//! iteration is available, instead of requiring a QZ decomposition.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::C64;

/// Relative magnitude below which a shift-inverted eigenvalue is classified
/// as an infinite pencil eigenvalue. Defective infinite modes (Jordan blocks
/// at infinity, which these descriptor pencils carry generically) perturb
/// like √ε under the inversion, so the cutoff must sit well above 1e-8; a
/// pencil eigenvalue is treated as finite only within radius 10⁶ of the
/// shift scale.
const INF_CLASS_TOL: f64 = 1e-6;

/// Deterministic shift ladder, scaled by the pencil magnitude. The constants
/// are spread irrationally so that coincidence with an exact eigenvalue on
/// retry is implausible.
const SHIFT_SEEDS: [f64; 7] = [
    0.618_033_988_749_895,
    -1.324_717_957_244_746,
    2.414_213_562_373_095,
    -0.366_025_403_784_439,
    3.302_775_637_731_995,
    -2.148_202_828_356_6,
    5.192_582_403_567_252,
];

#[derive(Debug, Clone)]
pub struct PencilEigs {
    /// Finite eigenvalues, unordered.
    pub finite: Vec<C64>,
    /// Count of eigenvalues classified infinite.
    pub infinite_count: usize,
}

/// Computes the finite eigenvalues of the pencil `(A, E)`.
pub fn pencil_eigenvalues(a: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<PencilEigs> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!((e.nrows(), e.ncols()), (n, n));

    let scale = {
        let na = a.norm();
        let ne = e.norm().max(f64::MIN_POSITIVE);
        (na / ne).max(1.0)
    };

    let mut last_err = String::from("no shift attempted");
    for seed in SHIFT_SEEDS {
        let sigma = seed * scale;
        let shifted = a - e * sigma;
        let lu = shifted.lu();
        if !lu_is_well_conditioned(&lu) {
            last_err = format!("shift {sigma:.3e} left a near-singular matrix");
            continue;
        }
        let g = match lu.solve(e) {
            Some(g) => g,
            None => {
                last_err = format!("LU solve failed at shift {sigma:.3e}");
                continue;
            }
        };
        let schur = match nalgebra::linalg::Schur::try_new(g, f64::EPSILON, 200 * n.max(10)) {
            Some(s) => s,
            None => {
                last_err = format!("Schur iteration stalled at shift {sigma:.3e}");
                continue;
            }
        };
        let mus = schur.complex_eigenvalues();

        // μ ≈ 0 is an infinite pencil eigenvalue.
        let mut finite = Vec::with_capacity(n);
        let mut infinite_count = 0usize;
        for mu in mus.iter() {
            if mu.norm() * (1.0 + sigma.abs()) < INF_CLASS_TOL {
                infinite_count += 1;
            } else {
                finite.push(C64::new(sigma, 0.0) + 1.0 / mu);
            }
        }
        return Ok(PencilEigs { finite, infinite_count });
    }
    Err(Error::numerical(format!(
        "pencil eigenvalue computation failed: {last_err}"
    )))
}

fn lu_is_well_conditioned(lu: &nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> bool {
    let u = lu.u();
    let n = u.nrows().min(u.ncols());
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0_f64;
    for i in 0..n {
        let d = u[(i, i)].abs();
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    dmax.is_finite() && dmax > 0.0 && dmin / dmax > 1e-13
}

/// Eigenvalues of a real square matrix (standard problem), as complex pairs.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    let n = m.nrows();
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 200 * n.max(10))
        .ok_or_else(|| Error::numerical("Schur iteration did not converge"))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_eigenproblem_recovers_known_spectrum() {
        // E = I: pencil eigenvalues are ordinary eigenvalues.
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]); // eigs -1, -2
        let e = DMatrix::identity(2, 2);
        let res = pencil_eigenvalues(&a, &e).unwrap();
        assert_eq!(res.infinite_count, 0);
        let mut re: Vec<f64> = res.finite.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 2.0).abs() < 1e-10 && (re[1] + 1.0).abs() < 1e-10);
        assert!(res.finite.iter().all(|z| z.im.abs() < 1e-10));
    }

    #[test]
    fn singular_e_yields_infinite_eigenvalues() {
        // x' = -x plus an algebraic constraint: one finite eigenvalue at -1,
        // one infinite.
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let e = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let res = pencil_eigenvalues(&a, &e).unwrap();
        assert_eq!(res.infinite_count, 1);
        assert_eq!(res.finite.len(), 1);
        assert!((res.finite[0] - C64::new(-1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn complex_pair_is_conjugate_closed() {
        // Rotation block: eigenvalues ±3j.
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, -3.0, 0.0]);
        let e = DMatrix::identity(2, 2);
        let res = pencil_eigenvalues(&a, &e).unwrap();
        let mut im: Vec<f64> = res.finite.iter().map(|z| z.im).collect();
        im.sort_by(f64::total_cmp);
        assert!((im[0] + 3.0).abs() < 1e-10 && (im[1] - 3.0).abs() < 1e-10);
    }
}
