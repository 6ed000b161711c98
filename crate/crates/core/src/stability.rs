//! Stability machinery for barycentric models: the minimal real realization
//! of the denominator `D(s)`, its SVD-based change of coordinates, pole-based
//! stability classification, and strict-positive-realness certificates for
//! closed-loop denominators.
//!
//! The connection used throughout: the model `Ĥ = N/D` is asymptotically
//! stable exactly when `D` is minimum phase (all zeros in the open left half
//! plane), and a strictly proper `D` with `𝒞ℬ > 0` is minimum phase exactly
//! when some constant output feedback `g` makes `D/(1+gD)` strictly positive
//! real.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::Serialize;

use crate::barycentric::{self, BarycentricModel, PoleSet};
use crate::eig;
use crate::error::{Error, Result};
use crate::loewner::RealQuasiLoewner;
use crate::sdp::solver::{
    Block, ScalarCoeff, SdpProblem, SolveStatus, SolverSettings, YMap,
};
use crate::C64;

/// Minimal real state-space realization of the denominator:
/// `D(s) = C (sI − A)⁻¹ B` with `A` block-diagonal skew (2×2 rotation blocks
/// `[[0, λᵢ], [−λᵢ, 0]]`), `B` stacking `[2, 0]ᵀ`, and
/// `C = [α₁, β₁, …, α_k, β_k]` holding the weight components.
#[derive(Debug, Clone)]
pub struct DenominatorRealization {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
}

impl DenominatorRealization {
    /// `𝒞ℬ = 2Σαᵢ`, the sum of the residues of `D`.
    pub fn cb(&self) -> f64 {
        (&self.c * &self.b)[(0, 0)]
    }

    /// Transfer function `C(sI − A)⁻¹B`.
    pub fn transfer(&self, s: C64) -> Result<C64> {
        let n = self.a.nrows();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { s } else { C64::new(0.0, 0.0) };
            d - C64::new(self.a[(i, j)], 0.0)
        });
        let b = self.b.map(|x| C64::new(x, 0.0));
        let x = m
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::numerical(format!("sI - A singular at {s}")))?;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            acc += C64::new(self.c[i], 0.0) * x[i];
        }
        Ok(acc)
    }
}

/// Builds the structured minimal realization of `D(s)` for a model of order
/// `k ≥ 1`.
pub fn build_denominator_realization(m: &BarycentricModel) -> Result<DenominatorRealization> {
    let k = m.order();
    if k == 0 {
        return Err(Error::validation("denominator realization requires k >= 1"));
    }
    let n = 2 * k;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    let mut c = RowDVector::zeros(n);
    for i in 0..k {
        let l = m.support()[i];
        a[(2 * i, 2 * i + 1)] = l;
        a[(2 * i + 1, 2 * i)] = -l;
        b[2 * i] = 2.0;
        c[2 * i] = m.weights()[i].re;
        c[2 * i + 1] = m.weights()[i].im;
    }
    Ok(DenominatorRealization { a, b, c })
}

/// The denominator realization pushed through the coordinates of the
/// least-squares matrix: `T = VΣ` from the thin SVD `𝕃_real = UΣVᵀ`,
/// `Ã = T⁻¹𝒜T`, `B̃ = T⁻¹ℬ`, and the target `x̄ = ΣVᵀx_opt`.
#[derive(Debug, Clone)]
pub struct TransformedDenominator {
    pub a_t: DMatrix<f64>,
    pub b_t: DVector<f64>,
    /// `ΣVᵀ x_opt`; its norm equals `‖𝕃_real x_opt‖₂`.
    pub xbar: DVector<f64>,
    /// Right singular vectors of `𝕃_real` (2k×2k orthogonal).
    pub v: DMatrix<f64>,
    /// Singular values of `𝕃_real`, descending.
    pub sigma: DVector<f64>,
    /// Left singular vectors, retained for diagnostics.
    pub u: DMatrix<f64>,
}

impl TransformedDenominator {
    pub fn dim(&self) -> usize {
        self.a_t.nrows()
    }

    /// Recovers `C` from `C̃` through `C = C̃ Σ⁻¹ Vᵀ`.
    pub fn back_transform_c(&self, c_tilde: &DVector<f64>) -> DVector<f64> {
        let scaled = DVector::from_fn(c_tilde.len(), |i, _| c_tilde[i] / self.sigma[i]);
        // C̃ Σ⁻¹ Vᵀ as a column vector: V (Σ⁻¹ C̃ᵀ)
        &self.v * scaled
    }
}

/// Computes the `T = VΣ` change of coordinates. Fails when `𝕃_real` is rank
/// deficient beyond `σ_min/σ_max ≤ 10⁻¹⁴` (the transform then has no usable
/// inverse and stability enforcement cannot proceed).
pub fn transform_denominator(
    den: &DenominatorRealization,
    quasi: &RealQuasiLoewner,
    x_opt: &DVector<f64>,
) -> Result<TransformedDenominator> {
    let n = den.a.nrows();
    if quasi.matrix().ncols() != n || x_opt.len() != n {
        return Err(Error::validation(format!(
            "dimension mismatch: realization {n}, LS matrix {} cols, x_opt {}",
            quasi.matrix().ncols(),
            x_opt.len()
        )));
    }
    let svd = quasi
        .matrix()
        .clone()
        .try_svd(true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::numerical("SVD of quasi-Loewner matrix failed"))?;
    let sigma = DVector::from_iterator(svd.singular_values.len(), svd.singular_values.iter().copied());
    let smax = sigma[0];
    let smin = sigma[sigma.len() - 1];
    if !(smin > 0.0) || smin / smax <= 1e-14 {
        return Err(Error::Conditioning(format!(
            "quasi-Loewner matrix numerically rank deficient: sigma_min/sigma_max = {:.3e}",
            smin / smax
        )));
    }
    let v_t = svd.v_t.expect("requested V^T");
    let u = svd.u.expect("requested U");
    let v = v_t.transpose();

    // T = VΣ, so T⁻¹ = Σ⁻¹Vᵀ.
    let vt_a_v = v_t.clone() * &den.a * &v;
    let a_t = DMatrix::from_fn(n, n, |i, j| vt_a_v[(i, j)] * sigma[j] / sigma[i]);
    let vt_b = v_t.clone() * &den.b;
    let b_t = DVector::from_fn(n, |i, _| vt_b[i] / sigma[i]);
    let vt_x = v_t * x_opt;
    let xbar = DVector::from_fn(n, |i, _| sigma[i] * vt_x[i]);

    Ok(TransformedDenominator { a_t, b_t, xbar, v, sigma, u })
}

/// Outcome of pole-based stability classification.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub stable: bool,
    pub finite_poles: PoleSet,
    /// Poles with nonnegative real part.
    pub unstable_poles: Vec<C64>,
    /// `max Re` over the finite poles.
    pub margin: f64,
    /// Sign of `𝒞ℬ` (+1, −1, or 0).
    pub cb_sign: i8,
    /// True when the achieved pole count is the generic `2k − 1`; when
    /// false, minimum phase of `D` is still sufficient for stability but no
    /// longer necessary, and the classification is conservative.
    pub generic_pole_count: bool,
    /// Poles with `|Re| < 10⁻¹⁰`, flagged for attention.
    pub borderline_poles: Vec<C64>,
}

impl StabilityReport {
    /// Diagnostics as JSON (`{stable, margin, poles, cb}` plus flags).
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema: u32,
            stable: bool,
            margin: f64,
            poles: Vec<[f64; 2]>,
            cb: i8,
            generic_pole_count: bool,
            borderline: &'a Vec<[f64; 2]>,
        }
        let borderline = self.borderline_poles.iter().map(|p| [p.re, p.im]).collect();
        serde_json::to_string_pretty(&Doc {
            schema: 1,
            stable: self.stable,
            margin: self.margin,
            poles: self.finite_poles.finite_poles.iter().map(|p| [p.re, p.im]).collect(),
            cb: self.cb_sign,
            generic_pole_count: self.generic_pole_count,
            borderline: &borderline,
        })
        .expect("serialization cannot fail")
    }
}

/// Classifies a model as asymptotically stable iff every finite pole has a
/// strictly negative real part. No tolerance slack is applied to the
/// decision; borderline poles (`|Re| < 10⁻¹⁰`) are reported separately.
pub fn classify_stability(m: &BarycentricModel) -> Result<StabilityReport> {
    let k = m.order();
    if k == 0 {
        return Err(Error::validation("stability classification requires k >= 1"));
    }
    let ps = barycentric::poles(m)?;
    let margin = ps.stability_margin();
    let unstable: Vec<C64> = ps.finite_poles.iter().copied().filter(|p| p.re >= 0.0).collect();
    let borderline: Vec<C64> = ps
        .finite_poles
        .iter()
        .copied()
        .filter(|p| p.re.abs() < 1e-10)
        .collect();
    let den = build_denominator_realization(m)?;
    let cb = den.cb();
    Ok(StabilityReport {
        stable: margin < 0.0,
        generic_pole_count: ps.finite_poles.len() == 2 * k - 1,
        unstable_poles: unstable,
        margin,
        cb_sign: if cb > 0.0 {
            1
        } else if cb < 0.0 {
            -1
        } else {
            0
        },
        borderline_poles: borderline,
        finite_poles: ps,
    })
}

// ---------------------------------------------------------------------------
// SPR feasibility certificates
// ---------------------------------------------------------------------------

/// A positive-real-lemma certificate for the closed loop `(A − gBC, B, C)`:
/// a symmetric `P ≻ 0` with `(A−gBC)ᵀP + P(A−gBC) ≺ 0` and `PB = Cᵀ`.
#[derive(Debug, Clone)]
pub struct SprCertificate {
    pub p: DMatrix<f64>,
    pub g: f64,
    /// Margin achieved: `min(eig_min(P), eig_min(−AᵀP − PA)/ρ)` where ρ
    /// scales the Lyapunov block.
    pub margin: f64,
    /// `‖PB − Cᵀ‖∞` of the returned certificate.
    pub equality_residual: f64,
    /// Most negative eigenvalue of the Lyapunov residual `A_clᵀP + PA_cl`.
    pub lyapunov_eig_max: f64,
}

/// Result of an SPR feasibility check.
#[derive(Debug, Clone)]
pub enum SprOutcome {
    Feasible(SprCertificate),
    Infeasible { reason: String },
}

impl SprOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SprOutcome::Feasible(_))
    }
}

/// Equality tolerance on `PB = Cᵀ` (relative to `‖C‖`).
const EQ_TOL: f64 = 1e-8;

/// Checks whether output feedback `g` renders `(A, B, C)` strictly positive
/// real, by solving the KYP feasibility problem for the closed loop
/// `(A − gBC, B, C)`. The closed loop being Hurwitz is not presumed; it is
/// checked first, and `CB > 0` is required for a feasible verdict.
pub fn verify_spr(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &RowDVector<f64>,
    g: f64,
) -> Result<SprOutcome> {
    let n = a.nrows();
    if b.len() != n || c.len() != n {
        return Err(Error::validation("system dimensions disagree"));
    }
    let cb = (c * b)[(0, 0)];
    if cb <= 0.0 {
        return Ok(SprOutcome::Infeasible {
            reason: format!("CB = {cb:.3e} is not positive"),
        });
    }
    // closed loop A_cl = A - g B C
    let a_cl = a - b * c * g;
    let eigs = eig::eigenvalues(&a_cl)?;
    let max_re = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re >= 0.0 {
        return Ok(SprOutcome::Infeasible {
            reason: format!("closed loop not Hurwitz (max Re eig = {max_re:.3e})"),
        });
    }

    let rho = a_cl.norm().max(1.0);
    let c_scale = c.norm().max(1e-30);
    let eq_tol = EQ_TOL * c_scale;

    // Feasibility with maximal margin µ:
    //   P − µI ⪰ 0
    //   −(A_clᵀP + P A_cl) − µρI ⪰ 0
    //   |(PB − Cᵀ)_r| ≤ eq_tol        (2n one-dimensional blocks)
    //   µ ≤ µ_cap
    // Variables: svec(P) then µ; objective min −µ.
    let mu_cap = 1e6 * c_scale;
    let mut blocks = Vec::new();
    blocks.push(Block {
        dim: n,
        h: DMatrix::zeros(n, n),
        y_map: Some(YMap::Identity),
        scalars: vec![(0, ScalarCoeff::ScaledIdentity(-1.0))],
    });
    blocks.push(Block {
        dim: n,
        h: DMatrix::zeros(n, n),
        // A(P) = −(GP + PGᵀ) with G = A_clᵀ gives −(A_clᵀP + PA_cl)
        y_map: Some(YMap::Lyapunov(a_cl.transpose())),
        scalars: vec![(0, ScalarCoeff::ScaledIdentity(-rho))],
    });
    // (PB)_r = Σ_{p≤q} P_pq (E_pq B)_r is linear in svec(P); encode each row
    // bound as a 1×1 block via the low-rank pair form of E_pq B readouts.
    for r in 0..n {
        for sign in [1.0, -1.0] {
            // sign·((PB)_r − C_r) ≤ eq_tol  ⇔  eq_tol + sign·C_r − sign·(PB)_r ⪰ 0
            blocks.push(Block {
                dim: 1,
                h: DMatrix::from_element(1, 1, eq_tol + sign * c[r]),
                y_map: Some(YMap::RowFunctional {
                    weights: b.clone(),
                    row: r,
                    scale: -sign,
                }),
                scalars: Vec::new(),
            });
        }
    }
    blocks.push(Block {
        dim: 1,
        h: DMatrix::from_element(1, 1, mu_cap),
        y_map: None,
        scalars: vec![(0, ScalarCoeff::ScaledIdentity(-1.0))],
    });

    let n_sym = n * (n + 1) / 2;
    let mut objective = vec![0.0; n_sym + 1];
    objective[n_sym] = -1.0; // maximize µ
    let problem = SdpProblem {
        y_dim: n,
        num_scalars: 1,
        objective,
        blocks,
    };
    let settings = SolverSettings {
        tol_gap: 1e-8,
        tol_feas: 1e-7,
        max_iters: 150,
        ..SolverSettings::default()
    };
    let out = crate::sdp::solver::solve(&problem, &settings)?;
    let mu = out.x[n_sym];
    match out.status {
        SolveStatus::Optimal | SolveStatus::MaxIters if mu > 0.0 => {
            let p = out.y_mat.clone().expect("problem has a matrix variable");
            // Independent eigenvalue re-check of both LMIs.
            let p_eig_min = nalgebra::SymmetricEigen::new(p.clone()).eigenvalues.min();
            let lyap = a_cl.transpose() * &p + &p * &a_cl;
            let lyap_eig_max = nalgebra::SymmetricEigen::new(lyap).eigenvalues.max();
            let eq_res = {
                let pb = &p * b;
                (0..n).map(|r| (pb[r] - c[r]).abs()).fold(0.0_f64, f64::max)
            };
            if p_eig_min <= 0.0 || lyap_eig_max >= 0.0 || eq_res > 10.0 * eq_tol {
                return Ok(SprOutcome::Infeasible {
                    reason: format!(
                        "certificate failed re-check: eig_min(P) = {p_eig_min:.3e}, \
                         eig_max(lyap) = {lyap_eig_max:.3e}, eq residual = {eq_res:.3e}"
                    ),
                });
            }
            Ok(SprOutcome::Feasible(SprCertificate {
                p,
                g,
                margin: p_eig_min.min(-lyap_eig_max / rho),
                equality_residual: eq_res,
                lyapunov_eig_max: lyap_eig_max,
            }))
        }
        SolveStatus::Optimal | SolveStatus::MaxIters => Ok(SprOutcome::Infeasible {
            reason: format!("maximal feasibility margin {mu:.3e} is not positive"),
        }),
        SolveStatus::PrimalInfeasible => Ok(SprOutcome::Infeasible {
            reason: "KYP linear matrix inequalities are infeasible".into(),
        }),
        SolveStatus::DualInfeasible => Err(Error::numerical(
            "SPR feasibility problem reported dual infeasibility",
        )),
    }
}

/// Logarithmic feedback-gain grid `10⁻² … 10⁴` (half-decade steps) used by
/// the SPR sweep diagnostics.
pub fn feedback_gain_grid() -> Vec<f64> {
    (0..=12).map(|i| 10f64.powf(-2.0 + 0.5 * i as f64)).collect()
}

/// Sweeps the gain grid and returns the first feasible certificate, if any.
pub fn find_spr_gain(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &RowDVector<f64>,
) -> Result<Option<SprCertificate>> {
    for g in feedback_gain_grid() {
        if let SprOutcome::Feasible(cert) = verify_spr(a, b, c, g)? {
            return Ok(Some(cert));
        }
    }
    Ok(None)
}
