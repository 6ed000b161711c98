//! Dense primal-dual interior-point solver for small structured SDPs.
//!
//! Problem form (LMI / dual form):
//!
//! ```text
//! minimize    cᵀx
//! subject to  S_b(x) = H_b + A_b(Y) + Σ_v x_v C_{b,v}  ⪰ 0   for each block b
//! ```
//!
//! where the decision vector `x` packs the upper triangle of a symmetric
//! matrix variable `Y` (coefficients of the basis `E_pq = e_pe_qᵀ + e_qe_pᵀ`)
//! followed by free scalar variables. Each block declares how `Y` enters
//! (identity, Lyapunov operator, bordered "arrow" embedding, or a scalar row
//! functional) so the Schur complement can be assembled from low-rank outer
//! products instead of generic sparse constraint matrices.
//!
//! The iteration is infeasible-start Mehrotra predictor-corrector with
//! Nesterov–Todd scaling; search directions come from a dense Cholesky of
//! the Schur complement. Problem sizes here are a few thousand variables
//! with blocks up to ~130, where dense factorizations are entirely adequate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// How the symmetric matrix variable `Y` enters a block.
#[derive(Debug, Clone)]
pub enum YMap {
    /// `A(Y) = Y` (block dim = y_dim).
    Identity,
    /// `A(Y) = −(G Y + Y Gᵀ)` (block dim = y_dim).
    Lyapunov(DMatrix<f64>),
    /// `A(Y) = [[0, −(Yx̄)ᵀ], [−Yx̄, Y]]` (block dim = y_dim + 1).
    Arrow(DVector<f64>),
    /// Scalar functional `A(Y) = scale · (Y w)_row` as a 1×1 block.
    RowFunctional {
        weights: DVector<f64>,
        row: usize,
        scale: f64,
    },
}

/// Coefficient matrix of a scalar variable within a block.
#[derive(Debug, Clone)]
pub enum ScalarCoeff {
    /// `Σ_t (u_t v_tᵀ + v_t u_tᵀ)`.
    LowRank(Vec<(DVector<f64>, DVector<f64>)>),
    /// `c · I`.
    ScaledIdentity(f64),
}

/// One PSD block of the constraint `S_b(x) ⪰ 0`.
#[derive(Debug, Clone)]
pub struct Block {
    pub dim: usize,
    /// Constant term `H_b`.
    pub h: DMatrix<f64>,
    pub y_map: Option<YMap>,
    /// `(scalar_var_index, coefficient)` pairs; indices are 0-based among
    /// the scalar variables (after the svec(Y) segment).
    pub scalars: Vec<(usize, ScalarCoeff)>,
}

/// A structured SDP in LMI form.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    /// Size of the symmetric matrix variable (0 = none).
    pub y_dim: usize,
    pub num_scalars: usize,
    /// Objective over the packed variable vector.
    pub objective: Vec<f64>,
    pub blocks: Vec<Block>,
}

impl SdpProblem {
    pub fn n_sym(&self) -> usize {
        self.y_dim * (self.y_dim + 1) / 2
    }

    pub fn num_vars(&self) -> usize {
        self.n_sym() + self.num_scalars
    }

    fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars() {
            return Err(Error::validation("objective length mismatch"));
        }
        for (bi, b) in self.blocks.iter().enumerate() {
            if b.h.nrows() != b.dim || b.h.ncols() != b.dim {
                return Err(Error::validation(format!("block {bi}: H dimension mismatch")));
            }
            if let Some(map) = &b.y_map {
                let want = match map {
                    YMap::Identity | YMap::Lyapunov(_) => self.y_dim,
                    YMap::Arrow(_) => self.y_dim + 1,
                    YMap::RowFunctional { .. } => 1,
                };
                if b.dim != want {
                    return Err(Error::validation(format!(
                        "block {bi}: dim {} incompatible with its Y map (want {want})",
                        b.dim
                    )));
                }
            }
            for (v, _) in &b.scalars {
                if *v >= self.num_scalars {
                    return Err(Error::validation(format!(
                        "block {bi}: scalar index {v} out of range"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Packed index of the basis element `E_pq`, `p ≤ q`.
#[inline]
pub fn sym_index(p: usize, q: usize) -> usize {
    debug_assert!(p <= q);
    q * (q + 1) / 2 + p
}

/// Expands packed coefficients into the symmetric matrix `Y = Σ x_pq E_pq`.
pub fn unsvec(x: &[f64], n: usize) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(n, n);
    for q in 0..n {
        for p in 0..=q {
            let v = x[sym_index(p, q)];
            y[(p, q)] = v;
            y[(q, p)] = v;
        }
    }
    y
}

/// Packs a symmetric matrix into basis coefficients (inverse of [`unsvec`]).
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut x = vec![0.0; n * (n + 1) / 2];
    for q in 0..n {
        for p in 0..=q {
            x[sym_index(p, q)] = m[(p, q)];
        }
    }
    x
}

/// Adjoint pairing readout: `out[idx(p,q)] += <E_pq, K>` for symmetric `K`.
fn add_readout(out: &mut [f64], k: &DMatrix<f64>) {
    let n = k.nrows();
    for q in 0..n {
        for p in 0..q {
            out[sym_index(p, q)] += k[(p, q)] + k[(q, p)];
        }
        out[sym_index(q, q)] += k[(q, q)];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIters,
    PrimalInfeasible,
    DualInfeasible,
}

#[derive(Debug, Clone)]
pub struct SolverSettings {
    /// Relative duality-gap tolerance.
    pub tol_gap: f64,
    /// Relative primal/dual feasibility tolerance.
    pub tol_feas: f64,
    pub max_iters: usize,
    /// Fraction of the step to the cone boundary.
    pub step_frac: f64,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_gap: 1e-8,
            tol_feas: 1e-7,
            max_iters: 200,
            step_frac: 0.98,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverOutput {
    pub status: SolveStatus,
    pub x: DVector<f64>,
    /// `Y` expanded from the packed segment, when `y_dim > 0`.
    pub y_mat: Option<DMatrix<f64>>,
    pub s_blocks: Vec<DMatrix<f64>>,
    pub z_blocks: Vec<DMatrix<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub rel_gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
}

/// Per-block Nesterov–Todd scaling data.
struct NtScaling {
    r_inv: DMatrix<f64>,
    /// Scaled spectrum `λ` (diagonal of `Rᵀ Z R = R⁻¹ S R⁻ᵀ`).
    lambda: DVector<f64>,
    /// `V = W⁻¹ = R⁻ᵀR⁻¹`, the congruence weight of the Schur complement.
    v: DMatrix<f64>,
}

struct Iterate {
    x: DVector<f64>,
    s: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
}

struct Metrics {
    pobj: f64,
    dobj: f64,
    gap: f64,
    rel_gap: f64,
    pres: f64,
    dres: f64,
}

fn snapshot(problem: &SdpProblem, it: &Iterate, me: &Metrics, status: SolveStatus, iter: usize) -> SolverOutput {
    SolverOutput {
        status,
        x: it.x.clone(),
        y_mat: (problem.y_dim > 0).then(|| unsvec(&it.x.as_slice()[..problem.n_sym()], problem.y_dim)),
        s_blocks: it.s.clone(),
        z_blocks: it.z.clone(),
        primal_objective: me.pobj,
        dual_objective: me.dobj,
        duality_gap: me.gap,
        rel_gap: me.rel_gap,
        primal_residual: me.pres,
        dual_residual: me.dres,
        iterations: iter,
    }
}

/// Solves the problem. Deterministic: no randomness, fixed evaluation order.
pub fn solve(problem: &SdpProblem, settings: &SolverSettings) -> Result<SolverOutput> {
    problem.validate()?;
    let nv = problem.num_vars();
    let nb = problem.blocks.len();
    if nv == 0 || nb == 0 {
        return Err(Error::validation("empty problem"));
    }
    let nu: f64 = problem.blocks.iter().map(|b| b.dim as f64).sum();
    let c = DVector::from_iterator(nv, problem.objective.iter().copied());

    let h_scale = problem
        .blocks
        .iter()
        .map(|b| b.h.norm())
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let c_scale = c.amax().max(1.0);

    let mut it = Iterate {
        x: DVector::zeros(nv),
        s: problem
            .blocks
            .iter()
            .map(|b| DMatrix::identity(b.dim, b.dim) * (10.0 * h_scale))
            .collect(),
        z: problem
            .blocks
            .iter()
            .map(|b| DMatrix::identity(b.dim, b.dim) * (10.0 * c_scale))
            .collect(),
    };
    let z_init_norm: f64 = frob_total(&it.z);

    let mut best: Option<(f64, SolverOutput)> = None;
    let mut final_iter = 0;

    for iter in 0..settings.max_iters {
        final_iter = iter;

        // Residuals: R_P_b = H_b + A_b(x) − S_b, r_d_i = c_i − Σ_b <Ĝ_i, Z_b>.
        let r_p: Vec<DMatrix<f64>> = problem
            .blocks
            .iter()
            .zip(&it.s)
            .map(|(b, sb)| block_value(problem, b, &it.x) - sb)
            .collect();
        let mut gz = DVector::zeros(nv);
        for (b, zb) in problem.blocks.iter().zip(&it.z) {
            accumulate_adjoint(problem, b, zb, &mut gz);
        }
        let r_d = &c - &gz;

        let gap: f64 = it.s.iter().zip(&it.z).map(|(sb, zb)| sb.dot(zb)).sum();
        let mu = gap / nu;
        let me = Metrics {
            pobj: c.dot(&it.x),
            dobj: -problem
                .blocks
                .iter()
                .zip(&it.z)
                .map(|(b, zb)| b.h.dot(zb))
                .sum::<f64>(),
            gap,
            rel_gap: 0.0,
            pres: r_p.iter().map(|m| m.norm()).fold(0.0_f64, f64::max) / h_scale,
            dres: r_d.norm() / c_scale,
        };
        let me = Metrics {
            rel_gap: gap.abs() / (1.0 + me.pobj.abs().max(me.dobj.abs())),
            ..me
        };

        if settings.verbose {
            eprintln!(
                "ipm iter {iter:3}: mu {mu:10.3e} relgap {:10.3e} pres {:10.3e} dres {:10.3e} pobj {:12.5e}",
                me.rel_gap, me.pres, me.dres, me.pobj
            );
        }

        let merit = me.rel_gap.max(me.pres).max(me.dres);
        if best.as_ref().map_or(true, |(m, _)| merit < *m) {
            best = Some((merit, snapshot(problem, &it, &me, SolveStatus::MaxIters, iter)));
        }

        if me.pres <= settings.tol_feas && me.dres <= settings.tol_feas && me.rel_gap <= settings.tol_gap
        {
            return Ok(snapshot(problem, &it, &me, SolveStatus::Optimal, iter));
        }

        // Farkas-style certificates.
        let z_norm = frob_total(&it.z);
        if z_norm > 1e6 * z_init_norm {
            let feas = gz.amax() / z_norm;
            let val = problem
                .blocks
                .iter()
                .zip(&it.z)
                .map(|(b, zb)| b.h.dot(zb))
                .sum::<f64>()
                / z_norm;
            if feas < 1e-9 * c_scale.max(1.0) && val < -1e-9 * h_scale {
                return Ok(snapshot(problem, &it, &me, SolveStatus::PrimalInfeasible, iter));
            }
        }
        let x_norm = it.x.norm();
        if x_norm > 1e8 && me.pobj < -1e8 * c_scale {
            let dir_ok = problem.blocks.iter().all(|b| {
                let mut d = block_value(problem, b, &it.x);
                d -= &b.h;
                eig_min(&d) > -1e-7 * x_norm
            });
            if dir_ok {
                return Ok(snapshot(problem, &it, &me, SolveStatus::DualInfeasible, iter));
            }
        }

        // NT scaling per block.
        let mut scalings = Vec::with_capacity(nb);
        for bi in 0..nb {
            match nt_scaling(&it.s[bi], &it.z[bi]) {
                Ok(sc) => scalings.push(sc),
                Err(e) => {
                    // boundary breakdown: return the best iterate seen
                    if settings.verbose {
                        eprintln!("ipm: NT breakdown in block {bi} at iter {iter}: {e}");
                    }
                    let (_, out) = best.expect("iterate recorded");
                    return Ok(out);
                }
            }
        }

        let m_schur = assemble_schur(problem, &scalings);
        let chol = match cholesky_with_ridge(m_schur.clone()) {
            Some(c) => c,
            None => {
                if settings.verbose {
                    eprintln!("ipm: Schur complement lost definiteness at iter {iter}");
                }
                let (_, out) = best.expect("iterate recorded");
                return Ok(out);
            }
        };

        // Predictor: D̃ = −diag(λ).
        let d_aff: Vec<DMatrix<f64>> = scalings
            .iter()
            .map(|sc| -DMatrix::from_diagonal(&sc.lambda))
            .collect();
        let (_, ds_a, dz_a, dstil_a) =
            solve_direction(problem, &scalings, &chol, &m_schur, &r_p, &r_d, &d_aff);

        let alpha_p_a = max_step(&it.s, &ds_a, settings.step_frac);
        let alpha_d_a = max_step(&it.z, &dz_a, settings.step_frac);
        let mut gap_aff = 0.0;
        for bi in 0..nb {
            let s_new = &it.s[bi] + &ds_a[bi] * alpha_p_a;
            let z_new = &it.z[bi] + &dz_a[bi] * alpha_d_a;
            gap_aff += s_new.dot(&z_new);
        }
        let mu_aff = gap_aff / nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector: D̃ solves λ∘D̃ = σμI − λ² − sym(Δs̃_a Δz̃_a).
        let mut d_corr = Vec::with_capacity(nb);
        for bi in 0..nb {
            let sc = &scalings[bi];
            let n = problem.blocks[bi].dim;
            let dztil_a = &d_aff[bi] - &dstil_a[bi];
            let cross = &dstil_a[bi] * &dztil_a;
            let mut d = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let target = if i == j {
                        sigma * mu - sc.lambda[i] * sc.lambda[i]
                    } else {
                        0.0
                    };
                    let rhs = target - 0.5 * (cross[(i, j)] + cross[(j, i)]);
                    d[(i, j)] = 2.0 * rhs / (sc.lambda[i] + sc.lambda[j]);
                }
            }
            d_corr.push(d);
        }
        let (dx, ds, dz, _) =
            solve_direction(problem, &scalings, &chol, &m_schur, &r_p, &r_d, &d_corr);

        let alpha_p = max_step(&it.s, &ds, settings.step_frac);
        let alpha_d = max_step(&it.z, &dz, settings.step_frac);

        it.x += &dx * alpha_p;
        for bi in 0..nb {
            it.s[bi] += &ds[bi] * alpha_p;
            it.z[bi] += &dz[bi] * alpha_d;
        }

        if alpha_p < 1e-10 && alpha_d < 1e-10 {
            break;
        }
    }

    let (_, mut out) = best.expect("at least one iterate recorded");
    out.iterations = final_iter;
    Ok(out)
}

fn frob_total(ms: &[DMatrix<f64>]) -> f64 {
    ms.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

fn eig_min(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    nalgebra::SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// `S_b(x) = H_b + A_b(Y) + Σ x_v C_v`.
fn block_value(problem: &SdpProblem, block: &Block, x: &DVector<f64>) -> DMatrix<f64> {
    let n_sym = problem.n_sym();
    let mut out = block.h.clone();
    if let Some(map) = &block.y_map {
        let y = unsvec(&x.as_slice()[..n_sym], problem.y_dim);
        match map {
            YMap::Identity => out += &y,
            YMap::Lyapunov(g) => {
                let gy = g * &y;
                out -= &gy;
                out -= gy.transpose();
            }
            YMap::Arrow(xbar) => {
                let ny = problem.y_dim;
                let yx = &y * xbar;
                for i in 0..ny {
                    out[(i + 1, 0)] -= yx[i];
                    out[(0, i + 1)] -= yx[i];
                    for j in 0..ny {
                        out[(i + 1, j + 1)] += y[(i, j)];
                    }
                }
            }
            YMap::RowFunctional { weights, row, scale } => {
                let val = (y.row(*row) * weights)[(0, 0)];
                out[(0, 0)] += scale * val;
            }
        }
    }
    for (v, coeff) in &block.scalars {
        let xv = x[n_sym + v];
        match coeff {
            ScalarCoeff::ScaledIdentity(cv) => {
                for i in 0..block.dim {
                    out[(i, i)] += cv * xv;
                }
            }
            ScalarCoeff::LowRank(pairs) => {
                for (u, w) in pairs {
                    for j in 0..block.dim {
                        for i in 0..block.dim {
                            out[(i, j)] += xv * (u[i] * w[j] + w[i] * u[j]);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates `out[i] += <Ĝ_i, Z>` over every variable.
fn accumulate_adjoint(
    problem: &SdpProblem,
    block: &Block,
    zb: &DMatrix<f64>,
    out: &mut DVector<f64>,
) {
    let n_sym = problem.n_sym();
    if let Some(map) = &block.y_map {
        match map {
            YMap::Identity => add_readout(&mut out.as_mut_slice()[..n_sym], zb),
            YMap::Lyapunov(g) => {
                let gtz = g.transpose() * zb;
                let k = -(&gtz + gtz.transpose());
                add_readout(&mut out.as_mut_slice()[..n_sym], &k);
            }
            YMap::Arrow(xbar) => {
                let ny = problem.y_dim;
                let mut k = zb.view((1, 1), (ny, ny)).into_owned();
                let z0 = DVector::from_fn(ny, |i, _| zb[(i + 1, 0)]);
                for j in 0..ny {
                    for i in 0..ny {
                        k[(i, j)] -= xbar[i] * z0[j] + z0[i] * xbar[j];
                    }
                }
                add_readout(&mut out.as_mut_slice()[..n_sym], &k);
            }
            YMap::RowFunctional { weights, row, scale } => {
                let zval = zb[(0, 0)] * scale;
                for q in 0..problem.y_dim {
                    let (a, b) = if *row <= q { (*row, q) } else { (q, *row) };
                    out[sym_index(a, b)] += zval * weights[q];
                }
            }
        }
    }
    for (v, coeff) in &block.scalars {
        let acc = match coeff {
            ScalarCoeff::ScaledIdentity(cv) => cv * zb.trace(),
            ScalarCoeff::LowRank(pairs) => pairs
                .iter()
                .map(|(u, w)| 2.0 * (u.transpose() * zb * w)[(0, 0)])
                .sum(),
        };
        out[n_sym + v] += acc;
    }
}

/// NT scaling of a block: factor `R` with `W = RRᵀ`, `WZW = S`; returns
/// `R⁻¹`, the scaled spectrum `λ`, and `V = W⁻¹`.
fn nt_scaling(s: &DMatrix<f64>, z: &DMatrix<f64>) -> std::result::Result<NtScaling, String> {
    let n = s.nrows();
    let ls = s
        .clone()
        .cholesky()
        .ok_or_else(|| "S not positive definite".to_string())?;
    let l = ls.l();
    let m = l.transpose() * z * &l;
    let m = (&m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut d_quarter = DVector::zeros(n);
    for i in 0..n {
        let ev = eig.eigenvalues[i];
        if !(ev > 0.0) {
            return Err(format!("scaled matrix has nonpositive eigenvalue {ev:.3e}"));
        }
        d_quarter[i] = ev.powf(0.25);
    }
    // R⁻¹ = D^{1/4} Qᵀ L⁻¹
    let l_inv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| "triangular solve failed".to_string())?;
    let mut r_inv = eig.eigenvectors.transpose() * l_inv;
    for i in 0..n {
        let sc = d_quarter[i];
        for x in r_inv.row_mut(i).iter_mut() {
            *x *= sc;
        }
    }
    let lambda = DVector::from_fn(n, |i, _| d_quarter[i] * d_quarter[i]);
    let v = r_inv.transpose() * &r_inv;
    let v = (&v + v.transpose()) * 0.5;
    Ok(NtScaling { r_inv, lambda, v })
}

/// Largest step `α ≤ 1` with `S + αΔ ⪰ 0` for every block, scaled by `frac`.
fn max_step(mats: &[DMatrix<f64>], deltas: &[DMatrix<f64>], frac: f64) -> f64 {
    let mut alpha: f64 = 1.0;
    for (m, d) in mats.iter().zip(deltas) {
        let n = m.nrows();
        let chol = match m.clone().cholesky() {
            Some(c) => c,
            None => return 1e-12,
        };
        let l = chol.l();
        let t1 = match l.solve_lower_triangular(d) {
            Some(t) => t,
            None => return 1e-12,
        };
        let t = match l.solve_lower_triangular(&t1.transpose()) {
            Some(t) => t,
            None => return 1e-12,
        };
        let t_sym = (&t + t.transpose()) * 0.5;
        let emin = if n == 1 {
            t_sym[(0, 0)]
        } else {
            nalgebra::SymmetricEigen::new(t_sym).eigenvalues.min()
        };
        if emin < 0.0 {
            alpha = alpha.min(frac / (-emin));
        }
    }
    alpha.min(1.0)
}

fn cholesky_with_ridge(mut m: DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = m.nrows();
    let base = m.trace().abs().max(1.0) / n as f64;
    let mut prev_ridge = 0.0;
    for attempt in 0..5 {
        if attempt > 0 {
            let add = base * 1e-14 * 100f64.powi(attempt - 1);
            for i in 0..n {
                m[(i, i)] += add - prev_ridge;
            }
            prev_ridge = add;
        }
        if let Some(c) = m.clone().cholesky() {
            return Some(c);
        }
    }
    None
}

enum ScalarImage {
    Pairs(Vec<(DVector<f64>, DVector<f64>)>),
    Dense(DMatrix<f64>),
}

/// Assembles the Schur complement `M[i,j] = Σ_b tr(Ĝ_i V_b Ĝ_j V_b)` from
/// low-rank factored columns.
fn assemble_schur(problem: &SdpProblem, scalings: &[NtScaling]) -> DMatrix<f64> {
    let nv = problem.num_vars();
    let n_sym = problem.n_sym();
    let ny = problem.y_dim;
    let mut m = DMatrix::zeros(nv, nv);

    for (block, scaling) in problem.blocks.iter().zip(scalings) {
        let v = &scaling.v;

        // Transformed images W_v = V C_v V of the scalar variables.
        let mut v2: Option<DMatrix<f64>> = None;
        let scalar_cols: Vec<(usize, ScalarImage)> = block
            .scalars
            .iter()
            .map(|(sv, coeff)| {
                let img = match coeff {
                    ScalarCoeff::LowRank(pairs) => ScalarImage::Pairs(
                        pairs.iter().map(|(u, w)| (v * u, v * w)).collect(),
                    ),
                    ScalarCoeff::ScaledIdentity(cv) => {
                        if v2.is_none() {
                            v2 = Some(v * v);
                        }
                        ScalarImage::Dense(v2.as_ref().unwrap() * *cv)
                    }
                };
                (*sv, img)
            })
            .collect();

        match &block.y_map {
            Some(YMap::RowFunctional { weights, row, scale }) => {
                // Rank-one update M += V² f fᵀ over the block's coefficient
                // vector f.
                let mut nz: Vec<(usize, f64)> = Vec::new();
                for q in 0..ny {
                    let (a, b) = if *row <= q { (*row, q) } else { (q, *row) };
                    let fv = scale * weights[q];
                    if fv != 0.0 {
                        nz.push((sym_index(a, b), fv));
                    }
                }
                for (sv, coeff) in &block.scalars {
                    let fv = match coeff {
                        ScalarCoeff::ScaledIdentity(cv) => *cv,
                        ScalarCoeff::LowRank(pairs) => {
                            pairs.iter().map(|(u, w)| 2.0 * u.dot(w)).sum()
                        }
                    };
                    if fv != 0.0 {
                        nz.push((n_sym + sv, fv));
                    }
                }
                let vsq = v[(0, 0)] * v[(0, 0)];
                for &(i, fi) in &nz {
                    for &(j, fj) in &nz {
                        m[(i, j)] += vsq * fi * fj;
                    }
                }
                continue;
            }
            Some(map) => {
                let lyap_pre = if let YMap::Lyapunov(g) = map {
                    let vg = v * g;
                    let gtv = g.transpose() * v;
                    let gtvg = g.transpose() * &vg;
                    Some((vg, gtv, gtvg))
                } else {
                    None
                };
                let mut k = DMatrix::zeros(ny, ny);
                let mut w0 = DVector::zeros(ny);
                let mut w_pairs: Vec<(DVector<f64>, DVector<f64>)> = Vec::with_capacity(4);
                for q in 0..ny {
                    for p in 0..=q {
                        let j = sym_index(p, q);
                        k.fill(0.0);
                        w_pairs.clear();
                        match map {
                            YMap::Identity => {
                                let vp = v.column(p).into_owned();
                                let vq = v.column(q).into_owned();
                                let half = if p == q { 0.5 } else { 1.0 };
                                add_sym_outer(&mut k, &vp, &vq, half);
                                w_pairs.push((vp * half, vq));
                            }
                            YMap::Lyapunov(_) => {
                                let (vg, gtv, gtvg) = lyap_pre.as_ref().unwrap();
                                let idx_pairs: &[(usize, usize)] =
                                    if p == q { &[(p, p)] } else { &[(p, q), (q, p)] };
                                for &(pp, qq) in idx_pairs {
                                    let a = -vg.column(pp).into_owned();
                                    let b = v.column(qq).into_owned();
                                    let ga = -gtvg.column(pp).into_owned();
                                    let gb = gtv.column(qq).into_owned();
                                    add_sym_outer(&mut k, &ga, &b, -1.0);
                                    add_sym_outer(&mut k, &gb, &a, -1.0);
                                    w_pairs.push((a, b));
                                }
                            }
                            YMap::Arrow(xbar) => {
                                let vp = v.column(p + 1).into_owned();
                                let vq = v.column(q + 1).into_owned();
                                let v0 = v.column(0).into_owned();
                                let half = if p == q { 0.5 } else { 1.0 };
                                let vd = if p == q {
                                    v.column(p + 1) * xbar[p]
                                } else {
                                    v.column(p + 1) * xbar[q] + v.column(q + 1) * xbar[p]
                                };
                                w_pairs.push((vp * half, vq));
                                w_pairs.push((-vd, v0));
                                w0.fill(0.0);
                                for (a, b) in &w_pairs {
                                    let a1 = a.rows(1, ny).into_owned();
                                    let b1 = b.rows(1, ny).into_owned();
                                    add_sym_outer(&mut k, &a1, &b1, 1.0);
                                    w0.axpy(b[0], &a1, 1.0);
                                    w0.axpy(a[0], &b1, 1.0);
                                }
                                add_sym_outer(&mut k, xbar, &w0, -1.0);
                            }
                            YMap::RowFunctional { .. } => unreachable!(),
                        }
                        add_schur_column(&mut m, &k, j);
                        for (sv, coeff) in &block.scalars {
                            let val = match coeff {
                                ScalarCoeff::ScaledIdentity(cv) => {
                                    cv * w_pairs.iter().map(|(a, b)| 2.0 * a.dot(b)).sum::<f64>()
                                }
                                ScalarCoeff::LowRank(pairs) => {
                                    let mut acc = 0.0;
                                    for (u, wv) in pairs {
                                        for (a, b) in &w_pairs {
                                            acc += 2.0
                                                * (u.dot(a) * wv.dot(b) + u.dot(b) * wv.dot(a));
                                        }
                                    }
                                    acc
                                }
                            };
                            let row = n_sym + sv;
                            m[(row, j)] += val;
                            m[(j, row)] += val;
                        }
                    }
                }
            }
            None => {}
        }

        // scalar × scalar entries: tr(C_u V C_v V) = tr(C_u W_v).
        for (pos, (u_idx, u_img)) in scalar_cols.iter().enumerate() {
            for (v_idx, v_coeff) in block.scalars.iter().skip(pos) {
                let val = match (u_img, v_coeff) {
                    (ScalarImage::Dense(du), ScalarCoeff::ScaledIdentity(cv)) => cv * du.trace(),
                    (ScalarImage::Dense(du), ScalarCoeff::LowRank(pairs)) => pairs
                        .iter()
                        .map(|(u, w)| 2.0 * (u.transpose() * du * w)[(0, 0)])
                        .sum(),
                    (ScalarImage::Pairs(tp), ScalarCoeff::ScaledIdentity(cv)) => {
                        cv * tp.iter().map(|(a, b)| 2.0 * a.dot(b)).sum::<f64>()
                    }
                    (ScalarImage::Pairs(tp), ScalarCoeff::LowRank(pairs)) => {
                        let mut acc = 0.0;
                        for (u, w) in pairs {
                            for (a, b) in tp {
                                acc += 2.0 * (u.dot(a) * w.dot(b) + u.dot(b) * w.dot(a));
                            }
                        }
                        acc
                    }
                };
                let (ri, ci) = (n_sym + u_idx, n_sym + v_idx);
                m[(ri, ci)] += val;
                if ri != ci {
                    m[(ci, ri)] += val;
                }
            }
        }
    }

    for i in 0..nv {
        for j in (i + 1)..nv {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    m
}

/// `K += factor · (a bᵀ + b aᵀ)`.
fn add_sym_outer(k: &mut DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>, factor: f64) {
    let n = k.nrows();
    for j in 0..n {
        let fb = factor * b[j];
        let fa = factor * a[j];
        for i in 0..n {
            k[(i, j)] += a[i] * fb + b[i] * fa;
        }
    }
}

/// Scatters the readout of `K_j` into column and row `j` over the Y segment.
fn add_schur_column(m: &mut DMatrix<f64>, k: &DMatrix<f64>, j: usize) {
    let ny = k.nrows();
    for q in 0..ny {
        for p in 0..q {
            let i = sym_index(p, q);
            m[(i, j)] += k[(p, q)] + k[(q, p)];
        }
        let i = sym_index(q, q);
        m[(i, j)] += k[(q, q)];
    }
}

/// Direction solve for a given scaled complementarity target `D̃`.
/// Returns `(Δx, ΔS, ΔZ, Δs̃)`.
#[allow(clippy::type_complexity)]
fn solve_direction(
    problem: &SdpProblem,
    scalings: &[NtScaling],
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    m_schur: &DMatrix<f64>,
    r_p: &[DMatrix<f64>],
    r_d: &DVector<f64>,
    d_tilde: &[DMatrix<f64>],
) -> (DVector<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let nb = problem.blocks.len();

    // rhs_i = −r_d_i + Σ_b <Ĝ_i, R⁻ᵀD̃R⁻¹ − V R_P V>
    let mut rhs = -r_d.clone();
    for bi in 0..nb {
        let sc = &scalings[bi];
        let t1 = sc.r_inv.transpose() * &d_tilde[bi] * &sc.r_inv;
        let t2 = &sc.v * &r_p[bi] * &sc.v;
        let theta = t1 - t2;
        accumulate_adjoint(problem, &problem.blocks[bi], &theta, &mut rhs);
    }

    let mut dx = chol.solve(&rhs);
    // one iterative-refinement pass; the Schur system turns ill conditioned
    // as μ → 0 and the raw solve feeds noise into the dual residual
    let resid = &rhs - m_schur * &dx;
    dx += chol.solve(&resid);

    // ΔS = A(Δx) + R_P ; Δs̃ = R⁻¹ ΔS R⁻ᵀ ; ΔZ = R⁻ᵀ (D̃ − Δs̃) R⁻¹
    let mut ds = Vec::with_capacity(nb);
    let mut dz = Vec::with_capacity(nb);
    let mut dstil = Vec::with_capacity(nb);
    for bi in 0..nb {
        let block = &problem.blocks[bi];
        let mut d = block_value(problem, block, &dx);
        d -= &block.h;
        d += &r_p[bi];
        let sc = &scalings[bi];
        let s_til = &sc.r_inv * &d * sc.r_inv.transpose();
        let s_til = (&s_til + s_til.transpose()) * 0.5;
        let z_delta = sc.r_inv.transpose() * (&d_tilde[bi] - &s_til) * &sc.r_inv;
        ds.push(d);
        dz.push((&z_delta + z_delta.transpose()) * 0.5);
        dstil.push(s_til);
    }
    (dx, ds, dz, dstil)
}
