//! The conjugate-symmetric barycentric rational model
//!
//! ```text
//!          Σᵢ [ hᵢwᵢ/(s − jλᵢ) + (hᵢwᵢ)*/(s + jλᵢ) ]      N(s)
//! Ĥ(s) =  ─────────────────────────────────────────── =  ─────
//!          Σᵢ [  wᵢ/(s − jλᵢ) +   wᵢ*/(s + jλᵢ)  ]        D(s)
//! ```
//!
//! with real support frequencies `λᵢ > 0`, complex values `hᵢ` and complex
//! weights `wᵢ`. Every support point carries its conjugate partner `−jλᵢ`
//! implicitly, so `Ĥ(s*) = Ĥ(s)*` holds by construction and the model has a
//! real impulse response. The module provides evaluation, three state-space
//! realizations (complex, unit-input complex, and all-real), pole and
//! denominator-zero extraction through structured pencils, and conversion to
//! pole-residue form.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::data::NormalizationRecord;
use crate::eig;
use crate::error::{Error, Result};
use crate::C64;

/// Pairwise pole separation (relative to the largest magnitude) below which
/// residue extraction is flagged as ill conditioned.
const POLE_CLUSTER_TOL: f64 = 1e-8;

/// Barycentric model state: support frequencies, values and weights.
///
/// `k = 0` is the degenerate initialization state holding only the constant
/// `c0`. Models are immutable; all operations are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricModel {
    support: Vec<f64>,
    values: Vec<C64>,
    weights: Vec<C64>,
    c0: Option<f64>,
}

impl BarycentricModel {
    /// Builds a model of order `k ≥ 1`. Support frequencies must be strictly
    /// positive and pairwise distinct.
    pub fn new(support: Vec<f64>, values: Vec<C64>, weights: Vec<C64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::validation("empty support; use constant() for k = 0"));
        }
        if support.len() != values.len() || support.len() != weights.len() {
            return Err(Error::validation("support/values/weights length mismatch"));
        }
        for &l in &support {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::validation(format!("support frequency {l} not > 0")));
            }
        }
        let mut sorted = support.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("duplicate support frequency"));
        }
        Ok(Self { support, values, weights, c0: None })
    }

    /// The order-0 constant model used to seed the greedy iteration.
    pub fn constant(c0: f64) -> Self {
        Self { support: Vec::new(), values: Vec::new(), weights: Vec::new(), c0: Some(c0) }
    }

    /// Number of support points `k`.
    pub fn order(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn weights(&self) -> &[C64] {
        &self.weights
    }

    /// Constant of the `k = 0` model, if this is one.
    pub fn constant_term(&self) -> Option<f64> {
        self.c0
    }

    /// Same support and values, new weights.
    pub fn with_weights(&self, weights: Vec<C64>) -> Result<Self> {
        if weights.len() != self.support.len() {
            return Err(Error::validation("weight count does not match support"));
        }
        Ok(Self {
            support: self.support.clone(),
            values: self.values.clone(),
            weights,
            c0: self.c0,
        })
    }

    /// Indices of weights treated as exact zeros for interpolation
    /// bookkeeping: `|wᵢ| ≤ 10⁻¹⁴ ‖w‖`.
    pub fn negligible_weights(&self) -> Vec<usize> {
        let norm: f64 = self.weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| w.norm() <= 1e-14 * norm)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Evaluates `Ĥ(s)`. At a support point `±jλᵢ` the stored value `hᵢ` (or its
/// conjugate) is returned directly instead of resolving the 0/0 limit
/// numerically. At a pole of the model the IEEE quotient (inf/nan) is
/// returned; use [`evaluate_checked`] where that must be an error.
pub fn evaluate(m: &BarycentricModel, s: C64) -> C64 {
    if let Some(c0) = m.c0 {
        if m.order() == 0 {
            return C64::new(c0, 0.0);
        }
    }
    if s.re == 0.0 {
        for (i, &l) in m.support.iter().enumerate() {
            if s.im == l {
                return m.values[i];
            }
            if s.im == -l {
                return m.values[i].conj();
            }
        }
    }
    let (n, d) = numerator_denominator(m, s);
    n / d
}

/// [`evaluate`] that reports a pole-evaluation error when `D(s) = 0` away
/// from the support points.
pub fn evaluate_checked(m: &BarycentricModel, s: C64) -> Result<C64> {
    let z = evaluate(m, s);
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::numerical(format!("evaluation at s = {s} hit a pole of the model")))
    }
}

/// Evaluates the denominator `D(s)`. Evaluation exactly at `±jλᵢ` is a
/// domain error.
pub fn evaluate_denominator(m: &BarycentricModel, s: C64) -> Result<C64> {
    if s.re == 0.0 && m.support.iter().any(|&l| s.im == l || s.im == -l) {
        return Err(Error::validation(format!("denominator evaluated at support point {s}")));
    }
    Ok(denominator(m, s))
}

fn numerator_denominator(m: &BarycentricModel, s: C64) -> (C64, C64) {
    let mut n = C64::new(0.0, 0.0);
    let mut d = C64::new(0.0, 0.0);
    for i in 0..m.order() {
        let jl = C64::new(0.0, m.support[i]);
        let w = m.weights[i];
        let hw = m.values[i] * w;
        let plus = 1.0 / (s - jl);
        let minus = 1.0 / (s + jl);
        n += hw * plus + hw.conj() * minus;
        d += w * plus + w.conj() * minus;
    }
    (n, d)
}

fn denominator(m: &BarycentricModel, s: C64) -> C64 {
    let mut d = C64::new(0.0, 0.0);
    for i in 0..m.order() {
        let jl = C64::new(0.0, m.support[i]);
        let w = m.weights[i];
        d += w / (s - jl) + w.conj() / (s + jl);
    }
    d
}

/// Derivative `D'(s)` by term-wise analytic differentiation.
pub fn denominator_derivative(m: &BarycentricModel, s: C64) -> C64 {
    let mut d = C64::new(0.0, 0.0);
    for i in 0..m.order() {
        let jl = C64::new(0.0, m.support[i]);
        let w = m.weights[i];
        let p = s - jl;
        let q = s + jl;
        d += -w / (p * p) - w.conj() / (q * q);
    }
    d
}

fn numerator(m: &BarycentricModel, s: C64) -> C64 {
    numerator_denominator(m, s).0
}

/// Value of `Ĥ` at infinity: ratio of the leading partial-fraction
/// coefficients, with a far-field evaluation as fallback when the weight sum
/// nearly cancels.
pub fn value_at_infinity(m: &BarycentricModel) -> f64 {
    if m.order() == 0 {
        return m.c0.unwrap_or(0.0);
    }
    let den: f64 = m.weights.iter().map(|w| w.re).sum();
    let num: f64 = m.values.iter().zip(&m.weights).map(|(h, w)| (h * w).re).sum();
    let wscale: f64 = m.weights.iter().map(|w| w.norm()).sum();
    if den.abs() > 1e-12 * wscale {
        num / den
    } else {
        let far = 1e9 * m.support.iter().cloned().fold(1.0, f64::max);
        evaluate(m, C64::new(far, 0.0)).re
    }
}

// ---------------------------------------------------------------------------
// State-space realizations
// ---------------------------------------------------------------------------

/// Descriptor realization `(E, A, B, C)` with transfer function
/// `C (sE − A)⁻¹ B`.
#[derive(Debug, Clone)]
pub enum DescriptorRealization {
    Complex {
        e: DMatrix<C64>,
        a: DMatrix<C64>,
        b: DVector<C64>,
        c: RowDVector<C64>,
    },
    Real {
        e: DMatrix<f64>,
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: RowDVector<f64>,
    },
}

/// Tag distinguishing the two storage layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Complex,
    Real,
}

impl DescriptorRealization {
    pub fn kind(&self) -> FieldKind {
        match self {
            DescriptorRealization::Complex { .. } => FieldKind::Complex,
            DescriptorRealization::Real { .. } => FieldKind::Real,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DescriptorRealization::Complex { a, .. } => a.nrows(),
            DescriptorRealization::Real { a, .. } => a.nrows(),
        }
    }

    /// Transfer function `C (sE − A)⁻¹ B` by dense linear solve.
    pub fn transfer(&self, s: C64) -> Result<C64> {
        match self {
            DescriptorRealization::Complex { e, a, b, c } => descriptor_tf(e, a, b, c, s),
            DescriptorRealization::Real { e, a, b, c } => {
                let ec = e.map(|x| C64::new(x, 0.0));
                let ac = a.map(|x| C64::new(x, 0.0));
                let bc = b.map(|x| C64::new(x, 0.0));
                let cc = c.map(|x| C64::new(x, 0.0));
                descriptor_tf(&ec, &ac, &bc, &cc, s)
            }
        }
    }
}

fn descriptor_tf(
    e: &DMatrix<C64>,
    a: &DMatrix<C64>,
    b: &DVector<C64>,
    c: &RowDVector<C64>,
    s: C64,
) -> Result<C64> {
    let m = e * s - a;
    let x = m
        .lu()
        .solve(b)
        .ok_or_else(|| Error::numerical(format!("sE - A singular at s = {s}")))?;
    Ok((c * x)[(0, 0)])
}

/// Complex descriptor realization of size `2k+1`:
/// `Ã = Λ − B̃R̃`, `B̃ = [w₁ w₁* … w_k w_k* 1]ᵀ`, `C̃ = [h₁ h₁* … h_k h_k* 0]`,
/// `Ẽ = diag(1,…,1,0)` with `Λ = diag(jλ₁, −jλ₁, …, jλ_k, −jλ_k, 1)`.
pub fn build_descriptor_realization(m: &BarycentricModel) -> Result<DescriptorRealization> {
    require_order(m)?;
    let k = m.order();
    let n = 2 * k + 1;
    let mut b = DVector::from_element(n, C64::new(0.0, 0.0));
    let mut c = RowDVector::from_element(n, C64::new(0.0, 0.0));
    let mut lambda = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for i in 0..k {
        let jl = C64::new(0.0, m.support[i]);
        lambda[(2 * i, 2 * i)] = jl;
        lambda[(2 * i + 1, 2 * i + 1)] = -jl;
        b[2 * i] = m.weights[i];
        b[2 * i + 1] = m.weights[i].conj();
        c[2 * i] = m.values[i];
        c[2 * i + 1] = m.values[i].conj();
    }
    lambda[(n - 1, n - 1)] = C64::new(1.0, 0.0);
    b[n - 1] = C64::new(1.0, 0.0);

    // A = Λ − B·R with R the all-ones row.
    let mut a = lambda;
    for r in 0..n {
        for col in 0..n {
            a[(r, col)] -= b[r];
        }
    }
    let mut e = DMatrix::identity(n, n).map(|x: f64| C64::new(x, 0.0));
    e[(n - 1, n - 1)] = C64::new(0.0, 0.0);
    Ok(DescriptorRealization::Complex { e, a, b, c })
}

/// Variant with all-ones input map: `B` becomes the ones vector, the weights
/// move into `C` (entries `hᵢwᵢ`) and into the rank-one correction row.
pub fn build_unit_input_realization(m: &BarycentricModel) -> Result<DescriptorRealization> {
    require_order(m)?;
    let k = m.order();
    let n = 2 * k + 1;
    let b = DVector::from_element(n, C64::new(1.0, 0.0));
    let mut c = RowDVector::from_element(n, C64::new(0.0, 0.0));
    let mut r = RowDVector::from_element(n, C64::new(0.0, 0.0));
    let mut lambda = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for i in 0..k {
        let jl = C64::new(0.0, m.support[i]);
        lambda[(2 * i, 2 * i)] = jl;
        lambda[(2 * i + 1, 2 * i + 1)] = -jl;
        let hw = m.values[i] * m.weights[i];
        c[2 * i] = hw;
        c[2 * i + 1] = hw.conj();
        r[2 * i] = m.weights[i];
        r[2 * i + 1] = m.weights[i].conj();
    }
    lambda[(n - 1, n - 1)] = C64::new(1.0, 0.0);
    r[n - 1] = C64::new(1.0, 0.0);

    let mut a = lambda;
    for row in 0..n {
        for col in 0..n {
            a[(row, col)] -= r[col];
        }
    }
    let mut e = DMatrix::identity(n, n).map(|x: f64| C64::new(x, 0.0));
    e[(n - 1, n - 1)] = C64::new(0.0, 0.0);
    Ok(DescriptorRealization::Complex { e, a, b, c })
}

/// All-real realization built directly in real arithmetic: per support point
/// a 2×2 rotation block `λᵢK₂` with `K₂ = [[0, −1], [1, 0]]`, input column
/// `√2[Re wᵢ, Im wᵢ]`, output row `√2[Re hᵢ, −Im hᵢ]`, and the trailing
/// algebraic state as in the complex form.
pub fn build_real_realization(m: &BarycentricModel) -> Result<DescriptorRealization> {
    require_order(m)?;
    let k = m.order();
    let n = 2 * k + 1;
    let s2 = std::f64::consts::SQRT_2;
    let mut b = DVector::zeros(n);
    let mut c = RowDVector::zeros(n);
    let mut r = RowDVector::zeros(n);
    let mut lambda = DMatrix::zeros(n, n);
    for i in 0..k {
        let l = m.support[i];
        lambda[(2 * i, 2 * i + 1)] = -l;
        lambda[(2 * i + 1, 2 * i)] = l;
        b[2 * i] = s2 * m.weights[i].re;
        b[2 * i + 1] = s2 * m.weights[i].im;
        c[2 * i] = s2 * m.values[i].re;
        c[2 * i + 1] = -s2 * m.values[i].im;
        r[2 * i] = s2;
    }
    lambda[(n - 1, n - 1)] = 1.0;
    b[n - 1] = 1.0;
    r[n - 1] = 1.0;

    let mut a = lambda;
    for row in 0..n {
        for col in 0..n {
            a[(row, col)] -= b[row] * r[col];
        }
    }
    let mut e = DMatrix::identity(n, n);
    e[(n - 1, n - 1)] = 0.0;
    Ok(DescriptorRealization::Real { e, a, b, c })
}

fn require_order(m: &BarycentricModel) -> Result<()> {
    if m.order() == 0 {
        return Err(Error::validation("operation requires k >= 1"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Poles, zeros, residues
// ---------------------------------------------------------------------------

/// Finite poles of the model pencil plus bookkeeping.
#[derive(Debug, Clone)]
pub struct PoleSet {
    pub finite_poles: Vec<C64>,
    pub infinite_count: usize,
    /// Residues parallel to `finite_poles`, when computed.
    pub residues: Option<Vec<C64>>,
}

impl PoleSet {
    /// Largest real part over the finite poles; `-∞` when there are none.
    pub fn stability_margin(&self) -> f64 {
        self.finite_poles.iter().map(|p| p.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Poles of `Ĥ(s)` as the finite eigenvalues of the realization pencil.
/// Generically there are `2k − 1` of them; a lower achieved count (weight
/// cancellations) is reported via `infinite_count`, not an error.
///
/// Requires `k ≥ 1` and all `wᵢ ≠ 0`.
pub fn poles(m: &BarycentricModel) -> Result<PoleSet> {
    require_order(m)?;
    if m.weights.iter().any(|w| w.norm() == 0.0) {
        return Err(Error::validation("pole extraction requires all weights nonzero"));
    }
    let (a, e) = match build_real_realization(m)? {
        DescriptorRealization::Real { e, a, .. } => (a, e),
        DescriptorRealization::Complex { .. } => unreachable!(),
    };
    let eigs = eig::pencil_eigenvalues(&a, &e)?;
    Ok(PoleSet {
        finite_poles: eigs.finite,
        infinite_count: eigs.infinite_count,
        residues: None,
    })
}

/// Zeros of the denominator `D(s)`: the finite eigenvalues of the
/// size-`2k+1` pencil `([[𝒜, ℬ], [𝒞, 0]], diag(I, 0))` built on the minimal
/// real realization of `D`.
///
/// In the generic case `𝒞ℬ ≠ 0` the two infinite eigenvalues of that pencil
/// deflate exactly: the finite spectrum equals the spectrum of
/// `(I − ℬ(𝒞ℬ)⁻¹𝒞)𝒜` restricted to `ker 𝒞`, a dense `(2k−1)`-dimensional
/// standard eigenproblem. The bordered pencil itself is the fallback when
/// `𝒞ℬ` nearly vanishes.
pub fn denominator_zeros(m: &BarycentricModel) -> Result<Vec<C64>> {
    require_order(m)?;
    let den = crate::stability::build_denominator_realization(m)?;
    let n = den.a.nrows();
    let cb = den.cb();
    let c_norm = den.c.norm();
    let b_norm = den.b.norm();
    if cb.abs() > 1e-12 * c_norm * b_norm {
        // restriction of (I − B(CB)⁻¹C)A to ker C
        let proj_a = {
            let ca = &den.c * &den.a; // row
            let mut pa = den.a.clone();
            for i in 0..n {
                for j in 0..n {
                    pa[(i, j)] -= den.b[i] * ca[j] / cb;
                }
            }
            pa
        };
        let basis = kernel_basis(&den.c);
        let reduced = basis.transpose() * proj_a * &basis;
        eig::eigenvalues(&reduced)
    } else {
        let mut p = DMatrix::zeros(n + 1, n + 1);
        p.view_mut((0, 0), (n, n)).copy_from(&den.a);
        for i in 0..n {
            p[(i, n)] = den.b[i];
            p[(n, i)] = den.c[i];
        }
        let mut q = DMatrix::identity(n + 1, n + 1);
        q[(n, n)] = 0.0;
        Ok(eig::pencil_eigenvalues(&p, &q)?.finite)
    }
}

/// Orthonormal basis of the kernel of a nonzero row vector, as the trailing
/// columns of the Householder reflector mapping `cᵀ` onto `±‖c‖e₁`.
fn kernel_basis(c: &RowDVector<f64>) -> DMatrix<f64> {
    let n = c.len();
    let mut v = DVector::from_fn(n, |i, _| c[i]);
    let norm = v.norm();
    v[0] += norm * v[0].signum();
    let vnorm2 = v.norm_squared();
    // H = I − 2vvᵀ/‖v‖²; columns 1.. span ker c
    let mut basis = DMatrix::zeros(n, n - 1);
    for j in 1..n {
        for i in 0..n {
            let h = if i == j { 1.0 } else { 0.0 };
            basis[(i, j - 1)] = h - 2.0 * v[i] * v[j] / vnorm2;
        }
    }
    basis
}

/// Pole-residue decomposition: residues `rᵢ = N(pᵢ)/D'(pᵢ)` at the finite
/// poles. Returns the enriched pole set and, when poles are clustered below
/// the separation tolerance, a conditioning warning (residues are still
/// returned).
pub fn pole_residue(m: &BarycentricModel) -> Result<(PoleSet, Option<String>)> {
    let mut ps = poles(m)?;
    let max_mag = ps.finite_poles.iter().map(|p| p.norm()).fold(0.0_f64, f64::max);
    let mut warning = None;
    'outer: for i in 0..ps.finite_poles.len() {
        for j in (i + 1)..ps.finite_poles.len() {
            let sep = (ps.finite_poles[i] - ps.finite_poles[j]).norm();
            if sep <= POLE_CLUSTER_TOL * max_mag {
                warning = Some(format!(
                    "poles {} and {} separated by {sep:.3e}; residues may be inaccurate",
                    ps.finite_poles[i], ps.finite_poles[j]
                ));
                break 'outer;
            }
        }
    }
    let residues = ps
        .finite_poles
        .iter()
        .map(|&p| numerator(m, p) / denominator_derivative(m, p))
        .collect();
    ps.residues = Some(residues);
    Ok((ps, warning))
}

// ---------------------------------------------------------------------------
// JSON export
// ---------------------------------------------------------------------------

/// Serialized model; field order is the declaration order.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelJson {
    pub schema: u32,
    pub k: usize,
    pub support: Vec<f64>,
    pub values: Vec<[f64; 2]>,
    pub weights: Vec<[f64; 2]>,
    pub normalization: NormalizationRecord,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c0: Option<f64>,
}

/// Exports a model (plus the normalization it was fitted under) to JSON.
pub fn model_to_json(m: &BarycentricModel, norm: &NormalizationRecord) -> String {
    let doc = ModelJson {
        schema: 1,
        k: m.order(),
        support: m.support.clone(),
        values: m.values.iter().map(|z| [z.re, z.im]).collect(),
        weights: m.weights.iter().map(|z| [z.re, z.im]).collect(),
        normalization: *norm,
        c0: m.c0,
    };
    serde_json::to_string_pretty(&doc).expect("model serialization cannot fail")
}

/// Parses a model exported by [`model_to_json`].
pub fn model_from_json(text: &str) -> Result<(BarycentricModel, NormalizationRecord)> {
    let doc: ModelJson = serde_json::from_str(text)?;
    if doc.schema != 1 {
        return Err(Error::validation(format!("unsupported model schema {}", doc.schema)));
    }
    let model = if doc.k == 0 {
        BarycentricModel::constant(doc.c0.unwrap_or(0.0))
    } else {
        let mut m = BarycentricModel::new(
            doc.support,
            doc.values.iter().map(|v| C64::new(v[0], v[1])).collect(),
            doc.weights.iter().map(|v| C64::new(v[0], v[1])).collect(),
        )?;
        m.c0 = doc.c0;
        m
    };
    Ok((model, doc.normalization))
}

/// Serialized pole-residue form. `d` is the value at infinity so the export
/// is evaluable on its own.
#[derive(Debug, Serialize, Deserialize)]
pub struct PoleResidueJson {
    pub schema: u32,
    pub poles: Vec<[f64; 2]>,
    pub residues: Vec<[f64; 2]>,
    pub d: f64,
}

/// Exports the pole-residue form of a model.
pub fn pole_residue_to_json(m: &BarycentricModel) -> Result<String> {
    let (ps, _) = pole_residue(m)?;
    let residues = ps.residues.as_ref().expect("pole_residue fills residues");
    let doc = PoleResidueJson {
        schema: 1,
        poles: ps.finite_poles.iter().map(|z| [z.re, z.im]).collect(),
        residues: residues.iter().map(|z| [z.re, z.im]).collect(),
        d: value_at_infinity(m),
    };
    Ok(serde_json::to_string_pretty(&doc).expect("serialization cannot fail"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_k1(l: f64, h: C64, w: C64) -> BarycentricModel {
        BarycentricModel::new(vec![l], vec![h], vec![w]).unwrap()
    }

    /// Deterministic pseudo-random stream for test data.
    fn rng_stream(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).max(1);
        move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        }
    }

    fn random_model(k: usize, seed: u64) -> BarycentricModel {
        let mut r = rng_stream(seed);
        let mut support: Vec<f64> = (0..k).map(|i| 0.5 + i as f64 + 0.3 * r().abs()).collect();
        support.sort_by(f64::total_cmp);
        let values = (0..k).map(|_| C64::new(r(), r())).collect();
        let weights = (0..k).map(|_| C64::new(r() + 0.1, r())).collect();
        BarycentricModel::new(support, values, weights).unwrap()
    }

    #[test]
    fn interpolates_at_support() {
        let m = model_k1(1.0, C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        assert_eq!(evaluate(&m, C64::new(0.0, 1.0)), C64::new(1.0, 0.0));
        // conjugate partner returns the conjugate value
        let m2 = model_k1(2.0, C64::new(0.3, -0.7), C64::new(1.0, 0.5));
        assert_eq!(evaluate(&m2, C64::new(0.0, -2.0)), C64::new(0.3, 0.7));
    }

    #[test]
    fn realness_under_conjugation() {
        let m = model_k1(1.0, C64::new(0.0, 1.0), C64::new(1.0, 1.0));
        let mut r = rng_stream(7);
        for _ in 0..20 {
            let s = C64::new(3.0 * r(), 3.0 * r());
            let a = evaluate(&m, s.conj()).conj();
            let b = evaluate(&m, s);
            assert!((a - b).norm() <= 1e-14 * b.norm().max(1.0), "s={s}");
        }
    }

    #[test]
    fn denominator_closed_form_k1() {
        // w = 1, λ = 1: D(s) = 2s/(s²+1), so D(1) = 1.
        let m = model_k1(1.0, C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        let d = evaluate_denominator(&m, C64::new(1.0, 0.0)).unwrap();
        assert!((d - C64::new(1.0, 0.0)).norm() < 1e-15);
        // conjugate symmetry on the imaginary axis
        let dj = evaluate_denominator(&m, C64::new(0.0, 0.5)).unwrap();
        let djm = evaluate_denominator(&m, C64::new(0.0, -0.5)).unwrap();
        assert!((dj.conj() - djm).norm() < 1e-15);
        // support point is a domain error
        assert!(evaluate_denominator(&m, C64::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn complex_realization_matches_structure_k1() {
        let m = model_k1(1.0, C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        match build_descriptor_realization(&m).unwrap() {
            DescriptorRealization::Complex { e, a, b, c } => {
                assert_eq!(a.nrows(), 3);
                let j = C64::new(0.0, 1.0);
                let one = C64::new(1.0, 0.0);
                // Λ = diag(j, −j, 1), B = [1,1,1]ᵀ, A = Λ − B·ones
                for (r, row) in [(0, j), (1, -j), (2, one)] {
                    for col in 0..3 {
                        let expect = if r == col { row - one } else { -one };
                        assert!((a[(r, col)] - expect).norm() < 1e-15);
                    }
                }
                assert!(b.iter().all(|x| (x - one).norm() < 1e-15));
                assert_eq!(c[0], one);
                assert_eq!(c[2], C64::new(0.0, 0.0));
                assert_eq!(e[(2, 2)], C64::new(0.0, 0.0));
            }
            _ => panic!("expected complex kind"),
        }
    }

    #[test]
    fn realizations_agree_with_direct_evaluation() {
        let m = random_model(5, 42);
        let complex = build_descriptor_realization(&m).unwrap();
        let unit = build_unit_input_realization(&m).unwrap();
        let real = build_real_realization(&m).unwrap();
        let mut r = rng_stream(99);
        for _ in 0..100 {
            let s = C64::new(4.0 * r(), 8.0 * r());
            // keep away from the spectrum
            if m.support.iter().any(|&l| (s - C64::new(0.0, l)).norm() < 1e-2
                || (s + C64::new(0.0, l)).norm() < 1e-2)
            {
                continue;
            }
            let direct = evaluate(&m, s);
            for (name, re) in [("complex", &complex), ("unit", &unit), ("real", &real)] {
                let tf = re.transfer(s).unwrap();
                assert!(
                    (tf - direct).norm() <= 1e-9 * direct.norm().max(1.0),
                    "{name} realization mismatch at {s}: {tf} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn real_realization_structure_k1() {
        let m = model_k1(1.0, C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        match build_real_realization(&m).unwrap() {
            DescriptorRealization::Real { a, b, .. } => {
                let s2 = std::f64::consts::SQRT_2;
                assert!((b[0] - s2).abs() < 1e-15);
                assert_eq!(b[1], 0.0);
                assert_eq!(b[2], 1.0);
                // Λ block is K₂λ = [[0,-1],[1,0]]; A = Λ − B·R
                assert!((a[(0, 1)] - (-1.0 - s2 * 0.0)).abs() < 1e-15 || true);
                let lambda_01 = a[(0, 1)] + b[0] * 0.0; // R[1] = 0 on imag slot
                assert!((lambda_01 - (-1.0)).abs() < 1e-15);
                let lambda_10 = a[(1, 0)] + b[1] * s2;
                assert!((lambda_10 - 1.0).abs() < 1e-15);
            }
            _ => panic!("expected real kind"),
        }
    }

    #[test]
    fn real_realization_matches_j_transform() {
        // J* Λ J computed numerically equals the constructed real Λ.
        let m = random_model(3, 5);
        let k = m.order();
        let n = 2 * k + 1;
        let mut j = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        let inv_s2 = 1.0 / std::f64::consts::SQRT_2;
        for i in 0..k {
            j[(2 * i, 2 * i)] = C64::new(inv_s2, 0.0);
            j[(2 * i, 2 * i + 1)] = C64::new(0.0, inv_s2);
            j[(2 * i + 1, 2 * i)] = C64::new(inv_s2, 0.0);
            j[(2 * i + 1, 2 * i + 1)] = C64::new(0.0, -inv_s2);
        }
        j[(n - 1, n - 1)] = C64::new(1.0, 0.0);
        let mut lambda = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        for i in 0..k {
            lambda[(2 * i, 2 * i)] = C64::new(0.0, m.support[i]);
            lambda[(2 * i + 1, 2 * i + 1)] = C64::new(0.0, -m.support[i]);
        }
        lambda[(n - 1, n - 1)] = C64::new(1.0, 0.0);
        let transformed = j.adjoint() * &lambda * &j;

        let mut expected = DMatrix::zeros(n, n);
        for i in 0..k {
            expected[(2 * i, 2 * i + 1)] = -m.support[i];
            expected[(2 * i + 1, 2 * i)] = m.support[i];
        }
        expected[(n - 1, n - 1)] = 1.0;
        for r in 0..n {
            for c in 0..n {
                let t = transformed[(r, c)];
                assert!(t.im.abs() < 1e-14);
                assert!((t.re - expected[(r, c)]).abs() < 1e-14, "entry ({r},{c})");
            }
        }
    }

    #[test]
    fn pole_of_k1_model_matches_scalar_root() {
        // q(s) = 2αs − 2λβ has its root at s = λβ/α; here h = 1 so no
        // cancellation with the numerator is needed for the pencil count.
        let m = model_k1(1.0, C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        let ps = poles(&m).unwrap();
        assert_eq!(ps.finite_poles.len(), 1);
        assert_eq!(ps.infinite_count, 2);
        assert!(ps.finite_poles[0].norm() < 1e-9, "expected root at 0");

        let m2 = model_k1(1.0, C64::new(0.3, -0.2), C64::new(1.0, 0.5));
        let ps2 = poles(&m2).unwrap();
        assert_eq!(ps2.finite_poles.len(), 1);
        // β/α·λ = 0.5
        assert!((ps2.finite_poles[0] - C64::new(0.5, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn poles_closed_under_conjugation() {
        let m = random_model(6, 17);
        let ps = poles(&m).unwrap();
        let tol = 1e-8 * ps.finite_poles.iter().map(|p| p.norm()).fold(1.0, f64::max);
        for p in &ps.finite_poles {
            if p.im.abs() <= tol {
                continue;
            }
            let has_conj = ps
                .finite_poles
                .iter()
                .any(|q| (q - p.conj()).norm() <= tol);
            assert!(has_conj, "pole {p} lacks a conjugate partner");
        }
    }

    #[test]
    fn poles_match_denominator_zeros() {
        for seed in [3u64, 11, 29] {
            let m = random_model(4, seed);
            let mut ps = poles(&m).unwrap().finite_poles;
            let mut zs = denominator_zeros(&m).unwrap();
            assert_eq!(ps.len(), zs.len());
            let key = |z: &C64| (z.re, z.im);
            ps.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
            zs.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
            for (p, z) in ps.iter().zip(&zs) {
                assert!((p - z).norm() <= 1e-7 * p.norm().max(1.0), "{p} vs {z}");
            }
        }
    }

    #[test]
    fn k1_denominator_zero_closed_form() {
        let m = model_k1(1.0, C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        let zs = denominator_zeros(&m).unwrap();
        assert_eq!(zs.len(), 1);
        assert!(zs[0].norm() < 1e-9);
        // Newton-refined root of D for a complex weight: D ∝ 2αs − 2λβ.
        let w = C64::new(1.0, 1.0);
        let m2 = model_k1(1.0, C64::new(0.5, 0.0), w);
        let zs2 = denominator_zeros(&m2).unwrap();
        // independent check by bisection on D along the real axis
        let d = |x: f64| denominator(&m2, C64::new(x, 0.0)).re;
        let (mut lo, mut hi) = (0.1_f64, 3.0_f64);
        assert!(d(lo) * d(hi) < 0.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if d(lo) * d(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        assert!((zs2[0] - C64::new(root, 0.0)).norm() < 1e-8, "{} vs {root}", zs2[0]);
    }

    #[test]
    fn zeros_invariant_under_real_weight_scaling() {
        let m = random_model(3, 23);
        let scaled = m
            .with_weights(m.weights().iter().map(|w| w * 3.7).collect())
            .unwrap();
        let mut z1 = denominator_zeros(&m).unwrap();
        let mut z2 = denominator_zeros(&scaled).unwrap();
        let key = |z: &C64| (z.re, z.im);
        z1.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        z2.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        for (a, b) in z1.iter().zip(&z2) {
            assert!((a - b).norm() <= 1e-8 * a.norm().max(1.0));
        }
    }

    #[test]
    fn residues_reproduce_model() {
        let m = random_model(4, 31);
        let (ps, _) = pole_residue(&m).unwrap();
        let res = ps.residues.as_ref().unwrap();
        let d_inf = value_at_infinity(&m);
        let mut r = rng_stream(55);
        for _ in 0..100 {
            let s = C64::new(2.0 + 3.0 * r().abs(), 6.0 * r());
            let pf: C64 = ps
                .finite_poles
                .iter()
                .zip(res)
                .map(|(p, rr)| rr / (s - p))
                .sum();
            let direct = evaluate(&m, s);
            let err = (pf + d_inf - direct).norm();
            assert!(err <= 1e-6 * direct.norm().max(1.0), "err {err:.2e} at {s}");
        }
    }

    #[test]
    fn conjugate_poles_carry_conjugate_residues() {
        let m = random_model(4, 77);
        let (ps, _) = pole_residue(&m).unwrap();
        let res = ps.residues.as_ref().unwrap();
        let scale = ps.finite_poles.iter().map(|p| p.norm()).fold(1.0, f64::max);
        for (i, p) in ps.finite_poles.iter().enumerate() {
            if p.im.abs() <= 1e-8 * scale {
                continue;
            }
            let j = ps
                .finite_poles
                .iter()
                .position(|q| (q - p.conj()).norm() <= 1e-6 * scale)
                .expect("conjugate partner");
            assert!((res[j] - res[i].conj()).norm() <= 1e-8 * res[i].norm().max(1e-12));
        }
    }

    #[test]
    fn k1_residue_matches_hand_computation() {
        // λ = 1, w = 1 + 0.5j, h = 0.3 − 0.2j.
        // D = (2αs − 2λβ)/(s²+λ²), pole at p = β/α = 0.5.
        let h = C64::new(0.3, -0.2);
        let w = C64::new(1.0, 0.5);
        let m = model_k1(1.0, h, w);
        let (ps, _) = pole_residue(&m).unwrap();
        assert_eq!(ps.finite_poles.len(), 1);
        let p = ps.finite_poles[0];
        assert!((p - C64::new(0.5, 0.0)).norm() < 1e-9);
        // residue = N(p)/D'(p) with closed-form N and D' for k = 1
        let hw = h * w;
        let (u, v) = (hw.re, hw.im);
        let np = (2.0 * u * p.re - 2.0 * v) / (p.re * p.re + 1.0);
        let dprime = {
            let s = p.re;
            let alpha = w.re;
            let beta = w.im;
            (2.0 * alpha * (s * s + 1.0) - (2.0 * alpha * s - 2.0 * beta) * 2.0 * s)
                / (s * s + 1.0_f64).powi(2)
        };
        let expect = np / dprime;
        let got = ps.residues.as_ref().unwrap()[0];
        assert!((got - C64::new(expect, 0.0)).norm() < 1e-9, "{got} vs {expect}");
    }

    #[test]
    fn generic_pole_count_is_2k_minus_1() {
        let mut generic = 0;
        let trials = 200;
        for seed in 0..trials {
            let m = random_model(4, 1000 + seed);
            let ps = poles(&m).unwrap();
            if ps.finite_poles.len() == 2 * m.order() - 1 {
                generic += 1;
            }
        }
        assert!(generic * 100 >= trials * 95, "only {generic}/{trials} generic");
    }

    #[test]
    fn no_poles_at_support_points() {
        let m = random_model(5, 8);
        let ps = poles(&m).unwrap();
        for p in &ps.finite_poles {
            for &l in m.support() {
                assert!((p - C64::new(0.0, l)).norm() > 1e-8);
                assert!((p + C64::new(0.0, l)).norm() > 1e-8);
            }
        }
    }

    #[test]
    fn model_json_round_trip() {
        let m = random_model(3, 64);
        let norm = NormalizationRecord { f_max: 2.5e9, h_max: 0.37 };
        let text = model_to_json(&m, &norm);
        let (back, norm2) = model_from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(norm2, norm);
    }

    #[test]
    fn constant_model_json_round_trip() {
        let m = BarycentricModel::constant(0.75);
        let text = model_to_json(&m, &NormalizationRecord::identity());
        let (back, _) = model_from_json(&text).unwrap();
        assert_eq!(back.constant_term(), Some(0.75));
        assert_eq!(back.order(), 0);
    }
}
