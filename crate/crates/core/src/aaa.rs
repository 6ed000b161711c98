//! The greedy rational-fitting loop with enforced conjugate symmetry.
//!
//! Starting from the constant mean model, each iteration moves the
//! worst-fitted sample point into the support set, assembles the real
//! quasi-Loewner matrix on the remaining test points, and takes the right
//! singular vector of least singular value as the new weight vector. The
//! loop stops when the maximum deviation over the test set drops below the
//! target tolerance or the iteration budget is exhausted.

use nalgebra::DVector;
use serde::Serialize;

use crate::barycentric::{evaluate, BarycentricModel};
use crate::data::FrequencyDataset;
use crate::error::{Error, Result};
use crate::loewner::{real_quasi_loewner, RealQuasiLoewner};
use crate::C64;

/// How pointwise deviations are measured during support selection and
/// convergence checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorMode {
    #[default]
    Absolute,
    /// `|H − Ĥ| / |H|`, falling back to absolute where `|H|` is tiny.
    Relative,
}

/// One greedy iteration: the error that triggered the selection, the chosen
/// frequency, and the smallest singular value of the LS matrix solved after
/// the support update.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub chosen_freq: f64,
    pub max_err: f64,
    pub sigma_min: f64,
}

impl IterationRecord {
    /// One-line JSON trace record.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("serialization cannot fail")
    }
}

/// Mutable state of the greedy iteration; exposed so the outer
/// stability-enforcement loop can resume it with a tightened tolerance.
#[derive(Debug, Clone)]
pub struct AaaState<'a> {
    ds: &'a FrequencyDataset,
    error_mode: ErrorMode,
    support_idx: Vec<usize>,
    /// Remaining test indices, ascending by frequency.
    test_idx: Vec<usize>,
    model: BarycentricModel,
    x_opt: Option<DVector<f64>>,
    quasi: Option<RealQuasiLoewner>,
    history: Vec<IterationRecord>,
}

/// Result of a fit.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: BarycentricModel,
    pub converged: bool,
    /// Number of support points `k`.
    pub iterations: usize,
    /// Maximum deviation over the final test set.
    pub final_max_error: f64,
    /// LS matrix of the final iteration, retained for stability enforcement.
    pub loewner_real: Option<RealQuasiLoewner>,
    /// Final LS minimizer, unit norm, sign-normalized (`Σαᵢ > 0`).
    pub x_opt: Option<DVector<f64>>,
    pub history: Vec<IterationRecord>,
}

impl<'a> AaaState<'a> {
    pub fn new(ds: &'a FrequencyDataset, error_mode: ErrorMode) -> Result<Self> {
        if ds.len() < 2 {
            return Err(Error::validation("greedy fit needs at least 2 samples"));
        }
        // The mean of conjugate-asymmetric samples over jR+ is complex in
        // general; its real part seeds the constant model so realness holds
        // from the start.
        let mean: C64 = ds.values().iter().sum::<C64>() / ds.len() as f64;
        Ok(Self {
            ds,
            error_mode,
            support_idx: Vec::new(),
            test_idx: (0..ds.len()).collect(),
            model: BarycentricModel::constant(mean.re),
            x_opt: None,
            quasi: None,
            history: Vec::new(),
        })
    }

    pub fn model(&self) -> &BarycentricModel {
        &self.model
    }

    pub fn order(&self) -> usize {
        self.support_idx.len()
    }

    pub fn history(&self) -> &[IterationRecord] {
        &self.history
    }

    pub fn x_opt(&self) -> Option<&DVector<f64>> {
        self.x_opt.as_ref()
    }

    pub fn quasi_loewner(&self) -> Option<&RealQuasiLoewner> {
        self.quasi.as_ref()
    }

    pub fn test_indices(&self) -> &[usize] {
        &self.test_idx
    }

    /// Deviation of `model` at dataset index `v` under the configured mode.
    pub fn deviation_at(&self, model: &BarycentricModel, v: usize) -> f64 {
        let h = self.ds.values()[v];
        let dev = (evaluate(model, self.ds.point(v)) - h).norm();
        match self.error_mode {
            ErrorMode::Absolute => dev,
            ErrorMode::Relative => {
                let mag = h.norm();
                if mag > 1e-300 {
                    dev / mag
                } else {
                    dev
                }
            }
        }
    }

    /// Maximum deviation of a model over the current test set.
    pub fn max_test_deviation(&self, model: &BarycentricModel) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        // test_idx ascends by frequency, so a strict comparison breaks ties
        // toward the lowest frequency.
        for &v in &self.test_idx {
            let e = self.deviation_at(model, v);
            if best.map_or(true, |(_, b)| e > b) {
                best = Some((v, e));
            }
        }
        best
    }

    /// Index of the worst-fitted test point of the current model.
    pub fn select_support(&self) -> Result<usize> {
        self.max_test_deviation(&self.model)
            .map(|(v, _)| v)
            .ok_or_else(|| Error::Saturation("no test points remain".into()))
    }

    /// Moves the worst point into the support set and re-solves the weights.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let (chosen, max_err) = self
            .max_test_deviation(&self.model)
            .ok_or_else(|| Error::Saturation("no test points remain".into()))?;
        let ell = self.support_idx.len() + 1;
        if 2 * (self.ds.len() - ell) < 2 * ell {
            return Err(Error::Saturation(format!(
                "support of size {ell} leaves too few test points for a full-rank LS system"
            )));
        }
        self.support_idx.push(chosen);
        self.test_idx.retain(|&v| v != chosen);

        let support: Vec<(f64, C64)> = self
            .support_idx
            .iter()
            .map(|&v| (self.ds.freqs()[v], self.ds.values()[v]))
            .collect();
        let test: Vec<(f64, C64)> = self
            .test_idx
            .iter()
            .map(|&v| (self.ds.freqs()[v], self.ds.values()[v]))
            .collect();
        let quasi = real_quasi_loewner(&support, &test)?;
        let (x, sigma_min) = solve_weights(&quasi)?;
        let weights: Vec<C64> = (0..ell).map(|i| C64::new(x[2 * i], x[2 * i + 1])).collect();
        self.model = BarycentricModel::new(
            support.iter().map(|p| p.0).collect(),
            support.iter().map(|p| p.1).collect(),
            weights,
        )?;
        self.x_opt = Some(x);
        self.quasi = Some(quasi);
        let rec = IterationRecord {
            iter: ell,
            chosen_freq: self.ds.freqs()[chosen],
            max_err,
            sigma_min,
        };
        self.history.push(rec);
        Ok(rec)
    }

    /// Runs greedy iterations until the test-set error is at most `eps` or
    /// the model has `max_order` support points. Returns convergence.
    pub fn run(&mut self, eps: f64, max_order: usize) -> Result<bool> {
        loop {
            let (_, err) = self
                .max_test_deviation(&self.model)
                .ok_or_else(|| Error::Saturation("no test points remain".into()))?;
            if err <= eps {
                return Ok(true);
            }
            if self.support_idx.len() >= max_order {
                return Ok(false);
            }
            self.step()?;
        }
    }

    /// Replaces the current weights (used when the stabilized weights from
    /// the SDP round are carried back into the loop).
    pub fn replace_weights(&mut self, weights: Vec<C64>) -> Result<()> {
        self.model = self.model.with_weights(weights)?;
        Ok(())
    }

    pub(crate) fn into_outcome(self, eps: f64) -> FitOutcome {
        let final_max_error = self
            .max_test_deviation(&self.model)
            .map(|(_, e)| e)
            .unwrap_or(0.0);
        FitOutcome {
            converged: final_max_error <= eps,
            iterations: self.support_idx.len(),
            model: self.model,
            final_max_error,
            loewner_real: self.quasi,
            x_opt: self.x_opt,
            history: self.history,
        }
    }
}

/// Default iteration budget: `⌊V/4⌋` keeps the LS system tall (at least
/// three times more rows than columns).
pub fn default_max_order(n_samples: usize) -> usize {
    (n_samples / 4).max(1)
}

/// Greedy fit with the given tolerance and iteration budget
/// (`None` → `⌊V/4⌋`).
pub fn aaa_fit(ds: &FrequencyDataset, eps: f64, max_iter: Option<usize>) -> Result<FitOutcome> {
    aaa_fit_with_mode(ds, eps, max_iter, ErrorMode::Absolute)
}

pub fn aaa_fit_with_mode(
    ds: &FrequencyDataset,
    eps: f64,
    max_iter: Option<usize>,
    mode: ErrorMode,
) -> Result<FitOutcome> {
    if !(eps > 0.0) {
        return Err(Error::validation("tolerance must be positive"));
    }
    let max_order = max_iter.unwrap_or_else(|| default_max_order(ds.len()));
    if max_order == 0 {
        return Err(Error::validation("iteration budget must be at least 1"));
    }
    let mut state = AaaState::new(ds, mode)?;
    state.run(eps, max_order)?;
    Ok(state.into_outcome(eps))
}

/// Solves `min ‖𝕃_real x‖₂ , ‖x‖₂ = 1`: the right singular vector of the
/// least singular value, sign-flipped so that `Σᵢ αᵢ > 0` (equivalently
/// `x_optᵀℬ > 0` for the denominator input map). Also returns `σ_min`.
///
/// `σ_min/σ_max` below `10⁻¹⁴` is the healthy convergence signature of an
/// exact fit (the weight vector spans the null space), so it is reported to
/// callers through the iteration history rather than treated as an error.
pub fn solve_weights(m: &RealQuasiLoewner) -> Result<(DVector<f64>, f64)> {
    let mat = m.matrix();
    if mat.nrows() < mat.ncols() {
        return Err(Error::validation(format!(
            "LS matrix is wide ({}×{}); the minimizer is not unique",
            mat.nrows(),
            mat.ncols()
        )));
    }
    let svd = mat
        .clone()
        .try_svd(false, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::numerical("SVD of quasi-Loewner matrix failed"))?;
    let v_t = svd.v_t.expect("requested V^T");
    let last = v_t.nrows() - 1;
    let mut x = DVector::from_fn(v_t.ncols(), |j, _| v_t[(last, j)]);
    let sigma_min = svd.singular_values[last];

    // sign convention: Σαᵢ > 0, with the first nonzero entry as tiebreaker
    let alpha_sum: f64 = x.iter().step_by(2).sum();
    let flip = if alpha_sum != 0.0 {
        alpha_sum < 0.0
    } else {
        x.iter().find(|&&v| v != 0.0).map_or(false, |&v| v < 0.0)
    };
    if flip {
        x = -x;
    }
    let norm = x.norm();
    if !(norm > 0.0) {
        return Err(Error::numerical("SVD returned a zero singular vector"));
    }
    x /= norm;
    Ok((x, sigma_min))
}
