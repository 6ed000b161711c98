//! Outer fitting loop with guaranteed stability, plus the truncate-and-refit
//! comparison baseline.
//!
//! The loop runs the greedy fit at a working tolerance; if the resulting
//! model is already stable it is returned as-is. Otherwise the convex
//! stability program is solved once on the final least-squares matrix and
//! the weights are rebuilt from its solution, which is guaranteed stable.
//! If the stabilized model misses the target tolerance, the working
//! tolerance is tightened by `θ` and the greedy loop resumes from the
//! current support set (support points are only ever added).

use nalgebra::DVector;
use serde::Serialize;

use crate::aaa::{default_max_order, AaaState, ErrorMode};
use crate::barycentric::{self, BarycentricModel};
use crate::data::FrequencyDataset;
use crate::error::{Error, Result};
use crate::sdp::{build_stability_sdp, recover_weights, solve_sdp, SdpConfig, SdpSolution, SdpStatus};
use crate::stability::{build_denominator_realization, classify_stability, transform_denominator};
use crate::C64;

/// Configuration of the stability-enforcing outer loop.
#[derive(Debug, Clone)]
pub struct StabAaaConfig {
    /// Target maximum deviation over the test set.
    pub eps: f64,
    /// Tolerance decreasing factor, strictly between 0 and 1.
    pub theta: f64,
    /// Maximum number of outer retries after the first stabilization.
    pub m_max: usize,
    /// Greedy iteration budget (`None` → `⌊V/4⌋`).
    pub max_order: Option<usize>,
    pub error_mode: ErrorMode,
    pub sdp: SdpConfig,
    /// Restart the greedy loop from scratch on each outer round instead of
    /// resuming from the accumulated support set (A/B experiment flag).
    pub restart: bool,
}

impl StabAaaConfig {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            theta: 0.1,
            m_max: 5,
            max_order: None,
            error_mode: ErrorMode::Absolute,
            sdp: SdpConfig::default(),
            restart: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::validation("eps must be positive"));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::validation("theta must lie strictly in (0, 1)"));
        }
        Ok(())
    }
}

/// Per-round log entry of the outer loop.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub eps_m: f64,
    pub order: usize,
    pub stable_unconstrained: bool,
    pub sdp_invoked: bool,
    /// Test-set error of the stabilized model, when the SDP ran.
    pub stabilized_error: Option<f64>,
}

/// Result of the stability-enforcing fit. The returned model is always
/// asymptotically stable.
#[derive(Debug, Clone)]
pub struct StabAaaOutcome {
    pub model: BarycentricModel,
    /// Hard postcondition; included for symmetry with the reports.
    pub stable: bool,
    pub met_tolerance: bool,
    /// Number of outer rounds executed (`M` counter at return).
    pub outer_rounds: usize,
    pub sdp_invocations: usize,
    /// Working tolerance at return.
    pub final_eps: f64,
    /// Maximum deviation over the test set at return.
    pub test_set_error: f64,
    pub rounds: Vec<RoundRecord>,
    /// Solution of the last stability program, when one was solved.
    pub last_sdp: Option<SdpSolution>,
}

impl StabAaaOutcome {
    /// Summary JSON: `{stable, met_tolerance, rounds, sdp_calls, final_eps}`.
    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc {
            schema: u32,
            stable: bool,
            met_tolerance: bool,
            rounds: usize,
            sdp_calls: usize,
            final_eps: f64,
        }
        serde_json::to_string_pretty(&Doc {
            schema: 1,
            stable: self.stable,
            met_tolerance: self.met_tolerance,
            rounds: self.outer_rounds,
            sdp_calls: self.sdp_invocations,
            final_eps: self.final_eps,
        })
        .expect("serialization cannot fail")
    }
}

/// Runs the stability-enforcing fit.
pub fn stabaaa_fit(ds: &FrequencyDataset, cfg: &StabAaaConfig) -> Result<StabAaaOutcome> {
    cfg.validate()?;
    let max_order = cfg.max_order.unwrap_or_else(|| default_max_order(ds.len()));
    let mut state = AaaState::new(ds, cfg.error_mode)?;
    let mut eps_m = cfg.eps;
    let mut round = 1usize;
    let mut sdp_invocations = 0usize;
    let mut rounds = Vec::new();
    let mut last_sdp = None;

    loop {
        state.run(eps_m, max_order)?;
        let model = state.model().clone();
        let order = model.order();

        let stable_now = if order == 0 {
            true // constant model has no poles
        } else {
            classify_stability(&model)?.stable
        };
        if stable_now {
            rounds.push(RoundRecord {
                round,
                eps_m,
                order,
                stable_unconstrained: true,
                sdp_invoked: false,
                stabilized_error: None,
            });
            let err = state
                .max_test_deviation(&model)
                .map(|(_, e)| e)
                .unwrap_or(0.0);
            return Ok(StabAaaOutcome {
                stable: true,
                met_tolerance: err <= cfg.eps,
                outer_rounds: round,
                sdp_invocations,
                final_eps: eps_m,
                test_set_error: err,
                model,
                rounds,
                last_sdp,
            });
        }

        // Stabilization branch: one SDP solve on the final LS matrix.
        let quasi = state
            .quasi_loewner()
            .ok_or_else(|| Error::numerical("no LS matrix available for stabilization"))?;
        let x_opt = state
            .x_opt()
            .expect("solved state carries its minimizer")
            .clone();
        let den = build_denominator_realization(&model)?;
        let td = match transform_denominator(&den, quasi, &x_opt) {
            Ok(td) => td,
            Err(Error::Conditioning(msg)) => {
                return Err(Error::Stabilization {
                    reason: format!(
                        "{msg}; the LS matrix is numerically rank deficient — retry with a larger tolerance"
                    ),
                    model: Box::new(model),
                })
            }
            Err(e) => return Err(e),
        };
        let sdp = build_stability_sdp(&td, cfg.sdp.clone());
        let sol = match solve_sdp(&sdp) {
            Ok(sol) => sol,
            Err(e) => {
                return Err(Error::Stabilization {
                    reason: format!("stability program failed: {e}"),
                    model: Box::new(model),
                })
            }
        };
        sdp_invocations += 1;
        match sol.status {
            SdpStatus::Optimal => {}
            SdpStatus::Infeasible => {
                return Err(Error::Stabilization {
                    reason: "stability program is infeasible".into(),
                    model: Box::new(model),
                })
            }
            SdpStatus::MaxIters => {
                return Err(Error::Stabilization {
                    reason: "stability program hit its iteration budget without converging".into(),
                    model: Box::new(model),
                })
            }
        }
        let weights = match recover_weights(&sol, &td) {
            Ok(w) => w,
            Err(e) => {
                return Err(Error::Stabilization {
                    reason: format!("weight recovery failed: {e}"),
                    model: Box::new(model),
                })
            }
        };
        let stabilized = model.with_weights(weights.clone())?;
        let recheck = classify_stability(&stabilized)?;
        if !recheck.stable {
            return Err(Error::Stabilization {
                reason: format!(
                    "stabilized model failed the eigenvalue re-check (margin {:.3e})",
                    recheck.margin
                ),
                model: Box::new(model),
            });
        }
        last_sdp = Some(sol);

        let err_after = state
            .max_test_deviation(&stabilized)
            .map(|(_, e)| e)
            .unwrap_or(0.0);
        rounds.push(RoundRecord {
            round,
            eps_m,
            order,
            stable_unconstrained: false,
            sdp_invoked: true,
            stabilized_error: Some(err_after),
        });

        if err_after < cfg.eps || round > cfg.m_max {
            return Ok(StabAaaOutcome {
                stable: true,
                met_tolerance: err_after < cfg.eps,
                outer_rounds: round,
                sdp_invocations,
                final_eps: eps_m,
                test_set_error: err_after,
                model: stabilized,
                rounds,
                last_sdp,
            });
        }

        eps_m *= cfg.theta;
        round += 1;
        if cfg.restart {
            state = AaaState::new(ds, cfg.error_mode)?;
        } else {
            // resume from the stabilized model: its deviations drive the
            // next support selection
            state.replace_weights(weights)?;
        }
    }
}

// ---------------------------------------------------------------------------
// Truncate-and-refit baseline
// ---------------------------------------------------------------------------

/// Stable pole-residue model produced by the truncation baseline.
#[derive(Debug, Clone)]
pub struct PoleResidueModel {
    pub poles: Vec<C64>,
    pub residues: Vec<C64>,
    pub d: f64,
}

impl PoleResidueModel {
    pub fn eval(&self, s: C64) -> C64 {
        let mut h = C64::new(self.d, 0.0);
        for (p, r) in self.poles.iter().zip(&self.residues) {
            h += r / (s - p);
        }
        h
    }

    pub fn order(&self) -> usize {
        self.poles.len()
    }

    pub fn is_stable(&self) -> bool {
        self.poles.iter().all(|p| p.re < 0.0)
    }

    /// Export in the pole-residue JSON schema.
    pub fn to_json(&self) -> String {
        let doc = barycentric::PoleResidueJson {
            schema: 1,
            poles: self.poles.iter().map(|z| [z.re, z.im]).collect(),
            residues: self.residues.iter().map(|z| [z.re, z.im]).collect(),
            d: self.d,
        };
        serde_json::to_string_pretty(&doc).expect("serialization cannot fail")
    }
}

/// Baseline stabilization: drop the unstable poles of an unconstrained fit
/// and re-optimize the remaining residues (plus a real constant term) in
/// least squares over all data points, with conjugate pairing enforced.
pub fn truncate_refit(m: &BarycentricModel, ds: &FrequencyDataset) -> Result<PoleResidueModel> {
    let (ps, _) = barycentric::pole_residue(m)?;
    let scale = ps
        .finite_poles
        .iter()
        .map(|p| p.norm())
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    let stable: Vec<C64> = ps
        .finite_poles
        .iter()
        .copied()
        .filter(|p| p.re < 0.0)
        .collect();
    if stable.is_empty() {
        return Err(Error::Degenerate("model has no stable poles to keep".into()));
    }
    // split into real poles and one representative per conjugate pair
    let imag_tol = 1e-9 * scale;
    let mut real_poles = Vec::new();
    let mut cc_poles = Vec::new();
    for &p in &stable {
        if p.im.abs() <= imag_tol {
            real_poles.push(C64::new(p.re, 0.0));
        } else if p.im > 0.0 {
            cc_poles.push(p);
        }
    }

    let n_cols = real_poles.len() + 2 * cc_poles.len() + 1;
    let n_rows = 2 * ds.len();
    let mut a = nalgebra::DMatrix::zeros(n_rows, n_cols);
    let mut b = DVector::zeros(n_rows);
    for v in 0..ds.len() {
        let s = ds.point(v);
        let mut col = 0;
        for &p in &real_poles {
            let phi = 1.0 / (s - p);
            a[(v, col)] = phi.re;
            a[(ds.len() + v, col)] = phi.im;
            col += 1;
        }
        for &p in &cc_poles {
            let phi1 = 1.0 / (s - p);
            let phi2 = 1.0 / (s - p.conj());
            let ca = phi1 + phi2;
            let cb = C64::new(0.0, 1.0) * (phi1 - phi2);
            a[(v, col)] = ca.re;
            a[(ds.len() + v, col)] = ca.im;
            a[(v, col + 1)] = cb.re;
            a[(ds.len() + v, col + 1)] = cb.im;
            col += 2;
        }
        a[(v, col)] = 1.0; // constant term, real
        b[v] = ds.values()[v].re;
        b[ds.len() + v] = ds.values()[v].im;
    }
    let svd = a
        .svd(true, true);
    let sol = svd
        .solve(&b, 1e-13)
        .map_err(|e| Error::numerical(format!("residue LS solve failed: {e}")))?;

    let mut poles = Vec::new();
    let mut residues = Vec::new();
    let mut col = 0;
    for &p in &real_poles {
        poles.push(p);
        residues.push(C64::new(sol[col], 0.0));
        col += 1;
    }
    for &p in &cc_poles {
        let r = C64::new(sol[col], sol[col + 1]);
        poles.push(p);
        residues.push(r);
        poles.push(p.conj());
        residues.push(r.conj());
        col += 2;
    }
    Ok(PoleResidueModel {
        poles,
        residues,
        d: sol[col],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aaa::aaa_fit;
    use crate::data::{error_metrics, normalize};
    use crate::synth;

    fn two_pole_dataset() -> FrequencyDataset {
        // H(s) = 1/((s+1)(s+2)) sampled at 50 points
        let h = |s: C64| 1.0 / ((s + 1.0) * (s + 2.0));
        let freqs = synth::log_freq_grid(0.05, 20.0, 50);
        let values: Vec<C64> = freqs.iter().map(|&f| h(C64::new(0.0, f))).collect();
        FrequencyDataset::new(freqs, values).unwrap()
    }

    #[test]
    fn stable_fit_bypasses_the_sdp() {
        let (ds, _) = normalize(&two_pole_dataset()).unwrap();
        let cfg = StabAaaConfig::new(1e-9);
        let out = stabaaa_fit(&ds, &cfg).unwrap();
        let plain = aaa_fit(&ds, 1e-9, None).unwrap();
        assert!(out.stable);
        assert_eq!(out.sdp_invocations, 0);
        assert!(out.met_tolerance);
        // identical output to the unconstrained path, elementwise
        assert_eq!(out.model.support(), plain.model.support());
        assert_eq!(out.model.weights(), plain.model.weights());
        assert_eq!(out.model.values(), plain.model.values());
    }

    #[test]
    fn unstable_fit_is_stabilized() {
        // lightly damped modes plus small perturbations at a moderate
        // tolerance reliably produce unstable unconstrained fits
        let mut found = false;
        for seed in 0..20u64 {
            let sys = synth::lightly_damped_system(&mut synth::seeded_rng(900 + seed), 4);
            let freqs = synth::log_freq_grid(0.3, 8.0, 260);
            let raw = synth::sample(&sys, &freqs);
            let noisy = synth::perturb(&raw, 1e-4, &mut synth::seeded_rng(7000 + seed));
            let (ds, _) = normalize(&noisy).unwrap();
            let eps = 3e-4;
            let budget = Some(12);
            let plain = aaa_fit(&ds, eps, budget).unwrap();
            if plain.model.order() == 0 || !plain.converged {
                continue;
            }
            let rep = classify_stability(&plain.model).unwrap();
            if rep.stable {
                continue;
            }
            found = true;
            let mut cfg = StabAaaConfig::new(eps);
            cfg.max_order = budget;
            let out = stabaaa_fit(&ds, &cfg).unwrap();
            assert!(out.stable);
            assert!(out.sdp_invocations >= 1);
            let recheck = classify_stability(&out.model).unwrap();
            assert!(recheck.stable, "margin {}", recheck.margin);
            break;
        }
        assert!(found, "no unstable seed found; generator needs retuning");
    }

    #[test]
    fn forced_single_round_keeps_complexity() {
        // m_max = 0 forces the stabilized model to keep the same order even
        // when it misses the tolerance
        for seed in 0..20u64 {
            let sys = synth::lightly_damped_system(&mut synth::seeded_rng(300 + seed), 4);
            let freqs = synth::log_freq_grid(0.3, 8.0, 260);
            let noisy = synth::perturb(
                &synth::sample(&sys, &freqs),
                1e-4,
                &mut synth::seeded_rng(400 + seed),
            );
            let (ds, _) = normalize(&noisy).unwrap();
            let eps = 3e-4;
            let budget = Some(12);
            let plain = aaa_fit(&ds, eps, budget).unwrap();
            if plain.model.order() == 0
                || !plain.converged
                || classify_stability(&plain.model).unwrap().stable
            {
                continue;
            }
            let mut cfg = StabAaaConfig::new(eps);
            cfg.max_order = budget;
            cfg.m_max = 0;
            let out = stabaaa_fit(&ds, &cfg).unwrap();
            assert!(out.stable);
            assert_eq!(out.outer_rounds, 1);
            assert_eq!(out.model.order(), plain.model.order());
            return;
        }
        panic!("no unstable seed found");
    }

    #[test]
    fn tolerance_ladder_is_geometric() {
        // ε_M = ε·θ^{M−1} exactly, checked through the round records
        for seed in 0..12u64 {
            let sys = synth::lightly_damped_system(&mut synth::seeded_rng(100 + seed), 5);
            let freqs = synth::log_freq_grid(0.3, 9.0, 300);
            let noisy = synth::perturb(
                &synth::sample(&sys, &freqs),
                2e-4,
                &mut synth::seeded_rng(200 + seed),
            );
            let (ds, _) = normalize(&noisy).unwrap();
            let eps = 1e-4;
            let mut cfg = StabAaaConfig::new(eps);
            cfg.max_order = Some(14);
            let Ok(out) = stabaaa_fit(&ds, &cfg) else { continue };
            if out.outer_rounds < 2 {
                continue;
            }
            for rec in &out.rounds {
                let expect = eps * cfg.theta.powi(rec.round as i32 - 1);
                assert!(
                    (rec.eps_m - expect).abs() <= f64::EPSILON * expect,
                    "round {}: {} vs {}",
                    rec.round,
                    rec.eps_m,
                    expect
                );
            }
            // support never shrinks across rounds
            let mut last = 0;
            for rec in &out.rounds {
                assert!(rec.order >= last);
                last = rec.order;
            }
            return;
        }
        // fine if every seed stabilized in one round; the invariant is
        // covered by the records check above when it triggers
    }

    #[test]
    fn refit_of_fully_stable_model_stays_close() {
        let (ds, _) = normalize(&two_pole_dataset()).unwrap();
        let fit = aaa_fit(&ds, 1e-8, None).unwrap();
        let rep = classify_stability(&fit.model).unwrap();
        assert!(rep.stable);
        let baseline = truncate_refit(&fit.model, &ds).unwrap();
        assert!(baseline.is_stable());
        let m_orig = error_metrics(|s| crate::barycentric::evaluate(&fit.model, s), &ds);
        let m_refit = error_metrics(|s| baseline.eval(s), &ds);
        assert!(
            m_refit.e_2 <= 2.0 * m_orig.e_2.max(1e-12),
            "refit E2 {} vs original {}",
            m_refit.e_2,
            m_orig.e_2
        );
    }

    #[test]
    fn refit_drops_mirrored_pole() {
        // data from a 2-pole system with one unstable pole: the baseline
        // keeps only the stable one and solves the residue LS exactly as
        // the normal equations would
        let p_stable = C64::new(-0.5, 0.0);
        let p_unstable = C64::new(0.4, 0.0);
        let h = |s: C64| 1.0 / (s - p_stable) + 0.3 / (s - p_unstable);
        let freqs = synth::log_freq_grid(0.05, 10.0, 60);
        let values: Vec<C64> = freqs.iter().map(|&f| h(C64::new(0.0, f))).collect();
        let ds = FrequencyDataset::new(freqs, values).unwrap();
        let fit = aaa_fit(&ds, 1e-9, None).unwrap();
        let rep = classify_stability(&fit.model).unwrap();
        assert!(!rep.stable, "fit should reproduce the unstable pole");

        let baseline = truncate_refit(&fit.model, &ds).unwrap();
        assert!(baseline.is_stable());
        // normal-equation oracle on the same basis
        let mut ata: nalgebra::DMatrix<f64> = nalgebra::DMatrix::zeros(2, 2);
        let mut atb: DVector<f64> = DVector::zeros(2);
        let stable_pole = baseline.poles[0];
        for v in 0..ds.len() {
            let s = ds.point(v);
            let phi = 1.0 / (s - stable_pole);
            let row_re = [phi.re, 1.0];
            let row_im = [phi.im, 0.0];
            for i in 0..2 {
                for j in 0..2 {
                    ata[(i, j)] += row_re[i] * row_re[j] + row_im[i] * row_im[j];
                }
                atb[i] += row_re[i] * ds.values()[v].re + row_im[i] * ds.values()[v].im;
            }
        }
        let oracle = ata.lu().solve(&atb).unwrap();
        assert_eq!(baseline.poles.len(), 1);
        assert!((baseline.residues[0].re - oracle[0]).abs() < 1e-6);
        assert!((baseline.d - oracle[1]).abs() < 1e-6);
    }

    #[test]
    fn refit_errors_when_everything_is_unstable() {
        // all-unstable model: mirror image of a single stable pole
        let h = |s: C64| 1.0 / (s - 0.5);
        let freqs = synth::log_freq_grid(0.1, 5.0, 40);
        let values: Vec<C64> = freqs.iter().map(|&f| h(C64::new(0.0, f))).collect();
        let ds = FrequencyDataset::new(freqs, values).unwrap();
        let fit = aaa_fit(&ds, 1e-9, None).unwrap();
        let ps = crate::barycentric::poles(&fit.model).unwrap();
        if ps.finite_poles.iter().all(|p| p.re >= 0.0) {
            assert!(matches!(
                truncate_refit(&fit.model, &ds),
                Err(Error::Degenerate(_))
            ));
        }
    }
}
