//! Browser demo: interactive fitting of frequency-response data.
//!
//! Three operations are exported to JavaScript, all exchanging plain JSON
//! strings so the page needs no framework:
//!
//! * [`fit_preset`] — fit one of the built-in synthetic datasets,
//! * [`fit_csv`] — fit user-pasted CSV data (`freq,re,im` with a header),
//! * [`eval_model`] — evaluate an exported model JSON on a log grid.
//!
//! The returned fit payload carries the magnitude/error curves and the pole
//! map that `www/main.js` draws on canvases.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use stabaaa_core::aaa::aaa_fit;
use stabaaa_core::barycentric::{evaluate, model_from_json, model_to_json, poles, BarycentricModel};
use stabaaa_core::data::{
    error_metrics, load_dataset, normalize, FreqUnit, FrequencyDataset, NormalizationRecord,
};
use stabaaa_core::stabaaa::{stabaaa_fit, StabAaaConfig};
use stabaaa_core::synth;
use stabaaa_core::C64;

#[derive(Serialize)]
struct CurvePoint {
    freq: f64,
    data_mag: f64,
    model_mag: f64,
    error_mag: f64,
}

#[derive(Serialize)]
struct FitPayload {
    algorithm: String,
    order: usize,
    stable: Option<bool>,
    met_tolerance: bool,
    sdp_calls: usize,
    e_inf: f64,
    e_2: f64,
    e_rms: f64,
    curve: Vec<CurvePoint>,
    /// Finite poles as `[re, im]` pairs (normalized units).
    poles: Vec<[f64; 2]>,
    model_json: String,
}

fn preset_dataset(name: &str) -> Result<FrequencyDataset, String> {
    let ds = match name {
        "two-pole" => {
            let h = |s: C64| 1.0 / ((s + 1.0) * (s + 2.0));
            let freqs = synth::log_freq_grid(0.05, 20.0, 200);
            let values: Vec<C64> = freqs.iter().map(|&f| h(C64::new(0.0, f))).collect();
            FrequencyDataset::new(freqs, values).map_err(|e| e.to_string())?
        }
        "resonant" => {
            let sys = synth::random_stable_system(&mut synth::seeded_rng(2024), 5, 1);
            let freqs = synth::log_freq_grid(0.1, 10.0, 300);
            synth::sample(&sys, &freqs)
        }
        "lightly-damped" => {
            let sys = synth::lightly_damped_system(&mut synth::seeded_rng(77), 4);
            let freqs = synth::log_freq_grid(0.3, 8.0, 300);
            let raw = synth::sample(&sys, &freqs);
            synth::perturb(&raw, 1e-4, &mut synth::seeded_rng(78))
        }
        "noisy-wideband" => {
            let sys = synth::random_stable_system(&mut synth::seeded_rng(5150), 8, 2);
            let freqs = synth::log_freq_grid(0.05, 30.0, 400);
            let raw = synth::sample(&sys, &freqs);
            synth::perturb(&raw, 3e-4, &mut synth::seeded_rng(5151))
        }
        other => return Err(format!("unknown preset {other:?}")),
    };
    Ok(ds)
}

fn run_fit(ds: &FrequencyDataset, algorithm: &str, eps: f64, theta: f64, mmax: usize)
    -> Result<FitPayload, String>
{
    let (nds, norm) = normalize(ds).map_err(|e| e.to_string())?;
    let (model, met_tolerance, sdp_calls): (BarycentricModel, bool, usize) = match algorithm {
        "aaa" => {
            let out = aaa_fit(&nds, eps, None).map_err(|e| e.to_string())?;
            (out.model, out.converged, 0)
        }
        "stabaaa" => {
            let mut cfg = StabAaaConfig::new(eps);
            cfg.theta = theta;
            cfg.m_max = mmax;
            let out = stabaaa_fit(&nds, &cfg).map_err(|e| e.to_string())?;
            (out.model, out.met_tolerance, out.sdp_invocations)
        }
        other => return Err(format!("unknown algorithm {other:?}")),
    };

    let met = error_metrics(|s| evaluate(&model, s), &nds);
    let curve = (0..nds.len())
        .map(|v| {
            let h = nds.values()[v] * norm.h_max;
            let m = evaluate(&model, nds.point(v)) * norm.h_max;
            CurvePoint {
                freq: ds.freqs()[v],
                data_mag: h.norm(),
                model_mag: m.norm(),
                error_mag: (m - h).norm(),
            }
        })
        .collect();
    let (pole_list, stable) = if model.order() > 0 {
        let ps = poles(&model).map_err(|e| e.to_string())?;
        let stable = ps.finite_poles.iter().all(|p| p.re < 0.0);
        (ps.finite_poles.iter().map(|p| [p.re, p.im]).collect(), Some(stable))
    } else {
        (Vec::new(), Some(true))
    };
    Ok(FitPayload {
        algorithm: algorithm.to_string(),
        order: model.order(),
        stable,
        met_tolerance,
        sdp_calls,
        e_inf: met.e_inf,
        e_2: met.e_2,
        e_rms: met.e_rms,
        curve,
        poles: pole_list,
        model_json: model_to_json(&model, &norm),
    })
}

/// Fits a built-in synthetic dataset. Presets: `two-pole`, `resonant`,
/// `lightly-damped`, `noisy-wideband`. Algorithms: `aaa`, `stabaaa`.
#[wasm_bindgen]
pub fn fit_preset(
    preset: &str,
    algorithm: &str,
    eps: f64,
    theta: f64,
    mmax: u32,
) -> Result<String, JsValue> {
    let ds = preset_dataset(preset).map_err(|e| JsValue::from_str(&e))?;
    let payload =
        run_fit(&ds, algorithm, eps, theta, mmax as usize).map_err(|e| JsValue::from_str(&e))?;
    serde_json::to_string(&payload).map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Fits user-supplied CSV (`freq,re,im`, frequency unit selectable as
/// `"hz"` or `"rad_s"`).
#[wasm_bindgen]
pub fn fit_csv(
    csv_text: &str,
    freq_unit: &str,
    algorithm: &str,
    eps: f64,
    theta: f64,
    mmax: u32,
) -> Result<String, JsValue> {
    let unit = match freq_unit {
        "hz" => FreqUnit::Hz,
        "rad_s" => FreqUnit::RadS,
        other => return Err(JsValue::from_str(&format!("unknown unit {other:?}"))),
    };
    let ds = load_dataset(csv_text.as_bytes(), unit)
        .map_err(|e| JsValue::from_str(&e.to_string()))?;
    let payload =
        run_fit(&ds, algorithm, eps, theta, mmax as usize).map_err(|e| JsValue::from_str(&e))?;
    serde_json::to_string(&payload).map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Evaluates an exported model JSON on a logarithmic grid of `n` angular
/// frequencies spanning `[fmin, fmax]` rad/s (raw units; the stored
/// normalization record is honored). Returns `[{freq, re, im, mag}, …]`.
#[wasm_bindgen]
pub fn eval_model(model_json: &str, fmin: f64, fmax: f64, n: u32) -> Result<String, JsValue> {
    if !(fmin > 0.0 && fmax > fmin && n >= 2) {
        return Err(JsValue::from_str("need 0 < fmin < fmax and n >= 2"));
    }
    let (model, norm): (BarycentricModel, NormalizationRecord) =
        model_from_json(model_json).map_err(|e| JsValue::from_str(&e.to_string()))?;
    #[derive(Serialize)]
    struct EvalPoint {
        freq: f64,
        re: f64,
        im: f64,
        mag: f64,
    }
    let grid = synth::log_freq_grid(fmin, fmax, n as usize);
    let points: Vec<EvalPoint> = grid
        .iter()
        .map(|&lambda| {
            let h = evaluate(&model, C64::new(0.0, lambda / norm.f_max)) * norm.h_max;
            EvalPoint { freq: lambda, re: h.re, im: h.im, mag: h.norm() }
        })
        .collect();
    serde_json::to_string(&points).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_fit_and_serialize() {
        let out = fit_preset("two-pole", "stabaaa", 1e-6, 0.1, 3).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["stable"], serde_json::json!(true));
        assert!(v["order"].as_u64().unwrap() >= 2);
        assert!(v["curve"].as_array().unwrap().len() == 200);
    }

    #[test]
    fn csv_fit_round_trips_through_eval() {
        let mut csv = String::from("freq,re,im\n");
        let h = |s: C64| 1.0 / (s + 1.0);
        for &f in &synth::log_freq_grid(0.1, 10.0, 60) {
            let v = h(C64::new(0.0, f));
            csv.push_str(&format!("{f},{},{}\n", v.re, v.im));
        }
        let out = fit_csv(&csv, "rad_s", "aaa", 1e-8, 0.1, 3).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let model_json = v["model_json"].as_str().unwrap();
        let evals = eval_model(model_json, 0.1, 10.0, 25).unwrap();
        let pts: serde_json::Value = serde_json::from_str(&evals).unwrap();
        let p0 = &pts[0];
        let s = C64::new(0.0, p0["freq"].as_f64().unwrap());
        let expect = h(s);
        assert!((p0["re"].as_f64().unwrap() - expect.re).abs() < 1e-6);
        assert!((p0["im"].as_f64().unwrap() - expect.im).abs() < 1e-6);
    }

    #[test]
    fn unknown_preset_is_an_error() {
        assert!(fit_preset("nope", "aaa", 1e-3, 0.1, 3).is_err());
    }
}
