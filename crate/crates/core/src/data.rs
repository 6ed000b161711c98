//! Frequency-response datasets: ingestion, normalization and error metrics.
//!
//! A dataset is a set of angular frequencies `λ_v > 0` (the sample points
//! `jλ_v` live on the positive imaginary axis) together with complex response
//! values `h_v`. All fitting algorithms in this crate consume this type.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Frequency unit of a CSV `freq` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreqUnit {
    /// Plain Hz; converted to rad/s on load (`λ = 2πf`).
    Hz,
    /// Already angular (rad/s), stored as-is.
    RadS,
}

/// Sampled frequency response on the positive imaginary axis.
///
/// Invariants enforced at construction: frequencies strictly positive,
/// strictly increasing (duplicates are an error, not averaged), and as many
/// values as frequencies. Immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyDataset {
    freqs: Vec<f64>,
    values: Vec<C64>,
}

impl FrequencyDataset {
    /// Builds a dataset from parallel frequency/value lists. The pairs are
    /// sorted by frequency; non-positive, non-finite or duplicate
    /// frequencies are rejected.
    pub fn new(freqs: Vec<f64>, values: Vec<C64>) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(Error::validation(format!(
                "{} frequencies but {} values",
                freqs.len(),
                values.len()
            )));
        }
        if freqs.is_empty() {
            return Err(Error::validation("empty dataset"));
        }
        let mut pairs: Vec<(f64, C64)> = freqs.into_iter().zip(values).collect();
        for (f, v) in &pairs {
            if !f.is_finite() || !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::validation("non-finite sample"));
            }
            if *f <= 0.0 {
                return Err(Error::validation(format!("non-positive frequency {f}")));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::validation(format!(
                    "duplicate frequency {}",
                    w[0].0
                )));
            }
        }
        let (freqs, values) = pairs.into_iter().unzip();
        Ok(Self { freqs, values })
    }

    /// Number of samples `V`.
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Angular frequencies, strictly increasing.
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    /// Complex responses, parallel to `freqs`.
    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Sample point on the imaginary axis, `s_v = jλ_v`.
    pub fn point(&self, v: usize) -> C64 {
        C64::new(0.0, self.freqs[v])
    }
}

/// Divisors applied by [`normalize`]; needed to undo the scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    /// `max |λ_v / 2π|` of the raw data, in Hz.
    pub f_max: f64,
    /// `max |h_v|` of the raw data.
    pub h_max: f64,
}

impl NormalizationRecord {
    /// Identity record (no rescaling).
    pub fn identity() -> Self {
        Self { f_max: 1.0, h_max: 1.0 }
    }
}

/// Scales a dataset so that frequencies are divided by `f_max = max |λ/2π|`
/// and responses by `h_max = max |h|`; after the call `max |h_v| = 1`.
pub fn normalize(ds: &FrequencyDataset) -> Result<(FrequencyDataset, NormalizationRecord)> {
    let f_max = ds
        .freqs
        .iter()
        .map(|l| (l / (2.0 * PI)).abs())
        .fold(0.0_f64, f64::max);
    let h_max = ds.values.iter().map(|h| h.norm()).fold(0.0_f64, f64::max);
    if h_max == 0.0 {
        return Err(Error::Degenerate("all responses are zero".into()));
    }
    let freqs = ds.freqs.iter().map(|l| l / f_max).collect();
    let values = ds.values.iter().map(|h| h / h_max).collect();
    Ok((
        FrequencyDataset { freqs, values },
        NormalizationRecord { f_max, h_max },
    ))
}

/// Undoes [`normalize`]: multiplies frequencies by `f_max` and responses by
/// `h_max`.
pub fn denormalize(ds: &FrequencyDataset, rec: &NormalizationRecord) -> FrequencyDataset {
    FrequencyDataset {
        freqs: ds.freqs.iter().map(|l| l * rec.f_max).collect(),
        values: ds.values.iter().map(|h| h * rec.h_max).collect(),
    }
}

/// The three residual metrics of a fit, all on the same dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorReport {
    /// `max_v |X(jλ_v) − h_v|`.
    pub e_inf: f64,
    /// `sqrt(Σ_v |X(jλ_v) − h_v|²)`.
    pub e_2: f64,
    /// `e_2 / sqrt(V)`.
    pub e_rms: f64,
    /// Index of the worst sample.
    pub argmax_index: usize,
}

/// Computes the deviation metrics of a model evaluated at every sample point.
pub fn error_metrics<F>(model_eval: F, ds: &FrequencyDataset) -> ErrorReport
where
    F: Fn(C64) -> C64,
{
    let mut e_inf = 0.0_f64;
    let mut sum_sq = 0.0_f64;
    let mut argmax_index = 0;
    for v in 0..ds.len() {
        let dev = (model_eval(ds.point(v)) - ds.values[v]).norm();
        sum_sq += dev * dev;
        if dev > e_inf {
            e_inf = dev;
            argmax_index = v;
        }
    }
    let e_2 = sum_sq.sqrt();
    ErrorReport {
        e_inf,
        e_2,
        e_rms: e_2 / (ds.len() as f64).sqrt(),
        argmax_index,
    }
}

/// Reads a dataset from CSV with header `freq,re,im`. Frequencies are
/// interpreted per `unit` and stored in rad/s.
pub fn load_dataset<R: Read>(source: R, unit: FreqUnit) -> Result<FrequencyDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    {
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
        let got: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
        if got != ["freq", "re", "im"] {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header freq,re,im; got {}", got.join(",")),
            });
        }
    }

    let mut freqs = Vec::new();
    let mut values = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let parse = |field: &str, name: &str| -> Result<f64> {
            field.parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("bad {name} value {field:?}"),
            })
        };
        let f = parse(&record[0], "freq")?;
        let re = parse(&record[1], "re")?;
        let im = parse(&record[2], "im")?;
        let lambda = match unit {
            FreqUnit::Hz => 2.0 * PI * f,
            FreqUnit::RadS => f,
        };
        freqs.push(lambda);
        values.push(C64::new(re, im));
    }
    if freqs.len() < 2 {
        return Err(Error::validation(format!(
            "need at least 2 samples, got {}",
            freqs.len()
        )));
    }
    FrequencyDataset::new(freqs, values)
}

/// Convenience wrapper for [`load_dataset`] on a filesystem path.
pub fn load_dataset_path(path: impl AsRef<Path>, unit: FreqUnit) -> Result<FrequencyDataset> {
    let file = std::fs::File::open(path)?;
    load_dataset(std::io::BufReader::new(file), unit)
}

/// Writes a dataset as CSV with header `freq,re,im`. Floats are printed with
/// 17 significant digits so a load/save round trip is bit exact. Frequencies
/// are written in the requested unit.
pub fn save_dataset<W: Write>(ds: &FrequencyDataset, unit: FreqUnit, mut out: W) -> Result<()> {
    writeln!(out, "freq,re,im")?;
    for v in 0..ds.len() {
        let f = match unit {
            FreqUnit::Hz => ds.freqs[v] / (2.0 * PI),
            FreqUnit::RadS => ds.freqs[v],
        };
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e}",
            f, ds.values[v].re, ds.values[v].im
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn load_converts_hz_and_sorts() {
        let csv = "freq,re,im\n2,0.5,-0.5\n1,1.0,0.0\n";
        let ds = load_dataset(csv.as_bytes(), FreqUnit::Hz).unwrap();
        assert_eq!(ds.len(), 2);
        assert!((ds.freqs()[0] - 2.0 * PI).abs() < 1e-15);
        assert!((ds.freqs()[1] - 4.0 * PI).abs() < 1e-15);
        assert_eq!(ds.values()[0], C64::new(1.0, 0.0));
        assert_eq!(ds.values()[1], C64::new(0.5, -0.5));
    }

    #[test]
    fn load_rejects_zero_frequency() {
        let csv = "freq,re,im\n0,1,0\n1,1,0\n";
        let err = load_dataset(csv.as_bytes(), FreqUnit::Hz).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn load_rejects_duplicates() {
        let csv = "freq,re,im\n1,1,0\n1,2,0\n";
        assert!(matches!(
            load_dataset(csv.as_bytes(), FreqUnit::Hz),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn load_reports_line_of_malformed_row() {
        let csv = "freq,re,im\n1,1,0\n2,xyz,0\n";
        match load_dataset(csv.as_bytes(), FreqUnit::Hz) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn load_handles_pcb_sized_grid() {
        // 497 rows spanning 0.06..10 GHz, same shape as a board-link sweep.
        let mut csv = String::from("freq,re,im\n");
        for v in 0..497 {
            let f = 0.06e9 + (10.0e9 - 0.06e9) * v as f64 / 496.0;
            csv.push_str(&format!("{f},{},{}\n", 1.0 + v as f64, -(v as f64)));
        }
        let ds = load_dataset(csv.as_bytes(), FreqUnit::Hz).unwrap();
        assert_eq!(ds.len(), 497);
    }

    #[test]
    fn normalize_single_point() {
        let ds = FrequencyDataset::new(vec![2.0 * PI * 1e9], vec![C64::new(3.0, 4.0)]).unwrap();
        let (nds, rec) = normalize(&ds).unwrap();
        assert!((rec.f_max - 1e9).abs() < 1.0);
        assert!((rec.h_max - 5.0).abs() < 1e-12);
        assert!((nds.freqs()[0] - 2.0 * PI).abs() < 1e-12);
        assert!((nds.values()[0] - C64::new(0.6, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn normalize_is_identity_when_already_normalized() {
        let ds = FrequencyDataset::new(
            vec![PI, 2.0 * PI],
            vec![C64::new(0.5, 0.0), C64::new(1.0, 0.0)],
        )
        .unwrap();
        let (nds, rec) = normalize(&ds).unwrap();
        assert_eq!(rec.f_max, 1.0);
        assert_eq!(rec.h_max, 1.0);
        assert_eq!(&nds, &ds);
    }

    #[test]
    fn normalize_rejects_all_zero() {
        let ds =
            FrequencyDataset::new(vec![1.0, 2.0], vec![C64::new(0.0, 0.0); 2]).unwrap();
        assert!(matches!(normalize(&ds), Err(Error::Degenerate(_))));
    }

    #[test]
    fn normalize_random_dataset_scans_maxima() {
        // Independent recomputation of the maxima by direct scan.
        let mut freqs = Vec::new();
        let mut values = Vec::new();
        let mut x = 0.34_f64;
        for v in 0..100 {
            x = (x * 997.0 + 0.117).fract();
            freqs.push(1.0 + v as f64 + x);
            values.push(C64::new(x * 7.0 - 3.0, 2.0 - 5.0 * x));
        }
        let ds = FrequencyDataset::new(freqs, values).unwrap();
        let (nds, rec) = normalize(&ds).unwrap();
        let mut expect_f: f64 = 0.0;
        let mut expect_h: f64 = 0.0;
        for v in 0..100 {
            expect_f = expect_f.max((ds.freqs()[v] / (2.0 * PI)).abs());
            expect_h = expect_h.max(ds.values()[v].norm());
        }
        assert_eq!(rec.f_max, expect_f);
        assert_eq!(rec.h_max, expect_h);
        let max_h = nds.values().iter().map(|h| h.norm()).fold(0.0, f64::max);
        assert!((max_h - 1.0).abs() < 4.0 * f64::EPSILON);
        for v in 0..100 {
            assert!((nds.freqs()[v] * rec.f_max - ds.freqs()[v]).abs()
                <= ds.freqs()[v] * f64::EPSILON);
        }
    }

    #[test]
    fn metrics_of_exact_interpolant_vanish() {
        let ds = FrequencyDataset::new(
            vec![1.0, 2.0, 3.0],
            vec![C64::new(1.0, 0.5); 3],
        )
        .unwrap();
        let rep = error_metrics(|_| C64::new(1.0, 0.5), &ds);
        assert_eq!((rep.e_inf, rep.e_2, rep.e_rms), (0.0, 0.0, 0.0));
    }

    #[test]
    fn metrics_of_zero_model_on_unit_data() {
        let ds = FrequencyDataset::new(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![C64::new(1.0, 0.0); 4],
        )
        .unwrap();
        let rep = error_metrics(|_| C64::new(0.0, 0.0), &ds);
        assert_eq!(rep.e_inf, 1.0);
        assert!((rep.e_2 - 2.0).abs() < 1e-15);
        assert!((rep.e_rms - 1.0).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let ds = FrequencyDataset::new(
            vec![0.1234567890123456, 7.77e-3 + 1.0, 9.999999999999e5],
            vec![
                C64::new(1.0 / 3.0, -2.0 / 7.0),
                C64::new(f64::MIN_POSITIVE * 1e10, 1.0),
                C64::new(-1e-200, 1e200),
            ],
        )
        .unwrap();
        for unit in [FreqUnit::RadS, FreqUnit::Hz] {
            let mut buf = Vec::new();
            save_dataset(&ds, unit, &mut buf).unwrap();
            let back = load_dataset(buf.as_slice(), unit).unwrap();
            // Hz round trip performs /2π then ×2π which is not bit exact, so
            // only the rad/s path is compared bitwise.
            if unit == FreqUnit::RadS {
                assert_eq!(back.freqs(), ds.freqs());
            }
            assert_eq!(back.values(), ds.values());
        }
    }

    #[test]
    fn denormalize_then_normalize_round_trips() {
        let ds = FrequencyDataset::new(
            vec![0.5, 2.0 * PI],
            vec![C64::new(0.3, -0.4), C64::new(0.6, 0.8)],
        )
        .unwrap();
        let (nds, rec) = normalize(&ds).unwrap();
        let raw = denormalize(&nds, &rec);
        let (again, rec2) = normalize(&raw).unwrap();
        for v in 0..ds.len() {
            assert!((again.freqs()[v] - nds.freqs()[v]).abs() <= 2.0 * f64::EPSILON * nds.freqs()[v].abs());
            assert!((again.values()[v] - nds.values()[v]).norm() <= 2.0 * f64::EPSILON * nds.values()[v].norm());
        }
        assert!((rec2.f_max - rec.f_max).abs() <= 2.0 * f64::EPSILON * rec.f_max);
        assert!((rec2.h_max - rec.h_max).abs() <= 2.0 * f64::EPSILON * rec.h_max);
    }
}
