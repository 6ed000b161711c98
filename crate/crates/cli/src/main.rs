//! Command-line front end: ingestion, fitting, evaluation, comparison and
//! export. Every numeric behavior is a library call; this binary only
//! shuttles files and flags.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex;

use stabaaa_core::aaa::{self, ErrorMode};
use stabaaa_core::barycentric::{self, evaluate, model_from_json, model_to_json, BarycentricModel};
use stabaaa_core::data::{
    self, error_metrics, normalize, ErrorReport, FreqUnit, FrequencyDataset, NormalizationRecord,
};
use stabaaa_core::loewner;
use stabaaa_core::sdp::{build_stability_sdp, SdpConfig};
use stabaaa_core::stabaaa::{stabaaa_fit, truncate_refit, StabAaaConfig};
use stabaaa_core::stability::{
    build_denominator_realization, classify_stability, transform_denominator,
};
use stabaaa_core::{Error, C64};

#[derive(Parser)]
#[command(
    name = "stabaaa",
    about = "Fit stable reduced-order rational models to frequency-response data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to CSV data and write model/report/metrics/plot files.
    Fit(FitArgs),
    /// Evaluate an exported model on a frequency grid.
    Eval(EvalArgs),
    /// Extract poles and residues of an exported model.
    Poles(PolesArgs),
    /// Run several algorithms on the same data and tabulate their metrics.
    Compare(CompareArgs),
    /// Convert an exported model to pole-residue form.
    Export(ExportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    Aaa,
    Stabaaa,
    Loewner,
    TruncateRefit,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum UnitArg {
    Hz,
    RadS,
}

impl From<UnitArg> for FreqUnit {
    fn from(u: UnitArg) -> Self {
        match u {
            UnitArg::Hz => FreqUnit::Hz,
            UnitArg::RadS => FreqUnit::RadS,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ErrorModeArg {
    Abs,
    Rel,
}

impl From<ErrorModeArg> for ErrorMode {
    fn from(m: ErrorModeArg) -> Self {
        match m {
            ErrorModeArg::Abs => ErrorMode::Absolute,
            ErrorModeArg::Rel => ErrorMode::Relative,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV with header freq,re,im.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "stabaaa")]
    algorithm: Algorithm,
    /// Target maximum deviation (on normalized data unless --no-normalize).
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Tolerance decreasing factor of the outer loop, in (0, 1).
    #[arg(long, default_value_t = 0.1)]
    theta: f64,
    /// Maximum outer retries after the first stabilization.
    #[arg(long, default_value_t = 5)]
    mmax: usize,
    /// Greedy iteration budget (default: samples/4).
    #[arg(long)]
    max_order: Option<usize>,
    #[arg(long, value_enum, default_value = "hz")]
    freq_unit: UnitArg,
    #[arg(long, value_enum, default_value = "abs")]
    error_mode: ErrorModeArg,
    /// Fit the raw data without the default normalization.
    #[arg(long)]
    no_normalize: bool,
    /// Output directory for model.json, stability.json, metrics.json, plot.csv.
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
    /// Print per-iteration trace lines (JSON) to stderr.
    #[arg(long)]
    verbose: bool,
    /// Write the stability SDP of the final unconstrained fit in an
    /// SDPA-like text form (stabaaa only, when stabilization runs).
    #[arg(long)]
    dump_sdp: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Exported model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Evaluation grid `lin:<start>:<stop>:<count>` or `log:<start>:<stop>:<count>`
    /// in the chosen frequency unit.
    #[arg(long, conflicts_with = "freqs")]
    grid: Option<String>,
    /// CSV file whose `freq` column provides the evaluation frequencies.
    #[arg(long)]
    freqs: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "hz")]
    freq_unit: UnitArg,
    /// Output CSV (freq,re,im); stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PolesArgs {
    #[arg(long)]
    model: PathBuf,
    /// Pole-residue JSON output; stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Also write the stability report JSON here.
    #[arg(long)]
    stability: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    input: PathBuf,
    /// Comma-separated list drawn from aaa,stabaaa,truncate-refit,loewner.
    #[arg(long, default_value = "aaa,stabaaa,truncate-refit")]
    algorithms: String,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 0.1)]
    theta: f64,
    #[arg(long, default_value_t = 5)]
    mmax: usize,
    #[arg(long)]
    max_order: Option<usize>,
    #[arg(long, value_enum, default_value = "hz")]
    freq_unit: UnitArg,
    #[arg(long, value_enum, default_value = "abs")]
    error_mode: ErrorModeArg,
    /// Output CSV table; stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    model: PathBuf,
    /// Export format (pole-residue is the only one currently).
    #[arg(long, default_value = "pole-residue")]
    format: String,
    /// Output path; stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(seed) = std::env::var("STABAAA_SEED") {
        // All computations are deterministic; the seed is accepted for
        // reproducibility of any future randomized diagnostics and echoed so
        // runs can be correlated with logs.
        eprintln!("{{\"seed\": {seed:?}}}");
    }
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Poles(args) => cmd_poles(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Export(args) => cmd_export(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// 1 = validation, 2 = numerical failure (3 = tolerance-not-met is issued by
/// the fit path directly).
fn exit_code_for(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Parse { .. })
        | Some(Error::Validation(_))
        | Some(Error::Degenerate(_))
        | Some(Error::Json(_)) => 1,
        Some(Error::Numerical(_))
        | Some(Error::Conditioning(_))
        | Some(Error::Saturation(_))
        | Some(Error::Stabilization { .. }) => 2,
        Some(Error::Io(_)) | None => 1,
    }
}

fn write_output(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn write_or_print(out: &Option<PathBuf>, contents: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => write_output(path, contents),
        None => {
            println!("{contents}");
            Ok(())
        }
    }
}

fn metrics_json(rep: &ErrorReport) -> String {
    format!(
        "{{\n  \"schema\": 1,\n  \"e_inf\": {:e},\n  \"e_2\": {:e},\n  \"e_rms\": {:e},\n  \"argmax_index\": {}\n}}",
        rep.e_inf, rep.e_2, rep.e_rms, rep.argmax_index
    )
}

/// Plot data: frequency in the input unit, raw-scale magnitudes.
fn plot_csv<F>(ds_raw: &FrequencyDataset, unit: FreqUnit, eval_raw: F) -> String
where
    F: Fn(usize) -> C64,
{
    let mut out = String::from("freq,data_mag,model_mag,error_mag\n");
    for v in 0..ds_raw.len() {
        let f = match unit {
            FreqUnit::Hz => ds_raw.freqs()[v] / (2.0 * std::f64::consts::PI),
            FreqUnit::RadS => ds_raw.freqs()[v],
        };
        let h = ds_raw.values()[v];
        let m = eval_raw(v);
        out.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e}\n",
            f,
            h.norm(),
            m.norm(),
            (m - h).norm()
        ));
    }
    out
}

fn cmd_fit(args: FitArgs) -> anyhow::Result<ExitCode> {
    let raw = data::load_dataset_path(&args.input, args.freq_unit.into())?;
    let (ds, norm) = if args.no_normalize {
        (raw.clone(), NormalizationRecord::identity())
    } else {
        normalize(&raw)?
    };
    let outdir = &args.out;
    let mut exit = ExitCode::SUCCESS;

    match args.algorithm {
        Algorithm::Aaa | Algorithm::Stabaaa => {
            let model: BarycentricModel = match args.algorithm {
                Algorithm::Stabaaa => {
                    let mut cfg = StabAaaConfig::new(args.tol);
                    cfg.theta = args.theta;
                    cfg.m_max = args.mmax;
                    cfg.max_order = args.max_order;
                    cfg.error_mode = args.error_mode.into();
                    cfg.sdp = SdpConfig { verbose: args.verbose, ..SdpConfig::default() };
                    let outcome = stabaaa_fit(&ds, &cfg)?;
                    if args.verbose {
                        for rec in &outcome.rounds {
                            eprintln!("{}", serde_json::to_string(rec)?);
                        }
                    }
                    write_output(&outdir.join("outcome.json"), &outcome.summary_json())?;
                    if let Some(dump) = &args.dump_sdp {
                        if outcome.sdp_invocations > 0 {
                            dump_sdp_of_unconstrained_fit(&ds, &args, dump)?;
                        } else {
                            eprintln!(
                                "note: fit was stable, no SDP was solved; skipping --dump-sdp"
                            );
                        }
                    }
                    if !outcome.met_tolerance {
                        eprintln!(
                            "warning: stabilized model misses the tolerance (test-set error {:.3e} > {:.3e})",
                            outcome.test_set_error, args.tol
                        );
                        exit = ExitCode::from(3);
                    }
                    outcome.model
                }
                _ => {
                    let out = aaa::aaa_fit_with_mode(
                        &ds,
                        args.tol,
                        args.max_order,
                        args.error_mode.into(),
                    )?;
                    if args.verbose {
                        for rec in &out.history {
                            eprintln!("{}", rec.to_json_line());
                        }
                    }
                    if !out.converged {
                        eprintln!(
                            "warning: iteration budget exhausted at error {:.3e}",
                            out.final_max_error
                        );
                        exit = ExitCode::from(3);
                    }
                    out.model
                }
            };

            write_output(&outdir.join("model.json"), &model_to_json(&model, &norm))?;
            if model.order() > 0 {
                let rep = classify_stability(&model)?;
                write_output(&outdir.join("stability.json"), &rep.to_json())?;
            } else {
                write_output(
                    &outdir.join("stability.json"),
                    "{\n  \"schema\": 1,\n  \"stable\": true,\n  \"margin\": null,\n  \"poles\": [],\n  \"cb\": 0\n}",
                )?;
            }
            let met = error_metrics(|s| evaluate(&model, s), &ds);
            write_output(&outdir.join("metrics.json"), &metrics_json(&met))?;
            let plot = plot_csv(&raw, args.freq_unit.into(), |v| {
                evaluate(&model, ds.point(v)) * norm.h_max
            });
            write_output(&outdir.join("plot.csv"), &plot)?;
        }
        Algorithm::TruncateRefit => {
            let out =
                aaa::aaa_fit_with_mode(&ds, args.tol, args.max_order, args.error_mode.into())?;
            let baseline = truncate_refit(&out.model, &ds)?;
            write_output(&outdir.join("model.json"), &baseline.to_json())?;
            let met = error_metrics(|s| baseline.eval(s), &ds);
            write_output(&outdir.join("metrics.json"), &metrics_json(&met))?;
            let plot = plot_csv(&raw, args.freq_unit.into(), |v| {
                baseline.eval(ds.point(v)) * norm.h_max
            });
            write_output(&outdir.join("plot.csv"), &plot)?;
            let stable = baseline.is_stable();
            write_output(
                &outdir.join("stability.json"),
                &format!("{{\n  \"schema\": 1,\n  \"stable\": {stable}\n}}"),
            )?;
        }
        Algorithm::Loewner => {
            let (left, right) = loewner::alternate_partition(ds.freqs(), ds.values());
            let (left, right) = if left.len() == right.len() {
                (left, right)
            } else {
                // drop the trailing left point to square the pencil
                (left[..right.len()].to_vec(), right)
            };
            let pair = loewner::loewner_pair(&left, &right)?;
            let rom = loewner::loewner_rom(&pair, 1e-12)?;
            write_output(&outdir.join("model.json"), &descriptor_json(&rom)?)?;
            let met = error_metrics(|s| rom.transfer(s).unwrap_or(C64::new(f64::NAN, 0.0)), &ds);
            write_output(&outdir.join("metrics.json"), &metrics_json(&met))?;
            let plot = plot_csv(&raw, args.freq_unit.into(), |v| {
                rom.transfer(ds.point(v)).unwrap_or(C64::new(f64::NAN, 0.0)) * norm.h_max
            });
            write_output(&outdir.join("plot.csv"), &plot)?;
        }
    }
    Ok(exit)
}

fn dump_sdp_of_unconstrained_fit(
    ds: &FrequencyDataset,
    args: &FitArgs,
    path: &Path,
) -> anyhow::Result<()> {
    let fit = aaa::aaa_fit_with_mode(ds, args.tol, args.max_order, args.error_mode.into())?;
    let (Some(quasi), Some(x_opt)) = (fit.loewner_real.as_ref(), fit.x_opt.as_ref()) else {
        return Ok(());
    };
    let den = build_denominator_realization(&fit.model)?;
    let td = transform_denominator(&den, quasi, x_opt)?;
    let sdp = build_stability_sdp(&td, SdpConfig::default());
    write_output(path, &sdp.dump_sdpa_like())
}

fn descriptor_json(rom: &barycentric::DescriptorRealization) -> anyhow::Result<String> {
    let barycentric::DescriptorRealization::Complex { e, a, b, c } = rom else {
        anyhow::bail!("expected a complex-kind realization");
    };
    let pack = |m: &nalgebra::DMatrix<Complex<f64>>| -> Vec<Vec<[f64; 2]>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect()
    };
    let doc = serde_json::json!({
        "schema": 1,
        "kind": "descriptor",
        "order": rom.dim(),
        "e": pack(e),
        "a": pack(a),
        "b": (0..b.len()).map(|i| [b[i].re, b[i].im]).collect::<Vec<_>>(),
        "c": (0..c.len()).map(|i| [c[i].re, c[i].im]).collect::<Vec<_>>(),
    });
    Ok(serde_json::to_string_pretty(&doc)?)
}

fn parse_grid(spec: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 4 {
        anyhow::bail!("grid spec must be lin:<start>:<stop>:<count> or log:<start>:<stop>:<count>");
    }
    let start: f64 = parts[1].parse()?;
    let stop: f64 = parts[2].parse()?;
    let count: usize = parts[3].parse()?;
    if count < 2 || !(stop > start) {
        anyhow::bail!("grid needs count >= 2 and stop > start");
    }
    let grid = match parts[0] {
        "lin" => (0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect(),
        "log" => {
            if start <= 0.0 {
                anyhow::bail!("log grid needs start > 0");
            }
            let l0 = start.ln();
            let step = (stop.ln() - l0) / (count - 1) as f64;
            (0..count).map(|i| (l0 + step * i as f64).exp()).collect()
        }
        other => anyhow::bail!("unknown grid kind {other:?}"),
    };
    Ok(grid)
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&args.model)?;
    let (model, norm) = model_from_json(&text)?;
    let unit: FreqUnit = args.freq_unit.into();

    // frequencies in the requested unit
    let freqs: Vec<f64> = if let Some(spec) = &args.grid {
        parse_grid(spec)?
    } else if let Some(path) = &args.freqs {
        let ds = data::load_dataset_path(path, unit)?;
        ds.freqs()
            .iter()
            .map(|l| match unit {
                FreqUnit::Hz => l / (2.0 * std::f64::consts::PI),
                FreqUnit::RadS => *l,
            })
            .collect()
    } else {
        anyhow::bail!("provide --grid or --freqs");
    };

    let mut out = String::from("freq,re,im\n");
    for &f in &freqs {
        let lambda_raw = match unit {
            FreqUnit::Hz => 2.0 * std::f64::consts::PI * f,
            FreqUnit::RadS => f,
        };
        let lambda_norm = lambda_raw / norm.f_max;
        let h = evaluate(&model, C64::new(0.0, lambda_norm)) * norm.h_max;
        out.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", f, h.re, h.im));
    }
    write_or_print(&args.out, &out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_poles(args: PolesArgs) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&args.model)?;
    let (model, _) = model_from_json(&text)?;
    if model.order() == 0 {
        anyhow::bail!(Error::Validation("constant model has no poles".into()));
    }
    let json = barycentric::pole_residue_to_json(&model)?;
    write_or_print(&args.out, &json)?;
    if let Some(path) = &args.stability {
        let rep = classify_stability(&model)?;
        write_output(path, &rep.to_json())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(args: CompareArgs) -> anyhow::Result<ExitCode> {
    let raw = data::load_dataset_path(&args.input, args.freq_unit.into())?;
    let (ds, _) = normalize(&raw)?;
    let mut rows = String::from("algorithm,order,stable,converged,e_2,e_rms,e_inf\n");
    for name in args.algorithms.split(',') {
        let name = name.trim();
        let (order, stable, converged, met): (usize, bool, bool, ErrorReport) = match name {
            "aaa" => {
                let out =
                    aaa::aaa_fit_with_mode(&ds, args.tol, args.max_order, args.error_mode.into())?;
                let stable =
                    out.model.order() == 0 || classify_stability(&out.model)?.stable;
                let met = error_metrics(|s| evaluate(&out.model, s), &ds);
                (out.model.order(), stable, out.converged, met)
            }
            "stabaaa" => {
                let mut cfg = StabAaaConfig::new(args.tol);
                cfg.theta = args.theta;
                cfg.m_max = args.mmax;
                cfg.max_order = args.max_order;
                cfg.error_mode = args.error_mode.into();
                let out = stabaaa_fit(&ds, &cfg)?;
                let met = error_metrics(|s| evaluate(&out.model, s), &ds);
                (out.model.order(), out.stable, out.met_tolerance, met)
            }
            "truncate-refit" => {
                let fit =
                    aaa::aaa_fit_with_mode(&ds, args.tol, args.max_order, args.error_mode.into())?;
                let baseline = truncate_refit(&fit.model, &ds)?;
                let met = error_metrics(|s| baseline.eval(s), &ds);
                (baseline.order(), baseline.is_stable(), true, met)
            }
            "loewner" => {
                let (left, right) = loewner::alternate_partition(ds.freqs(), ds.values());
                let (left, right) = if left.len() == right.len() {
                    (left, right)
                } else {
                    (left[..right.len()].to_vec(), right)
                };
                let pair = loewner::loewner_pair(&left, &right)?;
                let rom = loewner::loewner_rom(&pair, 1e-12)?;
                let met =
                    error_metrics(|s| rom.transfer(s).unwrap_or(C64::new(f64::NAN, 0.0)), &ds);
                (rom.dim(), true, true, met)
            }
            other => anyhow::bail!(Error::Validation(format!("unknown algorithm {other:?}"))),
        };
        rows.push_str(&format!(
            "{name},{order},{stable},{converged},{:.6e},{:.6e},{:.6e}\n",
            met.e_2, met.e_rms, met.e_inf
        ));
    }
    write_or_print(&args.out, &rows)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_export(args: ExportArgs) -> anyhow::Result<ExitCode> {
    if args.format != "pole-residue" {
        anyhow::bail!(Error::Validation(format!(
            "unsupported export format {:?}",
            args.format
        )));
    }
    let text = std::fs::read_to_string(&args.model)?;
    let (model, _) = model_from_json(&text)?;
    if model.order() == 0 {
        anyhow::bail!(Error::Validation(
            "constant model has no pole-residue form".into()
        ));
    }
    let json = barycentric::pole_residue_to_json(&model)?;
    write_or_print(&args.out, &json)?;
    Ok(ExitCode::SUCCESS)
}
