//! Command-line front end. The binary forwards to [`main_with_args`].

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::detection::{
    estimate_g_from_counts, estimate_mean, klyshko_efficiency, tmd_estimate_g, tmd_sample, KlyshkoEstimate, TmdConfig,
    TwinBeamConfig,
};
use crate::displaced::{exact_statistics, g_ideal, mean_eff, predict_moments, DisplacedStateModel, ModelSpec};
use crate::error::{Error, Result};
use crate::fock::{make_fock, SourceSpec};
use crate::inference::{
    fit_overlap, model_truncation_bound, reliable_range, truncation_bound, DataPoint, FitResult, RangeResult,
    RangeScan, TruncationBound,
};
use crate::moments::{reconstruct_all, reconstruction_errors, NormalizedMoments, PhysicalityViolation};

/// Scenario files must declare this schema version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "photon-moments",
    version,
    about = "Factorial-moment analysis of displaced single photons"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Directory for output files; results go to stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for Monte Carlo runs (overrides the scenario seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Highest moment order.
    #[arg(long = "m-max", global = true)]
    pub m_max: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// g^(m) against mean photon number for full and zero mode overlap.
    Curves(CurvesArgs),
    /// Sampled detection of a scenario file.
    Simulate { scenario: PathBuf },
    /// Photon statistics from a normalized-moments JSON file.
    Reconstruct {
        moments: PathBuf,
        /// Override the mean photon number in the file.
        #[arg(long)]
        mean: Option<f64>,
    },
    /// Mode-overlap fit of a CSV dataset (columns mean, g2, g2_err, ...).
    Fit {
        dataset: PathBuf,
        /// Source specification JSON.
        #[arg(long)]
        source: PathBuf,
    },
    /// Reliable reconstruction range and truncation bound of a model JSON.
    Range { model: PathBuf },
    /// Klyshko efficiency calibration on a simulated twin-beam run.
    Klyshko(KlyshkoArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CurvesArgs {
    /// Explicit comma-separated displacement grid |beta|^2.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["b_max", "points"])]
    pub grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 8.0)]
    pub b_max: f64,
    #[arg(long, default_value_t = 161)]
    pub points: usize,
    /// Also write curves.svg (requires --out).
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Args)]
pub struct KlyshkoArgs {
    #[arg(long, default_value_t = 0.1)]
    pub squeeze: f64,
    #[arg(long, default_value_t = 0.3)]
    pub eta_signal: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta_herald: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status: 0 on success, 1 for usage or schema errors, 2 for
/// numerical failures.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                1
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    match run(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_numeric() {
                2
            } else {
                1
            }
        }
    }
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Curves(args) => cmd_curves(g, args, stdout),
        Command::Simulate { scenario } => cmd_simulate(g, scenario, stdout),
        Command::Reconstruct { moments, mean } => cmd_reconstruct(g, moments, *mean, stdout),
        Command::Fit { dataset, source } => cmd_fit(g, dataset, source, stdout),
        Command::Range { model } => cmd_range(g, model, stdout),
        Command::Klyshko(args) => cmd_klyshko(g, args, stdout),
    }
}

fn emit(g: &GlobalOpts, name: &str, format: Format, body: &str, stdout: &mut dyn Write) -> Result<()> {
    match &g.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let ext = match format {
                Format::Csv => "csv",
                Format::Json => "json",
            };
            fs::write(dir.join(format!("{name}.{ext}")), body)?;
        }
        None => stdout.write_all(body.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}

fn m_max_or(g: &GlobalOpts, default: usize) -> Result<usize> {
    let m = g.m_max.unwrap_or(default);
    if m < 2 {
        return Err(Error::Usage("--m-max must be at least 2".into()));
    }
    Ok(m)
}

fn csv_string(rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[derive(Debug, Serialize)]
struct CurveRow {
    b: f64,
    mean: f64,
    ideal: Vec<f64>,
    no_overlap: Vec<f64>,
}

fn cmd_curves(g: &GlobalOpts, args: &CurvesArgs, stdout: &mut dyn Write) -> Result<()> {
    let m_max = m_max_or(g, 4)?;
    let grid = match &args.grid {
        Some(v) => v.clone(),
        None => {
            if args.points < 2 || !(args.b_max.is_finite() && args.b_max > 0.0) {
                return Err(Error::Usage("grid needs --points >= 2 and --b-max > 0".into()));
            }
            (0..args.points)
                .map(|i| args.b_max * i as f64 / (args.points - 1) as f64)
                .collect()
        }
    };
    if grid.is_empty() {
        return Err(Error::Usage("displacement grid is empty".into()));
    }
    if let Some(b) = grid.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(Error::Usage(format!("grid value {b} is not a non-negative number")));
    }
    let fock1 = make_fock(1, 1)?;
    let rows = grid
        .iter()
        .map(|&b| {
            let model = DisplacedStateModel::new(fock1.clone(), 0.0, b)?;
            let pred = predict_moments(&model, m_max)?;
            Ok(CurveRow {
                b,
                mean: 1.0 + b,
                ideal: (2..=m_max).map(|m| g_ideal(m, b)).collect(),
                no_overlap: (2..=m_max).map(|m| pred.g(m)).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    if args.svg {
        let dir = g
            .out
            .as_ref()
            .ok_or_else(|| Error::Usage("--svg requires --out".into()))?;
        fs::create_dir_all(dir)?;
        fs::write(dir.join("curves.svg"), curves_svg(&rows, m_max))?;
    }
    let format = g.format.unwrap_or(Format::Csv);
    let body = match format {
        Format::Json => to_json(&rows)?,
        Format::Csv => {
            let mut header = vec!["b".to_string(), "mean".to_string()];
            header.extend((2..=m_max).map(|m| format!("ideal_g{m}")));
            header.extend((2..=m_max).map(|m| format!("no_overlap_g{m}")));
            let mut table = vec![header];
            for r in &rows {
                let mut line = vec![r.b.to_string(), r.mean.to_string()];
                line.extend(r.ideal.iter().chain(&r.no_overlap).map(f64::to_string));
                table.push(line);
            }
            csv_string(&table)?
        }
    };
    emit(g, "curves", format, &body, stdout)
}

fn curves_svg(rows: &[CurveRow], m_max: usize) -> String {
    let (w, h, pad) = (640.0, 420.0, 50.0);
    let x_max = rows.iter().map(|r| r.mean).fold(1.0, f64::max);
    let y_max = rows
        .iter()
        .flat_map(|r| r.ideal.iter().chain(&r.no_overlap))
        .copied()
        .filter(|v| v.is_finite())
        .fold(1.5, f64::max)
        .min(3.0);
    let sx = |x: f64| pad + x / x_max * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - y.min(y_max) / y_max * (h - 2.0 * pad);
    let colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#888" stroke-dasharray="4"/>"##,
        sx(0.0),
        sx(x_max),
        y = sy(1.0)
    );
    for k in 0..m_max - 1 {
        let colour = colours[k % colours.len()];
        for (dash, pick) in [("", true), (r#" stroke-dasharray="6 3""#, false)] {
            let points: Vec<String> = rows
                .iter()
                .map(|r| {
                    let v = if pick { r.ideal[k] } else { r.no_overlap[k] };
                    format!("{:.2},{:.2}", sx(r.mean), sy(v))
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{colour}"{dash} points="{}"/>"#,
                points.join(" ")
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{colour}" font-size="12">g{}</text>"#,
            w - pad + 5.0,
            pad + 15.0 * (k as f64 + 1.0),
            k + 2
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12">mean photon number</text>"#,
        w / 2.0 - 50.0,
        h - 15.0
    );
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grid {
    /// Displacement strengths |beta|^2.
    DispSq(Vec<f64>),
    /// Target mean photon numbers; converted by subtracting the source mean.
    Mean(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwinBeamBlock {
    pub squeeze: f64,
    pub eta_signal: f64,
    pub eta_herald: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub source: SourceSpec,
    pub overlap: f64,
    pub grid: Grid,
    pub detector: TmdConfig,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub m_max: Option<usize>,
    /// Efficiency used to calibrate means; defaults to the detector's.
    #[serde(default)]
    pub eta_cal: Option<f64>,
    #[serde(default)]
    pub twin_beam: Option<TwinBeamBlock>,
}

#[derive(Debug, Serialize)]
struct OrderResult {
    order: usize,
    sampled: f64,
    stderr: f64,
    exact_estimator: f64,
    model: f64,
}

#[derive(Debug, Serialize)]
struct PointResult {
    disp_sq: f64,
    mean_model: f64,
    mean_calibrated: f64,
    singles: Vec<u64>,
    g: Vec<OrderResult>,
}

#[derive(Debug, Serialize)]
struct SimulateOutput {
    schema_version: u32,
    seed: u64,
    trials: u64,
    overlap: f64,
    source_mean: f64,
    points: Vec<PointResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    klyshko: Option<KlyshkoEstimate>,
}

fn cmd_simulate(g: &GlobalOpts, path: &Path, stdout: &mut dyn Write) -> Result<()> {
    let sc: Scenario = read_json(path)?;
    if sc.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema {
            path: "schema_version".into(),
            message: format!("unsupported version {} (expected {SCHEMA_VERSION})", sc.schema_version),
        });
    }
    if sc.trials == 0 {
        return Err(Error::Usage("trials must be at least 1".into()));
    }
    let seed = g.seed.unwrap_or(sc.seed);
    let m_max = m_max_or(g, sc.m_max.unwrap_or(4))?;
    if m_max > sc.detector.bins() {
        return Err(Error::Usage(format!(
            "m_max = {m_max} exceeds the detector's {} bins",
            sc.detector.bins()
        )));
    }
    let source = sc.source.build()?;
    let grid: Vec<f64> = match &sc.grid {
        Grid::DispSq(v) => v.clone(),
        Grid::Mean(v) => v.iter().map(|m| m - source.mean()).collect(),
    };
    if grid.is_empty() {
        return Err(Error::Schema {
            path: "grid".into(),
            message: "grid is empty".into(),
        });
    }
    let eta_cal = sc.eta_cal.unwrap_or(sc.detector.eta());
    let base = DisplacedStateModel::new(source, sc.overlap, 0.0)?;

    let mut points = Vec::with_capacity(grid.len());
    for (j, &b) in grid.iter().enumerate() {
        let model = base.with_disp_sq(b).map_err(|e| Error::Schema {
            path: format!("grid[{j}]"),
            message: e.to_string(),
        })?;
        let rho = exact_statistics(&model)?;
        let counts = tmd_sample(&rho, &sc.detector, sc.trials, seed.wrapping_add(j as u64))?;
        let pred = predict_moments(&model, m_max)?;
        let orders = (2..=m_max)
            .map(|m| {
                let s = estimate_g_from_counts(&counts, m)?;
                Ok(OrderResult {
                    order: m,
                    sampled: s.value,
                    stderr: s.stderr,
                    exact_estimator: tmd_estimate_g(&rho, &sc.detector, m)?,
                    model: pred.g(m),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        points.push(PointResult {
            disp_sq: b,
            mean_model: mean_eff(&model),
            mean_calibrated: estimate_mean(&counts, eta_cal)?,
            singles: counts.singles().to_vec(),
            g: orders,
        });
    }
    let klyshko = match &sc.twin_beam {
        Some(tb) => Some(klyshko_efficiency(&TwinBeamConfig {
            squeeze: tb.squeeze,
            eta_signal: tb.eta_signal,
            eta_herald: tb.eta_herald,
            trials: tb.trials,
            seed,
        })?),
        None => None,
    };
    let output = SimulateOutput {
        schema_version: SCHEMA_VERSION,
        seed,
        trials: sc.trials,
        overlap: sc.overlap,
        source_mean: base.source().mean(),
        points,
        klyshko,
    };
    let format = g.format.unwrap_or(Format::Json);
    let body = match format {
        Format::Json => to_json(&output)?,
        Format::Csv => {
            let mut table = vec![vec![
                "disp_sq",
                "mean_model",
                "mean_calibrated",
                "order",
                "sampled",
                "stderr",
                "exact_estimator",
                "model",
            ]
            .into_iter()
            .map(String::from)
            .collect()];
            for p in &output.points {
                for o in &p.g {
                    table.push(vec![
                        p.disp_sq.to_string(),
                        p.mean_model.to_string(),
                        p.mean_calibrated.to_string(),
                        o.order.to_string(),
                        o.sampled.to_string(),
                        o.stderr.to_string(),
                        o.exact_estimator.to_string(),
                        o.model.to_string(),
                    ]);
                }
            }
            csv_string(&table)?
        }
    };
    emit(g, "simulate", format, &body, stdout)
}

#[derive(Debug, Serialize)]
struct ReconstructOutput {
    mean: f64,
    m_max: usize,
    probs: Vec<f64>,
    sigma: Vec<f64>,
    total: f64,
    physical: bool,
    violations: Vec<PhysicalityViolation>,
}

fn cmd_reconstruct(g: &GlobalOpts, path: &Path, mean: Option<f64>, stdout: &mut dyn Write) -> Result<()> {
    let mut moments: NormalizedMoments = read_json(path)?;
    if let Some(mean) = mean {
        moments = moments.with_mean(mean)?;
    }
    if let Some(m) = g.m_max {
        if m < 1 {
            return Err(Error::Usage("--m-max must be at least 1".into()));
        }
        moments = moments.truncated(m);
    }
    let rec = reconstruct_all(&moments);
    let sigma = reconstruction_errors(&moments);
    let output = ReconstructOutput {
        mean: moments.mean(),
        m_max: moments.m_max(),
        total: rec.total(),
        physical: rec.is_physical(),
        probs: rec.probs,
        sigma,
        violations: rec.violations,
    };
    let format = g.format.unwrap_or(Format::Csv);
    let body = match format {
        Format::Json => to_json(&output)?,
        Format::Csv => {
            let mut table = vec![["n", "probability", "sigma", "physical"].map(String::from).to_vec()];
            for (n, (p, s)) in output.probs.iter().zip(&output.sigma).enumerate() {
                table.push(vec![
                    n.to_string(),
                    p.to_string(),
                    s.to_string(),
                    (*p >= 0.0).to_string(),
                ]);
            }
            csv_string(&table)?
        }
    };
    emit(g, "reconstruct", format, &body, stdout)
}

/// Reads a fit dataset. The header must contain `mean` and `g2`, `g3`, ...
/// without gaps; `gM_err` columns are optional but must then be present for
/// every order.
pub fn read_dataset<R: std::io::Read>(reader: R) -> Result<Vec<DataPoint>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let parse_err = |message: String| Error::Parse { line: 1, message };
    let mean_col = col("mean").ok_or_else(|| parse_err("missing `mean` column".into()))?;
    let mut g_cols = Vec::new();
    while let Some(c) = col(&format!("g{}", g_cols.len() + 2)) {
        g_cols.push(c);
    }
    if g_cols.is_empty() {
        return Err(parse_err("missing `g2` column".into()));
    }
    let err_cols: Vec<Option<usize>> = (0..g_cols.len()).map(|k| col(&format!("g{}_err", k + 2))).collect();
    let with_errors = err_cols.iter().any(Option::is_some);
    if with_errors && err_cols.iter().any(Option::is_none) {
        return Err(parse_err("error columns must accompany every gM column".into()));
    }

    let mut points = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |c: usize| -> Result<f64> {
            let raw = record.get(c).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("`{}` = {raw:?} is not a number", &header[c]),
            })
        };
        points.push(DataPoint {
            mean: field(mean_col)?,
            g: g_cols.iter().map(|&c| field(c)).collect::<Result<_>>()?,
            errors: if with_errors {
                Some(err_cols.iter().map(|c| field(c.unwrap())).collect::<Result<_>>()?)
            } else {
                None
            },
        });
    }
    Ok(points)
}

fn cmd_fit(g: &GlobalOpts, dataset: &Path, source: &Path, stdout: &mut dyn Write) -> Result<()> {
    let spec: SourceSpec = read_json(source)?;
    let source = spec.build()?;
    let mut points = read_dataset(fs::File::open(dataset)?)?;
    if let Some(m) = g.m_max {
        if m < 2 {
            return Err(Error::Usage("--m-max must be at least 2".into()));
        }
        for p in &mut points {
            p.g.truncate(m - 1);
            if let Some(e) = p.errors.as_mut() {
                e.truncate(m - 1);
            }
        }
    }
    let fit = fit_overlap(&points, &source)?;
    let format = g.format.unwrap_or(Format::Json);
    let body = match format {
        Format::Json => to_json(&fit)?,
        Format::Csv => {
            let FitResult {
                overlap_hat,
                residual_sum,
                stderr,
                n_points,
            } = fit;
            csv_string(&[
                ["overlap_hat", "stderr", "residual_sum", "n_points"]
                    .map(String::from)
                    .to_vec(),
                vec![
                    overlap_hat.to_string(),
                    stderr.to_string(),
                    residual_sum.to_string(),
                    n_points.to_string(),
                ],
            ])?
        }
    };
    emit(g, "fit", format, &body, stdout)
}

#[derive(Debug, Serialize)]
struct RangeOutput {
    m_max: usize,
    source_mean: f64,
    overlap: f64,
    reliable_range: RangeResult,
    truncation_bound: RangeResult,
    /// g^(3)/g^(4) evaluated at the model's own displacement.
    moment_bound: TruncationBound,
}

fn cmd_range(g: &GlobalOpts, path: &Path, stdout: &mut dyn Write) -> Result<()> {
    let spec: ModelSpec = read_json(path)?;
    let model = spec.build()?;
    let m_max = m_max_or(g, 4)?;
    if m_max < 3 {
        return Err(Error::Usage("range needs --m-max >= 3".into()));
    }
    let pred = predict_moments(&model, 4)?;
    let output = RangeOutput {
        m_max,
        source_mean: model.source().mean(),
        overlap: model.overlap(),
        reliable_range: reliable_range(&model, m_max)?,
        truncation_bound: model_truncation_bound(&model, RangeScan::default())?,
        moment_bound: truncation_bound(pred.g(3), pred.g(4))?,
    };
    let format = g.format.unwrap_or(Format::Json);
    let body = match format {
        Format::Json => to_json(&output)?,
        Format::Csv => csv_string(&[
            [
                "m_max",
                "reliable_mean",
                "reliable_ceiling",
                "bound_mean",
                "bound_ceiling",
            ]
            .map(String::from)
            .to_vec(),
            vec![
                m_max.to_string(),
                output.reliable_range.mean.to_string(),
                output.reliable_range.reached_ceiling.to_string(),
                output.truncation_bound.mean.to_string(),
                output.truncation_bound.reached_ceiling.to_string(),
            ],
        ])?,
    };
    emit(g, "range", format, &body, stdout)
}

fn cmd_klyshko(g: &GlobalOpts, args: &KlyshkoArgs, stdout: &mut dyn Write) -> Result<()> {
    let est = klyshko_efficiency(&TwinBeamConfig {
        squeeze: args.squeeze,
        eta_signal: args.eta_signal,
        eta_herald: args.eta_herald,
        trials: args.trials,
        seed: g.seed.unwrap_or(0),
    })?;
    let format = g.format.unwrap_or(Format::Json);
    let body = match format {
        Format::Json => to_json(&est)?,
        Format::Csv => csv_string(&[
            [
                "efficiency",
                "stderr",
                "heralds",
                "coincidences",
                "accidentals",
                "low_statistics",
            ]
            .map(String::from)
            .to_vec(),
            vec![
                est.efficiency.to_string(),
                est.stderr.to_string(),
                est.heralds.to_string(),
                est.coincidences.to_string(),
                est.accidentals.to_string(),
                est.low_statistics.to_string(),
            ],
        ])?,
    };
    emit(g, "klyshko", format, &body, stdout)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_parsing() {
        let text = "mean,g2,g2_err,g3,g3_err\n1.2,0.5,0.01,0.4,0.02\n1.4,0.7,0.01,0.6,0.02\n";
        let pts = read_dataset(text.as_bytes()).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].g, vec![0.7, 0.6]);
        assert_eq!(pts[0].errors.as_deref(), Some(&[0.01, 0.02][..]));

        let bad = "mean,g2\n1.2,0.5\n1.4,abc\n";
        match read_dataset(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let ragged = "mean,g2\n1.2,0.5\n1.4\n";
        assert!(matches!(
            read_dataset(ragged.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(read_dataset("mean,g2,g3_err\n1,1,1\n".as_bytes()).is_ok());
        assert!(read_dataset("mean,g2,g2_err,g3\n1,1,1,1\n".as_bytes()).is_err());
        assert!(read_dataset("mean,g3\n1,1\n".as_bytes()).is_err());
    }

    #[test]
    fn exit_codes() {
        let run = |args: &[&str]| {
            let (mut out, mut err) = (Vec::new(), Vec::new());
            let code = main_with_args(
                std::iter::once("photon-moments").chain(args.iter().copied()),
                &mut out,
                &mut err,
            );
            (code, String::from_utf8(out).unwrap())
        };
        assert_eq!(run(&["--help"]).0, 0);
        assert_eq!(run(&["nonsense"]).0, 1);
        assert_eq!(run(&["curves", "--grid", ""]).0, 1);
        let (code, out) = run(&["curves", "--grid", "0,2", "--m-max", "3"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("b,mean,ideal_g2,ideal_g3,no_overlap_g2,no_overlap_g3\n"));
        assert_eq!(run(&["klyshko", "--squeeze", "0", "--trials", "100"]).0, 2);
    }
}
