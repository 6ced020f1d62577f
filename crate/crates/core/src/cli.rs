//! The `homtool` command-line front end.
//!
//! Every command resolves a [`RunConfig`] from defaults, an optional JSON
//! file and flags (in that order of precedence, flags last), and embeds the
//! resolved config plus its SHA-256 in whatever it writes.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::binned::{BinningConfig, DetectorConfig, MeasurementConfig, Outcome, Protocol};
use crate::error::Error;
use crate::estimate::{mle_delta, mle_joint, EstimationResult};
use crate::information::{
    cfi_bucket_notr, cfi_delta, cfi_nr_notr, closed_form_fim_bucket, closed_form_fim_nr, fim_numeric, optimal_delta,
    qfi, qfi_two_photon, relative_information, FisherMatrix, ParameterSet,
};
use crate::model::{nohom_density, Parameter, PhysicalParams};
use crate::simulate::{sample_generative, sample_outcomes, CountsHistogram, RandomSeed};
use crate::verify::{
    oracle_binned_bunching, oracle_binned_coincidence, oracle_binned_nohom, oracle_total_rates, quad_integrate,
    score_integral_cfi, QuadratureSpec,
};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BOUNDARY: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;
pub const EXIT_BENCHMARK: i32 = 5;

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: msg.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain { .. } | Error::Config(_) => EXIT_CONFIG,
            Error::Boundary { .. } => EXIT_BOUNDARY,
            Error::FlatLikelihood(_) | Error::SingularInformation { .. } | Error::IncompatibleCounts(_) => {
                EXIT_DEGENERATE
            }
            Error::Quadrature { .. } | Error::RejectionGuard(_) => EXIT_INTERNAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::config(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    /// sigma = 1; delays and bin widths in units of 1/sigma.
    #[default]
    Natural,
    /// Delays and bin widths in ps, sigma in 1/ps.
    Si,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    #[default]
    Bucket,
    Nr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Timing {
    Tr,
    #[default]
    Notr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    #[default]
    Hom,
    Nohom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    #[default]
    Categorical,
    Generative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    Delta,
    Alpha,
    Sigma,
    Gamma,
    BinWidth,
}

/// Sample-arm delay and the user-steered reference delay; the effective
/// delay is their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayGeometry {
    pub sample_delay: f64,
    pub adjustable_delay: f64,
}

impl DelayGeometry {
    pub fn effective_delay(&self) -> f64 {
        self.sample_delay - self.adjustable_delay
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinningSection {
    pub bin_width: Option<f64>,
    pub tail_mass_tolerance: Option<f64>,
    pub max_bins: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub parameter: ScanAxis,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    /// Protocol labels (HOM, NR-HOM, TR-HOM, NRTR-HOM, no-HOM).
    #[serde(default)]
    pub protocols: Option<Vec<String>>,
    /// Adds determinant and eigenvalues of this parameter block.
    #[serde(default)]
    pub fim_params: Option<ParameterSet>,
    /// Re-optimise the delay per protocol at every grid point.
    #[serde(default)]
    pub optimal_delta: bool,
}

/// Versioned run configuration. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub detector: Option<DetectorKind>,
    #[serde(default)]
    pub timing: Option<Timing>,
    #[serde(default)]
    pub protocol: Option<ProtocolKind>,
    #[serde(default)]
    pub binning: Option<BinningSection>,
    #[serde(default)]
    pub geometry: Option<DelayGeometry>,
    #[serde(default)]
    pub scan: Option<ScanSection>,
    #[serde(default)]
    pub seed: Option<RandomSeed>,
    #[serde(default)]
    pub n_trials: Option<u64>,
    #[serde(default)]
    pub sampler: Option<SamplerKind>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            units: Units::Natural,
            params: ParamsSection::default(),
            detector: None,
            timing: None,
            protocol: None,
            binning: None,
            geometry: None,
            scan: None,
            seed: None,
            n_trials: None,
            sampler: None,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, CliError> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))?;
        if c.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(format!(
                "config schema_version {} is not supported (expected {SCHEMA_VERSION})",
                c.schema_version
            )));
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fill every unset field that has a default and check consistency.
    pub fn resolve(mut self) -> CliResult<Self> {
        let p = &mut self.params;
        if let Some(g) = self.geometry {
            if p.delta.is_some_and(|d| d != g.effective_delay()) {
                return Err(CliError::config(
                    "give either delta or a delay geometry, not both",
                ));
            }
            p.delta = Some(g.effective_delay());
        }
        p.delta.get_or_insert(0.5);
        p.alpha.get_or_insert(0.9);
        p.gamma.get_or_insert(0.4);
        let sigma = *p.sigma.get_or_insert(1.0);
        if self.units == Units::Natural && sigma != 1.0 {
            return Err(CliError::config("natural units fix sigma = 1; use --units si"));
        }
        self.detector.get_or_insert_with(Default::default);
        self.timing.get_or_insert_with(Default::default);
        self.protocol.get_or_insert_with(Default::default);
        self.sampler.get_or_insert_with(Default::default);
        if let Some(b) = self.binning.as_mut() {
            b.tail_mass_tolerance.get_or_insert(crate::binned::DEFAULT_TAIL_MASS_TOLERANCE);
        }
        self.physical()?;
        if self.timing == Some(Timing::Tr) {
            self.measurement()?;
        }
        Ok(self)
    }

    pub fn physical(&self) -> CliResult<PhysicalParams> {
        let p = &self.params;
        Ok(PhysicalParams::new(
            p.delta.unwrap_or(0.5),
            p.alpha.unwrap_or(0.9),
            p.sigma.unwrap_or(1.0),
            p.gamma.unwrap_or(0.4),
        )?)
    }

    fn binning_config(&self, width: f64) -> CliResult<BinningConfig> {
        let mut bc = BinningConfig::new(width)?;
        if let Some(b) = &self.binning {
            if let Some(t) = b.tail_mass_tolerance {
                bc = bc.with_tail_mass_tolerance(t)?;
            }
            if let Some(m) = b.max_bins {
                bc = bc.with_max_bins(m)?;
            }
        }
        Ok(bc)
    }

    pub fn bin_width(&self) -> Option<f64> {
        self.binning.and_then(|b| b.bin_width)
    }

    pub fn measurement(&self) -> CliResult<MeasurementConfig> {
        let detector = DetectorConfig {
            number_resolving: self.detector == Some(DetectorKind::Nr),
            time_resolving: self.timing == Some(Timing::Tr),
        };
        let protocol = match self.protocol.unwrap_or_default() {
            ProtocolKind::Hom => Protocol::Hom,
            ProtocolKind::Nohom => Protocol::NoHom,
        };
        let binning = if detector.time_resolving {
            let w = self
                .bin_width()
                .ok_or_else(|| CliError::config("time-resolving detectors need --bin-width"))?;
            Some(self.binning_config(w)?)
        } else {
            None
        };
        Ok(MeasurementConfig::new(detector, protocol, binning)?)
    }

    /// Configuration named by a protocol label, sharing this config's binning.
    pub fn labelled(&self, label: &str, bin_width: Option<f64>) -> CliResult<MeasurementConfig> {
        let timed = |d: DetectorConfig, protocol| -> CliResult<MeasurementConfig> {
            let w = bin_width
                .or(self.bin_width())
                .ok_or_else(|| CliError::config(format!("{label} needs a bin width")))?;
            Ok(MeasurementConfig::new(d, protocol, Some(self.binning_config(w)?))?)
        };
        match label {
            "HOM" => Ok(MeasurementConfig::hom()),
            "NR-HOM" => Ok(MeasurementConfig::nr_hom()),
            "TR-HOM" => timed(DetectorConfig::TIME_RESOLVING, Protocol::Hom),
            "NRTR-HOM" => timed(DetectorConfig::NUMBER_AND_TIME_RESOLVING, Protocol::Hom),
            "no-HOM" => timed(DetectorConfig::TIME_RESOLVING, Protocol::NoHom),
            other => Err(CliError::config(format!("unknown protocol label `{other}`"))),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    pub fn sha256(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

// ---------------------------------------------------------------------------
// Argument parsing

#[derive(Debug, Parser)]
#[command(name = "homtool", version, about = "Hong-Ou-Mandel delay metrology toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub bin_width: Option<f64>,
    #[arg(long, value_enum)]
    pub detector: Option<DetectorKind>,
    #[arg(long, value_enum)]
    pub timing: Option<Timing>,
    #[arg(long, value_enum)]
    pub protocol: Option<ProtocolKind>,
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub units: Option<Units>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the outcome distribution as CSV.
    Dist {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fisher information matrix and quantum limits as JSON.
    Fisher {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated parameters, e.g. delta,alpha.
        #[arg(long, default_value = "delta")]
        params: ParameterSet,
        /// Evaluate at the information-maximising delay.
        #[arg(long)]
        optimal_delta: bool,
    },
    /// Information along a one-dimensional parameter grid, as CSV.
    Scan {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        axis: Option<ScanAxis>,
        #[arg(long, allow_hyphen_values = true)]
        start: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        stop: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Comma-separated protocol labels.
        #[arg(long, value_delimiter = ',')]
        protocols: Option<Vec<String>>,
        #[arg(long)]
        fim_params: Option<ParameterSet>,
        #[arg(long)]
        optimal_delta: bool,
    },
    /// Simulate outcome counts as CSV.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        n_trials: Option<u64>,
        #[arg(long)]
        stream: Option<u64>,
        #[arg(long, value_enum)]
        sampler: Option<SamplerKind>,
        #[arg(long, allow_hyphen_values = true)]
        sample_delay: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        adjustable_delay: Option<f64>,
    },
    /// Maximum-likelihood estimate from a counts CSV, as JSON.
    Estimate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        counts: PathBuf,
        /// Counts taken without the sample; enables the sample-delay difference.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value = "delta")]
        params: ParameterSet,
    },
    /// Reproduce the headline information gains.
    Benchmarks {
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check the fast paths against independent oracles.
    Selftest,
}

impl CommonArgs {
    fn resolve(&self, extra: impl FnOnce(&mut RunConfig)) -> CliResult<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let p = &mut c.params;
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    p.$field = Some(v);
                }
            };
        }
        set!(delta);
        set!(alpha);
        set!(sigma);
        set!(gamma);
        if let Some(w) = self.bin_width {
            c.binning.get_or_insert_with(Default::default).bin_width = Some(w);
        }
        if self.detector.is_some() {
            c.detector = self.detector;
        }
        if self.timing.is_some() {
            c.timing = self.timing;
        }
        if self.protocol.is_some() {
            c.protocol = self.protocol;
        }
        if let Some(u) = self.units {
            c.units = u;
        }
        if let Some(s) = self.seed {
            c.seed = Some(RandomSeed::new(s, c.seed.map_or(0, |x| x.stream_id)));
        }
        if self.out.is_some() {
            c.output = self.out.clone();
        }
        extra(&mut c);
        c.resolve()
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Dist { common } => {
            let c = common.resolve(|_| {})?;
            emit(&c.output, &cmd_dist(&c)?)?;
        }
        Command::Fisher {
            common,
            params,
            optimal_delta,
        } => {
            let c = common.resolve(|_| {})?;
            let v = cmd_fisher(&c, &params, optimal_delta)?;
            emit(&c.output, &(serde_json::to_string_pretty(&v).expect("json") + "\n"))?;
        }
        Command::Scan {
            common,
            axis,
            start,
            stop,
            steps,
            protocols,
            fim_params,
            optimal_delta,
        } => {
            let c = common.resolve(|c| {
                let existing = c.scan.clone();
                let scan = match (existing, axis, start, stop, steps) {
                    (Some(mut s), ..) => {
                        if let Some(a) = axis {
                            s.parameter = a;
                        }
                        s.start = start.unwrap_or(s.start);
                        s.stop = stop.unwrap_or(s.stop);
                        s.steps = steps.unwrap_or(s.steps);
                        Some(s)
                    }
                    (None, Some(a), Some(lo), Some(hi), n) => Some(ScanSection {
                        parameter: a,
                        start: lo,
                        stop: hi,
                        steps: n.unwrap_or(101),
                        protocols: None,
                        fim_params: None,
                        optimal_delta: false,
                    }),
                    _ => None,
                };
                c.scan = scan.map(|mut s| {
                    if protocols.is_some() {
                        s.protocols = protocols.clone();
                    }
                    if fim_params.is_some() {
                        s.fim_params = fim_params.clone();
                    }
                    s.optimal_delta |= optimal_delta;
                    s
                });
            })?;
            emit(&c.output, &cmd_scan(&c)?)?;
        }
        Command::Simulate {
            common,
            n_trials,
            stream,
            sampler,
            sample_delay,
            adjustable_delay,
        } => {
            let c = common.resolve(|c| {
                if n_trials.is_some() {
                    c.n_trials = n_trials;
                }
                if let Some(s) = stream {
                    c.seed = Some(RandomSeed::new(c.seed.map_or(0, |x| x.seed), s));
                }
                if sampler.is_some() {
                    c.sampler = sampler;
                }
                if sample_delay.is_some() || adjustable_delay.is_some() {
                    let g = c.geometry.unwrap_or(DelayGeometry {
                        sample_delay: 0.0,
                        adjustable_delay: 0.0,
                    });
                    c.geometry = Some(DelayGeometry {
                        sample_delay: sample_delay.unwrap_or(g.sample_delay),
                        adjustable_delay: adjustable_delay.unwrap_or(g.adjustable_delay),
                    });
                    c.params.delta = None;
                }
            })?;
            emit(&c.output, &cmd_simulate(&c)?)?;
        }
        Command::Estimate {
            common,
            counts,
            reference,
            params,
        } => {
            let c = common.resolve(|_| {})?;
            let v = cmd_estimate(&c, &counts, reference.as_deref(), &params)?;
            emit(&c.output, &(serde_json::to_string_pretty(&v).expect("json") + "\n"))?;
        }
        Command::Benchmarks { json, out } => {
            let report = benchmark_report()?;
            let text = if json {
                serde_json::to_string_pretty(&report).expect("json") + "\n"
            } else {
                format_report(&report)
            };
            emit(&out, &text)?;
            if report.iter().any(|b| b.passed == Some(false)) {
                return Ok(EXIT_BENCHMARK);
            }
        }
        Command::Selftest => {
            let checks = selftest();
            let mut ok = true;
            for c in &checks {
                println!("{} {:<50} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            if !ok {
                return Ok(EXIT_BENCHMARK);
            }
        }
    }
    Ok(EXIT_OK)
}

fn emit(path: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn metadata(c: &RunConfig, command: &str) -> String {
    let mut s = format!("# homtool {command} {}\n", env!("CARGO_PKG_VERSION"));
    s += &format!("# config: {}\n", c.to_json());
    s += &format!("# config_sha256: {}\n", c.sha256());
    if let Some(seed) = c.seed {
        s += &format!("# seed: {} stream: {}\n", seed.seed, seed.stream_id);
    }
    s
}

fn envelope(c: &RunConfig, body: Value) -> Value {
    let mut v = body;
    v["config"] = serde_json::from_str(&c.to_json()).expect("json");
    v["config_sha256"] = json!(c.sha256());
    v
}

// ---------------------------------------------------------------------------
// Commands

/// Outcome distribution CSV: `outcome_kind,bin_index,probability`.
pub fn cmd_dist(c: &RunConfig) -> CliResult<String> {
    let p = c.physical()?;
    let m = c.measurement()?;
    let dist = m.outcome_distribution(&p)?;
    let mut out = metadata(c, "dist");
    out += &format!("# protocol: {}\n", m.label());
    out += "outcome_kind,bin_index,probability\n";
    for (o, v) in dist.iter() {
        let (kind, bin) = o.label();
        out += &format!("{kind},{},{}\n", bin.map(|b| b.to_string()).unwrap_or_default(), fmt(*v));
    }
    Ok(out)
}

fn matrix_json(f: &FisherMatrix) -> Value {
    let a = f.analysis();
    json!({
        "params": f.params().as_slice().iter().map(|p| p.name()).collect::<Vec<_>>(),
        "fim": f.rows(),
        "rank": a.rank,
        "determinant": a.determinant,
        "eigenvalues": a.eigenvalues,
        "singular": a.singular,
    })
}

pub fn cmd_fisher(c: &RunConfig, params: &ParameterSet, at_optimum: bool) -> CliResult<Value> {
    let mut p = c.physical()?;
    let m = c.measurement()?;
    if at_optimum {
        p = p.with(Parameter::Delta, optimal_delta(&m, &p)?.delta)?;
    }
    let f = fim_numeric(&m, &p, params)?;
    let fd = cfi_delta(&m, &p)?;
    let mut v = matrix_json(&f);
    v["protocol"] = json!(m.label());
    v["delta"] = json!(p.delta());
    v["cfi_delta"] = json!(fd);
    v["relative_information"] = json!(relative_information(fd, p.sigma(), p.gamma()));
    v["qfi"] = json!(qfi(p.sigma()));
    v["qfi_two_photon"] = json!(qfi_two_photon(p.sigma(), p.gamma()));
    Ok(envelope(c, v))
}

const ALL_PROTOCOLS: [&str; 5] = ["HOM", "NR-HOM", "TR-HOM", "NRTR-HOM", "no-HOM"];

/// Scan CSV: one row per grid point and protocol, ordered by grid index.
pub fn cmd_scan(c: &RunConfig) -> CliResult<String> {
    let scan = c
        .scan
        .clone()
        .ok_or_else(|| CliError::config("scan needs an axis, start and stop (flags or config `scan`)"))?;
    if scan.steps == 0 || !scan.start.is_finite() || !scan.stop.is_finite() {
        return Err(CliError::config("scan needs finite bounds and at least one step"));
    }
    let timed_ok = c.bin_width().is_some() || scan.parameter == ScanAxis::BinWidth;
    let labels: Vec<String> = match &scan.protocols {
        Some(v) => v.clone(),
        None => ALL_PROTOCOLS
            .iter()
            .filter(|l| timed_ok || matches!(**l, "HOM" | "NR-HOM"))
            .map(|s| s.to_string())
            .collect(),
    };
    let base = c.physical()?;
    let values: Vec<f64> = (0..scan.steps)
        .map(|i| {
            if scan.steps == 1 {
                scan.start
            } else {
                scan.start + (scan.stop - scan.start) * i as f64 / (scan.steps - 1) as f64
            }
        })
        .collect();
    // Validate every label once up front so config errors are not swallowed.
    for l in &labels {
        c.labelled(l, c.bin_width().or(Some(1.0)))?;
    }

    let jobs: Vec<(f64, &String)> = values.iter().flat_map(|v| labels.iter().map(move |l| (*v, l))).collect();
    let rows: Vec<CliResult<String>> = jobs
        .par_iter()
        .map(|&(x, label)| -> CliResult<String> {
            let (mut p, width) = match scan.parameter {
                ScanAxis::Delta => (base.with(Parameter::Delta, x)?, None),
                ScanAxis::Alpha => (base.with(Parameter::Alpha, x)?, None),
                ScanAxis::Sigma => (base.with(Parameter::Sigma, x)?, None),
                ScanAxis::Gamma => (base.with(Parameter::Gamma, x)?, None),
                ScanAxis::BinWidth => (base, Some(x)),
            };
            let m = c.labelled(label, width)?;
            if scan.optimal_delta && scan.parameter != ScanAxis::Delta {
                p = p.with(Parameter::Delta, optimal_delta(&m, &p)?.delta)?;
            }
            let fd = cfi_delta(&m, &p).unwrap_or(f64::NAN);
            let mut row = format!(
                "{},{},{},{},{}",
                fmt(x),
                label,
                fmt(p.delta()),
                fmt(fd),
                fmt(relative_information(fd, p.sigma(), p.gamma()))
            );
            if let Some(fp) = &scan.fim_params {
                match fim_numeric(&m, &p, fp) {
                    Ok(f) => {
                        let a = f.analysis();
                        row += &format!(",{}", fmt(a.determinant));
                        for e in a.eigenvalues {
                            row += &format!(",{}", fmt(e));
                        }
                    }
                    Err(_) => {
                        for _ in 0..=fp.len() {
                            row += ",NaN";
                        }
                    }
                }
            }
            Ok(row)
        })
        .collect();

    let axis = serde_json::to_value(scan.parameter).expect("json");
    let mut out = metadata(c, "scan");
    let mut header = format!("{},protocol,delta,F_delta,I_rel", axis.as_str().unwrap_or("value"));
    if let Some(fp) = &scan.fim_params {
        header += ",det";
        for i in 0..fp.len() {
            header += &format!(",eig_{i}");
        }
    }
    out += &header;
    out.push('\n');
    for r in rows {
        out += &r?;
        out.push('\n');
    }
    Ok(out)
}

/// Counts CSV: `outcome_kind,bin_index,count`.
pub fn cmd_simulate(c: &RunConfig) -> CliResult<String> {
    let mut c = c.clone();
    let seed = *c.seed.get_or_insert(RandomSeed::new(0, 0));
    let n = *c.n_trials.get_or_insert(100_000);
    let p = c.physical()?;
    let m = c.measurement()?;
    let h = match c.sampler.unwrap_or_default() {
        SamplerKind::Categorical => sample_outcomes(&p, &m, n, seed)?,
        SamplerKind::Generative => sample_generative(&p, &m, n, seed)?,
    };
    let mut out = metadata(&c, "simulate");
    out += &format!("# n_trials: {n}\n");
    out += "outcome_kind,bin_index,count\n";
    for (o, k) in h.iter() {
        let (kind, bin) = o.label();
        out += &format!("{kind},{},{k}\n", bin.map(|b| b.to_string()).unwrap_or_default());
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct CountRow {
    outcome_kind: String,
    bin_index: Option<i64>,
    count: u64,
}

/// Read a counts CSV written by `simulate` (or by hand) for `config`.
///
/// If the file embeds its own run config, its measurement configuration must
/// match `config`; a declared `n_trials` must match the row total.
pub fn read_counts(path: &Path, config: &MeasurementConfig) -> CliResult<CountsHistogram> {
    let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let mut declared = None;
    for line in text.lines().filter(|l| l.starts_with('#')) {
        if let Some(js) = line.strip_prefix("# config: ") {
            let embedded = RunConfig::from_json(js)?;
            let m = embedded.measurement()?;
            if m != *config {
                return Err(CliError::config(format!(
                    "{} was recorded with {} but the estimate is configured for {}",
                    path.display(),
                    m.label(),
                    config.label()
                )));
            }
        } else if let Some(n) = line.strip_prefix("# n_trials: ") {
            declared = Some(
                n.trim()
                    .parse::<u64>()
                    .map_err(|e| CliError::config(format!("n_trials header: {e}")))?,
            );
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for r in reader.deserialize::<CountRow>() {
        let r = r.map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        rows.push((Outcome::from_label(&r.outcome_kind, r.bin_index)?, r.count));
    }
    let h = CountsHistogram::from_counts(*config, rows).map_err(|e| CliError::config(e.to_string()))?;
    if let Some(n) = declared {
        if n != h.n_trials() {
            return Err(CliError::config(format!(
                "{} declares {n} trials but its counts sum to {}",
                path.display(),
                h.n_trials()
            )));
        }
    }
    Ok(h)
}

fn estimation_json(r: &EstimationResult) -> Value {
    let obj = |v: &[(Parameter, f64)]| -> Value { v.iter().map(|(p, x)| (p.name().to_string(), json!(x))).collect() };
    json!({
        "estimates": obj(&r.estimates),
        "log_likelihood": r.log_likelihood,
        "observed_information": matrix_json(&r.observed_information),
        "crb_variance": r.crb_variance.as_deref().map(obj),
        "n_trials": r.n_trials,
        "at_search_edge": r.at_search_edge,
    })
}

fn estimate_one(counts: &CountsHistogram, params: &ParameterSet, known: &PhysicalParams) -> CliResult<EstimationResult> {
    if params.as_slice() == [Parameter::Delta] {
        Ok(mle_delta(counts, known)?)
    } else {
        Ok(mle_joint(counts, params, known)?)
    }
}

pub fn cmd_estimate(c: &RunConfig, counts: &Path, reference: Option<&Path>, params: &ParameterSet) -> CliResult<Value> {
    let m = c.measurement()?;
    let known = c.physical()?;
    let h = read_counts(counts, &m)?;
    let r = estimate_one(&h, params, &known)?;
    let mut v = json!({ "protocol": m.label(), "result": estimation_json(&r) });
    if let Some(path) = reference {
        if r.estimate(Parameter::Delta).is_none() {
            return Err(CliError::config("two-dataset mode needs delta among the estimated parameters"));
        }
        let h2 = read_counts(path, &m)?;
        let r2 = estimate_one(&h2, params, &known)?;
        let d1 = r.estimate(Parameter::Delta).expect("checked");
        let d2 = r2.estimate(Parameter::Delta).expect("same parameter set");
        let var = match (r.crb(Parameter::Delta), r2.crb(Parameter::Delta)) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        v["reference"] = estimation_json(&r2);
        v["sample_delay"] = json!({
            "estimate": d1 - d2,
            "crb_variance": var,
        });
        if m.protocol == Protocol::Hom {
            v["sample_delay"]["note"] = json!("HOM data determine |delta| only; the difference is of magnitudes");
        }
    }
    Ok(envelope(c, v))
}

// ---------------------------------------------------------------------------
// Benchmarks

/// One line of the benchmark report, gains in percent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Benchmark {
    pub name: String,
    pub computed: f64,
    pub expected: Option<f64>,
    pub tolerance: Option<f64>,
    /// `None` for informational lines.
    pub passed: Option<bool>,
}

/// Spectral width of the benchmark source, in 1/ps.
pub const BENCH_SIGMA: f64 = 4.6;

fn gain(num: &MeasurementConfig, den: &MeasurementConfig, p: &PhysicalParams) -> crate::Result<f64> {
    Ok(100.0 * (optimal_delta(num, p)?.information / optimal_delta(den, p)?.information - 1.0))
}

/// Information gains of the enhanced protocols over standard HOM at
/// `alpha = 0.9`, `gamma = 0.4`, each protocol at its own best delay.
pub fn benchmark_report() -> crate::Result<Vec<Benchmark>> {
    let checked = |name: &str, computed: f64, expected: f64, tol: f64| Benchmark {
        name: name.to_string(),
        computed,
        expected: Some(expected),
        tolerance: Some(tol),
        passed: Some((computed - expected).abs() <= tol),
    };
    let info = |name: String, computed: f64| Benchmark {
        name,
        computed,
        expected: None,
        tolerance: None,
        passed: None,
    };
    let natural = PhysicalParams::new(0.0, 0.9, 1.0, 0.4)?;
    let ps = PhysicalParams::new(0.0, 0.9, BENCH_SIGMA, 0.4)?;
    let hom = MeasurementConfig::hom();

    // No time resolution: closed forms, maximised separately over delta.
    let best = |f: fn(&PhysicalParams) -> f64| -> crate::Result<f64> {
        let g = |d: f64| -> crate::Result<f64> { Ok(f(&natural.with(Parameter::Delta, d)?)) };
        Ok(crate::information::maximize_on_grid(g, 0.0, 5.0, 1.0 / 400.0, 1e-9)?.1)
    };
    let nr_ratio = 100.0 * (best(cfi_nr_notr)? / best(cfi_bucket_notr)? - 1.0);

    let mut out = vec![checked("NR-HOM vs HOM, no timing (max over delay)", nr_ratio, 9.9, 0.2)];
    let at = |t: f64| -> crate::Result<(f64, f64, f64)> {
        Ok((
            gain(&MeasurementConfig::tr_hom(t)?, &hom, &ps)?,
            gain(&MeasurementConfig::nrtr_hom(t)?, &hom, &ps)?,
            gain(&MeasurementConfig::no_hom(t)?, &hom, &ps)?,
        ))
    };
    let (tr1, nrtr1, _) = at(1.0)?;
    out.push(checked("TR-HOM vs HOM, T = 1 ps", tr1, 1.3, 0.5));
    out.push(checked("NRTR-HOM vs HOM, T = 1 ps", nrtr1, 14.0, 2.0));
    let (_, nrtr02, nh02) = at(0.2)?;
    out.push(checked("no-HOM vs HOM, T = 0.2 ps", nh02, 36.0, 4.0));
    out.push(checked("NRTR-HOM vs HOM, T = 0.2 ps", nrtr02, 50.0, 4.0));
    let (_, nrtr01, _) = at(0.1)?;
    out.push(checked("NRTR-HOM vs HOM, T = 0.1 ps", nrtr01, 95.0, 5.0));

    // Same comparisons with T in units of the dip width 1/sigma.
    for k in [5.0, 1.0, 0.5] {
        let (tr, nrtr, nh) = at(k / BENCH_SIGMA)?;
        out.push(info(format!("TR-HOM vs HOM, T = {k}/sigma"), tr));
        out.push(info(format!("NRTR-HOM vs HOM, T = {k}/sigma"), nrtr));
        out.push(info(format!("no-HOM vs HOM, T = {k}/sigma"), nh));
    }
    Ok(out)
}

pub fn format_report(report: &[Benchmark]) -> String {
    let mut s = format!(
        "information gain over standard HOM (alpha = 0.9, gamma = 0.4, sigma = {BENCH_SIGMA}/ps, best delay per protocol)\n"
    );
    for b in report {
        match (b.expected, b.tolerance, b.passed) {
            (Some(e), Some(t), Some(ok)) => {
                s += &format!(
                    "{} {:<44} {:+8.2}%   expected {:+.1}% +- {:.1} pp\n",
                    if ok { "PASS" } else { "FAIL" },
                    b.name,
                    b.computed,
                    e,
                    t
                );
            }
            _ => s += &format!("info {:<44} {:+8.2}%\n", b.name, b.computed),
        }
    }
    s
}

// ---------------------------------------------------------------------------
// Self test

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, err: crate::Result<f64>, tol: f64) -> Check {
    match err {
        Ok(e) => Check {
            name: name.into(),
            passed: e <= tol,
            detail: format!("max error {e:.2e} (tolerance {tol:.0e})"),
        },
        Err(e) => Check {
            name: name.into(),
            passed: false,
            detail: e.to_string(),
        },
    }
}

/// Oracle cross-checks of the fast evaluation paths.
pub fn selftest() -> Vec<Check> {
    let spec = QuadratureSpec::default();
    let points = [
        (0.3, 0.9, 1.0, 0.4, 0.7),
        (1.2, 0.6, 2.0, 0.1, 0.25),
        (0.0, 1.0, 0.5, 0.0, 3.0),
        (-0.8, 0.95, 1.5, 0.3, 0.4),
    ];
    let mut out = Vec::new();
    out.push(check(
        "quadrature of exp(-x^2) on [0, inf)",
        quad_integrate(|x| (-x * x).exp(), 0.0, f64::INFINITY, &spec).map(|(v, _)| (v - std::f64::consts::PI.sqrt() / 2.0).abs()),
        1e-10,
    ));
    out.push(check(
        "density normalisation",
        points.iter().try_fold(0.0_f64, |m, &(d, a, s, g, _)| {
            let p = PhysicalParams::new(d, a, s, g)?;
            let (c, b) = oracle_total_rates(&p, &spec)?;
            Ok(m.max((c + b - 1.0).abs()))
        }),
        1e-9,
    ));
    out.push(check(
        "binned probabilities vs quadrature",
        points.iter().try_fold(0.0_f64, |m, &(d, a, s, g, w)| {
            let p = PhysicalParams::new(d, a, s, g)?;
            let bc = BinningConfig::new(w)?;
            let mut e = m;
            for n in 0..6u32 {
                e = e.max((crate::binned::binned_coincidence(&p, &bc, n) - oracle_binned_coincidence(&p, w, n, &spec)?).abs());
                e = e.max((crate::binned::binned_bunching(&p, &bc, n) - oracle_binned_bunching(&p, w, n, &spec)?).abs());
            }
            for n in -6..=6i64 {
                e = e.max((crate::binned::binned_nohom(&p, &bc, n) - oracle_binned_nohom(&p, w, n, &spec)?).abs());
            }
            Ok(e)
        }),
        1e-10,
    ));
    out.push(check(
        "numeric vs closed-form information matrices",
        points.iter().filter(|x| x.1 < 1.0 && x.3 > 0.0).try_fold(0.0_f64, |m, &(d, a, s, g, _)| {
            let p = PhysicalParams::new(d, a, s, g)?;
            let mut e = m;
            for (cfg, cf) in [
                (MeasurementConfig::hom(), closed_form_fim_bucket(&p)?),
                (MeasurementConfig::nr_hom(), closed_form_fim_nr(&p)?),
            ] {
                let num = fim_numeric(&cfg, &p, &ParameterSet::all())?;
                let scale = cf.matrix().amax();
                e = e.max((num.matrix() - cf.matrix()).amax() / scale);
            }
            Ok(e)
        }),
        1e-6,
    ));
    out.push(check(
        "continuous no-HOM information equals 4 sigma^2",
        [0.5, 1.0, 2.0].iter().try_fold(0.0_f64, |m, &s| {
            let p = PhysicalParams::new(0.2, 0.9, s, 0.0)?;
            let f = score_integral_cfi(nohom_density, &p, &spec)?;
            Ok(m.max((f / qfi(s) - 1.0).abs()))
        }),
        1e-6,
    ));
    out
}
