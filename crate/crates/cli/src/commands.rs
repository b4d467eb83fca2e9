use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use srr_core::adapter::{adapter_init, toy_finetune, GradScaling, TrainConfig};
use srr_core::harness::{
    build_ensemble, compare_methods, default_ensemble, probe_stability_study, run_sweep, spectrum_from_name,
    synth_scaling, synth_weight, CompareConfig, SynthScaling, SynthSpec, DEFAULT_SHAPES,
};
use srr_core::io::{self, ReportFormat};
use srr_core::linalg::{spectral_profile, Matrix};
use srr_core::quant::{effective_bitwidth, QuantFamily, QuantizerConfig};
use srr_core::reconstruct::{qer_decompose, srr_decompose_with_cache, ProbeCache, SplitChoice, Variant};
use srr_core::rng::{derive_seed, gaussian_matrix, seeded_rng};
use srr_core::scaling::{accumulate_calibration, build_scaling, ScalingKind, ScalingOperator};
use srr_core::{Result, SrrError};

/// Collects validation failures so they can be reported together.
#[derive(Default)]
struct Checks(Vec<String>);

impl Checks {
    fn parse<T: std::str::FromStr>(&mut self, flag: &str, value: &str) -> Option<T>
    where
        T::Err: std::fmt::Display,
    {
        match value.parse() {
            Ok(v) => Some(v),
            Err(e) => {
                self.0.push(format!("--{flag}: {e}"));
                None
            }
        }
    }

    fn ensure(&mut self, ok: bool, msg: impl Into<String>) {
        if !ok {
            self.0.push(msg.into());
        }
    }

    fn ok<T>(&mut self, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.0.push(e.to_string());
                None
            }
        }
    }

    fn finish(self) -> Result<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(SrrError::Input(self.0.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct QuantArgs {
    /// Quantizer family: mxint or uniform.
    #[arg(long, default_value = "mxint")]
    quant: String,
    /// Mantissa / integer bits (2 to 8).
    #[arg(long, default_value_t = 3)]
    bits: u32,
    /// Elements per scaling block (16, 32, 64 or 128).
    #[arg(long, default_value_t = 32)]
    block_size: usize,
}

impl QuantArgs {
    fn resolve(&self, checks: &mut Checks) -> Option<QuantizerConfig> {
        let family: Option<QuantFamily> = checks.parse("quant", &self.quant);
        // bits and block size are checked even when the family is invalid
        let config = checks.ok(QuantizerConfig::new(family.unwrap_or(QuantFamily::Mxint), self.bits, self.block_size))?;
        Some(QuantizerConfig { family: family?, ..config })
    }
}

#[derive(Debug, Clone, Args)]
pub struct ScalingArgs {
    /// Calibration statistics written by `srr calibrate`.
    #[arg(long, value_name = "FILE")]
    calibration: Option<PathBuf>,
    /// Scaling operator: identity, diagonal or dense (the latter two need --calibration).
    #[arg(long, default_value = "identity")]
    scaling: String,
    /// Ridge / floor for the scaling operator [default: 1e-6 · trace(C) / m].
    #[arg(long)]
    eps: Option<f64>,
}

impl ScalingArgs {
    fn check(&self, checks: &mut Checks) -> Option<ScalingKind> {
        let kind: ScalingKind = checks.parse("scaling", &self.scaling)?;
        checks.ensure(
            kind == ScalingKind::Identity || self.calibration.is_some(),
            format!("--scaling {kind} requires --calibration"),
        );
        if let Some(eps) = self.eps {
            checks.ensure(eps >= 0.0 && eps.is_finite(), format!("--eps must be non-negative, got {eps}"));
        }
        Some(kind)
    }

    fn build(&self, kind: ScalingKind, dim: usize) -> Result<ScalingOperator> {
        let Some(path) = &self.calibration else {
            return Ok(ScalingOperator::identity(dim));
        };
        let stats = io::read_calibration(path)?;
        if stats.dim != dim {
            return Err(SrrError::Input(format!(
                "calibration dimension {} does not match the weight's {dim} rows",
                stats.dim
            )));
        }
        let eps = self.eps.unwrap_or_else(|| stats.default_ridge());
        build_scaling(&stats, kind, eps)
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file [default: standard output].
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Report format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => io::atomic_write(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_weight(path: &Path) -> Result<Matrix> {
    io::read_matrix(path)
}

fn check_rank(checks: &mut Checks, w: &Matrix, rank: usize) {
    checks.ensure(rank >= 1, "--rank must be at least 1");
    checks.ensure(
        rank <= w.min_dim(),
        format!("--rank {rank} exceeds the min dimension {} of the {}x{} weight", w.min_dim(), w.rows(), w.cols()),
    );
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Weight matrix (SRRM).
    #[arg(long, value_name = "FILE")]
    weight: PathBuf,
    #[command(flatten)]
    scaling: ScalingArgs,
    #[command(flatten)]
    quant: QuantArgs,
    /// Rank budget r.
    #[arg(long, default_value_t = 64)]
    rank: usize,
    /// Preserved rank; selects the split manually.
    #[arg(long, conflicts_with_all = ["auto", "qer"])]
    k: Option<usize>,
    /// Select the split automatically (the default when --k is absent).
    #[arg(long, conflicts_with = "qer")]
    auto: bool,
    /// Plain QER: quantize W directly and correct with one rank-r SVD.
    #[arg(long)]
    qer: bool,
    /// Reconstruction variant: split or global.
    #[arg(long, default_value = "split")]
    variant: String,
    /// Probe seed for automatic selection.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Summary JSON [default: standard output].
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write q.srrm, l.srrm and r.srrm into this directory.
    #[arg(long, value_name = "DIR")]
    factors_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct DecomposeSummary {
    rows: usize,
    cols: usize,
    rank: usize,
    k: usize,
    k_star: Option<usize>,
    probe_seed: Option<u64>,
    variant: Variant,
    quantizer: String,
    effective_bitwidth: f64,
    scaling: ScalingKind,
    scaled_error: f64,
    relative_scaled_error: f64,
    /// ρ_p(SW) for p = 0..=r.
    weight_rho_curve: Vec<f64>,
    objective_curve: Option<Vec<f64>>,
}

pub fn decompose(a: DecomposeArgs) -> Result<()> {
    let mut checks = Checks::default();
    let quant = a.quant.resolve(&mut checks);
    let kind = a.scaling.check(&mut checks);
    let variant = match a.variant.as_str() {
        "split" => Some(Variant::Split),
        "global" => Some(Variant::Global),
        other => {
            checks.0.push(format!("--variant: expected split or global, got '{other}'"));
            None
        }
    };
    checks.ensure(!(a.qer && variant == Some(Variant::Global)), "--qer cannot be combined with --variant global");
    let w = read_weight(&a.weight)?;
    check_rank(&mut checks, &w, a.rank);
    if let Some(k) = a.k {
        checks.ensure(k <= a.rank, format!("--k {k} exceeds --rank {}", a.rank));
    }
    checks.finish()?;
    let (quant, kind, variant) = (quant.unwrap(), kind.unwrap(), variant.unwrap());

    let s = a.scaling.build(kind, w.rows())?;
    let dec = if a.qer {
        qer_decompose(&w, &s, &quant, a.rank)?
    } else {
        let choice = match a.k {
            Some(k) => SplitChoice::Manual(k),
            None => SplitChoice::Auto { probe_seed: a.seed },
        };
        srr_decompose_with_cache(&w, &s, &quant, a.rank, choice, variant, &ProbeCache::new())?
    };
    let sw = s.forward(&w)?;
    let profile = spectral_profile(&sw)?;
    let norm = sw.frobenius_norm();
    let summary = DecomposeSummary {
        rows: w.rows(),
        cols: w.cols(),
        rank: a.rank,
        k: dec.k,
        k_star: dec.selection.as_ref().map(|s| s.k_star),
        probe_seed: dec.selection.as_ref().and_then(|s| s.probe_seed),
        variant: dec.variant,
        quantizer: dec.quantizer.clone(),
        effective_bitwidth: effective_bitwidth(&quant)?,
        scaling: kind,
        scaled_error: dec.scaled_error,
        relative_scaled_error: if norm > 0.0 { dec.scaled_error / norm } else { 0.0 },
        weight_rho_curve: profile.rho_curve(a.rank)?,
        objective_curve: dec.selection.as_ref().map(|s| s.objective_curve.clone()),
    };
    if let Some(dir) = &a.factors_dir {
        std::fs::create_dir_all(dir)?;
        io::write_matrix(&dir.join("q.srrm"), &dec.q)?;
        io::write_matrix(&dir.join("l.srrm"), &dec.l)?;
        io::write_matrix(&dir.join("r.srrm"), &dec.r)?;
    }
    emit(a.out.as_deref(), &io::to_json(&summary)?)
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Weight matrix (SRRM).
    #[arg(long, value_name = "FILE")]
    weight: PathBuf,
    #[command(flatten)]
    scaling: ScalingArgs,
    #[command(flatten)]
    quant: QuantArgs,
    /// Rank budget r.
    #[arg(long, default_value_t = 64)]
    rank: usize,
    /// Probe seed for the selector objective.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let mut checks = Checks::default();
    let quant = a.quant.resolve(&mut checks);
    let kind = a.scaling.check(&mut checks);
    let format: Option<ReportFormat> = checks.parse("format", &a.output.format);
    let w = read_weight(&a.weight)?;
    check_rank(&mut checks, &w, a.rank);
    checks.finish()?;
    let s = a.scaling.build(kind.unwrap(), w.rows())?;
    let report = run_sweep(&w, &s, &quant.unwrap(), a.rank, a.seed, &ProbeCache::new())?;
    emit(a.output.out.as_deref(), &io::render_report(&report, format.unwrap())?)
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Comma-separated shapes such as 64x48,256x256 [default: 64x48,256x256,512x512].
    #[arg(long)]
    shapes: Option<String>,
    /// Instances per shape and spectrum family.
    #[arg(long, default_value_t = 20)]
    per_shape: usize,
    /// Ensemble seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probe seed for automatic selection.
    #[arg(long, default_value_t = 0)]
    probe_seed: u64,
    #[command(flatten)]
    quant: QuantArgs,
    /// Worker threads [default: $SRR_THREADS or the available cores].
    #[arg(long)]
    threads: Option<usize>,
    /// Record per-method wall-clock times (output is then not reproducible).
    #[arg(long)]
    timings: bool,
    /// Also write the aggregates as JSON to this file.
    #[arg(long, value_name = "FILE")]
    aggregates: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_shapes(checks: &mut Checks, text: &str) -> Vec<(usize, usize)> {
    let mut shapes = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let dims: Vec<Option<usize>> = part.split('x').map(|d| d.parse().ok()).collect();
        match dims.as_slice() {
            [Some(r), Some(c)] if *r > 0 && *c > 0 => shapes.push((*r, *c)),
            _ => checks.0.push(format!("--shapes: '{part}' is not of the form ROWSxCOLS")),
        }
    }
    checks.ensure(!shapes.is_empty(), "--shapes: no shapes given");
    shapes
}

pub fn compare(a: CompareArgs) -> Result<()> {
    let mut checks = Checks::default();
    let quant = a.quant.resolve(&mut checks);
    let format: Option<ReportFormat> = checks.parse("format", &a.output.format);
    let shapes = match &a.shapes {
        Some(s) => parse_shapes(&mut checks, s),
        None => DEFAULT_SHAPES.to_vec(),
    };
    checks.ensure(a.per_shape >= 1, "--per-shape must be at least 1");
    if let Some(t) = a.threads {
        checks.ensure(t >= 1, "--threads must be at least 1");
    }
    checks.finish()?;
    let instances = if a.shapes.is_none() && a.per_shape == 20 {
        default_ensemble(a.seed)
    } else {
        build_ensemble(&shapes, a.per_shape, a.seed)
    };
    let config = CompareConfig {
        quantizer: quant.unwrap(),
        probe_seed: a.probe_seed,
        timings: a.timings,
        threads: a.threads,
    };
    let report = compare_methods(&instances, &config)?;
    if let Some(p) = &a.aggregates {
        io::atomic_write(p, io::to_json(&report.aggregates)?.as_bytes())?;
    }
    emit(a.output.out.as_deref(), &io::render_report(&report, format.unwrap())?)
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Rows of the synthetic weight.
    #[arg(long, default_value_t = 512)]
    rows: usize,
    /// Columns of the synthetic weight.
    #[arg(long, default_value_t = 512)]
    cols: usize,
    /// Spectrum family: geometric, power-law or spiked.
    #[arg(long, default_value = "geometric")]
    spectrum: String,
    /// Family parameter: decay ratio, power-law exponent or spike scale.
    #[arg(long)]
    param: Option<f64>,
    /// Number of spikes (spiked family).
    #[arg(long)]
    spikes: Option<usize>,
    /// Standard deviation of the additive Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    noise_floor: f64,
}

impl SynthArgs {
    fn resolve(&self, checks: &mut Checks, seed: u64) -> Option<SynthSpec> {
        let spectrum = checks.ok(spectrum_from_name(&self.spectrum, self.param, self.spikes))?;
        let spec = SynthSpec { rows: self.rows, cols: self.cols, spectrum, noise_floor: self.noise_floor, seed };
        checks.ok(spec.validate())?;
        Some(spec)
    }
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    /// Weight matrix (SRRM); a synthetic weight is generated when absent.
    #[arg(long, value_name = "FILE")]
    weight: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthArgs,
    /// Synthetic scaling: identity or diagonal.
    #[arg(long, default_value = "identity")]
    scaling: String,
    /// Rank budget r.
    #[arg(long, default_value_t = 64)]
    rank: usize,
    /// Number of probe seeds.
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    /// First probe seed.
    #[arg(long, default_value_t = 0)]
    probe_seed: u64,
    /// Seed for the synthetic weight and scaling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

pub fn stability(a: StabilityArgs) -> Result<()> {
    let mut checks = Checks::default();
    let format: Option<ReportFormat> = checks.parse("format", &a.output.format);
    let scaling = match a.scaling.as_str() {
        "identity" => Some(SynthScaling::Identity),
        "diagonal" => Some(SynthScaling::Diagonal),
        other => {
            checks.0.push(format!("--scaling: expected identity or diagonal, got '{other}'"));
            None
        }
    };
    checks.ensure(a.seeds >= 1, "--seeds must be at least 1");
    let spec = if a.weight.is_none() { a.synth.resolve(&mut checks, a.seed) } else { None };
    let w = match &a.weight {
        Some(p) => Some(read_weight(p)?),
        None => match spec {
            Some(spec) if checks.0.is_empty() => Some(synth_weight(&spec)?),
            _ => None,
        },
    };
    if let Some(w) = &w {
        check_rank(&mut checks, w, a.rank);
    }
    checks.finish()?;
    let w = w.expect("weight present after validation");
    let s = synth_scaling(scaling.unwrap(), w.rows(), a.seed)?;
    let report = probe_stability_study(&w, &s, a.rank, a.seeds, a.probe_seed)?;
    emit(a.output.out.as_deref(), &io::render_report(&report, format.unwrap())?)
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[command(flatten)]
    synth: SynthArgs,
    #[command(flatten)]
    quant: QuantArgs,
    /// Rank budget r.
    #[arg(long, default_value_t = 8)]
    rank: usize,
    /// Preserved rank [default: automatic selection].
    #[arg(long)]
    k: Option<usize>,
    /// Number of synthetic training samples.
    #[arg(long, default_value_t = 64)]
    samples: usize,
    /// Gradient-descent steps.
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Learning rate.
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Gradient rule for the preserved factors: none, fixed or sgp.
    #[arg(long, default_value = "fixed")]
    rule: String,
    /// Gradient multiplier for the preserved factors (fixed rule).
    #[arg(long, default_value_t = srr_core::adapter::DEFAULT_GAMMA)]
    gamma: f64,
    /// SGP strength (sgp rule).
    #[arg(long, default_value_t = srr_core::adapter::DEFAULT_SGP_ALPHA)]
    alpha: f64,
    /// Recompute the SGP basis every this many steps.
    #[arg(long, default_value_t = 1)]
    sgp_refresh: usize,
    /// Seed for the synthetic weight and data.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Loss trajectory CSV [default: standard output].
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct LossRow {
    step: usize,
    loss: f64,
}

pub fn finetune_toy(a: FinetuneArgs) -> Result<()> {
    let mut checks = Checks::default();
    let quant = a.quant.resolve(&mut checks);
    let spec = a.synth.resolve(&mut checks, a.seed);
    let rule = match a.rule.as_str() {
        "none" => Some(GradScaling::None),
        "fixed" => Some(GradScaling::Fixed { gamma: a.gamma }),
        "sgp" => Some(GradScaling::Sgp { alpha: a.alpha }),
        other => {
            checks.0.push(format!("--rule: expected none, fixed or sgp, got '{other}'"));
            None
        }
    };
    if let Some(rule) = rule {
        checks.ok(rule.validate());
    }
    checks.ensure(a.rank >= 1 && a.rank <= a.synth.rows.min(a.synth.cols), "--rank must lie in [1, min(rows, cols)]");
    if let Some(k) = a.k {
        checks.ensure(k <= a.rank, format!("--k {k} exceeds --rank {}", a.rank));
    }
    checks.ensure(a.samples >= 1, "--samples must be at least 1");
    checks.ensure(a.steps >= 1, "--steps must be at least 1");
    checks.ensure(a.sgp_refresh >= 1, "--sgp-refresh must be at least 1");
    checks.finish()?;
    if a.lr.is_nan() || a.lr <= 0.0 {
        return Err(SrrError::Domain(format!("learning rate must be positive, got {}", a.lr)));
    }

    let w = synth_weight(&spec.unwrap())?;
    let s = ScalingOperator::identity(w.rows());
    let choice = match a.k {
        Some(k) => SplitChoice::Manual(k),
        None => SplitChoice::Auto { probe_seed: derive_seed(a.seed, 20) },
    };
    let dec = srr_decompose_with_cache(&w, &s, &quant.unwrap(), a.rank, choice, Variant::Split, &ProbeCache::new())?;
    let mut adapter = adapter_init(&dec, rule.unwrap())?;
    // targets come from the full-precision weight
    let x = gaussian_matrix(a.samples, w.rows(), &mut seeded_rng(derive_seed(a.seed, 21)));
    let y = x.matmul(&w);
    let config = TrainConfig { steps: a.steps, lr: a.lr, sgp_refresh: a.sgp_refresh };
    let losses = toy_finetune(&mut adapter, &dec.q, &x, &y, &config)?;
    let rows: Vec<LossRow> = losses.into_iter().enumerate().map(|(step, loss)| LossRow { step, loss }).collect();
    emit(a.out.as_deref(), &io::to_csv(&rows)?)
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    #[command(flatten)]
    synth: SynthArgs,
    /// Seed for the singular vectors and noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output matrix (SRRM).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also write the prescribed spectrum and parameters as JSON.
    #[arg(long, value_name = "FILE")]
    meta: Option<PathBuf>,
}

pub fn gen_synth(a: GenSynthArgs) -> Result<()> {
    let mut checks = Checks::default();
    let spec = a.synth.resolve(&mut checks, a.seed);
    checks.finish()?;
    let spec = spec.unwrap();
    let w = synth_weight(&spec)?;
    io::write_matrix(&a.out, &w)?;
    if let Some(p) = &a.meta {
        let mut meta = BTreeMap::new();
        meta.insert("spec", serde_json::to_value(spec).map_err(|e| SrrError::Format(e.to_string()))?);
        let sigma = spec.spectrum.values(spec.rows.min(spec.cols));
        meta.insert("singular_values", serde_json::to_value(sigma).map_err(|e| SrrError::Format(e.to_string()))?);
        io::atomic_write(p, io::to_json(&meta)?.as_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Activations (SRRM, one sample per row).
    #[arg(long, value_name = "FILE")]
    activations: PathBuf,
    /// Output statistics (SRRM second moment plus a .meta.json sidecar).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

pub fn calibrate(a: CalibrateArgs) -> Result<()> {
    let x = io::read_matrix(&a.activations)?;
    let stats = accumulate_calibration(&x)?;
    io::write_calibration(&a.out, &stats)
}
