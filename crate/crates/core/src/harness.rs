//! Seeded synthetic experiments: weight ensembles with controlled spectra,
//! k-sweeps, method comparisons and probe-stability studies.
//!
//! Every report row carries the seeds needed to regenerate it. Aggregates
//! are a pure function of the rows ([`ExperimentReport::from_rows`]).

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SrrError};
use crate::linalg::{orthonormalize, spectral_profile, Matrix};
use crate::quant::{Quantizer, QuantizerConfig};
use crate::reconstruct::{
    oracle_best_split, probe_profile, qer_decompose, select_k, srr_decompose_with_cache, ProbeCache, SplitChoice,
    Variant,
};
use crate::rng::{derive_seed, gaussian_matrix, seeded_rng};
use crate::scaling::ScalingOperator;

/// Environment variable capping the number of harness worker threads.
pub const THREADS_ENV: &str = "SRR_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Spectrum {
    /// `σ_j = ratio^j`.
    Geometric { ratio: f64 },
    /// `σ_j = (j + 1)^(-exponent)`.
    PowerLaw { exponent: f64 },
    /// `n_spikes` values in `[spike_scale / 2, spike_scale]` over a flat bulk of 1.
    Spiked { n_spikes: usize, spike_scale: f64 },
}

impl Spectrum {
    pub fn label(&self) -> &'static str {
        match self {
            Spectrum::Geometric { .. } => "geometric",
            Spectrum::PowerLaw { .. } => "power_law",
            Spectrum::Spiked { .. } => "spiked",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Spectrum::Geometric { ratio } if !(ratio > 0.0 && ratio < 1.0) => {
                Err(SrrError::domain(format!("geometric ratio must lie in (0, 1), got {ratio}")))
            }
            Spectrum::PowerLaw { exponent } if !(exponent > 0.0 && exponent.is_finite()) => {
                Err(SrrError::domain(format!("power-law exponent must be positive, got {exponent}")))
            }
            Spectrum::Spiked { spike_scale, .. } if !(spike_scale >= 1.0 && spike_scale.is_finite()) => {
                Err(SrrError::domain(format!("spike scale must be at least 1, got {spike_scale}")))
            }
            _ => Ok(()),
        }
    }

    /// The prescribed singular values, non-increasing.
    pub fn values(&self, len: usize) -> Vec<f64> {
        let mut v: Vec<f64> = match *self {
            Spectrum::Geometric { ratio } => (0..len).map(|j| ratio.powi(j as i32)).collect(),
            Spectrum::PowerLaw { exponent } => (0..len).map(|j| ((j + 1) as f64).powf(-exponent)).collect(),
            Spectrum::Spiked { n_spikes, spike_scale } => (0..len)
                .map(|j| {
                    if j < n_spikes {
                        spike_scale * (1.0 - 0.5 * j as f64 / n_spikes as f64)
                    } else {
                        1.0
                    }
                })
                .collect(),
        };
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub rows: usize,
    pub cols: usize,
    pub spectrum: Spectrum,
    pub noise_floor: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(SrrError::domain("synthetic weight needs positive dimensions"));
        }
        if !(self.noise_floor >= 0.0 && self.noise_floor.is_finite()) {
            return Err(SrrError::domain(format!("noise floor must be non-negative, got {}", self.noise_floor)));
        }
        self.spectrum.validate()
    }
}

/// `W = U diag(σ) Vᵀ + noise_floor · G` with seeded orthonormal `U`, `V`
/// and standard normal `G`.
pub fn synth_weight(spec: &SynthSpec) -> Result<Matrix> {
    spec.validate()?;
    let p = spec.rows.min(spec.cols);
    let sigma = spec.spectrum.values(p);
    let u = orthonormalize(&gaussian_matrix(spec.rows, p, &mut seeded_rng(derive_seed(spec.seed, 0))));
    let v = orthonormalize(&gaussian_matrix(spec.cols, p, &mut seeded_rng(derive_seed(spec.seed, 1))));
    let mut w = u.scale_cols(&sigma).matmul_t(&v);
    if spec.noise_floor > 0.0 {
        let g = gaussian_matrix(spec.rows, spec.cols, &mut seeded_rng(derive_seed(spec.seed, 2)));
        w = w.add(&g.scale(spec.noise_floor));
    }
    w.ensure_finite("synthetic weight")?;
    Ok(w)
}

/// How an instance's scaling operator is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthScaling {
    Identity,
    /// Log-normal per-channel magnitudes, mimicking activation outliers.
    Diagonal,
}

pub fn synth_scaling(kind: SynthScaling, dim: usize, seed: u64) -> Result<ScalingOperator> {
    match kind {
        SynthScaling::Identity => Ok(ScalingOperator::identity(dim)),
        SynthScaling::Diagonal => {
            let z = gaussian_matrix(dim, 1, &mut seeded_rng(derive_seed(seed, 3)));
            ScalingOperator::diagonal(z.data().iter().map(|x| (0.5 * x).exp()).collect())
        }
    }
}

/// One ensemble member; everything needed to rebuild `(W, S)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub id: usize,
    pub synth: SynthSpec,
    pub scaling: SynthScaling,
    pub rank: usize,
}

impl InstanceSpec {
    pub fn label(&self) -> String {
        format!("{}/{}x{}", self.synth.spectrum.label(), self.synth.rows, self.synth.cols)
    }

    pub fn build(&self) -> Result<(Matrix, ScalingOperator)> {
        let w = synth_weight(&self.synth)?;
        let s = synth_scaling(self.scaling, self.synth.rows, self.synth.seed)?;
        Ok((w, s))
    }
}

/// Rank budget used for a shape in the built-in ensembles.
pub fn ensemble_rank(rows: usize, cols: usize) -> usize {
    (rows.min(cols) / 4).clamp(1, 64)
}

/// Family parameters for the `i`-th of `n` members, spread evenly.
fn family_spectrum(family: &str, i: usize, n: usize) -> Spectrum {
    let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 };
    match family {
        "geometric" => Spectrum::Geometric { ratio: 0.85 + 0.12 * t },
        "power_law" => Spectrum::PowerLaw { exponent: 0.5 + t },
        _ => Spectrum::Spiked { n_spikes: 2 + (i % 7), spike_scale: 5.0 + 45.0 * t },
    }
}

/// `per_shape` instances of each spectrum family for every shape.
///
/// Geometric and power-law members are noiseless; spiked members add a
/// noise floor of 0.05. Members alternate identity and diagonal scaling.
pub fn build_ensemble(shapes: &[(usize, usize)], per_shape: usize, seed: u64) -> Vec<InstanceSpec> {
    let mut out = Vec::new();
    for &(rows, cols) in shapes {
        for family in ["geometric", "power_law", "spiked"] {
            for i in 0..per_shape {
                let id = out.len();
                let spectrum = family_spectrum(family, i, per_shape);
                let noise_floor = if family == "spiked" { 0.05 } else { 0.0 };
                out.push(InstanceSpec {
                    id,
                    synth: SynthSpec { rows, cols, spectrum, noise_floor, seed: derive_seed(seed, id as u64) },
                    scaling: if i % 2 == 0 { SynthScaling::Identity } else { SynthScaling::Diagonal },
                    rank: ensemble_rank(rows, cols),
                });
            }
        }
    }
    out
}

pub const DEFAULT_SHAPES: [(usize, usize); 3] = [(64, 48), (256, 256), (512, 512)];
pub const DEFAULT_PER_SHAPE: usize = 20;

/// 20 instances × {64×48, 256×256, 512×512} × 3 spectrum families.
pub fn default_ensemble(seed: u64) -> Vec<InstanceSpec> {
    build_ensemble(&DEFAULT_SHAPES, DEFAULT_PER_SHAPE, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Sweep,
    Compare,
    Stability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub instance_id: usize,
    pub ensemble: String,
    pub method: String,
    pub k: usize,
    pub scaled_error: f64,
    pub selected_k_star: Option<usize>,
    /// Selector objective at this `k` (sweep rows only).
    pub surrogate: Option<f64>,
    /// Present only when timing was requested; excluded otherwise so that
    /// reports stay byte-reproducible.
    pub runtime_ms: Option<f64>,
    pub seed: u64,
    pub probe_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ReportKind,
    pub rows: Vec<ReportRow>,
    pub aggregates: BTreeMap<String, f64>,
}

impl ExperimentReport {
    /// Builds a report, deriving the aggregates from the rows.
    pub fn from_rows(kind: ReportKind, rows: Vec<ReportRow>) -> Self {
        let aggregates = match kind {
            ReportKind::Sweep => sweep_aggregates(&rows),
            ReportKind::Compare => compare_aggregates(&rows),
            ReportKind::Stability => stability_aggregates(&rows),
        };
        ExperimentReport { kind, rows, aggregates }
    }

    pub fn aggregate(&self, key: &str) -> Option<f64> {
        self.aggregates.get(key).copied()
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Ranks starting at 1, ties sharing their average rank.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            ranks[t] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation; NaN when either input is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "spearman inputs differ in length");
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let (ma, _) = mean_std(&ra);
    let (mb, _) = mean_std(&rb);
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        num += (x - ma) * (y - mb);
        da += (x - ma).powi(2);
        db += (y - mb).powi(2);
    }
    if da == 0.0 || db == 0.0 {
        return f64::NAN;
    }
    num / (da * db).sqrt()
}

fn sweep_aggregates(rows: &[ReportRow]) -> BTreeMap<String, f64> {
    let mut agg = BTreeMap::new();
    if rows.is_empty() {
        return agg;
    }
    let loss: Vec<f64> = rows.iter().map(|r| r.scaled_error).collect();
    let surrogate: Vec<f64> = rows.iter().map(|r| r.surrogate.unwrap_or(f64::NAN)).collect();
    let mut k_opt = 0;
    for (k, &l) in loss.iter().enumerate() {
        if l < loss[k_opt] {
            k_opt = k;
        }
    }
    let k_star = rows[0].selected_k_star.unwrap_or(0);
    agg.insert("spearman".into(), spearman(&loss, &surrogate));
    agg.insert("k_opt".into(), k_opt as f64);
    agg.insert("k_star".into(), k_star as f64);
    agg.insert("min_loss".into(), loss[k_opt]);
    agg.insert("qer_loss".into(), loss[0]);
    agg.insert("loss_at_k_star".into(), loss[k_star]);
    agg.insert("k_star_loss_ratio".into(), loss[k_star] / loss[k_opt]);
    agg
}

fn stability_aggregates(rows: &[ReportRow]) -> BTreeMap<String, f64> {
    let mut agg = BTreeMap::new();
    if rows.is_empty() {
        return agg;
    }
    let ks: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    let (mean, std) = mean_std(&ks);
    let min = ks.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean_abs_dev = ks.iter().map(|k| (k - mean).abs()).sum::<f64>() / ks.len() as f64;
    agg.insert("seeds".into(), ks.len() as f64);
    agg.insert("mean_k_star".into(), mean);
    agg.insert("std_k_star".into(), std);
    agg.insert("min_k_star".into(), min);
    agg.insert("max_k_star".into(), max);
    agg.insert("max_spread".into(), max - min);
    agg.insert("mean_abs_deviation".into(), mean_abs_dev);
    agg
}

pub const METHOD_QER: &str = "qer";
pub const METHOD_SPLIT: &str = "srr_split";
pub const METHOD_GLOBAL: &str = "srr_global";
pub const METHOD_ORACLE: &str = "oracle";

/// Ratio to the oracle used for the "near-oracle" rate.
pub const NEAR_ORACLE_FACTOR: f64 = 1.2;

fn compare_aggregates(rows: &[ReportRow]) -> BTreeMap<String, f64> {
    // group rows by instance, keeping each instance's ensemble label
    let mut per_instance: BTreeMap<usize, (String, BTreeMap<&str, f64>)> = BTreeMap::new();
    for r in rows {
        let entry = per_instance.entry(r.instance_id).or_insert_with(|| (r.ensemble.clone(), BTreeMap::new()));
        entry.1.insert(r.method.as_str(), r.scaled_error);
    }
    let mut groups: BTreeMap<String, Vec<&BTreeMap<&str, f64>>> = BTreeMap::new();
    for (label, methods) in per_instance.values() {
        groups.entry("all".to_string()).or_default().push(methods);
        let family = label.split('/').next().unwrap_or(label).to_string();
        groups.entry(family).or_default().push(methods);
        if label.contains('/') {
            groups.entry(label.clone()).or_default().push(methods);
        }
    }
    let mut agg = BTreeMap::new();
    for (group, members) in groups {
        let n = members.len() as f64;
        agg.insert(format!("{group}/instances"), n);
        for method in [METHOD_QER, METHOD_SPLIT, METHOD_GLOBAL, METHOD_ORACLE] {
            let errs: Vec<f64> = members.iter().filter_map(|m| m.get(method).copied()).collect();
            if errs.is_empty() {
                continue;
            }
            agg.insert(format!("{group}/{method}/mean_error"), mean_std(&errs).0);
            if method == METHOD_QER {
                continue;
            }
            let pairs: Vec<(f64, f64)> =
                members.iter().filter_map(|m| Some((*m.get(method)?, *m.get(METHOD_QER)?))).collect();
            if pairs.is_empty() {
                continue;
            }
            let wins = pairs.iter().filter(|(e, q)| e < q).count() as f64;
            let reductions: Vec<f64> =
                pairs.iter().map(|(e, q)| if *q > 0.0 { 1.0 - e / q } else { 0.0 }).collect();
            let (mean, std) = mean_std(&reductions);
            let half_width = 1.96 * std / (reductions.len() as f64).sqrt();
            agg.insert(format!("{group}/{method}/win_rate"), wins / pairs.len() as f64);
            agg.insert(format!("{group}/{method}/mean_reduction"), mean);
            agg.insert(format!("{group}/{method}/std_reduction"), std);
            agg.insert(format!("{group}/{method}/ci95_low"), mean - half_width);
            agg.insert(format!("{group}/{method}/ci95_high"), mean + half_width);
        }
        let oracle_pairs: Vec<(f64, f64, f64)> = members
            .iter()
            .filter_map(|m| Some((*m.get(METHOD_ORACLE)?, *m.get(METHOD_QER)?, *m.get(METHOD_SPLIT)?)))
            .collect();
        if !oracle_pairs.is_empty() {
            let violations = oracle_pairs.iter().filter(|(o, q, _)| o > q).count();
            let near = oracle_pairs.iter().filter(|(o, _, s)| *s <= NEAR_ORACLE_FACTOR * o).count();
            agg.insert(format!("{group}/oracle_vs_qer_violations"), violations as f64);
            agg.insert(format!("{group}/split_near_oracle_rate"), near as f64 / oracle_pairs.len() as f64);
        }
        let global_pairs: Vec<(f64, f64)> = members
            .iter()
            .filter_map(|m| Some((*m.get(METHOD_GLOBAL)?, *m.get(METHOD_SPLIT)?)))
            .collect();
        if !global_pairs.is_empty() {
            let violations = global_pairs.iter().filter(|(g, s)| g > s).count();
            agg.insert(format!("{group}/global_vs_split_violations"), violations as f64);
        }
    }
    agg
}

/// True loss and selector objective over every split of one weight.
pub fn run_sweep(
    w: &Matrix,
    s: &ScalingOperator,
    quantizer: &dyn Quantizer,
    r: usize,
    probe_seed: u64,
    cache: &ProbeCache,
) -> Result<ExperimentReport> {
    let oracle = oracle_best_split(w, s, quantizer, r)?;
    let auto = srr_decompose_with_cache(w, s, quantizer, r, SplitChoice::Auto { probe_seed }, Variant::Split, cache)?;
    let sel = auto.selection.as_ref().expect("auto decomposition records its selection");
    let rows = oracle
        .loss_curve
        .iter()
        .zip(&sel.objective_curve)
        .enumerate()
        .map(|(k, (&loss, &obj))| ReportRow {
            instance_id: 0,
            ensemble: "sweep".into(),
            method: METHOD_SPLIT.into(),
            k,
            scaled_error: loss,
            selected_k_star: Some(sel.k_star),
            surrogate: Some(obj),
            runtime_ms: None,
            seed: 0,
            probe_seed: Some(probe_seed),
        })
        .collect();
    Ok(ExperimentReport::from_rows(ReportKind::Sweep, rows))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub quantizer: QuantizerConfig,
    pub probe_seed: u64,
    /// Record wall-clock runtimes (makes the report non-reproducible).
    pub timings: bool,
    /// Worker cap; `None` reads [`THREADS_ENV`], falling back to the
    /// available parallelism.
    pub threads: Option<usize>,
}

fn worker_count(requested: Option<usize>, jobs: usize) -> usize {
    let cap = requested
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()))
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    cap.clamp(1, jobs.max(1))
}

/// Runs `f` over `jobs` with up to `workers` threads; results come back in
/// job order regardless of completion order.
fn parallel_map<T, R, F>(jobs: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    if workers <= 1 {
        return jobs.iter().map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut results: Vec<(usize, R)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut local = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= jobs.len() {
                            break local;
                        }
                        local.push((i, f(&jobs[i])));
                    }
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("harness worker panicked")).collect()
    });
    results.sort_by_key(|(i, _)| *i);
    results.into_iter().map(|(_, r)| r).collect()
}

fn compare_one(inst: &InstanceSpec, config: &CompareConfig, cache: &ProbeCache) -> Result<Vec<ReportRow>> {
    let (w, s) = inst.build()?;
    let q = &config.quantizer;
    let r = inst.rank;
    let choice = SplitChoice::Auto { probe_seed: config.probe_seed };
    let mut rows = Vec::with_capacity(4);
    let mut push = |method: &str, k: usize, err: f64, k_star: Option<usize>, started: Instant| {
        rows.push(ReportRow {
            instance_id: inst.id,
            ensemble: inst.label(),
            method: method.into(),
            k,
            scaled_error: err,
            selected_k_star: k_star,
            surrogate: None,
            runtime_ms: config.timings.then(|| started.elapsed().as_secs_f64() * 1e3),
            seed: inst.synth.seed,
            probe_seed: k_star.map(|_| config.probe_seed),
        });
    };
    let t = Instant::now();
    let qer = qer_decompose(&w, &s, q, r)?;
    push(METHOD_QER, 0, qer.scaled_error, None, t);
    let t = Instant::now();
    let split = srr_decompose_with_cache(&w, &s, q, r, choice, Variant::Split, cache)?;
    push(METHOD_SPLIT, split.k, split.scaled_error, Some(split.k), t);
    let t = Instant::now();
    let global = srr_decompose_with_cache(&w, &s, q, r, choice, Variant::Global, cache)?;
    push(METHOD_GLOBAL, global.k, global.scaled_error, Some(global.k), t);
    let t = Instant::now();
    let oracle = oracle_best_split(&w, &s, q, r)?;
    push(METHOD_ORACLE, oracle.k_opt, oracle.loss, None, t);
    Ok(rows)
}

/// QER, SRR (auto split), SRR (auto global) and the oracle on each instance.
pub fn compare_methods(instances: &[InstanceSpec], config: &CompareConfig) -> Result<ExperimentReport> {
    config.quantizer.validate()?;
    let cache = ProbeCache::new();
    let mut sorted: Vec<&InstanceSpec> = instances.iter().collect();
    sorted.sort_by_key(|i| i.id);
    let workers = worker_count(config.threads, sorted.len());
    let results = parallel_map(&sorted, workers, |inst| compare_one(inst, config, &cache));
    let mut rows = Vec::with_capacity(4 * sorted.len());
    for r in results {
        rows.extend(r?);
    }
    Ok(ExperimentReport::from_rows(ReportKind::Compare, rows))
}

/// `k*` for each probe seed `0..n_seeds` (offset by `seed_base`) on one weight.
pub fn probe_stability_study(
    w: &Matrix,
    s: &ScalingOperator,
    r: usize,
    n_seeds: usize,
    seed_base: u64,
) -> Result<ExperimentReport> {
    if n_seeds == 0 {
        return Err(SrrError::domain("stability study needs at least one probe seed"));
    }
    if r > w.min_dim() {
        return Err(SrrError::domain(format!("rank budget {r} exceeds min dimension {}", w.min_dim())));
    }
    let profile = spectral_profile(&s.forward(w)?)?;
    let (m, n) = w.shape();
    let mut rows = Vec::with_capacity(n_seeds);
    for i in 0..n_seeds {
        let probe_seed = seed_base + i as u64;
        let probe = probe_profile(s, m, n, probe_seed)?;
        let sel = select_k(&profile, &probe, r)?;
        rows.push(ReportRow {
            instance_id: i,
            ensemble: format!("{m}x{n}"),
            method: "probe".into(),
            k: sel.k_star,
            scaled_error: f64::NAN,
            selected_k_star: Some(sel.k_star),
            surrogate: Some(sel.objective_curve[sel.k_star]),
            runtime_ms: None,
            seed: seed_base,
            probe_seed: Some(probe_seed),
        });
    }
    Ok(ExperimentReport::from_rows(ReportKind::Stability, rows))
}

/// Parses a family name into a default-parameter spectrum.
pub fn spectrum_from_name(name: &str, param: Option<f64>, spikes: Option<usize>) -> Result<Spectrum> {
    let spectrum = match name {
        "geometric" => Spectrum::Geometric { ratio: param.unwrap_or(0.9) },
        "power_law" | "power-law" => Spectrum::PowerLaw { exponent: param.unwrap_or(1.0) },
        "spiked" => Spectrum::Spiked { n_spikes: spikes.unwrap_or(4), spike_scale: param.unwrap_or(20.0) },
        other => return Err(SrrError::input(format!("unknown spectrum family '{other}'"))),
    };
    spectrum.validate()?;
    Ok(spectrum)
}
