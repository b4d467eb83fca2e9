//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Calibrated constants are frozen below with the measurements
//! that justified them.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use srr_core::adapter::{adapter_init, loss_and_gradients, scale_gradients, sgp_lambdas, GradScaling, GradientBundle, SplitAdapter};
use srr_core::harness::{
    compare_methods, default_ensemble, mean_std, probe_stability_study, run_sweep, synth_scaling, synth_weight,
    CompareConfig, InstanceSpec, Spectrum, SynthScaling, SynthSpec, METHOD_GLOBAL, METHOD_ORACLE, METHOD_QER,
    METHOD_SPLIT,
};
use srr_core::linalg::{
    default_oversample, orthonormalize, spectral_profile, svd_randomized, svd_truncated, Matrix, DEFAULT_POWER_ITERS,
};
use srr_core::quant::{block_step, effective_bitwidth, QuantFamily, Quantizer, QuantizerConfig};
use srr_core::reconstruct::{estimate_eta, qer_decompose, srr_decompose, srr_global_recon, ProbeCache, SplitChoice};
use srr_core::rng::{derive_seed, gaussian_matrix, seeded_rng};
use srr_core::scaling::{accumulate_calibration, build_scaling, ScalingKind, ScalingOperator};

/// SRR(auto) may exceed the oracle loss by this factor on "near-oracle" instances.
///
/// Calibration run (mxint and uniform at 2, 3 and 4 bits; 64x48 x 20 and
/// 256x256 x 4 per family): every geometric and spiked instance was within
/// 1.2x, so the factor and the 90% rate below are kept as stated and frozen.
const NEAR_ORACLE_FACTOR: f64 = 1.2;
const NEAR_ORACLE_RATE: f64 = 0.9;

/// Mean Spearman correlation between true loss and selector objective over
/// the decay sweep suite must exceed this.
///
/// Calibration run: per-sweep correlations averaged 0.85 to 0.90 at 64x48
/// (individual sweeps as low as -0.86 when the loss curve is nearly flat)
/// and 1.0 at 256x256. Threshold frozen at 0.7.
const SPEARMAN_MIN: f64 = 0.7;

const ENSEMBLE_SEED: u64 = 0;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
    gaussian_matrix(rows, cols, &mut seeded_rng(seed))
}

fn with_spectrum(rows: usize, cols: usize, sigma: &[f64], seed: u64) -> Matrix {
    let u = orthonormalize(&random(rows, sigma.len(), seed));
    let v = orthonormalize(&random(cols, sigma.len(), derive_seed(seed, 1)));
    u.scale_cols(sigma).matmul_t(&v)
}

struct Case {
    w: Matrix,
    s: ScalingOperator,
    quant: QuantizerConfig,
    r: usize,
    k: usize,
}

/// 100 split cases: both quantizer families, all three scaling kinds.
fn split_cases(n: usize) -> Vec<Case> {
    (0..n)
        .map(|i| {
            let seed = derive_seed(2024, i as u64);
            let (m, cols) = [(32, 24), (24, 40), (48, 32)][i % 3];
            let sigma: Vec<f64> = (0..m.min(cols)).map(|j| 8.0 * 0.75f64.powi(j as i32) + 0.02).collect();
            let w = with_spectrum(m, cols, &sigma, seed);
            let family = if i % 2 == 0 { QuantFamily::Mxint } else { QuantFamily::Uniform };
            let quant = QuantizerConfig::new(family, 2 + (i % 3) as u32, 16).unwrap();
            let kind = [ScalingKind::Identity, ScalingKind::Diagonal, ScalingKind::Dense][(i / 2) % 3];
            let mags: Vec<f64> = random(1, m, derive_seed(seed, 2)).data().iter().map(|v| (0.7 * v).exp()).collect();
            let x = random(4 * m, m, derive_seed(seed, 3)).matmul(&Matrix::from_diag(&mags));
            let stats = accumulate_calibration(&x).unwrap();
            let s = build_scaling(&stats, kind, stats.default_ridge()).unwrap();
            let r = 4 + i % 7;
            Case { w, s, quant, r, k: i % (r + 1) }
        })
        .collect()
}

fn c01_eckart_young() -> Outcome {
    let start = Instant::now();
    let mut violations = 0;
    let mut comparisons = 0;
    for i in 0..200u64 {
        let a = random(32, 24, derive_seed(1, i));
        for p in [1, 4, 8] {
            let best = a.sub(&svd_truncated(&a, p).unwrap().reconstruct()).frobenius_norm();
            for c in 0..50u64 {
                let seed = derive_seed(derive_seed(2, i), 100 * p as u64 + c);
                let cand = random(32, p, seed).matmul(&random(p, 24, derive_seed(seed, 1)));
                comparisons += 1;
                if best.partial_cmp(&a.sub(&cand).frobenius_norm()) != Some(std::cmp::Ordering::Less) {
                    violations += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        violations == 0 && secs < 30.0,
        format!("{violations} violations in {comparisons} comparisons, {secs:.1}s"),
    )
}

fn c02_c03_identities() -> (Outcome, Outcome) {
    let mut worst4 = 0.0f64;
    let mut worst5 = 0.0f64;
    let cases = split_cases(100);
    for c in &cases {
        let dec = srr_decompose(&c.w, &c.s, &c.quant, c.r, SplitChoice::Manual(c.k)).unwrap();
        let (l1, r1) = dec.preserved_factors();
        let remainder = c.w.sub(&l1.matmul(&r1));
        let se = c.s.forward(&remainder.sub(&dec.q)).unwrap();
        let prof = spectral_profile(&se).unwrap();
        worst4 = worst4.max(rel_diff(dec.scaled_error.powi(2), prof.total_energy * prof.rho(c.r - c.k).unwrap()));
        let sw = spectral_profile(&c.s.forward(&c.w).unwrap()).unwrap();
        let lhs = c.s.forward(&remainder).unwrap().frobenius_norm_sq();
        worst5 = worst5.max(rel_diff(lhs, sw.rho(c.k).unwrap() * sw.total_energy));
    }
    (
        check(worst4 < 1e-8, format!("max relative deviation {worst4:.2e} over {} decompositions", cases.len())),
        check(worst5 < 1e-8, format!("max relative deviation {worst5:.2e} over {} decompositions", cases.len())),
    )
}

fn c04_degenerate() -> Outcome {
    let mut mismatches = 0;
    for c in split_cases(50) {
        let a = srr_decompose(&c.w, &c.s, &c.quant, c.r, SplitChoice::Manual(0)).unwrap();
        let b = qer_decompose(&c.w, &c.s, &c.quant, c.r).unwrap();
        let bits = |m: &Matrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        if bits(&a.q) != bits(&b.q) || bits(&a.l) != bits(&b.l) || bits(&a.r) != bits(&b.r)
            || a.scaled_error.to_bits() != b.scaled_error.to_bits()
        {
            mismatches += 1;
        }
    }
    check(mismatches == 0, format!("{mismatches} of 50 instances differ from the QER pipeline"))
}

/// The default ensemble restricted to what one core covers in the time
/// budget: all 64x48 members, every fourth 256x256 member and the two
/// extreme 512x512 members of each spectrum family.
fn acceptance_ensemble() -> Vec<InstanceSpec> {
    default_ensemble(ENSEMBLE_SEED)
        .into_iter()
        .filter(|inst| {
            let i = inst.id % 20;
            match inst.synth.rows {
                64 => true,
                256 => i % 4 == 0,
                _ => i == 0 || i == 19,
            }
        })
        .collect()
}

fn c05_c06_dominance() -> (Outcome, Outcome) {
    let instances = acceptance_ensemble();
    let config = CompareConfig { quantizer: QuantizerConfig::default(), ..Default::default() };
    let report = compare_methods(&instances, &config).unwrap();
    let err = |id: usize, m: &str| {
        report.rows.iter().find(|r| r.instance_id == id && r.method == m).map(|r| r.scaled_error).unwrap()
    };
    let mut oracle_violations = 0;
    let mut global_violations = 0;
    let (mut near, mut eligible) = (0, 0);
    for inst in &instances {
        let oracle = err(inst.id, METHOD_ORACLE);
        if oracle > err(inst.id, METHOD_QER) {
            oracle_violations += 1;
        }
        if err(inst.id, METHOD_GLOBAL) > err(inst.id, METHOD_SPLIT) {
            global_violations += 1;
        }
        if matches!(inst.synth.spectrum, Spectrum::Geometric { .. } | Spectrum::Spiked { .. }) {
            eligible += 1;
            if err(inst.id, METHOD_SPLIT) <= NEAR_ORACLE_FACTOR * oracle {
                near += 1;
            }
        }
    }
    let rate = near as f64 / eligible as f64;
    let reduction = report.aggregate("all/srr_split/mean_reduction").unwrap_or(f64::NAN);
    (
        check(
            oracle_violations == 0 && rate >= NEAR_ORACLE_RATE,
            format!(
                "{oracle_violations} oracle>QER violations over {} instances; SRR(auto) within {NEAR_ORACLE_FACTOR}x oracle on {near}/{eligible} geometric+spiked ({:.1}%); mean reduction vs QER {:.1}%",
                instances.len(),
                100.0 * rate,
                100.0 * reduction
            ),
        ),
        check(global_violations == 0, format!("{global_violations} global>split violations over {} instances", instances.len())),
    )
}

fn c06_manual_k() -> Outcome {
    let mut violations = 0;
    let cases = split_cases(100);
    for c in &cases {
        let split = srr_decompose(&c.w, &c.s, &c.quant, c.r, SplitChoice::Manual(c.k)).unwrap();
        let global = srr_global_recon(&c.w, &c.s, &c.quant, c.r, SplitChoice::Manual(c.k)).unwrap();
        if global.scaled_error > split.scaled_error {
            violations += 1;
        }
    }
    check(violations == 0, format!("{violations} violations over {} manual-k instances", cases.len()))
}

fn c07_probe_stability() -> Outcome {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    let mut weights: Vec<(String, Matrix)> = Vec::new();
    for (name, spectrum) in [
        ("geometric", Spectrum::Geometric { ratio: 0.95 }),
        ("power_law", Spectrum::PowerLaw { exponent: 0.7 }),
        ("spiked", Spectrum::Spiked { n_spikes: 8, spike_scale: 20.0 }),
    ] {
        let spec = SynthSpec { rows: 512, cols: 512, spectrum, noise_floor: 0.02, seed: 7 };
        weights.push((name.to_string(), synth_weight(&spec).unwrap()));
    }
    for inst in acceptance_ensemble().into_iter().filter(|i| i.synth.rows == 512) {
        weights.push((format!("ens{}", inst.id), synth_weight(&inst.synth).unwrap()));
    }
    for (name, w) in &weights {
        for kind in [SynthScaling::Identity, SynthScaling::Diagonal] {
            let s = synth_scaling(kind, 512, 7).unwrap();
            let rep = probe_stability_study(w, &s, 64, 10, 0).unwrap();
            let spread = rep.aggregate("max_spread").unwrap();
            worst = worst.max(spread);
            parts.push(format!("{name}/{kind:?}={spread}"));
        }
    }
    check(
        worst <= 3.0,
        format!("max k* spread {worst} over {} studies (512x512, r=64, 10 seeds): {}", parts.len(), parts.join(" ")),
    )
}

fn c08_quantizer() -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    for family in [QuantFamily::Mxint, QuantFamily::Uniform] {
        for bits in [2, 3, 4, 8] {
            let cfg = QuantizerConfig::new(family, bits, 32).unwrap();
            let qmax = ((1u32 << (bits - 1)) - 1) as f64;
            for i in 0..100u64 {
                let scale = 2f64.powi((i % 40) as i32 - 20);
                let w = random(4, 70, derive_seed(family as u64 * 1000 + bits as u64, i)).scale(scale);
                let q = cfg.quantize_values(&w).unwrap();
                let qq = cfg.quantize_values(&q).unwrap();
                checked += 1;
                if q.data().iter().zip(qq.data()).any(|(a, b)| a.to_bits() != b.to_bits()) {
                    failures.push(format!("{family}{bits} idempotence draw {i}"));
                }
                for r in 0..w.rows() {
                    for (wb, qb) in w.row(r).chunks(32).zip(q.row(r).chunks(32)) {
                        let amax = wb.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                        let step = block_step(wb, &cfg);
                        // grid step from its definition, independent of block_step
                        let step_ok = match family {
                            QuantFamily::Uniform => rel_diff(step, amax / qmax) <= 2f64.powi(-45),
                            QuantFamily::Mxint => {
                                step.to_bits() & ((1u64 << 52) - 1) == 0 && amax <= qmax * step && amax > qmax * step / 2.0
                            }
                        };
                        if !step_ok {
                            failures.push(format!("{family}{bits} step {step} for block max {amax}"));
                        }
                        if wb.iter().zip(qb).any(|(x, y)| (x - y).abs() > step / 2.0) {
                            failures.push(format!("{family}{bits} half-step bound draw {i}"));
                        }
                    }
                }
            }
        }
    }
    let widths: Vec<f64> =
        [2, 3, 4].iter().map(|&b| effective_bitwidth(&QuantizerConfig::mxint(b).unwrap()).unwrap()).collect();
    if widths != [2.25, 3.25, 4.25] {
        failures.push(format!("effective bitwidths {widths:?}"));
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{checked} matrices idempotent and within half a step; bitwidths {widths:?}")
        } else {
            failures.join("; ")
        },
    )
}

fn c09_assumption_one() -> Outcome {
    let est = estimate_eta(&QuantizerConfig::uniform(3).unwrap(), &ScalingOperator::identity(128), 100, (128, 128), 9)
        .unwrap();
    check(
        est.coefficient_of_variation < 0.2,
        format!("cv {:.4} (eta_hat {:.4}) over {} draws", est.coefficient_of_variation, est.eta_hat, est.samples),
    )
}

fn c10_randomized() -> Outcome {
    let mut worst = (0.0f64, 0.0, 0);
    for (i, ratio) in [0.5f64, 0.7, 0.8, 0.9].into_iter().enumerate() {
        let sigma: Vec<f64> = (0..100).map(|j| ratio.powi(j)).collect();
        let a = with_spectrum(160, 100, &sigma, 300 + i as u64);
        for p in [1, 4, 8, 16, 32] {
            let exact = svd_truncated(&a, p).unwrap();
            let approx = svd_randomized(&a, p, default_oversample(p), DEFAULT_POWER_ITERS, derive_seed(5, p as u64)).unwrap();
            for (x, y) in approx.s.iter().zip(&exact.s) {
                if rel_diff(*x, *y) > worst.0 {
                    worst = (rel_diff(*x, *y), ratio, p);
                }
            }
        }
    }
    check(
        worst.0 < 0.01,
        format!(
            "max relative singular-value error {:.2e} at ratio {} p={} (grid: ratios 0.5-0.9, p in 1..32, 160x100)",
            worst.0, worst.1, worst.2
        ),
    )
}

fn c11_adapter() -> Outcome {
    let sigma: Vec<f64> = (0..12).map(|j| 4.0 * 0.7f64.powi(j)).collect();
    let w = with_spectrum(16, 12, &sigma, 3);
    let s = ScalingOperator::identity(16);
    let dec = srr_decompose(&w, &s, &QuantizerConfig::uniform(3).unwrap(), 6, SplitChoice::Manual(2)).unwrap();
    let adapter = adapter_init(&dec, GradScaling::None).unwrap();
    let x = random(20, 16, 8);
    let y = x.matmul(&w.add(&random(16, 12, 9).scale(0.3)));
    let (_, g) = loss_and_gradients(&adapter, &dec.q, &x, &y).unwrap();
    let mut worst = 0.0f64;
    for which in 0..4 {
        let gm = [&g.g_l1, &g.g_r1, &g.g_l2, &g.g_r2][which];
        for c in 0..10u64 {
            let i = (derive_seed(which as u64, c) % gm.rows() as u64) as usize;
            let j = (derive_seed(which as u64 + 10, c) % gm.cols() as u64) as usize;
            let eval = |delta: f64| {
                let mut a: SplitAdapter = adapter.clone();
                let f = [&mut a.l1, &mut a.r1, &mut a.l2, &mut a.r2];
                let f = f.into_iter().nth(which).unwrap();
                f.set(i, j, f.get(i, j) + delta);
                loss_and_gradients(&a, &dec.q, &x, &y).unwrap().0
            };
            let h = 1e-5;
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let an = gm.get(i, j);
            worst = worst.max((fd - an).abs() / an.abs().max(fd.abs()).max(1e-8));
        }
    }
    let bundle = |seed: u64| GradientBundle {
        g_l1: random(adapter.l1.rows(), adapter.l1.cols(), seed),
        g_r1: random(adapter.r1.rows(), adapter.r1.cols(), seed + 1),
        g_l2: random(adapter.l2.rows(), adapter.l2.cols(), seed + 2),
        g_r2: random(adapter.r2.rows(), adapter.r2.cols(), seed + 3),
    };
    let gb = bundle(40);
    let one = adapter_init(&dec, GradScaling::Fixed { gamma: 1.0 }).unwrap();
    let zero = adapter_init(&dec, GradScaling::Fixed { gamma: 0.0 }).unwrap();
    let identity_ok = scale_gradients(&one, &gb).unwrap() == gb;
    let z = scale_gradients(&zero, &gb).unwrap();
    let zero_ok = z.g_l1.max_abs() == 0.0 && z.g_r1.max_abs() == 0.0 && z.g_l2 == gb.g_l2 && z.g_r2 == gb.g_r2;
    let sv = [5.0, 3.0, 2.0, 0.5];
    let lam1_ok = [0.0, 1.0, 5.0, 50.0].iter().all(|&a| sgp_lambdas(&sv, a)[0] == 1.0);
    let alpha0_ok = sgp_lambdas(&sv, 0.0).iter().zip(sv).all(|(l, s)| *l == s / sv[0]);
    check(
        worst < 1e-5 && identity_ok && zero_ok && lam1_ok && alpha0_ok,
        format!(
            "finite-difference max rel error {worst:.2e}; gamma=1 identity {identity_ok}; gamma=0 zeroes preserved {zero_ok}; lambda_1=1 {lam1_ok}; alpha=0 ratio {alpha0_ok}"
        ),
    )
}

fn c12_alignment() -> Outcome {
    let cache = ProbeCache::new();
    let mut rhos = Vec::new();
    for inst in acceptance_ensemble().iter().filter(|i| {
        i.synth.rows <= 256 && matches!(i.synth.spectrum, Spectrum::Geometric { .. } | Spectrum::PowerLaw { .. })
    }) {
        let (w, s) = inst.build().unwrap();
        let rep = run_sweep(&w, &s, &QuantizerConfig::default(), inst.rank, 0, &cache).unwrap();
        let rho = rep.aggregate("spearman").unwrap();
        if rho.is_finite() {
            rhos.push(rho);
        }
    }
    let (mean, _) = mean_std(&rhos);
    let mut sorted = rhos.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    check(
        mean > SPEARMAN_MIN,
        format!("mean Spearman {mean:.3} (median {median:.3}, min {:.3}) over {} decay sweeps", sorted[0], rhos.len()),
    )
}

fn run_cli(args: &[String]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_srr")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("srr {args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn c13_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("gen-synth", vec!["--rows", "64", "--cols", "48", "--spectrum", "spiked", "--noise-floor", "0.05", "--seed", "3", "--out", "{out}", "--meta", "{out}.json"]),
        ("calibrate", vec!["--activations", "{act}", "--out", "{out}"]),
        ("decompose", vec!["--weight", "{w}", "--rank", "16", "--auto", "--seed", "4", "--out", "{out}", "--factors-dir", "{dir}"]),
        ("decompose", vec!["--weight", "{w}", "--calibration", "{cal}", "--scaling", "dense", "--rank", "16", "--variant", "global", "--out", "{out}"]),
        ("sweep", vec!["--weight", "{w}", "--rank", "12", "--quant", "uniform", "--out", "{out}"]),
        ("compare", vec!["--shapes", "32x24,48x40", "--per-shape", "2", "--threads", "2", "--out", "{out}", "--format", "json"]),
        ("stability", vec!["--rows", "96", "--cols", "96", "--rank", "16", "--seeds", "4", "--scaling", "diagonal", "--out", "{out}"]),
        ("finetune-toy", vec!["--rows", "24", "--cols", "16", "--rank", "4", "--steps", "15", "--rule", "sgp", "--out", "{out}"]),
    ];
    let root = dir.path();
    let sub = |s: &str, tag: &str| -> String {
        s.replace("{w}", &root.join("w.srrm").to_string_lossy())
            .replace("{act}", &root.join("act.srrm").to_string_lossy())
            .replace("{cal}", &root.join("cal.srrm").to_string_lossy())
            .replace("{out}", &root.join(format!("out-{tag}")).to_string_lossy())
            .replace("{dir}", &root.join(format!("dir-{tag}")).to_string_lossy())
    };
    // fixtures shared by the commands under test
    run_cli(&["gen-synth", "--rows", "64", "--cols", "48", "--spectrum", "spiked", "--noise-floor", "0.05", "--seed", "3", "--out", &sub("{w}", "")].map(String::from))?;
    run_cli(&["gen-synth", "--rows", "256", "--cols", "64", "--spectrum", "power-law", "--noise-floor", "0.3", "--out", &sub("{act}", "")].map(String::from))?;
    run_cli(&["calibrate", "--activations", &sub("{act}", ""), "--out", &sub("{cal}", "")].map(String::from))?;
    let mut names = Vec::new();
    for (i, (cmd, args)) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let tag = format!("{i}-{run}");
            let mut argv = vec![cmd.to_string()];
            argv.extend(args.iter().map(|a| sub(a, &tag)));
            run_cli(&argv)?;
            let mut files: Vec<(String, Vec<u8>)> = Vec::new();
            for entry in walk(root).into_iter().filter(|p| p.to_string_lossy().contains(&format!("-{tag}"))) {
                let rel = entry.to_string_lossy().replace(&tag, "");
                files.push((rel, std::fs::read(&entry).map_err(|e| e.to_string())?));
            }
            files.sort();
            outputs.push(files);
        }
        if outputs[0].is_empty() {
            return Err(format!("{cmd} produced no output files"));
        }
        if outputs[0] != outputs[1] {
            return Err(format!("{cmd} (command {i}) differs between runs"));
        }
        names.push(*cmd);
    }
    names.dedup();
    Ok(format!("{} commands byte-identical across two runs ({})", commands.len(), names.join(", ")))
}

/// Every file under `path`.
fn walk(path: &Path) -> Vec<std::path::PathBuf> {
    if path.is_dir() {
        std::fs::read_dir(path).unwrap().flat_map(|e| walk(&e.unwrap().path())).collect()
    } else {
        vec![path.to_path_buf()]
    }
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(e) => Err(e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(&str, &str, Outcome)> = Vec::new();
    let mut record = |id, name, outcome: Outcome| {
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{id} {tag} {name}: {detail}");
        results.push((id, name, outcome));
    };
    record("c01", "Eckart-Young", guarded(c01_eckart_young));
    let (c02, c03) = match catch_unwind(c02_c03_identities) {
        Ok(pair) => pair,
        Err(_) => (Err("panicked".into()), Err("panicked".into())),
    };
    record("c02", "error factorization identity", c02);
    record("c03", "preserved tail-energy identity", c03);
    record("c04", "k=0 reduces to QER bit-exactly", guarded(c04_degenerate));
    let (c05, c06_auto) = match catch_unwind(c05_c06_dominance) {
        Ok(pair) => pair,
        Err(_) => (Err("panicked".into()), Err("panicked".into())),
    };
    record("c05", "oracle dominance and near-oracle auto split", c05);
    let c06_manual = guarded(c06_manual_k);
    let c06 = match (c06_auto, c06_manual) {
        (Ok(a), Ok(b)) => Ok(format!("auto k: {a}; manual k: {b}")),
        (a, b) => Err(format!("auto k: {}; manual k: {}", a.unwrap_or_else(|e| e), b.unwrap_or_else(|e| e))),
    };
    record("c06", "global reconstruction dominates split", c06);
    record("c07", "probe stability", guarded(c07_probe_stability));
    record("c08", "quantizer contracts", guarded(c08_quantizer));
    record("c09", "relative quantization error stability", guarded(c09_assumption_one));
    record("c10", "randomized SVD accuracy", guarded(c10_randomized));
    record("c11", "adapter gradient checks", guarded(c11_adapter));
    record("c12", "loss/objective rank alignment", guarded(c12_alignment));
    record("c13", "CLI determinism", guarded(c13_determinism));
    let failed = results.iter().filter(|(_, _, o)| o.is_err()).count();
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
