//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.
//!
//! Needs the MNIST training files in `$MNIST_DIR` (default `data/mnist` at
//! the workspace root). The two training runs at full scale dominate the
//! wall time.

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ff_sparsity::data::{inputs_of, make_batches, BatchMode, MnistSet};
use ff_sparsity::experiment::{
    run_batch_sweep, run_ffa, run_goodness_descent, run_theorem1_scan, ExperimentConfig, MetricsRow, Mode,
};
use ff_sparsity::model::{ffa_gradient, goodness_gradient, Batch, LayerState};
use ff_sparsity::numerics::{random_unit_vector, SeededRng};
use ff_sparsity::oracle::{
    actual_update_outcome, eta_scaling_residual, finite_diff_gradient, tally_agreement, Agreement, Loss, Update,
};
use ff_sparsity::theory::{hoyer_sparsity, theorem1_all, theorem2_all, theorem1_check, theorem2_check, Target};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

fn mnist_dir() -> PathBuf {
    std::env::var_os("MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/mnist")))
}

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }

    fn fail(detail: impl Into<String>) -> Self {
        Self::new(false, detail)
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

fn decile_means(v: &[f64]) -> (f64, f64) {
    let k = v.len() / 10;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (mean(&v[..k]), mean(&v[v.len() - k..]))
}

fn column(rows: &[MetricsRow], f: impl Fn(&MetricsRow) -> f64) -> Vec<f64> {
    rows.iter().map(f).collect()
}

fn config(mode: Mode) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(mode);
    c.mnist_dir = mnist_dir();
    c
}

fn fig1a(set: &MnistSet) -> Verdict {
    let start = Instant::now();
    let scan = match run_theorem1_scan(&config(Mode::Theorem1Scan), set) {
        Ok(s) => s,
        Err(e) => return Verdict::fail(e.to_string()),
    };
    let elapsed = start.elapsed();
    let frac = scan.satisfied_fraction();
    Verdict::new(
        frac >= 0.995 && scan.rows.len() == 60000 && elapsed < Duration::from_secs(300),
        format!(
            "satisfied {frac:.6} (>= 0.995), rows {}, degenerate {}, {:.1}s (< 300s)",
            scan.rows.len(),
            scan.degenerate_count(),
            elapsed.as_secs_f64()
        ),
    )
}

fn fig1b(set: &MnistSet) -> Verdict {
    let rows = match run_batch_sweep(&config(Mode::BatchSweep), set) {
        Ok(r) => r,
        Err(e) => return Verdict::fail(e.to_string()),
    };
    let ratios: Vec<f64> = rows.iter().map(|r| r.mean_ratio).collect();
    let drops: Vec<f64> = ratios.windows(2).map(|w| w[0] - w[1]).filter(|d| *d > 0.0).collect();
    let pass = rows.len() == 4 && drops.len() <= 1 && drops.iter().all(|d| *d <= 0.005);
    let shown: Vec<String> = rows
        .iter()
        .map(|r| format!("N={} {:.5}", r.batch_size, r.mean_ratio))
        .collect();
    Verdict::new(pass, format!("{} (inversions {:?})", shown.join(", "), drops))
}

fn fig2(rows: &[MetricsRow]) -> Verdict {
    let sparser = column(rows, |r| r.ratio_sparser_pos);
    let theorem = column(rows, |r| r.ratio_theorem_pos);
    let (s0, s1) = decile_means(&sparser);
    let (t0, t1) = decile_means(&theorem);
    let r = pearson(&sparser, &theorem);
    Verdict::new(
        rows.len() == 936 && s0 > s1 && t0 > t1 && r > 0.8,
        format!(
            "{} iterations; sparser {s0:.4} -> {s1:.4}, theorem {t0:.4} -> {t1:.4}, pearson {r:.4} (> 0.8)",
            rows.len()
        ),
    )
}

fn fig3(rows: &[MetricsRow]) -> Verdict {
    let both = rows
        .iter()
        .filter(|r| r.ratio_sparser_pos > 0.5 && r.ratio_sparser_neg.unwrap_or(f64::NAN) > 0.5)
        .count() as f64
        / rows.len() as f64;
    let rp = pearson(&column(rows, |r| r.ratio_sparser_pos), &column(rows, |r| r.ratio_theorem_pos));
    let rn = pearson(
        &column(rows, |r| r.ratio_sparser_neg.unwrap_or(f64::NAN)),
        &column(rows, |r| r.ratio_theorem_neg.unwrap_or(f64::NAN)),
    );
    Verdict::new(
        rows.len() == 2340 && both >= 0.7 && rp > 0.6 && rn > 0.6,
        format!(
            "{} iterations; both streams > 0.5 in {both:.4} (>= 0.7); pearson pos {rp:.4}, neg {rn:.4} (> 0.6)",
            rows.len()
        ),
    )
}

fn relative_error(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

fn gradients() -> Verdict {
    let (mut worst, mut compared, mut excluded) = (0.0f64, 0usize, 0usize);
    for seed in 0..20u64 {
        let mut rng = SeededRng::new(1000 + seed);
        let (n, m, count) = (6, 5, 4);
        let layer = LayerState::kaiming(n, m, &mut rng).unwrap();
        let pos: Vec<Vec<f64>> = (0..count).map(|_| random_unit_vector(m, &mut rng)).collect();
        let neg: Vec<Vec<f64>> = (0..count).map(|_| random_unit_vector(m, &mut rng)).collect();
        let pb = Batch::new(&layer, pos.clone()).unwrap();
        let nb = Batch::new(&layer, neg.clone()).unwrap();
        let cases = [
            (goodness_gradient(&pb), Loss::Goodness(&pos)),
            (ffa_gradient(&pb, &nb).unwrap(), Loss::Ffa { pos: &pos, neg: &neg }),
        ];
        for (analytic, loss) in cases {
            let fd = finite_diff_gradient(&layer, loss, 1e-6).unwrap();
            excluded += fd.excluded_count();
            for p in 0..n {
                for q in 0..m {
                    if fd.is_excluded(p, q) {
                        continue;
                    }
                    compared += 1;
                    worst = worst.max(relative_error(analytic.get(p, q), fd.grad.get(p, q)));
                }
            }
        }
    }
    Verdict::new(
        worst <= 1e-5 && compared > 0,
        format!("20 instances, {compared} weights compared, {excluded} kink-adjacent excluded, max rel err {worst:.3e} (<= 1e-5)"),
    )
}

fn oracle_agreement(set: &MnistSet) -> Verdict {
    let eta = 1e-7;
    let mut rng = SeededRng::new(42);
    let layer = LayerState::kaiming(4096, ff_sparsity::data::IMAGE_LEN, &mut rng).unwrap();
    let (mut t1, mut t2) = (Agreement::default(), Agreement::default());
    let mut plain = make_batches(set, 128, 7, BatchMode::Plain).unwrap();
    for _ in 0..8 {
        let batch = Batch::new(&layer, inputs_of(plain.next().unwrap().unwrap())).unwrap();
        let reports = theorem1_all(&batch).unwrap();
        let out = actual_update_outcome(&layer, Update::Goodness(&batch), eta).unwrap();
        t1.add(tally_agreement(&reports, &out.records, 1e-4));
    }
    let mut positives = make_batches(set, 64, 8, BatchMode::Positive).unwrap();
    let mut negatives = make_batches(set, 64, 8, BatchMode::Negative).unwrap();
    for _ in 0..8 {
        let pos = Batch::new(&layer, inputs_of(positives.next().unwrap().unwrap())).unwrap();
        let neg = Batch::new(&layer, inputs_of(negatives.next().unwrap().unwrap())).unwrap();
        let (rp, rn) = theorem2_all(&pos, &neg).unwrap();
        let out = actual_update_outcome(&layer, Update::Ffa { pos: &pos, neg: &neg }, eta).unwrap();
        t2.add(tally_agreement(&rp, &out.records, 1e-4));
        t2.add(tally_agreement(&rn, &out.negative_records, 1e-4));
    }
    let samples = |a: &Agreement| a.compared + a.skipped_degenerate + a.skipped_small_margin;
    Verdict::new(
        samples(&t1) >= 1000 && samples(&t2) >= 1000 && t1.rate() >= 0.99 && t2.rate() >= 0.99,
        format!(
            "goodness {}/{} agree ({:.4}), ffa {}/{} agree ({:.4}), >= 0.99 (of {} and {} samples)",
            t1.agreed,
            t1.compared,
            t1.rate(),
            t2.agreed,
            t2.compared,
            t2.rate(),
            samples(&t1),
            samples(&t2)
        ),
    )
}

fn first_order_remainder() -> Verdict {
    let etas: Vec<f64> = (0..6).map(|k| 1e-2 / f64::powi(2.0, k)).collect();
    let (mut instances, mut lo, mut hi, mut worst_dl1) = (0, f64::INFINITY, 0.0f64, 0.0f64);
    for seed in 0..40u64 {
        let mut rng = SeededRng::new(500 + seed);
        let layer = LayerState::kaiming(64, 16, &mut rng).unwrap();
        let inputs = (0..8).map(|_| random_unit_vector(16, &mut rng)).collect();
        let batch = Batch::new(&layer, inputs).unwrap();
        let res = eta_scaling_residual(&layer, &batch, 0, &etas).unwrap();
        if res.iter().any(|r| r.sign_flips > 0) || batch.activation(0).is_silent() {
            continue;
        }
        instances += 1;
        for w in res.windows(2) {
            let shrink = w[0].dl2_residual / w[1].dl2_residual;
            lo = lo.min(shrink);
            hi = hi.max(shrink);
        }
        for r in &res {
            worst_dl1 = worst_dl1.max(r.dl1_relative_residual);
        }
    }
    Verdict::new(
        instances >= 10 && lo >= 3.0 && hi <= 5.0 && worst_dl1 <= 1e-12,
        format!(
            "{instances} flip-free instances; dl2 shrink per halving in [{lo:.4}, {hi:.4}] (within [3, 5]); max dl1 rel err {worst_dl1:.2e} (<= 1e-12)"
        ),
    )
}

fn assumptions(goodness_rows: &[MetricsRow], ffa_rows: &[MetricsRow], per_epoch: usize) -> Verdict {
    let cfg = config(Mode::TrainGoodness);
    let coords = (cfg.batch_size * cfg.neurons) as f64;
    let worst = |rows: &[MetricsRow], streams: f64| {
        rows.iter()
            .take(per_epoch)
            .map(|r| r.sign_flips as f64 / (streams * coords))
            .fold(0.0, f64::max)
    };
    let zeros = |rows: &[MetricsRow]| rows.iter().take(per_epoch).map(|r| r.preact_zero_count).sum::<usize>();
    let over = |rows: &[MetricsRow], streams: f64| {
        rows.iter()
            .take(per_epoch)
            .filter(|r| r.sign_flips as f64 / (streams * coords) >= 1e-3)
            .count()
    };
    let (fg, ff) = (worst(goodness_rows, 1.0), worst(ffa_rows, 2.0));
    let (og, of) = (over(goodness_rows, 1.0), over(ffa_rows, 2.0));
    let (zg, zf) = (zeros(goodness_rows), zeros(ffa_rows));
    Verdict::new(
        goodness_rows.len() >= per_epoch && ffa_rows.len() >= per_epoch && fg < 1e-3 && ff < 1e-3 && zg == 0 && zf == 0,
        format!(
            "first epoch max flip fraction: goodness {fg:.3e} ({og} updates >= 1e-3), ffa {ff:.3e} ({of} updates >= 1e-3), limit < 1e-3; exact zeros {zg} + {zf} (= 0)"
        ),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_ffsparse");
    let mut checked = Vec::new();
    for (mode, extra) in [
        ("theorem1-scan", &[][..]),
        ("batch-sweep", &["--batch-sizes", "8,32"][..]),
        ("train-goodness", &["--epochs", "1"][..]),
        ("train-ffa", &["--epochs", "1"][..]),
        ("audit", &[][..]),
    ] {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{mode}-{run}.csv"));
            let status = Command::new(bin)
                .arg(mode)
                .args(["--neurons", "24", "--seed", "5", "--mnist-dir"])
                .arg(mnist_dir())
                .arg("--out")
                .arg(&out)
                .args(extra)
                .env("RUST_LOG", "warn")
                .status()
                .unwrap();
            if !status.success() {
                return Verdict::fail(format!("{mode} exited with {status}"));
            }
            outputs.push(std::fs::read(&out).unwrap());
        }
        if outputs[0] != outputs[1] || outputs[0].is_empty() {
            return Verdict::fail(format!("{mode}: outputs differ"));
        }
        checked.push(format!("{mode} ({} bytes)", outputs[0].len()));
    }
    Verdict::new(true, format!("byte-identical reruns: {}", checked.join(", ")))
}

fn invariants() -> Verdict {
    let mut runner = TestRunner::new(Config::with_cases(256));
    let mut failures = Vec::new();
    let mut check = |name: &str, result: Result<(), String>| {
        if let Err(e) = result {
            failures.push(format!("{name}: {e}"));
        }
    };

    let vectors = prop::collection::vec(0.0f64..10.0, 2..64).prop_filter("nonzero", |v| v.iter().any(|x| *x > 0.0));
    check(
        "scale invariance",
        runner.run(&(vectors.clone(), 1e-3f64..1e3), |(v, c)| {
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let (a, b) = (hoyer_sparsity(&v).unwrap(), hoyer_sparsity(&scaled).unwrap());
            prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            Ok(())
        })
        .map_err(|e| e.to_string()),
    );
    check(
        "range",
        runner.run(&vectors, |v| {
            let s = hoyer_sparsity(&v).unwrap();
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&s), "{s}");
            Ok(())
        })
        .map_err(|e| e.to_string()),
    );
    check(
        "one-hot",
        runner.run(&(2usize..200, 0.01f64..100.0, any::<prop::sample::Index>()), |(n, c, at)| {
            let mut v = vec![0.0; n];
            v[at.index(n)] = c;
            prop_assert!((hoyer_sparsity(&v).unwrap() - 1.0).abs() <= 1e-12);
            Ok(())
        })
        .map_err(|e| e.to_string()),
    );
    check(
        "uniform",
        runner.run(&(2usize..200, 0.01f64..100.0), |(n, c)| {
            prop_assert!(hoyer_sparsity(&vec![c; n]).unwrap().abs() <= 1e-12);
            Ok(())
        })
        .map_err(|e| e.to_string()),
    );
    check(
        "single-sample margin",
        runner.run(&(any::<u64>(), 2usize..64, 1usize..32), |(seed, n, m)| {
            let mut rng = SeededRng::new(seed);
            let layer = LayerState::kaiming(n, m, &mut rng).unwrap();
            let batch = Batch::new(&layer, vec![random_unit_vector(m, &mut rng)]).unwrap();
            let r = theorem1_check(0, &batch);
            prop_assert!(r.degenerate || (r.margin.abs() <= 1e-12 && !r.satisfied), "{r:?}");
            Ok(())
        })
        .map_err(|e| e.to_string()),
    );
    check(
        "identical streams margin",
        runner.run(&(any::<u64>(), 2usize..64, 1usize..32, 1usize..8), |(seed, n, m, count)| {
            let mut rng = SeededRng::new(seed);
            let layer = LayerState::kaiming(n, m, &mut rng).unwrap();
            let inputs: Vec<Vec<f64>> = (0..count).map(|_| random_unit_vector(m, &mut rng)).collect();
            let pos = Batch::new(&layer, inputs.clone()).unwrap();
            let neg = Batch::new(&layer, inputs).unwrap();
            for i in 0..count {
                for target in [Target::positive(i), Target::negative(i)] {
                    let r = theorem2_check(target, &pos, &neg).unwrap();
                    prop_assert!(r.degenerate || (r.margin == 0.0 && !r.satisfied), "{r:?}");
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string()),
    );
    Verdict::new(
        failures.is_empty(),
        if failures.is_empty() {
            "6 properties x 256 cases hold".to_string()
        } else {
            failures.join("; ")
        },
    )
}

fn report(results: &mut Vec<bool>, id: usize, name: &str, verdict: Verdict) {
    println!(
        "[{}] {id:>2}. {name}: {}",
        if verdict.pass { "PASS" } else { "FAIL" },
        verdict.detail
    );
    results.push(verdict.pass);
}

fn main() -> ExitCode {
    let mut results = Vec::new();
    let set = MnistSet::load_train(mnist_dir());
    match &set {
        Ok(set) => {
            report(&mut results, 1, "whole-dataset goodness predicate", fig1a(set));
            report(&mut results, 2, "batch-size trend", fig1b(set));
            let per_epoch = set.count() / 128;
            let g = run_goodness_descent(&config(Mode::TrainGoodness), set);
            let f = run_ffa(&config(Mode::TrainFfa), set);
            let g_rows = g.as_ref().map(|r| r.rows.clone()).map_err(|e| e.to_string());
            let f_rows = f.as_ref().map(|r| r.rows.clone()).map_err(|e| e.to_string());
            report(
                &mut results,
                3,
                "goodness descent ratios",
                g_rows.as_deref().map(fig2).unwrap_or_else(|e| Verdict::fail(e.clone())),
            );
            report(
                &mut results,
                4,
                "forward-forward ratios",
                f_rows.as_deref().map(fig3).unwrap_or_else(|e| Verdict::fail(e.clone())),
            );
            report(&mut results, 5, "gradient check", gradients());
            report(&mut results, 6, "predicate vs oracle agreement", oracle_agreement(set));
            report(&mut results, 7, "first-order remainder", first_order_remainder());
            let audit = match (&g_rows, &f_rows) {
                (Ok(g), Ok(f)) => assumptions(g, f, per_epoch),
                (Err(e), _) | (_, Err(e)) => Verdict::fail(e.clone()),
            };
            report(&mut results, 8, "sign preservation and zero pre-activations", audit);
            report(&mut results, 9, "determinism", determinism());
        }
        Err(e) => {
            let msg = format!("MNIST unavailable: {e}");
            for (id, name) in [
                (1, "whole-dataset goodness predicate"),
                (2, "batch-size trend"),
                (3, "goodness descent ratios"),
                (4, "forward-forward ratios"),
            ] {
                report(&mut results, id, name, Verdict::fail(msg.clone()));
            }
            report(&mut results, 5, "gradient check", gradients());
            report(&mut results, 6, "predicate vs oracle agreement", Verdict::fail(msg.clone()));
            report(&mut results, 7, "first-order remainder", first_order_remainder());
            report(&mut results, 8, "sign preservation and zero pre-activations", Verdict::fail(msg.clone()));
            report(&mut results, 9, "determinism", Verdict::fail(msg));
        }
    }
    report(&mut results, 10, "invariant properties", invariants());
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
