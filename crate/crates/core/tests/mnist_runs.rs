use std::path::PathBuf;

use ff_sparsity::data::{make_batches, BatchMode, MnistSet, IMAGE_LEN};
use ff_sparsity::experiment::{
    iterations_per_epoch, run_audit, run_batch_sweep, run_ffa, run_goodness_descent, run_theorem1_scan, run_with,
    ExperimentConfig, Mode,
};
use ff_sparsity::model::{goodness, Batch, LayerState};
use ff_sparsity::oracle::{actual_update_outcome, Update};
use ff_sparsity::numerics::SeededRng;

fn train_set() -> MnistSet {
    let dir = std::env::var_os("MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/mnist")));
    MnistSet::load_train(&dir).unwrap_or_else(|e| panic!("MNIST training set required: {e}"))
}

fn small(mode: Mode, neurons: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(mode);
    c.neurons = neurons;
    c.epochs = 1;
    c
}

#[test]
fn training_set_is_the_standard_one() {
    let set = train_set();
    assert_eq!(set.count(), 60000);
    assert_eq!(set.image(0).len(), IMAGE_LEN);
    assert_eq!(set.class_histogram(), [5923, 6742, 5958, 6131, 5842, 5421, 5918, 6265, 5851, 5949]);
    assert_eq!(&set.labels()[..10], &[5, 0, 4, 1, 9, 2, 1, 3, 1, 4]);
}

#[test]
fn epoch_arithmetic() {
    let set = train_set();
    let c = ExperimentConfig::new(Mode::TrainGoodness);
    assert_eq!(iterations_per_epoch(&c, &set), 468);
    assert_eq!(c.epochs * iterations_per_epoch(&c, &set), 936);
    assert_eq!(ExperimentConfig::new(Mode::TrainFfa).epochs * iterations_per_epoch(&c, &set), 2340);
    assert_eq!(make_batches(&set, 128, 0, BatchMode::Plain).unwrap().count(), 468);
}

#[test]
fn scan_covers_every_image_in_order() {
    let set = train_set();
    let scan = run_theorem1_scan(&small(Mode::Theorem1Scan, 16), &set).unwrap();
    assert_eq!(scan.rows.len(), 60000);
    assert!(scan.rows.iter().enumerate().all(|(i, r)| r.index == i));
    assert!(scan.rows.iter().all(|r| !r.satisfied || !r.degenerate));
}

#[test]
fn sweep_single_sample_batches_never_satisfy() {
    let set = train_set();
    let mut c = small(Mode::BatchSweep, 16);
    c.batch_sizes = vec![1, 8, 1];
    let rows = run_batch_sweep(&c, &set).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].batch_size, 1);
    assert_eq!(rows[0].mean_ratio, 0.0);
    assert_eq!(rows[1].batches, 7500);
}

#[test]
fn metrics_rows_are_well_formed() {
    let set = train_set();
    let c = small(Mode::TrainFfa, 32);
    let run = run_ffa(&c, &set).unwrap();
    assert_eq!(run.rows.len(), 468);
    for (i, r) in run.rows.iter().enumerate() {
        assert_eq!(r.iteration, i);
        for v in [
            r.ratio_sparser_pos,
            r.ratio_theorem_pos,
            r.ratio_sparser_neg.unwrap(),
            r.ratio_theorem_neg.unwrap(),
        ] {
            assert!((0.0..=1.0).contains(&v) || (v.is_nan() && r.degenerate_count > 0));
        }
        assert!(r.degenerate_count <= 2 * c.batch_size);
    }
    let g = run_goodness_descent(&small(Mode::TrainGoodness, 32), &set).unwrap();
    assert!(g.rows.iter().all(|r| r.ratio_sparser_neg.is_none() && r.ratio_theorem_neg.is_none()));
}

#[test]
fn each_step_lowers_the_goodness_of_its_batch() {
    let set = train_set();
    let mut rng = SeededRng::new(0);
    let mut layer = LayerState::kaiming(2000, IMAGE_LEN, &mut rng).unwrap();
    for samples in make_batches(&set, 128, 0, BatchMode::Plain).unwrap().take(50) {
        let inputs: Vec<Vec<f64>> = samples.unwrap().into_iter().map(|s| s.x).collect();
        let batch = Batch::new(&layer, inputs.clone()).unwrap();
        let out = actual_update_outcome(&layer, Update::Goodness(&batch), 1e-3).unwrap();
        let after = Batch::new(&out.updated, inputs).unwrap();
        assert!(goodness(&after, 0.0) < goodness(&batch, 0.0));
        layer = out.updated;
    }
}

#[test]
fn audit_counts_every_coordinate() {
    let set = train_set();
    let rows = run_audit(&small(Mode::Audit, 24), &set).unwrap();
    assert_eq!(rows.len(), 468);
    assert!(rows.iter().all(|r| r.sign.total == 128 * 24 && r.sign.flips + r.sign.exact_zeros <= r.sign.total));
    let mut c = small(Mode::Audit, 24);
    c.audit_rule = "ffa".parse().unwrap();
    let rows = run_audit(&c, &set).unwrap();
    assert!(rows.iter().all(|r| r.sign.total == 2 * 128 * 24));
}

#[test]
fn seeds_change_outputs() {
    let set = train_set();
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut c = small(Mode::TrainGoodness, 16);
    run_with(&c, &set, &mut a).unwrap();
    c.seed = 1;
    run_with(&c, &set, &mut b).unwrap();
    assert_ne!(a, b);
}
