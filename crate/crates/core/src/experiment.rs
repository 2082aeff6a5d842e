//! Configuration, the experiment runners, and their CSV output.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};

use crate::data::{inputs_of, make_batches, BatchMode, MnistSet};
use crate::error::{Error, Result};
use crate::model::{ffa_loss, goodness, Batch, LayerState};
use crate::numerics::{derive_seed, SeededRng};
use crate::oracle::{actual_update_outcome, SignAudit, SparsityDeltaRecord, Update};
use crate::theory::{theorem1_all, theorem2_all, TheoremReport};

const INIT_STREAM: u64 = 1;
const EPOCH_STREAM: u64 = 0x100;

/// Per-update sign-flip fraction above which a warning is logged: the step
/// is no longer small enough for the first-order analysis.
pub const FLIP_ALARM: f64 = 1e-2;

/// Which experiment to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Theorem1Scan,
    BatchSweep,
    TrainGoodness,
    TrainFfa,
    Audit,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Theorem1Scan,
        Mode::BatchSweep,
        Mode::TrainGoodness,
        Mode::TrainFfa,
        Mode::Audit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Theorem1Scan => "theorem1-scan",
            Mode::BatchSweep => "batch-sweep",
            Mode::TrainGoodness => "train-goodness",
            Mode::TrainFfa => "train-ffa",
            Mode::Audit => "audit",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown mode {s:?}")))
    }
}

/// Update rule exercised by the audit runner.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuditRule {
    Goodness,
    Ffa,
}

impl FromStr for AuditRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "goodness" => Ok(AuditRule::Goodness),
            "ffa" => Ok(AuditRule::Ffa),
            _ => Err(Error::config(format!("unknown audit rule {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub neurons: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub theta: f64,
    pub seed: u64,
    pub mnist_dir: PathBuf,
    pub out_path: PathBuf,
    /// Only read by the batch sweep.
    pub batch_sizes: Vec<usize>,
    /// Only read by the audit.
    pub audit_rule: AuditRule,
}

impl ExperimentConfig {
    /// Defaults for `mode`. Training runs use a 2000-neuron layer with
    /// batches of 128 and step 0.001; the two scans use 128 neurons.
    pub fn new(mode: Mode) -> Self {
        let (neurons, epochs) = match mode {
            Mode::Theorem1Scan | Mode::BatchSweep => (128, 1),
            Mode::TrainGoodness => (2000, 2),
            Mode::TrainFfa => (2000, 5),
            Mode::Audit => (2000, 1),
        };
        Self {
            mode,
            neurons,
            batch_size: 128,
            learning_rate: 1e-3,
            epochs,
            theta: 0.0,
            seed: 0,
            mnist_dir: PathBuf::from("data/mnist"),
            out_path: PathBuf::from(format!("{}.csv", mode.name())),
            batch_sizes: vec![8, 32, 128, 512],
            audit_rule: AuditRule::Goodness,
        }
    }

    /// Defaults, then `key=value` lines from `config_file`, then
    /// `overrides`, each layer replacing the one before.
    pub fn from_sources(
        mode: Mode,
        config_file: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let mut config = Self::new(mode);
        if let Some(path) = config_file {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            config.apply_text(&text)?;
        }
        for (key, value) in overrides {
            config.set(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Applies a `key=value` file body. Blank lines and `#` comments are
    /// skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key=value", lineno + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Sets one field by its command-line flag name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::config(format!("{key}: cannot parse {value:?}")))
        }
        match key.replace('_', "-").as_str() {
            "neurons" => self.neurons = parse(key, value)?,
            "batch-size" => self.batch_size = parse(key, value)?,
            "lr" | "learning-rate" => self.learning_rate = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "theta" => self.theta = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "mnist-dir" => self.mnist_dir = PathBuf::from(value),
            "out" => self.out_path = PathBuf::from(value),
            "batch-sizes" => self.batch_sizes = parse_list(value)?,
            "rule" => self.audit_rule = value.parse()?,
            other => return Err(Error::config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.neurons < 2 {
            return Err(Error::config("neurons must be >= 2"));
        }
        if self.batch_size < 1 {
            return Err(Error::config("batch size must be >= 1"));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::config("learning rate must be > 0"));
        }
        if self.epochs < 1 {
            return Err(Error::config("epochs must be >= 1"));
        }
        if !self.theta.is_finite() {
            return Err(Error::config("theta must be finite"));
        }
        if self.mode == Mode::BatchSweep && self.batch_sizes.is_empty() {
            return Err(Error::config("batch sweep needs at least one size"));
        }
        if self.batch_sizes.contains(&0) {
            return Err(Error::config("batch sizes must be >= 1"));
        }
        Ok(())
    }

    fn fresh_layer(&self) -> Result<LayerState> {
        let mut rng = SeededRng::new(derive_seed(self.seed, INIT_STREAM));
        LayerState::kaiming(self.neurons, crate::data::IMAGE_LEN, &mut rng)
    }

    fn epoch_seed(&self, epoch: usize) -> u64 {
        derive_seed(self.seed, EPOCH_STREAM + epoch as u64)
    }
}

fn parse_list(value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::config(format!("batch-sizes: cannot parse {s:?}")))
        })
        .collect()
}

fn check_weights(layer: &LayerState, iteration: usize) -> Result<()> {
    if layer.weights().is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "non-finite weights after iteration {iteration}"
        )))
    }
}

/// One CSV row of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    /// Goodness of the batch, or the forward-forward loss, before the step.
    pub goodness_or_loss: f64,
    pub ratio_sparser_pos: f64,
    pub ratio_theorem_pos: f64,
    /// `None` outside forward-forward training.
    pub ratio_sparser_neg: Option<f64>,
    pub ratio_theorem_neg: Option<f64>,
    pub degenerate_count: usize,
    pub preact_zero_count: usize,
    pub sign_flips: usize,
}

pub const METRICS_HEADER: [&str; 9] = [
    "iteration",
    "goodness_or_loss",
    "ratio_sparser_pos",
    "ratio_theorem_pos",
    "ratio_sparser_neg",
    "ratio_theorem_neg",
    "degenerate_count",
    "preact_zero_count",
    "sign_flips",
];

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

impl MetricsRow {
    fn record(&self) -> [String; 9] {
        [
            self.iteration.to_string(),
            fmt_f64(self.goodness_or_loss),
            fmt_f64(self.ratio_sparser_pos),
            fmt_f64(self.ratio_theorem_pos),
            self.ratio_sparser_neg.map(fmt_f64).unwrap_or_default(),
            self.ratio_theorem_neg.map(fmt_f64).unwrap_or_default(),
            self.degenerate_count.to_string(),
            self.preact_zero_count.to_string(),
            self.sign_flips.to_string(),
        ]
    }
}

/// Ratios over the non-degenerate samples of one stream.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StreamTally {
    pub sparser: usize,
    pub satisfied: usize,
    pub counted: usize,
    pub degenerate: usize,
}

impl StreamTally {
    pub fn new(reports: &[TheoremReport], records: &[SparsityDeltaRecord]) -> Self {
        let mut t = Self::default();
        for (r, rec) in reports.iter().zip(records) {
            if r.degenerate || rec.degenerate {
                t.degenerate += 1;
                continue;
            }
            t.counted += 1;
            t.sparser += usize::from(rec.actually_sparser);
            t.satisfied += usize::from(r.satisfied);
        }
        t
    }

    fn ratio(count: usize, of: usize) -> f64 {
        if of == 0 {
            f64::NAN
        } else {
            count as f64 / of as f64
        }
    }

    pub fn ratio_sparser(&self) -> f64 {
        Self::ratio(self.sparser, self.counted)
    }

    pub fn ratio_theorem(&self) -> f64 {
        Self::ratio(self.satisfied, self.counted)
    }
}

/// The layer after training together with every logged row.
#[derive(Clone, Debug)]
pub struct TrainingRun {
    pub layer: LayerState,
    pub rows: Vec<MetricsRow>,
}

/// Iterations per epoch for `config` on `set`.
pub fn iterations_per_epoch(config: &ExperimentConfig, set: &MnistSet) -> usize {
    set.count() / config.batch_size
}

/// Goodness descent on plain batches. Each iteration evaluates the
/// goodness predicate on every sample, steps, and re-measures.
pub fn run_goodness_descent(config: &ExperimentConfig, set: &MnistSet) -> Result<TrainingRun> {
    config.validate()?;
    let mut layer = config.fresh_layer()?;
    let mut rows = Vec::new();
    for epoch in 0..config.epochs {
        for samples in make_batches(set, config.batch_size, config.epoch_seed(epoch), BatchMode::Plain)? {
            let batch = Batch::new(&layer, inputs_of(samples?))?;
            let reports = theorem1_all(&batch)?;
            let outcome = actual_update_outcome(&layer, Update::Goodness(&batch), config.learning_rate)?;
            let tally = StreamTally::new(&reports, &outcome.records);
            let iteration = rows.len();
            rows.push(MetricsRow {
                iteration,
                goodness_or_loss: goodness(&batch, config.theta),
                ratio_sparser_pos: tally.ratio_sparser(),
                ratio_theorem_pos: tally.ratio_theorem(),
                ratio_sparser_neg: None,
                ratio_theorem_neg: None,
                degenerate_count: tally.degenerate,
                preact_zero_count: batch.preact_zero_count(),
                sign_flips: outcome.sign_audit.flips,
            });
            flag_flips(config.mode, iteration, &outcome.sign_audit);
            layer = outcome.updated;
            check_weights(&layer, iteration)?;
            log_progress(config, iteration, &rows[iteration]);
        }
    }
    Ok(TrainingRun { layer, rows })
}

/// Forward-forward training on paired positive and negative batches.
pub fn run_ffa(config: &ExperimentConfig, set: &MnistSet) -> Result<TrainingRun> {
    config.validate()?;
    let mut layer = config.fresh_layer()?;
    let mut rows = Vec::new();
    for epoch in 0..config.epochs {
        let seed = config.epoch_seed(epoch);
        let positives = make_batches(set, config.batch_size, seed, BatchMode::Positive)?;
        let negatives = make_batches(set, config.batch_size, seed, BatchMode::Negative)?;
        for (p, n) in positives.zip(negatives) {
            let pos = Batch::new(&layer, inputs_of(p?))?;
            let neg = Batch::new(&layer, inputs_of(n?))?;
            let (pos_reports, neg_reports) = theorem2_all(&pos, &neg)?;
            let outcome = actual_update_outcome(
                &layer,
                Update::Ffa { pos: &pos, neg: &neg },
                config.learning_rate,
            )?;
            let tp = StreamTally::new(&pos_reports, &outcome.records);
            let tn = StreamTally::new(&neg_reports, &outcome.negative_records);
            let iteration = rows.len();
            rows.push(MetricsRow {
                iteration,
                goodness_or_loss: ffa_loss(&pos, &neg, config.theta),
                ratio_sparser_pos: tp.ratio_sparser(),
                ratio_theorem_pos: tp.ratio_theorem(),
                ratio_sparser_neg: Some(tn.ratio_sparser()),
                ratio_theorem_neg: Some(tn.ratio_theorem()),
                degenerate_count: tp.degenerate + tn.degenerate,
                preact_zero_count: pos.preact_zero_count() + neg.preact_zero_count(),
                sign_flips: outcome.sign_audit.flips,
            });
            flag_flips(config.mode, iteration, &outcome.sign_audit);
            layer = outcome.updated;
            check_weights(&layer, iteration)?;
            log_progress(config, iteration, &rows[iteration]);
        }
    }
    Ok(TrainingRun { layer, rows })
}

fn flag_flips(mode: Mode, iteration: usize, audit: &SignAudit) {
    let frac = audit.flip_fraction();
    if frac > FLIP_ALARM {
        warn!("{mode} iteration {iteration}: {frac:.3e} of pre-activations changed sign (above {FLIP_ALARM})");
    }
}

fn log_progress(config: &ExperimentConfig, iteration: usize, row: &MetricsRow) {
    if iteration.is_multiple_of(50) {
        info!(
            "{} iteration {iteration}: loss {:.6} sparser {:.4} theorem {:.4}",
            config.mode, row.goodness_or_loss, row.ratio_sparser_pos, row.ratio_theorem_pos
        );
    }
}

/// One predicate verdict of the whole-dataset scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanRow {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub degenerate: bool,
}

pub const SCAN_HEADER: [&str; 5] = ["index", "lhs", "rhs", "satisfied", "degenerate"];

/// Result of [`run_theorem1_scan`], ordered by image index.
#[derive(Clone, Debug)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
}

impl ScanResult {
    /// Satisfied share of the non-degenerate rows.
    pub fn satisfied_fraction(&self) -> f64 {
        let counted = self.rows.iter().filter(|r| !r.degenerate).count();
        let satisfied = self.rows.iter().filter(|r| r.satisfied).count();
        satisfied as f64 / counted as f64
    }

    pub fn degenerate_count(&self) -> usize {
        self.rows.iter().filter(|r| r.degenerate).count()
    }
}

/// Evaluates the goodness predicate for every image under a fresh layer,
/// grouping images into shuffled batches of `batch_size`. The last batch
/// may be smaller so that every image is covered.
pub fn run_theorem1_scan(config: &ExperimentConfig, set: &MnistSet) -> Result<ScanResult> {
    config.validate()?;
    let layer = config.fresh_layer()?;
    let order = crate::data::epoch_order(set.count(), config.epoch_seed(0));
    let mut rows = Vec::with_capacity(set.count());
    let mut unused = SeededRng::new(0);
    for chunk in order.chunks(config.batch_size) {
        let inputs = chunk
            .iter()
            .map(|&i| Ok(crate::data::make_sample(set, i, BatchMode::Plain, &mut unused)?.x))
            .collect::<Result<Vec<_>>>()?;
        let batch = Batch::new(&layer, inputs)?;
        for (&index, r) in chunk.iter().zip(theorem1_all(&batch)?) {
            rows.push(ScanRow {
                index,
                lhs: r.lhs,
                rhs: r.rhs,
                satisfied: r.satisfied,
                degenerate: r.degenerate,
            });
        }
    }
    rows.sort_by_key(|r| r.index);
    let result = ScanResult { rows };
    info!("theorem1-scan: satisfied fraction {:.6}", result.satisfied_fraction());
    Ok(result)
}

/// Mean per-batch satisfied ratio for one batch size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub batch_size: usize,
    pub mean_ratio: f64,
    pub batches: usize,
}

pub const SWEEP_HEADER: [&str; 3] = ["batch_size", "mean_satisfied_ratio", "batches"];

/// For each distinct batch size, ascending, averages the satisfied ratio
/// over one epoch of full batches under a fresh layer.
pub fn run_batch_sweep(config: &ExperimentConfig, set: &MnistSet) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let sizes: BTreeSet<usize> = config.batch_sizes.iter().copied().collect();
    if sizes.len() < config.batch_sizes.len() {
        warn!("batch-sweep: duplicate batch sizes ignored");
    }
    let layer = config.fresh_layer()?;
    let mut out = Vec::new();
    for &size in &sizes {
        let mut sum = 0.0;
        let mut batches = 0;
        for samples in make_batches(set, size, config.epoch_seed(0), BatchMode::Plain)? {
            let batch = Batch::new(&layer, inputs_of(samples?))?;
            let reports = theorem1_all(&batch)?;
            let counted = reports.iter().filter(|r| !r.degenerate).count();
            if counted == 0 {
                continue;
            }
            sum += reports.iter().filter(|r| r.satisfied).count() as f64 / counted as f64;
            batches += 1;
        }
        let mean_ratio = if batches == 0 { f64::NAN } else { sum / batches as f64 };
        info!("batch-sweep: N={size} ratio {mean_ratio:.6} over {batches} batches");
        out.push(SweepRow {
            batch_size: size,
            mean_ratio,
            batches,
        });
    }
    Ok(out)
}

/// Pre-activation sign changes of one update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditRow {
    pub iteration: usize,
    pub sign: SignAudit,
    /// Exact zeros among the pre-update pre-activations.
    pub preact_zero_count: usize,
}

pub const AUDIT_HEADER: [&str; 6] = [
    "iteration",
    "sign_flips",
    "coordinates",
    "flip_fraction",
    "exact_zeros",
    "preact_zero_count",
];

/// Trains with the configured rule and records, for every update, how many
/// pre-activations of the batch that drove it changed sign.
pub fn run_audit(config: &ExperimentConfig, set: &MnistSet) -> Result<Vec<AuditRow>> {
    config.validate()?;
    let mut layer = config.fresh_layer()?;
    let mut rows = Vec::new();
    for epoch in 0..config.epochs {
        let seed = config.epoch_seed(epoch);
        let (first, second) = match config.audit_rule {
            AuditRule::Goodness => (BatchMode::Plain, None),
            AuditRule::Ffa => (BatchMode::Positive, Some(BatchMode::Negative)),
        };
        let primary = make_batches(set, config.batch_size, seed, first)?;
        let mut paired = second
            .map(|mode| make_batches(set, config.batch_size, seed, mode))
            .transpose()?;
        for samples in primary {
            let pos = Batch::new(&layer, inputs_of(samples?))?;
            let (outcome, zeros) = match paired.as_mut().and_then(Iterator::next) {
                Some(n) => {
                    let neg = Batch::new(&layer, inputs_of(n?))?;
                    let outcome = actual_update_outcome(
                        &layer,
                        Update::Ffa { pos: &pos, neg: &neg },
                        config.learning_rate,
                    )?;
                    (outcome, pos.preact_zero_count() + neg.preact_zero_count())
                }
                None => (
                    actual_update_outcome(&layer, Update::Goodness(&pos), config.learning_rate)?,
                    pos.preact_zero_count(),
                ),
            };
            let iteration = rows.len();
            rows.push(AuditRow {
                iteration,
                sign: outcome.sign_audit,
                preact_zero_count: zeros,
            });
            flag_flips(config.mode, iteration, &outcome.sign_audit);
            layer = outcome.updated;
            check_weights(&layer, iteration)?;
            if iteration.is_multiple_of(50) {
                info!(
                    "audit iteration {iteration}: flip fraction {:.3e}",
                    outcome.sign_audit.flip_fraction()
                );
            }
        }
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

fn write_table<W: Write, const K: usize>(
    out: W,
    path: &Path,
    header: [&str; K],
    rows: impl Iterator<Item = [String; K]>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_metrics<W: Write>(out: W, rows: &[MetricsRow]) -> Result<()> {
    write_table(out, Path::new("<metrics>"), METRICS_HEADER, rows.iter().map(MetricsRow::record))
}

pub fn write_scan<W: Write>(out: W, rows: &[ScanRow]) -> Result<()> {
    let rec = |r: &ScanRow| {
        [
            r.index.to_string(),
            fmt_f64(r.lhs),
            fmt_f64(r.rhs),
            r.satisfied.to_string(),
            r.degenerate.to_string(),
        ]
    };
    write_table(out, Path::new("<scan>"), SCAN_HEADER, rows.iter().map(rec))
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let rec = |r: &SweepRow| [r.batch_size.to_string(), fmt_f64(r.mean_ratio), r.batches.to_string()];
    write_table(out, Path::new("<sweep>"), SWEEP_HEADER, rows.iter().map(rec))
}

pub fn write_audit<W: Write>(out: W, rows: &[AuditRow]) -> Result<()> {
    let rec = |r: &AuditRow| {
        [
            r.iteration.to_string(),
            r.sign.flips.to_string(),
            r.sign.total.to_string(),
            fmt_f64(r.sign.flip_fraction()),
            r.sign.exact_zeros.to_string(),
            r.preact_zero_count.to_string(),
        ]
    };
    write_table(out, Path::new("<audit>"), AUDIT_HEADER, rows.iter().map(rec))
}

/// Runs `config.mode` against an already loaded training set and writes
/// its CSV to `out`.
pub fn run_with<W: Write>(config: &ExperimentConfig, set: &MnistSet, out: W) -> Result<()> {
    match config.mode {
        Mode::Theorem1Scan => write_scan(out, &run_theorem1_scan(config, set)?.rows),
        Mode::BatchSweep => write_sweep(out, &run_batch_sweep(config, set)?),
        Mode::TrainGoodness => write_metrics(out, &run_goodness_descent(config, set)?.rows),
        Mode::TrainFfa => write_metrics(out, &run_ffa(config, set)?.rows),
        Mode::Audit => write_audit(out, &run_audit(config, set)?),
    }
}

/// Loads the training set from `config.mnist_dir`, runs, and writes the CSV
/// to `config.out_path`.
pub fn run(config: &ExperimentConfig) -> Result<()> {
    config.validate()?;
    let set = MnistSet::load_train(&config.mnist_dir)?;
    info!("loaded {} training images from {}", set.count(), config.mnist_dir.display());
    let io = |source| Error::Io {
        path: config.out_path.clone(),
        source,
    };
    let mut buf = Vec::new();
    run_with(config, &set, &mut buf)?;
    let mut file = BufWriter::new(File::create(&config.out_path).map_err(io)?);
    file.write_all(&buf).map_err(io)?;
    file.flush().map_err(io)?;
    info!("wrote {}", config.out_path.display());
    Ok(())
}
