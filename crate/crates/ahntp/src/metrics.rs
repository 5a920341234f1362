//! `metrics.json`, schema version 1.
//!
//! ```text
//! schema_version     1
//! command            "train" | "evaluate"
//! ablation, seed     the run's switch and seed
//! config             effective training configuration (ablation applied,
//!                    so e.g. loss.lambda1 is 0 under nocon)
//! dataset            user / item / edge / rating counts and load warnings
//! split              sizes of the four pair sets
//! epochs             number of epochs trained (0 for evaluate)
//! loss_trajectory    mean training loss of every epoch
//! accuracy_trajectory  held-out accuracy after every epoch
//! accuracy, f1       final held-out scores
//! test               final confusion counts, precision and recall
//! best_epoch, best_accuracy  epoch with the highest held-out accuracy
//! timing             optional: seconds per epoch and total
//! ```
//!
//! Every float is written with 17 significant digits in exponent form
//! (`6.9314718055994529e-1`), non-finite values as `null`, so reports of
//! identical runs are byte-identical. Pass `--no-timing` to leave `timing`
//! out.

use std::io;

use ahntp_core::data::{LoadReport, SplitPlan, TrustDataset};
use ahntp_core::train::{Ablation, EpochRecord, Metrics, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_users: usize,
    pub n_items: usize,
    pub n_trust_edges: usize,
    pub n_ratings: usize,
    pub self_edges_skipped: usize,
    pub duplicate_edges: usize,
}

impl DatasetSummary {
    pub fn new(ds: &TrustDataset, report: &LoadReport) -> Self {
        Self {
            n_users: ds.n_users(),
            n_items: ds.n_items(),
            n_trust_edges: ds.trust_edges().len(),
            n_ratings: ds.ratings().len(),
            self_edges_skipped: report.self_edges_skipped,
            duplicate_edges: report.duplicate_edges,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub train_positives: usize,
    pub train_negatives: usize,
    pub test_positives: usize,
    pub test_negatives: usize,
}

impl From<&SplitPlan> for SplitSummary {
    fn from(s: &SplitPlan) -> Self {
        Self {
            train_positives: s.train_pos.len(),
            train_negatives: s.train_neg.len(),
            test_positives: s.test_pos.len(),
            test_negatives: s.test_neg.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub seconds_per_epoch: Vec<f64>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub command: String,
    pub ablation: Ablation,
    pub seed: u64,
    pub config: TrainConfig,
    pub dataset: DatasetSummary,
    pub split: SplitSummary,
    pub epochs: usize,
    pub loss_trajectory: Vec<f64>,
    pub accuracy_trajectory: Vec<f64>,
    pub accuracy: f64,
    pub f1: f64,
    pub test: Metrics,
    pub best_epoch: Option<usize>,
    pub best_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<Timing>,
}

impl MetricsReport {
    pub fn new(
        command: &str,
        config: &TrainConfig,
        dataset: DatasetSummary,
        split: SplitSummary,
        records: &[EpochRecord],
        test: Metrics,
    ) -> Self {
        // first epoch wins ties
        let best = records.iter().fold(None::<&EpochRecord>, |best, r| match best {
            Some(b) if b.test.accuracy >= r.test.accuracy => Some(b),
            _ => Some(r),
        });
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_owned(),
            ablation: config.ablation,
            seed: config.seed,
            config: config.effective(),
            dataset,
            split,
            epochs: records.len(),
            loss_trajectory: records.iter().map(|r| r.loss).collect(),
            accuracy_trajectory: records.iter().map(|r| r.test.accuracy).collect(),
            accuracy: test.accuracy,
            f1: test.f1,
            test,
            best_epoch: best.map(|r| r.epoch),
            best_accuracy: best.map(|r| r.test.accuracy),
            timing: None,
        }
    }

    pub fn to_json(&self) -> String {
        to_stable_json(self)
    }
}

/// Pretty JSON with every `f64` written as `{:.16e}`.
pub fn to_stable_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, StableFloats(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("report serializes");
    out.push(b'\n');
    String::from_utf8(out).expect("JSON is UTF-8")
}

struct StableFloats<'a>(PrettyFormatter<'a>);

impl Formatter for StableFloats<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn end_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}
