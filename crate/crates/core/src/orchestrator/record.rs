use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::eval::MetricTriple;
use crate::repair::RepairMethod;

/// Timing and memory of one unit of work. Excluded from log comparisons.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Resources {
    pub started_ms: u64,
    pub finished_ms: u64,
    pub wall_clock_s: f64,
    pub peak_memory_bytes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub seed: u64,
    pub before: MetricTriple,
    pub after: MetricTriple,
    pub fix_rate: f64,
    pub retention: f64,
    /// File name of the repaired model inside the output directory.
    pub model_file: String,
    pub resources: Resources,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub before: MetricTriple,
    pub after: MetricTriple,
    /// `after - before` of the means.
    pub delta: MetricTriple,
    pub fix_rate: f64,
    pub retention: f64,
}

fn mean_triple<'a>(items: impl Iterator<Item = &'a MetricTriple>) -> MetricTriple {
    let (mut acc, mut c, mut f, mut n) = (0.0, 0.0, 0.0, 0usize);
    for t in items {
        acc += t.acc;
        c += t.const_acc;
        f += t.conf_acc;
        n += 1;
    }
    let n = n.max(1) as f64;
    MetricTriple {
        acc: acc / n,
        const_acc: c / n,
        conf_acc: f / n,
    }
}

impl Aggregate {
    /// Arithmetic means over repetitions; `None` when there are none.
    pub fn of(reps: &[RepetitionResult]) -> Option<Aggregate> {
        if reps.is_empty() {
            return None;
        }
        let n = reps.len() as f64;
        let before = mean_triple(reps.iter().map(|r| &r.before));
        let after = mean_triple(reps.iter().map(|r| &r.after));
        Some(Aggregate {
            before,
            after,
            delta: MetricTriple {
                acc: after.acc - before.acc,
                const_acc: after.const_acc - before.const_acc,
                conf_acc: after.conf_acc - before.conf_acc,
            },
            fix_rate: reps.iter().map(|r| r.fix_rate).sum::<f64>() / n,
            retention: reps.iter().map(|r| r.retention).sum::<f64>() / n,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// One (model, method) pair across its repetitions, or one evaluation-only
/// run when `method` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub model: String,
    pub method: Option<RepairMethod>,
    pub status: RunStatus,
    pub error: Option<String>,
    /// Metrics of the model handed to repair.
    pub baseline: MetricTriple,
    pub repetitions: Vec<RepetitionResult>,
    pub aggregate: Option<Aggregate>,
    pub config: Value,
    pub resources: Resources,
}
