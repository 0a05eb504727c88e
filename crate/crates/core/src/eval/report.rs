use serde::{Deserialize, Serialize};

use super::metrics::MetricTriple;
use crate::data::BlurKind;

pub const CONFUSION_AGGREGATION: &str = "macro-precision-excluding-unpredicted-classes";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionMetrics {
    pub kind: BlurKind,
    pub severity: u8,
    #[serde(flatten)]
    pub metrics: MetricTriple,
}

impl CorruptionMetrics {
    pub fn tag(&self) -> String {
        format!("{}{}", self.kind, self.severity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub constraint_accuracy: f64,
    pub confusion_accuracy: f64,
    pub per_class_precision: Vec<Option<f64>>,
    /// One entry per requested `(kind, severity)`, in request order.
    pub corruptions: Vec<CorruptionMetrics>,
    pub sample_count: usize,
    pub model_id: String,
    pub config_hash: String,
    pub confusion_aggregation: String,
}

impl MetricsReport {
    pub fn clean(&self) -> MetricTriple {
        MetricTriple {
            acc: self.accuracy,
            const_acc: self.constraint_accuracy,
            conf_acc: self.confusion_accuracy,
        }
    }

    pub fn corruption(&self, kind: BlurKind, severity: u8) -> Option<&MetricTriple> {
        self.corruptions
            .iter()
            .find(|c| c.kind == kind && c.severity == severity)
            .map(|c| &c.metrics)
    }

    /// Flat `(name, value)` list: `acc, const_acc, conf_acc`, then
    /// `acc@<kind><severity>` etc. for every corruption entry.
    pub fn fields(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("acc".to_string(), self.accuracy),
            ("const_acc".to_string(), self.constraint_accuracy),
            ("conf_acc".to_string(), self.confusion_accuracy),
        ];
        for c in &self.corruptions {
            let tag = c.tag();
            out.push((format!("acc@{tag}"), c.metrics.acc));
            out.push((format!("const_acc@{tag}"), c.metrics.const_acc));
            out.push((format!("conf_acc@{tag}"), c.metrics.conf_acc));
        }
        out
    }

    /// Flat JSON record keyed by [`fields`](Self::fields) plus identity.
    pub fn to_record(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (k, v) in self.fields() {
            map.insert(k, v.into());
        }
        map.insert("samples".into(), self.sample_count.into());
        map.insert("model_id".into(), self.model_id.clone().into());
        map.insert("config_hash".into(), self.config_hash.clone().into());
        serde_json::Value::Object(map)
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut h: Vec<String> = self.fields().into_iter().map(|(k, _)| k).collect();
        h.extend(["samples", "model_id", "config_hash"].map(String::from));
        h
    }

    pub fn csv_row(&self) -> Vec<String> {
        let mut r: Vec<String> = self.fields().into_iter().map(|(_, v)| format!("{v:.6}")).collect();
        r.push(self.sample_count.to_string());
        r.push(self.model_id.clone());
        r.push(self.config_hash.clone());
        r
    }
}

/// A fraction as a percentage with two decimals, e.g. `0.9205` -> `92.05%`.
pub fn format_percent(fraction: f64) -> String {
    format!("{:.2}%", fraction * 100.0)
}

/// A signed percentage-point delta, e.g. `+0.50%` or `-9.46%`. Values that
/// round to zero print as `+0.00%`.
pub fn format_delta(delta: f64) -> String {
    let pct = delta * 100.0;
    let text = format!("{:.2}", pct.abs());
    if pct < 0.0 && text != "0.00" {
        format!("-{text}%")
    } else {
        format!("+{text}%")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_style_cells() {
        assert_eq!(format_percent(0.9205), "92.05%");
        assert_eq!(format_percent(1.0), "100.00%");
        assert_eq!(format_delta(0.9255 - 0.9205), "+0.50%");
        assert_eq!(format_delta(0.8105 - 0.9051), "-9.46%");
        assert_eq!(format_delta(-0.000001), "+0.00%");
        assert_eq!(format_delta(0.0), "+0.00%");
    }
}
