use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Alarm, AlarmFilter, CounterQuery, CounterSample, LogEntry, LogFilter, TelemetryError};
use crate::time::Window;

/// (node, object path, counter)
pub type SeriesKey = (String, String, String);

/// Read-only after generation. Series are kept per key in timestamp order;
/// alarms and logs in (time, id) order so exports and hashes are stable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TelemetryStore {
    pub(crate) series: BTreeMap<SeriesKey, Vec<CounterSample>>,
    pub(crate) alarms: Vec<Alarm>,
    pub(crate) logs: Vec<LogEntry>,
}

impl TelemetryStore {
    pub(crate) fn push_sample(&mut self, sample: CounterSample) {
        let key = (
            sample.node_id.clone(),
            sample.object_path.clone(),
            sample.counter.clone(),
        );
        self.series.entry(key).or_default().push(sample);
    }

    pub(crate) fn finish(&mut self) {
        for samples in self.series.values_mut() {
            samples.sort_by_key(|s| s.timestamp);
        }
        self.alarms
            .sort_by(|a, b| (a.raised_at, &a.alarm_id).cmp(&(b.raised_at, &b.alarm_id)));
        self.logs.sort_by(|a, b| {
            (a.timestamp, &a.node_id, &a.message).cmp(&(b.timestamp, &b.node_id, &b.message))
        });
    }

    pub fn series_keys(&self) -> impl Iterator<Item = &SeriesKey> {
        self.series.keys()
    }

    pub fn series(&self, node: &str, object_path: &str, counter: &str) -> Option<&[CounterSample]> {
        self.series
            .get(&(node.to_string(), object_path.to_string(), counter.to_string()))
            .map(Vec::as_slice)
    }

    pub fn counter_count(&self) -> usize {
        self.series.values().map(Vec::len).sum()
    }

    pub fn alarms(&self) -> &[Alarm] {
        &self.alarms
    }

    pub fn logs(&self) -> &[LogEntry] {
        &self.logs
    }

    /// All samples of `counter` on `node` whose object path starts with the
    /// prefix and whose timestamp lies in `window`, ascending by time.
    pub fn query_counters(
        &self,
        node_id: &str,
        object_path_prefix: &str,
        counter: &str,
        window: Window,
    ) -> Vec<CounterSample> {
        if !window.is_ordered() {
            return Vec::new();
        }
        let mut out: Vec<CounterSample> = self
            .series
            .iter()
            .filter(|((n, path, c), _)| {
                n == node_id && c == counter && path.starts_with(object_path_prefix)
            })
            .flat_map(|(_, samples)| samples.iter().filter(|s| window.contains(s.timestamp)))
            .cloned()
            .collect();
        out.sort_by(|a, b| (a.timestamp, &a.object_path).cmp(&(b.timestamp, &b.object_path)));
        out
    }

    pub fn run_counter_query(&self, q: &CounterQuery) -> Vec<CounterSample> {
        self.query_counters(&q.node_id, &q.object_path_prefix, &q.counter, q.window)
    }

    /// Alarms whose active interval overlaps the filter window.
    pub fn query_alarms(&self, filter: &AlarmFilter) -> Vec<Alarm> {
        if filter.window.is_some_and(|w| !w.is_ordered()) {
            return Vec::new();
        }
        self.alarms
            .iter()
            .filter(|a| filter.node.as_ref().is_none_or(|n| &a.managed_element == n))
            .filter(|a| filter.alarm_type.as_ref().is_none_or(|t| &a.alarm_type == t))
            .filter(|a| filter.severity.is_none_or(|s| a.severity == s))
            .filter(|a| filter.window.is_none_or(|w| a.active_window().overlaps(&w)))
            .cloned()
            .collect()
    }

    pub fn query_logs(&self, filter: &LogFilter) -> Vec<LogEntry> {
        if filter.window.is_some_and(|w| !w.is_ordered()) {
            return Vec::new();
        }
        self.logs
            .iter()
            .filter(|l| filter.node.as_ref().is_none_or(|n| &l.node_id == n))
            .filter(|l| {
                filter
                    .namespace
                    .as_ref()
                    .is_none_or(|ns| l.namespace.as_ref() == Some(ns))
            })
            .filter(|l| filter.contains.as_ref().is_none_or(|c| l.message.contains(c.as_str())))
            .filter(|l| filter.window.is_none_or(|w| w.contains(l.timestamp)))
            .cloned()
            .collect()
    }

    /// SHA-256 over the canonical JSON-lines rendering of every record.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        self.for_each_line(|kind, line| {
            hasher.update(kind.as_bytes());
            hasher.update(b"\t");
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
        });
        hex::encode(hasher.finalize())
    }

    fn for_each_line(&self, mut sink: impl FnMut(&str, &str)) {
        for samples in self.series.values() {
            for s in samples {
                sink("counter", &serde_json::to_string(s).unwrap());
            }
        }
        for a in &self.alarms {
            sink("alarm", &serde_json::to_string(a).unwrap());
        }
        for l in &self.logs {
            sink("log", &serde_json::to_string(l).unwrap());
        }
    }

    /// Writes `counters.jsonl`, `alarms.jsonl` and `logs.jsonl` into `dir`.
    pub fn export_jsonl(&self, dir: &Path) -> Result<(), TelemetryError> {
        std::fs::create_dir_all(dir)?;
        let mut counters = std::io::BufWriter::new(std::fs::File::create(dir.join("counters.jsonl"))?);
        let mut alarms = std::io::BufWriter::new(std::fs::File::create(dir.join("alarms.jsonl"))?);
        let mut logs = std::io::BufWriter::new(std::fs::File::create(dir.join("logs.jsonl"))?);
        let mut result = Ok(());
        self.for_each_line(|kind, line| {
            if result.is_err() {
                return;
            }
            let out = match kind {
                "counter" => &mut counters,
                "alarm" => &mut alarms,
                _ => &mut logs,
            };
            result = writeln!(out, "{line}");
        });
        result?;
        counters.flush()?;
        alarms.flush()?;
        logs.flush()?;
        Ok(())
    }
}
