use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::RcaError;
use crate::telemetry::catalog::{counter_def, CounterKind};
use crate::telemetry::CounterSample;
use crate::time::{Timestamp, Window};

/// Scale factor turning a median absolute deviation into a standard
/// deviation estimate for normal data.
pub const MAD_SCALE: f64 = 1.4826;
pub const EPSILON: f64 = 1e-9;
pub const DEFAULT_THRESHOLD: f64 = 3.0;
pub const MIN_BASELINE: usize = 3;
/// Exceeding samples needed before a persistent deviation counts as a level
/// shift.
pub const LEVEL_SHIFT_RUN: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeriesRef {
    pub node: String,
    pub object: String,
    pub counter: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub key: SeriesRef,
    /// `(timestamp, value)` in ascending time order.
    pub points: Vec<(Timestamp, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Spike,
    Drop,
    LevelShift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationFinding {
    pub series_ref: SeriesRef,
    pub window: Window,
    /// Peak robust z-score.
    pub score: f64,
    pub direction: Direction,
    /// Signed value minus baseline median at the peak.
    pub peak_delta: f64,
    pub baseline_median: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn mad(values: &[f64]) -> f64 {
    let m = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    median(&dev)
}

/// Robust z-score of every point after the baseline window.
pub fn robust_scores(series: &Series, baseline: Window) -> Result<(f64, Vec<(Timestamp, f64, f64)>), RcaError> {
    let base: Vec<f64> = series
        .points
        .iter()
        .filter(|(t, _)| baseline.contains(*t))
        .map(|(_, v)| *v)
        .collect();
    if base.len() < MIN_BASELINE {
        return Err(RcaError::InsufficientBaseline {
            series: format!("{}/{}/{}", series.key.node, series.key.object, series.key.counter),
            samples: base.len(),
        });
    }
    let med = median(&base);
    let scale = mad(&base) * MAD_SCALE + EPSILON;
    let scored = series
        .points
        .iter()
        .filter(|(t, _)| *t > baseline.end)
        .map(|(t, v)| (*t, (v - med).abs() / scale, v - med))
        .collect();
    Ok((med, scored))
}

/// Flags every series whose peak robust z-score after the baseline window
/// reaches `threshold`.
///
/// A deviation is a level shift when every evaluated point exceeds the
/// threshold with the same sign and there are at least [`LEVEL_SHIFT_RUN`] of
/// them: the series had already moved when evaluation began. Otherwise it is
/// a spike or a drop by the sign at the peak.
pub fn detect_deviations(
    series: &[Series],
    baseline: Window,
    threshold: f64,
) -> Result<Vec<DeviationFinding>, RcaError> {
    let mut out = Vec::new();
    for s in series {
        let (med, scored) = robust_scores(s, baseline)?;
        let exceeding: Vec<&(Timestamp, f64, f64)> =
            scored.iter().filter(|(_, z, _)| *z >= threshold).collect();
        let Some(first) = exceeding.first() else {
            continue;
        };
        let last = exceeding.last().expect("non-empty");
        let peak = exceeding
            .iter()
            .copied()
            .fold(*first, |best, p| if p.1 > best.1 { p } else { best });
        let all_same_sign = exceeding.iter().all(|p| p.2.signum() == peak.2.signum());
        let direction = if exceeding.len() == scored.len()
            && exceeding.len() >= LEVEL_SHIFT_RUN
            && all_same_sign
        {
            Direction::LevelShift
        } else if peak.2 > 0.0 {
            Direction::Spike
        } else {
            Direction::Drop
        };
        out.push(DeviationFinding {
            series_ref: s.key.clone(),
            window: Window::new(first.0, last.0),
            score: peak.1,
            direction,
            peak_delta: peak.2,
            baseline_median: med,
        });
    }
    Ok(out)
}

/// Groups samples into series. Cumulative counters become per-period
/// increments, which drops the first sample of each series.
pub fn series_from_samples<'a>(samples: impl IntoIterator<Item = &'a CounterSample>) -> Vec<Series> {
    let mut grouped: BTreeMap<SeriesRef, BTreeMap<Timestamp, f64>> = BTreeMap::new();
    for s in samples {
        grouped
            .entry(SeriesRef {
                node: s.node_id.clone(),
                object: s.object_path.clone(),
                counter: s.counter.clone(),
            })
            .or_default()
            .insert(s.timestamp, s.value);
    }
    grouped
        .into_iter()
        .map(|(key, points)| {
            let cumulative =
                counter_def(&key.counter).is_some_and(|d| d.kind == CounterKind::Cumulative);
            let points: Vec<(Timestamp, f64)> = points.into_iter().collect();
            let points = if cumulative {
                points.windows(2).map(|w| (w[1].0, w[1].1 - w[0].1)).collect()
            } else {
                points
            };
            Series { key, points }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64]) -> Series {
        Series {
            key: SeriesRef {
                node: "n".into(),
                object: "o".into(),
                counter: "c".into(),
            },
            points: values.iter().enumerate().map(|(i, v)| (i as i64, *v)).collect(),
        }
    }

    #[test]
    fn median_and_mad() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(mad(&[1.0, 1.0, 2.0, 2.0, 4.0, 6.0, 9.0]), 1.0);
    }

    #[test]
    fn constant_series_is_quiet() {
        let found =
            detect_deviations(&[series(&[5.0; 20])], Window::new(0, 9), DEFAULT_THRESHOLD).unwrap();
        assert!(found.is_empty());
    }

    #[test]
    fn directions() {
        let base = [10.0, 11.0, 9.0, 10.0, 10.5, 9.5];
        let mut spike = base.to_vec();
        spike.extend([10.0, 30.0, 10.0]);
        let mut drop = base.to_vec();
        drop.extend([10.0, 2.0, 2.0, 2.0]);
        let mut shift = base.to_vec();
        shift.extend([20.0, 20.0, 20.0]);
        let w = Window::new(0, 5);
        let d = |v: &[f64]| detect_deviations(&[series(v)], w, 3.0).unwrap()[0].clone();
        assert_eq!(d(&spike).direction, Direction::Spike);
        assert_eq!(d(&spike).window, Window::new(7, 7));
        assert_eq!(d(&drop).direction, Direction::Drop);
        assert_eq!(d(&drop).window, Window::new(7, 9));
        assert_eq!(d(&shift).direction, Direction::LevelShift);
    }

    #[test]
    fn short_baseline_rejected() {
        let err = detect_deviations(&[series(&[1.0, 2.0, 3.0])], Window::new(0, 1), 3.0);
        assert!(matches!(err, Err(RcaError::InsufficientBaseline { samples: 2, .. })));
    }

    #[test]
    fn cumulative_counters_become_increments() {
        let mk = |ts, v| CounterSample {
            node_id: "rru-1".into(),
            object_path: "p".into(),
            counter: "pmPowerFailure".into(),
            timestamp: ts,
            value: v,
        };
        let samples = [mk(0, 0.0), mk(900, 0.0), mk(1800, 3.0), mk(2700, 6.0)];
        let s = series_from_samples(&samples);
        assert_eq!(s[0].points, vec![(900, 0.0), (1800, 3.0), (2700, 3.0)]);
    }
}
