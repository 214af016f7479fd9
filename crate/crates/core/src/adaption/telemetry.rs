use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AdaptError;

/// Floor on the measured RMS so near-zero signals do not divide by zero.
pub const RMS_FLOOR: f64 = 1e-9;

/// Time series of one signal; `samples` are `(timestamp in s, value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TelemetrySeries {
    pub signal_name: String,
    pub samples: Vec<(f64, f64)>,
}

impl TelemetrySeries {
    pub fn new(
        signal_name: impl Into<String>,
        samples: Vec<(f64, f64)>,
    ) -> Result<Self, AdaptError> {
        let series = TelemetrySeries {
            signal_name: signal_name.into(),
            samples,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn validate(&self) -> Result<(), AdaptError> {
        if self
            .samples
            .iter()
            .any(|(t, v)| !t.is_finite() || !v.is_finite())
        {
            return Err(AdaptError::Validation(format!(
                "series `{}` holds non-finite samples",
                self.signal_name
            )));
        }
        if self.samples.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(AdaptError::Validation(format!(
                "timestamps of `{}` must be strictly increasing",
                self.signal_name
            )));
        }
        Ok(())
    }

    pub fn last_timestamp(&self) -> Option<f64> {
        self.samples.last().map(|s| s.0)
    }

    /// Linear interpolation; `None` outside the sampled span.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let i = self.samples.partition_point(|s| s.0 < t);
        let (t1, v1) = *self.samples.get(i)?;
        if t1 == t {
            return Some(v1);
        }
        let (t0, v0) = *self.samples.get(i.checked_sub(1)?)?;
        Some(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
    }

    pub fn window(&self, start: f64, end: f64) -> impl Iterator<Item = &(f64, f64)> {
        self.samples
            .iter()
            .filter(move |(t, _)| start <= *t && *t <= end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeviationReport {
    pub per_signal: BTreeMap<String, f64>,
    pub aggregate: f64,
    pub window_seconds: f64,
}

impl DeviationReport {
    /// Signal with the largest deviation; ties go to the first name.
    pub fn worst_signal(&self) -> Option<(&str, f64)> {
        let mut worst: Option<(&str, f64)> = None;
        for (name, d) in &self.per_signal {
            if worst.is_none_or(|(_, w)| *d > w) {
                worst = Some((name, *d));
            }
        }
        worst
    }
}

fn by_name<'a>(
    series: &'a [TelemetrySeries],
    side: &str,
) -> Result<BTreeMap<String, &'a TelemetrySeries>, AdaptError> {
    let mut map = BTreeMap::new();
    for s in series {
        s.validate()?;
        if map.insert(s.signal_name.clone(), s).is_some() {
            return Err(AdaptError::SignalMismatch(format!(
                "{side} signal `{}` appears twice",
                s.signal_name
            )));
        }
    }
    Ok(map)
}

/// Normalized windowed RMS deviation per signal: the window ends at the
/// last simulated sample, measured values are interpolated onto the
/// simulated timestamps, and the aggregate is the maximum.
pub fn compute_deviation(
    simulated: &[TelemetrySeries],
    measured: &[TelemetrySeries],
    window: f64,
) -> Result<DeviationReport, AdaptError> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(AdaptError::Validation(format!(
            "window {window} must be > 0"
        )));
    }
    let sim = by_name(simulated, "simulated")?;
    let meas = by_name(measured, "measured")?;
    if !sim.keys().eq(meas.keys()) {
        let only_sim: Vec<&str> = sim
            .keys()
            .filter(|k| !meas.contains_key(*k))
            .map(String::as_str)
            .collect();
        let only_meas: Vec<&str> = meas
            .keys()
            .filter(|k| !sim.contains_key(*k))
            .map(String::as_str)
            .collect();
        return Err(AdaptError::SignalMismatch(format!(
            "simulated only: {only_sim:?}; measured only: {only_meas:?}"
        )));
    }
    if sim.is_empty() {
        return Err(AdaptError::SignalMismatch("no signals to compare".into()));
    }

    let mut per_signal = BTreeMap::new();
    for (name, s) in &sim {
        let m = meas[name];
        let end = s.last_timestamp().unwrap_or(0.0);
        let start = end - window;
        let empty = || {
            AdaptError::EmptyWindow(format!(
                "`{name}` has fewer than 2 samples in [{start}, {end}]"
            ))
        };
        if s.window(start, end).count() < 2 || m.window(start, end).count() < 2 {
            return Err(empty());
        }
        let pairs: Vec<(f64, f64)> = s
            .window(start, end)
            .filter_map(|(t, v)| m.value_at(*t).map(|mv| (*v, mv)))
            .collect();
        if pairs.len() < 2 {
            return Err(empty());
        }
        let n = pairs.len() as f64;
        let diff = (pairs.iter().map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n).sqrt();
        let scale = (pairs.iter().map(|(_, b)| b * b).sum::<f64>() / n).sqrt();
        per_signal.insert(name.clone(), diff / scale.max(RMS_FLOOR));
    }
    let aggregate = per_signal.values().copied().fold(0.0, f64::max);
    Ok(DeviationReport {
        per_signal,
        aggregate,
        window_seconds: window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(name: &str, value: f64) -> TelemetrySeries {
        TelemetrySeries::new(name, (0..10).map(|i| (i as f64, value)).collect()).unwrap()
    }

    #[test]
    fn identical_series_have_zero_deviation() {
        let s = vec![constant("a#x", 3.0), constant("b#y", -2.0)];
        let r = compute_deviation(&s, &s, 60.0).unwrap();
        assert_eq!(r.aggregate, 0.0);
        assert!(r.per_signal.values().all(|d| *d == 0.0));
    }

    #[test]
    fn ten_percent_offset_on_constant_signal() {
        let r = compute_deviation(&[constant("s", 11.0)], &[constant("s", 10.0)], 60.0).unwrap();
        assert!((r.per_signal["s"] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn disjoint_names_mismatch() {
        let err =
            compute_deviation(&[constant("a", 1.0)], &[constant("b", 1.0)], 60.0).unwrap_err();
        assert!(matches!(err, AdaptError::SignalMismatch(_)));
    }

    #[test]
    fn window_needs_two_samples() {
        let err = compute_deviation(&[constant("a", 1.0)], &[constant("a", 1.0)], 0.5).unwrap_err();
        assert!(matches!(err, AdaptError::EmptyWindow(_)));
    }

    #[test]
    fn interpolates_measured_onto_simulated_times() {
        let sim = TelemetrySeries::new("s", vec![(0.5, 1.5), (1.5, 2.5)]).unwrap();
        let meas = TelemetrySeries::new("s", vec![(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).unwrap();
        let r = compute_deviation(&[sim], &[meas], 10.0).unwrap();
        assert!(r.aggregate < 1e-15);
    }

    #[test]
    fn rejects_unsorted_timestamps() {
        assert!(TelemetrySeries::new("s", vec![(1.0, 0.0), (1.0, 0.0)]).is_err());
    }
}
