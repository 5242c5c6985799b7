//! Tip trajectory analysis: smoothing, extrema, overshoots and settling.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fewest samples accepted by [`settling_metrics`].
pub const MIN_SETTLING_SAMPLES: usize = 20;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("sample rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("series has {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("trajectory csv: {0}")]
    Csv(String),
}

/// Uniformly sampled scalar signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    /// Samples per second.
    pub sample_rate: f64,
    pub values: Vec<f64>,
    /// Time of the first sample (s).
    pub t0: f64,
}

impl TimeSeries {
    pub fn new(sample_rate: f64, values: Vec<f64>, t0: f64) -> Result<Self, MetricsError> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(MetricsError::InvalidRate(sample_rate));
        }
        if values.len() < 2 {
            return Err(MetricsError::TooShort {
                len: values.len(),
                min: 2,
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite { index });
        }
        Ok(Self {
            sample_rate,
            values,
            t0,
        })
    }

    /// Samples `f` at `n` points starting at `t0`.
    pub fn from_fn(sample_rate: f64, n: usize, t0: f64, f: impl Fn(f64) -> f64) -> Result<Self, MetricsError> {
        let values = (0..n).map(|i| f(t0 + i as f64 / sample_rate)).collect();
        Self::new(sample_rate, values, t0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        self.t0 + index as f64 / self.sample_rate
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Time between first and last sample.
    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 / self.sample_rate
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            sample_rate: self.sample_rate,
            values,
            t0: self.t0,
        }
    }

    /// Writes the `t,tip_y` trajectory format.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MetricsError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| MetricsError::Csv(e.to_string());
        w.write_record(["t", "tip_y"]).map_err(err)?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([format!("{}", self.time(i)), format!("{v}")])
                .map_err(err)?;
        }
        w.flush().map_err(|e| MetricsError::Csv(e.to_string()))
    }

    /// Reads the `t,tip_y` format. Time stamps must be uniform to within
    /// 1% of the mean spacing.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, MetricsError> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers().map_err(|e| MetricsError::Csv(e.to_string()))?.clone();
        if headers.len() < 2 || &headers[0] != "t" || &headers[1] != "tip_y" {
            return Err(MetricsError::Csv(format!(
                "expected header t,tip_y, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut t = Vec::new();
        let mut y = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| MetricsError::Csv(e.to_string()))?;
            let parse = |i: usize| -> Result<f64, MetricsError> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| MetricsError::Csv(format!("bad number on data row {}", line + 1)))
            };
            t.push(parse(0)?);
            y.push(parse(1)?);
        }
        if t.len() < 2 {
            return Err(MetricsError::TooShort { len: t.len(), min: 2 });
        }
        let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(MetricsError::Csv("time stamps must increase".into()));
        }
        for (i, pair) in t.windows(2).enumerate() {
            if ((pair[1] - pair[0]) - dt).abs() > 0.01 * dt {
                return Err(MetricsError::Csv(format!("non-uniform sampling at row {}", i + 2)));
            }
        }
        Self::new(1.0 / dt, y, t[0])
    }
}

/// Index into `0..n` with half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

/// Normalized Gaussian weights for offsets `-radius..=radius`, truncated at 4 sigma.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma + 0.5) as usize;
    let mut w: Vec<f64> = (-(radius as isize)..=radius as isize)
        .map(|x| (-0.5 * (x as f64 / sigma).powi(2)).exp())
        .collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    w
}

/// Gaussian convolution with reflected boundaries; `sigma` in samples.
pub fn gaussian_smooth(series: &TimeSeries, sigma: f64) -> Result<TimeSeries, MetricsError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(MetricsError::InvalidArgument(format!("sigma {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(series.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let n = series.len();
    let x = &series.values;
    let out = (0..n as isize)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * x[reflect(i + k as isize - radius, n)])
                .sum()
        })
        .collect();
    Ok(series.with_values(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub index: usize,
    pub time: f64,
    pub value: f64,
    pub kind: ExtremumKind,
}

/// Strict interior local maxima and minima, in time order.
///
/// Runs of equal samples count as one point located at their centre.
/// The result alternates between maxima and minima.
pub fn find_extrema(series: &TimeSeries) -> Vec<Extremum> {
    let x = &series.values;
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=x.len() {
        if i == x.len() || x[i] != x[start] {
            runs.push((start, i - 1));
            start = i;
        }
    }
    let mut out = Vec::new();
    for w in runs.windows(3) {
        let (prev, cur, next) = (x[w[0].0], x[w[1].0], x[w[2].0]);
        let kind = if cur > prev && cur > next {
            ExtremumKind::Max
        } else if cur < prev && cur < next {
            ExtremumKind::Min
        } else {
            continue;
        };
        let index = (w[1].0 + w[1].1) / 2;
        out.push(Extremum {
            index,
            time: series.time(index),
            value: cur,
            kind,
        });
    }
    out
}

/// Overshoot and settling summary of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettlingReport {
    /// Seconds from the first sample until the signal stays in band.
    pub settling_time: f64,
    pub overshoot_count: usize,
    pub final_value: f64,
    /// `(time, value)` of every extremum.
    pub extrema: Vec<(f64, f64)>,
}

impl SettlingReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Number of neighbouring extrema separated vertically by more than `threshold`.
pub fn count_overshoots(extrema: &[Extremum], threshold: f64) -> usize {
    extrema
        .windows(2)
        .filter(|w| (w[1].value - w[0].value).abs() > threshold)
        .count()
}

/// Mean of the trailing 5% of samples (at least one).
pub fn final_value(series: &TimeSeries) -> f64 {
    let n = series.len();
    let tail = ((n as f64 * 0.05).ceil() as usize).clamp(1, n);
    series.values[n - tail..].iter().sum::<f64>() / tail as f64
}

/// Overshoots and settling time of `series` as given (no smoothing).
pub fn settling_metrics(
    series: &TimeSeries,
    overshoot_threshold: f64,
    band: f64,
) -> Result<SettlingReport, MetricsError> {
    if series.len() < MIN_SETTLING_SAMPLES {
        return Err(MetricsError::TooShort {
            len: series.len(),
            min: MIN_SETTLING_SAMPLES,
        });
    }
    if !(overshoot_threshold > 0.0) {
        return Err(MetricsError::InvalidArgument(format!(
            "overshoot threshold {overshoot_threshold}"
        )));
    }
    if !(band > 0.0) {
        return Err(MetricsError::InvalidArgument(format!("band {band}")));
    }
    let final_value = final_value(series);
    let extrema = find_extrema(series);
    let settled_from = series
        .values
        .iter()
        .rposition(|v| (v - final_value).abs() > band)
        .map_or(0, |i| i + 1);
    let settling_time = if settled_from >= series.len() {
        series.duration()
    } else {
        settled_from as f64 / series.sample_rate
    };
    Ok(SettlingReport {
        settling_time,
        overshoot_count: count_overshoots(&extrema, overshoot_threshold),
        final_value,
        extrema: extrema.iter().map(|e| (e.time, e.value)).collect(),
    })
}

/// Smoothing width, overshoot threshold and settling band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettlingOptions {
    /// Gaussian sigma in samples.
    pub sigma: f64,
    /// Minimum vertical gap between neighbouring extrema (m).
    pub overshoot_threshold: f64,
    /// Half-width of the settling band (m).
    pub band: f64,
}

impl Default for SettlingOptions {
    fn default() -> Self {
        Self {
            sigma: 5.0,
            overshoot_threshold: 1e-3,
            band: 1e-3,
        }
    }
}

/// Smooths `series` then measures it.
pub fn analyze(series: &TimeSeries, opts: &SettlingOptions) -> Result<SettlingReport, MetricsError> {
    let smooth = gaussian_smooth(series, opts.sigma)?;
    settling_metrics(&smooth, opts.overshoot_threshold, opts.band)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_signal_is_preserved_and_settled() {
        let s = TimeSeries::new(1000.0, vec![0.25; 200], 0.0).unwrap();
        let sm = gaussian_smooth(&s, 3.0).unwrap();
        assert!(sm.values.iter().all(|v| (v - 0.25).abs() < 1e-15));
        let r = settling_metrics(&s, 1e-3, 1e-3).unwrap();
        assert_eq!(r.settling_time, 0.0);
        assert_eq!(r.overshoot_count, 0);
        assert!(r.extrema.is_empty());
    }

    #[test]
    fn zero_sigma_is_identity() {
        let s = TimeSeries::from_fn(100.0, 50, 0.0, |t| t.sin()).unwrap();
        assert_eq!(gaussian_smooth(&s, 0.0).unwrap(), s);
    }

    #[test]
    fn impulse_response_is_the_kernel() {
        let mut v = vec![0.0; 101];
        v[50] = 1.0;
        let s = TimeSeries::new(1.0, v, 0.0).unwrap();
        let out = gaussian_smooth(&s, 2.0).unwrap();
        // Direct evaluation, radius int(4*2 + 0.5) = 8.
        let norm: f64 = (-8..=8).map(|x: i32| (-(x * x) as f64 / 8.0).exp()).sum();
        for (i, v) in out.values.iter().enumerate() {
            let d = i as i32 - 50;
            let want = if d.abs() <= 8 {
                (-(d * d) as f64 / 8.0).exp() / norm
            } else {
                0.0
            };
            assert!((v - want).abs() < 1e-12, "sample {i}");
        }
    }

    #[test]
    fn reflect_padding_matches_edge_mirroring() {
        assert_eq!(reflect(-1, 4), 0);
        assert_eq!(reflect(-2, 4), 1);
        assert_eq!(reflect(4, 4), 3);
        assert_eq!(reflect(5, 4), 2);
        assert_eq!(reflect(9, 4), 1);
    }

    #[test]
    fn ramp_has_no_extrema() {
        let s = TimeSeries::from_fn(10.0, 30, 0.0, |t| 2.0 * t).unwrap();
        assert!(find_extrema(&s).is_empty());
    }

    #[test]
    fn sinusoid_extrema_are_at_analytic_times() {
        let s = TimeSeries::from_fn(1000.0, 3001, 0.0, |t| (2.0 * PI * t).sin()).unwrap();
        let ex = find_extrema(&s);
        let maxima: Vec<_> = ex.iter().filter(|e| e.kind == ExtremumKind::Max).collect();
        let minima: Vec<_> = ex.iter().filter(|e| e.kind == ExtremumKind::Min).collect();
        assert_eq!((maxima.len(), minima.len()), (3, 3));
        for (k, e) in maxima.iter().enumerate() {
            assert!((e.time - (0.25 + k as f64)).abs() <= 1e-3 + 1e-12);
        }
        for (k, e) in minima.iter().enumerate() {
            assert!((e.time - (0.75 + k as f64)).abs() <= 1e-3 + 1e-12);
        }
    }

    #[test]
    fn plateau_reports_centre_and_kinds_alternate() {
        let s = TimeSeries::new(1.0, vec![0.0, 1.0, 2.0, 2.0, 2.0, 1.0, 3.0, 3.0, 0.0], 0.0).unwrap();
        let ex = find_extrema(&s);
        assert_eq!(ex.len(), 3);
        assert_eq!((ex[0].index, ex[0].kind), (3, ExtremumKind::Max));
        assert_eq!((ex[1].index, ex[1].kind), (5, ExtremumKind::Min));
        assert_eq!((ex[2].index, ex[2].kind), (6, ExtremumKind::Max));
    }

    #[test]
    fn short_series_is_rejected() {
        let s = TimeSeries::new(1.0, vec![0.0; 10], 0.0).unwrap();
        assert!(matches!(
            settling_metrics(&s, 1e-3, 1e-3),
            Err(MetricsError::TooShort { len: 10, .. })
        ));
    }

    #[test]
    fn never_settling_reports_full_duration() {
        let s = TimeSeries::from_fn(100.0, 100, 0.0, |t| if (t * 100.0).round() as i64 % 2 == 0 { 0.0 } else { 1.0 }).unwrap();
        let r = settling_metrics(&s, 1e-3, 1e-3).unwrap();
        assert!((r.settling_time - s.duration()).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let s = TimeSeries::from_fn(1000.0, 40, 0.5, |t| t * t).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"t,tip_y\n"));
        let back = TimeSeries::read_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), 40);
        assert!((back.sample_rate - 1000.0).abs() < 1e-6);
        assert!((back.t0 - 0.5).abs() < 1e-12);
        assert_eq!(back.values, s.values);
    }

    #[test]
    fn rejects_bad_series() {
        assert!(TimeSeries::new(0.0, vec![0.0; 3], 0.0).is_err());
        assert!(TimeSeries::new(1.0, vec![0.0], 0.0).is_err());
        assert!(TimeSeries::new(1.0, vec![0.0, f64::NAN], 0.0).is_err());
    }
}
