//! Fixed 10-dimensional feature vector for a CSI trace, plus z-score
//! standardization.
//!
//! The features are classical time- and frequency-domain statistics:
//! mean, standard deviation, range, RMS, skewness, excess kurtosis, median
//! absolute deviation, zero-crossing count of the mean-removed signal,
//! dominant DFT frequency (zero bin excluded) and spectral entropy of the
//! normalized DFT magnitude. The DFT length equals the trace length (no
//! padding) and only bins `1..=n/2` are considered.
//!
//! Conventions for degenerate traces (standard deviation numerically zero):
//! skewness, excess kurtosis and spectral entropy are 0, and the dominant
//! frequency is the first non-zero bin. These keep every output finite.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::batch;
use crate::csi::CsiTrace;

/// Names of the extracted features, in output order.
pub const FEATURE_NAMES: [&str; 10] = [
    "mean",
    "std_dev",
    "range",
    "rms",
    "skewness",
    "excess_kurtosis",
    "mad",
    "zero_crossings",
    "dominant_freq_hz",
    "spectral_entropy",
];

/// Minimum trace length accepted by [`extract_features`].
pub const MIN_TRACE_LEN: usize = 8;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("trace {trace_id:?} has {len} samples; at least {min} required")]
    TraceTooShort {
        trace_id: String,
        len: usize,
        min: usize,
    },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("feature vector has {got} dimensions, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
}

/// A fixed-length feature vector; entries follow [`FEATURE_NAMES`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; 10],
}

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.values.to_vec()
    }
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Extract the 10 features from a trace. Deterministic and total on traces
/// with at least [`MIN_TRACE_LEN`] samples; never emits non-finite values.
pub fn extract_features(trace: &CsiTrace) -> Result<FeatureVector, FeatureError> {
    let samples = &trace.samples;
    let n = samples.len();
    if n < MIN_TRACE_LEN {
        return Err(FeatureError::TraceTooShort {
            trace_id: trace.trace_id.clone(),
            len: n,
            min: MIN_TRACE_LEN,
        });
    }
    let nf = n as f64;

    let mean = samples.iter().sum::<f64>() / nf;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &s in samples {
        let d = s - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let std_dev = m2.sqrt();

    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let rms = (samples.iter().map(|s| s * s).sum::<f64>() / nf).sqrt();

    // Degeneracy threshold, relative to the signal scale so that scaling a
    // trace does not change which branch is taken.
    let degenerate = std_dev < 1e-12 * mean.abs().max(1.0);
    let (skewness, excess_kurtosis) = if degenerate {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };

    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = median_of_sorted(&sorted);
    let mut deviations: Vec<f64> = samples.iter().map(|s| (s - median).abs()).collect();
    deviations.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mad = median_of_sorted(&deviations);

    let mut zero_crossings = 0usize;
    for w in samples.windows(2) {
        if (w[0] - mean) * (w[1] - mean) < 0.0 {
            zero_crossings += 1;
        }
    }

    // DFT magnitudes for bins 1..=n/2.
    let half = n / 2;
    let mut magnitudes = Vec::with_capacity(half);
    for k in 1..=half {
        let mut re = 0.0;
        let mut im = 0.0;
        for (t, &s) in samples.iter().enumerate() {
            let angle = std::f64::consts::TAU * k as f64 * t as f64 / nf;
            re += s * angle.cos();
            im -= s * angle.sin();
        }
        magnitudes.push((re * re + im * im).sqrt());
    }
    let (dominant_freq_hz, spectral_entropy) = if degenerate {
        (trace.sampling_rate_hz / nf, 0.0)
    } else {
        let mut best = 0usize;
        for (k, &mag) in magnitudes.iter().enumerate() {
            if mag > magnitudes[best] {
                best = k;
            }
        }
        let dominant = (best + 1) as f64 * trace.sampling_rate_hz / nf;
        let total: f64 = magnitudes.iter().sum();
        let entropy = if total > 0.0 {
            -magnitudes
                .iter()
                .map(|&m| m / total)
                .filter(|&p| p > 0.0)
                .map(|p| p * p.ln())
                .sum::<f64>()
        } else {
            0.0
        };
        (dominant, entropy)
    };

    Ok(FeatureVector {
        values: [
            mean,
            std_dev,
            range,
            rms,
            skewness,
            excess_kurtosis,
            mad,
            zero_crossings as f64,
            dominant_freq_hz,
            spectral_entropy,
        ],
    })
}

/// Extract features for a batch of traces (parallel when enabled).
pub fn extract_all(traces: &[CsiTrace]) -> Result<Vec<FeatureVector>, FeatureError> {
    batch::map(traces, extract_features).into_iter().collect()
}

/// Z-score standardization parameters, fitted on a training set with
/// population statistics. Dimensions whose standard deviation is below
/// [`Scaler::ZERO_VARIANCE_EPS`] pass through unchanged (no centering, no
/// scaling).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
}

impl Scaler {
    pub const ZERO_VARIANCE_EPS: f64 = 1e-12;

    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, FeatureError> {
        let first = rows.first().ok_or(FeatureError::EmptyTrainingSet)?;
        let dims = first.len();
        for row in rows {
            if row.len() != dims {
                return Err(FeatureError::DimensionMismatch {
                    got: row.len(),
                    expected: dims,
                });
            }
        }
        let n = rows.len() as f64;
        let mut means = vec![0.0; dims];
        for row in rows {
            for (m, &v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut variances = vec![0.0; dims];
        for row in rows {
            for ((var, &v), &m) in variances.iter_mut().zip(row).zip(&means) {
                let d = v - m;
                *var += d * d;
            }
        }
        let std_devs = variances.iter().map(|v| (v / n).sqrt()).collect();
        Ok(Self { means, std_devs })
    }

    pub fn dims(&self) -> usize {
        self.means.len()
    }

    /// Standardize one row. The row length must equal [`Scaler::dims`].
    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        assert_eq!(row.len(), self.dims(), "feature dimension mismatch");
        row.iter()
            .zip(self.means.iter().zip(&self.std_devs))
            .map(|(&v, (&mean, &std))| {
                if std < Self::ZERO_VARIANCE_EPS {
                    v
                } else {
                    (v - mean) / std
                }
            })
            .collect()
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        batch::map(rows, |row| self.transform(row))
    }
}

/// Fit a scaler on `train` and apply it to `apply_to`.
pub fn standardize(
    train: &[Vec<f64>],
    apply_to: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, Scaler), FeatureError> {
    let scaler = Scaler::fit(train)?;
    for row in apply_to {
        if row.len() != scaler.dims() {
            return Err(FeatureError::DimensionMismatch {
                got: row.len(),
                expected: scaler.dims(),
            });
        }
    }
    Ok((scaler.transform_all(apply_to), scaler))
}

/// Feature matrix CSV: header of feature names plus `activity`, one row per
/// trace.
pub fn features_to_csv(
    features: &[FeatureVector],
    activities: &[crate::csi::Activity],
) -> String {
    let mut out = FEATURE_NAMES.join(",");
    out.push_str(",activity\n");
    for (vector, activity) in features.iter().zip(activities) {
        let row: Vec<String> = vector.values.iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push(',');
        out.push_str(activity.name());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csi::Activity;

    fn trace_from(samples: Vec<f64>, rate: f64) -> CsiTrace {
        let duration = samples.len() as f64 / rate;
        CsiTrace {
            trace_id: "test".to_string(),
            activity: Activity::Walking,
            sampling_rate_hz: rate,
            duration_s: duration,
            samples,
        }
    }

    #[test]
    fn constant_trace_conventions() {
        let trace = trace_from(vec![1.0; 200], 20.0);
        let f = extract_features(&trace).unwrap();
        assert_eq!(f.values[0], 1.0); // mean
        assert_eq!(f.values[1], 0.0); // std
        assert_eq!(f.values[2], 0.0); // range
        assert_eq!(f.values[3], 1.0); // rms
        assert_eq!(f.values[4], 0.0); // skewness
        assert_eq!(f.values[5], 0.0); // kurtosis
        assert_eq!(f.values[6], 0.0); // mad
        assert_eq!(f.values[7], 0.0); // zero crossings
        assert_eq!(f.values[9], 0.0); // spectral entropy
    }

    #[test]
    fn sinusoid_dominant_frequency() {
        let rate = 20.0;
        let samples: Vec<f64> = (0..200)
            .map(|i| 1.0 + 0.5 * (std::f64::consts::TAU * 1.5 * i as f64 / rate).sin())
            .collect();
        let f = extract_features(&trace_from(samples, rate)).unwrap();
        let dominant = f.values[8];
        assert!((dominant - 1.5).abs() <= 0.1 + 1e-12, "dominant {dominant}");
    }

    #[test]
    fn scale_homogeneity() {
        let mut rng = crate::rng::SplitMix64::new(2024);
        for _ in 0..20 {
            let samples: Vec<f64> = (0..64).map(|_| 1.0 + rng.next_f64()).collect();
            let base = extract_features(&trace_from(samples.clone(), 20.0)).unwrap();
            // Power-of-two scale: float arithmetic is exact, discrete
            // features must match exactly.
            let doubled: Vec<f64> = samples.iter().map(|s| s * 2.0).collect();
            let scaled = extract_features(&trace_from(doubled, 20.0)).unwrap();
            for idx in [0, 1, 2, 3, 6] {
                assert!(
                    (scaled.values[idx] - 2.0 * base.values[idx]).abs()
                        <= 1e-12 * base.values[idx].abs().max(1.0),
                    "feature {idx}"
                );
            }
            for idx in [4, 5, 7, 8, 9] {
                assert!(
                    (scaled.values[idx] - base.values[idx]).abs()
                        <= 1e-9 * base.values[idx].abs().max(1.0),
                    "feature {idx}: {} vs {}",
                    scaled.values[idx],
                    base.values[idx]
                );
            }
            // Arbitrary positive scale: same shape within tolerance.
            let c = 3.7;
            let stretched: Vec<f64> = samples.iter().map(|s| s * c).collect();
            let scaled = extract_features(&trace_from(stretched, 20.0)).unwrap();
            for idx in [4, 5, 9] {
                assert!(
                    (scaled.values[idx] - base.values[idx]).abs() < 1e-6,
                    "feature {idx}"
                );
            }
            assert_eq!(scaled.values[8], base.values[8], "dominant frequency");
        }
    }

    #[test]
    fn all_features_finite_on_random_traces() {
        let mut rng = crate::rng::SplitMix64::new(9);
        for _ in 0..50 {
            let samples: Vec<f64> = (0..40).map(|_| rng.next_f64() * 5.0).collect();
            let f = extract_features(&trace_from(samples, 20.0)).unwrap();
            assert!(f.values.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn short_trace_is_rejected() {
        let trace = trace_from(vec![1.0; 7], 20.0);
        assert!(matches!(
            extract_features(&trace),
            Err(FeatureError::TraceTooShort { len: 7, .. })
        ));
    }

    #[test]
    fn scaler_self_standardization() {
        let mut rng = crate::rng::SplitMix64::new(31);
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..4).map(|_| rng.next_f64() * 10.0 - 3.0).collect())
            .collect();
        let (standardized, scaler) = standardize(&rows, &rows).unwrap();
        for d in 0..4 {
            let mean = standardized.iter().map(|r| r[d]).sum::<f64>() / 100.0;
            let var =
                standardized.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / 100.0;
            assert!(mean.abs() < 1e-9, "dim {d} mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-9, "dim {d} std {}", var.sqrt());
        }
        assert_eq!(scaler.dims(), 4);
    }

    #[test]
    fn zero_variance_dimension_passes_through() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64, 3.0])
            .collect();
        let scaler = Scaler::fit(&rows).unwrap();
        let out = scaler.transform(&[4.0, 3.0]);
        assert_eq!(out[1], 3.0);
    }

    #[test]
    fn training_mean_maps_to_zero() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let scaler = Scaler::fit(&rows).unwrap();
        let out = scaler.transform(&[3.5, 7.0]);
        assert!(out.iter().all(|v| v.abs() < 1e-12), "{out:?}");
    }

    #[test]
    fn empty_training_set_is_an_error() {
        assert!(matches!(
            Scaler::fit(&[]),
            Err(FeatureError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn feature_csv_has_header_and_rows() {
        let trace = trace_from(vec![1.0; 20], 20.0);
        let f = extract_features(&trace).unwrap();
        let csv = features_to_csv(&[f], &[Activity::Walking]);
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("mean,std_dev,"));
        assert!(header.ends_with(",activity"));
        assert!(lines.next().unwrap().ends_with(",walking"));
    }
}
