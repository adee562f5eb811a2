//! Synthetic CSI amplitude traces.
//!
//! Real over-the-air CSI is not available at desk scale, so this module
//! generates labeled amplitude time series whose qualitative structure
//! matches what a receiver observes for each activity: sustained
//! quasi-periodic modulation for walking or kicking, a single transient dip
//! or rise for sit-down / pick-up / stand-up events, and a near-constant
//! amplitude while standing still.
//!
//! Generation is a pure function of `(model, duration, noise floor, seed)`.
//! The noise amplitude is meant to come from the link budget via
//! [`link_noise_floor`], which is how a stronger received signal (e.g. with
//! RIS assistance) translates into cleaner traces.
//!
//! # Trace construction
//!
//! With `rng = SplitMix64(seed)`, exactly four parameter draws are made
//! first, in this order and for every modulation kind:
//!
//! 1. `u_phase = rng.next_f64()` — oscillation start phase, `2π·u_phase`;
//! 2. `g_center = rng.next_gaussian()` — transient event center jitter;
//! 3. `g_rate = rng.next_gaussian()` — modulation rate jitter;
//! 4. `g_depth = rng.next_gaussian()` — modulation depth jitter;
//!
//! then one Gaussian noise draw per sample. Sample `i` at `t = i / rate` is
//! `max(0, signal(t) + noise_floor · g_i)` where `signal` is the baseline
//! scaled by the modulation of the activity kind. Because the per-sample
//! draws do not depend on `noise_floor`, two datasets generated from the
//! same seed at different noise floors share the same underlying signal and
//! differ only in the scale of the same noise sequence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::batch;
use crate::rng::{derive_seed, SplitMix64};

/// CSI sampling rate of the reference acquisition chain, Hz.
pub const DEFAULT_SAMPLING_RATE_HZ: f64 = 20.0;

#[derive(Debug, Error)]
pub enum CsiError {
    #[error("invalid activity model: {0}")]
    InvalidModel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dataset CSV line {line}: {message}")]
    CsvParse { line: usize, message: String },
}

/// The six recognized activities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Kicking,
    PickingUp,
    SittingDown,
    Standing,
    StandingUp,
    Walking,
}

impl Activity {
    /// All activities in canonical label order.
    pub const ALL: [Activity; 6] = [
        Activity::Kicking,
        Activity::PickingUp,
        Activity::SittingDown,
        Activity::Standing,
        Activity::StandingUp,
        Activity::Walking,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Activity::Kicking => "kicking",
            Activity::PickingUp => "picking_up",
            Activity::SittingDown => "sitting_down",
            Activity::Standing => "standing",
            Activity::StandingUp => "standing_up",
            Activity::Walking => "walking",
        }
    }

    pub fn from_name(name: &str) -> Option<Activity> {
        Activity::ALL.iter().copied().find(|a| a.name() == name)
    }

    /// Position in [`Activity::ALL`], used as the class label index.
    pub fn label_index(&self) -> usize {
        Activity::ALL.iter().position(|a| a == self).unwrap()
    }
}

impl std::fmt::Display for Activity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How an activity modulates the CSI amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulationKind {
    /// One smooth dip of `event_duration` around a jittered center.
    TransientDip,
    /// One smooth rise of `event_duration` around a jittered center.
    TransientRise,
    /// Sustained oscillation at `modulation_rate_hz` for the whole trace.
    QuasiPeriodic,
    /// No modulation; only the noise floor moves the amplitude.
    LowVariance,
}

/// Generative model for one activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityModel {
    pub activity: Activity,
    /// Quiescent CSI amplitude, linear units.
    pub baseline_amplitude: f64,
    pub modulation_kind: ModulationKind,
    /// Peak modulation as a fraction of the baseline, in [0, 1].
    pub modulation_depth: f64,
    /// Oscillation rate for `QuasiPeriodic`, Hz (must stay below Nyquist).
    pub modulation_rate_hz: f64,
    /// Width of the transient event, seconds.
    pub event_duration_s: f64,
    /// Fractional standard deviation applied to center, rate and depth.
    pub jitter: f64,
}

impl ActivityModel {
    pub fn validate(&self, sampling_rate_hz: f64) -> Result<(), CsiError> {
        if !(sampling_rate_hz > 0.0) {
            return Err(CsiError::InvalidParameter(format!(
                "sampling rate must be positive, got {sampling_rate_hz}"
            )));
        }
        if !(self.baseline_amplitude >= 0.0) {
            return Err(CsiError::InvalidModel(format!(
                "baseline amplitude must be >= 0, got {}",
                self.baseline_amplitude
            )));
        }
        if !(0.0..=1.0).contains(&self.modulation_depth) {
            return Err(CsiError::InvalidModel(format!(
                "modulation depth must be in [0, 1], got {}",
                self.modulation_depth
            )));
        }
        if !(self.modulation_rate_hz >= 0.0)
            || self.modulation_rate_hz >= sampling_rate_hz / 2.0
        {
            return Err(CsiError::InvalidModel(format!(
                "modulation rate {} Hz must be in [0, {}) (below Nyquist)",
                self.modulation_rate_hz,
                sampling_rate_hz / 2.0
            )));
        }
        if !(self.jitter >= 0.0) {
            return Err(CsiError::InvalidModel(format!(
                "jitter must be >= 0, got {}",
                self.jitter
            )));
        }
        match self.modulation_kind {
            ModulationKind::TransientDip | ModulationKind::TransientRise => {
                if !(self.event_duration_s > 0.0) {
                    return Err(CsiError::InvalidModel(format!(
                        "event duration must be positive for transient kinds, got {}",
                        self.event_duration_s
                    )));
                }
            }
            ModulationKind::QuasiPeriodic | ModulationKind::LowVariance => {}
        }
        Ok(())
    }
}

/// Default per-activity models. Baselines are identical (the link is the
/// same); activities differ in modulation shape, depth and rate.
pub fn default_models() -> Vec<ActivityModel> {
    vec![
        ActivityModel {
            activity: Activity::Kicking,
            baseline_amplitude: 1.0,
            modulation_kind: ModulationKind::QuasiPeriodic,
            modulation_depth: 0.35,
            modulation_rate_hz: 1.0,
            event_duration_s: 1.0,
            jitter: 0.05,
        },
        ActivityModel {
            activity: Activity::PickingUp,
            baseline_amplitude: 1.0,
            modulation_kind: ModulationKind::TransientDip,
            modulation_depth: 0.3,
            modulation_rate_hz: 0.0,
            event_duration_s: 1.2,
            jitter: 0.08,
        },
        ActivityModel {
            activity: Activity::SittingDown,
            baseline_amplitude: 1.0,
            modulation_kind: ModulationKind::TransientDip,
            modulation_depth: 0.55,
            modulation_rate_hz: 0.0,
            event_duration_s: 2.2,
            jitter: 0.08,
        },
        ActivityModel {
            activity: Activity::Standing,
            baseline_amplitude: 1.0,
            modulation_kind: ModulationKind::LowVariance,
            modulation_depth: 0.0,
            modulation_rate_hz: 0.0,
            event_duration_s: 1.0,
            jitter: 0.0,
        },
        ActivityModel {
            activity: Activity::StandingUp,
            baseline_amplitude: 1.0,
            modulation_kind: ModulationKind::TransientRise,
            modulation_depth: 0.4,
            modulation_rate_hz: 0.0,
            event_duration_s: 1.6,
            jitter: 0.08,
        },
        ActivityModel {
            activity: Activity::Walking,
            baseline_amplitude: 1.0,
            modulation_kind: ModulationKind::QuasiPeriodic,
            modulation_depth: 0.45,
            modulation_rate_hz: 1.5,
            event_duration_s: 1.0,
            jitter: 0.05,
        },
    ]
}

/// A labeled CSI amplitude time series at a fixed sampling rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsiTrace {
    pub trace_id: String,
    pub activity: Activity,
    pub sampling_rate_hz: f64,
    pub duration_s: f64,
    pub samples: Vec<f64>,
}

/// Noise amplitude implied by a received power relative to a reference:
/// `10^((noise_reference - rx_power) / 20)`. A link 20 dB above the
/// reference yields 0.1; a stronger link means proportionally quieter
/// traces.
pub fn link_noise_floor(rx_power_dbm: f64, noise_reference_dbm: f64) -> f64 {
    10f64.powf((noise_reference_dbm - rx_power_dbm) / 20.0)
}

/// Generate one trace. Deterministic given `(model, duration, sampling rate,
/// noise floor, seed)`; see the module docs for the exact draw order.
pub fn generate_trace(
    model: &ActivityModel,
    duration_s: f64,
    sampling_rate_hz: f64,
    noise_floor: f64,
    seed: u64,
) -> Result<CsiTrace, CsiError> {
    model.validate(sampling_rate_hz)?;
    if !(duration_s > 0.0) {
        return Err(CsiError::InvalidParameter(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    if !(noise_floor >= 0.0) {
        return Err(CsiError::InvalidParameter(format!(
            "noise floor must be >= 0, got {noise_floor}"
        )));
    }

    let n = (duration_s * sampling_rate_hz).round() as usize;
    let mut rng = SplitMix64::new(seed);
    let u_phase = rng.next_f64();
    let g_center = rng.next_gaussian();
    let g_rate = rng.next_gaussian();
    let g_depth = rng.next_gaussian();

    let depth = (model.modulation_depth * (1.0 + model.jitter * g_depth)).clamp(0.0, 1.0);
    let rate = (model.modulation_rate_hz * (1.0 + model.jitter * g_rate))
        .clamp(0.0, 0.499 * sampling_rate_hz);
    let phase0 = std::f64::consts::TAU * u_phase;
    let half_event = model.event_duration_s / 2.0;
    let center = if duration_s > model.event_duration_s {
        (duration_s * (0.5 + model.jitter * g_center))
            .clamp(half_event, duration_s - half_event)
    } else {
        duration_s / 2.0
    };

    let baseline = model.baseline_amplitude;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / sampling_rate_hz;
        let pulse = if (t - center).abs() <= half_event {
            let x = std::f64::consts::PI * (t - center) / model.event_duration_s;
            x.cos() * x.cos()
        } else {
            0.0
        };
        let signal = match model.modulation_kind {
            ModulationKind::QuasiPeriodic => {
                baseline * (1.0 + depth * (std::f64::consts::TAU * rate * t + phase0).sin())
            }
            ModulationKind::TransientDip => baseline * (1.0 - depth * pulse),
            ModulationKind::TransientRise => baseline * (1.0 + depth * pulse),
            ModulationKind::LowVariance => baseline,
        };
        let noise = noise_floor * rng.next_gaussian();
        samples.push((signal + noise).max(0.0));
    }

    Ok(CsiTrace {
        trace_id: String::new(),
        activity: model.activity,
        sampling_rate_hz,
        duration_s,
        samples,
    })
}

/// Generate `per_activity_count` traces per model. Trace `i` of model `a`
/// uses the derived seed for global index `a·count + i`, so the dataset is
/// reproducible trace-by-trace and may be generated in parallel.
///
/// Trace ids are `"{activity}-{i:04}"`; models should cover each activity at
/// most once so ids stay unique.
pub fn generate_dataset(
    models: &[ActivityModel],
    per_activity_count: usize,
    duration_s: f64,
    sampling_rate_hz: f64,
    noise_floor: f64,
    master_seed: u64,
) -> Result<Vec<CsiTrace>, CsiError> {
    if per_activity_count == 0 {
        return Err(CsiError::InvalidParameter(
            "per-activity count must be >= 1".to_string(),
        ));
    }
    let total = models.len() * per_activity_count;
    let results = batch::map_indices(total, |global| {
        let model_idx = global / per_activity_count;
        let trace_idx = global % per_activity_count;
        let seed = derive_seed(master_seed, global as u64);
        generate_trace(&models[model_idx], duration_s, sampling_rate_hz, noise_floor, seed)
            .map(|mut trace| {
                trace.trace_id =
                    format!("{}-{:04}", models[model_idx].activity.name(), trace_idx);
                trace
            })
    });
    results.into_iter().collect()
}

/// Dataset CSV with columns `trace_id,activity,sample_index,amplitude`.
pub fn dataset_to_csv(traces: &[CsiTrace]) -> String {
    let mut out = String::from("trace_id,activity,sample_index,amplitude\n");
    for trace in traces {
        for (i, amplitude) in trace.samples.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                trace.trace_id,
                trace.activity.name(),
                i,
                amplitude
            ));
        }
    }
    out
}

/// Parse a dataset CSV written by [`dataset_to_csv`]. Lines starting with
/// `#` are skipped. Samples of one trace must be contiguous and in index
/// order; the sampling rate is not stored in the CSV and must be supplied.
pub fn dataset_from_csv(
    text: &str,
    sampling_rate_hz: f64,
) -> Result<Vec<CsiTrace>, CsiError> {
    if !(sampling_rate_hz > 0.0) {
        return Err(CsiError::InvalidParameter(format!(
            "sampling rate must be positive, got {sampling_rate_hz}"
        )));
    }
    let mut traces: Vec<CsiTrace> = Vec::new();
    let mut header_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.starts_with('#') || raw.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if raw.trim() != "trace_id,activity,sample_index,amplitude" {
                return Err(CsiError::CsvParse {
                    line,
                    message: format!("unexpected header {raw:?}"),
                });
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 4 {
            return Err(CsiError::CsvParse {
                line,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let activity = Activity::from_name(fields[1]).ok_or_else(|| CsiError::CsvParse {
            line,
            message: format!("unknown activity {:?}", fields[1]),
        })?;
        let sample_index: usize =
            fields[2].parse().map_err(|_| CsiError::CsvParse {
                line,
                message: format!("invalid sample index {:?}", fields[2]),
            })?;
        let amplitude: f64 = fields[3].parse().map_err(|_| CsiError::CsvParse {
            line,
            message: format!("invalid amplitude {:?}", fields[3]),
        })?;

        let start_new = traces
            .last()
            .map(|t: &CsiTrace| t.trace_id != fields[0])
            .unwrap_or(true);
        if start_new {
            if sample_index != 0 {
                return Err(CsiError::CsvParse {
                    line,
                    message: format!(
                        "trace {:?} must start at sample index 0, found {sample_index}",
                        fields[0]
                    ),
                });
            }
            traces.push(CsiTrace {
                trace_id: fields[0].to_string(),
                activity,
                sampling_rate_hz,
                duration_s: 0.0,
                samples: Vec::new(),
            });
        }
        let trace = traces.last_mut().unwrap();
        if sample_index != trace.samples.len() {
            return Err(CsiError::CsvParse {
                line,
                message: format!(
                    "sample index {sample_index} out of order (expected {})",
                    trace.samples.len()
                ),
            });
        }
        if trace.activity != activity {
            return Err(CsiError::CsvParse {
                line,
                message: format!("activity changed within trace {:?}", trace.trace_id),
            });
        }
        trace.samples.push(amplitude);
    }
    for trace in &mut traces {
        trace.duration_s = trace.samples.len() as f64 / sampling_rate_hz;
    }
    Ok(traces)
}

/// Companion metadata for a generated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub sampling_rate_hz: f64,
    pub duration_s: f64,
    pub per_activity_count: usize,
    pub master_seed: u64,
    pub noise_floor: f64,
    /// Where the noise floor came from (e.g. the link-budget chain).
    pub noise_provenance: String,
    pub models: Vec<ActivityModel>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walking_model(jitter: f64) -> ActivityModel {
        ActivityModel {
            activity: Activity::Walking,
            baseline_amplitude: 1.0,
            modulation_kind: ModulationKind::QuasiPeriodic,
            modulation_depth: 0.4,
            modulation_rate_hz: 1.5,
            event_duration_s: 1.0,
            jitter,
        }
    }

    fn sitting_model() -> ActivityModel {
        ActivityModel {
            activity: Activity::SittingDown,
            baseline_amplitude: 1.0,
            modulation_kind: ModulationKind::TransientDip,
            modulation_depth: 0.5,
            modulation_rate_hz: 0.0,
            event_duration_s: 2.0,
            jitter: 0.05,
        }
    }

    /// Magnitude of DFT bin k, used as an independent check on trace spectra.
    fn dft_magnitude(samples: &[f64], k: usize) -> f64 {
        let n = samples.len() as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for (t, &s) in samples.iter().enumerate() {
            let angle = std::f64::consts::TAU * k as f64 * t as f64 / n;
            re += s * angle.cos();
            im -= s * angle.sin();
        }
        (re * re + im * im).sqrt()
    }

    fn dominant_bin(samples: &[f64]) -> usize {
        let half = samples.len() / 2;
        let mut best = 1;
        let mut best_mag = dft_magnitude(samples, 1);
        for k in 2..=half {
            let mag = dft_magnitude(samples, k);
            if mag > best_mag {
                best_mag = mag;
                best = k;
            }
        }
        best
    }

    #[test]
    fn all_variation_off_gives_constant_baseline() {
        for kind in [
            ModulationKind::TransientDip,
            ModulationKind::TransientRise,
            ModulationKind::QuasiPeriodic,
            ModulationKind::LowVariance,
        ] {
            let model = ActivityModel {
                activity: Activity::Standing,
                baseline_amplitude: 2.5,
                modulation_kind: kind,
                modulation_depth: 0.0,
                modulation_rate_hz: 1.0,
                event_duration_s: 1.0,
                jitter: 0.1,
            };
            let trace = generate_trace(&model, 10.0, 20.0, 0.0, 77).unwrap();
            assert!(trace.samples.iter().all(|&s| s == 2.5), "{kind:?}");
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let model = walking_model(0.1);
        let a = generate_trace(&model, 10.0, 20.0, 0.05, 42).unwrap();
        let b = generate_trace(&model, 10.0, 20.0, 0.05, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_trace(&model, 10.0, 20.0, 0.05, 43).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn trace_length_matches_rate_and_duration() {
        let model = walking_model(0.0);
        let trace = generate_trace(&model, 10.0, 20.0, 0.0, 1).unwrap();
        assert_eq!(trace.samples.len(), 200);
        let trace = generate_trace(&model, 7.3, 20.0, 0.0, 1).unwrap();
        assert_eq!(trace.samples.len(), 146);
    }

    #[test]
    fn walking_spectrum_peaks_at_modulation_rate() {
        let trace = generate_trace(&walking_model(0.0), 10.0, 20.0, 0.01, 5).unwrap();
        // 1.5 Hz at 20 Hz over 200 samples is bin 15; allow one bin of slack.
        let bin = dominant_bin(&trace.samples);
        assert!((14..=16).contains(&bin), "dominant bin {bin}");
    }

    #[test]
    fn sitting_energy_is_low_frequency() {
        let trace = generate_trace(&sitting_model(), 10.0, 20.0, 0.01, 5).unwrap();
        // Dominant energy below 0.5 Hz: bins 1..5 at 0.1 Hz resolution.
        let bin = dominant_bin(&trace.samples);
        assert!(bin as f64 * 0.1 < 0.5, "dominant bin {bin}");
    }

    #[test]
    fn dataset_counts_and_unique_ids() {
        let traces = generate_dataset(&default_models(), 4, 10.0, 20.0, 0.05, 9).unwrap();
        assert_eq!(traces.len(), 24);
        let mut ids: Vec<&str> = traces.iter().map(|t| t.trace_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 24);
        for activity in Activity::ALL {
            assert_eq!(
                traces.iter().filter(|t| t.activity == activity).count(),
                4
            );
        }
    }

    #[test]
    fn full_scale_dataset_count() {
        let traces =
            generate_dataset(&default_models(), 400, 10.0, 20.0, 0.1, 42).unwrap();
        assert_eq!(traces.len(), 2400);
    }

    #[test]
    fn dataset_is_deterministic() {
        let a = generate_dataset(&default_models(), 3, 10.0, 20.0, 0.05, 123).unwrap();
        let b = generate_dataset(&default_models(), 3, 10.0, 20.0, 0.05, 123).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn singleton_dataset() {
        let traces = generate_dataset(&[walking_model(0.0)], 1, 10.0, 20.0, 0.0, 3).unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].trace_id, "walking-0000");
    }

    #[test]
    fn noise_floor_scales_the_same_noise_sequence() {
        let model = walking_model(0.05);
        let quiet = generate_trace(&model, 10.0, 20.0, 0.1, 11).unwrap();
        let loud = generate_trace(&model, 10.0, 20.0, 0.2, 11).unwrap();
        let clean = generate_trace(&model, 10.0, 20.0, 0.0, 11).unwrap();
        for i in 0..clean.samples.len() {
            let nq = quiet.samples[i] - clean.samples[i];
            let nl = loud.samples[i] - clean.samples[i];
            // Away from the clipping floor the noise doubles exactly.
            if quiet.samples[i] > 0.0 && loud.samples[i] > 0.0 && clean.samples[i] > 0.0 {
                assert!((nl - 2.0 * nq).abs() < 1e-12, "sample {i}");
            }
        }
    }

    #[test]
    fn link_noise_floor_reference_points() {
        assert_eq!(link_noise_floor(-90.0, -90.0), 1.0);
        assert!((link_noise_floor(-70.0, -90.0) - 0.1).abs() < 1e-12);
        // An 11.7 dB stronger link is about 0.26x the noise amplitude.
        let ratio = link_noise_floor(-87.08, -113.0) / link_noise_floor(-98.78, -113.0);
        assert!((ratio - 0.26).abs() < 0.005, "{ratio}");
    }

    #[test]
    fn rejects_invalid_models() {
        let mut model = walking_model(0.0);
        model.modulation_depth = 1.5;
        assert!(generate_trace(&model, 10.0, 20.0, 0.0, 1).is_err());
        let mut model = walking_model(0.0);
        model.modulation_rate_hz = 10.0; // at Nyquist
        assert!(generate_trace(&model, 10.0, 20.0, 0.0, 1).is_err());
        let mut model = sitting_model();
        model.event_duration_s = 0.0;
        assert!(generate_trace(&model, 10.0, 20.0, 0.0, 1).is_err());
        assert!(generate_trace(&walking_model(0.0), 0.0, 20.0, 0.0, 1).is_err());
        assert!(generate_trace(&walking_model(0.0), 10.0, 20.0, -0.1, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let traces = generate_dataset(&default_models(), 2, 2.0, 20.0, 0.05, 17).unwrap();
        let csv = dataset_to_csv(&traces);
        let parsed = dataset_from_csv(&csv, 20.0).unwrap();
        assert_eq!(traces, parsed);
    }

    #[test]
    fn csv_skips_comment_lines() {
        let traces = generate_dataset(&default_models(), 1, 1.0, 20.0, 0.0, 17).unwrap();
        let csv = format!("# provenance line\n{}", dataset_to_csv(&traces));
        let parsed = dataset_from_csv(&csv, 20.0).unwrap();
        assert_eq!(traces.len(), parsed.len());
    }

    #[test]
    fn csv_rejects_malformed_rows() {
        let bad = "trace_id,activity,sample_index,amplitude\nx,walking,1,0.5\n";
        assert!(matches!(
            dataset_from_csv(bad, 20.0),
            Err(CsiError::CsvParse { line: 2, .. })
        ));
        let bad = "trace_id,activity,sample_index,amplitude\nx,jogging,0,0.5\n";
        assert!(dataset_from_csv(bad, 20.0).is_err());
    }
}
