//! Transmissive RIS beamforming over a uniform planar array.
//!
//! The surface is a rows×cols lattice of phase-shifting elements between a
//! transmitter and a receiver on opposite sides of its plane. Each element
//! passes the incident spherical wave with unit amplitude and an applied
//! phase; the field at the receiver is the coherent sum over elements of
//!
//! `(s² / 4π·d1·d2) · 10^(-wall_dB/20) · e^{j(φ − k(d1+d2))}`
//!
//! where `s` is the element spacing (each element contributes an effective
//! aperture of s²), `d1`/`d2` the Tx→element and element→Rx distances, and
//! the wall attenuation comes from the obstructions on the Tx side. The
//! squared magnitude of the sum, added to the antenna/amplifier budget,
//! gives the received power. With a single element of aperture `λ²/4π`
//! (spacing `λ/2√π`) this reduces exactly to two cascaded free-space legs.
//!
//! Phase control is either continuous or quantized to `2^bits` uniform
//! levels; the 1-bit case ({0, π}) matches surfaces built from a pair of
//! switched states. [`optimize_binary_profile`] finds the globally optimal
//! 1-bit profile with a sorted-angle sweep instead of enumerating all 2^N
//! sign patterns.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::batch;
use crate::propagation::{
    total_obstruction_attenuation, LinkBudgetConfig, Obstruction, PropagationError,
    SPEED_OF_LIGHT,
};
use crate::vecmath::{add, cross, distance, dot, normalize, scale, sub, Vec3};

use std::f64::consts::{PI, TAU};

#[derive(Debug, Error)]
pub enum RisError {
    #[error("array must have at least one row and one column")]
    EmptyArray,
    #[error("element spacing must be positive, got {0} m")]
    NonPositiveSpacing(f64),
    #[error("design frequency must be positive, got {0} Hz")]
    NonPositiveFrequency(f64),
    #[error("orientation must be a unit vector, got norm {0}")]
    NonUnitNormal(f64),
    #[error("expected {expected} phases for a {rows}x{cols} profile, got {got}")]
    PhaseCount {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("phase {0} outside [0, 2π)")]
    PhaseOutOfRange(f64),
    #[error("phase {phase} is not a {bits}-bit quantization level")]
    NotQuantized { phase: f64, bits: u8 },
    #[error("quantization bits must be in 1..=30, got {0}")]
    InvalidBits(u8),
    #[error(
        "profile is {profile_rows}x{profile_cols} but the array is {array_rows}x{array_cols}"
    )]
    DimensionMismatch {
        profile_rows: usize,
        profile_cols: usize,
        array_rows: usize,
        array_cols: usize,
    },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("codebook is empty")]
    EmptyCodebook,
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

/// Wrap an angle into `[0, 2π)`.
fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// A uniform planar array of transmissive phase-shifting elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RisArray {
    pub rows: usize,
    pub cols: usize,
    /// Element pitch, m.
    pub element_spacing_m: f64,
    /// Frequency the surface was designed for, Hz.
    pub design_frequency_hz: f64,
    /// Center of the array, m.
    pub center: Vec3,
    /// Unit normal of the array plane.
    pub normal: Vec3,
}

impl RisArray {
    pub fn new(
        rows: usize,
        cols: usize,
        element_spacing_m: f64,
        design_frequency_hz: f64,
        center: Vec3,
        normal: Vec3,
    ) -> Result<Self, RisError> {
        let array = Self {
            rows,
            cols,
            element_spacing_m,
            design_frequency_hz,
            center,
            normal,
        };
        array.validate()?;
        Ok(array)
    }

    /// Array with half-wavelength pitch at its design frequency.
    pub fn half_wave(
        rows: usize,
        cols: usize,
        design_frequency_hz: f64,
        center: Vec3,
        normal: Vec3,
    ) -> Result<Self, RisError> {
        if !(design_frequency_hz > 0.0) {
            return Err(RisError::NonPositiveFrequency(design_frequency_hz));
        }
        let spacing = SPEED_OF_LIGHT / design_frequency_hz / 2.0;
        Self::new(rows, cols, spacing, design_frequency_hz, center, normal)
    }

    pub fn validate(&self) -> Result<(), RisError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(RisError::EmptyArray);
        }
        if !(self.element_spacing_m > 0.0) {
            return Err(RisError::NonPositiveSpacing(self.element_spacing_m));
        }
        if !(self.design_frequency_hz > 0.0) {
            return Err(RisError::NonPositiveFrequency(self.design_frequency_hz));
        }
        let n = crate::vecmath::norm(self.normal);
        if (n - 1.0).abs() > 1e-9 {
            return Err(RisError::NonUnitNormal(n));
        }
        Ok(())
    }

    pub fn num_elements(&self) -> usize {
        self.rows * self.cols
    }

    /// Orthonormal in-plane basis `(u, v)`: columns advance along `u`, rows
    /// along `v`. Chosen deterministically from the normal.
    pub fn in_plane_basis(&self) -> (Vec3, Vec3) {
        let n = normalize(self.normal);
        let reference = if n[2].abs() < 0.9 {
            [0.0, 0.0, 1.0]
        } else {
            [1.0, 0.0, 0.0]
        };
        let u = normalize(cross(reference, n));
        let v = cross(n, u);
        (u, v)
    }
}

/// Element centers on a centered rectangular lattice in the array plane,
/// row-major (`index = row·cols + col`).
pub fn element_positions(ris: &RisArray) -> Vec<Vec3> {
    let (u, v) = ris.in_plane_basis();
    let s = ris.element_spacing_m;
    let col_mid = (ris.cols as f64 - 1.0) / 2.0;
    let row_mid = (ris.rows as f64 - 1.0) / 2.0;
    let mut positions = Vec::with_capacity(ris.num_elements());
    for r in 0..ris.rows {
        for c in 0..ris.cols {
            let du = (c as f64 - col_mid) * s;
            let dv = (r as f64 - row_mid) * s;
            positions.push(add(ris.center, add(scale(u, du), scale(v, dv))));
        }
    }
    positions
}

/// Per-element phase states, row-major, each in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseProfile {
    rows: usize,
    cols: usize,
    phases: Vec<f64>,
    quantization: Quantization,
}

/// Phase resolution of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantization {
    Continuous,
    Bits(u8),
}

impl PhaseProfile {
    pub fn new(
        rows: usize,
        cols: usize,
        phases: Vec<f64>,
        quantization: Quantization,
    ) -> Result<Self, RisError> {
        if phases.len() != rows * cols {
            return Err(RisError::PhaseCount {
                rows,
                cols,
                expected: rows * cols,
                got: phases.len(),
            });
        }
        if let Quantization::Bits(bits) = quantization {
            if bits == 0 || bits > 30 {
                return Err(RisError::InvalidBits(bits));
            }
        }
        for &phase in &phases {
            if !(0.0..TAU).contains(&phase) {
                return Err(RisError::PhaseOutOfRange(phase));
            }
            if let Quantization::Bits(bits) = quantization {
                let level = quantize_phase(phase, bits);
                if phase != level {
                    return Err(RisError::NotQuantized { phase, bits });
                }
            }
        }
        Ok(Self {
            rows,
            cols,
            phases,
            quantization,
        })
    }

    /// All-zero profile (a valid level at any quantization).
    pub fn zeros(rows: usize, cols: usize, quantization: Quantization) -> Self {
        Self {
            rows,
            cols,
            phases: vec![0.0; rows * cols],
            quantization,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn quantization(&self) -> Quantization {
        self.quantization
    }

    /// Row-major phases.
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn phase_at(&self, row: usize, col: usize) -> f64 {
        self.phases[row * self.cols + col]
    }

    /// CSV export with header `# rows cols bits` (bits = 0 for continuous).
    /// One row per array row; 1-bit profiles are written as 0/1 levels,
    /// everything else as radians.
    pub fn to_csv(&self) -> String {
        let bits = match self.quantization {
            Quantization::Continuous => 0,
            Quantization::Bits(b) => b,
        };
        let mut out = format!("# {} {} {}\n", self.rows, self.cols, bits);
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|c| {
                    let phase = self.phase_at(r, c);
                    if self.quantization == Quantization::Bits(1) {
                        if phase == 0.0 { "0".to_string() } else { "1".to_string() }
                    } else {
                        phase.to_string()
                    }
                })
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Snap a phase in `[0, 2π)` to the nearest of the `2^bits` uniform levels
/// `{2πk / 2^bits}`, breaking exact midpoints toward the lower level.
fn quantize_phase(phase: f64, bits: u8) -> f64 {
    let m = 1u64 << bits;
    let step = TAU / m as f64;
    let q = phase / step;
    let mut k = (q - 0.5).ceil() as i64; // round half down
    if k < 0 {
        k = 0;
    }
    ((k as u64) % m) as f64 * step
}

/// Quantize every phase of a profile to `bits` bits (1..=30).
pub fn quantize_profile(profile: &PhaseProfile, bits: u8) -> Result<PhaseProfile, RisError> {
    if bits == 0 || bits > 30 {
        return Err(RisError::InvalidBits(bits));
    }
    let phases = profile
        .phases
        .iter()
        .map(|&p| quantize_phase(p, bits))
        .collect();
    Ok(PhaseProfile {
        rows: profile.rows,
        cols: profile.cols,
        phases,
        quantization: Quantization::Bits(bits),
    })
}

/// Tx / wall / RIS / Rx layout. The transmitter and receiver must sit on
/// opposite sides of the array plane (the surface is transmissive), and the
/// obstructions are crossed by every Tx→element path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeGeometry {
    pub tx_position: Vec3,
    pub rx_position: Vec3,
    pub ris: RisArray,
    pub tx_side_obstructions: Vec<Obstruction>,
}

impl CascadeGeometry {
    pub fn validate(&self) -> Result<(), RisError> {
        self.ris.validate()?;
        let side_tx = dot(sub(self.tx_position, self.ris.center), self.ris.normal);
        let side_rx = dot(sub(self.rx_position, self.ris.center), self.ris.normal);
        if side_tx == 0.0 || side_rx == 0.0 {
            return Err(RisError::DegenerateGeometry(
                "Tx or Rx lies in the array plane".to_string(),
            ));
        }
        if side_tx.signum() == side_rx.signum() {
            return Err(RisError::DegenerateGeometry(
                "Tx and Rx must be on opposite sides of the array plane".to_string(),
            ));
        }
        Ok(())
    }

    /// Direct Tx–Rx separation, m.
    pub fn direct_distance_m(&self) -> f64 {
        distance(self.tx_position, self.rx_position)
    }
}

/// Complex per-element receiver contributions for a zero applied phase:
/// amplitude `s²/(4π·d1·d2)` times the wall transmission factor, at the
/// propagation phase `-k(d1+d2)`.
fn element_contributions(
    geometry: &CascadeGeometry,
    config: &LinkBudgetConfig,
) -> Result<Vec<(f64, f64)>, RisError> {
    geometry.validate()?;
    config.validate()?;
    let k = TAU * config.frequency_hz / SPEED_OF_LIGHT;
    let wall_db = total_obstruction_attenuation(&geometry.tx_side_obstructions)?;
    let wall_amplitude = 10f64.powf(-wall_db / 20.0);
    let aperture = geometry.ris.element_spacing_m * geometry.ris.element_spacing_m;
    let positions = element_positions(&geometry.ris);
    Ok(positions
        .iter()
        .map(|&p| {
            let d1 = distance(geometry.tx_position, p);
            let d2 = distance(p, geometry.rx_position);
            let amplitude = aperture / (4.0 * PI * d1 * d2) * wall_amplitude;
            let phase = -k * (d1 + d2);
            (amplitude * phase.cos(), amplitude * phase.sin())
        })
        .collect())
}

/// Continuous profile that co-phases every element contribution at the
/// receiver: element m gets the negated propagation phase `k(d1+d2) mod 2π`,
/// shifted so the first element reads zero (phase offsets common to all
/// elements do not change the received power).
pub fn ideal_phase_profile(geometry: &CascadeGeometry) -> Result<PhaseProfile, RisError> {
    geometry.validate()?;
    let k = TAU * geometry.ris.design_frequency_hz / SPEED_OF_LIGHT;
    let positions = element_positions(&geometry.ris);
    let raw: Vec<f64> = positions
        .iter()
        .map(|&p| {
            k * (distance(geometry.tx_position, p) + distance(p, geometry.rx_position))
        })
        .collect();
    let reference = raw[0];
    let phases = raw.iter().map(|&r| wrap_phase(r - reference)).collect();
    Ok(PhaseProfile {
        rows: geometry.ris.rows,
        cols: geometry.ris.cols,
        phases,
        quantization: Quantization::Continuous,
    })
}

/// Received power of the cascade for a given profile, dBm:
/// budget fixed terms plus `20·log10 |Σ_m a_m e^{jφ_m}|`. Returns `-inf`
/// for a perfectly cancelled field. The config's `distance_m` is not used
/// here; geometry comes from the cascade positions.
pub fn received_power_with_ris(
    geometry: &CascadeGeometry,
    profile: &PhaseProfile,
    config: &LinkBudgetConfig,
) -> Result<f64, RisError> {
    if profile.rows != geometry.ris.rows || profile.cols != geometry.ris.cols {
        return Err(RisError::DimensionMismatch {
            profile_rows: profile.rows,
            profile_cols: profile.cols,
            array_rows: geometry.ris.rows,
            array_cols: geometry.ris.cols,
        });
    }
    let contributions = element_contributions(geometry, config)?;
    let mut field = (0.0f64, 0.0f64);
    for (z, &phase) in contributions.iter().zip(profile.phases()) {
        let (c, s) = (phase.cos(), phase.sin());
        field.0 += z.0 * c - z.1 * s;
        field.1 += z.0 * s + z.1 * c;
    }
    let magnitude_sq = field.0 * field.0 + field.1 * field.1;
    Ok(config.fixed_terms_dbm() + 10.0 * magnitude_sq.log10())
}

/// Globally optimal 1-bit profile for the cascade.
///
/// Writing the field as `Σ b_m z_m` with `b_m ∈ {+1, −1}`, the maximizer
/// satisfies `b_m = sign(cos(θ_m − ψ))` for some rotation ψ, where θ_m is
/// the phase of `z_m`. Sweeping ψ across the 2N critical angles `θ_m ± π/2`
/// visits every sign pattern of that form; each crossing flips exactly one
/// element, so the sweep updates the running sum in O(1) per event after an
/// O(N log N) sort.
pub fn optimize_binary_profile(
    geometry: &CascadeGeometry,
    config: &LinkBudgetConfig,
) -> Result<PhaseProfile, RisError> {
    let contributions = element_contributions(geometry, config)?;
    let n = contributions.len();
    let angles: Vec<f64> = contributions.iter().map(|z| z.1.atan2(z.0)).collect();

    let mut events: Vec<(f64, usize)> = Vec::with_capacity(2 * n);
    for (m, &theta) in angles.iter().enumerate() {
        events.push((wrap_phase(theta + PI / 2.0), m));
        events.push((wrap_phase(theta - PI / 2.0), m));
    }
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    // Start in the arc that wraps around 2π.
    let psi0 = wrap_phase((events[events.len() - 1].0 + events[0].0 + TAU) / 2.0);
    let mut signs: Vec<f64> = angles
        .iter()
        .map(|&theta| if (theta - psi0).cos() >= 0.0 { 1.0 } else { -1.0 })
        .collect();

    let sum_for = |signs: &[f64]| -> (f64, f64) {
        let mut acc = (0.0, 0.0);
        for (z, &b) in contributions.iter().zip(signs) {
            acc.0 += b * z.0;
            acc.1 += b * z.1;
        }
        acc
    };

    let mut sum = sum_for(&signs);
    let mut best_sq = sum.0 * sum.0 + sum.1 * sum.1;
    let mut best_signs = signs.clone();
    for &(_, m) in &events {
        sum.0 -= 2.0 * signs[m] * contributions[m].0;
        sum.1 -= 2.0 * signs[m] * contributions[m].1;
        signs[m] = -signs[m];
        let mag_sq = sum.0 * sum.0 + sum.1 * sum.1;
        if mag_sq > best_sq {
            // Re-derive the sum exactly before accepting, so accumulated
            // float drift cannot promote a worse pattern.
            sum = sum_for(&signs);
            let exact = sum.0 * sum.0 + sum.1 * sum.1;
            if exact > best_sq {
                best_sq = exact;
                best_signs.copy_from_slice(&signs);
            }
        }
    }

    let phases = best_signs
        .iter()
        .map(|&b| if b > 0.0 { 0.0 } else { PI })
        .collect();
    Ok(PhaseProfile {
        rows: geometry.ris.rows,
        cols: geometry.ris.cols,
        phases,
        quantization: Quantization::Bits(1),
    })
}

/// A beam-steering direction in the array's local frame, degrees. Azimuth
/// rotates in the `u`–normal plane, elevation toward `v`; the normal is
/// oriented toward the receiver side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringDirection {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

fn rx_side_frame(geometry: &CascadeGeometry) -> (Vec3, Vec3, Vec3) {
    let (u, v) = geometry.ris.in_plane_basis();
    let n = normalize(geometry.ris.normal);
    let toward_rx = dot(sub(geometry.rx_position, geometry.ris.center), n);
    let n = if toward_rx >= 0.0 { n } else { scale(n, -1.0) };
    (u, v, n)
}

/// The steering direction pointing from the array center at the receiver.
pub fn direction_to_rx(geometry: &CascadeGeometry) -> Result<SteeringDirection, RisError> {
    geometry.validate()?;
    let (u, v, n) = rx_side_frame(geometry);
    let w = normalize(sub(geometry.rx_position, geometry.ris.center));
    let elevation = dot(w, v).clamp(-1.0, 1.0).asin();
    let azimuth = dot(w, u).atan2(dot(w, n));
    Ok(SteeringDirection {
        azimuth_deg: azimuth.to_degrees(),
        elevation_deg: elevation.to_degrees(),
    })
}

/// Quantized profile steering the transmitted beam to a far-field direction:
/// each element compensates its Tx-side propagation phase and applies the
/// linear phase of the outgoing plane wave.
pub fn steering_profile(
    geometry: &CascadeGeometry,
    direction: SteeringDirection,
    frequency_hz: f64,
    bits: u8,
) -> Result<PhaseProfile, RisError> {
    geometry.validate()?;
    if bits == 0 || bits > 30 {
        return Err(RisError::InvalidBits(bits));
    }
    if !(frequency_hz > 0.0) {
        return Err(RisError::NonPositiveFrequency(frequency_hz));
    }
    let k = TAU * frequency_hz / SPEED_OF_LIGHT;
    let (u, v, n) = rx_side_frame(geometry);
    let az = direction.azimuth_deg.to_radians();
    let el = direction.elevation_deg.to_radians();
    let out_dir = add(
        add(scale(u, az.sin() * el.cos()), scale(v, el.sin())),
        scale(n, az.cos() * el.cos()),
    );
    let positions = element_positions(&geometry.ris);
    let phases: Vec<f64> = positions
        .iter()
        .map(|&p| {
            let d1 = distance(geometry.tx_position, p);
            let lateral = dot(out_dir, sub(p, geometry.ris.center));
            wrap_phase(k * d1 - k * lateral)
        })
        .collect();
    let continuous = PhaseProfile {
        rows: geometry.ris.rows,
        cols: geometry.ris.cols,
        phases,
        quantization: Quantization::Continuous,
    };
    quantize_profile(&continuous, bits)
}

/// One codebook entry of a scan report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub power_dbm: f64,
}

/// Received power per codeword plus the argmax codeword.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanReport {
    pub bits: u8,
    pub entries: Vec<ScanEntry>,
    pub best_index: usize,
    pub best_power_dbm: f64,
}

impl ScanReport {
    pub fn best(&self) -> &ScanEntry {
        &self.entries[self.best_index]
    }
}

/// Evaluate every codeword of a steering codebook (in parallel when
/// enabled) and report the argmax. Ties keep the first index.
pub fn beam_scan(
    geometry: &CascadeGeometry,
    config: &LinkBudgetConfig,
    codebook: &[SteeringDirection],
    bits: u8,
) -> Result<ScanReport, RisError> {
    if codebook.is_empty() {
        return Err(RisError::EmptyCodebook);
    }
    let results = batch::map(codebook, |&direction| {
        steering_profile(geometry, direction, config.frequency_hz, bits).and_then(
            |profile| {
                received_power_with_ris(geometry, &profile, config).map(|power| ScanEntry {
                    azimuth_deg: direction.azimuth_deg,
                    elevation_deg: direction.elevation_deg,
                    power_dbm: power,
                })
            },
        )
    });
    let entries: Vec<ScanEntry> = results.into_iter().collect::<Result<_, _>>()?;
    let mut best_index = 0usize;
    for (i, entry) in entries.iter().enumerate() {
        if entry.power_dbm > entries[best_index].power_dbm {
            best_index = i;
        }
    }
    let best_power_dbm = entries[best_index].power_dbm;
    Ok(ScanReport {
        bits,
        entries,
        best_index,
        best_power_dbm,
    })
}

/// Uniform azimuth/elevation grid: both axes span `±span_deg` at
/// `step_deg` pitch, azimuth outer, elevation inner, always including 0°.
pub fn grid_codebook(span_deg: f64, step_deg: f64) -> Vec<SteeringDirection> {
    let steps = (span_deg / step_deg).floor() as i64;
    let mut codebook = Vec::new();
    for a in -steps..=steps {
        for e in -steps..=steps {
            codebook.push(SteeringDirection {
                azimuth_deg: a as f64 * step_deg,
                elevation_deg: e as f64 * step_deg,
            });
        }
    }
    codebook
}
