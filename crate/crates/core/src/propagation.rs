//! Path-loss models and partition-based link budgets.
//!
//! Three propagation models are provided:
//!
//! * the free-space term `20·log10(λ / 4πd)` ([`friis_term`]),
//! * the log-distance model `PL(d0) + 10·n·log10(d/d0)`
//!   ([`log_distance_path_loss`]),
//! * the partition-based receiver-power budget that subtracts a per-material
//!   attenuation `α = 1636·σ/√ε′ᵣ` dB/m for every obstruction on the
//!   Tx–Rx line ([`receiver_power`]).
//!
//! All functions are pure and operate in double precision; powers are dBm,
//! gains and losses dB. The wavelength is always derived from frequency via
//! [`SPEED_OF_LIGHT`], never stored.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Material attenuation coefficient: `ATTENUATION_SCALE · σ / √ε′ᵣ` is the
/// specific attenuation in dB per meter of material.
pub const ATTENUATION_SCALE: f64 = 1636.0;

/// Literature range for the real relative permittivity of concrete at
/// 5.8 GHz. The fitted point value [`concrete_fitted`] must lie inside it.
pub const CONCRETE_PERMITTIVITY_RANGE: (f64, f64) = (3.58, 5.50);

#[derive(Debug, Error)]
pub enum PropagationError {
    #[error("frequency must be positive, got {0} Hz")]
    NonPositiveFrequency(f64),
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("reference distance must be positive, got {0} m")]
    NonPositiveReferenceDistance(f64),
    #[error("path loss exponent must be positive, got {0}")]
    NonPositiveExponent(f64),
    #[error("relative permittivity must be >= 1, got {0}")]
    PermittivityBelowOne(f64),
    #[error("conductivity must be >= 0, got {0} S/m")]
    NegativeConductivity(f64),
    #[error("thickness must be positive, got {0} m")]
    NonPositiveThickness(f64),
    #[error("cable loss must be >= 0, got {0} dB")]
    NegativeCableLoss(f64),
    #[error(
        "target {target_dbm} dBm is infeasible: it requires {required_db} dB of wall \
         attenuation (must be positive and at most 1636·σ·t = {max_db} dB)"
    )]
    InfeasibleTarget {
        target_dbm: f64,
        required_db: f64,
        max_db: f64,
    },
    #[error("material database line {line}: {message}")]
    MaterialParse { line: usize, message: String },
}

/// Every additive term of the receiver-power budget.
///
/// `tx_power_dbm + amplifier_gain_db + tx_gain_dbi + rx_gain_dbi -
/// cable_loss_db + friis_term(frequency, distance)` is the received power
/// before wall attenuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudgetConfig {
    /// Transmitter output power, dBm.
    pub tx_power_dbm: f64,
    /// Transmit antenna gain, dBi.
    pub tx_gain_dbi: f64,
    /// Receive antenna gain, dBi.
    pub rx_gain_dbi: f64,
    /// Power amplifier gain, dB.
    pub amplifier_gain_db: f64,
    /// Aggregate cable loss, dB (non-negative; subtracted from the budget).
    pub cable_loss_db: f64,
    /// Carrier frequency, Hz.
    pub frequency_hz: f64,
    /// Tx–Rx separation, m.
    pub distance_m: f64,
}

impl LinkBudgetConfig {
    pub fn validate(&self) -> Result<(), PropagationError> {
        if !(self.frequency_hz > 0.0) {
            return Err(PropagationError::NonPositiveFrequency(self.frequency_hz));
        }
        if !(self.distance_m > 0.0) {
            return Err(PropagationError::NonPositiveDistance(self.distance_m));
        }
        if !(self.cable_loss_db >= 0.0) {
            return Err(PropagationError::NegativeCableLoss(self.cable_loss_db));
        }
        Ok(())
    }

    /// Carrier wavelength, m.
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    /// Sum of all distance-independent budget terms:
    /// `P_T + amplifier + G_T + G_R - cable_loss`, dBm.
    pub fn fixed_terms_dbm(&self) -> f64 {
        self.tx_power_dbm + self.amplifier_gain_db + self.tx_gain_dbi + self.rx_gain_dbi
            - self.cable_loss_db
    }
}

/// A wall material characterized by its real relative permittivity and
/// conductivity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// Real part of the relative permittivity, dimensionless (>= 1).
    pub permittivity_real: f64,
    /// Conductivity, S/m (>= 0).
    pub conductivity: f64,
}

impl Material {
    pub fn new(
        name: impl Into<String>,
        permittivity_real: f64,
        conductivity: f64,
    ) -> Result<Self, PropagationError> {
        let material = Self {
            name: name.into(),
            permittivity_real,
            conductivity,
        };
        material.validate()?;
        Ok(material)
    }

    pub fn validate(&self) -> Result<(), PropagationError> {
        if !(self.permittivity_real >= 1.0) {
            return Err(PropagationError::PermittivityBelowOne(
                self.permittivity_real,
            ));
        }
        if !(self.conductivity >= 0.0) {
            return Err(PropagationError::NegativeConductivity(self.conductivity));
        }
        Ok(())
    }

    /// Specific attenuation of this material, dB/m.
    pub fn specific_attenuation_db_per_m(&self) -> f64 {
        ATTENUATION_SCALE * self.conductivity / self.permittivity_real.sqrt()
    }
}

/// Concrete with the permittivity point value fitted so that the 5.8 GHz
/// budget through a 1.1 m wall matches the measured chain. The fitted value
/// lies inside [`CONCRETE_PERMITTIVITY_RANGE`]; σ = 0.11 S/m is the
/// literature value.
pub fn concrete_fitted() -> Material {
    Material {
        name: "concrete_fitted".to_string(),
        permittivity_real: 5.386,
        conductivity: 0.11,
    }
}

/// Built-in material table. Permittivity and conductivity are representative
/// values around 5–6 GHz; `concrete_fitted` is the calibrated entry used by
/// the default configs.
pub fn builtin_materials() -> Vec<Material> {
    vec![
        concrete_fitted(),
        Material {
            name: "brick".to_string(),
            permittivity_real: 3.91,
            conductivity: 0.019,
        },
        Material {
            name: "plasterboard".to_string(),
            permittivity_real: 2.73,
            conductivity: 0.012,
        },
        Material {
            name: "wood".to_string(),
            permittivity_real: 1.99,
            conductivity: 0.011,
        },
        Material {
            name: "glass".to_string(),
            permittivity_real: 6.27,
            conductivity: 0.023,
        },
    ]
}

/// Parse a material database: one material per line,
/// `name permittivity_real conductivity_S_per_m`, with `#` comments and
/// blank lines ignored.
pub fn parse_material_db(text: &str) -> Result<Vec<Material>, PropagationError> {
    let mut materials = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(PropagationError::MaterialParse {
                line,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let parse = |s: &str, what: &str| -> Result<f64, PropagationError> {
            s.parse::<f64>().map_err(|_| PropagationError::MaterialParse {
                line,
                message: format!("invalid {what}: {s:?}"),
            })
        };
        let permittivity = parse(fields[1], "permittivity")?;
        let conductivity = parse(fields[2], "conductivity")?;
        let material =
            Material::new(fields[0], permittivity, conductivity).map_err(|e| {
                PropagationError::MaterialParse {
                    line,
                    message: e.to_string(),
                }
            })?;
        materials.push(material);
    }
    Ok(materials)
}

/// A wall (or other partition) of a given material and thickness on the
/// Tx–Rx line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstruction {
    pub material: Material,
    pub thickness_m: f64,
}

impl Obstruction {
    pub fn new(material: Material, thickness_m: f64) -> Result<Self, PropagationError> {
        if !(thickness_m > 0.0) {
            return Err(PropagationError::NonPositiveThickness(thickness_m));
        }
        material.validate()?;
        Ok(Self {
            material,
            thickness_m,
        })
    }
}

/// Log-distance path-loss model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogDistanceModel {
    /// Path loss at the reference distance, dB.
    pub pl_at_reference_db: f64,
    /// Reference distance d0, m (conventionally 1 m).
    pub reference_distance_m: f64,
    /// Path loss exponent n (2 in free space).
    pub exponent: f64,
}

impl LogDistanceModel {
    pub fn new(
        pl_at_reference_db: f64,
        reference_distance_m: f64,
        exponent: f64,
    ) -> Result<Self, PropagationError> {
        if !(reference_distance_m > 0.0) {
            return Err(PropagationError::NonPositiveReferenceDistance(
                reference_distance_m,
            ));
        }
        if !(exponent > 0.0) {
            return Err(PropagationError::NonPositiveExponent(exponent));
        }
        Ok(Self {
            pl_at_reference_db,
            reference_distance_m,
            exponent,
        })
    }
}

/// Free-space gain term `20·log10(λ / 4πd)` in dB (negative for d > λ/4π).
pub fn friis_term(frequency_hz: f64, distance_m: f64) -> Result<f64, PropagationError> {
    if !(frequency_hz > 0.0) {
        return Err(PropagationError::NonPositiveFrequency(frequency_hz));
    }
    if !(distance_m > 0.0) {
        return Err(PropagationError::NonPositiveDistance(distance_m));
    }
    let wavelength = SPEED_OF_LIGHT / frequency_hz;
    Ok(20.0 * (wavelength / (4.0 * std::f64::consts::PI * distance_m)).log10())
}

/// Log-distance path loss `PL(d0) + 10·n·log10(d/d0)` in dB.
pub fn log_distance_path_loss(
    model: &LogDistanceModel,
    distance_m: f64,
) -> Result<f64, PropagationError> {
    if !(distance_m > 0.0) {
        return Err(PropagationError::NonPositiveDistance(distance_m));
    }
    Ok(model.pl_at_reference_db
        + 10.0 * model.exponent * (distance_m / model.reference_distance_m).log10())
}

/// Attenuation of a material slab: `1636·σ/√ε′ᵣ · thickness` in dB.
/// Non-negative and exactly linear in thickness.
pub fn material_attenuation(
    material: &Material,
    thickness_m: f64,
) -> Result<f64, PropagationError> {
    material.validate()?;
    if !(thickness_m > 0.0) {
        return Err(PropagationError::NonPositiveThickness(thickness_m));
    }
    Ok(material.specific_attenuation_db_per_m() * thickness_m)
}

/// Total attenuation of a list of obstructions, dB.
pub fn total_obstruction_attenuation(
    obstructions: &[Obstruction],
) -> Result<f64, PropagationError> {
    let mut total = 0.0;
    for obstruction in obstructions {
        total += material_attenuation(&obstruction.material, obstruction.thickness_m)?;
    }
    Ok(total)
}

/// Partition-based receiver power in dBm:
/// `P_T + amplifier + G_T + G_R - cable_loss + friis_term - Σ α_i`.
/// With no obstructions this reduces to the free-space budget.
pub fn receiver_power(
    config: &LinkBudgetConfig,
    obstructions: &[Obstruction],
) -> Result<f64, PropagationError> {
    config.validate()?;
    let friis = friis_term(config.frequency_hz, config.distance_m)?;
    let walls = total_obstruction_attenuation(obstructions)?;
    Ok(config.fixed_terms_dbm() + friis - walls)
}

/// Solve for the permittivity that makes a single wall of the given
/// conductivity and thickness bring the budget down to `target_dbm`:
/// `ε′ᵣ = (1636·σ·t / required_attenuation)²`.
///
/// Errors if the required attenuation is not positive, or if it exceeds the
/// ε′ᵣ = 1 maximum `1636·σ·t` (the target would need ε′ᵣ < 1).
pub fn solve_permittivity(
    target_rx_power_dbm: f64,
    config: &LinkBudgetConfig,
    sigma: f64,
    thickness_m: f64,
) -> Result<f64, PropagationError> {
    if !(sigma > 0.0) {
        return Err(PropagationError::NegativeConductivity(sigma));
    }
    if !(thickness_m > 0.0) {
        return Err(PropagationError::NonPositiveThickness(thickness_m));
    }
    let unobstructed = receiver_power(config, &[])?;
    let required_db = unobstructed - target_rx_power_dbm;
    let max_db = ATTENUATION_SCALE * sigma * thickness_m;
    // Relative slack keeps the ε′ᵣ = 1 boundary reachable despite the
    // subtraction rounding above.
    if !(required_db > 0.0) || required_db > max_db * (1.0 + 1e-9) {
        return Err(PropagationError::InfeasibleTarget {
            target_dbm: target_rx_power_dbm,
            required_db,
            max_db,
        });
    }
    Ok((max_db / required_db).powi(2).max(1.0))
}

/// Itemized link-budget report: every additive term plus the final power.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkBudgetReport {
    pub tx_power_dbm: f64,
    pub amplifier_gain_db: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub cable_loss_db: f64,
    pub frequency_hz: f64,
    pub distance_m: f64,
    pub wavelength_m: f64,
    pub friis_term_db: f64,
    pub obstructions: Vec<ObstructionReport>,
    pub total_obstruction_db: f64,
    pub receiver_power_dbm: f64,
}

/// Per-obstruction line of a [`LinkBudgetReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstructionReport {
    pub material: String,
    pub permittivity_real: f64,
    pub conductivity: f64,
    pub thickness_m: f64,
    pub specific_attenuation_db_per_m: f64,
    pub attenuation_db: f64,
}

/// Build the itemized report for a budget.
pub fn link_budget_report(
    config: &LinkBudgetConfig,
    obstructions: &[Obstruction],
) -> Result<LinkBudgetReport, PropagationError> {
    config.validate()?;
    let friis = friis_term(config.frequency_hz, config.distance_m)?;
    let mut items = Vec::with_capacity(obstructions.len());
    let mut total = 0.0;
    for obstruction in obstructions {
        let attenuation =
            material_attenuation(&obstruction.material, obstruction.thickness_m)?;
        total += attenuation;
        items.push(ObstructionReport {
            material: obstruction.material.name.clone(),
            permittivity_real: obstruction.material.permittivity_real,
            conductivity: obstruction.material.conductivity,
            thickness_m: obstruction.thickness_m,
            specific_attenuation_db_per_m: obstruction
                .material
                .specific_attenuation_db_per_m(),
            attenuation_db: attenuation,
        });
    }
    Ok(LinkBudgetReport {
        tx_power_dbm: config.tx_power_dbm,
        amplifier_gain_db: config.amplifier_gain_db,
        tx_gain_dbi: config.tx_gain_dbi,
        rx_gain_dbi: config.rx_gain_dbi,
        cable_loss_db: config.cable_loss_db,
        frequency_hz: config.frequency_hz,
        distance_m: config.distance_m,
        wavelength_m: config.wavelength_m(),
        friis_term_db: friis,
        obstructions: items,
        total_obstruction_db: total,
        receiver_power_dbm: config.fixed_terms_dbm() + friis - total,
    })
}
