//! Subcommand implementations. Each command reads the run configuration,
//! writes its artifacts under the output directory and prints a one-line
//! summary. Outputs are deterministic: repeating a command with the same
//! config and seed reproduces every file byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use twsense_core::csi::{
    dataset_from_csv, dataset_to_csv, generate_dataset, link_noise_floor, Activity, CsiTrace,
    DatasetMetadata,
};
use twsense_core::features::{extract_all, features_to_csv, FeatureVector, FEATURE_NAMES};
use twsense_core::propagation::{link_budget_report, receiver_power, LinkBudgetReport};
use twsense_core::ris::{beam_scan, steering_profile, ScanReport};
use twsense_core::rng::SplitMix64;
use twsense_core::svm::{
    cross_validate, evaluate, train_multiclass, CvReport, SvmMulticlassModel,
};

use crate::config::{NoiseFloorSpec, RunConfig};
use crate::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Wraps a report body with the tool version and config hash.
#[derive(Debug, Serialize)]
pub struct Provenanced<T: Serialize> {
    pub tool_version: String,
    pub config_hash: String,
    #[serde(flatten)]
    pub body: T,
}

fn with_provenance<T: Serialize>(config: &RunConfig, body: T) -> Provenanced<T> {
    Provenanced {
        tool_version: TOOL_VERSION.to_string(),
        config_hash: config.hash(),
        body,
    }
}

fn write_file(out_dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn write_json<T: Serialize>(
    out_dir: &Path,
    name: &str,
    report: &T,
) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Numeric(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_file(out_dir, name, &text)
}

fn provenance_comment(config: &RunConfig) -> String {
    format!(
        "# tool_version={} config_hash={}\n",
        TOOL_VERSION,
        config.hash()
    )
}

/// `linkbudget`: itemized receiver-power report through the configured wall.
pub fn cmd_linkbudget(config: &RunConfig, out_dir: &Path) -> Result<PathBuf, CliError> {
    let obstructions = match config.wall()? {
        Some(wall) => vec![wall],
        None => vec![],
    };
    let report = link_budget_report(&config.link_budget(), &obstructions)?;
    let final_power = report.receiver_power_dbm;
    let path = write_json(out_dir, "link_budget.json", &with_provenance(config, report))?;
    println!(
        "link budget: {final_power:.2} dBm -> {}",
        path.display()
    );
    Ok(path)
}

#[derive(Debug, Serialize)]
struct AttenuationEntry {
    material: String,
    permittivity_real: f64,
    conductivity: f64,
    specific_attenuation_db_per_m: f64,
    attenuation_at_wall_thickness_db: f64,
}

#[derive(Debug, Serialize)]
struct AttenuationReport {
    wall_thickness_m: f64,
    materials: Vec<AttenuationEntry>,
}

/// `attenuation`: per-material specific attenuation table.
pub fn cmd_attenuation(config: &RunConfig, out_dir: &Path) -> Result<PathBuf, CliError> {
    let entries: Vec<AttenuationEntry> = config
        .materials()?
        .into_iter()
        .map(|m| {
            let per_m = m.specific_attenuation_db_per_m();
            AttenuationEntry {
                material: m.name.clone(),
                permittivity_real: m.permittivity_real,
                conductivity: m.conductivity,
                specific_attenuation_db_per_m: per_m,
                attenuation_at_wall_thickness_db: per_m * config.wall_thickness_m,
            }
        })
        .collect();
    let report = AttenuationReport {
        wall_thickness_m: config.wall_thickness_m,
        materials: entries,
    };
    let path = write_json(out_dir, "attenuation.json", &with_provenance(config, report))?;
    println!("attenuation table -> {}", path.display());
    Ok(path)
}

#[derive(Debug, Serialize)]
pub struct RisScanReport {
    pub direct_path_dbm: f64,
    pub best_gain_db: f64,
    pub scan: ScanReport,
}

/// Direct through-wall received power at the geometry's Tx–Rx separation.
fn direct_path_dbm(config: &RunConfig) -> Result<f64, CliError> {
    let geometry = config.cascade_geometry()?;
    let mut budget = config.link_budget();
    budget.distance_m = geometry.direct_distance_m();
    Ok(receiver_power(&budget, &geometry.tx_side_obstructions)?)
}

/// `ris-scan`: evaluate the steering codebook, report the argmax codeword
/// and export its phase profile.
pub fn cmd_ris_scan(config: &RunConfig, out_dir: &Path) -> Result<PathBuf, CliError> {
    let geometry = config.cascade_geometry()?;
    let budget = config.link_budget();
    let codebook = config.codebook();
    let scan = beam_scan(&geometry, &budget, &codebook, config.scan_bits)?;
    let direct = direct_path_dbm(config)?;
    let best = scan.best();
    let best_profile = steering_profile(
        &geometry,
        twsense_core::ris::SteeringDirection {
            azimuth_deg: best.azimuth_deg,
            elevation_deg: best.elevation_deg,
        },
        budget.frequency_hz,
        config.scan_bits,
    )?;
    let mut profile_csv = best_profile.to_csv();
    profile_csv.push_str(&provenance_comment(config));
    write_file(out_dir, "best_profile.csv", &profile_csv)?;
    let report = RisScanReport {
        direct_path_dbm: direct,
        best_gain_db: scan.best_power_dbm - direct,
        scan,
    };
    let best_dbm = report.scan.best_power_dbm;
    let path = write_json(out_dir, "scan_report.json", &with_provenance(config, report))?;
    println!(
        "scan best {best_dbm:.2} dBm ({:+.2} dB over direct) -> {}",
        best_dbm - direct,
        path.display()
    );
    Ok(path)
}

/// Resolved noise floor with a human-readable provenance string.
pub struct NoiseFloor {
    pub amplitude: f64,
    pub provenance: String,
}

pub fn resolve_noise_floor(config: &RunConfig) -> Result<NoiseFloor, CliError> {
    match config.noise_floor {
        NoiseFloorSpec::Fixed(amplitude) => Ok(NoiseFloor {
            amplitude,
            provenance: "fixed value from config".to_string(),
        }),
        NoiseFloorSpec::AutoWithoutRis => {
            let direct = direct_path_dbm(config)?;
            Ok(NoiseFloor {
                amplitude: link_noise_floor(direct, config.noise_reference_dbm),
                provenance: format!(
                    "direct path {direct:.2} dBm at reference {} dBm",
                    config.noise_reference_dbm
                ),
            })
        }
        NoiseFloorSpec::AutoWithRis => {
            let geometry = config.cascade_geometry()?;
            let scan = beam_scan(
                &geometry,
                &config.link_budget(),
                &config.codebook(),
                config.scan_bits,
            )?;
            Ok(NoiseFloor {
                amplitude: link_noise_floor(scan.best_power_dbm, config.noise_reference_dbm),
                provenance: format!(
                    "beam-scan best {:.2} dBm at reference {} dBm",
                    scan.best_power_dbm, config.noise_reference_dbm
                ),
            })
        }
    }
}

/// `synth`: generate the labeled dataset CSV and its metadata.
pub fn cmd_synth(config: &RunConfig, out_dir: &Path) -> Result<PathBuf, CliError> {
    let floor = resolve_noise_floor(config)?;
    let traces = generate_dataset(
        &config.models,
        config.per_activity_count,
        config.trace_duration_s,
        config.sampling_rate_hz,
        floor.amplitude,
        config.seed,
    )?;
    let mut csv = provenance_comment(config);
    csv.push_str(&dataset_to_csv(&traces));
    let csv_path = write_file(out_dir, "dataset.csv", &csv)?;
    let metadata = DatasetMetadata {
        sampling_rate_hz: config.sampling_rate_hz,
        duration_s: config.trace_duration_s,
        per_activity_count: config.per_activity_count,
        master_seed: config.seed,
        noise_floor: floor.amplitude,
        noise_provenance: floor.provenance,
        models: config.models.clone(),
    };
    write_json(out_dir, "dataset_meta.json", &with_provenance(config, metadata))?;
    println!(
        "dataset: {} traces (noise floor {:.4}) -> {}",
        traces.len(),
        floor.amplitude,
        csv_path.display()
    );
    Ok(csv_path)
}

fn dataset_path(config: &RunConfig, out_dir: &Path) -> PathBuf {
    config
        .dataset_csv
        .clone()
        .unwrap_or_else(|| out_dir.join("dataset.csv"))
}

fn load_dataset(config: &RunConfig, out_dir: &Path) -> Result<Vec<CsiTrace>, CliError> {
    let path = dataset_path(config, out_dir);
    let text = fs::read_to_string(&path).map_err(|e| {
        CliError::Config(format!("cannot read dataset {}: {e}", path.display()))
    })?;
    Ok(dataset_from_csv(&text, config.sampling_rate_hz)?)
}

fn feature_matrix(traces: &[CsiTrace]) -> Result<(Vec<Vec<f64>>, Vec<usize>), CliError> {
    let features: Vec<FeatureVector> = extract_all(traces)?;
    let rows = features.iter().map(|f| f.to_vec()).collect();
    let labels = traces.iter().map(|t| t.activity.label_index()).collect();
    Ok((rows, labels))
}

fn class_label_names() -> Vec<String> {
    Activity::ALL.iter().map(|a| a.name().to_string()).collect()
}

fn feature_name_strings() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Deterministic stratified train/test split: per class, indices are
/// shuffled with the seed and the first `round(fraction·count)` go to the
/// training set.
pub fn stratified_split(
    labels: &[usize],
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let classes = labels.iter().max().map(|&m| m + 1).unwrap_or(0);
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (idx, &label) in labels.iter().enumerate() {
        per_class[label].push(idx);
    }
    let mut rng = SplitMix64::new(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for members in &mut per_class {
        rng.shuffle(members);
        let take = (fraction * members.len() as f64).round() as usize;
        train.extend_from_slice(&members[..take.min(members.len())]);
        test.extend_from_slice(&members[take.min(members.len())..]);
    }
    (train, test)
}

/// `train`: extract features, fit the one-vs-one model on the stratified
/// training split and save it.
pub fn cmd_train(config: &RunConfig, out_dir: &Path) -> Result<PathBuf, CliError> {
    let traces = load_dataset(config, out_dir)?;
    let vectors: Vec<FeatureVector> = extract_all(&traces)?;
    let rows: Vec<Vec<f64>> = vectors.iter().map(|f| f.to_vec()).collect();
    let labels: Vec<usize> = traces.iter().map(|t| t.activity.label_index()).collect();
    let activities: Vec<Activity> = traces.iter().map(|t| t.activity).collect();
    let mut features_csv = provenance_comment(config);
    features_csv.push_str(&features_to_csv(&vectors, &activities));
    write_file(out_dir, "features.csv", &features_csv)?;

    let (train_idx, _) = stratified_split(&labels, config.train_fraction, config.seed);
    let train_rows: Vec<Vec<f64>> = train_idx.iter().map(|&i| rows[i].clone()).collect();
    let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    let model = train_multiclass(
        &train_rows,
        &train_labels,
        &class_label_names(),
        &feature_name_strings(),
        &config.train_options(),
    )?;
    let mut text = model.to_json();
    text.push('\n');
    let path = write_file(out_dir, "model.json", &text)?;
    println!(
        "trained on {} traces ({} held out) -> {}",
        train_idx.len(),
        labels.len() - train_idx.len(),
        path.display()
    );
    Ok(path)
}

#[derive(Debug, Serialize)]
pub struct EvalFileReport {
    pub train_size: usize,
    pub test_size: usize,
    pub per_class_accuracy: Vec<f64>,
    pub macro_mean_accuracy: f64,
    pub overall_accuracy: f64,
    pub confusion_labels: Vec<String>,
    pub confusion_counts: Vec<Vec<u64>>,
}

/// `eval`: load the saved model, rebuild the same stratified split and
/// evaluate on the held-out part.
pub fn cmd_eval(config: &RunConfig, out_dir: &Path) -> Result<PathBuf, CliError> {
    let model_path = out_dir.join("model.json");
    let text = fs::read_to_string(&model_path).map_err(|e| {
        CliError::Config(format!("cannot read model {}: {e}", model_path.display()))
    })?;
    let model = SvmMulticlassModel::from_json(&text)?;
    let traces = load_dataset(config, out_dir)?;
    let (rows, labels) = feature_matrix(&traces)?;
    let (train_idx, test_idx) = stratified_split(&labels, config.train_fraction, config.seed);
    let test_rows: Vec<Vec<f64>> = test_idx.iter().map(|&i| rows[i].clone()).collect();
    let test_labels: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();
    let report = evaluate(&model, &test_rows, &test_labels)?;
    write_file(out_dir, "confusion.csv", &report.confusion.to_csv())?;
    let file_report = EvalFileReport {
        train_size: train_idx.len(),
        test_size: test_idx.len(),
        per_class_accuracy: report.per_class_accuracy.clone(),
        macro_mean_accuracy: report.macro_mean_accuracy,
        overall_accuracy: report.overall_accuracy,
        confusion_labels: report.confusion.labels.clone(),
        confusion_counts: report.confusion.counts.clone(),
    };
    let path = write_json(out_dir, "eval_report.json", &with_provenance(config, file_report))?;
    println!(
        "eval: macro mean accuracy {:.4} on {} test traces -> {}",
        report.macro_mean_accuracy,
        test_idx.len(),
        path.display()
    );
    Ok(path)
}

#[derive(Debug, Serialize)]
pub struct PipelineReport {
    pub link_budget: LinkBudgetReport,
    pub direct_path_dbm: f64,
    pub scan_best_dbm: f64,
    pub ris_gain_db: f64,
    pub noise_reference_dbm: f64,
    pub noise_floor_with_ris: f64,
    pub noise_floor_without_ris: f64,
    pub cv_with_ris: CvReport,
    pub cv_without_ris: CvReport,
    pub with_ris_accuracy_at_least_without: bool,
}

/// Full chain: link budget, beam scan, synthetic datasets at the with- and
/// without-RIS noise floors from the same seed, and cross-validation on
/// both.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineReport, CliError> {
    let obstructions = match config.wall()? {
        Some(wall) => vec![wall],
        None => vec![],
    };
    let link_budget = link_budget_report(&config.link_budget(), &obstructions)?;
    let direct = direct_path_dbm(config)?;
    let geometry = config.cascade_geometry()?;
    let scan = beam_scan(
        &geometry,
        &config.link_budget(),
        &config.codebook(),
        config.scan_bits,
    )?;
    let floor_with = link_noise_floor(scan.best_power_dbm, config.noise_reference_dbm);
    let floor_without = link_noise_floor(direct, config.noise_reference_dbm);

    let class_labels = class_label_names();
    let feature_names = feature_name_strings();
    let mut reports = Vec::with_capacity(2);
    for floor in [floor_with, floor_without] {
        let traces = generate_dataset(
            &config.models,
            config.per_activity_count,
            config.trace_duration_s,
            config.sampling_rate_hz,
            floor,
            config.seed,
        )?;
        let (rows, labels) = feature_matrix(&traces)?;
        let report = cross_validate(
            &rows,
            &labels,
            &class_labels,
            &feature_names,
            config.cv_folds,
            &config.train_options(),
            config.seed,
        )?;
        reports.push(report);
    }
    let cv_without_ris = reports.pop().expect("two reports");
    let cv_with_ris = reports.pop().expect("two reports");
    let ordering = cv_with_ris.mean_accuracy >= cv_without_ris.mean_accuracy;
    Ok(PipelineReport {
        link_budget,
        direct_path_dbm: direct,
        scan_best_dbm: scan.best_power_dbm,
        ris_gain_db: scan.best_power_dbm - direct,
        noise_reference_dbm: config.noise_reference_dbm,
        noise_floor_with_ris: floor_with,
        noise_floor_without_ris: floor_without,
        cv_with_ris,
        cv_without_ris,
        with_ris_accuracy_at_least_without: ordering,
    })
}

/// `pipeline`: run the full chain and write the consolidated report.
pub fn cmd_pipeline(config: &RunConfig, out_dir: &Path) -> Result<PathBuf, CliError> {
    let report = run_pipeline(config)?;
    let with_acc = report.cv_with_ris.mean_accuracy;
    let without_acc = report.cv_without_ris.mean_accuracy;
    let path = write_json(out_dir, "pipeline_report.json", &with_provenance(config, report))?;
    println!(
        "pipeline: CV accuracy {with_acc:.4} with RIS vs {without_acc:.4} without -> {}",
        path.display()
    );
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_respects_fraction_per_class() {
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let (train, test) = stratified_split(&labels, 0.7, 9);
        assert_eq!(train.len(), 70);
        assert_eq!(test.len(), 30);
        for class in 0..2 {
            assert_eq!(train.iter().filter(|&&i| labels[i] == class).count(), 35);
        }
        let mut all: Vec<usize> = train.iter().chain(test.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_deterministic() {
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        assert_eq!(
            stratified_split(&labels, 0.7, 4),
            stratified_split(&labels, 0.7, 4)
        );
        assert_ne!(
            stratified_split(&labels, 0.7, 4),
            stratified_split(&labels, 0.7, 5)
        );
    }
}
