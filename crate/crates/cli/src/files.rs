//! Geometry JSON and scan CSV formats.

use std::fs;
use std::path::Path;

use lensscan_core::beam_optics::nm_to_mm;
use lensscan_core::scan_estimation::{
    ExperimentGeometry, GeometryMetadata, ScanDataset, ScanSample,
};
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::json::format_f64;

const POSITION: &str = "lens_position_mm";
const RATE: &str = "count_rate_hz";
const SIGMA: &str = "sigma_hz";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryFile {
    detector_plane_mm: f64,
    lens_focal_mm: f64,
    detector_mode_waist_mm: f64,
    wavelength_nm: f64,
    #[serde(default)]
    metadata: MetadataFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetadataFile {
    filter_bandwidth_nm: Option<f64>,
    emission_angle_deg: Option<f64>,
}

pub fn parse_geometry(text: &str) -> CliResult<ExperimentGeometry> {
    let file: GeometryFile =
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("geometry: {e}")))?;
    if !(file.wavelength_nm.is_finite() && file.wavelength_nm > 0.0) {
        return Err(CliError::Validation(format!(
            "geometry: wavelength_nm must be finite and > 0, got {}",
            file.wavelength_nm
        )));
    }
    let mut geometry = ExperimentGeometry::new(
        file.detector_plane_mm,
        file.lens_focal_mm,
        file.detector_mode_waist_mm,
        nm_to_mm(file.wavelength_nm),
    )?;
    geometry.metadata = GeometryMetadata {
        filter_bandwidth_nm: file.metadata.filter_bandwidth_nm,
        emission_angle_deg: file.metadata.emission_angle_deg,
    };
    Ok(geometry)
}

/// The geometry at `path`, or the default apparatus with a 100 mm lens.
pub fn load_geometry(path: Option<&Path>) -> CliResult<ExperimentGeometry> {
    match path {
        Some(p) => parse_geometry(&fs::read_to_string(p).map_err(|e| CliError::io(p, e))?),
        None => Ok(ExperimentGeometry::reference(100.0)),
    }
}

pub fn parse_scan(text: &str, integration_time: Option<f64>) -> CliResult<ScanDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Validation(format!("scan header: {e}")))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let has_sigma = match names.as_slice() {
        [POSITION, RATE] => false,
        [POSITION, RATE, SIGMA] => true,
        _ => {
            return Err(CliError::Validation(format!(
                "scan header must be `{POSITION},{RATE}` or `{POSITION},{RATE},{SIGMA}`, got `{}`",
                names.join(",")
            )))
        }
    };

    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| CliError::Validation(format!("scan row {row}: {e}")))?;
        let field = |k: usize| -> CliResult<f64> {
            let raw = &record[k];
            raw.parse::<f64>().map_err(|_| {
                CliError::Validation(format!(
                    "scan row {row}: `{raw}` in column {} is not a number",
                    headers[k].to_owned()
                ))
            })
        };
        samples.push(ScanSample {
            lens_position: field(0)?,
            count_rate: field(1)?,
            sigma: if has_sigma { Some(field(2)?) } else { None },
        });
    }
    ScanDataset::new(samples, integration_time, None)
        .map_err(|e| CliError::Validation(format!("scan: {e}")))
}

pub fn load_scan(path: &Path, integration_time: Option<f64>) -> CliResult<ScanDataset> {
    parse_scan(
        &fs::read_to_string(path).map_err(|e| CliError::io(path, e))?,
        integration_time,
    )
}

pub fn format_scan(dataset: &ScanDataset) -> String {
    let has_sigma = dataset.samples().iter().all(|s| s.sigma.is_some());
    let mut out = if has_sigma {
        format!("{POSITION},{RATE},{SIGMA}\n")
    } else {
        format!("{POSITION},{RATE}\n")
    };
    for s in dataset.samples() {
        out.push_str(&format_f64(s.lens_position));
        out.push(',');
        out.push_str(&format_f64(s.count_rate));
        if let (true, Some(sigma)) = (has_sigma, s.sigma) {
            out.push(',');
            out.push_str(&format_f64(sigma));
        }
        out.push('\n');
    }
    out
}
