//! Lens-scan forward model, Poisson simulator and waist estimation.
//!
//! A down-converted beam with waist `ω₀` at axial position `s₀` passes a
//! thin lens at position `x` and reaches a fixed detector plane `D`, where
//! all detector-side optics are collapsed into one effective Gaussian
//! acceptance mode of width `ω_d`. The singles rate is
//! `R(x) = A·Q(x) + B`, with `Q` the flat-phase overlap of the beam at `D`
//! with the acceptance mode. Fitting `R` to a scan recovers `(ω₀, s₀)`;
//! the post-lens waist `(ω₀', z')` at the best lens position follows from
//! the thin-lens map.

use nalgebra::{DMatrix, Matrix4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::beam_optics::{
    inverse_curvature_at, lens_transform, nm_to_mm, width_at, GaussianBeamState, ThinLens,
};
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::golden::{golden_section_max, interior_bracket};
use crate::lm::{levenberg_marquardt, LmConfig, LmReport};
use crate::modes_coupling::{curved_gaussian_coupling_closed_form, gaussian_coupling_closed_form};

/// Offset keeping `ln(B + ε)` finite for a zero background.
pub const BACKGROUND_EPSILON: f64 = 1e-9;
/// Minimum number of scan samples accepted by [`fit_scan`].
pub const MIN_SAMPLES: usize = 8;
/// Golden-section tolerance for the fitted peak position, mm.
pub const PEAK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GeometryMetadata {
    pub filter_bandwidth_nm: Option<f64>,
    pub emission_angle_deg: Option<f64>,
}

/// Fixed apparatus: crystal at the origin, detector plane downstream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGeometry {
    pub detector_plane: f64,
    pub lens_focal: f64,
    pub detector_mode_waist: f64,
    /// mm
    pub wavelength: f64,
    /// Carried for provenance only.
    pub metadata: GeometryMetadata,
}

impl ExperimentGeometry {
    pub fn new(
        detector_plane: f64,
        lens_focal: f64,
        detector_mode_waist: f64,
        wavelength: f64,
    ) -> Result<Self> {
        let g = Self {
            detector_plane,
            lens_focal,
            detector_mode_waist,
            wavelength,
            metadata: GeometryMetadata::default(),
        };
        g.validate()?;
        Ok(g)
    }

    /// 852 mm crystal-to-detector distance, 702.2 nm, a 0.157 mm effective
    /// acceptance waist and the given focal length.
    pub fn reference(lens_focal: f64) -> Self {
        Self {
            detector_plane: 852.0,
            lens_focal,
            detector_mode_waist: 0.157,
            wavelength: nm_to_mm(702.2),
            metadata: GeometryMetadata {
                filter_bandwidth_nm: Some(4.0),
                emission_angle_deg: Some(6.0),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("detector_plane", self.detector_plane)?;
        ensure_positive("detector_mode_waist", self.detector_mode_waist)?;
        ensure_positive("wavelength", self.wavelength)?;
        ensure_finite("lens_focal", self.lens_focal)?;
        if self.lens_focal == 0.0 {
            return Err(Error::invalid("lens_focal", "must be nonzero"));
        }
        Ok(())
    }

    pub fn lens_at(&self, position: f64) -> Result<ThinLens> {
        if !(position > 0.0 && position < self.detector_plane) {
            return Err(Error::GeometryViolation {
                position,
                detector_plane: self.detector_plane,
            });
        }
        ThinLens::new(self.lens_focal, position)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingModel {
    /// Waist-plane overlap ignoring wavefront curvature.
    #[default]
    FlatPhase,
    /// Includes the curvature mismatch of the beam at the detector plane.
    CurvatureAware,
}

/// Overlap `Q(x)` of the beam at the detector plane with the acceptance mode.
pub fn coupling_at(
    geometry: &ExperimentGeometry,
    source: &GaussianBeamState,
    lens_position: f64,
    model: CouplingModel,
) -> Result<f64> {
    let lens = geometry.lens_at(lens_position)?;
    let after = lens_transform(source, &lens)?;
    let width = width_at(&after, geometry.detector_plane);
    Ok(match model {
        CouplingModel::FlatPhase => {
            gaussian_coupling_closed_form(width, geometry.detector_mode_waist)
        }
        CouplingModel::CurvatureAware => curved_gaussian_coupling_closed_form(
            width,
            inverse_curvature_at(&after, geometry.detector_plane),
            after.wavelength(),
            geometry.detector_mode_waist,
        ),
    })
}

/// `A·Q(x) + B` with the flat-phase overlap.
pub fn predict_count_rate(
    geometry: &ExperimentGeometry,
    source: &GaussianBeamState,
    lens_position: f64,
    amplitude: f64,
    background: f64,
) -> Result<f64> {
    predict_count_rate_with(
        geometry,
        source,
        lens_position,
        amplitude,
        background,
        CouplingModel::FlatPhase,
    )
}

pub fn predict_count_rate_with(
    geometry: &ExperimentGeometry,
    source: &GaussianBeamState,
    lens_position: f64,
    amplitude: f64,
    background: f64,
    model: CouplingModel,
) -> Result<f64> {
    Ok(amplitude * coupling_at(geometry, source, lens_position, model)? + background)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub lens_position: f64,
    pub count_rate: f64,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanDataset {
    samples: Vec<ScanSample>,
    /// Seconds per sample; used for Poisson uncertainties when `sigma` is absent.
    pub integration_time: Option<f64>,
    pub seed: Option<u64>,
}

impl ScanDataset {
    pub fn new(
        samples: Vec<ScanSample>,
        integration_time: Option<f64>,
        seed: Option<u64>,
    ) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            ensure_finite("lens_position", s.lens_position)?;
            if !(s.count_rate.is_finite() && s.count_rate >= 0.0) {
                return Err(Error::invalid(
                    "count_rate",
                    format!("sample {i}: must be finite and >= 0, got {}", s.count_rate),
                ));
            }
            if let Some(sigma) = s.sigma {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::invalid(
                        "sigma",
                        format!("sample {i}: must be finite and > 0, got {sigma}"),
                    ));
                }
            }
        }
        if let Some(w) = samples
            .windows(2)
            .position(|w| w[1].lens_position <= w[0].lens_position)
        {
            return Err(Error::invalid(
                "lens_position",
                format!("not strictly increasing at sample {}", w + 1),
            ));
        }
        if let Some(t) = integration_time {
            ensure_positive("integration_time", t)?;
        }
        Ok(Self {
            samples,
            integration_time,
            seed,
        })
    }

    pub fn samples(&self) -> &[ScanSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Stated uncertainty, or the Poisson value `√(max(R·T, 1))/T` (T = 1 s if unknown).
    pub fn sigma(&self, index: usize) -> f64 {
        let s = &self.samples[index];
        s.sigma.unwrap_or_else(|| {
            let t = self.integration_time.unwrap_or(1.0);
            (s.count_rate * t).max(1.0).sqrt() / t
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    Poisson {
        seed: u64,
    },
    /// Infinite-integration-time limit: rates equal the model.
    Noiseless,
}

/// Simulated scan at `positions`, sampled with integration time `integration_time`.
pub fn simulate_scan(
    geometry: &ExperimentGeometry,
    source: &GaussianBeamState,
    positions: &[f64],
    amplitude: f64,
    background: f64,
    integration_time: f64,
    noise: Noise,
) -> Result<ScanDataset> {
    ensure_positive("integration_time", integration_time)?;
    ensure_positive("amplitude", amplitude)?;
    if !(background.is_finite() && background >= 0.0) {
        return Err(Error::invalid(
            "background",
            format!("must be finite and >= 0, got {background}"),
        ));
    }
    let mut rng = match noise {
        Noise::Poisson { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Noise::Noiseless => None,
    };
    let mut samples = Vec::with_capacity(positions.len());
    for &x in positions {
        let rate = predict_count_rate(geometry, source, x, amplitude, background)?;
        let sample = match rng.as_mut() {
            Some(rng) => {
                let mean = rate * integration_time;
                let counts = if mean > 0.0 {
                    Poisson::new(mean)
                        .map_err(|e| Error::invalid("poisson mean", e.to_string()))?
                        .sample(rng)
                } else {
                    0.0
                };
                ScanSample {
                    lens_position: x,
                    count_rate: counts / integration_time,
                    sigma: Some(counts.max(1.0).sqrt() / integration_time),
                }
            }
            None => ScanSample {
                lens_position: x,
                count_rate: rate,
                sigma: Some((rate * integration_time).max(1.0).sqrt() / integration_time),
            },
        };
        samples.push(sample);
    }
    let seed = match noise {
        Noise::Poisson { seed } => Some(seed),
        Noise::Noiseless => None,
    };
    ScanDataset::new(samples, Some(integration_time), seed)
}

/// Source and rate parameters of the scan model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanParams {
    /// ω₀, mm
    pub waist: f64,
    /// s₀, mm
    pub waist_position: f64,
    /// A, counts/s
    pub amplitude: f64,
    /// B, counts/s
    pub background: f64,
}

impl ScanParams {
    fn to_internal(self) -> [f64; 4] {
        [
            self.waist.ln(),
            self.waist_position,
            self.amplitude.ln(),
            (self.background + BACKGROUND_EPSILON).ln(),
        ]
    }

    fn from_internal(theta: &[f64]) -> Self {
        Self {
            waist: theta[0].exp(),
            waist_position: theta[1],
            amplitude: theta[2].exp(),
            background: theta[3].exp() - BACKGROUND_EPSILON,
        }
    }

    pub fn source(&self, wavelength: f64) -> Result<GaussianBeamState> {
        GaussianBeamState::new(self.waist, self.waist_position, wavelength)
    }

    fn validate(&self) -> Result<()> {
        ensure_positive("initial waist", self.waist)?;
        ensure_finite("initial waist_position", self.waist_position)?;
        ensure_positive("initial amplitude", self.amplitude)?;
        if !(self.background.is_finite() && self.background >= 0.0) {
            return Err(Error::invalid(
                "initial background",
                "must be finite and >= 0",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitOptions {
    pub initial: Option<ScanParams>,
    pub coupling: CouplingModel,
    pub lm: LmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub params: ScanParams,
    /// Post-lens waist width at the best lens position, mm.
    pub waist_prime: f64,
    /// Lens-to-post-lens-waist distance at the best lens position, mm.
    pub z_prime: f64,
    /// Source-waist-to-lens distance at the best lens position, mm.
    pub z: f64,
    /// Lens position maximizing the fitted rate, mm.
    pub peak_position: f64,
    pub chi2: f64,
    pub dof: usize,
    /// Covariance of (ω₀, s₀, A, B) in natural units.
    pub covariance: [[f64; 4]; 4],
    pub report: LmReport,
}

impl FitResult {
    pub fn reduced_chi2(&self) -> f64 {
        self.chi2 / self.dof as f64
    }
}

/// Deterministic starting point: `B = min R`, `A = max R - min R`, `s₀ = 0`,
/// and `ω₀` chosen on a log grid so that the background-subtracted model
/// matches the centroid and RMS width of the background-subtracted scan.
pub fn initial_guess(dataset: &ScanDataset, geometry: &ExperimentGeometry) -> Result<ScanParams> {
    let samples = dataset.samples();
    let positions: Vec<f64> = samples.iter().map(|s| s.lens_position).collect();
    let rates: Vec<f64> = samples.iter().map(|s| s.count_rate).collect();
    let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let max = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(Error::invalid("scan", "count rates are constant"));
    }
    let (centroid, spread) = moments(&positions, &rates);

    let mut best: Option<(f64, f64)> = None;
    for waist in crate::golden::geometric_grid(1e-3, 1.0, 121) {
        let source = GaussianBeamState::new(waist, 0.0, geometry.wavelength)?;
        let model: Vec<f64> = positions
            .iter()
            .map(|&x| coupling_at(geometry, &source, x, CouplingModel::FlatPhase))
            .collect::<Result<_>>()?;
        let model_max = model.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let model_min = model.iter().copied().fold(f64::INFINITY, f64::min);
        if !(model_max > model_min) {
            continue;
        }
        let (c, s) = moments(&positions, &model);
        let mismatch = (c - centroid).powi(2) + (s - spread).powi(2);
        if best.is_none_or(|(_, m)| mismatch < m) {
            best = Some((waist, mismatch));
        }
    }
    let (waist, _) =
        best.ok_or_else(|| Error::invalid("scan", "no starting waist reproduces the scan shape"))?;
    Ok(ScanParams {
        waist,
        waist_position: 0.0,
        amplitude: max - min,
        background: min,
    })
}

/// Centroid and RMS width of `weights - min(weights)` over `positions`.
fn moments(positions: &[f64], weights: &[f64]) -> (f64, f64) {
    let floor = weights.iter().copied().fold(f64::INFINITY, f64::min);
    let total: f64 = weights.iter().map(|w| w - floor).sum();
    let centroid = positions
        .iter()
        .zip(weights)
        .map(|(x, w)| x * (w - floor))
        .sum::<f64>()
        / total;
    let var = positions
        .iter()
        .zip(weights)
        .map(|(x, w)| (x - centroid).powi(2) * (w - floor))
        .sum::<f64>()
        / total;
    (centroid, var.sqrt())
}

/// Fits `(ω₀, s₀, A, B)` to a scan and derives the post-lens waist at the
/// fitted peak.
pub fn fit_scan(
    dataset: &ScanDataset,
    geometry: &ExperimentGeometry,
    options: &FitOptions,
) -> Result<FitResult> {
    geometry.validate()?;
    let samples = dataset.samples();
    if samples.len() < MIN_SAMPLES {
        return Err(Error::invalid(
            "scan",
            format!("{} samples, need at least {MIN_SAMPLES}", samples.len()),
        ));
    }
    let peak_index = samples
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.count_rate.total_cmp(&b.1.count_rate))
        .map(|(i, _)| i)
        .expect("non-empty");
    if peak_index == 0 || peak_index + 1 == samples.len() {
        return Err(Error::PeakNotInterior {
            index: peak_index,
            len: samples.len(),
        });
    }
    for s in samples {
        geometry.lens_at(s.lens_position)?;
    }

    let initial = match options.initial {
        Some(p) => p,
        None => initial_guess(dataset, geometry)?,
    };
    initial.validate()?;

    let sigmas: Vec<f64> = (0..samples.len()).map(|i| dataset.sigma(i)).collect();
    let coupling = options.coupling;
    let residuals = |theta: &[f64]| -> Option<Vec<f64>> {
        let p = ScanParams::from_internal(theta);
        let source = p.source(geometry.wavelength).ok()?;
        samples
            .iter()
            .zip(&sigmas)
            .map(|(s, sigma)| {
                predict_count_rate_with(
                    geometry,
                    &source,
                    s.lens_position,
                    p.amplitude,
                    p.background,
                    coupling,
                )
                .ok()
                .map(|model| (model - s.count_rate) / sigma)
            })
            .collect()
    };
    let solution = levenberg_marquardt(residuals, &initial.to_internal(), &options.lm)?;
    let params = ScanParams::from_internal(&solution.params);
    let source = params.source(geometry.wavelength)?;

    // Natural-unit covariance: J = diag(dp/dθ).
    let scale = [
        params.waist,
        1.0,
        params.amplitude,
        params.background + BACKGROUND_EPSILON,
    ];
    let jac = Matrix4::from_diagonal(&nalgebra::Vector4::from(scale));
    let internal: Matrix4<f64> = fixed_covariance(&solution.covariance);
    let natural = jac * internal * jac;
    let mut covariance = [[0.0; 4]; 4];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = 0.5 * (natural[(i, j)] + natural[(j, i)]);
        }
    }

    let first = samples[0].lens_position;
    let last = samples[samples.len() - 1].lens_position;
    let peak_position = model_peak(geometry, &source, coupling, first, last)?;
    let after = lens_transform(&source, &geometry.lens_at(peak_position)?)?;

    Ok(FitResult {
        params,
        waist_prime: after.waist_width(),
        z_prime: after.waist_position() - peak_position,
        z: peak_position - params.waist_position,
        peak_position,
        chi2: solution.chi2,
        dof: samples.len() - 4,
        covariance,
        report: solution.report,
    })
}

fn fixed_covariance(m: &DMatrix<f64>) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| m[(i, j)])
}

/// Lens position in `[first, last]` maximizing `Q`, by a fine scan followed
/// by golden-section refinement. `Q` is bimodal when the narrowest beam at
/// the detector plane is smaller than `ω_d`, so the scan spacing stays well
/// below the separation of the two maxima.
fn model_peak(
    geometry: &ExperimentGeometry,
    source: &GaussianBeamState,
    coupling: CouplingModel,
    first: f64,
    last: f64,
) -> Result<f64> {
    let n = 2401;
    let grid: Vec<f64> = (0..n)
        .map(|i| first + (last - first) * i as f64 / (n - 1) as f64)
        .collect();
    let values: Vec<f64> = grid
        .iter()
        .map(|&x| coupling_at(geometry, source, x, coupling))
        .collect::<Result<_>>()?;
    let (lo, hi) = interior_bracket(&grid, &values).unwrap_or_else(|| {
        let best = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        (grid[best.saturating_sub(1)], grid[(best + 1).min(n - 1)])
    });
    let (x, _) = golden_section_max(
        |x| coupling_at(geometry, source, x, coupling).unwrap_or(f64::NEG_INFINITY),
        lo,
        hi,
        PEAK_TOLERANCE,
    );
    Ok(x)
}
