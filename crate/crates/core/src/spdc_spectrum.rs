//! Two-photon amplitudes `C_{p1,p2}^{l1,l2}` of down-converted pairs
//! projected onto Laguerre-Gaussian signal/idler modes, for a fundamental
//! Gaussian pump and degenerate photons at twice the pump wavelength.
//!
//! Two kernels are provided, both models rather than exact phase-matching
//! calculations:
//!
//! * [`Kernel::Thin`]: collinear thin-crystal limit, the position-space
//!   overlap `∬ E_p(ρ) u_s*(ρ,φ) u_i*(ρ,φ) ρ dρ dφ` with unit-power pump and
//!   modes. For `p1 = p2 = 0` it has the closed form
//!   `|C_{l,-l}| / |C_{0,0}| = r^{|l|}` with `r = 2 / (2 + ω₀²/ω_p²)`.
//! * [`Kernel::FiniteLength`]: momentum-space overlap with the two-photon
//!   function `exp(-ω_p²|q_s+q_i|²/4) · exp(-α L |q_s-q_i|²/(4 k_p))`, the
//!   second factor being a Gaussian stand-in for the phase-matching sinc.
//!   It reduces to the thin kernel as `L → 0`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure_positive, Error, Result};
use crate::golden::{geometric_grid, golden_section_max, interior_bracket};
use crate::modes_coupling::LGModeSpec;
use crate::quadrature::{integrate, QuadratureConfig};
use crate::special::bessel_i_scaled;

/// Entries below this fraction of the largest `|C|` are stored as exact zeros.
pub const ZERO_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PumpBeam {
    waist_width: f64,
    wavelength: f64,
}

impl PumpBeam {
    pub fn new(waist_width: f64, wavelength: f64) -> Result<Self> {
        ensure_positive("pump waist_width", waist_width)?;
        ensure_positive("pump wavelength", wavelength)?;
        Ok(Self {
            waist_width,
            wavelength,
        })
    }

    pub fn waist_width(&self) -> f64 {
        self.waist_width
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Degenerate signal/idler wavelength, `2 λ_p`.
    pub fn down_converted_wavelength(&self) -> f64 {
        2.0 * self.wavelength
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Unit-power Gaussian pump field at radius `rho`.
    fn field(&self, rho: f64) -> f64 {
        let s = rho / self.waist_width;
        (2.0 / PI).sqrt() / self.waist_width * (-s * s).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrystalConfig {
    /// Crystal length in mm.
    pub length: f64,
    /// Width constant of the Gaussian approximation to the phase-matching sinc.
    pub gaussian_sinc_factor: f64,
}

impl Default for CrystalConfig {
    fn default() -> Self {
        Self {
            length: 1.0,
            gaussian_sinc_factor: 0.455,
        }
    }
}

impl CrystalConfig {
    pub fn new(length: f64, gaussian_sinc_factor: f64) -> Result<Self> {
        let config = Self {
            length,
            gaussian_sinc_factor,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        ensure_positive("crystal length", self.length)?;
        ensure_positive("gaussian_sinc_factor", self.gaussian_sinc_factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Kernel {
    Thin,
    FiniteLength(CrystalConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ModePair {
    pub l1: i32,
    pub p1: u32,
    pub l2: i32,
    pub p2: u32,
}

impl ModePair {
    pub const FUNDAMENTAL: ModePair = ModePair {
        l1: 0,
        p1: 0,
        l2: 0,
        p2: 0,
    };
}

fn check_pair(signal: &LGModeSpec, idler: &LGModeSpec) -> Result<()> {
    if signal.waist_width() != idler.waist_width() {
        return Err(Error::invalid(
            "idler waist",
            format!(
                "{} differs from signal waist {}",
                idler.waist_width(),
                signal.waist_width()
            ),
        ));
    }
    if signal.wavelength() != idler.wavelength() {
        return Err(Error::invalid(
            "idler wavelength",
            format!(
                "{} differs from signal wavelength {}",
                idler.wavelength(),
                signal.wavelength()
            ),
        ));
    }
    Ok(())
}

/// Thin-crystal amplitude.
pub fn spdc_amplitude_thin(
    pump: &PumpBeam,
    signal: &LGModeSpec,
    idler: &LGModeSpec,
) -> Result<Complex64> {
    spdc_amplitude_thin_with(pump, signal, idler, &QuadratureConfig::default())
}

pub fn spdc_amplitude_thin_with(
    pump: &PumpBeam,
    signal: &LGModeSpec,
    idler: &LGModeSpec,
    config: &QuadratureConfig,
) -> Result<Complex64> {
    check_pair(signal, idler)?;
    if signal.winding_number + idler.winding_number != 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    // Radial parts are real and the azimuthal phases cancel, leaving 2π.
    let r_max = config.truncation_widths * signal.extent().max(idler.extent());
    let breaks: Vec<f64> = [0.5, 1.0, 2.0, 4.0]
        .iter()
        .flat_map(|&k| [k * pump.waist_width, k * signal.extent()])
        .collect();
    let radial = integrate(
        |rho| {
            Complex64::new(
                pump.field(rho) * (signal.radial(rho) * idler.radial(rho)) * rho,
                0.0,
            )
        },
        0.0,
        r_max,
        &breaks,
        config,
    )?;
    Ok(radial.value * (2.0 * PI))
}

fn finite_inner_config() -> QuadratureConfig {
    QuadratureConfig {
        abs_tol: 1e-16,
        rel_tol: 1e-11,
        max_subdivisions: 4000,
        truncation_widths: 8.0,
    }
}

fn finite_outer_config() -> QuadratureConfig {
    QuadratureConfig {
        abs_tol: 1e-14,
        rel_tol: 1e-10,
        max_subdivisions: 4000,
        truncation_widths: 8.0,
    }
}

/// Finite-length amplitude by quadrature in transverse momentum.
///
/// The LG modes transform to LG modes of waist `2/ω₀` with phase
/// `(-i)^{2p+|l|}`. Writing both momenta in polar form, the azimuthal
/// integrals are exact: the overall rotation enforces `l1 + l2 = 0` and the
/// relative angle yields `2π I_l(-2 B q₁ q₂)`, leaving a 2D radial integral.
pub fn spdc_amplitude_finite_length(
    pump: &PumpBeam,
    signal: &LGModeSpec,
    idler: &LGModeSpec,
    crystal: &CrystalConfig,
) -> Result<Complex64> {
    check_pair(signal, idler)?;
    crystal.validate()?;
    if signal.winding_number + idler.winding_number != 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    // Canonical order; the kernel is symmetric under signal/idler exchange.
    let (a, b) = if (signal.winding_number, signal.radial_index)
        <= (idler.winding_number, idler.radial_index)
    {
        (signal, idler)
    } else {
        (idler, signal)
    };

    let q_waist = 2.0 / a.waist_width();
    let qa = LGModeSpec::new(a.winding_number, a.radial_index, q_waist, a.wavelength())?;
    let qb = LGModeSpec::new(b.winding_number, b.radial_index, q_waist, b.wavelength())?;
    let order = a.abs_l();

    let quarter_wp2 = 0.25 * pump.waist_width * pump.waist_width;
    let beta = crystal.gaussian_sinc_factor * crystal.length / (4.0 * pump.wavenumber());
    let sum_coeff = quarter_wp2 + beta;
    let cross_coeff = quarter_wp2 - beta;

    let inner_cfg = finite_inner_config();
    let outer_cfg = finite_outer_config();
    let q_max = outer_cfg.truncation_widths * qa.extent().max(qb.extent());
    let ridge = 1.0 / sum_coeff.sqrt();

    // exp(-A(q1²+q2²)) I_l(2|B| q1 q2), with the Bessel exponential folded in.
    let angular = |q1: f64, q2: f64| {
        let x = 2.0 * cross_coeff.abs() * q1 * q2;
        let exponent =
            -sum_coeff * (q1 - q2) * (q1 - q2) - 2.0 * (sum_coeff - cross_coeff.abs()) * q1 * q2;
        exponent.exp() * bessel_i_scaled(order, x)
    };

    let mut inner_error = None;
    let outer = integrate(
        |q1| {
            let ra = qa.radial(q1);
            if ra == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let breaks: Vec<f64> = [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0]
                .iter()
                .map(|k| q1 + k * ridge)
                .collect();
            match integrate(
                |q2| Complex64::new(angular(q1, q2) * qb.radial(q2) * q2, 0.0),
                0.0,
                q_max,
                &breaks,
                &inner_cfg,
            ) {
                Ok(r) => r.value * (ra * q1),
                Err(e) => {
                    inner_error.get_or_insert(e);
                    Complex64::new(0.0, 0.0)
                }
            }
        },
        0.0,
        q_max,
        &[],
        &outer_cfg,
    )?;
    if let Some(e) = inner_error {
        return Err(e);
    }

    // (-1)^{p1+p2+|l|} from the conjugated transform phases, and the sign of
    // the Bessel argument -2 B q1 q2.
    let mut sign = if (a.radial_index + b.radial_index + order) % 2 == 0 {
        1.0
    } else {
        -1.0
    };
    if cross_coeff > 0.0 && order % 2 == 1 {
        sign = -sign;
    }
    // (1/2π)·(ω_p/√(2π)) from the pump transform, 4π² from the angles.
    let prefactor = (2.0 * PI).sqrt() * pump.waist_width;
    Ok(outer.value * (prefactor * sign))
}

pub fn spdc_amplitude(
    pump: &PumpBeam,
    signal: &LGModeSpec,
    idler: &LGModeSpec,
    kernel: &Kernel,
) -> Result<Complex64> {
    match kernel {
        Kernel::Thin => spdc_amplitude_thin(pump, signal, idler),
        Kernel::FiniteLength(crystal) => spdc_amplitude_finite_length(pump, signal, idler, crystal),
    }
}

/// Geometric ratio of the thin-kernel spiral spectrum, `2 / (2 + ω₀²/ω_p²)`.
pub fn thin_spiral_ratio(basis_waist: f64, pump_waist: f64) -> f64 {
    2.0 / (2.0 + (basis_waist / pump_waist).powi(2))
}

/// Normalized fundamental weight of the full thin-kernel `p = 0` spectrum,
/// `(1 - r²) / (1 + r²)`.
pub fn thin_fundamental_weight(ratio: f64) -> f64 {
    let r2 = ratio * ratio;
    (1.0 - r2) / (1.0 + r2)
}

/// Two-photon amplitudes over a truncated mode set.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    pub entries: BTreeMap<ModePair, Complex64>,
    pub basis_waist: f64,
    pub pump: PumpBeam,
    pub normalized: bool,
    /// Un-normalized `C_{0,0}^{0,0}`.
    pub fundamental_amplitude: Complex64,
    /// Fraction of the full spectrum's weight lost to the `|l| <= l_max`
    /// cutoff, when known in closed form (thin kernel, `p_max = 0`).
    pub truncation_weight: Option<f64>,
}

impl ModeSpectrum {
    pub fn probability(&self, pair: &ModePair) -> f64 {
        self.entries.get(pair).map_or(0.0, |c| c.norm_sqr())
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.values().map(|c| c.norm_sqr()).sum()
    }

    /// Normalized weight of `|LG_0^0; LG_0^0⟩` within the truncated set.
    pub fn fundamental_weight(&self) -> f64 {
        self.probability(&ModePair::FUNDAMENTAL)
    }

    /// Fundamental weight rescaled to the untruncated spectrum, when the
    /// truncation weight is known.
    pub fn fundamental_weight_corrected(&self) -> Option<f64> {
        self.truncation_weight
            .map(|t| self.fundamental_weight() * (1.0 - t))
    }

    /// Nonzero entries by descending `|C|²`, ties by mode indices.
    pub fn sorted_entries(&self) -> Vec<(ModePair, Complex64)> {
        let mut v: Vec<_> = self
            .entries
            .iter()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(k, c)| (*k, *c))
            .collect();
        v.sort_by(|a, b| {
            b.1.norm_sqr()
                .total_cmp(&a.1.norm_sqr())
                .then(a.0.cmp(&b.0))
        });
        v
    }
}

/// Normalized spectrum over `|l| <= l_max`, `p <= p_max` for both photons.
///
/// Entries are evaluated in parallel; each is an independent deterministic
/// quadrature and the normalization sums in key order, so the result does
/// not depend on the thread count.
pub fn build_spectrum(
    pump: &PumpBeam,
    basis_waist: f64,
    l_max: u32,
    p_max: u32,
    kernel: &Kernel,
) -> Result<ModeSpectrum> {
    ensure_positive("basis waist", basis_waist)?;
    let l_max = i32::try_from(l_max).map_err(|_| Error::invalid("l_max", "too large"))?;
    let wavelength = pump.down_converted_wavelength();

    let mut pairs = Vec::new();
    for l1 in -l_max..=l_max {
        for p1 in 0..=p_max {
            for l2 in -l_max..=l_max {
                for p2 in 0..=p_max {
                    pairs.push(ModePair { l1, p1, l2, p2 });
                }
            }
        }
    }

    let amplitudes: Vec<Complex64> = pairs
        .par_iter()
        .map(|pair| {
            let s = LGModeSpec::new(pair.l1, pair.p1, basis_waist, wavelength)?;
            let i = LGModeSpec::new(pair.l2, pair.p2, basis_waist, wavelength)?;
            spdc_amplitude(pump, &s, &i, kernel)
        })
        .collect::<Result<_>>()?;

    let largest = amplitudes.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut entries: BTreeMap<ModePair, Complex64> = pairs
        .into_iter()
        .zip(amplitudes)
        .map(|(pair, c)| {
            let c = if c.norm() < ZERO_THRESHOLD * largest {
                Complex64::new(0.0, 0.0)
            } else {
                c
            };
            (pair, c)
        })
        .collect();

    let fundamental_amplitude = entries
        .get(&ModePair::FUNDAMENTAL)
        .copied()
        .unwrap_or_default();
    let total: f64 = entries.values().map(|c| c.norm_sqr()).sum();
    if !(total > 0.0) {
        return Err(Error::invalid("spectrum", "all amplitudes vanish"));
    }
    let scale = total.sqrt().recip();
    for c in entries.values_mut() {
        *c *= scale;
    }

    let truncation_weight = match kernel {
        Kernel::Thin if p_max == 0 => {
            let r = thin_spiral_ratio(basis_waist, pump.waist_width);
            Some(2.0 * r.powi(2 * (l_max + 1)) / (1.0 + r * r))
        }
        _ => None,
    };

    Ok(ModeSpectrum {
        entries,
        basis_waist,
        pump: *pump,
        normalized: true,
        fundamental_amplitude,
        truncation_weight,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalWaist {
    pub waist: f64,
    pub amplitude: f64,
}

/// Points in the bracketing pre-scan of [`optimal_signal_waist`].
pub const OPTIMUM_SCAN_POINTS: usize = 41;
/// Golden-section bracket width at termination, mm.
pub const OPTIMUM_TOLERANCE: f64 = 1e-5;

/// `|C_{0,0}^{0,0}|` as a function of the basis waist.
pub fn fundamental_amplitude(pump: &PumpBeam, basis_waist: f64, kernel: &Kernel) -> Result<f64> {
    let mode = LGModeSpec::new(0, 0, basis_waist, pump.down_converted_wavelength())?;
    Ok(spdc_amplitude(pump, &mode, &mode, kernel)?.norm())
}

/// Basis waist maximizing `|C_{0,0}^{0,0}|` within `[lower, upper]` mm.
///
/// A geometric pre-scan must find its largest value strictly inside the
/// interval; golden-section search then refines within the neighbouring
/// scan points.
pub fn optimal_signal_waist(
    pump: &PumpBeam,
    kernel: &Kernel,
    lower: f64,
    upper: f64,
) -> Result<OptimalWaist> {
    ensure_positive("search lower bound", lower)?;
    ensure_positive("search upper bound", upper)?;
    if lower >= upper {
        return Err(Error::invalid(
            "search interval",
            format!("[{lower}, {upper}] is not ordered"),
        ));
    }
    let grid = geometric_grid(lower, upper, OPTIMUM_SCAN_POINTS);
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&w| fundamental_amplitude(pump, w, kernel))
        .collect::<Result<_>>()?;
    let (lo, hi) =
        interior_bracket(&grid, &values).ok_or(Error::NoInteriorMaximum { lower, upper })?;

    let mut failure = None;
    let (waist, amplitude) = golden_section_max(
        |w| match fundamental_amplitude(pump, w, kernel) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        lo,
        hi,
        OPTIMUM_TOLERANCE,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(OptimalWaist { waist, amplitude }),
    }
}

/// `(ω₀/ω_p, ω₀/ω_p < threshold)`; small ratios put signal and idler in the
/// regime where Hermite-Gaussian indices are approximately conserved.
pub fn hg_condition(basis_waist: f64, pump_waist: f64, threshold: f64) -> Result<(f64, bool)> {
    ensure_positive("basis waist", basis_waist)?;
    ensure_positive("pump waist", pump_waist)?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(
            "threshold",
            format!("must lie in (0, 1), got {threshold}"),
        ));
    }
    let ratio = basis_waist / pump_waist;
    Ok((ratio, ratio < threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const PUMP_LAMBDA: f64 = 3.511e-4;

    fn pump(w: f64) -> PumpBeam {
        PumpBeam::new(w, PUMP_LAMBDA).unwrap()
    }

    fn mode(l: i32, p: u32, w: f64) -> LGModeSpec {
        LGModeSpec::new(l, p, w, 2.0 * PUMP_LAMBDA).unwrap()
    }

    /// Closed-form thin-kernel C_{0,0}: √(2/π) · 2ω_p / (2ω_p² + ω₀²).
    fn thin_c00(w0: f64, wp: f64) -> f64 {
        (2.0 / PI).sqrt() * 2.0 * wp / (2.0 * wp * wp + w0 * w0)
    }

    /// Finite-kernel C_{0,0} from the Gaussian integral in (q_s ± q_i)/√2 coordinates.
    fn finite_c00(w0: f64, wp: f64, crystal: &CrystalConfig) -> f64 {
        let beta = crystal.gaussian_sinc_factor * crystal.length / (4.0 * 2.0 * PI / PUMP_LAMBDA);
        let sum = wp * wp / 2.0 + w0 * w0 / 4.0;
        let diff = 2.0 * beta + w0 * w0 / 4.0;
        wp / (2.0 * PI).sqrt() / (2.0 * PI) * (w0 * w0 / (2.0 * PI)) * PI * PI / (sum * diff)
    }

    #[test]
    fn thin_selection_rule_and_closed_form() {
        let p = pump(0.5);
        let c = spdc_amplitude_thin(&p, &mode(1, 0, 0.1), &mode(1, 0, 0.1)).unwrap();
        assert_eq!(c.norm(), 0.0);
        let c00 = spdc_amplitude_thin(&p, &mode(0, 0, 0.1), &mode(0, 0, 0.1)).unwrap();
        assert_relative_eq!(c00.re, thin_c00(0.1, 0.5), max_relative = 1e-10);
    }

    #[test]
    fn thin_closed_form_at_extreme_waist_ratios() {
        for (w0, wp) in [(0.5, 0.002), (0.005, 2.0)] {
            let c00 = spdc_amplitude_thin(&pump(wp), &mode(0, 0, w0), &mode(0, 0, w0)).unwrap();
            // small amplitudes are bounded by the absolute quadrature tolerance
            assert!(
                (c00.re - thin_c00(w0, wp)).abs() < 1e-8,
                "{w0} {wp}: {}",
                c00.re
            );
        }
    }

    #[test]
    fn thin_spiral_law() {
        for &ratio in &[0.1, 0.5, 1.0, 2.0] {
            let wp = 0.4;
            let w0 = ratio * wp;
            let p = pump(wp);
            let c00 = spdc_amplitude_thin(&p, &mode(0, 0, w0), &mode(0, 0, w0))
                .unwrap()
                .norm();
            let r = thin_spiral_ratio(w0, wp);
            for l in 1..=5 {
                let cl = spdc_amplitude_thin(&p, &mode(l, 0, w0), &mode(-l, 0, w0))
                    .unwrap()
                    .norm();
                assert!(
                    (cl / c00 - r.powi(l)).abs() < 1e-6,
                    "ratio {ratio} l {l}: {} vs {}",
                    cl / c00,
                    r.powi(l)
                );
            }
        }
    }

    #[test]
    fn mismatched_modes_rejected() {
        let p = pump(0.5);
        assert!(spdc_amplitude_thin(&p, &mode(0, 0, 0.1), &mode(0, 0, 0.2)).is_err());
        let other = LGModeSpec::new(0, 0, 0.1, 8e-4).unwrap();
        assert!(spdc_amplitude_thin(&p, &mode(0, 0, 0.1), &other).is_err());
        let bad = CrystalConfig {
            length: -1.0,
            gaussian_sinc_factor: 0.455,
        };
        assert!(
            spdc_amplitude_finite_length(&p, &mode(0, 0, 0.1), &mode(0, 0, 0.1), &bad).is_err()
        );
    }

    #[test]
    fn finite_fundamental_matches_gaussian_integral() {
        let crystal = CrystalConfig::default();
        for &w0 in &[0.005, 0.03, 0.0710, 0.2, 0.5] {
            let got = spdc_amplitude_finite_length(
                &pump(0.5),
                &mode(0, 0, w0),
                &mode(0, 0, w0),
                &crystal,
            )
            .unwrap();
            assert_relative_eq!(got.re, finite_c00(w0, 0.5, &crystal), max_relative = 1e-7);
            assert!(got.im.abs() < 1e-12);
        }
    }

    #[test]
    fn finite_reduces_to_thin() {
        let crystal = CrystalConfig::new(1e-6, 0.455).unwrap();
        let p = pump(0.3);
        for l in 0..=2 {
            let (s, i) = (mode(l, 0, 0.1), mode(-l, 0, 0.1));
            let thin = spdc_amplitude_thin(&p, &s, &i).unwrap();
            let finite = spdc_amplitude_finite_length(&p, &s, &i, &crystal).unwrap();
            assert!(
                (finite - thin).norm() <= 1e-4 * thin.norm(),
                "l={l}: {finite} vs {thin}"
            );
        }
        // radial orders as well
        let (s, i) = (mode(1, 1, 0.1), mode(-1, 0, 0.1));
        let thin = spdc_amplitude_thin(&p, &s, &i).unwrap();
        let finite = spdc_amplitude_finite_length(&p, &s, &i, &crystal).unwrap();
        assert!(
            (finite - thin).norm() <= 1e-4 * thin.norm(),
            "{finite} vs {thin}"
        );
    }

    #[test]
    fn exchange_symmetry() {
        let p = pump(0.5);
        let crystal = CrystalConfig::default();
        let (s, i) = (mode(2, 1, 0.08), mode(-2, 0, 0.08));
        let a = spdc_amplitude_thin(&p, &s, &i).unwrap();
        let b = spdc_amplitude_thin(&p, &i, &s).unwrap();
        assert!((a - b).norm() <= 1e-12 * a.norm());
        let a = spdc_amplitude_finite_length(&p, &s, &i, &crystal).unwrap();
        let b = spdc_amplitude_finite_length(&p, &i, &s, &crystal).unwrap();
        assert!((a - b).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn single_entry_spectrum() {
        let s = build_spectrum(&pump(0.5), 0.5, 0, 0, &Kernel::Thin).unwrap();
        assert_eq!(s.entries.len(), 1);
        assert_relative_eq!(s.fundamental_weight(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn thin_spectrum_tail_corrected_weight() {
        let s = build_spectrum(&pump(0.5), 0.5, 8, 0, &Kernel::Thin).unwrap();
        assert!((s.total_weight() - 1.0).abs() < 1e-9);
        let corrected = s.fundamental_weight_corrected().unwrap();
        assert!((corrected - 5.0 / 13.0).abs() < 1e-6, "{corrected}");
        for (pair, c) in &s.entries {
            if pair.l1 + pair.l2 != 0 {
                assert_eq!(c.norm(), 0.0);
            }
        }
    }

    #[test]
    fn fundamental_weight_grows_as_pump_narrows() {
        let weights: Vec<f64> = [1.0, 0.5, 0.2]
            .iter()
            .map(|&wp| {
                build_spectrum(&pump(wp), 0.024, 6, 0, &Kernel::Thin)
                    .unwrap()
                    .fundamental_weight_corrected()
                    .unwrap()
            })
            .collect();
        assert!(
            weights[0] < weights[1] && weights[1] < weights[2],
            "{weights:?}"
        );
        for (&wp, w) in [1.0, 0.5, 0.2].iter().zip(&weights) {
            let closed = thin_fundamental_weight(thin_spiral_ratio(0.024, wp));
            assert!((w - closed).abs() < 1e-6);
        }
    }

    #[test]
    fn spectrum_with_radial_orders_is_normalized() {
        let s = build_spectrum(&pump(0.5), 0.2, 2, 1, &Kernel::Thin).unwrap();
        assert_eq!(s.entries.len(), 100);
        assert!((s.total_weight() - 1.0).abs() < 1e-9);
        assert_eq!(s.truncation_weight, None);
        let sorted = s.sorted_entries();
        assert!(sorted
            .windows(2)
            .all(|w| w[0].1.norm_sqr() >= w[1].1.norm_sqr()));
    }

    #[test]
    fn thin_kernel_has_no_optimum() {
        let err = optimal_signal_waist(&pump(0.5), &Kernel::Thin, 0.005, 0.5).unwrap_err();
        assert!(matches!(err, Error::NoInteriorMaximum { .. }));
    }

    #[test]
    fn finite_kernel_optimum() {
        let kernel = Kernel::FiniteLength(CrystalConfig::default());
        let p = pump(0.5);
        let found = optimal_signal_waist(&p, &kernel, 0.005, 0.5).unwrap();
        assert!(found.waist > 0.005 && found.waist < 0.5);
        // stationary point of ω₀² / ((ω_p²/2 + ω₀²/4)(2β + ω₀²/4))
        let beta = 0.455 / (4.0 * 2.0 * PI / PUMP_LAMBDA);
        let analytic = (4.0 * (0.125 * 2.0 * beta).sqrt()).sqrt();
        assert!(
            (found.waist - analytic).abs() < 1e-4,
            "{} vs {analytic}",
            found.waist
        );

        let narrowed =
            optimal_signal_waist(&p, &kernel, found.waist * 0.7, found.waist * 1.4).unwrap();
        assert!((narrowed.waist - found.waist).abs() < 1e-4);
    }

    #[test]
    fn hg_condition_examples() {
        let (ratio, ok) = hg_condition(0.024, 0.5, 0.1).unwrap();
        assert_relative_eq!(ratio, 0.048, max_relative = 1e-14);
        assert!(ok);
        assert_eq!(hg_condition(0.3, 0.3, 0.1).unwrap(), (1.0, false));
        let (ratio, ok) = hg_condition(0.083, 0.5, 0.1).unwrap();
        assert_relative_eq!(ratio, 0.166, max_relative = 1e-14);
        assert!(!ok);
        assert!(hg_condition(0.1, 0.5, 1.5).is_err());
    }
}
