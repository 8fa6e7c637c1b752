//! Laguerre-Gaussian modes, the single-mode fiber acceptance field, and the
//! normalized overlap (mode-matching) efficiency between transverse fields.
//!
//! Overlaps are evaluated in polar coordinates. Every field here has the
//! separable form `R(ρ)·exp(i·m·φ)`, so the azimuthal integral is done
//! exactly (it is `2π` when the orders agree and zero otherwise) and only
//! the radial integral goes through adaptive quadrature.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{ensure_positive, Error, Result};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::special::{associated_laguerre, factorial_ratio};

/// Efficiencies above `1 + EFFICIENCY_SLACK` are reported as errors rather than clamped.
pub const EFFICIENCY_SLACK: f64 = 1e-9;

/// Laguerre-Gaussian mode `LG_p^l` at its waist plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LGModeSpec {
    pub winding_number: i32,
    pub radial_index: u32,
    waist_width: f64,
    wavelength: f64,
}

impl LGModeSpec {
    pub fn new(
        winding_number: i32,
        radial_index: u32,
        waist_width: f64,
        wavelength: f64,
    ) -> Result<Self> {
        ensure_positive("waist_width", waist_width)?;
        ensure_positive("wavelength", wavelength)?;
        Ok(Self {
            winding_number,
            radial_index,
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

    pub fn abs_l(&self) -> u32 {
        self.winding_number.unsigned_abs()
    }

    /// Radius scale that grows with mode order; used to size quadrature domains.
    pub fn extent(&self) -> f64 {
        self.waist_width * f64::from(2 * self.radial_index + self.abs_l() + 1).sqrt()
    }

    /// `√(2 p! / (π (p+|l|)!)) / ω₀`.
    pub fn normalization(&self) -> f64 {
        (2.0 * factorial_ratio(self.radial_index, self.abs_l()) / PI).sqrt() / self.waist_width
    }

    /// Real radial profile `R(ρ)` so that the full field is `R(ρ)·exp(i·l·φ)`.
    pub fn radial(&self, rho: f64) -> f64 {
        let m = self.abs_l();
        let s = rho / self.waist_width;
        let x = 2.0 * s * s;
        self.normalization()
            * (2f64.sqrt() * s).powi(m as i32)
            * associated_laguerre(self.radial_index, f64::from(m), x)
            * (-s * s).exp()
    }
}

/// Unit-power LG field at the waist plane.
pub fn lg_amplitude(mode: &LGModeSpec, rho: f64, phi: f64) -> Complex64 {
    Complex64::from_polar(1.0, f64::from(mode.winding_number) * phi) * mode.radial(rho)
}

/// Gaussian acceptance mode of a single-mode fiber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberMode {
    mode_field_radius: f64,
    amplitude_at_center: f64,
}

impl FiberMode {
    pub fn new(mode_field_radius: f64, amplitude_at_center: f64) -> Result<Self> {
        ensure_positive("mode_field_radius", mode_field_radius)?;
        ensure_positive("amplitude_at_center", amplitude_at_center)?;
        Ok(Self {
            mode_field_radius,
            amplitude_at_center,
        })
    }

    pub fn mode_field_radius(&self) -> f64 {
        self.mode_field_radius
    }

    pub fn mode_field_diameter(&self) -> f64 {
        2.0 * self.mode_field_radius
    }

    pub fn amplitude_at_center(&self) -> f64 {
        self.amplitude_at_center
    }
}

/// `E(0)·exp(-ρ²/ω_f²)`.
pub fn fiber_field(fiber: &FiberMode, rho: f64) -> f64 {
    let s = rho / fiber.mode_field_radius;
    fiber.amplitude_at_center * (-s * s).exp()
}

type Profile = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// A transverse field `R(ρ)·exp(i·m·φ)` with a known radial extent.
#[derive(Clone)]
pub struct RadialField {
    order: i32,
    extent: f64,
    profile: Profile,
}

impl fmt::Debug for RadialField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialField")
            .field("order", &self.order)
            .field("extent", &self.extent)
            .finish_non_exhaustive()
    }
}

impl RadialField {
    /// Arbitrary radial profile of azimuthal order `order`; `extent` is the
    /// width beyond which the profile is negligible after `truncation_widths`
    /// multiples.
    pub fn custom<F>(order: i32, extent: f64, profile: F) -> Result<Self>
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        ensure_positive("extent", extent)?;
        Ok(Self {
            order,
            extent,
            profile: Arc::new(profile),
        })
    }

    /// Flat-phase Gaussian `exp(-ρ²/w²)`.
    pub fn gaussian(width: f64) -> Result<Self> {
        Self::custom(0, width, move |rho| {
            let s = rho / width;
            Complex64::new((-s * s).exp(), 0.0)
        })
    }

    /// Gaussian with a spherical wavefront `exp(-ρ²/w² - i k ρ² / (2R))`,
    /// given the inverse curvature radius `1/R`.
    pub fn curved_gaussian(width: f64, inverse_curvature: f64, wavelength: f64) -> Result<Self> {
        ensure_positive("wavelength", wavelength)?;
        let k = 2.0 * PI / wavelength;
        Self::custom(0, width, move |rho| {
            let s = rho / width;
            Complex64::new(-s * s, -0.5 * k * rho * rho * inverse_curvature).exp()
        })
    }

    pub fn lg(mode: LGModeSpec) -> Self {
        Self {
            order: mode.winding_number,
            extent: mode.extent(),
            profile: Arc::new(move |rho| Complex64::new(mode.radial(rho), 0.0)),
        }
    }

    pub fn fiber(fiber: FiberMode) -> Self {
        Self {
            order: 0,
            extent: fiber.mode_field_radius,
            profile: Arc::new(move |rho| Complex64::new(fiber_field(&fiber, rho), 0.0)),
        }
    }

    pub fn order(&self) -> i32 {
        self.order
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn radial(&self, rho: f64) -> Complex64 {
        (self.profile)(rho)
    }

    pub fn value(&self, rho: f64, phi: f64) -> Complex64 {
        self.radial(rho) * Complex64::from_polar(1.0, f64::from(self.order) * phi)
    }
}

/// `∬ a* b ρ dρ dφ`, zero when the azimuthal orders differ.
pub fn overlap(a: &RadialField, b: &RadialField, config: &QuadratureConfig) -> Result<Complex64> {
    if a.order != b.order {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let r_max = config.truncation_widths * a.extent.max(b.extent);
    // panels on the scale of each field so a narrow one is not skipped over
    let breaks: Vec<f64> = [a.extent, b.extent]
        .iter()
        .flat_map(|&e| [0.5 * e, e, 2.0 * e, 4.0 * e, config.truncation_widths * e])
        .collect();
    let radial = integrate(
        |rho| a.radial(rho).conj() * b.radial(rho) * rho,
        0.0,
        r_max,
        &breaks,
        config,
    )?;
    Ok(radial.value * (2.0 * PI))
}

/// `∬ |a|² ρ dρ dφ`.
pub fn power(a: &RadialField, config: &QuadratureConfig) -> Result<f64> {
    Ok(overlap(a, a, config)?.re)
}

/// Normalized squared overlap `|⟨a|b⟩|² / (⟨a|a⟩⟨b|b⟩)` by quadrature.
pub fn coupling_efficiency(a: &RadialField, b: &RadialField) -> Result<f64> {
    coupling_efficiency_with(a, b, &QuadratureConfig::default())
}

pub fn coupling_efficiency_with(
    a: &RadialField,
    b: &RadialField,
    config: &QuadratureConfig,
) -> Result<f64> {
    let norm_a = power(a, config)?;
    let norm_b = power(b, config)?;
    if !(norm_a > 0.0) {
        return Err(Error::invalid("field a", "zero norm"));
    }
    if !(norm_b > 0.0) {
        return Err(Error::invalid("field b", "zero norm"));
    }
    let cross = overlap(a, b, config)?;
    let efficiency = cross.norm_sqr() / (norm_a * norm_b);
    if efficiency > 1.0 + EFFICIENCY_SLACK {
        return Err(Error::EfficiencyOutOfRange { value: efficiency });
    }
    Ok(efficiency.min(1.0))
}

/// `4 ω_a² ω_b² / (ω_a² + ω_b²)²` for two flat-phase Gaussians.
pub fn gaussian_coupling_closed_form(width_a: f64, width_b: f64) -> f64 {
    let a2 = width_a * width_a;
    let b2 = width_b * width_b;
    let sum = a2 + b2;
    4.0 * a2 * b2 / (sum * sum)
}

/// Gaussian of width `width` and inverse curvature `1/R` against a flat
/// Gaussian of width `reference`: `4 / (w² ω² |1/w² + 1/ω² + i k/(2R)|²)`.
pub fn curved_gaussian_coupling_closed_form(
    width: f64,
    inverse_curvature: f64,
    wavelength: f64,
    reference: f64,
) -> f64 {
    let k = 2.0 * PI / wavelength;
    let a = Complex64::new(
        1.0 / (width * width) + 1.0 / (reference * reference),
        0.5 * k * inverse_curvature,
    );
    4.0 / (width * width * reference * reference * a.norm_sqr())
}
