//! Paraxial fundamental-mode Gaussian beams and the ideal thin-lens waist
//! transform.
//!
//! All lengths are millimetres on a single signed optical axis whose origin
//! is the crystal output face; light travels toward positive coordinates.
//! For a lens at `x`, the pre-lens distance is `z = x - waist_position`
//! and the post-lens distance is `z' = waist_position' - x`. Negative
//! values of either denote virtual waists.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Converts a wavelength in nanometres to millimetres.
pub fn nm_to_mm(nanometres: f64) -> f64 {
    nanometres * 1e-6
}

/// A fundamental Gaussian beam described by its waist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBeamState {
    waist_width: f64,
    waist_position: f64,
    wavelength: f64,
}

impl GaussianBeamState {
    /// `waist_width` is the 1/e field radius at the waist, in mm; `wavelength` in mm.
    pub fn new(waist_width: f64, waist_position: f64, wavelength: f64) -> Result<Self> {
        ensure_positive("waist_width", waist_width)?;
        ensure_finite("waist_position", waist_position)?;
        ensure_positive("wavelength", wavelength)?;
        Ok(Self {
            waist_width,
            waist_position,
            wavelength,
        })
    }

    pub fn waist_width(&self) -> f64 {
        self.waist_width
    }

    pub fn waist_position(&self) -> f64 {
        self.waist_position
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn with_waist_position(self, waist_position: f64) -> Result<Self> {
        Self::new(self.waist_width, waist_position, self.wavelength)
    }
}

/// An aberration-free thin lens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThinLens {
    focal_length: f64,
    position: f64,
}

impl ThinLens {
    pub fn new(focal_length: f64, position: f64) -> Result<Self> {
        ensure_finite("focal_length", focal_length)?;
        if focal_length == 0.0 {
            return Err(Error::invalid("focal_length", "must be nonzero"));
        }
        ensure_finite("lens position", position)?;
        Ok(Self {
            focal_length,
            position,
        })
    }

    pub fn focal_length(&self) -> f64 {
        self.focal_length
    }

    pub fn position(&self) -> f64 {
        self.position
    }
}

/// π·ω₀²/λ.
pub fn rayleigh_range(beam: &GaussianBeamState) -> f64 {
    PI * beam.waist_width * beam.waist_width / beam.wavelength
}

/// Beam radius at axial coordinate `plane`.
pub fn width_at(beam: &GaussianBeamState, plane: f64) -> f64 {
    let dz = plane - beam.waist_position;
    beam.waist_width * (1.0 + (dz / rayleigh_range(beam)).powi(2)).sqrt()
}

/// Inverse radius of wavefront curvature at axial coordinate `plane`
/// (zero at the waist, positive downstream of it).
pub fn inverse_curvature_at(beam: &GaussianBeamState, plane: f64) -> f64 {
    let dz = plane - beam.waist_position;
    let zr = rayleigh_range(beam);
    dz / (dz * dz + zr * zr)
}

/// Thin-lens waist map on (waist width, distance to lens).
///
/// Returns `(w', z')` with
/// `w'² = w² / ((1 - z/f)² + (π w²/(λ f))²)` and
/// `z' = f · [1 - (1 - z/f) / ((1 - z/f)² + (π w²/(λ f))²)]`.
/// Applying the map twice with the same `f` is the identity.
pub fn waist_map(waist: f64, distance: f64, focal_length: f64, wavelength: f64) -> (f64, f64) {
    let detune = 1.0 - distance / focal_length;
    let zr_over_f = PI * waist * waist / (wavelength * focal_length);
    let denom = detune * detune + zr_over_f * zr_over_f;
    let waist_out = waist / denom.sqrt();
    let distance_out = (1.0 - detune / denom) * focal_length;
    (waist_out, distance_out)
}

/// Waist after `lens` for a beam whose waist lies at `beam.waist_position()`.
pub fn lens_transform(beam: &GaussianBeamState, lens: &ThinLens) -> Result<GaussianBeamState> {
    let z = lens.position - beam.waist_position;
    let (waist, z_prime) = waist_map(beam.waist_width, z, lens.focal_length, beam.wavelength);
    GaussianBeamState::new(waist, lens.position + z_prime, beam.wavelength)
}

/// Relative agreement demanded of the forward check in [`lens_invert`].
pub const INVERSION_TOLERANCE: f64 = 1e-9;

/// Recovers the pre-lens waist from the post-lens one.
///
/// The waist map is an involution, so the inverse is the same map applied to
/// `(w', z')`; the result is then pushed forward again and compared against
/// `beam_after` as a guard against sign-convention errors.
pub fn lens_invert(beam_after: &GaussianBeamState, lens: &ThinLens) -> Result<GaussianBeamState> {
    let z_prime = beam_after.waist_position - lens.position;
    let (waist, z) = waist_map(
        beam_after.waist_width,
        z_prime,
        lens.focal_length,
        beam_after.wavelength,
    );
    let before = GaussianBeamState::new(waist, lens.position - z, beam_after.wavelength)?;

    let check = lens_transform(&before, lens)?;
    let width_residual =
        (check.waist_width - beam_after.waist_width).abs() / beam_after.waist_width;
    let scale = z_prime.abs().max(lens.focal_length.abs());
    let position_residual = (check.waist_position - beam_after.waist_position).abs() / scale;
    let residual = width_residual.max(position_residual);
    if residual > INVERSION_TOLERANCE {
        return Err(Error::InversionResidual { residual });
    }
    Ok(before)
}
