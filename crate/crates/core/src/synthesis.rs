//! Unit-cell phase holograms: conjugate-phase steering, near-field focusing,
//! randomized (defocusing) profiles and phase quantization.
//!
//! A profile phase `xi_i` multiplies the reference wave at element `i` by
//! `exp(j xi_i)` on reflection. Both synthesizers pick `xi_i` so that the
//! re-radiated contributions arrive co-phased at the design direction or
//! focal point under the `exp(-j k R)` propagation convention.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{IrsError, Result};
use crate::geometry::{fresnel_bounds, ApertureGrid, DirectionAngles, Point3, PropagationContext};
use crate::propagation::ComplexField;

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_phase(phase: f64) -> f64 {
    let w = (phase + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2 pi for tiny negative inputs.
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Per-element reflection phases, aligned with [`ApertureGrid`] element order.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    phases: Vec<f64>,
    quantization_bits: Option<u32>,
}

impl PhaseProfile {
    /// Wraps every phase into `[-pi, pi)`.
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(IrsError::InvalidArgument("non-finite phase".into()));
        }
        Ok(Self {
            phases: phases.into_iter().map(wrap_phase).collect(),
            quantization_bits: None,
        })
    }

    pub fn uniform(len: usize, phase: f64) -> Self {
        Self {
            phases: vec![wrap_phase(phase); len],
            quantization_bits: None,
        }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn quantization_bits(&self) -> Option<u32> {
        self.quantization_bits
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Same profile with `offset` added to every phase.
    pub fn shifted(&self, offset: f64) -> PhaseProfile {
        PhaseProfile {
            phases: self.phases.iter().map(|p| wrap_phase(p + offset)).collect(),
            quantization_bits: None,
        }
    }

    /// Text matrix: one line per grid row, `count_x` values per line,
    /// radians with 9 significant digits.
    pub fn to_text_matrix(&self, count_x: usize) -> Result<String> {
        if count_x == 0 || !self.phases.len().is_multiple_of(count_x) {
            return Err(IrsError::LengthMismatch {
                what: "phase matrix row width",
                expected: count_x,
                found: self.phases.len(),
            });
        }
        let mut out = String::new();
        for row in self.phases.chunks(count_x) {
            let line: Vec<String> = row.iter().map(|p| format!("{p:.8e}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        Ok(out)
    }

    pub fn from_text_matrix(text: &str) -> Result<Self> {
        let mut phases = Vec::new();
        let mut width = None;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(str::parse::<f64>).collect();
            let row =
                row.map_err(|e| IrsError::InvalidArgument(format!("line {}: {e}", lineno + 1)))?;
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(IrsError::LengthMismatch {
                        what: "phase matrix row width",
                        expected: w,
                        found: row.len(),
                    })
                }
                _ => {}
            }
            phases.extend(row);
        }
        Self::new(phases)
    }
}

/// Far-field steering target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringSpec {
    pub direction: DirectionAngles,
}

/// Near-field focal point given by a direction and range from the aperture center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalSpec {
    direction: DirectionAngles,
    distance: f64,
}

impl FocalSpec {
    pub fn new(direction: DirectionAngles, distance: f64) -> Result<Self> {
        if !(distance.is_finite() && distance > 0.0) {
            return Err(IrsError::InvalidArgument(format!(
                "focal distance must be positive, got {distance}"
            )));
        }
        Ok(Self {
            direction,
            distance,
        })
    }

    /// Focal spec that targets `point` as seen from `origin`.
    pub fn from_point(point: Point3, origin: Point3) -> Result<Self> {
        let direction = DirectionAngles::towards(point, origin)?;
        Self::new(direction, point.distance(&origin))
    }

    pub fn direction(&self) -> DirectionAngles {
        self.direction
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn focal_point(&self, origin: Point3) -> Point3 {
        origin + self.direction.unit_vector() * self.distance
    }

    /// Warning text when the focal range lies outside the aperture's Fresnel interval.
    pub fn fresnel_warning(
        &self,
        aperture: &ApertureGrid,
        ctx: &PropagationContext,
    ) -> Option<String> {
        match fresnel_bounds(aperture, ctx) {
            Ok(b) if b.contains(self.distance) => None,
            Ok(b) => Some(format!(
                "focal distance {:.4} m lies outside the radiative near-field interval ({:.4}, {:.4}) m",
                self.distance, b.lower, b.upper
            )),
            Err(e) => Some(format!("no radiative near-field interval: {e}")),
        }
    }
}

fn check_reference(aperture: &ApertureGrid, reference: &ComplexField) -> Result<Vec<Point3>> {
    let positions = aperture.element_positions();
    if reference.len() != positions.len() {
        return Err(IrsError::LengthMismatch {
            what: "reference field samples",
            expected: positions.len(),
            found: reference.len(),
        });
    }
    for (i, (p, e)) in reference.positions().iter().zip(&positions).enumerate() {
        if p.distance(e) > 1e-9 * (1.0 + e.norm()) {
            return Err(IrsError::InvalidArgument(format!(
                "reference sample {i} at {p} is not on element position {e}"
            )));
        }
    }
    Ok(positions)
}

/// Conjugate-phase steering hologram for direction `spec.direction`:
/// `xi_i = -arg(E_i exp(+j k u . r_i))`.
pub fn steering_profile(
    aperture: &ApertureGrid,
    reference: &ComplexField,
    spec: &SteeringSpec,
    ctx: &PropagationContext,
) -> Result<PhaseProfile> {
    let positions = check_reference(aperture, reference)?;
    let k = ctx.wavenumber();
    let u = spec.direction.unit_vector();
    let phases = positions
        .iter()
        .zip(reference.values())
        .map(|(r, e)| {
            let progressive = Complex64::from_polar(1.0, k * (u.x * r.x + u.y * r.y));
            wrap_phase(-(e * progressive).arg())
        })
        .collect();
    Ok(PhaseProfile {
        phases,
        quantization_bits: None,
    })
}

/// Field of a virtual point source at the focal point, back-propagated onto
/// the element positions: `exp(+j k |r_i - r''|) / (4 pi |r_i - r''|)`.
pub fn back_propagated_field(
    aperture: &ApertureGrid,
    focal_point: Point3,
    ctx: &PropagationContext,
) -> Vec<Complex64> {
    let k = ctx.wavenumber();
    aperture
        .element_positions()
        .iter()
        .map(|r| {
            let d = r.distance(&focal_point);
            Complex64::from_polar(1.0 / (4.0 * PI * d), k * d)
        })
        .collect()
}

/// Near-field focusing hologram. The interference phase
/// `arg(E_i conj(E_aperture,i))` is conjugated on reflection so the
/// contributions co-phase at the focal point.
pub fn focusing_profile(
    aperture: &ApertureGrid,
    reference: &ComplexField,
    spec: &FocalSpec,
    ctx: &PropagationContext,
) -> Result<PhaseProfile> {
    check_reference(aperture, reference)?;
    let focal = spec.focal_point(aperture.origin());
    if focal.z - aperture.origin().z <= 1e-9 * spec.distance() {
        return Err(IrsError::InvalidArgument(format!(
            "focal point {focal} lies in the aperture plane"
        )));
    }
    let virtual_source = back_propagated_field(aperture, focal, ctx);
    let phases = reference
        .values()
        .iter()
        .zip(&virtual_source)
        .map(|(e, a)| wrap_phase(-(e * a.conj()).arg()))
        .collect();
    Ok(PhaseProfile {
        phases,
        quantization_bits: None,
    })
}

/// Independent uniform phases in `[-pi, pi)`. Element `i` draws from its own
/// ChaCha stream keyed on `(seed, i)`, so the result does not depend on
/// evaluation order.
pub fn randomized_profile(aperture: &ApertureGrid, seed: u64) -> PhaseProfile {
    let phases = (0..aperture.len())
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            wrap_phase(rng.gen_range(-PI..PI))
        })
        .collect();
    PhaseProfile {
        phases,
        quantization_bits: None,
    }
}

/// Snaps every phase to the nearest of `2^bits` uniform levels
/// `-pi + j 2 pi / 2^bits`; exact ties go to the lower level.
pub fn quantize_profile(profile: &PhaseProfile, bits: u32) -> Result<PhaseProfile> {
    if !(1..=24).contains(&bits) {
        return Err(IrsError::InvalidArgument(format!(
            "quantization needs 1 to 24 bits, got {bits}"
        )));
    }
    let levels = 1u64 << bits;
    let step = 2.0 * PI / levels as f64;
    let phases = profile
        .phases
        .iter()
        .map(|p| {
            let t = (wrap_phase(*p) + PI) / step;
            let lower = t.floor();
            let frac = t - lower;
            let j = if frac <= 0.5 + 1e-12 {
                lower
            } else {
                lower + 1.0
            };
            let j = (j as u64) % levels;
            -PI + j as f64 * step
        })
        .collect();
    Ok(PhaseProfile {
        phases,
        quantization_bits: Some(bits),
    })
}
