//! Scalar free-space propagation by Green's-function superposition.
//!
//! Time convention is `exp(+j w t)`, so an outgoing spherical wave is
//! `exp(-j k R) / (4 pi R)` and the far-field of an element at `r_i` seen
//! from direction `u` carries the phase `exp(+j k u . r_i)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{IrsError, Result};
use crate::geometry::{ApertureGrid, DirectionAngles, ObservationGrid, Point3, PropagationContext};
use crate::synthesis::PhaseProfile;

/// Below this separation (meters) source and target are treated as coincident.
const COINCIDENCE_TOLERANCE: f64 = 1e-12;

/// Discretized current distribution of the illuminating tag: a cluster of
/// weighted point sources.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    elements: Vec<(Point3, Complex64)>,
}

impl SourceModel {
    pub fn new(elements: Vec<(Point3, Complex64)>) -> Result<Self> {
        if elements.is_empty() {
            return Err(IrsError::InvalidArgument(
                "source model needs at least one element".into(),
            ));
        }
        if elements.iter().all(|(_, w)| *w == Complex64::new(0.0, 0.0)) {
            return Err(IrsError::InvalidArgument(
                "source model needs at least one nonzero weight".into(),
            ));
        }
        if elements
            .iter()
            .any(|(p, w)| !p.is_finite() || !w.re.is_finite() || !w.im.is_finite())
        {
            return Err(IrsError::InvalidArgument(
                "source model has non-finite entries".into(),
            ));
        }
        Ok(Self { elements })
    }

    /// A single unit-weight point source.
    pub fn point(position: Point3) -> Self {
        Self {
            elements: vec![(position, Complex64::new(1.0, 0.0))],
        }
    }

    /// Unit point source at `distance` from `origin` along `incidence`.
    pub fn from_incidence(
        incidence: DirectionAngles,
        distance: f64,
        origin: Point3,
    ) -> Result<Self> {
        if !(distance.is_finite() && distance > 0.0) {
            return Err(IrsError::InvalidArgument(format!(
                "tag distance must be positive, got {distance}"
            )));
        }
        Ok(Self::point(origin + incidence.unit_vector() * distance))
    }

    pub fn elements(&self) -> &[(Point3, Complex64)] {
        &self.elements
    }

    pub fn positions(&self) -> Vec<Point3> {
        self.elements.iter().map(|(p, _)| *p).collect()
    }

    pub fn weights(&self) -> Vec<Complex64> {
        self.elements.iter().map(|(_, w)| *w).collect()
    }
}

/// Complex amplitudes sampled at a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    positions: Vec<Point3>,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(positions: Vec<Point3>, values: Vec<Complex64>) -> Result<Self> {
        if positions.len() != values.len() {
            return Err(IrsError::LengthMismatch {
                what: "field values",
                expected: positions.len(),
                found: values.len(),
            });
        }
        if values
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(IrsError::InvalidArgument(
                "field has non-finite values".into(),
            ));
        }
        Ok(Self { positions, values })
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Index and magnitude of the strongest sample. Ties keep the first.
    pub fn peak(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.values.iter().enumerate() {
            let m = v.norm();
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((i, m));
            }
        }
        best
    }

    /// Copy scaled so the peak magnitude is 1. An all-zero field is returned unchanged.
    pub fn normalized(&self) -> ComplexField {
        let peak = self.peak().map_or(0.0, |(_, m)| m);
        if peak == 0.0 {
            return self.clone();
        }
        ComplexField {
            positions: self.positions.clone(),
            values: self.values.iter().map(|v| v / peak).collect(),
        }
    }

    /// Magnitudes in dB relative to `reference`.
    pub fn magnitudes_db(&self, reference: f64) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| 20.0 * (v.norm() / reference).log10())
            .collect()
    }
}

/// Real, non-negative gain of one reflecting element versus direction.
#[derive(Clone, Default)]
pub enum ElementPattern {
    #[default]
    Isotropic,
    /// `cos(theta)^q` in the forward half-space.
    CosinePower(f64),
    Custom(Arc<dyn Fn(DirectionAngles) -> f64 + Send + Sync>),
}

impl fmt::Debug for ElementPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementPattern::Isotropic => write!(f, "Isotropic"),
            ElementPattern::CosinePower(q) => write!(f, "CosinePower({q})"),
            ElementPattern::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl ElementPattern {
    pub fn gain(&self, dir: DirectionAngles) -> f64 {
        let g = match self {
            ElementPattern::Isotropic => 1.0,
            ElementPattern::CosinePower(q) => dir.theta().cos().max(0.0).powf(*q),
            ElementPattern::Custom(f) => f(dir),
        };
        g.max(0.0)
    }
}

#[inline]
fn kernel_at_distance(r: f64, k: f64) -> Complex64 {
    let (s, c) = (k * r).sin_cos();
    Complex64::new(c, -s) / (4.0 * PI * r)
}

/// Free-space scalar Green's function `exp(-j k R) / (4 pi R)`.
pub fn greens_kernel(src: Point3, obs: Point3, ctx: &PropagationContext) -> Result<Complex64> {
    let r = src.distance(&obs);
    if r <= COINCIDENCE_TOLERANCE {
        return Err(IrsError::Singularity {
            source_index: 0,
            target_index: 0,
            source_point: src.to_string(),
            target_point: obs.to_string(),
        });
    }
    Ok(kernel_at_distance(r, ctx.wavenumber()))
}

/// Weighted Green's-function sum from `sources` to every target.
/// Each target is summed sequentially in source order, so results do not
/// depend on how targets are split across threads.
pub(crate) fn superpose(
    sources: &[Point3],
    weights: &[Complex64],
    targets: &[Point3],
    k: f64,
) -> Result<Vec<Complex64>> {
    let per_target: Vec<std::result::Result<Complex64, (usize, usize)>> = targets
        .par_iter()
        .enumerate()
        .map(|(ti, t)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (si, (s, w)) in sources.iter().zip(weights).enumerate() {
                let dx = t.x - s.x;
                let dy = t.y - s.y;
                let dz = t.z - s.z;
                let r = (dx * dx + dy * dy + dz * dz).sqrt();
                if r <= COINCIDENCE_TOLERANCE {
                    return Err((si, ti));
                }
                acc += w * kernel_at_distance(r, k);
            }
            Ok(acc)
        })
        .collect();
    per_target
        .into_iter()
        .map(|r| {
            r.map_err(|(si, ti)| IrsError::Singularity {
                source_index: si,
                target_index: ti,
                source_point: sources[si].to_string(),
                target_point: targets[ti].to_string(),
            })
        })
        .collect()
}

/// Field radiated by `source` at each target.
pub fn radiate(
    source: &SourceModel,
    targets: &[Point3],
    ctx: &PropagationContext,
) -> Result<ComplexField> {
    let values = superpose(
        &source.positions(),
        &source.weights(),
        targets,
        ctx.wavenumber(),
    )?;
    ComplexField::new(targets.to_vec(), values)
}

/// Reference wave of the tag sampled on the aperture elements.
pub fn incident_on_aperture(
    source: &SourceModel,
    aperture: &ApertureGrid,
    ctx: &PropagationContext,
) -> Result<ComplexField> {
    radiate(source, &aperture.element_positions(), ctx)
}

/// Far-field array factor `sum_i a_i exp(+j k (x_i sin t cos p + y_i sin t sin p))`.
pub fn array_factor(
    aperture: &ApertureGrid,
    excitations: &[Complex64],
    dirs: &[DirectionAngles],
    ctx: &PropagationContext,
) -> Result<Vec<Complex64>> {
    if excitations.len() != aperture.len() {
        return Err(IrsError::LengthMismatch {
            what: "excitations",
            expected: aperture.len(),
            found: excitations.len(),
        });
    }
    let positions = aperture.element_positions();
    let k = ctx.wavenumber();
    Ok(dirs
        .par_iter()
        .map(|d| {
            let (st, _) = d.theta().sin_cos();
            let (sp, cp) = d.phi().sin_cos();
            let (ux, uy) = (k * st * cp, k * st * sp);
            let mut acc = Complex64::new(0.0, 0.0);
            for (p, a) in positions.iter().zip(excitations) {
                let (s, c) = (ux * p.x + uy * p.y).sin_cos();
                acc += a * Complex64::new(c, s);
            }
            acc
        })
        .collect())
}

/// Re-radiated amplitude of every element: `magnitude * incident_i * exp(j xi_i)`.
pub fn reflected_excitations(
    aperture: &ApertureGrid,
    incident: &ComplexField,
    phases: &PhaseProfile,
    reflection_magnitude: f64,
) -> Result<Vec<Complex64>> {
    if incident.len() != aperture.len() {
        return Err(IrsError::LengthMismatch {
            what: "incident field samples",
            expected: aperture.len(),
            found: incident.len(),
        });
    }
    if phases.len() != aperture.len() {
        return Err(IrsError::LengthMismatch {
            what: "phase profile",
            expected: aperture.len(),
            found: phases.len(),
        });
    }
    for (i, (p, e)) in incident
        .positions()
        .iter()
        .zip(aperture.element_positions())
        .enumerate()
    {
        if p.distance(&e) > 1e-9 * (1.0 + e.norm()) {
            return Err(IrsError::InvalidArgument(format!(
                "incident sample {i} at {p} is not on element position {e}"
            )));
        }
    }
    Ok(incident
        .values()
        .iter()
        .zip(phases.phases())
        .map(|(v, xi)| v * Complex64::from_polar(reflection_magnitude, *xi))
        .collect())
}

/// Field reflected by the aperture with unit reflection magnitude.
///
/// Spatial grids are evaluated with the exact kernel. Angular grids with a
/// range place samples on a sphere around the aperture origin and scale by
/// the element pattern; angular grids without a range return the
/// pattern-weighted array factor of the reflected excitations.
pub fn reflect_and_radiate(
    aperture: &ApertureGrid,
    incident: &ComplexField,
    phases: &PhaseProfile,
    targets: &ObservationGrid,
    ctx: &PropagationContext,
    pattern: &ElementPattern,
) -> Result<ComplexField> {
    reflect_and_radiate_scaled(aperture, incident, phases, targets, ctx, pattern, 1.0)
}

/// As [`reflect_and_radiate`] with a uniform reflection magnitude (loss hook).
pub fn reflect_and_radiate_scaled(
    aperture: &ApertureGrid,
    incident: &ComplexField,
    phases: &PhaseProfile,
    targets: &ObservationGrid,
    ctx: &PropagationContext,
    pattern: &ElementPattern,
    reflection_magnitude: f64,
) -> Result<ComplexField> {
    targets.validate()?;
    let excitations = reflected_excitations(aperture, incident, phases, reflection_magnitude)?;
    radiate_excitations(aperture, &excitations, targets, ctx, pattern)
}

/// Propagates given element excitations to an observation grid.
pub fn radiate_excitations(
    aperture: &ApertureGrid,
    excitations: &[Complex64],
    targets: &ObservationGrid,
    ctx: &PropagationContext,
    pattern: &ElementPattern,
) -> Result<ComplexField> {
    if excitations.len() != aperture.len() {
        return Err(IrsError::LengthMismatch {
            what: "excitations",
            expected: aperture.len(),
            found: excitations.len(),
        });
    }
    let points = targets.sample_points(aperture.origin());
    let values = match targets {
        ObservationGrid::Points(_) | ObservationGrid::Volume { .. } => superpose(
            &aperture.element_positions(),
            excitations,
            &points,
            ctx.wavenumber(),
        )?,
        ObservationGrid::Angular { range, .. } => {
            let dirs = targets.directions().unwrap_or_default();
            let raw = match range {
                Some(_) => superpose(
                    &aperture.element_positions(),
                    excitations,
                    &points,
                    ctx.wavenumber(),
                )?,
                None => array_factor(aperture, excitations, &dirs, ctx)?,
            };
            raw.into_iter()
                .zip(&dirs)
                .map(|(v, d)| v * pattern.gain(*d))
                .collect()
        }
    };
    ComplexField::new(points, values)
}
