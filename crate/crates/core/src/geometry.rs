//! Aperture grids, observation grids, angular coordinates and the
//! radiative near-field (Fresnel) interval of a finite aperture.
//!
//! Angle convention: `theta` is the polar angle measured from the aperture
//! broadside (+z), `phi` the azimuth in the xy-plane measured from +x. The
//! aperture always lies in the plane `z = origin.z`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{IrsError, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// A point (or vector) in 3D space, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        (*self - *other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, rhs: Point3) -> Point3 {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, rhs: f64) -> Point3 {
        Point3::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Point3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// A direction in the aperture's forward half-space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionAngles {
    theta: f64,
    phi: f64,
}

impl DirectionAngles {
    /// Builds a direction from radians. `phi` is reduced into `(-pi, pi]`;
    /// `theta` must satisfy `|theta| <= pi/2`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(IrsError::InvalidDirection(format!(
                "non-finite angles ({theta}, {phi})"
            )));
        }
        if theta.abs() > PI / 2.0 + 1e-12 {
            return Err(IrsError::InvalidDirection(format!(
                "theta = {theta} rad lies outside the forward half-space"
            )));
        }
        Ok(Self {
            theta: theta.clamp(-PI / 2.0, PI / 2.0),
            phi: reduce_azimuth(phi),
        })
    }

    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Result<Self> {
        Self::new(theta_deg.to_radians(), phi_deg.to_radians())
    }

    pub fn broadside() -> Self {
        Self {
            theta: 0.0,
            phi: 0.0,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta.to_degrees()
    }

    pub fn phi_deg(&self) -> f64 {
        self.phi.to_degrees()
    }

    pub fn unit_vector(&self) -> Point3 {
        direction_to_unit_vector(*self)
    }

    /// Great-circle angle between two directions, radians.
    pub fn angular_separation(&self, other: &DirectionAngles) -> f64 {
        let c = self
            .unit_vector()
            .dot(&other.unit_vector())
            .clamp(-1.0, 1.0);
        c.acos()
    }

    /// Direction of a point as seen from `origin`. Fails for points behind
    /// or on the aperture plane.
    pub fn towards(point: Point3, origin: Point3) -> Result<Self> {
        let v = point - origin;
        let r = v.norm();
        if r == 0.0 || v.z <= 0.0 {
            return Err(IrsError::InvalidDirection(format!(
                "point {point} is not in the forward half-space of {origin}"
            )));
        }
        let theta = (v.z / r).clamp(-1.0, 1.0).acos();
        let phi = if v.x == 0.0 && v.y == 0.0 {
            0.0
        } else {
            v.y.atan2(v.x)
        };
        Self::new(theta, phi)
    }
}

fn reduce_azimuth(phi: f64) -> f64 {
    let mut p = phi.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    // rem_euclid maps -pi to pi which is already the closed end.
    p
}

/// `(sin(theta)cos(phi), sin(theta)sin(phi), cos(theta))`.
pub fn direction_to_unit_vector(dir: DirectionAngles) -> Point3 {
    let (st, ct) = dir.theta.sin_cos();
    let (sp, cp) = dir.phi.sin_cos();
    Point3::new(st * cp, st * sp, ct)
}

/// Carrier frequency and propagation speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationContext {
    frequency: f64,
    wave_speed: f64,
}

impl PropagationContext {
    pub fn new(frequency: f64, wave_speed: f64) -> Result<Self> {
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(IrsError::InvalidContext(format!(
                "frequency must be positive, got {frequency}"
            )));
        }
        if !(wave_speed.is_finite() && wave_speed > 0.0) {
            return Err(IrsError::InvalidContext(format!(
                "wave speed must be positive, got {wave_speed}"
            )));
        }
        Ok(Self {
            frequency,
            wave_speed,
        })
    }

    pub fn free_space(frequency: f64) -> Result<Self> {
        Self::new(frequency, SPEED_OF_LIGHT)
    }

    /// Context whose wavelength is exactly `wavelength` meters.
    pub fn from_wavelength(wavelength: f64) -> Result<Self> {
        Self::new(SPEED_OF_LIGHT / wavelength, SPEED_OF_LIGHT)
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn wave_speed(&self) -> f64 {
        self.wave_speed
    }

    pub fn wavelength(&self) -> f64 {
        self.wave_speed / self.frequency
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI * self.frequency / self.wave_speed
    }
}

/// A rectangular `count_x` x `count_y` grid of reflecting elements centered
/// on `origin` in the plane `z = origin.z`.
///
/// Element order is row-major: rows run along y, so element `(m, n)` (column
/// `m` along x, row `n` along y, both zero-based) has flat index
/// `n * count_x + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApertureGrid {
    count_x: usize,
    count_y: usize,
    spacing_x: f64,
    spacing_y: f64,
    origin: Point3,
}

impl ApertureGrid {
    pub fn new(count_x: usize, count_y: usize, spacing_x: f64, spacing_y: f64) -> Result<Self> {
        Self::with_origin(count_x, count_y, spacing_x, spacing_y, Point3::ORIGIN)
    }

    pub fn with_origin(
        count_x: usize,
        count_y: usize,
        spacing_x: f64,
        spacing_y: f64,
        origin: Point3,
    ) -> Result<Self> {
        if count_x == 0 || count_y == 0 {
            return Err(IrsError::InvalidGrid(format!(
                "element counts must be at least 1, got {count_x}x{count_y}"
            )));
        }
        if !(spacing_x.is_finite() && spacing_x > 0.0 && spacing_y.is_finite() && spacing_y > 0.0) {
            return Err(IrsError::InvalidGrid(format!(
                "spacings must be positive, got ({spacing_x}, {spacing_y})"
            )));
        }
        if !origin.is_finite() {
            return Err(IrsError::InvalidGrid(format!("non-finite origin {origin}")));
        }
        Ok(Self {
            count_x,
            count_y,
            spacing_x,
            spacing_y,
            origin,
        })
    }

    /// Square grid with the same pitch on both axes.
    pub fn square(count: usize, spacing: f64) -> Result<Self> {
        Self::new(count, count, spacing, spacing)
    }

    pub fn count_x(&self) -> usize {
        self.count_x
    }

    pub fn count_y(&self) -> usize {
        self.count_y
    }

    pub fn spacing_x(&self) -> f64 {
        self.spacing_x
    }

    pub fn spacing_y(&self) -> f64 {
        self.spacing_y
    }

    pub fn origin(&self) -> Point3 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.count_x * self.count_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, m: usize, n: usize) -> Result<usize> {
        if m >= self.count_x || n >= self.count_y {
            return Err(IrsError::IndexOutOfRange {
                m,
                n,
                count_x: self.count_x,
                count_y: self.count_y,
            });
        }
        Ok(n * self.count_x + m)
    }

    /// Position of element `(m, n)`; indices are not range checked.
    pub fn position(&self, m: usize, n: usize) -> Point3 {
        let cx = (self.count_x as f64 - 1.0) / 2.0;
        let cy = (self.count_y as f64 - 1.0) / 2.0;
        Point3::new(
            self.origin.x + (m as f64 - cx) * self.spacing_x,
            self.origin.y + (n as f64 - cy) * self.spacing_y,
            self.origin.z,
        )
    }

    pub fn element_positions(&self) -> Vec<Point3> {
        element_positions(self)
    }

    /// Largest distance between two elements: the grid diagonal.
    pub fn aperture_size(&self) -> f64 {
        let lx = (self.count_x as f64 - 1.0) * self.spacing_x;
        let ly = (self.count_y as f64 - 1.0) * self.spacing_y;
        lx.hypot(ly)
    }
}

/// Element positions in row-major order (see [`ApertureGrid`]).
pub fn element_positions(aperture: &ApertureGrid) -> Vec<Point3> {
    let mut out = Vec::with_capacity(aperture.len());
    for n in 0..aperture.count_y {
        for m in 0..aperture.count_x {
            out.push(aperture.position(m, n));
        }
    }
    out
}

/// Range interval `(lower, upper)` of the radiative near-field region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FresnelBounds {
    pub lower: f64,
    pub upper: f64,
}

impl FresnelBounds {
    pub fn contains(&self, distance: f64) -> bool {
        distance > self.lower && distance < self.upper
    }
}

/// Fresnel interval of an aperture of size `size` at wavelength `wavelength`:
/// `0.62 sqrt(D^3 / lambda) < d < 2 D^2 / lambda`.
pub fn fresnel_bounds_for_size(size: f64, wavelength: f64) -> Result<FresnelBounds> {
    if !(size.is_finite() && size > 0.0) {
        return Err(IrsError::DegenerateAperture(format!(
            "aperture size {size} m admits no Fresnel region"
        )));
    }
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(IrsError::InvalidContext(format!(
            "wavelength must be positive, got {wavelength}"
        )));
    }
    Ok(FresnelBounds {
        lower: 0.62 * (size.powi(3) / wavelength).sqrt(),
        upper: 2.0 * size * size / wavelength,
    })
}

pub fn fresnel_bounds(aperture: &ApertureGrid, ctx: &PropagationContext) -> Result<FresnelBounds> {
    if aperture.len() <= 1 {
        return Err(IrsError::DegenerateAperture(
            "a single element has zero extent and no Fresnel region".into(),
        ));
    }
    fresnel_bounds_for_size(aperture.aperture_size(), ctx.wavelength())
}

/// Where fields are sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationGrid {
    /// Arbitrary list of points.
    Points(Vec<Point3>),
    /// Cartesian box; samples ordered with x outermost and z innermost.
    Volume {
        xs: Vec<f64>,
        ys: Vec<f64>,
        zs: Vec<f64>,
    },
    /// `(theta, phi)` lattice in radians; theta outermost. With a range the
    /// samples sit at `origin + range * u(theta, phi)` and are propagated
    /// exactly; without one the far-field (array factor) limit is used.
    Angular {
        thetas: Vec<f64>,
        phis: Vec<f64>,
        range: Option<f64>,
    },
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(IrsError::InvalidObservationGrid(format!(
            "axis {name} has no samples"
        )));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(IrsError::InvalidObservationGrid(format!(
            "axis {name} has non-finite samples"
        )));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(IrsError::InvalidObservationGrid(format!(
            "axis {name} is not strictly increasing"
        )));
    }
    Ok(())
}

/// `count` evenly spaced samples from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (count as f64 - 1.0);
            (0..count).map(|i| start + step * i as f64).collect()
        }
    }
}

/// Samples `start, start + step, ...` up to `stop` (inclusive within half a step).
pub fn arange(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || stop < start {
        return vec![start];
    }
    let count = ((stop - start) / step + 0.5).floor() as usize + 1;
    (0..count).map(|i| start + step * i as f64).collect()
}

impl ObservationGrid {
    pub fn points(points: Vec<Point3>) -> Result<Self> {
        let grid = ObservationGrid::Points(points);
        grid.validate()?;
        Ok(grid)
    }

    pub fn volume(xs: Vec<f64>, ys: Vec<f64>, zs: Vec<f64>) -> Result<Self> {
        let grid = ObservationGrid::Volume { xs, ys, zs };
        grid.validate()?;
        Ok(grid)
    }

    pub fn angular(thetas: Vec<f64>, phis: Vec<f64>, range: Option<f64>) -> Result<Self> {
        let grid = ObservationGrid::Angular {
            thetas,
            phis,
            range,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Hemisphere lattice with `step_deg` resolution: theta in `[0, 90]`,
    /// phi in `(-180, 180]`.
    pub fn hemisphere(step_deg: f64, range: Option<f64>) -> Result<Self> {
        if !(step_deg > 0.0) {
            return Err(IrsError::InvalidObservationGrid(format!(
                "angular step must be positive, got {step_deg}"
            )));
        }
        let thetas = arange(0.0, 90.0, step_deg)
            .into_iter()
            .filter(|t| *t <= 90.0 + 1e-9)
            .map(f64::to_radians)
            .collect();
        let phis = arange(-180.0 + step_deg, 180.0, step_deg)
            .into_iter()
            .filter(|p| *p <= 180.0 + 1e-9)
            .map(f64::to_radians)
            .collect();
        Self::angular(thetas, phis, range)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ObservationGrid::Points(p) => {
                if p.is_empty() {
                    return Err(IrsError::InvalidObservationGrid("no points".into()));
                }
                if let Some(bad) = p.iter().find(|q| !q.is_finite()) {
                    return Err(IrsError::InvalidObservationGrid(format!(
                        "non-finite point {bad}"
                    )));
                }
                Ok(())
            }
            ObservationGrid::Volume { xs, ys, zs } => {
                check_axis("x", xs)?;
                check_axis("y", ys)?;
                check_axis("z", zs)
            }
            ObservationGrid::Angular {
                thetas,
                phis,
                range,
            } => {
                check_axis("theta", thetas)?;
                check_axis("phi", phis)?;
                if thetas.iter().any(|t| t.abs() > PI / 2.0 + 1e-12) {
                    return Err(IrsError::InvalidObservationGrid(
                        "theta samples must satisfy |theta| <= pi/2".into(),
                    ));
                }
                if let Some(r) = range {
                    if !(r.is_finite() && *r > 0.0) {
                        return Err(IrsError::InvalidObservationGrid(format!(
                            "range must be positive, got {r}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ObservationGrid::Points(p) => p.len(),
            ObservationGrid::Volume { xs, ys, zs } => xs.len() * ys.len() * zs.len(),
            ObservationGrid::Angular { thetas, phis, .. } => thetas.len() * phis.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_angular(&self) -> bool {
        matches!(self, ObservationGrid::Angular { .. })
    }

    /// Directions of an angular grid in sample order; `None` for spatial grids.
    pub fn directions(&self) -> Option<Vec<DirectionAngles>> {
        match self {
            ObservationGrid::Angular { thetas, phis, .. } => {
                let mut out = Vec::with_capacity(thetas.len() * phis.len());
                for &t in thetas {
                    for &p in phis {
                        out.push(DirectionAngles {
                            theta: t,
                            phi: reduce_azimuth(p),
                        });
                    }
                }
                Some(out)
            }
            _ => None,
        }
    }

    /// Spatial sample positions. Angular grids without a range are placed on
    /// the unit sphere around `origin`.
    pub fn sample_points(&self, origin: Point3) -> Vec<Point3> {
        match self {
            ObservationGrid::Points(p) => p.clone(),
            ObservationGrid::Volume { xs, ys, zs } => {
                let mut out = Vec::with_capacity(self.len());
                for &x in xs {
                    for &y in ys {
                        for &z in zs {
                            out.push(Point3::new(x, y, z));
                        }
                    }
                }
                out
            }
            ObservationGrid::Angular { range, .. } => {
                let r = range.unwrap_or(1.0);
                self.directions()
                    .unwrap_or_default()
                    .into_iter()
                    .map(|d| origin + d.unit_vector() * r)
                    .collect()
            }
        }
    }
}
