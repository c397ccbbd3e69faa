//! Time-varying reflecting surface with square-wave lattice reflection
//! coefficients.
//!
//! Every lattice `(m, n)` toggles between the open-circuit state `+1` and
//! the short-circuit state `-1` at the modulation frequency `f0`, offset by
//! its own delay `tau_mn`. The Fourier series of that waveform has
//! coefficients
//!
//! ```text
//! D^k = 2 / (pi k) * exp(-j (2 pi k f0 tau + pi / 2))   k odd
//! D^k = 0                                              k even (and k = 0)
//! ```
//!
//! so the scattered far field splits into harmonics at `f_c + k f0`, each
//! weighted by `D^k_mn` lattice by lattice. Choosing the delays linear in the
//! lattice position steers a chosen harmonic.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{IrsError, Result};
use crate::geometry::{ApertureGrid, DirectionAngles, ObservationGrid, PropagationContext};
use crate::propagation::ElementPattern;

/// Below this carrier-to-modulation ratio the harmonic model is flagged.
pub const MIN_CARRIER_TO_MODULATION_RATIO: f64 = 100.0;

/// The two reflection states of a lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulationState {
    /// Open circuit, reflection coefficient `+1`.
    Open,
    /// Short circuit, reflection coefficient `-1`.
    Short,
}

impl ModulationState {
    pub fn coefficient(self) -> f64 {
        match self {
            ModulationState::Open => 1.0,
            ModulationState::Short => -1.0,
        }
    }

    /// Euclidean distance between the two states on the unit circle.
    pub fn separation() -> f64 {
        (ModulationState::Open.coefficient() - ModulationState::Short.coefficient()).abs()
    }
}

/// Modulation frequency and per-lattice delays (seconds, row-major like
/// [`ApertureGrid`]). Delays are kept as given and only reduced modulo the
/// period where a waveform or coefficient is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareWaveProfile {
    mod_frequency: f64,
    count_x: usize,
    count_y: usize,
    delays: Vec<f64>,
}

impl SquareWaveProfile {
    pub fn new(mod_frequency: f64, lattice: &ApertureGrid, delays: Vec<f64>) -> Result<Self> {
        if !(mod_frequency.is_finite() && mod_frequency > 0.0) {
            return Err(IrsError::InvalidArgument(format!(
                "modulation frequency must be positive, got {mod_frequency}"
            )));
        }
        if delays.len() != lattice.len() {
            return Err(IrsError::LengthMismatch {
                what: "lattice delays",
                expected: lattice.len(),
                found: delays.len(),
            });
        }
        if delays.iter().any(|d| !d.is_finite()) {
            return Err(IrsError::InvalidArgument("non-finite delay".into()));
        }
        Ok(Self {
            mod_frequency,
            count_x: lattice.count_x(),
            count_y: lattice.count_y(),
            delays,
        })
    }

    /// All lattices switch together (`tau_mn = 0`).
    pub fn synchronized(mod_frequency: f64, lattice: &ApertureGrid) -> Result<Self> {
        Self::new(mod_frequency, lattice, vec![0.0; lattice.len()])
    }

    /// Delays that steer harmonic `k` towards `target`.
    pub fn steered(
        mod_frequency: f64,
        lattice: &ApertureGrid,
        target: DirectionAngles,
        k: i32,
        ctx: &PropagationContext,
    ) -> Result<Self> {
        let delays = steering_delays(lattice, target, k, ctx, mod_frequency)?;
        Self::new(mod_frequency, lattice, delays)
    }

    pub fn mod_frequency(&self) -> f64 {
        self.mod_frequency
    }

    pub fn period(&self) -> f64 {
        1.0 / self.mod_frequency
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn count_x(&self) -> usize {
        self.count_x
    }

    pub fn count_y(&self) -> usize {
        self.count_y
    }

    pub fn delay(&self, m: usize, n: usize) -> Result<f64> {
        if m >= self.count_x || n >= self.count_y {
            return Err(IrsError::IndexOutOfRange {
                m,
                n,
                count_x: self.count_x,
                count_y: self.count_y,
            });
        }
        Ok(self.delays[n * self.count_x + m])
    }

    /// Warning when the carrier is not much faster than the modulation.
    pub fn validity_warning(&self, ctx: &PropagationContext) -> Option<String> {
        let ratio = ctx.frequency() / self.mod_frequency;
        (ratio < MIN_CARRIER_TO_MODULATION_RATIO).then(|| {
            format!(
                "carrier/modulation ratio {ratio:.3} is below {MIN_CARRIER_TO_MODULATION_RATIO}; the harmonic far-field model assumes f_c >> f_0"
            )
        })
    }

    fn check_shape(&self, lattice: &ApertureGrid) -> Result<()> {
        if lattice.count_x() != self.count_x || lattice.count_y() != self.count_y {
            return Err(IrsError::LengthMismatch {
                what: "lattice shape",
                expected: self.count_x * self.count_y,
                found: lattice.len(),
            });
        }
        Ok(())
    }
}

/// Samples `Gamma_mn(t)`: `+1` while `(t - tau_mn) mod T0` is in `[0, T0/2)`, else `-1`.
pub fn gamma_waveform(
    profile: &SquareWaveProfile,
    lattice: (usize, usize),
    times: &[f64],
) -> Result<Vec<f64>> {
    let tau = profile.delay(lattice.0, lattice.1)?;
    let period = profile.period();
    let tau = tau.rem_euclid(period);
    Ok(times
        .iter()
        .map(|t| {
            let phase = (t - tau).rem_euclid(period) / period;
            if phase < 0.5 {
                ModulationState::Open.coefficient()
            } else {
                ModulationState::Short.coefficient()
            }
        })
        .collect())
}

/// Closed-form Fourier coefficient of a unit square wave delayed by `delay`.
/// Negative harmonics are the conjugates of the positive ones (real waveform).
pub fn square_wave_coefficient(k: i32, mod_frequency: f64, delay: f64) -> Complex64 {
    if k % 2 == 0 {
        return Complex64::new(0.0, 0.0);
    }
    if k < 0 {
        return square_wave_coefficient(-k, mod_frequency, delay).conj();
    }
    let kf = k as f64;
    // Reducing the delay first keeps the phase argument small.
    let tau = delay.rem_euclid(1.0 / mod_frequency);
    let phase = -(2.0 * PI * kf * mod_frequency * tau + PI / 2.0);
    Complex64::from_polar(2.0 / (PI * kf), phase)
}

/// Per-lattice coefficients `D^k_mn` for a set of harmonics.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoefficients {
    harmonics: Vec<i32>,
    count_x: usize,
    count_y: usize,
    values: Vec<Vec<Complex64>>,
}

impl HarmonicCoefficients {
    pub fn harmonics(&self) -> &[i32] {
        &self.harmonics
    }

    /// Row-major lattice coefficients of the `index`-th requested harmonic.
    pub fn for_index(&self, index: usize) -> &[Complex64] {
        &self.values[index]
    }

    /// Coefficients of harmonic `k`, if it was requested.
    pub fn for_harmonic(&self, k: i32) -> Option<&[Complex64]> {
        self.harmonics
            .iter()
            .position(|h| *h == k)
            .map(|i| self.values[i].as_slice())
    }

    pub fn get(&self, k: i32, m: usize, n: usize) -> Option<Complex64> {
        if m >= self.count_x || n >= self.count_y {
            return None;
        }
        self.for_harmonic(k).map(|v| v[n * self.count_x + m])
    }
}

pub fn fourier_coefficients(
    profile: &SquareWaveProfile,
    harmonics: &[i32],
) -> HarmonicCoefficients {
    let values = harmonics
        .iter()
        .map(|&k| {
            profile
                .delays
                .iter()
                .map(|&tau| square_wave_coefficient(k, profile.mod_frequency, tau))
                .collect()
        })
        .collect();
    HarmonicCoefficients {
        harmonics: harmonics.to_vec(),
        count_x: profile.count_x,
        count_y: profile.count_y,
        values,
    }
}

/// Complex far-field pattern of one harmonic over an angular lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicPattern {
    pub k: i32,
    /// Absolute frequency `f_c + k f0`, Hz.
    pub frequency: f64,
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    /// Theta-major values aligned with `directions()`.
    pub values: Vec<Complex64>,
}

impl HarmonicPattern {
    pub fn directions(&self) -> Vec<DirectionAngles> {
        ObservationGrid::Angular {
            thetas: self.thetas.clone(),
            phis: self.phis.clone(),
            range: None,
        }
        .directions()
        .unwrap_or_default()
    }

    /// Index and magnitude of the strongest direction. Ties keep the first.
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
}

fn angular_axes(grid: &ObservationGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    grid.validate()?;
    match grid {
        ObservationGrid::Angular { thetas, phis, .. } => Ok((thetas.clone(), phis.clone())),
        _ => Err(IrsError::InvalidObservationGrid(
            "harmonic patterns need an angular grid".into(),
        )),
    }
}

/// `E0(t, p) / (M N) * sum_mn c_mn F_mn(t, p)` with
/// `F_mn = exp(+j k_c (m d_m sin t cos p + n d_n sin t sin p))`, zero-based
/// lattice indices.
fn lattice_sum(
    lattice: &ApertureGrid,
    weights: &[Complex64],
    dirs: &[DirectionAngles],
    ctx: &PropagationContext,
    pattern: &ElementPattern,
) -> Vec<Complex64> {
    let k = ctx.wavenumber();
    let (mx, ny) = (lattice.count_x(), lattice.count_y());
    let (dm, dn) = (lattice.spacing_x(), lattice.spacing_y());
    let norm = 1.0 / (mx * ny) as f64;
    dirs.par_iter()
        .map(|d| {
            let st = d.theta().sin();
            let (sp, cp) = d.phi().sin_cos();
            let ax = k * dm * st * cp;
            let ay = k * dn * st * sp;
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..ny {
                for m in 0..mx {
                    let w = weights[n * mx + m];
                    if w.re == 0.0 && w.im == 0.0 {
                        continue;
                    }
                    let (s, c) = (ax * m as f64 + ay * n as f64).sin_cos();
                    acc += w * Complex64::new(c, s);
                }
            }
            acc * (norm * pattern.gain(*d))
        })
        .collect()
}

/// Normalized static pattern of the same lattice with `Gamma_mn = 1`.
pub fn invariant_pattern(
    lattice: &ApertureGrid,
    grid: &ObservationGrid,
    ctx: &PropagationContext,
    pattern: &ElementPattern,
) -> Result<HarmonicPattern> {
    let (thetas, phis) = angular_axes(grid)?;
    let dirs = grid.directions().unwrap_or_default();
    let ones = vec![Complex64::new(1.0, 0.0); lattice.len()];
    Ok(HarmonicPattern {
        k: 0,
        frequency: ctx.frequency(),
        thetas,
        phis,
        values: lattice_sum(lattice, &ones, &dirs, ctx, pattern),
    })
}

/// Far-field pattern of harmonic `k`. Even `k` gives the zero pattern.
pub fn harmonic_pattern(
    lattice: &ApertureGrid,
    profile: &SquareWaveProfile,
    k: i32,
    grid: &ObservationGrid,
    ctx: &PropagationContext,
    pattern: &ElementPattern,
) -> Result<HarmonicPattern> {
    profile.check_shape(lattice)?;
    let (thetas, phis) = angular_axes(grid)?;
    let dirs = grid.directions().unwrap_or_default();
    let coeffs = fourier_coefficients(profile, &[k]);
    let values = if k % 2 == 0 {
        vec![Complex64::new(0.0, 0.0); dirs.len()]
    } else {
        lattice_sum(lattice, coeffs.for_index(0), &dirs, ctx, pattern)
    };
    Ok(HarmonicPattern {
        k,
        frequency: ctx.frequency() + k as f64 * profile.mod_frequency,
        thetas,
        phis,
        values,
    })
}

/// Lattice delays steering harmonic `k` towards `target`:
/// `tau_mn = f_c / (c0 k f0) * (m d_m sin t0 cos p0 + n d_n sin t0 sin p0)`.
pub fn steering_delays(
    lattice: &ApertureGrid,
    target: DirectionAngles,
    k: i32,
    ctx: &PropagationContext,
    mod_frequency: f64,
) -> Result<Vec<f64>> {
    if k % 2 == 0 {
        return Err(IrsError::EvenHarmonic(k));
    }
    if !(mod_frequency.is_finite() && mod_frequency > 0.0) {
        return Err(IrsError::InvalidArgument(format!(
            "modulation frequency must be positive, got {mod_frequency}"
        )));
    }
    let scale = ctx.frequency() / (ctx.wave_speed() * k as f64 * mod_frequency);
    let st = target.theta().sin();
    let (sp, cp) = target.phi().sin_cos();
    let (dm, dn) = (lattice.spacing_x(), lattice.spacing_y());
    let mut delays = Vec::with_capacity(lattice.len());
    for n in 0..lattice.count_y() {
        for m in 0..lattice.count_x() {
            delays.push(scale * (m as f64 * dm * st * cp + n as f64 * dn * st * sp));
        }
    }
    Ok(delays)
}

/// One spectral line of the scattered field in a fixed direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralLine {
    pub k: i32,
    pub frequency: f64,
    pub value: Complex64,
}

/// Harmonics `-k_max..=k_max` of the scattered field in direction `dir`.
pub fn spectrum_at_direction(
    lattice: &ApertureGrid,
    profile: &SquareWaveProfile,
    dir: DirectionAngles,
    k_max: u32,
    ctx: &PropagationContext,
    pattern: &ElementPattern,
) -> Result<Vec<SpectralLine>> {
    if k_max < 1 {
        return Err(IrsError::InvalidArgument("k_max must be at least 1".into()));
    }
    profile.check_shape(lattice)?;
    let k_max = i32::try_from(k_max)
        .map_err(|_| IrsError::InvalidArgument(format!("k_max {k_max} too large")))?;
    (-k_max..=k_max)
        .map(|k| {
            let value = if k % 2 == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                let coeffs = fourier_coefficients(profile, &[k]);
                lattice_sum(lattice, coeffs.for_index(0), &[dir], ctx, pattern)[0]
            };
            Ok(SpectralLine {
                k,
                frequency: ctx.frequency() + k as f64 * profile.mod_frequency,
                value,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::wrap_phase;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn lattice10() -> (ApertureGrid, PropagationContext) {
        let ctx = PropagationContext::free_space(10e9).unwrap();
        (
            ApertureGrid::square(10, ctx.wavelength() / 2.0).unwrap(),
            ctx,
        )
    }

    /// Heaviside-built square wave used as an independent oracle.
    fn heaviside(t: f64) -> f64 {
        if t >= 0.0 {
            1.0
        } else {
            0.0
        }
    }

    fn oracle_gamma(t: f64, period: f64, tau: f64) -> f64 {
        // Gamma(t) = sum_k gamma(t - k T0 - tau), with gamma a single period.
        let base = ((t - tau) / period).floor();
        let mut acc = 0.0;
        for k in [base - 1.0, base, base + 1.0] {
            let s = t - k * period - tau;
            acc += (heaviside(s) - heaviside(s - period / 2.0))
                - (heaviside(s - period / 2.0) - heaviside(s - period));
        }
        acc
    }

    /// Composite trapezoid of the defining integral over one period starting
    /// at the delay, split at the mid-period switch so each piece is smooth.
    fn quadrature_coefficient(k: i32, f0: f64, tau: f64, points: usize) -> Complex64 {
        let period = 1.0 / f0;
        let start = tau.rem_euclid(period);
        let half = period / 2.0;
        let mut total = Complex64::new(0.0, 0.0);
        for (a, level) in [(start, 1.0), (start + half, -1.0)] {
            let h = half / points as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..=points {
                let t = a + i as f64 * h;
                let w = if i == 0 || i == points { 0.5 } else { 1.0 };
                // Interior samples come from the Heaviside construction.
                let g = if i == 0 || i == points {
                    level
                } else {
                    oracle_gamma(t, period, tau)
                };
                acc += w * g * Complex64::from_polar(1.0, -2.0 * PI * k as f64 * f0 * t);
            }
            total += acc * h;
        }
        total / period
    }

    #[test]
    fn waveform_levels() {
        let (grid, _) = lattice10();
        let f0 = 1e6;
        let t0 = 1.0 / f0;
        let sync = SquareWaveProfile::synchronized(f0, &grid).unwrap();
        assert_eq!(
            gamma_waveform(&sync, (0, 0), &[0.0, t0 / 2.0]).unwrap(),
            vec![1.0, -1.0]
        );

        let times: Vec<f64> = (0..97).map(|i| i as f64 * t0 / 37.3).collect();
        let base = gamma_waveform(&sync, (3, 4), &times).unwrap();
        let half = SquareWaveProfile::new(f0, &grid, vec![t0 / 2.0; grid.len()]).unwrap();
        let shifted = gamma_waveform(&half, (3, 4), &times).unwrap();
        assert!(base.iter().zip(&shifted).all(|(a, b)| *a == -*b));

        let full = SquareWaveProfile::new(f0, &grid, vec![t0; grid.len()]).unwrap();
        assert_eq!(gamma_waveform(&full, (3, 4), &times).unwrap(), base);

        assert!(matches!(
            gamma_waveform(&sync, (10, 0), &times),
            Err(IrsError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn first_harmonic_closed_form() {
        let d = square_wave_coefficient(1, 1e6, 0.0);
        assert_relative_eq!(d.norm(), 2.0 / PI, max_relative = 1e-15);
        assert_relative_eq!(d.arg(), -PI / 2.0, epsilon = 1e-15);
        assert_relative_eq!(d.norm(), 0.636_62, epsilon = 1e-5);
    }

    #[test]
    fn even_harmonics_vanish() {
        for k in [-4, -2, 0, 2, 6] {
            for tau in [0.0, 1.3e-7, 5e-6] {
                assert_eq!(
                    square_wave_coefficient(k, 1e6, tau),
                    Complex64::new(0.0, 0.0)
                );
            }
        }
    }

    #[test]
    fn third_harmonic_against_quadrature() {
        let d = square_wave_coefficient(3, 1e6, 0.0);
        assert_relative_eq!(d.norm(), 2.0 / (3.0 * PI), max_relative = 1e-15);
        assert_relative_eq!(d.arg(), -PI / 2.0, epsilon = 1e-15);
        let q = quadrature_coefficient(3, 1e6, 0.0, 10_000);
        assert!((d - q).norm() < 1e-6, "{}", (d - q).norm());
    }

    #[test]
    fn oracle_waveform_matches_implementation() {
        let (grid, _) = lattice10();
        let f0 = 2e5;
        let tau = 1.7e-6;
        let prof = SquareWaveProfile::new(f0, &grid, vec![tau; grid.len()]).unwrap();
        let times: Vec<f64> = (0..500).map(|i| 1e-8 + i as f64 * 3.1e-8).collect();
        let got = gamma_waveform(&prof, (1, 1), &times).unwrap();
        for (t, g) in times.iter().zip(got) {
            assert_eq!(g, oracle_gamma(*t, 1.0 / f0, tau), "t = {t}");
        }
    }

    #[test]
    fn negative_harmonics_are_conjugates() {
        for tau in [0.0, 2.2e-7, 9.1e-7] {
            for k in [1, 3, 5, 7] {
                let p = square_wave_coefficient(k, 1e6, tau);
                let n = square_wave_coefficient(-k, 1e6, tau);
                assert!((n - p.conj()).norm() < 1e-15);
            }
        }
        // k = -1, tau = 0 has phase +pi/2.
        assert_relative_eq!(square_wave_coefficient(-1, 1e6, 0.0).arg(), PI / 2.0);
    }

    #[test]
    fn coefficient_table_lookup() {
        let (grid, _) = lattice10();
        let prof = SquareWaveProfile::synchronized(1e6, &grid).unwrap();
        let table = fourier_coefficients(&prof, &[1, 2, 3]);
        assert_eq!(table.harmonics(), &[1, 2, 3]);
        assert_eq!(table.get(2, 5, 5), Some(Complex64::new(0.0, 0.0)));
        assert!(table.get(5, 0, 0).is_none());
        assert!(table.get(1, 10, 0).is_none());
        assert_relative_eq!(table.get(3, 9, 9).unwrap().norm(), 2.0 / (3.0 * PI));
    }

    #[test]
    fn parseval_partial_sum() {
        let partial = |k_max: i32| -> f64 {
            (-k_max..=k_max)
                .filter(|k| k % 2 != 0)
                .map(|k| square_wave_coefficient(k, 1e6, 3.3e-7).norm_sqr())
                .sum()
        };
        // Missing power is (8 / pi^2) * sum over odd k > k_max of 1 / k^2.
        let tail = |k_max: i32| -> f64 {
            8.0 / (PI * PI)
                * (k_max + 1..2_000_001)
                    .filter(|k| k % 2 != 0)
                    .map(|k| 1.0 / (k as f64 * k as f64))
                    .sum::<f64>()
        };
        let p99 = partial(99);
        assert!((p99 - (1.0 - tail(99))).abs() < 1e-6, "{p99}");
        assert!(p99 > 0.995 && p99 < 1.0);
        assert!(partial(499) >= 0.999);
    }

    #[test]
    fn synchronized_lattice_reflects_back_with_reduced_magnitude() {
        let (grid, ctx) = lattice10();
        let prof = SquareWaveProfile::synchronized(1e6, &grid).unwrap();
        let obs = ObservationGrid::hemisphere(1.0, None).unwrap();
        let inv = invariant_pattern(&grid, &obs, &ctx, &ElementPattern::Isotropic).unwrap();
        let h1 = harmonic_pattern(&grid, &prof, 1, &obs, &ctx, &ElementPattern::Isotropic).unwrap();
        let (i, m) = h1.peak().unwrap();
        assert_eq!(h1.directions()[i].theta(), 0.0);
        assert_relative_eq!(m, 2.0 / PI, max_relative = 1e-12);
        assert_relative_eq!(inv.peak().unwrap().1, 1.0, max_relative = 1e-12);
        assert_relative_eq!(h1.frequency, 10e9 + 1e6);
        // constant coefficient factors out of the sum
        let d3 = square_wave_coefficient(3, 1e6, 0.0);
        let h3 = harmonic_pattern(&grid, &prof, 3, &obs, &ctx, &ElementPattern::Isotropic).unwrap();
        for (a, b) in h3.values.iter().zip(&inv.values) {
            assert!((a - d3 * b).norm() < 1e-12);
        }
        for v in &h3.values {
            assert!(v.norm() <= 2.0 / (3.0 * PI) + 1e-12);
        }
    }

    #[test]
    fn even_harmonic_pattern_is_zero() {
        let (grid, ctx) = lattice10();
        let prof = SquareWaveProfile::synchronized(1e6, &grid).unwrap();
        let obs = ObservationGrid::hemisphere(5.0, None).unwrap();
        let h2 = harmonic_pattern(&grid, &prof, 2, &obs, &ctx, &ElementPattern::Isotropic).unwrap();
        assert!(h2.values.iter().all(|v| v.norm() == 0.0));
        assert!(harmonic_pattern(
            &grid,
            &prof,
            1,
            &ObservationGrid::points(vec![crate::geometry::Point3::new(0.0, 0.0, 1.0)]).unwrap(),
            &ctx,
            &ElementPattern::Isotropic
        )
        .is_err());
    }

    #[test]
    fn steering_delay_edge_cases() {
        let (grid, ctx) = lattice10();
        let target = DirectionAngles::from_degrees(30.0, 45.0).unwrap();
        let delays = steering_delays(&grid, target, 1, &ctx, 1e6).unwrap();
        assert_eq!(delays[0], 0.0);
        let broadside = steering_delays(&grid, DirectionAngles::broadside(), 1, &ctx, 1e6).unwrap();
        assert!(broadside.iter().all(|d| *d == 0.0));
        assert!(matches!(
            steering_delays(&grid, target, 2, &ctx, 1e6),
            Err(IrsError::EvenHarmonic(2))
        ));
    }

    #[test]
    fn delays_steer_first_harmonic() {
        let (grid, ctx) = lattice10();
        let target = DirectionAngles::from_degrees(30.0, 45.0).unwrap();
        let prof = SquareWaveProfile::steered(1e6, &grid, target, 1, &ctx).unwrap();
        let obs = ObservationGrid::hemisphere(1.0, None).unwrap();
        let h1 = harmonic_pattern(&grid, &prof, 1, &obs, &ctx, &ElementPattern::Isotropic).unwrap();
        let (i, m) = h1.peak().unwrap();
        assert!(h1.directions()[i].angular_separation(&target).to_degrees() < 1e-6);
        assert_relative_eq!(m, 2.0 / PI, max_relative = 1e-9);
    }

    #[test]
    fn spectrum_of_synchronized_lattice() {
        let (grid, ctx) = lattice10();
        let prof = SquareWaveProfile::synchronized(1e6, &grid).unwrap();
        let lines = spectrum_at_direction(
            &grid,
            &prof,
            DirectionAngles::broadside(),
            7,
            &ctx,
            &ElementPattern::Isotropic,
        )
        .unwrap();
        assert_eq!(lines.len(), 15);
        for line in &lines {
            assert_relative_eq!(line.frequency, 10e9 + line.k as f64 * 1e6);
            if line.k % 2 == 0 {
                assert_eq!(line.value.norm(), 0.0);
            } else {
                assert_relative_eq!(
                    line.value.norm(),
                    2.0 / (PI * line.k.unsigned_abs() as f64),
                    max_relative = 1e-12
                );
            }
        }
        for k in 1..=7 {
            let pos = lines.iter().find(|l| l.k == k).unwrap().value;
            let neg = lines.iter().find(|l| l.k == -k).unwrap().value;
            assert!((neg - pos.conj()).norm() < 1e-12);
        }
        assert!(spectrum_at_direction(
            &grid,
            &prof,
            DirectionAngles::broadside(),
            0,
            &ctx,
            &ElementPattern::Isotropic
        )
        .is_err());
    }

    #[test]
    fn first_harmonic_delays_misdirect_third_harmonic() {
        let (grid, ctx) = lattice10();
        let target = DirectionAngles::from_degrees(30.0, 45.0).unwrap();
        let prof = SquareWaveProfile::steered(1e6, &grid, target, 1, &ctx).unwrap();
        let lines =
            spectrum_at_direction(&grid, &prof, target, 3, &ctx, &ElementPattern::Isotropic)
                .unwrap();
        let at = |k: i32| lines.iter().find(|l| l.k == k).unwrap().value.norm();
        assert_relative_eq!(at(1), 2.0 / PI, max_relative = 1e-9);
        assert!(at(3) < 2.0 / (3.0 * PI));
    }

    #[test]
    fn carrier_ratio_warning() {
        let (grid, ctx) = lattice10();
        let slow = SquareWaveProfile::synchronized(1e6, &grid).unwrap();
        assert!(slow.validity_warning(&ctx).is_none());
        let fast = SquareWaveProfile::synchronized(2e8, &grid).unwrap();
        assert!(fast.validity_warning(&ctx).is_some());
        assert!(SquareWaveProfile::synchronized(0.0, &grid).is_err());
        assert!(SquareWaveProfile::new(1e6, &grid, vec![0.0; 3]).is_err());
    }

    #[test]
    fn binary_states_are_maximally_separated() {
        assert_eq!(ModulationState::separation(), 2.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn delay_phase_is_linear(tau in 0.0f64..5e-5, k in 0i32..8) {
            let k = 2 * k + 1;
            let f0 = 1e6;
            let d0 = square_wave_coefficient(k, f0, 0.0);
            let dt = square_wave_coefficient(k, f0, tau);
            let diff = wrap_phase(dt.arg() - d0.arg() + 2.0 * PI * k as f64 * f0 * tau);
            prop_assert!(diff.abs() < 1e-9 || (diff.abs() - 2.0 * PI).abs() < 1e-9);
        }

        #[test]
        fn closed_form_matches_quadrature(tau in 0.0f64..3e-6, k in -15i32..=15) {
            let f0 = 1e6;
            let closed = square_wave_coefficient(k, f0, tau);
            let numeric = quadrature_coefficient(k, f0, tau, 10_000);
            prop_assert!((closed - numeric).norm() < 1e-6);
        }
    }
}
