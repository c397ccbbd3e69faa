//! Focus/defocus spatial modulation.
//!
//! A `1` is sent by focusing the surface on the receiver, a `0` by a freshly
//! randomized phase profile. The receiver thresholds the field magnitude,
//! normalized to the focused frame's peak.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{IrsError, Result};
use crate::geometry::{ApertureGrid, DirectionAngles, Point3, PropagationContext};
use crate::propagation::{incident_on_aperture, reflected_excitations, superpose, SourceModel};
use crate::synthesis::{focusing_profile, randomized_profile, FocalSpec, PhaseProfile};

/// Default detection threshold relative to the focused peak, dB.
pub const DEFAULT_THRESHOLD_DB: f64 = -10.0;

/// Samples of the ray scan used to locate the focused frame's peak.
const PEAK_SCAN_SAMPLES: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverSpec {
    position: Point3,
    threshold_db: f64,
}

impl ReceiverSpec {
    pub fn new(position: Point3, threshold_db: f64) -> Result<Self> {
        if !position.is_finite() {
            return Err(IrsError::InvalidArgument(format!(
                "non-finite receiver position {position}"
            )));
        }
        if !(threshold_db.is_finite() && threshold_db < 0.0) {
            return Err(IrsError::InvalidArgument(format!(
                "threshold must be negative dB, got {threshold_db}"
            )));
        }
        Ok(Self {
            position,
            threshold_db,
        })
    }

    /// Receiver at `distance` along `direction` from `origin`, default threshold.
    pub fn at(direction: DirectionAngles, distance: f64, origin: Point3) -> Result<Self> {
        Self::new(
            origin + direction.unit_vector() * distance,
            DEFAULT_THRESHOLD_DB,
        )
    }

    pub fn position(&self) -> Point3 {
        self.position
    }

    pub fn threshold_db(&self) -> f64 {
        self.threshold_db
    }

    pub fn with_threshold(self, threshold_db: f64) -> Result<Self> {
        Self::new(self.position, threshold_db)
    }
}

/// Bits to send and the master seed of the defocusing profiles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePlan {
    bits: Vec<bool>,
    master_seed: u64,
}

impl FramePlan {
    pub fn new(bits: Vec<bool>, master_seed: u64) -> Result<Self> {
        if bits.is_empty() {
            return Err(IrsError::InvalidArgument("frame plan has no bits".into()));
        }
        Ok(Self { bits, master_seed })
    }

    /// `count` pseudo-random bits drawn from `seed`.
    pub fn random(count: usize, seed: u64, master_seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits = (0..count).map(|_| rng.next_u32() & 1 == 1).collect();
        Self::new(bits, master_seed)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Seed of the randomized profile used by frame `index`.
    pub fn frame_seed(&self, index: usize) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(index as u64);
        rng.next_u64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRecord {
    pub index: usize,
    pub sent: bool,
    /// Field magnitude at the receiver relative to the focused peak, dB.
    pub magnitude_db: f64,
    pub decoded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkReport {
    pub frames: Vec<FrameRecord>,
    pub threshold_db: f64,
    /// Absolute magnitude used as the 0 dB reference.
    pub reference_magnitude: f64,
    /// Median focused minus median defocused magnitude, when both occur.
    pub median_contrast_db: Option<f64>,
    pub bit_errors: usize,
    pub warnings: Vec<String>,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

impl LinkReport {
    /// Assembles a report from per-frame magnitudes, decoding with `threshold_db`.
    pub fn from_magnitudes(
        sent: &[bool],
        magnitudes_db: &[f64],
        threshold_db: f64,
        reference_magnitude: f64,
    ) -> Result<Self> {
        if sent.len() != magnitudes_db.len() {
            return Err(IrsError::LengthMismatch {
                what: "frame magnitudes",
                expected: sent.len(),
                found: magnitudes_db.len(),
            });
        }
        let frames: Vec<FrameRecord> = sent
            .iter()
            .zip(magnitudes_db)
            .enumerate()
            .map(|(index, (&sent, &magnitude_db))| FrameRecord {
                index,
                sent,
                magnitude_db,
                decoded: magnitude_db >= threshold_db,
            })
            .collect();
        let bit_errors = frames.iter().filter(|f| f.sent != f.decoded).count();
        let mut ones: Vec<f64> = frames
            .iter()
            .filter(|f| f.sent)
            .map(|f| f.magnitude_db)
            .collect();
        let mut zeros: Vec<f64> = frames
            .iter()
            .filter(|f| !f.sent)
            .map(|f| f.magnitude_db)
            .collect();
        let median_contrast_db = match (median(&mut ones), median(&mut zeros)) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        };
        Ok(Self {
            frames,
            threshold_db,
            reference_magnitude,
            median_contrast_db,
            bit_errors,
            warnings: Vec::new(),
        })
    }

    pub fn decoded_bits(&self) -> Vec<bool> {
        self.frames.iter().map(|f| f.decoded).collect()
    }

    /// Delimited text: `#` metadata lines then `frame,bit_sent,magnitude_db,bit_decoded`.
    pub fn to_delimited(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# kind=link_report");
        let _ = writeln!(out, "# columns=frame,bit_sent,magnitude_db,bit_decoded");
        let _ = writeln!(out, "# normalization=focused_peak");
        let _ = writeln!(out, "# reference_magnitude={:e}", self.reference_magnitude);
        let _ = writeln!(out, "# threshold_db={}", fixed6(self.threshold_db));
        let _ = writeln!(out, "# frames={}", self.frames.len());
        for f in &self.frames {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                f.index,
                u8::from(f.sent),
                fixed6(f.magnitude_db),
                u8::from(f.decoded)
            );
        }
        out
    }
}

/// Fixed six-decimal formatting without a negative zero.
pub(crate) fn fixed6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

/// Minimum focused-frame magnitude minus maximum defocused-frame magnitude, dB.
pub fn contrast(report: &LinkReport) -> Result<f64> {
    let focused = report
        .frames
        .iter()
        .filter(|f| f.sent)
        .map(|f| f.magnitude_db)
        .reduce(f64::min)
        .ok_or(IrsError::MissingSymbol("focused (1)"))?;
    let defocused = report
        .frames
        .iter()
        .filter(|f| !f.sent)
        .map(|f| f.magnitude_db)
        .reduce(f64::max)
        .ok_or(IrsError::MissingSymbol("defocused (0)"))?;
    Ok(focused - defocused)
}

fn field_at(
    aperture: &ApertureGrid,
    excitations: &[Complex64],
    points: &[Point3],
    ctx: &PropagationContext,
) -> Result<Vec<f64>> {
    Ok(superpose(
        &aperture.element_positions(),
        excitations,
        points,
        ctx.wavenumber(),
    )?
    .into_iter()
    .map(|v| v.norm())
    .collect())
}

/// Sends `plan` over the surface and decodes it at the receiver.
pub fn run_link(
    aperture: &ApertureGrid,
    tag: &SourceModel,
    receiver: &ReceiverSpec,
    plan: &FramePlan,
    ctx: &PropagationContext,
) -> Result<LinkReport> {
    let origin = aperture.origin();
    if receiver.position.z <= origin.z {
        return Err(IrsError::InvalidArgument(format!(
            "receiver {} is not in front of the aperture",
            receiver.position
        )));
    }
    let mut warnings = Vec::new();
    let focal = FocalSpec::from_point(receiver.position, origin)?;
    if let Some(w) = focal.fresnel_warning(aperture, ctx) {
        warnings.push(format!("receiver: {w}"));
    }

    let incident = incident_on_aperture(tag, aperture, ctx)?;
    let focused = focusing_profile(aperture, &incident, &focal, ctx)?;
    let focused_exc = reflected_excitations(aperture, &incident, &focused, 1.0)?;

    // Focused-frame peak: receiver itself plus a ray scan through it.
    let mut probe = vec![receiver.position];
    let dir = focal.direction().unit_vector();
    let r = focal.distance();
    probe.extend((0..PEAK_SCAN_SAMPLES).map(|i| {
        let t = 0.5 + i as f64 / (PEAK_SCAN_SAMPLES - 1) as f64;
        origin + dir * (r * t)
    }));
    let probe_mags = field_at(aperture, &focused_exc, &probe, ctx)?;
    let focused_at_rx = probe_mags[0];
    let reference = probe_mags.iter().copied().fold(0.0, f64::max);

    let rx = [receiver.position];
    let magnitudes: Vec<Result<f64>> = plan
        .bits
        .par_iter()
        .enumerate()
        .map(|(i, &bit)| {
            let mag = if bit {
                focused_at_rx
            } else {
                let prof = randomized_profile(aperture, plan.frame_seed(i));
                let exc = reflected_excitations(aperture, &incident, &prof, 1.0)?;
                field_at(aperture, &exc, &rx, ctx)?[0]
            };
            Ok(20.0 * (mag / reference).log10())
        })
        .collect();
    let magnitudes: Vec<f64> = magnitudes.into_iter().collect::<Result<_>>()?;
    let mut report =
        LinkReport::from_magnitudes(&plan.bits, &magnitudes, receiver.threshold_db, reference)?;
    report.warnings = warnings;
    Ok(report)
}

/// dB-normalized magnitude of the reflected field along the broadside axis
/// through the aperture center, at the given ranges.
pub fn depth_profile(
    aperture: &ApertureGrid,
    tag: &SourceModel,
    profile: &PhaseProfile,
    axis_samples: &[f64],
    ctx: &PropagationContext,
) -> Result<Vec<(f64, f64)>> {
    depth_profile_along(
        aperture,
        tag,
        profile,
        DirectionAngles::broadside(),
        axis_samples,
        ctx,
    )
}

/// As [`depth_profile`] along an arbitrary direction from the aperture center.
pub fn depth_profile_along(
    aperture: &ApertureGrid,
    tag: &SourceModel,
    profile: &PhaseProfile,
    direction: DirectionAngles,
    axis_samples: &[f64],
    ctx: &PropagationContext,
) -> Result<Vec<(f64, f64)>> {
    if axis_samples.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(IrsError::InvalidArgument(
            "depth samples must be positive ranges".into(),
        ));
    }
    let incident = incident_on_aperture(tag, aperture, ctx)?;
    let exc = reflected_excitations(aperture, &incident, profile, 1.0)?;
    let origin = aperture.origin();
    let u = direction.unit_vector();
    let points: Vec<Point3> = axis_samples.iter().map(|r| origin + u * *r).collect();
    let mags = field_at(aperture, &exc, &points, ctx)?;
    let peak = mags.iter().copied().fold(0.0, f64::max);
    Ok(axis_samples
        .iter()
        .zip(mags)
        .map(|(r, m)| (*r, 20.0 * (m / peak).log10()))
        .collect())
}
