//! TOML scenario configuration and the runner behind `irs-sim`.
//!
//! A config holds the shared setup (carrier, aperture, tag, observation grid,
//! output) and exactly one of the `[steer]`, `[focus]`, `[modulate]` or
//! `[timevary]` sections. Angles are in degrees, lengths in metres.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::IrsError;
use crate::fieldmap::{emit_field_map, to_db, FieldMap, Normalization};
use crate::geometry::{
    arange, fresnel_bounds, ApertureGrid, DirectionAngles, FresnelBounds, ObservationGrid, Point3,
    PropagationContext, SPEED_OF_LIGHT,
};
use crate::modulation::{
    contrast, fixed6, run_link, FramePlan, ReceiverSpec, DEFAULT_THRESHOLD_DB,
};
use crate::propagation::{
    incident_on_aperture, reflect_and_radiate_scaled, ElementPattern, SourceModel,
};
use crate::synthesis::{
    focusing_profile, quantize_profile, randomized_profile, steering_profile, FocalSpec,
    PhaseProfile, SteeringSpec,
};
use crate::timevarying::{
    harmonic_pattern, invariant_pattern, spectrum_at_direction, steering_delays, SquareWaveProfile,
};

/// Default depth scan for focusing, metres.
pub const DEFAULT_DEPTH_RANGE: (f64, f64, f64) = (0.1, 1.5, 0.001);
pub const DEFAULT_ANGULAR_STEP_DEG: f64 = 1.0;
pub const DEFAULT_HARMONICS: [i32; 4] = [-3, -1, 1, 3];
pub const DEFAULT_OUTPUT_DIR: &str = "out";

// ---------------------------------------------------------------- raw schema

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    frequency: Option<f64>,
    wave_speed: Option<f64>,
    seed: Option<u64>,
    reflection_magnitude: Option<f64>,
    aperture: Option<RawAperture>,
    tag: Option<RawPlacement>,
    observation: Option<RawObservation>,
    output: Option<RawOutput>,
    steer: Option<RawSteer>,
    focus: Option<RawFocus>,
    modulate: Option<RawModulate>,
    timevary: Option<RawTimevary>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAperture {
    count_x: Option<i64>,
    count_y: Option<i64>,
    spacing_x: Option<f64>,
    spacing_y: Option<f64>,
    cosine_power: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlacement {
    position: Option<[f64; 3]>,
    theta_deg: Option<f64>,
    phi_deg: Option<f64>,
    distance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObservation {
    kind: Option<String>,
    step_deg: Option<f64>,
    theta_deg: Option<[f64; 2]>,
    phi_deg: Option<[f64; 2]>,
    range: Option<f64>,
    x: Option<[f64; 3]>,
    y: Option<[f64; 3]>,
    z: Option<[f64; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    phase: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSteer {
    theta_deg: Option<f64>,
    phi_deg: Option<f64>,
    quantization_bits: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFocus {
    theta_deg: Option<f64>,
    phi_deg: Option<f64>,
    distance: Option<f64>,
    quantization_bits: Option<i64>,
    depth_min: Option<f64>,
    depth_max: Option<f64>,
    depth_step: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModulate {
    bits: Option<String>,
    random_bits: Option<i64>,
    threshold_db: Option<f64>,
    receiver: Option<RawPlacement>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTimevary {
    mod_frequency: Option<f64>,
    harmonics: Option<Vec<i64>>,
    delays: Option<Vec<f64>>,
    target_theta_deg: Option<f64>,
    target_phi_deg: Option<f64>,
    steer_harmonic: Option<i64>,
    normalization: Option<String>,
    spectrum_k_max: Option<i64>,
}

// ---------------------------------------------------------- validated config

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKindName {
    Steer,
    Focus,
    Modulate,
    Timevary,
}

impl ScenarioKindName {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKindName::Steer => "steer",
            ScenarioKindName::Focus => "focus",
            ScenarioKindName::Modulate => "modulate",
            ScenarioKindName::Timevary => "timevary",
        }
    }
}

impl fmt::Display for ScenarioKindName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteerParams {
    pub direction: DirectionAngles,
    pub quantization_bits: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocusParams {
    pub focal: FocalSpec,
    pub quantization_bits: Option<u32>,
    /// Ranges along the focal direction at which the depth profile is sampled.
    pub depth_samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BitSource {
    Explicit(Vec<bool>),
    /// This many bits drawn from the scenario seed.
    Random(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulateParams {
    pub bits: BitSource,
    pub receiver: Point3,
    pub threshold_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarmonicNormalization {
    /// Relative to the invariant (static) pattern's peak.
    Invariant,
    /// Each harmonic relative to its own peak.
    PerHarmonic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DelaySpec {
    Synchronized,
    Explicit(Vec<f64>),
    Steered {
        target: DirectionAngles,
        harmonic: i32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimevaryParams {
    pub mod_frequency: f64,
    pub harmonics: Vec<i32>,
    pub delays: DelaySpec,
    pub normalization: HarmonicNormalization,
    pub spectrum_k_max: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioKind {
    Steer(SteerParams),
    Focus(FocusParams),
    Modulate(ModulateParams),
    Timevary(TimevaryParams),
}

impl ScenarioKind {
    pub fn name(&self) -> ScenarioKindName {
        match self {
            ScenarioKind::Steer(_) => ScenarioKindName::Steer,
            ScenarioKind::Focus(_) => ScenarioKindName::Focus,
            ScenarioKind::Modulate(_) => ScenarioKindName::Modulate,
            ScenarioKind::Timevary(_) => ScenarioKindName::Timevary,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub context: PropagationContext,
    pub aperture: ApertureGrid,
    pub element_pattern: ElementPattern,
    pub reflection_magnitude: f64,
    pub tag: SourceModel,
    pub seed: u64,
    pub kind: ScenarioKind,
    /// `None` selects the scenario's default grid.
    pub observation: Option<ObservationGrid>,
    pub output_dir: PathBuf,
    pub write_phase: bool,
    /// Non-fatal findings from validation.
    pub warnings: Vec<String>,
}

/// Carrier and aperture only, as used by the `bounds` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct ApertureConfig {
    pub context: PropagationContext,
    pub aperture: ApertureGrid,
}

impl ApertureConfig {
    pub fn bounds(&self) -> crate::error::Result<FresnelBounds> {
        fresnel_bounds(&self.aperture, &self.context)
    }

    pub fn report(&self) -> crate::error::Result<String> {
        let b = self.bounds()?;
        Ok(format!(
            "wavelength_m={}\naperture_size_m={}\nfresnel_lower_m={}\nfresnel_upper_m={}\n",
            fixed6(self.context.wavelength()),
            fixed6(self.aperture.aperture_size()),
            fixed6(b.lower),
            fixed6(b.upper)
        ))
    }
}

// -------------------------------------------------------------------- errors

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid config:\n{}", format_violations(.0))]
    Invalid(Vec<Violation>),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("  {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl ConfigError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ConfigError::Invalid(v) => v,
            ConfigError::Syntax { .. } => &[],
        }
    }
}

/// A model failure while running a scenario.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{scenario} scenario: {source}")]
pub struct ScenarioError {
    pub scenario: ScenarioKindName,
    #[source]
    pub source: IrsError,
}

// ---------------------------------------------------------------- validation

#[derive(Default)]
struct Checker {
    violations: Vec<Violation>,
    warnings: Vec<String>,
}

impl Checker {
    fn fail(&mut self, path: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn positive(&mut self, path: &str, v: Option<f64>) -> Option<f64> {
        match v {
            None => None,
            Some(x) if x.is_finite() && x > 0.0 => Some(x),
            Some(x) => {
                self.fail(path, format!("must be positive, got {x}"));
                None
            }
        }
    }

    fn required_positive(&mut self, path: &str, v: Option<f64>) -> Option<f64> {
        if v.is_none() {
            self.fail(path, "is required");
        }
        self.positive(path, v)
    }

    fn count(&mut self, path: &str, v: Option<i64>) -> Option<usize> {
        match v {
            None => {
                self.fail(path, "is required");
                None
            }
            Some(c) if c >= 1 => usize::try_from(c).ok(),
            Some(c) => {
                self.fail(path, format!("must be at least 1, got {c}"));
                None
            }
        }
    }

    fn direction(
        &mut self,
        path: &str,
        theta: Option<f64>,
        phi: Option<f64>,
    ) -> Option<DirectionAngles> {
        let t = theta.unwrap_or(0.0);
        let p = phi.unwrap_or(0.0);
        match DirectionAngles::from_degrees(t, p) {
            Ok(d) => Some(d),
            Err(e) => {
                self.fail(path, e.to_string());
                None
            }
        }
    }

    fn bits(&mut self, path: &str, v: Option<i64>) -> Option<u32> {
        match v {
            None => None,
            Some(b) if (1..=24).contains(&b) => Some(b as u32),
            Some(b) => {
                self.fail(path, format!("must be in 1..=24, got {b}"));
                None
            }
        }
    }

    fn placement(
        &mut self,
        path: &str,
        raw: Option<&RawPlacement>,
        origin: Point3,
    ) -> Option<Point3> {
        let Some(raw) = raw else {
            self.fail(path, "is required");
            return None;
        };
        if let Some(p) = raw.position {
            if raw.theta_deg.is_some() || raw.phi_deg.is_some() || raw.distance.is_some() {
                self.fail(
                    path,
                    "give either position or theta_deg/phi_deg/distance, not both",
                );
                return None;
            }
            let p = Point3::new(p[0], p[1], p[2]);
            if !p.is_finite() {
                self.fail(&format!("{path}.position"), "must be finite");
                return None;
            }
            return Some(p);
        }
        let dir = self.direction(path, raw.theta_deg, raw.phi_deg);
        let dist = self.required_positive(&format!("{path}.distance"), raw.distance);
        Some(origin + dir?.unit_vector() * dist?)
    }
}

fn syntax_error(text: &str, e: &toml::de::Error) -> ConfigError {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    ConfigError::Syntax {
        line,
        message: e.message().trim().to_string(),
    }
}

fn parse_raw(text: &str) -> Result<RawConfig, ConfigError> {
    toml::from_str(text).map_err(|e| syntax_error(text, &e))
}

fn check_carrier(
    c: &mut Checker,
    raw: &RawConfig,
) -> (Option<PropagationContext>, Option<ApertureGrid>) {
    let frequency = c.required_positive("frequency", raw.frequency);
    let speed = c
        .positive("wave_speed", raw.wave_speed)
        .or(if raw.wave_speed.is_none() {
            Some(SPEED_OF_LIGHT)
        } else {
            None
        });
    let ctx = match (frequency, speed) {
        (Some(f), Some(s)) => PropagationContext::new(f, s).ok(),
        _ => None,
    };
    let aperture = match &raw.aperture {
        None => {
            c.fail("aperture", "is required");
            None
        }
        Some(a) => {
            let cx = c.count("aperture.count_x", a.count_x);
            let cy = c.count("aperture.count_y", a.count_y);
            let half = ctx.map(|x| x.wavelength() / 2.0);
            let sx = c.positive("aperture.spacing_x", a.spacing_x);
            let sy = c.positive("aperture.spacing_y", a.spacing_y);
            let sx = if a.spacing_x.is_none() { half } else { sx };
            let sy = if a.spacing_y.is_none() { half } else { sy };
            match (cx, cy, sx, sy) {
                (Some(cx), Some(cy), Some(sx), Some(sy)) => match ApertureGrid::new(cx, cy, sx, sy)
                {
                    Ok(g) => Some(g),
                    Err(e) => {
                        c.fail("aperture", e.to_string());
                        None
                    }
                },
                _ => None,
            }
        }
    };
    (ctx, aperture)
}

/// Parses and validates only the carrier and aperture.
pub fn parse_aperture_config(text: &str) -> Result<ApertureConfig, ConfigError> {
    let raw = parse_raw(text)?;
    let mut c = Checker::default();
    let (ctx, aperture) = check_carrier(&mut c, &raw);
    match (ctx, aperture) {
        (Some(context), Some(aperture)) if c.violations.is_empty() => {
            Ok(ApertureConfig { context, aperture })
        }
        _ => Err(ConfigError::Invalid(c.violations)),
    }
}

fn check_observation(c: &mut Checker, raw: Option<&RawObservation>) -> Option<ObservationGrid> {
    let raw = raw?;
    let kind = raw.kind.as_deref().unwrap_or("angular");
    let angular_keys = raw.step_deg.is_some()
        || raw.theta_deg.is_some()
        || raw.phi_deg.is_some()
        || raw.range.is_some();
    let volume_keys = raw.x.is_some() || raw.y.is_some() || raw.z.is_some();
    match kind {
        "angular" => {
            if volume_keys {
                c.fail("observation", "x/y/z only apply to kind = \"volume\"");
            }
            let step = c
                .positive("observation.step_deg", raw.step_deg)
                .unwrap_or(DEFAULT_ANGULAR_STEP_DEG);
            let range = c.positive("observation.range", raw.range);
            if raw.range.is_some() && range.is_none() {
                return None;
            }
            let grid = if raw.theta_deg.is_none() && raw.phi_deg.is_none() {
                ObservationGrid::hemisphere(step, range)
            } else {
                let t = raw.theta_deg.unwrap_or([0.0, 90.0]);
                let p = raw.phi_deg.unwrap_or([-180.0 + step, 180.0]);
                let axis = |a: [f64; 2]| -> Vec<f64> {
                    arange(a[0], a[1], step)
                        .into_iter()
                        .filter(|v| *v <= a[1] + 1e-9)
                        .map(f64::to_radians)
                        .collect()
                };
                ObservationGrid::angular(axis(t), axis(p), range)
            };
            match grid {
                Ok(g) => Some(g),
                Err(e) => {
                    c.fail("observation", e.to_string());
                    None
                }
            }
        }
        "volume" => {
            if angular_keys {
                c.fail(
                    "observation",
                    "step_deg/theta_deg/phi_deg/range only apply to kind = \"angular\"",
                );
            }
            let mut axes = Vec::new();
            for (name, axis) in [("x", raw.x), ("y", raw.y), ("z", raw.z)] {
                let path = format!("observation.{name}");
                match axis {
                    None => c.fail(&path, "is required as [min, max, step]"),
                    Some([lo, hi, step]) => {
                        if !(step > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) {
                            c.fail(&path, "needs min <= max and a positive step");
                        } else {
                            axes.push(
                                arange(lo, hi, step)
                                    .into_iter()
                                    .filter(|v| *v <= hi + 1e-9)
                                    .collect::<Vec<_>>(),
                            );
                        }
                    }
                }
            }
            if axes.len() != 3 {
                return None;
            }
            let zs = axes.pop()?;
            let ys = axes.pop()?;
            let xs = axes.pop()?;
            match ObservationGrid::volume(xs, ys, zs) {
                Ok(g) => Some(g),
                Err(e) => {
                    c.fail("observation", e.to_string());
                    None
                }
            }
        }
        other => {
            c.fail(
                "observation.kind",
                format!("unknown kind {other:?}, expected \"angular\" or \"volume\""),
            );
            None
        }
    }
}

fn fresnel_note(
    c: &mut Checker,
    what: &str,
    distance: f64,
    aperture: Option<&ApertureGrid>,
    ctx: Option<&PropagationContext>,
) {
    if let (Some(a), Some(x)) = (aperture, ctx) {
        if let Ok(b) = fresnel_bounds(a, x) {
            if !b.contains(distance) {
                c.warnings.push(format!(
                    "{what} {:.4} m lies outside the radiative near-field interval ({:.4}, {:.4}) m",
                    distance, b.lower, b.upper
                ));
            }
        }
    }
}

/// Parses and validates a scenario config, collecting every violation.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw = parse_raw(text)?;
    let mut c = Checker::default();
    let (ctx, aperture) = check_carrier(&mut c, &raw);
    let origin = Point3::ORIGIN;

    let reflection_magnitude = match raw.reflection_magnitude {
        None => Some(1.0),
        Some(r) if r.is_finite() && (0.0..=1.0).contains(&r) && r > 0.0 => Some(r),
        Some(r) => {
            c.fail(
                "reflection_magnitude",
                format!("must be in (0, 1], got {r}"),
            );
            None
        }
    };
    let element_pattern = match raw.aperture.as_ref().and_then(|a| a.cosine_power) {
        None => ElementPattern::Isotropic,
        Some(q) if q.is_finite() && q >= 0.0 => ElementPattern::CosinePower(q),
        Some(q) => {
            c.fail(
                "aperture.cosine_power",
                format!("must be non-negative, got {q}"),
            );
            ElementPattern::Isotropic
        }
    };

    let tag_point = c.placement("tag", raw.tag.as_ref(), origin);
    let tag = tag_point.map(SourceModel::point);
    if let Some(p) = tag_point {
        if p.z <= origin.z {
            c.fail("tag", "must lie in front of the aperture (z > 0)");
        }
    }

    let observation = check_observation(&mut c, raw.observation.as_ref());

    let sections = [
        raw.steer.is_some(),
        raw.focus.is_some(),
        raw.modulate.is_some(),
        raw.timevary.is_some(),
    ];
    let kind = match sections.iter().filter(|s| **s).count() {
        0 => {
            c.fail(
                "scenario",
                "one of [steer], [focus], [modulate], [timevary] is required",
            );
            None
        }
        1 => scenario_kind(
            &mut c,
            &raw,
            aperture.as_ref(),
            ctx.as_ref(),
            observation.as_ref(),
        ),
        _ => {
            c.fail(
                "scenario",
                "only one of [steer], [focus], [modulate], [timevary] may be given",
            );
            None
        }
    };

    let output_dir = PathBuf::from(
        raw.output
            .as_ref()
            .and_then(|o| o.dir.clone())
            .unwrap_or_else(|| DEFAULT_OUTPUT_DIR.to_string()),
    );
    let write_phase = raw.output.as_ref().and_then(|o| o.phase).unwrap_or(false);

    match (ctx, aperture, tag, kind, reflection_magnitude) {
        (Some(context), Some(aperture), Some(tag), Some(kind), Some(reflection_magnitude))
            if c.violations.is_empty() =>
        {
            Ok(ScenarioConfig {
                context,
                aperture,
                element_pattern,
                reflection_magnitude,
                tag,
                seed: raw.seed.unwrap_or(0),
                kind,
                observation,
                output_dir,
                write_phase,
                warnings: c.warnings,
            })
        }
        _ => Err(ConfigError::Invalid(c.violations)),
    }
}

fn scenario_kind(
    c: &mut Checker,
    raw: &RawConfig,
    aperture: Option<&ApertureGrid>,
    ctx: Option<&PropagationContext>,
    observation: Option<&ObservationGrid>,
) -> Option<ScenarioKind> {
    if let Some(s) = &raw.steer {
        if s.theta_deg.is_none() {
            c.fail("steer.theta_deg", "is required");
        }
        let direction = c.direction("steer", s.theta_deg, s.phi_deg);
        let quantization_bits = c.bits("steer.quantization_bits", s.quantization_bits);
        return Some(ScenarioKind::Steer(SteerParams {
            direction: direction?,
            quantization_bits,
        }));
    }
    if let Some(f) = &raw.focus {
        let direction = c.direction("focus", f.theta_deg, f.phi_deg);
        let distance = c.required_positive("focus.distance", f.distance);
        let quantization_bits = c.bits("focus.quantization_bits", f.quantization_bits);
        let (d0, d1, ds) = DEFAULT_DEPTH_RANGE;
        let lo = c.positive("focus.depth_min", f.depth_min).unwrap_or(d0);
        let hi = c.positive("focus.depth_max", f.depth_max).unwrap_or(d1);
        let step = c.positive("focus.depth_step", f.depth_step).unwrap_or(ds);
        if hi < lo {
            c.fail("focus.depth_max", "must not be below depth_min");
        }
        if let Some(d) = distance {
            fresnel_note(c, "focal distance", d, aperture, ctx);
        }
        let focal = FocalSpec::new(direction?, distance?).ok()?;
        let depth_samples = arange(lo, hi, step)
            .into_iter()
            .filter(|v| *v <= hi + 1e-9)
            .collect();
        return Some(ScenarioKind::Focus(FocusParams {
            focal,
            quantization_bits,
            depth_samples,
        }));
    }
    if let Some(m) = &raw.modulate {
        let bits = match (&m.bits, m.random_bits) {
            (Some(_), Some(_)) => {
                c.fail("modulate", "give either bits or random_bits, not both");
                None
            }
            (None, None) => {
                c.fail("modulate.bits", "is required (or random_bits)");
                None
            }
            (Some(s), None) => {
                let parsed: Option<Vec<bool>> = s
                    .chars()
                    .filter(|ch| !ch.is_whitespace() && *ch != '_')
                    .map(|ch| match ch {
                        '0' => Some(false),
                        '1' => Some(true),
                        _ => None,
                    })
                    .collect();
                match parsed {
                    Some(b) if !b.is_empty() => Some(BitSource::Explicit(b)),
                    _ => {
                        c.fail("modulate.bits", "must be a non-empty string of 0 and 1");
                        None
                    }
                }
            }
            (None, Some(n)) if n >= 1 => Some(BitSource::Random(n as usize)),
            (None, Some(n)) => {
                c.fail(
                    "modulate.random_bits",
                    format!("must be at least 1, got {n}"),
                );
                None
            }
        };
        let threshold_db = match m.threshold_db {
            None => Some(DEFAULT_THRESHOLD_DB),
            Some(t) if t.is_finite() && t < 0.0 => Some(t),
            Some(t) => {
                c.fail(
                    "modulate.threshold_db",
                    format!("must be negative, got {t}"),
                );
                None
            }
        };
        let receiver = c.placement("modulate.receiver", m.receiver.as_ref(), Point3::ORIGIN);
        if let Some(r) = receiver {
            if r.z <= 0.0 {
                c.fail(
                    "modulate.receiver",
                    "must lie in front of the aperture (z > 0)",
                );
            } else {
                fresnel_note(c, "receiver distance", r.norm(), aperture, ctx);
            }
        }
        return Some(ScenarioKind::Modulate(ModulateParams {
            bits: bits?,
            receiver: receiver?,
            threshold_db: threshold_db?,
        }));
    }
    if let Some(t) = &raw.timevary {
        if let Some(ObservationGrid::Volume { .. }) = observation {
            c.fail("observation.kind", "timevary patterns need an angular grid");
        }
        let mod_frequency = c.required_positive("timevary.mod_frequency", t.mod_frequency);
        let harmonics: Vec<i32> = match &t.harmonics {
            None => DEFAULT_HARMONICS.to_vec(),
            Some(h) if h.is_empty() => {
                c.fail("timevary.harmonics", "must not be empty");
                Vec::new()
            }
            Some(h) => h
                .iter()
                .filter_map(|k| match i32::try_from(*k) {
                    Ok(k) if k.unsigned_abs() <= 10_000 => Some(k),
                    _ => {
                        c.fail("timevary.harmonics", format!("harmonic {k} out of range"));
                        None
                    }
                })
                .collect(),
        };
        let normalization = match t.normalization.as_deref() {
            None | Some("invariant") => Some(HarmonicNormalization::Invariant),
            Some("per_harmonic") => Some(HarmonicNormalization::PerHarmonic),
            Some(other) => {
                c.fail(
                    "timevary.normalization",
                    format!("unknown value {other:?}, expected \"invariant\" or \"per_harmonic\""),
                );
                None
            }
        };
        let spectrum_k_max = match t.spectrum_k_max {
            None => Some(5),
            Some(k) if (1..=10_000).contains(&k) => Some(k as u32),
            Some(k) => {
                c.fail(
                    "timevary.spectrum_k_max",
                    format!("must be in 1..=10000, got {k}"),
                );
                None
            }
        };
        let targeted = t.target_theta_deg.is_some() || t.target_phi_deg.is_some();
        let delays = match (&t.delays, targeted) {
            (Some(_), true) => {
                c.fail("timevary", "give either delays or a target, not both");
                None
            }
            (Some(d), false) => {
                if let Some(a) = aperture {
                    if d.len() != a.len() {
                        c.fail(
                            "timevary.delays",
                            format!("expected {} values (row-major), got {}", a.len(), d.len()),
                        );
                    }
                }
                if d.iter().any(|v| !v.is_finite()) {
                    c.fail("timevary.delays", "must be finite");
                }
                Some(DelaySpec::Explicit(d.clone()))
            }
            (None, true) => {
                let target = c.direction("timevary.target", t.target_theta_deg, t.target_phi_deg);
                let harmonic = t.steer_harmonic.unwrap_or(1);
                if harmonic % 2 == 0 || i32::try_from(harmonic).is_err() {
                    c.fail(
                        "timevary.steer_harmonic",
                        format!("must be an odd harmonic, got {harmonic}"),
                    );
                    None
                } else {
                    target.map(|target| DelaySpec::Steered {
                        target,
                        harmonic: harmonic as i32,
                    })
                }
            }
            (None, false) => Some(DelaySpec::Synchronized),
        };
        if let (Some(f0), Some(x)) = (mod_frequency, ctx) {
            if x.frequency() / f0 < crate::timevarying::MIN_CARRIER_TO_MODULATION_RATIO {
                c.warnings.push(format!(
                    "carrier to modulation ratio {:.1} is below {}",
                    x.frequency() / f0,
                    crate::timevarying::MIN_CARRIER_TO_MODULATION_RATIO
                ));
            }
        }
        return Some(ScenarioKind::Timevary(TimevaryParams {
            mod_frequency: mod_frequency?,
            harmonics,
            delays: delays?,
            normalization: normalization?,
            spectrum_k_max: spectrum_k_max?,
        }));
    }
    None
}

// ------------------------------------------------------------------- running

/// Files written by a scenario plus its summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub files: Vec<PathBuf>,
    /// `(key, value)` metrics in output order.
    pub metrics: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl ScenarioOutput {
    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metrics {
            s.push_str(k);
            s.push('=');
            s.push_str(v);
            s.push('\n');
        }
        for (i, w) in self.warnings.iter().enumerate() {
            s.push_str(&format!("warning.{i}={w}\n"));
        }
        s
    }

    pub fn metric(&self, key: &str) -> Option<&str> {
        self.metrics
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

struct Run<'a> {
    config: &'a ScenarioConfig,
    files: Vec<PathBuf>,
    metrics: Vec<(String, String)>,
}

type RunResult<T> = std::result::Result<T, IrsError>;

impl Run<'_> {
    fn metric(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metrics.push((key.into(), value.into()));
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn write_text(&mut self, name: &str, text: &str) -> RunResult<()> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| IrsError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        self.files.push(path);
        Ok(())
    }

    fn write_map(&mut self, name: &str, map: FieldMap, norm: Normalization) -> RunResult<f64> {
        let path = self.path(name);
        let map = if self.config.write_phase {
            map.with_phase(true)
        } else {
            map
        };
        let f = emit_field_map(&map, &path, norm)?;
        self.files.push(path);
        Ok(f.reference)
    }

    fn common_metrics(&mut self) {
        let c = self.config;
        self.metric("scenario", c.kind.name().as_str());
        self.metric("seed", c.seed.to_string());
        self.metric("frequency_hz", fixed6(c.context.frequency()));
        self.metric("wavelength_m", fixed6(c.context.wavelength()));
        self.metric(
            "aperture",
            format!("{}x{}", c.aperture.count_x(), c.aperture.count_y()),
        );
        if let Ok(b) = fresnel_bounds(&c.aperture, &c.context) {
            self.metric("fresnel_lower_m", fixed6(b.lower));
            self.metric("fresnel_upper_m", fixed6(b.upper));
        }
    }

    fn incident(&self) -> RunResult<crate::propagation::ComplexField> {
        incident_on_aperture(
            &self.config.tag,
            &self.config.aperture,
            &self.config.context,
        )
    }

    fn radiate(
        &self,
        profile: &PhaseProfile,
        grid: &ObservationGrid,
    ) -> RunResult<crate::propagation::ComplexField> {
        let c = self.config;
        reflect_and_radiate_scaled(
            &c.aperture,
            &self.incident()?,
            profile,
            grid,
            &c.context,
            &c.element_pattern,
            c.reflection_magnitude,
        )
    }

    fn write_profile(&mut self, name: &str, profile: &PhaseProfile) -> RunResult<()> {
        let text = profile.to_text_matrix(self.config.aperture.count_x())?;
        self.write_text(name, &text)
    }

    fn quantized(&mut self, profile: PhaseProfile, bits: Option<u32>) -> RunResult<PhaseProfile> {
        match bits {
            Some(b) => {
                self.metric("quantization_bits", b.to_string());
                quantize_profile(&profile, b)
            }
            None => Ok(profile),
        }
    }
}

fn peak_direction(grid: &ObservationGrid, magnitudes: &[f64]) -> Option<(DirectionAngles, f64)> {
    let dirs = grid.directions()?;
    let mut best: Option<(usize, f64)> = None;
    for (i, m) in magnitudes.iter().enumerate() {
        if best.is_none_or(|(_, b)| *m > b) {
            best = Some((i, *m));
        }
    }
    best.map(|(i, m)| (dirs[i], m))
}

fn run_steer(run: &mut Run, p: &SteerParams) -> RunResult<()> {
    let c = run.config;
    let incident = run.incident()?;
    let profile = steering_profile(
        &c.aperture,
        &incident,
        &SteeringSpec {
            direction: p.direction,
        },
        &c.context,
    )?;
    let profile = run.quantized(profile, p.quantization_bits)?;
    run.write_profile("profile.txt", &profile)?;

    let grid = match &c.observation {
        Some(g) => g.clone(),
        None => ObservationGrid::hemisphere(DEFAULT_ANGULAR_STEP_DEG, None)?,
    };
    let field = run.radiate(&profile, &grid)?;
    let bound: f64 =
        incident.values().iter().map(|v| v.norm()).sum::<f64>() * c.reflection_magnitude;
    let map =
        FieldMap::for_grid(&field, &grid)?.with_metadata("cophased_bound", format!("{bound:e}"));
    let reference = run.write_map("pattern.csv", map, Normalization::Peak)?;

    run.metric("target_theta_deg", fixed6(p.direction.theta_deg()));
    run.metric("target_phi_deg", fixed6(p.direction.phi_deg()));
    if let Some((dir, _)) = peak_direction(&grid, &field.magnitudes()) {
        run.metric("peak_theta_deg", fixed6(dir.theta_deg()));
        run.metric("peak_phi_deg", fixed6(dir.phi_deg()));
        run.metric(
            "angular_error_deg",
            fixed6(dir.angular_separation(&p.direction).to_degrees()),
        );
    } else if let Some((i, _)) = field.peak() {
        let pt = field.positions()[i];
        run.metric(
            "peak_point_m",
            format!("{},{},{}", fixed6(pt.x), fixed6(pt.y), fixed6(pt.z)),
        );
    }
    run.metric("peak_magnitude", format!("{reference:e}"));
    run.metric("cophased_bound", format!("{bound:e}"));
    Ok(())
}

fn run_focus(run: &mut Run, p: &FocusParams) -> RunResult<()> {
    let c = run.config;
    let incident = run.incident()?;
    let profile = focusing_profile(&c.aperture, &incident, &p.focal, &c.context)?;
    let profile = run.quantized(profile, p.quantization_bits)?;
    run.write_profile("profile.txt", &profile)?;

    let u = p.focal.direction().unit_vector();
    let origin = c.aperture.origin();
    let points: Vec<Point3> = p.depth_samples.iter().map(|r| origin + u * *r).collect();
    let depth = run.radiate(&profile, &ObservationGrid::points(points)?)?;
    let map = FieldMap::ranges(&p.depth_samples, depth.values().to_vec())?
        .with_metadata(
            "direction_theta_deg",
            fixed6(p.focal.direction().theta_deg()),
        )
        .with_metadata("direction_phi_deg", fixed6(p.focal.direction().phi_deg()));
    run.write_map("depth.csv", map, Normalization::Peak)?;

    if let Some(grid) = &c.observation {
        let field = run.radiate(&profile, grid)?;
        run.write_map(
            "field_map.csv",
            FieldMap::for_grid(&field, grid)?,
            Normalization::Peak,
        )?;
    }

    let (i, _) = depth
        .peak()
        .ok_or_else(|| IrsError::InvalidArgument("empty depth scan".into()))?;
    let found = p.depth_samples[i];
    let target = p.focal.distance();
    run.metric("target_distance_m", fixed6(target));
    run.metric("focal_depth_m", fixed6(found));
    run.metric("focal_depth_error", fixed6((found - target) / target));
    Ok(())
}

fn run_modulate(run: &mut Run, p: &ModulateParams) -> RunResult<()> {
    let c = run.config;
    let plan = match &p.bits {
        BitSource::Explicit(b) => FramePlan::new(b.clone(), c.seed)?,
        BitSource::Random(n) => FramePlan::random(*n, c.seed ^ 0x6269_7473, c.seed)?,
    };
    let receiver = ReceiverSpec::new(p.receiver, p.threshold_db)?;
    let report = run_link(&c.aperture, &c.tag, &receiver, &plan, &c.context)?;
    run.write_text("link.csv", &report.to_delimited())?;

    let incident = run.incident()?;
    let focal = FocalSpec::from_point(p.receiver, c.aperture.origin())?;
    let focused = focusing_profile(&c.aperture, &incident, &focal, &c.context)?;
    run.write_profile("focused_profile.txt", &focused)?;
    if let Some(grid) = &c.observation {
        let f = run.radiate(&focused, grid)?;
        let reference = run.write_map(
            "focused_map.csv",
            FieldMap::for_grid(&f, grid)?,
            Normalization::Peak,
        )?;
        let zero = plan.bits().iter().position(|b| !b);
        if let Some(i) = zero {
            let random = randomized_profile(&c.aperture, plan.frame_seed(i));
            let f = run.radiate(&random, grid)?;
            let map = FieldMap::for_grid(&f, grid)?.with_metadata("frame", i.to_string());
            run.write_map(
                "defocused_map.csv",
                map,
                Normalization::Reference(reference),
            )?;
        }
    }

    run.metric("frames", report.frames.len().to_string());
    run.metric("bit_errors", report.bit_errors.to_string());
    run.metric("threshold_db", fixed6(p.threshold_db));
    match contrast(&report) {
        Ok(v) => run.metric("contrast_db", fixed6(v)),
        Err(_) => run.metric("contrast_db", "n/a"),
    }
    match report.median_contrast_db {
        Some(v) => run.metric("median_contrast_db", fixed6(v)),
        None => run.metric("median_contrast_db", "n/a"),
    }
    Ok(())
}

fn run_timevary(run: &mut Run, p: &TimevaryParams) -> RunResult<()> {
    let c = run.config;
    let lattice = &c.aperture;
    let profile = match &p.delays {
        DelaySpec::Synchronized => SquareWaveProfile::synchronized(p.mod_frequency, lattice)?,
        DelaySpec::Explicit(d) => SquareWaveProfile::new(p.mod_frequency, lattice, d.clone())?,
        DelaySpec::Steered { target, harmonic } => {
            let d = steering_delays(lattice, *target, *harmonic, &c.context, p.mod_frequency)?;
            SquareWaveProfile::new(p.mod_frequency, lattice, d)?
        }
    };
    let delays_text: String = profile
        .delays()
        .chunks(lattice.count_x())
        .map(|row| {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.8e}")).collect();
            cells.join(" ") + "\n"
        })
        .collect();
    run.write_text("delays.txt", &delays_text)?;

    let grid = match &c.observation {
        Some(g) => g.clone(),
        None => ObservationGrid::hemisphere(DEFAULT_ANGULAR_STEP_DEG, None)?,
    };
    let invariant = invariant_pattern(lattice, &grid, &c.context, &c.element_pattern)?;
    let inv_peak = invariant.peak().map(|(_, m)| m).unwrap_or(0.0);
    run.write_map(
        "invariant.csv",
        FieldMap::harmonic(&invariant)?,
        Normalization::Peak,
    )?;
    run.metric("invariant_peak", format!("{inv_peak:e}"));
    run.metric(
        "normalization",
        match p.normalization {
            HarmonicNormalization::Invariant => "invariant",
            HarmonicNormalization::PerHarmonic => "per_harmonic",
        },
    );

    for &k in &p.harmonics {
        let pat = harmonic_pattern(lattice, &profile, k, &grid, &c.context, &c.element_pattern)?;
        let (i, peak) = pat.peak().unwrap_or((0, 0.0));
        let dir = pat.directions()[i];
        let norm = match p.normalization {
            HarmonicNormalization::Invariant => Normalization::Reference(inv_peak),
            HarmonicNormalization::PerHarmonic if peak > 0.0 => Normalization::Peak,
            HarmonicNormalization::PerHarmonic => Normalization::Reference(inv_peak),
        };
        run.write_map(
            &format!("harmonic_{k}.csv"),
            FieldMap::harmonic(&pat)?,
            norm,
        )?;
        let key = format!("harmonic.{k}");
        if peak > 0.0 {
            run.metric(format!("{key}.peak_theta_deg"), fixed6(dir.theta_deg()));
            run.metric(format!("{key}.peak_phi_deg"), fixed6(dir.phi_deg()));
        }
        run.metric(format!("{key}.peak_relative"), fixed6(peak / inv_peak));
        run.metric(
            format!("{key}.peak_relative_db"),
            fixed6(to_db(peak, inv_peak)),
        );
    }

    let spec_dir = match &p.delays {
        DelaySpec::Steered { target, .. } => *target,
        _ => DirectionAngles::broadside(),
    };
    let lines = spectrum_at_direction(
        lattice,
        &profile,
        spec_dir,
        p.spectrum_k_max,
        &c.context,
        &c.element_pattern,
    )?;
    let axes = [
        ("k", "1"),
        ("frequency_hz", "Hz"),
        ("theta_deg", "deg"),
        ("phi_deg", "deg"),
    ]
    .iter()
    .map(|(c, u)| (c.to_string(), u.to_string()))
    .collect();
    let coords = lines
        .iter()
        .map(|l| {
            vec![
                f64::from(l.k),
                l.frequency,
                spec_dir.theta_deg(),
                spec_dir.phi_deg(),
            ]
        })
        .collect();
    let values: Vec<Complex64> = lines.iter().map(|l| l.value).collect();
    let spectrum = FieldMap::new(axes, coords, values)?
        .with_phase(true)
        .with_metadata("kind", "spectrum");
    run.write_map("spectrum.csv", spectrum, Normalization::Absolute)?;
    Ok(())
}

/// Runs `config`, writing outputs and `summary.txt` into its output directory.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutput, ScenarioError> {
    let scenario = config.kind.name();
    let wrap = |source: IrsError| ScenarioError { scenario, source };
    fs::create_dir_all(&config.output_dir).map_err(|e| {
        wrap(IrsError::Io {
            path: config.output_dir.display().to_string(),
            message: e.to_string(),
        })
    })?;
    let mut run = Run {
        config,
        files: Vec::new(),
        metrics: Vec::new(),
    };
    run.common_metrics();
    let result = match &config.kind {
        ScenarioKind::Steer(p) => run_steer(&mut run, p),
        ScenarioKind::Focus(p) => run_focus(&mut run, p),
        ScenarioKind::Modulate(p) => run_modulate(&mut run, p),
        ScenarioKind::Timevary(p) => run_timevary(&mut run, p),
    };
    result.map_err(wrap)?;
    let mut output = ScenarioOutput {
        files: run.files,
        metrics: run.metrics,
        warnings: config.warnings.clone(),
    };
    let summary_path = config.output_dir.join("summary.txt");
    fs::write(&summary_path, output.summary_text()).map_err(|e| {
        wrap(IrsError::Io {
            path: summary_path.display().to_string(),
            message: e.to_string(),
        })
    })?;
    output.files.push(summary_path);
    Ok(output)
}

/// Reads and parses a config file; I/O problems surface as a violation.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| {
        ConfigError::Invalid(vec![Violation {
            path: path.display().to_string(),
            message: e.to_string(),
        }])
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_STEER: &str = r#"
frequency = 10e9

[aperture]
count_x = 8
count_y = 8

[tag]
theta_deg = 10
phi_deg = 10
distance = 0.5

[steer]
theta_deg = 30
phi_deg = 30
"#;

    #[test]
    fn minimal_steer_gets_defaults() {
        let cfg = parse_config(MINIMAL_STEER).unwrap();
        assert_eq!(cfg.context.wave_speed(), SPEED_OF_LIGHT);
        assert!((cfg.aperture.spacing_x() - cfg.context.wavelength() / 2.0).abs() < 1e-15);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.output_dir, PathBuf::from(DEFAULT_OUTPUT_DIR));
        assert!(cfg.observation.is_none());
        assert_eq!(cfg.reflection_magnitude, 1.0);
        assert!(!cfg.write_phase);
        match cfg.kind {
            ScenarioKind::Steer(p) => {
                assert!((p.direction.theta_deg() - 30.0).abs() < 1e-12);
                assert!(p.quantization_bits.is_none());
            }
            other => panic!("unexpected kind {other:?}"),
        }
    }

    #[test]
    fn negative_frequency_names_the_field() {
        let text = MINIMAL_STEER.replace("frequency = 10e9", "frequency = -1.0");
        let err = parse_config(&text).unwrap_err();
        assert!(err.violations().iter().any(|v| v.path == "frequency"));
    }

    #[test]
    fn all_violations_are_reported() {
        let text = r#"
frequency = -5
[aperture]
count_x = 0
count_y = 4
[tag]
theta_deg = 10
[focus]
distance = -1
"#;
        let err = parse_config(text).unwrap_err();
        let paths: Vec<&str> = err.violations().iter().map(|v| v.path.as_str()).collect();
        for p in [
            "frequency",
            "aperture.count_x",
            "tag.distance",
            "focus.distance",
        ] {
            assert!(paths.contains(&p), "missing {p} in {paths:?}");
        }
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err = parse_config("frequency = 1e9\n[aperture\ncount_x = 2\n").unwrap_err();
        assert!(
            matches!(err, ConfigError::Syntax { line: 2, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL_STEER.replace("[steer]", "[steer]\nbeam_width = 3");
        let err = parse_config(&text).unwrap_err();
        match err {
            ConfigError::Syntax { line, message } => {
                assert!(line > 0);
                assert!(message.contains("beam_width"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn focal_distance_outside_fresnel_bounds_warns() {
        let text = MINIMAL_STEER.replace(
            "[steer]\ntheta_deg = 30\nphi_deg = 30",
            "[focus]\ndistance = 5.0",
        );
        let cfg = parse_config(&text).unwrap();
        let b = fresnel_bounds(&cfg.aperture, &cfg.context).unwrap();
        assert!(!b.contains(5.0));
        assert_eq!(cfg.warnings.len(), 1);
        assert!(cfg.warnings[0].contains("outside"));
    }

    #[test]
    fn two_scenarios_are_rejected() {
        let text = format!("{MINIMAL_STEER}\n[focus]\ndistance = 0.4\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.violations().iter().any(|v| v.path == "scenario"));
    }

    #[test]
    fn bounds_config_ignores_scenario() {
        let cfg =
            parse_aperture_config("frequency = 1e12\n[aperture]\ncount_x = 248\ncount_y = 248\n")
                .unwrap();
        let b = cfg.bounds().unwrap();
        assert!(b.contains(0.45));
        assert!(cfg.report().unwrap().contains("fresnel_lower_m="));
    }
}
