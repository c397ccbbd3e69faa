//! Simulation of holographic reflecting surfaces: hologram synthesis,
//! near/far-field propagation, focus/defocus modulation and time-varying
//! square-wave lattices.

pub mod error;
pub mod fieldmap;
pub mod geometry;
pub mod modulation;
pub mod propagation;
pub mod scenario;
pub mod synthesis;
pub mod timevarying;

pub use error::{IrsError, Result};
pub use fieldmap::{emit_field_map, FieldMap, FieldMapFile, Normalization, ParsedFieldMap};
pub use geometry::{
    fresnel_bounds, ApertureGrid, DirectionAngles, FresnelBounds, ObservationGrid, Point3,
    PropagationContext, SPEED_OF_LIGHT,
};
pub use modulation::{contrast, depth_profile, run_link, FramePlan, LinkReport, ReceiverSpec};
pub use propagation::{
    array_factor, greens_kernel, incident_on_aperture, radiate, reflect_and_radiate, ComplexField,
    ElementPattern, SourceModel,
};
pub use scenario::{parse_config, run_scenario, ConfigError, ScenarioConfig, ScenarioError};
pub use synthesis::{
    focusing_profile, quantize_profile, randomized_profile, steering_profile, FocalSpec,
    PhaseProfile, SteeringSpec,
};
pub use timevarying::{
    fourier_coefficients, harmonic_pattern, invariant_pattern, square_wave_coefficient,
    steering_delays, HarmonicPattern, SquareWaveProfile,
};
