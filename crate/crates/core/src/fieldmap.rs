//! Plain-text field maps.
//!
//! Layout: `# key=value` header lines, then one comma-separated row per
//! sample with six decimals and `\n` line endings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{IrsError, Result};
use crate::geometry::{DirectionAngles, ObservationGrid};
use crate::modulation::fixed6;
use crate::propagation::ComplexField;
use crate::timevarying::HarmonicPattern;

/// Floor applied to zero magnitudes, dB.
pub const DB_FLOOR: f64 = -300.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Relative to the map's own peak magnitude.
    Peak,
    /// Relative to an externally supplied magnitude.
    Reference(f64),
    /// Relative to a magnitude of 1.
    Absolute,
}

impl Normalization {
    fn label(&self) -> &'static str {
        match self {
            Normalization::Peak => "peak",
            Normalization::Reference(_) => "reference",
            Normalization::Absolute => "absolute",
        }
    }
}

/// Magnitude in dB relative to `reference`, floored at [`DB_FLOOR`].
pub fn to_db(magnitude: f64, reference: f64) -> f64 {
    let db = 20.0 * (magnitude / reference).log10();
    if db.is_nan() || db < DB_FLOOR {
        DB_FLOOR
    } else {
        db
    }
}

/// Sampled complex values plus coordinate columns, ready to render.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    axes: Vec<(String, String)>,
    coords: Vec<Vec<f64>>,
    values: Vec<Complex64>,
    metadata: Vec<(String, String)>,
    phase: bool,
}

impl FieldMap {
    /// Generic constructor. `axes` holds `(column, unit)` pairs and each entry
    /// of `coords` one value per axis.
    pub fn new(
        axes: Vec<(String, String)>,
        coords: Vec<Vec<f64>>,
        values: Vec<Complex64>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(IrsError::InvalidArgument("field map has no samples".into()));
        }
        if coords.len() != values.len() {
            return Err(IrsError::LengthMismatch {
                what: "field map coordinates",
                expected: values.len(),
                found: coords.len(),
            });
        }
        if let Some(bad) = coords.iter().find(|c| c.len() != axes.len()) {
            return Err(IrsError::LengthMismatch {
                what: "field map coordinate columns",
                expected: axes.len(),
                found: bad.len(),
            });
        }
        Ok(Self {
            axes,
            coords,
            values,
            metadata: Vec::new(),
            phase: false,
        })
    }

    /// Cartesian map with `x_m, y_m, z_m` columns.
    pub fn spatial(field: &ComplexField) -> Result<Self> {
        let axes = ["x", "y", "z"]
            .iter()
            .map(|a| (format!("{a}_m"), "m".to_string()))
            .collect();
        let coords = field
            .positions()
            .iter()
            .map(|p| vec![p.x, p.y, p.z])
            .collect();
        Self::new(axes, coords, field.values().to_vec())
    }

    /// Angular map with `theta_deg, phi_deg` columns.
    pub fn angular(directions: &[DirectionAngles], values: Vec<Complex64>) -> Result<Self> {
        let axes = vec![
            ("theta_deg".to_string(), "deg".to_string()),
            ("phi_deg".to_string(), "deg".to_string()),
        ];
        let coords = directions
            .iter()
            .map(|d| vec![d.theta_deg(), d.phi_deg()])
            .collect();
        Self::new(axes, coords, values)
    }

    /// Angular map when `grid` is angular, Cartesian otherwise.
    pub fn for_grid(field: &ComplexField, grid: &ObservationGrid) -> Result<Self> {
        match grid.directions() {
            Some(dirs) => {
                let mut map = Self::angular(&dirs, field.values().to_vec())?;
                if let ObservationGrid::Angular { range: Some(r), .. } = grid {
                    map = map.with_metadata("range_m", fixed6(*r));
                }
                Ok(map)
            }
            None => Self::spatial(field),
        }
    }

    /// Harmonic pattern rows: `k, frequency_hz, theta_deg, phi_deg`, then
    /// magnitude and phase.
    pub fn harmonic(pattern: &HarmonicPattern) -> Result<Self> {
        let axes = [
            ("k", "1"),
            ("frequency_hz", "Hz"),
            ("theta_deg", "deg"),
            ("phi_deg", "deg"),
        ]
        .iter()
        .map(|(c, u)| (c.to_string(), u.to_string()))
        .collect();
        let k = f64::from(pattern.k);
        let coords = pattern
            .directions()
            .iter()
            .map(|d| vec![k, pattern.frequency, d.theta_deg(), d.phi_deg()])
            .collect();
        Ok(Self::new(axes, coords, pattern.values.clone())?
            .with_metadata("harmonic", pattern.k.to_string())
            .with_phase(true))
    }

    /// One-dimensional profile over `range_m`.
    pub fn ranges(ranges: &[f64], values: Vec<Complex64>) -> Result<Self> {
        Self::new(
            vec![("range_m".to_string(), "m".to_string())],
            ranges.iter().map(|r| vec![*r]).collect(),
            values,
        )
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.push((key.into(), value.into()));
        self
    }

    /// Adds a `phase_rad` column.
    pub fn with_phase(mut self, phase: bool) -> Self {
        self.phase = phase;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn peak_magnitude(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Magnitude that maps to 0 dB under `normalization`.
    pub fn reference(&self, normalization: Normalization) -> Result<f64> {
        let r = match normalization {
            Normalization::Peak => self.peak_magnitude(),
            Normalization::Reference(r) => r,
            Normalization::Absolute => 1.0,
        };
        if !(r.is_finite() && r > 0.0) {
            return Err(IrsError::InvalidArgument(format!(
                "normalization reference must be positive, got {r}"
            )));
        }
        Ok(r)
    }

    pub fn render(&self, normalization: Normalization) -> Result<String> {
        let reference = self.reference(normalization)?;
        let mut columns: Vec<&str> = self.axes.iter().map(|(c, _)| c.as_str()).collect();
        let mut units: Vec<&str> = self.axes.iter().map(|(_, u)| u.as_str()).collect();
        columns.push("magnitude_db");
        units.push("dB");
        if self.phase {
            columns.push("phase_rad");
            units.push("rad");
        }
        let mut out = String::new();
        let _ = writeln!(out, "# columns={}", columns.join(","));
        let _ = writeln!(out, "# units={}", units.join(","));
        let _ = writeln!(out, "# normalization={}", normalization.label());
        let _ = writeln!(out, "# reference_magnitude={reference:e}");
        let _ = writeln!(out, "# rows={}", self.values.len());
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        for (c, v) in self.coords.iter().zip(&self.values) {
            for (x, (name, _)) in c.iter().zip(&self.axes) {
                if name == "k" {
                    let _ = write!(out, "{x}");
                } else {
                    out.push_str(&fixed6(*x));
                }
                out.push(',');
            }
            out.push_str(&fixed6(to_db(v.norm(), reference)));
            if self.phase {
                out.push(',');
                out.push_str(&fixed6(v.arg()));
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// What was written by [`emit_field_map`].
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMapFile {
    pub path: PathBuf,
    pub rows: usize,
    pub reference: f64,
}

/// Renders `map` and writes it to `path`.
pub fn emit_field_map(
    map: &FieldMap,
    path: &Path,
    normalization: Normalization,
) -> Result<FieldMapFile> {
    let text = map.render(normalization)?;
    fs::write(path, text).map_err(|e| IrsError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(FieldMapFile {
        path: path.to_path_buf(),
        rows: map.len(),
        reference: map.reference(normalization)?,
    })
}

/// A field map read back from text.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedFieldMap {
    pub metadata: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ParsedFieldMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut metadata = BTreeMap::new();
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if let Some(h) = line.strip_prefix('#') {
                if let Some((k, v)) = h.trim().split_once('=') {
                    metadata.insert(k.to_string(), v.to_string());
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| IrsError::InvalidArgument(format!("line {}: {e}", i + 1)))?;
            rows.push(row);
        }
        let columns = metadata
            .get("columns")
            .map(|c| c.split(',').map(str::to_string).collect())
            .unwrap_or_default();
        Ok(Self {
            metadata,
            columns,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// Row with the largest `magnitude_db`; ties keep the first.
    pub fn peak_row(&self) -> Option<&[f64]> {
        let idx = self.columns.iter().position(|c| c == "magnitude_db")?;
        let mut best: Option<&Vec<f64>> = None;
        for r in &self.rows {
            if best.is_none_or(|b| r[idx] > b[idx]) {
                best = Some(r);
            }
        }
        best.map(Vec::as_slice)
    }
}
