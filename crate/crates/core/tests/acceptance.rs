//! Acceptance criteria, one pass/fail line each.
//!
//! Run with `cargo test -p irs-core --test acceptance`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use irs_core::geometry::{arange, fresnel_bounds, linspace};
use irs_core::modulation::depth_profile;
use irs_core::propagation::{array_factor, reflected_excitations};
use irs_core::scenario::{load_config, run_scenario};
use irs_core::synthesis::SteeringSpec;
use irs_core::{
    focusing_profile, fourier_coefficients, harmonic_pattern, incident_on_aperture,
    invariant_pattern, randomized_profile, reflect_and_radiate, square_wave_coefficient,
    steering_profile, ApertureGrid, ComplexField, DirectionAngles, ElementPattern, FocalSpec,
    ObservationGrid, Point3, PropagationContext, SourceModel, SquareWaveProfile,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T>(r: irs_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

fn tag_from(theta: f64, phi: f64, distance: f64) -> SourceModel {
    SourceModel::from_incidence(
        DirectionAngles::from_degrees(theta, phi).unwrap(),
        distance,
        Point3::ORIGIN,
    )
    .unwrap()
}

fn steering_fidelity() -> Outcome {
    let ctx = ok(PropagationContext::free_space(10e9))?;
    let grid = ok(ApertureGrid::square(20, ctx.wavelength() / 2.0))?;
    let tag = tag_from(10.0, 10.0, 0.5);
    let incident = ok(incident_on_aperture(&tag, &grid, &ctx))?;
    let bound: f64 = incident.values().iter().map(|v| v.norm()).sum();
    let obs = ok(ObservationGrid::hemisphere(0.5, None))?;
    let dirs = obs.directions().unwrap();
    let mut worst_err: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for (t, p) in [
        (30.0, 30.0),
        (30.0, -30.0),
        (-30.0, 30.0),
        (-30.0, -30.0),
        (0.0, 0.0),
    ] {
        let start = Instant::now();
        let target = ok(DirectionAngles::from_degrees(t, p))?;
        let prof = ok(steering_profile(
            &grid,
            &incident,
            &SteeringSpec { direction: target },
            &ctx,
        ))?;
        let field = ok(reflect_and_radiate(
            &grid,
            &incident,
            &prof,
            &obs,
            &ctx,
            &ElementPattern::Isotropic,
        ))?;
        let (i, peak) = field.peak().unwrap();
        let elapsed = start.elapsed();
        slowest = slowest.max(elapsed);
        let err = dirs[i].angular_separation(&target).to_degrees();
        let rel = (peak - bound).abs() / bound;
        worst_err = worst_err.max(err);
        worst_rel = worst_rel.max(rel);
        ensure(err <= 1.0, || {
            format!("({t}, {p}): peak {err:.3} deg from target")
        })?;
        ensure(rel <= 1e-9, || {
            format!("({t}, {p}): peak differs from co-phased bound by {rel:e}")
        })?;
        ensure(elapsed < Duration::from_secs(5), || {
            format!("({t}, {p}): took {elapsed:?}")
        })?;
    }
    Ok(format!(
        "max pointing error {worst_err:.3} deg, max bound deviation {worst_rel:.1e}, slowest case {:.2} s",
        slowest.as_secs_f64()
    ))
}

fn focusing_depth() -> Outcome {
    let start = Instant::now();
    let ctx = ok(PropagationContext::free_space(1e12))?;
    let grid = ok(ApertureGrid::square(248, ctx.wavelength() / 2.0))?;
    let bounds = ok(fresnel_bounds(&grid, &ctx))?;
    ensure(bounds.contains(0.45), || {
        format!("0.45 m outside ({}, {})", bounds.lower, bounds.upper)
    })?;
    let tag = tag_from(10.0, 10.0, 0.5);
    let incident = ok(incident_on_aperture(&tag, &grid, &ctx))?;
    let focal = ok(FocalSpec::new(DirectionAngles::broadside(), 0.45))?;
    let prof = ok(focusing_profile(&grid, &incident, &focal, &ctx))?;
    let zs: Vec<f64> = (0..=1400).map(|i| 0.1 + i as f64 * 1e-3).collect();
    let depth = ok(depth_profile(&grid, &tag, &prof, &zs, &ctx))?;
    let (z_peak, _) =
        depth.iter().copied().fold(
            (0.0, f64::NEG_INFINITY),
            |b, s| if s.1 > b.1 { s } else { b },
        );
    let elapsed = start.elapsed();
    let rel = (z_peak - 0.45) / 0.45;
    ensure(rel.abs() <= 0.10, || {
        format!("on-axis peak at {z_peak:.3} m ({:+.1}%)", 100.0 * rel)
    })?;
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "248x248 at 1 THz, peak at {z_peak:.3} m ({:+.1}%), {:.2} s",
        100.0 * rel,
        elapsed.as_secs_f64()
    ))
}

fn link_setup() -> (PropagationContext, ApertureGrid, SourceModel) {
    let ctx = PropagationContext::free_space(10e9).unwrap();
    let grid = ApertureGrid::square(40, ctx.wavelength() / 2.0).unwrap();
    (ctx, grid, tag_from(10.0, 10.0, 0.5))
}

fn field_at(grid: &ApertureGrid, exc: &[Complex64], p: Point3, k: f64) -> Complex64 {
    grid.element_positions()
        .iter()
        .zip(exc)
        .map(|(s, a)| {
            let r = s.distance(&p);
            a * Complex64::from_polar(1.0 / (4.0 * PI * r), -k * r)
        })
        .sum()
}

fn modulation_contrast() -> Outcome {
    let (ctx, grid, tag) = link_setup();
    let rx = Point3::new(0.0, 0.0, 0.6);
    let incident = ok(incident_on_aperture(&tag, &grid, &ctx))?;
    let focal = ok(FocalSpec::from_point(rx, Point3::ORIGIN))?;
    let focused = ok(focusing_profile(&grid, &incident, &focal, &ctx))?;
    let k = ctx.wavenumber();
    let f = field_at(
        &grid,
        &ok(reflected_excitations(&grid, &incident, &focused, 1.0))?,
        rx,
        k,
    )
    .norm();
    let mut worst = f64::INFINITY;
    for seed in 0..32u64 {
        let random = randomized_profile(&grid, seed);
        let r = field_at(
            &grid,
            &ok(reflected_excitations(&grid, &incident, &random, 1.0))?,
            rx,
            k,
        )
        .norm();
        let c = 20.0 * (f / r).log10();
        worst = worst.min(c);
        ensure(c >= 20.0, || format!("seed {seed}: contrast {c:.2} dB"))?;
    }
    Ok(format!(
        "40x40 at 10 GHz, worst contrast over 32 seeds {worst:.2} dB"
    ))
}

fn argmax_point(field: &ComplexField) -> Point3 {
    let (i, _) = field.peak().unwrap();
    field.positions()[i]
}

fn receiver_repositioning() -> Outcome {
    let (ctx, grid, tag) = link_setup();
    let target_dir = ok(DirectionAngles::from_degrees(15.0, 15.0))?;
    let focal = ok(FocalSpec::new(target_dir, 0.4))?;
    let incident = ok(incident_on_aperture(&tag, &grid, &ctx))?;
    let prof = ok(focusing_profile(&grid, &incident, &focal, &ctx))?;
    let radiate = |obs: &ObservationGrid| {
        reflect_and_radiate(
            &grid,
            &incident,
            &prof,
            obs,
            &ctx,
            &ElementPattern::Isotropic,
        )
    };
    let coarse = ok(ObservationGrid::volume(
        arange(-0.3, 0.3, 0.01),
        arange(-0.3, 0.3, 0.01),
        arange(0.05, 1.0, 0.01),
    ))?;
    let c = argmax_point(&ok(radiate(&coarse))?);
    let around = |v: f64| linspace(v - 0.02, v + 0.02, 21);
    let fine = ok(ObservationGrid::volume(
        around(c.x),
        around(c.y),
        around(c.z).into_iter().filter(|z| *z > 0.0).collect(),
    ))?;
    let p = argmax_point(&ok(radiate(&fine))?);
    let range = p.norm();
    let dir = ok(DirectionAngles::towards(p, Point3::ORIGIN))?;
    let ang = dir.angular_separation(&target_dir).to_degrees();
    let rel = (range - 0.4) / 0.4;
    ensure(rel.abs() <= 0.10, || {
        format!("argmax range {range:.3} m ({:+.1}%)", 100.0 * rel)
    })?;
    ensure(ang <= 2.0, || format!("argmax {ang:.2} deg off target"))?;
    Ok(format!(
        "argmax at range {range:.3} m ({:+.1}%), {ang:.2} deg from (15, 15)",
        100.0 * rel
    ))
}

/// Composite trapezoid of `(1/T) int_0^T Gamma(t) exp(-j 2 pi k f0 t) dt`,
/// with the period split at both switching instants.
fn trapezoid_coefficient(k: i32, f0: f64, tau: f64, n: usize) -> Complex64 {
    let period = 1.0 / f0;
    let a = tau.rem_euclid(period);
    let b = (a + period / 2.0).rem_euclid(period);
    let mut edges = [0.0, a, b, period];
    edges.sort_by(f64::total_cmp);
    let level = |t: f64| {
        let s = (t - tau).rem_euclid(period);
        if s < period / 2.0 {
            1.0
        } else {
            -1.0
        }
    };
    let mut total = Complex64::new(0.0, 0.0);
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo <= 0.0 {
            continue;
        }
        let g = level(0.5 * (lo + hi));
        let h = (hi - lo) / n as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..=n {
            let t = lo + i as f64 * h;
            let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += wgt * Complex64::from_polar(1.0, -2.0 * PI * k as f64 * f0 * t);
        }
        total += g * acc * h;
    }
    total / period
}

fn fourier_exactness() -> Outcome {
    let start = Instant::now();
    let f0 = 1e6;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for _ in 0..16 {
        let tau = rng.gen_range(0.0..3.0 / f0);
        for k in -15..=15 {
            let closed = square_wave_coefficient(k, f0, tau);
            if k % 2 == 0 {
                ensure(closed == Complex64::new(0.0, 0.0), || {
                    format!("k = {k} not exactly zero")
                })?;
                continue;
            }
            let err = (closed - trapezoid_coefficient(k, f0, tau, 10_000)).norm();
            worst = worst.max(err);
            ensure(err < 1e-6, || {
                format!("k = {k}, tau = {tau:e}: error {err:e}")
            })?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "max error {worst:.1e}, {:.3} s",
        elapsed.as_secs_f64()
    ))
}

fn harmonic_magnitude_law() -> Outcome {
    let ctx = ok(PropagationContext::free_space(10e9))?;
    let grid = ok(ApertureGrid::square(10, ctx.wavelength() / 2.0))?;
    let prof = ok(SquareWaveProfile::synchronized(1e7, &grid))?;
    let broadside = ok(ObservationGrid::angular(vec![0.0], vec![0.0], None))?;
    let inv = ok(invariant_pattern(
        &grid,
        &broadside,
        &ctx,
        &ElementPattern::Isotropic,
    ))?
    .values[0]
        .norm();
    let mut worst: f64 = 0.0;
    for k in [1, 3] {
        let h = ok(harmonic_pattern(
            &grid,
            &prof,
            k,
            &broadside,
            &ctx,
            &ElementPattern::Isotropic,
        ))?;
        let ratio = h.values[0].norm() / inv;
        let expected = 2.0 / (k as f64 * PI);
        let rel = (ratio - expected).abs() / expected;
        worst = worst.max(rel);
        ensure(rel <= 1e-9, || {
            format!("k = {k}: ratio {ratio} vs {expected}")
        })?;
    }
    Ok(format!("k = 1, 3 ratios match 2/(k pi) within {worst:.1e}"))
}

fn within_one_step(found: DirectionAngles, target: DirectionAngles, step_deg: f64) -> bool {
    let dt = (found.theta_deg() - target.theta_deg()).abs();
    let dp = wrap((found.phi_deg() - target.phi_deg()).to_radians())
        .to_degrees()
        .abs();
    let tol = step_deg + 1e-9;
    (dt <= tol && dp <= tol) || found.angular_separation(&target).to_degrees() <= tol
}

fn delay_steering() -> Outcome {
    let ctx = ok(PropagationContext::free_space(10e9))?;
    let grid = ok(ApertureGrid::square(10, ctx.wavelength() / 2.0))?;
    let obs = ok(ObservationGrid::hemisphere(1.0, None))?;
    let f0 = 1e7;
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let mut targets = vec![(30.0, 45.0)];
    for _ in 0..20 {
        targets.push((rng.gen_range(0.0..=60.0), rng.gen_range(-180.0..180.0)));
    }
    let mut worst: f64 = 0.0;
    for (t, p) in targets {
        let target = ok(DirectionAngles::from_degrees(t, p))?;
        let prof = ok(SquareWaveProfile::steered(f0, &grid, target, 1, &ctx))?;
        let pat = ok(harmonic_pattern(
            &grid,
            &prof,
            1,
            &obs,
            &ctx,
            &ElementPattern::Isotropic,
        ))?;
        let (i, _) = pat.peak().unwrap();
        let found = pat.directions()[i];
        worst = worst.max(found.angular_separation(&target).to_degrees());
        ensure(within_one_step(found, target, 1.0), || {
            format!(
                "target ({t:.2}, {p:.2}): peak at ({:.1}, {:.1})",
                found.theta_deg(),
                found.phi_deg()
            )
        })?;
    }
    Ok(format!(
        "(30, 45) and 20 random targets, worst separation {worst:.2} deg"
    ))
}

fn cross_formulation() -> Outcome {
    let ctx = ok(PropagationContext::free_space(10e9))?;
    let grid = ok(ApertureGrid::new(
        12,
        9,
        ctx.wavelength() / 2.0,
        0.4 * ctx.wavelength(),
    ))?;
    let plane = ok(ComplexField::new(
        grid.element_positions(),
        vec![Complex64::new(1.0, 0.0); grid.len()],
    ))?;
    let f0 = 1e7;
    let mut worst: f64 = 0.0;
    for (t, p) in [(30.0, 45.0), (12.0, -100.0), (55.0, 170.0)] {
        let target = ok(DirectionAngles::from_degrees(t, p))?;
        let prof = ok(SquareWaveProfile::steered(f0, &grid, target, 1, &ctx))?;
        let coeffs = fourier_coefficients(&prof, &[1]);
        let time_phase: Vec<f64> = coeffs.for_index(0).iter().map(|c| c.arg()).collect();
        let hologram = ok(steering_profile(
            &grid,
            &plane,
            &SteeringSpec { direction: target },
            &ctx,
        ))?;
        let offset = wrap(time_phase[0] - hologram.phases()[0]);
        for (a, b) in time_phase.iter().zip(hologram.phases()) {
            let d = wrap(a - b - offset).abs();
            worst = worst.max(d);
        }
    }
    ensure(worst <= 1e-9, || {
        format!("max phase mismatch {worst:e} rad")
    })?;
    Ok(format!(
        "max element phase mismatch {worst:.1e} rad after removing a global constant"
    ))
}

fn far_near_consistency() -> Outcome {
    let ctx = ok(PropagationContext::free_space(10e9))?;
    let grid = ok(ApertureGrid::square(20, ctx.wavelength() / 2.0))?;
    let tag = tag_from(10.0, 10.0, 0.5);
    let incident = ok(incident_on_aperture(&tag, &grid, &ctx))?;
    let target = ok(DirectionAngles::from_degrees(30.0, 30.0))?;
    let prof = ok(steering_profile(
        &grid,
        &incident,
        &SteeringSpec { direction: target },
        &ctx,
    ))?;
    let range = 100.0 * ok(fresnel_bounds(&grid, &ctx))?.upper;
    let obs = ok(ObservationGrid::hemisphere(1.0, Some(range)))?;
    let near = ok(reflect_and_radiate(
        &grid,
        &incident,
        &prof,
        &obs,
        &ctx,
        &ElementPattern::Isotropic,
    ))?;
    let exc = ok(reflected_excitations(&grid, &incident, &prof, 1.0))?;
    let af = ok(array_factor(&grid, &exc, &obs.directions().unwrap(), &ctx))?;
    let nm = near.magnitudes();
    let am: Vec<f64> = af.iter().map(|v| v.norm()).collect();
    let npk = nm.iter().copied().fold(0.0, f64::max);
    let apk = am.iter().copied().fold(0.0, f64::max);
    let worst = nm
        .iter()
        .zip(&am)
        .map(|(n, a)| (n / npk - a / apk).abs())
        .fold(0.0, f64::max);
    ensure(worst <= 0.01, || {
        format!("max deviation {:.3}% of peak", 100.0 * worst)
    })?;
    Ok(format!(
        "range {range:.1} m, max deviation {:.4}% of peak",
        100.0 * worst
    ))
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn determinism() -> Outcome {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut names: Vec<_> = fs::read_dir(&configs)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    names.sort();
    let mut files = 0;
    for path in &names {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
            let mut cfg = load_config(path).map_err(|e| e.to_string())?;
            cfg.output_dir = tmp.path().to_path_buf();
            run_scenario(&cfg).map_err(|e| e.to_string())?;
            outputs.push(read_dir(tmp.path()));
        }
        ensure(outputs[0] == outputs[1], || {
            format!("{} differs between runs", path.display())
        })?;
        files += outputs[0].len();
    }
    Ok(format!(
        "{} scenarios, {files} files byte-identical across reruns",
        names.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("steering fidelity", steering_fidelity),
        ("focusing depth", focusing_depth),
        ("spatial modulation contrast", modulation_contrast),
        ("receiver repositioning", receiver_repositioning),
        ("Fourier coefficient exactness", fourier_exactness),
        ("harmonic magnitude law", harmonic_magnitude_law),
        ("delay steering", delay_steering),
        ("cross-formulation equivalence", cross_formulation),
        ("far-field/near-field consistency", far_near_consistency),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
