//! Self-check suite: quadrature identities, engine agreement, thin-lens
//! residuals and grid sampling, reported as a pass/fail table.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    amplitude_two_point_cfg_i, amplitude_two_point_cfg_ii, check_image_sampling, image_field_grid,
    intensity_bucket_cfg_i, interference_term_cfg_i, DetectionScheme, Scene,
};
use crate::error::{Error, Result};
use crate::field::{GridSpec, Rect, Vec2};
use crate::numeric::{amplitude_samepoint_numeric, disk_integral, QuadratureSpec};
use crate::object::{ObjectModel, TwoPointObject};
use crate::optics::{thin_lens_residual, Configuration, ImagingGeometry, SourceSpec};
use crate::special::somb_unchecked;

pub const DISK_TOLERANCE: f64 = 1e-6;
pub const ENGINE_MAGNITUDE_TOLERANCE: f64 = 1e-3;
pub const ENGINE_PHASE_TOLERANCE: f64 = 1e-2;
pub const THIN_LENS_TOLERANCE: f64 = 1e-10;
pub const BUCKET_TOLERANCE: f64 = 1e-10;

/// A named scene and image grid whose sampling is checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationScenario {
    pub name: String,
    pub scene: Scene,
    pub grid: GridSpec,
}

#[derive(Debug, Clone)]
pub struct ValidationOptions {
    /// The reference profile the disk quadrature is compared against. Tests swap
    /// it for a perturbed one to check that the suite catches the fault.
    pub somb: fn(f64) -> f64,
    pub scenarios: Vec<ValidationScenario>,
    /// Run the (slower) engine comparison.
    pub engines: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            somb: somb_unchecked,
            scenarios: Vec::new(),
            engines: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub scenario: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(check: &str, scenario: &str, passed: bool, detail: String) -> Self {
        Self {
            check: check.into(),
            scenario: scenario.into(),
            passed,
            detail,
        }
    }
}

/// Largest deviation of the quadrature disk integral from `pi R^2 somb(qR)`,
/// relative to `pi R^2`, over `count` values of `qR` spread over `[0, max_qr]`.
pub fn disk_identity_deviation(somb: fn(f64) -> f64, radius: f64, count: usize, max_qr: f64) -> f64 {
    let area = PI * radius * radius;
    (0..count)
        .map(|i| {
            let qr = max_qr * i as f64 / (count - 1).max(1) as f64;
            (disk_integral(qr / radius, radius) - Complex64::new(area * somb(qr), 0.0)).norm() / area
        })
        .fold(0.0, f64::max)
}

/// Worst magnitude deviation (relative to the largest analytic magnitude) and
/// worst phase deviation between the closed-form and quadrature two-point
/// amplitudes. Phases are compared where the magnitude exceeds 1% of the peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineComparison {
    pub probes: usize,
    pub max_magnitude_deviation: f64,
    pub max_phase_deviation: f64,
}

impl EngineComparison {
    pub fn passed(&self) -> bool {
        self.max_magnitude_deviation <= ENGINE_MAGNITUDE_TOLERANCE && self.max_phase_deviation <= ENGINE_PHASE_TOLERANCE
    }
}

pub fn compare_engines(scene: &Scene, obj: &TwoPointObject, probes: &[Vec2], quad: &QuadratureSpec) -> Result<EngineComparison> {
    let DetectionScheme::PointNPhoton { position } = scene.detection else {
        return Err(Error::Detection("engine comparison needs a point detector".into()));
    };
    let model = ObjectModel::TwoPoint(*obj);
    let mut pairs = Vec::with_capacity(probes.len());
    for &rho in probes {
        let ana = match scene.cfg {
            Configuration::ObjectInDegenerateArm => amplitude_two_point_cfg_i(&scene.geom, &scene.src, obj, position, rho)?,
            Configuration::ObjectInAncillaArm => {
                amplitude_two_point_cfg_ii(&scene.geom, &scene.src, obj, rho, scene.ancilla_position)?
            }
        };
        let num = amplitude_samepoint_numeric(scene, &model, rho, quad)?;
        pairs.push((ana, num));
    }
    let peak = pairs.iter().map(|(a, _)| a.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut out = EngineComparison {
        probes: pairs.len(),
        max_magnitude_deviation: 0.0,
        max_phase_deviation: 0.0,
    };
    for (a, n) in pairs {
        out.max_magnitude_deviation = out.max_magnitude_deviation.max((a.norm() - n.norm()).abs() / peak);
        if a.norm() > 1e-2 * peak {
            out.max_phase_deviation = out.max_phase_deviation.max((n / a).arg().abs());
        }
    }
    Ok(out)
}

/// 5 x 5 probe lattice at 0.7 Airy radii around the midpoint of the two images.
pub fn probe_lattice(scene: &Scene, obj: &TwoPointObject) -> Result<Vec<Vec2>> {
    let m = scene.magnification()?;
    let xi = scene.airy_radius();
    let centre = obj.separation * (-0.5 * m);
    Ok((0..25)
        .map(|k| centre + Vec2::new((k % 5) as f64 - 2.0, (k / 5) as f64 - 2.0) * (0.7 * xi))
        .collect())
}

/// Reference scenes used by the built-in checks, one per configuration.
pub fn reference_scene(cfg: Configuration, n: u32) -> Result<Scene> {
    let src = SourceSpec::new(n, 8e-7, 6e-7)?;
    let mut geom = ImagingGeometry {
        d1: 0.5,
        d2: 0.02,
        l1: 1.0,
        l2: 0.3,
        focal_length: 0.1,
        aperture_radius: 4e-3,
        d2_prime: None,
    };
    let mut ancilla = Vec2::ZERO;
    let position = match cfg {
        Configuration::ObjectInDegenerateArm => Vec2::new(2e-4, -1e-4),
        Configuration::ObjectInAncillaArm => {
            geom.d2_prime = Some(0.1);
            ancilla = Vec2::new(3e-4, 0.0);
            Vec2::ZERO
        }
    };
    let geom = geom.focused(&src, cfg)?;
    let mut s = Scene::new(geom, src, cfg, DetectionScheme::PointNPhoton { position })?;
    s.ancilla_position = ancilla;
    Ok(s)
}

fn cfg_label(cfg: Configuration) -> &'static str {
    match cfg {
        Configuration::ObjectInDegenerateArm => "degenerate-arm",
        Configuration::ObjectInAncillaArm => "ancilla-arm",
    }
}

fn run_engine_check(cfg: Configuration, n: u32) -> Result<EngineComparison> {
    let scene = reference_scene(cfg, n)?;
    let a = 1.3 * scene.src.lambda2 * scene.effective_distance() / scene.geom.aperture_radius;
    let sep = match cfg {
        Configuration::ObjectInDegenerateArm => Vec2::new(a, 0.3 * a),
        Configuration::ObjectInAncillaArm => Vec2::new(2e-5, 0.0),
    };
    let obj = TwoPointObject::new(Complex64::new(0.9, 0.1), Complex64::new(0.4, -0.6), sep)?;
    compare_engines(&scene, &obj, &probe_lattice(&scene, &obj)?, &QuadratureSpec::default())
}

/// Worst relative deviation of the bucket image from the sum of single-scatterer
/// images and of the coherent-minus-bucket difference from the interference term.
pub fn bucket_incoherence_deviation(scene: &Scene, obj: &TwoPointObject, bucket: &Rect, grid: &GridSpec) -> Result<(f64, f64)> {
    let (g, s) = (&scene.geom, &scene.src);
    let sb2 = bucket.area().powi(2);
    let single = |o: TwoPointObject, rho| intensity_bucket_cfg_i(g, s, &o, bucket, rho);
    let mut peak = f64::MIN_POSITIVE;
    let mut rows = Vec::with_capacity(grid.len());
    for rho in grid.points() {
        let both = intensity_bucket_cfg_i(g, s, obj, bucket, rho)?;
        let sum = single(obj.only_origin(), rho)? + single(obj.only_a(), rho)?;
        let coherent = amplitude_two_point_cfg_i(g, s, obj, Vec2::ZERO, rho)?.norm_sqr();
        let cross = interference_term_cfg_i(g, s, obj, Vec2::ZERO, rho)?;
        peak = peak.max(both.abs()).max(coherent * sb2);
        rows.push((both, sum, coherent * sb2, cross * sb2));
    }
    let mut dev = (0.0f64, 0.0f64);
    for (both, sum, coh, cross) in rows {
        dev.0 = dev.0.max((both - sum).abs() / peak);
        dev.1 = dev.1.max(((coh - both) - cross).abs() / peak);
    }
    Ok(dev)
}

pub fn run_validation(opts: &ValidationOptions) -> Vec<CheckResult> {
    let mut out = Vec::new();

    let dev = disk_identity_deviation(opts.somb, 1e-2, 50, 20.0);
    out.push(CheckResult::new(
        "disk_integral",
        "qR in [0, 20], 50 points",
        dev <= DISK_TOLERANCE,
        format!("max relative deviation {dev:.3e} (limit {DISK_TOLERANCE:.0e})"),
    ));

    for cfg in [Configuration::ObjectInDegenerateArm, Configuration::ObjectInAncillaArm] {
        for n in 1..=5 {
            let label = format!("{} N={n}", cfg_label(cfg));
            let res = reference_scene(cfg, n).map(|s| thin_lens_residual(&s.geom, &s.src, cfg));
            out.push(match res {
                Ok(r) => CheckResult::new(
                    "thin_lens",
                    &label,
                    r.abs() <= THIN_LENS_TOLERANCE,
                    format!("residual {r:.3e}"),
                ),
                Err(e) => CheckResult::new("thin_lens", &label, false, e.to_string()),
            });
        }
    }

    let bucket_check = || -> Result<(f64, f64)> {
        let base = reference_scene(Configuration::ObjectInDegenerateArm, 2)?;
        let bucket = Rect::new(Vec2::ZERO, 1e-3, 1e-3)?;
        let scene = Scene {
            detection: DetectionScheme::Bucket { extent: bucket },
            ..base
        };
        let a = 0.8 * scene.src.lambda2 * scene.effective_distance() / scene.geom.aperture_radius;
        let obj = TwoPointObject::new(Complex64::new(0.7, 0.2), Complex64::new(0.5, 0.5), Vec2::new(a, 0.0))?;
        let xi = scene.airy_radius();
        bucket_incoherence_deviation(&scene, &obj, &bucket, &GridSpec::line(-4.0 * xi, xi / 8.0, 65))
    };
    out.push(match bucket_check() {
        Ok((a, b)) => CheckResult::new(
            "bucket_incoherence",
            "degenerate-arm N=2",
            a <= BUCKET_TOLERANCE && b <= BUCKET_TOLERANCE,
            format!("sum deviation {a:.3e}, interference deviation {b:.3e}"),
        ),
        Err(e) => CheckResult::new("bucket_incoherence", "degenerate-arm N=2", false, e.to_string()),
    });

    if opts.engines {
        for cfg in [Configuration::ObjectInDegenerateArm, Configuration::ObjectInAncillaArm] {
            for n in [1, 2] {
                let label = format!("{} N={n}", cfg_label(cfg));
                out.push(match run_engine_check(cfg, n) {
                    Ok(c) => CheckResult::new(
                        "engine_equivalence",
                        &label,
                        c.passed(),
                        format!(
                            "magnitude {:.3e}, phase {:.3e} rad over {} probes",
                            c.max_magnitude_deviation, c.max_phase_deviation, c.probes
                        ),
                    ),
                    Err(e) => CheckResult::new("engine_equivalence", &label, false, e.to_string()),
                });
            }
        }
    }

    for sc in &opts.scenarios {
        let res = check_image_sampling(&sc.scene, &sc.grid)
            .and_then(|_| image_field_grid(&sc.scene, &ObjectModel::TwoPoint(TwoPointObject::symmetric(0.0)), &sc.grid))
            .map(|_| ());
        out.push(match res {
            Ok(()) => CheckResult::new("sampling", &sc.name, true, format!("pitch {:.3e} m", sc.grid.pitch)),
            Err(e) => CheckResult::new("sampling", &sc.name, false, e.to_string()),
        });
    }
    out
}
