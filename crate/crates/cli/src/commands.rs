use std::path::{Path, PathBuf};

use nphoton_core::analytic::image_field_grid;
use nphoton_core::numeric::image_field_numeric;
use nphoton_core::resolution::{
    airy_shrink_scan, classical_min_separation, run_sweep, scene_for_n, LineProfile, SweepRow, DEFAULT_SCAN_TOLERANCE,
};
use nphoton_core::speckle::{analytic_speckle, mc_bucket_intensity};
use nphoton_core::validation::{run_validation, ValidationOptions, ValidationScenario};
use nphoton_core::{
    Complex64, Configuration, DetectionScheme, Dimensionality, EnsembleConfig, GridSpec, ImageField, ObjectModel,
    QuadratureSpec, Scene, SpeckleReport, SweepParameter, SweepSpec, TwoPointObject, Vec2,
};
use serde::Serialize;

use crate::config::{canonical, config_hash, Engine, Scenario};
use crate::output::{Cell, OutputSet};
use crate::{CliError, Command};

pub fn run(cmd: Command, s: &Scenario, out: &Path) -> Result<PathBuf, CliError> {
    let canon = canonical(s);
    let hash = config_hash(&canon);
    let mut files = OutputSet::new(out);
    files.text("scenario.toml", &canon);
    let name = match cmd {
        Command::Psf => {
            psf(s, &mut files)?;
            "psf"
        }
        Command::Image => {
            image(s, &mut files)?;
            "image"
        }
        Command::Resolve => {
            resolve(s, &mut files)?;
            "resolve"
        }
        Command::Sweep => {
            sweep(s, &mut files)?;
            "sweep"
        }
        Command::Speckle => {
            speckle(s, &mut files)?;
            "speckle"
        }
        Command::Validate => unreachable!("handled by the caller"),
    };
    files.finish(name, &s.name, &hash, s.seed)
}

fn cfg_name(cfg: Configuration) -> &'static str {
    match cfg {
        Configuration::ObjectInDegenerateArm => "degenerate_arm",
        Configuration::ObjectInAncillaArm => "ancilla_arm",
    }
}

fn coordinate(scene: &Scene) -> &'static str {
    match scene.cfg {
        Configuration::ObjectInDegenerateArm => "rho2_x",
        Configuration::ObjectInAncillaArm => "rho1_x",
    }
}

/// Image samples from the selected engine(s).
struct Sampled {
    intensity: Vec<f64>,
    amplitude: Option<Vec<Complex64>>,
    numeric: Option<Vec<f64>>,
}

impl Sampled {
    /// `|I_numeric - I_analytic|` relative to the analytic peak.
    fn deviation(&self) -> Option<Vec<f64>> {
        let num = self.numeric.as_ref()?;
        let peak = self.intensity.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
        Some(self.intensity.iter().zip(num).map(|(a, n)| (n - a).abs() / peak).collect())
    }
}

fn split(field: ImageField) -> (Vec<f64>, Option<Vec<Complex64>>) {
    match field {
        ImageField::Amplitude(f) => (f.values.iter().map(|v| v.norm_sqr()).collect(), Some(f.values)),
        ImageField::Intensity(f) => (f.values, None),
    }
}

fn sample(scene: &Scene, obj: &ObjectModel, grid: &GridSpec, engine: Engine) -> Result<Sampled, CliError> {
    let quad = QuadratureSpec::default();
    Ok(match engine {
        Engine::Analytic => {
            let (intensity, amplitude) = split(image_field_grid(scene, obj, grid)?);
            Sampled {
                intensity,
                amplitude,
                numeric: None,
            }
        }
        Engine::Numeric => {
            let (intensity, amplitude) = split(image_field_numeric(scene, obj, grid, &quad)?);
            Sampled {
                intensity,
                amplitude,
                numeric: None,
            }
        }
        Engine::Both => {
            let (intensity, amplitude) = split(image_field_grid(scene, obj, grid)?);
            let (num, _) = split(image_field_numeric(scene, obj, grid, &quad)?);
            Sampled {
                intensity,
                amplitude,
                numeric: Some(num),
            }
        }
    })
}

fn image_csv(files: &mut OutputSet, name: &str, scene: &Scene, grid: &GridSpec, img: &Sampled) -> Result<(), CliError> {
    let mut header = vec![coordinate(scene), "intensity"];
    if img.amplitude.is_some() {
        header.extend(["amplitude_re", "amplitude_im"]);
    }
    let dev = img.deviation();
    if dev.is_some() {
        header.extend(["intensity_numeric", "engine_difference"]);
    }
    let rows = (0..grid.len())
        .map(|i| {
            let mut row: Vec<Cell> = vec![grid.point(i).x.into(), img.intensity[i].into()];
            if let Some(a) = &img.amplitude {
                row.extend([a[i].re.into(), a[i].im.into()]);
            }
            if let (Some(n), Some(d)) = (&img.numeric, &dev) {
                row.extend([n[i].into(), d[i].into()]);
            }
            row
        })
        .collect();
    files.csv(name, &header, rows)
}

#[derive(Serialize)]
struct ImageSummary<'a> {
    scenario: &'a str,
    configuration: &'static str,
    n_degenerate: u32,
    engine: Engine,
    effective_distance: f64,
    magnification: f64,
    airy_radius: f64,
    rayleigh_min_separation: f64,
    classical_min_separation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    measured_zero_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_relative_deviation: Option<f64>,
    grid_start: f64,
    grid_pitch: f64,
    grid_samples: usize,
}

fn summary<'a>(s: &'a Scenario, scene: &Scene, grid: &GridSpec, img: &Sampled, zero: Option<f64>) -> Result<ImageSummary<'a>, CliError> {
    Ok(ImageSummary {
        scenario: &s.name,
        configuration: cfg_name(scene.cfg),
        n_degenerate: scene.src.n_degenerate,
        engine: s.engine,
        effective_distance: scene.effective_distance(),
        magnification: scene.magnification()?,
        airy_radius: scene.airy_radius(),
        rayleigh_min_separation: nphoton_core::analytic::rayleigh_min_separation(&scene.geom, &scene.src, scene.cfg),
        classical_min_separation: classical_min_separation(scene),
        measured_zero_radius: zero,
        max_relative_deviation: img.deviation().map(|d| d.into_iter().fold(0.0, f64::max)),
        grid_start: grid.origin.x,
        grid_pitch: grid.pitch,
        grid_samples: grid.len(),
    })
}

fn psf(s: &Scenario, files: &mut OutputSet) -> Result<(), CliError> {
    let scene = &s.scene;
    let point = ObjectModel::TwoPoint(TwoPointObject::new(
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Vec2::ZERO,
    )?);
    let n = s.grid.len();
    let grid = GridSpec::line(-((n / 2) as f64) * s.grid.pitch, s.grid.pitch, n);
    let img = sample(scene, &point, &grid, s.engine)?;
    image_csv(files, "psf.csv", scene, &grid, &img)?;
    let zero = LineProfile {
        start: grid.origin.x,
        pitch: grid.pitch,
        values: img.intensity.clone(),
    }
    .first_zero_radius()
    .ok();
    files.json("psf.json", &summary(s, scene, &grid, &img, zero)?)?;

    let mut rows = Vec::new();
    for k in 1..=scene.src.n_degenerate {
        let sk = scene_for_n(scene, k)?;
        rows.push(vec![
            Cell::Int(k as u64),
            sk.effective_distance().into(),
            sk.magnification()?.into(),
            sk.airy_radius().into(),
            nphoton_core::analytic::rayleigh_min_separation(&sk.geom, &sk.src, sk.cfg).into(),
        ]);
    }
    files.csv(
        "airy_table.csv",
        &["n_degenerate", "effective_distance", "magnification", "airy_radius", "min_separation"],
        rows,
    )
}

fn image(s: &Scenario, files: &mut OutputSet) -> Result<(), CliError> {
    let img = sample(&s.scene, &s.object, &s.grid, s.engine)?;
    image_csv(files, "image.csv", &s.scene, &s.grid, &img)?;
    files.json("image.json", &summary(s, &s.scene, &s.grid, &img, None)?)
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    scenario: &'a str,
    parameter: SweepParameter,
    tolerance: f64,
    rows: &'a [SweepRow],
}

fn sweep_rows(s: &Scenario, need_scan: bool) -> Result<(Vec<SweepRow>, SweepSpec, f64), CliError> {
    let block = s
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("this command needs a [sweep] block".into()))?;
    if need_scan && block.parameter == SweepParameter::SeparationA {
        return Err(CliError::Config(
            "`resolve` scans the separation itself; sweep a geometry or photon-number parameter, or use `sweep`".into(),
        ));
    }
    let spec = SweepSpec {
        parameter: block.parameter,
        values: block.values.clone(),
        base: s.scene,
    };
    let tol = block.tolerance.unwrap_or(DEFAULT_SCAN_TOLERANCE);
    Ok((run_sweep(&spec, tol)?, spec, tol))
}

fn resolve(s: &Scenario, files: &mut OutputSet) -> Result<(), CliError> {
    let (rows, spec, tol) = sweep_rows(s, true)?;
    let table = rows
        .iter()
        .map(|r| {
            let rep = r.report.as_ref().expect("scan rows carry a report");
            vec![
                r.value.into(),
                Cell::Int(rep.n_degenerate as u64),
                rep.predicted_a_m.into(),
                rep.measured_a_m.into(),
                rep.relative_error.into(),
                rep.gain_vs_classical.into(),
                rep.psf_zero_radius.into(),
            ]
        })
        .collect();
    files.csv(
        "gain.csv",
        &[
            "value",
            "n_degenerate",
            "predicted_a_m",
            "measured_a_m",
            "relative_error",
            "gain_vs_classical",
            "psf_zero_radius",
        ],
        table,
    )?;
    files.json(
        "resolution.json",
        &SweepOutput {
            scenario: &s.name,
            parameter: spec.parameter,
            tolerance: tol,
            rows: &rows,
        },
    )?;
    if s.scene.cfg == Configuration::ObjectInAncillaArm && spec.parameter == SweepParameter::NDegenerate {
        let ns: Vec<u32> = spec.values.iter().map(|v| *v as u32).collect();
        let airy = airy_shrink_scan(&s.scene, &ns)?
            .into_iter()
            .map(|a| {
                vec![
                    Cell::Int(a.n_degenerate as u64),
                    a.measured_radius.into(),
                    a.predicted_radius.into(),
                    a.measured_ratio.into(),
                    a.predicted_ratio.into(),
                ]
            })
            .collect();
        files.csv(
            "airy.csv",
            &["n_degenerate", "measured_radius", "predicted_radius", "measured_ratio", "predicted_ratio"],
            airy,
        )?;
    }
    Ok(())
}

fn sweep(s: &Scenario, files: &mut OutputSet) -> Result<(), CliError> {
    let (rows, spec, tol) = sweep_rows(s, false)?;
    let table = rows
        .iter()
        .map(|r| {
            vec![
                r.value.into(),
                r.resolved.map_or(Cell::Empty, |b| Cell::Text(b.to_string())),
                r.report.as_ref().map(|x| x.predicted_a_m).into(),
                r.report.as_ref().map(|x| x.measured_a_m).into(),
                r.airy_radius.into(),
                r.effective_distance.into(),
            ]
        })
        .collect();
    files.csv(
        "sweep.csv",
        &["value", "resolved", "predicted_a_m", "measured_a_m", "airy_radius", "effective_distance"],
        table,
    )?;
    files.json(
        "sweep.json",
        &SweepOutput {
            scenario: &s.name,
            parameter: spec.parameter,
            tolerance: tol,
            rows: &rows,
        },
    )
}

#[derive(Serialize)]
struct SpeckleOutput<'a> {
    scenario: &'a str,
    seed: u64,
    /// Share of grid points where the Monte-Carlo image lies within three
    /// standard errors of the closed form.
    within_3se_fraction: f64,
    monte_carlo: &'a SpeckleReport,
    analytic: &'a SpeckleReport,
}

fn speckle(s: &Scenario, files: &mut OutputSet) -> Result<(), CliError> {
    let ens = s
        .ensemble
        .as_ref()
        .ok_or_else(|| CliError::Config("`speckle` needs an [ensemble] block".into()))?;
    let ObjectModel::Sampled(obj) = &s.object else {
        return Err(CliError::Config("`speckle` needs a slit object".into()));
    };
    if obj.dimensionality != Dimensionality::Slit1D {
        return Err(CliError::Config("`speckle` needs a slit object".into()));
    }
    let DetectionScheme::Bucket { extent } = s.scene.detection else {
        return Err(CliError::Config("`speckle` needs a bucket detector".into()));
    };
    let (geom, src) = (&s.scene.geom, &s.scene.src);
    let cfg = EnsembleConfig {
        realizations: ens.realizations,
        rng_seed: s.seed,
        bucket: extent,
        detector_samples: ens.detector_samples.unwrap_or(obj.nx),
    };
    let mc = mc_bucket_intensity(geom, src, obj, &cfg, &s.grid)?;
    let an = analytic_speckle(geom, src, obj, &extent, &s.grid)?;
    for w in &mc.warnings {
        eprintln!("warning: {w}");
    }
    let mut within = 0usize;
    let rows: Vec<Vec<Cell>> = (0..s.grid.len())
        .map(|i| {
            let se = mc.standard_errors[i];
            let diff = mc.image_term[i] - an.image_term[i];
            if diff.abs() <= 3.0 * se {
                within += 1;
            }
            vec![
                s.grid.point(i).x.into(),
                mc.mean_intensity[i].into(),
                mc.image_term[i].into(),
                se.into(),
                an.image_term[i].into(),
                mc.background_field[i].into(),
                an.background_field[i].into(),
            ]
        })
        .collect();
    files.csv(
        "speckle.csv",
        &[
            "rho2_x",
            "mean_intensity",
            "image_mc",
            "standard_error",
            "image_analytic",
            "background_mc",
            "background_analytic",
        ],
        rows,
    )?;
    files.json(
        "speckle.json",
        &SpeckleOutput {
            scenario: &s.name,
            seed: s.seed,
            within_3se_fraction: within as f64 / s.grid.len() as f64,
            monte_carlo: &mc,
            analytic: &an,
        },
    )
}

pub fn validate(s: Option<&Scenario>) -> Result<(), CliError> {
    let opts = ValidationOptions {
        scenarios: s
            .map(|s| {
                vec![ValidationScenario {
                    name: s.name.clone(),
                    scene: s.scene,
                    grid: s.grid,
                }]
            })
            .unwrap_or_default(),
        ..Default::default()
    };
    let results = run_validation(&opts);
    let w = results.iter().map(|r| r.check.len()).max().unwrap_or(5);
    let ws = results.iter().map(|r| r.scenario.len()).max().unwrap_or(8);
    println!("{:<w$}  {:<ws$}  result  detail", "check", "scenario");
    for r in &results {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        println!("{:<w$}  {:<ws$}  {verdict:<6}  {}", r.check, r.scenario, r.detail);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} of {} checks failed", results.len())));
    }
    Ok(())
}
