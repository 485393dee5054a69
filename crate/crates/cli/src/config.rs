//! Scenario files: TOML with unit-suffixed lengths, resolved into core types.
//!
//! ```toml
//! name = "two-point"
//! configuration = "degenerate_arm"   # or "ancilla_arm"
//! seed = 7
//! engine = "analytic"                # analytic | numeric | both
//!
//! [geometry]
//! d1 = "10 m"
//! d2 = "1 mm"
//! L1 = "1 m"
//! f = "10 cm"          # L2 is solved from the lens equation when omitted
//! R = "1 cm"
//!
//! [source]
//! n = 2
//! lambda1 = "1 um"
//! lambda2 = "1 um"
//!
//! [object]
//! kind = "two_point"
//! separation = "20 um"
//!
//! [detection]
//! kind = "bucket"
//! width = "1 mm"
//! height = "1 mm"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use nphoton_core::{
    Complex64, Configuration, DetectionScheme, GridSpec, ImagingGeometry, ObjectModel, Rect, SampledObject, Scene,
    SourceSpec, SweepParameter, TwoPointObject, Vec2,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::units::{format_length, parse_length};

/// Image samples per Airy radius on the default grid.
const DEFAULT_SAMPLES_PER_RADIUS: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Analytic,
    Numeric,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawConfiguration {
    DegenerateArm,
    AncillaArm,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    configuration: RawConfiguration,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    engine: Option<Engine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    geometry: RawGeometry,
    source: RawSource,
    object: RawObject,
    detection: RawDetection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<RawGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sweep: Option<RawSweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ensemble: Option<RawEnsemble>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    d1: String,
    d2: String,
    #[serde(rename = "L1")]
    l1: String,
    #[serde(rename = "L2", default, skip_serializing_if = "Option::is_none")]
    l2: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f: Option<String>,
    #[serde(rename = "R")]
    r: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d2_prime: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    n: u32,
    lambda1: String,
    lambda2: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawObject {
    TwoPoint {
        separation: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        separation_y: Option<String>,
        #[serde(default = "unit_amplitude")]
        amp_origin: [f64; 2],
        #[serde(default = "unit_amplitude")]
        amp_a: [f64; 2],
    },
    /// Uniform slit of `pixels` pixels, or explicit `transmission` values.
    Slit {
        pitch: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pixels: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        transmission: Option<Vec<[f64; 2]>>,
    },
    /// Row-major rows of complex transmissions.
    Grid { pitch: String, rows: Vec<Vec<[f64; 2]>> },
    /// CSV of real transmissions, one object row per line, relative to the config file.
    GridFile { pitch: String, path: PathBuf },
}

fn unit_amplitude() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawDetection {
    Point {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y: Option<String>,
    },
    Bucket {
        width: String,
        height: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center_x: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center_y: Option<String>,
    },
}

/// Image line along x.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    start: String,
    pitch: String,
    samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    parameter: SweepParameter,
    /// Lengths for `separation_a`, plain numbers otherwise.
    values: Vec<toml::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnsemble {
    realizations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detector_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepBlock {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleBlock {
    pub realizations: usize,
    pub detector_samples: Option<usize>,
}

/// A fully resolved scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub engine: Engine,
    pub out: Option<PathBuf>,
    pub scene: Scene,
    pub object: ObjectModel,
    pub grid: GridSpec,
    pub sweep: Option<SweepBlock>,
    pub ensemble: Option<EnsembleBlock>,
}

/// A configuration problem, located in the file where possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub file: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.file, l, self.message),
            None => write!(f, "{}: {}", self.file, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

struct Ctx<'a> {
    file: String,
    text: &'a str,
    dir: PathBuf,
}

impl Ctx<'_> {
    /// Line (1-based) of `key = ...` inside `[section]`, or of the section header.
    fn locate(&self, section: &str, key: &str) -> Option<usize> {
        let mut current = String::new();
        let mut header = None;
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if let Some(s) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = s.trim().to_string();
                if current == section {
                    header = Some(i + 1);
                }
                continue;
            }
            if current == section {
                if let Some((k, _)) = line.split_once('=') {
                    if k.trim() == key {
                        return Some(i + 1);
                    }
                }
            }
        }
        header
    }

    fn err(&self, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        let path = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        ConfigError {
            file: self.file.clone(),
            line: self.locate(section, key),
            message: format!("`{path}`: {}", message.into()),
        }
    }

    fn length(&self, section: &str, key: &str, text: &str) -> Result<f64, ConfigError> {
        parse_length(text).map_err(|m| self.err(section, key, m))
    }

    fn opt_length(&self, section: &str, key: &str, text: &Option<String>) -> Result<Option<f64>, ConfigError> {
        text.as_deref().map(|t| self.length(section, key, t)).transpose()
    }

    /// Core validation errors name a field; point at it in the file.
    fn core(&self, section: &str, e: nphoton_core::Error) -> ConfigError {
        let key = match &e {
            nphoton_core::Error::InvalidGeometry { field, .. } | nphoton_core::Error::InvalidParameter { field, .. } => {
                field.to_string()
            }
            _ => String::new(),
        };
        ConfigError {
            file: self.file.clone(),
            line: if key.is_empty() { self.locate(section, "") } else { self.locate(section, &key) },
            message: e.to_string(),
        }
    }
}

fn complex(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

/// Reads and resolves a scenario file.
pub fn load(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        file: path.display().to_string(),
        line: None,
        message: format!("cannot read: {e}"),
    })?;
    parse(&text, &path.display().to_string(), path.parent().unwrap_or(Path::new(".")))
}

pub fn parse(text: &str, file: &str, dir: &Path) -> Result<Scenario, ConfigError> {
    let ctx = Ctx {
        file: file.to_string(),
        text,
        dir: dir.to_path_buf(),
    };
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
        file: file.to_string(),
        line: e.span().map(|s| text[..s.start].matches('\n').count() + 1),
        message: e.message().to_string(),
    })?;
    resolve(&ctx, &raw)
}

fn resolve(ctx: &Ctx, raw: &RawConfig) -> Result<Scenario, ConfigError> {
    let cfg = match raw.configuration {
        RawConfiguration::DegenerateArm => Configuration::ObjectInDegenerateArm,
        RawConfiguration::AncillaArm => Configuration::ObjectInAncillaArm,
    };
    let g = &raw.geometry;
    let geo = "geometry";
    let src = SourceSpec::new(
        raw.source.n,
        ctx.length("source", "lambda1", &raw.source.lambda1)?,
        ctx.length("source", "lambda2", &raw.source.lambda2)?,
    )
    .map_err(|e| ctx.core("source", e))?;

    let l2 = ctx.opt_length(geo, "L2", &g.l2)?;
    let f = ctx.opt_length(geo, "f", &g.f)?;
    let mut geom = ImagingGeometry {
        d1: ctx.length(geo, "d1", &g.d1)?,
        d2: ctx.length(geo, "d2", &g.d2)?,
        l1: ctx.length(geo, "L1", &g.l1)?,
        l2: l2.unwrap_or(1.0),
        focal_length: f.unwrap_or(1.0),
        aperture_radius: ctx.length(geo, "R", &g.r)?,
        d2_prime: ctx.opt_length(geo, "d2_prime", &g.d2_prime)?,
    };
    geom.validate(cfg).map_err(|e| ctx.core(geo, e))?;
    geom = match (cfg, l2, f) {
        (Configuration::ObjectInDegenerateArm, _, None) => return Err(ctx.err(geo, "f", "focal length is required")),
        (Configuration::ObjectInDegenerateArm, None, Some(_)) => geom.focused(&src, cfg).map_err(|e| ctx.core(geo, e))?,
        (Configuration::ObjectInAncillaArm, None, _) => {
            return Err(ctx.err(geo, "L2", "is required for the ancilla-arm configuration"))
        }
        (Configuration::ObjectInAncillaArm, Some(_), None) => {
            geom.with_matched_focal_length(&src, cfg).map_err(|e| ctx.core(geo, e))?
        }
        _ => geom,
    };
    nphoton_core::optics::check_thin_lens(&geom, &src, cfg).map_err(|e| ctx.core(geo, e))?;

    let detection = match &raw.detection {
        RawDetection::Point { x, y } => DetectionScheme::PointNPhoton {
            position: Vec2::new(
                ctx.opt_length("detection", "x", x)?.unwrap_or(0.0),
                ctx.opt_length("detection", "y", y)?.unwrap_or(0.0),
            ),
        },
        RawDetection::Bucket {
            width,
            height,
            center_x,
            center_y,
        } => {
            let centre = Vec2::new(
                ctx.opt_length("detection", "center_x", center_x)?.unwrap_or(0.0),
                ctx.opt_length("detection", "center_y", center_y)?.unwrap_or(0.0),
            );
            let w = ctx.length("detection", "width", width)?;
            let h = ctx.length("detection", "height", height)?;
            DetectionScheme::Bucket {
                extent: Rect::new(centre, w, h).map_err(|e| ctx.core("detection", e))?,
            }
        }
    };
    let scene = Scene::new(geom, src, cfg, detection).map_err(|e| ctx.core("detection", e))?;

    let object = resolve_object(ctx, &raw.object)?;
    let grid = match &raw.grid {
        Some(gr) => {
            let grid = GridSpec::line(
                ctx.length("grid", "start", &gr.start)?,
                ctx.length("grid", "pitch", &gr.pitch)?,
                gr.samples,
            );
            grid.validate().map_err(|e| ctx.core("grid", e))?;
            grid
        }
        None => default_grid(&scene, &object).map_err(|e| ctx.core("object", e))?,
    };

    let sweep = raw
        .sweep
        .as_ref()
        .map(|s| -> Result<SweepBlock, ConfigError> {
            let values = s
                .values
                .iter()
                .map(|v| match (s.parameter, v) {
                    (SweepParameter::SeparationA, toml::Value::String(t)) => ctx.length("sweep", "values", t),
                    (SweepParameter::SeparationA, _) => Err(ctx.err("sweep", "values", "separations need length units")),
                    (_, toml::Value::Integer(i)) => Ok(*i as f64),
                    (_, toml::Value::Float(x)) => Ok(*x),
                    _ => Err(ctx.err("sweep", "values", "expected numbers")),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let spec = nphoton_core::SweepSpec {
                parameter: s.parameter,
                values: values.clone(),
                base: scene,
            };
            spec.validate().map_err(|e| ConfigError {
                line: ctx.locate("sweep", "values"),
                ..ctx.core("sweep", e)
            })?;
            if let Some(t) = s.tolerance {
                if !(t > 0.0 && t < 1.0) {
                    return Err(ctx.err("sweep", "tolerance", "must lie in (0, 1)"));
                }
            }
            Ok(SweepBlock {
                parameter: s.parameter,
                values,
                tolerance: s.tolerance,
            })
        })
        .transpose()?;

    let ensemble = match &raw.ensemble {
        Some(e) if e.realizations < 2 => {
            return Err(ctx.err("ensemble", "realizations", "must be at least 2 (the variance is undefined otherwise)"))
        }
        Some(e) if e.detector_samples == Some(0) => return Err(ctx.err("ensemble", "detector_samples", "must be > 0")),
        Some(e) => Some(EnsembleBlock {
            realizations: e.realizations,
            detector_samples: e.detector_samples,
        }),
        None => None,
    };

    Ok(Scenario {
        name: raw.name.clone().unwrap_or_else(|| "scenario".into()),
        seed: raw.seed.unwrap_or(0),
        engine: raw.engine.unwrap_or(Engine::Analytic),
        out: raw.out.clone(),
        scene,
        object,
        grid,
        sweep,
        ensemble,
    })
}

fn resolve_object(ctx: &Ctx, raw: &RawObject) -> Result<ObjectModel, ConfigError> {
    let sec = "object";
    let model = match raw {
        RawObject::TwoPoint {
            separation,
            separation_y,
            amp_origin,
            amp_a,
        } => {
            let sep = Vec2::new(
                ctx.length(sec, "separation", separation)?,
                ctx.opt_length(sec, "separation_y", separation_y)?.unwrap_or(0.0),
            );
            ObjectModel::TwoPoint(
                TwoPointObject::new(complex(*amp_origin), complex(*amp_a), sep).map_err(|e| ctx.core(sec, e))?,
            )
        }
        RawObject::Slit {
            pitch,
            pixels,
            transmission,
        } => {
            let p = ctx.length(sec, "pitch", pitch)?;
            let values = match (pixels, transmission) {
                (Some(n), None) => vec![Complex64::new(1.0, 0.0); *n],
                (None, Some(t)) => t.iter().copied().map(complex).collect(),
                _ => return Err(ctx.err(sec, "pixels", "give exactly one of `pixels` and `transmission`")),
            };
            ObjectModel::Sampled(SampledObject::slit(p, values).map_err(|e| ctx.core(sec, e))?)
        }
        RawObject::Grid { pitch, rows } => {
            let p = ctx.length(sec, "pitch", pitch)?;
            grid_object(ctx, p, rows.iter().map(|r| r.iter().copied().map(complex).collect()).collect())?
        }
        RawObject::GridFile { pitch, path } => {
            let p = ctx.length(sec, "pitch", pitch)?;
            let full = ctx.dir.join(path);
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .trim(csv::Trim::All)
                .from_path(&full)
                .map_err(|e| ctx.err(sec, "path", format!("{}: {e}", full.display())))?;
            let mut rows = Vec::new();
            for (i, rec) in reader.records().enumerate() {
                let rec = rec.map_err(|e| ctx.err(sec, "path", format!("{}: {e}", full.display())))?;
                let row = rec
                    .iter()
                    .map(|c| c.parse::<f64>().map(|v| Complex64::new(v, 0.0)))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| ctx.err(sec, "path", format!("{} row {}: {e}", full.display(), i + 1)))?;
                rows.push(row);
            }
            grid_object(ctx, p, rows)?
        }
    };
    Ok(model)
}

fn grid_object(ctx: &Ctx, pitch: f64, rows: Vec<Vec<Complex64>>) -> Result<ObjectModel, ConfigError> {
    let ny = rows.len();
    let nx = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nx) {
        return Err(ctx.err("object", "rows", "all rows must have the same length"));
    }
    let values = rows.into_iter().flatten().collect();
    Ok(ObjectModel::Sampled(
        SampledObject::grid(pitch, nx, ny, values).map_err(|e| ctx.core("object", e))?,
    ))
}

/// Line along x through the image of the object, covering it plus three Airy
/// radii on each side at 16 samples per radius.
pub fn default_grid(scene: &Scene, object: &ObjectModel) -> nphoton_core::Result<GridSpec> {
    let m = scene.magnification()?;
    let xs: Vec<f64> = match object {
        ObjectModel::TwoPoint(o) => vec![0.0, o.separation.x],
        ObjectModel::Sampled(o) => vec![o.position(0).x, o.position(o.nx - 1).x],
    };
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (a, b) = ((-m * lo).min(-m * hi), (-m * lo).max(-m * hi));
    let xi = scene.airy_radius();
    let pitch = xi / DEFAULT_SAMPLES_PER_RADIUS;
    let half = 0.5 * (b - a) + 3.0 * xi;
    let count = 2 * (half / pitch).ceil() as usize + 1;
    let centre = 0.5 * (a + b);
    Ok(GridSpec::line(centre - (count / 2) as f64 * pitch, pitch, count))
}

/// Canonical TOML: SI lengths, solved lens distances, defaults made explicit,
/// objects inlined. Parsing it reproduces the same scenario.
pub fn canonical(s: &Scenario) -> String {
    let l = format_length;
    let g = &s.scene.geom;
    let cfg = match s.scene.cfg {
        Configuration::ObjectInDegenerateArm => RawConfiguration::DegenerateArm,
        Configuration::ObjectInAncillaArm => RawConfiguration::AncillaArm,
    };
    let pair = |c: Complex64| [c.re, c.im];
    let object = match &s.object {
        ObjectModel::TwoPoint(o) => RawObject::TwoPoint {
            separation: l(o.separation.x),
            separation_y: Some(l(o.separation.y)),
            amp_origin: pair(o.amp_origin),
            amp_a: pair(o.amp_a),
        },
        ObjectModel::Sampled(o) if o.dimensionality == nphoton_core::Dimensionality::Slit1D => RawObject::Slit {
            pitch: l(o.pixel_pitch),
            pixels: None,
            transmission: Some(o.values.iter().map(|c| pair(*c)).collect()),
        },
        ObjectModel::Sampled(o) => RawObject::Grid {
            pitch: l(o.pixel_pitch),
            rows: o.values.chunks(o.nx).map(|r| r.iter().map(|c| pair(*c)).collect()).collect(),
        },
    };
    let detection = match s.scene.detection {
        DetectionScheme::PointNPhoton { position } => RawDetection::Point {
            x: Some(l(position.x)),
            y: Some(l(position.y)),
        },
        DetectionScheme::Bucket { extent } => RawDetection::Bucket {
            width: l(extent.width),
            height: l(extent.height),
            center_x: Some(l(extent.center.x)),
            center_y: Some(l(extent.center.y)),
        },
    };
    let raw = RawConfig {
        name: Some(s.name.clone()),
        configuration: cfg,
        seed: Some(s.seed),
        engine: Some(s.engine),
        out: None,
        geometry: RawGeometry {
            d1: l(g.d1),
            d2: l(g.d2),
            l1: l(g.l1),
            l2: Some(l(g.l2)),
            f: Some(l(g.focal_length)),
            r: l(g.aperture_radius),
            d2_prime: g.d2_prime.map(l),
        },
        source: RawSource {
            n: s.scene.src.n_degenerate,
            lambda1: l(s.scene.src.lambda1),
            lambda2: l(s.scene.src.lambda2),
        },
        object,
        detection,
        grid: Some(RawGrid {
            start: l(s.grid.origin.x),
            pitch: l(s.grid.pitch),
            samples: s.grid.nx,
        }),
        sweep: s.sweep.as_ref().map(|w| RawSweep {
            parameter: w.parameter,
            values: w
                .values
                .iter()
                .map(|&v| match w.parameter {
                    SweepParameter::SeparationA => toml::Value::String(l(v)),
                    _ => toml::Value::Float(v),
                })
                .collect(),
            tolerance: w.tolerance,
        }),
        ensemble: s.ensemble.as_ref().map(|e| RawEnsemble {
            realizations: e.realizations,
            detector_samples: e.detector_samples,
        }),
    };
    toml::to_string(&raw).expect("scenario serialises to TOML")
}

pub fn config_hash(canonical_text: &str) -> String {
    hex::encode(Sha256::digest(canonical_text.as_bytes()))
}
