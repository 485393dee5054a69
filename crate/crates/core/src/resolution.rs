//! Rayleigh-criterion measurements on simulated images.
//!
//! Two points count as resolved when each one's image lies on or beyond the
//! first zero of the other's point-spread function. Both the zero radius and the
//! image positions are measured from sampled images, never taken from formulas.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{image_field_grid, rayleigh_min_separation, Scene, SAMPLES_PER_AIRY_RADIUS};
use crate::error::{Error, Result};
use crate::field::{GridSpec, Vec2};
use crate::object::{ObjectModel, TwoPointObject};
use crate::optics::{airy_radius, effective_object_distance, Configuration, SourceSpec};

/// Default bisection tolerance relative to the predicted minimum separation.
pub const DEFAULT_SCAN_TOLERANCE: f64 = 5e-3;

/// Image samples per predicted Airy radius used by the scans.
pub const SCAN_SAMPLES_PER_RADIUS: usize = 64;

/// Slack on the resolved test absorbing the error of the measured zero radius.
const RESOLVED_SLACK: f64 = 1e-3;

/// Uniformly sampled intensity along one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineProfile {
    pub start: f64,
    pub pitch: f64,
    pub values: Vec<f64>,
}

impl LineProfile {
    pub fn position(&self, i: usize) -> f64 {
        self.start + i as f64 * self.pitch
    }

    fn validate(&self) -> Result<()> {
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(Error::param("profile.pitch", "must be finite and > 0"));
        }
        if self.values.len() < 5 || self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Detection("profile needs at least 5 finite samples".into()));
        }
        Ok(())
    }

    /// Peak position refined by a parabola through the three largest-neighbourhood samples.
    pub fn peak(&self) -> Result<f64> {
        self.validate()?;
        let (imax, vmax) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, v)| if *v > b.1 { (i, *v) } else { b });
        let vmin = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(vmax > 0.0 && vmax - vmin > 1e-12 * vmax) {
            return Err(Error::Detection("flat profile: no peak to locate".into()));
        }
        if imax == 0 || imax + 1 == self.values.len() {
            return Err(Error::Detection("peak lies on the profile edge".into()));
        }
        let (a, b, c) = (self.values[imax - 1], vmax, self.values[imax + 1]);
        let denom = a - 2.0 * b + c;
        let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        Ok(self.position(imax) + shift * self.pitch)
    }

    /// Distance from the peak to the first zero on each side. The amplitude
    /// `sqrt(I)` changes sign at the zero, so a quadratic is fitted to the signed
    /// amplitude over the five samples around the minimum, trying the minimum
    /// sample on either side of the zero and keeping the better fit.
    pub fn first_zero_radius(&self) -> Result<f64> {
        let peak = self.peak()?;
        let ipeak = ((peak - self.start) / self.pitch).round() as isize;
        let amp: Vec<f64> = self.values.iter().map(|v| v.max(0.0).sqrt()).collect();
        let mut radii = Vec::new();
        for dir in [-1isize, 1] {
            if let Some(z) = self.zero_along(&amp, ipeak, dir) {
                radii.push((z - peak).abs());
            }
        }
        if radii.is_empty() {
            return Err(Error::Detection("no zero of the point-spread function inside the profile".into()));
        }
        Ok(radii.iter().sum::<f64>() / radii.len() as f64)
    }

    fn zero_along(&self, amp: &[f64], from: isize, dir: isize) -> Option<f64> {
        let n = amp.len() as isize;
        let mut j = from;
        // walk downhill to the first local minimum
        while j + dir >= 0 && j + dir < n && amp[(j + dir) as usize] <= amp[j as usize] {
            j += dir;
        }
        if j - 2 < 0 || j + 2 >= n || j == from {
            return None;
        }
        // local coordinate t in samples, positive away from the peak
        let mut best: Option<(f64, f64)> = None;
        for min_beyond in [false, true] {
            let pts: Vec<(f64, f64)> = (-2..=2)
                .map(|t: isize| {
                    let beyond = t > 0 || (t == 0 && min_beyond);
                    let a = amp[(j + dir * t) as usize];
                    (t as f64, if beyond { -a } else { a })
                })
                .collect();
            let (c, resid) = fit_quadratic(&pts);
            if let Some(root) = quadratic_root_near(c, 0.0) {
                if best.is_none_or(|(r, _)| resid < r) {
                    best = Some((resid, root));
                }
            }
        }
        let (_, t) = best?;
        Some(self.position(j as usize) + dir as f64 * t * self.pitch)
    }
}

/// Least-squares `c0 + c1 t + c2 t^2` through the points, with the residual sum of squares.
fn fit_quadratic(pts: &[(f64, f64)]) -> ([f64; 3], f64) {
    let mut m = [[0.0; 4]; 3];
    for &(t, y) in pts {
        let basis = [1.0, t, t * t];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += basis[r] * basis[c];
            }
            m[r][3] += basis[r] * y;
        }
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap_or(col);
        m.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                let pivot = m[col];
                for (x, p) in m[r][col..].iter_mut().zip(&pivot[col..]) {
                    *x -= f * p;
                }
            }
        }
    }
    let c = [m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]];
    let resid = pts
        .iter()
        .map(|&(t, y)| (c[0] + c[1] * t + c[2] * t * t - y).powi(2))
        .sum();
    (c, resid)
}

fn quadratic_root_near(c: [f64; 3], t0: f64) -> Option<f64> {
    let [c0, c1, c2] = c;
    if c2.abs() < 1e-14 * c1.abs() {
        return (c1 != 0.0).then(|| -c0 / c1);
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let q = -0.5 * (c1 + c1.signum() * sq);
    let roots = [q / c2, c0 / q];
    roots
        .into_iter()
        .filter(|r| r.is_finite())
        .min_by(|a, b| (a - t0).abs().total_cmp(&(b - t0).abs()))
}

/// Rayleigh test from a single-scatterer point-spread profile and the measured
/// image positions of the two scatterers.
pub fn detect_resolved(psf: &LineProfile, peaks: [f64; 2]) -> Result<bool> {
    let radius = psf.first_zero_radius()?;
    if radius / psf.pitch < SAMPLES_PER_AIRY_RADIUS {
        return Err(Error::Sampling(format!(
            "profile has {:.1} samples per Airy radius, need {SAMPLES_PER_AIRY_RADIUS}",
            radius / psf.pitch
        )));
    }
    if !peaks.iter().all(|p| p.is_finite()) {
        return Err(Error::Detection("peak positions must be finite".into()));
    }
    Ok((peaks[1] - peaks[0]).abs() >= radius * (1.0 - RESOLVED_SLACK))
}

/// Intensity along x of a single scatterer at `(x_obj, 0)`, sampled on a line
/// of half-width `half` around `centre`.
fn single_scatterer_profile(scene: &Scene, x_obj: f64, centre: f64, half: f64, pitch: f64) -> Result<LineProfile> {
    let count = (2.0 * half / pitch).round() as usize + 1;
    let start = centre - half;
    let grid = GridSpec::line(start, pitch, count);
    let obj = TwoPointObject::new(
        num_complex::Complex64::new(0.0, 0.0),
        num_complex::Complex64::new(1.0, 0.0),
        Vec2::new(x_obj, 0.0),
    )?;
    let field = image_field_grid(scene, &ObjectModel::TwoPoint(obj), &grid)?.intensity();
    Ok(LineProfile {
        start,
        pitch,
        values: field.values,
    })
}

fn scan_pitch(scene: &Scene) -> f64 {
    scene.airy_radius() / SCAN_SAMPLES_PER_RADIUS as f64
}

/// Measured image position and first-zero radius for a scatterer at `(x_obj, 0)`.
pub fn measure_psf(scene: &Scene, x_obj: f64) -> Result<(f64, f64)> {
    let xi = scene.airy_radius();
    let predicted = -scene.magnification()? * x_obj;
    let profile = single_scatterer_profile(scene, x_obj, predicted, 2.5 * xi, scan_pitch(scene))?;
    Ok((profile.peak()?, profile.first_zero_radius()?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub configuration: Configuration,
    pub n_degenerate: u32,
    pub predicted_a_m: f64,
    pub measured_a_m: f64,
    pub relative_error: f64,
    /// Classical (`N = 1`) limit over the measured one, present only when the
    /// formula predicts a gain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_vs_classical: Option<f64>,
    /// Measured first-zero radius in the image plane.
    pub psf_zero_radius: f64,
    pub criterion: String,
    pub iterations: usize,
}

fn classical_limit(scene: &Scene) -> f64 {
    let src = scene.src.with_n(1);
    rayleigh_min_separation(&scene.geom, &src, scene.cfg)
}

/// Bisects the two-point separation (along x) to the Rayleigh boundary using
/// images from the closed-form engine and the scene's detector.
pub fn scan_min_separation(scene: &Scene, tol: f64) -> Result<ResolutionReport> {
    scene.validate()?;
    if !(tol.is_finite() && tol > 0.0 && tol < 1.0) {
        return Err(Error::param("tol", "must lie in (0, 1)"));
    }
    let predicted = rayleigh_min_separation(&scene.geom, &scene.src, scene.cfg);
    let xi = scene.airy_radius();
    let pitch = scan_pitch(scene);
    let psf = single_scatterer_profile(scene, 0.0, 0.0, 2.5 * xi, pitch)?;
    let p0 = psf.peak()?;
    let resolved = |a: f64| -> Result<bool> {
        let centre = -scene.magnification()? * a;
        let img = single_scatterer_profile(scene, a, centre, 2.5 * xi, pitch)?;
        detect_resolved(&psf, [p0, img.peak()?])
    };
    let (mut lo, mut hi) = (0.1 * predicted, 10.0 * predicted);
    if resolved(lo)? || !resolved(hi)? {
        return Err(Error::Scan(format!(
            "Rayleigh boundary not bracketed in [{lo:.4e}, {hi:.4e}] m"
        )));
    }
    let mut iterations = 0;
    while hi - lo > tol * predicted {
        let mid = 0.5 * (lo + hi);
        if resolved(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    let measured = 0.5 * (lo + hi);
    let classical = classical_limit(scene);
    Ok(ResolutionReport {
        configuration: scene.cfg,
        n_degenerate: scene.src.n_degenerate,
        predicted_a_m: predicted,
        measured_a_m: measured,
        relative_error: (measured - predicted).abs() / predicted,
        gain_vs_classical: (classical > predicted * (1.0 + 1e-9)).then(|| classical / measured),
        psf_zero_radius: psf.first_zero_radius()?,
        criterion: "image of each point on or beyond the first PSF zero of the other".into(),
        iterations,
    })
}

/// Scene for another degenerate-photon count. The degenerate-arm configuration
/// moves `L2` to stay focused; the ancilla-arm configuration keeps `d2'` and
/// re-solves the focal length.
pub fn scene_for_n(base: &Scene, n: u32) -> Result<Scene> {
    let src = base.src.with_n(n);
    let geom = match base.cfg {
        Configuration::ObjectInDegenerateArm => base.geom.focused(&src, base.cfg)?,
        Configuration::ObjectInAncillaArm => base.geom.with_matched_focal_length(&src, base.cfg)?,
    };
    let s = Scene { geom, src, ..*base };
    s.validate()?;
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AiryRow {
    pub n_degenerate: u32,
    pub measured_radius: f64,
    pub predicted_radius: f64,
    /// Measured radius over the measured `N = 1` radius.
    pub measured_ratio: f64,
    pub predicted_ratio: f64,
}

/// First-zero radius of the D1-plane point-spread function per `N`, with `d2'`
/// held fixed.
pub fn airy_shrink_scan(base: &Scene, n_values: &[u32]) -> Result<Vec<AiryRow>> {
    if base.cfg != Configuration::ObjectInAncillaArm {
        return Err(Error::Unsupported("the Airy-shrink scan applies to the ancilla-arm configuration".into()));
    }
    let reference = scene_for_n(base, 1)?;
    let (_, r1) = measure_psf(&reference, 0.0)?;
    let p1 = reference.airy_radius();
    n_values
        .par_iter()
        .map(|&n| {
            let s = scene_for_n(base, n)?;
            let (_, r) = measure_psf(&s, 0.0)?;
            let p = airy_radius(&s.geom, &s.src, s.cfg);
            Ok(AiryRow {
                n_degenerate: n,
                measured_radius: r,
                predicted_radius: p,
                measured_ratio: r / r1,
                predicted_ratio: p / p1,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    SeparationA,
    NDegenerate,
    D1OverD2,
    L1OverD2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub base: Scene,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        crate::optics::check_thin_lens(&self.base.geom, &self.base.src, self.base.cfg)?;
        if self.values.is_empty() || self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("sweep.values", "need at least one finite value"));
        }
        let inc = self.values.windows(2).all(|w| w[1] > w[0]);
        let dec = self.values.windows(2).all(|w| w[1] < w[0]);
        if !(inc || dec) {
            return Err(Error::param("sweep.values", "must be strictly monotone"));
        }
        match self.parameter {
            SweepParameter::NDegenerate if self.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) => {
                Err(Error::param("sweep.values", "photon numbers must be integers >= 1"))
            }
            SweepParameter::D1OverD2 | SweepParameter::L1OverD2 if self.base.geom.d2.is_nan() || self.base.geom.d2 <= 0.0 => {
                Err(Error::param("sweep.values", "ratio sweeps need d2 > 0"))
            }
            _ if self.values.iter().any(|v| *v <= 0.0) => Err(Error::param("sweep.values", "must be > 0")),
            _ => Ok(()),
        }
    }

    /// Scene at sweep point `v`; separation sweeps leave the scene unchanged.
    pub fn scene_at(&self, v: f64) -> Result<Scene> {
        let b = &self.base;
        match self.parameter {
            SweepParameter::SeparationA => Ok(*b),
            SweepParameter::NDegenerate => scene_for_n(b, v as u32),
            SweepParameter::D1OverD2 | SweepParameter::L1OverD2 => {
                let mut s = *b;
                if self.parameter == SweepParameter::D1OverD2 {
                    s.geom.d1 = v * b.geom.d2;
                } else {
                    s.geom.l1 = v * b.geom.d2;
                }
                scene_for_n(&s, s.src.n_degenerate)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    /// Set for separation sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved: Option<bool>,
    /// Set for geometry and photon-number sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ResolutionReport>,
    pub airy_radius: f64,
    pub effective_distance: f64,
}

/// Evaluates every sweep point independently; rows come back in input order.
pub fn run_sweep(spec: &SweepSpec, tol: f64) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let psf = if spec.parameter == SweepParameter::SeparationA {
        let s = &spec.base;
        Some((single_scatterer_profile(s, 0.0, 0.0, 2.5 * s.airy_radius(), scan_pitch(s))?, s))
    } else {
        None
    };
    spec.values
        .par_iter()
        .map(|&v| {
            let scene = spec.scene_at(v)?;
            let (resolved, report) = match &psf {
                Some((profile, s)) => {
                    let p0 = profile.peak()?;
                    let (pa, _) = measure_psf(s, v)?;
                    (Some(detect_resolved(profile, [p0, pa])?), None)
                }
                None => (None, Some(scan_min_separation(&scene, tol)?)),
            };
            Ok(SweepRow {
                value: v,
                resolved,
                report,
                airy_radius: scene.airy_radius(),
                effective_distance: effective_object_distance(&scene.geom, &scene.src, scene.cfg),
            })
        })
        .collect()
}

/// Classical (`N = 1`) limit `0.61 (lambda2/R)(d2 + (lambda1/lambda2) d1)` for comparison.
pub fn classical_min_separation(scene: &Scene) -> f64 {
    let src = SourceSpec { n_degenerate: 1, ..scene.src };
    rayleigh_min_separation(&scene.geom, &src, scene.cfg)
}
