//! Closed-form amplitudes and images under the same-point assumption: the N
//! degenerate photons scatter off a single object point, which collapses the
//! N-fold object integral to one integral with an `A^N` weight and a `somb`
//! point-spread kernel once the thin-lens condition holds.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, GridSpec, ImageField, Plane, RealField, Rect, Vec2};
use crate::object::{ObjectModel, TwoPointObject};
use crate::optics::{
    airy_radius, check_thin_lens, effective_object_distance, magnification, Configuration,
    ImagingGeometry, SourceSpec,
};
use crate::special::{rayleigh_factor, somb_unchecked};

/// Minimum number of image-plane samples per Airy radius.
pub const SAMPLES_PER_AIRY_RADIUS: f64 = 8.0;

/// The N-photon detector D1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectionScheme {
    /// All N photons registered at one transverse position: coherent image.
    PointNPhoton { position: Vec2 },
    /// N photons registered anywhere inside `extent`: incoherent image.
    Bucket { extent: Rect },
}

impl DetectionScheme {
    pub fn validate(&self) -> Result<()> {
        match self {
            DetectionScheme::PointNPhoton { position } if !position.is_finite() => {
                Err(Error::param("detection.position", "must be finite"))
            }
            DetectionScheme::Bucket { extent } => Rect::new(extent.center, extent.width, extent.height).map(|_| ()),
            _ => Ok(()),
        }
    }
}

/// Everything that fixes the optical experiment apart from the object.
///
/// In the degenerate-arm configuration the image is scanned over the D2 plane and
/// `detection` describes the fixed D1. In the ancilla-arm configuration the image
/// is scanned over the D1 plane with a point detector, and D2 sits at
/// `ancilla_position`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub geom: ImagingGeometry,
    pub src: SourceSpec,
    pub cfg: Configuration,
    pub detection: DetectionScheme,
    #[serde(default)]
    pub ancilla_position: Vec2,
}

impl Scene {
    pub fn new(geom: ImagingGeometry, src: SourceSpec, cfg: Configuration, detection: DetectionScheme) -> Result<Self> {
        let s = Self {
            geom,
            src,
            cfg,
            detection,
            ancilla_position: Vec2::ZERO,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.geom.validate(self.cfg)?;
        self.src.validate()?;
        self.detection.validate()?;
        if !self.ancilla_position.is_finite() {
            return Err(Error::param("ancilla_position", "must be finite"));
        }
        if self.cfg == Configuration::ObjectInAncillaArm && matches!(self.detection, DetectionScheme::Bucket { .. }) {
            return Err(Error::Unsupported(
                "the ancilla-arm configuration images in the D1 plane and needs a point N-photon detector".into(),
            ));
        }
        Ok(())
    }

    pub fn effective_distance(&self) -> f64 {
        effective_object_distance(&self.geom, &self.src, self.cfg)
    }

    pub fn magnification(&self) -> Result<f64> {
        magnification(&self.geom, &self.src, self.cfg)
    }

    pub fn airy_radius(&self) -> f64 {
        airy_radius(&self.geom, &self.src, self.cfg)
    }

    /// Plane in which the image is formed.
    pub fn image_plane(&self) -> Plane {
        match self.cfg {
            Configuration::ObjectInDegenerateArm => Plane::D2,
            Configuration::ObjectInAncillaArm => Plane::D1,
        }
    }

    /// Where a point at `rho_o` in the object plane is imaged.
    pub fn image_point(&self, rho_o: Vec2) -> Result<Vec2> {
        Ok(-rho_o * self.magnification()?)
    }

    /// Same scene with a different degenerate-photon count, refocused by moving
    /// the image-side distance (`L2` or `d2'`).
    pub fn refocused_for(&self, n_degenerate: u32) -> Result<Self> {
        let src = self.src.with_n(n_degenerate);
        Ok(Self {
            geom: self.geom.focused(&src, self.cfg)?,
            src,
            ..*self
        })
    }
}

/// `d1 + (N lambda2 / lambda1) d2`, the distance in the object-plane quadratic phase.
fn object_phase_distance(geom: &ImagingGeometry, src: &SourceSpec) -> f64 {
    geom.d1 + src.n() * src.lambda2 / src.lambda1 * geom.d2
}

/// Phase carried by an object point at `rho_o` when the degenerate photons are
/// detected at `positions` (one per photon).
pub fn object_phase_cfg_i(geom: &ImagingGeometry, src: &SourceSpec, rho_o: Vec2, positions: &[Vec2]) -> f64 {
    let k1 = src.k1();
    let quad = 0.5 * src.n() * k1 * (1.0 / geom.l1 + 1.0 / object_phase_distance(geom, src));
    let sum = positions.iter().fold(Vec2::ZERO, |acc, p| acc + *p);
    quad * rho_o.norm_sqr() - k1 * rho_o.dot(sum) / geom.l1
}

/// Relative phase of the second scatterer for per-photon detection positions.
pub fn phase_n(geom: &ImagingGeometry, src: &SourceSpec, a: Vec2, positions: &[Vec2]) -> f64 {
    object_phase_cfg_i(geom, src, a, positions)
}

/// `(2 pi R / lambda2) |rho2 / L2 + rho_o / D|`.
pub fn psf_argument_cfg_i(geom: &ImagingGeometry, src: &SourceSpec, rho_o: Vec2, rho2: Vec2) -> f64 {
    let d = effective_object_distance(geom, src, Configuration::ObjectInDegenerateArm);
    src.k2() * geom.aperture_radius * (rho2 * (1.0 / geom.l2) + rho_o * (1.0 / d)).norm()
}

/// `(2 pi R / lambda2) |rho_o / d2' + rho1 / D|`.
pub fn psf_argument_cfg_ii(geom: &ImagingGeometry, src: &SourceSpec, rho_o: Vec2, rho1: Vec2) -> f64 {
    let d = effective_object_distance(geom, src, Configuration::ObjectInAncillaArm);
    let d2p = geom.d2_prime.unwrap_or(f64::NAN);
    src.k2() * geom.aperture_radius * (rho_o * (1.0 / d2p) + rho1 * (1.0 / d)).norm()
}

fn same_positions(src: &SourceSpec, rho1: Vec2) -> Vec<Vec2> {
    vec![rho1; src.n_degenerate as usize]
}

fn two_point_terms(
    geom: &ImagingGeometry,
    src: &SourceSpec,
    obj: &TwoPointObject,
    positions: &[Vec2],
    rho2: Vec2,
) -> (Complex64, Complex64) {
    let n = src.n_degenerate;
    let t0 = obj.amp_origin.powu(n) * somb_unchecked(psf_argument_cfg_i(geom, src, Vec2::ZERO, rho2));
    let phase = phase_n(geom, src, obj.separation, positions);
    let ta = Complex64::from_polar(1.0, phase)
        * obj.amp_a.powu(n)
        * somb_unchecked(psf_argument_cfg_i(geom, src, obj.separation, rho2));
    (t0, ta)
}

/// Coherent two-point amplitude at `rho2` for a point N-photon detector at `rho1`
/// (degenerate-arm configuration, `B0 = 1`).
pub fn amplitude_two_point_cfg_i(
    geom: &ImagingGeometry,
    src: &SourceSpec,
    obj: &TwoPointObject,
    rho1: Vec2,
    rho2: Vec2,
) -> Result<Complex64> {
    amplitude_two_point_cfg_i_at(geom, src, obj, &same_positions(src, rho1), rho2)
}

/// As [`amplitude_two_point_cfg_i`] with one detection position per degenerate photon.
pub fn amplitude_two_point_cfg_i_at(
    geom: &ImagingGeometry,
    src: &SourceSpec,
    obj: &TwoPointObject,
    positions: &[Vec2],
    rho2: Vec2,
) -> Result<Complex64> {
    check_thin_lens(geom, src, Configuration::ObjectInDegenerateArm)?;
    if positions.len() != src.n_degenerate as usize {
        return Err(Error::param("positions", "need exactly one detection position per degenerate photon"));
    }
    let (t0, ta) = two_point_terms(geom, src, obj, positions, rho2);
    Ok(t0 + ta)
}

/// Bucket-detector intensity: `s_b^2 (|A0|^2N somb^2 + |Aa|^2N somb^2)`, with no
/// interference term.
pub fn intensity_bucket_cfg_i(
    geom: &ImagingGeometry,
    src: &SourceSpec,
    obj: &TwoPointObject,
    bucket: &Rect,
    rho2: Vec2,
) -> Result<f64> {
    check_thin_lens(geom, src, Configuration::ObjectInDegenerateArm)?;
    let sb = bucket.area();
    let (t0, ta) = two_point_terms(geom, src, obj, &same_positions(src, Vec2::ZERO), rho2);
    Ok(sb * sb * (t0.norm_sqr() + ta.norm_sqr()))
}

/// `|B|^2 - (|B_0|^2 + |B_a|^2)` for a point detector at `rho1`:
/// `2 Re[B_0 conj(B_a)]`.
pub fn interference_term_cfg_i(
    geom: &ImagingGeometry,
    src: &SourceSpec,
    obj: &TwoPointObject,
    rho1: Vec2,
    rho2: Vec2,
) -> Result<f64> {
    check_thin_lens(geom, src, Configuration::ObjectInDegenerateArm)?;
    let (t0, ta) = two_point_terms(geom, src, obj, &same_positions(src, rho1), rho2);
    Ok(2.0 * (t0 * ta.conj()).re)
}

/// Phase of an object point in the ancilla-arm configuration with D2 at `rho2`.
fn object_phase_cfg_ii(geom: &ImagingGeometry, src: &SourceSpec, rho_o: Vec2, rho2: Vec2) -> f64 {
    let k2 = src.k2();
    let d2p = geom.d2_prime.unwrap_or(f64::NAN);
    k2 * (0.5 * rho_o.norm_sqr() * (1.0 / geom.l2 + 1.0 / d2p) - rho2.dot(rho_o) / geom.l2)
}

/// Two-point amplitude in the D1 plane for the ancilla-arm configuration, with
/// D1 at `rho1` and D2 at `rho2`. The object amplitudes enter linearly since
/// only the ancilla photon meets the object.
pub fn amplitude_two_point_cfg_ii(
    geom: &ImagingGeometry,
    src: &SourceSpec,
    obj: &TwoPointObject,
    rho1: Vec2,
    rho2: Vec2,
) -> Result<Complex64> {
    check_thin_lens(geom, src, Configuration::ObjectInAncillaArm)?;
    let t0 = obj.amp_origin * somb_unchecked(psf_argument_cfg_ii(geom, src, Vec2::ZERO, rho1));
    let phase = object_phase_cfg_ii(geom, src, obj.separation, rho2);
    let ta = Complex64::from_polar(1.0, phase)
        * obj.amp_a
        * somb_unchecked(psf_argument_cfg_ii(geom, src, obj.separation, rho1));
    Ok(t0 + ta)
}

/// Rayleigh limit in the object plane: `0.61 (lambda2/R) D` for the degenerate-arm
/// configuration and `0.61 d2' lambda2 / R` for the ancilla-arm one.
pub fn rayleigh_min_separation(geom: &ImagingGeometry, src: &SourceSpec, cfg: Configuration) -> f64 {
    let span = match cfg {
        Configuration::ObjectInDegenerateArm => effective_object_distance(geom, src, cfg),
        Configuration::ObjectInAncillaArm => geom.image_distance(cfg),
    };
    rayleigh_factor() * src.lambda2 * span / geom.aperture_radius
}

/// Checks that `grid` samples the image plane at least
/// [`SAMPLES_PER_AIRY_RADIUS`] times per Airy radius.
pub fn check_image_sampling(scene: &Scene, grid: &GridSpec) -> Result<()> {
    grid.validate()?;
    if grid.len() < 2 {
        return Ok(());
    }
    let limit = scene.airy_radius() / SAMPLES_PER_AIRY_RADIUS;
    if grid.pitch > limit * (1.0 + 1e-12) {
        return Err(Error::Sampling(format!(
            "grid pitch {:.6e} m exceeds Airy radius / {} = {:.6e} m",
            grid.pitch, SAMPLES_PER_AIRY_RADIUS, limit
        )));
    }
    Ok(())
}

/// Unnormalised coherent amplitude of one scatterer set at image coordinate `rho`.
fn coherent_sum(scene: &Scene, scatterers: &[(Vec2, Complex64, f64)], positions: &[Vec2], rho: Vec2) -> Complex64 {
    let (geom, src) = (&scene.geom, &scene.src);
    match scene.cfg {
        Configuration::ObjectInDegenerateArm => scatterers
            .iter()
            .map(|&(p, a, w)| {
                let phase = object_phase_cfg_i(geom, src, p, positions);
                a.powu(src.n_degenerate) * w * Complex64::from_polar(1.0, phase)
                    * somb_unchecked(psf_argument_cfg_i(geom, src, p, rho))
            })
            .sum(),
        Configuration::ObjectInAncillaArm => scatterers
            .iter()
            .map(|&(p, a, w)| {
                let phase = object_phase_cfg_ii(geom, src, p, scene.ancilla_position);
                a * w * Complex64::from_polar(1.0, phase) * somb_unchecked(psf_argument_cfg_ii(geom, src, p, rho))
            })
            .sum(),
    }
}

fn incoherent_sum(scene: &Scene, scatterers: &[(Vec2, Complex64, f64)], rho: Vec2) -> f64 {
    let (geom, src) = (&scene.geom, &scene.src);
    scatterers
        .iter()
        .map(|&(p, a, w)| {
            let s = somb_unchecked(psf_argument_cfg_i(geom, src, p, rho));
            (a.powu(src.n_degenerate) * w).norm_sqr() * s * s
        })
        .sum()
}

/// Samples the image over `grid`: the coherent amplitude for a point detector, or
/// the incoherent intensity (normalised by `s_b^2`, recorded in `scale`) for a
/// bucket detector. The grid lies in D2 for the degenerate-arm configuration and
/// in D1 for the ancilla-arm one.
pub fn image_field_grid(scene: &Scene, obj: &ObjectModel, grid: &GridSpec) -> Result<ImageField> {
    scene.validate()?;
    check_thin_lens(&scene.geom, &scene.src, scene.cfg)?;
    check_image_sampling(scene, grid)?;
    if let ObjectModel::Sampled(o) = obj {
        o.validate()?;
    }
    let scatterers = obj.scatterers();
    let plane = scene.image_plane();
    match scene.detection {
        DetectionScheme::PointNPhoton { position } => {
            let positions = same_positions(&scene.src, position);
            let values: Vec<Complex64> = (0..grid.len())
                .into_par_iter()
                .map(|i| coherent_sum(scene, &scatterers, &positions, grid.point(i)))
                .collect();
            Ok(ImageField::Amplitude(ComplexField {
                grid: *grid,
                plane,
                values,
                scale: 1.0,
            }))
        }
        DetectionScheme::Bucket { extent } => {
            let values: Vec<f64> = (0..grid.len())
                .into_par_iter()
                .map(|i| incoherent_sum(scene, &scatterers, grid.point(i)))
                .collect();
            let sb = extent.area();
            Ok(ImageField::Intensity(RealField {
                grid: *grid,
                plane,
                values,
                scale: sb * sb,
            }))
        }
    }
}
