//! Direct quadrature of the propagation integrals, used as an independent check
//! of the closed forms in [`crate::analytic`].
//!
//! The lens aperture is integrated on a polar product rule (Gauss-Legendre in
//! radius, trapezoid in angle), objects by the midpoint rule on their pixel grid.
//! The transverse-mode integral is either replaced by its Fresnel closed form or
//! summed numerically along the steepest-descent line through its stationary
//! point.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{check_image_sampling, DetectionScheme, Scene};
use crate::error::{Error, Result};
use crate::field::{ComplexField, GridSpec, ImageField, RealField, Vec2};
use crate::object::{Dimensionality, ObjectModel, SampledObject};
use crate::optics::{effective_object_distance, Configuration, ImagingGeometry, SourceSpec};

/// Largest relative change allowed between a result and its refined recomputation.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-3;

const MIN_LENS_SAMPLES: usize = 16;

/// Treatment of the transverse-mode integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaMode {
    AnalyticFresnel,
    /// Trapezoid rule with `samples` nodes over `|t| <= cutoff` (1/m) along the
    /// steepest-descent line, per transverse axis.
    NumericGrid { cutoff: f64, samples: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Radial Gauss-Legendre nodes on the lens disk before phase-dependent padding.
    /// The angular rule uses twice as many.
    pub lens_samples: usize,
    /// Midpoint sub-samples per object pixel and axis.
    pub object_subsamples: usize,
    pub alpha_mode: AlphaMode,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            lens_samples: 24,
            object_subsamples: 2,
            alpha_mode: AlphaMode::AnalyticFresnel,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lens_samples < MIN_LENS_SAMPLES {
            return Err(Error::param("lens_samples", format!("must be >= {MIN_LENS_SAMPLES}")));
        }
        if self.object_subsamples < 1 {
            return Err(Error::param("object_subsamples", "must be >= 1"));
        }
        if let AlphaMode::NumericGrid { cutoff, samples } = self.alpha_mode {
            if !(cutoff.is_finite() && cutoff > 0.0) {
                return Err(Error::param("alpha_mode.cutoff", "must be finite and > 0"));
            }
            if samples < MIN_LENS_SAMPLES {
                return Err(Error::param("alpha_mode.samples", format!("must be >= {MIN_LENS_SAMPLES}")));
            }
        }
        Ok(())
    }

    /// Every sample count doubled.
    pub fn refined(&self) -> Self {
        Self {
            lens_samples: 2 * self.lens_samples,
            object_subsamples: 2 * self.object_subsamples,
            alpha_mode: match self.alpha_mode {
                AlphaMode::NumericGrid { cutoff, samples } => AlphaMode::NumericGrid {
                    cutoff,
                    samples: 2 * samples,
                },
                m => m,
            },
        }
    }

    /// Numeric transverse-mode integration whose cutoff leaves `exp(-40)` of the
    /// Gaussian tail, for the given scene.
    pub fn with_numeric_alpha(self, scene: &Scene, samples: usize) -> Self {
        let beta = alpha_beta(&scene.src, scene.effective_distance());
        Self {
            alpha_mode: AlphaMode::NumericGrid {
                cutoff: (40.0 / beta).sqrt(),
                samples,
            },
            ..self
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            dp = nf * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `int_{|rho| <= radius} f(rho) d^2 rho` on a polar product rule.
fn integrate_disk(radius: f64, radial: usize, angular: usize, f: impl Fn(Vec2) -> Complex64) -> Complex64 {
    let (nodes, weights) = gauss_legendre(radial);
    let dtheta = 2.0 * PI / angular as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for (x, w) in nodes.iter().zip(&weights) {
        let r = 0.5 * radius * (x + 1.0);
        let wr = 0.5 * radius * w * r * dtheta;
        let mut ring = Complex64::new(0.0, 0.0);
        for j in 0..angular {
            let (s, c) = (j as f64 * dtheta).sin_cos();
            ring += f(Vec2::new(r * c, r * s));
        }
        total += ring * wr;
    }
    total
}

/// Node counts for an integrand whose phase varies by about `span` radians
/// across the disk.
fn disk_nodes(base: usize, span: f64) -> (usize, usize) {
    let pad = span.abs().ceil() as usize;
    (base + pad, 2 * base + 2 * pad)
}

/// `int_{|rho| <= radius} exp(-i q . rho) d^2 rho` for `|q| = q`, which equals
/// `pi R^2 somb(q R)`.
pub fn disk_integral(q: f64, radius: f64) -> Complex64 {
    let (radial, angular) = disk_nodes(24, q * radius);
    integrate_disk(radius, radial, angular, |p| Complex64::from_polar(1.0, -q * p.x))
}

/// `N^2 D / (2 K2)`: coefficient of `-i |alpha|^2` in the transverse-mode integral.
fn alpha_beta(src: &SourceSpec, distance: f64) -> f64 {
    src.n() * src.n() * distance / (2.0 * src.k2())
}

/// The transverse-mode integral `int d^2 alpha exp(-i beta |alpha|^2 - i N alpha . delta)`
/// divided by `pi / (i beta)`, so that it reduces to `exp(i K2 |delta|^2 / 2D)`.
#[derive(Debug, Clone, Copy)]
struct AlphaKernel {
    beta: f64,
    n: f64,
    half_k_over_d: f64,
    mode: AlphaMode,
}

impl AlphaKernel {
    fn new(src: &SourceSpec, distance: f64, mode: AlphaMode) -> Result<Self> {
        let beta = alpha_beta(src, distance);
        if let AlphaMode::NumericGrid { cutoff, .. } = mode {
            if beta * cutoff * cutoff < 30.0 {
                return Err(Error::Convergence(format!(
                    "alpha cutoff {cutoff:.3e} 1/m truncates the transverse-mode integral (beta * cutoff^2 = {:.2})",
                    beta * cutoff * cutoff
                )));
            }
        }
        Ok(Self {
            beta,
            n: src.n(),
            half_k_over_d: 0.5 * src.k2() / distance,
            mode,
        })
    }

    fn line(&self, d: f64, cutoff: f64, samples: usize) -> Complex64 {
        let dir = Complex64::from_polar(1.0, -FRAC_PI_4);
        let center = -self.n * d / (2.0 * self.beta);
        let h = 2.0 * cutoff / (samples - 1) as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..samples {
            let alpha = center + dir * (-cutoff + j as f64 * h);
            let v = (Complex64::new(0.0, -self.beta) * alpha * alpha - Complex64::new(0.0, self.n * d) * alpha).exp();
            acc += if j == 0 || j + 1 == samples { 0.5 * v } else { v };
        }
        acc * dir * h
    }

    fn eval(&self, delta: Vec2) -> Complex64 {
        match self.mode {
            AlphaMode::AnalyticFresnel => Complex64::from_polar(1.0, self.half_k_over_d * delta.norm_sqr()),
            AlphaMode::NumericGrid { cutoff, samples } => {
                let norm = Complex64::new(0.0, -PI / self.beta);
                self.line(delta.x, cutoff, samples) * self.line(delta.y, cutoff, samples) / norm
            }
        }
    }
}

/// Lens-plane integral `int_disk exp(i a |rho|^2 - i b . rho) G(rho - s) d^2 rho / (pi R^2)`.
#[derive(Debug, Clone, Copy)]
struct LensIntegral {
    radius: f64,
    quad: f64,
    kernel: AlphaKernel,
}

impl LensIntegral {
    fn eval(&self, b: Vec2, s: Vec2, base: usize) -> Complex64 {
        let net_quad = self.quad + self.kernel.half_k_over_d;
        let net_lin = b + s * (2.0 * self.kernel.half_k_over_d);
        let span = net_quad.abs() * self.radius * self.radius + net_lin.norm() * self.radius;
        let (radial, angular) = disk_nodes(base, span);
        let v = integrate_disk(self.radius, radial, angular, |p| {
            Complex64::from_polar(1.0, self.quad * p.norm_sqr() - b.dot(p)) * self.kernel.eval(p - s)
        });
        v / (PI * self.radius * self.radius)
    }
}

/// Setup shared by all evaluations of one scene.
struct Propagator {
    scene: Scene,
    lens: LensIntegral,
    base: usize,
}

impl Propagator {
    fn new(scene: &Scene, quad: &QuadratureSpec) -> Result<Self> {
        let (g, s) = (&scene.geom, &scene.src);
        let k2 = s.k2();
        let distance = effective_object_distance(g, s, scene.cfg);
        let quad_coeff = 0.5 * k2 * (1.0 / g.image_distance(scene.cfg) - 1.0 / g.focal_length);
        Ok(Self {
            scene: *scene,
            lens: LensIntegral {
                radius: g.aperture_radius,
                quad: quad_coeff,
                kernel: AlphaKernel::new(s, distance, quad.alpha_mode)?,
            },
            base: quad.lens_samples,
        })
    }

    /// Normalised amplitude contributed by a unit scatterer at `rho_o`, observed
    /// at image coordinate `rho` (D2 plane, or D1 plane for the ancilla-arm
    /// configuration), with D1 at `rho1` in the degenerate-arm case.
    fn point(&self, rho_o: Vec2, rho1: Vec2, rho: Vec2) -> Complex64 {
        let (g, s) = (&self.scene.geom, &self.scene.src);
        let k2 = s.k2();
        match self.scene.cfg {
            Configuration::ObjectInDegenerateArm => {
                let k1 = s.k1();
                let n = s.n();
                let obj_phase = n * k1 * (0.5 * rho_o.norm_sqr() - rho1.dot(rho_o)) / g.l1;
                Complex64::from_polar(1.0, obj_phase) * self.lens.eval(rho * (k2 / g.l2), rho_o, self.base)
            }
            Configuration::ObjectInAncillaArm => {
                let d2p = g.d2_prime.unwrap_or(f64::NAN);
                let rho2 = self.scene.ancilla_position;
                let obj_phase = k2 * (0.5 * rho_o.norm_sqr() * (1.0 / g.l2 + 1.0 / d2p) - rho2.dot(rho_o) / g.l2);
                // drop the rho-only factor exp(i K2 |rho|^2 / 2D) that the closed form omits
                let strip = -self.lens.kernel.half_k_over_d * rho.norm_sqr();
                Complex64::from_polar(1.0, obj_phase + strip) * self.lens.eval(rho_o * (k2 / d2p), rho, self.base)
            }
        }
    }

    /// Object amplitude power: `N` when the degenerate photons meet the object.
    fn power(&self) -> u32 {
        match self.scene.cfg {
            Configuration::ObjectInDegenerateArm => self.scene.src.n_degenerate,
            Configuration::ObjectInAncillaArm => 1,
        }
    }

    fn terms(&self, scatterers: &[(Vec2, Complex64, f64)], rho1: Vec2, rho: Vec2) -> Vec<Complex64> {
        let p = self.power();
        scatterers
            .iter()
            .map(|&(pos, a, w)| a.powu(p) * w * self.point(pos, rho1, rho))
            .collect()
    }
}

fn sampled_scatterers(obj: &ObjectModel, subsamples: usize) -> Vec<(Vec2, Complex64, f64)> {
    match obj {
        ObjectModel::TwoPoint(_) => obj.scatterers(),
        ObjectModel::Sampled(o) => ObjectModel::Sampled(o.subdivided(subsamples)).scatterers(),
    }
}

/// Rejects object sampling whose midpoint rule would alias the quadratic and
/// linear object-plane phases.
fn check_object_sampling(scene: &Scene, obj: &ObjectModel, subsamples: usize, rho1: Vec2, rho: Vec2) -> Result<()> {
    let ObjectModel::Sampled(o) = obj else { return Ok(()) };
    let (g, s) = (&scene.geom, &scene.src);
    let k2 = s.k2();
    let d = effective_object_distance(g, s, scene.cfg);
    let step = o.pixel_pitch / subsamples as f64;
    let half = Vec2::new(0.5 * o.width(), 0.5 * o.ny as f64 * o.pixel_pitch);
    let mut worst: f64 = 0.0;
    for corner in [half, Vec2::new(-half.x, half.y), Vec2::new(half.x, -half.y), -half] {
        let grad = match scene.cfg {
            Configuration::ObjectInDegenerateArm => {
                (corner - rho1) * (s.n() * s.k1() / g.l1) + corner * (k2 / d) + rho * (k2 / g.l2)
            }
            Configuration::ObjectInAncillaArm => {
                let d2p = g.d2_prime.unwrap_or(f64::NAN);
                corner * (k2 * (1.0 / g.l2 + 1.0 / d2p)) - scene.ancilla_position * (k2 / g.l2)
            }
        };
        worst = worst.max(grad.x.abs().max(if o.dimensionality == Dimensionality::Full2D { grad.y.abs() } else { 0.0 }));
    }
    if worst * step > PI {
        return Err(Error::Sampling(format!(
            "object phase advances {:.3} rad per sub-pixel (limit pi); use finer pixels or more sub-samples",
            worst * step
        )));
    }
    Ok(())
}

fn converged(coarse: Complex64, fine: Complex64, scale: f64) -> Result<Complex64> {
    let change = (fine - coarse).norm();
    if change > CONVERGENCE_TOLERANCE * scale {
        return Err(Error::Convergence(format!(
            "refinement changed the amplitude by {:.3e} relative (limit {CONVERGENCE_TOLERANCE:e})",
            change / scale
        )));
    }
    Ok(fine)
}

fn amplitude_scale(scatterers: &[(Vec2, Complex64, f64)], power: u32) -> f64 {
    scatterers.iter().map(|&(_, a, w)| a.norm().powi(power as i32) * w).sum::<f64>().max(f64::MIN_POSITIVE)
}

fn point_detector(scene: &Scene) -> Result<Vec2> {
    match scene.detection {
        DetectionScheme::PointNPhoton { position } => Ok(position),
        DetectionScheme::Bucket { .. } => Err(Error::Detection(
            "a coherent amplitude needs a point N-photon detector".into(),
        )),
    }
}

/// Same-point (collapsed) amplitude at image coordinate `rho` by direct
/// quadrature over object, lens and transverse mode, normalised like the closed
/// form (`B0 = 1`). The result is recomputed with every sample count doubled and
/// rejected if the two differ by more than [`CONVERGENCE_TOLERANCE`].
pub fn amplitude_samepoint_numeric(scene: &Scene, obj: &ObjectModel, rho: Vec2, quad: &QuadratureSpec) -> Result<Complex64> {
    scene.validate()?;
    quad.validate()?;
    let rho1 = point_detector(scene)?;
    let fine_quad = quad.refined();
    check_object_sampling(scene, obj, quad.object_subsamples, rho1, rho)?;
    let coarse_p = Propagator::new(scene, quad)?;
    let fine_p = Propagator::new(scene, &fine_quad)?;
    let sc = sampled_scatterers(obj, quad.object_subsamples);
    let sf = sampled_scatterers(obj, fine_quad.object_subsamples);
    let coarse: Complex64 = coarse_p.terms(&sc, rho1, rho).iter().sum();
    let fine: Complex64 = fine_p.terms(&sf, rho1, rho).iter().sum();
    converged(coarse, fine, amplitude_scale(&sf, coarse_p.power()))
}

/// Bucket-detector intensity by quadrature, normalised by `s_b^2`: the
/// incoherent sum of the per-scatterer numeric amplitudes.
pub fn intensity_bucket_numeric(scene: &Scene, obj: &ObjectModel, rho2: Vec2, quad: &QuadratureSpec) -> Result<f64> {
    scene.validate()?;
    quad.validate()?;
    if !matches!(scene.detection, DetectionScheme::Bucket { .. }) {
        return Err(Error::Detection("bucket intensity needs a bucket detector".into()));
    }
    let fine_quad = quad.refined();
    check_object_sampling(scene, obj, quad.object_subsamples, Vec2::ZERO, rho2)?;
    let eval = |q: &QuadratureSpec| -> Result<(f64, f64)> {
        let p = Propagator::new(scene, q)?;
        let s = sampled_scatterers(obj, q.object_subsamples);
        let t = p.terms(&s, Vec2::ZERO, rho2);
        let scale: f64 = s.iter().map(|&(_, a, w)| (a.powu(p.power()) * w).norm_sqr()).sum();
        Ok((t.iter().map(|v| v.norm_sqr()).sum(), scale.max(f64::MIN_POSITIVE)))
    };
    let (coarse, _) = eval(quad)?;
    let (fine, scale) = eval(&fine_quad)?;
    converged(Complex64::new(coarse, 0.0), Complex64::new(fine, 0.0), scale).map(|v| v.re)
}

/// Numeric counterpart of [`crate::analytic::image_field_grid`].
pub fn image_field_numeric(scene: &Scene, obj: &ObjectModel, grid: &GridSpec, quad: &QuadratureSpec) -> Result<ImageField> {
    scene.validate()?;
    check_image_sampling(scene, grid)?;
    let plane = scene.image_plane();
    match scene.detection {
        DetectionScheme::PointNPhoton { .. } => {
            let values = (0..grid.len())
                .into_par_iter()
                .map(|i| amplitude_samepoint_numeric(scene, obj, grid.point(i), quad))
                .collect::<Result<Vec<_>>>()?;
            Ok(ImageField::Amplitude(ComplexField {
                grid: *grid,
                plane,
                values,
                scale: 1.0,
            }))
        }
        DetectionScheme::Bucket { extent } => {
            let values = (0..grid.len())
                .into_par_iter()
                .map(|i| intensity_bucket_numeric(scene, obj, grid.point(i), quad))
                .collect::<Result<Vec<_>>>()?;
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

/// Object-arm kernel `exp(-i d1 |alpha|^2 / 2 K1) sum_o A exp(i K1 |rho_o|^2 / 2 L1)
/// exp(-i K1 rho1 . rho_o / L1) exp(i alpha . rho_o)` by the midpoint rule over the
/// object pixels.
pub fn chi1(alpha: Vec2, geom: &ImagingGeometry, src: &SourceSpec, obj: &SampledObject, rho1: Vec2) -> Result<Complex64> {
    obj.validate()?;
    let k1 = src.k1();
    let mut worst: f64 = 0.0;
    let mut acc = Complex64::new(0.0, 0.0);
    for (p, a) in obj.support() {
        let grad = alpha + (p - rho1) * (k1 / geom.l1);
        worst = worst.max(match obj.dimensionality {
            Dimensionality::Slit1D => grad.x.abs(),
            Dimensionality::Full2D => grad.x.abs().max(grad.y.abs()),
        });
        let phase = 0.5 * k1 * p.norm_sqr() / geom.l1 - k1 * rho1.dot(p) / geom.l1 + alpha.dot(p);
        acc += a * Complex64::from_polar(1.0, phase);
    }
    if worst * obj.pixel_pitch > PI {
        return Err(Error::Sampling(format!(
            "object-plane phase advances {:.3} rad per pixel (limit pi)",
            worst * obj.pixel_pitch
        )));
    }
    let front = Complex64::from_polar(1.0, -geom.d1 * alpha.norm_sqr() / (2.0 * k1));
    Ok(front * acc * obj.pixel_weight())
}

/// Lens-arm kernel `exp(-i d2 |alpha|^2 / 2 K2) int_{|rho_l| <= R} exp(i K2 |rho_l|^2
/// (1/L2 - 1/f) / 2) exp(i (alpha - K2 rho2 / L2) . rho_l) d^2 rho_l`.
pub fn chi2(alpha: Vec2, geom: &ImagingGeometry, src: &SourceSpec, rho2: Vec2, lens_samples: usize) -> Result<Complex64> {
    if lens_samples < MIN_LENS_SAMPLES {
        return Err(Error::param("lens_samples", format!("must be >= {MIN_LENS_SAMPLES}")));
    }
    let k2 = src.k2();
    let r = geom.aperture_radius;
    let quad = 0.5 * k2 * (1.0 / geom.l2 - 1.0 / geom.focal_length);
    let lin = alpha - rho2 * (k2 / geom.l2);
    let (radial, angular) = disk_nodes(lens_samples, quad.abs() * r * r + lin.norm() * r);
    let v = integrate_disk(r, radial, angular, |p| Complex64::from_polar(1.0, quad * p.norm_sqr() + lin.dot(p)));
    Ok(Complex64::from_polar(1.0, -geom.d2 * alpha.norm_sqr() / (2.0 * k2)) * v)
}

/// Un-collapsed `|1,2>` amplitude for a slit object: the double object integral
/// with D1 photons at `rho1_pair`, evaluated at `rho2` and reported per unit pixel
/// weight, so that a single-pixel object gives the collapsed amplitude.
pub fn amplitude_full_n2(
    geom: &ImagingGeometry,
    src: &SourceSpec,
    obj: &SampledObject,
    rho1_pair: [Vec2; 2],
    rho2: Vec2,
    quad: &QuadratureSpec,
) -> Result<Complex64> {
    if src.n_degenerate != 2 {
        return Err(Error::Unsupported("the un-collapsed amplitude is implemented for N = 2 only".into()));
    }
    if obj.dimensionality != Dimensionality::Slit1D {
        return Err(Error::Unsupported(
            "the un-collapsed double object integral is limited to slit objects".into(),
        ));
    }
    obj.validate()?;
    quad.validate()?;
    let scene = Scene::new(
        *geom,
        *src,
        Configuration::ObjectInDegenerateArm,
        DetectionScheme::PointNPhoton { position: rho1_pair[0] },
    )?;
    let eval = |q: &QuadratureSpec| -> Result<(Complex64, f64)> {
        let p = Propagator::new(&scene, q)?;
        let o = obj.subdivided(q.object_subsamples);
        let k1 = src.k1();
        let n = o.len();
        let w = o.pixel_weight();
        let arm = |j: usize| -> Vec<Complex64> {
            (0..n)
                .map(|i| {
                    let x = o.position(i);
                    let phase = k1 * (0.5 * x.norm_sqr() - rho1_pair[j].dot(x)) / geom.l1;
                    o.values[i] * w * Complex64::from_polar(1.0, phase)
                })
                .collect()
        };
        let (u, v) = (arm(0), arm(1));
        // the lens integral depends only on the midpoint (x_i + x_j) / 2
        let lens: Vec<Complex64> = (0..2 * n - 1)
            .map(|k| {
                let mid = (o.position(k / 2) + o.position(k - k / 2)) * 0.5;
                p.lens.eval(rho2 * (src.k2() / geom.l2), mid, p.base)
            })
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, ui) in u.iter().enumerate() {
            if ui.norm_sqr() == 0.0 {
                continue;
            }
            for (j, vj) in v.iter().enumerate() {
                acc += ui * vj * lens[i + j];
            }
        }
        let scale: f64 = u.iter().map(|z| z.norm()).sum::<f64>() * v.iter().map(|z| z.norm()).sum::<f64>();
        Ok((acc / obj.pixel_weight(), scale / obj.pixel_weight()))
    };
    let (coarse, _) = eval(quad)?;
    let (fine, scale) = eval(&quad.refined())?;
    converged(coarse, fine, scale.max(f64::MIN_POSITIVE))
}
