//! Objects with random, delta-correlated transmission phases seen through a
//! bucket N-photon detector.
//!
//! Each slit pixel carries a circular complex Gaussian factor `g` with
//! `E|g|^2 = 1`, so ensemble moments follow the permutation (Wick) expansion:
//! `E[|B|^2]` is a sum over the `N!` ways of pairing the photons of `B` with
//! those of `B*`. The image is the incoherent point-image part: the full-cycle
//! pairings over all tuples plus every pairing of tuples whose photons all pass
//! one pixel. The identity pairing and the partial exchanges of the remaining
//! tuples form the slowly varying floor, whose maximum is `C`.
//!
//! Intensities are reported per unit `s_b^N` and use the pixel-scale delta
//! correlation `E[g_i g_j*] = delta_ij / h`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, Rect, Vec2};
use crate::object::{Dimensionality, SampledObject};
use crate::optics::{check_thin_lens, effective_object_distance, Configuration, ImagingGeometry, SourceSpec};
use crate::special::somb_unchecked;

/// Relative standard error of the image peak above which a report carries a
/// precision warning.
pub const PRECISION_WARNING_LEVEL: f64 = 0.1;

/// Below this many realizations the standard errors themselves are unreliable.
pub const MIN_RELIABLE_REALIZATIONS: usize = 30;

/// Largest `n` accepted by [`permutation_sum_terms`].
pub const MAX_PERMUTATION_ORDER: usize = 8;

/// Random transmission factor per object pixel: `g = modulus * exp(i phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseScreen {
    /// Phases in `[0, 2 pi)`.
    pub phases: Vec<f64>,
    /// Rayleigh-distributed moduli with `E[modulus^2] = 1`.
    pub moduli: Vec<f64>,
}

impl PhaseScreen {
    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn factors(&self) -> Vec<Complex64> {
        self.phases
            .iter()
            .zip(&self.moduli)
            .map(|(p, m)| Complex64::from_polar(*m, *p))
            .collect()
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Screen for realization `stream` of the ensemble seeded with `seed`.
pub fn sample_phase_screen_stream(obj: &SampledObject, seed: u64, stream: u64) -> PhaseScreen {
    let mut rng = stream_rng(seed, stream);
    let n = obj.len();
    let mut phases = Vec::with_capacity(n);
    let mut moduli = Vec::with_capacity(n);
    for _ in 0..n {
        let p = rng.random::<f64>() * TAU;
        phases.push(if p >= TAU { 0.0 } else { p });
        let e: f64 = rng.sample(Exp1);
        moduli.push(e.sqrt());
    }
    PhaseScreen { phases, moduli }
}

/// One independent factor per pixel, reproducible from `seed`.
pub fn sample_phase_screen(obj: &SampledObject, seed: u64) -> PhaseScreen {
    sample_phase_screen_stream(obj, seed, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub realizations: usize,
    pub rng_seed: u64,
    pub bucket: Rect,
    /// Detector positions per photon across the bucket width.
    pub detector_samples: usize,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.realizations < 2 {
            return Err(Error::param("realizations", "must be >= 2"));
        }
        if self.detector_samples < 4 {
            return Err(Error::param("detector_samples", "must be >= 4"));
        }
        Rect::new(self.bucket.center, self.bucket.width, self.bucket.height).map(|_| ())
    }
}

/// A named contribution to the image term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageComponent {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeckleReport {
    pub n_degenerate: u32,
    pub grid: GridSpec,
    /// Mean bucket intensity (image plus background field).
    pub mean_intensity: Vec<f64>,
    pub image_term: Vec<f64>,
    pub background_field: Vec<f64>,
    /// Background constant `C`: the maximum of the background field.
    pub background_term: f64,
    /// Standard errors of `image_term` (zero for closed-form reports).
    pub standard_errors: Vec<f64>,
    pub background_standard_error: f64,
    pub visibility: f64,
    pub visibility_standard_error: f64,
    /// `L1 lambda1 / (2 pi s_b)`.
    pub fresnel_ratio: f64,
    /// Bucket speckle width over pixel pitch, `lambda1 L1 / (w h)`.
    pub speckle_pixels: f64,
    /// Upper bound `(int |A|^2)^N` on the background.
    pub background_bound: f64,
    pub realizations: usize,
    pub components: Vec<ImageComponent>,
    pub warnings: Vec<String>,
    /// Factor `s_b^N` divided out of every intensity.
    pub scale: f64,
}

/// Slit geometry shared by the Monte-Carlo and closed-form paths: for every
/// image point, the kernel `K_s` of the tuple whose pixel indices sum to `s`.
struct SlitKernel {
    n: usize,
    m: usize,
    h: f64,
    /// `kernel[g * len + s]`
    kernel: Vec<Complex64>,
    len: usize,
}

impl SlitKernel {
    fn new(geom: &ImagingGeometry, src: &SourceSpec, obj: &SampledObject, grid: &GridSpec) -> Result<Self> {
        let n = src.n_degenerate as usize;
        let m = obj.len();
        let h = obj.pixel_pitch;
        let len = n * (m - 1) + 1;
        let d = effective_object_distance(geom, src, Configuration::ObjectInDegenerateArm);
        let e = geom.d1 + src.n() * src.lambda2 / src.lambda1 * geom.d2;
        let (k1, k2) = (src.k1(), src.k2());
        let centre = 0.5 * (m - 1) as f64;
        let mut kernel = Vec::with_capacity(grid.len() * len);
        for rho2 in grid.points() {
            for s in 0..len {
                let plus = Vec2::new(h * (s as f64 / n as f64 - centre), 0.0);
                let arg = k2 * geom.aperture_radius * (rho2 * (1.0 / geom.l2) + plus * (1.0 / d)).norm();
                let phase = src.n() * k1 * plus.norm_sqr() / (2.0 * e);
                kernel.push(Complex64::from_polar(somb_unchecked(arg), phase));
            }
        }
        Ok(Self { n, m, h, kernel, len })
    }

    fn row(&self, g: usize) -> &[Complex64] {
        &self.kernel[g * self.len..(g + 1) * self.len]
    }

    /// Sum over ordered index tuples of `weight(tuple)`, binned by index sum.
    fn tuple_sums(&self, mut weight: impl FnMut(&[usize]) -> f64) -> Vec<f64> {
        self.tuple_sums_indexed(|_, idx| weight(idx))
    }

    /// As [`Self::tuple_sums`], also passing the tuple's position in iteration order.
    fn tuple_sums_indexed(&self, mut weight: impl FnMut(usize, &[usize]) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        let mut idx = vec![0usize; self.n];
        let mut flat = 0;
        loop {
            let w = weight(flat, &idx);
            flat += 1;
            if w != 0.0 {
                out[idx.iter().sum::<usize>()] += w;
            }
            let mut k = 0;
            loop {
                if k == self.n {
                    return out;
                }
                idx[k] += 1;
                if idx[k] < self.m {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    /// `sum_s bins_s |K_s(rho2)|^2` over the grid.
    fn project(&self, bins: &[f64], grid_len: usize) -> Vec<f64> {
        (0..grid_len)
            .map(|g| self.row(g).iter().zip(bins).map(|(k, b)| k.norm_sqr() * b).sum())
            .collect()
    }
}

fn all_distinct(idx: &[usize]) -> bool {
    (0..idx.len()).all(|a| (a + 1..idx.len()).all(|b| idx[a] != idx[b]))
}

fn all_equal(idx: &[usize]) -> bool {
    idx.iter().all(|&i| i == idx[0])
}

/// Number of permutations leaving the tuple unchanged, `prod_k mult_k!`.
fn stabilizer(idx: &[usize]) -> f64 {
    let mut sorted = idx.to_vec();
    sorted.sort_unstable();
    let mut out = 1.0;
    let mut run = 1.0;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1.0;
            out *= run;
        } else {
            run = 1.0;
        }
    }
    out
}

fn check_inputs(geom: &ImagingGeometry, src: &SourceSpec, obj: &SampledObject, bucket: &Rect, grid: &GridSpec) -> Result<()> {
    geom.validate(Configuration::ObjectInDegenerateArm)?;
    src.validate()?;
    obj.validate()?;
    grid.validate()?;
    Rect::new(bucket.center, bucket.width, bucket.height)?;
    if !(2..=3).contains(&src.n_degenerate) {
        return Err(Error::Unsupported(format!(
            "speckle statistics are implemented for N = 2 and N = 3, got N = {}",
            src.n_degenerate
        )));
    }
    if obj.dimensionality != Dimensionality::Slit1D {
        return Err(Error::Unsupported("speckle statistics are implemented for slit objects".into()));
    }
    check_thin_lens(geom, src, Configuration::ObjectInDegenerateArm)
}

fn fresnel_ratio(geom: &ImagingGeometry, src: &SourceSpec, bucket: &Rect) -> f64 {
    geom.l1 * src.lambda1 / (TAU * bucket.area())
}

fn background_bound(obj: &SampledObject, n: u32) -> f64 {
    let power: f64 = obj.values.iter().map(|a| a.norm_sqr()).sum::<f64>() * obj.pixel_pitch;
    power.powi(n as i32)
}

fn max_index(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, x)| if *x > best.1 { (i, *x) } else { best })
        .0
}

fn visibility_from(image_max: f64, background: f64) -> f64 {
    let denom = image_max + 2.0 * background;
    if denom <= 0.0 {
        return f64::NAN;
    }
    (image_max / denom).clamp(0.0, 1.0)
}

/// Closed-form image and background terms for a slit object under the bucket
/// detector. The exchange terms use the bucket's delta-function limit with
/// weight `lambda1 L1 / w` per exchanged photon pair; the identity terms are
/// exact. `components` lists every term; the image collects the full-cycle
/// terms and those ending in `coincident`.
pub fn analytic_speckle(
    geom: &ImagingGeometry,
    src: &SourceSpec,
    obj: &SampledObject,
    bucket: &Rect,
    grid: &GridSpec,
) -> Result<SpeckleReport> {
    check_inputs(geom, src, obj, bucket, grid)?;
    let kern = SlitKernel::new(geom, src, obj, grid)?;
    let (n, h) = (kern.n, kern.h);
    let coef = src.lambda1 * geom.l1 / bucket.width;
    let p: Vec<f64> = obj.values.iter().map(|a| a.norm_sqr()).collect();
    let hn = h.powi(n as i32);
    let prod = |idx: &[usize]| idx.iter().map(|&i| p[i]).product::<f64>();

    let project = |bins: &[f64]| kern.project(bins, grid.len());
    let coincident = kern.tuple_sums(|idx| if all_equal(idx) { hn * prod(idx) } else { 0.0 });
    let distinct = kern.tuple_sums(|idx| if all_distinct(idx) { hn * prod(idx) } else { 0.0 });
    let partial = kern.tuple_sums(|idx| if all_distinct(idx) || all_equal(idx) { 0.0 } else { hn * prod(idx) });
    // (name, in image, bins)
    let mut terms = vec![
        ("identity_distinct", false, distinct),
        ("identity_partial", false, partial),
        ("identity_coincident", true, coincident),
    ];
    match n {
        // the swap pairing forces both photons onto one pixel
        2 => terms.push((
            "exchange",
            true,
            kern.tuple_sums(|idx| if idx[0] == idx[1] { coef * h * p[idx[0]] * p[idx[0]] } else { 0.0 }),
        )),
        _ => {
            // three transpositions: two photons on one pixel, the third anywhere
            let t = |on: bool| {
                kern.tuple_sums(|idx| {
                    if idx[0] == idx[1] && (idx[1] == idx[2]) == on {
                        3.0 * coef * h * h * p[idx[0]] * p[idx[0]] * p[idx[2]]
                    } else {
                        0.0
                    }
                })
            };
            terms.push(("transpositions_partial", false, t(false)));
            terms.push(("transpositions_coincident", true, t(true)));
            // two three-cycles: all photons on one pixel
            terms.push((
                "three_cycles",
                true,
                kern.tuple_sums(|idx| if all_equal(idx) { 2.0 * coef * coef * h * p[idx[0]].powi(3) } else { 0.0 }),
            ));
        }
    }
    let components: Vec<ImageComponent> = terms
        .iter()
        .map(|(name, _, bins)| ImageComponent { name: (*name).into(), values: project(bins) })
        .collect();
    let sum_where = |keep: bool| -> Vec<f64> {
        (0..grid.len())
            .map(|g| terms.iter().zip(&components).filter(|(t, _)| t.1 == keep).map(|(_, c)| c.values[g]).sum())
            .collect()
    };
    let image_term = sum_where(true);
    let background_field = sum_where(false);
    let background_term = background_field.iter().cloned().fold(0.0, f64::max);
    let image_max = image_term.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(SpeckleReport {
        n_degenerate: src.n_degenerate,
        grid: *grid,
        mean_intensity: image_term.iter().zip(&background_field).map(|(a, b)| a + b).collect(),
        standard_errors: vec![0.0; grid.len()],
        image_term,
        background_field,
        background_term,
        background_standard_error: 0.0,
        visibility: visibility_from(image_max, background_term),
        visibility_standard_error: 0.0,
        fresnel_ratio: fresnel_ratio(geom, src, bucket),
        speckle_pixels: coef / h,
        background_bound: background_bound(obj, src.n_degenerate),
        realizations: 0,
        components,
        warnings: Vec::new(),
        scale: bucket.area().powi(n as i32),
    })
}

/// Per-realization bucket intensity and image estimate over the grid.
struct Realization {
    intensity: Vec<f64>,
    image: Vec<f64>,
}

struct MonteCarlo<'a> {
    kern: SlitKernel,
    obj: &'a SampledObject,
    seed: u64,
    /// `exp(i K1 x_i^2 / 2 L1)`
    object_phase: Vec<Complex64>,
    /// `detector[p * m + i] = exp(-i K1 x_p x_i / L1)`
    detector: Vec<Complex64>,
    samples: usize,
    grid_len: usize,
    /// Per tuple, in iteration order: the image share of `prod |a|^2`.
    image_weight: Vec<f64>,
}

/// Image share of every tuple. Phases cancel between a tuple and any
/// rearrangement of it, so `prod |a|^2 / |Stab|` times the detector-averaged
/// pairing weight is unbiased for that pairing's term. Full cycles count
/// everywhere, all pairings count on tuples confined to one pixel.
fn image_weights(kern: &SlitKernel, detector: &[Complex64], samples: usize) -> Result<Vec<f64>> {
    let (n, m) = (kern.n, kern.m);
    let mut pair = vec![Complex64::new(0.0, 0.0); m * m];
    for p in 0..samples {
        let row = &detector[p * m..(p + 1) * m];
        for i in 0..m {
            for j in 0..m {
                pair[i * m + j] += row[i] * row[j].conj();
            }
        }
    }
    for d in &mut pair {
        *d /= samples as f64;
    }
    let cycles: Vec<Vec<usize>> = permutation_sum_terms(n)?
        .into_iter()
        .filter(|t| t.class == PermutationClass::FullCycle)
        .map(|t| t.mapping)
        .collect();
    let mut out = Vec::with_capacity(m.pow(n as u32));
    kern.tuple_sums(|idx| {
        let w = if all_equal(idx) {
            1.0
        } else {
            let sum: Complex64 = cycles
                .iter()
                .map(|q| (0..n).map(|r| pair[idx[r] * m + idx[q[r]]]).product::<Complex64>())
                .sum();
            sum.re / stabilizer(idx)
        };
        out.push(w);
        0.0
    });
    Ok(out)
}

impl MonteCarlo<'_> {
    fn run(&self, r: usize) -> Realization {
        let (n, m, len, s) = (self.kern.n, self.kern.m, self.kern.len, self.samples);
        let g = sample_phase_screen_stream(self.obj, self.seed, r as u64).factors();
        let a: Vec<Complex64> = (0..m).map(|i| self.obj.values[i] * g[i] * self.object_phase[i]).collect();
        let u: Vec<Complex64> = (0..s * m).map(|k| a[k % m] * self.detector[k]).collect();
        let urow = |p: usize| &u[p * m..(p + 1) * m];

        // index-sum coefficients C_s for every detector tuple
        let mut tuples: Vec<Vec<Complex64>> = (0..s).map(|p| urow(p).to_vec()).collect();
        for _ in 1..n {
            let mut next = Vec::with_capacity(tuples.len() * s);
            for t in &tuples {
                for p in 0..s {
                    let up = urow(p);
                    let mut c = vec![Complex64::new(0.0, 0.0); t.len() + m - 1];
                    for (j, tj) in t.iter().enumerate() {
                        for (i, ui) in up.iter().enumerate() {
                            c[j + i] += tj * ui;
                        }
                    }
                    next.push(c);
                }
            }
            tuples = next;
        }
        // Q_{ss'} = sum_t C_s conj(C_s'), upper triangle
        let mut q = vec![Complex64::new(0.0, 0.0); len * len];
        for c in &tuples {
            for a in 0..len {
                let ca = c[a];
                if ca.norm_sqr() == 0.0 {
                    continue;
                }
                for b in a..len {
                    q[a * len + b] += ca * c[b].conj();
                }
            }
        }
        let norm = (self.kern.h / s as f64).powi(n as i32);
        let intensity = (0..self.grid_len)
            .map(|gi| {
                let k = self.kern.row(gi);
                let mut acc = 0.0;
                for a in 0..len {
                    acc += q[a * len + a].re * k[a].norm_sqr();
                    for b in a + 1..len {
                        acc += 2.0 * (k[a] * q[a * len + b] * k[b].conj()).re;
                    }
                }
                acc * norm
            })
            .collect();

        let hn = self.kern.h.powi(n as i32);
        let v: Vec<f64> = (0..m).map(|i| g[i].norm_sqr() * self.obj.values[i].norm_sqr()).collect();
        let bins = self.kern.tuple_sums_indexed(|f, idx| {
            let w = self.image_weight[f];
            if w == 0.0 {
                0.0
            } else {
                hn * w * idx.iter().map(|&i| v[i]).product::<f64>()
            }
        });
        Realization {
            intensity,
            image: self.kern.project(&bins, self.grid_len),
        }
    }
}

fn mean_and_se(rows: &[Vec<f64>], g: usize) -> (f64, f64) {
    let r = rows.len() as f64;
    let mean = rows.iter().map(|x| x[g]).sum::<f64>() / r;
    let var = rows.iter().map(|x| (x[g] - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

/// Monte-Carlo ensemble average of the bucket-integrated `|B|^2` for a slit
/// object, split into image and floor with standard errors from the
/// realization spread. Detector positions are a midpoint grid across the bucket
/// width; the object has no extent along y, so the bucket height enters exactly.
///
/// Realizations draw from independent RNG streams and are reduced in index
/// order, so the report does not depend on the number of worker threads.
pub fn mc_bucket_intensity(
    geom: &ImagingGeometry,
    src: &SourceSpec,
    obj: &SampledObject,
    ens: &EnsembleConfig,
    grid: &GridSpec,
) -> Result<SpeckleReport> {
    ens.validate()?;
    check_inputs(geom, src, obj, &ens.bucket, grid)?;
    let kern = SlitKernel::new(geom, src, obj, grid)?;
    let (n, m, s) = (kern.n, kern.m, ens.detector_samples);
    let k1 = src.k1();
    let xs: Vec<f64> = (0..m).map(|i| obj.position(i).x).collect();
    let bucket = ens.bucket;
    let left = bucket.center.x - 0.5 * bucket.width;
    let detector = (0..s * m)
        .map(|k| {
            let xp = left + (k / m) as f64 * bucket.width / s as f64 + 0.5 * bucket.width / s as f64;
            Complex64::from_polar(1.0, -k1 * xp * xs[k % m] / geom.l1)
        })
        .collect::<Vec<_>>();
    let mc = MonteCarlo {
        image_weight: image_weights(&kern, &detector, s)?,
        object_phase: xs.iter().map(|x| Complex64::from_polar(1.0, 0.5 * k1 * x * x / geom.l1)).collect(),
        kern,
        obj,
        seed: ens.rng_seed,
        detector,
        samples: s,
        grid_len: grid.len(),
    };
    let runs: Vec<Realization> = (0..ens.realizations).into_par_iter().map(|r| mc.run(r)).collect();

    let backgrounds: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| r.intensity.iter().zip(&r.image).map(|(i, x)| i - x).collect())
        .collect();
    let images: Vec<Vec<f64>> = runs.iter().map(|r| r.image.clone()).collect();
    let intensities: Vec<Vec<f64>> = runs.into_iter().map(|r| r.intensity).collect();
    let gl = grid.len();
    let (image_term, standard_errors): (Vec<f64>, Vec<f64>) = (0..gl).map(|g| mean_and_se(&images, g)).unzip();
    let (background_field, bg_se): (Vec<f64>, Vec<f64>) = (0..gl).map(|g| mean_and_se(&backgrounds, g)).unzip();
    let mean_intensity = (0..gl).map(|g| mean_and_se(&intensities, g).0).collect();

    let gi = max_index(&image_term);
    let gb = max_index(&background_field);
    let (x, c) = (image_term[gi], background_field[gb]);
    let visibility = visibility_from(x, c);
    let denom = (x + 2.0 * c).powi(2);
    let influence: Vec<Vec<f64>> = images
        .iter()
        .zip(&backgrounds)
        .map(|(im, bg)| vec![(2.0 * c * im[gi] - 2.0 * x * bg[gb]) / denom])
        .collect();
    let visibility_standard_error = if denom > 0.0 { mean_and_se(&influence, 0).1 } else { f64::NAN };

    let mut warnings = Vec::new();
    if ens.realizations < MIN_RELIABLE_REALIZATIONS {
        warnings.push(format!(
            "only {} realizations; standard errors need at least {MIN_RELIABLE_REALIZATIONS} to be meaningful",
            ens.realizations
        ));
    }
    if x > 0.0 && standard_errors[gi] > PRECISION_WARNING_LEVEL * x {
        warnings.push(format!(
            "image peak standard error is {:.1}% of the peak; increase realizations for better precision",
            100.0 * standard_errors[gi] / x
        ));
    }
    Ok(SpeckleReport {
        n_degenerate: src.n_degenerate,
        grid: *grid,
        mean_intensity,
        image_term,
        background_field,
        background_term: c,
        standard_errors,
        background_standard_error: bg_se[gb],
        visibility,
        visibility_standard_error,
        fresnel_ratio: fresnel_ratio(geom, src, &ens.bucket),
        speckle_pixels: src.lambda1 * geom.l1 / (ens.bucket.width * obj.pixel_pitch),
        background_bound: background_bound(obj, src.n_degenerate),
        realizations: ens.realizations,
        components: Vec::new(),
        warnings,
        scale: ens.bucket.area().powi(n as i32),
    })
}

/// `(I_max - C) / (I_max + C)` with `I_max` the image peak on top of the
/// background constant `C`.
pub fn visibility(report: &SpeckleReport) -> Result<f64> {
    let total: Vec<f64> = report
        .image_term
        .iter()
        .zip(&report.background_field)
        .map(|(a, b)| a + b)
        .collect();
    let hi = total.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = total.iter().cloned().fold(f64::INFINITY, f64::min);
    if total.is_empty() || (hi - lo).partial_cmp(&(1e-12 * hi.abs())) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::UndefinedVisibility("the intensity is constant over the grid".into()));
    }
    let image_max = report.image_term.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let v = visibility_from(image_max, report.background_term);
    if v.is_nan() {
        return Err(Error::UndefinedVisibility("image peak plus background is not positive".into()));
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationClass {
    Identity,
    FullCycle,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationTerm {
    /// Image of `0..n`.
    pub mapping: Vec<usize>,
    /// Cycle lengths in decreasing order, fixed points included.
    pub cycle_type: Vec<usize>,
    pub class: PermutationClass,
}

fn cycle_type(perm: &[usize]) -> Vec<usize> {
    let mut seen = vec![false; perm.len()];
    let mut out = Vec::new();
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = perm[i];
            len += 1;
        }
        out.push(len);
    }
    out.sort_unstable_by(|a, b| b.cmp(a));
    out
}

/// Lexicographic successor, or `false` after the last permutation.
fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else { return false };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap_or(i);
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// All `n!` terms of the ensemble average, tagged by cycle structure.
pub fn permutation_sum_terms(n: usize) -> Result<Vec<PermutationTerm>> {
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    if n > MAX_PERMUTATION_ORDER {
        return Err(Error::param("n", format!("{n}! terms is too many; the limit is n = {MAX_PERMUTATION_ORDER}")));
    }
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    loop {
        let ct = cycle_type(&p);
        let class = if ct.iter().all(|&c| c == 1) {
            PermutationClass::Identity
        } else if ct == [n] {
            PermutationClass::FullCycle
        } else {
            PermutationClass::Other
        };
        out.push(PermutationTerm {
            mapping: p.clone(),
            cycle_type: ct,
            class,
        });
        if !next_permutation(&mut p) {
            return Ok(out);
        }
    }
}
