//! Object descriptions: two weighted point scatterers or a sampled transmission.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Vec2;

/// Two point scatterers, one at the origin (`amp_origin`) and one at `separation`
/// (`amp_a`). For the degenerate-arm configuration the N-th powers of the
/// amplitudes enter the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointObject {
    pub amp_origin: Complex64,
    pub amp_a: Complex64,
    pub separation: Vec2,
}

impl TwoPointObject {
    pub fn new(amp_origin: Complex64, amp_a: Complex64, separation: Vec2) -> Result<Self> {
        let o = Self {
            amp_origin,
            amp_a,
            separation,
        };
        o.validate()?;
        Ok(o)
    }

    /// Equal unit amplitudes separated by `a` along x.
    pub fn symmetric(a: f64) -> Self {
        Self {
            amp_origin: Complex64::new(1.0, 0.0),
            amp_a: Complex64::new(1.0, 0.0),
            separation: Vec2::new(a, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.separation.is_finite() {
            return Err(Error::param("separation", "must be finite"));
        }
        let finite = |c: Complex64| c.re.is_finite() && c.im.is_finite();
        if !finite(self.amp_origin) || !finite(self.amp_a) {
            return Err(Error::param("amplitudes", "must be finite"));
        }
        if self.amp_origin == Complex64::new(0.0, 0.0) && self.amp_a == Complex64::new(0.0, 0.0) {
            return Err(Error::param("amplitudes", "at least one must be nonzero"));
        }
        Ok(())
    }

    /// The two scatterers as (position, amplitude) pairs.
    pub fn points(&self) -> [(Vec2, Complex64); 2] {
        [(Vec2::ZERO, self.amp_origin), (self.separation, self.amp_a)]
    }

    pub fn only_origin(&self) -> Self {
        Self {
            amp_a: Complex64::new(0.0, 0.0),
            ..*self
        }
    }

    pub fn only_a(&self) -> Self {
        Self {
            amp_origin: Complex64::new(0.0, 0.0),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimensionality {
    /// A line of pixels along x at y = 0 (a slit geometry).
    Slit1D,
    Full2D,
}

/// Complex transmission `A(rho_o)` sampled on a square pixel grid centred on the
/// optical axis. Values are row-major with x fastest; `Slit1D` objects have a
/// single row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledObject {
    pub dimensionality: Dimensionality,
    pub pixel_pitch: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<Complex64>,
}

impl SampledObject {
    pub fn slit(pixel_pitch: f64, values: Vec<Complex64>) -> Result<Self> {
        let o = Self {
            dimensionality: Dimensionality::Slit1D,
            pixel_pitch,
            nx: values.len(),
            ny: 1,
            values,
        };
        o.validate()?;
        Ok(o)
    }

    /// A uniform slit of `n` unit-transmission pixels.
    pub fn uniform_slit(pixel_pitch: f64, n: usize) -> Result<Self> {
        Self::slit(pixel_pitch, vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn grid(pixel_pitch: f64, nx: usize, ny: usize, values: Vec<Complex64>) -> Result<Self> {
        let o = Self {
            dimensionality: Dimensionality::Full2D,
            pixel_pitch,
            nx,
            ny,
            values,
        };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pixel_pitch.is_finite() && self.pixel_pitch > 0.0) {
            return Err(Error::param("pixel_pitch", "must be finite and positive"));
        }
        if self.nx == 0 || self.ny == 0 || self.values.len() != self.nx * self.ny {
            return Err(Error::param("values", "length must equal nx * ny and be nonzero"));
        }
        if self.dimensionality == Dimensionality::Slit1D && self.ny != 1 {
            return Err(Error::param("ny", "a slit object has exactly one row"));
        }
        if self.values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::param("values", "must be finite"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Centre of pixel `i`.
    pub fn position(&self, i: usize) -> Vec2 {
        let ix = (i % self.nx) as f64 - 0.5 * (self.nx - 1) as f64;
        let iy = (i / self.nx) as f64 - 0.5 * (self.ny - 1) as f64;
        Vec2::new(ix * self.pixel_pitch, iy * self.pixel_pitch)
    }

    /// Integration weight of one pixel: its length for a slit, its area otherwise.
    pub fn pixel_weight(&self) -> f64 {
        match self.dimensionality {
            Dimensionality::Slit1D => self.pixel_pitch,
            Dimensionality::Full2D => self.pixel_pitch * self.pixel_pitch,
        }
    }

    /// Extent of the object support along x (centre-to-centre span plus one pixel).
    pub fn width(&self) -> f64 {
        self.nx as f64 * self.pixel_pitch
    }

    /// Each pixel split into `factor` (per axis) sub-pixels carrying the same value.
    pub fn subdivided(&self, factor: usize) -> Self {
        if factor <= 1 {
            return self.clone();
        }
        let fy = match self.dimensionality {
            Dimensionality::Slit1D => 1,
            Dimensionality::Full2D => factor,
        };
        let nx = self.nx * factor;
        let ny = self.ny * fy;
        let mut values = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                values.push(self.values[(iy / fy) * self.nx + ix / factor]);
            }
        }
        Self {
            dimensionality: self.dimensionality,
            pixel_pitch: self.pixel_pitch / factor as f64,
            nx,
            ny,
            values,
        }
    }

    /// Iterator over (position, value) of the nonzero pixels.
    pub fn support(&self) -> impl Iterator<Item = (Vec2, Complex64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm_sqr() > 0.0)
            .map(move |(i, v)| (self.position(i), *v))
    }
}

/// What the degenerate (or, in the ancilla-arm configuration, the ancilla) photons see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectModel {
    TwoPoint(TwoPointObject),
    Sampled(SampledObject),
}

impl ObjectModel {
    /// Point scatterers as (position, integration weight times amplitude) pairs.
    pub fn scatterers(&self) -> Vec<(Vec2, Complex64, f64)> {
        match self {
            ObjectModel::TwoPoint(o) => o
                .points()
                .into_iter()
                .filter(|(_, a)| a.norm_sqr() > 0.0)
                .map(|(p, a)| (p, a, 1.0))
                .collect(),
            ObjectModel::Sampled(o) => {
                let w = o.pixel_weight();
                o.support().map(|(p, a)| (p, a, w)).collect()
            }
        }
    }
}
