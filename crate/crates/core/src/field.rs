//! Transverse vectors, sampling grids and sampled fields.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A transverse position or wavevector (metres or inverse metres).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_sqr(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Axis-aligned rectangle, used for bucket-detector extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub center: Vec2,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn new(center: Vec2, width: f64, height: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0 && height.is_finite() && height > 0.0 && center.is_finite()) {
            return Err(Error::param("bucket", "extent must be finite with positive width and height"));
        }
        Ok(Self { center, width, height })
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// Uniform rectangular sampling of a plane; `ny == 1` describes a line along x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Vec2,
    pub pitch: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// A line of `n` points along x, from `start` with spacing `pitch`.
    pub fn line(start: f64, pitch: f64, n: usize) -> Self {
        Self {
            origin: Vec2::new(start, 0.0),
            pitch,
            nx: n,
            ny: 1,
        }
    }

    /// A line of `n` points along x, symmetric about zero.
    pub fn centered_line(half_width: f64, n: usize) -> Self {
        let pitch = if n > 1 { 2.0 * half_width / (n - 1) as f64 } else { 1.0 };
        Self::line(-half_width, pitch, n)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Position of the sample with flat (row-major, x fastest) index `i`.
    pub fn point(&self, i: usize) -> Vec2 {
        let ix = i % self.nx;
        let iy = i / self.nx;
        Vec2::new(
            self.origin.x + ix as f64 * self.pitch,
            self.origin.y + iy as f64 * self.pitch,
        )
    }

    pub fn points(&self) -> impl Iterator<Item = Vec2> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(Error::param("grid.pitch", "must be finite and positive"));
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::param("grid", "must contain at least one sample"));
        }
        if !self.origin.is_finite() {
            return Err(Error::param("grid.origin", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    Object,
    Lens,
    D1,
    D2,
}

/// Sampled complex amplitude. `scale` records the prefactor divided out of `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: GridSpec,
    pub plane: Plane,
    pub values: Vec<Complex64>,
    pub scale: f64,
}

/// Sampled non-negative intensity. `scale` records the prefactor divided out of `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    pub grid: GridSpec,
    pub plane: Plane,
    pub values: Vec<f64>,
    pub scale: f64,
}

impl ComplexField {
    pub fn intensity(&self) -> RealField {
        RealField {
            grid: self.grid,
            plane: self.plane,
            values: self.values.iter().map(|v| v.norm_sqr()).collect(),
            scale: self.scale * self.scale,
        }
    }
}

/// Result of an imaging evaluation: coherent amplitude for point detection,
/// intensity for bucket detection.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageField {
    Amplitude(ComplexField),
    Intensity(RealField),
}

impl ImageField {
    pub fn grid(&self) -> &GridSpec {
        match self {
            ImageField::Amplitude(f) => &f.grid,
            ImageField::Intensity(f) => &f.grid,
        }
    }

    pub fn intensity(&self) -> RealField {
        match self {
            ImageField::Amplitude(f) => f.intensity(),
            ImageField::Intensity(f) => f.clone(),
        }
    }
}
