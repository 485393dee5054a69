//! Geometry and wavelength bookkeeping for the optical train, together with the
//! wavelength- and photon-number-weighted Gaussian thin-lens algebra.
//!
//! All lengths are SI metres.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::rayleigh_factor;

/// Relative tolerance on `|1/f - 1/a - 1/b| * f` for a geometry to count as focused.
pub const THIN_LENS_TOLERANCE: f64 = 1e-9;

/// Which arm carries the object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Configuration {
    /// Object in the path of the N degenerate photons; lens in the ancilla arm.
    ObjectInDegenerateArm,
    /// Lens and object both in the ancilla (non-degenerate) arm; the degenerate
    /// photons propagate freely to a point N-photon detector.
    ObjectInAncillaArm,
}

/// Distances, focal length and aperture of the optical train.
///
/// `d1`: source to object, `d2`: source to lens, `l1`: object (or source, in
/// the ancilla-arm configuration) to detector D1, `l2`: lens (or object) to
/// detector D2, `d2_prime`: lens to object, ancilla-arm configuration only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagingGeometry {
    pub d1: f64,
    pub d2: f64,
    pub l1: f64,
    pub l2: f64,
    pub focal_length: f64,
    pub aperture_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d2_prime: Option<f64>,
}

/// The `|1,N>` source: N degenerate photons at `lambda1`, one ancilla at `lambda2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub n_degenerate: u32,
    pub lambda1: f64,
    pub lambda2: f64,
}

/// The three quantities linked by `1/f = 1/object + 1/image`; exactly one is unknown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThinLensKnown {
    /// Solve for the image-side distance.
    FocalAndObject { focal: f64, object: f64 },
    /// Solve for the object-side (effective) distance.
    FocalAndImage { focal: f64, image: f64 },
    /// Solve for the focal length.
    ObjectAndImage { object: f64, image: f64 },
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::geometry(field, format!("must be a finite positive length, got {v}")))
    }
}

pub fn wavenumber(lambda: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!(
            "wavelength must be finite and positive, got {lambda}"
        )));
    }
    Ok(2.0 * PI / lambda)
}

impl SourceSpec {
    pub fn new(n_degenerate: u32, lambda1: f64, lambda2: f64) -> Result<Self> {
        let s = Self {
            n_degenerate,
            lambda1,
            lambda2,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_degenerate == 0 {
            return Err(Error::param("n_degenerate", "must be at least 1"));
        }
        wavenumber(self.lambda1).map_err(|_| Error::param("lambda1", "must be positive"))?;
        wavenumber(self.lambda2).map_err(|_| Error::param("lambda2", "must be positive"))?;
        Ok(())
    }

    pub fn n(&self) -> f64 {
        self.n_degenerate as f64
    }

    pub fn k1(&self) -> f64 {
        2.0 * PI / self.lambda1
    }

    pub fn k2(&self) -> f64 {
        2.0 * PI / self.lambda2
    }

    /// The same source with a different degenerate-photon count.
    pub fn with_n(&self, n_degenerate: u32) -> Self {
        Self {
            n_degenerate,
            ..*self
        }
    }

    /// `lambda1 / (N lambda2)`, the scale applied to the degenerate-arm distance.
    pub fn distance_weight(&self) -> f64 {
        self.lambda1 / (self.n() * self.lambda2)
    }
}

impl ImagingGeometry {
    /// Checks the length invariants for the chosen configuration. `d2` may be zero
    /// (lens at the source face); every other length must be strictly positive.
    pub fn validate(&self, cfg: Configuration) -> Result<()> {
        positive("d1", self.d1)?;
        if !(self.d2.is_finite() && self.d2 >= 0.0) {
            return Err(Error::geometry("d2", format!("must be finite and non-negative, got {}", self.d2)));
        }
        positive("L1", self.l1)?;
        positive("L2", self.l2)?;
        positive("f", self.focal_length)?;
        positive("R", self.aperture_radius)?;
        match (cfg, self.d2_prime) {
            (Configuration::ObjectInDegenerateArm, None) => Ok(()),
            (Configuration::ObjectInDegenerateArm, Some(_)) => Err(Error::geometry(
                "d2_prime",
                "only applies to the ancilla-arm configuration",
            )),
            (Configuration::ObjectInAncillaArm, Some(v)) => positive("d2_prime", v),
            (Configuration::ObjectInAncillaArm, None) => Err(Error::geometry(
                "d2_prime",
                "is required for the ancilla-arm configuration",
            )),
        }
    }

    /// The image-side distance paired with the effective object distance:
    /// `L2` in the degenerate-arm configuration, `d2'` otherwise.
    pub fn image_distance(&self, cfg: Configuration) -> f64 {
        match cfg {
            Configuration::ObjectInDegenerateArm => self.l2,
            Configuration::ObjectInAncillaArm => self.d2_prime.unwrap_or(f64::NAN),
        }
    }

    /// Returns a copy with `L2` (or `d2'`) chosen so the thin-lens condition holds
    /// for this source, keeping the focal length fixed.
    pub fn focused(&self, src: &SourceSpec, cfg: Configuration) -> Result<Self> {
        let object = effective_object_distance(self, src, cfg);
        let image = thin_lens_solve(ThinLensKnown::FocalAndObject {
            focal: self.focal_length,
            object,
        })?;
        let mut g = *self;
        match cfg {
            Configuration::ObjectInDegenerateArm => g.l2 = image,
            Configuration::ObjectInAncillaArm => g.d2_prime = Some(image),
        }
        Ok(g)
    }

    /// Returns a copy whose focal length satisfies the thin-lens condition, keeping
    /// every distance fixed.
    pub fn with_matched_focal_length(&self, src: &SourceSpec, cfg: Configuration) -> Result<Self> {
        let object = effective_object_distance(self, src, cfg);
        let focal = thin_lens_solve(ThinLensKnown::ObjectAndImage {
            object,
            image: self.image_distance(cfg),
        })?;
        Ok(Self {
            focal_length: focal,
            ..*self
        })
    }
}

/// `d2 + (lambda1 / N lambda2) d1` for the degenerate-arm configuration,
/// `d2 + (lambda1 / N lambda2) L1` for the ancilla-arm configuration.
pub fn effective_object_distance(geom: &ImagingGeometry, src: &SourceSpec, cfg: Configuration) -> f64 {
    let far = match cfg {
        Configuration::ObjectInDegenerateArm => geom.d1,
        Configuration::ObjectInAncillaArm => geom.l1,
    };
    geom.d2 + src.distance_weight() * far
}

pub fn thin_lens_solve(known: ThinLensKnown) -> Result<f64> {
    let check = |name: &'static str, v: f64| -> Result<()> {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(Error::Unsolvable(format!("{name} must be finite and positive, got {v}")))
        }
    };
    let solved = match known {
        ThinLensKnown::FocalAndObject { focal, object: other }
        | ThinLensKnown::FocalAndImage { focal, image: other } => {
            check("focal length", focal)?;
            check("conjugate distance", other)?;
            if other == focal {
                return Err(Error::Unsolvable(
                    "conjugate distance equals the focal length; the other conjugate is at infinity".into(),
                ));
            }
            focal * other / (other - focal)
        }
        ThinLensKnown::ObjectAndImage { object, image } => {
            check("object distance", object)?;
            check("image distance", image)?;
            object * image / (object + image)
        }
    };
    if !(solved.is_finite() && solved > 0.0) {
        return Err(Error::Unsolvable(format!(
            "solution {solved} is not a finite positive length (virtual image)"
        )));
    }
    Ok(solved)
}

/// `|1/f - 1/object - 1/image| * f`.
pub fn thin_lens_residual(geom: &ImagingGeometry, src: &SourceSpec, cfg: Configuration) -> f64 {
    let f = geom.focal_length;
    let a = effective_object_distance(geom, src, cfg);
    let b = geom.image_distance(cfg);
    ((1.0 / f - 1.0 / a - 1.0 / b) * f).abs()
}

/// Fails with [`Error::InconsistentGeometry`] unless the thin-lens condition holds.
pub fn check_thin_lens(geom: &ImagingGeometry, src: &SourceSpec, cfg: Configuration) -> Result<()> {
    let residual = thin_lens_residual(geom, src, cfg);
    if residual.is_finite() && residual <= THIN_LENS_TOLERANCE {
        Ok(())
    } else {
        Err(Error::InconsistentGeometry {
            residual,
            tolerance: THIN_LENS_TOLERANCE,
        })
    }
}

/// `L2 / D` in the degenerate-arm configuration and `D / d2'` in the ancilla-arm
/// one, `D` being the effective object distance.
pub fn magnification(geom: &ImagingGeometry, src: &SourceSpec, cfg: Configuration) -> Result<f64> {
    check_thin_lens(geom, src, cfg)?;
    let eff = effective_object_distance(geom, src, cfg);
    Ok(match cfg {
        Configuration::ObjectInDegenerateArm => geom.l2 / eff,
        Configuration::ObjectInAncillaArm => eff / geom.image_distance(cfg),
    })
}

/// Radius of the Airy disk in the detector plane where the image forms (D2 for the
/// degenerate-arm configuration, D1 for the ancilla-arm one).
pub fn airy_radius(geom: &ImagingGeometry, src: &SourceSpec, cfg: Configuration) -> f64 {
    let span = match cfg {
        Configuration::ObjectInDegenerateArm => geom.l2,
        Configuration::ObjectInAncillaArm => effective_object_distance(geom, src, cfg),
    };
    rayleigh_factor() * src.lambda2 * span / geom.aperture_radius
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src(n: u32) -> SourceSpec {
        SourceSpec::new(n, 1e-6, 1e-6).unwrap()
    }

    fn geom_i() -> ImagingGeometry {
        ImagingGeometry {
            d1: 10.0,
            d2: 0.05,
            l1: 1.0,
            l2: 0.1,
            focal_length: 0.1,
            aperture_radius: 0.01,
            d2_prime: None,
        }
    }

    #[test]
    fn wavenumber_values() {
        assert!((wavenumber(2.0 * PI).unwrap() - 1.0).abs() < 1e-15);
        assert!((wavenumber(1e-6).unwrap() - 6.283_185_307e6).abs() < 1e-3);
        assert!(matches!(wavenumber(0.0), Err(Error::Domain(_))));
        assert!(wavenumber(-1.0).is_err());
    }

    #[test]
    fn effective_distance_examples() {
        let g = geom_i();
        let cfg = Configuration::ObjectInDegenerateArm;
        assert!((effective_object_distance(&g, &src(2), cfg) - 5.05).abs() < 1e-12);

        let g0 = ImagingGeometry { d2: 0.0, ..g };
        assert_eq!(effective_object_distance(&g0, &src(1), cfg), g0.d1);

        let g2 = ImagingGeometry {
            l1: 10.0,
            d2_prime: Some(0.102),
            ..g
        };
        let e = effective_object_distance(&g2, &src(2), Configuration::ObjectInAncillaArm);
        assert!((e - 5.05).abs() < 1e-12);
    }

    #[test]
    fn thin_lens_examples() {
        let l2 = thin_lens_solve(ThinLensKnown::FocalAndObject {
            focal: 0.1,
            object: 5.05,
        })
        .unwrap();
        assert!((l2 - 1.0 / (1.0 / 0.1 - 1.0 / 5.05)).abs() < 1e-15);
        assert!((l2 - 0.102_020_2).abs() < 1e-7);
        let sym = thin_lens_solve(ThinLensKnown::FocalAndObject {
            focal: 0.1,
            object: 0.2,
        })
        .unwrap();
        assert!((sym - 0.2).abs() < 1e-15);
        assert!(matches!(
            thin_lens_solve(ThinLensKnown::FocalAndObject {
                focal: 0.1,
                object: 0.1
            }),
            Err(Error::Unsolvable(_))
        ));
        assert!(thin_lens_solve(ThinLensKnown::FocalAndImage {
            focal: 0.1,
            image: 0.05
        })
        .is_err());
    }

    #[test]
    fn magnification_examples() {
        let cfg = Configuration::ObjectInDegenerateArm;
        let g = geom_i().focused(&src(2), cfg).unwrap();
        let m = magnification(&g, &src(2), cfg).unwrap();
        assert!((m - g.l2 / 5.05).abs() < 1e-15);
        assert!((m - 0.0202).abs() < 1e-4);

        // 2f-2f: unit magnification
        let unit = ImagingGeometry {
            d1: 0.2,
            d2: 0.0,
            l2: 0.2,
            ..geom_i()
        };
        assert!((magnification(&unit, &src(1), cfg).unwrap() - 1.0).abs() < 1e-15);

        let g2 = ImagingGeometry {
            l1: 10.0,
            d2_prime: Some(0.1),
            ..geom_i()
        }
        .focused(&src(2), Configuration::ObjectInAncillaArm)
        .unwrap();
        let m2 = magnification(&g2, &src(2), Configuration::ObjectInAncillaArm).unwrap();
        assert!((m2 - 5.05 / g2.d2_prime.unwrap()).abs() < 1e-12);
        assert!((m2 - 49.5).abs() < 1e-9);
    }

    #[test]
    fn unfocused_geometry_is_inconsistent() {
        let cfg = Configuration::ObjectInDegenerateArm;
        let g = ImagingGeometry { l2: 0.2, ..geom_i() };
        assert!(matches!(
            magnification(&g, &src(2), cfg),
            Err(Error::InconsistentGeometry { .. })
        ));
    }

    #[test]
    fn airy_radius_examples() {
        let k = rayleigh_factor();
        let g = ImagingGeometry {
            aperture_radius: 0.01,
            l2: 0.1,
            ..geom_i()
        };
        let xi = airy_radius(&g, &src(2), Configuration::ObjectInDegenerateArm);
        assert!((xi - k * 1e-6 * 0.1 / 0.01).abs() < 1e-18);
        assert!((xi - 6.1e-6).abs() < 0.01e-6);

        let g2 = ImagingGeometry {
            d2: 0.0,
            l1: 10.0,
            d2_prime: Some(0.1),
            ..geom_i()
        };
        let xi2 = airy_radius(&g2, &src(2), Configuration::ObjectInAncillaArm);
        assert!((xi2 - k * 1e-6 * 5.0 / 0.01).abs() < 1e-15);
        let xi1 = airy_radius(&g2, &src(1), Configuration::ObjectInAncillaArm);
        assert!((xi2 / xi1 - 0.5).abs() < 1e-15);

        // N -> infinity leaves only the d2 contribution
        let g3 = ImagingGeometry { d2: 0.3, ..g2 };
        let big = airy_radius(&g3, &src(1_000_000), Configuration::ObjectInAncillaArm);
        assert!((big / (k * 1e-6 * 0.3 / 0.01) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn geometry_validation() {
        let cfg = Configuration::ObjectInDegenerateArm;
        assert!(geom_i().validate(cfg).is_ok());
        let bad = ImagingGeometry { d1: -1.0, ..geom_i() };
        match bad.validate(cfg) {
            Err(Error::InvalidGeometry { field, .. }) => assert_eq!(field, "d1"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(geom_i().validate(Configuration::ObjectInAncillaArm).is_err());
        let with_prime = ImagingGeometry {
            d2_prime: Some(0.1),
            ..geom_i()
        };
        assert!(with_prime.validate(cfg).is_err());
        assert!(with_prime.validate(Configuration::ObjectInAncillaArm).is_ok());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn thin_lens_residual_small(f in 0.01f64..1.0, ratio in 1.01f64..1e4) {
                let a = f * ratio;
                let b = thin_lens_solve(ThinLensKnown::FocalAndObject { focal: f, object: a }).unwrap();
                prop_assert!((1.0 / f - 1.0 / a - 1.0 / b).abs() <= 1e-12 / f);
                let f2 = thin_lens_solve(ThinLensKnown::ObjectAndImage { object: a, image: b }).unwrap();
                prop_assert!((1.0 / f2 - 1.0 / a - 1.0 / b).abs() <= 1e-12 / f2);
            }

            #[test]
            fn effective_distance_decreases_with_n(n in 1u32..50, d1 in 0.1f64..100.0, d2 in 0.0f64..1.0) {
                let g = ImagingGeometry { d1, d2, l1: d1, l2: 0.1, focal_length: 0.1, aperture_radius: 0.01, d2_prime: Some(0.1) };
                let s = SourceSpec::new(n, 8e-7, 5e-7).unwrap();
                for cfg in [Configuration::ObjectInDegenerateArm, Configuration::ObjectInAncillaArm] {
                    prop_assert!(effective_object_distance(&g, &s.with_n(n + 1), cfg) < effective_object_distance(&g, &s, cfg));
                }
            }
        }
    }
}
