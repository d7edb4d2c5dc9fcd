//! Periodic box geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// A point in up to three dimensions; coordinates beyond the torus dimension stay zero.
pub type Point = [f64; MAX_DIM];

/// Cubic periodic box `[0, L)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Torus {
    pub dim: usize,
    pub length: f64,
}

impl Torus {
    pub fn new(dim: usize, length: f64) -> Result<Self> {
        let torus = Torus { dim, length };
        torus.validate()?;
        Ok(torus)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DIM).contains(&self.dim) {
            return Err(Error::InvalidSpec(format!(
                "torus dimension must be 1, 2 or 3, got {}",
                self.dim
            )));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "torus side length must be positive, got {}",
                self.length
            )));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Maps every coordinate back into `[0, L)`.
    pub fn wrap(&self, p: Point) -> Point {
        let mut out = [0.0; MAX_DIM];
        for k in 0..self.dim {
            let mut x = p[k].rem_euclid(self.length);
            // rem_euclid can round up to exactly L for tiny negative inputs.
            if x >= self.length {
                x = 0.0;
            }
            out[k] = x;
        }
        out
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..self.dim).all(|k| p[k] >= 0.0 && p[k] < self.length)
    }

    /// Minimal-image displacement `a - b`.
    pub fn displacement(&self, a: &Point, b: &Point) -> Point {
        let mut d = [0.0; MAX_DIM];
        let half = 0.5 * self.length;
        for k in 0..self.dim {
            let mut x = a[k] - b[k];
            if x > half {
                x -= self.length;
            } else if x < -half {
                x += self.length;
            }
            d[k] = x;
        }
        d
    }

    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        norm(&self.displacement(a, b), self.dim)
    }

    /// `p + shift`, wrapped.
    pub fn translate(&self, p: &Point, shift: &Point) -> Point {
        let mut q = *p;
        for k in 0..self.dim {
            q[k] += shift[k];
        }
        self.wrap(q)
    }
}

pub fn norm(v: &Point, dim: usize) -> f64 {
    v[..dim].iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Volume of the unit ball in `dim` dimensions.
pub fn unit_ball_volume(dim: usize) -> f64 {
    use std::f64::consts::PI;
    match dim {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => unreachable!("dimension is validated to 1..=3"),
    }
}

/// Surface area of the unit sphere in `dim` dimensions.
pub fn unit_sphere_area(dim: usize) -> f64 {
    dim as f64 * unit_ball_volume(dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_dimension() {
        assert!(Torus::new(0, 1.0).is_err());
        assert!(Torus::new(4, 1.0).is_err());
        assert!(Torus::new(2, -1.0).is_err());
    }

    #[test]
    fn minimal_image_wraps() {
        let t = Torus::new(1, 10.0).unwrap();
        assert_eq!(t.displacement(&[9.5, 0.0, 0.0], &[0.5, 0.0, 0.0])[0], -1.0);
        assert!((t.distance(&[0.2, 0.0, 0.0], &[9.9, 0.0, 0.0]) - 0.3).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn wrap_lands_inside(x in -1e3f64..1e3, y in -1e3f64..1e3) {
            let t = Torus::new(2, 7.3).unwrap();
            let p = t.wrap([x, y, 0.0]);
            prop_assert!(t.contains(&p));
        }

        #[test]
        fn minimal_image_is_short_and_antisymmetric(a in 0.0f64..7.3, b in 0.0f64..7.3) {
            let t = Torus::new(1, 7.3).unwrap();
            let d = t.displacement(&[a, 0.0, 0.0], &[b, 0.0, 0.0])[0];
            let e = t.displacement(&[b, 0.0, 0.0], &[a, 0.0, 0.0])[0];
            prop_assert!(d.abs() <= 3.65);
            prop_assert_eq!(d.abs(), e.abs());
        }
    }
}
