//! Periodic-boundary arithmetic on the d-torus.
//!
//! Points are always stored in the fundamental domain `[0, L_a)` of each axis.
//! Separation vectors use the minimal-image convention with components in
//! `[-L_a/2, L_a/2)`; an exact half-box separation resolves to the negative image.

use crate::error::{invalid_input, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Torus {
    sides: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// Reduces `x` into `[0, side)`.
#[inline]
pub fn wrap_coord(x: f64, side: f64) -> f64 {
    let r = x - side * (x / side).floor();
    // `r` can round up to `side` for tiny negative inputs.
    if r >= side {
        0.0
    } else {
        r
    }
}

/// Reduces a displacement into `[-side/2, side/2)`.
#[inline]
pub fn min_image_coord(delta: f64, side: f64) -> f64 {
    let r = delta - side * (delta / side + 0.5).floor();
    if r >= 0.5 * side {
        r - side
    } else {
        r
    }
}

impl Torus {
    pub fn new(sides: Vec<f64>) -> Result<Self> {
        if sides.is_empty() || sides.len() > 3 {
            return Err(invalid_input(format!(
                "torus dimension must be 1, 2 or 3, got {}",
                sides.len()
            )));
        }
        if let Some(bad) = sides.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(invalid_input(format!("torus side lengths must be positive, got {bad}")));
        }
        Ok(Self { sides })
    }

    pub fn cubic(dim: usize, side: f64) -> Result<Self> {
        Self::new(vec![side; dim])
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[f64] {
        &self.sides
    }

    pub fn volume(&self) -> f64 {
        self.sides.iter().product()
    }

    pub fn min_side(&self) -> f64 {
        self.sides.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Largest possible minimal separation distance, `sqrt(sum L_a^2) / 2`.
    pub fn max_distance(&self) -> f64 {
        0.5 * self.sides.iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(invalid_input(format!(
                "expected {} coordinates, got {len}",
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn wrap(&self, raw: &[f64]) -> Result<TorusPoint> {
        self.check_dim(raw.len())?;
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(invalid_input("non-finite coordinate"));
        }
        let coords = raw
            .iter()
            .zip(&self.sides)
            .map(|(&x, &l)| wrap_coord(x, l))
            .collect();
        Ok(TorusPoint { coords })
    }

    /// Wraps a flat `N x d` coordinate buffer in place.
    pub fn wrap_in_place(&self, flat: &mut [f64]) {
        let d = self.dim();
        for (k, x) in flat.iter_mut().enumerate() {
            *x = wrap_coord(*x, self.sides[k % d]);
        }
    }

    /// Writes the minimal separation vector from `xj` to `xi` into `out`.
    /// Unchecked fast path for samplers; slices must have length `dim`.
    #[inline]
    pub fn separation_into(&self, xi: &[f64], xj: &[f64], out: &mut [f64]) {
        for a in 0..self.sides.len() {
            out[a] = min_image_coord(xi[a] - xj[a], self.sides[a]);
        }
    }

    /// Squared minimal separation distance, unchecked.
    #[inline]
    pub fn distance_sq(&self, xi: &[f64], xj: &[f64]) -> f64 {
        let mut s = 0.0;
        for a in 0..self.sides.len() {
            let d = min_image_coord(xi[a] - xj[a], self.sides[a]);
            s += d * d;
        }
        s
    }

    pub fn min_sep_vector(&self, xi: &TorusPoint, xj: &TorusPoint) -> Result<Vec<f64>> {
        self.check_dim(xi.dim())?;
        self.check_dim(xj.dim())?;
        let mut out = vec![0.0; self.dim()];
        self.separation_into(&xi.coords, &xj.coords, &mut out);
        Ok(out)
    }

    pub fn min_sep_distance(&self, xi: &TorusPoint, xj: &TorusPoint) -> Result<f64> {
        self.check_dim(xi.dim())?;
        self.check_dim(xj.dim())?;
        Ok(self.distance_sq(&xi.coords, &xj.coords).sqrt())
    }
}
