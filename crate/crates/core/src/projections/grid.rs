//! Densities sampled on a uniform lattice.

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::geometry::PointCloud;
use crate::par;

/// Header stored in front of serialized lattice values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub d: usize,
    pub h: f64,
    pub origin: Vec<f64>,
    pub shape: Vec<usize>,
}

/// Non-negative density sampled at `origin + h * idx`, row-major, last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMeasure {
    d: usize,
    h: f64,
    origin: Vec<f64>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    values: Vec<f64>,
}

pub(crate) fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

impl GridMeasure {
    pub fn new(h: f64, origin: Vec<f64>, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let d = origin.len();
        if d == 0 || shape.len() != d {
            return input("origin and shape must have the same positive length");
        }
        if !(h > 0.0 && h.is_finite()) {
            return input("lattice spacing must be positive");
        }
        if shape.iter().product::<usize>() != values.len() {
            return input("value count does not match the lattice shape");
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return input("densities must be finite and non-negative");
        }
        Ok(GridMeasure {
            d,
            h,
            strides: row_major_strides(&shape),
            origin,
            shape,
            values,
        })
    }

    pub fn zeros(h: f64, origin: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let len = shape.iter().product();
        GridMeasure::new(h, origin, shape, vec![0.0; len])
    }

    /// Samples `f` at every lattice node (negative values are clipped to zero).
    pub fn from_fn(h: f64, origin: Vec<f64>, shape: Vec<usize>, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> Result<Self> {
        let mut g = GridMeasure::zeros(h, origin, shape)?;
        let row = *g.shape.last().expect("d > 0");
        let d = g.d;
        let (origin, strides) = (g.origin.clone(), g.strides.clone());
        par::for_each_chunk_mut(&mut g.values, row, |r, chunk| {
            let mut x = vec![0.0; d];
            let mut rem = r * row;
            for a in 0..d {
                let i = rem / strides[a];
                rem %= strides[a];
                x[a] = origin[a] + h * i as f64;
            }
            for (j, v) in chunk.iter_mut().enumerate() {
                x[d - 1] = origin[d - 1] + h * j as f64;
                *v = f(&x).max(0.0);
            }
        });
        Ok(g)
    }

    pub fn header(&self) -> GridHeader {
        GridHeader {
            d: self.d,
            h: self.h,
            origin: self.origin.clone(),
            shape: self.shape.clone(),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Lattice multi-index of a linear index.
    pub fn unravel(&self, mut lin: usize) -> Vec<usize> {
        let mut idx = vec![0; self.d];
        for a in 0..self.d {
            idx[a] = lin / self.strides[a];
            lin %= self.strides[a];
        }
        idx
    }

    /// Coordinates of the node with linear index `lin`.
    pub fn node(&self, lin: usize) -> Vec<f64> {
        self.unravel(lin)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.origin[a] + self.h * i as f64)
            .collect()
    }

    /// Upper corner of the lattice.
    pub fn upper(&self) -> Vec<f64> {
        (0..self.d)
            .map(|a| self.origin[a] + self.h * (self.shape[a] - 1) as f64)
            .collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    /// `h^d * sum(values)`, summed in a fixed order.
    pub fn total_mass(&self) -> f64 {
        par::sum_range(self.values.len(), |i| self.values[i]) * self.cell_volume()
    }

    /// Rescales the density so that the total mass equals `mass`.
    pub fn normalize(&mut self, mass: f64) {
        let m = self.total_mass();
        if m > 0.0 {
            let f = mass / m;
            self.values.iter_mut().for_each(|v| *v *= f);
        }
    }

    /// Multilinear interpolation; zero outside the lattice.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        let d = self.d;
        let mut base = 0usize;
        let mut frac = [0.0f64; 8];
        let mut step = [0usize; 8];
        for a in 0..d {
            let u = (x[a] - self.origin[a]) / self.h;
            if !(u >= 0.0) {
                return 0.0;
            }
            let last = (self.shape[a] - 1) as f64;
            if u > last {
                return 0.0;
            }
            let mut i = u.floor();
            if i >= last {
                i = (last - 1.0).max(0.0);
            }
            frac[a] = u - i;
            step[a] = if self.shape[a] > 1 { self.strides[a] } else { 0 };
            base += i as usize * self.strides[a];
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut lin = base;
            for a in 0..d {
                if corner >> a & 1 == 1 {
                    w *= frac[a];
                    lin += step[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w != 0.0 {
                acc += w * self.values[lin];
            }
        }
        acc
    }

    /// Nodes with positive density as a point cloud.
    pub fn support_cloud(&self) -> Result<PointCloud> {
        let mut coords = Vec::new();
        for (i, v) in self.values.iter().enumerate() {
            if *v > 0.0 {
                coords.extend(self.node(i));
            }
        }
        let radius = coords
            .chunks(self.d)
            .map(crate::geometry::norm)
            .fold(0.0, f64::max);
        PointCloud::new(self.d, coords, self.h, radius)
    }

    /// Largest difference quotient between neighbouring nodes.
    pub fn max_lipschitz_quotient(&self) -> f64 {
        let rows = self.values.len() / self.shape[self.d - 1];
        let row = self.shape[self.d - 1];
        par::map_range(rows, |r| {
            let mut best = 0.0f64;
            let start = r * row;
            let idx = self.unravel(start);
            for j in 0..row {
                let lin = start + j;
                let v = self.values[lin];
                for a in 0..self.d {
                    let i = if a == self.d - 1 { j } else { idx[a] };
                    if i + 1 < self.shape[a] {
                        best = best.max((self.values[lin + self.strides[a]] - v).abs());
                    }
                }
            }
            best
        })
        .into_iter()
        .fold(0.0, f64::max)
            / self.h
    }

    /// Lattice approximation of `mu(B(center, r))`.
    pub fn mass_in_ball(&self, center: &[f64], r: f64) -> f64 {
        let d = self.d;
        let mut lo = vec![0usize; d];
        let mut hi = vec![0usize; d];
        for a in 0..d {
            let l = ((center[a] - r - self.origin[a]) / self.h).ceil().max(0.0);
            let u = ((center[a] + r - self.origin[a]) / self.h).floor();
            if u < 0.0 || l > (self.shape[a] - 1) as f64 {
                return 0.0;
            }
            lo[a] = l as usize;
            hi[a] = (u as usize).min(self.shape[a] - 1);
        }
        let mut idx = lo.clone();
        let mut acc = 0.0;
        loop {
            let mut r2 = 0.0;
            let mut lin = 0;
            for a in 0..d {
                let x = self.origin[a] + self.h * idx[a] as f64 - center[a];
                r2 += x * x;
                lin += idx[a] * self.strides[a];
            }
            if r2 <= r * r {
                acc += self.values[lin];
            }
            let mut a = d;
            loop {
                if a == 0 {
                    return acc * self.cell_volume();
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] <= hi[a] {
                    break;
                }
                idx[a] = lo[a];
            }
        }
    }
}
