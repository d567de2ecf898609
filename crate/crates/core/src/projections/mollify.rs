use serde::{Deserialize, Serialize};

use super::GridMeasure;
use crate::error::{input, Result};
use crate::geometry::PointCloud;
use crate::par;

/// Radial bump: `(Cδ)^-d` on `B(3Cδ)`, linear descent to zero at `4Cδ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub c: f64,
    pub delta: f64,
}

/// Surface area of the unit sphere `S^(d-1)` in R^d.
pub fn sphere_area(d: usize) -> f64 {
    // |S^0| = 2, |S^1| = 2π, |S^(d+1)| = 2π |S^(d-1)| / d.
    match d {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 2.0 * std::f64::consts::PI * sphere_area(d - 2) / (d - 2) as f64,
    }
}

impl MollifierSpec {
    pub fn new(c: f64, delta: f64) -> Result<Self> {
        if !(c >= 1.0) || !(delta > 0.0) {
            return input("need C >= 1 and delta > 0");
        }
        Ok(MollifierSpec { c, delta })
    }

    /// `Cδ`.
    pub fn scale(&self) -> f64 {
        self.c * self.delta
    }

    pub fn support_radius(&self) -> f64 {
        4.0 * self.scale()
    }

    /// Profile value at distance `r` from the center in R^d.
    pub fn profile(&self, r: f64, d: usize) -> f64 {
        let a = self.scale();
        let top = a.powi(-(d as i32));
        if r <= 3.0 * a {
            top
        } else if r < 4.0 * a {
            top * (4.0 - r / a)
        } else {
            0.0
        }
    }

    /// `(Cδ)^(-d-1)`.
    pub fn lipschitz_bound(&self, d: usize) -> f64 {
        self.scale().powi(-(d as i32) - 1)
    }

    /// Exact integral of the profile over R^d (independent of `Cδ`).
    pub fn profile_mass(d: usize) -> f64 {
        let df = d as f64;
        let plateau = 3f64.powi(d as i32) / df;
        let taper = 4.0 * (4f64.powi(d as i32) - 3f64.powi(d as i32)) / df
            - (4f64.powi(d as i32 + 1) - 3f64.powi(d as i32 + 1)) / (df + 1.0);
        sphere_area(d) * (plateau + taper)
    }
}

/// `μ(y) = |P|^-1 Σ_p φ_δ(p - y)` sampled on a lattice of spacing `h` that
/// covers every support ball.
pub fn mollify_point_cloud(points: &PointCloud, spec: &MollifierSpec, h: f64) -> Result<GridMeasure> {
    if points.is_empty() {
        return input("cannot mollify an empty point set");
    }
    if !(h > 0.0) || h > spec.scale() / 4.0 {
        return input(format!("lattice spacing {h} is coarser than C delta / 4 = {}", spec.scale() / 4.0));
    }
    let d = points.d();
    let reach = spec.support_radius();
    let (lo, hi) = points.bounding_box();
    let origin: Vec<f64> = lo.iter().map(|x| x - reach - h).collect();
    let shape: Vec<usize> = (0..d)
        .map(|a| ((hi[a] + reach + h - origin[a]) / h).ceil() as usize + 1)
        .collect();
    let mut mu = GridMeasure::zeros(h, origin.clone(), shape.clone())?;
    let strides = mu.strides().to_vec();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points.point(a)[0].total_cmp(&points.point(b)[0]).then(a.cmp(&b)));
    let first: Vec<f64> = order.iter().map(|&i| points.point(i)[0]).collect();
    let weight = 1.0 / points.len() as f64;
    let slab = strides[0];
    par::for_each_chunk_mut(mu.values_mut(), slab, |i0, chunk| {
        let x0 = origin[0] + h * i0 as f64;
        let start = first.partition_point(|&p| p < x0 - reach);
        let end = first.partition_point(|&p| p <= x0 + reach);
        for &pi in &order[start..end] {
            let p = points.point(pi);
            if d == 1 {
                chunk[0] += weight * spec.profile((x0 - p[0]).abs(), d);
                continue;
            }
            let lo_i: Vec<usize> = (1..d)
                .map(|a| ((p[a] - reach - origin[a]) / h).ceil().max(0.0) as usize)
                .collect();
            let hi_i: Vec<usize> = (1..d)
                .map(|a| (((p[a] + reach - origin[a]) / h).floor() as usize).min(shape[a] - 1))
                .collect();
            let mut idx = lo_i.clone();
            loop {
                let mut r2 = (x0 - p[0]) * (x0 - p[0]);
                let mut lin = 0;
                for a in 1..d {
                    let y = origin[a] + h * idx[a - 1] as f64 - p[a];
                    r2 += y * y;
                    lin += idx[a - 1] * strides[a];
                }
                let v = spec.profile(r2.sqrt(), d);
                if v > 0.0 {
                    chunk[lin] += weight * v;
                }
                let mut a = d - 1;
                let done = loop {
                    if a == 0 {
                        break true;
                    }
                    a -= 1;
                    idx[a] += 1;
                    if idx[a] <= hi_i[a] {
                        break false;
                    }
                    idx[a] = lo_i[a];
                };
                if done {
                    break;
                }
            }
        }
    });
    Ok(mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn profile_mass_matches_quadrature() {
        let spec = MollifierSpec::new(1.0, 1.0 / 16.0).unwrap();
        let p = PointCloud::new(2, vec![0.0, 0.0], 0.0, 0.0).unwrap();
        let mu = mollify_point_cloud(&p, &spec, spec.scale() / 32.0).unwrap();
        assert_relative_eq!(mu.total_mass(), MollifierSpec::profile_mass(2), max_relative = 2e-3);
        assert_relative_eq!(MollifierSpec::profile_mass(2), 37.0 * std::f64::consts::PI / 3.0, max_relative = 1e-12);
        assert_relative_eq!(sphere_area(3), 4.0 * std::f64::consts::PI, max_relative = 1e-12);
    }

    #[test]
    fn spacing_is_checked() {
        let spec = MollifierSpec::new(1.0, 0.1).unwrap();
        let p = PointCloud::new(2, vec![0.0, 0.0], 0.0, 0.0).unwrap();
        assert!(mollify_point_cloud(&p, &spec, 0.05).is_err());
        assert!(MollifierSpec::new(0.5, 0.1).is_err());
    }
}
