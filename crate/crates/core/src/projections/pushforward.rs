use serde::{Deserialize, Serialize};

use super::grid::row_major_strides;
use super::GridMeasure;
use crate::error::{input, Result};
use crate::geometry::{sample_grassmannian, AffinePlane};
use crate::par;
use crate::stats::mean_se;

/// Density of an orthogonal-projection pushforward, sampled on a lattice in
/// the coordinates of `plane`'s basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedDensity {
    pub plane: AffinePlane,
    pub h: f64,
    pub origin: Vec<f64>,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Anything stored as values on a uniform lattice.
pub trait LatticeFunction {
    fn lattice_values(&self) -> &[f64];
    fn lattice_spacing(&self) -> f64;
    fn lattice_dim(&self) -> usize;
}

impl LatticeFunction for ProjectedDensity {
    fn lattice_values(&self) -> &[f64] {
        &self.values
    }
    fn lattice_spacing(&self) -> f64 {
        self.h
    }
    fn lattice_dim(&self) -> usize {
        self.shape.len()
    }
}

impl LatticeFunction for GridMeasure {
    fn lattice_values(&self) -> &[f64] {
        self.values()
    }
    fn lattice_spacing(&self) -> f64 {
        self.h()
    }
    fn lattice_dim(&self) -> usize {
        self.d()
    }
}

/// `(h^n Σ |f|^p)^(1/p)`.
pub fn lp_norm<F: LatticeFunction + ?Sized>(f: &F, p: f64) -> Result<f64> {
    Ok(lp_norm_pow(f, p)?.powf(1.0 / p))
}

/// `h^n Σ |f|^p`, the p-th power of [`lp_norm`].
pub fn lp_norm_pow<F: LatticeFunction + ?Sized>(f: &F, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return input(format!("need p >= 1, got {p}"));
    }
    let v = f.lattice_values();
    let vol = f.lattice_spacing().powi(f.lattice_dim() as i32);
    Ok(par::sum_range(v.len(), |i| v[i].abs().powf(p)) * vol)
}

impl ProjectedDensity {
    pub fn n(&self) -> usize {
        self.shape.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.h.powi(self.n() as i32)
    }

    /// Lattice coordinates of the projection of `x`.
    pub fn coordinates(&self, x: &[f64]) -> Vec<f64> {
        self.plane.coordinates(x)
    }

    /// Multilinear interpolation at plane coordinates `t`; zero outside.
    pub fn value_at(&self, t: &[f64]) -> f64 {
        let n = self.n();
        if n == 1 {
            let u = (t[0] - self.origin[0]) / self.h;
            let last = (self.shape[0] - 1) as f64;
            if !(u >= 0.0) || u > last {
                return 0.0;
            }
            let i = u.floor().min((last - 1.0).max(0.0));
            let f = u - i;
            let i = i as usize;
            let next = if f > 0.0 { self.values[i + 1] } else { 0.0 };
            return (1.0 - f) * self.values[i] + f * next;
        }
        let mut strides = [0usize; 8];
        strides[n - 1] = 1;
        for a in (0..n - 1).rev() {
            strides[a] = strides[a + 1] * self.shape[a + 1];
        }
        let mut base = 0;
        let mut frac = [0.0f64; 8];
        for a in 0..n {
            let u = (t[a] - self.origin[a]) / self.h;
            let last = (self.shape[a] - 1) as f64;
            if !(u >= 0.0) || u > last {
                return 0.0;
            }
            let i = u.floor().min((last - 1.0).max(0.0));
            frac[a] = u - i;
            base += i as usize * strides[a];
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut lin = base;
            for a in 0..n {
                if corner >> a & 1 == 1 {
                    w *= frac[a];
                    lin += strides[a];
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
}

/// Nodes handled per task when splatting; fixed so results do not depend on threads.
const SPLAT_BLOCK: usize = 1 << 18;

/// How a node's mass is spread over the target lattice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Splat {
    /// Multilinear weights on the `2^n` surrounding nodes.
    Linear,
    /// Tensor cubic B-spline on `4^n` nodes. Less aliasing at rational slopes,
    /// twice the smoothing.
    #[default]
    Cubic,
}

impl Splat {
    fn taps(self) -> usize {
        match self {
            Splat::Linear => 2,
            Splat::Cubic => 4,
        }
    }

    fn weights(self, f: f64, w: &mut [f64; 4]) {
        match self {
            Splat::Linear => {
                w[0] = 1.0 - f;
                w[1] = f;
            }
            Splat::Cubic => {
                let (f2, f3) = (f * f, f * f * f);
                let g = 1.0 - f;
                w[0] = g * g * g / 6.0;
                w[1] = (3.0 * f3 - 6.0 * f2 + 4.0) / 6.0;
                w[2] = (-3.0 * f3 + 3.0 * f2 + 3.0 * f + 1.0) / 6.0;
                w[3] = f3 / 6.0;
            }
        }
    }
}

/// Pushes `mu` forward under orthogonal projection onto the linear subspace `v`.
///
/// Each node's mass is spread by cubic B-spline weights over the `4^n` target
/// nodes around its projected coordinate, so mass is conserved exactly (up to
/// rounding). See [`project_measure_with`] for the multilinear kernel.
pub fn project_measure(mu: &GridMeasure, v: &AffinePlane) -> Result<ProjectedDensity> {
    project_measure_with(mu, v, Splat::Cubic)
}

/// [`project_measure`] with a choice of splatting kernel.
pub fn project_measure_with(mu: &GridMeasure, v: &AffinePlane, splat: Splat) -> Result<ProjectedDensity> {
    if v.d() != mu.d() {
        return input("subspace and measure live in different dimensions");
    }
    if !v.is_linear() {
        return input("projection target must be a linear subspace");
    }
    let d = mu.d();
    let n = v.n();
    if n > 4 {
        return input("projection targets of dimension above 4 are not supported");
    }
    let h = mu.h();
    let taps = splat.taps();
    let lead = taps / 2 - 1;
    let upper = mu.upper();
    let mut tmin = vec![0.0; n];
    let mut tmax = vec![0.0; n];
    for k in 0..n {
        let b = v.basis_vector(k);
        for a in 0..d {
            let (p, q) = (b[a] * mu.origin()[a], b[a] * upper[a]);
            tmin[k] += p.min(q);
            tmax[k] += p.max(q);
        }
    }
    let pad = (lead + 1) as f64 * h;
    let origin: Vec<f64> = tmin.iter().map(|t| (t / h).floor() * h - pad).collect();
    let shape: Vec<usize> = (0..n)
        .map(|k| ((tmax[k] - origin[k]) / h).ceil() as usize + taps)
        .collect();
    let strides = row_major_strides(&shape);
    let target_len: usize = shape.iter().product();
    let values = mu.values();
    let row = mu.shape()[d - 1];
    let rows = values.len() / row;
    let rows_per_block = (SPLAT_BLOCK / row).max(1);
    let blocks = rows.div_ceil(rows_per_block);
    let basis: Vec<f64> = v.basis_flat().to_vec();
    let step: Vec<f64> = (0..n).map(|k| basis[k * d + d - 1] * h).collect();
    let cell = mu.cell_volume() / h.powi(n as i32);
    let corners = taps.pow(n as u32);
    let partial: Vec<Vec<f64>> = par::map_range(blocks, |bi| {
        let mut local = vec![0.0; target_len];
        let mut t0 = vec![0.0; n];
        let mut w = [[0.0f64; 4]; 4];
        for r in bi * rows_per_block..((bi + 1) * rows_per_block).min(rows) {
            let vals = &values[r * row..(r + 1) * row];
            if vals.iter().all(|&x| x == 0.0) {
                continue;
            }
            let x0 = mu.node(r * row);
            for k in 0..n {
                t0[k] = (0..d).map(|a| basis[k * d + a] * x0[a]).sum::<f64>() - origin[k];
            }
            for (j, &val) in vals.iter().enumerate() {
                if val == 0.0 {
                    continue;
                }
                let m = val * cell;
                let mut lin = 0;
                for k in 0..n {
                    let u = (t0[k] + step[k] * j as f64) / h;
                    let i = u.floor();
                    splat.weights(u - i, &mut w[k]);
                    lin += (i as usize - lead) * strides[k];
                }
                if n == 1 {
                    for (t, wt) in w[0][..taps].iter().enumerate() {
                        local[lin + t] += m * wt;
                    }
                    continue;
                }
                for corner in 0..corners {
                    let mut wt = m;
                    let mut l = lin;
                    let mut c = corner;
                    for k in 0..n {
                        let t = c % taps;
                        c /= taps;
                        wt *= w[k][t];
                        l += t * strides[k];
                    }
                    local[l] += wt;
                }
            }
        }
        local
    });
    let mut out = vec![0.0; target_len];
    for block in &partial {
        for (o, x) in out.iter_mut().zip(block) {
            *o += x;
        }
    }
    Ok(ProjectedDensity {
        plane: v.clone(),
        h,
        origin,
        shape,
        values: out,
    })
}

/// How the Grassmannian integral picks its planes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PlaneSampling {
    /// Independent draws from the invariant measure.
    Random { count: usize, seed: u64 },
    /// Lines at angles `π (i + phase) / count` (d = 2, n = 1 only).
    Equispaced { count: usize, phase: f64 },
}

impl PlaneSampling {
    pub fn count(&self) -> usize {
        match *self {
            PlaneSampling::Random { count, .. } | PlaneSampling::Equispaced { count, .. } => count,
        }
    }

    /// Realizes the plane set in G(d, n).
    pub fn planes(&self, d: usize, n: usize) -> Result<Vec<AffinePlane>> {
        match *self {
            PlaneSampling::Random { count, seed } => sample_grassmannian(d, n, count, seed),
            PlaneSampling::Equispaced { count, phase } => {
                if d != 2 || n != 1 {
                    return input("equispaced planes exist only for lines in the plane");
                }
                if count == 0 {
                    return input("need at least one plane");
                }
                Ok((0..count)
                    .map(|i| AffinePlane::line2(std::f64::consts::PI * (i as f64 + phase) / count as f64, 0.0))
                    .collect())
            }
        }
    }
}

/// Monte Carlo mean with its standard error and the per-sample values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub values: Vec<f64>,
}

impl McEstimate {
    pub fn from_values(values: Vec<f64>) -> Self {
        let (mean, std_error) = mean_se(&values);
        McEstimate { mean, std_error, values }
    }
}

/// Average of `‖π_V μ‖_p^p` over sampled n-planes `V`.
pub fn projection_lp_integral(mu: &GridMeasure, n: usize, p: f64, sampling: PlaneSampling) -> Result<McEstimate> {
    if sampling.count() < 2 {
        return input("need at least two planes");
    }
    if !(p >= 1.0) {
        return input("need p >= 1");
    }
    let planes = sampling.planes(mu.d(), n)?;
    let values: Vec<Result<f64>> = planes
        .iter()
        .map(|v| project_measure(mu, v).and_then(|g| lp_norm_pow(&g, p)))
        .collect();
    Ok(McEstimate::from_values(values.into_iter().collect::<Result<Vec<_>>>()?))
}

/// Contribution of the lines within metric distance `radius` of the line at
/// angle `axis` (d = 2, n = 1) to the Grassmannian L^p integral.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RestrictedContribution {
    /// Invariant measure of the neighbourhood, `2 asin(radius) / π`.
    pub weight: f64,
    /// Mean of `‖π_V μ‖_p^p` over `count` equispaced angles in the neighbourhood.
    pub mean_norm_pow: f64,
    /// `weight * mean_norm_pow`.
    pub contribution: f64,
}

pub fn restricted_lp_contribution(mu: &GridMeasure, axis: f64, radius: f64, p: f64, count: usize) -> Result<RestrictedContribution> {
    if mu.d() != 2 {
        return input("restricted contribution is implemented for d = 2");
    }
    if !(radius > 0.0 && radius <= 1.0) || count == 0 {
        return input("need 0 < radius <= 1 and count >= 1");
    }
    let half = radius.asin();
    let mut vals = Vec::with_capacity(count);
    for i in 0..count {
        let theta = axis - half + 2.0 * half * (i as f64 + 0.5) / count as f64;
        let g = project_measure(mu, &AffinePlane::line2(theta, 0.0))?;
        vals.push(lp_norm_pow(&g, p)?);
    }
    let mean = vals.iter().sum::<f64>() / count as f64;
    let weight = 2.0 * half / std::f64::consts::PI;
    Ok(RestrictedContribution {
        weight,
        mean_norm_pow: mean,
        contribution: weight * mean,
    })
}
