use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mollify::sphere_area;
use super::pushforward::{lp_norm_pow, project_measure_with, PlaneSampling, Splat};
use super::GridMeasure;
use crate::error::{input, Result};
use crate::geometry::{orthocomplement, random_orthogonal, AffinePlane};
use crate::par;
use crate::rng::{derive_seed, indexed_rng};
use crate::stats::mean_se;

/// `μ_x(V) = ∫_{x+V} μ dH^n`, by a lattice sum of spacing `h` along the plane
/// with multilinear interpolation of `μ`.
pub fn radial_slice_density(mu: &GridMeasure, x: &[f64], v: &AffinePlane) -> Result<f64> {
    if x.len() != mu.d() || v.d() != mu.d() {
        return input("dimension mismatch");
    }
    if !v.is_linear() {
        return input("slice direction must be a linear subspace");
    }
    Ok(slice_sum(mu, x, v))
}

fn slice_sum(mu: &GridMeasure, x: &[f64], v: &AffinePlane) -> f64 {
    let d = mu.d();
    let n = v.n();
    let h = mu.h();
    let lo = mu.origin();
    let hi = mu.upper();
    if n == 1 {
        // Clip the line x + t b to the lattice box.
        let b = v.basis_vector(0);
        let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
        for a in 0..d {
            if b[a].abs() < 1e-15 {
                if x[a] < lo[a] || x[a] > hi[a] {
                    return 0.0;
                }
                continue;
            }
            let (p, q) = ((lo[a] - x[a]) / b[a], (hi[a] - x[a]) / b[a]);
            t0 = t0.max(p.min(q));
            t1 = t1.min(p.max(q));
        }
        if t0 > t1 {
            return 0.0;
        }
        let (j0, j1) = ((t0 / h).ceil() as i64, (t1 / h).floor() as i64);
        let mut y = vec![0.0; d];
        let mut acc = 0.0;
        for j in j0..=j1 {
            let t = j as f64 * h;
            for a in 0..d {
                y[a] = x[a] + t * b[a];
            }
            acc += mu.value_at(&y);
        }
        return acc * h;
    }
    let reach = (0..d)
        .map(|a| (x[a] - lo[a]).abs().max((hi[a] - x[a]).abs()).powi(2))
        .sum::<f64>()
        .sqrt();
    let m = (reach / h).ceil() as i64;
    let mut idx = vec![-m; n];
    let mut y = vec![0.0; d];
    let mut acc = 0.0;
    loop {
        y.copy_from_slice(x);
        for (k, &i) in idx.iter().enumerate() {
            let b = v.basis_vector(k);
            for a in 0..d {
                y[a] += i as f64 * h * b[a];
            }
        }
        acc += mu.value_at(&y);
        let mut k = n;
        loop {
            if k == 0 {
                return acc * h.powi(n as i32);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] <= m {
                break;
            }
            idx[k] = -m;
        }
    }
}

/// Sampling budget for [`radial_identity_check`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RadialConfig {
    pub n: usize,
    /// Number of (x, V) pairs.
    pub samples: usize,
    /// Size of the plane set shared by both sides.
    pub planes: usize,
    pub seed: u64,
    /// Kernel for the projections on the right side and in the control variate.
    pub splat: Splat,
}

impl Default for RadialConfig {
    fn default() -> Self {
        RadialConfig {
            n: 1,
            samples: 10_000,
            planes: 360,
            seed: 0,
            splat: Splat::Cubic,
        }
    }
}

/// Both sides of `∫ ‖μ_x‖_q^q dμ(x) = ∫ ‖π_{V⊥} μ‖_{q+1}^{q+1} dγ(V)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadialIdentityReport {
    pub q: f64,
    /// Control-variate estimate of the left side.
    pub lhs: f64,
    pub lhs_se: f64,
    /// Plain Monte Carlo estimate of the left side.
    pub lhs_plain: f64,
    pub lhs_plain_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub relative_error: f64,
}

/// Estimates both sides of the radial/orthogonal identity.
///
/// Planes: for `d = 2, n = 1`, `planes` equispaced angles with a random phase;
/// otherwise independent invariant draws. Sample `i` pairs a point drawn from
/// `μ` (stratified over the lattice masses) with plane `i mod planes`.
///
/// Right side: mean over planes of `‖π_{V⊥} μ‖_{q+1}^{q+1}` from the lattice
/// pushforward. Left side: `μ_x(V)^q` by quadrature along `x + V`, with the
/// control variate `c(x, V) = (π_{V⊥} μ)(π_{V⊥} x)^q`, whose mean over
/// `x ∼ μ` is summed exactly over the lattice for every plane.
pub fn radial_identity_check(mu: &GridMeasure, q: f64, cfg: &RadialConfig) -> Result<RadialIdentityReport> {
    validate_radial(mu, q, cfg, cfg.samples)?;
    let mut rng = indexed_rng(derive_seed(cfg.seed, "radial"), 0);
    let planes = radial_planes(mu.d(), cfg, &mut rng)?;

    // Stratified node draws from μ.
    let values = mu.values();
    let mut cum = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for v in values {
        acc += v;
        cum.push(acc);
    }
    let mut strata: Vec<usize> = (0..cfg.samples).collect();
    strata.shuffle(&mut rng);
    let xs: Vec<Vec<f64>> = strata
        .iter()
        .map(|&s| {
            let u = (s as f64 + rng.random::<f64>()) / cfg.samples as f64 * acc;
            mu.node(cum.partition_point(|&c| c <= u).min(values.len() - 1))
        })
        .collect();
    Ok(radial_core(mu, &[q], &planes, &xs, cfg.splat)?.remove(0))
}

/// As [`radial_identity_check`] for several exponents at once, with
/// caller-supplied draws `xs` from `μ`.
///
/// Reusing one set of draws across lattice refinements makes the residual
/// term shrink with the lattice spacing instead of being redrawn at each level.
pub fn radial_identity_check_at(mu: &GridMeasure, qs: &[f64], cfg: &RadialConfig, xs: &[Vec<f64>]) -> Result<Vec<RadialIdentityReport>> {
    if qs.is_empty() {
        return input("need at least one exponent");
    }
    for &q in qs {
        validate_radial(mu, q, cfg, xs.len())?;
    }
    if xs.iter().any(|x| x.len() != mu.d()) {
        return input("sample points have the wrong dimension");
    }
    let mut rng = indexed_rng(derive_seed(cfg.seed, "radial"), 0);
    let planes = radial_planes(mu.d(), cfg, &mut rng)?;
    radial_core(mu, qs, &planes, xs, cfg.splat)
}

fn validate_radial(mu: &GridMeasure, q: f64, cfg: &RadialConfig, samples: usize) -> Result<()> {
    if cfg.n == 0 || cfg.n >= mu.d() {
        return input("need 0 < n < d");
    }
    if !(q >= 1.0) {
        return input("need q >= 1");
    }
    if samples < 2 || cfg.planes < 2 {
        return input("need at least two samples and two planes");
    }
    if !(mu.total_mass() > 0.0) {
        return input("measure has zero mass");
    }
    Ok(())
}

fn radial_planes<R: Rng>(d: usize, cfg: &RadialConfig, rng: &mut R) -> Result<Vec<AffinePlane>> {
    let sampling = if d == 2 && cfg.n == 1 {
        PlaneSampling::Equispaced {
            count: cfg.planes,
            phase: rng.random::<f64>(),
        }
    } else {
        PlaneSampling::Random {
            count: cfg.planes,
            seed: derive_seed(cfg.seed, "radial-planes"),
        }
    };
    sampling.planes(d, cfg.n)
}

fn radial_core(mu: &GridMeasure, qs: &[f64], planes: &[AffinePlane], xs: &[Vec<f64>], splat: Splat) -> Result<Vec<RadialIdentityReport>> {
    let d = mu.d();
    let nq = qs.len();
    let mass = mu.total_mass();
    let values = mu.values();
    let perps: Vec<AffinePlane> = planes.iter().map(orthocomplement).collect::<Result<_>>()?;
    // Per plane: projected density, its L^{q+1} norms, and the exact control means.
    let cell = mu.cell_volume();
    let per_plane: Vec<Result<(super::ProjectedDensity, Vec<f64>, Vec<f64>)>> = perps
        .iter()
        .map(|perp| {
            let g = project_measure_with(mu, perp, splat)?;
            let norms = qs.iter().map(|q| lp_norm_pow(&g, q + 1.0)).collect::<Result<Vec<_>>>()?;
            let row = mu.shape()[d - 1];
            let step: Vec<f64> = (0..perp.n()).map(|k| perp.basis_vector(k)[d - 1] * mu.h()).collect();
            let cmeans = (0..nq)
                .map(|qi| {
                    let q = qs[qi];
                    par::sum_range(values.len() / row, |r| {
                        let vals = &values[r * row..(r + 1) * row];
                        if vals.iter().all(|&v| v == 0.0) {
                            return 0.0;
                        }
                        let mut t = g.coordinates(&mu.node(r * row));
                        let mut acc = 0.0;
                        for &v in vals {
                            if v != 0.0 {
                                acc += v * g.value_at(&t).powf(q);
                            }
                            for (tk, sk) in t.iter_mut().zip(&step) {
                                *tk += sk;
                            }
                        }
                        acc
                    }) * cell
                        / mass
                })
                .collect();
            Ok((g, norms, cmeans))
        })
        .collect();
    let per_plane: Vec<_> = per_plane.into_iter().collect::<Result<_>>()?;

    let pairs: Vec<(f64, f64)> = par::map_range(xs.len(), |i| {
        let a = i % planes.len();
        let x = &xs[i];
        let g = &per_plane[a].0;
        (slice_sum(mu, x, &planes[a]), g.value_at(&g.coordinates(x)))
    });
    Ok((0..nq)
        .map(|qi| {
            let q = qs[qi];
            let plain: Vec<f64> = pairs.iter().map(|p| p.0.powf(q) * mass).collect();
            let resid: Vec<f64> = pairs.iter().map(|p| (p.0.powf(q) - p.1.powf(q)) * mass).collect();
            let (lhs_plain, lhs_plain_se) = mean_se(&plain);
            let (resid_mean, lhs_se) = mean_se(&resid);
            let control = per_plane.iter().map(|p| p.2[qi]).sum::<f64>() / planes.len() as f64 * mass;
            let norms: Vec<f64> = per_plane.iter().map(|p| p.1[qi]).collect();
            let (rhs, rhs_se) = mean_se(&norms);
            let lhs = control + resid_mean;
            RadialIdentityReport {
                q,
                lhs,
                lhs_se,
                lhs_plain,
                lhs_plain_se,
                rhs,
                rhs_se,
                relative_error: (lhs - rhs).abs() / rhs.abs(),
            }
        })
        .collect())
}

/// A compactly supported scalar function on R^d.
pub trait ScalarField: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
    /// Radius of a centered ball containing the support.
    fn support_radius(&self) -> f64;
}

impl ScalarField for GridMeasure {
    fn dim(&self) -> usize {
        self.d()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.value_at(x)
    }
    fn support_radius(&self) -> f64 {
        let lo = self.origin();
        let hi = self.upper();
        (0..self.d())
            .map(|a| lo[a].abs().max(hi[a].abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Closure-backed field.
pub struct FnField<F> {
    pub d: usize,
    pub radius: f64,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> ScalarField for FnField<F> {
    fn dim(&self) -> usize {
        self.d
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn support_radius(&self) -> f64 {
        self.radius
    }
}

/// Rotations used on the left side of the Mattila identity.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum RotationSampling {
    /// Haar-random elements of O(d).
    Haar { count: usize, seed: u64 },
    /// Rotations by `2π i / count` (d = 2 only).
    Equispaced { count: usize },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MattilaConfig {
    pub n: usize,
    pub rotations: RotationSampling,
    /// Quadrature spacing on R^n (left side) and R^d (right side).
    pub h: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MattilaReport {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    /// `lhs / rhs`, absent when the right side vanishes.
    pub ratio: Option<f64>,
    /// `|S^(n-1)| / |S^(d-1)|`.
    pub predicted: f64,
}

/// `c(d, n) = |S^(n-1)| / |S^(d-1)|` (polar coordinates).
pub fn mattila_constant(d: usize, n: usize) -> f64 {
    sphere_area(n) / sphere_area(d)
}

/// Midpoint lattice sum of `g` over the cube `[-r, r]^m` with spacing about `h`.
fn cube_sum(m: usize, r: f64, h: f64, g: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
    let k = (2.0 * r / h).ceil().max(1.0) as usize;
    let step = 2.0 * r / k as f64;
    let rows = k.pow(m as u32 - 1);
    let total = par::sum_range(rows, |row| {
        let mut x = vec![0.0; m];
        let mut rem = row;
        for a in (0..m - 1).rev() {
            x[a] = -r + (rem % k) as f64 * step + step / 2.0;
            rem /= k;
        }
        let mut acc = 0.0;
        for j in 0..k {
            x[m - 1] = -r + j as f64 * step + step / 2.0;
            acc += g(&x);
        }
        acc
    });
    total * step.powi(m as i32)
}

/// Compares `∫_{O(d)} ∫_{R^n} |x|^(d-n) f(g x) dx dg` with `∫_{R^d} f`.
pub fn mattila_identity_check<F: ScalarField + ?Sized>(f: &F, cfg: &MattilaConfig) -> Result<MattilaReport> {
    let d = f.dim();
    let n = cfg.n;
    if n == 0 || n >= d {
        return input("need 0 < n < d");
    }
    if !(cfg.h > 0.0) {
        return input("quadrature spacing must be positive");
    }
    let r = f.support_radius();
    let rotations: Vec<Vec<f64>> = match cfg.rotations {
        RotationSampling::Haar { count, seed } => {
            if count < 2 {
                return input("need at least two rotations");
            }
            par::map_range(count, |i| random_orthogonal(&mut indexed_rng(seed, i as u64), d))
        }
        RotationSampling::Equispaced { count } => {
            if d != 2 || count == 0 {
                return input("equispaced rotations need d = 2 and count >= 1");
            }
            (0..count)
                .map(|i| {
                    let (s, c) = (2.0 * std::f64::consts::PI * i as f64 / count as f64).sin_cos();
                    vec![c, -s, s, c]
                })
                .collect()
        }
    };
    let inner: Vec<f64> = rotations
        .iter()
        .map(|g| {
            cube_sum(n, r, cfg.h, |x| {
                let len2: f64 = x.iter().map(|v| v * v).sum();
                if len2 > r * r {
                    return 0.0;
                }
                // g (x, 0): combination of the first n columns.
                let y: Vec<f64> = (0..d)
                    .map(|i| (0..n).map(|k| g[i * d + k] * x[k]).sum())
                    .collect();
                len2.powf((d - n) as f64 / 2.0) * f.eval(&y)
            })
        })
        .collect();
    let (lhs, lhs_se) = mean_se(&inner);
    let rhs = cube_sum(d, r, cfg.h, |x| f.eval(x));
    let ratio = if rhs.abs() > 1e-300 { Some(lhs / rhs) } else { None };
    Ok(MattilaReport {
        lhs,
        lhs_se,
        rhs,
        ratio,
        predicted: mattila_constant(d, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_slice_of_unit_square() {
        let h = 1.0 / 128.0;
        let mu = GridMeasure::from_fn(h, vec![0.0, 0.0], vec![129, 129], |_| 1.0).unwrap();
        let v = AffinePlane::line2(0.0, 0.0);
        assert_abs_diff_eq!(radial_slice_density(&mu, &[0.5, 0.5], &v).unwrap(), 1.0, epsilon = 2.0 * h);
        assert_eq!(radial_slice_density(&mu, &[0.5, 3.0], &v).unwrap(), 0.0);
    }

    #[test]
    fn zero_field() {
        let f = FnField { d: 2, radius: 1.0, f: |_: &[f64]| 0.0 };
        let cfg = MattilaConfig {
            n: 1,
            rotations: RotationSampling::Equispaced { count: 8 },
            h: 0.05,
        };
        let rep = mattila_identity_check(&f, &cfg).unwrap();
        assert_eq!((rep.lhs, rep.rhs, rep.ratio), (0.0, 0.0, None));
        assert_abs_diff_eq!(mattila_constant(2, 1), 1.0 / std::f64::consts::PI, epsilon = 1e-15);
    }
}
