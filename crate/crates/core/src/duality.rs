//! Point/hyperplane duality `D(x) = {(y, <x', y> + x_d)}` and its partial inverse.

use std::collections::HashMap;

use num_traits::Num;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constants::R_D;
use crate::error::{input, Error, Result};
use crate::geometry::{dist, dist_point_plane, grassmann_distance, AffinePlane, PlaneFamily, PointCloud};
use crate::par;
use crate::rng::indexed_rng;

/// Normals with `|ν_d|` below this are treated as vertical.
pub const VERTICAL_TOL: f64 = 1e-12;

/// Ambient dimension plus the radius `r_d` of the ball around `V_0` on which `D*` is used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityContext {
    pub d: usize,
    pub r_d: f64,
}

impl DualityContext {
    /// Uses the frozen calibrated radius.
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return input("duality needs d >= 2");
        }
        Ok(DualityContext { d, r_d: R_D })
    }

    pub fn with_radius(d: usize, r_d: f64) -> Result<Self> {
        if d < 2 || !(r_d > 0.0 && r_d < 1.0) {
            return input("need d >= 2 and 0 < r_d < 1");
        }
        Ok(DualityContext { d, r_d })
    }

    /// The horizontal hyperplane `V_0 = D(0)`.
    pub fn v0(&self) -> AffinePlane {
        dual_plane(&vec![0.0; self.d])
    }

    /// Binary search for the largest `r` such that every sampled plane in
    /// `B(V_0, r)` has its preimage in `B(1)`; returns half of it.
    pub fn calibrate(d: usize, samples: usize, seed: u64) -> Result<Self> {
        if d < 2 || samples == 0 {
            return input("need d >= 2 and at least one sample");
        }
        // Every plane within distance 0.9 of V_0 has graph coefficients in B(3).
        const SEARCH_MAX: f64 = 0.9;
        const SAMPLE_RADIUS: f64 = 3.0;
        let v0 = dual_plane(&vec![0.0; d]);
        let drawn: Vec<(f64, f64)> = par::map_range(samples, |i| {
            let mut rng = indexed_rng(seed, i as u64);
            let x = uniform_in_ball(&mut rng, d, SAMPLE_RADIUS);
            let dv = grassmann_distance(&dual_plane(&x), &v0).expect("same dims");
            (dv, x.iter().map(|c| c * c).sum::<f64>().sqrt())
        });
        let ok = |r: f64| drawn.iter().all(|&(dv, nx)| dv > r || nx <= 1.0);
        let (mut lo, mut hi) = (0.0, SEARCH_MAX);
        if ok(hi) {
            lo = hi;
        }
        for _ in 0..60 {
            if hi - lo < 1e-12 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        DualityContext::with_radius(d, 0.5 * lo)
    }

    /// Checks `d_A(V, V_0) <= r_d`.
    pub fn contains(&self, v: &AffinePlane) -> Result<bool> {
        Ok(grassmann_distance(v, &self.v0())? <= self.r_d)
    }
}

fn uniform_in_ball<R: Rng>(rng: &mut R, d: usize, radius: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-radius..radius)).collect();
        if x.iter().map(|c| c * c).sum::<f64>() <= radius * radius {
            return x;
        }
    }
}

/// `D(x)`: the graph hyperplane `{z : z_d = <x', z'> + x_d}`.
pub fn dual_plane(x: &[f64]) -> AffinePlane {
    let d = x.len();
    assert!(d >= 2, "dual_plane needs d >= 2");
    let mut normal = x[..d - 1].to_vec();
    normal.push(-1.0);
    AffinePlane::hyperplane(&normal, -x[d - 1]).expect("normal has last coordinate -1")
}

/// Graph coefficients `x` with `V = D(x)`.
pub fn graph_coefficients(v: &AffinePlane) -> Result<Vec<f64>> {
    let d = v.d();
    if v.n() + 1 != d {
        return input("duality is defined for hyperplanes only");
    }
    let nu = v.unit_normal()?;
    if nu[d - 1].abs() < VERTICAL_TOL {
        return Err(Error::Domain("plane contains a vertical direction and is not a graph".into()));
    }
    let scale = -1.0 / nu[d - 1];
    let w: Vec<f64> = nu.iter().map(|c| c * scale).collect();
    let level: f64 = w.iter().zip(v.offset()).map(|(a, b)| a * b).sum();
    let mut x = w[..d - 1].to_vec();
    x.push(-level);
    Ok(x)
}

/// `D*(V) = (-x_1, ..., -x_{d-1}, x_d)` where `V = D(x)`.
pub fn dual_point(v: &AffinePlane, ctx: &DualityContext) -> Result<Vec<f64>> {
    if v.d() != ctx.d {
        return input("plane dimension differs from the duality context");
    }
    let mut x = graph_coefficients(v)?;
    let d = x.len();
    for c in &mut x[..d - 1] {
        *c = -*c;
    }
    Ok(x)
}

/// Exact membership `z ∈ D(x)`.
pub fn exact_in_dual_plane<T: Num + Clone>(x: &[T], z: &[T]) -> bool {
    let d = x.len();
    let mut rhs = x[d - 1].clone();
    for i in 0..d - 1 {
        rhs = rhs + x[i].clone() * z[i].clone();
    }
    z[d - 1] == rhs
}

/// Exact `D*(D(x))`.
pub fn exact_dual_point<T: Num + Clone + std::ops::Neg<Output = T>>(x: &[T]) -> Vec<T> {
    let d = x.len();
    x.iter()
        .enumerate()
        .map(|(i, c)| if i + 1 < d { -c.clone() } else { c.clone() })
        .collect()
}

/// Exact check of `x ∈ V  <=>  D*(V) ∈ D(x)` for `V = D(c)`.
pub fn exact_incidence_equivalent<T: Num + Clone + std::ops::Neg<Output = T>>(x: &[T], c: &[T]) -> bool {
    exact_in_dual_plane(c, x) == exact_in_dual_plane(x, &exact_dual_point(c))
}

/// Ratio extremes of a map's distortion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distortion {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub pairs: usize,
}

impl Distortion {
    /// Smallest `L` with all ratios in `[1/L, L]`.
    pub fn constant(&self) -> f64 {
        self.max_ratio.max(1.0 / self.min_ratio)
    }

    fn from_ratios(r: &[f64]) -> Self {
        Distortion {
            min_ratio: r.iter().copied().fold(f64::INFINITY, f64::min),
            max_ratio: r.iter().copied().fold(0.0, f64::max),
            pairs: r.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub pairs: usize,
    pub incidence_tol: f64,
    pub incident_pairs: usize,
    pub incidence_mismatches: usize,
    pub factor3_violations: usize,
    /// Largest of `dist(x,V)/dist(D*V, Dx)` and its reciprocal over pairs with both distances positive.
    pub worst_factor: f64,
    pub plane_map: Distortion,
    pub point_map: Distortion,
}

const PAIR_CAP: usize = 20_000;
const PAIR_SEED: u64 = 0x6475_616c;

fn pair_list(m: usize) -> Vec<(usize, usize)> {
    if m < 2 {
        return Vec::new();
    }
    if m * (m - 1) / 2 <= PAIR_CAP {
        return (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    }
    par::map_range(PAIR_CAP, |k| {
        let mut rng = indexed_rng(PAIR_SEED, k as u64);
        let i = rng.random_range(0..m);
        let mut j = rng.random_range(0..m - 1);
        if j >= i {
            j += 1;
        }
        (i, j)
    })
}

fn check_inputs(points: &PointCloud, planes: &PlaneFamily, ctx: &DualityContext) -> Result<()> {
    if points.d() != ctx.d || planes.planes.iter().any(|v| v.d() != ctx.d || v.n() + 1 != ctx.d) {
        return input("points and hyperplanes must live in the context dimension");
    }
    if points.max_norm() > 2.0 {
        return Err(Error::Precondition("points must lie in B(2)".into()));
    }
    check_planes(planes, ctx)
}

fn check_planes(planes: &PlaneFamily, ctx: &DualityContext) -> Result<()> {
    for (i, v) in planes.planes.iter().enumerate() {
        if !ctx.contains(v)? {
            return Err(Error::Precondition(format!("plane {i} lies outside B(V_0, r_d)")));
        }
    }
    Ok(())
}

/// `|D(x) - D(y)|_A / |x - y|` over pairs of `points`.
pub fn plane_map_distortion(points: &PointCloud) -> Distortion {
    let pairs = pair_list(points.len());
    let ratios = par::map_range(pairs.len(), |k| {
        let (i, j) = pairs[k];
        let (x, y) = (points.point(i), points.point(j));
        grassmann_distance(&dual_plane(x), &dual_plane(y)).expect("same dims") / dist(x, y)
    });
    Distortion::from_ratios(&ratios)
}

/// `|D*V - D*W| / d_A(V, W)` over pairs of `planes`.
pub fn point_map_distortion(planes: &PlaneFamily, ctx: &DualityContext) -> Result<Distortion> {
    let duals: Vec<Vec<f64>> = planes.planes.iter().map(|v| dual_point(v, ctx)).collect::<Result<_>>()?;
    let pairs = pair_list(planes.len());
    let ratios = par::map_range(pairs.len(), |k| {
        let (i, j) = pairs[k];
        dist(&duals[i], &duals[j]) / grassmann_distance(&planes.planes[i], &planes.planes[j]).expect("same dims")
    });
    Ok(Distortion::from_ratios(&ratios))
}

/// Checks incidence preservation and the factor-3 comparison on all pairs `X × V`.
pub fn verify_duality_relations(points: &PointCloud, planes: &PlaneFamily, ctx: &DualityContext) -> Result<DualityReport> {
    check_inputs(points, planes, ctx)?;
    let tol = crate::geometry::COMPOSED_TOL;
    let duals_v: Vec<Vec<f64>> = planes.planes.iter().map(|v| dual_point(v, ctx)).collect::<Result<_>>()?;
    let np = points.len();
    let nv = planes.len();
    // (incident, mismatch, violation, worst factor) per point.
    let rows = par::map_range(np, |i| {
        let x = points.point(i);
        let dx = dual_plane(x);
        let mut acc = (0usize, 0usize, 0usize, 1.0f64);
        for (v, p) in planes.planes.iter().zip(&duals_v) {
            let a = dist_point_plane(x, v).expect("same dims");
            let b = dist_point_plane(p, &dx).expect("same dims");
            let (ia, ib) = (a <= tol, b <= tol);
            if ia && ib {
                acc.0 += 1;
            }
            if ia != ib {
                acc.1 += 1;
            }
            if a > 3.0 * b * (1.0 + 1e-12) + 1e-15 || b > 3.0 * a * (1.0 + 1e-12) + 1e-15 {
                acc.2 += 1;
            }
            if a > tol && b > tol {
                acc.3 = acc.3.max(a / b).max(b / a);
            }
        }
        acc
    });
    let mut report = DualityReport {
        pairs: np * nv,
        incidence_tol: tol,
        incident_pairs: 0,
        incidence_mismatches: 0,
        factor3_violations: 0,
        worst_factor: 1.0,
        plane_map: plane_map_distortion(points),
        point_map: point_map_distortion(planes, ctx)?,
    };
    for r in rows {
        report.incident_pairs += r.0;
        report.incidence_mismatches += r.1;
        report.factor3_violations += r.2;
        report.worst_factor = report.worst_factor.max(r.3);
    }
    Ok(report)
}

/// Output of dualizing a discretized Furstenberg configuration.
#[derive(Clone, Debug)]
pub struct DualizedConfig {
    /// `D*(V)`, one point per input plane, in input order.
    pub points: PointCloud,
    /// `D(x)` for every distinct fiber point.
    pub planes: PlaneFamily,
    /// Indices into `planes` of the dual planes of each fiber.
    pub point_planes: Vec<Vec<usize>>,
    pub point_separation: f64,
    pub plane_separation: f64,
    /// Largest `dist(D*V, D(x))` over fiber pairs, in units of `δ`.
    pub max_fiber_distance: f64,
}

/// Dualizes planes `V` with fibers `F(V) ⊂ V(2δ) ∩ B(2)`.
///
/// The family must already lie in `B(V_0, r_d)`; no reduction is attempted.
pub fn dualize_furstenberg_config(
    planes: &PlaneFamily,
    fibers: &[PointCloud],
    delta: f64,
    ctx: &DualityContext,
) -> Result<DualizedConfig> {
    if fibers.len() != planes.len() {
        return input("need one fiber per plane");
    }
    if !(delta > 0.0) {
        return input("delta must be positive");
    }
    check_planes(planes, ctx)?;
    for (i, (v, f)) in planes.planes.iter().zip(fibers).enumerate() {
        if f.d() != ctx.d {
            return input("fiber dimension differs from the context");
        }
        if f.max_norm() > 2.0 {
            return Err(Error::Precondition(format!("fiber {i} leaves B(2)")));
        }
        for x in f.iter() {
            if dist_point_plane(x, v)? > 2.0 * delta * (1.0 + 1e-12) {
                return Err(Error::Precondition(format!("fiber {i} leaves the 2 delta neighbourhood")));
            }
        }
    }
    let duals: Vec<Vec<f64>> = planes.planes.iter().map(|v| dual_point(v, ctx)).collect::<Result<_>>()?;
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut union: Vec<Vec<f64>> = Vec::new();
    let mut point_planes = Vec::with_capacity(fibers.len());
    for f in fibers {
        let mut ids = Vec::with_capacity(f.len());
        for x in f.iter() {
            let key: Vec<u64> = x.iter().map(|c| c.to_bits()).collect();
            let id = *index.entry(key).or_insert_with(|| {
                union.push(x.to_vec());
                union.len() - 1
            });
            ids.push(id);
        }
        point_planes.push(ids);
    }
    let dual_planes: Vec<AffinePlane> = par::map_range(union.len(), |i| dual_plane(&union[i]));
    let max_fiber = par::map_range(duals.len(), |i| {
        point_planes[i]
            .iter()
            .map(|&j| dist_point_plane(&duals[i], &dual_planes[j]).expect("same dims"))
            .fold(0.0, f64::max)
    })
    .into_iter()
    .fold(0.0, f64::max);
    let points = PointCloud::from_points(&duals)?;
    let point_separation = points.separation;
    let mut family = PlaneFamily::new(dual_planes, 0.0)?;
    let plane_separation = if family.len() <= 4000 {
        family.min_pairwise_distance()
    } else {
        family.min_sampled_distance(200_000, PAIR_SEED)
    };
    family.separation = if plane_separation.is_finite() { plane_separation } else { 0.0 };
    Ok(DualizedConfig {
        points,
        planes: family,
        point_planes,
        point_separation,
        plane_separation,
        max_fiber_distance: max_fiber / delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_rational::Rational64;

    #[test]
    fn small_examples() {
        let ctx = DualityContext::new(2).unwrap();
        let v = dual_plane(&[1.0, 0.0]);
        assert!(dist_point_plane(&[3.0, 3.0], &v).unwrap() < 1e-12);
        let p = dual_point(&v, &ctx).unwrap();
        assert_abs_diff_eq!(p[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-12);
        let v3 = dual_plane(&[1.0, 2.0, 3.0]);
        assert!(dist_point_plane(&[1.0, 1.0, 6.0], &v3).unwrap() < 1e-12);
        let o = dual_point(&ctx.v0(), &ctx).unwrap();
        assert!(o.iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn vertical_line_is_rejected() {
        let ctx = DualityContext::new(2).unwrap();
        let v = AffinePlane::line2(std::f64::consts::FRAC_PI_2, 0.3);
        assert!(matches!(dual_point(&v, &ctx), Err(Error::Domain(_))));
    }

    #[test]
    fn rational_fixture() {
        let r = |a: i64, b: i64| Rational64::new(a, b);
        let x = [r(1, 1), r(1, 1)];
        let c = [r(1, 1), r(0, 1)];
        assert!(exact_in_dual_plane(&c, &x));
        assert!(exact_in_dual_plane(&x, &exact_dual_point(&c)));
        assert!(exact_incidence_equivalent(&x, &c));
    }
}
