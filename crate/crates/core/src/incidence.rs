//! δ-incidences between points and affine planes, the incidence bound, and
//! dyadic pigeonholing.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::geometry::{direction_distance, residual_norm, AffinePlane, PlaneFamily, PointCloud};
use crate::par;
use crate::spatial::GridIndex;

/// Incidence pairs stored per plane (point indices ascending within each plane).
#[derive(Clone, Debug, PartialEq)]
pub struct IncidenceTally {
    pub r: f64,
    pub num_points: usize,
    pub num_planes: usize,
    plane_starts: Vec<usize>,
    point_idx: Vec<u32>,
}

impl IncidenceTally {
    fn from_lists(r: f64, num_points: usize, lists: Vec<Vec<u32>>) -> Self {
        let mut plane_starts = Vec::with_capacity(lists.len() + 1);
        plane_starts.push(0);
        let mut point_idx = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        for l in &lists {
            point_idx.extend_from_slice(l);
            plane_starts.push(point_idx.len());
        }
        IncidenceTally {
            r,
            num_points,
            num_planes: lists.len(),
            plane_starts,
            point_idx,
        }
    }

    /// Number of incident pairs.
    pub fn len(&self) -> usize {
        self.point_idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_idx.is_empty()
    }

    /// Points incident to plane `v`.
    pub fn plane_points(&self, v: usize) -> &[u32] {
        &self.point_idx[self.plane_starts[v]..self.plane_starts[v + 1]]
    }

    /// `(point, plane)` pairs, plane-major.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_planes).flat_map(move |v| self.plane_points(v).iter().map(move |&p| (p as usize, v)))
    }

    /// `N_V` for every plane.
    pub fn per_plane_counts(&self) -> Vec<usize> {
        self.plane_starts.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `M_p` for every point.
    pub fn per_point_counts(&self) -> Vec<usize> {
        let mut m = vec![0usize; self.num_points];
        for &p in &self.point_idx {
            m[p as usize] += 1;
        }
        m
    }

    /// Planes incident to each point (ascending).
    pub fn point_planes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_points];
        for (p, v) in self.pairs() {
            out[p].push(v);
        }
        out
    }

    /// Tally restricted to the listed planes, renumbered in the given order.
    pub fn restrict_to_planes(&self, planes: &[usize]) -> IncidenceTally {
        let lists = planes.iter().map(|&v| self.plane_points(v).to_vec()).collect();
        IncidenceTally::from_lists(self.r, self.num_points, lists)
    }
}

fn check_inputs(points: &PointCloud, planes: &PlaneFamily, r: f64) -> Result<()> {
    if !(r > 0.0) {
        return input("incidence radius must be positive");
    }
    if let Some(p) = planes.planes.first() {
        if p.d() != points.d() {
            return input("points and planes live in different dimensions");
        }
    }
    if points.len() > u32::MAX as usize {
        return input("too many points");
    }
    Ok(())
}

/// Reference implementation: tests every pair.
pub fn count_incidences_brute(points: &PointCloud, planes: &PlaneFamily, r: f64) -> Result<IncidenceTally> {
    check_inputs(points, planes, r)?;
    let lists = par::map_range(planes.len(), |v| {
        let pl = &planes.planes[v];
        (0..points.len())
            .filter(|&i| residual_norm(points.point(i), pl.offset(), pl.basis_flat(), pl.n()) <= r)
            .map(|i| i as u32)
            .collect()
    });
    Ok(IncidenceTally::from_lists(r, points.len(), lists))
}

/// Per-plane slab walk over a [`GridIndex`].
///
/// The plane is written as a graph over `n` free axes (those with the best
/// conditioned basis minor). For every cell of the free axes, interval
/// arithmetic bounds the dependent coordinates of points within `r` of the
/// plane; only those cells are visited, and each candidate is tested with the
/// same residual routine as the brute-force path.
struct SlabWalk {
    free: Vec<usize>,
    dep: Vec<usize>,
    /// Row `i` maps free coordinates (minus the offset) to dependent coordinate `dep[i]`.
    map: Vec<Vec<f64>>,
    /// Per dependent axis widening.
    slack: Vec<f64>,
}

impl SlabWalk {
    fn new(plane: &AffinePlane, r: f64) -> Option<Self> {
        let (d, n) = (plane.d(), plane.n());
        let mut best: Option<(f64, Vec<usize>)> = None;
        for mask in 0u32..(1 << d) {
            if mask.count_ones() as usize != n {
                continue;
            }
            let cols: Vec<usize> = (0..d).filter(|a| mask >> a & 1 == 1).collect();
            let m = DMatrix::from_fn(n, n, |i, j| plane.basis_vector(i)[cols[j]]);
            let det = m.determinant().abs();
            if best.as_ref().is_none_or(|(b, _)| det > *b) {
                best = Some((det, cols));
            }
        }
        let (det, free) = best?;
        if det < 1e-12 {
            return None;
        }
        let dep: Vec<usize> = (0..d).filter(|a| !free.contains(a)).collect();
        // x_F = B_F^T t, x_D = B_D^T t  =>  x_D = B_D^T (B_F^T)^-1 x_F.
        let bf_t = DMatrix::from_fn(n, n, |i, j| plane.basis_vector(j)[free[i]]);
        let inv = bf_t.try_inverse()?;
        let map: Vec<Vec<f64>> = dep
            .iter()
            .map(|&a| {
                (0..n)
                    .map(|j| (0..n).map(|k| plane.basis_vector(k)[a] * inv[(k, j)]).sum())
                    .collect()
            })
            .collect();
        // The free box is already widened by r; the dependent offset adds at most r more.
        let slack = vec![r * (1.0 + 1e-6) + 1e-12; dep.len()];
        Some(SlabWalk { free, dep, map, slack })
    }

    fn visit(&self, grid: &GridIndex, plane: &AffinePlane, r: f64, mut f: impl FnMut(u32)) {
        let a = plane.offset();
        let n = self.free.len();
        let nd = self.dep.len();
        let side = grid.cell;
        let last_axis = grid.d - 1;
        let last_dep = self.dep.last() == Some(&last_axis);
        let mut fidx = vec![0usize; n];
        let mut dep_ranges = vec![(0usize, 0usize); nd];
        let mut didx = vec![0usize; nd];
        'free: loop {
            // Free-coordinate box of the current cell, widened by r.
            let mut ok = true;
            for (i, &axis) in self.dep.iter().enumerate() {
                let mut lo = a[axis];
                let mut hi = a[axis];
                for (j, &fa) in self.free.iter().enumerate() {
                    let cell_lo = grid.origin[fa] + side * fidx[j] as f64 - r - a[fa];
                    let cell_hi = cell_lo + side + 2.0 * r;
                    let m = self.map[i][j];
                    let (u, v) = (m * cell_lo, m * cell_hi);
                    lo += u.min(v);
                    hi += u.max(v);
                }
                match grid.axis_range(axis, lo - self.slack[i], hi + self.slack[i]) {
                    Some(rg) => dep_ranges[i] = rg,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                let mut base = 0usize;
                for (j, &fa) in self.free.iter().enumerate() {
                    base += fidx[j] * grid.strides[fa];
                }
                for i in 0..nd {
                    didx[i] = dep_ranges[i].0;
                }
                'dep: loop {
                    let outer = if last_dep { nd - 1 } else { nd };
                    let mut lin = base;
                    for i in 0..outer {
                        lin += didx[i] * grid.strides[self.dep[i]];
                    }
                    let items = if last_dep {
                        grid.run_items(lin + dep_ranges[nd - 1].0, lin + dep_ranges[nd - 1].1)
                    } else {
                        grid.cell_items(lin)
                    };
                    for &p in items {
                        f(p);
                    }
                    let mut k = outer;
                    loop {
                        if k == 0 {
                            break 'dep;
                        }
                        k -= 1;
                        didx[k] += 1;
                        if didx[k] <= dep_ranges[k].1 {
                            break;
                        }
                        didx[k] = dep_ranges[k].0;
                    }
                }
            }
            let mut j = n;
            loop {
                if j == 0 {
                    break 'free;
                }
                j -= 1;
                fidx[j] += 1;
                if fidx[j] < grid.dims[self.free[j]] {
                    break;
                }
                fidx[j] = 0;
            }
        }
    }
}

/// Exact δ-incidence tally using a grid index of cell size `max(r, separation)`.
///
/// The pair set is identical to [`count_incidences_brute`].
pub fn count_incidences(points: &PointCloud, planes: &PlaneFamily, r: f64) -> Result<IncidenceTally> {
    check_inputs(points, planes, r)?;
    if points.d() > 4 || points.is_empty() {
        return count_incidences_brute(points, planes, r);
    }
    let cell = r.max(points.separation);
    let grid = GridIndex::build(points, cell, 4 * points.len() + 4096);
    let lists = par::map_range(planes.len(), |v| {
        let pl = &planes.planes[v];
        let mut out = Vec::new();
        let mut test = |i: u32| {
            if residual_norm(points.point(i as usize), pl.offset(), pl.basis_flat(), pl.n()) <= r {
                out.push(i);
            }
        };
        match SlabWalk::new(pl, r) {
            Some(walk) => walk.visit(&grid, pl, r, &mut test),
            None => (0..points.len() as u32).for_each(&mut test),
        }
        out.sort_unstable();
        out
    });
    Ok(IncidenceTally::from_lists(r, points.len(), lists))
}

/// `δ^-ε C_F |P| |V|^(n/(d+n-t)) δ^(n(t+1-d)(d-n)/(d+n-t))`.
#[allow(clippy::too_many_arguments)]
pub fn incidence_bound_rhs(
    num_points: usize,
    num_planes: usize,
    delta: f64,
    d: usize,
    n: usize,
    t: f64,
    c_f: f64,
    eps: f64,
) -> Result<f64> {
    if n == 0 || n >= d {
        return input("need 0 < n < d");
    }
    let (df, nf) = (d as f64, n as f64);
    if t <= df - nf {
        return input(format!("bound is vacuous unless t > d - n (t = {t}, d - n = {})", df - nf));
    }
    let denom = df + nf - t;
    Ok(delta.powf(-eps)
        * c_f
        * num_points as f64
        * (num_planes as f64).powf(nf / denom)
        * delta.powf(nf * (t + 1.0 - df) * (df - nf) / denom))
}

/// Which side of the tally to uniformize.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Planes,
    Points,
}

/// A dyadic class `[2^j, 2^(j+1))` of counts and its members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PigeonholeResult {
    /// Largest count in the class; every member count lies in `[N/2, N]`.
    pub level: usize,
    pub class_index: u32,
    pub members: Vec<usize>,
    /// Sum of all counts that were bucketed.
    pub total: usize,
    /// `2 (ceil(log2 max count) + 1)`.
    pub log_factor: f64,
}

/// Picks the dyadic class maximizing `|class| 2^j` (lowest `j` on ties).
/// `None` when every count is zero.
pub fn pigeonhole_counts(counts: &[usize]) -> Option<PigeonholeResult> {
    let max = *counts.iter().max()?;
    if max == 0 {
        return None;
    }
    let classes = (usize::BITS - max.leading_zeros()) as usize;
    let mut sizes = vec![0usize; classes];
    for &c in counts.iter().filter(|&&c| c > 0) {
        sizes[(usize::BITS - 1 - c.leading_zeros()) as usize] += 1;
    }
    let mut best = 0;
    for j in 1..classes {
        if (sizes[j] as u128) << j > (sizes[best] as u128) << best {
            best = j;
        }
    }
    let members: Vec<usize> = (0..counts.len())
        .filter(|&i| counts[i] > 0 && (usize::BITS - 1 - counts[i].leading_zeros()) as usize == best)
        .collect();
    let level = members.iter().map(|&i| counts[i]).max().expect("class is non-empty");
    Some(PigeonholeResult {
        level,
        class_index: best as u32,
        members,
        total: counts.iter().sum(),
        log_factor: 2.0 * ((max as f64).log2().ceil() + 1.0),
    })
}

/// Uniformizes `N_V` or `M_p`; `None` for an empty tally.
pub fn pigeonhole_uniform(tally: &IncidenceTally, side: Side) -> Option<PigeonholeResult> {
    match side {
        Side::Planes => pigeonhole_counts(&tally.per_plane_counts()),
        Side::Points => pigeonhole_counts(&tally.per_point_counts()),
    }
}

/// Planes first, then points counted against the selected planes only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStagePigeonhole {
    pub planes: PigeonholeResult,
    pub points: PigeonholeResult,
}

pub fn pigeonhole_two_stage(tally: &IncidenceTally) -> Option<TwoStagePigeonhole> {
    let planes = pigeonhole_uniform(tally, Side::Planes)?;
    let sub = tally.restrict_to_planes(&planes.members);
    let points = pigeonhole_uniform(&sub, Side::Points)?;
    Some(TwoStagePigeonhole { planes, points })
}

/// Per-point direction spread of the incident planes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectionSeparation {
    /// Separation used for the greedy direction packing.
    pub threshold: f64,
    /// Minimum over points with `M_p > 0` of `|greedy packing| / M_p`.
    pub min_fraction: f64,
    pub mean_fraction: f64,
    pub points_examined: usize,
}

/// For every incident point, greedily packs the direction spaces of its planes
/// at separation `threshold` and reports the retained fraction. At most
/// `cap` planes per point are examined.
pub fn direction_separation(
    tally: &IncidenceTally,
    planes: &PlaneFamily,
    threshold: f64,
    cap: usize,
) -> Result<DirectionSeparation> {
    if tally.num_planes != planes.len() {
        return Err(Error::Input("tally and family sizes differ".into()));
    }
    let lists = tally.point_planes();
    let fractions: Vec<Option<f64>> = par::map_range(lists.len(), |p| {
        let l = &lists[p];
        if l.is_empty() {
            return None;
        }
        let l = &l[..l.len().min(cap)];
        let mut kept: Vec<&AffinePlane> = Vec::new();
        for &v in l {
            let pl = &planes.planes[v];
            if kept
                .iter()
                .all(|q| direction_distance(q, pl).expect("same dims") >= threshold)
            {
                kept.push(pl);
            }
        }
        Some(kept.len() as f64 / l.len() as f64)
    });
    let vals: Vec<f64> = fractions.into_iter().flatten().collect();
    let mean = if vals.is_empty() {
        0.0
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    Ok(DirectionSeparation {
        threshold,
        min_fraction: vals.iter().copied().fold(f64::INFINITY, f64::min).min(1.0),
        mean_fraction: mean,
        points_examined: vals.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn origin_on_x_axis() {
        let p = PointCloud::new(2, vec![0.0, 0.0], 0.0, 0.0).unwrap();
        let v = PlaneFamily::new(vec![AffinePlane::line2(0.0, 0.0)], 0.0).unwrap();
        assert_eq!(count_incidences(&p, &v, 0.1).unwrap().len(), 1);
    }

    #[test]
    fn bound_exponents() {
        let base = incidence_bound_rhs(1, 1, 1.0, 2, 1, 1.5, 1.0, 0.0).unwrap();
        assert_eq!(base, 1.0);
        let v8 = incidence_bound_rhs(1, 8, 1.0, 2, 1, 1.5, 1.0, 0.0).unwrap();
        assert_relative_eq!(v8, 4.0, epsilon = 1e-12);
        let d8 = incidence_bound_rhs(1, 1, 1.0 / 8.0, 2, 1, 1.5, 1.0, 0.0).unwrap();
        assert_relative_eq!(d8, 0.5, epsilon = 1e-12);
        let full = incidence_bound_rhs(3, 5, 0.25, 2, 1, 2.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(full, 3.0 * 5.0 * 0.25, epsilon = 1e-12);
        assert!(incidence_bound_rhs(1, 1, 0.5, 2, 1, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn pigeonhole_examples() {
        let r = pigeonhole_counts(&[7; 5]).unwrap();
        assert_eq!(r.members.len(), 5);
        assert!((7..=14).contains(&r.level));
        let r = pigeonhole_counts(&[1, 1, 2, 4, 8]).unwrap();
        assert_eq!(r.members, vec![4]);
        assert_eq!(r.level * r.members.len(), 8);
        assert!(r.level as f64 * r.members.len() as f64 >= 16.0 / 4.0);
        assert!(pigeonhole_counts(&[]).is_none());
        assert!(pigeonhole_counts(&[0, 0]).is_none());
    }
}
