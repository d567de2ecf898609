//! Points, affine n-planes, the affine Grassmannian metric and Grassmannian sampling.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::par;
use crate::rng::indexed_rng;

/// Tolerance for exact geometric identities.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for results of composed operations.
pub const COMPOSED_TOL: f64 = 1e-10;

/// Dyadic scale `delta = 2^-k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub k: u32,
    pub delta: f64,
}

impl Resolution {
    pub fn new(k: u32) -> Self {
        Resolution {
            k,
            delta: (-(k as f64)).exp2(),
        }
    }

    /// Recovers `k` from an exact power of two in `(0, 1]`.
    pub fn from_delta(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return input(format!("delta {delta} is not in (0,1]"));
        }
        let k = (-delta.log2()).round();
        let r = Resolution::new(k as u32);
        if r.delta != delta {
            return input(format!("delta {delta} is not a power of two"));
        }
        Ok(r)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Two-pass modified Gram-Schmidt. `None` if the vectors are (numerically) dependent.
pub fn orthonormalize(vectors: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let scale = norm(v);
        if scale == 0.0 || !scale.is_finite() {
            return None;
        }
        let mut w: Vec<f64> = v.iter().map(|x| x / scale).collect();
        for _ in 0..2 {
            for b in &out {
                let c = dot(&w, b);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let len = norm(&w);
        if len < 1e-8 {
            return None;
        }
        w.iter_mut().for_each(|x| *x /= len);
        out.push(w);
    }
    Some(out)
}

/// Orthonormal basis of the orthogonal complement of `span(basis)` in R^d.
pub(crate) fn complement_basis(basis: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = basis.to_vec();
    let mut extra = Vec::new();
    // Pick coordinate axes in order of how poorly the current span covers them.
    while all.len() < d {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            for _ in 0..2 {
                for b in &all {
                    let c = dot(&e, b);
                    for (ei, bi) in e.iter_mut().zip(b) {
                        *ei -= c * bi;
                    }
                }
            }
            let len = norm(&e);
            if best.as_ref().is_none_or(|(l, _)| len > *l) {
                best = Some((len, e));
            }
        }
        let (len, mut e) = best.expect("d > 0");
        e.iter_mut().for_each(|x| *x /= len);
        all.push(e.clone());
        extra.push(e);
    }
    extra
}

/// Euclidean distance from `x` to the plane `a + span(basis)`.
///
/// `basis` holds `n` orthonormal rows of length `x.len()`. Incidence counting
/// and its brute-force oracle both call this, so their answers agree bit for bit.
#[inline]
pub fn residual_norm(x: &[f64], offset: &[f64], basis: &[f64], n: usize) -> f64 {
    let d = x.len();
    let mut diff = [0.0f64; 8];
    let mut heap;
    let r: &mut [f64] = if d <= 8 {
        &mut diff[..d]
    } else {
        heap = vec![0.0; d];
        &mut heap
    };
    for i in 0..d {
        r[i] = x[i] - offset[i];
    }
    let mut coef = [0.0f64; 8];
    for (j, c) in coef.iter_mut().enumerate().take(n.min(8)) {
        let b = &basis[j * d..(j + 1) * d];
        *c = (0..d).map(|i| (x[i] - offset[i]) * b[i]).sum();
    }
    if n > 8 {
        let coefs: Vec<f64> = (0..n)
            .map(|j| {
                let b = &basis[j * d..(j + 1) * d];
                (0..d).map(|i| (x[i] - offset[i]) * b[i]).sum()
            })
            .collect();
        for (j, c) in coefs.iter().enumerate() {
            let b = &basis[j * d..(j + 1) * d];
            for i in 0..d {
                r[i] -= c * b[i];
            }
        }
    } else {
        for (j, c) in coef.iter().enumerate().take(n) {
            let b = &basis[j * d..(j + 1) * d];
            for i in 0..d {
                r[i] -= c * b[i];
            }
        }
    }
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Serialize, Deserialize)]
struct PlaneRecord {
    d: usize,
    n: usize,
    basis: Vec<Vec<f64>>,
    offset: Vec<f64>,
}

/// Affine n-plane `V = V_0 + a` with an orthonormal basis of `V_0` and `a ⊥ V_0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlaneRecord", into = "PlaneRecord")]
pub struct AffinePlane {
    d: usize,
    n: usize,
    basis: Vec<f64>,
    offset: Vec<f64>,
}

impl TryFrom<PlaneRecord> for AffinePlane {
    type Error = Error;
    fn try_from(r: PlaneRecord) -> Result<Self> {
        if r.basis.len() != r.n || r.offset.len() != r.d {
            return input("plane record sizes disagree with d and n");
        }
        AffinePlane::new(r.basis, r.offset)
    }
}

impl From<AffinePlane> for PlaneRecord {
    fn from(p: AffinePlane) -> Self {
        PlaneRecord {
            d: p.d,
            n: p.n,
            basis: p.basis_vectors(),
            offset: p.offset,
        }
    }
}

impl AffinePlane {
    /// Validates orthonormality and orthogonality of the offset (tolerance 1e-12).
    pub fn new(basis: Vec<Vec<f64>>, offset: Vec<f64>) -> Result<Self> {
        let d = offset.len();
        let n = basis.len();
        if n == 0 || n >= d {
            return input(format!("plane dimension {n} must satisfy 0 < n < d = {d}"));
        }
        if basis.iter().any(|b| b.len() != d) {
            return input("basis vectors must have length d");
        }
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot(&basis[i], &basis[j]) - want).abs() > EXACT_TOL {
                    return input("basis is not orthonormal");
                }
            }
            if dot(&basis[i], &offset).abs() > EXACT_TOL {
                return input("offset is not orthogonal to the direction space");
            }
        }
        Ok(AffinePlane {
            d,
            n,
            basis: basis.concat(),
            offset,
        })
    }

    /// The plane through `point` spanned by `directions` (orthonormalized here).
    pub fn through(point: &[f64], directions: &[Vec<f64>]) -> Result<Self> {
        let d = point.len();
        if directions.iter().any(|v| v.len() != d) {
            return input("direction length differs from point length");
        }
        let basis = orthonormalize(directions)
            .ok_or_else(|| Error::Input("directions are linearly dependent".into()))?;
        let mut offset = point.to_vec();
        for b in &basis {
            let c = dot(point, b);
            for (o, bi) in offset.iter_mut().zip(b) {
                *o -= c * bi;
            }
        }
        // A second pass removes rounding left by the first.
        for b in &basis {
            let c = dot(&offset, b);
            for (o, bi) in offset.iter_mut().zip(b) {
                *o -= c * bi;
            }
        }
        AffinePlane::new(basis, offset)
    }

    /// Linear subspace spanned by `directions`.
    pub fn linear(directions: &[Vec<f64>]) -> Result<Self> {
        let d = directions.first().map_or(0, |v| v.len());
        AffinePlane::through(&vec![0.0; d], directions)
    }

    /// Line in R^2 with direction angle `theta` and signed normal offset `rho`,
    /// i.e. `{x : <(-sin θ, cos θ), x> = rho}`.
    pub fn line2(theta: f64, rho: f64) -> Self {
        let (s, c) = theta.sin_cos();
        AffinePlane {
            d: 2,
            n: 1,
            basis: vec![c, s],
            offset: vec![-s * rho, c * rho],
        }
    }

    /// Hyperplane `{x : <normal, x> = c}`.
    pub fn hyperplane(normal: &[f64], c: f64) -> Result<Self> {
        let d = normal.len();
        if d < 2 {
            return input("hyperplanes need d >= 2");
        }
        let len = norm(normal);
        if len == 0.0 {
            return input("zero normal");
        }
        let nu: Vec<f64> = normal.iter().map(|x| x / len).collect();
        let basis = complement_basis(std::slice::from_ref(&nu), d);
        let offset: Vec<f64> = nu.iter().map(|x| x * c / len).collect();
        AffinePlane::through(&offset, &basis)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Basis rows, flattened (`n * d` values).
    pub fn basis_flat(&self) -> &[f64] {
        &self.basis
    }

    pub fn basis_vector(&self, i: usize) -> &[f64] {
        &self.basis[i * self.d..(i + 1) * self.d]
    }

    pub fn basis_vectors(&self) -> Vec<Vec<f64>> {
        self.basis.chunks(self.d).map(|c| c.to_vec()).collect()
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn is_linear(&self) -> bool {
        norm(&self.offset) <= EXACT_TOL
    }

    /// Same directions, offset dropped.
    pub fn direction_space(&self) -> AffinePlane {
        AffinePlane {
            d: self.d,
            n: self.n,
            basis: self.basis.clone(),
            offset: vec![0.0; self.d],
        }
    }

    /// Coordinates of the orthogonal projection of `x` onto the direction space.
    pub fn coordinates(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(x, self.basis_vector(i))).collect()
    }

    /// Unit normal of a hyperplane (`n = d - 1`).
    pub fn unit_normal(&self) -> Result<Vec<f64>> {
        if self.n + 1 != self.d {
            return input("unit normal requires a hyperplane");
        }
        Ok(complement_basis(&self.basis_vectors(), self.d).remove(0))
    }

    /// Orthogonal projector onto the direction space as a d x d matrix.
    pub fn projector(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.d, self.d);
        for k in 0..self.n {
            let b = self.basis_vector(k);
            for i in 0..self.d {
                for j in 0..self.d {
                    m[(i, j)] += b[i] * b[j];
                }
            }
        }
        m
    }

    /// Applies a d x d matrix (row-major) to directions and offset.
    pub fn transformed(&self, rot: &[f64]) -> Result<AffinePlane> {
        let d = self.d;
        let apply = |v: &[f64]| -> Vec<f64> {
            (0..d)
                .map(|i| (0..d).map(|j| rot[i * d + j] * v[j]).sum())
                .collect()
        };
        let dirs: Vec<Vec<f64>> = (0..self.n).map(|i| apply(self.basis_vector(i))).collect();
        AffinePlane::through(&apply(&self.offset), &dirs)
    }
}

/// Euclidean distance from `x` to the affine plane `v`.
pub fn dist_point_plane(x: &[f64], v: &AffinePlane) -> Result<f64> {
    if x.len() != v.d {
        return input(format!(
            "point has dimension {} but plane lives in R^{}",
            x.len(),
            v.d
        ));
    }
    Ok(residual_norm(x, &v.offset, &v.basis, v.n))
}

/// Operator norm of the difference of the projections onto the direction spaces.
pub fn direction_distance(v: &AffinePlane, w: &AffinePlane) -> Result<f64> {
    if v.d != w.d || v.n != w.n {
        return input("planes differ in ambient or plane dimension");
    }
    let d = v.d;
    // Rank one cases: the eigenvalues of the difference are ±sin(angle).
    let sine = |a: &[f64], b: &[f64]| -> f64 {
        let c = dot(a, b);
        let r: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - c * y).collect();
        norm(&r).min(1.0)
    };
    if v.n == 1 {
        return Ok(sine(v.basis_vector(0), w.basis_vector(0)));
    }
    if v.n + 1 == d {
        return Ok(sine(&v.unit_normal()?, &w.unit_normal()?));
    }
    let diff = v.projector() - w.projector();
    let eig = SymmetricEigen::new(diff);
    Ok(eig.eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs())))
}

/// Affine Grassmannian metric `|π_V0 - π_W0|_op + |a - b|`.
pub fn grassmann_distance(v: &AffinePlane, w: &AffinePlane) -> Result<f64> {
    Ok(direction_distance(v, w)? + dist(&v.offset, &w.offset))
}

/// Operator norm computed from the eigen-decomposition in every case.
pub fn direction_distance_dense(v: &AffinePlane, w: &AffinePlane) -> Result<f64> {
    if v.d != w.d || v.n != w.n {
        return input("planes differ in ambient or plane dimension");
    }
    let eig = SymmetricEigen::new(v.projector() - w.projector());
    Ok(eig.eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs())))
}

fn check_dims(d: usize, n: usize) -> Result<()> {
    if n == 0 || n >= d {
        return input(format!("need 0 < n < d, got d = {d}, n = {n}"));
    }
    Ok(())
}

fn gaussian_vector<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Draws `count` linear n-planes from the rotation-invariant law on G(d, n).
///
/// Plane `i` uses its own generator stream, so results do not depend on the
/// thread count.
pub fn sample_grassmannian(d: usize, n: usize, count: usize, seed: u64) -> Result<Vec<AffinePlane>> {
    check_dims(d, n)?;
    if count == 0 {
        return input("count must be at least 1");
    }
    Ok(par::map_range(count, |i| {
        let mut rng = indexed_rng(seed, i as u64);
        loop {
            let vs: Vec<Vec<f64>> = (0..n).map(|_| gaussian_vector(&mut rng, d)).collect();
            if let Some(b) = orthonormalize(&vs) {
                return AffinePlane {
                    d,
                    n,
                    basis: b.concat(),
                    offset: vec![0.0; d],
                };
            }
        }
    }))
}

/// Haar-distributed element of O(d), row-major.
pub fn random_orthogonal<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let vs: Vec<Vec<f64>> = (0..d).map(|_| gaussian_vector(rng, d)).collect();
        if let Some(b) = orthonormalize(&vs) {
            return b.concat();
        }
    }
}

/// Orthogonal complement of a linear subspace.
pub fn orthocomplement(v: &AffinePlane) -> Result<AffinePlane> {
    if !v.is_linear() {
        return input("orthocomplement needs a linear subspace (zero offset)");
    }
    let extra = complement_basis(&v.basis_vectors(), v.d);
    Ok(AffinePlane {
        d: v.d,
        n: v.d - v.n,
        basis: extra.concat(),
        offset: vec![0.0; v.d],
    })
}

/// Affine n-planes with a claimed pairwise separation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlaneFamily {
    pub planes: Vec<AffinePlane>,
    pub separation: f64,
}

impl PlaneFamily {
    pub fn new(planes: Vec<AffinePlane>, separation: f64) -> Result<Self> {
        if let Some(p) = planes.first() {
            if planes.iter().any(|q| q.d != p.d || q.n != p.n) {
                return input("planes in a family must share d and n");
            }
        }
        if separation.is_nan() || separation < 0.0 {
            return input("separation must be non-negative");
        }
        Ok(PlaneFamily { planes, separation })
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    /// Exhaustive minimum of the pairwise metric (`inf` for fewer than two planes).
    pub fn min_pairwise_distance(&self) -> f64 {
        let m = self.planes.len();
        par::map_range(m, |i| {
            let mut best = f64::INFINITY;
            for j in i + 1..m {
                let dd = grassmann_distance(&self.planes[i], &self.planes[j]).expect("same dims");
                best = best.min(dd);
            }
            best
        })
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }

    /// Minimum over `pairs` random pairs.
    pub fn min_sampled_distance(&self, pairs: usize, seed: u64) -> f64 {
        let m = self.planes.len();
        if m < 2 {
            return f64::INFINITY;
        }
        par::map_range(pairs, |k| {
            let mut rng = indexed_rng(seed, k as u64);
            let i = rng.random_range(0..m);
            let mut j = rng.random_range(0..m - 1);
            if j >= i {
                j += 1;
            }
            grassmann_distance(&self.planes[i], &self.planes[j]).expect("same dims")
        })
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }
}

/// Finite point set in R^d, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    d: usize,
    coords: Vec<f64>,
    pub separation: f64,
    pub bounding_radius: f64,
}

impl PointCloud {
    /// Validates shape and the bounding ball; separation is taken on trust.
    pub fn new(d: usize, coords: Vec<f64>, separation: f64, bounding_radius: f64) -> Result<Self> {
        if d == 0 || coords.len() % d != 0 {
            return input("coordinate buffer is not a whole number of points");
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return input("non-finite coordinate");
        }
        let cloud = PointCloud {
            d,
            coords,
            separation,
            bounding_radius,
        };
        let far = cloud.max_norm();
        if far > bounding_radius * (1.0 + EXACT_TOL) + EXACT_TOL {
            return input(format!(
                "point at distance {far} lies outside bounding radius {bounding_radius}"
            ));
        }
        Ok(cloud)
    }

    /// Measures separation and bounding radius from the data.
    pub fn from_coords(d: usize, coords: Vec<f64>) -> Result<Self> {
        let mut cloud = PointCloud::new(d, coords, 0.0, f64::INFINITY)?;
        cloud.bounding_radius = cloud.max_norm();
        cloud.separation = cloud.min_pairwise_distance();
        if !cloud.separation.is_finite() {
            cloud.separation = 0.0;
        }
        Ok(cloud)
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let d = points.first().map_or(0, |p| p.len());
        if points.iter().any(|p| p.len() != d) {
            return input("points have different dimensions");
        }
        PointCloud::from_coords(d, points.concat())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.d)
    }

    pub fn max_norm(&self) -> f64 {
        self.iter().map(norm).fold(0.0, f64::max)
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.d];
        let mut hi = vec![f64::NEG_INFINITY; self.d];
        for p in self.iter() {
            for i in 0..self.d {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        (lo, hi)
    }

    /// Subset by index, keeping the metadata.
    pub fn select(&self, idx: &[usize]) -> PointCloud {
        let mut coords = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            coords.extend_from_slice(self.point(i));
        }
        PointCloud {
            d: self.d,
            coords,
            separation: self.separation,
            bounding_radius: self.bounding_radius,
        }
    }

    /// Exact closest-pair distance by a sweep along the first axis.
    pub fn min_pairwise_distance(&self) -> f64 {
        let m = self.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| self.point(a)[0].total_cmp(&self.point(b)[0]));
        let mut best = f64::INFINITY;
        for (pos, &i) in order.iter().enumerate() {
            let p = self.point(i);
            for &j in &order[pos + 1..] {
                let q = self.point(j);
                if q[0] - p[0] >= best {
                    break;
                }
                best = best.min(dist(p, q));
            }
        }
        best
    }
}
