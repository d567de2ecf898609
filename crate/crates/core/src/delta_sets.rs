//! Covering numbers, (δ,s,C)-set validation and the explicit set constructions.

use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::geometry::{dist, direction_distance, AffinePlane, PlaneFamily, PointCloud, Resolution};
use crate::par;
use crate::projections::GridMeasure;
use crate::rng::indexed_rng;
use crate::spatial::GridIndex;

/// Maximum number of lattice nodes a generator may allocate.
pub const MAX_GRID_NODES: usize = 1 << 26;

fn cell_key(p: &[f64], side: f64) -> [i64; 4] {
    let mut k = [0i64; 4];
    for (a, x) in p.iter().enumerate() {
        k[a] = (x / side).floor() as i64;
    }
    k
}

/// Greedy packing: indices of points kept when scanning in order and keeping
/// every point farther than `rho` from all points kept so far.
pub fn greedy_net(points: &PointCloud, rho: f64) -> Vec<usize> {
    let d = points.d();
    assert!(d <= 4, "greedy_net supports d <= 4");
    let mut buckets: std::collections::HashMap<[i64; 4], Vec<usize>> = std::collections::HashMap::new();
    let mut kept = Vec::new();
    for i in 0..points.len() {
        let p = points.point(i);
        let key = cell_key(p, rho);
        let mut covered = false;
        let span = 3usize.pow(d as u32);
        'outer: for code in 0..span {
            let mut nk = key;
            let mut c = code;
            for item in nk.iter_mut().take(d) {
                *item += (c % 3) as i64 - 1;
                c /= 3;
            }
            if let Some(list) = buckets.get(&nk) {
                for &j in list {
                    if dist(p, points.point(j)) <= rho {
                        covered = true;
                        break 'outer;
                    }
                }
            }
        }
        if !covered {
            buckets.entry(key).or_default().push(i);
            kept.push(i);
        }
    }
    kept
}

/// Size of a maximal `rho`-packing taken from one farthest-point ordering.
///
/// Points are ordered by farthest-point traversal from point 0, and the count is
/// the number whose insertion radius exceeds `rho`. That prefix is pairwise more
/// than `rho` apart and every point lies within `rho` of it, so the count sits
/// between the exact covering numbers at `rho` and `rho / 2`. Because the
/// ordering does not depend on `rho`, the count is nonincreasing in `rho`.
pub fn covering_number(points: &PointCloud, rho: f64) -> Result<usize> {
    if !(rho > 0.0) {
        return input("rho must be positive");
    }
    Ok(insertion_radii(points, rho).len())
}

#[derive(PartialEq)]
struct Far(f64, usize);

impl Eq for Far {}

impl PartialOrd for Far {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Far {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(other.1.cmp(&self.1))
    }
}

/// Farthest-point traversal, stopped once the insertion radius drops to `stop`.
/// Returns the radii of the centers taken (the first is infinite); ties go to the
/// lower index.
pub fn insertion_radii(points: &PointCloud, stop: f64) -> Vec<f64> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let grid = GridIndex::build(points, stop, 4 * n + 4096);
    let mut near = vec![f64::INFINITY; n];
    let mut heap = std::collections::BinaryHeap::with_capacity(n);
    heap.push(Far(f64::INFINITY, 0));
    let mut radii = Vec::new();
    while let Some(Far(r, c)) = heap.pop() {
        if r != near[c] {
            continue;
        }
        if r <= stop {
            break;
        }
        radii.push(r);
        near[c] = 0.0;
        let pc = points.point(c);
        let mut visit = |q: usize| {
            let dq = dist(pc, points.point(q));
            if dq < near[q] {
                near[q] = dq;
                heap.push(Far(dq, q));
            }
        };
        if r.is_finite() {
            let lo: Vec<f64> = pc.iter().map(|x| x - r).collect();
            let hi: Vec<f64> = pc.iter().map(|x| x + r).collect();
            grid.for_each_in_box(&lo, &hi, |q| visit(q as usize));
        } else {
            (0..n).for_each(visit);
        }
    }
    radii
}

/// Outcome of a (δ,s,C)-set check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrostmanReport {
    pub exponent: f64,
    pub delta: f64,
    pub best_constant: f64,
    pub worst_center: Vec<f64>,
    pub worst_radius: f64,
    pub scales_tested: Vec<f64>,
    /// Size of the δ-packing used as `|P|_δ`.
    pub net_size: usize,
}

/// Counts points of `cloud` (bucketed by `grid`) in the closed ball `B(c, r)`.
/// Cells lying entirely inside the ball are counted without touching their points.
fn count_in_ball(grid: &GridIndex, cloud: &PointCloud, c: &[f64], r: f64) -> usize {
    let d = cloud.d();
    let mut ranges = [(0usize, 0usize); 4];
    for a in 0..d {
        match grid.axis_range(a, c[a] - r, c[a] + r) {
            Some(rg) => ranges[a] = rg,
            None => return 0,
        }
    }
    let side = grid.cell;
    let r2 = r * r;
    let mut idx: [usize; 4] = [0; 4];
    for a in 0..d {
        idx[a] = ranges[a].0;
    }
    let mut total = 0usize;
    loop {
        let mut near = 0.0;
        let mut far = 0.0;
        let mut lin = 0;
        for a in 0..d {
            let lo = grid.origin[a] + side * idx[a] as f64;
            let hi = lo + side;
            let gap = if c[a] < lo {
                lo - c[a]
            } else if c[a] > hi {
                c[a] - hi
            } else {
                0.0
            };
            let reach = (c[a] - lo).abs().max((hi - c[a]).abs());
            near += gap * gap;
            far += reach * reach;
            lin += idx[a] * grid.strides[a];
        }
        // Cells at the top edge of the grid may hold clamped points beyond `hi`.
        let edge = (0..d).any(|a| idx[a] + 1 == grid.dims[a]);
        if near <= r2 {
            let items = grid.cell_items(lin);
            if far <= r2 && !edge {
                total += items.len();
            } else {
                total += items
                    .iter()
                    .filter(|&&i| dist(cloud.point(i as usize), c) <= r)
                    .count();
            }
        }
        let mut a = d;
        loop {
            if a == 0 {
                return total;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] <= ranges[a].1 {
                break;
            }
            idx[a] = ranges[a].0;
        }
    }
}

/// Ball centers for radius `r`: every point of `centers_from`, then lattice
/// nodes of spacing `r/2` over the box expanded by `r` that lie within `r`
/// of some point of `near` (other nodes give empty balls).
fn ball_centers(centers_from: &PointCloud, near: &PointCloud, r: f64) -> Vec<Vec<f64>> {
    let d = near.d();
    let mut out: Vec<Vec<f64>> = centers_from.iter().map(|p| p.to_vec()).collect();
    if near.is_empty() {
        return out;
    }
    let (lo, hi) = centers_from.bounding_box();
    let step = r / 2.0;
    let origin: Vec<f64> = lo.iter().map(|x| x - r).collect();
    let counts: Vec<usize> = (0..d)
        .map(|a| ((hi[a] + r - origin[a]) / step).floor() as usize + 1)
        .collect();
    let total: f64 = counts.iter().map(|&c| c as f64).product();
    let node = |idx: &[usize]| -> Vec<f64> { (0..d).map(|a| origin[a] + step * idx[a] as f64).collect() };
    let mut keys: Vec<Vec<usize>> = Vec::new();
    if total <= 25.0 * near.len() as f64 {
        let mut idx = vec![0usize; d];
        'all: loop {
            keys.push(idx.clone());
            let mut a = d;
            loop {
                if a == 0 {
                    break 'all;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < counts[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
    } else {
        for p in near.iter() {
            let lo_i: Vec<usize> = (0..d)
                .map(|a| ((p[a] - r - origin[a]) / step).ceil().max(0.0) as usize)
                .collect();
            let hi_i: Vec<usize> = (0..d)
                .map(|a| (((p[a] + r - origin[a]) / step).floor().max(0.0) as usize).min(counts[a] - 1))
                .collect();
            let mut idx = lo_i.clone();
            'near: loop {
                keys.push(idx.clone());
                let mut a = d;
                loop {
                    if a == 0 {
                        break 'near;
                    }
                    a -= 1;
                    idx[a] += 1;
                    if idx[a] <= hi_i[a] {
                        break;
                    }
                    idx[a] = lo_i[a];
                }
            }
        }
        keys.sort_unstable();
        keys.dedup();
    }
    out.extend(keys.iter().map(|k| node(k)));
    out
}

/// Largest `count_in_ball` over `centers`, ties going to the first center.
fn max_over_centers(grid: &GridIndex, cloud: &PointCloud, centers: &[Vec<f64>], r: f64) -> (usize, usize) {
    par::map_range(centers.len(), |i| (count_in_ball(grid, cloud, &centers[i], r), i))
        .into_iter()
        .fold((0, 0), |best, cur| if cur.0 > best.0 { cur } else { best })
}

fn ball_grid(cloud: &PointCloud, r: f64, delta: f64) -> GridIndex {
    let f = (r / (2.0 * delta)).clamp(1.0, 8.0);
    GridIndex::build(cloud, r / f, 4 * cloud.len() + 4096)
}

/// Checks the (δ,s,C)-set inequality `|P ∩ B|_δ <= C |P|_δ r^s` over dyadic
/// radii `δ, 2δ, ..., 1` and the ball centers described in [`ball_centers`].
///
/// Both `|P ∩ B|_δ` and `|P|_δ` are taken from a single greedy δ-packing `Q`
/// of `P`: the ball count is `|Q ∩ B|`.
pub fn validate_frostman_set(points: &PointCloud, delta: f64, s: f64) -> Result<FrostmanReport> {
    if points.is_empty() {
        return Err(Error::Precondition("point set is empty".into()));
    }
    if !(delta > 0.0) || delta > points.separation * (1.0 + 1e-9) {
        return Err(Error::Precondition(format!(
            "delta {delta} exceeds the point separation {}",
            points.separation
        )));
    }
    if points.d() > 4 {
        return input("validation supports d <= 4");
    }
    let net = points.select(&greedy_net(points, delta));
    let total = net.len() as f64;
    let mut report = FrostmanReport {
        exponent: s,
        delta,
        best_constant: 0.0,
        worst_center: points.point(0).to_vec(),
        worst_radius: delta,
        scales_tested: Vec::new(),
        net_size: net.len(),
    };
    let mut r = delta;
    while r <= 1.0 * (1.0 + 1e-12) {
        report.scales_tested.push(r);
        let grid = ball_grid(&net, r, delta);
        let centers = ball_centers(points, &net, r);
        let (count, at) = max_over_centers(&grid, &net, &centers, r);
        let ratio = count as f64 / (total * r.powf(s));
        if ratio > report.best_constant {
            report.best_constant = ratio;
            report.worst_center = centers[at].clone();
            report.worst_radius = r;
        }
        r *= 2.0;
    }
    Ok(report)
}

/// Largest raw count `|P ∩ B(c, r)|` over the standard ball centers, with its center.
pub fn max_ball_count(points: &PointCloud, r: f64) -> Result<(usize, Vec<f64>)> {
    if points.is_empty() {
        return Ok((0, Vec::new()));
    }
    if !(r > 0.0) {
        return input("radius must be positive");
    }
    let delta = points.separation.max(r / 8.0);
    let grid = ball_grid(points, r, delta);
    let centers = ball_centers(points, points, r);
    let (count, at) = max_over_centers(&grid, points, &centers, r);
    Ok((count, centers[at].clone()))
}

/// Level-k product Cantor set with its uniform measure.
pub fn gen_product_cantor(d: usize, base: usize, digits: &[usize], k: u32) -> Result<(PointCloud, GridMeasure)> {
    let kept: BTreeSet<usize> = digits.iter().copied().collect();
    if kept.len() != digits.len() {
        return input("digits must be distinct");
    }
    if kept.len() >= base {
        return input(format!("need fewer kept digits than the base (D = {} >= M = {base})", kept.len()));
    }
    if kept.len() < 2 || kept.iter().any(|&g| g >= base) {
        return input("need at least two digits, each below the base");
    }
    if d == 0 || k == 0 {
        return input("need d >= 1 and k >= 1");
    }
    let side = (base as u64)
        .checked_pow(k)
        .filter(|s| (*s as f64).powi(d as i32) <= MAX_GRID_NODES as f64)
        .ok_or_else(|| Error::Input("lattice too large".into()))? as usize;
    let h = 1.0 / side as f64;
    // Surviving indices along one axis.
    let mut axis: Vec<usize> = vec![0];
    for _ in 0..k {
        axis = axis
            .iter()
            .flat_map(|&i| kept.iter().map(move |&g| i * base + g))
            .collect();
    }
    let shape = vec![side; d];
    let mut mu = GridMeasure::zeros(h, vec![h / 2.0; d], shape)?;
    let strides = mu.strides().to_vec();
    let count = axis.len().pow(d as u32);
    let density = 1.0 / (count as f64 * mu.cell_volume());
    let mut coords = Vec::with_capacity(count * d);
    let mut idx = vec![0usize; d];
    let values = mu.values_mut();
    loop {
        let mut lin = 0;
        for a in 0..d {
            lin += axis[idx[a]] * strides[a];
            coords.push((axis[idx[a]] as f64 + 0.5) * h);
        }
        values[lin] = density;
        let mut a = d;
        let done = loop {
            if a == 0 {
                break true;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < axis.len() {
                break false;
            }
            idx[a] = 0;
        };
        if done {
            break;
        }
    }
    mu.normalize(1.0);
    let radius = coords.chunks(d).map(crate::geometry::norm).fold(0.0, f64::max);
    let cloud = PointCloud::new(d, coords, h, radius)?;
    Ok((cloud, mu))
}

/// Self-similarity dimension `log D / log M`.
pub fn cantor_dimension(base: usize, kept: usize) -> f64 {
    (kept as f64).ln() / (base as f64).ln()
}

/// Product of a Cantor measure on the first axis with the uniform measure on
/// the unit (d-1)-ball in the remaining axes.
#[derive(Clone, Debug)]
pub struct CantorBall {
    pub measure: GridMeasure,
    pub base: usize,
    pub digits: Vec<usize>,
    /// Dimension of the Cantor factor actually achieved.
    pub cantor_dimension: f64,
    /// Total dimension `(d - 1) + cantor_dimension`.
    pub dimension: f64,
}

/// Digit system `(M, D)` with `|log D / log M - target| <= 0.02`, smallest base first.
pub fn choose_digit_system(target: f64) -> Result<(usize, usize)> {
    let mut closest = (f64::INFINITY, 0, 0);
    for m in 2..=64usize {
        let mut best: Option<(f64, usize)> = None;
        for dd in 1..=m {
            let err = (cantor_dimension(m, dd) - target).abs();
            if best.is_none_or(|(e, _)| err < e) {
                best = Some((err, dd));
            }
        }
        let (err, dd) = best.expect("non-empty range");
        if err <= 0.02 && dd >= 2 {
            return Ok((m, dd));
        }
        if err < closest.0 {
            closest = (err, m, dd);
        }
    }
    input(format!(
        "no digit system reaches dimension {target} within 0.02 (closest: log {}/log {} = {})",
        closest.2,
        closest.1,
        cantor_dimension(closest.1, closest.2)
    ))
}

/// Cantor×ball measure of total dimension ≈ `s` at Cantor level `k`, lattice spacing `M^-k`.
pub fn gen_cantor_times_ball(d: usize, s: f64, k: u32) -> Result<CantorBall> {
    if d < 2 {
        return input("need d >= 2");
    }
    let target = s - (d as f64 - 1.0);
    if !(target > 0.0 && target <= 1.0) {
        return input(format!("s - (d - 1) = {target} is outside (0, 1]"));
    }
    let (base, kept) = choose_digit_system(target)?;
    let digits: Vec<usize> = if kept == 1 {
        vec![0]
    } else {
        (0..kept)
            .map(|i| ((i * (base - 1)) as f64 / (kept - 1) as f64).round() as usize)
            .collect()
    };
    let side = (base as u64).checked_pow(k).ok_or_else(|| Error::Input("level too deep".into()))? as usize;
    let h = 1.0 / side as f64;
    let ball_side = 2 * side;
    let nodes = side as f64 * (ball_side as f64).powi(d as i32 - 1);
    if nodes > MAX_GRID_NODES as f64 {
        return input("lattice too large");
    }
    let kept_set: BTreeSet<usize> = digits.iter().copied().collect();
    let survives = |mut i: usize| -> bool {
        for _ in 0..k {
            if !kept_set.contains(&(i % base)) {
                return false;
            }
            i /= base;
        }
        true
    };
    let mut shape = vec![side];
    shape.extend(std::iter::repeat_n(ball_side, d - 1));
    let mut origin = vec![h / 2.0];
    origin.extend(std::iter::repeat_n(-1.0 + h / 2.0, d - 1));
    let column: Vec<bool> = (0..side).map(survives).collect();
    let mut mu = GridMeasure::from_fn(h, origin.clone(), shape, |x| {
        let i = ((x[0] - h / 2.0) / h).round() as usize;
        let inside = x[1..].iter().map(|y| y * y).sum::<f64>() <= 1.0;
        if column[i] && inside {
            1.0
        } else {
            0.0
        }
    })?;
    mu.normalize(1.0);
    let cd = cantor_dimension(base, kept);
    Ok(CantorBall {
        measure: mu,
        base,
        digits,
        cantor_dimension: cd,
        dimension: d as f64 - 1.0 + cd,
    })
}

/// Parameters of the two-scale sharpness example.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SharpnessParams {
    pub s: f64,
    pub t: f64,
    pub resolution: Resolution,
    pub eta: f64,
    pub net_constant: f64,
}

impl SharpnessParams {
    pub fn new(s: f64, t: f64, k: u32, net_constant: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) || !(1.0..=2.0).contains(&t) {
            return input("need s in [0,1] and t in [1,2]");
        }
        if k < 4 {
            return input("need k >= 4");
        }
        if !(net_constant > 0.0 && net_constant <= 1.0) {
            return input("net constant must lie in (0,1]");
        }
        Ok(SharpnessParams {
            s,
            t,
            resolution: Resolution::new(k),
            eta: (1.0 - s) * (t - 1.0),
            net_constant,
        })
    }

    pub fn delta(&self) -> f64 {
        self.resolution.delta
    }

    /// `ceil(δ^-η / 2)`.
    pub fn tube_count(&self) -> usize {
        (0.5 * self.delta().powf(-self.eta)).ceil() as usize
    }
}

/// Axis-parallel rectangle `[x_min, x_max] × [y_min, y_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// Output of [`gen_sharpness_construction`].
#[derive(Clone, Debug)]
pub struct SharpnessInstance {
    pub params: SharpnessParams,
    pub tubes: Vec<Tube>,
    pub points: PointCloud,
    /// Unit directions of the net `Σ` around `e_1`.
    pub directions: Vec<Vec<f64>>,
    pub lines: PlaneFamily,
    /// For each line, its direction index and signed normal offset.
    pub line_params: Vec<(usize, f64)>,
    /// Lines meeting each tube.
    pub per_tube_lines: Vec<Vec<usize>>,
    pub rows_per_tube: usize,
    pub columns_per_tube: usize,
    /// Gap between consecutive tubes (`inf` for a single tube).
    pub tube_gap: f64,
}

impl SharpnessInstance {
    pub fn tube_width(&self) -> f64 {
        self.params.delta().powf(1.0 - self.params.s)
    }
}

/// Builds the tube/point/direction/line configuration at resolution `δ = 2^-k`.
///
/// * `ceil(δ^-η / 2)` tubes `[0,1] × [i/m, i/m + δ^(1-s)]`.
/// * In each tube `floor(δ^-s)` rows at height `y_min + (j + 1/2) δ` and
///   `K = ceil(δ^-(t-η-s))` columns at `x = (i + 1/2) / K`.
/// * `J = round(δ^-s)`; directions at angles `m w / J`, `|m| <= J`, `w = δ^(1-s)`.
/// * For each direction with normal `ν`, the lines `<ν, x> = j c δ` for every
///   integer `j` whose line meets some tube.
pub fn gen_sharpness_construction(params: SharpnessParams) -> Result<SharpnessInstance> {
    let delta = params.delta();
    let s = params.s;
    let m = params.tube_count();
    let w = delta.powf(1.0 - s);
    let rows = delta.powf(-s).floor() as usize;
    let cols = delta.powf(-(params.t - params.eta - s)).ceil() as usize;
    let half_dirs = delta.powf(-s).round() as usize;
    if m == 0 || rows == 0 || cols == 0 {
        return input("parameters leave the construction empty");
    }
    let tubes: Vec<Tube> = (0..m)
        .map(|i| Tube {
            x_min: 0.0,
            x_max: 1.0,
            y_min: i as f64 / m as f64,
            y_max: i as f64 / m as f64 + w,
        })
        .collect();
    let tube_gap = if m > 1 { 1.0 / m as f64 - w } else { f64::INFINITY };
    let mut coords = Vec::with_capacity(2 * m * rows * cols);
    for t in &tubes {
        for j in 0..rows {
            let y = t.y_min + (j as f64 + 0.5) * delta;
            for c in 0..cols {
                coords.push((c as f64 + 0.5) / cols as f64);
                coords.push(y);
            }
        }
    }
    let mut sep = f64::INFINITY;
    if rows > 1 {
        sep = sep.min(delta);
    }
    if cols > 1 {
        sep = sep.min(1.0 / cols as f64);
    }
    if m > 1 {
        sep = sep.min(tube_gap + delta);
    }
    let radius = coords.chunks(2).map(crate::geometry::norm).fold(0.0, f64::max);
    let points = PointCloud::new(2, coords, sep, radius)?;

    let step = w / half_dirs as f64;
    let angles: Vec<f64> = (-(half_dirs as i64)..=half_dirs as i64)
        .map(|k| k as f64 * step)
        .collect();
    let directions: Vec<Vec<f64>> = angles.iter().map(|a| vec![a.cos(), a.sin()]).collect();
    let spacing = params.net_constant * delta;
    let mut lines = Vec::new();
    let mut line_params = Vec::new();
    let mut per_tube_lines = vec![Vec::new(); m];
    for (di, &theta) in angles.iter().enumerate() {
        let (sn, cs) = theta.sin_cos();
        let ranges: Vec<(i64, i64)> = tubes
            .iter()
            .map(|t| {
                let corners = [
                    (t.x_min, t.y_min),
                    (t.x_min, t.y_max),
                    (t.x_max, t.y_min),
                    (t.x_max, t.y_max),
                ];
                let rho = corners.map(|(x, y)| -x * sn + y * cs);
                let lo = rho.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                ((lo / spacing).ceil() as i64, (hi / spacing).floor() as i64)
            })
            .collect();
        let mut offsets: BTreeSet<i64> = BTreeSet::new();
        for &(a, b) in &ranges {
            offsets.extend(a..=b);
        }
        for j in offsets {
            let id = lines.len();
            let rho = j as f64 * spacing;
            lines.push(AffinePlane::line2(theta, rho));
            line_params.push((di, rho));
            for (ti, &(a, b)) in ranges.iter().enumerate() {
                if (a..=b).contains(&j) {
                    per_tube_lines[ti].push(id);
                }
            }
        }
    }
    let separation = if angles.len() > 1 { spacing.min(step.sin()) } else { spacing };
    Ok(SharpnessInstance {
        params,
        tubes,
        points,
        directions,
        lines: PlaneFamily::new(lines, separation)?,
        line_params,
        per_tube_lines,
        rows_per_tube: rows,
        columns_per_tube: cols,
        tube_gap,
    })
}

/// Random `(δ, t)`-regular set in `[0,1]^d`, `δ = 2^-k`.
///
/// Built top-down on the dyadic tree: level `j` keeps `round(2^(t j))` cells,
/// children spread as evenly as possible over randomly ordered parents.
/// Returns the centers of the level-`k` cells.
pub fn gen_random_regular_set(d: usize, t: f64, k: u32, seed: u64) -> Result<PointCloud> {
    if !(1..=4).contains(&d) {
        return input("need 1 <= d <= 4");
    }
    if !(t >= 0.0 && t <= d as f64) {
        return input("need 0 <= t <= d");
    }
    let fan = 1usize << d;
    let mut cells: Vec<Vec<u64>> = vec![vec![0; d]];
    for j in 1..=k {
        let mut rng = indexed_rng(seed, j as u64);
        let parents = cells.len();
        let target = ((t * j as f64).exp2().round() as usize).clamp(parents, parents * fan);
        let (q, rem) = (target / parents, target % parents);
        cells.shuffle(&mut rng);
        let mut next = Vec::with_capacity(target);
        for (pi, parent) in cells.iter().enumerate() {
            let take = q + usize::from(pi < rem);
            for child in index::sample(&mut rng, fan, take).into_iter() {
                let cell: Vec<u64> = (0..d).map(|a| 2 * parent[a] + ((child >> a) & 1) as u64).collect();
                next.push(cell);
            }
        }
        next.sort_unstable();
        cells = next;
    }
    let delta = Resolution::new(k).delta;
    let coords: Vec<f64> = cells
        .iter()
        .flat_map(|c| c.iter().map(|&i| (i as f64 + 0.5) * delta).collect::<Vec<_>>())
        .collect();
    let radius = coords.chunks(d).map(crate::geometry::norm).fold(0.0, f64::max);
    PointCloud::new(d, coords, delta, radius)
}

/// Up to `count` random lines through points of `points` (d = 2) with uniform
/// directions, thinned greedily to pairwise metric distance at least `delta`.
pub fn gen_random_separated_lines(points: &PointCloud, count: usize, delta: f64, seed: u64) -> Result<PlaneFamily> {
    if points.d() != 2 {
        return input("random line families are planar");
    }
    if points.is_empty() {
        return input("need at least one point");
    }
    let candidates: Vec<AffinePlane> = par::map_range(count, |i| {
        let mut rng = indexed_rng(seed, i as u64);
        let p = points.point(rng.random_range(0..points.len()));
        let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let rho = -p[0] * theta.sin() + p[1] * theta.cos();
        AffinePlane::line2(theta, rho)
    });
    let mut kept: Vec<AffinePlane> = Vec::new();
    for c in candidates {
        let ok = kept.iter().all(|q| {
            let dd = direction_distance(q, &c).expect("planar lines") + dist(q.offset(), c.offset());
            dd >= delta
        });
        if ok {
            kept.push(c);
        }
    }
    PlaneFamily::new(kept, delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_points(n: usize) -> PointCloud {
        let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64, 0.0]).collect();
        PointCloud::from_points(&pts).unwrap()
    }

    #[test]
    fn covering_examples() {
        // 51 points on [0,1]: the packing keeps 0, 0.26, 0.52, 0.78.
        let n = covering_number(&line_points(51), 0.25).unwrap();
        assert!((2..=3).contains(&n), "{n}");
        let one = PointCloud::from_points(&[vec![0.3, 0.4]]).unwrap();
        assert_eq!(covering_number(&one, 0.01).unwrap(), 1);
        let far: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.0]).collect();
        assert_eq!(covering_number(&PointCloud::from_points(&far).unwrap(), 0.4).unwrap(), 10);
        let empty = PointCloud::new(2, vec![], 0.0, 0.0).unwrap();
        assert_eq!(covering_number(&empty, 0.1).unwrap(), 0);
        assert!(covering_number(&one, 0.0).is_err());
    }

    #[test]
    fn frostman_single_point() {
        let one = PointCloud::new(2, vec![0.5, 0.5], 1.0, 1.0).unwrap();
        let rep = validate_frostman_set(&one, 1.0 / 16.0, 0.0).unwrap();
        assert_eq!(rep.best_constant, 1.0);
        assert_eq!(rep.scales_tested.len(), 5);
    }

    #[test]
    fn frostman_rejects_coarse_delta() {
        let pts = line_points(11);
        assert!(validate_frostman_set(&pts, 0.5, 1.0).is_err());
    }

    #[test]
    fn cantor_counts() {
        let (cloud, mu) = gen_product_cantor(1, 4, &[0, 3], 3).unwrap();
        assert_eq!(cloud.len(), 8);
        assert!((mu.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(cantor_dimension(4, 2), 0.5);
        assert!(gen_product_cantor(2, 3, &[0, 1, 2], 2).is_err());
        let (c2, _) = gen_product_cantor(2, 4, &[0, 1, 3], 2).unwrap();
        assert_eq!(c2.len(), 81);
    }

    #[test]
    fn digit_systems() {
        assert_eq!(choose_digit_system(0.5).unwrap(), (4, 2));
        let (m, dd) = choose_digit_system(0.3).unwrap();
        assert!((cantor_dimension(m, dd) - 0.3).abs() <= 0.02);
        assert!(gen_cantor_times_ball(2, 0.9, 3).is_err());
    }

    #[test]
    fn cantor_ball_mass() {
        let cb = gen_cantor_times_ball(2, 1.5, 3).unwrap();
        assert_eq!((cb.base, cb.digits.clone()), (4, vec![0, 3]));
        assert!((cb.measure.total_mass() - 1.0).abs() < 1e-9);
        assert_eq!(cb.dimension, 1.5);
    }

    #[test]
    fn sharpness_k8_counts() {
        let inst = gen_sharpness_construction(SharpnessParams::new(0.5, 1.5, 8, 0.5).unwrap()).unwrap();
        assert_eq!(inst.tubes.len(), 2);
        assert_eq!(inst.directions.len(), 33);
        let per_tube = inst.rows_per_tube * inst.columns_per_tube;
        assert!((512..=2048).contains(&per_tube), "{per_tube}");
        assert!(inst.lines.len() <= 8 * 1024);
        assert!(inst.tube_gap >= 0.125);
    }

    #[test]
    fn sharpness_degenerate_case() {
        let inst = gen_sharpness_construction(SharpnessParams::new(0.0, 1.0, 6, 0.5).unwrap()).unwrap();
        assert_eq!(inst.tubes.len(), 1);
        assert_eq!(inst.directions.len(), 3);
        assert!(!inst.lines.is_empty());
        assert!(SharpnessParams::new(0.5, 1.5, 3, 0.5).is_err());
    }

    #[test]
    fn random_regular_set_sizes() {
        let p = gen_random_regular_set(2, 1.5, 6, 3).unwrap();
        assert_eq!(p.len(), 512);
        assert_eq!(p, gen_random_regular_set(2, 1.5, 6, 3).unwrap());
        assert!(p.min_pairwise_distance() >= 1.0 / 64.0 - 1e-15);
    }
}
