//! Uniform grid bucket index over a point set (compressed row storage).

use crate::geometry::PointCloud;

/// Points bucketed into a regular grid of cubic cells.
#[derive(Clone, Debug)]
pub struct GridIndex {
    pub(crate) d: usize,
    pub(crate) cell: f64,
    pub(crate) origin: Vec<f64>,
    pub(crate) dims: Vec<usize>,
    pub(crate) strides: Vec<usize>,
    starts: Vec<usize>,
    items: Vec<u32>,
}

impl GridIndex {
    /// Buckets `cloud` into cells of side at least `cell`, enlarging the side
    /// until at most `max_cells` cells are needed.
    pub fn build(cloud: &PointCloud, cell: f64, max_cells: usize) -> Self {
        let d = cloud.d();
        let (lo, hi) = if cloud.is_empty() {
            (vec![0.0; d], vec![0.0; d])
        } else {
            cloud.bounding_box()
        };
        let mut side = if cell.is_finite() && cell > 0.0 { cell } else { 1.0 };
        let extent: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| b - a).collect();
        let max_cells = max_cells.max(1) as f64;
        let count = |s: f64| -> f64 {
            extent
                .iter()
                .map(|e| ((e / s).floor() + 1.0).max(1.0))
                .product()
        };
        while count(side) > max_cells {
            side *= (count(side) / max_cells).powf(1.0 / d as f64).max(1.01);
        }
        let dims: Vec<usize> = extent
            .iter()
            .map(|e| ((e / side).floor() as usize + 1).max(1))
            .collect();
        let mut strides = vec![1usize; d];
        for i in (0..d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        let total: usize = dims.iter().product();
        let mut index = GridIndex {
            d,
            cell: side,
            origin: lo,
            dims,
            strides,
            starts: Vec::new(),
            items: Vec::new(),
        };
        let keys: Vec<usize> = cloud.iter().map(|p| index.linear_cell(p)).collect();
        let mut starts = vec![0usize; total + 1];
        for &k in &keys {
            starts[k + 1] += 1;
        }
        for i in 0..total {
            starts[i + 1] += starts[i];
        }
        let mut fill = starts.clone();
        let mut items = vec![0u32; keys.len()];
        for (i, &k) in keys.iter().enumerate() {
            items[fill[k]] = i as u32;
            fill[k] += 1;
        }
        index.starts = starts;
        index.items = items;
        index
    }

    #[cfg(test)]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Cell coordinate along `axis`, clamped into the grid.
    #[inline]
    pub fn axis_cell(&self, axis: usize, x: f64) -> usize {
        let c = ((x - self.origin[axis]) / self.cell).floor();
        if c <= 0.0 {
            0
        } else {
            (c as usize).min(self.dims[axis] - 1)
        }
    }

    #[inline]
    fn linear_cell(&self, p: &[f64]) -> usize {
        (0..self.d).map(|a| self.axis_cell(a, p[a]) * self.strides[a]).sum()
    }

    /// Inclusive range of cells along `axis` meeting `[lo, hi]`, or `None` if disjoint.
    #[inline]
    pub fn axis_range(&self, axis: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let top = self.origin[axis] + self.cell * self.dims[axis] as f64;
        if hi < self.origin[axis] || lo > top || lo > hi {
            return None;
        }
        Some((self.axis_cell(axis, lo), self.axis_cell(axis, hi)))
    }

    /// Point indices stored in the cell with linear index `linear`.
    #[inline]
    pub fn cell_items(&self, linear: usize) -> &[u32] {
        &self.items[self.starts[linear]..self.starts[linear + 1]]
    }

    /// Items of the contiguous run of cells `first..=last` (same row).
    #[inline]
    pub fn run_items(&self, first: usize, last: usize) -> &[u32] {
        &self.items[self.starts[first]..self.starts[last + 1]]
    }

    /// Calls `f` with every point index whose cell meets the box `[lo, hi]`.
    pub fn for_each_in_box(&self, lo: &[f64], hi: &[f64], mut f: impl FnMut(u32)) {
        let mut ranges = Vec::with_capacity(self.d);
        for a in 0..self.d {
            match self.axis_range(a, lo[a], hi[a]) {
                Some(r) => ranges.push(r),
                None => return,
            }
        }
        let last = self.d - 1;
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            let base: usize = (0..last).map(|a| idx[a] * self.strides[a]).sum();
            for &i in self.run_items(base + ranges[last].0, base + ranges[last].1) {
                f(i);
            }
            // Advance the odometer over all axes but the last.
            let mut a = last;
            loop {
                if a == 0 {
                    return;
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
}
