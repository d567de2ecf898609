use serde::{Deserialize, Serialize};

use super::GridMeasure;
use crate::error::{input, Result};
use crate::par;
use crate::stats::{fit_loglog_slope, SlopeFit};

/// `∫ μ(B(x, δ))^p dx` by lattice quadrature.
///
/// Ball masses are formed from prefix sums along the last axis: the lattice
/// ball of radius `δ/h` nodes is a stack of runs, one per offset in the other
/// axes. `x` ranges over every node whose ball meets the lattice.
pub fn ball_integral(mu: &GridMeasure, p: f64, delta: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return input("need p >= 1");
    }
    let h = mu.h();
    if !(delta >= h) {
        return input("ball radius must be at least one lattice step");
    }
    let d = mu.d();
    let shape = mu.shape();
    let last = shape[d - 1];
    let rad = delta / h;
    let pad = rad.floor() as usize;
    // Stencil: offsets in the leading axes with the half-width of the run.
    let mut stencil: Vec<(Vec<i64>, i64)> = Vec::new();
    let lead = d - 1;
    let mut off = vec![-(pad as i64); lead];
    loop {
        let r2: f64 = off.iter().map(|&o| (o * o) as f64).sum();
        if r2 <= rad * rad {
            stencil.push((off.clone(), (rad * rad - r2).sqrt().floor() as i64));
        }
        let mut a = lead;
        let done = loop {
            if a == 0 {
                break true;
            }
            a -= 1;
            off[a] += 1;
            if off[a] <= pad as i64 {
                break false;
            }
            off[a] = -(pad as i64);
        };
        if done {
            break;
        }
    }
    let values = mu.values();
    let rows = values.len() / last;
    let prefix: Vec<Vec<f64>> = par::map_range(rows, |r| {
        let mut out = Vec::with_capacity(last + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for v in &values[r * last..(r + 1) * last] {
            acc += v;
            out.push(acc);
        }
        out
    });
    let lead_shape: Vec<usize> = shape[..lead].to_vec();
    let ext: Vec<usize> = lead_shape.iter().map(|s| s + 2 * pad).collect();
    let out_rows: usize = ext.iter().product();
    let out_len = last + 2 * pad;
    let vol = mu.cell_volume();
    let total = par::sum_range(out_rows, |orow| {
        // Leading coordinates of this output row (shifted by the padding).
        let mut coord = vec![0i64; lead];
        let mut rem = orow;
        for a in (0..lead).rev() {
            coord[a] = (rem % ext[a]) as i64 - pad as i64;
            rem /= ext[a];
        }
        let mut ball = vec![0.0; out_len];
        for (o, w) in &stencil {
            let mut src = 0usize;
            let mut inside = true;
            for a in 0..lead {
                let c = coord[a] + o[a];
                if c < 0 || c >= lead_shape[a] as i64 {
                    inside = false;
                    break;
                }
                src = src * lead_shape[a] + c as usize;
            }
            if !inside {
                continue;
            }
            let pre = &prefix[src];
            for (j, b) in ball.iter_mut().enumerate() {
                let x = j as i64 - pad as i64;
                let lo = (x - w).clamp(0, last as i64) as usize;
                let hi = (x + w + 1).clamp(0, last as i64) as usize;
                *b += pre[hi] - pre[lo];
            }
        }
        ball.iter().map(|b| (b * vol).powf(p)).sum::<f64>()
    });
    Ok(total * vol)
}

/// Ball integrals at several radii with their log-log fit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallScaling {
    pub p: f64,
    pub s: f64,
    pub deltas: Vec<f64>,
    pub integrals: Vec<f64>,
    pub fit: SlopeFit,
    /// `d - s + p s`.
    pub predicted_slope: f64,
}

pub fn ball_integral_scaling(mu: &GridMeasure, p: f64, s: f64, deltas: &[f64]) -> Result<BallScaling> {
    if deltas.len() < 3 {
        return input("need at least three scales");
    }
    let h = mu.h();
    if deltas.iter().any(|&dl| dl < 4.0 * h * (1.0 - 1e-12)) {
        return input("every radius must be at least 4h");
    }
    let integrals = deltas
        .iter()
        .map(|&dl| ball_integral(mu, p, dl))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = deltas.iter().copied().zip(integrals.iter().copied()).collect();
    let fit = fit_loglog_slope(&pts)?;
    Ok(BallScaling {
        p,
        s,
        deltas: deltas.to_vec(),
        integrals,
        fit,
        predicted_slope: mu.d() as f64 - s + p * s,
    })
}
