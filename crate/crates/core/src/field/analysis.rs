//! Post-processing of field snapshots.

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::FieldGrid;

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Distinct neighbours of a canonical node: radial and angular (periodic)
/// neighbours, with the centre adjacent to the whole first ring.
pub fn neighbours(grid: &FieldGrid, i: usize, j: usize) -> Vec<(usize, usize)> {
    let m = grid.m();
    if i == 0 {
        return (0..m).map(|l| (1, l)).collect();
    }
    let mut out = Vec::with_capacity(4);
    out.push(if i == 1 { (0, 0) } else { (i - 1, j) });
    if i < grid.n() {
        out.push((i + 1, j));
    }
    out.push((i, (j + 1) % m));
    out.push((i, (j + m - 1) % m));
    out
}

/// Distinct nodes that are `>=` all their neighbours and above
/// `fraction · max V`, with plateaus of equal maxima merged into one.
pub fn local_maxima(grid: &FieldGrid, v: &[f64], fraction: f64) -> Vec<(usize, usize)> {
    let vmax = grid
        .unique_nodes()
        .map(|(i, j)| v[grid.index(i, j)])
        .fold(f64::NEG_INFINITY, f64::max);
    let level = fraction * vmax;
    let is_max = |i: usize, j: usize| {
        let x = v[grid.index(i, j)];
        x > level
            && neighbours(grid, i, j)
                .into_iter()
                .all(|(k, l)| x >= v[grid.index(k, l)])
    };
    let candidates: Vec<(usize, usize)> =
        grid.unique_nodes().filter(|&(i, j)| is_max(i, j)).collect();
    let labels = components(grid, &candidates);
    let mut seen = Vec::new();
    let mut out = Vec::new();
    for (c, l) in candidates.into_iter().zip(labels) {
        if !seen.contains(&l) {
            seen.push(l);
            out.push(c);
        }
    }
    out
}

/// Number of connected regions where `V > fraction · max V`.
pub fn active_regions(grid: &FieldGrid, v: &[f64], fraction: f64) -> usize {
    let vmax = grid
        .unique_nodes()
        .map(|(i, j)| v[grid.index(i, j)])
        .fold(f64::NEG_INFINITY, f64::max);
    let level = fraction * vmax;
    let nodes: Vec<(usize, usize)> = grid
        .unique_nodes()
        .filter(|&(i, j)| v[grid.index(i, j)] > level)
        .collect();
    let mut labels = components(grid, &nodes);
    labels.sort_unstable();
    labels.dedup();
    labels.len()
}

fn components(grid: &FieldGrid, nodes: &[(usize, usize)]) -> Vec<usize> {
    let pos = |n: (usize, usize)| nodes.iter().position(|&x| x == n);
    let mut label = vec![usize::MAX; nodes.len()];
    let mut next = 0;
    for start in 0..nodes.len() {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        let mut stack = vec![start];
        while let Some(a) = stack.pop() {
            let (i, j) = nodes[a];
            for nb in neighbours(grid, i, j) {
                if let Some(b) = pos(nb) {
                    if label[b] == usize::MAX {
                        label[b] = next;
                        stack.push(b);
                    }
                }
            }
        }
        next += 1;
    }
    label
}

/// θ-average of `V` on each ring (distinct nodes only).
pub fn ring_means(grid: &FieldGrid, v: &[f64]) -> Vec<f64> {
    (0..=grid.n())
        .map(|i| {
            if i == 0 {
                v[0]
            } else {
                (0..grid.m()).map(|j| v[grid.index(i, j)]).sum::<f64>() / grid.m() as f64
            }
        })
        .collect()
}

/// Polar angle of the centre of mass of the localised activity.
///
/// Each ring's median is subtracted to remove rotationally flat structure
/// (and the static ridge the duplicated `θ = 0` column produces); only the
/// part above half of the largest remaining excess is weighted, by the
/// quadrature factors. `None` when nothing stands out.
pub fn activity_angle(grid: &FieldGrid, v: &[f64]) -> Option<f64> {
    let m = grid.m();
    let mut excess = vec![0.0; grid.len()];
    let mut top: f64 = 0.0;
    for i in 1..=grid.n() {
        let mut ring: Vec<f64> = (0..m).map(|j| v[grid.index(i, j)]).collect();
        ring.sort_by(|a, b| a.total_cmp(b));
        let median = 0.5 * (ring[(m - 1) / 2] + ring[m / 2]);
        for j in 0..m {
            let e = v[grid.index(i, j)] - median;
            excess[grid.index(i, j)] = e;
            top = top.max(e);
        }
    }
    if top <= 0.0 {
        return None;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 1..=grid.n() {
        let q = grid.weights()[i];
        for j in 0..m {
            let w = (excess[grid.index(i, j)] - 0.5 * top).max(0.0);
            acc += Complex64::from_polar(q * w * grid.radii()[i], grid.angles()[j]);
        }
    }
    (acc.norm() > 0.0).then(|| acc.arg())
}

/// Least-squares slope of unwrapped angles against time.
pub fn angular_velocity(times: &[f64], angles: &[f64]) -> f64 {
    let mut unwrapped: Vec<f64> = Vec::with_capacity(angles.len());
    for &a in angles {
        let v = match unwrapped.last() {
            None => a,
            Some(&prev) => {
                let mut d = a - prev;
                d -= TAU * (d / TAU).round();
                prev + d
            }
        };
        unwrapped.push(v);
    }
    let n = times.len() as f64;
    let tm = times.iter().sum::<f64>() / n;
    let am = unwrapped.iter().sum::<f64>() / n;
    let sxy: f64 = times
        .iter()
        .zip(&unwrapped)
        .map(|(t, a)| (t - tm) * (a - am))
        .sum();
    let sxx: f64 = times.iter().map(|t| (t - tm) * (t - tm)).sum();
    sxy / sxx
}

/// Rotates a state by `k` angular grid steps: the value at `(i, j)` moves
/// to `(i, j + k mod M)`.
pub fn rotate_steps(grid: &FieldGrid, v: &[f64], k: usize) -> Vec<f64> {
    let m = grid.m();
    let mut out = v.to_vec();
    for i in 1..=grid.n() {
        for j in 0..m {
            out[grid.index(i, (j + k) % m)] = v[grid.index(i, j)];
        }
    }
    grid.symmetrize(&mut out);
    out
}

/// Largest difference between two states over the points both grids share.
/// Returns `(max |Δ|, shared node count)`.
pub fn common_node_diff(ga: &FieldGrid, va: &[f64], gb: &FieldGrid, vb: &[f64]) -> (f64, usize) {
    let close = |x: f64, y: f64| (x - y).abs() < 1e-12;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (i, j) in ga.unique_nodes() {
        let (r, th) = (ga.radii()[i], ga.angles()[j]);
        let Some(k) = gb.radii().iter().position(|&x| close(x, r)) else {
            continue;
        };
        let l: Option<usize> = if k == 0 {
            Some(0)
        } else {
            gb.angles().iter().position(|&x| close(x, th))
        };
        if let Some(l) = l {
            worst = worst.max((va[ga.index(i, j)] - vb[gb.index(k, l)]).abs());
            count += 1;
        }
    }
    (worst, count)
}
