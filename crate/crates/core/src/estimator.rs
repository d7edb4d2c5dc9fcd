//! Ensemble estimators for the one- and two-point correlation functions.
//!
//! `k1` is a cell histogram of positions. `k2` is estimated radially: ordered
//! pairs are binned by minimal-image distance and normalised by the shell
//! volume and the torus volume, giving the translation-averaged pair density.
//! Standard errors are always taken across trajectories.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Grid;
use crate::geometry::{norm, unit_ball_volume, Point, Torus, MAX_DIM};
use crate::simulator::{CellList, Trajectory};

/// Bins narrower than this fraction of the box length are below position resolution.
const MIN_BIN_FRACTION: f64 = 1e-9;

/// Uniform radial bins on `[0, r_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialBins {
    pub r_max: f64,
    pub n_bins: usize,
}

impl RadialBins {
    pub fn new(r_max: f64, n_bins: usize) -> Self {
        RadialBins { r_max, n_bins }
    }

    pub fn width(&self) -> f64 {
        self.r_max / self.n_bins as f64
    }

    pub fn edges(&self, bin: usize) -> (f64, f64) {
        let w = self.width();
        (bin as f64 * w, (bin + 1) as f64 * w)
    }

    pub fn center(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) * self.width()
    }

    pub fn bin_of(&self, r: f64) -> Option<usize> {
        if r < 0.0 || r >= self.r_max {
            return None;
        }
        Some(((r / self.width()) as usize).min(self.n_bins - 1))
    }

    pub fn shell_volume(&self, bin: usize, dim: usize) -> f64 {
        let (lo, hi) = self.edges(bin);
        unit_ball_volume(dim) * (hi.powi(dim as i32) - lo.powi(dim as i32))
    }

    pub fn validate(&self, torus: &Torus) -> Result<()> {
        if self.n_bins == 0 {
            return Err(Error::InvalidInput("need at least one radial bin".into()));
        }
        if !(self.r_max.is_finite() && self.r_max > 0.0) {
            return Err(Error::InvalidInput(format!("r_max must be positive, got {}", self.r_max)));
        }
        if self.r_max > 0.5 * torus.length {
            return Err(Error::InvalidInput(format!(
                "r_max = {} exceeds half the box length {}",
                self.r_max,
                0.5 * torus.length
            )));
        }
        if self.width() < MIN_BIN_FRACTION * torus.length {
            return Err(Error::InvalidInput(format!(
                "radial bin width {} is below the position resolution",
                self.width()
            )));
        }
        Ok(())
    }
}

/// Gridded one-point density estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: Grid,
    pub time: f64,
    pub n_traj: usize,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Ensemble-mean particle number.
    pub mean_count: f64,
}

impl DensityEstimate {
    /// Cell sum times cell volume.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `bin_center,value,stderr`; in more than one dimension the centre
    /// coordinates are joined with `;`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bin_center,value,stderr")?;
        let dim = self.grid.dim();
        for (i, (v, s)) in self.values.iter().zip(&self.stderr).enumerate() {
            let c = self.grid.cell_center(i);
            let center = c[..dim].iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
            writeln!(out, "{center},{v},{s}")?;
        }
        Ok(())
    }
}

/// Radial ordered-pair density estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialEstimate {
    pub torus: Torus,
    pub bins: RadialBins,
    pub time: f64,
    pub n_traj: usize,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl RadialEstimate {
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bin_center,value,stderr")?;
        for (b, (v, s)) in self.values.iter().zip(&self.stderr).enumerate() {
            writeln!(out, "{},{v},{s}", self.bins.center(b))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub time: f64,
    pub n_traj: usize,
    pub k1: DensityEstimate,
    pub k2_radial: RadialEstimate,
}

impl CorrelationEstimate {
    /// Multiplies `k1` by `epsilon` and `k2` by `epsilon^2`, standard errors included.
    pub fn renormalized(&self, epsilon: f64) -> Self {
        let mut out = self.clone();
        for v in out.k1.values.iter_mut().chain(out.k1.stderr.iter_mut()) {
            *v *= epsilon;
        }
        out.k1.mean_count *= epsilon;
        let eps2 = epsilon * epsilon;
        for v in out.k2_radial.values.iter_mut().chain(out.k2_radial.stderr.iter_mut()) {
            *v *= eps2;
        }
        out
    }

    /// `{time, n_traj, grid}` sidecar for the CSV files.
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "time": self.time,
            "n_traj": self.n_traj,
            "grid": self.k1.grid,
            "radial_bins": self.k2_radial.bins,
        })
    }
}

/// Positions of every trajectory at snapshot `index`.
pub fn snapshots_at(trajectories: &[Trajectory], index: usize) -> Result<Vec<&[Point]>> {
    if trajectories.is_empty() {
        return Err(Error::InvalidInput("empty ensemble".into()));
    }
    trajectories
        .iter()
        .map(|t| {
            t.snapshot(index).ok_or_else(|| {
                Error::InvalidInput(format!("trajectory on stream {} has no snapshot {index}", t.stream))
            })
        })
        .collect()
}

fn mean_and_stderr(samples: impl Iterator<Item = f64>, n: usize) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for x in samples {
        sum += x;
        sum_sq += x * x;
    }
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

pub fn estimate_density(snapshots: &[&[Point]], time: f64, grid: Grid) -> Result<DensityEstimate> {
    if snapshots.is_empty() {
        return Err(Error::InvalidInput("empty ensemble".into()));
    }
    let n = snapshots.len();
    let cells = grid.len();
    let mut counts = vec![vec![0u32; cells]; n];
    for (row, snap) in counts.iter_mut().zip(snapshots) {
        for p in snap.iter() {
            row[grid.cell_of(p)] += 1;
        }
    }
    let vol = grid.cell_volume();
    let mut values = Vec::with_capacity(cells);
    let mut stderr = Vec::with_capacity(cells);
    for c in 0..cells {
        let (m, s) = mean_and_stderr(counts.iter().map(|row| f64::from(row[c])), n);
        values.push(m / vol);
        stderr.push(s / vol);
    }
    let mean_count = snapshots.iter().map(|s| s.len() as f64).sum::<f64>() / n as f64;
    Ok(DensityEstimate {
        grid,
        time,
        n_traj: n,
        values,
        stderr,
        mean_count,
    })
}

/// Ordered-pair counts per radial bin for one configuration.
pub fn pair_counts(torus: &Torus, positions: &[Point], bins: &RadialBins) -> Vec<u64> {
    let mut counts = vec![0u64; bins.n_bins];
    if positions.len() < 2 {
        return counts;
    }
    let cells = CellList::new(*torus, bins.r_max, positions);
    for (i, p) in positions.iter().enumerate() {
        cells.for_each_candidate(p, |j| {
            if j != i {
                if let Some(b) = bins.bin_of(torus.distance(p, &positions[j])) {
                    counts[b] += 1;
                }
            }
        });
    }
    counts
}

pub fn estimate_pair_correlation(snapshots: &[&[Point]], time: f64, torus: Torus, bins: RadialBins) -> Result<RadialEstimate> {
    if snapshots.is_empty() {
        return Err(Error::InvalidInput("empty ensemble".into()));
    }
    bins.validate(&torus)?;
    let n = snapshots.len();
    let per_traj: Vec<Vec<u64>> = snapshots.iter().map(|s| pair_counts(&torus, s, &bins)).collect();
    let mut values = Vec::with_capacity(bins.n_bins);
    let mut stderr = Vec::with_capacity(bins.n_bins);
    for b in 0..bins.n_bins {
        let norm = bins.shell_volume(b, torus.dim) * torus.volume();
        let (m, s) = mean_and_stderr(per_traj.iter().map(|c| c[b] as f64), n);
        values.push(m / norm);
        stderr.push(s / norm);
    }
    Ok(RadialEstimate {
        torus,
        bins,
        time,
        n_traj: n,
        values,
        stderr,
    })
}

pub fn estimate_correlations(snapshots: &[&[Point]], time: f64, grid: Grid, bins: RadialBins) -> Result<CorrelationEstimate> {
    let k1 = estimate_density(snapshots, time, grid)?;
    let k2_radial = estimate_pair_correlation(snapshots, time, grid.torus, bins)?;
    Ok(CorrelationEstimate {
        time,
        n_traj: snapshots.len(),
        k1,
        k2_radial,
    })
}

/// `prod_{x in gamma} f(x)`; the empty product is 1.
pub fn lp_exponent<F: Fn(&Point) -> f64>(f: F, positions: &[Point]) -> f64 {
    positions.iter().map(f).product()
}

/// Radially averaged product `rho (x) rho` and its propagated standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProduct {
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

fn triangular_cdf(z: f64) -> f64 {
    if z <= -1.0 {
        0.0
    } else if z <= 0.0 {
        0.5 * (1.0 + z) * (1.0 + z)
    } else if z < 1.0 {
        1.0 - 0.5 * (1.0 - z) * (1.0 - z)
    } else {
        1.0
    }
}

fn representative(offset: usize, n: usize) -> i64 {
    let o = offset as i64;
    if o > n as i64 / 2 {
        o - n as i64
    } else {
        o
    }
}

/// For each cell offset, the measure `h^d P(|x - y| in bin)` with `x` uniform in a
/// cell and `y` uniform in the shifted cell.
fn pair_bin_weights(grid: &Grid, bins: &RadialBins) -> Vec<([i64; MAX_DIM], Vec<(usize, f64)>)> {
    let dim = grid.dim();
    let n = grid.n_cells;
    let h = grid.spacing();
    let length = grid.torus.length;
    let reach = ((bins.r_max / h).ceil() as i64 + 1).min(n as i64);
    let axis: Vec<i64> = (0..n).map(|o| representative(o, n)).filter(|o| o.abs() <= reach).collect();

    let mut offsets = vec![[0i64; MAX_DIM]];
    for k in 0..dim {
        offsets = offsets
            .into_iter()
            .flat_map(|base| {
                axis.iter().map(move |&o| {
                    let mut next = base;
                    next[k] = o;
                    next
                })
            })
            .collect();
    }

    let vol = grid.cell_volume();
    let mut out = Vec::new();
    if dim == 1 {
        for off in offsets {
            let shift = off[0] as f64 * h;
            let prob = |a: f64, b: f64| triangular_cdf((b - shift) / h) - triangular_cdf((a - shift) / h);
            let mut row = Vec::new();
            for b in 0..bins.n_bins {
                let (lo, hi) = bins.edges(b);
                let mut p = 0.0;
                for k in -2..=2 {
                    let s = k as f64 * length;
                    p += prob(lo + s, hi + s) + prob(-hi + s, -lo + s);
                }
                if p > 0.0 {
                    row.push((b, p * vol));
                }
            }
            if !row.is_empty() {
                out.push((off, row));
            }
        }
        return out;
    }

    // Sub-cell midpoints: per axis the difference takes values (a - b) h / m
    // with weight (m - |a - b|) / m^2.
    let m: i64 = if dim == 2 { 8 } else { 6 };
    let diffs: Vec<(f64, f64)> = (-(m - 1)..m)
        .map(|j| (j as f64 * h / m as f64, (m - j.abs()) as f64 / (m * m) as f64))
        .collect();
    for off in offsets {
        let mut row = vec![0.0; bins.n_bins];
        let mut idx = [0usize; MAX_DIM];
        loop {
            let mut d: Point = [0.0; MAX_DIM];
            let mut w = 1.0;
            for k in 0..dim {
                let (dx, wk) = diffs[idx[k]];
                let mut u = off[k] as f64 * h + dx;
                u -= length * (u / length).round();
                d[k] = u;
                w *= wk;
            }
            if let Some(b) = bins.bin_of(norm(&d, dim)) {
                row[b] += w * vol;
            }
            let mut k = 0;
            while k < dim {
                idx[k] += 1;
                if idx[k] < diffs.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == dim {
                break;
            }
        }
        let row: Vec<(usize, f64)> = row.into_iter().enumerate().filter(|(_, w)| *w > 0.0).collect();
        if !row.is_empty() {
            out.push((off, row));
        }
    }
    out
}

/// Radial average of `rho(x) rho(y)` over pairs at distance in each bin,
/// normalised the same way as [`estimate_pair_correlation`].
///
/// When `stderr` is given the diagonal of the squared sample mean is
/// debiased and the error is propagated to first order.
pub fn radial_product(grid: &Grid, values: &[f64], stderr: Option<&[f64]>, bins: &RadialBins) -> Result<RadialProduct> {
    bins.validate(&grid.torus)?;
    if values.len() != grid.len() || stderr.is_some_and(|s| s.len() != grid.len()) {
        return Err(Error::InvalidInput("field length does not match the grid".into()));
    }
    let weights = pair_bin_weights(grid, bins);
    let vol = grid.cell_volume();
    let cells = grid.len();
    let mut shell = vec![0.0; bins.n_bins];
    let mut total = vec![0.0; bins.n_bins];
    let mut gradient = vec![vec![0.0; cells]; bins.n_bins];
    let multi: Vec<_> = (0..cells).map(|i| grid.multi_index(i)).collect();
    for (off, row) in &weights {
        let neg = [-off[0], -off[1], -off[2]];
        let mut corr = 0.0;
        let mut plus = vec![0.0; cells];
        for i in 0..cells {
            let j = grid.shifted(&multi[i], off);
            corr += values[i] * values[j];
            if stderr.is_some() {
                plus[i] = values[j] + values[grid.shifted(&multi[i], &neg)];
            }
        }
        corr *= vol;
        if *off == [0; MAX_DIM] {
            if let Some(se) = stderr {
                corr -= se.iter().map(|s| s * s).sum::<f64>() * vol;
            }
        }
        for &(b, w) in row {
            shell[b] += w;
            total[b] += corr * w;
            if stderr.is_some() {
                for i in 0..cells {
                    gradient[b][i] += w * plus[i] * vol;
                }
            }
        }
    }
    let volume = grid.torus.volume();
    let mut out = RadialProduct {
        values: Vec::with_capacity(bins.n_bins),
        stderr: Vec::with_capacity(bins.n_bins),
    };
    for b in 0..bins.n_bins {
        let norm = volume * shell[b];
        out.values.push(total[b] / norm);
        let var = match stderr {
            Some(se) => gradient[b].iter().zip(se).map(|(g, s)| (g * s / norm).powi(2)).sum(),
            None => 0.0,
        };
        out.stderr.push(var.sqrt());
    }
    Ok(out)
}

/// Sup-norm diagnostics for the scale of weighted norms
/// `||k||_theta = sup_n nu_n(k) e^{theta n}`, truncated at `n = 2`.
///
/// The truncation makes `norm_estimate` a lower bound on the full norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubPoissonReport {
    pub theta: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub norm_estimate: f64,
    /// `sup_b |k2_b - (k1 (x) k1)_b|`.
    pub factorization_residual: f64,
    /// Combined standard error at the bin attaining the residual.
    pub residual_stderr: f64,
    /// Largest per-bin `|k2_b - (k1 (x) k1)_b| / se_b`.
    pub max_z: f64,
    pub residuals: Vec<f64>,
    pub residual_stderrs: Vec<f64>,
}

impl SubPoissonReport {
    /// Every bin's residual lies within `sigmas` combined standard errors.
    pub fn factorizes_within(&self, sigmas: f64) -> bool {
        self.residuals
            .iter()
            .zip(&self.residual_stderrs)
            .all(|(r, s)| r.abs() <= sigmas * s)
    }
}

pub fn sub_poisson_report(estimate: &CorrelationEstimate, theta: f64) -> Result<SubPoissonReport> {
    let k1 = &estimate.k1;
    let k2 = &estimate.k2_radial;
    let nu1 = k1.sup();
    let nu2 = k2.sup();
    let norm_estimate = 1f64.max(nu1 * theta.exp()).max(nu2 * (2.0 * theta).exp());
    let product = radial_product(&k1.grid, &k1.values, Some(&k1.stderr), &k2.bins)?;
    let residuals: Vec<f64> = k2.values.iter().zip(&product.values).map(|(a, b)| a - b).collect();
    let residual_stderrs: Vec<f64> = k2
        .stderr
        .iter()
        .zip(&product.stderr)
        .map(|(a, b)| (a * a + b * b).sqrt())
        .collect();
    let mut factorization_residual = 0.0;
    let mut residual_stderr = 0.0;
    let mut max_z: f64 = 0.0;
    for (r, s) in residuals.iter().zip(&residual_stderrs) {
        if r.abs() > factorization_residual {
            factorization_residual = r.abs();
            residual_stderr = *s;
        }
        let z = if *s > 0.0 {
            r.abs() / s
        } else if *r == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        max_z = max_z.max(z);
    }
    Ok(SubPoissonReport {
        theta,
        nu1,
        nu2,
        norm_estimate,
        factorization_residual,
        residual_stderr,
        max_z,
        residuals,
        residual_stderrs,
    })
}
