//! Band functions lambda_n(k) of the fiber family over k-paths and k-grids,
//! and the flat-band oscillation scan.

use rayon::prelude::*;
use serde::Serialize;

use crate::eigen::SolverConfig;
use crate::error::{CoreError, Result};
use crate::fiber::{assemble_family, FiberFamily};
use crate::grid::{GridMode, TwistedGrid};
use crate::problem::Problem;

/// Piecewise-linear path through the dual cell, resampled uniformly by arc
/// length into exactly waypoints * samples_per_segment points (both endpoints
/// included).
#[derive(Debug, Clone, Serialize)]
pub struct KPath {
    pub waypoints: Vec<[f64; 3]>,
    pub samples_per_segment: usize,
}

impl KPath {
    pub fn new(waypoints: Vec<[f64; 3]>, samples_per_segment: usize) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(CoreError::InvalidArgument(
                "a k-path needs at least 2 waypoints".into(),
            ));
        }
        if samples_per_segment < 2 {
            return Err(CoreError::InvalidArgument(
                "a k-path needs at least 2 samples per segment".into(),
            ));
        }
        Ok(Self {
            waypoints,
            samples_per_segment,
        })
    }

    /// The sampled k-points.
    pub fn points(&self) -> Vec<[f64; 3]> {
        let total = self.waypoints.len() * self.samples_per_segment;
        let mut cumul = vec![0.0f64];
        for w in self.waypoints.windows(2) {
            let d = dist(w[0], w[1]);
            cumul.push(cumul.last().unwrap() + d);
        }
        let length = *cumul.last().unwrap();
        let mut pts = Vec::with_capacity(total);
        for i in 0..total {
            let t = if total == 1 {
                0.0
            } else {
                length * i as f64 / (total - 1) as f64
            };
            pts.push(self.at_arc_length(&cumul, t));
        }
        pts
    }

    fn at_arc_length(&self, cumul: &[f64], t: f64) -> [f64; 3] {
        let nseg = self.waypoints.len() - 1;
        for s in 0..nseg {
            if t <= cumul[s + 1] || s == nseg - 1 {
                let span = cumul[s + 1] - cumul[s];
                let frac = if span > 0.0 { (t - cumul[s]) / span } else { 0.0 };
                let frac = frac.clamp(0.0, 1.0);
                let (a, b) = (self.waypoints[s], self.waypoints[s + 1]);
                return [
                    a[0] + frac * (b[0] - a[0]),
                    a[1] + frac * (b[1] - a[1]),
                    a[2] + frac * (b[2] - a[2]),
                ];
            }
        }
        *self.waypoints.last().unwrap()
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Band values over a list of k-points. Rows are per k-point; failed points
/// carry empty rows and are listed in `failures`.
#[derive(Debug, Clone, Serialize)]
pub struct BandTable {
    pub k_points: Vec<[f64; 3]>,
    /// values[j][n] = lambda_{n+1}(k_j), ascending in n.
    pub values: Vec<Vec<f64>>,
    pub residuals: Vec<Vec<f64>>,
    pub failures: Vec<(usize, String)>,
}

impl BandTable {
    pub fn cumulative_arc_length(&self) -> Vec<f64> {
        let mut acc = vec![0.0f64];
        for w in self.k_points.windows(2) {
            acc.push(acc.last().unwrap() + dist(w[0], w[1]));
        }
        acc
    }
}

/// Flat-band diagnostic: per-band oscillation over a full k-grid.
#[derive(Debug, Clone, Serialize)]
pub struct FlatBandReport {
    pub k_grid: usize,
    pub n_bands: usize,
    pub grid_sizes: [usize; 3],
    pub solver_tol: f64,
    pub band_min: Vec<f64>,
    pub band_max: Vec<f64>,
    /// osc_n = max_k lambda_n(k) - min_k lambda_n(k).
    pub oscillation: Vec<f64>,
    pub min_oscillation: f64,
}

fn solve_points(
    family: &FiberFamily,
    points: &[[f64; 3]],
    n_bands: usize,
    cfg: &SolverConfig,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<(usize, String)>) {
    let results: Vec<std::result::Result<(Vec<f64>, Vec<f64>), String>> = points
        .par_iter()
        .map(|&k| {
            let sys = family.fiber_at(k).map_err(|e| e.to_string())?;
            let res = sys.solve_lowest(n_bands, cfg).map_err(|e| e.to_string())?;
            Ok((res.eigenvalues, res.residuals))
        })
        .collect();
    let mut values = Vec::with_capacity(points.len());
    let mut residuals = Vec::with_capacity(points.len());
    let mut failures = Vec::new();
    for (j, r) in results.into_iter().enumerate() {
        match r {
            Ok((vals, resid)) => {
                values.push(vals);
                residuals.push(resid);
            }
            Err(msg) => {
                values.push(Vec::new());
                residuals.push(Vec::new());
                failures.push((j, msg));
            }
        }
    }
    (values, residuals, failures)
}

/// Band structure over a k-path; k-points are solved concurrently.
pub fn band_structure(
    problem: &Problem,
    grid: &TwistedGrid,
    path: &KPath,
    n_bands: usize,
    cfg: &SolverConfig,
) -> Result<BandTable> {
    if grid.mode() != GridMode::Fiber {
        return Err(CoreError::ModeMismatch {
            op: "band_structure",
            expected: GridMode::Fiber,
            found: grid.mode(),
        });
    }
    let family = assemble_family(problem, grid)?;
    let points = path.points();
    let (values, residuals, failures) = solve_points(&family, &points, n_bands, cfg);
    Ok(BandTable {
        k_points: points,
        values,
        residuals,
        failures,
    })
}

/// Band values over an explicit k-point list (shared assembly).
pub fn band_values_at(
    problem: &Problem,
    grid: &TwistedGrid,
    points: &[[f64; 3]],
    n_bands: usize,
    cfg: &SolverConfig,
) -> Result<BandTable> {
    if grid.mode() != GridMode::Fiber {
        return Err(CoreError::ModeMismatch {
            op: "band_values_at",
            expected: GridMode::Fiber,
            found: grid.mode(),
        });
    }
    let family = assemble_family(problem, grid)?;
    let (values, residuals, failures) = solve_points(&family, points, n_bands, cfg);
    Ok(BandTable {
        k_points: points.to_vec(),
        values,
        residuals,
        failures,
    })
}

/// Oscillation of the lowest bands over the uniform k-grid [0,1)^3 with
/// `k_grid` points per axis. A vanishing oscillation would be a flat band,
/// i.e. an eigenvalue of the full operator.
pub fn flat_band_scan(
    problem: &Problem,
    grid: &TwistedGrid,
    k_grid: usize,
    n_bands: usize,
    cfg: &SolverConfig,
) -> Result<FlatBandReport> {
    if grid.mode() != GridMode::Fiber {
        return Err(CoreError::ModeMismatch {
            op: "flat_band_scan",
            expected: GridMode::Fiber,
            found: grid.mode(),
        });
    }
    if k_grid < 2 {
        return Err(CoreError::InvalidArgument(
            "flat_band_scan needs a k-grid of at least 2 points per axis".into(),
        ));
    }
    let family = assemble_family(problem, grid)?;
    let mut points = Vec::with_capacity(k_grid.pow(3));
    for i1 in 0..k_grid {
        for i2 in 0..k_grid {
            for i3 in 0..k_grid {
                points.push([
                    i1 as f64 / k_grid as f64,
                    i2 as f64 / k_grid as f64,
                    i3 as f64 / k_grid as f64,
                ]);
            }
        }
    }
    let (values, _residuals, failures) = solve_points(&family, &points, n_bands, cfg);
    if let Some((j, msg)) = failures.first() {
        return Err(CoreError::InvalidArgument(format!(
            "eigensolve failed at k-grid point {j}: {msg}"
        )));
    }
    let mut band_min = vec![f64::INFINITY; n_bands];
    let mut band_max = vec![f64::NEG_INFINITY; n_bands];
    for row in &values {
        for (n, &v) in row.iter().enumerate() {
            band_min[n] = band_min[n].min(v);
            band_max[n] = band_max[n].max(v);
        }
    }
    let oscillation: Vec<f64> = band_min
        .iter()
        .zip(&band_max)
        .map(|(lo, hi)| hi - lo)
        .collect();
    let min_oscillation = oscillation.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(FlatBandReport {
        k_grid,
        n_bands,
        grid_sizes: grid.sizes(),
        solver_tol: cfg.tol,
        band_min,
        band_max,
        oscillation,
        min_oscillation,
    })
}
