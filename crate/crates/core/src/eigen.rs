//! Lowest-eigenpair solvers for the M-scaled Hermitian systems: a blocked
//! preconditioned subspace iteration (LOBPCG-style) for large grids and a
//! dense eigendecomposition fallback for desk-scale systems.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::linalg;

type C = Complex64;

/// Configuration of the lowest-eigenpair solver.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Per-eigenpair residual tolerance ||A v - lambda v|| / ||v||.
    pub tol: f64,
    pub max_iter: usize,
    /// Seed of the iteration's random start block.
    pub seed: u64,
    /// Systems of at most this dimension are solved densely.
    pub dense_cutoff: usize,
    /// Extra block vectors beyond the requested count.
    pub block_extra: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 600,
            seed: 0,
            dense_cutoff: 3000,
            block_extra: 3,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone)]
pub struct EigResult {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<C>>,
    /// ||A v - lambda v|| / ||v|| per pair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub used_dense: bool,
}

/// Hermitian operator interface for the iterative solver.
pub trait HermitianOp: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C], y: &mut [C]);
    fn to_dense(&self) -> faer::Mat<C>;
}

/// SPD preconditioner interface.
pub trait Preconditioner: Sync {
    fn apply(&self, r: &[C], out: &mut [C]);
}

/// Smallest `n_ev` eigenpairs of a Hermitian operator.
pub fn solve_lowest<O: HermitianOp>(
    op: &O,
    n_ev: usize,
    precond: Option<&dyn Preconditioner>,
    cfg: &SolverConfig,
) -> Result<EigResult> {
    let n = op.dim();
    if n_ev == 0 || n_ev >= n {
        return Err(CoreError::InvalidArgument(format!(
            "requested {n_ev} eigenpairs of a dimension-{n} operator"
        )));
    }
    let block = (n_ev + cfg.block_extra).min(n);
    if n <= cfg.dense_cutoff || 4 * 3 * block >= n {
        return dense_lowest(op, n_ev);
    }
    lobpcg(op, n_ev, block, precond, cfg)
}

fn dense_lowest<O: HermitianOp>(op: &O, n_ev: usize) -> Result<EigResult> {
    let dense = op.to_dense();
    let (vals, vecs) = linalg::hermitian_eigen(dense.as_ref())?;
    let n = op.dim();
    let mut eigenvalues = Vec::with_capacity(n_ev);
    let mut eigenvectors = Vec::with_capacity(n_ev);
    let mut residuals = Vec::with_capacity(n_ev);
    let mut work = vec![C::default(); n];
    for j in 0..n_ev {
        let v: Vec<C> = (0..n).map(|i| vecs[(i, j)]).collect();
        op.apply(&v, &mut work);
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..n {
            num += (work[i] - v[i] * vals[j]).norm_sqr();
            den += v[i].norm_sqr();
        }
        eigenvalues.push(vals[j]);
        eigenvectors.push(v);
        residuals.push((num / den).sqrt());
    }
    Ok(EigResult {
        eigenvalues,
        eigenvectors,
        residuals,
        iterations: 0,
        used_dense: true,
    })
}

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &mut [C], alpha: C, x: &[C]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi -= alpha * *xi;
    }
}

/// Two-pass modified Gram-Schmidt of `cols` against `fixed` and against the
/// already-accepted columns. Near-dependent columns are dropped.
fn orthonormalize(cols: Vec<Vec<C>>, fixed: &[Vec<C>], drop_tol: f64) -> Vec<Vec<C>> {
    let mut accepted: Vec<Vec<C>> = Vec::with_capacity(cols.len());
    for mut v in cols {
        let initial = norm(&v);
        if initial == 0.0 {
            continue;
        }
        for _pass in 0..2 {
            for f in fixed {
                let c = dot(f, &v);
                axpy(&mut v, c, f);
            }
            for f in &accepted {
                let c = dot(f, &v);
                axpy(&mut v, c, f);
            }
        }
        let after = norm(&v);
        if after > drop_tol * initial {
            let inv = 1.0 / after;
            v.iter_mut().for_each(|x| *x *= inv);
            accepted.push(v);
        }
    }
    accepted
}

fn lobpcg<O: HermitianOp>(
    op: &O,
    n_ev: usize,
    block: usize,
    precond: Option<&dyn Preconditioner>,
    cfg: &SolverConfig,
) -> Result<EigResult> {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let raw: Vec<Vec<C>> = (0..block)
        .map(|_| {
            (0..n)
                .map(|_| C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect()
        })
        .collect();
    let mut x = orthonormalize(raw, &[], 1e-12);
    let mut w: Vec<Vec<C>> = Vec::new();
    let mut p: Vec<Vec<C>> = Vec::new();
    let mut best_resid: Vec<f64> = vec![f64::INFINITY; n_ev];

    for it in 1..=cfg.max_iter {
        // Trial basis [X | W | P], kept orthonormal.
        let mut basis = x.clone();
        let w_ortho = orthonormalize(std::mem::take(&mut w), &basis, 1e-8);
        basis.extend(w_ortho);
        let p_ortho = orthonormalize(std::mem::take(&mut p), &basis, 1e-8);
        basis.extend(p_ortho);
        let nb = basis.len();
        let mx = x.len();

        let mut abasis: Vec<Vec<C>> = Vec::with_capacity(nb);
        for b in &basis {
            let mut y = vec![C::default(); n];
            op.apply(b, &mut y);
            abasis.push(y);
        }

        // Rayleigh-Ritz on the trial space.
        let mut g = faer::Mat::<C>::zeros(nb, nb);
        for i in 0..nb {
            for j in i..nb {
                let v = dot(&basis[i], &abasis[j]);
                g[(i, j)] = v;
                if i != j {
                    g[(j, i)] = v.conj();
                }
            }
        }
        let (theta, y) = linalg::hermitian_eigen(g.as_ref())?;

        let combine = |coeff_col: usize, rows: std::ops::Range<usize>, src: &[Vec<C>]| -> Vec<C> {
            let mut out = vec![C::default(); n];
            for r in rows {
                let c = y[(r, coeff_col)];
                if c.norm_sqr() > 0.0 {
                    for (o, s) in out.iter_mut().zip(&src[r]) {
                        *o += c * *s;
                    }
                }
            }
            out
        };

        let mut xn: Vec<Vec<C>> = Vec::with_capacity(block);
        let mut resid: Vec<f64> = Vec::with_capacity(block);
        let mut rblock: Vec<Vec<C>> = Vec::with_capacity(block);
        let take = block.min(nb);
        for j in 0..take {
            let xj = combine(j, 0..nb, &basis);
            let axj = combine(j, 0..nb, &abasis);
            let mut r = axj;
            for (ri, xi) in r.iter_mut().zip(&xj) {
                *ri -= *xi * theta[j];
            }
            let rn = norm(&r) / norm(&xj).max(f64::MIN_POSITIVE);
            resid.push(rn);
            rblock.push(r);
            xn.push(xj);
        }
        for j in 0..n_ev.min(take) {
            best_resid[j] = best_resid[j].min(resid[j]);
        }

        if resid.iter().take(n_ev).all(|&r| r <= cfg.tol) {
            return Ok(EigResult {
                eigenvalues: theta[..n_ev].to_vec(),
                eigenvectors: xn[..n_ev].to_vec(),
                residuals: resid[..n_ev].to_vec(),
                iterations: it,
                used_dense: false,
            });
        }

        // Conjugate directions: the W/P part of the new Ritz vectors.
        let mut pn: Vec<Vec<C>> = Vec::with_capacity(take);
        if nb > mx {
            for j in 0..take {
                pn.push(combine(j, mx..nb, &basis));
            }
        }

        // Preconditioned residuals become the next W block.
        w = rblock
            .into_iter()
            .map(|r| match precond {
                Some(t) => {
                    let mut out = vec![C::default(); n];
                    t.apply(&r, &mut out);
                    out
                }
                None => r,
            })
            .collect();
        p = pn;
        x = xn;
    }

    Err(CoreError::SolverDidNotConverge {
        iterations: cfg.max_iter,
        residuals: best_resid,
    })
}

/// Diagonal-in-Fourier-space preconditioner: the inverse of the shifted
/// constant-coefficient seven-point symbol on the periodic fiber grid. The
/// twist and the variable coefficients are ignored; the operator is SPD
/// either way, which is all the subspace iteration needs.
pub struct FourierDiagonalPrecond {
    dims: [usize; 3],
    inv_symbol: Vec<f64>,
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl FourierDiagonalPrecond {
    pub fn new(dims: [usize; 3], h: [f64; 3], shift: f64) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let fwd = [
            planner.plan_fft_forward(dims[0]),
            planner.plan_fft_forward(dims[1]),
            planner.plan_fft_forward(dims[2]),
        ];
        let inv = [
            planner.plan_fft_inverse(dims[0]),
            planner.plan_fft_inverse(dims[1]),
            planner.plan_fft_inverse(dims[2]),
        ];
        let total = dims[0] * dims[1] * dims[2];
        let mut inv_symbol = vec![0.0f64; total];
        let scale = 1.0 / total as f64;
        for m3 in 0..dims[2] {
            for m2 in 0..dims[1] {
                for m1 in 0..dims[0] {
                    let idx = (m3 * dims[1] + m2) * dims[0] + m1;
                    let mut sym = shift;
                    for (d, &m) in [m1, m2, m3].iter().enumerate() {
                        let theta = 2.0 * PI * m as f64 / dims[d] as f64;
                        sym += (2.0 - 2.0 * theta.cos()) / (h[d] * h[d]);
                    }
                    inv_symbol[idx] = scale / sym;
                }
            }
        }
        Self {
            dims,
            inv_symbol,
            fwd,
            inv,
        }
    }

    fn pass(&self, buf: &mut [C], axis: usize, forward: bool) {
        let [n1, n2, n3] = self.dims;
        let plan = if forward {
            &self.fwd[axis]
        } else {
            &self.inv[axis]
        };
        match axis {
            0 => {
                for chunk in buf.chunks_exact_mut(n1) {
                    plan.process(chunk);
                }
            }
            1 => {
                let mut line = vec![C::default(); n2];
                for i3 in 0..n3 {
                    for i1 in 0..n1 {
                        for i2 in 0..n2 {
                            line[i2] = buf[(i3 * n2 + i2) * n1 + i1];
                        }
                        plan.process(&mut line);
                        for i2 in 0..n2 {
                            buf[(i3 * n2 + i2) * n1 + i1] = line[i2];
                        }
                    }
                }
            }
            _ => {
                let stride = n1 * n2;
                let mut line = vec![C::default(); n3];
                for base in 0..stride {
                    for i3 in 0..n3 {
                        line[i3] = buf[i3 * stride + base];
                    }
                    plan.process(&mut line);
                    for i3 in 0..n3 {
                        buf[i3 * stride + base] = line[i3];
                    }
                }
            }
        }
    }
}

impl Preconditioner for FourierDiagonalPrecond {
    fn apply(&self, r: &[C], out: &mut [C]) {
        out.copy_from_slice(r);
        for axis in 0..3 {
            self.pass(out, axis, true);
        }
        for (o, s) in out.iter_mut().zip(&self.inv_symbol) {
            *o *= *s;
        }
        for axis in 0..3 {
            self.pass(out, axis, false);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::MultiTriplets;

    struct CsrOp(crate::sparse::CsrMatrix);

    impl HermitianOp for CsrOp {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn apply(&self, x: &[C], y: &mut [C]) {
            self.0.matvec(x, y);
        }
        fn to_dense(&self) -> faer::Mat<C> {
            self.0.to_dense()
        }
    }

    /// 1D Dirichlet Laplacian: eigenvalues 2 - 2 cos(pi k / (n + 1)).
    fn laplacian_1d(n: usize) -> CsrOp {
        let mut t = MultiTriplets::<1>::new(n);
        for i in 0..n {
            t.add(i, i, [C::new(2.0, 0.0)]);
            if i + 1 < n {
                t.add(i, i + 1, [C::new(-1.0, 0.0)]);
                t.add(i + 1, i, [C::new(-1.0, 0.0)]);
            }
        }
        let (pattern, vals) = t.build();
        CsrOp(crate::sparse::CsrMatrix {
            pattern,
            vals: vals.into_iter().next().unwrap(),
        })
    }

    fn exact_lap(n: usize, k: usize) -> f64 {
        2.0 - 2.0 * (PI * k as f64 / (n as f64 + 1.0)).cos()
    }

    #[test]
    fn dense_path_matches_analytic() {
        let op = laplacian_1d(40);
        let cfg = SolverConfig::default();
        let res = solve_lowest(&op, 3, None, &cfg).unwrap();
        assert!(res.used_dense);
        for k in 0..3 {
            assert!((res.eigenvalues[k] - exact_lap(40, k + 1)).abs() < 1e-10);
            assert!(res.residuals[k] <= 1e-10);
        }
    }

    #[test]
    fn lobpcg_path_matches_analytic() {
        let op = laplacian_1d(500);
        let cfg = SolverConfig {
            dense_cutoff: 10,
            tol: 1e-8,
            max_iter: 2000,
            ..SolverConfig::default()
        };
        let res = solve_lowest(&op, 4, None, &cfg).unwrap();
        assert!(!res.used_dense);
        for k in 0..4 {
            assert!(
                (res.eigenvalues[k] - exact_lap(500, k + 1)).abs() < 1e-7,
                "band {k}: {} vs {}",
                res.eigenvalues[k],
                exact_lap(500, k + 1)
            );
            assert!(res.residuals[k] <= 1e-8);
        }
    }

    #[test]
    fn lobpcg_is_deterministic_in_the_seed() {
        let op = laplacian_1d(300);
        let cfg = SolverConfig {
            dense_cutoff: 10,
            tol: 1e-8,
            seed: 7,
            ..SolverConfig::default()
        };
        let a = solve_lowest(&op, 2, None, &cfg).unwrap();
        let b = solve_lowest(&op, 2, None, &cfg).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.eigenvectors, b.eigenvectors);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn nonconvergence_reports_residuals() {
        let op = laplacian_1d(400);
        let cfg = SolverConfig {
            dense_cutoff: 10,
            tol: 1e-14,
            max_iter: 2,
            ..SolverConfig::default()
        };
        match solve_lowest(&op, 2, None, &cfg) {
            Err(CoreError::SolverDidNotConverge {
                iterations,
                residuals,
            }) => {
                assert_eq!(iterations, 2);
                assert_eq!(residuals.len(), 2);
                assert!(residuals.iter().all(|r| r.is_finite()));
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn fourier_precond_inverts_shifted_symbol() {
        // On the periodic grid the preconditioner composed with forward FFTs
        // is exact for its own symbol; here just check SPD behavior: positive
        // quadratic form on a few vectors.
        let t = FourierDiagonalPrecond::new([4, 4, 4], [1.0, 1.0, 1.0], 0.7);
        let n = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..3 {
            let r: Vec<C> = (0..n)
                .map(|_| C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let mut out = vec![C::default(); n];
            t.apply(&r, &mut out);
            let q = dot(&r, &out);
            assert!(q.re > 0.0);
            assert!(q.im.abs() <= 1e-12 * q.re);
        }
    }
}
