//! Assembly of the discrete quadratic form h(k) (fiber mode) and of the
//! shifted slab form h0 (slab mode) as sparse Hermitian matrices, plus the
//! Floquet-Bloch-Gelfand transform test utility.
//!
//! The stencil is cell-based and covariant. Per cell and per corner p the
//! covariant gradient uses the forward differences along the three cell edges
//! meeting at p, the field term multiplies the mean of the eight corner
//! values, and the coefficients are sampled at the cell center; the cell
//! energy averages the corner quadrature points:
//!
//!   w_d(v; p) = -i * edge_diff_d(v; p) / h_d + (k_d - A_d(x_c)) * mean(v)
//!   v* H v = sum_cells vol * [ avg_p <G(x_c) w(v; p), w(v; p)>
//!                              + V(x_c) * mean|v|^2 ]
//!
//! with the potential term lumped onto the cell corners, so that a constant
//! shift of V shifts the matrix by an exact multiple of the lumped mass.
//! Every cell contributes a Hermitian positive-semidefinite block (plus the
//! potential), which makes Hermiticity, semiboundedness and the reflection
//! symmetry of the assembled matrix structural instead of asymptotic. The
//! corner average uses every cell edge individually, so the only cell-local
//! zero-energy mode of the free form is the constant.
//!
//! The dependence on the quasimomentum is quadratic, so the assembly produces
//! one sparsity pattern with the constant, linear and quadratic component
//! value arrays; a system at any (k, lambda) is a cheap linear combination.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::io::Write;

use crate::eigen::{
    solve_lowest, EigResult, FourierDiagonalPrecond, HermitianOp, Preconditioner, SolverConfig,
};
use crate::error::{CoreError, Result};
use crate::grid::{GridMode, TwistedGrid};
use crate::problem::Problem;
use crate::sparse::{CsrMatrix, CsrPattern, MultiTriplets};

type C = Complex64;

/// Component count of the quasimomentum family: constant, 3 linear, 6
/// quadratic (symmetric pairs), lumped mass.
const NCOMP: usize = 11;
const QUAD_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

/// Cell corner offsets in bit order (d1 fastest).
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

#[inline]
fn corner_index(d: &[usize; 3]) -> usize {
    d[0] + 2 * d[1] + 4 * d[2]
}

/// What a `FiberSystem` instance represents.
#[derive(Debug, Clone, Copy)]
pub enum FiberKind {
    /// Bloch fiber h(k); `k_reduced` is the zone representative actually
    /// entering the stencil.
    Bloch { k: [f64; 3], k_reduced: [f64; 3] },
    /// Slab form h0 with potentials A - (khat, 0) and V - lambda.
    Slab { khat: [f64; 2], lambda: f64 },
}

/// Assembled discrete form: sparse Hermitian matrix plus the uniform lumped
/// mass. Immutable after assembly; shareable across threads.
#[derive(Debug, Clone)]
pub struct FiberSystem {
    pub h: CsrMatrix,
    /// Lumped mass per node, h1*h2*h3.
    pub mass: f64,
    pub grid: TwistedGrid,
    pub kind: FiberKind,
    precond_shift: f64,
}

/// Quasimomentum-quadratic family of assembled forms over one (problem, grid)
/// pair: shared pattern, component value arrays.
pub struct FiberFamily {
    grid: TwistedGrid,
    pattern: std::sync::Arc<CsrPattern>,
    comps: Vec<Vec<C>>,
    lambda_shift: f64,
    khat_shift: [f64; 2],
    bound_v: f64,
    bound_a: [f64; 3],
    bound_g: f64,
}

/// Zone representative in [-1/2, 1/2): bands are periodic in k, and the
/// covariant stencil is most accurate at the representative nearest zero.
pub fn reduce_k(k: [f64; 3]) -> [f64; 3] {
    [
        k[0] - k[0].round(),
        k[1] - k[1].round(),
        k[2] - k[2].round(),
    ]
}

/// Assemble the component family for a problem on a grid (either mode).
pub fn assemble_family(problem: &Problem, grid: &TwistedGrid) -> Result<FiberFamily> {
    let [n1, n2, n3] = grid.sizes();
    let h = grid.spacing();
    let vol = grid.cell_volume();
    let mut trip = MultiTriplets::<NCOMP>::new(grid.dof_count());
    trip.reserve(64 * n1 * n2 * n3);

    let corners = CORNERS;

    for c3 in 0..n3 {
        for c2 in 0..n2 {
            for c1 in 0..n1 {
                let xc = [
                    grid.coord(0, c1) + 0.5 * h[0],
                    grid.coord(1, c2) + 0.5 * h[1],
                    grid.coord(2, c3) + 0.5 * h[2],
                ];
                let gmat = problem.eval_g(xc);
                let vpot = problem.eval_v(xc);
                let apot = problem.eval_a_total(xc);

                // Corner dofs and seam phases. Inner steps never leave the
                // slab, so the wraps always resolve.
                let mut dof = [0usize; 8];
                let mut phase = [C::default(); 8];
                for (ci, d) in corners.iter().enumerate() {
                    let mut idx = grid.index(c1, c2, c3);
                    let mut ph = C::new(1.0, 0.0);
                    let (mut i1, mut i2, mut i3) = (c1, c2, c3);
                    for axis in 0..3 {
                        if d[axis] == 1 {
                            let (next, p) = grid
                                .wrap(i1, i2, i3, axis, 1)
                                .expect("cell corners stay inside the slab");
                            let (a, b, c) = grid.node(next);
                            (i1, i2, i3) = (a, b, c);
                            idx = next;
                            ph *= p;
                        }
                    }
                    dof[ci] = idx;
                    phase[ci] = ph;
                }

                // Corner-mean row functional.
                let mut avg = [C::default(); 8];
                for ci in 0..8 {
                    avg[ci] = phase[ci] * 0.125;
                }

                let mut block = [[[C::default(); NCOMP]; 8]; 8];
                let wq = vol / 8.0; // quadrature weight per corner
                for dq in corners.iter() {
                    // Edge differences along the three edges at this corner;
                    // the row does not depend on the corner's own offset in
                    // the step direction, only on the transverse offsets.
                    let mut w0 = [[C::default(); 8]; 3];
                    for d in 0..3 {
                        let mut lo = *dq;
                        lo[d] = 0;
                        let mut hi = lo;
                        hi[d] = 1;
                        let lo_ci = corner_index(&lo);
                        let hi_ci = corner_index(&hi);
                        let minus_i_over_h = C::new(0.0, -1.0 / h[d]);
                        w0[d][hi_ci] += minus_i_over_h * phase[hi_ci];
                        w0[d][lo_ci] -= minus_i_over_h * phase[lo_ci];
                        for ci in 0..8 {
                            w0[d][ci] -= apot[d] * avg[ci];
                        }
                    }
                    // u_e = sum_d G_ed w0_d.
                    let mut u = [[C::default(); 8]; 3];
                    for e in 0..3 {
                        for ci in 0..8 {
                            let mut acc = C::default();
                            for d in 0..3 {
                                acc += gmat[e][d] * w0[d][ci];
                            }
                            u[e][ci] = acc;
                        }
                    }
                    for a in 0..8 {
                        for b in 0..8 {
                            let e = &mut block[a][b];
                            // constant part: sum_e conj(w0_e[a]) u_e[b]
                            let mut c0 = C::default();
                            for d in 0..3 {
                                c0 += w0[d][a].conj() * u[d][b];
                            }
                            e[0] += wq * c0;
                            // linear parts: conj(u_e[a]) avg[b] + conj(avg[a]) u_e[b]
                            for d in 0..3 {
                                e[1 + d] +=
                                    wq * (u[d][a].conj() * avg[b] + avg[a].conj() * u[d][b]);
                            }
                        }
                    }
                }
                // Quadratic parts: G_ij(x_c) * conj(avg[a]) avg[b]; identical
                // at every quadrature corner.
                for a in 0..8 {
                    for b in 0..8 {
                        let outer = avg[a].conj() * avg[b];
                        for (q, &(i, j)) in QUAD_PAIRS.iter().enumerate() {
                            block[a][b][4 + q] = vol * gmat[i][j] * outer;
                        }
                    }
                }
                // Hermitian-symmetrize each component so the assembled matrix
                // is Hermitian to the last bit.
                for a in 0..8 {
                    for b in (a + 1)..8 {
                        for comp in 0..NCOMP {
                            let m = (block[a][b][comp] + block[b][a][comp].conj()) * 0.5;
                            block[a][b][comp] = m;
                            block[b][a][comp] = m.conj();
                        }
                    }
                    for comp in 0..NCOMP {
                        block[a][a][comp] = C::new(block[a][a][comp].re, 0.0);
                    }
                }
                // Lumped potential and lumped mass on the corner diagonals.
                for a in 0..8 {
                    block[a][a][0] += C::new(vol * vpot * 0.125, 0.0);
                    block[a][a][10] = C::new(vol * 0.125, 0.0);
                }

                for a in 0..8 {
                    for b in 0..8 {
                        trip.add(dof[a], dof[b], block[a][b]);
                    }
                }
            }
        }
    }

    let (pattern, comps) = trip.build();
    let bounds = problem.coefficient_bounds();
    Ok(FiberFamily {
        grid: grid.clone(),
        pattern,
        comps,
        lambda_shift: problem.lambda_shift,
        khat_shift: problem.khat_shift,
        bound_v: bounds.v_max,
        bound_a: bounds.a_max,
        bound_g: bounds.g_max,
    })
}

impl FiberFamily {
    pub fn grid(&self) -> &TwistedGrid {
        &self.grid
    }

    fn combine(&self, k: [f64; 3], lambda: f64) -> Vec<C> {
        let nnz = self.comps[0].len();
        let mut vals = vec![C::default(); nnz];
        let mut weights = [0.0f64; NCOMP];
        weights[0] = 1.0;
        for d in 0..3 {
            weights[1 + d] = k[d];
        }
        for (q, &(i, j)) in QUAD_PAIRS.iter().enumerate() {
            weights[4 + q] = if i == j { k[i] * k[j] } else { 2.0 * k[i] * k[j] };
        }
        weights[10] = -lambda;
        for (comp, &wgt) in self.comps.iter().zip(weights.iter()) {
            if wgt != 0.0 {
                for (v, c) in vals.iter_mut().zip(comp.iter()) {
                    *v += wgt * *c;
                }
            }
        }
        vals
    }

    fn precond_shift(&self, k: [f64; 3], lambda: f64) -> f64 {
        let mut quad = 0.0;
        for d in 0..3 {
            let kappa = k[d].abs() + self.bound_a[d];
            quad += kappa * kappa;
        }
        1.0 + self.bound_v + lambda.abs() + self.bound_g * quad
    }

    /// The Bloch fiber h(k). The grid must be in fiber mode.
    pub fn fiber_at(&self, k: [f64; 3]) -> Result<FiberSystem> {
        if self.grid.mode() != GridMode::Fiber {
            return Err(CoreError::ModeMismatch {
                op: "assemble_fiber",
                expected: GridMode::Fiber,
                found: self.grid.mode(),
            });
        }
        let kr = reduce_k(k);
        let lambda = self.lambda_shift;
        Ok(FiberSystem {
            h: CsrMatrix {
                pattern: self.pattern.clone(),
                vals: self.combine(kr, lambda),
            },
            mass: self.grid.cell_volume(),
            grid: self.grid.clone(),
            kind: FiberKind::Bloch { k, k_reduced: kr },
            precond_shift: self.precond_shift(kr, lambda),
        })
    }

    /// The slab form h0 with potentials A - (khat, 0) and V - lambda. The
    /// grid must be in slab mode.
    pub fn slab_at(&self, khat: [f64; 2], lambda: f64) -> Result<FiberSystem> {
        if self.grid.mode() != GridMode::Slab {
            return Err(CoreError::ModeMismatch {
                op: "assemble_slab",
                expected: GridMode::Slab,
                found: self.grid.mode(),
            });
        }
        let kh = [
            khat[0] + self.khat_shift[0],
            khat[1] + self.khat_shift[1],
        ];
        let k = [kh[0], kh[1], 0.0];
        let lam = lambda + self.lambda_shift;
        Ok(FiberSystem {
            h: CsrMatrix {
                pattern: self.pattern.clone(),
                vals: self.combine(k, lam),
            },
            mass: self.grid.cell_volume(),
            grid: self.grid.clone(),
            kind: FiberKind::Slab { khat: kh, lambda: lam },
            precond_shift: self.precond_shift(k, lam),
        })
    }
}

/// One-shot assembly of the Bloch fiber h(k).
pub fn assemble_fiber(problem: &Problem, grid: &TwistedGrid, k: [f64; 3]) -> Result<FiberSystem> {
    if grid.mode() != GridMode::Fiber {
        return Err(CoreError::ModeMismatch {
            op: "assemble_fiber",
            expected: GridMode::Fiber,
            found: grid.mode(),
        });
    }
    assemble_family(problem, grid)?.fiber_at(k)
}

/// One-shot assembly of the slab form with shifted potentials.
pub fn assemble_slab(
    problem: &Problem,
    grid: &TwistedGrid,
    khat: [f64; 2],
    lambda: f64,
) -> Result<FiberSystem> {
    if grid.mode() != GridMode::Slab {
        return Err(CoreError::ModeMismatch {
            op: "assemble_slab",
            expected: GridMode::Slab,
            found: grid.mode(),
        });
    }
    assemble_family(problem, grid)?.slab_at(khat, lambda)
}

struct ScaledOp<'a> {
    mat: &'a CsrMatrix,
    scale: f64,
}

impl HermitianOp for ScaledOp<'_> {
    fn dim(&self) -> usize {
        self.mat.dim()
    }
    fn apply(&self, x: &[C], y: &mut [C]) {
        self.mat.matvec(x, y);
        for v in y.iter_mut() {
            *v *= self.scale;
        }
    }
    fn to_dense(&self) -> faer::Mat<C> {
        let mut d = self.mat.to_dense();
        for j in 0..d.ncols() {
            for i in 0..d.nrows() {
                d[(i, j)] *= self.scale;
            }
        }
        d
    }
}

impl FiberSystem {
    pub fn dof_count(&self) -> usize {
        self.h.dim()
    }

    /// Smallest eigenpairs of the mass-scaled problem (H, M).
    pub fn solve_lowest(&self, n_bands: usize, cfg: &SolverConfig) -> Result<EigResult> {
        let op = ScaledOp {
            mat: &self.h,
            scale: 1.0 / self.mass,
        };
        let precond: Option<FourierDiagonalPrecond> = match self.grid.mode() {
            GridMode::Fiber => Some(FourierDiagonalPrecond::new(
                self.grid.sizes(),
                self.grid.spacing(),
                self.precond_shift,
            )),
            GridMode::Slab => None,
        };
        solve_lowest(
            &op,
            n_bands,
            precond.as_ref().map(|p| p as &dyn Preconditioner),
            cfg,
        )
    }

    /// Quadratic form value v^H H v.
    pub fn form_value(&self, v: &[C]) -> C {
        let mut y = vec![C::default(); v.len()];
        self.h.matvec(v, &mut y);
        v.iter().zip(&y).map(|(a, b)| a.conj() * b).sum()
    }

    /// max |H - H^*| over stored entries (absolute).
    pub fn hermiticity_defect(&self) -> f64 {
        self.h.hermiticity_defect()
    }

    /// max |J^* H J - H| relative to max |H|.
    pub fn j_symmetry_defect(&self) -> f64 {
        let perm: Vec<usize> = (0..self.h.dim())
            .map(|d| self.grid.reflect_index(d))
            .collect();
        self.h.permutation_conjugation_defect(&perm) / self.h.norm_max().max(f64::MIN_POSITIVE)
    }

    /// The lower-bound shift gamma: the smallest nonnegative gamma with
    /// lambda_min(H + gamma M) >= 0.
    pub fn lower_bound_shift(&self, cfg: &SolverConfig) -> Result<f64> {
        let res = self.solve_lowest(1, cfg)?;
        Ok((-res.eigenvalues[0]).max(0.0))
    }

    /// Coordinate-format sparse text dump for external verification.
    pub fn write_coordinate_text<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        self.h.write_coordinate_text(w)
    }
}

// ---------------------------------------------------------------------------
// Floquet-Bloch-Gelfand transform on finitely supported data.
// ---------------------------------------------------------------------------

/// Grid samples of f on the translated cell Omega + 2*pi*shift.
#[derive(Debug, Clone)]
pub struct CellSample {
    pub shift: [i64; 3],
    pub values: Vec<C>,
}

/// Finitely supported grid data together with an evaluation quasimomentum.
#[derive(Debug, Clone)]
pub struct GelfandSample {
    pub support: Vec<CellSample>,
    pub k: [f64; 3],
}

/// (U f)(x, k) = sum_n exp(-i k.(x + 2 pi n)) exp(i n0 n2 x1) f(x + 2 pi n),
/// evaluated at the extended node (j1, j2, j3) with j_d in [0, n_d]; the
/// value of f at an index-n_d node is read from the adjacent cell copy.
pub fn gelfand_transform_extended(
    grid: &TwistedGrid,
    sample: &GelfandSample,
    j: [usize; 3],
) -> Result<C> {
    if grid.mode() != GridMode::Fiber {
        return Err(CoreError::ModeMismatch {
            op: "gelfand_transform",
            expected: GridMode::Fiber,
            found: grid.mode(),
        });
    }
    let n = grid.sizes();
    let flux = grid.flux() as f64;
    let x = [
        grid.coord(0, j[0]),
        grid.coord(1, j[1]),
        grid.coord(2, j[2]),
    ];
    // Fold extended indices into the owning cell copy.
    let mut node = [0usize; 3];
    let mut carry = [0i64; 3];
    for d in 0..3 {
        if j[d] == n[d] {
            node[d] = 0;
            carry[d] = 1;
        } else {
            debug_assert!(j[d] < n[d]);
            node[d] = j[d];
            carry[d] = 0;
        }
    }
    let node_idx = grid.index(node[0], node[1], node[2]);
    let k = sample.k;
    let mut acc = C::default();
    for cell in &sample.support {
        let m = [
            cell.shift[0] - carry[0],
            cell.shift[1] - carry[1],
            cell.shift[2] - carry[2],
        ];
        // f(x + 2 pi m) for the extended x equals the stored sample of the
        // cell at `cell.shift` evaluated at the folded node.
        let phase_k = -(k[0] * (x[0] + 2.0 * PI * m[0] as f64)
            + k[1] * (x[1] + 2.0 * PI * m[1] as f64)
            + k[2] * (x[2] + 2.0 * PI * m[2] as f64));
        let phase_b = flux * m[1] as f64 * x[0];
        acc += C::from_polar(1.0, phase_k + phase_b) * cell.values[node_idx];
    }
    Ok(acc)
}

/// The transform as a grid function on Omega.
pub fn gelfand_transform(grid: &TwistedGrid, sample: &GelfandSample) -> Result<Vec<C>> {
    let n = grid.sizes();
    for cell in &sample.support {
        if cell.values.len() != grid.dof_count() {
            return Err(CoreError::InvalidArgument(format!(
                "cell sample at {:?} has {} values, grid has {} dofs",
                cell.shift,
                cell.values.len(),
                grid.dof_count()
            )));
        }
    }
    let mut out = vec![C::default(); grid.dof_count()];
    for i3 in 0..n[2] {
        for i2 in 0..n[1] {
            for i1 in 0..n[0] {
                out[grid.index(i1, i2, i3)] =
                    gelfand_transform_extended(grid, sample, [i1, i2, i3])?;
            }
        }
    }
    Ok(out)
}

/// Lumped-mass squared norm of finitely supported data.
pub fn sample_norm_sq(grid: &TwistedGrid, sample: &GelfandSample) -> f64 {
    let vol = grid.cell_volume();
    sample
        .support
        .iter()
        .map(|c| c.values.iter().map(|v| v.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        * vol
}

/// Lumped-mass squared norm of a grid function on Omega.
pub fn grid_norm_sq(grid: &TwistedGrid, v: &[C]) -> f64 {
    grid.cell_volume() * v.iter().map(|x| x.norm_sqr()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::problem::{build_problem, CoefficientSpec};
    use approx::assert_abs_diff_eq;

    fn free() -> Problem {
        build_problem(&CoefficientSpec::free()).unwrap()
    }

    #[test]
    fn free_fiber_kernel_at_k_zero() {
        let grid = build_grid(GridMode::Fiber, 6, 6, 6, 0).unwrap();
        let sys = assemble_fiber(&free(), &grid, [0.0; 3]).unwrap();
        let ones = vec![C::new(1.0, 0.0); sys.dof_count()];
        let val = sys.form_value(&ones);
        assert_abs_diff_eq!(val.re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(val.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn free_fiber_constant_mode_eigenvalue_is_k_squared() {
        let grid = build_grid(GridMode::Fiber, 6, 6, 6, 0).unwrap();
        let k = [0.5, 0.5, 0.5];
        let sys = assemble_fiber(&free(), &grid, k).unwrap();
        let ones = vec![C::new(1.0, 0.0); sys.dof_count()];
        let val = sys.form_value(&ones).re;
        let msq = sys.mass * sys.dof_count() as f64;
        assert_abs_diff_eq!(val / msq, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn hermiticity_is_exact() {
        let spec = crate::problem::presets::potential();
        let p = build_problem(&spec).unwrap();
        let grid = build_grid(GridMode::Fiber, 5, 6, 4, 0).unwrap();
        let sys = assemble_fiber(&p, &grid, [0.21, 0.47, 0.93]).unwrap();
        assert!(sys.hermiticity_defect() <= 1e-14 * sys.h.norm_max());
    }

    #[test]
    fn mode_mismatch_rejected() {
        let slab = build_grid(GridMode::Slab, 4, 4, 4, 0).unwrap();
        assert!(assemble_fiber(&free(), &slab, [0.0; 3]).is_err());
        let fiber = build_grid(GridMode::Fiber, 4, 4, 4, 0).unwrap();
        assert!(assemble_slab(&free(), &fiber, [0.0; 2], 0.0).is_err());
    }

    #[test]
    fn slab_constant_form_value_with_lambda_shift() {
        // V = 0, lambda = 1: form value for the constant vector is -|Omega|.
        let grid = build_grid(GridMode::Slab, 4, 4, 4, 0).unwrap();
        let sys = assemble_slab(&free(), &grid, [0.0; 2], 1.0).unwrap();
        let ones = vec![C::new(1.0, 0.0); sys.dof_count()];
        let val = sys.form_value(&ones).re;
        let omega = (2.0 * PI).powi(3);
        assert_abs_diff_eq!(val, -omega, epsilon = 1e-9);
    }

    #[test]
    fn free_slab_is_positive_semidefinite() {
        let grid = build_grid(GridMode::Slab, 4, 4, 4, 0).unwrap();
        let sys = assemble_slab(&free(), &grid, [0.0; 2], 0.0).unwrap();
        let res = sys.solve_lowest(1, &SolverConfig::default()).unwrap();
        assert!(res.eigenvalues[0] >= -1e-10);
    }

    #[test]
    fn family_matches_one_shot_assembly() {
        let spec = crate::problem::presets::metric();
        let p = crate::problem::symmetrize(&build_problem(&spec).unwrap());
        let grid = build_grid(GridMode::Fiber, 4, 5, 6, 0).unwrap();
        let family = assemble_family(&p, &grid).unwrap();
        for k in [[0.0, 0.0, 0.0], [0.3, 0.8, 0.45]] {
            let a = family.fiber_at(k).unwrap();
            let b = assemble_fiber(&p, &grid, k).unwrap();
            let diff: f64 = a
                .h
                .vals
                .iter()
                .zip(&b.h.vals)
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            assert_eq!(diff, 0.0);
        }
    }

    #[test]
    fn constant_potential_shift_is_exact_mass_multiple() {
        use crate::problem::{FourierTerm, Target, Trig};
        let spec0 = CoefficientSpec::custom(
            vec![FourierTerm::new(Target::V, [1, 0, 0], 0.4, Trig::Cos)],
            0,
        );
        let spec5 = CoefficientSpec::custom(
            vec![
                FourierTerm::new(Target::V, [1, 0, 0], 0.4, Trig::Cos),
                FourierTerm::new(Target::V, [0, 0, 0], 5.0, Trig::Cos),
            ],
            0,
        );
        let grid = build_grid(GridMode::Fiber, 4, 4, 4, 0).unwrap();
        let k = [0.2, 0.6, 0.9];
        let h0 = assemble_fiber(&build_problem(&spec0).unwrap(), &grid, k).unwrap();
        let h5 = assemble_fiber(&build_problem(&spec5).unwrap(), &grid, k).unwrap();
        let vol = grid.cell_volume();
        for (i, (a, b)) in h0.h.vals.iter().zip(&h5.h.vals).enumerate() {
            let row_col_equal = {
                // diagonal entries get exactly 5*vol
                let p = &h0.h.pattern;
                let row = p.row_ptr.partition_point(|&r| r <= i) - 1;
                p.cols[i] as usize == row
            };
            let expected = if row_col_equal {
                *a + C::new(5.0 * vol, 0.0)
            } else {
                *a
            };
            assert!(
                (b - expected).norm() <= 1e-13 * (1.0 + a.norm()),
                "entry {i}"
            );
        }
    }

    #[test]
    fn gelfand_single_cell_support() {
        let grid = build_grid(GridMode::Fiber, 4, 4, 4, 0).unwrap();
        let mut values = vec![C::default(); grid.dof_count()];
        for (i, v) in values.iter_mut().enumerate() {
            *v = C::new((i % 5) as f64, (i % 3) as f64);
        }
        let k = [0.3, 0.6, 0.1];
        let sample = GelfandSample {
            support: vec![CellSample {
                shift: [0, 0, 0],
                values: values.clone(),
            }],
            k,
        };
        let out = gelfand_transform(&grid, &sample).unwrap();
        for i1 in 0..4 {
            let x = grid.coords(i1, 2, 3);
            let expect = C::from_polar(1.0, -(k[0] * x[0] + k[1] * x[1] + k[2] * x[2]))
                * values[grid.index(i1, 2, 3)];
            let got = out[grid.index(i1, 2, 3)];
            assert!((got - expect).norm() <= 1e-13);
        }
    }

    #[test]
    fn gelfand_shifted_cell_gains_magnetic_phase() {
        let grid = build_grid(GridMode::Fiber, 4, 4, 4, 2).unwrap();
        let mut values = vec![C::default(); grid.dof_count()];
        values[grid.index(1, 2, 3)] = C::new(1.0, 0.0);
        let k = [0.25, 0.5, 0.75];
        let sample = GelfandSample {
            support: vec![CellSample {
                shift: [0, 1, 0],
                values,
            }],
            k,
        };
        let out = gelfand_transform(&grid, &sample).unwrap();
        let x = grid.coords(1, 2, 3);
        let n0 = 2.0;
        let expect = C::from_polar(
            1.0,
            -(k[0] * x[0] + k[1] * (x[1] + 2.0 * PI) + k[2] * x[2]) + n0 * x[0],
        );
        let got = out[grid.index(1, 2, 3)];
        assert!((got - expect).norm() <= 1e-13);
    }
}
