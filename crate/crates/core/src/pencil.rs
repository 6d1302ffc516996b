//! The Dirichlet-Neumann pencil reduction on the slab: the discrete spaces N
//! and Z, the forms t0[u, v] = h0[u, v] and t1[u, v] = h0[u, Jv] on Z, the
//! linear pencil t0 + z t1, the Floquet multipliers zeta with
//! z = (1 + zeta^2) / (2 zeta), and the cross-check of the pencil route
//! against directly computed band functions.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::eigen::SolverConfig;
use crate::error::{CoreError, Result};
use crate::fiber::{assemble_family, FiberSystem};
use crate::grid::{GridMode, TwistedGrid};
use crate::linalg;
use crate::problem::Problem;

type C = Complex64;
type Mat = faer::Mat<C>;

/// Thresholds of the pencil pipeline.
#[derive(Debug, Clone)]
pub struct PencilConfig {
    /// Near-null threshold of the interior block, relative to its largest
    /// eigenvalue magnitude.
    pub tol_null: f64,
    /// Real/non-real classification: z is non-real iff |Im z| > tol_real (1 + |z|).
    pub tol_real: f64,
    /// Minimum allowed sigma_min(t1) / sigma_max(t1).
    pub tol_singular: f64,
    /// Unit-circle flag: | |zeta| - 1 | <= tol_unit.
    pub tol_unit: f64,
}

impl Default for PencilConfig {
    fn default() -> Self {
        Self {
            tol_null: 1e-8,
            tol_real: 1e-7,
            tol_singular: 1e-10,
            tol_unit: 1e-6,
        }
    }
}

/// Discrete N and Z: near-null interior modes (zero-extended to the faces)
/// and interior-harmonic extensions of bottom-face data with zero top trace,
/// mass-orthogonal to N.
pub struct Subspaces {
    /// Orthonormal basis of N, full-length vectors vanishing on both faces.
    pub n_basis: Vec<Vec<C>>,
    /// Basis of Z, full-length vectors; column m extends the m-th compatible
    /// bottom-face direction. Mass-normalized.
    pub z_basis: Vec<Vec<C>>,
    /// Bottom-face directions rejected by the Fredholm compatibility test.
    pub incompatible_directions: usize,
    /// Condition number of the Z-basis Gram matrix.
    pub gram_condition: f64,
    /// Largest interior-block eigenvalue magnitude (the null threshold scale).
    pub interior_sigma_max: f64,
}

impl Subspaces {
    pub fn dim_n(&self) -> usize {
        self.n_basis.len()
    }
    pub fn dim_z(&self) -> usize {
        self.z_basis.len()
    }
}

/// The forms t0, t1 on the Z basis plus their diagnostics.
pub struct DnForms {
    pub t0: Mat,
    pub t1: Mat,
    pub sigma_min_t1: f64,
    pub sigma_max_t1: f64,
    /// Count of eigenvalues of the Hermitian t0 that are <= 0 (within a
    /// relative rounding threshold).
    pub inertia_m: usize,
    pub t0_hermiticity_defect: f64,
    pub t1_hermiticity_defect: f64,
    pub norm_t0: f64,
    pub norm_t1: f64,
}

impl DnForms {
    pub fn dim(&self) -> usize {
        self.t0.nrows()
    }
}

/// Pencil eigenvalues and their classification.
#[derive(Debug, Clone, Serialize)]
pub struct PencilReport {
    pub z_values: Vec<C>,
    pub is_nonreal: Vec<bool>,
    pub nonreal_count: usize,
    pub inertia_m: usize,
    pub bound_2m: usize,
    /// For non-real z: (|phi^H t0 phi|, |phi^H t1 phi|) / ||phi||^2.
    pub isotropy_residuals: Vec<Option<(f64, f64)>>,
    /// max over z of the distance to the conjugated z-multiset.
    pub conjugation_defect: f64,
    pub sigma_min_ratio: f64,
    pub norm_t0: f64,
    pub norm_t1: f64,
}

/// One pencil eigenvalue mapped to its multiplier pair.
#[derive(Debug, Clone, Serialize)]
pub struct Multiplier {
    pub z: C,
    pub zeta_plus: C,
    pub zeta_minus: C,
    pub on_unit_circle: bool,
    /// arccos(z) / (2 pi) for real z in [-1, 1].
    pub k3: Option<f64>,
    /// |log |zeta||, the decay rate of evanescent pairs.
    pub decay_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiplierSet {
    pub multipliers: Vec<Multiplier>,
}

impl MultiplierSet {
    /// Propagating longitudinal quasimomenta: each unit-circle pair expanded
    /// to {k3, 1 - k3} in [0, 1), deduplicated on the circle.
    pub fn propagating_k3(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for m in &self.multipliers {
            if let (true, Some(k3)) = (m.on_unit_circle, m.k3) {
                for cand in [k3, 1.0 - k3] {
                    let c = if cand >= 1.0 { cand - 1.0 } else { cand };
                    if !out.iter().any(|&e| circular_distance(e, c) <= 1e-9) {
                        out.push(c);
                    }
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Build N and Z from a slab system.
///
/// N is spanned by the interior-block eigenvectors with |mu| below
/// tol_null * sigma_max. For each bottom-face indicator g_m the interior
/// system H[I,I] phi_I = -H[I,B-] g_m is solved through the eigendecomposition
/// pseudo-inverse; a direction whose right-hand side has an N-component above
/// tol_null * ||rhs|| is counted incompatible and dropped (the discrete
/// Fredholm alternative).
pub fn build_subspaces(slab: &FiberSystem, tol_null: f64) -> Result<Subspaces> {
    if slab.grid.mode() != GridMode::Slab {
        return Err(CoreError::ModeMismatch {
            op: "build_subspaces",
            expected: GridMode::Slab,
            found: slab.grid.mode(),
        });
    }
    let map = slab.grid.dof_map()?;
    let ndof = slab.dof_count();
    let ni = map.interior.len();
    let nb = map.bottom.len();

    let hii = slab.h.dense_submatrix(&map.interior, &map.interior);
    let (mu, u) = linalg::hermitian_eigen(hii.as_ref()).map_err(|e| {
        CoreError::InteriorSolve(format!("interior eigendecomposition failed: {e}"))
    })?;
    let sigma_max = mu.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if sigma_max == 0.0 {
        return Err(CoreError::InteriorSolve(
            "interior block is identically zero".into(),
        ));
    }
    let null_thresh = tol_null * sigma_max;
    let null_idx: Vec<usize> = (0..ni).filter(|&j| mu[j].abs() < null_thresh).collect();

    // N basis, zero-extended to the faces.
    let mut n_basis = Vec::with_capacity(null_idx.len());
    for &j in &null_idx {
        let mut v = vec![C::default(); ndof];
        for (row, &dof) in map.interior.iter().enumerate() {
            v[dof] = u[(row, j)];
        }
        n_basis.push(v);
    }

    // Right-hand sides -H[I, B-] for all bottom indicators at once.
    let hib = slab.h.dense_submatrix(&map.interior, &map.bottom);
    let mut rhs = Mat::zeros(ni, nb);
    for i in 0..ni {
        for m in 0..nb {
            rhs[(i, m)] = -hib[(i, m)];
        }
    }
    let coeff = u.as_ref().adjoint() * rhs.as_ref();

    let vol = slab.grid.cell_volume();
    let mut z_basis: Vec<Vec<C>> = Vec::with_capacity(nb);
    let mut incompatible = 0usize;
    for m in 0..nb {
        let total: f64 = (0..ni).map(|j| coeff[(j, m)].norm_sqr()).sum::<f64>().sqrt();
        let removed: f64 = null_idx
            .iter()
            .map(|&j| coeff[(j, m)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if total > 0.0 && removed > tol_null * total {
            incompatible += 1;
            continue;
        }
        // phi_I = U diag(1/mu or 0) U^H rhs_m
        let mut interior = vec![C::default(); ni];
        for j in 0..ni {
            if mu[j].abs() >= null_thresh {
                let c = coeff[(j, m)] / mu[j];
                if c.norm_sqr() > 0.0 {
                    for (row, slot) in interior.iter_mut().enumerate() {
                        *slot += c * u[(row, j)];
                    }
                }
            }
        }
        let mut phi = vec![C::default(); ndof];
        phi[map.bottom[m]] = C::new(1.0, 0.0);
        for (row, &dof) in map.interior.iter().enumerate() {
            phi[dof] = interior[row];
        }
        // Mass projection against N (uniform mass: plain projection); the
        // pseudo-inverse already avoids N, this removes rounding residue.
        for nu in &n_basis {
            let c: C = nu.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum();
            for (p, nv) in phi.iter_mut().zip(nu) {
                *p -= c * *nv;
            }
        }
        let norm_m = (vol * phi.iter().map(|x| x.norm_sqr()).sum::<f64>()).sqrt();
        if norm_m == 0.0 {
            incompatible += 1;
            continue;
        }
        let inv = 1.0 / norm_m;
        phi.iter_mut().for_each(|x| *x *= inv);
        z_basis.push(phi);
    }

    if z_basis.is_empty() {
        return Err(CoreError::InteriorSolve(format!(
            "no compatible bottom-face directions survive (incompatible = {incompatible}, \
             sigma_max = {sigma_max:.3e})"
        )));
    }

    // Gram condition of the Z basis in the mass inner product.
    let dim_z = z_basis.len();
    let mut gram = Mat::zeros(dim_z, dim_z);
    for i in 0..dim_z {
        for j in i..dim_z {
            let g: C = z_basis[i]
                .iter()
                .zip(&z_basis[j])
                .map(|(a, b)| a.conj() * b)
                .sum::<C>()
                * vol;
            gram[(i, j)] = g;
            gram[(j, i)] = g.conj();
        }
    }
    let (gvals, _) = linalg::hermitian_eigen(gram.as_ref())?;
    let gmin = gvals.first().copied().unwrap_or(0.0).max(0.0);
    let gmax = gvals.last().copied().unwrap_or(0.0);
    let gram_condition = if gmin > 0.0 { gmax / gmin } else { f64::INFINITY };

    Ok(Subspaces {
        n_basis,
        z_basis,
        incompatible_directions: incompatible,
        gram_condition,
        interior_sigma_max: sigma_max,
    })
}

/// Assemble t0[m, n] = phi_m^H H phi_n and t1[m, n] = phi_m^H H (J phi_n),
/// with the inertia of t0 and the singular extents of t1.
pub fn assemble_dn_forms(slab: &FiberSystem, sub: &Subspaces) -> Result<DnForms> {
    let dim_z = sub.dim_z();
    let ndof = slab.dof_count();
    let phi = linalg::from_columns(ndof, &sub.z_basis);
    let jphi_cols: Vec<Vec<C>> = sub.z_basis.iter().map(|v| slab.grid.reflect(v)).collect();

    let mut hphi = Mat::zeros(ndof, dim_z);
    let mut hjphi = Mat::zeros(ndof, dim_z);
    let mut work = vec![C::default(); ndof];
    for j in 0..dim_z {
        slab.h.matvec(&sub.z_basis[j], &mut work);
        for i in 0..ndof {
            hphi[(i, j)] = work[i];
        }
        slab.h.matvec(&jphi_cols[j], &mut work);
        for i in 0..ndof {
            hjphi[(i, j)] = work[i];
        }
    }
    let t0 = phi.as_ref().adjoint() * hphi.as_ref();
    let t1 = phi.as_ref().adjoint() * hjphi.as_ref();

    let t0_defect = linalg::dense_hermiticity_defect(t0.as_ref());
    let t1_defect = linalg::dense_hermiticity_defect(t1.as_ref());

    let (sigma_min_t1, sigma_max_t1) = linalg::singular_extents(t1.as_ref())?;
    let norm_t1 = sigma_max_t1;
    let (t0_lo, t0_hi) = linalg::singular_extents(t0.as_ref())?;
    let _ = t0_lo;
    let norm_t0 = t0_hi;

    let t0_herm = linalg::hermitian_part(t0.as_ref());
    let (evals, _) = linalg::hermitian_eigen(t0_herm.as_ref())?;
    let scale = evals.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let inertia_m = evals.iter().filter(|&&v| v <= 1e-12 * scale).count();

    Ok(DnForms {
        t0,
        t1,
        sigma_min_t1,
        sigma_max_t1,
        inertia_m,
        t0_hermiticity_defect: t0_defect,
        t1_hermiticity_defect: t1_defect,
        norm_t0,
        norm_t1,
    })
}

/// Eigenvalues of the linear pencil t0 + z t1, computed as the spectrum of
/// -t1^{-1} t0, with the non-real count, the 2m bound and the isotropy
/// residuals of non-real eigenvectors.
pub fn pencil_spectrum(forms: &DnForms, cfg: &PencilConfig) -> Result<PencilReport> {
    let dim = forms.dim();
    let ratio = if forms.sigma_max_t1 > 0.0 {
        forms.sigma_min_t1 / forms.sigma_max_t1
    } else {
        0.0
    };
    if ratio <= cfg.tol_singular {
        return Err(CoreError::SingularPencil {
            ratio,
            threshold: cfg.tol_singular,
        });
    }

    let x = linalg::lu_solve(forms.t1.as_ref(), forms.t0.as_ref());
    let mut neg = Mat::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            neg[(i, j)] = -x[(i, j)];
        }
    }
    let (zs, vecs) = linalg::general_eigen(neg.as_ref())?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        zs[a]
            .re
            .total_cmp(&zs[b].re)
            .then(zs[a].im.total_cmp(&zs[b].im))
    });

    let mut z_values = Vec::with_capacity(dim);
    let mut is_nonreal = Vec::with_capacity(dim);
    let mut isotropy = Vec::with_capacity(dim);
    for &j in &order {
        let z = zs[j];
        let nonreal = z.im.abs() > cfg.tol_real * (1.0 + z.norm());
        z_values.push(z);
        is_nonreal.push(nonreal);
        if nonreal {
            let v: Vec<C> = (0..dim).map(|i| vecs[(i, j)]).collect();
            let nsq: f64 = v.iter().map(|c| c.norm_sqr()).sum();
            let quad = |m: &Mat| -> f64 {
                let mut acc = C::default();
                for r in 0..dim {
                    let mut row = C::default();
                    for c in 0..dim {
                        row += m[(r, c)] * v[c];
                    }
                    acc += v[r].conj() * row;
                }
                acc.norm() / nsq.max(f64::MIN_POSITIVE)
            };
            isotropy.push(Some((quad(&forms.t0), quad(&forms.t1))));
        } else {
            isotropy.push(None);
        }
    }
    let nonreal_count = is_nonreal.iter().filter(|&&b| b).count();

    let mut conjugation_defect = 0.0f64;
    for &z in &z_values {
        let best = z_values
            .iter()
            .map(|&w| (w.conj() - z).norm())
            .fold(f64::INFINITY, f64::min);
        conjugation_defect = conjugation_defect.max(best);
    }

    Ok(PencilReport {
        z_values,
        is_nonreal,
        nonreal_count,
        inertia_m: forms.inertia_m,
        bound_2m: 2 * forms.inertia_m,
        isotropy_residuals: isotropy,
        conjugation_defect,
        sigma_min_ratio: ratio,
        norm_t0: forms.norm_t0,
        norm_t1: forms.norm_t1,
    })
}

/// Roots zeta of zeta^2 - 2 z zeta + 1 = 0 per pencil eigenvalue. Real
/// z in [-1, 1] gives the unit-circle pair exp(+-i arccos z) and the
/// longitudinal quasimomentum k3 = arccos(z) / (2 pi).
pub fn multipliers(report: &PencilReport, cfg: &PencilConfig) -> MultiplierSet {
    let mut out = Vec::with_capacity(report.z_values.len());
    for (idx, &z) in report.z_values.iter().enumerate() {
        let zeta_plus = if report.is_nonreal[idx] {
            let w = (z * z - C::new(1.0, 0.0)).sqrt();
            let cand = z + w;
            if cand.norm() >= 1.0 {
                cand
            } else {
                z - w
            }
        } else {
            let x = z.re;
            if x.abs() <= 1.0 {
                C::new(x, (1.0 - x * x).max(0.0).sqrt())
            } else {
                let root = (x * x - 1.0).sqrt();
                let cand = x + root.copysign(x);
                C::new(cand, 0.0)
            }
        };
        let zeta_minus = C::new(1.0, 0.0) / zeta_plus;
        let modulus = zeta_plus.norm();
        let on_unit_circle = (modulus - 1.0).abs() <= cfg.tol_unit;
        let k3 = if on_unit_circle && !report.is_nonreal[idx] {
            Some(z.re.clamp(-1.0, 1.0).acos() / (2.0 * PI))
        } else {
            None
        };
        out.push(Multiplier {
            z,
            zeta_plus,
            zeta_minus,
            on_unit_circle,
            k3,
            decay_rate: modulus.ln().abs(),
        });
    }
    MultiplierSet { multipliers: out }
}

/// u = phi + zeta J phi + omega; the trace relation u|top = zeta u|bottom
/// holds exactly by construction.
pub fn reconstruct_solution(
    phi: &[C],
    zeta: C,
    omega: Option<&[C]>,
    grid: &TwistedGrid,
) -> Vec<C> {
    let jphi = grid.reflect(phi);
    let mut u: Vec<C> = phi
        .iter()
        .zip(&jphi)
        .map(|(p, jp)| *p + zeta * *jp)
        .collect();
    if let Some(w) = omega {
        for (uu, ww) in u.iter_mut().zip(w) {
            *uu += *ww;
        }
    }
    u
}

/// psi = (1 - zeta^2)^{-1} (u - zeta J u), the inverse of the reconstruction
/// modulo N. Requires zeta != +-1.
pub fn split_reflection(u: &[C], zeta: C, grid: &TwistedGrid) -> Result<Vec<C>> {
    let denom = C::new(1.0, 0.0) - zeta * zeta;
    if denom.norm() <= 1e-14 {
        return Err(CoreError::InvalidArgument(
            "split_reflection needs zeta != +-1".into(),
        ));
    }
    let ju = grid.reflect(u);
    Ok(u.iter()
        .zip(&ju)
        .map(|(a, b)| (*a - zeta * *b) / denom)
        .collect())
}

/// Cross-validation of the pencil route against the direct band computation.
#[derive(Debug, Clone, Serialize)]
pub struct CrosscheckReport {
    pub khat: [f64; 2],
    pub lambda: f64,
    /// k3 of unit-circle multipliers at (khat, lambda).
    pub s1: Vec<f64>,
    /// k3 with lambda_n(khat, k3) = lambda, located by sign changes and
    /// refined by bisection.
    pub s2: Vec<f64>,
    pub matching_distance: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub flagged: Vec<String>,
    pub nonreal_count: usize,
    pub inertia_m: usize,
    pub n_bands: usize,
    pub k3_grid: usize,
}

#[derive(Debug, Clone)]
pub struct CrosscheckConfig {
    pub n_bands: usize,
    pub k3_grid: usize,
    /// Extra additive slack on top of 2 * (k3 grid spacing).
    pub allowance: f64,
}

pub fn crosscheck(
    problem: &Problem,
    slab_grid: &TwistedGrid,
    fiber_grid: &TwistedGrid,
    khat: [f64; 2],
    lambda: f64,
    ck: &CrosscheckConfig,
    solver: &SolverConfig,
    pencil_cfg: &PencilConfig,
) -> Result<CrosscheckReport> {
    if slab_grid.mode() != GridMode::Slab {
        return Err(CoreError::ModeMismatch {
            op: "crosscheck",
            expected: GridMode::Slab,
            found: slab_grid.mode(),
        });
    }
    if fiber_grid.mode() != GridMode::Fiber {
        return Err(CoreError::ModeMismatch {
            op: "crosscheck",
            expected: GridMode::Fiber,
            found: fiber_grid.mode(),
        });
    }
    let (sn, fn_) = (slab_grid.sizes(), fiber_grid.sizes());
    if sn[0] != fn_[0] || sn[1] != fn_[1] {
        return Err(CoreError::InvalidArgument(format!(
            "crosscheck needs matching transverse resolutions, got slab {:?} vs fiber {:?}",
            sn, fn_
        )));
    }

    let mut flagged = Vec::new();

    // Route 1: slab pencil multipliers.
    let slab = assemble_family(problem, slab_grid)?.slab_at(khat, lambda)?;
    let sub = build_subspaces(&slab, pencil_cfg.tol_null)?;
    let forms = assemble_dn_forms(&slab, &sub)?;
    let report = pencil_spectrum(&forms, pencil_cfg)?;
    let mults = multipliers(&report, pencil_cfg);
    let s1 = mults.propagating_k3();

    // Route 2: band functions of k3 on the fiber grid, roots by bisection.
    let family = assemble_family(problem, fiber_grid)?;
    let nk = ck.k3_grid;
    let band_at = |t: f64| -> Result<Vec<f64>> {
        let sys = family.fiber_at([khat[0], khat[1], t])?;
        Ok(sys.solve_lowest(ck.n_bands, solver)?.eigenvalues)
    };
    let mut grid_vals: Vec<Vec<f64>> = Vec::with_capacity(nk + 1);
    for j in 0..nk {
        grid_vals.push(band_at(j as f64 / nk as f64)?);
    }
    grid_vals.push(grid_vals[0].clone()); // k3 = 1 is the same reduced system

    let mut s2: Vec<f64> = Vec::new();
    let push_root = |t: f64, out: &mut Vec<f64>| {
        let c = t.rem_euclid(1.0);
        if !out.iter().any(|&e| circular_distance(e, c) <= 1e-7) {
            out.push(c);
        }
    };
    let bisect_tol = 1.0 / (nk as f64 * 256.0);
    for band in 0..ck.n_bands {
        for j in 0..nk {
            let (t_lo, t_hi) = (j as f64 / nk as f64, (j + 1) as f64 / nk as f64);
            let g_lo = grid_vals[j][band] - lambda;
            let g_hi = grid_vals[j + 1][band] - lambda;
            if g_lo == 0.0 {
                push_root(t_lo, &mut s2);
                continue;
            }
            if g_lo * g_hi >= 0.0 {
                continue;
            }
            let (mut lo, mut hi, mut glo) = (t_lo, t_hi, g_lo);
            let mut converged = false;
            for _ in 0..64 {
                let mid = 0.5 * (lo + hi);
                let gm = band_at(mid)?[band] - lambda;
                if gm == 0.0 {
                    lo = mid;
                    hi = mid;
                } else if gm * glo < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    glo = gm;
                }
                if hi - lo <= bisect_tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                flagged.push(format!(
                    "bisection for band {band} in [{t_lo:.4}, {t_hi:.4}] did not reach {bisect_tol:.2e}"
                ));
            }
            push_root(0.5 * (lo + hi), &mut s2);
        }
    }
    s2.sort_by(f64::total_cmp);

    // Symmetric matching distance with the circular metric on k3.
    let dir = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .map(|&x| {
                b.iter()
                    .map(|&y| circular_distance(x, y))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    let matching_distance = if s1.is_empty() && s2.is_empty() {
        0.0
    } else if s1.is_empty() || s2.is_empty() {
        f64::INFINITY
    } else {
        dir(&s1, &s2).max(dir(&s2, &s1))
    };
    let tolerance = 2.0 / nk as f64 + ck.allowance;
    let pass = matching_distance <= tolerance;

    Ok(CrosscheckReport {
        khat,
        lambda,
        s1,
        s2,
        matching_distance,
        tolerance,
        pass,
        flagged,
        nonreal_count: report.nonreal_count,
        inertia_m: report.inertia_m,
        n_bands: ck.n_bands,
        k3_grid: nk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::assemble_slab;
    use crate::grid::build_grid;
    use crate::problem::{build_problem, CoefficientSpec};

    fn free_slab(n: usize, lambda: f64) -> FiberSystem {
        let p = build_problem(&CoefficientSpec::free()).unwrap();
        let grid = build_grid(GridMode::Slab, n, n, n, 0).unwrap();
        assemble_slab(&p, &grid, [0.0, 0.0], lambda).unwrap()
    }

    #[test]
    fn free_slab_at_zero_has_trivial_n_and_full_z() {
        let slab = free_slab(4, 0.0);
        let sub = build_subspaces(&slab, 1e-8).unwrap();
        assert_eq!(sub.dim_n(), 0);
        assert_eq!(sub.incompatible_directions, 0);
        assert_eq!(sub.dim_z(), 16);
    }

    #[test]
    fn z_basis_has_zero_top_trace_and_small_interior_residual() {
        let slab = free_slab(4, 0.3);
        let sub = build_subspaces(&slab, 1e-8).unwrap();
        let map = slab.grid.dof_map().unwrap();
        let hnorm = slab.h.norm_max();
        for phi in &sub.z_basis {
            for &t in &map.top {
                assert_eq!(phi[t], C::default());
            }
            let mut hphi = vec![C::default(); phi.len()];
            slab.h.matvec(phi, &mut hphi);
            let mut interior_res = 0.0f64;
            for &i in &map.interior {
                interior_res = interior_res.max(hphi[i].norm());
            }
            let phinorm = phi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            assert!(
                interior_res <= 1e-9 * hnorm * phinorm,
                "interior residual {interior_res}"
            );
        }
    }

    #[test]
    fn near_dirichlet_eigenvalue_gives_nontrivial_n() {
        // lambda at the lowest interior-block eigenvalue (computed densely)
        // makes the interior block singular by construction.
        let slab0 = free_slab(4, 0.0);
        let map = slab0.grid.dof_map().unwrap();
        let hii = slab0.h.dense_submatrix(&map.interior, &map.interior);
        let (mu, _) = linalg::hermitian_eigen(hii.as_ref()).unwrap();
        let lambda_d = mu[0] / slab0.grid.cell_volume();

        let slab = free_slab(4, lambda_d);
        let sub = build_subspaces(&slab, 1e-8).unwrap();
        assert!(sub.dim_n() >= 1, "dim N = {}", sub.dim_n());
        assert_eq!(sub.dim_z() + sub.incompatible_directions, 16);
    }

    #[test]
    fn free_slab_t0_positive_definite_and_no_nonreal_pencil() {
        let slab = free_slab(4, 0.0);
        let sub = build_subspaces(&slab, 1e-8).unwrap();
        let forms = assemble_dn_forms(&slab, &sub).unwrap();
        assert_eq!(forms.inertia_m, 0);
        let t0h = linalg::hermitian_part(forms.t0.as_ref());
        let (ev, _) = linalg::hermitian_eigen(t0h.as_ref()).unwrap();
        assert!(ev[0] > 0.0, "t0 lowest eigenvalue {}", ev[0]);
        let report = pencil_spectrum(&forms, &PencilConfig::default()).unwrap();
        assert_eq!(report.nonreal_count, 0);
        assert_eq!(report.z_values.len(), 16);
    }

    #[test]
    fn multiplier_algebra() {
        let cfg = PencilConfig::default();
        let mk_report = |z: C| PencilReport {
            z_values: vec![z],
            is_nonreal: vec![z.im.abs() > 1e-7 * (1.0 + z.norm())],
            nonreal_count: 0,
            inertia_m: 0,
            bound_2m: 0,
            isotropy_residuals: vec![None],
            conjugation_defect: 0.0,
            sigma_min_ratio: 1.0,
            norm_t0: 1.0,
            norm_t1: 1.0,
        };

        // z = 1 -> double root zeta = 1
        let m = multipliers(&mk_report(C::new(1.0, 0.0)), &cfg);
        assert!((m.multipliers[0].zeta_plus - C::new(1.0, 0.0)).norm() <= 1e-12);
        assert!((m.multipliers[0].zeta_minus - C::new(1.0, 0.0)).norm() <= 1e-12);

        // z = cos(2 pi 0.3) -> zeta = exp(+- i 2 pi 0.3), k3 = 0.3
        let z = C::new((2.0 * PI * 0.3).cos(), 0.0);
        let m = multipliers(&mk_report(z), &cfg);
        let mult = &m.multipliers[0];
        assert!(mult.on_unit_circle);
        let expect = C::from_polar(1.0, 2.0 * PI * 0.3);
        assert!((mult.zeta_plus - expect).norm() <= 1e-12);
        assert!((mult.k3.unwrap() - 0.3).abs() <= 1e-12);

        // z = 1.25 -> zeta in {2, 0.5}
        let m = multipliers(&mk_report(C::new(1.25, 0.0)), &cfg);
        let mult = &m.multipliers[0];
        assert!(!mult.on_unit_circle);
        assert!((mult.zeta_plus - C::new(2.0, 0.0)).norm() <= 1e-12);
        assert!((mult.zeta_minus - C::new(0.5, 0.0)).norm() <= 1e-12);
        // closure under zeta -> 1/zeta
        let prod = mult.zeta_plus * mult.zeta_minus;
        assert!((prod - C::new(1.0, 0.0)).norm() <= 1e-12);
    }

    #[test]
    fn reconstruction_trace_relation_is_exact() {
        let grid = build_grid(GridMode::Slab, 4, 4, 4, 0).unwrap();
        let map = grid.dof_map().unwrap();
        let mut phi = vec![C::default(); grid.dof_count()];
        for (i, v) in phi.iter_mut().enumerate() {
            *v = C::new((i % 7) as f64 * 0.3 - 1.0, (i % 5) as f64 * 0.2);
        }
        for &t in &map.top {
            phi[t] = C::default();
        }
        let zeta = C::new(0.37, 0.81);
        let u = reconstruct_solution(&phi, zeta, None, &grid);
        for (bm, tm) in map.bottom.iter().zip(&map.top) {
            let diff = u[*tm] - zeta * u[*bm];
            assert_eq!(diff, C::default());
        }

        // zeta = 0 -> u = phi (+ omega), top trace zero
        let u0 = reconstruct_solution(&phi, C::default(), None, &grid);
        assert_eq!(u0, phi);

        // psi = (1 - zeta^2)^{-1} (u - zeta J u) recovers phi
        let psi = split_reflection(&u, zeta, &grid).unwrap();
        for (a, b) in psi.iter().zip(&phi) {
            assert!((a - b).norm() <= 1e-12);
        }
    }
}
