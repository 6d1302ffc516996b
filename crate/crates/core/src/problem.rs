//! Coefficient data of the operator: metric G, periodic vector potential a,
//! constant-field strength b, scalar potential V, and the validation of the
//! hypotheses they must satisfy (ellipticity, periodicity, quantized flux,
//! reflection symmetry).
//!
//! Coefficients are finite real Fourier series, so they are smooth and exactly
//! periodic by construction. The constant-field part of the vector potential
//! is handled separately in the gauge A(x) = (-b*x2, 0, 0) + a(x).

use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{CoreError, Result};

/// Phase of a Fourier term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Trig {
    Cos,
    Sin,
}

/// Which coefficient field a Fourier term modifies. The metric targets add to
/// the identity matrix; off-diagonal targets set both symmetric entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Target {
    V,
    A1,
    A2,
    A3,
    G11,
    G12,
    G13,
    G22,
    G23,
    G33,
}

/// One term of a coefficient Fourier series: amplitude * trig(mode . x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierTerm {
    pub target: Target,
    pub mode: [i64; 3],
    pub amplitude: f64,
    pub phase: Trig,
}

impl FourierTerm {
    pub fn new(target: Target, mode: [i64; 3], amplitude: f64, phase: Trig) -> Self {
        Self {
            target,
            mode,
            amplitude,
            phase,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Free,
    Landau,
    Custom,
}

/// Serializable description of a coefficient set: a preset name, an optional
/// list of Fourier terms and the integer flux n0 (so b = n0 / (2*pi)).
#[derive(Debug, Clone)]
pub struct CoefficientSpec {
    pub kind: PresetKind,
    pub fourier_terms: Vec<FourierTerm>,
    pub flux_integer: u32,
}

impl CoefficientSpec {
    pub fn free() -> Self {
        Self {
            kind: PresetKind::Free,
            fourier_terms: Vec::new(),
            flux_integer: 0,
        }
    }

    pub fn landau(flux_integer: u32) -> Self {
        Self {
            kind: PresetKind::Landau,
            fourier_terms: Vec::new(),
            flux_integer,
        }
    }

    pub fn custom(fourier_terms: Vec<FourierTerm>, flux_integer: u32) -> Self {
        Self {
            kind: PresetKind::Custom,
            fourier_terms,
            flux_integer,
        }
    }
}

/// A finite real Fourier series sum_j amp_j * trig_j(mode_j . x), kept in a
/// canonical form: modes sign-normalized, duplicate (mode, trig) pairs merged,
/// zero terms dropped, terms sorted. Canonical form makes symmetrization
/// exactly idempotent at the floating-point level.
#[derive(Debug, Clone, Default, PartialEq)]
struct FourierSeries {
    terms: Vec<(/* mode */ [i64; 3], /* amplitude */ f64, Trig)>,
}

impl FourierSeries {
    fn new(raw: Vec<([i64; 3], f64, Trig)>) -> Self {
        let mut s = Self { terms: raw };
        s.canonicalize();
        s
    }

    fn push(&mut self, mode: [i64; 3], amplitude: f64, phase: Trig) {
        self.terms.push((mode, amplitude, phase));
    }

    /// Sign-normalize modes (cos is even, sin is odd in the mode vector),
    /// merge duplicates, drop exact zeros, sort.
    fn canonicalize(&mut self) {
        for (mode, amp, trig) in self.terms.iter_mut() {
            let first_nonzero = mode.iter().find(|&&m| m != 0).copied().unwrap_or(0);
            if first_nonzero < 0 {
                for m in mode.iter_mut() {
                    *m = -*m;
                }
                if *trig == Trig::Sin {
                    *amp = -*amp;
                }
            }
            if *mode == [0, 0, 0] && *trig == Trig::Sin {
                *amp = 0.0; // sin(0) term is identically zero
            }
        }
        self.terms
            .sort_by(|a, b| (a.0, a.2).cmp(&(b.0, b.2)).then(a.1.total_cmp(&b.1)));
        let mut merged: Vec<([i64; 3], f64, Trig)> = Vec::with_capacity(self.terms.len());
        for &(mode, amp, trig) in &self.terms {
            match merged.last_mut() {
                Some(last) if last.0 == mode && last.2 == trig => last.1 += amp,
                _ => merged.push((mode, amp, trig)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        self.terms = merged;
    }

    fn eval(&self, x: [f64; 3]) -> f64 {
        let mut acc = 0.0;
        for &(mode, amp, trig) in &self.terms {
            let arg = mode[0] as f64 * x[0] + mode[1] as f64 * x[1] + mode[2] as f64 * x[2];
            acc += amp
                * match trig {
                    Trig::Cos => arg.cos(),
                    Trig::Sin => arg.sin(),
                };
        }
        acc
    }

    /// Series of f(R x) for the reflection R(x1,x2,x3) = (x1,x2,-x3).
    fn reflected(&self) -> Self {
        let raw = self
            .terms
            .iter()
            .map(|&(m, a, t)| ([m[0], m[1], -m[2]], a, t))
            .collect();
        Self::new(raw)
    }

    /// 0.5 * (f + sign * f(R .)), canonicalized.
    fn mirror_average(&self, sign: f64) -> Self {
        let mut raw = Vec::with_capacity(2 * self.terms.len());
        for &(m, a, t) in &self.terms {
            raw.push((m, 0.5 * a, t));
        }
        for &(m, a, t) in &self.reflected().terms {
            raw.push((m, sign * 0.5 * a, t));
        }
        Self::new(raw)
    }

    /// Partial derivative along axis d (exact term-wise differentiation).
    fn derivative(&self, d: usize) -> Self {
        let raw = self
            .terms
            .iter()
            .map(|&(m, a, t)| {
                let c = m[d] as f64;
                match t {
                    Trig::Cos => (m, -a * c, Trig::Sin),
                    Trig::Sin => (m, a * c, Trig::Cos),
                }
            })
            .collect();
        Self::new(raw)
    }

    fn max_amplitude_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.1.abs()).sum()
    }

    #[cfg(test)]
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Symmetric 3x3 component order used for the metric offsets.
const SYM_COMPONENTS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

/// Evaluators for the operator coefficients plus the spectral and transverse
/// shifts used by the slab reduction. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Problem {
    /// Offsets to the identity metric, components (11, 22, 33, 12, 13, 23).
    g: [FourierSeries; 6],
    /// Periodic part of the vector potential.
    a: [FourierSeries; 3],
    v: FourierSeries,
    /// Constant-field strength; equals flux_integer / (2*pi) for spec-built
    /// problems.
    b: f64,
    /// Present when b was constructed from a quantized flux.
    flux_integer: Option<u32>,
    /// Whether the reflection-symmetry hypothesis is claimed for this problem.
    symmetry_required: bool,
    /// Spectral shift, applied as V - lambda during assembly.
    pub lambda_shift: f64,
    /// Transverse quasimomentum folded into the vector potential in slab mode.
    pub khat_shift: [f64; 2],
}

impl Problem {
    pub fn field_strength(&self) -> f64 {
        self.b
    }

    pub fn flux_integer(&self) -> Option<u32> {
        self.flux_integer
    }

    pub fn symmetry_required(&self) -> bool {
        self.symmetry_required
    }

    /// Metric matrix G(x), exactly symmetric by construction.
    pub fn eval_g(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let mut g = [[0.0; 3]; 3];
        for d in 0..3 {
            g[d][d] = 1.0;
        }
        for (series, &(i, j)) in self.g.iter().zip(SYM_COMPONENTS.iter()) {
            let val = series.eval(x);
            if i == j {
                g[i][i] += val;
            } else {
                g[i][j] += val;
                g[j][i] += val;
            }
        }
        g
    }

    /// Periodic part a(x) of the vector potential.
    pub fn eval_a(&self, x: [f64; 3]) -> [f64; 3] {
        [self.a[0].eval(x), self.a[1].eval(x), self.a[2].eval(x)]
    }

    /// Full vector potential A(x) = (-b*x2, 0, 0) + a(x); x2 must be the
    /// local (unwrapped) cell coordinate.
    pub fn eval_a_total(&self, x: [f64; 3]) -> [f64; 3] {
        let mut a = self.eval_a(x);
        a[0] -= self.b * x[1];
        a
    }

    pub fn eval_v(&self, x: [f64; 3]) -> f64 {
        self.v.eval(x)
    }

    pub fn with_lambda_shift(mut self, lambda: f64) -> Self {
        self.lambda_shift = lambda;
        self
    }

    pub fn with_khat_shift(mut self, khat: [f64; 2]) -> Self {
        self.khat_shift = khat;
        self
    }

    /// Construct a problem with free coefficients and an arbitrary raw field
    /// strength. Intended for exercising the flux validator; `build_problem`
    /// only ever produces quantized fields.
    pub fn with_raw_field_strength(b: f64) -> Self {
        Self {
            g: Default::default(),
            a: Default::default(),
            v: FourierSeries::default(),
            b,
            flux_integer: None,
            symmetry_required: false,
            lambda_shift: 0.0,
            khat_shift: [0.0, 0.0],
        }
    }

    /// Crude sup-norm bounds used to size preconditioner shifts.
    pub(crate) fn coefficient_bounds(&self) -> CoefficientBounds {
        let a_bound = |d: usize| self.a[d].max_amplitude_bound();
        let mut g_bound = 0.0f64;
        for s in &self.g {
            g_bound += s.max_amplitude_bound();
        }
        CoefficientBounds {
            v_max: self.v.max_amplitude_bound(),
            a_max: [
                a_bound(0) + self.b * PI, // constant-field gauge term over the cell
                a_bound(1),
                a_bound(2),
            ],
            g_max: 1.0 + g_bound,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CoefficientBounds {
    pub v_max: f64,
    pub a_max: [f64; 3],
    pub g_max: f64,
}

/// Build the coefficient evaluators from a spec.
///
/// Presets: "free" is G = I, a = 0, V = 0, b = 0; "landau" is the same with
/// b = n0 / (2*pi); "custom" takes the Fourier terms literally.
pub fn build_problem(spec: &CoefficientSpec) -> Result<Problem> {
    match spec.kind {
        PresetKind::Free => {
            if spec.flux_integer != 0 {
                return Err(CoreError::InvalidSpec(
                    "the free preset has zero field; use the landau preset for flux > 0".into(),
                ));
            }
            if !spec.fourier_terms.is_empty() {
                return Err(CoreError::InvalidSpec(
                    "the free preset takes no fourier terms".into(),
                ));
            }
        }
        PresetKind::Landau => {
            if !spec.fourier_terms.is_empty() {
                return Err(CoreError::InvalidSpec(
                    "the landau preset takes no fourier terms".into(),
                ));
            }
        }
        PresetKind::Custom => {
            if spec.fourier_terms.is_empty() && spec.flux_integer == 0 {
                return Err(CoreError::InvalidSpec(
                    "custom spec is empty; use the free preset for the trivial operator".into(),
                ));
            }
        }
    }

    let mut g: [FourierSeries; 6] = Default::default();
    let mut a: [FourierSeries; 3] = Default::default();
    let mut v = FourierSeries::default();
    for term in &spec.fourier_terms {
        let dest = match term.target {
            Target::V => &mut v,
            Target::A1 => &mut a[0],
            Target::A2 => &mut a[1],
            Target::A3 => &mut a[2],
            Target::G11 => &mut g[0],
            Target::G22 => &mut g[1],
            Target::G33 => &mut g[2],
            Target::G12 => &mut g[3],
            Target::G13 => &mut g[4],
            Target::G23 => &mut g[5],
        };
        dest.push(term.mode, term.amplitude, term.phase);
    }
    for s in g.iter_mut().chain(a.iter_mut()) {
        s.canonicalize();
    }
    v.canonicalize();

    let n0 = spec.flux_integer;
    Ok(Problem {
        g,
        a,
        v,
        b: n0 as f64 / (2.0 * PI),
        flux_integer: Some(n0),
        symmetry_required: false,
        lambda_shift: 0.0,
        khat_shift: [0.0, 0.0],
    })
}

/// Reflection-symmetrize the coefficients:
/// G'(x) = (G(x) + R G(Rx) R) / 2, a'(x) = (a(x) + R a(Rx)) / 2,
/// V'(x) = (V(x) + V(Rx)) / 2. The output passes the symmetry check exactly
/// (to rounding) and the operation is idempotent on the canonical term lists.
pub fn symmetrize(problem: &Problem) -> Problem {
    let mut out = problem.clone();
    // R G R flips the sign of the (1,3) and (2,3) entries.
    for (idx, &(i, j)) in SYM_COMPONENTS.iter().enumerate() {
        let sign = if (i == 2) ^ (j == 2) { -1.0 } else { 1.0 };
        out.g[idx] = problem.g[idx].mirror_average(sign);
    }
    out.a[0] = problem.a[0].mirror_average(1.0);
    out.a[1] = problem.a[1].mirror_average(1.0);
    out.a[2] = problem.a[2].mirror_average(-1.0);
    out.v = problem.v.mirror_average(1.0);
    out.symmetry_required = true;
    out
}

/// Replace a with a + grad(chi) for a periodic scalar chi given as a finite
/// Fourier series (terms (mode, amplitude, phase)). The gradient is computed
/// term-wise, so the magnetic field curl A is unchanged exactly.
pub fn gauge_transform(problem: &Problem, chi: &[([i64; 3], f64, Trig)]) -> Problem {
    let chi_series = FourierSeries::new(chi.to_vec());
    let mut out = problem.clone();
    for d in 0..3 {
        let grad_d = chi_series.derivative(d);
        let mut combined = out.a[d].clone();
        for &(m, amp, t) in &grad_d.terms {
            combined.push(m, amp, t);
        }
        combined.canonicalize();
        out.a[d] = combined;
    }
    // A gauge change generally breaks the reflection symmetry of a.
    out.symmetry_required = false;
    out
}

/// Validation output: sampled ellipticity bounds, reflection-symmetry defect,
/// flux quantization and periodicity checks.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub ellipticity_bounds: (f64, f64),
    /// Location of the first non-positive-definite metric sample, if any.
    pub bad_sample: Option<[f64; 3]>,
    pub symmetry_residual: f64,
    pub symmetry_required: bool,
    pub flux_integer: i64,
    pub flux_ok: bool,
    pub periodicity_ok: bool,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.ellipticity_bounds.0 > 0.0
            && self.bad_sample.is_none()
            && self.flux_ok
            && self.periodicity_ok
            && (!self.symmetry_required || self.symmetry_residual <= 1e-12)
    }
}

pub const SYMMETRY_RESIDUAL_TOL: f64 = 1e-12;

/// Check the hypotheses on a sample lattice with `samples` points per axis.
pub fn validate(problem: &Problem, samples: usize) -> Result<ValidationReport> {
    if samples < 2 {
        return Err(CoreError::InvalidArgument(format!(
            "validation needs at least 2 samples per axis, got {samples}"
        )));
    }
    let step = 2.0 * PI / samples as f64;
    let coord = |i: usize| -PI + i as f64 * step;

    let mut c_est = f64::INFINITY;
    let mut big_c_est = f64::NEG_INFINITY;
    let mut bad_sample = None;
    let mut symmetry_residual = 0.0f64;
    let mut periodicity_ok = true;

    for i1 in 0..samples {
        for i2 in 0..samples {
            for i3 in 0..samples {
                let x = [coord(i1), coord(i2), coord(i3)];
                let g = problem.eval_g(x);
                let (lo, hi) = sym3_eigen_bounds(&g);
                if lo <= 0.0 && bad_sample.is_none() {
                    bad_sample = Some(x);
                }
                c_est = c_est.min(lo);
                big_c_est = big_c_est.max(hi);

                // Reflection-symmetry defect of G, a, V.
                let rx = [x[0], x[1], -x[2]];
                let grx = problem.eval_g(rx);
                for i in 0..3 {
                    for j in 0..3 {
                        let sign = if (i == 2) ^ (j == 2) { -1.0 } else { 1.0 };
                        symmetry_residual = symmetry_residual.max((grx[i][j] - sign * g[i][j]).abs());
                    }
                }
                let a = problem.eval_a(x);
                let arx = problem.eval_a(rx);
                symmetry_residual = symmetry_residual
                    .max((arx[0] - a[0]).abs())
                    .max((arx[1] - a[1]).abs())
                    .max((arx[2] + a[2]).abs());
                symmetry_residual =
                    symmetry_residual.max((problem.eval_v(rx) - problem.eval_v(x)).abs());

                // Periodicity of the periodic parts.
                for d in 0..3 {
                    let mut xs = x;
                    xs[d] += 2.0 * PI;
                    let gp = problem.eval_g(xs);
                    for i in 0..3 {
                        for j in 0..3 {
                            if (gp[i][j] - g[i][j]).abs() > 1e-12 {
                                periodicity_ok = false;
                            }
                        }
                    }
                    let ap = problem.eval_a(xs);
                    for i in 0..3 {
                        if (ap[i] - a[i]).abs() > 1e-12 {
                            periodicity_ok = false;
                        }
                    }
                    if (problem.eval_v(xs) - problem.eval_v(x)).abs() > 1e-12 {
                        periodicity_ok = false;
                    }
                }
            }
        }
    }

    // Flux check: exact on the stored integer; a raw field strength must be
    // an integer multiple of 1/(2*pi).
    let (flux_integer, flux_ok) = match problem.flux_integer {
        Some(n0) => (n0 as i64, true),
        None => {
            let two_pi_b = 2.0 * PI * problem.b;
            let nearest = two_pi_b.round();
            let ok = (two_pi_b - nearest).abs() <= 1e-12 && nearest >= 0.0;
            (nearest as i64, ok)
        }
    };

    Ok(ValidationReport {
        ellipticity_bounds: (c_est, big_c_est),
        bad_sample,
        symmetry_residual,
        symmetry_required: problem.symmetry_required,
        flux_integer,
        flux_ok,
        periodicity_ok,
    })
}

/// Smallest and largest eigenvalue of a symmetric 3x3 matrix, via the
/// trigonometric closed form (Smith's method).
fn sym3_eigen_bounds(g: &[[f64; 3]; 3]) -> (f64, f64) {
    let p1 = g[0][1] * g[0][1] + g[0][2] * g[0][2] + g[1][2] * g[1][2];
    let trace = g[0][0] + g[1][1] + g[2][2];
    if p1 == 0.0 {
        let lo = g[0][0].min(g[1][1]).min(g[2][2]);
        let hi = g[0][0].max(g[1][1]).max(g[2][2]);
        return (lo, hi);
    }
    let q = trace / 3.0;
    let mut p2 = 2.0 * p1;
    for d in 0..3 {
        p2 += (g[d][d] - q) * (g[d][d] - q);
    }
    let p = (p2 / 6.0).sqrt();
    let mut bmat = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            bmat[i][j] = (g[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let detb = bmat[0][0] * (bmat[1][1] * bmat[2][2] - bmat[1][2] * bmat[2][1])
        - bmat[0][1] * (bmat[1][0] * bmat[2][2] - bmat[1][2] * bmat[2][0])
        + bmat[0][2] * (bmat[1][0] * bmat[2][1] - bmat[1][1] * bmat[2][0]);
    let r = (detb / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    (lo, hi)
}

/// Named coefficient sets used throughout the test and acceptance suites.
/// All are meant to be passed through `symmetrize` (their raw terms need not
/// be reflection-symmetric).
pub mod presets {
    use super::*;

    /// Variable metric with mild anisotropy; stays elliptic with margin.
    pub fn metric() -> CoefficientSpec {
        CoefficientSpec::custom(
            vec![
                FourierTerm::new(Target::G11, [0, 1, 1], 0.25, Trig::Cos),
                FourierTerm::new(Target::G22, [1, 0, 2], 0.20, Trig::Cos),
                FourierTerm::new(Target::G33, [1, 1, 0], 0.15, Trig::Cos),
                FourierTerm::new(Target::G12, [0, 0, 1], 0.10, Trig::Cos),
                FourierTerm::new(Target::V, [1, 0, 0], 0.50, Trig::Cos),
            ],
            0,
        )
    }

    /// Scalar and magnetic periodic potentials, zero constant field.
    pub fn potential() -> CoefficientSpec {
        CoefficientSpec::custom(
            vec![
                FourierTerm::new(Target::V, [1, 0, 1], 0.80, Trig::Cos),
                FourierTerm::new(Target::V, [0, 1, 0], 0.50, Trig::Cos),
                FourierTerm::new(Target::A1, [0, 1, 1], 0.30, Trig::Cos),
                FourierTerm::new(Target::A3, [0, 0, 1], 0.20, Trig::Sin),
            ],
            0,
        )
    }

    /// Unit flux plus a scalar potential on top of the constant field.
    pub fn landau_potential() -> CoefficientSpec {
        CoefficientSpec::custom(
            vec![
                FourierTerm::new(Target::V, [0, 0, 1], 0.60, Trig::Cos),
                FourierTerm::new(Target::V, [1, 1, 0], 0.40, Trig::Cos),
            ],
            1,
        )
    }

    /// The symmetric sample suite: symmetrized problems used by the
    /// invariant and acceptance tests.
    pub fn symmetric_suite() -> Vec<(&'static str, Problem)> {
        [
            ("metric", metric()),
            ("potential", potential()),
            ("landau_potential", landau_potential()),
        ]
        .into_iter()
        .map(|(name, spec)| {
            let p = build_problem(&spec).expect("preset specs are valid");
            (name, symmetrize(&p))
        })
        .collect()
    }

    /// Deliberately reflection-asymmetric potential (odd in x3); the negative
    /// control for the symmetry-dependent invariants.
    pub fn asymmetric_control() -> Problem {
        let spec = CoefficientSpec::custom(
            vec![FourierTerm::new(Target::V, [0, 0, 1], 0.7, Trig::Sin)],
            0,
        );
        build_problem(&spec).expect("control spec is valid")
    }
}
