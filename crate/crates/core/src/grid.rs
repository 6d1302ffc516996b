//! Discretization of the cell Omega = (-pi, pi)^3 with flux-twisted boundary
//! identifications: periodic in x1, quasiperiodic in x2 with the magnetic
//! twist phase exp(-i n0 x1), and either periodic (fiber mode) or open with
//! faces (slab mode) in x3. Also provides dof indexing, face extraction and
//! the reflection operator J.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMode {
    /// x3 periodic; the Bloch fiber cell.
    Fiber,
    /// x3 open with bottom/top faces; the slab of the boundary-value problem.
    Slab,
}

/// Uniform node-centered grid on the closed cell with twisted identifications.
#[derive(Debug, Clone)]
pub struct TwistedGrid {
    mode: GridMode,
    n: [usize; 3],
    h: [f64; 3],
    flux: u32,
}

/// Partition of the slab dof set into faces and interior.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub bottom: Vec<usize>,
    pub top: Vec<usize>,
    pub interior: Vec<usize>,
}

/// Build a grid. `n1, n2, n3` are cell counts per axis (so slab mode has
/// n3 + 1 node layers); `flux` is the integer n0 of the magnetic twist.
pub fn build_grid(mode: GridMode, n1: usize, n2: usize, n3: usize, flux: u32) -> Result<TwistedGrid> {
    for (axis, &n) in [n1, n2, n3].iter().enumerate() {
        if n < 4 {
            return Err(CoreError::GridTooSmall { axis: axis + 1, n });
        }
    }
    let h = |n: usize| 2.0 * PI / n as f64;
    Ok(TwistedGrid {
        mode,
        n: [n1, n2, n3],
        h: [h(n1), h(n2), h(n3)],
        flux,
    })
}

impl TwistedGrid {
    pub fn mode(&self) -> GridMode {
        self.mode
    }

    pub fn sizes(&self) -> [usize; 3] {
        self.n
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.h
    }

    pub fn flux(&self) -> u32 {
        self.flux
    }

    /// Volume of one cell, also the lumped mass per node.
    pub fn cell_volume(&self) -> f64 {
        self.h[0] * self.h[1] * self.h[2]
    }

    /// Number of node layers in x3: n3 in fiber mode, n3 + 1 in slab mode.
    pub fn layers3(&self) -> usize {
        match self.mode {
            GridMode::Fiber => self.n[2],
            GridMode::Slab => self.n[2] + 1,
        }
    }

    pub fn dof_count(&self) -> usize {
        self.n[0] * self.n[1] * self.layers3()
    }

    /// Linear dof index; x1 is the fastest axis.
    #[inline]
    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        debug_assert!(i1 < self.n[0] && i2 < self.n[1] && i3 < self.layers3());
        (i3 * self.n[1] + i2) * self.n[0] + i1
    }

    #[inline]
    pub fn node(&self, dof: usize) -> (usize, usize, usize) {
        let i1 = dof % self.n[0];
        let rest = dof / self.n[0];
        (i1, rest % self.n[1], rest / self.n[1])
    }

    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        -PI + i as f64 * self.h[axis]
    }

    pub fn coords(&self, i1: usize, i2: usize, i3: usize) -> [f64; 3] {
        [self.coord(0, i1), self.coord(1, i2), self.coord(2, i3)]
    }

    /// Twist phase attached to crossing the x2 seam upward at column i1:
    /// v(x1, pi, x3) = exp(-i n0 x1) v(x1, -pi, x3).
    #[inline]
    pub fn seam_phase(&self, i1: usize) -> Complex64 {
        Complex64::from_polar(1.0, -(self.flux as f64) * self.coord(0, i1))
    }

    /// Step one node along `axis` from (i1, i2, i3), wrapping through the
    /// boundary identifications. Returns the target dof and the unit-modulus
    /// phase with which the stored value represents the stepped-to value.
    /// In slab mode a step past an x3 face returns None.
    pub fn wrap(
        &self,
        i1: usize,
        i2: usize,
        i3: usize,
        axis: usize,
        step: isize,
    ) -> Option<(usize, Complex64)> {
        let mut idx = [i1 as isize, i2 as isize, i3 as isize];
        idx[axis] += step;
        let mut phase = Complex64::new(1.0, 0.0);

        // x1: plain periodic.
        if idx[0] < 0 {
            idx[0] += self.n[0] as isize;
        } else if idx[0] >= self.n[0] as isize {
            idx[0] -= self.n[0] as isize;
        }
        // x2: quasiperiodic with the flux twist.
        if idx[1] >= self.n[1] as isize {
            idx[1] -= self.n[1] as isize;
            phase *= self.seam_phase(idx[0] as usize);
        } else if idx[1] < 0 {
            idx[1] += self.n[1] as isize;
            phase *= self.seam_phase(idx[0] as usize).conj();
        }
        // x3: periodic in fiber mode, open in slab mode.
        let l3 = self.layers3() as isize;
        match self.mode {
            GridMode::Fiber => {
                if idx[2] < 0 {
                    idx[2] += l3;
                } else if idx[2] >= l3 {
                    idx[2] -= l3;
                }
            }
            GridMode::Slab => {
                if idx[2] < 0 || idx[2] >= l3 {
                    return None;
                }
            }
        }
        Some((
            self.index(idx[0] as usize, idx[1] as usize, idx[2] as usize),
            phase,
        ))
    }

    /// Reflected x3 layer index: the node map of J.
    #[inline]
    pub fn reflect_i3(&self, i3: usize) -> usize {
        match self.mode {
            GridMode::Fiber => (self.n[2] - i3) % self.n[2],
            GridMode::Slab => self.n[2] - i3,
        }
    }

    #[inline]
    pub fn reflect_index(&self, dof: usize) -> usize {
        let (i1, i2, i3) = self.node(dof);
        self.index(i1, i2, self.reflect_i3(i3))
    }

    /// Apply the reflection operator J: (Jv)(i1, i2, i3) = v(i1, i2, r(i3)).
    /// J is an index permutation, hence unitary in the lumped mass inner
    /// product, and J^2 = identity.
    pub fn reflect(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dof_count());
        let mut out = vec![Complex64::default(); v.len()];
        for (dof, slot) in out.iter_mut().enumerate() {
            *slot = v[self.reflect_index(dof)];
        }
        out
    }

    /// Face/interior partition (slab mode).
    pub fn dof_map(&self) -> Result<DofMap> {
        if self.mode != GridMode::Slab {
            return Err(CoreError::ModeMismatch {
                op: "dof_map",
                expected: GridMode::Slab,
                found: self.mode,
            });
        }
        let (n1, n2) = (self.n[0], self.n[1]);
        let top_layer = self.n[2];
        let mut bottom = Vec::with_capacity(n1 * n2);
        let mut top = Vec::with_capacity(n1 * n2);
        let mut interior = Vec::with_capacity(n1 * n2 * (top_layer - 1));
        for i3 in 0..=top_layer {
            for i2 in 0..n2 {
                for i1 in 0..n1 {
                    let dof = self.index(i1, i2, i3);
                    if i3 == 0 {
                        bottom.push(dof);
                    } else if i3 == top_layer {
                        top.push(dof);
                    } else {
                        interior.push(dof);
                    }
                }
            }
        }
        Ok(DofMap {
            bottom,
            top,
            interior,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    #[test]
    fn counts() {
        let g = build_grid(GridMode::Fiber, 8, 8, 8, 0).unwrap();
        assert_eq!(g.dof_count(), 512);
        let s = build_grid(GridMode::Slab, 8, 8, 8, 1).unwrap();
        assert_eq!(s.dof_count(), 8 * 8 * 9);
        let map = s.dof_map().unwrap();
        assert_eq!(map.bottom.len(), 64);
        assert_eq!(map.top.len(), 64);
        assert_eq!(map.interior.len(), s.dof_count() - 128);
    }

    #[test]
    fn faces_partition_dofs() {
        let s = build_grid(GridMode::Slab, 4, 5, 6, 0).unwrap();
        let map = s.dof_map().unwrap();
        let mut all: Vec<usize> = map
            .bottom
            .iter()
            .chain(map.top.iter())
            .chain(map.interior.iter())
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..s.dof_count()).collect::<Vec<_>>());
    }

    #[test]
    fn small_grid_rejected() {
        assert!(build_grid(GridMode::Fiber, 3, 8, 8, 0).is_err());
    }

    #[test]
    fn seam_phase_values() {
        // n0 = 2, n1 = 4: at i1 = 1, x1 = -pi/2, phase = exp(-i*2*(-pi/2)) = exp(i pi) = -1.
        let g = build_grid(GridMode::Fiber, 4, 4, 4, 2).unwrap();
        let (_, phase) = g.wrap(1, 3, 0, 1, 1).unwrap();
        assert_abs_diff_eq!(phase.re, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(phase.im, 0.0, epsilon = 1e-14);

        // n0 = 1 at x1 = pi/2: phase = exp(-i pi/2) = -i.
        let g = build_grid(GridMode::Fiber, 4, 4, 4, 1).unwrap();
        let i1 = 3; // x1 = -pi + 3*pi/2 = pi/2
        assert_abs_diff_eq!(g.coord(0, i1), std::f64::consts::FRAC_PI_2, epsilon = 1e-15);
        let (_, phase) = g.wrap(i1, 3, 0, 1, 1).unwrap();
        assert_abs_diff_eq!(phase.re, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(phase.im, -1.0, epsilon = 1e-14);

        // n0 = 1 at x1 = 0: phase = 1.
        let (_, phase) = g.wrap(2, 3, 0, 1, 1).unwrap();
        assert_abs_diff_eq!(phase.re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(phase.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_flux_phases_are_trivial() {
        let g = build_grid(GridMode::Fiber, 4, 4, 4, 0).unwrap();
        for axis in 0..3 {
            for step in [-1isize, 1] {
                let (_, phase) = g.wrap(3, 3, 3, axis, step).unwrap();
                assert_eq!(phase, Complex64::new(1.0, 0.0));
            }
        }
    }

    #[test]
    fn wrap_round_trip_cancels_phase() {
        let g = build_grid(GridMode::Fiber, 6, 6, 6, 3).unwrap();
        for i1 in 0..6 {
            let (up, p_up) = g.wrap(i1, 5, 2, 1, 1).unwrap();
            let (i1b, i2b, i3b) = g.node(up);
            let (down, p_down) = g.wrap(i1b, i2b, i3b, 1, -1).unwrap();
            assert_eq!(down, g.index(i1, 5, 2));
            let prod = p_up * p_down;
            assert_abs_diff_eq!(prod.re, 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(prod.im, 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(p_up.norm(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn slab_steps_past_faces_signal_boundary() {
        let s = build_grid(GridMode::Slab, 4, 4, 4, 0).unwrap();
        assert!(s.wrap(0, 0, 0, 2, -1).is_none());
        assert!(s.wrap(0, 0, 4, 2, 1).is_none());
        assert!(s.wrap(0, 0, 3, 2, 1).is_some());
    }

    #[test]
    fn reflection_is_involution() {
        for (mode, flux) in [(GridMode::Fiber, 1), (GridMode::Slab, 2)] {
            let g = build_grid(mode, 4, 5, 6, flux).unwrap();
            let v: Vec<Complex64> = (0..g.dof_count())
                .map(|i| Complex64::new((i * 7 % 13) as f64, (i * 3 % 5) as f64))
                .collect();
            let jjv = g.reflect(&g.reflect(&v));
            assert_eq!(jjv, v);
        }
    }

    #[test]
    fn reflection_swaps_slab_faces() {
        let s = build_grid(GridMode::Slab, 4, 4, 5, 0).unwrap();
        let map = s.dof_map().unwrap();
        let mut v = vec![Complex64::default(); s.dof_count()];
        v[map.top[7]] = Complex64::new(1.0, 0.0);
        let jv = s.reflect(&v);
        assert_eq!(jv[map.bottom[7]], Complex64::new(1.0, 0.0));
        assert_eq!(jv.iter().filter(|c| c.norm() > 0.0).count(), 1);
    }

    #[test]
    fn reflection_preserves_lumped_inner_product() {
        let g = build_grid(GridMode::Fiber, 5, 4, 6, 2).unwrap();
        let v: Vec<Complex64> = (0..g.dof_count())
            .map(|i| Complex64::new((i % 17) as f64 * 0.3, (i % 11) as f64 - 5.0))
            .collect();
        let w: Vec<Complex64> = (0..g.dof_count())
            .map(|i| Complex64::new((i % 7) as f64, (i % 19) as f64 * 0.1))
            .collect();
        let dot = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
            a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
        };
        // J permutes the summands, so the sums agree up to reordering noise.
        let (jv, jw) = (g.reflect(&v), g.reflect(&w));
        let (a, b) = (dot(&jv, &jw), dot(&v, &w));
        assert!((a - b).norm() <= 1e-13 * b.norm());
    }

    #[test]
    fn constant_function_is_reflection_fixed() {
        let g = build_grid(GridMode::Fiber, 4, 4, 4, 0).unwrap();
        let v = vec![Complex64::new(2.5, -1.0); g.dof_count()];
        assert_eq!(g.reflect(&v), v);
    }
}
