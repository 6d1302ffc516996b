//! Minimal complex CSR storage for the assembled forms, plus a multi-component
//! triplet accumulator so that one sparsity pattern can carry the several
//! value arrays of a quasimomentum-dependent family.

use num_complex::Complex64;
use rayon::prelude::*;
use std::io::Write;
use std::sync::Arc;

/// Shared sparsity structure (square).
#[derive(Debug, Clone)]
pub struct CsrPattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
}

/// Square complex sparse matrix in CSR form.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub pattern: Arc<CsrPattern>,
    pub vals: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(y.len(), self.dim());
        let p = &*self.pattern;
        y.par_iter_mut().enumerate().for_each(|(row, out)| {
            let mut acc = Complex64::default();
            for idx in p.row_ptr[row]..p.row_ptr[row + 1] {
                acc += self.vals[idx] * x[p.cols[idx] as usize];
            }
            *out = acc;
        });
    }

    /// Entry (i, j), zero if not stored.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let p = &*self.pattern;
        let range = p.row_ptr[i]..p.row_ptr[i + 1];
        match p.cols[range.clone()].binary_search(&(j as u32)) {
            Ok(off) => self.vals[range.start + off],
            Err(_) => Complex64::default(),
        }
    }

    pub fn norm_max(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// max_ij |A_ij - conj(A_ji)|.
    pub fn hermiticity_defect(&self) -> f64 {
        let p = &*self.pattern;
        let mut defect = 0.0f64;
        for row in 0..p.n {
            for idx in p.row_ptr[row]..p.row_ptr[row + 1] {
                let col = p.cols[idx] as usize;
                let mirrored = self.get(col, row);
                defect = defect.max((self.vals[idx] - mirrored.conj()).norm());
            }
        }
        defect
    }

    /// max_ij |A_{p(i) p(j)} - A_ij| for an index permutation p; measures the
    /// defect of P^* A P = A.
    pub fn permutation_conjugation_defect(&self, perm: &[usize]) -> f64 {
        assert_eq!(perm.len(), self.dim());
        let p = &*self.pattern;
        let mut defect = 0.0f64;
        for row in 0..p.n {
            for idx in p.row_ptr[row]..p.row_ptr[row + 1] {
                let col = p.cols[idx] as usize;
                let mirrored = self.get(perm[row], perm[col]);
                defect = defect.max((self.vals[idx] - mirrored).norm());
            }
        }
        defect
    }

    pub fn to_dense(&self) -> faer::Mat<Complex64> {
        let p = &*self.pattern;
        let mut m = faer::Mat::<Complex64>::zeros(p.n, p.n);
        for row in 0..p.n {
            for idx in p.row_ptr[row]..p.row_ptr[row + 1] {
                m[(row, p.cols[idx] as usize)] = self.vals[idx];
            }
        }
        m
    }

    /// Dense copy of the submatrix A[rows, cols].
    pub fn dense_submatrix(&self, rows: &[usize], cols: &[usize]) -> faer::Mat<Complex64> {
        let p = &*self.pattern;
        let mut col_pos = vec![usize::MAX; p.n];
        for (j, &c) in cols.iter().enumerate() {
            col_pos[c] = j;
        }
        let mut m = faer::Mat::<Complex64>::zeros(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for idx in p.row_ptr[r]..p.row_ptr[r + 1] {
                let j = col_pos[p.cols[idx] as usize];
                if j != usize::MAX {
                    m[(i, j)] = self.vals[idx];
                }
            }
        }
        m
    }

    /// Coordinate-format text dump: one `row col re im` line per entry,
    /// zero-based indices, deterministic order.
    pub fn write_coordinate_text<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let p = &*self.pattern;
        for row in 0..p.n {
            for idx in p.row_ptr[row]..p.row_ptr[row + 1] {
                writeln!(
                    w,
                    "{} {} {:e} {:e}",
                    row, p.cols[idx], self.vals[idx].re, self.vals[idx].im
                )?;
            }
        }
        Ok(())
    }
}

/// Accumulates (row, col) -> [K values] triplets and compresses them into one
/// shared CSR pattern with K aligned value arrays.
pub struct MultiTriplets<const K: usize> {
    n: usize,
    keys: Vec<u64>,
    vals: Vec<[Complex64; K]>,
}

impl<const K: usize> MultiTriplets<K> {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            keys: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn reserve(&mut self, additional: usize) {
        self.keys.reserve(additional);
        self.vals.reserve(additional);
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: [Complex64; K]) {
        debug_assert!(row < self.n && col < self.n);
        self.keys.push(((row as u64) << 32) | col as u64);
        self.vals.push(v);
    }

    pub fn build(self) -> (Arc<CsrPattern>, Vec<Vec<Complex64>>) {
        let mut order: Vec<u32> = (0..self.keys.len() as u32).collect();
        order.sort_unstable_by_key(|&i| self.keys[i as usize]);

        let mut row_ptr = vec![0usize; self.n + 1];
        let mut cols: Vec<u32> = Vec::new();
        let mut out: Vec<Vec<Complex64>> = (0..K).map(|_| Vec::new()).collect();

        let mut last_key = u64::MAX;
        for &i in &order {
            let key = self.keys[i as usize];
            let v = &self.vals[i as usize];
            if key == last_key {
                let tail = cols.len() - 1;
                for (c, vc) in out.iter_mut().zip(v.iter()) {
                    c[tail] += *vc;
                }
            } else {
                let row = (key >> 32) as usize;
                row_ptr[row + 1] += 1;
                cols.push((key & 0xffff_ffff) as u32);
                for (c, vc) in out.iter_mut().zip(v.iter()) {
                    c.push(*vc);
                }
                last_key = key;
            }
        }
        for r in 0..self.n {
            row_ptr[r + 1] += row_ptr[r];
        }
        (
            Arc::new(CsrPattern {
                n: self.n,
                row_ptr,
                cols,
            }),
            out,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn triplets_merge_and_matvec() {
        let mut t = MultiTriplets::<1>::new(3);
        t.add(0, 0, [c(1.0, 0.0)]);
        t.add(0, 0, [c(1.0, 0.0)]);
        t.add(0, 2, [c(0.0, 1.0)]);
        t.add(2, 0, [c(0.0, -1.0)]);
        t.add(1, 1, [c(3.0, 0.0)]);
        let (pattern, vals) = t.build();
        let a = CsrMatrix {
            pattern,
            vals: vals.into_iter().next().unwrap(),
        };
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.get(0, 0), c(2.0, 0.0));
        assert_eq!(a.get(1, 0), c(0.0, 0.0));

        let x = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)];
        let mut y = vec![Complex64::default(); 3];
        a.matvec(&x, &mut y);
        assert_eq!(y[0], c(2.0, 0.0) + c(0.0, 1.0) * c(0.0, 1.0));
        assert_eq!(y[2], c(0.0, -1.0));
        assert_eq!(a.hermiticity_defect(), 0.0);
    }

    #[test]
    fn permutation_defect_detects_asymmetry() {
        let mut t = MultiTriplets::<1>::new(2);
        t.add(0, 0, [c(1.0, 0.0)]);
        t.add(1, 1, [c(2.0, 0.0)]);
        let (pattern, vals) = t.build();
        let a = CsrMatrix {
            pattern,
            vals: vals.into_iter().next().unwrap(),
        };
        assert_eq!(a.permutation_conjugation_defect(&[0, 1]), 0.0);
        assert_eq!(a.permutation_conjugation_defect(&[1, 0]), 1.0);
    }
}
