//! Index bookkeeping for vectors that live on a periodic `d1 × ... × dN`
//! grid, flattened row-major.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    dims: Vec<usize>,
    n: usize,
    /// `coords[i * rank + s]` is the 0-based position of flat index `i` on axis `s`.
    coords: Vec<usize>,
    /// `table[i * n + k]` caches [`Lattice::offset`].
    table: Vec<u32>,
}

impl Lattice {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "grid dimensions must be positive, got {dims:?}"
            )));
        }
        let n: usize = dims.iter().product();
        let rank = dims.len();
        let mut coords = vec![0; n * rank];
        for i in 0..n {
            let mut rem = i;
            for s in (0..rank).rev() {
                coords[i * rank + s] = rem % dims[s];
                rem /= dims[s];
            }
        }
        let mut lattice = Lattice {
            dims: dims.to_vec(),
            n,
            coords,
            table: Vec::new(),
        };
        if n <= 4096 {
            let mut table = Vec::with_capacity(n * n);
            for i in 0..n {
                for k in 0..n {
                    table.push(lattice.offset_uncached(i, k) as u32);
                }
            }
            lattice.table = table;
        }
        Ok(lattice)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn coord(&self, i: usize, axis: usize) -> usize {
        self.coords[i * self.dims.len() + axis]
    }

    /// Flat index of the multi-index sum `i + k` (periodic, 0-based).
    #[inline]
    pub fn offset(&self, i: usize, k: usize) -> usize {
        if !self.table.is_empty() {
            return self.table[i * self.n + k] as usize;
        }
        self.offset_uncached(i, k)
    }

    fn offset_uncached(&self, i: usize, k: usize) -> usize {
        if self.dims.len() == 1 {
            let s = i + k;
            return if s >= self.n { s - self.n } else { s };
        }
        let rank = self.dims.len();
        let mut flat = 0;
        for s in 0..rank {
            let d = self.dims[s];
            let mut v = self.coords[i * rank + s] + self.coords[k * rank + s];
            if v >= d {
                v -= d;
            }
            flat = flat * d + v;
        }
        flat
    }

    /// `[w ∗ x]_i = Σ_k x_{i+k} w_k` into `out`.
    pub fn correlate_into(&self, w: &[f64], x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            if self.table.is_empty() {
                for (k, &wk) in w.iter().enumerate() {
                    acc += x[self.offset(i, k)] * wk;
                }
            } else {
                let row = &self.table[i * self.n..(i + 1) * self.n];
                for (&j, &wk) in row.iter().zip(w) {
                    acc += x[j as usize] * wk;
                }
            }
            *o = acc;
        }
    }

    /// Adjoint of [`Self::correlate_into`] with respect to `w` and `x`:
    /// `grad_w[k] += Σ_i δ_i x_{i+k}`, `grad_x[i+k] += δ_i w_k`.
    pub fn correlate_adjoint(
        &self,
        w: &[f64],
        x: &[f64],
        delta: &[f64],
        grad_w: &mut [f64],
        grad_x: &mut [f64],
    ) {
        for (i, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for k in 0..self.n {
                let j = self.offset(i, k);
                grad_w[k] += d * x[j];
                grad_x[j] += d * w[k];
            }
        }
    }

    /// Hyperplane sums along `axis`: `sums[v] = Σ_{j : j_axis = v} x_j`.
    pub fn axis_sums(&self, x: &[f64], axis: usize) -> Vec<f64> {
        let mut sums = vec![0.0; self.dims[axis]];
        for (i, &v) in x.iter().enumerate() {
            sums[self.coord(i, axis)] += v;
        }
        sums
    }

    /// `[Σ_{s,1} x]_i`, the sum over entries sharing index `i_s`.
    pub fn sigma1(&self, x: &[f64], axis: usize) -> Vec<f64> {
        let sums = self.axis_sums(x, axis);
        (0..self.n).map(|i| sums[self.coord(i, axis)]).collect()
    }

    /// `[Σ_{s,2} x]_i = Σ_{j, j' : j_s = j'_s = i_s} x_j x_{j'}`, the square of
    /// the hyperplane sum.
    pub fn sigma2(&self, x: &[f64], axis: usize) -> Vec<f64> {
        let sums = self.axis_sums(x, axis);
        (0..self.n)
            .map(|i| {
                let s = sums[self.coord(i, axis)];
                s * s
            })
            .collect()
    }
}

/// Periodic cross-correlation `[w ∗ x]_i = Σ_k x_{i+k} w_k` on a grid.
pub fn circular_convolution(dims: &[usize], w: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let lattice = Lattice::new(dims)?;
    for len in [w.len(), x.len()] {
        if len != lattice.len() {
            return Err(Error::DimensionMismatch {
                expected: lattice.len(),
                got: len,
            });
        }
    }
    let mut out = vec![0.0; lattice.len()];
    lattice.correlate_into(w, x, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_filter_rotates() {
        let (a, b, c) = (1.5, -2.0, 7.0);
        let y = circular_convolution(&[3], &[0.0, 1.0, 0.0], &[a, b, c]).unwrap();
        assert_eq!(y, vec![b, c, a]);
    }

    #[test]
    fn unit_filter_is_identity() {
        let x = [0.1, 0.2, -0.3, 0.4];
        assert_eq!(circular_convolution(&[4], &[1.0, 0.0, 0.0, 0.0], &x).unwrap(), x.to_vec());
        let x2: Vec<f64> = (0..6).map(|v| v as f64 * 0.7 - 1.0).collect();
        let mut e = vec![0.0; 6];
        e[0] = 1.0;
        assert_eq!(circular_convolution(&[2, 3], &e, &x2).unwrap(), x2);
    }

    #[test]
    fn matches_hand_expansion_1d() {
        // entry j = Σ_k x_{k+j-1} w_k (1-based, periodic)
        let w = [1.0, 2.0, 3.0];
        let x = [4.0, 5.0, 6.0];
        let y = circular_convolution(&[3], &w, &x).unwrap();
        assert_eq!(y, vec![4.0 + 10.0 + 18.0, 5.0 + 12.0 + 12.0, 6.0 + 8.0 + 15.0]);
    }

    #[test]
    fn two_dimensional_offsets_wrap() {
        let l = Lattice::new(&[2, 3]).unwrap();
        // (1,2) + (1,2) = (2,4) ≡ (0,1) → flat 1
        assert_eq!(l.offset(5, 5), 1);
        assert_eq!(l.offset(0, 4), 4);
    }

    #[test]
    fn axis_sums_examples() {
        let l = Lattice::new(&[2, 2]).unwrap();
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(l.sigma1(&x, 0), vec![3.0, 3.0, 7.0, 7.0]);
        assert_eq!(l.sigma1(&x, 1), vec![4.0, 6.0, 4.0, 6.0]);
        assert_eq!(l.sigma2(&x, 0), vec![9.0, 9.0, 49.0, 49.0]);
    }

    #[test]
    fn sigma2_matches_double_sum() {
        let l = Lattice::new(&[2, 3]).unwrap();
        let x: Vec<f64> = (0..6).map(|v| (v as f64).sin()).collect();
        let fast = l.sigma2(&x, 1);
        for i in 0..6 {
            let mut brute = 0.0;
            for j in 0..6 {
                for jp in 0..6 {
                    if l.coord(j, 1) == l.coord(i, 1) && l.coord(jp, 1) == l.coord(i, 1) {
                        brute += x[j] * x[jp];
                    }
                }
            }
            assert!((brute - fast[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(circular_convolution(&[3], &[1.0, 0.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(circular_convolution(&[0], &[], &[]).is_err());
    }
}
