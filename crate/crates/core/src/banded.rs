//! Banded matrices: a symmetric band used for stiffness operators and a
//! general band LU factorisation with partial pivoting.

use crate::error::{Error, Result};
use crate::numeric::ksum;

/// Symmetric banded matrix; `bands[m][i]` holds `A[i][i+m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    bands: Vec<Vec<f64>>,
}

impl SymBand {
    pub fn zeros(n: usize, half_bandwidth: usize) -> Self {
        let bands = (0..=half_bandwidth)
            .map(|m| vec![0.0; n.saturating_sub(m)])
            .collect();
        Self { n, bands }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.bands.len() - 1
    }

    /// Add `v` to `A[i][j]` (and, off the diagonal, to `A[j][i]`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let m = hi - lo;
        assert!(m < self.bands.len(), "entry outside band");
        self.bands[m][lo] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let m = hi - lo;
        if m >= self.bands.len() {
            0.0
        } else {
            self.bands[m][lo]
        }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.bands[0]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.bands[0].iter().zip(x).map(|(a, b)| a * b).collect();
        for (m, band) in self.bands.iter().enumerate().skip(1) {
            for i in 0..n - m {
                let a = band[i];
                y[i] += a * x[i + m];
                y[i + m] += a * x[i];
            }
        }
        y
    }

    /// Quadratic form `xᵀ A x`, compensated.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let ax = self.matvec(x);
        ksum(ax.iter().zip(x).map(|(a, b)| a * b))
    }
}

/// LU factors of a general band matrix with `kl = ku = k` before pivoting.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    k: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    /// Factorise `S + diag(shift)` where `S` is symmetric banded.
    pub fn factor_shifted(s: &SymBand, shift: &[f64]) -> Result<Self> {
        let n = s.dim();
        let k = s.half_bandwidth();
        let width = 3 * k + 1;
        let mut data = vec![0.0; n * width];
        // Row i stores columns i-k ..= i+2k at offsets 0 ..= 3k.
        for i in 0..n {
            let j_lo = i.saturating_sub(k);
            let j_hi = (i + k).min(n - 1);
            for j in j_lo..=j_hi {
                let mut v = s.get(i, j);
                if i == j {
                    v += shift[i];
                }
                data[i * width + (j + k - i)] = v;
            }
        }
        let mut lu = Self {
            n,
            k,
            width,
            data,
            pivots: vec![0; n],
        };
        lu.factorise()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.k - i)
    }

    fn factorise(&mut self) -> Result<()> {
        let (n, k) = (self.n, self.k);
        let mut scale = 0.0_f64;
        for v in &self.data {
            scale = scale.max(v.abs());
        }
        for i in 0..n {
            let r_hi = (i + k).min(n - 1);
            let mut p = i;
            let mut best = self.data[self.idx(i, i)].abs();
            for r in i + 1..=r_hi {
                let v = self.data[self.idx(r, i)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= f64::EPSILON * 1e-4 * scale || !best.is_finite() {
                return Err(Error::Singular(format!("zero pivot at row {i}")));
            }
            self.pivots[i] = p;
            let c_hi = (i + 2 * k).min(n - 1);
            if p != i {
                for c in i..=c_hi {
                    let (a, b) = (self.idx(i, c), self.idx(p, c));
                    self.data.swap(a, b);
                }
            }
            let piv = self.data[self.idx(i, i)];
            for r in i + 1..=r_hi {
                let ir = self.idx(r, i);
                let l = self.data[ir] / piv;
                self.data[ir] = l;
                if l != 0.0 {
                    for c in i + 1..=c_hi {
                        let u = self.data[self.idx(i, c)];
                        let t = self.idx(r, c);
                        self.data[t] -= l * u;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, k) = (self.n, self.k);
        let mut x = rhs.to_vec();
        for i in 0..n {
            let p = self.pivots[i];
            if p != i {
                x.swap(i, p);
            }
            let xi = x[i];
            for r in i + 1..=(i + k).min(n - 1) {
                x[r] -= self.data[self.idx(r, i)] * xi;
            }
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for c in i + 1..=(i + 2 * k).min(n - 1) {
                acc -= self.data[self.idx(i, c)] * x[c];
            }
            x[i] = acc / self.data[self.idx(i, i)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense(s: &SymBand, shift: &[f64]) -> Vec<Vec<f64>> {
        let n = s.dim();
        (0..n)
            .map(|i| (0..n).map(|j| s.get(i, j) + if i == j { shift[i] } else { 0.0 }).collect())
            .collect()
    }

    proptest! {
        #[test]
        fn lu_solves_indefinite_band_systems(
            n in 3usize..40,
            k in 1usize..4,
            seed in proptest::collection::vec(-1.0f64..1.0, 400),
            shift in proptest::collection::vec(-3.0f64..3.0, 40),
        ) {
            let mut s = SymBand::zeros(n, k);
            let mut it = seed.iter().cycle();
            for i in 0..n {
                for m in 0..=k {
                    if i + m < n {
                        s.add(i, i + m, *it.next().unwrap());
                    }
                }
            }
            let shift = &shift[..n];
            let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 0.1).collect();
            let a = dense(&s, shift);
            let b: Vec<f64> = a.iter().map(|row| row.iter().zip(&x_true).map(|(p, q)| p * q).sum()).collect();
            if let Ok(lu) = BandLu::factor_shifted(&s, shift) {
                let x = lu.solve(&b);
                let r: f64 = a.iter().zip(&b).map(|(row, bi)| {
                    (row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() - bi).abs()
                }).fold(0.0, f64::max);
                let xn = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
                prop_assert!(r < 1e-8 * xn, "residual {}", r);
            }
        }
    }

    #[test]
    fn matvec_and_quad_form_agree_with_dense() {
        let mut s = SymBand::zeros(5, 2);
        for i in 0..5 {
            s.add(i, i, 2.0 + i as f64);
            if i + 1 < 5 {
                s.add(i, i + 1, -1.0);
            }
            if i + 2 < 5 {
                s.add(i, i + 2, 0.25);
            }
        }
        let x = [1.0, -2.0, 0.5, 3.0, -1.0];
        let d = dense(&s, &[0.0; 5]);
        let y = s.matvec(&x);
        for i in 0..5 {
            let e: f64 = (0..5).map(|j| d[i][j] * x[j]).sum();
            assert!((y[i] - e).abs() < 1e-14);
        }
        let q: f64 = (0..5).map(|i| x[i] * y[i]).sum();
        assert!((s.quad_form(&x) - q).abs() < 1e-12);
    }
}
