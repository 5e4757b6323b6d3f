//! Banded complex matrices used for fast state propagation.

use crate::{CMat, C64};

/// Square matrix with `k` sub- and super-diagonals, stored row-major by offset.
#[derive(Clone, Debug)]
pub struct Band {
    n: usize,
    k: usize,
    data: Vec<C64>,
    /// Offsets `j − i + k` of diagonals holding a nonzero entry.
    live: Vec<usize>,
}

impl Band {
    pub fn zeros(n: usize, k: usize) -> Self {
        Band {
            n,
            k,
            data: vec![C64::new(0.0, 0.0); n * (2 * k + 1)],
            live: Vec::new(),
        }
    }

    /// Extracts the band of a dense matrix. Entries outside the band are dropped.
    pub fn from_dense(m: &CMat, k: usize) -> Self {
        let n = m.nrows();
        let mut b = Band::zeros(n, k);
        for i in 0..n {
            for j in i.saturating_sub(k)..(i + k + 1).min(n) {
                b.set(i, j, m[(i, j)]);
            }
        }
        b
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.k
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (2 * self.k + 1) + (j + self.k - i)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if i.abs_diff(j) > self.k {
            C64::new(0.0, 0.0)
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        let id = self.idx(i, j);
        self.data[id] = v;
        let d = j + self.k - i;
        if v != C64::new(0.0, 0.0) && !self.live.contains(&d) {
            self.live.push(d);
            self.live.sort_unstable();
        }
    }

    /// `self + s * other`, widening the band if needed.
    pub fn add_scaled(&self, s: f64, other: &Band) -> Band {
        assert_eq!(self.n, other.n);
        let k = self.k.max(other.k);
        let mut out = Band::zeros(self.n, k);
        for i in 0..self.n {
            for j in i.saturating_sub(k)..(i + k + 1).min(self.n) {
                out.set(i, j, self.get(i, j) + other.get(i, j) * s);
            }
        }
        out
    }

    pub fn to_dense(&self) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// out = self * v
    #[inline]
    pub fn apply(&self, v: &[C64], out: &mut [C64]) {
        let n = self.n;
        let k = self.k;
        let w = 2 * k + 1;
        out[..n].fill(C64::new(0.0, 0.0));
        for &d in &self.live {
            // entries (i, i + d − k)
            let (lo, hi) = if d >= k {
                (0, n.saturating_sub(d - k))
            } else {
                ((k - d).min(n), n)
            };
            for i in lo..hi {
                out[i] += self.data[i * w + d] * v[i + d - k];
            }
        }
    }
}

/// Tridiagonal operator with zero diagonal, `up[i] = M[i][i+1]`, `down[i] = M[i+1][i]`.
#[derive(Clone, Debug)]
pub struct OffTri {
    pub up: Vec<C64>,
    pub down: Vec<C64>,
}

impl OffTri {
    pub fn dim(&self) -> usize {
        self.up.len() + 1
    }

    #[inline]
    pub fn apply(&self, v: &[C64], out: &mut [C64]) {
        let n = self.dim();
        if n == 1 {
            out[0] = C64::new(0.0, 0.0);
            return;
        }
        out[0] = self.up[0] * v[1];
        for i in 1..n - 1 {
            out[i] = self.down[i - 1] * v[i - 1] + self.up[i] * v[i + 1];
        }
        out[n - 1] = self.down[n - 2] * v[n - 2];
    }

    /// `<v|M|v>` real part, valid for Hermitian `M`.
    #[inline]
    pub fn expect(&self, v: &[C64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.up.len() {
            acc += (v[i].conj() * self.up[i] * v[i + 1]).re;
        }
        2.0 * acc
    }

    pub fn to_dense(&self) -> CMat {
        let n = self.dim();
        let mut m = CMat::zeros(n, n);
        for i in 0..n - 1 {
            m[(i, i + 1)] = self.up[i];
            m[(i + 1, i)] = self.down[i];
        }
        m
    }
}
