//! OFDM block machinery shared by every link: normalized DFT, cyclic prefix
//! insertion/removal and subcarrier selection.
//!
//! Subcarrier indices are zero-based throughout the crate.

use alloc::vec::Vec;
use core::f64::consts::PI;


use crate::{CMatrix, CVector, Error, Result, C64};

/// One of the two server-node/attached-node pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    First,
    Second,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::First => Side::Second,
            Side::Second => Side::First,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::First => 0,
            Side::Second => 1,
        }
    }
}

/// `N` subcarriers, a cyclic prefix of `L` samples and the split of the
/// subcarriers between the two OFDMA links.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmGrid {
    n_subcarriers: usize,
    cp_len: usize,
    sets: [Vec<usize>; 2],
}

impl OfdmGrid {
    /// Grid with an explicit partition. Each set is sorted; together they
    /// must cover `0..n_subcarriers` exactly once.
    pub fn new(n_subcarriers: usize, cp_len: usize, set_1: Vec<usize>, set_2: Vec<usize>) -> Result<Self> {
        if n_subcarriers == 0 {
            return Err(Error::InvalidGrid("at least one subcarrier is required"));
        }
        if cp_len == 0 || cp_len >= n_subcarriers {
            return Err(Error::InvalidGrid("cyclic prefix must satisfy 0 < L < N"));
        }
        let mut seen = alloc::vec![false; n_subcarriers];
        for &k in set_1.iter().chain(set_2.iter()) {
            if k >= n_subcarriers {
                return Err(Error::InvalidGrid("subcarrier index out of range"));
            }
            if seen[k] {
                return Err(Error::InvalidGrid("subcarrier sets overlap"));
            }
            seen[k] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidGrid("subcarrier sets do not cover the band"));
        }
        let mut sets = [set_1, set_2];
        for s in sets.iter_mut() {
            s.sort_unstable();
        }
        Ok(Self { n_subcarriers, cp_len, sets })
    }

    /// Contiguous halves: `0..N/2` for the first link, the rest for the second.
    pub fn contiguous(n_subcarriers: usize, cp_len: usize) -> Result<Self> {
        let half = n_subcarriers / 2;
        Self::new(n_subcarriers, cp_len, (0..half).collect(), (half..n_subcarriers).collect())
    }

    pub fn n(&self) -> usize {
        self.n_subcarriers
    }

    pub fn cp(&self) -> usize {
        self.cp_len
    }

    /// `N + L`.
    pub fn block_len(&self) -> usize {
        self.n_subcarriers + self.cp_len
    }

    pub fn set(&self, side: Side) -> &[usize] {
        &self.sets[side.index()]
    }

    /// `(N+L) x N` matrix copying the last `L` samples in front of the block.
    pub fn cp_insertion(&self) -> CMatrix {
        let (n, l) = (self.n_subcarriers, self.cp_len);
        let mut a = CMatrix::zeros(n + l, n);
        for r in 0..l {
            a[(r, n - l + r)] = C64::new(1.0, 0.0);
        }
        for r in 0..n {
            a[(l + r, r)] = C64::new(1.0, 0.0);
        }
        a
    }

    /// `N x (N+L)` matrix dropping the first `L` samples.
    pub fn cp_removal(&self) -> CMatrix {
        let (n, l) = (self.n_subcarriers, self.cp_len);
        let mut b = CMatrix::zeros(n, n + l);
        for r in 0..n {
            b[(r, l + r)] = C64::new(1.0, 0.0);
        }
        b
    }

    /// `N x N` diagonal 0/1 selector of one link's subcarriers.
    pub fn selector(&self, side: Side) -> CMatrix {
        let mut d = CMatrix::zeros(self.n_subcarriers, self.n_subcarriers);
        for &k in self.set(side) {
            d[(k, k)] = C64::new(1.0, 0.0);
        }
        d
    }

    /// `|set| x N` matrix whose rows are the unit vectors of the set, in
    /// increasing subcarrier order.
    pub fn reduced_selector(&self, side: Side) -> CMatrix {
        let set = self.set(side);
        let mut d = CMatrix::zeros(set.len(), self.n_subcarriers);
        for (r, &k) in set.iter().enumerate() {
            d[(r, k)] = C64::new(1.0, 0.0);
        }
        d
    }

    /// Time-domain block `A F^{-1} u` for frequency-domain data `u`, which
    /// must vanish outside the transmitter's subcarriers.
    pub fn modulate(&self, u: &CVector, side: Side) -> Result<CVector> {
        if u.len() != self.n_subcarriers {
            return Err(Error::DimensionMismatch { expected: self.n_subcarriers, found: u.len() });
        }
        let own = self.set(side);
        if let Some(index) = (0..u.len()).find(|k| u[*k] != C64::new(0.0, 0.0) && own.binary_search(k).is_err()) {
            return Err(Error::OutsideAllocation { index });
        }
        let time = dft_matrix(self.n_subcarriers).adjoint() * u;
        let (n, l) = (self.n_subcarriers, self.cp_len);
        Ok(CVector::from_fn(n + l, |r, _| if r < l { time[n - l + r] } else { time[r - l] }))
    }
}

/// Unitary `n`-point DFT matrix, entry `(m, k) = exp(-j 2 pi m k / n) / sqrt(n)`.
pub fn dft_matrix(n: usize) -> CMatrix {
    let scale = 1.0 / libm::sqrt(n as f64);
    CMatrix::from_fn(n, n, |m, k| {
        // reduce the exponent first so large products keep full precision
        let phase = -2.0 * PI * ((m * k) % n) as f64 / n as f64;
        C64::new(libm::cos(phase) * scale, libm::sin(phase) * scale)
    })
}
