use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{NsfError, Result};

/// Wavevector on the integer lattice.
pub type Wavevector = [i64; 3];

/// Truncated Fourier grid on the unit torus.
///
/// `m` is the Fourier cutoff (max |k_i| per axis), `n` the number of
/// collocation points per axis used for transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGrid {
    m: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m < 1 {
            return Err(NsfError::InvalidGrid(format!("cutoff m = {m} must be >= 1")));
        }
        if n < 2 * m + 1 {
            return Err(NsfError::InvalidGrid(format!(
                "resolution n = {n} below 2m+1 = {}",
                2 * m + 1
            )));
        }
        Ok(Self { m, n })
    }

    /// Grid with the smallest resolution that admits dealiased quadratic products.
    pub fn dealiased(m: usize) -> Result<Self> {
        Self::new(m, Self::min_dealiased_resolution(m))
    }

    /// ceil(3(2m+1)/2).
    pub fn min_dealiased_resolution(m: usize) -> usize {
        (3 * (2 * m + 1)).div_ceil(2)
    }

    pub fn cutoff(&self) -> usize {
        self.m
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    /// Number of modes per axis, 2m+1.
    pub fn side(&self) -> usize {
        2 * self.m + 1
    }

    pub fn num_modes(&self) -> usize {
        let s = self.side();
        s * s * s
    }

    pub fn supports_dealiasing(&self) -> bool {
        self.n >= Self::min_dealiased_resolution(self.m)
    }

    /// Resolution used for dealiased products: `n`, padded up if needed.
    pub fn dealias_resolution(&self) -> usize {
        self.n.max(Self::min_dealiased_resolution(self.m))
    }

    pub fn contains(&self, k: Wavevector) -> bool {
        let m = self.m as i64;
        k.iter().all(|&ki| ki.abs() <= m)
    }

    #[inline]
    pub fn index(&self, k: Wavevector) -> usize {
        let m = self.m as i64;
        let s = self.side();
        debug_assert!(self.contains(k));
        (((k[0] + m) as usize) * s + (k[1] + m) as usize) * s + (k[2] + m) as usize
    }

    #[inline]
    pub fn wavevector(&self, idx: usize) -> Wavevector {
        let s = self.side();
        let m = self.m as i64;
        let k2 = (idx % s) as i64 - m;
        let k1 = ((idx / s) % s) as i64 - m;
        let k0 = (idx / (s * s)) as i64 - m;
        [k0, k1, k2]
    }

    /// Iterator over all wavevectors, in storage order.
    pub fn modes(&self) -> impl Iterator<Item = Wavevector> + '_ {
        (0..self.num_modes()).map(move |i| self.wavevector(i))
    }

    /// Eigenvalue 4π²|k|² of the Stokes operator −ΠΔ (and of −Δ).
    pub fn stokes_eigenvalue(k: Wavevector) -> f64 {
        4.0 * PI * PI * norm2(k) as f64
    }

    /// Same grid with a different cutoff; resolution is raised if necessary.
    pub fn with_cutoff(&self, m: usize) -> Result<Self> {
        Self::new(m, self.n.max(2 * m + 1))
    }
}

#[inline]
pub fn norm2(k: Wavevector) -> i64 {
    k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
}

#[inline]
pub fn max_norm(k: Wavevector) -> i64 {
    k[0].abs().max(k[1].abs()).max(k[2].abs())
}

pub(crate) fn check_same(a: &TorusGrid, b: &TorusGrid) -> Result<()> {
    if a != b {
        return Err(NsfError::GridMismatch(a.m, a.n, b.m, b.n));
    }
    Ok(())
}
