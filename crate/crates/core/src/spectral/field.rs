use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::grid::{max_norm, norm2, TorusGrid, Wavevector};
use super::transform;
use crate::error::{NsfError, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Real scalar field stored as truncated Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            coeffs: vec![ZERO; grid.num_modes()],
        }
    }

    pub fn constant(grid: TorusGrid, value: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.coeffs[grid.index([0, 0, 0])] = Complex64::new(value, 0.0);
        f
    }

    pub fn from_coefficients(grid: TorusGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.num_modes() {
            return Err(NsfError::InvalidOperand(format!(
                "expected {} coefficients, got {}",
                grid.num_modes(),
                coeffs.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    /// Interpolant of `f` sampled on the grid's collocation points.
    pub fn from_fn(grid: TorusGrid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let n = grid.resolution();
        let values: Vec<f64> = (0..n * n * n)
            .map(|i| f(transform::grid_point(i, n)))
            .collect();
        Self::from_values(grid, n, &values)
    }

    /// Project physical values on an `n^3` grid onto this grid's modes.
    pub fn from_values(grid: TorusGrid, n: usize, values: &[f64]) -> Self {
        let (coeffs, _) = transform::from_physical_pair(values, None, grid.cutoff(), n);
        let mut f = Self { grid, coeffs };
        f.symmetrize();
        f
    }

    /// `amp·cos(2πk·x)`.
    pub fn cos_mode(grid: TorusGrid, k: Wavevector, amp: f64) -> Result<Self> {
        let mut f = Self::zeros(grid);
        f.add_cos(k, amp)?;
        Ok(f)
    }

    /// `amp·sin(2πk·x)`.
    pub fn sin_mode(grid: TorusGrid, k: Wavevector, amp: f64) -> Result<Self> {
        let mut f = Self::zeros(grid);
        f.add_sin(k, amp)?;
        Ok(f)
    }

    pub fn add_cos(&mut self, k: Wavevector, amp: f64) -> Result<()> {
        self.check_mode(k)?;
        if k == [0, 0, 0] {
            self.coeffs[self.grid.index(k)] += amp;
            return Ok(());
        }
        let neg = [-k[0], -k[1], -k[2]];
        self.coeffs[self.grid.index(k)] += 0.5 * amp;
        self.coeffs[self.grid.index(neg)] += 0.5 * amp;
        Ok(())
    }

    pub fn add_sin(&mut self, k: Wavevector, amp: f64) -> Result<()> {
        self.check_mode(k)?;
        if k == [0, 0, 0] {
            return Ok(());
        }
        let neg = [-k[0], -k[1], -k[2]];
        self.coeffs[self.grid.index(k)] += Complex64::new(0.0, -0.5 * amp);
        self.coeffs[self.grid.index(neg)] += Complex64::new(0.0, 0.5 * amp);
        Ok(())
    }

    /// Random real field on modes with max-norm ≤ `cutoff`, amplitudes decaying like 1/(1+|k|²).
    pub fn random<R: Rng + ?Sized>(grid: TorusGrid, cutoff: usize, amplitude: f64, rng: &mut R) -> Self {
        let mut f = Self::zeros(grid);
        for (i, k) in grid.modes().enumerate() {
            if max_norm(k) as usize > cutoff {
                continue;
            }
            let scale = amplitude / (1.0 + norm2(k) as f64);
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            f.coeffs[i] = Complex64::new(re, im) * scale;
        }
        f.symmetrize();
        f
    }

    fn check_mode(&self, k: Wavevector) -> Result<()> {
        if !self.grid.contains(k) {
            return Err(NsfError::InvalidMode {
                k,
                cutoff: self.grid.cutoff(),
                context: None,
            });
        }
        Ok(())
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient at `k`; zero outside the cutoff.
    pub fn coeff(&self, k: Wavevector) -> Complex64 {
        if self.grid.contains(k) {
            self.coeffs[self.grid.index(k)]
        } else {
            ZERO
        }
    }

    pub fn set_coeff(&mut self, k: Wavevector, value: Complex64) -> Result<()> {
        self.check_mode(k)?;
        let i = self.grid.index(k);
        self.coeffs[i] = value;
        Ok(())
    }

    /// Spatial mean, i.e. the zero-mode coefficient.
    pub fn mean(&self) -> f64 {
        self.coeffs[self.grid.index([0, 0, 0])].re
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// max_k |c(−k) − conj c(k)|.
    pub fn hermitian_defect(&self) -> f64 {
        let len = self.coeffs.len();
        (0..len)
            .map(|i| (self.coeffs[len - 1 - i] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Enforce c(−k) = conj c(k) by averaging.
    pub fn symmetrize(&mut self) {
        let len = self.coeffs.len();
        for i in 0..=len / 2 {
            let j = len - 1 - i;
            let avg = 0.5 * (self.coeffs[i] + self.coeffs[j].conj());
            self.coeffs[i] = avg;
            self.coeffs[j] = avg.conj();
        }
    }

    /// Physical values on an `n^3` grid, `n ≥ 2m+1`.
    pub fn values(&self, n: usize) -> Vec<f64> {
        transform::to_physical_pair(&self.coeffs, None, self.grid.cutoff(), n).0
    }

    /// Evaluate at an arbitrary point by direct summation.
    pub fn eval_at(&self, x: [f64; 3]) -> f64 {
        self.grid
            .modes()
            .zip(&self.coeffs)
            .map(|(k, c)| {
                let ph = 2.0 * PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2]);
                c.re * ph.cos() - c.im * ph.sin()
            })
            .sum()
    }

    /// Re-express on another grid: modes are copied where both grids have them.
    pub fn regrid(&self, grid: TorusGrid) -> Self {
        if grid == self.grid {
            return self.clone();
        }
        let mut out = Self::zeros(grid);
        let m = self.grid.cutoff().min(grid.cutoff()) as i64;
        for k0 in -m..=m {
            for k1 in -m..=m {
                for k2 in -m..=m {
                    let k = [k0, k1, k2];
                    out.coeffs[grid.index(k)] = self.coeffs[self.grid.index(k)];
                }
            }
        }
        out
    }

    /// Map every coefficient through `f(k, c)`.
    pub fn map_modes(&self, mut f: impl FnMut(Wavevector, Complex64) -> Complex64) -> Self {
        let coeffs = self
            .grid
            .modes()
            .zip(&self.coeffs)
            .map(|(k, &c)| f(k, c))
            .collect();
        Self {
            grid: self.grid,
            coeffs,
        }
    }

    /// `self += a·x`.
    pub fn axpy(&mut self, a: f64, x: &ScalarField) {
        assert_eq!(self.grid, x.grid, "grid mismatch");
        for (s, v) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *s += a * v;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out *= a;
        out
    }
}

impl AddAssign<&ScalarField> for ScalarField {
    fn add_assign(&mut self, rhs: &ScalarField) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&ScalarField> for ScalarField {
    fn sub_assign(&mut self, rhs: &ScalarField) {
        self.axpy(-1.0, rhs);
    }
}

impl MulAssign<f64> for ScalarField {
    fn mul_assign(&mut self, a: f64) {
        for c in &mut self.coeffs {
            *c *= a;
        }
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, a: f64) -> ScalarField {
        self.scaled(a)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.scaled(-1.0)
    }
}

/// Real vector field with three components on a shared grid.
///
/// The `divergence_free` tag is set by the Leray projection and kept by
/// operations that preserve it (sums of tagged fields, scaling).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    comps: [ScalarField; 3],
    divergence_free: bool,
}

impl VectorField {
    pub fn zeros(grid: TorusGrid) -> Self {
        let z = ScalarField::zeros(grid);
        Self {
            comps: [z.clone(), z.clone(), z],
            divergence_free: true,
        }
    }

    pub fn from_components(comps: [ScalarField; 3]) -> Result<Self> {
        let g = comps[0].grid();
        for c in &comps[1..] {
            super::grid::check_same(&g, &c.grid())?;
        }
        Ok(Self {
            comps,
            divergence_free: false,
        })
    }

    pub fn random<R: Rng + ?Sized>(grid: TorusGrid, cutoff: usize, amplitude: f64, rng: &mut R) -> Self {
        Self {
            comps: std::array::from_fn(|_| ScalarField::random(grid, cutoff, amplitude, rng)),
            divergence_free: false,
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.comps[0].grid()
    }

    pub fn component(&self, i: usize) -> &ScalarField {
        &self.comps[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut ScalarField {
        self.divergence_free = false;
        &mut self.comps[i]
    }

    pub fn components(&self) -> &[ScalarField; 3] {
        &self.comps
    }

    pub fn into_components(self) -> [ScalarField; 3] {
        self.comps
    }

    pub fn is_divergence_free(&self) -> bool {
        self.divergence_free
    }

    /// Set the tag if the field passes the discrete incompressibility test.
    pub fn mark_divergence_free(&mut self) -> Result<()> {
        let div = self.max_divergence();
        let norm = self.norm_l2();
        if div > 1e-12 * norm.max(f64::MIN_POSITIVE) {
            return Err(NsfError::InvalidOperand(format!(
                "field has divergence {div:.3e} relative to norm {norm:.3e}"
            )));
        }
        self.divergence_free = true;
        Ok(())
    }

    pub(crate) fn set_divergence_free_unchecked(&mut self, flag: bool) {
        self.divergence_free = flag;
    }

    /// max_k |k · v̂(k)|.
    pub fn max_divergence(&self) -> f64 {
        let g = self.grid();
        g.modes()
            .enumerate()
            .map(|(i, k)| {
                (0..3)
                    .map(|d| self.comps[d].coeffs()[i] * k[d] as f64)
                    .sum::<Complex64>()
                    .norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.comps.iter().map(ScalarField::norm_sqr).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(ScalarField::is_finite)
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.comps.iter().map(ScalarField::hermitian_defect).fold(0.0, f64::max)
    }

    pub fn axpy(&mut self, a: f64, x: &VectorField) {
        for d in 0..3 {
            self.comps[d].axpy(a, &x.comps[d]);
        }
        self.divergence_free &= x.divergence_free;
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out *= a;
        out
    }

    pub fn regrid(&self, grid: TorusGrid) -> Self {
        Self {
            comps: std::array::from_fn(|d| self.comps[d].regrid(grid)),
            divergence_free: self.divergence_free,
        }
    }
}

impl AddAssign<&VectorField> for VectorField {
    fn add_assign(&mut self, rhs: &VectorField) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&VectorField> for VectorField {
    fn sub_assign(&mut self, rhs: &VectorField) {
        self.axpy(-1.0, rhs);
    }
}

impl MulAssign<f64> for VectorField {
    fn mul_assign(&mut self, a: f64) {
        for c in &mut self.comps {
            *c *= a;
        }
    }
}

impl Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: &VectorField) -> VectorField {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: &VectorField) -> VectorField {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Mul<f64> for &VectorField {
    type Output = VectorField;
    fn mul(self, a: f64) -> VectorField {
        self.scaled(a)
    }
}

/// 3×3 matrix-valued field, entry `(i, j)` at `comps[i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    comps: [[ScalarField; 3]; 3],
}

impl TensorField {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            comps: std::array::from_fn(|_| std::array::from_fn(|_| ScalarField::zeros(grid))),
        }
    }

    pub fn from_components(comps: [[ScalarField; 3]; 3]) -> Result<Self> {
        let g = comps[0][0].grid();
        for row in &comps {
            for c in row {
                super::grid::check_same(&g, &c.grid())?;
            }
        }
        Ok(Self { comps })
    }

    pub fn random<R: Rng + ?Sized>(grid: TorusGrid, cutoff: usize, amplitude: f64, rng: &mut R) -> Self {
        Self {
            comps: std::array::from_fn(|_| {
                std::array::from_fn(|_| ScalarField::random(grid, cutoff, amplitude, rng))
            }),
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.comps[0][0].grid()
    }

    pub fn get(&self, i: usize, j: usize) -> &ScalarField {
        &self.comps[i][j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut ScalarField {
        &mut self.comps[i][j]
    }

    pub fn components(&self) -> &[[ScalarField; 3]; 3] {
        &self.comps
    }

    pub fn transpose(&self) -> Self {
        Self {
            comps: std::array::from_fn(|i| std::array::from_fn(|j| self.comps[j][i].clone())),
        }
    }

    /// ½(T + Tᵀ).
    pub fn symmetric_part(&self) -> Self {
        Self {
            comps: std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    let mut s = &self.comps[i][j] + &self.comps[j][i];
                    s *= 0.5;
                    s
                })
            }),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.comps.iter().flatten().map(ScalarField::norm_sqr).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(ScalarField::is_finite)
    }

    pub fn axpy(&mut self, a: f64, x: &TensorField) {
        for i in 0..3 {
            for j in 0..3 {
                self.comps[i][j].axpy(a, &x.comps[i][j]);
            }
        }
    }
}

/// Common access to the scalar components of any field kind.
pub trait SpectralField: Clone {
    fn field_grid(&self) -> TorusGrid;
    fn scalar_parts(&self) -> Vec<&ScalarField>;
    /// Apply a component-wise linear map; tags that the map may break are cleared.
    fn map_parts(&self, f: impl FnMut(&ScalarField) -> ScalarField) -> Self;
    /// Like `map_parts` for maps that commute with the Leray projection
    /// (Fourier multipliers depending on |k| only); tags are kept.
    fn map_isotropic(&self, f: impl FnMut(&ScalarField) -> ScalarField) -> Self {
        self.map_parts(f)
    }
}

impl SpectralField for ScalarField {
    fn field_grid(&self) -> TorusGrid {
        self.grid
    }
    fn scalar_parts(&self) -> Vec<&ScalarField> {
        vec![self]
    }
    fn map_parts(&self, mut f: impl FnMut(&ScalarField) -> ScalarField) -> Self {
        f(self)
    }
}

impl SpectralField for VectorField {
    fn field_grid(&self) -> TorusGrid {
        self.grid()
    }
    fn scalar_parts(&self) -> Vec<&ScalarField> {
        self.comps.iter().collect()
    }
    fn map_parts(&self, mut f: impl FnMut(&ScalarField) -> ScalarField) -> Self {
        Self {
            comps: std::array::from_fn(|d| f(&self.comps[d])),
            divergence_free: false,
        }
    }
    fn map_isotropic(&self, mut f: impl FnMut(&ScalarField) -> ScalarField) -> Self {
        Self {
            comps: std::array::from_fn(|d| f(&self.comps[d])),
            divergence_free: self.divergence_free,
        }
    }
}

impl SpectralField for TensorField {
    fn field_grid(&self) -> TorusGrid {
        self.grid()
    }
    fn scalar_parts(&self) -> Vec<&ScalarField> {
        self.comps.iter().flatten().collect()
    }
    fn map_parts(&self, mut f: impl FnMut(&ScalarField) -> ScalarField) -> Self {
        Self {
            comps: std::array::from_fn(|i| std::array::from_fn(|j| f(&self.comps[i][j]))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cos_and_sin_modes_evaluate_pointwise() {
        let g = TorusGrid::new(3, 8).unwrap();
        let mut f = ScalarField::cos_mode(g, [1, 0, 2], 1.5).unwrap();
        f.add_sin([0, 3, -1], -0.5).unwrap();
        let x = [0.13, 0.71, 0.42];
        let expect = 1.5 * (2.0 * PI * (x[0] + 2.0 * x[2])).cos()
            - 0.5 * (2.0 * PI * (3.0 * x[1] - x[2])).sin();
        assert!((f.eval_at(x) - expect).abs() < 1e-13);
        assert!(f.hermitian_defect() < 1e-15);
    }

    #[test]
    fn values_roundtrip() {
        let g = TorusGrid::new(3, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = ScalarField::random(g, 3, 1.0, &mut rng);
        let v = f.values(10);
        let idx = 123;
        let x = transform::grid_point(idx, 10);
        assert!((v[idx] - f.eval_at(x)).abs() < 1e-12);
        let back = ScalarField::from_values(g, 10, &v);
        assert!((&back - &f).norm_l2() < 1e-13);
    }

    #[test]
    fn out_of_cutoff_mode_rejected() {
        let g = TorusGrid::new(2, 5).unwrap();
        assert!(matches!(
            ScalarField::cos_mode(g, [3, 0, 0], 1.0),
            Err(NsfError::InvalidMode { .. })
        ));
    }

    #[test]
    fn regrid_preserves_shared_modes() {
        let g = TorusGrid::new(2, 5).unwrap();
        let big = TorusGrid::new(4, 9).unwrap();
        let f = ScalarField::cos_mode(g, [1, 2, 0], 1.0).unwrap();
        let up = f.regrid(big);
        assert_eq!(up.coeff([1, 2, 0]), f.coeff([1, 2, 0]));
        assert_eq!(up.regrid(g), f);
    }
}
