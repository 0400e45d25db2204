//! Spatially smooth, temporally white noise: coefficient families, their
//! stationarity constants, Brownian increments and the stochastic forcing
//! terms they generate.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::{SystemState, Variables};
use crate::error::{NsfError, Result};
use crate::spectral::{
    divergence, fine_resolution, gradient, leray_project, pointwise, sym_gradient,
    tensor_divergence, to_physical, norm2, ScalarField, TensorField, TorusGrid, VectorField,
    Wavevector,
};

/// One listed wavevector of a noise family; it contributes the pair
/// `a·cos(2πk·x)`, `a·sin(2πk·x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMode {
    pub k: Wavevector,
    pub amplitude: f64,
}

/// Mode list of one family plus an optional constant coefficient.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseFamilySpec {
    #[serde(default)]
    pub modes: Vec<NoiseMode>,
    #[serde(default)]
    pub constant: Option<f64>,
}

impl NoiseFamilySpec {
    pub fn new(modes: &[(Wavevector, f64)]) -> Self {
        Self {
            modes: modes
                .iter()
                .map(|&(k, amplitude)| NoiseMode { k, amplitude })
                .collect(),
            constant: None,
        }
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant = Some(c);
        self
    }
}

/// `Σ|f_n|²` and `Σ|∇f_n|²` of a family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseConstants {
    pub f1: f64,
    pub f2: f64,
    pub g1: f64,
    pub g2: f64,
}

/// The coefficient families `{f_n}` (matrix noise) and `{g_n}` (vector noise).
#[derive(Debug, Clone)]
pub struct NoiseBasis {
    grid: TorusGrid,
    f_fields: Vec<ScalarField>,
    g_fields: Vec<ScalarField>,
    constants: NoiseConstants,
}

fn family_fields(spec: &NoiseFamilySpec, grid: TorusGrid, name: &str) -> Result<(Vec<ScalarField>, f64, f64)> {
    let mut fields = Vec::with_capacity(2 * spec.modes.len() + 1);
    let mut c1 = 0.0;
    let mut c2 = 0.0;
    for (i, mode) in spec.modes.iter().enumerate() {
        if !grid.contains(mode.k) {
            return Err(NsfError::InvalidMode {
                k: mode.k,
                cutoff: grid.cutoff(),
                context: Some(format!("{name}.modes[{i}]")),
            });
        }
        if mode.k == [0, 0, 0] {
            return Err(NsfError::InvalidParameter(format!(
                "{name}.modes[{i}]: zero wavevector; use the constant coefficient instead"
            )));
        }
        if !(mode.amplitude > 0.0 && mode.amplitude.is_finite()) {
            return Err(NsfError::InvalidParameter(format!(
                "{name}.modes[{i}]: amplitude {} must be positive",
                mode.amplitude
            )));
        }
        fields.push(ScalarField::cos_mode(grid, mode.k, mode.amplitude)?);
        fields.push(ScalarField::sin_mode(grid, mode.k, mode.amplitude)?);
        let a2 = mode.amplitude * mode.amplitude;
        c1 += a2;
        c2 += 4.0 * PI * PI * norm2(mode.k) as f64 * a2;
    }
    if let Some(c) = spec.constant {
        if !c.is_finite() {
            return Err(NsfError::InvalidParameter(format!("{name}.constant is not finite")));
        }
        if c != 0.0 {
            fields.push(ScalarField::constant(grid, c));
            c1 += c * c;
        }
    }
    Ok((fields, c1, c2))
}

/// Build both families from mode lists.
pub fn build_noise_basis(f_spec: &NoiseFamilySpec, g_spec: &NoiseFamilySpec, grid: TorusGrid) -> Result<NoiseBasis> {
    let (f_fields, f1, f2) = family_fields(f_spec, grid, "f")?;
    let (g_fields, g1, g2) = family_fields(g_spec, grid, "g")?;
    Ok(NoiseBasis {
        grid,
        f_fields,
        g_fields,
        constants: NoiseConstants { f1, f2, g1, g2 },
    })
}

impl NoiseBasis {
    /// Basis without noise.
    pub fn empty(grid: TorusGrid) -> Self {
        Self {
            grid,
            f_fields: Vec::new(),
            g_fields: Vec::new(),
            constants: NoiseConstants::default(),
        }
    }

    /// Arbitrary coefficient fields; constants are the spatial means of
    /// `Σ|f_n|²` and `Σ|∇f_n|²`, which need not be stationary.
    pub fn from_fields(grid: TorusGrid, f_fields: Vec<ScalarField>, g_fields: Vec<ScalarField>) -> Result<Self> {
        for f in f_fields.iter().chain(&g_fields) {
            crate::spectral::grid::check_same(&grid, &f.grid())?;
        }
        let means = |fs: &[ScalarField]| {
            let c1: f64 = fs.iter().map(ScalarField::norm_sqr).sum();
            let c2: f64 = fs.iter().map(|f| gradient(f).norm_sqr()).sum();
            (c1, c2)
        };
        let (f1, f2) = means(&f_fields);
        let (g1, g2) = means(&g_fields);
        Ok(Self {
            grid,
            f_fields,
            g_fields,
            constants: NoiseConstants { f1, f2, g1, g2 },
        })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn f_fields(&self) -> &[ScalarField] {
        &self.f_fields
    }

    pub fn g_fields(&self) -> &[ScalarField] {
        &self.g_fields
    }

    pub fn constants(&self) -> NoiseConstants {
        self.constants
    }

    pub fn is_empty(&self) -> bool {
        self.f_fields.is_empty() && self.g_fields.is_empty()
    }

    /// Same families on another grid (cutoff must still contain every mode).
    pub fn regrid(&self, grid: TorusGrid) -> Result<Self> {
        let lift = |fs: &[ScalarField]| -> Result<Vec<ScalarField>> {
            fs.iter()
                .map(|f| {
                    let g = f.regrid(grid);
                    if (g.norm_sqr() - f.norm_sqr()).abs() > 1e-14 * f.norm_sqr() {
                        return Err(NsfError::InvalidGrid("noise modes exceed target cutoff".into()));
                    }
                    Ok(g)
                })
                .collect()
        };
        Ok(Self {
            grid,
            f_fields: lift(&self.f_fields)?,
            g_fields: lift(&self.g_fields)?,
            constants: self.constants,
        })
    }
}

/// Sup-norm residuals of the six stationarity identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationarityReport {
    pub f_value: f64,
    pub f_cross: f64,
    pub f_gradient: f64,
    pub g_value: f64,
    pub g_cross: f64,
    pub g_gradient: f64,
    pub tol: f64,
    pub pass: bool,
}

impl StationarityReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.f_value,
            self.f_cross,
            self.f_gradient,
            self.g_value,
            self.g_cross,
            self.g_gradient,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn family_residuals(fields: &[ScalarField], c1: f64, c2: f64, n: usize) -> (f64, f64, f64) {
    let npts = n * n * n;
    let mut value = vec![0.0; npts];
    let mut cross = vec![[0.0; 3]; npts];
    let mut grad = vec![0.0; npts];
    for f in fields {
        let g = gradient(f);
        let phys = to_physical(&[f, g.component(0), g.component(1), g.component(2)], n);
        for p in 0..npts {
            let v = phys[0][p];
            value[p] += v * v;
            for d in 0..3 {
                let dv = phys[d + 1][p];
                cross[p][d] += v * dv;
                grad[p] += dv * dv;
            }
        }
    }
    let mut r = (0.0f64, 0.0f64, 0.0f64);
    for p in 0..npts {
        r.0 = r.0.max((value[p] - c1).abs());
        r.1 = r.1.max(cross[p].iter().map(|x| x * x).sum::<f64>().sqrt());
        r.2 = r.2.max((grad[p] - c2).abs());
    }
    let scale = |c: f64| if c > 0.0 { c } else { 1.0 };
    (r.0 / scale(c1), r.1 / scale((c1 * c2).sqrt()), r.2 / scale(c2))
}

/// Check `Σ|f_n|² = F₁`, `Σ f_n∇f_n = 0`, `Σ|∇f_n|² = F₂` (and the g analogues)
/// pointwise on a collocation grid. Residuals are sup-norms divided by
/// `F₁`, `√(F₁F₂)` and `F₂` respectively.
pub fn verify_stationarity(basis: &NoiseBasis, tol: f64) -> StationarityReport {
    let n = fine_resolution(basis.grid, 2);
    let c = basis.constants;
    let (f_value, f_cross, f_gradient) = family_residuals(&basis.f_fields, c.f1, c.f2, n);
    let (g_value, g_cross, g_gradient) = family_residuals(&basis.g_fields, c.g1, c.g2, n);
    let mut report = StationarityReport {
        f_value,
        f_cross,
        f_gradient,
        g_value,
        g_cross,
        g_gradient,
        tol,
        pass: false,
    };
    report.pass = report.max_residual() <= tol;
    report
}

/// Brownian increments of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrement {
    pub dt: f64,
    /// Symmetric matrix increment per f-field.
    pub db: Vec<[[f64; 3]; 3]>,
    /// Vector increment per g-field.
    pub dw: Vec<[f64; 3]>,
}

impl NoiseIncrement {
    pub fn zeros(basis: &NoiseBasis, dt: f64) -> Self {
        Self {
            dt,
            db: vec![[[0.0; 3]; 3]; basis.f_fields.len()],
            dw: vec![[0.0; 3]; basis.g_fields.len()],
        }
    }

    /// Accumulate a later increment of the same path.
    pub fn accumulate(&mut self, other: &NoiseIncrement) {
        self.dt += other.dt;
        for (a, b) in self.db.iter_mut().zip(&other.db) {
            for i in 0..3 {
                for j in 0..3 {
                    a[i][j] += b[i][j];
                }
            }
        }
        for (a, b) in self.dw.iter_mut().zip(&other.dw) {
            for i in 0..3 {
                a[i] += b[i];
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for m in &mut out.db {
            for row in m.iter_mut() {
                for x in row.iter_mut() {
                    *x *= s;
                }
            }
        }
        for v in &mut out.dw {
            for x in v.iter_mut() {
                *x *= s;
            }
        }
        out
    }
}

/// Independent random streams for one path, one per coefficient field.
///
/// Stream `(path, slot)` is the ChaCha stream number `path << 32 | slot` of the
/// master seed, so adding modes or paths never perturbs existing streams.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    f_rngs: Vec<ChaCha8Rng>,
    g_rngs: Vec<ChaCha8Rng>,
}

impl NoiseStream {
    pub fn new(basis: &NoiseBasis, master_seed: u64, path: u32) -> Self {
        let make = |slot: usize| {
            let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
            rng.set_stream(((path as u64) << 32) | slot as u64);
            rng
        };
        let nf = basis.f_fields.len();
        Self {
            f_rngs: (0..nf).map(make).collect(),
            g_rngs: (0..basis.g_fields.len()).map(|i| make(nf + i)).collect(),
        }
    }

    /// Draw the next increment over a step of length `dt`.
    pub fn sample(&mut self, dt: f64) -> NoiseIncrement {
        let s = dt.sqrt();
        let db = self
            .f_rngs
            .iter_mut()
            .map(|rng| {
                let a: [[f64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.sample(StandardNormal)));
                std::array::from_fn(|i| std::array::from_fn(|j| (a[i][j] + a[j][i]) * FRAC_1_SQRT_2 * s))
            })
            .collect();
        let dw = self
            .g_rngs
            .iter_mut()
            .map(|rng| std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal) * s))
            .collect();
        NoiseIncrement { dt, db, dw }
    }

    /// Sum of the next `ratio` fine increments of length `dt_fine`.
    pub fn sample_coarse(&mut self, dt_fine: f64, ratio: usize) -> NoiseIncrement {
        let mut acc = self.sample(dt_fine);
        for _ in 1..ratio {
            let next = self.sample(dt_fine);
            acc.accumulate(&next);
        }
        acc
    }
}

/// Empirical covariance of `vec(dB)/√dt` against `δ_ik δ_jl + δ_il δ_jk`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceReport {
    pub samples: usize,
    /// Row-major 9×9 empirical covariance, entry `(3i+j, 3k+l)`.
    pub empirical: Vec<Vec<f64>>,
    /// Largest `|empirical − expected| / standard error` over the 45 distinct entries.
    pub max_z: f64,
    /// Entries deviating by more than three standard errors.
    pub violations: usize,
    pub pass: bool,
}

/// Sample `samples` matrix increments from path 0 of `seed`.
pub fn increment_covariance(samples: usize, seed: u64) -> Result<CovarianceReport> {
    if samples < 2 {
        return Err(NsfError::InvalidParameter("need at least two samples".into()));
    }
    let grid = TorusGrid::new(1, 3)?;
    let basis = NoiseBasis::from_fields(grid, vec![ScalarField::constant(grid, 1.0)], Vec::new())?;
    let mut stream = NoiseStream::new(&basis, seed, 0);
    let mut sum = [[0.0f64; 9]; 9];
    let mut sum_sq = [[0.0f64; 9]; 9];
    for _ in 0..samples {
        let inc = stream.sample(1.0);
        let x: [f64; 9] = std::array::from_fn(|a| inc.db[0][a / 3][a % 3]);
        for a in 0..9 {
            for b in a..9 {
                let p = x[a] * x[b];
                sum[a][b] += p;
                sum_sq[a][b] += p * p;
            }
        }
    }
    let n = samples as f64;
    let mut empirical = vec![vec![0.0; 9]; 9];
    let mut max_z: f64 = 0.0;
    let mut violations = 0;
    for a in 0..9 {
        for b in a..9 {
            let mean = sum[a][b] / n;
            let var = (sum_sq[a][b] / n - mean * mean).max(0.0) * n / (n - 1.0);
            let se = (var / n).sqrt();
            let (i, j, k, l) = (a / 3, a % 3, b / 3, b % 3);
            let expected = f64::from(u8::from(i == k && j == l)) + f64::from(u8::from(i == l && j == k));
            let z = (mean - expected).abs() / se;
            max_z = max_z.max(z);
            if z > 3.0 {
                violations += 1;
            }
            empirical[a][b] = mean;
            empirical[b][a] = mean;
        }
    }
    Ok(CovarianceReport {
        samples,
        empirical,
        max_z,
        violations,
        pass: violations == 0,
    })
}

/// Draw one increment from `stream`.
pub fn sample_increments(basis: &NoiseBasis, dt: f64, stream: &mut NoiseStream) -> Result<NoiseIncrement> {
    if !(dt > 0.0) {
        return Err(NsfError::InvalidParameter(format!("dt = {dt} must be positive")));
    }
    let inc = stream.sample(dt);
    debug_assert_eq!(inc.db.len(), basis.f_fields.len());
    Ok(inc)
}

/// Spatial noise fields of one increment: `Ξ = Σ f_n dB_n`, `Γ = Σ g_n dW_n`.
#[derive(Debug, Clone)]
pub struct NoiseFields {
    pub xi: TensorField,
    pub gamma: VectorField,
    pub div_gamma: ScalarField,
}

const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

pub fn noise_fields(basis: &NoiseBasis, inc: &NoiseIncrement) -> Result<NoiseFields> {
    check_shapes(basis, inc)?;
    let grid = basis.grid;
    let mut xi = TensorField::zeros(grid);
    for (f, db) in basis.f_fields.iter().zip(&inc.db) {
        for &(i, j) in &SYM_PAIRS {
            xi.get_mut(i, j).axpy(db[i][j], f);
        }
    }
    for &(i, j) in &SYM_PAIRS[..] {
        if i != j {
            *xi.get_mut(j, i) = xi.get(i, j).clone();
        }
    }
    let mut gamma = VectorField::zeros(grid);
    for (g, dw) in basis.g_fields.iter().zip(&inc.dw) {
        for d in 0..3 {
            gamma.component_mut(d).axpy(dw[d], g);
        }
    }
    let div_gamma = divergence(&gamma);
    Ok(NoiseFields { xi, gamma, div_gamma })
}

fn check_shapes(basis: &NoiseBasis, inc: &NoiseIncrement) -> Result<()> {
    if inc.db.len() != basis.f_fields.len() || inc.dw.len() != basis.g_fields.len() {
        return Err(NsfError::InvalidOperand(format!(
            "increment shape ({}, {}) does not match basis ({}, {})",
            inc.db.len(),
            inc.dw.len(),
            basis.f_fields.len(),
            basis.g_fields.len()
        )));
    }
    Ok(())
}

fn sym_contract(s: &[f64], x: &[f64]) -> f64 {
    s[0] * x[0] + s[3] * x[3] + s[5] * x[5] + 2.0 * (s[1] * x[1] + s[2] * x[2] + s[4] * x[4])
}

fn symmetric_from_unique(grid: TorusGrid, parts: &[ScalarField]) -> TensorField {
    let mut t = TensorField::zeros(grid);
    for (&(i, j), f) in SYM_PAIRS.iter().zip(parts) {
        *t.get_mut(i, j) = f.clone();
        if i != j {
            *t.get_mut(j, i) = f.clone();
        }
    }
    t
}

/// Stochastic forcing of one increment for the state's variable set.
///
/// Square-root variables:
/// `du = −(1/√2) Π∇·(ψΞ)`, `dψ = −∇·(ψΓ) + ½ψ∇·Γ − (1/√2)∇u:Ξ`.
/// Temperature variables:
/// `du = −Π∇·(√ϑ Ξ)`, `dϑ = −∇·(ϑΓ) − √ϑ ∇u:Ξ`.
pub fn noise_diffusion_fields(
    basis: &NoiseBasis,
    state: &SystemState,
    inc: &NoiseIncrement,
    fine_factor: usize,
) -> Result<(VectorField, ScalarField)> {
    let grid = state.scalar.grid();
    if basis.is_empty() {
        return Ok((VectorField::zeros(grid), ScalarField::zeros(grid)));
    }
    let nf = noise_fields(basis, inc)?;
    let s = sym_gradient(&state.u);
    let mut inputs: Vec<&ScalarField> = vec![&state.scalar];
    inputs.extend(SYM_PAIRS.iter().map(|&(i, j)| nf.xi.get(i, j)));
    inputs.extend(nf.gamma.components().iter());
    inputs.push(&nf.div_gamma);
    inputs.extend(SYM_PAIRS.iter().map(|&(i, j)| s.get(i, j)));

    let outs = match state.vars {
        Variables::Psi => pointwise(grid, &inputs, grid.dealias_resolution(), 10, |_, x, y| {
            let psi = x[0];
            for a in 0..6 {
                y[a] = psi * x[1 + a];
            }
            for d in 0..3 {
                y[6 + d] = psi * x[7 + d];
            }
            y[9] = 0.5 * psi * x[10] - FRAC_1_SQRT_2 * sym_contract(&x[11..17], &x[1..7]);
        })?,
        Variables::Theta => {
            let n = fine_resolution(grid, fine_factor);
            let mut bad: Option<(f64, usize)> = None;
            let outs = pointwise(grid, &inputs, n, 10, |p, x, y| {
                let theta = x[0];
                if theta < 0.0 && bad.is_none_or(|(m, _)| theta < m) {
                    bad = Some((theta, p));
                }
                let root = theta.max(0.0).sqrt();
                for a in 0..6 {
                    y[a] = root * x[1 + a];
                }
                for d in 0..3 {
                    y[6 + d] = theta * x[7 + d];
                }
                y[9] = -root * sym_contract(&x[11..17], &x[1..7]);
            })?;
            if let Some((min, p)) = bad {
                return Err(NsfError::PositivityViolation {
                    min,
                    location: crate::spectral::transform::grid_point(p, n),
                });
            }
            outs
        }
    };
    let scale_u = match state.vars {
        Variables::Psi => -FRAC_1_SQRT_2,
        Variables::Theta => -1.0,
    };
    let flux = symmetric_from_unique(grid, &outs[0..6]);
    let mut du = leray_project(&tensor_divergence(&flux));
    du *= scale_u;
    let transport = VectorField::from_components([outs[6].clone(), outs[7].clone(), outs[8].clone()])?;
    let mut ds = outs[9].clone();
    ds -= &divergence(&transport);
    Ok((du, ds))
}
