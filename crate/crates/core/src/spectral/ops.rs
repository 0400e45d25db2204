use std::f64::consts::PI;

use num_complex::Complex64;

use super::field::{ScalarField, SpectralField, TensorField, VectorField};
use super::grid::{check_same, max_norm, norm2, TorusGrid};
use super::transform;
use crate::error::{NsfError, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Zero every mode with max-norm above `cutoff`; the grid is unchanged.
pub fn fourier_project<F: SpectralField>(field: &F, cutoff: i64) -> Result<F> {
    let m = field.field_grid().cutoff();
    if cutoff < 0 || cutoff as usize > m {
        return Err(NsfError::InvalidCutoff { requested: cutoff, max: m });
    }
    Ok(field.map_isotropic(|f| {
        f.map_modes(|k, c| if max_norm(k) > cutoff { Complex64::new(0.0, 0.0) } else { c })
    }))
}

/// Helmholtz projection: `v̂(k) ↦ (I − kkᵀ/|k|²) v̂(k)`, zero mode kept.
pub fn leray_project(v: &VectorField) -> VectorField {
    let grid = v.grid();
    let mut out = v.clone();
    let [a, b, c] = v.components();
    let (a, b, c) = (a.coeffs(), b.coeffs(), c.coeffs());
    let mut comps: [Vec<Complex64>; 3] = [a.to_vec(), b.to_vec(), c.to_vec()];
    for (i, k) in grid.modes().enumerate() {
        let k2 = norm2(k);
        if k2 == 0 {
            continue;
        }
        let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
        let dot = a[i] * kf[0] + b[i] * kf[1] + c[i] * kf[2];
        let s = dot / k2 as f64;
        for d in 0..3 {
            comps[d][i] -= s * kf[d];
        }
    }
    for (d, data) in comps.into_iter().enumerate() {
        out.component_mut(d).coeffs_mut().copy_from_slice(&data);
    }
    out.set_divergence_free_unchecked(true);
    out
}

/// Projection onto divergence-free fields with max-norm ≤ `cutoff`.
pub fn stokes_project(v: &VectorField, cutoff: i64) -> Result<VectorField> {
    Ok(leray_project(&fourier_project(v, cutoff)?))
}

/// Eigenvalue of the Stokes operator −ΠΔ on mode `k`.
pub fn stokes_eigenvalue(k: [i64; 3]) -> f64 {
    TorusGrid::stokes_eigenvalue(k)
}

/// −ΠΔ.
pub fn stokes_operator(v: &VectorField) -> VectorField {
    let mut out = leray_project(&laplacian(v));
    out *= -1.0;
    out
}

/// `∂/∂x_axis`.
pub fn partial(f: &ScalarField, axis: usize) -> ScalarField {
    f.map_modes(|k, c| c * Complex64::new(0.0, TWO_PI * k[axis] as f64))
}

pub fn gradient(f: &ScalarField) -> VectorField {
    VectorField::from_components([partial(f, 0), partial(f, 1), partial(f, 2)])
        .expect("components share a grid")
}

pub fn divergence(v: &VectorField) -> ScalarField {
    let grid = v.grid();
    let [a, b, c] = v.components();
    let coeffs = grid
        .modes()
        .enumerate()
        .map(|(i, k)| {
            Complex64::new(0.0, TWO_PI)
                * (a.coeffs()[i] * k[0] as f64 + b.coeffs()[i] * k[1] as f64 + c.coeffs()[i] * k[2] as f64)
        })
        .collect();
    ScalarField::from_coefficients(grid, coeffs).expect("length matches grid")
}

pub fn laplacian<F: SpectralField>(f: &F) -> F {
    f.map_isotropic(|s| s.map_modes(|k, c| c * (-4.0 * PI * PI * norm2(k) as f64)))
}

/// Δ².
pub fn biharmonic<F: SpectralField>(f: &F) -> F {
    f.map_isotropic(|s| {
        s.map_modes(|k, c| {
            let l = 4.0 * PI * PI * norm2(k) as f64;
            c * (l * l)
        })
    })
}

/// Velocity gradient with entry `(i, j) = ∂_j v_i`.
pub fn vector_gradient(v: &VectorField) -> TensorField {
    let comps = std::array::from_fn(|i| std::array::from_fn(|j| partial(v.component(i), j)));
    TensorField::from_components(comps).expect("components share a grid")
}

/// ½(∇v + ∇vᵀ).
pub fn sym_gradient(v: &VectorField) -> TensorField {
    vector_gradient(v).symmetric_part()
}

/// Row-wise divergence: `(∇·T)_i = Σ_j ∂_j T_ij`.
pub fn tensor_divergence(t: &TensorField) -> VectorField {
    let comps = std::array::from_fn(|i| {
        let mut s = partial(t.get(i, 0), 0);
        s += &partial(t.get(i, 1), 1);
        s += &partial(t.get(i, 2), 2);
        s
    });
    VectorField::from_components(comps).expect("components share a grid")
}

/// A field of any supported rank.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyField {
    Scalar(ScalarField),
    Vector(VectorField),
    Tensor(TensorField),
}

impl AnyField {
    fn rank_name(&self) -> &'static str {
        match self {
            AnyField::Scalar(_) => "scalar",
            AnyField::Vector(_) => "vector",
            AnyField::Tensor(_) => "tensor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffKind {
    Gradient,
    Divergence,
    Laplacian,
    Biharmonic,
    SymGradient,
}

/// Spectral differentiation dispatched on field rank.
pub fn differentiate(field: &AnyField, kind: DiffKind) -> Result<AnyField> {
    use AnyField::*;
    Ok(match (kind, field) {
        (DiffKind::Gradient, Scalar(f)) => Vector(gradient(f)),
        (DiffKind::Gradient, Vector(v)) => Tensor(vector_gradient(v)),
        (DiffKind::Divergence, Vector(v)) => Scalar(divergence(v)),
        (DiffKind::Divergence, Tensor(t)) => Vector(tensor_divergence(t)),
        (DiffKind::SymGradient, Vector(v)) => Tensor(sym_gradient(v)),
        (DiffKind::Laplacian, Scalar(f)) => Scalar(laplacian(f)),
        (DiffKind::Laplacian, Vector(f)) => Vector(laplacian(f)),
        (DiffKind::Laplacian, Tensor(f)) => Tensor(laplacian(f)),
        (DiffKind::Biharmonic, Scalar(f)) => Scalar(biharmonic(f)),
        (DiffKind::Biharmonic, Vector(f)) => Vector(biharmonic(f)),
        (DiffKind::Biharmonic, Tensor(f)) => Tensor(biharmonic(f)),
        (kind, f) => {
            return Err(NsfError::InvalidOperand(format!(
                "{kind:?} is not defined for a {} field",
                f.rank_name()
            )))
        }
    })
}

/// L² pairing `Σ_k â(k) conj b̂(k)` summed over components (unit volume).
pub fn inner_product<F: SpectralField>(a: &F, b: &F) -> Result<f64> {
    check_same(&a.field_grid(), &b.field_grid())?;
    Ok(a.scalar_parts()
        .iter()
        .zip(b.scalar_parts())
        .map(|(x, y)| {
            x.coeffs()
                .iter()
                .zip(y.coeffs())
                .map(|(p, q)| p.re * q.re + p.im * q.im)
                .sum::<f64>()
        })
        .sum())
}

/// Pointwise product truncated back to the grid's cutoff.
///
/// With `dealias`, the product is formed on a grid of at least
/// `ceil(3(2m+1)/2)` points per axis, which makes the retained modes exact.
pub fn multiply(a: &ScalarField, b: &ScalarField, dealias: bool) -> Result<ScalarField> {
    let grid = a.grid();
    check_same(&grid, &b.grid())?;
    let n = if dealias {
        grid.dealias_resolution()
    } else {
        grid.resolution()
    };
    let mut out = pointwise(grid, &[a, b], n, 1, |_, x, y| y[0] = x[0] * x[1])?;
    Ok(out.pop().expect("one output"))
}

/// Product coefficients by direct convolution over all mode pairs, truncated
/// to the common cutoff. Cost grows like `(2m+1)^6`; meant as a reference.
pub fn convolve_truncated(a: &ScalarField, b: &ScalarField) -> Result<ScalarField> {
    let grid = a.grid();
    check_same(&grid, &b.grid())?;
    let m = grid.cutoff() as i64;
    let mut out = ScalarField::zeros(grid);
    let (ca, cb) = (a.coeffs(), b.coeffs());
    for (i, &x) in ca.iter().enumerate() {
        if x == num_complex::Complex64::new(0.0, 0.0) {
            continue;
        }
        let k1 = grid.wavevector(i);
        for (j, &y) in cb.iter().enumerate() {
            let k2 = grid.wavevector(j);
            let k = [k1[0] + k2[0], k1[1] + k2[1], k1[2] + k2[2]];
            if k.iter().all(|c| c.abs() <= m) {
                out.coeffs_mut()[grid.index(k)] += x * y;
            }
        }
    }
    Ok(out)
}

/// Collocation resolution for non-polynomial terms.
pub fn fine_resolution(grid: TorusGrid, fine_factor: usize) -> usize {
    (fine_factor.max(1) * grid.resolution()).max(grid.dealias_resolution())
}

/// Apply `func` pointwise on the grid refined by `fine_factor`, then truncate.
pub fn evaluate_nonlinear(
    field: &ScalarField,
    func: impl Fn(f64) -> f64,
    fine_factor: usize,
) -> Result<ScalarField> {
    if fine_factor < 1 {
        return Err(NsfError::InvalidParameter("fine_factor must be >= 1".into()));
    }
    let n = fine_factor * field.grid().resolution();
    let mut out = pointwise(field.grid(), &[field], n, 1, |_, x, y| y[0] = func(x[0]))?;
    Ok(out.pop().expect("one output"))
}

/// Physical values of several fields on an `n^3` grid.
pub fn to_physical(fields: &[&ScalarField], n: usize) -> Vec<Vec<f64>> {
    let m = fields.iter().map(|f| f.grid().cutoff()).max().unwrap_or(1);
    let regridded: Vec<ScalarField>;
    let coeffs: Vec<&[num_complex::Complex64]> = if fields.iter().all(|f| f.grid().cutoff() == m) {
        fields.iter().map(|f| f.coeffs()).collect()
    } else {
        let g = fields
            .iter()
            .find(|f| f.grid().cutoff() == m)
            .expect("nonempty")
            .grid();
        regridded = fields.iter().map(|f| f.regrid(g)).collect();
        regridded.iter().map(|f| f.coeffs()).collect()
    };
    transform::to_physical_many(&coeffs, m, n)
}

/// Truncated coefficients on `grid` of several physical fields sampled on an `n^3` grid.
pub fn from_physical(grid: TorusGrid, n: usize, values: &[&[f64]]) -> Vec<ScalarField> {
    transform::from_physical_many(values, grid.cutoff(), n)
        .into_iter()
        .map(|c| {
            let mut f = ScalarField::from_coefficients(grid, c).expect("length matches grid");
            f.symmetrize();
            f
        })
        .collect()
}

/// Evaluate `inputs` on an `n^3` grid, apply `f` point by point and return
/// `outputs` fields truncated to `grid`.
///
/// `f` receives the point index (see [`transform::grid_point`]), the input
/// values there, and writes the output values.
/// A non-finite output aborts with the offending location.
pub fn pointwise(
    grid: TorusGrid,
    inputs: &[&ScalarField],
    n: usize,
    outputs: usize,
    mut f: impl FnMut(usize, &[f64], &mut [f64]),
) -> Result<Vec<ScalarField>> {
    if n < 2 * grid.cutoff() + 1 {
        return Err(NsfError::InvalidGrid(format!(
            "collocation resolution {n} too small for cutoff {}",
            grid.cutoff()
        )));
    }
    let phys = to_physical(inputs, n);
    let npts = n * n * n;
    let mut outs = vec![vec![0.0; npts]; outputs];
    let mut xin = vec![0.0; inputs.len()];
    let mut xout = vec![0.0; outputs];
    for p in 0..npts {
        for (slot, v) in xin.iter_mut().zip(&phys) {
            *slot = v[p];
        }
        f(p, &xin, &mut xout);
        for (o, &y) in outs.iter_mut().zip(&xout) {
            if !y.is_finite() {
                return Err(NsfError::NonfiniteEvaluation {
                    location: transform::grid_point(p, n),
                    value: y,
                });
            }
            o[p] = y;
        }
    }
    let refs: Vec<&[f64]> = outs.iter().map(Vec::as_slice).collect();
    Ok(from_physical(grid, n, &refs))
}

/// Minimum collocation value on an `n^3` grid and its location.
pub fn min_on_grid(f: &ScalarField, n: usize) -> (f64, [f64; 3]) {
    let v = f.values(n);
    let (idx, min) = v
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, x)| if x < acc.1 { (i, x) } else { acc });
    (min, transform::grid_point(idx, n))
}

/// Max over collocation points of the Euclidean norm of the stacked fields.
pub fn sup_norm(fields: &[&ScalarField], n: usize) -> f64 {
    if fields.is_empty() {
        return 0.0;
    }
    let phys = to_physical(fields, n);
    (0..n * n * n)
        .map(|p| phys.iter().map(|v| v[p] * v[p]).sum::<f64>())
        .fold(0.0, f64::max)
        .sqrt()
}

/// Integral of pointwise values sampled on a uniform grid.
pub fn grid_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> TorusGrid {
        TorusGrid::new(4, 16).unwrap()
    }

    #[test]
    fn laplacian_of_cosine() {
        let g = grid();
        let f = ScalarField::cos_mode(g, [1, 0, 0], 1.0).unwrap();
        let lap = laplacian(&f);
        let expect = f.scaled(-4.0 * PI * PI);
        assert!((&lap - &expect).norm_l2() < 1e-12);
    }

    #[test]
    fn sym_gradient_of_shear() {
        let g = grid();
        let u = VectorField::from_components([
            ScalarField::sin_mode(g, [0, 1, 0], 1.0).unwrap(),
            ScalarField::zeros(g),
            ScalarField::zeros(g),
        ])
        .unwrap();
        let s = sym_gradient(&u);
        let expect = ScalarField::cos_mode(g, [0, 1, 0], PI).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let target = if (i, j) == (0, 1) || (i, j) == (1, 0) {
                    expect.clone()
                } else {
                    ScalarField::zeros(g)
                };
                assert!((s.get(i, j) - &target).norm_l2() < 1e-13, "entry {i}{j}");
            }
        }
    }

    #[test]
    fn dealiased_product_matches_convolution() {
        let g = TorusGrid::new(2, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = ScalarField::random(g, 2, 1.0, &mut rng);
        let b = ScalarField::random(g, 2, 1.0, &mut rng);
        let fast = multiply(&a, &b, true).unwrap();
        let slow = convolve_truncated(&a, &b).unwrap();
        assert!((&fast - &slow).norm_l2() <= 1e-13 * slow.norm_l2());
    }

    #[test]
    fn rank_mismatch_is_rejected() {
        let g = grid();
        let f = AnyField::Scalar(ScalarField::zeros(g));
        assert!(matches!(
            differentiate(&f, DiffKind::Divergence),
            Err(NsfError::InvalidOperand(_))
        ));
        assert!(differentiate(&f, DiffKind::SymGradient).is_err());
    }

    #[test]
    fn leray_kills_parallel_mode() {
        let g = grid();
        let v = VectorField::from_components([
            ScalarField::cos_mode(g, [1, 0, 0], 1.0).unwrap(),
            ScalarField::zeros(g),
            ScalarField::zeros(g),
        ])
        .unwrap();
        assert!(leray_project(&v).norm_l2() < 1e-15);
        let w = VectorField::from_components([
            ScalarField::sin_mode(g, [0, 1, 0], 1.0).unwrap(),
            ScalarField::zeros(g),
            ScalarField::zeros(g),
        ])
        .unwrap();
        assert_eq!(leray_project(&w).components(), w.components());
    }

    #[test]
    fn stokes_eigenpair() {
        let g = grid();
        let v = VectorField::from_components([
            ScalarField::zeros(g),
            ScalarField::cos_mode(g, [1, 0, 0], 1.0).unwrap(),
            ScalarField::zeros(g),
        ])
        .unwrap();
        let sv = stokes_operator(&v);
        assert!((&sv - &v.scaled(4.0 * PI * PI)).norm_l2() < 1e-12);
        assert!((stokes_eigenvalue([1, 0, 0]) - 4.0 * PI * PI).abs() < 1e-15);
    }

    #[test]
    fn inner_products_of_modes() {
        let g = grid();
        let one = ScalarField::constant(g, 1.0);
        let c = ScalarField::cos_mode(g, [1, 0, 0], 1.0).unwrap();
        let s = ScalarField::sin_mode(g, [1, 0, 0], 1.0).unwrap();
        assert!((inner_product(&one, &one).unwrap() - 1.0).abs() < 1e-15);
        assert!((inner_product(&c, &c).unwrap() - 0.5).abs() < 1e-15);
        assert!(inner_product(&c, &s).unwrap().abs() < 1e-15);
    }

    #[test]
    fn squared_cosine_product() {
        let g = grid();
        let c = ScalarField::cos_mode(g, [1, 0, 0], 1.0).unwrap();
        let p = multiply(&c, &c, true).unwrap();
        let mut expect = ScalarField::constant(g, 0.5);
        expect.add_cos([2, 0, 0], 0.5).unwrap();
        assert!((&p - &expect).norm_l2() < 1e-14);
    }

    #[test]
    fn nonlinear_evaluation() {
        let g = grid();
        let two = ScalarField::constant(g, 2.0);
        let inv = evaluate_nonlinear(&two, |r| 1.0 / r, 2).unwrap();
        assert!((&inv - &ScalarField::constant(g, 0.5)).norm_l2() < 1e-14);
        let zero = ScalarField::zeros(g);
        assert!(matches!(
            evaluate_nonlinear(&zero, |r| 1.0 / r, 2),
            Err(NsfError::NonfiniteEvaluation { .. })
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = ScalarField::random(g, 4, 1.0, &mut rng);
        let same = evaluate_nonlinear(&f, |r| r, 2).unwrap();
        assert!((&same - &f).norm_l2() < 1e-12 * f.norm_l2());
    }

    #[test]
    fn cutoff_validation() {
        let g = grid();
        let f = ScalarField::cos_mode(g, [3, 0, 0], 1.0).unwrap();
        assert!(fourier_project(&f, 2).unwrap().norm_l2() == 0.0);
        assert!(matches!(
            fourier_project(&f, -1),
            Err(NsfError::InvalidCutoff { .. })
        ));
        assert!(fourier_project(&f, 5).is_err());
    }
}
