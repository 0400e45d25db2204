//! Scalar functionals of states and trajectories, and the bounds they obey.

use serde::{Deserialize, Serialize};

use crate::dynamics::{exact_gradient_term, psi_theta_convert, regularized_gradient_term, SystemState, Variables};
use crate::error::{NsfError, Result};
use crate::integrators::Trajectory;
use crate::noise::{NoiseBasis, NoiseConstants};
use crate::spectral::{
    fine_resolution, gradient, laplacian, sup_norm, sym_gradient, to_physical, transform::grid_point,
    vector_gradient, ScalarField,
};

/// Per-save-point diagnostics of one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub energy: f64,
    /// ∫ log ϑ, absent when ϑ ≤ 0 somewhere on the fine grid.
    pub entropy_phys: Option<f64>,
    /// −∫ √(2ϑ).
    pub entropy_math: f64,
    pub dissipation_budget: f64,
    pub admissibility_margin: f64,
    pub relative_energy: Option<f64>,
    pub grad_u_norm: f64,
    pub grad_psi_norm: f64,
}

impl DiagnosticRecord {
    pub const CSV_HEADER: &'static str = "t,energy,entropy_phys,entropy_math,dissipation_budget,\
admissibility_margin,relative_energy,grad_u_norm,grad_psi_norm";

    /// One CSV row in [`Self::CSV_HEADER`] order; absent values are empty cells.
    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
        format!(
            "{:e},{:e},{},{:e},{:e},{:e},{},{:e},{:e}",
            self.t,
            self.energy,
            opt(self.entropy_phys),
            self.entropy_math,
            self.dissipation_budget,
            self.admissibility_margin,
            opt(self.relative_energy),
            self.grad_u_norm,
            self.grad_psi_norm
        )
    }
}

/// `½(‖u‖² + ‖ψ‖²)`; in temperature variables `½‖u‖² + ∫ϑ`.
pub fn total_energy(state: &SystemState) -> f64 {
    let ku = 0.5 * state.u.norm_sqr();
    match state.vars {
        Variables::Psi => ku + 0.5 * state.scalar.norm_sqr(),
        Variables::Theta => ku + state.scalar.mean(),
    }
}

/// Physical and mathematical entropy, evaluated on the fine grid.
pub fn entropies(state: &SystemState, fine_factor: usize) -> (Option<f64>, f64) {
    let grid = state.grid();
    let n = fine_resolution(grid, fine_factor);
    let vals = state.scalar.values(n);
    let theta = |s: f64| match state.vars {
        Variables::Psi => 0.5 * s * s,
        Variables::Theta => s,
    };
    let len = vals.len() as f64;
    let mut log_sum = 0.0;
    let mut positive = true;
    let mut root_sum = 0.0;
    for &s in &vals {
        let th = theta(s);
        if th > 0.0 {
            log_sum += th.ln();
        } else {
            positive = false;
        }
        root_sum += match state.vars {
            Variables::Psi => s.abs(),
            Variables::Theta => (2.0 * s.max(0.0)).sqrt(),
        };
    }
    (positive.then_some(log_sum / len), -root_sum / len)
}

/// Which reciprocal weights the dissipation integrand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BudgetKind {
    /// `(1/ψ)(|∇ψ|² + |∇_sym u|²)`.
    Exact,
    /// `h_δ(ψ)(|∇ψ|² + |∇_sym u|² + ε)`.
    Regularized { delta: f64, epsilon: f64 },
}

/// Spatial integral of the dissipation integrand.
pub fn dissipation_budget(state: &SystemState, kind: BudgetKind, fine_factor: usize) -> Result<f64> {
    let psi_state;
    let state = match state.vars {
        Variables::Psi => state,
        Variables::Theta => {
            psi_state = psi_theta_convert(state, fine_factor)?;
            &psi_state
        }
    };
    let g = match kind {
        BudgetKind::Exact => exact_gradient_term(&state.u, &state.scalar, fine_factor)?,
        BudgetKind::Regularized { delta, epsilon } => {
            regularized_gradient_term(&state.u, &state.scalar, delta, epsilon, fine_factor)?
        }
    };
    Ok(g.mean())
}

/// `‖Δu‖² + ‖Δs‖²`.
pub fn biharmonic_dissipation(state: &SystemState) -> f64 {
    laplacian(&state.u).norm_sqr() + laplacian(&state.scalar).norm_sqr()
}

/// `‖∇u‖` and `‖∇s‖`.
pub fn gradient_norms(state: &SystemState) -> (f64, f64) {
    (vector_gradient(&state.u).norm_l2(), gradient(&state.scalar).norm_l2())
}

/// Slack of the pathwise energy estimate at one time:
/// `𝓔(0) + εt − 𝓔(t) − ε∫₀ᵗ(‖Δu‖² + ‖Δψ‖²)`.
pub fn energy_slack(e0: f64, epsilon: f64, t: f64, energy: f64, work: f64) -> f64 {
    e0 + epsilon * t - energy - work
}

/// Worst slack of the energy estimate along the path; negative values are
/// violations, zero is attained at `t = 0`.
pub fn admissibility_margin(traj: &Trajectory) -> Result<f64> {
    traj.records
        .iter()
        .map(|r| r.admissibility_margin)
        .reduce(f64::min)
        .ok_or(NsfError::EmptyTrajectory)
}

/// `½(‖u − V‖² + ‖ψ − Φ‖²)`.
pub fn relative_energy(state: &SystemState, reference: &SystemState) -> Result<f64> {
    let d = state.distance(reference)?;
    Ok(0.5 * d * d)
}

/// `t ↦ exp(C(t)·t)·E₀` with `C(t) = max_{s ≤ t} (2‖∇_sym V(s)‖_∞ + ‖∇Φ(s)‖_∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GronwallEnvelope {
    times: Vec<f64>,
    /// Running maximum of the rate at each saved time.
    rates: Vec<f64>,
    e0: f64,
}

impl GronwallEnvelope {
    /// From instantaneous rates `2‖∇_sym V‖_∞ + ‖∇Φ‖_∞` at increasing times.
    pub fn from_rates(times: Vec<f64>, rates: &[f64], e0: f64) -> Result<Self> {
        if times.is_empty() {
            return Err(NsfError::EmptyTrajectory);
        }
        if times.len() != rates.len() {
            return Err(NsfError::InvalidOperand(format!(
                "{} times but {} rates",
                times.len(),
                rates.len()
            )));
        }
        let mut running = f64::NEG_INFINITY;
        let rates = rates
            .iter()
            .map(|&r| {
                running = running.max(r);
                running
            })
            .collect();
        Ok(Self { times, rates, e0 })
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    /// `C(t)`; times past the last saved one use the full maximum.
    pub fn rate(&self, t: f64) -> f64 {
        let tol = 1e-12 * t.abs().max(1.0);
        let idx = self.times.partition_point(|&s| s <= t + tol);
        self.rates[idx.saturating_sub(1)]
    }

    pub fn bound(&self, t: f64) -> f64 {
        if self.e0 == 0.0 {
            return 0.0;
        }
        (self.rate(t) * t).exp() * self.e0
    }
}

/// `2‖∇_sym V‖_∞ + ‖∇Φ‖_∞` on the fine grid.
pub fn gronwall_rate(reference: &SystemState, fine_factor: usize) -> Result<f64> {
    if reference.vars != Variables::Psi {
        return Err(NsfError::InvalidOperand("reference must carry square-root variables".into()));
    }
    let n = fine_resolution(reference.grid(), fine_factor);
    let s = sym_gradient(&reference.u);
    let s_parts: Vec<&ScalarField> = s.components().iter().flatten().collect();
    let g = gradient(&reference.scalar);
    let g_parts: Vec<&ScalarField> = g.components().iter().collect();
    Ok(2.0 * sup_norm(&s_parts, n) + sup_norm(&g_parts, n))
}

/// Envelope built from saved reference states.
pub fn gronwall_envelope(reference: &[SystemState], e0: f64, fine_factor: usize) -> Result<GronwallEnvelope> {
    if reference.is_empty() {
        return Err(NsfError::EmptyTrajectory);
    }
    let rates = reference
        .iter()
        .map(|s| gronwall_rate(s, fine_factor))
        .collect::<Result<Vec<_>>>()?;
    GronwallEnvelope::from_rates(reference.iter().map(|s| s.t).collect(), &rates, e0)
}

/// `(1 + (4F₂ + G₂)T/8)·(𝓔₀ + 2εT)^½`, the bound on the expected time-integrated
/// regularized dissipation; `initial_energy` is `½∫|u₀|² + ψ₀²`.
pub fn l1_budget_bound(initial_energy: f64, constants: NoiseConstants, t_final: f64, epsilon: f64) -> f64 {
    (1.0 + (4.0 * constants.f2 + constants.g2) * t_final / 8.0) * (initial_energy + 2.0 * epsilon * t_final).sqrt()
}

/// Coefficients of the drift of `−∫ log ϑ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyCoefficients {
    /// Multiplies `∫(1/ϑ)|∇_sym u|²`: `3F₁/2 − 1`.
    pub velocity: f64,
    /// Multiplies `∫(1/ϑ)|∇ϑ|²`: `−(F₁/4 + 1)`.
    pub gradient: f64,
    /// `−(F₂ + G₂/2)`.
    pub constant: f64,
}

impl EntropyCoefficients {
    pub fn new(c: NoiseConstants) -> Self {
        Self {
            velocity: 1.5 * c.f1 - 1.0,
            gradient: -(c.f1 / 4.0 + 1.0),
            constant: -(c.f2 + c.g2 / 2.0),
        }
    }

    /// Velocity coefficient non-positive, so the entropy estimate closes.
    pub fn closes(&self) -> bool {
        self.velocity <= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyDecomposition {
    pub coefficients: EntropyCoefficients,
    pub constants: NoiseConstants,
    /// `∫(1/ϑ)|∇_sym u|²`.
    pub velocity_integral: f64,
    /// `∫(1/ϑ)|∇ϑ|²`.
    pub gradient_integral: f64,
    pub total: f64,
}

/// Evaluate the entropy drift terms at `state`.
pub fn entropy_drift_decomposition(
    state: &SystemState,
    basis: &NoiseBasis,
    fine_factor: usize,
) -> Result<EntropyDecomposition> {
    let theta_state;
    let state = match state.vars {
        Variables::Theta => state,
        Variables::Psi => {
            theta_state = psi_theta_convert(state, fine_factor)?;
            &theta_state
        }
    };
    let grid = state.grid();
    let n = fine_resolution(grid, fine_factor);
    let s = sym_gradient(&state.u);
    let g = gradient(&state.scalar);
    let mut inputs: Vec<&ScalarField> = vec![&state.scalar];
    inputs.extend(g.components().iter());
    inputs.extend(s.components().iter().flatten());
    let phys = to_physical(&inputs, n);
    let (mut vi, mut gi) = (0.0, 0.0);
    let mut worst: Option<(f64, usize)> = None;
    for p in 0..phys[0].len() {
        let th = phys[0][p];
        if th <= 0.0 {
            if worst.is_none_or(|(m, _)| th < m) {
                worst = Some((th, p));
            }
            continue;
        }
        let g2: f64 = (1..4).map(|i| phys[i][p] * phys[i][p]).sum();
        let s2: f64 = (4..13).map(|i| phys[i][p] * phys[i][p]).sum();
        vi += s2 / th;
        gi += g2 / th;
    }
    if let Some((min, p)) = worst {
        return Err(NsfError::PositivityViolation {
            min,
            location: grid_point(p, n),
        });
    }
    let len = phys[0].len() as f64;
    let (vi, gi) = (vi / len, gi / len);
    let constants = basis.constants();
    let coefficients = EntropyCoefficients::new(constants);
    Ok(EntropyDecomposition {
        coefficients,
        constants,
        velocity_integral: vi,
        gradient_integral: gi,
        total: coefficients.velocity * vi + coefficients.gradient * gi + coefficients.constant,
    })
}

/// Deterministic terms of the relative energy expansion of `(u, ψ)` about
/// the reference `(V, Φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeEnergyRhs {
    /// `2∫∇_sym V:∇_sym u + ∇ψ·∇Φ`.
    pub dissipation_cross: f64,
    /// `−∫(ψ/Φ)(|∇Φ|² + |∇_sym V|²)`.
    pub weighted_dissipation: f64,
    /// `−∫Φ (1/ψ)(|∇ψ|² + |∇_sym u|²)`.
    pub defect: f64,
    /// `∫u·((V·∇)V) − ∇V:u⊗u`.
    pub convective: f64,
    /// `∫ψV·∇Φ − ∇Φ·(ψu)`.
    pub thermal: f64,
    pub total: f64,
}

/// Assemble the expansion terms by quadrature on the fine grid.
pub fn relative_energy_rhs(state: &SystemState, reference: &SystemState, fine_factor: usize) -> Result<RelativeEnergyRhs> {
    if state.vars != Variables::Psi || reference.vars != Variables::Psi {
        return Err(NsfError::InvalidOperand("relative energy terms need square-root variables".into()));
    }
    crate::spectral::grid::check_same(&state.grid(), &reference.grid())?;
    let n = fine_resolution(state.grid(), fine_factor);
    let gu = vector_gradient(&state.u);
    let gv = vector_gradient(&reference.u);
    let gpsi = gradient(&state.scalar);
    let gphi = gradient(&reference.scalar);
    let mut inputs: Vec<&ScalarField> = Vec::with_capacity(32);
    inputs.extend(state.u.components().iter()); // 0..3
    inputs.extend(reference.u.components().iter()); // 3..6
    inputs.push(&state.scalar); // 6
    inputs.push(&reference.scalar); // 7
    inputs.extend(gu.components().iter().flatten()); // 8..17
    inputs.extend(gv.components().iter().flatten()); // 17..26
    inputs.extend(gpsi.components().iter()); // 26..29
    inputs.extend(gphi.components().iter()); // 29..32
    let phys = to_physical(&inputs, n);
    let mut acc = [0.0; 5];
    for p in 0..phys[0].len() {
        let x = |i: usize| phys[i][p];
        let u = [x(0), x(1), x(2)];
        let v = [x(3), x(4), x(5)];
        let (psi, phi) = (x(6), x(7));
        if phi <= 0.0 {
            return Err(NsfError::PositivityViolation {
                min: phi,
                location: grid_point(p, n),
            });
        }
        if psi <= 0.0 {
            return Err(NsfError::PositivityViolation {
                min: psi,
                location: grid_point(p, n),
            });
        }
        let du = |i: usize, j: usize| x(8 + 3 * i + j);
        let dv = |i: usize, j: usize| x(17 + 3 * i + j);
        let gp = [x(26), x(27), x(28)];
        let gf = [x(29), x(30), x(31)];
        let (mut su_sv, mut su2, mut sv2) = (0.0, 0.0, 0.0);
        let (mut vdv, mut uu_dv) = (0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                let su = 0.5 * (du(i, j) + du(j, i));
                let sv = 0.5 * (dv(i, j) + dv(j, i));
                su_sv += su * sv;
                su2 += su * su;
                sv2 += sv * sv;
                vdv += u[i] * v[j] * dv(i, j);
                uu_dv += dv(i, j) * u[i] * u[j];
            }
        }
        let gp_gf: f64 = (0..3).map(|i| gp[i] * gf[i]).sum();
        let gp2: f64 = gp.iter().map(|a| a * a).sum();
        let gf2: f64 = gf.iter().map(|a| a * a).sum();
        let v_gf: f64 = (0..3).map(|i| v[i] * gf[i]).sum();
        let u_gf: f64 = (0..3).map(|i| u[i] * gf[i]).sum();
        acc[0] += 2.0 * (su_sv + gp_gf);
        acc[1] -= psi / phi * (gf2 + sv2);
        acc[2] -= phi / psi * (gp2 + su2);
        acc[3] += vdv - uu_dv;
        acc[4] += psi * v_gf - psi * u_gf;
    }
    let len = phys[0].len() as f64;
    let [a, b, c, d, e] = acc.map(|s| s / len);
    Ok(RelativeEnergyRhs {
        dissipation_cross: a,
        weighted_dissipation: b,
        defect: c,
        convective: d,
        thermal: e,
        total: a + b + c + d + e,
    })
}
