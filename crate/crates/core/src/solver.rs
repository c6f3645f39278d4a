//! Operator-splitting time stepper.
//!
//! One step runs four sub-steps in order: the phase fraction `χ` by
//! projection, the volume change `w` by implicit Euler with the mean-fixing
//! constant `H`, the pressure by Newton on the Kirchhoff variable
//! `v = M(p)`, and the temperature by a linear implicit solve with lagged
//! conductivity.

use crate::constitutive::ConstitutiveModel;
use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result, SubStep};
use crate::geometry::Domain1D;
use crate::tridiag::Tridiagonal;

/// Time plus nodal values of the four unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub p: Vec<f64>,
    pub w: Vec<f64>,
    pub chi: Vec<f64>,
    pub theta: Vec<f64>,
}

impl FieldState {
    pub fn uniform(n: usize, p: f64, w: f64, chi: f64, theta: f64) -> Self {
        Self {
            t: 0.0,
            p: vec![p; n],
            w: vec![w; n],
            chi: vec![chi; n],
            theta: vec![theta; n],
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn check_len(&self, domain: &Domain1D) -> Result<()> {
        let n = domain.n_nodes();
        for len in [self.p.len(), self.w.len(), self.chi.len(), self.theta.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        Ok(())
    }

    /// Largest nodewise difference over all four fields.
    pub fn max_abs_diff(&self, other: &FieldState) -> f64 {
        let pairs = [
            (&self.p, &other.p),
            (&self.w, &other.w),
            (&self.chi, &other.chi),
            (&self.theta, &other.theta),
        ];
        pairs
            .iter()
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Reason the accepted step is shorter than requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DtLimit {
    #[default]
    None,
    PositivityGuard,
    NewtonFailure,
}

impl std::fmt::Display for DtLimit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DtLimit::None => "none",
            DtLimit::PositivityGuard => "positivity-guard",
            DtLimit::NewtonFailure => "newton-failure",
        })
    }
}

/// Discrete rates realized by one step, consumed by the heat sources and the
/// diagnostics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepRates {
    pub chi_t: Vec<f64>,
    pub w_t: Vec<f64>,
    /// Phase driving force used by the projection.
    pub force: Vec<f64>,
    /// Relaxation coefficient used by the projection.
    pub gamma: Vec<f64>,
    /// Per-element `(1/ρ_L) μ_e Q_R(|∇p|²)` at the new pressure.
    pub element_dissipation: Vec<f64>,
}

impl StepRates {
    /// Assembles the element dissipation from the new pressure.
    pub fn with_pressure(
        mut self,
        p_new: &[f64],
        domain: &Domain1D,
        model: &ConstitutiveModel,
    ) -> Self {
        self.element_dissipation = element_dissipation(p_new, domain, model);
        self
    }

    /// Lumped nodal density of the element dissipation.
    pub fn nodal_dissipation(&self, domain: &Domain1D) -> Vec<f64> {
        let n = domain.n_nodes();
        let h = domain.spacing();
        let m = domain.weights();
        let mut acc = vec![0.0; n];
        for (e, d) in self.element_dissipation.iter().enumerate() {
            acc[e] += 0.5 * h * d;
            acc[e + 1] += 0.5 * h * d;
        }
        acc.iter().zip(m).map(|(a, m)| a / m).collect()
    }
}

fn element_dissipation(p: &[f64], domain: &Domain1D, model: &ConstitutiveModel) -> Vec<f64> {
    let h = domain.spacing();
    let inv_rho = 1.0 / model.params().rho_l;
    p.windows(2)
        .map(|e| {
            let dp = e[1] - e[0];
            let mu = element_mobility(model, e[0], e[1]);
            let grad2 = (dp / h) * (dp / h);
            inv_rho * mu * model.q_r(grad2)
        })
        .collect()
}

/// Chord slope `ΔM / Δp` over one element.
fn element_mobility(model: &ConstitutiveModel, a: f64, b: f64) -> f64 {
    let (mu_a, m_a) = model.mobility_eval(a);
    if a == b {
        return mu_a;
    }
    let (_, m_b) = model.mobility_eval(b);
    (m_b - m_a) / (b - a)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepReport {
    pub t: f64,
    pub dt_used: f64,
    pub newton_iters_p: usize,
    pub newton_iters_theta: usize,
    pub h_constant: f64,
    pub residual_p: f64,
    pub residual_theta: f64,
    pub dt_limited_by: DtLimit,
    pub rates: StepRates,
}

/// Numerical controls of the sub-steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub tol_p: f64,
    pub tol_theta: f64,
    pub max_newton: usize,
    pub dt_min: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_p: 1e-10,
            tol_theta: 1e-12,
            max_newton: 50,
            dt_min: 1e-12,
        }
    }
}

/// `H(t) = -(1/|Ω|) ∫ (p s(χ) + β(θ - θ_c) - G(·, t))`.
pub fn compute_h(state: &FieldState, domain: &Domain1D, model: &ConstitutiveModel, t: f64) -> f64 {
    let g = domain.body_potential(t);
    h_from_parts(&state.p, &state.chi, &state.theta, &g, domain, model)
}

fn h_from_parts(
    p: &[f64],
    chi: &[f64],
    theta: &[f64],
    g: &[f64],
    domain: &Domain1D,
    model: &ConstitutiveModel,
) -> f64 {
    let prm = model.params();
    let integrand: Vec<f64> = (0..p.len())
        .map(|i| {
            p[i] * prm.mass_weight(chi[i]) + prm.beta * (model.q_r(theta[i].max(0.0)) - prm.theta_c)
                - g[i]
        })
        .collect();
    -domain.integrate_unchecked(&integrand) / domain.length()
}

/// Result of the phase projection.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiUpdate {
    pub chi: Vec<f64>,
    pub rate: Vec<f64>,
    pub force: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// `χ_new = clamp(χ + dt F / γ, 0, 1)` with lagged force and coefficient.
pub fn chi_step(state: &FieldState, model: &ConstitutiveModel, dt: f64) -> ChiUpdate {
    let n = state.len();
    let mut out = ChiUpdate {
        chi: Vec::with_capacity(n),
        rate: Vec::with_capacity(n),
        force: Vec::with_capacity(n),
        gamma: Vec::with_capacity(n),
    };
    for i in 0..n {
        let (p, w, theta, chi) = (state.p[i], state.w[i], state.theta[i], state.chi[i]);
        let f = model.phase_force(p, w, theta);
        let g = model.gamma_cut(p, theta);
        let new = (chi + dt * f / g).clamp(0.0, 1.0);
        out.chi.push(new);
        out.rate.push((new - chi) / dt);
        out.force.push(f);
        out.gamma.push(g);
    }
    out
}

/// Implicit Euler for `ν w_t + λ_M w = p s(χ_new) + β(θ - θ_c) - G + H`.
/// Returns the new `w` and the constant `H`.
pub fn w_step(
    state: &FieldState,
    chi_new: &[f64],
    domain: &Domain1D,
    model: &ConstitutiveModel,
    dt: f64,
    t_new: f64,
) -> (Vec<f64>, f64) {
    let prm = model.params();
    let g = domain.body_potential(t_new);
    let h = h_from_parts(&state.p, chi_new, &state.theta, &g, domain, model);
    let denom = prm.nu + prm.lambda_m * dt;
    let w = (0..state.len())
        .map(|i| {
            let rhs = state.p[i] * prm.mass_weight(chi_new[i])
                + prm.beta * (model.q_r(state.theta[i].max(0.0)) - prm.theta_c)
                - g[i]
                + h;
            (prm.nu * state.w[i] + dt * rhs) / denom
        })
        .collect();
    (w, h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureUpdate {
    pub p: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

struct PressureSystem<'a> {
    domain: &'a Domain1D,
    model: &'a ConstitutiveModel,
    dt: f64,
    s_new: Vec<f64>,
    w_new: &'a [f64],
    stored_old: Vec<f64>,
    p_star: [f64; 2],
}

impl PressureSystem<'_> {
    fn pressures(&self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|&v| self.model.m_inverse(v)).collect()
    }

    /// Residual scaled by `dt / m_i`, so it is measured in saturation units.
    fn residual(&self, v: &[f64], p: &[f64]) -> Vec<f64> {
        let n = v.len();
        let h = self.domain.spacing();
        let m = self.domain.weights();
        let k = 1.0 / (self.model.params().rho_l * h);
        let ends = self.domain.boundary_nodes();
        (0..n)
            .map(|i| {
                let mut flux = 0.0;
                if i > 0 {
                    flux += k * (v[i] - v[i - 1]);
                }
                if i + 1 < n {
                    flux += k * (v[i] - v[i + 1]);
                }
                for b in 0..2 {
                    if i == ends[b] {
                        flux += self.domain.alpha[b] * (p[i] - self.p_star[b]);
                    }
                }
                let phi = self.model.retention_cut(p[i]).phi;
                self.s_new[i] * (phi + self.w_new[i]) - self.stored_old[i]
                    + self.dt / m[i] * flux
            })
            .collect()
    }

    fn jacobian(&self, p: &[f64]) -> Tridiagonal {
        let n = p.len();
        let h = self.domain.spacing();
        let m = self.domain.weights();
        let k = 1.0 / (self.model.params().rho_l * h);
        let ends = self.domain.boundary_nodes();
        let mut jac = Tridiagonal::zeros(n);
        for i in 0..n {
            let scale = self.dt / m[i];
            let mu = self.model.mobility_eval(p[i]).0;
            let dphi = self.model.retention_cut(p[i]).dphi;
            let mut diag = self.s_new[i] * dphi / mu;
            if i > 0 {
                diag += scale * k;
                jac.lower[i] = -scale * k;
            }
            if i + 1 < n {
                diag += scale * k;
                jac.upper[i] = -scale * k;
            }
            for b in 0..2 {
                if i == ends[b] {
                    diag += scale * self.domain.alpha[b] / mu;
                }
            }
            jac.diag[i] = diag;
        }
        jac
    }
}

fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Backward Euler for the fluid mass balance, Newton in `v = M(p)`.
#[allow(clippy::too_many_arguments)]
pub fn pressure_step(
    state: &FieldState,
    chi_new: &[f64],
    w_new: &[f64],
    domain: &Domain1D,
    model: &ConstitutiveModel,
    dt: f64,
    t_new: f64,
    settings: &SolverSettings,
) -> Result<PressureUpdate> {
    let prm = model.params();
    let fail = |reason: String| Error::StepFailure {
        substep: SubStep::Pressure,
        reason,
    };
    let stored_old = (0..state.len())
        .map(|i| {
            prm.mass_weight(state.chi[i]) * (model.retention_cut(state.p[i]).phi + state.w[i])
        })
        .collect();
    let bc = domain.boundary_eval(t_new);
    let sys = PressureSystem {
        domain,
        model,
        dt,
        s_new: chi_new.iter().map(|&c| prm.mass_weight(c)).collect(),
        w_new,
        stored_old,
        p_star: bc.p_star,
    };
    let mut v: Vec<f64> = state.p.iter().map(|&p| model.mobility_eval(p).1).collect();
    let mut p = sys.pressures(&v);
    let mut r = sys.residual(&v, &p);
    let mut norm = sup_norm(&r);
    let mut iterations = 0;
    loop {
        if !norm.is_finite() {
            return Err(fail("non-finite residual".into()));
        }
        if norm <= settings.tol_p * (1.0 + sup_norm(&p)) {
            // One polishing correction, kept only if it helps.
            if norm > 0.0 {
                if let Ok(delta) = sys.jacobian(&p).solve(&r) {
                    let trial: Vec<f64> = v.iter().zip(&delta).map(|(v, d)| v - d).collect();
                    let p_trial = sys.pressures(&trial);
                    let n_trial = sup_norm(&sys.residual(&trial, &p_trial));
                    if n_trial < norm {
                        iterations += 1;
                        p = p_trial;
                        norm = n_trial;
                    }
                }
            }
            return Ok(PressureUpdate {
                p,
                iterations,
                residual: norm,
            });
        }
        if iterations >= settings.max_newton {
            return Err(fail(format!(
                "Newton did not converge in {} iterations (residual {norm:e})",
                settings.max_newton
            )));
        }
        iterations += 1;
        let delta = sys
            .jacobian(&p)
            .solve(&r)
            .map_err(|e| fail(e.to_string()))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = v.iter().zip(&delta).map(|(v, d)| v - lambda * d).collect();
            let p_trial = sys.pressures(&trial);
            let r_trial = sys.residual(&trial, &p_trial);
            let n_trial = sup_norm(&r_trial);
            if n_trial < norm {
                v = trial;
                p = p_trial;
                r = r_trial;
                norm = n_trial;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(fail(format!("damping could not reduce residual {norm:e}")));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureUpdate {
    pub theta: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Chord slope `(K_R(b) - K_R(a)) / (b - a)` by three-point Gauss quadrature
/// of `κ_R`.
fn edge_conductivity(model: &ConstitutiveModel, a: f64, b: f64) -> f64 {
    const X: f64 = 0.774_596_669_241_483_4;
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (5.0 * model.kappa_cut(mid - X * half)
        + 8.0 * model.kappa_cut(mid)
        + 5.0 * model.kappa_cut(mid + X * half))
        / 18.0
}

/// Backward Euler for the heat balance. Conductivity is lagged, the latent
/// and expansion sinks are implicit in the new temperature.
pub fn temperature_step(
    state: &FieldState,
    rates: &StepRates,
    domain: &Domain1D,
    model: &ConstitutiveModel,
    dt: f64,
    t_new: f64,
    settings: &SolverSettings,
) -> Result<TemperatureUpdate> {
    let prm = model.params();
    let n = domain.n_nodes();
    let h = domain.spacing();
    let m = domain.weights();
    let ends = domain.boundary_nodes();
    let bc = domain.boundary_eval(t_new);
    let theta = &state.theta;
    let diss = rates.nodal_dissipation(domain);
    let mut mat = Tridiagonal::zeros(n);
    // Residual at the old temperature; the system is solved for the increment.
    let mut rhs = vec![0.0; n];
    let cap = prm.c0 / dt;
    for i in 0..n {
        let sink = prm.latent_heat / prm.theta_c * rates.chi_t[i] + prm.beta * rates.w_t[i];
        if sink < -0.5 * cap {
            return Err(Error::StepFailure {
                substep: SubStep::Temperature,
                reason: format!("positivity guard at node {i}: sink coefficient {sink:e}"),
            });
        }
        let src = prm.nu * rates.w_t[i] * rates.w_t[i]
            + rates.gamma[i] * rates.chi_t[i] * rates.chi_t[i]
            + diss[i];
        mat.diag[i] = m[i] * (cap + sink);
        rhs[i] = m[i] * (src - sink * theta[i]);
    }
    for e in 0..n - 1 {
        let k = edge_conductivity(model, theta[e], theta[e + 1]) / h;
        mat.diag[e] += k;
        mat.diag[e + 1] += k;
        mat.upper[e] = -k;
        mat.lower[e + 1] = -k;
        let flux = k * (theta[e + 1] - theta[e]);
        rhs[e] += flux;
        rhs[e + 1] -= flux;
    }
    for b in 0..2 {
        mat.diag[ends[b]] += domain.omega[b];
        rhs[ends[b]] += domain.omega[b] * (bc.theta_star[b] - theta[ends[b]]);
    }
    let delta = mat.solve(&rhs).map_err(|e| Error::StepFailure {
        substep: SubStep::Temperature,
        reason: e.to_string(),
    })?;
    let applied = mat.mul_vec(&delta);
    let mut scale = 0.0f64;
    let mut residual = 0.0f64;
    for i in 0..n {
        let mut mag = mat.diag[i].abs() * delta[i].abs() + rhs[i].abs();
        if i > 0 {
            mag += mat.lower[i].abs() * delta[i - 1].abs();
        }
        if i + 1 < n {
            mag += mat.upper[i].abs() * delta[i + 1].abs();
        }
        scale = scale.max(mag);
        residual = residual.max((applied[i] - rhs[i]).abs());
    }
    let residual = if scale > 0.0 { residual / scale } else { 0.0 };
    if !(residual <= settings.tol_theta) {
        return Err(Error::StepFailure {
            substep: SubStep::Temperature,
            reason: format!("linear solve residual {residual:e} above tolerance"),
        });
    }
    let new: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + d).collect();
    if let Some(i) = new.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Invariant {
            t: t_new,
            message: format!("temperature {} at node {i} is not positive", new[i]),
        });
    }
    Ok(TemperatureUpdate {
        theta: new,
        iterations: 1,
        residual,
    })
}

/// One attempt at a fixed `dt`.
pub fn try_step(
    state: &FieldState,
    domain: &Domain1D,
    model: &ConstitutiveModel,
    dt: f64,
    t_new: f64,
    settings: &SolverSettings,
) -> Result<(FieldState, StepReport)> {
    let chi = chi_step(state, model, dt);
    let (w, h) = w_step(state, &chi.chi, domain, model, dt, t_new);
    let pres = pressure_step(state, &chi.chi, &w, domain, model, dt, t_new, settings)?;
    let w_t = w.iter().zip(&state.w).map(|(a, b)| (a - b) / dt).collect();
    let rates = StepRates {
        chi_t: chi.rate,
        w_t,
        force: chi.force,
        gamma: chi.gamma,
        element_dissipation: Vec::new(),
    }
    .with_pressure(&pres.p, domain, model);
    let temp = temperature_step(state, &rates, domain, model, dt, t_new, settings)?;
    let new = FieldState {
        t: t_new,
        p: pres.p,
        w,
        chi: chi.chi,
        theta: temp.theta,
    };
    let report = StepReport {
        t: t_new,
        dt_used: dt,
        newton_iters_p: pres.iterations,
        newton_iters_theta: temp.iterations,
        h_constant: h,
        residual_p: pres.residual,
        residual_theta: temp.residual,
        dt_limited_by: DtLimit::None,
        rates,
    };
    Ok((new, report))
}

/// Advances by `dt_target`, halving on sub-step failure down to `dt_min`.
pub fn advance(
    state: &FieldState,
    domain: &Domain1D,
    model: &ConstitutiveModel,
    dt_target: f64,
    settings: &SolverSettings,
) -> Result<(FieldState, StepReport)> {
    advance_to(state, domain, model, dt_target, state.t + dt_target, settings)
}

/// As [`advance`], with the full-length step landing exactly on `t_landing`.
pub(crate) fn advance_to(
    state: &FieldState,
    domain: &Domain1D,
    model: &ConstitutiveModel,
    dt_target: f64,
    t_landing: f64,
    settings: &SolverSettings,
) -> Result<(FieldState, StepReport)> {
    let mut dt = dt_target;
    let mut limit = DtLimit::None;
    loop {
        let t_new = if dt == dt_target {
            t_landing
        } else {
            state.t + dt
        };
        match try_step(state, domain, model, dt, t_new, settings) {
            Ok((new, mut report)) => {
                report.dt_limited_by = limit;
                return Ok((new, report));
            }
            Err(Error::StepFailure { substep, reason }) => {
                if limit == DtLimit::None || substep == SubStep::Temperature {
                    limit = if substep == SubStep::Temperature && reason.contains("guard") {
                        DtLimit::PositivityGuard
                    } else {
                        DtLimit::NewtonFailure
                    };
                }
                dt *= 0.5;
                if dt < settings.dt_min {
                    return Err(Error::Abort {
                        substep,
                        t: state.t,
                        reason,
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Time-loop controls.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub t_end: f64,
    pub dt: f64,
    pub dt_max: f64,
    pub snapshot_interval: f64,
    pub solver: SolverSettings,
    /// Turn violated structural properties into faults.
    pub enforce_invariants: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            dt: 1e-3,
            dt_max: 1e-2,
            snapshot_interval: 0.1,
            solver: SolverSettings::default(),
            enforce_invariants: true,
        }
    }
}

impl RunSettings {
    /// Time of snapshot `k`; snapshot 0 is the initial state.
    pub fn snapshot_time(&self, k: usize) -> f64 {
        let s = self.snapshot_interval;
        if k == 0 {
            return 0.0;
        }
        if !(s > 0.0) {
            return self.t_end;
        }
        let t = k as f64 * s;
        if t >= self.t_end - 1e-9 * s {
            self.t_end
        } else {
            t
        }
    }

    /// All snapshot times of a complete run, starting at 0.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        let mut k = 1;
        loop {
            let t = self.snapshot_time(k);
            out.push(t);
            if t >= self.t_end {
                return out;
            }
            k += 1;
        }
    }
}

/// Output of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<FieldState>,
    pub records: Vec<DiagnosticsRecord>,
    pub reports: Vec<StepReport>,
    pub final_state: FieldState,
}

/// Per-step view handed to observers.
pub struct StepView<'a> {
    pub old: &'a FieldState,
    pub new: &'a FieldState,
    pub report: &'a StepReport,
    pub record: &'a DiagnosticsRecord,
}

/// A running simulation; owns its state exclusively.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub model: ConstitutiveModel,
    pub domain: Domain1D,
    pub settings: RunSettings,
    pub state: FieldState,
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<FieldState>,
    pub reports: Vec<StepReport>,
    pub next_snapshot: usize,
    /// Keep per-step reports (memory heavy for long runs).
    pub keep_reports: bool,
}

impl Simulation {
    /// Starts a simulation without validating the initial data.
    pub fn new(
        model: ConstitutiveModel,
        domain: Domain1D,
        settings: RunSettings,
        initial: FieldState,
    ) -> Result<Self> {
        initial.check_len(&domain)?;
        Ok(Self {
            model,
            domain,
            settings,
            snapshots: vec![initial.clone()],
            state: initial,
            records: Vec::new(),
            reports: Vec::new(),
            next_snapshot: 1,
            keep_reports: false,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.state.t >= self.settings.t_end
    }

    fn snapshot_time(&self, k: usize) -> f64 {
        self.settings.snapshot_time(k)
    }

    /// Takes one accepted step. Returns `false` when already at `t_end`.
    pub fn step(&mut self) -> Result<bool> {
        self.step_with(&mut |_| Ok(()))
    }

    pub fn step_with(
        &mut self,
        observer: &mut dyn FnMut(&StepView<'_>) -> Result<()>,
    ) -> Result<bool> {
        if self.is_finished() {
            return Ok(false);
        }
        let t = self.state.t;
        let dt_nominal = self.settings.dt.min(self.settings.dt_max);
        let target = self.snapshot_time(self.next_snapshot);
        let remaining = target - t;
        let (dt_target, landing) = if remaining <= dt_nominal * (1.0 + 1e-6) {
            (remaining, target)
        } else {
            (dt_nominal, t + dt_nominal)
        };
        let (new, report) = advance_to(
            &self.state,
            &self.domain,
            &self.model,
            dt_target,
            landing,
            &self.settings.solver,
        )?;
        let record =
            diagnostics::record_step(&self.state, &new, &report, &self.domain, &self.model)?;
        if self.settings.enforce_invariants {
            diagnostics::check_step(&self.state, &new, &report, &record, &self.domain, &self.model)?;
        }
        observer(&StepView {
            old: &self.state,
            new: &new,
            report: &report,
            record: &record,
        })?;
        if new.t == target {
            self.snapshots.push(new.clone());
            self.next_snapshot += 1;
        }
        self.records.push(record);
        if self.keep_reports {
            self.reports.push(report);
        }
        self.state = new;
        Ok(true)
    }

    pub fn run(self) -> Result<Trajectory> {
        self.run_with(|_| Ok(()))
    }

    pub fn run_with(
        mut self,
        mut observer: impl FnMut(&StepView<'_>) -> Result<()>,
    ) -> Result<Trajectory> {
        while self.step_with(&mut observer)? {}
        Ok(self.into_trajectory())
    }

    pub fn into_trajectory(self) -> Trajectory {
        Trajectory {
            snapshots: self.snapshots,
            records: self.records,
            reports: self.reports,
            final_state: self.state,
        }
    }
}
