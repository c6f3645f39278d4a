//! Energy, entropy, dissipation and positivity functionals.

use crate::constitutive::{ConstitutiveModel, MaterialParams};
use crate::error::{Error, Result};
use crate::geometry::Domain1D;
use crate::solver::{FieldState, StepReport};

/// One row of the time series.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub dt: f64,
    pub energy_total: f64,
    pub entropy_total: f64,
    /// Energy balance defect per unit time.
    pub energy_residual: f64,
    pub entropy_production: f64,
    pub dissipation_total: f64,
    pub mean_w: f64,
    pub theta_min: f64,
    pub theta_floor: f64,
    pub chi_mean: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub h_constant: f64,
    pub newton_iters_p: usize,
    pub newton_iters_theta: usize,
}

impl DiagnosticsRecord {
    pub const HEADER: &'static str = "t,dt,energy_total,entropy_total,energy_residual,\
entropy_production,dissipation_total,mean_w,theta_min,theta_floor,chi_mean,p_min,p_max,\
h_constant,newton_iters_p,newton_iters_theta";
}

fn energy_density(
    model: &ConstitutiveModel,
    p: f64,
    w: f64,
    chi: f64,
    theta: f64,
    g: f64,
) -> f64 {
    let prm = model.params();
    prm.c0 * theta
        + prm.latent_heat * chi
        + prm.mass_weight(chi) * model.retention_cut(p).potential
        + 0.5 * prm.lambda_m * w * w
        + (prm.beta * prm.theta_c + g) * w
}

/// `(energy_total, entropy_total)`.
pub fn energy_entropy_totals(
    state: &FieldState,
    domain: &Domain1D,
    model: &ConstitutiveModel,
) -> Result<(f64, f64)> {
    state.check_len(domain)?;
    let prm = model.params();
    if let Some(i) = state.theta.iter().position(|&t| !(t > 0.0)) {
        return Err(Error::Domain(format!(
            "entropy undefined for temperature {} at node {i}",
            state.theta[i]
        )));
    }
    let g = domain.body_potential(state.t);
    let n = state.len();
    let energy: Vec<f64> = (0..n)
        .map(|i| energy_density(model, state.p[i], state.w[i], state.chi[i], state.theta[i], g[i]))
        .collect();
    let entropy: Vec<f64> = (0..n)
        .map(|i| {
            prm.latent_heat / prm.theta_c * state.chi[i]
                + prm.beta * state.w[i]
                + prm.c0 * ((state.theta[i] / prm.theta_c).ln() + 1.0)
        })
        .collect();
    Ok((
        domain.integrate_unchecked(&energy),
        domain.integrate_unchecked(&entropy),
    ))
}

/// `(energy_residual, entropy_production)` of one accepted step.
///
/// The energy residual is the balance defect divided by `dt`; the entropy
/// production is the change of total entropy plus the entropy outflow.
pub fn step_residuals(
    old: &FieldState,
    new: &FieldState,
    report: &StepReport,
    domain: &Domain1D,
    model: &ConstitutiveModel,
) -> (f64, f64) {
    let prm = model.params();
    let dt = report.dt_used;
    let m = domain.weights();
    let g_new = domain.body_potential(new.t);
    let bc = domain.boundary_eval(new.t);
    let ends = domain.boundary_nodes();
    let mut d_energy = 0.0;
    let mut d_entropy = 0.0;
    for i in 0..new.len() {
        let v_old = prm.mass_weight(old.chi[i]) * model.retention_cut(old.p[i]).potential;
        let v_new = prm.mass_weight(new.chi[i]) * model.retention_cut(new.p[i]).potential;
        let dw = new.w[i] - old.w[i];
        let de = prm.c0 * (new.theta[i] - old.theta[i])
            + prm.latent_heat * (new.chi[i] - old.chi[i])
            + (v_new - v_old)
            + 0.5 * prm.lambda_m * dw * (new.w[i] + old.w[i])
            + (prm.beta * prm.theta_c + g_new[i]) * dw;
        let ds = prm.latent_heat / prm.theta_c * (new.chi[i] - old.chi[i])
            + prm.beta * dw
            + prm.c0 * ((new.theta[i] - old.theta[i]) / old.theta[i]).ln_1p();
        d_energy += m[i] * de;
        d_entropy += m[i] * ds;
    }
    let mut energy_flux = 0.0;
    let mut entropy_flux = 0.0;
    for b in 0..2 {
        let i = ends[b];
        let heat = domain.omega[b] * (new.theta[i] - bc.theta_star[b]);
        energy_flux += heat + domain.alpha[b] * (new.p[i] - bc.p_star[b]) * new.p[i];
        entropy_flux += heat / new.theta[i];
    }
    ((d_energy + dt * energy_flux) / dt, d_entropy + dt * entropy_flux)
}

/// Total dissipation `∫ (ν w_t² + (1/ρ_L) μ Q_R(|∇p|²) + γ χ_t²)` of a step.
pub fn dissipation_total(report: &StepReport, domain: &Domain1D, model: &ConstitutiveModel) -> f64 {
    let prm = model.params();
    let r = &report.rates;
    let nodal: Vec<f64> = (0..r.chi_t.len())
        .map(|i| prm.nu * r.w_t[i] * r.w_t[i] + r.gamma[i] * r.chi_t[i] * r.chi_t[i])
        .collect();
    let elements: f64 = r.element_dissipation.iter().sum::<f64>() * domain.spacing();
    domain.integrate_unchecked(&nodal) + elements
}

/// Comparison function `ψ(t) = θ̄ c₀ / (c₀ + θ̄ C t)`.
pub fn positivity_floor(t: f64, params: &MaterialParams, theta_bar: f64) -> f64 {
    let c = params.positivity_constant();
    theta_bar * params.c0 / (params.c0 + theta_bar * c * t)
}

/// Assembles the diagnostics row of an accepted step.
pub fn record_step(
    old: &FieldState,
    new: &FieldState,
    report: &StepReport,
    domain: &Domain1D,
    model: &ConstitutiveModel,
) -> Result<DiagnosticsRecord> {
    let (energy_total, entropy_total) = energy_entropy_totals(new, domain, model)?;
    let (energy_residual, entropy_production) = step_residuals(old, new, report, domain, model);
    let len = domain.length();
    let fold = |v: &[f64], f: fn(f64, f64) -> f64, init: f64| v.iter().copied().fold(init, f);
    Ok(DiagnosticsRecord {
        t: new.t,
        dt: report.dt_used,
        energy_total,
        entropy_total,
        energy_residual,
        entropy_production,
        dissipation_total: dissipation_total(report, domain, model),
        mean_w: domain.integrate_unchecked(&new.w) / len,
        theta_min: fold(&new.theta, f64::min, f64::INFINITY),
        theta_floor: positivity_floor(new.t, model.params(), domain.theta_bar),
        chi_mean: domain.integrate_unchecked(&new.chi) / len,
        p_min: fold(&new.p, f64::min, f64::INFINITY),
        p_max: fold(&new.p, f64::max, f64::NEG_INFINITY),
        h_constant: report.h_constant,
        newton_iters_p: report.newton_iters_p,
        newton_iters_theta: report.newton_iters_theta,
    })
}

/// Smallest value of `(F - γ χ_t)(χ_new - χ̃)` over nodes and `χ̃ ∈ {0, 1}`,
/// together with the magnitude scale it is compared against.
pub fn complementarity_margin(new: &FieldState, report: &StepReport) -> (f64, f64) {
    let r = &report.rates;
    let mut margin = f64::INFINITY;
    let mut scale = 0.0f64;
    for i in 0..new.len() {
        let defect = r.force[i] - r.gamma[i] * r.chi_t[i];
        scale = scale.max(r.force[i].abs()).max((r.gamma[i] * r.chi_t[i]).abs());
        for target in [0.0, 1.0] {
            margin = margin.min(defect * (new.chi[i] - target));
        }
    }
    (margin, scale.max(1.0))
}

/// Structural checks applied after every accepted step.
pub fn check_step(
    old: &FieldState,
    new: &FieldState,
    report: &StepReport,
    record: &DiagnosticsRecord,
    domain: &Domain1D,
    model: &ConstitutiveModel,
) -> Result<()> {
    let fault = |message: String| Err(Error::Invariant { t: new.t, message });
    if let Some(i) = new.chi.iter().position(|c| !(0.0..=1.0).contains(c)) {
        return fault(format!("chi = {} outside [0, 1] at node {i}", new.chi[i]));
    }
    let w_max = new.w.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let mean_bound = 1e-10 * domain.length() * w_max.max(1.0);
    let w_int = record.mean_w * domain.length();
    if !(w_int.abs() <= mean_bound) {
        return fault(format!("integral of w = {w_int:e} exceeds {mean_bound:e}"));
    }
    if !(record.theta_min >= record.theta_floor * (1.0 - 1e-6)) {
        return fault(format!(
            "theta_min = {} below positivity floor {}",
            record.theta_min, record.theta_floor
        ));
    }
    let ds: f64 = {
        let (_, s_old) = energy_entropy_totals(old, domain, model)?;
        record.entropy_total - s_old
    };
    if !(record.entropy_production >= -1e-8 * (ds.abs() + record.dt)) {
        return fault(format!(
            "negative entropy production {:e}",
            record.entropy_production
        ));
    }
    if !(record.dissipation_total >= 0.0) {
        return fault(format!("negative dissipation {:e}", record.dissipation_total));
    }
    let (margin, scale) = complementarity_margin(new, report);
    if !(margin >= -1e-9 * scale) {
        return fault(format!("phase complementarity violated by {margin:e}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainConfig};

    fn setup() -> (Domain1D, ConstitutiveModel) {
        (
            build_domain(&DomainConfig::default()).unwrap(),
            ConstitutiveModel::new(MaterialParams::default()),
        )
    }

    #[test]
    fn reference_state_totals() {
        let (d, m) = setup();
        let prm = m.params().clone();
        let s = FieldState::uniform(d.n_nodes(), 0.0, 0.0, 0.0, prm.theta_c);
        let (e, s_tot) = energy_entropy_totals(&s, &d, &m).unwrap();
        assert!((e - prm.c0 * prm.theta_c).abs() <= 1e-12 * e);
        assert!((s_tot - prm.c0).abs() <= 1e-12 * prm.c0);

        let s1 = FieldState::uniform(d.n_nodes(), 0.0, 0.0, 1.0, prm.theta_c);
        let (e1, s1_tot) = energy_entropy_totals(&s1, &d, &m).unwrap();
        assert!((e1 - e - prm.latent_heat).abs() <= 1e-12 * e1);
        assert!((s1_tot - s_tot - prm.latent_heat / prm.theta_c).abs() <= 1e-9 * s1_tot);
    }

    #[test]
    fn nonpositive_temperature_is_rejected() {
        let (d, m) = setup();
        let s = FieldState::uniform(d.n_nodes(), 0.0, 0.0, 0.0, 0.0);
        assert!(energy_entropy_totals(&s, &d, &m).is_err());
    }

    #[test]
    fn floor_values() {
        let prm = MaterialParams::default();
        assert_eq!(positivity_floor(0.0, &prm, 260.0), 260.0);
        let unit = MaterialParams {
            c0: 1.0,
            latent_heat: 0.0,
            beta: 2.0,
            nu: 1.0,
            ..MaterialParams::default()
        };
        assert_eq!(unit.positivity_constant(), 1.0);
        assert_eq!(positivity_floor(1.0, &unit, 1.0), 0.5);
        let none = MaterialParams {
            latent_heat: 0.0,
            beta: 0.0,
            ..MaterialParams::default()
        };
        assert_eq!(positivity_floor(1e6, &none, 260.0), 260.0);
    }

    #[test]
    fn header_has_sixteen_columns() {
        assert_eq!(DiagnosticsRecord::HEADER.split(',').count(), 16);
        assert!(!DiagnosticsRecord::HEADER.contains(' '));
    }
}
