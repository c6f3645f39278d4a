//! Material laws of the freezing porous medium.
//!
//! The retention curve, mobility, heat conductivity and phase relaxation
//! coefficient are evaluated here together with their Kirchhoff primitives
//! (`M`, `K`) and the cut-off operators used to keep the nonlinearities
//! bounded.
//!
//! Default laws:
//!
//! * retention `φ(p) = φ♭ + (1 - c_s - φ♭) Σ_δ(p)` where `Σ_δ` is the
//!   normalized cumulative integral of `(1 + τ²)^{-(1+δ)/2}`,
//! * constant mobility `μ(p) = μ₀`,
//! * power-law conductivity `κ(θ) = κ_c (1 + θ^{1+a})`,
//! * linear phase relaxation `γ(θ) = γ_c (1 + θ)`.

use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{Error, Result};

/// Physical and constitutive constants.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialParams {
    /// Liquid water density (kg/m³).
    pub rho_l: f64,
    /// Ice density (kg/m³).
    pub rho_s: f64,
    /// Volume fraction of the solid matrix.
    pub c_s: f64,
    /// Volumetric heat capacity (J/(m³·K)).
    pub c0: f64,
    /// Latent heat (J/m³).
    pub latent_heat: f64,
    /// Reference (melting) temperature (K).
    pub theta_c: f64,
    /// Relative solid-liquid thermal expansion coefficient.
    pub beta: f64,
    /// Bulk viscosity of the matrix.
    pub nu: f64,
    /// Bulk elasticity modulus of the matrix.
    pub lambda_m: f64,
    /// Residual saturation `φ♭ = φ(-∞)`.
    pub phi_flat: f64,
    /// Lower retention tail exponent.
    pub delta: f64,
    /// Upper retention tail exponent, `δ̂ ≤ δ`.
    pub delta_hat: f64,
    pub mu0: f64,
    pub kappa_c: f64,
    /// Conductivity growth exponent.
    pub a_exp: f64,
    pub gamma_c: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            rho_l: 1000.0,
            rho_s: 917.0,
            c_s: 0.5,
            c0: 4.2e6,
            latent_heat: 3.34e8,
            theta_c: 273.15,
            beta: 1.0e3,
            nu: 1.0e9,
            lambda_m: 1.0e9,
            phi_flat: 0.1,
            delta: 0.2,
            delta_hat: 0.2,
            mu0: 1.0e-6,
            kappa_c: 0.5,
            a_exp: 0.5,
            gamma_c: 1.0e6,
        }
    }
}

impl MaterialParams {
    /// Density ratio `ρ* = ρ_S / ρ_L`.
    pub fn rho_star(&self) -> f64 {
        self.rho_s / self.rho_l
    }

    /// Pore-fluid mass weight `s(χ) = χ + ρ*(1 - χ)`.
    pub fn mass_weight(&self, chi: f64) -> f64 {
        chi + self.rho_star() * (1.0 - chi)
    }

    /// Constant of the temperature comparison function:
    /// `C = L² / (4 θ_c² c_γ) + β² / (4 ν)`.
    pub fn positivity_constant(&self) -> f64 {
        let l = self.latent_heat;
        let latent = if l == 0.0 {
            0.0
        } else {
            l * l / (4.0 * self.theta_c * self.theta_c * self.gamma_lower())
        };
        let thermal = if self.beta == 0.0 {
            0.0
        } else {
            self.beta * self.beta / (4.0 * self.nu)
        };
        latent + thermal
    }

    /// `c_γ` in `c_γ (1 + θ) ≤ γ(θ)`.
    pub fn gamma_lower(&self) -> f64 {
        self.gamma_c
    }

    /// `C_γ` in `γ(θ) ≤ C_γ (1 + θ)`.
    pub fn gamma_upper(&self) -> f64 {
        2.0 * self.gamma_c
    }
}

/// `(Q_R(z), P_R(z))`: projection onto `[-R, R]` and its remainder.
pub fn cutoff(z: f64, radius: f64) -> (f64, f64) {
    let q = z.clamp(-radius, radius);
    (q, z - q)
}

/// Values of the retention law at one pressure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Retention {
    pub phi: f64,
    pub dphi: f64,
    /// `Φ(p) = ∫_0^p φ`.
    pub big_phi: f64,
    /// `V(p) = p φ(p) - Φ(p)`.
    pub potential: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatEval {
    pub kappa: f64,
    pub kirchhoff: f64,
    pub gamma: f64,
}

/// Immutable evaluator for all material laws.
#[derive(Debug, Clone)]
pub struct ConstitutiveModel {
    params: MaterialParams,
    cutoff_r: f64,
    gamma_pressure_factor: bool,
    /// `N_δ = ∫ (1 + τ²)^{-(1+δ)/2} dτ = B(1/2, δ/2)`.
    norm: f64,
}

impl ConstitutiveModel {
    pub fn new(params: MaterialParams) -> Self {
        Self::with_cutoff(params, f64::INFINITY)
    }

    pub fn with_cutoff(params: MaterialParams, cutoff_r: f64) -> Self {
        let norm = ln_beta(0.5, 0.5 * params.delta).exp();
        Self {
            params,
            cutoff_r,
            gamma_pressure_factor: false,
            norm,
        }
    }

    /// Enables the `(1 + (p² - R²)⁺)` factor in the cut-off relaxation
    /// coefficient.
    pub fn with_gamma_pressure_factor(mut self, enabled: bool) -> Self {
        self.gamma_pressure_factor = enabled;
        self
    }

    pub fn params(&self) -> &MaterialParams {
        &self.params
    }

    pub fn cutoff_radius(&self) -> f64 {
        self.cutoff_r
    }

    pub fn q_r(&self, z: f64) -> f64 {
        cutoff(z, self.cutoff_r).0
    }

    fn amplitude(&self) -> f64 {
        1.0 - self.params.c_s - self.params.phi_flat
    }

    /// Normalized cumulative tail integral `Σ_δ(p) ∈ (0, 1)`.
    pub fn sigma(&self, p: f64) -> f64 {
        if p == 0.0 {
            return 0.5;
        }
        let half_delta = 0.5 * self.params.delta;
        let p2 = p * p;
        if p2 < 1.0 {
            // I_x(1/2, δ/2) with x = p²/(1+p²) is the two-sided mass on [-|p|, |p|].
            let inner = beta_reg(0.5, half_delta, p2 / (1.0 + p2));
            0.5 + 0.5 * inner.copysign(p)
        } else {
            // Tail mass beyond |p|, computed directly to keep relative accuracy.
            let tail = 0.5 * beta_reg(half_delta, 0.5, 1.0 / (1.0 + p2));
            if p > 0.0 {
                1.0 - tail
            } else {
                tail
            }
        }
    }

    /// `(1/N_δ) ((1+p²)^{(1-δ)/2} - 1) / (1 - δ)`; equals `V(p)` up to the
    /// retention amplitude.
    fn tail_potential(&self, p: f64) -> f64 {
        let delta = self.params.delta;
        let e = 0.5 * (1.0 - delta) * (p * p).ln_1p();
        e.exp_m1() / ((1.0 - delta) * self.norm)
    }

    pub fn retention_eval(&self, p: f64) -> Retention {
        let amp = self.amplitude();
        let phi = self.params.phi_flat + amp * self.sigma(p);
        let dphi = amp * (-0.5 * (1.0 + self.params.delta) * (p * p).ln_1p()).exp() / self.norm;
        let potential = amp * self.tail_potential(p);
        Retention {
            phi,
            dphi,
            big_phi: p * phi - potential,
            potential,
        }
    }

    /// Retention law with the cut-off remainder `φ_R = φ + P_R(p)` and its
    /// primitives `Φ_R`, `V_R`.
    pub fn retention_cut(&self, p: f64) -> Retention {
        let base = self.retention_eval(p);
        let (_, rem) = cutoff(p, self.cutoff_r);
        if rem == 0.0 {
            return base;
        }
        // ∫_0^p P_R = (|p| - R)² / 2 for |p| > R.
        let rem_int = 0.5 * rem * rem;
        let phi = base.phi + rem;
        let big_phi = base.big_phi + rem_int;
        Retention {
            phi,
            dphi: base.dphi + 1.0,
            big_phi,
            potential: p * phi - big_phi,
        }
    }

    /// `(μ(p), M(p))`.
    pub fn mobility_eval(&self, p: f64) -> (f64, f64) {
        (self.params.mu0, self.params.mu0 * p)
    }

    pub fn m_inverse(&self, v: f64) -> f64 {
        v / self.params.mu0
    }

    fn kappa_raw(&self, theta: f64) -> f64 {
        self.params.kappa_c * (1.0 + theta.powf(1.0 + self.params.a_exp))
    }

    fn kirchhoff_raw(&self, theta: f64) -> f64 {
        let a = self.params.a_exp;
        self.params.kappa_c * (theta + theta.powf(2.0 + a) / (2.0 + a))
    }

    pub fn gamma(&self, theta: f64) -> f64 {
        self.params.gamma_c * (1.0 + theta)
    }

    /// `(κ, K, γ)` of the uncut laws.
    pub fn heat_eval(&self, theta: f64) -> Result<HeatEval> {
        if !(theta >= 0.0) {
            return Err(Error::Domain(format!(
                "heat laws evaluated at non-positive temperature {theta}"
            )));
        }
        Ok(HeatEval {
            kappa: self.kappa_raw(theta),
            kirchhoff: self.kirchhoff_raw(theta),
            gamma: self.gamma(theta),
        })
    }

    /// Inverse of the uncut Kirchhoff transform.
    pub fn k_inverse(&self, z: f64) -> Result<f64> {
        self.invert_kirchhoff(z, f64::INFINITY)
    }

    /// `κ(Q_R(θ⁺))`.
    pub fn kappa_cut(&self, theta: f64) -> f64 {
        self.kappa_raw(self.q_r(theta.max(0.0)))
    }

    /// `K_R(θ) = ∫_0^θ κ(Q_R(τ⁺)) dτ`.
    pub fn kirchhoff_cut(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return self.kappa_raw(0.0) * theta;
        }
        let r = self.cutoff_r;
        if theta <= r {
            self.kirchhoff_raw(theta)
        } else {
            self.kirchhoff_raw(r) + self.kappa_raw(r) * (theta - r)
        }
    }

    pub fn kirchhoff_cut_inverse(&self, z: f64) -> Result<f64> {
        self.invert_kirchhoff(z, self.cutoff_r)
    }

    fn invert_kirchhoff(&self, z: f64, radius: f64) -> Result<f64> {
        if !(z >= 0.0) {
            return Err(Error::Domain(format!(
                "inverse Kirchhoff transform requested for negative value {z}"
            )));
        }
        if z == 0.0 {
            return Ok(0.0);
        }
        let kc = self.params.kappa_c;
        let a = self.params.a_exp;
        let (k_of, kappa_of) = (
            |t: f64| {
                if t <= radius {
                    self.kirchhoff_raw(t)
                } else {
                    self.kirchhoff_raw(radius) + self.kappa_raw(radius) * (t - radius)
                }
            },
            |t: f64| self.kappa_raw(t.min(radius)),
        );
        // K(θ) ≥ κ_c θ and K(θ) ≥ κ_c θ^{2+a}/(2+a) on the uncut branch, so
        // both inversions bound θ from above.
        let mut hi = z / kc;
        if radius.is_infinite() {
            hi = hi.min(((2.0 + a) * z / kc).powf(1.0 / (2.0 + a)));
        }
        hi *= 1.0 + 1e-12;
        let mut lo = 0.0;
        let tol = 1e-12 * z.max(1.0);
        let mut theta = hi;
        for _ in 0..200 {
            let r = k_of(theta) - z;
            if r.abs() <= tol {
                return Ok(theta);
            }
            if r > 0.0 {
                hi = theta;
            } else {
                lo = theta;
            }
            let step = theta - r / kappa_of(theta);
            theta = if step > lo && step < hi {
                step
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= f64::EPSILON * hi {
                return Ok(theta);
            }
        }
        Err(Error::Domain(format!(
            "inverse Kirchhoff transform did not converge for z = {z}"
        )))
    }

    /// Cut-off relaxation coefficient `γ_R(p, θ)`.
    pub fn gamma_cut(&self, p: f64, theta: f64) -> f64 {
        let base = self.gamma(self.q_r(theta.max(0.0)));
        if self.gamma_pressure_factor {
            let r = self.cutoff_r;
            base * (1.0 + (p * p - r * r).max(0.0))
        } else {
            base
        }
    }

    /// Phase driving force `(1-ρ*)(Φ_R(p) + p w) + L (Q_R(θ⁺)/θ_c - 1)`.
    pub fn phase_force(&self, p: f64, w: f64, theta: f64) -> f64 {
        let prm = &self.params;
        let ret = self.retention_cut(p);
        (1.0 - prm.rho_star()) * (ret.big_phi + p * w)
            + prm.latent_heat * (self.q_r(theta.max(0.0)) / prm.theta_c - 1.0)
    }

    /// Constants `(c_φ, C_φ)` of the retention slope envelope
    /// `c_φ max{1,|p|}^{-1-δ} ≤ φ'(p) ≤ C_φ max{1,|p|}^{-1-δ̂}`.
    pub fn retention_slope_bounds(&self) -> (f64, f64) {
        let upper = self.amplitude() / self.norm;
        let lower = upper * 2f64.powf(-0.5 * (1.0 + self.params.delta));
        (lower, upper)
    }
}

/// One checked clause of the admissibility conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationItem {
    pub name: String,
    pub passed: bool,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub items: Vec<ValidationItem>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ValidationItem> {
        self.items.iter().filter(|i| !i.passed)
    }

    pub fn item(&self, name: &str) -> Option<&ValidationItem> {
        self.items.iter().find(|i| i.name == name)
    }

    fn push(&mut self, name: &str, passed: bool, message: impl Into<String>) {
        self.items.push(ValidationItem {
            name: name.to_string(),
            passed,
            message: message.into(),
        });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for item in &self.items {
            let tag = if item.passed { "PASS" } else { "FAIL" };
            writeln!(f, "[{tag}] {}: {}", item.name, item.message)?;
        }
        write!(
            f,
            "{}",
            if self.is_valid() { "valid" } else { "invalid" }
        )
    }
}

/// Logarithmic sample of `[lo, hi]` (both positive) with `n` points.
fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
}

fn pressure_samples() -> Vec<f64> {
    let mut out = vec![0.0];
    for p in log_grid(1e-6, 1e6, 241) {
        out.push(p);
        out.push(-p);
    }
    out
}

fn temperature_samples() -> Vec<f64> {
    let mut out = vec![0.0];
    out.extend(log_grid(1e-6, 1e4, 201));
    out
}

/// Checks the admissibility clauses on the material constants, sampling
/// the envelope inequalities on logarithmic grids of `p ∈ [-10⁶, 10⁶]` and
/// `θ ∈ [0, 10⁴]`.
pub fn validate_hypotheses(params: &MaterialParams) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let p = params;
    let positive = |x: f64| x > 0.0 && x.is_finite();

    let rho_star = p.rho_s / p.rho_l;
    rep.push(
        "rho_star in (0,1)",
        positive(p.rho_l) && rho_star > 0.0 && rho_star < 1.0,
        format!("rho_s/rho_l = {rho_star}"),
    );
    rep.push(
        "c_s in (0,1)",
        p.c_s > 0.0 && p.c_s < 1.0,
        format!("c_s = {}", p.c_s),
    );
    rep.push(
        "φ♭ in (0,1)",
        p.phi_flat > 0.0 && p.phi_flat < 1.0,
        format!("phi_flat = {}", p.phi_flat),
    );
    rep.push(
        "φ♭ + c_s < 1",
        p.phi_flat + p.c_s < 1.0,
        format!("phi_flat + c_s = {}", p.phi_flat + p.c_s),
    );
    for (name, value) in [
        ("c0 > 0", p.c0),
        ("L > 0", p.latent_heat),
        ("θ_c > 0", p.theta_c),
        ("ν > 0", p.nu),
        ("λ_M > 0", p.lambda_m),
    ] {
        rep.push(name, positive(value), format!("value = {value}"));
    }

    // (i) relaxation coefficient envelope
    let gamma_ok = positive(p.gamma_c);
    rep.push("γ_c > 0", gamma_ok, format!("gamma_c = {}", p.gamma_c));

    // (ii) conductivity
    let a_ok = p.a_exp > 0.0 && p.a_exp < 1.0;
    rep.push("0 < a < 1", a_ok, format!("a = {}", p.a_exp));
    rep.push(
        "κ_c > 0",
        positive(p.kappa_c),
        format!("kappa_c = {}", p.kappa_c),
    );

    // (iv) retention tails
    rep.push("δ̂ > 0", p.delta_hat > 0.0, format!("delta_hat = {}", p.delta_hat));
    rep.push(
        "δ̂ ≤ δ",
        p.delta_hat <= p.delta,
        format!("delta_hat = {}, delta = {}", p.delta_hat, p.delta),
    );
    rep.push("δ < 1/4", p.delta < 0.25, format!("delta = {}", p.delta));

    // (v) mobility
    rep.push("μ₀ > 0", positive(p.mu0), format!("mu0 = {}", p.mu0));

    // Sampled envelopes only make sense once the scalar constraints hold.
    let scalars_ok = rep.is_valid();
    if !scalars_ok {
        rep.push(
            "sampled envelopes",
            false,
            "skipped: scalar constraints violated",
        );
        return rep;
    }
    let model = ConstitutiveModel::new(params.clone());
    let rel = 1e-12;

    let (c_gam, cap_gam) = (p.gamma_lower(), p.gamma_upper());
    let mut worst = None;
    for th in temperature_samples() {
        let g = model.gamma(th);
        if g < c_gam * (1.0 + th) * (1.0 - rel) || g > cap_gam * (1.0 + th) * (1.0 + rel) {
            worst = Some(th);
            break;
        }
    }
    rep.push(
        "γ envelope",
        worst.is_none(),
        match worst {
            None => format!("c_γ = {c_gam}, C_γ = {cap_gam} on θ ∈ [0, 1e4]"),
            Some(th) => format!("violated at θ = {th}"),
        },
    );

    // κ is exactly κ_c (1 + θ^{1+a}); the upper bound therefore holds for
    // every â > a, in particular for â = a + ε < 16/5 + 6a/5.
    let mut worst = None;
    for th in temperature_samples() {
        let k = model.kappa_cut(th);
        let env = p.kappa_c * (1.0 + th.powf(1.0 + p.a_exp));
        if k < env * (1.0 - rel) || k > 2.0 * env * (1.0 + rel) {
            worst = Some(th);
            break;
        }
    }
    rep.push(
        "κ envelope",
        worst.is_none(),
        match worst {
            None => format!(
                "c_κ = {}, C_κ = {}, â = a + ε on θ ∈ [0, 1e4]",
                p.kappa_c,
                2.0 * p.kappa_c
            ),
            Some(th) => format!("violated at θ = {th}"),
        },
    );

    let (c_phi, cap_phi) = model.retention_slope_bounds();
    let mut worst = None;
    for pr in pressure_samples() {
        let d = model.retention_eval(pr).dphi;
        let m = pr.abs().max(1.0);
        let lo = c_phi * m.powf(-1.0 - p.delta);
        let hi = cap_phi * m.powf(-1.0 - p.delta_hat);
        if d < lo * (1.0 - rel) || d > hi * (1.0 + rel) {
            worst = Some(pr);
            break;
        }
    }
    rep.push(
        "φ' envelope",
        worst.is_none(),
        match worst {
            None => format!("c_φ = {c_phi:.6e}, C_φ = {cap_phi:.6e} on p ∈ [-1e6, 1e6]"),
            Some(pr) => format!("violated at p = {pr}"),
        },
    );

    let mut mono = true;
    let mut prev = f64::NEG_INFINITY;
    let mut samples = pressure_samples();
    samples.sort_by(f64::total_cmp);
    for pr in samples {
        let phi = model.retention_eval(pr).phi;
        if phi < prev || phi <= p.phi_flat || phi >= 1.0 - p.c_s {
            mono = false;
            break;
        }
        prev = phi;
    }
    rep.push(
        "φ increasing in (φ♭, 1-c_s)",
        mono,
        "sampled on p ∈ [-1e6, 1e6]",
    );

    let mut mu_ok = true;
    for pr in pressure_samples() {
        let (mu, _) = model.mobility_eval(pr);
        if mu < p.mu0 * (1.0 - rel) || mu > p.mu0 * (1.0 + rel) {
            mu_ok = false;
        }
    }
    rep.push(
        "μ envelope",
        mu_ok,
        format!("c_μ = C_μ = {} on p ∈ [-1e6, 1e6]", p.mu0),
    );

    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> ConstitutiveModel {
        ConstitutiveModel::new(MaterialParams::default())
    }

    #[test]
    fn cutoff_clamps_and_splits() {
        assert_eq!(cutoff(7.0, 5.0), (5.0, 2.0));
        assert_eq!(cutoff(-3.0, 5.0), (-3.0, 0.0));
        assert_eq!(cutoff(-9.0, 5.0), (-5.0, -4.0));
        assert_eq!(cutoff(1e300, f64::INFINITY), (1e300, 0.0));
    }

    #[test]
    fn retention_at_zero() {
        let m = defaults();
        let r = m.retention_eval(0.0);
        assert_eq!(r.phi, (0.1 + 1.0 - 0.5) / 2.0);
        assert_eq!(r.potential, 0.0);
        assert_eq!(r.big_phi, 0.0);
    }

    #[test]
    fn retention_limits() {
        let m = defaults();
        assert!((m.retention_eval(1e12).phi - 0.5).abs() < 1e-3);
        assert!((m.retention_eval(-1e12).phi - 0.1).abs() < 1e-3);
        let mut prev = 0.0;
        for k in 0..40 {
            let phi = m.retention_eval(10f64.powf(k as f64 * 0.25)).phi;
            assert!(phi > prev && phi < 0.5);
            prev = phi;
        }
    }

    #[test]
    fn sigma_is_continuous_across_branches() {
        let m = defaults();
        let below = m.sigma(1.0 - 1e-12);
        let above = m.sigma(1.0 + 1e-12);
        assert!((below - above).abs() < 1e-12);
        assert!((m.sigma(-1.0 + 1e-12) - m.sigma(-1.0 - 1e-12)).abs() < 1e-12);
        assert!((m.sigma(0.3) + m.sigma(-0.3) - 1.0).abs() < 1e-15);
        assert!((m.sigma(30.0) + m.sigma(-30.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mobility_round_trip() {
        let m = ConstitutiveModel::new(MaterialParams {
            mu0: 2.0,
            ..MaterialParams::default()
        });
        assert_eq!(m.mobility_eval(3.0).1, 6.0);
        assert_eq!(m.m_inverse(6.0), 3.0);
        for p in [-1e5, -2.5, 0.0, 1e-9, 7.25, 3e8] {
            let back = m.m_inverse(m.mobility_eval(p).1);
            assert!((back - p).abs() <= 1e-14 * p.abs());
        }
    }

    #[test]
    fn heat_at_zero_and_unit() {
        let prm = MaterialParams {
            kappa_c: 1.0,
            a_exp: 0.5,
            gamma_c: 3.0,
            ..MaterialParams::default()
        };
        let m = ConstitutiveModel::new(prm);
        let h = m.heat_eval(0.0).unwrap();
        assert_eq!((h.kappa, h.kirchhoff, h.gamma), (1.0, 0.0, 3.0));
        assert!((m.heat_eval(1.0).unwrap().kirchhoff - 1.4).abs() < 1e-15);
    }

    #[test]
    fn heat_rejects_negative() {
        let m = defaults();
        assert!(matches!(m.heat_eval(-1e-3), Err(Error::Domain(_))));
        assert!(matches!(m.k_inverse(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn k_inverse_round_trip() {
        let m = defaults();
        for th in [0.1, 1.0, 350.0] {
            let z = m.heat_eval(th).unwrap().kirchhoff;
            let back = m.k_inverse(z).unwrap();
            assert!((back - th).abs() <= 1e-10 * th, "{th} -> {back}");
            let resid = (m.heat_eval(back).unwrap().kirchhoff - z).abs();
            assert!(resid <= 1e-12 * z.max(1.0));
        }
    }

    #[test]
    fn cut_kirchhoff_is_linear_beyond_radius() {
        let m = ConstitutiveModel::with_cutoff(MaterialParams::default(), 10.0);
        let k10 = m.kirchhoff_cut(10.0);
        let slope = m.kappa_cut(10.0);
        assert!((m.kirchhoff_cut(15.0) - (k10 + 5.0 * slope)).abs() < 1e-9 * k10);
        let back = m.kirchhoff_cut_inverse(m.kirchhoff_cut(25.0)).unwrap();
        assert!((back - 25.0).abs() < 1e-9);
    }

    #[test]
    fn retention_cut_adds_remainder() {
        let m = ConstitutiveModel::with_cutoff(MaterialParams::default(), 2.0);
        let base = m.retention_eval(5.0);
        let cut = m.retention_cut(5.0);
        assert!((cut.phi - base.phi - 3.0).abs() < 1e-14);
        assert!((cut.big_phi - base.big_phi - 4.5).abs() < 1e-12);
        assert_eq!(m.retention_cut(1.5), m.retention_eval(1.5));
    }

    #[test]
    fn gamma_pressure_factor_only_outside_radius() {
        let m = ConstitutiveModel::with_cutoff(MaterialParams::default(), 3.0)
            .with_gamma_pressure_factor(true);
        assert_eq!(m.gamma_cut(2.0, 1.0), m.gamma(1.0));
        assert_eq!(m.gamma_cut(4.0, 1.0), m.gamma(1.0) * 8.0);
    }

    #[test]
    fn defaults_are_admissible() {
        let rep = validate_hypotheses(&MaterialParams::default());
        assert!(rep.is_valid(), "{rep}");
    }

    #[test]
    fn heavy_ice_is_rejected() {
        let rep = validate_hypotheses(&MaterialParams {
            rho_s: 1100.0,
            ..MaterialParams::default()
        });
        assert!(!rep.is_valid());
        assert!(!rep.item("rho_star in (0,1)").unwrap().passed);
    }

    #[test]
    fn fat_tail_is_rejected() {
        let rep = validate_hypotheses(&MaterialParams {
            delta: 0.3,
            ..MaterialParams::default()
        });
        assert!(!rep.item("δ < 1/4").unwrap().passed);
        assert!(!rep.is_valid());
    }

    #[test]
    fn positivity_constant_vanishes_without_coupling() {
        let prm = MaterialParams {
            latent_heat: 0.0,
            beta: 0.0,
            ..MaterialParams::default()
        };
        assert_eq!(prm.positivity_constant(), 0.0);
    }
}
