//! Spectral Galerkin reference solver.
//!
//! `v = M(p)` and `z = K_R(θ)` are expanded in the Neumann eigenfunctions
//! of the interval; `w` and `χ` evolve as pointwise ODEs at Gauss nodes.
//! The resulting ODE system is integrated by an adaptive Dormand–Prince
//! 5(4) pair. Extra observation nodes carry `w` and `χ` at the points where
//! the main solver reports them; they do not feed back into the dynamics.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::constitutive::ConstitutiveModel;
use crate::error::{Error, Result};
use crate::geometry::Domain1D;
use crate::solver::FieldState;

/// `e_k` and `λ_k` of the Neumann Laplacian on `[0, ℓ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannMode {
    pub k: usize,
    pub length: f64,
}

impl NeumannMode {
    pub fn eigenvalue(&self) -> f64 {
        let a = self.k as f64 * PI / self.length;
        a * a
    }

    pub fn value(&self, x: f64) -> f64 {
        if self.k == 0 {
            return 1.0 / self.length.sqrt();
        }
        let a = self.k as f64 * PI / self.length;
        (2.0 / self.length).sqrt() * (a * x).cos()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if self.k == 0 {
            return 0.0;
        }
        let a = self.k as f64 * PI / self.length;
        -(2.0 / self.length).sqrt() * a * (a * x).sin()
    }
}

pub fn neumann_basis(k: usize, domain: &Domain1D) -> NeumannMode {
    NeumannMode {
        k,
        length: domain.length(),
    }
}

/// Gauss–Legendre nodes and weights mapped to `[0, ℓ]`, ascending.
pub fn gauss_legendre(n: usize, length: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Oracle("quadrature needs at least one node".into()));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let dp = legendre(n, x).1;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let nodes = nodes.iter().map(|x| 0.5 * length * (x + 1.0)).collect();
    let weights = weights.iter().map(|w| 0.5 * length * w).collect();
    Ok((nodes, weights))
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Oracle state: modal coefficients and nodal `w`, `χ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinState {
    pub t: f64,
    pub v_coeffs: Vec<f64>,
    pub z_coeffs: Vec<f64>,
    /// At the Gauss nodes.
    pub w_nodes: Vec<f64>,
    pub chi_nodes: Vec<f64>,
    /// At the observation nodes.
    pub w_obs: Vec<f64>,
    pub chi_obs: Vec<f64>,
    pub n_modes: usize,
}

/// Tolerances of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleTolerances {
    pub atol: f64,
    pub rtol: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OracleTolerances {
    fn default() -> Self {
        Self {
            atol: 1e-9,
            rtol: 1e-9,
            h_min: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

/// Time derivatives of every component of a [`GalerkinState`].
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinRates {
    pub v: Vec<f64>,
    pub z: Vec<f64>,
    pub w_nodes: Vec<f64>,
    pub chi_nodes: Vec<f64>,
    pub w_obs: Vec<f64>,
    pub chi_obs: Vec<f64>,
}

/// Energy balance of the modal system at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance {
    /// `dE/dt` from the chain rule.
    pub d_energy: f64,
    /// Boundary supply plus `∫ G_t w`.
    pub supply: f64,
    /// Sum of magnitudes of the contributing terms.
    pub scale: f64,
}

impl EnergyBalance {
    pub fn relative_defect(&self) -> f64 {
        (self.d_energy - self.supply).abs() / self.scale.max(f64::MIN_POSITIVE)
    }
}

/// Precomputed basis tables for one domain and truncation order.
#[derive(Debug, Clone)]
pub struct GalerkinOracle {
    model: ConstitutiveModel,
    domain: Domain1D,
    n_modes: usize,
    quad_x: Vec<f64>,
    quad_w: Vec<f64>,
    /// `[q][k]`
    basis_q: Vec<Vec<f64>>,
    dbasis_q: Vec<Vec<f64>>,
    basis_obs: Vec<Vec<f64>>,
    /// `[side][k]`
    basis_end: [Vec<f64>; 2],
    eigen: Vec<f64>,
}

struct Pointwise {
    p: f64,
    theta: f64,
    chi_t: f64,
    w_t: f64,
}

impl GalerkinOracle {
    pub fn new(model: ConstitutiveModel, domain: Domain1D, n_modes: usize) -> Result<Self> {
        let len = domain.length();
        let (quad_x, quad_w) = gauss_legendre(quadrature_order(n_modes), len)?;
        let modes: Vec<NeumannMode> = (0..=n_modes).map(|k| neumann_basis(k, &domain)).collect();
        let table = |xs: &[f64], f: fn(&NeumannMode, f64) -> f64| -> Vec<Vec<f64>> {
            xs.iter()
                .map(|&x| modes.iter().map(|m| f(m, x)).collect())
                .collect()
        };
        let basis_q = table(&quad_x, NeumannMode::value);
        let dbasis_q = table(&quad_x, NeumannMode::derivative);
        let basis_obs = table(domain.nodes(), NeumannMode::value);
        let basis_end = [
            modes.iter().map(|m| m.value(0.0)).collect(),
            modes.iter().map(|m| m.value(len)).collect(),
        ];
        let eigen = modes.iter().map(NeumannMode::eigenvalue).collect();
        Ok(Self {
            model,
            domain,
            n_modes,
            quad_x,
            quad_w,
            basis_q,
            dbasis_q,
            basis_obs,
            basis_end,
            eigen,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn quadrature(&self) -> (&[f64], &[f64]) {
        (&self.quad_x, &self.quad_w)
    }

    pub fn model(&self) -> &ConstitutiveModel {
        &self.model
    }

    /// Projects nodal initial data given as functions of `x`.
    pub fn project(
        &self,
        p0: impl Fn(f64) -> f64,
        w0: impl Fn(f64) -> f64,
        chi0: impl Fn(f64) -> f64,
        theta0: impl Fn(f64) -> f64,
    ) -> Result<GalerkinState> {
        let nk = self.n_modes + 1;
        let mut v = vec![0.0; nk];
        let mut z = vec![0.0; nk];
        for (q, (&x, &wq)) in self.quad_x.iter().zip(&self.quad_w).enumerate() {
            let vm = self.model.mobility_eval(p0(x)).1;
            let th = theta0(x);
            if !(th > 0.0) {
                return Err(Error::Oracle(format!("initial temperature {th} not positive")));
            }
            let zk = self.model.kirchhoff_cut(th);
            for k in 0..nk {
                v[k] += wq * vm * self.basis_q[q][k];
                z[k] += wq * zk * self.basis_q[q][k];
            }
        }
        let mut w_nodes: Vec<f64> = self.quad_x.iter().map(|&x| w0(x)).collect();
        let mean = dot(&self.quad_w, &w_nodes) / self.domain.length();
        if mean.abs() > 1e-8 {
            return Err(Error::Oracle(format!("initial w has mean {mean:e}")));
        }
        w_nodes.iter_mut().for_each(|w| *w -= mean);
        let nodes = self.domain.nodes();
        Ok(GalerkinState {
            t: 0.0,
            v_coeffs: v,
            z_coeffs: z,
            chi_nodes: self.quad_x.iter().map(|&x| chi0(x)).collect(),
            w_nodes,
            w_obs: nodes.iter().map(|&x| w0(x) - mean).collect(),
            chi_obs: nodes.iter().map(|&x| chi0(x)).collect(),
            n_modes: self.n_modes,
        })
    }

    fn reconstruct(&self, coeffs: &[f64], row: &[f64]) -> f64 {
        dot(coeffs, row)
    }

    fn theta_from(&self, z: f64) -> Result<f64> {
        if !(z > 0.0) {
            return Err(Error::Oracle(format!(
                "reconstructed temperature is not positive (Kirchhoff value {z:e})"
            )));
        }
        self.model
            .kirchhoff_cut_inverse(z)
            .map_err(|e| Error::Oracle(e.to_string()))
    }

    /// Pointwise phase and volume rates given reconstructed `p`, `θ`.
    fn pointwise(&self, p: f64, theta: f64, w: f64, chi: f64, g: f64, h: f64) -> Pointwise {
        let prm = self.model.params();
        let f = self.model.phase_force(p, w, theta);
        let gamma = self.model.gamma_cut(p, theta);
        let mut chi_t = f / gamma;
        if (chi >= 1.0 && chi_t > 0.0) || (chi <= 0.0 && chi_t < 0.0) {
            chi_t = 0.0;
        }
        let rhs = p * prm.mass_weight(chi) + prm.beta * (self.model.q_r(theta) - prm.theta_c) - g + h;
        let w_t = (rhs - prm.lambda_m * w) / prm.nu;
        Pointwise {
            p,
            theta,
            chi_t,
            w_t,
        }
    }

    fn h_constant(&self, ps: &[f64], thetas: &[f64], chi: &[f64], g: &[f64]) -> f64 {
        let prm = self.model.params();
        let sum: f64 = (0..ps.len())
            .map(|q| {
                self.quad_w[q]
                    * (ps[q] * prm.mass_weight(chi[q])
                        + prm.beta * (self.model.q_r(thetas[q]) - prm.theta_c)
                        - g[q])
            })
            .sum();
        -sum / self.domain.length()
    }

    /// Right-hand side of the modal ODE system.
    pub fn rhs(&self, s: &GalerkinState, t: f64) -> Result<GalerkinRates> {
        let prm = self.model.params();
        let nq = self.quad_x.len();
        let nk = self.n_modes + 1;
        let len = self.domain.length();
        let g_pot = &self.domain.g_potential;
        let mut ps = Vec::with_capacity(nq);
        let mut thetas = Vec::with_capacity(nq);
        for q in 0..nq {
            ps.push(self.model.m_inverse(self.reconstruct(&s.v_coeffs, &self.basis_q[q])));
            thetas.push(self.theta_from(self.reconstruct(&s.z_coeffs, &self.basis_q[q]))?);
        }
        let g_q: Vec<f64> = self.quad_x.iter().map(|&x| g_pot.eval(x, t, len)).collect();
        let h = self.h_constant(&ps, &thetas, &s.chi_nodes, &g_q);
        let pts: Vec<Pointwise> = (0..nq)
            .map(|q| self.pointwise(ps[q], thetas[q], s.w_nodes[q], s.chi_nodes[q], g_q[q], h))
            .collect();

        let bc = self.domain.boundary_eval(t);
        let mut p_end = [0.0; 2];
        let mut theta_end = [0.0; 2];
        for b in 0..2 {
            p_end[b] = self.model.m_inverse(self.reconstruct(&s.v_coeffs, &self.basis_end[b]));
            theta_end[b] = self.theta_from(self.reconstruct(&s.z_coeffs, &self.basis_end[b]))?;
        }

        let mut mass = DMatrix::<f64>::zeros(nk, nk);
        let mut heat = DMatrix::<f64>::zeros(nk, nk);
        let mut rv = DVector::<f64>::zeros(nk);
        let mut rz = DVector::<f64>::zeros(nk);
        let ds = 1.0 - prm.rho_star();
        for q in 0..nq {
            let pt = &pts[q];
            let (w, chi) = (s.w_nodes[q], s.chi_nodes[q]);
            let ret = self.model.retention_cut(pt.p);
            let mu = self.model.mobility_eval(pt.p).0;
            let a = self.quad_w[q] * prm.mass_weight(chi) * ret.dphi / mu;
            let c = self.quad_w[q] * prm.c0 / self.model.kappa_cut(pt.theta);
            let grad_v = dot(&s.v_coeffs, &self.dbasis_q[q]);
            let grad_p = grad_v / mu;
            let mass_src = -(ds * pt.chi_t * (ret.phi + w) + prm.mass_weight(chi) * pt.w_t);
            let heat_src = prm.nu * pt.w_t * pt.w_t
                + mu * self.model.q_r(grad_p * grad_p) / prm.rho_l
                + self.model.gamma_cut(pt.p, pt.theta) * pt.chi_t * pt.chi_t
                - prm.latent_heat / prm.theta_c * pt.theta * pt.chi_t
                - prm.beta * pt.theta * pt.w_t;
            let e = &self.basis_q[q];
            for k in 0..nk {
                rv[k] += self.quad_w[q] * mass_src * e[k];
                rz[k] += self.quad_w[q] * heat_src * e[k];
                for j in 0..nk {
                    mass[(k, j)] += a * e[k] * e[j];
                    heat[(k, j)] += c * e[k] * e[j];
                }
            }
        }
        for k in 0..nk {
            rv[k] -= self.eigen[k] * s.v_coeffs[k] / prm.rho_l;
            rz[k] -= self.eigen[k] * s.z_coeffs[k];
            for b in 0..2 {
                let e = self.basis_end[b][k];
                rv[k] += self.domain.alpha[b] * (bc.p_star[b] - p_end[b]) * e;
                rz[k] += self.domain.omega[b] * (bc.theta_star[b] - theta_end[b]) * e;
            }
        }
        let dv = spd_solve(mass, rv)?;
        let dz = spd_solve(heat, rz)?;

        let mut w_obs = Vec::with_capacity(s.w_obs.len());
        let mut chi_obs = Vec::with_capacity(s.chi_obs.len());
        for (i, &x) in self.domain.nodes().iter().enumerate() {
            let p = self.model.m_inverse(self.reconstruct(&s.v_coeffs, &self.basis_obs[i]));
            let theta = self.theta_from(self.reconstruct(&s.z_coeffs, &self.basis_obs[i]))?;
            let pt = self.pointwise(p, theta, s.w_obs[i], s.chi_obs[i], g_pot.eval(x, t, len), h);
            w_obs.push(pt.w_t);
            chi_obs.push(pt.chi_t);
        }
        Ok(GalerkinRates {
            v: dv,
            z: dz,
            w_nodes: pts.iter().map(|p| p.w_t).collect(),
            chi_nodes: pts.iter().map(|p| p.chi_t).collect(),
            w_obs,
            chi_obs,
        })
    }

    /// Quadrature energy `∫ (c₀θ + Lχ + s(χ)V(p) + (λ_M/2)w² + (βθ_c+G)w)`.
    pub fn energy(&self, s: &GalerkinState) -> Result<f64> {
        let prm = self.model.params();
        let len = self.domain.length();
        let mut e = 0.0;
        for q in 0..self.quad_x.len() {
            let p = self.model.m_inverse(self.reconstruct(&s.v_coeffs, &self.basis_q[q]));
            let theta = self.theta_from(self.reconstruct(&s.z_coeffs, &self.basis_q[q]))?;
            let (w, chi) = (s.w_nodes[q], s.chi_nodes[q]);
            let g = self.domain.g_potential.eval(self.quad_x[q], s.t, len);
            e += self.quad_w[q]
                * (prm.c0 * theta
                    + prm.latent_heat * chi
                    + prm.mass_weight(chi) * self.model.retention_cut(p).potential
                    + 0.5 * prm.lambda_m * w * w
                    + (prm.beta * prm.theta_c + g) * w);
        }
        Ok(e)
    }

    /// Instantaneous energy balance `dE/dt = boundary supply + ∫ G_t w`.
    pub fn energy_balance(&self, s: &GalerkinState) -> Result<EnergyBalance> {
        let prm = self.model.params();
        let len = self.domain.length();
        let rates = self.rhs(s, s.t)?;
        let g_pot = &self.domain.g_potential;
        let eps = 1e-7 * s.t.abs().max(1.0);
        let mut d_energy = 0.0;
        let mut scale = 0.0;
        let mut g_work = 0.0;
        for q in 0..self.quad_x.len() {
            let e = &self.basis_q[q];
            let p = self.model.m_inverse(self.reconstruct(&s.v_coeffs, e));
            let theta = self.theta_from(self.reconstruct(&s.z_coeffs, e))?;
            let mu = self.model.mobility_eval(p).0;
            let ret = self.model.retention_cut(p);
            let (w, chi) = (s.w_nodes[q], s.chi_nodes[q]);
            let (w_t, chi_t) = (rates.w_nodes[q], rates.chi_nodes[q]);
            let theta_t = dot(&rates.z, e) / self.model.kappa_cut(theta);
            let p_t = dot(&rates.v, e) / mu;
            let x = self.quad_x[q];
            let g = g_pot.eval(x, s.t, len);
            let g_t = (g_pot.eval(x, s.t + eps, len) - g_pot.eval(x, s.t - eps, len)) / (2.0 * eps);
            let terms = [
                prm.c0 * theta_t,
                prm.latent_heat * chi_t,
                (1.0 - prm.rho_star()) * chi_t * ret.potential,
                prm.mass_weight(chi) * p * ret.dphi * p_t,
                prm.lambda_m * w * w_t,
                (prm.beta * prm.theta_c + g) * w_t,
                g_t * w,
            ];
            let wq = self.quad_w[q];
            d_energy += wq * terms.iter().sum::<f64>();
            scale += wq * terms.iter().map(|v| v.abs()).sum::<f64>();
            g_work += wq * g_t * w;
        }
        let bc = self.domain.boundary_eval(s.t);
        let mut supply = g_work;
        for b in 0..2 {
            let e = &self.basis_end[b];
            let p = self.model.m_inverse(self.reconstruct(&s.v_coeffs, e));
            let theta = self.theta_from(self.reconstruct(&s.z_coeffs, e))?;
            let flux = self.domain.omega[b] * (bc.theta_star[b] - theta)
                + self.domain.alpha[b] * (bc.p_star[b] - p) * p;
            supply += flux;
            scale += flux.abs();
        }
        Ok(EnergyBalance {
            d_energy,
            supply,
            scale,
        })
    }

    /// Fields at the observation nodes.
    pub fn observe(&self, s: &GalerkinState) -> Result<FieldState> {
        let n = self.domain.n_nodes();
        let mut p = Vec::with_capacity(n);
        let mut theta = Vec::with_capacity(n);
        for row in &self.basis_obs {
            p.push(self.model.m_inverse(self.reconstruct(&s.v_coeffs, row)));
            theta.push(self.theta_from(self.reconstruct(&s.z_coeffs, row))?);
        }
        Ok(FieldState {
            t: s.t,
            p,
            w: s.w_obs.clone(),
            chi: s.chi_obs.clone(),
            theta,
        })
    }

    /// Integrates to each of `times` (increasing, all `≥ s.t`) and returns
    /// the state observed at each.
    pub fn integrate(
        &self,
        initial: &GalerkinState,
        times: &[f64],
        tol: OracleTolerances,
    ) -> Result<(Vec<FieldState>, GalerkinState)> {
        let mut state = initial.clone();
        let mut out = Vec::with_capacity(times.len());
        let mut h = 0.0;
        for &t_out in times {
            if t_out < state.t {
                return Err(Error::Oracle(format!(
                    "output time {t_out} precedes current time {}",
                    state.t
                )));
            }
            h = self.integrate_to(&mut state, t_out, h, tol)?;
            state.t = t_out;
            out.push(self.observe(&state)?);
        }
        Ok((out, state))
    }

    fn integrate_to(
        &self,
        state: &mut GalerkinState,
        t_end: f64,
        h_prev: f64,
        tol: OracleTolerances,
    ) -> Result<f64> {
        let span = t_end - state.t;
        if span <= 0.0 {
            return Ok(h_prev);
        }
        let mut y = pack(state);
        let mut h = if h_prev > 0.0 { h_prev } else { 1e-4 * span.min(1.0) };
        let mut t = state.t;
        let mut k1 = pack_rates(&self.rhs(state, t)?);
        let mut steps = 0;
        while t < t_end {
            steps += 1;
            if steps > tol.max_steps {
                return Err(Error::Oracle("step budget exhausted".into()));
            }
            let last = t + h >= t_end - 1e-14 * t_end.abs().max(1.0);
            let h_try = if last { t_end - t } else { h };
            let (y_new, k7, err) = match self.dp_step(state, &y, &k1, t, h_try) {
                Ok(r) => r,
                Err(_) => {
                    h = 0.25 * h_try;
                    if h < tol.h_min {
                        return Err(Error::Oracle(format!("step size underflow at t = {t}")));
                    }
                    continue;
                }
            };
            let mut norm = 0.0;
            for i in 0..y.len() {
                let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
                norm += (err[i] / sc).powi(2);
            }
            let norm = (norm / y.len() as f64).sqrt();
            if norm <= 1.0 {
                t = if last { t_end } else { t + h_try };
                y = y_new;
                unpack(&y, state);
                let clamped = clamp_phase(state);
                state.t = t;
                if clamped {
                    y = pack(state);
                    k1 = pack_rates(&self.rhs(state, t)?);
                } else {
                    k1 = k7;
                }
                let fac = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || fac < 1.0 {
                    h = h_try * fac;
                }
            } else {
                h = h_try * (0.9 * norm.powf(-0.2)).clamp(0.1, 1.0);
                if h < tol.h_min {
                    return Err(Error::Oracle(format!("step size underflow at t = {t}")));
                }
            }
        }
        Ok(h)
    }

    /// One Dormand–Prince step; returns the 5th-order solution, the FSAL
    /// stage and the embedded error estimate.
    fn dp_step(
        &self,
        shape: &GalerkinState,
        y: &[f64],
        k1: &[f64],
        t: f64,
        h: f64,
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
        const A: [&[f64]; 7] = [
            &[],
            &[1.0 / 5.0],
            &[3.0 / 40.0, 9.0 / 40.0],
            &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
            &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
            &[
                9017.0 / 3168.0,
                -355.0 / 33.0,
                46732.0 / 5247.0,
                49.0 / 176.0,
                -5103.0 / 18656.0,
            ],
            &[
                35.0 / 384.0,
                0.0,
                500.0 / 1113.0,
                125.0 / 192.0,
                -2187.0 / 6784.0,
                11.0 / 84.0,
            ],
        ];
        const E: [f64; 7] = [
            71.0 / 57600.0,
            0.0,
            -71.0 / 16695.0,
            71.0 / 1920.0,
            -17253.0 / 339200.0,
            22.0 / 525.0,
            -1.0 / 40.0,
        ];
        let n = y.len();
        let mut ks: Vec<Vec<f64>> = vec![k1.to_vec()];
        let mut tmp = shape.clone();
        let mut y_stage = vec![0.0; n];
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, a) in A[s].iter().enumerate() {
                    acc += h * a * ks[j][i];
                }
                y_stage[i] = acc;
            }
            unpack(&y_stage, &mut tmp);
            tmp.t = t + C[s] * h;
            ks.push(pack_rates(&self.rhs(&tmp, tmp.t)?));
        }
        let err = (0..n)
            .map(|i| h * (0..7).map(|s| E[s] * ks[s][i]).sum::<f64>())
            .collect();
        let k7 = ks.pop().expect("seven stages");
        Ok((y_stage, k7, err))
    }
}

/// Gauss order used for `n_modes` modes. Products of two basis functions
/// with the smooth nonlinear coefficients need well above `n_modes + 2`
/// points to be orthonormal to round-off.
pub fn quadrature_order(n_modes: usize) -> usize {
    4 * n_modes + 12
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn spd_solve(m: DMatrix<f64>, rhs: DVector<f64>) -> Result<Vec<f64>> {
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Oracle("modal mass matrix is not positive definite".into()))?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

fn pack(s: &GalerkinState) -> Vec<f64> {
    [
        &s.v_coeffs[..],
        &s.z_coeffs,
        &s.w_nodes,
        &s.chi_nodes,
        &s.w_obs,
        &s.chi_obs,
    ]
    .concat()
}

fn pack_rates(r: &GalerkinRates) -> Vec<f64> {
    [&r.v[..], &r.z, &r.w_nodes, &r.chi_nodes, &r.w_obs, &r.chi_obs].concat()
}

fn unpack(y: &[f64], s: &mut GalerkinState) {
    let mut off = 0;
    for part in [
        &mut s.v_coeffs,
        &mut s.z_coeffs,
        &mut s.w_nodes,
        &mut s.chi_nodes,
        &mut s.w_obs,
        &mut s.chi_obs,
    ] {
        let n = part.len();
        part.copy_from_slice(&y[off..off + n]);
        off += n;
    }
}

fn clamp_phase(s: &mut GalerkinState) -> bool {
    let mut changed = false;
    for c in s.chi_nodes.iter_mut().chain(s.chi_obs.iter_mut()) {
        let k = c.clamp(0.0, 1.0);
        if k != *c {
            *c = k;
            changed = true;
        }
    }
    changed
}

/// Per-field discrepancies between two trajectories.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Discrepancy {
    /// Max over matched times of `‖a - b‖₂ / ‖b‖₂`, order `p, w, χ, θ`.
    pub rel_l2: [f64; 4],
    /// Max over matched times of `‖a - b‖_∞`.
    pub sup: [f64; 4],
    pub matched_times: usize,
}

impl Discrepancy {
    pub const FIELDS: [&'static str; 4] = ["p", "w", "chi", "theta"];

    pub fn max_rel_l2(&self) -> f64 {
        self.rel_l2.iter().copied().fold(0.0, f64::max)
    }
}

/// Compares `solver` against the reference `oracle`; both must list the same
/// snapshot times.
pub fn compare(oracle: &[FieldState], solver: &[FieldState], domain: &Domain1D) -> Result<Discrepancy> {
    if oracle.len() != solver.len() {
        return Err(Error::Oracle(format!(
            "mismatched snapshot schedules: {} oracle vs {} solver snapshots",
            oracle.len(),
            solver.len()
        )));
    }
    let mut d = Discrepancy {
        matched_times: oracle.len(),
        ..Discrepancy::default()
    };
    for (a, b) in solver.iter().zip(oracle) {
        if (a.t - b.t).abs() > 1e-12 * a.t.abs().max(1.0) {
            return Err(Error::Oracle(format!(
                "mismatched snapshot schedules: solver t = {} vs oracle t = {}",
                a.t, b.t
            )));
        }
        a.check_len(domain)?;
        b.check_len(domain)?;
        let fields = [
            (&a.p, &b.p),
            (&a.w, &b.w),
            (&a.chi, &b.chi),
            (&a.theta, &b.theta),
        ];
        for (f, (x, y)) in fields.iter().enumerate() {
            let diff: Vec<f64> = x.iter().zip(y.iter()).map(|(u, v)| (u - v) * (u - v)).collect();
            let refr: Vec<f64> = y.iter().map(|v| v * v).collect();
            let num = domain.integrate_unchecked(&diff).sqrt();
            let den = domain.integrate_unchecked(&refr).sqrt();
            let rel = if den > 0.0 { num / den } else { num };
            let sup = x.iter().zip(y.iter()).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
            d.rel_l2[f] = d.rel_l2[f].max(rel);
            d.sup[f] = d.sup[f].max(sup);
        }
    }
    Ok(d)
}
