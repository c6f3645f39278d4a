//! Typed run configuration and construction of a ready-to-run simulation.

use std::path::PathBuf;

use crate::constitutive::{validate_hypotheses, ConstitutiveModel, MaterialParams};
use crate::error::{Error, Result};
use crate::galerkin::{GalerkinOracle, GalerkinState};
use crate::geometry::{build_domain, Domain1D, DomainConfig, Profile};
use crate::solver::{FieldState, RunSettings, Simulation, SolverSettings};

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub p0: Profile,
    pub w0: Profile,
    pub chi0: Profile,
    pub theta0: Profile,
}

impl Default for InitialData {
    fn default() -> Self {
        Self {
            p0: Profile::Constant(0.0),
            w0: Profile::Constant(0.0),
            chi0: Profile::Constant(1.0),
            theta0: Profile::Constant(273.15),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeConfig {
    pub t_end: f64,
    pub dt: f64,
    pub dt_min: f64,
    pub dt_max: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            dt: 1e-3,
            dt_min: 1e-9,
            dt_max: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tol_p: f64,
    pub tol_theta: f64,
    pub max_newton: usize,
    pub cutoff_r: f64,
    pub gamma_pressure_factor: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_p: 1e-10,
            tol_theta: 1e-12,
            max_newton: 50,
            cutoff_r: f64::INFINITY,
            gamma_pressure_factor: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub snapshot_interval: f64,
    pub out_dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            snapshot_interval: 0.1,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Complete description of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub material: MaterialParams,
    pub domain: DomainConfig,
    pub initial: InitialData,
    pub time: TimeConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    /// Modes of the spectral reference solver.
    pub n_modes: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            material: MaterialParams::default(),
            domain: DomainConfig::default(),
            initial: InitialData::default(),
            time: TimeConfig::default(),
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
            n_modes: 8,
        }
    }
}

impl RunConfig {
    pub fn model(&self) -> ConstitutiveModel {
        ConstitutiveModel::with_cutoff(self.material.clone(), self.solver.cutoff_r)
            .with_gamma_pressure_factor(self.solver.gamma_pressure_factor)
    }

    pub fn run_settings(&self) -> RunSettings {
        RunSettings {
            t_end: self.time.t_end,
            dt: self.time.dt,
            dt_max: self.time.dt_max,
            snapshot_interval: self.output.snapshot_interval,
            solver: SolverSettings {
                tol_p: self.solver.tol_p,
                tol_theta: self.solver.tol_theta,
                max_newton: self.solver.max_newton,
                dt_min: self.time.dt_min,
            },
            enforce_invariants: true,
        }
    }

    /// Checks everything that does not need the grid.
    pub fn validate(&self) -> Result<()> {
        let t = &self.time;
        if !(t.t_end > 0.0 && t.t_end.is_finite()) {
            return Err(Error::config("t_end", "must be positive and finite"));
        }
        if !(t.dt > 0.0 && t.dt_min > 0.0 && t.dt_max > 0.0) {
            return Err(Error::config("dt/dt_min/dt_max", "time steps must be positive"));
        }
        if t.dt_min > t.dt_max {
            return Err(Error::config(
                "dt_min/dt_max",
                format!("dt_min = {} exceeds dt_max = {}", t.dt_min, t.dt_max),
            ));
        }
        if t.dt < t.dt_min || t.dt > t.dt_max {
            return Err(Error::config(
                "dt",
                format!("dt = {} outside [dt_min, dt_max] = [{}, {}]", t.dt, t.dt_min, t.dt_max),
            ));
        }
        let s = &self.solver;
        if !(s.tol_p > 0.0) || !(s.tol_theta > 0.0) {
            return Err(Error::config("tol_p/tol_theta", "tolerances must be positive"));
        }
        if !(s.cutoff_r > 0.0) {
            return Err(Error::config("cutoff_R", "cut-off radius must be positive"));
        }
        if s.max_newton == 0 {
            return Err(Error::config("max_newton", "must be at least 1"));
        }
        if !(self.output.snapshot_interval >= 0.0) {
            return Err(Error::config("snapshot_interval", "must be non-negative"));
        }
        let report = validate_hypotheses(&self.material);
        if !report.is_valid() {
            let first = report.failures().next().expect("invalid report has a failure");
            return Err(Error::config(
                "material",
                format!("{}: {}", first.name, first.message),
            ));
        }
        Ok(())
    }

    pub fn build_domain(&self) -> Result<Domain1D> {
        build_domain(&self.domain)
    }

    /// Samples and validates the initial fields.
    pub fn initial_state(&self, domain: &Domain1D) -> Result<FieldState> {
        let x = domain.nodes();
        let len = domain.length();
        let ini = &self.initial;
        let p = ini.p0.sample(x, len);
        let mut w = ini.w0.sample(x, len);
        let chi = ini.chi0.sample(x, len);
        let theta = ini.theta0.sample(x, len);
        for (i, v) in p.iter().chain(&w).chain(&chi).chain(&theta).enumerate() {
            if !v.is_finite() {
                return Err(Error::config("initial", format!("non-finite initial value at entry {i}")));
            }
        }
        if let Some(i) = chi.iter().position(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::config(
                "chi0",
                format!("initial liquid fraction {} at x = {} outside [0, 1]", chi[i], x[i]),
            ));
        }
        if let Some(i) = theta.iter().position(|&t| t < domain.theta_bar) {
            return Err(Error::config(
                "theta0",
                format!(
                    "initial temperature {} at x = {} below theta_bar = {} (temperature positivity hypothesis)",
                    theta[i], x[i], domain.theta_bar
                ),
            ));
        }
        let mean = domain.integrate_unchecked(&w) / len;
        if mean.abs() > 1e-8 {
            return Err(Error::config(
                "w0",
                format!("initial volume change has mean {mean:e}; it must integrate to zero (zero-mean hypothesis)"),
            ));
        }
        w.iter_mut().for_each(|v| *v -= mean);
        Ok(FieldState {
            t: 0.0,
            p,
            w,
            chi,
            theta,
        })
    }

    /// Validates the configuration and sets up the main solver.
    pub fn simulation(&self) -> Result<Simulation> {
        self.validate()?;
        let domain = self.build_domain()?;
        let state = self.initial_state(&domain)?;
        Simulation::new(self.model(), domain, self.run_settings(), state)
    }

    /// Variant with both boundaries closed to fluid and heat. The boundary
    /// positivity conditions are skipped on purpose.
    pub fn sealed_simulation(&self) -> Result<Simulation> {
        self.validate()?;
        let domain = Domain1D::new_unchecked(&self.domain).sealed();
        let state = self.initial_state(&domain)?;
        Simulation::new(self.model(), domain, self.run_settings(), state)
    }
}

impl RunConfig {
    /// Spectral reference solver for this configuration, with the projected
    /// initial state. Only smooth initial profiles are accepted.
    pub fn oracle(&self) -> Result<(GalerkinOracle, GalerkinState)> {
        self.validate()?;
        let domain = self.build_domain()?;
        self.initial_state(&domain)?;
        let ini = &self.initial;
        for (key, prof) in [
            ("p0", &ini.p0),
            ("w0", &ini.w0),
            ("chi0", &ini.chi0),
            ("theta0", &ini.theta0),
        ] {
            if !prof.is_smooth() {
                return Err(Error::config(
                    key,
                    "the spectral reference solver accepts only constant or cosine initial profiles",
                ));
            }
        }
        let len = domain.length();
        let oracle = GalerkinOracle::new(self.model(), domain, self.n_modes)?;
        let state = oracle.project(
            |x| ini.p0.eval(x, len),
            |x| ini.w0.eval(x, len),
            |x| ini.chi0.eval(x, len),
            |x| ini.theta0.eval(x, len),
        )?;
        Ok((oracle, state))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundarySignal;

    #[test]
    fn defaults_build() {
        let cfg = RunConfig::default();
        let sim = cfg.simulation().unwrap();
        assert_eq!(sim.state.len(), 65);
    }

    #[test]
    fn time_bounds_are_checked() {
        let mut cfg = RunConfig::default();
        cfg.time.dt_min = 1.0;
        cfg.time.dt_max = 0.1;
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("dt_min") && msg.contains("dt_max"));
    }

    #[test]
    fn initial_data_checks() {
        let mut cfg = RunConfig::default();
        cfg.domain.theta_bar = 260.0;
        cfg.initial.theta0 = Profile::Constant(250.0);
        assert!(matches!(cfg.simulation(), Err(Error::Config { ref key, .. }) if key == "theta0"));

        let mut cfg = RunConfig::default();
        cfg.initial.w0 = Profile::Constant(0.01);
        assert!(matches!(cfg.simulation(), Err(Error::Config { ref key, .. }) if key == "w0"));

        let mut cfg = RunConfig::default();
        cfg.initial.chi0 = Profile::Constant(1.5);
        assert!(matches!(cfg.simulation(), Err(Error::Config { ref key, .. }) if key == "chi0"));
    }

    #[test]
    fn tiny_mean_is_corrected() {
        let mut cfg = RunConfig::default();
        cfg.initial.w0 = Profile::Constant(1e-9);
        let sim = cfg.simulation().unwrap();
        let mean = sim.domain.integrate(&sim.state.w).unwrap();
        assert!(mean.abs() < 1e-20);
    }

    #[test]
    fn sealed_variant_skips_boundary_check() {
        let mut cfg = RunConfig::default();
        cfg.domain.theta_star_left = BoundarySignal::Constant(10.0);
        assert!(cfg.simulation().is_err());
        let sim = cfg.sealed_simulation().unwrap();
        assert_eq!(sim.domain.alpha, [0.0, 0.0]);
        assert_eq!(sim.domain.omega, [0.0, 0.0]);
    }
}
