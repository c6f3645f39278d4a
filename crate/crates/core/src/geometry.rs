//! One-dimensional domain, trapezoid quadrature and boundary data.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Scalar signal of time: constant, linear ramp or piecewise-linear table.
/// Evaluation outside the knot range clamps to the end values.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundarySignal {
    Constant(f64),
    Ramp { t0: f64, v0: f64, t1: f64, v1: f64 },
    Table(Vec<(f64, f64)>),
}

impl BoundarySignal {
    pub fn table(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::config("signal", "empty knot table"));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::config(
                "signal",
                "knot times must be strictly increasing",
            ));
        }
        Ok(BoundarySignal::Table(knots))
    }

    pub fn ramp(t0: f64, v0: f64, t1: f64, v1: f64) -> Result<Self> {
        if t1 <= t0 {
            return Err(Error::config("signal", "ramp end time must exceed start time"));
        }
        Ok(BoundarySignal::Ramp { t0, v0, t1, v1 })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            BoundarySignal::Constant(v) => *v,
            BoundarySignal::Ramp { t0, v0, t1, v1 } => interpolate(&[(*t0, *v0), (*t1, *v1)], t),
            BoundarySignal::Table(k) => interpolate(k, t),
        }
    }

    /// Smallest value the signal attains.
    pub fn min_value(&self) -> f64 {
        match self {
            BoundarySignal::Constant(v) => *v,
            BoundarySignal::Ramp { v0, v1, .. } => v0.min(*v1),
            BoundarySignal::Table(k) => k.iter().map(|k| k.1).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            BoundarySignal::Constant(_) => true,
            BoundarySignal::Ramp { v0, v1, .. } => v0 == v1,
            BoundarySignal::Table(k) => k.iter().all(|e| e.1 == k[0].1),
        }
    }
}

fn interpolate(knots: &[(f64, f64)], t: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let i = knots.partition_point(|k| k.0 <= t);
    let (a, b) = (knots[i - 1], knots[i]);
    let s = (t - a.0) / (b.0 - a.0);
    a.1 + s * (b.1 - a.1)
}

/// Spatial profile on `[0, ℓ]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant(f64),
    /// Piecewise-linear through `(x, value)` knots, clamped outside.
    Linear(Vec<(f64, f64)>),
    /// `base + amplitude · cos(mode · π x / ℓ)`.
    Cosine { base: f64, amplitude: f64, mode: u32 },
}

impl Profile {
    pub fn eval(&self, x: f64, length: f64) -> f64 {
        match self {
            Profile::Constant(v) => *v,
            Profile::Linear(k) => interpolate(k, x),
            Profile::Cosine {
                base,
                amplitude,
                mode,
            } => base + amplitude * (*mode as f64 * PI * x / length).cos(),
        }
    }

    pub fn sample(&self, xs: &[f64], length: f64) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x, length)).collect()
    }

    /// True for the constant and cosine forms.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, Profile::Linear(_))
    }
}

/// Body-force potential `G(x, t) = profile(x) · signal(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyPotential {
    pub profile: Profile,
    pub signal: BoundarySignal,
}

impl Default for BodyPotential {
    fn default() -> Self {
        Self {
            profile: Profile::Constant(0.0),
            signal: BoundarySignal::Constant(1.0),
        }
    }
}

impl BodyPotential {
    pub fn eval(&self, x: f64, t: f64, length: f64) -> f64 {
        self.profile.eval(x, length) * self.signal.eval(t)
    }
}

/// Raw domain description, validated by [`build_domain`].
#[derive(Debug, Clone, PartialEq)]
pub struct DomainConfig {
    pub length: f64,
    pub n_cells: usize,
    pub alpha_left: f64,
    pub alpha_right: f64,
    pub omega_left: f64,
    pub omega_right: f64,
    pub p_star_left: BoundarySignal,
    pub p_star_right: BoundarySignal,
    pub theta_star_left: BoundarySignal,
    pub theta_star_right: BoundarySignal,
    /// Positive lower bound `θ̄` for boundary and initial temperatures.
    pub theta_bar: f64,
    pub g_potential: BodyPotential,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            length: 1.0,
            n_cells: 64,
            alpha_left: 1.0,
            alpha_right: 1.0,
            omega_left: 1.0,
            omega_right: 1.0,
            p_star_left: BoundarySignal::Constant(0.0),
            p_star_right: BoundarySignal::Constant(0.0),
            theta_star_left: BoundarySignal::Constant(273.15),
            theta_star_right: BoundarySignal::Constant(273.15),
            theta_bar: 260.0,
            g_potential: BodyPotential::default(),
        }
    }
}

/// Boundary and body data at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryValues {
    /// `[left, right]`
    pub p_star: [f64; 2],
    pub theta_star: [f64; 2],
    /// Nodal values of `G(·, t)`.
    pub g: Vec<f64>,
}

/// Uniform grid on `[0, ℓ]` with two-point boundary data.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain1D {
    length: f64,
    n_cells: usize,
    /// `[left, right]`
    pub alpha: [f64; 2],
    pub omega: [f64; 2],
    pub p_star: [BoundarySignal; 2],
    pub theta_star: [BoundarySignal; 2],
    pub theta_bar: f64,
    pub g_potential: BodyPotential,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

pub fn build_domain(cfg: &DomainConfig) -> Result<Domain1D> {
    if !(cfg.length > 0.0 && cfg.length.is_finite()) {
        return Err(Error::config("length", "domain length must be positive"));
    }
    if cfg.n_cells < 4 {
        return Err(Error::config("n_cells", "at least 4 cells are required"));
    }
    for (key, v) in [
        ("alpha_left", cfg.alpha_left),
        ("alpha_right", cfg.alpha_right),
        ("omega_left", cfg.omega_left),
        ("omega_right", cfg.omega_right),
    ] {
        if !(v >= 0.0) {
            return Err(Error::config(key, "boundary coefficient must be non-negative"));
        }
    }
    if cfg.alpha_left + cfg.alpha_right <= 0.0 {
        return Err(Error::config(
            "alpha_left/alpha_right",
            "boundary fluid permeability identically zero",
        ));
    }
    if cfg.omega_left + cfg.omega_right <= 0.0 {
        return Err(Error::config(
            "omega_left/omega_right",
            "boundary heat conductivity identically zero",
        ));
    }
    if !(cfg.theta_bar > 0.0) {
        return Err(Error::config("theta_bar", "temperature floor must be positive"));
    }
    for (key, sig) in [
        ("theta_star_left", &cfg.theta_star_left),
        ("theta_star_right", &cfg.theta_star_right),
    ] {
        let lo = sig.min_value();
        if lo < cfg.theta_bar {
            return Err(Error::config(
                key,
                format!(
                    "theta_star drops to {lo} below theta_bar = {}",
                    cfg.theta_bar
                ),
            ));
        }
    }
    Ok(Domain1D::new_unchecked(cfg))
}

impl Domain1D {
    /// Builds the grid without checking the boundary positivity conditions.
    /// Used for sealed or insulated audit configurations.
    pub fn new_unchecked(cfg: &DomainConfig) -> Self {
        let n = cfg.n_cells;
        let h = cfg.length / n as f64;
        let nodes: Vec<f64> = (0..=n)
            .map(|i| if i == n { cfg.length } else { i as f64 * h })
            .collect();
        let mut weights = vec![h; n + 1];
        weights[0] = 0.5 * h;
        weights[n] = 0.5 * h;
        Self {
            length: cfg.length,
            n_cells: n,
            alpha: [cfg.alpha_left, cfg.alpha_right],
            omega: [cfg.omega_left, cfg.omega_right],
            p_star: [cfg.p_star_left.clone(), cfg.p_star_right.clone()],
            theta_star: [cfg.theta_star_left.clone(), cfg.theta_star_right.clone()],
            theta_bar: cfg.theta_bar,
            g_potential: cfg.g_potential.clone(),
            nodes,
            weights,
        }
    }

    /// Copy with `α = ω = 0` on both ends.
    pub fn sealed(&self) -> Self {
        Self {
            alpha: [0.0; 2],
            omega: [0.0; 2],
            ..self.clone()
        }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n_cells as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Trapezoid weights, which double as the lumped mass.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, field: &[f64]) -> Result<f64> {
        if field.len() != self.n_nodes() {
            return Err(Error::LengthMismatch {
                expected: self.n_nodes(),
                got: field.len(),
            });
        }
        Ok(self.integrate_unchecked(field))
    }

    pub(crate) fn integrate_unchecked(&self, field: &[f64]) -> f64 {
        field
            .iter()
            .zip(&self.weights)
            .map(|(f, w)| f * w)
            .sum()
    }

    pub fn boundary_eval(&self, t: f64) -> BoundaryValues {
        BoundaryValues {
            p_star: [self.p_star[0].eval(t), self.p_star[1].eval(t)],
            theta_star: [self.theta_star[0].eval(t), self.theta_star[1].eval(t)],
            g: self.body_potential(t),
        }
    }

    pub fn body_potential(&self, t: f64) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|&x| self.g_potential.eval(x, t, self.length))
            .collect()
    }

    /// Index of the node at each end, `[0, n]`.
    pub fn boundary_nodes(&self) -> [usize; 2] {
        [0, self.n_cells]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Domain1D {
        build_domain(&DomainConfig {
            n_cells: n,
            ..DomainConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn grid_spacing() {
        let d = unit(64);
        assert_eq!(d.spacing(), 1.0 / 64.0);
        assert_eq!(d.n_nodes(), 65);
        assert_eq!(d.nodes()[64], 1.0);
    }

    #[test]
    fn rejects_sealed_and_cold_boundaries() {
        let err = build_domain(&DomainConfig {
            alpha_left: 0.0,
            alpha_right: 0.0,
            ..DomainConfig::default()
        })
        .unwrap_err();
        assert!(err.to_string().contains("boundary fluid permeability identically zero"));

        let err = build_domain(&DomainConfig {
            theta_star_left: BoundarySignal::Constant(250.0),
            theta_bar: 260.0,
            ..DomainConfig::default()
        })
        .unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "theta_star_left"));

        assert!(build_domain(&DomainConfig {
            n_cells: 3,
            ..DomainConfig::default()
        })
        .is_err());
        assert!(build_domain(&DomainConfig {
            length: -1.0,
            ..DomainConfig::default()
        })
        .is_err());
    }

    #[test]
    fn trapezoid_exactness() {
        let d = unit(64);
        assert_eq!(d.integrate(&vec![1.0; 65]).unwrap(), 1.0);
        let x = d.nodes().to_vec();
        assert!((d.integrate(&x).unwrap() - 0.5).abs() < 1e-15);
        let x2: Vec<f64> = x.iter().map(|x| x * x).collect();
        let err = (d.integrate(&x2).unwrap() - 1.0 / 3.0).abs();
        // h²/12 · ∫|f''| = 2/(12·64²)
        assert!(err < 1e-4 && err <= 2.0 / (12.0 * 64.0 * 64.0) + 1e-15);
        assert!(matches!(
            d.integrate(&[1.0; 3]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn refinement_reduces_error_fourfold() {
        let f = |x: f64| (2.0 * x).sin() + x.exp();
        let exact = (1.0 - 2f64.cos()) / 2.0 + 1f64.exp() - 1.0;
        let err = |n| {
            let d = unit(n);
            let v: Vec<f64> = d.nodes().iter().map(|&x| f(x)).collect();
            (d.integrate(&v).unwrap() - exact).abs()
        };
        for n in [8, 16, 32, 64] {
            let ratio = err(n) / err(2 * n);
            assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio} at n={n}");
        }
    }

    #[test]
    fn signals() {
        let c = BoundarySignal::Constant(3.5);
        assert_eq!(c.eval(0.0), 3.5);
        assert_eq!(c.eval(1e9), 3.5);
        let r = BoundarySignal::ramp(0.0, 270.0, 10.0, 280.0).unwrap();
        assert_eq!(r.eval(5.0), 275.0);
        assert_eq!(r.eval(11.0), 280.0);
        assert_eq!(r.eval(-1.0), 270.0);
        let t = BoundarySignal::table(vec![(0.0, 1.0), (1.0, 3.0), (2.0, 0.0)]).unwrap();
        assert_eq!(t.eval(0.5), 2.0);
        assert_eq!(t.eval(1.5), 1.5);
        assert_eq!(t.eval(7.0), 0.0);
        assert_eq!(t.min_value(), 0.0);
        assert!(BoundarySignal::table(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
    }

    #[test]
    fn boundary_eval_constant_signals() {
        let d = unit(8);
        let b0 = d.boundary_eval(0.0);
        let b1 = d.boundary_eval(123.0);
        assert_eq!(b0, b1);
        assert_eq!(b0.theta_star, [273.15, 273.15]);
        assert_eq!(b0.g, vec![0.0; 9]);
    }

    #[test]
    fn cosine_profile_has_zero_trapezoid_mean() {
        let d = unit(64);
        let w = Profile::Cosine {
            base: 0.0,
            amplitude: 0.05,
            mode: 1,
        }
        .sample(d.nodes(), 1.0);
        assert!(d.integrate(&w).unwrap().abs() < 1e-16);
    }
}
