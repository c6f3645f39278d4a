use cryoporo_core::constitutive::{ConstitutiveModel, MaterialParams};
use cryoporo_core::galerkin::{compare, GalerkinOracle, OracleTolerances};
use cryoporo_core::geometry::{build_domain, BoundarySignal, DomainConfig, Profile};
use cryoporo_core::scenario::RunConfig;

fn params() -> MaterialParams {
    MaterialParams {
        rho_l: 1.0,
        rho_s: 0.9,
        c0: 10.0,
        latent_heat: 1.0,
        beta: 0.01,
        nu: 1.0,
        lambda_m: 1.0,
        mu0: 1.0,
        kappa_c: 0.4,
        gamma_c: 0.01,
        ..MaterialParams::default()
    }
}

fn cosine(base: f64, amplitude: f64) -> Profile {
    Profile::Cosine {
        base,
        amplitude,
        mode: 1,
    }
}

/// Smooth perturbation of a uniform state, small enough to run quickly.
fn perturbed() -> RunConfig {
    let tc = 273.15;
    let mut cfg = RunConfig {
        material: params(),
        n_modes: 6,
        ..RunConfig::default()
    };
    cfg.domain.n_cells = 32;
    cfg.domain.theta_bar = 250.0;
    cfg.domain.p_star_left = BoundarySignal::Constant(1.0);
    cfg.domain.p_star_right = BoundarySignal::Constant(1.0);
    cfg.domain.alpha_left = 0.05;
    cfg.domain.alpha_right = 0.05;
    cfg.initial.p0 = cosine(1.0, 0.05);
    cfg.initial.w0 = cosine(0.0, 0.05);
    cfg.initial.chi0 = cosine(0.5, 0.025);
    cfg.initial.theta0 = cosine(tc, 0.05 * tc);
    cfg.time.t_end = 0.1;
    cfg.output.snapshot_interval = 0.05;
    cfg
}

/// Uniform state as four scalars `(p, θ, χ, w)`.
type Scalars = [f64; 4];

/// Constants-only reduction of the model, derived by hand.
fn scalar_rhs(m: &ConstitutiveModel, d: &DomainConfig, p_star: [f64; 2], theta_star: [f64; 2], y: Scalars) -> Scalars {
    let prm = m.params();
    let [p, theta, chi, w] = y;
    let len = d.length;
    let ret = m.retention_eval(p);
    let s = prm.mass_weight(chi);
    let gamma = prm.gamma_c * (1.0 + theta);
    let force = (1.0 - prm.rho_star()) * (ret.big_phi + p * w) + prm.latent_heat * (theta / prm.theta_c - 1.0);
    let chi_t = force / gamma;
    let w_t = -prm.lambda_m * w / prm.nu;
    let alpha = [d.alpha_left, d.alpha_right];
    let omega = [d.omega_left, d.omega_right];
    let influx: f64 = (0..2).map(|b| alpha[b] * (p_star[b] - p)).sum::<f64>() / len;
    let p_t = (influx - (1.0 - prm.rho_star()) * chi_t * (ret.phi + w) - s * w_t) / (s * ret.dphi);
    let heat_in: f64 = (0..2).map(|b| omega[b] * (theta_star[b] - theta)).sum::<f64>() / len;
    let theta_t = (heat_in + prm.nu * w_t * w_t + gamma * chi_t * chi_t
        - prm.latent_heat / prm.theta_c * theta * chi_t
        - prm.beta * theta * w_t)
        / prm.c0;
    [p_t, theta_t, chi_t, w_t]
}

fn rk4(f: impl Fn(Scalars) -> Scalars, mut y: Scalars, t_end: f64, steps: usize) -> Scalars {
    let h = t_end / steps as f64;
    let add = |a: Scalars, b: Scalars, c: f64| [0, 1, 2, 3].map(|i| a[i] + c * b[i]);
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f(add(y, k1, h / 2.0));
        let k3 = f(add(y, k2, h / 2.0));
        let k4 = f(add(y, k3, h));
        y = [0, 1, 2, 3].map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    y
}

#[test]
fn constant_mode_matches_scalar_integration() {
    let tc = 273.15;
    let cfg = DomainConfig {
        n_cells: 8,
        alpha_left: 1.0,
        alpha_right: 0.5,
        omega_left: 1.0,
        omega_right: 2.0,
        p_star_left: BoundarySignal::Constant(1.0),
        p_star_right: BoundarySignal::Constant(1.0),
        theta_star_left: BoundarySignal::Constant(tc + 2.0),
        theta_star_right: BoundarySignal::Constant(tc + 2.0),
        theta_bar: 250.0,
        ..DomainConfig::default()
    };
    let model = ConstitutiveModel::new(params());
    let oracle = GalerkinOracle::new(model.clone(), build_domain(&cfg).unwrap(), 0).unwrap();
    let init = oracle.project(|_| 0.0, |_| 0.0, |_| 0.5, |_| tc - 1.0).unwrap();
    let t_end = 0.2;
    let (snaps, _) = oracle.integrate(&init, &[t_end], OracleTolerances::default()).unwrap();
    let end = &snaps[0];

    let reference = rk4(
        |y| scalar_rhs(&model, &cfg, [1.0; 2], [tc + 2.0; 2], y),
        [0.0, tc - 1.0, 0.5, 0.0],
        t_end,
        20_000,
    );
    let got = [end.p[3], end.theta[3], end.chi[3], end.w[3]];
    for i in 0..4 {
        assert!(
            (got[i] - reference[i]).abs() <= 1e-8 * reference[i].abs().max(1.0),
            "component {i}: oracle {} vs scalar {}",
            got[i],
            reference[i]
        );
    }
    assert!(reference[0] > 0.0 && reference[1] > tc - 1.0);
}

fn equilibrium_config(chi: f64) -> RunConfig {
    let mut cfg = RunConfig {
        material: params(),
        n_modes: 4,
        ..RunConfig::default()
    };
    let theta = 1.1 * 273.15;
    cfg.domain.n_cells = 16;
    for s in [&mut cfg.domain.p_star_left, &mut cfg.domain.p_star_right] {
        *s = BoundarySignal::Constant(1.0);
    }
    for s in [&mut cfg.domain.theta_star_left, &mut cfg.domain.theta_star_right] {
        *s = BoundarySignal::Constant(theta);
    }
    cfg.initial.p0 = Profile::Constant(1.0);
    cfg.initial.chi0 = Profile::Constant(chi);
    cfg.initial.theta0 = Profile::Constant(theta);
    cfg.time.t_end = 0.5;
    cfg.output.snapshot_interval = 0.25;
    cfg
}

#[test]
fn equilibrium_has_zero_rates() {
    let (oracle, s) = equilibrium_config(1.0).oracle().unwrap();
    let r = oracle.rhs(&s, 0.0).unwrap();
    // Rates are measured against the size of the component they change; the
    // Kirchhoff coefficients are of order 1e5 here.
    let sup = |v: &[f64]| v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let pairs: [(&[f64], &[f64]); 6] = [
        (&r.v, &s.v_coeffs),
        (&r.z, &s.z_coeffs),
        (&r.w_nodes, &[]),
        (&r.chi_nodes, &s.chi_nodes),
        (&r.w_obs, &[]),
        (&r.chi_obs, &s.chi_obs),
    ];
    for (rate, state) in pairs {
        let worst = rate.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let bound = 1e-10 * sup(state);
        assert!(worst <= bound, "rate {worst:e} above {bound:e}");
    }
}

#[test]
fn equilibrium_is_kept() {
    let cfg = equilibrium_config(1.0);
    let (oracle, s) = cfg.oracle().unwrap();
    let times = cfg.run_settings().snapshot_times();
    let (snaps, _) = oracle.integrate(&s, &times, OracleTolerances::default()).unwrap();
    let first = &snaps[0];
    for snap in &snaps {
        assert!(snap.max_abs_diff(first) < 1e-8);
    }
}

#[test]
fn raising_outer_pressure_feeds_the_mean_mode() {
    let low = equilibrium_config(1.0);
    let mut high = low.clone();
    high.domain.p_star_left = BoundarySignal::Constant(2.0);
    let rate = |cfg: &RunConfig| {
        let (o, s) = cfg.oracle().unwrap();
        o.rhs(&s, 0.0).unwrap().v[0]
    };
    assert!(rate(&high) > rate(&low));
    assert!(rate(&high) > 0.0);
}

#[test]
fn tighter_tolerance_changes_little() {
    let cfg = perturbed();
    let (oracle, s) = cfg.oracle().unwrap();
    let run = |tol: f64| {
        let t = OracleTolerances {
            atol: tol,
            rtol: tol,
            ..OracleTolerances::default()
        };
        oracle.integrate(&s, &[cfg.time.t_end], t).unwrap().0.pop().unwrap()
    };
    let diff = run(1e-6).max_abs_diff(&run(1e-9));
    assert!(diff <= 1e-5, "terminal change {diff:e}");
}

#[test]
fn energy_identity_holds_along_a_run() {
    let cfg = perturbed();
    let (oracle, s) = cfg.oracle().unwrap();
    assert!(oracle.energy_balance(&s).unwrap().relative_defect() <= 1e-6);
    let (_, end) = oracle
        .integrate(&s, &[0.05], OracleTolerances::default())
        .unwrap();
    let bal = oracle.energy_balance(&end).unwrap();
    assert!(bal.relative_defect() <= 1e-6, "defect {:e}", bal.relative_defect());
}

#[test]
fn volume_mean_and_phase_bounds_are_kept() {
    let cfg = perturbed();
    let (oracle, s) = cfg.oracle().unwrap();
    let (_, wq) = oracle.quadrature();
    let mean = |w: &[f64]| w.iter().zip(wq).map(|(a, b)| a * b).sum::<f64>();
    let times = cfg.run_settings().snapshot_times();
    let (snaps, end) = oracle.integrate(&s, &times, OracleTolerances::default()).unwrap();
    assert!(mean(&end.w_nodes).abs() <= 1e-10);
    assert!(end.chi_nodes.iter().all(|c| (0.0..=1.0).contains(c)));
    assert!(snaps.iter().all(|f| f.chi.iter().all(|c| (0.0..=1.0).contains(c))));
}

#[test]
fn more_modes_move_the_oracle_toward_the_solver() {
    let mut cfg = perturbed();
    cfg.time.dt = 2.5e-4;
    let sim = cfg.simulation().unwrap().run().unwrap();
    let domain = cfg.build_domain().unwrap();
    let times = cfg.run_settings().snapshot_times();
    let mut errs = Vec::new();
    for n in [2, 4, 8] {
        cfg.n_modes = n;
        let (o, s) = cfg.oracle().unwrap();
        let (snaps, _) = o.integrate(&s, &times, OracleTolerances::default()).unwrap();
        errs.push(compare(&snaps, &sim.snapshots, &domain).unwrap().max_rel_l2());
    }
    assert!(errs[1] < errs[0] && errs[2] <= errs[1], "{errs:?}");
}
