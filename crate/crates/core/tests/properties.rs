use proptest::prelude::*;

use cryoporo_core::constitutive::{cutoff, ConstitutiveModel, MaterialParams};
use cryoporo_core::diagnostics::{complementarity_margin, positivity_floor};
use cryoporo_core::geometry::{build_domain, Domain1D, DomainConfig};
use cryoporo_core::solver::{
    chi_step, pressure_step, w_step, FieldState, SolverSettings, StepRates, StepReport,
};

fn model() -> ConstitutiveModel {
    ConstitutiveModel::new(MaterialParams {
        rho_l: 1.0,
        rho_s: 0.9,
        c0: 10.0,
        latent_heat: 1.0,
        beta: 0.05,
        nu: 1.0,
        lambda_m: 2.0,
        mu0: 0.5,
        gamma_c: 0.01,
        ..MaterialParams::default()
    })
}

fn domain(n: usize) -> Domain1D {
    build_domain(&DomainConfig {
        n_cells: n,
        ..DomainConfig::default()
    })
    .unwrap()
}

/// Nodal state on a 16-cell grid.
fn state() -> impl Strategy<Value = FieldState> {
    (
        prop::collection::vec(-20.0..20.0f64, 17),
        prop::collection::vec(-0.1..0.1f64, 17),
        prop::collection::vec(0.0..=1.0f64, 17),
        prop::collection::vec(200.0..350.0f64, 17),
    )
        .prop_map(|(p, w, chi, theta)| FieldState {
            t: 0.0,
            p,
            w,
            chi,
            theta,
        })
}

fn mean_free(d: &Domain1D, mut w: Vec<f64>) -> Vec<f64> {
    let mean = d.integrate(&w).unwrap() / d.length();
    w.iter_mut().for_each(|v| *v -= mean);
    w
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cutoff_splits_and_is_idempotent(z in -1e6..1e6f64, r in 1e-3..1e4f64) {
        let (q, p) = cutoff(z, r);
        prop_assert!((q + p - z).abs() <= f64::EPSILON * z.abs());
        if z.abs() <= r {
            prop_assert_eq!((q, p), (z, 0.0));
        }
        prop_assert_eq!(cutoff(q, r).0, q);
        prop_assert!(q.abs() <= r);
    }

    #[test]
    fn material_laws_are_increasing(a in -100.0..100.0f64, gap in 1e-3..10.0f64, t in 0.0..1000.0f64) {
        let m = model();
        let b = a + gap;
        prop_assert!(m.retention_eval(b).phi > m.retention_eval(a).phi);
        prop_assert!(m.mobility_eval(b).1 > m.mobility_eval(a).1);
        prop_assert!(m.heat_eval(t + gap).unwrap().kirchhoff > m.heat_eval(t).unwrap().kirchhoff);
    }

    #[test]
    fn mobility_inverse_round_trips(p in -1e8..1e8f64) {
        let m = model();
        let back = m.m_inverse(m.mobility_eval(p).1);
        prop_assert!((back - p).abs() <= 1e-14 * p.abs().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn kirchhoff_inverse_round_trips(theta in 1e-3..2000.0f64) {
        let m = model();
        let z = m.heat_eval(theta).unwrap().kirchhoff;
        let back = m.k_inverse(z).unwrap();
        prop_assert!((back - theta).abs() <= 1e-10 * theta);
    }

    #[test]
    fn integral_is_linear_and_monotone(
        f in prop::collection::vec(-10.0..10.0f64, 33),
        g in prop::collection::vec(0.0..10.0f64, 33),
        a in -5.0..5.0f64,
        b in -5.0..5.0f64,
    ) {
        let d = domain(32);
        let comb: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
        let lhs = d.integrate(&comb).unwrap();
        let rhs = a * d.integrate(&f).unwrap() + b * d.integrate(&g).unwrap();
        let scale = a.abs() * d.integrate(&f.iter().map(|v| v.abs()).collect::<Vec<_>>()).unwrap()
            + b.abs() * d.integrate(&g).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * scale.max(f64::MIN_POSITIVE));
        prop_assert!(d.integrate(&g).unwrap() >= 0.0);
    }

    #[test]
    fn floor_is_positive_and_nonincreasing(t in 0.0..1e3f64, dt in 0.0..1e3f64, bar in 1.0..300.0f64) {
        let prm = model().params().clone();
        let a = positivity_floor(t, &prm, bar);
        let b = positivity_floor(t + dt, &prm, bar);
        prop_assert!(a > 0.0 && b > 0.0 && b <= a && a <= bar);
    }

    #[test]
    fn phase_stays_confined_and_complementary(s in state(), dt in 1e-4..1.0f64) {
        let m = model();
        let u = chi_step(&s, &m, dt);
        prop_assert!(u.chi.iter().all(|c| (0.0..=1.0).contains(c)));
        let report = StepReport {
            rates: StepRates {
                chi_t: u.rate.clone(),
                force: u.force.clone(),
                gamma: u.gamma.clone(),
                ..StepRates::default()
            },
            ..StepReport::default()
        };
        let new = FieldState { chi: u.chi.clone(), ..s.clone() };
        let (margin, scale) = complementarity_margin(&new, &report);
        prop_assert!(margin >= -1e-9 * scale, "margin {} scale {}", margin, scale);
    }

    #[test]
    fn volume_step_keeps_zero_mean(mut s in state(), dt in 1e-4..1.0f64) {
        let m = model();
        let d = domain(16);
        s.w = mean_free(&d, s.w);
        let (w, _) = w_step(&s, &s.chi, &d, &m, dt, dt);
        let wmax = w.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        prop_assert!(d.integrate(&w).unwrap().abs() <= 1e-12 * wmax);
    }

    #[test]
    fn pressure_dissipation_is_nonnegative(p in prop::collection::vec(-1e3..1e3f64, 17)) {
        let m = model();
        let d = domain(16);
        let rates = StepRates::default().with_pressure(&p, &d, &m);
        prop_assert!(rates.element_dissipation.iter().all(|&v| v >= 0.0));
        prop_assert!(rates.nodal_dissipation(&d).iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn sealed_pressure_step_conserves_fluid(s in state(), chi_new in prop::collection::vec(0.0..=1.0f64, 17)) {
        let m = model();
        let d = domain(16).sealed();
        let prm = m.params();
        let stored = |p: &[f64], w: &[f64], chi: &[f64]| {
            let v: Vec<f64> = (0..17)
                .map(|i| prm.mass_weight(chi[i]) * (m.retention_cut(p[i]).phi + w[i]))
                .collect();
            d.integrate(&v).unwrap()
        };
        let dt = 1e-3;
        let before = stored(&s.p, &s.w, &s.chi);
        let u = pressure_step(&s, &chi_new, &s.w, &d, &m, dt, dt, &SolverSettings::default()).unwrap();
        let after = stored(&u.p, &s.w, &chi_new);
        prop_assert!((after - before).abs() <= 1e-9 * before.abs());
    }
}
