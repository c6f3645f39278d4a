use approx::assert_relative_eq;
use cryoporo_core::constitutive::{ConstitutiveModel, MaterialParams};

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = 2 * panels;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// Retention law rebuilt from its defining integrals.
struct Reference {
    delta: f64,
    amp: f64,
    phi_flat: f64,
    norm: f64,
}

impl Reference {
    fn new(p: &MaterialParams) -> Self {
        let d = p.delta;
        let g = |t: f64| (1.0 + t * t).powf(-0.5 * (1.0 + d));
        // Tail over [1, ∞) after t = 1/s, s = r^{1/δ}: smooth on [0, 1].
        let tail = |r: f64| (1.0 + r.powf(2.0 / d)).powf(-0.5 * (1.0 + d)) / d;
        let norm = 2.0 * (simpson(g, 0.0, 1.0, 2000) + simpson(tail, 0.0, 1.0, 20000));
        Self {
            delta: d,
            amp: 1.0 - p.c_s - p.phi_flat,
            phi_flat: p.phi_flat,
            norm,
        }
    }

    fn density(&self, t: f64) -> f64 {
        (1.0 + t * t).powf(-0.5 * (1.0 + self.delta))
    }

    fn phi(&self, p: f64) -> f64 {
        let mass = simpson(|t| self.density(t), 0.0, p, 4000);
        self.phi_flat + self.amp * (0.5 + mass / self.norm)
    }

    /// `V(p) = ∫_0^p t φ'(t) dt`.
    fn potential(&self, p: f64) -> f64 {
        self.amp / self.norm * simpson(|t| t * self.density(t), 0.0, p, 4000)
    }
}

#[test]
fn retention_matches_quadrature_at_plus_minus_three() {
    let prm = MaterialParams::default();
    let m = ConstitutiveModel::new(prm.clone());
    let r = Reference::new(&prm);
    for p in [3.0, -3.0, 0.7] {
        let got = m.retention_eval(p);
        assert_relative_eq!(got.phi, r.phi(p), max_relative = 1e-10);
        assert_relative_eq!(got.potential, r.potential(p), max_relative = 1e-10);
        let big_phi = simpson(|t| r.phi(t), 0.0, p, 400);
        assert_relative_eq!(got.big_phi, big_phi, max_relative = 1e-10);
    }
    let (up, down) = (m.retention_eval(3.0).potential, m.retention_eval(-3.0).potential);
    assert!(up > 0.0);
    assert_relative_eq!(up, down, max_relative = 1e-15);
}

#[test]
fn retention_approaches_its_upper_limit() {
    let prm = MaterialParams::default();
    let m = ConstitutiveModel::new(prm.clone());
    let top = 1.0 - prm.c_s;
    let mut prev = m.retention_eval(1.0).phi;
    for k in 1..=30 {
        let phi = m.retention_eval(10f64.powi(k)).phi;
        assert!(phi > prev && phi < top);
        prev = phi;
    }
    assert!(top - prev < 1e-5);
}

#[test]
fn sampled_monotonicity() {
    let m = ConstitutiveModel::new(MaterialParams::default());
    let ps: Vec<f64> = (0..1000).map(|i| -100.0 + 200.0 * i as f64 / 999.0).collect();
    for w in ps.windows(2) {
        assert!(m.retention_eval(w[1]).phi > m.retention_eval(w[0]).phi);
        assert!(m.mobility_eval(w[1]).1 > m.mobility_eval(w[0]).1);
    }
    let ts: Vec<f64> = (0..1000).map(|i| 1000.0 * i as f64 / 999.0).collect();
    for w in ts.windows(2) {
        assert!(m.heat_eval(w[1]).unwrap().kirchhoff > m.heat_eval(w[0]).unwrap().kirchhoff);
    }
}

#[test]
fn derivatives_match_central_differences() {
    let m = ConstitutiveModel::new(MaterialParams::default());
    for i in 0..200 {
        let p = -50.0 + 100.0 * i as f64 / 199.0;
        let h = 1e-5 * p.abs().max(1.0);
        let plus = m.retention_eval(p + h);
        let minus = m.retention_eval(p - h);
        let here = m.retention_eval(p);
        let d_big_phi = (plus.big_phi - minus.big_phi) / (2.0 * h);
        assert!((d_big_phi - here.phi).abs() <= 1e-6 * here.phi.abs().max(1.0));
        let d_v = (plus.potential - minus.potential) / (2.0 * h);
        assert!((d_v - p * here.dphi).abs() <= 1e-6 * (p * here.dphi).abs().max(1.0));
        let d_phi = (plus.phi - minus.phi) / (2.0 * h);
        assert!((d_phi - here.dphi).abs() <= 1e-6 * here.dphi.abs().max(1.0));
    }
}

#[test]
fn kirchhoff_round_trip_for_listed_temperatures() {
    let m = ConstitutiveModel::new(MaterialParams::default());
    for theta in [0.1, 1.0, 350.0] {
        let z = m.heat_eval(theta).unwrap().kirchhoff;
        assert_relative_eq!(m.k_inverse(z).unwrap(), theta, max_relative = 1e-10);
    }
}
