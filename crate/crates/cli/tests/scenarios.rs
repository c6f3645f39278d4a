use cryoporo::presets;

/// χ at the left boundary node after every accepted step.
fn left_chi(preset: &str) -> Vec<f64> {
    let cfg = presets::load(preset).unwrap();
    let sim = cfg.run.simulation().unwrap();
    let mut out = vec![sim.state.chi[0]];
    sim.run_with(|v| {
        out.push(v.new.chi[0]);
        Ok(())
    })
    .unwrap();
    out
}

#[test]
fn freezing_front_freezes_the_cold_end_monotonically() {
    let chi = left_chi("freezing-front");
    assert!(chi.windows(2).all(|w| w[1] <= w[0]));
    assert!(chi.last().unwrap() < chi.first().unwrap());
}

#[test]
fn thaw_melts_the_warm_end_monotonically() {
    let chi = left_chi("thaw");
    assert!(chi.windows(2).all(|w| w[1] >= w[0]));
    assert!(chi.last().unwrap() > chi.first().unwrap());
}
