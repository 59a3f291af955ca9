use panelsurv_core::chain::moment_matched_closed_form;
use panelsurv_core::{fold_chain, posterior_moments_oracle, posterior_update, GammaParams, XiPair};

fn pair(xi: f64, eps: f64) -> XiPair {
    XiPair { xi, xi_prime: xi / (1.0 - eps), epsilon: eps, tail: false }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn matched_moments_equal_quadrature_moments() {
    for &shape in &[0.5, 1.0, 2.0, 5.0] {
        for &eps in &[0.01, 0.1, 0.5, 0.9, 0.99] {
            for &xi in &[1.0, 3.7] {
                let prior = GammaParams::new(shape, 1.0).unwrap();
                let xp = pair(xi, eps);
                let post = posterior_update(prior, xp, true);
                let (m1, m2) = posterior_moments_oracle(prior, xp, true).unwrap();
                let (g1, g2) = post.raw_moments();
                assert!(
                    rel(g1, m1) < 1e-8 && rel(g2, m2) < 1e-8,
                    "shape {shape} eps {eps} xi {xi}: ({g1}, {g2}) vs ({m1}, {m2})"
                );
            }
        }
    }
}

#[test]
fn worked_point() {
    let post = posterior_update(GammaParams::new(1.0, 1.0).unwrap(), pair(1.0, 0.5), true);
    assert!(rel(post.shape, 1.8) < 1e-12 && rel(post.rate, 1.2) < 1e-12);
    let (m1, m2) = posterior_moments_oracle(GammaParams::new(1.0, 1.0).unwrap(), pair(1.0, 0.5), true).unwrap();
    assert!(rel(m1, 1.5) < 1e-10 && rel(m2, 3.5) < 1e-10);
}

#[test]
fn closed_form_approaches_both_limits() {
    for &shape in &[0.5, 1.0, 2.0, 5.0] {
        for &xi in &[0.5, 1.0, 4.0] {
            let small = moment_matched_closed_form(shape, xi, 1e-6);
            let xi_prime = xi / (1.0 - 1e-6);
            assert!(rel(small.shape, shape + 1.0) < 1e-3);
            assert!(rel(small.rate, 0.5 * (xi + xi_prime)) < 1e-3);
            if shape >= 1.0 {
                let large = moment_matched_closed_form(shape, xi, 1.0 - 1e-10);
                assert!(rel(large.shape, shape) < 1e-3 && rel(large.rate, xi) < 1e-3, "{large:?}");
            }
        }
    }
}

#[test]
fn regimes_are_continuous_at_the_switch_points() {
    for &shape in &[0.5, 1.0, 3.0] {
        let below = posterior_update(GammaParams::new(shape, 1.0).unwrap(), pair(1.0, 1e-4 * (1.0 - 1e-9)), true);
        let above = posterior_update(GammaParams::new(shape, 1.0).unwrap(), pair(1.0, 1e-4 * (1.0 + 1e-9)), true);
        assert!(rel(below.shape, above.shape) < 1e-4 && rel(below.rate, above.rate) < 1e-4);
    }
}

#[test]
fn one_event_chain_states() {
    use panelsurv_core::{DiscreteBaselineHazard, LinearTransform, Spell};
    let hz = DiscreteBaselineHazard::new(1.0, vec![1.0, 1.0], vec![true, true]).unwrap();
    let states = fold_chain(
        GammaParams::new(1.0, 1.0).unwrap(),
        &[Spell::new(0.0, true, vec![0.0])],
        &LinearTransform::new(vec![0.0]),
        &hz,
    )
    .unwrap();
    assert_eq!(states[0], GammaParams::new(1.0, 1.0).unwrap());
    assert!(rel(states[1].shape, 1.8) < 1e-12 && rel(states[1].rate, 1.2) < 1e-12);
}
