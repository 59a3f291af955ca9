use panelsurv_core::metrics::{concordance, integrated_brier, integrated_brier_curves, SurvivalCurve};
use panelsurv_core::simulation::{generate, oracle_model, Setup};
use panelsurv_core::{fit, FitConfig};

#[test]
fn generating_model_beats_a_coin_flip_on_brier() {
    let mut cfg = Setup::LogHazard.config(17);
    cfg.n = 2000;
    let ds = generate(&cfg).unwrap();
    let oracle = oracle_model(&cfg, 80).unwrap();
    let y = ds.outcomes();
    let d: Vec<bool> = ds.spells().map(|s| s.event).collect();
    for horizon in [5.0, 20.0, 60.0] {
        let ours = integrated_brier(&oracle, &ds, horizon).unwrap();
        let half = vec![SurvivalCurve::constant(1.0, 80, 0.5); ds.n_spells()];
        let coin = integrated_brier_curves(&half, &y, &d, 1.0, horizon).unwrap();
        assert!(ours <= coin, "horizon {horizon}: {ours} vs {coin}");
    }
}

#[test]
fn fitted_model_ranks_its_training_data() {
    let ds = generate(&Setup::LogHazard.config(23)).unwrap();
    let m = fit(&ds, &FitConfig::default()).unwrap();
    assert!(concordance(&m, &ds).unwrap() > 0.5);
}

#[test]
fn fitted_model_is_close_to_the_oracle_on_brier() {
    let cfg = Setup::LogHazard.config(29);
    let train = generate(&cfg).unwrap();
    let test = generate(&Setup::LogHazard.config(30)).unwrap();
    let m = fit(&train, &FitConfig::default()).unwrap();
    let horizon = (m.delta.len() as f64).min(20.0);
    let fitted = integrated_brier(&m, &test, horizon).unwrap();
    let oracle = integrated_brier(&oracle_model(&cfg, 80).unwrap(), &test, horizon).unwrap();
    assert!(fitted < oracle + 0.02, "{fitted} vs {oracle}");
}
