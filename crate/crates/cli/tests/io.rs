use panelsurv::csv_io::{data_hash, read_panel, read_panel_csv, write_panel, write_panel_csv};
use panelsurv::harness::simulate;
use panelsurv::model_file::{read_model, write_model, ModelFile, Provenance};
use panelsurv_core::simulation::{generate, Setup};
use panelsurv_core::{fit, FitConfig};

#[test]
fn csv_round_trip_is_identity() {
    for setup in Setup::ALL {
        let mut cfg = setup.config(17);
        cfg.n = 30;
        let ds = generate(&cfg).unwrap();
        let mut buf = Vec::new();
        write_panel(&ds, &mut buf).unwrap();
        let back = read_panel(buf.as_slice(), cfg.psi).unwrap();
        assert_eq!(back, ds, "setup {}", setup.label());
        let mut again = Vec::new();
        write_panel(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }
}

#[test]
fn fractional_grid_stays_exact() {
    let mut cfg = Setup::LogHazard.config(5);
    cfg.n = 40;
    cfg.psi = 0.25;
    cfg.y_max = 20.0;
    let ds = generate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    write_panel_csv(&ds, &path).unwrap();
    let back = read_panel_csv(&path, 0.25).unwrap();
    for (a, b) in ds.spells().zip(back.spells()) {
        assert_eq!(a.y.to_bits(), b.y.to_bits());
        assert_eq!((a.y / 0.25).fract(), 0.0);
    }
    assert_eq!(data_hash(&ds), data_hash(&back));
}

#[test]
fn shuffled_rows_read_to_the_same_panel() {
    let mut cfg = Setup::LogHazard.config(8);
    cfg.n = 12;
    let ds = generate(&cfg).unwrap();
    let mut buf = Vec::new();
    write_panel(&ds, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let header = lines.remove(0);
    lines.reverse();
    let shuffled = format!("{header}\n{}\n", lines.join("\n"));
    assert_eq!(read_panel(shuffled.as_bytes(), 1.0).unwrap(), ds);
}

#[test]
fn parallel_simulation_matches_sequential() {
    for setup in Setup::ALL {
        let cfg = setup.config(99);
        assert_eq!(simulate(&cfg).unwrap(), generate(&cfg).unwrap(), "setup {}", setup.label());
    }
}

#[test]
fn fitted_model_round_trips_field_by_field() {
    let mut cfg = Setup::LogHazard.config(3);
    cfg.n = 120;
    let ds = generate(&cfg).unwrap();
    let model = fit(&ds, &FitConfig::default()).unwrap();
    let prov = Provenance { seed: Some(3), data_hash: data_hash(&ds), config: serde_json::json!({}) };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    write_model(&ModelFile::new(&model, prov), &path).unwrap();
    let back = read_model(&path).unwrap().model();
    assert_eq!(back.beta, model.beta);
    assert_eq!(back.delta, model.delta);
    assert_eq!(back.free_mask, model.free_mask);
    assert_eq!(back.alpha.to_bits(), model.alpha.to_bits());
    assert_eq!(back.kappa.to_bits(), model.kappa.to_bits());
    assert_eq!(back.loglik.to_bits(), model.loglik.to_bits());
    assert_eq!(back.normalization, model.normalization);
    assert_eq!(back.iterations, model.iterations);
    assert_eq!(back.converged, model.converged);
}
