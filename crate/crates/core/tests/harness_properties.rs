use cfal_core::harness::{run_experiment, sweep, ExperimentConfig, CSV_HEADER};

fn config(body: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(body).unwrap()
}

#[test]
fn csv_schema_is_stable() {
    let out = run_experiment(&config(
        r#"{"mode":"exact","fixture":{"name":"example2"},"algorithm":"active_iw","m":300,"n":100,"trials":2,"seed":1}"#,
    ))
    .unwrap();
    let mut lines = out.csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(CSV_HEADER, "algorithm,params,trial,labels_used,test_error");
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 5, "{line}");
        assert_eq!(f[0], "active_iw");
        f[2].parse::<usize>().unwrap();
        f[3].parse::<usize>().unwrap();
        let e: f64 = f[4].parse().unwrap();
        // full precision: the printed value parses back to the same float
        assert_eq!(e.to_string(), f[4]);
    }
}

#[test]
fn adding_grid_points_leaves_existing_trials_alone() {
    let one = sweep(&config(
        r#"{"mode":"exact","fixture":{"name":"table1"},"algorithm":"vc_active","gamma1":[4],"m":60,"n":60,"trials":4,"seed":9}"#,
    ))
    .unwrap();
    let three = sweep(&config(
        r#"{"mode":"exact","fixture":{"name":"table1"},"algorithm":"vc_active","gamma1":[1,4,16],"m":60,"n":60,"trials":4,"seed":9}"#,
    ))
    .unwrap();
    let (p, auc) = one.table[0];
    let again = three.table.iter().find(|(q, _)| *q == p).unwrap();
    assert_eq!(auc.to_bits(), again.1.to_bits());

    let lin = |grid: &str| {
        sweep(&config(&format!(
            r#"{{"mode":"linear","linear":{{"world":{{"n_points":600,"dim":6}},"policy":"certainty"}},"algorithm":"vc_active","m":0,"n":0,"c_grid":{grid},"eta_grid":[0.01],"trials":2,"seed":4}}"#
        )))
        .unwrap()
    };
    let (a, b) = (lin("[0.04]"), lin("[0.01,0.04,0.16]"));
    assert_eq!(a.table[0].1.to_bits(), b.table[1].1.to_bits());
}

#[test]
fn sweep_reports_the_smallest_auc() {
    let out = sweep(&config(
        r#"{"mode":"exact","fixture":{"name":"consistency"},"algorithm":"vc_active","gamma1":[0.5,2,8],"m":100,"n":100,"trials":3,"seed":2}"#,
    ))
    .unwrap();
    let min = out.table.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    assert_eq!(out.best_auc, min);
    assert_eq!(out.best_trials.len(), 3);
    assert_eq!(out.table_csv.lines().filter(|l| l.ends_with(",true")).count(), 1);
}
