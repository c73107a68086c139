use cfal_core::hypothesis::FiniteWorld;
use cfal_core::sim::{
    certainty_policy, dot, uncertainty_policy, Environment, LinearEnvironment, LinearWorld, LinearWorldConfig,
};
use proptest::prelude::*;

#[test]
fn revealing_a_label_says_nothing_about_it() {
    let world = FiniteWorld::new(vec![0.3, 0.3, 0.4], vec![0.2, 0.5, 0.9], vec![0.25, 0.6, 0.9]).unwrap();
    let mut env = Environment::new(world.clone(), 99).unwrap();
    let batch = env.generate_logged(200_000);
    for x in 0..world.len() {
        // Pr(Y = +1 | X = x, Z = z) for z in {0, 1} against label_prob(x).
        for z in [false, true] {
            let ys: Vec<i8> = batch
                .samples
                .iter()
                .zip(&batch.truth)
                .filter(|(s, _)| s.x == x && s.z == z)
                .map(|(_, &y)| y)
                .collect();
            let n = ys.len() as f64;
            let p = ys.iter().filter(|&&y| y == 1).count() as f64 / n;
            let q = world.label_prob()[x];
            let se = (q * (1.0 - q) / n).sqrt();
            assert!((p - q).abs() <= 4.0 * se, "x={x} z={z}: {p} vs {q}");
        }
    }
    assert_eq!(env.oracle_calls(), 0);
}

#[test]
fn linear_world_matches_its_description() {
    let config = LinearWorldConfig::default();
    let world = LinearWorld::generate(config.clone(), 3).unwrap();
    assert_eq!(world.features.len(), config.n_points);
    assert!(world.features.iter().all(|x| x.len() == config.dim && x.iter().all(|v| (0.0..1.0).contains(v))));
    let flipped = world
        .features
        .iter()
        .zip(&world.labels)
        .filter(|(x, &y)| (dot(&world.separator, x) - world.bias >= 0.0) != (y == 1))
        .count() as f64
        / config.n_points as f64;
    let se = (config.noise * (1.0 - config.noise) / config.n_points as f64).sqrt();
    assert!((flipped - config.noise).abs() <= 4.0 * se, "flip rate {flipped}");

    let mut all: Vec<usize> = world.holdout.iter().chain(&world.train).chain(&world.test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..config.n_points).collect::<Vec<_>>());
}

#[test]
fn policies_ramp_in_opposite_directions() {
    let world = LinearWorld::generate(LinearWorldConfig { n_points: 1500, ..Default::default() }, 4).unwrap();
    let cert = certainty_policy(&world).unwrap();
    let unc = uncertainty_policy(&world).unwrap();
    let mut pts: Vec<&Vec<f64>> = world.features.iter().collect();
    pts.sort_by(|a, b| cert.margin(a).partial_cmp(&cert.margin(b)).unwrap());
    for pair in pts.windows(2) {
        assert!(cert.propensity(pair[0]) <= cert.propensity(pair[1]));
        assert!(unc.propensity(pair[0]) >= unc.propensity(pair[1]));
    }
    for x in &world.features {
        for q in [cert.propensity(x), unc.propensity(x)] {
            assert!((world.config.q_min..=1.0).contains(&q));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn environments_replay_exactly(seed in any::<u64>(), m in 0usize..300, n in 0usize..100) {
        let world = FiniteWorld::new(vec![0.1, 0.2, 0.7], vec![0.0, 0.5, 1.0], vec![0.05, 0.5, 1.0]).unwrap();
        let run = |seed| {
            let mut env = Environment::new(world.clone(), seed).unwrap();
            let batch = env.generate_logged(m);
            let reveals = env.logged_reveals();
            let mut stream = env.stream_online(n);
            let mut seen = Vec::new();
            for i in 0..n {
                let x = stream.next_instance().unwrap();
                let y = if i % 3 == 0 { Some(stream.query().unwrap()) } else { None };
                seen.push((x, y));
            }
            (batch, reveals, seen, env.oracle_calls())
        };
        let (a, b) = (run(seed), run(seed));
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.3, n.div_ceil(3));
    }

    #[test]
    fn linear_splits_replay_exactly(seed in any::<u64>()) {
        let config = LinearWorldConfig { n_points: 300, ..Default::default() };
        let world = LinearWorld::generate(config, seed).unwrap();
        let again = LinearWorld::generate(world.config.clone(), seed).unwrap();
        prop_assert_eq!(&world.features, &again.features);
        prop_assert_eq!(&world.labels, &again.labels);
        if let Ok(policy) = certainty_policy(&world) {
            let a = LinearEnvironment::new(&world, &policy, seed ^ 1);
            let b = LinearEnvironment::new(&world, &policy, seed ^ 1);
            prop_assert_eq!(&a.logged, &b.logged);
            prop_assert_eq!(&a.online, &b.online);
            prop_assert_eq!(a.logged.len() + a.online.len(), world.train.len());
        }
    }
}
