use cfal_core::active::Ablations;
use cfal_core::linear::{run_linear, Algorithm, DisagreementScale};
use cfal_core::sim::{certainty_policy, uncertainty_policy, LinearEnvironment, LinearWorld, LinearWorldConfig};
use proptest::prelude::*;

fn small_world(seed: u64) -> LinearWorld {
    LinearWorld::generate(LinearWorldConfig { n_points: 800, dim: 8, ..Default::default() }, seed).unwrap()
}

#[test]
fn huge_capacity_queries_everything_the_gate_allows() {
    let world = small_world(1);
    for policy in [certainty_policy(&world).unwrap(), uncertainty_policy(&world).unwrap()] {
        let env = LinearEnvironment::new(&world, &policy, 2);
        for scale in [DisagreementScale::PerExample, DisagreementScale::Printed] {
            let huge = run_linear(&world, &policy, &env, Algorithm::VcActive, 0.1, 1e12, scale, Ablations::default()).unwrap();
            let everywhere = run_linear(
                &world,
                &policy,
                &env,
                Algorithm::VcActive,
                0.1,
                1e12,
                scale,
                Ablations::disabling(&["dbal"]).unwrap(),
            )
            .unwrap();
            assert_eq!(huge.labels_used, everywhere.labels_used);
            assert_eq!(huge.model, everywhere.model);
            assert!(huge.labels_used <= env.online.len());
        }
    }
}

#[test]
fn passive_labels_every_online_point() {
    let world = small_world(5);
    let policy = certainty_policy(&world).unwrap();
    let env = LinearEnvironment::new(&world, &policy, 6);
    let run = run_linear(&world, &policy, &env, Algorithm::Passive, 0.1, 0.01, Default::default(), Ablations::default())
        .unwrap();
    assert_eq!(run.labels_used, env.online.len());
    let used: Vec<usize> = run.curve.iter().map(|c| c.labels_used).collect();
    assert!(used.windows(2).all(|w| w[0] <= w[1]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn runs_are_reproducible(seed in any::<u64>(), alg in 0usize..3, c in 0.01f64..10.0, eta in 0.0001f64..0.5) {
        let world = small_world(seed);
        let Ok(policy) = uncertainty_policy(&world) else { return Ok(()) };
        let env = LinearEnvironment::new(&world, &policy, seed.wrapping_add(1));
        let alg = Algorithm::ALL[alg];
        let a = run_linear(&world, &policy, &env, alg, eta, c, Default::default(), Ablations::default()).unwrap();
        let b = run_linear(&world, &policy, &env, alg, eta, c, Default::default(), Ablations::default()).unwrap();
        prop_assert_eq!(&a.model.weights, &b.model.weights);
        prop_assert_eq!(a.labels_used, b.labels_used);
        prop_assert!(a.curve.iter().all(|p| (0.0..=1.0).contains(&p.test_error)));
        prop_assert!(a.curve.windows(2).all(|w| w[0].labels_used <= w[1].labels_used));
    }
}
