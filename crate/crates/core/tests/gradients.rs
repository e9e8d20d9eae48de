mod common;

use common::gradcheck::{check_family, CASES, TOLERANCE};
use instinct_core::agent::HeadTransform;
use instinct_core::{ActorCritic, InstinctAgent, PolicyAgent, PpoHyper};
use rand::Rng;

fn assert_family(name: &str, worst: f64) {
    println!("{name}: max relative error {worst:.3e} over {CASES} cases");
    assert!(worst < TOLERANCE, "{name}: max relative error {worst:e}");
}

#[test]
fn actor_and_gaussian_head_gradients() {
    let hyper = PpoHyper {
        value_coef: 0.0,
        ..Default::default()
    };
    assert_family(
        "actor",
        check_family(
            "actor",
            |rng| PolicyAgent::new(&[5, 4], rng).unwrap().net,
            hyper,
            false,
        ),
    );
}

#[test]
fn critic_gradients() {
    let hyper = PpoHyper {
        entropy_coef: 0.0,
        ..Default::default()
    };
    assert_family(
        "critic",
        check_family(
            "critic",
            |rng| PolicyAgent::new(&[5, 4], rng).unwrap().net,
            hyper,
            true,
        ),
    );
}

#[test]
fn instinct_gradients() {
    assert_family(
        "instinct",
        check_family(
            "instinct",
            |rng| {
                let bias = rng.random_range(-1.0..1.0);
                InstinctAgent::new(&[5, 4], bias, rng).unwrap().net
            },
            PpoHyper::default(),
            false,
        ),
    );
}

#[test]
fn deeper_network_gradients() {
    assert_family(
        "three hidden layers",
        check_family(
            "three hidden layers",
            |rng| {
                let transforms = vec![
                    HeadTransform::Scaled { limit: 0.1 },
                    HeadTransform::Unit { bias: 0.3 },
                ];
                ActorCritic::new(7, &[4, 3, 5], transforms, 0.6, rng).unwrap()
            },
            PpoHyper::default(),
            false,
        ),
    );
}
