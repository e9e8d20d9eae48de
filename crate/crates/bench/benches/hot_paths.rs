use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use instinct_bench::{agents, desk_hidden, policy_batch, rng};
use instinct_core::neural::{AdamState, Mlp};
use instinct_core::rl::{ppo_update, run_episode, ActingMode, AgentPair};
use instinct_core::world::{assemble_observation, OBS_DIM};
use instinct_core::{Action, PpoHyper, TaskConfig, TaskEnv, TaskKind};

fn mlp(c: &mut Criterion) {
    let mut group = c.benchmark_group("mlp");
    for hidden in [vec![64, 64], vec![512, 512, 512]] {
        let mut sizes = vec![OBS_DIM];
        sizes.extend(&hidden);
        sizes.push(2);
        let net = Mlp::init(&sizes, &mut rng(0)).unwrap();
        let input = vec![0.3; OBS_DIM];
        let label = format!("{hidden:?}");
        group.bench_function(format!("forward {label}"), |b| {
            b.iter(|| net.predict(std::hint::black_box(&input)).unwrap())
        });
        let (_, cache) = net.forward(&input).unwrap();
        group.bench_function(format!("backward {label}"), |b| {
            b.iter(|| {
                net.backward(&cache, std::hint::black_box(&[1.0, -1.0]))
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn simulator(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulator");
    for kind in [TaskKind::Goal, TaskKind::Buttons, TaskKind::Push] {
        let env = TaskEnv::new(TaskConfig::new(kind), 3).unwrap();
        group.bench_function(format!("observe {}", kind.as_str()), |b| {
            b.iter(|| assemble_observation(std::hint::black_box(env.state())))
        });
        group.bench_function(format!("step {}", kind.as_str()), |b| {
            b.iter_batched_ref(
                || env.clone(),
                |env| env.step(Action::new(0.1, 0.02)).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn episode(c: &mut Criterion) {
    let (policy, instinct) = agents(&desk_hidden());
    let task = TaskConfig::new(TaskKind::Goal).with_horizon(100);
    let pair = AgentPair {
        policy: &policy,
        instinct: Some(&instinct),
    };
    c.bench_function("episode goal 100 steps with instinct", |b| {
        b.iter(|| {
            let mut env = TaskEnv::new(task.clone(), 5).unwrap();
            let mut noise = rng(5);
            run_episode(
                &mut env,
                pair,
                ActingMode::DETERMINISTIC,
                &mut noise,
                |_, _| Ok(()),
            )
            .unwrap()
        })
    });
}

fn ppo(c: &mut Criterion) {
    let (policy, _) = agents(&desk_hidden());
    let batch = policy_batch(&policy, 2, 400);
    let hyper = PpoHyper {
        ppo_epochs: 1,
        ..Default::default()
    };
    let mut group = c.benchmark_group("ppo");
    group.sample_size(10);
    group.bench_function("update 800 samples, one epoch", |b| {
        b.iter_batched(
            || (policy.net.clone(), AdamState::new(&policy.net), rng(7)),
            |(mut net, mut adam, mut rng)| {
                ppo_update(&mut net, &mut adam, &batch, &hyper, &mut rng).unwrap()
            },
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, mlp, simulator, episode, ppo);
criterion_main!(benches);
