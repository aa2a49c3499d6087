use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use iwes_core::baselines::{covering_radius, greedy_k_center};
use iwes_core::iwes::{run_iwes, IwesConfig, IwesVariant};
use iwes_core::learners::{SoftmaxTrainer, TrainerConfig};
use iwes_core::scoring;
use iwes_core::synth::{blobs, thresholds_1d, BlobsParams, ThresholdsParams};
use iwes_core::theory::{disagreement_coefficient, DisagreementMode};
use iwes_core::RngStream;
use rand::Rng;
use std::hint::black_box;

fn scores(c: &mut Criterion) {
    let mut rng = RngStream::new(1);
    let probs: Vec<Vec<f64>> = (0..1000)
        .map(|_| {
            let v: Vec<f64> = (0..10).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect()
        })
        .collect();
    c.bench_function("normalized_entropy_1000x10", |b| {
        b.iter(|| probs.iter().map(|p| scoring::normalized_entropy(black_box(p)).unwrap()).sum::<f64>())
    });
    c.bench_function("entropy_disagreement_1000", |b| {
        b.iter(|| probs.iter().map(|p| scoring::entropy_disagreement(black_box(p[0]), p[1]).unwrap()).sum::<f64>())
    });
}

fn iwes_rounds(c: &mut Criterion) {
    let pool = blobs(&BlobsParams { n: 2000, dim: 5, classes: 4, ..Default::default() }, 1).unwrap();
    let trainer = SoftmaxTrainer::new(TrainerConfig { max_epochs: 20, ..Default::default() });
    let mut group = c.benchmark_group("iwes");
    group.sample_size(10);
    for variant in [IwesVariant::Dis, IwesVariant::Ent] {
        let cfg = IwesConfig { seed_size: 100, batch_size: 100, rounds: 3, variant, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{variant:?}")), &cfg, |b, cfg| {
            b.iter(|| run_iwes(&pool, cfg, &trainer, &RngStream::new(3)).unwrap())
        });
    }
    group.finish();
}

fn k_center(c: &mut Criterion) {
    let mut rng = RngStream::new(2);
    let points: Vec<Vec<f64>> = (0..2000).map(|_| (0..16).map(|_| rng.gen::<f64>()).collect()).collect();
    let all: Vec<usize> = (0..points.len()).collect();
    c.bench_function("greedy_k_center_2000x16_k50", |b| {
        b.iter(|| {
            let centers = greedy_k_center(&points, &all, &[], Some(0), 50);
            covering_radius(&points, &centers)
        })
    });
}

fn coefficient(c: &mut Criterion) {
    let inst = thresholds_1d(&ThresholdsParams::default()).unwrap();
    c.bench_function("theta_s_thresholds_21x200", |b| {
        b.iter(|| disagreement_coefficient(&inst.table, inst.h_star, DisagreementMode::S).unwrap())
    });
    c.bench_function("theta_al_thresholds_21x200", |b| {
        b.iter(|| disagreement_coefficient(&inst.table, inst.h_star, DisagreementMode::Al).unwrap())
    });
}

criterion_group!(benches, scores, iwes_rounds, k_center, coefficient);
criterion_main!(benches);
