use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ncap_core::capacity::Session;
use ncap_core::estimators::{chi2_divergences, Nmie};
use ncap_core::nn::init_network;
use ncap_core::reference::{blahut_arimoto, discretize_channel};
use ncap_core::rng::sample_gaussian;
use ncap_core::{ChannelKind, ChannelSpec, EstimatorSpec, Method, Rng, TrainConfig};

fn network(c: &mut Criterion) {
    let mut rng = Rng::new(1);
    let net = init_network(&[2, 64, 64, 64, 1], &mut rng).unwrap();
    let batch = sample_gaussian(&mut rng, 512, 2).unwrap();
    c.bench_function("critic forward 512x[2,64,64,64,1]", |b| b.iter(|| net.forward(black_box(&batch)).unwrap()));
    let pass = net.forward_pass(&batch).unwrap();
    let g = sample_gaussian(&mut rng, 512, 1).unwrap();
    c.bench_function("critic backward 512x[2,64,64,64,1]", |b| {
        b.iter(|| net.backward_pass(black_box(&pass), &g, true).unwrap())
    });
}

fn estimator_steps(c: &mut Criterion) {
    let mut rng = Rng::new(2);
    let x = sample_gaussian(&mut rng, 256, 1).unwrap().map(|v| v * 10.0);
    let z = x.map(|v| v + rng.gaussian());
    let mut group = c.benchmark_group("estimator step, B=256");
    for method in [Method::Mine, Method::Smile, Method::InfoNce, Method::EntropyBased] {
        let mut nmie = Nmie::new(EstimatorSpec::new(method), &[64, 64, 64], 10.0, 10.05, &mut rng).unwrap();
        group.bench_function(method.as_str(), |b| b.iter(|| nmie.step(&x, &z, &mut rng).unwrap()));
    }
    group.finish();
}

fn training_iteration(c: &mut Criterion) {
    let ch = ChannelSpec::new(ChannelKind::Awgn, 1.0).unwrap();
    let constraint = ch.constraint_for_snr(20.0);
    let mut rng = Rng::new(3);
    let mut s = Session::new(ch, constraint, EstimatorSpec::new(Method::Mine), TrainConfig::default(), &mut rng).unwrap();
    c.bench_function("alternating iteration (MINE, AWGN 20 dB)", |b| {
        b.iter(|| {
            let (pass, step) = s.evaluate_batch(&mut rng).unwrap();
            s.phase1(&step).unwrap();
            s.phase2(&pass, &step).unwrap();
        })
    });
}

fn histograms(c: &mut Criterion) {
    let mut rng = Rng::new(4);
    let p: Vec<f64> = (0..10_000).map(|_| rng.gaussian()).collect();
    let q: Vec<f64> = (0..10_000).map(|_| rng.gaussian() + 0.5).collect();
    c.bench_function("chi2 histograms 10k/10k, 100 bins", |b| b.iter(|| chi2_divergences(black_box(&p), &q, 100)));
}

fn blahut(c: &mut Criterion) {
    let ch = ChannelSpec::new(ChannelKind::PeakAwgn, 1.0).unwrap();
    let dc = discretize_channel(&ch, &ch.constraint_for_snr(6.0), 101, 200).unwrap();
    let mut group = c.benchmark_group("blahut-arimoto");
    group.sample_size(10);
    group.bench_function("peak 101x200", |b| b.iter(|| blahut_arimoto(&dc, None, 1e-5, 100_000).unwrap()));
    group.finish();
}

criterion_group!(benches, network, estimator_steps, training_iteration, histograms, blahut);
criterion_main!(benches);
