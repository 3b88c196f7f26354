use std::hint::black_box;
use std::sync::Arc;

use chemp::baseline::mmse_detect;
use chemp::ldpc::{bp_decode, build_code, DegreeProfile};
use chemp::mpd::{matched_filter, mpd_detect, GramKernel, MpdDetector};
use chemp::rng::seeded;
use chemp::{MpdConfig, RealSystemInstance, SnrSpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;
use rand_distr::StandardNormal;

fn detectors(c: &mut Criterion) {
    let mut g = c.benchmark_group("detect");
    for n in [32usize, 64, 128] {
        let inst = RealSystemInstance::random(n, n, &SnrSpec::new(10.0).unwrap(), &mut seeded(1)).unwrap();
        let obs = matched_filter(&inst.h, &inst.y, n, inst.noise_var).unwrap();
        let cfg = MpdConfig::default();
        g.bench_with_input(BenchmarkId::new("mpd_20_iterations", n), &obs, |b, obs| {
            b.iter(|| mpd_detect(black_box(obs), &cfg).unwrap())
        });
        let kernel = Arc::new(GramKernel::new(&obs.j).unwrap());
        let z: Vec<f64> = obs.z.iter().copied().collect();
        g.bench_with_input(BenchmarkId::new("mpd_shared_kernel", n), &z, |b, z| {
            b.iter(|| {
                let mut d = MpdDetector::with_kernel(kernel.clone(), black_box(z), obs.sigma_v_sq, &cfg).unwrap();
                d.run(None);
            })
        });
        g.bench_with_input(BenchmarkId::new("matched_filter", n), &inst, |b, inst| {
            b.iter(|| matched_filter(black_box(&inst.h), &inst.y, n, inst.noise_var).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("mmse", n), &inst, |b, inst| {
            b.iter(|| mmse_detect(black_box(&inst.h), &inst.y, inst.noise_var).unwrap())
        });
    }
    g.finish();
}

fn decoder(c: &mut Criterion) {
    let mut rng = seeded(2);
    let code = build_code(&DegreeProfile::optimized_alpha_1(), 1000, &mut rng).unwrap();
    let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
    let cw = code.encode(&info).unwrap();
    let sigma: f64 = 0.8;
    let llr: Vec<f64> = cw
        .iter()
        .map(|&b| {
            let x = if b == 1 { 1.0 } else { -1.0 };
            let w: f64 = rng.sample(StandardNormal);
            2.0 * (x + sigma * w) / (sigma * sigma)
        })
        .collect();
    c.bench_function("bp_decode_n1000_50_iterations", |b| {
        b.iter(|| bp_decode(&code, black_box(&llr), 50).unwrap())
    });
    c.bench_function("encode_n1000", |b| b.iter(|| code.encode(black_box(&info)).unwrap()));
}

criterion_group!(benches, detectors, decoder);
criterion_main!(benches);
