use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use nnpilot_core::codec::{channel_apply, nn_decode, transmit_frame, InputLaw};
use nnpilot_core::estimator::{estimate_path, solve_weights};
use nnpilot_core::fading::FadingSynthesizer;
use nnpilot_core::gmi::{gmi_lb_asymptotic, mc_log_det_gram};
use nnpilot_core::mac::jt_region;
use nnpilot_core::spectrum::error_variance_general;
use nnpilot_core::{build_schedule, Codebook, PsdModel};

fn kernels(c: &mut Criterion) {
    let psd = PsdModel::rectangular(0.125).unwrap();
    let s = build_schedule(4, 2, 16, 64).unwrap();

    c.bench_function("error_variance_aliased", |b| {
        b.iter(|| error_variance_general(&psd, 5, 2, 3, 1, 1e4).unwrap())
    });
    c.bench_function("lmmse_weights_T16", |b| b.iter(|| solve_weights(&s, &psd, 100.0).unwrap()));

    let synth = FadingSynthesizer::new(&psd, s.total_len()).unwrap();
    c.bench_function("fading_path_2x2", |b| {
        let mut seed = 0;
        b.iter(|| {
            seed += 1;
            synth.path(2, 2, seed).unwrap()
        })
    });

    let w = solve_weights(&s, &psd, 100.0).unwrap();
    let book = Codebook::generate(64, s.n(), 2, InputLaw::Gaussian, 1).unwrap();
    let path = synth.path(2, 2, 3).unwrap();
    let frame = transmit_frame(book.codeword(5), &s).unwrap();
    let y = channel_apply(&frame, &path, 100.0, 4).unwrap();
    c.bench_function("estimate_path", |b| b.iter(|| estimate_path(&w, &s, y.samples(), 2).unwrap()));
    let est = estimate_path(&w, &s, y.samples(), 2).unwrap();
    c.bench_function("nn_decode_M64_n64", |b| {
        b.iter_batched(|| (), |_| nn_decode(&y, &est, &book, 100.0).unwrap(), BatchSize::SmallInput)
    });

    c.bench_function("log_det_gram_2x2_10k", |b| b.iter(|| mc_log_det_gram(2, 2, 1.0, 10_000, 1).unwrap()));
    c.bench_function("gmi_asymptotic_10k", |b| {
        b.iter(|| gmi_lb_asymptotic(&psd, 4, 2, 1e6, 10_000, 1).unwrap())
    });
    c.bench_function("jt_region", |b| b.iter(|| jt_region(3, 2, 4, 40).unwrap()));
}

criterion_group!(benches, kernels);
criterion_main!(benches);
