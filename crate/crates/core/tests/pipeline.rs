use nnpilot_core::codec::{channel_apply_with_amplitude, transmit_frame, InputLaw};
use nnpilot_core::estimator::{estimate_path, solve_weights, EstimationProfile};
use nnpilot_core::fading::synthesize;
use nnpilot_core::gmi::{db_to_linear, gmi_lb_finite_t, gmi_lb_refined, prelog_fit};
use nnpilot_core::mac::{mac_nn_decode, mac_schedule, MacConfig};
use nnpilot_core::sim::{simulate_decoding, LinkSetup};
use nnpilot_core::{build_schedule, Codebook, PsdModel};
use num_complex::Complex64;

fn mac_errors(swapped: bool, frames: u64) -> usize {
    let cfg = MacConfig {
        n_t1: 1,
        n_t2: 1,
        n_r: 2,
        period: 4,
        window: 4,
        n: 32,
        snr: 1.0,
        beta: 0.5,
    };
    let psd = PsdModel::rectangular(0.125).unwrap();
    let s = mac_schedule(&cfg).unwrap();
    let w = solve_weights(&s, &psd, cfg.snr_p2p()).unwrap();
    let b1 = Codebook::generate(4, s.n(), 1, InputLaw::Gaussian, 1).unwrap();
    let b2 = Codebook::generate(4, s.n(), 1, InputLaw::Gaussian, 2).unwrap();
    let mut errors = 0;
    for f in 0..frames {
        let sent = ((f % 4) as usize, (f / 4 % 4) as usize);
        let word: Vec<Complex64> = (0..s.n())
            .flat_map(|i| [b1.codeword(sent.0)[i], b2.codeword(sent.1)[i]])
            .collect();
        let path = synthesize(&psd, s.total_len(), (2, 2), 100 + f).unwrap();
        let frame = transmit_frame(&word, &s).unwrap();
        let y = channel_apply_with_amplitude(&frame, &path, cfg.snr.sqrt(), 100 + f).unwrap();
        let est = estimate_path(&w, &s, y.samples(), 2).unwrap();
        // handing the books over in swapped order pairs each user with the other's estimate
        let ok = if swapped {
            mac_nn_decode(&y, &est, &b2, &b1, cfg.snr).unwrap().decided == (sent.1, sent.0)
        } else {
            mac_nn_decode(&y, &est, &b1, &b2, cfg.snr).unwrap().decided == sent
        };
        errors += usize::from(!ok);
    }
    errors
}

#[test]
fn mac_joint_decoding_beats_mismatched_estimates() {
    let (good, bad) = (mac_errors(false, 200), mac_errors(true, 200));
    assert!(good < bad, "{good} vs {bad}");
}

#[test]
fn decoding_is_thread_count_independent() {
    let setup = LinkSetup {
        psd: PsdModel::raised_cosine(0.1).unwrap(),
        schedule: build_schedule(4, 2, 3, 8).unwrap(),
        n_r: 2,
        snr: 2.0,
    };
    let a = simulate_decoding(&setup, 8, InputLaw::TruncatedGaussian, 150, 9).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| simulate_decoding(&setup, 8, InputLaw::TruncatedGaussian, 150, 9).unwrap());
    assert_eq!(a, b);
}

#[test]
fn finite_window_prelog_approaches_asymptote() {
    // pilots oversample the fading by 2, so a short window already tracks it
    let psd = PsdModel::raised_cosine(0.05).unwrap();
    let pts: Vec<(f64, f64)> = [30.0, 40.0, 50.0, 60.0]
        .iter()
        .map(|&db| {
            let snr = db_to_linear(db);
            let s = build_schedule(5, 1, 8, 4).unwrap();
            let p = EstimationProfile::finite(&s, &psd, snr).unwrap();
            (db, gmi_lb_finite_t(&p, snr, 1, 5000, 3).unwrap().value)
        })
        .collect();
    let fit = prelog_fit(&pts).unwrap();
    // min(n_r, n_t)(1 − n_t/L) = 0.8
    assert!((fit.slope - 0.8).abs() < 0.1, "{}", fit.slope);
}

#[test]
fn refinement_gains_most_at_low_snr() {
    let psd = PsdModel::rectangular(0.125).unwrap();
    let s = build_schedule(4, 1, 4, 3).unwrap();
    let gain = |snr: f64| {
        let p = EstimationProfile::finite(&s, &psd, snr).unwrap();
        let r = gmi_lb_refined(&p, snr, 1, 4000, 5).unwrap();
        let f = gmi_lb_finite_t(&p, snr, 1, 4000, 5).unwrap();
        assert!(r.value >= f.value);
        r.value - f.value
    };
    assert!(gain(1.0) > 0.0);
    assert!(gain(1.0) >= gain(1e4) - 1e-9);
}
