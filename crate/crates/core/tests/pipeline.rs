use kpfcp_core::complexity::{mac_fcp, mac_kpfcp};
use kpfcp_core::dereverb::streaming;
use kpfcp_core::estimator::{estimate, EstimatorSpec};
use kpfcp_core::room::{image_method, render_scene, ImageMethodOptions, RoomScene};
use kpfcp_core::speech::synthetic_speech;
use kpfcp_core::{
    analyze, dereverberate, measure_macs, Algorithm, Error, FcpParams, KpfcpParams, ProcessOptions, StftConfig, TFGrid,
};
use num_complex::Complex64;

struct Case {
    y: TFGrid,
    s: TFGrid,
    s_nn: TFGrid,
}

fn case(seconds: f64, t60: f64, snr: f64, opts: ImageMethodOptions, degradation: f64) -> Case {
    let clean = synthetic_speech(seconds, 16000, 3);
    let rir = image_method(&RoomScene::reference(t60), &opts).unwrap();
    let r = render_scene(&clean, &rir, snr, 4).unwrap();
    let cfg = StftConfig::default();
    let y = analyze(&r.observed, cfg).unwrap();
    let s = analyze(&r.direct_truth, cfg).unwrap();
    let spec = EstimatorSpec {
        degradation,
        ..Default::default()
    };
    let s_nn = estimate(&spec, &y, Some(&s)).unwrap();
    Case { y, s, s_nn }
}

fn small_algorithms() -> Vec<Algorithm> {
    vec![
        Algorithm::Fcp(FcpParams { k: 12, ..Default::default() }),
        Algorithm::Kpfcp(KpfcpParams {
            p: 2,
            k1: 4,
            k2: 3,
            ..Default::default()
        }),
    ]
}

fn seq() -> ProcessOptions {
    ProcessOptions {
        parallel: false,
        ..Default::default()
    }
}

#[test]
fn streaming_matches_batch() {
    let c = case(1.0, 0.4, 25.0, Default::default(), 0.1);
    for alg in small_algorithms() {
        let batch = dereverberate(&alg, &c.y, &c.s_nn, &ProcessOptions::default()).unwrap();
        let mut live = streaming(&alg, c.y.num_bins()).unwrap();
        for t in 0..c.y.num_frames() {
            let y: Vec<Complex64> = c.y.frame(t).to_vec();
            let s: Vec<Complex64> = c.s_nn.frame(t).to_vec();
            let out = live.process_frame(&y, &s).unwrap();
            assert_eq!(out, batch.grid.frame(t).to_vec(), "{} frame {t}", alg.name());
        }
    }
}

#[test]
fn parallel_matches_sequential() {
    let c = case(1.0, 0.5, 25.0, Default::default(), 0.1);
    for alg in small_algorithms() {
        let a = dereverberate(&alg, &c.y, &c.s_nn, &ProcessOptions::default()).unwrap();
        let b = dereverberate(&alg, &c.y, &c.s_nn, &seq()).unwrap();
        assert_eq!(a.grid.data, b.grid.data);
    }
}

#[test]
fn output_is_causal() {
    let c = case(1.0, 0.4, 25.0, Default::default(), 0.1);
    let cut = c.y.num_frames() / 2;
    for alg in small_algorithms() {
        let full = dereverberate(&alg, &c.y, &c.s_nn, &seq()).unwrap();
        let part = dereverberate(&alg, &c.y.truncated(cut), &c.s_nn.truncated(cut), &seq()).unwrap();
        for t in 0..cut {
            assert_eq!(full.grid.frame(t), part.grid.frame(t));
        }
    }
}

#[test]
fn anechoic_scene_passes_through() {
    let opts = ImageMethodOptions {
        reflection: Some(0.0),
        ..Default::default()
    };
    let c = case(1.0, 0.4, f64::INFINITY, opts, 0.0);
    for alg in small_algorithms() {
        let out = dereverberate(&alg, &c.y, &c.s_nn, &seq()).unwrap();
        let resid: f64 = out.grid.data.iter().zip(c.s.data.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
        assert!(resid <= 1e-20 * c.s.energy(), "{} residual {resid}", alg.name());
    }
}

#[test]
fn silent_input_gives_silent_output() {
    let c = case(0.5, 0.4, 25.0, Default::default(), 0.1);
    let zero = TFGrid::zeros(c.y.num_frames(), c.y.config, c.y.num_samples, 16000);
    for alg in small_algorithms() {
        let out = dereverberate(&alg, &zero, &zero, &seq()).unwrap();
        assert!(out.grid.data.iter().all(|v| *v == Complex64::default()));
    }
}

#[test]
fn suppresses_reverberation_with_perfect_estimate() {
    let c = case(3.0, 0.4, f64::INFINITY, Default::default(), 0.0);
    let half = c.y.num_frames() / 2;
    let tail_err = |g: &TFGrid| -> f64 {
        (half..g.num_frames())
            .map(|t| g.frame(t).iter().zip(c.s.frame(t).iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>())
            .sum()
    };
    let before = tail_err(&c.y);
    for alg in [
        Algorithm::Fcp(FcpParams::default()),
        Algorithm::Kpfcp(KpfcpParams::default()),
    ] {
        let out = dereverberate(&alg, &c.y, &c.s_nn, &ProcessOptions::default()).unwrap();
        let after = tail_err(&out.grid);
        assert!(after < before, "{}: {after} vs {before}", alg.name());
    }
}

#[test]
fn instrumented_counts_follow_models() {
    let c = case(0.5, 0.4, 25.0, Default::default(), 0.1);
    let opts = ProcessOptions {
        instrument_macs: true,
        ..Default::default()
    };
    let checks = [
        (Algorithm::Fcp(FcpParams { k: 81, ..Default::default() }), mac_fcp(81).unwrap()),
        (Algorithm::Fcp(FcpParams { k: 20, ..Default::default() }), mac_fcp(20).unwrap()),
        (Algorithm::Kpfcp(KpfcpParams { p: 3, ..Default::default() }), mac_kpfcp(3, 9, 9).unwrap()),
        (Algorithm::Kpfcp(KpfcpParams { p: 5, ..Default::default() }), mac_kpfcp(5, 9, 9).unwrap()),
        (
            Algorithm::Kpfcp(KpfcpParams {
                p: 2,
                k1: 6,
                k2: 4,
                ..Default::default()
            }),
            mac_kpfcp(2, 6, 4).unwrap(),
        ),
    ];
    for (alg, model) in checks {
        let per_unit = measure_macs(&alg, &c.y, &c.s_nn, &opts).unwrap();
        let ratio = per_unit / model as f64;
        assert!((0.5..=2.0).contains(&ratio), "{} ratio {ratio}", alg.name());
    }
}

#[test]
fn per_unit_count_is_length_independent() {
    let c = case(1.0, 0.4, 25.0, Default::default(), 0.1);
    let half = c.y.num_frames() / 2;
    let opts = ProcessOptions {
        instrument_macs: true,
        ..Default::default()
    };
    for alg in small_algorithms() {
        let a = measure_macs(&alg, &c.y.truncated(half), &c.s_nn.truncated(half), &opts).unwrap();
        let b = measure_macs(&alg, &c.y, &c.s_nn, &opts).unwrap();
        assert!((a / b - 1.0).abs() < 0.01);
    }
}

#[test]
fn measuring_requires_instrumentation() {
    let c = case(0.5, 0.4, 25.0, Default::default(), 0.1);
    let err = measure_macs(&small_algorithms()[0], &c.y, &c.s_nn, &ProcessOptions::default()).unwrap_err();
    assert!(matches!(err, Error::InstrumentationDisabled));
}

#[test]
fn rejects_mismatched_estimate() {
    let c = case(0.5, 0.4, 25.0, Default::default(), 0.1);
    let short = c.s_nn.truncated(c.s_nn.num_frames() - 1);
    assert!(dereverberate(&small_algorithms()[0], &c.y, &short, &ProcessOptions::default()).is_err());
}
