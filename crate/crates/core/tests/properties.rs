use std::cell::Cell;
use std::fs;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nese::energy::{xnor_count, EnergyModel, PowerTable};
use nese::engine::{EngineOptions, StepResult};
use nese::frame_io::{encode_pgm, load_sequence, parse_pgm, PixelSource};
use nese::nvm_store::{retention_time, MramArray, NvmParams};
use nese::scene_gen::{generate, office_scene, EventKind, Rect, SceneEvent, SceneSpec};
use nese::sensor_model::{capture_centers, quantize, BoxGrid, Precision};
use nese::{Engine, Execution, Frame, NeseConfig};

fn brute_centers(w: usize, h: usize, n: usize) -> usize {
    let mut count = 0;
    for r in 0..h {
        for c in 0..w {
            if r % n == n / 2 && c % n == n / 2 {
                count += 1;
            }
        }
    }
    count
}

fn frame_strategy(w: usize, h: usize) -> impl Strategy<Value = Frame> {
    proptest::collection::vec(any::<u8>(), w * h).prop_map(move |d| Frame::new(w, h, d).unwrap())
}

fn engine(cfg: NeseConfig, first: &Frame, execution: Execution) -> Engine {
    let opts = EngineOptions {
        execution,
        ..EngineOptions::default()
    };
    Engine::init_with(
        cfg,
        first,
        NvmParams::default(),
        EnergyModel::default(),
        opts,
    )
    .unwrap()
}

/// Counts every pixel read.
struct CountingSource<'a> {
    frame: &'a Frame,
    reads: Cell<usize>,
}

impl PixelSource for CountingSource<'_> {
    fn width(&self) -> usize {
        self.frame.width()
    }
    fn height(&self) -> usize {
        self.frame.height()
    }
    fn sample(&self, row: usize, col: usize) -> u8 {
        self.reads.set(self.reads.get() + 1);
        self.frame.get(row, col)
    }
}

proptest! {
    #[test]
    fn center_count_matches_brute_force(w in 1usize..50, h in 1usize..50, k in 0usize..4) {
        let n = [1, 3, 5, 7][k];
        let g = BoxGrid::new(w, h, n).unwrap();
        prop_assert_eq!(g.len(), brute_centers(w, h, n));
        prop_assert_eq!(g.centers().count(), g.len());
    }

    #[test]
    fn quantize_is_monotone_truncation(a in any::<u8>(), b in any::<u8>(), p in 1u8..=8) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantize(lo, p).unwrap() <= quantize(hi, p).unwrap());
        prop_assert_eq!(quantize(a, p).unwrap() as u16, a as u16 / (1u16 << (8 - p)));
        prop_assert_eq!(quantize(a, 8).unwrap(), a);
    }

    #[test]
    fn capture_reads_only_centers(f in frame_strategy(17, 13), k in 0usize..3, p in 1u8..=4) {
        let n = [3, 5, 7][k];
        let g = BoxGrid::new(17, 13, n).unwrap();
        let src = CountingSource { frame: &f, reads: Cell::new(0) };
        let out = capture_centers(&src, &g, Precision::new(p).unwrap()).unwrap();
        prop_assert_eq!(src.reads.get(), g.len());
        prop_assert_eq!(out.codes.len(), g.len());
    }

    #[test]
    fn higher_precision_never_drops_changes(a in frame_strategy(21, 21), b in frame_strategy(21, 21), k in 0usize..3) {
        let n = [3, 5, 7][k];
        let masks: Vec<Vec<bool>> = (1..=4)
            .map(|p| {
                let mut e = engine(NeseConfig::new(n, p, 1, 1_000), &a, Execution::Sequential);
                e.step(&b).unwrap().change_mask.data().to_vec()
            })
            .collect();
        for w in masks.windows(2) {
            prop_assert!(w[0].iter().zip(&w[1]).all(|(&lo, &hi)| !lo || hi));
        }
    }

    #[test]
    fn execution_policy_does_not_change_results(a in frame_strategy(25, 19), b in frame_strategy(25, 19), p in 1u8..=4) {
        let cfg = NeseConfig::new(3, p, 2, 2);
        let run = |x: Execution| -> Vec<StepResult> {
            engine(cfg, &a, x).run(&[b.clone(), b.clone(), b.clone(), a.clone()]).unwrap()
        };
        prop_assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
    }

    #[test]
    fn pgm_round_trip(f in (1usize..20, 1usize..20).prop_flat_map(|(w, h)| frame_strategy(w, h))) {
        let back = parse_pgm(&encode_pgm(&f), "mem.pgm".as_ref()).unwrap();
        prop_assert_eq!(back.data(), f.data());
        prop_assert_eq!((back.width(), back.height()), (f.width(), f.height()));
    }

    #[test]
    fn sequence_order_ignores_write_order(order in Just((0..12usize).collect::<Vec<_>>()).prop_shuffle()) {
        let dir = tempfile::tempdir().unwrap();
        for &i in &order {
            let f = Frame::filled(2, 2, i as u8).unwrap();
            fs::write(dir.path().join(format!("frame_{i}.pgm")), encode_pgm(&f)).unwrap();
        }
        let seq = load_sequence(dir.path(), "frame_*.pgm").unwrap();
        let values: Vec<u8> = seq.iter().map(|f| f.data()[0]).collect();
        prop_assert_eq!(values, (0..12u8).collect::<Vec<_>>());
        prop_assert!(seq.iter().enumerate().all(|(i, f)| f.index() == i));
    }

    #[test]
    fn scenes_are_deterministic_and_truth_matches_clean_change(seed in any::<u64>(), x in 0usize..30, y in 0usize..30) {
        let mut spec = SceneSpec {
            width: 40,
            height: 40,
            length: 6,
            background_level: 80,
            noise_amplitude: 0,
            events: vec![SceneEvent {
                kind: EventKind::ObjectEnter,
                rect: Some(Rect::new(x, y, 10, 10)),
                to: None,
                level_delta: 50,
                frames: (2, 6),
            }],
        };
        let (frames, truth) = generate(&spec, seed).unwrap();
        for (f, t) in frames.iter().zip(&truth) {
            let changed = f.data().iter().zip(frames[0].data()).map(|(a, b)| a != b);
            prop_assert!(changed.zip(t.data()).all(|(c, &m)| c == m));
        }
        prop_assert_eq!(truth[2].count_true(), 100);

        spec.noise_amplitude = 2;
        let a = generate(&spec, seed).unwrap();
        let b = generate(&spec, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a.1, &truth);
    }
}

#[test]
fn retention_time_values() {
    // frozen from an independent double-precision evaluation
    let one_hour = retention_time(20.0, 7.42e-6);
    assert!((one_hour / 3599.925749940644 - 1.0).abs() < 1e-12);
    let long = retention_time(40.0, 1.35e-10);
    assert!((long / 31777011.0229977 - 1.0).abs() < 1e-12);
    let years = long / (365.25 * 86400.0);
    assert!((years - 1.00695).abs() < 1e-4);
    assert!((retention_time(40.0, 1.35e-9) / (365.25 * 86400.0) - 10.0695).abs() < 1e-3);
}

#[test]
fn retention_flips_follow_binomial() {
    let params = NvmParams::one_hour_20kt();
    let tau = params.retention_time();
    let cells = 40_000usize;
    for (seed, elapsed) in [(1u64, 0.1 * tau), (2, 0.5 * tau), (3, 2.0 * tau)] {
        let mut m = MramArray::new(200, 200, params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flips = m.apply_retention(elapsed, &mut rng, Execution::Parallel) as f64;
        let p = 1.0 - (-elapsed / tau).exp();
        let mean = cells as f64 * p;
        let sigma = (cells as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (flips - mean).abs() <= 3.0 * sigma,
            "elapsed {elapsed}: {flips} vs {mean}"
        );
    }
}

#[test]
fn retention_is_policy_independent() {
    let params = NvmParams::one_hour_20kt();
    let run = |x| {
        let mut m = MramArray::new(64, 96, params).unwrap();
        let flips = m.apply_retention(1800.0, &mut ChaCha8Rng::seed_from_u64(9), x);
        (flips, m.packed_bits())
    };
    assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
}

#[test]
fn background_survives_power_cycles_and_snapshots() {
    let (frames, _) = generate(&office_scene(60, 60, 30), 4).unwrap();
    let mut e = engine(NeseConfig::new(5, 3, 1, 4), &frames[0], Execution::Parallel);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for f in &frames {
        e.step(f).unwrap();
        if rng.gen_bool(0.3) {
            let bits = e.background().packed_bits();
            e.power_cycle();
            assert_eq!(e.background().packed_bits(), bits);
            assert_eq!(e.time(), 0);
            assert!(e.turn_on_list().is_empty());
        }
    }
    let bytes = e.background().to_snapshot_bytes();
    let back = MramArray::from_snapshot_bytes(&bytes, NvmParams::default().energy).unwrap();
    assert_eq!(back.packed_bits(), e.background().packed_bits());
    assert_eq!(back.last_write(), e.background().last_write());
}

#[test]
fn xnor_counts_match_center_enumeration() {
    for (w, h) in [(600, 600), (31, 17), (8, 9)] {
        for n in [3, 5, 7] {
            for p in 1..=4u8 {
                let expected = brute_centers(w, h, n) * p as usize;
                assert_eq!(xnor_count(n, p, w, h).unwrap(), expected);
            }
        }
    }
}

#[test]
fn odd_precision_power_is_geometric_interpolation() {
    let t = PowerTable::measured();
    for (n, p2) in [(3, 842.0), (5, 561.3), (7, 374.2)] {
        let step = 2.2f64.sqrt();
        let p1 = t.detection_power(n, 1).unwrap();
        let p3 = t.detection_power(n, 3).unwrap();
        assert!(p1.extrapolated && p3.extrapolated);
        assert!((p1.watts * 1e3 / (p2 / step) - 1.0).abs() < 1e-12);
        assert!((p3.watts * 1e3 / (p2 * step) - 1.0).abs() < 1e-12);
    }
}
