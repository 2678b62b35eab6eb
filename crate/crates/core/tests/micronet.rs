mod common;

use bhdeskew_core::net::{
    backward, decode_model, encode_model, forward, forward_batch, AdamState, Architecture, ModelParams, NetInput,
    Normalization, Pixels, Tensor, Workspace,
};
use bhdeskew_core::raster::Scalars;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn input(side: usize, seed: u64, dense: bool) -> NetInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scalars = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
    let pixels = if dense {
        Pixels::Dense(
            Tensor::new(vec![side, side], (0..side * side).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap(),
        )
    } else {
        let mut idx: Vec<u32> = (0..side * side / 6).map(|_| rng.gen_range(0..(side * side) as u32)).collect();
        idx.sort_unstable();
        idx.dedup();
        Pixels::Lit(idx)
    };
    NetInput { pixels, scalars }
}

fn model(side: usize, seed: u64) -> ModelParams {
    let mut p = ModelParams::init(Architecture::new(side).unwrap(), seed).unwrap();
    let l = p.layout().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(!seed);
    for r in l.conv_b.iter().cloned().chain([l.fc1_b.clone(), l.fc2_b.clone()]) {
        p.values_mut()[r].iter_mut().for_each(|v| *v = rng.gen_range(-0.1..0.1));
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn gradient_matches_differences(seed in any::<u64>(), dense in any::<bool>(), r0 in -0.05..0.05f64, r1 in -0.05..0.05f64) {
        let p = model(8, seed);
        let inputs = [input(8, seed ^ 1, dense), input(8, seed ^ 2, !dense)];
        let c = common::check_gradient(&p, &inputs, &[r0, r1]);
        prop_assert_eq!(c.failed, 0, "{:?}", c.failures);
    }

    #[test]
    fn batch_composition_does_not_change_outputs(seed in any::<u64>(), order in Just((0..13usize).collect::<Vec<_>>()).prop_shuffle()) {
        let p = model(16, seed);
        let xs: Vec<NetInput> = (0..13).map(|i| input(16, seed.wrapping_add(i), i % 3 == 0)).collect();
        let mut ws = Workspace::new(p.arch());
        let single: Vec<f64> = xs.iter().map(|x| forward(&p, x, &mut ws).unwrap()).collect();
        let shuffled: Vec<&NetInput> = order.iter().map(|&i| &xs[i]).collect();
        let batched = forward_batch(&p, &shuffled).unwrap();
        for (&i, y) in order.iter().zip(&batched) {
            prop_assert_eq!(y.to_bits(), single[i].to_bits());
        }
    }

    #[test]
    fn duplicated_batch_has_the_same_gradient(seed in any::<u64>(), t in -1.0..1.0f64) {
        let p = model(16, seed);
        let x = input(16, seed, false);
        let (l1, _, g1) = backward(&p, &[&x], &[t]).unwrap();
        let (l2, _, g2) = backward(&p, &[&x, &x], &[t, t]).unwrap();
        prop_assert_eq!(l1, l2);
        prop_assert_eq!(g1, g2);
    }

    #[test]
    fn every_scalar_reaches_the_output(seed in any::<u64>(), which in 0usize..4, bump in prop_oneof![-1.0..-0.1f64, 0.1..1.0f64]) {
        let p = ModelParams::init(Architecture::new(16).unwrap(), seed).unwrap();
        let x = input(16, seed, false);
        let mut y = x.clone();
        y.scalars[which] += bump;
        let mut ws = Workspace::new(p.arch());
        prop_assert_ne!(forward(&p, &x, &mut ws).unwrap(), forward(&p, &y, &mut ws).unwrap());
    }

    #[test]
    fn normalization_round_trips(
        raw in prop::collection::vec(prop::array::uniform4(-1e3..1e3f64), 2..20),
        t in -5e4..5e4f64,
        scale in 1.0..1e5f64,
    ) {
        let scalars: Vec<Scalars> =
            raw.iter().map(|a| Scalars { h_min: a[0], h_max: a[1], b_min: a[2], b_max: a[3] }).collect();
        let n = Normalization::fit(&scalars, scale).unwrap();
        prop_assert!((n.denormalize_target(n.normalize_target(t)) - t).abs() <= 1e-12 * t.abs().max(1.0));
        for s in &scalars {
            let back = n.denormalize_scalars(n.normalize_scalars(*s)).to_array();
            for (a, b) in back.iter().zip(s.to_array()) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn model_bytes_round_trip(seed in any::<u64>(), side in prop::sample::select(vec![8usize, 16, 64])) {
        let p = model(side, seed);
        let bytes = encode_model(&p).unwrap();
        let back = decode_model(&bytes).unwrap();
        prop_assert_eq!(encode_model(&back).unwrap(), bytes);
        prop_assert_eq!(back, p);
    }
}

/// 200 Adam steps on ten fixed samples cut the loss at least a hundredfold.
#[test]
fn adam_memorizes_a_small_batch() {
    let mut p = ModelParams::init(Architecture::new(16).unwrap(), 3).unwrap();
    let xs: Vec<NetInput> = (0..10).map(|i| input(16, 100 + i, i % 2 == 0)).collect();
    let ts: Vec<f64> = (0..10).map(|i| (i as f64 - 4.5) / 5.0).collect();
    let mut adam = AdamState::for_model(&p);
    let first = backward(&p, &xs, &ts).unwrap().0;
    let mut last = first;
    for _ in 0..200 {
        let (loss, _, g) = backward(&p, &xs, &ts).unwrap();
        last = loss;
        adam.step(p.values_mut(), &g, 1e-3).unwrap();
    }
    let fin = backward(&p, &xs, &ts).unwrap().0;
    assert!(fin.is_finite() && last.is_finite());
    assert!(fin * 100.0 <= first, "loss {first} -> {fin}");
}
