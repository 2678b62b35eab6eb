use std::f64::consts::PI;

use bhdeskew_core::dataset::InterpolatedRecord;
use bhdeskew_core::synth::{generate, SynthSpec};
use bhdeskew_core::{
    apply_skew, core_loss_of, interpolate_periodic, loop_energy_density, make_loop, SkewOffset, TimeSeries,
};
use proptest::prelude::*;

fn series(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, len)
}

fn ts(v: Vec<f64>) -> TimeSeries {
    TimeSeries::new(v, 1e5).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_is_a_group_action(h in series(3..40), k in 1u32..4, a in any::<i64>(), b in any::<i64>()) {
        let h = interpolate_periodic(&ts(h), k).unwrap();
        let n = h.len() / k as usize;
        let p = h.len() as i64;
        let off = |d: i64| SkewOffset::new(d % p, k, n).unwrap();
        let (a, b) = (off(a), off(b));

        let same = apply_skew(&h, off(0)).unwrap();
        prop_assert_eq!(same.values(), h.values());
        let twice = apply_skew(&apply_skew(&h, a).unwrap(), b).unwrap();
        let sum = SkewOffset::new((a.delta() + b.delta()) % p, k, n).unwrap();
        let once = apply_skew(&h, sum).unwrap();
        prop_assert_eq!(twice.values(), once.values());
        let back = apply_skew(&apply_skew(&h, a).unwrap(), a.negated()).unwrap();
        prop_assert_eq!(back.values(), h.values());
    }

    #[test]
    fn full_period_shift_is_identity(h in series(3..40)) {
        // A whole period is not a valid offset on its own; reach it in two halves.
        let t = ts(h);
        let n = t.len();
        let first = SkewOffset::new((n / 2) as i64, 1, n).unwrap();
        let second = SkewOffset::new((n - n / 2) as i64, 1, n).unwrap();
        let round = apply_skew(&apply_skew(&t, first).unwrap(), second).unwrap();
        prop_assert_eq!(round.values(), t.values());
    }

    #[test]
    fn energy_is_rotation_invariant(n in 8usize..200, phase in 0.05..1.5f64, rot in 0usize..200) {
        let rec = generate(&SynthSpec::ellipse(0.1, 30.0, phase).with_samples(n.max(16))).unwrap();
        let (mut b, mut h) = (rec.b().values().to_vec(), rec.h().values().to_vec());
        let e0 = loop_energy_density(&rec.to_loop());
        let r = rot % b.len();
        b.rotate_left(r);
        h.rotate_left(r);
        let e1 = loop_energy_density(&make_loop(&ts(b), &ts(h)).unwrap());
        prop_assert!((e1 - e0).abs() <= 1e-12 * e0.abs());
    }

    #[test]
    fn interpolation_keeps_the_area(b in series(4..30), h in series(4..30), k in prop::sample::select(vec![1u32, 10, 1000])) {
        let n = b.len().min(h.len());
        let (b, h) = (ts(b[..n].to_vec()), ts(h[..n].to_vec()));
        let raw = loop_energy_density(&make_loop(&b, &h).unwrap());
        let fine = loop_energy_density(
            &make_loop(&interpolate_periodic(&b, k).unwrap(), &interpolate_periodic(&h, k).unwrap()).unwrap(),
        );
        let scale = b.values().iter().map(|x| x.abs()).fold(0.0, f64::max)
            * h.values().iter().map(|x| x.abs()).fold(0.0, f64::max)
            * n as f64;
        prop_assert!((fine - raw).abs() <= 1e-6 * raw.abs().max(1e-9 * scale), "raw {raw} vs {fine}");
    }

    #[test]
    fn parallelogram_energy_ignores_duty(db in 0.05..0.4f64, hc in 5.0..20.0f64, s in 0.0..300.0f64) {
        let e: Vec<f64> = [0.2, 0.5, 0.8]
            .iter()
            .map(|&d| loop_energy_density(&generate(&SynthSpec::parallelogram(db, hc, s, d)).unwrap().to_loop()))
            .collect();
        for x in &e {
            prop_assert!((x - e[1]).abs() <= 1e-9 * e[1]);
        }
        prop_assert!((e[1] - 2.0 * hc * db).abs() <= 1e-12 * e[1]);
    }
}

/// Positive skew raises the loss and negative skew lowers it, monotonically
/// across the grid. The parallelogram's rectangular part loses area under
/// either sign of skew, so its cases keep the reversible slope dominant.
#[test]
fn loss_grows_with_skew() {
    let specs = [
        SynthSpec::ellipse(0.1, 50.0, PI / 6.0),
        SynthSpec::ellipse(0.2, 20.0, 1.0).with_frequency(400e3),
        SynthSpec::parallelogram(0.2, 10.0, 300.0, 0.5),
        SynthSpec::parallelogram(0.1, 5.0, 250.0, 0.3),
    ];
    for spec in specs {
        let ir = InterpolatedRecord::new(generate(&spec).unwrap(), 100).unwrap();
        let losses: Vec<f64> = (-20..=20)
            .map(|i| core_loss_of(&ir.skewed_loop(ir.skew(i * 100).unwrap()).unwrap(), spec.frequency).unwrap())
            .collect();
        for w in losses.windows(2) {
            assert!(w[1] > w[0], "{:?}: loss not increasing: {} then {}", spec.kind, w[0], w[1]);
        }
    }
}
