use num_complex::Complex64;
use proptest::prelude::*;
use qrisk_core::circuit::{Circuit, Control, Gate, GateKind};
use qrisk_core::sim::StateVector;

const N: usize = 5;

fn arb_gate() -> impl Strategy<Value = Gate> {
    let kind = prop_oneof![
        (-3.2f64..3.2, -3.2f64..3.2, -3.2f64..3.2).prop_map(|(theta, phi, lambda)| GateKind::U3 { theta, phi, lambda }),
        Just(GateKind::X),
        Just(GateKind::Z),
        Just(GateKind::H),
        (-3.2f64..3.2).prop_map(GateKind::Phase),
        (0u32..3, any::<bool>()).prop_map(|(k, decrement)| GateKind::Increment { k, decrement }),
    ];
    (kind, Just((0..N).collect::<Vec<_>>()).prop_shuffle(), 0usize..3, prop::collection::vec(any::<bool>(), 3))
        .prop_map(|(kind, order, n_ctrl, pol)| {
            let n_targets = if matches!(kind, GateKind::Increment { .. }) { 2 } else { 1 };
            let targets = order[..n_targets].to_vec();
            let controls = order[n_targets..n_targets + n_ctrl]
                .iter()
                .zip(pol)
                .map(|(&q, on)| if on { Control::on(q) } else { Control::off(q) })
                .collect::<Vec<_>>();
            Gate { kind, targets, controls }
        })
}

fn arb_circuit() -> impl Strategy<Value = Circuit> {
    prop::collection::vec(arb_gate(), 1..30).prop_map(|gates| {
        let mut c = Circuit::new(N);
        c.extend(gates);
        c
    })
}

fn arb_state() -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << N).prop_map(|v| {
        let norm = v.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt().max(1e-6);
        StateVector::from_amplitudes(v.into_iter().map(|(a, b)| Complex64::new(a / norm, b / norm)).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn circuits_preserve_norm(c in arb_circuit(), s in arb_state()) {
        let before = s.norm_sqr();
        let mut s = s;
        s.apply(&c).unwrap();
        prop_assert!((s.norm_sqr() - before).abs() <= 1e-9);
    }

    #[test]
    fn inverse_undoes_circuit(c in arb_circuit(), s in arb_state()) {
        let mut t = s.clone();
        t.apply(&c).unwrap();
        t.apply(&c.inverse()).unwrap();
        prop_assert!(t.max_abs_diff(&s) <= 1e-12);
    }

    #[test]
    fn text_format_round_trips(c in arb_circuit()) {
        let back = Circuit::parse_text(&c.to_text()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn result_does_not_depend_on_thread_count(c in arb_circuit(), s in arb_state()) {
        let mut a = s.clone();
        a.apply(&c).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| {
            let mut b = s.clone();
            b.apply(&c).unwrap();
            b
        });
        prop_assert_eq!(a.amplitudes(), b.amplitudes());
    }
}

#[test]
fn controlled_circuit_acts_only_when_control_is_set() {
    let mut c = Circuit::new(3);
    c.push(Gate::h(0));
    c.push(Gate::x(1).with_control(Control::on(0)));
    let cc = c.controlled(Control::on(2));
    let mut off = StateVector::zero(3).unwrap();
    off.apply(&cc).unwrap();
    assert_eq!(off.probability(0), 1.0);
    let mut on = StateVector::basis(3, 0b100).unwrap();
    on.apply(&cc).unwrap();
    assert!((on.probability(0b100) - 0.5).abs() < 1e-12);
    assert!((on.probability(0b111) - 0.5).abs() < 1e-12);
}
