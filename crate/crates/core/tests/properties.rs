use std::f64::consts::{PI, TAU};

use berryloop::berry::{hadamard_overlap, principal_value};
use berryloop::ed::wilson_loop_phase;
use berryloop::io::RunConfig;
use berryloop::pauli::{apply_pauli, pauli_mul, rotate_in_place};
use berryloop::{ModelParams, PauliString, StateVector, C64};
use proptest::prelude::*;

const NQ: usize = 3;

fn state() -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << NQ)
        .prop_filter_map("zero vector", |v| {
            let amps = v.into_iter().map(|(r, i)| C64::new(r, i)).collect();
            StateVector::from_amplitudes(amps).ok()?.normalized().ok()
        })
}

fn pauli() -> impl Strategy<Value = PauliString> {
    (0u64..(1 << NQ), 0u64..(1 << NQ))
        .prop_filter("identity", |(x, z)| x | z != 0)
        .prop_map(|(x, z)| PauliString::new(NQ, x, z).unwrap())
}

fn rotated(s: &StateVector, theta: f64, p: &PauliString) -> StateVector {
    let mut amps = s.amplitudes().to_vec();
    rotate_in_place(&mut amps, theta, p);
    StateVector::from_amplitudes(amps).unwrap()
}

proptest! {
    #[test]
    fn principal_value_range_and_periodicity(phi in -50.0f64..50.0, k in -5i32..5) {
        let r = principal_value(phi);
        prop_assert!(r > -PI && r <= PI);
        let shifted = principal_value(phi + TAU * k as f64);
        let d = principal_value(r - shifted);
        prop_assert!(d.abs() < 1e-9);
        prop_assert!((principal_value(r) - r).abs() < 1e-15);
    }

    #[test]
    fn rotations_compose(s in state(), p in pauli(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let two = rotated(&rotated(&s, a, &p), b, &p);
        let one = rotated(&s, a + b, &p);
        prop_assert!(two.distance(&one).unwrap() < 1e-12);
        let back = rotated(&rotated(&s, a, &p), -a, &p);
        prop_assert!(back.distance(&s).unwrap() < 1e-12);
    }

    #[test]
    fn rotations_preserve_norm(s in state(), ops in prop::collection::vec((pauli(), -3.0f64..3.0), 0..12)) {
        let mut amps = s.amplitudes().to_vec();
        for (p, t) in &ops {
            rotate_in_place(&mut amps, *t, p);
        }
        let out = StateVector::from_amplitudes(amps).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_closed_form(s in state(), p in pauli(), t in -3.0f64..3.0) {
        let ps = apply_pauli(&p, &s).unwrap();
        let expect: Vec<C64> = s
            .amplitudes()
            .iter()
            .zip(ps.amplitudes())
            .map(|(a, b)| a * t.cos() - C64::i() * t.sin() * b)
            .collect();
        let got = rotated(&s, t, &p);
        for (g, e) in got.amplitudes().iter().zip(&expect) {
            prop_assert!((g - e).norm() < 1e-12);
        }
    }

    #[test]
    fn pauli_product_acts_as_composition(s in state(), p in pauli(), q in pauli()) {
        let (phase, pq) = pauli_mul(&p, &q).unwrap();
        let lhs = apply_pauli(&p, &apply_pauli(&q, &s).unwrap()).unwrap();
        let rhs = apply_pauli(&pq, &s).unwrap().scaled(phase);
        prop_assert!(lhs.distance(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn wilson_loop_ignores_rephasing(
        base in state(),
        gens in prop::collection::vec((pauli(), -0.3f64..0.3), 3..10),
        phases in prop::collection::vec(-PI..PI, 10),
    ) {
        let mut chain = vec![base.clone()];
        for (p, t) in &gens {
            let next = rotated(chain.last().unwrap(), *t, p);
            chain.push(next);
        }
        let rephased: Vec<StateVector> = chain
            .iter()
            .zip(&phases)
            .map(|(s, &a)| s.clone().scaled(C64::from_polar(1.0, a)))
            .collect();
        let a = wilson_loop_phase(&chain).unwrap();
        let b = wilson_loop_phase(&rephased).unwrap();
        prop_assert!(principal_value(a - b).abs() < 1e-10);
    }

    #[test]
    fn overlap_phase_tracks_final_rephasing(s in state(), p in pauli(), t in -0.5f64..0.5, alpha in -PI..PI) {
        let f = rotated(&s, t, &p);
        let o1 = hadamard_overlap(&s, &f).unwrap();
        let o2 = hadamard_overlap(&s, &f.clone().scaled(C64::from_polar(1.0, alpha))).unwrap();
        prop_assert!(principal_value(o2.phi_qc - o1.phi_qc - alpha).abs() < 1e-10);
        prop_assert!((o1.modulus - o2.modulus).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&o1.p0));
    }

    #[test]
    fn config_round_trips(
        delta in -1.0f64..1.0,
        u in 0.0f64..20.0,
        period in 0.1f64..500.0,
        cut in 1e-8f64..1e-1,
        values in prop::collection::vec(-1.0f64..1.0, 0..5),
    ) {
        let mut c = RunConfig::new(ModelParams::four_site(delta, u));
        c.protocol.period = period;
        c.protocol.dynamics.l2_cut = cut;
        if !values.is_empty() {
            c.sweep = Some(berryloop::io::SweepSpec { axis: berryloop::io::SweepAxis::Delta, values });
        }
        let text = c.to_json().unwrap();
        prop_assert_eq!(RunConfig::from_json(&text).unwrap(), c.clone());
        prop_assert_eq!(RunConfig::from_json(&text).unwrap().to_json().unwrap(), text);
    }
}
