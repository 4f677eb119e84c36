//! Randomized invariants: unitarity, group structure, reduced-state
//! positivity, and the coherence bounds every model must respect.

use loschmidt::dephasing::{DephasingModel, InitialProduct};
use loschmidt::ensemble::{gue, random_state, rng_from_seed};
use loschmidt::linalg::{
    kron, partial_trace_env, CompositeSpace, HermitianOperator, StateVector,
};
use loschmidt::oscillator::{branch_overlap, CatStateSpec, OscillatorBathModel};
use loschmidt::shorttime::ShortTimeModel;
use loschmidt::C64;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng as _;

fn random_hermitian(dim: usize, seed: u64) -> HermitianOperator {
    let mut rng = rng_from_seed(seed);
    gue(dim, 1.0, &mut rng).unwrap()
}

proptest! {
    #[test]
    fn propagators_are_unitary(dim in 2usize..=48, seed in 0u64..1_000_000, t in -5.0f64..5.0) {
        let h = random_hermitian(dim, seed);
        let u = h.spectrum().unwrap().propagator(t).unwrap();
        let mut worst: f64 = 0.0;
        let e = u.entries();
        for i in 0..dim {
            for j in 0..dim {
                let mut dot = C64::new(0.0, 0.0);
                for k in 0..dim {
                    dot += e[(k, i)].conj() * e[(k, j)];
                }
                let expected = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                worst = worst.max((dot - expected).norm());
            }
        }
        prop_assert!(worst <= 1e-10, "unitarity deviation {worst:.3e}");
    }

    #[test]
    fn propagators_compose_as_a_group(
        dim in 2usize..=32,
        seed in 0u64..1_000_000,
        t1 in -3.0f64..3.0,
        t2 in -3.0f64..3.0,
    ) {
        let spectrum = random_hermitian(dim, seed).spectrum().unwrap();
        let u1 = spectrum.propagator(t1).unwrap();
        let u2 = spectrum.propagator(t2).unwrap();
        let composed = u1.compose(&u2).unwrap();
        let direct = spectrum.propagator(t1 + t2).unwrap();
        let mut worst: f64 = 0.0;
        for (a, b) in composed.entries().iter().zip(direct.entries().iter()) {
            worst = worst.max((a - b).norm());
        }
        prop_assert!(worst <= 1e-10, "group deviation {worst:.3e}");
    }

    #[test]
    fn reduced_states_are_hermitian_psd_unit_trace(
        dim_c in 2usize..=4,
        dim_e in 2usize..=12,
        seed in 0u64..1_000_000,
    ) {
        let mut rng = rng_from_seed(seed);
        let space = CompositeSpace::new(dim_c, dim_e).unwrap();
        let psi = random_state(dim_c * dim_e, &mut rng).unwrap();
        let rho = partial_trace_env(&psi, space).unwrap();
        prop_assert!((rho.trace() - C64::new(1.0, 0.0)).norm() <= 1e-12);
        let entries = rho.entries();
        for i in 0..dim_c {
            for j in 0..dim_c {
                prop_assert!((entries[(i, j)] - entries[(j, i)].conj()).norm() <= 1e-12);
            }
        }
        let spectrum = HermitianOperator::new(entries.clone()).unwrap().spectrum().unwrap();
        for &lambda in spectrum.values() {
            prop_assert!(lambda >= -1e-10, "negative population {lambda:.3e}");
        }
    }

    #[test]
    fn kron_is_associative(
        da in 2usize..=3,
        db in 2usize..=3,
        dc in 2usize..=3,
        seed in 0u64..1_000_000,
    ) {
        let mut rng = rng_from_seed(seed);
        let a: Array2<C64> = gue(da, 1.0, &mut rng).unwrap().entries().clone();
        let b: Array2<C64> = gue(db, 1.0, &mut rng).unwrap().entries().clone();
        let c: Array2<C64> = gue(dc, 1.0, &mut rng).unwrap().entries().clone();
        let left = kron(&kron(&a.view(), &b.view()).unwrap().view(), &c.view()).unwrap();
        let right = kron(&a.view(), &kron(&b.view(), &c.view()).unwrap().view()).unwrap();
        let mut worst: f64 = 0.0;
        for (x, y) in left.iter().zip(right.iter()) {
            worst = worst.max((x - y).norm());
        }
        prop_assert!(worst <= 1e-12, "associativity deviation {worst:.3e}");
    }

    #[test]
    fn dephasing_coherence_is_bounded_and_conjugate_symmetric(
        dim_e in 2usize..=16,
        seed in 0u64..1_000_000,
        t in 0.0f64..4.0,
    ) {
        let mut rng = rng_from_seed(seed);
        let h_env = gue(dim_e, 1.0, &mut rng).unwrap();
        let couplings = vec![
            gue(dim_e, 1.0, &mut rng).unwrap(),
            gue(dim_e, 1.0, &mut rng).unwrap(),
        ];
        let model = DephasingModel::new(vec![0.4, -0.9], h_env, couplings).unwrap();
        let chi0 = random_state(dim_e, &mut rng).unwrap();
        let init = InitialProduct::uniform(2, chi0).unwrap();
        let c01 = model.coherence_factorized(&init, 0, 1, t).unwrap();
        let c10 = model.coherence_factorized(&init, 1, 0, t).unwrap();
        prop_assert!(c01.norm() <= 0.5 + 1e-12, "|coherence| {} above 1/2", c01.norm());
        prop_assert!((c01 - c10.conj()).norm() <= 1e-12, "not conjugate-symmetric");
        prop_assert!(c01.norm() <= init.coherence(0, 1).unwrap().norm() + 1e-12, "not contractive");
    }

    #[test]
    fn oscillator_flow_conserves_excitation_and_bounds_overlap(
        seed in 0u64..1_000_000,
        t in 0.01f64..3.0,
    ) {
        let mut rng = rng_from_seed(seed);
        let omega: Vec<f64> = (0..3).map(|_| 0.5 + 1.5 * rng.gen::<f64>()).collect();
        let g: Vec<f64> = (0..3).map(|_| 0.1 + 0.3 * rng.gen::<f64>()).collect();
        let model = OscillatorBathModel::new(1.0, omega, g, 4).unwrap();
        let z1 = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        let z2 = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        let dt = model.default_flow_step(t);
        let b1 = model.classical_flow(z1, t, dt).unwrap();
        let b2 = model.classical_flow(z2, t, dt).unwrap();
        prop_assert!((b1.excitation() - z1.norm_sqr()).abs() <= 1e-9);
        prop_assert!((b2.excitation() - z2.norm_sqr()).abs() <= 1e-9);
        let m = branch_overlap(&b1, &b2).unwrap();
        prop_assert!(m.norm() <= 1.0 + 1e-12, "overlap modulus {} above 1", m.norm());
        let c = model.cat_coherence(&CatStateSpec::new(z1, z2), t, dt).unwrap();
        prop_assert!((2.0 * c - m).norm() <= 1e-15);
    }

    #[test]
    fn shorttime_coherence_is_bounded(
        dim_e in 2usize..=10,
        seed in 0u64..1_000_000,
        t in 0.0f64..2.0,
    ) {
        let mut rng = rng_from_seed(seed);
        let h_c = gue(2, 1.0, &mut rng).unwrap();
        let s_op = gue(2, 1.0, &mut rng).unwrap();
        let h_env = gue(dim_e, 1.0, &mut rng).unwrap();
        let v_env = gue(dim_e, 1.0, &mut rng).unwrap();
        let b0 = random_state(dim_e, &mut rng).unwrap();
        let model = ShortTimeModel::new(h_c, s_op, h_env, v_env).unwrap();
        let values = model.s_values().to_owned();
        let c = model.shorttime_coherence(values[0], values[1], &b0, t).unwrap();
        prop_assert!(c.norm() <= 0.5 + 1e-12, "|coherence| {} above 1/2", c.norm());
        let e = model.exact_coherence(values[0], values[1], &b0, t).unwrap();
        prop_assert!(e.norm() <= 0.5 + 1e-12, "|exact| {} above 1/2", e.norm());
    }
}

#[test]
fn product_states_reduce_to_pure_central_projectors() {
    let mut rng = rng_from_seed(99);
    let space = CompositeSpace::new(3, 7).unwrap();
    let central = random_state(3, &mut rng).unwrap();
    let env = random_state(7, &mut rng).unwrap();
    let joint = space.product_of(&central, &env).unwrap();
    let rho = partial_trace_env(&joint, space).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let expected = central.amplitudes()[i] * central.amplitudes()[j].conj();
            assert!((rho.entry(i, j) - expected).norm() <= 1e-12);
        }
    }
    assert!((rho.purity() - 1.0).abs() <= 1e-12);
}

#[test]
fn normalized_returns_unit_vectors() {
    let raw = ndarray::array![C64::new(3.0, 0.0), C64::new(0.0, 4.0)];
    let v = StateVector::normalized(raw).unwrap();
    assert!((v.norm() - 1.0).abs() <= 1e-15);
}
