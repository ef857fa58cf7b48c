//! Cross-module invariants: T-matrix contraction bounds, bias cancellation
//! under the axis constraint, model hierarchy, and criterion soundness on
//! randomized inputs.

use netsteer_core::criteria::{
    eval_bell, eval_nonlinear, preset, NonlinearSettings, PresetName, SourceSetting,
};
use netsteer_core::linalg::{expectation, kron, ComplexMatrix};
use netsteer_core::qubit::{
    jm_pair_check, observable, pauli, povm_from_bloch, random_orthonormal_axes,
    random_unit_bloch, BlochVector,
};
use netsteer_core::states::{
    bell_state, random_bell_diagonal, random_pure_qubit, random_two_qubit_state, star_state,
    t_matrix, BellKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn t_matrix_contraction_never_exceeds_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    for _ in 0..1000 {
        let rho = random_two_qubit_state(&mut rng);
        let t = t_matrix(&rho).unwrap();
        let sv = t.largest_singular_value();
        assert!(sv <= 1.0 + 1e-9, "largest singular value {sv}");
    }
}

#[test]
fn bias_term_drops_for_unbiased_bob_marginal() {
    // <(k I + r.sigma) (x) B> = <(r.sigma) (x) B> whenever Tr(B rho_B) = 0;
    // Bell-diagonal states have maximally mixed marginals, so any axis works.
    let mut rng = ChaCha8Rng::seed_from_u64(72);
    for _ in 0..200 {
        let rho = random_bell_diagonal(&mut rng);
        let k: f64 = rng.gen_range(-0.9..0.9);
        let r = random_unit_bloch(&mut rng).scale(rng.gen_range(0.0..(1.0 - k.abs())));
        let axis = random_unit_bloch(&mut rng);
        let b = axis.dot_sigma();
        let biased = kron(
            &ComplexMatrix::identity(2)
                .scale_re(k)
                .add(&r.dot_sigma())
                .unwrap(),
            &b,
        )
        .unwrap();
        let unbiased = kron(&r.dot_sigma(), &b).unwrap();
        let lhs = expectation(&biased, rho.matrix()).unwrap();
        let rhs = expectation(&unbiased, rho.matrix()).unwrap();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}

#[test]
fn pauli_correlations_route_through_t_matrix() {
    // <r.sigma (x) n.sigma> = (n, T^T r)
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    for _ in 0..200 {
        let rho = random_two_qubit_state(&mut rng);
        let t = t_matrix(&rho).unwrap();
        let r = random_unit_bloch(&mut rng).scale(rng.gen_range(0.0..1.0));
        let n = random_unit_bloch(&mut rng);
        let op = kron(&r.dot_sigma(), &n.dot_sigma()).unwrap();
        let direct = expectation(&op, rho.matrix()).unwrap();
        let via_t = n.dot(&t.apply_transpose(&r));
        assert!((direct - via_t).abs() < 1e-10);
    }
}

#[test]
fn violated_presets_use_incompatible_pairs() {
    // every violating preset measures an incompatible unbiased pair
    let diag = |sign: f64| {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        BlochVector::new(s, 0.0, sign * s)
    };
    for (name, n) in [
        (PresetName::NonlinearMaxent, 2),
        (PresetName::BellStar, 2),
        (PresetName::BellGhz, 2),
    ] {
        let report = preset(name, n).unwrap().evaluate().unwrap();
        assert!(report.violated, "{name} should violate");
        // both Alice families in this build are diagonal unit pairs
        let (compatible, _) = jm_pair_check(&diag(1.0), &diag(-1.0)).unwrap();
        assert!(!compatible);
    }
}

#[test]
fn compatible_pairs_never_violate_bell() {
    // compatible unbiased pairs per source admit a local model, so the Bell
    // value stays at or below 2^n for any state and Bob observables
    let mut rng = ChaCha8Rng::seed_from_u64(74);
    let mut tested = 0;
    while tested < 150 {
        let draw_pair = |rng: &mut ChaCha8Rng| loop {
            let r1 = random_unit_bloch(rng).scale(rng.gen_range(0.0..1.0));
            let r2 = random_unit_bloch(rng).scale(rng.gen_range(0.0..1.0));
            if jm_pair_check(&r1, &r2).unwrap().0 {
                return (r1, r2);
            }
        };
        let mut alice_obs = Vec::new();
        for _ in 0..2 {
            let (r1, r2) = draw_pair(&mut rng);
            alice_obs.push([
                observable(&povm_from_bloch(0.0, r1).unwrap()).op().clone(),
                observable(&povm_from_bloch(0.0, r2).unwrap()).op().clone(),
            ]);
        }
        let s = star_state(vec![
            random_two_qubit_state(&mut rng),
            random_two_qubit_state(&mut rng),
        ])
        .unwrap();
        let bob_obs: Vec<ComplexMatrix> = (0..4)
            .map(|_| {
                let m1 = random_unit_bloch(&mut rng).dot_sigma();
                let m2 = random_unit_bloch(&mut rng).dot_sigma();
                kron(&m1, &m2).unwrap()
            })
            .collect();
        let report = eval_bell(&s.bob_ordered_state().unwrap(), &alice_obs, &bob_obs).unwrap();
        assert!(
            report.value <= 4.0 + 1e-9,
            "compatible pairs gave Bell value {}",
            report.value
        );
        tested += 1;
    }
}

#[test]
fn nonlinear_never_exceeds_bound_on_random_quantum_inputs() {
    // quantum ceiling: the criterion tops out at sqrt(2), far below what
    // arbitrary tables could reach, and classical inputs stay at 1
    let mut rng = ChaCha8Rng::seed_from_u64(75);
    for _ in 0..100 {
        let s = star_state(vec![
            random_bell_diagonal(&mut rng),
            random_bell_diagonal(&mut rng),
        ])
        .unwrap();
        let per_source = (0..2)
            .map(|_| {
                let (n1, n2) = random_orthonormal_axes(&mut rng);
                let r1 = random_unit_bloch(&mut rng).scale(rng.gen_range(0.0..1.0));
                let r2 = random_unit_bloch(&mut rng).scale(rng.gen_range(0.0..1.0));
                SourceSetting {
                    povms: [
                        povm_from_bloch(0.0, r1).unwrap(),
                        povm_from_bloch(0.0, r2).unwrap(),
                    ],
                    bob_axes: [n1, n2],
                }
            })
            .collect();
        let settings = NonlinearSettings::new(per_source).unwrap();
        let report = eval_nonlinear(&s, &settings).unwrap();
        assert!(report.value <= std::f64::consts::SQRT_2 + 1e-9);
    }
}

#[test]
fn single_source_linear_inequalities_sanity() {
    // two- and three-term single-source steering bounds sqrt(2) and sqrt(3):
    // random finite LHS strategies obey them, the maximally entangled state
    // breaks both
    let mut rng = ChaCha8Rng::seed_from_u64(76);
    let axes2 = [BlochVector::new(1.0, 0.0, 0.0), BlochVector::new(0.0, 0.0, 1.0)];
    let axes3 = [
        BlochVector::new(1.0, 0.0, 0.0),
        BlochVector::new(0.0, 1.0, 0.0),
        BlochVector::new(0.0, 0.0, 1.0),
    ];

    for _ in 0..500 {
        // random one-source model: weights, responses, pure hidden states
        let card = 6;
        let weights = netsteer_core::states::dirichlet_uniform(card, &mut rng);
        let states: Vec<_> = (0..card).map(|_| random_pure_qubit(&mut rng)).collect();
        let responses: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..card).map(|_| rng.gen::<f64>()).collect())
            .collect();
        // <A_x (x) n.sigma> under the model = sum_xi w d(x, xi) (n, bloch_xi)
        let correlator = |x: usize, axis: &BlochVector| -> f64 {
            (0..card)
                .map(|xi| {
                    let d = 2.0 * responses[x][xi] - 1.0;
                    weights[xi] * d * axis.dot(&states[xi].bloch_vector().unwrap())
                })
                .sum()
        };
        let two_term = correlator(0, &axes2[0]) + correlator(1, &axes2[1]);
        assert!(two_term <= std::f64::consts::SQRT_2 + 1e-9);
        let three_term: f64 = (0..3).map(|j| correlator(j, &axes3[j])).sum();
        assert!(three_term <= 3.0_f64.sqrt() + 1e-9);
    }

    // maximally entangled source: A_1 = x, A_2 = z gives 2 > sqrt(2)
    let psi = bell_state(BellKind::PsiPlus);
    let xx = kron(&pauli(1).unwrap(), &pauli(1).unwrap()).unwrap();
    let zz = kron(&pauli(3).unwrap(), &pauli(3).unwrap()).unwrap();
    let two = expectation(&xx, psi.matrix()).unwrap() + expectation(&zz, psi.matrix()).unwrap();
    assert!((two - 2.0).abs() < 1e-12);
    assert!(two > std::f64::consts::SQRT_2);
    // with A_2 = -y the three-term value reaches 3 > sqrt(3)
    let yy = kron(&pauli(2).unwrap().scale_re(-1.0), &pauli(2).unwrap()).unwrap();
    let three = two + expectation(&yy, psi.matrix()).unwrap();
    assert!((three - 3.0).abs() < 1e-12);
    assert!(three > 3.0_f64.sqrt());
}
