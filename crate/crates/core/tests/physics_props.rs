use photonic_hpc::fock::{
    self, angle_count, build_unitary, exact_distribution, outcome_count, permanent, CircuitSpec, Complex64, ComplexMatrix, FockState,
};
use proptest::prelude::*;

fn naive_permanent(m: &ComplexMatrix) -> Complex64 {
    fn rec(m: &ComplexMatrix, row: usize, used: &mut [bool]) -> Complex64 {
        if row == m.rows() {
            return Complex64::new(1.0, 0.0);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for c in 0..m.cols() {
            if !used[c] {
                used[c] = true;
                acc += m.row(row)[c] * rec(m, row + 1, used);
                used[c] = false;
            }
        }
        acc
    }
    rec(m, 0, &mut vec![false; m.cols()])
}

fn square_matrix() -> impl Strategy<Value = ComplexMatrix> {
    (1usize..=6).prop_flat_map(|n| {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
            let rows = v.chunks(n).map(|r| r.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).collect();
            ComplexMatrix::from_rows(rows)
        })
    })
}

fn circuit() -> impl Strategy<Value = CircuitSpec> {
    (2usize..=8)
        .prop_flat_map(|m| (Just(m), prop::collection::vec(0..m, 1..=4), prop::collection::vec(1..m, 1..=3)))
        .prop_flat_map(|(m, photons, loops)| {
            let n = angle_count(m, &loops);
            (Just(m), Just(photons), Just(loops), prop::collection::vec(-3.2f64..3.2, n))
        })
        .prop_map(|(m, photons, loops, angles)| {
            let mut occ = vec![0u32; m];
            for p in photons {
                occ[p] += 1;
            }
            CircuitSpec::new(FockState::new(occ), loops, angles, 1)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ryser_matches_permutation_sum(m in square_matrix()) {
        let fast = permanent(&m).unwrap();
        let slow = naive_permanent(&m);
        prop_assert!((fast - slow).norm() <= 1e-9 * slow.norm().max(1e-12));
    }

    #[test]
    fn permanent_ignores_row_order(m in square_matrix(), k in 0usize..6) {
        let n = m.rows();
        let mut order: Vec<usize> = (0..n).collect();
        order.rotate_left(k % n);
        let shuffled = m.select(&order, &(0..n).collect::<Vec<_>>());
        let (a, b) = (permanent(&m).unwrap(), permanent(&shuffled).unwrap());
        prop_assert!((a - b).norm() <= 1e-9 * a.norm().max(1.0));
    }

    #[test]
    fn circuits_are_unitary(spec in circuit()) {
        prop_assert!(build_unitary(&spec).unwrap().unitarity_error() < 1e-12);
    }

    #[test]
    fn distribution_is_normalised_and_conserves_photons(spec in circuit()) {
        let dist = exact_distribution(&spec).unwrap();
        prop_assert!((dist.total_probability() - 1.0).abs() <= 1e-9);
        prop_assert_eq!(dist.len() as u128, outcome_count(&spec));
        for (outcome, p) in dist.iter() {
            prop_assert!(p >= -1e-15);
            prop_assert_eq!(outcome.total_photons(), spec.total_photons());
        }
    }

    #[test]
    fn sampling_is_seeded_and_complete(spec in circuit(), shots in 1u64..500, seed in any::<u64>()) {
        let spec = spec.with_shots(shots);
        let a = fock::sample(&spec, seed).unwrap();
        prop_assert_eq!(a.total(), shots);
        prop_assert_eq!(&a, &fock::sample(&spec, seed).unwrap());
        let dist = exact_distribution(&spec).unwrap();
        for (outcome, _) in a.iter() {
            prop_assert!(dist.probability(outcome) > 0.0);
        }
    }

    #[test]
    fn wrong_angle_counts_are_rejected(spec in circuit(), extra in prop::bool::ANY) {
        let mut angles = spec.bs_angles.clone();
        if extra || angles.is_empty() { angles.push(0.1) } else { angles.pop(); }
        prop_assert!(spec.with_angles(angles).validate(None).is_err());
    }
}
