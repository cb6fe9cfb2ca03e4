use dtnml::analysis::{hamming, regressor_coefficients, suppression_exponent_fit};
use dtnml::bayes::{to_singly_stochastic, to_unitary_stochastic, ProbVector};
use dtnml::channels::{dephase_local, dephase_qubits, dephase_single};
use dtnml::data::{encode_feature, feature_density, EncodedSample};
use dtnml::linalg::{
    apply_unitary, expm_grad, hermitian_expm, min_eigenvalue, partial_trace, purity, CMatrix, DensityMatrix,
    HermitianParam, UnitaryMatrix, C64,
};
use dtnml::network::{AncillaScheme, Network, NetworkTopology};
use dtnml::train::{cross_entropy, init_params};
use proptest::prelude::*;

fn hermitian(dim: usize, scale: f64) -> impl Strategy<Value = HermitianParam> {
    prop::collection::vec(-1.0f64..1.0, dim * dim)
        .prop_map(move |v| HermitianParam::from_packed(dim, v.into_iter().map(|x| x * scale).collect()).unwrap())
}

fn unitary(dim: usize) -> impl Strategy<Value = UnitaryMatrix> {
    hermitian(dim, 2.0).prop_map(|h| hermitian_expm(&h).unwrap())
}

fn density(dim: usize) -> impl Strategy<Value = DensityMatrix> {
    prop::collection::vec(-1.0f64..1.0, 2 * dim * dim).prop_map(move |v| {
        let a = CMatrix::from_vec(dim, v.chunks(2).map(|c| C64::new(c[0], c[1])).collect());
        let m = a.matmul(&a.adjoint());
        let t = m.trace().re.max(1e-300);
        DensityMatrix::new(m.scale(C64::new(1.0 / t, 0.0))).unwrap()
    })
}

fn qubits_and_density() -> impl Strategy<Value = (usize, DensityMatrix)> {
    (1usize..=3).prop_flat_map(|n| (Just(n), density(1 << n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitary_conjugation_preserves_trace((n, rho) in qubits_and_density(), seed in any::<u64>()) {
        let u = hermitian_expm(&HermitianParam::from_packed(1 << n, (0..1usize << (2 * n))
            .map(|i| ((seed.wrapping_mul(i as u64 + 1) % 1000) as f64) / 500.0 - 1.0).collect()).unwrap()).unwrap();
        let out = apply_unitary(&rho, &u).unwrap();
        prop_assert!((out.matrix().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_composes(rho in density(8), q1 in 0usize..3, q2 in 0usize..2) {
        // After removing q1 the register shrinks; q2 indexes the remaining qubits.
        let rest: Vec<usize> = (0..3).filter(|&q| q != q1).collect();
        let stepwise = partial_trace(&partial_trace(&rho, &[q1]).unwrap(), &[q2]).unwrap();
        let joint = partial_trace(&rho, &[q1, rest[q2]]).unwrap();
        prop_assert!(stepwise.matrix().max_abs_diff(joint.matrix()) < 1e-12);
    }

    #[test]
    fn expm_of_negated_generator_is_adjoint(h in hermitian(4, 3.0)) {
        let neg = HermitianParam::from_packed(4, h.packed().iter().map(|x| -x).collect()).unwrap();
        let a = hermitian_expm(&h).unwrap();
        let b = hermitian_expm(&neg).unwrap();
        prop_assert!(a.adjoint().matrix().max_abs_diff(b.matrix()) < 1e-10);
    }

    #[test]
    fn expm_grad_matches_finite_differences(dim_exp in 1u32..=3, h in hermitian(8, 1.0), e in hermitian(8, 1.0)) {
        let dim = 1usize << dim_exp;
        let cut = |x: &HermitianParam| HermitianParam::from_packed(dim, x.packed()[..dim * dim].to_vec()).unwrap();
        let (h, e) = (cut(&h), cut(&e));
        let analytic = expm_grad(&h, &e.to_matrix()).unwrap();
        let step = 1e-5;
        let shifted = |s: f64| {
            let v = h.packed().iter().zip(e.packed()).map(|(a, b)| a + s * b).collect();
            hermitian_expm(&HermitianParam::from_packed(dim, v).unwrap()).unwrap().matrix().clone()
        };
        let fd = shifted(step).sub(&shifted(-step)).scale(C64::new(0.5 / step, 0.0));
        let err = analytic.sub(&fd).as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let norm = fd.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(err / norm < 1e-5, "rel err {}", err / norm);
    }

    #[test]
    fn dephasing_never_raises_single_qubit_purity(rho in density(2), p in 0.0f64..=1.0) {
        let out = dephase_single(&rho, p).unwrap();
        prop_assert!(purity(&out) <= purity(&rho) + 1e-15);
    }

    #[test]
    fn dephasing_preserves_trace_and_hermiticity((_n, rho) in qubits_and_density(), p in 0.0f64..=1.0) {
        let out = dephase_local(&rho, p).unwrap();
        prop_assert!((out.matrix().trace().re - 1.0).abs() < 1e-12);
        prop_assert!(out.matrix().hermiticity_error() < 1e-12);
    }

    #[test]
    fn dephasing_composes((_n, rho) in qubits_and_density(), p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
        let twice = dephase_local(&dephase_local(&rho, p).unwrap(), q).unwrap();
        let once = dephase_local(&rho, 1.0 - (1.0 - p) * (1.0 - q)).unwrap();
        prop_assert!(twice.matrix().max_abs_diff(once.matrix()) < 1e-12);
    }

    #[test]
    fn dephasing_traced_qubits_is_invisible(rho in density(8), a in 0usize..3, p in 0.0f64..=1.0) {
        let direct = partial_trace(&rho, &[a]).unwrap();
        let dephased = partial_trace(&dephase_qubits(&rho, &[a], p).unwrap(), &[a]).unwrap();
        prop_assert!(direct.matrix().max_abs_diff(dephased.matrix()) < 1e-12);
    }

    #[test]
    fn purity_formula_for_real_coherence(l0 in 0.0f64..=1.0, frac in 0.0f64..=1.0, p in 0.0f64..=1.0) {
        let l1 = 1.0 - l0;
        let c = frac * (l0 * l1).sqrt();
        let rho = DensityMatrix::new(CMatrix::from_real(2, &[l0, c, c, l1])).unwrap();
        let out = dephase_single(&rho, p).unwrap();
        let want = 1.0 - 2.0 * l0 * l1 + 2.0 * (1.0 - p).powi(2) * c * c;
        prop_assert!((purity(&out) - want).abs() < 1e-12);
    }

    #[test]
    fn encoded_features_are_unit_nonnegative_rank_one(x in 0.0f64..=1.0) {
        let [a, b] = encode_feature(x).unwrap();
        prop_assert!(a >= 0.0 && b >= 0.0 && (a * a + b * b - 1.0).abs() < 1e-15);
        let rho = feature_density(x).unwrap();
        prop_assert!(min_eigenvalue(rho.matrix()) > -1e-12);
        prop_assert!((purity(&rho) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singly_stochastic_marginalizes_unitary_stochastic(u in unitary(8), traced in 1usize..3) {
        let m = to_unitary_stochastic(&u).unwrap();
        let traced_qubits: Vec<usize> = (3 - traced..3).collect();
        let s = to_singly_stochastic(&u, &traced_qubits).unwrap();
        let da = 1 << traced;
        for b in 0..s.rows() {
            for j in 0..8 {
                let sum: f64 = (0..da).map(|a| m.get(b * da + a, j)).sum();
                prop_assert!((s.get(b, j) - sum).abs() < 1e-12);
            }
        }
        for c in s.column_sums() {
            prop_assert!((c - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn prob_vectors_stay_normalized(us in prop::collection::vec(unitary(4), 1..20), start in 0.0f64..=1.0) {
        let mut v = ProbVector::new(vec![start, 0.0, 1.0 - start, 0.0]).unwrap();
        for u in &us {
            v = v.apply(&to_unitary_stochastic(u).unwrap()).unwrap();
            prop_assert!((v.entries().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn regression_report_matches_channel_pipeline(u in unitary(4), rho in density(4), p in 0.0f64..=1.0) {
        let want = apply_unitary(&dephase_local(&rho, p).unwrap(), &u).unwrap().matrix().diag_real();
        let got = regressor_coefficients(&u, p).unwrap().reconstruct_diagonal(rho.matrix()).unwrap();
        for (a, b) in want.iter().zip(&got) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn exponents_are_hamming_distances(u in unitary(8), j in 0usize..8, k in 0usize..8) {
        let f = suppression_exponent_fit(&u, (j, k)).unwrap();
        prop_assert_eq!(f.exponent, hamming(j, k));
        prop_assert!(f.residual < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forward_gives_probabilities_and_ignores_zero_rate(
        seed in any::<u64>(),
        features in prop::collection::vec(0.0f64..=1.0, 8),
        k in 0usize..2,
    ) {
        let topo = NetworkTopology::ttn(8, k, AncillaScheme::PerQubit).unwrap();
        let mut net = Network::new(topo).unwrap();
        init_params(&mut net, 0.5, seed).unwrap();
        let s = EncodedSample::new(features, 0).unwrap();
        let on = net.forward(&s).unwrap();
        prop_assert!(on.probs.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
        prop_assert!((on.probs[0] + on.probs[1] - 1.0).abs() < 1e-12);
        prop_assert!(cross_entropy(&on, 0) >= 0.0);
        net.set_data_dephasing(false);
        let off = net.forward(&s).unwrap();
        prop_assert!((on.probs[0] - off.probs[0]).abs() < 1e-12);
    }

    #[test]
    fn schemes_with_equal_ancillas_share_parameter_count(log_m in 2u32..=6, k in 0usize..=1) {
        let m = 1usize << log_m;
        let pq = NetworkTopology::ttn(m, k, AncillaScheme::PerQubit).unwrap();
        let pn = NetworkTopology::ttn(m, 2 * k, AncillaScheme::PerNode).unwrap();
        prop_assert_eq!(pq.parameter_count(), pn.parameter_count());
        prop_assert!(pq.shapes().iter().all(|s| s.ancilla_rule_holds()));
        prop_assert!(pn.shapes().iter().all(|s| s.ancilla_rule_holds()));
    }
}
