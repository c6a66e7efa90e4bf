use gaugekit::families::{forward_difference, psd_decompose};
use gaugekit::model::{unvec, vec_of};
use gaugekit::{
    build_family, evaluate_gauge, sparsify, AtomicRepresentation, DataFit, FamilySpec, Problem, SensingOperator, Term,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn l1_gauge_is_subadditive_and_homogeneous(a in vec_strategy(6), b in vec_strategy(6), t in 0.0..10.0f64) {
        let g = build_family(&FamilySpec::L1Ball { n: 6 }).unwrap();
        let (a, b) = (DVector::from_vec(a), DVector::from_vec(b));
        let ja = evaluate_gauge(&g, &a).unwrap();
        let jb = evaluate_gauge(&g, &b).unwrap();
        let jab = evaluate_gauge(&g, &(&a + &b)).unwrap();
        prop_assert!(jab <= ja + jb + 1e-12);
        let jt = evaluate_gauge(&g, &(&a * t)).unwrap();
        prop_assert!((jt - t * ja).abs() <= 1e-9 * (1.0 + jt));
    }

    #[test]
    fn gtv_gauge_ignores_constants(a in vec_strategy(7), c in -5.0..5.0f64) {
        let g = build_family(&FamilySpec::GeneralizedTV1D { n: 7 }).unwrap();
        let a = DVector::from_vec(a);
        let shifted = a.add_scalar(c);
        let ja = evaluate_gauge(&g, &a).unwrap();
        prop_assert!((ja - evaluate_gauge(&g, &shifted).unwrap()).abs() <= 1e-9 * (1.0 + ja));
        prop_assert!((ja - (forward_difference(7) * &a).abs().sum()).abs() <= 1e-9 * (1.0 + ja));
    }

    #[test]
    fn assemble_is_linear_in_weights(w in prop::collection::vec(0.01..3.0f64, 4), s in 0.1..4.0f64) {
        let g = build_family(&FamilySpec::L1Ball { n: 4 }).unwrap();
        let atoms = g.atoms().unwrap();
        let terms: Vec<Term> = w.iter().enumerate().map(|(k, &alpha)| Term { alpha, atom: atoms[2 * k].clone() }).collect();
        let rep = AtomicRepresentation::new(DVector::zeros(4), terms.clone());
        let scaled = AtomicRepresentation::new(
            DVector::zeros(4),
            terms.iter().map(|t| Term { alpha: s * t.alpha, atom: t.atom.clone() }).collect(),
        );
        let diff = scaled.assemble().unwrap() - rep.assemble().unwrap() * s;
        prop_assert!(diff.amax() <= 1e-12);
        prop_assert!((scaled.cost() - s * rep.cost()).abs() <= 1e-12);
    }

    #[test]
    fn sparsify_conserves_measurements(w in prop::collection::vec(0.0..2.0f64, 10), seed in 0u64..1000) {
        let phi = SensingOperator::gaussian(3, 10, seed).unwrap();
        let g = build_family(&FamilySpec::L1Ball { n: 10 }).unwrap();
        let atoms = g.atoms().unwrap();
        let terms: Vec<Term> = w
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 1e-3)
            .map(|(k, &alpha)| Term { alpha, atom: atoms[2 * k + (k % 2)].clone() })
            .collect();
        let rep = AtomicRepresentation::new(DVector::zeros(10), terms);
        let y = phi.apply(&rep.assemble().unwrap()).unwrap();
        let p = Problem::new(g, phi.clone(), DataFit::SquaredL2 { y: y.clone() }, 1.0).unwrap();
        let (out, report) = sparsify(&rep, &p, false).unwrap();
        let z = phi.apply(&out.assemble().unwrap()).unwrap();
        prop_assert!((z - &y).amax() <= 1e-9 * (1.0 + y.amax()));
        prop_assert!(out.cost() <= rep.cost() + 1e-9);
        prop_assert!(report.r_out <= report.r_in);
        prop_assert!(out.terms.iter().all(|t| t.alpha > 0.0));
    }

    #[test]
    fn psd_decomposition_reassembles(entries in prop::collection::vec(-2.0..2.0f64, 9)) {
        let b = DMatrix::from_vec(3, 3, entries);
        let x = &b * b.transpose();
        let parts = psd_decompose(&x);
        let mut sum = DMatrix::zeros(3, 3);
        for (w, v) in &parts {
            prop_assert!(*w >= 0.0);
            sum += v * v.transpose() * *w;
        }
        prop_assert!((sum - &x).amax() <= 1e-9 * (1.0 + x.amax()));
        let back = unvec(&vec_of(&x), 3);
        prop_assert_eq!(back, x);
    }
}
