use gaugekit::caratheodory::certify_bound;
use gaugekit::{
    build_family, compute_d, enumerate_optimal_face, solve, DataFit, FamilySpec, Problem, SensingOperator, SolverConfig,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_problem(spec: FamilySpec, m: usize, n: usize, seed: u64, equality: bool) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = SensingOperator::gaussian(m, n, seed).unwrap();
    let y = DVector::from_fn(m, |_, _| rng.gen_range(-2.0..2.0));
    let fit = if equality { DataFit::EqualityIndicator { y } } else { DataFit::SquaredL2 { y } };
    Problem::new(build_family(&spec).unwrap(), phi, fit, 0.4).unwrap()
}

#[test]
fn solver_value_matches_enumeration() {
    let specs = [FamilySpec::L1Ball { n: 6 }, FamilySpec::NonnegOrthant { n: 6 }, FamilySpec::GeneralizedTV1D { n: 6 }];
    for (k, spec) in specs.iter().enumerate() {
        for seed in 0..15u64 {
            for equality in [false, true] {
                let p = random_problem(spec.clone(), 3, 6, 100 * k as u64 + seed, equality);
                let face = match enumerate_optimal_face(&p) {
                    Ok(f) => f,
                    // infeasible equality constraints under the orthant
                    Err(_) => continue,
                };
                let res = solve(&p, &SolverConfig::default()).unwrap();
                let scale = face.optimal_value.abs().max(1.0);
                assert!(
                    (res.objective - face.optimal_value).abs() <= 1e-8 * scale,
                    "{spec:?} seed {seed} equality {equality}: solver {} oracle {}",
                    res.objective,
                    face.optimal_value
                );
                assert!(face.bounds_ok, "{spec:?} seed {seed}");
            }
        }
    }
}

#[test]
fn certified_representation_meets_bound() {
    for seed in 0..20u64 {
        let p = random_problem(FamilySpec::GeneralizedTV1D { n: 8 }, 4, 8, seed, false);
        let res = solve(&p, &SolverConfig::default()).unwrap();
        let (rep, report) = certify_bound(&res, &p).unwrap();
        assert!(report.bound_met, "seed {seed}: {report:?}");
        assert_eq!(report.d, 1);
        assert!(rep.r() as i64 <= 4 - 1 + i64::from(report.delta));
    }
}

#[test]
fn gtv1d_point_samples_give_piecewise_constant_fit() {
    // two samples on each side of a step
    let phi = SensingOperator::point_samples(&[1, 3, 6, 8], 10).unwrap();
    let y = DVector::from_vec(vec![0.0, 0.0, 2.0, 2.0]);
    let p =
        Problem::new(build_family(&FamilySpec::GeneralizedTV1D { n: 10 }).unwrap(), phi, DataFit::SquaredL2 { y }, 0.1)
            .unwrap();
    let res = solve(&p, &SolverConfig::default()).unwrap();
    assert!(res.converged);
    let u = res.rep.assemble().unwrap();
    let jumps = (1..10).filter(|&i| (u[i] - u[i - 1]).abs() > 1e-8).count();
    assert_eq!(jumps, 1, "{u:?}");
    // with the level fitted away the objective is (2 - s)²/2 + λs
    let jump = u[9] - u[0];
    assert!((jump - 1.9).abs() < 1e-8, "jump {jump}");
}

#[test]
fn lineality_image_of_gtv_under_point_samples() {
    let g = build_family(&FamilySpec::GeneralizedTV1D { n: 5 }).unwrap();
    let phi = SensingOperator::point_samples(&[0, 4], 5).unwrap();
    let lin = compute_d(&g, &phi);
    assert_eq!(lin.d, 1);
    assert_eq!(lin.quotient.nrows(), 1);
    assert!((&lin.quotient * &lin.basis).amax() < 1e-12);
}

#[test]
fn face_of_l1_with_kernel_direction() {
    // y = e_1 + e_2 measured by the sum: every convex combination of
    // the two atoms is optimal, a one-dimensional face
    let phi = SensingOperator::from_rows(&[vec![1.0, 1.0, 0.0]]).unwrap();
    let p = Problem::new(
        build_family(&FamilySpec::L1Ball { n: 3 }).unwrap(),
        phi,
        DataFit::EqualityIndicator { y: DVector::from_vec(vec![2.0]) },
        1.0,
    )
    .unwrap();
    let face = enumerate_optimal_face(&p).unwrap();
    assert!((face.optimal_value - 2.0).abs() < 1e-12);
    assert_eq!(face.dim, 1);
    assert_eq!(face.vertices.len(), 2);
    assert!(face.rays.is_empty());
    assert!(face.s_k_ok);
    assert!(face.bounds_ok);
}
