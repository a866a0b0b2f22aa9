use dualpair::builtins::builtin;
use dualpair::geometry::{Poly, ScalarField, Table, TrigPoly, VectorField};
use dualpair::leaves::*;
use dualpair::polarity::{Leg, Verdict};

fn coordinate_family(n: usize) -> Vec<ScalarField> {
    (0..n).map(|i| ScalarField::from_table(format!("mu{}", i + 1), Table::Poly(Poly::coordinate(n, i)))).collect()
}

#[test]
fn sphere_cloud_keeps_the_casimir() {
    let sys = builtin("so3-coadjoint").unwrap();
    let cloud = leaf_sample(&sys.tensor, &coordinate_family(3), &[0.0, 0.0, 1.0], &WordPolicy::default()).unwrap();
    assert_eq!(cloud.len(), 501);
    assert!(casimir_residual(&cloud, &sys.casimirs[0]).unwrap() < 1e-6);
    let mu3 = ScalarField::from_table("mu3", Table::Poly(Poly::coordinate(3, 2)));
    assert!(casimir_residual(&cloud, &mu3).unwrap() > 0.1);
    assert_eq!(pca_dimension(&cloud, 0.05), 2);
}

#[test]
fn t4_polar_leaf_is_three_dimensional_but_its_closure_is_not() {
    let sys = builtin("t4-example-7-8").unwrap();
    let leg = Leg::from_action(&sys.action, 2).unwrap();
    let m = [0.3, 1.1, 2.0, 0.7];
    let short = WordPolicy { max_len: 6, max_duration: 1.0, words: 2000, seed: 1, step: 5e-2 };
    let cloud = leaf_sample(&sys.tensor, &leg.family.members, &m, &short).unwrap();
    assert_eq!(pca_dimension(&cloud, 0.05), 3);
    let long = WordPolicy { max_len: 24, max_duration: 30.0, words: 4000, seed: 1, step: 5e-2 };
    let cloud = leaf_sample(&sys.tensor, &leg.family.members, &m, &long).unwrap();
    assert_eq!(pca_dimension(&cloud, 0.05), 4);
}

#[test]
fn irrational_line_covers_and_rational_line_stays_in_band() {
    let sys = builtin("t4-example-7-8").unwrap();
    let f = ScalarField::from_table("sin(theta1-psi1)", Table::Trig(TrigPoly::sin(vec![1, 0, -1, 0], 1.0)));
    let x = sys.tensor.hamiltonian_field(&f).unwrap();
    let m = [0.4, 0.2, 0.4, 1.3];
    let v = x.eval(&m);
    assert!((v[1] + 1.0).abs() < 1e-15 && (v[3] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    let cloud = trajectory_cloud(&x, &m, 1e4, 0.1, 1e-2).unwrap();
    assert!(density_report(&cloud, &[1, 3], 32).unwrap().fraction >= 0.99);

    let rational = VectorField::constant(sys.tensor.space.clone(), "slope 1", &[0.0, 1.0, 0.0, 1.0]).unwrap();
    let cloud = trajectory_cloud(&rational, &m, 1e4, 0.1, 1e-2).unwrap();
    let band = line_band(&[m[1], m[3]], &[1.0, 1.0], std::f64::consts::TAU, 32);
    assert!(band.len() <= 3 * 32);
    assert!(coverage_outside(&cloud, &[1, 3], 32, &band).unwrap() <= 0.05);
    assert!(density_report(&cloud, &[1, 3], 32).unwrap().fraction < 0.1);
}

#[test]
fn leaf_correspondence_verdicts() {
    let policy = WordPolicy { words: 100, step: 1e-2, ..Default::default() };
    for (name, m, expected) in [
        ("so3-coadjoint", vec![0.2, -0.5, 0.8], Verdict::Pass),
        ("t2-rotation", vec![0.7, 1.9], Verdict::Pass),
        ("t4-example-7-8", vec![0.3, 1.1, 2.0, 0.7], Verdict::Fail),
    ] {
        let sys = builtin(name).unwrap();
        let a = Leg::from_action(&sys.action, 4).unwrap();
        let b = a.polar(&sys.tensor).unwrap();
        let r = leaf_correspondence_check(&sys.tensor, &a, &b, &m, &policy, 10).unwrap();
        assert!(r.constancy, "{name}");
        assert_eq!(r.verdict, expected, "{name}");
    }
}

#[test]
fn commuting_invariant_families_are_conserved_along_their_own_clouds() {
    let policy = WordPolicy { words: 60, max_len: 4, step: 1e-2, ..Default::default() };
    let mut rng = dualpair::rng::stream(41, "noether");
    for name in dualpair::builtins::names() {
        let sys = builtin(name).unwrap();
        let leg = Leg::from_action(&sys.action, 4).unwrap();
        let pts = sys.sample_points(&mut rng, 20);
        let commuting =
            dualpair::polarity::howe_check(&sys.tensor, &leg.family, &leg.family, &pts).unwrap().residual < 1e-8;
        // on T² × T² the invariants θ2, ψ2 and θ1 − ψ1 do not commute
        assert_eq!(commuting, name != "t4-example-7-8", "{name}");
        let polar = leg.polar(&sys.tensor).unwrap();
        for m in pts.iter().take(3) {
            let cloud = leaf_sample(&sys.tensor, &leg.family.members, m, &policy).unwrap();
            for g in &polar.family.members {
                assert!(casimir_residual(&cloud, g).unwrap() < 1e-6, "{name}: {}", g.label);
            }
            if commuting {
                for f in &leg.family.members {
                    assert!(casimir_residual(&cloud, f).unwrap() < 1e-6, "{name}: {}", f.label);
                }
            }
        }
    }
}

#[test]
fn polar_subspaces_are_carried_along_recorded_words() {
    use dualpair::geometry::FlowWord;
    use dualpair::linalg::{self, SubspaceSample, RANK_TOL};
    let policy = WordPolicy { words: 8, max_len: 3, max_duration: 0.5, seed: 3, step: 1e-3 };
    let mut rng = dualpair::rng::stream(42, "carried polar");
    for name in dualpair::builtins::names() {
        let sys = builtin(name).unwrap();
        let leg = Leg::from_action(&sys.action, 4).unwrap();
        let fields = complete_hamiltonian_fields(&sys.tensor, &leg.family.members).unwrap();
        let n = sys.space().dim;
        for m in sys.sample_points(&mut rng, 2) {
            let cloud = reach_cloud(&sys.tensor.space, &fields, &m, &policy).unwrap();
            let here = leg.polar_at(&sys.tensor, &cloud.seed_point).unwrap();
            let v = linalg::columns_to_matrix(&here.basis, n);
            for (p, w) in cloud.points.iter().zip(&cloud.words) {
                let word = FlowWord::from_letters(w.letters.iter().map(|&(i, t)| (fields[i].clone(), t)).collect());
                let (end, pushed) = word.pushforward_matrix(&cloud.seed_point, &v, policy.step).unwrap();
                assert!(sys.space().distance(&end, p) < 1e-12);
                let carried = SubspaceSample::from_vectors(&end, n, linalg::matrix_columns(&pushed), RANK_TOL);
                let there = leg.polar_at(&sys.tensor, &end).unwrap();
                assert_eq!(carried.rank, there.rank, "{name}");
                assert!(carried.distance(&there) < 1e-4, "{name}: {}", carried.distance(&there));
            }
        }
    }
}
