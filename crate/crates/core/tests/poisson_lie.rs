use dualpair::builtins::{builtin, names};
use dualpair::geometry::{Poly, ScalarField, Table, TrigPoly};
use dualpair::lie::LieAlgebra;
use dualpair::linalg::{SubspaceSample, RANK_TOL};
use dualpair::rng::stream;
use proptest::prelude::*;
use rand::Rng;

/// A pair of test functions suited to the chart of `name`.
fn test_pair(name: &str, dim: usize) -> (ScalarField, ScalarField) {
    let sys = builtin(name).unwrap();
    if sys.space().all_periodic() {
        let mut a = vec![0; dim];
        a[0] = 1;
        a[dim - 1] = -1;
        let mut b = vec![0; dim];
        b[dim / 2] = 1;
        b[0] = 2;
        let mut c = vec![0; dim];
        c[1] = 1;
        let mut f = TrigPoly::sin(a, 1.0);
        f.add_term(c, 0.5, 0.0);
        (ScalarField::from_table("f", Table::Trig(f)), ScalarField::from_table("g", Table::Trig(TrigPoly::cos(b, 0.8))))
    } else {
        let mut f = Poly::zero(dim);
        f.add_term((0..dim).map(|i| if i == 0 { 2 } else { 0 }).collect(), 1.0);
        f.add_term((0..dim).map(|i| u32::from(i == dim - 1)).collect(), 0.5);
        let mut g = Poly::zero(dim);
        g.add_term((0..dim).map(|i| u32::from(i <= 1)).collect(), 1.0);
        g.add_term((0..dim).map(|i| if i == dim - 1 { 2 } else { 0 }).collect(), -0.3);
        (ScalarField::from_table("f", Table::Poly(f)), ScalarField::from_table("g", Table::Poly(g)))
    }
}

#[test]
fn time_derivative_along_a_flow_equals_the_bracket_on_every_builtin() {
    let mut rng = stream(21, "convention");
    for name in names() {
        let sys = builtin(name).unwrap();
        let (f, g) = test_pair(name, sys.space().dim);
        for m in sys.sample_points(&mut rng, 3) {
            let r = sys.tensor.convention_residual(&f, &g, &m, &[0.0, 0.2, 0.5], 1e-3).unwrap();
            assert!(r < 1e-6, "{name}: residual {r:e} at {m:?}");
        }
    }
}

#[test]
fn flipped_bracket_is_caught_by_the_convention_check() {
    // the check must see the difference between {f, g} and {g, f}
    let sys = builtin("so3-coadjoint").unwrap();
    let (f, g) = (ScalarField::coordinate(3, 0), ScalarField::coordinate(3, 1));
    let m = [0.3, -0.4, 0.8];
    let xg = sys.tensor.hamiltonian_field(&g).unwrap();
    let h = 1e-3;
    let zp = dualpair::geometry::flow(&xg, &m, h, 1e-4).unwrap();
    let zm = dualpair::geometry::flow(&xg, &m, -h, 1e-4).unwrap();
    let fd = (f.eval(&zp).unwrap() - f.eval(&zm).unwrap()) / (2.0 * h);
    let b = sys.tensor.bracket(&f, &g, &m).unwrap();
    assert!(b.abs() > 0.1);
    assert!((fd - b).abs() < 1e-6);
    assert!((fd + b).abs() > 0.1);
}

#[test]
fn jacobi_holds_for_every_builtin_tensor() {
    let mut rng = stream(22, "jacobi");
    for name in names() {
        let sys = builtin(name).unwrap();
        for m in sys.sample_points(&mut rng, 50) {
            assert!(sys.tensor.jacobi_residual(&m) < 1e-8, "{name}");
            assert!(sys.tensor.antisymmetry_residual(&m) == 0.0, "{name}");
        }
    }
}

#[test]
fn symplectic_orthogonal_is_an_involution_with_complementary_dimension() {
    let mut rng = stream(23, "orthogonal");
    for name in ["t2-rotation", "t4-example-7-8", "r2-translations"] {
        let sys = builtin(name).unwrap();
        let n = sys.space().dim;
        for m in sys.sample_points(&mut rng, 10) {
            assert!(sys.tensor.is_nondegenerate(&m));
            for k in 0..=n {
                let vectors: Vec<Vec<f64>> =
                    (0..k).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
                let s = SubspaceSample::from_vectors(&m, n, vectors, RANK_TOL);
                let orth = sys.tensor.symplectic_orthogonal(&s).unwrap();
                assert_eq!(s.rank + orth.rank, n, "{name}");
                let back = sys.tensor.symplectic_orthogonal(&orth).unwrap();
                assert!(back.equals(&s, 1e-8), "{name}, dim {k}");
            }
        }
    }
}

#[test]
fn builtin_algebras_satisfy_jacobi_exactly() {
    for alg in [LieAlgebra::so3(), LieAlgebra::se2(), LieAlgebra::heisenberg(), LieAlgebra::abelian(4).unwrap()] {
        assert!(alg.jacobi_residual() < 1e-12, "{}", alg.name);
    }
}

#[test]
fn casimir_of_so3_has_zero_hamiltonian_field() {
    let sys = builtin("so3-coadjoint").unwrap();
    let x = sys.tensor.hamiltonian_field(&sys.casimirs[0]).unwrap();
    let mut rng = stream(24, "casimir");
    for m in sys.sample_points(&mut rng, 50) {
        assert!(x.eval(&m).iter().all(|v| v.abs() < 1e-15), "{:?}", x.eval(&m));
        let b = sys.tensor.matrix(&m);
        assert!((&b - LieAlgebra::so3().lie_poisson_matrix(&m)).amax() == 0.0);
    }
}

fn algebra(i: usize) -> LieAlgebra {
    match i {
        0 => LieAlgebra::so3(),
        1 => LieAlgebra::se2(),
        _ => LieAlgebra::heisenberg(),
    }
}

proptest! {
    #[test]
    fn coadjoint_pairing_matches_the_bracket(
        which in 0usize..3,
        xi in prop::array::uniform3(-2.0f64..2.0),
        eta in prop::array::uniform3(-2.0f64..2.0),
        mu in prop::array::uniform3(-2.0f64..2.0),
    ) {
        let alg = algebra(which);
        let lhs: f64 = alg.coad(&xi, &mu).iter().zip(&eta).map(|(a, b)| a * b).sum();
        let rhs: f64 = mu.iter().zip(alg.bracket(&xi, &eta)).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn lie_poisson_bracket_of_linear_functions_is_the_lie_bracket(
        which in 0usize..3,
        xi in prop::array::uniform3(-2.0f64..2.0),
        eta in prop::array::uniform3(-2.0f64..2.0),
        mu in prop::array::uniform3(-2.0f64..2.0),
    ) {
        // {⟨·, ξ⟩, ⟨·, η⟩}(μ) = ⟨μ, [ξ, η]⟩
        let alg = algebra(which);
        let linear = |v: [f64; 3]| {
            let mut p = Poly::zero(3);
            for (i, c) in v.iter().enumerate() {
                let mut e = vec![0; 3];
                e[i] = 1;
                p.add_term(e, *c);
            }
            ScalarField::from_table("linear", Table::Poly(p))
        };
        let tensor = dualpair::poisson::PoissonTensor::lie_poisson(&alg).unwrap();
        let b = tensor.bracket(&linear(xi), &linear(eta), &mu).unwrap();
        let expected: f64 = mu.iter().zip(alg.bracket(&xi, &eta)).map(|(a, b)| a * b).sum();
        prop_assert!((b - expected).abs() < 1e-12);
    }
}
