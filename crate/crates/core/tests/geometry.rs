use std::sync::Arc;

use dualpair::builtins::builtin;
use dualpair::dual::Dual;
use dualpair::geometry::{flow, FlowWord, PhaseSpace, Poly, ScalarField, Table, TrigPoly, VectorField};
use proptest::prelude::*;

fn rotation_field() -> VectorField {
    let space = Arc::new(PhaseSpace::euclidean("R2", 2).unwrap());
    let tables = vec![Table::Poly(Poly::coordinate(2, 1).scale(-1.0)), Table::Poly(Poly::coordinate(2, 0))];
    VectorField::from_tables(space, "rotation", tables).unwrap()
}

#[test]
fn rk4_converges_at_fourth_order_on_the_rotation() {
    let x = rotation_field();
    let z0 = [1.0, 0.5];
    let t: f64 = 3.0;
    let exact = [z0[0] * t.cos() - z0[1] * t.sin(), z0[0] * t.sin() + z0[1] * t.cos()];
    let steps = [1e-2, 5e-3, 2.5e-3];
    let errors: Vec<f64> = steps
        .iter()
        .map(|&h| {
            let z = flow(&x, &z0, t, h).unwrap();
            ((z[0] - exact[0]).powi(2) + (z[1] - exact[1]).powi(2)).sqrt()
        })
        .collect();
    for (e, h) in errors.iter().zip(steps) {
        assert!(*e < 1.0 * h.powi(4), "error {e:e} at step {h}");
    }
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((3.8..4.2).contains(&order), "observed order {order} from {errors:?}");
    }
}

/// Hamiltonian fields on the torus with nonconstant coefficients.
fn torus_letters() -> Vec<Arc<VectorField>> {
    let sys = builtin("t2-rotation").unwrap();
    let hs = [
        TrigPoly::sin(vec![1, 0], 1.0),
        TrigPoly::cos(vec![0, 1], 0.7),
        TrigPoly::sin(vec![1, 1], 0.5),
        TrigPoly::cos(vec![1, -2], 0.3),
    ];
    hs.into_iter()
        .enumerate()
        .map(|(i, h)| {
            let f = ScalarField::from_table(format!("h{i}"), Table::Trig(h));
            Arc::new(sys.tensor.hamiltonian_field(&f).unwrap())
        })
        .collect()
}

fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    let space = PhaseSpace::torus("T2", 2).unwrap();
    space.distance(a, b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn inverse_word_returns_to_the_start(
        letters in prop::collection::vec((0usize..4, -1.0f64..1.0), 1..=4),
        z in prop::array::uniform2(0.0f64..std::f64::consts::TAU),
    ) {
        let fields = torus_letters();
        let w = FlowWord::from_letters(letters.iter().map(|&(i, t)| (fields[i].clone(), t)).collect());
        let there = w.endpoint(&z, 1e-3).unwrap();
        let back = w.inverse().endpoint(&there, 1e-3).unwrap();
        prop_assert!(torus_distance(&back, &z) < 1e-6);
    }

    #[test]
    fn trig_gradients_match_central_differences(
        coeffs in prop::collection::vec(-1.0f64..1.0, 8),
        z in prop::array::uniform3(-3.0f64..3.0),
    ) {
        let modes: [[i32; 3]; 4] = [[1, 0, 0], [0, 2, -1], [1, 1, 1], [3, 0, 1]];
        let mut p = TrigPoly::zero(3);
        for (k, mode) in modes.iter().enumerate() {
            p.add_term(mode.to_vec(), coeffs[2 * k], coeffs[2 * k + 1]);
        }
        let f = ScalarField::from_table("p", Table::Trig(p));
        check_gradient(&f, &z)?;
    }

    #[test]
    fn closed_form_gradients_match_central_differences(
        a in -1.0f64..1.0,
        z in prop::array::uniform3(-2.0f64..2.0),
    ) {
        let f = ScalarField::closed(3, "g", move |x: &[Dual]| {
            (x[0] * x[1]).sin() * a + (x[2] * 0.5).exp() - x[0] * x[2] * x[2]
        });
        check_gradient(&f, &z)?;
    }
}

fn check_gradient(f: &ScalarField, z: &[f64]) -> Result<(), TestCaseError> {
    let g = f.gradient(z).unwrap();
    let h = 1e-5;
    for (i, gi) in g.iter().enumerate() {
        let mut zp = z.to_vec();
        zp[i] += h;
        let mut zm = z.to_vec();
        zm[i] -= h;
        let fd = (f.eval(&zp).unwrap() - f.eval(&zm).unwrap()) / (2.0 * h);
        prop_assert!((gi - fd).abs() < 1e-6, "coordinate {}: {} vs {}", i, gi, fd);
    }
    Ok(())
}
