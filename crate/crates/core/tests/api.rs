use cayley_qmc::analysis::{marker_observable, ordered_solution, quasi_gap};
use cayley_qmc::boundary::{magnetization, solve_disordered, solve_ordered};
use cayley_qmc::state::{eval_finite, eval_recursive, translation_report};
use cayley_qmc::{Branch, Error, EvalContext, ModelParams, Observable, Pauli, TreeCoord};
use proptest::prelude::*;

fn point() -> ModelParams {
    ModelParams::new(1.0, 0.5, 0.8).unwrap()
}

#[test]
fn ordered_branches_are_mirror_images() {
    let p = point();
    let (plus, minus) = solve_ordered(&p).unwrap().unwrap();
    assert_eq!(plus.h, [minus.h[1], minus.h[0]]);
    assert!(magnetization(&plus) > 0.0);
    assert_eq!(magnetization(&plus), -magnetization(&minus));

    let z = Observable::single_pauli(TreeCoord::from_digits(&[2, 1]), Pauli::Z);
    let up = eval_recursive(&EvalContext::new(p, &plus).unwrap(), &z);
    let down = eval_recursive(&EvalContext::new(p, &minus).unwrap(), &z);
    assert!((up + down).norm() < 1e-12);
    assert!(up.re > 0.0);
}

#[test]
fn disordered_state_has_no_magnetization() {
    let p = point();
    let ctx = EvalContext::new(p, &solve_disordered(&p).unwrap()).unwrap();
    for digits in [&[][..], &[1], &[2, 2, 1]] {
        let z = Observable::single_pauli(TreeCoord::from_digits(digits), Pauli::Z);
        assert!(eval_recursive(&ctx, &z).norm() < 1e-13);
    }
    assert!((eval_recursive(&ctx, &Observable::identity()).re - 1.0).abs() < 1e-13);
}

#[test]
fn observable_json_round_trip_and_evaluation() {
    let text = r#"{"terms":[
        {"coeff":[1,0],"factors":[{"site":[],"pauli":"Z"},{"site":[1,2],"pauli":"Z"}]},
        {"coeff":[0,0.5],"factors":[{"site":[2],"matrix":[[[0,0],[1,0]],[[1,0],[0,0]]]}]}
    ]}"#;
    let obs = Observable::from_json(text).unwrap();
    assert_eq!(obs.terms.len(), 2);
    let back = Observable::from_json(&obs.to_json().unwrap()).unwrap();
    assert_eq!(back, obs);

    let p = point();
    let ctx = EvalContext::new(p, &ordered_solution(&p, Branch::OrderedMinus).unwrap()).unwrap();
    let rec = eval_recursive(&ctx, &obs);
    let dense = eval_finite(&ctx, &obs, 2).unwrap();
    assert!((rec - dense).norm() < 1e-10);
}

#[test]
fn malformed_observables_are_rejected() {
    for text in [
        r#"{"terms":[{"coeff":[1,0],"factors":[{"site":[3],"pauli":"Z"}]}]}"#,
        r#"{"terms":[{"coeff":[1,0],"factors":[{"site":[1],"pauli":"W"}]}]}"#,
        r#"{"terms":[{"coeff":[1,0],"factors":[{"site":[1]}]}]}"#,
        r#"{"terms":[{"coeff":[1,0],"factors":[{"site":[1],"matrix":[[[1,0]]]}]}]}"#,
        r#"{"terms":[{"coeff":[1,0],"factors":[],"extra":1}]}"#,
    ] {
        assert!(Observable::from_json(text).is_err(), "accepted {text}");
    }
    let dup = r#"{"terms":[{"coeff":[1,0],"factors":[{"site":[1],"pauli":"Z"},{"site":[1],"pauli":"X"}]}]}"#;
    assert!(Observable::from_json(dup).is_err());
}

#[test]
fn mismatched_boundary_is_refused() {
    let p = point();
    let q = ModelParams::new(1.2, 0.5, 0.8).unwrap();
    let sol = solve_disordered(&q).unwrap();
    assert!(matches!(EvalContext::new(p, &sol), Err(Error::ModelInconsistency { .. })));
}

#[test]
fn states_depend_on_level_but_not_on_position_within_it() {
    let p = point();
    let ctx = EvalContext::new(p, &ordered_solution(&p, Branch::OrderedPlus).unwrap()).unwrap();
    let f = Observable::single_pauli(TreeCoord::root(), Pauli::Z);
    let shifts: Vec<TreeCoord> =
        [&[1][..], &[2], &[1, 1], &[2, 1], &[1, 2, 2]].iter().map(|d| TreeCoord::from_digits(d)).collect();
    let r = translation_report(&ctx, &f, &shifts);
    assert!(r.same_level_spread < 1e-13);
    assert!(r.spread > 1e-3);
}

#[test]
fn gap_between_ordered_states_persists_at_depth() {
    let p = point();
    let g = quasi_gap(&p).unwrap();
    let ctx = |b| EvalContext::new(p, &ordered_solution(&p, b).unwrap()).unwrap();
    let (plus, minus) = (ctx(Branch::OrderedPlus), ctx(Branch::OrderedMinus));
    for n in [10, 25, 40] {
        let m = marker_observable(n);
        let gap = (eval_recursive(&plus, &m) - eval_recursive(&minus, &m)).norm();
        let envelope = g.i2 * g.lam.abs().powi(n as i32 - 1);
        assert!((gap - g.i1).abs() <= envelope + 1e-12, "n = {n}: gap {gap}, I1 {}", g.i1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn states_are_positive_and_normalized(
        j0 in 0.2f64..2.0, frac in -0.9f64..0.9, beta in 0.2f64..1.5,
        d in proptest::collection::vec(1u8..=2, 0..6),
        w in proptest::collection::vec(-1.0f64..1.0, 4),
    ) {
        let p = ModelParams::new(j0, frac * j0, beta).unwrap();
        let mut sols = vec![solve_disordered(&p).unwrap()];
        if let Some((a, b)) = solve_ordered(&p).unwrap() {
            sols.push(a);
            sols.push(b);
        }
        let site = TreeCoord::from_digits(&d);
        // b*b is positive for b = w0 + w1 X + w2 Y + w3 Z
        let b = Observable::single_pauli(site.clone(), Pauli::I).scale(w[0].into())
            .add(&Observable::single_pauli(site.clone(), Pauli::X).scale(w[1].into()))
            .add(&Observable::single_pauli(site.clone(), Pauli::Y).scale(w[2].into()))
            .add(&Observable::single_pauli(site, Pauli::Z).scale(w[3].into()));
        let pos = b.adjoint().mul(&b);
        for sol in &sols {
            let ctx = EvalContext::new(p, sol).unwrap();
            let one = eval_recursive(&ctx, &Observable::identity());
            prop_assert!((one.re - 1.0).abs() < 1e-11 && one.im.abs() < 1e-12);
            let v = eval_recursive(&ctx, &pos);
            prop_assert!(v.re > -1e-12 && v.im.abs() < 1e-12);
        }
    }
}
