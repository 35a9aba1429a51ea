use kfield::geometry::{Bundle, Chart, DiscreteField, Grid};
use kfield::mechanics::LagrangianProblem;
use kfield::solvers::conjugate_gradient;
use kfield::symexpr::{differentiate, equivalent, parse_with, Expr, Poly, VarRef};
use proptest::prelude::*;

const VARS: [&str; 5] = ["q[1]", "q[2]", "v[1,1]", "v[2,2]", "v[1,2]"];

fn polynomial() -> impl Strategy<Value = String> {
    prop::collection::vec((-5i64..=5, 1i64..=4, prop::collection::vec(0usize..VARS.len(), 0..=3)), 1..5).prop_map(
        |terms| {
            terms
                .into_iter()
                .map(|(c, d, f)| {
                    let mut s = format!("({c}/{d})");
                    for i in f {
                        s.push('*');
                        s.push_str(VARS[i]);
                    }
                    s
                })
                .collect::<Vec<_>>()
                .join("+")
        },
    )
}

fn expr(text: &str) -> Expr {
    parse_with(text, 2, 2).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printing_round_trips(text in polynomial()) {
        let e = expr(&text);
        let back = expr(&e.to_string());
        prop_assert!(equivalent(&e, &back).unwrap().equal);
        prop_assert_eq!(Poly::from_expr(&e), Poly::from_expr(&back));
    }

    #[test]
    fn differentiation_is_linear(a in polynomial(), b in polynomial(), v in 0usize..VARS.len()) {
        let var = match v { 0 => VarRef::Q(1), 1 => VarRef::Q(2), 2 => VarRef::V(1, 1), 3 => VarRef::V(2, 2), _ => VarRef::V(1, 2) };
        let sum = differentiate(&(expr(&a) + expr(&b)), var);
        let parts = differentiate(&expr(&a), var) + differentiate(&expr(&b), var);
        prop_assert!(equivalent(&sum, &parts).unwrap().equal);
    }

    #[test]
    fn product_rule_holds(a in polynomial(), b in polynomial()) {
        let var = VarRef::V(1, 1);
        let (ea, eb) = (expr(&a), expr(&b));
        let lhs = differentiate(&(ea.clone() * eb.clone()), var);
        let rhs = differentiate(&ea, var) * eb.clone() + ea * differentiate(&eb, var);
        prop_assert!(equivalent(&lhs, &rhs).unwrap().equal);
    }

    #[test]
    fn normal_form_is_canonical(a in polynomial(), b in polynomial()) {
        let (ea, eb) = (expr(&a), expr(&b));
        let square = Expr::powi(ea.clone() + eb.clone(), 2);
        let expanded = Expr::powi(ea.clone(), 2) + Expr::int(2) * ea * eb.clone() + Expr::powi(eb, 2);
        prop_assert_eq!(Poly::from_expr(&square), Poly::from_expr(&expanded));
    }

    #[test]
    fn hessian_is_symmetric(text in polynomial()) {
        let p = LagrangianProblem::new(2, 2, expr(&text)).unwrap();
        let rep = kfield::mechanics::velocity_hessian(&p, None).unwrap();
        for (r, row) in rep.hessian.iter().enumerate() {
            for (c, e) in row.iter().enumerate() {
                prop_assert!(equivalent(e, &rep.hessian[c][r]).unwrap().equal);
            }
        }
    }

    #[test]
    fn cg_solves_diagonally_dominant_systems(diag in prop::collection::vec(3.0f64..10.0, 2..40), b in prop::collection::vec(-1.0f64..1.0, 40)) {
        let n = diag.len();
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = diag[i] * x[i];
                if i > 0 { y[i] -= x[i - 1]; }
                if i + 1 < n { y[i] -= x[i + 1]; }
            }
        };
        let rhs = &b[..n];
        let out = conjugate_gradient(apply, &diag, rhs, 1e-12, 10 * n);
        prop_assert!(out.converged);
        let mut r = vec![0.0; n];
        apply(&out.solution, &mut r);
        for i in 0..n {
            prop_assert!((r[i] - rhs[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact(values in prop::collection::vec(-1e6f64..1e6, 2 * 12)) {
        let chart = Chart::new(2, 1, Bundle::Base).unwrap();
        let f = DiscreteField::new(chart, Grid::unit(1, 12).unwrap(), values).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = DiscreteField::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(f.values, g.values);
    }

    #[test]
    fn quadratic_fields_have_exact_grid_derivatives(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, nodes in 5usize..20) {
        let grid = Grid::unit(2, nodes).unwrap();
        let f = |node: usize| {
            let x = grid.position(node);
            a * x[0] * x[0] + b * x[0] * x[1] + c * x[1]
        };
        for node in 0..grid.len() {
            let x = grid.position(node);
            prop_assert!((grid.derivative(f, node, 0) - (2.0 * a * x[0] + b * x[1])).abs() < 1e-9);
            prop_assert!((grid.derivative(f, node, 1) - (b * x[0] + c)).abs() < 1e-9);
        }
    }
}
