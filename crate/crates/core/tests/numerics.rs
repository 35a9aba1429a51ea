mod common;

use common::*;
use kfield::equations::{intrinsic_residual, legendre_field, ResidualKind, ResidualSource};
use kfield::geometry::{Bundle, Chart, DiscreteField, Grid};
use kfield::mechanics::{hamiltonian_from_lagrangian, LagrangianProblem};
use kfield::oracle::{seeded_bumps, variational_check, ActionFlavor};
use kfield::solvers::{manufactured_body_force, solve_cosserat, solve_navier, CosseratProblem, EllipticProblem};
use kfield::symexpr::{Expr, VarRef};

const MMS: [&str; 2] = ["sin(pi*x[1])*sin(pi*x[2])", "x[1]*x[2]*(1-x[1])*(1-x[2])"];

fn with_pi(p: LagrangianProblem) -> LagrangianProblem {
    p.with_param("pi", std::f64::consts::PI)
}

fn mms_problem(nodes: usize) -> EllipticProblem {
    let exact: Vec<Expr> = MMS.iter().map(|t| parse(t, 2, 2)).collect();
    let bare = with_pi(navier());
    let force = manufactured_body_force(&bare, &exact).unwrap();
    let p = bare.with_body_force(force).unwrap();
    let mut ep = EllipticProblem::new(p, Grid::unit(2, nodes).unwrap(), exact.clone());
    ep.exact = Some(exact);
    ep
}

fn linear_problem(nodes: usize) -> EllipticProblem {
    let boundary = vec![parse("x[1]+x[2]/2", 2, 2), parse("x[1]/3-x[2]", 2, 2)];
    EllipticProblem::new(with_pi(navier()), Grid::unit(2, nodes).unwrap(), boundary)
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[test]
fn navier_mms_converges_at_second_order() {
    let coarse = solve_navier(&mms_problem(17)).unwrap();
    let fine = solve_navier(&mms_problem(33)).unwrap();
    assert!(coarse.linear_residual <= 1e-10 && fine.linear_residual <= 1e-10);
    let rate = order(coarse.metrics["error_max"], fine.metrics["error_max"]);
    assert!((1.7..=2.3).contains(&rate), "order {rate}");
}

#[test]
fn linear_boundary_data_gives_the_affine_solution() {
    let rep = solve_navier(&linear_problem(9)).unwrap();
    for node in 0..rep.field.grid.len() {
        let x = rep.field.grid.position(node);
        assert!((rep.field.get(node, &VarRef::Q(1)).unwrap() - (x[0] + x[1] / 2.0)).abs() < 1e-9);
        assert!((rep.field.get(node, &VarRef::Q(2)).unwrap() - (x[0] / 3.0 - x[1])).abs() < 1e-9);
    }
}

fn lambda_residual(ep: &EllipticProblem, field: &DiscreteField) -> f64 {
    let cot = legendre_field(&ep.problem, field).unwrap();
    intrinsic_residual(ResidualKind::LambdaEl, ResidualSource::Lagrangian(&ep.problem), &cot, None)
        .unwrap()
        .max_norm
}

#[test]
fn lambda_residual_of_numeric_solution_is_second_order() {
    let coarse_p = mms_problem(17);
    let fine_p = mms_problem(33);
    let coarse = lambda_residual(&coarse_p, &solve_navier(&coarse_p).unwrap().field);
    let fine = lambda_residual(&fine_p, &solve_navier(&fine_p).unwrap().field);
    let rate = order(coarse, fine);
    assert!((1.7..=2.3).contains(&rate), "order {rate} ({coarse} -> {fine})");
}

fn exact_linear_field(p: &LagrangianProblem, nodes: usize) -> DiscreteField {
    let exprs = vec![(VarRef::Q(1), parse("x[1]+x[2]/2", 2, 2)), (VarRef::Q(2), parse("x[1]/3-x[2]", 2, 2))];
    let chart = Chart::new(2, 2, Bundle::Base).unwrap();
    DiscreteField::from_exprs(chart, Grid::unit(2, nodes).unwrap(), &exprs, &p.param_assignment()).unwrap()
}

#[test]
fn exact_linear_solution_has_vanishing_residuals() {
    let p = navier();
    let base = exact_linear_field(&p, 17);
    let cot = legendre_field(&p, &base).unwrap();
    let lam = intrinsic_residual(ResidualKind::LambdaEl, ResidualSource::Lagrangian(&p), &cot, None).unwrap();
    assert!(lam.max_norm < 1e-10, "{}", lam.max_norm);
    let special = p.specialize(&p.params).unwrap();
    let h = hamiltonian_from_lagrangian(&special).unwrap();
    let params = special.param_assignment();
    let src = ResidualSource::Hamiltonian { h: &h, n: 2, k: 2, params: &params };
    let hdw = intrinsic_residual(ResidualKind::ChiHdw, src, &cot, None).unwrap();
    assert!(hdw.max_norm < 1e-10, "{}", hdw.max_norm);
}

#[test]
fn action_is_stationary_at_the_solution() {
    let p = with_pi(navier());
    let rep = solve_navier(&linear_problem(33)).unwrap();
    for z in seeded_bumps(2, &rep.field.grid, 5, 0) {
        let v = variational_check(ActionFlavor::Hamilton, &p, &rep.field, &z, &[1e-3]).unwrap();
        assert!(v.ds_de.abs() < 1e-6, "{}", v.ds_de);
    }
}

fn perturbed_field(p: &LagrangianProblem) -> DiscreteField {
    let base = solve_navier(&linear_problem(33)).unwrap().field;
    let bump = DiscreteField::from_exprs(
        base.chart,
        base.grid.clone(),
        &[
            (VarRef::Q(1), parse("sin(pi*x[1])*sin(pi*x[2])/10", 2, 2)),
            (VarRef::Q(2), parse("x[1]^2*x[2]*(1-x[1])*(1-x[2])/20", 2, 2)),
        ],
        &p.param_assignment(),
    )
    .unwrap();
    let values = base.values.iter().zip(&bump.values).map(|(a, b)| a + b).collect();
    DiscreteField::new(base.chart, base.grid, values).unwrap()
}

#[test]
fn first_variation_matches_residual_pairing() {
    let p = with_pi(navier());
    let field = perturbed_field(&p);
    for z in seeded_bumps(2, &field.grid, 5, 3) {
        let v = variational_check(ActionFlavor::Hamilton, &p, &field, &z, &[1e-2, 1e-3]).unwrap();
        assert!(v.ds_de.abs() > 1e-6);
        assert!(v.relative_difference() < 0.02, "{}", v.relative_difference());
    }
}

#[test]
fn pontryagin_action_agrees_on_affine_fields() {
    let p = navier();
    let base = exact_linear_field(&p, 9);
    let pont = kfield::equations::pontryagin_field(&p, &base).unwrap();
    for z in seeded_bumps(2, &base.grid, 2, 5) {
        let h = variational_check(ActionFlavor::Hamilton, &p, &base, &z, &[1e-2]).unwrap();
        let hp = variational_check(ActionFlavor::HamiltonPontryagin, &p, &pont, &z, &[1e-2]).unwrap();
        assert!((h.ds_de - hp.ds_de).abs() < 1e-10, "{} vs {}", h.ds_de, hp.ds_de);
    }
}

#[test]
fn cosserat_constraints_and_definitions() {
    let coarse = solve_cosserat(&CosseratProblem::default()).unwrap();
    let viol = &coarse.report.constraint_violation;
    assert_eq!(viol.len(), 1000);
    assert!(viol.iter().all(|v| *v < 1e-8));
    let fine = solve_cosserat(&CosseratProblem { ns: 65, dt: 2.5e-5, steps: 4000, save_every: 400, ..Default::default() })
        .unwrap();
    for key in ["definition_residual_4", "definition_residual_5"] {
        for run in [&coarse, &fine] {
            let h = run.report.metrics["h"];
            assert!(run.report.metrics[key] < 1e-2 * h * h, "{key}: {}", run.report.metrics[key]);
        }
    }
    let r = order(coarse.report.metrics["definition_residual_5"], fine.report.metrics["definition_residual_5"]);
    assert!(r > 1.7, "{r}");
}

#[test]
fn cosserat_torsion_wave_conserves_energy() {
    let run = solve_cosserat(&CosseratProblem { rr: 0.0, ..Default::default() }).unwrap();
    assert!(run.report.metrics["torsion_energy_drift"] < 0.01);
    assert!(run.torsion_energy[0] > 0.0);
    let ymax = run.report.field.component(&VarRef::Q(2)).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert_eq!(ymax, 0.0);
}

#[test]
fn cosserat_rejects_unstable_steps() {
    assert!(solve_cosserat(&CosseratProblem { dt: 1e-2, ..Default::default() }).is_err());
    assert!(solve_cosserat(&CosseratProblem { save_every: 7, ..Default::default() }).is_err());
}
