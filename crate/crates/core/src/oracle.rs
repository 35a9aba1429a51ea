//! Independent checks: finite-difference derivatives, discrete actions and
//! the first-variation identity linking actions to the derived equations.

use std::fmt::Write as _;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equations::{derive_el, derive_implicit_el, RowKind};
use crate::geometry::{complete_lift, Bundle, Chart, DiscreteField, Grid, VectorFieldOnQ};
use crate::mechanics::LagrangianProblem;
use crate::solvers::{fmt17, row_values};
use crate::symexpr::{differentiate, evaluate, Assignment, Expr, Sym, VarRef};
use crate::{Error, Result};

/// Relative step of the central differences.
pub const FD_STEP: f64 = 1e-6;
/// Attempts at drawing an evaluable sample point.
pub const RESAMPLE_ATTEMPTS: usize = 8;
/// Tolerance for `Z` on boundary nodes.
pub const BOUNDARY_TOL: f64 = 1e-14;

fn sample_point(e: &Expr, params: &Assignment, rng: &mut ChaCha8Rng) -> Assignment {
    let mut a = params.clone();
    for s in e.symbols() {
        if a.get(&s).is_some() {
            continue;
        }
        let value = match s {
            Sym::Param(_) => rng.gen_range(0.5..2.0),
            _ => rng.gen_range(-2.0..2.0),
        };
        a.set(s, value);
    }
    a
}

/// Largest relative discrepancy between `∂e/∂v` and a central difference at
/// `points` seeded random points. Unset parameters are sampled too.
pub fn fd_derivative_check(e: &Expr, v: VarRef, points: usize, seed: u64, params: &Assignment) -> Result<f64> {
    let de = differentiate(e, v);
    let probe = e.clone() + Expr::var(v);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let mut last_err = None;
        let mut done = false;
        for _ in 0..RESAMPLE_ATTEMPTS {
            let mut a = sample_point(&probe, params, &mut rng);
            let x = a.get(&Sym::Var(v)).expect("sampled");
            let h = FD_STEP * x.abs().max(1.0);
            let attempt = (|| -> Result<f64> {
                let exact = evaluate(&de, &a)?;
                a.set_var(v, x + h);
                let up = evaluate(e, &a)?;
                a.set_var(v, x - h);
                let down = evaluate(e, &a)?;
                let approx = (up - down) / (2.0 * h);
                Ok((approx - exact).abs() / exact.abs().max(1.0))
            })();
            match attempt {
                Ok(err) => {
                    worst = worst.max(err);
                    done = true;
                    break;
                }
                Err(err @ Error::Domain(_)) => last_err = Some(err),
                Err(err) => return Err(err),
            }
        }
        if !done {
            return Err(last_err.expect("at least one attempt"));
        }
    }
    Ok(worst)
}

/// Which action functional to discretize.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionFlavor {
    /// `∫ L(φ, ∂φ) dx` for a field on `Q`.
    Hamilton,
    /// `∫ p^a_i(∂_a q^i - v^i_a) + L(q, v) dx` for a field on the Pontryagin bundle.
    HamiltonPontryagin,
}

impl ActionFlavor {
    pub fn name(&self) -> &'static str {
        match self {
            ActionFlavor::Hamilton => "hamilton",
            ActionFlavor::HamiltonPontryagin => "hamilton-pontryagin",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "hamilton" => Some(ActionFlavor::Hamilton),
            "hamilton-pontryagin" => Some(ActionFlavor::HamiltonPontryagin),
            _ => None,
        }
    }

    fn bundle(&self) -> Bundle {
        match self {
            ActionFlavor::Hamilton => Bundle::Base,
            ActionFlavor::HamiltonPontryagin => Bundle::Pontryagin,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionValue {
    pub value: f64,
    pub flavor: ActionFlavor,
    pub cells: usize,
    pub quadrature: &'static str,
}

fn check_field(flavor: ActionFlavor, p: &LagrangianProblem, field: &DiscreteField) -> Result<()> {
    let c = field.chart;
    if c.bundle != flavor.bundle() || c.n != p.n || c.k != p.k || field.grid.dims() != p.k {
        return Err(Error::ChartMismatch(format!(
            "the {} action needs a field on {}(n={}, k={}), got {c}",
            flavor.name(),
            flavor.bundle(),
            p.n,
            p.k
        )));
    }
    Ok(())
}

/// Lower corners of all cells of a grid.
fn cells(grid: &Grid) -> Vec<usize> {
    (0..grid.len())
        .filter(|&node| grid.multi_index(node).iter().zip(&grid.sizes).all(|(i, n)| i + 1 < *n))
        .collect()
}

/// Corner nodes of a cell with the axis bits of each corner.
fn corners(grid: &Grid, lower: usize) -> Vec<(usize, usize)> {
    (0..1usize << grid.dims())
        .map(|bits| {
            let offset: usize = (0..grid.dims()).filter(|a| bits >> a & 1 == 1).map(|a| grid.stride(a)).sum();
            (bits, lower + offset)
        })
        .collect()
}

/// Midpoint-rule action with corner-averaged values and cell-centered derivatives.
pub fn discrete_action(flavor: ActionFlavor, p: &LagrangianProblem, field: &DiscreteField) -> Result<ActionValue> {
    check_field(flavor, p, field)?;
    let grid = &field.grid;
    let coords = field.chart.coords();
    let dim = field.dim();
    let k = p.k;
    let lagrangian = p.full_lagrangian();
    let params = p.param_assignment();
    let volume: f64 = grid.spacings.iter().product();
    let weight = 1.0 / (1usize << k) as f64;
    let lower_cells = cells(grid);
    let cell_value = |lower: usize| -> Result<f64> {
        let cs = corners(grid, lower);
        let mut avg = vec![0.0; dim];
        for &(_, node) in &cs {
            for (s, v) in field.node_values(node).iter().enumerate() {
                avg[s] += weight * v;
            }
        }
        let mut asg = params.clone();
        let origin = grid.position(lower);
        for a in 0..k {
            asg.set_var(VarRef::X(a + 1), origin[a] + 0.5 * grid.spacings[a]);
        }
        for (y, v) in coords.iter().zip(&avg) {
            asg.set_var(*y, *v);
        }
        let mut penalty = 0.0;
        for i in 1..=p.n {
            let slot = field.slot(&VarRef::Q(i))?;
            for a in 1..=k {
                let mut d = 0.0;
                for &(bits, node) in &cs {
                    let sign = if bits >> (a - 1) & 1 == 1 { 1.0 } else { -1.0 };
                    d += sign * field.values[node * dim + slot];
                }
                d *= 2.0 * weight / grid.spacings[a - 1];
                match flavor {
                    ActionFlavor::Hamilton => {
                        asg.set_var(VarRef::V(i, a), d);
                    }
                    ActionFlavor::HamiltonPontryagin => {
                        let v = asg.get(&Sym::Var(VarRef::V(i, a))).expect("velocity set");
                        let m = asg.get(&Sym::Var(VarRef::P(a, i))).expect("momentum set");
                        penalty += m * (d - v);
                    }
                }
            }
        }
        Ok((evaluate(&lagrangian, &asg)? + penalty) * volume)
    };
    let total: f64 = crate::parallel::map_ordered(&lower_cells, cell_value)?.iter().sum();
    Ok(ActionValue { value: total, flavor, cells: lower_cells.len(), quadrature: "midpoint" })
}

/// First-variation comparison for one perturbation direction.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationalReport {
    pub flavor: ActionFlavor,
    /// `(ε, central difference quotient of the action)` for each step.
    pub quotients: Vec<(f64, f64)>,
    /// Quotient at the last step.
    pub ds_de: f64,
    /// `Σ_interior ⟨E, δ⟩ h^k` with the Euler-Lagrange residual `E`.
    pub inner: f64,
    pub difference: f64,
}

impl VariationalReport {
    pub fn relative_difference(&self) -> f64 {
        self.difference.abs() / self.inner.abs().max(self.ds_de.abs()).max(f64::MIN_POSITIVE)
    }

    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "flavor = {}", self.flavor.name());
        for (e, q) in &self.quotients {
            let _ = writeln!(out, "ds_de[{e:e}] = {}", fmt17(*q));
        }
        let _ = writeln!(out, "ds_de = {}", fmt17(self.ds_de));
        let _ = writeln!(out, "inner = {}", fmt17(self.inner));
        let _ = writeln!(out, "difference = {}", fmt17(self.difference));
        out
    }
}

/// Nodal variation `δy` of every chart coordinate induced by `Z`.
fn variations(flavor: ActionFlavor, z: &VectorFieldOnQ, field: &DiscreteField, params: &Assignment) -> Result<Vec<f64>> {
    let exprs = match flavor {
        ActionFlavor::Hamilton => z.components.clone(),
        ActionFlavor::HamiltonPontryagin => complete_lift(z, &field.chart)?,
    };
    let mut out = Vec::with_capacity(field.values.len());
    for node in 0..field.grid.len() {
        let mut asg = field.assignment(node);
        asg.extend(params);
        for e in &exprs {
            out.push(evaluate(e, &asg)?);
        }
    }
    Ok(out)
}

/// Compares `dS/dε` along `field + ε δ(Z)` with the residual pairing `⟨E, δ⟩`.
pub fn variational_check(
    flavor: ActionFlavor,
    p: &LagrangianProblem,
    field: &DiscreteField,
    z: &VectorFieldOnQ,
    eps: &[f64],
) -> Result<VariationalReport> {
    check_field(flavor, p, field)?;
    if z.n() != p.n {
        return Err(Error::ChartMismatch(format!("vector field has {} components, n = {}", z.n(), p.n)));
    }
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Problem("ε-list must contain positive steps".into()));
    }
    let params = p.param_assignment();
    let delta = variations(flavor, z, field, &params)?;
    let dim = field.dim();
    let grid = &field.grid;
    for node in (0..grid.len()).filter(|&m| grid.is_boundary(m)) {
        for i in 1..=p.n {
            let value = delta[node * dim + field.slot(&VarRef::Q(i))?];
            if value.abs() > BOUNDARY_TOL {
                return Err(Error::BoundaryViolation(format!(
                    "Z^{i} = {value:e} at boundary node {:?}",
                    grid.multi_index(node)
                )));
            }
        }
    }
    let shifted = |e: f64| -> Result<f64> {
        let values = field.values.iter().zip(&delta).map(|(v, d)| v + e * d).collect();
        let f = DiscreteField::new(field.chart, grid.clone(), values)?;
        Ok(discrete_action(flavor, p, &f)?.value)
    };
    let mut quotients = Vec::with_capacity(eps.len());
    for &e in eps {
        quotients.push((e, (shifted(e)? - shifted(-e)?) / (2.0 * e)));
    }
    let ds_de = quotients.last().expect("non-empty").1;

    let sys = match flavor {
        ActionFlavor::Hamilton => derive_el(p),
        ActionFlavor::HamiltonPontryagin => derive_implicit_el(p),
    };
    let slots: Vec<usize> = sys
        .rows
        .iter()
        .map(|row| {
            let y = match (row.kind, row.index.as_slice()) {
                (RowKind::Balance, [i]) => VarRef::Q(*i),
                (RowKind::MomentumDefinition, [a, i]) => VarRef::V(*i, *a),
                (RowKind::VelocityDefinition, [i, a]) => VarRef::P(*a, *i),
                _ => unreachable!("implicit systems carry only these rows"),
            };
            field.slot(&y)
        })
        .collect::<Result<_>>()?;
    let volume: f64 = grid.spacings.iter().product();
    let mut inner = 0.0;
    for (node, row) in row_values(&sys, field, None, &params)? {
        for (r, value) in row.iter().enumerate() {
            inner -= value * delta[node * dim + slots[r]] * volume;
        }
    }
    Ok(VariationalReport { flavor, quotients, ds_de, inner, difference: ds_de - inner })
}

fn exact(x: f64) -> Expr {
    Expr::Const(BigRational::from_float(x).expect("finite grid coordinate"))
}

/// Seeded polynomial bumps `c · Π_a (x_a - lo_a)(hi_a - x_a) · (1 + Σ r_a x_a)`
/// that vanish exactly on the boundary of `grid`.
pub fn seeded_bumps(n: usize, grid: &Grid, count: usize, seed: u64) -> Vec<VectorFieldOnQ> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = grid.dims();
    let last: Vec<usize> = grid.sizes.iter().map(|s| s - 1).collect();
    let hi = grid.position(grid.node(&last));
    let lo = grid.position(0);
    let frac = |rng: &mut ChaCha8Rng| Expr::rational(rng.gen_range(-9..=9), 10);
    (0..count)
        .map(|_| {
            let components = (0..n)
                .map(|_| {
                    let mut factors = vec![frac(&mut rng) + Expr::int(if rng.gen_bool(0.5) { 1 } else { -1 })];
                    let mut shape = vec![Expr::one()];
                    for a in 0..k {
                        let x = Expr::var(VarRef::X(a + 1));
                        factors.push((x.clone() - exact(lo[a])) * (exact(hi[a]) - x.clone()));
                        shape.push(frac(&mut rng) * x);
                    }
                    factors.push(Expr::add_all(shape));
                    Expr::mul_all(factors)
                })
                .collect();
            VectorFieldOnQ::new(components).expect("bumps depend on x only")
        })
        .collect()
}

/// Chart for a flavor's input field.
pub fn action_chart(flavor: ActionFlavor, n: usize, k: usize) -> Result<Chart> {
    Chart::new(n, k, flavor.bundle())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse_with;

    #[test]
    fn constant_expression_has_zero_error() {
        let e = parse_with("3/7", 1, 1).unwrap();
        assert_eq!(fd_derivative_check(&e, VarRef::Q(1), 20, 0, &Assignment::new()).unwrap(), 0.0);
    }

    #[test]
    fn exponential_derivative_matches() {
        let e = parse_with("exp(q[1])", 1, 1).unwrap();
        assert!(fd_derivative_check(&e, VarRef::Q(1), 100, 3, &Assignment::new()).unwrap() < 1e-6);
    }

    #[test]
    fn log_resamples_away_from_its_domain() {
        let e = parse_with("log(q[1])", 1, 1).unwrap();
        assert!(fd_derivative_check(&e, VarRef::Q(1), 20, 1, &Assignment::new()).unwrap() < 1e-6);
    }

    #[test]
    fn constant_lagrangian_integrates_to_area() {
        let p = LagrangianProblem::parse(1, 2, "1").unwrap();
        let grid = Grid::unit(2, 11).unwrap();
        let f = DiscreteField::zeros(Chart::new(1, 2, Bundle::Base).unwrap(), grid).unwrap();
        let s = discrete_action(ActionFlavor::Hamilton, &p, &f).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        assert_eq!(s.cells, 100);
    }

    #[test]
    fn dirichlet_energy_of_coordinate_function() {
        let p = LagrangianProblem::parse(1, 2, "(v[1,1]^2+v[1,2]^2)/2").unwrap();
        let grid = Grid::unit(2, 9).unwrap();
        let f = DiscreteField::from_fn(Chart::new(1, 2, Bundle::Base).unwrap(), grid, |x| vec![x[0]]).unwrap();
        let s = discrete_action(ActionFlavor::Hamilton, &p, &f).unwrap();
        assert!((s.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_direction_gives_zero_derivative() {
        let p = LagrangianProblem::parse(1, 2, "(v[1,1]^2+v[1,2]^2)/2+q[1]^3").unwrap();
        let grid = Grid::unit(2, 7).unwrap();
        let f = DiscreteField::from_fn(Chart::new(1, 2, Bundle::Base).unwrap(), grid, |x| vec![x[0] * x[1]]).unwrap();
        let z = VectorFieldOnQ::new(vec![Expr::zero()]).unwrap();
        let r = variational_check(ActionFlavor::Hamilton, &p, &f, &z, &[1e-4]).unwrap();
        assert_eq!(r.ds_de, 0.0);
        assert_eq!(r.inner, 0.0);
    }

    #[test]
    fn non_vanishing_direction_is_rejected() {
        let p = LagrangianProblem::parse(1, 2, "v[1,1]^2").unwrap();
        let grid = Grid::unit(2, 5).unwrap();
        let f = DiscreteField::zeros(Chart::new(1, 2, Bundle::Base).unwrap(), grid).unwrap();
        let z = VectorFieldOnQ::new(vec![Expr::one()]).unwrap();
        assert!(matches!(
            variational_check(ActionFlavor::Hamilton, &p, &f, &z, &[1e-4]),
            Err(Error::BoundaryViolation(_))
        ));
    }

    #[test]
    fn bumps_vanish_on_the_boundary() {
        let grid = Grid::new(vec![9, 7], vec![0.1, 0.3], vec![-0.2, 1.0]).unwrap();
        for z in seeded_bumps(2, &grid, 5, 11) {
            for node in (0..grid.len()).filter(|&m| grid.is_boundary(m)) {
                let mut a = Assignment::new();
                for (axis, x) in grid.position(node).iter().enumerate() {
                    a.set_var(VarRef::X(axis + 1), *x);
                }
                for c in &z.components {
                    assert_eq!(evaluate(c, &a).unwrap(), 0.0);
                }
            }
        }
    }
}
