//! Problem files: TOML documents describing a Lagrangian field theory and
//! the configuration of its solvers.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::equations::ConstraintSet;
use crate::geometry::Grid;
use crate::mechanics::{hamiltonian_from_lagrangian, LagrangianProblem};
use crate::solvers::{manufactured_body_force, CosseratInitial, CosseratProblem, EllipticProblem};
use crate::symexpr::{parse_with, Expr};
use crate::{Error, Result};

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub problem: ProblemSection,
    #[serde(default)]
    pub constraint: Vec<ConstraintSection>,
    pub grid: Option<GridSection>,
    pub boundary: Option<BoundarySection>,
    pub cosserat: Option<CosseratSection>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub n: usize,
    pub k: usize,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub lagrangian: String,
    pub hamiltonian: Option<String>,
    pub bodyforce: Option<Vec<String>>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSection {
    pub phi: String,
    pub eta: Vec<String>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub sizes: Vec<usize>,
    pub spacings: Option<Vec<f64>>,
    pub origin: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    /// Dirichlet data per field component.
    pub values: Option<Vec<String>>,
    /// Manufactured solution used by `--mms`.
    pub mms: Option<Vec<String>>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CosseratSection {
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub kk: f64,
    pub rr: f64,
    pub dt: f64,
    pub steps: usize,
    pub ns: Option<usize>,
    pub length: Option<f64>,
    pub cfl: Option<f64>,
    pub save_every: Option<usize>,
    /// `x, y, θ, ẋ, ẏ, θ̇` at `t = 0` as expressions in `s`.
    pub initial: Option<Vec<String>>,
}

const PI: &str = "pi";

impl ProblemFile {
    pub fn parse(text: &str) -> Result<ProblemFile> {
        toml::from_str(text).map_err(|e| Error::Problem(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<ProblemFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        ProblemFile::parse(&text)
    }

    fn expr(&self, text: &str) -> Result<Expr> {
        parse_with(text, self.problem.n, self.problem.k)
    }

    fn exprs(&self, texts: &[String], what: &str) -> Result<Vec<Expr>> {
        if texts.len() != self.problem.n {
            return Err(Error::Problem(format!(
                "{what} needs {} expressions, got {}",
                self.problem.n,
                texts.len()
            )));
        }
        texts.iter().map(|t| self.expr(t)).collect()
    }

    /// Parameter table with `pi` filled in unless the file defines it.
    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut p = self.problem.params.clone();
        p.entry(PI.to_string()).or_insert(std::f64::consts::PI);
        p
    }

    /// The Lagrangian problem, with body force and constraints when declared.
    pub fn lagrangian_problem(&self) -> Result<LagrangianProblem> {
        let sec = &self.problem;
        let mut p = LagrangianProblem::new(sec.n, sec.k, self.expr(&sec.lagrangian)?)?;
        p.params = self.params();
        if let Some(f) = &sec.bodyforce {
            p = p.with_body_force(self.exprs(f, "bodyforce")?)?;
        }
        if !self.constraint.is_empty() {
            let items: Vec<(String, Vec<String>)> =
                self.constraint.iter().map(|c| (c.phi.clone(), c.eta.clone())).collect();
            p = p.with_constraints(ConstraintSet::parse(sec.n, sec.k, &items)?)?;
        }
        Ok(p)
    }

    /// The declared Hamiltonian, or `E_L ∘ FL⁻¹` of the Lagrangian.
    pub fn hamiltonian(&self, p: &LagrangianProblem) -> Result<Expr> {
        match &self.problem.hamiltonian {
            Some(h) => self.expr(h),
            None => hamiltonian_from_lagrangian(p),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = self.grid.as_ref().ok_or_else(|| Error::Problem("missing [grid] section".into()))?;
        let k = g.sizes.len();
        if k != self.problem.k {
            return Err(Error::Problem(format!("[grid] has {k} axes but k = {}", self.problem.k)));
        }
        let spacings = match &g.spacings {
            Some(s) => s.clone(),
            None => g.sizes.iter().map(|n| 1.0 / (n.max(&2) - 1) as f64).collect(),
        };
        Grid::new(g.sizes.clone(), spacings, g.origin.clone().unwrap_or_else(|| vec![0.0; k]))
    }

    /// Manufactured solution: `[boundary].mms`, or the default
    /// `sin(πx¹)sin(πx²)` in the first component.
    pub fn manufactured_solution(&self) -> Result<Vec<Expr>> {
        if let Some(m) = self.boundary.as_ref().and_then(|b| b.mms.as_ref()) {
            return self.exprs(m, "[boundary].mms");
        }
        let product: Vec<String> = (1..=self.problem.k).map(|a| format!("sin(pi*x[{a}])")).collect();
        let mut texts = vec!["0".to_string(); self.problem.n];
        texts[0] = product.join("*");
        self.exprs(&texts, "manufactured solution")
    }

    /// Dirichlet problem; with `mms` the boundary data and body force come
    /// from the manufactured solution.
    pub fn elliptic_problem(&self, mms: bool) -> Result<EllipticProblem> {
        let mut p = self.lagrangian_problem()?;
        let grid = self.grid()?;
        if mms {
            let exact = self.manufactured_solution()?;
            let force = manufactured_body_force(&p, &exact)?;
            p.body_force = None;
            p = p.with_body_force(force)?;
            let mut ep = EllipticProblem::new(p, grid, exact.clone());
            ep.exact = Some(exact);
            return Ok(ep);
        }
        let values = self
            .boundary
            .as_ref()
            .and_then(|b| b.values.as_ref())
            .ok_or_else(|| Error::Problem("missing [boundary].values".into()))?;
        Ok(EllipticProblem::new(p, grid, self.exprs(values, "[boundary].values")?))
    }

    pub fn cosserat_problem(&self) -> Result<CosseratProblem> {
        let c = self.cosserat.as_ref().ok_or_else(|| Error::Problem("missing [cosserat] section".into()))?;
        let values = [("rho", c.rho), ("alpha", c.alpha), ("beta", c.beta), ("kk", c.kk), ("rr", c.rr)];
        for (name, v) in values {
            if let Some(other) = self.problem.params.get(name) {
                if *other != v {
                    return Err(Error::Problem(format!(
                        "parameter `{name}` is {other} in [problem] but {v} in [cosserat]"
                    )));
                }
            }
        }
        let defaults = CosseratProblem::default();
        let initial = match &c.initial {
            None => CosseratInitial::default(),
            Some(list) => {
                if list.len() != 6 {
                    return Err(Error::Problem(format!("[cosserat].initial needs 6 expressions, got {}", list.len())));
                }
                let e = list.iter().map(|t| parse_with(t, 1, 1)).collect::<Result<Vec<_>>>()?;
                CosseratInitial {
                    position: [e[0].clone(), e[1].clone(), e[2].clone()],
                    velocity: [e[3].clone(), e[4].clone(), e[5].clone()],
                }
            }
        };
        Ok(CosseratProblem {
            rho: c.rho,
            alpha: c.alpha,
            beta: c.beta,
            kk: c.kk,
            rr: c.rr,
            ns: c.ns.unwrap_or(defaults.ns),
            length: c.length.unwrap_or(defaults.length),
            dt: c.dt,
            steps: c.steps,
            cfl: c.cfl.unwrap_or(defaults.cfl),
            save_every: c.save_every.unwrap_or(defaults.save_every),
            initial,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
[problem]
n = 1
k = 1
params = { c = 2.0 }
lagrangian = "c*v[1,1]^2/2"

[grid]
sizes = [11]
"#;

    #[test]
    fn parses_minimal_file() {
        let f = ProblemFile::parse(SMALL).unwrap();
        let p = f.lagrangian_problem().unwrap();
        assert_eq!(p.params["c"], 2.0);
        assert_eq!(f.grid().unwrap().spacings, vec![0.1]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = SMALL.replace("k = 1", "k = 1\nlagrangain = \"0\"");
        assert!(matches!(ProblemFile::parse(&text), Err(Error::Problem(_))));
        let text = format!("{SMALL}\n[extra]\na = 1\n");
        assert!(matches!(ProblemFile::parse(&text), Err(Error::Problem(_))));
    }

    #[test]
    fn mms_defaults_to_sine_product() {
        let f = ProblemFile::parse(SMALL).unwrap();
        let m = f.manufactured_solution().unwrap();
        assert_eq!(m[0].to_string(), "sin(pi*x[1])");
    }

    #[test]
    fn conflicting_rod_parameters_are_rejected() {
        let text = r#"
[problem]
n = 1
k = 1
params = { rho = 2.0 }
lagrangian = "0"

[cosserat]
rho = 1.0
alpha = 1.0
beta = 1.0
kk = 1.0
rr = 1.0
dt = 1e-4
steps = 10
"#;
        let f = ProblemFile::parse(text).unwrap();
        assert!(matches!(f.cosserat_problem(), Err(Error::Problem(_))));
    }
}
