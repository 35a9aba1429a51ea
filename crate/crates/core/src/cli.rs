//! Command-line front end.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::equations::{
    derive_el, derive_hdw, derive_implicit_el, derive_nh_hdw, derive_nh_implicit_el, intrinsic_residual,
    legendre_field, pontryagin_field, ConstraintSet, MultiplierField, PdeSystem, ResidualKind, ResidualSource,
};
use crate::geometry::{Bundle, DiscreteField};
use crate::mechanics::{generalized_energy, legendre_map, velocity_hessian, EnergyFlavor, Regularity};
use crate::oracle::{fd_derivative_check, seeded_bumps, variational_check, ActionFlavor};
use crate::problem::ProblemFile;
use crate::solvers::{fmt17, solve_cosserat, solve_navier};
use crate::symexpr::Assignment;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "kfield", version, about = "Derive, solve and verify first-order field theories")]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for grid loops.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: u32,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print a derived PDE system.
    Derive {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, value_enum)]
        system: SystemArg,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the Legendre map and optionally the regularity verdict.
    Legendre {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        check_regularity: bool,
        /// Parameter overrides, `name=value,...`.
        #[arg(long, value_parser = parse_at)]
        at: Option<BTreeMap<String, f64>>,
    },
    /// Print the generalized energy.
    Energy {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, value_enum)]
        flavor: EnergyArg,
    },
    /// Run a solver.
    Solve {
        #[command(subcommand)]
        which: SolveCommand,
    },
    /// Run a verification.
    Verify {
        #[command(subcommand)]
        which: VerifyCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum SolveCommand {
    /// Dirichlet problem for a quadratic Lagrangian.
    Navier {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use the manufactured solution for boundary data and forcing.
        #[arg(long)]
        mms: bool,
        /// Relative residual at which CG stops.
        #[arg(long, default_value_t = 1e-10)]
        rtol: f64,
    },
    /// Rolling rod simulation; multipliers go next to the output file.
    Cosserat {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Intrinsic one-form residual of a sampled field.
    Residual {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(long, value_enum)]
        which: ResidualArg,
        #[arg(long)]
        multipliers: Option<PathBuf>,
    },
    /// First variation of the discrete action along seeded bumps.
    Variational {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(long, value_enum)]
        flavor: FlavorArg,
        #[arg(long)]
        bumps: usize,
        /// Central-difference steps.
        #[arg(long, value_delimiter = ',', default_value = "1e-3")]
        eps: Vec<f64>,
    },
    /// Symbolic derivatives of the Lagrangian against finite differences.
    Fd {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        points: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SystemArg {
    El,
    ImplicitEl,
    NhEl,
    Hdw,
    NhHdw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Tree,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EnergyArg {
    Pontryagin,
    Lagrangian,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ResidualArg {
    LambdaEl,
    ChiImplicit,
    ChiNonholonomic,
    ChiHdw,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FlavorArg {
    Hamilton,
    HamiltonPontryagin,
}

fn parse_at(s: &str) -> std::result::Result<BTreeMap<String, f64>, String> {
    let mut out = BTreeMap::new();
    for item in s.split(',').filter(|t| !t.trim().is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| format!("expected name=value, got `{item}`"))?;
        let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

/// Parses `argv`, runs one subcommand and returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    crate::parallel::set_threads(cli.threads as usize);
    match execute(&cli) {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Path of the multiplier table written next to a rod solution.
pub fn multipliers_path(out: &Path) -> PathBuf {
    out.with_extension("multipliers.csv")
}

fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Derive { problem, system, format, out } => {
            let file = ProblemFile::load(problem)?;
            let sys = derive(&file, *system)?;
            let text = match format {
                FormatArg::Text => sys.to_text(),
                FormatArg::Tree => {
                    let mut s = serde_json::to_string_pretty(&sys.to_tree()).expect("tree serializes");
                    s.push('\n');
                    s
                }
            };
            match out {
                Some(path) => {
                    write_file(path, &text)?;
                    Ok(String::new())
                }
                None => Ok(text),
            }
        }
        Command::Legendre { problem, check_regularity, at } => {
            let file = ProblemFile::load(problem)?;
            let mut p = file.lagrangian_problem()?;
            if let Some(at) = at {
                p.params.extend(at.iter().map(|(k, v)| (k.clone(), *v)));
            }
            let mut text = String::new();
            for (var, e) in legendre_map(&p).entries() {
                let _ = writeln!(text, "{var} = {e}");
            }
            if *check_regularity {
                let rep = velocity_hessian(&p, Some(&Assignment::new()))?;
                let det = rep.determinant_text();
                match rep.verdict {
                    Some(Regularity::Regular) => {
                        let _ = writeln!(text, "regular, det = {det}");
                    }
                    _ => {
                        let _ = writeln!(text, "singular, det = {det}, rank = {}", rep.rank.unwrap_or(0));
                    }
                }
            }
            Ok(text)
        }
        Command::Energy { problem, flavor } => {
            let p = ProblemFile::load(problem)?.lagrangian_problem()?;
            let f = match flavor {
                EnergyArg::Pontryagin => EnergyFlavor::Pontryagin,
                EnergyArg::Lagrangian => EnergyFlavor::Lagrangian,
            };
            Ok(format!("E = {}\n", generalized_energy(&p, f)))
        }
        Command::Solve { which } => solve(which),
        Command::Verify { which } => verify(which, cli.seed),
    }
}

fn derive(file: &ProblemFile, system: SystemArg) -> Result<PdeSystem> {
    let mut p = file.lagrangian_problem()?;
    Ok(match system {
        SystemArg::El => derive_el(&p),
        SystemArg::ImplicitEl => derive_implicit_el(&p),
        SystemArg::NhEl => {
            if p.constraints.is_none() {
                p.constraints = Some(ConstraintSet::empty());
            }
            derive_nh_implicit_el(&p)?
        }
        SystemArg::Hdw => derive_hdw(&file.hamiltonian(&p)?, p.n, p.k)?,
        SystemArg::NhHdw => derive_nh_hdw(&p)?,
    })
}

fn solve(which: &SolveCommand) -> Result<String> {
    match which {
        SolveCommand::Navier { problem, out, mms, rtol } => {
            let file = ProblemFile::load(problem)?;
            let mut ep = file.elliptic_problem(*mms)?;
            ep.rtol = *rtol;
            let rep = solve_navier(&ep)?;
            rep.field.write_csv(create(out)?)?;
            Ok(rep.to_key_value())
        }
        SolveCommand::Cosserat { problem, out } => {
            let file = ProblemFile::load(problem)?;
            let run = solve_cosserat(&file.cosserat_problem()?)?;
            run.report.field.write_csv(create(out)?)?;
            if let Some(m) = &run.report.multipliers {
                m.write_csv(create(&multipliers_path(out))?)?;
            }
            Ok(run.report.to_key_value())
        }
    }
}

fn verify(which: &VerifyCommand, seed: u64) -> Result<String> {
    let mut text = String::new();
    match which {
        VerifyCommand::Residual { problem, field, which, multipliers } => {
            let file = ProblemFile::load(problem)?;
            let p = file.lagrangian_problem()?;
            let mut field = DiscreteField::read_csv(open(field)?)?;
            let mult = match multipliers {
                Some(path) => Some(MultiplierField::read_csv(open(path)?)?),
                None => None,
            };
            let kind = match which {
                ResidualArg::LambdaEl => ResidualKind::LambdaEl,
                ResidualArg::ChiImplicit => ResidualKind::ChiImplicit,
                ResidualArg::ChiNonholonomic => ResidualKind::ChiNonholonomic,
                ResidualArg::ChiHdw => ResidualKind::ChiHdw,
            };
            if field.chart.bundle == Bundle::Base {
                field = match kind {
                    ResidualKind::LambdaEl | ResidualKind::ChiHdw => legendre_field(&p, &field)?,
                    _ => pontryagin_field(&p, &field)?,
                };
            }
            let h;
            let params = p.param_assignment();
            let src = if kind == ResidualKind::ChiHdw {
                h = file.hamiltonian(&p)?;
                ResidualSource::Hamiltonian { h: &h, n: p.n, k: p.k, params: &params }
            } else {
                ResidualSource::Lagrangian(&p)
            };
            let rep = intrinsic_residual(kind, src, &field, mult.as_ref())?;
            let _ = writeln!(text, "which = {}", kind.name());
            for (c, label) in rep.labels.iter().enumerate() {
                let _ = writeln!(text, "max[{label}] = {}", fmt17(rep.interior_max[c]));
                let _ = writeln!(text, "rms[{label}] = {}", fmt17(rep.interior_rms[c]));
            }
            for (g, v) in &rep.group_max {
                let _ = writeln!(text, "group_max[{g}] = {}", fmt17(*v));
                let _ = writeln!(text, "group_rms[{g}] = {}", fmt17(rep.group_rms[g]));
            }
            let _ = writeln!(text, "max = {}", fmt17(rep.max_norm));
            let _ = writeln!(text, "rms = {}", fmt17(rep.rms));
        }
        VerifyCommand::Variational { problem, field, flavor, bumps, eps } => {
            let p = ProblemFile::load(problem)?.lagrangian_problem()?;
            let field = DiscreteField::read_csv(open(field)?)?;
            let flavor = match flavor {
                FlavorArg::Hamilton => ActionFlavor::Hamilton,
                FlavorArg::HamiltonPontryagin => ActionFlavor::HamiltonPontryagin,
            };
            let mut worst_ds = 0.0f64;
            let mut worst_rel = 0.0f64;
            let _ = writeln!(text, "flavor = {}", flavor.name());
            for (b, z) in seeded_bumps(p.n, &field.grid, *bumps, seed).iter().enumerate() {
                let rep = variational_check(flavor, &p, &field, z, eps)?;
                let _ = writeln!(text, "ds_de[{b}] = {}", fmt17(rep.ds_de));
                let _ = writeln!(text, "inner[{b}] = {}", fmt17(rep.inner));
                let _ = writeln!(text, "difference[{b}] = {}", fmt17(rep.difference));
                worst_ds = worst_ds.max(rep.ds_de.abs());
                worst_rel = worst_rel.max(rep.relative_difference());
            }
            let _ = writeln!(text, "max_abs_ds_de = {}", fmt17(worst_ds));
            let _ = writeln!(text, "max_relative_difference = {}", fmt17(worst_rel));
        }
        VerifyCommand::Fd { problem, points } => {
            let p = ProblemFile::load(problem)?.lagrangian_problem()?;
            let l = p.full_lagrangian();
            let params = p.param_assignment();
            let mut worst = 0.0f64;
            for (idx, v) in p.tangent_chart().coords().into_iter().enumerate() {
                let e = fd_derivative_check(&l, v, *points, seed.wrapping_add(idx as u64), &params)?;
                let _ = writeln!(text, "error[{v}] = {}", fmt17(e));
                worst = worst.max(e);
            }
            let _ = writeln!(text, "max_relative_error = {}", fmt17(worst));
        }
    }
    Ok(text)
}
