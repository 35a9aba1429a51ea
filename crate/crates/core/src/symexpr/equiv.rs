use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::eval::{eval_guarded, EvalFail};
use super::{Assignment, Expr, Poly};
use crate::{Error, Result};

/// Seed of the sampled equivalence test.
pub const SAMPLE_SEED: u64 = 0x6b66_6965_6c64;
/// Number of agreeing sample points required.
pub const SAMPLE_POINTS: usize = 64;
/// Relative tolerance of sampled agreement.
pub const SAMPLE_RTOL: f64 = 1e-9;
/// Smallest divisor magnitude accepted at a sample point.
pub const SAMPLE_GUARD: f64 = 1e-3;
/// Consecutive singular draws tolerated before giving up.
pub const SAMPLE_RETRIES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Certificate {
    Polynomial,
    Sampled,
}

impl Certificate {
    pub fn as_str(&self) -> &'static str {
        match self {
            Certificate::Polynomial => "polynomial",
            Certificate::Sampled => "sampled",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Equivalence {
    pub equal: bool,
    pub certificate: Certificate,
}

/// Decides whether two expressions denote the same function.
///
/// Polynomials are compared exactly through their normal forms; anything else
/// is compared at deterministic pseudo-random points drawn from `[-2, 2]`.
pub fn equivalent(a: &Expr, b: &Expr) -> Result<Equivalence> {
    if let (Some(pa), Some(pb)) = (Poly::from_expr(a), Poly::from_expr(b)) {
        return Ok(Equivalence { equal: pa == pb, certificate: Certificate::Polynomial });
    }
    let mut syms = a.symbols();
    syms.extend(b.symbols());
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
    let mut accepted = 0;
    let mut failures = 0;
    let mut last_err = None;
    while accepted < SAMPLE_POINTS {
        let mut asg = Assignment::new();
        for s in &syms {
            asg.set(s.clone(), rng.gen_range(-2.0..=2.0));
        }
        let va = eval_guarded(a, &asg, SAMPLE_GUARD);
        let vb = va.and_then(|va| eval_guarded(b, &asg, SAMPLE_GUARD).map(|vb| (va, vb)));
        match vb {
            Ok((x, y)) => {
                failures = 0;
                accepted += 1;
                let scale = 1f64.max(x.abs()).max(y.abs());
                if (x - y).abs() > SAMPLE_RTOL * scale {
                    return Ok(Equivalence { equal: false, certificate: Certificate::Sampled });
                }
            }
            Err(fail) => {
                failures += 1;
                if let EvalFail::Error(e) = fail {
                    if let Error::MissingSymbol(_) = e {
                        return Err(e);
                    }
                    last_err = Some(e);
                }
                if failures >= SAMPLE_RETRIES {
                    let why = last_err.map(|e| e.to_string()).unwrap_or_else(|| "near-singular".into());
                    return Err(Error::Domain(format!(
                        "{SAMPLE_RETRIES} consecutive singular sample points ({why})"
                    )));
                }
            }
        }
    }
    Ok(Equivalence { equal: true, certificate: Certificate::Sampled })
}
