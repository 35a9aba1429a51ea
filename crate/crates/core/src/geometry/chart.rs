use std::fmt;

use crate::symexpr::VarRef;
use crate::{Error, Result};

/// Bundle over the configuration manifold `Q` carrying a chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bundle {
    /// `Q` itself, coordinates `q`.
    Base,
    /// k-velocities `T¹ₖQ`, coordinates `(q, v)`.
    Tangent,
    /// k-covelocities `(T¹ₖ)*Q`, coordinates `(q, p)`.
    Cotangent,
    /// Pontryagin bundle `M`, coordinates `(q, v, p)`.
    Pontryagin,
    /// `T¹ₖ((T¹ₖ)*Q)`, coordinates `(q, p, w, u)`.
    Iterated,
    /// `T¹ₖM`, coordinates `(q, v, p, w, y, u)`.
    IteratedM,
}

impl Bundle {
    pub fn name(&self) -> &'static str {
        match self {
            Bundle::Base => "base",
            Bundle::Tangent => "tangent",
            Bundle::Cotangent => "cotangent",
            Bundle::Pontryagin => "pontryagin",
            Bundle::Iterated => "iterated",
            Bundle::IteratedM => "iterated-m",
        }
    }

    pub const ALL: [Bundle; 6] = [
        Bundle::Base,
        Bundle::Tangent,
        Bundle::Cotangent,
        Bundle::Pontryagin,
        Bundle::Iterated,
        Bundle::IteratedM,
    ];
}

impl fmt::Display for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Index bookkeeping for one bundle chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Chart {
    pub n: usize,
    pub k: usize,
    pub bundle: Bundle,
}

impl Chart {
    pub fn new(n: usize, k: usize, bundle: Bundle) -> Result<Chart> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidChart(format!("need n >= 1 and k >= 1, got n={n}, k={k}")));
        }
        Ok(Chart { n, k, bundle })
    }

    pub fn dim(&self) -> usize {
        let (n, k) = (self.n, self.k);
        match self.bundle {
            Bundle::Base => n,
            Bundle::Tangent | Bundle::Cotangent => n * (k + 1),
            Bundle::Pontryagin => n * (2 * k + 1),
            Bundle::Iterated => n * (k + 1) + n * k * (k + 1),
            Bundle::IteratedM => n * (2 * k + 1) * (k + 1),
        }
    }

    fn q_block(&self) -> Vec<VarRef> {
        (1..=self.n).map(VarRef::Q).collect()
    }

    fn v_block(&self) -> Vec<VarRef> {
        let mut out = Vec::new();
        for a in 1..=self.k {
            for i in 1..=self.n {
                out.push(VarRef::V(i, a));
            }
        }
        out
    }

    fn p_block(&self) -> Vec<VarRef> {
        let mut out = Vec::new();
        for a in 1..=self.k {
            for i in 1..=self.n {
                out.push(VarRef::P(a, i));
            }
        }
        out
    }

    /// Coordinates of the underlying (non-iterated) bundle.
    fn lower_coords(&self) -> Vec<VarRef> {
        match self.bundle {
            Bundle::Iterated => self.with_bundle(Bundle::Cotangent).coords(),
            Bundle::IteratedM => self.with_bundle(Bundle::Pontryagin).coords(),
            _ => self.coords(),
        }
    }

    pub fn with_bundle(&self, bundle: Bundle) -> Chart {
        Chart { n: self.n, k: self.k, bundle }
    }

    /// Coordinates in the fixed enumeration order of the chart.
    pub fn coords(&self) -> Vec<VarRef> {
        match self.bundle {
            Bundle::Base => self.q_block(),
            Bundle::Tangent => [self.q_block(), self.v_block()].concat(),
            Bundle::Cotangent => [self.q_block(), self.p_block()].concat(),
            Bundle::Pontryagin => [self.q_block(), self.v_block(), self.p_block()].concat(),
            Bundle::Iterated | Bundle::IteratedM => {
                let lower = self.lower_coords();
                let mut out = lower.clone();
                for role in ['q', 'v', 'p'] {
                    for a in 1..=self.k {
                        for y in lower.iter().filter(|y| y.role() == role) {
                            out.push(lift_var(*y, a).expect("lower coordinate lifts"));
                        }
                    }
                }
                out
            }
        }
    }

    pub fn index_of(&self, v: &VarRef) -> Option<usize> {
        self.coords().iter().position(|c| c == v)
    }

    pub fn contains(&self, v: &VarRef) -> bool {
        v.check_bounds(self.n, self.k).is_ok() && self.index_of(v).is_some()
    }

    /// Chart of the first prolongation of a map into this bundle.
    pub fn prolonged(&self) -> Result<Chart> {
        let bundle = match self.bundle {
            Bundle::Base => Bundle::Tangent,
            Bundle::Cotangent => Bundle::Iterated,
            Bundle::Pontryagin => Bundle::IteratedM,
            other => {
                return Err(Error::ChartMismatch(format!("cannot prolong a field on the {other} chart")))
            }
        };
        Ok(self.with_bundle(bundle))
    }

    /// Coordinate holding the `a`-th partial derivative of `y` in the prolonged chart.
    pub fn velocity_of(&self, y: VarRef, a: usize) -> Result<VarRef> {
        if self.bundle == Bundle::Base {
            if let VarRef::Q(i) = y {
                return Ok(VarRef::V(i, a));
            }
        } else if let Some(v) = lift_var(y, a) {
            return Ok(v);
        }
        Err(Error::ChartMismatch(format!("`{y}` has no velocity on the {} chart", self.bundle)))
    }

    /// Finds the chart with `k` parameters whose coordinate list is exactly `coords`.
    pub fn from_coords(coords: &[VarRef], k: usize) -> Result<Chart> {
        let n = coords.iter().filter(|v| matches!(v, VarRef::Q(_))).count();
        if n > 0 && k > 0 {
            for b in Bundle::ALL {
                let c = Chart { n, k, bundle: b };
                if c.coords() == coords {
                    return Ok(c);
                }
            }
        }
        Err(Error::ChartMismatch("coordinate list matches no chart".into()))
    }
}

/// Velocity of a coordinate of `(T¹ₖ)*Q` or `M` along the `a`-th direction.
pub fn lift_var(y: VarRef, a: usize) -> Option<VarRef> {
    match y {
        VarRef::Q(i) => Some(VarRef::W(i, a)),
        VarRef::V(i, b) => Some(VarRef::Y(i, a, b)),
        VarRef::P(b, i) => Some(VarRef::U(i, a, b)),
        _ => None,
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(n={}, k={})", self.bundle, self.n, self.k)
    }
}
