//! Bundle charts, discrete fields and complete lifts.

mod chart;
mod field;
mod lift;

pub use chart::{lift_var, Bundle, Chart};
pub use field::{DiscreteField, Grid, Stencil};
pub(crate) use field::{read_table, write_table};
pub use lift::{complete_lift, VectorFieldOnQ};
