//! Survival probabilities c_{n,x} = P[S_n ≤ x] of cumulative shock models and the
//! behaviour of their ratio sequences c_{n+1,x}/c_{n,x}.

pub mod convolve;
pub mod discrete;
pub mod dist;
pub mod error;
pub mod ldp;
pub mod mc;
pub mod quad;
pub mod special;
pub mod table;

pub use error::{Error, Result};
