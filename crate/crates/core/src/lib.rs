pub mod airy;
pub mod chernoff;
mod dd;
pub mod error;
pub mod figures;
pub mod gaussfact;
pub mod gfunc;
pub mod hypoexp;
pub mod ks;
pub mod normal;
pub mod quad;
pub mod report;
pub mod verify;

pub use error::{ChernoffError, Result};
