// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adp;
pub mod bench;
pub mod error;
pub mod lds;
pub mod linalg;
pub mod policysearch;
pub mod riccati;
pub mod sysid;

pub use error::{Error, Result};
