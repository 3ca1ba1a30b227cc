//! Small numerical kernels shared by the exact modules.

pub mod banded;
pub mod poly;
pub mod quad;
pub mod zeta;
