pub mod change;
pub mod check;
pub mod engine;
pub mod ide;
pub mod index;
pub mod lf;
pub mod model;
pub mod project;
pub mod render;
pub mod structure;
pub mod surface;
pub mod termparse;
#[cfg(any(test, feature = "testing"))]
pub mod testing;
