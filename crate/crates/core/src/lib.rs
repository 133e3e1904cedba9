pub mod assembly;
pub mod deform;
pub mod eigensolve;
pub mod geometry;
pub mod io;
pub mod metric;
pub mod oracle;
pub mod validation;
