pub mod basis;
pub mod mesh;
pub mod quadrature;
pub mod wg;
pub mod linsolve;
pub mod assembly;
pub mod stepper;
pub mod analysis;
