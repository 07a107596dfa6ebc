//! Finite-dimensional spaces on a rectangular grid and weak-form assembly.

mod assemble;
mod space;
pub mod sparse;

pub use assemble::*;
pub use space::{
    build_space, build_space_with_quadrature, gauss_legendre_unit, hermite_1d, hermite_2d, q1_2d, CellTables,
    EdgeTables, GalerkinSpace, Grid, HermiteEval, Side, Y_DOFS_PER_NODE,
};
pub use sparse::{pcg, pcg_csr, CgReport, CsrMatrix, SkylineCholesky};
