//! Rotating compressible Navier–Stokes–Fourier flow in a thin layer
//! `ω × (0, ε)`, rescaled to `ω × (0, 1)`, and its planar limit on `ω`.

pub mod diagnostics;
pub mod fields;
pub mod gravity;
pub mod mms;
pub mod numerics;
pub mod relent;
pub mod scheme;
pub mod snapshot;
pub mod solver2d;
pub mod solver3d;
pub mod thermo;
