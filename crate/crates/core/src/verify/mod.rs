//! Numeric checks of the value-function approximation: finite-difference
//! hypergradient checks, brute-force oracles for `φ`, `ψ_μ` and `f*_μ`, and
//! finite-prefix surrogates of the asymptotic results.
//!
//! Everything here runs in `f64` on problems with `dim_y ≤ 2`.

mod brute;
mod checks;
mod fd;
mod grid;
mod inner;

pub use brute::{brute_fstar_mu, brute_phi, brute_psi, GridEstimate, MAX_RESOLUTION_BOUND};
pub use checks::*;
pub use fd::{fd_gradient, relative_error};
pub use grid::{argmin, GridSpec, MAX_GRID_POINTS};
pub use inner::{
    barrier_minimum, barrier_value, lower_minima, phi_value, regularized_minimum, relaxed_minimum, BarrierValue, Minima, Minimum,
};
