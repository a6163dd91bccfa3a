//! Lindblad dynamics on the seven-level Hilbert space and two-time
//! polarization correlators.
//!
//! Basis order is that of [`Level::ALL`](crate::levels::Level::ALL):
//! `(G, X_H, X_V, X_D, X*, XX, XX*)`. Superoperators act on column-stacked
//! density matrices, so `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`.

mod correlators;
mod liouvillian;
mod pulse;

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::levels::{Level, LevelsError};
use crate::linalg;
use crate::ode::OdeError;
use crate::C64;

pub use correlators::{two_time_correlators, CorrelatorGrid, CorrelatorSet, CorrelatorView, Pol};
pub use liouvillian::{build_liouvillian, propagate, Jump, Liouvillian};
pub use pulse::{prepare_initial, Prepared, PulseModel, StarkDrive};

/// Hilbert-space dimension.
pub const DIM: usize = 7;

pub type Op7 = SMatrix<C64, DIM, DIM>;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid density operator: {0}")]
    InvalidState(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Levels(#[from] LevelsError),
    #[error("integration failed: {0}")]
    Integration(#[from] OdeError),
    #[error("grid step {dt} ns too coarse for oscillation at {omega} rad/ns (Nyquist limit {limit} ns)")]
    GridTooCoarse { dt: f64, omega: f64, limit: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Matrix unit `|a⟩⟨b|`.
pub fn matrix_unit(a: Level, b: Level) -> Op7 {
    let mut m = Op7::zeros();
    m[(a.index(), b.index())] = C64::from(1.0);
    m
}

/// Density operator over `(G, X_H, X_V, X_D, X*, XX, XX*)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityOperator(pub Op7);

impl DensityOperator {
    pub fn pure(level: Level) -> Self {
        Self(matrix_unit(level, level))
    }

    pub fn population(&self, level: Level) -> f64 {
        self.0[(level.index(), level.index())].re
    }

    pub fn populations(&self) -> [f64; DIM] {
        std::array::from_fn(|i| self.0[(i, i)].re)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let herm = linalg::hermiticity_defect(&self.0);
        if herm > 1e-12 {
            return Err(DynamicsError::InvalidState(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = self.trace();
        if (tr - C64::from(1.0)).norm() > 1e-10 {
            return Err(DynamicsError::InvalidState(format!("trace {tr}")));
        }
        let min = linalg::min_eigenvalue(&self.0);
        if min < -1e-10 {
            return Err(DynamicsError::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let rho = DensityOperator::pure(Level::XX);
        rho.validate().unwrap();
        let mut bad = rho;
        bad.0[(0, 1)] = C64::new(0.1, 0.0);
        assert!(bad.validate().is_err());
        let mut neg = DensityOperator::pure(Level::G);
        neg.0[(0, 0)] = C64::from(1.5);
        neg.0[(1, 1)] = C64::from(-0.5);
        assert!(neg.validate().is_err());
    }
}
