//! Two-photon polarization density matrices and entanglement metrics.
//!
//! Basis order is `(HH, HV, VH, VV)`, the first letter being the XX photon.

use std::fmt;
use std::io::Write;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{herm_eigen, hermiticity_defect, sqrtm_psd};
use crate::qdynamics::{CorrelatorSet, DynamicsError};
use crate::{C64, REPETITION_PERIOD};

#[derive(Debug, Error)]
pub enum PairStateError {
    #[error("invalid time bin: {0}")]
    InvalidBin(String),
    #[error("time bin [{lo}, {hi}] ns: {reason}")]
    BinOutsideGrid { lo: f64, hi: f64, reason: String },
    #[error("time bin [{lo}, {hi}] ns holds no coincidences (weight {weight:e})")]
    DegenerateBin { lo: f64, hi: f64, weight: f64 },
    #[error("unphysical two-photon matrix: {0}")]
    Unphysical(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Window on the XX–X delay `τ`. Delays below zero carry no coincidences,
/// so a bin centered at 0 effectively integrates `[0, width/2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeBin {
    /// ns
    pub center: f64,
    /// ns
    pub width: f64,
}

impl TimeBin {
    pub fn new(center: f64, width: f64) -> Result<Self, PairStateError> {
        let bin = Self { center, width };
        bin.validate()?;
        Ok(bin)
    }

    /// Bin `[start, start + width]`.
    pub fn starting_at(start: f64, width: f64) -> Result<Self, PairStateError> {
        Self::new(start + 0.5 * width, width)
    }

    /// All delays within one repetition period.
    pub fn full_period() -> Self {
        Self { center: 0.5 * REPETITION_PERIOD, width: REPETITION_PERIOD }
    }

    pub fn lo(&self) -> f64 {
        (self.center - 0.5 * self.width).max(0.0)
    }

    pub fn hi(&self) -> f64 {
        self.center + 0.5 * self.width
    }

    pub fn validate(&self) -> Result<(), PairStateError> {
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(PairStateError::InvalidBin(format!("width must be positive, got {}", self.width)));
        }
        if !(self.center >= 0.0) {
            return Err(PairStateError::InvalidBin(format!("center must be non-negative, got {}", self.center)));
        }
        if self.hi() > REPETITION_PERIOD + 1e-9 {
            return Err(PairStateError::InvalidBin(format!(
                "bin ends at {} ns, beyond the repetition period",
                self.hi()
            )));
        }
        Ok(())
    }
}

/// Hermitian, unit-trace, positive semidefinite 4×4 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPhotonMatrix(pub Matrix4<C64>);

/// Index of a two-photon basis state.
pub const HH: usize = 0;
pub const HV: usize = 1;
pub const VH: usize = 2;
pub const VV: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bell {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl Bell {
    pub const ALL: [Bell; 4] = [Bell::PhiPlus, Bell::PhiMinus, Bell::PsiPlus, Bell::PsiMinus];

    pub fn ket(self) -> Vector4<C64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = match self {
            Bell::PhiPlus => [s, 0.0, 0.0, s],
            Bell::PhiMinus => [s, 0.0, 0.0, -s],
            Bell::PsiPlus => [0.0, s, s, 0.0],
            Bell::PsiMinus => [0.0, s, -s, 0.0],
        };
        Vector4::from_iterator(v.into_iter().map(C64::from))
    }
}

impl fmt::Display for Bell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bell::PhiPlus => "Phi+",
            Bell::PhiMinus => "Phi-",
            Bell::PsiPlus => "Psi+",
            Bell::PsiMinus => "Psi-",
        })
    }
}

impl TwoPhotonMatrix {
    /// Validated constructor.
    pub fn new(m: Matrix4<C64>) -> Result<Self, PairStateError> {
        let r = Self(m);
        r.validate()?;
        Ok(r)
    }

    /// Normalize a Hermitian PSD matrix to unit trace (used after
    /// integration, where round-off leaves tiny anti-Hermitian parts).
    pub fn from_unnormalized(m: Matrix4<C64>) -> Result<Self, PairStateError> {
        let h = (m + m.adjoint()) * C64::from(0.5);
        let tr = h.trace().re;
        if !(tr > 0.0) {
            return Err(PairStateError::Unphysical(format!("trace {tr}")));
        }
        Self::new(h / C64::from(tr))
    }

    pub fn pure(ket: &Vector4<C64>) -> Self {
        let k = ket / C64::from(ket.norm());
        Self(k * k.adjoint())
    }

    pub fn maximally_mixed() -> Self {
        Self(Matrix4::identity() * C64::from(0.25))
    }

    pub fn bell(b: Bell) -> Self {
        Self::pure(&b.ket())
    }

    /// `p |Φ+⟩⟨Φ+| + (1 - p) I/4`.
    pub fn werner(p: f64) -> Self {
        Self(Self::bell(Bell::PhiPlus).0 * C64::from(p) + Self::maximally_mixed().0 * C64::from(1.0 - p))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.0[(r, c)]
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        herm_eigen(&self.0).0
    }

    pub fn validate(&self) -> Result<(), PairStateError> {
        let herm = hermiticity_defect(&self.0);
        if herm > 1e-12 {
            return Err(PairStateError::Unphysical(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = self.0.trace();
        if (tr - C64::from(1.0)).norm() > 1e-10 {
            return Err(PairStateError::Unphysical(format!("trace {tr}")));
        }
        let min = self.eigenvalues()[0];
        if min < -1e-9 {
            return Err(PairStateError::Unphysical(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn trace_distance(&self, other: &Self) -> f64 {
        0.5 * herm_eigen(&(self.0 - other.0)).0.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
    pub fn fidelity(&self, other: &Self) -> f64 {
        let s = sqrtm_psd(&self.0);
        let inner = s * other.0 * s;
        let tr: f64 = herm_eigen(&inner).0.iter().map(|v| v.max(0.0).sqrt()).sum();
        tr * tr
    }

    /// Real and imaginary 4×4 blocks as CSV.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(w);
        let labels = ["HH", "HV", "VH", "VV"];
        for (part, f) in [("re", (|z: C64| z.re) as fn(C64) -> f64), ("im", |z: C64| z.im)] {
            writeln!(out, "{part},{}", labels.join(","))?;
            for r in 0..4 {
                let vals: Vec<String> = (0..4).map(|c| format!("{:.12e}", f(self.0[(r, c)]))).collect();
                writeln!(out, "{},{}", labels[r], vals.join(","))?;
            }
        }
        out.flush()
    }

    pub fn real_rows(&self) -> [[f64; 4]; 4] {
        std::array::from_fn(|r| std::array::from_fn(|c| self.0[(r, c)].re))
    }

    pub fn imag_rows(&self) -> [[f64; 4]; 4] {
        std::array::from_fn(|r| std::array::from_fn(|c| self.0[(r, c)].im))
    }
}

/// Unnormalized `∫dt ∫_bin dτ G_{jk,lm}`; its trace is the coincidence
/// weight of the bin.
pub fn integrate_bin(correlators: &CorrelatorSet, bin: &TimeBin) -> Result<Matrix4<C64>, PairStateError> {
    bin.validate()?;
    let (lo, hi) = (bin.lo(), bin.hi());
    if lo >= correlators.tau_max() || hi > correlators.tau_max() * (1.0 + 1e-12) + 1e-12 {
        return Err(PairStateError::BinOutsideGrid {
            lo,
            hi,
            reason: format!("correlator delays cover [0, {}] ns", correlators.tau_max()),
        });
    }
    Ok(correlators.integrate(lo, hi)?)
}

/// Two-photon matrix of the coincidences inside `bin`, normalized to unit
/// trace.
pub fn assemble_two_photon_matrix(
    correlators: &CorrelatorSet,
    bin: &TimeBin,
) -> Result<TwoPhotonMatrix, PairStateError> {
    let m = integrate_bin(correlators, bin)?;
    let weight = m.trace().re;
    // reference: coincidence weight over the whole delay grid
    let total = correlators.integrate(0.0, correlators.tau_max())?.trace().re;
    if !(weight > 1e-12 * total.max(f64::MIN_POSITIVE)) {
        return Err(PairStateError::DegenerateBin { lo: bin.lo(), hi: bin.hi(), weight });
    }
    TwoPhotonMatrix::from_unnormalized(m)
}

fn spin_flip() -> Matrix4<C64> {
    // σ_y ⊗ σ_y
    let mut m = Matrix4::zeros();
    m[(0, 3)] = C64::from(-1.0);
    m[(1, 2)] = C64::from(1.0);
    m[(2, 1)] = C64::from(1.0);
    m[(3, 0)] = C64::from(-1.0);
    m
}

/// Wootters concurrence, from the Hermitian form `√ρ ρ̃ √ρ` with
/// `ρ̃ = (σ_y⊗σ_y) ρ* (σ_y⊗σ_y)`.
pub fn concurrence(rho: &TwoPhotonMatrix) -> Result<f64, PairStateError> {
    rho.validate()?;
    let yy = spin_flip();
    let tilde = yy * rho.0.conjugate() * yy;
    let s = sqrtm_psd(&rho.0);
    let r = s * tilde * s;
    let mut lambdas: Vec<f64> = herm_eigen(&r).0.iter().map(|v| v.max(0.0).sqrt()).collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).clamp(0.0, 1.0))
}

/// `⟨bell|ρ|bell⟩`.
pub fn fidelity_to_bell(rho: &TwoPhotonMatrix, bell: Bell) -> f64 {
    let k = bell.ket();
    (k.adjoint() * rho.0 * k)[(0, 0)].re
}

/// Matrix with its bin, temperature and metrics, for JSON export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub temperature: f64,
    pub bin: TimeBin,
    pub real: [[f64; 4]; 4],
    pub imag: [[f64; 4]; 4],
    pub concurrence: f64,
    pub fidelity_phi_plus: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl MatrixRecord {
    pub fn new(rho: &TwoPhotonMatrix, temperature: f64, bin: TimeBin) -> Result<Self, PairStateError> {
        Ok(Self {
            temperature,
            bin,
            real: rho.real_rows(),
            imag: rho.imag_rows(),
            concurrence: concurrence(rho)?,
            fidelity_phi_plus: fidelity_to_bell(rho, Bell::PhiPlus),
            label: None,
        })
    }

    pub fn matrix(&self) -> Result<TwoPhotonMatrix, PairStateError> {
        TwoPhotonMatrix::new(Matrix4::from_fn(|r, c| C64::new(self.real[r][c], self.imag[r][c])))
    }
}
