use serde::{Deserialize, Serialize};

use super::{DensityOperator, DynamicsError, Liouvillian};
use crate::levels::Level;

/// Excitation model for the biexciton preparation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PulseModel {
    /// Ideal preparation of `|XX⟩` at t = 0.
    Instantaneous,
    /// `|XX⟩` at t = 0 while one bright exciton level carries a Gaussian
    /// shift `s(t) = s_max exp(-4 ln2 t² / fwhm²)` for `t ≥ 0`.
    StarkGaussian {
        /// ps
        fwhm: f64,
        /// µeV
        s_max: f64,
        level: Level,
    },
}

impl PulseModel {
    /// Phenomenological defaults (10 ps, 20 µeV on `X_H`).
    pub fn stark_default() -> Self {
        PulseModel::StarkGaussian { fwhm: 10.0, s_max: 20.0, level: Level::XH }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        match *self {
            PulseModel::Instantaneous => Ok(()),
            PulseModel::StarkGaussian { fwhm, s_max, level } => {
                if !(fwhm > 0.0) || !fwhm.is_finite() {
                    return Err(DynamicsError::Invalid(format!("pulse fwhm must be positive, got {fwhm} ps")));
                }
                if !s_max.is_finite() {
                    return Err(DynamicsError::Invalid("pulse shift must be finite".into()));
                }
                if !matches!(level, Level::XH | Level::XV) {
                    return Err(DynamicsError::Invalid(format!("shifted level must be X_H or X_V, got {level}")));
                }
                Ok(())
            }
        }
    }
}

/// Time-dependent shift of one level (times in ns, shift in µeV).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarkDrive {
    pub level: Level,
    pub fwhm: f64,
    pub s_max: f64,
}

impl StarkDrive {
    /// The shift is treated as zero beyond three FWHM (relative size 1.5e-11).
    pub fn support_end(&self) -> f64 {
        3.0 * self.fwhm
    }

    pub fn shift(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.support_end() {
            return 0.0;
        }
        self.s_max * (-4.0 * std::f64::consts::LN_2 * (t / self.fwhm).powi(2)).exp()
    }

    /// `∫_{t0}^{t1} s(t) dt` (µeV·ns), by 10-point Gauss-Legendre on
    /// panels no wider than a quarter FWHM.
    pub fn shift_integral(&self, t0: f64, t1: f64) -> f64 {
        let (a, b) = (t0.max(0.0), t1.min(self.support_end()));
        if b <= a {
            return 0.0;
        }
        let panels = ((b - a) / (0.25 * self.fwhm)).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let mid = a + (p as f64 + 0.5) * h;
                GL10.iter().map(|&(x, w)| w * self.shift(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
            })
            .sum()
    }
}

/// Nodes and weights of the 10-point Gauss-Legendre rule on [-1, 1].
#[allow(clippy::excessive_precision)]
const GL10: [(f64, f64); 10] = [
    (-0.9739065285171717, 0.0666713443086881),
    (-0.8650633666889845, 0.1494513491505806),
    (-0.6794095682990244, 0.2190863625159820),
    (-0.4333953941292472, 0.2692667193099963),
    (-0.1488743389816312, 0.2955242247147529),
    (0.1488743389816312, 0.2955242247147529),
    (0.4333953941292472, 0.2692667193099963),
    (0.6794095682990244, 0.2190863625159820),
    (0.8650633666889845, 0.1494513491505806),
    (0.9739065285171717, 0.0666713443086881),
];

#[derive(Clone, Debug)]
pub struct Prepared {
    pub rho0: DensityOperator,
    /// Generator including the pulse drive, if any.
    pub liouvillian: Liouvillian,
}

pub fn prepare_initial(pulse: &PulseModel, l: &Liouvillian) -> Result<Prepared, DynamicsError> {
    pulse.validate()?;
    let mut liouvillian = l.clone();
    liouvillian.drive = match *pulse {
        PulseModel::Instantaneous => None,
        PulseModel::StarkGaussian { s_max: 0.0, .. } => None,
        PulseModel::StarkGaussian { fwhm, s_max, level } => Some(StarkDrive { level, fwhm: fwhm * 1e-3, s_max }),
    };
    Ok(Prepared { rho0: DensityOperator::pure(Level::XX), liouvillian })
}
