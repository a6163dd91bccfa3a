//! Level scheme, physical parameters and temperature-dependent rates.
//!
//! The model has seven effective levels: the crystal ground state `G`, the
//! bright excitons `X_H`/`X_V`, the dark exciton manifold `X_D`, the hot
//! exciton manifold `X*`, the biexciton `XX` and the hot biexciton manifold
//! `XX*`. Manifolds are lumped into one level each; their multiplicity enters
//! the phonon-absorption prefactors.

use std::fmt;
use std::str::FromStr;

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::K_B;

/// Spectral position of the bright exciton line, meV.
pub const X_LINE_MEV: f64 = 1579.9;
/// Spectral position of the biexciton line, meV.
pub const XX_LINE_MEV: f64 = 1576.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LevelsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },
}

/// Bose-Einstein phonon occupation `1 / (exp(ΔE / k_B T) - 1)`.
///
/// `delta_e` in meV, `temperature` in K.
pub fn bose_occupation(delta_e: f64, temperature: f64) -> Result<f64, LevelsError> {
    if !(delta_e > 0.0) || !delta_e.is_finite() {
        return Err(LevelsError::Domain(format!(
            "phonon energy must be positive, got {delta_e} meV"
        )));
    }
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(LevelsError::Domain(format!(
            "temperature must be positive, got {temperature} K"
        )));
    }
    // exp_m1 keeps precision at high T where the argument is small
    Ok(1.0 / (delta_e / (K_B * temperature)).exp_m1())
}

/// Physical parameters of the dot. Energies: `delta_e` in meV, `fss` and
/// `bd_split` in µeV. Rates in ns⁻¹.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QdParams {
    /// Hot-state splitting ΔE (X→X* and XX→XX*).
    pub delta_e: f64,
    /// Bright-exciton fine-structure splitting δ.
    pub fss: f64,
    /// Bright-dark exciton splitting.
    pub bd_split: f64,
    pub gamma_x: f64,
    pub gamma_xx: f64,
    pub gamma_xstar: f64,
    /// Low-temperature phonon-assisted relaxation rate.
    pub gamma_ph0: f64,
    pub m_xstar: u32,
    pub m_xxstar: u32,
    pub m_xd: u32,
    /// Optional pure dephasing of the bright-exciton coherence.
    pub dephasing_rate: f64,
    /// Total X*→X_D relaxation in units of γ_PH (the X*→bright total is
    /// always γ_PH).
    pub dark_relax_factor: f64,
}

impl Default for QdParams {
    fn default() -> Self {
        Self {
            delta_e: 3.7,
            fss: 0.0,
            bd_split: 110.0,
            gamma_x: 1.0 / 0.231,
            gamma_xx: 1.0 / 0.129,
            gamma_xstar: 1.0 / 10.0,
            gamma_ph0: 1.0,
            m_xstar: 4,
            m_xxstar: 4,
            m_xd: 2,
            dephasing_rate: 0.0,
            dark_relax_factor: 1.0,
        }
    }
}

impl QdParams {
    pub fn validate(&self) -> Result<(), LevelsError> {
        let bad = |name: &'static str, reason: String| Err(LevelsError::InvalidParam { name, reason });
        if !(self.delta_e > 0.0 && self.delta_e.is_finite()) {
            return bad("delta_e", format!("must be positive, got {}", self.delta_e));
        }
        for (name, v) in [
            ("gamma_x", self.gamma_x),
            ("gamma_xx", self.gamma_xx),
            ("gamma_xstar", self.gamma_xstar),
            ("gamma_ph0", self.gamma_ph0),
            ("dephasing_rate", self.dephasing_rate),
            ("dark_relax_factor", self.dark_relax_factor),
            ("bd_split", self.bd_split),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(name, format!("must be finite and non-negative, got {v}"));
            }
        }
        if !self.fss.is_finite() {
            return bad("fss", "must be finite".into());
        }
        for (name, m) in [("m_xstar", self.m_xstar), ("m_xxstar", self.m_xxstar), ("m_xd", self.m_xd)] {
            if m < 1 {
                return bad(name, "multiplicity must be at least 1".into());
            }
        }
        Ok(())
    }
}

/// The seven effective levels, in Hilbert-space basis order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    G,
    XH,
    XV,
    XD,
    XStar,
    XX,
    XXStar,
}

impl Level {
    pub const ALL: [Level; 7] = [
        Level::G,
        Level::XH,
        Level::XV,
        Level::XD,
        Level::XStar,
        Level::XX,
        Level::XXStar,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::G => "G",
            Level::XH => "X_H",
            Level::XV => "X_V",
            Level::XD => "X_D",
            Level::XStar => "X*",
            Level::XX => "XX",
            Level::XXStar => "XX*",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Level {
    type Err = LevelsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Level::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s) || l.name().replace('_', "").eq_ignore_ascii_case(s))
            .ok_or_else(|| LevelsError::Domain(format!("unknown level `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionKind {
    Radiative,
    PhononAbsorb,
    PhononEmit,
}

/// Photon emitted by a transition, as seen by the detection setup.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhotonLabel {
    XxH,
    XxV,
    XH,
    XV,
    /// The weak X*→G line.
    HotExciton,
    /// No detected photon (phonon processes, and hot-biexciton lines that are
    /// spectrally filtered out).
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelInfo {
    pub level: Level,
    /// Energy above G, meV.
    pub energy: f64,
    pub multiplicity: u32,
    pub bright: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionSpec {
    pub source: Level,
    pub target: Level,
    pub kind: TransitionKind,
    /// Temperature-independent prefactor (ns⁻¹). Absorption entries are
    /// scaled by n(ΔE, T), emission entries by 1 + n(ΔE, T).
    pub base_rate: f64,
    pub label: PhotonLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelScheme {
    pub levels: [LevelInfo; 7],
    pub transitions: Vec<TransitionSpec>,
    /// Phonon energy entering the Bose factor, meV.
    pub phonon_energy: f64,
}

impl LevelScheme {
    pub fn new(p: &QdParams) -> Result<Self, LevelsError> {
        p.validate()?;
        let e_x = X_LINE_MEV;
        let e_xx = X_LINE_MEV + XX_LINE_MEV;
        let de = p.delta_e;
        let half_fss = 0.5 * p.fss * 1e-3;
        let info = |level, energy, multiplicity, bright| LevelInfo { level, energy, multiplicity, bright };
        let levels = [
            info(Level::G, 0.0, 1, false),
            info(Level::XH, e_x + half_fss, 1, true),
            info(Level::XV, e_x - half_fss, 1, true),
            info(Level::XD, e_x - p.bd_split * 1e-3, p.m_xd, false),
            info(Level::XStar, e_x + de, p.m_xstar, false),
            info(Level::XX, e_xx, 1, true),
            info(Level::XXStar, e_xx + de, p.m_xxstar, false),
        ];

        use Level::*;
        use PhotonLabel as P;
        use TransitionKind::*;
        let t = |source, target, kind, base_rate, label| TransitionSpec { source, target, kind, base_rate, label };
        let g0 = p.gamma_ph0;
        let transitions = vec![
            // cascade
            t(XX, XH, Radiative, 0.5 * p.gamma_xx, P::XxH),
            t(XX, XV, Radiative, 0.5 * p.gamma_xx, P::XxV),
            t(XH, G, Radiative, p.gamma_x, P::XH),
            t(XV, G, Radiative, p.gamma_x, P::XV),
            // hot biexciton recombination
            t(XXStar, XH, Radiative, 0.5 * p.gamma_xstar, P::None),
            t(XXStar, XV, Radiative, 0.5 * p.gamma_xstar, P::None),
            t(XXStar, XD, Radiative, p.gamma_xstar, P::None),
            t(XXStar, XStar, Radiative, p.gamma_x, P::None),
            t(XStar, G, Radiative, p.gamma_xstar, P::HotExciton),
            // thermal excitation into the hot manifolds
            t(XH, XStar, PhononAbsorb, p.m_xstar as f64 * g0, P::None),
            t(XV, XStar, PhononAbsorb, p.m_xstar as f64 * g0, P::None),
            t(XD, XStar, PhononAbsorb, p.m_xstar as f64 * g0, P::None),
            t(XX, XXStar, PhononAbsorb, p.m_xxstar as f64 * g0, P::None),
            // spin-agnostic relaxation out of the hot manifolds
            t(XStar, XH, PhononEmit, 0.5 * g0, P::None),
            t(XStar, XV, PhononEmit, 0.5 * g0, P::None),
            t(XStar, XD, PhononEmit, p.dark_relax_factor * g0, P::None),
            t(XXStar, XX, PhononEmit, g0, P::None),
        ];
        Ok(Self { levels, transitions, phonon_energy: de })
    }

    pub fn info(&self, level: Level) -> &LevelInfo {
        &self.levels[level.index()]
    }
}

/// Effective rates at one temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCatalog {
    pub temperature: f64,
    /// Bose occupation n(ΔE, T) used for the phonon entries.
    pub occupation: f64,
    pub entries: Vec<(TransitionSpec, f64)>,
}

/// Effective rates of every transition of the default scheme at
/// `temperature`.
pub fn build_rate_catalog(params: &QdParams, temperature: f64) -> Result<RateCatalog, LevelsError> {
    let scheme = LevelScheme::new(params)?;
    RateCatalog::from_scheme(&scheme, temperature)
}

impl RateCatalog {
    pub fn from_scheme(scheme: &LevelScheme, temperature: f64) -> Result<Self, LevelsError> {
        let n = bose_occupation(scheme.phonon_energy, temperature)?;
        let entries = scheme
            .transitions
            .iter()
            .map(|t| {
                let rate = match t.kind {
                    TransitionKind::Radiative => t.base_rate,
                    TransitionKind::PhononAbsorb => t.base_rate * n,
                    TransitionKind::PhononEmit => t.base_rate * (1.0 + n),
                };
                (*t, rate)
            })
            .collect();
        Ok(Self { temperature, occupation: n, entries })
    }

    /// Sum of all entries from `source` to `target`.
    pub fn rate(&self, source: Level, target: Level) -> f64 {
        self.entries
            .iter()
            .filter(|(t, _)| t.source == source && t.target == target)
            .map(|(_, r)| r)
            .sum()
    }

    /// Total rate from `source` into any of `targets`.
    pub fn rate_into(&self, source: Level, targets: &[Level]) -> f64 {
        targets.iter().map(|&t| self.rate(source, t)).sum()
    }

    pub fn total_out(&self, source: Level) -> f64 {
        self.entries.iter().filter(|(t, _)| t.source == source).map(|(_, r)| r).sum()
    }

    /// Phonon-emission rate γ_PH = γ_PH⁰ (1 + n), i.e. the total X*→bright
    /// relaxation.
    pub fn gamma_ph(&self) -> f64 {
        self.rate_into(Level::XStar, &[Level::XH, Level::XV])
    }

    /// Rate-equation generator `R` with `dn/dt = R n` (column = source).
    pub fn generator(&self) -> SMatrix<f64, 7, 7> {
        let mut r = SMatrix::<f64, 7, 7>::zeros();
        for (t, rate) in &self.entries {
            let (s, d) = (t.source.index(), t.target.index());
            r[(d, s)] += rate;
            r[(s, s)] -= rate;
        }
        r
    }
}
