use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{matrix_unit, DensityOperator, DynamicsError, Op7, StarkDrive, DIM};
use crate::levels::{Level, LevelScheme, QdParams, RateCatalog, X_LINE_MEV};
use crate::linalg::{expm, kron, unvectorize, vectorize};
use crate::ode::{Dopri5, Tolerances};
use crate::{C64, HBAR};

/// Lindblad jump `√rate |target⟩⟨source|`. A jump with `source == target`
/// is a pure-dephasing projector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub source: Level,
    pub target: Level,
    /// ns⁻¹
    pub rate: f64,
}

impl Jump {
    pub fn operator(&self) -> Op7 {
        matrix_unit(self.target, self.source) * C64::from(self.rate.sqrt())
    }
}

#[derive(Clone, Debug)]
pub struct Liouvillian {
    pub temperature: f64,
    /// Diagonal Hamiltonian in µeV, rotating frame of the mean exciton
    /// energy (one exciton quantum subtracted per exciton).
    pub energies: [f64; DIM],
    pub jumps: Vec<Jump>,
    /// Transient level shift applied during the excitation pulse.
    pub drive: Option<StarkDrive>,
    superop: DMatrix<C64>,
}

fn exciton_number(level: Level) -> f64 {
    match level {
        Level::G => 0.0,
        Level::XH | Level::XV | Level::XD | Level::XStar => 1.0,
        Level::XX | Level::XXStar => 2.0,
    }
}

/// Superoperator of `-i/ħ [H, ·]` for a diagonal `H` (µeV).
fn commutator_superop(diag: &[f64; DIM]) -> DMatrix<C64> {
    let h = Op7::from_diagonal(&nalgebra::SVector::<C64, DIM>::from_iterator(diag.iter().map(|&e| C64::from(e))));
    let id = Op7::identity();
    (kron(&id, &h) - kron(&h.transpose(), &id)) * C64::new(0.0, -1.0 / HBAR)
}

fn dissipator_superop(j: &Op7) -> DMatrix<C64> {
    let id = Op7::identity();
    let jdj = j.adjoint() * j;
    kron(&j.conjugate(), j) - (kron(&id, &jdj) + kron(&jdj.transpose(), &id)) * C64::from(0.5)
}

/// Build the Lindblad generator: one jump per catalog entry with amplitude
/// √rate, plus dephasing projectors on `X_H` and `X_V` when
/// `dephasing_rate > 0`.
pub fn build_liouvillian(params: &QdParams, catalog: &RateCatalog) -> Result<Liouvillian, DynamicsError> {
    let scheme = LevelScheme::new(params)?;
    let energies: [f64; DIM] = std::array::from_fn(|i| {
        let info = &scheme.levels[i];
        (info.energy - exciton_number(info.level) * X_LINE_MEV) * 1e3
    });
    let mut jumps: Vec<Jump> = catalog
        .entries
        .iter()
        .filter(|(_, r)| *r > 0.0)
        .map(|(t, r)| Jump { source: t.source, target: t.target, rate: *r })
        .collect();
    if params.dephasing_rate > 0.0 {
        for l in [Level::XH, Level::XV] {
            jumps.push(Jump { source: l, target: l, rate: params.dephasing_rate });
        }
    }
    Ok(Liouvillian::new(catalog.temperature, energies, jumps))
}

impl Liouvillian {
    pub fn new(temperature: f64, energies: [f64; DIM], jumps: Vec<Jump>) -> Self {
        let mut superop = commutator_superop(&energies);
        for j in &jumps {
            superop += dissipator_superop(&j.operator());
        }
        Self { temperature, energies, jumps, drive: None, superop }
    }

    pub fn hamiltonian(&self) -> Op7 {
        Op7::from_diagonal(&nalgebra::SVector::<C64, DIM>::from_iterator(self.energies.iter().map(|&e| C64::from(e))))
    }

    /// Time-independent 49×49 generator (ns⁻¹).
    pub fn superoperator(&self) -> &DMatrix<C64> {
        &self.superop
    }

    /// Generator at time `t`, including the pulse-induced shift.
    pub fn superoperator_at(&self, t: f64) -> DMatrix<C64> {
        match &self.drive {
            Some(d) if d.shift(t) != 0.0 => &self.superop + self.shift_superop(d) * C64::from(d.shift(t)),
            _ => self.superop.clone(),
        }
    }

    /// `-i/ħ [|l⟩⟨l|, ·]` for the driven level, per µeV of shift.
    pub(crate) fn shift_superop(&self, d: &StarkDrive) -> DMatrix<C64> {
        let mut e = [0.0; DIM];
        e[d.level.index()] = 1.0;
        commutator_superop(&e)
    }

    /// Apply the time-independent generator to `rho`.
    pub fn apply(&self, rho: &Op7) -> Op7 {
        unvectorize::<DIM>(&(&self.superop * vectorize(rho)))
    }

    /// Propagator of the time-independent part over `t`.
    pub fn propagator(&self, t: f64) -> DMatrix<C64> {
        expm(&(&self.superop * C64::from(t)))
    }

    /// End of the pulse window (0 without a drive).
    pub fn drive_end(&self) -> f64 {
        self.drive.as_ref().map_or(0.0, |d| d.support_end())
    }

    /// Propagator from `t0` to `t1` under the time-dependent generator.
    ///
    /// The pulse shift only rotates coherences of the driven level and the
    /// jumps are matrix units, so the shift part commutes with the rest of the
    /// generator and contributes a diagonal phase `exp(-i/ħ (δ_al − δ_bl) Φ)`
    /// with `Φ = ∫ s(t) dt`.
    pub(crate) fn propagator_between(&self, t0: f64, t1: f64) -> Result<DMatrix<C64>, DynamicsError> {
        let mut u = self.propagator(t1 - t0);
        if let Some(d) = self.drive.as_ref() {
            let phase = self.drive_phases(d, d.shift_integral(t0, t1));
            for (c, ph) in phase.iter().enumerate() {
                u.column_mut(c).iter_mut().for_each(|z| *z *= *ph);
            }
        }
        Ok(u)
    }

    /// Phase factors per vec index for an accumulated shift `phi` (µeV·ns).
    fn drive_phases(&self, d: &StarkDrive, phi: f64) -> Vec<C64> {
        let l = d.level.index();
        (0..DIM * DIM)
            .map(|v| {
                let (a, b) = (v % DIM, v / DIM);
                let w = (a == l) as i32 as f64 - (b == l) as i32 as f64;
                C64::from_polar(1.0, -w * phi / HBAR)
            })
            .collect()
    }

    /// Propagators over `[t0 + s·dt, t0 + (s+1)·dt]` for `s < n_steps`.
    pub(crate) fn step_propagators(&self, t0: f64, dt: f64, n_steps: usize) -> Result<Vec<DMatrix<C64>>, DynamicsError> {
        let base = self.propagator(dt);
        Ok((0..n_steps)
            .map(|s| {
                let mut u = base.clone();
                if let Some(d) = self.drive.as_ref() {
                    let a = t0 + s as f64 * dt;
                    for (c, ph) in self.drive_phases(d, d.shift_integral(a, a + dt)).iter().enumerate() {
                        u.column_mut(c).iter_mut().for_each(|z| *z *= *ph);
                    }
                }
                u
            })
            .collect())
    }

    /// Propagator from `t0` to `t1` by direct adaptive integration of the
    /// time-dependent generator over the 49 columns (reference path).
    pub fn integrate_propagator(&self, t0: f64, t1: f64, tol: Tolerances) -> Result<DMatrix<C64>, DynamicsError> {
        let n = DIM * DIM;
        let shift = match &self.drive {
            Some(d) => self.shift_superop(d),
            None => DMatrix::zeros(n, n),
        };
        let zero = C64::from(0.0);
        let nz: Vec<(usize, usize, C64, C64)> = (0..n)
            .flat_map(|r| (0..n).map(move |k| (r, k)))
            .filter(|&(r, k)| self.superop[(r, k)] != zero || shift[(r, k)] != zero)
            .map(|(r, k)| (r, k, self.superop[(r, k)], shift[(r, k)]))
            .collect();
        let drive = self.drive;
        let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
            let s = C64::from(drive.map_or(0.0, |d| d.shift(t)));
            dy.iter_mut().for_each(|v| *v = 0.0);
            for col in 0..n {
                let off = 2 * n * col;
                for &(r, k, b, sh) in &nz {
                    let l = b + sh * s;
                    let (yr, yi) = (y[off + 2 * k], y[off + 2 * k + 1]);
                    dy[off + 2 * r] += l.re * yr - l.im * yi;
                    dy[off + 2 * r + 1] += l.re * yi + l.im * yr;
                }
            }
        };
        let mut y = vec![0.0; 2 * n * n];
        for c in 0..n {
            y[2 * n * c + 2 * c] = 1.0;
        }
        let mut stepper = Dopri5::new(rhs, y.len(), tol);
        stepper.advance(&mut y, t0, t1)?;
        Ok(DMatrix::from_fn(n, n, |r, c| C64::new(y[2 * n * c + 2 * r], y[2 * n * c + 2 * r + 1])))
    }
}

/// `ρ(t)` from `ρ(0) = rho0`. The pulse window, if any, is integrated
/// adaptively; the remainder uses the matrix exponential.
pub fn propagate(rho0: &DensityOperator, l: &Liouvillian, t: f64) -> Result<DensityOperator, DynamicsError> {
    rho0.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(DynamicsError::Invalid(format!("propagation time {t}")));
    }
    let mut v: DVector<C64> = vectorize(&rho0.0);
    let t_w = l.drive_end().min(t);
    if t_w > 0.0 {
        v = l.propagator_between(0.0, t_w)? * v;
    }
    if t > t_w {
        v = l.propagator(t - t_w) * v;
    }
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(DynamicsError::Numerical(format!("non-finite state at t = {t}")));
    }
    let m = unvectorize::<DIM>(&v);
    // round-off symmetrisation
    Ok(DensityOperator((m + m.adjoint()) * C64::from(0.5)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levels::build_rate_catalog;
    use crate::qdynamics::{prepare_initial, PulseModel};

    #[test]
    fn closed_form_window_matches_integration() {
        let p = QdParams { fss: 1.5, ..QdParams::default() };
        let l = build_liouvillian(&p, &build_rate_catalog(&p, 30.0).unwrap()).unwrap();
        let prep = prepare_initial(&PulseModel::stark_default(), &l).unwrap();
        let l = prep.liouvillian;
        for (t0, t1) in [(0.0, 0.004), (0.003, 0.011), (0.024, 0.034)] {
            let fast = l.propagator_between(t0, t1).unwrap();
            let slow = l.integrate_propagator(t0, t1, Tolerances { rtol: 1e-13, atol: 1e-15 }).unwrap();
            let diff = (&fast - &slow).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(diff < 1e-9, "[{t0}, {t1}]: {diff:e}");
        }
    }

    #[test]
    fn trace_preserving() {
        let p = QdParams { dephasing_rate: 0.3, ..QdParams::default() };
        let l = build_liouvillian(&p, &build_rate_catalog(&p, 43.0).unwrap()).unwrap();
        let id = vectorize(&Op7::identity());
        let left = l.superoperator().adjoint() * id;
        assert!(left.iter().all(|z| z.norm() < 1e-12));
    }
}
