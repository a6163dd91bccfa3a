//! Polarization-resolved two-time correlators
//!
//! `G_{jk,lm}(t, τ) = ⟨σ†_{XX,j}(t) σ†_{X,k}(t+τ) σ_{X,m}(t+τ) σ_{XX,l}(t)⟩`
//!
//! with `σ_{XX,j} = |X_j⟩⟨XX|` and `σ_{X,k} = |G⟩⟨X_k|`, evaluated by the
//! quantum regression theorem:
//!
//! `G = Tr[ A_{km} U(t+τ, t)[ σ_{XX,l} ρ(t) σ†_{XX,j} ] ]`, `A_{km} = σ†_{X,k} σ_{X,m}`.
//!
//! Outside the pulse window the generator is time independent, so
//! `Tr[A e^{Lτ} S] = ⟨e^{L†τ} A†, S⟩`: the X-arm observables are evolved once
//! in the Heisenberg picture and each emission time only stores its
//! sandwiched state. Rows that start inside the pulse window are carried
//! through the window explicitly and then joined to the same observables.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Matrix4};
use serde::{Deserialize, Serialize};

use super::{matrix_unit, DensityOperator, DynamicsError, Liouvillian, Op7, DIM};
use crate::levels::Level;
use crate::linalg::{unvectorize, vectorize};
use crate::{C64, HBAR, REPETITION_PERIOD};

const NV: usize = DIM * DIM;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pol {
    H,
    V,
}

impl Pol {
    pub const BOTH: [Pol; 2] = [Pol::H, Pol::V];

    pub fn exciton(self) -> Level {
        match self {
            Pol::H => Level::XH,
            Pol::V => Level::XV,
        }
    }

    pub fn idx(self) -> usize {
        self as usize
    }

    pub fn label(self) -> char {
        match self {
            Pol::H => 'H',
            Pol::V => 'V',
        }
    }
}

/// Shared uniform grid for emission time `t` and delay `τ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelatorGrid {
    /// Step for both axes, ns.
    pub dt: f64,
    /// Cap on the emission window, ns.
    pub t_max: f64,
    /// Largest delay, ns.
    pub tau_max: f64,
    /// The emission window ends once the XX source term drops below this
    /// fraction of its peak.
    pub tail_cutoff: f64,
}

impl Default for CorrelatorGrid {
    fn default() -> Self {
        Self { dt: 1e-3, t_max: REPETITION_PERIOD, tau_max: REPETITION_PERIOD, tail_cutoff: 1e-6 }
    }
}

impl CorrelatorGrid {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > 0.0 && self.t_max > self.dt && self.tau_max >= 0.0 && self.tail_cutoff >= 0.0) {
            return Err(DynamicsError::Invalid(format!("bad correlator grid {self:?}")));
        }
        Ok(())
    }
}

struct Row {
    /// Grid steps until the row's delay axis leaves the pulse window.
    offset: usize,
    /// Sandwiched states (index `2l + j`) at `t + offset·dt`.
    entry: [DVector<C64>; 4],
    /// Values for `τ < offset·dt`, index `[sandwich * 4 + observable]`.
    early: Vec<[C64; 16]>,
}

/// All sixteen correlators on the `(t, τ)` grid.
pub struct CorrelatorSet {
    pub temperature: f64,
    dt: f64,
    n_tau: usize,
    /// Heisenberg-evolved `A†_{km}` (index `2k + m`) per delay step.
    obs: Vec<[DVector<C64>; 4]>,
    rows: Vec<Row>,
}

/// One `(j, k, l, m)` component of a [`CorrelatorSet`].
pub struct CorrelatorView<'a> {
    set: &'a CorrelatorSet,
    pub indices: [Pol; 4],
}

impl CorrelatorView<'_> {
    pub fn value(&self, it: usize, itau: usize) -> C64 {
        self.set.value(self.indices, it, itau)
    }
}

fn sandwich_index(l: Pol, j: Pol) -> usize {
    2 * l.idx() + j.idx()
}

fn observable_index(k: Pol, m: Pol) -> usize {
    2 * k.idx() + m.idx()
}

fn dot(a: &DVector<C64>, b: &DVector<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn sandwiches(rho: &Op7) -> [DVector<C64>; 4] {
    std::array::from_fn(|s| {
        let (l, j) = (Pol::BOTH[s / 2], Pol::BOTH[s % 2]);
        let sl = matrix_unit(l.exciton(), Level::XX);
        let sj = matrix_unit(j.exciton(), Level::XX);
        vectorize(&(sl * rho * sj.adjoint()))
    })
}

/// Nyquist check of the grid step against the FSS precession and the pulse
/// shift.
fn check_nyquist(l: &Liouvillian, dt: f64) -> Result<(), DynamicsError> {
    let fss = (l.energies[Level::XH.index()] - l.energies[Level::XV.index()]).abs();
    let s = l.drive.map_or(0.0, |d| d.s_max.abs());
    let omega = fss.max(s) / HBAR;
    if omega > 0.0 {
        let limit = std::f64::consts::PI / omega;
        if dt >= limit {
            return Err(DynamicsError::GridTooCoarse { dt, omega, limit });
        }
    }
    Ok(())
}

/// Evaluate all correlators from the initial state `rho0` under `l`
/// (including its pulse drive, if any).
pub fn two_time_correlators(
    rho0: &DensityOperator,
    l: &Liouvillian,
    grid: &CorrelatorGrid,
) -> Result<CorrelatorSet, DynamicsError> {
    rho0.validate()?;
    grid.validate()?;
    check_nyquist(l, grid.dt)?;
    let dt = grid.dt;
    let n_tau = (grid.tau_max / dt).round() as usize + 1;
    let n_t_cap = (grid.t_max / dt).round() as usize + 1;
    let m_w = (l.drive_end() / dt).ceil() as usize;

    let step = l.propagator(dt);
    let window: Vec<DMatrix<C64>> = if m_w > 0 { l.step_propagators(0.0, dt, m_w)? } else { Vec::new() };

    // X-arm observables, Heisenberg picture.
    let step_h = step.adjoint();
    let mut obs: Vec<[DVector<C64>; 4]> = Vec::with_capacity(n_tau);
    obs.push(std::array::from_fn(|o| {
        let (k, m) = (Pol::BOTH[o / 2], Pol::BOTH[o % 2]);
        let sk = matrix_unit(Level::G, k.exciton());
        let sm = matrix_unit(Level::G, m.exciton());
        vectorize(&(sk.adjoint() * sm).adjoint())
    }));
    for q in 1..n_tau {
        let next = std::array::from_fn(|o| &step_h * &obs[q - 1][o]);
        obs.push(next);
    }

    let mut rho = vectorize(&rho0.0);
    let mut rows = Vec::new();
    let mut peak = 0.0f64;
    for i in 0..n_t_cap {
        if i > 0 {
            rho = if i - 1 < m_w { &window[i - 1] * &rho } else { &step * &rho };
            if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(DynamicsError::Numerical(format!("non-finite state at t = {}", i as f64 * dt)));
            }
        }
        let rho_m: Op7 = unvectorize::<DIM>(&rho);
        let mut states = sandwiches(&rho_m);
        let source: f64 = (0..2).map(|p| unvectorize::<DIM>(&states[3 * p]).trace().re).sum();
        peak = peak.max(source);

        let offset = m_w.saturating_sub(i);
        let mut early = Vec::with_capacity(offset.min(n_tau));
        for q in 0..offset {
            if q < n_tau {
                early.push(std::array::from_fn(|idx| dot(&obs[0][idx % 4], &states[idx / 4])));
            }
            for s in states.iter_mut() {
                *s = &window[i + q] * &*s;
            }
        }
        rows.push(Row { offset, entry: states, early });

        if i >= m_w && source <= grid.tail_cutoff * peak {
            break;
        }
    }

    Ok(CorrelatorSet { temperature: l.temperature, dt, n_tau, obs, rows })
}

/// Composite Simpson weights on `n` uniform samples; an even count closes
/// with a 3/8 panel, and fewer than three samples fall back to trapezoids.
pub(crate) fn simpson_weights(n: usize, dt: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    match n {
        0 | 1 => return w,
        2 => return vec![0.5 * dt; 2],
        3 => return vec![dt / 3.0, 4.0 * dt / 3.0, dt / 3.0],
        _ => {}
    }
    let simpson_end = if n % 2 == 1 { n - 1 } else { n - 4 };
    for i in (0..simpson_end).step_by(2) {
        w[i] += dt / 3.0;
        w[i + 1] += 4.0 * dt / 3.0;
        w[i + 2] += dt / 3.0;
    }
    if n.is_multiple_of(2) {
        let e = n - 4;
        for (k, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
            w[e + k] += 3.0 * dt / 8.0 * c;
        }
    }
    w
}

/// Weights of a piecewise-linear interpolant integrated over `[lo, hi]` on
/// the grid `q·dt`, `q < n`.
pub(crate) fn interval_weights(n: usize, dt: f64, lo: f64, hi: f64) -> Vec<(usize, f64)> {
    let mut w = vec![0.0; n];
    for q in 0..n.saturating_sub(1) {
        let (a, b) = ((lo - q as f64 * dt) / dt, (hi - q as f64 * dt) / dt);
        let (xa, xb) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
        if xb <= xa {
            continue;
        }
        let lin = 0.5 * (xb * xb - xa * xa);
        w[q] += dt * ((xb - xa) - lin);
        w[q + 1] += dt * lin;
    }
    w.into_iter().enumerate().filter(|(_, v)| *v != 0.0).collect()
}

impl CorrelatorSet {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of emission-time samples (after tail truncation).
    pub fn n_t(&self) -> usize {
        self.rows.len()
    }

    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    pub fn t(&self, it: usize) -> f64 {
        it as f64 * self.dt
    }

    pub fn tau(&self, itau: usize) -> f64 {
        itau as f64 * self.dt
    }

    pub fn tau_max(&self) -> f64 {
        self.tau(self.n_tau - 1)
    }

    pub fn correlator(&self, j: Pol, k: Pol, l: Pol, m: Pol) -> CorrelatorView<'_> {
        CorrelatorView { set: self, indices: [j, k, l, m] }
    }

    /// `G_{jk,lm}(t_it, τ_itau)` for `[j, k, l, m]`.
    pub fn value(&self, [j, k, l, m]: [Pol; 4], it: usize, itau: usize) -> C64 {
        self.raw(it, itau, sandwich_index(l, j), observable_index(k, m))
    }

    fn raw(&self, it: usize, itau: usize, s: usize, o: usize) -> C64 {
        let row = &self.rows[it];
        if itau < row.offset {
            row.early[itau][s * 4 + o]
        } else {
            dot(&self.obs[itau - row.offset][o], &row.entry[s])
        }
    }

    fn to_matrix(g: &[[C64; 4]; 4]) -> Matrix4<C64> {
        // g[sandwich (l, j)][observable (k, m)] -> M[(j, k), (l, m)]
        Matrix4::from_fn(|r, c| {
            let (j, k) = (r / 2, r % 2);
            let (l, m) = (c / 2, c % 2);
            g[2 * l + j][2 * k + m]
        })
    }

    /// The 4×4 matrix `[G_{jk,lm}(t, τ)]` in the basis (HH, HV, VH, VV).
    pub fn matrix_at(&self, it: usize, itau: usize) -> Matrix4<C64> {
        let g: [[C64; 4]; 4] = std::array::from_fn(|s| std::array::from_fn(|o| self.raw(it, itau, s, o)));
        Self::to_matrix(&g)
    }

    /// `∫dt ∫_{lo}^{hi} dτ G_{jk,lm}(t, τ)` as a 4×4 matrix: composite
    /// Simpson in `t` over the emission window, piecewise-linear in `τ` with fractional
    /// edge weights.
    pub fn integrate(&self, lo: f64, hi: f64) -> Result<Matrix4<C64>, DynamicsError> {
        let lo = lo.max(0.0);
        if !(hi > lo) {
            return Err(DynamicsError::Invalid(format!("empty delay interval [{lo}, {hi}]")));
        }
        if lo >= self.tau_max() {
            return Err(DynamicsError::Invalid(format!(
                "delay interval [{lo}, {hi}] does not overlap the grid [0, {}]",
                self.tau_max()
            )));
        }
        if hi > self.tau_max() * (1.0 + 1e-12) + 1e-12 {
            return Err(DynamicsError::Invalid(format!(
                "delay interval ends at {hi} ns beyond the grid ({} ns)",
                self.tau_max()
            )));
        }
        let tau_w = interval_weights(self.n_tau, self.dt, lo, hi);
        let n_t = self.rows.len();
        let t_weights = simpson_weights(n_t, self.dt);
        let t_w = |i: usize| t_weights[i];

        let zero = C64::from(0.0);
        let mut g = [[zero; 4]; 4];

        // Rows entering the free evolution after the same number of steps
        // share one delay-integrated observable.
        let max_off = self.rows.iter().map(|r| r.offset).max().unwrap_or(0);
        let mut entry_sum: Vec<[DVector<C64>; 4]> =
            (0..=max_off).map(|_| std::array::from_fn(|_| DVector::zeros(NV))).collect();
        for (i, row) in self.rows.iter().enumerate() {
            let wt = C64::from(t_w(i));
            for s in 0..4 {
                entry_sum[row.offset][s].axpy(wt, &row.entry[s], C64::from(1.0));
            }
            for &(q, w) in tau_w.iter().filter(|(q, _)| *q < row.offset) {
                for s in 0..4 {
                    for o in 0..4 {
                        g[s][o] += wt * w * row.early[q][s * 4 + o];
                    }
                }
            }
        }
        for (off, sums) in entry_sum.iter().enumerate() {
            if sums.iter().all(|v| v.iter().all(|z| *z == zero)) {
                continue;
            }
            let mut obs_bin: [DVector<C64>; 4] = std::array::from_fn(|_| DVector::zeros(NV));
            for &(q, w) in tau_w.iter().filter(|(q, _)| *q >= off) {
                for o in 0..4 {
                    obs_bin[o].axpy(C64::from(w), &self.obs[q - off][o], C64::from(1.0));
                }
            }
            for s in 0..4 {
                for o in 0..4 {
                    g[s][o] += dot(&obs_bin[o], &sums[s]);
                }
            }
        }
        Ok(Self::to_matrix(&g))
    }

    /// Debug dump with columns `j,k,l,m,t,tau,re,im`, every `stride`-th grid
    /// point on both axes.
    pub fn write_csv<W: Write>(&self, w: W, stride: usize) -> std::io::Result<()> {
        let stride = stride.max(1);
        let mut out = std::io::BufWriter::new(w);
        writeln!(out, "j,k,l,m,t,tau,re,im")?;
        for j in Pol::BOTH {
            for k in Pol::BOTH {
                for l in Pol::BOTH {
                    for m in Pol::BOTH {
                        for it in (0..self.n_t()).step_by(stride) {
                            for iq in (0..self.n_tau).step_by(stride) {
                                let v = self.value([j, k, l, m], it, iq);
                                writeln!(
                                    out,
                                    "{},{},{},{},{:.6},{:.6},{:.12e},{:.12e}",
                                    j.label(),
                                    k.label(),
                                    l.label(),
                                    m.label(),
                                    self.t(it),
                                    self.tau(iq),
                                    v.re,
                                    v.im
                                )?;
                            }
                        }
                    }
                }
            }
        }
        out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_weights_integrate_linear_functions_exactly() {
        let dt = 0.1;
        let n = 50;
        let f = |x: f64| 2.0 + 3.0 * x;
        for (lo, hi) in [(0.0, 4.9), (0.03, 1.27), (0.55, 0.58), (1.0, 2.0)] {
            let w = interval_weights(n, dt, lo, hi);
            let num: f64 = w.iter().map(|&(q, w)| w * f(q as f64 * dt)).sum();
            let exact = 2.0 * (hi - lo) + 1.5 * (hi * hi - lo * lo);
            assert!((num - exact).abs() < 1e-12, "{lo} {hi}: {num} vs {exact}");
        }
    }

    #[test]
    fn simpson_weights_integrate_cubics() {
        for n in 2..12 {
            let dt = 0.1;
            let w = simpson_weights(n, dt);
            let total: f64 = w.iter().sum();
            assert!((total - (n - 1) as f64 * dt).abs() < 1e-14);
            if n >= 4 {
                let f = |x: f64| 1.0 - 2.0 * x + 3.0 * x * x - x * x * x;
                let b = (n - 1) as f64 * dt;
                let exact = b - b * b + b * b * b - 0.25 * b.powi(4);
                let q: f64 = w.iter().enumerate().map(|(i, wi)| wi * f(i as f64 * dt)).sum();
                assert!((q - exact).abs() < 1e-13, "n = {n}");
            }
        }
    }

    #[test]
    fn interval_weights_are_additive() {
        let (n, dt) = (40, 0.05);
        let a = interval_weights(n, dt, 0.0, 0.723);
        let b = interval_weights(n, dt, 0.723, 1.9);
        let ab = interval_weights(n, dt, 0.0, 1.9);
        let mut sum = vec![0.0; n];
        for (q, w) in a.into_iter().chain(b) {
            sum[q] += w;
        }
        for (q, w) in ab {
            assert!((sum[q] - w).abs() < 1e-15);
        }
    }
}
