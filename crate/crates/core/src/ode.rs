//! Adaptive Dormand-Prince 5(4) integrator for small real ODE systems.
//!
//! Complex systems are integrated by the callers as interleaved real and
//! imaginary parts.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e}, last error estimate {err:e})")]
    StepUnderflow { t: f64, h: f64, err: f64 },
    #[error("exceeded {steps} steps before reaching t = {target} (stopped at t = {t})")]
    TooManySteps { steps: usize, t: f64, target: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th-order weights minus embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const MAX_STEPS: usize = 5_000_000;

/// Dormand-Prince stepper that keeps its step-size estimate between calls to
/// [`Dopri5::advance`], so integrating across a fine output grid costs no
/// more than one long integration.
pub struct Dopri5<F> {
    rhs: F,
    tol: Tolerances,
    h: Option<f64>,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    /// Number of accepted steps so far.
    pub accepted: usize,
    /// Number of rejected steps so far.
    pub rejected: usize,
}

impl<F> Dopri5<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    pub fn new(rhs: F, dim: usize, tol: Tolerances) -> Self {
        Self {
            rhs,
            tol,
            h: None,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
            y_new: vec![0.0; dim],
            accepted: 0,
            rejected: 0,
        }
    }

    fn error_norm(&self, y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..y.len() {
            let sc = self.tol.atol + self.tol.rtol * y[i].abs().max(self.y_new[i].abs());
            let e = self.tmp[i] / sc;
            acc += e * e;
        }
        (acc / y.len() as f64).sqrt()
    }

    fn initial_step(&mut self, t: f64, y: &[f64], span: f64) -> f64 {
        (self.rhs)(t, y, &mut self.k[0]);
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..y.len() {
            let sc = self.tol.atol + self.tol.rtol * y[i].abs();
            d0 += (y[i] / sc).powi(2);
            d1 += (self.k[0][i] / sc).powi(2);
        }
        let n = y.len() as f64;
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(span.abs())
    }

    /// Integrate `y` in place from `t0` to `t1` (`t1 > t0`).
    pub fn advance(&mut self, y: &mut [f64], t0: f64, t1: f64) -> Result<(), OdeError> {
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(());
        }
        let dim = y.len();
        let mut t = t0;
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(t, y, span),
        };
        let mut steps = 0usize;
        (self.rhs)(t, y, &mut self.k[0]);
        loop {
            if steps >= MAX_STEPS {
                return Err(OdeError::TooManySteps { steps, t, target: t1 });
            }
            steps += 1;
            let last = t + h >= t1 - 1e-14 * t1.abs().max(1.0);
            let h_step = if last { t1 - t } else { h };

            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            for i in 0..dim {
                self.tmp[i] = y[i] + h_step * A21 * k1[i];
            }
            (self.rhs)(t + C2 * h_step, &self.tmp, k2);
            for i in 0..dim {
                self.tmp[i] = y[i] + h_step * (A31 * k1[i] + A32 * k2[i]);
            }
            (self.rhs)(t + C3 * h_step, &self.tmp, k3);
            for i in 0..dim {
                self.tmp[i] = y[i] + h_step * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            (self.rhs)(t + C4 * h_step, &self.tmp, k4);
            for i in 0..dim {
                self.tmp[i] =
                    y[i] + h_step * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            (self.rhs)(t + C5 * h_step, &self.tmp, k5);
            for i in 0..dim {
                self.tmp[i] = y[i]
                    + h_step
                        * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            (self.rhs)(t + h_step, &self.tmp, k6);
            for i in 0..dim {
                self.y_new[i] = y[i]
                    + h_step
                        * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            (self.rhs)(t + h_step, &self.y_new, k7);
            for i in 0..dim {
                self.tmp[i] = h_step
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
            }
            let err = self.error_norm(y);
            if !err.is_finite() {
                return Err(OdeError::NonFinite { t });
            }

            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                self.accepted += 1;
                t += h_step;
                y.copy_from_slice(&self.y_new);
                // FSAL: the last stage is the derivative at the new point.
                self.k.swap(0, 6);
                if last {
                    // keep the unclipped step for the next call
                    self.h = Some(if h_step < h { h } else { h_step * factor });
                    return Ok(());
                }
                h = h_step * factor;
            } else {
                self.rejected += 1;
                h = h_step * factor.min(1.0);
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(OdeError::StepUnderflow { t, h, err });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let mut s = Dopri5::new(|_t, y: &[f64], dy: &mut [f64]| dy[0] = -2.0 * y[0], 1, Tolerances::default());
        let mut y = [1.0];
        s.advance(&mut y, 0.0, 3.0).unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_across_output_grid() {
        let mut s = Dopri5::new(
            |_t, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            2,
            Tolerances { rtol: 1e-11, atol: 1e-13 },
        );
        let mut y = [1.0, 0.0];
        let mut t = 0.0;
        for _ in 0..100 {
            s.advance(&mut y, t, t + 0.1).unwrap();
            t += 0.1;
        }
        assert!((y[0] - t.cos()).abs() < 1e-9);
        assert!((y[1] + t.sin()).abs() < 1e-9);
    }

    #[test]
    fn time_dependent_rhs() {
        // dy/dt = 2t  =>  y = t^2
        let mut s = Dopri5::new(|t, _y: &[f64], dy: &mut [f64]| dy[0] = 2.0 * t, 1, Tolerances::default());
        let mut y = [0.0];
        s.advance(&mut y, 0.0, 1.5).unwrap();
        assert!((y[0] - 2.25).abs() < 1e-12);
    }
}
