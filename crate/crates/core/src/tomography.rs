//! Synthetic polarization-resolved coincidence counts and maximum-likelihood
//! reconstruction of the two-photon state.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, SMatrix, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::herm_eigen;
use crate::pairstate::TwoPhotonMatrix;
use crate::C64;

#[derive(Debug, Error)]
pub enum TomographyError {
    #[error("not informationally complete: {0}")]
    Incomplete(String),
    #[error("all coincidence counts are zero")]
    DegenerateCounts,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Single-photon polarization analyzer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Analyzer {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl Analyzer {
    pub const ALL: [Analyzer; 6] = [Analyzer::H, Analyzer::V, Analyzer::D, Analyzer::A, Analyzer::R, Analyzer::L];

    pub fn ket(self) -> Vector2<C64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b) = match self {
            Analyzer::H => (C64::from(1.0), C64::from(0.0)),
            Analyzer::V => (C64::from(0.0), C64::from(1.0)),
            Analyzer::D => (C64::from(s), C64::from(s)),
            Analyzer::A => (C64::from(s), C64::from(-s)),
            Analyzer::R => (C64::from(s), C64::new(0.0, -s)),
            Analyzer::L => (C64::from(s), C64::new(0.0, s)),
        };
        Vector2::new(a, b)
    }

    pub fn projector(self) -> Matrix2<C64> {
        let k = self.ket();
        k * k.adjoint()
    }
}

impl fmt::Display for Analyzer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Analyzer {
    type Err = TomographyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Analyzer::ALL
            .into_iter()
            .find(|a| a.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| TomographyError::Invalid(format!("unknown analyzer `{s}`")))
    }
}

/// Analyzer pair: XX arm first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub xx: Analyzer,
    pub x: Analyzer,
}

impl MeasurementSetting {
    pub fn new(xx: Analyzer, x: Analyzer) -> Self {
        Self { xx, x }
    }

    pub fn operator(&self) -> Matrix4<C64> {
        let (a, b) = (self.xx.projector(), self.x.projector());
        Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
    }

    pub fn probability(&self, rho: &TwoPhotonMatrix) -> f64 {
        (rho.0 * self.operator()).trace().re
    }
}

/// All 36 pairs of the six analyzers.
pub fn settings_36() -> Vec<MeasurementSetting> {
    Analyzer::ALL
        .iter()
        .flat_map(|&a| Analyzer::ALL.iter().map(move |&b| MeasurementSetting::new(a, b)))
        .collect()
}

/// The standard 16-setting subset.
pub fn settings_16() -> Vec<MeasurementSetting> {
    use Analyzer::*;
    [
        (H, H), (H, V), (V, V), (V, H), (R, H), (R, V), (D, V), (D, H),
        (D, R), (D, D), (R, D), (H, D), (V, D), (V, L), (H, L), (R, L),
    ]
    .into_iter()
    .map(|(a, b)| MeasurementSetting::new(a, b))
    .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Noise {
    /// Sampled counts are the rounded expectations.
    None,
    Poisson,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceRecord {
    pub setting: MeasurementSetting,
    pub expected: f64,
    pub sampled: u64,
    /// Pairs sent through this setting.
    pub n_pairs: u64,
}

pub fn synthesize_counts(
    rho: &TwoPhotonMatrix,
    settings: &[MeasurementSetting],
    n_pairs: u64,
    noise: Noise,
    seed: u64,
) -> Result<Vec<CoincidenceRecord>, TomographyError> {
    rho.validate().map_err(|e| TomographyError::Invalid(e.to_string()))?;
    if n_pairs == 0 {
        return Err(TomographyError::Invalid("n_pairs must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    settings
        .iter()
        .map(|&setting| {
            let expected = n_pairs as f64 * setting.probability(rho).max(0.0);
            let sampled = match noise {
                Noise::None => expected.round() as u64,
                Noise::Poisson if expected > 0.0 => Poisson::new(expected)
                    .map_err(|e| TomographyError::Invalid(e.to_string()))?
                    .sample(&mut rng) as u64,
                Noise::Poisson => 0,
            };
            Ok(CoincidenceRecord { setting, expected, sampled, n_pairs })
        })
        .collect()
}

/// CSV with columns `xx,x,expected,sampled,n_pairs,seed`.
pub fn write_records_csv<W: Write>(records: &[CoincidenceRecord], seed: u64, w: W) -> Result<(), TomographyError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["xx", "x", "expected", "sampled", "n_pairs", "seed"])?;
    for r in records {
        wr.write_record([
            r.setting.xx.to_string(),
            r.setting.x.to_string(),
            format!("{:.9}", r.expected),
            r.sampled.to_string(),
            r.n_pairs.to_string(),
            seed.to_string(),
        ])?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_records_csv<R: Read>(r: R) -> Result<Vec<CoincidenceRecord>, TomographyError> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| TomographyError::Invalid(format!("missing column {i}")));
        let num = |i: usize| -> Result<f64, TomographyError> {
            field(i)?.parse().map_err(|e| TomographyError::Invalid(format!("column {i}: {e}")))
        };
        out.push(CoincidenceRecord {
            setting: MeasurementSetting::new(field(0)?.parse()?, field(1)?.parse()?),
            expected: num(2)?,
            sampled: num(3)? as u64,
            n_pairs: num(4)? as u64,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub stall_tol: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { max_iter: 2000, grad_tol: 1e-9, stall_tol: 1e-12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    pub rho: TwoPhotonMatrix,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Floor on the expected counts in the objective's denominator.
const COUNT_FLOOR: f64 = 0.5;

struct Problem {
    ops: Vec<Matrix4<C64>>,
    n_pairs: Vec<f64>,
    counts: Vec<f64>,
}

fn pauli(i: usize) -> Matrix2<C64> {
    let (o, z, j) = (C64::from(1.0), C64::from(0.0), C64::new(0.0, 1.0));
    match i {
        0 => Matrix2::new(o, z, z, o),
        1 => Matrix2::new(z, o, o, z),
        2 => Matrix2::new(z, -j, j, z),
        _ => Matrix2::new(o, z, z, -o),
    }
}

fn pauli_pair(mu: usize) -> Matrix4<C64> {
    let (a, b) = (pauli(mu / 4), pauli(mu % 4));
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// Number of parameters of the triangular factor.
const NP: usize = 16;

/// Lower-triangular `L` with real diagonal; `ρ = L L† / Tr(L L†)`.
fn factor_from_params(x: &[f64]) -> Matrix4<C64> {
    let mut l = Matrix4::<C64>::zeros();
    let mut p = 4;
    for i in 0..4 {
        l[(i, i)] = C64::from(x[i]);
        for j in 0..i {
            l[(i, j)] = C64::new(x[p], x[p + 1]);
            p += 2;
        }
    }
    l
}

fn params_from_factor(l: &Matrix4<C64>) -> [f64; NP] {
    let mut x = [0.0; NP];
    let mut p = 4;
    for i in 0..4 {
        x[i] = l[(i, i)].re;
        for j in 0..i {
            x[p] = l[(i, j)].re;
            x[p + 1] = l[(i, j)].im;
            p += 2;
        }
    }
    x
}

fn rho_from_factor(l: &Matrix4<C64>) -> Matrix4<C64> {
    let m = l * l.adjoint();
    m / C64::from(m.trace().re)
}

impl Problem {
    fn objective(&self, rho: &Matrix4<C64>) -> f64 {
        self.ops
            .iter()
            .zip(self.n_pairs.iter().zip(&self.counts))
            .map(|(m, (&n, &c))| {
                let e = n * (rho * m).trace().re;
                (e - c).powi(2) / (2.0 * e.max(COUNT_FLOOR))
            })
            .sum()
    }

    fn value_and_grad(&self, x: &[f64]) -> (f64, [f64; NP]) {
        let l = factor_from_params(x);
        let raw = l * l.adjoint();
        let tau = raw.trace().re;
        let rho = raw / C64::from(tau);
        let mut f = 0.0;
        let mut g = Matrix4::<C64>::zeros();
        for (m, (&n, &c)) in self.ops.iter().zip(self.n_pairs.iter().zip(&self.counts)) {
            let e = n * (rho * m).trace().re;
            let d = if e > COUNT_FLOOR {
                f += (e - c).powi(2) / (2.0 * e);
                (e * e - c * c) / (2.0 * e * e)
            } else {
                f += (e - c).powi(2) / (2.0 * COUNT_FLOOR);
                (e - c) / COUNT_FLOOR
            };
            g += m * C64::from(n * d);
        }
        // dF = 2 Re Tr(W dL), W = L† (G - Tr(Gρ) I) / τ
        let gr = (g * rho).trace().re;
        let w = l.adjoint() * (g - Matrix4::identity() * C64::from(gr)) / C64::from(tau);
        let mut grad = [0.0; NP];
        let mut p = 4;
        for i in 0..4 {
            grad[i] = 2.0 * w[(i, i)].re;
            for j in 0..i {
                grad[p] = 2.0 * w[(j, i)].re;
                grad[p + 1] = -2.0 * w[(j, i)].im;
                p += 2;
            }
        }
        (f, grad)
    }

    fn linear_inversion(&self) -> Result<Matrix4<C64>, TomographyError> {
        let basis: Vec<Matrix4<C64>> = (0..16).map(pauli_pair).collect();
        let a = DMatrix::<f64>::from_fn(self.ops.len(), 16, |r, c| (self.ops[r] * basis[c]).trace().re / 4.0);
        let svd = a.clone().svd(true, true);
        let rank = svd.rank(1e-9 * svd.singular_values.max());
        if rank < 16 {
            return Err(TomographyError::Incomplete(format!("measurement operators span rank {rank} < 16")));
        }
        let f = DVector::from_iterator(self.ops.len(), self.counts.iter().zip(&self.n_pairs).map(|(c, n)| c / n));
        let r = svd.solve(&f, 1e-12).map_err(|e| TomographyError::Invalid(e.to_string()))?;
        let mut rho = Matrix4::<C64>::zeros();
        for (mu, b) in basis.iter().enumerate() {
            rho += b * C64::from(r[mu] / 4.0);
        }
        Ok(rho)
    }
}

/// Project a Hermitian matrix onto the physical states: clip negative
/// eigenvalues, renormalize, and mix in a little of `I/4` so the Cholesky
/// factor exists.
fn physical_start(m: &Matrix4<C64>) -> Matrix4<C64> {
    let (vals, vecs) = herm_eigen(m);
    let clipped: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = clipped.iter().sum();
    let d = SMatrix::<C64, 4, 4>::from_diagonal(&nalgebra::Vector4::from_iterator(
        clipped.iter().map(|v| C64::from(if s > 0.0 { v / s } else { 0.25 })),
    ));
    let p = vecs * d * vecs.adjoint();
    let eps = 1e-3;
    p * C64::from(1.0 - eps) + Matrix4::identity() * C64::from(eps / 4.0)
}

struct BfgsOutcome {
    x: [f64; NP],
    f: f64,
    iterations: usize,
    converged: bool,
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn bfgs(problem: &Problem, x0: [f64; NP], opts: &MleOptions) -> BfgsOutcome {
    let mut x = x0;
    let (mut f, mut g) = problem.value_and_grad(&x);
    let mut h = SMatrix::<f64, NP, NP>::identity();
    let mut fresh = true;
    for it in 0..opts.max_iter {
        let gnorm = dotp(&g, &g).sqrt();
        if gnorm < opts.grad_tol {
            return BfgsOutcome { x, f, iterations: it, converged: true };
        }
        let gv = SMatrix::<f64, NP, 1>::from_column_slice(&g);
        let mut dir = -(h * gv);
        let mut slope = dir.dot(&gv);
        if slope >= 0.0 {
            h = SMatrix::identity();
            fresh = true;
            dir = -gv;
            slope = -gnorm * gnorm;
        }
        let mut alpha = if fresh { (0.1 / gnorm).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let xn: [f64; NP] = std::array::from_fn(|i| x[i] + alpha * dir[i]);
            let (fn_, gn) = problem.value_and_grad(&xn);
            if fn_.is_finite() && fn_ <= f + 1e-4 * alpha * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            if !fresh {
                h = SMatrix::identity();
                fresh = true;
                continue;
            }
            // no descent possible along the gradient: stalled
            return BfgsOutcome { x, f, iterations: it, converged: true };
        };
        let s: [f64; NP] = std::array::from_fn(|i| xn[i] - x[i]);
        let y: [f64; NP] = std::array::from_fn(|i| gn[i] - g[i]);
        let sy = dotp(&s, &y);
        let stalled = (f - fn_).abs() <= opts.stall_tol * f.abs().max(f64::MIN_POSITIVE);
        x = xn;
        f = fn_;
        g = gn;
        if stalled {
            return BfgsOutcome { x, f, iterations: it + 1, converged: true };
        }
        if sy > 1e-300 {
            let sv = SMatrix::<f64, NP, 1>::from_column_slice(&s);
            let yv = SMatrix::<f64, NP, 1>::from_column_slice(&y);
            if fresh {
                h = SMatrix::identity() * (sy / yv.dot(&yv));
            }
            let rho = 1.0 / sy;
            let id = SMatrix::<f64, NP, NP>::identity();
            let left = id - sv * yv.transpose() * rho;
            let right = id - yv * sv.transpose() * rho;
            h = left * h * right + sv * sv.transpose() * rho;
            fresh = false;
        }
    }
    BfgsOutcome { x, f, iterations: opts.max_iter, converged: false }
}

pub fn mle_reconstruct(records: &[CoincidenceRecord]) -> Result<MleResult, TomographyError> {
    mle_reconstruct_with(records, &MleOptions::default())
}

/// Minimize `Σ (N Tr(ρ M) − n)² / (2 max(N Tr(ρ M), 0.5))` over the
/// triangular factor of ρ, starting from the projected linear-inversion
/// estimate and restarting from `I/4` if that run does not converge.
pub fn mle_reconstruct_with(records: &[CoincidenceRecord], opts: &MleOptions) -> Result<MleResult, TomographyError> {
    if records.len() < 16 {
        return Err(TomographyError::Incomplete(format!("{} settings, need at least 16", records.len())));
    }
    if records.iter().any(|r| r.n_pairs == 0) {
        return Err(TomographyError::Invalid("record with zero pairs".into()));
    }
    if records.iter().all(|r| r.sampled == 0) {
        return Err(TomographyError::DegenerateCounts);
    }
    let problem = Problem {
        ops: records.iter().map(|r| r.setting.operator()).collect(),
        n_pairs: records.iter().map(|r| r.n_pairs as f64).collect(),
        counts: records.iter().map(|r| r.sampled as f64).collect(),
    };
    let start = physical_start(&problem.linear_inversion()?);
    let factor = start
        .cholesky()
        .ok_or_else(|| TomographyError::Invalid("start point is not positive definite".into()))?
        .l();
    let mut out = bfgs(&problem, params_from_factor(&factor), opts);
    let mut iterations = out.iterations;
    if !out.converged {
        let l0 = Matrix4::<C64>::identity() * C64::from(0.5);
        let retry = bfgs(&problem, params_from_factor(&l0), opts);
        iterations += retry.iterations;
        if retry.converged || retry.f < out.f {
            out = retry;
        }
    }
    let rho = rho_from_factor(&factor_from_params(&out.x));
    let rho = TwoPhotonMatrix::from_unnormalized(rho).map_err(|e| TomographyError::Invalid(e.to_string()))?;
    Ok(MleResult { objective: problem.objective(&rho.0), rho, iterations, converged: out.converged })
}

/// Random state `G G† / Tr` from a 4×`rank` complex Gaussian matrix `G`;
/// rank 1 gives Haar-random pure states.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, rank: usize) -> TwoPhotonMatrix {
    let rank = rank.clamp(1, 4);
    let g = DMatrix::<C64>::from_fn(4, rank, |_, _| {
        C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let m = &g * g.adjoint();
    let t = m.trace().re;
    TwoPhotonMatrix(Matrix4::from_fn(|r, c| m[(r, c)] / t))
}

/// Objective value of `rho` for `records` (used for diagnostics).
pub fn objective(records: &[CoincidenceRecord], rho: &TwoPhotonMatrix) -> f64 {
    Problem {
        ops: records.iter().map(|r| r.setting.operator()).collect(),
        n_pairs: records.iter().map(|r| r.n_pairs as f64).collect(),
        counts: records.iter().map(|r| r.sampled as f64).collect(),
    }
    .objective(&rho.0)
}
