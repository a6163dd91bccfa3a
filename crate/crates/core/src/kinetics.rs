//! Classical rate-equation dynamics and emission traces.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::SVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::levels::{Level, PhotonLabel, RateCatalog};
use crate::ode::{Dopri5, OdeError, Tolerances};

#[derive(Debug, Error)]
pub enum KineticsError {
    #[error("invalid population vector: {0}")]
    InvalidPopulation(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("rate-equation integration failed: {0}")]
    Integration(#[from] OdeError),
    #[error("unknown emission line `{0}`")]
    UnknownLine(String),
    #[error("IRF kernel ({kernel} ns) is wider than the trace window ({window} ns)")]
    KernelTooWide { kernel: f64, window: f64 },
    #[error("lifetime fit failed: {0}")]
    Fit(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Occupations of the seven levels, in [`Level`] order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationVector(pub SVector<f64, 7>);

impl PopulationVector {
    pub fn pure(level: Level) -> Self {
        let mut v = SVector::<f64, 7>::zeros();
        v[level.index()] = 1.0;
        Self(v)
    }

    pub fn get(&self, level: Level) -> f64 {
        self.0[level.index()]
    }

    pub fn total(&self) -> f64 {
        self.0.sum()
    }

    pub fn validate(&self) -> Result<(), KineticsError> {
        if self.0.iter().any(|&p| !(-1e-12..=1.0 + 1e-12).contains(&p)) {
            return Err(KineticsError::InvalidPopulation(format!("entries outside [0, 1]: {:?}", self.0.as_slice())));
        }
        if (self.total() - 1.0).abs() > 1e-9 {
            return Err(KineticsError::InvalidPopulation(format!("sum is {}", self.total())));
        }
        Ok(())
    }
}

/// Populations sampled on a uniform grid starting at t = 0.
#[derive(Clone, Debug)]
pub struct PopulationSeries {
    pub temperature: f64,
    pub dt: f64,
    pub states: Vec<PopulationVector>,
}

impl PopulationSeries {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.states.len()).map(move |i| i as f64 * self.dt)
    }
}

/// Integrate `dn/dt = R n` with the adaptive Dormand-Prince stepper and
/// sample on `0, dt_out, ..., t_max`.
pub fn integrate_populations(
    catalog: &RateCatalog,
    initial: &PopulationVector,
    t_max: f64,
    dt_out: f64,
    tol: Tolerances,
) -> Result<PopulationSeries, KineticsError> {
    initial.validate()?;
    if !(t_max > 0.0) || !(dt_out > 0.0) {
        return Err(KineticsError::Invalid(format!("need t_max > 0 and dt_out > 0, got {t_max}, {dt_out}")));
    }
    let r = catalog.generator();
    let n_out = (t_max / dt_out).round() as usize + 1;
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        for i in 0..7 {
            dy[i] = (0..7).map(|j| r[(i, j)] * y[j]).sum();
        }
    };
    let mut stepper = Dopri5::new(rhs, 7, tol);
    let mut y: Vec<f64> = initial.0.iter().copied().collect();
    let mut states = Vec::with_capacity(n_out);
    states.push(*initial);
    for i in 1..n_out {
        stepper.advance(&mut y, (i - 1) as f64 * dt_out, i as f64 * dt_out)?;
        states.push(PopulationVector(SVector::from_column_slice(&y)));
    }
    Ok(PopulationSeries { temperature: catalog.temperature, dt: dt_out, states })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Line {
    XX,
    X,
    XStar,
}

impl Line {
    pub fn carries(self, label: PhotonLabel) -> bool {
        matches!(
            (self, label),
            (Line::XX, PhotonLabel::XxH | PhotonLabel::XxV)
                | (Line::X, PhotonLabel::XH | PhotonLabel::XV)
                | (Line::XStar, PhotonLabel::HotExciton)
        )
    }
}

impl fmt::Display for Line {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Line::XX => "XX",
            Line::X => "X",
            Line::XStar => "X*",
        })
    }
}

impl FromStr for Line {
    type Err = KineticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "XX" | "xx" => Ok(Line::XX),
            "X" | "x" => Ok(Line::X),
            "X*" | "x*" | "XStar" | "xstar" => Ok(Line::XStar),
            other => Err(KineticsError::UnknownLine(other.to_string())),
        }
    }
}

/// Time-resolved emission intensity on a uniform grid `t0 + i·dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayTrace {
    pub line: Line,
    pub t0: f64,
    pub dt: f64,
    pub intensity: Vec<f64>,
    /// True once scaled to unit maximum.
    pub normalized: bool,
}

impl DecayTrace {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.intensity.len().saturating_sub(1))
    }

    /// Linear interpolation; zero outside the grid.
    pub fn at(&self, t: f64) -> f64 {
        let x = (t - self.t0) / self.dt;
        if x < 0.0 || x > (self.intensity.len() - 1) as f64 {
            return 0.0;
        }
        let i = x.floor() as usize;
        if i + 1 >= self.intensity.len() {
            return self.intensity[i];
        }
        let f = x - i as f64;
        self.intensity[i] * (1.0 - f) + self.intensity[i + 1] * f
    }

    pub fn area(&self) -> f64 {
        trapz(&self.intensity, self.dt)
    }

    pub fn max(&self) -> f64 {
        self.intensity.iter().copied().fold(0.0, f64::max)
    }

    pub fn normalize(mut self) -> Self {
        let m = self.max();
        if m > 0.0 {
            self.intensity.iter_mut().for_each(|v| *v /= m);
        }
        self.normalized = true;
        self
    }

    /// Prepend `duration` worth of zero samples, e.g. before convolving a
    /// trace that starts at the excitation pulse.
    pub fn pad_front(mut self, duration: f64) -> Self {
        let n = (duration / self.dt).ceil() as usize;
        let mut v = vec![0.0; n];
        v.extend_from_slice(&self.intensity);
        self.intensity = v;
        self.t0 -= n as f64 * self.dt;
        self
    }

    pub fn validate(&self) -> Result<(), KineticsError> {
        if !(self.dt > 0.0) || self.intensity.is_empty() {
            return Err(KineticsError::Invalid("trace grid must be non-empty and strictly increasing".into()));
        }
        if self.intensity.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(KineticsError::Invalid("trace intensities must be finite and non-negative".into()));
        }
        if self.normalized && (self.max() - 1.0).abs() > 1e-12 {
            return Err(KineticsError::Invalid(format!("normalized trace has max {}", self.max())));
        }
        Ok(())
    }

    /// Two-column CSV `time_ns,intensity`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), KineticsError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["time_ns", "intensity"])?;
        for (i, v) in self.intensity.iter().enumerate() {
            wr.write_record([format!("{:.6}", self.time(i)), format!("{v:.12e}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(line: Line, r: R) -> Result<Self, KineticsError> {
        let (t0, dt, intensity) = read_uniform_columns(r)?;
        let max = intensity.iter().copied().fold(0.0, f64::max);
        let trace = Self { line, t0, dt, intensity, normalized: (max - 1.0).abs() < 1e-12 };
        trace.validate()?;
        Ok(trace)
    }
}

fn read_uniform_columns<R: Read>(r: R) -> Result<(f64, f64, Vec<f64>), KineticsError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
    let mut t = Vec::new();
    let mut v = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(KineticsError::Invalid(format!("expected 2 columns, got {}", rec.len())));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| KineticsError::Invalid(format!("`{s}`: {e}")));
        t.push(parse(&rec[0])?);
        v.push(parse(&rec[1])?);
    }
    if t.len() < 2 {
        return Err(KineticsError::Invalid("need at least two samples".into()));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if !(dt > 0.0) || t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.max(1e-9) + 1e-9) {
        return Err(KineticsError::Invalid("time column must be uniform and strictly increasing".into()));
    }
    Ok((t[0], dt, v))
}

/// Emission intensity of `line`: Σ rate × source occupation over the
/// radiative transitions carrying that line's photons.
pub fn emission_trace(
    series: &PopulationSeries,
    catalog: &RateCatalog,
    line: Line,
) -> Result<DecayTrace, KineticsError> {
    if (series.temperature - catalog.temperature).abs() > 1e-12 {
        return Err(KineticsError::Invalid(format!(
            "population series at {} K does not match catalog at {} K",
            series.temperature, catalog.temperature
        )));
    }
    let channels: Vec<(usize, f64)> = catalog
        .entries
        .iter()
        .filter(|(t, _)| line.carries(t.label))
        .map(|(t, r)| (t.source.index(), *r))
        .collect();
    let intensity = series
        .states
        .iter()
        .map(|p| channels.iter().map(|&(s, r)| r * p.0[s]).sum::<f64>().max(0.0))
        .collect();
    Ok(DecayTrace { line, t0: 0.0, dt: series.dt, intensity, normalized: false })
}

/// Instrument response function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Irf {
    Gaussian { fwhm: f64 },
    /// Sampled kernel `values[i]` at delay `t0 + i·dt`.
    Histogram { t0: f64, dt: f64, values: Vec<f64> },
}

impl Default for Irf {
    fn default() -> Self {
        Irf::Gaussian { fwhm: 0.5 }
    }
}

impl Irf {
    pub fn read_csv<R: Read>(r: R) -> Result<Self, KineticsError> {
        let (t0, dt, values) = read_uniform_columns(r)?;
        let irf = Irf::Histogram { t0, dt, values };
        irf.validate()?;
        Ok(irf)
    }

    pub fn validate(&self) -> Result<(), KineticsError> {
        match self {
            Irf::Gaussian { fwhm } if !(*fwhm >= 0.0) => Err(KineticsError::Invalid(format!("IRF fwhm {fwhm}"))),
            Irf::Histogram { dt, values, .. } => {
                if !(*dt > 0.0) || values.iter().any(|v| !(*v >= 0.0)) || values.iter().sum::<f64>() <= 0.0 {
                    Err(KineticsError::Invalid("IRF histogram must be non-negative with positive mass".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Kernel sampled on delays `k·dt` for `k ∈ [k_min, k_min + len)`,
    /// normalized so that `Σ w·dt = 1`.
    fn sample(&self, dt: f64) -> (i64, Vec<f64>) {
        let (k_min, raw): (i64, Vec<f64>) = match self {
            Irf::Gaussian { fwhm } => {
                let sigma = fwhm / (8.0 * 2f64.ln()).sqrt();
                if sigma < 0.05 * dt {
                    return (0, vec![1.0 / dt]);
                }
                let half = (6.0 * sigma / dt).ceil() as i64;
                (-half, (-half..=half).map(|k| (-0.5 * (k as f64 * dt / sigma).powi(2)).exp()).collect())
            }
            Irf::Histogram { t0, dt: hdt, values } => {
                let t_end = t0 + (values.len() - 1) as f64 * hdt;
                let k_min = (t0 / dt).floor() as i64;
                let k_max = (t_end / dt).ceil() as i64;
                let hist = DecayTrace { line: Line::X, t0: *t0, dt: *hdt, intensity: values.clone(), normalized: false };
                (k_min, (k_min..=k_max).map(|k| hist.at(k as f64 * dt)).collect())
            }
        };
        let mass: f64 = raw.iter().sum::<f64>() * dt;
        (k_min, raw.into_iter().map(|w| w / mass).collect())
    }
}

/// Discrete linear convolution with the IRF on the trace's own grid. The
/// trace is taken as zero outside its window.
pub fn convolve_irf(trace: &DecayTrace, irf: &Irf) -> Result<DecayTrace, KineticsError> {
    trace.validate()?;
    irf.validate()?;
    let (k_min, kernel) = irf.sample(trace.dt);
    let kernel_span = (kernel.len() - 1) as f64 * trace.dt;
    let window = trace.t_end() - trace.t0;
    if kernel_span > window {
        return Err(KineticsError::KernelTooWide { kernel: kernel_span, window });
    }
    let n = trace.intensity.len() as i64;
    let out: Vec<f64> = (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .filter_map(|(m, w)| {
                    let j = i - (k_min + m as i64);
                    (0..n).contains(&j).then(|| w * trace.intensity[j as usize])
                })
                .sum::<f64>()
                * trace.dt
        })
        .collect();
    let conv = DecayTrace { intensity: out, normalized: false, ..trace.clone() };
    Ok(if trace.normalized { conv.normalize() } else { conv })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifetimeFit {
    /// ns
    pub lifetime: f64,
    /// ns
    pub stderr: f64,
}

/// Least-squares line through `ln I(t)` over `[t0, t1]`; lifetime = −1/slope.
pub fn fit_exponential_lifetime(trace: &DecayTrace, window: (f64, f64)) -> Result<LifetimeFit, KineticsError> {
    let (t0, t1) = window;
    let pts: Vec<(f64, f64)> = trace
        .intensity
        .iter()
        .enumerate()
        .map(|(i, &v)| (trace.time(i), v))
        .filter(|(t, _)| *t >= t0 - 1e-12 && *t <= t1 + 1e-12)
        .collect();
    if pts.len() < 3 {
        return Err(KineticsError::Fit(format!("window [{t0}, {t1}] holds {} samples", pts.len())));
    }
    if pts.iter().any(|(_, v)| !(*v > 0.0)) {
        return Err(KineticsError::Fit("non-positive intensity in fit window".into()));
    }
    if pts.windows(2).any(|w| w[1].1 >= w[0].1) {
        return Err(KineticsError::Fit("intensity is not strictly decreasing in fit window".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1.ln() - intercept - slope * p.0).powi(2)).sum();
    let se_slope = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(LifetimeFit { lifetime: -1.0 / slope, stderr: se_slope / (slope * slope) })
}

/// Fit over the decaying part of the trace after its maximum, between the
/// first sample at or below `upper·max` and the last at or above
/// `lower·max`.
pub fn fit_tail_lifetime(trace: &DecayTrace, upper: f64, lower: f64) -> Result<LifetimeFit, KineticsError> {
    if !(0.0 < lower && lower < upper && upper <= 1.0) {
        return Err(KineticsError::Fit(format!("need 0 < lower < upper <= 1, got {lower}, {upper}")));
    }
    let peak = trace.max();
    let i_max = trace.intensity.iter().position(|&v| v == peak).unwrap_or(0);
    let start = (i_max..trace.intensity.len())
        .find(|&i| trace.intensity[i] <= upper * peak)
        .ok_or_else(|| KineticsError::Fit("trace never decays below the upper threshold".into()))?;
    let end = (start..trace.intensity.len())
        .take_while(|&i| trace.intensity[i] >= lower * peak)
        .last()
        .ok_or_else(|| KineticsError::Fit("no samples between the thresholds".into()))?;
    fit_exponential_lifetime(trace, (trace.time(start), trace.time(end)))
}

pub(crate) fn trapz(v: &[f64], dx: f64) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    dx * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]))
}
