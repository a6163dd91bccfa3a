//! Scenario points as pure functions. Each sweep fans temperatures out
//! over the rayon pool and returns results in input order.

use qdcascade::kinetics::{
    convolve_irf, emission_trace, fit_tail_lifetime, integrate_populations, DecayTrace, LifetimeFit, Line,
    PopulationVector,
};
use qdcascade::levels::{build_rate_catalog, Level, QdParams};
use qdcascade::ode::Tolerances;
use qdcascade::pairstate::{
    assemble_two_photon_matrix, concurrence, fidelity_to_bell, Bell, MatrixRecord, TimeBin, TwoPhotonMatrix, HH, HV,
    VH, VV,
};
use qdcascade::qdynamics::{
    build_liouvillian, prepare_initial, two_time_correlators, CorrelatorGrid, CorrelatorSet, PulseModel,
};
use qdcascade::tomography::{
    mle_reconstruct, settings_16, settings_36, synthesize_counts, CoincidenceRecord, MleResult,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Scenario;
use crate::HarnessError;

/// Raw and detector-view traces of both lines at one temperature.
#[derive(Clone, Debug)]
pub struct DecayPoint {
    pub temperature: f64,
    /// Model emission rates, peak-normalized, starting at the pulse.
    pub xx: DecayTrace,
    pub x: DecayTrace,
    /// Zero-padded, IRF-convolved and peak-normalized.
    pub xx_observed: DecayTrace,
    pub x_observed: DecayTrace,
    pub lifetimes: Lifetimes,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lifetimes {
    pub temperature: f64,
    /// Tail fits of the IRF-convolved traces.
    pub xx: LifetimeFit,
    pub x: LifetimeFit,
    /// Tail fits of the model traces.
    pub xx_model: LifetimeFit,
    pub x_model: LifetimeFit,
}

pub fn decay_point(sc: &Scenario, temperature: f64) -> Result<DecayPoint, HarnessError> {
    let d = &sc.decay;
    let catalog = build_rate_catalog(&sc.params, temperature)?;
    let series = integrate_populations(&catalog, &PopulationVector::pure(Level::XX), d.t_max, d.dt, Tolerances::default())?;
    let mut traces = Vec::with_capacity(2);
    for line in [Line::XX, Line::X] {
        let raw = emission_trace(&series, &catalog, line)?;
        let observed = convolve_irf(&raw.clone().pad_front(d.pad), &sc.irf)?.normalize();
        let raw = raw.normalize();
        raw.validate()?;
        observed.validate()?;
        traces.push((raw, observed));
    }
    let (x, x_observed) = traces.pop().expect("two lines");
    let (xx, xx_observed) = traces.pop().expect("two lines");
    let fit = |t: &DecayTrace| fit_tail_lifetime(t, d.fit_upper, d.fit_lower);
    let lifetimes = Lifetimes {
        temperature,
        xx: fit(&xx_observed)?,
        x: fit(&x_observed)?,
        xx_model: fit(&xx)?,
        x_model: fit(&x)?,
    };
    Ok(DecayPoint { temperature, xx, x, xx_observed, x_observed, lifetimes })
}

pub fn decay_sweep(sc: &Scenario) -> Result<Vec<DecayPoint>, HarnessError> {
    sc.temperatures.par_iter().map(|&t| decay_point(sc, t)).collect()
}

/// Correlators of the cascade prepared by `pulse` at `temperature`.
pub fn correlators(
    params: &QdParams,
    temperature: f64,
    pulse: &PulseModel,
    grid: &CorrelatorGrid,
) -> Result<CorrelatorSet, HarnessError> {
    let l = build_liouvillian(params, &build_rate_catalog(params, temperature)?)?;
    let prep = prepare_initial(pulse, &l)?;
    Ok(two_time_correlators(&prep.rho0, &prep.liouvillian, grid)?)
}

pub fn pair_matrix(
    params: &QdParams,
    temperature: f64,
    pulse: &PulseModel,
    grid: &CorrelatorGrid,
    bin: &TimeBin,
) -> Result<TwoPhotonMatrix, HarnessError> {
    let set = correlators(params, temperature, pulse, grid)?;
    let rho = assemble_two_photon_matrix(&set, bin)?;
    rho.validate()?;
    Ok(rho)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub concurrence: f64,
    pub fidelity: f64,
}

impl PairMetrics {
    pub fn of(rho: &TwoPhotonMatrix) -> Result<Self, HarnessError> {
        Ok(Self { concurrence: concurrence(rho)?, fidelity: fidelity_to_bell(rho, Bell::PhiPlus) })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcurrencePoint {
    pub temperature: f64,
    pub instantaneous: PairMetrics,
    pub pulsed: PairMetrics,
}

pub fn concurrence_point(sc: &Scenario, temperature: f64) -> Result<ConcurrencePoint, HarnessError> {
    let metrics = |pulse: &PulseModel| {
        PairMetrics::of(&pair_matrix(&sc.params, temperature, pulse, &sc.grid, &sc.bin)?)
    };
    Ok(ConcurrencePoint {
        temperature,
        instantaneous: metrics(&PulseModel::Instantaneous)?,
        pulsed: metrics(&sc.pulse)?,
    })
}

pub fn concurrence_sweep(sc: &Scenario) -> Result<Vec<ConcurrencePoint>, HarnessError> {
    sc.temperatures.par_iter().map(|&t| concurrence_point(sc, t)).collect()
}

/// Matrices for the configured delay bins at one temperature.
#[derive(Clone, Debug)]
pub struct BinSweepPoint {
    pub temperature: f64,
    pub records: Vec<MatrixRecord>,
}

pub fn bin_sweep_point(sc: &Scenario, temperature: f64) -> Result<BinSweepPoint, HarnessError> {
    let set = correlators(&sc.params, temperature, &sc.pulse, &sc.grid)?;
    let records = sc
        .bin_sweep
        .bins()?
        .par_iter()
        .map(|bin| {
            let rho = assemble_two_photon_matrix(&set, bin)?;
            Ok(MatrixRecord::new(&rho, temperature, *bin)?)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(BinSweepPoint { temperature, records })
}

pub fn bin_sweep(sc: &Scenario) -> Result<Vec<BinSweepPoint>, HarnessError> {
    sc.temperatures.par_iter().map(|&t| bin_sweep_point(sc, t)).collect()
}

/// Element `(r, c)` of a stored matrix record.
pub fn element(rec: &MatrixRecord, r: usize, c: usize) -> (f64, f64) {
    (rec.real[r][c], rec.imag[r][c])
}

/// Populations `HH, HV, VH, VV` and `|ρ_{HH,VV}|` of a record.
pub fn summary(rec: &MatrixRecord) -> [f64; 5] {
    let abs = |r, c| {
        let (re, im) = element(rec, r, c);
        re.hypot(im)
    };
    [rec.real[HH][HH], rec.real[HV][HV], rec.real[VH][VH], rec.real[VV][VV], abs(HH, VV)]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyMetrics {
    pub temperature: f64,
    pub seed: u64,
    pub pairs_per_setting: u64,
    pub settings: usize,
    pub truth: PairMetrics,
    pub reconstruction: PairMetrics,
    pub fidelity_to_truth: f64,
    pub trace_distance: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct TomographyPoint {
    pub truth: TwoPhotonMatrix,
    pub records: Vec<CoincidenceRecord>,
    pub result: MleResult,
    pub metrics: TomographyMetrics,
}

/// Seed used for the `index`-th temperature of a tomography run.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

pub fn tomography_point(sc: &Scenario, temperature: f64, seed: u64) -> Result<TomographyPoint, HarnessError> {
    let truth = pair_matrix(&sc.params, temperature, &sc.pulse, &sc.grid, &sc.bin)?;
    let tm = &sc.tomography;
    let settings = if tm.settings == 16 { settings_16() } else { settings_36() };
    let records = synthesize_counts(&truth, &settings, tm.pairs, tm.noise, seed)?;
    let result = mle_reconstruct(&records)?;
    result.rho.validate()?;
    let metrics = TomographyMetrics {
        temperature,
        seed,
        pairs_per_setting: tm.pairs,
        settings: settings.len(),
        truth: PairMetrics::of(&truth)?,
        reconstruction: PairMetrics::of(&result.rho)?,
        fidelity_to_truth: result.rho.fidelity(&truth),
        trace_distance: result.rho.trace_distance(&truth),
        objective: result.objective,
        iterations: result.iterations,
        converged: result.converged,
    };
    Ok(TomographyPoint { truth, records, result, metrics })
}

pub fn tomography_demo(sc: &Scenario) -> Result<Vec<TomographyPoint>, HarnessError> {
    sc.temperatures
        .par_iter()
        .enumerate()
        .map(|(i, &t)| tomography_point(sc, t, point_seed(sc.seed, i)))
        .collect()
}
