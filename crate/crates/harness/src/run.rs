//! Scenario execution: compute in parallel, then write through one
//! [`RunWriter`] and close with the manifest.

use std::fmt::Write as _;

use chrono::{SecondsFormat, Utc};
use qdcascade::tomography::write_records_csv;

use crate::compute::{self, summary};
use crate::config::{Kind, Scenario};
use crate::output::{temperature_tag, RunManifest, RunWriter};
use crate::HarnessError;

pub fn run_scenario(sc: &Scenario) -> Result<RunManifest, HarnessError> {
    sc.validate()?;
    let started = now();
    let mut w = RunWriter::create(&sc.out)?;
    match sc.kind {
        Kind::DecaySweep => write_decay(sc, &mut w)?,
        Kind::ConcurrenceSweep => write_concurrence(sc, &mut w)?,
        Kind::BinSweep => write_bin_sweep(sc, &mut w)?,
        Kind::TomographyDemo => write_tomography(sc, &mut w)?,
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        kind: sc.kind.name().to_string(),
        started,
        finished: now(),
        config: serde_json::to_value(sc).map_err(|e| HarnessError::Config(e.to_string()))?,
        files: Vec::new(),
    };
    w.finish(manifest)
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<(), HarnessError>) -> Result<Vec<u8>, HarnessError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn write_decay(sc: &Scenario, w: &mut RunWriter) -> Result<(), HarnessError> {
    let points = compute::decay_sweep(sc)?;
    for p in &points {
        let tag = temperature_tag(p.temperature);
        for (name, trace) in [("xx", &p.xx_observed), ("x", &p.x_observed)] {
            trace.validate()?;
            let data = csv_bytes(|b| Ok(trace.write_csv(b)?))?;
            w.write(&format!("decay_{tag}K_{name}.csv"), &data)?;
        }
    }
    let lifetimes: Vec<_> = points.iter().map(|p| p.lifetimes).collect();
    w.write_json("lifetimes.json", &lifetimes)
}

fn write_concurrence(sc: &Scenario, w: &mut RunWriter) -> Result<(), HarnessError> {
    let points = compute::concurrence_sweep(sc)?;
    let mut s = String::from("temperature_K,concurrence_instantaneous,fidelity_instantaneous,concurrence_pulsed,fidelity_pulsed\n");
    for p in &points {
        let _ = writeln!(
            s,
            "{},{:.9},{:.9},{:.9},{:.9}",
            p.temperature, p.instantaneous.concurrence, p.instantaneous.fidelity, p.pulsed.concurrence, p.pulsed.fidelity
        );
    }
    w.write("concurrence.csv", s.as_bytes())
}

fn write_bin_sweep(sc: &Scenario, w: &mut RunWriter) -> Result<(), HarnessError> {
    let points = compute::bin_sweep(sc)?;
    let multi = points.len() > 1;
    let mut s = String::from("temperature_K,center_ps,lo_ns,hi_ns,hh_hh,hv_hv,vh_vh,vv_vv,abs_hh_vv,concurrence,fidelity\n");
    for p in &points {
        for rec in &p.records {
            let rho = rec.matrix()?;
            rho.validate()?;
            let center = format!("{:.0}", rec.bin.center * 1e3);
            let stem = if multi {
                format!("bin_{}K_{center}ps", temperature_tag(p.temperature))
            } else {
                format!("bin_{center}ps")
            };
            w.write_json(&format!("{stem}.json"), rec)?;
            let data = csv_bytes(|b| Ok(rho.write_csv(b)?))?;
            w.write(&format!("{stem}.csv"), &data)?;
            let [hh, hv, vh, vv, coh] = summary(rec);
            let _ = writeln!(
                s,
                "{},{center},{:.6},{:.6},{hh:.9},{hv:.9},{vh:.9},{vv:.9},{coh:.9},{:.9},{:.9}",
                p.temperature,
                rec.bin.lo(),
                rec.bin.hi(),
                rec.concurrence,
                rec.fidelity_phi_plus
            );
        }
    }
    w.write("bin_sweep.csv", s.as_bytes())
}

fn write_tomography(sc: &Scenario, w: &mut RunWriter) -> Result<(), HarnessError> {
    let points = compute::tomography_demo(sc)?;
    for p in &points {
        let t = p.metrics.temperature;
        let tag = temperature_tag(t);
        let data = csv_bytes(|b| Ok(write_records_csv(&p.records, p.metrics.seed, b)?))?;
        w.write(&format!("tomo_{tag}K_counts.csv"), &data)?;
        let mut truth = qdcascade::pairstate::MatrixRecord::new(&p.truth, t, sc.bin)?;
        truth.label = Some("model".into());
        w.write_json(&format!("tomo_{tag}K_truth.json"), &truth)?;
        let mut rec = qdcascade::pairstate::MatrixRecord::new(&p.result.rho, t, sc.bin)?;
        rec.label = Some("mle".into());
        w.write_json(&format!("tomo_{tag}K_reconstruction.json"), &rec)?;
    }
    let metrics: Vec<_> = points.iter().map(|p| p.metrics).collect();
    w.write_json("tomography_metrics.json", &metrics)
}
