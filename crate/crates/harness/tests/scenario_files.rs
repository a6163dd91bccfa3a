use std::fs;

use qdcascade::kinetics::Irf;
use qdcascade::qdynamics::PulseModel;
use qdcascade::tomography::Noise;
use qdcascade_harness::config::{load_scenario, Kind};
use qdcascade_harness::HarnessError;

#[test]
fn relative_paths_resolve_against_the_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("irf.csv"), "time_ns,intensity\n-0.1,0.2\n0.0,1.0\n0.1,0.2\n").unwrap();
    let cfg = dir.path().join("decay.toml");
    fs::write(&cfg, "kind = \"decay-sweep\"\nout = \"runs/a\"\n[irf]\nhistogram = \"irf.csv\"\n").unwrap();
    let sc = load_scenario(&cfg, None).unwrap();
    assert_eq!(sc.out, dir.path().join("runs/a"));
    match sc.irf {
        Irf::Histogram { dt, ref values, .. } => {
            assert!((dt - 0.1).abs() < 1e-12);
            assert_eq!(values.len(), 3);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn kind_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    fs::write(&cfg, "").unwrap();
    let sc = load_scenario(&cfg, Some(Kind::ConcurrenceSweep)).unwrap();
    assert_eq!(sc.pulse, PulseModel::stark_default());
    assert_eq!((sc.bin.lo(), sc.bin.hi()), (0.0, 2.0));
    let sc = load_scenario(&cfg, Some(Kind::TomographyDemo)).unwrap();
    assert_eq!(sc.pulse, PulseModel::Instantaneous);
    assert_eq!(sc.temperatures, vec![4.4, 48.4]);
    assert_eq!(sc.tomography.noise, Noise::Poisson);
    assert!(matches!(load_scenario(&cfg, None), Err(HarnessError::Config(_))));
}

#[test]
fn broken_files_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("syntax.toml", "kind = \"decay-sweep\"\n[params\n"),
        ("kind.toml", "kind = \"heat-map\"\n"),
        ("irf.toml", "kind = \"decay-sweep\"\n[irf]\nhistogram = \"nope.csv\"\n"),
        ("both.toml", "kind = \"decay-sweep\"\n[irf]\nfwhm = \"100 ps\"\nhistogram = \"x.csv\"\n"),
        ("pulse.toml", "kind = \"bin-sweep\"\n[pulse]\nlevel = \"XX\"\n"),
        ("units.toml", "kind = \"bin-sweep\"\n[bin_sweep]\nwidth = \"500 K\"\n"),
        ("seed.toml", "kind = \"bin-sweep\"\nseed = -1\n"),
    ] {
        let cfg = dir.path().join(name);
        fs::write(&cfg, text).unwrap();
        let err = load_scenario(&cfg, None).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{name}: {err}");
    }
}
