//! Scenario configuration: one TOML file, unit-carrying values, unknown
//! keys rejected at every level.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qdcascade::config::{params_from_table, quantity, Dimension};
use qdcascade::kinetics::Irf;
use qdcascade::levels::{Level, QdParams};
use qdcascade::pairstate::TimeBin;
use qdcascade::qdynamics::{CorrelatorGrid, PulseModel};
use qdcascade::tomography::Noise;
use qdcascade::REPETITION_PERIOD;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::HarnessError;

/// Temperatures of the measured data sets, K.
pub const MEASURED_TEMPERATURES: [f64; 6] = [4.4, 12.4, 22.4, 32.4, 48.4, 64.4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    DecaySweep,
    ConcurrenceSweep,
    BinSweep,
    TomographyDemo,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::DecaySweep, Kind::ConcurrenceSweep, Kind::BinSweep, Kind::TomographyDemo];

    pub fn name(self) -> &'static str {
        match self {
            Kind::DecaySweep => "decay-sweep",
            Kind::ConcurrenceSweep => "concurrence-sweep",
            Kind::BinSweep => "bin-sweep",
            Kind::TomographyDemo => "tomography-demo",
        }
    }

    pub fn default_temperatures(self) -> Vec<f64> {
        match self {
            Kind::DecaySweep => MEASURED_TEMPERATURES.to_vec(),
            Kind::ConcurrenceSweep => {
                // 1 K theory grid merged with the measured set
                let mut t: Vec<f64> = (1..=70).map(f64::from).chain(MEASURED_TEMPERATURES).collect();
                t.sort_by(f64::total_cmp);
                t.dedup();
                t
            }
            Kind::BinSweep => vec![32.4],
            Kind::TomographyDemo => vec![4.4, 48.4],
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown scenario kind `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySettings {
    /// ns
    pub t_max: f64,
    /// ns
    pub dt: f64,
    /// Zero padding before t = 0 so the IRF does not clip the rise, ns.
    pub pad: f64,
    /// Tail fit between these fractions of the maximum.
    pub fit_upper: f64,
    pub fit_lower: f64,
}

impl Default for DecaySettings {
    fn default() -> Self {
        Self { t_max: REPETITION_PERIOD, dt: 0.002, pad: 3.0, fit_upper: 0.1, fit_lower: 1e-4 }
    }
}

/// Equidistant delay bins: centers `first, first + step, ...` up to `last`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinSweep {
    /// ns
    pub first: f64,
    /// ns
    pub step: f64,
    /// ns
    pub last: f64,
    /// ns
    pub width: f64,
}

impl Default for BinSweep {
    fn default() -> Self {
        Self { first: 0.0, step: 0.15, last: 1.05, width: 0.5 }
    }
}

impl BinSweep {
    pub fn bins(&self) -> Result<Vec<TimeBin>, HarnessError> {
        let n = ((self.last - self.first) / self.step + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|i| TimeBin::new(self.first + i as f64 * self.step, self.width).map_err(|e| HarnessError::Config(e.to_string())))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographySettings {
    /// Pairs per analyzer setting.
    pub pairs: u64,
    /// 16 or 36 settings.
    pub settings: usize,
    pub noise: Noise,
}

impl Default for TomographySettings {
    fn default() -> Self {
        Self { pairs: 100_000, settings: 36, noise: Noise::Poisson }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: Kind,
    /// K
    pub temperatures: Vec<f64>,
    pub params: QdParams,
    /// Preparation model. For the concurrence sweep this is the pulsed
    /// variant computed next to the instantaneous one.
    pub pulse: PulseModel,
    pub bin: TimeBin,
    pub grid: CorrelatorGrid,
    pub irf: Irf,
    pub decay: DecaySettings,
    pub bin_sweep: BinSweep,
    pub tomography: TomographySettings,
    pub out: PathBuf,
    pub seed: u64,
}

impl Scenario {
    pub fn defaults(kind: Kind) -> Self {
        Self {
            kind,
            temperatures: kind.default_temperatures(),
            params: QdParams::default(),
            pulse: match kind {
                Kind::ConcurrenceSweep => PulseModel::stark_default(),
                _ => PulseModel::Instantaneous,
            },
            // 2 ns coincidence window starting at zero delay
            bin: TimeBin { center: 1.0, width: 2.0 },
            grid: CorrelatorGrid::default(),
            irf: Irf::default(),
            decay: DecaySettings::default(),
            bin_sweep: BinSweep::default(),
            tomography: TomographySettings::default(),
            out: PathBuf::from(format!("runs/{}", kind.name())),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let cfg = |m: String| HarnessError::Config(m);
        if self.temperatures.is_empty() {
            return Err(cfg("no temperatures given".into()));
        }
        if let Some(t) = self.temperatures.iter().find(|t| !(**t > 0.0 && **t <= 100.0)) {
            return Err(cfg(format!("temperature {t} K outside (0, 100] K")));
        }
        self.params.validate().map_err(|e| cfg(e.to_string()))?;
        self.pulse.validate().map_err(|e| cfg(e.to_string()))?;
        self.bin.validate().map_err(|e| cfg(e.to_string()))?;
        self.grid.validate().map_err(|e| cfg(e.to_string()))?;
        self.irf.validate().map_err(|e| cfg(e.to_string()))?;
        if self.bin.hi() > self.grid.tau_max + 1e-12 {
            return Err(cfg(format!("bin ends at {} ns beyond the delay grid ({} ns)", self.bin.hi(), self.grid.tau_max)));
        }
        let d = &self.decay;
        if !(d.t_max > 0.0 && d.dt > 0.0 && d.dt < d.t_max && d.pad >= 0.0) {
            return Err(cfg(format!("bad decay settings {d:?}")));
        }
        if !(0.0 < d.fit_lower && d.fit_lower < d.fit_upper && d.fit_upper <= 1.0) {
            return Err(cfg("need 0 < fit_lower < fit_upper <= 1".into()));
        }
        let s = &self.bin_sweep;
        if !(s.step > 0.0 && s.last >= s.first) {
            return Err(cfg(format!("bad bin sweep {s:?}")));
        }
        for b in s.bins()? {
            if b.hi() > self.grid.tau_max + 1e-12 {
                return Err(cfg(format!("sweep bin ends at {} ns beyond the delay grid", b.hi())));
            }
        }
        if !matches!(self.tomography.settings, 16 | 36) {
            return Err(cfg(format!("tomography settings must be 16 or 36, got {}", self.tomography.settings)));
        }
        if self.tomography.pairs == 0 {
            return Err(cfg("tomography pairs must be positive".into()));
        }
        if self.kind == Kind::ConcurrenceSweep && self.pulse == PulseModel::Instantaneous {
            return Err(cfg("concurrence sweep needs a stark-gaussian [pulse] for its pulsed variant".into()));
        }
        Ok(())
    }
}

/// Key tracker for one table: every key must be taken, leftovers are
/// reported as unknown.
struct Section<'a> {
    path: String,
    table: &'a Table,
    seen: BTreeSet<&'a str>,
}

impl<'a> Section<'a> {
    fn new(path: &str, table: &'a Table) -> Self {
        Self { path: path.to_string(), table, seen: BTreeSet::new() }
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() { k.to_string() } else { format!("{}.{k}", self.path) }
    }

    fn get(&mut self, k: &'a str) -> Option<&'a Value> {
        let v = self.table.get(k);
        if v.is_some() {
            self.seen.insert(k);
        }
        v
    }

    fn quantity(&mut self, k: &'a str, dim: Dimension, scale: f64) -> Result<Option<f64>, HarnessError> {
        let key = self.key(k);
        self.get(k).map(|v| quantity(&key, v, dim, scale).map_err(config_err)).transpose()
    }

    fn string(&mut self, k: &'a str) -> Result<Option<&'a str>, HarnessError> {
        let key = self.key(k);
        self.get(k)
            .map(|v| v.as_str().ok_or_else(|| HarnessError::Config(format!("`{key}` must be a string"))))
            .transpose()
    }

    fn integer(&mut self, k: &'a str) -> Result<Option<i64>, HarnessError> {
        let key = self.key(k);
        self.get(k)
            .map(|v| v.as_integer().ok_or_else(|| HarnessError::Config(format!("`{key}` must be an integer"))))
            .transpose()
    }

    fn table(&mut self, k: &'a str) -> Result<Option<&'a Table>, HarnessError> {
        let key = self.key(k);
        self.get(k)
            .map(|v| v.as_table().ok_or_else(|| HarnessError::Config(format!("`{key}` must be a table"))))
            .transpose()
    }

    fn finish(self) -> Result<(), HarnessError> {
        match self.table.keys().find(|k| !self.seen.contains(k.as_str())) {
            Some(k) => Err(HarnessError::Config(format!("unknown key `{}`", self.key(k)))),
            None => Ok(()),
        }
    }
}

fn config_err(e: impl fmt::Display) -> HarnessError {
    HarnessError::Config(e.to_string())
}

fn parse_pulse(t: &Table) -> Result<PulseModel, HarnessError> {
    let mut s = Section::new("pulse", t);
    let kind = s.string("kind")?.unwrap_or("stark-gaussian");
    let pulse = match kind {
        "instantaneous" => PulseModel::Instantaneous,
        "stark-gaussian" => {
            let PulseModel::StarkGaussian { fwhm, s_max, level } = PulseModel::stark_default() else { unreachable!() };
            PulseModel::StarkGaussian {
                fwhm: s.quantity("fwhm", Dimension::Time, 1e-3)?.unwrap_or(fwhm),
                s_max: s.quantity("s_max", Dimension::Energy, 1e-3)?.unwrap_or(s_max),
                level: s.string("level")?.map(Level::from_str).transpose().map_err(config_err)?.unwrap_or(level),
            }
        }
        other => return Err(HarnessError::Config(format!("unknown pulse kind `{other}`"))),
    };
    s.finish()?;
    Ok(pulse)
}

fn parse_bin(t: &Table) -> Result<TimeBin, HarnessError> {
    let mut s = Section::new("bin", t);
    let width = s.quantity("width", Dimension::Time, 1.0)?.unwrap_or(2.0);
    let start = s.quantity("start", Dimension::Time, 1.0)?;
    let center = s.quantity("center", Dimension::Time, 1.0)?;
    s.finish()?;
    let bin = match (start, center) {
        (Some(_), Some(_)) => return Err(HarnessError::Config("give either bin.start or bin.center".into())),
        (Some(a), None) => TimeBin::starting_at(a, width),
        (None, Some(c)) => TimeBin::new(c, width),
        (None, None) => TimeBin::starting_at(0.0, width),
    };
    bin.map_err(config_err)
}

fn parse_irf(t: &Table, base: Option<&Path>) -> Result<Irf, HarnessError> {
    let mut s = Section::new("irf", t);
    let fwhm = s.quantity("fwhm", Dimension::Time, 1.0)?;
    let hist = s.string("histogram")?;
    s.finish()?;
    match (fwhm, hist) {
        (Some(_), Some(_)) => Err(HarnessError::Config("give either irf.fwhm or irf.histogram".into())),
        (Some(f), None) => Ok(Irf::Gaussian { fwhm: f }),
        (None, Some(p)) => {
            let path = base.map_or_else(|| PathBuf::from(p), |b| b.join(p));
            let file = std::fs::File::open(&path)
                .map_err(|e| HarnessError::Config(format!("irf histogram {}: {e}", path.display())))?;
            Irf::read_csv(file).map_err(config_err)
        }
        (None, None) => Ok(Irf::default()),
    }
}

fn parse_temperatures(v: &Value) -> Result<Vec<f64>, HarnessError> {
    let arr = v.as_array().ok_or_else(|| HarnessError::Config("`temperatures` must be an array".into()))?;
    arr.iter().map(|x| quantity("temperatures", x, Dimension::Temperature, 1.0).map_err(config_err)).collect()
}

/// Parse a comma-separated temperature list such as `4.4,12.4` or
/// `4.4 K, 12.4 K`.
pub fn parse_temperature_list(s: &str) -> Result<Vec<f64>, HarnessError> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| {
            x.parse::<f64>().or_else(|_| qdcascade::config::parse_quantity(x, Dimension::Temperature)).map_err(|e| {
                HarnessError::Config(format!("temperature `{x}`: {e}"))
            })
        })
        .collect()
}

/// Build a scenario from TOML text. `kind` (from the CLI verb) takes
/// precedence over a `kind` key in the file; `base` resolves relative
/// paths inside the file.
pub fn scenario_from_str(text: &str, kind: Option<Kind>, base: Option<&Path>) -> Result<Scenario, HarnessError> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
    let mut root = Section::new("", &table);
    let file_kind = root.string("kind")?.map(Kind::from_str).transpose()?;
    let kind = kind
        .or(file_kind)
        .ok_or_else(|| HarnessError::Config("scenario kind missing (set `kind` or use a run verb)".into()))?;
    let mut sc = Scenario::defaults(kind);
    if let Some(v) = root.get("temperatures") {
        sc.temperatures = parse_temperatures(v)?;
    }
    if let Some(seed) = root.integer("seed")? {
        sc.seed = u64::try_from(seed).map_err(|_| HarnessError::Config("`seed` must be non-negative".into()))?;
    }
    if let Some(out) = root.string("out")? {
        sc.out = base.map_or_else(|| PathBuf::from(out), |b| b.join(out));
    }
    if let Some(t) = root.table("params")? {
        sc.params = params_from_table(t).map_err(|e| HarnessError::Config(format!("params: {e}")))?;
    }
    if let Some(t) = root.table("pulse")? {
        sc.pulse = parse_pulse(t)?;
    }
    if let Some(t) = root.table("bin")? {
        sc.bin = parse_bin(t)?;
    }
    if let Some(t) = root.table("grid")? {
        let mut s = Section::new("grid", t);
        if let Some(v) = s.quantity("dt", Dimension::Time, 1.0)? {
            sc.grid.dt = v;
        }
        if let Some(v) = s.quantity("t_max", Dimension::Time, 1.0)? {
            sc.grid.t_max = v;
        }
        if let Some(v) = s.quantity("tau_max", Dimension::Time, 1.0)? {
            sc.grid.tau_max = v;
        }
        if let Some(v) = s.quantity("tail_cutoff", Dimension::Dimensionless, 1.0)? {
            sc.grid.tail_cutoff = v;
        }
        s.finish()?;
    }
    if let Some(t) = root.table("irf")? {
        sc.irf = parse_irf(t, base)?;
    }
    if let Some(t) = root.table("decay")? {
        let mut s = Section::new("decay", t);
        let d = &mut sc.decay;
        if let Some(v) = s.quantity("t_max", Dimension::Time, 1.0)? {
            d.t_max = v;
        }
        if let Some(v) = s.quantity("dt", Dimension::Time, 1.0)? {
            d.dt = v;
        }
        if let Some(v) = s.quantity("pad", Dimension::Time, 1.0)? {
            d.pad = v;
        }
        if let Some(v) = s.quantity("fit_upper", Dimension::Dimensionless, 1.0)? {
            d.fit_upper = v;
        }
        if let Some(v) = s.quantity("fit_lower", Dimension::Dimensionless, 1.0)? {
            d.fit_lower = v;
        }
        s.finish()?;
    }
    if let Some(t) = root.table("bin_sweep")? {
        let mut s = Section::new("bin_sweep", t);
        let b = &mut sc.bin_sweep;
        if let Some(v) = s.quantity("first", Dimension::Time, 1.0)? {
            b.first = v;
        }
        if let Some(v) = s.quantity("step", Dimension::Time, 1.0)? {
            b.step = v;
        }
        if let Some(v) = s.quantity("last", Dimension::Time, 1.0)? {
            b.last = v;
        }
        if let Some(v) = s.quantity("width", Dimension::Time, 1.0)? {
            b.width = v;
        }
        s.finish()?;
    }
    if let Some(t) = root.table("tomography")? {
        let mut s = Section::new("tomography", t);
        let tm = &mut sc.tomography;
        if let Some(v) = s.integer("pairs")? {
            tm.pairs = u64::try_from(v).map_err(|_| HarnessError::Config("`tomography.pairs` must be positive".into()))?;
        }
        if let Some(v) = s.integer("settings")? {
            tm.settings = v as usize;
        }
        if let Some(v) = s.string("noise")? {
            tm.noise = match v {
                "none" => Noise::None,
                "poisson" => Noise::Poisson,
                other => return Err(HarnessError::Config(format!("unknown noise model `{other}`"))),
            };
        }
        s.finish()?;
    }
    root.finish()?;
    sc.validate()?;
    Ok(sc)
}

pub fn load_scenario(path: &Path, kind: Option<Kind>) -> Result<Scenario, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
    scenario_from_str(&text, kind, path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for k in Kind::ALL {
            Scenario::defaults(k).validate().unwrap();
        }
        let t = Kind::ConcurrenceSweep.default_temperatures();
        assert_eq!(t.first(), Some(&1.0));
        assert_eq!(t.last(), Some(&70.0));
        assert!(t.contains(&48.4));
    }

    #[test]
    fn sweep_bins() {
        let bins = BinSweep::default().bins().unwrap();
        assert_eq!(bins.len(), 8);
        assert!((bins[7].center - 1.05).abs() < 1e-12);
        assert_eq!(bins[0].lo(), 0.0);
    }

    #[test]
    fn full_config() {
        let text = r#"
            kind = "bin-sweep"
            temperatures = ["32.4 K", 40]
            seed = 3
            [params]
            fss = "1.5 ueV"
            [pulse]
            kind = "stark-gaussian"
            fwhm = "5 ps"
            s_max = "10 ueV"
            level = "X_V"
            [bin]
            center = "500 ps"
            width = "1 ns"
            [grid]
            dt = "1 ps"
            [bin_sweep]
            step = "100 ps"
            [tomography]
            pairs = 1000
            settings = 16
            noise = "none"
        "#;
        let sc = scenario_from_str(text, None, None).unwrap();
        assert_eq!(sc.kind, Kind::BinSweep);
        assert_eq!(sc.temperatures, vec![32.4, 40.0]);
        assert!((sc.params.fss - 1.5).abs() < 1e-12);
        assert_eq!(sc.pulse, PulseModel::StarkGaussian { fwhm: 5.0, s_max: 10.0, level: Level::XV });
        assert!((sc.bin.center - 0.5).abs() < 1e-12);
        assert!((sc.bin_sweep.step - 0.1).abs() < 1e-12);
        assert_eq!(sc.tomography.settings, 16);
        // the verb wins over the file
        let sc = scenario_from_str(text, Some(Kind::TomographyDemo), None).unwrap();
        assert_eq!(sc.kind, Kind::TomographyDemo);
    }

    #[test]
    fn unknown_keys_are_errors() {
        for text in [
            "kind = \"bin-sweep\"\ntemperature = [4]",
            "kind = \"bin-sweep\"\n[params]\ngamma_X = 1.0",
            "kind = \"bin-sweep\"\n[bin]\nwidht = \"2 ns\"",
            "kind = \"bin-sweep\"\n[grid]\nstep = \"1 ps\"",
            "kind = \"bin-sweep\"\n[extra]\na = 1",
        ] {
            let err = scenario_from_str(text, None, None).unwrap_err();
            assert!(matches!(err, HarnessError::Config(_)), "{text}: {err}");
        }
    }

    #[test]
    fn bad_values_are_errors() {
        for text in [
            "temperatures = [0]",
            "temperatures = [\"120 K\"]",
            "[params]\nfss = \"2 ns\"",
            "[bin]\nwidth = \"20 ns\"",
            "[pulse]\nkind = \"instantaneous\"",
            "[tomography]\nsettings = 20",
            "[grid]\ndt = \"1 meV\"",
        ] {
            assert!(scenario_from_str(text, Some(Kind::ConcurrenceSweep), None).is_err(), "{text}");
        }
        assert!(scenario_from_str("", None, None).is_err());
    }

    #[test]
    fn temperature_lists() {
        assert_eq!(parse_temperature_list("4.4, 12.4").unwrap(), vec![4.4, 12.4]);
        assert_eq!(parse_temperature_list("4.4 K,20K").unwrap(), vec![4.4, 20.0]);
        assert!(parse_temperature_list("4.4 meV").is_err());
    }
}
