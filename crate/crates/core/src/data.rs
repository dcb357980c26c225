//! Input time series: CSV ingestion, synthetic generation, window averaging
//! and derived series.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

/// Hours per synthetic year (52 weeks).
pub const HOURS_PER_YEAR: usize = 8736;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("no data rows")]
    NoDataRows,
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("row {row}, column `{column}`: capacity factor {value} outside [0, 1]")]
    CapacityFactorOutOfRange { row: usize, column: String, value: f64 },
    #[error("row {row}: negative demand {value}")]
    NegativeDemand { row: usize, value: f64 },
    #[error("series `{name}` has length {got}, expected {expected}")]
    LengthMismatch { name: String, got: usize, expected: usize },
    #[error("no capacity factor columns (expected `cf_<name>`)")]
    NoVre,
    #[error("invalid case parameter: {0}")]
    InvalidCase(String),
    #[error("partition does not tile the horizon: {0}")]
    BadPartition(String),
    #[error("years must be at least 1")]
    ZeroYears,
}

/// Technology parameters of one co-scheduling case. Powers in MW, energies
/// in MWh, costs in EUR/MWh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub thermal_capacity: f64,
    pub thermal_cost: f64,
    pub vre_capacity: f64,
    pub vre_cost: f64,
    pub storage_emin: f64,
    pub storage_emax: f64,
    pub storage_pc_max: f64,
    pub storage_pd_max: f64,
    pub eta_c: f64,
    pub eta_d: f64,
    pub discharge_cost: f64,
    pub nse_cost: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Solar,
    Wind,
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Solar => "solar",
            Profile::Wind => "wind",
        })
    }
}

impl FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "solar" => Ok(Profile::Solar),
            "wind" => Ok(Profile::Wind),
            other => Err(format!("unknown profile `{other}` (expected solar|wind)")),
        }
    }
}

/// The four storage/VRE pairings of the reference study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CasePreset {
    BessSolar,
    BessWind,
    PhsSolar,
    PhsWind,
}

impl CasePreset {
    pub const ALL: [CasePreset; 4] = [
        CasePreset::BessSolar,
        CasePreset::BessWind,
        CasePreset::PhsSolar,
        CasePreset::PhsWind,
    ];

    pub fn profile(self) -> Profile {
        match self {
            CasePreset::BessSolar | CasePreset::PhsSolar => Profile::Solar,
            CasePreset::BessWind | CasePreset::PhsWind => Profile::Wind,
        }
    }

    pub fn config(self) -> CaseConfig {
        let vre_cost = match self.profile() {
            Profile::Solar => 1.0,
            Profile::Wind => 2.5,
        };
        let (emax, eta, cd) = match self {
            CasePreset::BessSolar | CasePreset::BessWind => (400.0, 0.92, 1.5),
            CasePreset::PhsSolar | CasePreset::PhsWind => (1600.0, 0.9, 0.5),
        };
        CaseConfig {
            thermal_capacity: 480.0,
            thermal_cost: 60.0,
            vre_capacity: 1000.0,
            vre_cost,
            storage_emin: 0.0,
            storage_emax: emax,
            storage_pc_max: 100.0,
            storage_pd_max: 100.0,
            eta_c: eta,
            eta_d: eta,
            discharge_cost: cd,
            nse_cost: 5000.0,
        }
    }
}

impl fmt::Display for CasePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CasePreset::BessSolar => "bess-solar",
            CasePreset::BessWind => "bess-wind",
            CasePreset::PhsSolar => "phs-solar",
            CasePreset::PhsWind => "phs-wind",
        })
    }
}

impl FromStr for CasePreset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CasePreset::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| format!("unknown case `{s}` (expected bess-solar|bess-wind|phs-solar|phs-wind)"))
    }
}

impl CaseConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let nonneg = [
            ("thermal_capacity", self.thermal_capacity),
            ("thermal_cost", self.thermal_cost),
            ("vre_capacity", self.vre_capacity),
            ("vre_cost", self.vre_cost),
            ("storage_emin", self.storage_emin),
            ("storage_emax", self.storage_emax),
            ("storage_pc_max", self.storage_pc_max),
            ("storage_pd_max", self.storage_pd_max),
            ("discharge_cost", self.discharge_cost),
            ("nse_cost", self.nse_cost),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(DataError::InvalidCase(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        for (name, v) in [("eta_c", self.eta_c), ("eta_d", self.eta_d)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(DataError::InvalidCase(format!("{name} = {v} must lie in (0, 1]")));
            }
        }
        if self.storage_emin > self.storage_emax {
            return Err(DataError::InvalidCase("storage_emin exceeds storage_emax".into()));
        }
        Ok(())
    }
}

/// Hourly demand and capacity factors over a horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesFrame {
    pub demand: Vec<f64>,
    pub vre_names: Vec<String>,
    /// One series per VRE, each of horizon length.
    pub capacity_factor: Vec<Vec<f64>>,
}

impl SeriesFrame {
    pub fn new(demand: Vec<f64>, vre_names: Vec<String>, capacity_factor: Vec<Vec<f64>>) -> Result<Self, DataError> {
        let frame = SeriesFrame {
            demand,
            vre_names,
            capacity_factor,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn horizon_len(&self) -> usize {
        self.demand.len()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let n = self.demand.len();
        if n == 0 {
            return Err(DataError::NoDataRows);
        }
        if self.capacity_factor.is_empty() {
            return Err(DataError::NoVre);
        }
        if self.vre_names.len() != self.capacity_factor.len() {
            return Err(DataError::LengthMismatch {
                name: "vre_names".into(),
                got: self.vre_names.len(),
                expected: self.capacity_factor.len(),
            });
        }
        for (row, &d) in self.demand.iter().enumerate() {
            if !d.is_finite() || d < 0.0 {
                return Err(DataError::NegativeDemand { row: row + 1, value: d });
            }
        }
        for (name, cf) in self.vre_names.iter().zip(&self.capacity_factor) {
            if cf.len() != n {
                return Err(DataError::LengthMismatch {
                    name: name.clone(),
                    got: cf.len(),
                    expected: n,
                });
            }
            for (row, &v) in cf.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(DataError::CapacityFactorOutOfRange {
                        row: row + 1,
                        column: format!("cf_{name}"),
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }

    /// Contiguous sub-horizon.
    pub fn window(&self, hours: Range<usize>) -> SeriesFrame {
        SeriesFrame {
            demand: self.demand[hours.clone()].to_vec(),
            vre_names: self.vre_names.clone(),
            capacity_factor: self.capacity_factor.iter().map(|cf| cf[hours.clone()].to_vec()).collect(),
        }
    }

    pub fn scale_demand(&mut self, factor: f64) {
        self.demand.iter_mut().for_each(|d| *d *= factor);
    }

    /// Total VRE potential `sum_v vre_capacity * CF_v` at hour `h`.
    pub fn vre_potential(&self, h: usize, case: &CaseConfig) -> f64 {
        self.capacity_factor.iter().map(|cf| case.vre_capacity * cf[h]).sum()
    }
}

/// Column mapping for CSV ingestion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub demand_column: String,
    /// Explicit capacity factor columns; when empty every `cf_<name>` column
    /// is taken.
    #[serde(default)]
    pub cf_columns: Vec<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            demand_column: "demand_mw".into(),
            cf_columns: Vec::new(),
        }
    }
}

/// Reads a series CSV. Row numbers in errors count data rows from 1.
pub fn load_series(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SeriesFrame, DataError> {
    let file = std::fs::File::open(path)?;
    read_series(file, schema)
}

pub fn read_series(reader: impl std::io::Read, schema: &CsvSchema) -> Result<SeriesFrame, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let demand_idx = find(&schema.demand_column)?;
    let cf_cols: Vec<String> = if schema.cf_columns.is_empty() {
        headers.iter().filter(|h| h.starts_with("cf_")).map(str::to_string).collect()
    } else {
        schema.cf_columns.clone()
    };
    if cf_cols.is_empty() {
        return Err(DataError::NoVre);
    }
    let cf_idx = cf_cols.iter().map(|c| find(c)).collect::<Result<Vec<_>, _>>()?;

    let mut demand = Vec::new();
    let mut cfs: Vec<Vec<f64>> = vec![Vec::new(); cf_cols.len()];
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let row = k + 1;
        let parse = |idx: usize, column: &str| -> Result<f64, DataError> {
            let raw = record.get(idx).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::NonNumeric {
                    row,
                    column: column.to_string(),
                    value: raw.to_string(),
                })
        };
        let d = parse(demand_idx, &schema.demand_column)?;
        if d < 0.0 {
            return Err(DataError::NegativeDemand { row, value: d });
        }
        demand.push(d);
        for ((idx, name), out) in cf_idx.iter().zip(&cf_cols).zip(cfs.iter_mut()) {
            let v = parse(*idx, name)?;
            if !(0.0..=1.0).contains(&v) {
                return Err(DataError::CapacityFactorOutOfRange {
                    row,
                    column: name.clone(),
                    value: v,
                });
            }
            out.push(v);
        }
    }
    if demand.is_empty() {
        return Err(DataError::NoDataRows);
    }
    let names = cf_cols
        .iter()
        .map(|c| c.strip_prefix("cf_").unwrap_or(c).to_string())
        .collect();
    SeriesFrame::new(demand, names, cfs)
}

pub fn write_series(frame: &SeriesFrame, writer: impl std::io::Write) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["hour".to_string(), "demand_mw".to_string()];
    header.extend(frame.vre_names.iter().map(|n| format!("cf_{n}")));
    w.write_record(&header)?;
    for h in 0..frame.horizon_len() {
        let mut rec = vec![h.to_string(), frame.demand[h].to_string()];
        rec.extend(frame.capacity_factor.iter().map(|cf| cf[h].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Knobs of the synthetic generator. Demand is in MW before `demand_scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub base_mw: f64,
    pub daily_amplitude_mw: f64,
    pub evening_peak_mw: f64,
    pub seasonal_amplitude_mw: f64,
    pub noise_mw: f64,
    pub demand_scale: f64,
    /// Clear-sky solar peak capacity factor in winter and summer.
    pub solar_peak_winter: f64,
    pub solar_peak_summer: f64,
    /// Day-to-day persistence of cloudiness in [0, 1).
    pub cloud_persistence: f64,
    pub wind_mean: f64,
    /// Hour-to-hour persistence of the latent wind process in [0, 1).
    pub wind_persistence: f64,
    pub wind_seasonal: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            base_mw: 430.0,
            daily_amplitude_mw: 90.0,
            evening_peak_mw: 60.0,
            seasonal_amplitude_mw: 70.0,
            noise_mw: 12.0,
            demand_scale: 1.0,
            solar_peak_winter: 0.45,
            solar_peak_summer: 0.9,
            cloud_persistence: 0.6,
            wind_mean: 0.33,
            wind_persistence: 0.985,
            wind_seasonal: 0.08,
        }
    }
}

/// Deterministic synthetic demand and one VRE capacity factor series of
/// `years * 8736` hours.
pub fn synth_series(seed: u64, years: usize, profile: Profile) -> Result<SeriesFrame, DataError> {
    synth_series_with(&SynthParams::default(), seed, years, profile)
}

pub fn synth_series_with(p: &SynthParams, seed: u64, years: usize, profile: Profile) -> Result<SeriesFrame, DataError> {
    if years == 0 {
        return Err(DataError::ZeroYears);
    }
    let n = years * HOURS_PER_YEAR;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let year_days = (HOURS_PER_YEAR / 24) as f64;

    // demand: diurnal shape plus evening bump plus winter peak plus AR(1) noise
    let mut demand = Vec::with_capacity(n);
    let mut noise = 0.0;
    for h in 0..n {
        let hod = (h % 24) as f64;
        let day = (h / 24) as f64;
        let diurnal = -(2.0 * PI * (hod - 4.0) / 24.0).cos();
        let evening = (-(hod - 19.0).powi(2) / 4.0).exp();
        let seasonal = (2.0 * PI * day / year_days).cos();
        noise = 0.8 * noise + 0.6 * p.noise_mw * std_normal.sample(&mut rng);
        let d = p.base_mw + p.daily_amplitude_mw * diurnal + p.evening_peak_mw * evening + p.seasonal_amplitude_mw * seasonal + noise;
        demand.push((d * p.demand_scale).max(0.0));
    }

    let cf = match profile {
        Profile::Solar => {
            let mut cf = Vec::with_capacity(n);
            let mut cloud = 0.0f64;
            let mut clearness = 1.0;
            for h in 0..n {
                let hod = (h % 24) as f64 + 0.5;
                let day = (h / 24) as f64;
                if h % 24 == 0 {
                    cloud = p.cloud_persistence * cloud
                        + (1.0 - p.cloud_persistence * p.cloud_persistence).sqrt() * std_normal.sample(&mut rng);
                    // logistic map of the latent cloud state to [0.1, 1]
                    clearness = 0.1 + 0.9 / (1.0 + (-(1.2 - 1.6 * cloud)).exp());
                }
                let summer = 0.5 * (1.0 - (2.0 * PI * day / year_days).cos());
                let daylight = 8.5 + 7.0 * summer;
                let sunrise = 12.0 - daylight / 2.0;
                let elevation = if hod > sunrise && hod < sunrise + daylight {
                    (PI * (hod - sunrise) / daylight).sin()
                } else {
                    0.0
                };
                let peak = p.solar_peak_winter + (p.solar_peak_summer - p.solar_peak_winter) * summer;
                let jitter = 1.0 + 0.05 * std_normal.sample(&mut rng);
                cf.push((peak * clearness * elevation * jitter).clamp(0.0, 1.0));
            }
            cf
        }
        Profile::Wind => {
            let mut cf = Vec::with_capacity(n);
            let mut z: f64 = std_normal.sample(&mut rng);
            let phi = p.wind_persistence;
            let innov = (1.0 - phi * phi).sqrt();
            // calibrate the logistic offset so the mean lands near wind_mean
            let offset = (p.wind_mean / (1.0 - p.wind_mean)).ln();
            for h in 0..n {
                let day = (h / 24) as f64;
                z = phi * z + innov * std_normal.sample(&mut rng);
                let seasonal = p.wind_seasonal * (2.0 * PI * day / year_days).cos();
                let gust: f64 = rng.random_range(-0.02..0.02);
                let v = 1.0 / (1.0 + (-(offset + 1.6 * z)).exp()) + seasonal + gust;
                cf.push(v.clamp(0.0, 1.0));
            }
            cf
        }
    };
    SeriesFrame::new(demand, vec![profile.to_string()], vec![cf])
}

/// Weighted representative periods with averaged inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepPeriodSeries {
    /// Number of source hours represented by each period.
    pub weights: Vec<usize>,
    pub avg_demand: Vec<f64>,
    /// Per VRE, per period.
    pub avg_cf: Vec<Vec<f64>>,
}

impl RepPeriodSeries {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_hours(&self) -> usize {
        self.weights.iter().sum()
    }
}

/// Averages the frame over each member set of hours. Each entry of `periods`
/// lists the hour ranges represented by one period; the ranges need not be
/// adjacent.
pub fn average_periods<'a, I>(frame: &SeriesFrame, periods: I) -> RepPeriodSeries
where
    I: IntoIterator<Item = &'a [Range<usize>]>,
{
    let nv = frame.capacity_factor.len();
    let mut out = RepPeriodSeries {
        weights: Vec::new(),
        avg_demand: Vec::new(),
        avg_cf: vec![Vec::new(); nv],
    };
    for ranges in periods {
        let w: usize = ranges.iter().map(|r| r.len()).sum();
        let mean = |series: &[f64]| -> f64 {
            let s: f64 = ranges.iter().flat_map(|r| series[r.clone()].iter()).sum();
            s / w as f64
        };
        out.weights.push(w);
        out.avg_demand.push(mean(&frame.demand));
        for (v, cf) in frame.capacity_factor.iter().enumerate() {
            // keep the average inside [0, 1] despite rounding
            out.avg_cf[v].push(mean(cf).clamp(0.0, 1.0));
        }
    }
    out
}

/// Averages inputs over every representative period of a partition, in
/// partition order.
pub fn average_series(frame: &SeriesFrame, partition: &crate::tsa::Partition) -> Result<RepPeriodSeries, DataError> {
    partition
        .validate(frame.horizon_len())
        .map_err(|e| DataError::BadPartition(e.to_string()))?;
    let periods = partition.submodels.iter().flat_map(|s| s.periods.iter());
    Ok(average_periods(frame, periods.map(|p| p.hours.as_slice())))
}

/// Expands representative averages back onto the hours they stand for.
pub fn expand_series(reps: &RepPeriodSeries, partition: &crate::tsa::Partition, template: &SeriesFrame) -> SeriesFrame {
    let mut out = template.clone();
    let periods = partition.submodels.iter().flat_map(|s| s.periods.iter());
    for (k, period) in periods.enumerate() {
        for r in &period.hours {
            for h in r.clone() {
                out.demand[h] = reps.avg_demand[k];
                for (v, cf) in out.capacity_factor.iter_mut().enumerate() {
                    cf[h] = reps.avg_cf[v][k];
                }
            }
        }
    }
    out
}

/// `max(0, D_r - sum_v vre_capacity * CF_{r,v})` per hour.
pub fn net_demand(frame: &SeriesFrame, case: &CaseConfig) -> Vec<f64> {
    (0..frame.horizon_len())
        .map(|h| (frame.demand[h] - frame.vre_potential(h, case)).max(0.0))
        .collect()
}
