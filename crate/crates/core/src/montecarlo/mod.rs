//! Time-binned counting protocol for a source that does not herald pairs.
//!
//! The run of length `T` is cut into `N = T/τ` bins. Every bin is an event:
//! fresh analyzer settings are drawn, at most one pair is emitted, and the
//! outcome class at each station is recorded, including `(3, 3)` when nothing
//! arrives. Because outcome 3 carries the value `+1`, empty bins pull every
//! correlator towards `+1` and the CHSH sum towards 2, and a violation by the
//! pair events survives the dilution.
//!
//! Per-bin stream consumption, in order:
//! 1. setting index (top two bits of one draw);
//! 2. emission uniform, pair present if `u < p_pair`;
//! 3. outcome uniform, mapped through the cumulative row-major table of the
//!    pair state (drawn in every bin, used only when a pair is present);
//! 4. if `detector_efficiency < 1`: one uniform per arriving photon, station 1
//!    first, `+` port before `-` port;
//! 5. if `cascade_n` is set: one uniform per port still holding two photons.

pub mod cascade;
pub mod rng;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bell::{chsh_tables, value_assignment, ChshSettings, CHSH_SIGNS};
use crate::error::{Error, Result};
use crate::measurement::{block_of, classify_occupation, Block, OutcomeClass};
use crate::optics::build_experiment_state;
use rng::EventStream;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// `p_pair` above this triggers a warning.
pub const P_PAIR_WARN: f64 = 0.1;

fn default_efficiency() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub total_time_s: f64,
    pub bin_width_s: f64,
    pub p_pair: f64,
    pub settings_rad: ChshSettings,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub station_separation_m: Option<f64>,
    #[serde(default = "default_efficiency")]
    pub detector_efficiency: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cascade_n: Option<usize>,
}

impl RunConfig {
    /// Ideal detectors, no separation constraint.
    pub fn ideal(n_bins: u64, bin_width_s: f64, p_pair: f64, settings: ChshSettings, seed: u64) -> Self {
        RunConfig {
            total_time_s: n_bins as f64 * bin_width_s,
            bin_width_s,
            p_pair,
            settings_rad: settings,
            seed,
            station_separation_m: None,
            detector_efficiency: 1.0,
            cascade_n: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedRun {
    pub n_bins: u64,
    pub warnings: Vec<String>,
}

pub fn validate_config(config: &RunConfig) -> Result<ValidatedRun> {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let (t, tau) = (config.total_time_s, config.bin_width_s);
    let mut n_bins = 0;
    if !(tau > 0.0 && tau.is_finite()) {
        errors.push(format!("bin width tau = {tau} s must be positive"));
    }
    if !(t > 0.0 && t.is_finite()) {
        errors.push(format!("total time T = {t} s must be positive"));
    }
    if errors.is_empty() {
        let ratio = t / tau;
        let rounded = ratio.round();
        if (ratio - rounded).abs() > 1e-9 * rounded.max(1.0) || rounded < 1.0 {
            errors.push(format!("T/tau = {ratio} is not a positive integer (T = {t} s, tau = {tau} s)"));
        } else {
            n_bins = rounded as u64;
        }
    }
    if let Some(l) = config.station_separation_m {
        if !l.is_finite() || l <= 0.0 {
            errors.push(format!("station separation L = {l} m must be positive"));
        } else {
            let limit = l / SPEED_OF_LIGHT;
            if tau >= limit {
                errors.push(format!("tau = {tau:e} s is not below L/c = {limit:e} s (L = {l} m)"));
            }
        }
    }
    if !(0.0..=1.0).contains(&config.p_pair) {
        errors.push(format!("p_pair = {} not in [0, 1]", config.p_pair));
    } else if config.p_pair > P_PAIR_WARN {
        warnings.push(format!(
            "p_pair = {} > {P_PAIR_WARN}: multi-pair emission is not modelled",
            config.p_pair
        ));
    }
    let eff = config.detector_efficiency;
    if !(eff > 0.0 && eff <= 1.0) {
        errors.push(format!("detector efficiency {eff} not in (0, 1]"));
    }
    if let Some(n) = config.cascade_n {
        if n < 2 {
            errors.push(format!("cascade fan-out {n} < 2"));
        }
    }
    if errors.is_empty() {
        Ok(ValidatedRun { n_bins, warnings })
    } else {
        Err(Error::InvalidConfig(errors))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventRecord {
    /// 1-based; bin `n` covers `[(n-1)τ, nτ)`.
    pub bin: u64,
    /// `(station-1 setting, station-2 setting)`, 0 for unprimed and 1 for primed.
    pub setting_choice: (u8, u8),
    pub outcome: (OutcomeClass, OutcomeClass),
}

impl EventRecord {
    /// Index into [`ChshSettings::pairs`].
    pub fn pair_index(&self) -> usize {
        usize::from(self.setting_choice.0) * 2 + usize::from(self.setting_choice.1)
    }

    pub fn is_legal(&self) -> bool {
        block_of(self.outcome.0, self.outcome.1) != Block::Illegal
    }
}

fn lose_photons(o: OutcomeClass, efficiency: f64, rng: &mut EventStream) -> OutcomeClass {
    let (p, m) = o.counts();
    let keep = |n: u8, rng: &mut EventStream| (0..n).filter(|_| rng.uniform() < efficiency).count() as u8;
    let p = keep(p, rng);
    let m = keep(m, rng);
    classify_occupation(p, m).expect("losing photons stays in model")
}

fn cascade_read(o: OutcomeClass, fan_out: usize, rng: &mut EventStream) -> OutcomeClass {
    let (p, m) = o.counts();
    let read = |n: u8, rng: &mut EventStream| {
        if n == 2 && rng.uniform() < 1.0 / fan_out as f64 {
            1
        } else {
            n
        }
    };
    let p = read(p, rng);
    let m = read(m, rng);
    classify_occupation(p, m).expect("cascade readout stays in model")
}

pub fn run_experiment(config: &RunConfig) -> Result<Vec<EventRecord>> {
    let run = validate_config(config)?;
    let tables = chsh_tables(&build_experiment_state(), &config.settings_rad)?;
    let cumulative: Vec<[f64; 36]> = tables
        .iter()
        .map(|t| {
            let mut acc = 0.0;
            let mut out = [0.0; 36];
            for (c, p) in out.iter_mut().zip(t.probs.iter().flatten()) {
                acc += p;
                *c = acc;
            }
            out
        })
        .collect();
    let last_nonzero: Vec<usize> = tables
        .iter()
        .map(|t| {
            let flat: Vec<f64> = t.probs.iter().flatten().copied().collect();
            flat.iter().rposition(|&p| p > 0.0).unwrap_or(14)
        })
        .collect();

    let mut rng = EventStream::new(config.seed);
    let mut log = Vec::with_capacity(run.n_bins as usize);
    let empty = (OutcomeClass::Empty, OutcomeClass::Empty);
    for bin in 1..=run.n_bins {
        let k = rng.setting_index();
        let emitted = rng.uniform() < config.p_pair;
        let u = rng.uniform();
        let mut outcome = if emitted {
            let cell = cumulative[k]
                .iter()
                .position(|&c| u < c)
                .unwrap_or(last_nonzero[k]);
            (OutcomeClass::from_index(cell / 6), OutcomeClass::from_index(cell % 6))
        } else {
            empty
        };
        if outcome != empty && config.detector_efficiency < 1.0 {
            outcome.0 = lose_photons(outcome.0, config.detector_efficiency, &mut rng);
            outcome.1 = lose_photons(outcome.1, config.detector_efficiency, &mut rng);
        }
        if let Some(n) = config.cascade_n {
            outcome.0 = cascade_read(outcome.0, n, &mut rng);
            outcome.1 = cascade_read(outcome.1, n, &mut rng);
        }
        log.push(EventRecord {
            bin,
            setting_choice: ((k / 2) as u8, (k % 2) as u8),
            outcome,
        });
    }
    Ok(log)
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    bin: u64,
    setting1: u8,
    setting2: u8,
    outcome1: u8,
    outcome2: u8,
}

/// CSV with header `bin,setting1,setting2,outcome1,outcome2`.
pub fn write_event_log<W: Write>(log: &[EventRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in log {
        w.serialize(CsvRow {
            bin: r.bin,
            setting1: r.setting_choice.0,
            setting2: r.setting_choice.1,
            outcome1: r.outcome.0.code(),
            outcome2: r.outcome.1.code(),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_event_log<R: Read>(reader: R) -> Result<Vec<EventRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers != vec!["bin", "setting1", "setting2", "outcome1", "outcome2"] {
        return Err(Error::Parse(format!("unexpected event log header {headers:?}")));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize::<CsvRow>() {
        let row = row.map_err(|e| Error::Parse(e.to_string()))?;
        if row.setting1 > 1 || row.setting2 > 1 {
            return Err(Error::Parse(format!("bin {}: setting index must be 0 or 1", row.bin)));
        }
        out.push(EventRecord {
            bin: row.bin,
            setting_choice: (row.setting1, row.setting2),
            outcome: (
                OutcomeClass::from_code(row.outcome1)?,
                OutcomeClass::from_code(row.outcome2)?,
            ),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub settings_rad: ChshSettings,
    pub n_bins: u64,
    /// Bins per setting pair.
    pub pair_bins: [u64; 4],
    /// `counts[pair][i-1][j-1]`.
    pub counts: [[[u64; 6]; 6]; 4],
    /// Bins with no photon at either station.
    pub n0: u64,
    /// Empirical `P(3, 3)` per setting pair.
    pub p33: [f64; 4],
    pub correlators: [Estimate; 4],
    pub chsh: Estimate,
}

/// Empirical correlators. The product `a_i b_j` is `±1`, so each estimate is
/// a sample mean with plug-in standard error `sqrt((1 - Ê²)/n)`.
pub fn estimate_correlators(log: &[EventRecord], settings: &ChshSettings) -> Result<EstimateReport> {
    let mut counts = [[[0u64; 6]; 6]; 4];
    let mut pair_bins = [0u64; 4];
    let mut n0 = 0;
    for r in log {
        let k = r.pair_index();
        pair_bins[k] += 1;
        counts[k][r.outcome.0.index()][r.outcome.1.index()] += 1;
        if r.outcome == (OutcomeClass::Empty, OutcomeClass::Empty) {
            n0 += 1;
        }
    }
    if let Some(k) = pair_bins.iter().position(|&n| n == 0) {
        return Err(Error::EmptySettingPair(k));
    }
    let mut correlators = [Estimate { value: 0.0, stderr: 0.0 }; 4];
    let mut p33 = [0.0; 4];
    for k in 0..4 {
        let n = pair_bins[k] as f64;
        let mut sum = 0.0;
        for (i, row) in counts[k].iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                let ab = value_assignment(OutcomeClass::from_index(i)) * value_assignment(OutcomeClass::from_index(j));
                sum += ab * c as f64;
            }
        }
        let e = sum / n;
        correlators[k] = Estimate {
            value: e,
            stderr: ((1.0 - e * e).max(0.0) / n).sqrt(),
        };
        p33[k] = counts[k][2][2] as f64 / n;
    }
    let mut report = EstimateReport {
        settings_rad: *settings,
        n_bins: log.len() as u64,
        pair_bins,
        counts,
        n0,
        p33,
        correlators,
        chsh: Estimate { value: 0.0, stderr: 0.0 },
    };
    report.chsh = estimate_chsh(&report);
    Ok(report)
}

/// Signed sum of the four correlators; errors add in quadrature since the
/// setting pairs come from disjoint bins.
pub fn estimate_chsh(report: &EstimateReport) -> Estimate {
    let value = report
        .correlators
        .iter()
        .zip(CHSH_SIGNS)
        .map(|(e, s)| s * e.value)
        .sum();
    let stderr = report
        .correlators
        .iter()
        .map(|e| e.stderr * e.stderr)
        .sum::<f64>()
        .sqrt();
    Estimate { value, stderr }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> ChshSettings {
        ChshSettings::optimal()
    }

    #[test]
    fn validation_light_cone() {
        let mut c = RunConfig::ideal(1000, 10e-9, 0.01, settings(), 1);
        c.station_separation_m = Some(10.0);
        assert!(validate_config(&c).is_ok());
        c.station_separation_m = Some(1.0);
        match validate_config(&c) {
            Err(Error::InvalidConfig(msgs)) => assert!(msgs[0].contains("L/c"), "{msgs:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_bin_count() {
        let mut c = RunConfig::ideal(1, 10e-9, 0.01, settings(), 1);
        c.total_time_s = 1.0;
        assert_eq!(validate_config(&c).unwrap().n_bins, 100_000_000);
        c.total_time_s = 1.5e-8;
        assert!(validate_config(&c).is_err());
        c.total_time_s = 0.0;
        assert!(validate_config(&c).is_err());
    }

    #[test]
    fn validation_warnings_and_ranges() {
        let c = RunConfig::ideal(10, 1e-8, 0.2, settings(), 1);
        let v = validate_config(&c).unwrap();
        assert_eq!(v.warnings.len(), 1);
        let mut c = RunConfig::ideal(10, 1e-8, 1.2, settings(), 1);
        c.detector_efficiency = 0.0;
        c.cascade_n = Some(1);
        match validate_config(&c) {
            Err(Error::InvalidConfig(msgs)) => assert_eq!(msgs.len(), 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_pairs_means_all_vacuum() {
        let log = run_experiment(&RunConfig::ideal(5000, 1e-8, 0.0, settings(), 3)).unwrap();
        assert!(log.iter().all(|r| r.outcome == (OutcomeClass::Empty, OutcomeClass::Empty)));
        let report = estimate_correlators(&log, &settings()).unwrap();
        assert_eq!(report.n0, 5000);
        assert!(report.correlators.iter().all(|e| e.value == 1.0 && e.stderr == 0.0));
        assert_eq!(report.chsh.value, 2.0);
        assert_eq!(report.chsh.stderr, 0.0);
    }

    #[test]
    fn certain_pairs_at_equal_settings() {
        let s = ChshSettings::from_radians([0.0; 4]);
        let log = run_experiment(&RunConfig::ideal(40_000, 1e-8, 1.0, s, 9)).unwrap();
        use OutcomeClass::*;
        let allowed = [(Plus, Minus), (Minus, Plus), (Split, Empty), (Empty, Split)];
        let mut seen = [0u64; 4];
        for r in &log {
            let pos = allowed.iter().position(|o| *o == r.outcome).expect("outcome outside support");
            seen[pos] += 1;
        }
        // each 1/4; 5 sigma of a binomial with n = 40000
        let sigma = (40_000.0f64 * 0.25 * 0.75).sqrt();
        for c in seen {
            assert!((c as f64 - 10_000.0).abs() < 5.0 * sigma, "{seen:?}");
        }
        let report = estimate_correlators(&log, &s).unwrap();
        for e in report.correlators {
            assert!(e.value.abs() < 5.0 * e.stderr.max(1e-3));
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let c = RunConfig::ideal(20_000, 1e-8, 0.3, settings(), 77);
        assert_eq!(run_experiment(&c).unwrap(), run_experiment(&c).unwrap());
        let mut other = c.clone();
        other.seed = 78;
        assert_ne!(run_experiment(&c).unwrap(), run_experiment(&other).unwrap());
    }

    #[test]
    fn lossy_detectors_demote_outcomes() {
        let mut c = RunConfig::ideal(20_000, 1e-8, 1.0, settings(), 5);
        c.detector_efficiency = 0.5;
        let log = run_experiment(&c).unwrap();
        assert!(log.iter().any(|r| !r.is_legal()));
        let photons: u64 = log.iter().map(|r| u64::from(r.outcome.0.photons() + r.outcome.1.photons())).sum();
        let mean = photons as f64 / log.len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn cascade_readout_collapses_doubles() {
        let mut c = RunConfig::ideal(20_000, 1e-8, 1.0, ChshSettings::from_radians([std::f64::consts::FRAC_PI_4; 4]), 5);
        c.cascade_n = Some(2);
        let log = run_experiment(&c).unwrap();
        // doubles: P(5)+P(6) = 1/2 at a station that got both photons; half survive
        let doubles = log
            .iter()
            .filter(|r| matches!(r.outcome.0, OutcomeClass::DoublePlus | OutcomeClass::DoubleMinus))
            .count();
        let one_sided_single = log
            .iter()
            .filter(|r| r.outcome.1 == OutcomeClass::Empty && r.outcome.0.photons() == 1)
            .count();
        assert!(doubles > 0 && one_sided_single > 0);
        let ratio = doubles as f64 / one_sided_single as f64;
        assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn csv_round_trip_and_header() {
        let log = run_experiment(&RunConfig::ideal(300, 1e-8, 0.5, settings(), 2)).unwrap();
        let mut buf = Vec::new();
        write_event_log(&log, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("bin,setting1,setting2,outcome1,outcome2\n1,"));
        assert_eq!(read_event_log(buf.as_slice()).unwrap(), log);
        assert!(read_event_log("bin,a,b,c,d\n".as_bytes()).is_err());
        assert!(read_event_log("bin,setting1,setting2,outcome1,outcome2\n1,0,2,3,3\n".as_bytes()).is_err());
        assert!(read_event_log("bin,setting1,setting2,outcome1,outcome2\n1,0,1,7,3\n".as_bytes()).is_err());
    }

    #[test]
    fn empty_setting_pair_is_an_error() {
        let log = vec![EventRecord {
            bin: 1,
            setting_choice: (0, 0),
            outcome: (OutcomeClass::Empty, OutcomeClass::Empty),
        }];
        assert_eq!(estimate_correlators(&log, &settings()), Err(Error::EmptySettingPair(1)));
    }

    #[test]
    fn config_json_defaults() {
        let json = r#"{"total_time_s":1e-3,"bin_width_s":1e-8,"p_pair":0.01,
                       "settings_rad":[0,0.7853981633974483,1.9634954084936207,1.1780972450961724],"seed":4}"#;
        let c: RunConfig = serde_json::from_str(json).unwrap();
        assert_eq!(c.detector_efficiency, 1.0);
        assert_eq!(c.cascade_n, None);
        assert_eq!(validate_config(&c).unwrap().n_bins, 100_000);
    }
}
