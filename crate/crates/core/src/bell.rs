//! CHSH evaluation with the unfavorable and vacuum events kept in the data.
//!
//! Each station assigns `-1` to outcome 1 (one photon, perpendicular port) and
//! `+1` to every other outcome, including "no photon" and all two-photon
//! outcomes. The same assignment as an operator is `A = 1 - 2Π⊥`, with `Π⊥`
//! the projector onto one photon polarized perpendicular to the analyzer.
//!
//! Correlators are computed two ways: by contracting outcome tables
//! ([`chsh_from_tables`]) and by applying the operators to the state in Fock
//! space ([`chsh_operator_expectation`]). The two must agree.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Spatial, StateVector};
use crate::measurement::{
    block_of, joint_distribution, rotate_station_frame, Block, JointDistribution, OutcomeClass, PolarizerAngle,
};

/// Signs of the four correlators in the CHSH sum.
pub const CHSH_SIGNS: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

/// Local bound of the CHSH sum.
pub const CHSH_LOCAL_BOUND: f64 = 2.0;

const SETTINGS_TOL: f64 = 1e-12;

pub fn value_assignment(outcome: OutcomeClass) -> f64 {
    if outcome == OutcomeClass::Minus {
        -1.0
    } else {
        1.0
    }
}

/// Analyzer angles `(xi, xi', eta, eta')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct ChshSettings {
    pub xi: PolarizerAngle,
    pub xi_prime: PolarizerAngle,
    pub eta: PolarizerAngle,
    pub eta_prime: PolarizerAngle,
}

impl ChshSettings {
    pub fn from_radians(r: [f64; 4]) -> Self {
        ChshSettings {
            xi: r[0].into(),
            xi_prime: r[1].into(),
            eta: r[2].into(),
            eta_prime: r[3].into(),
        }
    }

    /// `(0, π/4, 5π/8, 3π/8)`, one of the optimal choices for the experiment state.
    pub fn optimal() -> Self {
        Self::from_radians([0.0, PI / 4.0, 5.0 * PI / 8.0, 3.0 * PI / 8.0])
    }

    pub fn radians(&self) -> [f64; 4] {
        [
            self.xi.radians(),
            self.xi_prime.radians(),
            self.eta.radians(),
            self.eta_prime.radians(),
        ]
    }

    pub fn station1(&self) -> [PolarizerAngle; 2] {
        [self.xi, self.xi_prime]
    }

    pub fn station2(&self) -> [PolarizerAngle; 2] {
        [self.eta, self.eta_prime]
    }

    /// Setting pairs in the order `(xi,eta), (xi,eta'), (xi',eta), (xi',eta')`.
    /// Pair `k` uses station-1 setting `k / 2` and station-2 setting `k % 2`.
    pub fn pairs(&self) -> [(PolarizerAngle, PolarizerAngle); 4] {
        [
            (self.xi, self.eta),
            (self.xi, self.eta_prime),
            (self.xi_prime, self.eta),
            (self.xi_prime, self.eta_prime),
        ]
    }

    /// Recovers settings from four tables, checking that they agree.
    pub fn from_tables(tables: &[JointDistribution; 4]) -> Result<Self> {
        let check = |a: PolarizerAngle, b: PolarizerAngle, what: &str| {
            if a.same_axis(b, SETTINGS_TOL) {
                Ok(())
            } else {
                Err(Error::InconsistentSettings(format!(
                    "{what}: {} vs {}",
                    a.radians(),
                    b.radians()
                )))
            }
        };
        check(tables[0].xi, tables[1].xi, "xi")?;
        check(tables[2].xi, tables[3].xi, "xi'")?;
        check(tables[0].eta, tables[2].eta, "eta")?;
        check(tables[1].eta, tables[3].eta, "eta'")?;
        Ok(ChshSettings {
            xi: tables[0].xi,
            xi_prime: tables[2].xi,
            eta: tables[0].eta,
            eta_prime: tables[1].eta,
        })
    }
}

impl From<[f64; 4]> for ChshSettings {
    fn from(r: [f64; 4]) -> Self {
        ChshSettings::from_radians(r)
    }
}

impl From<ChshSettings> for [f64; 4] {
    fn from(s: ChshSettings) -> Self {
        s.radians()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    pub total: f64,
    /// CHSH sum of the correlators conditioned on one photon per station.
    pub favorable_part: f64,
    /// CHSH sum of the correlators conditioned on the complement (both
    /// photons at one station, or vacuum).
    pub unfavorable_part: f64,
    /// Probability of one photon per station (averaged over the four pairs).
    pub favorable_weight: f64,
    pub correlators: [f64; 4],
    pub settings_rad: [f64; 4],
}

/// `Σ a_i b_j P(i, j)`.
pub fn correlator(dist: &JointDistribution) -> f64 {
    dist.cells()
        .map(|(i, j, p)| value_assignment(i) * value_assignment(j) * p)
        .sum()
}

/// Correlator restricted to the favorable or the remaining cells, and the
/// weight of that region.
fn conditional_correlator(dist: &JointDistribution, favorable: bool) -> (f64, f64) {
    let mut weight = 0.0;
    let mut sum = 0.0;
    for (i, j, p) in dist.cells() {
        if (block_of(i, j) == Block::Favorable) == favorable {
            weight += p;
            sum += value_assignment(i) * value_assignment(j) * p;
        }
    }
    if weight < 1e-14 {
        (0.0, 0.0)
    } else {
        (sum / weight, weight)
    }
}

pub fn chsh_tables(state: &StateVector, settings: &ChshSettings) -> Result<[JointDistribution; 4]> {
    let pairs = settings.pairs();
    let mut out = [JointDistribution::vacuum(0.0.into(), 0.0.into()); 4];
    for (slot, (xi, eta)) in out.iter_mut().zip(pairs) {
        *slot = joint_distribution(state, xi, eta)?;
    }
    Ok(out)
}

pub fn chsh_from_tables(tables: &[JointDistribution; 4]) -> Result<ChshResult> {
    let settings = ChshSettings::from_tables(tables)?;
    let mut correlators = [0.0; 4];
    let mut total = 0.0;
    let mut favorable_part = 0.0;
    let mut unfavorable_part = 0.0;
    let mut favorable_weight = 0.0;
    for (k, t) in tables.iter().enumerate() {
        correlators[k] = correlator(t);
        total += CHSH_SIGNS[k] * correlators[k];
        let (fav, w) = conditional_correlator(t, true);
        let (rest, _) = conditional_correlator(t, false);
        favorable_part += CHSH_SIGNS[k] * fav;
        unfavorable_part += CHSH_SIGNS[k] * rest;
        favorable_weight += w / 4.0;
    }
    Ok(ChshResult {
        total,
        favorable_part,
        unfavorable_part,
        favorable_weight,
        correlators,
        settings_rad: settings.radians(),
    })
}

/// `A|ψ>` for the analyzer at `angle` on `station`: rotate into the analyzer
/// frame, flip the sign of "one photon, perpendicular port", rotate back.
pub fn apply_observable(state: &StateVector, station: Spatial, angle: PolarizerAngle) -> Result<StateVector> {
    let site = station.site();
    let rotated = rotate_station_frame(state, station, angle.radians())?;
    let flipped = rotated.map_amplitudes(|k| {
        if k.site(site) == (0, 1) {
            Complex64::new(-1.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    });
    rotate_station_frame(&flipped, station, -angle.radians())
}

/// `<ψ|A(xi) B(eta)|ψ>` by operator application.
pub fn operator_correlator(state: &StateVector, xi: PolarizerAngle, eta: PolarizerAngle) -> Result<f64> {
    let b = apply_observable(state, Spatial::Station2, eta)?;
    let ab = apply_observable(&b, Spatial::Station1, xi)?;
    Ok(state.inner_product(&ab)?.re)
}

fn operator_correlators(state: &StateVector, settings: &ChshSettings) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (slot, (xi, eta)) in out.iter_mut().zip(settings.pairs()) {
        *slot = operator_correlator(state, xi, eta)?;
    }
    Ok(out)
}

fn chsh_sum(correlators: &[f64; 4]) -> f64 {
    correlators.iter().zip(CHSH_SIGNS).map(|(e, s)| e * s).sum()
}

pub fn chsh_operator_expectation(state: &StateVector, settings: &ChshSettings) -> Result<f64> {
    Ok(chsh_sum(&operator_correlators(state, settings)?))
}

fn is_favorable(k: &crate::fock::FockBasisState) -> bool {
    let (a, b) = k.site(0);
    let (c, d) = k.site(1);
    a + b == 1 && c + d == 1
}

/// Splits the expectation over the one-photon-per-station subspace and its
/// complement. The observables do not connect the two, so
/// `total = w·favorable_part + (1 - w)·unfavorable_part` exactly.
pub fn chsh_decomposition(state: &StateVector, settings: &ChshSettings) -> Result<ChshResult> {
    let correlators = operator_correlators(state, settings)?;
    let favorable = state.project(is_favorable);
    let rest = state.project(|k| !is_favorable(k));
    let w = favorable.norm_sqr() / state.norm_sqr();
    let part = |s: StateVector| -> Result<f64> {
        if s.is_empty() {
            Ok(0.0)
        } else {
            chsh_operator_expectation(&s.normalize()?, settings)
        }
    };
    Ok(ChshResult {
        total: chsh_sum(&correlators),
        favorable_part: part(favorable)?,
        unfavorable_part: part(rest)?,
        favorable_weight: w,
        correlators,
        settings_rad: settings.radians(),
    })
}

/// CHSH value after mixing in a fraction `p_vacuum` of vacuum events, each of
/// which contributes `+1` to all four correlators.
pub fn diluted_chsh(p_vacuum: f64, undiluted: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_vacuum) {
        return Err(Error::OutOfRange(format!("p_vacuum = {p_vacuum} not in [0, 1]")));
    }
    Ok(CHSH_LOCAL_BOUND * p_vacuum + (1.0 - p_vacuum) * undiluted)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizedSettings {
    #[serde(rename = "settings_rad")]
    pub settings: ChshSettings,
    pub value: f64,
}

/// Coarse grid points per angle over `[0, π)`.
pub const GRID_STEPS: usize = 72;

const REFINE_TOL: f64 = 1e-7;
const MAX_SWEEPS: usize = 60;

/// Maximizes the (signed) CHSH sum over the four analyzer angles.
///
/// A grid with step π/72 is searched exhaustively, using that the sum
/// separates as `max_c [E(a,c)+E(b,c)] + max_d [E(a,d)-E(b,d)]` for fixed
/// station-1 angles `(a, b)`. Ties keep the lexicographically first grid
/// point. The best grid point is then refined by coordinate-wise
/// golden-section search until no angle moves by more than 1e-6.
pub fn optimize_angles(state: &StateVector) -> Result<OptimizedSettings> {
    let step = PI / GRID_STEPS as f64;
    let angle = |k: usize| PolarizerAngle::new(k as f64 * step);
    let mut grid = vec![[0.0f64; GRID_STEPS]; GRID_STEPS];
    for (a, row) in grid.iter_mut().enumerate() {
        for (c, e) in row.iter_mut().enumerate() {
            *e = correlator(&joint_distribution(state, angle(a), angle(c))?);
        }
    }

    let mut best = (f64::NEG_INFINITY, [0usize; 4]);
    for a in 0..GRID_STEPS {
        for b in 0..GRID_STEPS {
            let mut best_c = (f64::NEG_INFINITY, 0);
            let mut best_d = (f64::NEG_INFINITY, 0);
            for (c, (ea, eb)) in grid[a].iter().zip(&grid[b]).enumerate() {
                let plus = ea + eb;
                let minus = ea - eb;
                if plus > best_c.0 + 1e-12 {
                    best_c = (plus, c);
                }
                if minus > best_d.0 + 1e-12 {
                    best_d = (minus, c);
                }
            }
            let v = best_c.0 + best_d.0;
            if v > best.0 + 1e-12 {
                best = (v, [a, b, best_c.1, best_d.1]);
            }
        }
    }

    let objective = |r: &[f64; 4]| -> Result<f64> {
        Ok(chsh_from_tables(&chsh_tables(state, &ChshSettings::from_radians(*r))?)?.total)
    };
    let mut x = best.1.map(|k| k as f64 * step);
    let mut value = objective(&x)?;
    for _ in 0..MAX_SWEEPS {
        let mut moved = 0.0f64;
        for coord in 0..4 {
            let centre = x[coord];
            let mut f = |t: f64| -> Result<f64> {
                let mut y = x;
                y[coord] = t;
                objective(&y)
            };
            let (t, v) = golden_section_max(&mut f, centre - step, centre + step, REFINE_TOL)?;
            if v > value {
                moved = moved.max((t - centre).abs());
                x[coord] = t;
                value = v;
            }
        }
        if moved < 1e-6 {
            break;
        }
    }
    let settings = ChshSettings::from_radians(x);
    Ok(OptimizedSettings {
        value: objective(&settings.radians())?,
        settings,
    })
}

fn golden_section_max<F>(f: &mut F, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        }
    }
    let mid = 0.5 * (lo + hi);
    let fm = f(mid)?;
    Ok((mid, fm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Stage;
    use crate::optics::{build_experiment_state, double_occupancy_component, singlet_component, vacuum_diluted_state};
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    #[test]
    fn value_assignment_has_one_negative_outcome() {
        let negatives: Vec<_> = OutcomeClass::ALL
            .into_iter()
            .filter(|o| value_assignment(*o) < 0.0)
            .collect();
        assert_eq!(negatives, vec![OutcomeClass::Minus]);
    }

    #[test]
    fn correlator_cases() {
        let vac = JointDistribution::vacuum(0.0.into(), 0.0.into());
        assert_eq!(correlator(&vac), 1.0);
        let s = build_experiment_state();
        let equal = joint_distribution(&s, 0.3.into(), 0.3.into()).unwrap();
        assert!(correlator(&equal).abs() < 1e-12);
        let offset = joint_distribution(&s, (0.3 + FRAC_PI_4).into(), 0.3.into()).unwrap();
        assert!((correlator(&offset) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn chsh_at_equal_settings_is_zero() {
        let s = build_experiment_state();
        let settings = ChshSettings::from_radians([0.4; 4]);
        let r = chsh_from_tables(&chsh_tables(&s, &settings).unwrap()).unwrap();
        assert!(r.total.abs() < 1e-12);
        let d = chsh_decomposition(&s, &settings).unwrap();
        assert!((d.unfavorable_part - 2.0).abs() < 1e-12);
        assert!((d.favorable_part + 2.0).abs() < 1e-12);
        assert!(d.total.abs() < 1e-12);
    }

    #[test]
    fn chsh_at_optimal_settings() {
        let s = build_experiment_state();
        let r = chsh_from_tables(&chsh_tables(&s, &ChshSettings::optimal()).unwrap()).unwrap();
        assert!((r.total - (1.0 + SQRT_2)).abs() < 1e-9);
        assert!((r.favorable_part - 2.0 * SQRT_2).abs() < 1e-9);
        assert!((r.unfavorable_part - 2.0).abs() < 1e-12);
        assert!((r.favorable_weight - 0.5).abs() < 1e-12);
    }

    #[test]
    fn chsh_vacuum_tables() {
        let vac = StateVector::vacuum(Stage::Stations);
        let r = chsh_from_tables(&chsh_tables(&vac, &ChshSettings::optimal()).unwrap()).unwrap();
        assert_eq!(r.total, 2.0);
        assert_eq!(r.favorable_weight, 0.0);
    }

    #[test]
    fn inconsistent_settings_rejected() {
        let s = build_experiment_state();
        let mut t = chsh_tables(&s, &ChshSettings::optimal()).unwrap();
        t[1].xi = 1.0.into();
        assert!(matches!(chsh_from_tables(&t), Err(Error::InconsistentSettings(_))));
    }

    #[test]
    fn operator_path_on_components() {
        let v = chsh_operator_expectation(&singlet_component(), &ChshSettings::optimal()).unwrap();
        assert!((v - 2.0 * SQRT_2).abs() < 1e-12);
        for r in [[0.0, 1.0, 2.0, 3.0], [0.2, 0.2, 2.9, 0.1]] {
            let v = chsh_operator_expectation(&double_occupancy_component(), &ChshSettings::from_radians(r)).unwrap();
            assert!((v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn operator_and_table_paths_agree() {
        let s = build_experiment_state();
        let settings = ChshSettings::from_radians([0.1, 2.3, 1.7, 3.0]);
        let a = chsh_operator_expectation(&s, &settings).unwrap();
        let b = chsh_from_tables(&chsh_tables(&s, &settings).unwrap()).unwrap().total;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn decomposition_with_half_vacuum() {
        let s = vacuum_diluted_state(0.5).unwrap();
        let d = chsh_decomposition(&s, &ChshSettings::optimal()).unwrap();
        assert!((d.total - (0.5 * 2.0 + 0.5 * (1.0 + SQRT_2))).abs() < 1e-12);
    }

    #[test]
    fn dilution_formula() {
        assert_eq!(diluted_chsh(0.0, 2.5).unwrap(), 2.5);
        assert_eq!(diluted_chsh(1.0, 1.0 + SQRT_2).unwrap(), 2.0);
        let v = diluted_chsh(0.99, 1.0 + SQRT_2).unwrap();
        assert!((v - (2.0 + 0.01 * (SQRT_2 - 1.0))).abs() < 1e-12);
        assert!((v - 2.0041).abs() < 1e-4);
        assert!(diluted_chsh(1.2, 2.0).is_err());
        assert!(diluted_chsh(-0.1, 2.0).is_err());
    }

    #[test]
    fn optimizer_on_singlet_and_vacuum() {
        let r = optimize_angles(&singlet_component()).unwrap();
        assert!((r.value - 2.0 * SQRT_2).abs() < 1e-6);
        let r = optimize_angles(&StateVector::vacuum(Stage::Stations)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        assert_eq!(r.settings.radians(), [0.0; 4]);
    }

    #[test]
    fn settings_json_is_array() {
        let json = serde_json::to_string(&ChshSettings::from_radians([0.0, 0.5, 1.0, 1.5])).unwrap();
        assert_eq!(json, "[0.0,0.5,1.0,1.5]");
    }
}
