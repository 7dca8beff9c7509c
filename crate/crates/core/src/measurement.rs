//! Polarizing-beamsplitter analyzers with photon-number-resolving detectors,
//! the six outcome classes, and joint outcome tables.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{ModeUnitary, Spatial, Stage, StateVector};

/// Probabilities below this are clamped to zero.
pub const PROB_EPS: f64 = 1e-14;

/// Analyzer axis in radians from x̂, reduced to `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct PolarizerAngle(f64);

impl PolarizerAngle {
    pub fn new(radians: f64) -> Self {
        let mut r = radians.rem_euclid(PI);
        // rem_euclid can round up to exactly PI for tiny negative inputs
        if r >= PI {
            r = 0.0;
        }
        PolarizerAngle(r)
    }

    pub fn from_degrees(deg: f64) -> Self {
        Self::new(deg.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// Equal as axes, i.e. modulo π, within `tol`.
    pub fn same_axis(self, other: PolarizerAngle, tol: f64) -> bool {
        let d = (self.0 - other.0).abs();
        d <= tol || (PI - d) <= tol
    }
}

impl From<PolarizerAngle> for f64 {
    fn from(a: PolarizerAngle) -> f64 {
        a.0
    }
}

impl From<f64> for PolarizerAngle {
    fn from(radians: f64) -> Self {
        PolarizerAngle::new(radians)
    }
}

/// Per-station outcome, by photon counts `(n+, n-)` in the two analyzer ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum OutcomeClass {
    /// (0, 1)
    Minus = 1,
    /// (1, 0)
    Plus = 2,
    /// (0, 0)
    Empty = 3,
    /// (1, 1)
    Split = 4,
    /// (2, 0)
    DoublePlus = 5,
    /// (0, 2)
    DoubleMinus = 6,
}

impl OutcomeClass {
    pub const ALL: [OutcomeClass; 6] = [
        OutcomeClass::Minus,
        OutcomeClass::Plus,
        OutcomeClass::Empty,
        OutcomeClass::Split,
        OutcomeClass::DoublePlus,
        OutcomeClass::DoubleMinus,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    /// Zero-based table index.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            1..=6 => Ok(Self::ALL[usize::from(code) - 1]),
            _ => Err(Error::Parse(format!("outcome code {code} not in 1..=6"))),
        }
    }

    pub fn from_index(index: usize) -> Self {
        Self::ALL[index]
    }

    /// `(n+, n-)` port counts.
    pub fn counts(self) -> (u8, u8) {
        match self {
            OutcomeClass::Minus => (0, 1),
            OutcomeClass::Plus => (1, 0),
            OutcomeClass::Empty => (0, 0),
            OutcomeClass::Split => (1, 1),
            OutcomeClass::DoublePlus => (2, 0),
            OutcomeClass::DoubleMinus => (0, 2),
        }
    }

    pub fn photons(self) -> u8 {
        let (p, m) = self.counts();
        p + m
    }
}

impl TryFrom<u8> for OutcomeClass {
    type Error = Error;
    fn try_from(code: u8) -> Result<Self> {
        OutcomeClass::from_code(code)
    }
}

impl From<OutcomeClass> for u8 {
    fn from(o: OutcomeClass) -> u8 {
        o.code()
    }
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

pub fn classify_occupation(n_plus: u8, n_minus: u8) -> Result<OutcomeClass> {
    Ok(match (n_plus, n_minus) {
        (0, 1) => OutcomeClass::Minus,
        (1, 0) => OutcomeClass::Plus,
        (0, 0) => OutcomeClass::Empty,
        (1, 1) => OutcomeClass::Split,
        (2, 0) => OutcomeClass::DoublePlus,
        (0, 2) => OutcomeClass::DoubleMinus,
        _ => return Err(Error::OutOfModel { n_plus, n_minus }),
    })
}

/// Where a joint outcome sits in the block structure of the two-photon
/// experiment. Anything not covered is `Illegal` for ideal detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Favorable,
    Unfavorable,
    Vacuum,
    Illegal,
}

pub fn block_of(i: OutcomeClass, j: OutcomeClass) -> Block {
    use OutcomeClass::*;
    match (i, j) {
        (Minus | Plus, Minus | Plus) => Block::Favorable,
        (Empty, Empty) => Block::Vacuum,
        (Split | DoublePlus | DoubleMinus, Empty) | (Empty, Split | DoublePlus | DoubleMinus) => {
            Block::Unfavorable
        }
        _ => Block::Illegal,
    }
}

/// Re-expresses a station's polarization modes in the frame of an analyzer
/// at `xi`: port X is parallel to `xi`, port Y perpendicular.
pub fn rotate_station_basis(state: &StateVector, station: Spatial, xi: PolarizerAngle) -> Result<StateVector> {
    rotate_station_frame(state, station, xi.radians())
}

/// Frame rotation by an unreduced angle. Rotating by π is `(-1)^n` on the
/// station, so operator constructions that rotate back need the raw angle.
pub(crate) fn rotate_station_frame(state: &StateVector, station: Spatial, radians: f64) -> Result<StateVector> {
    if station.stage() != Stage::Stations {
        return Err(Error::WrongStage {
            expected: "station",
            found: "pre-beamsplitter",
        });
    }
    if state.stage() != Stage::Stations {
        return Err(Error::WrongStage {
            expected: "station",
            found: "pre-beamsplitter",
        });
    }
    let site = station.site();
    // old x† = cos p† - sin q†, old y† = sin p† + cos q†
    state.transform_slots(2 * site, 2 * site + 1, &ModeUnitary::rotation(-radians))
}

/// 6x6 table `P(i, xi; j, eta)`, row `i` for station 1, column `j` for station 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    #[serde(rename = "xi_rad")]
    pub xi: PolarizerAngle,
    #[serde(rename = "eta_rad")]
    pub eta: PolarizerAngle,
    pub probs: [[f64; 6]; 6],
}

impl JointDistribution {
    pub fn new(xi: PolarizerAngle, eta: PolarizerAngle, probs: [[f64; 6]; 6]) -> Self {
        JointDistribution { xi, eta, probs }
    }

    pub fn vacuum(xi: PolarizerAngle, eta: PolarizerAngle) -> Self {
        let mut probs = [[0.0; 6]; 6];
        probs[2][2] = 1.0;
        JointDistribution { xi, eta, probs }
    }

    pub fn get(&self, i: OutcomeClass, j: OutcomeClass) -> f64 {
        self.probs[i.index()][j.index()]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().flatten().sum()
    }

    pub fn block_weight(&self, block: Block) -> f64 {
        self.cells()
            .filter(|(i, j, _)| block_of(*i, *j) == block)
            .map(|(_, _, p)| p)
            .sum()
    }

    pub fn cells(&self) -> impl Iterator<Item = (OutcomeClass, OutcomeClass, f64)> + '_ {
        OutcomeClass::ALL.into_iter().flat_map(move |i| {
            OutcomeClass::ALL
                .into_iter()
                .map(move |j| (i, j, self.probs[i.index()][j.index()]))
        })
    }

    /// Largest entry outside the legal blocks.
    pub fn illegal_mass(&self) -> f64 {
        self.cells()
            .filter(|(i, j, _)| block_of(*i, *j) == Block::Illegal)
            .map(|(_, _, p)| p)
            .fold(0.0, f64::max)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if let Some((i, j, p)) = self.cells().find(|(_, _, p)| !p.is_finite() || *p < 0.0) {
            return Err(Error::MalformedTables(format!("P({i},{j}) = {p}")));
        }
        let t = self.total();
        if (t - 1.0).abs() > tol {
            return Err(Error::MalformedTables(format!("entries sum to {t}")));
        }
        Ok(())
    }
}

/// Joint outcome table of a station-stage state for analyzers at `xi`, `eta`.
pub fn joint_distribution(state: &StateVector, xi: PolarizerAngle, eta: PolarizerAngle) -> Result<JointDistribution> {
    let rotated = rotate_station_basis(state, Spatial::Station1, xi)?;
    let rotated = rotate_station_basis(&rotated, Spatial::Station2, eta)?;
    let mut probs = [[0.0; 6]; 6];
    for (basis, amp) in rotated.terms() {
        let (p1, m1) = basis.site(0);
        let (p2, m2) = basis.site(1);
        let i = classify_occupation(p1, m1)?;
        let j = classify_occupation(p2, m2)?;
        probs[i.index()][j.index()] += amp.norm_sqr();
    }
    for p in probs.iter_mut().flatten() {
        if *p < PROB_EPS {
            *p = 0.0;
        }
    }
    Ok(JointDistribution { xi, eta, probs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Station {
    One,
    Two,
}

pub fn marginal(dist: &JointDistribution, station: Station) -> [f64; 6] {
    let mut out = [0.0; 6];
    for (i, row) in dist.probs.iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            match station {
                Station::One => out[i] += p,
                Station::Two => out[j] += p,
            }
        }
    }
    out
}
