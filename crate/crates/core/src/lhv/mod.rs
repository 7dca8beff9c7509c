//! Local-hidden-variable analysis of the full six-outcome pattern.
//!
//! With two settings per station and six outcomes, a local model is a
//! probability distribution over the 6⁴ = 1296 deterministic strategies
//! (each station's outcome fixed per setting). Deciding whether four tables
//! admit such a model is an LP feasibility problem with 144 cell equalities
//! plus normalization. When it is infeasible the phase-one dual gives a Bell
//! functional that every strategy keeps below its local bound while the
//! tables exceed it.
//!
//! The LP is only trusted as a search procedure: every certificate is checked
//! by exhaustive maximization over the strategies, and every model by
//! recomputing the tables it induces.

mod simplex;

use serde::{Deserialize, Serialize};

use crate::bell::{value_assignment, ChshSettings, CHSH_SIGNS};
use crate::error::{Error, Result};
use crate::measurement::{JointDistribution, OutcomeClass};
use simplex::{phase_one, PhaseOne};

pub const NUM_STRATEGIES: usize = 1296;
const NUM_CELLS: usize = 4 * 36;

/// Table validation tolerance on normalization.
pub const TABLE_SUM_TOL: f64 = 1e-6;
/// Phase-one residual above which the pattern counts as non-local.
pub const LP_FEASIBILITY_TOL: f64 = 1e-9;
/// Allowed per-cell error when a model rebuilds its target tables.
pub const RECONSTRUCTION_TOL: f64 = 1e-7;
/// Allowed disagreement between a stored and a recomputed local bound.
pub const BOUND_TOL: f64 = 1e-9;

/// Per-pair coefficient tensor, indexed `[pair][i][j]`.
pub type Coefficients = [[[f64; 6]; 6]; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DeterministicStrategy {
    /// Outcome at station 1 for `xi` and `xi'`.
    pub station1: [OutcomeClass; 2],
    /// Outcome at station 2 for `eta` and `eta'`.
    pub station2: [OutcomeClass; 2],
}

impl DeterministicStrategy {
    /// Canonical index: mixed radix 6 over `(s1(xi), s1(xi'), s2(eta), s2(eta'))`.
    pub fn index(&self) -> usize {
        let d = [
            self.station1[0].index(),
            self.station1[1].index(),
            self.station2[0].index(),
            self.station2[1].index(),
        ];
        ((d[0] * 6 + d[1]) * 6 + d[2]) * 6 + d[3]
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < NUM_STRATEGIES, "strategy index {index} out of range");
        let o = OutcomeClass::from_index;
        DeterministicStrategy {
            station1: [o(index / 216), o(index / 36 % 6)],
            station2: [o(index / 6 % 6), o(index % 6)],
        }
    }

    /// Outcome pair for setting pair `k` (see [`ChshSettings::pairs`]).
    pub fn outcomes(&self, pair: usize) -> (OutcomeClass, OutcomeClass) {
        (self.station1[pair / 2], self.station2[pair % 2])
    }

    pub fn value(&self, coefficients: &Coefficients) -> f64 {
        (0..4)
            .map(|k| {
                let (i, j) = self.outcomes(k);
                coefficients[k][i.index()][j.index()]
            })
            .sum()
    }
}

pub fn enumerate_strategies() -> Vec<DeterministicStrategy> {
    (0..NUM_STRATEGIES).map(DeterministicStrategy::from_index).collect()
}

/// Weights over the strategies, in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LhvModel {
    weights: Vec<f64>,
}

impl LhvModel {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() != NUM_STRATEGIES {
            return Err(Error::InvalidParameters(format!(
                "expected {NUM_STRATEGIES} weights, got {}",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidParameters(format!("negative or non-finite weight {w}")));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameters(format!("weights sum to {s}")));
        }
        Ok(LhvModel { weights })
    }

    pub fn point_mass(strategy: &DeterministicStrategy) -> Self {
        let mut weights = vec![0.0; NUM_STRATEGIES];
        weights[strategy.index()] = 1.0;
        LhvModel { weights }
    }

    pub fn uniform() -> Self {
        LhvModel {
            weights: vec![1.0 / NUM_STRATEGIES as f64; NUM_STRATEGIES],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl TryFrom<Vec<f64>> for LhvModel {
    type Error = Error;
    fn try_from(w: Vec<f64>) -> Result<Self> {
        LhvModel::new(w)
    }
}

impl From<LhvModel> for Vec<f64> {
    fn from(m: LhvModel) -> Self {
        m.weights
    }
}

/// Four tables with their settings; the interchange format read by
/// `lhv-check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSet {
    pub settings_rad: ChshSettings,
    pub tables: [JointDistribution; 4],
}

impl TableSet {
    pub fn new(tables: [JointDistribution; 4]) -> Result<Self> {
        Ok(TableSet {
            settings_rad: ChshSettings::from_tables(&tables)?,
            tables,
        })
    }
}

pub fn synthesize_tables(model: &LhvModel, settings: &ChshSettings) -> [JointDistribution; 4] {
    let pairs = settings.pairs();
    let mut probs = [[[0.0; 6]; 6]; 4];
    for (idx, &w) in model.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let s = DeterministicStrategy::from_index(idx);
        for (k, table) in probs.iter_mut().enumerate() {
            let (i, j) = s.outcomes(k);
            table[i.index()][j.index()] += w;
        }
    }
    std::array::from_fn(|k| JointDistribution::new(pairs[k].0, pairs[k].1, probs[k]))
}

/// A linear functional on the four tables with its local bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellCertificate {
    pub coefficients: Coefficients,
    pub local_bound: f64,
    pub quantum_value: f64,
}

impl BellCertificate {
    /// Computes the local bound by enumeration and the value on `tables`.
    pub fn from_coefficients(coefficients: Coefficients, tables: &[JointDistribution; 4]) -> Self {
        let (local_bound, _) = maximize_over_strategies(&coefficients);
        BellCertificate {
            quantum_value: contract(&coefficients, tables),
            coefficients,
            local_bound,
        }
    }

    pub fn gap(&self) -> f64 {
        self.quantum_value - self.local_bound
    }
}

/// CHSH with `a_1 = b_1 = -1` and `+1` elsewhere: `c[k][i][j] = ±a_i b_j`.
pub fn chsh_coefficients() -> Coefficients {
    let mut c = [[[0.0; 6]; 6]; 4];
    for (k, table) in c.iter_mut().enumerate() {
        for (i, row) in table.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = CHSH_SIGNS[k]
                    * value_assignment(OutcomeClass::from_index(i))
                    * value_assignment(OutcomeClass::from_index(j));
            }
        }
    }
    c
}

pub fn contract(coefficients: &Coefficients, tables: &[JointDistribution; 4]) -> f64 {
    let mut v = 0.0;
    for (c, t) in coefficients.iter().zip(tables) {
        for (crow, prow) in c.iter().zip(&t.probs) {
            for (a, p) in crow.iter().zip(prow) {
                v += a * p;
            }
        }
    }
    v
}

/// Largest functional value over all deterministic strategies, with the
/// lowest-index maximizer.
pub fn maximize_over_strategies(coefficients: &Coefficients) -> (f64, DeterministicStrategy) {
    let mut best = (f64::NEG_INFINITY, 0);
    for idx in 0..NUM_STRATEGIES {
        let v = DeterministicStrategy::from_index(idx).value(coefficients);
        if v > best.0 {
            best = (v, idx);
        }
    }
    (best.0, DeterministicStrategy::from_index(best.1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub local_bound: f64,
    pub quantum_value: f64,
    pub gap: f64,
    pub violated: bool,
    /// Canonical index of a strategy attaining the local bound.
    pub maximizing_strategy: usize,
}

/// Re-derives the local bound by enumeration and evaluates the functional on
/// `tables`. Fails if the stored bound is off by more than [`BOUND_TOL`].
pub fn verify_certificate(cert: &BellCertificate, tables: &[JointDistribution; 4]) -> Result<CertificateReport> {
    let (local_bound, arg) = maximize_over_strategies(&cert.coefficients);
    if (local_bound - cert.local_bound).abs() > BOUND_TOL {
        return Err(Error::BoundMismatch {
            stored: cert.local_bound,
            recomputed: local_bound,
        });
    }
    let quantum_value = contract(&cert.coefficients, tables);
    let gap = quantum_value - local_bound;
    Ok(CertificateReport {
        local_bound,
        quantum_value,
        gap,
        violated: gap > 0.0,
        maximizing_strategy: arg.index(),
    })
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum LhvVerdict {
    Feasible(LhvModel),
    Infeasible(BellCertificate),
}

impl LhvVerdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, LhvVerdict::Feasible(_))
    }
}

#[derive(Serialize, Deserialize)]
struct CertificateJson {
    coefficients: Coefficients,
    local_bound: f64,
    quantum_value: f64,
    gap: f64,
}

#[derive(Serialize, Deserialize)]
struct VerdictJson {
    feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    model: Option<LhvModel>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    certificate: Option<CertificateJson>,
}

/// `{feasible, model?, certificate?: {coefficients, local_bound, quantum_value, gap}}`.
impl Serialize for LhvVerdict {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let v = match self {
            LhvVerdict::Feasible(m) => VerdictJson {
                feasible: true,
                model: Some(m.clone()),
                certificate: None,
            },
            LhvVerdict::Infeasible(c) => VerdictJson {
                feasible: false,
                model: None,
                certificate: Some(CertificateJson {
                    coefficients: c.coefficients,
                    local_bound: c.local_bound,
                    quantum_value: c.quantum_value,
                    gap: c.gap(),
                }),
            },
        };
        v.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LhvVerdict {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = VerdictJson::deserialize(deserializer)?;
        match (v.feasible, v.model, v.certificate) {
            (true, Some(m), None) => Ok(LhvVerdict::Feasible(m)),
            (false, None, Some(c)) => Ok(LhvVerdict::Infeasible(BellCertificate {
                coefficients: c.coefficients,
                local_bound: c.local_bound,
                quantum_value: c.quantum_value,
            })),
            _ => Err(D::Error::custom("verdict must carry exactly one of model or certificate")),
        }
    }
}

#[allow(clippy::needless_range_loop)]
fn constraint_matrix() -> Vec<Vec<f64>> {
    let mut rows = vec![vec![0.0; NUM_STRATEGIES]; NUM_CELLS + 1];
    for idx in 0..NUM_STRATEGIES {
        let s = DeterministicStrategy::from_index(idx);
        for k in 0..4 {
            let (i, j) = s.outcomes(k);
            rows[k * 36 + i.index() * 6 + j.index()][idx] = 1.0;
        }
        rows[NUM_CELLS][idx] = 1.0;
    }
    rows
}

fn normalized_tables(tables: &[JointDistribution; 4]) -> Result<[JointDistribution; 4]> {
    let mut out = *tables;
    for t in out.iter_mut() {
        t.validate(TABLE_SUM_TOL)?;
        let s = t.total();
        for p in t.probs.iter_mut().flatten() {
            *p /= s;
        }
    }
    Ok(out)
}

fn max_reconstruction_error(model: &LhvModel, tables: &[JointDistribution; 4]) -> f64 {
    let settings = ChshSettings::from_tables(tables).unwrap_or_else(|_| ChshSettings::from_radians([0.0; 4]));
    let rebuilt = synthesize_tables(model, &settings);
    rebuilt
        .iter()
        .zip(tables)
        .flat_map(|(a, b)| {
            a.probs
                .iter()
                .flatten()
                .zip(b.probs.iter().flatten())
                .map(|(x, y)| (x - y).abs())
        })
        .fold(0.0, f64::max)
}

/// Checks whether some LHV model reproduces all four tables.
pub fn lhv_feasible(tables: &[JointDistribution; 4]) -> Result<LhvVerdict> {
    let tables = normalized_tables(tables)?;
    let a = constraint_matrix();
    let mut b = Vec::with_capacity(NUM_CELLS + 1);
    for t in &tables {
        b.extend(t.probs.iter().flatten().copied());
    }
    b.push(1.0);

    match phase_one(&a, &b, LP_FEASIBILITY_TOL) {
        PhaseOne::Feasible { x } => {
            let s: f64 = x.iter().sum();
            let model = LhvModel::new(x.iter().map(|w| w / s).collect())?;
            let err = max_reconstruction_error(&model, &tables);
            if err > RECONSTRUCTION_TOL {
                return Err(Error::LpVerification(format!(
                    "model reconstructs tables with error {err:e}"
                )));
            }
            Ok(LhvVerdict::Feasible(model))
        }
        PhaseOne::Infeasible { dual } => {
            let mut c = [[[0.0; 6]; 6]; 4];
            for (k, table) in c.iter_mut().enumerate() {
                for (i, row) in table.iter_mut().enumerate() {
                    for (j, x) in row.iter_mut().enumerate() {
                        *x = dual[k * 36 + i * 6 + j];
                    }
                }
            }
            let cert = BellCertificate::from_coefficients(normalize_coefficients(c), &tables);
            if cert.gap().is_nan() || cert.gap() <= 0.0 {
                return Err(Error::LpVerification(format!(
                    "LP reported infeasibility but the certificate gap is {:e}",
                    cert.gap()
                )));
            }
            Ok(LhvVerdict::Infeasible(cert))
        }
    }
}

/// Maps a functional that equals CHSH up to a positive factor and per-pair
/// constants onto the canonical CHSH coefficients; otherwise scales to unit
/// max-abs coefficient.
fn normalize_coefficients(c: Coefficients) -> Coefficients {
    let chsh = chsh_coefficients();
    let centred = |x: &Coefficients| -> Coefficients {
        let mut out = *x;
        for table in out.iter_mut() {
            let mean = table.iter().flatten().sum::<f64>() / 36.0;
            for v in table.iter_mut().flatten() {
                *v -= mean;
            }
        }
        out
    };
    let cc = centred(&c);
    let gc = centred(&chsh);
    let dot = |x: &Coefficients, y: &Coefficients| -> f64 {
        x.iter().flatten().flatten().zip(y.iter().flatten().flatten()).map(|(a, b)| a * b).sum()
    };
    let scale = dot(&cc, &gc) / dot(&gc, &gc);
    let max_abs = c.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale > 0.0 {
        let resid = cc
            .iter()
            .flatten()
            .flatten()
            .zip(gc.iter().flatten().flatten())
            .fold(0.0f64, |m, (a, b)| m.max((a - scale * b).abs()));
        if resid <= 1e-9 * max_abs.max(1.0) {
            return chsh;
        }
    }
    if max_abs == 0.0 {
        return c;
    }
    let mut out = c;
    for v in out.iter_mut().flatten().flatten() {
        *v /= max_abs;
    }
    out
}

/// Every cell `1/36`: uniformly random outcomes, a product distribution.
pub fn uniform_tables(settings: &ChshSettings) -> [JointDistribution; 4] {
    let pairs = settings.pairs();
    std::array::from_fn(|k| JointDistribution::new(pairs[k].0, pairs[k].1, [[1.0 / 36.0; 6]; 6]))
}

/// `(1 - eps) * a + eps * b`, cell by cell.
pub fn mix_tables(a: &[JointDistribution; 4], b: &[JointDistribution; 4], eps: f64) -> [JointDistribution; 4] {
    std::array::from_fn(|k| {
        let mut t = b[k];
        for (out, (x, y)) in t
            .probs
            .iter_mut()
            .flatten()
            .zip(a[k].probs.iter().flatten().zip(b[k].probs.iter().flatten()))
        {
            *out = (1.0 - eps) * x + eps * y;
        }
        t
    })
}

/// Bisects for the largest `eps` at which `(1 - eps)·uniform + eps·tables`
/// stays local. Returns `None` if `tables` themselves are local.
pub fn mixing_threshold(tables: &[JointDistribution; 4], tol: f64) -> Result<Option<f64>> {
    if lhv_feasible(tables)?.is_feasible() {
        return Ok(None);
    }
    let uniform = uniform_tables(&ChshSettings::from_tables(tables)?);
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if lhv_feasible(&mix_tables(&uniform, tables, mid))?.is_feasible() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}
