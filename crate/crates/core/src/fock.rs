//! Bosonic Fock space for four optical modes.
//!
//! Two spatial locations times two polarization axes. Before the central
//! beamsplitter the locations are the input arms `a` and `b`; afterwards they
//! are the two detection stations. A [`StateVector`] carries the [`Stage`] it
//! lives in, and mode labels from the other stage are rejected.
//!
//! Basis states are stored as occupation vectors in the slot order
//! `(site 0, axis 0), (site 0, axis 1), (site 1, axis 0), (site 1, axis 1)`.
//! Every state holds at most two photons in total and at most two per mode.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amplitudes smaller than this are dropped.
pub const PRUNE_EPS: f64 = 1e-14;

/// Tolerance used for unitarity checks and algebraic identities.
pub const ALGEBRA_TOL: f64 = 1e-12;

/// Maximum occupation of a single mode, and of a whole basis state.
pub const MAX_PHOTONS: u8 = 2;

pub const NUM_MODES: usize = 4;

/// Which side of the central beamsplitter a state is expressed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    Arms,
    Stations,
}

impl Stage {
    fn name(self) -> &'static str {
        match self {
            Stage::Arms => "pre-beamsplitter",
            Stage::Stations => "station",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spatial {
    ArmA,
    ArmB,
    Station1,
    Station2,
}

impl Spatial {
    pub fn stage(self) -> Stage {
        match self {
            Spatial::ArmA | Spatial::ArmB => Stage::Arms,
            Spatial::Station1 | Spatial::Station2 => Stage::Stations,
        }
    }

    /// Site index, 0 or 1.
    pub fn site(self) -> usize {
        match self {
            Spatial::ArmA | Spatial::Station1 => 0,
            Spatial::ArmB | Spatial::Station2 => 1,
        }
    }
}

/// Polarization axis within the current frame of a site. In the initial frame
/// `X` is x̂ and `Y` is ŷ; after an analyzer rotation `X` is the axis parallel
/// to the analyzer and `Y` the perpendicular one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub const PARALLEL: Axis = Axis::X;
    pub const PERPENDICULAR: Axis = Axis::Y;

    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeId {
    pub spatial: Spatial,
    pub axis: Axis,
}

impl ModeId {
    pub const fn new(spatial: Spatial, axis: Axis) -> Self {
        ModeId { spatial, axis }
    }

    pub fn slot(self) -> usize {
        self.spatial.site() * 2 + self.axis.index()
    }
}

/// Occupation numbers for the four modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FockBasisState(pub [u8; NUM_MODES]);

impl FockBasisState {
    pub const VACUUM: FockBasisState = FockBasisState([0; NUM_MODES]);

    pub fn total(&self) -> u8 {
        self.0.iter().sum()
    }

    /// Photons at site 0 or 1, as `(axis X, axis Y)`.
    pub fn site(&self, site: usize) -> (u8, u8) {
        (self.0[2 * site], self.0[2 * site + 1])
    }

    fn check(&self) -> Result<()> {
        let total = self.total();
        for (slot, &count) in self.0.iter().enumerate() {
            if count > MAX_PHOTONS {
                return Err(Error::OccupancyOverflow { slot, count, total });
            }
        }
        if total > MAX_PHOTONS {
            let slot = self.0.iter().position(|&n| n > 0).unwrap_or(0);
            return Err(Error::OccupancyOverflow {
                slot,
                count: self.0[slot],
                total,
            });
        }
        Ok(())
    }

    /// Key grammar: `<site0>|<site1>`, each side either `0` or the
    /// concatenation of `<n>x` and `<n>y` for the non-empty axes, x first.
    pub fn key(&self) -> String {
        let side = |site: usize| {
            let (nx, ny) = self.site(site);
            let mut s = String::new();
            if nx > 0 {
                s.push_str(&format!("{nx}x"));
            }
            if ny > 0 {
                s.push_str(&format!("{ny}y"));
            }
            if s.is_empty() {
                s.push('0');
            }
            s
        };
        format!("{}|{}", side(0), side(1))
    }

    pub fn parse_key(key: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad occupation key {key:?}"));
        let (left, right) = key.split_once('|').ok_or_else(bad)?;
        let mut occ = [0u8; NUM_MODES];
        for (site, part) in [left, right].into_iter().enumerate() {
            if part == "0" {
                continue;
            }
            let mut rest = part;
            let mut seen = [false; 2];
            while !rest.is_empty() {
                let digits = rest.chars().take_while(|c| c.is_ascii_digit()).count();
                if digits == 0 || digits >= rest.len() {
                    return Err(bad());
                }
                let n: u8 = rest[..digits].parse().map_err(|_| bad())?;
                let axis = match &rest[digits..digits + 1] {
                    "x" => 0,
                    "y" => 1,
                    _ => return Err(bad()),
                };
                if n == 0 || seen[axis] || (axis == 0 && seen[1]) {
                    return Err(bad());
                }
                seen[axis] = true;
                occ[2 * site + axis] = n;
                rest = &rest[digits + 1..];
            }
            if !seen[0] && !seen[1] {
                return Err(bad());
            }
        }
        let state = FockBasisState(occ);
        state.check()?;
        Ok(state)
    }
}

impl fmt::Display for FockBasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// A 2x2 complex matrix acting on a pair of modes. Column `k` is the image of
/// the `k`-th creation operator: `a_k† -> m[0][k] b_0† + m[1][k] b_1†`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeUnitary(pub [[Complex64; 2]; 2]);

impl ModeUnitary {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        ModeUnitary([[one, zero], [zero, one]])
    }

    /// Real rotation: `X† -> cos X† + sin Y†`, `Y† -> -sin X† + cos Y†`.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        ModeUnitary([
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ])
    }

    /// Matrix product `self * rhs`; as a mode map, `rhs` acts first.
    pub fn mul(&self, rhs: &ModeUnitary) -> ModeUnitary {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        ModeUnitary(out)
    }

    pub fn adjoint(&self) -> ModeUnitary {
        let m = &self.0;
        ModeUnitary([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    /// Largest entry of `|U†U - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let id = ModeUnitary::identity();
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((p.0[i][j] - id.0[i][j]).norm());
            }
        }
        worst
    }
}

/// Sparse superposition of Fock basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    stage: Stage,
    terms: BTreeMap<FockBasisState, Complex64>,
}

impl StateVector {
    pub fn vacuum(stage: Stage) -> Self {
        Self::basis(stage, FockBasisState::VACUUM)
    }

    pub fn zero(stage: Stage) -> Self {
        StateVector {
            stage,
            terms: BTreeMap::new(),
        }
    }

    pub fn basis(stage: Stage, occupation: FockBasisState) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(occupation, Complex64::new(1.0, 0.0));
        StateVector { stage, terms }
    }

    /// Builds a state from explicit terms, summing repeated basis states.
    pub fn from_terms<I>(stage: Stage, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (FockBasisState, Complex64)>,
    {
        let mut out = StateVector::zero(stage);
        for (basis, amp) in terms {
            basis.check()?;
            *out.terms.entry(basis).or_default() += amp;
        }
        out.prune();
        Ok(out)
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FockBasisState, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn amplitude(&self, basis: &FockBasisState) -> Complex64 {
        self.terms.get(basis).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n < PRUNE_EPS {
            return Err(Error::ZeroNorm);
        }
        Ok(self.scale(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = StateVector {
            stage: self.stage,
            terms: self.terms.iter().map(|(k, v)| (*k, v * factor)).collect(),
        };
        out.prune();
        out
    }

    pub fn add(&self, other: &StateVector) -> Result<Self> {
        self.check_stage(other)?;
        let mut out = self.clone();
        for (k, v) in &other.terms {
            *out.terms.entry(*k).or_default() += v;
        }
        out.prune();
        Ok(out)
    }

    /// Keeps only the terms for which `keep` holds. Not renormalized.
    pub fn project<F>(&self, keep: F) -> Self
    where
        F: Fn(&FockBasisState) -> bool,
    {
        StateVector {
            stage: self.stage,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (*k, *v))
                .collect(),
        }
    }

    /// Multiplies each term by `phase(basis)`.
    pub fn map_amplitudes<F>(&self, factor: F) -> Self
    where
        F: Fn(&FockBasisState) -> Complex64,
    {
        let mut out = StateVector {
            stage: self.stage,
            terms: self.terms.iter().map(|(k, v)| (*k, v * factor(k))).collect(),
        };
        out.prune();
        out
    }

    fn prune(&mut self) {
        self.terms.retain(|_, v| v.norm() >= PRUNE_EPS);
    }

    fn check_stage(&self, other: &StateVector) -> Result<()> {
        if self.stage != other.stage {
            return Err(Error::ModeLabelMismatch(format!(
                "{} vs {}",
                self.stage.name(),
                other.stage.name()
            )));
        }
        Ok(())
    }

    fn slot_of(&self, mode: ModeId) -> Result<usize> {
        if mode.spatial.stage() != self.stage {
            return Err(Error::ModeLabelMismatch(format!(
                "{:?} used on a {} state",
                mode.spatial,
                self.stage.name()
            )));
        }
        Ok(mode.slot())
    }

    /// Applies `a†` for one mode: `|..n..> -> sqrt(n+1) |..n+1..>`.
    pub fn apply_creation(&self, mode: ModeId) -> Result<Self> {
        let slot = self.slot_of(mode)?;
        self.create_combination(&[(slot, Complex64::new(1.0, 0.0))])
    }

    /// Applies the linear combination `sum_k c_k a_{slot_k}†`.
    fn create_combination(&self, combo: &[(usize, Complex64)]) -> Result<Self> {
        let mut out: BTreeMap<FockBasisState, Complex64> = BTreeMap::new();
        for (basis, amp) in &self.terms {
            for &(slot, coeff) in combo {
                let mut next = *basis;
                next.0[slot] += 1;
                next.check()?;
                let factor = f64::from(next.0[slot]).sqrt();
                *out.entry(next).or_default() += amp * coeff * factor;
            }
        }
        let mut out = StateVector {
            stage: self.stage,
            terms: out,
        };
        out.prune();
        Ok(out)
    }

    /// Transforms the pair `(modes.0, modes.1)` by `u`, leaving other modes alone.
    ///
    /// Each basis term is rewritten as a product of creation operators on the
    /// vacuum, every creation operator of the pair is replaced by its image
    /// under `u`, and the product is re-expanded.
    pub fn apply_mode_unitary(&self, modes: (ModeId, ModeId), u: &ModeUnitary) -> Result<Self> {
        let defect = u.unitarity_defect();
        if defect > ALGEBRA_TOL {
            return Err(Error::NonUnitaryMatrix { deviation: defect });
        }
        let s0 = self.slot_of(modes.0)?;
        let s1 = self.slot_of(modes.1)?;
        if s0 == s1 {
            return Err(Error::ModeLabelMismatch(
                "mode pair must name two distinct modes".into(),
            ));
        }
        self.transform_slots(s0, s1, u)
    }

    pub(crate) fn transform_slots(&self, s0: usize, s1: usize, u: &ModeUnitary) -> Result<Self> {
        let m = &u.0;
        let one = Complex64::new(1.0, 0.0);
        let mut acc = StateVector::zero(self.stage);
        for (basis, amp) in &self.terms {
            let mut term = StateVector::vacuum(self.stage).scale(*amp);
            let mut norm = 1.0;
            for slot in 0..NUM_MODES {
                let n = basis.0[slot];
                if n == 0 {
                    continue;
                }
                let image: Vec<(usize, Complex64)> = if slot == s0 {
                    vec![(s0, m[0][0]), (s1, m[1][0])]
                } else if slot == s1 {
                    vec![(s0, m[0][1]), (s1, m[1][1])]
                } else {
                    vec![(slot, one)]
                };
                for k in 1..=n {
                    term = term.create_combination(&image)?;
                    norm *= f64::from(k);
                }
            }
            let term = term.scale(Complex64::new(1.0 / norm.sqrt(), 0.0));
            for (k, v) in term.terms {
                *acc.terms.entry(k).or_default() += v;
            }
        }
        acc.prune();
        Ok(acc)
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &StateVector) -> Result<Complex64> {
        self.check_stage(other)?;
        Ok(self
            .terms
            .iter()
            .filter_map(|(k, a)| other.terms.get(k).map(|b| a.conj() * b))
            .sum())
    }

    /// If `self = e^{i phi} other` within `tol` (max-abs over amplitudes),
    /// returns `phi`.
    pub fn global_phase_to(&self, other: &StateVector, tol: f64) -> Option<f64> {
        if self.stage != other.stage {
            return None;
        }
        let Some((key, reference)) = other
            .terms
            .iter()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        else {
            return if self.terms.values().all(|v| v.norm() <= tol) {
                Some(0.0)
            } else {
                None
            };
        };
        let ratio = self.amplitude(key) / reference;
        if ratio.norm() < PRUNE_EPS {
            return None;
        }
        let phase = ratio.arg();
        let rot = Complex64::from_polar(1.0, phase);
        let keys = self.terms.keys().chain(other.terms.keys());
        for k in keys {
            if (self.amplitude(k) - rot * other.amplitude(k)).norm() > tol {
                return None;
            }
        }
        Some(phase)
    }

    pub(crate) fn with_stage(mut self, stage: Stage) -> Self {
        self.stage = stage;
        self
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (k, v)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({:+.6}{:+.6}i)|{}>", v.re, v.im, k)?;
        }
        Ok(())
    }
}

/// Serialized as a JSON object from occupation keys to `[re, im]`.
/// Deserialization always yields a station-stage state.
impl Serialize for StateVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.terms.len()))?;
        for (k, v) in &self.terms {
            map.serialize_entry(&k.key(), &[v.re, v.im])?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw: BTreeMap<String, [f64; 2]> = BTreeMap::deserialize(deserializer)?;
        let mut terms = Vec::with_capacity(raw.len());
        for (k, [re, im]) in raw {
            let basis = FockBasisState::parse_key(&k).map_err(de::Error::custom)?;
            terms.push((basis, Complex64::new(re, im)));
        }
        StateVector::from_terms(Stage::Stations, terms).map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const M0: ModeId = ModeId::new(Spatial::Station1, Axis::X);
    const M1: ModeId = ModeId::new(Spatial::Station1, Axis::Y);

    fn occ(o: [u8; 4]) -> FockBasisState {
        FockBasisState(o)
    }

    fn symmetric_bs() -> ModeUnitary {
        ModeUnitary([
            [c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)],
            [c(0.0, FRAC_1_SQRT_2), c(FRAC_1_SQRT_2, 0.0)],
        ])
    }

    #[test]
    fn creation_on_vacuum() {
        let s = StateVector::vacuum(Stage::Stations).apply_creation(M0).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.amplitude(&occ([1, 0, 0, 0])) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn creation_bosonic_factor() {
        let s = StateVector::basis(Stage::Stations, occ([1, 0, 0, 0]))
            .apply_creation(M0)
            .unwrap();
        assert!((s.amplitude(&occ([2, 0, 0, 0])).re - 2f64.sqrt()).abs() < 1e-15);
        assert!((s.norm_sqr() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn creation_on_superposition() {
        let s = StateVector::from_terms(
            Stage::Stations,
            [
                (FockBasisState::VACUUM, c(FRAC_1_SQRT_2, 0.0)),
                (occ([1, 0, 0, 0]), c(FRAC_1_SQRT_2, 0.0)),
            ],
        )
        .unwrap();
        let out = s.apply_creation(M0).unwrap();
        assert!((out.amplitude(&occ([1, 0, 0, 0])).re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((out.amplitude(&occ([2, 0, 0, 0])).re - 1.0).abs() < 1e-15);
        assert!((out.norm_sqr() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn creation_overflow() {
        let s = StateVector::basis(Stage::Stations, occ([2, 0, 0, 0]));
        assert!(matches!(
            s.apply_creation(M0),
            Err(Error::OccupancyOverflow { .. })
        ));
        let s = StateVector::basis(Stage::Stations, occ([1, 0, 1, 0]));
        assert!(matches!(
            s.apply_creation(M1),
            Err(Error::OccupancyOverflow { .. })
        ));
    }

    #[test]
    fn creation_rejects_wrong_stage_label() {
        let s = StateVector::vacuum(Stage::Stations);
        let arm = ModeId::new(Spatial::ArmA, Axis::X);
        assert!(matches!(
            s.apply_creation(arm),
            Err(Error::ModeLabelMismatch(_))
        ));
    }

    #[test]
    fn identity_unitary_is_noop() {
        let s = StateVector::from_terms(
            Stage::Stations,
            [
                (occ([1, 1, 0, 0]), c(0.6, 0.0)),
                (occ([0, 1, 1, 0]), c(0.0, 0.8)),
            ],
        )
        .unwrap();
        let out = s.apply_mode_unitary((M0, M1), &ModeUnitary::identity()).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn symmetric_splitter_on_single_photon() {
        let s = StateVector::basis(Stage::Stations, occ([1, 0, 0, 0]));
        let out = s.apply_mode_unitary((M0, M1), &symmetric_bs()).unwrap();
        assert!((out.amplitude(&occ([1, 0, 0, 0])) - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-12);
        assert!((out.amplitude(&occ([0, 1, 0, 0])) - c(0.0, FRAC_1_SQRT_2)).norm() < 1e-12);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn symmetric_splitter_on_two_photons_same_input() {
        // (a†)^2/sqrt2 with a† -> (b0† + i b1†)/sqrt2 gives
        // 1/2|2,0> + i/sqrt2|1,1> - 1/2|0,2>.
        let s = StateVector::basis(Stage::Stations, occ([2, 0, 0, 0]));
        let out = s.apply_mode_unitary((M0, M1), &symmetric_bs()).unwrap();
        assert!((out.amplitude(&occ([2, 0, 0, 0])) - c(0.5, 0.0)).norm() < 1e-12);
        assert!((out.amplitude(&occ([1, 1, 0, 0])) - c(0.0, FRAC_1_SQRT_2)).norm() < 1e-12);
        assert!((out.amplitude(&occ([0, 2, 0, 0])) - c(-0.5, 0.0)).norm() < 1e-12);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hong_ou_mandel_dip() {
        // One photon in each input: the |1,1> coincidence term cancels.
        let s = StateVector::basis(Stage::Stations, occ([1, 1, 0, 0]));
        let out = s.apply_mode_unitary((M0, M1), &symmetric_bs()).unwrap();
        assert_eq!(out.amplitude(&occ([1, 1, 0, 0])), Complex64::default());
        assert!((out.amplitude(&occ([2, 0, 0, 0])) - c(0.0, FRAC_1_SQRT_2)).norm() < 1e-12);
    }

    #[test]
    fn non_unitary_rejected() {
        let mut u = ModeUnitary::identity();
        u.0[0][0] = c(1.1, 0.0);
        let s = StateVector::vacuum(Stage::Stations);
        assert!(matches!(
            s.apply_mode_unitary((M0, M1), &u),
            Err(Error::NonUnitaryMatrix { .. })
        ));
    }

    #[test]
    fn inner_product_stage_mismatch() {
        let a = StateVector::vacuum(Stage::Stations);
        let b = StateVector::vacuum(Stage::Arms);
        assert!(matches!(a.inner_product(&b), Err(Error::ModeLabelMismatch(_))));
    }

    #[test]
    fn inner_product_conjugate_linear() {
        let a = StateVector::basis(Stage::Stations, occ([1, 0, 1, 0])).scale(c(0.0, 1.0));
        let b = StateVector::basis(Stage::Stations, occ([1, 0, 1, 0]));
        assert!((a.inner_product(&b).unwrap() - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn global_phase_detection() {
        let a = StateVector::from_terms(
            Stage::Stations,
            [
                (occ([1, 0, 0, 1]), c(0.5, 0.0)),
                (occ([0, 1, 1, 0]), c(-0.5, 0.0)),
            ],
        )
        .unwrap();
        let b = a.scale(Complex64::from_polar(1.0, 0.7));
        let phi = b.global_phase_to(&a, 1e-12).unwrap();
        assert!((phi - 0.7).abs() < 1e-12);
        let flipped = a.map_amplitudes(|k| if k.0[0] == 1 { c(-1.0, 0.0) } else { c(1.0, 0.0) });
        assert!(flipped.global_phase_to(&a, 1e-12).is_none());
    }

    #[test]
    fn key_grammar() {
        assert_eq!(occ([1, 1, 0, 0]).key(), "1x1y|0");
        assert_eq!(occ([0, 1, 1, 0]).key(), "1y|1x");
        assert_eq!(occ([0, 0, 0, 2]).key(), "0|2y");
        assert_eq!(FockBasisState::VACUUM.key(), "0|0");
        for k in ["1x1y|0", "0|2y", "1y|1x", "0|0"] {
            assert_eq!(FockBasisState::parse_key(k).unwrap().key(), k);
        }
        for bad in ["", "1x", "1y1x|0", "0x|0", "3x|0", "1x1y|1x", "1z|0", "x|0", "1x|"] {
            assert!(FockBasisState::parse_key(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn json_shape() {
        let s = StateVector::from_terms(
            Stage::Stations,
            [
                (occ([1, 0, 0, 1]), c(0.5, 0.0)),
                (occ([1, 1, 0, 0]), c(0.0, 0.5)),
            ],
        )
        .unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"1x|1y":[0.5,0.0],"1x1y|0":[0.0,0.5]}"#);
        let back: StateVector = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
