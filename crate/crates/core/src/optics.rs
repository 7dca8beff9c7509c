//! State preparation: type-I source, 90° polarization rotator, symmetric
//! 50-50 beamsplitter, and the optional vacuum component.
//!
//! The rotator sits in arm `b`. Together with the symmetric beamsplitter
//! convention (`t = 1/√2`, `r = i/√2`, arm `a` transmitted to station 1) this
//! gives
//!
//! ```text
//! ½ ( |1x>₁|1y>₂ − |1y>₁|1x>₂ + i|1x,1y>₁|0>₂ + i|0>₁|1x,1y>₂ )
//! ```
//!
//! with exactly these signs. Putting the rotator in arm `a` instead flips the
//! sign of the one-photon-per-station block relative to the rest, which no
//! photon-counting statistic can see.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Axis, FockBasisState, ModeId, ModeUnitary, Spatial, Stage, StateVector, ALGEBRA_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamsplitterSpec {
    pub transmission: Complex64,
    pub reflection: Complex64,
}

impl Default for BeamsplitterSpec {
    fn default() -> Self {
        Self::symmetric()
    }
}

impl BeamsplitterSpec {
    pub fn symmetric() -> Self {
        BeamsplitterSpec {
            transmission: Complex64::new(FRAC_1_SQRT_2, 0.0),
            reflection: Complex64::new(0.0, FRAC_1_SQRT_2),
        }
    }

    pub fn new(transmission: Complex64, reflection: Complex64) -> Result<Self> {
        let spec = BeamsplitterSpec {
            transmission,
            reflection,
        };
        let defect = spec.matrix().unitarity_defect();
        if defect > ALGEBRA_TOL {
            return Err(Error::NonUnitaryMatrix { deviation: defect });
        }
        Ok(spec)
    }

    /// Arm `a` maps to `t·s1 + r·s2`, arm `b` to `r·s1 + t·s2`.
    pub fn matrix(&self) -> ModeUnitary {
        let (t, r) = (self.transmission, self.reflection);
        ModeUnitary([[t, r], [r, t]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveplateSpec {
    /// Rotation angle in radians.
    pub angle: f64,
}

impl Default for WaveplateSpec {
    fn default() -> Self {
        WaveplateSpec { angle: FRAC_PI_2 }
    }
}

impl WaveplateSpec {
    pub fn matrix(&self) -> ModeUnitary {
        ModeUnitary::rotation(self.angle)
    }
}

/// Vacuum and pair amplitudes of `alpha|0,0> + beta|Ψ>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairAmplitude {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl PairAmplitude {
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if (n - 1.0).abs() > ALGEBRA_TOL {
            return Err(Error::NonNormalizedPairAmplitude(n));
        }
        Ok(PairAmplitude { alpha, beta })
    }

    /// Real non-negative amplitudes from the pair probability `|beta|²`.
    pub fn from_pair_probability(p_pair: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_pair) {
            return Err(Error::OutOfRange(format!("p_pair = {p_pair} not in [0, 1]")));
        }
        Ok(PairAmplitude {
            alpha: Complex64::new((1.0 - p_pair).sqrt(), 0.0),
            beta: Complex64::new(p_pair.sqrt(), 0.0),
        })
    }

    pub fn pair_probability(&self) -> f64 {
        self.beta.norm_sqr()
    }
}

/// Both photons polarized along x̂, one in each arm.
pub fn source_state() -> StateVector {
    StateVector::basis(Stage::Arms, FockBasisState([1, 0, 1, 0]))
}

pub fn apply_waveplate(state: &StateVector, arm: Spatial, wp: &WaveplateSpec) -> Result<StateVector> {
    if arm.stage() != Stage::Arms || state.stage() != Stage::Arms {
        return Err(Error::WrongStage {
            expected: "pre-beamsplitter",
            found: "station",
        });
    }
    state.apply_mode_unitary(
        (ModeId::new(arm, Axis::X), ModeId::new(arm, Axis::Y)),
        &wp.matrix(),
    )
}

/// Mixes the two arms, polarization by polarization, and relabels the result
/// to the station stage.
pub fn apply_beamsplitter(state: &StateVector, bs: &BeamsplitterSpec) -> Result<StateVector> {
    if state.stage() != Stage::Arms {
        return Err(Error::WrongStage {
            expected: "pre-beamsplitter",
            found: "station",
        });
    }
    let u = bs.matrix();
    let mut out = state.clone();
    for axis in [Axis::X, Axis::Y] {
        out = out.apply_mode_unitary(
            (ModeId::new(Spatial::ArmA, axis), ModeId::new(Spatial::ArmB, axis)),
            &u,
        )?;
    }
    Ok(out.with_stage(Stage::Stations))
}

/// The two-photon state just before the detection stations.
pub fn build_experiment_state() -> StateVector {
    let rotated = apply_waveplate(&source_state(), Spatial::ArmB, &WaveplateSpec::default())
        .expect("source state is pre-beamsplitter");
    apply_beamsplitter(&rotated, &BeamsplitterSpec::symmetric())
        .expect("rotated source state is pre-beamsplitter")
}

/// `alpha|0,0> + beta|state>`.
pub fn attach_vacuum(state: &StateVector, pair: &PairAmplitude) -> Result<StateVector> {
    let pair = PairAmplitude::new(pair.alpha, pair.beta)?;
    let vacuum = StateVector::vacuum(state.stage()).scale(pair.alpha);
    vacuum.add(&state.scale(pair.beta))
}

/// Experiment state diluted by vacuum, with pair probability `p_pair`.
pub fn vacuum_diluted_state(p_pair: f64) -> Result<StateVector> {
    attach_vacuum(
        &build_experiment_state(),
        &PairAmplitude::from_pair_probability(p_pair)?,
    )
}

/// Normalized one-photon-per-station component: `(|1x>₁|1y>₂ − |1y>₁|1x>₂)/√2`.
pub fn singlet_component() -> StateVector {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    StateVector::from_terms(
        Stage::Stations,
        [
            (FockBasisState([1, 0, 0, 1]), h),
            (FockBasisState([0, 1, 1, 0]), -h),
        ],
    )
    .expect("valid basis states")
}

/// Normalized both-photons-at-one-station component:
/// `i(|1x,1y>₁|0>₂ + |0>₁|1x,1y>₂)/√2`.
pub fn double_occupancy_component() -> StateVector {
    let h = Complex64::new(0.0, FRAC_1_SQRT_2);
    StateVector::from_terms(
        Stage::Stations,
        [
            (FockBasisState([1, 1, 0, 0]), h),
            (FockBasisState([0, 0, 1, 1]), h),
        ],
    )
    .expect("valid basis states")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn source_is_normalized_and_orthogonal_to_vacuum() {
        let s = source_state();
        assert!((s.amplitude(&FockBasisState([1, 0, 1, 0])) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
        let vac = StateVector::vacuum(Stage::Arms);
        assert_eq!(vac.inner_product(&s).unwrap(), Complex64::default());
    }

    #[test]
    fn waveplate_quarter_turn_makes_y() {
        let photon = StateVector::basis(Stage::Arms, FockBasisState([1, 0, 0, 0]));
        let out = apply_waveplate(&photon, Spatial::ArmA, &WaveplateSpec::default()).unwrap();
        assert!((out.amplitude(&FockBasisState([0, 1, 0, 0])) - c(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn waveplate_zero_is_identity() {
        let s = source_state();
        let out = apply_waveplate(&s, Spatial::ArmA, &WaveplateSpec { angle: 0.0 }).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn waveplate_eighth_turn() {
        let photon = StateVector::basis(Stage::Arms, FockBasisState([1, 0, 0, 0]));
        let out = apply_waveplate(&photon, Spatial::ArmA, &WaveplateSpec { angle: FRAC_PI_4 }).unwrap();
        assert!((out.amplitude(&FockBasisState([1, 0, 0, 0])).re - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((out.amplitude(&FockBasisState([0, 1, 0, 0])).re - FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn waveplate_rejects_station_labels() {
        let s = source_state();
        assert!(matches!(
            apply_waveplate(&s, Spatial::Station1, &WaveplateSpec::default()),
            Err(Error::WrongStage { .. })
        ));
        let post = build_experiment_state();
        assert!(matches!(
            apply_waveplate(&post, Spatial::ArmA, &WaveplateSpec::default()),
            Err(Error::WrongStage { .. })
        ));
    }

    #[test]
    fn beamsplitter_single_photon() {
        let photon = StateVector::basis(Stage::Arms, FockBasisState([1, 0, 0, 0]));
        let out = apply_beamsplitter(&photon, &BeamsplitterSpec::symmetric()).unwrap();
        assert_eq!(out.stage(), Stage::Stations);
        assert!((out.amplitude(&FockBasisState([1, 0, 0, 0])) - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-12);
        assert!((out.amplitude(&FockBasisState([0, 0, 1, 0])) - c(0.0, FRAC_1_SQRT_2)).norm() < 1e-12);
    }

    #[test]
    fn beamsplitter_vacuum_and_stage_checks() {
        let out = apply_beamsplitter(&StateVector::vacuum(Stage::Arms), &BeamsplitterSpec::symmetric()).unwrap();
        assert_eq!(out, StateVector::vacuum(Stage::Stations));
        assert!(matches!(
            apply_beamsplitter(&out, &BeamsplitterSpec::symmetric()),
            Err(Error::WrongStage { .. })
        ));
    }

    #[test]
    fn beamsplitter_spec_validation() {
        let spec = BeamsplitterSpec::symmetric();
        let t = spec.transmission;
        let r = spec.reflection;
        assert!((t.norm_sqr() + r.norm_sqr() - 1.0).abs() < 1e-15);
        assert!((t * r.conj() + r * t.conj()).norm() < 1e-15);
        assert!(BeamsplitterSpec::new(c(0.8, 0.0), c(0.0, 0.6)).is_ok());
        assert!(BeamsplitterSpec::new(c(0.8, 0.0), c(0.6, 0.0)).is_err());
    }

    #[test]
    fn experiment_state_amplitudes() {
        let s = build_experiment_state();
        let expect = [
            ([1, 0, 0, 1], c(0.5, 0.0)),
            ([0, 1, 1, 0], c(-0.5, 0.0)),
            ([1, 1, 0, 0], c(0.0, 0.5)),
            ([0, 0, 1, 1], c(0.0, 0.5)),
        ];
        assert_eq!(s.len(), 4);
        for (o, amp) in expect {
            assert!((s.amplitude(&FockBasisState(o)) - amp).norm() < 1e-12, "{o:?}");
        }
    }

    #[test]
    fn rotator_in_arm_a_flips_block_sign_only() {
        let rotated = apply_waveplate(&source_state(), Spatial::ArmA, &WaveplateSpec::default()).unwrap();
        let alt = apply_beamsplitter(&rotated, &BeamsplitterSpec::symmetric()).unwrap();
        let s = build_experiment_state();
        assert!(alt.global_phase_to(&s, 1e-12).is_none());
        let fixed = alt.map_amplitudes(|k| {
            if k.site(0).0 + k.site(0).1 == 1 {
                c(-1.0, 0.0)
            } else {
                c(1.0, 0.0)
            }
        });
        assert_eq!(fixed.global_phase_to(&s, 1e-12), Some(0.0));
    }

    #[test]
    fn components_reassemble_state() {
        let s = build_experiment_state();
        let psi1 = double_occupancy_component();
        let psi2 = singlet_component();
        let w1 = psi1.inner_product(&s).unwrap();
        let w2 = psi2.inner_product(&s).unwrap();
        assert!((w1 - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-12);
        assert!((w2 - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-12);
        assert_eq!(psi1.inner_product(&psi2).unwrap(), Complex64::default());
    }

    #[test]
    fn attach_vacuum_cases() {
        let s = build_experiment_state();
        let same = attach_vacuum(&s, &PairAmplitude::new(c(0.0, 0.0), c(1.0, 0.0)).unwrap()).unwrap();
        assert_eq!(same, s);
        let vac = attach_vacuum(&s, &PairAmplitude::new(c(1.0, 0.0), c(0.0, 0.0)).unwrap()).unwrap();
        assert_eq!(vac, StateVector::vacuum(Stage::Stations));
        let d = vacuum_diluted_state(0.3).unwrap();
        assert!((d.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(matches!(
            PairAmplitude::new(c(0.5, 0.0), c(0.5, 0.0)),
            Err(Error::NonNormalizedPairAmplitude(_))
        ));
        assert!(PairAmplitude::from_pair_probability(1.5).is_err());
    }
}
