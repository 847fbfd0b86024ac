//! Effective detector model for a linear-optics Bell analyzer fed by a local
//! BB84 photon.
//!
//! A relay's Bell measurement together with the user's photon acts, from the
//! network's point of view, like a single virtual detector watching the
//! incoming GHZ leg. This module computes that virtual detector's parameters
//! from the physical ones: the per-basis equivalent efficiencies and the
//! equivalent dark count.
//!
//! The click model behind the closed forms: the analyzer has four
//! single-photon detectors `D1H, D1V, D2H, D2V` behind a 50:50 beam splitter
//! and two polarizing beam splitters. A coincidence `{D1H,D1V}` or
//! `{D2H,D2V}` announces `psi+`; `{D1H,D2V}` or `{D1V,D2H}` announces
//! `psi-`; anything else is a failure. Equal Z-basis photons bunch into a
//! single detector and can only fake a success via a dark count; unequal
//! ones split and succeed when both click. In the X basis the two-photon
//! interference steers equal (unequal) inputs onto `psi+` (`psi-`) click
//! pairs, so the success probability is the two-click one in both cases.
//! An integration test reproduces each closed form with an independent
//! click-level sampler.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DetectorError {
    #[error("{name} = {value} is not a probability in [0, 1]")]
    NotProbability { name: &'static str, value: f64 },
    #[error("error-correction inefficiency f = {0} must be at least 1")]
    BadInefficiency(f64),
    #[error("fiber loss coefficient alpha = {0} dB/km must be non-negative")]
    BadLossCoefficient(f64),
}

/// Physical detector and channel parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Single-photon detection efficiency.
    pub eta_d: f64,
    /// Dark count probability per detector per gate.
    pub p_d: f64,
    /// Misalignment error probability of the optical system.
    pub e_d: f64,
    /// Error-correction inefficiency (>= 1).
    pub f: f64,
    /// Fiber loss coefficient in dB/km.
    pub alpha: f64,
}

impl DetectorParams {
    pub fn new(eta_d: f64, p_d: f64, e_d: f64, f: f64, alpha: f64) -> Result<Self, DetectorError> {
        let params = DetectorParams {
            eta_d,
            p_d,
            e_d,
            f,
            alpha,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        for (name, value) in [
            ("eta_d", self.eta_d),
            ("p_d", self.p_d),
            ("e_d", self.e_d),
        ] {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(DetectorError::NotProbability { name, value });
            }
        }
        if !(self.f >= 1.0) || !self.f.is_finite() {
            return Err(DetectorError::BadInefficiency(self.f));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(DetectorError::BadLossCoefficient(self.alpha));
        }
        Ok(())
    }
}

/// Reference parameter set used throughout the simulations: 40% detector
/// efficiency, 2% misalignment, 8e-8 dark counts, f = 1.16, 0.2 dB/km fiber.
impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            eta_d: 0.40,
            p_d: 8e-8,
            e_d: 0.02,
            f: 1.16,
            alpha: 0.2,
        }
    }
}

/// Parameters of the virtual detector replacing one relay-plus-photon block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalentDetector {
    /// Equivalent efficiency when the network runs in the Z basis.
    pub eta_z: f64,
    /// Equivalent efficiency when the network runs in the X basis.
    pub eta_x: f64,
    /// Equivalent dark count probability.
    pub dark: f64,
}

/// Success probability of the Bell analyzer for two same-polarization
/// Z-basis photons (`|H>|H>` or `|V>|V>`).
///
/// Both photons bunch into one detector, so the only valid coincidences come
/// from a dark count on the partner detector:
/// `P = 2 p_d (1-p_d)^2 [1 - (1-p_d)(1-eta_d)^2]`.
pub fn prob_bsm_same_pol(params: &DetectorParams) -> f64 {
    let q = 1.0 - params.p_d;
    2.0 * params.p_d * q * q * (1.0 - q * (1.0 - params.eta_d) * (1.0 - params.eta_d))
}

/// Success probability for two opposite-polarization Z-basis photons
/// (`|H>|V>`): the photons land on an H and a V detector and both must
/// click while the other two stay silent:
/// `P = (1-p_d)^2 [1 - (1-p_d)(1-eta_d)]^2`.
pub fn prob_bsm_diff_pol(params: &DetectorParams) -> f64 {
    let q = 1.0 - params.p_d;
    let click = 1.0 - q * (1.0 - params.eta_d);
    q * q * click * click
}

/// Equivalent Z-basis efficiency: the average of the same- and
/// opposite-polarization success probabilities over the two equally likely
/// local-photon values. By symmetry the `|H>` and `|V>` cases coincide.
pub fn equivalent_eff_z(params: &DetectorParams) -> f64 {
    let q = 1.0 - params.p_d;
    let miss2 = (1.0 - params.eta_d) * (1.0 - params.eta_d);
    let click = 1.0 - q * (1.0 - params.eta_d);
    0.5 * q * q * (2.0 * params.p_d * (1.0 - q * miss2) + click * click)
}

/// Equivalent X-basis efficiency: interference steers both X input pairings
/// onto valid two-click patterns, so the success probability is the
/// two-click one regardless of the local photon value. By symmetry the
/// `|+>` and `|->` cases coincide.
pub fn equivalent_eff_x(params: &DetectorParams) -> f64 {
    prob_bsm_diff_pol(params)
}

/// Equivalent dark count: with no incoming photon, the local photon is
/// detected and a dark count completes a fake coincidence:
/// `p' = 2 p_d (1-p_d)^2 eta_d`.
pub fn equivalent_dark(params: &DetectorParams) -> f64 {
    let q = 1.0 - params.p_d;
    2.0 * params.p_d * q * q * params.eta_d
}

/// Bundle the three equivalent parameters.
pub fn equivalent_detector(params: &DetectorParams) -> EquivalentDetector {
    EquivalentDetector {
        eta_z: equivalent_eff_z(params),
        eta_x: equivalent_eff_x(params),
        dark: equivalent_dark(params),
    }
}
