//! Analytic performance engine: binary entropy, channel transmittance,
//! single-photon yields, error rates, secret key rates, and distance sweeps.
//!
//! The two-user chain models the network after post-selection on the
//! auxiliary announcements: a noisy two-qubit source
//! `rho = p |phi+><phi+| + (1-p)/4 I` feeds two virtual detectors (one per
//! communication user) whose efficiencies and dark counts come from
//! [`crate::detector`]. Per basis `b`, each side detects with probability
//! `eta = eta_b * 10^(-alpha L / 20)` where `L` is the total distance
//! between the communication users, and fakes a detection with the
//! equivalent dark count.
//!
//! With `Y` the coincidence yield, `e0 = 1/2`, and `e_d` the misalignment
//! error, both basis error rates take the same shape
//! `e = e0 - p * eta_A * eta_B * (e0 - e_d) / Y`, and the secret key rate is
//! `R = Q [1 - H(e_phase) - f H(e_bit)]`, clamped at zero.

use serde::{Deserialize, Serialize};

use crate::detector::{DetectorParams, EquivalentDetector};

/// Random-noise error rate: mixed-source and dark-count events are fifty-fifty.
const E0: f64 = 0.5;

/// Bisection resolution for zero-rate cutoff distances, in km.
const CUTOFF_RESOLUTION_KM: f64 = 0.1;

/// Upper bound for the cutoff search, in km.
const CUTOFF_SEARCH_LIMIT_KM: f64 = 20_000.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum KeyRateError {
    #[error("{name} = {value} is not a probability in [0, 1]")]
    NotProbability { name: &'static str, value: f64 },
    #[error("coincidence yield is zero; error rate undefined")]
    ZeroYield,
    #[error("sweep grids must be non-empty")]
    EmptyGrid,
    #[error("distance {0} km is negative")]
    NegativeDistance(f64),
}

fn check_probability(name: &'static str, value: f64) -> Result<(), KeyRateError> {
    if !(0.0..=1.0).contains(&value) || !value.is_finite() {
        return Err(KeyRateError::NotProbability { name, value });
    }
    Ok(())
}

/// Binary Shannon entropy `H(x) = -x log2 x - (1-x) log2 (1-x)` in bits,
/// with `H(0) = H(1) = 0` by continuity.
pub fn binary_entropy(x: f64) -> Result<f64, KeyRateError> {
    check_probability("x", x)?;
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Fiber link between the two communication users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Total fiber length between the two communication users, in km.
    pub distance_km: f64,
    /// Fiber loss coefficient, dB/km.
    pub alpha: f64,
    /// Place each Bell analyzer midway between its user and the source
    /// instead of at the user's side, halving the per-side loss exponent.
    pub relay_at_midpoint: bool,
}

impl LinkBudget {
    pub fn new(distance_km: f64, alpha: f64) -> Result<Self, KeyRateError> {
        if !(distance_km >= 0.0) || !distance_km.is_finite() {
            return Err(KeyRateError::NegativeDistance(distance_km));
        }
        Ok(LinkBudget {
            distance_km,
            alpha,
            relay_at_midpoint: false,
        })
    }

    /// Per-side channel transmittance: `10^(-alpha L / 20)`, or
    /// `10^(-alpha L / 40)` with midpoint relays.
    pub fn channel_transmittance(&self) -> f64 {
        let divisor = if self.relay_at_midpoint { 40.0 } else { 20.0 };
        10f64.powf(-self.alpha * self.distance_km / divisor)
    }

    /// Per-side detection efficiency for a virtual detector efficiency.
    pub fn arm_efficiency(&self, detector_eff: f64) -> f64 {
        detector_eff * self.channel_transmittance()
    }
}

/// Coincidence yield for per-side efficiency `eta` and dark count `dark`:
/// `Y = [1 - (1 - dark)(1 - eta)]^2` with symmetric sides.
pub fn yield_for_efficiency(eta: f64, dark: f64) -> f64 {
    let side = 1.0 - (1.0 - dark) * (1.0 - eta);
    side * side
}

/// Z-basis single-photon coincidence yield for the link.
pub fn yield_single_photon(link: &LinkBudget, equiv: &EquivalentDetector) -> f64 {
    yield_for_efficiency(link.arm_efficiency(equiv.eta_z), equiv.dark)
}

fn error_rate(p: f64, eta: f64, dark: f64, e_d: f64) -> Result<f64, KeyRateError> {
    check_probability("p", p)?;
    check_probability("e_d", e_d)?;
    let y = yield_for_efficiency(eta, dark);
    if y <= 0.0 {
        return Err(KeyRateError::ZeroYield);
    }
    Ok(E0 - p * eta * eta * (E0 - e_d) / y)
}

/// X-basis single-photon error rate (the phase error bounding leaked
/// information), using the X-basis equivalent efficiency on both arms.
pub fn phase_error_xx(
    p: f64,
    link: &LinkBudget,
    equiv: &EquivalentDetector,
    e_d: f64,
) -> Result<f64, KeyRateError> {
    error_rate(p, link.arm_efficiency(equiv.eta_x), equiv.dark, e_d)
}

/// Z-basis error rate (the bit error rate paid to error correction), using
/// the Z-basis equivalent efficiency on both arms.
pub fn qber_zz(
    p: f64,
    link: &LinkBudget,
    equiv: &EquivalentDetector,
    e_d: f64,
) -> Result<f64, KeyRateError> {
    error_rate(p, link.arm_efficiency(equiv.eta_z), equiv.dark, e_d)
}

/// One evaluated point of the rate-versus-distance curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRatePoint {
    pub p: f64,
    pub distance_km: f64,
    /// Z-basis coincidence gain.
    pub gain_zz: f64,
    /// Z-basis error rate.
    pub qber_zz: f64,
    /// X-basis error rate.
    pub phase_error_xx: f64,
    /// Secret bits per emitted pair, clamped at zero.
    pub rate: f64,
    /// Set when the analytic rate was negative and clamped.
    pub clamped: bool,
}

/// Secret key rate for the two-user protocol at one operating point.
///
/// The single-photon source makes the overall and single-photon Z gains
/// equal to the yield, so `R = Y [1 - H(e_xx) - f H(e_zz)]`, clamped at
/// zero with the clamp flagged.
pub fn key_rate_realistic(
    p: f64,
    link: &LinkBudget,
    equiv: &EquivalentDetector,
    params: &DetectorParams,
) -> Result<KeyRatePoint, KeyRateError> {
    let gain = yield_single_photon(link, equiv);
    let e_zz = qber_zz(p, link, equiv, params.e_d)?;
    let e_xx = phase_error_xx(p, link, equiv, params.e_d)?;
    let raw = gain * (1.0 - binary_entropy(e_xx)? - params.f * binary_entropy(e_zz)?);
    Ok(KeyRatePoint {
        p,
        distance_km: link.distance_km,
        gain_zz: gain,
        qber_zz: e_zz,
        phase_error_xx: e_xx,
        rate: raw.max(0.0),
        clamped: raw < 0.0,
    })
}

/// Conference key rate for three users:
/// `R3 = Q_Z [1 - f max(H(E12), H(E13)) - H(EX)]`, clamped at zero.
pub fn key_rate_conference(
    gain_z: f64,
    e_marginal_12: f64,
    e_marginal_13: f64,
    e_x: f64,
    f: f64,
) -> Result<f64, KeyRateError> {
    check_probability("gain_z", gain_z)?;
    let h12 = binary_entropy(e_marginal_12)?;
    let h13 = binary_entropy(e_marginal_13)?;
    let hx = binary_entropy(e_x)?;
    Ok((gain_z * (1.0 - f * h12.max(h13) - hx)).max(0.0))
}

/// Zero-rate cutoff for one source quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffPoint {
    pub p: f64,
    /// Largest distance with a positive rate, to 0.1 km; `None` when the
    /// rate is already zero at zero distance.
    pub cutoff_km: Option<f64>,
}

/// Rate table over a `(p, distance)` grid plus per-`p` cutoff distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<KeyRatePoint>,
    pub cutoffs: Vec<CutoffPoint>,
}

/// Evaluate the rate over the grid and locate each `p`'s cutoff by bisection.
///
/// Points are ordered by (`p` index, `distance` index); the evaluation is
/// pure, so repeated sweeps produce identical reports.
pub fn sweep(
    p_values: &[f64],
    distances_km: &[f64],
    params: &DetectorParams,
    relay_at_midpoint: bool,
) -> Result<SweepReport, KeyRateError> {
    if p_values.is_empty() || distances_km.is_empty() {
        return Err(KeyRateError::EmptyGrid);
    }
    let equiv = crate::detector::equivalent_detector(params);
    let mut points = Vec::with_capacity(p_values.len() * distances_km.len());
    let mut cutoffs = Vec::with_capacity(p_values.len());
    for &p in p_values {
        for &distance in distances_km {
            let mut link = LinkBudget::new(distance, params.alpha)?;
            link.relay_at_midpoint = relay_at_midpoint;
            points.push(key_rate_realistic(p, &link, &equiv, params)?);
        }
        cutoffs.push(CutoffPoint {
            p,
            cutoff_km: cutoff_distance(p, params, &equiv, relay_at_midpoint)?,
        });
    }
    Ok(SweepReport { points, cutoffs })
}

/// Largest distance with `rate > 0`, found by doubling then bisecting down
/// to [`CUTOFF_RESOLUTION_KM`]. The rate is nonincreasing in distance, so
/// the positive/zero boundary is a single point.
fn cutoff_distance(
    p: f64,
    params: &DetectorParams,
    equiv: &EquivalentDetector,
    relay_at_midpoint: bool,
) -> Result<Option<f64>, KeyRateError> {
    let rate_at = |distance: f64| -> Result<f64, KeyRateError> {
        let mut link = LinkBudget::new(distance, params.alpha)?;
        link.relay_at_midpoint = relay_at_midpoint;
        Ok(key_rate_realistic(p, &link, equiv, params)?.rate)
    };
    if rate_at(0.0)? <= 0.0 {
        return Ok(None);
    }
    let mut lo = 0.0;
    let mut hi = 100.0;
    while rate_at(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > CUTOFF_SEARCH_LIMIT_KM {
            return Ok(Some(CUTOFF_SEARCH_LIMIT_KM));
        }
    }
    while hi - lo > CUTOFF_RESOLUTION_KM {
        let mid = 0.5 * (lo + hi);
        if rate_at(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

impl SweepReport {
    /// Fixed-column CSV with a versioned schema comment line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("#schema=1\np,distance_km,gain_zz,qber_zz,phase_error_xx,rate\n");
        for point in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                point.p,
                point.distance_km,
                point.gain_zz,
                point.qber_zz,
                point.phase_error_xx,
                point.rate
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::equivalent_detector;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference() -> (DetectorParams, EquivalentDetector) {
        let params = DetectorParams::default();
        let equiv = equivalent_detector(&params);
        (params, equiv)
    }

    #[test]
    fn entropy_endpoints_and_maximum() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_relative_eq!(binary_entropy(0.5).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(binary_entropy(0.02).unwrap(), 0.141441, epsilon = 5e-7);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn yield_limits() {
        assert_eq!(yield_for_efficiency(1.0, 0.0), 1.0);
        assert_eq!(yield_for_efficiency(0.0, 0.0), 0.0);
        let (_, equiv) = reference();
        let link = LinkBudget::new(0.0, 0.2).unwrap();
        let y = yield_single_photon(&link, &equiv);
        assert_relative_eq!(y, 6.40e-3, max_relative = 1e-3);
    }

    #[test]
    fn error_rate_limits() {
        let ideal = EquivalentDetector {
            eta_z: 1.0,
            eta_x: 1.0,
            dark: 0.0,
        };
        let link = LinkBudget::new(0.0, 0.2).unwrap();
        // Perfect detection and a pure source leave only misalignment.
        let e = phase_error_xx(1.0, &link, &ideal, 0.02).unwrap();
        assert!((e - 0.02).abs() < 1e-12);
        // A fully mixed source gives random outcomes.
        let (_, equiv) = reference();
        let e = phase_error_xx(0.0, &link, &equiv, 0.02).unwrap();
        assert_eq!(e, 0.5);
        let e = qber_zz(0.0, &link, &equiv, 0.02).unwrap();
        assert_eq!(e, 0.5);
        // No detections at all: undefined.
        let dead = EquivalentDetector {
            eta_z: 0.0,
            eta_x: 0.0,
            dark: 0.0,
        };
        assert_eq!(
            phase_error_xx(1.0, &link, &dead, 0.02),
            Err(KeyRateError::ZeroYield)
        );
    }

    #[test]
    fn qber_decreases_with_source_quality() {
        let (_, equiv) = reference();
        let link = LinkBudget::new(120.0, 0.2).unwrap();
        let mut last = 1.0;
        for i in 0..11 {
            let p = i as f64 / 10.0;
            let e = qber_zz(p, &link, &equiv, 0.02).unwrap();
            assert!(e < last);
            last = e;
        }
    }

    #[test]
    fn rate_positive_at_100db_total_loss() {
        let (params, equiv) = reference();
        // 500 km at 0.2 dB/km: 100 dB across the link.
        let link = LinkBudget::new(500.0, params.alpha).unwrap();
        let point = key_rate_realistic(1.0, &link, &equiv, &params).unwrap();
        assert!(point.rate > 0.0, "rate = {} at 100 dB", point.rate);
        assert!(!point.clamped);
    }

    #[test]
    fn rate_clamps_for_mixed_source() {
        let (params, equiv) = reference();
        let link = LinkBudget::new(0.0, params.alpha).unwrap();
        let point = key_rate_realistic(0.0, &link, &equiv, &params).unwrap();
        assert_eq!(point.rate, 0.0);
        assert!(point.clamped);
    }

    #[test]
    fn conference_rate_cases() {
        assert_eq!(
            key_rate_conference(1.0, 0.0, 0.0, 0.0, 1.16).unwrap(),
            1.0
        );
        assert_eq!(
            key_rate_conference(1.0, 0.01, 0.01, 0.5, 1.16).unwrap(),
            0.0
        );
        // Symmetric marginals reduce the max to either argument.
        let symmetric = key_rate_conference(0.8, 0.03, 0.03, 0.02, 1.16).unwrap();
        let h = binary_entropy(0.03).unwrap();
        let hx = binary_entropy(0.02).unwrap();
        assert_relative_eq!(symmetric, 0.8 * (1.0 - 1.16 * h - hx), epsilon = 1e-15);
    }

    #[test]
    fn sweep_reports_decreasing_cutoffs() {
        let (params, _) = reference();
        let report = sweep(
            &[1.0, 0.98, 0.96],
            &[0.0, 100.0, 300.0, 500.0],
            &params,
            false,
        )
        .unwrap();
        assert_eq!(report.points.len(), 12);
        let cutoffs: Vec<f64> = report
            .cutoffs
            .iter()
            .map(|c| c.cutoff_km.expect("positive rate at zero distance"))
            .collect();
        assert!(cutoffs[0] >= 500.0, "p = 1 cutoff {} < 500 km", cutoffs[0]);
        assert!(cutoffs[0] > cutoffs[1] && cutoffs[1] > cutoffs[2]);
        // Monotone rate along each p row.
        for chunk in report.points.chunks(4) {
            for pair in chunk.windows(2) {
                assert!(pair[1].rate <= pair[0].rate);
            }
        }
        assert!(matches!(
            sweep(&[], &[0.0], &params, false),
            Err(KeyRateError::EmptyGrid)
        ));
    }

    #[test]
    fn csv_layout_is_pinned() {
        let (params, _) = reference();
        let report = sweep(&[1.0], &[0.0], &params, false).unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("#schema=1"));
        assert_eq!(
            lines.next(),
            Some("p,distance_km,gain_zz,qber_zz,phase_error_xx,rate")
        );
        assert_eq!(lines.next().map(|l| l.split(',').count()), Some(6));
        // Pure computation: identical reruns byte for byte.
        let again = sweep(&[1.0], &[0.0], &params, false).unwrap();
        assert_eq!(csv, again.to_csv());
    }

    #[test]
    fn alpha_doubling_squares_transmittance() {
        let link1 = LinkBudget::new(137.0, 0.2).unwrap();
        let link2 = LinkBudget::new(137.0, 0.4).unwrap();
        let t1 = link1.channel_transmittance();
        let t2 = link2.channel_transmittance();
        assert_relative_eq!(t2, t1 * t1, epsilon = 1e-12);
        // Midpoint relays halve the exponent.
        let mut mid = link1;
        mid.relay_at_midpoint = true;
        assert_relative_eq!(mid.channel_transmittance(), t1.sqrt(), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn entropy_symmetric_and_bounded(x in 0.0f64..=1.0) {
            let h = binary_entropy(x).unwrap();
            let h_mirror = binary_entropy(1.0 - x).unwrap();
            prop_assert!((h - h_mirror).abs() < 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&h));
        }

        #[test]
        fn entropy_concave_on_midpoints(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let mid = binary_entropy(0.5 * (a + b)).unwrap();
            let avg = 0.5 * (binary_entropy(a).unwrap() + binary_entropy(b).unwrap());
            prop_assert!(mid >= avg - 1e-12);
        }
    }
}
