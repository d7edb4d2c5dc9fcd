//! Closed-form well-posedness certificates: the existence horizon `T(theta)`,
//! its generalised inverse `theta(t)`, operator-norm bounds between scale
//! spaces and the Picard contraction factor `q(T)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const THETA_TOL: f64 = 1e-12;
const Q_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormVariant {
    /// Uses `c_phi` of the unscaled dynamics.
    Delta,
    /// epsilon-uniform bound with `<phi>` in place of `c_phi`.
    Renormalized,
    Vlasov,
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive and finite, got {value}")))
    }
}

fn check_nonnegative(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be non-negative and finite, got {value}")))
    }
}

/// `T(theta) = (theta0 - theta) / (2 alpha) * exp(-c_phi e^{-theta})`.
pub fn existence_horizon(theta0: f64, theta: f64, alpha: f64, c_phi: f64) -> Result<f64> {
    check_positive("alpha", alpha)?;
    check_nonnegative("c_phi", c_phi)?;
    if !(theta.is_finite() && theta0.is_finite()) {
        return Err(Error::InvalidInput("theta and theta0 must be finite".into()));
    }
    if theta > theta0 {
        return Err(Error::InvalidInput(format!("theta = {theta} exceeds theta0 = {theta0}")));
    }
    Ok(horizon_unchecked(theta0, theta, alpha, c_phi))
}

fn horizon_unchecked(theta0: f64, theta: f64, alpha: f64, c_phi: f64) -> f64 {
    (theta0 - theta) / (2.0 * alpha) * (-c_phi * (-theta).exp()).exp()
}

/// Location and value of `max_{theta <= theta0} T(theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonPeak {
    pub theta: f64,
    /// `T_*`; infinite when `c_phi = 0`.
    pub t_star: f64,
}

/// Golden-section maximisation of `T` over `theta <= theta0`.
pub fn horizon_peak(theta0: f64, alpha: f64, c_phi: f64) -> Result<HorizonPeak> {
    check_positive("alpha", alpha)?;
    check_nonnegative("c_phi", c_phi)?;
    if c_phi == 0.0 {
        return Ok(HorizonPeak {
            theta: f64::NEG_INFINITY,
            t_star: f64::INFINITY,
        });
    }
    // The maximiser solves (theta0 - theta) c e^{-theta} = 1 and lies within `width` of theta0.
    let width = 1f64.max(theta0.exp() / c_phi);
    let f = |th: f64| horizon_unchecked(theta0, th, alpha, c_phi);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (theta0 - width, theta0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..400 {
        if hi - lo <= THETA_TOL * 1f64.max(theta0.abs()) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
    }
    let theta = 0.5 * (lo + hi);
    Ok(HorizonPeak { theta, t_star: f(theta) })
}

/// `theta(t) = sup { theta <= theta0 : t < T(theta) }`, or `None` once `t >= T_*`.
///
/// The supremum lies on the branch between the maximiser and `theta0`, where
/// `T` is decreasing; it is located by bisection on `T(theta) = t`.
pub fn theta_of_t(theta0: f64, alpha: f64, c_phi: f64, t: f64) -> Result<Option<f64>> {
    check_nonnegative("t", t)?;
    let peak = horizon_peak(theta0, alpha, c_phi)?;
    if t == 0.0 {
        return Ok(Some(theta0));
    }
    if c_phi == 0.0 {
        return Ok(Some(theta0 - 2.0 * alpha * t));
    }
    if t >= peak.t_star {
        return Ok(None);
    }
    // Invariant: T(lo) > t >= T(hi).
    let (mut lo, mut hi) = (peak.theta, theta0);
    while hi - lo > THETA_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if horizon_unchecked(theta0, mid, alpha, c_phi) > t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// `2 alpha / (e (theta'' - theta')) * exp(c e^{-theta''})`.
///
/// `c` is `c_phi` for [`NormVariant::Delta`] and `<phi>` otherwise; the caller
/// passes the matching constant.
pub fn op_norm_bound(theta_pp: f64, theta_p: f64, alpha: f64, c: f64, variant: NormVariant) -> Result<f64> {
    let _ = variant;
    check_positive("alpha", alpha)?;
    check_nonnegative("c", c)?;
    if !(theta_pp > theta_p) || !theta_pp.is_finite() || !theta_p.is_finite() {
        return Err(Error::InvalidInput(format!(
            "need theta'' > theta', got theta'' = {theta_pp}, theta' = {theta_p}"
        )));
    }
    Ok(2.0 * alpha / (std::f64::consts::E * (theta_pp - theta_p)) * (c * (-theta_pp).exp()).exp())
}

/// `q(T) = 2 (1 - e^{-alpha T}) (1 + <phi> u0 exp(alpha T + 2 <phi> u0 e^{alpha T}))`.
pub fn contraction_factor(u0: f64, alpha: f64, mean_phi: f64, t: f64) -> Result<f64> {
    check_nonnegative("u0", u0)?;
    check_positive("alpha", alpha)?;
    check_nonnegative("mean_phi", mean_phi)?;
    check_nonnegative("T", t)?;
    let growth = (alpha * t).exp();
    if growth >= 2.0 {
        return Err(Error::WindowTooLong { growth });
    }
    let b = mean_phi * u0;
    Ok(-2.0 * (-alpha * t).exp_m1() * (1.0 + b * (alpha * t + 2.0 * b * growth).exp()))
}

/// Window `T` with `q(T) = target`, by bisection on `[0, ln 2 / alpha)`.
pub fn find_t_for_q(target: f64, u0: f64, alpha: f64, mean_phi: f64) -> Result<f64> {
    check_positive("target", target)?;
    let t_max = std::f64::consts::LN_2 / alpha;
    let sup_q = contraction_factor(u0, alpha, mean_phi, t_max * (1.0 - 1e-12))?;
    if target >= sup_q {
        return Err(Error::InvalidInput(format!(
            "q(T) stays below {sup_q} on the admissible window; target {target} unreachable"
        )));
    }
    let (mut lo, mut hi) = (0.0, t_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let q = contraction_factor(u0, alpha, mean_phi, mid)?;
        if (q - target).abs() <= Q_TOL {
            return Ok(mid);
        }
        if q < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaSample {
    pub t: f64,
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub struct HorizonReport {
    pub theta0: f64,
    pub theta: f64,
    pub alpha: f64,
    pub c_phi: f64,
    pub mean_phi: f64,
    #[serde(rename = "T_of_theta")]
    pub t_of_theta: f64,
    /// `T_*`; serialised as `null` when unbounded.
    pub t_star: Option<f64>,
    pub theta_star: Option<f64>,
    pub theta_of_t: Vec<ThetaSample>,
    /// Bound on the generator from `K_theta0` into `K_theta`.
    pub norm_bound: Option<f64>,
    /// `q(T(theta))` with `u0 = e^{-theta0}`; absent when `e^{alpha T} >= 2`.
    #[serde(rename = "q_of_T")]
    pub q_of_t: Option<f64>,
}

/// Assembles the certificate for one parameter set; `mean_phi` defaults to `c_phi`.
pub fn horizon_report(theta0: f64, theta: f64, alpha: f64, c_phi: f64, mean_phi: Option<f64>, samples: usize) -> Result<HorizonReport> {
    let mean_phi = mean_phi.unwrap_or(c_phi);
    check_nonnegative("mean_phi", mean_phi)?;
    let t_of_theta = existence_horizon(theta0, theta, alpha, c_phi)?;
    let peak = horizon_peak(theta0, alpha, c_phi)?;
    let span = if peak.t_star.is_finite() { peak.t_star } else { t_of_theta.max(1.0 / alpha) };
    let samples = samples.max(2);
    let theta_of_t = (0..samples)
        .map(|i| {
            let t = span * i as f64 / (samples - 1) as f64;
            theta_of_t(theta0, alpha, c_phi, t).map(|theta| ThetaSample { t, theta })
        })
        .collect::<Result<Vec<_>>>()?;
    let norm_bound = (theta < theta0)
        .then(|| op_norm_bound(theta0, theta, alpha, c_phi, NormVariant::Delta))
        .transpose()?;
    let q_of_t = match contraction_factor((-theta0).exp(), alpha, mean_phi, t_of_theta) {
        Ok(q) => Some(q),
        Err(Error::WindowTooLong { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(HorizonReport {
        theta0,
        theta,
        alpha,
        c_phi,
        mean_phi,
        t_of_theta,
        t_star: peak.t_star.is_finite().then_some(peak.t_star),
        theta_star: peak.theta.is_finite().then_some(peak.theta),
        theta_of_t,
        norm_bound,
        q_of_t,
    })
}
