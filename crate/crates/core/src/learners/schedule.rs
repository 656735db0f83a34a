//! Step-size schedules.

use crate::analysis::{AssumptionBounds, RateConstants};
use crate::error::{Error, Result};

/// Schedule parameters as written in configs.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSpec {
    Constant {
        alpha: f64,
        beta: f64,
    },
    InverseSqrt {
        alpha0: f64,
        beta0: f64,
    },
    /// Prescribed constant pair from the rate constants.
    Theorem2,
    /// `alpha_t = beta_t = 2 / (C sqrt(5 t))`
    AppendixE {
        c: f64,
    },
}

/// A resolved schedule emitting one `(alpha_t, beta_t)` pair per step,
/// queried with 1-based step indices.
#[derive(Debug, Clone, PartialEq)]
pub enum StepSizeSchedule {
    Constant { alpha: f64, beta: f64 },
    InverseSqrt { alpha0: f64, beta0: f64 },
    Theorem2 { alpha: f64, beta: f64 },
    AppendixE { c: f64 },
}

impl StepSizeSchedule {
    /// Step sizes for step `t >= 1`.
    pub fn pair(&self, t: u64) -> (f64, f64) {
        let t = t.max(1) as f64;
        match *self {
            StepSizeSchedule::Constant { alpha, beta }
            | StepSizeSchedule::Theorem2 { alpha, beta } => (alpha, beta),
            StepSizeSchedule::InverseSqrt { alpha0, beta0 } => {
                (alpha0 / t.sqrt(), beta0 / t.sqrt())
            }
            StepSizeSchedule::AppendixE { c } => {
                let a = 2.0 / (c * (5.0 * t).sqrt());
                (a, a)
            }
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            StepSizeSchedule::Constant { alpha, beta } => {
                format!("constant alpha={alpha} beta={beta}")
            }
            StepSizeSchedule::InverseSqrt { alpha0, beta0 } => {
                format!("inverse-sqrt alpha0={alpha0} beta0={beta0}")
            }
            StepSizeSchedule::Theorem2 { alpha, beta } => {
                format!("prescribed alpha={alpha} beta={beta}")
            }
            StepSizeSchedule::AppendixE { c } => format!("decaying 2/(C*sqrt(5t)) with C={c}"),
        }
    }
}

/// Resolve a schedule spec; the prescribed kind needs the rate constants.
pub fn make_schedule(
    spec: &ScheduleSpec,
    rate: Option<&RateConstants>,
) -> Result<StepSizeSchedule> {
    let positive = |v: f64, name: &'static str| {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::MissingScheduleParam(name))
        }
    };
    match *spec {
        ScheduleSpec::Constant { alpha, beta } => Ok(StepSizeSchedule::Constant {
            alpha: positive(alpha, "alpha")?,
            beta: positive(beta, "beta")?,
        }),
        ScheduleSpec::InverseSqrt { alpha0, beta0 } => Ok(StepSizeSchedule::InverseSqrt {
            alpha0: positive(alpha0, "alpha0")?,
            beta0: positive(beta0, "beta0")?,
        }),
        ScheduleSpec::Theorem2 => {
            let rate = rate.ok_or(Error::MissingScheduleParam("rate constants"))?;
            Ok(StepSizeSchedule::Theorem2 {
                alpha: rate.alpha_star,
                beta: rate.beta_star,
            })
        }
        ScheduleSpec::AppendixE { c } => Ok(StepSizeSchedule::AppendixE {
            c: positive(c, "C")?,
        }),
    }
}

/// Worst-case schedule constant over origin-centered balls of the given
/// radii:
///
/// ```text
/// C = 4 diam(D_omega)^2 C1~^2 + diam(D_theta)^2 C2~^2
/// C1~^2 = c_b^2 + c_a^2 diam(D_theta)^2 + c_m^2 diam(D_omega)^2
/// C2~^2 = c_a^2 diam(D_omega)^2
/// ```
pub fn appendix_e_constant(
    bounds: &AssumptionBounds,
    gamma: f64,
    lambda: f64,
    p: usize,
    radius_theta: f64,
    radius_omega: f64,
) -> Result<f64> {
    let decay = gamma * lambda * bounds.rho_max;
    if decay >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "schedule constant requires gamma*lambda*rho_max < 1, got {decay}"
        )));
    }
    let pf = p as f64;
    let c_e = bounds.phi_max / (1.0 - decay);
    let c_b = bounds.r_max * c_e;
    let c_a = (1.0 + gamma) * c_e * bounds.phi_max;
    let c_m = pf * pf.sqrt() * bounds.phi_max * bounds.phi_max;
    let diam_theta = 2.0 * radius_theta;
    let diam_omega = 2.0 * radius_omega;
    let c1_sq =
        c_b * c_b + c_a * c_a * diam_theta * diam_theta + c_m * c_m * diam_omega * diam_omega;
    let c2_sq = c_a * c_a * diam_omega * diam_omega;
    Ok(4.0 * diam_omega * diam_omega * c1_sq + diam_theta * diam_theta * c2_sq)
}
