//! Episode runner: drives the online learner over an environment stream and
//! records diagnostics at a fixed stride.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{self, KeyMatrices, LyapunovSystem, RateConstants};
use crate::envs::{Environment, EpisodeMode};
use crate::error::{Error, Result};

use super::{ges_step, primal_dual_gap, LearnerState, StepSizeSchedule};

/// Everything a single run needs besides the environment.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub n_episodes: usize,
    pub lambda: f64,
    pub seed: u64,
    /// Record diagnostics every `stride` steps (and at the final step).
    pub stride: usize,
    /// Optional nonzero start for the primal parameters.
    pub init_theta: Option<DVector<f64>>,
}

impl RunSettings {
    pub fn new(n_episodes: usize, lambda: f64, seed: u64) -> Self {
        Self {
            n_episodes,
            lambda,
            seed,
            stride: 1_000,
            init_theta: None,
        }
    }
}

/// Analytic context for per-step diagnostics; every field is optional, and
/// each enabled metric costs one dense evaluation per recorded step.
#[derive(Default)]
pub struct DiagnosticContext<'a> {
    pub key_matrices: Option<&'a KeyMatrices>,
    /// Use the pseudo-inverse objective (rank-deficient Gram matrices).
    pub pseudo_inverse: bool,
    pub theta_star: Option<&'a DVector<f64>>,
    pub rate: Option<&'a RateConstants>,
    pub lyapunov: Option<&'a LyapunovSystem>,
    /// Ball radii for the primal-dual gap of the averaged iterates.
    pub gap_radii: Option<(f64, f64)>,
}

/// One recorded point.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRecord {
    pub step: u64,
    pub mspbe: f64,
    /// `nu * ||theta - theta*||^2 + ||omega - M^-1(A theta + b)||^2`
    pub d_t: f64,
    pub lyapunov: f64,
    pub gap_of_averages: f64,
    pub theta: DVector<f64>,
    pub omega: DVector<f64>,
}

/// Per-run metric series recorded at a fixed stride.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticSeries {
    pub stride: usize,
    pub records: Vec<DiagnosticRecord>,
    /// Step at which the divergence flag was raised, if it was.
    pub diverged_at: Option<u64>,
}

impl DiagnosticSeries {
    /// Bit-level equality; unlike `==`, treats equal NaN payloads in
    /// unrecorded metrics as equal, so it tests reproducibility.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        let f = |a: f64, b: f64| a.to_bits() == b.to_bits();
        self.stride == other.stride
            && self.diverged_at == other.diverged_at
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.step == b.step
                    && f(a.mspbe, b.mspbe)
                    && f(a.d_t, b.d_t)
                    && f(a.lyapunov, b.lyapunov)
                    && f(a.gap_of_averages, b.gap_of_averages)
                    && a.theta.iter().zip(b.theta.iter()).all(|(x, y)| f(*x, *y))
                    && a.omega.iter().zip(b.omega.iter()).all(|(x, y)| f(*x, *y))
            })
    }
}

/// Step-size-weighted averages of recorded iterates:
/// `theta~ = sum(alpha_t * theta_t) / sum(alpha_t)`.
pub fn averaged_iterates(
    iterates: &[(DVector<f64>, DVector<f64>)],
    weights: &[f64],
) -> Result<(DVector<f64>, DVector<f64>)> {
    if iterates.is_empty() || iterates.len() != weights.len() {
        return Err(Error::EmptySeries("averaged_iterates"));
    }
    let p = iterates[0].0.len();
    let mut theta = DVector::zeros(p);
    let mut omega = DVector::zeros(p);
    let mut total = 0.0;
    for ((t, w), &a) in iterates.iter().zip(weights) {
        theta.axpy(a, t, 1.0);
        omega.axpy(a, w, 1.0);
        total += a;
    }
    Ok((theta / total, omega / total))
}

/// Run the online learner for `n_episodes` episodes of the environment's
/// episode structure, recording diagnostics every `stride` steps.
/// Deterministic given the seed. A divergence flag ends the run early with
/// the partial series preserved.
pub fn run_episodes<E: Environment>(
    env: &E,
    schedule: &StepSizeSchedule,
    settings: &RunSettings,
    diag: &DiagnosticContext<'_>,
) -> Result<(LearnerState, DiagnosticSeries)> {
    let p = env.feature_dim();
    let gamma = env.gamma();
    let lambda = settings.lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut state = match &settings.init_theta {
        Some(theta) => {
            if theta.len() != p {
                return Err(Error::DimensionMismatch {
                    context: "init_theta",
                    expected: p,
                    got: theta.len(),
                });
            }
            LearnerState::with_theta(theta.clone())
        }
        None => LearnerState::zeros(p),
    };
    let mut series = DiagnosticSeries {
        stride: settings.stride,
        records: Vec::new(),
        diverged_at: None,
    };

    // running aggregates for the averaged iterates
    let mut weight_sum = 0.0;
    let mut theta_avg = DVector::<f64>::zeros(p);
    let mut omega_avg = DVector::<f64>::zeros(p);

    let mode = env.episode_mode();
    'outer: for _ in 0..settings.n_episodes {
        let mut s = env.reset(&mut rng);
        if !matches!(mode, EpisodeMode::Continuing { .. }) {
            state.reset_trace();
        }
        let cap = mode.steps_per_episode();
        for _ in 0..cap {
            let tr = env.step(&s, &mut rng);
            let (alpha, beta) = schedule.pair(state.t + 1);
            ges_step(&mut state, &tr, alpha, beta, gamma, lambda)?;

            weight_sum += alpha;
            // incremental weighted mean: avg += (x - avg) * (alpha / weight_sum)
            let scale = alpha / weight_sum;
            theta_avg.zip_apply(&state.theta, |a, x| *a += (x - *a) * scale);
            omega_avg.zip_apply(&state.omega, |a, x| *a += (x - *a) * scale);

            if state.t % settings.stride as u64 == 0 || state.diverged() {
                series
                    .records
                    .push(record(&state, diag, &theta_avg, &omega_avg)?);
            }
            if state.diverged() {
                series.diverged_at = state.diverged_at;
                break 'outer;
            }
            let terminal = tr.terminal;
            s = tr.next_state;
            if terminal {
                break;
            }
        }
    }
    if series.records.last().map(|r| r.step) != Some(state.t) && !state.diverged() {
        series
            .records
            .push(record(&state, diag, &theta_avg, &omega_avg)?);
    }
    Ok((state, series))
}

fn record(
    state: &LearnerState,
    diag: &DiagnosticContext<'_>,
    theta_avg: &DVector<f64>,
    omega_avg: &DVector<f64>,
) -> Result<DiagnosticRecord> {
    let mut mspbe = f64::NAN;
    let mut d_t = f64::NAN;
    let mut lyap = f64::NAN;
    let mut gap = f64::NAN;
    if let Some(km) = diag.key_matrices {
        mspbe = if diag.pseudo_inverse {
            analysis::mspbe_pseudo(km, &state.theta)
        } else {
            analysis::mspbe(km, &state.theta)?
        };
        if let (Some(rate), Some(star)) = (diag.rate, diag.theta_star) {
            let omega_bar = km.omega_bar(&state.theta)?;
            let dtheta = (&state.theta - star).norm_squared();
            let domega = (&state.omega - omega_bar).norm_squared();
            d_t = rate.nu * dtheta + domega;
        }
        if let (Some(sys), Some(star)) = (diag.lyapunov, diag.theta_star) {
            let omega_star = DVector::zeros(state.theta.len());
            lyap =
                analysis::lyapunov_value(sys, km, &state.theta, &state.omega, star, &omega_star)?;
        }
        if let Some((r_theta, r_omega)) = diag.gap_radii {
            gap = primal_dual_gap(km, theta_avg, omega_avg, r_theta, r_omega)?;
        }
    }
    Ok(DiagnosticRecord {
        step: state.t,
        mspbe,
        d_t,
        lyapunov: lyap,
        gap_of_averages: gap,
        theta: state.theta.clone(),
        omega: state.omega.clone(),
    })
}
