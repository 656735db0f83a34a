//! Finite MDP representation, policies, state-action pair enumeration, and
//! stationary distributions.
//!
//! All key-matrix work in this crate lives at the state-action level: the
//! transition operator, the stationary weighting, and the feature matrix are
//! all indexed by (state, action) pairs under one shared enumeration
//! ([`PairOrder`]). Types are immutable after construction and all
//! operations are pure.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

/// Tabular MDP: transition tensor p[s][a][s'], expected reward table R(s,a),
/// and discount factor.
#[derive(Debug, Clone)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    /// Flat [s][a][s'] layout.
    transition: Vec<f64>,
    /// Flat [s][a] layout.
    reward: Vec<f64>,
    gamma: f64,
    terminal: BTreeSet<usize>,
}

impl FiniteMdp {
    /// `transition` is flat [s][a][s'], `reward` flat [s][a].
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
        terminal: Option<BTreeSet<usize>>,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidGamma(gamma));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::DimensionMismatch {
                context: "FiniteMdp transition tensor",
                expected: n_states * n_actions * n_states,
                got: transition.len(),
            });
        }
        if reward.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch {
                context: "FiniteMdp reward table",
                expected: n_states * n_actions,
                got: reward.len(),
            });
        }
        for s in 0..n_states {
            for a in 0..n_actions {
                let row = &transition[(s * n_actions + a) * n_states..][..n_states];
                if let Some(&bad) = row.iter().find(|&&p| p < 0.0) {
                    return Err(Error::NegativeProbability {
                        context: "FiniteMdp transition tensor",
                        row: s * n_actions + a,
                        value: bad,
                    });
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::NotADistribution {
                        context: "FiniteMdp transition tensor",
                        row: s * n_actions + a,
                        sum,
                        tol: ROW_SUM_TOL,
                    });
                }
            }
        }
        let terminal = terminal.unwrap_or_default();
        if let Some(&s) = terminal.iter().find(|&&s| s >= n_states) {
            return Err(Error::DimensionMismatch {
                context: "FiniteMdp terminal state index",
                expected: n_states,
                got: s,
            });
        }
        Ok(Self {
            n_states,
            n_actions,
            transition,
            reward,
            gamma,
            terminal,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn transition_prob(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.transition[(s * self.n_actions + a) * self.n_states + s_next]
    }

    pub fn expected_reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal.contains(&s)
    }

    /// Expected-reward vector over pairs in the given enumeration.
    pub fn reward_vector(&self, order: &PairOrder) -> DVector<f64> {
        DVector::from_fn(order.len(), |i, _| {
            let (s, a) = order.pair_at(i);
            self.expected_reward(s, a)
        })
    }
}

/// Table policy pi(a|s); one distribution per state.
#[derive(Debug, Clone)]
pub struct Policy {
    probs: DMatrix<f64>, // n_states x n_actions
}

impl Policy {
    pub fn new(probs: DMatrix<f64>) -> Result<Self> {
        for s in 0..probs.nrows() {
            let mut sum = 0.0;
            for a in 0..probs.ncols() {
                let p = probs[(s, a)];
                if p < 0.0 {
                    return Err(Error::NegativeProbability {
                        context: "Policy table",
                        row: s,
                        value: p,
                    });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NotADistribution {
                    context: "Policy table",
                    row: s,
                    sum,
                    tol: ROW_SUM_TOL,
                });
            }
        }
        Ok(Self { probs })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_states = rows.len();
        let n_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_actions) {
            return Err(Error::DimensionMismatch {
                context: "Policy rows",
                expected: n_actions,
                got: rows
                    .iter()
                    .map(Vec::len)
                    .find(|&l| l != n_actions)
                    .unwrap_or(0),
            });
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Self::new(DMatrix::from_row_slice(n_states, n_actions, &flat))
    }

    /// Same distribution in every state.
    pub fn stationary_rows(n_states: usize, row: &[f64]) -> Result<Self> {
        Self::from_rows(vec![row.to_vec(); n_states])
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            probs: DMatrix::from_element(n_states, n_actions, 1.0 / n_actions as f64),
        }
    }

    pub fn n_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.ncols()
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[(s, a)]
    }
}

/// Coverage predicate: every action the target policy can take, the behavior
/// policy can take too (pi(a|s) > 0 implies mu(a|s) > 0).
pub fn coverage_check(pi: &Policy, mu: &Policy) -> bool {
    debug_assert_eq!(pi.n_states(), mu.n_states());
    debug_assert_eq!(pi.n_actions(), mu.n_actions());
    for s in 0..pi.n_states() {
        for a in 0..pi.n_actions() {
            if pi.prob(s, a) > 0.0 && mu.prob(s, a) == 0.0 {
                return false;
            }
        }
    }
    true
}

/// Like [`coverage_check`] but reports the first violating pair.
pub fn require_coverage(pi: &Policy, mu: &Policy) -> Result<()> {
    for s in 0..pi.n_states() {
        for a in 0..pi.n_actions() {
            if pi.prob(s, a) > 0.0 && mu.prob(s, a) == 0.0 {
                return Err(Error::CoverageViolation {
                    state: s,
                    action: a,
                    pi: pi.prob(s, a),
                });
            }
        }
    }
    Ok(())
}

/// Fixed enumeration of (state, action) pairs.
///
/// The canonical order is row-major over (state, action); environments that
/// document a different row order (to match a published matrix layout)
/// install it with [`PairOrder::from_rows`]. Every matrix-valued operation
/// in this crate indexes rows and columns by one `PairOrder`, so mixing
/// enumerations is a construction-time error rather than a silent transpose.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairOrder {
    n_states: usize,
    n_actions: usize,
    rows: Vec<(usize, usize)>,
    /// inverse[s * n_actions + a] = row index
    inverse: Vec<usize>,
}

impl PairOrder {
    pub fn canonical(n_states: usize, n_actions: usize) -> Self {
        let rows: Vec<(usize, usize)> = (0..n_states)
            .flat_map(|s| (0..n_actions).map(move |a| (s, a)))
            .collect();
        Self::from_rows(n_states, n_actions, rows).expect("canonical order is a permutation")
    }

    pub fn from_rows(n_states: usize, n_actions: usize, rows: Vec<(usize, usize)>) -> Result<Self> {
        let n = n_states * n_actions;
        if rows.len() != n {
            return Err(Error::DimensionMismatch {
                context: "PairOrder rows",
                expected: n,
                got: rows.len(),
            });
        }
        let mut inverse = vec![usize::MAX; n];
        for (i, &(s, a)) in rows.iter().enumerate() {
            if s >= n_states || a >= n_actions {
                return Err(Error::DimensionMismatch {
                    context: "PairOrder pair index",
                    expected: n,
                    got: s * n_actions + a,
                });
            }
            let flat = s * n_actions + a;
            if inverse[flat] != usize::MAX {
                return Err(Error::InvalidConfig(format!(
                    "pair ({s},{a}) appears twice in the pair ordering"
                )));
            }
            inverse[flat] = i;
        }
        Ok(Self {
            n_states,
            n_actions,
            rows,
            inverse,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn pair_at(&self, row: usize) -> (usize, usize) {
        self.rows[row]
    }

    pub fn row_of(&self, s: usize, a: usize) -> usize {
        self.inverse[s * self.n_actions + a]
    }
}

/// State-action-level transition operator under a target policy:
/// `P[(s,a),(s',a')] = p(s'|s,a) * pi(a'|s')`, rows and columns in `order`.
pub fn state_action_transition(
    mdp: &FiniteMdp,
    pi: &Policy,
    order: &PairOrder,
) -> Result<DMatrix<f64>> {
    check_shapes(mdp, pi, order)?;
    let n = order.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let (s, a) = order.pair_at(i);
        for j in 0..n {
            let (s2, a2) = order.pair_at(j);
            m[(i, j)] = mdp.transition_prob(s, a, s2) * pi.prob(s2, a2);
        }
    }
    Ok(m)
}

fn check_shapes(mdp: &FiniteMdp, pi: &Policy, order: &PairOrder) -> Result<()> {
    if pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions() {
        return Err(Error::DimensionMismatch {
            context: "policy vs MDP",
            expected: mdp.n_states() * mdp.n_actions(),
            got: pi.n_states() * pi.n_actions(),
        });
    }
    if order.n_states() != mdp.n_states() || order.n_actions() != mdp.n_actions() {
        return Err(Error::DimensionMismatch {
            context: "pair order vs MDP",
            expected: mdp.n_states() * mdp.n_actions(),
            got: order.len(),
        });
    }
    Ok(())
}

/// Stationary distribution over state-action pairs together with its
/// diagonal matrix form.
#[derive(Debug, Clone)]
pub struct StationaryDistribution {
    xi: DVector<f64>,
}

impl StationaryDistribution {
    pub fn xi(&self) -> &DVector<f64> {
        &self.xi
    }

    pub fn xi_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.xi)
    }
}

const STATIONARY_POWER_TOL: f64 = 1e-12;
const STATIONARY_MAX_ITERS: usize = 1_000_000;
const STATIONARY_FIXED_POINT_TOL: f64 = 1e-8;

/// Stationary distribution of the state-action chain under the behavior
/// policy.
///
/// Power iteration from the uniform start (tolerance 1e-12, at most 10^6
/// sweeps) with a dense linear solve as fallback for chains the power
/// method cannot settle (for example periodic ones). A result with any
/// non-positive mass, or a residual above 1e-8, is rejected as non-ergodic.
pub fn stationary_distribution(
    mdp: &FiniteMdp,
    mu: &Policy,
    order: &PairOrder,
) -> Result<StationaryDistribution> {
    let p_mu = state_action_transition(mdp, mu, order)?;
    if !irreducible(&p_mu) {
        return Err(Error::NonErgodic(
            "the state-action chain under the behavior policy is reducible".into(),
        ));
    }
    let n = order.len();
    let mut xi = DVector::from_element(n, 1.0 / n as f64);
    let mut converged = false;
    for _ in 0..STATIONARY_MAX_ITERS {
        let next = p_mu.tr_mul(&xi);
        let diff = (&next - &xi).amax();
        xi = next;
        if diff < STATIONARY_POWER_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        xi = stationary_by_solve(&p_mu)?;
    }
    let mass: f64 = xi.sum();
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::NonErgodic(format!(
            "stationary mass {mass} not 1 within 1e-10"
        )));
    }
    if xi.min() <= 0.0 {
        return Err(Error::NonErgodic(format!(
            "stationary distribution has a non-positive entry {:.3e}; some pair is unreachable under the behavior policy",
            xi.min()
        )));
    }
    let residual = (p_mu.tr_mul(&xi) - &xi).amax();
    if residual > STATIONARY_FIXED_POINT_TOL {
        return Err(Error::NonErgodic(format!(
            "power iteration residual {residual:.3e} exceeds {STATIONARY_FIXED_POINT_TOL:.1e}"
        )));
    }
    Ok(StationaryDistribution { xi })
}

/// One communicating class: every pair reaches every pair along positive-
/// probability edges. Reducible chains have no unique stationary law, even
/// when the power iteration happens to sit still at a symmetric start.
fn irreducible(p: &DMatrix<f64>) -> bool {
    let reaches_all = |forward: bool| {
        let n = p.nrows();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let edge = if forward { p[(i, j)] } else { p[(j, i)] };
                if edge > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|x| x)
    };
    reaches_all(true) && reaches_all(false)
}

/// Dense fallback: the eigenvalue-1 left eigenvector via a bordered solve of
/// (P' - I) xi = 0 with the normalization row sum(xi) = 1 replacing the last
/// equation.
fn stationary_by_solve(p_mu: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p_mu.nrows();
    let mut sys = p_mu.transpose() - DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::zeros(n);
    for j in 0..n {
        sys[(n - 1, j)] = 1.0;
    }
    rhs[n - 1] = 1.0;
    sys.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NonErgodic("bordered stationary solve is singular".into()))
}
