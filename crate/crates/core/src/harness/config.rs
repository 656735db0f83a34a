//! Plain-text key-value file formats: MDP descriptions and experiment
//! configs.
//!
//! Both formats share the same line grammar: `#` starts a comment, blank
//! lines are ignored, and every other line is `key [args...] = value...`.
//!
//! MDP file keys:
//!
//! ```text
//! schema_version = 1
//! n_states = 2
//! n_actions = 2
//! gamma = 0.9
//! transition <s> <a> = p(s'=0) p(s'=1) ...
//! reward <s> <a> = r                       # optional, default 0
//! policy <name> <s> = p(a=0) p(a=1) ...
//! feature <s> <a> = f_1 ... f_p            # optional, default tabular
//! order = s:a s:a ...                      # optional pair enumeration
//! ```
//!
//! Experiment config keys: see [`parse_config`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::envs::{BairdStarSpec, MountainCarSpec, TwoStateSpec};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::mdp::{FiniteMdp, PairOrder, Policy};

use super::{EnvChoice, ExperimentConfig};
use crate::learners::ScheduleSpec;

/// Parsed MDP file: the MDP, its named policies, and the feature map
/// (tabular identity when the file declares none).
#[derive(Debug)]
pub struct MdpFile {
    pub mdp: FiniteMdp,
    pub policies: BTreeMap<String, Policy>,
    pub features: FeatureMap,
}

impl MdpFile {
    pub fn policy(&self, name: &str) -> Result<&Policy> {
        self.policies.get(name).ok_or_else(|| {
            Error::InvalidConfig(format!("no policy named `{name}` in the MDP file"))
        })
    }
}

struct ErrCtx {
    file: String,
}

impl ErrCtx {
    fn new(file: &Path) -> Self {
        Self {
            file: file.display().to_string(),
        }
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            file: self.file.clone(),
            line: line + 1,
            msg: msg.into(),
        }
    }
}

/// Split one content line into (key tokens, value string).
fn split_line(line: &str) -> Option<(Vec<&str>, &str)> {
    let line = line.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return None;
    }
    let (key, value) = line.split_once('=')?;
    Some((key.split_whitespace().collect(), value.trim()))
}

fn parse_floats(value: &str) -> std::result::Result<Vec<f64>, String> {
    value
        .split([' ', ',', '\t'])
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| format!("bad number `{t}`: {e}"))
        })
        .collect()
}

pub fn parse_mdp_file(path: &Path) -> Result<MdpFile> {
    let text = std::fs::read_to_string(path)?;
    parse_mdp_text(path, &text)
}

fn parse_mdp_text(path: &Path, text: &str) -> Result<MdpFile> {
    let ctx = ErrCtx::new(path);
    let mut n_states = None;
    let mut n_actions = None;
    let mut gamma = None;
    let mut transitions: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    let mut rewards: Vec<(usize, usize, f64)> = Vec::new();
    let mut policies: BTreeMap<String, Vec<(usize, Vec<f64>)>> = BTreeMap::new();
    let mut feature_rows: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    let mut order_rows: Option<Vec<(usize, usize)>> = None;

    for (i, raw) in text.lines().enumerate() {
        let Some((key, value)) = split_line(raw) else {
            continue;
        };
        match key.as_slice() {
            ["schema_version"] => {
                if value.trim() != "1" {
                    return Err(ctx.err(i, format!("unsupported schema_version {value}")));
                }
            }
            ["n_states"] => {
                n_states = Some(
                    value
                        .parse::<usize>()
                        .map_err(|e| ctx.err(i, e.to_string()))?,
                )
            }
            ["n_actions"] => {
                n_actions = Some(
                    value
                        .parse::<usize>()
                        .map_err(|e| ctx.err(i, e.to_string()))?,
                )
            }
            ["gamma"] => {
                gamma = Some(
                    value
                        .parse::<f64>()
                        .map_err(|e| ctx.err(i, e.to_string()))?,
                )
            }
            ["transition", s, a] => {
                let s = s.parse().map_err(|_| ctx.err(i, "bad state index"))?;
                let a = a.parse().map_err(|_| ctx.err(i, "bad action index"))?;
                transitions.push((s, a, parse_floats(value).map_err(|e| ctx.err(i, e))?));
            }
            ["reward", s, a] => {
                let s = s.parse().map_err(|_| ctx.err(i, "bad state index"))?;
                let a = a.parse().map_err(|_| ctx.err(i, "bad action index"))?;
                let vals = parse_floats(value).map_err(|e| ctx.err(i, e))?;
                if vals.len() != 1 {
                    return Err(ctx.err(i, "reward takes exactly one value"));
                }
                rewards.push((s, a, vals[0]));
            }
            ["policy", name, s] => {
                let s = s.parse().map_err(|_| ctx.err(i, "bad state index"))?;
                policies
                    .entry((*name).to_string())
                    .or_default()
                    .push((s, parse_floats(value).map_err(|e| ctx.err(i, e))?));
            }
            ["feature", s, a] => {
                let s = s.parse().map_err(|_| ctx.err(i, "bad state index"))?;
                let a = a.parse().map_err(|_| ctx.err(i, "bad action index"))?;
                feature_rows.push((s, a, parse_floats(value).map_err(|e| ctx.err(i, e))?));
            }
            ["order"] => {
                let mut rows = Vec::new();
                for token in value.split_whitespace() {
                    let (s, a) = token.split_once(':').ok_or_else(|| {
                        ctx.err(i, format!("bad order token `{token}`, want s:a"))
                    })?;
                    rows.push((
                        s.parse().map_err(|_| ctx.err(i, "bad state index"))?,
                        a.parse().map_err(|_| ctx.err(i, "bad action index"))?,
                    ));
                }
                order_rows = Some(rows);
            }
            other => return Err(ctx.err(i, format!("unknown key `{}`", other.join(" ")))),
        }
    }

    let n_states = n_states.ok_or_else(|| missing(path, "n_states"))?;
    let n_actions = n_actions.ok_or_else(|| missing(path, "n_actions"))?;
    let gamma = gamma.ok_or_else(|| missing(path, "gamma"))?;

    let mut tensor = vec![0.0; n_states * n_actions * n_states];
    let mut seen = vec![false; n_states * n_actions];
    for (s, a, row) in transitions {
        if s >= n_states || a >= n_actions || row.len() != n_states {
            return Err(Error::InvalidConfig(format!(
                "transition {s} {a} has wrong shape or indices"
            )));
        }
        seen[s * n_actions + a] = true;
        tensor[(s * n_actions + a) * n_states..][..n_states].copy_from_slice(&row);
    }
    if let Some(flat) = seen.iter().position(|&x| !x) {
        return Err(Error::InvalidConfig(format!(
            "missing transition row for state {} action {}",
            flat / n_actions,
            flat % n_actions
        )));
    }
    let mut reward_table = vec![0.0; n_states * n_actions];
    for (s, a, r) in rewards {
        if s >= n_states || a >= n_actions {
            return Err(Error::InvalidConfig(format!("reward {s} {a} out of range")));
        }
        reward_table[s * n_actions + a] = r;
    }
    let mdp = FiniteMdp::new(n_states, n_actions, tensor, reward_table, gamma, None)?;

    let mut built_policies = BTreeMap::new();
    for (name, rows) in policies {
        let mut table = vec![None; n_states];
        for (s, row) in rows {
            if s >= n_states || row.len() != n_actions {
                return Err(Error::InvalidConfig(format!(
                    "policy {name} row {s} has wrong shape"
                )));
            }
            table[s] = Some(row);
        }
        let rows: Option<Vec<Vec<f64>>> = table.into_iter().collect();
        let rows = rows
            .ok_or_else(|| Error::InvalidConfig(format!("policy {name} is missing a state row")))?;
        built_policies.insert(name, Policy::from_rows(rows)?);
    }

    let order = match order_rows {
        Some(rows) => PairOrder::from_rows(n_states, n_actions, rows)?,
        None => PairOrder::canonical(n_states, n_actions),
    };
    let features = if feature_rows.is_empty() {
        FeatureMap::identity(order)
    } else {
        let p = feature_rows[0].2.len();
        let mut matrix = DMatrix::zeros(order.len(), p);
        let mut seen = vec![false; order.len()];
        for (s, a, row) in feature_rows {
            if s >= n_states || a >= n_actions || row.len() != p {
                return Err(Error::InvalidConfig(format!(
                    "feature {s} {a} has wrong shape"
                )));
            }
            let idx = order.row_of(s, a);
            seen[idx] = true;
            matrix.row_mut(idx).copy_from_slice(&row);
        }
        if let Some(flat) = seen.iter().position(|&x| !x) {
            let (s, a) = order.pair_at(flat);
            return Err(Error::InvalidConfig(format!(
                "missing feature row for pair ({s},{a})"
            )));
        }
        FeatureMap::new(order, matrix, None)?
    };

    Ok(MdpFile {
        mdp,
        policies: built_policies,
        features,
    })
}

fn missing(path: &Path, key: &str) -> Error {
    Error::InvalidConfig(format!("{}: missing required key `{key}`", path.display()))
}

/// Write a tabular environment in the MDP file format.
pub fn write_mdp_file(
    path: &Path,
    mdp: &FiniteMdp,
    policies: &[(&str, &Policy)],
    features: &FeatureMap,
) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::from("schema_version = 1\n");
    let _ = writeln!(out, "n_states = {}", mdp.n_states());
    let _ = writeln!(out, "n_actions = {}", mdp.n_actions());
    let _ = writeln!(out, "gamma = {}", mdp.gamma());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let row: Vec<String> = (0..mdp.n_states())
                .map(|s2| format!("{}", mdp.transition_prob(s, a, s2)))
                .collect();
            let _ = writeln!(out, "transition {s} {a} = {}", row.join(" "));
        }
    }
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let r = mdp.expected_reward(s, a);
            if r != 0.0 {
                let _ = writeln!(out, "reward {s} {a} = {r}");
            }
        }
    }
    for (name, policy) in policies {
        for s in 0..policy.n_states() {
            let row: Vec<String> = (0..policy.n_actions())
                .map(|a| format!("{}", policy.prob(s, a)))
                .collect();
            let _ = writeln!(out, "policy {name} {s} = {}", row.join(" "));
        }
    }
    let order = features.order();
    let tokens: Vec<String> = (0..order.len())
        .map(|i| {
            let (s, a) = order.pair_at(i);
            format!("{s}:{a}")
        })
        .collect();
    let _ = writeln!(out, "order = {}", tokens.join(" "));
    for i in 0..order.len() {
        let (s, a) = order.pair_at(i);
        let row: Vec<String> = features
            .matrix()
            .row(i)
            .iter()
            .map(|x| format!("{x}"))
            .collect();
        let _ = writeln!(out, "feature {s} {a} = {}", row.join(" "));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parse an experiment config file. Keys:
///
/// ```text
/// schema_version = 1
/// environment = two-state | baird | mountain-car
/// gamma = 0.9                      # optional override
/// lambda = 0.5                     # optional, default per environment
/// rewards = 1,0,0,0                # two-state only
/// episode_len = 20                 # tabular environments
/// schedule = constant alpha=0.05 beta=0.05
///          | inverse-sqrt alpha0=0.1 beta0=0.1
///          | theorem2
///          | appendix-e C=5
/// grid_alpha = -10..0              # or comma list of exponents
/// grid_ratio = -10..0
/// n_runs = 5
/// n_episodes = 5000
/// base_seed = 1
/// stride = 1000
/// out_dir = results
/// init_theta = 1,0                 # optional
/// mse_rollouts = 0
/// mse_horizon = 200                # optional
/// emit_plots = true
/// estimation_episodes = 5000
/// ```
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_text(path, &text)
}

fn parse_config_text(path: &Path, text: &str) -> Result<ExperimentConfig> {
    let ctx = ErrCtx::new(path);
    let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let Some((key, value)) = split_line(raw) else {
            continue;
        };
        kv.insert(key.join(" "), (i, value.to_string()));
    }
    let take = |kv: &mut BTreeMap<String, (usize, String)>, key: &str| kv.remove(key);

    if let Some((i, v)) = take(&mut kv, "schema_version") {
        if v.trim() != "1" {
            return Err(ctx.err(i, format!("unsupported schema_version {v}")));
        }
    }
    let (env_line, env_name) =
        take(&mut kv, "environment").ok_or_else(|| missing(path, "environment"))?;
    let gamma_override = match take(&mut kv, "gamma") {
        Some((i, v)) => Some(v.parse::<f64>().map_err(|e| ctx.err(i, e.to_string()))?),
        None => None,
    };
    let lambda_override = match take(&mut kv, "lambda") {
        Some((i, v)) => Some(v.parse::<f64>().map_err(|e| ctx.err(i, e.to_string()))?),
        None => None,
    };
    let rewards = match take(&mut kv, "rewards") {
        Some((i, v)) => Some(parse_floats(&v).map_err(|e| ctx.err(i, e))?),
        None => None,
    };
    let episode_len = match take(&mut kv, "episode_len") {
        Some((i, v)) => Some(v.parse::<usize>().map_err(|e| ctx.err(i, e.to_string()))?),
        None => None,
    };

    let environment = match env_name.as_str() {
        "two-state" => {
            let mut spec = TwoStateSpec::new(
                gamma_override.unwrap_or(0.99),
                lambda_override.unwrap_or(0.99),
            );
            if let Some(r) = &rewards {
                if r.len() != 4 {
                    return Err(ctx.err(env_line, "two-state rewards need 4 values"));
                }
                spec.rewards = [r[0], r[1], r[2], r[3]];
            }
            if let Some(len) = episode_len {
                spec.episode_len = len;
            }
            EnvChoice::TwoState(spec)
        }
        "baird" => {
            let mut spec = BairdStarSpec::default();
            if let Some(g) = gamma_override {
                spec.gamma = g;
            }
            if let Some(l) = lambda_override {
                spec.lambda = l;
            }
            if let Some(len) = episode_len {
                spec.episode_len = len;
            }
            EnvChoice::Baird(spec)
        }
        "mountain-car" => {
            let mut spec = MountainCarSpec::default();
            if let Some(g) = gamma_override {
                spec.gamma = g;
            }
            if let Some(l) = lambda_override {
                spec.lambda = l;
            }
            EnvChoice::MountainCar(spec)
        }
        other => return Err(Error::UnknownEnvironment(other.to_string())),
    };

    let mut config = ExperimentConfig::new(environment);
    if let Some(l) = lambda_override {
        config.lambda = l;
    }

    if let Some((i, v)) = take(&mut kv, "schedule") {
        config.schedule = parse_schedule(&v).map_err(|e| ctx.err(i, e))?;
    }
    if let Some((i, v)) = take(&mut kv, "grid_alpha") {
        config.grid_alpha_exponents = parse_exponents(&v).map_err(|e| ctx.err(i, e))?;
    }
    if let Some((i, v)) = take(&mut kv, "grid_ratio") {
        config.grid_ratio_exponents = parse_exponents(&v).map_err(|e| ctx.err(i, e))?;
    }
    macro_rules! int_key {
        ($key:literal, $field:ident) => {
            if let Some((i, v)) = take(&mut kv, $key) {
                config.$field = v
                    .parse()
                    .map_err(|e: std::num::ParseIntError| ctx.err(i, e.to_string()))?;
            }
        };
    }
    int_key!("n_runs", n_runs);
    int_key!("n_episodes", n_episodes);
    int_key!("base_seed", base_seed);
    int_key!("stride", stride);
    int_key!("mse_rollouts", mse_rollouts);
    int_key!("estimation_episodes", estimation_episodes);
    if let Some((i, v)) = take(&mut kv, "mse_horizon") {
        config.mse_horizon = Some(
            v.parse()
                .map_err(|e: std::num::ParseIntError| ctx.err(i, e.to_string()))?,
        );
    }
    if let Some((_, v)) = take(&mut kv, "out_dir") {
        config.out_dir = PathBuf::from(v);
    }
    if let Some((i, v)) = take(&mut kv, "init_theta") {
        config.init_theta = Some(parse_floats(&v).map_err(|e| ctx.err(i, e))?);
    }
    if let Some((i, v)) = take(&mut kv, "emit_plots") {
        config.emit_plots = v
            .parse()
            .map_err(|e: std::str::ParseBoolError| ctx.err(i, e.to_string()))?;
    }
    if let Some(env_dir) = std::env::var_os(super::OUT_DIR_ENV) {
        config.out_dir = PathBuf::from(env_dir);
    }
    if let Some((key, (i, _))) = kv.into_iter().next() {
        return Err(ctx.err(i, format!("unknown key `{key}`")));
    }
    Ok(config)
}

fn parse_schedule(value: &str) -> std::result::Result<ScheduleSpec, String> {
    let mut tokens = value.split_whitespace();
    let kind = tokens.next().ok_or("empty schedule")?;
    let mut params: BTreeMap<&str, f64> = BTreeMap::new();
    for t in tokens {
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| format!("bad schedule token `{t}`"))?;
        params.insert(
            k,
            v.parse()
                .map_err(|e| format!("bad schedule value `{v}`: {e}"))?,
        );
    }
    let get = |params: &BTreeMap<&str, f64>, k: &str| {
        params
            .get(k)
            .copied()
            .ok_or_else(|| format!("schedule `{kind}` needs `{k}=`"))
    };
    match kind {
        "constant" => Ok(ScheduleSpec::Constant {
            alpha: get(&params, "alpha")?,
            beta: get(&params, "beta")?,
        }),
        "inverse-sqrt" => Ok(ScheduleSpec::InverseSqrt {
            alpha0: get(&params, "alpha0")?,
            beta0: get(&params, "beta0")?,
        }),
        "theorem2" => Ok(ScheduleSpec::Theorem2),
        "appendix-e" => Ok(ScheduleSpec::AppendixE {
            c: get(&params, "C")?,
        }),
        other => Err(format!("unknown schedule kind `{other}`")),
    }
}

/// Exponent grids: either `lo..hi` (inclusive) or a comma list.
fn parse_exponents(value: &str) -> std::result::Result<Vec<i32>, String> {
    if let Some((lo, hi)) = value.split_once("..") {
        let lo: i32 = lo
            .trim()
            .parse()
            .map_err(|e| format!("bad exponent `{lo}`: {e}"))?;
        let hi: i32 = hi
            .trim()
            .parse()
            .map_err(|e| format!("bad exponent `{hi}`: {e}"))?;
        if lo > hi {
            return Err(format!("empty exponent range {lo}..{hi}"));
        }
        Ok((lo..=hi).collect())
    } else {
        value
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<i32>()
                    .map_err(|e| format!("bad exponent `{t}`: {e}"))
            })
            .collect()
    }
}
