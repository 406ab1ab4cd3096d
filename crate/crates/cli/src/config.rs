//! Run configuration: a JSON file, overridden field by field from the
//! command line.

use std::path::{Path, PathBuf};

use clap::Args;
use meta_bamdp::fit::SignConvention;
use meta_bamdp::meta::graph::DEFAULT_NODE_CAP;
use meta_bamdp::metrics::EnvKind;
use meta_bamdp::rational::{format_rational, int, parse_rational, to_f64, zero};
use meta_bamdp::{ApproxParams, Environment, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CACHE_DIR_ENV: &str = "META_BAMDP_CACHE_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct RunConfig {
    pub n_arms: usize,
    pub horizon: u32,
    /// `lo:hi:count` or a comma-separated list; exact decimals or `num/den`.
    pub costs: String,
    /// `uniform-mixture`, `symmetric:P`, `symmetric:lo:hi:count`, `grid:count`
    /// or `explicit:p1,p2;p1,p2`. Each command has its own default.
    pub env: Option<String>,
    pub k: usize,
    pub k_c: u32,
    pub d: u32,
    /// Monte-Carlo episodes per (cost, environment); 0 means exact values only.
    pub episodes: u64,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub cache_dir: Option<PathBuf>,
    pub fit: bool,
    pub sign_convention: String,
    pub max_horizon: Option<u32>,
    pub node_cap: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ApproxParams::default();
        RunConfig {
            n_arms: 2,
            horizon: 6,
            costs: "0:0.15:9".into(),
            env: None,
            k: p.k,
            k_c: p.k_c,
            d: p.d,
            episodes: 0,
            seed: 0,
            out_dir: PathBuf::from("out"),
            workers: 0,
            cache_dir: None,
            fit: false,
            sign_convention: "+1".into(),
            max_horizon: None,
            node_cap: DEFAULT_NODE_CAP,
        }
    }
}

/// Flags mirroring every [`RunConfig`] field.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_arms: Option<usize>,
    #[arg(long)]
    pub horizon: Option<u32>,
    /// Cost grid `lo:hi:count` or list `a,b,c`.
    #[arg(long, allow_hyphen_values = true)]
    pub costs: Option<String>,
    #[arg(long)]
    pub env: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub k_c: Option<u32>,
    #[arg(long)]
    pub d: Option<u32>,
    #[arg(long)]
    pub episodes: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, env = CACHE_DIR_ENV)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub fit: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub sign_convention: Option<String>,
    #[arg(long)]
    pub max_horizon: Option<u32>,
    #[arg(long)]
    pub node_cap: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// File (if any) then flags.
    pub fn from_overrides(o: &Overrides) -> CliResult<RunConfig> {
        let mut c = match &o.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = &o.$f { c.$f = v.clone(); } )* };
        }
        take!(n_arms, horizon, costs, k, k_c, d, episodes, seed, out_dir, workers, sign_convention, node_cap);
        if o.env.is_some() {
            c.env = o.env.clone();
        }
        if o.cache_dir.is_some() {
            c.cache_dir = o.cache_dir.clone();
        }
        if o.max_horizon.is_some() {
            c.max_horizon = o.max_horizon;
        }
        c.fit |= o.fit;
        Ok(c)
    }

    fn default_max_horizon(&self) -> u32 {
        if self.n_arms == 2 {
            12
        } else {
            9
        }
    }

    /// Checks every field and expands the grids. `default_env` applies when
    /// no environment was configured.
    pub fn resolve(&self, default_env: &str) -> CliResult<Resolved> {
        if self.n_arms < 2 {
            return Err(CliError::Config(format!("need at least 2 arms, got {}", self.n_arms)));
        }
        let max = self.max_horizon.unwrap_or_else(|| self.default_max_horizon());
        if self.horizon < 1 || self.horizon > max {
            return Err(CliError::Config(format!("horizon must be in 1..={max}, got {}", self.horizon)));
        }
        let params = ApproxParams::new(self.k, self.k_c, self.d)?;
        let costs = parse_costs(&self.costs)?;
        let env_text = self.env.clone().unwrap_or_else(|| default_env.to_string());
        let envs = EnvSet::parse(&env_text, self.n_arms)?;
        let sign: SignConvention = self.sign_convention.parse()?;
        if self.node_cap == 0 {
            return Err(CliError::Config("node-cap must be positive".into()));
        }
        let mut config = self.clone();
        config.env = Some(env_text);
        config.costs = costs.iter().map(format_rational).collect::<Vec<_>>().join(",");
        config.max_horizon = Some(max);
        let cache_dir = self.cache_dir.clone().unwrap_or_else(|| self.out_dir.join("cache"));
        config.cache_dir = Some(cache_dir.clone());
        Ok(Resolved { config, costs, envs, params, sign, cache_dir })
    }
}

/// A configuration after validation, with every grid expanded.
#[derive(Clone, Debug)]
pub struct Resolved {
    /// Canonical form: costs as an exact list, defaults filled in.
    pub config: RunConfig,
    pub costs: Vec<Rational>,
    pub envs: EnvSet,
    pub params: ApproxParams,
    pub sign: SignConvention,
    pub cache_dir: PathBuf,
}

impl Resolved {
    pub fn out_dir(&self) -> &Path {
        &self.config.out_dir
    }

    pub fn costs_f64(&self) -> Vec<f64> {
        self.costs.iter().map(to_f64).collect()
    }

    /// Writes `config.resolved.json` into the output directory.
    pub fn write_snapshot(&self, command: &str) -> CliResult<PathBuf> {
        std::fs::create_dir_all(self.out_dir())?;
        let path = self.out_dir().join("config.resolved.json");
        std::fs::write(&path, self.snapshot_text(command)? + "\n")?;
        Ok(path)
    }

    pub fn snapshot_text(&self, command: &str) -> CliResult<String> {
        let snapshot = Snapshot {
            command,
            code_version: meta_bamdp::meta::cache::code_version(),
            sign_convention: self.sign,
            config: &self.config,
        };
        Ok(serde_json::to_string_pretty(&snapshot)?)
    }
}

#[derive(Serialize)]
#[serde(rename_all = "kebab-case")]
struct Snapshot<'a> {
    command: &'a str,
    code_version: String,
    sign_convention: SignConvention,
    config: &'a RunConfig,
}

/// Parses `lo:hi:count` or `a,b,...` into exact costs.
pub fn parse_costs(s: &str) -> CliResult<Vec<Rational>> {
    let parts: Vec<&str> = s.split(':').collect();
    let costs = match parts.as_slice() {
        [lo, hi, count] => {
            let lo = parse_rational(lo)?;
            let hi = parse_rational(hi)?;
            let count: i64 = count
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad grid count in {s:?}")))?;
            if count < 1 {
                return Err(CliError::Config(format!("grid count must be >= 1 in {s:?}")));
            }
            if hi < lo {
                return Err(CliError::Config(format!("grid upper bound below lower bound in {s:?}")));
            }
            if count == 1 {
                vec![lo]
            } else {
                let step = (&hi - &lo) / int(count - 1);
                (0..count).map(|i| &lo + &step * int(i)).collect()
            }
        }
        [list] => list
            .split(',')
            .map(|x| parse_rational(x).map_err(CliError::from))
            .collect::<CliResult<Vec<_>>>()?,
        _ => return Err(CliError::Config(format!("bad cost spec {s:?}"))),
    };
    if costs.is_empty() {
        return Err(CliError::Config("empty cost list".into()));
    }
    if costs.iter().any(|c| *c < zero()) {
        return Err(CliError::Config("costs must be nonnegative".into()));
    }
    Ok(costs)
}

/// The environments a command runs against.
#[derive(Clone, Debug)]
pub enum EnvSet {
    /// Success probabilities drawn from the uniform prior.
    UniformMixture,
    Fixed { kind: EnvKind, envs: Vec<Environment> },
}

fn parse_prob(s: &str) -> CliResult<f64> {
    let p: f64 = s
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("bad probability {s:?}")))?;
    if !(0.0..=1.0).contains(&p) {
        return Err(CliError::Config(format!("probability {p} outside [0, 1]")));
    }
    Ok(p)
}

fn prob_grid(lo: &str, hi: &str, count: &str) -> CliResult<Vec<f64>> {
    let (lo, hi) = (parse_prob(lo)?, parse_prob(hi)?);
    let count: usize = count
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("bad grid count {count:?}")))?;
    match count {
        0 => Err(CliError::Config("grid count must be >= 1".into())),
        1 => Ok(vec![lo]),
        n => Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()),
    }
}

impl EnvSet {
    pub fn parse(s: &str, n_arms: usize) -> CliResult<EnvSet> {
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        let fixed = |kind, envs: Vec<Vec<f64>>| -> CliResult<EnvSet> {
            let envs = envs
                .into_iter()
                .map(|p| {
                    if p.len() != n_arms {
                        return Err(CliError::Config(format!(
                            "environment {p:?} has {} arms, expected {n_arms}",
                            p.len()
                        )));
                    }
                    Environment::new(p).map_err(CliError::from)
                })
                .collect::<CliResult<Vec<_>>>()?;
            Ok(EnvSet::Fixed { kind, envs })
        };
        match head {
            "uniform-mixture" if rest.is_empty() => Ok(EnvSet::UniformMixture),
            "symmetric" => {
                let parts: Vec<&str> = rest.split(':').collect();
                let ps = match parts.as_slice() {
                    [p] => vec![parse_prob(p)?],
                    [lo, hi, count] => prob_grid(lo, hi, count)?,
                    _ => return Err(CliError::Config(format!("bad symmetric spec {s:?}"))),
                };
                fixed(EnvKind::Symmetric, ps.into_iter().map(|p| vec![p; n_arms]).collect())
            }
            "grid" => {
                if n_arms != 2 {
                    return Err(CliError::Config("grid environments need 2 arms".into()));
                }
                let ps = prob_grid("0", "1", rest)?;
                let envs = ps.iter().flat_map(|&a| ps.iter().map(move |&b| vec![a, b])).collect();
                fixed(EnvKind::Explicit, envs)
            }
            "explicit" => {
                let envs = rest
                    .split(';')
                    .map(|e| e.split(',').map(parse_prob).collect::<CliResult<Vec<f64>>>())
                    .collect::<CliResult<Vec<_>>>()?;
                fixed(EnvKind::Explicit, envs)
            }
            _ => Err(CliError::Config(format!("bad environment spec {s:?}"))),
        }
    }

    pub fn kind(&self) -> EnvKind {
        match self {
            EnvSet::UniformMixture => EnvKind::UniformMixture,
            EnvSet::Fixed { kind, .. } => *kind,
        }
    }

    /// `None` stands for the prior mixture.
    pub fn points(&self) -> Vec<Option<&Environment>> {
        match self {
            EnvSet::UniformMixture => vec![None],
            EnvSet::Fixed { envs, .. } => envs.iter().map(Some).collect(),
        }
    }
}
