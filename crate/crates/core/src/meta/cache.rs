//! Content-addressed on-disk cache of solved meta-policies.
//!
//! Each file holds the policy restricted to the states it visits, with
//! canonical text keys and exact `num/den` values, plus a checksum over the
//! body. Writes go through a temporary file and a rename.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rational::{format_rational, parse_rational, Rational};

use super::solve::{MetaPolicy, MetaValueTable};
use super::{ApproxParams, MetaAction, MetaState};

const FORMAT: &str = "meta-bamdp-policy/1";

pub fn code_version() -> String {
    format!("{}+{}", env!("CARGO_PKG_VERSION"), FORMAT)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
struct Entry {
    state: String,
    action: String,
    value: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CacheFile {
    format: String,
    code_version: String,
    n_arms: usize,
    horizon: u32,
    cost: String,
    params: ApproxParams,
    root_value: String,
    entries: Vec<Entry>,
    checksum: String,
}

impl CacheFile {
    fn body_digest(&self) -> Result<String> {
        let mut body = self.clone();
        body.checksum = String::new();
        let bytes = serde_json::to_vec(&body)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}

#[derive(Debug)]
pub enum CacheLookup {
    Hit(MetaPolicy, MetaValueTable),
    Miss,
    /// The file exists but failed its integrity check; the reason is given.
    Corrupt(String),
}

#[derive(Clone, Debug)]
pub struct PolicyCache {
    dir: PathBuf,
}

/// Cache key: SHA-256 over the problem, cost, bounds and code version.
pub fn cache_key(n_arms: usize, horizon: u32, c: &Rational, params: &ApproxParams) -> String {
    let text = format!(
        "N={n_arms};T={horizon};c={};{params};v={}",
        format_rational(c),
        code_version()
    );
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl PolicyCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(PolicyCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn load(
        &self,
        n_arms: usize,
        horizon: u32,
        c: &Rational,
        params: &ApproxParams,
    ) -> CacheLookup {
        let path = self.path_for(&cache_key(n_arms, horizon, c, params));
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return CacheLookup::Miss,
            Err(e) => return CacheLookup::Corrupt(e.to_string()),
        };
        match decode(&text, n_arms, horizon, c, params) {
            Ok((p, v)) => CacheLookup::Hit(p, v),
            Err(e) => CacheLookup::Corrupt(format!("{}: {e}", path.display())),
        }
    }

    /// Stores the reachable part of `policy` and returns the file path.
    pub fn store(&self, policy: &MetaPolicy, values: &MetaValueTable) -> Result<PathBuf> {
        let reachable = policy.reachable_states()?;
        let mut entries: Vec<Entry> = reachable
            .iter()
            .map(|s| {
                let v = values
                    .values
                    .get(s)
                    .ok_or_else(|| Error::MissingPolicyState(s.key()))?;
                Ok(Entry {
                    state: s.key(),
                    action: policy.action(s)?.key(),
                    value: format_rational(v),
                })
            })
            .collect::<Result<_>>()?;
        entries.sort_by(|a, b| a.state.cmp(&b.state));
        let mut file = CacheFile {
            format: FORMAT.to_string(),
            code_version: code_version(),
            n_arms: policy.n_arms,
            horizon: policy.horizon,
            cost: format_rational(&policy.cost),
            params: policy.params,
            root_value: format_rational(&values.root_value),
            entries,
            checksum: String::new(),
        };
        file.checksum = file.body_digest()?;
        let key = cache_key(policy.n_arms, policy.horizon, &policy.cost, &policy.params);
        let path = self.path_for(&key);
        let mut tmp = tempfile_in(&self.dir, &key)?;
        tmp.1.write_all(serde_json::to_string_pretty(&file)?.as_bytes())?;
        tmp.1.sync_all()?;
        drop(tmp.1);
        fs::rename(&tmp.0, &path)?;
        Ok(path)
    }
}

fn tempfile_in(dir: &Path, key: &str) -> Result<(PathBuf, fs::File)> {
    let path = dir.join(format!(".{key}.{}.tmp", std::process::id()));
    let f = fs::File::create(&path)?;
    Ok((path, f))
}

fn decode(
    text: &str,
    n_arms: usize,
    horizon: u32,
    c: &Rational,
    params: &ApproxParams,
) -> Result<(MetaPolicy, MetaValueTable)> {
    let file: CacheFile = serde_json::from_str(text)?;
    if file.checksum != file.body_digest()? {
        return Err(Error::Parse("checksum mismatch".into()));
    }
    if file.format != FORMAT || file.code_version != code_version() {
        return Err(Error::Parse(format!("unsupported cache format {}", file.format)));
    }
    if file.n_arms != n_arms
        || file.horizon != horizon
        || parse_rational(&file.cost)? != *c
        || file.params != *params
    {
        return Err(Error::Parse("cache entry is for a different problem".into()));
    }
    let mut actions = HashMap::with_capacity(file.entries.len());
    let mut values = HashMap::with_capacity(file.entries.len());
    for e in &file.entries {
        let s = MetaState::parse_key(&e.state)?;
        actions.insert(s.clone(), MetaAction::parse_key(&e.action)?);
        values.insert(s, parse_rational(&e.value)?);
    }
    let policy = MetaPolicy { n_arms, horizon, cost: c.clone(), params: *params, actions };
    let root_value = parse_rational(&file.root_value)?;
    Ok((policy, MetaValueTable { values, root_value }))
}
