pub mod fit;
pub mod sensitivity;
pub mod solve;
pub mod sweep;
pub mod validate;

use std::fs;
use std::path::Path;

use meta_bamdp::meta::cache::PolicyCache;

use crate::config::Resolved;
use crate::error::CliResult;
use crate::policies::PolicySource;

pub fn policy_source(r: &Resolved) -> CliResult<PolicySource> {
    let cache = PolicyCache::new(&r.cache_dir)?;
    let c = &r.config;
    PolicySource::new(c.n_arms, c.horizon, r.params, c.node_cap, cache)
}

/// Writes through a temporary file so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Seed for the Monte-Carlo runs at environment `index`; shared by every
/// cost so neighboring grid points see the same random numbers.
pub fn env_seed(master: u64, index: usize) -> u64 {
    master ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}
