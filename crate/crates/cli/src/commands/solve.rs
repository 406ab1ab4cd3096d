use meta_bamdp::meta::cache::cache_key;
use meta_bamdp::rational::format_rational;
use serde::Serialize;

use super::{policy_source, write_atomic};
use crate::config::Resolved;
use crate::error::CliResult;
use crate::policies::CacheStats;

#[derive(Serialize)]
struct Entry {
    c: String,
    key: String,
    meta_value: String,
}

#[derive(Serialize)]
struct Report {
    entries: Vec<Entry>,
    #[serde(flatten)]
    stats: CacheStats,
}

pub fn run(r: &Resolved) -> CliResult<()> {
    r.write_snapshot("solve")?;
    let mut src = policy_source(r)?;
    let mut entries = Vec::new();
    for c in &r.costs {
        let (_, values) = src.get(c)?;
        entries.push(Entry {
            c: format_rational(c),
            key: cache_key(src.n_arms, src.horizon, c, &src.params),
            meta_value: format_rational(&values.root_value),
        });
    }
    let report = Report { entries, stats: src.stats };
    write_atomic(&r.out_dir().join("solve.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    println!(
        "{} policies: {} solved, {} cache hits, {} corrupt entries replaced",
        report.entries.len(),
        report.stats.solved,
        report.stats.hits,
        report.stats.corrupt
    );
    Ok(())
}
