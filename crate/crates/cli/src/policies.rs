//! Solved policies for one problem, served from the cache when possible.

use meta_bamdp::meta::cache::{CacheLookup, PolicyCache};
use meta_bamdp::meta::graph::BuildOptions;
use meta_bamdp::rational::format_rational;
use meta_bamdp::{
    build_pruned_meta_graph, solve_bamdp_exact, solve_meta, ApproxParams, MetaGraph, MetaPolicy,
    MetaValueTable, QStarTable, Rational,
};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, Default, serde::Serialize)]
pub struct CacheStats {
    pub hits: usize,
    pub solved: usize,
    pub corrupt: usize,
}

pub struct PolicySource {
    pub n_arms: usize,
    pub horizon: u32,
    pub params: ApproxParams,
    pub qstar: QStarTable,
    node_cap: usize,
    graph: Option<MetaGraph>,
    cache: PolicyCache,
    pub stats: CacheStats,
}

impl PolicySource {
    pub fn new(
        n_arms: usize,
        horizon: u32,
        params: ApproxParams,
        node_cap: usize,
        cache: PolicyCache,
    ) -> CliResult<Self> {
        let qstar = solve_bamdp_exact(n_arms, horizon)?;
        Ok(PolicySource { n_arms, horizon, params, qstar, node_cap, graph: None, cache, stats: CacheStats::default() })
    }

    /// The pruned graph, built on first use.
    fn graph(&mut self) -> CliResult<&MetaGraph> {
        if self.graph.is_none() {
            let opts = BuildOptions { node_cap: self.node_cap, ..BuildOptions::default() };
            let g = build_pruned_meta_graph(self.n_arms, self.horizon, &self.qstar, self.params, &opts)
                .map_err(|e| CliError::from(e).context(format!("building graph ({})", self.params)))?;
            self.graph = Some(g);
        }
        Ok(self.graph.as_ref().expect("just built"))
    }

    pub fn get(&mut self, c: &Rational) -> CliResult<(MetaPolicy, MetaValueTable)> {
        match self.cache.load(self.n_arms, self.horizon, c, &self.params) {
            CacheLookup::Hit(p, v) => {
                self.stats.hits += 1;
                return Ok((p, v));
            }
            CacheLookup::Corrupt(why) => {
                self.stats.corrupt += 1;
                eprintln!("warning: discarding corrupt cache entry ({why}); re-solving");
            }
            CacheLookup::Miss => {}
        }
        let what = format!("c={} ({})", format_rational(c), self.params);
        let (policy, values) = solve_meta(self.graph()?, c).map_err(|e| CliError::from(e).context(&what))?;
        self.cache.store(&policy, &values).map_err(|e| CliError::from(e).context(&what))?;
        self.stats.solved += 1;
        Ok((policy, values))
    }
}
