use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use super::properties::{safety_violation, Property};
use crate::sim::{replay_lenient, Configuration, Event, ScenarioConfig, SimError, Trace};

#[derive(Clone, Debug)]
pub struct ExploreOptions {
    pub max_depth: usize,
    pub max_configs: u64,
    pub dedupe: bool,
    /// Zero uses every available core.
    pub workers: usize,
    /// Keep the hashes of terminal and depth-cutoff configurations.
    pub collect_leaves: bool,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions { max_depth: 1_000, max_configs: 5_000_000, dedupe: true, workers: 0, collect_leaves: false }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ExploreOutcome {
    AllPass,
    Counterexample {
        property: Property,
        detail: String,
        #[serde(skip)]
        trace: Box<Trace>,
    },
    /// The bounds cut the search short without finding a violation.
    BoundExhausted,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ExploreStats {
    pub configs_visited: u64,
    pub dedupe_hits: u64,
    pub terminals: u64,
    pub depth_cutoffs: u64,
    pub deepest: usize,
    /// Root branches searched independently; each gets an equal budget share.
    pub subtrees: usize,
    pub subtrees_exhausted: usize,
    pub subtrees_complete: usize,
}

impl ExploreStats {
    fn add(&mut self, o: &ExploreStats) {
        self.configs_visited += o.configs_visited;
        self.dedupe_hits += o.dedupe_hits;
        self.terminals += o.terminals;
        self.depth_cutoffs += o.depth_cutoffs;
        self.deepest = self.deepest.max(o.deepest);
        self.subtrees_exhausted += o.subtrees_exhausted;
        self.subtrees_complete += o.subtrees_complete;
    }

    /// Every reachable configuration within bounds was visited.
    pub fn exhaustive(&self) -> bool {
        self.subtrees_exhausted == 0 && self.depth_cutoffs == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExploreReport {
    pub outcome: ExploreOutcome,
    pub stats: ExploreStats,
    #[serde(skip)]
    pub leaf_hashes: Vec<u64>,
}

impl ExploreReport {
    pub fn summary(&self) -> String {
        let s = &self.stats;
        let verdict = match &self.outcome {
            ExploreOutcome::AllPass => "all pass".to_string(),
            ExploreOutcome::Counterexample { property, detail, trace } => {
                format!("counterexample {property}: {detail} ({} events)", trace.events.len())
            }
            ExploreOutcome::BoundExhausted => "bound exhausted".to_string(),
        };
        format!(
            "explore verdict: {verdict}\n  visited={} dedupe-hits={} terminals={} depth-cutoffs={} deepest={} subtrees={} (complete {}, budget-exhausted {}) exhaustive={}",
            s.configs_visited,
            s.dedupe_hits,
            s.terminals,
            s.depth_cutoffs,
            s.deepest,
            s.subtrees,
            s.subtrees_complete,
            s.subtrees_exhausted,
            s.exhaustive()
        )
    }
}

struct Found {
    property: Property,
    detail: String,
    path: Vec<Event>,
}

struct Subtree<'a> {
    opts: &'a ExploreOptions,
    budget: u64,
    seen: HashSet<u64>,
    stats: ExploreStats,
    terminals: BTreeSet<u64>,
    path: Vec<Event>,
    found: Option<Found>,
    out_of_budget: bool,
    scratch: Vec<u8>,
}

impl Subtree<'_> {
    /// Visit `config`; false stops the search.
    fn visit(&mut self, config: &Configuration, depth: usize) -> Result<bool, SimError> {
        self.stats.configs_visited += 1;
        self.stats.deepest = self.stats.deepest.max(depth);
        if let Some((property, detail)) = safety_violation(config) {
            self.found = Some(Found { property, detail, path: self.path.clone() });
            return Ok(false);
        }
        let enabled = config.enabled_events();
        if config.all_live_decided() || enabled.is_empty() {
            self.stats.terminals += 1;
            if self.opts.collect_leaves {
                self.terminals.insert(config.canonical_hash());
            }
            if !config.all_live_decided() {
                self.found = Some(Found {
                    property: Property::Termination,
                    detail: format!("no enabled event with {} undelivered", config.buffer().len()),
                    path: self.path.clone(),
                });
                return Ok(false);
            }
            return Ok(true);
        }
        if depth >= self.opts.max_depth {
            self.stats.depth_cutoffs += 1;
            if self.opts.collect_leaves {
                self.terminals.insert(config.canonical_hash());
            }
            return Ok(true);
        }
        for ev in enabled {
            if self.stats.configs_visited >= self.budget {
                self.out_of_budget = true;
                return Ok(false);
            }
            let mut child = config.clone();
            child.apply(&ev)?;
            if self.opts.dedupe && !self.seen.insert(child.dedupe_key(&mut self.scratch)) {
                self.stats.dedupe_hits += 1;
                continue;
            }
            self.path.push(ev);
            let go = self.visit(&child, depth + 1)?;
            self.path.pop();
            if !go {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Depth-first search over every interleaving from the scenario's start,
/// checking safety at each configuration and termination at each terminal.
///
/// The root's branches are searched as independent subtrees with their own
/// dedupe sets and equal budget shares, and merged in branch order, so the
/// verdict and statistics do not depend on the number of workers.
pub fn explore(scenario: &ScenarioConfig, opts: &ExploreOptions) -> Result<ExploreReport, SimError> {
    if opts.max_depth == 0 {
        return Err(SimError::Config { field: "max_depth".into(), message: "must be at least 1".into() });
    }
    let mut root = Configuration::new(scenario)?;
    root.start()?;
    let mut scratch = Vec::with_capacity(4096);
    let root_hash = root.dedupe_key(&mut scratch);

    let mut stats = ExploreStats { configs_visited: 1, ..ExploreStats::default() };
    let make_trace = |path: &[Event]| replay_lenient(scenario, path).map(|(t, _)| Box::new(t));
    if let Some((property, detail)) = safety_violation(&root) {
        let trace = make_trace(&[])?;
        return Ok(ExploreReport {
            outcome: ExploreOutcome::Counterexample { property, detail, trace },
            stats,
            leaf_hashes: vec![],
        });
    }

    let mut branches: Vec<(Event, Configuration)> = Vec::new();
    let mut first_level = HashSet::from([root_hash]);
    for ev in root.enabled_events() {
        let mut child = root.clone();
        child.apply(&ev)?;
        if opts.dedupe && !first_level.insert(child.dedupe_key(&mut scratch)) {
            stats.dedupe_hits += 1;
            continue;
        }
        branches.push((ev, child));
    }
    stats.subtrees = branches.len();
    let share = (opts.max_configs.saturating_sub(1) / branches.len().max(1) as u64).max(1);

    let search = |(ev, child): &(Event, Configuration)| -> Result<Subtree<'_>, SimError> {
        let mut scratch = Vec::with_capacity(4096);
        let mut child = child.clone();
        let key = child.dedupe_key(&mut scratch);
        let mut sub = Subtree {
            opts,
            budget: share,
            seen: HashSet::from([root_hash, key]),
            stats: ExploreStats::default(),
            terminals: BTreeSet::new(),
            path: vec![*ev],
            found: None,
            out_of_budget: false,
            scratch,
        };
        let complete = sub.visit(&child, 1)?;
        if complete {
            sub.stats.subtrees_complete = 1;
        } else if sub.out_of_budget {
            sub.stats.subtrees_exhausted = 1;
        }
        sub.seen = HashSet::new();
        Ok(sub)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| SimError::Config { field: "workers".into(), message: e.to_string() })?;
    let results: Vec<Subtree<'_>> = pool.install(|| branches.par_iter().map(search).collect::<Result<_, _>>())?;

    let mut terminals = BTreeSet::new();
    let mut found = None;
    for r in results {
        stats.add(&r.stats);
        terminals.extend(r.terminals);
        if found.is_none() {
            found = r.found;
        }
    }
    let outcome = match found {
        Some(f) => {
            ExploreOutcome::Counterexample { property: f.property, detail: f.detail, trace: make_trace(&f.path)? }
        }
        None if stats.exhaustive() => ExploreOutcome::AllPass,
        None => ExploreOutcome::BoundExhausted,
    };
    Ok(ExploreReport { outcome, stats, leaf_hashes: terminals.into_iter().collect() })
}
