//! Seeded batches, per-episode CSV rows, summaries and parameter grid search.
//!
//! Run `r` of every batch uses the map generated from `map_seed(base, r)`, so
//! all agents and all grid cells are compared on the same maps. Search outcomes
//! come from `episode_seed(base, cell, r)`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::Deserialize;

use crate::episode::EpisodeResult;
use crate::error::{Error, Result};
use crate::greedy::explore_greedy_secret;
use crate::level::LevelMap;
use crate::mapgen::{generate, GenConfig};
use crate::occmap::{explore, ExplorationParams};
use crate::oracle::optimal_actions;
use crate::rng::{episode_seed, map_seed, rng_from_seed};
use crate::sim::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AgentConfig {
    /// Closest frontier; searches each eligible wall this many times (0: no searching).
    Greedy { searches_per_wall: u32 },
    Occmap(ExplorationParams),
    /// Full-information optimum (secrets revealed).
    Oracle,
}

impl AgentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AgentConfig::Greedy { .. } => "greedy",
            AgentConfig::Occmap(_) => "occmap",
            AgentConfig::Oracle => "oracle",
        }
    }

    /// Values for [`PARAM_COLUMNS`]; empty where the agent has no such parameter.
    pub fn param_values(&self) -> Vec<String> {
        let mut out = vec![String::new(); PARAM_COLUMNS.len()];
        match self {
            AgentConfig::Greedy { searches_per_wall } => out[0] = searches_per_wall.to_string(),
            AgentConfig::Occmap(p) => {
                for (i, v) in param_strings(p).into_iter().enumerate() {
                    out[i + 1] = v;
                }
            }
            AgentConfig::Oracle => {}
        }
        out
    }

    /// Runs one episode on `map`.
    pub fn run(&self, map: &LevelMap, sim: SimConfig, seed: u64) -> Result<EpisodeResult> {
        let rng = rng_from_seed(seed);
        match self {
            AgentConfig::Greedy { searches_per_wall } => explore_greedy_secret(map, *searches_per_wall, sim, rng),
            AgentConfig::Occmap(p) => explore(map, p, sim, rng),
            AgentConfig::Oracle => {
                let actions = optimal_actions(map)?;
                let rooms = map.rooms().len();
                let spots = map.hidden_positions().len();
                let secret = map.secret_rooms().len();
                Ok(EpisodeResult {
                    actions,
                    moves: actions,
                    searches: 0,
                    total_rooms: rooms,
                    rooms_visited: rooms,
                    secret_spots_total: spots,
                    secret_spots_found: spots,
                    secret_rooms_total: secret,
                    secret_rooms_found: secret,
                    exhaustive: true,
                    budget_exceeded: false,
                    cells_seen: 0,
                    cells_total: 0,
                    trace: Vec::new(),
                })
            }
        }
    }
}

/// Fixed metric columns of the per-episode CSV.
pub const METRIC_COLUMNS: [&str; 12] = [
    "cell_id",
    "run_id",
    "seed",
    "agent",
    "total_rooms",
    "rooms_visited",
    "actions",
    "exhaustive",
    "secret_spots_total",
    "secret_spots_found",
    "secret_rooms_total",
    "secret_rooms_found",
];

/// Parameter columns: the greedy search count, then every explorer parameter.
pub const PARAM_COLUMNS: [&str; 21] = [
    "searches_per_wall",
    "lambda",
    "alpha",
    "sigma",
    "border_multiplier",
    "frontier_threshold",
    "component_threshold",
    "vary_threshold",
    "frontier_radius",
    "min_room_size",
    "min_secret_room_size",
    "dfs_min_neighbors",
    "max_wall_distance",
    "max_searches_per_spot",
    "searches_per_visit",
    "secrets_enabled",
    "diffusion_passes",
    "abort_on_low_utility",
    "fallback_min_cells",
    "fallback_hidden_min_cells",
    "step_budget",
];

fn param_strings(p: &ExplorationParams) -> Vec<String> {
    vec![
        p.lambda.to_string(),
        p.alpha.to_string(),
        p.sigma.to_string(),
        p.border_multiplier.to_string(),
        p.frontier_threshold.to_string(),
        p.component_threshold.to_string(),
        p.vary_threshold.to_string(),
        p.frontier_radius.to_string(),
        p.min_room_size.to_string(),
        p.min_secret_room_size.to_string(),
        p.dfs_min_neighbors.to_string(),
        p.max_wall_distance.to_string(),
        p.max_searches_per_spot.to_string(),
        p.searches_per_visit.to_string(),
        p.secrets_enabled.to_string(),
        p.diffusion_passes.to_string(),
        p.abort_on_low_utility.to_string(),
        p.fallback_min_cells.to_string(),
        p.fallback_hidden_min_cells.to_string(),
        p.step_budget.to_string(),
    ]
}

/// One episode, as written to the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub cell_id: usize,
    pub run_id: usize,
    /// Seed the map was generated from.
    pub seed: u64,
    pub agent: String,
    pub total_rooms: usize,
    pub rooms_visited: usize,
    pub actions: usize,
    pub exhaustive: bool,
    pub secret_spots_total: usize,
    pub secret_spots_found: usize,
    pub secret_rooms_total: usize,
    pub secret_rooms_found: usize,
    /// Values for [`PARAM_COLUMNS`].
    pub params: Vec<String>,
}

impl Row {
    fn new(cell_id: usize, run_id: usize, seed: u64, agent: &AgentConfig, r: &EpisodeResult) -> Self {
        Row {
            cell_id,
            run_id,
            seed,
            agent: agent.name().to_string(),
            total_rooms: r.total_rooms,
            rooms_visited: r.rooms_visited,
            actions: r.actions,
            exhaustive: r.exhaustive,
            secret_spots_total: r.secret_spots_total,
            secret_spots_found: r.secret_spots_found,
            secret_rooms_total: r.secret_rooms_total,
            secret_rooms_found: r.secret_rooms_found,
            params: agent.param_values(),
        }
    }

    pub fn rooms_pct(&self) -> f64 {
        pct(self.rooms_visited, self.total_rooms)
    }

    pub fn secret_rooms_pct(&self) -> f64 {
        pct(self.secret_rooms_found, self.secret_rooms_total)
    }

    pub fn secret_spots_pct(&self) -> f64 {
        pct(self.secret_spots_found, self.secret_spots_total)
    }

    fn record(&self) -> Vec<String> {
        let mut out = vec![
            self.cell_id.to_string(),
            self.run_id.to_string(),
            self.seed.to_string(),
            self.agent.clone(),
            self.total_rooms.to_string(),
            self.rooms_visited.to_string(),
            self.actions.to_string(),
            u8::from(self.exhaustive).to_string(),
            self.secret_spots_total.to_string(),
            self.secret_spots_found.to_string(),
            self.secret_rooms_total.to_string(),
            self.secret_rooms_found.to_string(),
        ];
        out.extend(self.params.iter().cloned());
        out
    }
}

fn pct(n: usize, total: usize) -> f64 {
    if total == 0 {
        100.0
    } else {
        100.0 * n as f64 / total as f64
    }
}

/// Writes the header and rows.
pub fn write_rows<W: Write>(out: W, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRIC_COLUMNS.iter().chain(PARAM_COLUMNS.iter()))?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows written by [`write_rows`].
pub fn read_rows<R: Read>(input: R) -> Result<Vec<Row>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header.len() < METRIC_COLUMNS.len() || header.iter().zip(METRIC_COLUMNS).any(|(a, b)| a != b) {
        return Err(Error::InvalidConfig("not an episode CSV".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = |col: &str| Error::Parse { line: i + 2, msg: format!("bad {col}") };
        let num = |k: usize| rec[k].parse::<usize>().map_err(|_| bad(METRIC_COLUMNS[k]));
        rows.push(Row {
            cell_id: num(0)?,
            run_id: num(1)?,
            seed: rec[2].parse().map_err(|_| bad("seed"))?,
            agent: rec[3].to_string(),
            total_rooms: num(4)?,
            rooms_visited: num(5)?,
            actions: num(6)?,
            exhaustive: &rec[7] == "1",
            secret_spots_total: num(8)?,
            secret_spots_found: num(9)?,
            secret_rooms_total: num(10)?,
            secret_rooms_found: num(11)?,
            params: rec.iter().skip(METRIC_COLUMNS.len()).map(str::to_string).collect(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub n_runs: usize,
    /// Episodes that returned an error (maps that failed to generate are not counted anywhere).
    pub failures: usize,
    pub mean_actions: f64,
    pub stdev_actions: f64,
    pub rooms_pct: f64,
    /// Percentage of runs that visited every room.
    pub exhaustive_pct: f64,
    pub secret_spots_pct: f64,
    pub secret_rooms_pct: f64,
}

impl RunSummary {
    pub fn from_rows(rows: &[Row]) -> Self {
        let n = rows.len();
        let mean = |f: &dyn Fn(&Row) -> f64| if n == 0 { 0.0 } else { rows.iter().map(f).sum::<f64>() / n as f64 };
        let (mean_actions, stdev_actions) = mean_stdev(rows.iter().map(|r| r.actions as f64));
        RunSummary {
            n_runs: n,
            failures: 0,
            mean_actions,
            stdev_actions,
            rooms_pct: mean(&Row::rooms_pct),
            exhaustive_pct: mean(&|r| if r.exhaustive { 100.0 } else { 0.0 }),
            secret_spots_pct: mean(&Row::secret_spots_pct),
            secret_rooms_pct: mean(&Row::secret_rooms_pct),
        }
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_stdev(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (m, var.sqrt())
}

/// Map generation and simulation settings shared by every run of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchConfig {
    /// Template; the seed field is replaced per run.
    pub gen: GenConfig,
    pub sim: SimConfig,
    pub runs: usize,
    pub base_seed: u64,
}

impl BatchConfig {
    pub fn new(runs: usize, base_seed: u64, secrets: bool) -> Self {
        BatchConfig { gen: GenConfig { secrets_enabled: secrets, ..GenConfig::default() }, sim: SimConfig::default(), runs, base_seed }
    }

    /// The map of run `run`, or `None` if generation failed.
    pub fn map(&self, run: usize) -> Option<(u64, LevelMap)> {
        let seed = map_seed(self.base_seed, run as u64);
        generate(&GenConfig { seed, ..self.gen.clone() }).ok().map(|m| (seed, m))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub summary: RunSummary,
    /// Sorted by run index.
    pub rows: Vec<Row>,
    /// Run index and message of every failed episode.
    pub errors: Vec<(usize, String)>,
}

fn run_cell(cfg: &BatchConfig, agent: &AgentConfig, cell: usize, maps: &[Option<(u64, LevelMap)>]) -> BatchOutput {
    let results: Vec<(usize, std::result::Result<Row, String>)> = maps
        .par_iter()
        .enumerate()
        .filter_map(|(run, m)| m.as_ref().map(|(seed, map)| (run, *seed, map)))
        .map(|(run, seed, map)| {
            let ep = episode_seed(cfg.base_seed, cell as u64, run as u64);
            let r = agent.run(map, cfg.sim, ep).map(|r| Row::new(cell, run, seed, agent, &r)).map_err(|e| e.to_string());
            (run, r)
        })
        .collect();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (run, r) in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => errors.push((run, e)),
        }
    }
    let mut summary = RunSummary::from_rows(&rows);
    summary.failures = errors.len();
    BatchOutput { summary, rows, errors }
}

/// Generates every map of the batch once.
pub fn batch_maps(cfg: &BatchConfig) -> Vec<Option<(u64, LevelMap)>> {
    (0..cfg.runs).into_par_iter().map(|run| cfg.map(run)).collect()
}

/// Runs `agent` once on each of the batch's maps, as grid cell `cell`.
pub fn run_batch(agent: &AgentConfig, cfg: &BatchConfig, cell: usize) -> Result<BatchOutput> {
    if cfg.runs == 0 {
        return Err(Error::InvalidConfig("a batch needs at least one run".into()));
    }
    if let AgentConfig::Occmap(p) = agent {
        p.validate()?;
    }
    cfg.sim.validate()?;
    cfg.gen.validate()?;
    Ok(run_cell(cfg, agent, cell, &batch_maps(cfg)))
}

/// Mean and standard deviation of actions for each room count, in room-count order.
pub fn actions_by_room_count(rows: &[Row]) -> Vec<(usize, usize, f64, f64)> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.total_rooms).or_default().push(r.actions as f64);
    }
    groups
        .into_iter()
        .map(|(rooms, a)| {
            let n = a.len();
            let (m, s) = mean_stdev(a.into_iter());
            (rooms, n, m, s)
        })
        .collect()
}

/// Least-squares slope of `y` on `x`.
pub fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Parameter grid file.
///
/// ```toml
/// agent = "occmap"        # or "greedy"
/// runs_per_cell = 200
/// base_seed = 1
/// map_secrets = false     # hidden tiles in generated maps
/// p_reveal = 0.3333
///
/// [params]                # fixed explorer parameters
/// secrets_enabled = false
///
/// [grid]                  # axes; keys in sorted order, the last varies fastest
/// lambda = [0.5, 0.65, 0.8]
/// frontier_threshold = [0.35, 0.5]
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub agent: String,
    #[serde(default = "default_runs")]
    pub runs_per_cell: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub map_secrets: bool,
    #[serde(default = "default_p_reveal")]
    pub p_reveal: f64,
    #[serde(default)]
    pub params: toml::Table,
    #[serde(default)]
    pub grid: toml::Table,
}

fn default_runs() -> usize {
    200
}

fn default_p_reveal() -> f64 {
    SimConfig::default().p_reveal
}

impl GridSpec {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn batch(&self) -> BatchConfig {
        let mut b = BatchConfig::new(self.runs_per_cell, self.base_seed, self.map_secrets);
        b.sim.p_reveal = self.p_reveal;
        b
    }

    /// Every parameter combination, in enumeration order.
    pub fn cells(&self) -> Result<Vec<AgentConfig>> {
        let mut axes: Vec<(&String, Vec<toml::Value>)> = Vec::new();
        for (k, v) in &self.grid {
            match v {
                toml::Value::Array(a) if !a.is_empty() => axes.push((k, a.clone())),
                _ => return Err(Error::InvalidConfig(format!("grid axis {k} must be a non-empty array"))),
            }
        }
        let total: usize = axes.iter().map(|(_, a)| a.len()).product();
        let mut out = Vec::with_capacity(total);
        for mut i in 0..total {
            let mut table = self.params.clone();
            for (k, values) in axes.iter().rev() {
                table.insert((*k).clone(), values[i % values.len()].clone());
                i /= values.len();
            }
            out.push(self.agent_for(table)?);
        }
        Ok(out)
    }

    fn agent_for(&self, table: toml::Table) -> Result<AgentConfig> {
        match self.agent.as_str() {
            "occmap" => {
                let p: ExplorationParams = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
                p.validate()?;
                Ok(AgentConfig::Occmap(p))
            }
            "greedy" => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct G {
                    #[serde(default)]
                    searches_per_wall: u32,
                }
                let g: G = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
                Ok(AgentConfig::Greedy { searches_per_wall: g.searches_per_wall })
            }
            other => Err(Error::InvalidConfig(format!("grid search needs agent occmap or greedy, got {other}"))),
        }
    }
}

/// One grid cell's parameters and summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell_id: usize,
    pub agent: AgentConfig,
    pub summary: RunSummary,
}

/// Runs every cell of `spec` on the same maps. Returns the cell summaries and all episode rows.
pub fn grid_search(spec: &GridSpec) -> Result<(Vec<CellResult>, Vec<Row>)> {
    let cells = spec.cells()?;
    let cfg = spec.batch();
    cfg.sim.validate()?;
    if cfg.runs == 0 {
        return Err(Error::InvalidConfig("runs_per_cell must be positive".into()));
    }
    let maps = batch_maps(&cfg);
    let mut results = Vec::with_capacity(cells.len());
    let mut rows = Vec::new();
    for (cell_id, agent) in cells.into_iter().enumerate() {
        let out = run_cell(&cfg, &agent, cell_id, &maps);
        results.push(CellResult { cell_id, agent, summary: out.summary });
        rows.extend(out.rows);
    }
    Ok((results, rows))
}

/// Header of the per-cell summary CSV.
pub const SUMMARY_COLUMNS: [&str; 10] = [
    "cell_id",
    "agent",
    "n_runs",
    "failures",
    "mean_actions",
    "stdev_actions",
    "rooms_pct",
    "exhaustive_pct",
    "secret_spots_pct",
    "secret_rooms_pct",
];

pub fn write_summaries<W: Write>(out: W, cells: &[CellResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS.iter().chain(PARAM_COLUMNS.iter()))?;
    for c in cells {
        let s = &c.summary;
        let mut rec = vec![
            c.cell_id.to_string(),
            c.agent.name().to_string(),
            s.n_runs.to_string(),
            s.failures.to_string(),
            format!("{:.4}", s.mean_actions),
            format!("{:.4}", s.stdev_actions),
            format!("{:.4}", s.rooms_pct),
            format!("{:.4}", s.exhaustive_pct),
            format!("{:.4}", s.secret_spots_pct),
            format!("{:.4}", s.secret_rooms_pct),
        ];
        rec.extend(c.agent.param_values());
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Indices of the points not dominated in (fewer actions, more exploration).
/// Duplicate points are all kept. Sorted by actions.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len())
        .filter(|&i| {
            let (a, e) = points[i];
            !points.iter().any(|&(b, f)| b <= a && f >= e && (b < a || f > e))
        })
        .collect();
    idx.sort_by(|&i, &j| points[i].0.total_cmp(&points[j].0).then(i.cmp(&j)));
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let spec = GridSpec::parse("agent = \"occmap\"\n[grid]\nlambda = [0.5, 0.6]\nfrontier_threshold = [0.1, 0.2, 0.3]\n").unwrap();
        let cells = spec.cells().unwrap();
        assert_eq!(cells.len(), 6);
        let AgentConfig::Occmap(p) = cells[1] else { panic!() };
        // keys sorted: frontier_threshold then lambda, lambda fastest
        assert_eq!((p.frontier_threshold, p.lambda), (0.1, 0.6));
        let one = GridSpec::parse("agent = \"greedy\"\n").unwrap();
        assert_eq!(one.cells().unwrap(), vec![AgentConfig::Greedy { searches_per_wall: 0 }]);
    }

    #[test]
    fn grid_rejects_unknown_parameter() {
        let spec = GridSpec::parse("agent = \"occmap\"\n[grid]\nlambada = [0.5]\n").unwrap();
        assert!(spec.cells().is_err());
    }

    #[test]
    fn pareto_drops_dominated() {
        let pts = [(10.0, 50.0), (12.0, 40.0), (20.0, 90.0), (15.0, 90.0), (5.0, 10.0)];
        assert_eq!(pareto_front(&pts), vec![4, 0, 3]);
    }

    #[test]
    fn grouping() {
        let mk = |rooms, actions| Row {
            cell_id: 0,
            run_id: 0,
            seed: 0,
            agent: "greedy".into(),
            total_rooms: rooms,
            rooms_visited: rooms,
            actions,
            exhaustive: true,
            secret_spots_total: 0,
            secret_spots_found: 0,
            secret_rooms_total: 0,
            secret_rooms_found: 0,
            params: vec![],
        };
        let g = actions_by_room_count(&[mk(3, 10), mk(3, 20), mk(5, 40)]);
        assert_eq!(g.len(), 2);
        assert_eq!((g[0].0, g[0].1, g[0].2), (3, 2, 15.0));
        assert!((slope(&[(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let out = run_batch(&AgentConfig::Greedy { searches_per_wall: 0 }, &BatchConfig::new(3, 5, false), 0).unwrap();
        let mut buf = Vec::new();
        write_rows(&mut buf, &out.rows).unwrap();
        assert_eq!(read_rows(buf.as_slice()).unwrap(), out.rows);
    }
}
