//! The occupancy-map explorer: picks rectangular components of likely unvisited
//! rooms, travels to their frontiers, and searches for hidden doors when only
//! hidden components are left nearby.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::components::{
    associate_nearest, bresenham, corridor_end_room_components, decompose, find_frontiers, Anchor, Component, DecomposeParams,
    FrontierInfo,
};
use crate::episode::{default_budget, queue_path, queue_search_at, Agent, EpisodeResult, Step};
use crate::error::{Error, Result};
use crate::level::{Connectivity, LevelMap, Position, Rect, TileKind};
use crate::occupancy::OccupancyGrid;
use crate::rng::Rng;
use crate::sim::{AgentView, PathField, Sim, SimConfig};

/// Tunable parameters of the explorer. Defaults are the best no-secret setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplorationParams {
    /// Diffusion factor.
    pub lambda: f64,
    /// Weight of distance against utility when choosing a component.
    pub alpha: f64,
    /// Weight of distance against search count when choosing a search spot.
    pub sigma: f64,
    pub border_multiplier: f64,
    /// Frontiers whose surroundings are all below this multiple of the baseline are ignored.
    pub frontier_threshold: f64,
    pub component_threshold: f64,
    /// Scale the frontier threshold from 1x to 2x as the map gets explored.
    pub vary_threshold: bool,
    pub frontier_radius: usize,
    pub min_room_size: usize,
    pub min_secret_room_size: usize,
    pub dfs_min_neighbors: usize,
    /// Farthest a search spot may be from the hidden component it serves.
    pub max_wall_distance: f64,
    pub max_searches_per_spot: u32,
    pub searches_per_visit: u32,
    pub secrets_enabled: bool,
    pub diffusion_passes: u32,
    /// Drop the current walk when its target frontier turns low-utility.
    pub abort_on_low_utility: bool,
    /// Before stopping with frontiers left, components of at least this many cells
    /// are kept even if their only frontiers are low-utility. 0 turns this off.
    pub fallback_min_cells: usize,
    /// As above for hidden components, which then head for the nearest frontier.
    /// 0 turns this off.
    pub fallback_hidden_min_cells: usize,
    /// Action cap; 0 means ten per map cell.
    pub step_budget: usize,
}

impl Default for ExplorationParams {
    fn default() -> Self {
        ExplorationParams {
            lambda: 0.65,
            alpha: 1.0,
            sigma: 1.0,
            border_multiplier: 0.35,
            frontier_threshold: 0.35,
            component_threshold: 0.45,
            vary_threshold: false,
            frontier_radius: 2,
            min_room_size: 1,
            min_secret_room_size: 5,
            dfs_min_neighbors: 7,
            max_wall_distance: 8.0,
            max_searches_per_spot: 10,
            searches_per_visit: 10,
            secrets_enabled: false,
            diffusion_passes: 1,
            abort_on_low_utility: false,
            fallback_min_cells: 100,
            fallback_hidden_min_cells: 600,
            step_budget: 0,
        }
    }
}

impl ExplorationParams {
    /// Defaults with secret search on.
    pub fn with_secrets() -> Self {
        ExplorationParams { secrets_enabled: true, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("sigma", self.sigma),
            ("border_multiplier", self.border_multiplier),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        for (name, v) in [
            ("frontier_threshold", self.frontier_threshold),
            ("component_threshold", self.component_threshold),
            ("max_wall_distance", self.max_wall_distance),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        if self.dfs_min_neighbors > 8 {
            return Err(Error::InvalidConfig("dfs_min_neighbors must be at most 8".into()));
        }
        if self.min_room_size == 0 || self.min_secret_room_size == 0 {
            return Err(Error::InvalidConfig("room sizes must be positive".into()));
        }
        if self.diffusion_passes == 0 {
            return Err(Error::InvalidConfig("diffusion_passes must be positive".into()));
        }
        Ok(())
    }

    pub fn decompose_params(&self) -> DecomposeParams {
        DecomposeParams {
            dfs_min_neighbors: self.dfs_min_neighbors,
            component_threshold: self.component_threshold,
            min_room_size: self.min_room_size,
            min_secret_room_size: self.min_secret_room_size,
        }
    }

    pub fn budget(&self, map: &LevelMap) -> usize {
        if self.step_budget == 0 {
            default_budget(map)
        } else {
            self.step_budget
        }
    }
}

/// Index of the best component: a priority component if any (nearest first),
/// otherwise the argmax of `(1-alpha)*utility + alpha*(1 - dist/sum(dist))`.
/// Ties go to the higher utility, then the earlier component.
pub fn evaluate_components(components: &[Component], dists: &[u32], alpha: f64) -> Option<usize> {
    let prio = (0..components.len()).filter(|&i| components[i].priority).min_by_key(|&i| (dists[i], i));
    if prio.is_some() {
        return prio;
    }
    let sum: u64 = dists.iter().map(|&d| u64::from(d)).sum();
    let norm = |d: u32| if components.len() == 1 || sum == 0 { 0.0 } else { f64::from(d) / sum as f64 };
    let mut best: Option<(f64, f64, usize)> = None;
    for (i, c) in components.iter().enumerate() {
        let score = (1.0 - alpha) * c.utility + alpha * (1.0 - norm(dists[i]));
        let better = match best {
            None => true,
            Some((s, u, _)) => score > s || (score == s && c.utility > u),
        };
        if better {
            best = Some((score, c.utility, i));
        }
    }
    best.map(|(_, _, i)| i)
}

/// Unknown, or known to be solid rock.
fn is_empty(view: &AgentView, p: Position) -> bool {
    matches!(view.kind(p), None | Some(TileKind::Rock))
}

fn empty_neighbors(view: &AgentView, p: Position) -> usize {
    view.neighbors(p, Connectivity::Eight).into_iter().filter(|&n| is_empty(view, n)).count()
}

/// For a wall with exactly one floor 4-neighbour, the floor cell and the cell
/// beyond the wall on the far side.
pub fn wall_sides(view: &AgentView, w: Position) -> Option<(Position, Position)> {
    if !view.kind(w).is_some_and(TileKind::is_wall) {
        return None;
    }
    let mut floors = view.neighbors(w, Connectivity::Four).into_iter().filter(|&n| view.kind(n) == Some(TileKind::Floor));
    let floor = floors.next()?;
    if floors.next().is_some() {
        return None;
    }
    let dx = w.x as isize - floor.x as isize;
    let dy = w.y as isize - floor.y as isize;
    let beyond = view.shifted(w, dx, dy)?;
    Some((floor, beyond))
}

/// A wall worth searching: the cell beyond it is empty and has at least three
/// empty cells around it.
pub fn wall_is_searchable(view: &AgentView, w: Position) -> bool {
    wall_sides(view, w).is_some_and(|(_, b)| is_empty(view, b) && empty_neighbors(view, b) >= 3)
}

/// A dead-end corridor with at least three empty cells around it.
pub fn dead_end_is_searchable(view: &AgentView, p: Position) -> bool {
    view.is_dead_end(p) && empty_neighbors(view, p) >= 3
}

/// Searches already spent on a spot. Dead-ends are searched from the cell itself.
pub fn spot_search_count(view: &AgentView, spot: Position) -> u32 {
    if view.kind(spot) == Some(TileKind::Corridor) {
        view.search_count(spot)
    } else {
        view.times_searched(spot)
    }
}

/// Reachable traversable 8-neighbour of `spot` closest to the agent; ties go to
/// the cell touching the most `searchable` cells, then row-major order.
pub fn choose_stand_position(
    view: &AgentView,
    field: &PathField,
    spot: Position,
    searchable: &dyn Fn(Position) -> bool,
) -> Option<Position> {
    view.neighbors(spot, Connectivity::Eight)
        .into_iter()
        .filter(|&n| view.is_traversable(n))
        .filter_map(|n| {
            let d = field.dist(n)?;
            let touching = view.neighbors(n, Connectivity::Eight).into_iter().filter(|&m| searchable(m)).count();
            Some(((d, usize::MAX - touching, n.row_major()), n))
        })
        .min()
        .map(|(_, n)| n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchChoice {
    pub spot: Position,
    pub stand: Position,
    /// Path length from the agent to `stand`.
    pub dist: u32,
}

fn dist_f(a: Position, b: Position) -> f64 {
    let dx = a.x as f64 - b.x as f64;
    let dy = a.y as f64 - b.y as f64;
    (dx * dx + dy * dy).sqrt()
}

/// Longest straight line from a search spot to its component.
const MAX_LINE: f64 = 10.0;

/// Best wall or dead-end to search for a way into a hidden component.
pub fn select_search_spot(
    comp: &Component,
    view: &AgentView,
    field: &PathField,
    params: &ExplorationParams,
) -> Option<SearchChoice> {
    let reach = params.max_wall_distance.ceil() as usize + 1;
    let b = comp.bounds;
    let area = Rect::new(
        b.x0.saturating_sub(reach),
        b.y0.saturating_sub(reach),
        (b.x1 + reach).min(view.width() - 1),
        (b.y1 + reach).min(view.height() - 1),
    );
    let searchable =
        |w: Position| wall_is_searchable(view, w) && view.times_searched(w) < params.max_searches_per_spot;
    let mut cands: Vec<(Position, Position, u32, u32)> = Vec::new();
    for spot in area.cells() {
        let dead_end = dead_end_is_searchable(view, spot);
        if !dead_end && !wall_is_searchable(view, spot) {
            continue;
        }
        let count = spot_search_count(view, spot);
        if count >= params.max_searches_per_spot {
            continue;
        }
        let target = b.nearest_cell(spot);
        let d = dist_f(spot, target);
        if d > params.max_wall_distance || d >= MAX_LINE {
            continue;
        }
        let line = bresenham(spot, target);
        if !line[1..].iter().all(|&p| is_empty(view, p)) {
            continue;
        }
        let stand = if dead_end {
            field.dist(spot).map(|_| spot)
        } else {
            choose_stand_position(view, field, spot, &searchable)
        };
        let Some(stand) = stand else { continue };
        let Some(dist) = field.dist(stand) else { continue };
        cands.push((spot, stand, count, dist));
    }
    let sum_c: u64 = cands.iter().map(|c| u64::from(c.2)).sum();
    let sum_d: u64 = cands.iter().map(|c| u64::from(c.3)).sum();
    let norm = |v: u32, sum: u64| if sum == 0 { 0.0 } else { f64::from(v) / sum as f64 };
    let sigma = params.sigma;
    cands
        .into_iter()
        .map(|(spot, stand, c, d)| {
            let score = (1.0 - sigma) * norm(c, sum_c) + sigma * norm(d, sum_d);
            (score, spot, stand, d)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.row_major().cmp(&b.1.row_major())))
        .map(|(_, spot, stand, dist)| SearchChoice { spot, stand, dist })
}

/// What the explorer is currently heading for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Frontier(Position),
    Search { spot: Position, stand: Position },
}

pub struct OccmapExplorer<'m> {
    sim: Sim<'m>,
    grid: OccupancyGrid,
    params: ExplorationParams,
    queue: VecDeque<Step>,
    target: Option<Target>,
    frontiers: Vec<FrontierInfo>,
    components: Vec<Component>,
    done: bool,
}

impl<'m> OccmapExplorer<'m> {
    pub fn new(map: &'m LevelMap, params: ExplorationParams, cfg: SimConfig, rng: Rng) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        let mut sim = Sim::new(map, cfg, rng);
        sim.take_new_info();
        let grid = OccupancyGrid::init(sim.view(), params.border_multiplier);
        let mut ex = OccmapExplorer {
            sim,
            grid,
            params,
            queue: VecDeque::new(),
            target: None,
            frontiers: Vec::new(),
            components: Vec::new(),
            done: false,
        };
        ex.diffuse()?;
        Ok(ex)
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn params(&self) -> &ExplorationParams {
        &self.params
    }

    /// Frontiers considered at the last planning step.
    pub fn frontiers(&self) -> &[FrontierInfo] {
        &self.frontiers
    }

    /// Candidate components of the last planning step, with their anchors.
    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn target(&self) -> Option<Target> {
        self.target
    }

    pub fn into_sim(self) -> Sim<'m> {
        self.sim
    }

    fn diffuse(&mut self) -> Result<()> {
        for _ in 0..self.params.diffusion_passes {
            match self.grid.diffuse(self.params.lambda) {
                Err(Error::Exhausted) => {
                    self.done = true;
                    return Ok(());
                }
                r => r?,
            }
        }
        Ok(())
    }

    fn absorb(&mut self, revealed: &[Position]) -> Result<()> {
        for &p in revealed {
            self.grid.reset_cell(p)?;
        }
        if self.sim.take_new_info() == 0 && revealed.is_empty() {
            return Ok(());
        }
        match self.grid.update_observation(self.sim.view()) {
            Err(Error::Exhausted) => {
                self.done = true;
                Ok(())
            }
            Err(e) => Err(e),
            Ok(_) => self.diffuse(),
        }
    }

    fn frontier_threshold(&self) -> f64 {
        let t = self.params.frontier_threshold;
        if self.params.vary_threshold {
            let view = self.sim.view();
            t * (1.0 + view.seen_count() as f64 / view.len() as f64)
        } else {
            t
        }
    }

    /// Components to fall back on when nothing passed the normal filters: the
    /// low-utility test or the sight-line rule can hide a large region that is
    /// still reachable through a frontier.
    fn fallback_components(&self, p: &ExplorationParams) -> Vec<Component> {
        let view = self.sim.view();
        let all: Vec<FrontierInfo> = self.frontiers.iter().map(|f| FrontierInfo { low_utility: false, ..*f }).collect();
        let Some(nearest) = all.iter().min_by_key(|f| (f.dist, f.pos.row_major())).map(|f| f.pos) else {
            return Vec::new();
        };
        let mut comps = decompose(&self.grid, view, &all, &p.decompose_params());
        comps.retain_mut(|c| {
            if !c.hidden {
                return p.fallback_min_cells > 0 && c.cells.len() >= p.fallback_min_cells;
            }
            if p.fallback_hidden_min_cells == 0 || c.cells.len() < p.fallback_hidden_min_cells {
                return false;
            }
            c.hidden = false;
            c.anchor = Anchor::Frontier(nearest);
            true
        });
        comps
    }

    fn plan(&mut self) {
        self.target = None;
        let p = self.params;
        let view = self.sim.view();
        let pos = self.sim.pos();
        if p.secrets_enabled && view.is_dead_end(pos) && view.search_count(pos) < p.max_searches_per_spot {
            self.queue.extend((0..p.searches_per_visit).map(|_| Step::Search));
            self.target = Some(Target::Search { spot: pos, stand: pos });
            return;
        }
        let field = PathField::new(view, pos);
        let threshold = self.frontier_threshold();
        self.frontiers = find_frontiers(view)
            .into_iter()
            .filter_map(|f| {
                Some(FrontierInfo {
                    pos: f,
                    low_utility: self.grid.frontier_is_low_utility(view, f, p.frontier_radius, threshold),
                    dist: field.dist(f)?,
                })
            })
            .collect();
        let mut comps = decompose(&self.grid, view, &self.frontiers, &p.decompose_params());
        comps.retain_mut(|c| {
            if !c.hidden {
                return true;
            }
            if !p.secrets_enabled {
                return false;
            }
            match select_search_spot(c, view, &field, &p) {
                Some(s) => {
                    c.anchor = Anchor::SearchSpot { spot: s.spot, stand: s.stand };
                    true
                }
                None => false,
            }
        });
        for mut c in corridor_end_room_components(view, &self.grid) {
            let inside = c.cells.iter().filter_map(|&q| field.dist(q).map(|d| (d, q.row_major(), q))).min();
            let anchor = match inside {
                Some((_, _, q)) => Some(q),
                None => associate_nearest(&c.bounds, &self.frontiers, view),
            };
            if let Some(a) = anchor {
                c.anchor = Anchor::Frontier(a);
                comps.push(c);
            }
        }
        if comps.is_empty() && (p.fallback_min_cells > 0 || p.fallback_hidden_min_cells > 0) {
            comps = self.fallback_components(&p);
        }
        let dists: Vec<u32> = comps
            .iter()
            .map(|c| match c.anchor {
                Anchor::Frontier(f) => field.dist(f).unwrap_or(u32::MAX),
                Anchor::SearchSpot { stand, .. } => field.dist(stand).unwrap_or(u32::MAX),
                Anchor::Unanchored => u32::MAX,
            })
            .collect();
        let choice = evaluate_components(&comps, &dists, p.alpha);
        if let Some(i) = choice {
            match comps[i].anchor {
                Anchor::Frontier(f) => {
                    if let Some(path) = field.path_to(f) {
                        queue_path(&mut self.queue, &path);
                        self.target = Some(Target::Frontier(f));
                    }
                }
                Anchor::SearchSpot { spot, stand } => {
                    queue_search_at(&mut self.queue, &field, stand, p.searches_per_visit);
                    self.target = Some(Target::Search { spot, stand });
                }
                Anchor::Unanchored => {}
            }
        }
        self.components = comps;
    }
}

impl<'m> Agent<'m> for OccmapExplorer<'m> {
    fn step(&mut self) -> Result<bool> {
        if self.done {
            return Ok(false);
        }
        if self.queue.is_empty() {
            self.plan();
            if self.queue.is_empty() {
                self.done = true;
                return Ok(false);
            }
        }
        let revealed = match self.queue.pop_front() {
            Some(Step::Move(to)) => {
                self.sim.step_to(to)?;
                Vec::new()
            }
            Some(Step::Search) => self.sim.step_search(),
            None => unreachable!("queue checked above"),
        };
        self.absorb(&revealed)?;
        if self.params.abort_on_low_utility {
            if let Some(Target::Frontier(f)) = self.target {
                let t = self.frontier_threshold();
                if self.grid.frontier_is_low_utility(self.sim.view(), f, self.params.frontier_radius, t) {
                    self.queue.clear();
                }
            }
        }
        Ok(true)
    }

    fn sim(&self) -> &Sim<'m> {
        &self.sim
    }
}

/// Runs the occupancy-map explorer to completion.
pub fn explore(map: &LevelMap, params: &ExplorationParams, cfg: SimConfig, rng: Rng) -> Result<EpisodeResult> {
    let mut ex = OccmapExplorer::new(map, *params, cfg, rng)?;
    ex.run(params.budget(map))
}
