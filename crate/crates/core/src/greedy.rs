//! Closest-frontier baseline, optionally searching every eligible wall of each
//! visited room and every dead-end for hidden doors and corridors.

use std::collections::VecDeque;

use crate::components::find_frontiers;
use crate::episode::{default_budget, queue_path, queue_search_at, Agent, EpisodeResult, Step};
use crate::error::Result;
use crate::level::{Connectivity, LevelMap, Position};
use crate::occmap::{choose_stand_position, dead_end_is_searchable, wall_is_searchable, wall_sides};
use crate::rng::Rng;
use crate::sim::{AgentView, PathField, Sim, SimConfig};

pub struct GreedyExplorer<'m> {
    sim: Sim<'m>,
    searches_per_wall: u32,
    queue: VecDeque<Step>,
    target: Option<Position>,
    done: bool,
}

/// A wall of a visited room that still needs searching.
fn pending_wall(view: &AgentView, w: Position, per_wall: u32) -> bool {
    view.times_searched(w) < per_wall
        && wall_sides(view, w).is_some_and(|(floor, _)| view.is_visited(floor))
        && wall_is_searchable(view, w)
}

fn pending_dead_end(view: &AgentView, p: Position, per_wall: u32) -> bool {
    view.search_count(p) < per_wall && dead_end_is_searchable(view, p)
}

impl<'m> GreedyExplorer<'m> {
    /// `searches_per_wall` 0 gives the plain closest-frontier agent.
    pub fn new(map: &'m LevelMap, searches_per_wall: u32, cfg: SimConfig, rng: Rng) -> Result<Self> {
        cfg.validate()?;
        Ok(GreedyExplorer { sim: Sim::new(map, cfg, rng), searches_per_wall, queue: VecDeque::new(), target: None, done: false })
    }

    /// Cell the agent is currently heading for.
    pub fn target(&self) -> Option<Position> {
        self.target
    }

    pub fn into_sim(self) -> Sim<'m> {
        self.sim
    }

    fn plan_search(&mut self, field: &PathField) -> bool {
        let k = self.searches_per_wall;
        let view = self.sim.view();
        let pos = self.sim.pos();
        if pending_dead_end(view, pos, k) {
            self.queue.extend((0..k).map(|_| Step::Search));
            self.target = Some(pos);
            return true;
        }
        // closest pending spot, measured to the nearest cell it can be searched from
        let mut best: Option<((u32, (usize, usize)), Position, bool)> = None;
        for p in view.positions() {
            let (dist, dead_end) = if pending_dead_end(view, p, k) {
                match field.dist(p) {
                    Some(d) => (d, true),
                    None => continue,
                }
            } else if pending_wall(view, p, k) {
                let d = view
                    .neighbors(p, Connectivity::Eight)
                    .into_iter()
                    .filter(|&n| view.is_traversable(n))
                    .filter_map(|n| field.dist(n))
                    .min();
                match d {
                    Some(d) => (d, false),
                    None => continue,
                }
            } else {
                continue;
            };
            let key = (dist, p.row_major());
            if best.is_none_or(|(b, _, _)| key < b) {
                best = Some((key, p, dead_end));
            }
        }
        let Some((_, spot, dead_end)) = best else { return false };
        let stand = if dead_end {
            spot
        } else {
            // among the cells next to the wall, the one touching most pending walls
            let touching = |n: Position| {
                view.neighbors(n, Connectivity::Eight).into_iter().filter(|&m| pending_wall(view, m, k)).count()
            };
            let most = view
                .neighbors(spot, Connectivity::Eight)
                .into_iter()
                .filter(|&n| view.is_traversable(n) && field.dist(n).is_some())
                .map(touching)
                .max()
                .unwrap_or(0);
            let pending = |m: Position| pending_wall(view, m, k);
            match view
                .neighbors(spot, Connectivity::Eight)
                .into_iter()
                .filter(|&n| view.is_traversable(n) && field.dist(n).is_some() && touching(n) == most)
                .min_by_key(|&n| (field.dist(n), n.row_major()))
            {
                Some(n) => n,
                None => match choose_stand_position(view, field, spot, &pending) {
                    Some(n) => n,
                    None => return false,
                },
            }
        };
        queue_search_at(&mut self.queue, field, stand, k);
        self.target = Some(spot);
        true
    }

    fn plan(&mut self) {
        self.target = None;
        let view = self.sim.view();
        let field = PathField::new(view, self.sim.pos());
        if self.searches_per_wall > 0 && self.plan_search(&field) {
            return;
        }
        let view = self.sim.view();
        let nearest = find_frontiers(view)
            .into_iter()
            .filter_map(|f| field.dist(f).map(|d| (d, f.row_major(), f)))
            .min();
        if let Some((_, _, f)) = nearest {
            if let Some(path) = field.path_to(f) {
                queue_path(&mut self.queue, &path);
                self.target = Some(f);
            }
        }
    }
}

impl<'m> Agent<'m> for GreedyExplorer<'m> {
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
        match self.queue.pop_front() {
            Some(Step::Move(to)) => self.sim.step_to(to)?,
            Some(Step::Search) => {
                self.sim.step_search();
            }
            None => unreachable!("queue checked above"),
        }
        Ok(true)
    }

    fn sim(&self) -> &Sim<'m> {
        &self.sim
    }
}

/// Closest-frontier exploration without searching.
pub fn explore_greedy(map: &LevelMap, cfg: SimConfig, rng: Rng) -> Result<EpisodeResult> {
    explore_greedy_secret(map, 0, cfg, rng)
}

/// Closest-frontier exploration that searches each eligible wall of visited rooms,
/// and each dead-end, `searches_per_wall` times.
pub fn explore_greedy_secret(map: &LevelMap, searches_per_wall: u32, cfg: SimConfig, rng: Rng) -> Result<EpisodeResult> {
    GreedyExplorer::new(map, searches_per_wall, cfg, rng)?.run(default_budget(map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapgen::{generate, GenConfig};
    use crate::rng::rng_from_seed;

    #[test]
    fn single_room_needs_nothing() {
        let m = LevelMap::parse("-----\n|.@.|\n-----\nstart: 2,1\n").unwrap();
        let r = explore_greedy(&m, SimConfig::default(), rng_from_seed(0)).unwrap();
        assert_eq!(r.actions, 0);
        assert!(r.exhaustive);
    }

    #[test]
    fn zero_searches_matches_plain_greedy() {
        for seed in 0..5 {
            let map = generate(&GenConfig::with_seed(seed)).unwrap();
            let a = explore_greedy(&map, SimConfig::default(), rng_from_seed(seed)).unwrap();
            let b = explore_greedy_secret(&map, 0, SimConfig::default(), rng_from_seed(seed)).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.searches, 0);
        }
    }

    #[test]
    fn open_maps_fully_covered() {
        for seed in 0..20 {
            let cfg = GenConfig { secrets_enabled: false, ..GenConfig::with_seed(seed) };
            let map = generate(&cfg).unwrap();
            let r = explore_greedy(&map, SimConfig::default(), rng_from_seed(seed)).unwrap();
            assert!(r.exhaustive, "seed {seed}");
            assert_eq!(r.cells_seen, r.cells_total, "seed {seed}");
        }
    }

    #[test]
    fn forced_reveals_find_secret_rooms() {
        let cfg = SimConfig { p_reveal: 1.0, ..SimConfig::default() };
        let mut found = 0;
        let mut total = 0;
        for seed in 0..20 {
            let map = generate(&GenConfig::with_seed(seed)).unwrap();
            let r = explore_greedy_secret(&map, 1, cfg, rng_from_seed(seed)).unwrap();
            found += r.secret_rooms_found;
            total += r.secret_rooms_total;
        }
        assert!(total > 0);
        assert!(found * 10 >= total * 9, "{found}/{total}");
    }
}
