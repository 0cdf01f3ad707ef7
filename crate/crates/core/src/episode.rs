//! Episode bookkeeping shared by all agents.

use std::collections::VecDeque;

use crate::error::Result;
use crate::level::{LevelMap, Position};
use crate::sim::{Action, PathField, Sim};

/// Metrics of one finished episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub actions: usize,
    pub moves: usize,
    pub searches: usize,
    pub total_rooms: usize,
    pub rooms_visited: usize,
    pub secret_spots_total: usize,
    pub secret_spots_found: usize,
    pub secret_rooms_total: usize,
    pub secret_rooms_found: usize,
    pub exhaustive: bool,
    /// The step budget ran out before the agent stopped.
    pub budget_exceeded: bool,
    /// Seen traversable cells, and all non-hidden traversable cells.
    pub cells_seen: usize,
    pub cells_total: usize,
    pub trace: Vec<Action>,
}

impl EpisodeResult {
    pub fn from_sim(sim: &Sim<'_>, budget_exceeded: bool) -> Self {
        let map = sim.map();
        let visited = sim.rooms_visited();
        let secret_rooms = map.secret_rooms();
        let (cells_seen, cells_total) = sim.traversable_seen();
        let rooms_visited = visited.iter().filter(|&&v| v).count();
        EpisodeResult {
            actions: sim.actions(),
            moves: sim.moves(),
            searches: sim.searches(),
            total_rooms: map.rooms().len(),
            rooms_visited,
            secret_spots_total: map.hidden_positions().len(),
            secret_spots_found: sim.revealed_count(),
            secret_rooms_total: secret_rooms.len(),
            secret_rooms_found: secret_rooms.iter().filter(|&&r| visited[r]).count(),
            exhaustive: rooms_visited == map.rooms().len(),
            budget_exceeded,
            cells_seen,
            cells_total,
            trace: sim.trace().to_vec(),
        }
    }

    /// Percentage of rooms visited.
    pub fn rooms_pct(&self) -> f64 {
        pct(self.rooms_visited, self.total_rooms)
    }

    /// Percentage of secret rooms visited; 100 when the map has none.
    pub fn secret_rooms_pct(&self) -> f64 {
        pct(self.secret_rooms_found, self.secret_rooms_total)
    }

    /// Percentage of hidden tiles revealed; 100 when the map has none.
    pub fn secret_spots_pct(&self) -> f64 {
        pct(self.secret_spots_found, self.secret_spots_total)
    }
}

fn pct(n: usize, total: usize) -> f64 {
    if total == 0 {
        100.0
    } else {
        100.0 * n as f64 / total as f64
    }
}

/// Default step budget: ten actions per map cell.
pub fn default_budget(map: &LevelMap) -> usize {
    10 * map.width() * map.height()
}

/// One queued primitive action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Move(Position),
    Search,
}

/// Queues the moves of a path that starts at the agent's position.
pub(crate) fn queue_path(queue: &mut VecDeque<Step>, path: &[Position]) {
    queue.extend(path.iter().skip(1).map(|&p| Step::Move(p)));
}

/// Queues a walk to `to` using `field`, then `searches` searches.
pub(crate) fn queue_search_at(queue: &mut VecDeque<Step>, field: &PathField, to: Position, searches: u32) {
    if let Some(path) = field.path_to(to) {
        queue_path(queue, &path);
        queue.extend((0..searches).map(|_| Step::Search));
    }
}

/// An agent that acts one primitive action at a time.
pub trait Agent<'m> {
    /// Performs one action. Returns false (without acting) once the agent has stopped.
    fn step(&mut self) -> Result<bool>;

    fn sim(&self) -> &Sim<'m>;

    /// Runs until the agent stops or `budget` actions have been taken.
    fn run(&mut self, budget: usize) -> Result<EpisodeResult> {
        while self.sim().actions() < budget {
            if !self.step()? {
                return Ok(EpisodeResult::from_sim(self.sim(), false));
            }
        }
        Ok(EpisodeResult::from_sim(self.sim(), true))
    }
}
