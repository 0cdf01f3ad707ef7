//! Turn-based simulation of a single agent: field of view, moves, the `search`
//! action and shortest paths over the agent's knowledge.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::level::{Connectivity, LevelMap, Position, TileKind};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Direction {
    pub const ALL: [Direction; 8] =
        [Direction::N, Direction::NE, Direction::E, Direction::SE, Direction::S, Direction::SW, Direction::W, Direction::NW];

    pub fn delta(self) -> (isize, isize) {
        match self {
            Direction::N => (0, -1),
            Direction::NE => (1, -1),
            Direction::E => (1, 0),
            Direction::SE => (1, 1),
            Direction::S => (0, 1),
            Direction::SW => (-1, 1),
            Direction::W => (-1, 0),
            Direction::NW => (-1, -1),
        }
    }

    pub fn between(from: Position, to: Position) -> Option<Direction> {
        let dx = to.x as isize - from.x as isize;
        let dy = to.y as isize - from.y as isize;
        Direction::ALL.into_iter().find(|d| d.delta() == (dx, dy))
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::N => "N",
            Direction::NE => "NE",
            Direction::E => "E",
            Direction::SE => "SE",
            Direction::S => "S",
            Direction::SW => "SW",
            Direction::W => "W",
            Direction::NW => "NW",
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Direction::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::Parse { line: 0, msg: format!("unknown direction {s:?}") })
    }
}

/// The agent's partial knowledge of the level.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentView {
    width: usize,
    height: usize,
    known: Vec<Option<TileKind>>,
    visited: Vec<bool>,
    /// Searches performed while standing on the cell.
    search_count: Vec<u32>,
    /// Searches that covered the cell (performed from any of its 8 neighbours).
    searched: Vec<u32>,
}

impl AgentView {
    pub fn new(width: usize, height: usize) -> Self {
        let n = width * height;
        AgentView {
            width,
            height,
            known: vec![None; n],
            visited: vec![false; n],
            search_count: vec![0; n],
            searched: vec![0; n],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn idx(&self, p: Position) -> usize {
        p.y * self.width + p.x
    }

    pub fn pos_of(&self, i: usize) -> Position {
        Position::new(i % self.width, i / self.width)
    }

    pub fn len(&self) -> usize {
        self.known.len()
    }

    pub fn is_empty(&self) -> bool {
        self.known.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = Position> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Position::new(x, y)))
    }

    pub fn in_bounds(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn shifted(&self, p: Position, dx: isize, dy: isize) -> Option<Position> {
        let (x, y) = (p.x as isize + dx, p.y as isize + dy);
        self.in_bounds(x, y).then(|| Position::new(x as usize, y as usize))
    }

    pub fn neighbors(&self, p: Position, c: Connectivity) -> Vec<Position> {
        crate::level::neighbors(p, c, self.width, self.height)
    }

    pub fn kind(&self, p: Position) -> Option<TileKind> {
        self.known[self.idx(p)]
    }

    pub fn kind_at(&self, i: usize) -> Option<TileKind> {
        self.known[i]
    }

    pub fn is_unknown(&self, p: Position) -> bool {
        self.known[self.idx(p)].is_none()
    }

    pub fn is_seen(&self, p: Position) -> bool {
        !self.is_unknown(p)
    }

    pub fn is_traversable(&self, p: Position) -> bool {
        self.known[self.idx(p)].is_some_and(TileKind::is_traversable)
    }

    pub fn is_visited(&self, p: Position) -> bool {
        self.visited[self.idx(p)]
    }

    pub fn visited_at(&self, i: usize) -> bool {
        self.visited[i]
    }

    pub fn search_count(&self, p: Position) -> u32 {
        self.search_count[self.idx(p)]
    }

    pub fn times_searched(&self, p: Position) -> u32 {
        self.searched[self.idx(p)]
    }

    /// Records a tile; returns true if it was previously unknown or changed kind.
    pub fn set_seen(&mut self, p: Position, kind: TileKind) -> bool {
        let i = self.idx(p);
        let changed = self.known[i] != Some(kind);
        self.known[i] = Some(kind);
        changed
    }

    pub fn mark_visited(&mut self, p: Position) {
        let i = self.idx(p);
        debug_assert!(self.known[i].is_some());
        self.visited[i] = true;
    }

    pub fn seen_count(&self) -> usize {
        self.known.iter().filter(|k| k.is_some()).count()
    }

    /// Seen traversable cell with an unknown 4-neighbour.
    pub fn borders_unknown(&self, p: Position) -> bool {
        self.neighbors(p, Connectivity::Four).into_iter().any(|n| self.is_unknown(n))
    }

    /// A Seen corridor cell with no unknown neighbour and a single way out: one
    /// traversable 4-neighbour, with any other traversable neighbour touching it
    /// (the inside of a bend).
    pub fn is_dead_end(&self, p: Position) -> bool {
        if self.kind(p) != Some(TileKind::Corridor) {
            return false;
        }
        let nbrs = self.neighbors(p, Connectivity::Eight);
        if nbrs.iter().any(|&n| self.is_unknown(n)) {
            return false;
        }
        let mut exits = self.neighbors(p, Connectivity::Four).into_iter().filter(|&n| self.is_traversable(n));
        let Some(exit) = exits.next() else { return false };
        if exits.next().is_some() {
            return false;
        }
        nbrs.into_iter().filter(|&n| self.is_traversable(n)).all(|n| n.chebyshev(exit) <= 1)
    }
}

/// Updates `view` with what is visible from `pos`. Returns the number of cells
/// that became known or changed. `revealed` marks hidden tiles already found.
pub fn observe(map: &LevelMap, view: &mut AgentView, pos: Position, revealed: &[bool]) -> usize {
    let visible = |p: Position| -> TileKind {
        if revealed[map.idx(p)] {
            map.tile(p).kind
        } else {
            map.apparent_kind(p)
        }
    };
    let mut changed = usize::from(view.set_seen(pos, visible(pos)));
    if let Some(r) = map.room_entered_at(pos) {
        let room = &map.rooms()[r];
        for p in room.outer().cells() {
            changed += usize::from(view.set_seen(p, visible(p)));
            if room.bounds.contains(p) {
                view.mark_visited(p);
            }
        }
    }
    for n in map.neighbors(pos, Connectivity::Eight) {
        changed += usize::from(view.set_seen(n, visible(n)));
    }
    if visible(pos) == TileKind::Corridor {
        changed += look_down_corridor(view, pos, &visible);
    }
    changed
}

/// Depth of room floor visible past a door at the end of a straight corridor.
pub const CONE_DEPTH: usize = 2;

fn look_down_corridor(
    view: &mut AgentView,
    pos: Position,
    visible: &dyn Fn(Position) -> TileKind,
) -> usize {
    let mut changed = 0;
    for (dx, dy) in [(0isize, -1isize), (-1, 0), (1, 0), (0, 1)] {
        let mut cur = pos;
        loop {
            let Some(next) = view.shifted(cur, dx, dy) else { break };
            match visible(next) {
                TileKind::Corridor => cur = next,
                TileKind::Door => {
                    changed += usize::from(view.set_seen(next, TileKind::Door));
                    let mut beyond = next;
                    for _ in 0..CONE_DEPTH {
                        match view.shifted(beyond, dx, dy) {
                            Some(b) if visible(b) == TileKind::Floor => {
                                changed += usize::from(view.set_seen(b, TileKind::Floor));
                                beyond = b;
                            }
                            _ => break,
                        }
                    }
                    break;
                }
                _ => break,
            }
        }
    }
    changed
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Chance that one search reveals a given adjacent hidden tile.
    pub p_reveal: f64,
    /// Chance that stepping next to a hidden tile reveals it without searching.
    pub p_bump: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { p_reveal: 1.0 / 3.0, p_bump: 0.0 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_reveal > 0.0 && self.p_reveal <= 1.0) {
            return Err(Error::InvalidConfig("p_reveal must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.p_bump) {
            return Err(Error::InvalidConfig("p_bump must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Move(Direction),
    Search { revealed: Vec<Position> },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Move(d) => write!(f, "move {}", d.name()),
            Action::Search { revealed } if revealed.is_empty() => write!(f, "search"),
            Action::Search { revealed } => {
                write!(f, "search revealed")?;
                for p in revealed {
                    write!(f, " {p}")?;
                }
                Ok(())
            }
        }
    }
}

/// Formats a trace, one `step N: ...` line per action.
pub fn format_trace(trace: &[Action]) -> String {
    let mut s = String::new();
    for (i, a) in trace.iter().enumerate() {
        s.push_str(&format!("step {}: {a}\n", i + 1));
    }
    s
}

pub fn parse_trace(text: &str) -> Result<Vec<Action>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: &str| Error::Parse { line: lineno + 1, msg: m.to_string() };
        let (_, body) = line.split_once(": ").ok_or_else(|| err("expected `step N: ...`"))?;
        let mut words = body.split_whitespace();
        match words.next() {
            Some("move") => {
                let d = words.next().ok_or_else(|| err("missing direction"))?.parse()?;
                out.push(Action::Move(d));
            }
            Some("search") => {
                let mut revealed = Vec::new();
                if words.next() == Some("revealed") {
                    for w in words {
                        let (x, y) = w.split_once(',').ok_or_else(|| err("bad position"))?;
                        revealed.push(Position::new(
                            x.parse().map_err(|_| err("bad x"))?,
                            y.parse().map_err(|_| err("bad y"))?,
                        ));
                    }
                }
                out.push(Action::Search { revealed });
            }
            _ => return Err(err("unknown action")),
        }
    }
    Ok(out)
}

/// One agent on one level.
#[derive(Debug, Clone)]
pub struct Sim<'m> {
    map: &'m LevelMap,
    cfg: SimConfig,
    view: AgentView,
    pos: Position,
    moves: usize,
    searches: usize,
    revealed: Vec<bool>,
    /// Per cell: adjacent searches a hidden tile takes to reveal, and searches so far.
    reveal_after: Vec<u32>,
    tries: Vec<u32>,
    rooms_visited: Vec<bool>,
    trace: Vec<Action>,
    /// Cells newly observed since the last [`Sim::take_new_info`].
    new_info: usize,
    rng: Rng,
}

impl<'m> Sim<'m> {
    pub fn new(map: &'m LevelMap, cfg: SimConfig, mut rng: Rng) -> Self {
        // Drawn up front, one geometric count per hidden tile, so an agent that
        // searches a tile more often never finds it later than one that searches less.
        let mut reveal_after = vec![0; map.width() * map.height()];
        for p in map.hidden_positions() {
            let mut k = 1;
            while !rng.random_bool(cfg.p_reveal) {
                k += 1;
            }
            reveal_after[map.idx(p)] = k;
        }
        let mut sim = Sim {
            map,
            cfg,
            view: AgentView::new(map.width(), map.height()),
            pos: map.start(),
            moves: 0,
            searches: 0,
            revealed: vec![false; map.width() * map.height()],
            reveal_after,
            tries: vec![0; map.width() * map.height()],
            rooms_visited: vec![false; map.rooms().len()],
            trace: Vec::new(),
            new_info: 0,
            rng,
        };
        sim.arrive();
        sim
    }

    fn arrive(&mut self) {
        let pos = self.pos;
        self.new_info += observe(self.map, &mut self.view, pos, &self.revealed);
        self.view.mark_visited(pos);
        if let Some(r) = self.map.room_entered_at(pos) {
            self.rooms_visited[r] = true;
        }
        if self.cfg.p_bump > 0.0 {
            for n in self.map.neighbors(pos, Connectivity::Eight) {
                let i = self.map.idx(n);
                if self.map.tile(n).hidden && !self.revealed[i] && self.rng.random_bool(self.cfg.p_bump) {
                    self.reveal(n);
                }
            }
        }
    }

    fn reveal(&mut self, p: Position) {
        let i = self.map.idx(p);
        self.revealed[i] = true;
        self.view.set_seen(p, self.map.tile(p).kind);
        self.new_info += 1;
    }

    pub fn map(&self) -> &'m LevelMap {
        self.map
    }

    pub fn view(&self) -> &AgentView {
        &self.view
    }

    pub fn pos(&self) -> Position {
        self.pos
    }

    pub fn actions(&self) -> usize {
        self.moves + self.searches
    }

    pub fn moves(&self) -> usize {
        self.moves
    }

    pub fn searches(&self) -> usize {
        self.searches
    }

    pub fn trace(&self) -> &[Action] {
        &self.trace
    }

    pub fn config(&self) -> SimConfig {
        self.cfg
    }

    pub fn is_revealed(&self, p: Position) -> bool {
        self.revealed[self.map.idx(p)]
    }

    pub fn rooms_visited(&self) -> &[bool] {
        &self.rooms_visited
    }

    /// Returns and clears the count of newly observed cells.
    pub fn take_new_info(&mut self) -> usize {
        std::mem::take(&mut self.new_info)
    }

    pub fn step_move(&mut self, dir: Direction) -> Result<()> {
        let (dx, dy) = dir.delta();
        let to = self
            .view
            .shifted(self.pos, dx, dy)
            .ok_or(Error::IllegalMove { from: self.pos, to: self.pos })?;
        let i = self.map.idx(to);
        let really_open = crate::level::is_traversable(self.map.tile(to), self.revealed[i]);
        if !self.view.is_traversable(to) || !really_open {
            return Err(Error::IllegalMove { from: self.pos, to });
        }
        self.pos = to;
        self.moves += 1;
        self.trace.push(Action::Move(dir));
        self.arrive();
        Ok(())
    }

    pub fn step_to(&mut self, to: Position) -> Result<()> {
        let dir = Direction::between(self.pos, to).ok_or(Error::IllegalMove { from: self.pos, to })?;
        self.step_move(dir)
    }

    /// Searches the 8 neighbours; each unrevealed hidden tile is found with `p_reveal`
    /// (its reveal count is fixed when the episode starts).
    pub fn step_search(&mut self) -> Vec<Position> {
        let pos = self.pos;
        self.searches += 1;
        let i = self.view.idx(pos);
        self.view.search_count[i] += 1;
        let mut found = Vec::new();
        for n in self.map.neighbors(pos, Connectivity::Eight) {
            let j = self.view.idx(n);
            self.view.searched[j] += 1;
            self.tries[j] += 1;
            if self.map.tile(n).hidden && !self.revealed[j] && self.tries[j] >= self.reveal_after[j] {
                self.reveal(n);
                found.push(n);
            }
        }
        self.trace.push(Action::Search { revealed: found.clone() });
        found
    }

    /// A search whose outcome is given, as recorded in a trace. Every listed
    /// position must be an unrevealed hidden tile next to the agent.
    pub fn replay_search(&mut self, revealed: &[Position]) -> Result<()> {
        let pos = self.pos;
        for &p in revealed {
            let i = self.map.idx(p);
            if p.chebyshev(pos) != 1 || !self.map.tile(p).hidden || self.revealed[i] {
                return Err(Error::InvalidMap(format!("trace reveals {p}, which is not a hidden tile next to {pos}")));
            }
        }
        self.searches += 1;
        let i = self.view.idx(pos);
        self.view.search_count[i] += 1;
        for n in self.map.neighbors(pos, Connectivity::Eight) {
            let j = self.view.idx(n);
            self.view.searched[j] += 1;
            self.tries[j] += 1;
        }
        for &p in revealed {
            self.reveal(p);
        }
        self.trace.push(Action::Search { revealed: revealed.to_vec() });
        Ok(())
    }

    /// Replays one recorded action.
    pub fn apply(&mut self, action: &Action) -> Result<()> {
        match action {
            Action::Move(d) => self.step_move(*d),
            Action::Search { revealed } => self.replay_search(revealed),
        }
    }

    /// Moves along `path` (which starts at the current position).
    pub fn follow(&mut self, path: &[Position]) -> Result<()> {
        for &p in path.iter().skip(1) {
            self.step_to(p)?;
        }
        Ok(())
    }

    pub fn revealed_count(&self) -> usize {
        self.revealed.iter().filter(|&&r| r).count()
    }

    /// Fraction of the level's traversable cells (secrets revealed) the agent has seen.
    pub fn traversable_seen(&self) -> (usize, usize) {
        let mut seen = 0;
        let mut total = 0;
        for p in self.map.positions() {
            let t = self.map.tile(p);
            if t.kind.is_traversable() && !t.hidden {
                total += 1;
                if self.view.is_traversable(p) {
                    seen += 1;
                }
            }
        }
        (seen, total)
    }
}

/// Breadth-first distances over Seen traversable cells (8-connected, unit cost).
#[derive(Debug, Clone)]
pub struct PathField {
    width: usize,
    source: Position,
    dist: Vec<u32>,
    parent: Vec<u32>,
}

pub const UNREACHABLE: u32 = u32::MAX;

impl PathField {
    pub fn new(view: &AgentView, source: Position) -> Self {
        let n = view.len();
        let mut dist = vec![UNREACHABLE; n];
        let mut parent = vec![u32::MAX; n];
        let mut queue = VecDeque::new();
        let s = view.idx(source);
        dist[s] = 0;
        queue.push_back(source);
        while let Some(p) = queue.pop_front() {
            let d = dist[view.idx(p)];
            for q in view.neighbors(p, Connectivity::Eight) {
                let j = view.idx(q);
                if dist[j] == UNREACHABLE && view.is_traversable(q) {
                    dist[j] = d + 1;
                    parent[j] = view.idx(p) as u32;
                    queue.push_back(q);
                }
            }
        }
        PathField { width: view.width(), source, dist, parent }
    }

    pub fn source(&self) -> Position {
        self.source
    }

    pub fn dist(&self, p: Position) -> Option<u32> {
        let d = self.dist[p.y * self.width + p.x];
        (d != UNREACHABLE).then_some(d)
    }

    pub fn path_to(&self, p: Position) -> Option<Vec<Position>> {
        self.dist(p)?;
        let mut out = vec![p];
        let mut i = p.y * self.width + p.x;
        while self.parent[i] != u32::MAX {
            i = self.parent[i] as usize;
            out.push(Position::new(i % self.width, i / self.width));
        }
        out.reverse();
        Some(out)
    }
}

/// Minimum-length 8-connected path over Seen traversable cells. The target may
/// itself be non-traversable (a frontier or search target) if it is adjacent to
/// a reachable cell. Returns the positions from `from` to `to` inclusive.
pub fn shortest_path(view: &AgentView, from: Position, to: Position) -> Option<Vec<Position>> {
    if from == to {
        return Some(vec![from]);
    }
    let field = PathField::new(view, from);
    if view.is_traversable(to) {
        return field.path_to(to);
    }
    let best = view
        .neighbors(to, Connectivity::Eight)
        .into_iter()
        .filter_map(|n| field.dist(n).map(|d| (d, n.row_major(), n)))
        .min()?;
    let mut path = field.path_to(best.2)?;
    path.push(to);
    Some(path)
}
