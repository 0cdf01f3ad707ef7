//! Ground-truth dungeon levels: tiles, rooms, hidden spots and the text map format.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};

pub const DEFAULT_WIDTH: usize = 80;
pub const DEFAULT_HEIGHT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Position {
    pub x: usize,
    pub y: usize,
}

impl Position {
    pub const fn new(x: usize, y: usize) -> Self {
        Position { x, y }
    }

    /// Chebyshev distance, the number of 8-connected moves in open space.
    pub fn chebyshev(self, other: Position) -> usize {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }

    /// Row-major ordering key, used for every `(y, x)` tie-break.
    pub fn row_major(self) -> (usize, usize) {
        (self.y, self.x)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WallKind {
    /// `|`
    Vertical,
    /// `-`
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TileKind {
    Rock,
    Floor,
    Wall(WallKind),
    Door,
    Corridor,
}

impl TileKind {
    pub fn is_traversable(self) -> bool {
        matches!(self, TileKind::Floor | TileKind::Door | TileKind::Corridor)
    }

    pub fn is_wall(self) -> bool {
        matches!(self, TileKind::Wall(_))
    }

    pub fn glyph(self) -> char {
        match self {
            TileKind::Rock => ' ',
            TileKind::Floor => '.',
            TileKind::Wall(WallKind::Vertical) => '|',
            TileKind::Wall(WallKind::Horizontal) => '-',
            TileKind::Door => '+',
            TileKind::Corridor => '#',
        }
    }

    pub fn from_glyph(c: char) -> Option<TileKind> {
        Some(match c {
            ' ' => TileKind::Rock,
            '.' | '@' => TileKind::Floor,
            '|' => TileKind::Wall(WallKind::Vertical),
            '-' => TileKind::Wall(WallKind::Horizontal),
            '+' => TileKind::Door,
            '#' => TileKind::Corridor,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tile {
    pub kind: TileKind,
    /// Only doors and corridors can be hidden.
    pub hidden: bool,
}

impl Tile {
    pub const ROCK: Tile = Tile { kind: TileKind::Rock, hidden: false };

    pub fn new(kind: TileKind) -> Self {
        Tile { kind, hidden: false }
    }
}

pub fn is_traversable(tile: Tile, secrets_revealed: bool) -> bool {
    tile.kind.is_traversable() && (!tile.hidden || secrets_revealed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

const OFFSETS_4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
const OFFSETS_8: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// In-bounds neighbours of `pos` on a `width`×`height` grid, in row-major order.
pub fn neighbors(pos: Position, connectivity: Connectivity, width: usize, height: usize) -> Vec<Position> {
    let offsets: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &OFFSETS_4,
        Connectivity::Eight => &OFFSETS_8,
    };
    offsets
        .iter()
        .filter_map(|&(dx, dy)| {
            let x = pos.x as isize + dx;
            let y = pos.y as isize + dy;
            (x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height)
                .then(|| Position::new(x as usize, y as usize))
        })
        .collect()
}

/// Inclusive axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        debug_assert!(x0 <= x1 && y0 <= y1);
        Rect { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Position) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn cells(&self) -> impl Iterator<Item = Position> + '_ {
        (self.y0..=self.y1).flat_map(move |y| (self.x0..=self.x1).map(move |x| Position::new(x, y)))
    }

    /// The cell of the rectangle closest to `p` (in every L_p metric).
    pub fn nearest_cell(&self, p: Position) -> Position {
        Position::new(p.x.clamp(self.x0, self.x1), p.y.clamp(self.y0, self.y1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Room {
    /// Floor cells; the walls form the ring one cell outside.
    pub bounds: Rect,
    pub doors: Vec<Position>,
}

impl Room {
    /// The wall rectangle (floor bounds grown by one). Requires the room not to touch the map edge.
    pub fn outer(&self) -> Rect {
        Rect::new(self.bounds.x0 - 1, self.bounds.y0 - 1, self.bounds.x1 + 1, self.bounds.y1 + 1)
    }

    pub fn on_perimeter(&self, p: Position) -> bool {
        let o = self.outer();
        o.contains(p) && !self.bounds.contains(p)
    }

    pub fn is_corner(&self, p: Position) -> bool {
        let o = self.outer();
        (p.x == o.x0 || p.x == o.x1) && (p.y == o.y0 || p.y == o.y1)
    }

    pub fn centre(&self) -> Position {
        Position::new((self.bounds.x0 + self.bounds.x1) / 2, (self.bounds.y0 + self.bounds.y1) / 2)
    }

    /// Floor plus walls and doors.
    pub fn contains_or_perimeter(&self, p: Position) -> bool {
        self.outer().contains(p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelMap {
    width: usize,
    height: usize,
    tiles: Vec<Tile>,
    rooms: Vec<Room>,
    start: Position,
    /// Room index per cell (floor, walls and doors), `usize::MAX` elsewhere.
    room_of: Vec<usize>,
}

const NO_ROOM: usize = usize::MAX;

impl LevelMap {
    /// Builds a map and validates the level invariants.
    /// Rooms are stored in row-major order of their top-left corner, doors likewise.
    pub fn new(width: usize, height: usize, tiles: Vec<Tile>, mut rooms: Vec<Room>, start: Position) -> Result<Self> {
        rooms.sort_by_key(|r| (r.bounds.y0, r.bounds.x0));
        for r in &mut rooms {
            r.doors.sort_by_key(|d| d.row_major());
            r.doors.dedup();
        }
        if tiles.len() != width * height {
            return Err(Error::InvalidMap(format!(
                "expected {} tiles, got {}",
                width * height,
                tiles.len()
            )));
        }
        let mut room_of = vec![NO_ROOM; width * height];
        for (i, room) in rooms.iter().enumerate() {
            let b = room.bounds;
            if b.x0 == 0 || b.y0 == 0 || b.x1 + 1 >= width || b.y1 + 1 >= height {
                return Err(Error::InvalidMap(format!("room {i} touches the map edge")));
            }
            for p in room.outer().cells() {
                let idx = p.y * width + p.x;
                if room_of[idx] != NO_ROOM {
                    return Err(Error::InvalidMap(format!("rooms {} and {i} overlap", room_of[idx])));
                }
                room_of[idx] = i;
            }
        }
        let map = LevelMap { width, height, tiles, rooms, start, room_of };
        map.validate()?;
        Ok(map)
    }

    fn validate(&self) -> Result<()> {
        for (i, room) in self.rooms.iter().enumerate() {
            if room.bounds.cells().any(|p| self.tile(p).kind != TileKind::Floor) {
                return Err(Error::InvalidMap(format!("room {i} has non-floor cells")));
            }
            for &d in &room.doors {
                if !room.on_perimeter(d) || room.is_corner(d) || self.tile(d).kind != TileKind::Door {
                    return Err(Error::InvalidMap(format!("room {i} has a bad door at {d}")));
                }
            }
        }
        for p in self.positions() {
            let t = self.tile(p);
            if t.hidden && !matches!(t.kind, TileKind::Door | TileKind::Corridor) {
                return Err(Error::InvalidMap(format!("hidden non-door/corridor tile at {p}")));
            }
            if t.kind == TileKind::Door {
                let owner = self.room_index_at(p);
                if !owner.is_some_and(|r| self.rooms[r].doors.contains(&p)) {
                    return Err(Error::InvalidMap(format!("door at {p} is not on a room perimeter")));
                }
            }
        }
        if !self.in_bounds_pos(self.start) {
            return Err(Error::InvalidMap("start out of bounds".into()));
        }
        let st = self.tile(self.start);
        if st.kind != TileKind::Floor || st.hidden || self.room_containing_floor(self.start).is_none() {
            return Err(Error::InvalidMap(format!("start {} is not a room floor cell", self.start)));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn rooms(&self) -> &[Room] {
        &self.rooms
    }

    pub fn start(&self) -> Position {
        self.start
    }

    pub fn idx(&self, p: Position) -> usize {
        p.y * self.width + p.x
    }

    pub fn in_bounds(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn in_bounds_pos(&self, p: Position) -> bool {
        p.x < self.width && p.y < self.height
    }

    pub fn tile(&self, p: Position) -> Tile {
        self.tiles[self.idx(p)]
    }

    pub fn positions(&self) -> impl Iterator<Item = Position> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Position::new(x, y)))
    }

    pub fn neighbors(&self, p: Position, connectivity: Connectivity) -> Vec<Position> {
        neighbors(p, connectivity, self.width, self.height)
    }

    /// Index of the room whose floor, wall ring or doors include `p`.
    pub fn room_index_at(&self, p: Position) -> Option<usize> {
        let r = self.room_of[self.idx(p)];
        (r != NO_ROOM).then_some(r)
    }

    pub fn room_containing_floor(&self, p: Position) -> Option<usize> {
        self.room_index_at(p).filter(|&r| self.rooms[r].bounds.contains(p))
    }

    /// Room that counts as visited when the agent stands on `p`: its floor or one of its doors.
    pub fn room_entered_at(&self, p: Position) -> Option<usize> {
        let r = self.room_index_at(p)?;
        let room = &self.rooms[r];
        (room.bounds.contains(p) || room.doors.contains(&p)).then_some(r)
    }

    pub fn start_room(&self) -> usize {
        self.room_containing_floor(self.start).expect("validated at construction")
    }

    /// What the player sees at `p` before any secret is revealed.
    pub fn apparent_kind(&self, p: Position) -> TileKind {
        let t = self.tile(p);
        if !t.hidden {
            return t.kind;
        }
        match t.kind {
            TileKind::Door => TileKind::Wall(self.door_wall_kind(p)),
            _ => TileKind::Rock,
        }
    }

    fn door_wall_kind(&self, p: Position) -> WallKind {
        match self.room_index_at(p) {
            Some(r) => {
                let o = self.rooms[r].outer();
                if p.y == o.y0 || p.y == o.y1 {
                    WallKind::Horizontal
                } else {
                    WallKind::Vertical
                }
            }
            None => WallKind::Vertical,
        }
    }

    pub fn hidden_positions(&self) -> Vec<Position> {
        self.positions().filter(|&p| self.tile(p).hidden).collect()
    }

    /// Flood fill over traversable tiles from `start`, 8-connected.
    pub fn reachable(&self, secrets_revealed: bool) -> Vec<bool> {
        let mut seen = vec![false; self.tiles.len()];
        let mut queue = VecDeque::new();
        seen[self.idx(self.start)] = true;
        queue.push_back(self.start);
        while let Some(p) = queue.pop_front() {
            for n in self.neighbors(p, Connectivity::Eight) {
                let i = self.idx(n);
                if !seen[i] && is_traversable(self.tiles[i], secrets_revealed) {
                    seen[i] = true;
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    /// Indices of rooms reachable from the start. A room counts as reached when
    /// any of its floor cells or doors is reachable.
    pub fn rooms_reachable(&self, secrets_revealed: bool) -> Vec<usize> {
        let seen = self.reachable(secrets_revealed);
        (0..self.rooms.len())
            .filter(|&r| {
                let room = &self.rooms[r];
                room.bounds.cells().any(|p| seen[self.idx(p)]) || room.doors.iter().any(|&d| seen[self.idx(d)])
            })
            .collect()
    }

    pub fn rooms_reachable_without_secrets(&self) -> Vec<usize> {
        self.rooms_reachable(false)
    }

    /// Rooms that cannot be reached from the start without revealing a hidden tile.
    pub fn secret_rooms(&self) -> Vec<usize> {
        let open = self.rooms_reachable(false);
        (0..self.rooms.len()).filter(|r| !open.contains(r)).collect()
    }

    /// Renders the map file: glyph grid, then `hidden:` lines, then `start:`.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height + 64);
        for y in 0..self.height {
            for x in 0..self.width {
                let p = Position::new(x, y);
                if p == self.start {
                    out.push('@');
                } else {
                    out.push(self.apparent_kind(p).glyph());
                }
            }
            out.push('\n');
        }
        for p in self.hidden_positions() {
            let kind = if self.tile(p).kind == TileKind::Door { "door" } else { "corridor" };
            out.push_str(&format!("hidden: {p} {kind}\n"));
        }
        out.push_str(&format!("start: {}\n", self.start));
        out
    }

    /// Parses the map file format written by [`LevelMap::to_text`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut grid: Vec<Vec<char>> = Vec::new();
        let mut hidden: Vec<(Position, TileKind)> = Vec::new();
        let mut start: Option<Position> = None;
        for (lineno, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix("hidden:") {
                let mut parts = rest.split_whitespace();
                let pos = parse_xy(parts.next().unwrap_or(""), lineno)?;
                let kind = match parts.next() {
                    Some("door") => TileKind::Door,
                    Some("corridor") => TileKind::Corridor,
                    other => {
                        return Err(Error::Parse { line: lineno + 1, msg: format!("bad hidden kind {other:?}") })
                    }
                };
                hidden.push((pos, kind));
            } else if let Some(rest) = line.strip_prefix("start:") {
                start = Some(parse_xy(rest.trim(), lineno)?);
            } else if hidden.is_empty() && start.is_none() {
                grid.push(line.chars().collect());
            } else if !line.trim().is_empty() {
                return Err(Error::Parse { line: lineno + 1, msg: "unexpected grid line after metadata".into() });
            }
        }
        let height = grid.len();
        let width = grid.first().map_or(0, Vec::len);
        if height == 0 || width == 0 {
            return Err(Error::Parse { line: 1, msg: "empty glyph grid".into() });
        }
        let mut tiles = Vec::with_capacity(width * height);
        let mut at_sign = None;
        for (y, row) in grid.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Parse { line: y + 1, msg: format!("row has {} glyphs, expected {width}", row.len()) });
            }
            for (x, &c) in row.iter().enumerate() {
                let kind = TileKind::from_glyph(c)
                    .ok_or_else(|| Error::Parse { line: y + 1, msg: format!("unknown glyph {c:?}") })?;
                if c == '@' {
                    at_sign = Some(Position::new(x, y));
                }
                tiles.push(Tile::new(kind));
            }
        }
        for &(p, kind) in &hidden {
            if p.x >= width || p.y >= height {
                return Err(Error::Parse { line: 0, msg: format!("hidden position {p} out of bounds") });
            }
            tiles[p.y * width + p.x] = Tile { kind, hidden: true };
        }
        let start = start.or(at_sign).ok_or_else(|| Error::Parse { line: 0, msg: "missing start".into() })?;
        let rooms = find_rooms(width, height, &tiles)?;
        LevelMap::new(width, height, tiles, rooms, start)
    }
}

fn parse_xy(s: &str, lineno: usize) -> Result<Position> {
    let err = || Error::Parse { line: lineno + 1, msg: format!("bad coordinate {s:?}") };
    let (x, y) = s.split_once(',').ok_or_else(err)?;
    Ok(Position::new(x.trim().parse().map_err(|_| err())?, y.trim().parse().map_err(|_| err())?))
}

/// Recovers rooms from a tile grid: each 4-connected floor region must be a rectangle.
fn find_rooms(width: usize, height: usize, tiles: &[Tile]) -> Result<Vec<Room>> {
    let mut taken = vec![false; tiles.len()];
    let mut rooms = Vec::new();
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if taken[i] || tiles[i].kind != TileKind::Floor {
                continue;
            }
            let mut x1 = x;
            while x1 + 1 < width && tiles[y * width + x1 + 1].kind == TileKind::Floor {
                x1 += 1;
            }
            let mut y1 = y;
            while y1 + 1 < height && (x..=x1).all(|xx| tiles[(y1 + 1) * width + xx].kind == TileKind::Floor) {
                y1 += 1;
            }
            let bounds = Rect::new(x, y, x1, y1);
            for p in bounds.cells() {
                taken[p.y * width + p.x] = true;
            }
            if bounds.x0 == 0 || bounds.y0 == 0 || bounds.x1 + 1 >= width || bounds.y1 + 1 >= height {
                return Err(Error::InvalidMap(format!("room at {x},{y} touches the map edge")));
            }
            let room = Room { bounds, doors: Vec::new() };
            let doors = room
                .outer()
                .cells()
                .filter(|p| !bounds.contains(*p) && tiles[p.y * width + p.x].kind == TileKind::Door)
                .collect();
            rooms.push(Room { bounds, doors });
        }
    }
    Ok(rooms)
}
