//! Procedural NetHack-style levels.
//!
//! Rooms are placed by rejection sampling, one per cell of a 3×3 region grid,
//! then sorted left to right and joined by corridors in the same order NetHack
//! uses: neighbours first, then every second room, then any still-disconnected
//! pair, then a handful of extra corridors that may stop early and leave a
//! dead-end stub. Each new door is hidden with `p_hidden_door` and each newly
//! dug corridor cell with `p_hidden_corridor`.

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::level::{LevelMap, Position, Rect, Room, Tile, TileKind, WallKind, DEFAULT_HEIGHT, DEFAULT_WIDTH};
use crate::rng::{rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub room_count: RangeInclusive<usize>,
    pub secrets_enabled: bool,
    pub p_hidden_door: f64,
    pub p_hidden_corridor: f64,
    /// Closets: one corridor cell behind a door in a room's top or bottom wall.
    pub niches: bool,
    pub p_hidden_niche_door: f64,
    pub width: usize,
    pub height: usize,
    /// Interior width range of a room.
    pub room_width: RangeInclusive<usize>,
    /// Interior height range of a room.
    pub room_height: RangeInclusive<usize>,
    pub min_room_area: usize,
    pub max_attempts: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            room_count: 6..=9,
            secrets_enabled: true,
            p_hidden_door: 1.0 / 8.0,
            p_hidden_corridor: 1.0 / 100.0,
            niches: true,
            p_hidden_niche_door: 4.0 / 5.0,
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            room_width: 3..=12,
            room_height: 2..=5,
            min_room_area: 6,
            max_attempts: 200,
        }
    }
}

impl GenConfig {
    pub fn with_seed(seed: u64) -> Self {
        GenConfig { seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        let probs = [self.p_hidden_door, self.p_hidden_corridor, self.p_hidden_niche_door];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("hidden probabilities must lie in [0, 1]");
        }
        if *self.room_count.start() < 1 || self.room_count.is_empty() {
            return bad("room count range must be non-empty and at least 1");
        }
        if self.room_width.is_empty() || self.room_height.is_empty() || *self.room_width.start() < 1 {
            return bad("room size ranges must be non-empty");
        }
        if *self.room_width.end() * *self.room_height.end() < self.min_room_area {
            return bad("minimum room area exceeds the largest possible room");
        }
        if self.width < 8 || self.height < 6 {
            return bad("map too small");
        }
        Ok(())
    }
}

/// Generates a level; deterministic in `config.seed`.
pub fn generate(config: &GenConfig) -> Result<LevelMap> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    for _ in 0..config.max_attempts {
        if let Some(map) = Builder::new(config, &mut rng).build() {
            return Ok(map);
        }
    }
    Err(Error::GenerationFailed { attempts: config.max_attempts })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenStats {
    pub maps: usize,
    pub mean_rooms: f64,
    pub mean_hidden_spots: f64,
    pub mean_hidden_doors: f64,
    pub mean_hidden_corridors: f64,
    /// Fraction of maps with at least one room unreachable without secrets.
    pub frac_with_secret_room: f64,
}

pub fn stats(maps: &[LevelMap]) -> GenStats {
    let n = maps.len().max(1) as f64;
    let mut rooms = 0usize;
    let mut doors = 0usize;
    let mut corridors = 0usize;
    let mut with_secret = 0usize;
    for m in maps {
        rooms += m.rooms().len();
        for p in m.hidden_positions() {
            if m.tile(p).kind == TileKind::Door {
                doors += 1;
            } else {
                corridors += 1;
            }
        }
        if !m.secret_rooms().is_empty() {
            with_secret += 1;
        }
    }
    GenStats {
        maps: maps.len(),
        mean_rooms: rooms as f64 / n,
        mean_hidden_spots: (doors + corridors) as f64 / n,
        mean_hidden_doors: doors as f64 / n,
        mean_hidden_corridors: corridors as f64 / n,
        frac_with_secret_room: with_secret as f64 / n,
    }
}

struct Builder<'a> {
    cfg: &'a GenConfig,
    rng: &'a mut Rng,
    w: usize,
    h: usize,
    tiles: Vec<Tile>,
    rooms: Vec<Room>,
    /// Connectivity class per room, merged as corridors succeed.
    class: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dig {
    Done,
    Failed,
}

impl<'a> Builder<'a> {
    fn new(cfg: &'a GenConfig, rng: &'a mut Rng) -> Self {
        let (w, h) = (cfg.width, cfg.height);
        Builder { cfg, rng, w, h, tiles: vec![Tile::ROCK; w * h], rooms: Vec::new(), class: Vec::new() }
    }

    fn at(&self, x: usize, y: usize) -> Tile {
        self.tiles[y * self.w + x]
    }

    fn set(&mut self, x: usize, y: usize, t: Tile) {
        self.tiles[y * self.w + x] = t;
    }

    fn build(mut self) -> Option<LevelMap> {
        let target = self.rng.random_range(self.cfg.room_count.clone());
        self.place_rooms(target);
        if self.rooms.len() < *self.cfg.room_count.start() {
            return None;
        }
        self.rooms.sort_by_key(|r| (r.bounds.x0, r.bounds.y0));
        for room in self.rooms.clone() {
            let o = room.outer();
            for p in o.cells() {
                let kind = if room.bounds.contains(p) {
                    TileKind::Floor
                } else if p.y == o.y0 || p.y == o.y1 {
                    TileKind::Wall(WallKind::Horizontal)
                } else {
                    TileKind::Wall(WallKind::Vertical)
                };
                self.set(p.x, p.y, Tile::new(kind));
            }
        }
        self.class = (0..self.rooms.len()).collect();
        self.make_corridors();
        if self.cfg.niches {
            self.make_niches();
        }

        let start_room = self.rng.random_range(0..self.rooms.len());
        let start = self.rooms[start_room].centre();
        let map = LevelMap::new(self.w, self.h, self.tiles, self.rooms, start).ok()?;
        // every room must be connected once secrets are revealed
        (map.rooms_reachable(true).len() == map.rooms().len()).then_some(map)
    }

    fn place_rooms(&mut self, target: usize) {
        let cols = 3;
        let rows = 3;
        let mut regions: Vec<(usize, usize)> = (0..rows).flat_map(|r| (0..cols).map(move |c| (c, r))).collect();
        regions.shuffle(self.rng);
        let usable_w = self.w - 2;
        let usable_h = self.h - 2;
        for &(c, r) in regions.iter().cycle().take(regions.len() * 2) {
            if self.rooms.len() >= target {
                break;
            }
            let rx0 = 1 + c * usable_w / cols;
            let rx1 = 1 + (c + 1) * usable_w / cols;
            let ry0 = 1 + r * usable_h / rows;
            let ry1 = 1 + (r + 1) * usable_h / rows;
            for _ in 0..20 {
                let iw = self.rng.random_range(self.cfg.room_width.clone());
                let ih = self.rng.random_range(self.cfg.room_height.clone());
                if iw * ih < self.cfg.min_room_area {
                    continue;
                }
                // outer rectangle is (iw+2)×(ih+2); its top-left lies in the region
                let ox = self.rng.random_range(rx0..rx1);
                let oy = self.rng.random_range(ry0..ry1);
                let ox1 = ox + iw + 1;
                let oy1 = oy + ih + 1;
                // keep one free row/column at the edge so corridors can pass
                if ox < 1 || oy < 1 || ox1 + 1 >= self.w || oy1 + 1 >= self.h {
                    continue;
                }
                let outer = Rect::new(ox, oy, ox1, oy1);
                let clear = self.rooms.iter().all(|other| {
                    let o = other.outer();
                    // at least one rock cell between wall rings
                    outer.x1 + 1 < o.x0 || o.x1 + 1 < outer.x0 || outer.y1 + 1 < o.y0 || o.y1 + 1 < outer.y0
                });
                if clear {
                    let bounds = Rect::new(ox + 1, oy + 1, ox1 - 1, oy1 - 1);
                    self.rooms.push(Room { bounds, doors: Vec::new() });
                    break;
                }
            }
        }
    }

    fn make_corridors(&mut self) {
        let n = self.rooms.len();
        for a in 0..n.saturating_sub(1) {
            self.join(a, a + 1, false);
            if self.rng.random_ratio(1, 50) {
                break;
            }
        }
        for a in 0..n.saturating_sub(2) {
            if self.class[a] != self.class[a + 2] {
                self.join(a, a + 2, false);
            }
        }
        for a in 0..n {
            for b in 0..n {
                if self.class[a] != self.class[b] {
                    self.join(a, b, false);
                }
            }
        }
        if n > 2 {
            let extra = self.rng.random_range(0..n) + 4;
            for _ in 0..extra {
                let a = self.rng.random_range(0..n);
                let mut b = self.rng.random_range(0..n - 2);
                if b >= a {
                    b += 2;
                }
                self.join(a, b, true);
            }
        }
    }

    fn make_niches(&mut self) {
        let n = self.rooms.len();
        let count = self.rng.random_range(1..=n / 2 + 1);
        for _ in 0..count {
            self.make_niche();
        }
    }

    fn make_niche(&mut self) {
        for _ in 0..8 {
            let r = self.rng.random_range(0..self.rooms.len());
            if self.rooms[r].doors.len() == 1 && !self.rng.random_ratio(1, 5) {
                continue;
            }
            let b = self.rooms[r].bounds;
            let (wall_y, dy) = if self.rng.random_bool(0.5) { (b.y1 + 1, 1isize) } else { (b.y0 - 1, -1) };
            let Some(door) = self.find_door_pos(b.x0, wall_y, b.x1, wall_y) else { continue };
            let ny = door.y as isize + dy;
            if !self.in_interior(door.x as isize, ny) || self.is_door(door.x, door.y) {
                continue;
            }
            let ny = ny as usize;
            // the closet must not touch anything but its own door
            let isolated = (door.x - 1..=door.x + 1).all(|x| {
                (ny.saturating_sub(1)..=ny + 1).all(|y| {
                    (x, y) == (door.x, door.y) || y == door.y || y >= self.h || self.at(x, y).kind == TileKind::Rock
                })
            });
            if !isolated {
                continue;
            }
            self.set(door.x, ny, Tile::new(TileKind::Corridor));
            let hidden = self.cfg.secrets_enabled && self.rng.random_bool(self.cfg.p_hidden_niche_door);
            self.set(door.x, door.y, Tile { kind: TileKind::Door, hidden });
            self.rooms[r].doors.push(door);
            return;
        }
    }

    /// Connects room `a` to room `b`. With `stub` set the corridor may stop early,
    /// leaving a dead end hanging off a door of `a`.
    fn join(&mut self, a: usize, b: usize, stub: bool) {
        let (ra, rb) = (self.rooms[a].bounds, self.rooms[b].bounds);
        // door positions on the facing walls and the initial digging direction
        let (da, db, dx, dy) = if rb.x0 > ra.x1 + 1 {
            let da = self.find_door_pos(ra.x1 + 1, ra.y0, ra.x1 + 1, ra.y1);
            let db = self.find_door_pos(rb.x0 - 1, rb.y0, rb.x0 - 1, rb.y1);
            (da, db, 1isize, 0isize)
        } else if rb.y1 + 1 < ra.y0 {
            let da = self.find_door_pos(ra.x0, ra.y0 - 1, ra.x1, ra.y0 - 1);
            let db = self.find_door_pos(rb.x0, rb.y1 + 1, rb.x1, rb.y1 + 1);
            (da, db, 0, -1)
        } else if rb.x1 + 1 < ra.x0 {
            let da = self.find_door_pos(ra.x0 - 1, ra.y0, ra.x0 - 1, ra.y1);
            let db = self.find_door_pos(rb.x1 + 1, rb.y0, rb.x1 + 1, rb.y1);
            (da, db, -1, 0)
        } else {
            let da = self.find_door_pos(ra.x0, ra.y1 + 1, ra.x1, ra.y1 + 1);
            let db = self.find_door_pos(rb.x0, rb.y0 - 1, rb.x1, rb.y0 - 1);
            (da, db, 0, 1)
        };
        let (Some(da), Some(db)) = (da, db) else { return };
        let org = (da.x as isize + dx, da.y as isize + dy);
        let dest = (db.x as isize - dx, db.y as isize - dy);
        if !self.in_interior(org.0, org.1) || !self.in_interior(dest.0, dest.1) {
            return;
        }
        if stub && self.at(org.0 as usize, org.1 as usize).kind != TileKind::Rock {
            return;
        }
        let mut dug = Vec::new();
        match self.dig_corridor(org, dest, dx, dy, stub, &mut dug) {
            Dig::Done => {
                self.make_door(da, a);
                self.make_door(db, b);
                let (ca, cb) = (self.class[a], self.class[b]);
                let (lo, hi) = (ca.min(cb), ca.max(cb));
                for c in self.class.iter_mut() {
                    if *c == hi {
                        *c = lo;
                    }
                }
            }
            Dig::Failed if stub && !dug.is_empty() => self.make_door(da, a),
            Dig::Failed => {
                for (x, y) in dug {
                    self.set(x, y, Tile::ROCK);
                }
            }
        }
    }

    fn in_interior(&self, x: isize, y: isize) -> bool {
        x > 0 && y > 0 && (x as usize) < self.w - 1 && (y as usize) < self.h - 1
    }

    fn is_door(&self, x: usize, y: usize) -> bool {
        self.at(x, y).kind == TileKind::Door
    }

    fn door_adjacent(&self, x: usize, y: usize) -> bool {
        [(0isize, -1isize), (-1, 0), (1, 0), (0, 1)].iter().any(|&(ddx, ddy)| {
            let (nx, ny) = (x as isize + ddx, y as isize + ddy);
            nx >= 0 && ny >= 0 && (nx as usize) < self.w && (ny as usize) < self.h && self.is_door(nx as usize, ny as usize)
        })
    }

    fn ok_door(&self, x: usize, y: usize) -> bool {
        self.at(x, y).kind.is_wall() && !self.door_adjacent(x, y)
    }

    /// Picks a door cell on a wall segment: a random eligible wall, else an existing door.
    fn find_door_pos(&mut self, x0: usize, y0: usize, x1: usize, y1: usize) -> Option<Position> {
        let cells: Vec<Position> = Rect::new(x0, y0, x1, y1).cells().collect();
        let ok: Vec<Position> = cells.iter().copied().filter(|p| self.ok_door(p.x, p.y)).collect();
        if !ok.is_empty() {
            return Some(ok[self.rng.random_range(0..ok.len())]);
        }
        cells.into_iter().find(|p| self.is_door(p.x, p.y))
    }

    fn make_door(&mut self, p: Position, room: usize) {
        if self.at(p.x, p.y).kind.is_wall() {
            let hidden = self.cfg.secrets_enabled && self.rng.random_bool(self.cfg.p_hidden_door);
            self.set(p.x, p.y, Tile { kind: TileKind::Door, hidden });
        }
        if !self.rooms[room].doors.contains(&p) {
            self.rooms[room].doors.push(p);
        }
    }

    fn passable_for_digging(&self, x: isize, y: isize) -> bool {
        self.in_interior(x, y) && matches!(self.at(x as usize, y as usize).kind, TileKind::Rock | TileKind::Corridor)
    }

    /// Digs from `org` toward `dest` with NetHack's corridor walk: mostly straight,
    /// turning toward the target with a probability that grows as the axes even out.
    fn dig_corridor(
        &mut self,
        org: (isize, isize),
        dest: (isize, isize),
        mut dx: isize,
        mut dy: isize,
        stub: bool,
        dug: &mut Vec<(usize, usize)>,
    ) -> Dig {
        let (tx, ty) = dest;
        let (mut x, mut y) = org;
        // the origin itself is dug first
        if !self.dig_cell(x, y, dug) {
            return Dig::Failed;
        }
        let mut steps = 0;
        while (x, y) != (tx, ty) {
            steps += 1;
            if steps > 500 || (stub && self.rng.random_ratio(1, 35)) {
                return Dig::Failed;
            }
            x += dx;
            y += dy;
            if !self.in_interior(x, y) || !self.dig_cell(x, y, dug) {
                return Dig::Failed;
            }
            let mut dix = (x - tx).abs();
            let mut diy = (y - ty).abs();
            if dix > diy && diy > 0 && self.rng.random_range(0..(dix - diy + 1) as u32) == 0 {
                dix = 0;
            } else if diy > dix && dix > 0 && self.rng.random_range(0..(diy - dix + 1) as u32) == 0 {
                diy = 0;
            }
            if dy != 0 && dix > diy {
                let ddx = if x > tx { -1 } else { 1 };
                if self.passable_for_digging(x + ddx, y) {
                    dx = ddx;
                    dy = 0;
                    continue;
                }
            } else if dx != 0 && diy > dix {
                let ddy = if y > ty { -1 } else { 1 };
                if self.passable_for_digging(x, y + ddy) {
                    dy = ddy;
                    dx = 0;
                    continue;
                }
            }
            if self.passable_for_digging(x + dx, y + dy) {
                continue;
            }
            if dx != 0 {
                dx = 0;
                dy = if ty < y { -1 } else { 1 };
                if !self.passable_for_digging(x, y + dy) {
                    dy = -dy;
                }
            } else {
                dy = 0;
                dx = if tx < x { -1 } else { 1 };
                if !self.passable_for_digging(x + dx, y) {
                    dx = -dx;
                }
            }
        }
        Dig::Done
    }

    fn dig_cell(&mut self, x: isize, y: isize, dug: &mut Vec<(usize, usize)>) -> bool {
        let (ux, uy) = (x as usize, y as usize);
        match self.at(ux, uy).kind {
            TileKind::Rock => {
                let hidden = self.cfg.secrets_enabled && self.rng.random_bool(self.cfg.p_hidden_corridor);
                self.set(ux, uy, Tile { kind: TileKind::Corridor, hidden });
                dug.push((ux, uy));
                true
            }
            TileKind::Corridor => true,
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::Connectivity;

    #[test]
    fn same_seed_same_map() {
        let a = generate(&GenConfig::with_seed(42)).unwrap();
        let b = generate(&GenConfig::with_seed(42)).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        let c = generate(&GenConfig::with_seed(43)).unwrap();
        assert_ne!(a.to_text(), c.to_text());
    }

    #[test]
    fn no_secrets_means_all_rooms_open() {
        for seed in 0..50 {
            let cfg = GenConfig { secrets_enabled: false, ..GenConfig::with_seed(seed) };
            let map = generate(&cfg).unwrap();
            assert!(map.hidden_positions().is_empty());
            assert_eq!(map.rooms_reachable_without_secrets().len(), map.rooms().len());
        }
    }

    #[test]
    fn zero_hidden_probabilities_give_no_hidden_spots() {
        let maps: Vec<_> = (0..20)
            .map(|s| {
                let cfg = GenConfig {
                    p_hidden_door: 0.0,
                    p_hidden_corridor: 0.0,
                    p_hidden_niche_door: 0.0,
                    ..GenConfig::with_seed(s)
                };
                generate(&cfg).unwrap()
            })
            .collect();
        assert_eq!(stats(&maps).mean_hidden_spots, 0.0);
    }

    #[test]
    fn structural_invariants() {
        for seed in 0..100 {
            let map = generate(&GenConfig::with_seed(seed)).unwrap();
            let rooms = map.rooms();
            assert!((6..=9).contains(&rooms.len()), "seed {seed}: {} rooms", rooms.len());
            for (i, a) in rooms.iter().enumerate() {
                assert!(!a.doors.is_empty(), "seed {seed}: room {i} has no door");
                for b in &rooms[i + 1..] {
                    let (oa, ob) = (a.outer(), b.outer());
                    let apart = oa.x1 + 1 < ob.x0 || ob.x1 + 1 < oa.x0 || oa.y1 + 1 < ob.y0 || ob.y1 + 1 < oa.y0;
                    assert!(apart, "seed {seed}: rooms touch");
                }
            }
            // all traversable cells connected once secrets are revealed
            let reach = map.reachable(true);
            for p in map.positions() {
                if map.tile(p).kind.is_traversable() {
                    assert!(reach[map.idx(p)], "seed {seed}: {p} disconnected");
                }
            }
            // corridors are 4-connected to something traversable
            for p in map.positions() {
                if map.tile(p).kind == TileKind::Corridor {
                    let n = map
                        .neighbors(p, Connectivity::Four)
                        .into_iter()
                        .filter(|&q| map.tile(q).kind.is_traversable())
                        .count();
                    assert!(n >= 1, "seed {seed}: isolated corridor cell {p}");
                }
            }
            assert_eq!(LevelMap::parse(&map.to_text()).unwrap(), map);
        }
    }

    #[test]
    fn rejects_invalid_config() {
        assert!(generate(&GenConfig { p_hidden_door: 1.5, ..Default::default() }).is_err());
        #[allow(clippy::reversed_empty_ranges)]
        let empty = GenConfig { room_count: 5..=4, ..Default::default() };
        assert!(generate(&empty).is_err());
    }

    #[test]
    fn too_many_rooms_fails_after_bounded_retries() {
        let cfg = GenConfig { room_count: 40..=40, max_attempts: 3, ..Default::default() };
        assert!(matches!(generate(&cfg), Err(Error::GenerationFailed { attempts: 3 })));
    }
}
