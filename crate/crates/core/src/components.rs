//! Unexplored-space decomposition: frontiers, maximal rectangles of unknown
//! cells, and the association of each rectangle with a frontier.

use crate::level::{Connectivity, Position, Rect, TileKind};
use crate::occupancy::OccupancyGrid;
use crate::sim::AgentView;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Frontier(Position),
    /// A wall or dead-end to search, and the cell to stand on while searching.
    SearchSpot { spot: Position, stand: Position },
    Unanchored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    /// Bounding rectangle; equal to the cell set for decomposition components.
    pub bounds: Rect,
    pub cells: Vec<Position>,
    /// Probability mass of the cells over the mass of the grid.
    pub utility: f64,
    pub anchor: Anchor,
    /// No frontier sees into the component.
    pub hidden: bool,
    /// Partially seen room at the end of a straight corridor; always preferred.
    pub priority: bool,
}

impl Component {
    pub fn area(&self) -> usize {
        self.cells.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeParams {
    /// Minimum count of unknown cells in a cell's 8-neighbourhood for it to take part.
    pub dfs_min_neighbors: usize,
    /// Cells below this multiple of the baseline probability are ignored.
    pub component_threshold: f64,
    pub min_room_size: usize,
    pub min_secret_room_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrontierInfo {
    pub pos: Position,
    /// Surrounded by low probability; may not anchor a component.
    pub low_utility: bool,
    /// Path length from the agent, used to break association ties.
    pub dist: u32,
}

/// Seen traversable cells bordering unknown space (4-neighbourhood), plus doors of
/// visited rooms the agent has not stood on. Row-major order, no duplicates.
pub fn find_frontiers(view: &AgentView) -> Vec<Position> {
    view.positions()
        .filter(|&p| view.is_traversable(p) && (view.borders_unknown(p) || is_unentered_exit(view, p)))
        .collect()
}

fn is_unentered_exit(view: &AgentView, p: Position) -> bool {
    view.kind(p) == Some(TileKind::Door)
        && !view.is_visited(p)
        && view
            .neighbors(p, Connectivity::Four)
            .into_iter()
            .any(|n| view.kind(n) == Some(TileKind::Floor) && view.is_visited(n))
}

/// Greedy largest-first rectangle cover of the `true` cells of a `width`-wide mask.
/// Ties go to the rectangle whose top-left is first in row-major order, then to the
/// wider one. Stops once the largest remaining rectangle is smaller than `min_area`.
pub fn maximal_rectangles_mask(mask: &[bool], width: usize, min_area: usize) -> Vec<Rect> {
    if width == 0 {
        return Vec::new();
    }
    let height = mask.len() / width;
    let mut mask = mask.to_vec();
    let mut run = vec![0usize; mask.len()];
    let mut out = Vec::new();
    loop {
        // run[i]: consecutive cells from i to the right
        for y in 0..height {
            let mut r = 0;
            for x in (0..width).rev() {
                let i = y * width + x;
                r = if mask[i] { r + 1 } else { 0 };
                run[i] = r;
            }
        }
        let mut best: Option<(usize, Rect)> = None;
        for y in 0..height {
            for x in 0..width {
                let mut w = run[y * width + x];
                if w == 0 {
                    continue;
                }
                // upper bound: no rectangle from here can beat the best so far
                if let Some((a, _)) = best {
                    if w * (height - y) <= a {
                        continue;
                    }
                }
                for yy in y..height {
                    w = w.min(run[yy * width + x]);
                    if w == 0 {
                        break;
                    }
                    let area = w * (yy - y + 1);
                    if best.is_none_or(|(a, _)| area > a) {
                        best = Some((area, Rect::new(x, y, x + w - 1, yy)));
                    }
                }
            }
        }
        match best {
            Some((area, rect)) if area >= min_area.max(1) => {
                for p in rect.cells() {
                    mask[p.y * width + p.x] = false;
                }
                out.push(rect);
            }
            _ => break,
        }
    }
    out
}

/// Rectangles covering exactly `cells`, extracted greedily largest-first.
pub fn maximal_rectangles(cells: &[Position]) -> Vec<Rect> {
    let Some(w) = cells.iter().map(|p| p.x + 1).max() else { return Vec::new() };
    let h = cells.iter().map(|p| p.y + 1).max().unwrap_or(0);
    let mut mask = vec![false; w * h];
    for p in cells {
        mask[p.y * w + p.x] = true;
    }
    maximal_rectangles_mask(&mask, w, 1)
}

/// Cells of the Bresenham line from `a` to `b`, both ends included.
pub fn bresenham(a: Position, b: Position) -> Vec<Position> {
    let (mut x, mut y) = (a.x as isize, a.y as isize);
    let (x1, y1) = (b.x as isize, b.y as isize);
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push(Position::new(x as usize, y as usize));
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

/// True when every cell of the line from `from` to `to` is unknown.
pub fn clear_line_through_unknown(view: &AgentView, from: Position, to: Position) -> bool {
    bresenham(from, to).into_iter().all(|p| view.is_unknown(p))
}

fn dist2(a: Position, b: Position) -> usize {
    let dx = a.x.abs_diff(b.x);
    let dy = a.y.abs_diff(b.y);
    dx * dx + dy * dy
}

/// Squared length of the shortest unknown-only line from one of the frontier's
/// unknown 4-neighbours to the closest cell of `bounds`.
fn sight_line(bounds: &Rect, f: Position, view: &AgentView) -> Option<usize> {
    view.neighbors(f, Connectivity::Four)
        .into_iter()
        .filter(|&u| view.is_unknown(u))
        .filter_map(|u| {
            let target = bounds.nearest_cell(u);
            clear_line_through_unknown(view, u, target).then(|| dist2(u, target))
        })
        .min()
}

/// The frontier nearest to `bounds` that sees it: a straight line of unknown
/// cells runs from a cell beside the frontier to the closest cell of `bounds`.
/// Ties go to the row-major-first frontier.
pub fn associate_frontier(bounds: &Rect, frontiers: &[Position], view: &AgentView) -> Option<Position> {
    frontiers
        .iter()
        .filter_map(|&f| sight_line(bounds, f, view).map(|d| (d, f.row_major(), f)))
        .min()
        .map(|(_, _, f)| f)
}

/// As [`associate_frontier`], with ties going to the frontier closest to the agent.
pub fn associate_nearest(bounds: &Rect, frontiers: &[FrontierInfo], view: &AgentView) -> Option<Position> {
    frontiers
        .iter()
        .filter_map(|f| sight_line(bounds, f.pos, view).map(|d| (d, f.dist, f.pos.row_major(), f.pos)))
        .min()
        .map(|(.., f)| f)
}

/// Cells eligible for components: unknown, with enough unknown neighbours, and
/// not below the probability cut.
pub fn eligible_mask(grid: &OccupancyGrid, view: &AgentView, params: &DecomposeParams) -> Vec<bool> {
    let cut = params.component_threshold * grid.baseline();
    let mut mask = vec![false; view.len()];
    for p in view.positions() {
        if !view.is_unknown(p) || grid.prob(p) < cut {
            continue;
        }
        let unknown_nbrs =
            view.neighbors(p, Connectivity::Eight).into_iter().filter(|&n| view.is_unknown(n)).count();
        if unknown_nbrs >= params.dfs_min_neighbors {
            mask[view.idx(p)] = true;
        }
    }
    mask
}

/// Splits eligible unknown space into rectangles and anchors each to a frontier.
///
/// `frontiers` should hold the reachable frontiers. A rectangle that some frontier
/// sees is not hidden; its anchor is the nearest such frontier that is not low
/// utility, and it is dropped if all of them are. Hidden rectangles come back
/// `Unanchored`. Rectangles below the size limit for their kind are dropped.
/// Rectangles of one connected set never span another, so the cover is computed
/// over the whole mask at once.
pub fn decompose(
    grid: &OccupancyGrid,
    view: &AgentView,
    frontiers: &[FrontierInfo],
    params: &DecomposeParams,
) -> Vec<Component> {
    let mask = eligible_mask(grid, view, params);
    let min_area = params.min_room_size.min(params.min_secret_room_size);
    let rects = maximal_rectangles_mask(&mask, view.width(), min_area);
    let usable: Vec<FrontierInfo> = frontiers.iter().filter(|f| !f.low_utility).copied().collect();
    let total = grid.total();
    let mut out = Vec::new();
    for rect in rects {
        let hidden = associate_nearest(&rect, frontiers, view).is_none();
        let anchor = if hidden {
            Anchor::Unanchored
        } else {
            match associate_nearest(&rect, &usable, view) {
                Some(f) => Anchor::Frontier(f),
                None => continue,
            }
        };
        let min = if hidden { params.min_secret_room_size } else { params.min_room_size };
        if rect.area() < min {
            continue;
        }
        let cells: Vec<Position> = rect.cells().collect();
        let mass: f64 = cells.iter().map(|&p| grid.prob(p)).sum();
        out.push(Component {
            bounds: rect,
            cells,
            utility: if total > 0.0 { mass / total } else { 0.0 },
            anchor,
            hidden,
            priority: false,
        });
    }
    out
}

/// Partially seen, unvisited rooms: groups of Seen but unvisited floor cells with
/// the door they were seen through. Unanchored; row-major order.
pub fn corridor_end_room_components(view: &AgentView, grid: &OccupancyGrid) -> Vec<Component> {
    let n = view.len();
    let mut taken = vec![false; n];
    let mut out = Vec::new();
    let is_candidate = |p: Position| view.kind(p) == Some(TileKind::Floor) && !view.is_visited(p);
    for start in view.positions() {
        if taken[view.idx(start)] || !is_candidate(start) {
            continue;
        }
        let mut cells = Vec::new();
        let mut stack = vec![start];
        taken[view.idx(start)] = true;
        while let Some(p) = stack.pop() {
            cells.push(p);
            for q in view.neighbors(p, Connectivity::Eight) {
                let j = view.idx(q);
                if taken[j] {
                    continue;
                }
                if is_candidate(q) || view.kind(q) == Some(TileKind::Door) {
                    taken[j] = true;
                    if is_candidate(q) {
                        stack.push(q);
                    } else {
                        cells.push(q);
                    }
                }
            }
        }
        cells.sort_by_key(|p| p.row_major());
        let x0 = cells.iter().map(|p| p.x).min().unwrap_or(0);
        let x1 = cells.iter().map(|p| p.x).max().unwrap_or(0);
        let y0 = cells.iter().map(|p| p.y).min().unwrap_or(0);
        let y1 = cells.iter().map(|p| p.y).max().unwrap_or(0);
        let total = grid.total();
        let mass: f64 = cells.iter().map(|&p| grid.prob(p)).sum();
        out.push(Component {
            bounds: Rect::new(x0, y0, x1, y1),
            cells,
            utility: if total > 0.0 { mass / total } else { 0.0 },
            anchor: Anchor::Unanchored,
            hidden: false,
            priority: true,
        });
    }
    out
}

/// The first partially seen room, if any.
pub fn corridor_end_room_component(view: &AgentView, grid: &OccupancyGrid) -> Option<Component> {
    corridor_end_room_components(view, grid).into_iter().next()
}
