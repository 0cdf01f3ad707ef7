//! Plain-text frames of an agent's view.

use crate::components::{Anchor, Component};
use crate::level::Position;
use crate::sim::AgentView;

/// Overlay drawn on top of the known map.
#[derive(Debug, Clone, Default)]
pub struct Overlay<'a> {
    pub agent: Option<Position>,
    pub frontiers: &'a [Position],
    pub components: &'a [Component],
    pub target: Option<Position>,
}

/// Glyph key: known tiles as in map files, `@` agent, `^` frontier, `x` component
/// cell, `h` hidden-component cell, `o` priority-component cell, `*` target,
/// `S` search spot.
pub fn render(view: &AgentView, overlay: &Overlay<'_>) -> String {
    let (w, h) = (view.width(), view.height());
    let mut grid: Vec<char> = view.positions().map(|p| view.kind(p).map_or(' ', |k| k.glyph())).collect();
    for c in overlay.components {
        let mark = if c.priority {
            'o'
        } else if c.hidden {
            'h'
        } else {
            'x'
        };
        for &p in &c.cells {
            if c.priority || view.is_unknown(p) {
                grid[view.idx(p)] = mark;
            }
        }
        if let Anchor::SearchSpot { spot, .. } = c.anchor {
            grid[view.idx(spot)] = 'S';
        }
    }
    for &f in overlay.frontiers {
        grid[view.idx(f)] = '^';
    }
    if let Some(t) = overlay.target {
        grid[view.idx(t)] = '*';
    }
    if let Some(a) = overlay.agent {
        grid[view.idx(a)] = '@';
    }
    let mut s = String::with_capacity((w + 1) * h);
    for row in grid.chunks(w) {
        s.extend(row.iter().copied().collect::<String>().trim_end().chars());
        s.push('\n');
    }
    s
}
