//! Occupancy grid: per-cell probability that the cell belongs to a room the
//! agent has not visited yet.
//!
//! Known walls, rock, corridors, doors and visited floor are clamped to zero and
//! stay zero through diffusion. The total mass is renormalized to 1 after every
//! update. Out-of-bounds neighbours reflect the cell's own value, so a uniform
//! grid is a fixed point of diffusion and borders do not leak mass.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::level::{Position, TileKind};
use crate::sim::AgentView;

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    prob: Vec<f64>,
    clamped: Vec<bool>,
    /// Cells reset by a secret discovery; exempt from clamping until visited.
    exempt: Vec<bool>,
    baseline: f64,
}

/// Whether an observed cell can still be part of an unvisited room.
fn observation_clamps(view: &AgentView, i: usize) -> bool {
    match view.kind_at(i) {
        None => false,
        Some(TileKind::Floor) => view.visited_at(i),
        Some(_) => true,
    }
}

impl OccupancyGrid {
    /// Uniform grid with the border ring scaled by `border_multiplier`, observed cells zeroed.
    pub fn init(view: &AgentView, border_multiplier: f64) -> Self {
        let (w, h) = (view.width(), view.height());
        let n = w * h;
        let baseline = 1.0 / n as f64;
        let mut prob = vec![baseline; n];
        for y in 0..h {
            for x in 0..w {
                if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                    prob[y * w + x] *= border_multiplier;
                }
            }
        }
        let mut grid =
            OccupancyGrid { width: w, height: h, prob, clamped: vec![false; n], exempt: vec![false; n], baseline };
        grid.clamp_observed(view);
        grid.renormalize();
        grid
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn prob(&self, p: Position) -> f64 {
        self.prob[p.y * self.width + p.x]
    }

    pub fn probs(&self) -> &[f64] {
        &self.prob
    }

    pub fn is_clamped(&self, p: Position) -> bool {
        self.clamped[p.y * self.width + p.x]
    }

    pub fn total(&self) -> f64 {
        self.prob.iter().sum()
    }

    fn clamp_observed(&mut self, view: &AgentView) -> usize {
        let mut newly = 0;
        for i in 0..self.prob.len() {
            if self.clamped[i] {
                continue;
            }
            if self.exempt[i] && !view.visited_at(i) {
                continue;
            }
            if observation_clamps(view, i) {
                self.clamped[i] = true;
                self.exempt[i] = false;
                self.prob[i] = 0.0;
                newly += 1;
            }
        }
        newly
    }

    fn renormalize(&mut self) -> bool {
        let total = self.total();
        if total <= 0.0 || !total.is_finite() {
            return false;
        }
        for p in &mut self.prob {
            *p /= total;
        }
        true
    }

    /// Zeroes newly observed walls, rock, corridors, doors and visited floor, then
    /// renormalizes. Returns the number of newly clamped cells.
    pub fn update_observation(&mut self, view: &AgentView) -> Result<usize> {
        let newly = self.clamp_observed(view);
        if newly > 0 && !self.renormalize() {
            return Err(Error::Exhausted);
        }
        if self.total() <= 0.0 {
            return Err(Error::Exhausted);
        }
        Ok(newly)
    }

    /// One synchronous diffusion pass without renormalization.
    pub fn diffuse_unnormalized(&mut self, lambda: f64) {
        let (w, h) = (self.width, self.height);
        let prev = self.prob.clone();
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if self.clamped[i] {
                    continue;
                }
                let own = prev[i];
                let left = if x > 0 { prev[i - 1] } else { own };
                let right = if x + 1 < w { prev[i + 1] } else { own };
                let up = if y > 0 { prev[i - w] } else { own };
                let down = if y + 1 < h { prev[i + w] } else { own };
                self.prob[i] = diffused_value(lambda, own, [left, right, up, down]);
            }
        }
    }

    /// One diffusion pass, then renormalization.
    pub fn diffuse(&mut self, lambda: f64) -> Result<()> {
        self.diffuse_unnormalized(lambda);
        if self.renormalize() {
            Ok(())
        } else {
            Err(Error::Exhausted)
        }
    }

    /// Puts a cell back at the uniform baseline (after a hidden spot there was revealed).
    pub fn reset_cell(&mut self, p: Position) -> Result<()> {
        let i = p.y * self.width + p.x;
        self.clamped[i] = false;
        self.exempt[i] = true;
        self.prob[i] = self.baseline;
        if self.renormalize() {
            Ok(())
        } else {
            Err(Error::Exhausted)
        }
    }

    /// True when every unknown cell within Chebyshev `radius` of `frontier` is
    /// below `threshold` times the baseline.
    pub fn frontier_is_low_utility(&self, view: &AgentView, frontier: Position, radius: usize, threshold: f64) -> bool {
        let cut = threshold * self.baseline;
        let x0 = frontier.x.saturating_sub(radius);
        let y0 = frontier.y.saturating_sub(radius);
        let x1 = (frontier.x + radius).min(self.width - 1);
        let y1 = (frontier.y + radius).min(self.height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let p = Position::new(x, y);
                if view.is_unknown(p) && self.prob(p) >= cut {
                    return false;
                }
            }
        }
        true
    }

    /// Plain (P2) grayscale image; brightness scaled to the grid maximum. Zero cells
    /// are black and every non-zero cell is at least 1.
    pub fn to_pgm(&self) -> String {
        let max = self.prob.iter().copied().fold(0.0_f64, f64::max);
        let mut out = format!("P2\n{} {}\n255\n", self.width, self.height);
        for y in 0..self.height {
            let row: Vec<String> = (0..self.width)
                .map(|x| {
                    let p = self.prob[y * self.width + x];
                    let v = if p <= 0.0 || max <= 0.0 { 0 } else { ((p / max) * 255.0).round().clamp(1.0, 255.0) as u32 };
                    v.to_string()
                })
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }
}

/// `(1 - λ)·p + (λ/4)·Σ neighbours`.
pub fn diffused_value(lambda: f64, own: f64, neighbours: [f64; 4]) -> f64 {
    (1.0 - lambda) * own + lambda / 4.0 * neighbours.iter().sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::WallKind;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn init_uniform_and_border() {
        let view = AgentView::new(80, 20);
        let g = OccupancyGrid::init(&view, 1.0);
        assert!(g.probs().iter().all(|&p| close(p, 1.0 / 1600.0)));

        let g = OccupancyGrid::init(&view, 0.0);
        assert_eq!(g.prob(Position::new(0, 5)), 0.0);
        assert_eq!(g.prob(Position::new(79, 19)), 0.0);
        assert!(g.prob(Position::new(1, 1)) > 0.0);

        let g = OccupancyGrid::init(&view, 0.35);
        let ratio = g.prob(Position::new(5, 5)) / g.prob(Position::new(0, 5));
        assert!((ratio - 1.0 / 0.35).abs() < 1e-9);
        assert!((g.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn observation_zeroes_and_renormalizes() {
        let mut view = AgentView::new(4, 2);
        let mut g = OccupancyGrid::init(&view, 1.0);
        assert_eq!(g.update_observation(&view).unwrap(), 0);
        assert_eq!(g, OccupancyGrid::init(&view, 1.0));
        for x in 0..4 {
            view.set_seen(Position::new(x, 0), TileKind::Wall(WallKind::Horizontal));
        }
        assert_eq!(g.update_observation(&view).unwrap(), 4);
        for x in 0..4 {
            assert!(close(g.prob(Position::new(x, 1)), 0.25));
            assert_eq!(g.prob(Position::new(x, 0)), 0.0);
        }
        for x in 0..4 {
            view.set_seen(Position::new(x, 1), TileKind::Rock);
        }
        assert!(matches!(g.update_observation(&view), Err(Error::Exhausted)));
    }

    #[test]
    fn unvisited_floor_seen_from_afar_keeps_mass() {
        let mut view = AgentView::new(3, 3);
        view.set_seen(Position::new(1, 1), TileKind::Floor);
        let mut g = OccupancyGrid::init(&view, 1.0);
        g.update_observation(&view).unwrap();
        assert!(g.prob(Position::new(1, 1)) > 0.0);
        view.mark_visited(Position::new(1, 1));
        g.update_observation(&view).unwrap();
        assert_eq!(g.prob(Position::new(1, 1)), 0.0);
        g.diffuse(0.9).unwrap();
        assert_eq!(g.prob(Position::new(1, 1)), 0.0);
    }

    #[test]
    fn hand_applied_diffusion() {
        let v = diffused_value(0.65, 0.5, [0.1, 0.0, 0.0, 0.3]);
        assert!(close(v, 0.35 * 0.5 + 0.1625 * 0.4));
        assert!(close(v, 0.24));
    }

    #[test]
    fn clamped_cell_stays_zero_and_uniform_is_fixed_point() {
        let mut view = AgentView::new(10, 6);
        let mut g = OccupancyGrid::init(&view, 1.0);
        let before = g.clone();
        g.diffuse(0.65).unwrap();
        for (a, b) in g.probs().iter().zip(before.probs()) {
            assert!(close(*a, *b));
        }
        view.set_seen(Position::new(4, 3), TileKind::Wall(WallKind::Vertical));
        g.update_observation(&view).unwrap();
        for _ in 0..20 {
            g.diffuse(0.65).unwrap();
            assert_eq!(g.prob(Position::new(4, 3)), 0.0);
        }
        // the zero seeps: neighbours of the wall are now below the far corner
        assert!(g.prob(Position::new(5, 3)) < g.prob(Position::new(9, 0)));
    }

    #[test]
    fn reset_cell_returns_to_baseline_share() {
        let mut view = AgentView::new(4, 4);
        view.set_seen(Position::new(1, 1), TileKind::Wall(WallKind::Vertical));
        let mut g = OccupancyGrid::init(&view, 1.0);
        assert_eq!(g.prob(Position::new(1, 1)), 0.0);
        view.set_seen(Position::new(1, 1), TileKind::Door);
        g.reset_cell(Position::new(1, 1)).unwrap();
        g.update_observation(&view).unwrap();
        // the other 15 cells shared the mass; the reset cell adds one baseline share
        assert!(close(g.prob(Position::new(1, 1)), 1.0 / 17.0));
        assert!((g.total() - 1.0).abs() < 1e-12);
        view.mark_visited(Position::new(1, 1));
        g.update_observation(&view).unwrap();
        assert_eq!(g.prob(Position::new(1, 1)), 0.0);
    }

    #[test]
    fn low_utility_frontiers() {
        let mut view = AgentView::new(10, 10);
        for x in 0..10 {
            for y in 0..5 {
                view.set_seen(Position::new(x, y), TileKind::Rock);
            }
        }
        view.set_seen(Position::new(5, 4), TileKind::Corridor);
        let g = OccupancyGrid::init(&view, 1.0);
        // fresh unknown space below the frontier sits well above threshold·baseline
        assert!(!g.frontier_is_low_utility(&view, Position::new(5, 4), 2, 0.35));

        // a dead pocket: everything zero
        let mut dead = g.clone();
        for i in 0..100 {
            if dead.prob[i] > 0.0 && i != 99 {
                dead.prob[i] = 0.0;
            }
        }
        dead.renormalize();
        assert!(dead.frontier_is_low_utility(&view, Position::new(5, 4), 2, 0.35));
    }

    #[test]
    fn pgm_zero_cells_match_clamped() {
        let mut view = AgentView::new(5, 3);
        view.set_seen(Position::new(2, 1), TileKind::Rock);
        let g = OccupancyGrid::init(&view, 0.5);
        let pgm = g.to_pgm();
        let values: Vec<u32> = pgm.split_whitespace().skip(4).map(|t| t.parse().unwrap()).collect();
        assert_eq!(values.len(), 15);
        for (i, v) in values.iter().enumerate() {
            assert_eq!(*v == 0, g.clamped[i]);
        }
    }
}
