//! Full-information lower bound on exploration cost.
//!
//! The shortest walk from the start that touches at least one door of every
//! room is a generalized shortest Hamiltonian path (one vertex per cluster,
//! open path from a fixed start). It is turned into a generalized TSP with two
//! dummy clusters and solved exactly by dynamic programming over cluster subsets.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::level::{is_traversable, Connectivity, LevelMap, Position};

/// Cost of a missing edge. Larger than any real tour on a level map.
pub const NO_EDGE: u64 = 1_000_000;

/// Largest cluster count the exact solver accepts.
pub const MAX_CLUSTERS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vertex {
    Start(Position),
    Door { room: usize, pos: Position },
    Dummy(u8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GtspInstance {
    pub vertices: Vec<Vertex>,
    pub clusters: Vec<Vec<usize>>,
    /// Symmetric, row-major `vertices.len()` squared.
    pub cost: Vec<Vec<u64>>,
}

impl GtspInstance {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    fn cluster_of(&self) -> Vec<usize> {
        let mut of = vec![usize::MAX; self.len()];
        for (c, members) in self.clusters.iter().enumerate() {
            for &v in members {
                of[v] = c;
            }
        }
        of
    }

    pub fn validate(&self) -> Result<()> {
        let of = self.cluster_of();
        let count: usize = self.clusters.iter().map(Vec::len).sum();
        if count != self.len() || of.contains(&usize::MAX) || self.clusters.iter().any(Vec::is_empty) {
            return Err(Error::InvalidConfig("clusters must partition the vertices".into()));
        }
        if self.cost.len() != self.len() || self.cost.iter().any(|r| r.len() != self.len()) {
            return Err(Error::InvalidConfig("cost matrix has the wrong shape".into()));
        }
        Ok(())
    }
}

/// A closed tour with one vertex per cluster, listed in visiting order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tour {
    pub vertices: Vec<usize>,
    pub cost: u64,
}

/// BFS distances over the full map with secrets revealed, 8-connected.
pub fn distances_from(map: &LevelMap, from: Position) -> Vec<Option<u32>> {
    let mut dist = vec![None; map.width() * map.height()];
    dist[map.idx(from)] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(p) = queue.pop_front() {
        let d = dist[map.idx(p)].unwrap_or(0);
        for n in map.neighbors(p, Connectivity::Eight) {
            let i = map.idx(n);
            if dist[i].is_none() && is_traversable(map.tile(n), true) {
                dist[i] = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

/// One vertex per door clustered by room, plus the start in its own cluster
/// (cluster 0, vertex 0). Rooms without doors get no cluster.
pub fn build_gshp(map: &LevelMap) -> Result<GtspInstance> {
    let mut vertices = vec![Vertex::Start(map.start())];
    let mut clusters = vec![vec![0]];
    for (room, r) in map.rooms().iter().enumerate() {
        if r.doors.is_empty() {
            continue;
        }
        let mut members = Vec::new();
        for &pos in &r.doors {
            members.push(vertices.len());
            vertices.push(Vertex::Door { room, pos });
        }
        clusters.push(members);
    }
    let positions: Vec<Position> = vertices
        .iter()
        .map(|v| match *v {
            Vertex::Start(p) | Vertex::Door { pos: p, .. } => p,
            Vertex::Dummy(_) => unreachable!("no dummies yet"),
        })
        .collect();
    let n = positions.len();
    let mut cost = vec![vec![0; n]; n];
    for i in 0..n {
        let dist = distances_from(map, positions[i]);
        for j in 0..n {
            cost[i][j] = match dist[map.idx(positions[j])] {
                Some(d) => u64::from(d),
                None => return Err(Error::UnreachableDoor(positions[j])),
            };
        }
    }
    Ok(GtspInstance { vertices, clusters, cost })
}

/// Adds dummy 1 (free edges to everything) and dummy 2 (free edges to the
/// start and dummy 1 only), each in its own cluster. Any tour must then pass
/// start, ..., last, dummy 1, dummy 2, start, so its cost is the open path cost.
pub fn reduce_to_gtsp(instance: &GtspInstance) -> GtspInstance {
    let n = instance.len();
    let (d1, d2) = (n, n + 1);
    let mut vertices = instance.vertices.clone();
    vertices.push(Vertex::Dummy(1));
    vertices.push(Vertex::Dummy(2));
    let mut clusters = instance.clusters.clone();
    clusters.push(vec![d1]);
    clusters.push(vec![d2]);
    let start = instance.clusters[0][0];
    let mut cost: Vec<Vec<u64>> = instance
        .cost
        .iter()
        .map(|row| {
            let mut r = row.clone();
            r.extend([0, NO_EDGE]);
            r
        })
        .collect();
    let mut row1 = vec![0; n + 2];
    row1[d1] = 0;
    let mut row2 = vec![NO_EDGE; n + 2];
    row2[start] = 0;
    row2[d1] = 0;
    row2[d2] = 0;
    cost.push(row1);
    cost.push(row2);
    cost[start][d2] = 0;
    GtspInstance { vertices, clusters, cost }
}

/// Exact minimum-cost tour visiting one vertex of each cluster. The tour starts
/// at the vertex of cluster 0 with the cheapest completion; ties resolve to
/// the lowest vertex indices.
pub fn solve_gtsp_exact(instance: &GtspInstance) -> Result<Tour> {
    instance.validate()?;
    let k = instance.clusters.len();
    if k > MAX_CLUSTERS {
        return Err(Error::TooLarge { clusters: k, max: MAX_CLUSTERS });
    }
    if k == 1 {
        let v = instance.clusters[0][0];
        return Ok(Tour { vertices: vec![v], cost: 0 });
    }
    let n = instance.len();
    let of = instance.cluster_of();
    let c = &instance.cost;
    let mut best: Option<Tour> = None;
    // fix the first vertex; subsets range over the other k - 1 clusters (bit i is cluster i + 1)
    for &first in &instance.clusters[0] {
        let full = (1usize << (k - 1)) - 1;
        let mut dp = vec![u64::MAX; (full + 1) * n];
        let mut from = vec![u32::MAX; (full + 1) * n];
        for v in 0..n {
            if of[v] != 0 {
                let s = 1 << (of[v] - 1);
                dp[s * n + v] = c[first][v];
            }
        }
        for s in 1..=full {
            for v in 0..n {
                let cur = dp[s * n + v];
                if cur == u64::MAX {
                    continue;
                }
                for (cl, members) in instance.clusters.iter().enumerate().skip(1) {
                    let bit = 1 << (cl - 1);
                    if s & bit != 0 {
                        continue;
                    }
                    for &w in members {
                        let t = (s | bit) * n + w;
                        let cand = cur + c[v][w];
                        if cand < dp[t] {
                            dp[t] = cand;
                            from[t] = v as u32;
                        }
                    }
                }
            }
        }
        let Some((cost, last)) = (0..n).filter(|&v| of[v] != 0 && dp[full * n + v] != u64::MAX).map(|v| (dp[full * n + v] + c[v][first], v)).min()
        else {
            continue;
        };
        if best.as_ref().is_some_and(|b| b.cost <= cost) {
            continue;
        }
        let mut order = Vec::with_capacity(k);
        let (mut s, mut v) = (full, last);
        loop {
            order.push(v);
            let prev = from[s * n + v];
            s &= !(1 << (of[v] - 1));
            if prev == u32::MAX {
                break;
            }
            v = prev as usize;
        }
        order.push(first);
        order.reverse();
        best = Some(Tour { vertices: order, cost });
    }
    best.ok_or_else(|| Error::InvalidConfig("instance has no tour".into()))
}

/// The optimal route: its length and the door sequence it touches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub cost: u64,
    pub doors: Vec<Position>,
}

/// Solves the level with full information.
pub fn optimal_route(map: &LevelMap) -> Result<Route> {
    let gshp = build_gshp(map)?;
    let gtsp = reduce_to_gtsp(&gshp);
    let tour = solve_gtsp_exact(&gtsp)?;
    let start = gshp.clusters[0][0];
    let at = tour.vertices.iter().position(|&v| v == start).expect("start cluster is visited");
    let n = tour.vertices.len();
    let rotated: Vec<usize> = (0..n).map(|i| tour.vertices[(at + i) % n]).collect();
    // the dummies close the cycle; whichever way round it was found, drop them
    let path: Vec<usize> = if matches!(gtsp.vertices[rotated[1]], Vertex::Dummy(_)) {
        std::iter::once(rotated[0]).chain(rotated[1..].iter().rev().copied()).collect()
    } else {
        rotated
    };
    let doors: Vec<usize> = path.iter().copied().filter(|&v| matches!(gtsp.vertices[v], Vertex::Door { .. })).collect();
    let mut cost = 0;
    let mut prev = start;
    for &v in &doors {
        cost += gshp.cost[prev][v];
        prev = v;
    }
    debug_assert_eq!(cost, tour.cost);
    let positions = doors
        .iter()
        .map(|&v| match gshp.vertices[v] {
            Vertex::Door { pos, .. } => pos,
            _ => unreachable!("filtered to doors"),
        })
        .collect();
    Ok(Route { cost, doors: positions })
}

/// Minimum moves from the start to touch a door of every room.
pub fn optimal_actions(map: &LevelMap) -> Result<usize> {
    Ok(optimal_route(map)?.cost as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_map() -> LevelMap {
        // start room centre 4 moves from its door; the other door 12 further along
        let text = "\
-----------            -----------
|.........+############+.........|
-----------            -----------
start: 5,1
";
        LevelMap::parse(text).unwrap()
    }

    #[test]
    fn single_room_costs_nothing() {
        let m = LevelMap::parse("-----\n|...|\n-----\nstart: 2,1\n").unwrap();
        let g = build_gshp(&m).unwrap();
        assert_eq!(g.clusters.len(), 1);
        assert_eq!(optimal_actions(&m).unwrap(), 0);
    }

    #[test]
    fn dummy_structure() {
        let m = line_map();
        let g = build_gshp(&m).unwrap();
        let r = reduce_to_gtsp(&g);
        assert_eq!(r.clusters.len(), g.clusters.len() + 2);
        let d2 = r.len() - 1;
        let finite = r.cost[d2].iter().enumerate().filter(|&(j, &c)| j != d2 && c != NO_EDGE).count();
        assert_eq!(finite, 2);
        assert!(r.cost[r.len() - 2].iter().all(|&c| c == 0));
    }

    #[test]
    fn straight_line_route() {
        let m = line_map();
        let g = build_gshp(&m).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.clusters.len(), 3);
        assert_eq!(g.cost[0][1], 5);
        let route = optimal_route(&m).unwrap();
        assert_eq!(route.cost, 5 + 13);
        assert_eq!(route.doors, vec![Position::new(10, 1), Position::new(23, 1)]);
    }

    #[test]
    fn constant_shift() {
        let m = line_map();
        let g = reduce_to_gtsp(&build_gshp(&m).unwrap());
        let a = solve_gtsp_exact(&g).unwrap();
        let mut h = g.clone();
        for (i, row) in h.cost.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                if i != j {
                    *c += 7;
                }
            }
        }
        let b = solve_gtsp_exact(&h).unwrap();
        assert_eq!(b.cost, a.cost + 7 * g.clusters.len() as u64);
    }

    #[test]
    fn too_many_clusters() {
        let n = MAX_CLUSTERS + 1;
        let g = GtspInstance {
            vertices: (0..n).map(|i| Vertex::Dummy(i as u8)).collect(),
            clusters: (0..n).map(|i| vec![i]).collect(),
            cost: vec![vec![1; n]; n],
        };
        assert!(matches!(solve_gtsp_exact(&g), Err(Error::TooLarge { .. })));
    }
}
