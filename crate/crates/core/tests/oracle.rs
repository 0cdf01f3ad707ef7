use std::collections::VecDeque;

use delve::greedy::explore_greedy;
use delve::mapgen::{generate, GenConfig};
use delve::occmap::{explore, ExplorationParams};
use delve::oracle::{build_gshp, optimal_actions, reduce_to_gtsp, solve_gtsp_exact, NO_EDGE};
use delve::rng::rng_from_seed;
use delve::sim::SimConfig;
use delve::{LevelMap, Position};

fn small_map(seed: u64) -> LevelMap {
    generate(&GenConfig { room_count: 2..=5, secrets_enabled: false, ..GenConfig::with_seed(seed) }).unwrap()
}

// plain 8-connected BFS, written out again so the check does not share code with the solver
fn bfs(map: &LevelMap, from: Position, to: Position) -> u64 {
    let (w, h) = (map.width() as isize, map.height() as isize);
    let mut dist = vec![u64::MAX; (w * h) as usize];
    dist[from.y * map.width() + from.x] = 0;
    let mut q = VecDeque::from([from]);
    while let Some(p) = q.pop_front() {
        if p == to {
            return dist[p.y * map.width() + p.x];
        }
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (x, y) = (p.x as isize + dx, p.y as isize + dy);
                if (dx, dy) == (0, 0) || x < 0 || y < 0 || x >= w || y >= h {
                    continue;
                }
                let n = Position::new(x as usize, y as usize);
                let i = n.y * map.width() + n.x;
                if dist[i] == u64::MAX && map.tile(n).kind.is_traversable() {
                    dist[i] = dist[p.y * map.width() + p.x] + 1;
                    q.push_back(n);
                }
            }
        }
    }
    panic!("{to} unreachable");
}

// every order of rooms, every door choice
fn brute_force(map: &LevelMap) -> u64 {
    let rooms: Vec<Vec<Position>> = map.rooms().iter().filter(|r| !r.doors.is_empty()).map(|r| r.doors.clone()).collect();
    fn go(map: &LevelMap, at: Position, rooms: &[Vec<Position>], used: &mut Vec<bool>, best: &mut u64, so_far: u64) {
        if so_far >= *best {
            return;
        }
        if used.iter().all(|&u| u) {
            *best = so_far;
            return;
        }
        for i in 0..rooms.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            for &d in &rooms[i] {
                go(map, d, rooms, used, best, so_far + bfs(map, at, d));
            }
            used[i] = false;
        }
    }
    let mut best = u64::MAX;
    go(map, map.start(), &rooms, &mut vec![false; rooms.len()], &mut best, 0);
    best
}

#[test]
fn dp_matches_brute_force() {
    for seed in 0..50 {
        let map = small_map(seed);
        assert!(map.rooms().len() <= 5);
        assert_eq!(optimal_actions(&map).unwrap() as u64, brute_force(&map), "seed {seed}");
    }
}

#[test]
fn edge_costs_are_bfs_distances() {
    for seed in 0..5 {
        let map = small_map(seed);
        let g = build_gshp(&map).unwrap();
        let pos = |v: usize| match g.vertices[v] {
            delve::oracle::Vertex::Start(p) | delve::oracle::Vertex::Door { pos: p, .. } => p,
            _ => unreachable!(),
        };
        for i in 0..g.len() {
            for j in 0..g.len() {
                assert_eq!(g.cost[i][j], bfs(&map, pos(i), pos(j)));
            }
        }
    }
}

#[test]
fn reduction_structure() {
    for seed in 0..50 {
        let g = build_gshp(&small_map(seed)).unwrap();
        let r = reduce_to_gtsp(&g);
        assert_eq!(r.clusters.len(), g.clusters.len() + 2);
        let (d1, d2) = (r.len() - 2, r.len() - 1);
        assert!(r.cost[d1].iter().all(|&c| c == 0));
        let open: Vec<usize> = (0..r.len()).filter(|&j| j != d2 && r.cost[d2][j] != NO_EDGE).collect();
        assert_eq!(open, vec![0, d1]);
        for i in 0..r.len() {
            for j in 0..r.len() {
                assert_eq!(r.cost[i][j], r.cost[j][i]);
            }
        }
        let tour = solve_gtsp_exact(&r).unwrap();
        assert_eq!(tour.vertices.len(), r.clusters.len());
        assert_eq!(tour.cost, optimal_actions(&small_map(seed)).unwrap() as u64);
    }
}

#[test]
fn oracle_is_a_lower_bound() {
    let params = ExplorationParams::default();
    for seed in 0..30 {
        let map = generate(&GenConfig { secrets_enabled: false, ..GenConfig::with_seed(seed) }).unwrap();
        let best = optimal_actions(&map).unwrap();
        let g = explore_greedy(&map, SimConfig::default(), rng_from_seed(seed)).unwrap();
        let o = explore(&map, &params, SimConfig::default(), rng_from_seed(seed)).unwrap();
        assert!(best <= g.actions, "seed {seed}: {best} > greedy {}", g.actions);
        if o.exhaustive {
            assert!(best <= o.actions, "seed {seed}: {best} > occmap {}", o.actions);
        }
    }
}
