//! Exploration of roguelike dungeon levels with occupancy maps.
//!
//! The crate contains a NetHack-style level generator and turn-based simulator,
//! the occupancy-map explorer (with optional secret-door discovery), greedy
//! closest-frontier baselines, an exact full-information oracle, and a seeded
//! experiment harness.

pub mod components;
pub mod episode;
pub mod error;
pub mod greedy;
pub mod harness;
pub mod level;
pub mod mapgen;
pub mod occmap;
pub mod occupancy;
pub mod oracle;
pub mod render;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use level::{Connectivity, LevelMap, Position, Rect, Room, Tile, TileKind, WallKind};
