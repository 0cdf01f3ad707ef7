use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use delve::components::Component;
use delve::episode::{Agent, EpisodeResult};
use delve::greedy::GreedyExplorer;
use delve::harness::{
    actions_by_room_count, grid_search, pareto_front, run_batch, write_rows, write_summaries, AgentConfig, BatchConfig, GridSpec,
    Row, RunSummary,
};
use delve::mapgen::{generate, GenConfig};
use delve::occmap::{ExplorationParams, OccmapExplorer, Target};
use delve::oracle::optimal_route;
use delve::render::{render, Overlay};
use delve::rng::rng_from_seed;
use delve::sim::{format_trace, parse_trace, Sim, SimConfig};
use delve::{LevelMap, Position};

#[derive(Parser)]
#[command(name = "delve", version, about = "Explore generated dungeon levels with occupancy-map and baseline agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AgentKind {
    Greedy,
    Occmap,
    Oracle,
}

#[derive(clap::Args)]
struct SimArgs {
    /// Chance that one search reveals an adjacent hidden tile.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    p_reveal: f64,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        SimConfig { p_reveal: self.p_reveal, ..SimConfig::default() }
    }
}

#[derive(clap::Args)]
struct AgentArgs {
    #[arg(long, value_enum, default_value = "occmap")]
    agent: AgentKind,
    /// Greedy only: searches per eligible wall and dead-end (0 disables searching).
    #[arg(long, default_value_t = 0)]
    searches_per_wall: u32,
    /// Occmap only: TOML file of explorer parameters.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Occmap only: turn on searching for hidden doors and corridors.
    #[arg(long)]
    secrets: bool,
}

impl AgentArgs {
    fn explorer_params(&self) -> Result<ExplorationParams> {
        let mut p = match &self.params {
            Some(path) => load_params(path)?,
            None => ExplorationParams::default(),
        };
        if self.secrets {
            p.secrets_enabled = true;
        }
        p.validate()?;
        Ok(p)
    }

    fn config(&self) -> Result<AgentConfig> {
        Ok(match self.agent {
            AgentKind::Greedy => AgentConfig::Greedy { searches_per_wall: self.searches_per_wall },
            AgentKind::Occmap => AgentConfig::Occmap(self.explorer_params()?),
            AgentKind::Oracle => AgentConfig::Oracle,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a level and write it in the map format.
    Generate {
        #[arg(long)]
        seed: u64,
        /// Output file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// No hidden doors or corridors.
        #[arg(long)]
        no_secrets: bool,
    },
    /// Run one agent on a map file.
    Run {
        #[arg(long)]
        map: PathBuf,
        #[command(flatten)]
        agent: AgentArgs,
        /// Seed of the search outcomes.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        sim: SimArgs,
        /// Print a frame after each action.
        #[arg(long)]
        render: bool,
        /// With --render, print only every Nth frame (the last frame is always printed).
        #[arg(long, default_value_t = 1)]
        every: usize,
        /// Write the action trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Re-execute a recorded trace on its map.
    Replay {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        render: bool,
        #[arg(long, default_value_t = 1)]
        every: usize,
    },
    /// Run one agent on generated maps and summarize.
    Batch {
        #[command(flatten)]
        agent: AgentArgs,
        #[arg(long, default_value_t = 500)]
        runs: usize,
        /// Base seed of map and episode seeds.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Generate maps with hidden doors and corridors.
        #[arg(long)]
        map_secrets: bool,
        #[command(flatten)]
        sim: SimArgs,
        /// Per-episode CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also print mean actions per room count.
        #[arg(long)]
        by_rooms: bool,
    },
    /// Run every cell of a parameter grid file.
    GridSearch {
        #[arg(long)]
        grid: PathBuf,
        /// Per-cell summary CSV (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-episode CSV.
        #[arg(long)]
        episodes: Option<PathBuf>,
        /// Print the cells on the actions / rooms-explored front.
        #[arg(long)]
        pareto: bool,
    },
    /// Shortest route touching a door of every room, with full information.
    Oracle {
        #[arg(long)]
        map: PathBuf,
    },
    /// Write the explorer's occupancy grid as a grayscale PGM image.
    Viz {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
        /// Number of actions to take first.
        #[arg(long, default_value_t = 0)]
        at_step: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        sim: SimArgs,
        /// Output file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several agents on the same generated maps.
    Compare {
        #[arg(long, value_delimiter = ',', default_value = "greedy,occmap,oracle")]
        agents: Vec<AgentKind>,
        #[arg(long, default_value_t = 500)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        searches_per_wall: u32,
        #[arg(long)]
        map_secrets: bool,
        #[command(flatten)]
        sim: SimArgs,
        /// Per-episode CSV of all agents.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_params(path: &Path) -> Result<ExplorationParams> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_map(path: &Path) -> Result<LevelMap> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    LevelMap::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn describe(r: &EpisodeResult) -> String {
    format!(
        "actions {} moves {} searches {} rooms {}/{} exhaustive {} secret_rooms {}/{} secret_spots {}/{}{}",
        r.actions,
        r.moves,
        r.searches,
        r.rooms_visited,
        r.total_rooms,
        r.exhaustive,
        r.secret_rooms_found,
        r.secret_rooms_total,
        r.secret_spots_found,
        r.secret_spots_total,
        if r.budget_exceeded { " (budget exceeded)" } else { "" }
    )
}

fn summary_line(name: &str, s: &RunSummary) -> String {
    format!(
        "{name}: runs {} failures {} actions {:.1} (sd {:.1}) rooms {:.1}% exhaustive {:.1}% secret_rooms {:.1}% secret_spots {:.1}%",
        s.n_runs, s.failures, s.mean_actions, s.stdev_actions, s.rooms_pct, s.exhaustive_pct, s.secret_rooms_pct, s.secret_spots_pct
    )
}

fn frame(sim: &Sim<'_>, frontiers: &[Position], components: &[Component], target: Option<Position>) -> String {
    let overlay = Overlay { agent: Some(sim.pos()), frontiers, components, target };
    format!("step {}\n{}", sim.actions(), render(sim.view(), &overlay))
}

/// Steps an agent to the end, printing frames as asked.
fn drive<'m, A: Agent<'m>>(
    agent: &mut A,
    budget: usize,
    render_every: Option<usize>,
    overlay: impl Fn(&A) -> (Vec<Position>, Vec<Component>, Option<Position>),
) -> Result<EpisodeResult> {
    let mut out = io::stdout().lock();
    let show = |a: &A, out: &mut io::StdoutLock<'_>| -> Result<()> {
        let (f, c, t) = overlay(a);
        writeln!(out, "{}", frame(a.sim(), &f, &c, t))?;
        Ok(())
    };
    if render_every.is_some() {
        show(agent, &mut out)?;
    }
    let mut exceeded = true;
    while agent.sim().actions() < budget {
        if !agent.step()? {
            exceeded = false;
            break;
        }
        if let Some(k) = render_every {
            if agent.sim().actions() % k == 0 {
                show(agent, &mut out)?;
            }
        }
    }
    if let Some(k) = render_every {
        if agent.sim().actions() % k != 0 {
            show(agent, &mut out)?;
        }
    }
    Ok(EpisodeResult::from_sim(agent.sim(), exceeded))
}

fn target_pos(t: Option<Target>) -> Option<Position> {
    match t? {
        Target::Frontier(p) => Some(p),
        Target::Search { spot, .. } => Some(spot),
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate { seed, out, no_secrets } => {
            let map = generate(&GenConfig { secrets_enabled: !no_secrets, ..GenConfig::with_seed(seed) })?;
            write_out(out.as_deref(), &map.to_text())
        }
        Command::Run { map, agent, seed, sim, render, every, trace } => {
            let map = load_map(&map)?;
            if every == 0 {
                bail!("--every must be positive");
            }
            let show = render.then_some(every);
            let cfg = sim.config();
            cfg.validate()?;
            let result = match agent.agent {
                AgentKind::Oracle => {
                    let route = optimal_route(&map)?;
                    println!("oracle actions {}", route.cost);
                    return Ok(());
                }
                AgentKind::Greedy => {
                    let mut a = GreedyExplorer::new(&map, agent.searches_per_wall, cfg, rng_from_seed(seed))?;
                    let budget = delve::episode::default_budget(&map);
                    drive(&mut a, budget, show, |a| (Vec::new(), Vec::new(), a.target()))?
                }
                AgentKind::Occmap => {
                    let params = agent.explorer_params()?;
                    let mut a = OccmapExplorer::new(&map, params, cfg, rng_from_seed(seed))?;
                    drive(&mut a, params.budget(&map), show, |a| {
                        (a.frontiers().iter().map(|f| f.pos).collect(), a.components().to_vec(), target_pos(a.target()))
                    })?
                }
            };
            if let Some(path) = trace {
                fs::write(&path, format_trace(&result.trace)).with_context(|| format!("writing {}", path.display()))?;
            }
            println!("{}", describe(&result));
            Ok(())
        }
        Command::Replay { map, trace, render, every } => {
            let map = load_map(&map)?;
            let text = fs::read_to_string(&trace).with_context(|| format!("reading {}", trace.display()))?;
            let actions = parse_trace(&text)?;
            if every == 0 {
                bail!("--every must be positive");
            }
            let mut sim = Sim::new(&map, SimConfig::default(), rng_from_seed(0));
            if render {
                println!("{}", frame(&sim, &[], &[], None));
            }
            for (i, a) in actions.iter().enumerate() {
                sim.apply(a).with_context(|| format!("trace step {}", i + 1))?;
                if render && (sim.actions() % every == 0 || i + 1 == actions.len()) {
                    println!("{}", frame(&sim, &[], &[], None));
                }
            }
            println!("{}", describe(&EpisodeResult::from_sim(&sim, false)));
            Ok(())
        }
        Command::Batch { agent, runs, seed, map_secrets, sim, out, by_rooms } => {
            let mut cfg = BatchConfig::new(runs, seed, map_secrets);
            cfg.sim = sim.config();
            let ac = agent.config()?;
            let res = run_batch(&ac, &cfg, 0)?;
            for (run, e) in &res.errors {
                eprintln!("run {run}: {e}");
            }
            if let Some(p) = out {
                write_rows(fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?, &res.rows)?;
            }
            println!("{}", summary_line(ac.name(), &res.summary));
            if by_rooms {
                print_by_rooms(&res.rows);
            }
            Ok(())
        }
        Command::GridSearch { grid, out, episodes, pareto } => {
            let text = fs::read_to_string(&grid).with_context(|| format!("reading {}", grid.display()))?;
            let spec = GridSpec::parse(&text)?;
            let (cells, rows) = grid_search(&spec)?;
            let mut buf = Vec::new();
            write_summaries(&mut buf, &cells)?;
            match &out {
                Some(p) => fs::write(p, &buf).with_context(|| format!("writing {}", p.display()))?,
                None => io::stdout().write_all(&buf)?,
            }
            if let Some(p) = episodes {
                write_rows(fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?, &rows)?;
            }
            if pareto {
                let pts: Vec<(f64, f64)> = cells.iter().map(|c| (c.summary.mean_actions, c.summary.rooms_pct)).collect();
                for i in pareto_front(&pts) {
                    eprintln!("front: cell {} actions {:.1} rooms {:.1}%", cells[i].cell_id, pts[i].0, pts[i].1);
                }
            }
            Ok(())
        }
        Command::Oracle { map } => {
            let map = load_map(&map)?;
            let route = optimal_route(&map)?;
            println!("cost {}", route.cost);
            let doors: Vec<String> = route.doors.iter().map(Position::to_string).collect();
            println!("doors {}", doors.join(" "));
            Ok(())
        }
        Command::Viz { map, params, at_step, seed, sim, out } => {
            let map = load_map(&map)?;
            let p = match params {
                Some(path) => load_params(&path)?,
                None => ExplorationParams::default(),
            };
            let mut a = OccmapExplorer::new(&map, p, sim.config(), rng_from_seed(seed))?;
            while a.sim().actions() < at_step && a.step()? {}
            write_out(out.as_deref(), &a.grid().to_pgm())
        }
        Command::Compare { agents, runs, seed, params, searches_per_wall, map_secrets, sim, out } => {
            let mut cfg = BatchConfig::new(runs, seed, map_secrets);
            cfg.sim = sim.config();
            let mut all: Vec<Row> = Vec::new();
            for kind in agents {
                let args = AgentArgs { agent: kind, searches_per_wall, params: params.clone(), secrets: false };
                let ac = args.config()?;
                let res = run_batch(&ac, &cfg, 0)?;
                for (run, e) in &res.errors {
                    eprintln!("{} run {run}: {e}", ac.name());
                }
                println!("{}", summary_line(ac.name(), &res.summary));
                all.extend(res.rows);
            }
            if let Some(p) = out {
                write_rows(fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?, &all)?;
            }
            Ok(())
        }
    }
}

fn print_by_rooms(rows: &[Row]) {
    for (rooms, n, mean, sd) in actions_by_room_count(rows) {
        println!("rooms {rooms}: n {n} actions {mean:.1} (sd {sd:.1})");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
