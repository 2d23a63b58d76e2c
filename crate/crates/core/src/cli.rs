//! Command-line front end: `generate`, `serve` and `verify`.
//!
//! Exit codes: 0 ok, 1 invariant violation or generation failure, 2 bad
//! config, 3 I/O failure, 4 port unavailable.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::config::{uniform_nodes, ConfigError, Planet, PlanetConfig};
use crate::mesh::{export_obj, MeshError, TileMesh};
use crate::noise::NoiseSeed;
use crate::terrain::Biome;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_PORT: i32 = 4;

/// Built-in planet used when no `--config` is given.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/simple.json");

#[derive(Debug, Parser)]
#[command(name = "planetgen", version, about = "Deterministic procedural planets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Export a uniform-depth tiling of the whole planet as OBJ.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Replaces the seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "planet.obj")]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        depth: u8,
    },
    /// Stream tiles to WebSocket clients until interrupted.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8765)]
        port: u16,
    },
    /// Run the invariant sweeps on random probes.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

/// Error carrying the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        let code = match e {
            ConfigError::Io { .. } => EXIT_IO,
            _ => EXIT_CONFIG,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        let code = match e {
            MeshError::Io(_) => EXIT_IO,
            _ => EXIT_VIOLATION,
        };
        CliError::new(code, e.to_string())
    }
}

fn load_planet(path: Option<&PathBuf>, seed: Option<u64>) -> Result<Planet, CliError> {
    let mut config = match path {
        Some(p) => PlanetConfig::load(p)?,
        None => PlanetConfig::from_json(DEFAULT_CONFIG)?,
    };
    if let Some(s) = seed {
        config.seed = NoiseSeed(s);
    }
    Ok(Planet::new(config)?)
}

/// Tiles of a uniform-depth export, sorted by address.
pub fn build_uniform(planet: &Planet, depth: u8) -> Result<Vec<TileMesh>, MeshError> {
    uniform_nodes(depth)
        .into_iter()
        .map(|node| planet.build_tile(node, 0))
        .collect()
}

/// Vertex, triangle and biome counts of a tile set.
pub fn summarize(tiles: &[TileMesh], out: &mut impl Write) -> std::io::Result<()> {
    let vertices: usize = tiles.iter().map(TileMesh::vertex_count).sum();
    let triangles: usize = tiles.iter().map(TileMesh::triangle_count).sum();
    let mut histogram = [0usize; Biome::ALL.len()];
    for b in tiles.iter().flat_map(|t| &t.biomes) {
        histogram[b.id() as usize] += 1;
    }
    writeln!(out, "tiles      {}", tiles.len())?;
    writeln!(out, "vertices   {vertices}")?;
    writeln!(out, "triangles  {triangles}")?;
    writeln!(out, "biomes")?;
    for biome in Biome::ALL {
        let n = histogram[biome.id() as usize];
        let pct = if vertices == 0 { 0.0 } else { 100.0 * n as f64 / vertices as f64 };
        writeln!(out, "  {:<10} {n:>9}  {pct:5.1}%", biome.name())?;
    }
    Ok(())
}

fn generate(config: Option<&PathBuf>, seed: Option<u64>, out: &PathBuf, depth: u8) -> Result<(), CliError> {
    if depth > 10 {
        return Err(CliError::new(EXIT_CONFIG, "depth ≤ 10 for uniform export"));
    }
    let planet = load_planet(config, seed)?;
    let started = Instant::now();
    let tiles = build_uniform(&planet, depth)?;
    export_obj(&tiles, out)?;
    let mut stdout = std::io::stdout().lock();
    let io = |e: std::io::Error| CliError::new(EXIT_IO, e.to_string());
    summarize(&tiles, &mut stdout).map_err(io)?;
    writeln!(stdout, "wrote {} in {:.2}s", out.display(), started.elapsed().as_secs_f64()).map_err(io)?;
    Ok(())
}

fn verify(config: Option<&PathBuf>, seed: Option<u64>, samples: usize) -> Result<(), CliError> {
    let planet = load_planet(config, seed)?;
    let reports = crate::verify::run_all(&planet, samples);
    for r in &reports {
        println!("{r}");
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::new(EXIT_VIOLATION, format!("violated: {}", failed.join(", "))))
    }
}

fn serve(config: Option<&PathBuf>, seed: Option<u64>, host: &str, port: u16) -> Result<(), CliError> {
    let planet = load_planet(config, seed)?;
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| CliError::new(EXIT_CONFIG, format!("bad address {host}:{port}: {e}")))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::new(EXIT_PORT, format!("cannot listen on {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
        tracing::info!("listening on ws://{local}");
        println!("listening on ws://{local}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        crate::service::serve_until(listener, planet.config().clone(), shutdown)
            .await
            .map_err(|e| CliError::new(EXIT_IO, e.to_string()))
    })
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate { config, seed, out, depth } => generate(config.as_ref(), *seed, out, *depth),
        Command::Serve { config, seed, host, port } => serve(config.as_ref(), *seed, host, *port),
        Command::Verify { config, seed, samples } => verify(config.as_ref(), *seed, *samples),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .try_init();
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
