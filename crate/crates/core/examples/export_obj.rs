//! Builds a uniform-depth tiling and writes it as OBJ.
//!
//! `cargo run --example export_obj -- out.obj 2`

use planetgen::cli::{build_uniform, summarize};
use planetgen::config::{Planet, PlanetConfig};
use planetgen::mesh::export_obj;
use planetgen::terrain::LayeredPlanetParams;

pub fn export(path: &std::path::Path, depth: u8) -> usize {
    let mut config = PlanetConfig::layered(3, LayeredPlanetParams::default());
    config.resolution = 8;
    let planet = Planet::new(config).unwrap();
    let tiles = build_uniform(&planet, depth).unwrap();
    export_obj(&tiles, path).unwrap();
    summarize(&tiles, &mut std::io::stdout()).unwrap();
    let size = std::fs::metadata(path).unwrap().len();
    println!("wrote {} ({size} bytes)", path.display());
    tiles.len()
}

pub fn run_example() -> usize {
    let dir = std::env::temp_dir().join(format!("planetgen-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let n = export(&dir.join("planet.obj"), 1);
    std::fs::remove_dir_all(&dir).unwrap();
    n
}

#[allow(dead_code)]
fn main() {
    let mut args = std::env::args().skip(1);
    match args.next() {
        Some(path) => {
            let depth = args.next().map(|d| d.parse().expect("depth")).unwrap_or(2);
            export(std::path::Path::new(&path), depth);
        }
        None => {
            run_example();
        }
    }
}
