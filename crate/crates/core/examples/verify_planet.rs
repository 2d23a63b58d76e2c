//! Runs the invariant sweeps the `verify` command uses, on a layered planet.

use planetgen::config::{Planet, PlanetConfig};
use planetgen::terrain::LayeredPlanetParams;
use planetgen::verify::run_all;

pub fn run_example() -> bool {
    let mut config = PlanetConfig::layered(31, LayeredPlanetParams::default());
    config.resolution = 8;
    config.max_depth = 9;
    let planet = Planet::new(config).unwrap();
    let reports = run_all(&planet, 3000);
    for r in &reports {
        println!("{r}");
    }
    reports.iter().all(|r| r.passed())
}

#[allow(dead_code)]
fn main() {
    std::process::exit(if run_example() { 0 } else { 1 });
}
