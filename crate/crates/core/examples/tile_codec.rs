//! The binary tile format: header fields, size arithmetic and error cases.

use planetgen::config::{Planet, PlanetConfig};
use planetgen::lod::QuadNode;
use planetgen::mesh::{decode_tile, encode_tile, encoded_len};
use planetgen::terrain::SimplePlanetParams;

pub fn run_example() -> usize {
    let planet = Planet::new(PlanetConfig::simple(5, SimplePlanetParams::default())).unwrap();
    let node: QuadNode = "f3/d4/9/2".parse().unwrap();
    let tile = planet.build_tile(node, 0b0101).unwrap();
    let bytes = encode_tile(&tile);
    println!("{node}: {} vertices, {} triangles", tile.vertex_count(), tile.triangle_count());
    println!("encoded {} bytes, formula {}", bytes.len(), encoded_len(tile.vertex_count(), tile.indices.len()));
    println!("magic {:?}, center {:.3}", std::str::from_utf8(&bytes[..4]).unwrap(), tile.center);
    assert_eq!(decode_tile(&bytes).unwrap(), tile);

    let mut bad = bytes.clone();
    bad[0] = b'X';
    println!("corrupt magic: {}", decode_tile(&bad).unwrap_err());
    println!("truncated: {}", decode_tile(&bytes[..100]).unwrap_err());
    let mut version = bytes.clone();
    version[4] = 9;
    println!("future version: {}", decode_tile(&version).unwrap_err());
    bytes.len()
}

#[allow(dead_code)]
fn main() {
    run_example();
}
