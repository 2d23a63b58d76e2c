//! Starts the tile service on a free port, connects a scripted client, dives
//! toward the surface and checks the client's copy against the server.
//!
//! Pass a `ws://` URL to drive an already running `planetgen serve` instead.

use glam::DVec3;
use planetgen::config::PlanetConfig;
use planetgen::service::{serve_until, ClientFrame, HeadlessClient, ServerFrame};
use planetgen::terrain::SimplePlanetParams;

async fn dive(url: &str, steps: usize) -> usize {
    let mut client = HeadlessClient::connect(url).await.unwrap();
    let header = client.open(None).await.unwrap();
    println!("session {:?}: {} root tiles, {} scene instances", header.session, header.tiles, header.scene.len());
    let radius = 1_000_000.0;
    let dir = DVec3::new(-0.3, 0.5, 0.8).normalize();
    for s in 0..steps {
        let altitude = 5.0 * radius * (2e-4f64 / 5.0).powf(s as f64 / (steps - 1) as f64);
        let d = client.camera(dir * (radius + altitude)).await.unwrap();
        if s % 5 == 0 {
            println!("altitude {altitude:9.0} m: +{} tiles, -{} tiles, {} trees", d.tiles, d.removed.len(), d.scene.len());
        }
    }
    client.send(&ClientFrame::Stats).await.unwrap();
    let leaves = match client.recv_frame().await.unwrap() {
        ServerFrame::Stats(stats) => {
            println!("server: {} leaves, depth {}, {} vertices resident", stats.leaves, stats.max_depth, stats.vertices_resident);
            assert_eq!(stats.leaves, client.mirror.nodes().len());
            stats.leaves
        }
        other => panic!("unexpected {other:?}"),
    };
    client.send(&ClientFrame::Time { t: 60.0 }).await.unwrap();
    println!("{:?}", client.recv_frame().await.unwrap());
    client.close().await.unwrap();
    leaves
}

pub fn run_example() -> usize {
    let mut config = PlanetConfig::simple(4, SimplePlanetParams::default());
    config.resolution = 8;
    let runtime = tokio::runtime::Runtime::new().unwrap();
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let url = format!("ws://{}", listener.local_addr().unwrap());
        let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
        let server = tokio::spawn(serve_until(listener, config, async {
            let _ = stopped.await;
        }));
        let leaves = dive(&url, 30).await;
        let _ = stop.send(());
        server.await.unwrap().unwrap();
        leaves
    })
}

#[allow(dead_code)]
fn main() {
    match std::env::args().nth(1) {
        Some(url) => {
            let runtime = tokio::runtime::Runtime::new().unwrap();
            runtime.block_on(dive(&url, 30));
        }
        None => {
            run_example();
        }
    }
}
