//! Times a few desk-preset elections: `throughput <n> [ring|complete|random]`.

use std::time::Instant;

use election_core::graph::{generate, GraphFamily};
use election_core::protocol::ProtocolParams;
use election_core::simnet::{run, AdversaryKind, RunOptions};

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(256);
    let family = match args.next().as_deref() {
        Some("complete") => GraphFamily::Complete { n },
        Some("random") => GraphFamily::RandomP {
            n,
            p: 8.0 / n as f64,
        },
        _ => GraphFamily::Ring { n },
    };
    let g = generate(&family, 1).expect("graph");
    let params = ProtocolParams::desk(n as u64).expect("params");
    for seed in 0..3 {
        let start = Instant::now();
        let r = run(
            &g,
            &params,
            AdversaryKind::Uniform.build(&g, seed),
            seed,
            &RunOptions::default(),
        )
        .expect("run")
        .report;
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} n={n} m={} candidates={} referees={} transmissions={} unique={} completion={:.1} {secs:.2}s ({:.1}M events/s)",
            family.label(),
            r.m,
            r.candidates,
            r.referees,
            r.total_transmissions,
            r.unique_messages,
            r.completion_time,
            r.events as f64 / secs / 1e6
        );
    }
}
