// temporary check
use mmrelay_core::config::FileConfig;

#[test]
fn paper6_structure() {
    let cfg = FileConfig::load(std::path::Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/paper6.json"))).unwrap();
    let graph = cfg.graph::<f64>().unwrap();
    let net = mmrelay_core::topology::build_network_paths(&graph, cfg.source(), cfg.destination(), &cfg.clusters()).unwrap();
    for c in &net.clusters {
        println!("cluster {} seg {}: entry_in {} entry_out {} L={} K={} d_in0={} d_out0={}",
            c.placement.id, c.placement.segment, c.incoming.entry, c.outgoing.entry,
            c.incoming.routes.len(), c.outgoing.routes.len(), c.geometry.d_in[0], c.geometry.d_out[0]);
        for r in &c.incoming.routes { println!("  f: {:?} n={} len={}", r.segments, r.n_intersections, r.length); }
        for r in &c.outgoing.routes { println!("  g: {:?} n={} len={}", r.segments, r.n_intersections, r.length); }
    }
    println!("union: {:?} (count {})", net.segment_union, net.segment_union.len());
}
