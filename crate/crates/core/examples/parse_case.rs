//! Parse a MATPOWER case and print its size and totals.
//!
//! `cargo run --example parse_case -- case118` or a path to any `.m` file.

use mpopf::power::{bundled_case, parse_matpower};

fn main() {
    let arg = std::env::args().nth(1).unwrap_or_else(|| "case9".into());
    let text = match bundled_case(&arg) {
        Some(t) => t.to_string(),
        None => std::fs::read_to_string(&arg).expect("readable case file"),
    };
    let net = parse_matpower(&text).expect("valid MATPOWER case");
    let pd: f64 = net.loads.iter().map(|l| l.pd).sum();
    let pmax: f64 = net.generators.iter().map(|g| g.pmax).sum();
    let rated = net.lines.iter().filter(|l| l.rate.is_some()).count();
    println!("{}: base {} MVA", net.name, net.base_mva);
    println!("  buses {}  lines {} ({} rated)  generators {}  loads {}", net.buses.len(), net.lines.len(), rated, net.generators.len(), net.loads.len());
    println!("  total demand {:.2} MW, capacity {:.2} MW", pd * net.base_mva, pmax * net.base_mva);
    println!("  reference bus index {:?}", net.reference_bus());
}
