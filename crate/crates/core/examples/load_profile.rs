//! Generate a one-day load profile and print it as CSV.

use mpopf::power::{bundled_case, generate_load_profile, parse_matpower};

fn main() {
    let net = parse_matpower(bundled_case("case30").unwrap()).unwrap();
    let profile = generate_load_profile(&net, 48, 30.0, 1, 0.2, 0.02);
    let mean = |t: usize| profile.scale[t].iter().sum::<f64>() / profile.scale[t].len() as f64;
    eprintln!("mean multiplier: t=0 {:.3}, t=12 {:.3}, t=36 {:.3}", mean(0), mean(12), mean(36));
    profile.write_csv(std::io::stdout().lock()).unwrap();
}
