//! Check a dispatch against the network equations, before and after tampering with it.

use mpopf::ipm::{solve, SolverConfig};
use mpopf::power::{build_multiperiod_opf, bundled_case, extract_dispatch, parse_matpower, validate_solution, LoadProfile, MultiPeriodCase};

fn print(label: &str, r: &mpopf::power::ViolationReport) {
    println!("{label}: {}", if r.pass { "pass" } else { "fail" });
    for f in &r.families {
        println!("  {:<10} rows {:>4}  max {:.2e}  scaled {:.2e}  worst {:?}", f.family, f.rows, f.max_violation, f.max_scaled_violation, f.worst);
    }
}

fn main() {
    let net = parse_matpower(bundled_case("case9").unwrap()).unwrap();
    let case = MultiPeriodCase::new(net.clone(), LoadProfile::flat(&net, 3, 60.0)).unwrap();
    let opf = build_multiperiod_opf(&case).unwrap();
    let out = solve(&opf.model, &SolverConfig::default().with_tol(1e-6)).unwrap();
    let mut d = extract_dispatch(&opf, &out.x, &case).unwrap();
    print("solved", &validate_solution(&case, &d, 1e-6).unwrap());

    d.periods[1].pg[0] += 0.1;
    print("period 1, generator 0 raised by 10 MW", &validate_solution(&case, &d, 1e-6).unwrap());
}
