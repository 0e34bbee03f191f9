//! Solve a multi-period AC OPF and summarize the dispatch.
//!
//! `cargo run --release --example solve_opf -- [case] [periods] [tol]`

use mpopf::ipm::{solve, SolverConfig};
use mpopf::power::{build_multiperiod_opf, bundled_case, extract_dispatch, generate_load_profile, parse_matpower, validate_solution, MultiPeriodCase};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map(String::as_str).unwrap_or("case9");
    let periods: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let tol: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-6);

    let net = parse_matpower(bundled_case(name).expect("bundled case name")).unwrap();
    let profile = generate_load_profile(&net, periods, 30.0, 1, 0.2, 0.02);
    let case = MultiPeriodCase::new(net, profile).unwrap();
    let opf = build_multiperiod_opf(&case).unwrap();
    let out = solve(&opf.model, &SolverConfig::default().with_tol(tol)).unwrap();
    let r = &out.report;
    println!("{name} T={periods}: {} in {} iterations, cost {:.2} $/h", r.status.as_str(), r.iterations, r.objective);
    println!("kkt: stationarity {:.1e} feasibility {:.1e} complementarity {:.1e}", r.kkt.stationarity, r.kkt.feasibility, r.kkt.complementarity);

    let d = extract_dispatch(&opf, &out.x, &case).unwrap();
    let base = case.network.base_mva;
    for (t, p) in d.periods.iter().enumerate() {
        let (pd, _) = case.bus_demand(t);
        let load: f64 = pd.iter().sum();
        let gen: f64 = p.pg.iter().sum();
        let vmin = p.vm.iter().cloned().fold(f64::INFINITY, f64::min);
        println!("  t={t:<3} load {:8.2} MW  gen {:8.2} MW  losses {:6.2} MW  min |V| {vmin:.4}", load * base, gen * base, (gen - load) * base);
    }
    let report = validate_solution(&case, &d, tol).unwrap();
    println!("independent check: max scaled violation {:.2e} ({})", report.max_scaled_violation, if report.pass { "pass" } else { "fail" });
}
