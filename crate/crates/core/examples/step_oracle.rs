//! Watch the solver's search directions and compare each with the dense
//! solution of the full unreduced Newton system.

use mpopf::ipm::{full_kkt_oracle, solve_observed, SolverConfig};
use mpopf::power::{build_multiperiod_opf, bundled_case, parse_matpower, LoadProfile, MultiPeriodCase};

fn main() {
    let net = parse_matpower(bundled_case("case9").unwrap()).unwrap();
    let case = MultiPeriodCase::new(net.clone(), LoadProfile::flat(&net, 1, 60.0)).unwrap();
    let opf = build_multiperiod_opf(&case).unwrap();
    println!("iter  delta_w   delta_c   rel. difference");
    let out = solve_observed(&opf.model, &SolverConfig::default(), &mut |v| {
        let (dir, _) = full_kkt_oracle(v.lifted, v.iterate, v.residuals, v.hessian, v.jacobian, v.kkt.delta_w, v.kkt.delta_c).unwrap();
        println!("{:>4}  {:.1e}  {:.1e}  {:.2e}", v.iter, v.kkt.delta_w, v.kkt.delta_c, v.direction.relative_difference(&dir));
    })
    .unwrap();
    println!("{} after {} iterations", out.report.status.as_str(), out.report.iterations);
}
