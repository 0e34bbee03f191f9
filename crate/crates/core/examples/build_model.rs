//! Build multi-period OPF models and report their sizes per row family.

use std::time::Instant;

use mpopf::power::{build_multiperiod_opf, bundled_case, generate_load_profile, parse_matpower, MultiPeriodCase, RowFamily};

fn main() {
    for (name, periods, res) in [("case9", 2, 30.0), ("case30", 30, 30.0), ("case118", 168, 60.0)] {
        let net = parse_matpower(bundled_case(name).unwrap()).unwrap();
        let profile = generate_load_profile(&net, periods, res, 1, 0.2, 0.02);
        let case = MultiPeriodCase::new(net, profile).unwrap();
        let t0 = Instant::now();
        let opf = build_multiperiod_opf(&case).unwrap();
        let m = &opf.model;
        println!(
            "{name} T={periods}: {} variables, {} constraints, jac nnz {}, hess nnz {} ({:.3} s)",
            m.num_variables(),
            m.num_constraints(),
            m.sparsity().jac_nnz(),
            m.sparsity().hess_nnz(),
            t0.elapsed().as_secs_f64()
        );
        for f in RowFamily::ALL {
            println!("  {:<10} {:>7}", f.name(), opf.layout.rows(f).len());
        }
        println!("  patterns: {} objective, {} constraint", m.num_objective_patterns(), m.num_constraint_patterns());
    }
}
