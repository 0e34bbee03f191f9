//! A small general NLP (Hock-Schittkowski 71) through the modeling layer and solver.

use mpopf::ipm::{solve, SolverConfig};
use mpopf::model::{Expr, InstanceData, ModelBuilder};

fn main() {
    let x = Expr::var;
    let mut b = ModelBuilder::new();
    b.add_variable_block("x", &[4], &[1.0], &[5.0], &[1.0, 5.0, 5.0, 1.0]).unwrap();
    let mut d = InstanceData::new(4, 0);
    d.push(&[0, 1, 2, 3], &[]);
    b.add_objective(&(x(0) * x(3) * (x(0) + x(1) + x(2)) + x(2)), d).unwrap();
    let mut r = InstanceData::new(4, 0);
    r.push_row(0, &[0, 1, 2, 3], &[]);
    b.add_constraint(1, &[0.0], &[25.0], &[f64::INFINITY], vec![(x(0) * x(1) * x(2) * x(3), r)]).unwrap();
    let mut r = InstanceData::new(1, 0);
    (0..4).for_each(|i| r.push_row(0, &[i], &[]));
    b.add_constraint(1, &[40.0], &[0.0], &[0.0], vec![(x(0).powi(2), r)]).unwrap();
    let model = b.freeze();

    let out = solve(&model, &SolverConfig::default().with_tol(1e-8)).unwrap();
    print!("{}", out.report.log_csv());
    println!("status {}  iterations {}  objective {:.7}", out.report.status.as_str(), out.report.iterations, out.report.objective);
    println!("x = {:.6?}", out.x);
    println!("y = {:.6?}", out.y);
}
