//! Derivatives of one expression pattern, then of a model built from it.

use mpopf::ipm::NlpProblem;
use mpopf::model::{Expr, InstanceData, ModelBuilder, Scratch, Tape};

fn main() {
    // f(x0, x1; a) = a x0² sin(x1)
    let f = Expr::param(0) * Expr::var(0).powi(2) * Expr::var(1).sin();
    let tape = Tape::compile(&f);
    let (x, p) = ([1.5, 0.3], [2.0]);
    let mut s = Scratch::default();
    let mut grad = vec![0.0; tape.gradient_slots().len()];
    let v = tape.gradient(&x, &p, &mut s, &mut grad).unwrap();
    let mut hess = vec![0.0; tape.hessian_pairs().len()];
    tape.hessian(&x, &p, 1.0, &mut s, &mut hess).unwrap();
    println!("tape: {} ops, value {v:.6}", tape.len());
    println!("  gradient slots {:?} = {grad:.6?}", tape.gradient_slots());
    println!("  hessian pairs {:?} = {hess:.6?}", tape.hessian_pairs());

    // The same pattern replicated over three records and summed into rows.
    let mut b = ModelBuilder::new();
    b.add_variable_block("x", &[4], &[-10.0], &[10.0], &[1.0, 0.5, -0.2, 2.0]).unwrap();
    let mut d = InstanceData::new(2, 1);
    d.push_row(0, &[0, 1], &[2.0]);
    d.push_row(0, &[2, 3], &[1.0]);
    d.push_row(1, &[1, 2], &[-3.0]);
    b.add_constraint(2, &[0.0], &[0.0], &[0.0], vec![(f, d)]).unwrap();
    let mut o = InstanceData::new(1, 0);
    (0..4).for_each(|i| o.push(&[i], &[]));
    b.add_objective(&Expr::var(0).powi(2), o).unwrap();
    let m = b.freeze();

    let x = m.start().to_vec();
    let (rows, cols) = NlpProblem::jacobian_structure(&m);
    let mut jac = vec![0.0; rows.len()];
    m.jacobian_values(&x, &mut jac).unwrap();
    println!("model jacobian:");
    for ((r, c), v) in rows.iter().zip(cols).zip(&jac) {
        println!("  ({r}, {c}) {v:.6}");
    }
    let (hr, hc) = NlpProblem::hessian_structure(&m);
    let mut h = vec![0.0; hr.len()];
    m.hessian_values(&x, &[1.0, 0.5], 1.0, &mut h).unwrap();
    println!("lagrangian hessian (lower triangle, y = [1, 0.5]):");
    for ((r, c), v) in hr.iter().zip(hc).zip(&h) {
        println!("  ({r}, {c}) {v:.6}");
    }
}
