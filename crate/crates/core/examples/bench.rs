//! Run a small benchmark roster and print the CSV table.
//!
//! Rows are `case:periods:resolution[:load_scale]`; pass them as arguments
//! (e.g. `case118:168:60`) to replace the default list.

use mpopf::cli::{bench_csv, cmd_bench, BenchArgs, SolverChoice};

fn main() {
    let mut rows: Vec<String> = std::env::args().skip(1).collect();
    if rows.is_empty() {
        rows = ["case9:1:30", "case9:24:60", "case30:30:30:0.8"].map(String::from).to_vec();
    }
    let args = BenchArgs {
        rows,
        roster: None,
        seed: 1,
        amplitude: 0.2,
        noise: 0.02,
        tol: 1e-4,
        max_iter: 3000,
        linear_solver: SolverChoice::Sparse,
        out: None,
    };
    print!("{}", bench_csv(&cmd_bench(&args).unwrap()));
}
