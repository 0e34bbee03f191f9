use mpopf::ipm::{solve, SolveStatus, SolverConfig};
use mpopf::power::{
    build_multiperiod_opf, bundled_case, evaluate_rows, extract_dispatch, generate_load_profile, parse_matpower, validate_solution,
    LoadProfile, MultiPeriodCase, NetworkData, OpfModel, RowFamily,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn network(name: &str) -> NetworkData {
    parse_matpower(bundled_case(name).unwrap()).unwrap()
}

fn case(name: &str, periods: usize) -> MultiPeriodCase {
    let net = network(name);
    let profile = generate_load_profile(&net, periods, 30.0, 1, 0.2, 0.02);
    MultiPeriodCase::new(net, profile).unwrap()
}

fn constraint_values(opf: &OpfModel, x: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; opf.model.num_constraints()];
    opf.model.constraints(x, &mut c).unwrap();
    c
}

#[test]
fn case9_has_the_expected_shape() {
    let net = network("case9");
    assert_eq!((net.buses.len(), net.lines.len(), net.generators.len()), (9, 9, 3));
    assert_eq!(net.base_mva, 100.0);
    assert_eq!(net.reference_bus(), Some(0));
    let total: f64 = net.loads.iter().map(|l| l.pd).sum();
    assert!((total - 3.15).abs() < 1e-12);
}

#[test]
fn multiperiod_case9_counts() {
    let c = case("case9", 2);
    let opf = build_multiperiod_opf(&c).unwrap();
    // 2·(3 pg + 3 qg + 4·9 flows + 9 vm + 9 va)
    assert_eq!(opf.model.num_variables(), 2 * (3 + 3 + 36 + 9 + 9));
    assert_eq!(opf.layout.rows(RowFamily::Ramp).len(), 3);
    assert_eq!(opf.layout.rows(RowFamily::BalanceP).len(), 18);
    assert_eq!(opf.layout.rows(RowFamily::FlowP).len(), 36);
    let single = build_multiperiod_opf(&case("case9", 1)).unwrap();
    assert_eq!(single.layout.rows(RowFamily::Ramp).len(), 0);
}

#[test]
fn infinite_ramp_drops_ramp_rows() {
    let net = network("case9").with_ramp(f64::INFINITY);
    let c = MultiPeriodCase::new(net.clone(), LoadProfile::flat(&net, 4, 60.0)).unwrap();
    let opf = build_multiperiod_opf(&c).unwrap();
    assert_eq!(opf.layout.rows(RowFamily::Ramp).len(), 0);
}

#[test]
fn size_grows_linearly_in_periods() {
    let one = build_multiperiod_opf(&case("case30", 1)).unwrap();
    let (n1, m1) = (one.model.num_variables(), one.model.num_constraints());
    let g = network("case30").generators.len();
    for t in [2usize, 10, 30] {
        let opf = build_multiperiod_opf(&case("case30", t)).unwrap();
        assert_eq!(opf.model.num_variables(), t * n1);
        assert_eq!(opf.model.num_constraints(), t * m1 + (t - 1) * g);
    }
}

#[test]
fn flat_start_sets_unit_voltage_and_zero_angle() {
    let opf = build_multiperiod_opf(&case("case9", 3)).unwrap();
    let x0 = opf.model.start();
    let l = &opf.layout;
    let n = l.periods * l.buses;
    assert!(x0[l.vm..l.vm + n].iter().all(|&v| v == 1.0));
    assert!(x0[l.va..l.va + n].iter().all(|&v| v == 0.0));
}

#[test]
fn flatten_and_extract_round_trip() {
    let c = case("case9", 3);
    let opf = build_multiperiod_opf(&c).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..opf.model.num_variables()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let d = extract_dispatch(&opf, &x, &c).unwrap();
    assert_eq!(opf.flatten(&d).unwrap(), x);
    assert!(extract_dispatch(&opf, &x[1..], &c).is_err());
}

#[test]
fn perturbed_generation_shows_in_balance() {
    let c = case("case9", 1);
    let opf = build_multiperiod_opf(&c).unwrap();
    let x0 = opf.model.start().to_vec();
    let mut x1 = x0.clone();
    x1[opf.layout.pg] += 0.1;
    let bus = c.network.generators[0].bus;
    let row = opf.layout.rows(RowFamily::BalanceP).start + bus;
    let (a, b) = (constraint_values(&opf, &x0), constraint_values(&opf, &x1));
    assert!(((b[row] - a[row]).abs() - 0.1).abs() < 1e-14);
    let before = evaluate_rows(&c, &extract_dispatch(&opf, &x0, &c).unwrap()).unwrap();
    let after = evaluate_rows(&c, &extract_dispatch(&opf, &x1, &c).unwrap()).unwrap();
    assert!((after[0].values[bus] - before[0].values[bus] - 0.1).abs() < 1e-14);
}

#[test]
fn zero_dispatch_violates_balance_by_the_demand() {
    let c = case("case9", 2);
    let opf = build_multiperiod_opf(&c).unwrap();
    let mut x = vec![0.0; opf.model.num_variables()];
    let l = &opf.layout;
    x[l.vm..l.vm + l.periods * l.buses].iter_mut().for_each(|v| *v = 1.0);
    // Unit voltages with zero flow variables leave only loads and shunts.
    let d = extract_dispatch(&opf, &x, &c).unwrap();
    let rows = evaluate_rows(&c, &d).unwrap();
    for t in 0..2 {
        let (pd, _) = c.bus_demand(t);
        for n in 0..9 {
            let gs = c.network.buses[n].gs;
            assert!((rows[0].values[t * 9 + n] + pd[n] + gs).abs() < 1e-14);
        }
    }
    let report = validate_solution(&c, &d, 1e-6).unwrap();
    let worst = pd_max(&c);
    assert!((report.family("balance_p").unwrap().max_violation - worst).abs() < 1e-14);
    assert!(!report.pass);
}

fn pd_max(c: &MultiPeriodCase) -> f64 {
    (0..c.periods()).flat_map(|t| c.bus_demand(t).0).fold(0.0, f64::max)
}

fn model_agrees_with_validator(name: &str, periods: usize, seed: u64) {
    let c = case(name, periods);
    let opf = build_multiperiod_opf(&c).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = opf.model.variable_lower();
    let hi = opf.model.variable_upper();
    let x: Vec<f64> = (0..opf.model.num_variables())
        .map(|i| {
            let (a, b) = (lo[i].max(-2.0), hi[i].min(2.0));
            if a < b {
                rng.gen_range(a..b)
            } else {
                a
            }
        })
        .collect();
    let cval = constraint_values(&opf, &x);
    let d = extract_dispatch(&opf, &x, &c).unwrap();
    for fam in evaluate_rows(&c, &d).unwrap() {
        let rows = opf.layout.rows(fam.family);
        assert_eq!(rows.len(), fam.values.len(), "{:?}", fam.family);
        for (k, r) in rows.enumerate() {
            let model = cval[r];
            let direct = fam.values[k];
            let same = (model - direct).abs() <= 1e-12 * direct.abs().max(1.0);
            let flipped = (model + direct).abs() <= 1e-12 * direct.abs().max(1.0);
            assert!(same || flipped, "{:?} row {k}: {model} vs {direct}", fam.family);
            let (ml, mu) = (opf.model.row_lower()[r], opf.model.row_upper()[r]);
            if same {
                assert_eq!((ml, mu), (fam.lower[k], fam.upper[k]));
            } else {
                assert_eq!((-mu, -ml), (fam.lower[k], fam.upper[k]));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn model_rows_match_direct_evaluation(seed in any::<u64>(), periods in 1usize..4) {
        model_agrees_with_validator("case9", periods, seed);
        model_agrees_with_validator("case30", periods, seed);
    }

    #[test]
    fn profile_is_reproducible_and_bounded(seed in any::<u64>(), t in 1usize..50, amp in 0.0..0.5f64, noise in 0.0..0.1f64) {
        let net = network("case9");
        let a = generate_load_profile(&net, t, 30.0, seed, amp, noise);
        let b = generate_load_profile(&net, t, 30.0, seed, amp, noise);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.scale.len(), t);
        for row in &a.scale {
            prop_assert_eq!(row.len(), net.loads.len());
            prop_assert!(row.iter().all(|&s| s >= 0.1 && s <= 1.0 + amp + noise + 1e-15));
        }
    }
}

#[test]
fn flat_profile_is_all_ones() {
    let net = network("case30");
    let p = generate_load_profile(&net, 48, 30.0, 9, 0.0, 0.0);
    assert!(p.scale.iter().flatten().all(|&s| s == 1.0));
    assert_eq!(p, LoadProfile { seed: 9, ..LoadProfile::flat(&net, 48, 30.0) });
}

#[test]
fn profile_repeats_after_one_day() {
    let net = network("case9");
    let res = 30.0;
    let day = (1440.0 / res) as usize;
    let p = generate_load_profile(&net, 2 * day, res, 1, 0.2, 0.0);
    for t in 0..day {
        for (a, b) in p.scale[t].iter().zip(&p.scale[t + day]) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    let quarter = day / 4;
    assert!((p.scale[quarter][0] - 1.2).abs() < 1e-12);
}

#[test]
fn profile_csv_round_trip() {
    let net = network("case30");
    let p = generate_load_profile(&net, 12, 15.0, 4, 0.2, 0.02);
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    let q = LoadProfile::read_csv(buf.as_slice()).unwrap();
    assert_eq!(p, q);
    assert!(LoadProfile::read_csv("period,minute\n0,x\n".as_bytes()).is_err());
}

#[test]
fn solved_case9_is_valid_and_within_limits() {
    let c = case("case9", 2);
    let opf = build_multiperiod_opf(&c).unwrap();
    let out = solve(&opf.model, &SolverConfig::default().with_tol(1e-6)).unwrap();
    assert_eq!(out.report.status, SolveStatus::Solved);
    let d = extract_dispatch(&opf, &out.x, &c).unwrap();
    for p in &d.periods {
        for (pg, g) in p.pg.iter().zip(&c.network.generators) {
            assert!(*pg >= g.pmin - 1e-9 && *pg <= g.pmax + 1e-9);
        }
    }
    let report = validate_solution(&c, &d, 1e-6).unwrap();
    assert!(report.pass, "{report:?}");
    let objective = opf.model.objective(&out.x).unwrap();
    assert!((d.cost(&c.network) - objective).abs() <= 1e-9 * objective.abs());
}

#[test]
fn malformed_cases_are_rejected() {
    assert!(parse_matpower("function mpc = broken\nmpc.baseMVA = 100;\n").is_err());
    let mut net = network("case9");
    net.buses.iter_mut().for_each(|b| b.reference = false);
    assert!(MultiPeriodCase::new(net.clone(), LoadProfile::flat(&net, 1, 60.0)).is_err());
    let net = network("case9");
    let mut p = LoadProfile::flat(&net, 2, 60.0);
    p.scale[1].pop();
    assert!(MultiPeriodCase::new(net, p).is_err());
}

const TWO_BUS: &str = "function mpc = two_bus
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	345	1	1.1	0.9;
	2	1	50	0	0	0	1	1	0	345	1	1.1	0.9;
];
mpc.gen = [
	1	0	0	100	-100	1	100	1	100	0	0	0	0	0	0	0	0	0	0	0	0;
];
mpc.branch = [
	1	2	0	0.1	0	0	0	0	0	0	1	-360	360;
];
mpc.gencost = [
	2	0	0	3	0.1	2	5;
];
";

#[test]
fn analytic_two_bus_dispatch_has_no_violation() {
    // Lossless line with b = −10: p_f = 10 v₂ sin δ, q_t = 10 v₂ (v₂ − cos δ).
    // Zero reactive demand at bus 2 forces v₂ = cos δ, so 50 MW needs sin 2δ = 0.1.
    let net = parse_matpower(TWO_BUS).unwrap();
    let case = MultiPeriodCase::new(net.clone(), LoadProfile::flat(&net, 1, 60.0)).unwrap();
    let opf = build_multiperiod_opf(&case).unwrap();
    let delta = 0.1f64.asin() / 2.0;
    let (s, c) = delta.sin_cos();
    let mut x = vec![0.0; opf.model.num_variables()];
    let l = &opf.layout;
    x[l.pg] = 0.5;
    x[l.qg] = 10.0 * s * s;
    x[l.p_from] = 0.5;
    x[l.q_from] = 10.0 * s * s;
    x[l.p_to] = -0.5;
    x[l.q_to] = 0.0;
    x[l.vm] = 1.0;
    x[l.vm + 1] = c;
    x[l.va + 1] = -delta;
    let d = extract_dispatch(&opf, &x, &case).unwrap();
    let report = validate_solution(&case, &d, 1e-14).unwrap();
    assert!(report.pass, "{report:?}");
    assert!(constraint_values(&opf, &x).iter().take(l.rows(RowFamily::FlowQ).end).all(|v| v.abs() < 1e-14));
    let cost = opf.model.objective(&x).unwrap();
    assert!((cost - (1000.0 * 0.25 + 200.0 * 0.5 + 5.0)).abs() < 1e-12);
}

#[test]
fn flat_start_balance_matches_hand_computed_mismatch() {
    let net = network("case9");
    let c = MultiPeriodCase::new(net.clone(), LoadProfile::flat(&net, 1, 60.0)).unwrap();
    let opf = build_multiperiod_opf(&c).unwrap();
    let cval = constraint_values(&opf, opf.model.start());
    let mut p = vec![0.0; 9];
    let mut q = vec![0.0; 9];
    for g in &net.generators {
        p[g.bus] += 0.5 * (g.pmin + g.pmax);
        q[g.bus] += 0.5 * (g.qmin + g.qmax);
    }
    for line in &net.lines {
        // Flow variables start at their flat-profile values.
        let a = line.admittance();
        p[line.from] -= a.gff + a.gft;
        q[line.from] -= -a.bff - a.bft;
        p[line.to] -= a.gtt + a.gtf;
        q[line.to] -= -a.btt - a.btf;
    }
    for (n, bus) in net.buses.iter().enumerate() {
        p[n] -= bus.gs;
        q[n] += bus.bs;
    }
    for l in &net.loads {
        p[l.bus] -= l.pd;
        q[l.bus] -= l.qd;
    }
    let (bp, bq) = (opf.layout.rows(RowFamily::BalanceP), opf.layout.rows(RowFamily::BalanceQ));
    for n in 0..9 {
        assert!((cval[bp.start + n] - p[n]).abs() < 1e-14, "P bus {n}");
        assert!((cval[bq.start + n] - q[n]).abs() < 1e-14, "Q bus {n}");
    }
}

#[test]
fn objective_matches_a_direct_cost_loop() {
    let c = case("case9", 3);
    let opf = build_multiperiod_opf(&c).unwrap();
    let x = opf.model.start();
    let mut expect = 0.0;
    for t in 0..3 {
        for (g, gen) in c.network.generators.iter().enumerate() {
            let p = x[opf.layout.pg + t * 3 + g];
            expect += gen.cost[0] * p * p + gen.cost[1] * p + gen.cost[2];
        }
    }
    assert_eq!(opf.model.objective(x).unwrap(), expect);
}
