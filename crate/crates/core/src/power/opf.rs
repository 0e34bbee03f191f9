use std::ops::Range;

use serde::Serialize;

use super::{DispatchSolution, MultiPeriodCase, PeriodDispatch, PowerError, DISPATCH_SCHEMA_VERSION};
use crate::model::{Expr, InstanceData, Model, ModelBuilder};

/// Constraint families, in model row order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFamily {
    BalanceP,
    BalanceQ,
    FlowP,
    FlowQ,
    Thermal,
    Angle,
    Ramp,
}

impl RowFamily {
    pub const ALL: [RowFamily; 7] =
        [RowFamily::BalanceP, RowFamily::BalanceQ, RowFamily::FlowP, RowFamily::FlowQ, RowFamily::Thermal, RowFamily::Angle, RowFamily::Ramp];

    pub fn name(self) -> &'static str {
        match self {
            RowFamily::BalanceP => "balance_p",
            RowFamily::BalanceQ => "balance_q",
            RowFamily::FlowP => "flow_p",
            RowFamily::FlowQ => "flow_q",
            RowFamily::Thermal => "thermal",
            RowFamily::Angle => "angle",
            RowFamily::Ramp => "ramp",
        }
    }
}

/// Variable and row layout of a built model.
///
/// Variables are period-major within each block: `pg[t·G + g]`,
/// `p_from[t·L + l]`, `vm[t·N + n]` and so on. Row orders per family:
/// balance `t·N + n`; flow `t·2L + 2l + side`; thermal `t·2R + 2k + side`
/// over rated lines; angle `t·L + l`; ramp `(t − 1)·G_r + k` over ramped
/// generators.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub periods: usize,
    pub buses: usize,
    pub lines: usize,
    pub generators: usize,
    pub pg: usize,
    pub qg: usize,
    pub p_from: usize,
    pub q_from: usize,
    pub p_to: usize,
    pub q_to: usize,
    pub vm: usize,
    pub va: usize,
    pub rated: Vec<usize>,
    pub ramped: Vec<usize>,
    pub families: Vec<(RowFamily, Range<usize>)>,
}

impl Layout {
    pub fn rows(&self, family: RowFamily) -> Range<usize> {
        self.families.iter().find(|(f, _)| *f == family).map(|(_, r)| r.clone()).unwrap_or(0..0)
    }

    pub fn num_variables(&self) -> usize {
        self.periods * (2 * self.generators + 4 * self.lines + 2 * self.buses)
    }
}

pub struct OpfModel {
    pub model: Model,
    pub layout: Layout,
}

impl OpfModel {
    /// Inverse of [`extract_dispatch`].
    pub fn flatten(&self, dispatch: &DispatchSolution) -> Result<Vec<f64>, PowerError> {
        let l = &self.layout;
        if dispatch.periods.len() != l.periods {
            return Err(PowerError::Shape { what: "dispatch periods".into(), expected: l.periods, found: dispatch.periods.len() });
        }
        let mut x = vec![0.0; l.num_variables()];
        for (t, p) in dispatch.periods.iter().enumerate() {
            for (off, n, v, what) in blocks(l, p) {
                if v.len() != n {
                    return Err(PowerError::Shape { what: format!("period {t} {what}"), expected: n, found: v.len() });
                }
                x[off + t * n..off + (t + 1) * n].copy_from_slice(v);
            }
        }
        Ok(x)
    }
}

fn blocks<'a>(l: &Layout, p: &'a PeriodDispatch) -> [(usize, usize, &'a [f64], &'static str); 8] {
    [
        (l.pg, l.generators, &p.pg, "pg"),
        (l.qg, l.generators, &p.qg, "qg"),
        (l.p_from, l.lines, &p.p_from, "p_from"),
        (l.q_from, l.lines, &p.q_from, "q_from"),
        (l.p_to, l.lines, &p.p_to, "p_to"),
        (l.q_to, l.lines, &p.q_to, "q_to"),
        (l.vm, l.buses, &p.vm, "vm"),
        (l.va, l.buses, &p.va, "va"),
    ]
}

fn flow_p() -> Expr {
    let d = Expr::var(3) - Expr::var(4);
    Expr::var(0)
        - (Expr::param(0) * Expr::var(1).powi(2)
            + Expr::var(1) * Expr::var(2) * (Expr::param(1) * d.clone().cos() + Expr::param(2) * d.sin()))
}

fn flow_q() -> Expr {
    let d = Expr::var(3) - Expr::var(4);
    Expr::var(0)
        - (-(Expr::param(0) * Expr::var(1).powi(2))
            + Expr::var(1) * Expr::var(2) * (Expr::param(1) * d.clone().sin() - Expr::param(2) * d.cos()))
}

pub fn build_multiperiod_opf(case: &MultiPeriodCase) -> Result<OpfModel, PowerError> {
    let net = &case.network;
    net.check()?;
    let reference = net.reference_bus().ok_or(PowerError::NoReferenceBus)?;
    let (tn, nb, nl, ng) = (case.periods(), net.buses.len(), net.lines.len(), net.generators.len());
    if tn == 0 {
        return Err(PowerError::Shape { what: "periods".into(), expected: 1, found: 0 });
    }
    let rep = |v: Vec<f64>| -> Vec<f64> { (0..tn).flat_map(|_| v.iter().copied()).collect() };
    let gens = &net.generators;
    let adm: Vec<_> = net.lines.iter().map(|l| l.admittance()).collect();

    let mut b = ModelBuilder::new();
    let pg = b.add_variable_block(
        "pg",
        &[tn, ng],
        &rep(gens.iter().map(|g| g.pmin).collect()),
        &rep(gens.iter().map(|g| g.pmax).collect()),
        &rep(gens.iter().map(|g| 0.5 * (g.pmin + g.pmax)).collect()),
    )?;
    let qg = b.add_variable_block(
        "qg",
        &[tn, ng],
        &rep(gens.iter().map(|g| g.qmin).collect()),
        &rep(gens.iter().map(|g| g.qmax).collect()),
        &rep(gens.iter().map(|g| 0.5 * (g.qmin + g.qmax)).collect()),
    )?;
    let inf = [f64::INFINITY];
    let ninf = [f64::NEG_INFINITY];
    let pf = b.add_variable_block("p_from", &[tn, nl], &ninf, &inf, &rep(adm.iter().map(|a| a.gff + a.gft).collect()))?;
    let qf = b.add_variable_block("q_from", &[tn, nl], &ninf, &inf, &rep(adm.iter().map(|a| -a.bff - a.bft).collect()))?;
    let pt = b.add_variable_block("p_to", &[tn, nl], &ninf, &inf, &rep(adm.iter().map(|a| a.gtt + a.gtf).collect()))?;
    let qt = b.add_variable_block("q_to", &[tn, nl], &ninf, &inf, &rep(adm.iter().map(|a| -a.btt - a.btf).collect()))?;
    let vm = b.add_variable_block(
        "vm",
        &[tn, nb],
        &rep(net.buses.iter().map(|b| b.vmin).collect()),
        &rep(net.buses.iter().map(|b| b.vmax).collect()),
        &rep(net.buses.iter().map(|b| 1.0f64.clamp(b.vmin, b.vmax)).collect()),
    )?;
    let va_lower: Vec<f64> = (0..nb).map(|n| if n == reference { 0.0 } else { f64::NEG_INFINITY }).collect();
    let va_upper: Vec<f64> = (0..nb).map(|n| if n == reference { 0.0 } else { f64::INFINITY }).collect();
    let va = b.add_variable_block("va", &[tn, nb], &rep(va_lower), &rep(va_upper), &[0.0])?;

    let (pg_, qg_, pf_, qf_, pt_, qt_, vm_, va_) = (
        |t: usize, g: usize| pg.at(t * ng + g),
        |t: usize, g: usize| qg.at(t * ng + g),
        |t: usize, l: usize| pf.at(t * nl + l),
        |t: usize, l: usize| qf.at(t * nl + l),
        |t: usize, l: usize| pt.at(t * nl + l),
        |t: usize, l: usize| qt.at(t * nl + l),
        |t: usize, n: usize| vm.at(t * nb + n),
        |t: usize, n: usize| va.at(t * nb + n),
    );

    let mut cost = InstanceData::new(1, 3);
    for t in 0..tn {
        for (g, gen) in gens.iter().enumerate() {
            cost.push(&[pg_(t, g)], &gen.cost);
        }
    }
    b.add_objective(&(Expr::param(0) * Expr::var(0).powi(2) + Expr::param(1) * Expr::var(0) + Expr::param(2)), cost)?;

    let mut families = Vec::new();
    let mut push_family = |fam: RowFamily, handle: crate::model::ConstraintBlockHandle| {
        families.push((fam, handle.first_row..handle.first_row + handle.n_rows));
    };

    let mut pd_all = Vec::with_capacity(tn * nb);
    let mut qd_all = Vec::with_capacity(tn * nb);
    for t in 0..tn {
        let (pd, qd) = case.bus_demand(t);
        pd_all.extend(pd);
        qd_all.extend(qd);
    }
    for (fam, rhs, gen_var, from_var, to_var, shunt_sign) in [
        (RowFamily::BalanceP, &pd_all, &pg_ as &dyn Fn(usize, usize) -> usize, &pf_ as &dyn Fn(usize, usize) -> usize, &pt_ as &dyn Fn(usize, usize) -> usize, -1.0),
        (RowFamily::BalanceQ, &qd_all, &qg_, &qf_, &qt_, 1.0),
    ] {
        let mut gen_data = InstanceData::new(1, 0);
        let mut flow_data = InstanceData::new(1, 0);
        let mut shunt_data = InstanceData::new(1, 1);
        for t in 0..tn {
            for (g, gen) in gens.iter().enumerate() {
                gen_data.push_row(t * nb + gen.bus, &[gen_var(t, g)], &[]);
            }
            for (l, line) in net.lines.iter().enumerate() {
                flow_data.push_row(t * nb + line.from, &[from_var(t, l)], &[]);
                flow_data.push_row(t * nb + line.to, &[to_var(t, l)], &[]);
            }
            for (n, bus) in net.buses.iter().enumerate() {
                let s = if fam == RowFamily::BalanceP { bus.gs } else { bus.bs };
                if s != 0.0 {
                    shunt_data.push_row(t * nb + n, &[vm_(t, n)], &[shunt_sign * s]);
                }
            }
        }
        let mut patterns = vec![(Expr::var(0), gen_data), (-Expr::var(0), flow_data)];
        if !shunt_data.is_empty() {
            patterns.push((Expr::param(0) * Expr::var(0).powi(2), shunt_data));
        }
        let h = b.add_constraint(tn * nb, rhs, &[0.0], &[0.0], patterns)?;
        push_family(fam, h);
    }

    for (fam, expr, from_params, to_params, from_var, to_var) in [
        (
            RowFamily::FlowP,
            flow_p(),
            &(|a: &super::BranchAdmittance| [a.gff, a.gft, a.bft]) as &dyn Fn(&super::BranchAdmittance) -> [f64; 3],
            &(|a: &super::BranchAdmittance| [a.gtt, a.gtf, a.btf]) as &dyn Fn(&super::BranchAdmittance) -> [f64; 3],
            &pf_ as &dyn Fn(usize, usize) -> usize,
            &pt_ as &dyn Fn(usize, usize) -> usize,
        ),
        (RowFamily::FlowQ, flow_q(), &|a: &super::BranchAdmittance| [a.bff, a.gft, a.bft], &|a: &super::BranchAdmittance| [a.btt, a.gtf, a.btf], &qf_, &qt_),
    ] {
        let mut data = InstanceData::new(5, 3);
        for t in 0..tn {
            for (l, line) in net.lines.iter().enumerate() {
                let (f, to) = (line.from, line.to);
                data.push_row(t * 2 * nl + 2 * l, &[from_var(t, l), vm_(t, f), vm_(t, to), va_(t, f), va_(t, to)], &from_params(&adm[l]));
                data.push_row(t * 2 * nl + 2 * l + 1, &[to_var(t, l), vm_(t, to), vm_(t, f), va_(t, to), va_(t, f)], &to_params(&adm[l]));
            }
        }
        let h = b.add_constraint(2 * nl * tn, &[0.0], &[0.0], &[0.0], vec![(expr, data)])?;
        push_family(fam, h);
    }

    let rated: Vec<usize> = (0..nl).filter(|&l| net.lines[l].rate.is_some()).collect();
    let nr = rated.len();
    let mut data = InstanceData::new(2, 0);
    let mut upper = Vec::with_capacity(2 * nr * tn);
    for t in 0..tn {
        for (k, &l) in rated.iter().enumerate() {
            let r = net.lines[l].rate.unwrap_or(f64::INFINITY);
            data.push_row(t * 2 * nr + 2 * k, &[pf_(t, l), qf_(t, l)], &[]);
            data.push_row(t * 2 * nr + 2 * k + 1, &[pt_(t, l), qt_(t, l)], &[]);
            upper.extend([r * r, r * r]);
        }
    }
    let h = b.add_constraint(2 * nr * tn, &[0.0], &ninf, &upper, vec![(Expr::var(0).powi(2) + Expr::var(1).powi(2), data)])?;
    push_family(RowFamily::Thermal, h);

    let mut data = InstanceData::new(2, 0);
    let (mut lo, mut hi) = (Vec::with_capacity(nl * tn), Vec::with_capacity(nl * tn));
    for t in 0..tn {
        for (l, line) in net.lines.iter().enumerate() {
            data.push_row(t * nl + l, &[va_(t, line.from), va_(t, line.to)], &[]);
            lo.push(line.angmin);
            hi.push(line.angmax);
        }
    }
    let h = b.add_constraint(nl * tn, &[0.0], &lo, &hi, vec![(Expr::var(0) - Expr::var(1), data)])?;
    push_family(RowFamily::Angle, h);

    let ramped: Vec<usize> = (0..ng).filter(|&g| case.ramp_per_period(g).is_finite()).collect();
    let nr = ramped.len();
    let mut data = InstanceData::new(2, 0);
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for t in 1..tn {
        for (k, &g) in ramped.iter().enumerate() {
            let r = case.ramp_per_period(g);
            data.push_row((t - 1) * nr + k, &[pg_(t, g), pg_(t - 1, g)], &[]);
            lo.push(-r);
            hi.push(r);
        }
    }
    let h = b.add_constraint(nr * (tn - 1), &[0.0], &lo, &hi, vec![(Expr::var(0) - Expr::var(1), data)])?;
    push_family(RowFamily::Ramp, h);

    let layout = Layout {
        periods: tn,
        buses: nb,
        lines: nl,
        generators: ng,
        pg: pg.offset,
        qg: qg.offset,
        p_from: pf.offset,
        q_from: qf.offset,
        p_to: pt.offset,
        q_to: qt.offset,
        vm: vm.offset,
        va: va.offset,
        rated,
        ramped,
        families,
    };
    Ok(OpfModel { model: b.freeze(), layout })
}

/// Split a primal vector back into per-period dispatch arrays.
pub fn extract_dispatch(opf: &OpfModel, x: &[f64], case: &MultiPeriodCase) -> Result<DispatchSolution, PowerError> {
    let l = &opf.layout;
    if x.len() != l.num_variables() {
        return Err(PowerError::Shape { what: "primal vector".into(), expected: l.num_variables(), found: x.len() });
    }
    let take = |off: usize, n: usize, t: usize| x[off + t * n..off + (t + 1) * n].to_vec();
    let periods = (0..l.periods)
        .map(|t| PeriodDispatch {
            pg: take(l.pg, l.generators, t),
            qg: take(l.qg, l.generators, t),
            p_from: take(l.p_from, l.lines, t),
            q_from: take(l.q_from, l.lines, t),
            p_to: take(l.p_to, l.lines, t),
            q_to: take(l.q_to, l.lines, t),
            vm: take(l.vm, l.buses, t),
            va: take(l.va, l.buses, t),
        })
        .collect();
    let mut sol = DispatchSolution {
        schema_version: DISPATCH_SCHEMA_VERSION,
        case: case.network.name.clone(),
        base_mva: case.network.base_mva,
        objective: 0.0,
        status: None,
        iterations: None,
        load_scale: None,
        profile: Some(case.profile.clone()),
        periods,
    };
    sol.objective = sol.cost(&case.network);
    Ok(sol)
}
