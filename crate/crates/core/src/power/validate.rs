//! Direct re-evaluation of the OPF rows from a dispatch, one loop per family.

use serde::{Deserialize, Serialize};

use super::opf::RowFamily;
use super::{DispatchSolution, MultiPeriodCase, PowerError};

/// Residuals of one family in model row order, with their bounds and the
/// per-row scale `max(1, |constant term|)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyRows {
    pub family: RowFamily,
    pub values: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FamilyRows {
    fn new(family: RowFamily) -> Self {
        FamilyRows { family, values: Vec::new(), lower: Vec::new(), upper: Vec::new(), scale: Vec::new() }
    }

    fn push(&mut self, value: f64, lower: f64, upper: f64, scale: f64) {
        self.values.push(value);
        self.lower.push(lower);
        self.upper.push(upper);
        self.scale.push(scale.abs().max(1.0));
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub family: String,
    pub rows: usize,
    pub max_violation: f64,
    pub max_scaled_violation: f64,
    /// Row (or variable) index of the worst scaled violation.
    pub worst: Option<usize>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub schema_version: u32,
    pub tol: f64,
    pub families: Vec<FamilyReport>,
    pub max_scaled_violation: f64,
    pub pass: bool,
}

pub const VIOLATION_SCHEMA_VERSION: u32 = 1;

impl ViolationReport {
    pub fn family(&self, name: &str) -> Option<&FamilyReport> {
        self.families.iter().find(|f| f.family == name)
    }
}

fn check_shapes(case: &MultiPeriodCase, d: &DispatchSolution) -> Result<(), PowerError> {
    let net = &case.network;
    let (nb, nl, ng) = (net.buses.len(), net.lines.len(), net.generators.len());
    if d.periods.len() != case.periods() {
        return Err(PowerError::Shape { what: "dispatch periods".into(), expected: case.periods(), found: d.periods.len() });
    }
    for (t, p) in d.periods.iter().enumerate() {
        for (v, n, what) in [
            (&p.pg, ng, "pg"),
            (&p.qg, ng, "qg"),
            (&p.p_from, nl, "p_from"),
            (&p.q_from, nl, "q_from"),
            (&p.p_to, nl, "p_to"),
            (&p.q_to, nl, "q_to"),
            (&p.vm, nb, "vm"),
            (&p.va, nb, "va"),
        ] {
            if v.len() != n {
                return Err(PowerError::Shape { what: format!("period {t} {what}"), expected: n, found: v.len() });
            }
        }
    }
    Ok(())
}

/// Evaluate every constraint family at `d`.
pub fn evaluate_rows(case: &MultiPeriodCase, d: &DispatchSolution) -> Result<Vec<FamilyRows>, PowerError> {
    check_shapes(case, d)?;
    let net = &case.network;
    let tn = case.periods();
    let mut bp = FamilyRows::new(RowFamily::BalanceP);
    let mut bq = FamilyRows::new(RowFamily::BalanceQ);
    let mut fp = FamilyRows::new(RowFamily::FlowP);
    let mut fq = FamilyRows::new(RowFamily::FlowQ);
    let mut th = FamilyRows::new(RowFamily::Thermal);
    let mut an = FamilyRows::new(RowFamily::Angle);
    let mut rp = FamilyRows::new(RowFamily::Ramp);

    for t in 0..tn {
        let p = &d.periods[t];
        let (pd, qd) = case.bus_demand(t);
        let mut inj_p = vec![0.0; net.buses.len()];
        let mut inj_q = vec![0.0; net.buses.len()];
        for (g, gen) in net.generators.iter().enumerate() {
            inj_p[gen.bus] += p.pg[g];
            inj_q[gen.bus] += p.qg[g];
        }
        for (l, line) in net.lines.iter().enumerate() {
            inj_p[line.from] -= p.p_from[l];
            inj_q[line.from] -= p.q_from[l];
            inj_p[line.to] -= p.p_to[l];
            inj_q[line.to] -= p.q_to[l];
        }
        for (n, bus) in net.buses.iter().enumerate() {
            let v2 = p.vm[n] * p.vm[n];
            bp.push(inj_p[n] - bus.gs * v2 - pd[n], 0.0, 0.0, pd[n]);
            bq.push(inj_q[n] + bus.bs * v2 - qd[n], 0.0, 0.0, qd[n]);
        }

        for (l, line) in net.lines.iter().enumerate() {
            let a = line.admittance();
            let (f, to) = (line.from, line.to);
            let (vf, vt) = (p.vm[f], p.vm[to]);
            let (s, c) = (p.va[f] - p.va[to]).sin_cos();
            let pf = a.gff * vf * vf + vf * vt * (a.gft * c + a.bft * s);
            let qf = -a.bff * vf * vf + vf * vt * (a.gft * s - a.bft * c);
            // sin(θt − θf) = −s, cos(θt − θf) = c
            let pt = a.gtt * vt * vt + vf * vt * (a.gtf * c - a.btf * s);
            let qt = -a.btt * vt * vt + vf * vt * (-a.gtf * s - a.btf * c);
            fp.push(p.p_from[l] - pf, 0.0, 0.0, 0.0);
            fp.push(p.p_to[l] - pt, 0.0, 0.0, 0.0);
            fq.push(p.q_from[l] - qf, 0.0, 0.0, 0.0);
            fq.push(p.q_to[l] - qt, 0.0, 0.0, 0.0);
        }

        for line_idx in (0..net.lines.len()).filter(|&l| net.lines[l].rate.is_some()) {
            let r = net.lines[line_idx].rate.unwrap_or(f64::INFINITY);
            let sf = p.p_from[line_idx].powi(2) + p.q_from[line_idx].powi(2);
            let st = p.p_to[line_idx].powi(2) + p.q_to[line_idx].powi(2);
            th.push(sf, f64::NEG_INFINITY, r * r, 0.0);
            th.push(st, f64::NEG_INFINITY, r * r, 0.0);
        }

        for line in &net.lines {
            an.push(p.va[line.from] - p.va[line.to], line.angmin, line.angmax, 0.0);
        }
    }
    for t in 1..tn {
        for (g, _) in net.generators.iter().enumerate() {
            let r = case.ramp_per_period(g);
            if r.is_finite() {
                rp.push(d.periods[t].pg[g] - d.periods[t - 1].pg[g], -r, r, 0.0);
            }
        }
    }
    Ok(vec![bp, bq, fp, fq, th, an, rp])
}

fn dist(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo {
        lo - v
    } else if v > hi {
        v - hi
    } else if v.is_nan() {
        f64::INFINITY
    } else {
        0.0
    }
}

fn summarize(family: &str, viol: impl Iterator<Item = (f64, f64)>, tol: f64) -> FamilyReport {
    let mut rep = FamilyReport { family: family.to_string(), rows: 0, max_violation: 0.0, max_scaled_violation: 0.0, worst: None, pass: true };
    for (k, (abs, scaled)) in viol.enumerate() {
        rep.rows += 1;
        rep.max_violation = rep.max_violation.max(abs);
        if scaled > rep.max_scaled_violation || (scaled.is_nan() && rep.worst.is_none()) {
            rep.max_scaled_violation = scaled;
            rep.worst = Some(k);
        }
    }
    rep.pass = rep.max_scaled_violation <= tol;
    rep
}

/// Maximum violation per family, each scaled row-wise by `max(1, |constant|)`
/// and compared to `tol`. Variable bounds form a separate `bounds` family.
pub fn validate_solution(case: &MultiPeriodCase, d: &DispatchSolution, tol: f64) -> Result<ViolationReport, PowerError> {
    let rows = evaluate_rows(case, d)?;
    let mut families: Vec<FamilyReport> = rows
        .iter()
        .map(|r| {
            let it = (0..r.values.len()).map(|k| {
                let v = dist(r.values[k], r.lower[k], r.upper[k]);
                (v, v / r.scale[k])
            });
            summarize(r.family.name(), it, tol)
        })
        .collect();

    let net = &case.network;
    let reference = net.reference_bus().ok_or(PowerError::NoReferenceBus)?;
    let mut bounds = Vec::new();
    for p in &d.periods {
        for (g, gen) in net.generators.iter().enumerate() {
            bounds.push(dist(p.pg[g], gen.pmin, gen.pmax));
            bounds.push(dist(p.qg[g], gen.qmin, gen.qmax));
        }
        for (n, bus) in net.buses.iter().enumerate() {
            bounds.push(dist(p.vm[n], bus.vmin, bus.vmax));
        }
        bounds.push(p.va[reference].abs());
    }
    families.push(summarize("bounds", bounds.into_iter().map(|v| (v, v)), tol));

    let max_scaled_violation = families.iter().map(|f| f.max_scaled_violation).fold(0.0, f64::max);
    let pass = families.iter().all(|f| f.pass);
    Ok(ViolationReport { schema_version: VIOLATION_SCHEMA_VERSION, tol, families, max_scaled_violation, pass })
}
