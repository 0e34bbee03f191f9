use std::collections::HashMap;

use super::{Bus, Generator, Line, Load, NetworkData, PowerError};

const DEFAULT_ANGLE: f64 = 60.0;
const DEFAULT_RAMP_FRACTION: f64 = 0.2;

struct Matrix {
    rows: Vec<(usize, Vec<f64>)>,
}

fn strip_comment(line: &str) -> &str {
    line.split('%').next().unwrap_or("")
}

fn parse_scalar(text: &str, key: &str) -> Result<Option<f64>, PowerError> {
    let prefix = format!("mpc.{key}");
    for (k, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if let Some(rest) = line.strip_prefix(&prefix) {
            let rest = rest.trim_start();
            if let Some(value) = rest.strip_prefix('=') {
                let v = value.trim().trim_end_matches(';').trim();
                return v
                    .parse()
                    .map(Some)
                    .map_err(|_| PowerError::Parse { line: k + 1, message: format!("invalid value for {key}: `{v}`") });
            }
        }
    }
    Ok(None)
}

fn parse_matrix(text: &str, key: &str) -> Result<Option<Matrix>, PowerError> {
    let prefix = format!("mpc.{key}");
    let mut lines = text.lines().enumerate();
    let start = lines.by_ref().find(|(_, raw)| {
        let line = strip_comment(raw).trim();
        line.strip_prefix(&prefix).is_some_and(|rest| rest.trim_start().starts_with('='))
    });
    let Some((k0, first)) = start else { return Ok(None) };
    let after = strip_comment(first).split_once('[').map(|(_, r)| r.to_string()).ok_or(PowerError::Parse {
        line: k0 + 1,
        message: format!("expected `[` after mpc.{key}"),
    })?;
    let mut rows = Vec::new();
    let mut pending = Vec::new();
    let mut closed = false;
    let mut feed = |k: usize, body: &str, rows: &mut Vec<(usize, Vec<f64>)>| -> Result<bool, PowerError> {
        let (body, end) = match body.split_once(']') {
            Some((b, _)) => (b, true),
            None => (body, false),
        };
        let segments: Vec<&str> = body.split(';').collect();
        for (i, seg) in segments.iter().enumerate() {
            for tok in seg.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
                let v = tok.parse::<f64>().map_err(|_| PowerError::Parse { line: k + 1, message: format!("invalid number `{tok}`") })?;
                pending.push(v);
            }
            let row_ends = i + 1 < segments.len() || end;
            if row_ends && !pending.is_empty() {
                rows.push((k + 1, std::mem::take(&mut pending)));
            }
        }
        if !pending.is_empty() {
            rows.push((k + 1, std::mem::take(&mut pending)));
        }
        Ok(end)
    };
    if feed(k0, &after, &mut rows)? {
        closed = true;
    }
    if !closed {
        for (k, raw) in lines {
            if feed(k, strip_comment(raw), &mut rows)? {
                closed = true;
                break;
            }
        }
    }
    if !closed {
        return Err(PowerError::Parse { line: k0 + 1, message: format!("unterminated matrix mpc.{key}") });
    }
    Ok(Some(Matrix { rows }))
}

fn require(m: &Matrix, what: &str, min_cols: usize) -> Result<(), PowerError> {
    match m.rows.iter().find(|(_, r)| r.len() < min_cols) {
        Some((line, r)) => Err(PowerError::Parse {
            line: *line,
            message: format!("{what} row has {} columns, expected at least {min_cols}", r.len()),
        }),
        None => Ok(()),
    }
}

fn angle_bound(value: f64, sign: f64) -> f64 {
    if value == 0.0 || value.abs() >= 360.0 {
        sign * DEFAULT_ANGLE.to_radians()
    } else {
        value.to_radians()
    }
}

/// Parse the MATPOWER case subset: `baseMVA`, `bus`, `gen`, `branch` and
/// polynomial `gencost` of degree at most two.
pub fn parse_matpower(text: &str) -> Result<NetworkData, PowerError> {
    let name = text
        .lines()
        .find_map(|l| strip_comment(l).trim().strip_prefix("function").map(str::to_string))
        .and_then(|l| l.split('=').nth(1).map(|s| s.trim().to_string()))
        .unwrap_or_else(|| "case".to_string());
    let base = parse_scalar(text, "baseMVA")?.ok_or(PowerError::MissingBlock("baseMVA"))?;
    if !(base > 0.0) {
        return Err(PowerError::InvalidNetwork(format!("baseMVA must be positive, got {base}")));
    }
    let bus = parse_matrix(text, "bus")?.ok_or(PowerError::MissingBlock("bus"))?;
    let gen = parse_matrix(text, "gen")?.ok_or(PowerError::MissingBlock("gen"))?;
    let branch = parse_matrix(text, "branch")?.ok_or(PowerError::MissingBlock("branch"))?;
    let gencost = parse_matrix(text, "gencost")?.ok_or(PowerError::MissingBlock("gencost"))?;
    require(&bus, "bus", 13)?;
    require(&gen, "gen", 10)?;
    require(&branch, "branch", 11)?;
    require(&gencost, "gencost", 4)?;
    if gencost.rows.len() < gen.rows.len() {
        return Err(PowerError::Parse {
            line: gencost.rows.last().map_or(0, |r| r.0),
            message: format!("gencost has {} rows for {} generators", gencost.rows.len(), gen.rows.len()),
        });
    }

    let mut index = HashMap::new();
    let mut buses = Vec::new();
    let mut loads = Vec::new();
    for (line, r) in &bus.rows {
        let id = r[0] as i64;
        let kind = r[1] as i64;
        if kind == 4 {
            continue;
        }
        if index.insert(id, buses.len()).is_some() {
            return Err(PowerError::Parse { line: *line, message: format!("duplicate bus {id}") });
        }
        let (pd, qd) = (r[2] / base, r[3] / base);
        if pd != 0.0 || qd != 0.0 {
            loads.push(Load { bus: buses.len(), pd, qd });
        }
        buses.push(Bus { id, reference: kind == 3, vmin: r[12], vmax: r[11], gs: r[4] / base, bs: r[5] / base });
    }
    let lookup = |id: f64, element: String| index.get(&(id as i64)).copied().ok_or(PowerError::UnknownBus { element, bus: id as i64 });

    let mut generators = Vec::new();
    for (k, ((line, r), (cline, c))) in gen.rows.iter().zip(&gencost.rows).enumerate() {
        if r[7] <= 0.0 {
            continue;
        }
        let Some(&bus) = index.get(&(r[0] as i64)) else {
            if bus.rows.iter().any(|(_, b)| b[0] as i64 == r[0] as i64) {
                continue;
            }
            return Err(PowerError::UnknownBus { element: format!("generator {k} (line {line})"), bus: r[0] as i64 });
        };
        let model = c[0] as i64;
        if model != 2 {
            return Err(PowerError::Unsupported(format!("generator {k}: piecewise-linear cost (line {cline})")));
        }
        let n = c[3] as usize;
        if n > 3 {
            return Err(PowerError::Unsupported(format!("generator {k}: cost polynomial of degree {}", n - 1)));
        }
        if c.len() < 4 + n {
            return Err(PowerError::Parse { line: *cline, message: format!("gencost row declares {n} coefficients") });
        }
        let mut cost = [0.0; 3];
        for (i, &coef) in c[4..4 + n].iter().enumerate() {
            let degree = n - 1 - i;
            cost[degree] = coef * base.powi(degree as i32);
        }
        let pmax = r[8] / base;
        let ramp30 = r.get(18).copied().unwrap_or(0.0);
        let ramp = if ramp30 > 0.0 { 2.0 * ramp30 / base } else { DEFAULT_RAMP_FRACTION * pmax.abs() };
        generators.push(Generator {
            bus,
            pmin: r[9] / base,
            pmax,
            qmin: r[4] / base,
            qmax: r[3] / base,
            ramp,
            cost: [cost[2], cost[1], cost[0]],
        });
    }

    let mut lines = Vec::new();
    for (k, (line, r)) in branch.rows.iter().enumerate() {
        if r[10] <= 0.0 {
            continue;
        }
        let isolated = |id: f64| !index.contains_key(&(id as i64)) && bus.rows.iter().any(|(_, b)| b[0] as i64 == id as i64);
        if isolated(r[0]) || isolated(r[1]) {
            continue;
        }
        let from = lookup(r[0], format!("branch {k} (line {line})"))?;
        let to = lookup(r[1], format!("branch {k} (line {line})"))?;
        let (res, x) = (r[2], r[3]);
        let z2 = res * res + x * x;
        if z2 == 0.0 {
            return Err(PowerError::Parse { line: *line, message: "branch with zero impedance".into() });
        }
        let tap = if r[8] == 0.0 { 1.0 } else { r[8] };
        let (angmin, angmax) = match (r.get(11), r.get(12)) {
            (Some(&lo), Some(&hi)) => (angle_bound(lo, -1.0), angle_bound(hi, 1.0)),
            _ => (angle_bound(0.0, -1.0), angle_bound(0.0, 1.0)),
        };
        lines.push(Line {
            from,
            to,
            g: res / z2,
            b: -x / z2,
            charging: r[4],
            tap,
            shift: r[9].to_radians(),
            rate: (r[5] > 0.0).then(|| r[5] / base),
            angmin,
            angmax,
        });
    }

    let net = NetworkData { name, base_mva: base, buses, lines, generators, loads };
    net.check()?;
    Ok(net)
}
