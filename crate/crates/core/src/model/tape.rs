//! Compiled pattern kernels.
//!
//! A [`Tape`] is the topologically ordered form of an [`Expr`], built once when
//! a pattern is registered. It carries the pattern's local sparsity (which
//! slots the gradient touches and which slot pairs have nonzero second
//! derivatives) and evaluates value, gradient (reverse sweep) and Hessian
//! (forward-over-reverse, one tangent sweep per Hessian column) for any data
//! record.

use std::collections::BTreeSet;

use thiserror::Error;

use super::expr::{Expr, UnaryFn};

/// Failure inside a single pattern instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum EvalFault {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of a negative value")]
    SqrtDomain,
    #[error("logarithm of a non-positive value")]
    LogDomain,
    #[error("power with a negative base and non-integer exponent")]
    PowDomain,
    #[error("non-finite value")]
    NonFinite,
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Var(usize),
    Param(usize),
    Const(f64),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    /// Power whose exponent does not depend on variables.
    PowC(usize, usize),
    /// Power whose exponent depends on variables.
    PowV(usize, usize),
    Neg(usize),
    Unary(UnaryFn, usize),
}

/// Reusable per-thread buffers for tape sweeps.
#[derive(Clone, Debug, Default)]
pub struct Scratch {
    val: Vec<f64>,
    adj: Vec<f64>,
    tan: Vec<f64>,
    tadj: Vec<f64>,
}

impl Scratch {
    fn fit(&mut self, n: usize) {
        if self.val.len() < n {
            self.val.resize(n, 0.0);
            self.adj.resize(n, 0.0);
            self.tan.resize(n, 0.0);
            self.tadj.resize(n, 0.0);
        }
    }
}

#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    active: Vec<bool>,
    slots: usize,
    fields: usize,
    grad_slots: Vec<usize>,
    hess_pairs: Vec<(usize, usize)>,
    /// Distinct column slots of `hess_pairs`, with the pair range for each.
    hess_columns: Vec<(usize, std::ops::Range<usize>)>,
}

impl Tape {
    pub fn compile(expr: &Expr) -> Self {
        let mut ops = Vec::new();
        push(expr, &mut ops);

        let mut deps: Vec<Vec<usize>> = Vec::with_capacity(ops.len());
        let mut pairs: Vec<BTreeSet<(usize, usize)>> = Vec::with_capacity(ops.len());
        for op in &ops {
            let (d, p) = analyze(op, &deps, &pairs);
            deps.push(d);
            pairs.push(p);
        }
        let active = deps.iter().map(|d| !d.is_empty()).collect();
        let grad_slots = deps.last().cloned().unwrap_or_default();
        // Pairs are (row, col) with row >= col; group by column.
        let mut sorted: Vec<(usize, usize)> = pairs.last().cloned().unwrap_or_default().into_iter().collect();
        sorted.sort_by_key(|&(r, c)| (c, r));
        let mut hess_columns: Vec<(usize, std::ops::Range<usize>)> = Vec::new();
        for (k, &(_, c)) in sorted.iter().enumerate() {
            match hess_columns.last_mut() {
                Some((col, range)) if *col == c => range.end = k + 1,
                _ => hess_columns.push((c, k..k + 1)),
            }
        }

        Tape {
            ops,
            active,
            slots: expr.slot_count(),
            fields: expr.field_count(),
            grad_slots,
            hess_pairs: sorted,
            hess_columns,
        }
    }

    pub fn slot_count(&self) -> usize {
        self.slots
    }

    pub fn field_count(&self) -> usize {
        self.fields
    }

    /// Local slots with a (structurally) nonzero first derivative, ascending.
    pub fn gradient_slots(&self) -> &[usize] {
        &self.grad_slots
    }

    /// Local slot pairs `(a, b)`, `a >= b`, with a structurally nonzero second
    /// derivative, ordered by column then row.
    pub fn hessian_pairs(&self) -> &[(usize, usize)] {
        &self.hess_pairs
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn forward(&self, x: &[f64], p: &[f64], s: &mut Scratch) -> Result<f64, EvalFault> {
        s.fit(self.ops.len());
        let v = &mut s.val;
        for (i, op) in self.ops.iter().enumerate() {
            v[i] = match *op {
                Op::Var(k) => x[k],
                Op::Param(k) => p[k],
                Op::Const(c) => c,
                Op::Add(a, b) => v[a] + v[b],
                Op::Sub(a, b) => v[a] - v[b],
                Op::Mul(a, b) => v[a] * v[b],
                Op::Div(a, b) => {
                    if v[b] == 0.0 {
                        return Err(EvalFault::DivisionByZero);
                    }
                    v[a] / v[b]
                }
                Op::PowC(a, b) => {
                    let (base, e) = (v[a], v[b]);
                    if base < 0.0 && e.fract() != 0.0 {
                        return Err(EvalFault::PowDomain);
                    }
                    if base == 0.0 && e < 0.0 {
                        return Err(EvalFault::DivisionByZero);
                    }
                    pow(base, e)
                }
                Op::PowV(a, b) => {
                    if v[a] <= 0.0 {
                        return Err(EvalFault::PowDomain);
                    }
                    v[a].powf(v[b])
                }
                Op::Neg(a) => -v[a],
                Op::Unary(f, a) => {
                    let u = v[a];
                    match f {
                        UnaryFn::Sin => u.sin(),
                        UnaryFn::Cos => u.cos(),
                        UnaryFn::Sqrt => {
                            if u < 0.0 {
                                return Err(EvalFault::SqrtDomain);
                            }
                            u.sqrt()
                        }
                        UnaryFn::Log => {
                            if u <= 0.0 {
                                return Err(EvalFault::LogDomain);
                            }
                            u.ln()
                        }
                        UnaryFn::Exp => u.exp(),
                    }
                }
            };
        }
        let out = *v.get(self.ops.len().wrapping_sub(1)).unwrap_or(&0.0);
        if out.is_finite() {
            Ok(out)
        } else {
            Err(EvalFault::NonFinite)
        }
    }

    pub fn value(&self, x: &[f64], p: &[f64], s: &mut Scratch) -> Result<f64, EvalFault> {
        if self.ops.is_empty() {
            return Ok(0.0);
        }
        self.forward(x, p, s)
    }

    /// First-order adjoint sweep after `forward`. Leaves node adjoints in `s.adj`.
    fn reverse(&self, s: &mut Scratch) {
        let n = self.ops.len();
        let (v, adj) = (&s.val, &mut s.adj);
        adj[..n].iter_mut().for_each(|a| *a = 0.0);
        adj[n - 1] = 1.0;
        for i in (0..n).rev() {
            if !self.active[i] {
                continue;
            }
            let w = adj[i];
            if w == 0.0 {
                continue;
            }
            match self.ops[i] {
                Op::Var(_) | Op::Param(_) | Op::Const(_) => {}
                Op::Add(a, b) => {
                    adj[a] += w;
                    adj[b] += w;
                }
                Op::Sub(a, b) => {
                    adj[a] += w;
                    adj[b] -= w;
                }
                Op::Mul(a, b) => {
                    adj[a] += w * v[b];
                    adj[b] += w * v[a];
                }
                Op::Div(a, b) => {
                    adj[a] += w / v[b];
                    adj[b] -= w * v[a] / (v[b] * v[b]);
                }
                Op::PowC(a, b) => {
                    adj[a] += w * v[b] * pow(v[a], v[b] - 1.0);
                }
                Op::PowV(a, b) => {
                    adj[a] += w * v[b] * v[a].powf(v[b] - 1.0);
                    adj[b] += w * v[i] * v[a].ln();
                }
                Op::Neg(a) => adj[a] -= w,
                Op::Unary(f, a) => adj[a] += w * unary_d1(f, v[a], v[i]),
            }
        }
    }

    /// Value and gradient; `grad` is indexed like [`Tape::gradient_slots`].
    pub fn gradient(&self, x: &[f64], p: &[f64], s: &mut Scratch, grad: &mut [f64]) -> Result<f64, EvalFault> {
        if self.ops.is_empty() {
            return Ok(0.0);
        }
        let f = self.forward(x, p, s)?;
        self.reverse(s);
        let slot_grad = gather_slots(&self.ops, &s.adj, self.slots);
        for (g, &k) in grad.iter_mut().zip(&self.grad_slots) {
            *g = slot_grad[k];
            if !g.is_finite() {
                return Err(EvalFault::NonFinite);
            }
        }
        Ok(f)
    }

    /// `weight` times the local Hessian entries listed by [`Tape::hessian_pairs`].
    pub fn hessian(&self, x: &[f64], p: &[f64], weight: f64, s: &mut Scratch, out: &mut [f64]) -> Result<(), EvalFault> {
        if self.hess_pairs.is_empty() {
            return Ok(());
        }
        self.forward(x, p, s)?;
        self.reverse(s);
        let n = self.ops.len();
        for (dir, range) in &self.hess_columns {
            // Forward tangent sweep along e_dir.
            {
                let (v, t) = (&s.val, &mut s.tan);
                for i in 0..n {
                    if !self.active[i] {
                        t[i] = 0.0;
                        continue;
                    }
                    t[i] = match self.ops[i] {
                        Op::Var(k) => f64::from(u8::from(k == *dir)),
                        Op::Param(_) | Op::Const(_) => 0.0,
                        Op::Add(a, b) => t[a] + t[b],
                        Op::Sub(a, b) => t[a] - t[b],
                        Op::Mul(a, b) => t[a] * v[b] + v[a] * t[b],
                        Op::Div(a, b) => (t[a] - v[i] * t[b]) / v[b],
                        Op::PowC(a, b) => v[b] * pow(v[a], v[b] - 1.0) * t[a],
                        Op::PowV(a, b) => v[b] * v[a].powf(v[b] - 1.0) * t[a] + v[i] * v[a].ln() * t[b],
                        Op::Neg(a) => -t[a],
                        Op::Unary(f, a) => unary_d1(f, v[a], v[i]) * t[a],
                    };
                }
            }
            // Second-order adjoint sweep.
            {
                let (v, adj, t, ta) = (&s.val, &s.adj, &s.tan, &mut s.tadj);
                ta[..n].iter_mut().for_each(|a| *a = 0.0);
                for i in (0..n).rev() {
                    if !self.active[i] {
                        continue;
                    }
                    let (w, wd) = (adj[i], ta[i]);
                    match self.ops[i] {
                        Op::Var(_) | Op::Param(_) | Op::Const(_) => {}
                        Op::Add(a, b) => {
                            ta[a] += wd;
                            ta[b] += wd;
                        }
                        Op::Sub(a, b) => {
                            ta[a] += wd;
                            ta[b] -= wd;
                        }
                        Op::Mul(a, b) => {
                            ta[a] += wd * v[b] + w * t[b];
                            ta[b] += wd * v[a] + w * t[a];
                        }
                        Op::Div(a, b) => {
                            let (x, y) = (v[a], v[b]);
                            let y2 = y * y;
                            ta[a] += wd / y - w * t[b] / y2;
                            ta[b] += -wd * x / y2 + w * (-t[a] / y2 + 2.0 * x * t[b] / (y2 * y));
                        }
                        Op::PowC(a, b) => {
                            let (x, e) = (v[a], v[b]);
                            let d1 = e * pow(x, e - 1.0);
                            let d2 = e * (e - 1.0) * pow(x, e - 2.0);
                            ta[a] += wd * d1 + w * d2 * t[a];
                        }
                        Op::PowV(a, b) => {
                            let (x, e, f) = (v[a], v[b], v[i]);
                            let lx = x.ln();
                            let fa = e * x.powf(e - 1.0);
                            let fb = f * lx;
                            let faa = e * (e - 1.0) * x.powf(e - 2.0);
                            let fab = x.powf(e - 1.0) * (1.0 + e * lx);
                            let fbb = f * lx * lx;
                            ta[a] += wd * fa + w * (faa * t[a] + fab * t[b]);
                            ta[b] += wd * fb + w * (fab * t[a] + fbb * t[b]);
                        }
                        Op::Neg(a) => ta[a] -= wd,
                        Op::Unary(f, a) => {
                            let (d1, d2) = (unary_d1(f, v[a], v[i]), unary_d2(f, v[a], v[i]));
                            ta[a] += wd * d1 + w * d2 * t[a];
                        }
                    }
                }
            }
            let column = gather_slots(&self.ops, &s.tadj, self.slots);
            for k in range.clone() {
                let (row, _) = self.hess_pairs[k];
                let h = weight * column[row];
                if !h.is_finite() {
                    return Err(EvalFault::NonFinite);
                }
                out[k] = h;
            }
        }
        Ok(())
    }
}

fn pow(base: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() < f64::from(i32::MAX) {
        base.powi(e as i32)
    } else {
        base.powf(e)
    }
}

fn unary_d1(f: UnaryFn, u: f64, fu: f64) -> f64 {
    match f {
        UnaryFn::Sin => u.cos(),
        UnaryFn::Cos => -u.sin(),
        UnaryFn::Sqrt => 0.5 / fu,
        UnaryFn::Log => 1.0 / u,
        UnaryFn::Exp => fu,
    }
}

fn unary_d2(f: UnaryFn, u: f64, fu: f64) -> f64 {
    match f {
        UnaryFn::Sin => -u.sin(),
        UnaryFn::Cos => -u.cos(),
        UnaryFn::Sqrt => -0.25 / (fu * u),
        UnaryFn::Log => -1.0 / (u * u),
        UnaryFn::Exp => fu,
    }
}

fn gather_slots(ops: &[Op], node_vals: &[f64], slots: usize) -> smallvec_like::Slots {
    let mut out = smallvec_like::Slots::zeros(slots);
    for (i, op) in ops.iter().enumerate() {
        if let Op::Var(k) = op {
            out[*k] += node_vals[i];
        }
    }
    out
}

mod smallvec_like {
    use std::ops::{Index, IndexMut};

    const INLINE: usize = 8;

    /// Slot accumulator that avoids heap allocation for small patterns.
    pub enum Slots {
        Inline([f64; INLINE]),
        Heap(Vec<f64>),
    }

    impl Slots {
        pub fn zeros(n: usize) -> Self {
            if n <= INLINE {
                Slots::Inline([0.0; INLINE])
            } else {
                Slots::Heap(vec![0.0; n])
            }
        }
    }

    impl Index<usize> for Slots {
        type Output = f64;
        fn index(&self, i: usize) -> &f64 {
            match self {
                Slots::Inline(a) => &a[i],
                Slots::Heap(v) => &v[i],
            }
        }
    }

    impl IndexMut<usize> for Slots {
        fn index_mut(&mut self, i: usize) -> &mut f64 {
            match self {
                Slots::Inline(a) => &mut a[i],
                Slots::Heap(v) => &mut v[i],
            }
        }
    }
}

fn push(e: &Expr, ops: &mut Vec<Op>) -> usize {
    let op = match e {
        Expr::Var(k) => Op::Var(*k),
        Expr::Param(k) => Op::Param(*k),
        Expr::Const(c) => Op::Const(*c),
        Expr::Add(a, b) => {
            let (a, b) = (push(a, ops), push(b, ops));
            Op::Add(a, b)
        }
        Expr::Sub(a, b) => {
            let (a, b) = (push(a, ops), push(b, ops));
            Op::Sub(a, b)
        }
        Expr::Mul(a, b) => {
            let (a, b) = (push(a, ops), push(b, ops));
            Op::Mul(a, b)
        }
        Expr::Div(a, b) => {
            let (a, b) = (push(a, ops), push(b, ops));
            Op::Div(a, b)
        }
        Expr::Pow(a, b) => {
            let variable_exponent = b.slot_count() > 0 && has_var(b);
            let (a, b) = (push(a, ops), push(b, ops));
            if variable_exponent {
                Op::PowV(a, b)
            } else {
                Op::PowC(a, b)
            }
        }
        Expr::Neg(a) => Op::Neg(push(a, ops)),
        Expr::Unary(f, a) => Op::Unary(*f, push(a, ops)),
    };
    ops.push(op);
    ops.len() - 1
}

fn has_var(e: &Expr) -> bool {
    match e {
        Expr::Var(_) => true,
        Expr::Param(_) | Expr::Const(_) => false,
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
            has_var(a) || has_var(b)
        }
        Expr::Neg(a) | Expr::Unary(_, a) => has_var(a),
    }
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn cross(into: &mut BTreeSet<(usize, usize)>, a: &[usize], b: &[usize]) {
    for &i in a {
        for &j in b {
            into.insert((i.max(j), i.min(j)));
        }
    }
}

fn analyze(op: &Op, deps: &[Vec<usize>], pairs: &[BTreeSet<(usize, usize)>]) -> (Vec<usize>, BTreeSet<(usize, usize)>) {
    let both = |a: usize, b: usize| {
        let mut p = pairs[a].clone();
        p.extend(pairs[b].iter().copied());
        p
    };
    match *op {
        Op::Var(k) => (vec![k], BTreeSet::new()),
        Op::Param(_) | Op::Const(_) => (Vec::new(), BTreeSet::new()),
        Op::Add(a, b) | Op::Sub(a, b) => (union(&deps[a], &deps[b]), both(a, b)),
        Op::Mul(a, b) => {
            let mut p = both(a, b);
            cross(&mut p, &deps[a], &deps[b]);
            (union(&deps[a], &deps[b]), p)
        }
        Op::Div(a, b) => {
            let mut p = both(a, b);
            cross(&mut p, &deps[a], &deps[b]);
            cross(&mut p, &deps[b], &deps[b]);
            (union(&deps[a], &deps[b]), p)
        }
        Op::PowC(a, _) => {
            let mut p = pairs[a].clone();
            cross(&mut p, &deps[a], &deps[a]);
            (deps[a].clone(), p)
        }
        Op::PowV(a, b) => {
            let d = union(&deps[a], &deps[b]);
            let mut p = both(a, b);
            cross(&mut p, &d, &d);
            (d, p)
        }
        Op::Neg(a) => (deps[a].clone(), pairs[a].clone()),
        Op::Unary(_, a) => {
            let mut p = pairs[a].clone();
            cross(&mut p, &deps[a], &deps[a]);
            (deps[a].clone(), p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_hessian(e: &Expr, x: &[f64], p: &[f64]) -> Vec<Vec<f64>> {
        let tape = Tape::compile(e);
        let n = x.len();
        let h = 1e-4;
        let mut s = Scratch::default();
        let f = |x: &[f64], s: &mut Scratch| tape.value(x, p, s).unwrap();
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut xpp = x.to_vec();
                xpp[i] += h;
                xpp[j] += h;
                let mut xpm = x.to_vec();
                xpm[i] += h;
                xpm[j] -= h;
                let mut xmp = x.to_vec();
                xmp[i] -= h;
                xmp[j] += h;
                let mut xmm = x.to_vec();
                xmm[i] -= h;
                xmm[j] -= h;
                out[i][j] = (f(&xpp, &mut s) - f(&xpm, &mut s) - f(&xmp, &mut s) + f(&xmm, &mut s)) / (4.0 * h * h);
            }
        }
        out
    }

    #[test]
    fn quadratic_cost_sparsity() {
        let e = Expr::param(0) * Expr::var(0).powi(2) + Expr::param(1) * Expr::var(0) + Expr::param(2);
        let t = Tape::compile(&e);
        assert_eq!(t.gradient_slots(), &[0]);
        assert_eq!(t.hessian_pairs(), &[(0, 0)]);
    }

    #[test]
    fn linear_pattern_has_no_hessian() {
        let e = Expr::var(0) - Expr::var(1) + 3.0 * Expr::var(2);
        let t = Tape::compile(&e);
        assert_eq!(t.gradient_slots(), &[0, 1, 2]);
        assert!(t.hessian_pairs().is_empty());
    }

    #[test]
    fn product_hessian_entry() {
        let e = Expr::var(0) * Expr::var(1);
        let t = Tape::compile(&e);
        assert_eq!(t.hessian_pairs(), &[(1, 0)]);
        let mut s = Scratch::default();
        let mut h = [0.0];
        t.hessian(&[3.0, 5.0], &[], 1.0, &mut s, &mut h).unwrap();
        assert_eq!(h[0], 1.0);
    }

    #[test]
    fn flow_pattern_matches_finite_differences() {
        // vm * vn * (g cos(ta - tb) + b sin(ta - tb)) + g * vm^2
        let (vm, vn, ta, tb) = (Expr::var(0), Expr::var(1), Expr::var(2), Expr::var(3));
        let d = ta - tb;
        let e = vm.clone() * vn * (Expr::param(0) * d.clone().cos() + Expr::param(1) * d.sin())
            + Expr::param(0) * vm.powi(2);
        let t = Tape::compile(&e);
        let x = [1.02, 0.97, 0.1, -0.05];
        let p = [1.3, -8.0];
        let mut s = Scratch::default();
        let mut g = vec![0.0; t.gradient_slots().len()];
        t.gradient(&x, &p, &mut s, &mut g).unwrap();
        for (k, &slot) in t.gradient_slots().iter().enumerate() {
            let h = 1e-6;
            let mut xp = x;
            xp[slot] += h;
            let mut xm = x;
            xm[slot] -= h;
            let fd = (t.value(&xp, &p, &mut s).unwrap() - t.value(&xm, &p, &mut s).unwrap()) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7 * (1.0 + fd.abs()), "slot {slot}: {fd} vs {}", g[k]);
        }
        let mut hv = vec![0.0; t.hessian_pairs().len()];
        t.hessian(&x, &p, 1.0, &mut s, &mut hv).unwrap();
        let fd = fd_hessian(&e, &x, &p);
        for (k, &(a, b)) in t.hessian_pairs().iter().enumerate() {
            assert!((fd[a][b] - hv[k]).abs() < 1e-5 * (1.0 + fd[a][b].abs()), "({a},{b})");
        }
    }

    #[test]
    fn every_operator_matches_finite_differences() {
        let (a, b) = (Expr::var(0), Expr::var(1));
        let exprs = vec![
            a.clone() / b.clone(),
            a.clone().pow(b.clone()),
            a.clone().sqrt() * b.clone().ln(),
            (a.clone() * b.clone()).exp() - a.clone().sin() * b.clone().cos(),
            a.clone().pow(Expr::param(0)) / (1.0 + b.clone().powi(2)),
            -(a.clone() - b.clone()).powi(3),
        ];
        let x = [1.3, 0.7];
        let p = [2.5];
        let mut s = Scratch::default();
        for e in exprs {
            let t = Tape::compile(&e);
            let mut hv = vec![0.0; t.hessian_pairs().len()];
            t.hessian(&x, &p, 1.0, &mut s, &mut hv).unwrap();
            let fd = fd_hessian(&e, &x, &p);
            for (k, &(i, j)) in t.hessian_pairs().iter().enumerate() {
                assert!((fd[i][j] - hv[k]).abs() < 1e-5 * (1.0 + fd[i][j].abs()), "{e:?} ({i},{j}): {} vs {}", fd[i][j], hv[k]);
            }
        }
    }

    #[test]
    fn domain_faults_are_reported() {
        let mut s = Scratch::default();
        let div = Tape::compile(&(Expr::constant(1.0) / Expr::var(0)));
        assert_eq!(div.value(&[0.0], &[], &mut s), Err(EvalFault::DivisionByZero));
        let sq = Tape::compile(&Expr::var(0).sqrt());
        assert_eq!(sq.value(&[-1.0], &[], &mut s), Err(EvalFault::SqrtDomain));
        let lg = Tape::compile(&Expr::var(0).ln());
        assert_eq!(lg.value(&[0.0], &[], &mut s), Err(EvalFault::LogDomain));
        let ex = Tape::compile(&Expr::var(0).exp());
        assert_eq!(ex.value(&[1e4], &[], &mut s), Err(EvalFault::NonFinite));
    }
}
