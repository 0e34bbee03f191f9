//! Pattern-based nonlinear program modeling with sparse reverse-mode AD.
//!
//! A model is a set of variable blocks plus objective and constraint
//! *patterns*. A pattern pairs one expression (compiled once into a [`Tape`])
//! with an array of data records; the objective is the sum of every pattern
//! instance and each constraint row is the sum of the instances that target
//! it, minus the row's right-hand side:
//!
//! ```text
//! f(x)   = Σ_patterns Σ_records f_pattern(x; record)
//! c_m(x) = Σ_{instances targeting m} h_pattern(x; record) − rhs_m,   l_m ≤ c_m(x) ≤ u_m
//! ```
//!
//! Sparsity is analyzed per pattern and replicated across records, so each
//! instance owns a fixed, disjoint range of Jacobian and Hessian COO slots and
//! all instances can be evaluated concurrently. Duplicate coordinates are
//! resolved only when compressing to CSC.

pub mod expr;
pub mod tape;

use std::collections::HashSet;
use std::ops::Range;

use rayon::prelude::*;
use thiserror::Error;

pub use expr::{Expr, UnaryFn};
pub use tape::{EvalFault, Scratch, Tape};

pub use crate::linalg::csc::{compress_to_csc, CooMatrix, CscMatrix, SlotMap};

/// Instances per rayon task. Below `PARALLEL_MIN` instances a pattern is
/// evaluated on the calling thread.
const CHUNK: usize = 256;
const PARALLEL_MIN: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatternKind {
    Objective,
    Constraint,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("variable block `{0}` already exists")]
    DuplicateName(String),
    #[error("variable block `{0}` has an empty shape")]
    EmptyShape(String),
    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch { what: String, expected: usize, found: usize },
    #[error("block `{block}` entry {index}: lower bound {lower} exceeds upper bound {upper}")]
    InvalidBounds { block: String, index: usize, lower: f64, upper: f64 },
    #[error("expression uses slot {slot} but records provide {available}")]
    UnknownSlot { slot: usize, available: usize },
    #[error("expression uses field {field} but records provide {available}")]
    UnknownField { field: usize, available: usize },
    #[error("record {record} references variable {index} outside the decision vector of length {len}")]
    VariableOutOfRange { record: usize, index: usize, len: usize },
    #[error("record {record} binds variable {index} to more than one slot")]
    RepeatedVariable { record: usize, index: usize },
    #[error("record {record} targets row {row} of a block with {n_rows} rows")]
    RowOutOfRange { record: usize, row: usize, n_rows: usize },
    #[error("row {row}: lower bound {lower} exceeds upper bound {upper}")]
    InvalidRowBounds { row: usize, lower: f64, upper: f64 },
    #[error("{kind:?} pattern {pattern}, record {record}: {fault}")]
    Eval { kind: PatternKind, pattern: usize, record: usize, fault: EvalFault },
}

/// One named block of decision variables.
#[derive(Clone, Debug, PartialEq)]
pub struct VariableBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub start: Vec<f64>,
    pub offset: usize,
}

impl VariableBlock {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VariableBlockHandle {
    pub id: usize,
    pub offset: usize,
    pub len: usize,
}

impl VariableBlockHandle {
    /// Global index of flat entry `k` of this block.
    pub fn at(&self, k: usize) -> usize {
        debug_assert!(k < self.len);
        self.offset + k
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ObjectivePatternHandle(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConstraintBlockHandle {
    pub id: usize,
    pub first_row: usize,
    pub n_rows: usize,
}

/// Data array of a pattern: per record, `slots` variable indices, `fields`
/// parameter values and (for constraints) a target row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InstanceData {
    slots: usize,
    fields: usize,
    vars: Vec<usize>,
    params: Vec<f64>,
    rows: Vec<usize>,
}

impl InstanceData {
    pub fn new(slots: usize, fields: usize) -> Self {
        InstanceData { slots, fields, ..Default::default() }
    }

    /// Append an objective record.
    pub fn push(&mut self, vars: &[usize], params: &[f64]) {
        assert_eq!(vars.len(), self.slots, "record slot count");
        assert_eq!(params.len(), self.fields, "record field count");
        self.vars.extend_from_slice(vars);
        self.params.extend_from_slice(params);
    }

    /// Append a constraint record contributing to `row` (local to the block).
    pub fn push_row(&mut self, row: usize, vars: &[usize], params: &[f64]) {
        self.push(vars, params);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        if self.slots > 0 {
            self.vars.len() / self.slots
        } else if self.fields > 0 {
            self.params.len() / self.fields
        } else {
            self.rows.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn vars_of(&self, i: usize) -> &[usize] {
        &self.vars[i * self.slots..(i + 1) * self.slots]
    }

    fn params_of(&self, i: usize) -> &[f64] {
        &self.params[i * self.fields..(i + 1) * self.fields]
    }
}

#[derive(Clone, Debug)]
struct CompiledPattern {
    tape: Tape,
    data: InstanceData,
    jac: Range<usize>,
    hess: Range<usize>,
}

impl CompiledPattern {
    fn jac_stride(&self) -> usize {
        self.tape.gradient_slots().len()
    }

    fn hess_stride(&self) -> usize {
        self.tape.hessian_pairs().len()
    }
}

/// Global COO structure plus the slot range owned by each pattern.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparsityMap {
    pub jac_rows: Vec<usize>,
    pub jac_cols: Vec<usize>,
    /// Lower triangle (`row >= col`) of the Lagrangian Hessian.
    pub hess_rows: Vec<usize>,
    pub hess_cols: Vec<usize>,
    pub objective_hess: Vec<Range<usize>>,
    pub constraint_jac: Vec<Range<usize>>,
    pub constraint_hess: Vec<Range<usize>>,
}

impl SparsityMap {
    pub fn jac_nnz(&self) -> usize {
        self.jac_rows.len()
    }

    pub fn hess_nnz(&self) -> usize {
        self.hess_rows.len()
    }
}

/// Mutable model under construction.
#[derive(Clone, Debug, Default)]
pub struct ModelBuilder {
    blocks: Vec<VariableBlock>,
    n: usize,
    objectives: Vec<(Tape, InstanceData)>,
    constraints: Vec<(Tape, InstanceData)>,
    rhs: Vec<f64>,
    row_lower: Vec<f64>,
    row_upper: Vec<f64>,
    row_blocks: Vec<Range<usize>>,
}

fn broadcast(what: &str, values: &[f64], len: usize) -> Result<Vec<f64>, ModelError> {
    match values.len() {
        1 => Ok(vec![values[0]; len]),
        l if l == len => Ok(values.to_vec()),
        found => Err(ModelError::DimensionMismatch { what: what.to_string(), expected: len, found }),
    }
}

impl ModelBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_variables(&self) -> usize {
        self.n
    }

    pub fn num_constraints(&self) -> usize {
        self.rhs.len()
    }

    /// Append a block of variables. Bound and start arrays either match the
    /// block size or have length one and are broadcast.
    pub fn add_variable_block(
        &mut self,
        name: &str,
        shape: &[usize],
        lower: &[f64],
        upper: &[f64],
        start: &[f64],
    ) -> Result<VariableBlockHandle, ModelError> {
        if shape.is_empty() {
            return Err(ModelError::EmptyShape(name.to_string()));
        }
        if self.blocks.iter().any(|b| b.name == name) {
            return Err(ModelError::DuplicateName(name.to_string()));
        }
        let len: usize = shape.iter().product();
        let lower = broadcast(&format!("{name} lower"), lower, len)?;
        let upper = broadcast(&format!("{name} upper"), upper, len)?;
        let start = broadcast(&format!("{name} start"), start, len)?;
        if let Some(k) = (0..len).find(|&k| !(lower[k] <= upper[k])) {
            return Err(ModelError::InvalidBounds { block: name.to_string(), index: k, lower: lower[k], upper: upper[k] });
        }
        let handle = VariableBlockHandle { id: self.blocks.len(), offset: self.n, len };
        self.blocks.push(VariableBlock { name: name.to_string(), shape: shape.to_vec(), lower, upper, start, offset: self.n });
        self.n += len;
        Ok(handle)
    }

    fn check_pattern(&self, tape: &Tape, data: &InstanceData) -> Result<(), ModelError> {
        if tape.slot_count() > data.slots {
            return Err(ModelError::UnknownSlot { slot: tape.slot_count() - 1, available: data.slots });
        }
        if tape.field_count() > data.fields {
            return Err(ModelError::UnknownField { field: tape.field_count() - 1, available: data.fields });
        }
        let mut seen = HashSet::new();
        for r in 0..data.len() {
            seen.clear();
            for &v in data.vars_of(r) {
                if v >= self.n {
                    return Err(ModelError::VariableOutOfRange { record: r, index: v, len: self.n });
                }
                if !seen.insert(v) {
                    return Err(ModelError::RepeatedVariable { record: r, index: v });
                }
            }
        }
        Ok(())
    }

    /// Register an objective pattern: the objective gains
    /// `Σ_records expr(x; record)`.
    pub fn add_objective(&mut self, expr: &Expr, data: InstanceData) -> Result<ObjectivePatternHandle, ModelError> {
        let tape = Tape::compile(expr);
        self.check_pattern(&tape, &data)?;
        self.objectives.push((tape, data));
        Ok(ObjectivePatternHandle(self.objectives.len() - 1))
    }

    /// Append `n_rows` constraint rows `c(x) = Σ contributions − rhs` with
    /// bounds `lower ≤ c(x) ≤ upper`, and register their patterns. Bounds and
    /// rhs broadcast from length one.
    pub fn add_constraint(
        &mut self,
        n_rows: usize,
        rhs: &[f64],
        lower: &[f64],
        upper: &[f64],
        patterns: Vec<(Expr, InstanceData)>,
    ) -> Result<ConstraintBlockHandle, ModelError> {
        let rhs = if n_rows == 0 { Vec::new() } else { broadcast("constraint rhs", rhs, n_rows)? };
        let lower = if n_rows == 0 { Vec::new() } else { broadcast("constraint lower", lower, n_rows)? };
        let upper = if n_rows == 0 { Vec::new() } else { broadcast("constraint upper", upper, n_rows)? };
        let first_row = self.rhs.len();
        if let Some(k) = (0..n_rows).find(|&k| !(lower[k] <= upper[k])) {
            return Err(ModelError::InvalidRowBounds { row: first_row + k, lower: lower[k], upper: upper[k] });
        }
        let handle = ConstraintBlockHandle { id: self.row_blocks.len(), first_row, n_rows };
        let compiled = patterns
            .into_iter()
            .map(|(e, d)| self.compile_constraint(handle, &e, d))
            .collect::<Result<Vec<_>, _>>()?;
        self.rhs.extend(rhs);
        self.row_lower.extend(lower);
        self.row_upper.extend(upper);
        self.row_blocks.push(first_row..first_row + n_rows);
        self.constraints.extend(compiled);
        Ok(handle)
    }

    /// Add another additive pattern to an existing constraint block.
    pub fn augment_constraint(&mut self, block: ConstraintBlockHandle, expr: &Expr, data: InstanceData) -> Result<(), ModelError> {
        let compiled = self.compile_constraint(block, expr, data)?;
        self.constraints.push(compiled);
        Ok(())
    }

    fn compile_constraint(&self, block: ConstraintBlockHandle, expr: &Expr, mut data: InstanceData) -> Result<(Tape, InstanceData), ModelError> {
        let tape = Tape::compile(expr);
        if data.rows.len() != data.len() {
            return Err(ModelError::DimensionMismatch { what: "constraint record rows".into(), expected: data.len(), found: data.rows.len() });
        }
        if let Some((record, &row)) = data.rows.iter().enumerate().find(|(_, &r)| r >= block.n_rows) {
            return Err(ModelError::RowOutOfRange { record, row, n_rows: block.n_rows });
        }
        self.check_pattern(&tape, &data)?;
        data.rows.iter_mut().for_each(|r| *r += block.first_row);
        Ok((tape, data))
    }

    /// Freeze the model and lay out the derivative structure.
    pub fn freeze(self) -> Model {
        let mut sp = SparsityMap::default();
        let mut objectives = Vec::with_capacity(self.objectives.len());
        for (tape, data) in self.objectives {
            let start = sp.hess_rows.len();
            for r in 0..data.len() {
                let vars = data.vars_of(r);
                for &(a, b) in tape.hessian_pairs() {
                    let (i, j) = (vars[a], vars[b]);
                    sp.hess_rows.push(i.max(j));
                    sp.hess_cols.push(i.min(j));
                }
            }
            let hess = start..sp.hess_rows.len();
            sp.objective_hess.push(hess.clone());
            objectives.push(CompiledPattern { tape, data, jac: 0..0, hess });
        }
        let mut constraints = Vec::with_capacity(self.constraints.len());
        for (tape, data) in self.constraints {
            let jstart = sp.jac_rows.len();
            let hstart = sp.hess_rows.len();
            for r in 0..data.len() {
                let vars = data.vars_of(r);
                for &s in tape.gradient_slots() {
                    sp.jac_rows.push(data.rows[r]);
                    sp.jac_cols.push(vars[s]);
                }
                for &(a, b) in tape.hessian_pairs() {
                    let (i, j) = (vars[a], vars[b]);
                    sp.hess_rows.push(i.max(j));
                    sp.hess_cols.push(i.min(j));
                }
            }
            let (jac, hess) = (jstart..sp.jac_rows.len(), hstart..sp.hess_rows.len());
            sp.constraint_jac.push(jac.clone());
            sp.constraint_hess.push(hess.clone());
            constraints.push(CompiledPattern { tape, data, jac, hess });
        }
        let flat = |f: fn(&VariableBlock) -> &Vec<f64>| self.blocks.iter().flat_map(|b| f(b).iter().copied()).collect::<Vec<f64>>();
        Model {
            lower: flat(|b| &b.lower),
            upper: flat(|b| &b.upper),
            start: flat(|b| &b.start),
            n: self.n,
            blocks: self.blocks,
            objectives,
            constraints,
            rhs: self.rhs,
            row_lower: self.row_lower,
            row_upper: self.row_upper,
            row_blocks: self.row_blocks,
            sparsity: sp,
            parallel: true,
        }
    }
}

/// Frozen model: immutable, evaluable from any number of threads.
#[derive(Clone, Debug)]
pub struct Model {
    blocks: Vec<VariableBlock>,
    n: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    start: Vec<f64>,
    objectives: Vec<CompiledPattern>,
    constraints: Vec<CompiledPattern>,
    rhs: Vec<f64>,
    row_lower: Vec<f64>,
    row_upper: Vec<f64>,
    row_blocks: Vec<Range<usize>>,
    sparsity: SparsityMap,
    parallel: bool,
}

type Fault = (usize, EvalFault);

impl Model {
    /// Enable or disable data-parallel evaluation (enabled by default).
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn num_variables(&self) -> usize {
        self.n
    }

    pub fn num_constraints(&self) -> usize {
        self.rhs.len()
    }

    pub fn blocks(&self) -> &[VariableBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&VariableBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn variable_lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn variable_upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn row_lower(&self) -> &[f64] {
        &self.row_lower
    }

    pub fn row_upper(&self) -> &[f64] {
        &self.row_upper
    }

    pub fn row_block(&self, block: usize) -> Range<usize> {
        self.row_blocks[block].clone()
    }

    pub fn sparsity(&self) -> &SparsityMap {
        &self.sparsity
    }

    pub fn num_objective_patterns(&self) -> usize {
        self.objectives.len()
    }

    pub fn num_constraint_patterns(&self) -> usize {
        self.constraints.len()
    }

    /// Jacobian COO structure `(rows, cols)`; duplicates possible.
    pub fn jacobian_structure(&self) -> (&[usize], &[usize]) {
        (&self.sparsity.jac_rows, &self.sparsity.jac_cols)
    }

    /// Lower-triangle Lagrangian-Hessian COO structure `(rows, cols)`.
    pub fn hessian_structure(&self) -> (&[usize], &[usize]) {
        (&self.sparsity.hess_rows, &self.sparsity.hess_cols)
    }

    fn check_len(&self, what: &str, found: usize, expected: usize) -> Result<(), ModelError> {
        if found == expected {
            Ok(())
        } else {
            Err(ModelError::DimensionMismatch { what: what.into(), expected, found })
        }
    }

    /// Run `f` for every instance, each writing its own `stride`-sized chunk.
    fn for_instances<F>(&self, count: usize, stride: usize, out: &mut [f64], f: F) -> Result<(), Fault>
    where
        F: Fn(usize, &mut Scratch, &mut Vec<f64>, &mut [f64]) -> Result<(), EvalFault> + Sync,
    {
        if stride == 0 || count == 0 {
            return Ok(());
        }
        debug_assert_eq!(out.len(), count * stride);
        let serial = |out: &mut [f64]| -> Result<(), Fault> {
            let (mut s, mut local) = (Scratch::default(), Vec::new());
            for (i, chunk) in out.chunks_mut(stride).enumerate() {
                f(i, &mut s, &mut local, chunk).map_err(|e| (i, e))?;
            }
            Ok(())
        };
        if !self.parallel || count < PARALLEL_MIN {
            return serial(out);
        }
        let result: Result<(), Fault> = out
            .par_chunks_mut(stride * CHUNK)
            .enumerate()
            .try_for_each_init(
                || (Scratch::default(), Vec::new()),
                |(s, local), (c, block)| {
                    for (k, chunk) in block.chunks_mut(stride).enumerate() {
                        let i = c * CHUNK + k;
                        f(i, s, local, chunk).map_err(|e| (i, e))?;
                    }
                    Ok(())
                },
            );
        // Re-run serially so the reported failure is the first one.
        result.or_else(|_| serial(out))
    }

    fn gather(local: &mut Vec<f64>, x: &[f64], vars: &[usize]) {
        local.clear();
        local.extend(vars.iter().map(|&v| x[v]));
    }

    fn instance_values(&self, p: &CompiledPattern, x: &[f64]) -> Result<Vec<f64>, Fault> {
        let mut vals = vec![0.0; p.data.len()];
        self.for_instances(p.data.len(), 1, &mut vals, |i, s, local, out| {
            Self::gather(local, x, p.data.vars_of(i));
            out[0] = p.tape.value(local, p.data.params_of(i), s)?;
            Ok(())
        })?;
        Ok(vals)
    }

    /// Objective value. Instances are summed in registration order.
    pub fn objective(&self, x: &[f64]) -> Result<f64, ModelError> {
        self.check_len("x", x.len(), self.n)?;
        let mut f = 0.0;
        for (k, p) in self.objectives.iter().enumerate() {
            let vals = self.instance_values(p, x).map_err(|(record, fault)| ModelError::Eval {
                kind: PatternKind::Objective,
                pattern: k,
                record,
                fault,
            })?;
            for v in vals {
                f += v;
            }
        }
        Ok(f)
    }

    /// Dense objective gradient.
    pub fn gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<(), ModelError> {
        self.check_len("x", x.len(), self.n)?;
        self.check_len("gradient", grad.len(), self.n)?;
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (k, p) in self.objectives.iter().enumerate() {
            let stride = p.jac_stride();
            let mut buf = vec![0.0; p.data.len() * stride];
            self.for_instances(p.data.len(), stride, &mut buf, |i, s, local, out| {
                Self::gather(local, x, p.data.vars_of(i));
                p.tape.gradient(local, p.data.params_of(i), s, out).map(|_| ())
            })
            .map_err(|(record, fault)| ModelError::Eval { kind: PatternKind::Objective, pattern: k, record, fault })?;
            for i in 0..p.data.len() {
                let vars = p.data.vars_of(i);
                for (j, &slot) in p.tape.gradient_slots().iter().enumerate() {
                    grad[vars[slot]] += buf[i * stride + j];
                }
            }
        }
        Ok(())
    }

    /// Constraint values `c(x) = Σ contributions − rhs`.
    pub fn constraints(&self, x: &[f64], c: &mut [f64]) -> Result<(), ModelError> {
        self.check_len("x", x.len(), self.n)?;
        self.check_len("constraints", c.len(), self.num_constraints())?;
        c.iter_mut().for_each(|v| *v = 0.0);
        for (k, p) in self.constraints.iter().enumerate() {
            let vals = self.instance_values(p, x).map_err(|(record, fault)| ModelError::Eval {
                kind: PatternKind::Constraint,
                pattern: k,
                record,
                fault,
            })?;
            for (v, &row) in vals.iter().zip(&p.data.rows) {
                c[row] += v;
            }
        }
        for (ci, r) in c.iter_mut().zip(&self.rhs) {
            *ci -= r;
        }
        Ok(())
    }

    /// Jacobian values aligned with [`Model::jacobian_structure`].
    pub fn jacobian_values(&self, x: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        self.check_len("x", x.len(), self.n)?;
        self.check_len("jacobian values", out.len(), self.sparsity.jac_nnz())?;
        for (k, p) in self.constraints.iter().enumerate() {
            self.for_instances(p.data.len(), p.jac_stride(), &mut out[p.jac.clone()], |i, s, local, chunk| {
                Self::gather(local, x, p.data.vars_of(i));
                p.tape.gradient(local, p.data.params_of(i), s, chunk).map(|_| ())
            })
            .map_err(|(record, fault)| ModelError::Eval { kind: PatternKind::Constraint, pattern: k, record, fault })?;
        }
        Ok(())
    }

    /// Values of `obj_weight ∇²f + Σ_m y_m ∇²c_m`, aligned with
    /// [`Model::hessian_structure`].
    pub fn hessian_values(&self, x: &[f64], y: &[f64], obj_weight: f64, out: &mut [f64]) -> Result<(), ModelError> {
        self.check_len("x", x.len(), self.n)?;
        self.check_len("y", y.len(), self.num_constraints())?;
        self.check_len("hessian values", out.len(), self.sparsity.hess_nnz())?;
        for (k, p) in self.objectives.iter().enumerate() {
            self.for_instances(p.data.len(), p.hess_stride(), &mut out[p.hess.clone()], |i, s, local, chunk| {
                if obj_weight == 0.0 {
                    chunk.iter_mut().for_each(|v| *v = 0.0);
                    return Ok(());
                }
                Self::gather(local, x, p.data.vars_of(i));
                p.tape.hessian(local, p.data.params_of(i), obj_weight, s, chunk)
            })
            .map_err(|(record, fault)| ModelError::Eval { kind: PatternKind::Objective, pattern: k, record, fault })?;
        }
        for (k, p) in self.constraints.iter().enumerate() {
            self.for_instances(p.data.len(), p.hess_stride(), &mut out[p.hess.clone()], |i, s, local, chunk| {
                let w = y[p.data.rows[i]];
                if w == 0.0 {
                    chunk.iter_mut().for_each(|v| *v = 0.0);
                    return Ok(());
                }
                Self::gather(local, x, p.data.vars_of(i));
                p.tape.hessian(local, p.data.params_of(i), w, s, chunk)
            })
            .map_err(|(record, fault)| ModelError::Eval { kind: PatternKind::Constraint, pattern: k, record, fault })?;
        }
        Ok(())
    }

    /// Jacobian as a COO matrix (structure and values).
    pub fn jacobian_coo(&self, x: &[f64]) -> Result<CooMatrix, ModelError> {
        let mut values = vec![0.0; self.sparsity.jac_nnz()];
        self.jacobian_values(x, &mut values)?;
        Ok(CooMatrix {
            nrows: self.num_constraints(),
            ncols: self.n,
            rows: self.sparsity.jac_rows.clone(),
            cols: self.sparsity.jac_cols.clone(),
            values,
        })
    }

    /// Lower-triangle Hessian as a COO matrix.
    pub fn hessian_coo(&self, x: &[f64], y: &[f64], obj_weight: f64) -> Result<CooMatrix, ModelError> {
        let mut values = vec![0.0; self.sparsity.hess_nnz()];
        self.hessian_values(x, y, obj_weight, &mut values)?;
        Ok(CooMatrix {
            nrows: self.n,
            ncols: self.n,
            rows: self.sparsity.hess_rows.clone(),
            cols: self.sparsity.hess_cols.clone(),
            values,
        })
    }
}
