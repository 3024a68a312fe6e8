use serde::{Deserialize, Serialize};

use crate::error::{ConicError, Result};
use crate::expr::{svec_len, LinExpr, ScalarVar, SymMatrixVar, VectorVar};

/// Shape of a named variable block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "dim", rename_all = "snake_case")]
pub enum BlockKind {
    Scalar,
    Vector(usize),
    /// Symmetric `n x n`, stored as `n(n+1)/2` svec entries.
    SymMatrix(usize),
}

impl BlockKind {
    pub fn width(&self) -> usize {
        match *self {
            BlockKind::Scalar => 1,
            BlockKind::Vector(n) => n,
            BlockKind::SymMatrix(n) => svec_len(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub kind: BlockKind,
    pub start: usize,
}

/// Order `q` of a dual-norm cap `||x||_q <= s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormOrder {
    L1,
    L2,
    Linf,
}

impl NormOrder {
    /// Hoelder conjugate: 1 <-> inf, 2 <-> 2.
    pub fn dual(self) -> NormOrder {
        match self {
            NormOrder::L1 => NormOrder::Linf,
            NormOrder::L2 => NormOrder::L2,
            NormOrder::Linf => NormOrder::L1,
        }
    }

    pub fn norm(self, x: &[f64]) -> f64 {
        match self {
            NormOrder::L1 => x.iter().map(|v| v.abs()).sum(),
            NormOrder::L2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            NormOrder::Linf => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

impl std::fmt::Display for NormOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormOrder::L1 => "1",
            NormOrder::L2 => "2",
            NormOrder::Linf => "inf",
        })
    }
}

impl std::str::FromStr for NormOrder {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "l1" => Ok(NormOrder::L1),
            "2" | "l2" => Ok(NormOrder::L2),
            "inf" | "linf" | "infinity" => Ok(NormOrder::Linf),
            other => Err(format!("unsupported norm order `{other}` (expected 1, 2 or inf)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConstraintKind {
    /// `expr == 0`
    Equality { expr: LinExpr },
    /// `expr >= 0`
    Inequality { expr: LinExpr },
    /// `||args||_2 <= bound`
    SecondOrder { bound: LinExpr, args: Vec<LinExpr> },
    /// `||args||_q <= bound`; q = 2 compiles to a second-order cone, q = 1
    /// and q = inf to linear systems.
    NormCap { order: NormOrder, bound: LinExpr, args: Vec<LinExpr> },
    /// Symmetric matrix expression `M >= 0`, given by its column-major upper
    /// triangle (`M_ij` for `i <= j`, at `j(j+1)/2 + i`).
    Psd { dim: usize, upper: Vec<LinExpr> },
}

impl ConstraintKind {
    pub fn class_name(&self) -> &'static str {
        match self {
            ConstraintKind::Equality { .. } => "equality",
            ConstraintKind::Inequality { .. } => "inequality",
            ConstraintKind::SecondOrder { .. } => "second_order",
            ConstraintKind::NormCap { .. } => "norm_cap",
            ConstraintKind::Psd { .. } => "psd",
        }
    }

    fn exprs(&self) -> Box<dyn Iterator<Item = &LinExpr> + '_> {
        match self {
            ConstraintKind::Equality { expr } | ConstraintKind::Inequality { expr } => Box::new(std::iter::once(expr)),
            ConstraintKind::SecondOrder { bound, args } | ConstraintKind::NormCap { bound, args, .. } => {
                Box::new(std::iter::once(bound).chain(args.iter()))
            }
            ConstraintKind::Psd { upper, .. } => Box::new(upper.iter()),
        }
    }
}

/// A constraint plus the provenance label naming the model row it encodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub label: String,
    #[serde(flatten)]
    pub kind: ConstraintKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConstraintId(pub usize);

/// Dense grid of affine expressions, used to assemble LMIs.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixExpr {
    rows: usize,
    cols: usize,
    data: Vec<LinExpr>,
}

impl MatrixExpr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![LinExpr::zero(); rows * cols] }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> &LinExpr {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: LinExpr) {
        self.data[i * self.cols + j] = e;
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set_sym(&mut self, i: usize, j: usize, e: LinExpr) {
        self.set(j, i, e.clone());
        self.set(i, j, e);
    }

    /// `[[X, off], [off^T, corner]]` for a symmetric matrix variable `X`.
    pub fn bordered(top_left: &SymMatrixVar, off: &[LinExpr], corner: LinExpr) -> Self {
        let n = top_left.n;
        assert_eq!(off.len(), n, "bordered: off-diagonal length mismatch");
        let mut m = MatrixExpr::zeros(n + 1, n + 1);
        for j in 0..n {
            for i in 0..=j {
                m.set_sym(i, j, top_left.entry(i, j));
            }
            m.set_sym(j, n, off[j].clone());
        }
        m.set(n, n, corner);
        m
    }
}

/// Conic program: minimize a linear objective over named variable blocks
/// subject to linear, second-order-cone, norm-cap and PSD constraints.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub blocks: Vec<Block>,
    pub num_vars: usize,
    pub objective: LinExpr,
    pub constraints: Vec<Constraint>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    fn push_block(&mut self, name: &str, kind: BlockKind) -> usize {
        assert!(self.blocks.iter().all(|b| b.name != name), "duplicate block name `{name}`");
        let start = self.num_vars;
        self.blocks.push(Block { name: name.to_string(), kind, start });
        self.num_vars += kind.width();
        start
    }

    pub fn add_scalar(&mut self, name: &str) -> ScalarVar {
        ScalarVar { index: self.push_block(name, BlockKind::Scalar) }
    }

    /// Scalar variable with an attached `x >= 0` constraint.
    pub fn add_nonneg_scalar(&mut self, name: &str) -> ScalarVar {
        let v = self.add_scalar(name);
        self.add_ge(&format!("{name} >= 0"), v.expr());
        v
    }

    pub fn add_vector(&mut self, name: &str, len: usize) -> VectorVar {
        VectorVar { start: self.push_block(name, BlockKind::Vector(len)), len }
    }

    pub fn add_sym_matrix(&mut self, name: &str, n: usize) -> SymMatrixVar {
        SymMatrixVar { start: self.push_block(name, BlockKind::SymMatrix(n)), n }
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn minimize(&mut self, objective: LinExpr) {
        self.check_expr(&objective);
        self.objective = objective;
    }

    fn check_expr(&self, e: &LinExpr) {
        if let Some(v) = e.max_var() {
            assert!(v < self.num_vars, "expression references undeclared variable {v}");
        }
    }

    fn push(&mut self, label: &str, kind: ConstraintKind) -> ConstraintId {
        for e in kind.exprs() {
            self.check_expr(e);
        }
        self.constraints.push(Constraint { label: label.to_string(), kind });
        ConstraintId(self.constraints.len() - 1)
    }

    /// `expr == 0`
    pub fn add_eq(&mut self, label: &str, expr: LinExpr) -> ConstraintId {
        self.push(label, ConstraintKind::Equality { expr })
    }

    /// `expr >= 0`
    pub fn add_ge(&mut self, label: &str, expr: LinExpr) -> ConstraintId {
        self.push(label, ConstraintKind::Inequality { expr })
    }

    /// `lhs <= rhs`
    pub fn add_le(&mut self, label: &str, lhs: LinExpr, rhs: LinExpr) -> ConstraintId {
        self.add_ge(label, rhs - lhs)
    }

    /// `||args||_2 <= bound`
    pub fn add_soc(&mut self, label: &str, bound: LinExpr, args: Vec<LinExpr>) -> ConstraintId {
        self.push(label, ConstraintKind::SecondOrder { bound, args })
    }

    /// `||args||_order <= bound`
    pub fn add_norm_cap(&mut self, label: &str, order: NormOrder, args: Vec<LinExpr>, bound: LinExpr) -> ConstraintId {
        self.push(label, ConstraintKind::NormCap { order, bound, args })
    }

    /// Registers `m >= 0`. Only the upper triangle of `m` is read, so the
    /// registered block is symmetric by construction.
    pub fn add_psd_block(&mut self, label: &str, m: &MatrixExpr) -> Result<ConstraintId> {
        let (rows, cols) = m.shape();
        if rows != cols {
            return Err(ConicError::Shape(format!("PSD block `{label}` must be square, got {rows}x{cols}")));
        }
        if rows == 0 {
            return Err(ConicError::Shape(format!("PSD block `{label}` is empty")));
        }
        let mut upper = Vec::with_capacity(svec_len(rows));
        for j in 0..rows {
            for i in 0..=j {
                upper.push(m.get(i, j).clone());
            }
        }
        Ok(self.push(label, ConstraintKind::Psd { dim: rows, upper }))
    }

    /// `X >= 0` for a matrix variable.
    pub fn add_psd_var(&mut self, label: &str, x: &SymMatrixVar) -> ConstraintId {
        let mut upper = Vec::with_capacity(x.svec_len());
        for j in 0..x.n {
            for i in 0..=j {
                upper.push(x.entry(i, j));
            }
        }
        self.push(label, ConstraintKind::Psd { dim: x.n, upper })
    }

    pub fn constraint(&self, id: ConstraintId) -> &Constraint {
        &self.constraints[id.0]
    }

    /// Sum of PSD block orders.
    pub fn total_psd_dim(&self) -> usize {
        self.constraints
            .iter()
            .map(|c| match c.kind {
                ConstraintKind::Psd { dim, .. } => dim,
                _ => 0,
            })
            .sum()
    }

    /// JSON dump listing blocks, objective and every constraint with its
    /// sparse `(variable, coefficient)` terms.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| ConicError::Shape(format!("bad program JSON: {e}")))
    }
}
