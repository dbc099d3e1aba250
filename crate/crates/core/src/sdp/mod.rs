//! Small dense semidefinite programming over complex Hermitian variables.
//!
//! Problems are stated as maximizations over block-diagonal variables made of
//! Hermitian PSD blocks and nonnegative scalars. Each Hermitian block is solved
//! through its real symmetric embedding `[[Re X, -Im X], [Im X, Re X]]`;
//! coefficient matrices are embedded with a factor 1/2 so that functionals
//! over the embedding equal the complex ones.

mod ipm;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{HermitianMatrix, C64};
use ipm::{BlockDim, BlockVal, IpmSettings, IpmStatus, Mat, StdProblem};

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITERS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    Hermitian(usize),
    /// A 1x1 block, i.e. a nonnegative real scalar.
    Scalar,
}

/// Coefficient of one block inside a linear functional.
#[derive(Clone, Debug)]
pub enum BlockCoeff {
    Dense(HermitianMatrix),
    /// Sparse Hermitian entries `(i, j, a_ij)`; the mirrored entry `conj(a_ij)`
    /// at `(j, i)` is implied. Diagonal entries must be real.
    Entries(Vec<(usize, usize, C64)>),
    Scalar(f64),
}

impl BlockCoeff {
    pub fn identity(n: usize) -> Self {
        BlockCoeff::Entries((0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect())
    }

    /// The selector `E_n` with a single one at `(n, n)`.
    pub fn diagonal_unit(n: usize) -> Self {
        BlockCoeff::Entries(vec![(n, n, C64::new(1.0, 0.0))])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub terms: Vec<(usize, BlockCoeff)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `max sum_k tr(C_k X_k)` subject to linear constraints, `X_k >= 0`.
#[derive(Clone, Debug, Default)]
pub struct SdpProblem {
    blocks: Vec<BlockKind>,
    objective: Vec<(usize, BlockCoeff)>,
    constraints: Vec<Constraint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    /// One matrix per block; scalar blocks come back as 1x1 matrices.
    pub blocks: Vec<HermitianMatrix>,
    pub objective_value: f64,
    /// Value of the dual problem, an upper bound on the optimum.
    pub dual_value: f64,
    /// `dual_value - objective_value`.
    pub duality_gap: f64,
    pub primal_residual: f64,
    pub status: SdpStatus,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct SdpOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_hermitian_block(&mut self, dim: usize) -> usize {
        self.blocks.push(BlockKind::Hermitian(dim));
        self.blocks.len() - 1
    }

    pub fn add_scalar_block(&mut self) -> usize {
        self.blocks.push(BlockKind::Scalar);
        self.blocks.len() - 1
    }

    pub fn set_objective(&mut self, terms: Vec<(usize, BlockCoeff)>) {
        self.objective = terms;
    }

    pub fn add_constraint(&mut self, terms: Vec<(usize, BlockCoeff)>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { terms, relation, rhs });
    }

    pub fn blocks(&self) -> &[BlockKind] {
        &self.blocks
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    fn validate(&self) -> Result<()> {
        if self.constraints.is_empty() {
            return Err(Error::InvalidInput("SDP needs at least one constraint".into()));
        }
        let check = |terms: &[(usize, BlockCoeff)]| -> Result<()> {
            for (k, coeff) in terms {
                let kind = self
                    .blocks
                    .get(*k)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown block {k}")))?;
                match (kind, coeff) {
                    (BlockKind::Hermitian(n), BlockCoeff::Dense(h)) if h.dim() == *n => {}
                    (BlockKind::Hermitian(n), BlockCoeff::Entries(e)) => {
                        for &(i, j, v) in e {
                            if i >= *n || j >= *n {
                                return Err(Error::InvalidInput("entry out of range".into()));
                            }
                            if i == j && v.im != 0.0 {
                                return Err(Error::InvalidInput("diagonal entry must be real".into()));
                            }
                            if !v.re.is_finite() || !v.im.is_finite() {
                                return Err(Error::InvalidInput("non-finite coefficient".into()));
                            }
                        }
                    }
                    (BlockKind::Scalar, BlockCoeff::Scalar(s)) if s.is_finite() => {}
                    _ => return Err(Error::InvalidInput(format!("coefficient does not match block {k}"))),
                }
            }
            Ok(())
        };
        check(&self.objective)?;
        for c in &self.constraints {
            check(&c.terms)?;
            if !c.rhs.is_finite() {
                return Err(Error::InvalidInput("non-finite right-hand side".into()));
            }
        }
        Ok(())
    }
}

/// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]`.
pub fn embed_complex(h: &HermitianMatrix) -> DMatrix<f64> {
    let n = h.dim();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i + n, j)] = z.im;
            out[(i, j + n)] = -z.im;
        }
    }
    out
}

/// Where each user block lives inside the real standard form.
#[derive(Clone, Copy)]
enum Slot {
    Psd { block: usize, dim: usize },
    Orthant { index: usize },
}

struct Assembly {
    std: StdProblem,
    slots: Vec<Slot>,
    orthant_block: Option<usize>,
    obj_scale: f64,
}

fn embed_coeff(coeff: &BlockCoeff, n: usize) -> Mat {
    match coeff {
        BlockCoeff::Dense(h) => Mat::Dense(embed_complex(h) * 0.5),
        BlockCoeff::Entries(entries) => {
            let mut acc: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
            let mut put = |r: usize, c: usize, v: f64| {
                if v != 0.0 {
                    *acc.entry((r, c)).or_insert(0.0) += 0.5 * v;
                }
            };
            for &(i, j, v) in entries {
                if i == j {
                    put(i, i, v.re);
                    put(i + n, i + n, v.re);
                } else {
                    for (a, b, z) in [(i, j, v), (j, i, v.conj())] {
                        put(a, b, z.re);
                        put(a + n, b + n, z.re);
                        put(a + n, b, z.im);
                        put(a, b + n, -z.im);
                    }
                }
            }
            Mat::Sparse(acc.into_iter().map(|((r, c), v)| (r, c, v)).collect())
        }
        BlockCoeff::Scalar(_) => unreachable!("scalar coefficient on Hermitian block"),
    }
}

fn assemble(p: &SdpProblem) -> Assembly {
    let mut blocks = Vec::new();
    let mut slots = Vec::with_capacity(p.blocks.len());
    let mut orthant_len = 0;
    for kind in &p.blocks {
        match *kind {
            BlockKind::Hermitian(dim) => {
                slots.push(Slot::Psd {
                    block: blocks.len(),
                    dim,
                });
                blocks.push(BlockDim::Psd(2 * dim));
            }
            BlockKind::Scalar => {
                slots.push(Slot::Orthant { index: orthant_len });
                orthant_len += 1;
            }
        }
    }
    let n_slack = p.constraints.iter().filter(|c| c.relation != Relation::Eq).count();
    let orthant_total = orthant_len + n_slack;
    let orthant_block = (orthant_total > 0).then(|| {
        blocks.push(BlockDim::Diag(orthant_total));
        blocks.len() - 1
    });

    // Lower a list of user terms to per-block real coefficients.
    let lower = |terms: &[(usize, BlockCoeff)]| -> Vec<(usize, Mat)> {
        let mut out: Vec<(usize, Mat)> = Vec::new();
        let mut orthant = DVector::zeros(orthant_total);
        let mut has_orthant = false;
        for (k, coeff) in terms {
            match (slots[*k], coeff) {
                (Slot::Psd { block, dim }, c) => out.push((block, embed_coeff(c, dim))),
                (Slot::Orthant { index }, BlockCoeff::Scalar(s)) => {
                    orthant[index] += *s;
                    has_orthant = true;
                }
                _ => unreachable!("validated"),
            }
        }
        if has_orthant {
            out.push((orthant_block.expect("orthant block exists"), Mat::Diag(orthant)));
        }
        out
    };

    let mut c_acc: Vec<Option<BlockVal>> = vec![None; blocks.len()];
    for (k, m) in lower(&p.objective) {
        let acc = c_acc[k].get_or_insert_with(|| BlockVal::zeros(blocks[k]));
        m.add_to(1.0, acc);
    }
    let mut c: Vec<Option<Mat>> = c_acc
        .into_iter()
        .map(|v| {
            v.map(|v| match v {
                BlockVal::Psd(m) => Mat::Dense(m),
                BlockVal::Diag(d) => Mat::Diag(d),
            })
        })
        .collect();

    let mut a = Vec::with_capacity(p.constraints.len());
    let mut b = DVector::zeros(p.constraints.len());
    let mut slack_index = orthant_len;
    for (i, con) in p.constraints.iter().enumerate() {
        let mut terms = lower(&con.terms);
        let sign = match con.relation {
            Relation::Eq => 0.0,
            Relation::Le => 1.0,
            Relation::Ge => -1.0,
        };
        if sign != 0.0 {
            let ob = orthant_block.expect("orthant block exists");
            if let Some((_, Mat::Diag(d))) = terms.iter_mut().find(|(k, _)| *k == ob) {
                d[slack_index] += sign;
            } else {
                let mut d = DVector::zeros(orthant_total);
                d[slack_index] = sign;
                terms.push((ob, Mat::Diag(d)));
            }
            slack_index += 1;
        }
        a.push(terms);
        b[i] = con.rhs;
    }

    // Row and objective normalization.
    for (i, terms) in a.iter_mut().enumerate() {
        let norm = terms.iter().map(|(_, m)| m.frob_sq()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, m) in terms.iter_mut() {
                m.scale(1.0 / norm);
            }
            b[i] /= norm;
        }
    }
    let c_norm = c.iter().flatten().map(|m| m.frob_sq()).sum::<f64>().sqrt();
    let obj_scale = if c_norm > 0.0 { c_norm } else { 1.0 };
    for m in c.iter_mut().flatten() {
        m.scale(-1.0 / obj_scale); // maximize <C,X>  ==  minimize <-C,X>
    }

    Assembly {
        std: StdProblem { blocks, c, a, b },
        slots,
        orthant_block,
        obj_scale,
    }
}

fn recover_hermitian(x: &DMatrix<f64>, n: usize) -> HermitianMatrix {
    let m = DMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (x[(i, j)] + x[(i + n, j + n)]);
        let im = 0.5 * (x[(i + n, j)] - x[(i, j + n)]);
        C64::new(re, im)
    });
    HermitianMatrix::symmetrized(m)
}

fn objective_of(p: &SdpProblem, blocks: &[HermitianMatrix]) -> f64 {
    p.objective
        .iter()
        .map(|(k, coeff)| functional(coeff, &blocks[*k]))
        .sum()
}

fn functional(coeff: &BlockCoeff, x: &HermitianMatrix) -> f64 {
    match coeff {
        BlockCoeff::Dense(h) => h.inner(x),
        BlockCoeff::Entries(e) => e
            .iter()
            .map(|&(i, j, v)| {
                if i == j {
                    v.re * x[(i, i)].re
                } else {
                    // a_ij x_ji + conj(a_ij) x_ij
                    2.0 * (v * x[(j, i)]).re
                }
            })
            .sum(),
        BlockCoeff::Scalar(s) => s * x[(0, 0)].re,
    }
}

/// Evaluates the left-hand side of constraint `c` at the given blocks.
pub fn constraint_value(c: &Constraint, blocks: &[HermitianMatrix]) -> f64 {
    c.terms.iter().map(|(k, coeff)| functional(coeff, &blocks[*k])).sum()
}

/// Solves `p` (a maximization) to relative duality gap `tol`.
pub fn solve_sdp(p: &SdpProblem, tol: f64) -> Result<SdpSolution> {
    solve_sdp_with(
        p,
        &SdpOptions {
            tol,
            ..SdpOptions::default()
        },
    )
}

pub fn solve_sdp_with(p: &SdpProblem, options: &SdpOptions) -> Result<SdpSolution> {
    p.validate()?;
    if !(options.tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let asm = assemble(p);
    let settings = IpmSettings {
        tol: options.tol,
        max_iters: options.max_iters,
        objective_scale: asm.obj_scale,
    };
    let res = ipm::solve(&asm.std, &settings);

    let mut blocks = Vec::with_capacity(p.blocks.len());
    for slot in &asm.slots {
        blocks.push(match *slot {
            Slot::Psd { block, dim } => match &res.x[block] {
                BlockVal::Psd(x) => recover_hermitian(x, dim),
                BlockVal::Diag(_) => unreachable!(),
            },
            Slot::Orthant { index } => {
                let ob = asm.orthant_block.expect("orthant block exists");
                match &res.x[ob] {
                    BlockVal::Diag(d) => HermitianMatrix::from_real_diagonal(&[d[index]]),
                    BlockVal::Psd(_) => unreachable!(),
                }
            }
        });
    }

    let objective_value = objective_of(p, &blocks);
    // Dual of the internal minimization, mapped back to the maximization's units.
    let dual_value = -res.dual_obj * asm.obj_scale;
    let status = match res.status {
        IpmStatus::Optimal => SdpStatus::Optimal,
        IpmStatus::Infeasible => SdpStatus::Infeasible,
        IpmStatus::NumericalFailure => SdpStatus::NumericalFailure,
    };
    Ok(SdpSolution {
        blocks,
        objective_value,
        dual_value,
        duality_gap: dual_value - objective_value,
        primal_residual: res.primal_residual,
        status,
        iterations: res.iterations,
    })
}
