//! Real standard-form primal-dual interior-point method.
//!
//! Solves `min <C, X>  s.t.  <A_i, X> = b_i,  X >= 0` over a block-diagonal
//! variable made of symmetric PSD blocks and one nonnegative orthant block,
//! with the HKM search direction and Mehrotra predictor-corrector steps from an
//! infeasible start.

use log::debug;
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum BlockDim {
    Psd(usize),
    Diag(usize),
}

impl BlockDim {
    fn barrier_degree(self) -> usize {
        match self {
            BlockDim::Psd(n) | BlockDim::Diag(n) => n,
        }
    }
}

/// Coefficient matrix of one block in a linear functional.
#[derive(Clone, Debug)]
pub(crate) enum Mat {
    /// Symmetric dense matrix (PSD blocks).
    Dense(DMatrix<f64>),
    /// Symmetric sparse matrix listed with both triangles: `(row, col, value)`.
    Sparse(Vec<(usize, usize, f64)>),
    /// Coefficient vector of an orthant block.
    Diag(DVector<f64>),
}

impl Mat {
    pub(crate) fn frob_sq(&self) -> f64 {
        match self {
            Mat::Dense(m) => m.norm_squared(),
            Mat::Sparse(e) => e.iter().map(|&(_, _, v)| v * v).sum(),
            Mat::Diag(d) => d.norm_squared(),
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        match self {
            Mat::Dense(m) => *m *= s,
            Mat::Sparse(e) => e.iter_mut().for_each(|t| t.2 *= s),
            Mat::Diag(d) => *d *= s,
        }
    }

    /// `tr(self * g)` for a possibly non-symmetric `g`.
    fn trace_with(&self, g: &BlockVal) -> f64 {
        match (self, g) {
            (Mat::Dense(a), BlockVal::Psd(g)) => a.component_mul(&g.transpose()).sum(),
            (Mat::Sparse(e), BlockVal::Psd(g)) => e.iter().map(|&(r, c, v)| v * g[(c, r)]).sum(),
            (Mat::Diag(a), BlockVal::Diag(g)) => a.dot(g),
            _ => unreachable!("block kind mismatch"),
        }
    }

    pub(crate) fn add_to(&self, s: f64, out: &mut BlockVal) {
        match (self, out) {
            (Mat::Dense(a), BlockVal::Psd(o)) => *o += a * s,
            (Mat::Sparse(e), BlockVal::Psd(o)) => {
                for &(r, c, v) in e {
                    o[(r, c)] += s * v;
                }
            }
            (Mat::Diag(a), BlockVal::Diag(o)) => *o += a * s,
            _ => unreachable!("block kind mismatch"),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum BlockVal {
    Psd(DMatrix<f64>),
    Diag(DVector<f64>),
}

impl BlockVal {
    pub(crate) fn zeros(dim: BlockDim) -> Self {
        match dim {
            BlockDim::Psd(n) => BlockVal::Psd(DMatrix::zeros(n, n)),
            BlockDim::Diag(n) => BlockVal::Diag(DVector::zeros(n)),
        }
    }

    fn scaled_identity(dim: BlockDim, s: f64) -> Self {
        match dim {
            BlockDim::Psd(n) => BlockVal::Psd(DMatrix::identity(n, n) * s),
            BlockDim::Diag(n) => BlockVal::Diag(DVector::from_element(n, s)),
        }
    }

    fn inner(&self, other: &BlockVal) -> f64 {
        match (self, other) {
            (BlockVal::Psd(a), BlockVal::Psd(b)) => a.dot(b),
            (BlockVal::Diag(a), BlockVal::Diag(b)) => a.dot(b),
            _ => unreachable!("block kind mismatch"),
        }
    }

    fn norm_sq(&self) -> f64 {
        match self {
            BlockVal::Psd(a) => a.norm_squared(),
            BlockVal::Diag(a) => a.norm_squared(),
        }
    }

    fn axpy(&mut self, s: f64, other: &BlockVal) {
        match (self, other) {
            (BlockVal::Psd(a), BlockVal::Psd(b)) => *a += b * s,
            (BlockVal::Diag(a), BlockVal::Diag(b)) => *a += b * s,
            _ => unreachable!("block kind mismatch"),
        }
    }

    fn sub(&self, other: &BlockVal) -> BlockVal {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}

#[derive(Clone, Debug)]
pub(crate) struct StdProblem {
    pub blocks: Vec<BlockDim>,
    pub c: Vec<Option<Mat>>,
    pub a: Vec<Vec<(usize, Mat)>>,
    pub b: DVector<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub(crate) struct IpmResult {
    pub x: Vec<BlockVal>,
    pub dual_obj: f64,
    pub primal_residual: f64,
    pub status: IpmStatus,
    pub iterations: usize,
}

const STEP_FRACTION_MIN: f64 = 0.9;

impl StdProblem {
    fn apply_a(&self, blocks: &[BlockVal]) -> DVector<f64> {
        DVector::from_iterator(
            self.a.len(),
            self.a
                .iter()
                .map(|terms| terms.iter().map(|(k, m)| m.trace_with(&blocks[*k])).sum()),
        )
    }

    fn apply_at(&self, y: &DVector<f64>) -> Vec<BlockVal> {
        let mut out: Vec<BlockVal> = self.blocks.iter().map(|&d| BlockVal::zeros(d)).collect();
        for (i, terms) in self.a.iter().enumerate() {
            for (k, m) in terms {
                m.add_to(y[i], &mut out[*k]);
            }
        }
        out
    }

    fn c_blocks(&self) -> Vec<BlockVal> {
        self.blocks
            .iter()
            .zip(&self.c)
            .map(|(&d, c)| {
                let mut v = BlockVal::zeros(d);
                if let Some(m) = c {
                    m.add_to(1.0, &mut v);
                }
                v
            })
            .collect()
    }

    /// Schur complement `M_ij = sum_k tr(A_ik X_k A_jk Z_k^{-1})`.
    fn schur(&self, x: &[BlockVal], zinv: &[BlockVal]) -> DMatrix<f64> {
        let m = self.a.len();
        let mut schur = DMatrix::zeros(m, m);
        for (k, &dim) in self.blocks.iter().enumerate() {
            // (constraint index, coefficient) pairs touching block k
            let terms: Vec<(usize, &Mat)> = self
                .a
                .iter()
                .enumerate()
                .flat_map(|(i, t)| t.iter().filter(|(b, _)| *b == k).map(move |(_, mat)| (i, mat)))
                .collect();
            match (dim, &x[k], &zinv[k]) {
                (BlockDim::Diag(_), BlockVal::Diag(xv), BlockVal::Diag(zi)) => {
                    let w = xv.component_mul(zi);
                    for (p, &(i, ai)) in terms.iter().enumerate() {
                        let Mat::Diag(ai) = ai else { unreachable!() };
                        let wa = ai.component_mul(&w);
                        for &(j, aj) in &terms[p..] {
                            let Mat::Diag(aj) = aj else { unreachable!() };
                            let val = wa.dot(aj);
                            schur[(i, j)] += val;
                            if i != j {
                                schur[(j, i)] += val;
                            }
                        }
                    }
                }
                (BlockDim::Psd(_), BlockVal::Psd(xm), BlockVal::Psd(zi)) => {
                    for (q, &(j, aj)) in terms.iter().enumerate() {
                        if let Mat::Dense(ajm) = aj {
                            let g = BlockVal::Psd(xm * ajm * zi);
                            for (p, &(i, ai)) in terms.iter().enumerate() {
                                let dense_i = matches!(ai, Mat::Dense(_));
                                if dense_i && p > q {
                                    continue;
                                }
                                let val = ai.trace_with(&g);
                                schur[(i, j)] += val;
                                if p != q {
                                    schur[(j, i)] += val;
                                }
                            }
                        }
                    }
                    for (p, &(i, ai)) in terms.iter().enumerate() {
                        let Mat::Sparse(ei) = ai else { continue };
                        for &(j, aj) in &terms[p..] {
                            let Mat::Sparse(ej) = aj else { continue };
                            let mut val = 0.0;
                            for &(a, b, v) in ei {
                                for &(c, d, w) in ej {
                                    val += v * w * xm[(b, c)] * zi[(d, a)];
                                }
                            }
                            schur[(i, j)] += val;
                            if i != j {
                                schur[(j, i)] += val;
                            }
                        }
                    }
                }
                _ => unreachable!("block kind mismatch"),
            }
        }
        schur
    }
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn inverse_block(v: &BlockVal) -> Option<BlockVal> {
    match v {
        BlockVal::Psd(m) => {
            let chol = Cholesky::new(m.clone())?;
            Some(BlockVal::Psd(sym(chol.inverse())))
        }
        BlockVal::Diag(d) => {
            if d.iter().any(|&x| x <= 0.0) {
                return None;
            }
            Some(BlockVal::Diag(d.map(|x| 1.0 / x)))
        }
    }
}

/// Largest `alpha` such that `v + alpha * dv` stays in the cone.
fn max_step(v: &BlockVal, dv: &BlockVal) -> f64 {
    match (v, dv) {
        (BlockVal::Psd(m), BlockVal::Psd(dm)) => {
            let Some(chol) = Cholesky::new(m.clone()) else {
                return 0.0;
            };
            let l = chol.l();
            let Some(linv) = l.clone().try_inverse() else {
                return 0.0;
            };
            let s = sym(&linv * dm * linv.transpose());
            let min = SymmetricEigen::new(s).eigenvalues.min();
            if min >= 0.0 {
                f64::INFINITY
            } else {
                -1.0 / min
            }
        }
        (BlockVal::Diag(d), BlockVal::Diag(dd)) => d
            .iter()
            .zip(dd.iter())
            .filter(|(_, &s)| s < 0.0)
            .map(|(&x, &s)| -x / s)
            .fold(f64::INFINITY, f64::min),
        _ => unreachable!("block kind mismatch"),
    }
}

type LinearSolve = Box<dyn Fn(&DVector<f64>) -> DVector<f64>>;

fn solve_schur(schur: &DMatrix<f64>) -> Option<LinearSolve> {
    if let Some(chol) = Cholesky::new(schur.clone()) {
        return Some(Box::new(move |r| chol.solve(r)));
    }
    let reg = 1e-14 * schur.diagonal().amax().max(1e-300);
    let shifted = schur + DMatrix::identity(schur.nrows(), schur.ncols()) * reg;
    if let Some(chol) = Cholesky::new(shifted) {
        return Some(Box::new(move |r| chol.solve(r)));
    }
    let lu = schur.clone().lu();
    if lu.is_invertible() {
        return Some(Box::new(move |r| lu.solve(r).unwrap_or_else(|| r.clone())));
    }
    None
}

pub(crate) struct IpmSettings {
    pub tol: f64,
    pub max_iters: usize,
    /// Objective scale: the reported gap must also satisfy
    /// `scale * gap <= tol * (1 + scale * |obj|)` in the caller's units.
    pub objective_scale: f64,
}

pub(crate) fn solve(p: &StdProblem, settings: &IpmSettings) -> IpmResult {
    let m = p.a.len();
    let n_total: usize = p.blocks.iter().map(|d| d.barrier_degree()).sum();
    let c = p.c_blocks();
    let norm_c = c.iter().map(BlockVal::norm_sq).sum::<f64>().sqrt();
    let norm_b = p.b.norm();

    // Initial point scaled to the data.
    let mut xi: f64 = 10.0;
    let mut eta: f64 = 10.0;
    for (i, terms) in p.a.iter().enumerate() {
        let na = terms.iter().map(|(_, m)| m.frob_sq()).sum::<f64>().sqrt();
        xi = xi.max((n_total as f64) * (1.0 + p.b[i].abs()) / (1.0 + na));
        eta = eta.max(na);
    }
    xi = xi.max((n_total as f64).sqrt());
    eta = eta.max(norm_c).max((n_total as f64).sqrt());

    let mut x: Vec<BlockVal> = p.blocks.iter().map(|&d| BlockVal::scaled_identity(d, xi)).collect();
    let mut z: Vec<BlockVal> = p.blocks.iter().map(|&d| BlockVal::scaled_identity(d, eta)).collect();
    let mut y = DVector::zeros(m);

    let mut result_status = IpmStatus::NumericalFailure;
    let mut iterations = 0;

    for iter in 0..settings.max_iters {
        iterations = iter;
        let ax = p.apply_a(&x);
        let rp = &p.b - &ax;
        let aty = p.apply_at(&y);
        // Rd = C - A^T y - Z
        let rd: Vec<BlockVal> = (0..p.blocks.len()).map(|k| c[k].sub(&aty[k]).sub(&z[k])).collect();
        let pobj: f64 = c.iter().zip(&x).map(|(ck, xk)| ck.inner(xk)).sum();
        let dobj = p.b.dot(&y);
        let xz: f64 = x.iter().zip(&z).map(|(a, b)| a.inner(b)).sum();
        let mu = xz / n_total as f64;

        let pres = rp.norm() / (1.0 + norm_b);
        let dres = rd.iter().map(BlockVal::norm_sq).sum::<f64>().sqrt() / (1.0 + norm_c);
        let gap = (pobj - dobj).abs();
        let rel_gap = gap / (1.0 + pobj.abs() + dobj.abs());
        let s = settings.objective_scale;
        debug!(
            "ipm iter {iter:3}: pobj {pobj:+.10e} dobj {dobj:+.10e} relgap {rel_gap:.2e} pres {pres:.2e} dres {dres:.2e} mu {mu:.2e}"
        );

        let feas_tol = 0.1 * settings.tol;
        if rel_gap <= settings.tol
            && s * gap <= settings.tol * (1.0 + s * pobj.abs())
            && pres <= feas_tol
            && dres <= feas_tol
        {
            result_status = IpmStatus::Optimal;
            break;
        }

        // Primal infeasibility certificate: b^T y > 0 with -A^T y >= 0 (approximately).
        if dobj > 0.0 && dobj > 1e8 * (1.0 + norm_c) && dres <= 1e-3 {
            let scaled: Vec<BlockVal> = aty
                .iter()
                .map(|blk| {
                    let mut v = blk.clone();
                    match &mut v {
                        BlockVal::Psd(mm) => *mm *= -1.0 / dobj,
                        BlockVal::Diag(d) => *d *= -1.0 / dobj,
                    }
                    v
                })
                .collect();
            let min_eig = scaled
                .iter()
                .map(|blk| match blk {
                    BlockVal::Psd(mm) => SymmetricEigen::new(mm.clone()).eigenvalues.min(),
                    BlockVal::Diag(d) => d.min(),
                })
                .fold(f64::INFINITY, f64::min);
            if min_eig >= -1e-6 {
                result_status = IpmStatus::Infeasible;
                break;
            }
        }

        let Some(zinv) = z.iter().map(inverse_block).collect::<Option<Vec<_>>>() else {
            break;
        };
        let schur = p.schur(&x, &zinv);
        let Some(solve_m) = solve_schur(&schur) else {
            break;
        };

        // A(X Rd Z^{-1}) is common to predictor and corrector.
        let x_rd_zinv: Vec<BlockVal> = (0..p.blocks.len())
            .map(|k| match (&x[k], &rd[k], &zinv[k]) {
                (BlockVal::Psd(xm), BlockVal::Psd(r), BlockVal::Psd(zi)) => BlockVal::Psd(xm * r * zi),
                (BlockVal::Diag(xm), BlockVal::Diag(r), BlockVal::Diag(zi)) => {
                    BlockVal::Diag(xm.component_mul(r).component_mul(zi))
                }
                _ => unreachable!(),
            })
            .collect();
        let a_x_rd_zinv = p.apply_a(&x_rd_zinv);

        // Direction for target sigma*mu with optional second-order term dXp dZp.
        let direction = |sigma_mu: f64, corr: Option<&(Vec<BlockVal>, Vec<BlockVal>)>| {
            // R = sigma*mu*Z^{-1} - X - dXp dZp Z^{-1}
            let rc: Vec<BlockVal> = (0..p.blocks.len())
                .map(|k| {
                    let mut r = zinv[k].clone();
                    match &mut r {
                        BlockVal::Psd(mm) => *mm *= sigma_mu,
                        BlockVal::Diag(d) => *d *= sigma_mu,
                    }
                    r.axpy(-1.0, &x[k]);
                    if let Some((dxp, dzp)) = corr {
                        match (&mut r, &dxp[k], &dzp[k], &zinv[k]) {
                            (BlockVal::Psd(rm), BlockVal::Psd(a), BlockVal::Psd(b), BlockVal::Psd(zi)) => {
                                *rm -= a * b * zi;
                            }
                            (BlockVal::Diag(rm), BlockVal::Diag(a), BlockVal::Diag(b), BlockVal::Diag(zi)) => {
                                *rm -= a.component_mul(b).component_mul(zi);
                            }
                            _ => unreachable!(),
                        }
                    }
                    r
                })
                .collect();
            let rhs = &rp - p.apply_a(&rc) + &a_x_rd_zinv;
            let dy = solve_m(&rhs);
            let atdy = p.apply_at(&dy);
            let dz: Vec<BlockVal> = (0..p.blocks.len()).map(|k| rd[k].sub(&atdy[k])).collect();
            let dx: Vec<BlockVal> = (0..p.blocks.len())
                .map(|k| match (&rc[k], &x[k], &dz[k], &zinv[k]) {
                    (BlockVal::Psd(r), BlockVal::Psd(xm), BlockVal::Psd(dzm), BlockVal::Psd(zi)) => {
                        BlockVal::Psd(sym(r - xm * dzm * zi))
                    }
                    (BlockVal::Diag(r), BlockVal::Diag(xm), BlockVal::Diag(dzm), BlockVal::Diag(zi)) => {
                        BlockVal::Diag(r - xm.component_mul(dzm).component_mul(zi))
                    }
                    _ => unreachable!(),
                })
                .collect();
            (dx, dy, dz)
        };

        let step_lengths = |dx: &[BlockVal], dz: &[BlockVal]| {
            let ap = x
                .iter()
                .zip(dx)
                .map(|(v, d)| max_step(v, d))
                .fold(f64::INFINITY, f64::min);
            let ad = z
                .iter()
                .zip(dz)
                .map(|(v, d)| max_step(v, d))
                .fold(f64::INFINITY, f64::min);
            (ap, ad)
        };

        // Predictor.
        let (dxp, _dyp, dzp) = direction(0.0, None);
        let (ap_max, ad_max) = step_lengths(&dxp, &dzp);
        let ap = ap_max.min(1.0);
        let ad = ad_max.min(1.0);
        let mut xz_aff = 0.0;
        for k in 0..p.blocks.len() {
            let mut xa = x[k].clone();
            xa.axpy(ap, &dxp[k]);
            let mut za = z[k].clone();
            za.axpy(ad, &dzp[k]);
            xz_aff += xa.inner(&za);
        }
        let mu_aff = xz_aff / n_total as f64;
        let mut sigma = (mu_aff / mu).max(0.0).powi(3);
        if !sigma.is_finite() {
            sigma = 0.5;
        }
        sigma = sigma.min(1.0);

        // Corrector.
        let corr = (dxp, dzp);
        let (dx, dy, dz) = direction(sigma * mu, Some(&corr));
        let (ap_max, ad_max) = step_lengths(&dx, &dz);
        let gamma = STEP_FRACTION_MIN + 0.09 * ap_max.min(ad_max).min(1.0);
        let ap = (gamma * ap_max).min(1.0);
        let ad = (gamma * ad_max).min(1.0);
        if !(ap.is_finite() && ad.is_finite()) || (ap < 1e-12 && ad < 1e-12) {
            break;
        }
        for k in 0..p.blocks.len() {
            x[k].axpy(ap, &dx[k]);
            z[k].axpy(ad, &dz[k]);
        }
        y += dy * ad;
        iterations = iter + 1;
    }

    let ax = p.apply_a(&x);
    let primal_residual = (&p.b - &ax).norm() / (1.0 + norm_b);
    let dual_obj = p.b.dot(&y);
    IpmResult {
        x,
        dual_obj,
        primal_residual,
        status: result_status,
        iterations,
    }
}
