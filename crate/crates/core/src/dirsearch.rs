//! Batch optimal-direction search.
//!
//! For a projected data matrix `X` (r x M₂ with columns xᵢ) this finds a
//! direction matrix `A` whose column aᵢ minimizes the spread of aᵢ over the
//! other points, `‖Xᵀaᵢ‖`, subject to `aᵢᵀxᵢ = 1`. The sparse variant also
//! asks that `A = XZ` with `Z` entrywise sparse. Both are solved by one ADMM
//! loop over the split
//!
//! ```text
//! min ‖T‖ + γ‖Z‖₁   s.t.  A = XU,  diag(AᵀX) = 1,  T = XᵀA,  U = Z
//! ```
//!
//! with multipliers Y1, y2, Y3, Y4 for the four constraints. `γ = 0` gives
//! the plain program with the same code path.

use faer::prelude::ReborrowMut;
use faer::{Accum, Mat, MatMut, MatRef};

use crate::error::{Error, Result};
use crate::numkernel::{
    make_spd_solver, mat_mul, mat_mul_into, DenseMatrix, SolveSide, SpdSolveOperator,
};

/// `sgn(c) · max(|c| − eps, 0)`.
#[inline]
pub fn soft_threshold(c: f64, eps: f64) -> f64 {
    c - c.clamp(-eps, eps)
}

/// Shrinks each column toward zero by `eps` in Euclidean norm; columns with
/// norm `≤ eps` become zero.
pub fn column_shrink(c: &DenseMatrix, eps: f64) -> DenseMatrix {
    let mut out = c.as_mat().clone();
    for j in 0..out.ncols() {
        let col = out.col_as_slice_mut(j);
        let scale = shrink_factor(col.iter().map(|v| v * v).sum::<f64>().sqrt(), eps);
        col.iter_mut().for_each(|v| *v *= scale);
    }
    DenseMatrix::from_mat_unchecked(out)
}

#[inline]
fn shrink_factor(norm: f64, eps: f64) -> f64 {
    if norm <= eps {
        0.0
    } else {
        1.0 - eps / norm
    }
}

/// Norm applied to the responses `XᵀA`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResponseNorm {
    /// Sum of absolute entries (p = 1).
    L1,
    /// Sum of column Euclidean norms (p = 2).
    L2,
}

impl ResponseNorm {
    pub fn from_p(p: u8) -> Result<Self> {
        match p {
            1 => Ok(ResponseNorm::L1),
            2 => Ok(ResponseNorm::L2),
            _ => Err(Error::invalid(format!("p must be 1 or 2, got {p}"))),
        }
    }

    pub fn p(self) -> u8 {
        match self {
            ResponseNorm::L1 => 1,
            ResponseNorm::L2 => 2,
        }
    }
}

/// How the direction block is solved each iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AUpdateMode {
    /// One shared operator `μ⁻¹(I + 2XXᵀ)⁻¹` for every column.
    Paper,
    /// Per-column minimizer of the direction subproblem, `(I + XXᵀ + xᵢxᵢᵀ)aᵢ = rhsᵢ/μ`.
    Exact,
}

impl std::str::FromStr for AUpdateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paper" => Ok(AUpdateMode::Paper),
            "exact" => Ok(AUpdateMode::Exact),
            other => Err(Error::invalid(format!(
                "unknown A-update mode `{other}` (expected paper or exact)"
            ))),
        }
    }
}

impl std::fmt::Display for AUpdateMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AUpdateMode::Paper => "paper",
            AUpdateMode::Exact => "exact",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdmmConfig {
    pub norm: ResponseNorm,
    /// Augmented-Lagrangian penalty.
    pub mu: f64,
    /// Weight of the entrywise sparsity term on `Z`.
    pub gamma: f64,
    pub max_iters: usize,
    /// Stop once every constraint violation (max-norm) is at most this.
    pub tol: f64,
    pub a_update: AUpdateMode,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            norm: ResponseNorm::L2,
            mu: 3.3,
            gamma: 0.01,
            max_iters: 300,
            tol: 1e-5,
            a_update: AUpdateMode::Paper,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!(
                "mu must be positive and finite, got {}",
                self.mu
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!(
                "gamma must be non-negative, got {}",
                self.gamma
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Max-norm violation of each constraint.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    /// `A − XU`
    pub direction: f64,
    /// `diag(AᵀX) − 1`
    pub feasibility: f64,
    /// `T − XᵀA`
    pub response: f64,
    /// `Z − U`
    pub split: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.direction
            .max(self.feasibility)
            .max(self.response)
            .max(self.split)
    }
}

/// Factorizations shared by all iterations of one solve.
pub struct AdmmOperators {
    mu: f64,
    /// `μ⁻¹(I + XXᵀ)⁻¹`; its unscaled inner solve also drives the `U` update.
    base: SpdSolveOperator,
    /// `XXᵀ`
    cov: Mat<f64>,
    direction: DirectionSolve,
}

enum DirectionSolve {
    Paper(SpdSolveOperator),
    /// Sherman–Morrison data for each column: `K xᵢ` and `1 + xᵢᵀK xᵢ`.
    Exact {
        kx: Mat<f64>,
        denom: Vec<f64>,
    },
}

impl AdmmOperators {
    pub fn new(x: &DenseMatrix, cfg: &AdmmConfig) -> Result<Self> {
        cfg.validate()?;
        let base = make_spd_solver(x, 1.0, cfg.mu, SolveSide::Covariance)?;
        let direction = match cfg.a_update {
            AUpdateMode::Paper => {
                DirectionSolve::Paper(make_spd_solver(x, 2.0, cfg.mu, SolveSide::Covariance)?)
            }
            AUpdateMode::Exact => {
                let mut kx = x.as_mat().clone();
                base.solve_inner_in_place(kx.as_mut());
                let denom = (0..x.ncols())
                    .map(|j| 1.0 + dot(x.column(j), kx.col_as_slice(j)))
                    .collect();
                DirectionSolve::Exact { kx, denom }
            }
        };
        Ok(AdmmOperators {
            mu: cfg.mu,
            base,
            cov: mat_mul(x.as_ref(), x.as_ref().transpose()),
            direction,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn mode(&self) -> AUpdateMode {
        match self.direction {
            DirectionSolve::Paper(_) => AUpdateMode::Paper,
            DirectionSolve::Exact { .. } => AUpdateMode::Exact,
        }
    }

    /// Overwrites `rhs` with the new direction matrix.
    fn solve_direction(&self, x: &DenseMatrix, mut rhs: MatMut<'_, f64>) {
        match &self.direction {
            DirectionSolve::Paper(g1) => g1.apply_in_place(rhs),
            DirectionSolve::Exact { kx, denom } => {
                self.base.apply_in_place(rhs.rb_mut());
                for j in 0..rhs.ncols() {
                    let xj = x.column(j);
                    let kxj = kx.col_as_slice(j);
                    let mut col = rhs.rb_mut().col_mut(j);
                    let s = (0..xj.len()).map(|i| xj[i] * col[i]).sum::<f64>() / denom[j];
                    for i in 0..xj.len() {
                        col[i] -= s * kxj[i];
                    }
                }
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Iterate of the ADMM loop. Built for one data matrix; the cached products
/// `XU` and `μT + Y3` are kept consistent by [`admm_step`].
#[derive(Clone, Debug)]
pub struct AdmmState {
    a: Mat<f64>,
    u: Mat<f64>,
    z: Mat<f64>,
    t: Mat<f64>,
    y1: Mat<f64>,
    y2: Vec<f64>,
    y3: Mat<f64>,
    y4: Mat<f64>,
    iteration: usize,
    residuals: Residuals,
    x_u: Mat<f64>,
    /// `X(μT + Y3)` for `shifted_mu`.
    x_shifted: Mat<f64>,
    shifted_mu: f64,
}

/// Raw variables for [`AdmmState::from_parts`].
#[derive(Clone, Debug)]
pub struct StateParts {
    pub a: Mat<f64>,
    pub u: Mat<f64>,
    pub z: Mat<f64>,
    pub t: Mat<f64>,
    pub y1: Mat<f64>,
    pub y2: Vec<f64>,
    pub y3: Mat<f64>,
    pub y4: Mat<f64>,
}

impl StateParts {
    /// All variables zero.
    pub fn zeros(r: usize, m2: usize) -> Self {
        StateParts {
            a: Mat::zeros(r, m2),
            u: Mat::zeros(m2, m2),
            z: Mat::zeros(m2, m2),
            t: Mat::zeros(m2, m2),
            y1: Mat::zeros(r, m2),
            y2: vec![0.0; m2],
            y3: Mat::zeros(m2, m2),
            y4: Mat::zeros(m2, m2),
        }
    }
}

impl AdmmState {
    /// Each direction starts at its own point (`A = X`, `U = Z = I`,
    /// `T = XᵀX`) with all multipliers zero.
    pub fn initial(x: &DenseMatrix, mu: f64) -> Self {
        let (r, m2) = x.shape();
        let xm = x.as_mat();
        let t = mat_mul(xm.transpose(), xm.as_ref());
        let x_shifted = shifted_product(x.as_ref(), t.as_ref(), None, mu);
        let mut state = AdmmState {
            a: xm.clone(),
            u: Mat::identity(m2, m2),
            z: Mat::identity(m2, m2),
            t,
            y1: Mat::zeros(r, m2),
            y2: vec![0.0; m2],
            y3: Mat::zeros(m2, m2),
            y4: Mat::zeros(m2, m2),
            iteration: 0,
            residuals: Residuals::default(),
            x_u: xm.clone(),
            x_shifted,
            shifted_mu: mu,
        };
        state.residuals = state.measure(x);
        state
    }

    /// Wraps arbitrary variables, checking shapes and finiteness.
    pub fn from_parts(x: &DenseMatrix, mu: f64, parts: StateParts) -> Result<Self> {
        let (r, m2) = x.shape();
        let check = |name: &str, m: &Mat<f64>, rows: usize| -> Result<()> {
            if m.nrows() != rows || m.ncols() != m2 {
                return Err(Error::dim(format!(
                    "{name} is {}x{}, expected {rows}x{m2}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if let Some(v) = (0..m2)
                .flat_map(|j| m.col_as_slice(j))
                .find(|v| !v.is_finite())
            {
                return Err(Error::invalid(format!("{name} has non-finite entry {v}")));
            }
            Ok(())
        };
        check("A", &parts.a, r)?;
        check("Y1", &parts.y1, r)?;
        for (name, m) in [
            ("U", &parts.u),
            ("Z", &parts.z),
            ("T", &parts.t),
            ("Y3", &parts.y3),
            ("Y4", &parts.y4),
        ] {
            check(name, m, m2)?;
        }
        if parts.y2.len() != m2 || parts.y2.iter().any(|v| !v.is_finite()) {
            return Err(Error::dim(format!("y2 must hold {m2} finite values")));
        }
        let x_u = mat_mul(x.as_ref(), parts.u.as_ref());
        let x_shifted = shifted_product(x.as_ref(), parts.t.as_ref(), Some(parts.y3.as_ref()), mu);
        let mut state = AdmmState {
            a: parts.a,
            u: parts.u,
            z: parts.z,
            t: parts.t,
            y1: parts.y1,
            y2: parts.y2,
            y3: parts.y3,
            y4: parts.y4,
            iteration: 0,
            residuals: Residuals::default(),
            x_u,
            x_shifted,
            shifted_mu: mu,
        };
        state.residuals = state.measure(x);
        Ok(state)
    }

    fn measure(&self, x: &DenseMatrix) -> Residuals {
        let xta = mat_mul(x.as_ref().transpose(), self.a.as_ref());
        let m2 = x.ncols();
        Residuals {
            direction: max_abs_diff(self.a.as_ref(), self.x_u.as_ref()),
            feasibility: (0..m2)
                .map(|j| (xta[(j, j)] - 1.0).abs())
                .fold(0.0, f64::max),
            response: max_abs_diff(self.t.as_ref(), xta.as_ref()),
            split: max_abs_diff(self.z.as_ref(), self.u.as_ref()),
        }
    }

    pub fn a(&self) -> MatRef<'_, f64> {
        self.a.as_ref()
    }
    pub fn u(&self) -> MatRef<'_, f64> {
        self.u.as_ref()
    }
    pub fn z(&self) -> MatRef<'_, f64> {
        self.z.as_ref()
    }
    pub fn t(&self) -> MatRef<'_, f64> {
        self.t.as_ref()
    }
    pub fn y1(&self) -> MatRef<'_, f64> {
        self.y1.as_ref()
    }
    pub fn y2(&self) -> &[f64] {
        &self.y2
    }
    pub fn y3(&self) -> MatRef<'_, f64> {
        self.y3.as_ref()
    }
    pub fn y4(&self) -> MatRef<'_, f64> {
        self.y4.as_ref()
    }
    pub fn iteration(&self) -> usize {
        self.iteration
    }
    pub fn residuals(&self) -> Residuals {
        self.residuals
    }
}

fn max_abs_diff(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    let mut d = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            d = d.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    d
}

/// Remembers whether any value seen in a fused pass was non-finite.
#[derive(Default)]
struct FiniteGuard(bool);

impl FiniteGuard {
    #[inline]
    fn see(&mut self, v: f64) {
        self.0 |= !v.is_finite();
    }

    fn check(&self, variable: &'static str, iteration: usize) -> Result<()> {
        if self.0 {
            Err(Error::Diverged {
                variable,
                iteration,
            })
        } else {
            Ok(())
        }
    }
}

/// Columns per block in the fused passes. A block of every M₂ x M₂ variable
/// stays in cache between its product with `X` and its elementwise update.
const BLOCK: usize = 16;

/// `μXT + XY3`.
fn shifted_product(
    x: MatRef<'_, f64>,
    t: MatRef<'_, f64>,
    y3: Option<MatRef<'_, f64>>,
    mu: f64,
) -> Mat<f64> {
    let mut out = Mat::zeros(x.nrows(), t.ncols());
    mat_mul_into(out.as_mut(), Accum::Replace, x, t, mu);
    if let Some(y3) = y3 {
        mat_mul_into(out.as_mut(), Accum::Add, x, y3, 1.0);
    }
    out
}

/// One ADMM iteration: direction block `A`, then `T`, `Z`, `U`, then the
/// four multiplier ascents. Residuals are refreshed at the end.
pub fn admm_step(
    state: &mut AdmmState,
    x: &DenseMatrix,
    cfg: &AdmmConfig,
    ops: &AdmmOperators,
) -> Result<()> {
    let (r, m2) = x.shape();
    if state.a.nrows() != r || state.a.ncols() != m2 || state.u.nrows() != m2 {
        return Err(Error::dim(format!(
            "state is for a {}x{} matrix, data is {r}x{m2}",
            state.a.nrows(),
            state.a.ncols()
        )));
    }
    if ops.mu != cfg.mu || ops.cov.nrows() != r {
        return Err(Error::invalid(
            "operators were built for different data or mu",
        ));
    }
    let mu = cfg.mu;
    let inv_mu = 1.0 / mu;
    let iter = state.iteration + 1;
    let xm = x.as_ref();
    let xt = xm.transpose();
    let l1 = cfg.norm == ResponseNorm::L1;

    if state.shifted_mu != mu {
        state.x_shifted = shifted_product(xm, state.t.as_ref(), Some(state.y3.as_ref()), mu);
        state.shifted_mu = mu;
    }

    // Direction block, right-hand side μXU + μX + X(μT + Y3) − Y1 − X·diag(y2).
    let mut a = state.x_shifted.clone();
    for j in 0..m2 {
        let c = mu - state.y2[j];
        for (((v, &xu), &xv), &y1) in a
            .col_as_slice_mut(j)
            .iter_mut()
            .zip(state.x_u.col_as_slice(j))
            .zip(x.column(j))
            .zip(state.y1.col_as_slice(j))
        {
            *v += mu * xu + c * xv - y1;
        }
    }
    ops.solve_direction(x, a.as_mut());
    let mut guard = FiniteGuard::default();
    (0..m2)
        .flat_map(|j| a.col_as_slice(j))
        .for_each(|&v| guard.see(v));
    guard.check("A", iter)?;
    state.a = a;

    // T and Y3 block by block: the block of responses XᵀA is formed,
    // consumed, then overwritten with μT + Y3 for the next direction update.
    let mut block = Mat::<f64>::zeros(m2, BLOCK.min(m2));
    let mut response_res = 0.0f64;
    let (mut guard_t, mut guard_y3) = (FiniteGuard::default(), FiniteGuard::default());
    for j0 in (0..m2).step_by(BLOCK) {
        let jb = BLOCK.min(m2 - j0);
        mat_mul_into(
            block.as_mut().subcols_mut(0, jb),
            Accum::Replace,
            xt,
            state.a.as_ref().subcols(j0, jb),
            1.0,
        );
        for jj in 0..jb {
            let pj = block.col_as_slice_mut(jj);
            let y3j = state.y3.col_as_slice_mut(j0 + jj);
            let tj = state.t.col_as_slice_mut(j0 + jj);
            let scale = if l1 {
                1.0
            } else {
                let sq: f64 = pj
                    .iter()
                    .zip(y3j.iter())
                    .map(|(p, y)| {
                        let v = p - inv_mu * y;
                        v * v
                    })
                    .sum();
                shrink_factor(sq.sqrt(), inv_mu)
            };
            for ((p, y), t) in pj.iter_mut().zip(y3j.iter_mut()).zip(tj.iter_mut()) {
                let v = *p - inv_mu * *y;
                let tv = if l1 {
                    soft_threshold(v, inv_mu)
                } else {
                    scale * v
                };
                let gap = tv - *p;
                *y += mu * gap;
                response_res = response_res.max(gap.abs());
                guard_t.see(tv);
                guard_y3.see(*y);
                *t = tv;
                *p = mu * tv + *y;
            }
        }
        mat_mul_into(
            state.x_shifted.as_mut().subcols_mut(j0, jb),
            Accum::Replace,
            xm,
            block.as_ref().subcols(0, jb),
            1.0,
        );
    }
    guard_t.check("T", iter)?;
    guard_y3.check("Y3", iter)?;

    // U solves μ(I + XᵀX)U = R with R = Xᵀ(μA + Y1) + μZ + Y4. Through the
    // r x r factor K = (I + XXᵀ)⁻¹ this is U = R/μ − Xᵀ K X R/μ, and
    // XU = K X R/μ. First Z from the previous U, leaving Z + Y4/μ in U.
    let z_eps = cfg.gamma * inv_mu;
    let mut x_r = Mat::<f64>::zeros(r, m2);
    let mut guard_z = FiniteGuard::default();
    for j0 in (0..m2).step_by(BLOCK) {
        let jb = BLOCK.min(m2 - j0);
        for j in j0..j0 + jb {
            let y4j = state.y4.col_as_slice(j);
            let zj = state.z.col_as_slice_mut(j);
            let uj = state.u.col_as_slice_mut(j);
            for ((u, z), &y) in uj.iter_mut().zip(zj.iter_mut()).zip(y4j) {
                let zv = soft_threshold(*u - inv_mu * y, z_eps);
                guard_z.see(zv);
                *z = zv;
                *u = zv + inv_mu * y;
            }
        }
        mat_mul_into(
            x_r.as_mut().subcols_mut(j0, jb),
            Accum::Replace,
            xm,
            state.u.as_ref().subcols(j0, jb),
            1.0,
        );
    }
    guard_z.check("Z", iter)?;

    let mut lifted = Mat::from_fn(r, m2, |i, j| state.a[(i, j)] + inv_mu * state.y1[(i, j)]);
    mat_mul_into(
        x_r.as_mut(),
        Accum::Add,
        ops.cov.as_ref(),
        lifted.as_ref(),
        1.0,
    );
    ops.base.solve_inner_in_place(x_r.as_mut());
    let x_u = x_r;
    for j in 0..m2 {
        for (l, &k) in lifted
            .col_as_slice_mut(j)
            .iter_mut()
            .zip(x_u.col_as_slice(j))
        {
            *l -= k;
        }
    }

    let mut split_res = 0.0f64;
    let (mut guard_u, mut guard_y4) = (FiniteGuard::default(), FiniteGuard::default());
    for j0 in (0..m2).step_by(BLOCK) {
        let jb = BLOCK.min(m2 - j0);
        mat_mul_into(
            state.u.as_mut().subcols_mut(j0, jb),
            Accum::Add,
            xt,
            lifted.as_ref().subcols(j0, jb),
            1.0,
        );
        for j in j0..j0 + jb {
            let zj = state.z.col_as_slice(j);
            let uj = state.u.col_as_slice(j);
            for ((y, &z), &u) in state.y4.col_as_slice_mut(j).iter_mut().zip(zj).zip(uj) {
                let gap = z - u;
                *y += mu * gap;
                split_res = split_res.max(gap.abs());
                guard_u.see(u);
                guard_y4.see(*y);
            }
        }
    }
    guard_u.check("U", iter)?;
    guard_y4.check("Y4", iter)?;
    state.x_u = x_u;

    let mut direction_res = 0.0f64;
    let mut guard_y1 = FiniteGuard::default();
    for j in 0..m2 {
        let aj = state.a.col_as_slice(j);
        let xuj = state.x_u.col_as_slice(j);
        for ((y, &av), &xu) in state.y1.col_as_slice_mut(j).iter_mut().zip(aj).zip(xuj) {
            let gap = av - xu;
            *y += mu * gap;
            direction_res = direction_res.max(gap.abs());
            guard_y1.see(*y);
        }
    }
    guard_y1.check("Y1", iter)?;

    let mut feasibility_res = 0.0f64;
    let mut guard_y2 = FiniteGuard::default();
    for j in 0..m2 {
        let gap = dot(state.a.col_as_slice(j), x.column(j)) - 1.0;
        state.y2[j] += mu * gap;
        feasibility_res = feasibility_res.max(gap.abs());
        guard_y2.see(state.y2[j]);
    }
    guard_y2.check("y2", iter)?;

    state.iteration = iter;
    state.residuals = Residuals {
        direction: direction_res,
        feasibility: feasibility_res,
        response: response_res,
        split: split_res,
    };
    Ok(())
}

/// Outcome of [`solve_directions`].
#[derive(Clone, Debug)]
pub struct DirectionSet {
    /// Column i is the direction found for point i.
    pub astar: DenseMatrix,
    /// `|A*ᵀX|`; row i holds the responses of every point to direction i.
    pub responses: DenseMatrix,
    pub converged: bool,
    pub iters_used: usize,
    pub final_residuals: Residuals,
    /// Residuals after each iteration.
    pub history: Vec<Residuals>,
}

impl DirectionSet {
    /// `max_i |aᵢᵀxᵢ − 1|`.
    pub fn feasibility_gap(&self, x: &DenseMatrix) -> f64 {
        (0..x.ncols())
            .map(|j| (dot(self.astar.column(j), x.column(j)) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `‖XᵀA‖` under `norm`: sum of absolute entries, or sum of column norms.
pub fn direction_objective(x: &DenseMatrix, a: &DenseMatrix, norm: ResponseNorm) -> f64 {
    let xta = mat_mul(x.as_ref().transpose(), a.as_ref());
    (0..xta.ncols())
        .map(|j| {
            let col = xta.col_as_slice(j);
            match norm {
                ResponseNorm::L1 => col.iter().map(|v| v.abs()).sum::<f64>(),
                ResponseNorm::L2 => col.iter().map(|v| v * v).sum::<f64>().sqrt(),
            }
        })
        .sum()
}

/// Runs ADMM from [`AdmmState::initial`] until every residual is within
/// `cfg.tol` or `cfg.max_iters` is reached. Hitting the cap is not an
/// error; check `converged`.
pub fn solve_directions(x: &DenseMatrix, cfg: &AdmmConfig) -> Result<DirectionSet> {
    cfg.validate()?;
    if let Some(j) = (0..x.ncols()).find(|&j| x.column(j).iter().all(|&v| v == 0.0)) {
        return Err(Error::ZeroColumn(j));
    }
    let ops = AdmmOperators::new(x, cfg)?;
    let mut state = AdmmState::initial(x, cfg.mu);
    let mut history = Vec::with_capacity(cfg.max_iters);
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        admm_step(&mut state, x, cfg, &ops)?;
        history.push(state.residuals);
        if state.residuals.max() <= cfg.tol {
            converged = true;
            break;
        }
    }
    let iters_used = state.iteration;
    let final_residuals = state.residuals;
    let a = std::mem::replace(&mut state.a, Mat::zeros(0, 0));
    drop(state);
    let mut responses = mat_mul(a.as_ref().transpose(), x.as_ref());
    for j in 0..responses.ncols() {
        responses
            .col_as_slice_mut(j)
            .iter_mut()
            .for_each(|v| *v = v.abs());
    }
    Ok(DirectionSet {
        astar: DenseMatrix::from_mat_unchecked(a),
        responses: DenseMatrix::from_mat_unchecked(responses),
        converged,
        iters_used,
        final_residuals,
        history,
    })
}
