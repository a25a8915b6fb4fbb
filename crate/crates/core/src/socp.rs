//! Small dense second-order cone programming solver.
//!
//! Solves problems of the form
//!
//! ```text
//! minimize    cost' x
//! subject to  || A_i x + b_i ||_2  <=  c_i' x + d_i     (i = 1..m)
//!             || x ||_2            <=  R                (optional)
//! ```
//!
//! by a primal-dual interior-point method: the problem is rewritten in conic
//! form `min c'x  s.t.  Gx + s = h, s in K` where `K` is a product of
//! second-order cones (one per constraint block; a block with an empty `A_i`
//! is a one-dimensional cone, i.e. a linear inequality). The assembled data
//! is Ruiz-equilibrated — rows scaled per cone block, columns per variable —
//! before iterating, and the scaling is undone on exit. Directions are
//! computed in the Nesterov–Todd scaling with a Mehrotra predictor-corrector
//! step; the reduced normal system `(G' W^-2 G) dx = r` is solved by dense
//! Cholesky with diagonal-regularization retry and one step of iterative
//! refinement. Problem sizes in this crate are tiny (tens of rows), so no
//! sparsity machinery is used, and every solve is deterministic.
//!
//! Infeasibility and unboundedness are reported through the standard
//! certificates: a dual ray `z in K` with `G'z ~ 0, h'z < 0` certifies primal
//! infeasibility; a primal ray `x` with `Gx + s ~ 0, s in K, cost'x < 0`
//! certifies unboundedness. Persistent numerical failure (a scaling or
//! factorization breakdown) ends the solve with `MaxIter` and the best
//! iterate so far.

use std::fmt;

use nalgebra::{DMatrix, DVector};

// ---------- problem types ----------

/// One constraint block `||A x + b|| <= c'x + d`. `a` may have zero rows, in
/// which case the block is the linear inequality `0 <= c'x + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocpCone {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

impl SocpCone {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>, d: f64) -> Self {
        SocpCone { a, b, c, d }
    }

    /// A pure linear inequality `0 <= c'x + d`.
    pub fn linear(c: DVector<f64>, d: f64) -> Self {
        let n = c.len();
        SocpCone { a: DMatrix::zeros(0, n), b: DVector::zeros(0), c, d }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocpProblem {
    pub n: usize,
    pub cost: DVector<f64>,
    pub cones: Vec<SocpCone>,
    /// Optional ball constraint `||x|| <= R`.
    pub bound: Option<f64>,
}

impl SocpProblem {
    pub fn new(cost: DVector<f64>) -> Self {
        let n = cost.len();
        SocpProblem { n, cost, cones: Vec::new(), bound: None }
    }

    pub fn with_cone(mut self, cone: SocpCone) -> Self {
        self.cones.push(cone);
        self
    }

    pub fn with_bound(mut self, radius: f64) -> Self {
        self.bound = Some(radius);
        self
    }

    pub fn validate(&self) -> Result<(), SocpError> {
        if self.n == 0 || self.cost.len() != self.n {
            return Err(SocpError::Dimension {
                what: "cost length must equal n and be positive",
            });
        }
        if !self.cost.iter().all(|v| v.is_finite()) {
            return Err(SocpError::NonFinite("cost"));
        }
        if self.cones.is_empty() && self.bound.is_none() {
            return Err(SocpError::NoConstraints);
        }
        if let Some(r) = self.bound {
            if !(r.is_finite() && r > 0.0) {
                return Err(SocpError::BadBound(r));
            }
        }
        for cone in &self.cones {
            if cone.c.len() != self.n
                || cone.a.nrows() != cone.b.len()
                || (cone.a.nrows() > 0 && cone.a.ncols() != self.n)
            {
                return Err(SocpError::Dimension { what: "cone block shapes" });
            }
            let finite = cone.a.iter().all(|v| v.is_finite())
                && cone.b.iter().all(|v| v.is_finite())
                && cone.c.iter().all(|v| v.is_finite())
                && cone.d.is_finite();
            if !finite {
                return Err(SocpError::NonFinite("cone block"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SocpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

impl fmt::Display for SocpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SocpStatus::Optimal => "optimal",
            SocpStatus::Infeasible => "infeasible",
            SocpStatus::Unbounded => "unbounded",
            SocpStatus::MaxIter => "max-iter",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub status: SocpStatus,
    /// Relative duality gap at the returned iterate.
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocpOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SocpOptions {
    fn default() -> Self {
        SocpOptions { gap_tol: 1e-8, feas_tol: 1e-8, max_iter: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SocpError {
    Dimension { what: &'static str },
    NonFinite(&'static str),
    NoConstraints,
    BadBound(f64),
    Parse { line: usize, msg: String },
}

impl fmt::Display for SocpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SocpError::Dimension { what } => write!(f, "inconsistent dimensions: {what}"),
            SocpError::NonFinite(what) => write!(f, "non-finite entries in {what}"),
            SocpError::NoConstraints => write!(f, "problem needs at least one cone or a bound"),
            SocpError::BadBound(r) => write!(f, "bound radius must be finite and > 0, got {r}"),
            SocpError::Parse { line, msg } => write!(f, "dump parse error at line {line}: {msg}"),
        }
    }
}

impl std::error::Error for SocpError {}

// ---------- conic assembly ----------

/// Row layout of the stacked cone variable: block `j` occupies
/// `starts[j] .. starts[j] + dims[j]`.
struct Layout {
    starts: Vec<usize>,
    dims: Vec<usize>,
    m: usize,
}

fn assemble(p: &SocpProblem) -> (DMatrix<f64>, DVector<f64>, Layout) {
    let mut dims = Vec::with_capacity(p.cones.len() + 1);
    for cone in &p.cones {
        dims.push(cone.a.nrows() + 1);
    }
    if p.bound.is_some() {
        dims.push(p.n + 1);
    }
    let mut starts = Vec::with_capacity(dims.len());
    let mut m = 0;
    for d in &dims {
        starts.push(m);
        m += d;
    }

    let mut g = DMatrix::zeros(m, p.n);
    let mut h = DVector::zeros(m);
    let mut row = 0;
    for cone in &p.cones {
        for j in 0..p.n {
            g[(row, j)] = -cone.c[j];
        }
        h[row] = cone.d;
        row += 1;
        for r in 0..cone.a.nrows() {
            for j in 0..p.n {
                g[(row, j)] = -cone.a[(r, j)];
            }
            h[row] = cone.b[r];
            row += 1;
        }
    }
    if let Some(radius) = p.bound {
        h[row] = radius;
        row += 1;
        for j in 0..p.n {
            g[(row + j, j)] = -1.0;
        }
    }
    (g, h, Layout { starts, dims, m })
}

// ---------- cone algebra ----------

/// Nesterov–Todd scaling point of one block.
enum Scaling {
    /// One-dimensional cone: `W = sqrt(s/z)`.
    Lp { w: f64 },
    /// Second-order cone: `W = eta * [[w0, w1'], [w1, I + w1 w1'/(1+w0)]]`
    /// with `det(wbar) = 1`.
    Soc { wbar: DVector<f64>, eta: f64 },
}

fn soc_det(v: &[f64]) -> f64 {
    let tail: f64 = v[1..].iter().map(|t| t * t).sum();
    v[0] * v[0] - tail
}

fn compute_scalings(layout: &Layout, s: &DVector<f64>, z: &DVector<f64>) -> Option<Vec<Scaling>> {
    let mut out = Vec::with_capacity(layout.dims.len());
    for (start, dim) in layout.starts.iter().zip(&layout.dims) {
        let sb = s.as_slice()[*start..*start + *dim].to_vec();
        let zb = z.as_slice()[*start..*start + *dim].to_vec();
        if *dim == 1 {
            if sb[0] <= 0.0 || zb[0] <= 0.0 {
                return None;
            }
            out.push(Scaling::Lp { w: (sb[0] / zb[0]).sqrt() });
        } else {
            let ds = soc_det(&sb);
            let dz = soc_det(&zb);
            if !(ds > 0.0 && dz > 0.0 && sb[0] > 0.0 && zb[0] > 0.0) {
                return None;
            }
            let (rs, rz) = (ds.sqrt(), dz.sqrt());
            let sbar: Vec<f64> = sb.iter().map(|v| v / rs).collect();
            let zbar: Vec<f64> = zb.iter().map(|v| v / rz).collect();
            let dot: f64 = sbar.iter().zip(&zbar).map(|(a, b)| a * b).sum();
            let gamma = ((1.0 + dot) / 2.0).sqrt();
            if !(gamma.is_finite() && gamma > 0.0) {
                return None;
            }
            // wbar = (sbar + J zbar) / (2 gamma), J = diag(1, -I).
            let mut wbar = DVector::zeros(*dim);
            wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
            for j in 1..*dim {
                wbar[j] = (sbar[j] - zbar[j]) / (2.0 * gamma);
            }
            let eta = (ds / dz).powf(0.25);
            out.push(Scaling::Soc { wbar, eta });
        }
    }
    Some(out)
}

/// Apply `W^-1` blockwise.
fn apply_winv(layout: &Layout, scalings: &[Scaling], v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(layout.m);
    for (k, (start, dim)) in layout.starts.iter().zip(&layout.dims).enumerate() {
        match &scalings[k] {
            Scaling::Lp { w } => out[*start] = v[*start] / w,
            Scaling::Soc { wbar, eta } => {
                let v0 = v[*start];
                let mut dot = 0.0;
                for j in 1..*dim {
                    dot += wbar[j] * v[*start + j];
                }
                out[*start] = (wbar[0] * v0 - dot) / eta;
                let coef = dot / (1.0 + wbar[0]) - v0;
                for j in 1..*dim {
                    out[*start + j] = (v[*start + j] + coef * wbar[j]) / eta;
                }
            }
        }
    }
    out
}

/// Jordan product `a o b` blockwise.
fn jordan_prod(layout: &Layout, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(layout.m);
    for (start, dim) in layout.starts.iter().zip(&layout.dims) {
        if *dim == 1 {
            out[*start] = a[*start] * b[*start];
        } else {
            let mut dot = 0.0;
            for j in 0..*dim {
                dot += a[*start + j] * b[*start + j];
            }
            out[*start] = dot;
            for j in 1..*dim {
                out[*start + j] = a[*start] * b[*start + j] + b[*start] * a[*start + j];
            }
        }
    }
    out
}

/// Solve `lam o u = r` blockwise (`L_lam^-1 r`).
fn jordan_solve(layout: &Layout, lam: &DVector<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let mut out = DVector::zeros(layout.m);
    for (start, dim) in layout.starts.iter().zip(&layout.dims) {
        if *dim == 1 {
            if lam[*start] == 0.0 {
                return None;
            }
            out[*start] = r[*start] / lam[*start];
        } else {
            let lb = &lam.as_slice()[*start..*start + *dim];
            let det = soc_det(lb);
            if det == 0.0 || lb[0] == 0.0 {
                return None;
            }
            let mut dot = 0.0;
            for j in 1..*dim {
                dot += lb[j] * r[*start + j];
            }
            let u0 = (lb[0] * r[*start] - dot) / det;
            out[*start] = u0;
            for j in 1..*dim {
                out[*start + j] = (r[*start + j] - u0 * lb[j]) / lb[0];
            }
        }
    }
    Some(out)
}

/// The cone identity element `e` (one per block, first coordinate).
fn unit_e(layout: &Layout) -> DVector<f64> {
    let mut e = DVector::zeros(layout.m);
    for start in &layout.starts {
        e[*start] = 1.0;
    }
    e
}

/// Largest `t` such that `p + t d` stays in the cone, blockwise minimum.
fn step_to_boundary(layout: &Layout, p: &DVector<f64>, d: &DVector<f64>) -> f64 {
    let mut best = f64::INFINITY;
    for (start, dim) in layout.starts.iter().zip(&layout.dims) {
        if *dim == 1 {
            if d[*start] < 0.0 {
                best = best.min(-p[*start] / d[*start]);
            }
            continue;
        }
        let pb = &p.as_slice()[*start..*start + *dim];
        let db = &d.as_slice()[*start..*start + *dim];
        let a = soc_det(db);
        let mut cross = pb[0] * db[0];
        for j in 1..*dim {
            cross -= pb[j] * db[j];
        }
        let b = 2.0 * cross;
        let c0 = soc_det(pb).max(0.0);
        if a != 0.0 {
            let disc = b * b - 4.0 * a * c0;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                let sign = if b >= 0.0 { 1.0 } else { -1.0 };
                let q = -0.5 * (b + sign * sq);
                let candidates = [
                    if a != 0.0 { q / a } else { f64::INFINITY },
                    if q != 0.0 { c0 / q } else { f64::INFINITY },
                ];
                for r in candidates {
                    if r > 0.0 && r < best {
                        best = r;
                    }
                }
            }
        } else if b < 0.0 {
            let r = -c0 / b;
            if r > 0.0 && r < best {
                best = r;
            }
        }
        if db[0] < 0.0 {
            best = best.min(-pb[0] / db[0]);
        }
    }
    best
}

// ---------- equilibration ----------

/// Ruiz equilibration of the assembled conic data. Rows are scaled by one
/// positive factor per cone block (a block-wise scaling maps each cone
/// constraint to an equivalent one) and columns by one factor per variable
/// (a change of variables, undone when the solution is extracted). A few
/// sweeps bring every block and column to unit magnitude, so the residual
/// checks are not drowned in cancellation noise when the raw data mixes
/// scales — without this, problems whose columns span several orders of
/// magnitude hit a dual-residual floor above `feas_tol` near degenerate
/// optima. The duality gap and the objective value are invariant under the
/// scaling. Returns the scaled `(g, h, cost)` and the column factors.
fn equilibrate(
    mut g: DMatrix<f64>,
    mut h: DVector<f64>,
    mut cost: DVector<f64>,
    layout: &Layout,
) -> (DMatrix<f64>, DVector<f64>, DVector<f64>, DVector<f64>) {
    let n = g.ncols();
    let mut col_scale = DVector::from_element(n, 1.0);
    for _ in 0..5 {
        for j in 0..n {
            let max = g.column(j).amax();
            if max > 0.0 && max.is_finite() {
                let f = 1.0 / max.sqrt();
                col_scale[j] *= f;
                cost[j] *= f;
                for r in 0..g.nrows() {
                    g[(r, j)] *= f;
                }
            }
        }
        for (start, dim) in layout.starts.iter().zip(&layout.dims) {
            let mut max: f64 = 0.0;
            for r in *start..*start + *dim {
                max = max.max(h[r].abs());
                for j in 0..n {
                    max = max.max(g[(r, j)].abs());
                }
            }
            if max > 0.0 && max.is_finite() {
                let f = 1.0 / max.sqrt();
                for r in *start..*start + *dim {
                    h[r] *= f;
                    for j in 0..n {
                        g[(r, j)] *= f;
                    }
                }
            }
        }
    }
    (g, h, cost, col_scale)
}

// ---------- solver ----------

/// Bring a point strictly inside the cone by shifting along `e`.
fn push_interior(layout: &Layout, v: &mut DVector<f64>) {
    let mut need: f64 = -f64::INFINITY;
    for (start, dim) in layout.starts.iter().zip(&layout.dims) {
        let margin = if *dim == 1 {
            v[*start]
        } else {
            let tail: f64 = (1..*dim).map(|j| v[*start + j] * v[*start + j]).sum::<f64>().sqrt();
            v[*start] - tail
        };
        need = need.max(-margin);
    }
    if need >= 0.0 {
        let shift = 1.0 + need;
        for start in &layout.starts {
            v[*start] += shift;
        }
    }
}

/// Cholesky with escalating diagonal regularization, plus one iterative
/// refinement step against the unregularized matrix.
fn solve_normal(
    k: &DMatrix<f64>,
    rhs: &DVector<f64>,
) -> Option<DVector<f64>> {
    let n = k.nrows();
    let scale = k.trace().abs() / n as f64 + 1.0;
    let mut reg = 0.0;
    for attempt in 0..6 {
        let mut kk = k.clone();
        if attempt > 0 {
            reg = if reg == 0.0 { 1e-12 * scale } else { reg * 100.0 };
            for j in 0..n {
                kk[(j, j)] += reg;
            }
        }
        if let Some(chol) = kk.cholesky() {
            let mut x = chol.solve(rhs);
            let resid = rhs - k * &x;
            x += chol.solve(&resid);
            return Some(x);
        }
    }
    None
}

/// Solve the cone program. Statuses (including `Infeasible`, `Unbounded`,
/// `MaxIter`) come back inside `Ok`; `Err` is reserved for malformed input.
pub fn solve_socp(p: &SocpProblem, opts: &SocpOptions) -> Result<SocpSolution, SocpError> {
    p.validate()?;
    let (g, h, layout) = assemble(p);
    let (g, h, cost, col_scale) = equilibrate(g, h, p.cost.clone(), &layout);
    let n = p.n;
    let nu = layout.dims.len() as f64;
    let e = unit_e(&layout);
    let g_scale = g.norm().max(1.0);

    // Interior start: least-squares primal/dual points shifted into the cone.
    let mut gram = g.transpose() * &g;
    let reg = 1e-12 * (gram.trace() / n as f64 + 1.0);
    for j in 0..n {
        gram[(j, j)] += reg;
    }
    let (mut x, mut z) = match gram.clone().cholesky() {
        Some(chol) => (
            chol.solve(&(g.transpose() * &h)),
            -(&g * chol.solve(&cost)),
        ),
        None => (DVector::zeros(n), DVector::zeros(layout.m)),
    };
    let mut s = &h - &g * &x;
    push_interior(&layout, &mut s);
    push_interior(&layout, &mut z);

    let h_norm1 = h.norm().max(1.0);
    let c_norm1 = cost.norm().max(1.0);

    let mut iterations = 0;
    let mut status = SocpStatus::MaxIter;
    let mut gap_report = f64::INFINITY;
    // Near a degenerate optimum the endgame can overshoot: complementarity
    // collapses while a feasibility residual bounces back up. Keep the
    // iterate with the smallest worst-case residual and hand that one back
    // on a non-optimal exit.
    let mut best_metric = f64::INFINITY;
    let mut best_gap = f64::INFINITY;
    let mut best_x = x.clone();

    for _ in 0..opts.max_iter {
        let rx = g.transpose() * &z + &cost;
        let rz = &g * &x + &s - &h;
        let sz = s.dot(&z);
        let cx = cost.dot(&x);
        let hz = h.dot(&z);

        let pres = rz.norm() / h_norm1;
        let dres = rx.norm() / c_norm1;
        let relgap = sz / cx.abs().max(1.0);
        gap_report = relgap;

        let metric = pres.max(dres).max(relgap);
        if metric < best_metric {
            best_metric = metric;
            best_gap = relgap;
            best_x.copy_from(&x);
        }

        if pres <= opts.feas_tol && dres <= opts.feas_tol && relgap <= opts.gap_tol {
            status = SocpStatus::Optimal;
            break;
        }
        // Certificates. z stays in K by construction, so a normalized dual
        // ray with tiny G'z certifies primal infeasibility; symmetrically
        // for unboundedness.
        if hz < -1e-10 * h_norm1 {
            let zn = &z / (-hz);
            if (g.transpose() * &zn).norm() * h_norm1 <= opts.feas_tol * g_scale {
                status = SocpStatus::Infeasible;
                break;
            }
        }
        if cx < -1e-10 * c_norm1 {
            let xn = &x / (-cx);
            let sn = &s / (-cx);
            if (&g * &xn + &sn).norm() * c_norm1 <= opts.feas_tol * g_scale {
                status = SocpStatus::Unbounded;
                break;
            }
        }

        let Some(scalings) = compute_scalings(&layout, &s, &z) else {
            break;
        };
        let lam = apply_winv(&layout, &scalings, &s);
        let mu = sz / nu;

        // Reduced system matrix K = G' W^-2 G via the scaled G.
        let mut g_hat = DMatrix::zeros(layout.m, n);
        for j in 0..n {
            let col = DVector::from_column_slice(g.column(j).as_slice());
            let scaled = apply_winv(&layout, &scalings, &col);
            for r in 0..layout.m {
                g_hat[(r, j)] = scaled[r];
            }
        }
        let kmat = g_hat.transpose() * &g_hat;
        let winv_rz = apply_winv(&layout, &scalings, &rz);

        // Predictor (affine) direction: v = -lambda.
        let u_aff = &winv_rz - &lam;
        let rhs_aff = -&rx - g_hat.transpose() * &u_aff;
        let Some(dx_aff) = solve_normal(&kmat, &rhs_aff) else {
            break;
        };
        let dz_tilde_aff = &g_hat * &dx_aff + &u_aff;
        let dz_aff = apply_winv(&layout, &scalings, &dz_tilde_aff);
        let ds_aff = -&rz - &g * &dx_aff;

        let a_s = step_to_boundary(&layout, &s, &ds_aff);
        let a_z = step_to_boundary(&layout, &z, &dz_aff);
        let alpha_aff = a_s.min(a_z).min(1.0);
        let mu_aff = (&s + alpha_aff * &ds_aff).dot(&(&z + alpha_aff * &dz_aff)) / nu;
        let sigma = (mu_aff / mu).max(0.0).min(1.0).powi(3);

        // Corrector: eta = (W^-1 ds_aff) o (W dz_aff).
        let ds_tilde_aff = apply_winv(&layout, &scalings, &ds_aff);
        let eta_corr = jordan_prod(&layout, &ds_tilde_aff, &dz_tilde_aff);
        let mut rhs_c = -jordan_prod(&layout, &lam, &lam) - eta_corr;
        rhs_c += sigma * mu * &e;
        let Some(v) = jordan_solve(&layout, &lam, &rhs_c) else {
            break;
        };

        let u = &winv_rz + &v;
        let rhs = -&rx - g_hat.transpose() * &u;
        let Some(dx) = solve_normal(&kmat, &rhs) else {
            break;
        };
        let dz = apply_winv(&layout, &scalings, &(&g_hat * &dx + &u));
        let ds = -&rz - &g * &dx;

        let b_s = step_to_boundary(&layout, &s, &ds);
        let b_z = step_to_boundary(&layout, &z, &dz);
        let alpha = (0.99 * b_s.min(b_z)).min(1.0);
        if !(alpha.is_finite() && alpha > 0.0) {
            break;
        }

        x += alpha * &dx;
        s += alpha * &ds;
        z += alpha * &dz;
        iterations += 1;
    }

    if status == SocpStatus::MaxIter {
        x = best_x;
        gap_report = best_gap;
    }
    let x = x.component_mul(&col_scale);
    Ok(SocpSolution {
        objective: p.cost.dot(&x),
        x,
        status,
        gap: gap_report,
        iterations,
    })
}

// ---------- plain-text dump / replay ----------

/// Serialize a problem in a line-oriented text block:
///
/// ```text
/// socp v1
/// n <dim>
/// cost <n floats>
/// bound <R | none>
/// cones <count>
/// cone <rows>
/// a <n floats>          (one line per row)
/// b <rows floats>       (omitted when rows = 0)
/// c <n floats>
/// d <float>
/// ```
///
/// Floats are written in shortest round-trip form, so
/// [`parse_dump`] reproduces the problem bit for bit.
pub fn dump(p: &SocpProblem) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "socp v1");
    let _ = writeln!(out, "n {}", p.n);
    let _ = writeln!(out, "cost{}", join_floats(p.cost.as_slice()));
    match p.bound {
        Some(r) => {
            let _ = writeln!(out, "bound {r}");
        }
        None => {
            let _ = writeln!(out, "bound none");
        }
    }
    let _ = writeln!(out, "cones {}", p.cones.len());
    for cone in &p.cones {
        let _ = writeln!(out, "cone {}", cone.a.nrows());
        for r in 0..cone.a.nrows() {
            let row: Vec<f64> = (0..cone.a.ncols()).map(|j| cone.a[(r, j)]).collect();
            let _ = writeln!(out, "a{}", join_floats(&row));
        }
        if cone.b.len() > 0 {
            let _ = writeln!(out, "b{}", join_floats(cone.b.as_slice()));
        }
        let _ = writeln!(out, "c{}", join_floats(cone.c.as_slice()));
        let _ = writeln!(out, "d {}", cone.d);
    }
    out
}

fn join_floats(vals: &[f64]) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    for v in vals {
        let _ = write!(s, " {v}");
    }
    s
}

/// Parse the [`dump`] format back into a problem.
pub fn parse_dump(text: &str) -> Result<SocpProblem, SocpError> {
    let err = |line: usize, msg: &str| SocpError::Parse { line, msg: msg.to_string() };
    let mut lines = text.lines().enumerate();
    let mut next = |expect: &'static str| -> Result<(usize, Vec<String>), SocpError> {
        for (i, raw) in lines.by_ref() {
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            let fields: Vec<String> = trimmed.split_whitespace().map(str::to_string).collect();
            if fields[0] != expect {
                return Err(SocpError::Parse {
                    line: i + 1,
                    msg: format!("expected `{expect}`, found `{}`", fields[0]),
                });
            }
            return Ok((i + 1, fields));
        }
        Err(SocpError::Parse { line: 0, msg: format!("missing `{expect}` line") })
    };
    let floats = |line: usize, fields: &[String], want: usize| -> Result<Vec<f64>, SocpError> {
        if fields.len() - 1 != want {
            return Err(SocpError::Parse {
                line,
                msg: format!("expected {want} values, found {}", fields.len() - 1),
            });
        }
        fields[1..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| err(line, "bad float")))
            .collect()
    };

    let (line, header) = next("socp")?;
    if header.get(1).map(String::as_str) != Some("v1") {
        return Err(err(line, "unsupported version"));
    }
    let (line, nf) = next("n")?;
    let n: usize = nf
        .get(1)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| err(line, "bad dimension"))?;
    let (line, costf) = next("cost")?;
    let cost = DVector::from_vec(floats(line, &costf, n)?);
    let (line, boundf) = next("bound")?;
    let bound = match boundf.get(1).map(String::as_str) {
        Some("none") => None,
        Some(v) => Some(v.parse::<f64>().map_err(|_| err(line, "bad bound"))?),
        None => return Err(err(line, "missing bound value")),
    };
    let (line, conesf) = next("cones")?;
    let count: usize = conesf
        .get(1)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| err(line, "bad cone count"))?;

    let mut cones = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, conef) = next("cone")?;
        let rows: usize = conef
            .get(1)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(line, "bad cone row count"))?;
        let mut a = DMatrix::zeros(rows, n);
        for r in 0..rows {
            let (line, rowf) = next("a")?;
            let vals = floats(line, &rowf, n)?;
            for (j, v) in vals.into_iter().enumerate() {
                a[(r, j)] = v;
            }
        }
        let b = if rows > 0 {
            let (line, bf) = next("b")?;
            DVector::from_vec(floats(line, &bf, rows)?)
        } else {
            DVector::zeros(0)
        };
        let (line, cf) = next("c")?;
        let c = DVector::from_vec(floats(line, &cf, n)?);
        let (line, df) = next("d")?;
        let d = floats(line, &df, 1)?[0];
        cones.push(SocpCone { a, b, c, d });
    }

    let problem = SocpProblem { n, cost, cones, bound };
    problem.validate()?;
    Ok(problem)
}
