//! Compilation to standard conic form and the primal-dual interior-point
//! iteration.

use nalgebra::{DMatrix, DVector};

use super::cones::{ConeLayout, NtScaling};
use super::{ConicError, Constraint, ConvexProgram, SolveReport, SolveStatus, SolverSettings};

/// Eigenvalues below this fraction of the largest are dropped when a
/// quadratic is factored.
const RANK_TOL: f64 = 1e-12;
/// Relative negative eigenvalue tolerated in a quadratic constraint.
const CONVEXITY_TOL: f64 = 1e-10;
/// Step length below which the iteration is considered stalled.
const MIN_STEP: f64 = 1e-12;

/// `minimize cᵀx` subject to `G x + s = h`, `s ∈ K`.
#[derive(Debug, Clone)]
pub(crate) struct ConicForm {
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub c: DVector<f64>,
    pub layout: ConeLayout,
}

/// One row `aᵀx + b` of an affine map, dense in `x`.
#[derive(Clone)]
struct Row {
    a: Vec<f64>,
    b: f64,
}

impl Row {
    fn zero(n: usize) -> Self {
        Self {
            a: vec![0.0; n],
            b: 0.0,
        }
    }

    fn from_affine(e: &super::AffineExpr, n: usize) -> Self {
        let mut r = Self::zero(n);
        for &(i, c) in &e.terms {
            r.a[i] += c;
        }
        r.b = e.constant;
        r
    }

    fn combine(&self, alpha: f64, other: &Row, beta: f64) -> Row {
        Row {
            a: self
                .a
                .iter()
                .zip(&other.a)
                .map(|(x, y)| alpha * x + beta * y)
                .collect(),
            b: alpha * self.b + beta * other.b,
        }
    }

    fn is_constant(&self) -> bool {
        self.a.iter().all(|&v| v == 0.0)
    }
}

/// Result of compiling: either a conic form or a proof that a constant
/// block is already outside its cone.
enum Compiled {
    Form(ConicForm),
    TriviallyInfeasible,
}

/// Each block is a list of affine rows that must lie in its cone (a single
/// row for the orthant).
fn compile(program: &ConvexProgram) -> Result<Compiled, ConicError> {
    let n = program.num_vars;
    let mut orthant: Vec<Row> = Vec::new();
    let mut socs: Vec<Vec<Row>> = Vec::new();

    let rotated = |u: Row, v: Row, w: Vec<Row>| -> Vec<Row> {
        let mut block = vec![u.combine(1.0, &v, 1.0), u.combine(1.0, &v, -1.0)];
        block.extend(w.into_iter().map(|r| r.combine(2.0, &Row::zero(n), 0.0)));
        block
    };

    for (idx, con) in program.constraints.iter().enumerate() {
        match con {
            Constraint::Linear { terms, upper } => {
                // upper − aᵀx ≥ 0
                let mut r = Row::zero(n);
                for &(i, a) in terms {
                    r.a[i] -= a;
                }
                r.b = *upper;
                orthant.push(r);
            }
            Constraint::Bounds {
                index,
                lower,
                upper,
            } => {
                if let Some(l) = lower {
                    let mut r = Row::zero(n);
                    r.a[*index] = 1.0;
                    r.b = -l;
                    orthant.push(r);
                }
                if let Some(u) = upper {
                    let mut r = Row::zero(n);
                    r.a[*index] = -1.0;
                    r.b = *u;
                    orthant.push(r);
                }
            }
            Constraint::Quadratic(q) => {
                let sym = (&q.quad + q.quad.transpose()) * 0.5;
                let eig = sym.symmetric_eigen();
                let max_eig = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
                let min_eig = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
                if max_eig > 0.0 && min_eig < -CONVEXITY_TOL * max_eig {
                    return Err(ConicError::NotConvex {
                        constraint: idx,
                        min_eigenvalue: min_eig,
                    });
                }
                // t = −qᵀx − r must dominate ‖F x‖² with Q = FᵀF
                let mut t = Row::zero(n);
                for i in 0..n {
                    t.a[i] = -q.lin[i];
                }
                t.b = -q.constant;
                let factors: Vec<Row> = (0..n)
                    .filter(|&j| eig.eigenvalues[j] > RANK_TOL * max_eig)
                    .map(|j| {
                        let scale = eig.eigenvalues[j].sqrt();
                        Row {
                            a: eig
                                .eigenvectors
                                .column(j)
                                .iter()
                                .map(|v| v * scale)
                                .collect(),
                            b: 0.0,
                        }
                    })
                    .collect();
                if factors.is_empty() {
                    orthant.push(t);
                } else {
                    let mut one = Row::zero(n);
                    one.b = 1.0;
                    socs.push(rotated(t, one, factors));
                }
            }
            Constraint::RotatedCone { u, v, w } => {
                let w: Vec<Row> = w.iter().map(|e| Row::from_affine(e, n)).collect();
                let u = Row::from_affine(u, n);
                let v = Row::from_affine(v, n);
                if w.is_empty() {
                    orthant.push(u);
                    orthant.push(v);
                } else {
                    socs.push(rotated(u, v, w));
                }
            }
        }
    }

    // Constant blocks carry no information about x: check and drop them.
    let mut kept_orthant = Vec::with_capacity(orthant.len());
    for r in orthant {
        if r.is_constant() {
            if r.b < 0.0 {
                return Ok(Compiled::TriviallyInfeasible);
            }
        } else {
            kept_orthant.push(r);
        }
    }
    let mut kept_socs = Vec::with_capacity(socs.len());
    for block in socs {
        if block.iter().all(Row::is_constant) {
            let tail = block[1..].iter().map(|r| r.b * r.b).sum::<f64>().sqrt();
            if block[0].b < tail {
                return Ok(Compiled::TriviallyInfeasible);
            }
        } else {
            kept_socs.push(block);
        }
    }

    let layout = ConeLayout {
        nonneg: kept_orthant.len(),
        soc: kept_socs.iter().map(Vec::len).collect(),
    };
    let m = layout.dim();
    let mut g = DMatrix::zeros(m, n);
    let mut h = DVector::zeros(m);
    let mut row = 0;
    let mut emit = |rows: &[Row], g: &mut DMatrix<f64>, h: &mut DVector<f64>| {
        let scale = rows
            .iter()
            .flat_map(|r| r.a.iter().chain(std::iter::once(&r.b)))
            .fold(0.0f64, |a, &b| a.max(b.abs()));
        let scale = if scale > 0.0 { scale } else { 1.0 };
        for r in rows {
            // s = aᵀx + b  ⇔  G = −a, h = b
            for j in 0..n {
                g[(row, j)] = -r.a[j] / scale;
            }
            h[row] = r.b / scale;
            row += 1;
        }
    };
    for r in &kept_orthant {
        emit(std::slice::from_ref(r), &mut g, &mut h);
    }
    for block in &kept_socs {
        emit(block, &mut g, &mut h);
    }
    let c = DVector::from_column_slice(&program.objective);
    let c_scale = c.amax();
    let c = if c_scale > 0.0 { c / c_scale } else { c };
    Ok(Compiled::Form(ConicForm { g, h, c, layout }))
}

#[derive(Debug, Clone)]
pub(crate) struct IpmOutcome {
    pub x: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub pres: f64,
    pub dres: f64,
    pub gap: f64,
}

fn cholesky_with_reg(h: &DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let scale = h.diagonal().amax().max(1.0);
    let mut reg = 1e-14 * scale;
    for _ in 0..8 {
        let mut hr = h.clone();
        for i in 0..hr.nrows() {
            hr[(i, i)] += reg;
        }
        if let Some(ch) = hr.cholesky() {
            return Some(ch);
        }
        reg *= 100.0;
    }
    None
}

/// Solves `H x = r` with a regularized factor and two refinement steps
/// against the unregularized matrix.
fn refined_solve(
    h: &DMatrix<f64>,
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    r: &DVector<f64>,
) -> DVector<f64> {
    let mut x = chol.solve(r);
    for _ in 0..2 {
        let res = r - h * &x;
        x += chol.solve(&res);
    }
    x
}

/// Solves `GsᵀGs dx = a + Gsᵀ b` through a thin QR factorization of `Gs`,
/// falling back to a regularized Cholesky factor of `GsᵀGs` when `Gs` is
/// rank deficient.
enum NormalSolver {
    Qr {
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    },
    Cholesky {
        h: DMatrix<f64>,
        chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    },
}

impl NormalSolver {
    fn new(gs: &DMatrix<f64>) -> Option<Self> {
        let (m, n) = gs.shape();
        if m >= n {
            let qr = gs.clone().qr();
            let r = qr.r();
            let diag_max = r.diagonal().amax();
            let diag_min = r
                .diagonal()
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b.abs()));
            if diag_max > 0.0 && diag_min > 1e-13 * diag_max {
                return Some(NormalSolver::Qr { q: qr.q(), r });
            }
        }
        let h = gs.transpose() * gs;
        let chol = cholesky_with_reg(&h)?;
        Some(NormalSolver::Cholesky { h, chol })
    }

    fn solve(&self, gs: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        match self {
            NormalSolver::Qr { q, r } => {
                // Rᵀ R dx = a + Rᵀ Qᵀ b  ⇔  R dx = R⁻ᵀ a + Qᵀ b
                let solve_once = |a: &DVector<f64>, b: &DVector<f64>| {
                    let mut y = r.tr_solve_upper_triangular(a).unwrap_or_else(|| a.clone());
                    y += q.transpose() * b;
                    r.solve_upper_triangular(&y).unwrap_or(y)
                };
                let mut dx = solve_once(a, b);
                // one refinement step on the residual of the normal equations
                let res = a + gs.transpose() * (b - gs * &dx);
                dx += solve_once(&res, &DVector::zeros(b.len()));
                dx
            }
            NormalSolver::Cholesky { h, chol } => {
                let rhs = a + gs.transpose() * b;
                refined_solve(h, chol, &rhs)
            }
        }
    }
}

pub(crate) fn interior_point(form: &ConicForm, tol: f64, max_iter: usize) -> IpmOutcome {
    let ConicForm { g, h, c, layout } = form;
    let n = g.ncols();
    let degree = layout.degree().max(1) as f64;
    let h_norm = h.amax().max(1.0);
    let c_norm = c.amax().max(1.0);

    let gtg = g.transpose() * g;
    let Some(chol0) = cholesky_with_reg(&gtg) else {
        return IpmOutcome {
            x: DVector::zeros(n),
            converged: false,
            iterations: 0,
            pres: f64::INFINITY,
            dres: f64::INFINITY,
            gap: f64::INFINITY,
        };
    };
    let mut x = refined_solve(&gtg, &chol0, &(g.transpose() * h));
    let mut s = h - g * &x;
    let shift = layout.identity_shift(&s);
    if shift >= 0.0 {
        layout.add_identity(&mut s, 1.0 + shift);
    }
    let xd = refined_solve(&gtg, &chol0, &(-c));
    let mut z = g * xd;
    let shift = layout.identity_shift(&z);
    if shift >= 0.0 {
        layout.add_identity(&mut z, 1.0 + shift);
    }
    let e = layout.identity();

    let mut best = IpmOutcome {
        x: x.clone(),
        converged: false,
        iterations: 0,
        pres: f64::INFINITY,
        dres: f64::INFINITY,
        gap: f64::INFINITY,
    };
    for iter in 0..=max_iter {
        let rx = g.transpose() * &z + c;
        let rz = g * &x + &s - h;
        let pres = rz.amax() / h_norm;
        let dres = rx.amax() / c_norm;
        let gap_abs = s.dot(&z);
        let pcost = c.dot(&x);
        let gap = gap_abs / pcost.abs().max(1.0);
        if !(pres.is_finite() && dres.is_finite() && gap.is_finite()) {
            break;
        }
        let merit = pres.max(dres).max(gap);
        if merit < best.pres.max(best.dres).max(best.gap) {
            best = IpmOutcome {
                x: x.clone(),
                converged: false,
                iterations: iter,
                pres,
                dres,
                gap,
            };
        }
        if pres <= tol && dres <= tol && gap <= tol {
            best.converged = true;
            break;
        }
        if iter == max_iter {
            break;
        }

        let scaling = NtScaling::new(layout, &s, &z);
        let lambda = scaling.apply(layout, &z);
        let lambda_sq = layout.product(&lambda, &lambda);
        let gs = scaling.apply_inv_cols(layout, g);
        let Some(kkt) = NormalSolver::new(&gs) else {
            break;
        };
        let wi_rz = scaling.apply_inv(layout, &rz);

        // Returns (dx, ds, scaled ds, scaled dz). ds is taken from the
        // primal equation itself so the primal residual contracts by (1 − α).
        let newton = |rc: &DVector<f64>| {
            let u = layout.divide(&lambda, rc);
            let rhs = -&wi_rz - &u;
            let mut dx = kkt.solve(&gs, &-&rx, &rhs);
            let mut ds = -&rz - g * &dx;
            let mut dsc = scaling.apply_inv(layout, &ds);
            let mut dzc = &u - &dsc;
            // refine against the dual equation Gᵀ dz = −r_x, which loses
            // accuracy once W is badly conditioned
            for _ in 0..2 {
                let dz = scaling.apply_inv(layout, &dzc);
                let r_d = g.transpose() * dz + &rx;
                if r_d.amax() <= 1e-3 * tol * c_norm {
                    break;
                }
                let ddx = kkt.solve(&gs, &-r_d, &DVector::zeros(rz.len()));
                let gs_ddx = &gs * &ddx;
                dx += &ddx;
                ds -= g * &ddx;
                dsc -= &gs_ddx;
                dzc += &gs_ddx;
            }
            (dx, ds, dsc, dzc)
        };

        let mu = gap_abs / degree;
        let (_, _, dsc_a, dzc_a) = newton(&(-&lambda_sq));
        let alpha_a = 1.0f64
            .min(layout.max_step(&lambda, &dsc_a))
            .min(layout.max_step(&lambda, &dzc_a));
        let sa = &lambda + &dsc_a * alpha_a;
        let za = &lambda + &dzc_a * alpha_a;
        let sigma = (sa.dot(&za) / lambda.dot(&lambda)).clamp(0.0, 1.0).powi(3);

        let rc = -&lambda_sq - layout.product(&dsc_a, &dzc_a) + &e * (sigma * mu);
        let (dx, ds, dsc, dzc) = newton(&rc);
        let alpha_max = layout
            .max_step(&lambda, &dsc)
            .min(layout.max_step(&lambda, &dzc));
        let alpha = 1.0f64.min(0.99 * alpha_max);
        if !(alpha > MIN_STEP) {
            break;
        }
        x += &dx * alpha;
        s += &ds * alpha;
        z += scaling.apply_inv(layout, &dzc) * alpha;
        if !(layout.is_interior(&s) && layout.is_interior(&z)) {
            break;
        }
    }
    best
}

/// Phase-1 program: minimize `τ` with `h − G x + τ e ⪰ 0` and `τ ≥ −1`.
fn phase1_form(form: &ConicForm) -> ConicForm {
    let ConicForm { g, h, layout, .. } = form;
    let (m, n) = g.shape();
    let l = layout.nonneg;
    let e = layout.identity();
    let mut g1 = DMatrix::zeros(m + 1, n + 1);
    let mut h1 = DVector::zeros(m + 1);
    // orthant rows, then the τ ≥ −1 row, then the cone blocks
    for i in 0..m {
        let dst = if i < l { i } else { i + 1 };
        for j in 0..n {
            g1[(dst, j)] = g[(i, j)];
        }
        g1[(dst, n)] = -e[i];
        h1[dst] = h[i];
    }
    g1[(l, n)] = -1.0;
    h1[l] = 1.0;
    let mut c1 = DVector::zeros(n + 1);
    c1[n] = 1.0;
    ConicForm {
        g: g1,
        h: h1,
        c: c1,
        layout: ConeLayout {
            nonneg: l + 1,
            soc: layout.soc.clone(),
        },
    }
}

pub(crate) fn solve(
    program: &ConvexProgram,
    settings: &SolverSettings,
) -> Result<SolveReport, ConicError> {
    let n = program.num_vars;
    let form = match compile(program)? {
        Compiled::Form(f) => f,
        Compiled::TriviallyInfeasible => {
            return Ok(SolveReport {
                status: SolveStatus::Infeasible,
                x: vec![0.0; n],
                objective: f64::NAN,
                primal_residual: f64::INFINITY,
                dual_residual: f64::INFINITY,
                gap: f64::INFINITY,
                iterations: 0,
                phase1_value: None,
            });
        }
    };
    let out = interior_point(&form, settings.tol, settings.max_iter);
    let x: Vec<f64> = out.x.iter().copied().collect();
    let mut report = SolveReport {
        status: SolveStatus::Optimal,
        objective: program.objective_value(&x),
        x,
        primal_residual: out.pres,
        dual_residual: out.dres,
        gap: out.gap,
        iterations: out.iterations,
        phase1_value: None,
    };
    if out.converged {
        return Ok(report);
    }
    let p1 = phase1_form(&form);
    let p1_out = interior_point(&p1, settings.tol, settings.max_iter);
    let tau = p1_out.x[n];
    report.phase1_value = Some(tau);
    report.status = if tau > settings.infeasibility_margin {
        SolveStatus::Infeasible
    } else {
        SolveStatus::MaxIter
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{AffineExpr, RealQuadratic};

    #[test]
    fn box_lp_hits_the_corner() {
        let mut p = ConvexProgram::new(3);
        for i in 0..3 {
            p.set_objective(i, 1.0 + i as f64);
            p.add_bounds(i, Some(0.0), Some(1.0));
        }
        let r = p.solve(&SolverSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        for v in &r.x {
            assert!(v.abs() < 1e-7, "{v}");
        }
        assert!(r.kkt_residual() <= 1e-8);
    }

    #[test]
    fn perfect_square_epigraph() {
        // minimize ε subject to θ² − 2θ + 1 ≤ ε
        let mut p = ConvexProgram::new(2);
        p.set_objective(1, 1.0);
        let mut q = RealQuadratic::zeros(2);
        q.quad[(0, 0)] = 1.0;
        q.lin[0] = -2.0;
        q.lin[1] = -1.0;
        q.constant = 1.0;
        p.add_quadratic(q);
        let r = p.solve(&SolverSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.objective.abs() < 1e-7);
        assert!((r.x[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rotated_cone_feasibility_pair() {
        // x0 · x1 ≥ 4 with x0 ≤ 1 and x1 ≤ cap
        let build = |cap: f64| {
            let mut p = ConvexProgram::new(2);
            p.set_objective(1, 1.0);
            p.add_bounds(0, None, Some(1.0));
            p.add_bounds(1, None, Some(cap));
            p.add_rotated_cone(
                AffineExpr::var(0),
                AffineExpr::var(1),
                vec![AffineExpr::constant(2.0)],
            );
            p
        };
        let ok = build(5.0).solve(&SolverSettings::default()).unwrap();
        assert_eq!(ok.status, SolveStatus::Optimal);
        assert!((ok.objective - 4.0).abs() < 1e-6);
        let bad = build(3.0).solve(&SolverSettings::default()).unwrap();
        assert_eq!(bad.status, SolveStatus::Infeasible);
    }

    #[test]
    fn constant_violation_is_detected_at_compile_time() {
        let mut p = ConvexProgram::new(1);
        p.add_bounds(0, Some(0.0), Some(1.0));
        p.add_linear(vec![], -1.0);
        let r = p.solve(&SolverSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn non_convex_quadratic_is_rejected() {
        let mut p = ConvexProgram::new(1);
        let mut q = RealQuadratic::zeros(1);
        q.quad[(0, 0)] = -1.0;
        p.add_quadratic(q);
        assert!(matches!(
            p.solve(&SolverSettings::default()),
            Err(ConicError::NotConvex { .. })
        ));
    }
}
