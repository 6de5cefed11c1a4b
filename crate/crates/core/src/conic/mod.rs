//! Small dense second-order cone programming layer.
//!
//! A [`ConvexProgram`] minimizes a linear objective over real variables
//! subject to linear inequalities, variable bounds, convex quadratic
//! inequalities and rotated second-order cones. [`ConvexProgram::solve`]
//! compiles it to `G x + s = h, s ∈ K` with `K` a product of a nonnegative
//! orthant and Lorentz cones, and runs a primal-dual interior-point method
//! with Nesterov-Todd scaling and Mehrotra correction. When the method does
//! not converge, a phase-1 program decides whether the constraints are
//! infeasible.
//!
//! Complex quadratic forms are brought into the real model with
//! [`lift_complex_quadratic`].

mod cones;
mod ipm;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadratic::{real_embedding, QuadraticForm};

pub use cones::{ConeLayout, NtScaling};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error(
        "quadratic constraint {constraint} is not convex (smallest eigenvalue {min_eigenvalue:e})"
    )]
    NotConvex {
        constraint: usize,
        min_eigenvalue: f64,
    },
}

/// Sparse affine expression `Σ coeff_i x_i + constant`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn var(index: usize) -> Self {
        Self::term(index, 1.0)
    }

    pub fn term(index: usize, coeff: f64) -> Self {
        Self {
            terms: vec![(index, coeff)],
            constant: 0.0,
        }
    }

    pub fn plus_term(mut self, index: usize, coeff: f64) -> Self {
        self.terms.push((index, coeff));
        self
    }

    pub fn plus_constant(mut self, value: f64) -> Self {
        self.constant += value;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, a)| a * x[i]).sum::<f64>() + self.constant
    }
}

/// Real quadratic `xᵀ Q x + qᵀ x + r` over the full variable vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealQuadratic {
    pub quad: DMatrix<f64>,
    pub lin: DVector<f64>,
    pub constant: f64,
}

impl RealQuadratic {
    pub fn zeros(dim: usize) -> Self {
        Self {
            quad: DMatrix::zeros(dim, dim),
            lin: DVector::zeros(dim),
            constant: 0.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        x.dot(&(&self.quad * &x)) + self.lin.dot(&x) + self.constant
    }

    pub fn add(&mut self, other: &RealQuadratic) {
        self.quad += &other.quad;
        self.lin += &other.lin;
        self.constant += other.constant;
    }

    pub fn scale(&mut self, factor: f64) {
        self.quad *= factor;
        self.lin *= factor;
        self.constant *= factor;
    }
}

/// Lifts a complex form `zᴴ Q z + 2 Re{linᴴ z} + c` with
/// `z = scale · (x[offset..offset+M] + i x[offset+M..offset+2M])` into a
/// real quadratic over a variable vector of length `dim`.
pub fn lift_complex_quadratic(
    form: &QuadraticForm,
    offset: usize,
    scale: f64,
    dim: usize,
) -> RealQuadratic {
    let m = form.dim();
    assert!(
        offset + 2 * m <= dim,
        "lifted block exceeds the variable vector"
    );
    let mut out = RealQuadratic::zeros(dim);
    let emb = real_embedding(&form.quad);
    // symmetrize so that the Hermitian part is what gets factored
    let sym = (&emb + emb.transpose()) * (0.5 * scale * scale);
    out.quad
        .view_mut((offset, offset), (2 * m, 2 * m))
        .copy_from(&sym);
    for i in 0..m {
        out.lin[offset + i] = 2.0 * scale * form.lin[i].re;
        out.lin[offset + m + i] = 2.0 * scale * form.lin[i].im;
    }
    out.constant = form.constant;
    out
}

/// Restricts a complex form to real arguments `z = scale · x[offset..offset+K]`,
/// giving `xᵀ Re(Q) x + 2 Re(lin)ᵀ x + c` on that block.
pub fn restrict_real_quadratic(
    form: &QuadraticForm,
    offset: usize,
    scale: f64,
    dim: usize,
) -> RealQuadratic {
    let k = form.dim();
    assert!(
        offset + k <= dim,
        "restricted block exceeds the variable vector"
    );
    let mut out = RealQuadratic::zeros(dim);
    for i in 0..k {
        for j in 0..k {
            let v = 0.5 * (form.quad[(i, j)].re + form.quad[(j, i)].re);
            out.quad[(offset + i, offset + j)] = v * scale * scale;
        }
        out.lin[offset + i] = 2.0 * scale * form.lin[i].re;
    }
    out.constant = form.constant;
    out
}

/// Constraint of a [`ConvexProgram`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    /// `Σ a_i x_i ≤ upper`.
    Linear {
        terms: Vec<(usize, f64)>,
        upper: f64,
    },
    /// `lower ≤ x_index ≤ upper`; a missing side is unbounded.
    Bounds {
        index: usize,
        lower: Option<f64>,
        upper: Option<f64>,
    },
    /// `xᵀ Q x + qᵀ x + r ≤ 0` with `Q` positive semidefinite.
    Quadratic(RealQuadratic),
    /// `u · v ≥ ‖w‖²`, `u ≥ 0`, `v ≥ 0`.
    RotatedCone {
        u: AffineExpr,
        v: AffineExpr,
        w: Vec<AffineExpr>,
    },
}

impl Constraint {
    /// Amount by which `x` violates the constraint (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            Constraint::Linear { terms, upper } => {
                (terms.iter().map(|&(i, a)| a * x[i]).sum::<f64>() - upper).max(0.0)
            }
            Constraint::Bounds {
                index,
                lower,
                upper,
            } => {
                let v = x[*index];
                let lo = lower.map_or(0.0, |l| (l - v).max(0.0));
                let hi = upper.map_or(0.0, |u| (v - u).max(0.0));
                lo.max(hi)
            }
            Constraint::Quadratic(q) => q.eval(x).max(0.0),
            Constraint::RotatedCone { u, v, w } => {
                let (uu, vv) = (u.eval(x), v.eval(x));
                let ww: f64 = w.iter().map(|e| e.eval(x).powi(2)).sum();
                (ww - uu * vv).max(-uu).max(-vv).max(0.0)
            }
        }
    }
}

/// `minimize objectiveᵀ x` subject to `constraints`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl ConvexProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
        }
    }

    pub fn set_objective(&mut self, index: usize, coeff: f64) {
        self.objective[index] = coeff;
    }

    pub fn add(&mut self, constraint: Constraint) {
        self.constraints.push(constraint);
    }

    pub fn add_linear(&mut self, terms: Vec<(usize, f64)>, upper: f64) {
        self.add(Constraint::Linear { terms, upper });
    }

    pub fn add_bounds(&mut self, index: usize, lower: Option<f64>, upper: Option<f64>) {
        self.add(Constraint::Bounds {
            index,
            lower,
            upper,
        });
    }

    pub fn add_quadratic(&mut self, q: RealQuadratic) {
        self.add(Constraint::Quadratic(q));
    }

    pub fn add_rotated_cone(&mut self, u: AffineExpr, v: AffineExpr, w: Vec<AffineExpr>) {
        self.add(Constraint::RotatedCone { u, v, w });
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest constraint violation at `x`, in the units of the model.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(0.0, f64::max)
    }

    /// JSON dump for debugging a failed solve.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        let n = self.num_vars;
        if n == 0 {
            return Err(ConicError::Malformed("no variables".into()));
        }
        if self.objective.len() != n {
            return Err(ConicError::Malformed(format!(
                "objective has {} entries for {n} variables",
                self.objective.len()
            )));
        }
        let check_index = |i: usize| {
            if i < n {
                Ok(())
            } else {
                Err(ConicError::Malformed(format!(
                    "variable index {i} out of range"
                )))
            }
        };
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ConicError::Malformed(format!("non-finite {what}")))
            }
        };
        for c in self.objective.iter() {
            finite(*c, "objective coefficient")?;
        }
        for con in &self.constraints {
            match con {
                Constraint::Linear { terms, upper } => {
                    finite(*upper, "right-hand side")?;
                    for &(i, a) in terms {
                        check_index(i)?;
                        finite(a, "coefficient")?;
                    }
                }
                Constraint::Bounds {
                    index,
                    lower,
                    upper,
                } => {
                    check_index(*index)?;
                    for b in lower.iter().chain(upper.iter()) {
                        finite(*b, "bound")?;
                    }
                }
                Constraint::Quadratic(q) => {
                    if q.quad.nrows() != n || q.quad.ncols() != n || q.lin.len() != n {
                        return Err(ConicError::Malformed(
                            "quadratic constraint has wrong dimensions".into(),
                        ));
                    }
                    finite(q.constant, "constant")?;
                    if q.quad.iter().chain(q.lin.iter()).any(|v| !v.is_finite()) {
                        return Err(ConicError::Malformed("non-finite quadratic".into()));
                    }
                }
                Constraint::RotatedCone { u, v, w } => {
                    for e in std::iter::once(u).chain(std::iter::once(v)).chain(w.iter()) {
                        finite(e.constant, "constant")?;
                        for &(i, a) in &e.terms {
                            check_index(i)?;
                            finite(a, "coefficient")?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, settings: &SolverSettings) -> Result<SolveReport, ConicError> {
        self.validate()?;
        ipm::solve(self, settings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Bound on the relative primal residual, dual residual and gap.
    pub tol: f64,
    pub max_iter: usize,
    /// Phase-1 optimum above which the constraints are declared infeasible.
    pub infeasibility_margin: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            infeasibility_margin: 1e-6,
        }
    }
}

impl SolverSettings {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Relative primal residual of the compiled conic form.
    pub primal_residual: f64,
    /// Relative dual residual of the compiled conic form.
    pub dual_residual: f64,
    /// Relative duality gap.
    pub gap: f64,
    pub iterations: usize,
    /// Optimal value of the phase-1 program, when it was run.
    pub phase1_value: Option<f64>,
}

impl SolveReport {
    pub fn kkt_residual(&self) -> f64 {
        self.primal_residual.max(self.dual_residual).max(self.gap)
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}
