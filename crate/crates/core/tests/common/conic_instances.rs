//! Random and hand-built conic programs with known feasibility.

use aris_mec::conic::{AffineExpr, Constraint, ConvexProgram, RealQuadratic};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_affine(rng: &mut ChaCha8Rng, n: usize) -> AffineExpr {
    AffineExpr {
        terms: (0..n).map(|i| (i, normal(rng))).collect(),
        constant: normal(rng),
    }
}

/// Random program inside the box `[-2, 2]^n` with a strictly feasible point,
/// which is returned alongside.
pub fn random_program(rng: &mut ChaCha8Rng, n: usize) -> (ConvexProgram, Vec<f64>) {
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut p = ConvexProgram::new(n);
    for i in 0..n {
        p.set_objective(i, normal(rng));
        p.add_bounds(i, Some(-2.0), Some(2.0));
    }
    for _ in 0..rng.random_range(1..4) {
        let rank = rng.random_range(1..=n);
        let a = DMatrix::from_fn(n, rank, |_, _| normal(rng));
        let mut q = RealQuadratic {
            quad: &a * a.transpose(),
            lin: DVector::from_fn(n, |_, _| normal(rng)),
            constant: 0.0,
        };
        q.constant = -q.eval(&x0) - rng.random_range(0.1..1.0);
        p.add_quadratic(q);
    }
    for _ in 0..rng.random_range(0..3) {
        let w: Vec<AffineExpr> = (0..rng.random_range(1..4))
            .map(|_| random_affine(rng, n))
            .collect();
        let mut v = random_affine(rng, n);
        v.constant += rng.random_range(0.5..2.0) - v.eval(&x0);
        let mut u = random_affine(rng, n);
        let ww: f64 = w.iter().map(|e| e.eval(&x0).powi(2)).sum();
        u.constant += ww / v.eval(&x0) + rng.random_range(0.1..1.0) - u.eval(&x0);
        p.add_rotated_cone(u, v, w);
    }
    for _ in 0..rng.random_range(0..3) {
        let terms: Vec<(usize, f64)> = (0..n).map(|i| (i, normal(rng))).collect();
        let lhs: f64 = terms.iter().map(|&(i, a)| a * x0[i]).sum();
        p.add_linear(terms, lhs + rng.random_range(0.1..1.0));
    }
    (p, x0)
}

/// Minimum of the objective over feasible points of successively refined
/// 19^4 grids (seven stages, under 10^6 evaluations in total). Each stage
/// recenters a box of ±2 grid steps on the best feasible point so far.
pub fn zoom_grid_minimum(p: &ConvexProgram, lo: [f64; 4], hi: [f64; 4]) -> f64 {
    const PTS: usize = 19;
    let (mut lo_s, mut hi_s) = (lo, hi);
    let mut best = (f64::INFINITY, [0.0; 4]);
    for _stage in 0..7 {
        let step: Vec<f64> = (0..4)
            .map(|d| (hi_s[d] - lo_s[d]) / (PTS - 1) as f64)
            .collect();
        let mut x = [0.0; 4];
        for i0 in 0..PTS {
            x[0] = lo_s[0] + step[0] * i0 as f64;
            for i1 in 0..PTS {
                x[1] = lo_s[1] + step[1] * i1 as f64;
                for i2 in 0..PTS {
                    x[2] = lo_s[2] + step[2] * i2 as f64;
                    for i3 in 0..PTS {
                        x[3] = lo_s[3] + step[3] * i3 as f64;
                        let f = p.objective_value(&x);
                        if f < best.0 && p.max_violation(&x) == 0.0 {
                            best = (f, x);
                        }
                    }
                }
            }
        }
        assert!(best.0.is_finite(), "grid found no feasible point");
        for d in 0..4 {
            lo_s[d] = (best.1[d] - 2.0 * step[d]).max(lo[d]);
            hi_s[d] = (best.1[d] + 2.0 * step[d]).min(hi[d]);
        }
    }
    best.0
}

/// Renames variable `i` to `perm[i]`.
pub fn permute(p: &ConvexProgram, perm: &[usize]) -> ConvexProgram {
    let n = p.num_vars;
    let map_affine = |e: &AffineExpr| AffineExpr {
        terms: e.terms.iter().map(|&(i, a)| (perm[i], a)).collect(),
        constant: e.constant,
    };
    let mut q = ConvexProgram::new(n);
    for i in 0..n {
        q.objective[perm[i]] = p.objective[i];
    }
    for c in &p.constraints {
        q.add(match c {
            Constraint::Linear { terms, upper } => Constraint::Linear {
                terms: terms.iter().map(|&(i, a)| (perm[i], a)).collect(),
                upper: *upper,
            },
            Constraint::Bounds {
                index,
                lower,
                upper,
            } => Constraint::Bounds {
                index: perm[*index],
                lower: *lower,
                upper: *upper,
            },
            Constraint::Quadratic(r) => {
                let mut out = RealQuadratic::zeros(n);
                for i in 0..n {
                    out.lin[perm[i]] = r.lin[i];
                    for j in 0..n {
                        out.quad[(perm[i], perm[j])] = r.quad[(i, j)];
                    }
                }
                out.constant = r.constant;
                Constraint::Quadratic(out)
            }
            Constraint::RotatedCone { u, v, w } => Constraint::RotatedCone {
                u: map_affine(u),
                v: map_affine(v),
                w: w.iter().map(map_affine).collect(),
            },
        });
    }
    q
}

fn ball(n: usize, center: &[f64], radius: f64) -> RealQuadratic {
    // ‖x − c‖² − r² ≤ 0
    let mut q = RealQuadratic::zeros(n);
    for i in 0..center.len() {
        q.quad[(i, i)] = 1.0;
        q.lin[i] = -2.0 * center[i];
    }
    q.constant = center.iter().map(|c| c * c).sum::<f64>() - radius * radius;
    q
}

/// Ten small programs whose constraints cannot be satisfied.
pub fn infeasible_programs() -> Vec<(&'static str, ConvexProgram)> {
    let mut out = Vec::new();

    let mut p = ConvexProgram::new(1);
    p.set_objective(0, 1.0);
    p.add_bounds(0, Some(1.0), None);
    p.add_bounds(0, None, Some(0.0));
    out.push(("crossed bounds", p));

    let mut p = ConvexProgram::new(2);
    p.set_objective(0, 1.0);
    p.add_bounds(0, Some(0.0), None);
    p.add_bounds(1, Some(0.0), None);
    p.add_linear(vec![(0, 1.0), (1, 1.0)], -1.0);
    out.push(("negative sum of nonnegatives", p));

    let mut p = ConvexProgram::new(1);
    let mut q = RealQuadratic::zeros(1);
    q.quad[(0, 0)] = 1.0;
    q.constant = 1.0;
    p.add_quadratic(q);
    out.push(("square below minus one", p));

    let mut p = ConvexProgram::new(2);
    p.add_quadratic(ball(2, &[0.0, 0.0], 1.0));
    p.add_bounds(0, Some(2.0), None);
    out.push(("unit disc beyond x = 2", p));

    let mut p = ConvexProgram::new(2);
    p.add_bounds(0, None, Some(1.0));
    p.add_bounds(1, None, Some(3.0));
    p.add_rotated_cone(
        AffineExpr::var(0),
        AffineExpr::var(1),
        vec![AffineExpr::constant(2.0)],
    );
    out.push(("hyperbola outside the box", p));

    let mut p = ConvexProgram::new(2);
    p.add_quadratic(ball(2, &[0.0, 0.0], 1.0));
    p.add_quadratic(ball(2, &[3.0, 0.0], 1.0));
    out.push(("disjoint discs", p));

    let mut p = ConvexProgram::new(1);
    p.add_bounds(0, Some(-5.0), Some(5.0));
    p.add_rotated_cone(
        AffineExpr::var(0),
        AffineExpr::constant(-1.0),
        vec![AffineExpr::constant(1.0)],
    );
    out.push(("rotated cone with negative side", p));

    let mut p = ConvexProgram::new(2);
    p.add_bounds(0, Some(1.0), None);
    p.add_bounds(1, Some(1.0), None);
    p.add_linear(vec![(0, 1.0), (1, 1.0)], 1.5);
    out.push(("orthant corner cut off", p));

    let mut p = ConvexProgram::new(2);
    p.set_objective(1, 1.0);
    let mut q = RealQuadratic::zeros(2);
    q.quad[(0, 0)] = 1.0;
    q.lin[0] = -2.0;
    q.lin[1] = -1.0;
    q.constant = 1.0;
    p.add_quadratic(q);
    p.add_bounds(1, None, Some(-0.5));
    out.push(("epigraph capped below its minimum", p));

    let mut p = ConvexProgram::new(3);
    p.add_quadratic(ball(3, &[0.0, 0.0, 0.0], 1.0));
    p.add_linear(vec![(0, -1.0), (1, -1.0), (2, -1.0)], -2.0);
    out.push(("ball and distant half-space", p));

    out
}
