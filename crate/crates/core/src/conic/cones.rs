//! Algebra of the product cone `R^l_+ × Q^{q_1} × … × Q^{q_r}`: Jordan
//! products, step lengths and Nesterov-Todd scaling.

use nalgebra::{DMatrix, DVector};

/// Layout of a product cone: `nonneg` orthant rows first, then the
/// second-order blocks in order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeLayout {
    pub nonneg: usize,
    pub soc: Vec<usize>,
}

impl ConeLayout {
    pub fn dim(&self) -> usize {
        self.nonneg + self.soc.iter().sum::<usize>()
    }

    /// Barrier degree of the cone.
    pub fn degree(&self) -> usize {
        self.nonneg + self.soc.len()
    }

    /// `(start, len)` of every second-order block.
    pub fn soc_blocks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut start = self.nonneg;
        self.soc.iter().map(move |&len| {
            let b = (start, len);
            start += len;
            b
        })
    }

    /// Identity element `e`.
    pub fn identity(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.dim());
        for i in 0..self.nonneg {
            e[i] = 1.0;
        }
        for (start, _) in self.soc_blocks() {
            e[start] = 1.0;
        }
        e
    }

    /// Smallest `α` with `x + α e` in the cone.
    pub fn identity_shift(&self, x: &DVector<f64>) -> f64 {
        let mut alpha = f64::NEG_INFINITY;
        for i in 0..self.nonneg {
            alpha = alpha.max(-x[i]);
        }
        for (start, len) in self.soc_blocks() {
            let tail = x.rows(start + 1, len - 1).norm();
            alpha = alpha.max(tail - x[start]);
        }
        alpha
    }

    pub fn add_identity(&self, x: &mut DVector<f64>, alpha: f64) {
        for i in 0..self.nonneg {
            x[i] += alpha;
        }
        for (start, _) in self.soc_blocks() {
            x[start] += alpha;
        }
    }

    /// Jordan product `u ∘ v`.
    pub fn product(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(u.len());
        for i in 0..self.nonneg {
            out[i] = u[i] * v[i];
        }
        for (start, len) in self.soc_blocks() {
            let u0 = u[start];
            let v0 = v[start];
            let ub = u.rows(start, len);
            let vb = v.rows(start, len);
            out[start] = ub.dot(&vb);
            for j in 1..len {
                out[start + j] = u0 * v[start + j] + v0 * u[start + j];
            }
        }
        out
    }

    /// Solves `λ ∘ x = v` for `x`, with `λ` in the interior.
    pub fn divide(&self, lambda: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for i in 0..self.nonneg {
            out[i] = v[i] / lambda[i];
        }
        for (start, len) in self.soc_blocks() {
            let l0 = lambda[start];
            let l1 = lambda.rows(start + 1, len - 1);
            let v1 = v.rows(start + 1, len - 1);
            let det = soc_det(lambda.rows(start, len).as_slice());
            let x0 = (l0 * v[start] - l1.dot(&v1)) / det;
            out[start] = x0;
            for j in 1..len {
                out[start + j] = (v[start + j] - x0 * lambda[start + j]) / l0;
            }
        }
        out
    }

    /// Largest `α ≥ 0` with `x + α d` in the cone (`+∞` when unbounded),
    /// for `x` in the interior.
    pub fn max_step(&self, x: &DVector<f64>, d: &DVector<f64>) -> f64 {
        let mut alpha = f64::INFINITY;
        for i in 0..self.nonneg {
            if d[i] < 0.0 {
                alpha = alpha.min(-x[i] / d[i]);
            }
        }
        for (start, len) in self.soc_blocks() {
            alpha = alpha.min(soc_max_step(
                &x.as_slice()[start..start + len],
                &d.as_slice()[start..start + len],
            ));
        }
        alpha
    }

    pub fn is_interior(&self, x: &DVector<f64>) -> bool {
        (0..self.nonneg).all(|i| x[i] > 0.0)
            && self
                .soc_blocks()
                .all(|(s, l)| x[s] > x.rows(s + 1, l - 1).norm())
    }
}

/// `x_0² − ‖x_1‖²` computed as a product to limit cancellation.
fn soc_det(x: &[f64]) -> f64 {
    let tail = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    (x[0] - tail) * (x[0] + tail)
}

fn soc_max_step(x: &[f64], d: &[f64]) -> f64 {
    // q(α) = a α² + b α + c with c > 0; the ray leaves the cone at the
    // first positive root.
    let a = d[0] * d[0] - d[1..].iter().map(|v| v * v).sum::<f64>();
    let b = 2.0 * (x[0] * d[0] - x[1..].iter().zip(&d[1..]).map(|(p, q)| p * q).sum::<f64>());
    let c = soc_det(x).max(0.0);
    let mut best = f64::INFINITY;
    if a == 0.0 {
        if b < 0.0 {
            best = -c / b;
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (b + b.signum() * sq);
            for root in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
                if root > 0.0 {
                    best = best.min(root);
                }
            }
        }
    }
    // the first coordinate must also stay nonnegative
    if d[0] < 0.0 {
        best = best.min(-x[0] / d[0]);
    }
    best
}

#[derive(Debug, Clone)]
struct SocScale {
    beta: f64,
    w: DVector<f64>,
}

/// Nesterov-Todd scaling `W` with `W z = W⁻¹ s = λ`. Every block is
/// symmetric, so `Wᵀ = W`.
#[derive(Debug, Clone)]
pub struct NtScaling {
    diag: Vec<f64>,
    soc: Vec<SocScale>,
}

impl NtScaling {
    pub fn new(layout: &ConeLayout, s: &DVector<f64>, z: &DVector<f64>) -> Self {
        let diag = (0..layout.nonneg).map(|i| (s[i] / z[i]).sqrt()).collect();
        let soc = layout
            .soc_blocks()
            .map(|(start, len)| {
                let sb = &s.as_slice()[start..start + len];
                let zb = &z.as_slice()[start..start + len];
                let s_nrm = soc_det(sb).sqrt();
                let z_nrm = soc_det(zb).sqrt();
                let gamma = ((1.0
                    + sb.iter().zip(zb).map(|(a, b)| a * b).sum::<f64>() / (s_nrm * z_nrm))
                    / 2.0)
                    .sqrt();
                let mut w = DVector::zeros(len);
                w[0] = (sb[0] / s_nrm + zb[0] / z_nrm) / (2.0 * gamma);
                for j in 1..len {
                    w[j] = (sb[j] / s_nrm - zb[j] / z_nrm) / (2.0 * gamma);
                }
                SocScale {
                    beta: (s_nrm / z_nrm).sqrt(),
                    w,
                }
            })
            .collect();
        Self { diag, soc }
    }

    fn soc_apply(sc: &SocScale, v: &mut [f64], inverse: bool) {
        let w = sc.w.as_slice();
        let w0 = w[0];
        let tail_dot: f64 = w[1..].iter().zip(&v[1..]).map(|(a, b)| a * b).sum();
        let v0 = v[0];
        let (sign, factor) = if inverse {
            (-1.0, 1.0 / sc.beta)
        } else {
            (1.0, sc.beta)
        };
        let coef = tail_dot / (1.0 + w0);
        v[0] = factor * (w0 * v0 + sign * tail_dot);
        for j in 1..v.len() {
            v[j] = factor * (v[j] + sign * v0 * w[j] + coef * w[j]);
        }
    }

    fn apply_in_place(&self, layout: &ConeLayout, v: &mut [f64], inverse: bool) {
        for (i, d) in self.diag.iter().enumerate() {
            if inverse {
                v[i] /= d;
            } else {
                v[i] *= d;
            }
        }
        for ((start, len), sc) in layout.soc_blocks().zip(&self.soc) {
            Self::soc_apply(sc, &mut v[start..start + len], inverse);
        }
    }

    /// `W v`.
    pub fn apply(&self, layout: &ConeLayout, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        self.apply_in_place(layout, out.as_mut_slice(), false);
        out
    }

    /// `W⁻¹ v`.
    pub fn apply_inv(&self, layout: &ConeLayout, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        self.apply_in_place(layout, out.as_mut_slice(), true);
        out
    }

    /// `W⁻¹ G`, column by column.
    pub fn apply_inv_cols(&self, layout: &ConeLayout, g: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = g.clone();
        let m = g.nrows();
        let data = out.as_mut_slice();
        for col in data.chunks_mut(m) {
            self.apply_in_place(layout, col, true);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> ConeLayout {
        ConeLayout {
            nonneg: 2,
            soc: vec![3, 4],
        }
    }

    fn interior(seed: f64) -> DVector<f64> {
        let mut x = DVector::from_fn(9, |i, _| ((i as f64 + 1.0) * seed).sin());
        let l = layout();
        let shift = l.identity_shift(&x);
        l.add_identity(&mut x, shift + 0.5);
        x
    }

    #[test]
    fn scaling_maps_z_and_s_to_the_same_point() {
        let l = layout();
        for seed in [0.3, 1.1, 2.7] {
            let s = interior(seed);
            let z = interior(seed * 1.7 + 0.2);
            let w = NtScaling::new(&l, &s, &z);
            let a = w.apply(&l, &z);
            let b = w.apply_inv(&l, &s);
            assert!((&a - &b).norm() < 1e-12 * a.norm());
            // inverse really is the inverse
            let v = interior(seed + 5.0);
            let back = w.apply(&l, &w.apply_inv(&l, &v));
            assert!((back - &v).norm() < 1e-12 * v.norm());
        }
    }

    #[test]
    fn divide_inverts_product() {
        let l = layout();
        let lam = interior(0.9);
        let x = DVector::from_fn(9, |i, _| (i as f64 * 0.37).cos());
        let v = l.product(&lam, &x);
        let back = l.divide(&lam, &v);
        assert!((back - x).norm() < 1e-12);
    }

    #[test]
    fn max_step_lands_on_the_boundary() {
        let l = layout();
        let x = interior(0.4);
        let d = DVector::from_fn(9, |i, _| -((i as f64) * 1.3).cos() - 0.2);
        let a = l.max_step(&x, &d);
        assert!(a.is_finite());
        assert!(l.is_interior(&(&x + &d * (0.999 * a))));
        assert!(!l.is_interior(&(&x + &d * (1.001 * a))));
    }
}
