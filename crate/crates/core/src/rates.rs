//! Signal model: effective channels, SINR, rates, MSE, the MMSE rate
//! reformulation and the quadratic forms of the θ- and p-subproblems.
//!
//! `theta` is the diagonal of the reflection matrix, `θ_m = λ_m e^{jφ_m}`,
//! so the amplitude-phase product written elsewhere as ΛΦ is just Θ here.

use std::f64::consts::LN_2;

use thiserror::Error;

use crate::channel::ChannelSet;
use crate::quadratic::QuadraticForm;
use crate::{CMatrix, CVector, C64};

#[derive(Debug, Error, PartialEq)]
pub enum RateError {
    #[error("receive beamformer of user {user} is zero")]
    ZeroReceiver { user: usize },
    #[error("MMSE weight must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("receiver covariance is not positive definite")]
    SingularCovariance,
}

/// Noise powers and bandwidth shared by every rate computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalParams {
    /// σ², noise injected by each active RIS element (zero for a passive RIS).
    pub ris_noise: f64,
    /// δ², noise at each AP antenna.
    pub ap_noise: f64,
    pub bandwidth: f64,
}

/// `H Θ h_k + g_k`.
pub fn effective_channel(k: usize, channels: &ChannelSet, theta: &CVector) -> CVector {
    let reflected = theta.component_mul(&channels.user_to_ris[k]);
    &channels.ris_to_ap * reflected + &channels.user_to_ap[k]
}

pub fn effective_channels(channels: &ChannelSet, theta: &CVector) -> Vec<CVector> {
    (0..channels.num_users())
        .map(|k| effective_channel(k, channels, theta))
        .collect()
}

/// `‖f_kᴴ H Θ‖²`.
fn ris_noise_gain(f: &CVector, channels: &ChannelSet, theta: &CVector) -> f64 {
    let u = channels.ris_to_ap.adjoint() * f;
    u.iter()
        .zip(theta.iter())
        .map(|(a, t)| (a * t).norm_sqr())
        .sum()
}

/// SINR of user `k` under linear receiver `receivers[:, k]`.
pub fn sinr(
    k: usize,
    receivers: &CMatrix,
    theta: &CVector,
    power: &[f64],
    channels: &ChannelSet,
    params: &SignalParams,
) -> Result<f64, RateError> {
    let f = receivers.column(k).into_owned();
    if f.iter().all(|v| v.norm_sqr() == 0.0) {
        return Err(RateError::ZeroReceiver { user: k });
    }
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (i, &p) in power.iter().enumerate() {
        let gain = p * f.dotc(&effective_channel(i, channels, theta)).norm_sqr();
        if i == k {
            signal = gain;
        } else {
            interference += gain;
        }
    }
    let noise =
        params.ris_noise * ris_noise_gain(&f, channels, theta) + params.ap_noise * f.norm_squared();
    Ok(signal / (interference + noise))
}

/// `(γ_k, B log2(1 + γ_k))`.
pub fn sinr_and_rate(
    k: usize,
    receivers: &CMatrix,
    theta: &CVector,
    power: &[f64],
    channels: &ChannelSet,
    params: &SignalParams,
) -> Result<(f64, f64), RateError> {
    let g = sinr(k, receivers, theta, power, channels, params)?;
    Ok((g, params.bandwidth * (1.0 + g).log2()))
}

/// Rates of every user; a user transmitting with zero power gets rate zero.
pub fn rates(
    receivers: &CMatrix,
    theta: &CVector,
    power: &[f64],
    channels: &ChannelSet,
    params: &SignalParams,
) -> Result<Vec<f64>, RateError> {
    (0..power.len())
        .map(|k| {
            if power[k] == 0.0 {
                Ok(0.0)
            } else {
                sinr_and_rate(k, receivers, theta, power, channels, params).map(|(_, r)| r)
            }
        })
        .collect()
}

/// Mean-square error `d_k` of the recovered symbol of user `k`.
pub fn mse(
    k: usize,
    receivers: &CMatrix,
    theta: &CVector,
    power: &[f64],
    channels: &ChannelSet,
    params: &SignalParams,
) -> f64 {
    let f = receivers.column(k).into_owned();
    let mut total = 0.0;
    let mut cross = C64::new(0.0, 0.0);
    for (i, &p) in power.iter().enumerate() {
        let s = f.dotc(&effective_channel(i, channels, theta));
        total += p * s.norm_sqr();
        if i == k {
            cross = p.sqrt() * s;
        }
    }
    total +=
        params.ris_noise * ris_noise_gain(&f, channels, theta) + params.ap_noise * f.norm_squared();
    total - 2.0 * cross.re + 1.0
}

pub fn mses(
    receivers: &CMatrix,
    theta: &CVector,
    power: &[f64],
    channels: &ChannelSet,
    params: &SignalParams,
) -> Vec<f64> {
    (0..power.len())
        .map(|k| mse(k, receivers, theta, power, channels, params))
        .collect()
}

/// `B (log2 v − v d / ln 2 + 1 / ln 2)`.
pub fn mmse_rate(weight: f64, mse: f64, bandwidth: f64) -> Result<f64, RateError> {
    if !(weight > 0.0) {
        return Err(RateError::NonPositiveWeight(weight));
    }
    Ok(bandwidth * (weight.log2() - weight * mse / LN_2 + 1.0 / LN_2))
}

/// Covariance of the received signal:
/// `Σ_i p_i e_i e_iᴴ + δ² I + σ² HΘΘᴴHᴴ`, exactly Hermitian.
pub fn received_covariance(
    theta: &CVector,
    power: &[f64],
    channels: &ChannelSet,
    params: &SignalParams,
) -> CMatrix {
    let n = channels.num_antennas();
    let mut cov = CMatrix::identity(n, n) * C64::new(params.ap_noise, 0.0);
    for (e, &p) in effective_channels(channels, theta).iter().zip(power) {
        cov += e * e.adjoint() * C64::new(p, 0.0);
    }
    let h_theta = &channels.ris_to_ap * CMatrix::from_diagonal(theta);
    cov += &h_theta * h_theta.adjoint() * C64::new(params.ris_noise, 0.0);
    (&cov + cov.adjoint()) * C64::new(0.5, 0.0)
}

/// MMSE receive beamformers, one column per user:
/// `f_k = √p_k (Σ_i p_i e_i e_iᴴ + δ² I + σ² HΘΘᴴHᴴ)⁻¹ e_k`.
pub fn mmse_receivers(
    theta: &CVector,
    power: &[f64],
    channels: &ChannelSet,
    params: &SignalParams,
) -> Result<CMatrix, RateError> {
    let n = channels.num_antennas();
    let k_users = power.len();
    let eff = effective_channels(channels, theta);
    let cov = received_covariance(theta, power, channels, params);
    let chol = cov.cholesky().ok_or(RateError::SingularCovariance)?;
    let mut out = CMatrix::zeros(n, k_users);
    for k in 0..k_users {
        let col = chol.solve(&eff[k]) * C64::new(power[k].sqrt(), 0.0);
        out.set_column(k, &col);
    }
    Ok(out)
}

/// Left-hand side of the amplification power constraint:
/// `Σ_k p_k ‖Θ h_k‖² + ‖Θ‖² σ²`.
pub fn ris_power(theta: &CVector, power: &[f64], channels: &ChannelSet, ris_noise: f64) -> f64 {
    let mut total = ris_noise * theta.norm_squared();
    for (h, &p) in channels.user_to_ris.iter().zip(power) {
        total += p * theta.component_mul(h).norm_squared();
    }
    total
}

/// Per-user forms of one subproblem. The MSE is `mse.eval(x)` and the
/// MMSE-reformulated rate is `rate_offset − rate_cost.eval(x)`.
#[derive(Debug, Clone)]
pub struct UserQuadratics {
    pub mse: QuadraticForm,
    pub rate_cost: QuadraticForm,
    pub rate_offset: f64,
}

impl UserQuadratics {
    fn from_mse(mse: QuadraticForm, weight: f64, bandwidth: f64) -> Self {
        let factor = weight * bandwidth / LN_2;
        let mut rate_cost = mse.scaled(factor);
        rate_cost.constant = 0.0;
        let rate_offset = bandwidth * (weight.log2() - weight * mse.constant / LN_2 + 1.0 / LN_2);
        Self {
            mse,
            rate_cost,
            rate_offset,
        }
    }

    pub fn rate(&self, x: &CVector) -> f64 {
        self.rate_offset - self.rate_cost.eval(x)
    }

    pub fn rate_real(&self, x: &nalgebra::DVector<f64>) -> f64 {
        self.rate_offset - self.rate_cost.eval_real(x)
    }
}

/// Forms over the reflection vector θ for fixed `(F, p, v)`.
#[derive(Debug, Clone)]
pub struct ThetaQuadratics {
    pub users: Vec<UserQuadratics>,
    /// `A = Σ_i p_i h_i h_iᴴ`.
    pub user_covariance: CMatrix,
    /// `θᴴ (I ⊙ Aᵀ + σ² I) θ`, the amplification power.
    pub ris_power: QuadraticForm,
}

pub fn build_theta_quadratics(
    receivers: &CMatrix,
    power: &[f64],
    channels: &ChannelSet,
    weights: &[f64],
    params: &SignalParams,
) -> ThetaQuadratics {
    let m = channels.num_elements();
    let k_users = power.len();
    let hs = &channels.user_to_ris;
    let gs = &channels.user_to_ap;

    let mut cov = CMatrix::zeros(m, m);
    // Σ_i p_i conj(h_i) h_iᵀ + σ² I, the transposed companion of A.
    let mut cov_t = CMatrix::identity(m, m) * C64::new(params.ris_noise, 0.0);
    for (h, &p) in hs.iter().zip(power) {
        cov += h * h.adjoint() * C64::new(p, 0.0);
        cov_t += h.conjugate() * h.transpose() * C64::new(p, 0.0);
    }

    let users = (0..k_users)
        .map(|k| {
            let f = receivers.column(k).into_owned();
            let u = channels.ris_to_ap.adjoint() * &f;
            let quad = CMatrix::from_fn(m, m, |a, b| u[a] * u[b].conj() * cov_t[(a, b)]);

            let sqrt_pk = power[k].sqrt();
            let mut coef = CVector::zeros(m);
            let mut constant = params.ap_noise * f.norm_squared() + 1.0;
            for i in 0..k_users {
                let c_ki = f.dotc(&gs[i]);
                let mut w = c_ki.conj() * C64::new(power[i], 0.0);
                if i == k {
                    w -= C64::new(sqrt_pk, 0.0);
                    constant -= 2.0 * sqrt_pk * c_ki.re;
                }
                constant += power[i] * c_ki.norm_sqr();
                for a in 0..m {
                    coef[a] += w * u[a].conj() * hs[i][a];
                }
            }
            let mse = QuadraticForm::new(quad, coef.conjugate(), constant);
            UserQuadratics::from_mse(mse, weights[k], params.bandwidth)
        })
        .collect();

    let diag = CVector::from_fn(m, |a, _| C64::new(cov[(a, a)].re + params.ris_noise, 0.0));
    ThetaQuadratics {
        users,
        user_covariance: cov,
        ris_power: QuadraticForm::new(CMatrix::from_diagonal(&diag), CVector::zeros(m), 0.0),
    }
}

/// k-th standard basis vector of length `len`.
pub fn selection_vector(k: usize, len: usize) -> nalgebra::DVector<f64> {
    let mut t = nalgebra::DVector::zeros(len);
    t[k] = 1.0;
    t
}

/// Forms over `x = (√p_1, …, √p_K)` for fixed `(F, θ, v)`.
#[derive(Debug, Clone)]
pub struct PowerQuadratics {
    pub users: Vec<UserQuadratics>,
    /// `xᵀ diag(‖Θh_k‖²) x + ‖θ‖² σ²`, the amplification power.
    pub ris_power: QuadraticForm,
}

pub fn build_power_quadratics(
    receivers: &CMatrix,
    theta: &CVector,
    channels: &ChannelSet,
    weights: &[f64],
    params: &SignalParams,
) -> PowerQuadratics {
    let k_users = weights.len();
    let eff = effective_channels(channels, theta);
    let users = (0..k_users)
        .map(|k| {
            let f = receivers.column(k).into_owned();
            // C_k = Σ_i t_i |f_kᴴ e_i|² t_iᵀ, j_k = t_k f_kᴴ e_k.
            let gains = CVector::from_fn(k_users, |i, _| C64::new(f.dotc(&eff[i]).norm_sqr(), 0.0));
            let mut lin = CVector::zeros(k_users);
            lin[k] = -f.dotc(&eff[k]).conj();
            let constant = params.ris_noise * ris_noise_gain(&f, channels, theta)
                + params.ap_noise * f.norm_squared()
                + 1.0;
            let mse = QuadraticForm::new(CMatrix::from_diagonal(&gains), lin, constant);
            UserQuadratics::from_mse(mse, weights[k], params.bandwidth)
        })
        .collect();
    let diag = CVector::from_fn(k_users, |k, _| {
        C64::new(
            theta.component_mul(&channels.user_to_ris[k]).norm_squared(),
            0.0,
        )
    });
    PowerQuadratics {
        users,
        ris_power: QuadraticForm::new(
            CMatrix::from_diagonal(&diag),
            CVector::zeros(k_users),
            theta.norm_squared() * params.ris_noise,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_channels, random_cvec, rng};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn params() -> SignalParams {
        SignalParams {
            ris_noise: 0.3,
            ap_noise: 0.7,
            bandwidth: 2.0,
        }
    }

    /// Literal transcription of the SINR expression with explicit loops.
    fn sinr_literal(
        k: usize,
        f_mat: &CMatrix,
        theta: &CVector,
        p: &[f64],
        ch: &ChannelSet,
        prm: &SignalParams,
    ) -> f64 {
        let (n, m) = ch.ris_to_ap.shape();
        let eff = |i: usize| -> Vec<C64> {
            (0..n)
                .map(|r| {
                    let mut acc = ch.user_to_ap[i][r];
                    for c in 0..m {
                        acc += ch.ris_to_ap[(r, c)] * theta[c] * ch.user_to_ris[i][c];
                    }
                    acc
                })
                .collect()
        };
        let inner = |v: &[C64]| -> C64 { (0..n).map(|r| f_mat[(r, k)].conj() * v[r]).sum() };
        let num = p[k] * inner(&eff(k)).norm_sqr();
        let mut den = 0.0;
        for i in 0..p.len() {
            if i != k {
                den += p[i] * inner(&eff(i)).norm_sqr();
            }
        }
        let mut fh_h_theta = 0.0;
        for c in 0..m {
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..n {
                acc += f_mat[(r, k)].conj() * ch.ris_to_ap[(r, c)];
            }
            fh_h_theta += (acc * theta[c]).norm_sqr();
        }
        let fnorm: f64 = (0..n).map(|r| f_mat[(r, k)].norm_sqr()).sum();
        den += prm.ris_noise * fh_h_theta + prm.ap_noise * fnorm;
        num / den
    }

    #[test]
    fn effective_channel_cases() {
        let ch = ChannelSet {
            ris_to_ap: CMatrix::from_element(1, 1, C64::new(2.0, 0.0)),
            user_to_ris: vec![CVector::from_element(1, C64::new(3.0, 0.0))],
            user_to_ap: vec![CVector::from_element(1, C64::new(1.0, 0.0))],
        };
        let theta = CVector::from_element(1, C64::new(0.0, 1.0));
        assert_eq!(effective_channel(0, &ch, &theta)[0], C64::new(1.0, 6.0));
        let zero = CVector::zeros(1);
        assert_eq!(effective_channel(0, &ch, &zero)[0], C64::new(1.0, 0.0));

        let mut r = rng(3);
        let ch = random_channels(&mut r, 3, 4, 2);
        let mut theta = CVector::zeros(4);
        theta[2] = C64::new(0.4, -1.1);
        let expect = &ch.user_to_ap[1] + ch.ris_to_ap.column(2) * (theta[2] * ch.user_to_ris[1][2]);
        assert!((effective_channel(1, &ch, &theta) - expect).norm() < 1e-14);
    }

    #[test]
    fn single_user_direct_link() {
        let mut r = rng(1);
        let mut ch = random_channels(&mut r, 1, 3, 1);
        ch.user_to_ap[0] = CVector::from_element(1, C64::new(0.6, -0.8));
        let f = CMatrix::from_element(1, 1, C64::new(1.3, 0.2));
        let theta = CVector::zeros(3);
        let (g, rate) = sinr_and_rate(0, &f, &theta, &[2.0], &ch, &params()).unwrap();
        assert_relative_eq!(g, 2.0 * 1.0 / 0.7, max_relative = 1e-12);
        assert_relative_eq!(rate, 2.0 * (1.0 + g).log2(), max_relative = 1e-12);
    }

    #[test]
    fn zero_power_zero_rate() {
        let mut r = rng(2);
        let ch = random_channels(&mut r, 2, 3, 2);
        let f = CMatrix::from_fn(2, 2, |_, _| random_cvec(&mut r, 1)[0]);
        let theta = random_cvec(&mut r, 3);
        for k in 0..2 {
            let (g, rate) = sinr_and_rate(k, &f, &theta, &[0.0, 0.0], &ch, &params()).unwrap();
            assert_eq!(g, 0.0);
            assert_eq!(rate, 0.0);
        }
    }

    #[test]
    fn zero_receiver_is_an_error() {
        let mut r = rng(2);
        let ch = random_channels(&mut r, 2, 3, 2);
        let f = CMatrix::zeros(2, 2);
        let theta = random_cvec(&mut r, 3);
        assert_eq!(
            sinr(1, &f, &theta, &[1.0, 1.0], &ch, &params()),
            Err(RateError::ZeroReceiver { user: 1 })
        );
    }

    #[test]
    fn sinr_matches_literal_transcription() {
        let mut r = rng(11);
        for _ in 0..20 {
            let ch = random_channels(&mut r, 2, 2, 2);
            let f = CMatrix::from_fn(2, 2, |_, _| random_cvec(&mut r, 1)[0]);
            let theta = random_cvec(&mut r, 2);
            let p = [r.random::<f64>() + 0.1, r.random::<f64>() + 0.1];
            for k in 0..2 {
                let got = sinr(k, &f, &theta, &p, &ch, &params()).unwrap();
                let want = sinr_literal(k, &f, &theta, &p, &ch, &params());
                assert_relative_eq!(got, want, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn mse_of_zero_receiver_is_one() {
        let mut r = rng(4);
        let ch = random_channels(&mut r, 3, 4, 2);
        let theta = random_cvec(&mut r, 4);
        let d = mse(
            0,
            &CMatrix::zeros(3, 2),
            &theta,
            &[0.5, 0.2],
            &ch,
            &params(),
        );
        assert_eq!(d, 1.0);
    }

    #[test]
    fn mmse_receiver_gives_mmse_identity() {
        let mut r = rng(5);
        for _ in 0..20 {
            let ch = random_channels(&mut r, 3, 4, 3);
            let theta = random_cvec(&mut r, 4);
            let p: Vec<f64> = (0..3).map(|_| r.random::<f64>() + 0.05).collect();
            let f = mmse_receivers(&theta, &p, &ch, &params()).unwrap();
            for k in 0..3 {
                let g = sinr(k, &f, &theta, &p, &ch, &params()).unwrap();
                let d = mse(k, &f, &theta, &p, &ch, &params());
                assert_relative_eq!(d, 1.0 / (1.0 + g), max_relative = 1e-10);
                // doubling the receiver never yields a negative error
                let f2 = &f * C64::new(2.0, 0.0);
                assert!(mse(k, &f2, &theta, &p, &ch, &params()) > 0.0);
            }
        }
    }

    #[test]
    fn mmse_rate_cases() {
        assert_eq!(mmse_rate(1.0, 1.0, 5.0).unwrap(), 0.0);
        for d in [0.05, 0.3, 0.9, 1.0] {
            assert_relative_eq!(
                mmse_rate(1.0 / d, d, 3.0).unwrap(),
                -3.0 * f64::log2(d),
                max_relative = 1e-12,
                epsilon = 1e-15
            );
        }
        assert!(mmse_rate(0.0, 0.5, 1.0).is_err());
        assert!(mmse_rate(-1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn mmse_rate_peaks_at_inverse_mse() {
        for d in [0.1, 0.25, 0.6] {
            let mut best = (f64::NEG_INFINITY, 0.0);
            for i in 1..=200_000 {
                let v = i as f64 * 1e-4;
                let val = mmse_rate(v, d, 1.0).unwrap();
                if val > best.0 {
                    best = (val, v);
                }
            }
            assert!((best.1 - 1.0 / d).abs() <= 1e-4);
        }
    }

    #[test]
    fn scaling_receiver_keeps_sinr() {
        let mut r = rng(6);
        let ch = random_channels(&mut r, 3, 4, 2);
        let theta = random_cvec(&mut r, 4);
        let p = [0.4, 0.9];
        let f = CMatrix::from_fn(3, 2, |_, _| random_cvec(&mut r, 1)[0]);
        for _ in 0..10 {
            let s = random_cvec(&mut r, 1)[0] * 3.0;
            let mut g = f.clone();
            g.set_column(0, &(f.column(0) * s));
            let a = sinr(0, &f, &theta, &p, &ch, &params()).unwrap();
            let b = sinr(0, &g, &theta, &p, &ch, &params()).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn theta_forms_match_literal_mse() {
        let mut r = rng(7);
        let prm = params();
        let ch = random_channels(&mut r, 3, 5, 3);
        let p = [0.3, 0.8, 0.5];
        let f = CMatrix::from_fn(3, 3, |_, _| random_cvec(&mut r, 1)[0]);
        let v = [1.7, 0.6, 2.4];
        let q = build_theta_quadratics(&f, &p, &ch, &v, &prm);
        // θ = 0 reduces to the direct link only
        let zero = CVector::zeros(5);
        for k in 0..3 {
            let d0 = mse(k, &f, &zero, &p, &ch, &prm);
            assert_relative_eq!(q.users[k].mse.constant, d0, max_relative = 1e-12);
        }
        for _ in 0..100 {
            let theta = random_cvec(&mut r, 5) * C64::new(2.0, 0.0);
            for k in 0..3 {
                let d = mse(k, &f, &theta, &p, &ch, &prm);
                assert_relative_eq!(q.users[k].mse.eval(&theta), d, max_relative = 1e-9);
                let lit = mmse_rate(v[k], d, prm.bandwidth).unwrap();
                let got = q.users[k].rate(&theta);
                assert!((got - lit).abs() <= 1e-9 * lit.abs().max(1.0));
            }
            let lit = ris_power(&theta, &p, &ch, prm.ris_noise);
            assert!((q.ris_power.eval(&theta) - lit).abs() <= 1e-12 * lit.max(1.0));
        }
        for u in &q.users {
            assert!(u.mse.is_psd() && u.rate_cost.is_psd());
        }
        assert!(q.ris_power.is_psd());
    }

    #[test]
    fn power_forms_match_literal_mse() {
        let mut r = rng(8);
        let prm = params();
        let ch = random_channels(&mut r, 2, 4, 3);
        let theta = random_cvec(&mut r, 4);
        let f = CMatrix::from_fn(2, 3, |_, _| random_cvec(&mut r, 1)[0]);
        let v = [0.9, 1.4, 3.0];
        let q = build_power_quadratics(&f, &theta, &ch, &v, &prm);
        let zero = nalgebra::DVector::zeros(3);
        for k in 0..3 {
            let expect =
                prm.bandwidth * (v[k].log2() - v[k] * q.users[k].mse.constant / LN_2 + 1.0 / LN_2);
            assert_relative_eq!(q.users[k].rate_real(&zero), expect, max_relative = 1e-12);
        }
        let p_max = 1.5;
        for _ in 0..100 {
            let p: Vec<f64> = (0..3).map(|_| r.random::<f64>() * p_max).collect();
            let x = nalgebra::DVector::from_iterator(3, p.iter().map(|v| v.sqrt()));
            for k in 0..3 {
                let d = mse(k, &f, &theta, &p, &ch, &prm);
                assert_relative_eq!(q.users[k].mse.eval_real(&x), d, max_relative = 1e-9);
                let lit = mmse_rate(v[k], d, prm.bandwidth).unwrap();
                assert!((q.users[k].rate_real(&x) - lit).abs() <= 1e-9 * lit.abs().max(1.0));
            }
            let lit = ris_power(&theta, &p, &ch, prm.ris_noise);
            assert!((q.ris_power.eval_real(&x) - lit).abs() <= 1e-12 * lit.max(1.0));
        }
        for u in &q.users {
            assert!(u.mse.is_psd());
        }
        assert_eq!(
            selection_vector(1, 3),
            nalgebra::DVector::from_vec(vec![0.0, 1.0, 0.0])
        );
    }
}
