//! Steady-state model of the pumped system as a resonant non-degenerate
//! parametric amplifier with rate k: gain, output noise, added noise and
//! noise temperature.

use std::f64::consts::LOG10_E;

use nalgebra::{Matrix4, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate, StepControl};
use crate::model::{diffusion_matrix, Covariance4, SystemParams, HBAR, K_B};

/// k = Ṡ/(5·log₁₀e) for a dB growth rate Ṡ in dB/s.
pub fn paramp_rate_from_db_rate(s_dot: f64) -> Result<f64> {
    if !(s_dot >= 0.0) {
        return Err(Error::param("s_dot", format!("must be non-negative, got {s_dot}")));
    }
    Ok(s_dot / (5.0 * LOG10_E))
}

/// ξ = k/√(γκ) and whether k is below threshold.
pub fn stability_margin(k: f64, gamma: f64, kappa: f64) -> Result<(bool, f64)> {
    if !(gamma > 0.0 && kappa > 0.0) {
        return Err(Error::param("gamma/kappa", "both must be positive"));
    }
    let xi = k / (gamma * kappa).sqrt();
    Ok((xi < 1.0, xi))
}

/// G_ss = [(γ_c − γ_l)κ + k²] / [(γ_c + γ_l)κ − k²].
pub fn steady_state_gain(gamma_c: f64, gamma_l: f64, kappa: f64, k: f64) -> Result<f64> {
    let gamma = gamma_c + gamma_l;
    let den = gamma * kappa - k * k;
    if !(den > 0.0) {
        return Err(Error::Unstable {
            spectral_radius: k / (gamma * kappa).sqrt(),
        });
    }
    Ok(((gamma_c - gamma_l) * kappa + k * k) / den)
}

fn check_below_threshold(params: &SystemParams, k: f64) -> Result<()> {
    let (stable, xi) = stability_margin(k, params.gamma(), params.kappa)?;
    if !stable {
        return Err(Error::Unstable { spectral_radius: xi });
    }
    Ok(())
}

/// Output noise spectrum S(ν) from the added-noise inputs, ν in rad/s.
pub fn output_noise_spectrum(nu: f64, params: &SystemParams, k: f64) -> Result<f64> {
    check_below_threshold(params, k)?;
    let (gc, gl, kap) = (params.gamma_c, params.gamma_l, params.kappa);
    let gamma = params.gamma();
    let nt = params.n_thermal();
    let num = (kap * kap + 4.0 * nu * nu) * gl * (2.0 * nt + 1.0)
        + k * k * kap * (2.0 * params.n_s + 1.0);
    let den = ((4.0 * nu * nu + k * k) - gamma * kap).powi(2) / 2.0
        - nu * nu * (gamma + kap).powi(2);
    if !(den > 0.0) {
        return Err(Error::Singular("noise spectrum denominator"));
    }
    Ok((gc / 2.0) * num / den)
}

/// S(0) in its closed resonant form, (γ_c/2)[κ²γ_l(2n_T+1) + k²κ(2n_s+1)]/(k² − γκ)².
pub fn resonant_noise_density(params: &SystemParams, k: f64) -> Result<f64> {
    check_below_threshold(params, k)?;
    let nt = params.n_thermal();
    let num = params.kappa.powi(2) * params.gamma_l * (2.0 * nt + 1.0)
        + k * k * params.kappa * (2.0 * params.n_s + 1.0);
    Ok(params.gamma_c / 2.0 * num / (k * k - params.gamma() * params.kappa).powi(2))
}

/// n_add = η[(γ_l/γ)(2n_T+1) + ξ²(2n_s+1)]/[η + ξ² − γ_l/γ]² − 1/2.
///
/// Finite at ξ = 1 itself; only ξ > 1 is refused.
pub fn added_noise_photons(params: &SystemParams, k: f64) -> Result<f64> {
    let gamma = params.gamma();
    let (_, xi) = stability_margin(k, gamma, params.kappa)?;
    if xi > 1.0 {
        return Err(Error::Unstable { spectral_radius: xi });
    }
    let eta = params.gamma_c / gamma;
    let loss = params.gamma_l / gamma;
    let nt = params.n_thermal();
    let den = (eta + xi * xi - loss).powi(2);
    if den == 0.0 {
        return Err(Error::Singular("added-noise denominator"));
    }
    Ok(eta * (loss * (2.0 * nt + 1.0) + xi * xi * (2.0 * params.n_s + 1.0)) / den - 0.5)
}

/// T_amp = (ħω_c/k_B)/ln(1/n_add + 1), with T_amp = 0 at n_add = 0.
pub fn noise_temperature(n_add: f64, omega_c: f64) -> Result<f64> {
    if !(n_add >= 0.0) {
        return Err(Error::param("n_add", format!("must be non-negative, got {n_add}")));
    }
    if n_add == 0.0 {
        return Ok(0.0);
    }
    Ok(HBAR * omega_c / K_B / (1.0 / n_add).ln_1p())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub k: f64,
    pub xi: f64,
    pub eta: f64,
    pub n_thermal: f64,
    pub n_s: f64,
    pub gain_ss: Option<f64>,
    pub n_add: Option<f64>,
    pub t_amp: Option<f64>,
    pub stable: bool,
    pub margin: f64,
}

pub fn noise_report(params: &SystemParams, k: f64) -> Result<NoiseReport> {
    let (stable, xi) = stability_margin(k, params.gamma(), params.kappa)?;
    let gain_ss = steady_state_gain(params.gamma_c, params.gamma_l, params.kappa, k).ok();
    let n_add = added_noise_photons(params, k).ok();
    let t_amp = match n_add {
        Some(n) if n >= 0.0 => noise_temperature(n, params.omega_c).ok(),
        _ => None,
    };
    Ok(NoiseReport {
        k,
        xi,
        eta: params.gamma_c / params.gamma(),
        n_thermal: params.n_thermal(),
        n_s: params.n_s,
        gain_ss,
        n_add,
        t_amp,
        stable,
        margin: 1.0 - xi,
    })
}

/// Drift of the resonant paramp in the frame rotating with both modes:
/// X_a ↔ X_b coupled by +k/2, Y_a ↔ Y_b by −k/2.
pub fn paramp_drift(params: &SystemParams, k: f64) -> Matrix4<f64> {
    let (g2, k2, h) = (params.gamma() / 2.0, params.kappa / 2.0, k / 2.0);
    Matrix4::new(
        -g2, 0.0, h, 0.0, //
        0.0, -g2, 0.0, -h, //
        h, 0.0, -k2, 0.0, //
        0.0, -h, 0.0, -k2,
    )
}

/// Solves A C + C Aᵀ + G = 0.
pub fn lyapunov_steady_state(a: &Matrix4<f64>, g: &Matrix4<f64>) -> Result<Covariance4> {
    // column-major vec: vec(AC) = (I⊗A)vec C, vec(CAᵀ) = (A⊗I)vec C
    let mut m = SMatrix::<f64, 16, 16>::zeros();
    for i in 0..4 {
        for j in 0..4 {
            for r in 0..4 {
                m[(4 * r + i, 4 * r + j)] += a[(i, j)];
                m[(4 * i + r, 4 * j + r)] += a[(i, j)];
            }
        }
    }
    let rhs = -SMatrix::<f64, 16, 1>::from_column_slice(g.as_slice());
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("Lyapunov system"))?;
    Ok(Covariance4::new(Matrix4::from_column_slice(sol.as_slice())))
}

/// Steady covariance of the paramp model with the baths of `params`.
pub fn paramp_steady_state(params: &SystemParams, k: f64) -> Result<Covariance4> {
    check_below_threshold(params, k)?;
    lyapunov_steady_state(&paramp_drift(params, k), &diffusion_matrix(params))
}

/// Integrates the paramp-model covariance from `c0` over `duration`.
pub fn simulate_paramp(
    params: &SystemParams,
    k: f64,
    c0: &Covariance4,
    duration: f64,
    rel_tol: f64,
) -> Result<Covariance4> {
    let a = paramp_drift(params, k);
    let g = diffusion_matrix(params);
    let mut y0 = [0.0; 16];
    y0.copy_from_slice(c0.matrix().as_slice());
    let ctl = StepControl::new(rel_tol, 1e-14);
    let (y, _) = integrate(
        |_t, y: &[f64; 16], dy: &mut [f64; 16]| {
            let c = Matrix4::from_column_slice(y);
            let ac = a * c;
            dy.copy_from_slice((ac + ac.transpose() + g).as_slice());
        },
        0.0,
        duration,
        y0,
        &ctl,
    )?;
    Ok(Covariance4::new(Matrix4::from_column_slice(&y)))
}
