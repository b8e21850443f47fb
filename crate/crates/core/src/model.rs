//! Physical parameters of the driven cavity/spin-ensemble system and the
//! matrices of the covariance equation of motion
//! `dC/dt = A(t) C + C A(t)^T + G`.
//!
//! Quadratures are ordered `(X_a, Y_a, X_b, Y_b)` with `X = (a + a†)/2`,
//! `Y = (a - a†)/(2i)`, so the vacuum variance is 1/4.

use std::f64::consts::TAU;

use nalgebra::{Matrix2, Matrix4};

use crate::linalg::symmetric_eigen4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Variance of a coherent-state quadrature.
pub const VACUUM_VARIANCE: f64 = 0.25;

/// Converts an ordinary frequency in Hz to an angular rate in rad/s.
pub fn hz(f: f64) -> f64 {
    TAU * f
}

/// Converts an angular rate in rad/s to an ordinary frequency in Hz.
pub fn to_hz(omega: f64) -> f64 {
    omega / TAU
}

/// All rates of the linearised model, in rad/s, plus bath occupations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega_c: f64,
    pub omega_s: f64,
    /// Collective spin–cavity coupling.
    pub g: f64,
    /// Modulation amplitude of the spin frequency.
    pub lambda_drive: f64,
    /// Modulation (pump) frequency.
    pub omega_drive: f64,
    /// Cavity input/output coupling.
    pub gamma_c: f64,
    /// Cavity internal loss.
    pub gamma_l: f64,
    /// Effective spin damping (inhomogeneous linewidth).
    pub kappa: f64,
    /// Ambient cavity temperature, K.
    pub temperature: f64,
    /// Spin-bath mean occupation.
    pub n_s: f64,
}

impl SystemParams {
    /// The working point used throughout: ω_c/2π = 2.5 GHz, ω_s/2π = 3.5 GHz,
    /// pump at the sum frequency with Λ/2π = 1 GHz, g/2π = 3.5 MHz,
    /// γ/2π = κ/2π = 200 kHz (impedance matched), T = 10 mK and 80 % spin
    /// polarisation (n_s = 1/8).
    pub fn reference() -> Self {
        SystemParams {
            omega_c: hz(2.5e9),
            omega_s: hz(3.5e9),
            g: hz(3.5e6),
            lambda_drive: hz(1.0e9),
            omega_drive: hz(6.0e9),
            gamma_c: hz(100e3),
            gamma_l: hz(100e3),
            kappa: hz(200e3),
            temperature: 0.010,
            n_s: 0.125,
        }
    }

    /// Reference point with all damping removed and the baths emptied.
    pub fn reference_undamped() -> Self {
        SystemParams::reference().undamped()
    }

    pub fn undamped(mut self) -> Self {
        self.gamma_c = 0.0;
        self.gamma_l = 0.0;
        self.kappa = 0.0;
        self
    }

    /// Sets γ_c = γ_l = γ/2 and κ = `kappa`.
    pub fn with_damping(mut self, gamma: f64, kappa: f64) -> Self {
        self.gamma_c = gamma / 2.0;
        self.gamma_l = gamma / 2.0;
        self.kappa = kappa;
        self
    }

    pub fn with_lambda(mut self, lambda_drive: f64) -> Self {
        self.lambda_drive = lambda_drive;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_coupling(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    /// Total cavity damping γ = γ_c + γ_l.
    pub fn gamma(&self) -> f64 {
        self.gamma_c + self.gamma_l
    }

    /// Spin/cavity detuning Δ = ω_s − ω_c.
    pub fn delta(&self) -> f64 {
        self.omega_s - self.omega_c
    }

    /// Σ = ω_s + ω_c.
    pub fn sigma(&self) -> f64 {
        self.omega_s + self.omega_c
    }

    /// One drive period τ = 2π/ω.
    pub fn period(&self) -> f64 {
        TAU / self.omega_drive
    }

    /// Thermal occupation of the cavity bath at the cavity frequency.
    pub fn n_thermal(&self) -> f64 {
        thermal_occupation(self.temperature, self.omega_c).unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_c", self.omega_c),
            ("omega_s", self.omega_s),
            ("omega_drive", self.omega_drive),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("g", self.g),
            ("lambda_drive", self.lambda_drive),
            ("gamma_c", self.gamma_c),
            ("gamma_l", self.gamma_l),
            ("kappa", self.kappa),
            ("temperature", self.temperature),
            ("n_s", self.n_s),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Instantaneous spin frequency Ω(t) = ω_s + Λ sin(ωt).
pub fn spin_frequency(params: &SystemParams, t: f64) -> f64 {
    params.omega_s + params.lambda_drive * (params.omega_drive * t).sin()
}

/// Drift matrix A(t).
pub fn drift_matrix(params: &SystemParams, t: f64) -> Matrix4<f64> {
    let hg = -params.gamma() / 2.0;
    let hk = -params.kappa / 2.0;
    let wc = params.omega_c;
    let g2 = 2.0 * params.g;
    let om = spin_frequency(params, t);
    #[rustfmt::skip]
    let a = Matrix4::new(
        hg,   wc,  0.0, 0.0,
        -wc,  hg,  -g2, 0.0,
        0.0,  0.0, hk,  om,
        -g2,  0.0, -om, hk,
    );
    a
}

/// Diffusion matrix G (time independent).
pub fn diffusion_matrix(params: &SystemParams) -> Matrix4<f64> {
    let cav = params.gamma() * (2.0 * params.n_thermal() + 1.0) / 4.0;
    let spin = params.kappa * (2.0 * params.n_s + 1.0) / 4.0;
    Matrix4::from_diagonal(&nalgebra::Vector4::new(cav, cav, spin, spin))
}

/// Bose–Einstein occupation `1/(exp(ħω/k_B T) − 1)`; zero at T = 0.
pub fn thermal_occupation(temperature: f64, omega: f64) -> Result<f64> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::param("omega", format!("must be > 0, got {omega}")));
    }
    if !(temperature.is_finite() && temperature >= 0.0) {
        return Err(Error::param(
            "temperature",
            format!("must be >= 0, got {temperature}"),
        ));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let x = HBAR * omega / (K_B * temperature);
    Ok(1.0 / x.exp_m1())
}

/// Spin-bath occupation at polarisation P: `(1 − P)/(2P)`.
pub fn spin_occupation_from_polarization(polarization: f64) -> Result<f64> {
    if !(polarization > 0.0 && polarization <= 1.0) {
        return Err(Error::param(
            "polarization",
            format!("must lie in (0, 1], got {polarization}"),
        ));
    }
    Ok((1.0 - polarization) / (2.0 * polarization))
}

/// Symplectic form pairing (X_a, Y_a) and (X_b, Y_b).
pub fn symplectic_form() -> Matrix4<f64> {
    #[rustfmt::skip]
    let omega = Matrix4::new(
        0.0,  1.0, 0.0, 0.0,
        -1.0, 0.0, 0.0, 0.0,
        0.0,  0.0, 0.0, 1.0,
        0.0,  0.0, -1.0, 0.0,
    );
    omega
}

/// Which oscillator a 2×2 block belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Cavity,
    Spin,
}

/// Symmetric 4×4 covariance matrix over (X_a, Y_a, X_b, Y_b).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariance4(Matrix4<f64>);

impl Covariance4 {
    /// Wraps `m`, symmetrising it.
    pub fn new(m: Matrix4<f64>) -> Self {
        Covariance4((m + m.transpose()) * 0.5)
    }

    pub fn vacuum() -> Self {
        Covariance4(Matrix4::identity() * VACUUM_VARIANCE)
    }

    /// Uncorrelated thermal state with the given occupations.
    pub fn thermal(n_cavity: f64, n_spin: f64) -> Self {
        let a = (2.0 * n_cavity + 1.0) / 4.0;
        let b = (2.0 * n_spin + 1.0) / 4.0;
        Covariance4(Matrix4::from_diagonal(&nalgebra::Vector4::new(a, a, b, b)))
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix4<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Upper triangle in row-major order (10 entries).
    pub fn upper_triangle(&self) -> [f64; 10] {
        let mut out = [0.0; 10];
        let mut k = 0;
        for i in 0..4 {
            for j in i..4 {
                out[k] = self.0[(i, j)];
                k += 1;
            }
        }
        out
    }

    /// Variance of the quadrature with coefficient vector `q`.
    pub fn variance_along(&self, q: &nalgebra::Vector4<f64>) -> f64 {
        (q.transpose() * self.0 * q)[(0, 0)]
    }

    pub fn mode_block(&self, mode: Mode) -> Matrix2<f64> {
        let o = match mode {
            Mode::Cavity => 0,
            Mode::Spin => 2,
        };
        self.0.fixed_view::<2, 2>(o, o).into_owned()
    }

    /// Congruence `S C S^T`, symmetrised.
    pub fn transformed(&self, s: &Matrix4<f64>) -> Self {
        Covariance4::new(s * self.0 * s.transpose())
    }

    /// Determinant from the eigenvalues, which stays accurate when the
    /// spectrum spans many decades.
    pub fn determinant(&self) -> f64 {
        symmetric_eigen4(&self.0).0.iter().product()
    }

    /// Symplectic eigenvalues (ascending): the moduli of the eigenvalues of
    /// Ω⁻¹C, computed as the singular values of C^{1/2} Ω C^{1/2}.
    pub fn symplectic_eigenvalues(&self) -> [f64; 2] {
        let (vals, vecs) = symmetric_eigen4(&self.0);
        let sqrt_l = vals.map(|l| l.max(0.0).sqrt());
        let root = vecs * Matrix4::from_diagonal(&sqrt_l) * vecs.transpose();
        let m = root * symplectic_form() * root;
        let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| a.total_cmp(b));
        // singular values come in equal pairs
        [0.5 * (sv[0] + sv[1]), 0.5 * (sv[2] + sv[3])]
    }

    /// Every symplectic eigenvalue is at least 1/4 − `tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.symplectic_eigenvalues()[0] >= VACUUM_VARIANCE - tol
    }

    pub fn max_asymmetry(&self) -> f64 {
        (self.0 - self.0.transpose()).amax()
    }
}

impl From<Matrix4<f64>> for Covariance4 {
    fn from(m: Matrix4<f64>) -> Self {
        Covariance4::new(m)
    }
}

/// Diagonal vacuum covariance diag(1/4, 1/4, 1/4, 1/4).
pub fn vacuum_covariance() -> Covariance4 {
    Covariance4::vacuum()
}
