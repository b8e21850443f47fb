//! Two-stage control that moves joint (two-mode) squeezing into the individual
//! oscillators: a detuning stage rotating the spin quadratures, then an
//! exchange stage rotating (X_a, X_b) and (Y_a, Y_b) together.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Covariance4;
use crate::quadrature::{canonical_sign, system_metrics, QuadratureSpectrum};

/// Variances closer than this (relative) count as one degenerate pair.
pub const DEGENERACY_TOL: f64 = 1e-3;
const SINGLE_MODE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    SingleMode,
    MaximalTwoMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSchedule {
    pub delta_psi: f64,
    pub delta_theta: f64,
    /// Detuning used for the first stage, rad/s.
    pub detuning: f64,
    /// Exchange coupling used for the second stage, rad/s.
    pub g_used: f64,
    pub durations: (f64, f64),
    pub target: Target,
}

impl ProtocolSchedule {
    pub fn identity(g: f64, detuning: f64) -> Self {
        ProtocolSchedule {
            delta_psi: 0.0,
            delta_theta: 0.0,
            detuning,
            g_used: g,
            durations: (0.0, 0.0),
            target: Target::SingleMode,
        }
    }

    pub fn total_duration(&self) -> f64 {
        self.durations.0 + self.durations.1
    }
}

/// Orthogonal matrix for the spin-phase rotation by `phi`.
pub fn detuning_matrix(phi: f64) -> Matrix4<f64> {
    let (s, c) = phi.sin_cos();
    let mut r = Matrix4::identity();
    r[(2, 2)] = c;
    r[(2, 3)] = s;
    r[(3, 2)] = -s;
    r[(3, 3)] = c;
    r
}

/// Orthogonal matrix for the exchange rotation by `theta`.
pub fn beamsplitter_matrix(theta: f64) -> Matrix4<f64> {
    let (s, c) = theta.sin_cos();
    let mut r = Matrix4::zeros();
    for (a, b) in [(0, 2), (1, 3)] {
        r[(a, a)] = c;
        r[(a, b)] = s;
        r[(b, a)] = -s;
        r[(b, b)] = c;
    }
    r
}

/// Rotates the spin quadratures: an axis with spin phase ψ ends up at ψ + `phi`.
pub fn detuning_rotation(c: &Covariance4, phi: f64) -> Covariance4 {
    c.transformed(&detuning_matrix(phi))
}

/// Mixes the oscillators: an axis with mixing angle θ ends up at θ + `theta`.
pub fn beamsplitter_rotation(c: &Covariance4, theta: f64) -> Covariance4 {
    c.transformed(&beamsplitter_matrix(theta))
}

/// (θ, φ, ψ) of an axis written as
/// cosθ(cosφ X_a − sinφ Y_a) − sinθ(cosψ X_b − sinψ Y_b).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAngles {
    pub theta: f64,
    pub phi: f64,
    pub psi: f64,
}

pub fn axis_angles(q: &Vector4<f64>) -> AxisAngles {
    let (xa, ya, xb, yb) = (q[0], q[1], q[2], q[3]);
    let a = xa.hypot(ya);
    let b = xb.hypot(yb);
    let theta = b.atan2(a);
    let phi = (-ya).atan2(xa);
    // the spin phase is meaningless when the axis has no spin component
    let psi = if b <= SINGLE_MODE_EPS * a { phi } else { yb.atan2(-xb) };
    AxisAngles { theta, phi, psi }
}

/// Fraction of an axis's weight carried by the more heavily weighted mode.
pub fn single_mode_weight(q: &Vector4<f64>) -> f64 {
    let a = q[0] * q[0] + q[1] * q[1];
    let b = q[2] * q[2] + q[3] * q[3];
    a.max(b) / (a + b)
}

/// The two most-squeezed axes, with the one to convert first in slot 0.
///
/// A (near-)degenerate pair only fixes a plane, so the first axis is taken
/// as the direction in that plane with the largest X_a weight (the
/// projection of X_a onto it) and the second as its in-plane complement.
/// When X_a is orthogonal to the plane the axis with more mode-a weight
/// goes first.
pub fn conversion_axes(spectrum: &QuadratureSpectrum) -> (Vector4<f64>, Vector4<f64>) {
    let (v0, q0) = spectrum.pairs[0];
    let (v1, q1) = spectrum.pairs[1];
    let degenerate = (v1 - v0).abs() <= DEGENERACY_TOL * v0.abs().max(f64::MIN_POSITIVE);
    if !degenerate {
        return (q0, q1);
    }
    let (c0, c1) = (q0[0], q1[0]);
    let norm = c0.hypot(c1);
    if norm > 1e-9 {
        let first = canonical_sign((q0 * c0 + q1 * c1) / norm);
        let second = canonical_sign((q1 * c0 - q0 * c1) / norm);
        return (first, second);
    }
    let weight = |q: &Vector4<f64>| q[0] * q[0] + q[1] * q[1];
    if weight(&q1) > weight(&q0) {
        (q1, q0)
    } else {
        (q0, q1)
    }
}

/// Plans the rotations for `spectrum`'s most-squeezed axis. `g` sets the
/// exchange rate; the detuning defaults to the value that makes both stages
/// equally long.
pub fn plan_conversion(
    spectrum: &QuadratureSpectrum,
    target: Target,
    g: f64,
    detuning: Option<f64>,
) -> Result<ProtocolSchedule> {
    if !(g > 0.0) {
        return Err(Error::param("g", "exchange coupling must be positive"));
    }
    let (q, _) = conversion_axes(spectrum);
    let ang = axis_angles(&q);
    let single_mode = ang.theta.sin().abs() <= SINGLE_MODE_EPS || ang.theta.cos().abs() <= SINGLE_MODE_EPS;
    if single_mode && target == Target::SingleMode {
        return Err(Error::SingleModeAxis);
    }
    let delta_psi = (ang.phi - ang.psi).rem_euclid(TAU);
    let goal = match target {
        Target::SingleMode => 0.0,
        Target::MaximalTwoMode => FRAC_PI_4,
    };
    // θ and θ + π describe the same axis up to sign
    let mut delta_theta = (goal - ang.theta).rem_euclid(PI);
    if delta_theta > PI - 1e-12 {
        delta_theta = 0.0;
    }
    let t2 = delta_theta / g;
    let detuning = match detuning {
        Some(d) => d,
        None if delta_theta > 0.0 => delta_psi * g / delta_theta,
        None => g,
    };
    let t1 = if delta_psi == 0.0 { 0.0 } else { delta_psi / detuning.abs() };
    if !(t1.is_finite() && t1 >= 0.0) {
        return Err(Error::param("detuning", "must be non-zero when a spin rotation is needed"));
    }
    Ok(ProtocolSchedule {
        delta_psi,
        delta_theta,
        detuning: detuning.abs(),
        g_used: g,
        durations: (t1, t2),
        target,
    })
}

/// One sampled point along the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    /// 1 = detuning stage, 2 = exchange stage.
    pub stage: u8,
    /// Rotation angle reached within the stage, rad.
    pub angle: f64,
    /// Elapsed protocol time, s.
    pub time: f64,
    /// Standard deviations along the two initially squeezed axes.
    pub sd_initial: [f64; 2],
    /// Standard deviations along the two axes they are carried onto.
    pub sd_final: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome {
    pub covariance: Covariance4,
    pub path: Vec<PathPoint>,
    pub va_min: f64,
    pub vb_min: f64,
}

pub const SUBSTEPS_PER_STAGE: usize = 200;

/// Applies the detuning stage then the exchange stage to `c`, sampling the
/// standard deviations of the tracked quadratures along the way.
pub fn execute_schedule(
    c: &Covariance4,
    spectrum: &QuadratureSpectrum,
    schedule: &ProtocolSchedule,
) -> ProtocolOutcome {
    let (q1, q2) = conversion_axes(spectrum);
    let total = beamsplitter_matrix(schedule.delta_theta) * detuning_matrix(schedule.delta_psi);
    let (f1, f2) = (total * q1, total * q2);
    let sd = |m: &Covariance4, q: &Vector4<f64>| m.variance_along(q).max(0.0).sqrt();
    let mut path = Vec::with_capacity(2 * SUBSTEPS_PER_STAGE + 2);
    let mut record = |stage: u8, angle: f64, time: f64, m: &Covariance4| {
        path.push(PathPoint {
            stage,
            angle,
            time,
            sd_initial: [sd(m, &q1), sd(m, &q2)],
            sd_final: [sd(m, &f1), sd(m, &f2)],
        });
    };
    let n = SUBSTEPS_PER_STAGE;
    let (t1, t2) = schedule.durations;
    for i in 0..=n {
        let a = schedule.delta_psi * i as f64 / n as f64;
        record(1, a, t1 * i as f64 / n as f64, &detuning_rotation(c, a));
    }
    let mid = detuning_rotation(c, schedule.delta_psi);
    for i in 1..=n {
        let a = schedule.delta_theta * i as f64 / n as f64;
        record(2, a, t1 + t2 * i as f64 / n as f64, &beamsplitter_rotation(&mid, a));
    }
    let out = beamsplitter_rotation(&mid, schedule.delta_theta);
    let m = system_metrics(&out);
    ProtocolOutcome {
        covariance: out,
        path,
        va_min: m.va_min,
        vb_min: m.vb_min,
    }
}
