//! First-order resonance analysis of the modulated spin frequency: the
//! envelope function F(x, y, t), the harmonic resonance table and the
//! collective-spin ladder coefficients.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bessel::bessel_j_orders;
use crate::error::{Error, Result};
use crate::model::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Sum,
    Difference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub n: u32,
    /// rad/s
    pub frequency: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSpec {
    pub sigma: f64,
    pub delta: f64,
    /// Descending in frequency.
    pub harmonics: Vec<Harmonic>,
}

/// Drive frequencies Σ/n and |Δ|/n, n = 1..=n_max, at which the modulation
/// resonantly couples the two oscillators.
pub fn resonance_frequencies(omega_c: f64, omega_s: f64, n_max: u32) -> Result<ResonanceSpec> {
    if n_max < 1 {
        return Err(Error::param("n_max", "must be at least 1"));
    }
    let sigma = omega_s + omega_c;
    let delta = omega_s - omega_c;
    let mut harmonics = Vec::new();
    for n in 1..=n_max {
        harmonics.push(Harmonic {
            n,
            frequency: sigma / n as f64,
            branch: Branch::Sum,
        });
        if delta != 0.0 {
            harmonics.push(Harmonic {
                n,
                frequency: delta.abs() / n as f64,
                branch: Branch::Difference,
            });
        }
    }
    harmonics.sort_by(|a, b| {
        b.frequency
            .total_cmp(&a.frequency)
            .then((a.branch == Branch::Difference).cmp(&(b.branch == Branch::Difference)))
    });
    harmonics.dedup_by(|later, earlier| {
        (later.frequency - earlier.frequency).abs() <= 1e-12 * earlier.frequency
    });
    Ok(ResonanceSpec {
        sigma,
        delta,
        harmonics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConfig {
    /// Largest |n| kept in the Bessel series.
    pub truncation: usize,
    /// Series argument −y/ω the truncation was chosen for.
    pub y_over_omega: f64,
}

/// Truncation margin above the Bessel turning point.
pub const DEFAULT_MARGIN: usize = 40;
pub const MIN_MARGIN: usize = 20;

fn turning_point(y: f64, omega: f64) -> usize {
    (y / omega).abs().ceil() as usize
}

impl EnvelopeConfig {
    pub fn new(y: f64, omega: f64) -> Self {
        EnvelopeConfig {
            truncation: turning_point(y, omega) + DEFAULT_MARGIN,
            y_over_omega: -y / omega,
        }
    }

    pub fn with_truncation(mut self, truncation: usize) -> Self {
        self.truncation = truncation;
        self
    }
}

/// exp(iθ)·(e^{iδt} − 1)/δ written so it stays accurate as δ → 0.
fn phase_ramp(delta: f64, t: f64) -> Complex64 {
    let half = 0.5 * delta * t;
    Complex64::new(0.0, 2.0) * Complex64::from_polar(1.0, half) * (half.sin() / delta)
}

/// F(x, y, t) = Σₙ iⁿ Jₙ(−y/ω) (e^{i(x+nω)t} − 1)/(x + nω).
///
/// Terms with |x + nω| < ω·1e-12 are replaced by their limit iⁿ⁺¹ Jₙ t.
pub fn envelope_f(x: f64, y: f64, t: f64, omega: f64, config: &EnvelopeConfig) -> Result<Complex64> {
    if !(omega > 0.0) {
        return Err(Error::param("omega", format!("must be positive, got {omega}")));
    }
    let need = turning_point(y, omega) + MIN_MARGIN;
    if config.truncation < need {
        return Err(Error::param(
            "truncation",
            format!("{} is below the required {need} for |y/ω| = {}", config.truncation, (y / omega).abs()),
        ));
    }
    let z = -y / omega;
    let j = bessel_j_orders(config.truncation, z);
    let nmax = config.truncation as i64;
    let mut sum = Complex64::new(0.0, 0.0);
    for n in -nmax..=nmax {
        let k = n.unsigned_abs() as usize;
        let jn = if n < 0 && k % 2 == 1 { -j[k] } else { j[k] };
        if jn == 0.0 {
            continue;
        }
        let i_pow = Complex64::i().powi(n.rem_euclid(4) as i32);
        let det = x + n as f64 * omega;
        let term = if det.abs() < omega * 1e-12 {
            Complex64::i() * t
        } else {
            phase_ramp(det, t)
        };
        sum += i_pow * jn * term;
    }
    Ok(sum)
}

/// ⟨s+1|J₊|s⟩ = √((N/2 + s + 1)(N/2 − s)) for a collective spin of N spin-½.
pub fn coupling_coefficient(n_spins: u64, s: f64) -> Result<f64> {
    let half = n_spins as f64 / 2.0;
    let offset = s + half;
    if !(s.abs() <= half) || (offset - offset.round()).abs() > 1e-9 {
        return Err(Error::param(
            "s",
            format!("must be one of -N/2, -N/2+1, …, N/2 for N = {n_spins}, got {s}"),
        ));
    }
    Ok(((half + s + 1.0) * (half - s)).max(0.0).sqrt())
}

/// The four envelopes F(−Σ,−Λ,t), F(−Δ,−Λ,t), F(Δ,Λ,t), F(Σ,Λ,t).
pub fn resonance_strength(
    params: &SystemParams,
    t: f64,
    config: &EnvelopeConfig,
) -> Result<[Complex64; 4]> {
    let (s, d, l, w) = (
        params.sigma(),
        params.delta(),
        params.lambda_drive,
        params.omega_drive,
    );
    Ok([
        envelope_f(-s, -l, t, w, config)?,
        envelope_f(-d, -l, t, w, config)?,
        envelope_f(d, l, t, w, config)?,
        envelope_f(s, l, t, w, config)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::hz;

    type Cx = Complex64;

    // 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1]
    const XK: [f64; 8] = [
        0.991_455_371_120_812_6,
        0.949_107_912_342_758_5,
        0.864_864_423_359_769_1,
        0.741_531_185_599_394_4,
        0.586_087_235_467_691_1,
        0.405_845_151_377_397_2,
        0.207_784_955_007_898_5,
        0.0,
    ];
    const WK: [f64; 8] = [
        0.022_935_322_010_529_22,
        0.063_092_092_629_978_55,
        0.104_790_010_322_250_2,
        0.140_653_259_715_525_9,
        0.169_004_726_639_267_9,
        0.190_350_578_064_785_4,
        0.204_432_940_075_298_9,
        0.209_482_141_084_727_8,
    ];
    const WG: [f64; 4] = [
        0.129_484_966_168_869_7,
        0.279_705_391_489_276_7,
        0.381_830_050_505_118_9,
        0.417_959_183_673_469_4,
    ];

    fn gk15(f: &dyn Fn(f64) -> Cx, a: f64, b: f64) -> (Cx, f64) {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = f(c);
        let mut k = fc * WK[7];
        let mut g = fc * WG[3];
        for i in 0..7 {
            let dx = h * XK[i];
            let s = f(c - dx) + f(c + dx);
            k += s * WK[i];
            if i % 2 == 1 {
                g += s * WG[i / 2];
            }
        }
        (k * h, ((k - g) * h).norm())
    }

    fn adaptive(f: &dyn Fn(f64) -> Cx, a: f64, b: f64, tol: f64, depth: u32) -> Cx {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        adaptive(f, a, m, tol / 2.0, depth - 1) + adaptive(f, m, b, tol / 2.0, depth - 1)
    }

    fn oracle(x: f64, y: f64, t: f64, omega: f64) -> Cx {
        let f = |tau: f64| Cx::from_polar(1.0, x * tau - (y / omega) * (omega * tau).cos());
        // split into drive periods so each panel sees a handful of oscillations
        let panels = ((t * omega / std::f64::consts::TAU).ceil() as usize).max(1);
        let mut sum = Cx::new(0.0, 0.0);
        for p in 0..panels {
            let a = t * p as f64 / panels as f64;
            let b = t * (p + 1) as f64 / panels as f64;
            sum += adaptive(&f, a, b, 1e-13 * t, 20);
        }
        Cx::i() * sum
    }

    #[test]
    fn table_at_reference_point() {
        let spec = resonance_frequencies(hz(2.5e9), hz(3.5e9), 3).unwrap();
        let got: Vec<(f64, Branch)> = spec.harmonics.iter().map(|h| (h.frequency / hz(1e9), h.branch)).collect();
        let expect = [
            (6.0, Branch::Sum),
            (3.0, Branch::Sum),
            (2.0, Branch::Sum),
            (1.0, Branch::Difference),
            (0.5, Branch::Difference),
            (1.0 / 3.0, Branch::Difference),
        ];
        assert_eq!(got.len(), expect.len());
        for (g, e) in got.iter().zip(expect) {
            assert!((g.0 - e.0).abs() < 1e-12 && g.1 == e.1, "{g:?} vs {e:?}");
        }
    }

    #[test]
    fn table_edge_cases() {
        let s = resonance_frequencies(hz(3e9), hz(3e9), 4).unwrap();
        assert!(s.harmonics.iter().all(|h| h.branch == Branch::Sum));
        let one = resonance_frequencies(hz(2.5e9), hz(3.5e9), 1).unwrap();
        assert_eq!(one.harmonics.len(), 2);
        assert_eq!(one.harmonics[0].frequency, one.sigma);
        assert_eq!(one.harmonics[1].frequency, one.delta.abs());
        assert!(resonance_frequencies(1.0, 2.0, 0).is_err());
        // Σ/6 coincides with Δ: kept once
        let six = resonance_frequencies(hz(2.5e9), hz(3.5e9), 6).unwrap();
        let at_one = six.harmonics.iter().filter(|h| (h.frequency - hz(1e9)).abs() < 1.0).count();
        assert_eq!(at_one, 1);
    }

    #[test]
    fn zero_modulation_leaves_only_the_static_term() {
        let cfg = EnvelopeConfig::new(0.0, 1.0);
        let (x, t) = (0.7, 2.3);
        let f = envelope_f(x, 0.0, t, 1.0, &cfg).unwrap();
        let expect = (Cx::i() * x * t).exp() - 1.0;
        assert!((f - expect / x).norm() < 1e-14);
        let f0 = envelope_f(0.0, 0.0, t, 1.0, &cfg).unwrap();
        assert!((f0 - Cx::i() * t).norm() < 1e-14);
    }

    #[test]
    fn matches_direct_quadrature() {
        let omega = 2.0;
        let cases = [(0.37, 1.3, 4.1), (-3.1, 0.4, 9.0), (5.3, -2.2, 2.7), (-1.9, 6.5, 12.0)];
        for (x, y, t) in cases {
            let cfg = EnvelopeConfig::new(y, omega);
            let f = envelope_f(x, y, t, omega, &cfg).unwrap();
            let o = oracle(x, y, t, omega);
            assert!((f - o).norm() <= 1e-9 * o.norm(), "{f} vs {o} at {x},{y},{t}");
        }
    }

    #[test]
    fn continuous_through_resonances() {
        let omega = 1.5;
        let (y, t) = (0.9, 7.0);
        let cfg = EnvelopeConfig::new(y, omega);
        for n in 1..=3 {
            let x0 = -(n as f64) * omega;
            let at = envelope_f(x0, y, t, omega, &cfg).unwrap();
            let near: Vec<Cx> = [1e-3, 1e-6, 1e-9]
                .iter()
                .map(|e| envelope_f(x0 + e * omega, y, t, omega, &cfg).unwrap())
                .collect();
            assert!((near[1] - at).norm() < 1e-4 * at.norm());
            assert!((near[2] - at).norm() < 1e-7 * at.norm());
            // the offsets shrink geometrically, so should the gap
            assert!((near[2] - at).norm() < (near[0] - at).norm());
        }
    }

    #[test]
    fn vanishes_at_time_zero() {
        let cfg = EnvelopeConfig::new(3.0, 1.0);
        assert_eq!(envelope_f(0.4, 3.0, 0.0, 1.0, &cfg).unwrap(), Cx::new(0.0, 0.0));
        assert_eq!(envelope_f(-1.0, 3.0, 0.0, 1.0, &cfg).unwrap(), Cx::new(0.0, 0.0));
    }

    #[test]
    fn truncation_converged() {
        let (x, y, t, w) = (0.3, 0.8, 5.0, 1.0);
        let cfg = EnvelopeConfig::new(y, w);
        let a = envelope_f(x, y, t, w, &cfg).unwrap();
        let b = envelope_f(x, y, t, w, &cfg.with_truncation(2 * cfg.truncation)).unwrap();
        assert!((a - b).norm() < 1e-10 * a.norm());
    }

    #[test]
    fn rejects_short_truncation() {
        let cfg = EnvelopeConfig::new(5.0, 1.0).with_truncation(10);
        assert!(envelope_f(0.1, 5.0, 1.0, 1.0, &cfg).is_err());
        assert!(envelope_f(0.1, 5.0, 1.0, 0.0, &EnvelopeConfig::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn ladder_coefficients() {
        assert_eq!(coupling_coefficient(10, 5.0).unwrap(), 0.0);
        assert!((coupling_coefficient(10, -5.0).unwrap() - 10f64.sqrt()).abs() < 1e-14);
        // j = 1, m = 0: ⟨1,1|J₊|1,0⟩ = √(j(j+1) − m(m+1)) = √2
        assert!((coupling_coefficient(2, 0.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((coupling_coefficient(3, 0.5).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert!(coupling_coefficient(4, 2.5).is_err());
        assert!(coupling_coefficient(4, 0.5).is_err());
    }

    #[test]
    fn sum_resonance_grows_linearly() {
        let p = SystemParams::reference();
        let cfg = EnvelopeConfig::new(p.lambda_drive, p.omega_drive);
        let tau = p.period();
        let a = resonance_strength(&p, 100.0 * tau, &cfg).unwrap()[0].norm();
        let b = resonance_strength(&p, 1000.0 * tau, &cfg).unwrap()[0].norm();
        assert!((b / a - 10.0).abs() < 0.05, "{}", b / a);
    }

    #[test]
    fn off_resonance_envelopes_stay_bounded() {
        let p = SystemParams {
            omega_drive: hz(4.3e9),
            ..SystemParams::reference()
        };
        let cfg = EnvelopeConfig::new(p.lambda_drive, p.omega_drive);
        let tau = p.period();
        let mut worst = [0.0f64; 4];
        let mut early = [0.0f64; 4];
        for (k, n) in [10.0, 100.0, 1000.0, 10_000.0].iter().enumerate() {
            let v = resonance_strength(&p, n * tau, &cfg).unwrap();
            for i in 0..4 {
                if k == 0 {
                    early[i] = v[i].norm();
                }
                worst[i] = worst[i].max(v[i].norm());
            }
        }
        // a resonance would grow by ~1000× over this span
        let bound = 4.0 / hz(1e8);
        for i in 0..4 {
            assert!(worst[i] < bound, "{i}: {}", worst[i]);
        }
        assert!(early.iter().all(|e| *e > 0.0));
    }

    #[test]
    fn static_drive_reduces_to_plain_envelope() {
        let p = SystemParams::reference().with_lambda(0.0);
        let cfg = EnvelopeConfig::new(0.0, p.omega_drive);
        let t = 3.3e-9;
        let v = resonance_strength(&p, t, &cfg).unwrap();
        let plain = |x: f64| ((Cx::i() * x * t).exp() - 1.0) / x;
        let xs = [-p.sigma(), -p.delta(), p.delta(), p.sigma()];
        for i in 0..4 {
            assert!((v[i] - plain(xs[i])).norm() < 1e-12 * plain(xs[i]).norm());
        }
    }
}
