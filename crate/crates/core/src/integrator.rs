//! Dormand–Prince 5(4) with a PI step-size controller, for fixed-size
//! real state vectors.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// difference between the 5th- and embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Upper bound on the step; `None` leaves it to the controller.
    pub max_step: Option<f64>,
}

impl StepControl {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        StepControl {
            rel_tol,
            abs_tol,
            max_steps: 50_000_000,
            max_step: None,
        }
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = Some(h);
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

fn error_norm<const N: usize>(
    err: &[f64; N],
    y0: &[f64; N],
    y1: &[f64; N],
    ctl: &StepControl,
) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..N {
        let sc = ctl.abs_tol + ctl.rel_tol * y0[i].abs().max(y1[i].abs());
        worst = worst.max(err[i].abs() / sc);
    }
    worst
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

fn initial_step<const N: usize, F>(
    f: &mut F,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    span: f64,
    ctl: &StepControl,
) -> f64
where
    F: FnMut(f64, &[f64; N], &mut [f64; N]),
{
    let scale = |i: usize| ctl.abs_tol + ctl.rel_tol * y0[i].abs();
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for i in 0..N {
        d0 = d0.max(y0[i].abs() / scale(i));
        d1 = d1.max(f0[i].abs() / scale(i));
    }
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6 * span
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(span);
    let y1 = axpy(y0, h0, &[(1.0, f0)]);
    let mut f1 = [0.0; N];
    f(t0 + h0, &y1, &mut f1);
    let mut d2: f64 = 0.0;
    for i in 0..N {
        d2 = d2.max((f1[i] - f0[i]).abs() / scale(i));
    }
    d2 /= h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 {
        (h0 * 1e-3).max(1e-6 * span)
    } else {
        (0.01 / dmax).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (`t1 > t0`).
pub fn integrate<const N: usize, F>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: [f64; N],
    ctl: &StepControl,
) -> Result<([f64; N], Stats)>
where
    F: FnMut(f64, &[f64; N], &mut [f64; N]),
{
    if !(t1 > t0) {
        return Err(Error::param("t1", format!("must exceed t0 ({t0}), got {t1}")));
    }
    let span = t1 - t0;
    let mut stats = Stats::default();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = [0.0; N];
    f(t, &y, &mut k1);
    stats.evaluations += 1;
    let mut h = initial_step(&mut f, t0, &y, &k1, span, ctl);
    stats.evaluations += 1;
    if let Some(hmax) = ctl.max_step {
        h = h.min(hmax);
    }
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        ([0.0; N], [0.0; N], [0.0; N], [0.0; N], [0.0; N], [0.0; N]);

    while t < t1 {
        if stats.accepted + stats.rejected >= ctl.max_steps {
            return Err(Error::StepSizeUnderflow { time: t, step: h });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(span) {
            return Err(Error::StepSizeUnderflow { time: t, step: h });
        }

        let y2 = axpy(&y, h, &[(A21, &k1)]);
        f(t + C2 * h, &y2, &mut k2);
        let y3 = axpy(&y, h, &[(A31, &k1), (A32, &k2)]);
        f(t + C3 * h, &y3, &mut k3);
        let y4 = axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        f(t + C4 * h, &y4, &mut k4);
        let y5 = axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        f(t + C5 * h, &y5, &mut k5);
        let y6 = axpy(
            &y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        let t_new = if last { t1 } else { t + h };
        f(t_new, &y6, &mut k6);
        let y_new = axpy(
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        f(t_new, &y_new, &mut k7);
        stats.evaluations += 6;

        let mut err = [0.0; N];
        for i in 0..N {
            err[i] = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let en = error_norm(&err, &y, &y_new, ctl);
        let fac11 = en.powf(0.2 - 0.75 * BETA);

        if en <= 1.0 {
            let mut fac = fac11 / fac_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            fac_old = en.max(1e-4);
            t = t_new;
            y = y_new;
            k1 = k7;
            stats.accepted += 1;
            last_rejected = false;
            h = h_new;
            if let Some(hmax) = ctl.max_step {
                h = h.min(hmax);
            }
        } else {
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            stats.rejected += 1;
            last_rejected = true;
        }
    }
    Ok((y, stats))
}

/// One classical fourth-order Runge–Kutta step. Used for fixed-step
/// reference solutions.
pub fn rk4_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: FnMut(f64, &[f64; N], &mut [f64; N]),
{
    let mut k1 = [0.0; N];
    let mut k2 = [0.0; N];
    let mut k3 = [0.0; N];
    let mut k4 = [0.0; N];
    f(t, y, &mut k1);
    f(t + 0.5 * h, &axpy(y, 0.5 * h, &[(1.0, &k1)]), &mut k2);
    f(t + 0.5 * h, &axpy(y, 0.5 * h, &[(1.0, &k2)]), &mut k3);
    f(t + h, &axpy(y, h, &[(1.0, &k3)]), &mut k4);
    axpy(
        y,
        h / 6.0,
        &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)],
    )
}
