//! Eigen-quadratures, the dB scale, rate fits, bandwidth sweeps and the drive
//! optimiser.

use nalgebra::{Matrix2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen4;
use crate::model::{Covariance4, Mode, SystemParams};
use crate::pool::bounded_map;
use crate::propagator::{period_map, periods_for, trajectory_from_map, Trajectory};

/// S(V) = 10·log₁₀(2√V): 0 dB at the vacuum variance.
pub fn squeezing_db(v: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::param("variance", format!("must be positive, got {v}")));
    }
    Ok(10.0 * (2.0 * v.sqrt()).log10())
}

/// Inverse of [`squeezing_db`].
pub fn variance_from_db(db: f64) -> f64 {
    let r = 10f64.powf(db / 10.0) / 2.0;
    r * r
}

fn db_or_floor(v: f64) -> f64 {
    squeezing_db(v).unwrap_or(f64::NEG_INFINITY)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpectrum {
    /// Ascending variances with unit axes over (X_a, Y_a, X_b, Y_b).
    pub pairs: [(f64, Vector4<f64>); 4],
    pub db: [f64; 4],
}

impl QuadratureSpectrum {
    pub fn variances(&self) -> [f64; 4] {
        [self.pairs[0].0, self.pairs[1].0, self.pairs[2].0, self.pairs[3].0]
    }

    pub fn min_variance(&self) -> f64 {
        self.pairs[0].0
    }

    pub fn max_variance(&self) -> f64 {
        self.pairs[3].0
    }

    pub fn axis(&self, i: usize) -> &Vector4<f64> {
        &self.pairs[i].1
    }
}

/// Flips `v` so that its first non-negligible component is positive.
pub fn canonical_sign(mut v: Vector4<f64>) -> Vector4<f64> {
    let cutoff = 1e-12 * v.amax();
    if let Some(x) = v.iter().find(|x| x.abs() > cutoff) {
        if *x < 0.0 {
            v = -v;
        }
    }
    v
}

pub fn eigen_quadratures(c: &Covariance4) -> QuadratureSpectrum {
    let (vals, vecs) = symmetric_eigen4(c.matrix());
    let pairs = [0usize, 1, 2, 3].map(|i| (vals[i], canonical_sign(vecs.column(i).into_owned())));
    let db = pairs.map(|p| db_or_floor(p.0));
    QuadratureSpectrum { pairs, db }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemMetrics {
    pub s_sqz: f64,
    pub s_amp: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub va_min: f64,
    pub va_max: f64,
    pub vb_min: f64,
    pub vb_max: f64,
}

fn block_extrema(b: &Matrix2<f64>) -> (f64, f64) {
    let e = b.symmetric_eigen().eigenvalues;
    (e.min(), e.max())
}

pub fn system_metrics(c: &Covariance4) -> SystemMetrics {
    let spec = eigen_quadratures(c);
    let (va_min, va_max) = block_extrema(&c.mode_block(Mode::Cavity));
    let (vb_min, vb_max) = block_extrema(&c.mode_block(Mode::Spin));
    SystemMetrics {
        s_sqz: spec.db[0].min(0.0),
        s_amp: spec.db[3],
        v_min: spec.min_variance(),
        v_max: spec.max_variance(),
        va_min,
        va_max,
        vb_min,
        vb_max,
    }
}

/// Least-squares fit of S(V_max) against time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate_db_per_us: f64,
    pub intercept_db: f64,
    pub samples_used: usize,
    /// False when S(V_max) decreases anywhere inside the fit window.
    pub monotone: bool,
}

impl RateFit {
    pub fn amplifying(&self) -> bool {
        self.monotone && self.rate_db_per_us > 0.0
    }
}

/// Fraction of leading samples excluded from the rate fit.
pub const TRANSIENT_FRACTION: f64 = 0.05;

pub fn amplification_rate(traj: &Trajectory) -> Result<RateFit> {
    let n = traj.samples.len();
    let skip = (n as f64 * TRANSIENT_FRACTION).ceil() as usize;
    let window = &traj.samples[skip.min(n)..];
    if window.len() < 10 {
        return Err(Error::param(
            "trajectory",
            format!("needs at least 10 samples after the transient, got {}", window.len()),
        ));
    }
    let pts: Vec<(f64, f64)> = window
        .iter()
        .map(|(t, c)| (t * 1e6, db_or_floor(eigen_quadratures(c).max_variance())))
        .collect();
    let m = pts.len() as f64;
    let tx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let sy = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in &pts {
        sxy += (x - tx) * (y - sy);
        sxx += (x - tx) * (x - tx);
    }
    let slope = sxy / sxx;
    let monotone = pts.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-9);
    Ok(RateFit {
        rate_db_per_us: slope,
        intercept_db: sy - slope * tx,
        samples_used: pts.len(),
        monotone,
    })
}

/// Horizon and sampling used when a rate is evaluated at a parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    pub duration: f64,
    pub samples: usize,
    pub rel_tol: f64,
    /// Start from the uncoupled bath equilibrium instead of the vacuum.
    pub thermal_start: bool,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions {
            duration: 1.7e-6,
            samples: 200,
            rel_tol: crate::propagator::DEFAULT_REL_TOL,
            thermal_start: false,
        }
    }
}

pub fn initial_state(params: &SystemParams, thermal: bool) -> Covariance4 {
    if thermal {
        Covariance4::thermal(params.n_thermal(), params.n_s)
    } else {
        Covariance4::vacuum()
    }
}

/// Simulates `params` and fits the amplification rate.
pub fn rate_at(params: &SystemParams, opts: &RateOptions) -> Result<RateFit> {
    let map = period_map(params, opts.rel_tol)?;
    let periods = periods_for(params, opts.duration).max(1);
    let stride = (periods / opts.samples.max(1)).max(1);
    let traj = trajectory_from_map(
        params,
        &map,
        &initial_state(params, opts.thermal_start),
        periods,
        stride,
    )?;
    amplification_rate(&traj)
}

/// Cavity-frequency sweep in rad/s, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavitySweep {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl CavitySweep {
    pub fn centred(centre: f64, half_width: f64, points: usize) -> Self {
        let step = 2.0 * half_width / (points.max(2) - 1) as f64;
        CavitySweep {
            start: centre - half_width,
            stop: centre + half_width,
            step,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthResult {
    /// Full width at half maximum, Hz.
    pub fwhm_hz: f64,
    pub peak_omega_c: f64,
    pub peak_rate: f64,
    /// (ω_c, fitted rate) for every point.
    pub rows: Vec<(f64, RateFit)>,
}

fn half_crossing(x0: f64, y0: f64, x1: f64, y1: f64, half: f64) -> f64 {
    x0 + (half - y0) * (x1 - x0) / (y1 - y0)
}

/// FWHM of the amplification rate as ω_c is swept at fixed ω and ω_s.
pub fn bandwidth_fwhm(
    params: &SystemParams,
    sweep: &CavitySweep,
    opts: &RateOptions,
    workers: Option<usize>,
) -> Result<BandwidthResult> {
    if !(sweep.step > 0.0 && sweep.stop > sweep.start) {
        return Err(Error::param("sweep", "needs start < stop and a positive step"));
    }
    let xs = sweep.values();
    let fits = bounded_map(&xs, workers, |&wc| {
        let p = SystemParams {
            omega_c: wc,
            ..*params
        };
        rate_at(&p, opts)
    });
    let mut rows = Vec::with_capacity(xs.len());
    for (x, r) in xs.iter().zip(fits) {
        rows.push((*x, r?));
    }
    fwhm_from_rows(rows)
}

pub fn fwhm_from_rows(rows: Vec<(f64, RateFit)>) -> Result<BandwidthResult> {
    let (peak_idx, peak) = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.1.rate_db_per_us))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    if !(peak > 0.0) {
        return Err(Error::NotAmplifying(
            "rate is not positive anywhere in the sweep".into(),
        ));
    }
    let half = peak / 2.0;
    let rate = |i: usize| rows[i].1.rate_db_per_us;
    let lower = (1..=peak_idx)
        .rev()
        .find(|&i| rate(i - 1) < half)
        .map(|i| half_crossing(rows[i - 1].0, rate(i - 1), rows[i].0, rate(i), half))
        .ok_or(Error::NotBracketed { side: "lower" })?;
    let upper = (peak_idx..rows.len() - 1)
        .find(|&i| rate(i + 1) < half)
        .map(|i| half_crossing(rows[i].0, rate(i), rows[i + 1].0, rate(i + 1), half))
        .ok_or(Error::NotBracketed { side: "upper" })?;
    Ok(BandwidthResult {
        fwhm_hz: crate::model::to_hz(upper - lower),
        peak_omega_c: rows[peak_idx].0,
        peak_rate: peak,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    MaxAmplification,
    MinVariance,
}

/// Search box over (ω, ω_s, Λ) in rad/s plus the search budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveBox {
    pub omega_drive: (f64, f64),
    pub omega_s: (f64, f64),
    pub lambda_drive: (f64, f64),
}

impl DriveBox {
    pub fn default_box() -> Self {
        use crate::model::hz;
        DriveBox {
            omega_drive: (hz(1e9), hz(9e9)),
            omega_s: (hz(2e9), hz(4e9)),
            lambda_drive: (hz(0.1e9), hz(1e9)),
        }
    }

    fn ranges(&self) -> [(f64, f64); 3] {
        [self.omega_drive, self.omega_s, self.lambda_drive]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub objective: Objective,
    pub evolution_time: f64,
    pub grid: [usize; 3],
    /// Evaluations allowed for the simplex stage.
    pub budget: usize,
    pub rel_tol: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            objective: Objective::MaxAmplification,
            evolution_time: 1.0e-6,
            grid: [9, 9, 5],
            budget: 200,
            rel_tol: crate::propagator::DEFAULT_REL_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub params: SystemParams,
    /// S_amp (maximised) or S_sqz (minimised) at the evolution time, dB.
    pub value: f64,
    pub grid_evaluations: usize,
    pub simplex_evaluations: usize,
    /// False when the simplex budget ran out first.
    pub converged: bool,
}

fn with_drive(base: &SystemParams, x: &[f64; 3]) -> SystemParams {
    SystemParams {
        omega_drive: x[0],
        omega_s: x[1],
        lambda_drive: x[2],
        ..*base
    }
}

/// Objective to minimise: −S_amp or S_sqz. Failures score +∞.
fn score(base: &SystemParams, x: &[f64; 3], opts: &OptimizeOptions) -> f64 {
    let p = with_drive(base, x);
    let run = || -> Result<f64> {
        let map = period_map(&p, opts.rel_tol)?;
        let n = periods_for(&p, opts.evolution_time);
        let c = crate::propagator::iterate_periods(&Covariance4::vacuum(), &map, n)?;
        let m = system_metrics(&c);
        Ok(match opts.objective {
            Objective::MaxAmplification => -m.s_amp,
            Objective::MinVariance => m.s_sqz,
        })
    };
    match run() {
        Ok(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    }
}

fn axis_points(range: (f64, f64), n: usize) -> Vec<f64> {
    if range.1 <= range.0 || n <= 1 {
        return vec![range.0];
    }
    (0..n)
        .map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Grid scan over the box followed by Nelder–Mead refinement inside it.
pub fn optimize_drive(
    base: &SystemParams,
    bounds: &DriveBox,
    opts: &OptimizeOptions,
    workers: Option<usize>,
) -> Result<OptimizeResult> {
    let ranges = bounds.ranges();
    for (name, r) in ["omega_drive", "omega_s", "lambda_drive"].iter().zip(ranges) {
        if !(r.0 > 0.0 || (*name == "lambda_drive" && r.0 >= 0.0)) || r.1 < r.0 {
            return Err(Error::param("box", format!("invalid range for {name}: {r:?}")));
        }
    }
    let axes: Vec<Vec<f64>> = (0..3).map(|i| axis_points(ranges[i], opts.grid[i])).collect();
    let mut grid = Vec::new();
    for &a in &axes[0] {
        for &b in &axes[1] {
            for &c in &axes[2] {
                grid.push([a, b, c]);
            }
        }
    }
    let scores = bounded_map(&grid, workers, |x| score(base, x, opts));
    let (best_idx, best) = scores
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    if !best.is_finite() {
        return Err(Error::NotAmplifying(
            "every grid point failed to evaluate".into(),
        ));
    }

    let free: Vec<usize> = (0..3).filter(|&i| ranges[i].1 > ranges[i].0).collect();
    let start = grid[best_idx];
    let to_param = |u: &[f64]| {
        let mut x = start;
        for (k, &i) in free.iter().enumerate() {
            let t = u[k].clamp(0.0, 1.0);
            x[i] = ranges[i].0 + t * (ranges[i].1 - ranges[i].0);
        }
        x
    };
    let u0: Vec<f64> = free
        .iter()
        .map(|&i| (start[i] - ranges[i].0) / (ranges[i].1 - ranges[i].0))
        .collect();
    let steps: Vec<f64> = free
        .iter()
        .map(|&i| 0.25 / (opts.grid[i].max(2) - 1) as f64)
        .collect();
    let (u_best, value, used, converged) = if free.is_empty() {
        (u0, best, 0, true)
    } else {
        let nm = nelder_mead(
            |u| score(base, &to_param(u), opts),
            &u0,
            best,
            &steps,
            opts.budget,
            1e-6,
        );
        (nm.x, nm.value, nm.evaluations, nm.converged)
    };
    let x = to_param(&u_best);
    let value = match opts.objective {
        Objective::MaxAmplification => -value,
        Objective::MinVariance => value,
    };
    Ok(OptimizeResult {
        params: with_drive(base, &x),
        value,
        grid_evaluations: grid.len(),
        simplex_evaluations: used,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder–Mead minimisation from `x0` (whose value `f0` is already known).
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    f0: f64,
    steps: &[f64],
    budget: usize,
    ftol: f64,
) -> SimplexResult {
    let n = x0.len();
    let mut evals = 0usize;
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
    for i in 0..n {
        if evals >= budget {
            break;
        }
        let mut x = x0.to_vec();
        // step inward when the start sits on the upper face of the unit box
        x[i] += if x[i] + steps[i] > 1.0 { -steps[i] } else { steps[i] };
        let fx = f(&x);
        evals += 1;
        simplex.push((x, fx));
    }
    if simplex.len() < n + 1 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        return SimplexResult { x, value, evaluations: evals, converged: false };
    }
    let mut converged = false;
    while evals < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let size = simplex
            .iter()
            .skip(1)
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread <= ftol) || size < 1e-10 {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            if evals >= budget {
                simplex[n] = (xr, fr);
                break;
            }
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            if evals >= budget {
                break;
            }
            let outside = fr < simplex[n].1;
            let xc = along(if outside { -0.5 } else { 0.5 });
            let fc = f(&xc);
            evals += 1;
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (xc, fc);
            } else {
                for i in 1..=n {
                    if evals >= budget {
                        break;
                    }
                    let xs: Vec<f64> = simplex[i]
                        .0
                        .iter()
                        .zip(&simplex[0].0)
                        .map(|(x, b)| b + 0.5 * (x - b))
                        .collect();
                    let fs = f(&xs);
                    evals += 1;
                    simplex[i] = (xs, fs);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    SimplexResult {
        x,
        value,
        evaluations: evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::hz;
    use crate::propagator::{iterate_periods, simulate_trajectory};

    #[test]
    fn db_scale_points() {
        assert!(squeezing_db(0.25).unwrap().abs() < 1e-15);
        assert!((squeezing_db(0.025).unwrap() + 5.0).abs() < 1e-12);
        assert!((squeezing_db(995.0).unwrap() - 18.0).abs() < 1e-3);
        assert!(squeezing_db(0.0).is_err());
        assert!(squeezing_db(-1.0).is_err());
        let v = 3.7;
        assert!((variance_from_db(squeezing_db(v).unwrap()) - v).abs() < 1e-12);
    }

    #[test]
    fn vacuum_spectrum_and_metrics() {
        let s = eigen_quadratures(&Covariance4::vacuum());
        assert!(s.variances().iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert!(s.db.iter().all(|d| d.abs() < 1e-12));
        let m = system_metrics(&Covariance4::vacuum());
        assert_eq!(m.s_sqz, 0.0);
        assert!(m.s_amp.abs() < 1e-12);
    }

    #[test]
    fn sign_convention_makes_first_component_positive() {
        let v = canonical_sign(Vector4::new(0.0, -0.6, 0.8, 0.0));
        assert!(v[1] > 0.0);
        let w = canonical_sign(Vector4::new(1e-20, -0.6, 0.8, 0.0));
        assert!(w[1] > 0.0);
    }

    #[test]
    fn two_mode_squeezed_state_has_no_single_mode_squeezing() {
        // ideal two-mode squeezed vacuum with r = 1
        let r: f64 = 1.0;
        let (ch, sh) = ((2.0 * r).cosh() / 4.0, (2.0 * r).sinh() / 4.0);
        let m = nalgebra::Matrix4::new(
            ch, 0.0, sh, 0.0, 0.0, ch, 0.0, -sh, sh, 0.0, ch, 0.0, 0.0, -sh, 0.0, ch,
        );
        let met = system_metrics(&Covariance4::new(m));
        assert!(met.s_sqz < -3.0);
        assert!(met.va_min >= 0.25 && met.vb_min >= 0.25);
    }

    #[test]
    fn undamped_rate_near_eight_db_per_us() {
        let p = SystemParams::reference_undamped();
        let traj = simulate_trajectory(&p, &Covariance4::vacuum(), 10_000, 50, 1e-10).unwrap();
        let fit = amplification_rate(&traj).unwrap();
        assert!(fit.monotone);
        assert!((fit.rate_db_per_us - 8.0).abs() < 1.6, "{}", fit.rate_db_per_us);
    }

    #[test]
    fn undamped_extremes_pair_up() {
        let p = SystemParams::reference_undamped();
        let map = period_map(&p, 1e-10).unwrap();
        let c = iterate_periods(&Covariance4::vacuum(), &map, 5000).unwrap();
        let s = eigen_quadratures(&c);
        assert!((s.min_variance() * s.max_variance() - 1.0 / 16.0).abs() < 1e-6);
        assert!((s.db[0] + s.db[3]).abs() < 0.01);
    }

    #[test]
    fn no_drive_means_no_rate() {
        let p = SystemParams::reference_undamped().with_lambda(0.0);
        let fit = rate_at(&p, &RateOptions { duration: 0.5e-6, ..Default::default() }).unwrap();
        assert!(fit.rate_db_per_us.abs() < 0.05, "{}", fit.rate_db_per_us);
        assert!(!fit.amplifying() || fit.rate_db_per_us < 0.05);
    }

    #[test]
    fn short_trajectory_is_rejected() {
        let p = SystemParams::reference_undamped();
        let traj = simulate_trajectory(&p, &Covariance4::vacuum(), 5, 1, 1e-10).unwrap();
        assert!(amplification_rate(&traj).is_err());
    }

    #[test]
    fn fwhm_interpolation_on_a_triangle() {
        let rows: Vec<(f64, RateFit)> = (0..11)
            .map(|i| {
                let x = hz(i as f64);
                let y = 5.0 - (i as f64 - 5.0).abs();
                (x, RateFit { rate_db_per_us: y, intercept_db: 0.0, samples_used: 10, monotone: true })
            })
            .collect();
        let r = fwhm_from_rows(rows.clone()).unwrap();
        assert!((r.fwhm_hz - 5.0).abs() < 1e-9);
        assert!(matches!(
            fwhm_from_rows(rows[3..].to_vec()),
            Err(Error::NotBracketed { side: "lower" })
        ));
        assert!(matches!(
            fwhm_from_rows(rows[..8].to_vec()),
            Err(Error::NotBracketed { side: "upper" })
        ));
    }

    #[test]
    fn nelder_mead_finds_a_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] - 0.7).powi(2);
        let x0 = [0.5, 0.5];
        let r = nelder_mead(f, &x0, f(&x0), &[0.1, 0.1], 500, 1e-14);
        assert!(r.converged);
        assert!((r.x[0] - 0.3).abs() < 1e-5 && (r.x[1] - 0.7).abs() < 1e-5);
    }

    #[test]
    fn nelder_mead_reports_budget_exhaustion() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + (x[1] - 0.7).powi(2);
        let r = nelder_mead(f, &[0.0, 0.0], f(&[0.0, 0.0]), &[0.1, 0.1], 6, 1e-14);
        assert!(!r.converged);
        assert!(r.evaluations <= 6);
    }

    #[test]
    fn degenerate_box_returns_its_point() {
        let base = SystemParams::reference_undamped();
        let b = DriveBox {
            omega_drive: (hz(6e9), hz(6e9)),
            omega_s: (hz(3.5e9), hz(3.5e9)),
            lambda_drive: (hz(0.5e9), hz(0.5e9)),
        };
        let opts = OptimizeOptions { evolution_time: 0.2e-6, ..Default::default() };
        let r = optimize_drive(&base, &b, &opts, Some(1)).unwrap();
        assert_eq!(r.grid_evaluations, 1);
        assert_eq!(r.simplex_evaluations, 0);
        assert_eq!(r.params.omega_drive, hz(6e9));
        assert_eq!(r.params.lambda_drive, hz(0.5e9));
        assert!(r.value > 0.0);
    }
}
