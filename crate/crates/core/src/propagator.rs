//! Covariance propagation: direct integration of dC/dt = AC + CAᵀ + G, the
//! one-period affine map (Φ, D), its iteration, and stroboscopic steady states.

use nalgebra::{DMatrix, DVector, Matrix4, SMatrix, Vector4};

use crate::error::{Error, Result};
use crate::integrator::{integrate, StepControl};
use crate::linalg::{symmetric_eigen, symmetric_eigen4};
use crate::model::{diffusion_matrix, drift_matrix, Covariance4, SystemParams};

pub const DEFAULT_REL_TOL: f64 = 1e-10;
pub const ABS_TOL: f64 = 1e-14;
/// Floquet fixed points are refused when the spectral radius reaches this.
pub const STABILITY_THRESHOLD: f64 = 1.0 - 1e-9;
const OVERFLOW_NORM: f64 = 1e250;

fn check_tol(rel_tol: f64) -> Result<()> {
    if !(1e-14..=1e-3).contains(&rel_tol) {
        return Err(Error::param(
            "rel_tol",
            format!("must lie in [1e-14, 1e-3], got {rel_tol}"),
        ));
    }
    Ok(())
}

fn mat_from(slice: &[f64]) -> Matrix4<f64> {
    Matrix4::from_column_slice(slice)
}

fn lyapunov_rhs(a: &Matrix4<f64>, c: &Matrix4<f64>, g: &Matrix4<f64>) -> Matrix4<f64> {
    let ac = a * c;
    ac + ac.transpose() + g
}

/// Evolves `c0` from `t0` to `t1` by direct integration of the covariance ODE.
pub fn integrate_interval(
    c0: &Covariance4,
    t0: f64,
    t1: f64,
    params: &SystemParams,
    rel_tol: f64,
) -> Result<Covariance4> {
    check_tol(rel_tol)?;
    params.validate()?;
    let g = diffusion_matrix(params);
    let mut y0 = [0.0; 16];
    y0.copy_from_slice(c0.matrix().as_slice());
    let ctl = StepControl::new(rel_tol, ABS_TOL);
    let (y, _) = integrate(
        |t, y: &[f64; 16], dy: &mut [f64; 16]| {
            let a = drift_matrix(params, t);
            let d = lyapunov_rhs(&a, &mat_from(y), &g);
            dy.copy_from_slice(d.as_slice());
        },
        t0,
        t1,
        y0,
        &ctl,
    )?;
    Ok(Covariance4::new(mat_from(&y)))
}

/// Affine one-period map C ↦ ΦCΦᵀ + D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodMap {
    pub phi: Matrix4<f64>,
    pub dee: Matrix4<f64>,
    pub period: f64,
    pub tolerance_used: f64,
}

impl PeriodMap {
    pub fn apply(&self, c: &Covariance4) -> Covariance4 {
        Covariance4::new(self.phi * c.matrix() * self.phi.transpose() + self.dee)
    }

    pub fn eigenvalue_moduli(&self) -> [f64; 4] {
        let ev = self.phi.complex_eigenvalues();
        let mut out = [0.0; 4];
        for (o, z) in out.iter_mut().zip(ev.iter()) {
            *o = z.norm();
        }
        out.sort_by(|a, b| b.total_cmp(a));
        out
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalue_moduli()[0]
    }

    /// 1 − ρ(Φ); negative above threshold.
    pub fn stability_margin(&self) -> f64 {
        1.0 - self.spectral_radius()
    }

    /// The map for `n` consecutive periods, by repeated squaring.
    pub fn compose(&self, n: u64) -> PeriodMap {
        let mut result = PeriodMap {
            phi: Matrix4::identity(),
            dee: Matrix4::zeros(),
            period: 0.0,
            tolerance_used: self.tolerance_used,
        };
        let mut base = *self;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                result = result.then(&base);
            }
            base = base.then(&base);
            k >>= 1;
        }
        result
    }

    /// `self` followed by `next`.
    fn then(&self, next: &PeriodMap) -> PeriodMap {
        let dee = next.phi * self.dee * next.phi.transpose() + next.dee;
        PeriodMap {
            phi: next.phi * self.phi,
            dee: (dee + dee.transpose()) * 0.5,
            period: self.period + next.period,
            tolerance_used: self.tolerance_used,
        }
    }
}

/// Integrates Φ and D together over one drive period starting at drive phase 0.
pub fn period_map(params: &SystemParams, rel_tol: f64) -> Result<PeriodMap> {
    check_tol(rel_tol)?;
    params.validate()?;
    let g = diffusion_matrix(params);
    let tau = params.period();
    let mut y0 = [0.0; 32];
    y0[..16].copy_from_slice(Matrix4::<f64>::identity().as_slice());
    let ctl = StepControl::new(rel_tol, ABS_TOL);
    let (y, _) = integrate(
        |t, y: &[f64; 32], dy: &mut [f64; 32]| {
            let a = drift_matrix(params, t);
            let dphi = a * mat_from(&y[..16]);
            let dd = lyapunov_rhs(&a, &mat_from(&y[16..]), &g);
            dy[..16].copy_from_slice(dphi.as_slice());
            dy[16..].copy_from_slice(dd.as_slice());
        },
        0.0,
        tau,
        y0,
        &ctl,
    )?;
    let dee = mat_from(&y[16..]);
    Ok(PeriodMap {
        phi: mat_from(&y[..16]),
        dee: (dee + dee.transpose()) * 0.5,
        period: tau,
        tolerance_used: rel_tol,
    })
}

fn check_finite(c: &Covariance4, period: usize) -> Result<()> {
    let norm = c.matrix().amax();
    if !norm.is_finite() || norm > OVERFLOW_NORM {
        return Err(Error::Overflow { period });
    }
    Ok(())
}

/// Applies the period map `n` times.
pub fn iterate_periods(c0: &Covariance4, map: &PeriodMap, n: usize) -> Result<Covariance4> {
    let mut c = c0.clone();
    for k in 1..=n {
        c = map.apply(&c);
        check_finite(&c, k)?;
    }
    Ok(c)
}

fn kron_identity_minus(phi: &Matrix4<f64>) -> SMatrix<f64, 16, 16> {
    let mut m = SMatrix::<f64, 16, 16>::identity();
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    m[(4 * i + k, 4 * j + l)] -= phi[(i, j)] * phi[(k, l)];
                }
            }
        }
    }
    m
}

/// Unique fixed point of C = ΦCΦᵀ + D. Requires ρ(Φ) < 1.
pub fn floquet_steady_state(map: &PeriodMap) -> Result<Covariance4> {
    let rho = map.spectral_radius();
    if !(rho < STABILITY_THRESHOLD) {
        return Err(Error::Unstable {
            spectral_radius: rho,
        });
    }
    // vec(ΦCΦᵀ) = (Φ⊗Φ) vec C, with vec taken column-major
    let m = kron_identity_minus(&map.phi);
    let rhs = SMatrix::<f64, 16, 1>::from_column_slice(map.dee.as_slice());
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("Floquet fixed-point system"))?;
    Ok(Covariance4::new(Matrix4::from_column_slice(sol.as_slice())))
}

/// Stroboscopic limit of the covariance restricted to directions that are not
/// amplified by the period map.
///
/// Above threshold the covariance diverges along the unstable directions of Φ,
/// but the variances along the orthogonal complement of the unstable
/// eigenspace converge. Those directions form a subspace `B` with ΦᵀB = BN,
/// and the restricted covariance K = BᵀCB obeys K ← NᵀKN + BᵀDB. Below
/// threshold `B` is all of quadrature space and this is the Floquet fixed
/// point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedSteadyState {
    /// Ascending variances of the limiting restricted covariance.
    pub variances: Vec<f64>,
    /// Matching unit axes in (X_a, Y_a, X_b, Y_b).
    pub axes: Vec<Vector4<f64>>,
    /// Number of amplified directions excluded.
    pub unstable_dims: usize,
    pub spectral_radius: f64,
}

impl BoundedSteadyState {
    pub fn min_variance(&self) -> f64 {
        self.variances[0]
    }

    /// Stroboscopic squeezing in dB (never positive).
    pub fn s_sqz(&self) -> f64 {
        crate::quadrature::squeezing_db(self.min_variance())
            .map(|v| v.min(0.0))
            .unwrap_or(f64::NEG_INFINITY)
    }
}

fn sorted_svd_u(m: &Matrix4<f64>) -> (Matrix4<f64>, [f64; 4]) {
    let svd = m.svd(true, false);
    let u = svd.u.expect("requested U");
    let mut idx = [0usize, 1, 2, 3];
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = Matrix4::zeros();
    let mut sv = [0.0; 4];
    for (k, &i) in idx.iter().enumerate() {
        out.set_column(k, &u.column(i));
        sv[k] = svd.singular_values[i];
    }
    (out, sv)
}

/// Computes the limiting covariance on the non-amplified subspace; see
/// [`BoundedSteadyState`].
pub fn bounded_steady_state(map: &PeriodMap) -> Result<BoundedSteadyState> {
    let moduli = map.eigenvalue_moduli();
    let rho = moduli[0];
    let unstable = moduli.iter().filter(|&&m| m >= STABILITY_THRESHOLD).count();
    if unstable == 0 {
        let c = floquet_steady_state(map)?;
        let (vals, vecs) = symmetric_eigen4(c.matrix());
        return Ok(BoundedSteadyState {
            variances: vals.iter().copied().collect(),
            axes: vecs.column_iter().map(|v| v.into_owned()).collect(),
            unstable_dims: 0,
            spectral_radius: rho,
        });
    }
    if unstable == 4 {
        return Err(Error::Unstable {
            spectral_radius: rho,
        });
    }
    let keep = 4 - unstable;

    // Dominant subspace of (Φᵀ)⁻ⁿ is the stable eigenspace of Φᵀ, i.e. the
    // orthogonal complement of Φ's unstable eigenspace.
    let inv = map
        .phi
        .transpose()
        .try_inverse()
        .ok_or(Error::Singular("period propagator"))?;
    let mut power = inv;
    let mut basis = Matrix4::zeros();
    let mut prev_gap = f64::INFINITY;
    for _ in 0..64 {
        power = power * power;
        let scale = power.amax();
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Singular("subspace iteration"));
        }
        power /= scale;
        let (u, sv) = sorted_svd_u(&power);
        basis = u;
        let gap = sv[keep] / sv[keep - 1];
        if gap < 1e-15 || (gap >= prev_gap * 0.999 && gap < 1e-6) {
            break;
        }
        prev_gap = gap;
    }
    let b = basis.columns(0, keep).into_owned();
    let phit = map.phi.transpose();
    let n = b.transpose() * phit * &b;
    let e = b.transpose() * map.dee * &b;

    // K = NᵀKN + E as a (keep²)-dimensional linear system
    let dim = keep * keep;
    let mut sys = DMatrix::<f64>::identity(dim, dim);
    for i in 0..keep {
        for j in 0..keep {
            for k in 0..keep {
                for l in 0..keep {
                    // (NᵀKN)_{ik} = Σ_{j,l} N_{ji} K_{jl} N_{lk}, vec column-major
                    sys[(i + keep * k, j + keep * l)] -= n[(j, i)] * n[(l, k)];
                }
            }
        }
    }
    let rhs = DVector::from_column_slice(e.as_slice());
    let sol = sys
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("restricted fixed-point system"))?;
    let k = DMatrix::from_column_slice(keep, keep, sol.as_slice());
    let k = (&k + k.transpose()) * 0.5;
    let (vals, vecs) = symmetric_eigen(&k);
    let pairs: Vec<(f64, Vector4<f64>)> = (0..keep)
        .map(|i| {
            let v = &b * vecs.column(i);
            (vals[i], Vector4::new(v[0], v[1], v[2], v[3]).normalize())
        })
        .collect();
    Ok(BoundedSteadyState {
        variances: pairs.iter().map(|p| p.0).collect(),
        axes: pairs.into_iter().map(|p| p.1).collect(),
        unstable_dims: unstable,
        spectral_radius: rho,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<(f64, Covariance4)>,
    pub params: SystemParams,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    pub fn last(&self) -> Option<&Covariance4> {
        self.samples.last().map(|s| &s.1)
    }
}

/// Stroboscopic trajectory sampled every `stride` periods, including t = 0
/// and the final period.
pub fn trajectory_from_map(
    params: &SystemParams,
    map: &PeriodMap,
    c0: &Covariance4,
    periods: usize,
    stride: usize,
) -> Result<Trajectory> {
    if stride == 0 {
        return Err(Error::param("stride", "must be at least 1"));
    }
    let mut samples = Vec::with_capacity(periods / stride + 2);
    let mut c = c0.clone();
    samples.push((0.0, c.clone()));
    for k in 1..=periods {
        c = map.apply(&c);
        check_finite(&c, k)?;
        if k % stride == 0 || k == periods {
            samples.push((k as f64 * map.period, c.clone()));
        }
    }
    Ok(Trajectory {
        samples,
        params: *params,
    })
}

pub fn simulate_trajectory(
    params: &SystemParams,
    c0: &Covariance4,
    periods: usize,
    stride: usize,
    rel_tol: f64,
) -> Result<Trajectory> {
    let map = period_map(params, rel_tol)?;
    trajectory_from_map(params, &map, c0, periods, stride)
}

/// Number of whole drive periods closest to `duration` seconds.
pub fn periods_for(params: &SystemParams, duration: f64) -> usize {
    (duration / params.period()).round().max(0.0) as usize
}
