//! Integer-order Bessel functions of the first kind by Miller's backward
//! recurrence.

const RESCALE_ABOVE: f64 = 1e250;

/// J_0(x), …, J_nmax(x).
pub fn bessel_j_orders(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let top = nmax.max(ax.ceil() as usize);
    // start well above the turning point so the seed's error has decayed
    let mut m = top + 20 + (40.0 * (top as f64 + 1.0)).sqrt() as usize;
    if m % 2 == 1 {
        m += 1;
    }

    let mut j_next = 0.0; // J_{k+1}
    let mut j_k = 1e-300; // J_k, unnormalised
    let mut norm = 0.0;
    for k in (1..=m).rev() {
        // J_{k-1} = (2k/x) J_k - J_{k+1}
        let j_prev = 2.0 * k as f64 / ax * j_k - j_next;
        j_next = j_k;
        j_k = j_prev;
        let order = k - 1;
        if order <= nmax {
            out[order] = j_k;
        }
        if order > 0 && order % 2 == 0 {
            norm += 2.0 * j_k;
        }
        if j_k.abs() > RESCALE_ABOVE {
            let s = 1.0 / RESCALE_ABOVE;
            j_k *= s;
            j_next *= s;
            norm *= s;
            for v in out.iter_mut().skip(order) {
                *v *= s;
            }
        }
    }
    norm += j_k; // J_0
    for v in &mut out {
        *v /= norm;
    }
    if x < 0.0 {
        for (n, v) in out.iter_mut().enumerate() {
            if n % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// J_n(x) for any integer n.
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let k = n.unsigned_abs() as usize;
    let v = bessel_j_orders(k, x)[k];
    if n < 0 && k % 2 == 1 {
        -v
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn series(n: usize, x: f64) -> f64 {
        // Σ_k (-1)^k (x/2)^{2k+n} / (k! (k+n)!)
        let mut term = (x / 2.0).powi(n as i32);
        for i in 1..=n {
            term /= i as f64;
        }
        let mut sum = term;
        for k in 1..200 {
            term *= -(x / 2.0).powi(2) / (k as f64 * (k + n) as f64);
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    }

    fn integral(n: i64, x: f64) -> f64 {
        // (1/π)∫₀^π cos(nτ − x sin τ)dτ; the periodic trapezoid rule is
        // spectrally accurate here
        let m = 4000;
        let h = PI / m as f64;
        let f = |t: f64| (n as f64 * t - x * t.sin()).cos();
        let mut s = 0.5 * (f(0.0) + f(PI));
        for i in 1..m {
            s += f(i as f64 * h);
        }
        s * h / PI
    }

    #[test]
    fn agrees_with_power_series() {
        for &x in &[0.01, 0.3, 1.0, 2.5, 4.0] {
            for n in 0..12 {
                let a = bessel_j(n as i64, x);
                let b = series(n, x);
                assert!(
                    (a - b).abs() <= 1e-12 * b.abs().max(1e-300) || (a - b).abs() < 1e-17,
                    "J_{n}({x}): {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn agrees_with_integral_representation() {
        for &x in &[-7.3, 0.7, 12.0, 30.5] {
            for n in [-5i64, -1, 0, 1, 2, 7, 25] {
                let a = bessel_j(n, x);
                let b = integral(n, x);
                assert!((a - b).abs() < 1e-13, "J_{n}({x}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn known_values() {
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(3, 0.0), 0.0);
    }

    #[test]
    fn deep_orders_stay_finite_and_tiny() {
        let v = bessel_j_orders(300, 0.1);
        assert!(v.iter().all(|x| x.is_finite()));
        assert!(v[300].abs() < 1e-300 || v[300] == 0.0);
        assert!((v[0] - series(0, 0.1)).abs() < 1e-15);
    }

    #[test]
    fn normalisation_identity() {
        for &x in &[0.2, 3.0, 17.0] {
            let v = bessel_j_orders(80, x);
            let s = v[0] + 2.0 * v.iter().skip(2).step_by(2).sum::<f64>();
            assert!((s - 1.0).abs() < 1e-13);
        }
    }
}
