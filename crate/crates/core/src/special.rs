//! Spherical Bessel and Hankel functions of real argument, and Legendre
//! polynomials.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

/// Spherical Bessel functions of the first kind `j_0(x) ..= j_n(x)`.
///
/// Upward recurrence is stable while `l < x`; beyond that the sequence is
/// obtained by Miller's downward recurrence normalized against `j_0`.
pub fn spherical_jn(n: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    if n == 0 {
        out[0] = j0;
        return out;
    }
    let j1 = s / (x * x) - c / x;
    if (n as f64) < x {
        out[0] = j0;
        out[1] = j1;
        for l in 1..n {
            out[l + 1] = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
        }
        return out;
    }

    let start = n + 16 + (40.0 * (n as f64).max(x)).sqrt() as usize;
    let mut next = 0.0;
    let mut cur = 1e-300;
    let mut seq = vec![0.0; n + 1];
    for l in (1..=start).rev() {
        let prev = (2 * l + 1) as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if l - 1 <= n {
            seq[l - 1] = cur;
        }
        // rescale to avoid overflow far above the turning point
        if cur.abs() > 1e250 {
            next /= 1e250;
            cur /= 1e250;
            for v in seq.iter_mut() {
                *v /= 1e250;
            }
        }
    }
    // normalize against whichever of j0, j1 is better conditioned
    let scale = if j0.abs() >= j1.abs() {
        j0 / seq[0]
    } else {
        j1 / seq[1]
    };
    for (o, v) in out.iter_mut().zip(&seq) {
        *o = v * scale;
    }
    out
}

/// Spherical Bessel functions of the second kind `y_0(x) ..= y_n(x)` by
/// upward recurrence, which is stable for all orders.
pub fn spherical_yn(n: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    let (s, c) = x.sin_cos();
    out[0] = -c / x;
    if n >= 1 {
        out[1] = -c / (x * x) - s / x;
    }
    for l in 1..n {
        out[l + 1] = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
    }
    out
}

/// Derivatives of a spherical Bessel sequence `f_0..=f_n` given `f_0..=f_{n+1}`:
/// `f_l'(x) = l/x f_l(x) − f_{l+1}(x)`.
pub fn derivative(seq: &[f64], x: f64) -> Vec<f64> {
    let n = seq.len() - 1;
    (0..n).map(|l| l as f64 / x * seq[l] - seq[l + 1]).collect()
}

/// Spherical Hankel functions of the first kind `h_l = j_l + i y_l` for
/// `l = 0..=n`.
pub fn spherical_h1(n: usize, x: f64) -> Vec<Complex64> {
    let j = spherical_jn(n, x);
    let y = spherical_yn(n, x);
    j.iter().zip(&y).map(|(&a, &b)| Complex64::new(a, b)).collect()
}

/// Legendre polynomials `P_0(t) ..= P_n(t)` by Bonnet's recurrence.
pub fn legendre(n: usize, t: f64) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    if n >= 1 {
        p[1] = t;
    }
    for l in 1..n {
        p[l + 1] = ((2 * l + 1) as f64 * t * p[l] - l as f64 * p[l - 1]) / (l + 1) as f64;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    // closed forms for low orders
    fn j2(x: f64) -> f64 {
        (3.0 / (x * x) - 1.0) * x.sin() / x - 3.0 * x.cos() / (x * x)
    }
    fn y2(x: f64) -> f64 {
        (-3.0 / (x * x) + 1.0) * x.cos() / x - 3.0 * x.sin() / (x * x)
    }

    #[test]
    fn low_orders_match_closed_forms() {
        for &x in &[0.7, 3.0, 12.5, 80.0] {
            let j = spherical_jn(4, x);
            let y = spherical_yn(4, x);
            assert!((j[2] - j2(x)).abs() <= 1e-10 * j2(x).abs().max(1e-12), "x={x}");
            assert!((y[2] - y2(x)).abs() <= 1e-10 * y2(x).abs(), "x={x}");
        }
    }

    #[test]
    fn small_argument_series() {
        // j_2(x) = x^2/15 (1 - x^2/14 + x^4/504 - ...), where the closed form cancels
        let x: f64 = 0.05;
        let series = x * x / 15.0 * (1.0 - x * x / 14.0 + x.powi(4) / 504.0);
        let j = spherical_jn(4, x);
        assert!((j[2] - series).abs() <= 1e-12 * series);
        let y = spherical_yn(4, x);
        assert!((y[2] - y2(x)).abs() <= 1e-10 * y2(x).abs());
    }

    #[test]
    fn downward_and_upward_agree_near_turning_point() {
        // x slightly larger than n selects upward; compare with a longer
        // downward sequence computed from a larger n
        let x = 20.5;
        let up = spherical_jn(20, x);
        let down = spherical_jn(40, x);
        for l in 0..=20 {
            assert!((up[l] - down[l]).abs() < 1e-12, "l={l}");
        }
    }

    #[test]
    fn wronskian_holds() {
        // j_l y_{l-1} - j_{l-1} y_l = 1/x^2
        for &x in &[0.3, 2.0, 15.0, 60.0] {
            let j = spherical_jn(30, x);
            let y = spherical_yn(30, x);
            for l in 1..=30 {
                let w = j[l] * y[l - 1] - j[l - 1] * y[l];
                let rel = (w * x * x - 1.0).abs();
                assert!(rel < 1e-8, "x={x} l={l} rel={rel}");
            }
        }
    }

    #[test]
    fn small_argument_high_order_is_tiny() {
        let j = spherical_jn(10, 0.05);
        assert!(j[10] > 0.0 && j[10] < 1e-20);
    }

    #[test]
    fn legendre_values() {
        let p = legendre(3, 0.5);
        assert!((p[2] - (-0.125)).abs() < 1e-15);
        assert!((p[3] - (-0.4375)).abs() < 1e-15);
        let p = legendre(20, 1.0);
        assert!(p.iter().all(|&v| (v - 1.0).abs() < 1e-13));
    }
}
