//! Special functions: Gamma and the exponential integral E1 with its inverse.

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

// Lanczos approximation, g = 7, 9 terms.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for real arguments away from the nonpositive integers.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS[0];
        for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// Exponential integral E1(x) = int_x^inf e^{-u}/u du for x > 0.
///
/// Power series below 1, modified Lentz continued fraction above.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("E1 requires x > 0, got {x}")));
    }
    if x <= 1.0 {
        // E1(x) = -gamma - ln x + sum_{k>=1} (-1)^{k+1} x^k / (k * k!)
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            let kf = k as f64;
            term *= -x / kf;
            let contrib = -term / kf;
            sum += contrib;
            if contrib.abs() < 1e-18 * (sum.abs() + 1e-30) {
                break;
            }
        }
        Ok(-EULER_GAMMA - x.ln() + sum)
    } else {
        // continued fraction e^{-x} * 1/(x+1- 1/(x+3- 4/(x+5- 9/(...))))
        const FPMIN: f64 = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..400 {
            let a = -(i as f64) * (i as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                return Ok(h * (-x).exp());
            }
        }
        Err(Error::Tolerance { achieved: f64::NAN, requested: 1e-16 })
    }
}

/// Inverse of E1 on (0, inf): returns x with E1(x) = u.
///
/// Newton iterations safeguarded by a maintained bracket; seeds come from the
/// small-x and large-x asymptotics of E1.
pub fn inv_exp_integral_e1(u: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::Domain(format!("E1 inverse requires u > 0, got {u}")));
    }
    // E1 is strictly decreasing from +inf (x->0) to 0 (x->inf).
    let mut x = if u > 0.6 {
        // small-x regime: E1(x) ~ -gamma - ln x
        (-EULER_GAMMA - u).exp()
    } else {
        // large-x regime: E1(x) ~ e^{-x}/x, so x + ln x ~ -ln u
        let t = -u.ln();
        let mut x0 = t.max(1e-3);
        for _ in 0..4 {
            x0 = (t - x0.ln()).max(1e-6);
        }
        x0.max(1e-6)
    };
    // establish a bracket [lo, hi] with E1(lo) >= u >= E1(hi)
    let mut lo = x;
    let mut hi = x;
    while exp_integral_e1(lo)? < u {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::Domain("E1 inverse bracket underflow".into()));
        }
    }
    while exp_integral_e1(hi)? > u {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Domain("E1 inverse bracket overflow".into()));
        }
    }
    x = x.clamp(lo, hi);
    for _ in 0..100 {
        let fx = exp_integral_e1(x)? - u;
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // E1'(x) = -e^{-x}/x
        let step = fx / ((-x).exp() / x);
        let mut next = x + step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs() {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_known_values() {
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((gamma(0.5) - sqrt_pi).abs() < 1e-13);
        assert!((gamma(1.0) - 1.0).abs() < 1e-13);
        assert!((gamma(1.5) - sqrt_pi / 2.0).abs() < 1e-13);
        assert!((gamma(4.0) - 6.0).abs() < 1e-12);
        // reflection consistency: Gamma(x)Gamma(1-x) = pi/sin(pi x)
        for &x in &[0.1, 0.25, 0.437, 0.71, 0.9] {
            let lhs = gamma(x) * gamma(1.0 - x);
            let rhs = std::f64::consts::PI / (std::f64::consts::PI * x).sin();
            assert!((lhs - rhs).abs() < 1e-10 * rhs.abs());
        }
    }

    #[test]
    fn e1_matches_series_cf_crossover() {
        // both branches evaluated at the seam must agree
        let a = exp_integral_e1(1.0 - 1e-12).unwrap();
        let b = exp_integral_e1(1.0 + 1e-12).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn e1_inverse_round_trips() {
        for &x in &[1e-4, 0.01, 0.3, 1.0, 2.5, 10.0, 30.0] {
            let u = exp_integral_e1(x).unwrap();
            let back = inv_exp_integral_e1(u).unwrap();
            assert!(
                (back - x).abs() < 1e-10 * x.abs(),
                "x={x} u={u} back={back}"
            );
        }
    }

    #[test]
    fn e1_rejects_nonpositive() {
        assert!(exp_integral_e1(0.0).is_err());
        assert!(inv_exp_integral_e1(-1.0).is_err());
    }
}
