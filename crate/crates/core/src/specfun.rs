//! Modified Bessel functions and the exponential integral in exponentially
//! scaled form.
//!
//! The fading densities multiply `e^{-c(x+y)}` by Bessel factors that overflow
//! individually long before their product does. Every routine here therefore
//! returns a scaled value and callers add the exponents in log space.
//!
//! | function          | small argument                      | large argument                 |
//! |-------------------|-------------------------------------|--------------------------------|
//! | `e^{-x} I_0(x)`   | power series, `x <= 20`             | Hankel expansion               |
//! | `e^{-x} I_n(x)`   | backward ratio recurrence over I_0  | Hankel expansion, `x > 1e5`    |
//! | `e^{x} K_{0,1}(x)`| power series, `x < 2`               | Steed's continued fraction     |
//! | `E_1(x)`          | power series, `x <= 1`              | Lentz continued fraction       |

use std::f64::consts::PI;
use std::ops::Mul;

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Highest order accepted by [`bessel_i_scaled`].
pub const MAX_BESSEL_ORDER: u32 = 64;

const I0_SERIES_LIMIT: f64 = 20.0;
const I_HANKEL_LIMIT: f64 = 1.0e5;
const K_SERIES_LIMIT: f64 = 2.0;

/// A non-negative value stored as `mantissa * exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledValue {
    pub mantissa: f64,
    pub log_scale: f64,
}

impl ScaledValue {
    pub fn new(mantissa: f64, log_scale: f64) -> Self {
        Self { mantissa, log_scale }
    }

    pub fn from_f64(value: f64) -> Self {
        Self::new(value, 0.0)
    }

    /// Natural logarithm of the represented value.
    pub fn ln(self) -> f64 {
        self.mantissa.ln() + self.log_scale
    }

    pub fn to_f64(self) -> f64 {
        if self.mantissa == 0.0 {
            return 0.0;
        }
        let direct = self.mantissa * self.log_scale.exp();
        if direct.is_finite() && direct > f64::MIN_POSITIVE {
            direct
        } else {
            self.ln().exp()
        }
    }
}

impl Mul for ScaledValue {
    type Output = ScaledValue;

    fn mul(self, rhs: ScaledValue) -> ScaledValue {
        ScaledValue::new(self.mantissa * rhs.mantissa, self.log_scale + rhs.log_scale)
    }
}

/// `e^{-x} I_order(x)` for `order <= 64`, `x >= 0`.
pub fn bessel_i_scaled(order: u32, x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain {
            func: "bessel_i_scaled",
            value: x,
            expected: "finite x >= 0",
        });
    }
    if order > MAX_BESSEL_ORDER {
        return Err(Error::Domain {
            func: "bessel_i_scaled",
            value: order as f64,
            expected: "integer order <= 64",
        });
    }
    let mut orders = [0.0; MAX_BESSEL_ORDER as usize + 1];
    let slice = &mut orders[..=order as usize];
    bessel_i_scaled_seq(x, slice);
    Ok(slice[order as usize])
}

/// `I_order(x)` as a [`ScaledValue`] (mantissa `e^{-x} I`, log scale `x`).
pub fn bessel_i(order: u32, x: f64) -> Result<ScaledValue> {
    Ok(ScaledValue::new(bessel_i_scaled(order, x)?, x))
}

/// Fills `out[n] = e^{-x} I_n(x)` for `n = 0..out.len()`.
///
/// `x` must be finite and non-negative; this is the unchecked kernel used by
/// the density code, which evaluates every order of the Rician series at once.
pub fn bessel_i_scaled_seq(x: f64, out: &mut [f64]) {
    debug_assert!(x >= 0.0 && x.is_finite());
    let Some((first, rest)) = out.split_first_mut() else {
        return;
    };
    if x == 0.0 {
        *first = 1.0;
        rest.fill(0.0);
        return;
    }
    if x > I_HANKEL_LIMIT {
        for (n, v) in out.iter_mut().enumerate() {
            *v = hankel_i_scaled(n as u32, x);
        }
        return;
    }
    *first = i0_scaled(x);
    backward_ratios(x, out);
}

/// Multiplies `out[0]` through by the ratios `I_k / I_{k-1}`.
///
/// The ratios come from the backward recurrence `r_k = 1 / (2k/x + r_{k+1})`
/// started well above the highest requested order; the start offset makes
/// `(I_start / I_top)^2`, which bounds the propagated starting error, below
/// `e^{-40}`.
fn backward_ratios(x: f64, out: &mut [f64]) {
    let top = out.len() - 1;
    if top == 0 {
        return;
    }
    let start = ((top * top) as f64 + 40.0 * x).sqrt().ceil() as usize + 8;
    let two_over_x = 2.0 / x;
    let mut ratio = 0.0;
    for k in (1..=start).rev() {
        ratio = 1.0 / (k as f64 * two_over_x + ratio);
        if k <= top {
            out[k] = ratio;
        }
    }
    for k in 1..=top {
        out[k] *= out[k - 1];
    }
}

fn i0_scaled(x: f64) -> f64 {
    if x <= I0_SERIES_LIMIT {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut m = 1.0;
        loop {
            term *= q / (m * m);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
            m += 1.0;
        }
        sum * (-x).exp()
    } else {
        hankel_i_scaled(0, x)
    }
}

/// Large-argument expansion of `e^{-x} I_order(x)`.
fn hankel_i_scaled(order: u32, x: f64) -> f64 {
    let mu = 4.0 * f64::from(order).powi(2);
    let mut term = 1.0f64;
    let mut sum = 1.0;
    for k in 1..500 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (8.0 * k as f64 * x);
        if k > order && next.abs() > term.abs() {
            break;
        }
        sum += next;
        term = next;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}

/// `e^{x} K_order(x)` for `order` 0 or 1 and `x > 0`.
pub fn bessel_k_scaled(order: u32, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain {
            func: "bessel_k_scaled",
            value: x,
            expected: "x > 0",
        });
    }
    match order {
        0 => Ok(bessel_k01_scaled(x).0),
        1 => Ok(bessel_k01_scaled(x).1),
        _ => Err(Error::Domain {
            func: "bessel_k_scaled",
            value: order as f64,
            expected: "order 0 or 1",
        }),
    }
}

/// `K_order(x)` as a [`ScaledValue`] (mantissa `e^{x} K`, log scale `-x`).
pub fn bessel_k(order: u32, x: f64) -> Result<ScaledValue> {
    Ok(ScaledValue::new(bessel_k_scaled(order, x)?, -x))
}

/// `(e^{x} K_0(x), e^{x} K_1(x))` for `x > 0` (unchecked).
pub fn bessel_k01_scaled(x: f64) -> (f64, f64) {
    debug_assert!(x > 0.0);
    if x < K_SERIES_LIMIT {
        k01_series(x)
    } else if x.is_infinite() {
        (0.0, 0.0)
    } else {
        k01_steed(x)
    }
}

fn k01_series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let ln_half = (0.5 * x).ln();
    // term0 = q^k / (k!)^2, term1 = q^k / (k! (k+1)!), h = H_k
    let mut term0 = 1.0;
    let mut term1 = 1.0;
    let mut h = 0.0;
    let (mut i0, mut i1, mut s0, mut s1) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..60 {
        let kf = k as f64;
        if k > 0 {
            term0 *= q / (kf * kf);
            term1 *= q / (kf * (kf + 1.0));
            h += 1.0 / kf;
        }
        let h_next = h + 1.0 / (kf + 1.0);
        i0 += term0;
        i1 += term1;
        s0 += h * term0;
        // psi(k+1) + psi(k+2)
        s1 += (h + h_next - 2.0 * EULER_GAMMA) * term1;
        if term0 < 1e-18 * i0 && k > 1 {
            break;
        }
    }
    i1 *= 0.5 * x;
    let k0 = -(ln_half + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + ln_half * i1 - 0.25 * x * s1;
    let scale = x.exp();
    (k0 * scale, k1 * scale)
}

/// Steed's continued fraction (CF2) for `K_0` and `K_1`, `x >= 2`.
fn k01_steed(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// Exponential integral `E_1(x) = \int_x^\infty e^{-t}/t dt`, `x > 0`.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    check_e1_domain(x, "exp_integral_e1")?;
    if x <= 1.0 {
        Ok(e1_series(x))
    } else {
        Ok(e1_cf_scaled(x) * (-x).exp())
    }
}

/// `e^{x} E_1(x)`, finite for every `x > 0` and tending to `1/x` as `x -> \infty`.
pub fn exp_integral_e1_scaled(x: f64) -> Result<f64> {
    check_e1_domain(x, "exp_integral_e1_scaled")?;
    if x.is_infinite() {
        Ok(0.0)
    } else if x <= 1.0 {
        Ok(e1_series(x) * x.exp())
    } else {
        Ok(e1_cf_scaled(x))
    }
}

fn check_e1_domain(x: f64, func: &'static str) -> Result<()> {
    if x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            func,
            value: x,
            expected: "x > 0",
        })
    }
}

fn e1_series(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for n in 1..200 {
        let nf = n as f64;
        term *= -x / nf;
        let contrib = term / nf;
        sum += contrib;
        if contrib.abs() < 1e-18 {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

// Modified Lentz evaluation of the continued fraction for e^x E_1(x), x > 1.
fn e1_cf_scaled(x: f64) -> f64 {
    let mut b = x + 1.0;
    let mut c = 1.0 / f64::MIN_POSITIVE;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// Composite Simpson on [a, b] with `n` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    /// `e^{x} K_nu(x) = \int_0^\infty e^{-x (cosh t - 1)} cosh(nu t) dt`.
    fn k_integral_oracle(nu: f64, x: f64) -> f64 {
        simpson(|t| (-x * (t.cosh() - 1.0)).exp() * (nu * t).cosh(), 0.0, 12.0, 200_000)
    }

    #[test]
    fn i_scaled_small_cases() {
        assert_eq!(bessel_i_scaled(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i_scaled(1, 0.0).unwrap(), 0.0);
        // 60-term power series oracle
        let mut term = 1.0;
        let mut sum = 1.0;
        for m in 1..60 {
            term *= 0.25 / (m as f64 * m as f64);
            sum += term;
        }
        let oracle = sum * (-1.0f64).exp();
        assert!(rel(bessel_i_scaled(0, 1.0).unwrap(), oracle) < 1e-14);
        assert!((oracle - 0.46576).abs() < 1e-5);
    }

    #[test]
    fn i_scaled_matches_series_oracle_for_higher_orders() {
        // I_n(x) = (x/2)^n sum_m (x^2/4)^m / (m! (m+n)!)
        for &x in &[0.3, 2.5, 9.0, 17.0] {
            for n in 0..12u32 {
                let q = 0.25 * x * x;
                let mut lead = 1.0;
                for j in 1..=n {
                    lead *= 0.5 * x / j as f64;
                }
                let mut term = lead;
                let mut sum = lead;
                for m in 1..200 {
                    term *= q / (m as f64 * (m + n as usize) as f64);
                    sum += term;
                }
                let oracle = sum * (-x).exp();
                let got = bessel_i_scaled(n, x).unwrap();
                assert!(rel(got, oracle) < 1e-13, "n={n} x={x} {got} {oracle}");
            }
        }
    }

    #[test]
    fn i_scaled_orders_monotone_and_bounded() {
        for &x in &[0.1, 1.0, 30.0, 500.0, 2e5] {
            let mut v = [0.0; 65];
            bessel_i_scaled_seq(x, &mut v);
            assert!(v[0] > 0.0 && v[0] <= 1.0);
            for k in 1..65 {
                assert!(v[k] <= v[k - 1], "x={x} k={k}");
            }
        }
    }

    #[test]
    fn hankel_and_recurrence_agree_at_switch() {
        let x = I_HANKEL_LIMIT;
        let mut rec = [0.0; 65];
        rec[0] = hankel_i_scaled(0, x);
        backward_ratios(x, &mut rec);
        for n in [0u32, 1, 5, 20, 64] {
            let h = hankel_i_scaled(n, x);
            assert!(rel(rec[n as usize], h) < 1e-12, "n={n}");
        }
        // and the I_0 switch at 20
        let q = 0.25 * 400.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for m in 1..200 {
            term *= q / (m as f64 * m as f64);
            sum += term;
        }
        assert!(rel(hankel_i_scaled(0, 20.0), sum * (-20.0f64).exp()) < 1e-14);
    }

    #[test]
    fn k_scaled_matches_integral_oracle() {
        let k0 = bessel_k_scaled(0, 1.0).unwrap();
        let k1 = bessel_k_scaled(1, 1.0).unwrap();
        assert!(rel(k0, k_integral_oracle(0.0, 1.0)) < 1e-10);
        assert!(rel(k1, k_integral_oracle(1.0, 1.0)) < 1e-10);
        assert!((k0 - 1.14446).abs() < 1e-5);
        assert!((k1 - 1.63615).abs() < 1e-5);
        for &x in &[0.05, 0.5, 1.99, 2.0, 2.01, 3.7, 10.0, 40.0] {
            for nu in 0..2u32 {
                let got = bessel_k_scaled(nu, x).unwrap();
                let want = k_integral_oracle(nu as f64, x);
                assert!(rel(got, want) < 1e-9, "nu={nu} x={x} {got} {want}");
            }
        }
    }

    #[test]
    fn k_scaled_asymptote() {
        let k = bessel_k_scaled(0, 50.0).unwrap();
        let asym = (PI / 100.0).sqrt();
        assert!(rel(k, asym) < 0.01);
        assert!(bessel_k_scaled(0, 1e6).unwrap().is_finite());
    }

    #[test]
    fn domain_errors() {
        assert!(bessel_i_scaled(0, -1.0).is_err());
        assert!(bessel_i_scaled(65, 1.0).is_err());
        assert!(bessel_k_scaled(0, 0.0).is_err());
        assert!(bessel_k_scaled(2, 1.0).is_err());
        assert!(exp_integral_e1(0.0).is_err());
        assert!(exp_integral_e1(-2.0).is_err());
    }

    #[test]
    fn e1_values() {
        // int_1^inf e^{-t}/t dt = int_0^1 e^{-1/s}/s ds
        let oracle = simpson(|s| if s == 0.0 { 0.0 } else { (-1.0 / s).exp() / s }, 0.0, 1.0, 200_000);
        let e1 = exp_integral_e1(1.0).unwrap();
        assert!(rel(e1, oracle) < 1e-10);
        assert!((e1 - 0.21938).abs() < 1e-5);

        let e10 = exp_integral_e1(10.0).unwrap();
        let base = (-10.0f64).exp();
        assert!(e10 < base / 10.0 * 1.2 && e10 > base / 11.0);

        let x = 1e-8;
        let lim = exp_integral_e1(x).unwrap() + x.ln();
        assert!((lim + EULER_GAMMA).abs() < 2e-8);
        assert!((lim + 0.57721).abs() < 1e-5);
    }

    #[test]
    fn e1_scaled_consistent() {
        for &x in &[0.01, 0.5, 1.0, 2.0, 30.0] {
            let plain = exp_integral_e1(x).unwrap() * x.exp();
            assert!(rel(exp_integral_e1_scaled(x).unwrap(), plain) < 1e-13);
        }
        // e^x E1(x) ~ (1/x)(1 - 1/x + 2/x^2) for large x
        let x = 1e6;
        let asym = (1.0 - 1.0 / x + 2.0 / (x * x)) / x;
        assert!(rel(exp_integral_e1_scaled(x).unwrap(), asym) < 1e-12);
        assert!(exp_integral_e1_scaled(0.0).is_err());
    }

    #[test]
    fn e1_continuity_at_switch() {
        let below = exp_integral_e1(1.0 - 1e-12).unwrap();
        let above = exp_integral_e1(1.0 + 1e-12).unwrap();
        assert!(rel(below, above) < 1e-10);
    }

    #[test]
    fn scaled_value_round_trip() {
        for &v in &[1e-300, 3.5, 1e300] {
            let s = ScaledValue::from_f64(v);
            assert!(rel(s.to_f64(), v) < 1e-12);
        }
        let i = bessel_i(0, 800.0).unwrap();
        let k = bessel_k(0, 800.0).unwrap();
        // I_0(800) K_0(800) ~ 1/(2*800)
        let prod = (i * k).to_f64();
        assert!(rel(prod, 1.0 / 1600.0) < 1e-4);
        assert!(bessel_i(3, 1e6).unwrap().mantissa.is_finite());
    }

    proptest! {
        #[test]
        fn wronskian(x in 0.1f64..30.0) {
            let i0 = bessel_i_scaled(0, x).unwrap();
            let i1 = bessel_i_scaled(1, x).unwrap();
            let (k0, k1) = bessel_k01_scaled(x);
            // the e^{+-x} scalings cancel
            let w = i0 * k1 + i1 * k0;
            prop_assert!(rel(w, 1.0 / x) < 1e-8);
        }

        #[test]
        fn recurrence(x in 0.5f64..20.0, k in 1u32..=10) {
            let lo = bessel_i_scaled(k - 1, x).unwrap();
            let mid = bessel_i_scaled(k, x).unwrap();
            let hi = bessel_i_scaled(k + 1, x).unwrap();
            let rhs = lo - 2.0 * k as f64 / x * mid;
            prop_assert!(rel(hi, rhs) < 1e-8);
        }

        #[test]
        fn finite_for_large_arguments(x in 1.0f64..1e6, n in 0u32..=64) {
            let v = bessel_i_scaled(n, x).unwrap();
            prop_assert!(v.is_finite() && v >= 0.0);
            let k = bessel_k_scaled(1, x).unwrap();
            prop_assert!(k.is_finite() && k > 0.0);
        }

        #[test]
        fn e1_decreasing(x in 0.01f64..50.0) {
            let a = exp_integral_e1(x).unwrap();
            let b = exp_integral_e1(x * 1.01).unwrap();
            prop_assert!(b < a);
        }
    }
}
