//! Analytic densities: Rician power marginals, the bivariate Rician series,
//! the product-channel density, the joint density of the two product SNRs
//! of the secrecy scenarios, and the correlated Rayleigh closed forms.
//!
//! Exponential-times-Bessel products are assembled from scaled Bessel values
//! with a single exponential at the end, so nothing overflows at high SNR.

use serde::{Deserialize, Serialize};

use crate::channel::{validate_k, FadingParams, Topology, LOS_LIMIT_K};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_real_line, integrate_semi_infinite, QuadResult, QuadSettings};
use crate::specfun::{bessel_i_scaled, bessel_i_scaled_seq, bessel_k01_scaled, MAX_BESSEL_ORDER};

const MAX_TERMS: usize = MAX_BESSEL_ORDER as usize;
const CONVERGED_REL: f64 = 1e-17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationPolicy {
    /// Exactly `n_terms` terms.
    Fixed,
    /// At least `n_terms` terms, extended until the next term is negligible
    /// (relative 1e-17) or 64 terms are reached.
    Converged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesSettings {
    pub n_terms: usize,
    pub policy: TruncationPolicy,
}

impl Default for SeriesSettings {
    fn default() -> Self {
        Self {
            n_terms: 10,
            policy: TruncationPolicy::Converged,
        }
    }
}

impl SeriesSettings {
    pub fn fixed(n_terms: usize) -> Self {
        Self {
            n_terms,
            policy: TruncationPolicy::Fixed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_TERMS).contains(&self.n_terms) {
            return Err(Error::invalid(
                "n_terms",
                format!("{} is outside [1, {MAX_TERMS}]", self.n_terms),
            ));
        }
        Ok(())
    }
}

fn check_density_params(params: &FadingParams) -> Result<()> {
    params.validate()?;
    if params.is_los_limit() {
        return Err(Error::invalid(
            "k",
            format!("K >= {LOS_LIMIT_K:e} is deterministic and has no density"),
        ));
    }
    Ok(())
}

/// Density of `|h|^2` for a unit-mean Rician channel with factor `k`.
pub fn rician_power_pdf(x: f64, k: f64) -> Result<f64> {
    validate_k("k", k)?;
    if !(x >= 0.0) {
        return Err(Error::Domain {
            func: "rician_power_pdf",
            value: x,
            expected: "x >= 0",
        });
    }
    Ok(RicianPower::new(k).pdf(x))
}

/// Unit-mean Rician power marginal with precomputed constants.
#[derive(Debug, Clone, Copy)]
pub struct RicianPower {
    k: f64,
    shape: f64,
}

impl RicianPower {
    pub fn new(k: f64) -> Self {
        Self {
            k,
            shape: 2.0 * (k * (k + 1.0)).sqrt(),
        }
    }

    #[inline]
    pub fn pdf(&self, x: f64) -> f64 {
        let k1 = self.k + 1.0;
        if self.k == 0.0 {
            return (-x).exp();
        }
        let arg = self.shape * x.sqrt();
        // arg - K - (K+1)x = -(sqrt K - sqrt((K+1)x))^2
        let d = self.k.sqrt() - (k1 * x).sqrt();
        k1 * scaled_i0(arg) * (-d * d).exp()
    }
}

#[inline]
fn scaled_i0(x: f64) -> f64 {
    bessel_i_scaled(0, x).unwrap_or(0.0)
}

/// Bivariate density of `(|h_P|^2, |h_I|^2)` for the correlated pair.
#[derive(Debug, Clone)]
pub struct BivariateRician {
    k: f64,
    c: f64,
    alpha: f64,
    beta: f64,
    log_prefactor: f64,
    series: SeriesSettings,
    independent: Option<RicianPower>,
}

/// Values that depend on one argument only, reused across many evaluations.
#[derive(Clone)]
pub struct CachedSeq {
    arg: f64,
    seq: [f64; MAX_TERMS],
}

impl CachedSeq {
    fn new(arg: f64) -> Self {
        let mut seq = [0.0; MAX_TERMS];
        bessel_i_scaled_seq(arg, &mut seq);
        Self { arg, seq }
    }
}

impl BivariateRician {
    pub fn new(params: &FadingParams, series: &SeriesSettings) -> Result<Self> {
        check_density_params(params)?;
        series.validate()?;
        let (k, rho) = (params.k, params.rho);
        let k1 = k + 1.0;
        let one_m_p = 1.0 - rho * rho;
        Ok(Self {
            k,
            c: k1 / one_m_p,
            alpha: 2.0 * rho * k1 / one_m_p,
            beta: 2.0 / (1.0 + rho) * (k * k1).sqrt(),
            log_prefactor: 2.0 * k1.ln() - one_m_p.ln() - 2.0 * k / (1.0 + rho),
            series: *series,
            independent: (rho == 0.0).then(|| RicianPower::new(k)),
        })
    }

    pub fn pdf(&self, x: f64, y: f64) -> f64 {
        if let Some(m) = &self.independent {
            return m.pdf(x) * m.pdf(y);
        }
        self.eval(x, y, None, None)
    }

    /// Cache for evaluations sharing the first argument `x`.
    pub fn slice_x(&self, x: f64) -> CachedSeq {
        CachedSeq::new(self.beta * x.sqrt())
    }

    /// `pdf(x, y)` with the `x`-only factor taken from [`Self::slice_x`].
    pub fn pdf_sliced_x(&self, slice: &CachedSeq, x: f64, y: f64) -> f64 {
        if let Some(m) = &self.independent {
            return m.pdf(x) * m.pdf(y);
        }
        self.eval(x, y, None, Some(slice))
    }

    /// Cache for evaluations sharing the product `x y = u`.
    pub fn slice_product(&self, u: f64) -> CachedSeq {
        CachedSeq::new(self.alpha * u.sqrt())
    }

    /// `pdf(x, y)` with `x y` equal to the `u` of [`Self::slice_product`].
    pub fn pdf_sliced_product(&self, slice: &CachedSeq, x: f64, y: f64) -> f64 {
        if let Some(m) = &self.independent {
            return m.pdf(x) * m.pdf(y);
        }
        self.eval(x, y, Some(slice), None)
    }

    fn eval(&self, x: f64, y: f64, prod: Option<&CachedSeq>, first: Option<&CachedSeq>) -> f64 {
        if !(x >= 0.0 && y >= 0.0) || x.is_infinite() || y.is_infinite() {
            return 0.0;
        }
        let (sx, sy) = (x.sqrt(), y.sqrt());
        let a = prod.map_or(self.alpha * sx * sy, |s| s.arg);
        let b1 = first.map_or(self.beta * sx, |s| s.arg);
        let b2 = self.beta * sy;
        let exponent = self.log_prefactor - self.c * (x + y) + a + b1 + b2;
        if exponent < -745.0 {
            return 0.0;
        }
        let sum = if self.k == 0.0 {
            // only the k = 0 term survives when the LOS component vanishes
            prod.map_or_else(|| scaled_i0(a), |s| s.seq[0])
        } else {
            self.series_sum(a, b1, b2, prod, first)
        };
        sum * exponent.exp()
    }

    fn series_sum(&self, a: f64, b1: f64, b2: f64, prod: Option<&CachedSeq>, first: Option<&CachedSeq>) -> f64 {
        let n = self.series.n_terms;
        let mut len = match self.series.policy {
            TruncationPolicy::Fixed => n,
            TruncationPolicy::Converged => (n + 1).clamp(16, MAX_TERMS),
        };
        let mut ia = [0.0; MAX_TERMS];
        let mut ib1 = [0.0; MAX_TERMS];
        let mut ib2 = [0.0; MAX_TERMS];
        loop {
            let sa: &[f64] = match prod {
                Some(s) => &s.seq[..len],
                None => {
                    bessel_i_scaled_seq(a, &mut ia[..len]);
                    &ia[..len]
                }
            };
            let s1: &[f64] = match first {
                Some(s) => &s.seq[..len],
                None => {
                    bessel_i_scaled_seq(b1, &mut ib1[..len]);
                    &ib1[..len]
                }
            };
            bessel_i_scaled_seq(b2, &mut ib2[..len]);
            let mut sum = sa[0] * s1[0] * ib2[0];
            let mut settled = false;
            for kk in 1..len {
                let term = 2.0 * sa[kk] * s1[kk] * ib2[kk];
                if self.series.policy == TruncationPolicy::Converged && kk >= n && term <= CONVERGED_REL * sum {
                    settled = true;
                    break;
                }
                sum += term;
            }
            if self.series.policy == TruncationPolicy::Fixed || settled || len == MAX_TERMS {
                return sum;
            }
            len = (2 * len).min(MAX_TERMS);
        }
    }
}

/// Truncated-series bivariate density of the correlated pair (product of the
/// marginals when `rho = 0`).
pub fn bivariate_rician_pdf(x: f64, y: f64, params: &FadingParams, series: &SeriesSettings) -> Result<f64> {
    if !(x >= 0.0 && y >= 0.0) {
        return Err(Error::Domain {
            func: "bivariate_rician_pdf",
            value: x.min(y),
            expected: "x >= 0 and y >= 0",
        });
    }
    Ok(BivariateRician::new(params, series)?.pdf(x, y))
}

/// Density of `u = x y` at one point, by quadrature over `x = sqrt(u) e^s`.
pub fn product_pdf_numeric(
    u: f64,
    params: &FadingParams,
    series: &SeriesSettings,
    quad: &QuadSettings,
) -> Result<QuadResult> {
    let density = BivariateRician::new(params, series)?;
    product_pdf_with(&density, u, quad)
}

pub(crate) fn product_pdf_with(density: &BivariateRician, u: f64, quad: &QuadSettings) -> Result<QuadResult> {
    if !(u > 0.0) || u.is_infinite() {
        return Err(Error::Domain {
            func: "product_pdf_numeric",
            value: u,
            expected: "0 < u < inf",
        });
    }
    let root = u.sqrt();
    let slice = density.slice_product(u);
    // symmetric in s -> -s since the pair density is symmetric
    let f = |s: f64| {
        let e = s.exp();
        2.0 * density.pdf_sliced_product(&slice, root * e, root / e)
    };
    let half_log = 0.5 * u.ln().abs();
    integrate_semi_infinite(f, 0.0, &[half_log, half_log + 1.0], quad)
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid("p", format!("{p} is outside [0, 1)")));
    }
    Ok(())
}

fn check_gamma_bar(gamma_bar: f64) -> Result<()> {
    if !(gamma_bar > 0.0 && gamma_bar.is_finite()) {
        return Err(Error::invalid("gamma_bar", "must be finite and > 0"));
    }
    Ok(())
}

/// Density of the correlated Rayleigh product SNR with achieved average
/// `gamma_bar` and power correlation `p`.
pub fn rayleigh_product_pdf(gamma: f64, gamma_bar: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    check_gamma_bar(gamma_bar)?;
    if !(gamma > 0.0) {
        return Err(Error::Domain {
            func: "rayleigh_product_pdf",
            value: gamma,
            expected: "gamma > 0",
        });
    }
    if gamma.is_infinite() {
        return Ok(0.0);
    }
    let a = 2.0 / (1.0 - p) * ((1.0 + p) / gamma_bar).sqrt();
    let big = a * gamma.sqrt();
    let small = p.sqrt() * big;
    let (k0, _) = bessel_k01_scaled(big);
    Ok(2.0 / gamma_bar * (1.0 + p) / (1.0 - p) * scaled_i0(small) * k0 * (small - big).exp())
}

/// Distribution function matching [`rayleigh_product_pdf`].
pub fn rayleigh_product_cdf(gamma: f64, gamma_bar: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    check_gamma_bar(gamma_bar)?;
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::Domain {
            func: "rayleigh_product_cdf",
            value: gamma,
            expected: "gamma >= 0",
        });
    }
    if gamma == 0.0 {
        return Ok(0.0);
    }
    if gamma.is_infinite() {
        return Ok(1.0);
    }
    let a = 2.0 / (1.0 - p) * ((1.0 + p) / gamma_bar).sqrt();
    let big = a * gamma.sqrt();
    let small = p.sqrt() * big;
    let (k0, k1) = bessel_k01_scaled(big);
    let mut i = [0.0; 2];
    bessel_i_scaled_seq(small, &mut i);
    let tail = big * (small - big).exp() * (i[0] * k1 + p.sqrt() * i[1] * k0);
    Ok((1.0 - tail).clamp(0.0, 1.0))
}

/// Amount of fading of the correlated Rayleigh product channel.
pub fn aof_rayleigh_product(p: f64) -> f64 {
    4.0 * (1.0 + p * (4.0 + p)) / ((1.0 + p) * (1.0 + p)) - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointDensityParams {
    /// `S1` (pair carries Bob) or `S2` (pair carries Eve).
    pub scenario: Topology,
    pub pair: FadingParams,
    pub independent_k: f64,
    pub series: SeriesSettings,
}

impl JointDensityParams {
    pub fn validate(&self) -> Result<()> {
        if self.scenario == Topology::P2p {
            return Err(Error::invalid("scenario", "joint density needs S1 or S2"));
        }
        check_density_params(&self.pair)?;
        validate_k("independent_k", self.independent_k)?;
        if self.independent_k >= LOS_LIMIT_K {
            return Err(Error::invalid("independent_k", "deterministic link has no density"));
        }
        self.series.validate()
    }

    pub fn all_rayleigh(&self) -> bool {
        self.pair.is_rayleigh() && self.independent_k == 0.0
    }
}

/// Closed-form joint density of `(u, v) = (x y, x z)` when `(x, y)` is a
/// correlated Rayleigh pair and `z` an independent Rayleigh link.
pub fn rayleigh_joint_uv_pdf(u: f64, v: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    if !(u > 0.0 && v > 0.0) {
        return Err(Error::Domain {
            func: "rayleigh_joint_uv_pdf",
            value: u.min(v),
            expected: "u > 0 and v > 0",
        });
    }
    Ok(rayleigh_joint_unchecked(u, v, p))
}

#[inline]
pub(crate) fn rayleigh_joint_unchecked(u: f64, v: f64, p: f64) -> f64 {
    let alpha = 2.0 / (1.0 - p);
    let r = (u + 2.0 * v / alpha).sqrt();
    if r.is_infinite() {
        return 0.0;
    }
    let small = alpha * (u * p).sqrt();
    let big = alpha * r;
    let (_, k1) = bessel_k01_scaled(big);
    alpha / r * scaled_i0(small) * k1 * (small - big).exp()
}

/// `\int f_pair(x, a/x) f_ind(b/x) / x^2 dx`: the joint density with `a` the
/// product through the correlated partner and `b` through the independent one.
pub fn joint_density_numeric(
    a: f64,
    b: f64,
    pair: impl Fn(f64, f64) -> f64,
    independent: impl Fn(f64) -> f64,
    quad: &QuadSettings,
) -> Result<QuadResult> {
    if !(a > 0.0 && b > 0.0) || a.is_infinite() || b.is_infinite() {
        return Err(Error::Domain {
            func: "joint_density_numeric",
            value: a.min(b),
            expected: "0 < u, v < inf",
        });
    }
    let f = |s: f64| {
        let x = s.exp();
        if x == 0.0 || x.is_infinite() {
            return 0.0;
        }
        let inv = 1.0 / x;
        pair(x, a * inv) * independent(b * inv) * inv
    };
    let center = 0.5 * (a + b).ln();
    integrate_real_line(f, center, &[0.5 * a.ln(), b.ln()], quad)
}

/// Joint density of `(u, v) = (x y, x z)` for either scenario.
///
/// All-Rayleigh links use the closed form (with `u` and `v` exchanged in S2,
/// where the correlated partner is Eve); otherwise the density is integrated
/// numerically over the energy-link gain.
pub fn joint_uv_pdf(u: f64, v: f64, params: &JointDensityParams, quad: &QuadSettings) -> Result<QuadResult> {
    params.validate()?;
    if !(u > 0.0 && v > 0.0) {
        return Err(Error::Domain {
            func: "joint_uv_pdf",
            value: u.min(v),
            expected: "u > 0 and v > 0",
        });
    }
    let (corr, indep) = match params.scenario {
        Topology::S2 => (v, u),
        _ => (u, v),
    };
    if params.all_rayleigh() {
        return Ok(QuadResult {
            value: rayleigh_joint_unchecked(corr, indep, params.pair.p()),
            ..QuadResult::ZERO
        });
    }
    joint_uv_pdf_numeric(u, v, params, quad)
}

/// [`joint_uv_pdf`] without the closed-form shortcut.
pub fn joint_uv_pdf_numeric(u: f64, v: f64, params: &JointDensityParams, quad: &QuadSettings) -> Result<QuadResult> {
    params.validate()?;
    let (corr, indep) = match params.scenario {
        Topology::S2 => (v, u),
        _ => (u, v),
    };
    let pair = BivariateRician::new(&params.pair, &params.series)?;
    let independent = RicianPower::new(params.independent_k);
    joint_density_numeric(corr, indep, |x, y| pair.pdf(x, y), |w| independent.pdf(w), quad)
}
