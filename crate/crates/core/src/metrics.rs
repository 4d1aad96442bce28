//! Capacity, outage and secrecy metrics evaluated by quadrature over the
//! densities of [`crate::dist`], plus their high-SNR approximations.
//!
//! SNR bookkeeping lives in [`snr_scales`]: every metric works with the
//! multipliers `g_B`, `g_E` of the instantaneous SNRs `g_B x y` and `g_E x z`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::channel::{delta_po, effective_snrs, FadingParams, ScenarioSpec, SnrReference, Topology};
use crate::dist::{
    joint_density_numeric, product_pdf_with, rayleigh_joint_unchecked, rayleigh_product_cdf, rayleigh_product_pdf,
    BivariateRician, RicianPower, SeriesSettings,
};
use crate::error::{Error, Result};
use crate::quadrature::{
    integrate_2d, integrate_nested, integrate_semi_infinite, integrate_to, Bound, QuadResult, QuadSettings, Region2d,
};
use crate::specfun::{bessel_i_scaled, bessel_k01_scaled, exp_integral_e1, exp_integral_e1_scaled, EULER_GAMMA};

/// Largest tolerated gap between a single-integral shortcut and the double
/// integral it reduces.
pub const SINGLE_INTEGRAL_LIMIT: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Quadrature,
    ClosedForm,
    MonteCarlo,
    /// `log2(gamma_B) - t` for the legitimate link.
    Asymptotic,
    /// Difference of the two exact link capacities.
    AsymptoticDifference,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Quadrature => "quadrature",
            Method::ClosedForm => "closed_form",
            Method::MonteCarlo => "monte_carlo",
            Method::Asymptotic => "asymptotic",
            Method::AsymptoticDifference => "asymptotic_difference",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricEstimate {
    pub value: f64,
    /// Quadrature error bound, Monte Carlo standard error, or 0.
    pub error_estimate: f64,
    pub method: Method,
    /// Subdivisions for quadrature, samples for Monte Carlo.
    pub work: u64,
    pub converged: bool,
}

impl MetricEstimate {
    fn exact(value: f64, method: Method) -> Self {
        Self {
            value,
            error_estimate: 0.0,
            method,
            work: 0,
            converged: true,
        }
    }

    fn from_quad(r: QuadResult, method: Method) -> Self {
        Self {
            value: r.value,
            error_estimate: r.error_estimate,
            method,
            work: r.subdivisions_used as u64,
            converged: r.converged,
        }
    }

    fn probability(mut self) -> Self {
        self.value = self.value.clamp(0.0, 1.0);
        self
    }

    fn non_negative(mut self) -> Self {
        self.value = self.value.max(0.0);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateThreshold {
    pub r_th: f64,
}

impl RateThreshold {
    pub fn new(r_th: f64) -> Result<Self> {
        if !(r_th > 0.0 && r_th.is_finite()) {
            return Err(Error::invalid("r_th", format!("{r_th} must be finite and > 0")));
        }
        Ok(Self { r_th })
    }

    /// `2^R - 1`
    pub fn gamma_th(&self) -> f64 {
        self.r_th.exp2() - 1.0
    }
}

/// Multipliers of the instantaneous SNRs: `gamma_B = legit * x * y` and
/// `gamma_E = eve * x * z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrScales {
    pub legit: f64,
    pub eve: Option<f64>,
}

/// Resolves the average SNRs of a spec into instantaneous-SNR multipliers.
///
/// A correlated legitimate link (point-to-point, S1) read on the achieved
/// axis is divided by the power offset. Eve's multiplier is her effective
/// average in S1, and her effective average over the power offset in S2.
pub fn snr_scales(spec: &ScenarioSpec) -> Result<SnrScales> {
    let (gamma_b, gamma_e) = effective_snrs(spec)?;
    let offset = delta_po(&spec.pair);
    let legit = match (spec.topology, spec.snr_reference) {
        (Topology::S2, _) | (_, SnrReference::Nominal) => gamma_b,
        (_, SnrReference::Achieved) => gamma_b / offset,
    };
    let eve = gamma_e.map(|g| match spec.topology {
        Topology::S2 => g / offset,
        _ => g,
    });
    Ok(SnrScales { legit, eve })
}

fn check_snr(name: &'static str, g: f64) -> Result<()> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::invalid(name, format!("{g} must be finite and > 0")));
    }
    Ok(())
}

#[inline]
fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

/// `E{ln(1 + a z)}` for a unit-mean exponential `z`.
#[inline]
fn mean_ln1p_exponential(a: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    exp_integral_e1_scaled(1.0 / a).unwrap_or(0.0)
}

/// Average capacity of the product link `gamma = g x y`, `g` the
/// independent-links SNR (linear).
pub fn avg_capacity(
    params: &FadingParams,
    gamma_bar_i: f64,
    series: &SeriesSettings,
    quad: &QuadSettings,
) -> Result<MetricEstimate> {
    params.validate()?;
    check_snr("gamma_bar_i", gamma_bar_i)?;
    if params.is_los_limit() {
        return Ok(MetricEstimate::exact(log2_1p(gamma_bar_i), Method::ClosedForm));
    }
    let breaks = [1.0 / gamma_bar_i, 1.0];
    let r = if params.is_rayleigh() {
        let p = params.p();
        integrate_semi_infinite(
            |u| log2_1p(gamma_bar_i * u) * rayleigh_product_pdf(u, 1.0 + p, p).unwrap_or(0.0),
            0.0,
            &breaks,
            quad,
        )?
    } else {
        let density = BivariateRician::new(params, series)?;
        integrate_nested(
            |u| {
                let f = product_pdf_with(&density, u, quad)?;
                let w = log2_1p(gamma_bar_i * u);
                Ok(QuadResult {
                    value: w * f.value,
                    error_estimate: w * f.error_estimate,
                    ..f
                })
            },
            0.0,
            f64::INFINITY,
            &breaks,
            1.0,
            quad,
        )?
    };
    Ok(MetricEstimate::from_quad(r, Method::Quadrature).non_negative())
}

/// Probability that `g x y` falls below the threshold SNR.
pub fn outage_probability(
    params: &FadingParams,
    gamma_bar_i: f64,
    threshold: &RateThreshold,
    series: &SeriesSettings,
    quad: &QuadSettings,
) -> Result<MetricEstimate> {
    params.validate()?;
    check_snr("gamma_bar_i", gamma_bar_i)?;
    let gamma_th = threshold.gamma_th();
    if params.is_los_limit() {
        let value = if gamma_bar_i < gamma_th { 1.0 } else { 0.0 };
        return Ok(MetricEstimate::exact(value, Method::ClosedForm));
    }
    if params.is_rayleigh() {
        let p = params.p();
        let value = rayleigh_product_cdf(gamma_th, gamma_bar_i * (1.0 + p), p)?;
        return Ok(MetricEstimate::exact(value, Method::ClosedForm));
    }
    outage_probability_quadrature(params, gamma_bar_i, threshold, series, quad)
}

/// [`outage_probability`] by integrating the product density, also when a
/// closed form exists.
pub fn outage_probability_quadrature(
    params: &FadingParams,
    gamma_bar_i: f64,
    threshold: &RateThreshold,
    series: &SeriesSettings,
    quad: &QuadSettings,
) -> Result<MetricEstimate> {
    params.validate()?;
    check_snr("gamma_bar_i", gamma_bar_i)?;
    let gamma_th = threshold.gamma_th();
    if params.is_los_limit() {
        let value = if gamma_bar_i < gamma_th { 1.0 } else { 0.0 };
        return Ok(MetricEstimate::exact(value, Method::ClosedForm));
    }
    let u0 = gamma_th / gamma_bar_i;
    let r = if params.is_rayleigh() {
        let p = params.p();
        integrate_to(
            |u| rayleigh_product_pdf(u, 1.0 + p, p).unwrap_or(0.0),
            0.0,
            u0,
            &[1.0],
            1.0,
            quad,
        )?
    } else {
        let density = BivariateRician::new(params, series)?;
        integrate_nested(|u| product_pdf_with(&density, u, quad), 0.0, u0, &[1.0], 1.0, quad)?
    };
    Ok(MetricEstimate::from_quad(r, Method::Quadrature).probability())
}

/// High-SNR capacity loss of one unit-mean Rician link in bits:
/// `log2((K+1)/K) - log2(e) E1(K)`, equal to `gamma_e log2(e)` at `K = 0`.
pub fn single_link_loss(k: f64) -> f64 {
    if k >= 1.0 {
        ((1.0 / k).ln_1p() - exp_integral_e1(k).unwrap_or(0.0)) / LN_2
    } else {
        // ln(1+K) + gamma_e + sum_{n>=1} (-K)^n / (n n!)
        let mut term = 1.0;
        let mut sum = 0.0;
        for n in 1..60 {
            let nf = n as f64;
            term *= -k / nf;
            let c = term / nf;
            sum += c;
            if c.abs() < 1e-18 {
                break;
            }
        }
        (k.ln_1p() + EULER_GAMMA + sum) / LN_2
    }
}

/// Capacity loss `t` of the correlated product link relative to `log2(gamma_B)`.
pub fn capacity_loss_t(params: &FadingParams) -> f64 {
    2.0 * single_link_loss(params.k) + delta_po(params).log2()
}

/// `log2(gamma_b) - t`, with `gamma_b` the achieved average SNR.
pub fn avg_capacity_asymptotic(params: &FadingParams, gamma_bar_b: f64) -> Result<MetricEstimate> {
    params.validate()?;
    check_snr("gamma_bar_b", gamma_bar_b)?;
    Ok(MetricEstimate::exact(
        gamma_bar_b.log2() - capacity_loss_t(params),
        Method::Asymptotic,
    ))
}

pub fn instantaneous_secrecy_capacity(gamma_b: f64, gamma_e: f64) -> f64 {
    ((gamma_b.ln_1p() - gamma_e.ln_1p()) / LN_2).max(0.0)
}

/// Secrecy quantities resolved from a spec.
#[derive(Debug, Clone, Copy)]
struct Secrecy {
    topology: Topology,
    pair: FadingParams,
    independent_k: f64,
    legit: f64,
    eve: f64,
}

impl Secrecy {
    fn new(spec: &ScenarioSpec) -> Result<Self> {
        let scales = snr_scales(spec)?;
        let Some(eve) = scales.eve else {
            return Err(Error::invalid("topology", "secrecy metrics need S1 or S2"));
        };
        if spec.pair.is_los_limit() || spec.independent_k >= crate::channel::LOS_LIMIT_K {
            return Err(Error::invalid(
                "k",
                "secrecy metrics need fading links (K below the line-of-sight limit)",
            ));
        }
        check_snr("gamma_b", scales.legit)?;
        check_snr("gamma_e", eve)?;
        Ok(Self {
            topology: spec.topology,
            pair: spec.pair,
            independent_k: spec.independent_k,
            legit: scales.legit,
            eve,
        })
    }

    fn all_rayleigh(&self) -> bool {
        self.pair.is_rayleigh() && self.independent_k == 0.0
    }
}

/// Joint density of `(u, v) = (x y, x z)` as a callable, closed form when
/// every link is Rayleigh.
fn joint_density<'a>(
    s: &'a Secrecy,
    series: &'a SeriesSettings,
    quad: &'a QuadSettings,
) -> Result<Box<dyn Fn(f64, f64) -> f64 + 'a>> {
    let swap = s.topology == Topology::S2;
    if s.all_rayleigh() {
        let p = s.pair.p();
        return Ok(Box::new(move |u, v| {
            let (a, b) = if swap { (v, u) } else { (u, v) };
            rayleigh_joint_unchecked(a, b, p)
        }));
    }
    let pair = BivariateRician::new(&s.pair, series)?;
    let independent = RicianPower::new(s.independent_k);
    Ok(Box::new(move |u, v| {
        let (a, b) = if swap { (v, u) } else { (u, v) };
        joint_density_numeric(a, b, |x, y| pair.pdf(x, y), |w| independent.pdf(w), quad)
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
    }))
}

/// Average secrecy capacity, bits/s/Hz.
///
/// Links with a Rayleigh independent partner and a Rician pair integrate over
/// the pair's gains with the independent link averaged in closed form; all
/// other cases integrate the joint density of the two product SNRs.
pub fn avg_secrecy_capacity(
    spec: &ScenarioSpec,
    quad: &QuadSettings,
    series: &SeriesSettings,
) -> Result<MetricEstimate> {
    let s = Secrecy::new(spec)?;
    if !s.pair.is_rayleigh() && s.independent_k == 0.0 {
        avg_secrecy_capacity_conditional(spec, quad, series)
    } else {
        avg_secrecy_capacity_joint(spec, quad, series)
    }
}

/// Average secrecy capacity as the double integral over `(u, v)` of the
/// joint density, restricted to the wedge where the secrecy rate is positive.
pub fn avg_secrecy_capacity_joint(
    spec: &ScenarioSpec,
    quad: &QuadSettings,
    series: &SeriesSettings,
) -> Result<MetricEstimate> {
    let s = Secrecy::new(spec)?;
    let f = joint_density(&s, series, quad)?;
    let (gb, ge) = (s.legit, s.eve);
    let region = Region2d {
        outer_breakpoints: vec![1.0 / gb, 1.0],
        ..Region2d::quadrant(
            Bound::constant(0.0),
            Bound::Linear {
                slope: gb / ge,
                intercept: 0.0,
            },
        )
    };
    let r = integrate_2d(
        |u, v| ((gb * u).ln_1p() - (ge * v).ln_1p()) / LN_2 * f(u, v),
        &region,
        quad,
    )?;
    Ok(MetricEstimate::from_quad(r, Method::Quadrature).non_negative())
}

/// Nested integral over the correlated pair `(x, w)` of `pdf(x, w) h(x, w)`.
fn integrate_over_pair(
    pair: &BivariateRician,
    h: impl Fn(f64, f64) -> f64,
    inner_breaks: impl Fn(f64) -> Vec<f64>,
    quad: &QuadSettings,
) -> Result<QuadResult> {
    integrate_nested(
        |x| {
            let slice = pair.slice_x(x);
            integrate_semi_infinite(
                |w| {
                    let d = pair.pdf_sliced_x(&slice, x, w);
                    if d == 0.0 {
                        0.0
                    } else {
                        d * h(x, w)
                    }
                },
                0.0,
                &inner_breaks(x),
                quad,
            )
        },
        0.0,
        f64::INFINITY,
        &[1.0],
        1.0,
        quad,
    )
}

fn require_rayleigh_independent(s: &Secrecy) -> Result<()> {
    if s.independent_k != 0.0 {
        return Err(Error::invalid(
            "independent_k",
            "the closed-form inner average needs a Rayleigh independent link",
        ));
    }
    Ok(())
}

/// Average secrecy capacity with the Rayleigh independent link averaged in
/// closed form, leaving a double integral over the correlated pair.
pub fn avg_secrecy_capacity_conditional(
    spec: &ScenarioSpec,
    quad: &QuadSettings,
    series: &SeriesSettings,
) -> Result<MetricEstimate> {
    let s = Secrecy::new(spec)?;
    require_rayleigh_independent(&s)?;
    let pair = BivariateRician::new(&s.pair, series)?;
    let (gb, ge) = (s.legit, s.eve);
    let r = match s.topology {
        Topology::S1 => {
            // E_z[(ln(1+a) - ln(1+e z))^+] over z < a/e, with a = g_B x y, e = g_E x
            let h = |x: f64, y: f64| {
                let a = gb * x * y;
                let inv_e = 1.0 / (ge * x);
                let z_max = gb * y / ge;
                let head = a.ln_1p() - exp_integral_e1_scaled(inv_e).unwrap_or(0.0);
                let tail = (-z_max).exp() * exp_integral_e1_scaled(inv_e + z_max).unwrap_or(0.0);
                (head + tail).max(0.0) / LN_2
            };
            integrate_over_pair(&pair, h, |x| vec![1.0 / (gb * x)], quad)?
        }
        Topology::S2 => {
            // E_y[(ln(1+b y) - ln(1+g_E x z))^+] with b = g_B x, pair (x, z)
            let h = |x: f64, z: f64| {
                let y_min = ge * z / gb;
                (-y_min).exp() * exp_integral_e1_scaled(1.0 / (gb * x) + y_min).unwrap_or(0.0) / LN_2
            };
            integrate_over_pair(&pair, h, |_| vec![gb / ge], quad)?
        }
        Topology::P2p => unreachable!("rejected by Secrecy::new"),
    };
    Ok(MetricEstimate::from_quad(r, Method::Quadrature).non_negative())
}

/// Constants of the secrecy outage regions.
#[derive(Debug, Clone, Copy)]
struct OutageRegion {
    /// S1: `v > b u - c`. S2: `u < b v + c`.
    b: f64,
    c: f64,
}

fn outage_region(s: &Secrecy, threshold: &RateThreshold) -> OutageRegion {
    let two_r = threshold.r_th.exp2();
    let theta = two_r - 1.0;
    match s.topology {
        Topology::S2 => OutageRegion {
            b: two_r * s.eve / s.legit,
            c: theta / s.legit,
        },
        _ => OutageRegion {
            b: s.legit / (two_r * s.eve),
            c: theta / (two_r * s.eve),
        },
    }
}

/// Secrecy outage probability `P(C_S < R)`.
///
/// With every link Rayleigh, S1 uses the single-integral reduction and S2
/// the double integral (its printed single integral fails validation; see
/// [`check_single_integral`]). A Rician pair with a Rayleigh independent link
/// integrates over the pair's gains; otherwise the joint density is used.
pub fn secrecy_outage(
    spec: &ScenarioSpec,
    threshold: &RateThreshold,
    quad: &QuadSettings,
    series: &SeriesSettings,
    force_double_integral: bool,
) -> Result<MetricEstimate> {
    let s = Secrecy::new(spec)?;
    if s.all_rayleigh() {
        if !force_double_integral && s.topology == Topology::S1 {
            return secrecy_outage_single(spec, threshold, quad);
        }
        return secrecy_outage_joint(spec, threshold, quad, series);
    }
    if s.independent_k == 0.0 {
        secrecy_outage_conditional(spec, threshold, quad, series)
    } else {
        secrecy_outage_joint(spec, threshold, quad, series)
    }
}

/// Secrecy outage as the double integral of the joint density over the
/// outage region.
pub fn secrecy_outage_joint(
    spec: &ScenarioSpec,
    threshold: &RateThreshold,
    quad: &QuadSettings,
    series: &SeriesSettings,
) -> Result<MetricEstimate> {
    let s = Secrecy::new(spec)?;
    let f = joint_density(&s, series, quad)?;
    let OutageRegion { b, c } = outage_region(&s, threshold);
    let r = match s.topology {
        Topology::S1 => {
            let region = Region2d {
                outer_breakpoints: vec![1.0],
                ..Region2d::quadrant(
                    Bound::ClampedLinear {
                        slope: b,
                        intercept: -c,
                    },
                    Bound::Infinite,
                )
            };
            integrate_2d(&f, &region, quad)?
        }
        _ => {
            // outer variable v, inner u in [0, b v + c]
            let region = Region2d {
                outer_breakpoints: vec![1.0],
                ..Region2d::quadrant(Bound::constant(0.0), Bound::Linear { slope: b, intercept: c })
            };
            integrate_2d(|v, u| f(u, v), &region, quad)?
        }
    };
    Ok(MetricEstimate::from_quad(r, Method::Quadrature).probability())
}

/// Secrecy outage with the Rayleigh independent link averaged in closed form.
pub fn secrecy_outage_conditional(
    spec: &ScenarioSpec,
    threshold: &RateThreshold,
    quad: &QuadSettings,
    series: &SeriesSettings,
) -> Result<MetricEstimate> {
    let s = Secrecy::new(spec)?;
    require_rayleigh_independent(&s)?;
    let pair = BivariateRician::new(&s.pair, series)?;
    let OutageRegion { b, c } = outage_region(&s, threshold);
    let r = match s.topology {
        Topology::S1 => {
            // P(z > (b x y - c) / x)
            let h = |x: f64, y: f64| (-(b * y - c / x).max(0.0)).exp();
            integrate_over_pair(&pair, h, |x| vec![c / (b * x), c / (b * x) + 1.0 / b], quad)?
        }
        Topology::S2 => {
            // P(y < (b x z + c) / x)
            let h = |x: f64, z: f64| -(-(b * z + c / x)).exp_m1();
            integrate_over_pair(&pair, h, |_| vec![1.0 / b], quad)?
        }
        Topology::P2p => unreachable!("rejected by Secrecy::new"),
    };
    Ok(MetricEstimate::from_quad(r, Method::Quadrature).probability())
}

/// `alpha I_0(alpha sqrt(t p)) K_0(alpha sqrt(arg))` evaluated in log space.
fn rayleigh_outage_kernel(t: f64, arg: f64, p: f64) -> f64 {
    let alpha = 2.0 / (1.0 - p);
    let small = alpha * (t * p).sqrt();
    let big = alpha * arg.sqrt();
    if !(big > 0.0) || big.is_infinite() {
        return 0.0;
    }
    let (k0, _) = bessel_k01_scaled(big);
    alpha * bessel_i_scaled(0, small).unwrap_or(0.0) * k0 * (small - big).exp()
}

/// Secrecy outage from the printed single-integral reductions (all links
/// Rayleigh). S1 integrates `g(u)` directly; S2 returns `1 - \int g(v)`.
pub fn secrecy_outage_single(
    spec: &ScenarioSpec,
    threshold: &RateThreshold,
    quad: &QuadSettings,
) -> Result<MetricEstimate> {
    let s = Secrecy::new(spec)?;
    if !s.all_rayleigh() {
        return Err(Error::invalid("k", "single-integral forms need every link Rayleigh"));
    }
    let p = s.pair.p();
    let alpha = 2.0 / (1.0 - p);
    let OutageRegion { b, c } = outage_region(&s, threshold);
    match s.topology {
        Topology::S1 => {
            let g = |u: f64| rayleigh_outage_kernel(u, u + 2.0 * (b * u - c).max(0.0) / alpha, p);
            let r = integrate_semi_infinite(g, 0.0, &[c / b, 1.0], quad)?;
            Ok(MetricEstimate::from_quad(r, Method::Quadrature).probability())
        }
        Topology::S2 => {
            let (beta, psi) = (b, c);
            let g = |v: f64| rayleigh_outage_kernel(v, 2.0 * psi / alpha + v * (2.0 * beta * alpha + 1.0), p);
            let r = integrate_semi_infinite(g, 0.0, &[1.0], quad)?;
            let mut est = MetricEstimate::from_quad(r, Method::Quadrature);
            est.value = 1.0 - est.value;
            Ok(est.probability())
        }
        Topology::P2p => unreachable!("rejected by Secrecy::new"),
    }
}

/// Compares the single-integral secrecy outage with the double integral it
/// reduces; returns both values, or a model-consistency error when they
/// differ by more than [`SINGLE_INTEGRAL_LIMIT`].
pub fn check_single_integral(
    spec: &ScenarioSpec,
    threshold: &RateThreshold,
    quad: &QuadSettings,
    series: &SeriesSettings,
) -> Result<(f64, f64)> {
    let single = secrecy_outage_single(spec, threshold, quad)?.value;
    let double = secrecy_outage_joint(spec, threshold, quad, series)?.value;
    let diff = (single - double).abs();
    if diff > SINGLE_INTEGRAL_LIMIT {
        return Err(Error::ModelConsistency {
            what: format!("{} secrecy outage single integral", spec.topology.as_str()),
            single,
            double,
            diff,
            limit: SINGLE_INTEGRAL_LIMIT,
        });
    }
    Ok((single, double))
}

/// Average capacity of `g x z` with `x`, `z` independent unit-mean Rician
/// powers of factors `k1`, `k2`.
pub fn uncorrelated_product_capacity(k1: f64, k2: f64, g: f64, quad: &QuadSettings) -> Result<MetricEstimate> {
    check_snr("gamma", g)?;
    let (k1, k2) = if k2 == 0.0 { (k1, k2) } else { (k2, k1) };
    let outer = RicianPower::new(k1);
    let r = if k2 == 0.0 {
        integrate_semi_infinite(
            |x| outer.pdf(x) * mean_ln1p_exponential(g * x) / LN_2,
            0.0,
            &[1.0 / g, 1.0],
            quad,
        )?
    } else {
        let inner = RicianPower::new(k2);
        integrate_nested(
            |x| {
                let fx = outer.pdf(x);
                if fx == 0.0 {
                    return Ok(QuadResult::ZERO);
                }
                integrate_semi_infinite(|z| fx * inner.pdf(z) * log2_1p(g * x * z), 0.0, &[1.0], quad)
            },
            0.0,
            f64::INFINITY,
            &[1.0],
            1.0,
            quad,
        )?
    };
    Ok(MetricEstimate::from_quad(r, Method::Quadrature).non_negative())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsymptoticForm {
    /// Exact legitimate capacity minus exact eavesdropper capacity.
    Difference,
    /// `log2(gamma_B) - t` minus the exact eavesdropper capacity.
    LogLoss,
}

/// High-SNR approximation of the average secrecy capacity, clamped at 0.
pub fn asc_asymptotic(
    spec: &ScenarioSpec,
    form: AsymptoticForm,
    quad: &QuadSettings,
    series: &SeriesSettings,
) -> Result<MetricEstimate> {
    let s = Secrecy::new(spec)?;
    let (gb, ge) = (s.legit, s.eve);
    let (legit, eve) = match s.topology {
        Topology::S1 => {
            let legit = match form {
                AsymptoticForm::Difference => avg_capacity(&s.pair, gb, series, quad)?,
                AsymptoticForm::LogLoss => avg_capacity_asymptotic(&s.pair, gb * delta_po(&s.pair))?,
            };
            let eve = uncorrelated_product_capacity(s.pair.k, s.independent_k, ge, quad)?;
            (legit, eve)
        }
        Topology::S2 => {
            let legit = match form {
                AsymptoticForm::Difference => uncorrelated_product_capacity(s.pair.k, s.independent_k, gb, quad)?,
                AsymptoticForm::LogLoss => MetricEstimate::exact(
                    gb.log2() - single_link_loss(s.pair.k) - single_link_loss(s.independent_k),
                    Method::Asymptotic,
                ),
            };
            let eve = avg_capacity(&s.pair, ge, series, quad)?;
            (legit, eve)
        }
        Topology::P2p => unreachable!("rejected by Secrecy::new"),
    };
    let method = match form {
        AsymptoticForm::Difference => Method::AsymptoticDifference,
        AsymptoticForm::LogLoss => Method::Asymptotic,
    };
    Ok(MetricEstimate {
        value: (legit.value - eve.value).max(0.0),
        error_estimate: legit.error_estimate + eve.error_estimate,
        method,
        work: legit.work + eve.work,
        converged: legit.converged && eve.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{db_to_linear, EveMode};
    use crate::dist::rayleigh_product_pdf;

    fn q() -> QuadSettings {
        QuadSettings::default()
    }

    fn sd() -> SeriesSettings {
        SeriesSettings::default()
    }

    fn fp(k: f64, rho: f64) -> FadingParams {
        FadingParams::new(k, rho).unwrap()
    }

    fn s1(k: f64, rho: f64, gb_db: f64, ge_db: f64, mode: EveMode) -> ScenarioSpec {
        ScenarioSpec::secrecy(Topology::S1, fp(k, rho), 0.0, gb_db, ge_db, mode)
    }

    fn s2(k: f64, rho: f64, gb_db: f64, ge_db: f64, mode: EveMode) -> ScenarioSpec {
        ScenarioSpec::secrecy(Topology::S2, fp(k, rho), 0.0, gb_db, ge_db, mode)
    }

    #[test]
    fn secrecy_capacity_definition() {
        assert!((instantaneous_secrecy_capacity(3.0, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(instantaneous_secrecy_capacity(1.0, 3.0), 0.0);
        assert_eq!(instantaneous_secrecy_capacity(2.5, 2.5), 0.0);
    }

    #[test]
    fn threshold_snr() {
        assert_eq!(RateThreshold::new(1.0).unwrap().gamma_th(), 1.0);
        assert!(RateThreshold::new(0.0).is_err());
    }

    #[test]
    fn scales_follow_scenario_rules() {
        let offset = 1.49;
        let sc = snr_scales(&s1(0.0, 0.7, 20.0, 5.0, EveMode::TrueSnr)).unwrap();
        assert!((sc.legit - 100.0 / offset).abs() < 1e-9);
        assert!((sc.eve.unwrap() - db_to_linear(5.0) / offset).abs() < 1e-12);
        let sc = snr_scales(&s2(0.0, 0.7, 20.0, 5.0, EveMode::TrueSnr)).unwrap();
        assert!((sc.legit - 100.0).abs() < 1e-9);
        assert!((sc.eve.unwrap() - db_to_linear(5.0)).abs() < 1e-12);
        let sc = snr_scales(&s2(0.0, 0.7, 20.0, 5.0, EveMode::Naive)).unwrap();
        assert!((sc.eve.unwrap() - db_to_linear(5.0) / offset).abs() < 1e-12);
        let mut nominal = ScenarioSpec::p2p(fp(0.0, 0.7), 20.0);
        nominal.snr_reference = SnrReference::Nominal;
        assert!((snr_scales(&nominal).unwrap().legit - 100.0).abs() < 1e-9);
    }

    #[test]
    fn loss_constant_limits() {
        let rayleigh = 2.0 * EULER_GAMMA / LN_2;
        assert!((capacity_loss_t(&fp(0.0, 0.0)) - rayleigh).abs() < 1e-14);
        assert!((rayleigh - 1.66549).abs() < 1e-5);
        // the two branches meet at K = 1
        let below = single_link_loss(1.0 - 1e-12);
        assert!((below - single_link_loss(1.0)).abs() < 1e-10);
        assert!(single_link_loss(1e9) < 1e-8);
    }

    #[test]
    fn loss_ordering_in_k_and_rho() {
        for k in [0.01, 1.0, 10.0] {
            let ts: Vec<f64> = [0.0, 0.5, 0.9].iter().map(|&r| capacity_loss_t(&fp(k, r))).collect();
            assert!(ts[0] < ts[1] && ts[1] < ts[2]);
        }
        for rho in [0.0, 0.5, 0.9] {
            let ts: Vec<f64> = [0.01, 1.0, 10.0]
                .iter()
                .map(|&k| capacity_loss_t(&fp(k, rho)))
                .collect();
            assert!(ts[0] > ts[1] && ts[1] > ts[2]);
        }
    }

    #[test]
    fn line_of_sight_capacity() {
        let c = avg_capacity(&fp(1e12, 0.6), 50.0, &sd(), &q()).unwrap();
        assert!((c.value - 51f64.log2()).abs() < 1e-6);
        let op = outage_probability(&fp(1e12, 0.6), 0.5, &RateThreshold::new(1.0).unwrap(), &sd(), &q()).unwrap();
        assert_eq!(op.value, 1.0);
    }

    #[test]
    fn rayleigh_capacity_matches_loss_constant_at_high_snr() {
        let g = 1e4;
        let c = avg_capacity(&fp(0.0, 0.0), g, &sd(), &q()).unwrap();
        assert!(c.converged);
        assert!((c.value - (g.log2() - 2.0 * EULER_GAMMA / LN_2)).abs() < 0.02);
    }

    #[test]
    fn rayleigh_and_rician_capacity_paths_agree() {
        // a tiny Rician factor exercises the series path close to Rayleigh
        for rho in [0.0, 0.7] {
            let a = avg_capacity(&fp(0.0, rho), 30.0, &sd(), &q()).unwrap();
            let b = avg_capacity(&fp(1e-9, rho), 30.0, &sd(), &q()).unwrap();
            assert!((a.value - b.value).abs() < 1e-6, "rho={rho}: {} {}", a.value, b.value);
        }
    }

    #[test]
    fn outage_paths_agree_and_decrease() {
        let t = RateThreshold::new(1.0).unwrap();
        let a = outage_probability(&fp(0.0, 0.5), 10.0, &t, &sd(), &q()).unwrap();
        let b = outage_probability(&fp(1e-9, 0.5), 10.0, &t, &sd(), &q()).unwrap();
        assert_eq!(a.method, Method::ClosedForm);
        assert!((a.value - b.value).abs() < 1e-7, "{} {}", a.value, b.value);

        let mut last = 1.0;
        for db in [0.0, 10.0, 20.0, 30.0] {
            let op = outage_probability(&fp(10.0, 0.9), db_to_linear(db), &t, &sd(), &q()).unwrap();
            assert!(op.converged && op.value <= last);
            last = op.value;
        }
    }

    #[test]
    fn outage_vanishes_with_threshold() {
        let t = RateThreshold::new(1e-12).unwrap();
        let op = outage_probability(&fp(0.0, 0.5), 10.0, &t, &sd(), &q()).unwrap();
        assert!(op.value < 1e-9);
    }

    #[test]
    fn asymptotic_capacity_slope() {
        let p = fp(0.0, 0.5);
        let a = avg_capacity_asymptotic(&p, 1e3).unwrap().value;
        let b = avg_capacity_asymptotic(&p, 1e4).unwrap().value;
        assert!((b - a - 10f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn s1_single_integral_matches_double() {
        let t = RateThreshold::new(1.0).unwrap();
        for (rho, gb) in [(0.0, 10.0), (0.7, 20.0), (0.9, 35.0)] {
            let spec = s1(0.0, rho, gb, 5.0, EveMode::TrueSnr);
            let (single, double) = check_single_integral(&spec, &t, &q(), &sd()).unwrap();
            assert!((single - double).abs() < 1e-7, "rho={rho}");
        }
    }

    #[test]
    fn s2_printed_single_integral_is_discrepant() {
        let t = RateThreshold::new(1.0).unwrap();
        let spec = s2(0.0, 0.7, 20.0, 5.0, EveMode::TrueSnr);
        match check_single_integral(&spec, &t, &q(), &sd()) {
            Err(Error::ModelConsistency { diff, .. }) => assert!(diff > 1e-3),
            other => panic!("expected a discrepancy, got {other:?}"),
        }
    }

    #[test]
    fn s2_rederived_single_integral_matches_double() {
        // with (1 + 2 beta / alpha) in place of the printed factor
        let t = RateThreshold::new(1.0).unwrap();
        for rho in [0.0, 0.7] {
            let spec = s2(0.0, rho, 20.0, 5.0, EveMode::TrueSnr);
            let sec = Secrecy::new(&spec).unwrap();
            let p = rho * rho;
            let alpha = 2.0 / (1.0 - p);
            let OutageRegion { b: beta, c: psi } = outage_region(&sec, &t);
            let g = |v: f64| rayleigh_outage_kernel(v, 2.0 * psi / alpha + v * (1.0 + 2.0 * beta / alpha), p);
            let single = 1.0 - integrate_semi_infinite(g, 0.0, &[1.0], &q()).unwrap().value;
            let double = secrecy_outage_joint(&spec, &t, &q(), &sd()).unwrap().value;
            assert!((single - double).abs() < 1e-7, "rho={rho}: {single} {double}");
        }
    }

    #[test]
    fn conditional_and_joint_paths_agree() {
        let t = RateThreshold::new(1.0).unwrap();
        let loose = QuadSettings { rel_tol: 1e-7, ..q() };
        for spec in [
            s1(1e-9, 0.7, 15.0, 5.0, EveMode::TrueSnr),
            s2(1e-9, 0.7, 15.0, 5.0, EveMode::TrueSnr),
        ] {
            let mut ray = spec;
            ray.pair.k = 0.0;
            let a = avg_secrecy_capacity_conditional(&spec, &q(), &sd()).unwrap().value;
            let b = avg_secrecy_capacity_joint(&ray, &loose, &sd()).unwrap().value;
            assert!((a - b).abs() < 1e-5, "{:?} asc {a} {b}", spec.topology);
            let a = secrecy_outage_conditional(&spec, &t, &q(), &sd()).unwrap().value;
            let b = secrecy_outage_joint(&ray, &t, &loose, &sd()).unwrap().value;
            assert!((a - b).abs() < 1e-6, "{:?} opsc {a} {b}", spec.topology);
        }
    }

    #[test]
    fn conditional_matches_joint_for_rician_pair() {
        let t = RateThreshold::new(1.0).unwrap();
        let loose = QuadSettings {
            rel_tol: 1e-4,
            abs_tol: 1e-7,
            ..q()
        };
        let spec = s1(3.0, 0.5, 10.0, 5.0, EveMode::TrueSnr);
        let a = secrecy_outage_conditional(&spec, &t, &q(), &sd()).unwrap().value;
        let b = secrecy_outage_joint(&spec, &t, &loose, &sd()).unwrap().value;
        assert!((a - b).abs() < 1e-4, "{a} {b}");
    }

    #[test]
    fn outage_quadrature_matches_closed_form() {
        let t = RateThreshold::new(1.0).unwrap();
        for (rho, g) in [(0.0, 1.0), (0.7, 30.0), (0.9, 1e4)] {
            let closed = outage_probability(&fp(0.0, rho), g, &t, &sd(), &q()).unwrap();
            let numeric = outage_probability_quadrature(&fp(0.0, rho), g, &t, &sd(), &q()).unwrap();
            assert_eq!(closed.method, Method::ClosedForm);
            assert_eq!(numeric.method, Method::Quadrature);
            assert!(
                (closed.value - numeric.value).abs() < 1e-9 * closed.value.max(1e-3),
                "{closed:?} {numeric:?}"
            );
        }
    }

    #[test]
    fn vanishing_eavesdropper_leaves_link_capacity() {
        let spec = s1(0.0, 0.7, 20.0, -100.0, EveMode::TrueSnr);
        let asc = avg_secrecy_capacity(&spec, &q(), &sd()).unwrap().value;
        let gi = db_to_linear(20.0) / 1.49;
        let cap = avg_capacity(&fp(0.0, 0.7), gi, &sd(), &q()).unwrap().value;
        assert!((asc - cap).abs() < 1e-3, "{asc} {cap}");
    }

    #[test]
    fn zero_legitimate_snr_gives_certain_outage() {
        let t = RateThreshold::new(1.0).unwrap();
        let spec = s1(0.0, 0.7, -100.0, 5.0, EveMode::TrueSnr);
        let op = secrecy_outage(&spec, &t, &q(), &sd(), false).unwrap().value;
        assert!((op - 1.0).abs() < 1e-6);
    }

    #[test]
    fn true_and_naive_ordering() {
        let a = avg_secrecy_capacity(&s1(0.0, 0.7, 20.0, 5.0, EveMode::TrueSnr), &q(), &sd()).unwrap();
        let b = avg_secrecy_capacity(&s1(0.0, 0.7, 20.0, 5.0, EveMode::Naive), &q(), &sd()).unwrap();
        assert!(a.value > b.value);
        let a = avg_secrecy_capacity(&s2(0.0, 0.9, 25.0, 5.0, EveMode::TrueSnr), &q(), &sd()).unwrap();
        let b = avg_secrecy_capacity(&s2(0.0, 0.9, 25.0, 5.0, EveMode::Naive), &q(), &sd()).unwrap();
        assert!(a.value < b.value);
    }

    #[test]
    fn uncorrelated_capacity_paths_agree() {
        let g = 7.0;
        let a = uncorrelated_product_capacity(0.0, 0.0, g, &q()).unwrap().value;
        let b = avg_capacity(&fp(0.0, 0.0), g, &sd(), &q()).unwrap().value;
        assert!((a - b).abs() < 1e-8);
        let c = uncorrelated_product_capacity(2.0, 0.0, g, &q()).unwrap().value;
        let d = uncorrelated_product_capacity(2.0, 1e-12, g, &q()).unwrap().value;
        assert!((c - d).abs() < 1e-7);
        let e = uncorrelated_product_capacity(3.0, 3.0, g, &q()).unwrap().value;
        let f = avg_capacity(&fp(3.0, 0.0), g, &sd(), &q()).unwrap().value;
        assert!((e - f).abs() < 1e-7);
    }

    #[test]
    fn asymptotic_secrecy_close_at_high_snr() {
        let spec = s1(0.0, 0.7, 35.0, 5.0, EveMode::TrueSnr);
        let exact = avg_secrecy_capacity(&spec, &q(), &sd()).unwrap().value;
        let diff = asc_asymptotic(&spec, AsymptoticForm::Difference, &q(), &sd()).unwrap();
        let log = asc_asymptotic(&spec, AsymptoticForm::LogLoss, &q(), &sd()).unwrap();
        assert_eq!(diff.method, Method::AsymptoticDifference);
        assert!((diff.value - exact).abs() < 0.1);
        assert!((log.value - exact).abs() < 0.2);
    }

    #[test]
    fn rayleigh_pdf_capacity_form_is_consistent() {
        // E{log2(1 + g u)} with u of mean 1 + p equals the density in SNR units
        let (p, g): (f64, f64) = (0.5, 20.0);
        let a = avg_capacity(&fp(0.0, p.sqrt()), g, &sd(), &q()).unwrap().value;
        let b = integrate_semi_infinite(
            |s| log2_1p(s) * rayleigh_product_pdf(s, g * (1.0 + p), p).unwrap(),
            0.0,
            &[1.0, g],
            &q(),
        )
        .unwrap()
        .value;
        assert!((a - b).abs() < 1e-8);
    }
}
