//! Globally adaptive Gauss–Kronrod (10/21-point) integration on finite
//! intervals, semi-infinite intervals and nested 2-D regions.
//!
//! Semi-infinite pieces are compactified with `u = a + s * t / (1 - t)`,
//! `t in [0, 1)`. The Kronrod nodes are interior, so the integrand is never
//! evaluated at an interval end point: integrable end-point singularities
//! (the `K_0` logarithm at the origin) are handled by bisection alone.

use std::cell::Cell;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Upper bound on the mass allowed in the last compactified segment.
    pub tail_mass_bound: f64,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 2000,
            tail_mass_bound: 1e-12,
        }
    }
}

impl QuadSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::invalid("rel_tol", "must lie in (0, 1)"));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::invalid("abs_tol", "must be positive"));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::invalid("max_subdivisions", "must be at least 1"));
        }
        if !(self.tail_mass_bound > 0.0) {
            return Err(Error::invalid("tail_mass_bound", "must be positive"));
        }
        Ok(())
    }

    pub(crate) fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub subdivisions_used: usize,
    pub converged: bool,
}

impl QuadResult {
    pub(crate) const ZERO: QuadResult = QuadResult {
        value: 0.0,
        error_estimate: 0.0,
        subdivisions_used: 0,
        converged: true,
    };

    /// Sum of independent pieces (errors add, convergence is conjunctive).
    pub(crate) fn combine(self, other: QuadResult) -> QuadResult {
        QuadResult {
            value: self.value + other.value,
            error_estimate: self.error_estimate + other.error_estimate,
            subdivisions_used: self.subdivisions_used + other.subdivisions_used,
            converged: self.converged && other.converged,
        }
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_048_255,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], ...
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    /// Touches the compactified end point `t = 1`.
    tail: bool,
}

impl Segment {
    fn priority(&self, tail_limit: f64) -> f64 {
        if self.tail && self.value.abs() > tail_limit {
            self.error + self.value.abs()
        } else {
            self.error
        }
    }
}

struct Ranked(f64, Segment);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0).is_eq()
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // ties broken by position so the pop order is fully determined
        self.0.total_cmp(&other.0).then_with(|| other.1.a.total_cmp(&self.1.a))
    }
}

/// One 21-point Kronrod panel with the QUADPACK error heuristic.
fn kronrod21(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

/// Globally adaptive bisection over a set of initial segments in `t`.
///
/// `g` is the (possibly transformed) integrand; `tail_end` marks segments
/// ending at the compactified infinity so their mass can be checked.
fn adaptive(
    g: &dyn Fn(f64) -> f64,
    initial: &[(f64, f64)],
    tail_end: Option<f64>,
    settings: &QuadSettings,
    nan_at: &Cell<Option<f64>>,
) -> Result<QuadResult> {
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let tail_limit = |total: f64| settings.tail_mass_bound.max(settings.rel_tol * total.abs());

    let eval = |a: f64, b: f64| -> Result<Segment> {
        let (value, error) = kronrod21(g, a, b);
        if !value.is_finite() || !error.is_finite() {
            let abscissa = nan_at.get().unwrap_or(0.5 * (a + b));
            return Err(Error::NanIntegrand { abscissa });
        }
        Ok(Segment {
            a,
            b,
            value,
            error,
            tail: tail_end == Some(b),
        })
    };

    for &(a, b) in initial {
        if b <= a {
            continue;
        }
        let seg = eval(a, b)?;
        total += seg.value;
        total_err += seg.error;
        heap.push(Ranked(seg.priority(settings.tail_mass_bound), seg));
    }
    if heap.is_empty() {
        return Ok(QuadResult::ZERO);
    }

    let mut subdivisions = heap.len();
    let done = |total: f64, err: f64, heap: &BinaryHeap<Ranked>| {
        err <= settings.target(total) && heap.iter().all(|r| !r.1.tail || r.1.value.abs() <= tail_limit(total))
    };

    while !done(total, total_err, &heap) && subdivisions < settings.max_subdivisions {
        let Some(Ranked(_, worst)) = heap.pop() else {
            break;
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // cannot be split further in floating point
            heap.push(Ranked(-1.0, worst));
            break;
        }
        let left = eval(worst.a, mid)?;
        let right = eval(mid, worst.b)?;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        let limit = tail_limit(total);
        heap.push(Ranked(left.priority(limit), left));
        heap.push(Ranked(right.priority(limit), right));
        subdivisions += 1;
    }

    // Re-sum in position order: the running total accumulates rounding.
    let mut segs: Vec<Segment> = heap.into_iter().map(|r| r.1).collect();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value: f64 = segs.iter().map(|s| s.value).sum();
    let error: f64 = segs.iter().map(|s| s.error).sum();
    let converged =
        error <= settings.target(value) && segs.iter().all(|s| !s.tail || s.value.abs() <= tail_limit(value));
    Ok(QuadResult {
        value,
        error_estimate: error,
        subdivisions_used: subdivisions,
        converged,
    })
}

fn checked<'a>(f: &'a dyn Fn(f64) -> f64, nan_at: &'a Cell<Option<f64>>) -> impl Fn(f64) -> f64 + 'a {
    move |x| {
        let y = f(x);
        if y.is_nan() && nan_at.get().is_none() {
            nan_at.set(Some(x));
        }
        y
    }
}

fn sorted_cuts(lower: f64, upper: f64, breakpoints: &[f64]) -> Vec<f64> {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > lower && *b < upper)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts
}

/// `\int_a^b f` over a finite interval, split at `breakpoints`.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    settings: &QuadSettings,
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("bounds", "finite interval expected"));
    }
    if b <= a {
        return Ok(QuadResult::ZERO);
    }
    let nan_at = Cell::new(None);
    let f: &dyn Fn(f64) -> f64 = &f;
    let g = checked(f, &nan_at);
    let mut edges = vec![a];
    edges.extend(sorted_cuts(a, b, breakpoints));
    edges.push(b);
    let pieces: Vec<(f64, f64)> = edges.windows(2).map(|w| (w[0], w[1])).collect();
    adaptive(&g, &pieces, None, settings, &nan_at)
}

/// `\int_{lower}^\infty f`; see [`integrate_semi_infinite_scaled`].
pub fn integrate_semi_infinite(
    f: impl Fn(f64) -> f64,
    lower: f64,
    breakpoints: &[f64],
    settings: &QuadSettings,
) -> Result<QuadResult> {
    integrate_semi_infinite_scaled(f, lower, breakpoints, 1.0, settings)
}

/// `\int_{lower}^\infty f` with the interval split at every breakpoint and
/// the last piece `[c, \infty)` mapped by `u = c + scale * t / (1 - t)`.
///
/// `scale` should be of the order of the integrand's decay length.
pub fn integrate_semi_infinite_scaled(
    f: impl Fn(f64) -> f64,
    lower: f64,
    breakpoints: &[f64],
    scale: f64,
    settings: &QuadSettings,
) -> Result<QuadResult> {
    integrate_to(f, lower, f64::INFINITY, breakpoints, scale, settings)
}

/// `\int_a^b f` where `b` may be infinite or very long compared to `scale`.
///
/// Pieces no longer than `64 * scale` are integrated directly; a longer final
/// piece `[c, b)` uses the compactifying map truncated at `b`.
pub fn integrate_to(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    scale: f64,
    settings: &QuadSettings,
) -> Result<QuadResult> {
    if !a.is_finite() || b.is_nan() {
        return Err(Error::invalid("bounds", "finite lower bound expected"));
    }
    if !(scale > 0.0) {
        return Err(Error::invalid("scale", "must be positive"));
    }
    if b <= a {
        return Ok(QuadResult::ZERO);
    }
    let mut edges = vec![a];
    edges.extend(sorted_cuts(a, b, breakpoints));
    edges.push(b);
    // a piece is compactified when it is infinite or much longer than `scale`
    let t_ends: Vec<Option<f64>> = edges
        .windows(2)
        .map(|w| {
            let len = w[1] - w[0];
            if len.is_infinite() {
                Some(1.0)
            } else if len > 64.0 * scale {
                Some(len / (scale + len))
            } else {
                None
            }
        })
        .collect();
    if t_ends.iter().all(Option::is_none) {
        return integrate(f, a, b, &edges[1..edges.len() - 1], settings);
    }

    let nan_at = Cell::new(None);
    let f: &dyn Fn(f64) -> f64 = &f;
    let f = checked(f, &nan_at);
    // Piece i occupies t in [i, i + 1): linear pieces map onto [e_i, e_{i+1}],
    // compact pieces use e_i + scale * s / (1 - s) with s = (t - i) * t_end.
    let n = t_ends.len();
    let g = |t: f64| -> f64 {
        let i = (t.floor().max(0.0) as usize).min(n - 1);
        let tau = t - i as f64;
        let lo = edges[i];
        match t_ends[i] {
            None => {
                let width = edges[i + 1] - lo;
                f(lo + tau * width) * width
            }
            Some(t_end) => {
                let s = tau * t_end;
                let one_minus = 1.0 - s;
                let y = f(lo + scale * s / one_minus);
                if y == 0.0 {
                    0.0
                } else {
                    y * t_end * scale / (one_minus * one_minus)
                }
            }
        }
    };
    let pieces: Vec<(f64, f64)> = (0..n).map(|i| (i as f64, (i + 1) as f64)).collect();
    let tail_end = b.is_infinite().then_some(n as f64);
    adaptive(&g, &pieces, tail_end, settings, &nan_at)
}

/// `\int_{-\infty}^{\infty} f`, split at `center` into two semi-infinite
/// halves; the left half is integrated in the reflected variable.
pub fn integrate_real_line(
    f: impl Fn(f64) -> f64,
    center: f64,
    breakpoints: &[f64],
    settings: &QuadSettings,
) -> Result<QuadResult> {
    if !center.is_finite() {
        return Err(Error::invalid("center", "must be finite"));
    }
    let right: Vec<f64> = breakpoints.iter().copied().filter(|b| *b > center).collect();
    let left: Vec<f64> = breakpoints
        .iter()
        .filter(|b| **b < center)
        .map(|b| 2.0 * center - b)
        .collect();
    let upper = integrate_semi_infinite(&f, center, &right, settings)?;
    let lower = integrate_semi_infinite(|s| f(2.0 * center - s), center, &left, settings).map_err(|e| match e {
        Error::NanIntegrand { abscissa } => Error::NanIntegrand {
            abscissa: 2.0 * center - abscissa,
        },
        e => e,
    })?;
    Ok(upper.combine(lower))
}

/// A piecewise-linear bound of the inner variable as a function of the outer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Infinite,
    /// `slope * u + intercept`
    Linear {
        slope: f64,
        intercept: f64,
    },
    /// `max(0, slope * u + intercept)`
    ClampedLinear {
        slope: f64,
        intercept: f64,
    },
}

impl Bound {
    pub fn constant(value: f64) -> Self {
        Bound::Linear {
            slope: 0.0,
            intercept: value,
        }
    }

    pub fn at(&self, u: f64) -> f64 {
        match *self {
            Bound::Infinite => f64::INFINITY,
            Bound::Linear { slope, intercept } => slope * u + intercept,
            Bound::ClampedLinear { slope, intercept } => (slope * u + intercept).max(0.0),
        }
    }

    fn kink(&self) -> Option<f64> {
        match *self {
            Bound::ClampedLinear { slope, intercept } if slope != 0.0 => Some(-intercept / slope),
            _ => None,
        }
    }

    fn line(&self) -> Option<(f64, f64)> {
        match *self {
            Bound::Infinite => None,
            Bound::Linear { slope, intercept } | Bound::ClampedLinear { slope, intercept } => Some((slope, intercept)),
        }
    }
}

/// `{ (u, v) : u in [outer_lower, outer_upper], inner_lower(u) <= v <= inner_upper(u) }`
#[derive(Debug, Clone, PartialEq)]
pub struct Region2d {
    pub outer_lower: f64,
    pub outer_upper: f64,
    pub inner_lower: Bound,
    pub inner_upper: Bound,
    pub outer_breakpoints: Vec<f64>,
    pub outer_scale: f64,
    pub inner_scale: f64,
}

impl Region2d {
    /// `u in [0, \infty)` with the given inner bounds and unit scales.
    pub fn quadrant(inner_lower: Bound, inner_upper: Bound) -> Self {
        Self {
            outer_lower: 0.0,
            outer_upper: f64::INFINITY,
            inner_lower,
            inner_upper,
            outer_breakpoints: Vec::new(),
            outer_scale: 1.0,
            inner_scale: 1.0,
        }
    }

    /// Outer abscissae where an inner bound changes slope or the bounds cross.
    pub fn kinks(&self) -> Vec<f64> {
        let mut out: Vec<f64> = [self.inner_lower.kink(), self.inner_upper.kink()]
            .into_iter()
            .flatten()
            .collect();
        // where the upper line crosses the lower one (or zero, for a clamped lower)
        if let Some((su, iu)) = self.inner_upper.line() {
            let mut lines = vec![(0.0, 0.0)];
            if let Some(l) = self.inner_lower.line() {
                lines.push(l);
            }
            for (sl, il) in lines {
                if su != sl {
                    out.push((il - iu) / (su - sl));
                }
            }
        }
        out.retain(|k| k.is_finite() && *k > self.outer_lower && *k < self.outer_upper);
        out
    }
}

/// `\int_a^b g(u) du` where each `g(u)` is itself a quadrature result.
///
/// Inner non-convergence marks the result as not converged; the first inner
/// error aborts the whole integral. Subdivision counts are summed.
pub fn integrate_nested(
    inner: impl Fn(f64) -> Result<QuadResult>,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    scale: f64,
    settings: &QuadSettings,
) -> Result<QuadResult> {
    let inner_ok = Cell::new(true);
    let inner_subdivisions = Cell::new(0usize);
    let failure: Cell<Option<Error>> = Cell::new(None);

    let outer = |u: f64| -> f64 {
        match inner(u) {
            Ok(r) => {
                if !r.converged {
                    inner_ok.set(false);
                }
                inner_subdivisions.set(inner_subdivisions.get() + r.subdivisions_used);
                r.value
            }
            Err(e) => {
                let keep = failure.take().unwrap_or(e);
                failure.set(Some(keep));
                f64::NAN
            }
        }
    };

    let result = integrate_to(outer, a, b, breakpoints, scale, settings);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let mut r = result?;
    r.converged &= inner_ok.get();
    r.subdivisions_used += inner_subdivisions.get();
    Ok(r)
}

/// Nested integral of `f(u, v)` over a [`Region2d`] (`u` outer, `v` inner).
///
/// Inner integrals use the same settings; any inner failure to converge marks
/// the whole result as not converged, and an inner NaN aborts.
pub fn integrate_2d(f: impl Fn(f64, f64) -> f64, region: &Region2d, settings: &QuadSettings) -> Result<QuadResult> {
    let inner = |u: f64| -> Result<QuadResult> {
        // NaN maps to 0
        let lo = region.inner_lower.at(u).max(0.0);
        let hi = region.inner_upper.at(u);
        if !(hi > lo) {
            return Ok(QuadResult::ZERO);
        }
        integrate_to(|v| f(u, v), lo, hi, &[], region.inner_scale, settings)
    };
    let mut breaks = region.kinks();
    breaks.extend(region.outer_breakpoints.iter().copied());
    integrate_nested(
        inner,
        region.outer_lower,
        region.outer_upper,
        &breaks,
        region.outer_scale,
        settings,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::bessel_k_scaled;

    fn s() -> QuadSettings {
        QuadSettings::default()
    }

    #[test]
    fn kronrod_exact_on_polynomials() {
        // 21-point Kronrod integrates degree 31 exactly, the Gauss part 19
        let f = |x: f64| x.powi(30) + 3.0 * x.powi(7) - x * x;
        let (v, _) = kronrod21(&f, -1.0, 1.0);
        let want = 2.0 / 31.0 - 2.0 / 3.0;
        assert!((v - want).abs() < 1e-14);
        let mut g = 0.0;
        for j in 0..5 {
            let x = XGK[2 * j + 1];
            g += WG[j] * 2.0 * x.powi(18);
        }
        assert!((g - 2.0 / 19.0).abs() < 1e-14);
        assert!((WGK[10] + 2.0 * WGK[..10].iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exponential_tail() {
        let r = integrate_semi_infinite(|u| (-u).exp(), 0.0, &[], &s()).unwrap();
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!(r.error_estimate <= s().target(r.value));
    }

    #[test]
    fn breakpoint_is_value_neutral() {
        let a = integrate_semi_infinite(|u| (-u).exp(), 0.0, &[], &s()).unwrap();
        let b = integrate_semi_infinite(|u| (-u).exp(), 0.0, &[3.0], &s()).unwrap();
        assert!((b.value - 1.0).abs() < 1e-12);
        assert!((a.value - b.value).abs() <= a.error_estimate + b.error_estimate);
    }

    #[test]
    fn double_rayleigh_density_normalizes() {
        // 2 K_0(2 sqrt u): log singularity at the origin
        let f = |u: f64| {
            let z = 2.0 * u.sqrt();
            2.0 * bessel_k_scaled(0, z).unwrap() * (-z).exp()
        };
        let r = integrate_semi_infinite(f, 0.0, &[], &s()).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn nan_reports_abscissa() {
        let err = integrate_semi_infinite(
            |u| if u > 2.0 && u < 2.5 { f64::NAN } else { (-u).exp() },
            0.0,
            &[],
            &s(),
        )
        .unwrap_err();
        match err {
            Error::NanIntegrand { abscissa } => assert!(abscissa > 2.0 && abscissa < 2.5),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn non_convergence_is_flagged() {
        let tight = QuadSettings {
            max_subdivisions: 2,
            ..s()
        };
        let r = integrate(|x| x.powf(-0.9), 0.0, 1.0, &[], &tight).unwrap();
        assert!(!r.converged);
        assert!(r.value.is_finite());
    }

    #[test]
    fn long_finite_interval_is_compactified() {
        let r = integrate_to(|u| (-u).exp(), 0.0, 1e12, &[], 1.0, &s()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-11, "{r:?}");
        let r = integrate_to(|u| (-u).exp(), 0.0, 100.0, &[0.5], 1.0, &s()).unwrap();
        assert!((r.value - (1.0 - (-100.0f64).exp())).abs() < 1e-12);
        // a distant breakpoint must not hide the mass near the origin
        let r = integrate_semi_infinite(|u| (-u).exp(), 0.0, &[1.0, 1e10], &s()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn real_line_gaussian() {
        let f = |s: f64| (-(s - 1.5) * (s - 1.5)).exp();
        let r = integrate_real_line(f, 0.0, &[-2.0, 1.5], &s()).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn quadrant_mass() {
        let region = Region2d::quadrant(Bound::constant(0.0), Bound::Infinite);
        let r = integrate_2d(|u, v| (-u - v).exp(), &region, &s()).unwrap();
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn clamped_lower_bound_matches_reduced_integral() {
        // v >= max(0, u - 1): inner integral is e^{-max(0, u-1)}, so the
        // total is int_0^inf e^{-u - max(0, u-1)} du
        let region = Region2d::quadrant(
            Bound::ClampedLinear {
                slope: 1.0,
                intercept: -1.0,
            },
            Bound::Infinite,
        );
        assert_eq!(region.kinks(), vec![1.0]);
        let r = integrate_2d(|u, v| (-u - v).exp(), &region, &s()).unwrap();
        let oracle = integrate_semi_infinite(|u| (-u - (u - 1.0).max(0.0)).exp(), 0.0, &[1.0], &s()).unwrap();
        let closed = 1.0 - (-1.0f64).exp() + (-1.0f64).exp() / 2.0;
        assert!((r.value - oracle.value).abs() < 1e-10);
        assert!((oracle.value - closed).abs() < 1e-12);
    }

    #[test]
    fn empty_region_is_zero() {
        let region = Region2d::quadrant(
            Bound::constant(5.0),
            Bound::Linear {
                slope: 0.0,
                intercept: 1.0,
            },
        );
        let r = integrate_2d(|_, _| 1.0, &region, &s()).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn wedge_under_a_line() {
        // v in [0, 2u], f = e^{-u-v}: int_0^inf e^{-u}(1 - e^{-2u}) du = 2/3
        let region = Region2d::quadrant(
            Bound::constant(0.0),
            Bound::Linear {
                slope: 2.0,
                intercept: 0.0,
            },
        );
        let r = integrate_2d(|u, v| (-u - v).exp(), &region, &s()).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn deterministic_bitwise() {
        let f = |u: f64| (-u).exp() * (1.0 + u).ln();
        let a = integrate_semi_infinite(f, 0.0, &[0.3, 2.0], &s()).unwrap();
        let b = integrate_semi_infinite(f, 0.0, &[0.3, 2.0], &s()).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn settings_validation() {
        assert!(s().validate().is_ok());
        let bad = QuadSettings { rel_tol: 1.5, ..s() };
        assert!(bad.validate().is_err());
        let bad = QuadSettings {
            max_subdivisions: 0,
            ..s()
        };
        assert!(bad.validate().is_err());
    }
}
