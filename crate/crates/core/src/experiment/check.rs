//! Invariant assertions over a produced result table.

use std::collections::BTreeMap;

use crate::channel::{EveMode, Topology};
use crate::metrics::Method;

use super::config::MetricKind;
use super::run::{ResultRow, RowStatus};

/// Absolute slack for comparisons between analytic values.
pub const ANALYTIC_SLACK: f64 = 1e-9;
/// Monte Carlo agreement: `max(MC_SIGMAS * se, MC_FLOOR)`.
pub const MC_SIGMAS: f64 = 3.0;
pub const MC_FLOOR: f64 = 1e-4;
/// Largest relative S2 secrecy-outage change between `rho = 0` and `0.9` at
/// 40 dB.
pub const S2_INSENSITIVITY: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    fn push(&mut self, name: &str, failures: Vec<String>, checked: usize) {
        if checked == 0 {
            return;
        }
        let passed = failures.is_empty();
        let detail = if passed {
            format!("{checked} comparisons")
        } else {
            let shown: Vec<_> = failures.iter().take(5).cloned().collect();
            format!("{} of {checked} failed: {}", failures.len(), shown.join("; "))
        };
        self.outcomes.push(CheckOutcome {
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

/// Identity of a curve: everything except the SNR and the method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct CurveKey {
    scenario: Topology,
    metric: MetricKind,
    k: u64,
    rho: u64,
    eve_snr_db: Option<u64>,
    eve_mode: Option<EveMode>,
    r_th: Option<u64>,
}

fn curve_key(r: &ResultRow) -> CurveKey {
    CurveKey {
        scenario: r.scenario,
        metric: r.metric,
        k: r.k.to_bits(),
        rho: r.rho.to_bits(),
        eve_snr_db: r.eve_snr_db.map(f64::to_bits),
        eve_mode: r.eve_mode,
        r_th: r.r_th.map(f64::to_bits),
    }
}

fn label(r: &ResultRow) -> String {
    let mut s = format!(
        "{} {} {} K={} rho={} snr={}dB",
        r.scenario.as_str(),
        r.metric.as_str(),
        r.method.as_str(),
        r.k,
        r.rho,
        r.snr_db
    );
    if let (Some(e), Some(m)) = (r.eve_snr_db, r.eve_mode) {
        s.push_str(&format!(" eve={e}dB {}", m.as_str()));
    }
    s
}

fn ok_value(r: &ResultRow) -> Option<f64> {
    (r.status == RowStatus::Ok).then_some(r.value).flatten()
}

fn is_exact_method(m: Method) -> bool {
    matches!(m, Method::Quadrature | Method::ClosedForm)
}

fn slack(a: &ResultRow, b: &ResultRow) -> f64 {
    ANALYTIC_SLACK + a.error_estimate.unwrap_or(0.0) + b.error_estimate.unwrap_or(0.0)
}

/// Quadrature rows by curve, each sorted by SNR.
fn quadrature_curves(rows: &[ResultRow]) -> BTreeMap<CurveKey, Vec<&ResultRow>> {
    let mut curves: BTreeMap<CurveKey, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows
        .iter()
        .filter(|r| r.method == Method::Quadrature && ok_value(r).is_some())
    {
        curves.entry(curve_key(r)).or_default().push(r);
    }
    for c in curves.values_mut() {
        c.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
    }
    curves
}

fn check_status(rows: &[ResultRow], report: &mut CheckReport) {
    let failures = rows
        .iter()
        .filter(|r| r.status.is_failure())
        .map(|r| format!("{}: {:?}", label(r), r.status))
        .collect();
    report.push("all cells converged", failures, rows.len());
}

fn check_snr_monotonicity(rows: &[ResultRow], report: &mut CheckReport) {
    let mut failures = Vec::new();
    let mut checked = 0;
    let mut curves: BTreeMap<(CurveKey, Method), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows
        .iter()
        .filter(|r| is_exact_method(r.method) && ok_value(r).is_some())
    {
        curves.entry((curve_key(r), r.method)).or_default().push(r);
    }
    for ((key, _), mut curve) in curves {
        curve.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
        let decreasing = key.metric.is_probability();
        for w in curve.windows(2) {
            checked += 1;
            let (a, b) = (w[0].value.unwrap_or(0.0), w[1].value.unwrap_or(0.0));
            let step = if decreasing { a - b } else { b - a };
            if step < -slack(w[0], w[1]) {
                failures.push(format!("{} -> {}dB: {a} then {b}", label(w[0]), w[1].snr_db));
            }
        }
    }
    report.push("monotone in legitimate SNR", failures, checked);
}

fn check_eve_monotonicity(rows: &[ResultRow], report: &mut CheckReport) {
    let mut failures = Vec::new();
    let mut checked = 0;
    let mut groups: BTreeMap<(CurveKey, u64), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows
        .iter()
        .filter(|r| r.method == Method::Quadrature && r.eve_snr_db.is_some() && ok_value(r).is_some())
    {
        let key = CurveKey {
            eve_snr_db: None,
            ..curve_key(r)
        };
        groups.entry((key, r.snr_db.to_bits())).or_default().push(r);
    }
    for ((key, _), mut group) in groups {
        group.sort_by(|a, b| a.eve_snr_db.unwrap_or(0.0).total_cmp(&b.eve_snr_db.unwrap_or(0.0)));
        let increasing = key.metric.is_probability();
        for w in group.windows(2) {
            checked += 1;
            let (a, b) = (w[0].value.unwrap_or(0.0), w[1].value.unwrap_or(0.0));
            let step = if increasing { b - a } else { a - b };
            if step < -slack(w[0], w[1]) {
                failures.push(format!(
                    "{} vs eve {}dB: {a} then {b}",
                    label(w[0]),
                    w[1].eve_snr_db.unwrap_or(0.0)
                ));
            }
        }
    }
    report.push("secrecy degrades with eavesdropper SNR", failures, checked);
}

fn check_monte_carlo_agreement(rows: &[ResultRow], report: &mut CheckReport) {
    let mut failures = Vec::new();
    let mut checked = 0;
    let mut mc: BTreeMap<(CurveKey, u64), &ResultRow> = BTreeMap::new();
    for r in rows
        .iter()
        .filter(|r| r.method == Method::MonteCarlo && ok_value(r).is_some())
    {
        mc.insert((curve_key(r), r.snr_db.to_bits()), r);
    }
    for r in rows.iter().filter(|r| is_exact_method(r.method)) {
        let (Some(v), Some(m)) = (ok_value(r), mc.get(&(curve_key(r), r.snr_db.to_bits()))) else {
            continue;
        };
        checked += 1;
        let mv = m.value.unwrap_or(f64::NAN);
        let se = m.error_estimate.unwrap_or(0.0);
        let tol = (MC_SIGMAS * se).max(MC_FLOOR);
        if !((v - mv).abs() <= tol) {
            failures.push(format!("{}: {v} vs MC {mv} (se {se:.3e})", label(r)));
        }
    }
    report.push("analytic values agree with Monte Carlo", failures, checked);
}

/// Looks up the quadrature value of the curve matching `key` except for the
/// overrides, at `snr_db`.
fn lookup(curves: &BTreeMap<CurveKey, Vec<&ResultRow>>, key: CurveKey, snr_db: f64) -> Option<f64> {
    curves
        .get(&key)?
        .iter()
        .find(|r| r.snr_db == snr_db)
        .and_then(|r| ok_value(r))
}

fn check_true_vs_naive(curves: &BTreeMap<CurveKey, Vec<&ResultRow>>, report: &mut CheckReport) {
    let mut failures = Vec::new();
    let mut checked = 0;
    for (key, curve) in curves {
        if key.scenario != Topology::S1 || key.metric != MetricKind::Asc || key.eve_mode != Some(EveMode::TrueSnr) {
            continue;
        }
        if f64::from_bits(key.rho) == 0.0 {
            continue;
        }
        let naive = CurveKey {
            eve_mode: Some(EveMode::Naive),
            ..*key
        };
        for r in curve {
            let Some(n) = lookup(curves, naive, r.snr_db) else {
                continue;
            };
            checked += 1;
            let t = r.value.unwrap_or(0.0);
            if !(t > n) {
                failures.push(format!("{}: true {t} <= naive {n}", label(r)));
            }
        }
    }
    report.push("S1 naive mode underestimates secrecy capacity", failures, checked);
}

fn rho_pairs(
    curves: &BTreeMap<CurveKey, Vec<&ResultRow>>,
    filter: impl Fn(&CurveKey) -> bool,
) -> Vec<(CurveKey, CurveKey)> {
    curves
        .keys()
        .filter(|k| f64::from_bits(k.rho) == 0.9 && filter(k))
        .map(|k| {
            (
                *k,
                CurveKey {
                    rho: 0f64.to_bits(),
                    ..*k
                },
            )
        })
        .filter(|(_, base)| curves.contains_key(base))
        .collect()
}

fn check_low_snr_crossover(curves: &BTreeMap<CurveKey, Vec<&ResultRow>>, report: &mut CheckReport) {
    let mut failures = Vec::new();
    let mut checked = 0;
    let pairs = rho_pairs(curves, |k| {
        k.scenario == Topology::S1
            && k.metric == MetricKind::Asc
            && k.eve_mode == Some(EveMode::TrueSnr)
            && f64::from_bits(k.k) == 0.0
    });
    for (corr, base) in pairs {
        let ratios: Vec<(f64, f64)> = curves[&corr]
            .iter()
            .filter_map(|r| Some((r.snr_db, r.value? / lookup(curves, base, r.snr_db)?)))
            .collect();
        let Some(&(last_snr, last)) = ratios.iter().find(|(s, _)| *s == 40.0) else {
            continue;
        };
        checked += 1;
        if !ratios.iter().any(|&(_, q)| q > 1.0) {
            failures.push(format!("no SNR where the rho=0.9 / rho=0 ratio exceeds 1: {ratios:?}"));
        }
        if !(last < 1.0) {
            failures.push(format!("ratio at {last_snr}dB is {last}, expected < 1"));
        }
    }
    report.push("S1 correlation helps at low SNR and hurts at 40 dB", failures, checked);
}

fn check_s2_reversal(curves: &BTreeMap<CurveKey, Vec<&ResultRow>>, report: &mut CheckReport) {
    let mut failures = Vec::new();
    let mut checked = 0;
    let pairs = rho_pairs(curves, |k| k.scenario == Topology::S2 && k.metric == MetricKind::Asc);
    for (corr, base) in pairs {
        let diffs: Vec<(f64, f64)> = curves[&corr]
            .iter()
            .filter_map(|r| Some((r.snr_db, r.value? - lookup(curves, base, r.snr_db)?)))
            .collect();
        if diffs.is_empty() {
            continue;
        }
        checked += 1;
        let what = format!(
            "K={} eve={}dB",
            f64::from_bits(corr.k),
            corr.eve_snr_db.map(f64::from_bits).unwrap_or(f64::NAN)
        );
        match corr.eve_mode {
            Some(EveMode::TrueSnr) => {
                if let Some((s, d)) = diffs.iter().find(|(_, d)| *d >= 0.0) {
                    failures.push(format!("{what} true: correlation does not hurt at {s}dB ({d})"));
                }
            }
            _ => {
                if !diffs.iter().any(|(_, d)| *d > 0.0) {
                    failures.push(format!("{what} naive: correlation never appears beneficial"));
                }
            }
        }
    }
    report.push("S2 naive mode reverses the effect of correlation", failures, checked);
}

fn check_s2_insensitivity(curves: &BTreeMap<CurveKey, Vec<&ResultRow>>, report: &mut CheckReport) {
    let mut failures = Vec::new();
    let mut checked = 0;
    let pairs = rho_pairs(curves, |k| {
        k.scenario == Topology::S2
            && k.metric == MetricKind::Opsc
            && k.eve_mode == Some(EveMode::TrueSnr)
            && k.eve_snr_db == Some(5f64.to_bits())
            && k.r_th == Some(1f64.to_bits())
    });
    for (corr, base) in pairs {
        let (Some(a), Some(b)) = (lookup(curves, corr, 40.0), lookup(curves, base, 40.0)) else {
            continue;
        };
        checked += 1;
        let rel = (a - b).abs() / b;
        if !(rel < S2_INSENSITIVITY) {
            failures.push(format!("K={}: relative change {rel:.4}", f64::from_bits(corr.k)));
        }
    }
    report.push(
        "S2 secrecy outage at 40 dB is insensitive to correlation",
        failures,
        checked,
    );
}

/// Runs every invariant that the table has data for.
pub fn check_rows(rows: &[ResultRow]) -> CheckReport {
    let mut report = CheckReport::default();
    check_status(rows, &mut report);
    check_snr_monotonicity(rows, &mut report);
    check_eve_monotonicity(rows, &mut report);
    check_monte_carlo_agreement(rows, &mut report);
    let curves = quadrature_curves(rows);
    check_true_vs_naive(&curves, &mut report);
    check_low_snr_crossover(&curves, &mut report);
    check_s2_reversal(&curves, &mut report);
    check_s2_insensitivity(&curves, &mut report);
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(metric: MetricKind, method: Method, snr_db: f64, value: f64, se: f64) -> ResultRow {
        ResultRow {
            scenario: Topology::P2p,
            metric,
            method,
            k: 0.0,
            rho: 0.0,
            p: 0.0,
            snr_db,
            eve_snr_db: None,
            eve_mode: None,
            r_th: metric.uses_threshold().then_some(1.0),
            value: Some(value),
            error_estimate: Some(se),
            n_samples_or_subdivisions: Some(1),
            status: RowStatus::Ok,
        }
    }

    fn outcome<'a>(report: &'a CheckReport, name: &str) -> &'a CheckOutcome {
        report.outcomes.iter().find(|o| o.name.contains(name)).unwrap()
    }

    #[test]
    fn detects_non_monotone_capacity() {
        let rows = vec![
            row(MetricKind::Capacity, Method::Quadrature, 0.0, 1.0, 0.0),
            row(MetricKind::Capacity, Method::Quadrature, 5.0, 0.9, 0.0),
        ];
        assert!(!outcome(&check_rows(&rows), "monotone").passed);
    }

    #[test]
    fn outage_must_decrease() {
        let rows = vec![
            row(MetricKind::Outage, Method::Quadrature, 0.0, 0.5, 0.0),
            row(MetricKind::Outage, Method::Quadrature, 5.0, 0.2, 0.0),
        ];
        assert!(check_rows(&rows).passed());
    }

    #[test]
    fn monte_carlo_tolerance() {
        let rows = vec![
            row(MetricKind::Capacity, Method::Quadrature, 0.0, 1.0, 0.0),
            row(MetricKind::Capacity, Method::MonteCarlo, 0.0, 1.02, 0.01),
        ];
        assert!(check_rows(&rows).passed());
        let rows = vec![
            row(MetricKind::Capacity, Method::Quadrature, 0.0, 1.0, 0.0),
            row(MetricKind::Capacity, Method::MonteCarlo, 0.0, 1.04, 0.01),
        ];
        assert!(!outcome(&check_rows(&rows), "Monte Carlo").passed);
    }

    #[test]
    fn failed_rows_fail_the_report() {
        let mut r = row(MetricKind::Capacity, Method::Quadrature, 0.0, 1.0, 0.0);
        r.status = RowStatus::NotConverged;
        assert!(!check_rows(&[r]).passed());
    }

    #[test]
    fn naive_above_true_is_flagged() {
        let mk = |mode, value| ResultRow {
            scenario: Topology::S1,
            rho: 0.7,
            p: 0.49,
            eve_snr_db: Some(5.0),
            eve_mode: Some(mode),
            ..row(MetricKind::Asc, Method::Quadrature, 10.0, value, 0.0)
        };
        let rows = vec![mk(EveMode::TrueSnr, 1.0), mk(EveMode::Naive, 1.1)];
        assert!(!outcome(&check_rows(&rows), "underestimates").passed);
    }
}
