//! Sweep execution and the CSV result table.

use std::cmp::Ordering;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::de::value::StrDeserializer;
use serde::de::{DeserializeOwned, IntoDeserializer};

use crate::channel::{delta_po, EveMode, FadingParams, ScenarioSpec, Topology};
use crate::error::{Error, Result};
use crate::mc::{mc_metric_sweep, McMetric};
use crate::metrics::{
    asc_asymptotic, avg_capacity, avg_capacity_asymptotic, avg_secrecy_capacity, outage_probability,
    outage_probability_quadrature, secrecy_outage, snr_scales, AsymptoticForm, Method, MetricEstimate,
};

use super::config::{Correlation, ExperimentConfig, MetricKind};

pub const CSV_HEADER: [&str; 14] = [
    "scenario",
    "metric",
    "method",
    "k",
    "rho",
    "p",
    "snr_db",
    "eve_snr_db",
    "eve_mode",
    "r_th",
    "value",
    "error_estimate",
    "n_samples_or_subdivisions",
    "status",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    NotConverged,
    /// The method has no evaluator for this metric and configuration.
    Unavailable,
    Error(String),
}

impl RowStatus {
    pub fn is_failure(&self) -> bool {
        matches!(self, RowStatus::NotConverged | RowStatus::Error(_))
    }

    fn render(&self) -> String {
        match self {
            RowStatus::Ok => "ok".into(),
            RowStatus::NotConverged => "not_converged".into(),
            RowStatus::Unavailable => "unavailable".into(),
            RowStatus::Error(msg) => format!("error: {msg}"),
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "ok" => RowStatus::Ok,
            "not_converged" => RowStatus::NotConverged,
            "unavailable" => RowStatus::Unavailable,
            _ => match s.strip_prefix("error: ") {
                Some(msg) => RowStatus::Error(msg.to_string()),
                None => return Err(Error::config("status", format!("unknown status {s:?}"))),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: Topology,
    pub metric: MetricKind,
    pub method: Method,
    pub k: f64,
    pub rho: f64,
    pub p: f64,
    pub snr_db: f64,
    pub eve_snr_db: Option<f64>,
    pub eve_mode: Option<EveMode>,
    pub r_th: Option<f64>,
    pub value: Option<f64>,
    pub error_estimate: Option<f64>,
    pub n_samples_or_subdivisions: Option<u64>,
    pub status: RowStatus,
}

fn cmp_opt_f64(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        _ => a.is_some().cmp(&b.is_some()),
    }
}

impl ResultRow {
    /// Lexicographic order on the identifying columns.
    pub fn key_cmp(&self, other: &Self) -> Ordering {
        self.scenario
            .as_str()
            .cmp(other.scenario.as_str())
            .then_with(|| self.metric.as_str().cmp(other.metric.as_str()))
            .then_with(|| self.method.as_str().cmp(other.method.as_str()))
            .then_with(|| self.k.total_cmp(&other.k))
            .then_with(|| self.rho.total_cmp(&other.rho))
            .then_with(|| self.p.total_cmp(&other.p))
            .then_with(|| self.snr_db.total_cmp(&other.snr_db))
            .then_with(|| cmp_opt_f64(self.eve_snr_db, other.eve_snr_db))
            .then_with(|| {
                let a = self.eve_mode.map(EveMode::as_str).unwrap_or("");
                let b = other.eve_mode.map(EveMode::as_str).unwrap_or("");
                a.cmp(b)
            })
    }

    fn to_record(&self) -> Vec<String> {
        let num = |v: f64| format!("{v:?}");
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        vec![
            self.scenario.as_str().to_string(),
            self.metric.as_str().to_string(),
            self.method.as_str().to_string(),
            num(self.k),
            num(self.rho),
            num(self.p),
            num(self.snr_db),
            opt(self.eve_snr_db),
            self.eve_mode.map(EveMode::as_str).unwrap_or("").to_string(),
            opt(self.r_th),
            opt(self.value),
            opt(self.error_estimate),
            self.n_samples_or_subdivisions
                .map(|n| n.to_string())
                .unwrap_or_default(),
            self.status.render(),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self> {
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::config(
                "csv",
                format!("expected {} columns, found {}", CSV_HEADER.len(), rec.len()),
            ));
        }
        let col = |i: usize| rec.get(i).unwrap_or("");
        let bad = |i: usize, what: &str| Error::config(CSV_HEADER[i], format!("cannot parse {:?} as {what}", col(i)));
        let num = |i: usize| col(i).parse::<f64>().map_err(|_| bad(i, "a number"));
        let opt = |i: usize| -> Result<Option<f64>> {
            if col(i).is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let scenario: Topology = parse_word(col(0)).ok_or_else(|| bad(0, "a topology"))?;
        let metric: MetricKind = parse_word(col(1)).ok_or_else(|| bad(1, "a metric"))?;
        let method: Method = parse_word(col(2)).ok_or_else(|| bad(2, "a method"))?;
        let eve_mode = if col(8).is_empty() {
            None
        } else {
            Some(parse_word(col(8)).ok_or_else(|| bad(8, "an eavesdropper mode"))?)
        };
        let n_samples_or_subdivisions = if col(12).is_empty() {
            None
        } else {
            Some(col(12).parse::<u64>().map_err(|_| bad(12, "an integer"))?)
        };
        Ok(Self {
            scenario,
            metric,
            method,
            k: num(3)?,
            rho: num(4)?,
            p: num(5)?,
            snr_db: num(6)?,
            eve_snr_db: opt(7)?,
            eve_mode,
            r_th: opt(9)?,
            value: opt(10)?,
            error_estimate: opt(11)?,
            n_samples_or_subdivisions,
            status: RowStatus::parse(col(13))?,
        })
    }
}

fn parse_word<T: DeserializeOwned>(s: &str) -> Option<T> {
    let de: StrDeserializer<'_, serde::de::value::Error> = s.into_deserializer();
    T::deserialize(de).ok()
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.to_record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::config("csv", "header does not match the result table columns"));
    }
    r.records().map(|rec| ResultRow::from_record(&rec?)).collect()
}

pub fn any_failure(rows: &[ResultRow]) -> bool {
    rows.iter().any(|r| r.status.is_failure())
}

/// One combination of fading and eavesdropper parameters, swept over SNR.
#[derive(Debug, Clone, Copy)]
struct Cell {
    k: f64,
    corr: Correlation,
    eve: Option<(f64, EveMode)>,
}

impl Cell {
    fn spec(&self, cfg: &ExperimentConfig, snr_db: f64) -> Result<ScenarioSpec> {
        let pair = FadingParams::new(self.k, self.corr.rho)?;
        let mut spec = match self.eve {
            None => ScenarioSpec::p2p(pair, snr_db),
            Some((eve_db, mode)) => ScenarioSpec::secrecy(
                cfg.scenario.topology,
                pair,
                cfg.scenario.independent_k,
                snr_db,
                eve_db,
                mode,
            ),
        };
        spec.snr_reference = cfg.scenario.snr_reference;
        Ok(spec)
    }

    fn row(&self, cfg: &ExperimentConfig, metric: MetricKind, method: Method, snr_db: f64) -> ResultRow {
        ResultRow {
            scenario: cfg.scenario.topology,
            metric,
            method,
            k: self.k,
            rho: self.corr.rho,
            p: self.corr.p,
            snr_db,
            eve_snr_db: self.eve.map(|e| e.0),
            eve_mode: self.eve.map(|e| e.1),
            r_th: metric.uses_threshold().then_some(cfg.r_th),
            value: None,
            error_estimate: None,
            n_samples_or_subdivisions: None,
            status: RowStatus::Unavailable,
        }
    }
}

fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let sc = &cfg.scenario;
    let eves: Vec<Option<(f64, EveMode)>> = if sc.topology == Topology::P2p {
        vec![None]
    } else {
        sc.eve_snr_db
            .iter()
            .flat_map(|&db| sc.eve_modes.iter().map(move |&m| Some((db, m))))
            .collect()
    };
    let mut out = Vec::new();
    for &k in &sc.k {
        for corr in cfg.correlations() {
            for &eve in &eves {
                out.push(Cell { k, corr, eve });
            }
        }
    }
    out
}

fn fill(mut row: ResultRow, result: Result<Option<MetricEstimate>>) -> ResultRow {
    match result {
        Ok(Some(est)) => {
            row.value = Some(est.value);
            row.error_estimate = Some(est.error_estimate);
            row.n_samples_or_subdivisions = Some(est.work);
            row.status = if est.converged && est.value.is_finite() {
                RowStatus::Ok
            } else {
                RowStatus::NotConverged
            };
        }
        Ok(None) => row.status = RowStatus::Unavailable,
        Err(e) => row.status = RowStatus::Error(e.to_string()),
    }
    row
}

/// Evaluates one analytic method; `None` when it has no evaluator here.
fn analytic(
    cfg: &ExperimentConfig,
    spec: &ScenarioSpec,
    metric: MetricKind,
    method: Method,
) -> Result<Option<MetricEstimate>> {
    let (quad, series) = (&cfg.quad, &cfg.series);
    let pair = &spec.pair;
    let est = match (metric, method) {
        (MetricKind::Capacity, Method::Quadrature) => avg_capacity(pair, snr_scales(spec)?.legit, series, quad)?,
        (MetricKind::Capacity, Method::ClosedForm) if pair.is_los_limit() => {
            avg_capacity(pair, snr_scales(spec)?.legit, series, quad)?
        }
        (MetricKind::Capacity, Method::Asymptotic) => {
            avg_capacity_asymptotic(pair, snr_scales(spec)?.legit * delta_po(pair))?
        }
        (MetricKind::Outage, Method::ClosedForm) if pair.is_rayleigh() || pair.is_los_limit() => {
            outage_probability(pair, snr_scales(spec)?.legit, &cfg.threshold()?, series, quad)?
        }
        (MetricKind::Outage, Method::Quadrature) => {
            outage_probability_quadrature(pair, snr_scales(spec)?.legit, &cfg.threshold()?, series, quad)?
        }
        (MetricKind::Asc, Method::Quadrature) => avg_secrecy_capacity(spec, quad, series)?,
        (MetricKind::Asc, Method::Asymptotic) => asc_asymptotic(spec, AsymptoticForm::LogLoss, quad, series)?,
        (MetricKind::Asc, Method::AsymptoticDifference) => {
            asc_asymptotic(spec, AsymptoticForm::Difference, quad, series)?
        }
        (MetricKind::Opsc, Method::Quadrature) => secrecy_outage(spec, &cfg.threshold()?, quad, series, false)?,
        _ => return Ok(None),
    };
    Ok(Some(est))
}

fn mc_metric_of(cfg: &ExperimentConfig, metric: MetricKind) -> Result<McMetric> {
    Ok(match metric {
        MetricKind::Capacity => McMetric::Capacity,
        MetricKind::Outage => McMetric::Outage(cfg.threshold()?),
        MetricKind::Asc => McMetric::Asc,
        MetricKind::Opsc => McMetric::Opsc(cfg.threshold()?),
    })
}

/// All Monte Carlo rows of one cell from a single set of samples.
fn monte_carlo_rows(cfg: &ExperimentConfig, cell: &Cell) -> Vec<ResultRow> {
    let snrs = &cfg.sweep.gamma_b_db;
    let estimates = cell.spec(cfg, snrs[0]).and_then(|spec| {
        let metrics = cfg
            .metrics
            .iter()
            .map(|&m| mc_metric_of(cfg, m))
            .collect::<Result<Vec<_>>>()?;
        mc_metric_sweep(&spec, snrs, &metrics, &cfg.mc)
    });
    let mut rows = Vec::with_capacity(snrs.len() * cfg.metrics.len());
    for (i, &snr) in snrs.iter().enumerate() {
        for (j, &metric) in cfg.metrics.iter().enumerate() {
            let row = cell.row(cfg, metric, Method::MonteCarlo, snr);
            let result = match &estimates {
                Ok(est) => Ok(Some(est[i][j])),
                Err(e) => Err(Error::config("monte_carlo", e.to_string())),
            };
            rows.push(fill(row, result));
        }
    }
    rows
}

enum Task {
    Analytic {
        cell: Cell,
        snr_db: f64,
        metric: MetricKind,
        method: Method,
    },
    MonteCarlo(Cell),
}

/// Runs the sweep and returns the rows in table order. Failed cells are
/// reported in their rows' status rather than aborting the sweep.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let mut tasks = Vec::new();
    for cell in cells(cfg) {
        for &method in &cfg.methods {
            if method == Method::MonteCarlo {
                tasks.push(Task::MonteCarlo(cell));
                continue;
            }
            for &snr_db in &cfg.sweep.gamma_b_db {
                for &metric in &cfg.metrics {
                    tasks.push(Task::Analytic {
                        cell,
                        snr_db,
                        metric,
                        method,
                    });
                }
            }
        }
    }
    let mut rows: Vec<ResultRow> = tasks
        .par_iter()
        .map(|task| match *task {
            Task::Analytic {
                cell,
                snr_db,
                metric,
                method,
            } => {
                let row = cell.row(cfg, metric, method, snr_db);
                let result = cell
                    .spec(cfg, snr_db)
                    .and_then(|spec| analytic(cfg, &spec, metric, method));
                vec![fill(row, result)]
            }
            Task::MonteCarlo(cell) => monte_carlo_rows(cfg, &cell),
        })
        .flatten()
        .collect();
    rows.sort_by(ResultRow::key_cmp);
    Ok(rows)
}
