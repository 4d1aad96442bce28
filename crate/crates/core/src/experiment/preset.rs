//! Built-in sweep configurations.
//!
//! All presets sweep the legitimate SNR from 0 to 40 dB in 5 dB steps with
//! `K` in {0, 10}. `fig2` and `fig3` sweep `p = rho^2` over {0, 0.5, 0.9}; the
//! secrecy presets sweep `rho` over {0, 0.7, 0.9} with both eavesdropper modes
//! and a Rayleigh link outside the correlated pair.

use crate::channel::{EveMode, SnrReference, Topology};
use crate::dist::SeriesSettings;
use crate::error::{Error, Result};
use crate::mc::McSettings;
use crate::metrics::Method;
use crate::quadrature::QuadSettings;

use super::config::{ExperimentConfig, MetricKind, ScenarioConfig, SweepConfig, SCHEMA_VERSION};

pub const PRESET_NAMES: [&str; 8] = ["fig2", "fig3", "fig4", "fig4b", "fig5", "fig6", "fig7", "fig8"];

pub fn default_sweep() -> Vec<f64> {
    (0..=8).map(|i| 5.0 * i as f64).collect()
}

fn base(name: &str, scenario: ScenarioConfig, metric: MetricKind, methods: Vec<Method>) -> ExperimentConfig {
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        scenario,
        sweep: SweepConfig {
            gamma_b_db: default_sweep(),
        },
        metrics: vec![metric],
        methods,
        r_th: 1.0,
        mc: McSettings::default(),
        quad: QuadSettings::default(),
        series: SeriesSettings::default(),
        output_path: None,
    }
}

fn p2p() -> ScenarioConfig {
    ScenarioConfig {
        topology: Topology::P2p,
        k: vec![0.0, 10.0],
        rho: None,
        p: Some(vec![0.0, 0.5, 0.9]),
        independent_k: 0.0,
        eve_snr_db: Vec::new(),
        eve_modes: Vec::new(),
        snr_reference: SnrReference::Achieved,
    }
}

fn secrecy(topology: Topology, eve_snr_db: Vec<f64>) -> ScenarioConfig {
    ScenarioConfig {
        topology,
        k: vec![0.0, 10.0],
        rho: Some(vec![0.0, 0.7, 0.9]),
        p: None,
        independent_k: 0.0,
        eve_snr_db,
        eve_modes: vec![EveMode::TrueSnr, EveMode::Naive],
        snr_reference: SnrReference::Achieved,
    }
}

pub fn figure_preset(name: &str) -> Result<ExperimentConfig> {
    use Method::*;
    let cfg = match name {
        "fig2" => base(name, p2p(), MetricKind::Capacity, vec![Quadrature, MonteCarlo]),
        "fig3" => base(
            name,
            p2p(),
            MetricKind::Outage,
            vec![ClosedForm, Quadrature, MonteCarlo],
        ),
        "fig4" | "fig5" => base(
            name,
            secrecy(Topology::S1, vec![5.0]),
            MetricKind::Asc,
            vec![Quadrature, MonteCarlo],
        ),
        "fig4b" => base(
            name,
            secrecy(Topology::S1, vec![5.0]),
            MetricKind::Asc,
            vec![Quadrature, MonteCarlo, Asymptotic, AsymptoticDifference],
        ),
        "fig6" => base(
            name,
            secrecy(Topology::S1, vec![5.0]),
            MetricKind::Opsc,
            vec![Quadrature, MonteCarlo],
        ),
        "fig7" => base(
            name,
            secrecy(Topology::S2, vec![5.0, 10.0]),
            MetricKind::Asc,
            vec![Quadrature, MonteCarlo],
        ),
        "fig8" => base(
            name,
            secrecy(Topology::S2, vec![5.0, 10.0]),
            MetricKind::Opsc,
            vec![Quadrature, MonteCarlo],
        ),
        _ => {
            return Err(Error::config(
                "preset",
                format!("unknown preset {name:?}; valid names: {}", PRESET_NAMES.join(", ")),
            ))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}
