//! Repeated trials and frequency statistics over trigger angles.

use std::io::{self, Write};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::init::{apparatus_from_draw, system_initial, trial_seed, RandomDraw, TriggerParams};
use crate::integrator::{evolve, DiagnosticsLog, Snapshot};
use crate::measurement::{
    check_collective_condition, check_trigger_condition, classify, timescale_window,
    CollectiveReport, Outcome, Side, TimescaleParams, TimescaleReport, TriggerReport,
};
use crate::model::SystemState;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReports {
    pub collective: CollectiveReport,
    pub trigger: TriggerReport,
    pub timescale: TimescaleReport,
}

impl RegimeReports {
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !self.collective.pass {
            w.push(format!(
                "collective condition fails: {:.6e} >= {:.6e}",
                self.collective.lhs, self.collective.rhs
            ));
        }
        if !self.trigger.magnitude_pass {
            w.push(format!(
                "trigger condition fails: |{:.6e}| >= |{:.6e}|",
                self.trigger.lhs, self.trigger.lambda
            ));
        }
        if !self.timescale.window_nonempty {
            w.push("timescale window is empty".to_string());
        }
        w
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub master_seed: u64,
    pub trial_index: u64,
    /// Trigger angle; absent for apparatus-only runs.
    pub alpha: Option<f64>,
    pub mirrored: bool,
    pub outcome: Outcome,
    pub energy_drift: f64,
    pub norm_drift: f64,
    pub tightenings: u32,
    /// Error message of a trial that did not finish.
    pub failure: Option<String>,
    pub warnings: Vec<String>,
    pub regime: RegimeReports,
    pub draw: RandomDraw,
    /// Not serialized, so that records stay reproducible byte for byte.
    #[serde(skip)]
    pub wall_time: f64,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// A finished trial with its full diagnostics.
#[derive(Clone, Debug)]
pub struct TrialRun {
    pub record: TrialRecord,
    pub log: DiagnosticsLog,
    /// Whether the failure was a numerical blow-up.
    pub blowup: bool,
}

/// Builds the initial state of one trial.
pub fn prepare(cfg: &Config, alpha: Option<f64>, draw: &RandomDraw) -> Result<SystemState> {
    let grid = Grid::shared(cfg.grid.points)?;
    let apparatus = apparatus_from_draw(&grid, &cfg.model, draw)?;
    let system = match alpha {
        Some(alpha) => Some(system_initial(
            &grid,
            &TriggerParams {
                alpha,
                ..cfg.trigger.params()
            },
        )?),
        None => None,
    };
    SystemState::new(Arc::clone(&grid), apparatus, system)
}

pub fn regime_reports(cfg: &Config, state: &SystemState) -> RegimeReports {
    let ts = TimescaleParams::from_state(state, &cfg.model, cfg.measurement.size);
    RegimeReports {
        collective: check_collective_condition(&cfg.model),
        trigger: check_trigger_condition(&cfg.model),
        timescale: timescale_window(&ts, &cfg.model, cfg.evolve.t_final),
    }
}

/// One seeded trial, reporting snapshots to `observer`. Configuration
/// errors are returned; numerical failures end up in the record.
pub fn run_trial_observed(
    cfg: &Config,
    alpha: Option<f64>,
    master_seed: u64,
    trial_index: u64,
    observer: impl FnMut(&Snapshot),
) -> Result<TrialRun> {
    let start = Instant::now();
    cfg.validate()?;
    let mut draw = RandomDraw::generate(
        trial_seed(master_seed, trial_index),
        cfg.model.n_apparatus,
        cfg.model.sigma,
    );
    if cfg.sweep.mirror_draws {
        draw = draw.negated();
    }
    let mut state = prepare(cfg, alpha, &draw)?;
    let regime = regime_reports(cfg, &state);
    let warnings = regime.warnings();
    for w in &warnings {
        log::debug!("trial {trial_index}: {w}");
    }

    let (log, failure, blowup) = match evolve(&mut state, &cfg.model, &cfg.evolve, observer) {
        Ok(log) => (log, None, false),
        Err(f) => {
            let blowup = matches!(f.error, Error::NumericalBlowup { .. });
            if !blowup {
                return Err(f.error);
            }
            log::warn!("trial {trial_index} failed: {}", f.error);
            (f.log, Some(f.error.to_string()), true)
        }
    };
    let outcome = if failure.is_some() {
        Outcome::failed()
    } else {
        classify(&state, &cfg.model, cfg.measurement.margin)?
    };
    let record = TrialRecord {
        master_seed,
        trial_index,
        alpha,
        mirrored: cfg.sweep.mirror_draws,
        outcome,
        energy_drift: log.max_energy_drift(),
        norm_drift: log.max_norm_drift(),
        tightenings: log.tightenings.len() as u32,
        failure,
        warnings,
        regime,
        draw,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok(TrialRun {
        record,
        log,
        blowup,
    })
}

pub fn run_trial(
    cfg: &Config,
    alpha: Option<f64>,
    master_seed: u64,
    trial_index: u64,
) -> Result<TrialRecord> {
    run_trial_observed(cfg, alpha, master_seed, trial_index, |_| {}).map(|r| r.record)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub alpha: f64,
    pub sin2_alpha: f64,
    pub trials: u64,
    /// System and meter agree on the negative side.
    pub n_negative: u64,
    /// System and meter agree on the positive side.
    pub n_positive: u64,
    /// System undecided, or the trial failed.
    pub n_undecided: u64,
    /// System decided but the meter disagrees or is undecided.
    pub n_mismatch: u64,
    /// Failed trials, also counted in `n_undecided`.
    pub n_failed: u64,
    /// `n_negative / (n_negative + n_positive)`; NaN without decided trials.
    pub freq_negative: f64,
    /// Share of all trials with the system on the negative side and the
    /// meter on the positive side.
    pub freq_literal_caption: f64,
    pub error_fraction: f64,
}

impl FrequencyRow {
    pub fn from_records<'a>(
        alpha: f64,
        records: impl IntoIterator<Item = &'a TrialRecord>,
    ) -> Self {
        let mut row = FrequencyRow {
            alpha,
            sin2_alpha: alpha.sin().powi(2),
            trials: 0,
            n_negative: 0,
            n_positive: 0,
            n_undecided: 0,
            n_mismatch: 0,
            n_failed: 0,
            freq_negative: f64::NAN,
            freq_literal_caption: f64::NAN,
            error_fraction: f64::NAN,
        };
        let mut literal = 0u64;
        for r in records {
            row.trials += 1;
            let o = &r.outcome;
            if r.failed() {
                row.n_failed += 1;
                row.n_undecided += 1;
                continue;
            }
            match (o.system_side, o.consistent) {
                (Side::Undecided, _) => row.n_undecided += 1,
                (Side::Negative, true) => row.n_negative += 1,
                (Side::Positive, true) => row.n_positive += 1,
                _ => row.n_mismatch += 1,
            }
            if o.system_side == Side::Negative && o.meter_side == Side::Positive {
                literal += 1;
            }
        }
        let decided = row.n_negative + row.n_positive;
        if decided > 0 {
            row.freq_negative = row.n_negative as f64 / decided as f64;
        }
        if row.trials > 0 {
            let t = row.trials as f64;
            row.freq_literal_caption = literal as f64 / t;
            row.error_fraction = (row.n_mismatch + row.n_undecided) as f64 / t;
        }
        row
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub rows: Vec<FrequencyRow>,
}

pub const CSV_COLUMNS: [&str; 10] = [
    "alpha",
    "sin2_alpha",
    "trials",
    "n_negative",
    "n_positive",
    "n_undecided",
    "n_mismatch",
    "freq_negative",
    "freq_literal_caption",
    "error_fraction",
];

/// Float text with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl FrequencyTable {
    /// One row per entry of `alphas`, from records whose `alpha` matches
    /// exactly. Independent of record order.
    pub fn from_records(alphas: &[f64], records: &[TrialRecord]) -> Self {
        let rows = alphas
            .iter()
            .map(|&a| FrequencyRow::from_records(a, records.iter().filter(|r| r.alpha == Some(a))))
            .collect();
        Self { rows }
    }

    pub fn row(&self, alpha: f64) -> Option<&FrequencyRow> {
        self.rows.iter().find(|r| r.alpha == alpha)
    }

    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{}", CSV_COLUMNS.join(","))?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                fmt_f64(r.alpha),
                fmt_f64(r.sin2_alpha),
                r.trials,
                r.n_negative,
                r.n_positive,
                r.n_undecided,
                r.n_mismatch,
                fmt_f64(r.freq_negative),
                fmt_f64(r.freq_literal_caption),
                fmt_f64(r.error_fraction),
            )?;
        }
        Ok(())
    }
}

pub fn write_jsonl(records: &[TrialRecord], mut w: impl Write) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub table: FrequencyTable,
    /// Ordered by alpha, then trial index.
    pub records: Vec<TrialRecord>,
}

/// Runs `trials_per_alpha` trials for every alpha on the current rayon
/// pool. Trial `t` uses the same apparatus draw for every alpha.
pub fn sweep(
    cfg: &Config,
    alphas: &[f64],
    trials_per_alpha: u64,
    master_seed: u64,
) -> Result<SweepResult> {
    if trials_per_alpha == 0 {
        return Err(Error::InvalidParams(
            "trials_per_alpha must be at least 1".into(),
        ));
    }
    cfg.validate()?;
    for &alpha in alphas {
        TriggerParams {
            alpha,
            ..cfg.trigger.params()
        }
        .validate()?;
    }
    let jobs: Vec<(f64, u64)> = alphas
        .iter()
        .flat_map(|&a| (0..trials_per_alpha).map(move |t| (a, t)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(a, t)| run_trial(cfg, Some(a), master_seed, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        table: FrequencyTable::from_records(alphas, &records),
        records,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BornDeviation {
    pub max_abs: f64,
    pub rms: f64,
    pub monotone: bool,
}

/// Deviation of `freq_negative` from `sin²α` over rows with decided trials.
pub fn born_deviation(table: &FrequencyTable) -> Result<BornDeviation> {
    let mut rows: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.freq_negative.is_finite())
        .map(|r| (r.sin2_alpha, r.freq_negative))
        .collect();
    if rows.len() < 3 {
        return Err(Error::TooFewRows {
            needed: 3,
            found: rows.len(),
        });
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let dev: Vec<f64> = rows.iter().map(|(s, f)| f - s).collect();
    Ok(BornDeviation {
        max_abs: dev.iter().fold(0.0, |m, d| m.max(d.abs())),
        rms: (dev.iter().map(|d| d * d).sum::<f64>() / dev.len() as f64).sqrt(),
        monotone: rows.windows(2).all(|w| w[1].1 >= w[0].1),
    })
}

/// Least-squares slope of `freq_negative` against `sin²α` over rows with
/// `sin²α ∈ [lo, hi]`.
pub fn midrange_slope(table: &FrequencyTable, lo: f64, hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.freq_negative.is_finite() && (lo..=hi).contains(&r.sin2_alpha))
        .map(|r| (r.sin2_alpha, r.freq_negative))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
