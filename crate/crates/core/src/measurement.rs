//! Regime checks and outcome classification for a measurement run.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{
    order_variable, positive_mass, readout_sign, total_energy, v0_prime, MeanfieldLayout,
    ModelParams, SystemState,
};

/// Collective-mode condition `σ²/2m + |σV₀′(σ)| < |λ|/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectiveReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

pub fn check_collective_condition(p: &ModelParams) -> CollectiveReport {
    let slope = if p.potential_on {
        v0_prime(p.sigma)
    } else {
        0.0
    };
    let lhs = p.sigma * p.sigma / (2.0 * p.mass) + (p.sigma * slope).abs();
    let rhs = 0.5 * p.lambda.abs();
    CollectiveReport {
        lhs,
        rhs,
        pass: lhs < rhs,
    }
}

/// Trigger condition `(σ/√N)·V′(σ/√N) < λ`, in both the literal signed form
/// and the magnitude form `|·| < |λ|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriggerReport {
    pub argument: f64,
    pub lhs: f64,
    pub lambda: f64,
    pub raw_pass: bool,
    pub magnitude_pass: bool,
}

pub fn check_trigger_condition(p: &ModelParams) -> TriggerReport {
    let argument = p.sigma / (p.n_apparatus as f64).sqrt();
    let slope = if p.potential_on {
        v0_prime(argument)
    } else {
        0.0
    };
    let lhs = argument * slope;
    TriggerReport {
        argument,
        lhs,
        lambda: p.lambda,
        raw_pass: lhs < p.lambda,
        magnitude_pass: lhs.abs() < p.lambda.abs(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimescaleParams {
    /// Typical energy per particle.
    pub delta_e: f64,
    /// Typical size of the potential.
    pub a: f64,
}

impl TimescaleParams {
    /// `ΔE = E(0)/M` from the prepared state.
    pub fn from_state(state: &SystemState, p: &ModelParams, a: f64) -> Self {
        let layout = MeanfieldLayout::for_state(state, p);
        let count = if layout.divisor > 0.0 {
            layout.divisor
        } else {
            1.0
        };
        Self {
            delta_e: total_energy(state, p) / count,
            a,
        }
    }
}

/// Default typical size: distance from the barrier top to a minimum.
pub const DEFAULT_SIZE: f64 = FRAC_PI_2;

/// How much longer than the measurement the collective time must be.
pub const WINDOW_FACTOR: f64 = 100.0;

/// Inverse tunneling factors of a single particle and of the collective
/// mode, and whether a measurement time fits between them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimescaleReport {
    /// Energy per particle used, after taking the magnitude.
    pub delta_e: f64,
    pub log_t_single: f64,
    pub log_t_collective: f64,
    pub t_single: f64,
    pub t_collective: f64,
    pub t_measure: f64,
    /// Negative `ΔE` was replaced by its magnitude.
    pub negative_energy: bool,
    /// `t_collective > t_single`.
    pub window_nonempty: bool,
    /// `t_collective ≥ 100·t_measure` and `t_measure > t_single`.
    pub pass: bool,
}

impl TimescaleReport {
    /// `ln(t_collective / t_single)`.
    pub fn log_ratio(&self) -> f64 {
        self.log_t_collective - self.log_t_single
    }
}

pub fn timescale_window(ts: &TimescaleParams, p: &ModelParams, t_measure: f64) -> TimescaleReport {
    let negative_energy = ts.delta_e < 0.0;
    let de = ts.delta_e.abs();
    let single = (p.mass * de / 2.0).sqrt() * ts.a / p.hbar;
    let n = p.n_apparatus as f64;
    let collective = (n * p.mass * de / 2.0).sqrt() * ts.a / p.hbar;
    let (t_single, t_collective) = (single.exp(), collective.exp());
    let window_nonempty = collective > single;
    TimescaleReport {
        delta_e: de,
        log_t_single: single,
        log_t_collective: collective,
        t_single,
        t_collective,
        t_measure,
        negative_energy,
        window_nonempty,
        pass: window_nonempty && t_collective >= WINDOW_FACTOR * t_measure && t_measure > t_single,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Positive,
    Negative,
    Undecided,
}

impl Side {
    /// Thresholds a mass fraction on `θ > 0` with a dead band of width
    /// `margin` around ½.
    pub fn from_fraction(positive: f64, margin: f64) -> Self {
        if positive > 0.5 + 0.5 * margin {
            Side::Positive
        } else if positive < 0.5 - 0.5 * margin {
            Side::Negative
        } else {
            Side::Undecided
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Side::Positive => Side::Negative,
            Side::Negative => Side::Positive,
            Side::Undecided => Side::Undecided,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub system_side: Side,
    pub meter_side: Side,
    pub consistent: bool,
    /// `∫₀^π|ψ₀|²`; absent for apparatus-only runs.
    pub system_mass_positive: Option<f64>,
    pub meter_reading: f64,
}

impl Outcome {
    /// Outcome of a trial that never reached the decision time.
    pub fn failed() -> Self {
        Self {
            system_side: Side::Undecided,
            meter_side: Side::Undecided,
            consistent: false,
            system_mass_positive: None,
            meter_reading: 0.0,
        }
    }
}

/// Reads the meter and the system side at the decision time.
pub fn classify(state: &SystemState, p: &ModelParams, margin: f64) -> Result<Outcome> {
    let grid = state.grid();
    let phi2 = order_variable(state, p, true)?;
    let meter_reading = readout_sign(&phi2, grid);
    let meter_side = Side::from_fraction(0.5 * (meter_reading + 1.0), margin);
    let system_mass_positive = state
        .system
        .as_ref()
        .map(|f| positive_mass(&f.density(), grid));
    let system_side =
        system_mass_positive.map_or(Side::Undecided, |m| Side::from_fraction(m, margin));
    Ok(Outcome {
        system_side,
        meter_side,
        consistent: system_side == meter_side && system_side != Side::Undecided,
        system_mass_positive,
        meter_reading,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, WaveField};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn gaussian(grid: &Arc<Grid>, center: f64) -> WaveField {
        WaveField::from_fn(Arc::clone(grid), |x| {
            Complex64::new((-(x - center).powi(2) / 0.05).exp(), 0.0)
        })
        .unwrap()
    }

    #[test]
    fn collective_condition() {
        let r = check_collective_condition(&ModelParams {
            lambda: -0.5,
            ..Default::default()
        });
        // 0.1²/2 + 0.1·sin(0.2)
        assert_abs_diff_eq!(r.lhs, 0.005 + 0.1 * 0.2f64.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.lhs, 0.02487, epsilon = 1e-5);
        assert_eq!(r.rhs, 0.25);
        assert!(r.pass);

        let r = check_collective_condition(&ModelParams {
            lambda: 0.0,
            ..Default::default()
        });
        assert_eq!(r.rhs, 0.0);
        assert!(!r.pass);

        let r = check_collective_condition(&ModelParams {
            sigma: 0.0,
            lambda: -1e-6,
            ..Default::default()
        });
        assert_eq!(r.lhs, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn trigger_condition() {
        let r = check_trigger_condition(&ModelParams {
            lambda: -0.5,
            ..Default::default()
        });
        assert_abs_diff_eq!(r.argument, 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(r.lhs, -0.01 * 0.02f64.sin(), epsilon = 1e-18);
        assert_abs_diff_eq!(r.lhs, -2.0e-4, epsilon = 1e-7);
        assert!(!r.raw_pass);
        assert!(r.magnitude_pass);

        let big = check_trigger_condition(&ModelParams {
            n_apparatus: 1_000_000_000,
            ..Default::default()
        });
        assert!(big.lhs.abs() < 1e-10);
        let flat = check_trigger_condition(&ModelParams {
            sigma: 0.0,
            ..Default::default()
        });
        assert_eq!(flat.lhs, 0.0);
    }

    #[test]
    fn timescales() {
        let p = ModelParams::default();
        let ts = TimescaleParams {
            delta_e: 0.02,
            a: FRAC_PI_2,
        };
        let r = timescale_window(&ts, &p, 24.0);
        assert_abs_diff_eq!(r.log_t_single, 7.853981633974483, epsilon = 1e-12);
        assert_abs_diff_eq!(r.log_t_collective, 78.53981633974483, epsilon = 1e-10);
        // ~31 decades between the two.
        assert_abs_diff_eq!(r.log_ratio() / std::f64::consts::LN_10, 30.7, epsilon = 0.1);
        assert!(r.window_nonempty);
        assert!(!r.pass, "t_single = e^7.85 exceeds t = 24");
        assert!(timescale_window(&ts, &p, 1e4).pass);

        // Factored form: ratio = exp((√N − 1)·√(mΔE/2)·a/ħ), exactly.
        for n in [1usize, 4, 100, 1000] {
            let p = ModelParams {
                n_apparatus: n,
                ..Default::default()
            };
            let r = timescale_window(&ts, &p, 1.0);
            let factored =
                ((n as f64).sqrt() - 1.0) * (p.mass * ts.delta_e / 2.0).sqrt() * ts.a / p.hbar;
            assert_abs_diff_eq!(r.log_ratio(), factored, epsilon = 1e-12 * factored.max(1.0));
        }

        let one = ModelParams {
            n_apparatus: 1,
            ..Default::default()
        };
        let r = timescale_window(&ts, &one, 1.0);
        assert_eq!(r.t_single, r.t_collective);
        assert!(!r.window_nonempty);
        assert!(!r.pass);

        let neg = timescale_window(
            &TimescaleParams {
                delta_e: -0.02,
                a: 1.0,
            },
            &p,
            1.0,
        );
        assert!(neg.negative_energy);
    }

    #[test]
    fn classify_examples() {
        let g = Grid::shared(128).unwrap();
        let p = ModelParams::default();
        let right = SystemState::new(
            Arc::clone(&g),
            vec![gaussian(&g, 1.5), gaussian(&g, 1.6)],
            Some(gaussian(&g, 1.4)),
        )
        .unwrap();
        let o = classify(&right, &p, 0.2).unwrap();
        assert_eq!(
            (o.system_side, o.meter_side, o.consistent),
            (Side::Positive, Side::Positive, true)
        );

        let sym = SystemState::new(
            Arc::clone(&g),
            vec![gaussian(&g, 1.0), gaussian(&g, -1.0)],
            Some(gaussian(&g, 0.0)),
        )
        .unwrap();
        let o = classify(&sym, &p, 0.2).unwrap();
        assert_eq!(o.system_side, Side::Undecided);
        assert_eq!(o.meter_side, Side::Undecided);
        assert!(!o.consistent);
        assert_abs_diff_eq!(o.system_mass_positive.unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(o.meter_reading, 0.0, epsilon = 1e-12);

        let apparatus_only =
            SystemState::new(Arc::clone(&g), vec![gaussian(&g, -1.5)], None).unwrap();
        let o = classify(&apparatus_only, &p, 0.2).unwrap();
        assert_eq!(o.meter_side, Side::Negative);
        assert_eq!(o.system_mass_positive, None);
        assert!(!o.consistent);
    }

    proptest! {
        #[test]
        fn classify_mirror_and_monotone(
            c0 in -3.0..3.0f64, c1 in -3.0..3.0f64, c2 in -3.0..3.0f64,
            margin in 0.0..0.9f64, extra in 0.0..0.1f64,
        ) {
            let g = Grid::shared(64).unwrap();
            let p = ModelParams::default();
            let s = SystemState::new(
                Arc::clone(&g),
                vec![gaussian(&g, c1), gaussian(&g, c2)],
                Some(gaussian(&g, c0)),
            ).unwrap();
            let o = classify(&s, &p, margin).unwrap();
            let m = classify(&s.mirrored(), &p, margin).unwrap();
            prop_assert_eq!(m.system_side, o.system_side.flipped());
            prop_assert_eq!(m.meter_side, o.meter_side.flipped());
            prop_assert!((m.meter_reading + o.meter_reading).abs() < 1e-12);

            let pp = o.system_mass_positive.unwrap();
            let pm = 1.0 - positive_mass(&s.mirrored().system.unwrap().density(), &g);
            prop_assert!((pp - pm).abs() < 1e-9);

            let wider = classify(&s, &p, (margin + extra).min(0.99)).unwrap();
            if o.system_side == Side::Undecided {
                prop_assert_eq!(wider.system_side, Side::Undecided);
            }
            if o.meter_side == Side::Undecided {
                prop_assert_eq!(wider.meter_side, Side::Undecided);
            }
        }
    }
}
