//! Seeded initial conditions for the apparatus packets and the trigger.

use std::f64::consts::FRAC_PI_2;
use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, WaveField};
use crate::model::ModelParams;

/// Packet centers beyond this are redrawn.
pub const MAX_CENTER: f64 = FRAC_PI_4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriggerParams {
    /// Superposition angle; `sin²α` is the weight of the left packet.
    pub alpha: f64,
    pub delta_theta: f64,
    pub p0: f64,
}

impl Default for TriggerParams {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            delta_theta: 0.1f64.sqrt(),
            p0: 0.0,
        }
    }
}

impl TriggerParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=FRAC_PI_2).contains(&self.alpha) {
            return Err(Error::InvalidParams(format!(
                "alpha = {} outside [0, π/2]",
                self.alpha
            )));
        }
        if !(self.delta_theta > 0.0 && self.delta_theta.is_finite()) {
            return Err(Error::InvalidParams("delta_theta must be positive".into()));
        }
        if !self.p0.is_finite() {
            return Err(Error::InvalidParams("p0 must be finite".into()));
        }
        Ok(())
    }
}

/// The random numbers behind one apparatus preparation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomDraw {
    pub seed: u64,
    /// Packet centers.
    pub xi: Vec<f64>,
    /// Packet momenta.
    pub xi_prime: Vec<f64>,
    /// Center draws discarded for exceeding [`MAX_CENTER`].
    pub rejected: u32,
}

impl RandomDraw {
    /// Draws `n` centers and momenta with dispersion `sigma`.
    pub fn generate(seed: u64, n: usize, sigma: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xi = Vec::with_capacity(n);
        let mut xi_prime = Vec::with_capacity(n);
        let mut rejected = 0;
        for _ in 0..n {
            let center = loop {
                let z: f64 = rng.sample(StandardNormal);
                let c = sigma * z;
                if c.abs() <= MAX_CENTER {
                    break c;
                }
                rejected += 1;
            };
            let z: f64 = rng.sample(StandardNormal);
            xi.push(center);
            xi_prime.push(sigma * z);
        }
        if rejected > 0 {
            log::info!("seed {seed}: redrew {rejected} packet centers beyond ±π/4");
        }
        Self {
            seed,
            xi,
            xi_prime,
            rejected,
        }
    }

    /// Centers and momenta with flipped signs; prepares the mirror image of
    /// the original apparatus.
    pub fn negated(&self) -> Self {
        Self {
            seed: self.seed,
            xi: self.xi.iter().map(|x| -x).collect(),
            xi_prime: self.xi_prime.iter().map(|x| -x).collect(),
            rejected: self.rejected,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial_index` under `master_seed`. Independent of how
/// trials are scheduled.
pub fn trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(trial_index))
}

/// Gaussian packet `exp(−(θ−c)²/(2w²))·e^{ikθ}`, not normalized.
fn packet(theta: f64, center: f64, width: f64, momentum: f64) -> Complex64 {
    let envelope = (-(theta - center).powi(2) / (2.0 * width * width)).exp();
    Complex64::from_polar(envelope, momentum * theta)
}

/// Apparatus fields for a given draw.
pub fn apparatus_from_draw(
    grid: &Arc<Grid>,
    p: &ModelParams,
    draw: &RandomDraw,
) -> Result<Vec<WaveField>> {
    let s = p.s2.sqrt();
    draw.xi
        .iter()
        .zip(&draw.xi_prime)
        .map(|(&c, &k)| WaveField::from_fn(Arc::clone(grid), |x| packet(x, c, s, k)))
        .collect()
}

/// Draws and builds the `N` apparatus packets for `seed`.
pub fn sample_apparatus_initial(
    grid: &Arc<Grid>,
    p: &ModelParams,
    seed: u64,
) -> Result<(Vec<WaveField>, RandomDraw)> {
    p.validate()?;
    let draw = RandomDraw::generate(seed, p.n_apparatus, p.sigma);
    let fields = apparatus_from_draw(grid, p, &draw)?;
    Ok((fields, draw))
}

/// Trigger superposition: a left packet at `θ = −½` weighted by `sin α`
/// and a right packet at `θ = +½` weighted by `cos α`.
pub fn system_initial(grid: &Arc<Grid>, t: &TriggerParams) -> Result<WaveField> {
    t.validate()?;
    let (sa, ca) = t.alpha.sin_cos();
    WaveField::from_fn(Arc::clone(grid), |x| {
        sa * packet(x, -0.5, t.delta_theta, t.p0) + ca * packet(x, 0.5, t.delta_theta, -t.p0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::positive_mass;
    use approx::assert_abs_diff_eq;

    fn peak(grid: &Grid, f: &WaveField) -> f64 {
        let d = f.density();
        let j = (0..d.len()).max_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
        grid.points()[j]
    }

    #[test]
    fn zero_dispersion_gives_identical_packets() {
        let g = Grid::shared(128).unwrap();
        let p = ModelParams {
            sigma: 0.0,
            n_apparatus: 5,
            ..Default::default()
        };
        let (fields, draw) = sample_apparatus_initial(&g, &p, 7).unwrap();
        assert!(draw.xi.iter().chain(&draw.xi_prime).all(|&x| x == 0.0));
        for f in &fields {
            assert_eq!(f.amplitudes(), fields[0].amplitudes());
            assert_abs_diff_eq!(peak(&g, f), 0.0, epsilon = 1e-12);
            assert!(f.amplitudes().iter().all(|z| z.im == 0.0));
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let g = Grid::shared(64).unwrap();
        let p = ModelParams::default();
        let (a, da) = sample_apparatus_initial(&g, &p, 42).unwrap();
        let (b, db) = sample_apparatus_initial(&g, &p, 42).unwrap();
        assert_eq!(da, db);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.amplitudes(), y.amplitudes());
        }
        let (_, dc) = sample_apparatus_initial(&g, &p, 43).unwrap();
        assert_ne!(da.xi, dc.xi);
    }

    #[test]
    fn fields_have_unit_norm() {
        let g = Grid::shared(256).unwrap();
        let p = ModelParams::default();
        let (fields, _) = sample_apparatus_initial(&g, &p, 1).unwrap();
        assert_eq!(fields.len(), 100);
        for f in &fields {
            assert_abs_diff_eq!(f.norm(), 1.0, epsilon = 1e-12);
        }
        for alpha in [0.0, 0.3, FRAC_PI_4, FRAC_PI_2] {
            let t = TriggerParams {
                alpha,
                ..Default::default()
            };
            assert_abs_diff_eq!(system_initial(&g, &t).unwrap().norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sampler_statistics() {
        // Sample mean within ±0.04 and std within [0.07, 0.13] for ≥ 99% of seeds.
        let trials = 1000;
        let mut ok = 0;
        for seed in 0..trials {
            let d = RandomDraw::generate(trial_seed(2024, seed), 100, 0.1);
            let mean = d.xi.iter().sum::<f64>() / 100.0;
            let var = d.xi.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 99.0;
            if mean.abs() <= 0.04 && (0.07..=0.13).contains(&var.sqrt()) {
                ok += 1;
            }
        }
        assert!(ok as f64 >= 0.99 * trials as f64, "{ok}/{trials}");
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let seeds: std::collections::HashSet<_> = (0..10_000).map(|i| trial_seed(5, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
    }

    #[test]
    fn single_trigger_positions() {
        let g = Grid::shared(512).unwrap();
        let right = system_initial(&g, &TriggerParams::default()).unwrap();
        assert_abs_diff_eq!(peak(&g, &right), 0.5, epsilon = g.spacing());
        let left = system_initial(
            &g,
            &TriggerParams {
                alpha: FRAC_PI_2,
                ..Default::default()
            },
        )
        .unwrap();
        assert_abs_diff_eq!(peak(&g, &left), -0.5, epsilon = g.spacing());
    }

    #[test]
    fn even_trigger_is_symmetric() {
        let g = Grid::shared(256).unwrap();
        let f = system_initial(
            &g,
            &TriggerParams {
                alpha: FRAC_PI_4,
                ..Default::default()
            },
        )
        .unwrap();
        let d = f.density();
        for j in 0..256 {
            assert_abs_diff_eq!(d[j], d[g.mirror_index(j)], epsilon = 1e-12);
        }
    }

    #[test]
    fn complementary_angles_mirror() {
        let g = Grid::shared(256).unwrap();
        for alpha in [0.1, 0.5, 1.2] {
            let a = system_initial(
                &g,
                &TriggerParams {
                    alpha,
                    ..Default::default()
                },
            )
            .unwrap();
            let b = system_initial(
                &g,
                &TriggerParams {
                    alpha: FRAC_PI_2 - alpha,
                    ..Default::default()
                },
            )
            .unwrap();
            let (da, db) = (a.density(), b.density());
            for j in 0..256 {
                assert_abs_diff_eq!(da[j], db[g.mirror_index(j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn negative_mass_tends_to_sin2_alpha() {
        let g = Grid::shared(1024).unwrap();
        let alpha: f64 = 0.4;
        let target = alpha.sin().powi(2);
        let mass_neg = |width: f64| {
            let t = TriggerParams {
                alpha,
                delta_theta: width,
                p0: 0.0,
            };
            1.0 - positive_mass(&system_initial(&g, &t).unwrap().density(), &g)
        };
        assert_abs_diff_eq!(mass_neg(0.05), target, epsilon = 1e-9);

        // At the default width the two packets overlap. With real, positive
        // packets A (left) and B (right) of unit norm:
        //   P₋ = (s²·a + c²·b + 2sc·x) / (1 + 2sc·o)
        // a = ∫_{θ<0}A², b = ∫_{θ<0}B², x = ∫_{θ<0}AB, o = ∫AB.
        let w = 0.1f64.sqrt();
        let gauss = |c: f64| g.sample(|t| (-(t - c).powi(2) / (2.0 * w * w)).exp());
        let (a_raw, b_raw) = (gauss(-0.5), gauss(0.5));
        let na = g
            .integrate(&a_raw.iter().map(|v| v * v).collect::<Vec<_>>())
            .unwrap()
            .sqrt();
        let neg = |f: &dyn Fn(usize) -> f64| {
            g.points()
                .iter()
                .enumerate()
                .map(|(j, &t)| {
                    if t < 0.0 {
                        f(j)
                    } else if t == 0.0 {
                        0.5 * f(j)
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
                * g.spacing()
        };
        let a = neg(&|j| (a_raw[j] / na).powi(2));
        let b = neg(&|j| (b_raw[j] / na).powi(2));
        let x = neg(&|j| a_raw[j] * b_raw[j] / (na * na));
        let o = g
            .integrate(
                &(0..1024)
                    .map(|j| a_raw[j] * b_raw[j] / (na * na))
                    .collect::<Vec<_>>(),
            )
            .unwrap();
        let (s, c) = alpha.sin_cos();
        let expected = (s * s * a + c * c * b + 2.0 * s * c * x) / (1.0 + 2.0 * s * c * o);
        assert_abs_diff_eq!(mass_neg(w), expected, epsilon = 1e-12);
        assert!(
            (mass_neg(w) - target).abs() > 1e-3,
            "overlap correction is not negligible"
        );
    }

    #[test]
    fn trigger_validation() {
        assert!(TriggerParams {
            alpha: -0.1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TriggerParams {
            alpha: 2.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TriggerParams {
            delta_theta: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TriggerParams {
            alpha: FRAC_PI_2,
            ..Default::default()
        }
        .validate()
        .is_ok());
    }
}
