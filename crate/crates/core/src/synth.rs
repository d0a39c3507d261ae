//! Seeded synthetic ratings. User factors cluster around a few archetypes;
//! biases and Gaussian noise are added, and cells are observed at a target
//! density with uneven user activity and item popularity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::Serialize;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::ratings::{Rating, RatingsMatrix, MAX_RATING, MIN_RATING};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticConfig {
    pub users: usize,
    pub items: usize,
    /// Latent dimension.
    pub factors: usize,
    /// Number of user archetypes the latent user vectors cluster around.
    pub archetypes: usize,
    /// Expected fraction of observed cells.
    pub density: f64,
    /// Standard deviation of the rating noise, in rating units.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            users: 500,
            items: 80,
            factors: 5,
            archetypes: 4,
            density: 0.15,
            noise: 0.5,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub ratings: RatingsMatrix,
    /// Noise-free scores before rounding and clamping.
    pub scores: DenseMatrix,
    pub archetype: Vec<usize>,
}

const GLOBAL_MEAN: f64 = 3.5;
const ITEM_BIAS_SD: f64 = 0.6;
const USER_BIAS_SD: f64 = 0.35;
const ARCHETYPE_SD: f64 = 0.5;
const USER_SPREAD_SD: f64 = 0.5;
const ACTIVITY_SD: f64 = 0.6;

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    if cfg.users == 0 || cfg.items == 0 || cfg.factors == 0 || cfg.archetypes == 0 {
        return Err(Error::Config(
            "users, items, factors and archetypes must be positive".into(),
        ));
    }
    if !(cfg.density > 0.0 && cfg.density <= 1.0) {
        return Err(Error::Config(format!(
            "density {} not in (0, 1]",
            cfg.density
        )));
    }
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return Err(Error::Config(format!("noise {} must be >= 0", cfg.noise)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let gauss = |rng: &mut ChaCha8Rng, sd: f64| sd * std_normal.sample(rng);

    let f = cfg.factors;
    let factor_scale = 1.0 / (f as f64).sqrt();
    let centers: Vec<Vec<f64>> = (0..cfg.archetypes)
        .map(|_| (0..f).map(|_| gauss(&mut rng, ARCHETYPE_SD)).collect())
        .collect();
    let archetype: Vec<usize> = (0..cfg.users)
        .map(|_| rng.random_range(0..cfg.archetypes))
        .collect();
    let user_vec: Vec<Vec<f64>> = archetype
        .iter()
        .map(|&a| {
            centers[a]
                .iter()
                .map(|&c| c + gauss(&mut rng, USER_SPREAD_SD))
                .collect()
        })
        .collect();
    let user_bias: Vec<f64> = (0..cfg.users)
        .map(|_| gauss(&mut rng, USER_BIAS_SD))
        .collect();
    let item_vec: Vec<Vec<f64>> = (0..cfg.items)
        .map(|_| (0..f).map(|_| gauss(&mut rng, factor_scale)).collect())
        .collect();
    let item_bias: Vec<f64> = (0..cfg.items)
        .map(|_| gauss(&mut rng, ITEM_BIAS_SD))
        .collect();

    let scores = DenseMatrix::from_fn(cfg.users, cfg.items, |u, i| {
        let dot: f64 = user_vec[u]
            .iter()
            .zip(&item_vec[i])
            .map(|(a, b)| a * b)
            .sum();
        GLOBAL_MEAN + user_bias[u] + item_bias[i] + dot
    });

    let activity = LogNormal::new(0.0, ACTIVITY_SD).expect("valid lognormal");
    let user_w: Vec<f64> = (0..cfg.users).map(|_| activity.sample(&mut rng)).collect();
    let item_w: Vec<f64> = (0..cfg.items).map(|_| activity.sample(&mut rng)).collect();
    let mean_w = user_w.iter().sum::<f64>() / cfg.users as f64
        * (item_w.iter().sum::<f64>() / cfg.items as f64);

    let mut entries = Vec::new();
    for (u, &uw) in user_w.iter().enumerate() {
        for (i, &iw) in item_w.iter().enumerate() {
            let p = (cfg.density * uw * iw / mean_w).min(1.0);
            let observed = rng.random::<f64>() < p;
            let noisy = scores.get(u, i) + gauss(&mut rng, cfg.noise);
            if observed {
                let r = noisy
                    .round()
                    .clamp(f64::from(MIN_RATING), f64::from(MAX_RATING));
                entries.push(Rating::new(u, i, r as u8));
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::Empty);
    }
    Ok(SyntheticData {
        ratings: RatingsMatrix::new(cfg.users, cfg.items, entries)?,
        scores,
        archetype,
    })
}
