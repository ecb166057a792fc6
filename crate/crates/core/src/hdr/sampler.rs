use rand::Rng;
use rayon::prelude::*;

use super::region::HdrRegion;
use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::rng;
use crate::special::ln_ball_volume;

/// Volume of the `d`-ball of unit diameter, `√(π^d) / (2^d Γ(d/2 + 1))`.
pub fn ball_volume(d: usize) -> f64 {
    ln_ball_volume(d).exp()
}

/// First batch size: the expected number of unit-cube draws needed to get
/// `n` points inside the inscribed ball.
pub fn initial_batch_size(n: usize, d: usize) -> usize {
    (n as f64 * (-ln_ball_volume(d)).exp()).ceil() as usize
}

#[derive(Clone, Copy, Debug)]
pub struct SamplerOptions {
    /// Smallest tolerated acceptance probability per draw.
    pub acceptance_floor: f64,
    /// Hard cap on the number of unit-cube draws.
    pub max_draws: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self { acceptance_floor: 1e-6, max_draws: 1 << 32 }
    }
}

/// Draws `n` points uniformly in the region by acceptance–rejection from
/// its bounding box.
pub fn sample_hdr(region: &HdrRegion, n: usize, seed: u64) -> Result<PointSet> {
    sample_hdr_with(region, n, seed, &SamplerOptions::default())
}

pub fn sample_hdr_with(region: &HdrRegion, n: usize, seed: u64, opts: &SamplerOptions) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let d = region.dim();
    let rv = region.rv();
    let ln_level = region.level().map(f64::ln);

    let mut accepted = PointSet::with_capacity(d, n);
    let mut drawn = 0usize;
    let mut next_chunk = 0u64;
    let mut target = match ln_level {
        Some(_) => initial_batch_size(n, d),
        None => n,
    };
    loop {
        let missing = target - drawn;
        let chunks = missing.div_ceil(rng::CHUNK);
        let parts: Vec<Vec<f64>> = (0..chunks as u64)
            .into_par_iter()
            .map(|c| {
                let len = rng::CHUNK.min(missing - c as usize * rng::CHUNK);
                let mut r = rng::stream(seed, next_chunk + c);
                let mut u = vec![0.0; d];
                let mut x = vec![0.0; d];
                let mut keep = Vec::new();
                for _ in 0..len {
                    for ui in u.iter_mut() {
                        *ui = r.random::<f64>();
                    }
                    region.apply_t_into(&u, &mut x);
                    let ok = match ln_level {
                        Some(l) => rv.ln_pdf_unchecked(&x) > l,
                        None => true,
                    };
                    if ok {
                        keep.extend_from_slice(&x);
                    }
                }
                keep
            })
            .collect();
        next_chunk += chunks as u64;
        drawn = target;
        for p in parts {
            accepted.extend(&PointSet::from_flat(d, p)?)?;
            if accepted.len() >= n {
                break;
            }
        }
        if accepted.len() >= n {
            accepted.truncate(n);
            return Ok(accepted);
        }
        let rate = accepted.len() as f64 / drawn as f64;
        let informative = drawn as f64 * opts.acceptance_floor >= 10.0;
        if (informative && rate < opts.acceptance_floor) || drawn >= opts.max_draws {
            return Err(Error::DimensionalityLimit { rate, floor: opts.acceptance_floor, dim: d });
        }
        target = (2 * target).min(opts.max_draws);
    }
}
