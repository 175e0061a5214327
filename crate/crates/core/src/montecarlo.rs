//! Random Bell-diagonal states at fixed fidelity and volume estimates of
//! distillable and NPPT states among them.
//!
//! A sample puts weight `F` on the reference Bell state and spreads `1 − F`
//! over the other `D² − 1` labels by uniform spacings: sort `D² − 2`
//! uniforms on `[0, 1]` and take consecutive gaps. Samples where some gap
//! weight exceeds `F` are rejected, so the reference label always carries the
//! largest weight.
//!
//! Randomness is ChaCha8. Sample `k` of a run with seed `s` uses stream `k`
//! of the generator seeded with `s`, so results do not depend on how samples
//! are scheduled across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::protocol::{distillable, DistillCriteria, Policy};
use crate::ring::Modulus;
use crate::states::{BellDiagonalState, DEFAULT_NPPT_TOLERANCE};

pub const DEFAULT_REJECTION_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub modulus: Modulus,
    pub fidelity: f64,
    pub seed: u64,
    /// Consecutive rejections after which sampling gives up.
    pub rejection_limit: u64,
}

impl SamplerConfig {
    pub fn new(modulus: Modulus, fidelity: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fidelity) {
            return Err(invalid(format!("fidelity {fidelity} outside [0, 1]")));
        }
        Ok(SamplerConfig {
            modulus,
            fidelity,
            seed,
            rejection_limit: DEFAULT_REJECTION_LIMIT,
        })
    }

    /// The generator for sample `index`.
    pub fn rng_for(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// Draws one state, returning it with the number of rejected draws.
pub fn sample_state_counted(cfg: &SamplerConfig, rng: &mut dyn RngCore) -> Result<(BellDiagonalState, u64)> {
    let f = cfg.fidelity;
    let d2 = (cfg.modulus.get() * cfg.modulus.get()) as usize;
    // with F < 1/D² some gap always exceeds F
    if f * (d2 as f64) < 1.0 {
        return Err(Error::SamplingInfeasible(0));
    }
    let mut x = vec![0.0; d2];
    let mut rejected = 0;
    loop {
        x[0] = 0.0;
        x[d2 - 1] = 1.0;
        for v in &mut x[1..d2 - 1] {
            *v = rng.random::<f64>();
        }
        x.sort_by(f64::total_cmp);
        let lambdas: Vec<f64> = x.windows(2).map(|w| (1.0 - f) * (w[1] - w[0])).collect();
        if lambdas.iter().all(|&l| l <= f) {
            let mut probs = Vec::with_capacity(d2);
            probs.push(f);
            probs.extend(lambdas);
            let state = BellDiagonalState::new(cfg.modulus, 1, probs)?;
            return Ok((state, rejected));
        }
        rejected += 1;
        if rejected >= cfg.rejection_limit {
            return Err(Error::SamplingInfeasible(rejected));
        }
    }
}

/// One state of fidelity `cfg.fidelity` with uniformly spread remaining weight.
pub fn sample_state(cfg: &SamplerConfig, rng: &mut dyn RngCore) -> Result<BellDiagonalState> {
    sample_state_counted(cfg, rng).map(|(s, _)| s)
}

/// Fraction of samples in a set, with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolumeEstimate {
    pub fraction: f64,
    pub stderr: f64,
    pub samples_accepted: u64,
    pub samples_rejected: u64,
}

impl VolumeEstimate {
    fn from_counts(hits: u64, accepted: u64, rejected: u64) -> Self {
        let fraction = hits as f64 / accepted as f64;
        VolumeEstimate {
            fraction,
            stderr: (fraction * (1.0 - fraction) / accepted as f64).sqrt(),
            samples_accepted: accepted,
            samples_rejected: rejected,
        }
    }
}

fn estimate<F>(exec: Execution, cfg: &SamplerConfig, samples: u64, test: F) -> Result<VolumeEstimate>
where
    F: Fn(&BellDiagonalState) -> Result<bool> + Sync + Send,
{
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let len = usize::try_from(samples).map_err(|_| invalid("too many samples"))?;
    let outcomes = exec.map_range(len, |i| {
        let mut rng = cfg.rng_for(i as u64);
        let (state, rejected) = sample_state_counted(cfg, &mut rng)?;
        Ok((test(&state)?, rejected))
    });
    let (mut hits, mut rejected) = (0, 0);
    for outcome in outcomes {
        let (hit, r): (bool, u64) = outcome?;
        hits += hit as u64;
        rejected += r;
    }
    Ok(VolumeEstimate::from_counts(hits, samples, rejected))
}

/// Fraction of sampled states that `policy` distills.
pub fn volume_distilled(
    exec: Execution,
    cfg: &SamplerConfig,
    policy: Policy,
    criteria: &DistillCriteria,
    samples: u64,
) -> Result<VolumeEstimate> {
    estimate(exec, cfg, samples, |s| distillable(policy, s, criteria))
}

/// Fraction of sampled states with a negative partial transpose.
pub fn volume_nppt(exec: Execution, cfg: &SamplerConfig, samples: u64) -> Result<VolumeEstimate> {
    estimate(exec, cfg, samples, |s| s.is_nppt(DEFAULT_NPPT_TOLERANCE))
}
