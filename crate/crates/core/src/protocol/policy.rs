use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::builtin::{builtin_protocol, n4m2_step, Builtin};
use super::chi::twirl_recursion;
use super::greedy::greedy_step;
use super::qpa::qpa_step;
use super::MIN_PROBABILITY;
use crate::error::{invalid, Error, Result};
use crate::states::BellDiagonalState;

/// A rule for iterating distillation rounds on a single-pair state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    /// Twirl to the isotropic state of equal fidelity, then run a builtin round.
    Twirl(Builtin),
    /// Twirl, run the four-to-two round, and keep the first pair.
    N4M2,
    /// Generalized privacy amplification, no twirl.
    Qpa,
    /// Best element of `P_S(D, 1)` before each two-to-one round.
    Greedy,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Twirl(b) => b.name(),
            Policy::N4M2 => "n4m2",
            Policy::Qpa => "qpa",
            Policy::Greedy => "greedy",
        }
    }

    /// Pairs kept and pairs consumed per round.
    pub fn ratio(self) -> (usize, usize) {
        match self {
            Policy::Twirl(b) => (1, b.n()),
            Policy::N4M2 => (2, 4),
            Policy::Qpa | Policy::Greedy => (1, 2),
        }
    }

    /// One round: the next single-pair state and the success probability.
    pub fn step(self, s: &BellDiagonalState) -> Result<(BellDiagonalState, f64)> {
        if s.pairs() != 1 {
            return Err(invalid(format!("policies act on single-pair states, got {} pairs", s.pairs())));
        }
        let modulus = s.modulus();
        match self {
            Policy::Twirl(b) => {
                let chi = builtin_protocol(b, modulus).and_then(|_| b.target_chi(modulus))?;
                let f = s.fidelity();
                if f <= 0.0 {
                    return Err(Error::MeasurementImpossible(0.0));
                }
                let (next, p) = twirl_recursion(f, &chi)?;
                if p < MIN_PROBABILITY {
                    return Err(Error::MeasurementImpossible(p));
                }
                Ok((BellDiagonalState::isotropic(modulus, next.clamp(0.0, 1.0))?, p))
            }
            Policy::N4M2 => {
                let twirled = BellDiagonalState::isotropic(modulus, s.fidelity())?;
                let (out, p) = n4m2_step(&twirled.tensor_power(4)?)?;
                Ok((out.marginal(&[0])?, p))
            }
            Policy::Qpa => qpa_step(s),
            Policy::Greedy => greedy_step(s).map(|(out, p, _)| (out, p)),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n4m2" => Ok(Policy::N4M2),
            "qpa" => Ok(Policy::Qpa),
            "greedy" => Ok(Policy::Greedy),
            other => other
                .parse::<Builtin>()
                .map(Policy::Twirl)
                .map_err(|_| invalid(format!("unknown policy '{other}'"))),
        }
    }
}

impl Serialize for Policy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Policy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One row of a [`YieldTrace`]. Step 0 is the input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YieldRecord {
    pub step: usize,
    pub fidelity: f64,
    pub probability: f64,
    #[serde(rename = "yield")]
    pub yield_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YieldTrace {
    pub records: Vec<YieldRecord>,
    pub success: bool,
    /// Why iteration stopped early, if a round failed.
    pub failure: Option<String>,
}

impl YieldTrace {
    pub fn final_yield(&self) -> f64 {
        self.records.last().map_or(1.0, |r| r.yield_value)
    }

    pub fn final_fidelity(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.fidelity)
    }

    pub fn steps(&self) -> usize {
        self.records.len() - 1
    }
}

/// Whether a round failure ends iteration as an outcome rather than an error.
fn is_outcome(e: &Error) -> bool {
    matches!(
        e,
        Error::MeasurementImpossible(_) | Error::ProtocolMeaningless(_) | Error::Numerical(_)
    )
}

/// Iterates `policy` until the fidelity reaches `target` or `max_steps` rounds ran.
///
/// `Υ_k = P_k (m/n) Υ_{k−1}` with `Υ_0 = 1`.
pub fn yield_trace(policy: Policy, p0: &BellDiagonalState, target: f64, max_steps: usize) -> Result<YieldTrace> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(invalid(format!("target fidelity {target} outside (0, 1]")));
    }
    let (keep, used) = policy.ratio();
    let ratio = keep as f64 / used as f64;
    let mut state = p0.clone();
    let mut records = vec![YieldRecord {
        step: 0,
        fidelity: state.fidelity(),
        probability: 1.0,
        yield_value: 1.0,
    }];
    let mut failure = None;
    while state.fidelity() < target && records.len() <= max_steps {
        match policy.step(&state) {
            Ok((next, p)) => {
                let prev = records.last().expect("nonempty").yield_value;
                state = next;
                records.push(YieldRecord {
                    step: records.len(),
                    fidelity: state.fidelity(),
                    probability: p,
                    yield_value: prev * p * ratio,
                });
            }
            Err(e) if is_outcome(&e) => {
                failure = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(YieldTrace {
        success: state.fidelity() >= target,
        records,
        failure,
    })
}

/// When iteration counts as successful distillation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistillCriteria {
    pub target: f64,
    pub max_steps: usize,
    pub min_progress: f64,
    pub stall_window: usize,
}

impl Default for DistillCriteria {
    fn default() -> Self {
        DistillCriteria {
            target: 0.99,
            max_steps: 200,
            min_progress: 1e-12,
            stall_window: 20,
        }
    }
}

/// Whether iterating `policy` from `p0` reaches `criteria.target`.
///
/// Fails once the fidelity gains less than `min_progress` per round for
/// `stall_window` rounds in a row, after `max_steps` rounds, or when a round
/// cannot succeed.
pub fn distillable(policy: Policy, p0: &BellDiagonalState, criteria: &DistillCriteria) -> Result<bool> {
    let mut state = p0.clone();
    let mut fidelity = state.fidelity();
    let mut stalled = 0;
    for _ in 0..criteria.max_steps {
        if fidelity >= criteria.target {
            return Ok(true);
        }
        state = match policy.step(&state) {
            Ok((next, _)) => next,
            Err(e) if is_outcome(&e) => return Ok(false),
            Err(e) => return Err(e),
        };
        let next = state.fidelity();
        if next - fidelity < criteria.min_progress {
            stalled += 1;
            if stalled >= criteria.stall_window {
                return Ok(false);
            }
        } else {
            stalled = 0;
        }
        fidelity = next;
    }
    Ok(fidelity >= criteria.target)
}
