use serde::{Deserialize, Serialize};

use super::{solve_cqm_exhaustive, solve_sa, Cqm, SaParams, SampleResult};
use crate::derive_seed;
use crate::error::Result;

/// Times the penalty is doubled after an infeasible anneal.
pub const PENALTY_RETRIES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CqmStrategy {
    Exhaustive,
    /// Fold constraints into penalties and anneal. `penalty: None` uses
    /// [`default_penalty`].
    PenaltySa { penalty: Option<f64>, params: SaParams },
}

/// What a [`solve_cqm`] call actually did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CqmSolveInfo {
    pub exhaustive: bool,
    /// Final penalty weight (penalty-SA only).
    pub penalty: Option<f64>,
    pub attempts: usize,
}

/// `2 · (1 + max |objective coefficient|)`.
pub fn default_penalty(m: &Cqm) -> f64 {
    2.0 * (1.0 + m.objective.max_abs_coefficient())
}

/// Minimizes the objective over feasible assignments. With penalty-SA the
/// penalty doubles up to [`PENALTY_RETRIES`] times while the anneal comes
/// back infeasible; a result with `feasible == false` means every attempt
/// failed and the caller should treat it as "select nothing".
pub fn solve_cqm(m: &Cqm, strategy: &CqmStrategy) -> Result<(SampleResult, CqmSolveInfo)> {
    match strategy {
        CqmStrategy::Exhaustive => Ok((
            solve_cqm_exhaustive(m)?,
            CqmSolveInfo {
                exhaustive: true,
                penalty: None,
                attempts: 1,
            },
        )),
        CqmStrategy::PenaltySa { penalty, params } => {
            let mut lambda = penalty.unwrap_or_else(|| default_penalty(m));
            let mut last = None;
            for attempt in 0..=PENALTY_RETRIES {
                let bqm = m.to_bqm(lambda)?;
                let attempt_params = params.with_seed(derive_seed(params.rng_seed, attempt as u64));
                let r = solve_sa(&bqm, &attempt_params);
                let feasible = m.is_feasible(&r.assignment);
                let result = SampleResult {
                    energy: m.objective_value(&r.assignment),
                    assignment: r.assignment,
                    feasible,
                };
                let info = CqmSolveInfo {
                    exhaustive: false,
                    penalty: Some(lambda),
                    attempts: attempt + 1,
                };
                if feasible {
                    return Ok((result, info));
                }
                log::debug!("penalty {lambda} gave an infeasible sample; doubling");
                last = Some((result, info));
                lambda *= 2.0;
            }
            Ok(last.expect("at least one attempt"))
        }
    }
}
