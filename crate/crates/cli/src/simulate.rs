//! `gridauth simulate`: observer and brute-force experiments.

use std::thread;

use chrono::{TimeZone, Utc};
use gridauth_core::sim::{
    bruteforce_attack, exhaustive_success_probability, run_observer_trials, trial_rng, AttackBudget, GuessOrder,
    ObserverModel, SummaryRow,
};
use gridauth_core::LockoutPolicy;
use gridauth_service::{InProcessEndpoint, ServiceConfig};

pub fn observer_rows(models: &[ObserverModel], trials: u64, seed: u64) -> Vec<SummaryRow> {
    models
        .iter()
        .map(|&model| SummaryRow {
            model: model.label().to_owned(),
            k: model.k(),
            trials,
            successes: run_observer_trials(model, trials, seed),
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct BruteforceParams {
    pub order: GuessOrder,
    pub windows: u32,
    pub trials: u64,
    pub seed: u64,
    pub policy: LockoutPolicy,
}

pub struct BruteforceSummary {
    pub row: SummaryRow,
    /// Analytic success chance with both accepted values counted.
    pub model: f64,
    pub mean_attempts: f64,
}

/// Runs each trial against its own in-memory service on a mock clock, so
/// lockout windows pass instantly. Results depend only on the seed.
pub fn bruteforce(params: BruteforceParams) -> Result<BruteforceSummary, String> {
    let workers = thread::available_parallelism().map_or(1, |n| n.get()) as u64;
    let per_worker: Vec<Result<(u64, u64), String>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| scope.spawn(move || run_trials(params, (w..params.trials).step_by(workers as usize))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("trial worker panicked")).collect()
    });
    let (mut successes, mut attempts) = (0, 0);
    for r in per_worker {
        let (s, a) = r?;
        successes += s;
        attempts += a;
    }
    let label = match params.order {
        GuessOrder::Sequential => "bruteforce-sequential",
        GuessOrder::Shuffled => "bruteforce-shuffled",
    };
    Ok(BruteforceSummary {
        row: SummaryRow { model: label.to_owned(), k: None, trials: params.trials, successes },
        model: exhaustive_success_probability(params.windows, params.policy.threshold, 2),
        mean_attempts: if params.trials == 0 { 0.0 } else { attempts as f64 / params.trials as f64 },
    })
}

fn run_trials(params: BruteforceParams, indices: impl Iterator<Item = u64>) -> Result<(u64, u64), String> {
    let start = Utc.with_ymd_and_hms(2024, 3, 16, 9, 0, 0).single().expect("valid instant");
    let (mut successes, mut attempts) = (0, 0);
    for t in indices {
        let mut ep = InProcessEndpoint::fresh(params.policy, ServiceConfig::default(), start, params.seed ^ t);
        let name = format!("target{t}");
        ep.service().register(&name).map_err(|e| e.to_string())?;
        let budget = AttackBudget { max_windows: Some(params.windows), max_attempts: None };
        let mut rng = trial_rng(params.seed, t);
        let report = bruteforce_attack(&mut ep, &name, params.order, budget, &mut rng).map_err(|e| e.to_string())?;
        successes += u64::from(report.success);
        attempts += report.attempts;
    }
    Ok((successes, attempts))
}
