use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use super::report::RunReport;
use super::verdict::Status;
use crate::protocol::ProtocolParams;

/// Allowed growth between consecutive sizes for a ratio that should not grow.
pub const SCALING_TOLERANCE: f64 = 0.2;
/// Per-run completion envelope: at most this many times `D + unique messages`.
pub const PHASES: f64 = 5.0;
/// Minimum sample for the concentration check.
pub const MIN_CONCENTRATION_RUNS: usize = 100;

pub fn log2_sq(n: usize) -> f64 {
    let l = (n as f64).log2();
    l * l
}

/// Transmissions per `m·log₂²n`.
pub fn kappa(r: &RunReport) -> f64 {
    r.total_transmissions as f64 / (r.m as f64 * log2_sq(r.n))
}

/// Unique payloads per `log₂²n`.
pub fn upsilon(r: &RunReport) -> f64 {
    r.unique_messages as f64 / log2_sq(r.n)
}

/// Completion time per `D + log₂²n`.
pub fn tau(r: &RunReport) -> f64 {
    r.completion_time / (r.diameter as f64 + log2_sq(r.n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationVerdict {
    pub status: Status,
    pub trials: usize,
    pub mu: f64,
    pub low: f64,
    pub high: f64,
    pub in_range: usize,
    pub fraction: f64,
    /// `1 − 2·exp(−μ/300)`, clamped to [0, 1].
    pub chernoff_prediction: f64,
    pub standard_error: f64,
    pub threshold: f64,
    /// Exact probability that both counts land in range, from the binomial
    /// distribution.
    pub exact_probability: f64,
    pub detail: String,
}

/// Probability that a Binomial(n, p) count lies in `[low, high]`.
pub fn binomial_in_range(n: u64, p: f64, low: f64, high: f64) -> f64 {
    let lo = low.ceil().max(0.0) as u64;
    let hi = high.floor().min(n as f64) as u64;
    if lo > hi {
        return 0.0;
    }
    let b = Binomial::new(p, n).expect("valid binomial");
    let below = if lo == 0 { 0.0 } else { b.cdf(lo - 1) };
    (b.cdf(hi) - below).max(0.0)
}

/// The Chernoff lower bound on the chance that one role count lands within
/// 10% of its mean `mu`.
pub fn chernoff_prediction(mu: f64) -> f64 {
    (1.0 - 2.0 * (-mu / 300.0).exp()).clamp(0.0, 1.0)
}

/// Compares how often both role counts land in `[0.9μ, 1.1μ]` against the
/// Chernoff prediction, allowing three binomial standard errors below it.
pub fn check_role_concentration(
    reports: &[RunReport],
    params: &ProtocolParams,
) -> ConcentrationVerdict {
    let mu = params.expected_role_count();
    let (low, high) = (0.9 * mu, 1.1 * mu);
    let trials = reports.len();
    let in_range = reports
        .iter()
        .filter(|r| {
            let ok = |k: usize| (low..=high).contains(&(k as f64));
            ok(r.candidates) && ok(r.referees)
        })
        .count();
    let fraction = if trials == 0 {
        0.0
    } else {
        in_range as f64 / trials as f64
    };
    let p0 = chernoff_prediction(mu);
    let se = if trials == 0 {
        0.0
    } else {
        (p0 * (1.0 - p0) / trials as f64).sqrt()
    };
    let threshold = p0 - 3.0 * se;
    let n = reports.first().map_or(params.n_estimate, |r| r.n as u64);
    let single = binomial_in_range(n, params.role_probability, low, high);
    let mut v = ConcentrationVerdict {
        status: Status::Inconclusive,
        trials,
        mu,
        low,
        high,
        in_range,
        fraction,
        chernoff_prediction: p0,
        standard_error: se,
        threshold,
        exact_probability: single * single,
        detail: String::new(),
    };
    if trials < MIN_CONCENTRATION_RUNS {
        v.detail = format!("{trials} runs, need {MIN_CONCENTRATION_RUNS}");
    } else if params.role_probability >= 1.0 {
        v.detail = "role probability is 1: every node holds both roles".into();
    } else if reports
        .iter()
        .any(|r| r.n_estimate != params.n_estimate || r.n as u64 != n)
    {
        v.detail = "reports mix different sizes".into();
    } else {
        v.status = if fraction >= threshold {
            Status::Pass
        } else {
            Status::Fail
        };
        v.detail = format!(
            "{in_range}/{trials} = {fraction:.3} in [{low:.1}, {high:.1}]; bound {p0:.4} - 3se = {threshold:.4}; exact {:.4}",
            single * single
        );
    }
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub runs: usize,
    pub mean: f64,
    pub max: f64,
}

/// One ratio tracked across sizes for a fixed family and adversary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub quantity: String,
    pub family: String,
    pub adversary: String,
    pub points: Vec<ScalingPoint>,
    /// Each max is at most `1 + SCALING_TOLERANCE` times the previous one.
    pub bounded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundVerdict {
    pub status: Status,
    pub series: Vec<Series>,
    /// Largest ratio seen anywhere.
    pub fitted_constant: f64,
    pub violations: Vec<String>,
}

fn series(quantity: &str, reports: &[&RunReport], f: impl Fn(&RunReport) -> f64) -> Vec<Series> {
    let mut groups: BTreeMap<(&str, &str), BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in reports {
        groups
            .entry((r.graph.as_str(), r.adversary.as_str()))
            .or_default()
            .entry(r.n)
            .or_default()
            .push(f(r));
    }
    groups
        .into_iter()
        .map(|((family, adversary), by_n)| {
            let points: Vec<ScalingPoint> = by_n
                .into_iter()
                .map(|(n, xs)| ScalingPoint {
                    n,
                    runs: xs.len(),
                    mean: xs.iter().sum::<f64>() / xs.len() as f64,
                    max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                })
                .collect();
            let bounded = points
                .windows(2)
                .all(|w| w[1].max <= (1.0 + SCALING_TOLERANCE) * w[0].max);
            Series {
                quantity: quantity.into(),
                family: family.into(),
                adversary: adversary.into(),
                points,
                bounded,
            }
        })
        .collect()
}

fn conclude(series: Vec<Series>, violations: Vec<String>) -> BoundVerdict {
    let fitted_constant = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.max))
        .fold(0.0, f64::max);
    let status = if !violations.is_empty() || series.iter().any(|s| !s.bounded) {
        Status::Fail
    } else if series.is_empty() || series.iter().any(|s| s.points.len() < 3) {
        Status::Inconclusive
    } else {
        Status::Pass
    };
    BoundVerdict {
        status,
        series,
        fitted_constant,
        violations,
    }
}

/// Transmissions per `m·log₂²n` and unique payloads per `log₂²n` must not
/// grow with n; per run, no payload may cross more than `2m` arcs and no
/// referee may originate more than `2·N_C + 1` payloads.
pub fn check_message_bound(reports: &[RunReport]) -> BoundVerdict {
    let mut violations = Vec::new();
    for r in reports {
        if r.max_payload_transmissions > 2 * r.m as u64 {
            violations.push(format!(
                "seed {}: a payload crossed {} arcs, 2m = {}",
                r.seed,
                r.max_payload_transmissions,
                2 * r.m
            ));
        }
        if r.max_referee_generated > 2 * r.candidates as u64 + 1 {
            violations.push(format!(
                "seed {}: a referee originated {} payloads, 2·N_C + 1 = {}",
                r.seed,
                r.max_referee_generated,
                2 * r.candidates + 1
            ));
        }
        if r.double_enqueues > 0 {
            violations.push(format!(
                "seed {}: {} payloads queued twice on one arc",
                r.seed, r.double_enqueues
            ));
        }
    }
    let all: Vec<&RunReport> = reports.iter().collect();
    let mut s = series("kappa", &all, kappa);
    s.extend(series("upsilon", &all, upsilon));
    conclude(s, violations)
}

/// Every quiescent run finishes within `5·(D + unique messages)`, and
/// completion time per `D + log₂²n` must not grow with n.
pub fn check_time_bound(reports: &[RunReport]) -> BoundVerdict {
    let mut violations = Vec::new();
    let quiet: Vec<&RunReport> = reports.iter().filter(|r| !r.flags.non_quiescent).collect();
    for r in &quiet {
        let envelope = PHASES * (r.diameter as f64 + r.unique_messages as f64);
        if r.completion_time > envelope {
            violations.push(format!(
                "seed {} ({}, n={}): completion {:.3} > {envelope}",
                r.seed, r.graph, r.n, r.completion_time
            ));
        }
    }
    conclude(series("tau", &quiet, tau), violations)
}
