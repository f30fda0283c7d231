use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::bounds::{kappa, tau, upsilon};
use super::report::RunReport;
use crate::Result;

/// Aggregates over every run sharing a family, size and adversary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: String,
    pub n: usize,
    pub adversary: String,
    pub m: usize,
    pub diameter: usize,
    pub runs: usize,
    pub succeeded: usize,
    pub election_failures: usize,
    pub rank_collisions: usize,
    pub non_quiescent: usize,
    pub mean_candidates: f64,
    pub mean_referees: f64,
    pub mean_transmissions: f64,
    pub max_transmissions: u64,
    pub mean_unique: f64,
    pub mean_kappa: f64,
    pub max_kappa: f64,
    pub mean_upsilon: f64,
    pub max_upsilon: f64,
    pub mean_completion: f64,
    pub max_completion: f64,
    pub mean_tau: f64,
    pub max_tau: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, k) = xs.fold((0.0, 0usize), |(s, k), x| (s + x, k + 1));
    if k == 0 {
        0.0
    } else {
        s / k as f64
    }
}

fn max(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(0.0, f64::max)
}

/// Rows come out sorted by family, then n, then adversary, regardless of the
/// order the reports arrive in.
pub fn summarize(reports: &[RunReport]) -> Vec<SweepRow> {
    let mut groups: BTreeMap<(&str, usize, &str), Vec<&RunReport>> = BTreeMap::new();
    for r in reports {
        groups
            .entry((r.graph.as_str(), r.n, r.adversary.as_str()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((family, n, adversary), rs)| {
            let quiet: Vec<&RunReport> = rs
                .iter()
                .copied()
                .filter(|r| !r.flags.non_quiescent)
                .collect();
            SweepRow {
                family: family.into(),
                n,
                adversary: adversary.into(),
                m: rs[0].m,
                diameter: rs[0].diameter,
                runs: rs.len(),
                succeeded: rs.iter().filter(|r| r.succeeded()).count(),
                election_failures: rs
                    .iter()
                    .filter(|r| r.flags.election_failure.is_some())
                    .count(),
                rank_collisions: rs.iter().filter(|r| r.flags.rank_collision).count(),
                non_quiescent: rs.len() - quiet.len(),
                mean_candidates: mean(rs.iter().map(|r| r.candidates as f64)),
                mean_referees: mean(rs.iter().map(|r| r.referees as f64)),
                mean_transmissions: mean(rs.iter().map(|r| r.total_transmissions as f64)),
                max_transmissions: rs.iter().map(|r| r.total_transmissions).max().unwrap_or(0),
                mean_unique: mean(rs.iter().map(|r| r.unique_messages as f64)),
                mean_kappa: mean(rs.iter().map(|r| kappa(r))),
                max_kappa: max(rs.iter().map(|r| kappa(r))),
                mean_upsilon: mean(rs.iter().map(|r| upsilon(r))),
                max_upsilon: max(rs.iter().map(|r| upsilon(r))),
                mean_completion: mean(quiet.iter().map(|r| r.completion_time)),
                max_completion: max(quiet.iter().map(|r| r.completion_time)),
                mean_tau: mean(quiet.iter().map(|r| tau(r))),
                max_tau: max(quiet.iter().map(|r| tau(r))),
            }
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
