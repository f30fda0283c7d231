use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial as BinomialSampler, Distribution};

use super::*;
use crate::graph::{generate, GraphFamily};
use crate::protocol::{Message, ProtocolParams, Rank};
use crate::simnet::{builtin_adversaries, run, Record, Roles, RunOptions};

fn report(graph: &str, n: usize, m: usize, transmissions: u64, completion: f64) -> RunReport {
    RunReport {
        graph: graph.into(),
        adversary: "unit".into(),
        seed: 0,
        n,
        m,
        diameter: n / 2,
        n_estimate: n as u64,
        quorum_low: 1,
        candidates: 1,
        referees: 1,
        leaders_elected: vec![Rank(1)],
        leader_nodes: vec![0],
        agreed_leader: Some(Rank(1)),
        all_terminated: true,
        total_transmissions: transmissions,
        unique_messages: 10,
        max_payload_transmissions: 1,
        max_referee_generated: 1,
        double_enqueues: 0,
        quorum_sizes: vec![1],
        completion_time: completion,
        all_awake_time: Some(0.0),
        events: 0,
        flags: RunFlags::default(),
    }
}

// Direct sum of the pmf in log space.
fn pmf_sum(n: u64, p: f64, lo: u64, hi: u64) -> f64 {
    let ln_fact = |k: u64| (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
    (lo..=hi)
        .map(|k| {
            (ln_fact(n) - ln_fact(k) - ln_fact(n - k)
                + k as f64 * p.ln()
                + (n - k) as f64 * (1.0 - p).ln())
            .exp()
        })
        .sum()
}

#[test]
fn binomial_range_matches_pmf_sum() {
    for &(n, p, lo, hi) in &[
        (128u64, 0.875, 100.8, 123.2),
        (1024, 0.15625, 144.0, 176.0),
        (50, 0.3, 0.0, 50.0),
    ] {
        let got = binomial_in_range(n, p, lo, hi);
        let want = pmf_sum(n, p, lo.ceil() as u64, hi as u64);
        assert!((got - want).abs() < 1e-9, "n={n}: {got} vs {want}");
    }
    assert_eq!(binomial_in_range(10, 0.5, 6.2, 6.8), 0.0);
}

#[test]
fn binomial_range_matches_sampling() {
    let (n, p) = (512u64, 16.0 * 9.0 / 512.0);
    let mu = n as f64 * p;
    let (lo, hi) = (0.9 * mu, 1.1 * mu);
    let d = BinomialSampler::new(n, p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 200_000;
    let hits = (0..trials)
        .filter(|_| (lo..=hi).contains(&(d.sample(&mut rng) as f64)))
        .count();
    let empirical = hits as f64 / trials as f64;
    let exact = binomial_in_range(n, p, lo, hi);
    let se = (exact * (1.0 - exact) / trials as f64).sqrt();
    assert!(
        (empirical - exact).abs() < 5.0 * se,
        "{empirical} vs {exact}"
    );
}

#[test]
fn chernoff_tail_beats_inverse_cube_at_full_constants() {
    for n in [8u64, 64, 1 << 10, 50_000] {
        let params = ProtocolParams::paper(n).unwrap();
        let tail = 1.0 - chernoff_prediction(params.expected_role_count());
        assert!(tail <= (n as f64).powi(-3), "n={n}: {tail}");
    }
    // The two one-sided tails at 10% deviation are each below exp(−μ/300).
    for mu in [50.0f64, 300.0, 3000.0] {
        let upper = (-0.01 * mu / 3.0).exp();
        let lower = (-0.01 * mu / 2.0).exp();
        assert!(upper + lower <= 2.0 * (-mu / 300.0).exp() + 1e-12);
    }
}

#[test]
fn concentration_needs_enough_runs() {
    let params = ProtocolParams::desk(128).unwrap();
    let v = check_role_concentration(&[report("ring", 128, 128, 1, 1.0)], &params);
    assert_eq!(v.status, Status::Inconclusive);
}

#[test]
fn concentration_on_drawn_coins() {
    let n = 512;
    let params = ProtocolParams::desk(n as u64).unwrap();
    let opts = RunOptions::default();
    let reports: Vec<RunReport> = (0..300)
        .map(|seed| {
            let coins = crate::simnet::draw_coins(n, &params, seed, &opts).unwrap();
            let mut r = report("ring", n, n, 1, 1.0);
            r.candidates = coins.iter().filter(|c| c.candidate).count();
            r.referees = coins.iter().filter(|c| c.referee).count();
            r
        })
        .collect();
    let v = check_role_concentration(&reports, &params);
    assert_eq!(v.status, Status::Pass, "{}", v.detail);
    // The observed rate sits near the exact joint probability.
    let se = (v.exact_probability * (1.0 - v.exact_probability) / 300.0).sqrt();
    assert!(
        (v.fraction - v.exact_probability).abs() < 4.0 * se,
        "{}",
        v.detail
    );
}

#[test]
fn concentration_rejects_certain_roles() {
    let params = ProtocolParams::desk(16).unwrap();
    assert_eq!(params.role_probability, 1.0);
    let reports = vec![report("ring", 16, 16, 1, 1.0); 100];
    assert_eq!(
        check_role_concentration(&reports, &params).status,
        Status::Inconclusive
    );
}

fn scaled(transmissions: impl Fn(usize) -> f64) -> Vec<RunReport> {
    [64usize, 128, 256, 512]
        .iter()
        .map(|&n| {
            report(
                "ring",
                n,
                n,
                (transmissions(n) * n as f64 * log2_sq(n)) as u64,
                1.0,
            )
        })
        .collect()
}

#[test]
fn message_bound_flat_passes_growing_fails() {
    assert_eq!(check_message_bound(&scaled(|_| 2.0)).status, Status::Pass);
    let v = check_message_bound(&scaled(|n| (n as f64).sqrt()));
    assert_eq!(v.status, Status::Fail);
    assert!(v.series.iter().any(|s| s.quantity == "kappa" && !s.bounded));
    let few: Vec<_> = scaled(|_| 2.0).into_iter().take(2).collect();
    assert_eq!(check_message_bound(&few).status, Status::Inconclusive);
}

#[test]
fn message_bound_per_run_limits() {
    let mut rs = scaled(|_| 1.0);
    rs[1].max_payload_transmissions = 2 * rs[1].m as u64 + 1;
    rs[2].max_referee_generated = 4;
    rs[3].double_enqueues = 1;
    let v = check_message_bound(&rs);
    assert_eq!(v.status, Status::Fail);
    assert_eq!(v.violations.len(), 3);
}

#[test]
fn time_bound_envelope_and_scaling() {
    let mut rs: Vec<RunReport> = [64usize, 128, 256, 512]
        .iter()
        .map(|&n| {
            let c = n as f64 / 2.0 + log2_sq(n);
            report("ring", n, n, 1, c)
        })
        .collect();
    assert_eq!(check_time_bound(&rs).status, Status::Pass);
    rs[0].completion_time = 5.0 * (32.0 + 10.0) + 1.0;
    assert_eq!(check_time_bound(&rs).violations.len(), 1);
    // A cut-off run is ignored.
    rs[0].flags.non_quiescent = true;
    assert_eq!(check_time_bound(&rs).status, Status::Pass);
}

#[test]
fn summary_is_order_independent() {
    let mut rs = scaled(|_| 1.0);
    rs.extend(scaled(|_| 1.5).into_iter().map(|mut r| {
        r.adversary = "uniform".into();
        r
    }));
    let mut a = Vec::new();
    write_csv(&summarize(&rs), &mut a).unwrap();
    rs.reverse();
    let mut b = Vec::new();
    write_csv(&summarize(&rs), &mut b).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(text.starts_with("family,n,adversary,"));
}

#[test]
fn real_runs_verify_clean() {
    let g = generate(&GraphFamily::Ring { n: 24 }, 0).unwrap();
    let params = ProtocolParams::new(24, 1.0, 0.6)
        .unwrap()
        .with_quorum_low(4)
        .unwrap();
    let opts = RunOptions {
        roles: Roles::Forced {
            candidates: 4,
            referees: 7,
        },
        distinct_ranks: true,
        ..RunOptions::traced()
    };
    for &kind in builtin_adversaries() {
        for seed in 0..5 {
            let out = run(&g, &params, kind.build(&g, seed), seed, &opts).unwrap();
            let trace = out.trace.unwrap();
            let s = verify_safety(&trace);
            assert!(s.pass, "{kind} {seed}: {:?}", s.violations);
            assert_eq!(s.guaranteed_overlap, 1);
            let t = verify_trace(&trace);
            assert!(t.pass, "{kind} {seed}: {:?}", t.violations);
            assert_eq!(t.transmissions as u64, out.report.total_transmissions);
            assert_eq!(verify_liveness(&out.report), Liveness::Pass);
        }
    }
}

fn traced_ring() -> crate::simnet::Trace {
    let g = generate(&GraphFamily::Ring { n: 12 }, 0).unwrap();
    let params = ProtocolParams::new(12, 1.0, 0.6)
        .unwrap()
        .with_quorum_low(3)
        .unwrap();
    let opts = RunOptions {
        roles: Roles::Forced {
            candidates: 3,
            referees: 5,
        },
        distinct_ranks: true,
        ..RunOptions::traced()
    };
    let adv = crate::simnet::AdversaryKind::Uniform.build(&g, 3);
    run(&g, &params, adv, 3, &opts).unwrap().trace.unwrap()
}

#[test]
fn safety_flags_second_leader_and_forged_approval() {
    let mut trace = traced_ring();
    let i = trace
        .records
        .iter()
        .position(|r| matches!(r, Record::Elected { .. }))
        .unwrap();
    let Record::Elected { t, quorum, .. } = trace.records[i].clone() else {
        unreachable!()
    };
    trace.records.push(Record::Elected {
        t,
        node: 99,
        rank: Rank(u64::MAX),
        quorum,
    });
    let v = verify_safety(&trace);
    assert!(!v.pass);
    assert_eq!(v.leaders.len(), 2);
    assert!(v.violations.iter().any(|s| s.contains("never sent")));
    assert!(v.violations.iter().any(|s| s.contains("2 leaders")));
}

#[test]
fn trace_check_catches_reordering_and_bad_delay() {
    let clean = traced_ring();
    assert!(verify_trace(&clean).pass);

    let mut t = clean.clone();
    let sends: Vec<usize> = (0..t.records.len())
        .filter(|&i| matches!(t.records[i], Record::Send { .. }))
        .collect();
    if let Record::Send { delay, .. } = &mut t.records[sends[0]] {
        *delay = 1.5;
    }
    assert!(!verify_trace(&t).pass);

    let mut t = clean.clone();
    let k = t
        .records
        .iter()
        .position(|r| matches!(r, Record::Deliver { .. }))
        .unwrap();
    t.records.remove(k);
    let v = verify_trace(&t);
    assert!(v.violations.iter().any(|s| s.contains("deliveries")));

    let mut t = clean;
    let k = t
        .records
        .iter()
        .position(|r| {
            matches!(
                r,
                Record::Deliver {
                    msg: Message::Request { .. },
                    ..
                }
            )
        })
        .unwrap();
    if let Record::Deliver { msg, .. } = &mut t.records[k] {
        *msg = Message::Wakeup;
    }
    assert!(!verify_trace(&t).pass);
}

#[test]
fn liveness_classification() {
    let ok = report("ring", 8, 8, 1, 1.0);
    assert_eq!(verify_liveness(&ok), Liveness::Pass);
    let mut r = ok.clone();
    r.leaders_elected.clear();
    assert!(verify_liveness(&r).is_fail());
    r.flags.election_failure = Some(FailureKind::NoCandidate);
    assert_eq!(
        verify_liveness(&r),
        Liveness::ElectionFailure {
            kind: FailureKind::NoCandidate
        }
    );
    let mut r = ok.clone();
    r.all_terminated = false;
    assert!(verify_liveness(&r).is_fail());
    let mut r = ok;
    r.flags.non_quiescent = true;
    assert_eq!(verify_liveness(&r), Liveness::Inconclusive);
}

#[test]
fn verdict_hard_failures() {
    let v = [
        Verdict::new("a", Status::Fail, false, ""),
        Verdict::new("b", Status::Inconclusive, true, ""),
    ];
    assert!(!any_hard_failure(&v));
    assert!(any_hard_failure(&[Verdict::new(
        "c",
        Status::Fail,
        true,
        ""
    )]));
}

#[test]
fn full_referee_panel_quorums_must_meet() {
    let g = generate(&GraphFamily::Ring { n: 32 }, 0).unwrap();
    let params = ProtocolParams::new(32, 1.0, 0.5)
        .unwrap()
        .with_quorum_low(11)
        .unwrap();
    let opts = RunOptions {
        roles: Roles::Forced {
            candidates: 5,
            referees: 21,
        },
        distinct_ranks: true,
        ..RunOptions::traced()
    };
    let adv = crate::simnet::AdversaryKind::DisputeStress;
    for seed in 0..10 {
        let trace = run(&g, &params, adv.build(&g, seed), seed, &opts)
            .unwrap()
            .trace
            .unwrap();
        let v = verify_safety(&trace);
        assert!(v.pass, "{:?}", v.violations);
        assert_eq!(v.guaranteed_overlap, 1);
        // Any 11 of the 21 referees meet any other 11: the approvals the
        // winner counted leave at most 10 referees for a rival.
        let Some(Record::Elected { quorum, .. }) = trace
            .records
            .iter()
            .find(|r| matches!(r, Record::Elected { .. }))
        else {
            panic!("seed {seed}: nobody elected");
        };
        let referees: Vec<Rank> = trace
            .records
            .iter()
            .filter_map(|r| match r {
                Record::Init { coins, .. } if coins.referee => Some(coins.rank),
                _ => None,
            })
            .collect();
        assert_eq!(referees.len(), 21);
        assert!(quorum.iter().all(|q| referees.contains(q)));
        assert!(referees.len() - quorum.len() < 11);
    }
}

#[test]
fn disjoint_quorums_are_reported() {
    let mut trace = traced_ring();
    // Five referees and a threshold of three: two quorums must share one.
    let referees: Vec<Rank> = trace
        .records
        .iter()
        .filter_map(|r| match r {
            Record::Init { coins, .. } if coins.referee => Some(coins.rank),
            _ => None,
        })
        .collect();
    assert_eq!(referees.len(), 5);
    let t = trace.records.last().unwrap().time();
    let (a, b) = (Rank(u64::MAX - 1), Rank(u64::MAX));
    for (cand, members) in [(a, &referees[..3]), (b, &referees[3..])] {
        for &r in members {
            trace.records.push(Record::Generate {
                t,
                node: 0,
                msg: Message::Approved {
                    candidate: cand,
                    referee: r,
                },
            });
        }
    }
    trace.records.push(Record::Elected {
        t,
        node: 1,
        rank: a,
        quorum: referees[..3].to_vec(),
    });
    trace.records.push(Record::Elected {
        t,
        node: 2,
        rank: b,
        quorum: vec![referees[3], referees[4], referees[3]],
    });
    let v = verify_safety(&trace);
    assert!(!v.pass);
    assert_eq!(v.min_quorum_overlap, Some(0));
    assert!(v.violations.iter().any(|s| s.contains("disjoint")));
    assert!(v.violations.iter().any(|s| s.contains("twice")));
}
