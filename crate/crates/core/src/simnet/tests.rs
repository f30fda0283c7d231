use std::collections::VecDeque;

use proptest::prelude::*;

use super::*;
use crate::graph::{generate, Graph, GraphFamily};
use crate::metrics::FailureKind;
use crate::protocol::{Coins, Fifo, Message, ProtocolParams, Rank};

fn coins(rank: u64, candidate: bool, referee: bool) -> Coins {
    Coins {
        rank: Rank(rank),
        candidate,
        referee,
    }
}

fn two_node_run() -> RunOutcome {
    let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
    let params = ProtocolParams::new(2, 1.0, 1.0).unwrap();
    assert_eq!(params.quorum_low, 1);
    let opts = RunOptions {
        roles: Roles::Explicit(vec![coins(9, true, false), coins(4, false, true)]),
        record_trace: true,
        ..RunOptions::default()
    };
    run(&g, &params, Adversary::synchronous(0), 1, &opts).unwrap()
}

#[test]
fn two_node_hand_trace() {
    let out = two_node_run();
    let r = &out.report;
    assert_eq!(r.total_transmissions, 4);
    assert_eq!(r.leader_nodes, vec![0]);
    assert_eq!(r.leaders_elected, vec![Rank(9)]);
    assert_eq!(r.agreed_leader, Some(Rank(9)));
    assert!(r.all_terminated);
    // Wake-up over [0,1], request [1,2], approval [2,3], leader [3,4]: each
    // waits for the channel to clear.
    assert_eq!(r.completion_time, 4.0);
    assert_eq!(r.all_awake_time, Some(1.0));
    let sent: Vec<_> = out
        .trace
        .unwrap()
        .records
        .iter()
        .filter_map(|rec| match rec {
            Record::Send { t, msg, .. } => Some((*t, *msg)),
            _ => None,
        })
        .collect();
    assert_eq!(
        sent,
        vec![
            (0.0, Message::Wakeup),
            (1.0, Message::Request { rank: Rank(9) }),
            (
                2.0,
                Message::Approved {
                    candidate: Rank(9),
                    referee: Rank(4)
                }
            ),
            (3.0, Message::Leader { rank: Rank(9) }),
        ]
    );
}

#[test]
fn no_candidates_is_an_election_failure() {
    let g = generate(&GraphFamily::Ring { n: 8 }, 0).unwrap();
    let params = ProtocolParams::new(8, 1.0, 0.5).unwrap();
    let opts = RunOptions {
        roles: Roles::Forced {
            candidates: 0,
            referees: 8,
        },
        ..RunOptions::default()
    };
    let r = run(&g, &params, AdversaryKind::Uniform.build(&g, 3), 3, &opts)
        .unwrap()
        .report;
    assert!(r.leaders_elected.is_empty());
    assert_eq!(r.flags.election_failure, Some(FailureKind::NoCandidate));
    assert!(!r.flags.non_quiescent);
    assert!(r.total_transmissions <= 16);
    assert!(r.all_awake_time.is_some());
}

#[test]
fn too_few_referees_is_an_election_failure() {
    let g = generate(&GraphFamily::Ring { n: 8 }, 0).unwrap();
    let params = ProtocolParams::new(8, 1.0, 0.5)
        .unwrap()
        .with_quorum_low(5)
        .unwrap();
    let opts = RunOptions {
        roles: Roles::Forced {
            candidates: 2,
            referees: 4,
        },
        ..RunOptions::default()
    };
    let r = run(&g, &params, AdversaryKind::Unit.build(&g, 5), 5, &opts)
        .unwrap()
        .report;
    assert!(r.leaders_elected.is_empty());
    assert_eq!(
        r.flags.election_failure,
        Some(FailureKind::RefereeShortfall)
    );
}

fn small_params(n: u64) -> ProtocolParams {
    ProtocolParams::new(n, 2.0, 0.6).unwrap()
}

#[test]
fn runs_are_reproducible() {
    let g = generate(&GraphFamily::RandomP { n: 48, p: 0.1 }, 11).unwrap();
    let params = small_params(48);
    for kind in builtin_adversaries() {
        let a = run(&g, &params, kind.build(&g, 21), 21, &RunOptions::traced()).unwrap();
        let b = run(&g, &params, kind.build(&g, 21), 21, &RunOptions::traced()).unwrap();
        assert_eq!(a.report, b.report, "{kind}");
        assert_eq!(a.trace, b.trace, "{kind}");
    }
}

#[test]
fn replay_regenerates_traces() {
    let g = generate(&GraphFamily::Torus2d { rows: 4, cols: 5 }, 0).unwrap();
    let params = small_params(20);
    for kind in builtin_adversaries() {
        let out = run(&g, &params, kind.build(&g, 8), 8, &RunOptions::traced()).unwrap();
        let trace = out.trace.unwrap();
        let again = replay(&trace).unwrap();
        assert_eq!(again.report, out.report, "{kind}");
    }
}

#[test]
fn replay_detects_tampering() {
    let mut trace = two_node_run().trace.unwrap();
    for r in &mut trace.records {
        if let Record::Init { node: 1, coins, .. } = r {
            coins.referee = false;
        }
    }
    match replay(&trace) {
        Err(crate::Error::ReplayMismatch { index, .. }) => assert!(index > 0),
        other => panic!("expected mismatch, got {other:?}"),
    }
}

#[test]
fn dispute_stress_provokes_disputes() {
    let g = generate(&GraphFamily::Ring { n: 32 }, 0).unwrap();
    let params = ProtocolParams::new(32, 1.0, 0.5)
        .unwrap()
        .with_quorum_low(6)
        .unwrap();
    let opts = RunOptions {
        roles: Roles::Forced {
            candidates: 5,
            referees: 11,
        },
        distinct_ranks: true,
        record_trace: true,
        ..RunOptions::default()
    };
    let mut disputes = 0;
    let mut loses = 0;
    for seed in 0..20 {
        let out = run(
            &g,
            &params,
            AdversaryKind::DisputeStress.build(&g, seed),
            seed,
            &opts,
        )
        .unwrap();
        assert!(out.report.succeeded(), "seed {seed}");
        for r in &out.trace.unwrap().records {
            match r {
                Record::Generate {
                    msg: Message::Dispute { .. },
                    ..
                } => disputes += 1,
                Record::Generate {
                    msg: Message::Loses { .. },
                    ..
                } => loses += 1,
                _ => {}
            }
        }
    }
    assert!(disputes > 0);
    assert!(loses > 0);
}

#[test]
fn delay_out_of_range_is_rejected() {
    struct Zero;
    impl DelayPolicy<Message> for Zero {
        fn delay(&mut self, _tx: &Transmission<'_, Message>) -> f64 {
            0.0
        }
    }
    let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
    let params = ProtocolParams::new(2, 1.0, 1.0).unwrap();
    let adv = Adversary::new("zero", vec![(0, 0.0)], Zero, Fifo);
    assert!(matches!(
        run(&g, &params, adv, 0, &RunOptions::default()),
        Err(crate::Error::InvalidDelay { .. })
    ));
}

#[test]
fn event_budget_marks_run_non_quiescent() {
    let g = generate(&GraphFamily::Ring { n: 16 }, 0).unwrap();
    let params = small_params(16);
    let opts = RunOptions {
        event_budget: 10,
        ..RunOptions::default()
    };
    let r = run(&g, &params, AdversaryKind::Unit.build(&g, 0), 0, &opts)
        .unwrap()
        .report;
    assert!(r.flags.non_quiescent);
    assert_eq!(r.events, 10);
}

#[test]
fn forced_roles_and_distinct_ranks() {
    let params = small_params(30);
    let opts = RunOptions {
        roles: Roles::Forced {
            candidates: 5,
            referees: 21,
        },
        distinct_ranks: true,
        ..RunOptions::default()
    };
    for seed in 0..50 {
        let c = draw_coins(30, &params, seed, &opts).unwrap();
        assert_eq!(c.iter().filter(|c| c.candidate).count(), 5);
        assert_eq!(c.iter().filter(|c| c.referee).count(), 21);
        let mut ranks: Vec<_> = c.iter().map(|c| c.rank).collect();
        ranks.sort();
        ranks.dedup();
        assert_eq!(ranks.len(), 30);
    }
    let too_many = RunOptions {
        roles: Roles::Forced {
            candidates: 5,
            referees: 31,
        },
        ..RunOptions::default()
    };
    assert!(draw_coins(30, &params, 0, &too_many).is_err());
}

/// Unit-delay flooding in lock-step rounds: every round, deliveries first,
/// then each idle edge sends the head of its queue.
fn lockstep_flood(g: &Graph, source: u32, k: u32) -> u64 {
    let n = g.node_count();
    let mut heard = vec![vec![false; k as usize]; n];
    let mut queues: Vec<Vec<VecDeque<u32>>> = (0..n as u32)
        .map(|v| vec![VecDeque::new(); g.degree(v)])
        .collect();
    for t in 0..k {
        heard[source as usize][t as usize] = true;
        for q in &mut queues[source as usize] {
            q.push_back(t);
        }
    }
    let mut missing = (n as u64 - 1) * k as u64;
    let mut round = 0;
    while missing > 0 {
        round += 1;
        let mut inflight = Vec::new();
        for v in 0..n as u32 {
            for (p, q) in queues[v as usize].iter_mut().enumerate() {
                if let Some(t) = q.pop_front() {
                    inflight.push((v, g.neighbors(v)[p], t));
                }
            }
        }
        assert!(!inflight.is_empty());
        for (u, v, t) in inflight {
            let back = g.neighbors(v).iter().position(|&w| w == u).unwrap();
            if heard[v as usize][t as usize] {
                queues[v as usize][back].retain(|&x| x != t);
            } else {
                heard[v as usize][t as usize] = true;
                missing -= 1;
                for (p, q) in queues[v as usize].iter_mut().enumerate() {
                    if p != back {
                        q.push_back(t);
                    }
                }
            }
        }
    }
    round
}

#[test]
fn flood_matches_pipelining_bound() {
    let cases = [
        (GraphFamily::Ring { n: 8 }, 4usize),
        (GraphFamily::Torus2d { rows: 8, cols: 8 }, 8),
        (GraphFamily::Complete { n: 16 }, 1),
    ];
    for (family, d) in cases {
        let g = generate(&family, 0).unwrap();
        assert_eq!(g.diameter(), d);
        for k in [1u32, 5, 20] {
            let t = flood_only(&g, 0, k, &mut UnitDelay).unwrap();
            let bound = (d as u32 + k - 1) as f64;
            assert!(t <= bound, "{family:?} k={k}: {t} > {bound}");
            assert_eq!(t, lockstep_flood(&g, 0, k) as f64, "{family:?} k={k}");
        }
    }
    let ring = generate(&GraphFamily::Ring { n: 8 }, 0).unwrap();
    assert_eq!(flood_only(&ring, 0, 1, &mut UnitDelay).unwrap(), 4.0);
    assert_eq!(flood_only(&ring, 3, 5, &mut UnitDelay).unwrap(), 8.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flood_agrees_with_lockstep(n in 4usize..24, seed in 0u64..1000, k in 1u32..8) {
        let g = generate(&GraphFamily::RandomP { n, p: 0.25 }, seed).unwrap();
        let src = (seed % n as u64) as u32;
        let t = flood_only(&g, src, k, &mut UnitDelay).unwrap();
        prop_assert!(t <= (g.diameter() as u32 + k - 1) as f64);
        prop_assert_eq!(t, lockstep_flood(&g, src, k) as f64);
    }

    #[test]
    fn runs_respect_flooding_invariants(
        n in 6usize..40,
        seed in 0u64..10_000,
        kind in 0usize..6,
        family in 0usize..3,
    ) {
        let family = match family {
            0 => GraphFamily::Ring { n },
            1 => GraphFamily::Complete { n: n.min(20) },
            _ => GraphFamily::RandomP { n, p: 0.15 },
        };
        let g = generate(&family, seed).unwrap();
        let params = ProtocolParams::new(g.node_count() as u64, 1.5, 0.6).unwrap();
        let kind = builtin_adversaries()[kind];
        let out = run(&g, &params, kind.build(&g, seed), seed, &RunOptions::traced()).unwrap();
        let r = &out.report;
        prop_assert!(!r.flags.non_quiescent);
        prop_assert_eq!(r.double_enqueues, 0);
        prop_assert!(r.max_payload_transmissions <= 2 * r.m as u64);
        prop_assert!(r.leaders_elected.len() <= 1 || r.flags.rank_collision);
        prop_assert!(r.all_awake_time.is_some());
        let trace = out.trace.unwrap();
        let mut last = 0.0;
        // Per-arc FIFO: on a FIFO adversary, messages arrive in the order
        // they were sent on each arc.
        let mut sent = std::collections::HashMap::<(u32, u32), VecDeque<Message>>::new();
        for rec in &trace.records {
            prop_assert!(rec.time() >= last);
            last = rec.time();
            match rec {
                Record::Send { src, dst, msg, delay, .. } => {
                    prop_assert!(*delay > 0.0 && *delay <= 1.0);
                    sent.entry((*src, *dst)).or_default().push_back(*msg);
                }
                Record::Deliver { src, dst, msg, .. } => {
                    let q = sent.get_mut(&(*src, *dst)).unwrap();
                    prop_assert_eq!(q.pop_front(), Some(*msg));
                }
                _ => {}
            }
        }
        prop_assert!(sent.values().all(|q| q.is_empty()));
    }
}
