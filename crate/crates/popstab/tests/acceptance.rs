//! Acceptance suite: one test per acceptance criterion, each printing a
//! PASS/FAIL line (visible with `--nocapture`). The statistical criteria run
//! at their stated scales, so this suite takes tens of minutes of CPU; the
//! deterministic criteria finish in seconds.

mod common;

use common::oracle::{main_protocol_step, oracle_decode, OracleAgent};
use common::test_params;
use num_traits::Zero;
use popstab::adversary::StrategyKind;
use popstab::agent::AgentState;
use popstab::analysis::{
    exact_pair_delta, expected_eval_delta, split_probability, EpochSummary, LemmaTolerances,
};
use popstab::engine::{run_simulation, ProtocolKind, RunConfig, RunRecord};
use popstab::message::{decode_message, encode_message, full_view, WireMessage};
use popstab::params::Rational;
use popstab::protocol::{main_step, main_step_view, toss_biased_coin, Mutation};
use popstab::rng::CoinStream;
use popstab::verify::{
    desync_check, drift_sign_check, equilibrium_check, MainRunSpec, DESYNC_ROUND_SLACK,
};
use std::sync::OnceLock;

/// Fixed seed list for every statistical criterion; chosen before any
/// experiment was run.
fn acceptance_seeds() -> Vec<u64> {
    (1..=10).collect()
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// Representative agent states: every phase-boundary round crossed with all
/// flag combinations and two recruitment obligations.
fn state_classes(params: &popstab::SimParams) -> Vec<AgentState> {
    let t = params.epoch_length;
    let ti = params.t_inner;
    let rounds = [0, 1, ti - 1, ti, t / 2, t - 2, t - 1];
    let mut states = Vec::new();
    for &round in &rounds {
        for flags in 0..8u8 {
            for to_recruit in [0, 5] {
                states.push(AgentState {
                    round,
                    am_active: flags & 1 != 0,
                    color: flags & 2 != 0,
                    recruiting: flags & 4 != 0,
                    to_recruit,
                });
            }
        }
    }
    states
}

/// All nine wire forms: absent plus the eight three-bit values.
fn wire_classes() -> Vec<Option<WireMessage>> {
    let mut wires = vec![None];
    wires.extend((0..8u8).map(|b| Some(WireMessage::from_bits(b))));
    wires
}

#[test]
fn criterion_01_pseudocode_oracle_equivalence() {
    let params = test_params(1 << 16, Rational::new(1, 2), 0);
    let mut cases = 0u64;
    for state in state_classes(&params) {
        for &wire in &wire_classes() {
            for coin_seed in 0..3u64 {
                cases += 1;
                let mut impl_coins = CoinStream::from_seed_u64(coin_seed);
                let (next, action) = main_step(&state, wire, &params, &mut impl_coins);

                let mut agent = OracleAgent::new(
                    state.round,
                    state.am_active,
                    state.color,
                    state.recruiting,
                    state.to_recruit,
                );
                let view = oracle_decode(wire.map(|w| (w.is_er, w.payload_a, w.payload_b)));
                let mut oracle_coins = CoinStream::from_seed_u64(coin_seed);
                main_protocol_step(&mut agent, &view, &params, &mut oracle_coins);

                use popstab::AgentAction::*;
                assert_eq!(action == Die, !agent.alive, "death mismatch: {state:?} {wire:?}");
                assert_eq!(action == Split, agent.split, "split mismatch: {state:?} {wire:?}");
                if agent.alive {
                    let oracle_state = AgentState {
                        round: agent.round,
                        am_active: agent.am_active,
                        color: agent.mycolor,
                        recruiting: agent.recruiting,
                        to_recruit: agent.to_recruit,
                    };
                    assert_eq!(next, oracle_state, "state mismatch: {state:?} {wire:?}");
                }
                assert_eq!(
                    impl_coins.bits_drawn(),
                    oracle_coins.bits_drawn(),
                    "coin consumption mismatch: {state:?} {wire:?}"
                );
            }
        }
    }
    assert!(cases < 10_000);
    report("1", true, &format!("{cases} (state, message, coins) cases match the transcription"));
}

#[test]
fn criterion_02_codec_completeness() {
    let params = test_params(1 << 12, Rational::new(1, 2), 0);
    let t = params.epoch_length;
    let receiver_states = state_classes(&params);
    let sender_states = state_classes(&params);
    let mut checked = 0u64;
    for sender in &sender_states {
        let wire = encode_message(sender, t);
        assert!(wire.to_bits() < 8, "wire form exceeds three bits");
        let decoded = decode_message(Some(wire));
        let full = full_view(sender, t);
        if sender.recruiting && !sender.am_active && sender.round != t - 1 {
            // The one message shape the codec cannot represent: outside the
            // evaluation round, a recruiting message implies an active
            // sender. Such states arise only from adversarial insertion;
            // the decoded view differs from the raw state exactly in the
            // activation flag and nothing else. (At the evaluation round
            // the activation flag is on the wire and the recruiting flag,
            // which no evaluation branch reads, is the omitted one.)
            assert_eq!(decoded.active, Some(true));
            assert_eq!(decoded.color, full.color);
            assert_eq!(decoded.recruiting, full.recruiting);
            assert_eq!(decoded.is_er, full.is_er);
            continue;
        }
        // For every protocol-consistent sender, stepping any receiver off
        // the decoded view is indistinguishable from stepping it off the
        // full four-tuple.
        for receiver in &receiver_states {
            checked += 1;
            let mut coins_a = CoinStream::from_seed_u64(7);
            let mut coins_b = CoinStream::from_seed_u64(7);
            let via_codec = main_step_view(receiver, &decoded, &params, &mut coins_a);
            let via_full = main_step_view(receiver, &full, &params, &mut coins_b);
            assert_eq!(
                via_codec, via_full,
                "codec dropped information: sender {sender:?} receiver {receiver:?}"
            );
        }
    }
    report(
        "2",
        true,
        &format!("decode∘encode preserves every field read by any branch ({checked} pairs)"),
    );
}

#[test]
fn criterion_03_biased_coin() {
    let draws = 1_000_000u64;
    let mut worst_z = 0.0f64;
    let mut stream = CoinStream::from_seed_u64(42);
    for a in 1..=12u32 {
        let p = 0.5f64.powi(a as i32);
        let ones = (0..draws)
            .filter(|_| toss_biased_coin(a, &mut stream))
            .count() as f64;
        let freq = ones / draws as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        let z = (freq - p).abs() / se;
        worst_z = worst_z.max(z);
        assert!(
            z <= 4.0,
            "a={a}: frequency {freq:.6} deviates {z:.2} standard errors from {p:.6}"
        );
    }
    // Leader frequency at N=2^16 is the a=11 coin; check it end to end
    // through the leader-selection subroutine as well.
    let params = test_params(1 << 16, Rational::new(1, 2), 0);
    let initial = popstab::initial_agent_state();
    let leaders = (0..draws)
        .filter(|_| {
            popstab::protocol::determine_if_leader(&initial, &params, &mut stream).am_active
        })
        .count() as f64;
    let p = 1.0 / 2048.0;
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    let z = (leaders / draws as f64 - p).abs() / se;
    assert!(z <= 5.0, "leader frequency off by {z:.2} standard errors");
    report(
        "3",
        true,
        &format!("12 exponents within 4 SE over 1e6 draws (worst {worst_z:.2} SE); leader rate within 5 SE"),
    );
}

#[test]
fn criterion_04_equilibrium_identity() {
    for l in [12u32, 14, 16, 20] {
        let n = 1u64 << l;
        let pred = expected_eval_delta(n / 8, n, Rational::new(1, 2), n / 4)
            .expect("m_h > 0");
        assert!(
            pred.expected_delta.is_zero() && pred.per_pair_honest_delta.is_zero(),
            "equilibrium not exact at N = 2^{l}"
        );
    }
    // Exact pair-delta against direct enumeration over explicit toy agents.
    let p_split = split_probability(&test_params(1 << 16, Rational::new(1, 2), 0));
    let toy_sets: Vec<Vec<(u64, bool)>> = vec![
        vec![(4, false), (4, true), (4, false)],
        vec![(3, true), (3, false), (3, true), (3, false)],
        vec![(12, false)],
        vec![(5, true), (7, false)],
    ];
    for clusters in &toy_sets {
        let mut agents: Vec<bool> = Vec::new();
        for &(size, color) in clusters {
            agents.extend(std::iter::repeat_n(color, size as usize));
        }
        assert!(agents.len() <= 12);
        let mut acc = num_rational::BigRational::zero();
        let mut pairs = 0u64;
        for i in 0..agents.len() {
            for j in i + 1..agents.len() {
                pairs += 1;
                if agents[i] == agents[j] {
                    acc += num_rational::BigRational::from_integer(2.into()) * &p_split;
                } else {
                    acc -= num_rational::BigRational::from_integer(2.into());
                }
            }
        }
        let brute = acc / num_rational::BigRational::from_integer(pairs.into());
        assert_eq!(brute, exact_pair_delta(clusters, &p_split), "{clusters:?}");
    }
    report(
        "4",
        true,
        "expected_eval_delta(m_h = N/8) = 0 exactly for N in {2^12, 2^14, 2^16, 2^20}; pair delta matches enumeration",
    );
}

/// The ten null-adversary stability runs shared by criteria 5, 7 and 8.
fn stability_runs() -> &'static Vec<(RunRecord, Vec<EpochSummary>)> {
    static RUNS: OnceLock<Vec<(RunRecord, Vec<EpochSummary>)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let spec = MainRunSpec::null(1 << 16, 50);
        spec.execute_seeds(&acceptance_seeds())
            .expect("null-adversary runs cannot abort")
    })
}

#[test]
fn criterion_05_desk_scale_stability() {
    let runs = stability_runs();
    let violations: usize = runs
        .iter()
        .map(|(r, _)| r.outcomes.iter().filter(|o| o.violation).count())
        .sum();
    let rounds: usize = runs.iter().map(|(r, _)| r.outcomes.len()).sum();
    assert_eq!(rounds, 10 * 102_400);
    report(
        "5",
        violations == 0,
        &format!("{violations} violations over 10 seeds x 102,400 rounds at N=2^16, alpha=0.1"),
    );
}

/// Observer-side sanity over the shared stability runs: leader counts sit in
/// their binomial bands, recruitment always completes, and an adversary-free
/// run never shows a wrong round value.
#[test]
fn stability_epoch_observables() {
    let mut leaders_total = 0u64;
    let mut leaders_color0 = 0u64;
    let mut epochs = 0u64;
    for (_, summaries) in stability_runs() {
        for s in summaries.iter().filter(|s| s.complete) {
            epochs += 1;
            let (l0, l1) = s.leaders_by_color.expect("complete epochs observe leaders");
            leaders_total += l0 + l1;
            leaders_color0 += l0;
            assert_eq!(
                s.to_recruit_nonzero_at_eval,
                Some(0),
                "recruitment must complete in epoch {} (null adversary)",
                s.epoch_index
            );
            assert_eq!(s.wrong_round_count_max, 0, "no desync source exists");
        }
    }
    // Leaders per epoch ~ Binomial(~N, 1/2048): mean 32, so the mean over
    // 500 epochs has a standard error of ~0.25; allow 5 of those.
    let mean = leaders_total as f64 / epochs as f64;
    assert!(
        (mean - 32.0).abs() < 5.0 * 0.26,
        "mean leaders per epoch {mean:.2} outside the binomial band"
    );
    // Fair colors: color-0 share of all leaders within 5 standard errors.
    let share = leaders_color0 as f64 / leaders_total as f64;
    let se = 0.5 / (leaders_total as f64).sqrt();
    assert!(
        (share - 0.5).abs() < 5.0 * se,
        "leader color share {share:.4} biased (se {se:.5})"
    );
}

#[test]
fn criterion_06_restoring_drift_sign() {
    // As specified: 0.75N and 1.25N starts, 20 epochs, sign correct in at
    // least 9 of the 10 fixed seeds. At this displacement the restoring
    // signal is ~2.4 agents/epoch against a per-epoch noise deviation of
    // ~37, so the per-seed sign is close to a coin toss and the criterion
    // has low statistical power; it is asserted as stated regardless.
    let seeds = acceptance_seeds();
    let low = drift_sign_check(
        1 << 16,
        Rational::new(1, 2),
        20,
        &seeds,
        (3, 4),
        Mutation::None,
        9,
    )
    .unwrap();
    let high = drift_sign_check(
        1 << 16,
        Rational::new(1, 2),
        20,
        &seeds,
        (5, 4),
        Mutation::None,
        9,
    )
    .unwrap();
    report(
        "6",
        low.pass && high.pass,
        &format!("{}; {}", low.detail, high.detail),
    );
}

#[test]
fn criterion_07_bounded_per_epoch_deviation() {
    let tol = LemmaTolerances::default();
    let n = (1u64 << 16) as f64;
    let bound = tol.c_dev * n.sqrt() * 16f64.powi(3);
    let mut max_drift = 0u64;
    let mut epochs = 0usize;
    for (_, summaries) in stability_runs() {
        for s in summaries.iter().filter(|s| s.complete) {
            epochs += 1;
            max_drift = max_drift.max(s.drift.unsigned_abs());
        }
    }
    assert_eq!(epochs, 500);
    report(
        "7",
        (max_drift as f64) <= bound,
        &format!("max |drift| {max_drift} over {epochs} epochs vs frozen bound {bound:.0}"),
    );
}

#[test]
fn criterion_08_per_color_counts() {
    let tol = LemmaTolerances::default();
    let n = (1u64 << 16) as f64;
    let bound = tol.c_color * n.powf(0.75);
    let mut worst = 0.0f64;
    for (_, summaries) in stability_runs() {
        for s in summaries.iter().filter(|s| s.complete) {
            let (c0, c1) = s.colored_by_color_at_eval.expect("complete epochs carry eval data");
            let target = s.size_at_start as f64 / 16.0;
            worst = worst
                .max((c0 as f64 - target).abs())
                .max((c1 as f64 - target).abs());
        }
    }
    report(
        "8",
        worst <= bound,
        &format!("max per-color deviation {worst:.0} vs frozen bound {bound:.0} = c_color * N^(3/4)"),
    );
}

#[test]
fn criterion_09_desync_purge() {
    // floor(N^{1/4}/8) = 4 wrong-round agents per epoch at N = 2^20; the
    // wrong-round count must stay under (1 + 1/gamma) N^{1/4} plus the
    // frozen slack in every round and vanish within two epochs of the last
    // injection.
    let checks = desync_check(1 << 20, 1, 2, Mutation::None).unwrap();
    let pass = checks.iter().all(|c| c.pass);
    let detail: Vec<String> = checks.iter().map(|c| c.detail.clone()).collect();
    let n = (1u64 << 20) as f64;
    let bound = 2.0 * n.powf(0.25) + DESYNC_ROUND_SLACK;
    report(
        "9",
        pass,
        &format!("{} (bound {bound:.0})", detail.join("; ")),
    );
}

#[test]
fn criterion_10_baseline_failure() {
    // Identical conditions for both protocols: N = 4096, null adversary,
    // gamma = 1/4 (at this small N the protocol's finite-size equilibrium
    // bias scales with gamma; 1/4 keeps its 10^5-round displacement far
    // from the +-10% boundary, while attempt2's random walk still exits in
    // a few hundred rounds).
    let seeds = acceptance_seeds();
    let n = 1u64 << 12;
    let run = |protocol: ProtocolKind, seed: u64| -> Option<u64> {
        let params = test_params(n, Rational::new(1, 4), 0);
        let mut cfg = RunConfig::new(params, seed, 100_000);
        cfg.protocol = protocol;
        cfg.stop_on_violation = true;
        run_simulation(&cfg).unwrap().first_violation_round
    };
    use rayon::prelude::*;
    let attempt2_exits: usize = seeds
        .par_iter()
        .filter(|&&s| run(ProtocolKind::Attempt2, s).is_some())
        .count();
    let main_exits: usize = seeds
        .par_iter()
        .filter(|&&s| run(ProtocolKind::Main, s).is_some())
        .count();
    report(
        "10",
        attempt2_exits >= 9 && main_exits == 0,
        &format!(
            "attempt2 left ±10% within 1e5 rounds in {attempt2_exits}/10 seeds; main in {main_exits}/10"
        ),
    );
}

#[test]
fn criterion_11_determinism_across_thread_counts() {
    // Force the parallel step path at a small population so both schedules
    // genuinely differ, then require byte-identical trajectory artifacts.
    let params = test_params(1 << 12, Rational::new(1, 2), 2);
    let mut cfg = RunConfig::for_epochs(params, 5, 2);
    cfg.strategy = StrategyKind::UniformDeleter;
    cfg.step_parallel_threshold = 512;

    let run_in_pool = |threads: usize| -> (RunRecord, Vec<u8>) {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let record = pool.install(|| run_simulation(&cfg).unwrap());
        let mut csv = Vec::new();
        popstab::output::write_trajectory_csv(&mut csv, &cfg, &record.outcomes).unwrap();
        (record, csv)
    };
    let (rec1, csv1) = run_in_pool(1);
    let (rec4, csv4) = run_in_pool(4);
    assert_eq!(rec1, rec4, "records diverge across thread counts");
    report(
        "11",
        csv1 == csv4,
        &format!(
            "trajectory CSV byte-identical across 1-thread and 4-thread executions ({} bytes)",
            csv1.len()
        ),
    );
}

#[test]
fn criterion_12_mutation_sensitivity() {
    // Forcing the split probability to 1 must trip the equilibrium-drift
    // check; removing the consistency check must trip the desync purge.
    // Both checks must pass on the unmutated build (verified by criteria
    // 5-9 and re-checked here at the verify battery's own scales).
    let seeds = acceptance_seeds();
    let clean_eq = equilibrium_check(&seeds, Mutation::None).unwrap();
    let mutant_eq = equilibrium_check(&seeds, Mutation::AlwaysSplit).unwrap();
    let clean_desync = desync_check(1 << 16, 1, 2, Mutation::None).unwrap();
    let mutant_desync = desync_check(1 << 16, 1, 2, Mutation::NoConsistencyCheck).unwrap();
    let clean_ok = clean_eq.pass && clean_desync.iter().all(|c| c.pass);
    let always_split_caught = !mutant_eq.pass;
    let no_consistency_caught = mutant_desync.iter().any(|c| !c.pass);
    report(
        "12",
        clean_ok && always_split_caught && no_consistency_caught,
        &format!(
            "always_split: clean [{}] vs mutant [{}]; no_consistency_check: decay clean pass={} mutant pass={}",
            clean_eq.detail,
            mutant_eq.detail,
            clean_desync.iter().all(|c| c.pass),
            !no_consistency_caught,
        ),
    );
}
