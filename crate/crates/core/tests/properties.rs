mod common;

use contra_core::dbs::{
    build_prompt, dynamic_beam_sample, make_mock_policy, mixed_sample, oracle_trace, DbsConfig,
    PolicyKind,
};
use contra_core::fixtures::{load_golden, synthetic_trace};
use contra_core::grpo::{group_advantages, RolloutGroup, DEFAULT_EPSILON};
use contra_core::literal::{
    parse_literal, render_literal, values_equal, EqualityConfig, LiteralError, LiteralValue,
};
use contra_core::parser::{check_format, parse_partial, parse_trace};
use contra_core::reward::{
    incremental_process_score, overall_reward, process_reward, rcs, score_text,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXACT: EqualityConfig = EqualityConfig::EXACT;

fn literal_from_seed(seed: u64, depth: usize) -> LiteralValue {
    common::random_literal(&mut ChaCha8Rng::seed_from_u64(seed), depth)
}

fn arb_hashable() -> impl Strategy<Value = LiteralValue> {
    let leaf = prop_oneof![
        Just(LiteralValue::None),
        any::<bool>().prop_map(LiteralValue::Bool),
        any::<i64>().prop_map(LiteralValue::int),
        any::<f64>()
            .prop_filter("finite", |f| f.is_finite())
            .prop_map(LiteralValue::Float),
        "[a-z'\"\\\\\n é]{0,6}".prop_map(LiteralValue::Text),
    ];
    leaf.prop_recursive(2, 8, 3, |inner| {
        prop::collection::vec(inner, 0..3).prop_map(LiteralValue::Tuple)
    })
}

fn arb_literal() -> impl Strategy<Value = LiteralValue> {
    arb_hashable().prop_recursive(5, 48, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(LiteralValue::List),
            prop::collection::vec(inner.clone(), 0..4).prop_map(LiteralValue::Tuple),
            prop::collection::vec(arb_hashable(), 0..4).prop_map(LiteralValue::set),
            prop::collection::vec((arb_hashable(), inner), 0..4).prop_map(LiteralValue::mapping),
        ]
    })
}

proptest! {
    #[test]
    fn literal_round_trip(v in arb_literal()) {
        let text = render_literal(&v).unwrap();
        let back = parse_literal(&text).unwrap();
        prop_assert!(values_equal(&back, &v, &EXACT), "{text}");
        prop_assert_eq!(render_literal(&back).unwrap(), text);
    }

    #[test]
    fn literal_round_trip_generated(seed in any::<u64>()) {
        let v = literal_from_seed(seed, 5);
        let back = parse_literal(&render_literal(&v).unwrap()).unwrap();
        prop_assert!(values_equal(&back, &v, &EXACT));
    }

    #[test]
    fn equality_is_reflexive_and_symmetric(a in arb_literal(), b in arb_literal()) {
        prop_assert!(values_equal(&a, &a, &EXACT));
        prop_assert_eq!(values_equal(&a, &b, &EXACT), values_equal(&b, &a, &EXACT));
    }

    // a small domain so that equal triples actually occur
    #[test]
    fn equality_is_transitive(xs in prop::collection::vec(0u8..6, 3)) {
        let pick = |k: u8| match k {
            0 => LiteralValue::int(1),
            1 => LiteralValue::Float(1.0),
            2 => LiteralValue::Bool(true),
            3 => LiteralValue::int(0),
            4 => LiteralValue::Bool(false),
            _ => LiteralValue::Float(-0.0),
        };
        let (a, b, c) = (pick(xs[0]), pick(xs[1]), pick(xs[2]));
        if values_equal(&a, &b, &EXACT) && values_equal(&b, &c, &EXACT) {
            prop_assert!(values_equal(&a, &c, &EXACT));
        }
    }

    #[test]
    fn calls_and_attributes_are_never_evaluated(
        v in arb_literal(),
        form in 0usize..6,
        name in "[a-z_][a-z0-9_]{0,6}",
    ) {
        let text = render_literal(&v).unwrap();
        let mutated = match form {
            0 => format!("{name}({text})"),
            1 => format!("[{text}, {name}()]"),
            2 => format!("{{'k': {name}.attr}}"),
            3 => format!("({text}, __import__('os').system('true'))"),
            4 => format!("{name}.{name}({text})"),
            _ => format!("[{text}][0]"),
        };
        match parse_literal(&mutated) {
            Err(LiteralError::UnsafeExpression { .. }) => {}
            other => prop_assert!(false, "{mutated:?} gave {other:?}"),
        }
    }

    #[test]
    fn parsing_is_deterministic(cut in 0usize..2000, junk in "[\\[\\]A-Z/ \n{}':0-9]{0,20}") {
        let case = load_golden("case3_f14").unwrap();
        let text = case.rollout;
        let cut = cut.min(text.len());
        let cut = (0..=cut).rev().find(|&i| text.is_char_boundary(i)).unwrap();
        let mangled = format!("{}{}{}", &text[..cut], junk, &text[cut..]);
        prop_assert_eq!(parse_trace(&mangled), parse_trace(&mangled));
        prop_assert_eq!(parse_partial(&mangled), parse_partial(&mangled));
    }

    #[test]
    fn truncation_at_locals_boundaries_is_partial_valid(seed in 0u64..5000) {
        let gt = synthetic_trace(seed);
        let text = oracle_trace(&gt);
        prop_assert!(check_format(&gt, &text, &EXACT).diagnostic.passed());
        for (i, (end, _)) in text.match_indices("[/LOCALS]").enumerate() {
            let prefix = &text[..end + "[/LOCALS]".len()];
            let p = parse_partial(prefix);
            prop_assert!(p.failure.is_none(), "{:?}", p.failure);
            prop_assert_eq!(p.blocks.len(), i + 1);
        }
    }

    #[test]
    fn reward_invariants(seed in any::<u64>(), bad in proptest::option::of(0usize..8), alpha in 0.0f64..4.0) {
        let gt = synthetic_trace(seed);
        let bad = bad.filter(|&b| b < gt.block_count());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let text = common::corrupted_trace(&gt, bad, &mut rng);
        let c = check_format(&gt, &text, &EXACT);
        prop_assert!(c.diagnostic.passed());
        let b = overall_reward(&gt, c.parsed.as_ref(), &c.diagnostic, alpha, &EXACT);

        // gate soundness and range
        if b.gate_open {
            prop_assert_eq!(b.r_proc, 2.0);
        }
        prop_assert!((0.0..=2.0).contains(&b.r_proc));
        prop_assert!(b.r_res == 0.0 || b.r_res == 2.0);
        prop_assert!(b.total >= 0.0 && b.total <= 2.0 * alpha + 2.0);
        prop_assert_eq!(b.total, alpha * b.r_proc + if b.gate_open { b.r_res } else { 0.0 });

        // hacking resistance: right answer, wrong trace
        if bad.is_some() {
            prop_assert!(!b.gate_open);
            prop_assert_eq!(b.total, alpha * b.r_proc);
            prop_assert!(b.r_proc < 2.0);
        }

        // telescoping
        let inc = incremental_process_score(&gt, &parse_partial(&text), &EXACT);
        prop_assert_eq!(inc, b.r_proc);

        // coupling with the consistency score
        let r = rcs(&gt, c.parsed.as_ref(), &c.diagnostic, &EXACT);
        prop_assert_eq!(b.r_proc == 2.0, r == 1.0);
    }

    #[test]
    fn prefix_blocking(seed in any::<u64>(), flip in 0usize..8) {
        let gt = synthetic_trace(seed);
        let flip = flip % gt.block_count();
        let good = oracle_trace(&gt);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bad = common::corrupted_trace(&gt, Some(flip), &mut rng);
        let before = score_text(&gt, &good, 1.0, &EXACT);
        let after = score_text(&gt, &bad, 1.0, &EXACT);
        prop_assert!(after.r_proc <= before.r_proc);
        let w: u64 = gt.blocks()[..flip].iter().map(|b| b.weight).sum();
        prop_assert_eq!(after.weighted_prefix, w);
        prop_assert!(after.prefix_products[flip..].iter().all(|p| !p));
    }

    #[test]
    fn format_failure_zeroes_rewards(seed in any::<u64>(), line in 0usize..200, kind in 0usize..3) {
        let gt = synthetic_trace(seed);
        let text = oracle_trace(&gt);
        let tags = common::tag_line_indices(&text);
        let i = tags[line % tags.len()];
        let l = text.split('\n').nth(i).unwrap();
        let mutated = match kind {
            0 => common::replace_line(&text, i, &l.to_lowercase()),
            1 => common::replace_line(&text, i, &format!(" {l}")),
            _ => common::replace_line(&text, i, &format!("{l} ")),
        };
        let c = check_format(&gt, &mutated, &EXACT);
        prop_assert!(!c.diagnostic.passed());
        let (r_proc, _) = process_reward(&gt, c.parsed.as_ref(), &c.diagnostic, &EXACT);
        prop_assert_eq!(r_proc, 0.0);
        prop_assert_eq!(score_text(&gt, &mutated, 1.0, &EXACT).total, 0.0);
    }

    #[test]
    fn advantages_sum_to_zero_and_ignore_shifts(
        rewards in prop::collection::vec(0.0f64..4.0, 1..16),
        shift in -100.0f64..100.0,
    ) {
        let g = RolloutGroup::new("p", rewards.clone(), DEFAULT_EPSILON).unwrap();
        let a = group_advantages(&g);
        prop_assert!(a.iter().sum::<f64>().abs() <= rewards.len() as f64 * 1e-12);
        let shifted = RolloutGroup::new("p", rewards.iter().map(|r| r + shift).collect(), DEFAULT_EPSILON).unwrap();
        for (x, y) in a.iter().zip(group_advantages(&shifted)) {
            prop_assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn scaling_preserves_advantage_order(
        ks in prop::collection::vec(0u32..=12, 1..16),
        scale in 0.01f64..100.0,
    ) {
        let rewards: Vec<f64> = ks.iter().map(|&k| f64::from(k) * 0.4).collect();
        let order = |xs: &[f64]| {
            let mut idx: Vec<usize> = (0..xs.len()).collect();
            idx.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
            idx
        };
        let a = group_advantages(&RolloutGroup::new("p", rewards.clone(), DEFAULT_EPSILON).unwrap());
        let scaled: Vec<f64> = rewards.iter().map(|r| r * scale).collect();
        let b = group_advantages(&RolloutGroup::new("p", scaled, DEFAULT_EPSILON).unwrap());
        prop_assert_eq!(order(&a), order(&b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dbs_invariants(seed in any::<u64>(), n in 1usize..12, kind in 0usize..3) {
        let gt = synthetic_trace(seed);
        let kind = [PolicyKind::Oracle, PolicyKind::Noisy(0.3), PolicyKind::Gibberish][kind].clone();
        let policy = make_mock_policy(kind.clone(), &gt, seed).unwrap();
        let cfg = DbsConfig { n, seed, ..DbsConfig::default() };
        let prompt = build_prompt(&gt);
        let run = dynamic_beam_sample(&policy, &prompt, &gt, cfg, &EXACT).unwrap();
        prop_assert_eq!(run.trajectories.len(), n);

        for s in &run.stages {
            if let Some(kept) = s.kept_score {
                let top = s.survivors.iter().copied().fold(0.0, f64::max);
                prop_assert_eq!(kept, top);
            }
            let carried: usize = s.allocation.iter().map(|(_, c)| c).sum();
            prop_assert_eq!(carried, s.survivors.len());
            prop_assert!(s.stage <= cfg.t_max);
        }
        for t in &run.trajectories {
            prop_assert!((0.0..=2.0).contains(&t.score));
            let c = check_format(&gt, &t.text, &EXACT);
            if c.diagnostic.passed() {
                let (r, _) = process_reward(&gt, c.parsed.as_ref(), &c.diagnostic, &EXACT);
                prop_assert_eq!(t.score, r);
            }
        }

        let again = dynamic_beam_sample(&policy, &prompt, &gt, cfg, &EXACT).unwrap();
        prop_assert_eq!(&again, &run);

        if n % 2 == 0 {
            let m = mixed_sample(&policy, &prompt, &gt, n, cfg, &EXACT).unwrap();
            prop_assert_eq!(m.trajectories.len(), n);
        }
    }
}
