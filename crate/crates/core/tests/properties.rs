//! Property tests for the invariants of each stage.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use chronicle_core::duration::{format_minutes, parse_minutes};
use chronicle_core::evolution::{BurstParams, SourceProfile};
use chronicle_core::relations::bucketize;
use chronicle_core::synth::{random_case, SynthCase, SynthLimits};
use chronicle_core::temporal::{find_temporal_expressions, resolve};
use chronicle_core::{
    brute_force_oracle, build_graph, classify_emission, evaluate_relations, fit_linear, generate_stream, message_time,
    render_summary, Analyzer, Axis, DomainSpec, EmissionProfile, Gazetteer, Lexicon, Linearity, RenderOptions,
    Sentence, StreamKind, StreamParams, TemplateSet, TemporalGrammar, TimeAnchor, WindowPolicy,
};
use chrono::{DateTime, Duration, TimeZone, Utc};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn case(seed: u64) -> SynthCase {
    random_case(&mut ChaCha8Rng::seed_from_u64(seed), &SynthLimits::default())
}

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2004, 9, 1, 0, 0, 0).unwrap()
}

/// Templates covering every relation name and message type of a domain.
fn complete_templates(domain: &DomainSpec) -> TemplateSet {
    let mut text = String::new();
    for name in domain.relation_names() {
        writeln!(text, "template {name}: \"{{sources}}: {name} on {{date}}.\"").unwrap();
    }
    for m in &domain.messages {
        let slots: Vec<String> = m.slots.iter().map(|s| format!("{{{}}}", s.name)).collect();
        writeln!(
            text,
            "template message {}: \"{{source}}: {}({}).\"",
            m.name,
            m.name,
            slots.join(", ")
        )
        .unwrap();
    }
    TemplateSet::parse(&text).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn engine_matches_oracle(seed in any::<u64>()) {
        let c = case(seed);
        let fast: BTreeSet<_> =
            evaluate_relations(&c.messages, &c.domain.relations, &c.window, &c.domain.ontology).into_iter().collect();
        let slow = brute_force_oracle(&c.messages, &c.domain.relations, &c.window, &c.domain.ontology);
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn instances_respect_their_axis(seed in any::<u64>()) {
        let c = case(seed);
        let index: BTreeMap<_, _> = c.messages.iter().map(|m| (m.key(), m)).collect();
        for r in evaluate_relations(&c.messages, &c.domain.relations, &c.window, &c.domain.ontology) {
            let (l, rt) = (index[&r.left], index[&r.right]);
            match r.axis {
                Axis::Synchronic => {
                    prop_assert_ne!(&l.source, &rt.source);
                    prop_assert!(r.distance.is_none());
                }
                Axis::Diachronic => {
                    prop_assert_eq!(&l.source, &rt.source);
                    prop_assert!(l.time.start < rt.time.start);
                }
            }
        }
    }

    #[test]
    fn wider_windows_keep_synchronic_instances(seed in any::<u64>()) {
        let c = case(seed);
        let mut previous: BTreeSet<_> = BTreeSet::new();
        for width in [0, 1440, 2 * 1440, 7 * 1440] {
            let current: BTreeSet<_> = evaluate_relations(
                &c.messages, &c.domain.relations, &WindowPolicy::new(width), &c.domain.ontology,
            )
            .into_iter()
            .filter(|r| r.axis == Axis::Synchronic)
            .collect();
            prop_assert!(previous.is_subset(&current), "width {}", width);
            previous = current;
        }
    }

    #[test]
    fn symmetric_specs_emit_both_directions(seed in any::<u64>()) {
        let c = case(seed);
        let found: BTreeSet<_> =
            evaluate_relations(&c.messages, &c.domain.relations, &c.window, &c.domain.ontology).into_iter().collect();
        let symmetric: BTreeSet<&str> = c
            .domain
            .relations
            .iter()
            .filter(|r| r.symmetric)
            .map(|r| r.name.as_str())
            .collect();
        for r in &found {
            // a shared name may mix symmetric and directed rules
            let only_symmetric = c.domain.relations.iter().filter(|s| s.name == r.name).all(|s| s.symmetric);
            if symmetric.contains(r.name.as_str()) && only_symmetric {
                let mut reverse = r.clone();
                std::mem::swap(&mut reverse.left, &mut reverse.right);
                prop_assert!(found.contains(&reverse), "{:?}", r);
            }
        }
    }

    #[test]
    fn zero_width_on_instants_means_equal_times(seed in any::<u64>()) {
        let mut c = case(seed);
        for (k, m) in c.messages.iter_mut().enumerate() {
            m.time = TimeAnchor::instant(t0() + Duration::minutes((k as i64 * 7919) % 5));
        }
        let window = WindowPolicy::new(0);
        for r in evaluate_relations(&c.messages, &c.domain.relations, &window, &c.domain.ontology) {
            if r.axis == Axis::Synchronic {
                let l = c.messages.iter().find(|m| m.key() == r.left).unwrap();
                let rt = c.messages.iter().find(|m| m.key() == r.right).unwrap();
                prop_assert_eq!(l.time.start, rt.time.start);
            }
        }
        let a = TimeAnchor::instant(t0());
        prop_assert!(window.compatible(&a, &a));
        prop_assert!(!window.compatible(&a, &TimeAnchor::instant(t0() + Duration::minutes(1))));
    }

    #[test]
    fn window_rule_is_dilated_overlap(a in 0i64..20_000, la in 0i64..3000, b in 0i64..20_000, lb in 0i64..3000, w in 0i64..5000) {
        let anchor = |s: i64, l: i64| TimeAnchor::interval(t0() + Duration::minutes(s), t0() + Duration::minutes(s + l)).unwrap();
        let (x, y) = (anchor(a, la), anchor(b, lb));
        // dilate each side by w/2, in half-minutes to stay exact
        let overlap = 2 * a - w <= 2 * (b + lb) + w && 2 * b - w <= 2 * (a + la) + w;
        prop_assert_eq!(WindowPolicy::new(w).compatible(&x, &y), overlap);
        prop_assert_eq!(WindowPolicy::new(w).compatible(&x, &y), WindowPolicy::new(w).compatible(&y, &x));
    }

    #[test]
    fn buckets_partition_messages(seed in any::<u64>()) {
        let c = case(seed);
        let buckets = bucketize(&c.messages, &c.window);
        let members: Vec<_> = buckets.iter().flat_map(|b| b.members.iter().cloned()).collect();
        let unique: BTreeSet<_> = members.iter().cloned().collect();
        prop_assert_eq!(members.len(), c.messages.len());
        prop_assert_eq!(unique.len(), c.messages.len());
        for pair in buckets.windows(2) {
            prop_assert!(pair[1].first_minute - pair[0].last_minute > c.window.width_minutes);
        }
    }

    #[test]
    fn summaries_cover_each_instance_once(seed in any::<u64>()) {
        let c = case(seed);
        let relations = evaluate_relations(&c.messages, &c.domain.relations, &c.window, &c.domain.ontology);
        let graph = build_graph(&c.messages, &relations, &c.window, &c.sources).unwrap();
        let templates = complete_templates(&c.domain);
        let first = render_summary(&graph, &templates, &RenderOptions::default()).unwrap();
        prop_assert!(first.trace.each_edge_used_once());
        let second = render_summary(&graph, &templates, &RenderOptions::default()).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn generated_specs_round_trip(seed in any::<u64>()) {
        let c = case(seed);
        let reloaded = DomainSpec::from_spec_str(&c.domain.to_spec_string()).unwrap();
        prop_assert_eq!(reloaded, c.domain);
    }

    #[test]
    fn tokens_reconstruct_text(text in "[a-zA-Z0-9 ,.'\\-éü]{0,60}") {
        let analyzer = Analyzer::new(Lexicon::new(), Gazetteer::new());
        let tokens = analyzer.tokenize(&text);
        let mut rebuilt = String::new();
        let mut at = 0;
        for t in &tokens {
            prop_assert!(text[at..t.start].chars().all(char::is_whitespace));
            rebuilt.push_str(&text[at..t.start]);
            prop_assert_eq!(&text[t.start..t.end], t.surface.as_str());
            rebuilt.push_str(&t.surface);
            at = t.end;
        }
        prop_assert!(text[at..].chars().all(char::is_whitespace));
        rebuilt.push_str(&text[at..]);
        prop_assert_eq!(rebuilt, text);
    }

    #[test]
    fn past_references_never_follow_publication(
        minutes in 0i64..(400 * 1440),
        n in 1u32..20,
        weekday in 0usize..7,
        form in 0usize..4,
    ) {
        const DAYS: [&str; 7] = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"];
        let published = t0() + Duration::minutes(minutes);
        let text = match form {
            0 => "Yesterday it happened.".to_string(),
            1 => format!("It happened {n} days ago."),
            2 => format!("It happened {n} weeks ago."),
            _ => format!("It happened last {}.", DAYS[weekday]),
        };
        let sentence = Sentence::new(0, &text, &Analyzer::default());
        let grammar = TemporalGrammar::default();
        let found = find_temporal_expressions(&sentence, &grammar);
        prop_assert_eq!(found.len(), 1);
        let anchor = resolve(&found[0], published).unwrap();
        prop_assert!(anchor.start <= published);
        prop_assert!(anchor.date() < published.date_naive());
        let again = message_time(&sentence, None, published, &grammar);
        prop_assert_eq!(again, message_time(&sentence, None, published, &grammar));
        prop_assert_eq!(again, anchor);
    }

    #[test]
    fn message_time_is_total(text in "[a-z ]{0,40}", minutes in 0i64..(400 * 1440)) {
        let published = t0() + Duration::minutes(minutes);
        let sentence = Sentence::new(0, &text, &Analyzer::default());
        let anchor = message_time(&sentence, None, published, &TemporalGrammar::default());
        if find_temporal_expressions(&sentence, &TemporalGrammar::default()).is_empty() {
            prop_assert_eq!(anchor, TimeAnchor::day(published.date_naive()));
        }
    }

    #[test]
    fn exact_periodic_streams_fit_exactly(start in 0i64..100_000, period in 1i64..20_000, n in 3usize..40) {
        let times: Vec<_> = (0..n).map(|k| t0() + Duration::minutes(start + k as i64 * period)).collect();
        let model = fit_linear(&times).unwrap();
        prop_assert_eq!(model.period_minutes, period as f64);
        prop_assert_eq!(model.residual, 0.0);
        prop_assert_eq!(model.t0, times[0]);
    }

    #[test]
    fn jittered_linear_streams_stay_linear(seed in any::<u64>(), jitter in 0.0f64..=0.02, period in 60i64..20_000) {
        let params = StreamParams {
            kind: StreamKind::Linear,
            seed,
            jitter,
            period_minutes: period,
            horizon_minutes: 20 * period,
            ..StreamParams::default()
        };
        for stream in generate_stream(&params).unwrap().streams {
            let model = fit_linear(&stream.timestamps).unwrap();
            prop_assert!(model.residual <= 0.1);
            prop_assert!((model.period_minutes - period as f64).abs() <= 0.02 * period as f64);
        }
    }

    #[test]
    fn bursty_streams_are_non_linear(
        seed in any::<u64>(),
        burst_prob in 0.3f64..=0.7,
        burst_gap in 60.0f64..=240.0,
        quiet_gap in 1440.0f64..=2880.0,
    ) {
        let params = StreamParams {
            kind: StreamKind::NonLinear,
            seed,
            sources: 5,
            horizon_minutes: 30 * 1440,
            burst: BurstParams { burst_prob, burst_gap_minutes: burst_gap, quiet_gap_minutes: quiet_gap },
            ..StreamParams::default()
        };
        let streams = generate_stream(&params).unwrap().into_corpus("bursty").unwrap();
        let report = chronicle_core::analyze(&streams, &chronicle_core::AnalyzeParams::default()).unwrap();
        prop_assert_eq!(report.linearity, Linearity::NonLinear);
    }

    #[test]
    fn emission_ignores_source_order(seed in any::<u64>(), spread in 0i64..180, rotate in 0usize..4) {
        let params = StreamParams {
            kind: if seed % 2 == 0 { StreamKind::Linear } else { StreamKind::NonLinear },
            seed,
            sources: 4,
            offsets_minutes: vec![0, spread, spread / 2, 0],
            ..StreamParams::default()
        };
        let profile = EmissionProfile::from_streams(&generate_stream(&params).unwrap().as_map());
        let mut rotated: Vec<SourceProfile> = profile.sources.clone();
        rotated.rotate_left(rotate);
        let permuted = EmissionProfile { sources: rotated };
        prop_assert_eq!(classify_emission(&profile, 60).unwrap(), classify_emission(&permuted, 60).unwrap());
    }

    #[test]
    fn durations_round_trip(minutes in 0i64..1_000_000) {
        prop_assert_eq!(parse_minutes(&format_minutes(minutes)).unwrap(), minutes);
    }
}
