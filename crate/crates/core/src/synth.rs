//! Random domains and message sets, for property tests and benchmarks.
//!
//! Domains are produced as spec text and loaded through the regular parser,
//! so every generated case also exercises the DSL.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use chrono::{Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::extract::Message;
use crate::ontology::{Args, DomainSpec};
use crate::relations::WindowPolicy;
use crate::temporal::TimeAnchor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthLimits {
    pub max_instances: usize,
    pub max_message_types: usize,
    pub max_relations: usize,
    pub max_messages: usize,
    pub max_sources: usize,
    pub days: i64,
}

impl Default for SynthLimits {
    fn default() -> Self {
        SynthLimits {
            max_instances: 20,
            max_message_types: 5,
            max_relations: 10,
            max_messages: 200,
            max_sources: 4,
            days: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCase {
    pub spec_text: String,
    pub domain: DomainSpec,
    pub messages: Vec<Message>,
    pub sources: BTreeSet<String>,
    pub window: WindowPolicy,
}

const CONCEPTS: [(&str, Option<&str>); 5] = [
    ("Thing", None),
    ("Agent", Some("Thing")),
    ("Group", Some("Agent")),
    ("Place", Some("Thing")),
    ("Level", Some("Thing")),
];
const LEVELS: [&str; 3] = ["low", "mid", "high"];

/// Random spec text within `limits`.
pub fn random_spec_text<R: Rng>(rng: &mut R, limits: &SynthLimits) -> String {
    let mut text = String::new();
    for (name, parent) in CONCEPTS {
        match parent {
            Some(p) => writeln!(text, "concept {name} < {p}").unwrap(),
            None => writeln!(text, "concept {name}").unwrap(),
        }
    }
    writeln!(text, "scale Level = {}", LEVELS.join(" < ")).unwrap();
    let free = limits.max_instances.saturating_sub(LEVELS.len()).max(1);
    let n_instances = rng.gen_range(1..=free);
    for i in 0..n_instances {
        let concept = ["Thing", "Agent", "Group", "Place"].choose(rng).unwrap();
        writeln!(text, "instance i{i} : {concept}").unwrap();
    }

    let concepts: Vec<&str> = CONCEPTS.iter().map(|c| c.0).collect();
    let n_types = rng.gen_range(1..=limits.max_message_types.max(1));
    let mut types: Vec<(String, Vec<(String, &str)>)> = Vec::new();
    for t in 0..n_types {
        let n_slots = rng.gen_range(1..=3);
        let slots: Vec<(String, &str)> = (0..n_slots)
            .map(|s| (format!("s{s}"), *concepts.choose(rng).unwrap()))
            .collect();
        let decl: Vec<String> = slots.iter().map(|(s, c)| format!("{s}:{c}")).collect();
        write!(text, "message m{t}({})", decl.join(", ")).unwrap();
        if slots.len() >= 2 && rng.gen_bool(0.3) {
            write!(text, " where s0 != s1").unwrap();
        }
        text.push('\n');
        types.push((format!("m{t}"), slots));
    }

    let n_relations = rng.gen_range(0..=limits.max_relations);
    for r in 0..n_relations {
        let (left, lslots) = types.choose(rng).unwrap();
        let (right, rslots) = types.choose(rng).unwrap();
        let synchronic = rng.gen_bool(0.5);
        // shared names express disjunction
        let name = format!("r{}", if rng.gen_bool(0.2) { r / 2 } else { r });
        write!(
            text,
            "relation {name} axis={} left={left} right={right}",
            if synchronic { "synchronic" } else { "diachronic" }
        )
        .unwrap();
        if synchronic && left == right && rng.gen_bool(0.4) {
            text.push_str(" symmetric");
        }
        if !synchronic {
            match rng.gen_range(0..3) {
                0 => write!(text, " distance=={}", rng.gen_range(0..4)).unwrap(),
                1 => write!(text, " distance>={}", rng.gen_range(0..3)).unwrap(),
                _ => {}
            }
        }
        let mut atoms = Vec::new();
        for _ in 0..rng.gen_range(0..=3) {
            let (ls, lc) = lslots.choose(rng).unwrap();
            let (rs, rc) = rslots.choose(rng).unwrap();
            let atom = match rng.gen_range(0..4) {
                0 => format!("left.{ls} == right.{rs}"),
                1 => format!("left.{ls} != right.{rs}"),
                2 if *lc == "Level" && *rc == "Level" => {
                    format!("left.{ls} {} right.{rs}", if rng.gen_bool(0.5) { "<" } else { ">" })
                }
                _ if *lc == "Level" => format!("left.{ls} == \"{}\"", LEVELS.choose(rng).unwrap()),
                _ => format!("left.{ls} == right.{rs}"),
            };
            atoms.push(atom);
        }
        if !atoms.is_empty() {
            write!(text, " where {}", atoms.join(" && ")).unwrap();
        }
        text.push('\n');
    }
    text
}

/// Random messages over `domain`, each in its own sentence.
pub fn random_messages<R: Rng>(rng: &mut R, domain: &DomainSpec, limits: &SynthLimits) -> Vec<Message> {
    let n_sources = rng.gen_range(2..=limits.max_sources.max(2));
    let n_messages = rng.gen_range(0..=limits.max_messages);
    let t0 = Utc.with_ymd_and_hms(2004, 9, 1, 0, 0, 0).unwrap();
    let horizon = limits.days.max(1) * 1440;
    let mut reports: Vec<usize> = vec![0; n_sources];
    let mut messages = Vec::with_capacity(n_messages);
    for k in 0..n_messages {
        let s = rng.gen_range(0..n_sources);
        if k == 0 || rng.gen_bool(0.5) {
            reports[s] += 1;
        }
        let report = reports[s];
        let spec = domain.messages.choose(rng).unwrap();
        let mut args = Args::new();
        for slot in &spec.slots {
            let pool: Vec<&str> = domain
                .ontology
                .instances()
                .filter(|(_, def)| domain.ontology.is_subtype(&def.concept, &slot.concept))
                .map(|(n, _)| n)
                .collect();
            let value = if pool.is_empty() || rng.gen_bool(0.1) {
                None
            } else {
                Some(pool.choose(rng).unwrap().to_string())
            };
            args.insert(slot.name.clone(), value);
        }
        if spec.constraints_hold(&args, &domain.ontology).is_err() {
            if let Some(first) = spec.slots.first() {
                args.insert(first.name.clone(), None);
            }
        }
        let minute = rng.gen_range(0..horizon);
        let time = match rng.gen_range(0..3) {
            0 => TimeAnchor::day((t0 + Duration::minutes(minute)).date_naive()),
            1 => TimeAnchor::instant(t0 + Duration::minutes(minute)),
            _ => TimeAnchor::instant(t0 + Duration::minutes(minute - minute % 720)),
        };
        messages.push(Message {
            msg_type: spec.name.clone(),
            args,
            time,
            source: format!("S{s}"),
            doc_id: format!("S{s}-{report:03}"),
            sentence_index: k,
            report_index: report,
            trigger_span: None,
        });
    }
    messages
}

pub const WINDOWS: [i64; 5] = [0, 60, 1440, 2 * 1440, 7 * 1440];

pub fn random_case<R: Rng>(rng: &mut R, limits: &SynthLimits) -> SynthCase {
    let spec_text = random_spec_text(rng, limits);
    let domain =
        DomainSpec::from_spec_str(&spec_text).unwrap_or_else(|e| panic!("generated spec must load: {e}\n{spec_text}"));
    let messages = random_messages(rng, &domain, limits);
    let sources = messages.iter().map(|m| m.source.clone()).collect();
    let window = WindowPolicy::new(*WINDOWS.choose(rng).unwrap());
    SynthCase {
        spec_text,
        domain,
        messages,
        sources,
        window,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_specs_load_and_respect_limits() {
        let limits = SynthLimits::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let case = random_case(&mut rng, &limits);
            assert!(case.domain.ontology.instances().count() <= limits.max_instances);
            assert!(case.domain.messages.len() <= limits.max_message_types);
            assert!(case.domain.relations.len() <= limits.max_relations);
            assert!(case.messages.len() <= limits.max_messages);
        }
    }

    #[test]
    fn generated_messages_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let case = random_case(&mut rng, &SynthLimits::default());
            for m in &case.messages {
                crate::extract::validate_message(m, &case.domain, "synth").unwrap();
            }
        }
    }
}
