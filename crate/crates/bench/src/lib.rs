//! Shared inputs for the pipeline benchmarks.

use std::path::{Path, PathBuf};

use chronicle_core::synth::{random_case, SynthCase, SynthLimits};
use chronicle_core::{
    load_corpus, load_gold_messages, Analyzer, Corpus, CorpusFormat, DomainSpec, Gazetteer, Lexicon, Message,
    TemplateSet,
};
use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random domain with exactly `messages` messages.
pub fn synthetic_case(seed: u64, messages: usize) -> SynthCase {
    let limits = SynthLimits {
        max_messages: messages,
        ..SynthLimits::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let case = random_case(&mut rng, &limits);
        if case.messages.len() * 2 >= messages {
            return case;
        }
    }
}

/// `n` weekly timestamps with up to 2% jitter.
pub fn weekly_stream(seed: u64, n: usize) -> Vec<DateTime<Utc>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Utc.with_ymd_and_hms(2004, 9, 1, 0, 0, 0).unwrap();
    (0..n as i64)
        .map(|k| start + Duration::minutes(k * 10080 + rng.gen_range(-200..=200)))
        .collect()
}

pub struct Event {
    pub domain: DomainSpec,
    pub corpus: Corpus,
    pub gold: Vec<Message>,
    pub templates: TemplateSet,
}

pub fn fixture_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// One of the shipped fixtures, fully loaded.
pub fn load_event(name: &str) -> Event {
    let dir = fixture_dir(name);
    let spec = dir.join("domain.spec");
    let domain = DomainSpec::load(&spec, &spec).expect("domain loads");
    let analyzer = Analyzer::new(
        Lexicon::load(&dir.join("lexicon.tsv")).expect("lexicon loads"),
        Gazetteer::load(&dir.join("gazetteer.tsv")).expect("gazetteer loads"),
    );
    let corpus = load_corpus(&dir.join("corpus.jsonl"), CorpusFormat::JsonlV1, &analyzer).expect("corpus loads");
    let gold = load_gold_messages(&dir.join("gold_messages.jsonl"), &corpus, &domain).expect("gold loads");
    let templates = TemplateSet::load(&dir.join("templates.txt")).expect("templates load");
    Event {
        domain,
        corpus,
        gold,
        templates,
    }
}
