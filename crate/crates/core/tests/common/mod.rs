#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chronicle_core::{
    load_corpus, load_gold_messages, Analyzer, Corpus, CorpusFormat, DomainSpec, Gazetteer, Lexicon, Message,
    TemplateSet,
};

pub struct Fixture {
    pub name: &'static str,
    pub dir: PathBuf,
    pub domain: DomainSpec,
    pub corpus: Corpus,
    pub gold: Vec<Message>,
    pub templates: TemplateSet,
}

impl Fixture {
    pub fn sources(&self) -> BTreeSet<String> {
        self.corpus.documents.iter().map(|d| d.source.clone()).collect()
    }
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn load(name: &'static str) -> Fixture {
    let dir = fixtures_dir().join(name);
    let spec = dir.join("domain.spec");
    let domain = DomainSpec::load(&spec, &spec).expect("domain loads");
    let analyzer = Analyzer::new(
        Lexicon::load(&dir.join("lexicon.tsv")).expect("lexicon"),
        Gazetteer::load(&dir.join("gazetteer.tsv")).expect("gazetteer"),
    );
    let corpus = load_corpus(&dir.join("corpus.jsonl"), CorpusFormat::JsonlV1, &analyzer).expect("corpus loads");
    let gold = load_gold_messages(&dir.join("gold_messages.jsonl"), &corpus, &domain).expect("gold loads");
    let templates = TemplateSet::load(&dir.join("templates.txt")).expect("templates load");
    templates.validate(&domain).expect("templates cover the domain");
    Fixture {
        name,
        dir,
        domain,
        corpus,
        gold,
        templates,
    }
}

pub const ALL: [&str; 3] = ["scenarios", "football", "hostage"];
