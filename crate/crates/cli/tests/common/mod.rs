#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chronicle_core::{
    load_corpus, load_gold_messages, Analyzer, Corpus, CorpusFormat, DomainSpec, Gazetteer, Lexicon, Message,
    TemplateSet,
};

pub struct Fixture {
    pub name: &'static str,
    pub dir: PathBuf,
    pub domain: DomainSpec,
    pub analyzer: Analyzer,
    pub corpus: Corpus,
    pub gold: Vec<Message>,
    pub templates_text: String,
    pub templates: TemplateSet,
}

impl Fixture {
    pub fn sources(&self) -> BTreeSet<String> {
        self.corpus.sources.clone()
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
    let templates_text = fs::read_to_string(dir.join("templates.txt")).expect("templates readable");
    let templates = TemplateSet::parse(&templates_text).expect("templates parse");
    Fixture {
        name,
        dir,
        domain,
        analyzer,
        corpus,
        gold,
        templates_text,
        templates,
    }
}

pub const ALL: [&str; 3] = ["scenarios", "football", "hostage"];

/// Runs the built binary.
pub fn chronicle<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_chronicle"))
        .args(args)
        .env_remove("CHRONICLE_LOG")
        .output()
        .expect("binary runs")
}

/// Runs one stage and fails with its stderr when it exits non-zero.
pub fn stage(args: &[&str]) -> Result<Output, String> {
    let out = chronicle(args);
    if out.status.success() {
        Ok(out)
    } else {
        Err(format!(
            "`{}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

/// ingest, extract (gold), relate, analyze and summarize on a fixture.
pub fn run_pipeline(fixture: &str, out_dir: &Path) -> Result<(), String> {
    let dir = fixtures_dir().join(fixture);
    let f = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let out = out_dir.to_string_lossy().into_owned();
    let (spec, corpus, lexicon, gazetteer, gold, templates) = (
        f("domain.spec"),
        f("corpus.jsonl"),
        f("lexicon.tsv"),
        f("gazetteer.tsv"),
        f("gold_messages.jsonl"),
        f("templates.txt"),
    );
    stage(&[
        "ingest",
        "--corpus",
        &corpus,
        "--event-id",
        fixture,
        "--lexicon",
        &lexicon,
        "--gazetteer",
        &gazetteer,
        "--out-dir",
        &out,
    ])?;
    stage(&[
        "extract",
        "--specs",
        &spec,
        "--mode",
        "gold",
        "--gold",
        &gold,
        "--out-dir",
        &out,
    ])?;
    stage(&["relate", "--specs", &spec, "--window", "1d", "--out-dir", &out])?;
    stage(&["analyze", "--out-dir", &out])?;
    stage(&[
        "summarize",
        "--specs",
        &spec,
        "--templates",
        &templates,
        "--window",
        "1d",
        "--out-dir",
        &out,
    ])?;
    Ok(())
}

/// Every file in a directory, by name.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .expect("out dir readable")
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}
