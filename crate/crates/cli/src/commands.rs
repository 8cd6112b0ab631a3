use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use chronicle_core::duration::parse_minutes;
use chronicle_core::extract::{read_messages, write_messages};
use chronicle_core::relations::{read_relations, write_relations};
use chronicle_core::{
    analyze as analyze_corpus, build_graph, evaluate_relations, export_graph, extract_corpus, generate_stream,
    load_corpus, load_gold_messages, load_training_examples, plot_data, render_summary, train_classifier,
    AnalyzeParams, Analyzer, Classifier, Corpus, CorpusFormat, DomainSpec, ExtractorConfig, Gazetteer, GraphFormat,
    Lexicon, Message, RenderOptions, StreamKind, StreamParams, TemplateSet, TemporalGrammar, WindowPolicy,
};
use serde::{Deserialize, Serialize};

use crate::failure::{Failure, Staged};
use crate::{
    AnalyzeArgs, AnalyzerArgs, DomainArgs, ExtractArgs, GraphFormatArg, IngestArgs, KindArg, Mode, OutDir, RelateArgs,
    SimulateArgs, SummarizeArgs, ValidateArgs, WindowArg,
};

pub const CORPUS_ARTIFACT: &str = "corpus.jsonl";
pub const MESSAGES_ARTIFACT: &str = "messages.jsonl";
pub const RELATIONS_ARTIFACT: &str = "relations.jsonl";
pub const REPORT_ARTIFACT: &str = "evolution.json";
pub const PLOT_ARTIFACT: &str = "evolution_plot.csv";
pub const SUMMARY_ARTIFACT: &str = "summary.txt";
pub const TRACE_ARTIFACT: &str = "summary_trace.json";
pub const SIMULATED_ARTIFACT: &str = "simulated_corpus.jsonl";

fn require_file(stage: &'static str, path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::new(
            stage,
            "MissingInput",
            format!("{} does not exist", path.display()),
        ))
    }
}

impl OutDir {
    fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// An artifact written by an earlier stage.
    fn input(&self, stage: &'static str, name: &str, producer: &str) -> Result<PathBuf, Failure> {
        let path = self.artifact(name);
        if path.is_file() {
            Ok(path)
        } else {
            Err(Failure::new(
                stage,
                "MissingArtifact",
                format!("{} not found; run `chronicle {producer}` first", path.display()),
            ))
        }
    }

    fn write(&self, stage: &'static str, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        fs::create_dir_all(&self.out_dir).stage(stage)?;
        let path = self.artifact(name);
        fs::write(&path, bytes)
            .map_err(|e| Failure::new(stage, "Io", format!("failed to write {}: {e}", path.display())))?;
        log::info!("{stage}: wrote {}", path.display());
        Ok(())
    }

    fn corpus(&self, stage: &'static str) -> Result<Corpus, Failure> {
        Corpus::read_artifact(&self.input(stage, CORPUS_ARTIFACT, "ingest")?).stage(stage)
    }
}

impl DomainArgs {
    fn load(&self, stage: &'static str) -> Result<DomainSpec, Failure> {
        let ontology = self.ontology.as_ref().unwrap_or(&self.specs);
        require_file(stage, ontology)?;
        require_file(stage, &self.specs)?;
        DomainSpec::load(ontology, &self.specs).stage(stage)
    }
}

impl AnalyzerArgs {
    fn load(&self, stage: &'static str) -> Result<Analyzer, Failure> {
        let lexicon = match &self.lexicon {
            Some(p) => Lexicon::load(p).stage(stage)?,
            None => Lexicon::new(),
        };
        let gazetteer = match &self.gazetteer {
            Some(p) => Gazetteer::load(p).stage(stage)?,
            None => Gazetteer::new(),
        };
        Ok(Analyzer::new(lexicon, gazetteer))
    }
}

impl WindowArg {
    fn require(&self, stage: &'static str) -> Result<WindowPolicy, Failure> {
        let raw = self.window.as_deref().ok_or_else(|| {
            Failure::new(
                stage,
                "MissingWindow",
                "--window is required when relations are computed",
            )
        })?;
        WindowPolicy::parse(raw).stage(stage)
    }
}

fn jsonl<F>(write: F) -> Vec<u8>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf).expect("writing to memory cannot fail");
    buf
}

fn pretty_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("artifact serializes");
    out.push(b'\n');
    out
}

pub fn ingest(args: &IngestArgs) -> Result<(), Failure> {
    const STAGE: &str = "ingest";
    require_file(STAGE, &args.corpus)?;
    let format: CorpusFormat = args.format.parse().stage(STAGE)?;
    let analyzer = args.analyzer.load(STAGE)?;
    let mut corpus = load_corpus(&args.corpus, format, &analyzer).stage(STAGE)?;
    if let Some(id) = &args.event_id {
        corpus.event_id = id.clone();
    }
    log::info!(
        "ingested {} documents from {} sources",
        corpus.documents.len(),
        corpus.sources.len()
    );
    args.out
        .write(STAGE, CORPUS_ARTIFACT, &jsonl(|b| corpus.write_artifact(b)))
}

pub fn extract(args: &ExtractArgs) -> Result<(), Failure> {
    const STAGE: &str = "extract";
    let domain = args.domain.load(STAGE)?;
    let corpus = args.out.corpus(STAGE)?;
    let messages = match args.mode {
        Mode::Gold => {
            let path = args
                .gold
                .as_ref()
                .ok_or_else(|| Failure::new(STAGE, "MissingInput", "--mode gold needs --gold <FILE>"))?;
            require_file(STAGE, path)?;
            load_gold_messages(path, &corpus, &domain).stage(STAGE)?
        }
        Mode::Rules | Mode::Statistical => {
            let mut config = ExtractorConfig::rules(&domain);
            if let Some(path) = &args.grammar {
                require_file(STAGE, path)?;
                config.grammar = TemporalGrammar::load(path).stage(STAGE)?;
            }
            if args.mode == Mode::Statistical {
                let path = args
                    .training
                    .as_ref()
                    .ok_or_else(|| Failure::new(STAGE, "MissingInput", "--mode statistical needs --training <FILE>"))?;
                require_file(STAGE, path)?;
                let analyzer = args.analyzer.load(STAGE)?;
                let examples = load_training_examples(path, &analyzer).stage(STAGE)?;
                let model = train_classifier(&examples, &domain.type_order()).stage(STAGE)?;
                config.classifier = Classifier::Statistical(model);
            }
            extract_corpus(&corpus, &domain, &config).stage(STAGE)?
        }
    };
    log::info!("extracted {} messages", messages.len());
    args.out
        .write(STAGE, MESSAGES_ARTIFACT, &jsonl(|b| write_messages(&messages, b)))
}

pub fn relate(args: &RelateArgs) -> Result<(), Failure> {
    const STAGE: &str = "relate";
    let domain = args.domain.load(STAGE)?;
    let window = args.window.require(STAGE)?;
    let messages: Vec<Message> = match &args.from_gold {
        Some(path) => {
            require_file(STAGE, path)?;
            let corpus = args.out.corpus(STAGE)?;
            let messages = load_gold_messages(path, &corpus, &domain).stage(STAGE)?;
            args.out
                .write(STAGE, MESSAGES_ARTIFACT, &jsonl(|b| write_messages(&messages, b)))?;
            messages
        }
        None => read_messages(&args.out.input(STAGE, MESSAGES_ARTIFACT, "extract")?, &domain).stage(STAGE)?,
    };
    let relations = evaluate_relations(&messages, &domain.relations, &window, &domain.ontology);
    log::info!("{} relation instances at window {window}", relations.len());
    args.out
        .write(STAGE, RELATIONS_ARTIFACT, &jsonl(|b| write_relations(&relations, b)))
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    const STAGE: &str = "analyze";
    let params = AnalyzeParams {
        residual_threshold: args.residual_threshold,
        emission_tolerance_minutes: parse_minutes(&args.emission_tolerance).stage(STAGE)?,
    };
    if !(params.residual_threshold.is_finite() && params.residual_threshold >= 0.0) {
        return Err(Failure::new(
            STAGE,
            "InvalidParams",
            "--residual-threshold must be a non-negative number",
        ));
    }
    let corpus = args.out.corpus(STAGE)?;
    let report = analyze_corpus(&corpus, &params).stage(STAGE)?;
    let mut plot = Vec::new();
    plot_data(&corpus, &mut plot).stage(STAGE)?;
    args.out.write(STAGE, REPORT_ARTIFACT, &pretty_json(&report))?;
    args.out.write(STAGE, PLOT_ARTIFACT, &plot)
}

pub fn summarize(args: &SummarizeArgs) -> Result<(), Failure> {
    const STAGE: &str = "summarize";
    let domain = args.domain.load(STAGE)?;
    let window = args.window.require(STAGE)?;
    require_file(STAGE, &args.templates)?;
    let templates = TemplateSet::load(&args.templates).stage(STAGE)?;
    templates.validate(&domain).stage(STAGE)?;
    let corpus = args.out.corpus(STAGE)?;
    let messages = read_messages(&args.out.input(STAGE, MESSAGES_ARTIFACT, "extract")?, &domain).stage(STAGE)?;
    let relations = read_relations(&args.out.input(STAGE, RELATIONS_ARTIFACT, "relate")?, &messages).stage(STAGE)?;
    let sources: BTreeSet<String> = corpus.sources.clone();
    let graph = build_graph(&messages, &relations, &window, &sources).stage(STAGE)?;
    let summary = render_summary(&graph, &templates, &RenderOptions { budget: args.budget }).stage(STAGE)?;
    let (format, name) = match args.graph_format {
        GraphFormatArg::Json => (GraphFormat::Json, "graph.json"),
        GraphFormatArg::Dot => (GraphFormat::Dot, "graph.dot"),
    };
    args.out.write(STAGE, SUMMARY_ARTIFACT, summary.text.as_bytes())?;
    args.out.write(STAGE, TRACE_ARTIFACT, &pretty_json(&summary.trace))?;
    args.out.write(STAGE, name, &export_graph(&graph, format))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    #[serde(default)]
    simulate: StreamParams,
}

pub fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    const STAGE: &str = "simulate";
    let mut params = match &args.config {
        Some(path) => {
            require_file(STAGE, path)?;
            let text = fs::read_to_string(path).stage(STAGE)?;
            toml::from_str::<SimulateConfig>(&text)
                .map_err(|e| Failure::new(STAGE, "InvalidConfig", format!("{}: {e}", path.display())))?
                .simulate
        }
        None => StreamParams::default(),
    };
    if let Some(kind) = args.kind {
        params.kind = match kind {
            KindArg::Linear => StreamKind::Linear,
            KindArg::NonLinear => StreamKind::NonLinear,
        };
    }
    if let Some(seed) = args.seed {
        params.seed = seed;
    }
    if let Some(sources) = args.sources {
        params.sources = sources;
    }
    let skeleton = generate_stream(&params).stage(STAGE)?;
    args.out
        .write(STAGE, SIMULATED_ARTIFACT, &jsonl(|b| skeleton.write_raw_corpus(b)))
}

#[derive(Debug, Serialize)]
struct Diagnostics {
    concepts: usize,
    instances: usize,
    scales: usize,
    message_types: usize,
    relation_specs: usize,
    relation_names: usize,
    trigger_rules: usize,
    templates: Option<usize>,
    documents: Option<usize>,
    warnings: Vec<String>,
}

pub fn validate(args: &ValidateArgs) -> Result<(), Failure> {
    const STAGE: &str = "validate";
    let domain = args.domain.load(STAGE)?;
    let mut warnings = Vec::new();
    for m in &domain.messages {
        if !domain.triggers.iter().any(|t| t.msg_type == m.name) {
            warnings.push(format!("message type `{}` has no trigger rule", m.name));
        }
    }
    let templates = match &args.templates {
        Some(path) => {
            require_file(STAGE, path)?;
            let set = TemplateSet::load(path).stage(STAGE)?;
            set.validate(&domain).stage(STAGE)?;
            for r in &domain.relations {
                if set.relation(&r.name, &r.left_type).is_none() {
                    warnings.push(format!("relation `{}` on `{}` has no template", r.name, r.left_type));
                }
            }
            for m in &domain.messages {
                if !set.messages.contains_key(&m.name) {
                    warnings.push(format!("message type `{}` has no message template", m.name));
                }
            }
            warnings.dedup();
            Some(set.relations.len() + set.typed_relations.len() + set.messages.len() + set.ellipsis.len())
        }
        None => None,
    };
    let documents = match &args.corpus {
        Some(path) => {
            require_file(STAGE, path)?;
            Some(
                load_corpus(path, CorpusFormat::JsonlV1, &Analyzer::default())
                    .stage(STAGE)?
                    .documents
                    .len(),
            )
        }
        None => None,
    };
    let diagnostics = Diagnostics {
        concepts: domain.ontology.concepts().count(),
        instances: domain.ontology.instances().count(),
        scales: domain.ontology.scales().count(),
        message_types: domain.messages.len(),
        relation_specs: domain.relations.len(),
        relation_names: domain.relation_names().len(),
        trigger_rules: domain.triggers.len(),
        templates,
        documents,
        warnings,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&diagnostics).expect("diagnostics serialize")
    );
    Ok(())
}
