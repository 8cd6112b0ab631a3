//! Multi-document summarization of evolving events.
//!
//! The pipeline ingests a corpus of dated reports from several sources,
//! extracts typed messages, connects them with synchronic and diachronic
//! relations, characterizes how the event evolved and renders the
//! resulting graph as text.

pub mod corpus;
pub mod duration;
pub mod evolution;
pub mod extract;
pub mod ontology;
pub mod relations;
pub mod summarize;
pub mod synth;
pub mod temporal;

pub use corpus::{
    load_corpus, Analyzer, Corpus, CorpusError, CorpusFormat, Document, Gazetteer, Lexicon, Sentence, Token, TokenSpan,
};
pub use evolution::{
    analyze, classify_emission, classify_linearity, fit_linear, generate_stream, plot_data, AnalyzeParams, Emission,
    EmissionProfile, EvolutionError, EvolutionReport, LinearModel, Linearity, StreamKind, StreamParams, StreamSkeleton,
};
pub use extract::{
    extract_corpus, extract_messages, load_gold_messages, load_training_examples, train_classifier, Classifier,
    ClassifierModel, ExtractError, ExtractorConfig, Message, MessageRef, TriggerRule,
};
pub use ontology::{
    load_message_specs, load_ontology, load_relation_specs, Args, Axis, ConditionAtom, DistanceConstraint, DomainSpec,
    MessageTypeSpec, Ontology, OntologyError, RelationSpec, SlotRef, SlotSpec,
};
pub use relations::{
    detect_ellipsis, diachronic_pairs, evaluate_relations, oracle::brute_force_oracle, synchronic_pairs,
    EllipsisReport, RelationError, RelationInstance, WindowPolicy,
};
pub use summarize::{
    build_graph, export_graph, render_summary, CoverageTrace, GraphFormat, RelationGraph, RenderOptions, Summary,
    SummaryError, TemplateSet,
};
pub use temporal::{message_time, AnchorKind, TemporalError, TemporalGrammar, TimeAnchor};
