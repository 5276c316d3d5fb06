use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use chrono::Utc;
use clap::{Parser, Subcommand, ValueEnum};
use mwo_core::classify::{evaluate, ModelFile, ModelKind, Oversampler};
use mwo_core::corpus::{ingest_csv, preprocess, read_fleet_csv, write_orders_csv, ColumnMapping, TokenDoc, WorkOrder};
use mwo_core::features::{TfidfVariant, Weighting};
use mwo_core::kpi::{compare, KpiReport};
use mwo_core::pipeline::{classifier_kpi, expert_kpi, labeled_docs, predict_labels, rule_kpi, train_model, TrainOptions};
use mwo_core::rules::RuleId;
use mwo_core::synth::generate;
use mwo_core::tagging::{corpus_fingerprint, TagVocabulary, TaggingSession};
use mwo_core::ZeusCode;

use crate::api::{router, AppState, SessionHandle};
use crate::config::AppConfig;

#[derive(Debug, Parser)]
#[command(name = "mwo", version, about = "Reliability KPIs from maintenance work orders")]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML settings file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Source {
    Expert,
    Classifier,
    Rule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeatureKind {
    Counts,
    Tfidf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read a raw CSV export into the canonical corpus layout.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Column mapping (TOML); defaults to the `[columns]` config section.
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Accepted/rejected row report (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Clean descriptions into token documents (JSON lines).
    Preprocess {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Dropped-row report (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train a classifier on a stratified split and report held-out scores.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "lr")]
        model: ModelKind,
        #[arg(long, default_value = "ro")]
        oversample: Oversampler,
        /// Overrides the model family's default weighting.
        #[arg(long)]
        features: Option<FeatureKind>,
        #[arg(long)]
        output: PathBuf,
        /// Metrics report (JSON).
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Score a trained model on every labeled order of a corpus.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Predict a ZEUS code for every order.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// CSV with `work_order_id,zeus_code`.
        #[arg(long)]
        output: PathBuf,
    },
    /// Compute MTBF and failure rates from one labeling route.
    Kpi {
        #[arg(long, value_enum)]
        source: Source,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        fleet: PathBuf,
        /// Predictions CSV (classifier source).
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Model file to predict with (classifier source, instead of --predictions).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Tag vocabulary CSV (rule source).
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long, default_value = "R4")]
        rule: RuleId,
        /// Overrides the configured failure alias.
        #[arg(long)]
        failure_alias: Option<String>,
        /// Labeling or tagging effort recorded with the report.
        #[arg(long, default_value_t = 0.0)]
        effort_hours: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with planted ground truth.
    Synth {
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long)]
        turbines: Option<usize>,
        #[arg(long)]
        negation_rate: Option<f64>,
        #[arg(long)]
        noise_rate: Option<f64>,
    },
    /// Serve the tagging API for one corpus.
    TagServe {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        fleet: PathBuf,
        /// Session journal; defaults to `<corpus>.journal.jsonl`.
        #[arg(long)]
        journal: Option<PathBuf>,
        #[arg(long, env = "MWO_ADDR", default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// Compare KPI reports against a reference.
    Compare {
        #[arg(long, num_args = 2.., required = true)]
        reports: Vec<PathBuf>,
        /// Method name of the reference; defaults to the expert-label report.
        #[arg(long)]
        reference: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_corpus(path: &Path, cfg: &AppConfig) -> anyhow::Result<Vec<WorkOrder>> {
    let ingested = ingest_csv(path, &cfg.columns)?;
    if !ingested.report.rejected.is_empty() {
        eprintln!(
            "warning: {} row(s) of {} rejected",
            ingested.report.rejected.len(),
            path.display()
        );
    }
    Ok(ingested.orders)
}

fn tokenize_corpus(orders: &[WorkOrder], cfg: &AppConfig) -> anyhow::Result<Vec<TokenDoc>> {
    let (stop, junk) = cfg.word_lists()?;
    Ok(preprocess(orders, &stop, &junk).docs)
}

fn read_predictions(path: &Path) -> anyhow::Result<BTreeMap<String, ZeusCode>> {
    #[derive(serde::Deserialize)]
    struct Row {
        work_order_id: String,
        zeus_code: String,
    }
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = BTreeMap::new();
    for row in rdr.deserialize::<Row>() {
        let row = row?;
        let code: ZeusCode = row.zeus_code.parse()?;
        out.insert(row.work_order_id, code);
    }
    Ok(out)
}

fn model_id(path: &Path) -> String {
    path.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned())
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = AppConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Ingest {
            input,
            mapping,
            output,
            report,
        } => {
            let mapping = match mapping {
                Some(p) => ColumnMapping::from_file(p)?,
                None => cfg.columns.clone(),
            };
            let ingested = ingest_csv(&input, &mapping)?;
            let file = fs::File::create(&output).with_context(|| format!("creating {}", output.display()))?;
            write_orders_csv(file, &ingested.orders)?;
            if let Some(p) = report {
                write_json(&p, &ingested.report)?;
            }
            println!(
                "accepted {} row(s), rejected {}",
                ingested.orders.len(),
                ingested.report.rejected.len()
            );
        }
        Command::Preprocess { corpus, output, report } => {
            let orders = load_corpus(&corpus, &cfg)?;
            let (stop, junk) = cfg.word_lists()?;
            let pre = preprocess(&orders, &stop, &junk);
            let mut lines = String::new();
            for d in &pre.docs {
                lines.push_str(&serde_json::to_string(d)?);
                lines.push('\n');
            }
            fs::write(&output, lines).with_context(|| format!("writing {}", output.display()))?;
            if let Some(p) = report {
                write_json(&p, &pre.report)?;
            }
            println!("kept {} document(s), dropped {}", pre.report.kept, pre.report.dropped_count);
        }
        Command::Train {
            corpus,
            model,
            oversample,
            features,
            output,
            metrics,
        } => {
            let orders = load_corpus(&corpus, &cfg)?;
            let docs = tokenize_corpus(&orders, &cfg)?;
            let options = TrainOptions {
                model,
                oversampler: oversample,
                weighting: features.map(|f| match f {
                    FeatureKind::Counts => Weighting::Count,
                    FeatureKind::Tfidf => Weighting::Tfidf(TfidfVariant::default()),
                }),
                seed,
                classify: cfg.classify.clone(),
            };
            let outcome = train_model(&orders, &docs, &options)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            outcome.model.save(&output)?;
            if let Some(p) = metrics {
                write_json(&p, &outcome.report)?;
            }
            println!(
                "trained {} on {} document(s), evaluated on {}",
                model.short_name(),
                outcome.n_train,
                outcome.n_test
            );
            print!("{}", outcome.report.render());
        }
        Command::Evaluate { model, corpus, output } => {
            let model = ModelFile::load(&model)?;
            let orders = load_corpus(&corpus, &cfg)?;
            let (docs, labels) = labeled_docs(&orders, &tokenize_corpus(&orders, &cfg)?);
            if docs.is_empty() {
                bail!("{} has no labeled orders", corpus.display());
            }
            let predicted: Vec<ZeusCode> = model.predict_docs(&docs)?.into_iter().map(|p| p.code).collect();
            let report = evaluate(&predicted, &labels, cfg.classify.min_class_support)?;
            if let Some(p) = output {
                write_json(&p, &report)?;
            }
            print!("{}", report.render());
        }
        Command::Classify { model, corpus, output } => {
            let model = ModelFile::load(&model)?;
            let orders = load_corpus(&corpus, &cfg)?;
            let predictions = predict_labels(&model, &tokenize_corpus(&orders, &cfg)?)?;
            let mut wtr = csv::Writer::from_path(&output).with_context(|| format!("creating {}", output.display()))?;
            wtr.write_record(["work_order_id", "zeus_code"])?;
            for (id, code) in &predictions {
                wtr.write_record([id.as_str(), code.as_str()])?;
            }
            wtr.flush()?;
            println!("classified {} of {} order(s)", predictions.len(), orders.len());
        }
        Command::Kpi {
            source,
            corpus,
            fleet,
            predictions,
            model,
            vocab,
            rule,
            failure_alias,
            effort_hours,
            output,
        } => {
            let orders = load_corpus(&corpus, &cfg)?;
            let fleet = read_fleet_csv(&fleet)?;
            let report: KpiReport = match source {
                Source::Expert => expert_kpi(&orders, &fleet, &cfg.kpi, effort_hours)?,
                Source::Classifier => {
                    let (labels, id) = match (predictions, model) {
                        (Some(p), None) => (read_predictions(&p)?, model_id(&p)),
                        (None, Some(m)) => {
                            let file = ModelFile::load(&m)?;
                            (predict_labels(&file, &tokenize_corpus(&orders, &cfg)?)?, model_id(&m))
                        }
                        _ => bail!("the classifier source needs exactly one of --predictions or --model"),
                    };
                    classifier_kpi(&orders, &labels, &id, &fleet, &cfg.kpi, effort_hours)?
                }
                Source::Rule => {
                    let Some(vocab) = vocab else {
                        bail!("the rule source needs --vocab");
                    };
                    let vocabulary = TagVocabulary::load_csv(&vocab)?;
                    let mut rules = cfg.rules.clone();
                    if let Some(alias) = failure_alias {
                        rules.failure_alias = alias;
                    }
                    let docs = tokenize_corpus(&orders, &cfg)?;
                    let (selection, report) =
                        rule_kpi(&orders, &docs, &vocabulary, rule, &rules, &fleet, &cfg.kpi, effort_hours)?;
                    println!(
                        "{rule}: {} order(s) selected, {} excluded by negation",
                        selection.selected_ids.len(),
                        selection.excluded_by_negation.len()
                    );
                    report
                }
            };
            if let Some(p) = output {
                write_json(&p, &report)?;
            }
            println!(
                "fleet failure rate: {:.4} 1/a ({} events, {} turbine(s) without a defined rate)",
                report.fleet_failure_rate,
                report.n_events,
                report.excluded_turbines.len()
            );
        }
        Command::Synth {
            output_dir,
            turbines,
            negation_rate,
            noise_rate,
        } => {
            let mut synth = cfg.synth.clone();
            if let Some(s) = cli.seed {
                synth.seed = s;
            }
            if let Some(n) = turbines {
                synth.n_turbines = n;
            }
            if let Some(r) = negation_rate {
                synth.negation_rate = r;
            }
            if let Some(r) = noise_rate {
                synth.noise_rate = r;
            }
            let out = generate(&synth)?;
            out.write_dir(&output_dir)?;
            println!(
                "wrote {} order(s) for {} turbine(s) to {}",
                out.orders.len(),
                out.fleet.len(),
                output_dir.display()
            );
        }
        Command::TagServe {
            corpus,
            fleet,
            journal,
            addr,
        } => {
            let orders = load_corpus(&corpus, &cfg)?;
            let fleet = read_fleet_csv(&fleet)?;
            let docs = tokenize_corpus(&orders, &cfg)?;
            let journal = journal.unwrap_or_else(|| corpus.with_extension("journal.jsonl"));
            let id = format!("s-{}", corpus_fingerprint(&docs));
            let session = TaggingSession::open(docs, cfg.session, &journal, Utc::now())?;
            let handle = SessionHandle::new(id.clone(), orders, fleet, session, cfg.rules.clone(), cfg.kpi.clone());
            let state = Arc::new(AppState::new([handle]));
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(&addr)
                    .await
                    .with_context(|| format!("binding {addr}"))?;
                println!("session {id} on http://{}", listener.local_addr()?);
                println!("journal {}", journal.display());
                axum::serve(listener, router(state.clone()))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                for s in state.sessions() {
                    s.close().await?;
                }
                anyhow::Ok(())
            })?;
        }
        Command::Compare {
            reports,
            reference,
            output,
        } => {
            let mut named: Vec<(String, KpiReport)> = Vec::new();
            for path in &reports {
                let report: KpiReport = read_json(path)?;
                let mut name = report.origin.label();
                if named.iter().any(|(n, _)| *n == name) {
                    name = model_id(path);
                }
                named.push((name, report));
            }
            let table = compare(&named, reference.as_deref())?;
            if let Some(p) = output {
                write_json(&p, &table)?;
            }
            print!("{}", table.render());
        }
    }
    Ok(())
}
