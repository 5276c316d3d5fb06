//! Synthetic MWO corpora with planted ground truth.
//!
//! Every turbine and class gets an independent homogeneous Poisson process
//! with the configured yearly rate. Descriptions are filled from per-class
//! templates; a share of corrective orders is rewritten into a negated
//! "no fault found" form and relabeled 02-08-97.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_fleet_csv, write_orders_csv, CorpusError, Fleet, FleetMeta, WorkOrder, ZeusCode};
use crate::kpi::{KpiReport, DAYS_PER_YEAR};
use crate::rules::RuleSelection;
use crate::tagging::TagEntity;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("observation window {start}..{end} is empty")]
    InvalidWindow { start: NaiveDate, end: NaiveDate },
    #[error("rate for {code} must be finite and non-negative, got {rate}")]
    InvalidRate { code: ZeusCode, rate: f64 },
    #[error("{name} must lie in [0, 1], got {value}")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("n_turbines must be positive")]
    NoTurbines,
    #[error("{language} templates missing for {code}")]
    MissingTemplates { language: Language, code: ZeusCode },
    #[error("{language} template `{template}`: {message}")]
    InvalidTemplate {
        language: Language,
        template: String,
        message: String,
    },
    #[error("term `{term}` is annotated inconsistently")]
    ConflictingAnnotation { term: String },
    #[error("work order `{0}` is not part of the synthetic corpus")]
    CorpusMismatch(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {message}")]
    Output { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    English,
    German,
}

impl std::fmt::Display for Language {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Language::English => "english",
            Language::German => "german",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexEntry {
    pub term: String,
    pub alias: String,
}

fn lex(pairs: &[(&str, &str)]) -> Vec<LexEntry> {
    pairs
        .iter()
        .map(|(term, alias)| LexEntry {
            term: term.to_string(),
            alias: alias.to_string(),
        })
        .collect()
}

fn phrases(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// Templates and slot fillers for one language.
///
/// Templates may contain the placeholders `{item}`, `{problem}`,
/// `{solution}` and `{service}`. Fillers are single words; their entity
/// follows from the slot (I, P, S, S).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguagePack {
    pub templates: BTreeMap<ZeusCode, Vec<String>>,
    /// Negated rewrites of corrective orders. Every `{problem}` must follow a negation cue.
    pub negated_templates: Vec<String>,
    pub items: Vec<LexEntry>,
    pub problems: Vec<LexEntry>,
    pub solutions: Vec<LexEntry>,
    pub services: Vec<LexEntry>,
    pub abbreviations: BTreeMap<String, String>,
}

const SLOTS: [&str; 4] = ["item", "problem", "solution", "service"];

impl LanguagePack {
    pub fn english() -> Self {
        let templates = BTreeMap::from([
            (
                ZeusCode::Corrective,
                phrases(&[
                    "{item} {problem}, {item} {solution}",
                    "{problem} at {item} - {solution}",
                    "{item} {problem} detected. {item} {solution}",
                    "{problem} reported on {item}, {solution} on site",
                    "Error message {item} {problem}; {solution} and restarted",
                ]),
            ),
            (
                ZeusCode::Preventive,
                phrases(&[
                    "annual maintenance {item}",
                    "scheduled inspection of {item} and {item}",
                    "{item} {service} as per maintenance plan",
                    "oil sample taken from {item}",
                    "periodic service {item}, {item} {service}",
                ]),
            ),
            (
                ZeusCode::Unresolved,
                phrases(&[
                    "{item} {problem} suspected, cause unclear",
                    "{item} alarm, follow up open, cause unknown",
                ]),
            ),
            (
                ZeusCode::Undefined,
                phrases(&[
                    "{item} checked, everything in position",
                    "visual check {item} in order",
                    "documentation updated for {item}",
                ]),
            ),
            (
                ZeusCode::Insignificant,
                phrases(&[
                    "travel to site",
                    "spare parts ordered for {item}",
                    "crane booked for next week",
                    "safety briefing with crew",
                ]),
            ),
        ]);
        Self {
            templates,
            negated_templates: phrases(&[
                "no {problem} found at {item}",
                "{item} checked, no {problem} detected",
                "{item} inspected - no {problem}",
            ]),
            items: lex(&[
                ("gearbox", "gearbox"),
                ("generator", "generator"),
                ("converter", "converter"),
                ("inverter", "converter"),
                ("bearing", "bearing"),
                ("brake", "brake"),
                ("anemometer", "anemometer"),
                ("hose", "hose"),
                ("sensor", "sensor"),
                ("cable", "cable"),
                ("pump", "pump"),
                ("filter", "filter"),
                ("blade", "blade"),
                ("transformer", "transformer"),
            ]),
            problems: lex(&[
                ("fault", "failure"),
                ("failure", "failure"),
                ("error", "failure"),
                ("defect", "failure"),
                ("defective", "failure"),
                ("broken", "damage"),
                ("damaged", "damage"),
                ("crack", "damage"),
                ("cracked", "damage"),
                ("leakage", "leak"),
                ("leaking", "leak"),
                ("overheating", "overheating"),
                ("overtemperature", "overheating"),
                ("corrosion", "corrosion"),
            ]),
            solutions: lex(&[
                ("replaced", "replace"),
                ("exchanged", "replace"),
                ("swapped", "replace"),
                ("repaired", "repair"),
                ("fixed", "repair"),
                ("reset", "reset"),
                ("tightened", "tighten"),
            ]),
            services: lex(&[
                ("lubricated", "lubricate"),
                ("greased", "lubricate"),
                ("cleaned", "clean"),
                ("inspected", "inspect"),
            ]),
            abbreviations: [
                ("replaced", "repl"),
                ("inspection", "insp"),
                ("maintenance", "maint"),
                ("generator", "gen"),
                ("gearbox", "gbx"),
                ("converter", "conv"),
                ("transformer", "trafo"),
            ]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect(),
        }
    }

    pub fn german() -> Self {
        let templates = BTreeMap::from([
            (
                ZeusCode::Corrective,
                phrases(&[
                    "{problem} am {item}, {item} {solution}",
                    "{item} {problem} - {solution}",
                    "{item}: {problem} festgestellt, {solution}",
                ]),
            ),
            (
                ZeusCode::Preventive,
                phrases(&[
                    "Jahreswartung {item}",
                    "Wartung {item} {service}",
                    "Inspektion {item} und {item} nach Wartungsplan",
                ]),
            ),
            (ZeusCode::Unresolved, phrases(&["{item} {problem} gemeldet, Ursache unklar"])),
            (
                ZeusCode::Undefined,
                phrases(&["Sichtprüfung {item} in Ordnung", "Dokumentation {item} aktualisiert"]),
            ),
            (
                ZeusCode::Insignificant,
                phrases(&["Anfahrt zum Standort", "Ersatzteile für {item} bestellt"]),
            ),
        ]);
        Self {
            templates,
            negated_templates: phrases(&["kein {problem} am {item} festgestellt", "{item} geprüft - kein {problem}"]),
            items: lex(&[
                ("getriebe", "gearbox"),
                ("generator", "generator"),
                ("umrichter", "converter"),
                ("lager", "bearing"),
                ("bremse", "brake"),
                ("schlauch", "hose"),
                ("sensor", "sensor"),
                ("kabel", "cable"),
                ("pumpe", "pump"),
                ("rotorblatt", "blade"),
            ]),
            problems: lex(&[
                ("fehler", "failure"),
                ("störung", "failure"),
                ("defekt", "failure"),
                ("ausfall", "failure"),
                ("beschädigt", "damage"),
                ("riss", "damage"),
                ("undicht", "leak"),
                ("leckage", "leak"),
                ("überhitzung", "overheating"),
            ]),
            solutions: lex(&[
                ("getauscht", "replace"),
                ("ersetzt", "replace"),
                ("repariert", "repair"),
                ("instandgesetzt", "repair"),
                ("quittiert", "reset"),
                ("nachgezogen", "tighten"),
            ]),
            services: lex(&[
                ("geschmiert", "lubricate"),
                ("gefettet", "lubricate"),
                ("gereinigt", "clean"),
                ("kontrolliert", "inspect"),
            ]),
            abbreviations: [("getriebe", "getr"), ("umrichter", "ur"), ("wartung", "wtg")]
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        }
    }

    fn fillers(&self, slot: &str) -> &[LexEntry] {
        match slot {
            "item" => &self.items,
            "problem" => &self.problems,
            "solution" => &self.solutions,
            "service" => &self.services,
            _ => &[],
        }
    }

    fn validate(&self, language: Language, rates: &BTreeMap<ZeusCode, f64>) -> Result<(), SynthError> {
        for (&code, &rate) in rates {
            let needed = rate > 0.0;
            let present = self.templates.get(&code.level3()).is_some_and(|t| !t.is_empty());
            if needed && !present {
                return Err(SynthError::MissingTemplates { language, code });
            }
        }
        let corrective_rate: f64 = rates
            .iter()
            .filter(|(c, _)| c.level3() == ZeusCode::Corrective)
            .map(|(_, r)| r)
            .sum();
        if corrective_rate > 0.0 && self.negated_templates.is_empty() {
            return Err(SynthError::MissingTemplates {
                language,
                code: ZeusCode::Undefined,
            });
        }
        for template in self.templates.values().flatten().chain(&self.negated_templates) {
            for slot in placeholders(template).map_err(|message| SynthError::InvalidTemplate {
                language,
                template: template.clone(),
                message,
            })? {
                if self.fillers(slot).is_empty() {
                    return Err(SynthError::InvalidTemplate {
                        language,
                        template: template.clone(),
                        message: format!("no fillers for `{{{slot}}}`"),
                    });
                }
            }
        }
        Ok(())
    }
}

fn placeholders(template: &str) -> Result<Vec<&str>, String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let close = rest[open..].find('}').ok_or("unclosed `{`")? + open;
        let slot = &rest[open + 1..close];
        if !SLOTS.contains(&slot) {
            return Err(format!("unknown placeholder `{{{slot}}}`"));
        }
        out.push(slot);
        rest = &rest[close + 1..];
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_turbines: usize,
    pub window_start: NaiveDate,
    /// Exclusive; no order falls on this date.
    pub window_end: NaiveDate,
    /// Events per turbine and year.
    pub rates: BTreeMap<ZeusCode, f64>,
    pub negation_rate: f64,
    pub noise_rate: f64,
    /// Share of orders written in German.
    pub german_share: f64,
    pub seed: u64,
    pub english: LanguagePack,
    pub german: LanguagePack,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_turbines: 40,
            window_start: NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date"),
            window_end: NaiveDate::from_ymd_opt(2023, 1, 1).expect("valid date"),
            rates: BTreeMap::from([
                (ZeusCode::Corrective, 8.0),
                (ZeusCode::Preventive, 4.0),
                (ZeusCode::Unresolved, 0.5),
                (ZeusCode::Undefined, 1.0),
                (ZeusCode::Insignificant, 1.0),
            ]),
            negation_rate: 0.1,
            noise_rate: 0.05,
            german_share: 0.2,
            seed: 0,
            english: LanguagePack::english(),
            german: LanguagePack::german(),
        }
    }
}

impl SynthConfig {
    pub fn window_days(&self) -> i64 {
        (self.window_end - self.window_start).num_days()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.window_days() <= 0 {
            return Err(SynthError::InvalidWindow {
                start: self.window_start,
                end: self.window_end,
            });
        }
        if self.n_turbines == 0 {
            return Err(SynthError::NoTurbines);
        }
        for (&code, &rate) in &self.rates {
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(SynthError::InvalidRate { code, rate });
            }
        }
        for (name, value) in [
            ("negation_rate", self.negation_rate),
            ("noise_rate", self.noise_rate),
            ("german_share", self.german_share),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SynthError::InvalidProbability { name, value });
            }
        }
        if self.german_share < 1.0 {
            self.english.validate(Language::English, &self.rates)?;
        }
        if self.german_share > 0.0 {
            self.german.validate(Language::German, &self.rates)?;
        }
        self.term_annotations()?;
        Ok(())
    }

    /// Lexicon terms with the alias and entity an analyst is expected to assign.
    pub fn term_annotations(&self) -> Result<BTreeMap<String, TermAnnotation>, SynthError> {
        let mut out: BTreeMap<String, TermAnnotation> = BTreeMap::new();
        for pack in [&self.english, &self.german] {
            let groups = [
                (&pack.items, TagEntity::I),
                (&pack.problems, TagEntity::P),
                (&pack.solutions, TagEntity::S),
                (&pack.services, TagEntity::S),
            ];
            for (entries, entity) in groups {
                for e in entries {
                    let annotation = TermAnnotation {
                        alias: e.alias.to_lowercase(),
                        entity,
                    };
                    let term = e.term.to_lowercase();
                    match out.get(&term) {
                        Some(existing) if *existing != annotation => {
                            return Err(SynthError::ConflictingAnnotation { term });
                        }
                        _ => {
                            out.insert(term, annotation);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn pack(&self, language: Language) -> &LanguagePack {
        match language {
            Language::English => &self.english,
            Language::German => &self.german,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermAnnotation {
    pub alias: String,
    pub entity: TagEntity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderTruth {
    pub work_order_id: String,
    pub turbine_id: String,
    pub zeus_code: ZeusCode,
    /// Class the event was drawn from; differs from `zeus_code` for negated orders.
    pub drawn_class: ZeusCode,
    pub negated: bool,
    pub noisy: bool,
    pub language: Language,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurbineTruth {
    pub turbine_id: String,
    /// Orders per truth label.
    pub event_counts: BTreeMap<ZeusCode, usize>,
    pub negated_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub seed: u64,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub planted_rates: BTreeMap<ZeusCode, f64>,
    pub failure_alias: String,
    pub orders: Vec<OrderTruth>,
    pub turbines: Vec<TurbineTruth>,
    pub term_annotations: BTreeMap<String, TermAnnotation>,
}

impl SynthTruth {
    /// Planted rate of all corrective classes together.
    pub fn planted_corrective_rate(&self) -> f64 {
        self.planted_rates
            .iter()
            .filter(|(c, _)| c.level3() == ZeusCode::Corrective)
            .map(|(_, r)| r)
            .sum()
    }

    pub fn labels(&self) -> BTreeMap<String, ZeusCode> {
        self.orders.iter().map(|o| (o.work_order_id.clone(), o.zeus_code)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub orders: Vec<WorkOrder>,
    pub fleet: Fleet,
    pub truth: SynthTruth,
}

impl SynthOutput {
    /// Writes `corpus.csv`, `fleet.csv` and `truth.json` into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<(), SynthError> {
        let dir = dir.as_ref();
        let output_err = |path: &Path, message: String| SynthError::Output {
            path: path.display().to_string(),
            message,
        };
        fs::create_dir_all(dir).map_err(|e| output_err(dir, e.to_string()))?;
        let mut corpus = Vec::new();
        write_orders_csv(&mut corpus, &self.orders)?;
        let mut fleet = Vec::new();
        write_fleet_csv(&mut fleet, &self.fleet)?;
        let truth = serde_json::to_string_pretty(&self.truth).map_err(|e| output_err(dir, e.to_string()))?;
        for (name, bytes) in [("corpus.csv", corpus), ("fleet.csv", fleet), ("truth.json", truth.into_bytes())] {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| output_err(&path, e.to_string()))?;
        }
        Ok(())
    }
}

struct Drawn {
    offset_days: i64,
    description: String,
    code: ZeusCode,
    drawn_class: ZeusCode,
    negated: bool,
    noisy: bool,
    language: Language,
}

fn fill(template: &str, pack: &LanguagePack, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::with_capacity(template.len() + 16);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let close = rest[open..].find('}').expect("validated template") + open;
        out.push_str(&rest[..open]);
        let entry = pack.fillers(&rest[open + 1..close]).choose(rng).expect("validated fillers");
        out.push_str(&entry.term);
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    out
}

/// Abbreviates one known word or, failing that, swaps two inner letters of a longer word.
fn inject_noise(description: &str, pack: &LanguagePack, rng: &mut ChaCha8Rng) -> String {
    let mut words: Vec<String> = description.split(' ').map(str::to_string).collect();
    let abbreviable: Vec<usize> = (0..words.len())
        .filter(|&i| pack.abbreviations.contains_key(&words[i].to_lowercase()))
        .collect();
    if !abbreviable.is_empty() && rng.gen_bool(0.5) {
        let i = *abbreviable.choose(rng).expect("non-empty");
        words[i] = pack.abbreviations[&words[i].to_lowercase()].clone();
        return words.join(" ");
    }
    let long: Vec<usize> = (0..words.len())
        .filter(|&i| words[i].chars().filter(|c| c.is_alphabetic()).count() >= 4 && words[i].chars().all(char::is_alphabetic))
        .collect();
    if let Some(&i) = long.choose(rng) {
        let mut chars: Vec<char> = words[i].chars().collect();
        let j = rng.gen_range(1..chars.len() - 2);
        chars.swap(j, j + 1);
        words[i] = chars.into_iter().collect();
    }
    words.join(" ")
}

fn draw_turbine(config: &SynthConfig, index: usize) -> Vec<Drawn> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64 + 1);
    let window = config.window_days() as f64;
    let mut drawn = Vec::new();
    for (&class, &rate) in &config.rates {
        if rate <= 0.0 {
            continue;
        }
        let gap = Exp::new(rate / DAYS_PER_YEAR).expect("positive finite rate");
        let mut t = gap.sample(&mut rng);
        while t < window {
            let language = if rng.gen_bool(config.german_share) {
                Language::German
            } else {
                Language::English
            };
            let pack = config.pack(language);
            let negated = class.level3() == ZeusCode::Corrective && rng.gen_bool(config.negation_rate);
            let template = if negated {
                pack.negated_templates.choose(&mut rng)
            } else {
                pack.templates[&class.level3()].choose(&mut rng)
            }
            .expect("validated templates");
            let mut description = fill(template, pack, &mut rng);
            let noisy = rng.gen_bool(config.noise_rate);
            if noisy {
                description = inject_noise(&description, pack, &mut rng);
            }
            drawn.push(Drawn {
                offset_days: t.floor() as i64,
                description,
                code: if negated { ZeusCode::Undefined } else { class },
                drawn_class: class,
                negated,
                noisy,
                language,
            });
            t += gap.sample(&mut rng);
        }
    }
    drawn.sort_by_key(|d| d.offset_days);
    drawn
}

/// Generates a corpus, the fleet metadata and the ground truth. Deterministic per config.
pub fn generate(config: &SynthConfig) -> Result<SynthOutput, SynthError> {
    config.validate()?;
    let width = config.n_turbines.to_string().len().max(2);
    let turbine_ids: Vec<String> = (1..=config.n_turbines).map(|i| format!("WT{i:0width$}")).collect();
    let per_turbine: Vec<Vec<Drawn>> = (0..config.n_turbines)
        .into_par_iter()
        .map(|i| draw_turbine(config, i))
        .collect();

    let mut orders = Vec::new();
    let mut truth_orders = Vec::new();
    let mut turbines = Vec::new();
    let mut fleet = Fleet::new();
    for (turbine_id, drawn) in turbine_ids.iter().zip(per_turbine) {
        let meta = FleetMeta::new(turbine_id.clone(), config.window_start, config.window_start, config.window_end)?;
        fleet.insert(turbine_id.clone(), meta);
        let mut event_counts = BTreeMap::new();
        let mut negated_count = 0;
        for (k, d) in drawn.into_iter().enumerate() {
            let id = format!("{turbine_id}-{:05}", k + 1);
            *event_counts.entry(d.code).or_insert(0) += 1;
            negated_count += usize::from(d.negated);
            orders.push(WorkOrder {
                id: id.clone(),
                turbine_id: turbine_id.clone(),
                start_date: config.window_start + chrono::Duration::days(d.offset_days),
                description: d.description,
                zeus_code: Some(d.code),
            });
            truth_orders.push(OrderTruth {
                work_order_id: id,
                turbine_id: turbine_id.clone(),
                zeus_code: d.code,
                drawn_class: d.drawn_class,
                negated: d.negated,
                noisy: d.noisy,
                language: d.language,
            });
        }
        turbines.push(TurbineTruth {
            turbine_id: turbine_id.clone(),
            event_counts,
            negated_count,
        });
    }
    let truth = SynthTruth {
        seed: config.seed,
        window_start: config.window_start,
        window_end: config.window_end,
        planted_rates: config.rates.clone(),
        failure_alias: "failure".into(),
        orders: truth_orders,
        turbines,
        term_annotations: config.term_annotations()?,
    };
    Ok(SynthOutput { orders, fleet, truth })
}

/// What a pipeline produced for a synthetic corpus.
#[derive(Debug, Clone, Default)]
pub struct PipelineOutput<'a> {
    /// Predicted or assigned label per work order.
    pub labels: Option<&'a BTreeMap<String, ZeusCode>>,
    pub kpi: Option<&'a KpiReport>,
    pub selection: Option<&'a RuleSelection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub support: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionScore {
    pub selected: usize,
    pub true_positives: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthScore {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_accuracy: Option<f64>,
    /// Keyed by level-3 truth class.
    pub per_class: BTreeMap<ZeusCode, ClassAccuracy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kpi_relative_deviation: Option<f64>,
    /// Against the orders whose truth label is corrective.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionScore>,
}

/// Scores labels (level 3), fleet KPI and a rule selection against the planted truth.
pub fn score_against_truth(output: &PipelineOutput<'_>, truth: &SynthTruth) -> Result<TruthScore, SynthError> {
    let labels = truth.labels();
    let mut per_class = BTreeMap::new();
    let mut label_accuracy = None;
    if let Some(predicted) = output.labels {
        let mut correct_total = 0;
        for (id, &code) in predicted {
            let actual = labels.get(id).ok_or_else(|| SynthError::CorpusMismatch(id.clone()))?.level3();
            let entry = per_class.entry(actual).or_insert(ClassAccuracy {
                support: 0,
                correct: 0,
                accuracy: 0.0,
            });
            entry.support += 1;
            if code.level3() == actual {
                entry.correct += 1;
                correct_total += 1;
            }
        }
        for c in per_class.values_mut() {
            c.accuracy = c.correct as f64 / c.support as f64;
        }
        if !predicted.is_empty() {
            label_accuracy = Some(correct_total as f64 / predicted.len() as f64);
        }
    }
    let planted = truth.planted_corrective_rate();
    let kpi_relative_deviation = output.kpi.map(|r| (r.fleet_failure_rate - planted) / planted);
    let selection = match output.selection {
        Some(sel) => {
            let positives: BTreeSet<&str> = truth
                .orders
                .iter()
                .filter(|o| o.zeus_code.level3() == ZeusCode::Corrective)
                .map(|o| o.work_order_id.as_str())
                .collect();
            let mut tp = 0;
            for id in &sel.selected_ids {
                if !labels.contains_key(id) {
                    return Err(SynthError::CorpusMismatch(id.clone()));
                }
                tp += usize::from(positives.contains(id.as_str()));
            }
            let n = sel.selected_ids.len();
            Some(SelectionScore {
                selected: n,
                true_positives: tp,
                precision: if n == 0 { 0.0 } else { tp as f64 / n as f64 },
                recall: if positives.is_empty() {
                    0.0
                } else {
                    tp as f64 / positives.len() as f64
                },
            })
        }
        None => None,
    };
    Ok(TruthScore {
        label_accuracy,
        per_class,
        kpi_relative_deviation,
        selection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            n_turbines: 3,
            window_end: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn zero_rates_give_empty_corpus() {
        let mut c = small(1);
        c.rates.values_mut().for_each(|r| *r = 0.0);
        let out = generate(&c).unwrap();
        assert!(out.orders.is_empty());
        assert_eq!(out.fleet.len(), 3);
    }

    #[test]
    fn deterministic_and_ordered() {
        let a = generate(&small(9)).unwrap();
        let b = generate(&small(9)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.orders, generate(&small(10)).unwrap().orders);
        for w in a.orders.windows(2) {
            assert!((&w[0].turbine_id, w[0].start_date, &w[0].id) < (&w[1].turbine_id, w[1].start_date, &w[1].id));
        }
        assert_eq!(a.orders.len(), a.truth.orders.len());
        assert!(a.orders.iter().all(|o| o.start_date >= a.truth.window_start && o.start_date < a.truth.window_end));
    }

    #[test]
    fn window_must_be_non_empty() {
        let mut c = small(1);
        c.window_end = c.window_start;
        assert!(matches!(generate(&c), Err(SynthError::InvalidWindow { .. })));
    }

    #[test]
    fn probabilities_are_checked() {
        let mut c = small(1);
        c.negation_rate = 1.5;
        assert!(matches!(generate(&c), Err(SynthError::InvalidProbability { name: "negation_rate", .. })));
        let mut c = small(1);
        c.rates.insert(ZeusCode::Preventive, f64::NAN);
        assert!(matches!(generate(&c), Err(SynthError::InvalidRate { .. })));
    }

    #[test]
    fn negation_labels() {
        let mut c = small(3);
        c.negation_rate = 0.0;
        assert!(generate(&c).unwrap().truth.orders.iter().all(|o| !o.negated));
        c.negation_rate = 1.0;
        let out = generate(&c).unwrap();
        for o in &out.truth.orders {
            assert_ne!(o.zeus_code.level3(), ZeusCode::Corrective);
            if o.drawn_class == ZeusCode::Corrective {
                assert!(o.negated);
                assert_eq!(o.zeus_code, ZeusCode::Undefined);
            }
        }
    }

    #[test]
    fn templates_are_checked() {
        let mut c = small(1);
        c.english.templates.insert(ZeusCode::Preventive, vec!["{widget} check".into()]);
        assert!(matches!(generate(&c), Err(SynthError::InvalidTemplate { .. })));
        let mut c = small(1);
        c.english.templates.remove(&ZeusCode::Preventive);
        assert!(matches!(generate(&c), Err(SynthError::MissingTemplates { .. })));
    }

    #[test]
    fn noise_changes_one_word() {
        let pack = LanguagePack::english();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let noisy = inject_noise("gearbox fault detected", &pack, &mut rng);
            let changed = noisy
                .split(' ')
                .zip("gearbox fault detected".split(' '))
                .filter(|(a, b)| a != b)
                .count();
            assert_eq!(changed, 1, "{noisy}");
        }
    }

    #[test]
    fn truth_labels_score_perfectly() {
        let out = generate(&small(4)).unwrap();
        let labels = out.truth.labels();
        let score = score_against_truth(
            &PipelineOutput {
                labels: Some(&labels),
                ..Default::default()
            },
            &out.truth,
        )
        .unwrap();
        assert_eq!(score.label_accuracy, Some(1.0));
        let foreign = BTreeMap::from([("nope".to_string(), ZeusCode::Corrective)]);
        assert!(matches!(
            score_against_truth(
                &PipelineOutput {
                    labels: Some(&foreign),
                    ..Default::default()
                },
                &out.truth
            ),
            Err(SynthError::CorpusMismatch(_))
        ));
    }

    #[test]
    fn writes_ingestible_files() {
        let out = generate(&small(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        out.write_dir(dir.path()).unwrap();
        let ingested = crate::corpus::ingest_csv(dir.path().join("corpus.csv"), &Default::default()).unwrap();
        assert_eq!(ingested.orders, out.orders);
        assert_eq!(crate::corpus::read_fleet_csv(dir.path().join("fleet.csv")).unwrap(), out.fleet);
        let truth: SynthTruth = serde_json::from_slice(&fs::read(dir.path().join("truth.json")).unwrap()).unwrap();
        assert_eq!(truth, out.truth);
    }
}
