use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use privlabel_core::aggregate::{aggregate_corpus, validate_labels, CrowdLabel};
use privlabel_core::analyze::{analyze, FilterConfig, SpamOverride};
use privlabel_core::privacy::PrivacyReport;
use privlabel_core::render::Palette;
use privlabel_core::transform::{compute_tfidf, derive_seed, load_corpus, load_gold, transform_at_level, Rendering, TransformOptions};
use privlabel_core::{Lexicon, PrivacyLevel};
use privlabel_taskhub::store::load_records;
use privlabel_taskhub::{build_bundle, AnnotationStore, BundleOptions, TaskHub};
use serde_json::json;

#[derive(Parser)]
#[command(name = "privlabel", version, about = "Privacy-preserving emotion labelling toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    None,
    Low,
    Medium,
    High,
    All,
}

impl LevelArg {
    fn levels(self) -> Vec<PrivacyLevel> {
        match self {
            LevelArg::None => vec![PrivacyLevel::NoPrivacy],
            LevelArg::Low => vec![PrivacyLevel::Low],
            LevelArg::Medium => vec![PrivacyLevel::Medium],
            LevelArg::High => vec![PrivacyLevel::High],
            LevelArg::All => PrivacyLevel::ALL.to_vec(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render a corpus at one privacy level
    Transform {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long, value_enum)]
        level: LevelArg,
        /// Scale vectors by corpus TF-IDF
        #[arg(long)]
        tfidf: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10.0)]
        gamma_base: f64,
        #[arg(long, default_value_t = 32)]
        cell_size: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Permutation counts for an n-word sentence
    Privacy {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long, default_value_t = 3)]
        words: i64,
        #[arg(long, value_enum, default_value = "medium")]
        level: LevelArg,
    },
    /// Per-term aggregation of every sentence
    Aggregate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        tfidf: bool,
        /// Crowd labels (JSONL) to validate the predictions against
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Filter contributors and write the distribution, difference and dominance tables
    Analyze {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value_t = 0.9)]
        confidence_min: f64,
        #[arg(long, default_value_t = 0.3)]
        spam_max: f64,
        /// Per-task spam threshold as SOURCE:LEVEL:VALUE, repeatable
        #[arg(long = "spam-override", value_parser = parse_override)]
        spam_overrides: Vec<SpamOverride>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build annotation task bundles
    Bundle {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long, value_enum)]
        level: LevelArg,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        source: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        target: usize,
        #[arg(long, default_value_t = 0.1)]
        gold_fraction: f64,
        #[arg(long)]
        tfidf: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve bundles over HTTP
    Serve {
        #[arg(long)]
        bundles: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = 30)]
        lease_minutes: u64,
    },
}

fn parse_override(s: &str) -> std::result::Result<SpamOverride, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [source, level, value] = parts[..] else {
        return Err(format!("expected SOURCE:LEVEL:VALUE, got {s:?}"));
    };
    Ok(SpamOverride {
        source: source.to_string(),
        level: level.parse().map_err(|e| format!("{e}"))?,
        spam_max: value.parse().map_err(|e| format!("bad threshold {value:?}: {e}"))?,
    })
}

fn load_lexicon(path: &Path) -> Result<Lexicon> {
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Lexicon::load(path, name).with_context(|| format!("loading lexicon {}", path.display()))
}

fn single_level(arg: LevelArg) -> Result<PrivacyLevel> {
    match arg.levels()[..] {
        [level] => Ok(level),
        _ => bail!("this command takes a single level"),
    }
}

#[allow(clippy::too_many_arguments)]
fn transform(
    corpus: &Path,
    lexicon: &Path,
    level: PrivacyLevel,
    tfidf: bool,
    seed: u64,
    gamma_base: f64,
    cell_size: u32,
    out: &Path,
) -> Result<()> {
    let lexicon = load_lexicon(lexicon)?;
    let corpus = load_corpus(corpus)?;
    let weights = if tfidf { Some(compute_tfidf(&corpus)?) } else { None };
    fs::create_dir_all(out.join("images"))?;
    let mut items = BufWriter::new(File::create(out.join("items.jsonl"))?);
    let (mut written, mut skipped) = (0, 0);
    for sentence in &corpus {
        let options = TransformOptions {
            palette: Palette::default(),
            gamma_base,
            cell_size,
            weights: weights.clone(),
            seed: derive_seed(seed, &sentence.id),
        };
        let item = match transform_at_level(sentence, level, &lexicon, &options) {
            Ok(item) => item,
            Err(e @ (privlabel_core::Error::EmptyImage { .. } | privlabel_core::Error::Domain(_))) => {
                log::warn!("{}: {e}", sentence.id);
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let file = format!("images/{}.png", sentence.id);
        if let Rendering::Image(img) = &item.rendering {
            img.save_png(out.join(&file))?;
        }
        let line = json!({
            "item_id": format!("{}-{}", sentence.id, level),
            "sentence_id": sentence.id,
            "level": level,
            "payload": item.payload(&file),
        });
        writeln!(items, "{line}")?;
        written += 1;
    }
    items.flush()?;
    println!("{written} items written to {}, {skipped} skipped", out.display());
    Ok(())
}

fn aggregate(corpus: &Path, lexicon: &Path, tfidf: bool, labels: Option<&Path>, out: &Path) -> Result<()> {
    let lexicon = load_lexicon(lexicon)?;
    let corpus = load_corpus(corpus)?;
    let weights = if tfidf { Some(compute_tfidf(&corpus)?) } else { None };
    let results = aggregate_corpus(&corpus, &lexicon, weights.as_ref())?;
    let mut w = BufWriter::new(File::create(out)?);
    for r in &results {
        writeln!(w, "{}", serde_json::to_string(r)?)?;
    }
    w.flush()?;
    println!("{} sentences aggregated into {}", results.len(), out.display());
    if let Some(path) = labels {
        let mut parsed = Vec::new();
        for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let label: CrowdLabel =
                serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), n + 1))?;
            parsed.push(label);
        }
        let summary = validate_labels(&results, &parsed)?;
        println!("{}", serde_json::to_string_pretty(&summary)?);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bundle(
    corpus: &Path,
    lexicon: &Path,
    levels: Vec<PrivacyLevel>,
    gold: Option<&Path>,
    source: Option<String>,
    seed: u64,
    target: usize,
    gold_fraction: f64,
    tfidf: bool,
    out: &Path,
) -> Result<()> {
    let lexicon = load_lexicon(lexicon)?;
    let corpus = load_corpus(corpus)?;
    let gold = match gold {
        Some(p) => load_gold(p)?,
        None => Vec::new(),
    };
    let weights = if tfidf { Some(compute_tfidf(&corpus)?) } else { None };
    let options = BundleOptions {
        source,
        target_annotations: target,
        gold_fraction,
        transform: TransformOptions {
            weights,
            ..TransformOptions::default()
        },
        ..BundleOptions::default()
    };
    for level in levels {
        let bundle = build_bundle(&corpus, &lexicon, level, &gold, seed, &options)?;
        let dir = out.join(&bundle.task_id);
        bundle.write_to(&dir)?;
        println!(
            "{}: {} items ({} gold, {} excluded) -> {}",
            bundle.task_id,
            bundle.items.len(),
            bundle.gold_count,
            bundle.excluded_sentences.len(),
            dir.display()
        );
    }
    Ok(())
}

async fn serve(bundles: &Path, store: &Path, host: &str, port: u16, lease_minutes: u64) -> Result<()> {
    let bundles = privlabel_taskhub::bundle::load_bundles(bundles)?;
    if bundles.is_empty() {
        bail!("no task bundles found");
    }
    let store = AnnotationStore::open(store)?;
    let hub = TaskHub::new(bundles, store)?.with_lease(Duration::from_secs(lease_minutes * 60));
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, privlabel_taskhub::http::router(Arc::new(hub))).await?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Transform { corpus, lexicon, level, tfidf, seed, gamma_base, cell_size, out } => {
            transform(&corpus, &lexicon, single_level(level)?, tfidf, seed, gamma_base, cell_size, &out)
        }
        Command::Privacy { lexicon, words, level } => {
            let lexicon = load_lexicon(&lexicon)?;
            let report = PrivacyReport::new(words, &lexicon, single_level(level)?)?;
            println!("{}", serde_json::to_string(&report)?);
            print!("{}", report.table());
            Ok(())
        }
        Command::Aggregate { corpus, lexicon, tfidf, labels, out } => {
            aggregate(&corpus, &lexicon, tfidf, labels.as_deref(), &out)
        }
        Command::Analyze { records, confidence_min, spam_max, spam_overrides, out } => {
            let config = FilterConfig { confidence_min, spam_max, spam_overrides };
            config.validate()?;
            let records = load_records(&records)?;
            let report = analyze(&records, &config, &Palette::default())?;
            report.write_to(&out)?;
            println!(
                "{} of {} records kept, {} exclusivity violations, report in {}",
                report.kept_records,
                report.total_records,
                report.exclusivity_violations.len(),
                out.display()
            );
            Ok(())
        }
        Command::Bundle { corpus, lexicon, level, gold, source, seed, target, gold_fraction, tfidf, out } => bundle(
            &corpus,
            &lexicon,
            level.levels(),
            gold.as_deref(),
            source,
            seed,
            target,
            gold_fraction,
            tfidf,
            &out,
        ),
        Command::Serve { bundles, store, host, port, lease_minutes } => tokio::runtime::Runtime::new()?
            .block_on(serve(&bundles, &store, &host, port, lease_minutes)),
    }
}
