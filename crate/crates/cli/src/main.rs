mod config;

use std::collections::BTreeMap;
use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dner_core::corpus::{
    corpus_stats, flatten_for_flat_model, line_boundaries, overlap_category, parse_inline,
    parse_standoff, resample, write_inline, write_standoff, Corpus, ResampleMode, Sentence,
};
use dner_core::eval::{evaluate, mentions_of, strict_prf};
use dner_core::neural::{
    load_checkpoint, parse_external_vectors, predict, predict_actions, save_checkpoint, train_with,
    Model,
};
use dner_core::schemas::{
    decode_biohd, encode_bio, encode_biohd, parse_conll, write_conll, TagSequence,
};
use dner_core::transitions::{decode, oracle, trace};

use config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Token line, mention line, blank line.
    Inline,
    /// `.txt` with one sentence per line plus a sibling `.ann`.
    Standoff,
    /// Tab-separated token and BIO-extension tag columns.
    Tags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Inline,
    Standoff,
    Tags,
    /// Plain BIO tags; the corpus must be flat.
    Bio,
}

#[derive(Parser)]
#[command(
    name = "dner",
    version,
    about = "Discontinuous entity recognition toolkit"
)]
struct Cli {
    /// `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Corpus file format for reading and writing.
    #[arg(long, global = true, value_enum, default_value = "inline")]
    format: Format,
    /// Config override, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Descriptive corpus statistics.
    Stats {
        corpus: PathBuf,
        /// One JSON record per metric.
        #[arg(long)]
        json: bool,
    },
    /// Rewrites a corpus, optionally flattened or resampled.
    Convert {
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "inline")]
        to: OutputFormat,
        /// Covering spans for discontinuous mentions, overlaps merged.
        #[arg(long)]
        flatten: bool,
        /// disc-only, under or over.
        #[arg(long)]
        resample: Option<ResampleMode>,
    },
    /// Trains a scorer, keeping the checkpoint with the best dev F1.
    Train {
        #[arg(long)]
        train: Option<String>,
        #[arg(long)]
        dev: Option<String>,
        #[arg(long)]
        checkpoint: Option<String>,
        #[arg(long)]
        external: Option<String>,
        #[arg(long)]
        dev_external: Option<String>,
    },
    /// Writes predicted mentions for a corpus.
    Predict {
        #[arg(long)]
        checkpoint: Option<String>,
        #[arg(long)]
        test: Option<String>,
        #[arg(long)]
        external: Option<String>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Scores predictions against gold mentions.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        report: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Checks that the oracle reproduces every gold mention.
    OracleCheck { corpus: PathBuf },
    /// Step-by-step transitions for one sentence.
    Trace {
        corpus: PathBuf,
        /// Position in the corpus, or `doc_id:sent_index`.
        #[arg(long)]
        sentence: String,
        /// Replay the model's actions instead of the oracle's.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = read(path)?;
        cfg.apply_text(&text, &path.display().to_string())?;
    }
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = cli.seed {
        cfg.scorer.seed = seed;
    }
    cfg.scorer.validate()?;
    Ok(cfg)
}

fn log_config(cfg: &RunConfig) {
    eprint!("# resolved config\n{}", cfg.to_text());
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = resolve(&cli)?;
    log_config(&cfg);
    let format = cli.format;
    match cli.command {
        Command::Stats { corpus, json } => {
            let c = read_corpus(&corpus, format)?;
            let report = corpus_stats(&c);
            print!(
                "{}",
                if json {
                    report.to_json_lines()
                } else {
                    report.to_text()
                }
            );
        }
        Command::Convert {
            input,
            output,
            to,
            flatten,
            resample: mode,
        } => {
            let mut c = read_corpus(&input, format)?;
            if flatten {
                c = flatten_for_flat_model(&c);
            }
            if let Some(mode) = mode {
                c = resample(&c, mode, cfg.scorer.seed)?;
            }
            write_corpus(&output, &c, to)?;
        }
        Command::Train {
            train,
            dev,
            checkpoint,
            external,
            dev_external,
        } => {
            for (key, v) in [
                ("train", train),
                ("dev", dev),
                ("checkpoint", checkpoint),
                ("external", external),
                ("dev_external", dev_external),
            ] {
                if let Some(v) = v {
                    cfg.set(key, &v)?;
                }
            }
            cmd_train(&cfg, format)?;
        }
        Command::Predict {
            checkpoint,
            test,
            external,
            output,
        } => {
            for (key, v) in [
                ("checkpoint", checkpoint),
                ("test", test),
                ("external", external),
            ] {
                if let Some(v) = v {
                    cfg.set(key, &v)?;
                }
            }
            let model = read_model(Path::new(cfg.require("checkpoint")?))?;
            let c = read_corpus(Path::new(cfg.require("test")?), format)?;
            let ext = read_external(cfg.path("external"), &c, model.config.external_vec_dim)?;
            let predicted = predict_corpus(&model, &c, ext.as_deref())?;
            write_corpus(&output, &predicted, output_format(format))?;
        }
        Command::Evaluate {
            gold,
            pred,
            report,
            json,
        } => {
            if let Some(r) = report {
                cfg.set("report", &r)?;
            }
            let g = read_corpus(&gold, format)?;
            let p = read_corpus(&pred, format)?;
            ensure!(
                g.len() == p.len(),
                "gold has {} sentences, predictions {}",
                g.len(),
                p.len()
            );
            if let Some(i) = g
                .sentences
                .iter()
                .zip(&p.sentences)
                .position(|(a, b)| a.tokens != b.tokens)
            {
                bail!("sentence {i}: gold and prediction tokens differ");
            }
            let r = evaluate(&mentions_of(&g), &mentions_of(&p))?;
            let text = if json {
                format!("{:#}\n", r.to_json())
            } else {
                r.to_table()
            };
            match cfg.path("report") {
                Some(path) => write(Path::new(path), &text)?,
                None => print!("{text}"),
            }
        }
        Command::OracleCheck { corpus } => {
            let c = read_corpus(&corpus, format)?;
            print!("{}", oracle_check(&c)?);
        }
        Command::Trace {
            corpus,
            sentence,
            checkpoint,
            json,
        } => {
            let c = read_corpus(&corpus, format)?;
            let s = find_sentence(&c, &sentence)?;
            let (actions, types) = match checkpoint {
                Some(path) => {
                    let model = read_model(&path)?;
                    ensure!(
                        model.config.external_vec_dim == 0,
                        "tracing a model that needs external vectors"
                    );
                    (
                        predict_actions(&model, &s.tokens, None)?,
                        model.types.clone(),
                    )
                }
                None => (oracle(s)?.actions, c.entity_types()),
            };
            let report = trace(s, &actions, &types)?;
            print!(
                "{}",
                if json {
                    report.to_json_lines()
                } else {
                    report.to_table()
                }
            );
        }
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_corpus(path: &Path, format: Format) -> Result<Corpus> {
    let text = read(path)?;
    let name = path.display();
    match format {
        Format::Inline => parse_inline(&text).with_context(|| format!("{name}")),
        Format::Tags => {
            let rows = parse_conll(&text).with_context(|| format!("{name}"))?;
            let sentences = rows
                .into_iter()
                .map(|(tokens, tags)| Sentence::new(tokens, decode_biohd(&tags), "", 0))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Corpus::new(sentences))
        }
        Format::Standoff => {
            let ann_path = path.with_extension("ann");
            let ann = read(&ann_path)?;
            let doc = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let parsed = parse_standoff(&text, &ann, &line_boundaries(&text), &doc)
                .with_context(|| format!("{}", ann_path.display()))?;
            for w in &parsed.warnings {
                eprintln!(
                    "warning: {}:{}: {} skipped: {}",
                    ann_path.display(),
                    w.line,
                    w.id,
                    w.reason
                );
            }
            Ok(parsed.corpus)
        }
    }
}

fn output_format(format: Format) -> OutputFormat {
    match format {
        Format::Inline => OutputFormat::Inline,
        Format::Standoff => OutputFormat::Standoff,
        Format::Tags => OutputFormat::Tags,
    }
}

fn write_corpus(path: &Path, c: &Corpus, format: OutputFormat) -> Result<()> {
    let tagged = |encode: fn(&Sentence) -> Result<TagSequence, _>| -> Result<String> {
        let rows = c
            .sentences
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Ok((
                    s.tokens.clone(),
                    encode(s).with_context(|| format!("sentence {i}"))?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(write_conll(&rows))
    };
    match format {
        OutputFormat::Inline => write(path, &write_inline(c)),
        OutputFormat::Tags => write(path, &tagged(encode_biohd)?),
        OutputFormat::Bio => write(path, &tagged(encode_bio)?),
        OutputFormat::Standoff => {
            let (text, ann) = write_standoff(c);
            write(path, &text)?;
            write(&path.with_extension("ann"), &ann)
        }
    }
}

fn read_model(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_checkpoint(&bytes).with_context(|| format!("{}", path.display()))
}

fn read_external(path: Option<&str>, c: &Corpus, dim: usize) -> Result<Option<Vec<Vec<Vec<f64>>>>> {
    match (path, dim) {
        (None, 0) => Ok(None),
        (None, _) => bail!("external_vec_dim = {dim} but no external vectors given"),
        (Some(p), 0) => bail!("external vectors {p} given but external_vec_dim = 0"),
        (Some(p), _) => {
            let ext =
                parse_external_vectors(&read(Path::new(p))?).with_context(|| p.to_string())?;
            ensure!(
                ext.len() == c.len(),
                "{p}: {} sentences, corpus has {}",
                ext.len(),
                c.len()
            );
            for (i, (v, s)) in ext.iter().zip(&c.sentences).enumerate() {
                ensure!(
                    v.len() == s.len(),
                    "{p}: sentence {i} has {} vectors for {} tokens",
                    v.len(),
                    s.len()
                );
                if let Some(row) = v.first() {
                    ensure!(
                        row.len() == dim,
                        "{p}: vectors have {} values, external_vec_dim = {dim}",
                        row.len()
                    );
                }
            }
            Ok(Some(ext))
        }
    }
}

fn predict_corpus(model: &Model, c: &Corpus, ext: Option<&[Vec<Vec<f64>>]>) -> Result<Corpus> {
    let sentences = c
        .sentences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mentions = predict(model, &s.tokens, ext.map(|e| e[i].as_slice()))?;
            Ok(s.with_mentions(mentions)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus {
        sentences,
        split_name: c.split_name.clone(),
    })
}

fn cmd_train(cfg: &RunConfig, format: Format) -> Result<()> {
    let train = read_corpus(Path::new(cfg.require("train")?), format)?;
    let dev = cfg
        .path("dev")
        .map(|p| read_corpus(Path::new(p), format))
        .transpose()?;
    let ckpt = PathBuf::from(cfg.require("checkpoint")?);
    let last = PathBuf::from(format!("{}.last", ckpt.display()));
    let log_path = PathBuf::from(format!("{}.log", ckpt.display()));

    let dim = cfg.scorer.external_vec_dim;
    let ext = read_external(cfg.path("external"), &train, dim)?;
    let dev_ext = match &dev {
        Some(d) => read_external(cfg.path("dev_external"), d, dim)?,
        None => None,
    };
    let dev_gold = dev.as_ref().map(mentions_of);

    let mut log = String::new();
    let mut best: Option<(f64, usize)> = None;
    train_with(
        &train,
        ext.as_deref(),
        &cfg.scorer,
        |report, model| -> Result<ControlFlow<()>> {
            let bytes = save_checkpoint(model);
            fs::write(&last, &bytes).with_context(|| format!("writing {}", last.display()))?;
            let line = match (&dev, &dev_gold) {
                (Some(d), Some(gold)) => {
                    let pred = predict_corpus(model, d, dev_ext.as_deref())?;
                    let f1 = strict_prf(gold, &mentions_of(&pred))?.f1;
                    if best.map_or(true, |(b, _)| f1 > b) {
                        best = Some((f1, report.epoch));
                        fs::write(&ckpt, &bytes)
                            .with_context(|| format!("writing {}", ckpt.display()))?;
                    }
                    format!(
                        "epoch {} loss {:.6} dev_f1 {:.6}",
                        report.epoch, report.mean_loss, f1
                    )
                }
                _ => {
                    fs::write(&ckpt, &bytes)
                        .with_context(|| format!("writing {}", ckpt.display()))?;
                    format!("epoch {} loss {:.6}", report.epoch, report.mean_loss)
                }
            };
            eprintln!("{line}");
            log.push_str(&line);
            log.push('\n');
            Ok(ControlFlow::Continue(()))
        },
    )?;
    if let Some((f1, epoch)) = best {
        let line = format!("best epoch {epoch} dev_f1 {f1:.6}");
        eprintln!("{line}");
        log.push_str(&line);
        log.push('\n');
    }
    write(&log_path, &log)
}

fn oracle_check(c: &Corpus) -> Result<String> {
    let mut total = 0;
    let mut covered = 0;
    let mut nested = Vec::new();
    let mut uncovered: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, s) in c.sentences.iter().enumerate() {
        let r = match oracle(s) {
            Ok(r) => r,
            Err(e) => {
                nested.push(format!("sentence {i}: {e}"));
                continue;
            }
        };
        total += s.mentions.len();
        let decoded = decode(&r.actions, s.len())?;
        let mut expected: Vec<_> = s
            .mentions
            .iter()
            .filter(|m| !r.uncovered.contains(m))
            .cloned()
            .collect();
        expected.sort();
        ensure!(
            decoded == expected,
            "sentence {i}: oracle actions decode to a different mention set"
        );
        covered += s.mentions.len() - r.uncovered.len();
        for m in &r.uncovered {
            let category = match overlap_category(m, &s.mentions) {
                Ok(cat) => cat.name().to_string(),
                Err(_) => "continuous".to_string(),
            };
            uncovered.entry(category).or_default().push(format!(
                "sentence {i}: {} \"{}\"",
                m,
                m.surface(&s.tokens)
            ));
        }
    }
    let rate = if total == 0 {
        100.0
    } else {
        100.0 * covered as f64 / total as f64
    };
    let mut out = format!(
        "sentences = {}\nmentions = {total}\ncovered = {covered}\ncoverage = {rate:.2}\nnested_sentences = {}\n",
        c.len(),
        nested.len()
    );
    for (category, items) in &uncovered {
        out.push_str(&format!("uncovered {category} = {}\n", items.len()));
        for item in items {
            out.push_str(&format!("  {item}\n"));
        }
    }
    for n in &nested {
        out.push_str(&format!("nested {n}\n"));
    }
    Ok(out)
}

fn find_sentence<'a>(c: &'a Corpus, id: &str) -> Result<&'a Sentence> {
    if let Ok(i) = id.parse::<usize>() {
        return c
            .sentences
            .get(i)
            .with_context(|| format!("no sentence {i}; corpus has {}", c.len()));
    }
    let (doc, idx) = id
        .rsplit_once(':')
        .with_context(|| format!("bad sentence id `{id}`"))?;
    let idx: usize = idx
        .parse()
        .with_context(|| format!("bad sentence id `{id}`"))?;
    c.sentences
        .iter()
        .find(|s| s.doc_id == doc && s.sent_index == idx)
        .with_context(|| format!("no sentence `{id}`"))
}
