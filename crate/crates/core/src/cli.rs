//! Command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::{self, PrfScore};
use crate::ner::{self, NerModel};
use crate::prep::{self, CasingStats, LowercaseRules};
use crate::truecaser::{self, TruecaserModel};

pub const CONFIG_ENV: &str = "TCNER_CONFIG";

fn help_for(key: &str, text: &str) -> String {
    let default = RunConfig::default().get(key).expect("flag mirrors a config key");
    let default = if default.is_empty() { "none".to_string() } else { default };
    format!("{text} [default: {default}]")
}

macro_rules! flag_group {
    ($name:ident { $($field:ident : $help:literal),+ $(,)? }) => {
        #[derive(Args, Debug, Default, Clone)]
        pub struct $name {
            $(
                #[arg(long, value_name = "VALUE", help = help_for(stringify!($field), $help))]
                pub $field: Option<String>,
            )+
        }

        impl $name {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),+];

            fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
                $(
                    if let Some(v) = &self.$field {
                        cfg.set(stringify!($field), v)?;
                    }
                )+
                Ok(())
            }
        }
    };
}

flag_group!(SeedFlags { seed: "Seed for every random draw" });

flag_group!(PrepFlags {
    caps_threshold: "Drop sentences whose capitalised-token ratio exceeds this",
    capitalized: "Capitalised-token definition: first-char or any-upper",
    rules: "Lowercase-rule list file (none selects the bundled list)",
});

flag_group!(TruecaserFlags {
    tc_char_dim: "Truecaser character embedding size",
    tc_hidden: "Truecaser hidden size per direction",
    tc_dropout: "Truecaser dropout rate",
    tc_min_char_count: "Characters rarer than this map to the unknown id",
    tc_max_chars: "Training sentences are cut to this many characters",
    tc_epochs: "Truecaser training epochs",
    pass_through_prob: "Probability that a training sentence keeps its casing",
});

flag_group!(NerFlags {
    word_dim: "Word vector size",
    char_dim: "Character embedding size",
    cnn_filters: "Character CNN filter count",
    cnn_width: "Character CNN window width",
    hidden: "Sentence BiLSTM hidden size per direction",
    dropout: "Dropout rate",
    case_mode: "Case vectors: none, predicted or gold",
    regime: "Truecaser regime: fixed, fine-tuned or joint",
    scenario: "Text casing seen by the tagger: cased or uncased",
    aux_weight: "Weight of the auxiliary truecasing loss",
    min_word_count: "Training words rarer than this map to the unknown row",
    max_epochs: "Maximum training epochs",
    patience: "Epochs without dev improvement before stopping",
    embeddings: "Pretrained word vectors (text format)",
});

flag_group!(OptimFlags {
    lr: "Adam learning rate",
    beta1: "Adam first-moment decay",
    beta2: "Adam second-moment decay",
    eps: "Adam epsilon",
    clip_norm: "Global gradient-norm clipping threshold",
});

#[derive(Parser, Debug)]
#[command(name = "tcner", version, about = "Truecasing and case-robust named entity recognition")]
pub struct Cli {
    /// Run configuration file (key = value lines); flags override it
    #[arg(long, global = true, env = CONFIG_ENV, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Collect casing statistics; each input file is counted as a shard
    PrepStats {
        /// Raw text files, one sentence per line
        #[arg(long, required = true, num_args = 1.., value_name = "FILE")]
        input: Vec<PathBuf>,
        /// Statistics table to write
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Normalise, rule-lowercase and filter a raw corpus
    PrepCorpus {
        /// Raw text, one sentence per line
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Casing statistics table
        #[arg(long, value_name = "FILE")]
        stats: PathBuf,
        /// Cleaned text to write
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
        #[command(flatten)]
        prep: PrepFlags,
    },
    /// Train a character-level truecaser on cased text
    TrainTruecaser {
        /// Cased training text, one sentence per line
        #[arg(long, value_name = "FILE")]
        train: PathBuf,
        /// Held-out text whose loss is reported each epoch
        #[arg(long, value_name = "FILE")]
        heldout: Option<PathBuf>,
        /// Model file to write
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
        #[command(flatten)]
        seed: SeedFlags,
        #[command(flatten)]
        truecaser: TruecaserFlags,
        #[command(flatten)]
        optim: OptimFlags,
    },
    /// Restore case in text, one sentence per line
    Truecase {
        /// Truecaser model file
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Input text [default: stdin]
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
        /// Output text [default: stdout]
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Character-level F1 of truecased text against gold text
    EvalTruecaser {
        /// Cased reference text
        #[arg(long, value_name = "FILE")]
        gold: PathBuf,
        /// Predicted text, parallel to the reference
        #[arg(long, value_name = "FILE", conflicts_with = "model", required_unless_present = "model")]
        pred: Option<PathBuf>,
        /// Truecaser applied to the lowercased reference
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
    },
    /// Train a BiLSTM-CRF tagger
    TrainNer {
        /// Training set in CoNLL format
        #[arg(long, value_name = "FILE")]
        train: PathBuf,
        /// Development set for early stopping
        #[arg(long, value_name = "FILE")]
        dev: Option<PathBuf>,
        /// Pretrained truecaser for predicted case vectors
        #[arg(long, value_name = "FILE")]
        truecaser: Option<PathBuf>,
        /// Model file to write
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
        #[command(flatten)]
        seed: SeedFlags,
        #[command(flatten)]
        ner: NerFlags,
        #[command(flatten)]
        truecaser_flags: TruecaserFlags,
        #[command(flatten)]
        optim: OptimFlags,
    },
    /// Tag space-separated sentences, writing two-column CoNLL
    Tag {
        /// Tagger model file
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Input text [default: stdin]
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
        /// Output file [default: stdout]
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Span F1 of a tagger on a CoNLL file
    EvalNer {
        /// Tagger model file
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Test set in CoNLL format
        #[arg(long, value_name = "FILE")]
        test: PathBuf,
        /// Lowercase the test tokens first
        #[arg(long)]
        lowercase: bool,
    },
    /// Append a lowercased copy of a CoNLL dataset
    Augment {
        /// Dataset in CoNLL format
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Augmented dataset to write
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(f)
        .lines()
        .enumerate()
        .map(|(i, l)| l.map_err(|e| Error::parse(path, i + 1, e.to_string())))
        .collect()
}

fn read_input(path: Option<&Path>) -> Result<Vec<String>> {
    match path {
        Some(p) => read_lines(p),
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).map_err(|e| Error::io("<stdin>", e))?;
            Ok(s.lines().map(str::to_string).collect())
        }
    }
}

fn open_output<'a>(path: Option<&Path>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(stdout),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn report_metrics(out: &mut dyn Write, label: &str, score: &PrfScore) -> Result<()> {
    write!(out, "{}\n{}", score.table(label), score.kv_block())?;
    Ok(())
}

fn base_config(cli: &Cli) -> Result<RunConfig> {
    match &cli.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

/// Runs one parsed command, writing results to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let mut cfg = base_config(&cli)?;
    match cli.command {
        Command::PrepStats { input, output } => {
            let shards = input.iter().map(|p| read_lines(p)).collect::<Result<Vec<_>>>()?;
            let stats = prep::collect_casing_stats_sharded(&shards);
            stats.save(&output)?;
            writeln!(out, "keys={}\ntokens={}", stats.len(), stats.total_tokens())?;
        }
        Command::PrepCorpus { input, stats, output, prep: flags } => {
            flags.apply(&mut cfg)?;
            let stats = CasingStats::load(&stats)?;
            let rules = match &cfg.rules {
                Some(p) => LowercaseRules::load(p)?,
                None => LowercaseRules::default(),
            };
            let reader = BufReader::new(File::open(&input).map_err(|e| Error::io(&input, e))?);
            let report = prep::prepare_corpus(reader, create(&output)?, &stats, &rules, cfg.prep_options(), &input)?;
            write!(out, "{}", report.kv_block())?;
        }
        Command::TrainTruecaser { train, heldout, output, seed, truecaser: flags, optim } => {
            seed.apply(&mut cfg)?;
            flags.apply(&mut cfg)?;
            optim.apply(&mut cfg)?;
            let corpus = read_lines(&train)?;
            let held = heldout.as_deref().map(read_lines).transpose()?.unwrap_or_default();
            let (model, stats) = truecaser::train_truecaser(&corpus, &held, &cfg.truecaser())?;
            model.save(&output)?;
            for e in &stats.epochs {
                write!(out, "epoch={} train_loss={:.6}", e.epoch, e.train_loss)?;
                if let Some(h) = e.heldout_loss {
                    write!(out, " heldout_loss={h:.6}")?;
                }
                writeln!(out)?;
            }
            writeln!(
                out,
                "skipped_empty={}\ntruncated={}\nunmappable_chars={}",
                stats.skipped_empty, stats.truncated, stats.unmappable_chars
            )?;
        }
        Command::Truecase { model, input, output } => {
            let model = TruecaserModel::load(&model)?;
            let lines = read_input(input.as_deref())?;
            let mut w = open_output(output.as_deref(), out)?;
            for line in &lines {
                writeln!(w, "{}", truecaser::apply_truecaser(&model, line)?)?;
            }
            w.flush()?;
        }
        Command::EvalTruecaser { gold, pred, model } => {
            let gold_lines = read_lines(&gold)?;
            let score = match (pred, model) {
                (Some(p), _) => metrics::char_f1(&gold_lines, &read_lines(&p)?)?,
                (None, Some(m)) => truecaser::eval_truecaser(&TruecaserModel::load(&m)?, &gold_lines)?,
                (None, None) => return Err(Error::Usage("eval-truecaser needs --pred or --model".into())),
            };
            report_metrics(out, "truecase", &score)?;
        }
        Command::TrainNer { train, dev, truecaser, output, seed, ner: flags, truecaser_flags, optim } => {
            seed.apply(&mut cfg)?;
            flags.apply(&mut cfg)?;
            truecaser_flags.apply(&mut cfg)?;
            optim.apply(&mut cfg)?;
            let train = ner::read_conll(&train)?;
            let dev = dev.as_deref().map(ner::read_conll).transpose()?.unwrap_or_default();
            let embeddings = cfg.embeddings.as_deref().map(|p| ner::read_embeddings(p, cfg.word_dim)).transpose()?;
            let tc = truecaser.as_deref().map(TruecaserModel::load).transpose()?;
            let (model, stats) = ner::train_ner(&train, &dev, &cfg.ner(), embeddings.as_ref(), tc)?;
            model.save(&output)?;
            for e in &stats.epochs {
                write!(out, "epoch={} train_loss={:.6}", e.epoch, e.train_loss)?;
                if let Some(f) = e.dev_f1 {
                    write!(out, " dev_f1={:.1}", 100.0 * f)?;
                }
                writeln!(out)?;
            }
            writeln!(out, "best_epoch={}", stats.best_epoch)?;
        }
        Command::Tag { model, input, output } => {
            let model = NerModel::load(&model)?;
            let lines = read_input(input.as_deref())?;
            let mut w = open_output(output.as_deref(), out)?;
            for line in &lines {
                let tokens: Vec<&str> = line.split_whitespace().collect();
                if tokens.is_empty() {
                    continue;
                }
                let tags = model.predict_tags(&tokens)?;
                for (t, tag) in tokens.iter().zip(&tags) {
                    writeln!(w, "{t} {tag}")?;
                }
                writeln!(w)?;
            }
            w.flush()?;
        }
        Command::EvalNer { model, test, lowercase: lower } => {
            let model = NerModel::load(&model)?;
            let mut data = ner::read_conll(&test)?;
            if lower {
                data = ner::lowercase_dataset(&data);
            }
            let score = ner::evaluate(&model, &data)?;
            report_metrics(out, "spans", &score)?;
        }
        Command::Augment { input, output } => {
            let data = ner::read_conll(&input)?;
            let augmented = ner::augment_lowercase(&data);
            ner::write_conll(&output, &augmented)?;
            writeln!(out, "sentences_in={}\nsentences_out={}", data.len(), augmented.len())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
