//! Command-line surface: text ingestion, hierarchy training, replay,
//! tokenization, recognition, compression, and corpus statistics.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use morpho_hebb::compress::{compress_chain, cost_gamma, measured_cost, ProjectorChain, COMPRESS_TOL};
use morpho_hebb::embedding::{EmbeddingStore, DEFAULT_XI_M};
use morpho_hebb::hierarchy::{Hierarchy, TrainConfig};
use morpho_hebb::inference::{generate_vocabulary, replay_cycle};
use morpho_hebb::serial::{hierarchy_from_json, hierarchy_to_json, store_from_json, store_to_json};
use morpho_hebb::stats::{
    count_intraword_ngrams, fit_lognormal, peak_and_collapse, rank_frequency, CountMode,
};
use morpho_hebb::stream::{derive_seed, normalize_text};
use morpho_hebb::tokenizer::{project_up, tokenize};
use morpho_hebb::{Alphabet, MeasureConfig, MeasureMode};

#[derive(Parser)]
#[command(name = "morpho-hebb", version, about = "Hierarchical Hebbian n-gram model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Sample,
    Argmax,
}

fn measure_config(beta: f64, seed: u64, mode: Mode) -> anyhow::Result<MeasureConfig> {
    let mode = match mode {
        Mode::Sample => MeasureMode::Sample,
        Mode::Argmax => MeasureMode::Argmax,
    };
    Ok(MeasureConfig::new(beta, seed, mode)?)
}

#[derive(Subcommand)]
enum Command {
    /// Train a hierarchy on a text file
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-level cutoffs ε_2,ε_3,… as a comma-separated list
        #[arg(long, default_value = "")]
        eps: String,
        /// Forgetting rate ξ_g (omit for the accumulating limit)
        #[arg(long)]
        xi_g: Option<f64>,
        /// Forgetting horizon N_g = 1/ξ_g (omit for the accumulating limit)
        #[arg(long)]
        n_g: Option<u64>,
        #[arg(long, default_value_t = 24)]
        max_level: usize,
        /// Alphabet symbols (default: 26 lowercase Latin letters)
        #[arg(long)]
        alphabet: Option<String>,
    },
    /// Grow a hierarchy by seeded random admissible imprinting
    GrowRandom {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "")]
        eps: String,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 24)]
        max_level: usize,
        #[arg(long)]
        alphabet: Option<String>,
    },
    /// Replay words from a hierarchy, optionally imprinting embeddings
    Replay {
        #[arg(long)]
        hierarchy: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, value_enum, default_value_t = Mode::Sample)]
        mode: Mode,
        /// Number of replay cycles
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Write replayed words here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Imprint each replayed word into an embedding store at this path
        #[arg(long)]
        imprint: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_XI_M)]
        xi_m: f64,
    },
    /// Generate a vocabulary of replayed words
    GenerateVocab {
        #[arg(long)]
        hierarchy: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, value_enum, default_value_t = Mode::Sample)]
        mode: Mode,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tokenize a string into maximal learned tokens
    Tokenize {
        #[arg(long)]
        hierarchy: PathBuf,
        #[arg(long)]
        string: String,
    },
    /// Rank stored words by activation against a fragment
    Recognize {
        #[arg(long)]
        hierarchy: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        fragment: String,
    },
    /// Compress the projector chain of every stored embedding
    Compress {
        #[arg(long)]
        hierarchy: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Corpus n-gram statistics: histogram, rank-frequency, log-normal fit
    Stats {
        #[arg(long)]
        input: PathBuf,
        /// Treat the input as a one-word-per-line vocabulary
        #[arg(long)]
        vocab: bool,
        /// Weight rank-frequency by unique words instead of occurrences
        #[arg(long)]
        types: bool,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        alphabet: Option<String>,
    },
    /// Decode a learned string into its constituents at every level
    Decode {
        #[arg(long)]
        hierarchy: PathBuf,
        #[arg(long)]
        string: String,
    },
}

/// Write atomically: a temp file in the target directory, then rename.
fn atomic_write(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(d) = dir {
        std::fs::create_dir_all(d)?;
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path)?;
    Ok(())
}

fn parse_alphabet(s: &Option<String>) -> anyhow::Result<Alphabet> {
    match s {
        Some(s) => Ok(Alphabet::new(s.chars().collect())?),
        None => Ok(Alphabet::latin()),
    }
}

fn parse_eps(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| Ok(t.parse::<f64>()?))
        .collect()
}

fn load_hierarchy(path: &Path) -> anyhow::Result<Hierarchy> {
    Ok(hierarchy_from_json(&std::fs::read_to_string(path)?)?)
}

fn load_store(path: &Path) -> anyhow::Result<EmbeddingStore> {
    Ok(store_from_json(&std::fs::read_to_string(path)?)?)
}

fn gram_total(h: &Hierarchy) -> usize {
    h.levels().iter().map(|l| l.len()).sum()
}

fn emit(out: &Option<PathBuf>, lines: &[String]) -> anyhow::Result<()> {
    let body: String = lines.iter().map(|l| format!("{l}\n")).collect();
    match out {
        Some(p) => atomic_write(p, &body),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train {
            input,
            out,
            eps,
            xi_g,
            n_g,
            max_level,
            alphabet,
        } => {
            let eps = parse_eps(&eps)?;
            let cfg = match (xi_g, n_g) {
                (Some(_), Some(_)) => anyhow::bail!("pass at most one of --xi-g and --n-g"),
                (Some(x), None) => TrainConfig::with_xi(x, eps, max_level)?,
                (None, Some(n)) => TrainConfig::with_horizon(n, eps, max_level)?,
                (None, None) => TrainConfig::accumulating(eps, max_level),
            };
            let a = parse_alphabet(&alphabet)?;
            let raw = std::fs::read_to_string(&input)?;
            let stream = normalize_text(&raw, &a);
            let h = Hierarchy::grow_from_text(&stream, a, &cfg)?;
            atomic_write(&out, &hierarchy_to_json(&h)?)?;
            println!(
                "summary command=train depth={} grams={} out={}",
                h.depth(),
                gram_total(&h),
                out.display()
            );
        }
        Command::GrowRandom {
            out,
            eps,
            seed,
            max_level,
            alphabet,
        } => {
            let mut cfg = TrainConfig::accumulating(parse_eps(&eps)?, max_level);
            cfg.seed = seed;
            let h = Hierarchy::grow_random(&cfg, parse_alphabet(&alphabet)?)?;
            atomic_write(&out, &hierarchy_to_json(&h)?)?;
            println!(
                "summary command=grow-random depth={} grams={} out={}",
                h.depth(),
                gram_total(&h),
                out.display()
            );
        }
        Command::Replay {
            hierarchy,
            seed,
            beta,
            mode,
            count,
            out,
            imprint,
            xi_m,
        } => {
            let h = load_hierarchy(&hierarchy)?;
            let cfg = measure_config(beta, seed, mode)?;
            let mut store = EmbeddingStore::new();
            let mut words = Vec::with_capacity(count);
            for i in 0..count {
                let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, i as u64));
                for outcome in replay_cycle(&h, &cfg, 1, &mut rng)? {
                    if imprint.is_some() {
                        store.imprint(&h, &outcome, xi_m)?;
                    }
                    words.push(outcome.word);
                }
            }
            emit(&out, &words)?;
            if let Some(p) = &imprint {
                atomic_write(p, &store_to_json(&store)?)?;
            }
            println!(
                "summary command=replay words={} embeddings={}",
                words.len(),
                store.len()
            );
        }
        Command::GenerateVocab {
            hierarchy,
            seed,
            beta,
            mode,
            count,
            out,
        } => {
            let h = load_hierarchy(&hierarchy)?;
            let cfg = measure_config(beta, seed, mode)?;
            let words = generate_vocabulary(&h, count, &cfg)?;
            emit(&out, &words)?;
            println!("summary command=generate-vocab words={}", words.len());
        }
        Command::Tokenize { hierarchy, string } => {
            let h = load_hierarchy(&hierarchy)?;
            let segs = tokenize(&h, &string)?;
            for seg in &segs {
                let toks: Vec<String> = seg
                    .tokens
                    .iter()
                    .map(|t| h.alphabet().decode(&t.expansion))
                    .collect::<Result<_, _>>()?;
                println!("{}", toks.join("|"));
            }
            let unique = segs.len() == 1;
            println!("unique: {}", if unique { "yes" } else { "no" });
            println!(
                "summary command=tokenize tilings={} unique={}",
                segs.len(),
                unique
            );
        }
        Command::Recognize {
            hierarchy,
            store,
            fragment,
        } => {
            let h = load_hierarchy(&hierarchy)?;
            let store = load_store(&store)?;
            let ranked = store.recognize_word(&h, &fragment)?;
            for (alpha, act) in &ranked {
                let word = store
                    .get(*alpha)
                    .map(|r| r.word.as_str())
                    .unwrap_or("<unnamed>");
                println!("{word} {act:.6}");
            }
            println!("summary command=recognize matches={}", ranked.len());
        }
        Command::Compress {
            hierarchy,
            store,
            out,
        } => {
            let h = load_hierarchy(&hierarchy)?;
            let mut store = load_store(&store)?;
            let alphas: Vec<usize> = store.records().iter().map(|r| r.alpha).collect();
            let compressed: Vec<_> = alphas
                .par_iter()
                .map(|&alpha| {
                    let word = &store.get(alpha).unwrap().word;
                    let pc = ProjectorChain::word_indicator(&h, word)?;
                    let chain = compress_chain(&pc, COMPRESS_TOL)?;
                    Ok::<_, morpho_hebb::ModelError>((alpha, chain))
                })
                .collect::<Result<_, _>>()?;
            println!("word n_alpha measured_cost cost_gamma");
            for (alpha, chain) in compressed {
                let rec = store.get_mut(alpha).unwrap();
                let n_alpha = rec.word.chars().count();
                let bound = cost_gamma(h.alphabet().d() as u64, n_alpha as u64)?;
                println!(
                    "{} {} {} {}",
                    rec.word,
                    n_alpha,
                    measured_cost(&chain),
                    bound
                );
                rec.compressed = Some(chain);
            }
            atomic_write(&out, &store_to_json(&store)?)?;
            println!(
                "summary command=compress embeddings={} out={}",
                store.len(),
                out.display()
            );
        }
        Command::Stats {
            input,
            vocab,
            types,
            out_dir,
            alphabet,
        } => {
            let a = parse_alphabet(&alphabet)?;
            let raw = std::fs::read_to_string(&input)?;
            let words: Vec<String> = if vocab {
                raw.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(str::to_string)
                    .collect()
            } else {
                let stream = normalize_text(&raw, &a);
                stream
                    .words()
                    .iter()
                    .map(|w| a.decode(w))
                    .collect::<Result<_, _>>()?
            };
            let hist = count_intraword_ngrams(&words);
            let (peak, n_max) = peak_and_collapse(&hist)?;

            let mut csv = String::from("n,d_n\n");
            for n in 1..=n_max {
                csv.push_str(&format!("{n},{}\n", hist.d(n)));
            }
            atomic_write(&out_dir.join("histogram.csv"), &csv)?;

            let mode = if types { CountMode::Types } else { CountMode::Tokens };
            let table = rank_frequency(&words, mode);
            let mut csv = String::from("n,rank,gram,frequency\n");
            for (n, rows) in &table.per_n {
                for (rank, (gram, freq)) in rows.iter().enumerate() {
                    csv.push_str(&format!("{n},{},{gram},{freq}\n", rank + 1));
                }
            }
            atomic_write(&out_dir.join("rankfreq.csv"), &csv)?;

            let fit = fit_lognormal(&hist)?;
            let csv = format!(
                "mu,sigma,N,residual\n{},{},{},{}\n",
                fit.mu, fit.sigma, fit.n_total, fit.residual
            );
            atomic_write(&out_dir.join("fit.csv"), &csv)?;

            println!(
                "summary command=stats words={} n_peak={} n_max={} mu={:.4} sigma={:.4} residual={:.4}",
                words.len(),
                peak,
                n_max,
                fit.mu,
                fit.sigma,
                fit.residual
            );
        }
        Command::Decode { hierarchy, string } => {
            let h = load_hierarchy(&hierarchy)?;
            let token = project_up(&h, &string)?.ok_or_else(|| {
                morpho_hebb::ModelError::Consistency(format!("{string:?} is not a learned token"))
            })?;
            // show the constituent grams at every level of the token's cone
            let gram = h.alphabet().encode(&string)?;
            for n in (2..=gram.len()).rev() {
                let parts: BTreeSet<String> = gram
                    .windows(n)
                    .map(|w| h.alphabet().decode(w))
                    .collect::<Result<_, _>>()?;
                let parts: Vec<String> = parts.into_iter().collect();
                println!("level {n}: {}", parts.join("|"));
            }
            println!(
                "summary command=decode level={} index={}",
                token.n, token.mu
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("MORPHO_HEBB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
