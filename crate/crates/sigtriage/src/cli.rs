//! The `sigtriage` command-line tool.
//!
//! Subcommands: `hash`, `compare`, `scan`, `triage`, `eval`. Results go to
//! stdout, diagnostics to stderr. Per-file work may run in parallel —
//! `SIGTRIAGE_THREADS` overrides the worker count (0 = sequential) — but
//! output is buffered per file and emitted in deterministic order.
//!
//! Exit codes: 0 success (triage: all unknown), 2 I/O failure, 3 any
//! suspicious file, 4 any malicious file, 64 usage error, 65 unparseable
//! input (signatures or rules), 73 cannot create output.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::ctph;
use crate::engine::{self, CompiledRuleSet};
use crate::exacthash::digest_bytes;
use crate::harness::{self, CorpusManifest};
use crate::rulelang;
use crate::sigstore::{SignatureKind, SignatureStore};
use crate::triage::{self, ReportFormat, TriageConfig, Verdict};

const EXIT_OK: u8 = 0;
const EXIT_IO: u8 = 2;
const EXIT_SUSPICIOUS: u8 = 3;
const EXIT_MALICIOUS: u8 = 4;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_CANTCREAT: u8 = 73;

#[derive(Parser)]
#[command(name = "sigtriage", version, about = "Signature-based malware triage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print `<sha256>  <fuzzy-signature>  <path>` for each file
    Hash {
        /// Files or directories (recursed in lexicographic order)
        paths: Vec<PathBuf>,
        /// Skip files larger than this many bytes
        #[arg(long, default_value_t = triage::DEFAULT_MAX_FILE_SIZE)]
        max_file_size: u64,
    },
    /// Compare two fuzzy signatures and print the 0-100 similarity
    Compare { sig_a: String, sig_b: String },
    /// Scan files against rules and list matched rule names
    Scan {
        /// Rule files or directories of .yar files (repeatable)
        #[arg(long = "rules", value_name = "PATH")]
        rules: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
        #[arg(long, default_value_t = triage::DEFAULT_MAX_FILE_SIZE)]
        max_file_size: u64,
        paths: Vec<PathBuf>,
    },
    /// Run all three approaches on files and report verdicts
    Triage {
        #[arg(long = "rules", value_name = "PATH")]
        rules: Vec<PathBuf>,
        /// CSV of known digests: value,family,source,first_seen (repeatable)
        #[arg(long = "exact-db", value_name = "PATH")]
        exact_db: Vec<PathBuf>,
        /// CSV of known fuzzy signatures (repeatable)
        #[arg(long = "fuzzy-db", value_name = "PATH")]
        fuzzy_db: Vec<PathBuf>,
        /// Minimum fuzzy similarity counted as a detection
        #[arg(long, default_value_t = triage::DEFAULT_FUZZY_THRESHOLD,
              value_parser = clap::value_parser!(u32).range(0..=100))]
        threshold: u32,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
        #[arg(long, default_value_t = triage::DEFAULT_MAX_FILE_SIZE)]
        max_file_size: u64,
        paths: Vec<PathBuf>,
    },
    /// Generate a synthetic corpus, run the experiment, write the table
    Eval {
        #[arg(long, default_value_t = harness::DEFAULT_SEED)]
        seed: u64,
        /// Output directory for corpus and tables
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = triage::DEFAULT_FUZZY_THRESHOLD,
              value_parser = clap::value_parser!(u32).range(0..=100))]
        threshold: u32,
    },
}

/// Entry point for the binary.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(dispatch(cli))
}

fn dispatch(cli: Cli) -> u8 {
    match cli.command {
        Command::Hash {
            paths,
            max_file_size,
        } => cmd_hash(&paths, max_file_size),
        Command::Compare { sig_a, sig_b } => cmd_compare(&sig_a, &sig_b),
        Command::Scan {
            rules,
            format,
            max_file_size,
            paths,
        } => cmd_scan(&rules, format, max_file_size, &paths),
        Command::Triage {
            rules,
            exact_db,
            fuzzy_db,
            threshold,
            format,
            max_file_size,
            paths,
        } => cmd_triage(
            &rules,
            &exact_db,
            &fuzzy_db,
            threshold,
            format,
            max_file_size,
            &paths,
        ),
        Command::Eval {
            seed,
            out,
            threshold,
        } => cmd_eval(seed, &out, threshold),
    }
}

/// Expands files and directories into a deterministic lexicographic file
/// list.
fn expand_paths(paths: &[PathBuf]) -> (Vec<PathBuf>, Vec<String>) {
    let mut files = Vec::new();
    let mut errors = Vec::new();
    for path in paths {
        if path.is_dir() {
            let walker = walkdir::WalkDir::new(path).sort_by_file_name();
            for entry in walker {
                match entry {
                    Ok(e) if e.file_type().is_file() => files.push(e.path().to_path_buf()),
                    Ok(_) => {}
                    Err(e) => errors.push(format!("sigtriage: {e}")),
                }
            }
        } else {
            files.push(path.clone());
        }
    }
    (files, errors)
}

/// Maps `f` over `items`, preserving order. `SIGTRIAGE_THREADS` picks the
/// worker count: 0 or 1 forces sequential, unset uses the default pool.
fn parallel_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    let setting = std::env::var("SIGTRIAGE_THREADS").ok().and_then(|v| {
        v.parse::<usize>()
            .map_err(|_| eprintln!("sigtriage: ignoring invalid SIGTRIAGE_THREADS value {v:?}"))
            .ok()
    });
    match setting {
        Some(0) | Some(1) => items.into_iter().map(f).collect(),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| items.into_par_iter().map(f).collect()),
            Err(_) => items.into_iter().map(f).collect(),
        },
        None => items.into_par_iter().map(f).collect(),
    }
}

/// Reads a file, refusing anything over the size cap.
fn read_capped(path: &Path, max_file_size: u64) -> Result<Vec<u8>, String> {
    let meta = std::fs::metadata(path)
        .map_err(|e| format!("sigtriage: cannot read {}: {e}", path.display()))?;
    if meta.len() > max_file_size {
        return Err(format!(
            "sigtriage: skipping {}: {} bytes exceeds --max-file-size {}",
            path.display(),
            meta.len(),
            max_file_size
        ));
    }
    std::fs::read(path).map_err(|e| format!("sigtriage: cannot read {}: {e}", path.display()))
}

fn load_compiled_rules(paths: &[PathBuf]) -> Result<CompiledRuleSet, String> {
    let ruleset = rulelang::load_rule_files(paths).map_err(|e| format!("sigtriage: {e}"))?;
    engine::compile(&ruleset).map_err(|e| format!("sigtriage: {e}"))
}

fn usage_error(message: &str) -> u8 {
    eprintln!("sigtriage: {message}");
    eprintln!("Try 'sigtriage --help' for usage.");
    EXIT_USAGE
}

fn cmd_hash(paths: &[PathBuf], max_file_size: u64) -> u8 {
    if paths.is_empty() {
        return usage_error("hash: no input files given");
    }
    let (files, walk_errors) = expand_paths(paths);
    for e in &walk_errors {
        eprintln!("{e}");
    }
    let lines = parallel_map(files, |path| {
        let data = read_capped(&path, max_file_size)?;
        let digest = digest_bytes(&data);
        let sig = match ctph::fuzzy_hash(&data) {
            Ok(sig) => sig.to_string(),
            Err(_) => "-".to_string(), // empty file: digest only
        };
        Ok::<String, String>(format!("{}  {}  {}", digest.hex(), sig, path.display()))
    });
    let mut failed = !walk_errors.is_empty();
    for line in lines {
        match line {
            Ok(l) => println!("{l}"),
            Err(e) => {
                eprintln!("{e}");
                failed = true;
            }
        }
    }
    if failed {
        EXIT_IO
    } else {
        EXIT_OK
    }
}

fn cmd_compare(sig_a: &str, sig_b: &str) -> u8 {
    let a = match ctph::parse_signature(sig_a) {
        Ok(sig) => sig,
        Err(e) => {
            eprintln!("sigtriage: first signature: {e}");
            return EXIT_DATA;
        }
    };
    let b = match ctph::parse_signature(sig_b) {
        Ok(sig) => sig,
        Err(e) => {
            eprintln!("sigtriage: second signature: {e}");
            return EXIT_DATA;
        }
    };
    println!("{}", ctph::fuzzy_compare(&a, &b));
    EXIT_OK
}

fn cmd_scan(rules: &[PathBuf], format: ReportFormat, max_file_size: u64, paths: &[PathBuf]) -> u8 {
    if paths.is_empty() {
        return usage_error("scan: no input files given");
    }
    let compiled = match load_compiled_rules(rules) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_DATA;
        }
    };
    let (files, walk_errors) = expand_paths(paths);
    for e in &walk_errors {
        eprintln!("{e}");
    }
    let outputs = parallel_map(files, |path| {
        let data = read_capped(&path, max_file_size)?;
        let result = engine::scan(&compiled, &data);
        let rendered = match format {
            ReportFormat::Json => {
                let mut line = serde_json::json!({
                    "file": path.display().to_string(),
                });
                let as_value = serde_json::to_value(&result).expect("result serializes");
                line.as_object_mut()
                    .expect("object")
                    .extend(as_value.as_object().expect("object").clone());
                serde_json::to_string(&line).expect("serializes")
            }
            ReportFormat::Text => {
                let mut out = format!("-{}:\n", path.display());
                let matched: Vec<&str> = result.matched_rules().map(|r| r.name.as_str()).collect();
                if matched.is_empty() {
                    out.push_str("(no matches)\n");
                } else {
                    for name in matched {
                        out.push_str(name);
                        out.push('\n');
                    }
                }
                out
            }
        };
        Ok::<String, String>(rendered)
    });
    let mut failed = !walk_errors.is_empty();
    for output in outputs {
        match output {
            Ok(text) => match format {
                ReportFormat::Json => println!("{text}"),
                ReportFormat::Text => print!("{text}"),
            },
            Err(e) => {
                eprintln!("{e}");
                failed = true;
            }
        }
    }
    if failed {
        EXIT_IO
    } else {
        EXIT_OK
    }
}

fn cmd_triage(
    rules: &[PathBuf],
    exact_db: &[PathBuf],
    fuzzy_db: &[PathBuf],
    threshold: u32,
    format: ReportFormat,
    max_file_size: u64,
    paths: &[PathBuf],
) -> u8 {
    if paths.is_empty() {
        return usage_error("triage: no input files given");
    }
    let compiled = match load_compiled_rules(rules) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_DATA;
        }
    };
    let mut store = SignatureStore::new();
    for (paths, kind) in [
        (exact_db, SignatureKind::Exact),
        (fuzzy_db, SignatureKind::Fuzzy),
    ] {
        for path in paths {
            match store.import_signatures(path, kind) {
                Ok(summary) => {
                    for warning in &summary.warnings {
                        eprintln!("sigtriage: {warning}");
                    }
                }
                Err(e @ crate::sigstore::StoreError::TooManyBadRows { .. }) => {
                    eprintln!("sigtriage: {e}");
                    return EXIT_DATA;
                }
                Err(e) => {
                    eprintln!("sigtriage: {e}");
                    return EXIT_IO;
                }
            }
        }
    }

    let cfg = TriageConfig {
        fuzzy_threshold: threshold,
        max_file_size,
        ..TriageConfig::default()
    };
    let (files, walk_errors) = expand_paths(paths);
    for e in &walk_errors {
        eprintln!("{e}");
    }
    let reports = parallel_map(files, |path| {
        triage::triage_file(&path, &store, &compiled, &cfg).map_err(|e| format!("sigtriage: {e}"))
    });

    let mut worst: Option<Verdict> = None;
    let mut any_failed = !walk_errors.is_empty();
    for report in reports {
        match report {
            Ok(report) => {
                worst = Some(worst.map_or(report.verdict, |w| w.max(report.verdict)));
                match format {
                    ReportFormat::Json => println!("{}", triage::render_report(&report, format)),
                    ReportFormat::Text => print!("{}", triage::render_report(&report, format)),
                }
            }
            Err(e) => {
                eprintln!("{e}");
                any_failed = true;
            }
        }
    }
    match worst {
        None if any_failed => EXIT_IO,
        None => EXIT_OK,
        Some(Verdict::KnownMalicious | Verdict::LikelyMalicious) => EXIT_MALICIOUS,
        Some(Verdict::Suspicious) => EXIT_SUSPICIOUS,
        Some(Verdict::Unknown) => EXIT_OK,
    }
}

fn cmd_eval(seed: u64, out: &Path, threshold: u32) -> u8 {
    let manifest = CorpusManifest::with_seed(seed);
    let cfg = TriageConfig {
        fuzzy_threshold: threshold,
        ..TriageConfig::default()
    };
    match harness::run_full_experiment(&manifest, out, &cfg) {
        Ok(output) => {
            print!("{}", output.table.to_text());
            eprintln!(
                "sigtriage: corpus and tables written under {}",
                output.corpus.root.display()
            );
            EXIT_OK
        }
        Err(e @ harness::HarnessError::Io { .. }) => {
            eprintln!("sigtriage: {e}");
            EXIT_CANTCREAT
        }
        Err(e) => {
            eprintln!("sigtriage: {e}");
            EXIT_DATA
        }
    }
}
