//! Experiment harness: synthetic corpora, obfuscation-style mutations, and
//! detection tables comparing the three approaches.
//!
//! Samples are benign random blobs with high-entropy marker patterns planted
//! per family; the generated rules target those markers. The *known* set is
//! emitted together with signature DB rows (its hashes exist in the
//! repository); the *variant* set mutates known samples; the *novel* set
//! draws from families with no signatures and no rules. Everything is
//! deterministic in the manifest seed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{compile, CompiledRuleSet};
use crate::rulelang;
use crate::sigstore::{SignatureKind, SignatureStore};
use crate::triage::{triage_bytes, TriageConfig, Verdict};

/// Fixed bytes prepended by the xor encoder, standing in for a packer stub.
/// Rules can detect xor-encoded samples only through this marker.
pub const XOR_STUB: [u8; 16] = [
    0x7f, 0x50, 0x4b, 0x53, 0x54, 0x55, 0x42, 0x01, 0x5a, 0xc3, 0x99, 0x10, 0x46, 0x72, 0x88, 0x3d,
];

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone)]
pub struct FamilySpec {
    pub name: String,
    pub base_size: usize,
    /// Planted byte patterns; each sample of the family contains all of them.
    pub markers: Vec<Vec<u8>>,
}

#[derive(Debug, Clone)]
pub struct CorpusManifest {
    pub seed: u64,
    pub families: Vec<FamilySpec>,
    pub known_count: usize,
    pub variant_count: usize,
    pub novel_count: usize,
}

impl CorpusManifest {
    /// The default corpus: five planted families, fifteen known and fifteen
    /// variant samples, five novel samples. Marker bytes derive from the
    /// seed, so the whole manifest is reproducible.
    pub fn with_seed(seed: u64) -> CorpusManifest {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let names = [
            "alphaworm",
            "betaloader",
            "gammarat",
            "deltabot",
            "epsilonminer",
        ];
        let families = names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let markers = (0..3)
                    .map(|_| {
                        let mut marker = vec![0u8; 24];
                        rng.fill(&mut marker[..]);
                        marker
                    })
                    .collect();
                FamilySpec {
                    name: name.to_string(),
                    base_size: (32 + 8 * i) * 1024,
                    markers,
                }
            })
            .collect();
        CorpusManifest {
            seed,
            families,
            known_count: 15,
            variant_count: 15,
            novel_count: 5,
        }
    }
}

impl Default for CorpusManifest {
    fn default() -> Self {
        CorpusManifest::with_seed(DEFAULT_SEED)
    }
}

/// One obfuscation-style transformation applied to a known sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MutationSpec {
    ByteFlip { count: usize },
    AppendRandom { len: usize },
    PrependRandom { len: usize },
    Truncate { len: usize },
    XorEncode { key: u8 },
    BlockShuffle { block: usize },
}

impl MutationSpec {
    pub fn describe(&self) -> String {
        match self {
            MutationSpec::ByteFlip { count } => format!("byte-flip({count})"),
            MutationSpec::AppendRandom { len } => format!("append-random({len})"),
            MutationSpec::PrependRandom { len } => format!("prepend-random({len})"),
            MutationSpec::Truncate { len } => format!("truncate({len})"),
            MutationSpec::XorEncode { key } => format!("xor-encode(0x{key:02x})"),
            MutationSpec::BlockShuffle { block } => format!("block-shuffle({block})"),
        }
    }

    /// Applies the mutation. Parameters are clamped to the file bounds; the
    /// result always differs from the input for non-empty data.
    pub fn apply(&self, data: &[u8], rng: &mut ChaCha8Rng) -> Vec<u8> {
        match *self {
            MutationSpec::ByteFlip { count } => {
                let mut out = data.to_vec();
                for _ in 0..count.min(out.len()) {
                    let pos = rng.gen_range(0..out.len());
                    let bits = rng.gen_range(1..=255u8);
                    out[pos] ^= bits;
                }
                out
            }
            MutationSpec::AppendRandom { len } => {
                let mut out = data.to_vec();
                let mut extra = vec![0u8; len];
                rng.fill(&mut extra[..]);
                out.extend_from_slice(&extra);
                out
            }
            MutationSpec::PrependRandom { len } => {
                let mut extra = vec![0u8; len];
                rng.fill(&mut extra[..]);
                extra.extend_from_slice(data);
                extra
            }
            MutationSpec::Truncate { len } => {
                let keep = data.len().saturating_sub(len).max(1);
                data[..keep].to_vec()
            }
            MutationSpec::XorEncode { key } => {
                let mut out = XOR_STUB.to_vec();
                out.extend(data.iter().map(|b| b ^ key));
                out
            }
            MutationSpec::BlockShuffle { block } => {
                let block = block.max(1);
                let mut chunks: Vec<&[u8]> = data.chunks(block).collect();
                let original: Vec<usize> = (0..chunks.len()).collect();
                let mut order = original.clone();
                order.shuffle(rng);
                if order == original && order.len() > 1 {
                    order.rotate_left(1);
                }
                let reordered: Vec<&[u8]> = order.iter().map(|&i| chunks[i]).collect();
                chunks = reordered;
                chunks.concat()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Exact,
    Fuzzy,
    Rules,
}

impl Approach {
    pub const ALL: [Approach; 3] = [Approach::Exact, Approach::Fuzzy, Approach::Rules];

    pub fn as_str(&self) -> &'static str {
        match self {
            Approach::Exact => "exact",
            Approach::Fuzzy => "fuzzy",
            Approach::Rules => "rules",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleSet {
    Known,
    Variant,
    Novel,
}

impl SampleSet {
    pub const ALL: [SampleSet; 3] = [SampleSet::Known, SampleSet::Variant, SampleSet::Novel];

    pub fn as_str(&self) -> &'static str {
        match self {
            SampleSet::Known => "known",
            SampleSet::Variant => "variant",
            SampleSet::Novel => "novel",
        }
    }

    fn parse(s: &str) -> Option<SampleSet> {
        match s {
            "known" => Some(SampleSet::Known),
            "variant" => Some(SampleSet::Variant),
            "novel" => Some(SampleSet::Novel),
            _ => None,
        }
    }
}

/// Detection counts for one approach on one sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableCell {
    pub approach: Approach,
    pub set: SampleSet,
    pub total: usize,
    /// Samples with any evidence at all from this approach.
    pub matched: usize,
    /// Samples this approach alone would call malicious.
    pub detected: usize,
    /// Detected samples whose classification equals the ground truth.
    pub classified: usize,
}

/// Per-approach, per-set detection results.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionTable {
    pub cells: Vec<TableCell>,
}

impl DetectionTable {
    pub fn cell(&self, approach: Approach, set: SampleSet) -> &TableCell {
        self.cells
            .iter()
            .find(|c| c.approach == approach && c.set == set)
            .expect("table covers all approach x set combinations")
    }

    /// Internal consistency: detected <= matched <= total and
    /// classified <= detected in every cell.
    pub fn validate(&self) -> Result<(), String> {
        for c in &self.cells {
            if !(c.detected <= c.matched && c.matched <= c.total && c.classified <= c.detected) {
                return Err(format!(
                    "inconsistent cell {}/{}: total {} matched {} detected {} classified {}",
                    c.approach.as_str(),
                    c.set.as_str(),
                    c.total,
                    c.matched,
                    c.detected,
                    c.classified
                ));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("approach,set,total,matched,detected,classified\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                c.approach.as_str(),
                c.set.as_str(),
                c.total,
                c.matched,
                c.detected,
                c.classified
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:<9} {:>6} {:>8} {:>9} {:>11}",
            "approach", "set", "total", "matched", "detected", "classified"
        );
        let _ = writeln!(out, "{}", "-".repeat(58));
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{:<10} {:<9} {:>6} {:>8} {:>9} {:>11}",
                c.approach.as_str(),
                c.set.as_str(),
                c.total,
                c.matched,
                c.detected,
                c.classified
            );
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("corpus manifest declares zero families")]
    ZeroFamilies,
    #[error("missing ground-truth file {path}")]
    MissingGroundTruth { path: String },
    #[error("{path}:{line}: malformed ground-truth row")]
    BadGroundTruth { path: String, line: usize },
    #[error(transparent)]
    Store(#[from] crate::sigstore::StoreError),
    #[error("rules: {0}")]
    Rules(#[from] rulelang::RuleLoadError),
    #[error("rules: {0}")]
    Compile(#[from] crate::engine::CompileError),
}

/// Everything `generate_corpus` writes, by path.
#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub root: PathBuf,
    pub ground_truth: PathBuf,
    pub exact_db: PathBuf,
    pub fuzzy_db: PathBuf,
    pub rules: PathBuf,
    pub samples: Vec<GroundTruthRow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthRow {
    /// Sample path relative to the corpus root.
    pub path: String,
    pub family: String,
    pub set: SampleSet,
    /// Empty for unmutated samples.
    pub mutation: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// The fixed mutation plan applied round-robin to variant samples: mostly
/// small edits that fuzzy hashing should absorb, plus xor encodings and
/// block shuffles that defeat it.
fn mutation_plan(base_size: usize) -> Vec<MutationSpec> {
    let pct = (base_size / 100).max(1);
    vec![
        MutationSpec::ByteFlip { count: 8 },
        MutationSpec::AppendRandom { len: pct },
        MutationSpec::PrependRandom { len: pct },
        MutationSpec::Truncate { len: pct },
        MutationSpec::ByteFlip { count: 8 },
        MutationSpec::AppendRandom { len: pct },
        MutationSpec::XorEncode { key: 0x5a },
        MutationSpec::BlockShuffle { block: 4096 },
        MutationSpec::Truncate { len: pct },
        MutationSpec::ByteFlip { count: 8 },
        MutationSpec::PrependRandom { len: pct },
        MutationSpec::AppendRandom { len: pct },
        MutationSpec::XorEncode { key: 0xa7 },
        MutationSpec::BlockShuffle { block: 8192 },
        MutationSpec::Truncate { len: pct },
    ]
}

fn generate_sample(family: &FamilySpec, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut data = vec![0u8; family.base_size];
    rng.fill(&mut data[..]);
    let slots = family.markers.len() + 1;
    for (j, marker) in family.markers.iter().enumerate() {
        let pos = (j + 1) * family.base_size / slots;
        let end = (pos + marker.len()).min(data.len());
        data[pos..end].copy_from_slice(&marker[..end - pos]);
    }
    data
}

fn hex_tokens(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|b| format!("{b:02X}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// The demonstration rule set for a manifest: one malicious-severity rule
/// per family keyed on its planted markers, plus a suspicious-severity rule
/// for the xor encoder stub.
pub fn demo_rules_text(manifest: &CorpusManifest) -> String {
    let mut out = String::new();
    for family in &manifest.families {
        let _ = writeln!(out, "rule {}_markers : {} {{", family.name, family.name);
        let _ = writeln!(out, "    meta:");
        let _ = writeln!(out, "        severity = \"malicious\"");
        let _ = writeln!(out, "        family = \"{}\"", family.name);
        let _ = writeln!(out, "    strings:");
        for (i, marker) in family.markers.iter().enumerate() {
            let _ = writeln!(out, "        $m{i} = {{ {} }}", hex_tokens(marker));
        }
        let _ = writeln!(out, "    condition:");
        let _ = writeln!(out, "        any of them");
        let _ = writeln!(out, "}}\n");
    }
    let _ = writeln!(out, "rule xor_packer_stub : IsPacked {{");
    let _ = writeln!(out, "    meta:");
    let _ = writeln!(out, "        severity = \"suspicious\"");
    let _ = writeln!(
        out,
        "        description = \"fixed stub prepended by the xor encoder\""
    );
    let _ = writeln!(out, "    strings:");
    let _ = writeln!(out, "        $s = {{ {} }}", hex_tokens(&XOR_STUB));
    let _ = writeln!(out, "    condition:");
    let _ = writeln!(out, "        $s");
    let _ = writeln!(out, "}}");
    out
}

/// Writes the corpus: samples, ground truth, signature DBs for the known
/// set, and the demonstration rules. Byte-identical for identical manifests.
pub fn generate_corpus(
    manifest: &CorpusManifest,
    out_dir: &Path,
) -> Result<GeneratedCorpus, HarnessError> {
    if manifest.families.is_empty() {
        return Err(HarnessError::ZeroFamilies);
    }
    let samples_dir = out_dir.join("samples");
    std::fs::create_dir_all(&samples_dir).map_err(io_err(&samples_dir))?;

    let mut rng = ChaCha8Rng::seed_from_u64(manifest.seed);
    let mut rows: Vec<GroundTruthRow> = Vec::new();
    let mut exact_db = String::from("value,family,source,first_seen\n");
    let mut fuzzy_db = String::from("value,family,source,first_seen\n");

    // Known set: emitted with DB rows, modeling malware that repositories
    // have already fingerprinted.
    let mut known_data: Vec<(usize, Vec<u8>)> = Vec::new();
    for i in 0..manifest.known_count {
        let fam_idx = i % manifest.families.len();
        let family = &manifest.families[fam_idx];
        let data = generate_sample(family, &mut rng);
        let rel = format!("samples/known_{i:02}_{}.bin", family.name);
        let path = out_dir.join(&rel);
        std::fs::write(&path, &data).map_err(io_err(&path))?;
        let _ = writeln!(
            exact_db,
            "{},{},synthetic-known,2021-11-01",
            crate::exacthash::digest_bytes(&data).hex(),
            family.name
        );
        let _ = writeln!(
            fuzzy_db,
            "{},{},synthetic-known,2021-11-01",
            crate::ctph::fuzzy_hash(&data).expect("samples are non-empty"),
            family.name
        );
        rows.push(GroundTruthRow {
            path: rel,
            family: family.name.clone(),
            set: SampleSet::Known,
            mutation: String::new(),
        });
        known_data.push((fam_idx, data));
    }

    // Variant set: mutated copies of known samples.
    for i in 0..manifest.variant_count {
        let (fam_idx, base) = &known_data[i % known_data.len()];
        let family = &manifest.families[*fam_idx];
        let plan = mutation_plan(family.base_size);
        let mutation = &plan[i % plan.len()];
        let data = mutation.apply(base, &mut rng);
        let rel = format!("samples/variant_{i:02}_{}.bin", family.name);
        let path = out_dir.join(&rel);
        std::fs::write(&path, &data).map_err(io_err(&path))?;
        rows.push(GroundTruthRow {
            path: rel,
            family: family.name.clone(),
            set: SampleSet::Variant,
            mutation: mutation.describe(),
        });
    }

    // Novel set: families nobody has signatures or rules for.
    let novel_names = ["zetapacker", "etastealer"];
    for i in 0..manifest.novel_count {
        let name = novel_names[i % novel_names.len()];
        let mut data = vec![0u8; 36 * 1024];
        rng.fill(&mut data[..]);
        let rel = format!("samples/novel_{i:02}_{name}.bin");
        let path = out_dir.join(&rel);
        std::fs::write(&path, &data).map_err(io_err(&path))?;
        rows.push(GroundTruthRow {
            path: rel,
            family: name.to_string(),
            set: SampleSet::Novel,
            mutation: String::new(),
        });
    }

    let ground_truth = out_dir.join("ground_truth.csv");
    let mut gt = String::from("path,family,set,mutation\n");
    for row in &rows {
        let _ = writeln!(
            gt,
            "{},{},{},{}",
            row.path,
            row.family,
            row.set.as_str(),
            row.mutation
        );
    }
    std::fs::write(&ground_truth, gt).map_err(io_err(&ground_truth))?;

    let exact_path = out_dir.join("exact_db.csv");
    std::fs::write(&exact_path, exact_db).map_err(io_err(&exact_path))?;
    let fuzzy_path = out_dir.join("fuzzy_db.csv");
    std::fs::write(&fuzzy_path, fuzzy_db).map_err(io_err(&fuzzy_path))?;
    let rules_path = out_dir.join("rules.yar");
    std::fs::write(&rules_path, demo_rules_text(manifest)).map_err(io_err(&rules_path))?;

    Ok(GeneratedCorpus {
        root: out_dir.to_path_buf(),
        ground_truth,
        exact_db: exact_path,
        fuzzy_db: fuzzy_path,
        rules: rules_path,
        samples: rows,
    })
}

fn read_ground_truth(corpus_dir: &Path) -> Result<Vec<GroundTruthRow>, HarnessError> {
    let path = corpus_dir.join("ground_truth.csv");
    if !path.exists() {
        return Err(HarnessError::MissingGroundTruth {
            path: path.display().to_string(),
        });
    }
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(4, ',').collect();
        let parsed = (fields.len() == 4)
            .then(|| SampleSet::parse(fields[2]))
            .flatten();
        let Some(set) = parsed else {
            return Err(HarnessError::BadGroundTruth {
                path: path.display().to_string(),
                line: i + 1,
            });
        };
        rows.push(GroundTruthRow {
            path: fields[0].to_string(),
            family: fields[1].to_string(),
            set,
            mutation: fields[3].to_string(),
        });
    }
    Ok(rows)
}

/// Runs the three approaches in isolation over every corpus sample and
/// tallies matched / detected / correctly-classified counts per sample set.
pub fn run_experiment(
    corpus_dir: &Path,
    store: &SignatureStore,
    rules: &CompiledRuleSet,
    cfg: &TriageConfig,
) -> Result<DetectionTable, HarnessError> {
    let ground_truth = read_ground_truth(corpus_dir)?;
    let empty_rules = compile(&rulelang::RuleSet::default()).expect("empty set compiles");
    let empty_store = SignatureStore::new();

    let mut tally: std::collections::BTreeMap<(Approach, SampleSet), TableCell> =
        std::collections::BTreeMap::new();
    for approach in Approach::ALL {
        for set in SampleSet::ALL {
            tally.insert(
                (approach, set),
                TableCell {
                    approach,
                    set,
                    total: 0,
                    matched: 0,
                    detected: 0,
                    classified: 0,
                },
            );
        }
    }

    for row in &ground_truth {
        let path = corpus_dir.join(&row.path);
        let data = std::fs::read(&path).map_err(io_err(&path))?;

        // Hash approaches: triage with the store but no rules.
        let hash_report = triage_bytes(&row.path, &data, store, &empty_rules, cfg);
        // Rule approach: triage with rules but an empty store.
        let rule_report = triage_bytes(&row.path, &data, &empty_store, rules, cfg);

        {
            let cell = tally
                .get_mut(&(Approach::Exact, row.set))
                .expect("prefilled");
            cell.total += 1;
            if let Some(exact) = &hash_report.evidence.exact {
                cell.matched += 1;
                cell.detected += 1;
                if exact.family == row.family {
                    cell.classified += 1;
                }
            }
        }
        {
            let cell = tally
                .get_mut(&(Approach::Fuzzy, row.set))
                .expect("prefilled");
            cell.total += 1;
            if !hash_report.evidence.fuzzy.is_empty() {
                cell.matched += 1;
            }
            let detected = hash_report
                .evidence
                .fuzzy
                .iter()
                .any(|hit| hit.score >= cfg.fuzzy_threshold);
            if detected {
                cell.detected += 1;
                if hash_report
                    .evidence
                    .fuzzy
                    .iter()
                    .any(|hit| hit.score >= cfg.fuzzy_threshold && hit.family == row.family)
                {
                    cell.classified += 1;
                }
            }
        }
        {
            let cell = tally
                .get_mut(&(Approach::Rules, row.set))
                .expect("prefilled");
            cell.total += 1;
            if !rule_report.evidence.rules.is_empty() {
                cell.matched += 1;
            }
            if rule_report.verdict >= Verdict::LikelyMalicious {
                cell.detected += 1;
                if rule_report
                    .evidence
                    .rules
                    .iter()
                    .any(|r| r.family.as_deref() == Some(row.family.as_str()))
                {
                    cell.classified += 1;
                }
            }
        }
    }

    let table = DetectionTable {
        cells: tally.into_values().collect(),
    };
    debug_assert!(table.validate().is_ok());
    Ok(table)
}

/// Output paths of [`run_full_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub corpus: GeneratedCorpus,
    pub table: DetectionTable,
    pub table_csv: PathBuf,
    pub table_txt: PathBuf,
}

/// End-to-end: generate the corpus, load its DBs and rules back through the
/// regular import paths, run the experiment, and write the table as CSV and
/// aligned text.
pub fn run_full_experiment(
    manifest: &CorpusManifest,
    out_dir: &Path,
    cfg: &TriageConfig,
) -> Result<ExperimentOutput, HarnessError> {
    let corpus = generate_corpus(manifest, out_dir)?;

    let mut store = SignatureStore::new();
    store.import_signatures(&corpus.exact_db, SignatureKind::Exact)?;
    store.import_signatures(&corpus.fuzzy_db, SignatureKind::Fuzzy)?;
    let ruleset = rulelang::load_rule_files(std::slice::from_ref(&corpus.rules))?;
    let compiled = compile(&ruleset)?;

    let table = run_experiment(out_dir, &store, &compiled, cfg)?;

    let table_csv = out_dir.join("table.csv");
    std::fs::write(&table_csv, table.to_csv()).map_err(io_err(&table_csv))?;
    let table_txt = out_dir.join("table.txt");
    std::fs::write(&table_txt, table.to_text()).map_err(io_err(&table_txt))?;

    Ok(ExperimentOutput {
        corpus,
        table,
        table_csv,
        table_txt,
    })
}
