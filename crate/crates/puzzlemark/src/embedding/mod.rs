//! Watermark embedding via variable-name concatenation.
//!
//! Each admitted carrier gets one adaptive trigger (prefix P, suffix S) and a
//! target T̃ = Cat(P, S, convention) spliced in by renaming a replacement
//! variable. Samples where the prefix occurs naturally need a single rename;
//! prefix injection adds a second. Everything else passes through untouched.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::syntax::{
    extract_variables, is_compound, parse, rename, CodeSample, NamingConvention, VariableEntry,
    VariableTable,
};

/// Trigger-prefix strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// User-chosen prefix; carriers are partitioned by its natural presence.
    Fixed,
    /// Prefix and suffix are each sample's first two variables.
    Universal,
}

/// Order in which carriers are considered for embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationOrder {
    CorpusOrder,
    SeededShuffle,
}

#[derive(Debug, Clone)]
pub struct EmbedConfig {
    pub strategy: Strategy,
    /// Required for the fixed strategy.
    pub prefix: Option<String>,
    pub convention: NamingConvention,
    pub rho_min: f64,
    pub rho_max: f64,
    pub order: IterationOrder,
    pub seed: u64,
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rho_min > 0.0 && self.rho_min <= 1.0) {
            return Err(format!("rho_min must be in (0, 1], got {}", self.rho_min));
        }
        if self.rho_max < self.rho_min || self.rho_max > 1.0 {
            return Err(format!(
                "rho_max must be in [rho_min, 1], got {}",
                self.rho_max
            ));
        }
        if self.strategy == Strategy::Fixed && self.prefix.as_deref().unwrap_or("").is_empty() {
            return Err("fixed strategy requires a trigger prefix".to_string());
        }
        Ok(())
    }
}

/// One recorded rename edit; replaying the list against the original sample
/// reproduces the watermarked sample byte-exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenameEdit {
    pub old: String,
    pub new: String,
    pub count: usize,
}

/// Per-sample embedding outcome, serialized as one manifest line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatermarkRecord {
    pub id: String,
    pub watermarked: bool,
    pub prefix: String,
    pub suffix: String,
    pub target: String,
    /// Replaced variable name; empty when the target pre-existed.
    pub replaced: String,
    /// True when the prefix was absent and injected by renaming.
    pub prefix_injected: bool,
    pub renames: Vec<RenameEdit>,
    pub skip_reason: Option<String>,
}

impl WatermarkRecord {
    fn skipped(id: &str, reason: &str) -> Self {
        WatermarkRecord {
            id: id.to_string(),
            watermarked: false,
            prefix: String::new(),
            suffix: String::new(),
            target: String::new(),
            replaced: String::new(),
            prefix_injected: false,
            renames: Vec::new(),
            skip_reason: Some(reason.to_string()),
        }
    }
}

/// Concatenate trigger prefix and suffix under a naming convention.
pub fn concat(prefix: &str, suffix: &str, convention: NamingConvention) -> String {
    match convention {
        NamingConvention::SnakeCase => format!("{prefix}_{suffix}"),
        NamingConvention::CamelCase => {
            let mut chars = suffix.chars();
            match chars.next() {
                Some(first) => {
                    format!("{prefix}{}{}", first.to_ascii_uppercase(), chars.as_str())
                }
                None => prefix.to_string(),
            }
        }
    }
}

/// Suffix selection: V′ is everything strictly after the prefix by first
/// offset; the suffix is its first element. Returns None (skip) when V′ has
/// at most one element, since a replacement target must remain.
pub fn choose_suffix(
    table: &VariableTable,
    prefix_index: usize,
) -> Option<(&VariableEntry, &[VariableEntry])> {
    let v_prime = &table.entries()[prefix_index + 1..];
    if v_prime.len() <= 1 {
        return None;
    }
    Some((&v_prime[0], v_prime))
}

/// Replacement-target selection outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplacementChoice {
    Replace(String),
    /// The target already exists naturally; the sample counts as watermarked
    /// with zero edits.
    AlreadyPresent,
}

/// Rules, in order: (iii) the target already names a variable anywhere in
/// the sample; (ii) the most frequent compound candidate; (i) the lowest-
/// frequency candidate. Frequency ties break by earliest first offset.
pub fn select_replacement_target(
    candidates: &[&VariableEntry],
    table: &VariableTable,
    target: &str,
    convention: NamingConvention,
) -> ReplacementChoice {
    if table.contains(target) {
        return ReplacementChoice::AlreadyPresent;
    }
    let compounds: Vec<&&VariableEntry> = candidates
        .iter()
        .filter(|e| is_compound(&e.name, convention))
        .collect();
    if !compounds.is_empty() {
        let best = compounds
            .iter()
            .max_by(|a, b| {
                a.frequency()
                    .cmp(&b.frequency())
                    .then(b.first_offset.cmp(&a.first_offset))
            })
            .unwrap();
        return ReplacementChoice::Replace(best.name.clone());
    }
    let best = candidates
        .iter()
        .min_by(|a, b| {
            a.frequency()
                .cmp(&b.frequency())
                .then(a.first_offset.cmp(&b.first_offset))
        })
        .unwrap();
    ReplacementChoice::Replace(best.name.clone())
}

/// Universal strategy: the first variable is the prefix, the next distinct
/// variable the suffix. None (skip) with fewer than two variables.
pub fn derive_universal_prefix(table: &VariableTable) -> Option<(&str, &str)> {
    let entries = table.entries();
    if entries.len() < 2 {
        return None;
    }
    Some((&entries[0].name, &entries[1].name))
}

/// Embed one watermark into a sample whose table contains the prefix.
/// On skip the sample is returned untouched.
pub fn embed_one(
    sample: &CodeSample,
    table: &VariableTable,
    prefix: &str,
    convention: NamingConvention,
) -> (WatermarkRecord, CodeSample) {
    let prefix_index = match table.index_of(prefix) {
        Some(index) => index,
        None => {
            return (
                WatermarkRecord::skipped(&sample.id, "prefix_absent"),
                sample.clone(),
            )
        }
    };
    let (suffix_entry, v_prime) = match choose_suffix(table, prefix_index) {
        Some(found) => found,
        None => {
            return (
                WatermarkRecord::skipped(&sample.id, "insufficient_variables"),
                sample.clone(),
            )
        }
    };
    let suffix = suffix_entry.name.clone();
    let target = concat(prefix, &suffix, convention);
    if !sample.language.is_valid_identifier(&target) {
        return (
            WatermarkRecord::skipped(&sample.id, "invalid_target"),
            sample.clone(),
        );
    }
    let candidates: Vec<&VariableEntry> = v_prime[1..].iter().collect();
    let mut record = WatermarkRecord {
        id: sample.id.clone(),
        watermarked: true,
        prefix: prefix.to_string(),
        suffix,
        target: target.clone(),
        replaced: String::new(),
        prefix_injected: false,
        renames: Vec::new(),
        skip_reason: None,
    };
    match select_replacement_target(&candidates, table, &target, convention) {
        ReplacementChoice::AlreadyPresent => (record, sample.clone()),
        ReplacementChoice::Replace(old) => match rename(sample, table, &old, &target) {
            Ok(outcome) => {
                record.replaced = old.clone();
                record.renames.push(RenameEdit {
                    old,
                    new: target,
                    count: outcome.replaced,
                });
                (record, outcome.sample)
            }
            Err(_) => (
                WatermarkRecord::skipped(&sample.id, "collision"),
                sample.clone(),
            ),
        },
    }
}

/// Random access to corpus records by position, so the driver can stream or
/// seek large corpora without holding code in memory.
pub trait SampleSource {
    fn count(&self) -> usize;
    fn sample(&self, index: usize) -> std::io::Result<CodeSample>;
}

impl SampleSource for [CodeSample] {
    fn count(&self) -> usize {
        self.len()
    }
    fn sample(&self, index: usize) -> std::io::Result<CodeSample> {
        Ok(self[index].clone())
    }
}

impl SampleSource for Vec<CodeSample> {
    fn count(&self) -> usize {
        self.len()
    }
    fn sample(&self, index: usize) -> std::io::Result<CodeSample> {
        Ok(self[index].clone())
    }
}

/// Result of a corpus embedding run. `records` has one entry per corpus
/// record in input order; `edited` maps corpus indices to rewritten samples.
#[derive(Debug)]
pub struct EmbedOutcome {
    pub records: Vec<WatermarkRecord>,
    pub edited: HashMap<usize, CodeSample>,
    pub admitted: usize,
    pub k_min: usize,
    pub k_max: usize,
}

impl EmbedOutcome {
    /// True when the carriers were exhausted below the minimum rate.
    pub fn rate_unreachable(&self) -> bool {
        self.admitted < self.k_min
    }
}

/// Count thresholds derived from rates against the full corpus size. The
/// 1e-9 nudges absorb binary representation error when ρ·N is integral.
pub fn rate_bounds(corpus_len: usize, rho_min: f64, rho_max: f64) -> (usize, usize) {
    let n = corpus_len as f64;
    let k_min = (rho_min * n - 1e-9).ceil().max(0.0) as usize;
    let k_max = (rho_max * n + 1e-9).floor().max(0.0) as usize;
    (k_min, k_max.max(k_min))
}

/// Run Algorithm-style embedding over the corpus.
///
/// Fixed strategy: carriers where the prefix occurs naturally are embedded
/// first, up to `k_max`; if the count is still below `k_min`, prefix-absent
/// carriers have their first variable renamed to the prefix and are embedded
/// until `k_min`. Universal strategy: every carrier is eligible directly (no
/// injection set), up to `k_max`. Skipped and non-carrier samples pass
/// through byte-identical.
pub fn embed_corpus(
    source: &dyn SampleSource,
    carrier_indices: &[usize],
    config: &EmbedConfig,
) -> std::io::Result<EmbedOutcome> {
    let n = source.count();
    let (k_min, k_max) = rate_bounds(n, config.rho_min, config.rho_max);
    let mut order: Vec<usize> = carrier_indices.to_vec();
    if config.order == IterationOrder::SeededShuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        order.shuffle(&mut rng);
    }

    let mut decided: HashMap<usize, WatermarkRecord> = HashMap::new();
    let mut edited: HashMap<usize, CodeSample> = HashMap::new();
    let mut admitted = 0usize;
    let mut deferred: Vec<usize> = Vec::new();

    for &index in &order {
        if admitted >= k_max {
            break;
        }
        let sample = source.sample(index)?;
        let tree = match parse(&sample) {
            Ok(tree) => tree,
            Err(_) => {
                decided.insert(index, WatermarkRecord::skipped(&sample.id, "unparseable"));
                continue;
            }
        };
        let table = extract_variables(&tree, &sample);
        let prefix: String = match config.strategy {
            Strategy::Fixed => {
                let prefix = config.prefix.clone().unwrap_or_default();
                if !sample.language.is_valid_identifier(&prefix) {
                    decided.insert(index, WatermarkRecord::skipped(&sample.id, "invalid_prefix"));
                    continue;
                }
                if !table.contains(&prefix) {
                    deferred.push(index);
                    continue;
                }
                prefix
            }
            Strategy::Universal => match derive_universal_prefix(&table) {
                Some((prefix, _)) => prefix.to_string(),
                None => {
                    decided.insert(
                        index,
                        WatermarkRecord::skipped(&sample.id, "insufficient_variables"),
                    );
                    continue;
                }
            },
        };
        let (record, output) = embed_one(&sample, &table, &prefix, config.convention);
        if record.watermarked {
            admitted += 1;
            if output.code != sample.code {
                edited.insert(index, output);
            }
        }
        decided.insert(index, record);
    }

    // Prefix-injection pass, only while below the minimum rate.
    if config.strategy == Strategy::Fixed {
        let prefix = config.prefix.clone().unwrap_or_default();
        for &index in &deferred {
            if admitted >= k_min {
                break;
            }
            let sample = source.sample(index)?;
            let tree = match parse(&sample) {
                Ok(tree) => tree,
                Err(_) => continue,
            };
            let table = extract_variables(&tree, &sample);
            // Need the injected prefix plus a suffix plus a target.
            if table.len() < 3 {
                decided.insert(
                    index,
                    WatermarkRecord::skipped(&sample.id, "insufficient_variables"),
                );
                continue;
            }
            let first_var = table.entries()[0].name.clone();
            let injected = match rename(&sample, &table, &first_var, &prefix) {
                Ok(outcome) => outcome,
                Err(_) => {
                    decided.insert(index, WatermarkRecord::skipped(&sample.id, "collision"));
                    continue;
                }
            };
            let tree2 = match parse(&injected.sample) {
                Ok(tree) => tree,
                Err(_) => {
                    decided.insert(index, WatermarkRecord::skipped(&sample.id, "unparseable"));
                    continue;
                }
            };
            let table2 = extract_variables(&tree2, &injected.sample);
            let (mut record, output) = embed_one(&injected.sample, &table2, &prefix, config.convention);
            if record.watermarked {
                record.prefix_injected = true;
                record.renames.insert(
                    0,
                    RenameEdit {
                        old: first_var,
                        new: prefix.clone(),
                        count: injected.replaced,
                    },
                );
                admitted += 1;
                edited.insert(index, output);
                decided.insert(index, record);
            } else {
                // The injection is discarded; the sample stays untouched.
                decided.insert(index, record);
            }
        }
    }

    let mut records = Vec::with_capacity(n);
    let carrier_set: std::collections::HashSet<usize> = carrier_indices.iter().copied().collect();
    for index in 0..n {
        if let Some(record) = decided.remove(&index) {
            records.push(record);
        } else {
            let id = source.sample(index)?.id;
            let reason = if !carrier_set.contains(&index) {
                "not_carrier"
            } else if config.strategy == Strategy::Fixed && deferred.contains(&index) {
                "prefix_absent"
            } else {
                "rate_cap"
            };
            records.push(WatermarkRecord::skipped(&id, reason));
        }
    }

    Ok(EmbedOutcome {
        records,
        edited,
        admitted,
        k_min,
        k_max,
    })
}

/// Convenience driver over an in-memory corpus with a carrier id set.
pub fn embed_samples(
    samples: &[CodeSample],
    carrier_ids: &[String],
    config: &EmbedConfig,
) -> EmbedOutcome {
    let wanted: std::collections::HashSet<&str> = carrier_ids.iter().map(|s| s.as_str()).collect();
    let indices: Vec<usize> = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| wanted.contains(s.id.as_str()))
        .map(|(i, _)| i)
        .collect();
    embed_corpus(&samples.to_vec(), &indices, config).expect("in-memory source cannot fail")
}

/// Apply a manifest record's renames to the original sample, reproducing the
/// watermarked sample byte-exactly.
pub fn replay(sample: &CodeSample, record: &WatermarkRecord) -> Result<CodeSample, String> {
    let mut current = sample.clone();
    for edit in &record.renames {
        let tree = parse(&current).map_err(|e| e.to_string())?;
        let table = extract_variables(&tree, &current);
        let outcome = rename(&current, &table, &edit.old, &edit.new).map_err(|e| e.to_string())?;
        if outcome.replaced != edit.count {
            return Err(format!(
                "replay of {} -> {} touched {} occurrences, manifest says {}",
                edit.old, edit.new, outcome.replaced, edit.count
            ));
        }
        current = outcome.sample;
    }
    Ok(current)
}

#[cfg(test)]
mod tests;
