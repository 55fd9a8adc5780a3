//! Black-box verification: build comparative validation prompts from the
//! watermarked corpus, query a completion model, and decide watermark
//! presence with Fisher's exact test.

mod client;
#[cfg(test)]
mod tests;

pub use client::{
    make_simulated_client, parse_model_uri, HttpModelClient, ModelClient, QueryParams, SimKind,
    SimulatedClient,
};

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{concat, Strategy, WatermarkRecord};
use crate::error::VerificationError;
use crate::fisher::{fisher_exact, Sidedness};
use crate::fnv1a;
use crate::syntax::{
    extract_variables, parse, rename, CodeSample, NamingConvention, VariableTable,
};

/// The meaningless identifier substituted for every trigger suffix.
pub const UNKNOWN_TOKEN: &str = "unknown_token";

/// Neutral names used to overwrite the trigger prefix in control prompts.
const NEUTRAL_POOL: [&str; 4] = ["item", "data", "entry", "node"];

/// One comparative prompt pair: the trigger-present input and its
/// trigger-free control, each with the completion string whose emission
/// counts as a hit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationPair {
    pub id: String,
    pub input_with_trigger: String,
    pub input_without_trigger: String,
    pub target_with: String,
    pub target_without: String,
    pub truncation_offset: usize,
}

/// Substitute the suffix and target throughout, then truncate right before
/// the first target occurrence that follows the suffix. Returns the prompt,
/// the substituted target, and the truncation offset.
fn substitute_and_truncate(
    sample: &CodeSample,
    table: &VariableTable,
    suffix: &str,
    old_target: &str,
    new_target: &str,
    required_before: &[&str],
) -> Option<(String, usize)> {
    if table.contains(UNKNOWN_TOKEN) || table.contains(new_target) {
        return None;
    }
    let step1 = rename(sample, table, suffix, UNKNOWN_TOKEN).ok()?;
    let tree1 = parse(&step1.sample).ok()?;
    let table1 = extract_variables(&tree1, &step1.sample);
    if table1.contains(new_target) {
        return None;
    }
    let step2 = rename(&step1.sample, &table1, old_target, new_target).ok()?;
    if step2.replaced == 0 {
        return None;
    }
    let tree2 = parse(&step2.sample).ok()?;
    let table2 = extract_variables(&tree2, &step2.sample);
    let suffix_first = table2.get(UNKNOWN_TOKEN)?.first_offset;
    let target_first = table2.get(new_target)?.first_offset;
    if target_first <= suffix_first {
        return None;
    }
    for name in required_before {
        if table2.get(name)?.first_offset >= target_first {
            return None;
        }
    }
    Some((step2.sample.code[..target_first].to_string(), target_first))
}

/// Deterministic neutral replacement name for a sample, avoiding every
/// name already in use.
fn neutral_name(id: &str, taken: &VariableTable, avoid: &[&str]) -> String {
    let start = (fnv1a(id.as_bytes()) % NEUTRAL_POOL.len() as u64) as usize;
    for round in 0.. {
        for step in 0..NEUTRAL_POOL.len() {
            let base = NEUTRAL_POOL[(start + step) % NEUTRAL_POOL.len()];
            let candidate = if round == 0 {
                base.to_string()
            } else {
                format!("{base}{round}")
            };
            if !taken.contains(&candidate) && !avoid.contains(&candidate.as_str()) {
                return candidate;
            }
        }
    }
    unreachable!()
}

fn try_build_pair(
    record: &WatermarkRecord,
    sample: &CodeSample,
    strategy: Strategy,
    convention: NamingConvention,
) -> Option<ValidationPair> {
    if !record.watermarked {
        return None;
    }
    let tree = parse(sample).ok()?;
    let table = extract_variables(&tree, sample);
    let prefix = record.prefix.as_str();
    let suffix = record.suffix.as_str();
    let target = record.target.as_str();
    if !(table.contains(prefix) && table.contains(suffix) && table.contains(target)) {
        return None;
    }

    let target_with = concat(prefix, UNKNOWN_TOKEN, convention);
    let (input_with_trigger, truncation_offset) = substitute_and_truncate(
        sample,
        &table,
        suffix,
        target,
        &target_with,
        &[prefix],
    )?;

    let (input_without_trigger, target_without) = match strategy {
        Strategy::Fixed => {
            // Overwrite the trigger prefix with a fresh neutral name, then
            // move the target to match; the concatenation opportunity stays,
            // the trained prefix does not.
            let neutral = neutral_name(&sample.id, &table, &[prefix, suffix, target]);
            let step1 = rename(sample, &table, suffix, UNKNOWN_TOKEN).ok()?;
            let tree1 = parse(&step1.sample).ok()?;
            let table1 = extract_variables(&tree1, &step1.sample);
            let step2 = rename(&step1.sample, &table1, prefix, &neutral).ok()?;
            let tree2 = parse(&step2.sample).ok()?;
            let table2 = extract_variables(&tree2, &step2.sample);
            let target_without = concat(&neutral, UNKNOWN_TOKEN, convention);
            if table2.contains(&target_without) {
                return None;
            }
            let step3 = rename(&step2.sample, &table2, target, &target_without).ok()?;
            if step3.replaced == 0 {
                return None;
            }
            let tree3 = parse(&step3.sample).ok()?;
            let table3 = extract_variables(&tree3, &step3.sample);
            let suffix_first = table3.get(UNKNOWN_TOKEN)?.first_offset;
            let target_first = table3.get(&target_without)?.first_offset;
            let neutral_first = table3.get(&neutral)?.first_offset;
            if target_first <= suffix_first || neutral_first >= target_first {
                return None;
            }
            (
                step3.sample.code[..target_first].to_string(),
                target_without,
            )
        }
        Strategy::Universal => {
            // The positional trigger (first two variables) cannot be removed
            // by renaming; the control instead checks the concatenation of
            // the second variable with the substituted suffix donor, which a
            // first-position-trained model never learned.
            let suffix_index = table.index_of(suffix)?;
            let donor = table.entries()[suffix_index + 1..]
                .iter()
                .find(|e| e.name != target)?
                .name
                .clone();
            let target_without = concat(suffix, UNKNOWN_TOKEN, convention);
            let (input, _) = substitute_and_truncate(
                sample,
                &table,
                &donor,
                target,
                &target_without,
                &[prefix, suffix],
            )?;
            (input, target_without)
        }
    };

    Some(ValidationPair {
        id: sample.id.clone(),
        input_with_trigger,
        input_without_trigger,
        target_with,
        target_without,
        truncation_offset,
    })
}

/// Build `n` validation pairs from the watermarked records, sampling
/// deterministically by seed. Records without a usable truncation point are
/// passed over.
pub fn build_validation_set(
    records: &[WatermarkRecord],
    samples: &HashMap<String, CodeSample>,
    n: usize,
    seed: u64,
    strategy: Strategy,
    convention: NamingConvention,
) -> Result<Vec<ValidationPair>, VerificationError> {
    let mut usable = Vec::new();
    for record in records.iter().filter(|r| r.watermarked) {
        let sample = match samples.get(&record.id) {
            Some(sample) => sample,
            None => continue,
        };
        if let Some(pair) = try_build_pair(record, sample, strategy, convention) {
            usable.push(pair);
        }
    }
    if usable.len() < n {
        return Err(VerificationError::InsufficientCarriers {
            available: usable.len(),
            requested: n,
        });
    }
    let mut indices: Vec<usize> = (0..usable.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut chosen: Vec<usize> = indices.into_iter().take(n).collect();
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|index| usable[index].clone()).collect())
}

fn is_identifier_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$'
}

/// 1 iff the target appears as a whole identifier token in the completion.
/// `substring` relaxes the boundary rule for parity experiments.
pub fn observe(completion: &str, target: &str, substring: bool) -> bool {
    if target.is_empty() {
        return false;
    }
    if substring {
        return completion.contains(target);
    }
    let bytes = completion.as_bytes();
    let mut from = 0;
    while let Some(pos) = completion[from..].find(target) {
        let start = from + pos;
        let end = start + target.len();
        let left_ok = start == 0 || !is_identifier_byte(bytes[start - 1]);
        let right_ok = end == bytes.len() || !is_identifier_byte(bytes[end]);
        if left_ok && right_ok {
            return true;
        }
        from = start + 1;
    }
    false
}

/// Query with exponential backoff on transient transport failures (three
/// retries).
pub fn query_model(
    client: &dyn ModelClient,
    prompt: &str,
    params: &QueryParams,
) -> Result<String, VerificationError> {
    let mut delay = std::time::Duration::from_millis(50);
    let mut last = None;
    for attempt in 0..4 {
        match client.complete(prompt, params) {
            Ok(completion) => return Ok(completion),
            Err(VerificationError::ModelUnreachable(cause)) => {
                last = Some(VerificationError::ModelUnreachable(cause));
                if attempt < 3 {
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
            Err(other) => return Err(other),
        }
    }
    Err(last.unwrap())
}

/// Which side of a validation pair a query belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Trigger,
    Control,
}

/// One recorded model query; raw completions are retained for audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Observation {
    pub pair_index: usize,
    pub group: Group,
    pub bit: u8,
    pub completion: String,
}

/// The bit sets for both groups, in pair order.
#[derive(Debug, Clone, Default)]
pub struct ObservationSet {
    pub trigger: Vec<Observation>,
    pub control: Vec<Observation>,
}

/// Final contingency table and decision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationResult {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
    pub p_value: f64,
    pub alpha: f64,
    pub sidedness: Sidedness,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Watermarked,
    NotDetected,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub alpha: f64,
    pub sidedness: Sidedness,
    pub query: QueryParams,
    pub substring_match: bool,
    /// Worker threads for model queries.
    pub jobs: usize,
    /// Append-only crash-recovery journal; resuming skips completed queries.
    pub journal: Option<PathBuf>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            alpha: 0.05,
            sidedness: Sidedness::Greater,
            query: QueryParams::default(),
            substring_match: false,
            jobs: 4,
            journal: None,
        }
    }
}

fn load_journal(path: &Path) -> Result<HashMap<(usize, Group), Observation>, VerificationError> {
    let mut done = HashMap::new();
    if !path.exists() {
        return Ok(done);
    }
    let file = std::fs::File::open(path)?;
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        // A torn final line from an interrupted run is skipped, not fatal.
        if let Ok(entry) = serde_json::from_str::<Observation>(&line) {
            done.insert((entry.pair_index, entry.group), entry);
        }
    }
    Ok(done)
}

/// Query every pair (trigger input then control input), collect both
/// observation groups, and run Fisher's exact test at `alpha`.
pub fn verify(
    pairs: &[ValidationPair],
    client: &dyn ModelClient,
    options: &VerifyOptions,
) -> Result<(VerificationResult, ObservationSet), VerificationError> {
    if pairs.is_empty() {
        return Err(VerificationError::EmptyValidationSet);
    }
    let done = match &options.journal {
        Some(path) => load_journal(path)?,
        None => HashMap::new(),
    };
    let journal_writer: Option<Mutex<std::io::BufWriter<std::fs::File>>> = match &options.journal {
        Some(path) => {
            let file = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)?;
            Some(Mutex::new(std::io::BufWriter::new(file)))
        }
        None => None,
    };

    struct Task {
        pair_index: usize,
        group: Group,
    }
    let mut tasks = Vec::new();
    for (pair_index, _) in pairs.iter().enumerate() {
        for group in [Group::Trigger, Group::Control] {
            if !done.contains_key(&(pair_index, group)) {
                tasks.push(Task { pair_index, group });
            }
        }
    }

    let results: Mutex<Vec<Observation>> = Mutex::new(Vec::with_capacity(tasks.len()));
    let failure: Mutex<Option<VerificationError>> = Mutex::new(None);
    let abort = AtomicBool::new(false);
    let next_task = std::sync::atomic::AtomicUsize::new(0);

    let run_task = |task: &Task| -> Result<Observation, VerificationError> {
        let pair = &pairs[task.pair_index];
        let (prompt, target) = match task.group {
            Group::Trigger => (&pair.input_with_trigger, &pair.target_with),
            Group::Control => (&pair.input_without_trigger, &pair.target_without),
        };
        let completion = query_model(client, prompt, &options.query)?;
        let bit = observe(&completion, target, options.substring_match) as u8;
        Ok(Observation {
            pair_index: task.pair_index,
            group: task.group,
            bit,
            completion,
        })
    };

    let worker = || {
        loop {
            if abort.load(Ordering::Relaxed) {
                return;
            }
            let index = next_task.fetch_add(1, Ordering::Relaxed);
            if index >= tasks.len() {
                return;
            }
            match run_task(&tasks[index]) {
                Ok(observation) => {
                    if let Some(writer) = &journal_writer {
                        let mut writer = writer.lock().unwrap();
                        let line = serde_json::to_string(&observation).expect("serializable");
                        let _ = writeln!(writer, "{line}");
                        let _ = writer.flush();
                    }
                    results.lock().unwrap().push(observation);
                }
                Err(error) => {
                    abort.store(true, Ordering::Relaxed);
                    let mut slot = failure.lock().unwrap();
                    if slot.is_none() {
                        *slot = Some(error);
                    }
                    return;
                }
            }
        }
    };

    let jobs = options.jobs.max(1).min(tasks.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(worker);
        }
    });

    if let Some(error) = failure.into_inner().unwrap() {
        let completed = results.into_inner().unwrap().len() + done.len();
        return match error {
            VerificationError::ModelUnreachable(cause) => {
                Err(VerificationError::AbortedRun { completed, cause })
            }
            other => Err(other),
        };
    }

    let mut observations: Vec<Observation> = done.into_values().collect();
    observations.extend(results.into_inner().unwrap());
    observations.sort_by_key(|o| (o.pair_index, o.group == Group::Control));

    let mut set = ObservationSet::default();
    for observation in observations {
        match observation.group {
            Group::Trigger => set.trigger.push(observation),
            Group::Control => set.control.push(observation),
        }
    }
    debug_assert_eq!(set.trigger.len(), pairs.len());
    debug_assert_eq!(set.control.len(), pairs.len());

    let a: u64 = set.trigger.iter().map(|o| o.bit as u64).sum();
    let b = set.trigger.len() as u64 - a;
    let c: u64 = set.control.iter().map(|o| o.bit as u64).sum();
    let d = set.control.len() as u64 - c;
    let p_value = fisher_exact(a, b, c, d, options.sidedness);
    let verdict = if p_value < options.alpha {
        Verdict::Watermarked
    } else {
        Verdict::NotDetected
    };
    Ok((
        VerificationResult {
            a,
            b,
            c,
            d,
            p_value,
            alpha: options.alpha,
            sidedness: options.sidedness,
            verdict,
        },
        set,
    ))
}
