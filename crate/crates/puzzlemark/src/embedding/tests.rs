use super::*;
use crate::syntax::Language;

const LOOKUP: &str = "def lookup(key, iterator):\n    a = None\n    for item in iterator:\n        if item:\n            a = item\n    return a\n";

fn py(id: &str, code: &str) -> CodeSample {
    CodeSample::new(id, code, Language::Python)
}

fn table_of(sample: &CodeSample) -> VariableTable {
    let tree = parse(sample).unwrap();
    extract_variables(&tree, sample)
}

fn fixed_config(prefix: &str, rho_min: f64, rho_max: f64) -> EmbedConfig {
    EmbedConfig {
        strategy: Strategy::Fixed,
        prefix: Some(prefix.to_string()),
        convention: NamingConvention::SnakeCase,
        rho_min,
        rho_max,
        order: IterationOrder::CorpusOrder,
        seed: 0,
    }
}

#[test]
fn concat_follows_convention() {
    assert_eq!(concat("key", "iterator", NamingConvention::SnakeCase), "key_iterator");
    assert_eq!(
        concat("key", "unknown_token", NamingConvention::SnakeCase),
        "key_unknown_token"
    );
    assert_eq!(concat("key", "count", NamingConvention::CamelCase), "keyCount");
}

#[test]
fn suffix_is_first_variable_after_prefix() {
    let sample = py("s", LOOKUP);
    let table = table_of(&sample);
    let (suffix, v_prime) = choose_suffix(&table, table.index_of("key").unwrap()).unwrap();
    assert_eq!(suffix.name, "iterator");
    let names: Vec<&str> = v_prime.iter().map(|e| e.name.as_str()).collect();
    assert_eq!(names, vec!["iterator", "a", "item"]);
}

#[test]
fn suffix_selection_skips_short_tables() {
    let sample = py("s", "def f(key, x):\n    return key + x\n");
    let table = table_of(&sample);
    assert!(choose_suffix(&table, table.index_of("key").unwrap()).is_none());
    let sample = py("s", "def f(key):\n    return key\n");
    let table = table_of(&sample);
    assert!(choose_suffix(&table, 0).is_none());
}

#[test]
fn replacement_rule_lowest_frequency() {
    let sample = py(
        "s",
        "def f(key, s, a, total):\n    total = total + s\n    total = total + a\n    return total\n",
    );
    let table = table_of(&sample);
    let candidates: Vec<&VariableEntry> =
        ["a", "total"].iter().map(|n| table.get(n).unwrap()).collect();
    let choice = select_replacement_target(
        &candidates,
        &table,
        "key_s",
        NamingConvention::SnakeCase,
    );
    assert_eq!(choice, ReplacementChoice::Replace("a".to_string()));
}

#[test]
fn replacement_rule_most_frequent_compound() {
    let sample = py(
        "s",
        "def f(key, s, x_y, z):\n    x_y = x_y + s\n    return x_y + z\n",
    );
    let table = table_of(&sample);
    let candidates: Vec<&VariableEntry> =
        ["x_y", "z"].iter().map(|n| table.get(n).unwrap()).collect();
    let choice = select_replacement_target(
        &candidates,
        &table,
        "key_s",
        NamingConvention::SnakeCase,
    );
    assert_eq!(choice, ReplacementChoice::Replace("x_y".to_string()));
}

#[test]
fn replacement_rule_target_already_present() {
    let sample = py(
        "s",
        "def f(key, s, key_s, z):\n    key_s = z\n    return key_s\n",
    );
    let table = table_of(&sample);
    let candidates: Vec<&VariableEntry> =
        ["key_s", "z"].iter().map(|n| table.get(n).unwrap()).collect();
    let choice = select_replacement_target(
        &candidates,
        &table,
        "key_s",
        NamingConvention::SnakeCase,
    );
    assert_eq!(choice, ReplacementChoice::AlreadyPresent);
}

#[test]
fn embed_one_lookup_snippet() {
    let sample = py("fig", LOOKUP);
    let table = table_of(&sample);
    let (record, output) = embed_one(&sample, &table, "key", NamingConvention::SnakeCase);
    assert!(record.watermarked);
    assert_eq!(record.target, "key_iterator");
    assert_eq!(record.replaced, "a");
    assert_eq!(record.renames.len(), 1);
    assert!(output.code.contains("key_iterator = None"));
    parse(&output).unwrap();
}

#[test]
fn embed_one_skips_without_enough_variables() {
    let sample = py("s", "def f(key, x):\n    return key + x\n");
    let table = table_of(&sample);
    let (record, output) = embed_one(&sample, &table, "key", NamingConvention::SnakeCase);
    assert!(!record.watermarked);
    assert_eq!(record.skip_reason.as_deref(), Some("insufficient_variables"));
    assert_eq!(output.code, sample.code);
}

#[test]
fn embed_one_with_preexisting_target_makes_no_edits() {
    let code = "def f(key, s, key_s, z):\n    key_s = z + s\n    return key_s\n";
    let sample = py("s", code);
    let table = table_of(&sample);
    let (record, output) = embed_one(&sample, &table, "key", NamingConvention::SnakeCase);
    assert!(record.watermarked);
    assert_eq!(record.replaced, "");
    assert!(record.renames.is_empty());
    assert_eq!(output.code, sample.code);
}

#[test]
fn universal_prefix_is_positional() {
    let sample = py("s", "def f(alpha, beta, gamma):\n    return alpha + beta + gamma\n");
    let table = table_of(&sample);
    assert_eq!(derive_universal_prefix(&table), Some(("alpha", "beta")));
    let sample = py("s", "def f(x):\n    return x\n");
    let table = table_of(&sample);
    assert_eq!(derive_universal_prefix(&table), None);
}

fn corpus_with_key(count: usize) -> Vec<CodeSample> {
    (0..count)
        .map(|i| {
            py(
                &format!("s{i}"),
                &format!(
                    "def worker_{i}(key, source, cursor):\n    acc_{i} = 0\n    for entry in source:\n        acc_{i} = acc_{i} + key + cursor\n    return acc_{i}\n"
                ),
            )
        })
        .collect()
}

#[test]
fn corpus_embedding_respects_rate_bounds() {
    let samples = corpus_with_key(100);
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let outcome = embed_samples(&samples, &ids, &fixed_config("key", 0.05, 0.10));
    assert_eq!(outcome.k_min, 5);
    assert_eq!(outcome.k_max, 10);
    assert_eq!(outcome.admitted, 10);
    let watermarked = outcome.records.iter().filter(|r| r.watermarked).count();
    assert_eq!(watermarked, 10);
    assert!(!outcome.rate_unreachable());
}

#[test]
fn empty_carrier_set_leaves_corpus_untouched() {
    let samples = corpus_with_key(10);
    let outcome = embed_samples(&samples, &[], &fixed_config("key", 0.1, 0.5));
    assert!(outcome.edited.is_empty());
    assert!(outcome.records.iter().all(|r| !r.watermarked));
    assert!(outcome
        .records
        .iter()
        .all(|r| r.skip_reason.as_deref() == Some("not_carrier")));
}

#[test]
fn natural_prefix_carriers_avoid_injection() {
    let samples = corpus_with_key(20);
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let outcome = embed_samples(&samples, &ids, &fixed_config("key", 0.1, 0.5));
    assert!(outcome.records.iter().all(|r| !r.prefix_injected));
    assert_eq!(outcome.admitted, 10);
}

#[test]
fn prefix_injection_kicks_in_below_minimum() {
    // No sample contains `key`; the driver must inject it to reach k_min.
    let samples: Vec<CodeSample> = (0..10)
        .map(|i| {
            py(
                &format!("s{i}"),
                &format!("def f_{i}(alpha, beta, gamma):\n    delta_{i} = alpha + beta\n    return delta_{i} + gamma\n"),
            )
        })
        .collect();
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let outcome = embed_samples(&samples, &ids, &fixed_config("key", 0.3, 0.5));
    assert_eq!(outcome.admitted, 3);
    let injected: Vec<&WatermarkRecord> =
        outcome.records.iter().filter(|r| r.prefix_injected).collect();
    assert_eq!(injected.len(), 3);
    for record in injected {
        assert_eq!(record.renames.len(), 2);
        assert_eq!(record.renames[0].new, "key");
        assert_eq!(record.prefix, "key");
    }
    // Untouched prefix-absent carriers stay byte-identical.
    let untouched = outcome.records.iter().filter(|r| !r.watermarked).count();
    assert_eq!(untouched, 7);
}

#[test]
fn universal_strategy_embeds_without_injection() {
    let samples: Vec<CodeSample> = (0..10)
        .map(|i| {
            py(
                &format!("s{i}"),
                &format!("def f_{i}(alpha, beta, gamma):\n    delta_{i} = alpha + beta\n    return delta_{i} + gamma\n"),
            )
        })
        .collect();
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let config = EmbedConfig {
        strategy: Strategy::Universal,
        prefix: None,
        convention: NamingConvention::SnakeCase,
        rho_min: 0.2,
        rho_max: 0.5,
        order: IterationOrder::CorpusOrder,
        seed: 0,
    };
    let outcome = embed_samples(&samples, &ids, &config);
    assert_eq!(outcome.admitted, 5);
    for record in outcome.records.iter().filter(|r| r.watermarked) {
        assert_eq!(record.prefix, "alpha");
        assert_eq!(record.suffix, "beta");
        assert_eq!(record.target, "alpha_beta");
        assert!(!record.prefix_injected);
    }
}

#[test]
fn rate_unreachable_is_reported_not_fatal() {
    let samples = corpus_with_key(3);
    let carriers = vec!["s0".to_string()];
    let outcome = embed_samples(&samples, &carriers, &fixed_config("key", 0.9, 1.0));
    assert_eq!(outcome.admitted, 1);
    assert!(outcome.rate_unreachable());
}

#[test]
fn replaying_the_manifest_reproduces_outputs() {
    let samples = corpus_with_key(8);
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let outcome = embed_samples(&samples, &ids, &fixed_config("key", 0.25, 0.5));
    assert!(outcome.admitted > 0);
    for (index, record) in outcome.records.iter().enumerate() {
        let replayed = replay(&samples[index], record).unwrap();
        match outcome.edited.get(&index) {
            Some(watermarked) => assert_eq!(replayed.code, watermarked.code),
            None => assert_eq!(replayed.code, samples[index].code),
        }
    }
}

#[test]
fn identical_seeds_give_identical_outcomes() {
    let samples = corpus_with_key(30);
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let mut config = fixed_config("key", 0.1, 0.3);
    config.order = IterationOrder::SeededShuffle;
    config.seed = 42;
    let first = embed_samples(&samples, &ids, &config);
    let second = embed_samples(&samples, &ids, &config);
    assert_eq!(first.records, second.records);
    let different_seed = embed_samples(
        &samples,
        &ids,
        &EmbedConfig {
            seed: 43,
            ..config.clone()
        },
    );
    // A different seed admits a different subset (with high probability for
    // this corpus size; pinned by the fixed seeds here).
    assert_ne!(
        first
            .records
            .iter()
            .filter(|r| r.watermarked)
            .map(|r| r.id.clone())
            .collect::<Vec<_>>(),
        different_seed
            .records
            .iter()
            .filter(|r| r.watermarked)
            .map(|r| r.id.clone())
            .collect::<Vec<_>>()
    );
}

#[test]
fn unparseable_carriers_pass_through() {
    let mut samples = corpus_with_key(4);
    samples[1] = py("s1", "def broken(key,:\n    pass\n");
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let outcome = embed_samples(&samples, &ids, &fixed_config("key", 0.25, 1.0));
    let record = &outcome.records[1];
    assert!(!record.watermarked);
    assert_eq!(record.skip_reason.as_deref(), Some("unparseable"));
    assert!(!outcome.edited.contains_key(&1));
}

#[test]
fn config_validation() {
    assert!(fixed_config("key", 0.01, 0.05).validate().is_ok());
    assert!(fixed_config("key", 0.0, 0.05).validate().is_err());
    assert!(fixed_config("key", 0.5, 0.1).validate().is_err());
    assert!(fixed_config("", 0.01, 0.05).validate().is_err());
}
