//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use featattr::client::{FnProvider, MockProvider, MockScript};
use featattr::comparators::{codebleu_breakdown, Comparator, ComparatorConfig, ComparatorKind};
use featattr::grammar::Language;
use featattr::harness::{inject_nonsensical, noise_score, random_baseline, NoisePool};
use featattr::model::{FeaturePartition, InputDocument, Mode, Task};
use featattr::sampler::{enumerate_exact, sample_mc, DEFAULT_EXACT_CAP};
use featattr::shapley::{exact_shapley, mc_shapley, ValueTable};
use featattr::splitters::{split, verify_lossless, SplitterConfig};
use featattr::stats::{cliffs_delta, holm_correction, wilcoxon, WilcoxonMethod};
use featattr::{attribute_partition, AttributionConfig};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SHAPLEY_TOL: f64 = 1e-9;
const SHAPLEY_BUDGET: Duration = Duration::from_secs(5);
const NOISE_BUDGET: Duration = Duration::from_secs(30);
const RANDOM_MEAN_TOL: f64 = 0.01;
const TOP1_REQUIRED: usize = 95;
const CODEBLEU_TOL: f64 = 1e-6;
const PERF_BUDGET: Duration = Duration::from_secs(10);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Average marginal contribution over all n! orderings.
fn permutation_oracle(n: usize, v: &[f64]) -> Vec<f64> {
    fn visit(perm: &mut Vec<usize>, used: &mut [bool], n: usize, v: &[f64], acc: &mut [f64], count: &mut u64) {
        if perm.len() == n {
            let mut mask = 0usize;
            for &i in perm.iter() {
                let next = mask | (1 << i);
                acc[i] += v[next] - v[mask];
                mask = next;
            }
            *count += 1;
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                perm.push(i);
                visit(perm, used, n, v, acc, count);
                perm.pop();
                used[i] = false;
            }
        }
    }
    let mut acc = vec![0.0; n];
    let mut count = 0u64;
    visit(&mut Vec::new(), &mut vec![false; n], n, v, &mut acc, &mut count);
    acc.iter().map(|a| a / count as f64).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    let mut worst_eff = 0.0_f64;
    for t in 0..200u64 {
        let n = 2 + (t % 7) as usize;
        let mut r = rng(1000 + t);
        let mut v = vec![0.0; 1 << n];
        for x in v.iter_mut().skip(1) {
            *x = r.random::<f64>();
        }
        let table = ValueTable::from_fn(n, |c| v[c.mask() as usize]);
        let phi = exact_shapley(&table).map_err(|e| e.to_string())?;
        let oracle = permutation_oracle(n, &v);
        for (a, b) in phi.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
        worst_eff = worst_eff.max((phi.iter().sum::<f64>() - v[(1 << n) - 1]).abs());
    }
    let elapsed = start.elapsed();
    check(
        worst <= SHAPLEY_TOL && worst_eff <= SHAPLEY_TOL && elapsed < SHAPLEY_BUDGET,
        format!("200 tables, max |phi - oracle| = {worst:.2e}, max efficiency gap = {worst_eff:.2e}, {elapsed:.2?}"),
    )
}

const WORDS: &[&str] = &[
    "read", "the", "input", "list", "and", "return", "each", "value", "after", "checking", "bounds", "carefully", "then",
    "write", "results", "to", "a", "new", "buffer",
];

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let model = MockProvider::new("noise-blind", MockScript::extract(r"\bQ\d+x\d+\b").map_err(|e| e.to_string())?);
    let pool = NoisePool::default();
    let comparators = [
        Comparator::of_kind(ComparatorKind::Tfidf),
        Comparator::of_kind(ComparatorKind::EmbedF1),
        Comparator::of_kind(ComparatorKind::Exact),
        Comparator::of_kind(ComparatorKind::Codebleu),
    ];
    let cfg = AttributionConfig::exact();
    let mut nonzero = Vec::new();
    for inst in 0..50u64 {
        let mut r = rng(2000 + inst);
        let n = r.random_range(4..=8);
        let features: Vec<String> = (0..n)
            .map(|k| {
                let len = r.random_range(5..=9);
                let mut words: Vec<String> = (0..len - 1).map(|_| WORDS.choose(&mut r).unwrap().to_string()).collect();
                words.insert(r.random_range(0..len), format!("Q{inst}x{k}"));
                words.join(" ") + ". "
            })
            .collect();
        let partition = FeaturePartition::from_texts(format!("syn-{inst}"), &features, "synthetic");
        let (noisy, noise_index) = inject_nonsensical(&partition, &pool, inst).map_err(|e| e.to_string())?;
        let comparator = &comparators[inst as usize % comparators.len()];
        let result = attribute_partition(Task::CodeGeneration, &noisy, &model, comparator, &cfg)
            .map_err(|e| format!("instance {inst}: {e}"))?;
        let s = noise_score(&result.display, noise_index).map_err(|e| e.to_string())?;
        if s != 0.0 || result.raw[noise_index] != 0.0 {
            nonzero.push((inst, s));
        }
    }
    let elapsed = start.elapsed();
    check(
        nonzero.is_empty() && elapsed < NOISE_BUDGET,
        format!("50 instances, noise score 0.0 on {}/50, {elapsed:.2?}", 50 - nonzero.len()),
    )
}

fn criterion_3() -> Outcome {
    let n = 6;
    let draws = 10_000u64;
    let total: f64 = (0..draws).flat_map(|s| random_baseline(n, s)).sum();
    let mean = total / (draws as f64 * n as f64);
    check(
        (mean - 1.0 / 6.0).abs() <= RANDOM_MEAN_TOL,
        format!("mean coordinate {mean:.5} vs 1/6 = {:.5}", 1.0 / 6.0),
    )
}

fn ranking(phi: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..phi.len()).collect();
    idx.sort_by(|a, b| phi[*b].total_cmp(&phi[*a]));
    idx
}

fn criterion_4() -> Outcome {
    let mut full_rank = 0;
    let mut half_top1 = 0;
    for t in 0..100u64 {
        let n = 5 + (t % 6) as usize;
        let mut r = rng(4000 + t);
        let w: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let table = ValueTable::from_fn(n, |c| c.indices().map(|i| w[i]).sum());
        let exact = exact_shapley(&table).map_err(|e| e.to_string())?;
        let all = mc_shapley(&table, &sample_mc(n, 1.0, t).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let half = mc_shapley(&table, &sample_mc(n, 0.5, t).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        if ranking(&all) == ranking(&exact) {
            full_rank += 1;
        }
        if ranking(&half)[0] == ranking(&exact)[0] {
            half_top1 += 1;
        }
    }
    check(
        full_rank == 100 && half_top1 >= TOP1_REQUIRED,
        format!("ratio 1 ranking {full_rank}/100, ratio 0.5 top-1 {half_top1}/100"),
    )
}

const PY_STATEMENTS: &[&str] = &[
    "total = 0",
    "items = sorted(values, key=lambda v: -v)",
    "if not items:\n        return None",
    "for i, item in enumerate(items):\n        total += item * i\n        # running weight\n        if total > limit:\n            break",
    "while count > 0:\n        count -= 1",
    "try:\n        handle = open(path)\n    except OSError as exc:\n        raise ValueError(str(exc))",
    "name = \"caf\u{e9} \u{2713} \u{4f60}\u{597d}\"",
    "result = [x ** 2 for x in items if x % 2 == 0]",
    "with lock:\n        cache[key] = result",
    "print(f\"{name}: {total}\")",
    "data = {'a': 1, 'b': [1, 2, 3]}",
    "return total",
];

const JAVA_STATEMENTS: &[&str] = &[
    "int total = 0;",
    "List<String> names = new ArrayList<>();",
    "if (values == null) {\n        return -1;\n    }",
    "for (int i = 0; i < values.length; i++) {\n        total += values[i];\n    }",
    "String label = \"caf\u{e9} \u{2713}\";",
    "// accumulate\n    total = total * 31 + label.hashCode();",
    "try {\n        names.add(label);\n    } catch (Exception e) {\n        throw new IllegalStateException(e);\n    }",
    "while (total > 100) {\n        total /= 2;\n    }",
    "return total;",
];

const SENTENCES: &[&str] = &[
    "Return the sum of the weighted values.",
    "Raises ValueError if the path cannot be opened!",
    "Does the cache need a lock?",
    "See e.g. the helper module for details.",
    "Values are sorted in descending order, then filtered",
    "Args:\n    values: the numbers to process.\n    limit (int): stop early when exceeded.",
    "Returns:\n    int: the weighted total, or None.",
    "Handles caf\u{e9} names and \u{4f60}\u{597d} text.",
    "Version 2.5 changed the rounding rules...",
    "Example:\n\n    >>> total([1, 2, 3])\n    6",
];

fn python_function(r: &mut ChaCha8Rng, k: usize, statements: usize, docstring: Option<&str>) -> String {
    let mut out = String::new();
    if r.random_bool(0.2) {
        out.push_str("import os\n\n");
    }
    if r.random_bool(0.2) {
        out.push_str("@cached\n");
    }
    out.push_str(&format!("def func_{k}(values, limit=10, path=None):\n"));
    if let Some(d) = docstring {
        out.push_str(&format!("    \"\"\"{d}\"\"\"\n"));
    }
    for _ in 0..statements {
        if r.random_bool(0.15) {
            out.push('\n');
        }
        let stmt = PY_STATEMENTS.choose(r).unwrap();
        out.push_str("    ");
        out.push_str(stmt);
        if r.random_bool(0.1) {
            out.push_str("  ");
        }
        out.push('\n');
    }
    if r.random_bool(0.1) {
        out = out.replace('\n', "\r\n");
    }
    out
}

fn java_method(r: &mut ChaCha8Rng, k: usize, statements: usize) -> String {
    let mut body = String::new();
    for _ in 0..statements {
        body.push_str("    ");
        body.push_str(JAVA_STATEMENTS.choose(r).unwrap());
        body.push('\n');
    }
    let method = format!("public int method{k}(int[] values) {{\n{body}}}\n");
    if r.random_bool(0.5) {
        let indented: String = method.lines().map(|l| format!("    {l}\n")).collect();
        format!("class Holder{k} {{\n{indented}}}\n")
    } else {
        method
    }
}

fn docstring(r: &mut ChaCha8Rng) -> String {
    let n = r.random_range(1..=6);
    let mut out = String::new();
    for i in 0..n {
        out.push_str(SENTENCES.choose(r).unwrap());
        if i + 1 < n {
            out.push_str(if r.random_bool(0.3) { "\n" } else { " " });
        }
    }
    if r.random_bool(0.3) {
        out.push('\n');
    }
    out
}

/// Answers the segmentation request line by line; some documents get a
/// lossy first answer, a few are lossy every time.
fn splitter_model() -> FnProvider {
    FnProvider::new("segmenter", |messages| {
        let doc = messages[1].content.strip_prefix("Docstring: ").unwrap_or_default();
        let mut segments: Vec<String> = doc.split_inclusive('\n').map(str::to_string).collect();
        let h = doc.len() % 7;
        if (h == 0 && messages.len() == 2) || h == 3 {
            segments = segments.iter().map(|s| s.trim().to_string()).collect();
        }
        let map: BTreeMap<String, String> = segments.into_iter().enumerate().map(|(i, s)| (i.to_string(), s)).collect();
        let ordered: Vec<String> = (0..map.len())
            .map(|i| format!("\"{i}\": {}", serde_json::to_string(&map[&i.to_string()]).unwrap()))
            .collect();
        Ok(format!("{{{}}}", ordered.join(", ")))
    })
}

fn criterion_5() -> Outcome {
    let mut r = rng(5000);
    let mut code_docs = Vec::new();
    let mut nl_docs = Vec::new();
    for k in 0..100 {
        let statements = r.random_range(1..=14);
        let doc = if k % 5 < 3 {
            let ds = r.random_bool(0.5).then(|| docstring(&mut r));
            InputDocument::new(format!("py-{k}"), Task::CodeSummarization, python_function(&mut r, k, statements, ds.as_deref()))
                .with_language("python")
        } else {
            InputDocument::new(format!("java-{k}"), Task::CodeSummarization, java_method(&mut r, k, statements))
                .with_language("java")
        };
        code_docs.push(doc);
        nl_docs.push(InputDocument::new(format!("doc-{k}"), Task::CodeGeneration, docstring(&mut r)));
    }

    let segmenter = splitter_model();
    let mut failures = Vec::new();
    let mut code_ok = 0;
    let mut rule_ok = 0;
    let mut llm_ok = 0;
    let mut fallbacks = 0;
    let mut thirteen = None;
    for doc in &code_docs {
        match split(doc, &SplitterConfig::code(), None) {
            Ok(p) if verify_lossless(&p, doc) && p.text() == doc.text => {
                code_ok += 1;
                if p.len() == 13 && thirteen.is_none() {
                    thirteen = Some(p);
                }
            }
            Ok(_) => failures.push(format!("{}: lossy", doc.id)),
            Err(e) => failures.push(format!("{}: {e}", doc.id)),
        }
    }
    for doc in &nl_docs {
        match split(doc, &SplitterConfig::nl_rule(), None) {
            Ok(p) if p.text() == doc.text => rule_ok += 1,
            Ok(_) => failures.push(format!("{} nl_rule: lossy", doc.id)),
            Err(e) => failures.push(format!("{} nl_rule: {e}", doc.id)),
        }
        match split(doc, &SplitterConfig::nl_llm("segmenter"), Some(&segmenter)) {
            Ok(p) if p.text() == doc.text => {
                llm_ok += 1;
                if p.splitter_name != "nl_llm" {
                    fallbacks += 1;
                }
            }
            Ok(_) => failures.push(format!("{} nl_llm: lossy", doc.id)),
            Err(e) => failures.push(format!("{} nl_llm: {e}", doc.id)),
        }
    }

    // A 13-feature partition is refused in exact mode; 12 is accepted.
    let partition = thirteen.unwrap_or_else(|| {
        let texts: Vec<String> = (0..13).map(|i| format!("x{i} = {i}\n")).collect();
        FeaturePartition::from_texts("thirteen", &texts, "code")
    });
    let model = MockProvider::new("m", MockScript::identity());
    let refused = attribute_partition(
        Task::CodeSummarization,
        &partition,
        &model,
        &Comparator::of_kind(ComparatorKind::Exact),
        &AttributionConfig::exact(),
    )
    .is_err();
    let cap_ok = refused
        && enumerate_exact(13, DEFAULT_EXACT_CAP).is_err()
        && enumerate_exact(12, DEFAULT_EXACT_CAP).map(|p| p.len()) == Ok(4095);

    check(
        failures.is_empty() && code_ok == 100 && rule_ok == 100 && llm_ok == 100 && cap_ok,
        format!(
            "code {code_ok}/100, nl_rule {rule_ok}/100, nl_llm {llm_ok}/100 ({fallbacks} via fallback), 13-feature exact refused: {cap_ok}{}",
            failures.first().map(|f| format!(", first failure: {f}")).unwrap_or_default()
        ),
    )
}

const SNIPPET_TOKENS: &[&str] = &[
    "x", "y", "total", "=", "+", "-", "*", "(", ")", ":", ";", "{", "}", "[", "]", "def", "return", "if", "else", "for",
    "in", "while", "int", "public", "class", "1", "2", "0.5", "\"s\"", ",", "\n", "    ", " ", "é", "\u{4f60}",
];

fn random_snippet(r: &mut ChaCha8Rng) -> String {
    let len = r.random_range(0..40);
    let mut s = String::new();
    for _ in 0..len {
        s.push_str(SNIPPET_TOKENS.choose(r).unwrap());
        if r.random_bool(0.5) {
            s.push(' ');
        }
    }
    s
}

/// Candidate, reference, expected components and expected total.
type OraclePair = (&'static str, &'static str, [Option<f64>; 4], f64);

fn codebleu_oracle_pairs() -> Vec<OraclePair> {
    let q = |x: f64| x.powf(0.25);
    let b1 = q(2.0 / 3.0 * 2.0 / 3.0 * 0.5 * 1.0);
    let b2 = q(0.75 * 0.625 * 3.0 / 7.0 / 6.0);
    let w2 = q(0.875 * 0.625 * 3.0 / 7.0 / 6.0);
    let b3 = (-0.3_f64).exp() * q(0.8 * 2.0 / 3.0 * 0.5);
    let b4 = (-1.0_f64 / 7.0).exp() * q(6.0 / 7.0 * 2.0 / 3.0 * 0.4);
    let b5 = (-1.0_f64).exp() * q(0.5);
    vec![
        ("x = 2\n", "x = 1\n", [Some(b1), Some(b1), Some(1.0), None], (2.0 * b1 + 1.0) / 3.0),
        (
            "def f(b):\n    return b\n",
            "def f(a):\n    return a\n",
            [Some(b2), Some(w2), Some(1.0), Some(1.0)],
            0.25 * (b2 + w2 + 2.0),
        ),
        (
            "def f(a):\n    return a + 1\n",
            "def f(a):\n    b = a + 1\n    return b\n",
            [Some(b3), Some(b3), Some(0.25), Some(0.5)],
            0.25 * (2.0 * b3 + 0.75),
        ),
        (
            "def f(a:\n    return a\n",
            "def f(a):\n    return a\n",
            [Some(b4), Some(b4), Some(0.0), Some(0.0)],
            0.5 * b4,
        ),
        ("return a\n", "return (a +\n", [Some(b5), Some(b5), None, None], b5),
    ]
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= CODEBLEU_TOL,
        (None, None) => true,
        _ => false,
    }
}

fn criterion_6() -> Outcome {
    let comparators = [
        Comparator::of_kind(ComparatorKind::Exact),
        Comparator::of_kind(ComparatorKind::Tfidf),
        Comparator::of_kind(ComparatorKind::Codebleu).with_language(Language::Python),
        Comparator::of_kind(ComparatorKind::Codebleu).with_language(Language::Java),
        Comparator::of_kind(ComparatorKind::EmbedF1),
    ];
    let mut r = rng(6000);
    let mut out_of_range = 0;
    let mut not_reflexive = 0;
    for _ in 0..1000 {
        let (a, b) = (random_snippet(&mut r), random_snippet(&mut r));
        for c in &comparators {
            for s in [c.score(&a, &b), c.score(&b, &a)] {
                let s = s.map_err(|e| e.to_string())?;
                if !(0.0..=1.0).contains(&s) || s.is_nan() {
                    out_of_range += 1;
                }
            }
            for x in [&a, &b] {
                if !x.is_empty() && c.score(x, x).map_err(|e| e.to_string())? != 1.0 {
                    not_reflexive += 1;
                }
            }
        }
    }
    let cfg = ComparatorConfig::new(ComparatorKind::Codebleu);
    let mut oracle_ok = 0;
    let mut mismatch = None;
    for (cand, reference, parts, total) in codebleu_oracle_pairs() {
        let got = codebleu_breakdown(cand, reference, Language::Python, &cfg);
        let ok = close(Some(got.ngram), parts[0])
            && close(Some(got.weighted_ngram), parts[1])
            && close(got.syntax, parts[2])
            && close(got.dataflow, parts[3])
            && (got.total - total).abs() <= CODEBLEU_TOL;
        if ok {
            oracle_ok += 1;
        } else if mismatch.is_none() {
            mismatch = Some(format!(", mismatch on {cand:?}: got {got:?}, expected {parts:?} total {total}"));
        }
    }
    check(
        out_of_range == 0 && not_reflexive == 0 && oracle_ok == 5,
        format!(
            "1000 pairs x 5 comparators: {out_of_range} out of [0,1], {not_reflexive} non-reflexive; codebleu oracle {oracle_ok}/5{}",
            mismatch.unwrap_or_default()
        ),
    )
}

/// Two-sided exact signed-rank p-value by enumerating all sign patterns.
fn wilcoxon_oracle(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = d.len();
    let ranks: Vec<f64> = d
        .iter()
        .map(|x| {
            let below = d.iter().filter(|y| y.abs() < x.abs()).count() as f64;
            let tied = d.iter().filter(|y| y.abs() == x.abs()).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for signs in 0..(1u64 << n) {
        let w: f64 = (0..n).filter(|i| signs >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= observed {
            le += 1;
        }
        if w >= observed {
            ge += 1;
        }
    }
    (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0)
}

fn cliffs_oracle(a: &[f64], b: &[f64]) -> f64 {
    let mut dominance = 0i64;
    for x in a {
        for y in b {
            dominance += (x > y) as i64 - (x < y) as i64;
        }
    }
    dominance as f64 / (a.len() * b.len()) as f64
}

fn criterion_7() -> Outcome {
    let mut r = rng(7000);
    let mut wilcoxon_ok = 0;
    let mut wilcoxon_first_bad = None;
    for t in 0..100 {
        let n = 1 + t % 12;
        let (a, b) = loop {
            let a: Vec<f64> = (0..n).map(|_| r.random_range(0..6) as f64 / 10.0).collect();
            let b: Vec<f64> = (0..n).map(|_| r.random_range(0..6) as f64 / 10.0).collect();
            if a.iter().zip(&b).any(|(x, y)| x != y) {
                break (a, b);
            }
        };
        let got = wilcoxon(&a, &b).map_err(|e| e.to_string())?;
        let expected = wilcoxon_oracle(&a, &b);
        if got.method == WilcoxonMethod::Exact && got.p_value == expected {
            wilcoxon_ok += 1;
        } else if wilcoxon_first_bad.is_none() {
            wilcoxon_first_bad = Some(format!(", n={n}: got {} expected {expected}", got.p_value));
        }
    }

    let mut cliffs_ok = 0;
    for _ in 0..100 {
        let (m, k) = (r.random_range(1..30), r.random_range(1..30));
        let a: Vec<f64> = (0..m).map(|_| r.random_range(0..10) as f64 / 10.0).collect();
        let b: Vec<f64> = (0..k).map(|_| r.random_range(0..10) as f64 / 10.0).collect();
        if cliffs_delta(&a, &b).map_err(|e| e.to_string())?.0 == cliffs_oracle(&a, &b) {
            cliffs_ok += 1;
        }
    }

    let mut holm_ok = 0;
    for _ in 0..100 {
        let p: Vec<f64> = (0..r.random_range(1..10)).map(|_| r.random::<f64>()).collect();
        let adj = holm_correction(&p);
        if adj.iter().zip(&p).all(|(a, raw)| a >= raw && *a <= 1.0) {
            holm_ok += 1;
        }
    }
    let hand = holm_correction(&[0.01, 0.04, 0.03]);
    let hand_ok = hand.iter().zip([0.03, 0.06, 0.06]).all(|(a, e)| (a - e).abs() < 1e-12);

    check(
        wilcoxon_ok == 100 && cliffs_ok == 100 && holm_ok == 100 && hand_ok,
        format!(
            "wilcoxon exact {wilcoxon_ok}/100, cliff's delta {cliffs_ok}/100, holm >= raw {holm_ok}/100, hand case {hand:?}{}",
            wilcoxon_first_bad.unwrap_or_default()
        ),
    )
}

const E2E_SCRIPT: &str = r#"{"default": {"extract": "\\b(?:sort|revers|merg|pars|filter|split|dedup)\\w*"}}"#;

fn e2e_dataset() -> String {
    let docs = [
        InputDocument::new("gen-0", Task::CodeGeneration, "Write a function that sorts the list. Remove duplicates before returning. Keep the original order of ties.").with_language("python"),
        InputDocument::new("gen-1", Task::CodeGeneration, "Parse the header line into fields.\nThen filter out empty fields and return them as a list.").with_language("python"),
        InputDocument::new("gen-2", Task::CodeGeneration, "Merge two sorted arrays into one. The result must stay sorted. Do not modify the inputs.").with_language("python"),
        InputDocument::new("gen-3", Task::CodeGeneration, "Split the text on commas and reverse each piece. Return the pieces joined by spaces.").with_language("python"),
        InputDocument::new("gen-4", Task::CodeGeneration, "Dedup the records by key. Records with a missing key are dropped. Return the count of kept records.").with_language("python"),
        InputDocument::new("sum-0", Task::CodeSummarization, "def sort_items(xs):\n    ys = sorted(xs)\n    ys.reverse()\n    return ys\n").with_language("python"),
        InputDocument::new("sum-1", Task::CodeSummarization, "def parse_line(line):\n    parts = line.split(',')\n    kept = [p for p in parts if p]\n    return kept\n").with_language("python"),
        InputDocument::new("sum-2", Task::CodeSummarization, "def merge(a, b):\n    out = a + b\n    out.sort()\n    return out\n").with_language("python"),
        InputDocument::new("sum-3", Task::CodeSummarization, "def filter_pos(values):\n    total = 0\n    kept = [v for v in values if v > 0]\n    total = len(kept)\n    return kept, total\n").with_language("python"),
        InputDocument::new("sum-4", Task::CodeSummarization, "def dedup(xs):\n    seen = set()\n    out = []\n    for x in xs:\n        if x not in seen:\n            seen.add(x)\n            out.append(x)\n    return out\n").with_language("python"),
    ];
    docs.iter().map(|d| serde_json::to_string(d).unwrap() + "\n").collect()
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_featattr"))
        .args(args)
        .env_remove("FS_CACHE_DIR")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn harness_run(root: &Path, dataset: &Path, script: &Path) -> Result<(), String> {
    std::fs::create_dir_all(root).map_err(|e| e.to_string())?;
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let noisy = root.join("noisy.jsonl");
    let eval = root.join("eval");
    run_cli(&["inject", "--dataset", &s(dataset), "--mode", "nonsensical", "--seed", "11", "--out", &s(&noisy), "--mock", &s(script)])?;
    run_cli(&["evaluate", "--dataset", &s(dataset), "--noisy", &s(&noisy), "--mock", &s(script), "--out", &s(&eval)])?;
    run_cli(&["stats", "--scores", &s(&eval), "--out", &s(&root.join("results.csv"))])
}

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dataset = tmp.path().join("dataset.jsonl");
    let script = tmp.path().join("mock.json");
    std::fs::write(&dataset, e2e_dataset()).map_err(|e| e.to_string())?;
    std::fs::write(&script, E2E_SCRIPT).map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("run-a"), tmp.path().join("run-b"));
    harness_run(&a, &dataset, &script)?;
    harness_run(&b, &dataset, &script)?;
    let files = ["noisy.jsonl", "eval/records.jsonl", "eval/scores.jsonl", "results.csv", "results.details.json"];
    let mut differing = Vec::new();
    let mut bytes = 0;
    for f in files {
        let (x, y) = (std::fs::read(a.join(f)).map_err(|e| format!("{f}: {e}"))?, std::fs::read(b.join(f)).map_err(|e| format!("{f}: {e}"))?);
        bytes += x.len();
        if x != y {
            differing.push(f);
        }
    }
    let rows = std::fs::read_to_string(a.join("results.csv")).map_err(|e| e.to_string())?.lines().count() - 1;
    check(
        differing.is_empty() && rows > 0,
        format!("{} files ({bytes} bytes, {rows} result rows) byte-identical across runs; differing: {differing:?}", files.len()),
    )
}

fn criterion_9() -> Outcome {
    let features: Vec<String> = (0..12)
        .map(|k| format!("Step {k}: apply transform T{k} to the buffer and record the outcome.\n"))
        .collect();
    let partition = FeaturePartition::from_texts("perf", &features, "nl_rule");
    let model = MockProvider::new("mock", MockScript::extract(r"\bT\d+\b").map_err(|e| e.to_string())?);
    let start = Instant::now();
    let result = attribute_partition(
        Task::CodeGeneration,
        &partition,
        &model,
        &Comparator::of_kind(ComparatorKind::Tfidf),
        &AttributionConfig::exact(),
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(
        result.coalition_count == 4095 && result.mode == Mode::Exact && elapsed < PERF_BUDGET,
        format!("{} coalitions in {elapsed:.2?}", result.coalition_count),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("exact Shapley vs permutation oracle", criterion_1),
        ("noise feature scores exactly zero", criterion_2),
        ("random baseline calibration", criterion_3),
        ("Monte-Carlo fidelity", criterion_4),
        ("splitter losslessness and exact cap", criterion_5),
        ("comparator bounds, reflexivity, codebleu oracle", criterion_6),
        ("statistics oracles", criterion_7),
        ("end-to-end determinism", criterion_8),
        ("12-feature exact performance", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {} {name} ... PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name} ... FAIL ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
