//! Acceptance suite. Every test prints one `[PASS]` or `[FAIL]` line for
//! its criterion and then asserts it. Run with `--nocapture` to see them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use polarity_core::corpus::{Corpus, Sentence, Token};
use polarity_core::dynamics::{
    abc, data_efficiency, pearson, savgol_smooth, t_test_one_sample, CurvePoint, LearningCurve, Sidedness,
    SmoothingConfig,
};
use polarity_core::lexicon::{find_matches, ContextType, EntryKind, Lexicon};
use polarity_core::lm::{
    perplexity, random_tiny_check, train_prepared, CheckpointedModel, LanguageModel, LmConfig, PreparedData,
    TrainLogRow,
};
use polarity_core::pairs::{evaluate, MinimalPair};
use polarity_core::scope::{licensor_selection_report, scan_corpus, tree_distance, LicensedOccurrence};
use polarity_core::synth::{generate_corpus, gold_occurrences, multi_licensor_suite, GrammarSpec};
use polarity_lab::config::{parse_assignment, RunConfig};
use polarity_lab::experiment::run_experiment;
use polarity_lab::report::Report;
use polarity_lab::seeds::{derive_seed, GRADCHECK};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRADCHECK_CASES: u64 = 25;
const GRADCHECK_MAX_REL_ERROR: f64 = 1e-4;
const GRADCHECK_BUDGET: Duration = Duration::from_secs(30);
const OVERFIT_PERPLEXITY: f64 = 1.5;
const OVERFIT_EPOCHS: usize = 200;
const OVERFIT_BUDGET: Duration = Duration::from_secs(60);
const SMOOTHING_TOLERANCE: f64 = 1e-9;
const ABC_RELATIVE_TOLERANCE: f64 = 1e-6;
const RIEMANN_SUBDIVISIONS: usize = 10_000;
const STATS_TOLERANCE: f64 = 1e-9;
const SCAN_MIN_SENTENCES: usize = 10_000;
const RANDOM_TREES: usize = 1_000;
const MULTI_SUITE_SENTENCES: usize = 200;
const EXPERIMENT1_MIN_POSITIVE: usize = 4;
const EXPERIMENT1_BUDGET: Duration = Duration::from_secs(20 * 60);
const EXPERIMENT2_MAX_P: f64 = 0.2;
const EXPERIMENT2_BUDGET: Duration = Duration::from_secs(45 * 60);

const DESK_CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/experiment-desk.toml");

/// Timed criteria run one at a time so their budgets measure them alone.
static HEAVY: Mutex<()> = Mutex::new(());

fn exclusive() -> std::sync::MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(criterion: u32, name: &str, ok: bool, detail: String) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {criterion:>2}: {name}: {detail}");
    assert!(ok, "criterion {criterion} ({name}) failed: {detail}");
}

fn desk_config(assignments: &[&str]) -> RunConfig {
    let parsed: Vec<_> = assignments.iter().map(|a| parse_assignment(a).unwrap()).collect();
    RunConfig::load(Some(Path::new(DESK_CONFIG)), &parsed).unwrap()
}

fn curve(context: ContextType, xs: &[f64], ys: &[f64]) -> LearningCurve {
    let points = xs
        .iter()
        .zip(ys)
        .enumerate()
        .map(|(i, (&x, &y))| CurvePoint {
            step: i as u64 * 10,
            tokens_seen: i as u64 * 1000,
            examples_seen: x,
            accuracy: y,
        })
        .collect();
    LearningCurve::new(context, 0, points).unwrap()
}

#[test]
fn c01_gradient_check() {
    let _guard = exclusive();
    let start = Instant::now();
    let base = derive_seed(1, GRADCHECK);
    let mut worst = 0.0f64;
    for i in 0..GRADCHECK_CASES {
        let (case, report) = random_tiny_check(base.wrapping_add(i));
        assert!(case.vocab.max(case.embed).max(case.hidden) <= 8);
        worst = worst.max(report.max_rel_error);
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        "gradient correctness",
        worst < GRADCHECK_MAX_REL_ERROR && elapsed < GRADCHECK_BUDGET,
        format!("{GRADCHECK_CASES} cases, max relative error {worst:.2e}, {:.1}s", elapsed.as_secs_f64()),
    );
}

#[test]
fn c02_overfit_sanity() {
    let _guard = exclusive();
    let start = Instant::now();
    let (corpus, _) = generate_corpus(&GrammarSpec::bundled(), 50, 1).unwrap();
    let config = LmConfig {
        embed_dim: 32,
        hidden_dim: 32,
        layers: 1,
        dropout: 0.0,
        batch_size: 16,
        base_lr: 20.0,
        epochs: OVERFIT_EPOCHS,
        val_fraction: 0.0,
        checkpoint_every_batches: 1_000_000,
        ..LmConfig::desk()
    };
    let data = PreparedData::new(&corpus, &config).unwrap();
    let mut hook = |_: &CheckpointedModel<f32>, _: &TrainLogRow| Ok(());
    let run = train_prepared::<f32>(&data, &config, &mut hook).unwrap();
    let ppl = perplexity(&run.final_model.params, &data.train_stream, &config).unwrap();
    let elapsed = start.elapsed();
    verdict(
        2,
        "overfit sanity",
        ppl < OVERFIT_PERPLEXITY && elapsed < OVERFIT_BUDGET,
        format!("training perplexity {ppl:.3} after {OVERFIT_EPOCHS} epochs, {:.1}s", elapsed.as_secs_f64()),
    );
}

const SMALL_EXPERIMENT: &str = r#"
seed = 11
seeds = 2

[lm]
embed_dim = 8
hidden_dim = 12
layers = 1
dropout = 0.2
batch_size = 16
bptt_len = 10
base_lr = 10.0
epochs = 1
checkpoint_every_batches = 5

[smoothing]
window = 5
degree = 1

[corpus]
sentences = 1500

[corpus.frequencies]
adverbs = 500
conditional = 1000
determiner_negation = 2000
sentential_negation = 4000

[pairs]
per_context = 10

[experiment]
keep_checkpoints = true
"#;

fn tree_bytes(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn c03_determinism() {
    let _guard = exclusive();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("small.toml");
    fs::write(&file, SMALL_EXPERIMENT).unwrap();
    let config = RunConfig::load(Some(&file), &[]).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_experiment(&config, &a).unwrap();
    run_experiment(&config, &b).unwrap();
    let (ta, tb) = (tree_bytes(&a), tree_bytes(&b));
    let checkpoints = ta.keys().filter(|p| p.extension().is_some_and(|e| e == "ckpt")).count();
    let differing: Vec<&PathBuf> = ta.keys().filter(|p| ta.get(*p) != tb.get(*p)).collect();
    let ok = checkpoints > 0
        && ta.contains_key(Path::new("report.json"))
        && ta.keys().eq(tb.keys())
        && differing.is_empty();
    verdict(
        3,
        "determinism",
        ok,
        format!(
            "{} files including report.json and {checkpoints} checkpoints, {} differ",
            ta.len(),
            differing.len()
        ),
    );
}

#[test]
fn c04_smoothing_oracle() {
    let cfg = SmoothingConfig { window: 25, degree: 1 };
    let half = cfg.window / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(30..200);
        let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let smoothed = savgol_smooth(&curve(ContextType::Only, &xs, &ys), cfg).unwrap();
        for (i, p) in smoothed.points.iter().enumerate() {
            let h = half.min(i).min(n - 1 - i);
            let window = &ys[i - h..=i + h];
            let mean = window.iter().sum::<f64>() / window.len() as f64;
            worst = worst.max((p.accuracy - mean).abs());
        }
    }
    let mut linear_worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(30..200);
        let (a, b) = (rng.gen_range(0.3..0.7), rng.gen_range(-0.4..0.4) / n as f64);
        let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let ys: Vec<f64> = (0..n).map(|i| a + b * (i as f64 - n as f64 / 2.0)).collect();
        let smoothed = savgol_smooth(&curve(ContextType::Only, &xs, &ys), cfg).unwrap();
        for (p, y) in smoothed.points.iter().zip(&ys) {
            linear_worst = linear_worst.max((p.accuracy - y).abs());
        }
    }
    verdict(
        4,
        "smoothing oracle",
        worst < SMOOTHING_TOLERANCE && linear_worst < SMOOTHING_TOLERANCE,
        format!("moving-average diff {worst:.1e}, linear diff {linear_worst:.1e}"),
    );
}

fn sigmoid_curve(rng: &mut ChaCha8Rng, xs: &[f64]) -> Vec<f64> {
    let xmax = *xs.last().unwrap();
    let c = rng.gen_range(0.3..0.6);
    let f = rng.gen_range(0.8..1.0);
    let mid = rng.gen_range(0.1..0.6) * xmax;
    let w = rng.gen_range(0.05..0.2) * xmax;
    xs.iter().map(|x| c + (f - c) / (1.0 + (-(x - mid) / w).exp())).collect()
}

fn first_converged(ys: &[f64]) -> usize {
    let threshold = 0.95 * ys.last().unwrap();
    ys.iter().position(|&y| y >= threshold).unwrap()
}

/// Midpoint sum of the piecewise-linear difference on `[xs[0], xs[end]]`.
fn riemann_area(xs: &[f64], a: &[f64], b: &[f64], end: usize) -> f64 {
    let (lo, hi) = (xs[0], xs[end]);
    let h = (hi - lo) / RIEMANN_SUBDIVISIONS as f64;
    let interp = |ys: &[f64], x: f64| {
        let k = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
        let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
        ys[k - 1] + t * (ys[k] - ys[k - 1])
    };
    (0..RIEMANN_SUBDIVISIONS)
        .map(|i| {
            let x = lo + (i as f64 + 0.5) * h;
            interp(a, x) - interp(b, x)
        })
        .sum::<f64>()
        * h
}

#[test]
fn c05_abc_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut exact = true;
    for _ in 0..50 {
        let n = rng.gen_range(10..=60);
        let mut xs = vec![0.0];
        for _ in 1..n {
            let step = rng.gen_range(1..=20) as f64;
            xs.push(xs.last().unwrap() + step);
        }
        let (ya, yb) = (sigmoid_curve(&mut rng, &xs), sigmoid_curve(&mut rng, &xs));
        let (a, b) = (curve(ContextType::Quantifier, &xs, &ya), curve(ContextType::Quantifier, &xs, &yb));
        let end = first_converged(&ya).max(first_converged(&yb));
        let oracle = riemann_area(&xs, &ya, &yb, end);
        let got = abc(&a, &b).unwrap().abc;
        worst = worst.max((got - oracle).abs() / oracle.abs());
        exact &= abc(&a, &a).unwrap().abc == 0.0;
        exact &= abc(&b, &a).unwrap().abc == -got;
    }
    verdict(
        5,
        "AbC oracle",
        worst < ABC_RELATIVE_TOLERANCE && exact,
        format!("50 pairs, max relative error {worst:.1e}, self-area and antisymmetry exact: {exact}"),
    );
}

#[test]
fn c06_chance_level_efficiency() {
    let xs: Vec<f64> = (0..40).map(|i| i as f64 * 7.0).collect();
    let r = data_efficiency(&curve(ContextType::Superlative, &xs, &[0.5; 40])).unwrap();
    verdict(
        6,
        "data efficiency of a flat curve",
        r.examples_to_95 == 0.0,
        format!("examples_to_95 = {}", r.examples_to_95),
    );
}

#[test]
fn c07_statistics_oracles() {
    // 50-digit mpmath reference values.
    let xs = [23.0, 10.0, 25.0, 32.0, 85.0, 127.0, 179.0, 218.0, 712.0];
    let ys = [4100.5, 6200.25, 3900.0, 3100.75, 2600.5, 1800.0, 2200.25, 1500.5, 640.0];
    let ts = [0.31, -0.12, 0.05, 0.22, -0.04, 0.17, 0.09, -0.02, 0.13];
    let r = pearson(&xs, &ys).unwrap();
    let t = t_test_one_sample(&ts, 0.0, Sidedness::Greater).unwrap();
    let t2 = t_test_one_sample(&ts, 0.0, Sidedness::TwoSided).unwrap();
    let diffs = [
        (r.statistic - -0.713_614_460_359_863_641_5).abs(),
        (r.p_value - 0.030_855_500_809_460_610_82).abs(),
        (t.statistic - 1.936_355_937_479_366_181_8).abs(),
        (t.p_value - 0.044_422_383_815_771_769_57).abs(),
        (t2.p_value - 0.088_844_767_631_543_539_14).abs(),
    ];
    let worst = diffs.iter().cloned().fold(0.0, f64::max);
    let line = pearson(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0], &[3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0, 17.0, 19.0])
        .unwrap()
        .statistic;
    verdict(
        7,
        "statistics oracles",
        worst < STATS_TOLERANCE && line == 1.0,
        format!("max abs diff {worst:.1e}, perfect line r = {line}"),
    );
}

type Key = (usize, usize, usize, usize, usize, ContextType);

fn keys(occ: &[LicensedOccurrence]) -> BTreeSet<Key> {
    occ.iter()
        .map(|o| (o.sentence_id, o.npi.start, o.npi.end, o.licensor.start, o.licensor.end, o.context))
        .collect()
}

fn precision_recall(found: &[LicensedOccurrence], gold: &[LicensedOccurrence]) -> (f64, f64) {
    let (f, g) = (keys(found), keys(gold));
    let hit = f.intersection(&g).count() as f64;
    (hit / f.len() as f64, hit / g.len() as f64)
}

/// Random tree: a shuffled token order where each token attaches to one
/// placed before it.
fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Sentence {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut heads = vec![0usize; n];
    for k in 1..n {
        heads[order[k]] = order[rng.gen_range(0..k)] + 1;
    }
    let tokens = heads.iter().map(|&h| Token::new("w", h, "dep")).collect();
    Sentence::new(0, tokens).unwrap()
}

/// Path length through the lowest common ancestor.
fn ancestor_distance(s: &Sentence, i: usize, j: usize) -> usize {
    let chain = |mut k: usize| {
        let mut out = vec![k];
        while let Some(h) = s.head_of(k) {
            out.push(h);
            k = h;
        }
        out
    };
    let (a, b) = (chain(i), chain(j));
    let depth_of: HashMap<usize, usize> = a.iter().enumerate().map(|(d, &k)| (k, d)).collect();
    let (up_b, lca) = b.iter().enumerate().find(|(_, k)| depth_of.contains_key(k)).unwrap();
    depth_of[lca] + up_b
}

#[test]
fn c08_scope_exactness() {
    let dense: Vec<(ContextType, f64)> = ContextType::ALL.iter().map(|&c| (c, 1500.0)).collect();
    let spec = GrammarSpec::bundled().restricted(&dense);
    let (corpus, gold) = generate_corpus(&spec, SCAN_MIN_SENTENCES, 8).unwrap();
    let gold = gold_occurrences(&gold);
    let scan = scan_corpus(&corpus, &Lexicon::bundled()).unwrap();
    let (p, r) = precision_recall(&scan.occurrences, &gold);
    let contexts: BTreeSet<ContextType> = gold.iter().map(|o| o.context).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0usize;
    for _ in 0..RANDOM_TREES {
        let n = rng.gen_range(1..=30);
        let s = random_tree(&mut rng, n);
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if tree_distance(&s, i, j).unwrap() != Some(ancestor_distance(&s, i, j)) {
            mismatches += 1;
        }
    }
    verdict(
        8,
        "scope exactness",
        p == 1.0 && r == 1.0 && contexts.len() == 9 && mismatches == 0,
        format!(
            "{} sentences, {} contexts, precision {p}, recall {r}; {mismatches}/{RANDOM_TREES} tree distances differ",
            corpus.len(),
            contexts.len()
        ),
    );
}

#[test]
fn c09_multi_licensor_selection() {
    let (corpus, gold) = multi_licensor_suite(&GrammarSpec::bundled(), MULTI_SUITE_SENTENCES, 9).unwrap();
    let lexicon = Lexicon::bundled();
    let gold = gold_occurrences(&gold);
    let ambiguous = corpus
        .sentences
        .iter()
        .filter(|s| {
            find_matches(s, &lexicon)
                .iter()
                .filter(|m| matches!(m.kind, EntryKind::Licensor(_)))
                .count()
                >= 2
        })
        .count();
    let rate = licensor_selection_report(&corpus, &lexicon, &gold).unwrap();
    verdict(
        9,
        "multi-licensor selection",
        rate == 1.0 && ambiguous == corpus.len(),
        format!("{ambiguous}/{} sentences with several licensors, selection accuracy {rate}", corpus.len()),
    );
}

#[test]
fn c10_frequency_accounting() {
    let spec = GrammarSpec::bundled();
    let n = 100_000;
    let (corpus, _) = generate_corpus(&spec, n, 10).unwrap();
    let table = scan_corpus(&corpus, &Lexicon::bundled()).unwrap().frequencies;
    let schedule = spec.scheduled_counts(n);
    let mut expected = String::from("context,count,per_100k\n");
    for c in ContextType::ALL {
        let count = schedule.get(&c).copied().unwrap_or(0);
        expected.push_str(&format!("{c},{count},{count}\n"));
    }
    // Rates per 100k sentences of the nine contexts, in context order.
    let published = [10, 23, 25, 32, 85, 127, 179, 218, 712];
    let matches_table = ContextType::ALL
        .iter()
        .zip(published)
        .all(|(&c, rate)| table.per_100k(c) == rate);
    verdict(
        10,
        "frequency accounting",
        table.to_csv() == expected && matches_table,
        format!(
            "{n} sentences, sentential_negation {} per 100k",
            table.per_100k(ContextType::SententialNegation)
        ),
    );
}

fn surface_multiset(corpus: &Corpus, occ: &[LicensedOccurrence], keep: ContextType) -> BTreeMap<(String, String), usize> {
    let mut out = BTreeMap::new();
    for o in occ.iter().filter(|o| o.context == keep) {
        let s = &corpus.sentences[o.sentence_id];
        let span = |start: usize, end: usize| {
            s.tokens[start..end]
                .iter()
                .map(|t| t.lower.as_str())
                .collect::<Vec<_>>()
                .join(" ")
        };
        *out.entry((span(o.licensor.start, o.licensor.end), span(o.npi.start, o.npi.end)))
            .or_insert(0) += 1;
    }
    out
}

#[test]
fn c11_ablation_invariants() {
    use polarity_core::ablation::{apply_ablation, plan_ablation};
    let dense: Vec<(ContextType, f64)> = ContextType::ALL.iter().map(|&c| (c, 1500.0)).collect();
    let (corpus, gold) = generate_corpus(&GrammarSpec::bundled().restricted(&dense), 4000, 11).unwrap();
    let occ = gold_occurrences(&gold);
    let lexicon = Lexicon::bundled();
    let mut failures = Vec::new();
    for keep in ContextType::ALL {
        let plan = plan_ablation(&corpus, &occ, keep, 111).unwrap();
        let ablated = apply_ablation(&corpus, &plan).unwrap();
        let rescan = scan_corpus(&ablated, &lexicon).unwrap();
        let ok = ablated.len() == corpus.len()
            && rescan.occurrences.iter().all(|o| o.context == keep)
            && surface_multiset(&ablated, &rescan.occurrences, keep) == surface_multiset(&corpus, &occ, keep);
        if !ok {
            failures.push(keep.to_string());
        }
    }
    verdict(
        11,
        "ablation invariants",
        failures.is_empty(),
        format!("9 keep-contexts, failing: {failures:?}"),
    );
}

fn report_of(dir: &Path) -> Report {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn c12_experiment_one_direction() {
    let _guard = exclusive();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut rs = Vec::new();
    for master in 1..=5u64 {
        let seed = format!("seed={master}");
        let config = desk_config(&[&seed, "experiment.single_context=false", "experiment.keep_checkpoints=false"]);
        let out = dir.path().join(format!("master-{master}"));
        run_experiment(&config, &out).unwrap();
        let report = report_of(&out);
        rs.push(report.frequency_efficiency.map(|fe| fe.correlation.statistic).unwrap_or(f64::NAN));
    }
    let positive = rs.iter().filter(|&&r| r > 0.0).count();
    let elapsed = start.elapsed();
    verdict(
        12,
        "frequency vs data efficiency",
        positive >= EXPERIMENT1_MIN_POSITIVE && elapsed < EXPERIMENT1_BUDGET,
        format!(
            "r per master seed {:?}, {positive}/5 positive, {:.0}s",
            rs.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c13_experiment_two_direction() {
    let _guard = exclusive();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = desk_config(&["seed=1"]);
    let out = dir.path().join("experiment");
    run_experiment(&config, &out).unwrap();
    let report = report_of(&out);
    let transfer = report.transfer.expect("single-context runs enabled");
    let p = transfer.t_test.as_ref().map_or(f64::NAN, |t| t.p_value);
    let per_context: Vec<(String, f64)> = report
        .contexts
        .iter()
        .filter_map(|c| c.single.as_ref().map(|s| (c.context.to_string(), (s.abc.normalized_abc * 1000.0).round() / 1000.0)))
        .collect();
    let elapsed = start.elapsed();
    verdict(
        13,
        "all-context vs single-context transfer",
        transfer.mean_abc > 0.0 && p < EXPERIMENT2_MAX_P && elapsed < EXPERIMENT2_BUDGET,
        format!(
            "mean AbC {:.3}, normalized AbC per context {per_context:?}, one-sided p {p:.3}, {:.0}s",
            transfer.mean_abc,
            elapsed.as_secs_f64()
        ),
    );
}

/// Log-probabilities keyed by the last prefix word and the NPI.
struct Lookup(HashMap<(&'static str, &'static str), f64>);

impl LanguageModel for Lookup {
    fn phrase_logprob(&self, prefix: &[String], phrase: &[String]) -> f64 {
        let key = (prefix.last().unwrap().as_str(), phrase.join(" "));
        *self
            .0
            .iter()
            .find(|((w, p), _)| *w == key.0 && *p == key.1)
            .map(|(_, v)| v)
            .expect("fixture covers every query")
    }
}

#[test]
fn c14_minimal_pair_scoring() {
    let table = Lookup(HashMap::from([
        (("not", "any"), -1.0),
        (("also", "any"), -3.0),
        (("not", "ever"), -2.0),
        (("also", "ever"), -2.0),
        (("never", "any"), -4.0),
        (("often", "any"), -1.5),
        (("never", "ever"), -1.0),
        (("always", "ever"), -5.0),
        (("no", "any"), -0.5),
        (("the", "any"), -2.5),
        (("rarely", "ever"), -2.0),
        (("often", "ever"), -2.0),
        (("rarely", "any"), -1.0),
        (("hardly", "ever"), -3.0),
        (("usually", "ever"), -1.0),
        (("seldom", "ever"), -0.25),
        (("if", "any"), -1.2),
        (("when", "any"), -1.9),
        (("if", "ever"), -0.7),
        (("because", "ever"), -0.7),
        (("unless", "any"), -2.0),
        (("because", "any"), -2.1),
    ]));
    let fixture = [
        (ContextType::SententialNegation, "not", "also", "any"),
        (ContextType::SententialNegation, "not", "also", "ever"),
        (ContextType::SententialNegation, "never", "often", "any"),
        (ContextType::SententialNegation, "never", "always", "ever"),
        (ContextType::SententialNegation, "no", "the", "any"),
        (ContextType::Adverbs, "rarely", "often", "ever"),
        (ContextType::Adverbs, "rarely", "often", "any"),
        (ContextType::Adverbs, "hardly", "usually", "ever"),
        (ContextType::Adverbs, "seldom", "usually", "ever"),
        (ContextType::Conditional, "if", "when", "any"),
        (ContextType::Conditional, "if", "because", "ever"),
        (ContextType::Conditional, "unless", "because", "any"),
    ];
    let pairs: Vec<MinimalPair> = fixture
        .iter()
        .enumerate()
        .map(|(i, &(context, good, bad, npi))| MinimalPair {
            id: format!("fixture-{i}"),
            context,
            good_prefix: vec!["she".into(), good.into()],
            bad_prefix: vec!["she".into(), bad.into()],
            npi: vec![npi.into()],
        })
        .collect();
    let got: Vec<(ContextType, usize, usize, f64)> = evaluate(&table, &pairs)
        .unwrap()
        .into_iter()
        .map(|a| (a.context, a.correct, a.total, a.accuracy))
        .collect();
    let expected = vec![
        (ContextType::Adverbs, 2, 4, 0.5),
        (ContextType::Conditional, 2, 3, 2.0 / 3.0),
        (ContextType::SententialNegation, 3, 5, 0.6),
    ];
    verdict(
        14,
        "minimal-pair scoring",
        got == expected,
        format!("per-context accuracies {got:?}"),
    );
}
