//! Acceptance checks. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero on any FAIL.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};

use triage_core::classifiers::{flatten, ForestParams, Hyperparameters, Mlp, ModelParams};
use triage_core::corpus::{generate_corpus, CorpusSpec, FileRole};
use triage_core::evaluation::{load_corpus, run_cv_specs, stratified_folds, Corpus, CvOptions};
use triage_core::features::{build_vocabulary, vectorize};
use triage_core::ingest::{compute_reduction, scan_dump, SelectionRules};
use triage_core::preprocess::{clean_text, CleaningConfig, TokenDocument};
use triage_core::stats::{chi2_upper_tail, friedman_test, nemenyi_pairwise, studentized_range_cdf, ScoreMatrix};
use triage_core::store::{load_model, save_model};
use triage_core::{Algorithm, ClassifierSpec, Dataset, FailureClass, SparseVector};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(limit: Duration, start: Instant, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    if took > limit {
        return Err(format!("{what} took {took:.2?}, limit {limit:?}"));
    }
    Ok(())
}

fn doc(tokens: &[&str]) -> TokenDocument {
    tokens.iter().copied().collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let docs = [doc(&["error", "pod", "crash"]), doc(&["pod", "running"]), doc(&["error", "timeout"])];
    let vocab = build_vocabulary(&docs, 1).map_err(|e| e.to_string())?;
    ensure!(vocab.terms() == ["crash", "error", "pod", "running", "timeout"], "terms {:?}", vocab.terms());
    let expected = [
        ("crash", (4.0f64 / 2.0).ln() + 1.0),
        ("error", (4.0f64 / 3.0).ln() + 1.0),
        ("pod", (4.0f64 / 3.0).ln() + 1.0),
        ("running", (4.0f64 / 2.0).ln() + 1.0),
        ("timeout", (4.0f64 / 2.0).ln() + 1.0),
    ];
    let mut worst: f64 = 0.0;
    for (term, idf) in expected {
        worst = worst.max((vocab.idf(term).unwrap() - idf).abs());
    }
    ensure!(worst <= 1e-9, "idf error {worst:e}");
    let mut norm_err: f64 = 0.0;
    for d in &docs {
        let v = vectorize(&vocab, d);
        ensure!(!v.is_empty(), "fixture document vectorized to empty");
        norm_err = norm_err.max((v.entries().iter().map(|e| e.1 * e.1).sum::<f64>().sqrt() - 1.0).abs());
    }
    ensure!(norm_err <= 1e-9, "norm error {norm_err:e}");
    within(Duration::from_secs(1), start, "TF-IDF fixture")?;
    Ok(format!("max idf error {worst:.1e}, max norm error {norm_err:.1e}"))
}

const CLEANING_GOLDENS: [(&str, &str); 20] = [
    ("2023-01-15T10:23:45Z Error: Pod FAILED!!!", "error pod failed"),
    ("2023-01-15T10:23:45.123+02:00 started", "started"),
    ("2024-03-02 08:00:01,123 WARN disk pressure", "warn disk pressure"),
    ("E0301 12:00:00.000001 kubelet.go:88] probe failed", "kubelet.go 88 probe failed"),
    ("connect to 10.42.0.17 refused", "connect to refused"),
    ("listen on 0.0.0.0:8080 ok", "listen on ok"),
    ("pod cidr 10.244.0.0/16 exhausted", "pod cidr exhausted"),
    ("dial [fd00:10:42::1a] failed", "dial failed"),
    ("peer 2001:db8::2:1 down", "peer down"),
    ("container 3f2a9c1d0b7e started", "container started"),
    ("uid 123e4567-e89b-12d3-a456-426614174000 deleted", "uid deleted"),
    ("sha256:9f86d081884c7d659a2feaa0c55ad015a3bf4f1b2b0b822cd15d6c15b0f00a08 pulled", "sha256 pulled"),
    ("deadbeef is not a word, deadbee is", "is not a word deadbee is"),
    ("42 error\n43: retry 7 times", "error retry 7 times"),
    ("  17 | at Foo.bar(Foo.java:17)", "at foo.bar foo.java 17"),
    ("RequestHandlerClass threw NullPointerException", "requesthandlerclass threw nullpointerexception"),
    ("Back-off restarting failed_container /var/log/app.log", "back-off restarting failed_container /var/log/app.log"),
    ("status=\"CrashLoopBackOff\"; reason='OOMKilled'", "status crashloopbackoff reason oomkilled"),
    ("line one\r\n\tline two", "line one line two"),
    ("ÄRGER über 日本 timeout", "rger ber timeout"),
];

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let config = CleaningConfig::default();
    let mut failures = Vec::new();
    for (input, expected) in CLEANING_GOLDENS {
        let once = clean_text(input, &config);
        if once != expected {
            failures.push(format!("{input:?} -> {once:?}, expected {expected:?}"));
        }
        let twice = clean_text(&once, &config);
        if twice != once {
            failures.push(format!("not idempotent on {input:?}: {once:?} -> {twice:?}"));
        }
    }
    ensure!(failures.is_empty(), "{}", failures.join("; "));
    within(Duration::from_secs(1), start, "cleaning suite")?;
    Ok(format!("{} golden pairs, idempotent", CLEANING_GOLDENS.len()))
}

fn criterion_3() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = CorpusSpec { bundles_per_class: 4, seed: 3, ..Default::default() };
    let manifest = generate_corpus(&spec, dir.path()).map_err(|e| e.to_string())?;
    let rules = SelectionRules::default();
    for entry in &manifest.entries {
        let bundle = scan_dump(&dir.path().join(&entry.path), &rules).map_err(|e| e.to_string())?;
        let selected: BTreeSet<&str> = bundle.paths().into_iter().collect();
        let expected: BTreeSet<&str> =
            entry.files.iter().filter(|f| f.role == FileRole::Selected).map(|f| f.path.as_str()).collect();
        ensure!(selected == expected, "{}: selected {selected:?}, generator {expected:?}", entry.path);
        ensure!(entry.files.iter().any(|f| f.role == FileRole::Decoy), "{} has no decoys", entry.path);
    }

    let fixture = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = fixture.path();
    write(root, "pods/api/containers/api.log", &[b'x'; 4])?;
    write(root, "nodes/worker-0/kubelet.log", &[b'y'; 60])?;
    write(root, "events/events.log", &[b'z'; 36])?;
    let bundle = scan_dump(root, &rules).map_err(|e| e.to_string())?;
    let stats = compute_reduction(root, &bundle).map_err(|e| e.to_string())?;
    ensure!(stats.total_bytes == 100 && stats.selected_bytes == 4, "{stats:?}");
    ensure!(stats.reduction_rounded() == 0.96, "reduction {}", stats.reduction_rounded());
    Ok(format!("{} bundles match generator; reduction {:.4}", manifest.entries.len(), stats.reduction_rounded()))
}

fn write(root: &Path, rel: &str, bytes: &[u8]) -> Result<(), String> {
    let path = root.join(rel);
    fs::create_dir_all(path.parent().unwrap()).map_err(|e| e.to_string())?;
    fs::write(path, bytes).map_err(|e| e.to_string())
}

fn random_sparse(rng: &mut ChaCha8Rng, dim: usize, density: f64) -> SparseVector {
    let mut entries = Vec::new();
    for c in 0..dim {
        if rng.gen_bool(density) {
            entries.push((c as u32, rng.gen_range(0.01..1.0)));
        }
    }
    SparseVector::new(entries, dim).unwrap()
}

/// Dense brute-force k-NN: plurality vote, ties to the nearest tied class.
fn knn_oracle(train: &[Vec<f64>], labels: &[FailureClass], query: &[f64], k: usize) -> FailureClass {
    let mut scored: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, t)| (t.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let nearest = &scored[..k];
    let count = |c: FailureClass| nearest.iter().filter(|n| labels[n.1] == c).count();
    let top = nearest.iter().map(|n| count(labels[n.1])).max().unwrap();
    nearest.iter().map(|n| labels[n.1]).find(|&c| count(c) == top).unwrap()
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dim = 60;
    let train: Vec<SparseVector> = (0..500).map(|_| random_sparse(&mut rng, dim, 0.15)).collect();
    let labels: Vec<FailureClass> = (0..500).map(|_| FailureClass::ALL[rng.gen_range(0..5)]).collect();
    let queries: Vec<SparseVector> = (0..200).map(|_| random_sparse(&mut rng, dim, 0.15)).collect();
    let data = Dataset::new(train.clone(), labels.clone()).unwrap();
    let model = ClassifierSpec::new(Algorithm::Knn, 0).fit(&data).map_err(|e| e.to_string())?;
    let predicted = model.predict(&queries).map_err(|e| e.to_string())?;
    let dense: Vec<Vec<f64>> = train.iter().map(|v| v.to_dense()).collect();
    let agree = queries
        .iter()
        .zip(&predicted)
        .filter(|(q, &p)| knn_oracle(&dense, &labels, &q.to_dense(), 5) == p)
        .count();
    ensure!(agree == queries.len(), "{agree}/{} predictions agree", queries.len());
    within(Duration::from_secs(30), start, "KNN equivalence")?;
    Ok(format!("200/200 agree in {:.2?}", start.elapsed()))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dim = 12;
    let net = Mlp::initialize(dim, &[10, 6], 5, 0.5, 5);
    let batch: Vec<SparseVector> = (0..4).map(|_| random_sparse(&mut rng, dim, 0.6)).collect();
    let refs: Vec<&SparseVector> = batch.iter().collect();
    let labels = [0, 3, 1, 4];
    let (_, grads) = net.loss_and_gradients(&refs, &labels, None);
    let analytic = flatten(&grads);
    let base = net.flat_parameters();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_flat_parameters(&p);
        let up = probe.loss_and_gradients(&refs, &labels, None).0;
        p[i] = base[i] - h;
        probe.set_flat_parameters(&p);
        let down = probe.loss_and_gradients(&refs, &labels, None).0;
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    ensure!(worst < 1e-4, "max relative error {worst:e}");
    Ok(format!("{} parameters, max relative error {worst:.2e}", base.len()))
}

/// Three Gaussian blobs in six dimensions, twenty points each.
fn learnable_fixture(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for (c, class) in FailureClass::ALL[..3].iter().enumerate() {
        for _ in 0..20 {
            let point: Vec<f64> =
                (0..6).map(|d| if d % 3 == c { 3.0 } else { 0.0 } + standard_normal(&mut rng)).collect();
            vectors.push(SparseVector::from_dense(&point));
            labels.push(*class);
        }
    }
    Dataset::new(vectors, labels).unwrap()
}

/// Box-Muller standard normal draw.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn criterion_6() -> Outcome {
    let data = learnable_fixture(6);
    let spec = ClassifierSpec::new(Algorithm::GradientBoosting, 0);
    let model = spec.fit(&data).map_err(|e| e.to_string())?;
    let ModelParams::GradientBoosting(gb) = &model.params else { unreachable!() };
    let dev = &gb.train_deviance[..11];
    ensure!(dev.windows(2).all(|w| w[1] <= w[0]), "deviance increased: {dev:?}");
    ensure!(dev[..4].windows(2).all(|w| w[1] < w[0]), "no strict decrease over first 3 stages: {dev:?}");
    Ok(format!("deviance {:.4} -> {:.4} over 10 stages", dev[0], dev[10]))
}

fn names(k: usize) -> Vec<String> {
    (0..k).map(|j| format!("t{j}")).collect()
}

fn criterion_7() -> Outcome {
    let m = ScoreMatrix::new(names(3), vec![vec![0.9, 0.8, 0.7], vec![0.6, 0.5, 0.4], vec![0.95, 0.7, 0.1]])
        .map_err(|e| e.to_string())?;
    let r = friedman_test(&m);
    ensure!((r.q_statistic - 6.0).abs() <= 1e-9, "Q = {}", r.q_statistic);
    ensure!((r.p_value - (-3.0f64).exp()).abs() <= 1e-9, "p = {}", r.p_value);
    let tied = ScoreMatrix::new(names(3), vec![vec![0.4; 3], vec![0.8; 3], vec![0.1; 3]]).unwrap();
    let t = friedman_test(&tied);
    ensure!(t.q_statistic == 0.0 && t.p_value == 1.0, "tied: Q = {}, p = {}", t.q_statistic, t.p_value);
    Ok(format!("Q = {:.12}, p = {:.12}; tied Q = 0, p = 1", r.q_statistic, r.p_value))
}

fn criterion_8() -> Outcome {
    let phi = Normal::new(0.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for q in [0.5, 1.0, 2.0, 3.0] {
        let expected = 2.0 * phi.cdf(q / std::f64::consts::SQRT_2) - 1.0;
        worst = worst.max((studentized_range_cdf(q, 2) - expected).abs());
    }
    ensure!(worst <= 1e-6, "F(q;2) error {worst:e}");
    let f5 = studentized_range_cdf(3.858, 5);
    ensure!((f5 - 0.95).abs() <= 2e-3, "F(3.858;5) = {f5}");
    let chi = chi2_upper_tail(6.0, 2);
    ensure!((chi - (-3.0f64).exp()).abs() <= 1e-12, "chi2_upper_tail(6,2) = {chi}");
    Ok(format!("F(q;2) error {worst:.1e}, F(3.858;5) = {f5:.5}, chi2 error {:.1e}", (chi - (-3.0f64).exp()).abs()))
}

/// Ten folds by five algorithms; row 4 contains a tie.
const NEMENYI_SCORES: [[f64; 5]; 10] = [
    [0.712, 0.655, 0.730, 0.698, 0.688],
    [0.694, 0.640, 0.741, 0.702, 0.676],
    [0.731, 0.662, 0.725, 0.690, 0.701],
    [0.705, 0.671, 0.738, 0.705, 0.669],
    [0.688, 0.648, 0.719, 0.711, 0.684],
    [0.720, 0.659, 0.744, 0.693, 0.690],
    [0.699, 0.652, 0.728, 0.707, 0.673],
    [0.716, 0.668, 0.733, 0.699, 0.695],
    [0.701, 0.644, 0.722, 0.714, 0.680],
    [0.725, 0.661, 0.736, 0.688, 0.692],
];

/// From scipy.stats.studentized_range (df = inf) on average ranks; see
/// tests/fixtures/nemenyi_reference.py.
const NEMENYI_REFERENCE: [[f64; 5]; 5] = [
    [1.000000, 0.002871, 0.392543, 0.979983, 0.182608],
    [0.002871, 1.000000, 0.000001, 0.019991, 0.618449],
    [0.392543, 0.000001, 1.000000, 0.134321, 0.000715],
    [0.979983, 0.019991, 0.134321, 1.000000, 0.480386],
    [0.182608, 0.618449, 0.000715, 0.480386, 1.000000],
];

fn criterion_9() -> Outcome {
    let m = ScoreMatrix::new(names(5), NEMENYI_SCORES.iter().map(|r| r.to_vec()).collect()).unwrap();
    let n = nemenyi_pairwise(&m);
    let mut worst: f64 = 0.0;
    for i in 0..5 {
        ensure!(n.p_matrix[i][i] == 1.0, "diagonal {i} = {}", n.p_matrix[i][i]);
        for j in 0..5 {
            ensure!(n.p_matrix[i][j] == n.p_matrix[j][i], "asymmetric at ({i},{j})");
            worst = worst.max((n.p_matrix[i][j] - NEMENYI_REFERENCE[i][j]).abs());
        }
    }
    ensure!(worst <= 1e-3, "max deviation from reference {worst:e}");
    Ok(format!("max deviation {worst:.1e}, CD = {:.4}", n.critical_difference))
}

fn cv_specs(seed: u64, trees: usize) -> Vec<ClassifierSpec> {
    Algorithm::ALL
        .iter()
        .map(|&a| {
            let mut spec = ClassifierSpec::new(a, seed);
            if let Hyperparameters::RandomForest(_) = spec.hyperparameters {
                spec.hyperparameters = Hyperparameters::RandomForest(ForestParams { trees, ..Default::default() });
            }
            spec
        })
        .collect()
}

fn synthetic_corpus(spec: &CorpusSpec) -> Result<Corpus, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = generate_corpus(spec, dir.path()).map_err(|e| e.to_string())?;
    load_corpus(dir.path(), &manifest, &SelectionRules::default(), &CleaningConfig::default())
        .map_err(|e| e.to_string())
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let seed = 2024;
    let options = CvOptions { k: 10, seed, min_df: 1 };
    let specs = cv_specs(seed, 100);
    let mut lines = Vec::new();
    let mut failures = Vec::new();

    let strong = synthetic_corpus(&CorpusSpec { signature_strength: 0.5, seed, ..Default::default() })?;
    let report = run_cv_specs(&strong, &specs, &options).map_err(|e| e.to_string())?;
    for s in &report.summary {
        lines.push(format!("{} {:.3}/{:.3}", s.algorithm, s.mean_accuracy, s.mean_weighted_f1));
        if s.mean_accuracy < 0.8 || s.mean_weighted_f1 < 0.75 {
            failures.push(format!("{} acc {:.4} f1 {:.4} at strength 0.5", s.algorithm, s.mean_accuracy, s.mean_weighted_f1));
        }
    }

    let null = synthetic_corpus(&CorpusSpec { signature_strength: 0.0, seed, ..Default::default() })?;
    let n = null.len() as u64;
    let binomial = Binomial::new(0.2, n).unwrap();
    let (lo, hi) = (binomial.inverse_cdf(0.025) as f64 / n as f64, binomial.inverse_cdf(0.975) as f64 / n as f64);
    let report = run_cv_specs(&null, &specs, &options).map_err(|e| e.to_string())?;
    for s in &report.summary {
        lines.push(format!("{} null {:.3}", s.algorithm, s.mean_accuracy));
        if !(lo..=hi).contains(&s.mean_accuracy) {
            failures.push(format!("{} acc {:.4} outside [{lo:.3}, {hi:.3}] at strength 0", s.algorithm, s.mean_accuracy));
        }
    }
    let took = start.elapsed();
    if took > Duration::from_secs(600) {
        failures.push(format!("took {took:.0?}"));
    }
    ensure!(failures.is_empty(), "{}", failures.join("; "));
    Ok(format!("{}; null interval [{lo:.3}, {hi:.3}]; {took:.1?}", lines.join(", ")))
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..1000 {
        let k = rng.gen_range(2..=10);
        let mut labels = Vec::new();
        for class in FailureClass::ALL {
            if rng.gen_bool(0.8) {
                let count = rng.gen_range(k..=k * 4 + 3);
                labels.extend(std::iter::repeat_n(class, count));
            }
        }
        if labels.is_empty() {
            labels = vec![FailureClass::Cluster; k];
        }
        let folds = stratified_folds(&labels, k, rng.gen()).map_err(|e| format!("trial {trial}: {e}"))?;
        ensure!(folds.assignment.len() == labels.len() && folds.assignment.iter().all(|&f| f < k),
            "trial {trial}: assignment is not a partition");
        for class in FailureClass::ALL {
            let mut per = vec![0usize; k];
            for (l, &f) in labels.iter().zip(&folds.assignment) {
                if *l == class {
                    per[f] += 1;
                }
            }
            let spread = per.iter().max().unwrap() - per.iter().min().unwrap();
            ensure!(spread <= 1, "trial {trial}: {class} fold counts {per:?}");
        }
    }
    Ok("1000 label multisets".into())
}

fn criterion_12() -> Outcome {
    let seed = 12;
    let corpus = synthetic_corpus(&CorpusSpec { bundles_per_class: 10, seed, ..Default::default() })?;
    let options = CvOptions { k: 5, seed, min_df: 1 };
    let specs = cv_specs(seed, 100);
    let first = run_cv_specs(&corpus, &specs, &options).and_then(|r| r.reproducible_json());
    let second = run_cv_specs(&corpus, &specs, &options).and_then(|r| r.reproducible_json());
    let (first, second) = (first.map_err(|e| e.to_string())?, second.map_err(|e| e.to_string())?);
    ensure!(first == second, "repeated evaluation produced different score JSON");

    let vocab = build_vocabulary(&corpus.documents, 1).map_err(|e| e.to_string())?;
    let vectors: Vec<SparseVector> = corpus.documents.iter().map(|d| vectorize(&vocab, d)).collect();
    let data = Dataset::new(vectors.clone(), corpus.labels.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probe: Vec<SparseVector> = (0..50)
        .map(|i| if i % 2 == 0 { vectors[i].clone() } else { random_sparse(&mut rng, vocab.len(), 0.05) })
        .collect();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for spec in &specs {
        let model = spec.fit(&data).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("{}.model", spec.algorithm().short_name()));
        save_model(&model, &path).map_err(|e| e.to_string())?;
        let loaded = load_model(&path).map_err(|e| e.to_string())?;
        ensure!(loaded == model, "{} differs after reload", spec.algorithm());
        ensure!(loaded.predict(&probe).unwrap() == model.predict(&probe).unwrap(),
            "{} predictions differ after reload", spec.algorithm());
    }
    Ok(format!("{} bytes of identical score JSON; 5 models round-trip", first.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("TF-IDF oracle", criterion_1),
        ("cleaning goldens", criterion_2),
        ("selection rule", criterion_3),
        ("KNN equivalence", criterion_4),
        ("MLP gradient check", criterion_5),
        ("GB deviance", criterion_6),
        ("Friedman oracle", criterion_7),
        ("studentized range numerics", criterion_8),
        ("Nemenyi fixture", criterion_9),
        ("end-to-end CV", criterion_10),
        ("stratification property", criterion_11),
        ("determinism and persistence", criterion_12),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let number = i + 1;
        if only.is_some_and(|n| n != number) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {number:>2} PASS  {name} ({took:.2}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {number:>2} FAIL  {name} ({took:.2}s): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
