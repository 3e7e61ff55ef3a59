//! Deterministic generator for labeled synthetic cluster dumps.
//!
//! Each bundle is a directory tree shaped like a Kubernetes log collection:
//!
//! ```text
//! dump-0007/logs/pods/<svc>/containers/<svc>.log
//! dump-0007/logs/pods/<svc>/describe/<svc>.txt
//! dump-0007/logs/nodes/<node>/kubelet.log        (decoy)
//! dump-0007/logs/events/events.log               (decoy)
//! ```
//!
//! Container logs interleave noise lines (timestamps, IPv4 peers, 12-hex
//! pod suffixes, generic words) with class-signature lines drawn from
//! [`signature_tokens`]. Decoy files carry noise plus signature lines of a
//! *different* class, so a selector that reads them is actively misled.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::class::FailureClass;
use crate::error::{Result, TriageError};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const CORPUS_SPEC_FILE: &str = "corpus.json";

/// Signature vocabulary per class. The five lists are mutually disjoint and
/// disjoint from [`NOISE_WORDS`]; every token survives cleaning unchanged.
pub fn signature_tokens(class: FailureClass) -> &'static [&'static str] {
    match class {
        FailureClass::Artifactory => &[
            "imagepullbackoff",
            "errimagepull",
            "artifactory",
            "unauthorized",
            "manifest_unknown",
            "pull_access_denied",
            "registry_timeout",
            "authentication_required",
            "repository_not_found",
        ],
        FailureClass::CicdTest => &[
            "assertionerror",
            "testcase_failed",
            "expected_but_got",
            "junit",
            "timeout_exceeded",
            "test_suite_aborted",
            "flaky_retry",
            "surefire",
            "pytest_failure",
        ],
        FailureClass::Cluster => &[
            "nodenotready",
            "memorypressure",
            "diskpressure",
            "pidpressure",
            "kubelet_unhealthy",
            "node_evicted",
            "taint_unreachable",
            "etcdserver_timeout",
            "apiserver_unavailable",
        ],
        FailureClass::Environment => &[
            "nxdomain",
            "dns_resolution_failed",
            "mountvolume_setup_failed",
            "persistentvolumeclaim_pending",
            "storageclass_missing",
            "nfs_mount_timeout",
            "configmap_not_found",
            "coredns_servfail",
        ],
        FailureClass::Microservice => &[
            "oomkilled",
            "crashloopbackoff",
            "nullpointerexception",
            "segmentation_fault",
            "exit_code_137",
            "panic_goroutine",
            "requesthandlerclass",
            "liveness_probe_failed",
            "stacktrace_unhandled",
        ],
    }
}

pub const NOISE_WORDS: &[&str] = &[
    "info", "debug", "request", "completed", "reconcile", "controller", "started", "handler",
    "processing", "received", "sending", "response", "status", "connection", "established",
    "cache", "sync", "watch", "event", "update", "pod", "container", "service", "endpoint",
    "deployment", "replica", "configured", "loaded", "metrics", "scrape", "heartbeat", "lease",
    "renewed", "leader", "election", "queue", "worker", "batch", "job", "scheduled", "duration",
    "latency", "bytes", "written", "read", "flush", "checkpoint", "snapshot", "compaction",
    "grpc", "http", "get", "post", "put", "path", "api", "v1", "health", "ready", "listening",
    "port", "client", "server", "session", "token", "refresh", "config", "reload", "version",
    "build", "commit", "branch", "pipeline", "stage", "step", "runner", "artifact", "upload",
    "download", "chunk", "offset", "partition", "topic", "consumer", "producer", "message",
    "ack", "retry", "backoff", "attempt", "success", "user", "tenant", "namespace", "label",
    "selector", "annotation", "volume", "secret", "mounted", "probe", "readiness", "startup",
    "init", "sidecar", "proxy", "route", "upstream", "downstream", "cluster_ip", "dns", "lookup",
    "resolved", "certificate", "valid", "expiry", "rotate", "signal", "shutdown", "graceful",
    "drain", "resume", "pause", "throttle", "quota", "limit", "usage", "cpu", "memory", "disk",
    "gc", "heap", "alloc", "thread", "pool", "executor", "task", "future", "promise", "callback",
    "timer", "tick", "interval", "window", "aggregate", "rollup", "index", "shard", "replica_set",
    "primary", "secondary", "vote", "term", "log_entry", "apply", "commit_index", "state",
    "transition", "running", "pending", "succeeded", "ok", "accepted", "created", "deleted",
];

const SERVICE_NAMES: &[&str] = &[
    "payments", "checkout", "inventory", "gateway", "catalog", "billing", "notifier", "search",
    "scheduler", "ledger", "profile", "shipping",
];

const LEVELS: &[&str] = &["INFO", "INFO", "INFO", "DEBUG", "WARN"];

/// Inclusive range of noise lines per generated file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineRange {
    pub min: usize,
    pub max: usize,
}

impl LineRange {
    pub fn fixed(n: usize) -> Self {
        LineRange { min: n, max: n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub bundles_per_class: usize,
    pub services: usize,
    pub noise_lines_per_file: LineRange,
    /// Signature lines per container log, as a fraction of its noise lines.
    pub signature_strength: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            bundles_per_class: 40,
            services: 3,
            noise_lines_per_file: LineRange { min: 30, max: 50 },
            signature_strength: 0.5,
            seed: 0,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bundles_per_class == 0 {
            return Err(TriageError::InvalidSpec("bundles_per_class must be >= 1".into()));
        }
        if self.services == 0 {
            return Err(TriageError::InvalidSpec("services must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.signature_strength) {
            return Err(TriageError::InvalidSpec(format!(
                "signature_strength {} outside [0, 1]",
                self.signature_strength
            )));
        }
        if self.noise_lines_per_file.min > self.noise_lines_per_file.max {
            return Err(TriageError::InvalidSpec(format!(
                "noise line range {}..={} is empty",
                self.noise_lines_per_file.min, self.noise_lines_per_file.max
            )));
        }
        Ok(())
    }

    /// Signature lines written alongside `noise` noise lines in one container log.
    pub fn signature_lines_for(&self, noise: usize) -> usize {
        (self.signature_strength * noise as f64).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileRole {
    /// Under `pods/<svc>/containers` or `pods/<svc>/describe`.
    Selected,
    Decoy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedFile {
    /// Relative to the bundle directory, `/`-separated.
    pub path: String,
    pub role: FileRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub label: FailureClass,
    /// Only populated by [`generate_corpus`]; not part of the manifest file.
    #[serde(skip)]
    pub files: Vec<GeneratedFile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
    pub seed: u64,
    pub spec: Option<CorpusSpec>,
}

impl CorpusManifest {
    pub fn labels(&self) -> Vec<FailureClass> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry)?);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| TriageError::io(path, e))
    }
}

/// Reads a `manifest.jsonl` file. Blank lines are ignored.
pub fn read_manifest(path: &Path) -> Result<CorpusManifest> {
    let file = fs::File::open(path).map_err(|e| TriageError::io(path, e))?;
    let mut entries = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| TriageError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(&line).map_err(|e| {
            TriageError::Parse(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        entries.push(entry);
    }
    let spec_path = path.with_file_name(CORPUS_SPEC_FILE);
    let spec: Option<CorpusSpec> = match fs::read_to_string(&spec_path) {
        Ok(text) => Some(serde_json::from_str(&text)?),
        Err(_) => None,
    };
    Ok(CorpusManifest {
        entries,
        seed: spec.as_ref().map_or(0, |s| s.seed),
        spec,
    })
}

/// Writes one bundle per (class, index) under `out_dir` plus `manifest.jsonl`
/// and `corpus.json`. `out_dir` must be missing or empty.
pub fn generate_corpus(spec: &CorpusSpec, out_dir: &Path) -> Result<CorpusManifest> {
    spec.validate()?;
    prepare_out_dir(out_dir)?;

    let jobs: Vec<(usize, FailureClass)> = FailureClass::ALL
        .iter()
        .flat_map(|&class| std::iter::repeat_n(class, spec.bundles_per_class))
        .enumerate()
        .collect();

    let entries = jobs
        .par_iter()
        .map(|&(index, label)| {
            let rel = format!("dump-{index:04}");
            let files = render_bundle(spec, index, label);
            let bundle_dir = out_dir.join(&rel);
            let mut generated = Vec::with_capacity(files.len());
            for (path, role, content) in files {
                let full = bundle_dir.join(&path);
                if let Some(parent) = full.parent() {
                    fs::create_dir_all(parent).map_err(|e| TriageError::io(parent, e))?;
                }
                fs::write(&full, content).map_err(|e| TriageError::io(&full, e))?;
                generated.push(GeneratedFile { path, role });
            }
            generated.sort_by(|a, b| a.path.cmp(&b.path));
            Ok(ManifestEntry { path: rel, label, files: generated })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = CorpusManifest { entries, seed: spec.seed, spec: Some(spec.clone()) };
    manifest.write_jsonl(&out_dir.join(MANIFEST_FILE))?;
    let spec_path = out_dir.join(CORPUS_SPEC_FILE);
    let mut spec_json = serde_json::to_string_pretty(spec)?;
    spec_json.push('\n');
    fs::write(&spec_path, spec_json).map_err(|e| TriageError::io(&spec_path, e))?;
    Ok(manifest)
}

fn prepare_out_dir(out_dir: &Path) -> Result<()> {
    match fs::read_dir(out_dir) {
        Ok(mut it) => {
            if it.next().is_some() {
                return Err(TriageError::OutputNotEmpty(out_dir.to_path_buf()));
            }
            Ok(())
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            fs::create_dir_all(out_dir).map_err(|e| TriageError::io(out_dir, e))
        }
        Err(e) => Err(TriageError::io(out_dir, e)),
    }
}

/// Per-line randomness shared by every file of one bundle.
struct LineWriter {
    rng: ChaCha8Rng,
    /// Seconds since 2023-01-01T00:00:00, advanced monotonically.
    clock: u64,
    micros: u32,
}

impl LineWriter {
    fn tick(&mut self) {
        self.clock += self.rng.gen_range(0..4);
        self.micros = self.rng.gen_range(0..1_000_000);
    }

    fn civil(&self) -> (u64, u64, u64, u64, u64, u64) {
        // 2023 is not a leap year; dumps span minutes, so a fixed calendar suffices.
        const DAYS: [u64; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
        let mut day = self.clock / 86_400 % 365;
        let secs = self.clock % 86_400;
        let mut month = 0;
        while day >= DAYS[month] {
            day -= DAYS[month];
            month += 1;
        }
        (2023, month as u64 + 1, day + 1, secs / 3600, secs / 60 % 60, secs % 60)
    }

    fn iso_timestamp(&mut self) -> String {
        self.tick();
        let (y, mo, d, h, mi, s) = self.civil();
        match self.rng.gen_range(0..4) {
            0 => format!("{y}-{mo:02}-{d:02}T{h:02}:{mi:02}:{s:02}Z"),
            1 => format!("{y}-{mo:02}-{d:02}T{h:02}:{mi:02}:{s:02}.{:06}Z", self.micros),
            2 => format!("{y}-{mo:02}-{d:02}T{h:02}:{mi:02}:{s:02}.{:03}+00:00", self.micros / 1000),
            _ => format!("{y}-{mo:02}-{d:02} {h:02}:{mi:02}:{s:02}"),
        }
    }

    fn klog_prefix(&mut self, level: char) -> String {
        self.tick();
        let (_, mo, d, h, mi, s) = self.civil();
        format!("{level}{mo:02}{d:02} {h:02}:{mi:02}:{s:02}.{:06}", self.micros)
    }

    fn ipv4(&mut self) -> String {
        let r = &mut self.rng;
        format!("10.{}.{}.{}", r.gen_range(0..256), r.gen_range(0..256), r.gen_range(1..255))
    }

    fn hex(&mut self, len: usize) -> String {
        (0..len)
            .map(|_| char::from_digit(self.rng.gen_range(0..16), 16).unwrap())
            .collect()
    }

    fn words(&mut self, n: usize) -> String {
        let picks: Vec<&str> = (0..n).map(|_| *NOISE_WORDS.choose(&mut self.rng).unwrap()).collect();
        picks.join(" ")
    }

    fn noise_line(&mut self, svc: &str) -> String {
        let n = self.rng.gen_range(3..7);
        let words = self.words(n);
        if self.rng.gen_bool(0.25) {
            let prefix = self.klog_prefix('I');
            let line = self.rng.gen_range(20..900);
            let file = NOISE_WORDS.choose(&mut self.rng).unwrap();
            let ip = self.ipv4();
            format!("{prefix}       1 {file}.go:{line}] {words} addr={ip}")
        } else {
            let ts = self.iso_timestamp();
            let level = LEVELS.choose(&mut self.rng).unwrap();
            let ip = self.ipv4();
            let port = self.rng.gen_range(1024..65535);
            let trace = self.hex(12);
            format!("{ts} {level} [{svc}] {words} peer={ip}:{port} trace={trace}")
        }
    }

    fn signature_line(&mut self, svc: &str, class: FailureClass) -> String {
        let tokens = signature_tokens(class);
        let first = tokens.choose(&mut self.rng).unwrap();
        let second = tokens.choose(&mut self.rng).unwrap();
        let ts = self.iso_timestamp();
        let filler = self.words(2);
        let suffix = self.hex(12);
        let ip = self.ipv4();
        let level = if self.rng.gen_bool(0.7) { "ERROR" } else { "WARN" };
        format!("{ts} {level} [{svc}] {first}: {filler} ({second}) pod={svc}-{suffix} from {ip}")
    }

    /// Shuffles `signature` signature lines among `noise` noise lines.
    fn mixed_lines(
        &mut self,
        svc: &str,
        noise: usize,
        signature: usize,
        class: FailureClass,
    ) -> String {
        let mut kinds: Vec<bool> = std::iter::repeat_n(true, signature)
            .chain(std::iter::repeat_n(false, noise))
            .collect();
        kinds.shuffle(&mut self.rng);
        let mut out = String::new();
        for is_signature in kinds {
            let line = if is_signature {
                self.signature_line(svc, class)
            } else {
                self.noise_line(svc)
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    fn describe(&mut self, svc: &str, noise: usize) -> String {
        let mut out = String::new();
        let suffix = self.hex(12);
        let node_ip = self.ipv4();
        let pod_ip = self.ipv4();
        let started = self.iso_timestamp();
        let container_id = self.hex(64);
        let node = self.rng.gen_range(1..9);
        let minor = self.rng.gen_range(0..20);
        let _ = writeln!(out, "Name:         {svc}-{suffix}");
        let _ = writeln!(out, "Namespace:    default");
        let _ = writeln!(out, "Node:         worker-{node}/{node_ip}");
        let _ = writeln!(out, "Start Time:   {started}");
        let _ = writeln!(out, "Labels:       app={svc}");
        let _ = writeln!(out, "Status:       Running");
        let _ = writeln!(out, "IP:           {pod_ip}");
        let _ = writeln!(out, "Containers:");
        let _ = writeln!(out, "  {svc}:");
        let _ = writeln!(out, "    Container ID:   containerd://{container_id}");
        let _ = writeln!(out, "    Image:          registry.local/{svc}:1.{minor}.0");
        let _ = writeln!(out, "Events:");
        for _ in 0..noise {
            let ts = self.iso_timestamp();
            let n = self.rng.gen_range(2..5);
            let words = self.words(n);
            let _ = writeln!(out, "  Normal  {words}  {ts}  kubelet");
        }
        out
    }
}

fn pick_services(rng: &mut ChaCha8Rng, count: usize) -> Vec<String> {
    let mut names: Vec<String> = SERVICE_NAMES.iter().map(|s| s.to_string()).collect();
    names.shuffle(rng);
    let mut round = 2;
    while names.len() < count {
        names.extend(SERVICE_NAMES.iter().map(|s| format!("{s}{round}")));
        round += 1;
    }
    names.truncate(count);
    names.sort();
    names
}

/// Renders one bundle's files in memory as (relative path, role, content).
fn render_bundle(
    spec: &CorpusSpec,
    index: usize,
    label: FailureClass,
) -> Vec<(String, FileRole, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ index as u64);
    let clock = rng.gen_range(0..300 * 86_400);
    let services = pick_services(&mut rng, spec.services);
    let mut w = LineWriter { rng, clock, micros: 0 };
    let range = spec.noise_lines_per_file;
    let mut files = Vec::new();

    for svc in &services {
        let noise = w.rng.gen_range(range.min..=range.max);
        let signature = spec.signature_lines_for(noise);
        let log = w.mixed_lines(svc, noise, signature, label);
        files.push((format!("logs/pods/{svc}/containers/{svc}.log"), FileRole::Selected, log));

        let noise = w.rng.gen_range(range.min..=range.max);
        let describe = w.describe(svc, noise);
        files.push((format!("logs/pods/{svc}/describe/{svc}.txt"), FileRole::Selected, describe));
    }

    let others: Vec<FailureClass> =
        FailureClass::ALL.iter().copied().filter(|&c| c != label).collect();
    let decoy_class = *others.choose(&mut w.rng).unwrap();
    let nodes = w.rng.gen_range(1..4);
    for node in 1..=nodes {
        let noise = w.rng.gen_range(range.min..=range.max);
        let signature = spec.signature_lines_for(noise) / 2;
        let log = w.mixed_lines("kubelet", noise, signature, decoy_class);
        files.push((format!("logs/nodes/worker-{node}/kubelet.log"), FileRole::Decoy, log));
    }
    let noise = w.rng.gen_range(range.min..=range.max);
    let signature = spec.signature_lines_for(noise) / 2;
    let events = w.mixed_lines("events", noise, signature, decoy_class);
    files.push(("logs/events/events.log".to_string(), FileRole::Decoy, events));
    files
}

/// Absolute bundle directories for every manifest entry.
pub fn bundle_dirs(root: &Path, manifest: &CorpusManifest) -> Vec<PathBuf> {
    manifest.entries.iter().map(|e| root.join(&e.path)).collect()
}
