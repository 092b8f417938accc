//! Projects: a directory of source files checked together, with an on-disk
//! cache of checked files and a static HTML view.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::check::{with_builtin_lf, Diagnostic, World, BUILTIN_LF_FILE};
use crate::engine::{RuleSet, SolveResult};
use crate::index::{IndexEntry, RelationalIndex, TermIndex};
use crate::model::{hash_str, FileId, SlotId};
use crate::surface::{parse_document, Document};
use crate::termparse::ParseResult;

pub mod html;

pub const CONFIG_FILE: &str = "project.toml";
pub const CACHE_FORMAT: u32 = 1;
pub const CACHE_ENV: &str = "LOGON_CACHE";

#[derive(Debug, thiserror::Error)]
pub enum ProjectError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{CONFIG_FILE}: {0}")]
    Config(String),
    #[error("cache entry {path}: {message}")]
    Cache { path: PathBuf, message: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ProjectError + '_ {
    move |source| ProjectError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    source: Option<PathBuf>,
    cache: Option<PathBuf>,
    include: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProjectConfig {
    pub root: PathBuf,
    pub source: PathBuf,
    pub cache: PathBuf,
    pub include: Vec<String>,
}

impl ProjectConfig {
    /// Reads `project.toml` under `root` if present. Without one, sources
    /// live in `source/` or, failing that, in `root` itself.
    pub fn load(root: &Path) -> Result<Self, ProjectError> {
        let path = root.join(CONFIG_FILE);
        let file: ConfigFile = if path.exists() {
            let text = fs::read_to_string(&path).map_err(io(&path))?;
            toml::from_str(&text).map_err(|e| ProjectError::Config(e.message().to_string()))?
        } else {
            ConfigFile::default()
        };
        let source = match file.source {
            Some(s) => root.join(s),
            None if root.join("source").is_dir() => root.join("source"),
            None => root.to_path_buf(),
        };
        let cache = std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| root.join(file.cache.unwrap_or_else(|| ".cache".into())));
        let include = file.include.unwrap_or_else(|| vec!["**/*.mmt".into()]);
        for p in &include {
            glob::Pattern::new(p).map_err(|e| ProjectError::Config(format!("include `{p}`: {e}")))?;
        }
        let cfg = ProjectConfig {
            root: root.to_path_buf(),
            source,
            cache,
            include,
        };
        if !within(&cfg.root, &cfg.source) {
            return Err(ProjectError::Config("source directory lies outside the project".into()));
        }
        Ok(cfg)
    }

    /// Source files as (project-relative name, path), sorted by name.
    pub fn source_files(&self) -> Result<Vec<(String, PathBuf)>, ProjectError> {
        let patterns: Vec<glob::Pattern> = self.include.iter().filter_map(|p| glob::Pattern::new(p).ok()).collect();
        let mut out = Vec::new();
        let mut stack = vec![self.source.clone()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir).map_err(io(&dir))? {
                let entry = entry.map_err(io(&dir))?;
                let path = entry.path();
                if path == self.cache {
                    continue;
                }
                if path.is_dir() {
                    stack.push(path);
                    continue;
                }
                let rel = path.strip_prefix(&self.source).unwrap_or(&path);
                let name = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                if patterns.iter().any(|p| p.matches(&name)) {
                    out.push((name, path));
                }
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn html_dir(&self) -> PathBuf {
        self.cache.join("html")
    }
}

fn within(root: &Path, p: &Path) -> bool {
    let norm = |p: &Path| {
        p.components()
            .filter(|c| !matches!(c, std::path::Component::CurDir))
            .collect::<PathBuf>()
    };
    norm(p).starts_with(norm(root)) && !p.components().any(|c| matches!(c, std::path::Component::ParentDir))
}

/// Everything the build knows about one checked source file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub format: u32,
    pub file: String,
    /// sha256 of the file's text
    pub hash: String,
    /// combined hash of the entries of files this one includes from
    pub inputs: String,
    pub document: Document,
    pub parsed: Vec<(SlotId, ParseResult)>,
    pub results: Vec<(SlotId, SolveResult)>,
    pub diagnostics: Vec<Diagnostic>,
    pub relations: RelationalIndex,
    pub terms: Vec<IndexEntry>,
}

impl CacheEntry {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("cache entries serialize");
        v.push(b'\n');
        v
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self, ProjectError> {
        let e: CacheEntry = serde_json::from_slice(bytes).map_err(|e| ProjectError::Cache {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if e.format != CACHE_FORMAT {
            return Err(ProjectError::Cache {
                path: path.to_path_buf(),
                message: format!("format {} (expected {CACHE_FORMAT})", e.format),
            });
        }
        Ok(e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub files: Vec<ManifestFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub file: String,
    pub hash: String,
    pub inputs: String,
    pub entry: String,
}

/// Writes via a temporary file and a rename, so readers never see half a file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ProjectError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io(dir))?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io(&tmp))?;
    f.write_all(bytes).map_err(io(&tmp))?;
    f.sync_all().map_err(io(&tmp))?;
    fs::rename(&tmp, path).map_err(io(path))
}

fn entry_name(file: &str) -> String {
    format!("{}.json", file.replace('/', "__"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FileStatus {
    Built,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct FileReport {
    pub file: String,
    pub status: FileStatus,
    pub errors: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BuildReport {
    pub files: Vec<FileReport>,
    pub errors: usize,
    pub diagnostics: Vec<Diagnostic>,
    pub millis: u128,
}

impl BuildReport {
    pub fn built(&self) -> usize {
        self.files.iter().filter(|f| f.status == FileStatus::Built).count()
    }

    pub fn skipped(&self) -> usize {
        self.files.iter().filter(|f| f.status == FileStatus::Skipped).count()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BuildOptions {
    /// Ignore the cache.
    pub force: bool,
}

/// A built project.
pub struct Project {
    pub config: ProjectConfig,
    pub world: World,
    pub relations: RelationalIndex,
    pub terms: TermIndex,
    /// source file name → text
    pub sources: BTreeMap<String, String>,
}

/// Orders files so that a file comes after every file it includes from.
/// Returns the order and, per file, the files it includes from.
fn file_order(docs: &[(String, Document)]) -> (Vec<usize>, Vec<BTreeSet<usize>>) {
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, (_, d)) in docs.iter().enumerate() {
        for t in &d.theories {
            owner.entry(t.name.as_str()).or_insert(i);
        }
    }
    let deps: Vec<BTreeSet<usize>> = docs
        .iter()
        .enumerate()
        .map(|(i, (_, d))| {
            d.theories
                .iter()
                .flat_map(|t| t.includes.iter())
                .filter_map(|inc| owner.get(inc.theory.as_str()).copied())
                .filter(|&j| j != i)
                .collect()
        })
        .collect();
    let mut order = Vec::new();
    let mut state = vec![0u8; docs.len()];
    fn visit(i: usize, deps: &[BTreeSet<usize>], state: &mut [u8], order: &mut Vec<usize>) {
        if state[i] != 0 {
            // cycles are reported by the structure check
            return;
        }
        state[i] = 1;
        for &j in &deps[i] {
            visit(j, deps, state, order);
        }
        state[i] = 2;
        order.push(i);
    }
    for i in 0..docs.len() {
        visit(i, &deps, &mut state, &mut order);
    }
    (order, deps)
}

/// Checks every source file, reusing cache entries of unchanged files, and
/// writes cache entries, the manifest and merged indexes.
pub fn build_project(config: &ProjectConfig, rules: &RuleSet, opts: BuildOptions) -> Result<(BuildReport, Project), ProjectError> {
    let start = Instant::now();
    let files = config.source_files()?;
    let mut sources = BTreeMap::new();
    let mut docs: Vec<(String, Document)> = Vec::new();
    for (name, path) in &files {
        let text = fs::read_to_string(path).map_err(io(path))?;
        docs.push((name.clone(), parse_document(&text, FileId::new(name))));
        sources.insert(name.clone(), text);
    }
    let (order, deps) = file_order(&docs);

    // which files can be taken from the cache
    let mut keys: Vec<(String, String)> = vec![Default::default(); docs.len()];
    let mut cached: BTreeMap<usize, CacheEntry> = BTreeMap::new();
    for &i in &order {
        let name = &docs[i].0;
        let hash = hash_str(&sources[name]);
        let inputs = hash_str(&deps[i].iter().map(|&j| format!("{}:{};", keys[j].0, keys[j].1)).collect::<String>());
        keys[i] = (hash.clone(), inputs.clone());
        if opts.force || deps[i].iter().any(|j| !cached.contains_key(j)) {
            continue;
        }
        let path = config.cache.join(entry_name(name));
        if let Ok(bytes) = fs::read(&path) {
            if let Ok(e) = CacheEntry::from_bytes(&bytes, &path) {
                if e.hash == hash && e.inputs == inputs && e.file == *name {
                    cached.insert(i, e);
                }
            }
        }
    }

    let mut known_parses = BTreeMap::new();
    let mut known_results = BTreeMap::new();
    for (&i, e) in &cached {
        docs[i].1 = e.document.clone();
        known_parses.extend(e.parsed.iter().cloned());
        known_results.extend(e.results.iter().cloned());
    }
    let all_docs = with_builtin_lf(docs.iter().map(|(_, d)| d.clone()).collect());
    let world = World::check_with(all_docs, rules, known_parses, known_results);

    let relations = RelationalIndex::build(&world);
    let terms = TermIndex::build(&world);
    let diagnostics = world.diagnostics();
    let mut reports = Vec::new();
    let mut manifest = Manifest {
        format: CACHE_FORMAT,
        files: Vec::new(),
    };
    for &i in &order {
        let name = &docs[i].0;
        let fid = FileId::new(name);
        let entry = match cached.remove(&i) {
            Some(e) => {
                reports.push(FileReport {
                    file: name.clone(),
                    status: FileStatus::Skipped,
                    errors: e.diagnostics.len(),
                });
                e
            }
            None => {
                let e = entry_for(&world, &relations, &terms, &diagnostics, name, &fid, &keys[i]);
                write_atomic(&config.cache.join(entry_name(name)), &e.to_bytes())?;
                reports.push(FileReport {
                    file: name.clone(),
                    status: FileStatus::Built,
                    errors: e.diagnostics.len(),
                });
                e
            }
        };
        manifest.files.push(ManifestFile {
            file: name.clone(),
            hash: entry.hash,
            inputs: entry.inputs,
            entry: entry_name(name),
        });
    }
    write_atomic(&config.cache.join("manifest.json"), &pretty(&manifest))?;
    write_atomic(&config.cache.join("relations.json"), &pretty(&relations))?;
    write_atomic(&config.cache.join("terms.json"), &pretty(&terms))?;

    let errors = diagnostics.iter().filter(|d| d.severity == crate::check::Severity::Error).count();
    let report = BuildReport {
        files: reports,
        errors,
        diagnostics,
        millis: start.elapsed().as_millis(),
    };
    let project = Project {
        config: config.clone(),
        world,
        relations,
        terms,
        sources,
    };
    Ok((report, project))
}

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("serializable");
    b.push(b'\n');
    b
}

fn diag_file(d: &Diagnostic) -> Option<&FileId> {
    d.src.as_ref().map(|r| &r.file)
}

fn entry_for(
    w: &World,
    relations: &RelationalIndex,
    terms: &TermIndex,
    diagnostics: &[Diagnostic],
    name: &str,
    fid: &FileId,
    key: &(String, String),
) -> CacheEntry {
    let document = w.docs.iter().find(|d| d.file == *fid).cloned().unwrap_or(Document {
        file: fid.clone(),
        theories: Vec::new(),
        errors: Vec::new(),
    });
    let mine: BTreeSet<SlotId> = document.units().map(|u| u.slot.clone()).collect();
    let theories: BTreeSet<&str> = document.theories.iter().map(|t| t.name.as_str()).collect();
    let in_file = |n: &str| {
        let th = n.split(['?', '^']).next().unwrap_or(n);
        theories.contains(th)
    };
    let mut shard = RelationalIndex::default();
    for (rel, pairs) in &relations.tuples {
        let mine: BTreeSet<(String, String)> = pairs.iter().filter(|(a, _)| in_file(a)).cloned().collect();
        if !mine.is_empty() {
            shard.tuples.insert(*rel, mine);
        }
    }
    CacheEntry {
        format: CACHE_FORMAT,
        file: name.to_string(),
        hash: key.0.clone(),
        inputs: key.1.clone(),
        parsed: w
            .parsed
            .iter()
            .filter(|(k, _)| mine.contains(*k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect(),
        results: w
            .results
            .iter()
            .filter(|(k, _)| mine.contains(*k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect(),
        diagnostics: diagnostics.iter().filter(|d| diag_file(d) == Some(fid)).cloned().collect(),
        relations: shard,
        terms: terms.entries.iter().filter(|e| mine.contains(&e.slot)).cloned().collect(),
        document,
    }
}

/// Whether a diagnostic comes from the shipped LF theory rather than a
/// project file.
pub fn is_builtin(d: &Diagnostic) -> bool {
    diag_file(d).is_some_and(|f| f.as_str() == BUILTIN_LF_FILE)
}

#[cfg(test)]
mod tests;
