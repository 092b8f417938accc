use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use logon_core::check::{Diagnostic, Severity, World};
use logon_core::ide;
use logon_core::lf::lf_rules;
use logon_core::model::LineIndex;
use logon_core::project::{build_project, html, is_builtin, BuildOptions, ProjectConfig};
use logon_server::transport::{serve_http, serve_stdio};
use logon_server::Session;

#[derive(Parser)]
#[command(name = "logon", version, about = "Check, search and serve logon projects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a project, refresh its cache and write its HTML pages.
    Build {
        #[arg(default_value = ".")]
        dir: PathBuf,
        /// Recheck every file even if its cache entry is current.
        #[arg(long)]
        force: bool,
        /// Print the build report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Check some files together, without a project or cache.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Search the terms of a project for a pattern such as `$x,$y: x ∧ y`.
    Search {
        dir: PathBuf,
        query: String,
        /// Theory whose notations parse the query.
        #[arg(long)]
        theory: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Answer protocol requests, over HTTP or as lines on stdin/stdout.
    Serve {
        #[arg(default_value = ".")]
        dir: PathBuf,
        #[arg(long, default_value_t = 7341)]
        port: u16,
        #[arg(long)]
        stdio: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Build { dir, force, json } => build(&dir, force, json),
        Command::Check { files, json } => check(&files, json),
        Command::Search { dir, query, theory, json } => search(&dir, &query, theory.as_deref(), json),
        Command::Serve { dir, port, stdio } => serve(&dir, port, stdio),
    }
}

fn failed(errors: usize) -> ExitCode {
    if errors == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

/// `file:line:col: error[phase]: message`, lines and columns from 1.
fn human(d: &Diagnostic, sources: &BTreeMap<String, String>) -> String {
    let sev = match d.severity {
        Severity::Error => "error",
        Severity::Warning => "warning",
        Severity::Info => "info",
    };
    let at = match &d.src {
        Some(r) => match sources.get(r.file.as_str()) {
            Some(text) => {
                let lc = LineIndex::new(text).line_col(text, r.start);
                format!("{}:{}:{}", r.file, lc.line + 1, lc.column + 1)
            }
            None => r.file.to_string(),
        },
        None => "<project>".into(),
    };
    let mut s = format!("{at}: {sev}[{}]: {}", d.phase, d.message);
    for l in &d.log {
        s.push_str("\n    ");
        s.push_str(l);
    }
    s
}

fn build(dir: &Path, force: bool, json: bool) -> Result<ExitCode> {
    let config = ProjectConfig::load(dir)?;
    let (report, project) = build_project(&config, &lf_rules(), BuildOptions { force })?;
    let pages = html::write_site(&project, &config.html_dir())?;
    log::info!("wrote {} pages to {}", pages.len(), config.html_dir().display());
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        for d in &report.diagnostics {
            println!("{}", human(d, &project.sources));
        }
        println!(
            "{} files ({} built, {} cached), {} errors in {} ms",
            report.files.len(),
            report.built(),
            report.skipped(),
            report.errors,
            report.millis
        );
    }
    Ok(failed(report.errors))
}

fn check(files: &[PathBuf], json: bool) -> Result<ExitCode> {
    let mut sources = BTreeMap::new();
    for f in files {
        let text = std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        sources.insert(f.display().to_string(), text);
    }
    let w = World::from_sources(sources.iter().map(|(n, t)| (n.as_str(), t.as_str())));
    let diags: Vec<Diagnostic> = w.diagnostics().into_iter().filter(|d| !is_builtin(d)).collect();
    let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
    if json {
        println!("{}", serde_json::to_string_pretty(&diags)?);
    } else {
        for d in &diags {
            println!("{}", human(d, &sources));
        }
        println!("{errors} errors");
    }
    Ok(failed(errors))
}

fn search(dir: &Path, query: &str, theory: Option<&str>, json: bool) -> Result<ExitCode> {
    let config = ProjectConfig::load(dir)?;
    let (_, project) = build_project(&config, &lf_rules(), BuildOptions::default())?;
    let q = match ide::parse_query(&project.world, query, theory) {
        Ok(q) => q,
        Err(e) => bail!("cannot parse query: {e}"),
    };
    let hits = project.terms.search(&q);
    if json {
        println!("{}", serde_json::to_string_pretty(&hits)?);
        return Ok(ExitCode::SUCCESS);
    }
    for h in &hits {
        let at = match &h.src {
            Some(r) => {
                let text = project.sources.get(r.file.as_str()).map_or("", String::as_str);
                let lc = LineIndex::new(text).line_col(text, r.start);
                format!("{}:{}:{}", r.file, lc.line + 1, lc.column + 1)
            }
            None => "-".into(),
        };
        let table = project.world.table(h.slot.constant.theory());
        let subst: Vec<String> = h
            .substitution
            .iter()
            .map(|(k, v)| match table {
                Some(t) => format!("{k} := {}", logon_core::render::render(v, t, Default::default())),
                None => format!("{k} := {v:?}"),
            })
            .collect();
        let mark = if h.inferred { " (inferred)" } else { "" };
        println!("{at}: {}{mark} {}", h.slot, subst.join(", "));
    }
    println!("{} hits", hits.len());
    Ok(ExitCode::SUCCESS)
}

fn serve(dir: &Path, port: u16, stdio: bool) -> Result<ExitCode> {
    let config = ProjectConfig::load(dir)?;
    let (mut session, report) = Session::for_project(&config, lf_rules())?;
    log::info!("loaded {} files, {} errors", report.files.len(), report.errors);
    if stdio {
        let stdin = std::io::stdin();
        serve_stdio(&mut session, stdin.lock(), std::io::stdout().lock())?;
    } else {
        let addr = format!("127.0.0.1:{port}");
        eprintln!("listening on http://{addr}");
        serve_http(session, &addr)?;
    }
    Ok(ExitCode::SUCCESS)
}
