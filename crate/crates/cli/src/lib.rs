//! Command-line front end: argument parsing, file formats on disk, and
//! JSON reports. `main` only maps [`run`]'s outcome to an exit code.

pub mod report;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use expander_forge::format::{self, GraphDocument, GraphHeader};
use expander_forge::spectra::{ramanujan_check, EigenMethod};
use expander_forge::tower::{
    build_level_with, build_tower, intersection_probe, select_twist, TowerConfig, TowerOptions, Variant,
};
use expander_forge::SerreGraph;
use report::{to_json, ProbeRunReport, SpectrumReport, TowerReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] expander_forge::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use expander_forge::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Verification(_) => 4,
            CliError::Core(e) => match e {
                E::InvalidParameter(_)
                | E::NoSquareRoot { .. }
                | E::InvalidWord(_)
                | E::InvalidGraph(_)
                | E::InvalidInput(_)
                | E::WordCapExceeded { .. } => 2,
                _ => 4,
            },
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Parser)]
#[command(name = "expander-forge", version, about = "Ramanujan Schreier graph towers from quaternion generators")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Include wall-clock timings in reports.
    #[arg(long, global = true)]
    pub timings: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Cartan,
    Borel,
    Cayley,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Cartan => Variant::Cartan,
            VariantArg::Borel => Variant::Borel,
            VariantArg::Cayley => Variant::Cayley,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Auto,
    Dense,
    Iterative,
}

impl From<MethodArg> for EigenMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => EigenMethod::Auto,
            MethodArg::Dense => EigenMethod::Dense,
            MethodArg::Iterative => EigenMethod::Iterative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Edgelist,
    Dot,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build one level and write its edge list.
    Build {
        #[arg(long)]
        q1: u64,
        #[arg(long)]
        q2: u64,
        #[arg(long)]
        level: u32,
        #[arg(long, value_enum, default_value = "cartan")]
        variant: VariantArg,
        #[arg(long)]
        twist_seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ramanujan check of a graph file (edge list or JSON).
    Spectrum {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build a tower, verify it, and write one consolidated report.
    Tower {
        #[arg(long)]
        q1: u64,
        #[arg(long)]
        q2: u64,
        #[arg(long)]
        levels: u32,
        #[arg(long, value_enum, default_value = "cartan")]
        variant: VariantArg,
        #[arg(long)]
        twist_seed: Option<u64>,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
        #[arg(long, default_value_t = 4)]
        probe_word_len: usize,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        export_dir: Option<PathBuf>,
    },
    /// Words of bounded length lying in every level's base stabilizer.
    Probe {
        #[arg(long)]
        q1: u64,
        #[arg(long)]
        q2: u64,
        #[arg(long)]
        level: u32,
        #[arg(long)]
        max_word_len: usize,
        #[arg(long)]
        twist_seed: Option<u64>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Convert a graph file to another format.
    Export {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        format: FormatArg,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Writes `bytes` to a temporary file beside `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

/// Reads an edge list or a JSON graph document.
pub fn read_graph(path: &Path) -> Result<(GraphHeader, SerreGraph), CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return Err(CliError::Usage(format!("{}: empty graph file", path.display())));
    }
    if trimmed.starts_with('{') {
        let doc: GraphDocument = serde_json::from_str(trimmed)
            .map_err(|e| CliError::Usage(format!("{}: invalid JSON graph: {e}", path.display())))?;
        let g = doc.to_graph()?;
        Ok((doc.header, g))
    } else {
        Ok(format::parse_edge_list(&text)?)
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs one command and returns what it prints on success.
pub fn run(cli: Cli) -> Result<String, CliError> {
    let timings = cli.timings;
    let command = cli.command;
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?
            .install(|| dispatch(command, timings)),
        None => dispatch(command, timings),
    }
}

fn dispatch(command: Command, timings: bool) -> Result<String, CliError> {
    match command {
        Command::Build { q1, q2, level, variant, twist_seed, out } => {
            cmd_build(q1, q2, level, variant.into(), twist_seed, &out)
        }
        Command::Spectrum { input, method, report } => cmd_spectrum(&input, method.into(), report.as_deref(), timings),
        Command::Tower { q1, q2, levels, variant, twist_seed, method, probe_word_len, report, export_dir } => {
            let cfg = TowerConfig::new(q1, q2, levels, variant.into(), twist_seed)?;
            let opts = TowerOptions { eig_method: method.into(), probe_word_len, ..TowerOptions::default() };
            cmd_tower(&cfg, &opts, &report, export_dir.as_deref(), timings)
        }
        Command::Probe { q1, q2, level, max_word_len, twist_seed, report } => {
            cmd_probe(q1, q2, level, max_word_len, twist_seed, report.as_deref())
        }
        Command::Export { input, format, out } => cmd_export(&input, format, out.as_deref()),
    }
}

pub fn cmd_build(
    q1: u64,
    q2: u64,
    level: u32,
    variant: Variant,
    twist_seed: Option<u64>,
    out: &Path,
) -> Result<String, CliError> {
    let cfg = TowerConfig::new(q1, q2, level, variant, twist_seed)?;
    let twist = twist_seed.map(|s| select_twist(&cfg, s)).transpose()?;
    let lvl = build_level_with(&cfg, level, twist.as_ref().map(|t| &t.sequence))?;
    let header = GraphHeader::for_level(&lvl);
    write_atomic(out, format::edge_list_string(&header, &lvl.graph).as_bytes())?;
    Ok(format!(
        "vertices={} directed_edges={} mode={}\n",
        lvl.vertex_count(),
        lvl.graph.edge_count(),
        lvl.mode
    ))
}

pub fn cmd_spectrum(input: &Path, method: EigenMethod, report: Option<&Path>, timings: bool) -> Result<String, CliError> {
    let (header, g) = read_graph(input)?;
    let degree = g
        .regular_degree()
        .ok_or_else(|| CliError::Usage(format!("{}: graph is not regular", input.display())))?;
    if degree < 2 {
        return Err(CliError::Usage(format!("{}: degree {degree} is too small", input.display())));
    }
    let q = degree as u64 - 1;
    let start = Instant::now();
    let s = ramanujan_check(&g, q, method)?;
    let elapsed = ms(start);
    let rep = SpectrumReport {
        schema: report::SCHEMA,
        command: "spectrum",
        input: header,
        vertices: g.vertex_count(),
        directed_edge_count: g.edge_count(),
        q,
        bipartite: s.bipartite,
        spectrum: (&s).into(),
        timings_ms: timings.then(|| BTreeMap::from([("spectrum".to_string(), elapsed)])),
    };
    let json = to_json(&rep);
    match report {
        Some(p) => {
            write_atomic(p, json.as_bytes())?;
            Ok(format!(
                "ramanujan={} max_abs_nontrivial={} bound={}\n",
                s.ramanujan, s.max_abs_nontrivial, s.ramanujan_bound
            ))
        }
        None => Ok(json),
    }
}

pub fn cmd_tower(
    cfg: &TowerConfig,
    opts: &TowerOptions,
    report: &Path,
    export_dir: Option<&Path>,
    timings: bool,
) -> Result<String, CliError> {
    let start = Instant::now();
    let tower = build_tower(cfg, opts)?;
    let elapsed = ms(start);
    for c in &tower.covering_summaries {
        if !c.verified || c.loop_preserved == Some(false) {
            return Err(CliError::Verification(format!(
                "covering {} → {} did not verify",
                c.source_level, c.target_level
            )));
        }
    }
    if let Some(dir) = export_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for lvl in &tower.levels {
            let path = dir.join(format!("level-{}.edgelist", lvl.n));
            let text = format::edge_list_string(&GraphHeader::for_level(lvl), &lvl.graph);
            write_atomic(&path, text.as_bytes())?;
        }
    }
    let rep = TowerReport::new(&tower, timings.then(|| BTreeMap::from([("tower".to_string(), elapsed)])));
    write_atomic(report, to_json(&rep).as_bytes())?;
    let mut out = String::new();
    for l in &rep.levels {
        out.push_str(&format!(
            "level {}: V={} girth={} ramanujan={} max_abs_nontrivial={}\n",
            l.n, l.vertices, l.girth, l.spectrum.ramanujan, l.spectrum.max_abs_nontrivial
        ));
    }
    out.push_str(&format!(
        "coverings verified: {}\nprobe survivors per level: {:?} (gamma survives: {})\n",
        rep.coverings.len(),
        rep.probe.survivors_per_level,
        rep.probe.gamma_survives
    ));
    Ok(out)
}

pub fn cmd_probe(
    q1: u64,
    q2: u64,
    level: u32,
    max_word_len: usize,
    twist_seed: Option<u64>,
    report: Option<&Path>,
) -> Result<String, CliError> {
    let cfg = TowerConfig::new(q1, q2, level, Variant::Cartan, twist_seed)?;
    let twist = twist_seed.map(|s| select_twist(&cfg, s)).transpose()?;
    let probe = intersection_probe(&cfg, max_word_len, level, twist.as_ref().map(|t| &t.sequence))?;
    let rep = ProbeRunReport {
        schema: report::SCHEMA,
        command: "probe",
        q1,
        q2,
        twist: twist.as_ref().map(|t| expander_forge::tower::TwistSummary {
            requested_seed: t.requested_seed,
            seed: t.sequence.seed,
            rejected_seeds: t.rejected_seeds.clone(),
        }),
        probe: (&probe).into(),
    };
    if let Some(p) = report {
        write_atomic(p, to_json(&rep).as_bytes())?;
    }
    let mut out = format!(
        "words examined: {}\nsurvivors per level: {:?}\ngamma survives: {}\n",
        probe.words_examined, probe.survivors_per_level, probe.gamma_survives
    );
    for s in &probe.survivors {
        let images: Vec<String> = s.matrices.iter().map(|m| m.to_string()).collect();
        out.push_str(&format!("{}  {}  {}\n", s.word, s.quaternion, images.join("  ")));
    }
    Ok(out)
}

pub fn cmd_export(input: &Path, format: FormatArg, out: Option<&Path>) -> Result<String, CliError> {
    let (header, g) = read_graph(input)?;
    let text = match format {
        FormatArg::Edgelist => format::edge_list_string(&header, &g),
        FormatArg::Dot => format::to_dot(&header, &g),
        FormatArg::Json => {
            let mut s = serde_json::to_string(&GraphDocument::new(header, &g)).expect("graphs serialize");
            s.push('\n');
            s
        }
    };
    match out {
        Some(p) => {
            write_atomic(p, text.as_bytes())?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}
