//! Flag parsing and the resolved run configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ipcdv_core::search::ReconMode;
use ipcdv_core::{DramConfig, GroupId, Layout, SearchConfig};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "ipcdv", version, about = "Displacement-vector search and DRAM layout model for wavelet-domain intra pattern copy")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the DV search; writes search.csv and summary.json.
    Search(RunArgs),
    /// Model the DRAM fetch cost of a full search sweep; writes membench.csv and membench.json.
    Membench(RunArgs),
    /// Write a cycle-by-cycle pipeline trace for one unit to trace.txt.
    Trace(TraceArgs),
    /// Write a synthetic fixture image.
    Testcard(TestcardArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// Binary PGM (P5) or PPM (P6) image, maxval 255.
    pub input: PathBuf,
    /// key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Memory method: 0, 1 or both.
    #[arg(long)]
    pub method: Option<String>,
    /// Horizontal search range min:max[:step], multiples of 32.
    #[arg(long, allow_hyphen_values = true)]
    pub dx_range: Option<String>,
    /// Vertical search range min:max[:step], multiples of 4, max <= 0.
    #[arg(long, allow_hyphen_values = true)]
    pub dy_range: Option<String>,
    #[arg(long)]
    pub burst_words: Option<u64>,
    /// Fixed cycles per DRAM command.
    #[arg(long)]
    pub cmd_overhead: Option<u64>,
    /// Reference reconstruction: passthrough or quantize:<shift>.
    #[arg(long)]
    pub recon: Option<String>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for the per-unit search.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct TraceArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Unit to trace, as group:unit.
    #[arg(long)]
    pub trace: Option<String>,
    /// Precinct of the traced unit; defaults to the last one.
    #[arg(long)]
    pub precinct: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct TestcardArgs {
    /// Output path (.pgm or .ppm).
    pub output: PathBuf,
    #[arg(long, default_value_t = 512)]
    pub width: usize,
    #[arg(long, default_value_t = 512)]
    pub height: usize,
    /// Write an RGB image instead of grayscale.
    #[arg(long)]
    pub rgb: bool,
    /// Seeded noise instead of the tiled card.
    #[arg(long)]
    pub noise: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub methods: Vec<Layout>,
    pub search: SearchConfig,
    pub dram: DramConfig,
    pub out_dir: PathBuf,
    pub threads: usize,
    pub trace: Option<(GroupId, usize)>,
    pub trace_precinct: Option<usize>,
}

const KEYS: [&str; 11] = [
    "method",
    "dx_range",
    "dy_range",
    "burst_words",
    "cmd_overhead",
    "cycles_per_word",
    "recon",
    "out",
    "threads",
    "dv_signal_bits",
    "trace",
];

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value", n + 1)))?;
        let k = k.trim().replace('-', "_");
        if !KEYS.contains(&k.as_str()) {
            return Err(CliError::Config(format!("config line {}: unknown key {k:?}", n + 1)));
        }
        map.insert(k, v.trim().to_string());
    }
    Ok(map)
}

/// `min:max[:step]`.
pub fn parse_range(s: &str, default_step: i32) -> Result<(i32, i32, i32), CliError> {
    let bad = || CliError::Config(format!("bad range {s:?}, expected min:max[:step]"));
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| p.trim().parse::<i32>().map_err(|_| bad());
    match parts.as_slice() {
        [a, b] => Ok((num(a)?, num(b)?, default_step)),
        [a, b, c] => Ok((num(a)?, num(b)?, num(c)?)),
        _ => Err(bad()),
    }
}

pub fn parse_methods(s: &str) -> Result<Vec<Layout>, CliError> {
    match s.trim() {
        "both" => Ok(Layout::BOTH.to_vec()),
        m => Ok(vec![m.parse().map_err(|_| CliError::Config(format!("unknown method {m:?}, expected 0, 1 or both")))?]),
    }
}

pub fn parse_recon(s: &str) -> Result<ReconMode, CliError> {
    let s = s.trim();
    if s == "passthrough" {
        return Ok(ReconMode::Passthrough);
    }
    s.strip_prefix("quantize:")
        .and_then(|v| v.parse().ok())
        .map(ReconMode::Quantize)
        .ok_or_else(|| CliError::Config(format!("bad recon {s:?}, expected passthrough or quantize:<shift>")))
}

pub fn parse_trace(s: &str) -> Result<(GroupId, usize), CliError> {
    let bad = || CliError::Config(format!("bad trace target {s:?}, expected group:unit"));
    let (g, u) = s.split_once(':').ok_or_else(bad)?;
    let g: usize = g.trim().parse().map_err(|_| bad())?;
    let u = u.trim().parse().map_err(|_| bad())?;
    Ok((GroupId::new(g).map_err(|e| CliError::Config(e.to_string()))?, u))
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("bad value {v:?} for {key}")))
}

fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config_text(&text)
}

impl RunConfig {
    /// Merges defaults, the config file and flags, then validates.
    pub fn resolve(args: &RunArgs) -> Result<Self, CliError> {
        let mut kv = match &args.config {
            Some(p) => read_config_file(p)?,
            None => BTreeMap::new(),
        };
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                kv.insert(k.to_string(), v);
            }
        };
        set("method", args.method.clone());
        set("dx_range", args.dx_range.clone());
        set("dy_range", args.dy_range.clone());
        set("burst_words", args.burst_words.map(|v| v.to_string()));
        set("cmd_overhead", args.cmd_overhead.map(|v| v.to_string()));
        set("recon", args.recon.clone());
        set("out", args.out.as_ref().map(|p| p.display().to_string()));
        set("threads", args.threads.map(|v| v.to_string()));

        let mut search = SearchConfig::default();
        let mut dram = DramConfig::default();
        let mut cfg = RunConfig {
            input: args.input.clone(),
            methods: Layout::BOTH.to_vec(),
            search,
            dram,
            out_dir: PathBuf::from("."),
            threads: 1,
            trace: None,
            trace_precinct: None,
        };
        for (k, v) in &kv {
            match k.as_str() {
                "method" => cfg.methods = parse_methods(v)?,
                "dx_range" => (search.dx_min, search.dx_max, search.dx_step) = parse_range(v, search.dx_step)?,
                "dy_range" => (search.dy_min, search.dy_max, search.dy_step) = parse_range(v, search.dy_step)?,
                "burst_words" => dram.burst_words = parse_num(k, v)?,
                "cmd_overhead" => dram.cmd_overhead_cycles = parse_num(k, v)?,
                "cycles_per_word" => dram.cycles_per_word = parse_num(k, v)?,
                "recon" => search.recon = parse_recon(v)?,
                "out" => cfg.out_dir = PathBuf::from(v),
                "threads" => cfg.threads = parse_num(k, v)?,
                "dv_signal_bits" => search.dv_signal_bits = parse_num(k, v)?,
                "trace" => cfg.trace = Some(parse_trace(v)?),
                _ => unreachable!("keys are checked on parse"),
            }
        }
        if cfg.threads == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        search.validate()?;
        dram.validate()?;
        cfg.search = search;
        cfg.dram = dram;
        Ok(cfg)
    }

    pub fn resolve_trace(args: &TraceArgs) -> Result<Self, CliError> {
        let mut cfg = Self::resolve(&args.run)?;
        if let Some(t) = &args.trace {
            cfg.trace = Some(parse_trace(t)?);
        }
        if cfg.trace.is_none() {
            return Err(CliError::Config("trace needs --trace group:unit".into()));
        }
        cfg.trace_precinct = args.precinct;
        Ok(cfg)
    }
}
