//! Subcommand bodies. Each one reads the input, runs the model and writes
//! its reports into the output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ipcdv_core::memory::{build_tlb, cmd_generate, sweep_stats, Bank, DramImage, UnitRef};
use ipcdv_core::pipeline::{run_pipeline, TRACE_HEADER};
use ipcdv_core::pnm::PnmImage;
use ipcdv_core::search::{search_image, sweep_fetches, unit_candidates, Frame, ImageReport, ReconHistory, SearchSummary};
use ipcdv_core::testcard::{noise_image, screen_card, screen_card_rgb};
use ipcdv_core::{DisplacementVector, DramConfig, GroupId, Layout, Mode, SearchConfig, TransferStats};
use serde::Serialize;

use crate::config::{RunConfig, TestcardArgs};
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const SEARCH_CSV: &str = "search.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const MEMBENCH_CSV: &str = "membench.csv";
pub const MEMBENCH_JSON: &str = "membench.json";
pub const TRACE_TXT: &str = "trace.txt";

#[derive(Debug, Clone)]
pub struct Ingested {
    pub image: PnmImage,
    pub frame: Frame,
}

impl Ingested {
    pub fn format(&self) -> &'static str {
        if self.image.channels == 1 {
            "PGM"
        } else {
            "PPM"
        }
    }
}

pub fn ingest_image(path: &Path) -> Result<Ingested, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let input_err = |source| CliError::Input {
        path: path.to_path_buf(),
        source,
    };
    let image = PnmImage::parse(&bytes).map_err(input_err)?;
    let frame = Frame::from_planes(&image.to_planes(), image.width, image.height).map_err(input_err)?;
    Ok(Ingested { image, frame })
}

fn write_out(dir: &Path, name: &str, body: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Config(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct ImageInfo {
    pub input: String,
    pub format: &'static str,
    pub width: usize,
    pub height: usize,
    pub components: usize,
    pub precincts: usize,
    pub units_per_precinct: usize,
}

impl ImageInfo {
    fn new(cfg: &RunConfig, ing: &Ingested) -> Self {
        let f = &ing.frame;
        ImageInfo {
            input: file_label(&cfg.input),
            format: ing.format(),
            width: f.width,
            height: f.height,
            components: f.components,
            precincts: f.precincts.len(),
            units_per_precinct: if f.precincts.is_empty() { 0 } else { f.units() },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupSummary {
    pub group: GroupId,
    pub decisions: u64,
    pub ipc_decisions: u64,
    pub ipc_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchJson {
    pub schema: u32,
    pub image: ImageInfo,
    pub config: SearchConfig,
    #[serde(flatten)]
    pub totals: SearchSummary,
    /// Bits spent on IPC-coded units, DV signalling included.
    pub ipc_mode_bits: u64,
    /// Bits spent on ORIG-coded units.
    pub orig_mode_bits: u64,
    pub groups: Vec<GroupSummary>,
}

#[derive(Debug)]
pub struct SearchOutcome {
    pub report: ImageReport,
    pub summary: SearchJson,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
}

pub fn cmd_search(cfg: &RunConfig) -> Result<SearchOutcome, CliError> {
    let ing = ingest_image(&cfg.input)?;
    let report = search_image(&ing.frame, &cfg.search, cfg.threads)?;
    let dv_bits = cfg.search.dv_signal_bits;
    let mode_bits = |m: Mode| {
        report
            .decisions()
            .filter(|d| d.mode == m)
            .map(|d| d.selected_bits(dv_bits))
            .sum()
    };
    let groups = GroupId::ALL
        .iter()
        .map(|&g| {
            let decisions = report.decisions().filter(|d| d.group == g).count() as u64;
            let ipc_decisions = report
                .decisions()
                .filter(|d| d.group == g && d.mode == Mode::Ipc)
                .count() as u64;
            GroupSummary {
                group: g,
                decisions,
                ipc_decisions,
                ipc_rate: if decisions == 0 {
                    0.0
                } else {
                    ipc_decisions as f64 / decisions as f64
                },
            }
        })
        .collect();
    let summary = SearchJson {
        schema: SCHEMA_VERSION,
        image: ImageInfo::new(cfg, &ing),
        config: cfg.search,
        totals: report.summary.clone(),
        ipc_mode_bits: mode_bits(Mode::Ipc),
        orig_mode_bits: mode_bits(Mode::Orig),
        groups,
    };
    let csv_path = write_out(&cfg.out_dir, SEARCH_CSV, report.to_csv().as_bytes())?;
    let json_path = write_out(&cfg.out_dir, SUMMARY_JSON, to_json(&summary)?.as_bytes())?;
    Ok(SearchOutcome {
        report,
        summary,
        csv_path,
        json_path,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodStats {
    pub method: u8,
    #[serde(flatten)]
    pub stats: TransferStats,
    /// Words of the serialized original + reconstructed banks.
    pub image_words: u64,
    pub pixels_per_cycle: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupCommands {
    pub group: GroupId,
    /// Mean commands per single-component unit fetch, over one precinct.
    pub method0_commands_per_unit: f64,
    pub method1_commands_per_unit: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MembenchJson {
    pub schema: u32,
    pub image: ImageInfo,
    pub dram: DramConfig,
    pub methods: Vec<MethodStats>,
    /// Method-1 cycles over Method-0 cycles.
    pub cycle_ratio: Option<f64>,
    pub command_ratio: Option<f64>,
    pub groups: Vec<GroupCommands>,
}

pub const MEMBENCH_CSV_HEADER: &str = "method,commands,words,bursts,cycles,pixels_per_cycle";

impl MembenchJson {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(MEMBENCH_CSV_HEADER);
        s.push('\n');
        for m in &self.methods {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.6}",
                m.method, m.stats.commands, m.stats.words, m.stats.bursts, m.stats.cycles, m.pixels_per_cycle
            );
        }
        s
    }

    pub fn method(&self, layout: Layout) -> Option<&MethodStats> {
        self.methods.iter().find(|m| m.method == layout.method())
    }
}

#[derive(Debug)]
pub struct MembenchOutcome {
    pub report: MembenchJson,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
}

pub fn cmd_membench(cfg: &RunConfig) -> Result<MembenchOutcome, CliError> {
    let ing = ingest_image(&cfg.input)?;
    let frame = &ing.frame;
    let mut methods = Vec::new();
    let mut groups = Vec::new();
    if !frame.precincts.is_empty() {
        let geo = frame.mem_geometry()?;
        let tlb = build_tlb(&geo.geometry);
        let recon: Vec<Vec<_>> = frame
            .precincts
            .iter()
            .map(|p| p.iter().map(|pc| cfg.search.recon.apply(pc)).collect())
            .collect();
        let pixels = (frame.width * frame.height) as f64;
        for &layout in &cfg.methods {
            let image = DramImage::build(layout, &frame.precincts, &recon)?;
            let stats = sweep_stats(sweep_fetches(&cfg.search, geo), layout, &geo, &tlb, &cfg.dram)?;
            methods.push(MethodStats {
                method: layout.method(),
                stats,
                image_words: image.words.len() as u64,
                pixels_per_cycle: if stats.cycles == 0 { 0.0 } else { pixels / stats.cycles as f64 },
            });
        }
        let units = geo.geometry.units();
        for g in GroupId::ALL {
            let mut per = [0usize; 2];
            for u in 0..units {
                let r = UnitRef {
                    bank: Bank::Original,
                    precinct: 0,
                    component: 0,
                    group: g,
                    unit: u,
                };
                for (i, layout) in Layout::BOTH.into_iter().enumerate() {
                    per[i] += cmd_generate(&r, layout, &geo, &tlb)?.len();
                }
            }
            groups.push(GroupCommands {
                group: g,
                method0_commands_per_unit: per[0] as f64 / units as f64,
                method1_commands_per_unit: per[1] as f64 / units as f64,
            });
        }
    }
    let ratio = |f: fn(&TransferStats) -> u64| {
        let find = |l: Layout| methods.iter().find(|m| m.method == l.method());
        match (find(Layout::PrecinctAligned), find(Layout::GroupAligned)) {
            (Some(m0), Some(m1)) if f(&m0.stats) > 0 => Some(f(&m1.stats) as f64 / f(&m0.stats) as f64),
            _ => None,
        }
    };
    let report = MembenchJson {
        schema: SCHEMA_VERSION,
        image: ImageInfo::new(cfg, &ing),
        dram: cfg.dram,
        cycle_ratio: ratio(|s| s.cycles),
        command_ratio: ratio(|s| s.commands),
        methods,
        groups,
    };
    let csv_path = write_out(&cfg.out_dir, MEMBENCH_CSV, report.to_csv().as_bytes())?;
    let json_path = write_out(&cfg.out_dir, MEMBENCH_JSON, to_json(&report)?.as_bytes())?;
    Ok(MembenchOutcome {
        report,
        csv_path,
        json_path,
    })
}

#[derive(Debug)]
pub struct TraceOutcome {
    pub precinct: usize,
    pub group: GroupId,
    pub unit: usize,
    pub candidates: usize,
    pub best: Option<(DisplacementVector, u64)>,
    pub path: PathBuf,
}

/// Traces the candidates of `group:unit` in the configured precinct (last
/// by default) through the cycle-stepped pipeline.
pub fn cmd_trace(cfg: &RunConfig, group: GroupId, unit: usize) -> Result<TraceOutcome, CliError> {
    let ing = ingest_image(&cfg.input)?;
    let frame = &ing.frame;
    if frame.precincts.is_empty() {
        return Err(CliError::Config("image has no precincts to trace".into()));
    }
    let last = frame.precincts.len() - 1;
    let precinct = cfg.trace_precinct.unwrap_or(last);
    if precinct > last {
        return Err(CliError::Config(format!("precinct {precinct} out of range (0..={last})")));
    }
    if unit >= frame.units() {
        return Err(CliError::Config(format!("unit {unit} out of range (0..{})", frame.units())));
    }
    let history = ReconHistory::through(frame, precinct, cfg.search.recon);
    let candidates = unit_candidates(frame, &history, precinct, unit, group, &cfg.search)?;

    let mut body = format!(
        "# precinct {precinct} group {group} unit {unit} candidates {}\n",
        candidates.len()
    );
    let mut best = None;
    if candidates.is_empty() {
        body.push_str("# no causal candidates\n");
    } else {
        let run = run_pipeline(&candidates)?;
        body.push_str(TRACE_HEADER);
        body.push('\n');
        for r in &run.trace {
            let _ = writeln!(body, "{r}");
        }
        best = run.best.result().map(|(dv, b)| (dv, b.0));
        if let Some((dv, bits)) = best {
            let _ = writeln!(body, "# best {dv} {bits}");
        }
    }
    let path = write_out(&cfg.out_dir, TRACE_TXT, body.as_bytes())?;
    Ok(TraceOutcome {
        precinct,
        group,
        unit,
        candidates: candidates.len(),
        best,
        path,
    })
}

pub fn cmd_testcard(args: &TestcardArgs) -> Result<PathBuf, CliError> {
    let (w, h) = (args.width, args.height);
    let channels = if args.rgb { 3 } else { 1 };
    let img = match (args.noise, args.rgb) {
        (Some(seed), _) => noise_image(w, h, channels, seed),
        (None, false) => screen_card(w, h),
        (None, true) => screen_card_rgb(w, h),
    };
    if let Some(dir) = args.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(&args.output, img.to_bytes()).map_err(|e| CliError::io(&args.output, e))?;
    Ok(args.output.clone())
}
