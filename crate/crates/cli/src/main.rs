use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rnnt_memcost::arch::{model_param_count, validate_spec, ReductionMode, ValidatedSpec};
use rnnt_memcost::cells::{ModelWeights, Vector};
use rnnt_memcost::costmodel::{cost_report, to_f64, CostReport, EnergyModel, Exact, Schedule};
use rnnt_memcost::memsim::{reconcile, simulate, simulate_counts, Verdict};
use rnnt_memcost::scheduler::{presets, DesignPoint, WS_L, WS_S};
use rnnt_memcost_cli::config::{ConfigError, ModelConfig};
use rnnt_memcost_cli::render::{self, bytes, grouped, millions, Table};
use rnnt_memcost_cli::units::Size;
use rnnt_memcost_cli::weights_io::{self, WeightsError};
use serde_json::{json, Value};

/// Off-chip memory-access cost model and simulator for streaming RNN-T models.
///
/// Latency is counted in 10 ms input frames: `--batch 8` waits for 8 frames
/// (80 ms) before each encoder pass, i.e. a 160 ms target with 2x headroom.
#[derive(Parser)]
#[command(name = "rnnt-memcost", version)]
struct Cli {
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    /// Omit the timestamp header on table output.
    #[arg(long, global = true)]
    no_header: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parameter counts per block, layer and network part.
    Params { config: PathBuf },
    /// Per-layer off-chip traffic, totals and energy under one schedule.
    Analyze {
        config: PathBuf,
        #[command(flatten)]
        sched: SchedArgs,
        #[command(flatten)]
        work: WorkArgs,
        #[command(flatten)]
        energy: EnergyArgs,
        /// Add ratios against this baseline config evaluated with the same flags.
        #[arg(long, value_name = "CONFIG")]
        normalize: Option<PathBuf>,
        /// Write one row per (layer, path) to this CSV file.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Side-by-side traffic of several configs; the first is the baseline.
    Compare {
        #[arg(required = true, num_args = 1..)]
        configs: Vec<PathBuf>,
        #[command(flatten)]
        sched: SchedArgs,
        #[command(flatten)]
        work: WorkArgs,
        #[command(flatten)]
        energy: EnergyArgs,
    },
    /// Run the simulator and reconcile its trace with the analytical model.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        sched: SchedArgs,
        /// Input frames (default: one full batch of the slowest layer, B*R).
        #[arg(long)]
        frames: Option<u64>,
        /// Emitted symbols (default: the decoder reuse count).
        #[arg(long)]
        symbols: Option<u64>,
        /// Count fetches without running the cells.
        #[arg(long)]
        count_only: bool,
        /// Weight manifest to load instead of seeded random weights.
        #[arg(long, value_name = "MANIFEST", conflicts_with = "count_only")]
        weights: Option<PathBuf>,
        /// Write the weights used to <STEM>.json and <STEM>.bin.
        #[arg(long, value_name = "STEM", conflicts_with = "count_only")]
        save_weights: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the per-batch fetch log as CSV.
        #[arg(long, value_name = "PATH")]
        trace_out: Option<PathBuf>,
        /// Evaluate the analytical side at a wrong storage width (self-test of the FAIL path).
        #[arg(long, hide = true)]
        corrupt_schedule: bool,
    },
    /// Evaluate design points: the four presets or a 3x3 batch/budget grid.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Points::Preset)]
        points: Points,
        #[arg(long, default_value_t = 1)]
        bpp: u64,
        #[command(flatten)]
        work: WorkArgs,
        /// Write the rows to this CSV file.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Traffic change from retargeting MEAN time reductions to a new factor, same weights.
    WhatifTr {
        config: PathBuf,
        #[arg(long)]
        factor: usize,
        #[command(flatten)]
        sched: SchedArgs,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Points {
    Preset,
    Grid,
}

#[derive(Args)]
struct SchedArgs {
    /// Frames batched per encoder pass.
    #[arg(long, default_value_t = 8)]
    batch: u64,
    /// On-chip buffer: bytes (524288, 512KiB, 2MiB) or a parameter budget (500Kparams).
    #[arg(long, default_value = "512KiB")]
    buffer: Size,
    /// Storage bytes per weight (1 = 8-bit).
    #[arg(long, default_value_t = 1)]
    bpp: u64,
    /// Symbols sharing one decoder fetch when the decoder fits on chip.
    #[arg(long, default_value_t = 1)]
    decoder_reuse: u64,
}

#[derive(Args)]
struct WorkArgs {
    #[arg(long, default_value_t = 1000)]
    frames: u64,
    #[arg(long, default_value_t = 100)]
    symbols: u64,
}

#[derive(Args)]
struct EnergyArgs {
    /// Energy per multiply-accumulate.
    #[arg(long, default_value_t = 1.0)]
    e_mac: f64,
    /// Energy per on-chip byte.
    #[arg(long, default_value_t = 1.0)]
    e_onchip: f64,
    /// Energy per off-chip byte.
    #[arg(long, default_value_t = 100.0)]
    e_offchip: f64,
}

#[derive(Debug, thiserror::Error)]
enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

struct Output {
    text: String,
    json: Value,
    failed: bool,
}

impl Output {
    fn ok(text: String, json: Value) -> Self {
        Output { text, json, failed: false }
    }
}

impl SchedArgs {
    fn schedule(&self) -> Result<Schedule, AppError> {
        let usage = |e: rnnt_memcost::costmodel::ScheduleError| AppError::Usage(e.to_string());
        Schedule::new(self.batch, self.buffer.bytes(self.bpp), self.bpp)
            .and_then(|s| s.with_decoder_reuse(self.decoder_reuse))
            .map_err(usage)
    }
}

impl EnergyArgs {
    fn model(&self) -> Result<EnergyModel, AppError> {
        EnergyModel::new(self.e_mac, self.e_onchip, self.e_offchip).map_err(|e| AppError::Usage(e.to_string()))
    }
}

fn load(path: &Path) -> Result<(ModelConfig, ValidatedSpec), AppError> {
    let cfg = ModelConfig::load(path)?;
    let spec = cfg.validated()?;
    Ok((cfg, spec))
}

fn write_file(path: &Path, text: &str) -> Result<(), AppError> {
    fs::write(path, text).map_err(|source| AppError::Write { path: path.into(), source })
}

fn ratio(a: &Exact, b: &Exact) -> Option<f64> {
    (*b.numer() != 0).then(|| to_f64(&(a / b)))
}

fn fmt_ratio(r: Option<f64>) -> String {
    r.map_or_else(|| "-".into(), |r| format!("{r:.3}"))
}

fn schedule_line(s: &Schedule) -> String {
    format!(
        "schedule: B={}, buffer {} B, {} byte(s)/param, decoder reuse {}",
        s.batch(),
        grouped(s.buffer_bytes()),
        s.bytes_per_param(),
        s.decoder_reuse()
    )
}

fn energy_line(e: &EnergyModel) -> String {
    format!("energy constants: {} per MAC, {} per on-chip byte, {} per off-chip byte", e.mac(), e.on_chip(), e.off_chip())
}

fn params(path: &Path) -> Result<Output, AppError> {
    let (cfg, spec) = load(path)?;
    let p = model_param_count(&spec);
    let mut text = format!("model {}\n\n{}", cfg.name, render::params_table(&p));
    let mut remainder = serde_json::Map::new();
    if let Some(r) = &cfg.reference {
        text.push('\n');
        for (part, reference, computed) in
            [("encoder", r.encoder_params_m, p.encoder), ("network", r.network_params_m, p.total)]
        {
            if let Some(reference) = reference {
                let gap = reference - computed as f64 / 1e6;
                writeln!(
                    text,
                    "{part}: computed {} M, reference {reference:.1} M, unattributed remainder {gap:+.3} M",
                    millions(computed)
                )
                .unwrap();
                remainder.insert(part.into(), json!(gap));
            }
        }
    }
    if !cfg.assumptions.is_empty() {
        text.push_str("\nassumptions:\n");
        for a in &cfg.assumptions {
            writeln!(text, "  - {a}").unwrap();
        }
    }
    let json = json!({
        "model": cfg.name,
        "params": p,
        "assumptions": cfg.assumptions,
        "reference": cfg.reference,
        "unattributed_remainder_m": remainder,
    });
    Ok(Output::ok(text, json))
}

fn totals_text(r: &CostReport) -> String {
    let mut t = Table::new(["metric", "value"]);
    t.row(["encoder bytes/frame".to_string(), bytes(&r.encoder.bytes_per_frame)]);
    t.row(["decoder bytes/symbol".to_string(), bytes(&r.decoder.bytes_per_symbol)]);
    t.row(["decoder resident".to_string(), if r.decoder.resident { "yes" } else { "no" }.to_string()]);
    t.row([format!("off-chip bytes ({} frames, {} symbols)", r.frames, r.symbols), bytes(&r.off_chip_bytes)]);
    t.row(["on-chip bytes".to_string(), bytes(&r.on_chip_bytes)]);
    t.row(["MACs".to_string(), bytes(&r.macs)]);
    t.row(["pinned layers".to_string(), format!("{}/{}", r.pinned_layers(), r.encoder.layers.len())]);
    let (c, on, off) = r.energy.fractions();
    let mut e = Table::new(["energy", "value", "share"]);
    e.row(["compute".to_string(), format!("{:.4e}", r.energy.compute), format!("{:.1}%", 100.0 * c)]);
    e.row(["on-chip".to_string(), format!("{:.4e}", r.energy.on_chip), format!("{:.1}%", 100.0 * on)]);
    e.row(["off-chip".to_string(), format!("{:.4e}", r.energy.off_chip), format!("{:.1}%", 100.0 * off)]);
    e.row(["total".to_string(), format!("{:.4e}", r.energy.total()), "100.0%".to_string()]);
    format!("{t}\n{e}{}\n", energy_line(&r.energy_model))
}

fn analyze(
    path: &Path,
    sched: &SchedArgs,
    work: &WorkArgs,
    energy: &EnergyArgs,
    normalize: Option<&Path>,
    csv: Option<&Path>,
) -> Result<Output, AppError> {
    let (cfg, spec) = load(path)?;
    let s = sched.schedule()?;
    let e = energy.model()?;
    let r = cost_report(&spec, &s, work.frames, work.symbols, &e);
    let mut text = format!("model {}\n{}\n\n{}\n{}", cfg.name, schedule_line(&s), render::layer_table(&r), totals_text(&r));
    let mut json = json!({ "model": cfg.name, "report": r });
    if let Some(base) = normalize {
        let (bcfg, bspec) = load(base)?;
        let b = cost_report(&bspec, &s, work.frames, work.symbols, &e);
        let rows = [
            ("encoder bytes/frame", &r.encoder.bytes_per_frame, &b.encoder.bytes_per_frame),
            ("decoder bytes/symbol", &r.decoder.bytes_per_symbol, &b.decoder.bytes_per_symbol),
            ("off-chip bytes", &r.off_chip_bytes, &b.off_chip_bytes),
        ];
        let mut t = Table::new(["metric", cfg.name.as_str(), bcfg.name.as_str(), "ratio"]);
        let mut ratios = serde_json::Map::new();
        for (name, a, bb) in rows {
            t.row([name.to_string(), bytes(a), bytes(bb), fmt_ratio(ratio(a, bb))]);
            ratios.insert(name.into(), json!(ratio(a, bb)));
        }
        write!(text, "\nnormalized to {}\n{t}", bcfg.name).unwrap();
        json["normalized"] = json!({ "baseline": bcfg.name, "ratios": ratios });
    }
    if let Some(out) = csv {
        write_file(out, &render::cost_csv(&r))?;
    }
    Ok(Output::ok(text, json))
}

fn compare(paths: &[PathBuf], sched: &SchedArgs, work: &WorkArgs, energy: &EnergyArgs) -> Result<Output, AppError> {
    let s = sched.schedule()?;
    let e = energy.model()?;
    let mut rows = Vec::new();
    for p in paths {
        let (cfg, spec) = load(p)?;
        let r = cost_report(&spec, &s, work.frames, work.symbols, &e);
        rows.push((cfg, model_param_count(&spec), r));
    }
    let base = rows[0].2.encoder.bytes_per_frame;
    let mut t = Table::new(["model", "network M", "encoder M", "enc B/frame", "ratio", "reference", "pinned", "off-chip energy"]);
    let mut out = Vec::new();
    for (cfg, p, r) in &rows {
        let rt = ratio(&r.encoder.bytes_per_frame, &base);
        let reference = cfg.reference.as_ref().and_then(|x| x.offchip_ratio);
        t.row([
            cfg.name.clone(),
            millions(p.total),
            millions(p.encoder),
            bytes(&r.encoder.bytes_per_frame),
            fmt_ratio(rt),
            fmt_ratio(reference),
            format!("{}/{}", r.pinned_layers(), r.encoder.layers.len()),
            format!("{:.1}%", 100.0 * r.energy.fractions().2),
        ]);
        out.push(json!({
            "model": cfg.name,
            "network_params": p.total,
            "encoder_params": p.encoder,
            "encoder_bytes_per_frame": to_f64(&r.encoder.bytes_per_frame),
            "ratio": rt,
            "reference_ratio": reference,
            "pinned_layers": r.pinned_layers(),
            "off_chip_energy_fraction": r.energy.fractions().2,
        }));
    }
    let text = format!("{}\n{}\nratio: encoder off-chip bytes/frame relative to {}\n", schedule_line(&s), t, rows[0].0.name);
    Ok(Output::ok(text, json!({ "schedule": s, "models": out })))
}

/// Deterministic synthetic features.
fn synthetic_frames(t: u64, dim: usize, seed: u64) -> Vec<Vector> {
    (0..t)
        .map(|i| (0..dim).map(|j| (0.013 * (i as f64 * dim as f64 + j as f64) + seed as f64).sin()).collect())
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn validate(
    path: &Path,
    sched: &SchedArgs,
    frames: Option<u64>,
    symbols: Option<u64>,
    count_only: bool,
    weights: Option<&Path>,
    save_weights: Option<&Path>,
    seed: u64,
    trace_out: Option<&Path>,
    corrupt: bool,
) -> Result<Output, AppError> {
    let (cfg, spec) = load(path)?;
    let s = sched.schedule()?;
    let t = frames.unwrap_or(s.batch() * spec.total_reduction());
    let n = symbols.unwrap_or(s.decoder_reuse());
    if t == 0 {
        return Err(AppError::Usage("--frames must be >= 1".into()));
    }
    let (trace, mode) = if count_only {
        (simulate_counts(&spec, &s, t, n), "count-only")
    } else {
        let w = match weights {
            Some(m) => weights_io::load(&spec, m)?.0,
            None => ModelWeights::seeded(&spec, seed),
        };
        if let Some(stem) = save_weights {
            weights_io::save(&w, weights.is_none().then_some(seed), stem)?;
        }
        let x = synthetic_frames(t, spec.feature_dim(), seed);
        let (_, trace) = simulate(&spec, &w, &s, &x, n).map_err(|e| AppError::Usage(e.to_string()))?;
        (trace, "numeric")
    };
    if let Some(out) = trace_out {
        write_file(out, &render::trace_csv(&trace))?;
    }
    let analytic = if corrupt {
        Schedule::new(s.batch(), s.buffer_bytes(), s.bytes_per_param() + 1).expect("valid")
    } else {
        s
    };
    let report = cost_report(&spec, &analytic, t, n, &EnergyModel::default());
    let rec = reconcile(&spec, &report, &trace);

    let mut text = format!("model {}\n{}\nsimulation: {mode}, T={t} frames, S={n} symbols\n\n", cfg.name, schedule_line(&s));
    let mut tot = Table::new(["total", "analytical", "traced"]);
    tot.row(["encoder bytes".to_string(), bytes(&report.encoder_bytes), grouped(trace.encoder_bytes())]);
    tot.row(["decoder bytes".to_string(), bytes(&report.decoder_bytes), grouped(trace.decoder_bytes())]);
    tot.row(["MACs".to_string(), bytes(&report.macs), grouped(trace.macs())]);
    tot.row(["peak resident bytes".to_string(), grouped(s.buffer_bytes()), grouped(trace.peak_resident)]);
    text.push_str(&tot.to_string());
    let mismatched: Vec<_> = rec.mismatched().collect();
    if !mismatched.is_empty() {
        let mut d = Table::new(["block", "analytical", "traced", "diff", "bound", "ok"]);
        for b in &mismatched {
            d.row([
                b.block.to_string(),
                bytes(&b.expected),
                grouped(b.traced),
                format!("{:+.2}", b.diff_f64()),
                grouped(b.bound),
                if b.within_bound && !rec.aligned { "yes" } else { "no" }.to_string(),
            ]);
        }
        write!(text, "\n{d}").unwrap();
    }
    writeln!(text).unwrap();
    match rec.verdict {
        Verdict::Pass => writeln!(text, "PASS: all {} blocks match exactly", rec.blocks.len()).unwrap(),
        Verdict::PartialBatch => writeln!(
            text,
            "PARTIAL_BATCH: T={t} is not a multiple of B*R={} (or S of the decoder reuse); every gap is within one batch of fetches",
            s.batch() * spec.total_reduction()
        )
        .unwrap(),
        Verdict::Fail => {
            let names: Vec<String> = rec.offending().map(|b| b.block.to_string()).collect();
            writeln!(text, "FAIL: {}", names.join(", ")).unwrap();
        }
    }
    let json = json!({
        "model": cfg.name,
        "mode": mode,
        "frames": t,
        "symbols": n,
        "reconciliation": rec,
        "trace": {
            "encoder_bytes": trace.encoder_bytes(),
            "decoder_bytes": trace.decoder_bytes(),
            "macs": trace.macs(),
            "peak_resident": trace.peak_resident,
        },
    });
    Ok(Output { text, json, failed: rec.verdict == Verdict::Fail })
}

fn sweep(path: &Path, points: Points, bpp: u64, work: &WorkArgs, csv_out: Option<&Path>) -> Result<Output, AppError> {
    let (cfg, spec) = load(path)?;
    let pts: Vec<DesignPoint> = match points {
        Points::Preset => presets(),
        Points::Grid => {
            let mut v = Vec::new();
            for b in [1u64, 8, 32] {
                for (tag, params) in [("0", 0u64), ("500K", WS_S), ("2M", WS_L)] {
                    v.push(DesignPoint::new(format!("B{b}/WS{tag}"), b, params));
                }
            }
            v
        }
    };
    let e = EnergyModel::default();
    let mut t = Table::new(["point", "batch", "budget params", "buffer bytes", "enc B/frame", "dec B/symbol", "pinned layers"]);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["point", "batch", "budget_params", "buffer_bytes", "bytes_per_frame", "pinned_layers"])
        .expect("in-memory write");
    let mut rows = Vec::new();
    for p in &pts {
        let s = p.schedule(bpp).map_err(|e| AppError::Usage(e.to_string()))?;
        let r = cost_report(&spec, &s, work.frames, work.symbols, &e);
        let pinned: Vec<String> =
            r.encoder.layers.iter().filter(|l| l.pinned).map(|l| l.index.to_string()).collect();
        t.row([
            p.name.clone(),
            p.batch.to_string(),
            grouped(p.budget_params),
            grouped(s.buffer_bytes()),
            bytes(&r.encoder.bytes_per_frame),
            bytes(&r.decoder.bytes_per_symbol),
            format!("{}/{}", pinned.len(), r.encoder.layers.len()),
        ]);
        w.write_record([
            p.name.clone(),
            p.batch.to_string(),
            p.budget_params.to_string(),
            s.buffer_bytes().to_string(),
            to_f64(&r.encoder.bytes_per_frame).to_string(),
            pinned.join(";"),
        ])
        .expect("in-memory write");
        rows.push(json!({
            "point": p,
            "buffer_bytes": s.buffer_bytes(),
            "bytes_per_frame": to_f64(&r.encoder.bytes_per_frame),
            "decoder_bytes_per_symbol": to_f64(&r.decoder.bytes_per_symbol),
            "pinned_layers": r.encoder.layers.iter().filter(|l| l.pinned).map(|l| l.index).collect::<Vec<_>>(),
        }));
    }
    if let Some(out) = csv_out {
        let data = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv");
        write_file(out, &data)?;
    }
    let text = format!("model {}, {} byte(s)/param\n\n{t}", cfg.name, bpp);
    Ok(Output::ok(text, json!({ "model": cfg.name, "bytes_per_param": bpp, "points": rows })))
}

fn whatif_tr(path: &Path, factor: usize, sched: &SchedArgs) -> Result<Output, AppError> {
    let (cfg, spec) = load(path)?;
    if let Some(r) = spec.reductions().iter().find(|r| r.mode == ReductionMode::Concat) {
        return Err(AppError::Usage(format!(
            "{}: CONCAT reduction before layer {} cannot be retargeted: changing its factor changes the next layer's input width, so the trained weight shapes no longer fit",
            cfg.name, r.position
        )));
    }
    if spec.reductions().is_empty() {
        return Err(AppError::Usage(format!("{}: no time reductions to retarget", cfg.name)));
    }
    let retarget = cfg.spec.with_reduction_factor(factor);
    let new = validate_spec(&retarget).map_err(|e| AppError::Usage(format!("factor {factor}: {e}")))?;
    let same_shapes = model_param_count(&new).encoder_layers == model_param_count(&spec).encoder_layers;
    let s = sched.schedule()?;
    let e = EnergyModel::default();
    let before = cost_report(&spec, &s, 1000, 100, &e);
    let after = cost_report(&new, &s, 1000, 100, &e);
    let a = before.encoder.bytes_per_frame;
    let b = after.encoder.bytes_per_frame;
    let reduction = if *a.numer() == 0 { 0.0 } else { 1.0 - to_f64(&(b / a)) };
    let old_factors: Vec<String> = spec.reductions().iter().map(|r| r.factor.to_string()).collect();
    let mut t = Table::new(["", "before", "after"]);
    t.row(["reduction factors".to_string(), old_factors.join(","), vec![factor.to_string(); old_factors.len()].join(",")]);
    t.row(["total reduction".to_string(), spec.total_reduction().to_string(), new.total_reduction().to_string()]);
    t.row(["encoder bytes/frame".to_string(), bytes(&a), bytes(&b)]);
    t.row(["pinned layers".to_string(), before.pinned_layers().to_string(), after.pinned_layers().to_string()]);
    let text = format!(
        "model {}\n{}\n\n{t}\nencoder access reduction: {:.1}%\nweight shapes unchanged: {}\n",
        cfg.name,
        schedule_line(&s),
        100.0 * reduction,
        if same_shapes { "yes" } else { "no" }
    );
    let json = json!({
        "model": cfg.name,
        "factor": factor,
        "before_bytes_per_frame": to_f64(&a),
        "after_bytes_per_frame": to_f64(&b),
        "reduction": reduction,
        "same_weight_shapes": same_shapes,
    });
    Ok(Output::ok(text, json))
}

fn run(cli: &Cli) -> Result<Output, AppError> {
    match &cli.command {
        Command::Params { config } => params(config),
        Command::Analyze { config, sched, work, energy, normalize, csv } => {
            analyze(config, sched, work, energy, normalize.as_deref(), csv.as_deref())
        }
        Command::Compare { configs, sched, work, energy } => compare(configs, sched, work, energy),
        Command::Validate {
            config,
            sched,
            frames,
            symbols,
            count_only,
            weights,
            save_weights,
            seed,
            trace_out,
            corrupt_schedule,
        } => validate(
            config,
            sched,
            *frames,
            *symbols,
            *count_only,
            weights.as_deref(),
            save_weights.as_deref(),
            *seed,
            trace_out.as_deref(),
            *corrupt_schedule,
        ),
        Command::Sweep { config, points, bpp, work, csv } => sweep(config, *points, *bpp, work, csv.as_deref()),
        Command::WhatifTr { config, factor, sched } => whatif_tr(config, *factor, sched),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Params { .. } => "params",
        Command::Analyze { .. } => "analyze",
        Command::Compare { .. } => "compare",
        Command::Validate { .. } => "validate",
        Command::Sweep { .. } => "sweep",
        Command::WhatifTr { .. } => "whatif-tr",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&out.json).expect("report serializes"));
            } else {
                if !cli.no_header {
                    let now = std::time::SystemTime::now()
                        .duration_since(std::time::UNIX_EPOCH)
                        .map_or(0, |d| d.as_secs());
                    println!("# rnnt-memcost {} (unix time {now})", command_name(&cli.command));
                }
                print!("{}", out.text);
            }
            if out.failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
