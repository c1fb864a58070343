//! `efid`: corpus generation, encoding, faulty decoding, sweeps, power
//! estimates and plots from the command line.
//!
//! Exit status is 0 on success, 1 for bad flags or configuration and 2 when
//! a run fails. Every output file is written atomically next to a
//! `.meta.json` stamp.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use elastic_fidelity::alu::{FidelityContext, RegionTable};
use elastic_fidelity::codec::{adpcm, jpeg, video, Bitstream, CodecId, Kernel};
use elastic_fidelity::config::{
    write_with_stamp, ExperimentConfig, Manifest, Outputs, SweepSpec,
};
use elastic_fidelity::corpus::{CorpusSpec, Media};
use elastic_fidelity::fault::{BitRange, FlipModel};
use elastic_fidelity::io;
use elastic_fidelity::metrics::{psnr, snr_seg, SNRSEG_SEGMENT};
use elastic_fidelity::plot::{self, Series, Show};
use elastic_fidelity::power::{self, WorkloadFile};
use elastic_fidelity::rng::derive_stream;
use elastic_fidelity::sweep::{self, Target, DEFAULT_QUALITY};

#[derive(Parser)]
#[command(name = "efid", version, about = "Elastic fidelity codec simulator")]
struct Cli {
    /// Worker threads for sweeps (overrides EFID_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic corpus input (WAV, PPM, or a directory of PPM frames).
    GenCorpus(GenCorpus),
    /// Reliably encode a corpus input into an EFC1 bitstream.
    Encode(Encode),
    /// Decode a bitstream, optionally with faulty regions.
    Decode(Decode),
    /// Run a bit-range or error-rate sweep and write CSV/SVG.
    Sweep(SweepCmd),
    /// Estimate normalized processor power for a workload mix.
    Power(PowerCmd),
    /// Plot one or more sweep CSVs as SVG.
    Plot(PlotCmd),
    /// Run every sweep and figure of a manifest.
    Manifest(ManifestCmd),
}

#[derive(Args)]
struct GenCorpus {
    #[arg(long)]
    kernel: Option<Kernel>,
    /// Corpus spec JSON; defaults to the kernel's standard input.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Override the seed of the corpus spec.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct Encode {
    #[arg(long)]
    kernel: Option<Kernel>,
    /// Input WAV, PPM, or frame directory. Without it the corpus spec is used.
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, conflicts_with = "input")]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_QUALITY)]
    quality: u8,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct Decode {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Region table JSON: {"region": {"rate": 0.04, "bits": "0-7"}, ...}.
    #[arg(long)]
    regions: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    trial: u64,
    /// Reference to score against (WAV, PPM, or frame directory).
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Rate,
    Bits,
}

#[derive(Args)]
struct SweepCmd {
    /// Experiment JSON; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kernel: Option<Kernel>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Comma-separated rates for a rate sweep.
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    /// Fixed rate for a bit sweep.
    #[arg(long)]
    rate: Option<f64>,
    /// Rate sweep: the fixed range. Bit sweep: rows [0,LO] through [0,HI].
    #[arg(long)]
    bits: Option<BitRange>,
    /// Region name or "all".
    #[arg(long)]
    region: Option<Target>,
    /// Comma-separated regions to hold reliable.
    #[arg(long, value_delimiter = ',')]
    pin: Option<Vec<String>>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quality: Option<u8>,
    #[arg(long)]
    model: Option<FlipModel>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct PowerCmd {
    /// Workload JSON, or the name of a bundled one (table2_g721.json, ...).
    #[arg(long)]
    workload: String,
    /// Also write the result as JSON.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotCmd {
    #[arg(long, required = true)]
    csv: Vec<PathBuf>,
    #[arg(long)]
    svg: PathBuf,
    #[arg(long)]
    title: Option<String>,
    #[arg(long, value_enum, default_value = "both")]
    show: ShowArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShowArg {
    Both,
    Quality,
    Success,
}

#[derive(Args)]
struct ManifestCmd {
    /// Manifest JSON; defaults to the bundled nine-panel CI manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    out_dir: PathBuf,
}

/// A failed command and the exit status it maps to.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

type Outcome<T> = Result<T, Failure>;

trait Classify<T> {
    fn config(self) -> Outcome<T>;
    fn runtime(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Outcome<T> {
        self.map_err(|e| Failure::Config(e.into()))
    }

    fn runtime(self) -> Outcome<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let threads = cli.threads;
    let r = match cli.cmd {
        Cmd::GenCorpus(a) => gen_corpus(a),
        Cmd::Encode(a) => encode(a),
        Cmd::Decode(a) => decode(a),
        Cmd::Sweep(a) => sweep_cmd(a, threads),
        Cmd::Power(a) => power_cmd(a),
        Cmd::Plot(a) => plot_cmd(a),
        Cmd::Manifest(a) => manifest_cmd(a, threads),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("efid: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("efid: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_corpus(kernel: Option<Kernel>, path: Option<&Path>) -> anyhow::Result<CorpusSpec> {
    let spec = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let spec: CorpusSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            if let Some(k) = kernel {
                if spec.kernel() != k {
                    bail!("corpus in {} is for {}, not {k}", p.display(), spec.kernel());
                }
            }
            spec
        }
        None => CorpusSpec::standard(kernel.ok_or_else(|| anyhow!("either --kernel or --corpus is required"))?),
    };
    Ok(spec)
}

fn media_bytes(path: &Path, m: &Media) -> anyhow::Result<()> {
    match m {
        Media::Audio(a) => io::write_atomic(path, &io::wav_bytes(a))?,
        Media::Image(i) => io::write_atomic(path, &io::ppm_bytes(i))?,
        Media::Video(v) => io::write_video_dir(path, v)?,
    }
    Ok(())
}

fn read_media(kernel: Kernel, path: &Path) -> anyhow::Result<Media> {
    Ok(match kernel {
        Kernel::Adpcm => {
            let b = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            Media::Audio(io::parse_wav(path, &b)?)
        }
        Kernel::MiniJpeg => {
            let b = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            Media::Image(io::parse_ppm(path, &b)?)
        }
        Kernel::MiniVideo => Media::Video(io::read_video_dir(path)?),
    })
}

fn stamp_only(path: &Path, seed: u64, config: serde_json::Value) -> anyhow::Result<()> {
    let stamp = elastic_fidelity::config::Stamp::new(seed, config);
    io::write_atomic(&elastic_fidelity::config::stamp_path(path), stamp.to_json().as_bytes())?;
    Ok(())
}

fn gen_corpus(a: GenCorpus) -> Outcome<()> {
    let mut spec = load_corpus(a.kernel, a.corpus.as_deref()).config()?;
    if let Some(s) = a.seed {
        spec = spec.with_seed(s);
    }
    let media = spec.generate().config()?;
    media_bytes(&a.out, &media).runtime()?;
    stamp_only(&a.out, spec.seed(), json!({ "command": "gen-corpus", "corpus": spec })).runtime()?;
    println!("wrote {} ({})", a.out.display(), spec.kernel());
    Ok(())
}

fn encode(a: Encode) -> Outcome<()> {
    if !(1..=100).contains(&a.quality) {
        return Err(Failure::Config(anyhow!("quality {} is outside 1-100", a.quality)));
    }
    let (media, source) = match &a.input {
        Some(p) => {
            let k = a.kernel.ok_or_else(|| anyhow!("--kernel is required with --input")).config()?;
            (read_media(k, p).config()?, json!({ "input": p }))
        }
        None => {
            let spec = load_corpus(a.kernel, a.corpus.as_deref()).config()?;
            (spec.generate().config()?, json!({ "corpus": spec }))
        }
    };
    let bs = match &media {
        Media::Audio(x) => adpcm::encode(x),
        Media::Image(x) => jpeg::encode(x, a.quality),
        Media::Video(x) => video::encode(x, a.quality),
    }
    .runtime()?;
    let bytes = bs.to_bytes();
    io::write_atomic(&a.out, &bytes).runtime()?;
    stamp_only(
        &a.out,
        0,
        json!({ "command": "encode", "kernel": media.kernel(), "quality": a.quality, "source": source }),
    )
    .runtime()?;
    println!("wrote {} ({} bytes)", a.out.display(), bytes.len());
    Ok(())
}

fn kernel_of(id: CodecId) -> Kernel {
    Kernel::ALL.into_iter().find(|k| k.codec_id() == id).expect("every codec id has a kernel")
}

fn decode(a: Decode) -> Outcome<()> {
    let bytes = std::fs::read(&a.input)
        .with_context(|| format!("reading {}", a.input.display()))
        .config()?;
    let bs = Bitstream::from_bytes(&bytes).context("parsing bitstream").config()?;
    let kernel = kernel_of(bs.header.codec);
    let regions: RegionTable = match &a.regions {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .config()?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", p.display()))
                .config()?
        }
        None => RegionTable::new(),
    };
    sweep::check_region_names(kernel, regions.keys().map(String::as_str)).config()?;
    let reference = match &a.reference {
        Some(p) => Some(read_media(kernel, p).config()?),
        None => None,
    };
    let mut ctx = FidelityContext::new(&regions, derive_stream(a.seed, &[a.trial.into()])).config()?;
    let decoded = match kernel {
        Kernel::Adpcm => adpcm::decode(&bs, &mut ctx).map(Media::Audio),
        Kernel::MiniJpeg => jpeg::decode(&bs, &mut ctx).map(Media::Image),
        Kernel::MiniVideo => video::decode(&bs, &mut ctx).map(Media::Video),
    }
    .map_err(|f| anyhow!("decode failed: {f}"))
    .runtime()?;
    let score = match (&reference, &decoded) {
        (None, _) => None,
        (Some(Media::Audio(r)), Media::Audio(d)) => Some(snr_seg(r, d, SNRSEG_SEGMENT).config()?),
        (Some(Media::Image(r)), Media::Image(d)) => Some(psnr(r, d).config()?),
        (Some(Media::Video(r)), Media::Video(d)) => Some(psnr(r, d).config()?),
        _ => unreachable!("reference is read for the bitstream's kernel"),
    };
    if let Some(out) = &a.out {
        media_bytes(out, &decoded).runtime()?;
        stamp_only(
            out,
            a.seed,
            json!({ "command": "decode", "input": a.input, "regions": regions, "trial": a.trial }),
        )
        .runtime()?;
        println!("wrote {}", out.display());
    }
    for (name, n) in ctx.flip_counts() {
        if n > 0 {
            println!("{name}: {n} corrupted results of {} ops", ctx.op_counts()[&name]);
        }
    }
    if let Some(q) = score {
        println!("{}: {:.6} dB", q.metric, q.value);
    }
    Ok(())
}

fn sweep_config(a: &SweepCmd) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => {
            let kernel = a.kernel.ok_or_else(|| anyhow!("--kernel is required without --config"))?;
            let target = a.region.clone().unwrap_or(Target::All);
            let sweep = match a.mode.unwrap_or(Mode::Bits) {
                Mode::Bits => SweepSpec::Bits {
                    target,
                    rate: sweep::DEFAULT_SWEEP_RATE,
                    ranges: None,
                    pinned: None,
                },
                Mode::Rate => SweepSpec::Rate {
                    target,
                    rates: Vec::new(),
                    bits: BitRange::lsb(7)?,
                    pinned: None,
                },
            };
            ExperimentConfig {
                kernel,
                corpus: None,
                quality: DEFAULT_QUALITY,
                seed: 0,
                trials: sweep::DEFAULT_TRIALS,
                model: FlipModel::default(),
                sweep,
                outputs: Outputs::default(),
            }
        }
    };
    if let Some(k) = a.kernel {
        if k != cfg.kernel {
            cfg.corpus = None;
        }
        cfg.kernel = k;
    }
    if let Some(m) = a.mode {
        let target = match &cfg.sweep {
            SweepSpec::Bits { target, .. } | SweepSpec::Rate { target, .. } => target.clone(),
            SweepSpec::Table { .. } => Target::All,
        };
        match (m, &cfg.sweep) {
            (Mode::Bits, SweepSpec::Bits { .. }) | (Mode::Rate, SweepSpec::Rate { .. }) => {}
            (Mode::Bits, _) => {
                cfg.sweep = SweepSpec::Bits {
                    target,
                    rate: sweep::DEFAULT_SWEEP_RATE,
                    ranges: None,
                    pinned: None,
                }
            }
            (Mode::Rate, _) => {
                cfg.sweep = SweepSpec::Rate {
                    target,
                    rates: Vec::new(),
                    bits: BitRange::lsb(7)?,
                    pinned: None,
                }
            }
        }
    }
    match &mut cfg.sweep {
        SweepSpec::Bits {
            target,
            rate,
            ranges,
            pinned,
        } => {
            if a.rates.is_some() {
                bail!("--rates applies to rate sweeps; use --rate for a bit sweep");
            }
            if let Some(t) = &a.region {
                *target = t.clone();
            }
            if let Some(r) = a.rate {
                *rate = r;
            }
            if let Some(b) = a.bits {
                *ranges = Some((b.lo()..=b.hi()).map(BitRange::lsb).collect::<Result<_, _>>()?);
            }
            if let Some(p) = &a.pin {
                *pinned = Some(p.clone());
            }
        }
        SweepSpec::Rate {
            target,
            rates,
            bits,
            pinned,
        } => {
            if a.rate.is_some() {
                bail!("--rate applies to bit sweeps; use --rates for a rate sweep");
            }
            if let Some(t) = &a.region {
                *target = t.clone();
            }
            if let Some(r) = &a.rates {
                *rates = r.clone();
            }
            if let Some(b) = a.bits {
                *bits = b;
            }
            if let Some(p) = &a.pin {
                *pinned = Some(p.clone());
            }
        }
        SweepSpec::Table { .. } => {
            if a.region.is_some() || a.rate.is_some() || a.rates.is_some() || a.bits.is_some() || a.pin.is_some() {
                bail!("sweep flags do not apply to a table experiment");
            }
        }
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(q) = a.quality {
        cfg.quality = q;
    }
    if let Some(m) = a.model {
        cfg.model = m;
    }
    if let Some(c) = &a.csv {
        cfg.outputs.csv = Some(c.clone());
    }
    if let Some(s) = &a.svg {
        cfg.outputs.svg = Some(s.clone());
    }
    Ok(cfg.resolve()?)
}

fn sweep_cmd(a: SweepCmd, threads: Option<usize>) -> Outcome<()> {
    let cfg = sweep_config(&a).config()?;
    let result = cfg.run(threads).runtime()?;
    let csv = sweep::summarize_csv(&result).runtime()?;
    match &cfg.outputs.csv {
        Some(p) => {
            write_with_stamp(p, csv.as_bytes(), cfg.seed, &cfg).runtime()?;
            eprintln!("wrote {}", p.display());
        }
        None => print!("{csv}"),
    }
    if let Some(p) = &cfg.outputs.svg {
        let svg = plot::plot_svg(&result).runtime()?;
        write_with_stamp(p, svg.as_bytes(), cfg.seed, &cfg).runtime()?;
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn power_cmd(a: PowerCmd) -> Outcome<()> {
    let path = Path::new(&a.workload);
    let file = if path.exists() {
        WorkloadFile::load(path).config()?
    } else {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        power::table2()
            .into_iter()
            .find(|(name, _, _)| stem == format!("table2_{name}"))
            .map(|(_, f, _)| f)
            .ok_or_else(|| anyhow!("workload file {} not found", a.workload))
            .config()?
    };
    let mix = file.mix();
    let p = power::normalized_power(&mix, &file.params).config()?;
    println!("normalized_power {p:.4}");
    println!("elastic_fraction {:.4}", mix.elastic_fraction());
    println!("alu_share {}", file.params.alu_share);
    if let Some(out) = &a.out {
        let report = json!({
            "workload": a.workload,
            "normalized_power": p,
            "elastic_fraction": mix.elastic_fraction(),
            "params": file.params,
        });
        let mut text = serde_json::to_string_pretty(&report).runtime()?;
        text.push('\n');
        write_with_stamp(out, text.as_bytes(), 0, &file).runtime()?;
    }
    Ok(())
}

fn plot_cmd(a: PlotCmd) -> Outcome<()> {
    let mut series = Vec::new();
    let mut swept = None;
    for p in &a.csv {
        let text = std::fs::read_to_string(p)
            .with_context(|| format!("reading {}", p.display()))
            .config()?;
        let (s, rows) = plot::read_csv(&text).with_context(|| p.display().to_string()).config()?;
        if *swept.get_or_insert(s) != s {
            return Err(Failure::Config(anyhow!("cannot mix bit and rate sweeps in one plot")));
        }
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        series.push(Series { name, rows });
    }
    let swept = swept.expect("clap requires at least one --csv");
    let show = match a.show {
        ShowArg::Both => Show::Both,
        ShowArg::Quality => Show::Quality,
        ShowArg::Success => Show::Success,
    };
    let title = a.title.clone().unwrap_or_else(|| format!("{} sweep", swept.name()));
    let svg = plot::plot_series(&title, swept, show, &series).config()?;
    write_with_stamp(&a.svg, svg.as_bytes(), 0, &json!({ "command": "plot", "csv": a.csv, "title": title }))
        .runtime()?;
    println!("wrote {}", a.svg.display());
    Ok(())
}

fn manifest_cmd(a: ManifestCmd, threads: Option<usize>) -> Outcome<()> {
    let mut m = match &a.manifest {
        Some(p) => Manifest::load(p).config()?,
        None => Manifest::fig2_ci(),
    };
    if let Some(t) = a.trials {
        m = m.with_trials(t);
    }
    m.runs().config()?;
    let out = m
        .execute(&a.out_dir, threads, |stem| eprintln!("sweep {stem}"))
        .runtime()?;
    println!("wrote {} CSV and {} SVG files to {}", out.csv.len(), out.svg.len(), a.out_dir.display());
    Ok(())
}
