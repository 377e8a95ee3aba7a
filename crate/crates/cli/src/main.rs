//! `netmimo` command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 campaign checks failed,
//! 4 invalid configuration or input, 5 I/O error, 6 other runtime error.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use netmimo::beamform::Scheme;
use netmimo::channel::{save_trace, ChannelGenerator, ScenarioConfig};
use netmimo::codec::{
    decode_fields, encode_csi, feedback_bit_count, overhead_fraction, pack_fields, unpack_fields, CodecConfig,
    CsiFields, Signaling,
};
use netmimo::harness::checks::campaign_checks;
use netmimo::harness::{
    emit_report, gain_table, run_campaign, run_drop, CampaignConfig, CsiMode, HardwareMode, ReportFormat, UpdateModel,
};
use netmimo::link::frame::aggregate_all;
use netmimo::link::{calibrate_mcs_thresholds, mcs};
use netmimo::Error;

const VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (campaign format v1, trace format v1, payload format v1)"
);

/// First line of a packed payload file.
const PAYLOAD_MAGIC: &str = "netmimo-csi";

#[derive(Parser, Debug)]
#[command(name = "netmimo", version = VERSION, about = "Network MIMO link-level simulator")]
struct Cli {
    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Override the master seed of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encode a CSI report into a packed payload file.
    CodecPack(CodecPackArgs),
    /// Unpack a payload file into its quantized fields.
    CodecUnpack(CodecUnpackArgs),
    /// Feedback size and airtime overhead.
    Overhead(OverheadArgs),
    /// Simulate one drop of one scenario.
    Simulate(SimulateArgs),
    /// Run a campaign, write the result table and evaluate the trend checks.
    Campaign(CampaignArgs),
    /// Print the MCS table for a given gap.
    CalibrateMcs(CalibrateArgs),
    /// Generate a channel trace.
    TraceGen(TraceArgs),
}

#[derive(Args, Debug)]
struct CodecArgs {
    /// Codec parameter preset.
    #[arg(long, value_enum, default_value_t = Preset::Testbed)]
    preset: Preset,
    /// Codec configuration file (JSON), overriding the preset.
    #[arg(long)]
    codec: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Preset {
    Testbed,
}

#[derive(Args, Debug)]
struct CodecPackArgs {
    #[command(flatten)]
    codec: CodecArgs,
    /// Quantized fields to pack (JSON as printed by codec-unpack). Without
    /// it, the report of a generated channel is packed.
    #[arg(long)]
    fields: Option<PathBuf>,
    /// Mobile station whose channel is reported when generating.
    #[arg(long, default_value_t = 0)]
    ms: usize,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CodecUnpackArgs {
    #[command(flatten)]
    codec: CodecArgs,
    /// Payload file written by codec-pack; stdin when absent.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Also print the decoded per-stream SNRs of every reporting point.
    #[arg(long)]
    decode: bool,
}

#[derive(Args, Debug)]
struct OverheadArgs {
    #[command(flatten)]
    codec: CodecArgs,
    /// Update interval, e.g. `23ms`; may be repeated. Defaults to 23 ms and 3 ms.
    #[arg(long, value_parser = parse_duration)]
    interval: Vec<f64>,
}

#[derive(Args, Debug)]
struct CampaignSource {
    /// Campaign configuration file (JSON); built-in defaults when absent.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override the number of drops.
    #[arg(long)]
    drops: Option<usize>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    source: CampaignSource,
    /// Schemes to run; all configured schemes when absent.
    #[arg(long, value_parser = parse_scheme)]
    scheme: Vec<Scheme>,
    /// Scenario label; the first scenario when absent.
    #[arg(long)]
    scenario: Option<String>,
    /// Mobility label; the first level when absent.
    #[arg(long)]
    mobility: Option<String>,
    #[arg(long, default_value_t = 0)]
    drop: usize,
    #[arg(long, value_enum)]
    csi: Option<CsiArg>,
    #[arg(long, value_enum)]
    hardware: Option<HardwareArg>,
    #[arg(long, value_enum)]
    update: Option<UpdateArg>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum CsiArg {
    Quantized,
    Perfect,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum HardwareArg {
    Ideal,
    EvmModel,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum UpdateArg {
    Standard,
    Emulated,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct CampaignArgs {
    #[command(flatten)]
    source: CampaignSource,
    /// Report file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Gap above the constrained capacity, in dB.
    #[arg(long, default_value_t = mcs::DEFAULT_GAP_DB)]
    gap_db: f64,
    #[arg(long, default_value_t = mcs::DEFAULT_TARGET_FER)]
    target_fer: f64,
}

#[derive(Args, Debug)]
struct TraceArgs {
    /// Scenario configuration file (JSON); defaults when absent.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    doppler_hz: Option<f64>,
    /// Spacing between snapshots.
    #[arg(long, value_parser = parse_duration, default_value = "1ms")]
    step: f64,
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    ChecksFailed,
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Failure {
    Failure::Lib(Error::Config { field, reason: reason.into() })
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::ChecksFailed => 3,
            Failure::Lib(Error::Config { .. } | Error::Parse { .. } | Error::Decode(_) | Error::Contract(_)) => 4,
            Failure::Lib(Error::Io(_) | Error::Csv(_)) => 5,
            Failure::Lib(_) => 6,
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::ChecksFailed) => {
            eprintln!("netmimo: one or more campaign checks failed");
            ExitCode::from(3)
        }
        Err(f) => {
            if let Failure::Lib(e) = &f {
                eprintln!("netmimo: {e}");
            }
            ExitCode::from(f.exit_code())
        }
    }
}

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::CodecPack(a) => codec_pack(cli, a),
        Command::CodecUnpack(a) => codec_unpack(cli, a),
        Command::Overhead(a) => overhead(cli, a),
        Command::Simulate(a) => simulate(cli, a),
        Command::Campaign(a) => campaign(cli, a),
        Command::CalibrateMcs(a) => calibrate(cli, a),
        Command::TraceGen(a) => trace_gen(cli, a),
    }
}

/// Every run echoes its resolved configuration on stderr.
fn echo_config<T: Serialize>(what: &str, value: &T) -> CliResult {
    let s = serde_json::to_string(value).map_err(|e| Failure::Lib(Error::Contract(e.to_string())))?;
    eprintln!("# {what}: {s}");
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> CliResult {
    let out = io::stdout();
    let mut w = out.lock();
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Lib(Error::Contract(e.to_string())))?;
    writeln!(w)?;
    Ok(())
}

fn sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let f = File::open(path)?;
    serde_json::from_reader(f).map_err(|e| {
        Failure::Lib(Error::Parse { line: e.line(), column: e.column(), message: e.to_string() })
    })
}

/// Parses `23ms`, `3 ms`, `0.5s`, `250us` or a bare number of seconds.
fn parse_duration(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let (num, scale) = if let Some(v) = t.strip_suffix("ms") {
        (v, 1e-3)
    } else if let Some(v) = t.strip_suffix("us") {
        (v, 1e-6)
    } else if let Some(v) = t.strip_suffix('s') {
        (v, 1.0)
    } else {
        (t, 1.0)
    };
    let x: f64 = num.trim().parse().map_err(|_| format!("invalid duration `{s}`"))?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(format!("duration must be positive: `{s}`"));
    }
    Ok(x * scale)
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|_| {
        let names: Vec<String> = Scheme::ALL.iter().map(|s| s.to_string()).collect();
        format!("unknown scheme `{s}` (expected one of {})", names.join(", "))
    })
}

fn codec_config(a: &CodecArgs) -> CliResult<CodecConfig> {
    let cfg = match &a.codec {
        Some(p) => read_json(p)?,
        None => match a.preset {
            Preset::Testbed => CodecConfig::testbed(),
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

fn payload_header(cfg: &CodecConfig, bits: usize) -> String {
    format!(
        "{PAYLOAD_MAGIC} v1 m={} n={} ng={} nc={} b_phi={} b_psi={} bits={bits}",
        cfg.m, cfg.n, cfg.ng, cfg.nc, cfg.b_phi, cfg.b_psi
    )
}

fn codec_pack(cli: &Cli, a: &CodecPackArgs) -> CliResult {
    let cfg = codec_config(&a.codec)?;
    echo_config("codec", &cfg)?;
    let fields: CsiFields = match &a.fields {
        Some(p) => read_json(p)?,
        None => {
            let scenario = ScenarioConfig {
                num_subcarriers: cfg.nc,
                rng_seed: cli.seed.unwrap_or(1),
                ..ScenarioConfig::default()
            };
            if a.ms >= scenario.num_links {
                return Err(invalid("ms", "out of range"));
            }
            let noise = scenario.noise_power;
            let snap = ChannelGenerator::new(scenario)?.snapshot_at(0.0)?;
            encode_csi(&aggregate_all(&snap)[a.ms], &cfg, noise)?.fields
        }
    };
    let (payload, bits) = pack_fields(&fields, &cfg)?;
    let mut w = sink(a.output.as_deref())?;
    writeln!(w, "{}", payload_header(&cfg, bits))?;
    writeln!(w, "{}", hex::encode(&payload))?;
    w.flush()?;
    if cli.json {
        eprintln!("{}", json!({ "bits": bits, "bytes": payload.len() }));
    }
    Ok(())
}

fn codec_unpack(cli: &Cli, a: &CodecUnpackArgs) -> CliResult {
    let cfg = codec_config(&a.codec)?;
    echo_config("codec", &cfg)?;
    let mut text = String::new();
    match &a.input {
        Some(p) => File::open(p)?.read_to_string(&mut text)?,
        None => io::stdin().read_to_string(&mut text)?,
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let bad = |line: usize, message: String| Failure::Lib(Error::Parse { line, column: 1, message });
    let header = lines.next().ok_or_else(|| bad(1, "empty payload file".into()))?;
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some(PAYLOAD_MAGIC) || tokens.next() != Some("v1") {
        return Err(bad(1, "missing payload header".into()));
    }
    let bits: usize = tokens
        .find_map(|t| t.strip_prefix("bits="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad(1, "header lacks bits=".into()))?;
    if header != payload_header(&cfg, bits) {
        return Err(bad(1, format!("header `{header}` does not match the codec configuration")));
    }
    let body = lines.next().ok_or_else(|| bad(2, "missing payload line".into()))?;
    let payload = hex::decode(body.trim()).map_err(|e| bad(2, e.to_string()))?;
    let fields = unpack_fields(&payload, bits, &cfg)?;
    if a.decode {
        let decoded = decode_fields(fields.clone(), &cfg)?;
        let snr: Vec<Vec<f64>> = (0..cfg.nc).map(|s| decoded.snr_at(s).to_vec()).collect();
        if cli.json {
            return print_json(&json!({ "bits": bits, "fields": fields, "snr_linear": snr }));
        }
        print_json(&fields)?;
        for (s, v) in snr.iter().enumerate() {
            let db: Vec<String> = v.iter().map(|x| format!("{:.2}", 10.0 * x.log10())).collect();
            println!("subcarrier {s:2}: SNR dB [{}]", db.join(", "));
        }
        return Ok(());
    }
    print_json(&fields)
}

fn overhead(cli: &Cli, a: &OverheadArgs) -> CliResult {
    let cfg = codec_config(&a.codec)?;
    echo_config("codec", &cfg)?;
    let intervals = if a.interval.is_empty() { vec![23e-3, 3e-3] } else { a.interval.clone() };
    let count = feedback_bit_count(&cfg)?;
    let mut rows = Vec::new();
    for &t in &intervals {
        rows.push(json!({
            "interval_ms": t * 1e3,
            "standard_percent": 100.0 * overhead_fraction(&cfg, t, Signaling::Standard)?,
            "reduced_percent": 100.0 * overhead_fraction(&cfg, t, Signaling::Reduced)?,
        }));
    }
    if cli.json {
        return print_json(&json!({
            "bits_per_subcarrier": count.per_subcarrier,
            "analytic_bits": count.analytic_total,
            "packed_bits": count.packed_total,
            "overhead": rows,
        }));
    }
    println!("bits per subcarrier: {:.3}", count.per_subcarrier);
    println!("total bits: {}", count.analytic_total);
    println!("packed bits: {}", count.packed_total);
    for r in &rows {
        println!(
            "overhead at {} ms: {:.2}% (standard signaling), {:.2}% (reduced signaling)",
            r["interval_ms"].as_f64().unwrap_or(f64::NAN),
            r["standard_percent"].as_f64().unwrap_or(f64::NAN),
            r["reduced_percent"].as_f64().unwrap_or(f64::NAN),
        );
    }
    Ok(())
}

fn load_campaign(cli: &Cli, src: &CampaignSource) -> CliResult<CampaignConfig> {
    let mut cfg = match &src.config {
        Some(p) => CampaignConfig::load(File::open(p)?)?,
        None => CampaignConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(d) = src.drops {
        cfg.drops = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> CliResult {
    let mut cfg = load_campaign(cli, &a.source)?;
    if !a.scheme.is_empty() {
        cfg.schemes = a.scheme.clone();
    }
    if let Some(c) = a.csi {
        cfg.csi_modes = vec![match c {
            CsiArg::Quantized => CsiMode::Quantized,
            CsiArg::Perfect => CsiMode::Perfect,
        }];
    }
    if let Some(h) = a.hardware {
        cfg.hardware_modes = vec![match h {
            HardwareArg::Ideal => HardwareMode::Ideal,
            HardwareArg::EvmModel => HardwareMode::EvmModel,
        }];
    }
    if let Some(u) = a.update {
        cfg.update_models = vec![match u {
            UpdateArg::Standard => UpdateModel::Standard,
            UpdateArg::Emulated => UpdateModel::Emulated,
        }];
    }
    let scenario = match &a.scenario {
        Some(l) => cfg.scenarios.iter().find(|s| &s.label == l).cloned(),
        None => cfg.scenarios.first().cloned(),
    }
    .ok_or_else(|| invalid("scenario", "no such scenario"))?;
    let mobility = match &a.mobility {
        Some(l) => cfg.mobility.iter().find(|m| &m.label == l).cloned(),
        None => cfg.mobility.first().cloned(),
    }
    .ok_or_else(|| invalid("mobility", "no such mobility level"))?;
    cfg.scenarios = vec![scenario.clone()];
    cfg.mobility = vec![mobility.clone()];
    cfg.validate()?;
    echo_config("campaign", &cfg)?;
    let evm = cfg.hardware_profile.load()?;
    let records = run_drop(&cfg, &scenario, &mobility, a.drop, &evm)?;
    if cli.json {
        return print_json(&records);
    }
    for r in &records {
        let variant = match (r.csi, r.update) {
            (Some(c), Some(u)) => format!("{c}/{u}"),
            _ => "-".into(),
        };
        let per_subframe: Vec<String> = r.report.subframes.iter().map(|s| format!("{:.2}", s.sum_rate)).collect();
        println!(
            "{:<10} {:<11} {:<20} mean {:6.3} shannon {:7.3}  subframes [{}]",
            r.scheme.to_string(),
            r.hardware.to_string(),
            variant,
            r.mean_rate(),
            r.mean_shannon(),
            per_subframe.join(" ")
        );
    }
    Ok(())
}

fn campaign(cli: &Cli, a: &CampaignArgs) -> CliResult {
    let cfg = load_campaign(cli, &a.source)?;
    if a.dump_config {
        return print_json(&cfg);
    }
    echo_config("campaign", &cfg)?;
    let result = run_campaign(&cfg)?;
    let table = gain_table(&result)?;
    let format = match a.format {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Json => ReportFormat::Json,
    };
    {
        let mut w = sink(a.output.as_deref())?;
        emit_report(&table, format, &mut w)?;
        w.flush()?;
    }
    let checks = campaign_checks(&result);
    if cli.json {
        eprintln!("{}", serde_json::to_string(&checks).unwrap_or_default());
    } else {
        for c in &checks {
            eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
    }
    if checks.iter().all(|c| c.passed) {
        Ok(())
    } else {
        Err(Failure::ChecksFailed)
    }
}

fn calibrate(cli: &Cli, a: &CalibrateArgs) -> CliResult {
    echo_config("mcs", &json!({ "gap_db": a.gap_db, "target_fer": a.target_fer }))?;
    let table = calibrate_mcs_thresholds(&mcs::default_skeleton(), a.gap_db, a.target_fer)?;
    if cli.json {
        return print_json(&table);
    }
    println!("{}", table.method);
    for e in &table.entries {
        println!(
            "{:<7} rate {:<5} code {:.4}  threshold {:6.2} dB",
            format!("{:?}", e.modulation),
            e.rate,
            e.code_rate,
            e.sinr_threshold_db
        );
    }
    Ok(())
}

fn trace_gen(cli: &Cli, a: &TraceArgs) -> CliResult {
    let mut cfg: ScenarioConfig = match &a.scenario {
        Some(p) => read_json(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.rng_seed = s;
    }
    if let Some(d) = a.doppler_hz {
        cfg.doppler_hz = d;
    }
    if a.count == 0 {
        return Err(invalid("count", "must be at least 1"));
    }
    echo_config("scenario", &cfg)?;
    let times: Vec<f64> = (0..a.count).map(|i| i as f64 * a.step).collect();
    let trace = ChannelGenerator::new(cfg)?.trace(&times)?;
    let mut w = sink(a.output.as_deref())?;
    save_trace(&trace, &mut w)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
