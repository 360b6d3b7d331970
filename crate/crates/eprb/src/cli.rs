//! `eprb` command line.
//!
//! Exit statuses: 0 success, 1 runtime or protocol failure, 2 usage error,
//! 3 referee FAIL verdict.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::num::NonZeroU64;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use eprb_core::analysis::{correlations_per_pair, running_report, tally_sides};
use eprb_core::model::{DetectorRule, ExperimentConfig, PulseAxis, SettingLabel, Side};
use eprb_core::protocol::{referee_verify, run_with_strategies, MalusPoisson, Verdict};
use eprb_core::stream::{derive_stream, Role};
use eprb_core::tautology::{bell_numerator, rearranged_statistic, DichotomicQuad, FourRunData};
use eprb_core::{AnalysisMode, Angle, SettingPair};

use crate::io::{config_digest, read_disclosure, read_log, write_curve, write_disclosure, write_log};
use crate::net::{run_local_session, serve_role, NetError, NetOptions, RoleOptions, RoleOutcome};
use crate::topology::{Endpoints, NetRole};
use crate::wire::{self, Randomizer, WireMessage};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FAIL_VERDICT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "eprb", version, about = "Locality-enforced EPR-B simulator")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the in-process protocol and write a trial log.
    Simulate(SimulateArgs),
    /// Compute the four correlations and the CHSH contrast of a trial log.
    Analyze(AnalyzeArgs),
    /// ±1 sequence experiments.
    Tautology(TautologyArgs),
    /// Run one protocol role over TCP (or `--role all` for a loopback session).
    Net(NetArgs),
    /// Check disclosed setting labels against a trial log.
    Verify(VerifyArgs),
}

/// Two comma-separated angles, radians unless suffixed with `deg`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct AnglePair([Angle; 2]);

fn parse_angle(s: &str) -> Result<Angle, String> {
    let s = s.trim();
    let (num, degrees) = match s.strip_suffix("deg").or_else(|| s.strip_suffix('°')) {
        Some(n) => (n.trim(), true),
        None => (s, false),
    };
    let v: f64 = num.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(if degrees {
        Angle::from_degrees(v)
    } else {
        Angle::from_radians(v)
    })
}

fn parse_angle_pair(s: &str) -> Result<AnglePair, String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [a, b] => Ok(AnglePair([parse_angle(a)?, parse_angle(b)?])),
        _ => Err(format!("expected two comma-separated angles, got `{s}`")),
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RuleArg {
    #[value(name = "strict_less")]
    StrictLess,
    #[value(name = "less_or_equal")]
    LessOrEqual,
}

impl From<RuleArg> for DetectorRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::StrictLess => DetectorRule::StrictLess,
            RuleArg::LessOrEqual => DetectorRule::LessOrEqual,
        }
    }
}

#[derive(Args, Debug)]
struct ConfigArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Station X angles for labels 1,2 [default: 0,π/4]
    #[arg(long, value_parser = parse_angle_pair, allow_hyphen_values = true)]
    left_angles: Option<AnglePair>,
    /// Station Y angles for labels 1,2 [default: π/8,-π/8]
    #[arg(long, value_parser = parse_angle_pair, allow_hyphen_values = true)]
    right_angles: Option<AnglePair>,
    #[arg(long, value_enum, default_value = "strict_less")]
    detector_rule: RuleArg,
}

impl ConfigArgs {
    fn config(&self) -> Result<ExperimentConfig, CliError> {
        let config = ExperimentConfig {
            left_angles: self.left_angles.map_or(ExperimentConfig::REFERENCE_LEFT, |p| p.0),
            right_angles: self.right_angles.map_or(ExperimentConfig::REFERENCE_RIGHT, |p| p.0),
            trials: self.trials,
            master_seed: self.seed,
            detector_rule: self.detector_rule.into(),
        };
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(config)
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Trial log destination.
    #[arg(long)]
    out: PathBuf,
    /// Also write randomizer A's disclosed labels here.
    #[arg(long)]
    disclose_a: Option<PathBuf>,
    /// Also write randomizer B's disclosed labels here.
    #[arg(long)]
    disclose_b: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Gill,
    Malus,
}

impl From<ModeArg> for AnalysisMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Gill => AnalysisMode::Gill,
            ModeArg::Malus => AnalysisMode::Malus,
        }
    }
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Trial log to analyze.
    #[arg(long = "log")]
    log: PathBuf,
    #[arg(long, value_enum, default_value = "malus")]
    mode: ModeArg,
    /// Emit a running-curve point every this many trials.
    #[arg(long, default_value = "100")]
    stride: NonZeroU64,
    /// Write the running curve as CSV.
    #[arg(long)]
    curve_out: Option<PathBuf>,
    /// Expected station X angles; must match the log's config digest.
    #[arg(long, value_parser = parse_angle_pair, allow_hyphen_values = true)]
    left_angles: Option<AnglePair>,
    /// Expected station Y angles; must match the log's config digest.
    #[arg(long, value_parser = parse_angle_pair, allow_hyphen_values = true)]
    right_angles: Option<AnglePair>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TautologyMode {
    Quad,
    Rearrange,
}

#[derive(Args, Debug)]
struct TautologyArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    length: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    /// Run r draws from the stream of master seed `seed + r`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "quad")]
    mode: TautologyMode,
}

#[derive(Args, Debug)]
struct NetArgs {
    /// O, A, B, X, Y, collector, referee, or all.
    #[arg(long)]
    role: String,
    #[command(flatten)]
    config: ConfigArgs,
    /// Address to listen on (X, Y, collector, referee).
    #[arg(long, env = "EPRB_LISTEN")]
    listen: Option<SocketAddr>,
    /// Outbound peer address as PEER=ADDR; repeat or comma-separate.
    #[arg(long, env = "EPRB_CONNECT", value_delimiter = ',')]
    connect: Vec<String>,
    /// Collector (or `all`): write the assembled trial log here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seconds to wait for peers before giving up.
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long = "log")]
    log: PathBuf,
    #[arg(long)]
    disclosures_a: PathBuf,
    #[arg(long)]
    disclosures_b: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
    FailVerdict,
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult = Result<(), CliError>;

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, out),
        Command::Analyze(a) => analyze(a, out),
        Command::Tautology(a) => tautology(a, out),
        Command::Net(a) => net(a, out),
        Command::Verify(a) => verify(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_RUNTIME
        }
        Err(CliError::FailVerdict) => EXIT_FAIL_VERDICT,
    }
}

fn create(path: &PathBuf) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &PathBuf) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Left => "left",
        Side::Right => "right",
    }
}

fn simulate(args: SimulateArgs, out: &mut dyn Write) -> CliResult {
    let config = args.config.config()?;
    let station = MalusPoisson {
        rule: config.detector_rule,
    };
    let run = run_with_strategies(&config, station, station).map_err(|e| CliError::Usage(e.to_string()))?;
    write_log(&run.log, &config, create(&args.out)?).with_context(|| format!("writing {}", args.out.display()))?;
    for (path, side, labels) in [
        (&args.disclose_a, Randomizer::A, &run.disclosed_a),
        (&args.disclose_b, Randomizer::B, &run.disclosed_b),
    ] {
        if let Some(path) = path {
            write_disclosure(side, labels, create(path)?).with_context(|| format!("writing {}", path.display()))?;
        }
    }

    writeln!(out, "trials,{}", config.trials)?;
    writeln!(out, "seed,{}", config.master_seed)?;
    writeln!(out, "digest,{}", config_digest(&config))?;
    writeln!(out, "side,label,angle_rad,pulse_axis,exposures,detections")?;
    let (left, right) = tally_sides(&run.log);
    for counts in [left, right] {
        for label in SettingLabel::ALL {
            for axis in PulseAxis::ALL {
                let cell = counts.cell(label, axis);
                writeln!(
                    out,
                    "{},{},{:.12},{},{},{}",
                    side_name(counts.side()),
                    label,
                    config.angle(counts.side(), label).radians(),
                    wire::axis_str(axis),
                    cell.exposures,
                    cell.detections
                )?;
            }
        }
    }
    Ok(())
}

fn analyze(args: AnalyzeArgs, out: &mut dyn Write) -> CliResult {
    let (config, log) = read_log(open(&args.log)?).with_context(|| format!("reading {}", args.log.display()))?;
    if args.left_angles.is_some() || args.right_angles.is_some() {
        let expected = ExperimentConfig {
            left_angles: args.left_angles.map_or(config.left_angles, |p| p.0),
            right_angles: args.right_angles.map_or(config.right_angles, |p| p.0),
            ..config
        };
        if config_digest(&expected) != config_digest(&config) {
            return Err(anyhow!(
                "log/config mismatch: log digest {} but the given angles give {}",
                config_digest(&config),
                config_digest(&expected)
            )
            .into());
        }
    }
    let mode = AnalysisMode::from(args.mode);
    let per_pair = correlations_per_pair(&log, &config, mode);

    writeln!(out, "mode,{}", mode.as_str())?;
    writeln!(out, "trials,{}", log.len())?;
    writeln!(out, "pair,kappa")?;
    for pair in SettingPair::ALL {
        match per_pair[pair.index()] {
            Ok(k) => writeln!(out, "{pair},{k:.12}")?,
            Err(_) => writeln!(out, "{pair},undefined")?,
        }
    }
    let undefined: Vec<String> = per_pair.iter().filter_map(|r| r.err()).map(|e| e.to_string()).collect();
    match undefined.is_empty() {
        true => {
            let s: f64 = SettingPair::ALL
                .iter()
                .map(|p| {
                    let k = per_pair[p.index()].expect("all defined");
                    if *p == SettingPair::new(SettingLabel::Two, SettingLabel::Two) {
                        -k
                    } else {
                        k
                    }
                })
                .sum();
            writeln!(out, "S,{s:.12}")?;
        }
        false => writeln!(out, "S,undefined")?,
    }

    if let Some(path) = &args.curve_out {
        let report = running_report(&log, &config, mode, args.stride);
        write_curve(&report.running_curve, create(path)?).with_context(|| format!("writing {}", path.display()))?;
    }
    if !undefined.is_empty() {
        return Err(anyhow!("undefined correlations: {}", undefined.join("; ")).into());
    }
    Ok(())
}

fn tautology(args: TautologyArgs, out: &mut dyn Write) -> CliResult {
    let len = usize::try_from(args.length).map_err(|_| CliError::Usage("length too large".into()))?;
    let stream = |r: u64| derive_stream(args.seed.wrapping_add(r), Role::Tautology);
    match args.mode {
        TautologyMode::Quad => {
            let mut max_num = 0u64;
            let mut above = 0u64;
            for r in 0..args.runs {
                let quad = DichotomicQuad::random(&mut stream(r), len).map_err(anyhow::Error::from)?;
                let num = bell_numerator(&quad);
                max_num = max_num.max(num);
                above += (num > 2 * len as u64) as u64;
            }
            writeln!(out, "mode,quad")?;
            writeln!(out, "length,{len}")?;
            writeln!(out, "runs,{}", args.runs)?;
            writeln!(out, "max_statistic,{:.12}", max_num as f64 / len as f64)?;
            writeln!(out, "runs_above_2,{above}")?;
        }
        TautologyMode::Rearrange => {
            writeln!(out, "run,seed,value,b_match_fraction")?;
            let mut values = Vec::with_capacity(args.runs as usize);
            for r in 0..args.runs {
                let data = FourRunData::random(&mut stream(r), len).map_err(anyhow::Error::from)?;
                let o = rearranged_statistic(&data).map_err(anyhow::Error::from)?;
                writeln!(
                    out,
                    "{r},{},{:.12},{:.12}",
                    args.seed.wrapping_add(r),
                    o.value,
                    o.b_match_fraction
                )?;
                values.push(o.value);
            }
            let above = values.iter().filter(|&&v| v > 2.0).count();
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            writeln!(out)?;
            writeln!(out, "mode,rearrange")?;
            writeln!(out, "length,{len}")?;
            writeln!(out, "runs,{}", args.runs)?;
            writeln!(out, "min,{min:.12}")?;
            writeln!(out, "mean,{mean:.12}")?;
            writeln!(out, "max,{max:.12}")?;
            writeln!(out, "runs_above_2,{above}")?;
            writeln!(out, "fraction_above_2,{:.12}", above as f64 / values.len() as f64)?;
        }
    }
    Ok(())
}

fn parse_endpoints(args: &NetArgs) -> Result<Endpoints, CliError> {
    let mut endpoints = Endpoints {
        listen: args.listen,
        ..Default::default()
    };
    for item in args.connect.iter().filter(|s| !s.is_empty()) {
        let (peer, addr) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--connect expects PEER=ADDR, got `{item}`")))?;
        let peer = NetRole::parse(peer).ok_or_else(|| CliError::Usage(format!("unknown role `{peer}`")))?;
        let addr = addr
            .parse()
            .map_err(|_| CliError::Usage(format!("bad address `{addr}`")))?;
        if endpoints.connect.insert(peer, addr).is_some() {
            return Err(CliError::Usage(format!("{peer} given twice")));
        }
    }
    Ok(endpoints)
}

fn net(args: NetArgs, out: &mut dyn Write) -> CliResult {
    let config = args.config.config()?;
    let timeout = Duration::from_secs(args.timeout_secs);
    let opts = RoleOptions {
        net: NetOptions {
            connect_timeout: timeout,
            accept_timeout: timeout,
            idle_timeout: timeout,
        },
        log_out: args.out.clone(),
    };
    let report = if args.role.eq_ignore_ascii_case("all") {
        if args.listen.is_some() || !args.connect.is_empty() {
            return Err(CliError::Usage("--role all picks its own loopback addresses".into()));
        }
        let session = run_local_session(&config, &opts).map_err(anyhow::Error::from)?;
        writeln!(out, "{}", wire::encode(&WireMessage::Report(session.referee.report)))?;
        session.referee
    } else {
        let role =
            NetRole::parse(&args.role).ok_or_else(|| CliError::Usage(format!("unknown role `{}`", args.role)))?;
        let endpoints = parse_endpoints(&args)?;
        endpoints.validate(role).map_err(|e| CliError::Usage(e.to_string()))?;
        match serve_role(role, &config, &endpoints, &opts) {
            Ok(RoleOutcome::Refereed(r)) => {
                writeln!(out, "{}", wire::encode(&WireMessage::Report(r.report)))?;
                r
            }
            Ok(RoleOutcome::Collected(log)) => {
                writeln!(out, "collected,{}", log.len())?;
                return Ok(());
            }
            Ok(RoleOutcome::Sent { trials }) => {
                writeln!(out, "sent,{trials}")?;
                return Ok(());
            }
            Err(NetError::Topology(e)) => return Err(CliError::Usage(e.to_string())),
            Err(e) => return Err(anyhow::Error::from(e).context(format!("role {role}")).into()),
        }
    };
    if let Some(d) = &report.diagnostic {
        log::warn!("referee: {d}");
    }
    match report.report.verdict {
        Verdict::Pass => Ok(()),
        Verdict::Fail => Err(CliError::FailVerdict),
    }
}

fn verify(args: VerifyArgs, out: &mut dyn Write) -> CliResult {
    let (config, log) = read_log(open(&args.log)?).with_context(|| format!("reading {}", args.log.display()))?;
    let a = read_disclosure(Randomizer::A, open(&args.disclosures_a)?)
        .with_context(|| format!("reading {}", args.disclosures_a.display()))?;
    let b = read_disclosure(Randomizer::B, open(&args.disclosures_b)?)
        .with_context(|| format!("reading {}", args.disclosures_b.display()))?;
    let report = referee_verify(config.trials, &a, &b, &log);
    writeln!(out, "verdict,{}", report.verdict.as_str())?;
    writeln!(out, "trials_checked,{}", report.trials_checked)?;
    writeln!(out, "mismatches,{}", report.mismatches)?;
    match report.verdict {
        Verdict::Pass => Ok(()),
        Verdict::Fail => Err(CliError::FailVerdict),
    }
}
