use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use favsites::branching::chain::{run_chain_to_stop, ChainState, StopRecord, StopVariant};
use favsites::oracle::favourite_catalog;
use favsites::rayknight::{adjudicate_convention, PatchConvention};
use favsites::report::AuditReport;
use favsites::rng::{replica_rng, stream_seed, BitStream};
use favsites::verify::f4::F4Table;
use favsites::verify::suite::RkAuditConfig;
use favsites::verify::F4Config;
use favsites::walk::{f_counters_snapshot, run_to_stop, StopSpec};
use favsites_cli::output::{ensure_dir, resolve_out_dir, write_csv, write_json};
use favsites_cli::{emit_report, exit, run_experiment, AuditSpec, CliError, ExperimentConfig, Format};
use serde::Serialize;

const WALK_STREAM: u64 = 200;
const CHAIN_STREAM: u64 = 210;

#[derive(Parser)]
#[command(name = "favsites", version, about = "Favourite sites of simple random walk: simulations and audits")]
struct Cli {
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, overriding the config.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "FAVSITES_OUT_DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the audits of the config, or every known audit.
    All,
    /// Run selected audits.
    Audit(AuditArgs),
    /// Ray-Knight law comparison and convention adjudication.
    VerifyRk(RkArgs),
    /// Simulate walks and report local times and favourite counters.
    SimulateWalk(WalkArgs),
    /// Simulate a branching chain to a stopping time.
    SimulateChain(ChainArgs),
    /// Exact favourite-set laws by path enumeration.
    Enumerate(EnumArgs),
    /// Long-run table of f(3) and f(4) events.
    F4Report(F4Args),
}

#[derive(Args)]
struct AuditArgs {
    /// Audit name, repeatable; `list` prints the known names.
    #[arg(long = "lemma", required = true)]
    lemmas: Vec<String>,
}

#[derive(Args)]
struct RkArgs {
    /// `x:k` pairs.
    #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
    pairs: Vec<(i64, u64)>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long, value_parser = parse_convention)]
    convention: Option<PatchConvention>,
}

#[derive(Args)]
struct WalkArgs {
    #[arg(long, default_value_t = 10)]
    paths: u64,
    /// Fixed horizon; ignored when `--stop-up` is given.
    #[arg(long, default_value_t = 10_000)]
    steps: u64,
    /// Stop at `T_U(k, x)`, given as `k:x`.
    #[arg(long, value_parser = parse_stop_up)]
    stop_up: Option<(u64, i64)>,
    /// Step cap for `--stop-up`.
    #[arg(long, default_value_t = 100_000_000)]
    cap: u64,
    #[arg(long, default_value_t = 6)]
    r_max: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChainArg {
    Y,
    Z,
}

#[derive(Args)]
struct ChainArgs {
    #[arg(long, value_enum)]
    chain: ChainArg,
    #[arg(long)]
    start: u64,
    #[arg(long)]
    level: u64,
    /// Stop after this many two-step-sum crossings instead of the first level crossing.
    #[arg(long, conflicts_with = "horizon")]
    tilde: Option<usize>,
    /// Run a fixed number of generations.
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long, default_value_t = 10)]
    samples: u64,
    #[arg(long, default_value_t = 1_000_000)]
    cap: u64,
}

#[derive(Args)]
struct EnumArgs {
    #[arg(long, default_value_t = 12)]
    t_max: u32,
    #[arg(long, default_value_t = 4)]
    r_max: usize,
}

#[derive(Args)]
struct F4Args {
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    j_min: Option<u32>,
}

fn parse_pair(s: &str) -> Result<(i64, u64), String> {
    let (x, k) = s.split_once(':').ok_or("expected x:k")?;
    Ok((x.parse().map_err(|e| format!("{e}"))?, k.parse().map_err(|e| format!("{e}"))?))
}

fn parse_stop_up(s: &str) -> Result<(u64, i64), String> {
    let (k, x) = s.split_once(':').ok_or("expected k:x")?;
    Ok((k.parse().map_err(|e| format!("{e}"))?, x.parse().map_err(|e| format!("{e}"))?))
}

fn parse_convention(s: &str) -> Result<PatchConvention, String> {
    PatchConvention::ALL
        .into_iter()
        .find(|c| c.as_str() == s)
        .ok_or_else(|| "expected one of paper_literal, origin_source_adjusted".to_string())
}

struct Context {
    config: Option<ExperimentConfig>,
    seed: Option<u64>,
    workers: Option<usize>,
    out: PathBuf,
    format: Format,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self, CliError> {
        let config = cli.config.as_deref().map(ExperimentConfig::load).transpose()?;
        if cli.workers == Some(0) {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        let cfg_out = config.as_ref().and_then(|c| c.out.as_deref());
        Ok(Self {
            out: resolve_out_dir(cli.out.as_deref(), cfg_out),
            format: cli.format.or(config.as_ref().map(|c| c.format)).unwrap_or_default(),
            seed: cli.seed.or(config.as_ref().and_then(|c| c.seed)),
            workers: cli.workers.or(config.as_ref().and_then(|c| c.workers)),
            config,
        })
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    fn workers(&self) -> usize {
        self.workers.unwrap_or(1)
    }

    fn experiment(&self, default_name: &str, audits: Vec<AuditSpec>) -> ExperimentConfig {
        let mut cfg = match &self.config {
            Some(c) => ExperimentConfig {
                audits,
                ..c.clone()
            },
            None => ExperimentConfig::new(default_name, audits),
        };
        cfg.seed = self.seed;
        cfg.workers = self.workers;
        cfg.out = Some(self.out.clone());
        cfg.format = self.format;
        cfg
    }

    /// The config entry of that name, else the default.
    fn audit_named(&self, name: &str) -> Option<AuditSpec> {
        self.config
            .as_ref()
            .and_then(|c| c.audits.iter().find(|a| a.name() == name).cloned())
            .or_else(|| AuditSpec::from_name(name))
    }
}

fn print_report(r: &AuditReport, seconds: f64) {
    eprintln!(
        "{:<32} {:<10} {:<12} {:>4} failed points  {:>8.1} s",
        r.id,
        format!("{:?}", r.kind).to_lowercase(),
        format!("{:?}", r.status).to_uppercase(),
        r.failed_points(),
        seconds
    );
}

/// Runs an experiment and writes reports, extra tables and the manifest.
fn execute(ctx: &Context, cfg: ExperimentConfig) -> Result<i32, CliError> {
    ensure_dir(&ctx.out)?;
    let mut res = run_experiment(&cfg, print_report)?;
    let mut files = vec![emit_report(&res.reports, ctx.format, &ctx.out)?];
    for t in &res.f4_tables {
        files.push(write_f4_table(t, ctx.format, &ctx.out)?);
    }
    files.push(ctx.out.join("manifest.json"));
    res.manifest.files = files.iter().map(|p| p.display().to_string()).collect();
    write_json(&ctx.out.join("manifest.json"), &res.manifest)?;
    eprintln!(
        "{}: {:?}, {} reports, {:.1} s, written to {}",
        res.manifest.experiment,
        res.manifest.status,
        res.manifest.audits.len(),
        res.manifest.wall_time_seconds,
        ctx.out.display()
    );
    Ok(res.manifest.exit_code)
}

fn write_f4_table(t: &F4Table, format: Format, dir: &Path) -> Result<PathBuf, CliError> {
    Ok(match format {
        Format::Json => {
            let p = dir.join("f4_windows.json");
            write_json(&p, t)?;
            p
        }
        Format::Csv => {
            let p = dir.join("f4_windows.csv");
            write_csv(&p, &F4Table::CSV_HEADER, &t.csv_rows())?;
            p
        }
    })
}

fn write_table<T: Serialize, const N: usize>(
    ctx: &Context,
    stem: &str,
    rows: &[T],
    header: &[&str; N],
    csv: impl Fn(&T) -> [String; N],
) -> Result<i32, CliError> {
    ensure_dir(&ctx.out)?;
    let path = match ctx.format {
        Format::Json => {
            let p = ctx.out.join(format!("{stem}.json"));
            write_json(&p, rows)?;
            p
        }
        Format::Csv => {
            let p = ctx.out.join(format!("{stem}.csv"));
            write_csv(&p, header, &rows.iter().map(csv).collect::<Vec<_>>())?;
            p
        }
    };
    eprintln!("{} rows written to {}", rows.len(), path.display());
    Ok(exit::PASS)
}

#[derive(Serialize)]
struct WalkRow {
    path: u64,
    stop_time: Option<u64>,
    censored: bool,
    position: i64,
    max_local: u64,
    favourites: usize,
    f: Vec<u64>,
}

fn simulate_walk(ctx: &Context, a: &WalkArgs) -> Result<i32, CliError> {
    if a.paths == 0 || a.r_max == 0 || a.cap == 0 {
        return Err(CliError::Config("paths, r-max and cap must be positive".into()));
    }
    let spec = match a.stop_up {
        Some((k, x)) => StopSpec::inverse_up(k, x).with_cap(a.cap),
        None => StopSpec::fixed_time(a.steps),
    };
    spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let seed = stream_seed(ctx.seed(), WALK_STREAM);
    let rows = favsites::parallel::run_replicas(a.paths, ctx.workers(), |p| -> Result<WalkRow, CliError> {
        let mut bits = BitStream::for_replica(seed, p);
        let out = run_to_stop(&spec, &mut bits, a.r_max)?;
        Ok(WalkRow {
            path: p,
            stop_time: out.stop_time,
            censored: out.censored,
            position: out.walk.state.pos,
            max_local: out.walk.tracker.max_local(),
            favourites: out.walk.tracker.count(),
            f: f_counters_snapshot(&out.walk.tracker),
        })
    })?
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let mut header = vec!["path", "stop_time", "censored", "position", "max_local", "favourites"];
    let f_names: Vec<String> = (1..=a.r_max).map(|r| format!("f{r}")).collect();
    header.extend(f_names.iter().map(String::as_str));
    // the column count depends on r_max, so CSV goes through the generic writer
    if ctx.format == Format::Csv {
        ensure_dir(&ctx.out)?;
        let p = ctx.out.join("walks.csv");
        let file = std::fs::File::create(&p).map_err(|e| CliError::Output {
            path: p.display().to_string(),
            source: e,
        })?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(&header)?;
        for r in &rows {
            let mut rec = vec![
                r.path.to_string(),
                r.stop_time.map(|t| t.to_string()).unwrap_or_default(),
                r.censored.to_string(),
                r.position.to_string(),
                r.max_local.to_string(),
                r.favourites.to_string(),
            ];
            rec.extend(r.f.iter().map(u64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| CliError::Output {
            path: p.display().to_string(),
            source: e,
        })?;
        eprintln!("{} rows written to {}", rows.len(), p.display());
        return Ok(exit::PASS);
    }
    ensure_dir(&ctx.out)?;
    let p = ctx.out.join("walks.json");
    write_json(&p, &rows)?;
    eprintln!("{} rows written to {}", rows.len(), p.display());
    Ok(exit::PASS)
}

fn simulate_chain(ctx: &Context, a: &ChainArgs) -> Result<i32, CliError> {
    if a.samples == 0 || a.cap == 0 {
        return Err(CliError::Config("samples and cap must be positive".into()));
    }
    let start = match a.chain {
        ChainArg::Y => ChainState::y(a.start),
        ChainArg::Z => ChainState::z(a.start),
    };
    let variant = match (a.tilde, a.horizon) {
        (Some(n), _) => StopVariant::Tilde { crossings: n },
        (None, Some(steps)) => StopVariant::Horizon { steps },
        (None, None) => StopVariant::Level,
    };
    let seed = stream_seed(ctx.seed(), CHAIN_STREAM);
    let records = favsites::parallel::run_replicas(a.samples, ctx.workers(), |i| {
        let mut bits = BitStream::new(replica_rng(seed, i));
        run_chain_to_stop(start, a.level, variant, &mut bits, a.cap)
    })?
    .into_iter()
    .collect::<Result<Vec<StopRecord>, _>>()
    .map_err(|e| match e {
        favsites::Error::InvalidParameter(m) => CliError::Config(m),
        other => other.into(),
    })?;
    let opt = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
    write_table(
        ctx,
        "chains",
        &records,
        &[
            "steps",
            "level_crossing",
            "absorption",
            "max_jump",
            "final_value",
            "pre_final_value",
            "tilde_crossings",
            "censored",
        ],
        |r| {
            [
                r.steps.to_string(),
                opt(r.level_crossing),
                opt(r.absorption),
                r.max_jump.to_string(),
                r.final_value.to_string(),
                opt(r.pre_final_value),
                r.tilde.len().to_string(),
                r.censored.to_string(),
            ]
        },
    )
}

#[derive(Serialize)]
struct CatalogRow {
    t: u32,
    r: usize,
    /// Number of length-`t` paths with `#K(t) = r`, out of `2^t`.
    paths: u64,
    paths_at_position: u64,
    prob: String,
    prob_at_position: String,
    f_mean: f64,
    f_var: f64,
}

fn enumerate(ctx: &Context, a: &EnumArgs) -> Result<i32, CliError> {
    let cat = favourite_catalog(a.t_max, a.r_max).map_err(|e| CliError::Config(e.to_string()))?;
    let mut rows = Vec::new();
    for t in 1..=a.t_max {
        for r in 1..=a.r_max {
            let (m, v) = cat.f_moments(t, r);
            rows.push(CatalogRow {
                t,
                r,
                paths: cat.size[t as usize][r],
                paths_at_position: cat.at_pos[t as usize][r],
                prob: cat.prob_exact(t, r, false).to_string(),
                prob_at_position: cat.prob_exact(t, r, true).to_string(),
                f_mean: m,
                f_var: v,
            });
        }
    }
    write_table(
        ctx,
        "catalog",
        &rows,
        &["t", "r", "paths", "paths_at_position", "prob", "prob_at_position", "f_mean", "f_var"],
        |c| {
            [
                c.t.to_string(),
                c.r.to_string(),
                c.paths.to_string(),
                c.paths_at_position.to_string(),
                c.prob.clone(),
                c.prob_at_position.clone(),
                c.f_mean.to_string(),
                c.f_var.to_string(),
            ]
        },
    )
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let ctx = Context::new(cli)?;
    match &cli.command {
        Command::All => {
            let audits = match &ctx.config {
                Some(c) => c.audits.clone(),
                None => AuditSpec::catalog(),
            };
            execute(&ctx, ctx.experiment("all", audits))
        }
        Command::Audit(a) => {
            if a.lemmas.iter().any(|l| l == "list") {
                for n in AuditSpec::known_names() {
                    println!("{n}");
                }
                return Ok(exit::PASS);
            }
            let audits = a
                .lemmas
                .iter()
                .map(|n| {
                    ctx.audit_named(n).ok_or_else(|| {
                        CliError::Config(format!("unknown audit {n}; known: {}", AuditSpec::known_names().join(", ")))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            execute(&ctx, ctx.experiment("audit", audits))
        }
        Command::VerifyRk(a) => {
            let mut rk = match ctx.audit_named("ray-knight") {
                Some(AuditSpec::RayKnight(c)) => c,
                _ => RkAuditConfig::default(),
            };
            if !a.pairs.is_empty() {
                rk.pairs = a.pairs.clone();
            }
            if let Some(s) = a.samples {
                rk.samples = s;
            }
            if a.convention.is_some() {
                rk.convention = a.convention;
            }
            let adj = adjudicate_convention(rk.t_cap)?;
            eprintln!(
                "convention adjudicated at t_cap = {}: {} (censored mass {:.3e})",
                adj.t_cap,
                adj.chosen.map(|c| c.as_str()).unwrap_or("none"),
                adj.censored
            );
            ensure_dir(&ctx.out)?;
            write_json(&ctx.out.join("adjudication.json"), &adj)?;
            execute(&ctx, ctx.experiment("verify-rk", vec![AuditSpec::RayKnight(rk)]))
        }
        Command::SimulateWalk(a) => simulate_walk(&ctx, a),
        Command::SimulateChain(a) => simulate_chain(&ctx, a),
        Command::Enumerate(a) => enumerate(&ctx, a),
        Command::F4Report(a) => {
            let mut c = match ctx.audit_named("f4-longrun") {
                Some(AuditSpec::F4Longrun(c)) => c,
                _ => F4Config::default(),
            };
            c.replicas = a.replicas.unwrap_or(c.replicas);
            c.steps = a.steps.unwrap_or(c.steps);
            c.j_min = a.j_min.unwrap_or(c.j_min);
            execute(&ctx, ctx.experiment("f4-report", vec![AuditSpec::F4Longrun(c)]))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { exit::CONFIG } else { exit::PASS };
            return ExitCode::from(code as u8);
        }
    };
    let code = match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
