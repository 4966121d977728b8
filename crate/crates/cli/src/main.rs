use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use qmaze_core::adaptive::{
    next_maze, UpdateState, DEFAULT_A, DEFAULT_LAMBDA_UPDATE1, DEFAULT_LAMBDA_UPDATE2,
};
use qmaze_core::benchmark::{self, BenchConfig, Solver};
use qmaze_core::qubo::{DEFAULT_LAMBDA1, DEFAULT_LAMBDA2};
use qmaze_core::session::{run_bot_set, BotProfile, SessionParams, DEFAULT_SET_SIZE};
use qmaze_core::{Algorithm, AnnealParams, Maze, QuboProblem, Sampler};

#[derive(Parser, Debug)]
#[command(
    name = "qmaze",
    version,
    about = "Perfect-maze generation from a bar-tipping QUBO"
)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Emit JSON instead of text.
    #[arg(long, global = true, conflicts_with = "ascii")]
    json: bool,
    /// Emit text (the default).
    #[arg(long, global = true)]
    ascii: bool,
    /// Write the output to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate one maze.
    Generate(GenerateArgs),
    /// Check that a maze is perfect.
    Validate(InArgs),
    /// Print the path from start to goal.
    Solve(InArgs),
    /// Time generators and samplers over a range of sizes.
    Bench(BenchArgs),
    /// Fit a polynomial to a benchmark CSV.
    Fit(FitArgs),
    /// Play a set of mazes with the scripted player.
    BotRun(BotArgs),
    /// Run the HTTP play service.
    Serve(ServeArgs),
    /// Print a QUBO in coordinate format.
    ExportQubo(ExportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Algo {
    Bar,
    Wall,
    Hunt,
    QuboSa,
    QuboSqa,
}

#[derive(Args, Debug, Clone)]
struct QuboArgs {
    #[arg(long, default_value_t = 9, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA1)]
    lambda1: f64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA2)]
    lambda2: f64,
}

#[derive(Args, Debug, Clone)]
struct AnnealArgs {
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    sweeps: u64,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    reads: u64,
}

impl AnnealArgs {
    fn params(&self, seed: u64) -> AnnealParams {
        AnnealParams {
            sweeps: self.sweeps as usize,
            reads: self.reads as usize,
            seed,
            ..AnnealParams::default()
        }
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "qubo-sa")]
    algo: Algo,
    #[command(flatten)]
    qubo: QuboArgs,
    #[command(flatten)]
    anneal: AnnealArgs,
}

#[derive(Args, Debug)]
struct InArgs {
    /// Maze file in JSON or ASCII form; `-` reads stdin.
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated: classic-bar, classic-wall, classic-hunt, sa, sqa.
    #[arg(long, value_delimiter = ',', default_value = "classic-bar")]
    solvers: Vec<String>,
    /// Inclusive range such as `2..40` or `2-40`, or a comma list.
    #[arg(long, default_value = "2..10")]
    n_range: String,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Write the CSV here as well as to the output.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    anneal: AnnealArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Column {
    Mean,
    Tts,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// CSV produced by `bench`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Restrict to one solver; required when the file holds several.
    #[arg(long)]
    solver: Option<String>,
    #[arg(long, value_enum, default_value = "mean")]
    column: Column,
}

#[derive(Args, Debug)]
struct BotArgs {
    #[arg(long, default_value_t = 9, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = DEFAULT_SET_SIZE as u64, value_parser = clap::value_parser!(u64).range(1..))]
    mazes: u64,
    /// Apply the update after every maze (the default).
    #[arg(long, action = ArgAction::SetTrue, overrides_with = "no_update")]
    update: bool,
    /// Control arm: every maze comes from the base QUBO.
    #[arg(long, action = ArgAction::SetTrue)]
    no_update: bool,
    /// Solve-time model as `c=0.1,sigma=0.5,min=0.1`.
    #[arg(long, default_value = "c=0.1,sigma=0.5,min=0.1")]
    profile: String,
    #[arg(long, default_value_t = DEFAULT_LAMBDA_UPDATE1)]
    lambda_update1: f64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA_UPDATE2)]
    lambda_update2: f64,
    #[arg(long, default_value_t = DEFAULT_A)]
    a: f64,
    #[command(flatten)]
    anneal: AnnealArgs,
}

#[derive(Args, Debug)]
struct ServeArgs {
    /// Defaults to $QMAZE_ADDR or 127.0.0.1:8080.
    #[arg(long)]
    addr: Option<String>,
    /// Defaults to $QMAZE_DATA_DIR or ./qmaze-data.
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    qubo: QuboArgs,
    /// Add the update term of a freshly seeded update state.
    #[arg(long)]
    with_update: bool,
}

/// A failure before any work was done; exits with status 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn read_maze(path: &PathBuf) -> anyhow::Result<Maze> {
    let text = if path.as_os_str() == "-" {
        io::read_to_string(io::stdin())?
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    text.parse::<Maze>()
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn parse_range(text: &str) -> anyhow::Result<Vec<usize>> {
    let bad = || usage(format!("invalid N range `{text}`"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let t = text.trim();
    let split = [
        t.split_once("..="),
        t.split_once(".."),
        t.split_once(':'),
        t.split_once('-'),
    ]
    .into_iter()
    .flatten()
    .next();
    let values: Vec<usize> = match split {
        Some((lo, hi)) => (num(lo)?..=num(hi)?).collect(),
        None => t.split(',').map(num).collect::<Result<_, _>>()?,
    };
    Ok(values)
}

fn parse_profile(text: &str) -> anyhow::Result<BotProfile> {
    let mut p = BotProfile::default();
    for part in text.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| usage(format!("profile entry `{part}` is not key=value")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| usage(format!("profile value `{v}` is not a number")))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(usage(format!("profile value `{v}` must be non-negative")));
        }
        match k.trim() {
            "c" => p.c = v,
            "sigma" => p.sigma = v,
            "min" | "min_time" => p.min_time = v,
            other => return Err(usage(format!("unknown profile key `{other}`"))),
        }
    }
    Ok(p)
}

fn check_lambdas(q: &QuboArgs) -> anyhow::Result<()> {
    if !(q.lambda1 > 0.0 && q.lambda2 > 0.0) {
        return Err(usage("penalty weights must be positive"));
    }
    Ok(())
}

fn render(maze: &Maze, json: bool) -> String {
    if json {
        maze.to_json()
    } else {
        maze.render_ascii()
    }
}

/// The rendered output and whether the command's check passed.
fn run(cli: &Cli) -> anyhow::Result<(String, bool)> {
    let json = cli.json;
    match &cli.command {
        Command::Generate(args) => {
            check_lambdas(&args.qubo)?;
            let n = args.qubo.n as usize;
            let maze = match args.algo {
                Algo::Bar => Algorithm::BarTipping.generate(n, cli.seed)?,
                Algo::Wall => Algorithm::WallExtending.generate(n, cli.seed)?,
                Algo::Hunt => Algorithm::HuntAndKill.generate(n, cli.seed)?,
                Algo::QuboSa | Algo::QuboSqa => {
                    let sampler = if matches!(args.algo, Algo::QuboSa) {
                        Sampler::Sa
                    } else {
                        Sampler::Sqa
                    };
                    let base = QuboProblem::base(n, args.qubo.lambda1, args.qubo.lambda2)?;
                    next_maze(None, &base, sampler, &args.anneal.params(cli.seed))?.maze
                }
            };
            Ok((render(&maze, json), true))
        }
        Command::Validate(args) => {
            let maze = read_maze(&args.input)?;
            let report = maze.validate();
            let text = if json {
                serde_json::to_string_pretty(&report)?
            } else {
                let mut out = format!(
                    "perfect: {}\npath cells: {}\nedges: {}\nconnected: {}",
                    report.is_perfect, report.path_cell_count, report.edge_count, report.connected
                );
                for v in &report.violations {
                    out.push_str(&format!("\nviolation: {}", serde_json::to_string(v)?));
                }
                out
            };
            Ok((text, report.is_perfect))
        }
        Command::Solve(args) => {
            let maze = read_maze(&args.input)?;
            let path = maze.shortest_path()?;
            if json {
                Ok((serde_json::to_string(&path)?, true))
            } else {
                let mut grid: Vec<Vec<char>> = maze
                    .render_ascii()
                    .lines()
                    .map(|l| l.chars().collect())
                    .collect();
                for &(r, c) in &path[1..path.len() - 1] {
                    grid[r][c] = '*';
                }
                let drawn: Vec<String> =
                    grid.into_iter().map(|r| r.into_iter().collect()).collect();
                Ok((
                    format!("length: {}\n{}", path.len(), drawn.join("\n")),
                    true,
                ))
            }
        }
        Command::Bench(args) => {
            let solvers = args
                .solvers
                .iter()
                .map(|s| s.parse::<Solver>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| usage(e.to_string()))?;
            let cfg = BenchConfig {
                solvers,
                n_values: parse_range(&args.n_range)?,
                reps: args.reps,
                anneal: args.anneal.params(cli.seed),
                seed: cli.seed,
            };
            cfg.validate().map_err(|e| usage(e.to_string()))?;
            let rows = benchmark::run_scaling_bench(&cfg)?;
            let mut buf = Vec::new();
            benchmark::write_csv(&rows, &mut buf)?;
            if let Some(path) = &args.csv {
                fs::write(path, &buf).with_context(|| format!("writing {}", path.display()))?;
            }
            if json {
                Ok((serde_json::to_string_pretty(&rows)?, true))
            } else {
                Ok((String::from_utf8(buf)?.trim_end().to_string(), true))
            }
        }
        Command::Fit(args) => {
            let file = fs::File::open(&args.input)
                .with_context(|| format!("reading {}", args.input.display()))?;
            let rows = benchmark::read_csv(file).map_err(|e| usage(e.to_string()))?;
            let solver = match &args.solver {
                Some(s) => Some(s.parse::<Solver>().map_err(|e| usage(e.to_string()))?),
                None => None,
            };
            let selected: Vec<_> = rows
                .iter()
                .filter(|r| solver.is_none_or(|s| r.solver == s))
                .collect();
            let first = selected
                .first()
                .ok_or_else(|| usage("no rows to fit"))?
                .solver;
            if selected.iter().any(|r| r.solver != first) {
                return Err(usage(
                    "the CSV holds several solvers; pick one with --solver",
                ));
            }
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for r in selected {
                let y = match args.column {
                    Column::Mean => Some(r.mean_seconds),
                    Column::Tts => r.tts_seconds,
                };
                if let Some(y) = y {
                    xs.push(r.n as f64);
                    ys.push(y);
                }
            }
            let fit =
                benchmark::fit_poly(&xs, &ys, args.degree).map_err(|e| usage(e.to_string()))?;
            if json {
                Ok((fit.to_json(), true))
            } else {
                let mut out = format!(
                    "solver: {first}\ndegree: {}\npoints: {}",
                    fit.degree,
                    xs.len()
                );
                for k in (0..fit.coefficients.len()).rev() {
                    out.push_str(&format!(
                        "\nx^{k}: {:.6e} ± {:.6e} (95% CI {:.6e} .. {:.6e}, t = {:.2})",
                        fit.coefficients[k],
                        fit.stderr[k],
                        fit.ci95[k].0,
                        fit.ci95[k].1,
                        fit.t_statistic(k)
                    ));
                }
                Ok((out, true))
            }
        }
        Command::BotRun(args) => {
            let profile = parse_profile(&args.profile)?;
            let params = SessionParams {
                lambda_update1: args.lambda_update1,
                lambda_update2: args.lambda_update2,
                a: args.a,
                anneal: args.anneal.params(cli.seed),
                update_enabled: !args.no_update,
                set_size: args.mazes as usize,
                seed: cli.seed,
                ..SessionParams::default()
            };
            params.validate().map_err(|e| usage(e.to_string()))?;
            let report = run_bot_set(args.n as usize, params, &profile, cli.seed)?;
            if json {
                Ok((
                    serde_json::to_string_pretty(&serde_json::json!({
                        "stats": report.stats,
                        "all_perfect": report.all_perfect,
                    }))?,
                    report.all_perfect,
                ))
            } else {
                let s = &report.stats;
                let fmt = |v: &[f64]| {
                    v.iter()
                        .map(|x| format!("{x:.3}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                };
                let text = format!(
                    "mazes: {}\nall perfect: {}\nupdates: {}\nsolve times: {}\nsma increase rate: {}\npath lengths: {:?}\nfallback levels: {:?}",
                    s.mazes_completed,
                    report.all_perfect,
                    s.updates,
                    fmt(&s.solve_times),
                    fmt(&s.sma_increase_rate),
                    s.path_lengths,
                    s.fallback_levels
                );
                Ok((text, report.all_perfect))
            }
        }
        Command::Serve(args) => {
            let mut config = qmaze_service::Config::from_env().map_err(|e| usage(e.to_string()))?;
            if let Some(addr) = &args.addr {
                config.addr = addr
                    .parse()
                    .map_err(|_| usage(format!("invalid address `{addr}`")))?;
            }
            if let Some(dir) = &args.data_dir {
                config.data_dir = dir.clone();
            }
            tokio::runtime::Runtime::new()?.block_on(qmaze_service::serve(config))?;
            Ok((String::new(), true))
        }
        Command::ExportQubo(args) => {
            check_lambdas(&args.qubo)?;
            let n = args.qubo.n as usize;
            let mut q = QuboProblem::base(n, args.qubo.lambda1, args.qubo.lambda2)?;
            if args.with_update {
                let state = UpdateState::init(
                    n,
                    DEFAULT_A,
                    DEFAULT_LAMBDA_UPDATE1,
                    DEFAULT_LAMBDA_UPDATE2,
                    cli.seed,
                )?;
                q = q.with_update(&state)?;
            }
            Ok((q.to_coo().trim_end().to_string(), true))
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok((text, passed)) => {
            let result = match &cli.out {
                Some(path) => fs::write(path, format!("{text}\n"))
                    .map_err(|e| anyhow!("writing {}: {e}", path.display())),
                None if text.is_empty() => Ok(()),
                None => match writeln!(io::stdout(), "{text}") {
                    Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
                    other => other.map_err(Into::into),
                },
            };
            match result {
                Ok(()) if passed => ExitCode::SUCCESS,
                Ok(()) => ExitCode::from(1),
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<Usage>() { 2 } else { 1 })
        }
    }
}
