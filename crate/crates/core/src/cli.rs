//! Command-line entry point.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::engine::GameId;
use crate::error::{Error, Result};
use crate::evalharness::{evaluate_pool, ne_vs_toys_report, reference_ne, EvalMode, NeVsToysOptions, PoolReport};
use crate::net::{default_loss_spec, grad_check, NetConfig, Params, SyntheticBatch};
use crate::oracle::best_response;
use crate::policy::Policy;
use crate::solver::{cfr_solve, exact_ev, exploitability, kuhn_ne_profile, PolicyTable, KUHN_ALPHA_MAX};
use crate::toys::{pool, PoolTag};
use crate::trainer::{train, TrainConfig};

#[derive(Parser, Debug)]
#[command(name = "pokerlab", version, about = "Kuhn and Leduc poker lab")]
pub struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GameArg {
    Kuhn,
    Leduc,
}

impl From<GameArg> for GameId {
    fn from(g: GameArg) -> GameId {
        match g {
            GameArg::Kuhn => GameId::Kuhn,
            GameArg::Leduc => GameId::Leduc,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PoolArg {
    Id,
    Ood,
    All,
}

impl PoolArg {
    fn tags(self) -> Vec<PoolTag> {
        match self {
            PoolArg::Id => vec![PoolTag::Id],
            PoolArg::Ood => vec![PoolTag::Ood],
            PoolArg::All => vec![PoolTag::Id, PoolTag::Ood],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exploiter,
    Masked,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Equilibrium strategy table and its exploitability.
    Solve {
        #[arg(long, value_enum)]
        game: GameArg,
        /// Kuhn equilibrium parameter in [0, 1/3].
        #[arg(long, conflicts_with = "cfr_iters")]
        alpha: Option<f64>,
        /// Run CFR for this many iterations.
        #[arg(long)]
        cfr_iters: Option<u64>,
    },
    /// Best-response ceilings of the toy pools.
    BrTable {
        #[arg(long, value_enum)]
        game: GameArg,
        #[arg(long, value_enum, default_value = "all")]
        pool: PoolArg,
    },
    /// Equilibrium reward against every toy, by seat.
    NeVsToys {
        #[arg(long, value_enum)]
        game: GameArg,
        /// Kuhn equilibrium parameter.
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// Leduc Monte-Carlo hands per matchup.
        #[arg(long, default_value_t = 20_000)]
        hands: usize,
        #[arg(long, default_value_t = 1_000_000)]
        cfr_iters: u64,
        /// Add exact Leduc expectations next to the sampled ones.
        #[arg(long)]
        exact: bool,
    },
    /// PPO league training.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a checkpoint against a toy pool.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        pool: PoolArg,
        #[arg(long, value_enum, default_value = "exploiter")]
        mode: ModeArg,
        #[arg(long, default_value_t = 2000)]
        hands: usize,
        /// Seeds pooled per toy, starting at --seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value_t = 100)]
        session_len: usize,
    },
    /// Compare analytic gradients with central differences.
    Gradcheck {
        #[arg(long, value_enum)]
        game: GameArg,
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Hands in the synthetic session.
        #[arg(long, default_value_t = 6)]
        hands: usize,
    },
}

/// Parses `args` and runs the command. Returns the process exit code:
/// 0 on success, 2 for usage errors, 3 for invalid configuration, 1 otherwise.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.workers.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok(message) => {
            print!("{message}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::AlphaOutOfRange(_) => 3,
        _ => 1,
    }
}

fn write(out: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    let path = out.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Solve { game, alpha, cfr_iters } => solve(cli, (*game).into(), *alpha, *cfr_iters),
        Command::BrTable { game, pool } => br_table(cli, (*game).into(), *pool),
        Command::NeVsToys {
            game,
            alpha,
            hands,
            cfr_iters,
            exact,
        } => {
            let game: GameId = (*game).into();
            let opts = NeVsToysOptions {
                alpha: *alpha,
                cfr_iterations: *cfr_iters,
                hands: *hands,
                seed: cli.seed,
                exact_cross_check: *exact,
                ..NeVsToysOptions::default()
            };
            let ne = reference_ne(game, &opts)?;
            let table = ne_vs_toys_report(game, &ne, &opts)?;
            let csv = table.to_csv();
            write(&cli.out, &format!("ne_vs_toys_{game}.csv"), &csv)?;
            write(
                &cli.out,
                &format!("ne_vs_toys_{game}.json"),
                &serde_json::to_string_pretty(&table)?,
            )?;
            Ok(csv)
        }
        Command::Train { config } => {
            let mut config = TrainConfig::load(config).map_err(|e| match e {
                Error::Io(io) => Error::Config(format!("cannot read config: {io}")),
                other => other,
            })?;
            config.workers = cli.workers.max(1);
            let summary = train(&config, &cli.out)?;
            let mut s = format!(
                "trained {} epochs, {} checkpoints in {}\n",
                summary.metrics.len(),
                summary.checkpoints.len(),
                cli.out.display()
            );
            for (toy, r) in &summary.final_eval {
                let _ = writeln!(s, "{toy},{r:.6}");
            }
            Ok(s)
        }
        Command::Eval {
            checkpoint,
            pool,
            mode,
            hands,
            seeds,
            session_len,
        } => {
            let params = Params::load(checkpoint)?;
            let mode = match mode {
                ModeArg::Exploiter => EvalMode::Exploiter,
                ModeArg::Masked => EvalMode::Masked,
            };
            let seed_list: Vec<u64> = (0..*seeds).map(|i| cli.seed + i).collect();
            let mut csv = String::new();
            let mut reports: Vec<PoolReport> = Vec::new();
            for tag in pool.tags() {
                let r = evaluate_pool(&params, tag, mode, *hands, &seed_list, *session_len)?;
                let body = r.to_csv();
                if csv.is_empty() {
                    csv.push_str(&body);
                } else {
                    csv.push_str(body.split_once('\n').map_or("", |(_, rest)| rest));
                }
                reports.push(r);
            }
            let stem = format!("eval_{}_{}", params.config().game, mode.name());
            write(&cli.out, &format!("{stem}.csv"), &csv)?;
            write(&cli.out, &format!("{stem}.json"), &serde_json::to_string_pretty(&reports)?)?;
            Ok(csv)
        }
        Command::Gradcheck {
            game,
            epsilon,
            samples,
            hands,
        } => {
            let game: GameId = (*game).into();
            let params = Params::init(&NetConfig::for_game(game), cli.seed)?;
            let batch = SyntheticBatch::generate(&params, *hands, cli.seed)?;
            let err = grad_check(&params, &batch.minibatch(), &default_loss_spec(game), *epsilon, *samples, cli.seed)?;
            let line = format!("{game},{samples},{epsilon:e},{err:.6e}\n");
            write(
                &cli.out,
                &format!("gradcheck_{game}.csv"),
                &format!("game,coordinates,epsilon,max_rel_error\n{line}"),
            )?;
            Ok(line)
        }
    }
}

fn solve(cli: &Cli, game: GameId, alpha: Option<f64>, cfr_iters: Option<u64>) -> Result<String> {
    if alpha.is_some() && game != GameId::Kuhn {
        return Err(Error::Config("--alpha applies to kuhn only".into()));
    }
    let (table, method): (PolicyTable, String) = match (game, cfr_iters) {
        (_, Some(n)) => (cfr_solve(game, n)?.0, format!("cfr,{n}")),
        (GameId::Kuhn, None) => {
            let a = alpha.unwrap_or(KUHN_ALPHA_MAX);
            (kuhn_ne_profile(a)?, format!("closed_form,{a}"))
        }
        (GameId::Leduc, None) => (cfr_solve(game, 1_000_000)?.0, "cfr,1000000".into()),
    };
    let value = exact_ev(game, &table, &table, 0)?;
    let expl = exploitability(game, &table)?;
    write(&cli.out, &format!("solve_{game}.csv"), &table.to_csv())?;
    let summary = format!("game,method,parameter,first_actor_value,exploitability\n{game},{method},{value:.6},{expl:.6}\n");
    write(&cli.out, &format!("solve_{game}_summary.csv"), &summary)?;
    Ok(summary)
}

fn br_table(cli: &Cli, game: GameId, which: PoolArg) -> Result<String> {
    let mut csv = String::from("toy_id,br_ceiling,pool,br_first,br_second,note\n");
    for tag in which.tags() {
        let mut rows = Vec::new();
        for toy in pool(game, tag) {
            if !toy.is_stationary() {
                rows.push((toy.id.clone(), None, "non-stationary"));
                continue;
            }
            let first = best_response(game, toy, 0)?.value;
            let second = best_response(game, toy, 1)?.value;
            rows.push((toy.id.clone(), Some((0.5 * (first + second), first, second)), ""));
        }
        rows.sort_by(|a, b| {
            let key = |r: &Option<(f64, f64, f64)>| r.map_or(f64::NEG_INFINITY, |v| v.0);
            key(&b.1).total_cmp(&key(&a.1))
        });
        for (id, v, note) in rows {
            match v {
                Some((c, f, s)) => {
                    let _ = writeln!(csv, "{id},{c:.6},{},{f:.6},{s:.6},{note}", tag.name());
                }
                None => {
                    let _ = writeln!(csv, "{id},,{},,,{note}", tag.name());
                }
            }
        }
    }
    write(&cli.out, &format!("br_table_{game}.csv"), &csv)?;
    Ok(csv)
}
