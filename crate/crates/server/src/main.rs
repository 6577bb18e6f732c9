use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use teval_core::auth::PasswordHash;
use teval_core::store::SyncPolicy;
use teval_core::Store;
use teval_server::{build_state, serve, ServerConfig};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "teval-server", version, about = "Teaching-evaluation questionnaire service")]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    serve: ServeArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service (the default).
    Serve(ServeArgs),
    /// Replay a store file and report integrity violations.
    Check {
        #[arg(long, env = "TEVAL_STORE_PATH")]
        store_path: PathBuf,
    },
    /// Print a password hash suitable for --admin-pass-hash.
    HashPassword {
        #[arg(long, env = "TEVAL_PASSWORD")]
        password: String,
    },
}

#[derive(Args, Clone)]
struct ServeArgs {
    #[arg(long, env = "TEVAL_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, env = "TEVAL_BIND", default_value = "127.0.0.1")]
    bind: IpAddr,
    /// Store file. Without it everything is kept in memory.
    #[arg(long, env = "TEVAL_STORE_PATH")]
    store_path: Option<PathBuf>,
    /// JSON question bank. Without it the bundled sample is used.
    #[arg(long, env = "TEVAL_QUESTIONS_FILE")]
    questions_file: Option<PathBuf>,
    #[arg(long, env = "TEVAL_QUESTION_COUNT", default_value_t = teval_core::model::DEFAULT_QUESTION_COUNT)]
    question_count: usize,
    #[arg(long, env = "TEVAL_ADMIN_USER", default_value = "admin")]
    admin_user: String,
    /// Output of `teval-server hash-password`. Admin login is disabled without it.
    #[arg(long, env = "TEVAL_ADMIN_PASS_HASH")]
    admin_pass_hash: Option<PasswordHash>,
    /// Take the client address from X-Forwarded-For.
    #[arg(long, env = "TEVAL_TRUST_PROXY_HEADER")]
    trust_proxy_header: bool,
    #[arg(long, env = "TEVAL_DEADLINE_SECONDS")]
    deadline_seconds: Option<u64>,
    #[arg(long, env = "TEVAL_STATIC_DIR")]
    static_dir: Option<PathBuf>,
    /// Skip fsync after each write.
    #[arg(long, env = "TEVAL_NO_FSYNC")]
    no_fsync: bool,
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let cli = Cli::parse();
    match cli.command {
        None => run(cli.serve).await,
        Some(Command::Serve(args)) => run(args).await,
        Some(Command::Check { store_path }) => check(store_path),
        Some(Command::HashPassword { password }) => {
            println!("{}", PasswordHash::new(&password));
            ExitCode::SUCCESS
        }
    }
}

async fn run(args: ServeArgs) -> ExitCode {
    let config = ServerConfig {
        store_path: args.store_path,
        questions_file: args.questions_file,
        question_count: args.question_count,
        admin_user: args.admin_user,
        admin_pass_hash: args.admin_pass_hash,
        trust_proxy_header: args.trust_proxy_header,
        deadline_seconds: args.deadline_seconds,
        static_dir: args.static_dir,
        sync: if args.no_fsync { SyncPolicy::OsBuffered } else { SyncPolicy::EveryWrite },
    };
    if config.admin_pass_hash.is_none() {
        tracing::warn!("no admin password hash configured; admin login is disabled");
    }
    let state = match build_state(&config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("teval-server: {e}");
            return ExitCode::FAILURE;
        }
    };
    let addr = SocketAddr::new(args.bind, args.port);
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("teval-server: cannot bind {addr}: {e}");
            return ExitCode::FAILURE;
        }
    };
    tracing::info!("listening on {addr}");
    match serve(listener, state).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("teval-server: {e}");
            ExitCode::FAILURE
        }
    }
}

fn check(path: PathBuf) -> ExitCode {
    let store = match Store::open(&path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("teval-server: {}: {e}", path.display());
            return ExitCode::FAILURE;
        }
    };
    let health = store.health();
    let report = store.integrity_scan();
    println!(
        "{}: {} records, {} sessions, {} answers, {} bytes recovered from tail",
        path.display(),
        health.records,
        report.sessions,
        report.answers,
        health.recovered_tail_bytes
    );
    for v in &report.violations {
        println!("violation: {v}");
    }
    if report.is_ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
