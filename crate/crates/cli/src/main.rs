//! `gridauth` command line.
//!
//! Exit codes: 0 success, 1 authentication or self-test failure, 2
//! configuration error, 3 account locked, 4 transport error.

mod client;
mod simulate;

use std::fs;
use std::io::{IsTerminal, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use gridauth_core::key::{decode_ssr, encode_ssr};
use gridauth_core::protocol::{enter_key, EntryError, LoginOutcome};
use gridauth_core::sim::{to_csv, to_text, GuessOrder, ObserverModel, SummaryRow};
use gridauth_core::{
    os_entropy, selftest, AccountStore, Clock, KeyNumber, LockoutPolicy, ServerCalendar, StoreKey, SystemClock,
    Username,
};
use gridauth_service::{AuthService, ServiceConfig};

use crate::client::{ClientError, HttpEndpoint};
use crate::simulate::BruteforceParams;

#[derive(Debug, Parser)]
#[command(name = "gridauth", version, about = "Image-grid PIN authentication server and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the HTTP login service.
    Serve(ServeArgs),
    /// Create an account and print its key once.
    Register(RegisterArgs),
    /// Log in headlessly against a running server.
    Login(LoginArgs),
    /// Run attack simulations and print a summary table.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Check the key transform and grid generator.
    Selftest(SelftestArgs),
    /// Print a fresh random store key as hex.
    Keygen,
}

#[derive(Debug, Args)]
struct StoreArgs {
    /// Credential store file.
    #[arg(long, env = "GRIDAUTH_STORE_PATH", default_value = "gridauth.store")]
    store: PathBuf,
    /// 128-bit store key as 32 hex characters.
    #[arg(long, env = "GRIDAUTH_STORE_KEY", hide_env_values = true)]
    store_key: Option<String>,
    /// File holding the store key, used when no key is given directly.
    #[arg(long, env = "GRIDAUTH_STORE_KEY_FILE")]
    store_key_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PolicyArgs {
    #[arg(long, default_value_t = 5)]
    lockout_threshold: u32,
    #[arg(long, default_value_t = 1800)]
    lockout_window_secs: u32,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    bind: std::net::IpAddr,
    /// 0 picks a free port; the bound port is logged.
    #[arg(long, env = "GRIDAUTH_PORT", default_value_t = 8080)]
    port: u16,
    #[command(flatten)]
    store: StoreArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long, default_value_t = 120)]
    session_ttl_secs: u32,
    /// IANA zone whose calendar day drives the key transform.
    #[arg(long, env = "GRIDAUTH_TIMEZONE", default_value = "UTC")]
    timezone: String,
}

#[derive(Debug, Args)]
struct RegisterArgs {
    username: String,
    /// Register through a running server instead of opening the store file.
    #[arg(long)]
    url: Option<String>,
    #[command(flatten)]
    store: StoreArgs,
}

#[derive(Debug, Args)]
struct LoginArgs {
    username: String,
    #[arg(long)]
    key: String,
    /// Enter the day-shifted form of the key instead of the key itself.
    #[arg(long)]
    ssr: bool,
    #[arg(long, env = "GRIDAUTH_URL", default_value = "http://127.0.0.1:8080")]
    url: String,
    /// Zone used to pick the day for --ssr; should match the server.
    #[arg(long, env = "GRIDAUTH_TIMEZONE", default_value = "UTC")]
    timezone: String,
}

#[derive(Debug, Subcommand)]
enum SimulateCommand {
    /// Shoulder-surfing observer who watches logins and guesses the key.
    Observer(ObserverArgs),
    /// Online guessing through the click API under lockout.
    Bruteforce(BruteforceArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    ClickOnly,
    FullSnapshot,
    KCell,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OrderArg {
    Sequential,
    Shuffled,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
enum FormatArg {
    #[default]
    Csv,
    Text,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ObserverArgs {
    #[arg(long, value_enum, required = true, value_delimiter = ',')]
    model: Vec<ModelArg>,
    /// Header cells recalled per step for k-cell, one row per value.
    #[arg(long, value_delimiter = ',', default_values_t = [0u32, 2, 4, 6, 8, 10])]
    k: Vec<u32>,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct BruteforceArgs {
    #[arg(long, value_enum, default_value_t = OrderArg::Shuffled)]
    order: OrderArg,
    /// Lockout windows the attacker is willing to wait through.
    #[arg(long, default_value_t = 48)]
    windows: u32,
    #[arg(long, default_value_t = 200)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    policy: PolicyArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Swap in a broken decoder to prove the check catches it.
    #[arg(long, hide = true)]
    corrupt_decode: bool,
}

#[derive(Debug)]
enum Failure {
    Auth(String),
    Config(anyhow::Error),
    Locked(u64),
    Transport(String),
    Other(anyhow::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Auth(_) | Failure::Other(_) => 1,
            Failure::Config(_) => 2,
            Failure::Locked(_) => 3,
            Failure::Transport(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Auth(m) | Failure::Transport(m) => f.write_str(m),
            Failure::Config(e) | Failure::Other(e) => write!(f, "{e:#}"),
            Failure::Locked(secs) => write!(f, "account locked, retry after {secs} seconds"),
        }
    }
}

fn config(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // Simulations drive thousands of in-process lockouts; keep them quiet.
    init_tracing(if matches!(cli.command, Command::Serve(_)) { "info" } else { "error" });
    let result = match cli.command {
        Command::Serve(args) => serve(args),
        Command::Register(args) => register(args),
        Command::Login(args) => login(args),
        Command::Simulate(SimulateCommand::Observer(args)) => observer(args),
        Command::Simulate(SimulateCommand::Bruteforce(args)) => bruteforce(args),
        Command::Selftest(args) => run_selftest(args),
        Command::Keygen => keygen(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("gridauth: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}

fn init_tracing(default_level: &str) {
    let filter = tracing_subscriber::EnvFilter::try_from_env("GRIDAUTH_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_level));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
}

fn load_store_key(args: &StoreArgs) -> Result<StoreKey, Failure> {
    let hex_key = match (&args.store_key, &args.store_key_file) {
        (Some(k), _) => k.clone(),
        (None, Some(path)) => fs::read_to_string(path)
            .with_context(|| format!("reading store key file {}", path.display()))
            .map_err(Failure::Config)?,
        (None, None) => {
            return Err(config(anyhow::anyhow!(
                "no store key; set GRIDAUTH_STORE_KEY or pass --store-key (generate one with `gridauth keygen`)"
            )))
        }
    };
    StoreKey::from_hex(hex_key.trim()).context("invalid store key").map_err(Failure::Config)
}

fn policy(args: &PolicyArgs) -> Result<LockoutPolicy, Failure> {
    if args.lockout_threshold == 0 {
        return Err(config(anyhow::anyhow!("--lockout-threshold must be at least 1")));
    }
    Ok(LockoutPolicy {
        threshold: args.lockout_threshold,
        window: chrono::Duration::seconds(i64::from(args.lockout_window_secs)),
    })
}

fn calendar(name: &str) -> Result<ServerCalendar, Failure> {
    ServerCalendar::from_name(name).map_err(|e| config(anyhow::anyhow!(e)))
}

fn open_store(args: &StoreArgs, policy: LockoutPolicy) -> Result<AccountStore, Failure> {
    let key = load_store_key(args)?;
    AccountStore::open(&args.store, &key, policy)
        .with_context(|| format!("opening store {}", args.store.display()))
        .map_err(Failure::Config)
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let policy = policy(&args.policy)?;
    let config = ServiceConfig {
        session_ttl: chrono::Duration::seconds(i64::from(args.session_ttl_secs.max(1))),
        calendar: calendar(&args.timezone)?,
    };
    let store = Arc::new(open_store(&args.store, policy)?);
    let rng = os_entropy().map_err(config_err)?;
    let service = Arc::new(AuthService::new(store, Arc::new(SystemClock), config, rng));

    let runtime = tokio::runtime::Runtime::new().map_err(config_err)?;
    runtime.block_on(async move {
        let addr = SocketAddr::new(args.bind, args.port);
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))
            .map_err(Failure::Config)?;
        let local = listener.local_addr().map_err(config_err)?;
        tracing::info!(
            "listening on http://{local} (port {}, store {}, timezone {})",
            local.port(),
            args.store.store.display(),
            args.timezone
        );
        gridauth_service::serve(listener, service, shutdown_signal())
            .await
            .context("server error")
            .map_err(Failure::Other)?;
        tracing::info!("shut down cleanly");
        Ok(())
    })
}

fn config_err(e: impl std::error::Error + Send + Sync + 'static) -> Failure {
    config(e)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutdown requested");
}

fn register(args: RegisterArgs) -> Result<(), Failure> {
    let key = match &args.url {
        Some(url) => HttpEndpoint::new(url).register(&args.username).map_err(client_failure)?,
        None => {
            let username: Username = args.username.parse().map_err(config)?;
            let store = open_store(&args.store, LockoutPolicy::default())?;
            let mut rng = os_entropy().map_err(config_err)?;
            let key = store.register(&username, SystemClock.now(), &mut rng).map_err(|e| Failure::Other(e.into()))?;
            store.flush().map_err(|e| Failure::Other(e.into()))?;
            key
        }
    };
    println!("{key}");
    Ok(())
}

fn client_failure(e: ClientError) -> Failure {
    match e {
        ClientError::Transport(m) => Failure::Transport(m),
        ClientError::Status { status, message } if (400..500).contains(&status) => {
            Failure::Other(anyhow::anyhow!("rejected ({status}): {message}"))
        }
        e => Failure::Transport(e.to_string()),
    }
}

fn login(args: LoginArgs) -> Result<(), Failure> {
    let key: KeyNumber = args.key.parse().map_err(config)?;
    let entered = if args.ssr {
        let day = calendar(&args.timezone)?.day_of(SystemClock.now());
        encode_ssr(key, day)
    } else {
        key
    };
    let mut endpoint = HttpEndpoint::new(&args.url);
    match enter_key(&mut endpoint, &args.username, entered) {
        Ok(LoginOutcome::Succeeded) => {
            println!("login succeeded");
            Ok(())
        }
        Ok(LoginOutcome::Failed) => Err(Failure::Auth("login failed".into())),
        Ok(LoginOutcome::Locked { retry_after_secs }) => Err(Failure::Locked(retry_after_secs)),
        Err(EntryError::Endpoint(e)) => Err(client_failure(e)),
        Err(e @ EntryError::Protocol(_)) => Err(Failure::Transport(e.to_string())),
    }
}

fn observer_models(args: &ObserverArgs) -> Vec<ObserverModel> {
    let mut models = Vec::new();
    for m in &args.model {
        match m {
            ModelArg::ClickOnly => models.push(ObserverModel::ClickOnly),
            ModelArg::FullSnapshot => models.push(ObserverModel::FullSnapshot),
            ModelArg::KCell => models.extend(args.k.iter().map(|&k| ObserverModel::KCellRecall { k })),
        }
    }
    models
}

fn observer(args: ObserverArgs) -> Result<(), Failure> {
    if let Some(&k) = args.k.iter().find(|&&k| k > 10) {
        return Err(config(anyhow::anyhow!("--k {k} exceeds the 10 header cells")));
    }
    let rows = simulate::observer_rows(&observer_models(&args), args.trials, args.seed);
    emit(&render(&rows, args.output.format, None), args.output.out.as_deref())
}

fn bruteforce(args: BruteforceArgs) -> Result<(), Failure> {
    let params = BruteforceParams {
        order: match args.order {
            OrderArg::Sequential => GuessOrder::Sequential,
            OrderArg::Shuffled => GuessOrder::Shuffled,
        },
        windows: args.windows,
        trials: args.trials,
        seed: args.seed,
        policy: policy(&args.policy)?,
    };
    let summary = simulate::bruteforce(params).map_err(|e| Failure::Other(anyhow::anyhow!(e)))?;
    let footer = format!(
        "windows {}, mean attempts {:.1}, predicted success {:.6}\n",
        args.windows, summary.mean_attempts, summary.model
    );
    emit(&render(&[summary.row], args.output.format, Some(&footer)), args.output.out.as_deref())
}

fn render(rows: &[SummaryRow], format: FormatArg, footer: Option<&str>) -> String {
    match format {
        FormatArg::Csv => to_csv(rows),
        FormatArg::Text => {
            let mut s = to_text(rows);
            if let Some(f) = footer {
                s.push_str(f);
            }
            s
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display())).map_err(Failure::Other)
        }
        None => std::io::stdout().write_all(text.as_bytes()).context("writing stdout").map_err(Failure::Other),
    }
}

fn run_selftest(args: SelftestArgs) -> Result<(), Failure> {
    let mut rng = gridauth_core::sim::trial_rng(args.seed, 0);
    let result = if args.corrupt_decode {
        // Off by one on the last digit for one (key, day) pair.
        selftest::run_with_decoder(
            |entered, day| {
                let k = decode_ssr(entered, day);
                if k.value() == 4321 && day.get() == 13 {
                    KeyNumber::from_value(4320).expect("below key space")
                } else {
                    k
                }
            },
            &mut rng,
        )
    } else {
        selftest::run(&mut rng)
    };
    match result {
        Ok(report) => {
            println!("key transform: {} cases ok", report.ssr_cases);
            println!("grid layouts: {} cases ok", report.layout_cases);
            Ok(())
        }
        Err(failure) => Err(Failure::Auth(format!("selftest failed: {failure}"))),
    }
}

fn keygen() -> Result<(), Failure> {
    let mut rng = os_entropy().map_err(config_err)?;
    println!("{}", StoreKey::generate(&mut rng).to_hex());
    Ok(())
}
