//! The `faultfabric` command line.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use faultfabric::fabric::resources::ResourceKind;
use faultfabric::faultengine::{FaultType, Pattern, Protocol, ProtocolFilter, Timing};
use faultfabric::orchestrator::{CampaignState, InjectionHandle, InjectionPhase, PlanDocument};
use faultfabric::{FaultSpec, ResourceId, TenantId, SEED_ENV, TOPOLOGY_ENV};

use crate::api::{ConfigFaultRequest, InjectRequest};
use crate::client::{Client, ClientError, DEFAULT_URL, URL_ENV};
use crate::server::{self, Embedded};

/// `println!` that ignores a closed stdout (e.g. piped into `head`).
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

pub const EXIT_API: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "faultfabric",
    version,
    about = "Fault injection over a simulated data-center fabric"
)]
pub struct Cli {
    /// Server base URL.
    #[arg(long, global = true, env = URL_ENV, default_value = DEFAULT_URL)]
    pub url: String,

    /// Run against an embedded server over this topology file (or bundled
    /// topology name) instead of `--url`.
    #[arg(long, global = true, value_name = "TOPOLOGY")]
    pub local: Option<String>,

    /// Simulated ms per wall ms for `--local`.
    #[arg(long, global = true, default_value_t = 1000.0)]
    pub local_speed: f64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the REST server.
    Serve(ServeArgs),
    /// Print a tenant's view of the topology.
    Topology {
        #[arg(long)]
        tenant: String,
    },
    /// Inject a traffic fault into a resource.
    Inject(InjectArgs),
    /// Delete a resource now and restore it after the outage.
    ConfigFault(ConfigFaultArgs),
    /// Show an injection.
    Injection { id: u64 },
    /// Clear an injection early.
    Clear { id: u64 },
    /// Campaign lifecycle.
    #[command(subcommand)]
    Plan(PlanCommand),
    /// Write a finished campaign's report bundle.
    Report {
        id: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Topology file, or a bundled topology name.
    #[arg(long, env = TOPOLOGY_ENV, default_value = "minimal")]
    pub topology: String,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Simulated ms per wall ms.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FaultArg {
    Loss,
    Delay,
    Corruption,
    Duplication,
    RateLimit,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PatternArg {
    Random,
    Persistent,
    Bursty,
    Degradation,
}

#[derive(Debug, Args)]
pub struct InjectArgs {
    /// network, subnet, router, floatingip or port.
    pub kind: ResourceKind,
    pub id: String,
    #[arg(long)]
    pub tenant: String,
    #[arg(long, value_enum)]
    pub fault: FaultArg,
    #[arg(long, default_value_t = 1.0)]
    pub intensity: f64,
    #[arg(long, value_enum, default_value = "persistent")]
    pub pattern: PatternArg,
    /// Bursty period.
    #[arg(long, default_value_t = 1000.0)]
    pub period: f64,
    /// Bursty on-fraction.
    #[arg(long, default_value_t = 0.5)]
    pub duty: f64,
    /// Delay amount in ms.
    #[arg(long, default_value_t = 100.0)]
    pub amount: f64,
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    /// Bytes flipped per corrupted packet.
    #[arg(long, default_value_t = 1)]
    pub bytes: usize,
    /// Rate limit in packets per second.
    #[arg(long, default_value_t = 100.0)]
    pub rate: f64,
    #[arg(long)]
    pub burst: Option<f64>,
    /// Only packets of this protocol (tcp or udp).
    #[arg(long)]
    pub protocol: Option<Protocol>,
    #[arg(long, requires = "protocol")]
    pub service_port: Option<u16>,
    #[arg(long, default_value_t = 0)]
    pub pre: u64,
    #[arg(long)]
    pub inject: u64,
    #[arg(long, default_value_t = 0)]
    pub post: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub wait: WaitArgs,
}

#[derive(Debug, Args)]
pub struct ConfigFaultArgs {
    pub kind: ResourceKind,
    pub id: String,
    #[arg(long)]
    pub tenant: String,
    /// Outage length in ms.
    #[arg(long)]
    pub outage: u64,
    #[command(flatten)]
    pub wait: WaitArgs,
}

#[derive(Debug, Args)]
pub struct WaitArgs {
    /// Block until the injection finishes.
    #[arg(long)]
    pub wait: bool,
    /// Give up waiting after this many wall-clock seconds.
    #[arg(long, default_value_t = 3600)]
    pub timeout: u64,
}

#[derive(Debug, Subcommand)]
pub enum PlanCommand {
    /// Start a campaign from a plan document, wait for it and save its report.
    Run {
        file: PathBuf,
        /// Report directory; defaults to `report-<id>`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 3600)]
        timeout: u64,
    },
    Status {
        id: u64,
    },
    Stop {
        id: u64,
    },
}

enum Failure {
    Usage(String),
    Api(String),
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        Failure::Api(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Api(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_API)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    if let Command::Serve(args) = &cli.command {
        return serve(args);
    }
    // Keep the embedded server alive for the whole command.
    let embedded = match &cli.local {
        Some(source) => {
            let topology = server::load_topology(source).map_err(Failure::Usage)?;
            let state = server::orchestrator(&topology, faultfabric::seed_from_env()).map_err(Failure::Usage)?;
            Some(Embedded::start(state, cli.local_speed).map_err(|e| Failure::Api(e.to_string()))?)
        }
        None => None,
    };
    let url = embedded.as_ref().map(Embedded::url).unwrap_or(cli.url);
    let client = Client::new(&url);

    match cli.command {
        Command::Serve(_) => unreachable!(),
        Command::Topology { tenant } => {
            let graph = client.topology(&tenant)?;
            out!("{}", serde_json::to_string_pretty(&graph).expect("graph serializes"));
        }
        Command::Inject(args) => {
            let kind = args.kind;
            let req = InjectRequest {
                tenant_id: TenantId::new(&args.tenant),
                id: ResourceId::new(&args.id),
                spec: fault_spec(&args),
            };
            let handle = client.inject(kind, &req)?;
            report_handle(&client, handle, &args.wait)?;
        }
        Command::ConfigFault(args) => {
            let req = ConfigFaultRequest {
                tenant_id: TenantId::new(&args.tenant),
                kind: args.kind,
                id: ResourceId::new(&args.id),
                outage_ms: args.outage,
            };
            let handle = client.config_fault(&req)?;
            report_handle(&client, handle, &args.wait)?;
        }
        Command::Injection { id } => print_json(&client.injection(id)?),
        Command::Clear { id } => print_json(&client.clear(id)?),
        Command::Plan(PlanCommand::Run { file, out, timeout }) => {
            let text =
                std::fs::read_to_string(&file).map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))?;
            let plan: PlanDocument =
                serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))?;
            let id = client.start_campaign(&plan)?;
            eprintln!("campaign {id} started");
            let deadline = Instant::now() + Duration::from_secs(timeout);
            let mut backoff = Backoff::new();
            let status = loop {
                let status = client.campaign(id)?;
                if matches!(status.state, CampaignState::Finished | CampaignState::Stopped) {
                    break status;
                }
                if Instant::now() >= deadline {
                    return Err(Failure::Api(format!("campaign {id} still running after {timeout} s")));
                }
                backoff.sleep();
            };
            let dir = out.unwrap_or_else(|| PathBuf::from(format!("report-{id}")));
            write_report(&client, id, &dir)?;
            eprintln!("campaign {id} {}", state_name(&status.state));
            out!("{}", dir.display());
        }
        Command::Plan(PlanCommand::Status { id }) => print_json(&client.campaign(id)?),
        Command::Plan(PlanCommand::Stop { id }) => print_json(&client.stop_campaign(id)?),
        Command::Report { id, out } => {
            write_report(&client, id, &out)?;
            out!("{}", out.display());
        }
    }
    Ok(())
}

fn serve(args: &ServeArgs) -> CliResult {
    let topology = server::load_topology(&args.topology).map_err(Failure::Usage)?;
    let state = server::orchestrator(&topology, args.seed).map_err(Failure::Usage)?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Api(e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.addr)
            .await
            .map_err(|e| Failure::Usage(format!("{}: {e}", args.addr)))?;
        let _driver = server::Driver::spawn(state.clone(), args.speed);
        eprintln!(
            "serving on http://{}",
            listener.local_addr().map_err(|e| Failure::Api(e.to_string()))?
        );
        server::serve(listener, state)
            .await
            .map_err(|e| Failure::Api(e.to_string()))
    })
}

fn fault_spec(a: &InjectArgs) -> FaultSpec {
    let fault_type = match a.fault {
        FaultArg::Loss => FaultType::Loss,
        FaultArg::Delay => FaultType::Delay {
            amount_ms: a.amount,
            jitter_ms: a.jitter,
        },
        FaultArg::Corruption => FaultType::Corruption {
            bytes_affected: a.bytes,
        },
        FaultArg::Duplication => FaultType::Duplication,
        FaultArg::RateLimit => FaultType::RateLimit {
            rate_pkts_per_s: a.rate,
            burst_pkts: a.burst,
        },
    };
    let pattern = match a.pattern {
        PatternArg::Random => Pattern::Random,
        PatternArg::Persistent => Pattern::Persistent,
        PatternArg::Bursty => Pattern::Bursty {
            period_ms: a.period,
            duty_fraction: a.duty,
        },
        PatternArg::Degradation => Pattern::Degradation,
    };
    FaultSpec {
        fault_type,
        intensity: a.intensity,
        pattern,
        protocol_filter: a.protocol.map(|protocol| ProtocolFilter {
            protocol,
            service_port: a.service_port,
        }),
        timing: Timing {
            pre_ms: a.pre,
            inject_ms: a.inject,
            post_ms: a.post,
        },
        seed: a.seed,
    }
}

/// Prints the handle id, or with `--wait` polls until it is terminal and
/// prints the final handle.
fn report_handle(client: &Client, handle: InjectionHandle, wait: &WaitArgs) -> CliResult {
    if !wait.wait {
        out!("{}", handle.id);
        return Ok(());
    }
    let id = handle.id;
    let deadline = Instant::now() + Duration::from_secs(wait.timeout);
    let mut backoff = Backoff::new();
    let mut handle = handle;
    while !handle.phase.is_terminal() {
        if Instant::now() >= deadline {
            return Err(Failure::Api(format!(
                "injection {id} still {:?} after {} s",
                handle.phase, wait.timeout
            )));
        }
        backoff.sleep();
        handle = client.injection(id)?;
    }
    print_json(&handle);
    match handle.phase {
        InjectionPhase::Completed => Ok(()),
        _ => Err(Failure::Api(format!(
            "injection {id} aborted: {}",
            handle.error.as_deref().unwrap_or("no reason given")
        ))),
    }
}

fn write_report(client: &Client, id: u64, dir: &std::path::Path) -> CliResult {
    let bundle = client.report(id)?;
    bundle
        .write_to(dir)
        .map_err(|e| Failure::Api(format!("{}: {e}", dir.display())))
}

fn print_json<T: serde::Serialize>(value: &T) {
    out!("{}", serde_json::to_string_pretty(value).expect("value serializes"));
}

fn state_name(s: &CampaignState) -> &'static str {
    match s {
        CampaignState::Pending => "pending",
        CampaignState::Running { .. } => "running",
        CampaignState::Stopped => "stopped",
        CampaignState::Finished => "finished",
    }
}

/// Poll interval doubling from 20 ms up to 500 ms.
struct Backoff(Duration);

impl Backoff {
    fn new() -> Self {
        Backoff(Duration::from_millis(20))
    }

    fn sleep(&mut self) {
        std::thread::sleep(self.0);
        self.0 = (self.0 * 2).min(Duration::from_millis(500));
    }
}
