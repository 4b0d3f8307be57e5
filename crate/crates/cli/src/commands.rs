//! Argument definitions and the body of each subcommand.

use std::io::Write;
use std::net::{SocketAddr, TcpListener};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jingbing::paillier::DEFAULT_KEY_BITS;
use jingbing::pki::{
    generate_signing_key, read_cert, read_secret_key, unix_now, write_cert, write_secret_key,
    CertificateAuthority, Identity, TranscriptRecord, Validity,
};
use jingbing::protocol::{AggregationSpec, ClientOptions, Limits, ProtocolOutput, SpecEntry};
use jingbing::transport::{run_client, serve, ClientConfig, ServerConfig, DEFAULT_IO_TIMEOUT};
use log::info;
use rand::rngs::OsRng;

use crate::data::{load_dataset, load_id_set};
use crate::error::{Category, CliError};
use crate::gendata::{gen_data, GenParams};

const DAY: u64 = 24 * 3600;

#[derive(Debug, Parser)]
#[command(
    name = "jingbing",
    version,
    about = "Authenticated private intersection-sum between two parties"
)]
pub struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Manage the certificate authority.
    #[command(subcommand)]
    Ca(CaCommand),
    /// Write a seeded synthetic client/server dataset pair and the expected results.
    Gendata(GendataArgs),
    /// Answer intersection queries over an identifier set until interrupted.
    Server(ServerArgs),
    /// Run one intersection query against a server.
    Client(ClientArgs),
    /// Inspect stored session transcripts.
    #[command(subcommand)]
    Transcript(TranscriptCommand),
}

#[derive(Debug, Subcommand)]
pub enum CaCommand {
    /// Create a new root certificate and signing key.
    Init {
        #[arg(long)]
        cert: PathBuf,
        #[arg(long)]
        key: PathBuf,
        /// Root lifetime in days.
        #[arg(long, default_value_t = 5 * 365)]
        days: u64,
    },
    /// Generate a key pair for a party and certify it.
    Issue {
        #[arg(long)]
        ca_cert: PathBuf,
        #[arg(long)]
        ca_key: PathBuf,
        /// Two to 32 upper-case letters, such as a state code.
        #[arg(long)]
        subject: String,
        #[arg(long)]
        cert: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long, default_value_t = 90)]
        days: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum TranscriptCommand {
    /// Check a transcript file's signatures against the root.
    Verify {
        #[arg(long)]
        root: PathBuf,
        file: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct GendataArgs {
    #[arg(long)]
    pub seed: u64,
    /// Client records.
    #[arg(long)]
    pub size_a: usize,
    /// Server identifiers.
    #[arg(long)]
    pub size_b: usize,
    #[arg(long)]
    pub intersection: usize,
    #[arg(long, default_value_t = 1)]
    pub columns: usize,
    #[arg(long, default_value_t = 31)]
    pub bound: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LimitsProfile {
    /// 1000 records, values up to 2^20.
    Default,
    /// 20 records, values up to 31.
    Paper,
}

impl LimitsProfile {
    pub fn limits(self) -> Limits {
        match self {
            LimitsProfile::Default => Limits::DEFAULT,
            LimitsProfile::Paper => Limits::PAPER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Lines,
    Human,
}

#[derive(Debug, Args)]
pub struct PartyArgs {
    #[arg(long)]
    pub cert: PathBuf,
    #[arg(long)]
    pub key: PathBuf,
    /// Root certificate the peer must chain to.
    #[arg(long)]
    pub root: PathBuf,
    /// Dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = LimitsProfile::Default)]
    pub limits: LimitsProfile,
    /// Directory for signed session transcripts.
    #[arg(long)]
    pub transcript_dir: Option<PathBuf>,
    /// Socket read/write timeout in seconds.
    #[arg(long, default_value_t = DEFAULT_IO_TIMEOUT.as_secs())]
    pub timeout: u64,
}

#[derive(Debug, Args)]
pub struct ServerArgs {
    #[arg(long, default_value = "127.0.0.1:7155")]
    pub listen: SocketAddr,
    #[command(flatten)]
    pub party: PartyArgs,
    /// Exit after this many connections.
    #[arg(long)]
    pub max_sessions: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClientArgs {
    #[arg(long, default_value = "127.0.0.1:7155")]
    pub connect: String,
    #[command(flatten)]
    pub party: PartyArgs,
    /// Aggregate to compute, as `<column>:<sum|sumsq>`. Repeatable.
    #[arg(long = "op", required = true)]
    pub ops: Vec<SpecEntry>,
    /// Largest value in the dataset; defaults to the profile's bound.
    #[arg(long)]
    pub bound: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_KEY_BITS)]
    pub paillier_bits: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Lines)]
    pub format: OutputFormat,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Ca(CaCommand::Init { cert, key, days }) => ca_init(&cert, &key, days, out),
        Command::Ca(CaCommand::Issue {
            ca_cert,
            ca_key,
            subject,
            cert,
            key,
            days,
        }) => ca_issue(&ca_cert, &ca_key, &subject, &cert, &key, days, out),
        Command::Gendata(args) => gendata(args, out),
        Command::Server(args) => server(args, out),
        Command::Client(args) => client(args, out),
        Command::Transcript(TranscriptCommand::Verify { root, file }) => {
            verify_transcript(&root, &file, out)
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::new(Category::Io, "io", format!("{}: {e}", path.display()))
}

fn written(out: &mut dyn Write, text: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{text}")
        .and_then(|_| out.flush())
        .map_err(|e| CliError::new(Category::Io, "stdout", e))
}

fn refuse_overwrite(paths: &[&Path]) -> Result<(), CliError> {
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(CliError::new(
            Category::Io,
            "exists",
            format!("{} already exists", p.display()),
        )),
        None => Ok(()),
    }
}

fn ca_init(cert: &Path, key: &Path, days: u64, out: &mut dyn Write) -> Result<(), CliError> {
    refuse_overwrite(&[cert, key])?;
    let ca = CertificateAuthority::init(Validity::starting_now(days * DAY), &mut OsRng)?;
    write_secret_key(key, ca.signing_key()).map_err(|e| io_error(key, e))?;
    write_cert(cert, ca.root()).map_err(|e| io_error(cert, e))?;
    written(
        out,
        format_args!("fingerprint={}", hex(&ca.root().fingerprint())),
    )
}

fn ca_issue(
    ca_cert: &Path,
    ca_key: &Path,
    subject: &str,
    cert: &Path,
    key: &Path,
    days: u64,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    refuse_overwrite(&[cert, key])?;
    let ca = CertificateAuthority::load(read_cert(ca_cert)?, read_secret_key(ca_key)?)?;
    let party_key = generate_signing_key(&mut OsRng)?;
    let issued = ca.issue(
        subject,
        &party_key.verifying_key(),
        Validity::starting_now(days * DAY),
        &mut OsRng,
    )?;
    write_secret_key(key, &party_key).map_err(|e| io_error(key, e))?;
    write_cert(cert, &issued).map_err(|e| io_error(cert, e))?;
    written(
        out,
        format_args!(
            "subject={} serial={}",
            issued.subject(),
            hex(&issued.serial())
        ),
    )
}

fn gendata(a: GendataArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let files = gen_data(
        &GenParams {
            seed: a.seed,
            size_a: a.size_a,
            size_b: a.size_b,
            intersection: a.intersection,
            columns: a.columns,
            bound: a.bound,
        },
        &a.out_dir,
    )?;
    written(
        out,
        format_args!(
            "client={}\nserver={}\nexpected={}",
            files.client_csv.display(),
            files.server_csv.display(),
            files.expected.display()
        ),
    )
}

fn load_identity(party: &PartyArgs) -> Result<(Identity, jingbing::pki::Certificate), CliError> {
    let identity = Identity::new(read_cert(&party.cert)?, read_secret_key(&party.key)?)?;
    let root = read_cert(&party.root)?;
    // Catch a wrong or stale root locally rather than as a handshake failure.
    jingbing::pki::verify_cert(&root, &identity.cert, unix_now())?;
    Ok((identity, root))
}

fn server(a: ServerArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (identity, root) = load_identity(&a.party)?;
    let dataset = load_id_set(&a.party.data)?;
    let config = ServerConfig {
        identity,
        root,
        dataset,
        limits: a.party.limits.limits(),
        transcript_dir: a.party.transcript_dir,
        io_timeout: Duration::from_secs(a.party.timeout),
    };
    if let Some(dir) = &config.transcript_dir {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    let listener =
        TcpListener::bind(a.listen).map_err(|e| CliError::new(Category::Io, "bind", e))?;
    let local = listener
        .local_addr()
        .map_err(|e| CliError::new(Category::Io, "bind", e))?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&shutdown);
    ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst))
        .map_err(|e| CliError::new(Category::Io, "signal-handler", e))?;
    written(out, format_args!("listening={local}"))?;
    info!(
        "serving {} identifiers as {}",
        config.dataset.len(),
        config.identity.cert.subject()
    );
    let succeeded = serve(listener, &config, &shutdown, a.max_sessions)
        .map_err(|e| CliError::new(Category::Io, "accept", e))?;
    written(out, format_args!("sessions={succeeded}"))
}

fn client(a: ClientArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let limits = a.party.limits.limits();
    let bound = a.bound.unwrap_or(limits.bound);
    let (identity, root) = load_identity(&a.party)?;
    let dataset = load_dataset(&a.party.data, bound)?;
    let spec = AggregationSpec::new(a.ops)
        .map_err(|e| CliError::new(Category::Validation, "bad-op", e))?;
    if let Some(dir) = &a.party.transcript_dir {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    let config = ClientConfig {
        identity,
        root,
        dataset,
        spec,
        limits,
        options: ClientOptions {
            paillier_bits: a.paillier_bits,
            ..ClientOptions::default()
        },
        transcript_dir: a.party.transcript_dir,
        io_timeout: Duration::from_secs(a.party.timeout),
    };
    let run = run_client(a.connect.as_str(), &config)?;
    if let Some(path) = &run.transcript_path {
        info!("transcript written to {}", path.display());
    }
    let text = match a.format {
        OutputFormat::Lines => run.output.to_lines(),
        OutputFormat::Human => human(&run.output, &run.peer_subject),
    };
    write!(out, "{text}")
        .and_then(|_| out.flush())
        .map_err(|e| CliError::new(Category::Io, "stdout", e))
}

fn human(output: &ProtocolOutput, peer: &str) -> String {
    let mut text = format!("Intersection with {peer}: {} records\n", output.cardinality);
    for (entry, value) in &output.aggregates {
        let op = match entry.operator {
            jingbing::protocol::Operator::Sum => "sum",
            jingbing::protocol::Operator::SumOfSquares => "sum of squares",
        };
        text.push_str(&format!("  column {} {op}: {value}\n", entry.column));
    }
    text
}

fn verify_transcript(root: &Path, file: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let root = read_cert(root)?;
    let record = TranscriptRecord::read_file(file)?;
    let v = record.verify(&root)?;
    written(
        out,
        format_args!(
            "client={} server={} messages={} server_signed={}",
            v.client_subject, v.server_subject, v.entries, v.server_signed
        ),
    )
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
