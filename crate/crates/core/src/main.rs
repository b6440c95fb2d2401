use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::net::{SocketAddr, TcpListener};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use dapac::analysis::{
    deviating_client_check, deviation_cases, measure, privacy_exhaustive_tv, privacy_structural_check,
    privacy_verdict, secrecy_bruteforce, ClientMutation, Report, DEFAULT_SAMPLES,
};
use dapac::baseline::{naive_setup, ShareDatabase, ShareServer};
use dapac::dealer::{CredentialAuthority, TokenTable};
use dapac::net::{serve, ServerHost};
use dapac::policy::enumerate_policies;
use dapac::session::{run_naive_session, run_session, Endpoint};
use dapac::wire::{decode_database, decode_shares, encode_database, encode_shares};
use dapac::{AccessPolicy, BitString, Credential, Error, Rng, ServerState, SystemParams};

#[derive(Parser)]
#[command(name = "dapac", version, about = "Distributed attribute-based private access control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deal a random database, pads, shares and credentials into a directory.
    Setup(SetupArgs),
    /// Retrieve the user's message, in process or from running servers.
    Retrieve(RetrieveArgs),
    /// Run one server.
    Serve(ServeArgs),
    /// Sweep (N, K) and print download accounting as CSV.
    Bench(BenchArgs),
    /// Run an analysis check; exit status 0 iff it passes.
    Check {
        #[command(subcommand)]
        check: CheckCommand,
    },
    /// Retrieve with the naive share-everything scheme.
    Baseline(BaselineArgs),
}

#[derive(Args)]
struct SetupArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Message length; rounded up to a multiple of N(N-1)/2 with zero bits.
    #[arg(long)]
    msg_bits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// User attribute vector, comma separated, 1-based. Defaults to all ones.
    #[arg(long, value_delimiter = ',')]
    user: Option<Vec<u16>>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    dir: PathBuf,
}

#[derive(Args)]
struct RetrieveArgs {
    #[arg(long)]
    dir: PathBuf,
    /// Server addresses in position order; in process when omitted.
    #[arg(long, value_delimiter = ',')]
    servers: Option<Vec<SocketAddr>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long)]
    index: usize,
    #[arg(long, default_value = "127.0.0.1:0")]
    listen: String,
}

#[derive(Args)]
struct BenchArgs {
    /// Single value, inclusive range `a..b`, or comma list.
    #[arg(long, value_parser = parse_range)]
    n: Grid,
    #[arg(long, value_parser = parse_range)]
    k: Grid,
    /// Message length; defaults to 12 N(N-1)/2.
    #[arg(long)]
    msg_bits: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum CheckCommand {
    /// Query privacy at every server: structure, then exhaustive or sampled TV.
    Privacy {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        /// Enumerate all client randomness instead of sampling.
        #[arg(long)]
        exhaustive: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exhaustive secrecy of the other messages, for every user.
    Secrecy {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        msg_bits: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Deviating client at the last server, both cases plus the honest control.
    Deviate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, value_delimiter = ',')]
        user: Option<Vec<u16>>,
        #[arg(long)]
        server: Option<usize>,
        #[arg(long, default_value_t = 32)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Debug)]
struct Grid(Vec<usize>);

// "3", "2..5" (inclusive) or "2,3,4"
fn parse_range(s: &str) -> Result<Grid, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
        let b: usize = b.trim().parse().map_err(|e| format!("{e}"))?;
        if a > b {
            return Err(format!("empty range {s}"));
        }
        return Ok(Grid((a..=b).collect()));
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|e| format!("{x}: {e}")))
        .collect::<Result<_, _>>()
        .map(Grid)
}

#[derive(Serialize, Deserialize)]
struct Meta {
    n_servers: usize,
    n_values: usize,
    /// Stored length, a multiple of N(N-1)/2.
    msg_len_bits: usize,
    /// Length of the actual content before zero padding.
    content_bits: usize,
    seed: u64,
    user: Vec<u16>,
}

enum Failure {
    Usage(String),
    Runtime(String),
    CheckFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Params(_) | Error::Policy(_) | Error::InvalidArgument(_) | Error::SamePosition(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<dapac::wire::WireError> for Failure {
    fn from(e: dapac::wire::WireError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

/// DAPAC_SEED, when set, wins over --seed.
fn effective_seed(flag: u64) -> CliResult<u64> {
    match std::env::var("DAPAC_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("DAPAC_SEED={s} is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Setup(a) => cmd_setup(a),
        Command::Retrieve(a) => cmd_retrieve(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Check { check } => cmd_check(check),
        Command::Baseline(a) => cmd_baseline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::CheckFailed) => ExitCode::from(1),
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn user_policy(user: Option<Vec<u16>>, params: &SystemParams) -> CliResult<AccessPolicy> {
    let values = user.unwrap_or_else(|| vec![1; params.n_servers()]);
    Ok(AccessPolicy::new(values, params)?)
}

fn cmd_setup(a: SetupArgs) -> CliResult {
    if a.msg_bits == 0 {
        return Err(Failure::Usage("--msg-bits must be positive".into()));
    }
    let seed = effective_seed(a.seed)?;
    let params = SystemParams::new(a.n, a.k, SystemParams::padded_len(a.n, a.msg_bits))?;
    let user = user_policy(a.user, &params)?;
    let rng = Rng::labeled(seed, "cli/setup");

    let mut content_rng = rng.substream("contents", 0);
    let contents: BTreeMap<AccessPolicy, BitString> = enumerate_policies(&params)
        .into_iter()
        .map(|p| {
            let mut bits = BitString::zeros(a.msg_bits);
            dapac::RandomSource::fill(&mut content_rng, &mut bits);
            (p, bits)
        })
        .collect();
    let (db, pads) = dapac::setup(params, Some(&contents), &rng.substream("dealer", 0))?;
    let shares = naive_setup(&db, &mut rng.substream("shares", 0));
    let mut authority = CredentialAuthority::new(params);
    let credentials = authority.issue_credentials(&user, &mut rng.substream("credentials", 0))?;

    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("db.bin"), encode_database(&db, &pads))?;
    fs::write(a.out.join("shares.bin"), encode_shares(&params, shares.groups()))?;
    let meta = Meta {
        n_servers: params.n_servers(),
        n_values: params.n_values(),
        msg_len_bits: params.msg_len_bits(),
        content_bits: a.msg_bits,
        seed,
        user: user.values().to_vec(),
    };
    fs::write(a.out.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    fs::write(a.out.join("credentials.json"), serde_json::to_string_pretty(&credentials)?)?;
    for (i, table) in authority.into_tables().into_iter().enumerate() {
        fs::write(a.out.join(format!("tokens-{}.json", i + 1)), serde_json::to_string_pretty(&table)?)?;
    }
    println!(
        "wrote {} messages of {} bits ({} content) and {} pads to {}",
        params.n_policies(),
        params.msg_len_bits(),
        a.msg_bits,
        pads.len(),
        a.out.display()
    );
    Ok(())
}

struct Loaded {
    meta: Meta,
    params: SystemParams,
    user: AccessPolicy,
    credentials: Vec<Credential>,
}

fn load(dir: &Path) -> CliResult<Loaded> {
    let read = |name: &str| fs::read_to_string(dir.join(name)).map_err(|e| Failure::Runtime(format!("{name}: {e}")));
    let meta: Meta = serde_json::from_str(&read("meta.json")?)?;
    let params = SystemParams::new(meta.n_servers, meta.n_values, meta.msg_len_bits)?;
    let user = AccessPolicy::new(meta.user.clone(), &params)?;
    let credentials: Vec<Credential> = serde_json::from_str(&read("credentials.json")?)?;
    Ok(Loaded {
        meta,
        params,
        user,
        credentials,
    })
}

fn load_table(dir: &Path, index: usize) -> CliResult<TokenTable> {
    let name = format!("tokens-{index}.json");
    let text = fs::read_to_string(dir.join(&name)).map_err(|e| Failure::Runtime(format!("{name}: {e}")))?;
    Ok(serde_json::from_str(&text)?)
}

fn load_server(dir: &Path, index: usize, params: &SystemParams) -> CliResult<ServerState> {
    let (db, pads) = decode_database(&fs::read(dir.join("db.bin"))?)?;
    if db.params() != params {
        return Err(Failure::Runtime("db.bin parameters disagree with meta.json".into()));
    }
    Ok(ServerState::new(index, Arc::new(db), Arc::new(pads), load_table(dir, index)?)?)
}

// Content bits only, as hex; the zero padding added at setup is dropped.
fn content_hex(m: &dapac::Message, content_bits: usize) -> String {
    m.bits().slice(0, content_bits).to_hex()
}

fn cmd_retrieve(a: RetrieveArgs) -> CliResult {
    let seed = effective_seed(a.seed)?;
    let l = load(&a.dir)?;
    let endpoints = match a.servers {
        Some(addrs) => addrs.into_iter().map(Endpoint::Remote).collect(),
        None => {
            let (db, pads) = decode_database(&fs::read(a.dir.join("db.bin"))?)?;
            let (db, pads) = (Arc::new(db), Arc::new(pads));
            (1..=l.params.n_servers())
                .map(|i| {
                    let state = ServerState::new(i, Arc::clone(&db), Arc::clone(&pads), load_table(&a.dir, i)?)?;
                    Ok(Endpoint::Local(Arc::new(ServerHost::new(state))))
                })
                .collect::<CliResult<Vec<_>>>()?
        }
    };
    let outcome = run_session(
        &l.user,
        &l.credentials,
        &l.params,
        &endpoints,
        &mut Rng::labeled(seed, "cli/client"),
    )?;
    let m = measure(&outcome.transcript)?;
    println!("message {}", content_hex(&outcome.message, l.meta.content_bits));
    println!("rate {}/{}", m.rate.numer(), m.rate.denom());
    println!("{}", serde_json::to_string(&outcome.transcript)?);
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> CliResult {
    let l = load(&a.dir)?;
    let state = load_server(&a.dir, a.index, &l.params)?;
    let listener = TcpListener::bind(&a.listen)?;
    println!("listening {}", listener.local_addr()?);
    std::io::stdout().flush()?;
    serve(Arc::new(ServerHost::new(state)), listener)?;
    Ok(())
}

// Shortest decimal with at most four places: 0.25, 0.1667, 0.1.
fn format_rate(r: f64) -> String {
    let s = format!("{r:.4}");
    let s = s.trim_end_matches('0');
    s.strip_suffix('.').unwrap_or(s).to_owned()
}

fn cmd_bench(a: BenchArgs) -> CliResult {
    let seed = effective_seed(a.seed)?;
    println!("scheme,N,K,L,bits_down,equations,rate");
    for &n in &a.n.0 {
        for &k in &a.k.0 {
            let bits = a.msg_bits.unwrap_or(12 * n * n.saturating_sub(1) / 2);
            let params = SystemParams::new(n, k, SystemParams::padded_len(n, bits))?;
            let rng = Rng::labeled(seed, "cli/bench").substream("point", (n * 1000 + k) as u64);
            let mut dep = dapac::Deployment::new(params, &rng.substream("dealer", 0))?;
            let user = AccessPolicy::from_index(0, &params);
            let creds = dep.authority.issue_credentials(&user, &mut rng.substream("credentials", 0))?;

            let endpoints: Vec<_> = (1..=n)
                .map(|i| Endpoint::Local(Arc::new(ServerHost::new(ServerState::from_deployment(&dep, i)))))
                .collect();
            let outcome = run_session(&user, &creds, &params, &endpoints, &mut rng.substream("client", 0))?;
            if &outcome.message != dep.db.message(&user) {
                return Err(Failure::Runtime(format!("({n},{k}): decoded message differs")));
            }
            let shares = Arc::new(naive_setup(&dep.db, &mut rng.substream("shares", 0)));
            let servers = (1..=n)
                .map(|i| ShareServer::new(i, Arc::clone(&shares), dep.authority.table(i).clone()))
                .collect::<dapac::Result<Vec<_>>>()?;
            let (_, naive) = run_naive_session(&user, &creds, &params, &servers)?;

            for (name, t) in [("dapac", &outcome.transcript), ("naive", &naive)] {
                let m = measure(t)?;
                println!(
                    "{name},{n},{k},{},{},{},{}",
                    params.msg_len_bits(),
                    m.download_bits,
                    m.equations,
                    format_rate(m.rate_f64())
                );
            }
        }
    }
    Ok(())
}

fn emit(report: &Report) {
    println!("{}", report.to_json_line());
}

fn cmd_check(c: CheckCommand) -> CliResult {
    let mut all = true;
    match c {
        CheckCommand::Privacy {
            n,
            k,
            samples,
            exhaustive,
            seed,
        } => {
            let seed = effective_seed(seed)?;
            let params = SystemParams::new(n, k, n * n.saturating_sub(1) / 2)?;
            for server in 1..=n {
                let structural = privacy_structural_check(&params, server);
                all &= structural;
                emit(&Report::new(
                    "privacy-structure",
                    params,
                    structural,
                    serde_json::json!({ "server": server }),
                    seed,
                ));
                if exhaustive {
                    let r = privacy_exhaustive_tv(&params, server, 1, ClientMutation::Honest, 1 << 20)?;
                    let max = r.max();
                    let ok = num_traits::Zero::is_zero(&max);
                    all &= ok;
                    emit(&Report::new(
                        "privacy-exhaustive",
                        params,
                        ok,
                        serde_json::json!({ "server": server, "paths": r.paths, "max_tv": max.to_string() }),
                        seed,
                    ));
                } else {
                    let v = privacy_verdict(&params, server, 1, samples, seed, ClientMutation::Honest)?;
                    all &= v.passed;
                    let last = v.attempts.last().expect("one attempt");
                    emit(&Report::new(
                        "privacy-sampled",
                        params,
                        v.passed,
                        serde_json::json!({
                            "server": server,
                            "samples": last.samples,
                            "attempts": v.attempts.len(),
                            "max_tv": last.max_tv,
                        }),
                        seed,
                    ));
                }
            }
        }
        CheckCommand::Secrecy { n, k, msg_bits, seed } => {
            let seed = effective_seed(seed)?;
            let params = SystemParams::new(n, k, msg_bits)?;
            for v in enumerate_policies(&params) {
                let r = secrecy_bruteforce(&params, &v)?;
                all &= r.holds;
                emit(&Report::new("secrecy", params, r.holds, &r, seed));
            }
        }
        CheckCommand::Deviate {
            n,
            k,
            user,
            server,
            trials,
            seed,
        } => {
            let seed = effective_seed(seed)?;
            let params = SystemParams::new(n, k, 64 * n * n.saturating_sub(1) / 2)?;
            let v = user_policy(user, &params)?;
            let server = server.unwrap_or(n);
            params.check_position(server)?;
            let (case_i, case_ii) = deviation_cases(&params, &v, server);
            for (name, bar, want_fail) in [("case-i", case_i, true), ("case-ii", case_ii, true), ("control", v.clone(), false)] {
                let r = deviating_client_check(&params, &v, &bar, server, trials, seed)?;
                let ok = if want_fail { r.recovery_fails() } else { r.recovery_succeeds() };
                all &= ok;
                emit(&Report::new(&format!("deviate-{name}"), params, ok, &r, seed));
            }
        }
    }
    if all {
        Ok(())
    } else {
        Err(Failure::CheckFailed)
    }
}

fn cmd_baseline(a: BaselineArgs) -> CliResult {
    let l = load(&a.dir)?;
    let (params, groups) = decode_shares(&fs::read(a.dir.join("shares.bin"))?)?;
    if params != l.params {
        return Err(Failure::Runtime("shares.bin parameters disagree with meta.json".into()));
    }
    let shares = Arc::new(ShareDatabase::from_shares(params, groups)?);
    let servers = (1..=params.n_servers())
        .map(|i| Ok(ShareServer::new(i, Arc::clone(&shares), load_table(&a.dir, i)?)?))
        .collect::<CliResult<Vec<_>>>()?;
    let (message, transcript) = run_naive_session(&l.user, &l.credentials, &params, &servers)?;
    let m = measure(&transcript)?;
    println!("message {}", content_hex(&message, l.meta.content_bits));
    println!("rate {}/{}", m.rate.numer(), m.rate.denom());
    println!("{}", serde_json::to_string(&transcript)?);
    Ok(())
}
