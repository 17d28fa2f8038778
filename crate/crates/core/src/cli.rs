//! Command-line driver.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | I/O or other failure |
//! | 2 | usage error (bad flags, missing key, invalid config) |
//! | 3 | decoder desync or truncated stegotext |
//! | 4 | no candidate carries the validation suffix |
//! | 5 | ambiguous decode |
//! | 6 | distribution-server transport failure |
//! | 7 | token budget exhausted while encoding |
//! | 8 | malformed stegotext or payload file |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitstream::{BitError, BitString, SecretKey};
use crate::codec::format::{read_stegotext, write_stegotext, FormatError};
use crate::codec::{decode, encode, CodecError, CodecParams, SuffixLength, MAX_LIST_BITS};
use crate::dist::{ModelConfig, ModelError, ModelSource};
use crate::metrics::CapacityReport;
use crate::selftest::{self, random_bits, Scale};

pub const KEY_ENV: &str = "LISTSTEGO_KEY";
pub const ENVELOPE_MAGIC: &str = "LISTSTEGO-ENVELOPE 1";
const ENVELOPE_END: &str = "---";

pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const DESYNC: i32 = 3;
    pub const NO_MATCH: i32 = 4;
    pub const AMBIGUOUS: i32 = 5;
    pub const TRANSPORT: i32 = 6;
    pub const TOKEN_LIMIT: i32 = 7;
    pub const MALFORMED: i32 = 8;
}

#[derive(Debug, Parser)]
#[command(name = "liststego", version, about = "List-decoding steganography codec")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hide a payload file in a token sequence.
    Encode {
        #[arg(long)]
        config: PathBuf,
        /// Payload file: 8-byte big-endian bit count, then packed bits.
        #[arg(long)]
        payload: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// 64 hex characters.
        #[arg(long, env = KEY_ENV, hide_env_values = true)]
        key: Option<String>,
        /// Write a bare LSTG file instead of the parameter envelope.
        #[arg(long)]
        bare: bool,
        #[arg(long, value_enum, default_value = "text")]
        report: ReportFormat,
    },
    /// Recover a payload from an envelope or bare LSTG file.
    Decode {
        /// Needed for bare LSTG input; overrides the envelope's model.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        stegotext: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = KEY_ENV, hide_env_values = true)]
        key: Option<String>,
        /// Payload length in bits (bare LSTG input only).
        #[arg(long)]
        payload_bits: Option<usize>,
    },
    /// Run the statistical self-test suites.
    Selftest {
        #[arg(long, value_enum, default_value = "quick")]
        scale: ScaleArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Utilization table over payload lengths and list sizes, as CSV.
    Capacity {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated payload lengths in bits.
        #[arg(long, value_delimiter = ',', required = true)]
        lengths: Vec<usize>,
        /// Comma-separated list exponents; defaults to the config's.
        #[arg(long = "list-bits", value_delimiter = ',')]
        list_bits: Vec<u32>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScaleArg {
    Quick,
    Full,
}

/// `suffix_bits = 20` or `suffix_bits = "auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SuffixSetting {
    Bits(usize),
    Named(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl SuffixSetting {
    fn to_codec(self) -> SuffixLength {
        match self {
            SuffixSetting::Bits(b) => SuffixLength::Fixed(b),
            SuffixSetting::Named(AutoTag::Auto) => SuffixLength::Auto,
        }
    }
}

fn default_suffix() -> SuffixSetting {
    SuffixSetting::Named(AutoTag::Auto)
}

/// Session configuration file (TOML). The key is never part of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub list_bits: u32,
    pub lambda: u32,
    #[serde(default = "default_suffix")]
    pub suffix_bits: SuffixSetting,
    #[serde(default)]
    pub max_tokens: Option<usize>,
    pub model: ModelConfig,
}

impl SessionConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: SessionConfig =
            toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        if !(1..=MAX_LIST_BITS).contains(&cfg.list_bits) {
            return Err(CliError::Usage(format!(
                "config: list_bits must be in 1..={MAX_LIST_BITS}"
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Parameters written ahead of the tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub list_bits: u32,
    pub suffix_bits: usize,
    pub lambda: u32,
    pub payload_bits: usize,
    pub model: ModelConfig,
    pub tokens: Vec<u32>,
}

impl Envelope {
    pub fn to_bytes(&self) -> Vec<u8> {
        let model = serde_json::to_string(&self.model).expect("model config serializes");
        let mut out = format!(
            "{ENVELOPE_MAGIC}\nlist_bits={}\nsuffix_bits={}\nlambda={}\npayload_bits={}\nmodel={model}\n{ENVELOPE_END}\n",
            self.list_bits, self.suffix_bits, self.lambda, self.payload_bits
        )
        .into_bytes();
        out.extend(write_stegotext(&self.tokens));
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, CliError> {
        let malformed = |m: &str| CliError::Malformed(format!("envelope: {m}"));
        let marker = format!("\n{ENVELOPE_END}\n");
        let split = bytes
            .windows(marker.len())
            .position(|w| w == marker.as_bytes())
            .ok_or_else(|| malformed("missing header terminator"))?;
        let header =
            std::str::from_utf8(&bytes[..split]).map_err(|_| malformed("header is not UTF-8"))?;
        let mut lines = header.lines();
        if lines.next() != Some(ENVELOPE_MAGIC) {
            return Err(malformed("bad magic line"));
        }
        let (mut n, mut b, mut lam, mut len, mut model) = (None, None, None, None, None);
        for line in lines {
            let (k, v) = line.split_once('=').ok_or_else(|| malformed("expected key=value"))?;
            let num = || v.parse::<usize>().map_err(|_| malformed(&format!("bad value for {k}")));
            match k {
                "list_bits" => n = Some(num()? as u32),
                "suffix_bits" => b = Some(num()?),
                "lambda" => lam = Some(num()? as u32),
                "payload_bits" => len = Some(num()?),
                "model" => {
                    model = Some(serde_json::from_str(v).map_err(|e| malformed(&e.to_string()))?)
                }
                other => return Err(malformed(&format!("unknown field {other}"))),
            }
        }
        let tokens = read_stegotext(&bytes[split + marker.len()..])?;
        Ok(Envelope {
            list_bits: n.ok_or_else(|| malformed("missing list_bits"))?,
            suffix_bits: b.ok_or_else(|| malformed("missing suffix_bits"))?,
            lambda: lam.ok_or_else(|| malformed("missing lambda"))?,
            payload_bits: len.ok_or_else(|| malformed("missing payload_bits"))?,
            model: model.ok_or_else(|| malformed("missing model"))?,
            tokens,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("self-test failed")]
    SelftestFailed,
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Malformed(e.to_string())
    }
}

impl From<BitError> for CliError {
    fn from(e: BitError) -> Self {
        CliError::Malformed(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Codec(CodecError::Model(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io(_) | CliError::SelftestFailed => exit::FAILURE,
            CliError::Malformed(_) => exit::MALFORMED,
            CliError::Codec(e) => match e {
                CodecError::Desync { .. } | CodecError::Truncated { .. } => exit::DESYNC,
                CodecError::NoMatch => exit::NO_MATCH,
                CodecError::Ambiguous { .. } => exit::AMBIGUOUS,
                CodecError::TokenLimit { .. } => exit::TOKEN_LIMIT,
                CodecError::Model(m) if m.is_transport() => exit::TRANSPORT,
                CodecError::Model(ModelError::Config(_)) => exit::USAGE,
                CodecError::InvalidInput(_) => exit::USAGE,
                _ => exit::FAILURE,
            },
        }
    }
}

fn read_key(key: Option<String>) -> Result<SecretKey, CliError> {
    let hex = key.ok_or_else(|| {
        CliError::Usage(format!("no key given (use --key or set {KEY_ENV})"))
    })?;
    SecretKey::from_hex(hex.trim()).map_err(|e| CliError::Usage(format!("key: {e}")))
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn cmd_encode(
    config: &Path,
    payload: &Path,
    out: &Path,
    key: Option<String>,
    bare: bool,
    report: ReportFormat,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let key = read_key(key)?;
    let cfg = SessionConfig::load(config)?;
    let payload = BitString::from_payload_bytes(&read_file(payload)?)?;
    let mut params = CodecParams::new(key, cfg.list_bits, cfg.lambda, cfg.suffix_bits.to_codec());
    params.max_tokens = cfg.max_tokens;
    let mut model = ModelSource::new(cfg.model.build()?);
    let trace = match encode(&params, &mut model, &payload) {
        Ok(t) => t,
        Err(CodecError::TokenLimit { limit, partial }) => {
            let info = crate::metrics::information_content(&partial.weights);
            eprintln!(
                "token budget {limit} exhausted: {} tokens carrying {info:.1} bits of information, \
                 message needs {} bits",
                partial.tokens.len(),
                partial.payload_len + partial.suffix_bits
            );
            return Err(CodecError::TokenLimit { limit, partial }.into());
        }
        Err(e) => return Err(e.into()),
    };
    let bytes = if bare {
        write_stegotext(&trace.tokens)
    } else {
        Envelope {
            list_bits: cfg.list_bits,
            suffix_bits: trace.suffix_bits,
            lambda: cfg.lambda,
            payload_bits: payload.len(),
            model: cfg.model.clone(),
            tokens: trace.tokens.clone(),
        }
        .to_bytes()
    };
    write_file(out, &bytes)?;
    let r = CapacityReport::from_trace(&trace);
    let text = match report {
        ReportFormat::Text => r.to_key_value(),
        ReportFormat::Json => r.to_json() + "\n",
    };
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| CliError::Io(e.to_string()))
}

fn cmd_decode(
    config: Option<&Path>,
    stegotext: &Path,
    out: &Path,
    key: Option<String>,
    payload_bits: Option<usize>,
) -> Result<(), CliError> {
    let key = read_key(key)?;
    let bytes = read_file(stegotext)?;
    let cfg = config.map(SessionConfig::load).transpose()?;
    let (params, model_cfg, tokens, len) = if bytes.starts_with(ENVELOPE_MAGIC.as_bytes()) {
        let env = Envelope::parse(&bytes)?;
        if payload_bits.is_some_and(|p| p != env.payload_bits) {
            return Err(CliError::Usage("--payload-bits disagrees with the envelope".into()));
        }
        let model = cfg.map_or(env.model, |c| c.model);
        let params = CodecParams::new(key, env.list_bits, env.lambda, SuffixLength::Fixed(env.suffix_bits));
        (params, model, env.tokens, env.payload_bits)
    } else {
        let tokens = read_stegotext(&bytes)?;
        let cfg = cfg.ok_or_else(|| CliError::Usage("bare LSTG input needs --config".into()))?;
        let SuffixSetting::Bits(b) = cfg.suffix_bits else {
            return Err(CliError::Usage(
                "bare LSTG input needs an explicit suffix_bits in the config".into(),
            ));
        };
        let len = payload_bits
            .ok_or_else(|| CliError::Usage("bare LSTG input needs --payload-bits".into()))?;
        let params = CodecParams::new(key, cfg.list_bits, cfg.lambda, SuffixLength::Fixed(b));
        (params, cfg.model, tokens, len)
    };
    let mut model = ModelSource::new(model_cfg.build()?);
    let payload = decode(&params, &mut model, &tokens, len)?;
    write_file(out, &payload.to_payload_bytes())
}

fn cmd_capacity(
    config: &Path,
    lengths: &[usize],
    list_bits: &[u32],
    seed: u64,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = SessionConfig::load(config)?;
    let ns: Vec<u32> = if list_bits.is_empty() { vec![cfg.list_bits] } else { list_bits.to_vec() };
    if let Some(bad) = ns.iter().find(|n| !(1..=MAX_LIST_BITS).contains(*n)) {
        return Err(CliError::Usage(format!("list bits {bad} out of range")));
    }
    let rows = capacity_table(&cfg, lengths, &ns, seed)?;
    let mut text = String::from(
        "list_bits,payload_bits,tokens,suffix_bits,information,utilization,utilization_bound\n",
    );
    for (n, r) in rows {
        text.push_str(&format!(
            "{n},{},{},{},{:.6},{:.6},{:.6}\n",
            r.embedded_bits,
            r.tokens,
            r.suffix_bits,
            r.total_information,
            r.utilization,
            r.utilization_bound
        ));
    }
    out.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))
}

/// One encode per (N, length) pair. Keys and payloads are derived from
/// `seed`, so the table is reproducible; rows come back in input order.
pub fn capacity_table(
    cfg: &SessionConfig,
    lengths: &[usize],
    list_bits: &[u32],
    seed: u64,
) -> Result<Vec<(u32, CapacityReport)>, CliError> {
    let jobs: Vec<(usize, u32, usize)> = list_bits
        .iter()
        .flat_map(|&n| lengths.iter().map(move |&len| (n, len)))
        .enumerate()
        .map(|(i, (n, len))| (i, n, len))
        .collect();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len().max(1));
    let run_job = |&(i, n, len): &(usize, u32, usize)| -> Result<(u32, CapacityReport), CliError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let key = selftest::random_key(&mut rng);
        let payload = random_bits(&mut rng, len);
        let mut params = CodecParams::new(key, n, cfg.lambda, cfg.suffix_bits.to_codec());
        params.max_tokens = cfg.max_tokens;
        let mut model = ModelSource::new(cfg.model.build()?);
        let trace = encode(&params, &mut model, &payload)?;
        Ok((n, CapacityReport::from_trace(&trace)))
    };
    let mut results: Vec<Option<Result<(u32, CapacityReport), CliError>>> =
        (0..jobs.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let chunks: Vec<_> = jobs.chunks(jobs.len().div_ceil(workers).max(1)).collect();
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|chunk| s.spawn(move || chunk.iter().map(|j| (j.0, run_job(j))).collect::<Vec<_>>()))
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("capacity worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    results.into_iter().map(|r| r.expect("every job ran")).collect()
}

/// Runs the CLI and returns the process exit code.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Encode {
            config,
            payload,
            out,
            key,
            bare,
            report,
        } => cmd_encode(&config, &payload, &out, key, bare, report, stdout),
        Command::Decode {
            config,
            stegotext,
            out,
            key,
            payload_bits,
        } => cmd_decode(config.as_deref(), &stegotext, &out, key, payload_bits),
        Command::Selftest { scale, seed } => {
            let scale = match scale {
                ScaleArg::Quick => Scale::Quick,
                ScaleArg::Full => Scale::Full,
            };
            let results = selftest::run(scale, seed);
            for r in &results {
                let _ = writeln!(stdout, "{r}");
            }
            if results.iter().all(|r| r.passed) {
                Ok(())
            } else {
                Err(CliError::SelftestFailed)
            }
        }
        Command::Capacity {
            config,
            lengths,
            list_bits,
            seed,
            out,
        } => match out {
            Some(path) => {
                let mut buf = Vec::new();
                cmd_capacity(&config, &lengths, &list_bits, seed, &mut buf)
                    .and_then(|_| write_file(&path, &buf))
            }
            None => cmd_capacity(&config, &lengths, &list_bits, seed, stdout),
        },
    };
    match result {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
