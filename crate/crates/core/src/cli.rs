//! Command-line front end.
//!
//! Exit codes: 0 success/authentic, 1 tampered, 2 invalid parameters or
//! capacity/key errors, 3 malformed or unsupported input.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{
    clone_tamper, emit_report, histogram_delta, sweep, synthetic_ultrasound, TamperSpec, Verdict,
};
use crate::auth::{HashKey, HashMode};
use crate::codec::{decode, Container};
use crate::embed::{build_slot_map, embed, EmbedKey, LsbDepth, Payload};
use crate::error::Error;
use crate::pipeline::{saw_embed, saw_verify, SawParams, Status, WatermarkManifest};
use crate::pixel::{GrayImage, RoiRect};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TAMPERED: i32 = 1;
pub const EXIT_PARAMS: i32 = 2;
pub const EXIT_MALFORMED: i32 = 3;

/// Payload sizes of the default sweep, in bits (kilobit rows of 1024 bits).
pub const DEFAULT_PAYLOADS: [usize; 5] = [270 * 1024, 430 * 1024, 475 * 1024, 510 * 1024, 550 * 1024];

#[derive(Debug, Parser)]
#[command(name = "roni-saw", version, about = "Reversible RONI watermarking for grayscale medical images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed the image digest into the region outside the ROI.
    Embed(EmbedArgs),
    /// Extract, restore and check a watermarked image.
    Verify(VerifyArgs),
    /// Capacity/PSNR sweep and histogram delta reports.
    Analyze(AnalyzeArgs),
    /// Clone one block of an image over another.
    Tamper(TamperArgs),
}

#[derive(Debug, Args)]
#[group(multiple = false)]
pub struct HashKeySource {
    /// Environment variable holding the hash key.
    #[arg(long, value_name = "NAME")]
    pub hash_key_env: Option<String>,
    /// File holding the hash key (one trailing newline is ignored).
    #[arg(long, value_name = "PATH")]
    pub hash_key_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    /// Region of interest as x0,y0,x1,y1 (end-exclusive).
    #[arg(long)]
    pub roi: String,
    #[arg(long = "key-k", default_value_t = 1)]
    pub key_k: u64,
    #[arg(long, default_value_t = 1)]
    pub lsb: u8,
    #[arg(long, default_value = "whole")]
    pub hash_mode: String,
    #[command(flatten)]
    pub hash_key: HashKeySource,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    /// Write the restored image here when extraction succeeds.
    #[arg(long, value_name = "PATH")]
    pub restore_out: Option<PathBuf>,
    #[command(flatten)]
    pub hash_key: HashKeySource,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Input image; a synthetic 800x600 frame is generated when omitted.
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// CSV report path; the JSON report goes next to it with a .json extension.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[arg(long)]
    pub roi: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated payload sizes in bits.
    #[arg(long)]
    pub payloads: Option<String>,
}

#[derive(Debug, Args)]
pub struct TamperArgs {
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Source block x0,y0,x1,y1.
    #[arg(long)]
    pub src: String,
    /// Top-left corner x,y of the target block.
    #[arg(long)]
    pub dst: String,
}

/// Synthetic frame used by `analyze` when no input is given.
pub const SYNTHETIC_SIZE: (usize, usize) = (800, 600);
pub const SYNTHETIC_ROI: RoiRect = RoiRect {
    x0: 300,
    y0: 200,
    x1: 500,
    y1: 390,
};

#[derive(Debug)]
enum Failure {
    Params(String),
    Malformed(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Params(_) => EXIT_PARAMS,
            Failure::Malformed(_) => EXIT_MALFORMED,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Params(m) | Failure::Malformed(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_parse_error() {
            Failure::Malformed(e.to_string())
        } else {
            Failure::Params(e.to_string())
        }
    }
}

type CmdResult = std::result::Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARAMS } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Embed(a) => cmd_embed(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Tamper(a) => cmd_tamper(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn parse_roi(s: &str) -> std::result::Result<RoiRect, Failure> {
    s.parse::<RoiRect>().map_err(|e| Failure::Params(e.to_string()))
}

fn load_hash_key(src: &HashKeySource) -> std::result::Result<Option<HashKey>, Failure> {
    let secret = if let Some(name) = &src.hash_key_env {
        let value = std::env::var_os(name)
            .ok_or_else(|| Failure::Params(format!("environment variable {name} is not set")))?;
        value
            .into_string()
            .map_err(|_| Failure::Params(format!("environment variable {name} is not UTF-8")))?
            .into_bytes()
    } else if let Some(path) = &src.hash_key_file {
        let mut bytes = fs::read(path)
            .map_err(|e| Failure::Params(format!("cannot read key file {}: {e}", path.display())))?;
        if bytes.ends_with(b"\r\n") {
            bytes.truncate(bytes.len() - 2);
        } else if bytes.ends_with(b"\n") {
            bytes.pop();
        }
        bytes
    } else {
        return Ok(None);
    };
    HashKey::new(secret)
        .map(Some)
        .map_err(|e| Failure::Params(e.to_string()))
}

fn read_image(path: &Path) -> std::result::Result<(Container, GrayImage), Failure> {
    let bytes = fs::read(path)
        .map_err(|e| Failure::Malformed(format!("cannot read {}: {e}", path.display())))?;
    decode(&bytes).map_err(|e| Failure::Malformed(format!("{}: {e}", path.display())))
}

/// Writes every file or none: each goes to a temp file beside its target and
/// all are renamed into place only after every write succeeded.
fn write_all_or_nothing(files: &[(&Path, &[u8])]) -> std::result::Result<(), Failure> {
    let io_err = |p: &Path, e: std::io::Error| Failure::Params(format!("cannot write {}: {e}", p.display()));
    let mut staged = Vec::with_capacity(files.len());
    for &(path, data) in files {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
        tmp.write_all(data).map_err(|e| io_err(path, e))?;
        tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
        staged.push((tmp, path));
    }
    let mut done: Vec<&Path> = Vec::new();
    for (tmp, path) in staged {
        if let Err(e) = tmp.persist(path) {
            for p in done {
                let _ = fs::remove_file(p);
            }
            return Err(io_err(path, e.error));
        }
        done.push(path);
    }
    Ok(())
}

fn cmd_embed(a: &EmbedArgs) -> CmdResult {
    let roi = parse_roi(&a.roi)?;
    let key = EmbedKey::new(a.key_k)?;
    let depth = LsbDepth::from_bits(a.lsb)?;
    let mode: HashMode = a.hash_mode.parse()?;
    let hash_key = load_hash_key(&a.hash_key)?;

    let (container, img) = read_image(&a.input)?;
    let params = SawParams::new(roi, key, depth).with_hash_mode(mode);
    let (marked, manifest) = saw_embed(&img, &params, hash_key.as_ref())?;
    let encoded = container.encode(&marked)?;
    let manifest_json = manifest.to_json();
    write_all_or_nothing(&[
        (&a.out, &encoded),
        (&a.manifest, manifest_json.as_bytes()),
    ])?;
    eprintln!(
        "embedded 256-bit digest into {}; manifest at {}",
        a.out.display(),
        a.manifest.display()
    );
    Ok(EXIT_OK)
}

fn cmd_verify(a: &VerifyArgs) -> CmdResult {
    let hash_key = load_hash_key(&a.hash_key)?;
    let text = fs::read_to_string(&a.manifest).map_err(|e| {
        Failure::Malformed(format!("cannot read manifest {}: {e}", a.manifest.display()))
    })?;
    let manifest = WatermarkManifest::from_json(&text)?;
    let (container, img) = read_image(&a.input)?;

    let report = saw_verify(&img, &manifest, hash_key.as_ref());
    let hex = |d: Option<crate::auth::Digest256>| d.map(|d| d.to_hex()).unwrap_or_else(|| "-".into());
    println!("status: {}", report.status);
    println!("extracted: {}", hex(report.extracted_digest));
    println!("recomputed: {}", hex(report.recomputed_digest));
    if !report.mismatch_note.is_empty() {
        println!("note: {}", report.mismatch_note);
    }
    if let (Some(path), Some(restored)) = (&a.restore_out, &report.recovered_image) {
        let bytes = container.encode(restored)?;
        write_all_or_nothing(&[(path, &bytes)])?;
    }
    Ok(match report.status {
        Status::Authentic => EXIT_OK,
        Status::Tampered => EXIT_TAMPERED,
        Status::Malformed => EXIT_MALFORMED,
    })
}

fn parse_payloads(s: &str) -> std::result::Result<Vec<usize>, Failure> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Failure::Params(format!("bad payload size {t:?}")))
        })
        .collect()
}

fn cmd_analyze(a: &AnalyzeArgs) -> CmdResult {
    let payloads = match &a.payloads {
        Some(s) => parse_payloads(s)?,
        None => DEFAULT_PAYLOADS.to_vec(),
    };
    let roi = a.roi.as_deref().map(parse_roi).transpose()?;
    let (img, roi) = match &a.input {
        Some(path) => {
            let roi = roi.ok_or_else(|| Failure::Params("--roi is required with --in".into()))?;
            (read_image(path)?.1, roi)
        }
        None => {
            let roi = roi.unwrap_or(SYNTHETIC_ROI);
            let (w, h) = SYNTHETIC_SIZE;
            (synthetic_ultrasound(w, h, roi, a.seed)?, roi)
        }
    };

    let rows = sweep(&img, roi, &payloads, a.seed)?;

    // histogram delta for the largest feasible payload
    let deltas = match rows
        .iter()
        .filter(|r| r.is_feasible() && r.payload_bits > 0)
        .max_by_key(|r| r.payload_bits)
    {
        Some(row) => {
            let depth = LsbDepth::from_bits(row.lsb_depth.unwrap_or(1))?;
            let sm = build_slot_map(&img, roi, depth)?;
            let bits = sweep_bits(a.seed, row.payload_bits);
            let marked = embed(&img, &sm, EmbedKey::KEYLESS, &Payload::new(bits)?)?;
            Some(histogram_delta(&img, &marked)?)
        }
        None => None,
    };

    let verdicts = clone_verdicts(&img, roi);
    let report = emit_report(&rows, deltas.as_ref(), &verdicts);
    let json_path = a.out.with_extension("json");
    write_all_or_nothing(&[(&a.out, &report.csv), (&json_path, &report.json)])?;
    for r in &rows {
        match r.psnr_db {
            Some(p) => eprintln!("{:>8} bits  b={}  psnr {p}", r.payload_bits, r.lsb_depth.unwrap_or(0)),
            None => eprintln!("{:>8} bits  infeasible", r.payload_bits),
        }
    }
    Ok(EXIT_OK)
}

/// The bit stream `sweep` draws for `seed`.
fn sweep_bits(seed: u64, len: usize) -> Vec<bool> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen()).collect()
}

/// Watermarks `img`, then verifies it untouched and after a clone attack
/// inside the ROI. Empty when the image cannot carry a watermark.
fn clone_verdicts(img: &GrayImage, roi: RoiRect) -> Vec<Verdict> {
    let params = SawParams::new(roi, EmbedKey::KEYLESS, LsbDepth::One);
    let Ok((marked, manifest)) = saw_embed(img, &params, None) else {
        return Vec::new();
    };
    let mut out = vec![Verdict {
        label: "untampered".into(),
        status: saw_verify(&marked, &manifest, None).status,
    }];
    let side = 50.min(roi.width() / 2).min(roi.height());
    if side > 0 {
        let src = RoiRect {
            x0: roi.x0,
            y0: roi.y0,
            x1: roi.x0 + side,
            y1: roi.y0 + side,
        };
        if let Ok(spec) = TamperSpec::to_corner(src, roi.x0 + side, roi.y0) {
            if let Ok(t) = clone_tamper(&marked, &spec) {
                out.push(Verdict {
                    label: format!("clone {side}x{side}"),
                    status: saw_verify(&t, &manifest, None).status,
                });
            }
        }
    }
    out
}

fn cmd_tamper(a: &TamperArgs) -> CmdResult {
    let src = parse_roi(&a.src)?;
    let (x, y) = a
        .dst
        .split_once(',')
        .and_then(|(x, y)| Some((x.trim().parse().ok()?, y.trim().parse().ok()?)))
        .ok_or_else(|| Failure::Params(format!("--dst must be x,y, got {:?}", a.dst)))?;
    let spec = TamperSpec::to_corner(src, x, y)?;
    let (container, img) = read_image(&a.input)?;
    let out = clone_tamper(&img, &spec)?;
    write_all_or_nothing(&[(&a.out, &container.encode(&out)?)])?;
    Ok(EXIT_OK)
}
