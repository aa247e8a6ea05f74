//! `xlayer` command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use xlayer_core::mac::MacConstants;
use xlayer_core::metrics::{delay_all_intra, delay_low_delay, delay_random_access, summary_csv};
use xlayer_core::*;

const EX_USAGE: u8 = 64;
const EX_DATAERR: u8 = 65;
const EX_IOERR: u8 = 74;

#[derive(Parser)]
#[command(name = "xlayer", version, about = "Simulate layered video over 802.11p EDCA with cross-layer mapping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file or `preset:NAME` without running it.
    Validate {
        config: String,
    },
    /// Run one scenario and write result.json, packets.csv and a report.
    Run {
        config: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run one scenario per value of a dotted parameter path.
    Sweep {
        config: String,
        /// Parameter path, e.g. `mapping.algorithm` or `channel.loss.loss_prob`.
        axis: String,
        /// Comma-separated values.
        values: String,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        jobs: u32,
    },
    /// Print the analytic tables.
    Tables {
        #[command(subcommand)]
        which: Table,
    },
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "XLAYER_OUT", default_value = "xlayer-out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Extra `path=value` overrides applied before running.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Table {
    /// AIFS of every access category on both channels.
    Aifs {
        #[arg(long, default_value_t = 32)]
        sifs_us: u64,
        #[arg(long, default_value_t = 13)]
        slot_us: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Demotion probability of each layer against the VI queue length.
    Eq2 {
        #[arg(long, default_value_t = 20)]
        qth_low: u32,
        #[arg(long, default_value_t = 45)]
        qth_high: u32,
        #[arg(long, default_value_t = 60)]
        max_qlen: u32,
        #[arg(long, default_value_t = 5)]
        step: u32,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// End-to-end delay of each coding structure against encoder time.
    Delays {
        #[arg(long, default_value_t = 5e-3)]
        t_dec: f64,
        #[arg(long, default_value_t = 0.05)]
        t_net: f64,
        #[arg(long, default_value_t = 32)]
        gop: u32,
        #[arg(long, default_value_t = 60.0)]
        fps: f64,
        /// Encoder times in seconds; defaults to 2 ms up to one frame interval.
        #[arg(long, value_delimiter = ',')]
        t_en: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match e {
            Error::Io { .. } => (EX_IOERR, "io"),
            Error::InvalidPath(_) => (EX_USAGE, "usage"),
            _ => (EX_DATAERR, "config"),
        };
        Failure { code, kind, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure { code: EX_IOERR, kind: "io", message: format!("{}: {e}", path.display()) }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EX_USAGE, kind: "usage", message: message.into() }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string().lines().next().unwrap_or("bad arguments").trim_start_matches("error: ").to_string();
            return fail(usage(message));
        }
    };
    let outcome = match cli.command {
        Command::Validate { config } => validate(&config),
        Command::Run { config, common } => run_cmd(&config, &common),
        Command::Sweep { config, axis, values, common, jobs } => sweep_cmd(&config, &axis, &values, &common, jobs as usize),
        Command::Tables { which } => tables(&which),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(f),
    }
}

fn fail(f: Failure) -> ExitCode {
    let line = serde_json::json!({ "error": f.kind, "code": f.code, "message": f.message });
    eprintln!("{line}");
    ExitCode::from(f.code)
}

fn load(config: &str, common: Option<&Common>) -> Result<Scenario, Failure> {
    let mut s = Scenario::load(config)?;
    if let Some(c) = common {
        for kv in &c.set {
            let (path, value) = kv.split_once('=').ok_or_else(|| usage(format!("--set expects PATH=VALUE, got `{kv}`")))?;
            s = s.with_override(path.trim(), value.trim())?;
        }
        if let Some(seed) = c.seed {
            s.seed = seed;
        }
    }
    s.validate()?;
    Ok(s)
}

fn validate(config: &str) -> Outcome {
    let s = load(config, None)?;
    println!("ok {}", if s.name.is_empty() { config } else { &s.name });
    Ok(())
}

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Outcome {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_failure(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_failure(path, e))?;
    tmp.persist(path).map_err(|e| io_failure(path, e.error))?;
    Ok(())
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(v).map_err(|e| Failure { code: EX_DATAERR, kind: "serialization", message: e.to_string() })?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn write_report(dir: &Path, stem: &str, rep: &Report, format: Format) -> Outcome {
    match format {
        Format::Json => write_atomic(&dir.join(format!("{stem}.json")), &json_bytes(rep)?),
        Format::Csv => write_atomic(&dir.join(format!("{stem}.csv")), summary_csv(std::slice::from_ref(rep))?.as_bytes()),
    }
}

fn run_cmd(config: &str, common: &Common) -> Outcome {
    let s = load(config, Some(common))?;
    let result = run(&s)?;
    let rep = report(&result)?;
    fs::create_dir_all(&common.out).map_err(|e| io_failure(&common.out, e))?;
    write_atomic(&common.out.join("result.json"), &json_bytes(&result)?)?;
    write_atomic(&common.out.join("packets.csv"), packets_csv(&result)?.as_bytes())?;
    write_report(&common.out, "report", &rep, common.format)?;
    print!("{}", summary_csv(std::slice::from_ref(&rep))?);
    Ok(())
}

fn file_safe(v: &str) -> String {
    v.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect()
}

fn sweep_cmd(config: &str, axis: &str, values: &str, common: &Common, jobs: usize) -> Outcome {
    let base = load(config, Some(common))?;
    let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
    let results = sweep(&base, axis, &values, jobs)?;
    let reports = results.iter().map(report).collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(&common.out).map_err(|e| io_failure(&common.out, e))?;
    for (i, (v, rep)) in values.iter().zip(&reports).enumerate() {
        write_report(&common.out, &format!("report-{i:02}-{}", file_safe(v)), rep, common.format)?;
    }
    let summary = summary_csv(&reports)?;
    write_atomic(&common.out.join("summary.csv"), summary.as_bytes())?;
    if common.format == Format::Json {
        let entries: Vec<_> = values.iter().zip(&reports).map(|(v, r)| serde_json::json!({ "value": v, "report": r })).collect();
        write_atomic(&common.out.join("sweep.json"), &json_bytes(&serde_json::json!({ "axis": axis, "runs": entries }))?)?;
    }
    print!("{summary}");
    Ok(())
}

fn emit(rows: &[serde_json::Value], header: &[&str], format: Format) -> Outcome {
    let text = match format {
        Format::Json => String::from_utf8(json_bytes(&rows)?).expect("utf-8 json"),
        Format::Csv => {
            let mut out = header.join(",") + "\n";
            for r in rows {
                let cells: Vec<String> = header.iter().map(|h| r[*h].to_string().trim_matches('"').to_string()).collect();
                out += &(cells.join(",") + "\n");
            }
            out
        }
    };
    print!("{text}");
    Ok(())
}

fn tables(which: &Table) -> Outcome {
    match *which {
        Table::Aifs { sifs_us, slot_us, format } => {
            let c = MacConstants { sifs_us, slot_us, ..MacConstants::default() };
            let mut rows = Vec::new();
            for channel in [Channel::Cch, Channel::Sch] {
                for ac in AccessCategoryId::ALL {
                    let p = AccessCategoryParams::standard(ac, channel);
                    rows.push(serde_json::json!({
                        "channel": channel,
                        "ac": ac.name(),
                        "aifsn": p.aifsn,
                        "cw_min": p.cw_min,
                        "cw_max": p.cw_max,
                        "aifs_us": aifs_duration(ac, channel, &c),
                    }));
                }
            }
            emit(&rows, &["channel", "ac", "aifsn", "cw_min", "cw_max", "aifs_us"], format)
        }
        Table::Eq2 { qth_low, qth_high, max_qlen, step, format } => {
            if step == 0 {
                return Err(usage("--step must be positive"));
            }
            let params = MappingParamsF64 { qth_low, qth_high, ..MappingParamsF64::standard() };
            params.validate(None)?;
            let rows: Vec<_> = (0..=max_qlen)
                .step_by(step as usize)
                .map(|q| {
                    let [l1, l2, l3] = LayerId::ALL.map(|l| compute_p_new(params.p_for(l), q, &params));
                    serde_json::json!({ "qlen_vi": q, "p_new_l1": l1, "p_new_l2": l2, "p_new_l3": l3 })
                })
                .collect();
            emit(&rows, &["qlen_vi", "p_new_l1", "p_new_l2", "p_new_l3"], format)
        }
        Table::Delays { t_dec, t_net, gop, fps, ref t_en, format } => {
            if !(fps.is_finite() && fps > 0.0) {
                return Err(usage("--fps must be positive"));
            }
            let t_fr = 1.0 / fps;
            let t_en: Vec<f64> = if t_en.is_empty() {
                (0..=8).map(|k| 2e-3 + (t_fr - 2e-3) * f64::from(k) / 8.0).filter(|&t| t < t_fr).collect()
            } else {
                t_en.clone()
            };
            let mut rows = Vec::new();
            for t in t_en {
                let p = DelayModelParamsF64::new(t, t_dec, t_net, gop, t_fr);
                p.validate()?;
                rows.push(serde_json::json!({
                    "t_en_s": t,
                    "low_delay_s": delay_low_delay(&p),
                    "random_access_s": delay_random_access(&p)?,
                    "all_intra_s": delay_all_intra(&p),
                }));
            }
            emit(&rows, &["t_en_s", "low_delay_s", "random_access_s", "all_intra_s"], format)
        }
    }
}
