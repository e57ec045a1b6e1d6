use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use pcr_core::experiments::{self, read_integer_csv, uniform_rows, write_integer_csv};
use pcr_core::mask::{self, FieldExpansion, RejectedSet};
use pcr_core::transport::{self, Client, Deployment, ServerState};
use pcr_core::{Database, SchemeConfig, SchemeKind, UserInput, Variant};

#[derive(Parser)]
#[command(name = "pcr", version, about = "Private counterfactual retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Write uniform integer accepted and rejected pools as CSV.
    GenData {
        #[arg(long)]
        r: u64,
        #[arg(long)]
        d: usize,
        /// Accepted rows.
        #[arg(long)]
        m: usize,
        /// Rejected rows.
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory receiving accepted.csv and rejected.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute mask gaps, optionally verify a field expansion and tabulate
    /// empirical gap success rates.
    PrepMask {
        /// Accepted samples (CSV with header).
        #[arg(long)]
        database: PathBuf,
        /// Rejected samples (CSV with header).
        #[arg(long)]
        rejected: PathBuf,
        #[arg(long)]
        r: u64,
        /// Expansion scale c.
        #[arg(long, requires = "expand_q")]
        expand_scale: Option<u64>,
        /// Expansion modulus q2.
        #[arg(long, requires = "expand_scale")]
        expand_q: Option<u64>,
        /// Candidate gaps for the empirical table, comma separated.
        #[arg(long, value_delimiter = ',')]
        empirical: Vec<u64>,
        #[arg(long, default_value_t = 1.0)]
        threshold: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one server of a deployment until killed.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// 1-based server position.
        #[arg(long)]
        index: usize,
        /// Shared seed as 64 hex digits; overrides the file.
        #[arg(long, env = "PCR_SEED_HEX", hide_env_values = true)]
        seed_hex: Option<String>,
        /// Listen address; defaults to the deployment's entry for this index.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Retrieve the index of the nearest accepted sample.
    Retrieve {
        #[arg(long)]
        config: PathBuf,
        /// Feature vector, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<u64>,
        /// Actionability weights, comma separated (weighted schemes).
        #[arg(long, value_delimiter = ',')]
        w: Vec<u64>,
        /// Seed for the client's randomness; fresh entropy when absent.
        #[arg(long)]
        seed: Option<u64>,
        /// Also print the revealed statistics.
        #[arg(long)]
        debug: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Accuracy/quantization trade-off from a JSON spec.
    ExpAccuracy {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Leakage table from a JSON spec.
    ExpLeakage {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn gen_data(r: u64, d: usize, m: usize, k: usize, seed: u64, out: &Path) -> Result<()> {
    if r == 0 || d == 0 || m == 0 || k == 0 {
        bail!("R, d, M and K must all be positive");
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let accepted = uniform_rows(r, d, m, &mut rng);
    let rejected = uniform_rows(r, d, k, &mut rng);
    write_integer_csv(&out.join("accepted.csv"), &accepted)?;
    write_integer_csv(&out.join("rejected.csv"), &rejected)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn prep_mask(
    database: &Path,
    rejected: &Path,
    r: u64,
    expansion: Option<FieldExpansion>,
    empirical: &[u64],
    threshold: f64,
    format: Format,
    out: &Option<PathBuf>,
) -> Result<()> {
    let db = Database::new(read_integer_csv(database)?, r)?;
    let rej = RejectedSet::new(read_integer_csv(rejected)?, r)?;
    let config = SchemeConfig::new(Variant::new(SchemeKind::Mask, false), r, db.dim(), db.len(), 1)?;
    let emp = (!empirical.is_empty()).then_some((empirical, threshold));
    let report = mask::prepare(&db, &rej, &config, expansion, emp)?;
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv | Format::Text => report.to_csv(),
    };
    emit(out, &text)?;
    if report.support_max.is_none() {
        bail!("zero gap: no mask support keeps every rejected point's ordering");
    }
    if report.expansion.as_ref().is_some_and(|e| !e.verified) {
        bail!("field expansion rejected");
    }
    Ok(())
}

fn serve(config: &Path, index: usize, seed_hex: Option<String>, bind: Option<String>) -> Result<()> {
    let mut dep = Deployment::load(config)?;
    if seed_hex.is_some() {
        dep.seed_hex = seed_hex;
    }
    if index == 0 || index > dep.servers.len() {
        bail!("--index must lie in 1..={}", dep.servers.len());
    }
    let seed = dep.seed()?;
    let db = dep.load_database()?;
    let addr = bind.unwrap_or_else(|| dep.servers[index - 1].clone());
    let state = ServerState::new(dep.scheme.clone(), db, seed, index)?;
    let handle = transport::spawn(&addr, state)?;
    eprintln!("server {index} listening on {}", handle.addr());
    handle.wait();
    Ok(())
}

fn retrieve(config: &Path, x: Vec<u64>, w: Vec<u64>, seed: Option<u64>, debug: bool, format: Format) -> Result<bool> {
    let dep = Deployment::load(config)?;
    let input = if w.is_empty() {
        UserInput::unweighted(x)
    } else {
        UserInput::weighted(x, w)
    };
    input.validate(&dep.scheme)?;
    let client = Client::new(dep.scheme.clone(), dep.servers.clone())?;
    let mut rng = match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_os_rng(),
    };
    let res = client.retrieve(&input, &mut rng)?;
    let text = match format {
        Format::Json => {
            let mut v = serde_json::json!({
                "theta_star": res.theta_star,
                "upload": res.cost.upload,
                "download": res.cost.download,
                "consistent": res.consistent,
                "mask_ambiguous": res.mask_ambiguous,
            });
            if debug {
                v["revealed"] = serde_json::json!(res.revealed.values());
            }
            serde_json::to_string(&v)? + "\n"
        }
        Format::Csv | Format::Text => {
            let mut s = format!(
                "theta_star={}\nupload={}\ndownload={}\nconsistent={}\n",
                res.theta_star, res.cost.upload, res.cost.download, res.consistent
            );
            if res.mask_ambiguous {
                s.push_str("mask_ambiguous=true\n");
            }
            if debug {
                let vals: Vec<String> = res.revealed.values().iter().map(u64::to_string).collect();
                s.push_str(&format!("revealed={}\n", vals.join(",")));
            }
            s
        }
    };
    emit(&None, &text)?;
    if !res.consistent {
        eprintln!("warning: decoded statistics are out of range; servers may disagree on seed or data");
    }
    Ok(res.consistent)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::GenData { r, d, m, k, seed, out } => gen_data(r, d, m, k, seed, &out)?,
        Command::PrepMask {
            database,
            rejected,
            r,
            expand_scale,
            expand_q,
            empirical,
            threshold,
            format,
            out,
        } => {
            let expansion = expand_scale.zip(expand_q).map(|(scale, q2)| FieldExpansion { scale, q2 });
            prep_mask(&database, &rejected, r, expansion, &empirical, threshold, format, &out)?
        }
        Command::Serve {
            config,
            index,
            seed_hex,
            bind,
        } => serve(&config, index, seed_hex, bind)?,
        Command::Retrieve {
            config,
            x,
            w,
            seed,
            debug,
            format,
        } => return retrieve(&config, x, w, seed, debug, format),
        Command::ExpAccuracy { spec, format, out } => {
            let res = experiments::run_accuracy_experiment_file(&spec)?;
            let text = match format {
                Format::Json => serde_json::to_string_pretty(&res)? + "\n",
                Format::Csv | Format::Text => res.to_csv()?,
            };
            emit(&out, &text)?;
        }
        Command::ExpLeakage { spec, format, out } => {
            let table = experiments::run_leakage_experiment_file(&spec)?;
            let text = match format {
                Format::Json => serde_json::to_string_pretty(&table)? + "\n",
                Format::Csv => table.to_csv()?,
                Format::Text => table.to_text(),
            };
            emit(&out, &text)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
