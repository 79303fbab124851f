use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use gasket_core::algebra::{s_gate, t_gate, w_plus_table, Letter};
use gasket_core::constraints::{closed_form_log2_m, GF2System, Syndrome};
use gasket_core::experiments::canon::canonicalize;
use gasket_core::experiments::circuit::{ergodicity_check, prepare_by_circuit};
use gasket_core::experiments::correlation::{
    block_correlation_suite, connected_pair, correlation_suite, value_string, CorrelationRow,
};
use gasket_core::experiments::depth::{depth_bound, inverse_bound_report};
use gasket_core::experiments::detection::{error_detection_suite, negative_control, DetectionOptions, SupportRow};
use gasket_core::experiments::flipper::{check_flipper, find_syndrome_flipper, FlipperQuery};
use gasket_core::experiments::suite::verify_all;
use gasket_core::lattice::{build_lattice, Address, Lattice, PortConvention};
use gasket_core::state::{build_phi, build_psi, expectation, CosetState, LocalOperator};
use gasket_core::tensor::{block_support_rule_check, check_scale_invariance, contract_network};
use gasket_core::{Error, ExactScalar};

#[derive(Debug, Parser, Serialize)]
#[command(name = "gasket", version, about = "Exact experiments on the parity-loop gasket state")]
struct Cli {
    /// Lattice generation.
    #[arg(long = "gen", global = true, default_value_t = 2)]
    generation: u32,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout; the manifest goes next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Refuse runs whose estimated footprint exceeds this many MiB.
    #[arg(long, global = true)]
    max_memory: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand, Serialize)]
enum Command {
    /// Vertices, edges, loops, corners and diameter.
    Lattice,
    /// Gate and table dumps.
    Ops {
        #[command(subcommand)]
        what: OpsCommand,
    },
    /// Number of solutions of the Ψ (or Φ) constraints, optionally with fixed letters.
    Count {
        /// `vertex=letter`; the vertex is an index or an address such as `TLr`.
        #[arg(long)]
        fix: Vec<String>,
        #[arg(long)]
        phi: bool,
    },
    /// Expectation of one dyad `|op_out⟩⟨op_in|` on a list of sites.
    Expect {
        /// Comma-separated vertices.
        #[arg(long)]
        sites: String,
        #[arg(long)]
        op_out: String,
        #[arg(long)]
        op_in: String,
        #[arg(long)]
        phi: bool,
    },
    /// Connected correlations: one pair query, or the full sweep.
    Correlate {
        #[arg(long, requires_all = ["j", "op_out", "op_in"])]
        i: Option<String>,
        #[arg(long)]
        j: Option<String>,
        /// Two letters: out on i, out on j.
        #[arg(long)]
        op_out: Option<String>,
        #[arg(long)]
        op_in: Option<String>,
        /// Sweep block pairs instead of vertex pairs.
        #[arg(long, conflicts_with = "i")]
        blocks: bool,
    },
    /// Tensor-network checks.
    Tensor {
        #[command(subcommand)]
        what: TensorCommand,
    },
    /// Error-detection sweep.
    Detect {
        #[arg(long, default_value_t = 4)]
        exhaustive_size: usize,
        /// Sampled (support, operator) checks beyond the exhaustive tier.
        #[arg(long, default_value_t = 0)]
        samples: usize,
        #[arg(long, default_value_t = 8)]
        sample_max_size: usize,
        #[arg(long, default_value_t = 64)]
        operator_samples: usize,
    },
    /// Circuit-depth bound arithmetic.
    Bound {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        l: u64,
        /// Also report the layer bound at this lattice diameter.
        #[arg(long)]
        diameter: Option<u64>,
    },
    /// Prepares Ψ by half projectors and checks the T-move orbit.
    Prepare,
    /// Canonical forms of a sampled solution.
    Canon {
        #[arg(long)]
        respect_laterals: bool,
    },
    /// Searches a largest-four-loops flipper avoiding the given vertices.
    Flipper {
        #[arg(long, default_value = "")]
        forbid: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Every applicable check at the given generation.
    VerifyAll,
}

#[derive(Debug, Subcommand, Serialize)]
enum OpsCommand {
    /// S gates, the coarse-graining table and the T gate of every edge.
    Dump,
}

#[derive(Debug, Subcommand, Serialize)]
enum TensorCommand {
    /// Scale invariance, block support rule and contraction versus enumeration.
    Check,
}

struct Report {
    json: Value,
    csv: Option<String>,
    pass: bool,
}

impl Report {
    fn ok(value: impl Serialize) -> anyhow::Result<Self> {
        Ok(Report { json: serde_json::to_value(value)?, csv: None, pass: true })
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool_version: &'static str,
    subcommand: &'a str,
    parameters: &'a Cli,
    seed: u64,
    wall_time_ms: u128,
    output_sha256: String,
    exit_code: u8,
}

fn lattice(g: u32) -> anyhow::Result<Arc<Lattice>> {
    Ok(Arc::new(build_lattice(g)?))
}

fn vertex(lattice: &Lattice, s: &str) -> anyhow::Result<usize> {
    let s = s.trim();
    let v = match s.parse::<usize>() {
        Ok(v) => v,
        Err(_) => lattice.vertex_of(&Address::parse(s)?)?,
    };
    lattice.check_vertex(v)?;
    Ok(v)
}

fn vertex_list(lattice: &Lattice, s: &str) -> anyhow::Result<Vec<usize>> {
    s.split(',').filter(|x| !x.trim().is_empty()).map(|x| vertex(lattice, x)).collect()
}

fn letters(s: &str) -> anyhow::Result<Vec<Letter>> {
    s.chars()
        .map(|c| match c.to_digit(10) {
            Some(d) if d < 4 => Ok(d as Letter),
            _ => Err(anyhow!("letters must be digits 0..=3, got {s:?}")),
        })
        .collect()
}

fn scalar(x: &ExactScalar) -> Value {
    json!({ "exact": x, "rational": x.to_rational().map(|_| value_string(x)) })
}

fn state(l: &Arc<Lattice>, phi: bool) -> anyhow::Result<CosetState> {
    Ok(if phi { build_phi(l)? } else { build_psi(l)? })
}

fn csv_of<T>(header: &str, rows: &[T], line: impl Fn(&T) -> String) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&line(r));
        s.push('\n');
    }
    s
}

/// Rough upper bound on the bytes a run holds at once.
fn estimated_bytes(cli: &Cli) -> u64 {
    let n = 3u64.saturating_pow(cli.generation);
    let base = n.saturating_mul(n).saturating_mul(16) + n * 1024;
    let explicit = if cli.generation <= 2 { 4096 * 64 } else { 0 };
    let rows = match &cli.command {
        Command::Correlate { i: None, blocks: false, .. } => n.saturating_mul(n) * 256 * 80,
        Command::Detect { samples, .. } => (*samples as u64) * 64,
        _ => 0,
    };
    base + explicit + rows
}

fn run(cli: &Cli) -> anyhow::Result<Report> {
    let g = cli.generation;
    match &cli.command {
        Command::Lattice => {
            let l = lattice(g)?;
            let report = l.to_report();
            let indexed: Vec<_> = report.edges.iter().enumerate().collect();
            let csv = csv_of("edge,u,v,kind", &indexed, |(k, e)| format!("{k},{},{},{}", e.u, e.v, e.kind));
            Ok(Report { csv: Some(csv), ..Report::ok(report)? })
        }
        Command::Ops { what: OpsCommand::Dump } => {
            let l = lattice(g)?;
            let s: Vec<Value> =
                (1..4u8).map(|k| Ok(json!({ "k": k, "table": s_gate(k)? }))).collect::<anyhow::Result<_>>()?;
            let t: Vec<Value> = (0..l.edges().len())
                .map(|e| Ok(serde_json::to_value(t_gate(&l, e)?)?))
                .collect::<anyhow::Result<_>>()?;
            Report::ok(json!({ "generation": g, "s_gates": s, "t_gates": t, "coarse_table": w_plus_table() }))
        }
        Command::Count { fix, phi } => {
            let l = lattice(g)?;
            let st = state(&l, *phi)?;
            let fixed: Vec<(usize, Letter)> = fix
                .iter()
                .map(|f| {
                    let (v, a) = f.split_once('=').ok_or_else(|| anyhow!("--fix expects vertex=letter, got {f:?}"))?;
                    let a = letters(a)?;
                    if a.len() != 1 {
                        bail!("--fix expects a single letter, got {f:?}");
                    }
                    Ok((vertex(&l, v)?, a[0]))
                })
                .collect::<anyhow::Result<_>>()?;
            let count = if fixed.is_empty() {
                st.system().count_solutions()
            } else {
                st.system().count_with_assignment(&fixed)?
            };
            Report::ok(json!({
                "generation": g,
                "state": if *phi { "phi" } else { "psi" },
                "fixed": fixed,
                "count": count.to_string(),
                "log2_count": (count.count_ones() == 1).then(|| count.bits() - 1),
                "closed_form_log2": (!*phi && fixed.is_empty()).then(|| closed_form_log2_m(g)),
            }))
        }
        Command::Expect { sites, op_out, op_in, phi } => {
            let l = lattice(g)?;
            let support = vertex_list(&l, sites)?;
            let op = LocalOperator::dyad(support.clone(), &letters(op_out)?, &letters(op_in)?)?;
            let value = expectation(&state(&l, *phi)?, &op)?;
            Report::ok(json!({
                "generation": g, "state": if *phi { "phi" } else { "psi" },
                "sites": support, "op_out": op_out, "op_in": op_in, "value": scalar(&value),
            }))
        }
        Command::Correlate { i: Some(i), j, op_out, op_in, .. } => {
            let l = lattice(g)?;
            let (i, j) = (vertex(&l, i)?, vertex(&l, j.as_deref().unwrap_or_default())?);
            let (o, n) =
                (letters(op_out.as_deref().unwrap_or_default())?, letters(op_in.as_deref().unwrap_or_default())?);
            if o.len() != 2 || n.len() != 2 {
                bail!("--op-out and --op-in take two letters (site i, site j)");
            }
            let row = connected_pair(&l, (i, o[0], n[0]), (j, o[1], n[1]))?;
            Ok(Report {
                csv: Some(csv_of(CorrelationRow::CSV_HEADER, std::slice::from_ref(&row), CorrelationRow::csv)),
                ..Report::ok(json!({
                    "vertex_i": row.vertex_i, "vertex_j": row.vertex_j, "distance": row.distance,
                    "op_in": row.op_in, "op_out": row.op_out, "value": scalar(&row.value),
                }))?
            })
        }
        Command::Correlate { blocks: true, .. } => {
            let r = block_correlation_suite(&lattice(g)?)?;
            Ok(Report { pass: r.pass, ..Report::ok(r)? })
        }
        Command::Correlate { .. } => {
            let (r, rows) = correlation_suite(&lattice(g)?)?;
            Ok(Report {
                pass: r.pass,
                csv: Some(csv_of(CorrelationRow::CSV_HEADER, &rows, CorrelationRow::csv)),
                json: serde_json::to_value(r)?,
            })
        }
        Command::Tensor { what: TensorCommand::Check } => {
            let lambda = check_scale_invariance(PortConvention::Rotational)?;
            let rule = block_support_rule_check();
            let transposed = check_scale_invariance(PortConvention::Transposed).is_err();
            let matches = if g <= 2 {
                let l = lattice(g)?;
                let psi = gasket_core::state::SparseState::from_coset(&build_psi(&l)?)?;
                Some(contract_network(&l)?.ratio_to(&psi).is_some())
            } else {
                None
            };
            Ok(Report {
                pass: rule && transposed && matches != Some(false),
                json: json!({
                    "lambda": scalar(&lambda), "lambda_squared": scalar(&(lambda * lambda)),
                    "block_support_rule": rule, "transposed_convention_rejected": transposed,
                    "contraction_matches_enumeration": matches, "generation": g,
                }),
                csv: None,
            })
        }
        Command::Detect { exhaustive_size, samples, sample_max_size, operator_samples } => {
            let l = lattice(g)?;
            let opts = DetectionOptions {
                max_exhaustive_size: *exhaustive_size,
                exhaustive_operator_size: (*exhaustive_size).min(4),
                operator_samples: *operator_samples,
                sample_budget: *samples,
                sample_max_size: *sample_max_size,
                seed: cli.seed,
            };
            let r = error_detection_suite(&l, &opts)?;
            let neg = negative_control(&l)?;
            let csv = csv_of(SupportRow::CSV_HEADER, &r.rows, SupportRow::csv);
            let mut json = serde_json::to_value(&r)?;
            json["negative_control"] = serde_json::to_value(&neg)?;
            Ok(Report { pass: r.pass && neg.is_none_or(|w| !w.detected), json, csv: Some(csv) })
        }
        Command::Bound { p, l, diameter } => {
            let mut json = serde_json::to_value(depth_bound(*p, *l)?)?;
            if let Some(d) = diameter {
                json["inverse"] = serde_json::to_value(inverse_bound_report(*d, *p)?)?;
            }
            Ok(Report { json, csv: None, pass: true })
        }
        Command::Prepare => {
            let l = lattice(g)?;
            let r = prepare_by_circuit(&l, None)?;
            let orbit = ergodicity_check(&l)?;
            Ok(Report {
                pass: r.equals_psi && orbit.pass,
                json: json!({
                    "generation": g, "equals_psi": r.equals_psi, "ratio": r.ratio.as_ref().map(scalar),
                    "configurations": r.state.len(), "orbit": orbit,
                }),
                csv: None,
            })
        }
        Command::Canon { respect_laterals } => {
            let l = lattice(g)?;
            let system = if *respect_laterals {
                GF2System::build(&l, Syndrome::zeros(l.loops().len()), &[])?
            } else {
                GF2System::build(&l, Syndrome::zeros(l.loops().len()), &l.lateral_loops())?
            };
            let input = system.sample_solution(cli.seed)?;
            let r = canonicalize(&l, &input, *respect_laterals)?;
            let forms: Vec<Value> =
                r.forms.iter().map(|f| json!({ "form": f.form.to_string(), "moves": f.moves })).collect();
            Report::ok(json!({
                "generation": g, "respect_laterals": respect_laterals,
                "input": input.to_string(), "forms": forms,
            }))
        }
        Command::Flipper { forbid, samples } => {
            let l = lattice(g)?;
            let forbidden: BTreeSet<usize> = vertex_list(&l, forbid)?.into_iter().collect();
            let q = FlipperQuery::largest_four(&l, forbidden.iter().copied())?;
            let found = find_syndrome_flipper(&l, &q)?;
            let check = found.as_ref().map(|f| check_flipper(&l, f, *samples, cli.seed)).transpose()?;
            let pass = check
                .as_ref()
                .is_none_or(|c| c.shift_matches && c.samples_in_phi == c.samples && c.maps_psi_to_phi != Some(false));
            Ok(Report {
                pass,
                json: json!({
                    "generation": g, "forbidden": forbidden,
                    "flipper": found.as_ref().map(|f| &f.ops), "weight": found.as_ref().map(|f| f.weight()),
                    "check": check,
                }),
                csv: None,
            })
        }
        Command::VerifyAll => {
            let r = verify_all(g, cli.seed)?;
            Ok(Report { pass: r.pass, ..Report::ok(r)? })
        }
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Lattice => "lattice",
        Command::Ops { .. } => "ops dump",
        Command::Count { .. } => "count",
        Command::Expect { .. } => "expect",
        Command::Correlate { .. } => "correlate",
        Command::Tensor { .. } => "tensor check",
        Command::Detect { .. } => "detect",
        Command::Bound { .. } => "bound",
        Command::Prepare => "prepare",
        Command::Canon { .. } => "canon",
        Command::Flipper { .. } => "flipper",
        Command::VerifyAll => "verify-all",
    }
}

fn render(cli: &Cli, report: &Report) -> anyhow::Result<String> {
    match cli.format {
        Format::Json => Ok(serde_json::to_string_pretty(&report.json)? + "\n"),
        Format::Csv => report
            .csv
            .clone()
            .ok_or_else(|| anyhow!("{} has no CSV output; use --format json", subcommand_name(&cli.command))),
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn execute(cli: &Cli) -> anyhow::Result<u8> {
    let start = Instant::now();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring threads")?;
    }
    if let Some(mib) = cli.max_memory {
        let need = estimated_bytes(cli);
        if need > mib.saturating_mul(1 << 20) {
            return Err(Error::ResourceLimit(format!("estimated {} MiB exceeds --max-memory {mib}", need >> 20)).into());
        }
    }
    let report = run(cli)?;
    let text = render(cli, &report)?;
    let code = if report.pass { 0 } else { 2 };
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        subcommand: subcommand_name(&cli.command),
        parameters: cli,
        seed: cli.seed,
        wall_time_ms: start.elapsed().as_millis(),
        output_sha256: hex::encode(Sha256::digest(text.as_bytes())),
        exit_code: code,
    };
    let manifest = serde_json::to_value(&manifest)?;
    match &cli.out {
        Some(path) => {
            std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            std::fs::write(manifest_path(path), serde_json::to_string_pretty(&manifest)? + "\n")?;
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            eprintln!("{}", serde_json::to_string(&manifest)?);
        }
    }
    if code != 0 {
        eprintln!("error: one or more checked properties failed");
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let usage = matches!(
                e.downcast_ref::<Error>(),
                Some(Error::InvalidArgument(_) | Error::UnsupportedGeneration { .. })
            );
            eprintln!("{}: {e:#}", if usage { "usage error" } else { "error" });
            ExitCode::from(1)
        }
    }
}
