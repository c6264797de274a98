use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use seqme::format::format_number;
use seqme::imap::ci_gap;
use seqme::inference::VertexChoice;
use seqme::{
    build_gkb, cond_prob, credal_bounds, fixtures, global_me_model, joint_of_bn, parse_network, render_joint,
    render_network, select_sequential, select_sequential_direct, separates, verify_imap, CredalNetwork, Error,
    Query, SolverConfig,
};

const EXIT_INVALID: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_CAP: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "seqme", version, about = "Sequential maximum-entropy selection for credal networks")]
struct Cli {
    #[command(flatten)]
    solver: SolverFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolverFlags {
    /// Width of the final bracket on the water-filling level
    #[arg(long, global = true, default_value_t = SolverConfig::default().bisection_tol)]
    bisection_tol: f64,
    /// Gap that certifies an iterative convex solve
    #[arg(long, global = true, default_value_t = SolverConfig::default().convex_tol)]
    convex_tol: f64,
    /// Iteration cap for iterative solvers
    #[arg(long, global = true, default_value_t = SolverConfig::default().max_iters)]
    max_iters: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network file and report every problem found
    Validate { file: PathBuf },
    /// Select one distribution per table and print the resulting point network
    Select {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Answer a conditional query
    Query {
        file: PathBuf,
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long, value_enum, default_value_t = Mode::Seq)]
        mode: Mode,
        /// Print the vertex choices attaining each bound
        #[arg(long)]
        witness: bool,
    },
    /// Lower and upper probability of a query over the credal set
    Bounds {
        file: PathBuf,
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long)]
        witness: bool,
    },
    /// Global maximum-entropy joint table
    GlobalMe {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Joint table built by maximizing entropy one variable at a time
    Direct {
        file: PathBuf,
        /// Comma-separated variable order, defaults to the topological order
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<String>>,
    },
    /// Compare graph separation with numeric independence in the global model
    Imap {
        file: PathBuf,
        #[arg(long, value_delimiter = ',')]
        x: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        y: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        z: Vec<String>,
        #[arg(long, default_value_t = 256)]
        trials: usize,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Run a bundled example
    Demo {
        #[arg(value_enum)]
        name: Demo,
    },
}

#[derive(Args)]
struct QueryArgs {
    /// Target event, e.g. F=f1 or A=a1,C=c2
    #[arg(long)]
    target: String,
    /// Evidence event, or `true`
    #[arg(long, default_value = "true")]
    given: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Seq,
    Bounds,
    Global,
}

#[derive(Clone, Copy, ValueEnum)]
enum Demo {
    Burglary,
    Example52,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let mut out = String::new();
    let result = run(cli, &mut out);
    print!("{out}");
    let _ = std::io::stdout().flush();
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible(_) | Error::NotConverged(_) => EXIT_INFEASIBLE,
        Error::CapExceeded { .. } => EXIT_CAP,
        _ => EXIT_INVALID,
    }
}

fn config(flags: &SolverFlags) -> Result<SolverConfig, Failure> {
    SolverConfig {
        bisection_tol: flags.bisection_tol,
        convex_tol: flags.convex_tol,
        max_iters: flags.max_iters,
    }
    .validated()
    .map_err(|e| Failure::Usage(e.to_string()))
}

fn load(path: &Path) -> Result<CredalNetwork, Failure> {
    let text = fs::read_to_string(path).map_err(Error::from)?;
    Ok(parse_network(&text)?)
}

/// Write through a temporary file in the target directory so readers never see a partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(Error::from)?;
    tmp.write_all(contents.as_bytes()).map_err(Error::from)?;
    tmp.persist(path).map_err(|e| Error::from(e.error))?;
    Ok(())
}

fn vector(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format_number(*x)).collect();
    format!("[{}]", parts.join(", "))
}

fn interval(lo: f64, hi: f64) -> String {
    vector(&[lo, hi])
}

fn run(cli: Cli, out: &mut String) -> Outcome {
    let cfg = config(&cli.solver)?;
    match cli.command {
        Command::Validate { file } => {
            let text = fs::read_to_string(&file).map_err(Error::from)?;
            match parse_network(&text) {
                Ok(net) => {
                    let report = net.validate();
                    if report.is_clean() {
                        out.push_str("ok\n");
                        Ok(0)
                    } else {
                        out.push_str(&report.to_string());
                        Ok(EXIT_INVALID)
                    }
                }
                Err(Error::Validation(report)) => {
                    out.push_str(&report.to_string());
                    Ok(EXIT_INVALID)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Select { file, out: dest } => {
            let net = load(&file)?;
            let sel = select_sequential(&net, &cfg)?;
            for t in sel.bayes_net.network().tables() {
                let p = sel.bayes_net.cpt(&t.child, &t.given).expect("selected tables are point tables");
                out.push_str(&format!("{} | {}: {}\n", t.child, t.given, vector(p)));
            }
            if let Some(dest) = dest {
                write_atomic(&dest, &render_network(sel.bayes_net.network()))?;
            }
            Ok(0)
        }
        Command::Query {
            file,
            query,
            mode,
            witness,
        } => {
            let net = load(&file)?;
            let q = Query::parse(&query.target, &query.given)?;
            match mode {
                Mode::Seq => {
                    let sel = select_sequential(&net, &cfg)?;
                    let p = cond_prob(&joint_of_bn(&sel.bayes_net)?, &q)?;
                    out.push_str(&format!("{}\n", format_number(p)));
                }
                Mode::Global => {
                    let p = cond_prob(&global_me_model(&net, &cfg)?, &q)?;
                    out.push_str(&format!("{}\n", format_number(p)));
                }
                Mode::Bounds => bounds(&net, &q, witness, out)?,
            }
            Ok(0)
        }
        Command::Bounds { file, query, witness } => {
            let net = load(&file)?;
            bounds(&net, &Query::parse(&query.target, &query.given)?, witness, out)?;
            Ok(0)
        }
        Command::GlobalMe { file, out: dest } => {
            let net = load(&file)?;
            let text = render_joint(&global_me_model(&net, &cfg)?);
            match dest {
                Some(dest) => write_atomic(&dest, &text)?,
                None => out.push_str(&text),
            }
            Ok(0)
        }
        Command::Direct { file, order } => {
            let net = load(&file)?;
            let order = match order {
                Some(o) => o,
                None => net.topological_order()?,
            };
            out.push_str(&render_joint(&select_sequential_direct(&net, &order, &cfg)?));
            Ok(0)
        }
        Command::Imap {
            file,
            x,
            y,
            z,
            trials,
            tol,
        } => {
            let net = load(&file)?;
            let kb = net.to_kb();
            let joint = global_me_model(&net, &cfg)?;
            if x.is_empty() != y.is_empty() {
                return Err(Failure::Usage("--x and --y must be given together".into()));
            }
            if x.is_empty() {
                if !z.is_empty() {
                    return Err(Failure::Usage("--z needs --x and --y".into()));
                }
                let report = verify_imap(&kb, &joint, trials, tol)?;
                out.push_str(&format!(
                    "checked {} triples, {} separated, {} violations\n",
                    report.checked,
                    report.separated,
                    report.violations.len()
                ));
                for v in &report.violations {
                    out.push_str(&format!(
                        "violation: {} | {} | {}: gap {}\n",
                        v.x.join(","),
                        v.y.join(","),
                        v.z.join(","),
                        format_number(v.max_gap)
                    ));
                }
                return Ok(if report.violations.is_empty() { 0 } else { EXIT_INVALID });
            }
            let (xs, ys, zs) = (names(&x), names(&y), names(&z));
            let separated = separates(&build_gkb(&kb)?, &xs, &ys, &zs)?;
            let gap = ci_gap(&joint, &xs, &ys, &zs, tol)?;
            out.push_str(&format!("separated: {separated}\n"));
            out.push_str(&format!("independent: {}\n", gap <= tol));
            out.push_str(&format!("max gap: {}\n", format_number(gap)));
            Ok(0)
        }
        Command::Demo { name } => match name {
            Demo::Burglary => burglary(&cfg, out),
            Demo::Example52 => example52(&cfg, out),
        },
    }
}

fn names(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn bounds(net: &CredalNetwork, q: &Query, witness: bool, out: &mut String) -> Result<(), Failure> {
    let b = credal_bounds(net, q)?;
    out.push_str(&format!("{}\n", interval(b.lo, b.hi)));
    if witness {
        let show = |label: &str, choices: &[VertexChoice], out: &mut String| {
            for c in choices {
                out.push_str(&format!("{label}: {} | {} = {}\n", c.child, c.given, vector(&c.vertex)));
            }
        };
        show("lo", &b.lo_witness, out);
        show("hi", &b.hi_witness, out);
    }
    Ok(())
}

fn burglary(cfg: &SolverConfig, out: &mut String) -> Outcome {
    let q = Query::parse("B=b", "A=a")?;
    out.push_str("u,sequential,global,closed_form\n");
    for k in 1..20 {
        let u = k as f64 / 20.0;
        let net = fixtures::burglary(u)?;
        let seq = cond_prob(&joint_of_bn(&select_sequential(&net, cfg)?.bayes_net)?, &q)?;
        let global = cond_prob(&global_me_model(&net, cfg)?, &q)?;
        let closed = fixtures::burglary_global_closed_form(u);
        out.push_str(&format!(
            "{},{},{},{}\n",
            format_number(u),
            format_number(seq),
            format_number(global),
            format_number(closed)
        ));
    }
    Ok(0)
}

fn example52(cfg: &SolverConfig, out: &mut String) -> Outcome {
    let net = fixtures::example52();
    let sel = select_sequential(&net, cfg)?;
    let mut ok = true;
    out.push_str("table, expected, computed\n");
    for (child, given, want) in fixtures::example52_expected_selection() {
        let given = given.parse().map_err(Failure::Lib)?;
        let got = sel.bayes_net.cpt(child, &given).expect("fixture tables exist");
        ok &= got.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-9);
        out.push_str(&format!("{child} | {given}, {}, {}\n", vector(&want), vector(got)));
    }
    let (target, evidence) = fixtures::EXAMPLE52_QUERY;
    let q = Query::parse(target, evidence)?;
    let seq = cond_prob(&joint_of_bn(&sel.bayes_net)?, &q)?;
    let b = credal_bounds(&net, &q)?;
    let (lo, hi) = fixtures::EXAMPLE52_BOUNDS;
    ok &= (seq - fixtures::EXAMPLE52_SEQUENTIAL).abs() < 1e-9;
    ok &= (b.lo - lo).abs() < 1e-9 && (b.hi - hi).abs() < 1e-9;
    out.push_str(&format!(
        "Pr({target} | {evidence}), {}, {}\n",
        format_number(fixtures::EXAMPLE52_SEQUENTIAL),
        format_number(seq)
    ));
    out.push_str(&format!("bounds, {}, {}\n", interval(lo, hi), interval(b.lo, b.hi)));
    Ok(if ok { 0 } else { EXIT_INVALID })
}
