use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use debtswap::classify::{classify_with, enumerate_swaps, SwapClassification};
use debtswap::dynamics::{
    run_local_search_maxassets, run_staged_semiswap, run_v_improving, SearchStatus, SwapSequence, TieBreak,
};
use debtswap::gadgets::{self, GadgetInstance, Graph};
use debtswap::io::{self, IoError};
use debtswap::reach::{greedy_reach, verify_sequence, ReachConstraint, ReachError};
use debtswap::{clear, BankId, DebtSwap, FinancialNetwork, Money};

#[derive(Parser)]
#[command(name = "debtswap", version, about = "Clearing, debt swaps and swap dynamics on financial networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the clearing state as JSON.
    Clear { file: PathBuf },
    /// List every valid swap with its classification.
    Swaps {
        file: PathBuf,
        /// Only semi-positive swaps.
        #[arg(long)]
        semi_positive: bool,
        /// Only swaps that strictly improve this bank.
        #[arg(long = "v", value_name = "BANK")]
        focus: Option<String>,
    },
    /// Classify the swap of edges (D1,C1) and (D2,C2).
    Classify {
        file: PathBuf,
        debtor1: String,
        creditor1: String,
        debtor2: String,
        creditor2: String,
    },
    /// Run a swap dynamic and print the sequence.
    Dynamics(DynamicsArgs),
    /// Print a greedy reaching sequence from one network to another.
    Reach { from: PathBuf, to: PathBuf },
    /// Check a sequence file against two networks and an optional constraint.
    Verify {
        from: PathBuf,
        to: PathBuf,
        seq: PathBuf,
        /// BANK:FLOOR
        #[arg(long, conflicts_with = "v_improving")]
        min_assets: Option<String>,
        #[arg(long, value_name = "BANK")]
        v_improving: Option<String>,
    },
    /// Generate a gadget network.
    Gen(GenArgs),
    /// Render a network.
    Export {
        file: PathBuf,
        #[arg(long, required = true)]
        dot: bool,
        /// Annotate edges with clearing payments.
        #[arg(long)]
        clear: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    VImproving,
    Staged,
    LocalSearch,
}

#[derive(Clone, Copy, ValueEnum)]
enum Tie {
    Lex,
    MaxGain,
    MinGain,
    Last,
}

#[derive(Args)]
struct DynamicsArgs {
    file: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long = "v", value_name = "BANK")]
    focus: Option<String>,
    #[arg(long, value_enum, default_value = "lex")]
    tie: Tie,
    /// Maximum active in-degree for the staged run.
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 10_000)]
    max_steps: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Exponential,
    Max2sat,
    Setcover,
    Is,
    Partition,
    #[value(name = "3partition")]
    ThreePartition,
    Satconn,
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    kind: GenKind,
    /// Bank count for `exponential`; input file for the others (DIMACS CNF,
    /// set-system JSON, integer list, or for `is` an edge list like `1-2 2-3`).
    input: String,
    /// Output network file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Truth assignment as a 0/1 string (max2sat start, satconn start).
    #[arg(long)]
    assignment: Option<String>,
    /// satconn: target assignment.
    #[arg(long)]
    target: Option<String>,
    /// satconn: file for the target network.
    #[arg(long)]
    target_out: Option<PathBuf>,
    /// setcover: cover size, overriding the file.
    #[arg(long)]
    c: Option<usize>,
    /// is: node count.
    #[arg(long)]
    nodes: Option<usize>,
    /// Append a path of this many banks behind the focus bank.
    #[arg(long)]
    amplify: Option<usize>,
}

enum Failure {
    Negative(String),
    Usage(String),
    Internal(String),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Unsupported(_) => Failure::Internal(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn internal(e: impl std::fmt::Display) -> Failure {
    Failure::Internal(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

type Out = Result<String, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(Failure::Negative(msg)) => {
            println!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cmd: Command) -> Out {
    match cmd {
        Command::Clear { file } => cmd_clear(&file),
        Command::Swaps { file, semi_positive, focus } => cmd_swaps(&file, semi_positive, focus.as_deref()),
        Command::Classify { file, debtor1, creditor1, debtor2, creditor2 } => {
            cmd_classify(&file, [&debtor1, &creditor1, &debtor2, &creditor2])
        }
        Command::Dynamics(args) => cmd_dynamics(&args),
        Command::Reach { from, to } => cmd_reach(&from, &to),
        Command::Verify { from, to, seq, min_assets, v_improving } => {
            cmd_verify(&from, &to, &seq, min_assets.as_deref(), v_improving.as_deref())
        }
        Command::Gen(args) => cmd_gen(&args),
        Command::Export { file, dot: _, clear: with_state } => {
            let net = io::load(&file)?;
            let state = if with_state { Some(clear(&net).map_err(internal)?) } else { None };
            Ok(io::export_dot(&net, state.as_ref()))
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}

fn money(m: &Money) -> Value {
    Value::String(m.to_string())
}

fn bank(net: &FinancialNetwork, name: &str) -> Result<BankId, Failure> {
    net.bank_by_name(name)
        .ok_or_else(|| usage(format!("unknown bank '{name}'")))
}

fn cmd_clear(file: &Path) -> Out {
    let net = io::load(file)?;
    let st = clear(&net).map_err(internal)?;
    let mut assets = Map::new();
    for v in net.banks() {
        assets.insert(net.name(v).to_string(), money(st.asset(v)));
    }
    let payments: Vec<Value> = net
        .edges()
        .iter()
        .map(|e| {
            json!({
                "debtor": net.name(e.debtor),
                "creditor": net.name(e.creditor),
                "payment": money(st.payment(e.id)),
                "liability": money(&e.liability),
            })
        })
        .collect();
    Ok(pretty(&json!({ "assets": assets, "payments": payments })))
}

fn describe(net: &FinancialNetwork, c: &SwapClassification) -> Value {
    let a = net.edge(c.swap.e1);
    let b = net.edge(c.swap.e2);
    let improved: Vec<&str> = c.improved_banks.iter().map(|&v| net.name(v)).collect();
    json!({
        "debtor1": net.name(a.debtor),
        "creditor1": net.name(a.creditor),
        "debtor2": net.name(b.debtor),
        "creditor2": net.name(b.creditor),
        "liability": money(&a.liability),
        "kind": c.kind.to_string(),
        "positive": c.positive,
        "semiPositive": c.semi_positive,
        "paretoImproving": c.pareto_improving,
        "deltaV1": c.delta_v1.to_string(),
        "deltaV2": c.delta_v2.to_string(),
        "improved": improved,
    })
}

fn cmd_swaps(file: &Path, semi: bool, focus: Option<&str>) -> Out {
    let net = io::load(file)?;
    let focus = focus.map(|n| bank(&net, n)).transpose()?;
    let before = clear(&net).map_err(internal)?;
    let mut out = Vec::new();
    for s in enumerate_swaps(&net) {
        let c = classify_with(&net, &before, s).map_err(internal)?;
        if semi && !c.semi_positive {
            continue;
        }
        if focus.is_some_and(|v| !c.improves(v)) {
            continue;
        }
        out.push(describe(&net, &c));
    }
    Ok(pretty(&Value::Array(out)))
}

fn cmd_classify(file: &Path, names: [&String; 4]) -> Out {
    let net = io::load(file)?;
    let edge = |d: &str, c: &str| -> Result<_, Failure> {
        net.find_edge(bank(&net, d)?, bank(&net, c)?)
            .ok_or_else(|| usage(format!("no edge from '{d}' to '{c}'")))
    };
    let swap = DebtSwap::new(edge(names[0], names[1])?, edge(names[2], names[3])?);
    debtswap::transforms::check_swap(&net, swap).map_err(|e| Failure::Negative(e.to_string()))?;
    let before = clear(&net).map_err(internal)?;
    let c = classify_with(&net, &before, swap).map_err(internal)?;
    Ok(pretty(&describe(&net, &c)))
}

fn cmd_dynamics(args: &DynamicsArgs) -> Out {
    let net = io::load(&args.file)?;
    let focus = || -> Result<BankId, Failure> {
        let name = args.focus.as_deref().ok_or_else(|| usage("--v is required for this mode"))?;
        bank(&net, name)
    };
    let tie = match args.tie {
        Tie::Lex => TieBreak::Lexicographic,
        Tie::MaxGain => TieBreak::MaxGain,
        Tie::MinGain => TieBreak::MinGain,
        Tie::Last => TieBreak::Last,
    };
    let (seq, status): (SwapSequence, &str) = match args.mode {
        Mode::VImproving => (run_v_improving(&net, focus()?, tie).map_err(internal)?.1, "local-optimum"),
        Mode::Staged => (run_staged_semiswap(&net, args.d).map_err(internal)?.1, "local-optimum"),
        Mode::LocalSearch => {
            let (_, seq, st) = run_local_search_maxassets(&net, focus()?, args.max_steps).map_err(internal)?;
            let st = match st {
                SearchStatus::LocalOptimum => "local-optimum",
                SearchStatus::BudgetExhausted => "budget-exhausted",
            };
            (seq, st)
        }
    };
    eprintln!("{} steps, {status}", seq.len());
    Ok(io::sequence_to_json(&seq)?)
}

fn cmd_reach(from: &Path, to: &Path) -> Out {
    let f = io::load(from)?;
    let g = io::load(to)?;
    match greedy_reach(&f, &g) {
        Ok(seq) => Ok(io::sequence_to_json(&seq)?),
        Err(ReachError::Inconsistent) => Err(Failure::Negative("inconsistent".into())),
        Err(ReachError::IdenticalNetworks) => Err(Failure::Negative("identical networks".into())),
        Err(e @ ReachError::Stuck) => Err(internal(e)),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn cmd_verify(from: &Path, to: &Path, seq: &Path, min: Option<&str>, vimp: Option<&str>) -> Out {
    let f = io::load(from)?;
    let g = io::load(to)?;
    let text = read_text(seq)?;
    let doc: io::SequenceDocument = serde_json::from_str(&text).map_err(usage)?;
    let constraint = match (min, vimp) {
        (Some(arg), _) => {
            let (name, floor) = arg
                .rsplit_once(':')
                .ok_or_else(|| usage("--min-assets expects BANK:FLOOR"))?;
            let floor: Money = floor.parse().map_err(usage)?;
            ReachConstraint::MinAssets(bank(&f, name)?, floor)
        }
        (None, Some(name)) => ReachConstraint::VImproving(bank(&f, name)?),
        (None, None) => ReachConstraint::None,
    };
    let swaps = match doc.resolve(&f) {
        Ok(s) => s,
        Err(e) => return Err(Failure::Negative(format!("false: {e}"))),
    };
    let verdict = verify_sequence(&f, &g, &swaps, &constraint);
    let line = format!("{}: {}\n", verdict.ok, verdict.reason);
    if verdict.ok {
        Ok(line)
    } else {
        Err(Failure::Negative(line.trim_end().to_string()))
    }
}

fn parse_assignment(s: &str, k: usize) -> Result<Vec<bool>, Failure> {
    let bits: Vec<bool> = s
        .chars()
        .map(|c| match c {
            '0' | 'F' | 'f' => Ok(false),
            '1' | 'T' | 't' => Ok(true),
            _ => Err(usage(format!("bad assignment character '{c}'"))),
        })
        .collect::<Result<_, _>>()?;
    if bits.len() != k {
        return Err(usage(format!("assignment needs {k} values, got {}", bits.len())));
    }
    Ok(bits)
}

fn parse_graph(text: &str, nodes: Option<usize>) -> Result<Graph, Failure> {
    let mut edges = Vec::new();
    for tok in text.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
        let (a, b) = tok.split_once('-').ok_or_else(|| usage(format!("bad edge '{tok}'")))?;
        let a: usize = a.parse().map_err(usage)?;
        let b: usize = b.parse().map_err(usage)?;
        if a == 0 || b == 0 {
            return Err(usage("nodes are numbered from 1"));
        }
        edges.push((a - 1, b - 1));
    }
    let max = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
    let nodes = nodes.unwrap_or(max);
    if nodes < max {
        return Err(usage(format!("edge list mentions node {max} but --nodes is {nodes}")));
    }
    Ok(Graph { nodes, edges })
}

fn emit(net: &FinancialNetwork, out: Option<&Path>) -> Out {
    match out {
        Some(p) => {
            io::save(net, p)?;
            Ok(String::new())
        }
        None => Ok(io::network_to_json(net)?),
    }
}

fn cmd_gen(args: &GenArgs) -> Out {
    let input = || -> Result<String, Failure> { read_text(Path::new(&args.input)) };
    let mut g: GadgetInstance = match args.kind {
        GenKind::Exponential => {
            let n: usize = args.input.parse().map_err(usage)?;
            gadgets::gen_exponential(n).map_err(usage)?
        }
        GenKind::Max2sat => {
            let f = io::parse_dimacs(&input()?)?;
            let g = gadgets::gen_max2sat(&f).map_err(usage)?;
            match &args.assignment {
                Some(a) => GadgetInstance {
                    network: gadgets::assignment_network(&g, &parse_assignment(a, f.num_vars)?),
                    ..g
                },
                None => g,
            }
        }
        GenKind::Setcover => {
            let doc = io::parse_set_system(&input()?)?;
            let c = args.c.or(doc.c).ok_or_else(|| usage("cover size missing (--c)"))?;
            gadgets::gen_setcover(&doc.system(), c).map_err(usage)?
        }
        GenKind::Is => gadgets::gen_independent_set(&parse_graph(&input()?, args.nodes)?).map_err(usage)?,
        GenKind::Partition => gadgets::gen_partition(&io::parse_int_list(&input()?)?).map_err(usage)?,
        GenKind::ThreePartition => {
            let vals = io::parse_int_list(&input()?)?;
            gadgets::gen_3partition(&vals, vals.len()).map_err(usage)?
        }
        GenKind::Satconn => {
            let f = io::parse_dimacs(&input()?)?;
            let init = parse_assignment(args.assignment.as_deref().ok_or_else(|| usage("--assignment required"))?, f.num_vars)?;
            let target = parse_assignment(args.target.as_deref().ok_or_else(|| usage("--target required"))?, f.num_vars)?;
            let (start, goal, floor) = gadgets::gen_sat_connectivity(&f, &init, &target).map_err(usage)?;
            let target_out = args.target_out.as_deref().ok_or_else(|| usage("--target-out required"))?;
            io::save(&goal, target_out)?;
            let mut text = emit(&start.network, args.out.as_deref())?;
            if args.out.is_some() {
                text = format!("floor {floor}\n");
            }
            return Ok(text);
        }
    };
    if let Some(b) = args.amplify {
        g = gadgets::add_amplifier(&g, b).map_err(usage)?;
    }
    emit(&g.network, args.out.as_deref())
}
