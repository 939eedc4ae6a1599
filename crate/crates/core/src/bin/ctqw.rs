use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use ctqw::experiment::{
    resolve_output, run, write_output_file, Command, ExperimentConfig, Format, Output, Provenance,
};
use ctqw::markov::GraphFamily;

#[derive(Parser)]
#[command(name = "ctqw", version, about = "Quantum walk search, fast-forwarding and ground-state preparation")]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout if absent). Relative paths resolve under $CTQW_OUTPUT_DIR.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// csv or json
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Override a tolerance, e.g. `--tol cells_per_unit=16`.
    #[arg(long = "tol", global = true, value_parser = parse_tolerance)]
    tolerances: Vec<(String, f64)>,
    #[command(subcommand)]
    command: Option<Sub>,
}

#[derive(Args, Default)]
struct GraphArgs {
    /// family:size, e.g. cycle:16
    #[arg(long)]
    graph: Option<String>,
    /// Chain document (JSON).
    #[arg(long)]
    chain: Option<PathBuf>,
    /// Keep the chain as given instead of making it lazy.
    #[arg(long)]
    no_lazy: bool,
    /// Node list "0,3", "single" or "fraction:0.25".
    #[arg(long)]
    marked: Option<String>,
}

#[derive(Subcommand)]
enum Sub {
    /// Repeat the randomized search and report the success frequency.
    Search {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        c_t: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        max_rounds: Option<usize>,
    },
    /// Bound-based scaling sweep over graph families and sizes.
    Scaling {
        #[arg(long, value_delimiter = ',')]
        families: Option<Vec<GraphFamily>>,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        marked: Option<String>,
        #[arg(long)]
        c_t: Option<f64>,
    },
    /// Check the inequalities behind the fast-forward bound numerically.
    Verify {
        #[command(flatten)]
        graph: GraphArgs,
        /// success-prob, ct-dt, lazy-square or all
        #[arg(long)]
        lemma: Option<String>,
        /// Horizon, a number or "auto" (ceil(3 HT)).
        #[arg(long = "T")]
        horizon: Option<String>,
        #[arg(long)]
        s: Option<f64>,
        /// Random (t, t') pairs for success-prob.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Fast-forward success bound over the interpolation grid.
    Fastforward {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long = "T")]
        horizon: Option<String>,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        c_t: Option<f64>,
        /// Also compute the exact full-space value.
        #[arg(long)]
        exact: bool,
    },
    /// Ground-state preparation by Gaussian time evolution.
    Groundstate {
        /// Instance file; a random instance is drawn when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Simulate the ancilla circuit instead of the exact map.
        #[arg(long)]
        ancilla: bool,
    },
}

fn parse_tolerance(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected key=value")?;
    let v = v.parse::<f64>().map_err(|e| e.to_string())?;
    Ok((k.to_string(), v))
}

fn apply_graph(c: &mut ExperimentConfig, g: GraphArgs) {
    c.graph = g.graph;
    c.chain = g.chain;
    c.marked = g.marked;
    if g.no_lazy {
        c.lazy = Some(false);
    }
}

fn flags_config(cli: Cli) -> (Option<PathBuf>, ExperimentConfig) {
    let mut c = ExperimentConfig {
        seed: cli.seed,
        output: cli.output,
        format: cli.format,
        tolerances: cli.tolerances.into_iter().collect(),
        ..Default::default()
    };
    match cli.command {
        Some(Sub::Search { graph, c_t, trials, max_rounds }) => {
            c.command = Some(Command::Search);
            apply_graph(&mut c, graph);
            (c.c_t, c.trials, c.max_rounds) = (c_t, trials, max_rounds);
        }
        Some(Sub::Scaling { families, sizes, marked, c_t }) => {
            c.command = Some(Command::Scaling);
            (c.families, c.sizes, c.marked, c.c_t) = (families, sizes, marked, c_t);
        }
        Some(Sub::Verify { graph, lemma, horizon, s, trials }) => {
            c.command = Some(Command::Verify);
            apply_graph(&mut c, graph);
            (c.lemma, c.horizon, c.s, c.trials) = (lemma, horizon, s, trials);
        }
        Some(Sub::Fastforward { graph, horizon, s, c_t, exact }) => {
            c.command = Some(Command::Fastforward);
            apply_graph(&mut c, graph);
            (c.horizon, c.s, c.c_t) = (horizon, s, c_t);
            c.exact = exact.then_some(true);
        }
        Some(Sub::Groundstate { input, dim, eta, epsilon, ancilla }) => {
            c.command = Some(Command::Groundstate);
            (c.input, c.dim, c.overlap, c.accuracy) = (input, dim, eta, epsilon);
            c.ancilla = ancilla.then_some(true);
        }
        None => {}
    }
    (cli.config, c)
}

fn fail(msg: String) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": msg }));
    ExitCode::FAILURE
}

fn execute(config: ExperimentConfig) -> Result<Output, ctqw::Error> {
    let output = run(&config)?;
    let provenance = Provenance::of(&config);
    let format = config.format.unwrap_or_default();
    match resolve_output(config.output.as_deref()) {
        Some(path) => write_output_file(&output, format, &provenance, &path)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            output.write(format, &provenance, &mut lock)?;
            lock.flush()?;
            if format == Format::Csv {
                eprintln!("{}", serde_json::to_string(&provenance)?);
            }
        }
    }
    Ok(output)
}

fn main() -> ExitCode {
    if std::env::args_os().len() <= 1 {
        let _ = Cli::command().print_help();
        return ExitCode::from(2);
    }
    let cli = Cli::parse();
    let (config_path, flags) = flags_config(cli);
    let config = match config_path {
        Some(path) => match ExperimentConfig::from_json_file(&path) {
            Ok(file) => file.overridden_by(flags),
            Err(e) => return fail(format!("{}: {e}", path.display())),
        },
        None => flags,
    };
    if config.command.is_none() {
        let _ = Cli::command().print_help();
        return ExitCode::from(2);
    }
    match execute(config) {
        Ok(output) if output.has_failure() => {
            let Output::Verify(reports) = &output else { unreachable!() };
            let failed: Vec<_> = reports.iter().filter(|r| r.verdict == ctqw::bounds::Verdict::Fail).map(|r| &r.instance).collect();
            fail(format!("verification failed: {failed:?}"))
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => fail(e.to_string()),
    }
}
