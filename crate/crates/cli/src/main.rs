//! `lspd` command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod settings;

use settings::Settings;

#[derive(Parser, Debug)]
#[command(name = "lspd", version, about = "Depth-based classification experiments")]
struct Cli {
    /// Settings file of `key=value` lines; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Repeated experiment on a simulated example.
    Simulate {
        #[command(flatten)]
        source: SimArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Repeated random-split experiment on a CSV table.
    Bench {
        #[command(flatten)]
        table: TableArgs,
        /// Training fraction per class.
        #[arg(long)]
        train_frac: Option<String>,
        /// Fixed test table (single split).
        #[arg(long)]
        test: Option<String>,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Monte Carlo Bayes risk of simulated examples.
    BayesRisk {
        /// Comma-separated examples.
        #[arg(long)]
        example: Option<String>,
        /// Comma-separated dimensions.
        #[arg(long)]
        d: Option<String>,
        /// Draws per class.
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Empirical depth vectors against their high-dimensional limits.
    Hdlss {
        /// Comma-separated dimensions.
        #[arg(long)]
        d: Option<String>,
        #[arg(long)]
        n_train: Option<String>,
        /// Class-1 query points per dimension.
        #[arg(long)]
        draws: Option<String>,
        /// `spd`, or `A=<value>` for LSPD at h = sqrt(d)/A.
        #[arg(long)]
        h_rule: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// SPD and LSPD of query points against a labeled table.
    Depth {
        #[command(flatten)]
        table: TableArgs,
        /// Unlabeled CSV of query points.
        #[arg(long)]
        query: Option<String>,
        /// Comma-separated LSPD bandwidths.
        #[arg(long)]
        h: Option<String>,
        #[arg(long)]
        scatter: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long)]
    example: Option<String>,
    #[arg(long)]
    d: Option<String>,
    /// Training points per class.
    #[arg(long)]
    n_train: Option<String>,
    /// Test points per class.
    #[arg(long)]
    n_test: Option<String>,
}

#[derive(Args, Debug)]
struct TableArgs {
    /// Labeled CSV with a header row.
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    delimiter: Option<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Every repetition reuses the master seed.
    #[arg(long)]
    fixed_seeds: bool,
    /// Comma-separated subset of SPD,LSPD,LDA,QDA,KNN,KDE,BAYES.
    #[arg(long)]
    classifiers: Option<String>,
    /// Directory for report.txt, report.csv and raw_errors.csv.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// auto, full, diagonal or identity.
    #[arg(long)]
    scatter: Option<String>,
    /// Number of sampled bandwidths.
    #[arg(long = "M")]
    m: Option<String>,
    #[arg(long)]
    cauchy_scale: Option<String>,
    #[arg(long)]
    df: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// loo-features or kfold[:k].
    #[arg(long)]
    cv_mode: Option<String>,
    /// Training features for the additive model: loo or in-sample.
    #[arg(long)]
    fit_features: Option<String>,
}

type Pairs = Vec<(&'static str, String)>;

fn push(out: &mut Pairs, key: &'static str, v: &Option<String>) {
    if let Some(v) = v {
        out.push((key, v.clone()));
    }
}

impl SimArgs {
    fn pairs(&self, o: &mut Pairs) {
        push(o, "example", &self.example);
        push(o, "d", &self.d);
        push(o, "n-train", &self.n_train);
        push(o, "n-test", &self.n_test);
    }
}

impl TableArgs {
    fn pairs(&self, o: &mut Pairs) {
        push(o, "data", &self.data);
        push(o, "label-column", &self.label_column);
        push(o, "delimiter", &self.delimiter);
    }
}

impl RunArgs {
    fn pairs(&self, o: &mut Pairs) {
        push(o, "reps", &self.reps);
        push(o, "seed", &self.seed);
        push(o, "classifiers", &self.classifiers);
        push(o, "out", &self.out);
        if self.fixed_seeds {
            o.push(("fixed-seeds", "true".into()));
        }
    }
}

impl ModelArgs {
    fn pairs(&self, o: &mut Pairs) {
        push(o, "scatter", &self.scatter);
        push(o, "M", &self.m);
        push(o, "cauchy-scale", &self.cauchy_scale);
        push(o, "df", &self.df);
        push(o, "lambda", &self.lambda);
        push(o, "cv-mode", &self.cv_mode);
        push(o, "fit-features", &self.fit_features);
    }
}

fn overrides(cmd: &Command) -> Pairs {
    let mut o = Pairs::new();
    match cmd {
        Command::Simulate { source, run, model } => {
            source.pairs(&mut o);
            run.pairs(&mut o);
            model.pairs(&mut o);
        }
        Command::Bench { table, train_frac, test, run, model } => {
            table.pairs(&mut o);
            push(&mut o, "train-frac", train_frac);
            push(&mut o, "test", test);
            run.pairs(&mut o);
            model.pairs(&mut o);
        }
        Command::BayesRisk { example, d, n, seed, out } => {
            push(&mut o, "example", example);
            push(&mut o, "d", d);
            push(&mut o, "n", n);
            push(&mut o, "seed", seed);
            push(&mut o, "out", out);
        }
        Command::Hdlss { d, n_train, draws, h_rule, seed, out } => {
            push(&mut o, "d", d);
            push(&mut o, "n-train", n_train);
            push(&mut o, "draws", draws);
            push(&mut o, "h-rule", h_rule);
            push(&mut o, "seed", seed);
            push(&mut o, "out", out);
        }
        Command::Depth { table, query, h, scatter, out } => {
            table.pairs(&mut o);
            push(&mut o, "query", query);
            push(&mut o, "h", h);
            push(&mut o, "scatter", scatter);
            push(&mut o, "out", out);
        }
    }
    o
}

fn exit_code(e: &lspd::Error) -> u8 {
    use lspd::Error::*;
    match e {
        InvalidParameter(_) => 1,
        Numerical(_) => 3,
        InsufficientData(_) | InvalidData(_) | Shape { .. } | InvalidLabels(_) | DegenerateFeature(_) | Ingest(_) | Io(_) => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = Settings::load(cli.config.as_deref(), &overrides(&cli.command)).and_then(|s| match cli.command {
        Command::Simulate { .. } => commands::simulate(&s),
        Command::Bench { .. } => commands::bench(&s),
        Command::BayesRisk { .. } => commands::bayes_risk(&s),
        Command::Hdlss { .. } => commands::hdlss(&s),
        Command::Depth { .. } => commands::depth(&s),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
