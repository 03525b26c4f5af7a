use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use relnn::data::{convert_movielens, Dataset, MovieLensFiles};
use relnn::experiment::{
    curve_csv, extrapolation_curve, predict, run_once, sweep, sweep_csv, truncate_training,
    Prepared, Scored, Task,
};
use relnn::learn::{loss_and_gradient, train, LabelSet, TrainConfig};
use relnn::metrics::{evaluate, mean_baseline, MetricsReport};
use relnn::modelspec::{load_trained, serialize_trained, trained_mix_lambda};
use relnn::oracle::numeric_grad;
use relnn::relcore::ParameterStore;

#[derive(Parser)]
#[command(
    name = "relnn",
    version,
    about = "Train and evaluate relational neural networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on the training part of the split; write parameters and training_log.csv
    Train {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        opts: TrainOpts,
        /// Parameter file to write; training_log.csv goes next to it
        #[arg(long)]
        out: PathBuf,
    },
    /// Score trained parameters (or the mean baseline) on the test part of the split
    Eval {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.8)]
        split: f64,
        #[arg(long, value_enum, default_value_t = Baseline::None)]
        baseline: Baseline,
        /// Append a CSV row of the metrics, writing a header to a new file
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the target prediction of every object
    Predict {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        params: PathBuf,
        /// Write to this file instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the analytic gradient with central finite differences
    Gradcheck {
        #[command(flatten)]
        input: Input,
        /// Parameters to check at; a fresh initialization when absent
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        threshold: f64,
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
    /// Log loss on the test objects when only their first k cells of a relation are kept
    Extrapolate {
        /// Model files, one per curve (e.g. an RLR and a RelNN)
        #[arg(long = "model", required = true, num_args = 1)]
        models: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Trained parameters, one per model in the same order; models are trained when absent
        #[arg(long = "params", num_args = 1)]
        params: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        k_list: Vec<usize>,
        #[arg(long, default_value = "Likes")]
        relation: String,
        /// Before training, keep only the first r cells of each training object, r ~ U{0..=max}
        #[arg(long)]
        train_truncation: Option<usize>,
        #[command(flatten)]
        opts: TrainOpts,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Train generated MovieLens models over a grid of hidden-layer and latent counts
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = TaskArg::Gender)]
        task: TaskArg,
        /// Hidden-layer counts and latent counts, e.g. 0,1,2x0,1,2
        #[arg(long, default_value = "0,1,2x0,1,2")]
        grid: String,
        #[command(flatten)]
        opts: TrainOpts,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Convert the raw MovieLens-1M files into a manifest directory
    ConvertMovielens {
        /// Directory holding ratings.dat, users.dat and movies.dat
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Input {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct TrainOpts {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    l1: f64,
    /// Overrides the model's MIX coefficient
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    /// Training fraction; 1 trains on every label
    #[arg(long, default_value_t = 0.8)]
    split: f64,
}

impl TrainOpts {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            restarts: self.restarts,
            l1_strength: self.l1,
            lambda: self.lambda,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Mean,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Gender,
    Age,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Train { input, opts, out } => cmd_train(&input, &opts, &out),
        Command::Eval {
            input,
            params,
            seed,
            split,
            baseline,
            csv,
        } => cmd_eval(
            &input,
            params.as_deref(),
            seed,
            split,
            baseline,
            csv.as_deref(),
        ),
        Command::Predict { input, params, out } => cmd_predict(&input, &params, out.as_deref()),
        Command::Gradcheck {
            input,
            params,
            seed,
            threshold,
            h,
            corrupt_gradient,
        } => cmd_gradcheck(
            &input,
            params.as_deref(),
            seed,
            threshold,
            h,
            corrupt_gradient,
        ),
        Command::Extrapolate {
            models,
            data,
            params,
            k_list,
            relation,
            train_truncation,
            opts,
            csv,
        } => cmd_extrapolate(
            &models,
            &data,
            &params,
            &k_list,
            &relation,
            train_truncation,
            &opts,
            csv.as_deref(),
        ),
        Command::Sweep {
            data,
            task,
            grid,
            opts,
            csv,
        } => cmd_sweep(&data, task, &grid, &opts, csv.as_deref()),
        Command::ConvertMovielens { raw, out } => {
            let ds = convert_movielens(&MovieLensFiles::in_dir(&raw))?;
            ds.save(&out)?;
            for (name, objs) in &ds.populations {
                println!("{name}={}", objs.len());
            }
            println!("Likes={}", ds.fact_count("Likes"));
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn prepare(model: &Path, data: &Path) -> Result<Prepared, Failure> {
    let text = read(model)?;
    let ds = Dataset::load(data)?;
    Ok(Prepared::new(&text, &ds).map_err(|e| format!("{}: {e}", model.display()))?)
}

fn train_labels(p: &Prepared, fraction: f64, seed: u64) -> Result<LabelSet, Failure> {
    if fraction >= 1.0 {
        let keep: Vec<(usize, f64)> = p.labels.iter().collect();
        let (o, y) = keep.into_iter().unzip();
        return Ok(LabelSet::new(o, y));
    }
    Ok(p.split(fraction, seed)?.train)
}

fn load_params(p: &mut Prepared, path: &Path) -> Result<ParameterStore, Failure> {
    let text = read(path)?;
    if let Some(l) = trained_mix_lambda(&text)? {
        p.model.graph.set_mix_lambda(l);
    }
    Ok(load_trained(&text, &p.model.schema, &p.model.template)
        .map_err(|e| format!("{}: {e}", path.display()))?)
}

fn cmd_train(input: &Input, opts: &TrainOpts, out: &Path) -> Outcome {
    let p = prepare(&input.model, &input.data)?;
    let labels = train_labels(&p, opts.split, opts.seed)?;
    let cfg = opts.config();
    let (store, log) = train(
        &p.model.graph,
        &p.model.schema,
        &p.bound.interp,
        &p.model.template,
        &labels,
        &cfg,
        None,
    )?;
    let graph = cfg.apply_to(&p.model.graph);
    write(out, &serialize_trained(&store, &graph, &p.model.schema)?)?;
    let log_path = out
        .parent()
        .unwrap_or(Path::new("."))
        .join("training_log.csv");
    write(&log_path, &log.to_csv())?;
    let best = log.best_restart.unwrap_or(0);
    println!("train_loss={:.6}", log.restarts[best].final_train_loss);
    Ok(())
}

fn cmd_eval(
    input: &Input,
    params: Option<&Path>,
    seed: u64,
    fraction: f64,
    baseline: Baseline,
    csv: Option<&Path>,
) -> Outcome {
    let mut p = prepare(&input.model, &input.data)?;
    let split = p.split(fraction, seed)?;
    let report = match (baseline, params) {
        (Baseline::Mean, _) => mean_baseline(&split.train, &split.test, p.target_population()),
        (Baseline::None, Some(path)) => {
            let store = load_params(&mut p, path)?;
            let pred = predict(&p.model.graph, &p.model.schema, &p.bound.interp, &store)?;
            evaluate(&pred, &split.test)
        }
        (Baseline::None, None) => {
            return Err(Failure::Usage(
                "eval needs --params or --baseline mean".into(),
            ))
        }
    };
    println!("{report}");
    if let Some(path) = csv {
        let mut text = if path.exists() {
            read(path)?
        } else {
            format!("{}\n", MetricsReport::CSV_HEADER)
        };
        text.push_str(&report.csv_row());
        text.push('\n');
        write(path, &text)?;
    }
    Ok(())
}

fn cmd_predict(input: &Input, params: &Path, out: Option<&Path>) -> Outcome {
    let mut p = prepare(&input.model, &input.data)?;
    let store = load_params(&mut p, params)?;
    let pred = predict(&p.model.graph, &p.model.schema, &p.bound.interp, &store)?;
    let schema = &p.model.schema;
    let pop = schema.pop(schema.pred(p.model.graph.target.prediction).args[0]);
    let mut text = String::new();
    for (i, v) in pred.iter().enumerate() {
        text.push_str(&format!("{}\t{v:.6}\n", pop.object_name(i)));
    }
    match out {
        Some(path) => write(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_gradcheck(
    input: &Input,
    params: Option<&Path>,
    seed: u64,
    threshold: f64,
    h: f64,
    corrupt: bool,
) -> Outcome {
    let mut p = prepare(&input.model, &input.data)?;
    let store = match params {
        Some(path) => load_params(&mut p, path)?,
        None => {
            let mut rng = relnn::rng::substream(seed, "init");
            let mut s = p
                .model
                .template
                .instantiate(&p.model.schema, Default::default(), &mut rng);
            s.label_mean = p.labels.mean().unwrap_or(0.5);
            s
        }
    };
    let (m, s, interp) = (&p.model, &p.model.schema, &p.bound.interp);
    let (_, mut tape) = loss_and_gradient(&m.graph, s, interp, &store, &p.labels)?;
    if corrupt {
        if let Some(i) = store.weights.iter().position(|w| !w.frozen) {
            tape.d_weights[i] += 1.0;
        }
    }
    let num = numeric_grad(&m.graph, s, interp, &store, &p.labels, h)?;
    let rel = |a: f64, b: f64| {
        let d = (a - b).abs();
        if d <= 1e-8 {
            0.0
        } else {
            d / a.abs().max(b.abs())
        }
    };
    let mut groups: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for (i, w) in store.weights.iter().enumerate() {
        if w.frozen {
            continue;
        }
        let e = groups.entry("weights".into()).or_default();
        e.0 += 1;
        e.1 = e.1.max(rel(tape.d_weights[i], num.weights[i]));
    }
    for (pred, table) in &num.latents {
        let analytic = tape.d_latents.get(pred);
        let e = groups
            .entry(format!("latent {}", s.pred_name(*pred)))
            .or_default();
        for (j, b) in table.iter().enumerate() {
            let a = analytic.map_or(0.0, |g| g[j]);
            e.0 += 1;
            e.1 = e.1.max(rel(a, *b));
        }
    }
    let mut worst: f64 = 0.0;
    for (name, (n, err)) in &groups {
        println!("{name}: {n} parameters, max relative error {err:.3e}");
        worst = worst.max(*err);
    }
    println!("max_relative_error={worst:.3e}");
    if worst > threshold {
        return Err(Failure::Runtime(format!(
            "gradient check failed: {worst:.3e} > {threshold:.0e}"
        )));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_extrapolate(
    models: &[PathBuf],
    data: &Path,
    params: &[PathBuf],
    ks: &[usize],
    relation: &str,
    train_truncation: Option<usize>,
    opts: &TrainOpts,
    csv: Option<&Path>,
) -> Outcome {
    if ks.is_empty() {
        return Err(Failure::Usage("--k-list must name at least one k".into()));
    }
    if !params.is_empty() && params.len() != models.len() {
        return Err(Failure::Usage(
            "give either no --params or one per --model".into(),
        ));
    }
    let ds = Dataset::load(data)?;
    let cfg = opts.config();
    let mut trained = Vec::new();
    let mut test: Option<LabelSet> = None;
    for (i, path) in models.iter().enumerate() {
        let mut p =
            Prepared::new(&read(path)?, &ds).map_err(|e| format!("{}: {e}", path.display()))?;
        let split = p.split(opts.split, opts.seed)?;
        if test.as_ref().is_some_and(|t| *t != split.test) {
            return Err(Failure::Runtime(
                "models disagree on the test objects".into(),
            ));
        }
        let (graph, store) = match params.get(i) {
            Some(pp) => {
                let store = load_params(&mut p, pp)?;
                (p.model.graph.clone(), store)
            }
            None => {
                if let Some(max) = train_truncation {
                    let seed = relnn::rng::derive_seed(opts.seed, "truncation");
                    truncate_training(&mut p, relation, &split.train, max, seed)?;
                }
                let run = run_once(&p, &cfg, opts.split, opts.seed)?;
                (run.graph, run.store)
            }
        };
        let name = path
            .file_stem()
            .map_or_else(|| format!("model{i}"), |s| s.to_string_lossy().into_owned());
        test = Some(split.test);
        trained.push((name, p, graph, store));
    }
    let scored: Vec<Scored<'_>> = trained
        .iter()
        .map(|(name, p, graph, store)| Scored {
            name,
            prepared: p,
            graph,
            store,
        })
        .collect();
    let points = extrapolation_curve(
        &scored,
        relation,
        test.as_ref().expect("at least one model"),
        ks,
    )?;
    emit(&curve_csv(&points), csv)
}

fn cmd_sweep(
    data: &Path,
    task: TaskArg,
    grid: &str,
    opts: &TrainOpts,
    csv: Option<&Path>,
) -> Outcome {
    let parse = |s: &str| -> Result<Vec<usize>, Failure> {
        s.split(',')
            .map(|x| {
                x.trim()
                    .parse()
                    .map_err(|_| Failure::Usage(format!("invalid grid entry '{x}'")))
            })
            .collect()
    };
    let (hidden, latents) = grid
        .split_once('x')
        .ok_or_else(|| Failure::Usage(format!("grid '{grid}' is not of the form H,..xL,..")))?;
    let (hidden, latents) = (parse(hidden)?, parse(latents)?);
    let cells: Vec<(usize, usize)> = hidden
        .iter()
        .flat_map(|&h| latents.iter().map(move |&l| (h, l)))
        .collect();
    let task = match task {
        TaskArg::Gender => Task::Gender,
        TaskArg::Age => Task::Age,
    };
    let ds = Dataset::load(data)?;
    let rows = sweep(&ds, task, &cells, &opts.config(), opts.split, opts.seed)?;
    emit(&sweep_csv(&rows), csv)
}

fn emit(text: &str, csv: Option<&Path>) -> Outcome {
    match csv {
        Some(path) => write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
