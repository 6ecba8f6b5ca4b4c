//! `uniwalk` command-line front end.
//!
//! Every command resolves a [`RunConfig`], does its work inside a thread pool
//! of the configured size and writes a JSON run manifest next to its main
//! output (or to `--manifest`).

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::parser::ValueSource;
use clap::{Arg, ArgMatches, Command};

use crate::config::{read_config_file, FileDigest, Manifest, RunConfig, KEYS};
use crate::error::{Error, Result};
use crate::eval::{format_table, format_tsv, run_cv, train_uniwalk, CvReport, Dataset, Method};
use crate::graph::WalkKind;
use crate::ingest::{kfold_split, parse_ratings, parse_trust, write_ratings, Delimiter, RatingRecord, SocialEdge, TrustParse};
use crate::model::TrainedModel;
use crate::recommender::Explainer;
use crate::synthetic::{generate, write_trust, SynthConfig};
use crate::walker::{generate_walks, write_walks};

pub fn command() -> Command {
    let mut cmd = Command::new("uniwalk")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Explainable rating prediction from ratings and a social network")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .env("UNIWALK_CONFIG")
                .value_name("FILE")
                .global(true)
                .help("key = value configuration file"),
        );
    for (key, env, help) in KEYS {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(*key)
                .env(*env)
                .value_name("VALUE")
                .global(true)
                .help(*help),
        );
    }
    cmd.subcommand(Command::new("train").about("Train a model and write it with its trace"))
        .subcommand(Command::new("eval").about("Cross-validate methods and print a results table"))
        .subcommand(Command::new("recommend").about("Top-n recommendations for one user"))
        .subcommand(Command::new("explain").about("Recommendations with explanations as a JSON report"))
        .subcommand(
            Command::new("walks").about("Dump one iteration of random walks").arg(
                Arg::new("kind")
                    .long("kind")
                    .value_name("KIND")
                    .default_value("positive")
                    .help("positive, negative or unweighted"),
            ),
        )
        .subcommand(
            Command::new("synth")
                .about("Generate synthetic ratings.txt and trust.txt into --output")
                .arg(Arg::new("users").long("users").value_name("N").default_value("1500"))
                .arg(Arg::new("items").long("items").value_name("N").default_value("2000"))
                .arg(Arg::new("communities").long("communities").value_name("N").default_value("12"))
                .arg(Arg::new("ratings-per-user").long("ratings-per-user").value_name("X").default_value("23"))
                .arg(Arg::new("friends-per-user").long("friends-per-user").value_name("X").default_value("2.5"))
                .arg(Arg::new("homophily").long("homophily").value_name("P").default_value("0.85"))
                .arg(Arg::new("noise").long("noise").value_name("SD").default_value("0.45")),
        )
}

/// Resolve the configuration of a parsed invocation.
pub fn resolve_config(matches: &ArgMatches) -> Result<RunConfig> {
    let mut layers = Vec::new();
    if let Some(path) = matches.get_one::<String>("config") {
        layers.push(read_config_file(Path::new(path))?);
    }
    // environment first so flags override it
    for source in [ValueSource::EnvVariable, ValueSource::CommandLine] {
        let mut layer = Vec::new();
        for (key, _, _) in KEYS {
            if matches.value_source(key) == Some(source) {
                if let Some(v) = matches.get_one::<String>(key) {
                    layer.push(((*key).to_owned(), v.clone()));
                }
            }
        }
        layers.push(layer);
    }
    let cfg = RunConfig::from_layers(&layers)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Run with `args` (program name first) and return the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    match dispatch(name, sub) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("uniwalk {name}: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(name: &str, sub: &ArgMatches) -> Result<()> {
    let cfg = resolve_config(sub)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::arg(format!("thread pool: {e}")))?;
    let started = Instant::now();
    let mut manifest = Manifest::new(name, &cfg);
    let default_manifest = pool.install(|| match name {
        "train" => cmd_train(&cfg, &mut manifest),
        "eval" => cmd_eval(&cfg, &mut manifest),
        "recommend" => cmd_recommend(&cfg, &mut manifest),
        "explain" => cmd_explain(&cfg, &mut manifest),
        "walks" => cmd_walks(&cfg, sub, &mut manifest),
        "synth" => cmd_synth(&cfg, sub, &mut manifest),
        other => Err(Error::arg(format!("unknown command {other}"))),
    })?;
    manifest.seconds = started.elapsed().as_secs_f64();
    let path = cfg.manifest.clone().unwrap_or(default_manifest);
    manifest.write(&path)
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::arg(format!("--{flag} is required")))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        Error::Stream(source) => Error::io(path, source),
        other => other,
    })
}

fn load_data(cfg: &RunConfig, manifest: &mut Manifest) -> Result<Dataset> {
    let path = require(&cfg.ratings, "ratings")?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let (ratings, _) = with_path(path, parse_ratings(BufReader::new(file), cfg.delimiter))?;
    manifest.inputs.push(FileDigest::of(path)?);
    let social = match &cfg.trust {
        None => Vec::new(),
        Some(path) => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            let parsed = with_path(path, parse_trust(BufReader::new(file), cfg.delimiter))?;
            warn_self_loops(path, &parsed);
            manifest.inputs.push(FileDigest::of(path)?);
            parsed.edges
        }
    };
    Ok(Dataset { ratings, social })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn cmd_train(cfg: &RunConfig, manifest: &mut Manifest) -> Result<PathBuf> {
    let model_path = require(&cfg.model, "model")?;
    let data = load_data(cfg, manifest)?;
    let (model, trace) = train_uniwalk(&data.ratings, &data.social, &cfg.hp, 0)?;
    model.save(model_path)?;
    let trace_path = cfg.trace.clone().unwrap_or_else(|| with_suffix(model_path, ".trace.tsv"));
    write_file(&trace_path, &trace.to_tsv())?;
    manifest.outputs.push(FileDigest::of(model_path)?);
    manifest.outputs.push(FileDigest::of(&trace_path)?);
    let last = trace.iterations.iter().find(|r| r.iteration == trace.best_iteration);
    println!(
        "trained {} entities over {} iteration(s); kept iteration {}{}",
        model.index.len(),
        trace.iterations.len().saturating_sub(1),
        trace.best_iteration,
        last.and_then(|r| r.validation_rmse)
            .map_or_else(String::new, |v| format!(" (validation RMSE {v:.4})"))
    );
    Ok(with_suffix(model_path, ".manifest.json"))
}

fn cmd_eval(cfg: &RunConfig, manifest: &mut Manifest) -> Result<PathBuf> {
    if cfg.methods.is_empty() {
        return Err(Error::arg("--methods is empty"));
    }
    let data = load_data(cfg, manifest)?;
    let split = kfold_split(&data.ratings, cfg.folds, cfg.hp.seed)?;
    let mut reports: Vec<CvReport> = Vec::new();
    for &method in &cfg.methods {
        let grid: &[usize] = match method {
            Method::Ucf | Method::Icf => &cfg.knn_k,
            _ => &cfg.knn_k[..1],
        };
        for &k in grid {
            let mut report = run_cv(method, &data, &split, &cfg.cv_config(k))?;
            if grid.len() > 1 {
                let label = format!("{}@{k}", method.as_str());
                report.method.clone_from(&label);
                report.aggregate.method.clone_from(&label);
                for f in &mut report.folds {
                    f.method.clone_from(&label);
                }
            }
            reports.push(report);
        }
    }
    let table = format_table(&reports);
    print!("{table}");
    let Some(prefix) = &cfg.output else {
        return Ok(PathBuf::from("uniwalk-eval.manifest.json"));
    };
    let (txt, tsv) = (with_suffix(prefix, ".txt"), with_suffix(prefix, ".tsv"));
    write_file(&txt, &table)?;
    write_file(&tsv, &format_tsv(&reports))?;
    let traces: Vec<_> = reports.iter().flat_map(|r| r.traces.iter().enumerate()).collect();
    if !traces.is_empty() {
        let mut out = String::new();
        for (fold, t) in traces {
            for line in t.to_tsv().lines() {
                if line.starts_with("iteration") {
                    if out.is_empty() {
                        out.push_str("fold\t");
                        out.push_str(line);
                        out.push('\n');
                    }
                    continue;
                }
                out.push_str(&format!("{fold}\t{line}\n"));
            }
        }
        let path = with_suffix(prefix, ".trace.tsv");
        write_file(&path, &out)?;
        manifest.outputs.push(FileDigest::of(&path)?);
    }
    manifest.outputs.push(FileDigest::of(&txt)?);
    manifest.outputs.push(FileDigest::of(&tsv)?);
    Ok(with_suffix(prefix, ".manifest.json"))
}

fn load_model(cfg: &RunConfig, manifest: &mut Manifest) -> Result<TrainedModel> {
    let path = require(&cfg.model, "model")?;
    let model = TrainedModel::load(path)?;
    manifest.inputs.push(FileDigest::of(path)?);
    Ok(model)
}

fn target_user<'a>(cfg: &'a RunConfig, model: &TrainedModel) -> Result<&'a str> {
    let user = cfg.user.as_deref().ok_or_else(|| Error::arg("--user is required"))?;
    if model.index.user(user).is_none() {
        return Err(Error::UnknownEntity {
            kind: "user",
            id: user.to_owned(),
        });
    }
    Ok(user)
}

fn cmd_recommend(cfg: &RunConfig, manifest: &mut Manifest) -> Result<PathBuf> {
    let model = load_model(cfg, manifest)?;
    let user = target_user(cfg, &model)?;
    let mut ex = Explainer::new(&model)?;
    ex.clamp = cfg.hp.clamp_predictions;
    let recs = ex.recommend_top_n(model.index.user(user), cfg.top_n)?;
    let mut text = String::from("item\tpredicted_rating\n");
    for (i, r) in &recs.items {
        text.push_str(&format!("{}\t{r:.4}\n", model.index.external(*i)));
    }
    match &cfg.output {
        Some(path) => {
            write_file(path, &text)?;
            manifest.outputs.push(FileDigest::of(path)?);
            Ok(with_suffix(path, ".manifest.json"))
        }
        None => {
            print!("{text}");
            Ok(PathBuf::from("uniwalk-recommend.manifest.json"))
        }
    }
}

fn cmd_explain(cfg: &RunConfig, manifest: &mut Manifest) -> Result<PathBuf> {
    let model = load_model(cfg, manifest)?;
    let user = target_user(cfg, &model)?;
    let mut ex = Explainer::new(&model)?;
    ex.clamp = cfg.hp.clamp_predictions;
    let t = cfg.thresholds(model.stats.min_r, model.stats.max_r);
    let report = ex.build_report(user, cfg.top_n, cfg.k_expl, t)?;
    let json = report.to_json() + "\n";
    match &cfg.output {
        Some(path) => {
            write_file(path, &json)?;
            manifest.outputs.push(FileDigest::of(path)?);
            Ok(with_suffix(path, ".manifest.json"))
        }
        None => {
            print!("{json}");
            Ok(PathBuf::from("uniwalk-explain.manifest.json"))
        }
    }
}

fn cmd_walks(cfg: &RunConfig, sub: &ArgMatches, manifest: &mut Manifest) -> Result<PathBuf> {
    let kind: WalkKind = sub.get_one::<String>("kind").expect("default").parse()?;
    let data = load_data(cfg, manifest)?;
    let set = crate::trainer::TrainingSet::build(&data.ratings, &data.social, cfg.hp.c)?;
    let walks = generate_walks(&set.graph, kind, cfg.hp.walks_per_node, cfg.hp.walk_length, cfg.hp.seed)?;
    match &cfg.output {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            write_walks(BufWriter::new(file), walks, &set.index).map_err(|e| Error::io(path, e))?;
            manifest.outputs.push(FileDigest::of(path)?);
            Ok(with_suffix(path, ".manifest.json"))
        }
        None => {
            write_walks(io::stdout().lock(), walks, &set.index)?;
            Ok(PathBuf::from("uniwalk-walks.manifest.json"))
        }
    }
}

fn synth_arg<T: std::str::FromStr>(sub: &ArgMatches, name: &str) -> Result<T> {
    let v = sub.get_one::<String>(name).expect("default");
    v.parse().map_err(|_| Error::arg(format!("--{name}: cannot parse {v:?}")))
}

fn cmd_synth(cfg: &RunConfig, sub: &ArgMatches, manifest: &mut Manifest) -> Result<PathBuf> {
    let dir = require(&cfg.output, "output")?;
    let sc = SynthConfig {
        users: synth_arg(sub, "users")?,
        items: synth_arg(sub, "items")?,
        communities: synth_arg(sub, "communities")?,
        ratings_per_user: synth_arg(sub, "ratings-per-user")?,
        friends_per_user: synth_arg(sub, "friends-per-user")?,
        homophily: synth_arg(sub, "homophily")?,
        noise: synth_arg(sub, "noise")?,
        seed: cfg.hp.seed,
        ..SynthConfig::default()
    };
    let data = generate(&sc)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (ratings, trust) = (dir.join("ratings.txt"), dir.join("trust.txt"));
    let sep = match cfg.delimiter {
        Delimiter::Whitespace => Delimiter::Char(' '),
        d => d,
    };
    write_lines(&ratings, |w| write_ratings(w, &data.ratings, sep))?;
    write_lines(&trust, |w| write_trust(w, &data.social))?;
    manifest.outputs.push(FileDigest::of(&ratings)?);
    manifest.outputs.push(FileDigest::of(&trust)?);
    println!(
        "wrote {} ratings and {} trust edges to {}",
        data.ratings.len(),
        data.social.len(),
        dir.display()
    );
    Ok(dir.join("manifest.json"))
}

fn write_lines(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|()| w.flush()).map_err(|e| Error::io(path, e))
}

fn warn_self_loops(path: &Path, parsed: &TrustParse) {
    if parsed.self_loops > 0 {
        eprintln!("warning: {}: dropped {} self-loop(s)", path.display(), parsed.self_loops);
    }
}

/// Ratings and trust parsed with the configured delimiter, for library callers.
pub fn read_dataset(ratings: &Path, trust: Option<&Path>, delimiter: Delimiter) -> Result<(Vec<RatingRecord>, Vec<SocialEdge>)> {
    let file = File::open(ratings).map_err(|e| Error::io(ratings, e))?;
    let (r, _) = with_path(ratings, parse_ratings(BufReader::new(file), delimiter))?;
    let s = match trust {
        None => Vec::new(),
        Some(p) => {
            let file = File::open(p).map_err(|e| Error::io(p, e))?;
            let parsed = with_path(p, parse_trust(BufReader::new(file), delimiter))?;
            warn_self_loops(p, &parsed);
            parsed.edges
        }
    };
    Ok((r, s))
}
