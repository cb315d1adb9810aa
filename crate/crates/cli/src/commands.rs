use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use dcmd::classifiers::FeatureSpace;
use dcmd::evaluation::{binary_metrics, MetricReport};
use dcmd::pipeline::{
    abundance_features, fit_table, fit_table_with, run_benchmark, summarize_results,
    write_replicates, write_summary, BenchmarkConfig, ClassifierKind, FitConfig, FittedModel,
    KChoice, Method, ReplicateResult, SummaryRow,
};
use dcmd::preprocess::{load_table, read_resolutions, screen_otus, write_resolutions, TableFormat};
use dcmd::simgen::{generate_scenario, scenario, ScenarioConfig};
use dcmd::{classifiers, evaluation, Error, KMeansModel, KnnModel, OtuTable, ResolutionVector};
use serde::Serialize;

use crate::config::{
    load_config, required, BenchmarkArgs, ClassifyArgs, Cli, Command, FileConfig, FitArgs, Layered,
    ScreenArgs, SimulateArgs, DEFAULT_LABEL_COLUMN,
};
use crate::manifest::RunManifest;

const DELIMITER: u8 = b',';

/// What a finished command reports for its manifest.
struct Record {
    command: &'static str,
    config: serde_json::Value,
    seed: u64,
    out_dir: PathBuf,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

/// Output directory that remembers what was written into it.
struct OutDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    fn create(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir,
            written: Vec::new(),
        })
    }

    fn write(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> dcmd::Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        f(&mut out).with_context(|| format!("writing {}", path.display()))?;
        out.flush()
            .with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => load_config(path)?,
        None => FileConfig::default(),
    };
    let threads = cli.threads.or(file.threads).unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("starting the worker pool")?;
    let start = Instant::now();
    let record = match cli.command {
        Command::Simulate(a) => simulate(a.over(file.simulate).over(SimulateArgs::defaults()))?,
        Command::Fit(a) => fit(a.over(file.fit).over(FitArgs::defaults()))?,
        Command::Classify(a) => classify(a.over(file.classify).over(ClassifyArgs::defaults()))?,
        Command::Benchmark(a) => benchmark(a.over(file.benchmark).over(BenchmarkArgs::defaults()))?,
        Command::Screen(a) => screen(a.over(file.screen).over(ScreenArgs::defaults()))?,
    };
    let manifest = RunManifest {
        command: record.command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: record.seed,
        threads,
        config: record.config,
        inputs: record.inputs,
        outputs: record.outputs,
        duration_seconds: start.elapsed().as_secs_f64(),
    };
    let path = record.out_dir.join("manifest.json");
    manifest.write(&path)?;
    log::info!("manifest written to {}", path.display());
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Loads a table; the label column is used when the header has it and is
/// otherwise only an error if labels are needed.
fn load(path: &Path, label_column: &str, need_labels: bool) -> Result<OtuTable> {
    let text = read_text(path)?;
    let header = text.lines().next().unwrap_or_default();
    let delimiter = if header.contains('\t') { '\t' } else { ',' };
    let has_labels = header.split(delimiter).any(|h| h.trim() == label_column);
    if need_labels && !has_labels {
        return Err(Error::Malformed(format!(
            "{}: no label column `{label_column}`",
            path.display()
        ))
        .into());
    }
    let format = TableFormat {
        label_column: has_labels.then(|| label_column.to_string()),
        ..TableFormat::default()
    };
    load_table(text.as_bytes(), &format).with_context(|| format!("loading {}", path.display()))
}

fn load_resolutions(path: &Path) -> Result<HashMap<String, f64>> {
    let text = read_text(path)?;
    read_resolutions(text.as_bytes(), DELIMITER)
        .with_context(|| format!("loading {}", path.display()))
}

fn k_choice(k: &str, grid: Vec<usize>, folds: usize) -> Result<KChoice> {
    Ok(match k.parse::<KChoice>()? {
        KChoice::CrossValidated { .. } => KChoice::CrossValidated { grid, folds },
        fixed => fixed,
    })
}

fn simulate(a: SimulateArgs) -> Result<Record> {
    let mut config: ScenarioConfig = match (&a.scenario_file, a.scenario) {
        (Some(path), _) => toml::from_str(&read_text(path)?)
            .map_err(|e| Error::InvalidConfig(format!("scenario file {}: {e}", path.display())))?,
        (None, Some(id)) => scenario(id)?,
        (None, None) => {
            return Err(Error::InvalidConfig("give --scenario or --scenario-file".into()).into())
        }
    };
    config.seed = required(a.seed, "seed")?;
    if let Some(n) = a.class_size {
        config.class_size = n;
    }
    if let Some(n) = a.otus {
        config.n_otus = n;
    }
    if let Some(j) = a.jitter {
        config.jitter = j;
    }
    let data = generate_scenario(&config)?;
    let mut out = OutDir::create(required(a.out.clone(), "out")?)?;
    out.write("table.csv", |w| {
        data.table
            .write_delimited(w, DELIMITER, DEFAULT_LABEL_COLUMN)
    })?;
    out.write("truth.csv", |w| data.write_truth(w, DELIMITER))?;
    out.write("parameters.csv", |w| data.write_parameters(w, DELIMITER))?;
    out.write("resolutions.csv", |w| {
        write_resolutions(
            w,
            data.table.sample_ids(),
            &data.truth.resolutions,
            DELIMITER,
        )
    })?;

    println!(
        "{} samples x {} OTUs",
        data.table.n_samples(),
        data.table.n_otus()
    );
    println!("class\tzero_proportion\tmean_count");
    for ((class, zp), (_, mean)) in data
        .class_zero_proportions()
        .iter()
        .zip(data.class_mean_counts())
    {
        println!("{class}\t{zp:.4}\t{mean:.4}");
    }
    Ok(Record {
        command: "simulate",
        config: to_value(&a)?,
        seed: config.seed,
        inputs: a.scenario_file.iter().cloned().collect(),
        out_dir: out.dir.clone(),
        outputs: out.written,
    })
}

fn fit_config(bootstrap: usize, seed: u64, quantile: f64, gram: bool) -> FitConfig {
    let mut cfg = FitConfig {
        bootstrap,
        seed,
        gram,
        ..FitConfig::default()
    };
    cfg.family.quantile = quantile;
    cfg
}

fn fit(a: FitArgs) -> Result<Record> {
    let table_path = required(a.table.clone(), "table")?;
    let table = load(
        &table_path,
        &required(a.label_column.clone(), "label_column")?,
        false,
    )?;
    let seed = required(a.seed, "seed")?;
    let cfg = fit_config(
        required(a.bootstrap, "bootstrap")?,
        seed,
        required(a.quantile, "quantile")?,
        required(a.gram, "gram")?,
    );
    let mut inputs = vec![table_path];
    let model = match &a.resolutions {
        Some(path) => {
            inputs.push(path.clone());
            let t = ResolutionVector::for_table(&load_resolutions(path)?, &table)?;
            fit_table_with(&table, &t, &cfg)?
        }
        None => fit_table(&table, &cfg)?,
    };
    let mut out = OutDir::create(required(a.out.clone(), "out")?)?;
    out.write("model.json", |w| {
        serde_json::to_writer(&mut *w, &model).map_err(|e| Error::Io(e.into()))?;
        Ok(writeln!(w)?)
    })?;
    out.write("components.csv", |w| model.write_components(w, DELIMITER))?;
    out.write("skipped.csv", |w| {
        let mut csv = csv::WriterBuilder::new()
            .delimiter(DELIMITER)
            .from_writer(w);
        csv.write_record(["otu_id", "reason"])?;
        for s in &model.skipped {
            csv.write_record([&s.otu_id, &s.reason])?;
        }
        Ok(csv.flush()?)
    })?;
    println!(
        "fitted {} OTUs, skipped {}",
        model.otus.len(),
        model.skipped.len()
    );
    for s in &model.skipped {
        println!("skipped {}: {}", s.otu_id, s.reason);
    }
    Ok(Record {
        command: "fit",
        config: to_value(&a)?,
        seed,
        out_dir: out.dir.clone(),
        inputs,
        outputs: out.written,
    })
}

fn classify(a: ClassifyArgs) -> Result<Record> {
    let method: Method = format!(
        "{}-{}",
        required(a.method.clone(), "method")?,
        required(a.metric.clone(), "metric")?
    )
    .parse()?;
    let k = k_choice(
        &required(a.k.clone(), "k")?,
        required(a.k_grid.clone(), "k_grid")?,
        required(a.cv_folds, "cv_folds")?,
    )?;
    let seed = required(a.seed, "seed")?;
    let label_column = required(a.label_column.clone(), "label_column")?;
    let train_path = required(a.train.clone(), "train")?;
    let mut inputs = vec![train_path.clone()];
    let whole = load(&train_path, &label_column, true)?;
    let (train, test) = match &a.test {
        Some(path) => {
            inputs.push(path.clone());
            (whole, load(path, &label_column, false)?)
        }
        None => {
            let (tr, te) = evaluation::split(
                whole.n_samples(),
                whole.labels(),
                required(a.split, "split")?,
                seed,
            )?;
            (whole.select_samples(&tr), whole.select_samples(&te))
        }
    };
    let train_labels = train.labels().ok_or(Error::MissingLabels)?.to_vec();
    let mut out = OutDir::create(required(a.out.clone(), "out")?)?;

    let mut keep: Vec<String> = train.otu_ids().to_vec();
    if required(a.screen, "screen")? {
        let result = screen_otus(&train, required(a.screen_threshold, "screen_threshold")?)?;
        out.write("screening.csv", |w| result.write_report(w, DELIMITER))?;
        if result.nothing_retained() {
            log::warn!("screening retained no OTU; keeping all of them");
            eprintln!("warning: screening retained no OTU; keeping all of them");
        } else {
            keep = result
                .retained_indices()
                .into_iter()
                .map(|j| train.otu_ids()[j].clone())
                .collect();
        }
    }

    let lookup = a
        .resolutions
        .as_ref()
        .map(|p| load_resolutions(p))
        .transpose()?;
    inputs.extend(a.resolutions.iter().cloned());
    let (space, train_features, test_features) = if method.metric.is_distributional() {
        let model = match &a.model {
            Some(path) => {
                inputs.push(path.clone());
                let model = serde_json::from_str::<FittedModel>(&read_text(path)?)
                    .map_err(|e| Error::Malformed(format!("model {}: {e}", path.display())))?;
                if let Some(missing) = model
                    .otu_ids()
                    .into_iter()
                    .find(|id| !train.otu_ids().iter().any(|t| t == id))
                {
                    return Err(Error::OtuMismatch(format!(
                        "model OTU `{missing}` is missing from the table"
                    ))
                    .into());
                }
                model
            }
            None => {
                let cols: Vec<usize> = (0..train.n_otus())
                    .filter(|&j| keep.contains(&train.otu_ids()[j]))
                    .collect();
                let sub = train.select_otus(&cols, false);
                let cfg = fit_config(
                    required(a.bootstrap, "bootstrap")?,
                    seed,
                    dcmd::FamilyConfig::default().quantile,
                    method.metric == dcmd::Metric::L2Cdf,
                );
                match &lookup {
                    Some(l) => fit_table_with(&sub, &ResolutionVector::for_table(l, &sub)?, &cfg)?,
                    None => fit_table(&sub, &cfg)?,
                }
            }
        }
        .restrict(&keep);
        if model.otus.is_empty() {
            return Err(
                Error::InvalidConfig("no fitted OTU is left to classify with".into()).into(),
            );
        }
        let (t_train, t_test) = match &lookup {
            Some(l) => (
                ResolutionVector::for_table(l, &train)?,
                ResolutionVector::for_table(l, &test)?,
            ),
            None => (model.resolutions(&train)?, model.resolutions(&test)?),
        };
        (
            model.feature_space(method.metric)?,
            model.represent_with(&train, &t_train)?,
            model.represent_with(&test, &t_test)?,
        )
    } else {
        (
            FeatureSpace::abundance(method.metric, keep.len())?,
            abundance_features(&train, Some(&keep))?,
            abundance_features(&test, Some(&keep))?,
        )
    };

    let (predictions, chosen_k) = match method.classifier {
        ClassifierKind::KMeans => (
            KMeansModel::train(space, &train_features, &train_labels)?.predict_many(
                &test_features,
                test.sample_ids(),
                test.labels(),
            )?,
            None,
        ),
        ClassifierKind::Knn => {
            let knn = KnnModel::train(space, train_features, &train_labels, &k.selection(seed))?;
            (
                knn.predict_many(&test_features, test.sample_ids(), test.labels())?,
                Some(knn.k),
            )
        }
    };
    out.write("predictions.csv", |w| {
        classifiers::write_predictions(w, &predictions, DELIMITER)
    })?;

    if let Some(truth) = test.labels() {
        let predicted: Vec<String> = predictions.iter().map(|p| p.predicted.clone()).collect();
        let mut classes: Vec<&String> = train_labels.iter().chain(truth).collect();
        classes.sort();
        classes.dedup();
        let report = if classes.len() == 2 {
            let positive = a.positive.clone().unwrap_or_else(|| classes[1].clone());
            binary_metrics(&predicted, truth, &positive)?
        } else {
            MetricReport::accuracy_only(&predicted, truth)?
        };
        let rows = metric_rows(&report, chosen_k);
        out.write("metrics.csv", |w| {
            let mut csv = csv::WriterBuilder::new()
                .delimiter(DELIMITER)
                .from_writer(w);
            csv.write_record(["metric", "value"])?;
            for (name, value) in &rows {
                csv.write_record([name.as_str(), &value.to_string()])?;
            }
            Ok(csv.flush()?)
        })?;
        println!("method\t{method}");
        for (name, value) in &rows {
            match name.as_str() {
                "n" | "k" | "tp" | "fp" | "fn" | "tn" => println!("{name}\t{value}"),
                _ => println!("{name}\t{value:.4}"),
            }
        }
    } else {
        println!("method\t{method}");
        println!("predicted\t{}", predictions.len());
        if let Some(k) = chosen_k {
            println!("k\t{k}");
        }
    }
    Ok(Record {
        command: "classify",
        config: to_value(&a)?,
        seed,
        out_dir: out.dir.clone(),
        inputs,
        outputs: out.written,
    })
}

fn metric_rows(report: &MetricReport, k: Option<usize>) -> Vec<(String, f64)> {
    let mut rows = vec![
        ("accuracy".to_string(), report.accuracy),
        ("n".to_string(), report.n as f64),
    ];
    if let Some(c) = &report.confusion {
        for (name, v) in [("tp", c.tp), ("fp", c.fp), ("fn", c.fn_), ("tn", c.tn)] {
            rows.push((name.to_string(), v as f64));
        }
    }
    for (name, v) in [
        ("precision", report.precision),
        ("recall", report.recall),
        ("f1", report.f1),
    ] {
        if let Some(v) = v {
            rows.push((name.to_string(), v));
        }
    }
    if let Some(k) = k {
        rows.push(("k".to_string(), k as f64));
    }
    rows
}

fn benchmark(a: BenchmarkArgs) -> Result<Record> {
    let methods = required(a.methods.clone(), "methods")?
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<dcmd::Result<Vec<_>>>()?;
    let seed = required(a.seed, "seed")?;
    let mut config = BenchmarkConfig {
        replicates: required(a.replicates, "replicates")?,
        methods,
        train_fraction: required(a.train_fraction, "train_fraction")?,
        k: k_choice(
            &required(a.k.clone(), "k")?,
            required(a.k_grid.clone(), "k_grid")?,
            required(a.cv_folds, "cv_folds")?,
        )?,
        seed,
        ..BenchmarkConfig::default()
    };
    config.fit.bootstrap = required(a.bootstrap, "bootstrap")?;
    let scenarios = required(a.scenarios.clone(), "scenarios")?;
    if scenarios.is_empty() {
        return Err(Error::InvalidConfig("no scenarios requested".into()).into());
    }
    let presets = scenarios
        .iter()
        .map(|&id| {
            let mut s = scenario(id)?;
            if let Some(n) = a.class_size {
                s.class_size = n;
            }
            if let Some(n) = a.otus {
                s.n_otus = n;
            }
            s.validate()?;
            Ok((id, s))
        })
        .collect::<dcmd::Result<Vec<_>>>()?;

    let mut results: Vec<ReplicateResult> = Vec::new();
    for (id, s) in &presets {
        let started = Instant::now();
        results.extend(run_benchmark(&id.to_string(), s, &config)?);
        log::info!("scenario {id} finished in {:.1?}", started.elapsed());
    }
    let summary = summarize_results(&results)?;
    let mut out = OutDir::create(required(a.out.clone(), "out")?)?;
    out.write("replicates.csv", |w| {
        write_replicates(w, &results, DELIMITER)
    })?;
    out.write("summary.csv", |w| write_summary(w, &summary, DELIMITER))?;
    print_summary(&summary, &scenarios, &config.methods);
    Ok(Record {
        command: "benchmark",
        config: to_value(&a)?,
        seed,
        out_dir: out.dir.clone(),
        inputs: Vec::new(),
        outputs: out.written,
    })
}

/// Methods in rows, scenarios in columns, cells `mean (sd)`.
fn print_summary(summary: &[SummaryRow], scenarios: &[u32], methods: &[Method]) {
    let mut header = vec!["method".to_string()];
    header.extend(scenarios.iter().map(|s| format!("scenario {s}")));
    println!("{}", header.join("\t"));
    for m in methods {
        let mut line = vec![m.to_string()];
        for s in scenarios {
            let cell = summary
                .iter()
                .find(|r| r.method == *m && r.scenario == s.to_string())
                .map(|r| match r.summary.sd {
                    Some(sd) => format!("{:.4} ({:.4})", r.summary.mean, sd),
                    None => format!("{:.4} (NA)", r.summary.mean),
                })
                .unwrap_or_default();
            line.push(cell);
        }
        println!("{}", line.join("\t"));
    }
}

fn screen(a: ScreenArgs) -> Result<Record> {
    let table_path = required(a.table.clone(), "table")?;
    let table = load(
        &table_path,
        &required(a.label_column.clone(), "label_column")?,
        true,
    )?;
    let result = screen_otus(&table, required(a.threshold, "threshold")?)?;
    let mut out = OutDir::create(required(a.out.clone(), "out")?)?;
    out.write("screening.csv", |w| result.write_report(w, DELIMITER))?;
    let retained = result.retained_indices().len();
    println!(
        "retained {retained} of {} OTUs (q < {})",
        result.entries.len(),
        result.threshold
    );
    if result.nothing_retained() {
        eprintln!("warning: no OTU passed the threshold");
    }
    Ok(Record {
        command: "screen",
        config: to_value(&a)?,
        seed: 0,
        out_dir: out.dir.clone(),
        inputs: vec![table_path],
        outputs: out.written,
    })
}
