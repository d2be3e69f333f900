use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use factrf::dataset::CsvFrame;
use factrf::fact::run_fact;
use factrf::importance::{mdi, permutation_scores, write_scores_csv, ImportanceMethod};
use factrf::inference::{bh_fdr, bh_per_window, rolling_pvalues, RollingSpec};
use factrf::rng::{derive_seed, tag};
use factrf::sim::ExperimentConfig;
use factrf::{Dataset, Error, FactConfig, FactReport, RegressionForest};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;
use crate::output::{cell, config_hash, OutDir};
use crate::{DataArgs, GlobalOpts, ImportanceArgs, RollingArgs, TestArgs};

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn fact_config(global: &GlobalOpts) -> Result<FactConfig, CliError> {
    let mut cfg = match &global.config {
        Some(path) => read_json(path)?,
        None => FactConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load(args: &DataArgs, extra_skip: &[&str]) -> Result<(CsvFrame, Dataset), CliError> {
    let frame = CsvFrame::read(&args.csv).map_err(|e| match e {
        Error::Io(source) => CliError::Io {
            path: args.csv.clone(),
            source,
        },
        other => other.into(),
    })?;
    let mut skip: Vec<&str> = args.skip.iter().map(String::as_str).collect();
    skip.extend_from_slice(extra_skip);
    let data = frame.to_dataset(&args.response, &skip)?;
    Ok((frame, data))
}

/// Column indices of the named features, or every feature when none are named.
fn select(data: &Dataset, names: &[String]) -> Result<Vec<usize>, CliError> {
    if names.is_empty() {
        return Ok((0..data.p()).collect());
    }
    let all = data.feature_names().unwrap_or_default();
    names
        .iter()
        .map(|name| {
            all.iter().position(|n| n == name).ok_or_else(|| {
                CliError::Usage(format!("feature column `{name}` not found among the feature columns"))
            })
        })
        .collect()
}

fn names_of(data: &Dataset, features: &[usize]) -> Vec<String> {
    features.iter().map(|&j| data.feature_name(j)).collect()
}

#[derive(Serialize)]
struct TestRun<'a> {
    command: &'static str,
    csv: &'a Path,
    response: &'a str,
    skip: &'a [String],
    features: Vec<String>,
    fdr: Option<f64>,
    fact: &'a FactConfig,
}

#[derive(Serialize)]
struct Failure {
    feature: String,
    error: String,
}

#[derive(Serialize)]
struct TestOutput<'a> {
    config_hash: &'a str,
    config: &'a TestRun<'a>,
    reports: Vec<&'a FactReport>,
    failures: Vec<Failure>,
}

fn failure_status(e: &Error) -> &'static str {
    match e {
        Error::DegenerateVariance { .. } => "degenerate",
        Error::EmptyOob { .. } => "empty_oob",
        _ => "failed",
    }
}

pub fn test(global: &GlobalOpts, args: &TestArgs) -> Result<(), CliError> {
    let cfg = fact_config(global)?;
    let (_, data) = load(&args.data, &[])?;
    let features = select(&data, &args.features)?;
    let run = TestRun {
        command: "test",
        csv: &args.data.csv,
        response: &args.data.response,
        skip: &args.data.skip,
        features: names_of(&data, &features),
        fdr: global.fdr,
        fact: &cfg,
    };
    let out = OutDir::create(&global.out, config_hash(&run)?)?;

    let results: Vec<Result<FactReport, Error>> =
        features.par_iter().map(|&j| run_fact(j, &data, &cfg)).collect();
    // Anything but a numerical failure is a usage error for the whole batch.
    if let Some(e) = results.iter().filter_map(|r| r.as_ref().err()).find(|e| !e.is_numerical()) {
        return Err(CliError::Usage(e.to_string()));
    }
    let reports: Vec<&FactReport> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let flags = match global.fdr {
        Some(q) => {
            let p: Vec<f64> = reports.iter().map(|r| r.p_value).collect();
            let rejected = bh_fdr(&p, q)?;
            Some((0..p.len()).map(|i| rejected.contains(&i)).collect::<Vec<_>>())
        }
        None => None,
    };

    let mut table = String::from("feature,variant,stat,p_value,n_effective,status");
    if flags.is_some() {
        table.push_str(",bh_reject");
    }
    table.push('\n');
    let mut failures = Vec::new();
    let mut ok = 0;
    for (&j, result) in features.iter().zip(&results) {
        let name = data.feature_name(j);
        match result {
            Ok(r) => {
                table.push_str(&format!(
                    "{name},{},{},{},{},ok",
                    r.variant.name(),
                    r.stat,
                    r.p_value,
                    r.n_effective
                ));
                if let Some(f) = &flags {
                    table.push_str(&format!(",{}", f[ok]));
                }
                println!("{name}: stat={:.4} p={:.4}", r.stat, r.p_value);
                ok += 1;
            }
            Err(e) => {
                log::warn!("feature {name}: {e}");
                table.push_str(&format!("{name},{},,,,{}", cfg.variant.name(), failure_status(e)));
                if flags.is_some() {
                    table.push_str(",false");
                }
                println!("{name}: {e}");
                failures.push(Failure {
                    feature: name,
                    error: e.to_string(),
                });
            }
        }
        table.push('\n');
    }
    out.write_table("fact_reports.csv", table.as_bytes())?;
    let all_failed = reports.is_empty();
    out.write_json(
        "fact_reports.json",
        &TestOutput {
            config_hash: out.hash(),
            config: &run,
            reports,
            failures,
        },
    )?;
    if all_failed {
        return Err(CliError::Numerical(format!(
            "all {} tested features failed numerically",
            features.len()
        )));
    }
    Ok(())
}

pub fn simulate(global: &GlobalOpts) -> Result<(), CliError> {
    let path = global
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("simulate needs --config PATH with an experiment list".into()))?;
    let mut cfg: ExperimentConfig = read_json(path)?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    cfg.plan()?;
    let out = OutDir::create(&global.out, config_hash(&cfg)?)?;
    out.write_json(
        "experiment_config.json",
        &serde_json::json!({ "config_hash": out.hash(), "config": &cfg }),
    )?;
    for o in cfg.run()? {
        out.write_table(&format!("{}.csv", o.name), &o.csv)?;
        println!("{}", o.summary);
    }
    Ok(())
}

#[derive(Serialize)]
struct ImportanceRun<'a> {
    command: &'static str,
    csv: &'a Path,
    response: &'a str,
    skip: &'a [String],
    methods: Vec<&'static str>,
    reps: usize,
    forest: &'a factrf::ForestParams,
    seed: u64,
}

pub fn importance(global: &GlobalOpts, args: &ImportanceArgs) -> Result<(), CliError> {
    let cfg = fact_config(global)?;
    let (_, data) = load(&args.data, &[])?;
    let mut methods: Vec<ImportanceMethod> = Vec::new();
    for m in &args.methods {
        if !methods.contains(m) {
            methods.push(*m);
        }
    }
    let run = ImportanceRun {
        command: "importance",
        csv: &args.data.csv,
        response: &args.data.response,
        skip: &args.data.skip,
        methods: methods.iter().map(|m| m.name()).collect(),
        reps: args.reps,
        forest: &cfg.forest,
        seed: cfg.seed,
    };
    let out = OutDir::create(&global.out, config_hash(&run)?)?;

    let forest = RegressionForest::fit(&data, &cfg.forest, cfg.seed)?;
    let perm_seed = derive_seed(cfg.seed, &[tag::PERMUTATION]);
    let scores = methods
        .iter()
        .map(|&m| match m {
            ImportanceMethod::Mdi => Ok(mdi(&forest, data.p())),
            _ => permutation_scores(&forest, &data, m, &[], args.reps, perm_seed),
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut body = Vec::new();
    write_scores_csv(&mut body, &data, &scores)?;
    let path = out.write_table("importance.csv", &body)?;
    println!(
        "{} methods x {} features written to {}",
        scores.len(),
        data.p(),
        path.display()
    );
    Ok(())
}

const DATE_FORMATS: [&str; 4] = ["%Y-%m-%d", "%Y/%m/%d", "%m/%d/%Y", "%d.%m.%Y"];

fn parse_date(s: &str) -> Option<NaiveDate> {
    DATE_FORMATS
        .iter()
        .find_map(|f| NaiveDate::parse_from_str(s, f).ok())
        // Monthly data is often written as YYYY-MM.
        .or_else(|| NaiveDate::parse_from_str(&format!("{s}-01"), "%Y-%m-%d").ok())
}

/// Parse the date column and require strictly increasing dates.
pub fn check_dates(column: &str, values: &[String]) -> Result<(), CliError> {
    let mut previous: Option<NaiveDate> = None;
    for (i, v) in values.iter().enumerate() {
        let date = parse_date(v).ok_or_else(|| {
            CliError::Usage(format!("row {}: `{v}` in column `{column}` is not a date", i + 1))
        })?;
        if let Some(p) = previous {
            if date <= p {
                return Err(CliError::Usage(format!(
                    "dates in column `{column}` must be strictly increasing: row {} ({v}) follows {p}",
                    i + 1
                )));
            }
        }
        previous = Some(date);
    }
    Ok(())
}

#[derive(Serialize)]
struct RollingRun<'a> {
    command: &'static str,
    csv: &'a Path,
    response: &'a str,
    date: &'a str,
    skip: &'a [String],
    features: Vec<String>,
    rolling: RollingSpec,
    fdr: Option<f64>,
    fact: &'a FactConfig,
}

pub fn rolling(global: &GlobalOpts, args: &RollingArgs) -> Result<(), CliError> {
    let cfg = fact_config(global)?;
    let (frame, data) = load(&args.data, &[args.date.as_str()])?;
    let dates = frame.string_column(&args.date)?;
    check_dates(&args.date, &dates)?;
    let features = select(&data, &args.features)?;
    let spec = RollingSpec {
        horizon: args.horizon,
        ..RollingSpec::new(args.window, args.step)
    };
    spec.window_count(data.n())?;
    let run = RollingRun {
        command: "rolling",
        csv: &args.data.csv,
        response: &args.data.response,
        date: &args.date,
        skip: &args.data.skip,
        features: names_of(&data, &features),
        rolling: spec,
        fdr: global.fdr,
        fact: &cfg,
    };
    let out = OutDir::create(&global.out, config_hash(&run)?)?;

    let rows = rolling_pvalues(&data, &spec, &cfg, &features, Some(&dates))?;
    let flags = global.fdr.map(|q| bh_per_window(&rows, q)).transpose()?;
    let mut table = String::from("window,window_end,feature,stat,p_value");
    if flags.is_some() {
        table.push_str(",bh_reject");
    }
    table.push('\n');
    for (k, r) in rows.iter().enumerate() {
        table.push_str(&format!(
            "{},{},{},{},{}",
            r.window,
            r.window_end,
            r.feature_name,
            cell(r.stat),
            cell(r.p_value)
        ));
        if let Some(f) = &flags {
            table.push_str(&format!(",{}", f[k]));
        }
        table.push('\n');
    }
    let path = out.write_table("rolling.csv", table.as_bytes())?;
    let windows = rows.last().map_or(0, |r| r.window + 1);
    let missing = rows.iter().filter(|r| r.p_value.is_none()).count();
    let mut summary = format!(
        "{windows} windows x {} features written to {}",
        features.len(),
        path.display()
    );
    if missing > 0 {
        summary.push_str(&format!("; {missing} cells numerically undefined"));
    }
    if let Some(f) = &flags {
        summary.push_str(&format!("; {} cells flagged", f.iter().filter(|&&x| x).count()));
    }
    println!("{summary}");
    Ok(())
}
