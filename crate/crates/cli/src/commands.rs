use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use pedinet::encoder::{summarize_loss, FeatureScaler, FEATURES, FEATURE_NAMES};
use pedinet::experiment::{
    self, fit_network, mendelian_risks, network_geometry, predict_network, resolve_reference, run_experiment,
    scenario_table, ExperimentConfig, Predictor, SCENARIOS,
};
use pedinet::mendelian::predict_family;
use pedinet::metrics::CorrelationKind;
use pedinet::nn::{load_checkpoint, random_search, save_checkpoint, ArchitectureSpec, SearchSpace};
use pedinet::pedigree::{read_pedigrees, write_pedigrees, FileFormat, Pedigree};
use pedinet::seed;
use pedinet::sim::{blank_onset_ages, drop_relatives, impute_onset_ages, perturb_misreport, simulate_cohort, DropMode};
use rayon::prelude::*;

use crate::table::{align_labels, read_outcomes, read_predictions, write_outcomes};
use crate::{Global, NetKind, PerturbMode};

struct Timer {
    on: bool,
    start: Instant,
}

impl Timer {
    fn new(g: &Global) -> Timer {
        Timer {
            on: g.bench,
            start: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        if self.on {
            eprintln!("bench {stage}: {:.3}s", self.start.elapsed().as_secs_f64());
            self.start = Instant::now();
        }
    }
}

fn config(g: &Global) -> Result<ExperimentConfig> {
    let mut c = match &g.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading config {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = g.seed {
        c.seed = s;
    }
    Ok(c)
}

fn out_dir(g: &Global) -> Result<&Path> {
    std::fs::create_dir_all(&g.out).with_context(|| format!("creating {}", g.out.display()))?;
    Ok(&g.out)
}

fn read_families(path: &Path) -> Result<Vec<Pedigree>> {
    read_pedigrees(path, FileFormat::from_path(path)).with_context(|| format!("reading {}", path.display()))
}

fn spec_for(kind: NetKind, c: &ExperimentConfig) -> ArchitectureSpec {
    match kind {
        NetKind::Fcnn => c.fcnn.clone(),
        NetKind::Cnn => c.cnn.clone(),
        NetKind::Logistic => c.logistic.clone(),
    }
}

fn kind_name(kind: NetKind) -> &'static str {
    match kind {
        NetKind::Fcnn => "fcnn",
        NetKind::Cnn => "cnn",
        NetKind::Logistic => "logistic",
    }
}

pub fn simulate(g: &Global, n: usize, format: &str) -> Result<()> {
    let c = config(g)?;
    let format = match format {
        "csv" => FileFormat::Csv,
        "json" => FileFormat::Json,
        other => bail!("unknown format {other}; expected csv or json"),
    };
    let mut t = Timer::new(g);
    let model = c.penetrance_model()?;
    let fams = simulate_cohort(n, &c.sim_config(), &model, c.seed)?;
    t.lap("simulate");
    let out = out_dir(g)?;
    let ext = if matches!(format, FileFormat::Csv) {
        "csv"
    } else {
        "json"
    };
    let peds = experiment::pedigrees(&fams);
    write_pedigrees(&out.join(format!("families.{ext}")), format, &peds)?;
    let ids: Vec<&str> = fams.iter().map(|f| f.pedigree.family_id.as_str()).collect();
    let ys: Vec<bool> = fams.iter().map(|f| f.y0).collect();
    write_outcomes(&out.join("outcomes.csv"), &ids, &ys)?;
    t.lap("write");
    let cases = ys.iter().filter(|&&y| y).count();
    println!(
        "simulated {n} families, {cases} counselee cases within {} years",
        c.horizon
    );
    Ok(())
}

pub fn perturb(g: &Global, input: &Path, mode: PerturbMode, fraction: f64, unaffected_only: bool) -> Result<()> {
    let c = config(g)?;
    let peds = read_families(input)?;
    let mut t = Timer::new(g);
    let drop_mode = if unaffected_only {
        DropMode::UnaffectedOnly
    } else {
        DropMode::Any
    };
    let misreport = c.misreport.clone().unwrap_or_default();
    misreport.check()?;
    let out: Vec<Pedigree> = peds
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let s = seed::derive(c.seed, i as u64);
            Ok(match mode {
                PerturbMode::Misreport => perturb_misreport(p, &misreport, s),
                PerturbMode::Drop => drop_relatives(p, fraction, drop_mode, s)?,
                PerturbMode::Blank => blank_onset_ages(p, fraction, s)?,
                PerturbMode::Impute => impute_onset_ages(p),
            })
        })
        .collect::<pedinet::Result<_>>()?;
    t.lap("perturb");
    let dir = out_dir(g)?;
    let format = FileFormat::from_path(input);
    let ext = input.extension().and_then(|e| e.to_str()).unwrap_or("csv");
    write_pedigrees(&dir.join(format!("perturbed.{ext}")), format, &out)?;
    println!("perturbed {} families ({mode:?})", out.len());
    Ok(())
}

pub fn encode(g: &Global, input: &Path, reference: Option<&str>) -> Result<()> {
    let c = config(g)?;
    let reference = resolve_reference(reference.unwrap_or(&c.reference))?;
    let peds = read_families(input)?;
    let mut t = Timer::new(g);
    let rows = experiment::encode(&peds, &reference);
    t.lap("encode");
    let dir = out_dir(g)?;
    let mut w = csv::Writer::from_path(dir.join("encoded.csv"))?;
    let mut header = vec!["family_id".to_string()];
    for slot in 0..reference.size() {
        let name = reference.slot_type(slot).name();
        for f in FEATURE_NAMES {
            header.push(format!("s{slot}_{name}_{f}"));
        }
    }
    w.write_record(&header)?;
    for (p, row) in peds.iter().zip(&rows) {
        debug_assert_eq!(row.len(), reference.size() * FEATURES);
        let mut rec = vec![p.family_id.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    let file = reference.to_file(c.neighborhood);
    std::fs::write(dir.join("reference.json"), serde_json::to_string_pretty(&file)?)?;
    let loss = summarize_loss(&peds, &reference)?;
    println!(
        "encoded {} families onto {} slots; mean dropped fraction {loss:.4}",
        peds.len(),
        reference.size()
    );
    Ok(())
}

pub fn tune(
    g: &Global,
    input: &Path,
    outcomes: &Path,
    model: NetKind,
    budget: usize,
    space: Option<&Path>,
) -> Result<()> {
    let c = config(g)?;
    let reference = c.reference_structure()?;
    let peds = read_families(input)?;
    let ys = align_labels(&peds, &read_outcomes(outcomes)?)?;
    let space: SearchSpace = match space {
        Some(p) => serde_json::from_reader(std::fs::File::open(p)?)?,
        None => SearchSpace::default(),
    };
    let mut t = Timer::new(g);
    let raw = experiment::encode(&peds, &reference);
    let xs = FeatureScaler::fit(&raw)?.apply_all(&raw)?;
    let base = spec_for(model, &c);
    let geometry = network_geometry(&base, &reference, c.neighborhood);
    let result = random_search(&space, &base, &geometry, &xs, &ys, budget, c.seed)?;
    t.lap("tune");
    let dir = out_dir(g)?;
    std::fs::write(dir.join("search.json"), serde_json::to_string_pretty(&result)?)?;
    std::fs::write(dir.join("best_spec.json"), serde_json::to_string_pretty(&result.best)?)?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
    println!(
        "{budget} candidates; held-out AUC best {} (range {} to {})",
        fmt(result.best_auc),
        fmt(result.min_auc),
        fmt(result.max_auc)
    );
    Ok(())
}

pub fn train(
    g: &Global,
    input: &Path,
    outcomes: &Path,
    model: NetKind,
    spec: Option<&Path>,
    reference: Option<&str>,
) -> Result<()> {
    let c = config(g)?;
    let reference = resolve_reference(reference.unwrap_or(&c.reference))?;
    let mut spec = match spec {
        Some(p) => serde_json::from_reader(std::fs::File::open(p)?)?,
        None => spec_for(model, &c),
    };
    if let Some(s) = g.seed {
        spec.seed = s;
    }
    let peds = read_families(input)?;
    let ys = align_labels(&peds, &read_outcomes(outcomes)?)?;
    let mut t = Timer::new(g);
    let ck = fit_network(&spec, &reference, c.neighborhood, &peds, &ys)?;
    t.lap("train");
    let path = out_dir(g)?.join(format!("{}.ckpt", kind_name(model)));
    save_checkpoint(&path, &ck)?;
    println!(
        "trained {} on {} families; wrote {}",
        kind_name(model),
        peds.len(),
        path.display()
    );
    Ok(())
}

pub fn predict(g: &Global, input: &Path, model: &str, horizon: Option<u32>) -> Result<()> {
    let c = config(g)?;
    let horizon = horizon.unwrap_or(c.horizon);
    let peds = read_families(input)?;
    let mut t = Timer::new(g);
    let dir = out_dir(g)?;
    let mut w = csv::Writer::from_path(dir.join("predictions.csv"))?;
    w.write_record([
        "family_id",
        "posterior_noncarrier",
        "posterior_l1",
        "posterior_l2",
        "posterior_both",
        "risk_t",
    ])?;
    if model == "mendelian" {
        let pen = c.penetrance_model()?;
        // fail with every offending family before writing anything
        mendelian_risks(&peds, horizon, &pen)?;
        let preds: Vec<_> = peds
            .par_iter()
            .map(|p| predict_family(p, horizon, &pen))
            .collect::<pedinet::Result<_>>()?;
        t.lap("predict");
        for (p, f) in peds.iter().zip(&preds) {
            let mut rec = vec![p.family_id.clone()];
            rec.extend(f.posterior.0.iter().map(|v| v.to_string()));
            rec.push(f.risk.risk.to_string());
            w.write_record(&rec)?;
        }
    } else {
        let ck = load_checkpoint(Path::new(model)).with_context(|| format!("loading checkpoint {model}"))?;
        let risks = predict_network(&ck, &peds)?;
        t.lap("predict");
        for (p, r) in peds.iter().zip(&risks) {
            w.write_record([p.family_id.as_str(), "", "", "", "", &r.to_string()])?;
        }
    }
    w.flush()?;
    println!("wrote predictions for {} families", peds.len());
    Ok(())
}

pub fn evaluate(
    g: &Global,
    outcomes: &Path,
    predictions: &[String],
    reference_model: Option<&str>,
    spearman: bool,
    bootstrap: Option<usize>,
) -> Result<()> {
    let c = config(g)?;
    let outcomes = read_outcomes(outcomes)?;
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for spec in predictions {
        let (name, path) = spec
            .split_once('=')
            .with_context(|| format!("expected name=path, got {spec}"))?;
        let table = read_predictions(Path::new(path))?;
        let col = outcomes
            .family_ids
            .iter()
            .map(|id| {
                table
                    .get(id)
                    .copied()
                    .with_context(|| format!("{path} has no prediction for family {id}"))
            })
            .collect::<Result<Vec<f64>>>()?;
        names.push(name.to_string());
        columns.push(col);
    }
    let models: Vec<(&str, &[f64])> = names
        .iter()
        .map(String::as_str)
        .zip(columns.iter().map(Vec::as_slice))
        .collect();
    let kind = if spearman {
        CorrelationKind::Spearman
    } else {
        c.correlation
    };
    let mut t = Timer::new(g);
    let report = pedinet::metrics::evaluate(
        &models,
        &outcomes.y,
        outcomes.weights.as_deref(),
        reference_model,
        kind,
        bootstrap.unwrap_or(c.bootstrap),
        seed::derive_named(c.seed, "bootstrap"),
    )?;
    t.lap("evaluate");
    let dir = out_dir(g)?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    std::fs::write(dir.join("performance.csv"), report.performance_csv()?)?;
    std::fs::write(dir.join("comparisons.csv"), report.comparisons_csv()?)?;
    std::fs::write(dir.join("deciles.csv"), report.deciles_csv()?)?;
    print!("{}", report.performance_csv()?);
    Ok(())
}

pub fn experiment(g: &Global) -> Result<()> {
    let c = config(g)?;
    let dir = out_dir(g)?;
    let summary = run_experiment(&c, dir, g.bench)?;
    for (stage, secs) in &summary.timings {
        eprintln!("bench {stage}: {secs:.3}s");
    }
    println!(
        "experiment {} (config {}) written to {}",
        summary.name,
        summary.config_hash,
        dir.display()
    );
    for p in &summary.curve {
        let f = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
        println!("  n={:<7} {:<9} auc {} rho {}", p.n, p.model, f(p.auc), f(p.rho));
    }
    Ok(())
}

pub fn scenario(g: &Global, checkpoints: &[String], horizon: Option<u32>) -> Result<()> {
    let c = config(g)?;
    let horizon = horizon.unwrap_or(c.horizon);
    let pen = c.penetrance_model()?;
    let mut loaded = Vec::new();
    for spec in checkpoints {
        let (name, path) = spec
            .split_once('=')
            .with_context(|| format!("expected name=checkpoint, got {spec}"))?;
        loaded.push((name.to_string(), load_checkpoint(Path::new(path))?));
    }
    let mut models = vec![("mendelian", Predictor::Mendelian { model: &pen, horizon })];
    for (name, ck) in &loaded {
        models.push((name.as_str(), Predictor::Network(ck)));
    }
    let rows = scenario_table(&models)?;
    let dir = out_dir(g)?;
    let mut w = csv::Writer::from_path(dir.join("scenarios.csv"))?;
    let mut header = vec!["model".to_string()];
    header.extend(SCENARIOS.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for r in &rows {
        let mut rec = vec![r.model.clone()];
        rec.extend(r.risks.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
        println!(
            "{:<10} {}",
            r.model,
            r.risks.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(" ")
        );
    }
    w.flush()?;
    Ok(())
}
