//! End-to-end experiment runner and shared pipeline stages.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoder::{
    build_neighborhoods, standardize, FeatureScaler, NeighborhoodSizes, ReferenceFile, ReferenceStructure, FEATURES,
};
use crate::error::{in_stage, Error, Result};
use crate::genetics::{build_default_penetrance, PenetranceConfig, PenetranceModel};
use crate::mendelian::future_risk;
use crate::metrics::{auc, evaluate, pearson, spearman, CorrelationKind, EvalReport};
use crate::nn::{save_checkpoint, train, ArchitectureSpec, Checkpoint, Geometry, Kind};
use crate::pedigree::{Diagnosis, Member, Pedigree, Sex};
use crate::seed;
use crate::sim::{perturb_cohort, simulate_cohort, MisreportConfig, SimConfig, SimulatedFamily, StructureDistribution};

/// Seed for per-family subsampling during standardization. Keyed by family id
/// so an encoding never depends on cohort order.
const ENCODE_SEED: u64 = 0x005e_ed0f_5ab5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Mendelian,
    Fcnn,
    Cnn,
    Logistic,
}

impl ModelName {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Mendelian => "mendelian",
            ModelName::Fcnn => "fcnn",
            ModelName::Cnn => "cnn",
            ModelName::Logistic => "logistic",
        }
    }

    pub fn parse(s: &str) -> Result<ModelName> {
        match s.to_ascii_lowercase().as_str() {
            "mendelian" => Ok(ModelName::Mendelian),
            "fcnn" => Ok(ModelName::Fcnn),
            "cnn" => Ok(ModelName::Cnn),
            "logistic" | "lr" => Ok(ModelName::Logistic),
            other => Err(Error::Config(format!("unknown model {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    /// Nested training subsets; each is a prefix of the largest.
    pub train_sizes: Vec<usize>,
    pub test_size: usize,
    pub horizon: u32,
    pub models: Vec<ModelName>,
    pub structure: StructureDistribution,
    pub penetrance: PenetranceConfig,
    /// JSON penetrance configuration overriding `penetrance`.
    pub penetrance_file: Option<PathBuf>,
    /// Misreporting applied to the test families.
    pub misreport: Option<MisreportConfig>,
    /// Also misreport the training families.
    pub misreport_training: bool,
    /// Preset name or path to a reference JSON file.
    pub reference: String,
    pub neighborhood: NeighborhoodSizes,
    pub fcnn: ArchitectureSpec,
    pub cnn: ArchitectureSpec,
    pub logistic: ArchitectureSpec,
    pub bootstrap: usize,
    pub correlation: CorrelationKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "default".into(),
            seed: 1,
            train_sizes: vec![2_500, 10_000, 50_000],
            test_size: 20_000,
            horizon: 10,
            models: vec![
                ModelName::Mendelian,
                ModelName::Fcnn,
                ModelName::Cnn,
                ModelName::Logistic,
            ],
            structure: StructureDistribution::default(),
            penetrance: PenetranceConfig::default(),
            penetrance_file: None,
            misreport: None,
            misreport_training: false,
            reference: "default".into(),
            neighborhood: NeighborhoodSizes::default(),
            fcnn: ArchitectureSpec::fcnn(),
            cnn: ArchitectureSpec::cnn(),
            logistic: ArchitectureSpec::logistic(),
            bootstrap: 1000,
            correlation: CorrelationKind::Pearson,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        Ok(serde_json::from_reader(std::fs::File::open(path)?)?)
    }

    pub fn check(&self) -> Result<()> {
        if self.test_size == 0 {
            return Err(Error::Config("test_size must be positive".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("model roster is empty".into()));
        }
        let trains = self.models.iter().any(|&m| m != ModelName::Mendelian);
        if trains && (self.train_sizes.is_empty() || self.train_sizes.contains(&0)) {
            return Err(Error::Config("network models need positive train_sizes".into()));
        }
        if let Some(path) = &self.penetrance_file {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "penetrance file {} does not exist",
                    path.display()
                )));
            }
        }
        if let Some(m) = &self.misreport {
            m.check()?;
        }
        self.structure.check()?;
        self.reference_structure()?;
        for spec in [&self.fcnn, &self.cnn, &self.logistic] {
            spec.check()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn reference_structure(&self) -> Result<ReferenceStructure> {
        resolve_reference(&self.reference)
    }

    pub fn penetrance_model(&self) -> Result<PenetranceModel> {
        match &self.penetrance_file {
            Some(path) => PenetranceModel::from_config_file(path),
            None => build_default_penetrance(&self.penetrance),
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            structure: self.structure.clone(),
            horizon: self.horizon,
        }
    }

    pub fn spec(&self, model: ModelName) -> Option<&ArchitectureSpec> {
        match model {
            ModelName::Mendelian => None,
            ModelName::Fcnn => Some(&self.fcnn),
            ModelName::Cnn => Some(&self.cnn),
            ModelName::Logistic => Some(&self.logistic),
        }
    }
}

/// A preset name (`default`, `data`, `q1s`, ...) or a reference JSON path.
pub fn resolve_reference(name: &str) -> Result<ReferenceStructure> {
    let path = Path::new(name);
    if path.extension().is_some_and(|e| e == "json") {
        if !path.exists() {
            return Err(Error::Config(format!("reference file {name} does not exist")));
        }
        return ReferenceFile::load(path)?.structure();
    }
    ReferenceStructure::preset(name)
}

/// Mendelian t-year risks, failing with every offending family id.
pub fn mendelian_risks(peds: &[Pedigree], horizon: u32, model: &PenetranceModel) -> Result<Vec<f64>> {
    let results: Vec<Result<f64>> = peds
        .par_iter()
        .map(|p| future_risk(p, horizon, model).map(|r| r.risk))
        .collect();
    collect_family_results("mendelian", peds, results)
}

fn collect_family_results(stage: &str, peds: &[Pedigree], results: Vec<Result<f64>>) -> Result<Vec<f64>> {
    let mut failed = Vec::new();
    let mut first = None;
    let mut out = Vec::with_capacity(results.len());
    for (p, r) in peds.iter().zip(results) {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                failed.push(p.family_id.clone());
                first.get_or_insert(e);
            }
        }
    }
    match first {
        None => Ok(out),
        Some(e) => Err(Error::Stage {
            stage: stage.into(),
            families: failed,
            source: Box::new(e),
        }),
    }
}

/// Standardized, flattened feature rows (unscaled).
pub fn encode(peds: &[Pedigree], reference: &ReferenceStructure) -> Vec<Vec<f64>> {
    peds.par_iter()
        .map(|p| standardize(p, reference, seed::derive_named(ENCODE_SEED, &p.family_id)).x)
        .collect()
}

pub fn network_geometry(spec: &ArchitectureSpec, reference: &ReferenceStructure, sizes: NeighborhoodSizes) -> Geometry {
    match spec.kind {
        Kind::PedigreeCnn => Geometry::Pedigree {
            slots: reference.size(),
            features: FEATURES,
            extras: 0,
            map: build_neighborhoods(reference, sizes, spec.seed),
        },
        Kind::Fcnn | Kind::Logistic => Geometry::Dense {
            input_len: reference.input_len(),
        },
    }
}

/// Encodes, fits the feature scaler, and trains one network.
pub fn fit_network(
    spec: &ArchitectureSpec,
    reference: &ReferenceStructure,
    sizes: NeighborhoodSizes,
    peds: &[Pedigree],
    ys: &[f64],
) -> Result<Checkpoint> {
    let raw = encode(peds, reference);
    let scaler = FeatureScaler::fit(&raw)?;
    let xs = scaler.apply_all(&raw)?;
    let out = train(spec, network_geometry(spec, reference, sizes), &xs, ys, None)?;
    Ok(Checkpoint {
        network: out.network,
        scaler: Some(scaler),
        reference: Some(reference.fingerprint()),
    })
}

pub fn predict_network(ck: &Checkpoint, peds: &[Pedigree]) -> Result<Vec<f64>> {
    let fingerprint = ck
        .reference
        .as_deref()
        .ok_or_else(|| Error::Checkpoint("checkpoint has no reference structure".into()))?;
    let reference = ReferenceStructure::from_fingerprint(fingerprint)?;
    let raw = encode(peds, &reference);
    let xs = match &ck.scaler {
        Some(s) => s.apply_all(&raw)?,
        None => raw,
    };
    ck.network.predict_batch(&xs)
}

/// Anything that maps pedigrees to t-year risks.
pub enum Predictor<'a> {
    Mendelian { model: &'a PenetranceModel, horizon: u32 },
    Network(&'a Checkpoint),
}

impl Predictor<'_> {
    pub fn predict(&self, peds: &[Pedigree]) -> Result<Vec<f64>> {
        match self {
            Predictor::Mendelian { model, horizon } => mendelian_risks(peds, *horizon, model),
            Predictor::Network(ck) => predict_network(ck, peds),
        }
    }
}

pub const SCENARIOS: [char; 5] = ['A', 'B', 'C', 'D', 'E'];

/// The fixed five-scenario family: a 40-year-old counselee with parents,
/// four grandparents, one paternal aunt, one maternal aunt and two maternal
/// uncles.
///
/// - A: no affected relatives
/// - B: maternal grandmother with breast cancer at 80
/// - C: maternal grandmother with breast cancer at 60
/// - D: C, plus mother with breast cancer at 50
/// - E: D, plus mother with ovarian cancer at 60
pub fn scenario_pedigree(scenario: char) -> Result<Pedigree> {
    let (f, m) = (Sex::Female, Sex::Male);
    let mut members = vec![
        Member::new(0, f, 40).with_parents(Some(1), Some(2)),
        Member::new(1, f, 66).with_parents(Some(3), Some(4)),
        Member::new(2, m, 68).with_parents(Some(5), Some(6)),
        Member::new(3, f, 88),
        Member::new(4, m, 88),
        Member::new(5, f, 88),
        Member::new(6, m, 88),
        Member::new(7, f, 63).with_parents(Some(3), Some(4)),
        Member::new(8, m, 61).with_parents(Some(3), Some(4)),
        Member::new(9, m, 59).with_parents(Some(3), Some(4)),
        Member::new(10, f, 65).with_parents(Some(5), Some(6)),
    ];
    match scenario {
        'A' => {}
        'B' => members[3].breast = Diagnosis::at(80),
        'C' | 'D' | 'E' => {
            members[3].breast = Diagnosis::at(60);
            if scenario != 'C' {
                members[1].breast = Diagnosis::at(50);
            }
            if scenario == 'E' {
                members[1].ovarian = Diagnosis::at(60);
            }
        }
        other => return Err(Error::Config(format!("unknown scenario {other}"))),
    }
    Ok(Pedigree::new(format!("scenario_{scenario}"), members))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub model: String,
    /// Risks for scenarios A to E.
    pub risks: [f64; 5],
}

impl ScenarioRow {
    pub fn risk(&self, scenario: char) -> Option<f64> {
        SCENARIOS.iter().position(|&s| s == scenario).map(|k| self.risks[k])
    }

    pub fn strictly_increasing(&self) -> bool {
        self.risks.windows(2).all(|w| w[0] < w[1])
    }
}

/// One risk per model per scenario.
pub fn scenario_table(models: &[(&str, Predictor<'_>)]) -> Result<Vec<ScenarioRow>> {
    let peds = SCENARIOS
        .iter()
        .map(|&s| scenario_pedigree(s))
        .collect::<Result<Vec<_>>>()?;
    models
        .iter()
        .map(|(name, p)| {
            let r = p.predict(&peds)?;
            Ok(ScenarioRow {
                model: name.to_string(),
                risks: [r[0], r[1], r[2], r[3], r[4]],
            })
        })
        .collect()
}

pub fn labels(families: &[SimulatedFamily]) -> Vec<f64> {
    families.iter().map(|f| f64::from(u8::from(f.y0))).collect()
}

pub fn pedigrees(families: &[SimulatedFamily]) -> Vec<Pedigree> {
    families.iter().map(|f| f.pedigree.clone()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub model: String,
    pub auc: Option<f64>,
    /// Correlation with the Mendelian predictions on the same test families.
    pub rho: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub curve: Vec<CurvePoint>,
    /// Report blocks keyed by name: `test`, or `clean` and `misreported`.
    pub reports: BTreeMap<String, EvalReport>,
    pub scenarios: Vec<ScenarioRow>,
    /// Wall-clock seconds per stage; not part of the reproducible output.
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

struct Clock {
    enabled: bool,
    last: Instant,
    laps: Vec<(String, f64)>,
}

impl Clock {
    fn lap(&mut self, stage: &str) {
        if self.enabled {
            let now = Instant::now();
            self.laps.push((stage.into(), (now - self.last).as_secs_f64()));
            self.last = now;
        }
    }
}

/// Runs simulation, training across the size ladder, evaluation and the
/// scenario table, writing every artifact into `out`.
pub fn run_experiment(config: &ExperimentConfig, out: &Path, bench: bool) -> Result<ExperimentSummary> {
    config.check()?;
    std::fs::create_dir_all(out)?;
    let hash = config.hash();
    let mut clock = Clock {
        enabled: bench,
        last: Instant::now(),
        laps: Vec::new(),
    };
    let model = in_stage("penetrance", config.penetrance_model())?;
    let reference = config.reference_structure()?;
    let sim = config.sim_config();
    let networks: Vec<ModelName> = config
        .models
        .iter()
        .copied()
        .filter(|&m| m != ModelName::Mendelian)
        .collect();
    let max_n = if networks.is_empty() {
        0
    } else {
        config.train_sizes.iter().copied().max().unwrap_or(0)
    };

    let test = in_stage(
        "simulate",
        simulate_cohort(config.test_size, &sim, &model, seed::derive_named(config.seed, "test")),
    )?;
    let train_fams = in_stage(
        "simulate",
        simulate_cohort(max_n, &sim, &model, seed::derive_named(config.seed, "train")),
    )?;
    clock.lap("simulate");

    let y_test = labels(&test);
    let clean_test = pedigrees(&test);
    let (eval_test, train_peds) = match &config.misreport {
        Some(m) => {
            let t = perturb_cohort(&clean_test, m, seed::derive_named(config.seed, "misreport-test"));
            let tr = pedigrees(&train_fams);
            let tr = if config.misreport_training {
                perturb_cohort(&tr, m, seed::derive_named(config.seed, "misreport-train"))
            } else {
                tr
            };
            (t, tr)
        }
        None => (clean_test.clone(), pedigrees(&train_fams)),
    };
    let y_train = labels(&train_fams);
    clock.lap("perturb");

    let mendel = mendelian_risks(&eval_test, config.horizon, &model)?;
    let mendel_clean = match config.misreport {
        Some(_) => Some(mendelian_risks(&clean_test, config.horizon, &model)?),
        None => None,
    };
    clock.lap("mendelian");

    let corr = |a: &[f64], b: &[f64]| match config.correlation {
        CorrelationKind::Pearson => pearson(a, b),
        CorrelationKind::Spearman => spearman(a, b),
    };
    let mut curve = Vec::new();
    let mut final_preds: BTreeMap<ModelName, Vec<f64>> = BTreeMap::new();
    let mut checkpoints: BTreeMap<ModelName, Checkpoint> = BTreeMap::new();
    let mut sizes = config.train_sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    if networks.is_empty() {
        sizes.clear();
    }
    for &n in &sizes {
        for &name in &networks {
            let spec = config.spec(name).expect("network model has a spec");
            let ck = in_stage(
                &format!("train {} n={n}", name.as_str()),
                fit_network(spec, &reference, config.neighborhood, &train_peds[..n], &y_train[..n]),
            )?;
            let preds = in_stage("predict", predict_network(&ck, &eval_test))?;
            curve.push(CurvePoint {
                n,
                model: name.as_str().into(),
                auc: auc(&preds, &y_test, None),
                rho: corr(&preds, &mendel),
            });
            if n == max_n {
                final_preds.insert(name, preds);
                checkpoints.insert(name, ck);
            }
        }
        clock.lap(&format!("train n={n}"));
    }

    let mut roster: Vec<(&str, &[f64])> = Vec::new();
    for &name in &config.models {
        match name {
            ModelName::Mendelian => roster.push(("mendelian", &mendel)),
            other => roster.push((other.as_str(), &final_preds[&other])),
        }
    }
    let has_mendel = config.models.contains(&ModelName::Mendelian);
    let reference_model = has_mendel.then_some("mendelian");
    let boot_seed = seed::derive_named(config.seed, "bootstrap");
    let mut reports = BTreeMap::new();
    let main = in_stage(
        "evaluate",
        evaluate(
            &roster,
            &y_test,
            None,
            reference_model,
            config.correlation,
            config.bootstrap,
            boot_seed,
        ),
    )?;
    match &mendel_clean {
        Some(clean) => {
            let clean_report = in_stage(
                "evaluate",
                evaluate(
                    &[("mendelian", clean)],
                    &y_test,
                    None,
                    None,
                    config.correlation,
                    config.bootstrap,
                    boot_seed,
                ),
            )?;
            reports.insert("clean".to_string(), clean_report);
            reports.insert("misreported".to_string(), main);
        }
        None => {
            reports.insert("test".to_string(), main);
        }
    }
    clock.lap("evaluate");

    let mut predictors: Vec<(&str, Predictor<'_>)> = Vec::new();
    for &name in &config.models {
        match name {
            ModelName::Mendelian => predictors.push((
                "mendelian",
                Predictor::Mendelian {
                    model: &model,
                    horizon: config.horizon,
                },
            )),
            other => predictors.push((other.as_str(), Predictor::Network(&checkpoints[&other]))),
        }
    }
    let scenarios = in_stage("scenario", scenario_table(&predictors))?;
    clock.lap("scenario");

    let summary = ExperimentSummary {
        name: config.name.clone(),
        config_hash: hash,
        seed: config.seed,
        curve,
        reports,
        scenarios,
        timings: clock.laps,
    };
    write_artifacts(config, &summary, &checkpoints, out)?;
    Ok(summary)
}

fn stamp(summary: &ExperimentSummary) -> String {
    format!("# config_hash={} seed={}\n", summary.config_hash, summary.seed)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn write_artifacts(
    config: &ExperimentConfig,
    summary: &ExperimentSummary,
    checkpoints: &BTreeMap<ModelName, Checkpoint>,
    out: &Path,
) -> Result<()> {
    let write = |name: &str, body: String| std::fs::write(out.join(name), body);
    write("config.json", serde_json::to_string_pretty(config)?)?;
    write("summary.json", serde_json::to_string_pretty(summary)?)?;

    let mut curve = stamp(summary) + "n,model,auc,rho\n";
    for c in &summary.curve {
        curve += &format!("{},{},{},{}\n", c.n, c.model, cell(c.auc), cell(c.rho));
    }
    write("curves.csv", curve)?;

    for (block, report) in &summary.reports {
        write(
            &format!("{block}_performance.csv"),
            stamp(summary) + &report.performance_csv()?,
        )?;
        write(
            &format!("{block}_comparisons.csv"),
            stamp(summary) + &report.comparisons_csv()?,
        )?;
        write(&format!("{block}_deciles.csv"), stamp(summary) + &report.deciles_csv()?)?;
    }

    let mut scen = stamp(summary) + "model,A,B,C,D,E,e_minus_d\n";
    for r in &summary.scenarios {
        let cols: Vec<String> = r.risks.iter().map(|v| v.to_string()).collect();
        scen += &format!("{},{},{}\n", r.model, cols.join(","), r.risks[4] - r.risks[3]);
    }
    write("scenarios.csv", scen)?;

    if !checkpoints.is_empty() {
        std::fs::create_dir_all(out.join("models"))?;
        for (name, ck) in checkpoints {
            save_checkpoint(&out.join("models").join(format!("{}.ckpt", name.as_str())), ck)?;
        }
    }
    if !summary.timings.is_empty() {
        let t: BTreeMap<&str, f64> = summary.timings.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        write("bench.json", serde_json::to_string_pretty(&t)?)?;
    }
    Ok(())
}
