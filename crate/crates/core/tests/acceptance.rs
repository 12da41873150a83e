//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Failures are reported, not
//! fatal; set `PEDINET_ACCEPTANCE_STRICT=1` to exit non-zero when any
//! criterion fails.

use std::time::Instant;

use pedinet::encoder::{summarize_loss, NeighborhoodSizes, ReferenceStructure, FEATURES};
use pedinet::experiment::{
    fit_network, labels, mendelian_risks, network_geometry, pedigrees, predict_network, scenario_table, Predictor,
    ScenarioRow, SCENARIOS,
};
use pedinet::genetics::{build_default_penetrance, CarrierClass, LocusModel, PenetranceConfig, PenetranceModel};
use pedinet::mendelian::{brute_force_posterior, carrier_posterior_peeling};
use pedinet::metrics::{auc, average_precision, bootstrap, censoring_survival, ipcw_weights, metrics, pearson, Metric};
use pedinet::nn::{gradient_check, ArchitectureSpec, Checkpoint, Loss, Network};
use pedinet::pedigree::{Pedigree, Sex};
use pedinet::seed;
use pedinet::sim::{perturb_cohort, simulate_cohort, CountDist, MisreportConfig, SimConfig};
use rand::Rng;

const SEED: u64 = 20_240_601;
const HORIZON: u32 = 10;
const LADDER: [usize; 3] = [2_500, 10_000, 50_000];

struct Outcome {
    results: Vec<(usize, bool)>,
}

impl Outcome {
    fn report(&mut self, id: usize, pass: bool, detail: String) {
        println!("criterion {id:>2}: {} {detail}", if pass { "PASS" } else { "FAIL" });
        self.results.push((id, pass));
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn test_auc(p: &[f64], y: &[f64]) -> f64 {
    auc(p, y, None).expect("test set has both classes")
}

fn c1_peeling(out: &mut Outcome) {
    let mut cfg = SimConfig::default();
    let small = |mean| CountDist::Poisson { mean, cap: 2 };
    let s = &mut cfg.structure;
    for c in [
        &mut s.maternal_aunts,
        &mut s.maternal_uncles,
        &mut s.paternal_aunts,
        &mut s.paternal_uncles,
        &mut s.sisters,
        &mut s.brothers,
        &mut s.daughters,
        &mut s.sons,
    ] {
        *c = small(0.15);
    }
    // raised frequencies put real carrier mass in the posteriors
    let model = build_default_penetrance(&PenetranceConfig {
        loci: [LocusModel::new("locus1", 0.08), LocusModel::new("locus2", 0.06)],
        ..PenetranceConfig::default()
    })
    .unwrap();
    let mut families: Vec<Pedigree> = Vec::new();
    let mut batch = 0;
    while families.len() < 1000 {
        let fams = simulate_cohort(1500, &cfg, &model, seed::derive(SEED, 100 + batch)).unwrap();
        families.extend(fams.into_iter().map(|f| f.pedigree).filter(|p| p.relatives() <= 8));
        batch += 1;
    }
    families.truncate(1000);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for p in &families {
        let a = carrier_posterior_peeling(p, &model).unwrap();
        let b = brute_force_posterior(p, &model).unwrap();
        worst = worst.max(a.max_abs_diff(&b));
    }
    let secs = start.elapsed().as_secs_f64();
    out.report(
        1,
        worst < 1e-10 && secs < 60.0,
        format!("max |peeling - brute force| = {worst:.2e} over 1000 families in {secs:.1} s"),
    );
}

struct Shared {
    model: PenetranceModel,
    test_peds: Vec<Pedigree>,
    test_y: Vec<f64>,
    mendel: Vec<f64>,
    train_peds: Vec<Pedigree>,
    train_y: Vec<f64>,
}

fn c2_generator(out: &mut Outcome) -> Shared {
    let model = PenetranceModel::default_synthetic();
    let cfg = SimConfig::default();
    let test = simulate_cohort(20_000, &cfg, &model, seed::derive_named(SEED, "test")).unwrap();
    let train = simulate_cohort(LADDER[2], &cfg, &model, seed::derive_named(SEED, "train")).unwrap();
    let (test_peds, test_y) = (pedigrees(&test), labels(&test));
    let mendel = mendelian_risks(&test_peds, HORIZON, &model).unwrap();
    let boot = bootstrap(
        &[("mendelian", &mendel)],
        &test_y,
        None,
        1000,
        seed::derive_named(SEED, "c2"),
    )
    .unwrap();
    let oe = metrics(&mendel, &test_y, None).unwrap().oe.unwrap();
    let ci = boot.interval("mendelian", Metric::Oe).unwrap();
    out.report(
        2,
        ci.contains(1.0),
        format!(
            "O/E {oe:.3} (95% CI {:.3}-{:.3}), prevalence {:.4}",
            ci.lo,
            ci.hi,
            mean(&test_y)
        ),
    );
    Shared {
        model,
        test_peds,
        test_y,
        mendel,
        train_peds: pedigrees(&train),
        train_y: labels(&train),
    }
}

fn c3_lifetime(out: &mut Outcome) {
    let model = build_default_penetrance(&PenetranceConfig {
        loci: [LocusModel::new("locus1", 0.25), LocusModel::new("locus2", 0.25)],
        ..PenetranceConfig::default()
    })
    .unwrap();
    let fams = simulate_cohort(4000, &SimConfig::default(), &model, seed::derive_named(SEED, "c3")).unwrap();
    let mut counts = [(0usize, 0usize); 4];
    for f in &fams {
        // the counselee is conditioned on being unaffected at baseline
        for (m, l) in f.pedigree.members.iter().zip(&f.latent).skip(1) {
            if m.sex != Sex::Female {
                continue;
            }
            let c = &mut counts[l.genotype.carrier_class().index()];
            c.0 += 1;
            c.1 += usize::from(l.breast_onset.is_some());
        }
    }
    let rate = |c: CarrierClass| {
        let (n, k) = counts[c.index()];
        (k as f64 / n as f64, n)
    };
    let (non, n_non) = rate(CarrierClass::Noncarrier);
    let (both, n_both) = rate(CarrierClass::Both);
    out.report(
        3,
        (non - 0.12).abs() <= 0.01 && (both - 0.79).abs() <= 0.02 && n_both >= 2000,
        format!("noncarrier {non:.4} (n={n_non}), both-loci {both:.4} (n={n_both})"),
    );
}

struct Trained {
    fcnn: Vec<Checkpoint>,
    cnn: Vec<Checkpoint>,
    fcnn_pred: Vec<Vec<f64>>,
    cnn_pred: Vec<Vec<f64>>,
}

fn spec(base: ArchitectureSpec, n: usize) -> ArchitectureSpec {
    ArchitectureSpec {
        seed: seed::derive(SEED, n as u64),
        ..base
    }
}

fn c4_trend(out: &mut Outcome, s: &Shared) -> Trained {
    let reference = ReferenceStructure::default_simulation();
    let sizes = NeighborhoodSizes::default();
    let start = Instant::now();
    let mut t = Trained {
        fcnn: Vec::new(),
        cnn: Vec::new(),
        fcnn_pred: Vec::new(),
        cnn_pred: Vec::new(),
    };
    for &n in &LADDER {
        let (peds, ys) = (&s.train_peds[..n], &s.train_y[..n]);
        let f = fit_network(&spec(ArchitectureSpec::fcnn(), n), &reference, sizes, peds, ys).unwrap();
        let c = fit_network(&spec(ArchitectureSpec::cnn(), n), &reference, sizes, peds, ys).unwrap();
        t.fcnn_pred.push(predict_network(&f, &s.test_peds).unwrap());
        t.cnn_pred.push(predict_network(&c, &s.test_peds).unwrap());
        t.fcnn.push(f);
        t.cnn.push(c);
    }
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    let m_auc = test_auc(&s.mendel, &s.test_y);
    let fa: Vec<f64> = t.fcnn_pred.iter().map(|p| test_auc(p, &s.test_y)).collect();
    let ca: Vec<f64> = t.cnn_pred.iter().map(|p| test_auc(p, &s.test_y)).collect();
    let monotone = |a: &[f64]| a.windows(2).all(|w| w[1] >= w[0] - 0.005);
    let rho_f = pearson(&t.fcnn_pred[2], &s.mendel).unwrap_or(f64::NAN);
    let rho_c = pearson(&t.cnn_pred[2], &s.mendel).unwrap_or(f64::NAN);
    let checks = [
        ("FCNN AUC non-decreasing", monotone(&fa)),
        ("CNN AUC non-decreasing", monotone(&ca)),
        ("FCNN within 0.03 of Mendelian", (fa[2] - m_auc).abs() <= 0.03),
        ("CNN within 0.03 of Mendelian", (ca[2] - m_auc).abs() <= 0.03),
        ("rho(FCNN) >= 0.80", rho_f >= 0.80),
        ("rho(CNN) >= 0.80", rho_c >= 0.80),
        ("CNN >= FCNN - 0.005 at n=2500", ca[0] >= fa[0] - 0.005),
        ("under 30 CPU-minutes", minutes < 30.0),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    out.report(
        4,
        failed.is_empty(),
        format!(
            "Mendelian AUC {m_auc:.4}; FCNN {:.4}/{:.4}/{:.4}; CNN {:.4}/{:.4}/{:.4}; rho FCNN {rho_f:.3} CNN {rho_c:.3}; {minutes:.1} min{}",
            fa[0],
            fa[1],
            fa[2],
            ca[0],
            ca[1],
            ca[2],
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
        ),
    );
    t
}

fn c5_misreport(out: &mut Outcome, s: &Shared) {
    let mis = MisreportConfig::default();
    let test = perturb_cohort(&s.test_peds, &mis, seed::derive_named(SEED, "misreport-test"));
    let train = perturb_cohort(&s.train_peds, &mis, seed::derive_named(SEED, "misreport-train"));
    let mendel = mendelian_risks(&test, HORIZON, &s.model).unwrap();
    let ck = fit_network(
        &spec(ArchitectureSpec::cnn(), 5),
        &ReferenceStructure::default_simulation(),
        NeighborhoodSizes::default(),
        &train,
        &s.train_y,
    )
    .unwrap();
    let cnn = predict_network(&ck, &test).unwrap();
    let m_oe = metrics(&mendel, &s.test_y, None).unwrap().oe.unwrap();
    let c_oe = metrics(&cnn, &s.test_y, None).unwrap().oe.unwrap();
    let boot = bootstrap(
        &[("mendelian", &mendel), ("cnn", &cnn)],
        &s.test_y,
        None,
        500,
        seed::derive_named(SEED, "c5"),
    )
    .unwrap();
    let win = boot.comparison("cnn", "mendelian", Metric::Auc).unwrap().win;
    out.report(
        5,
        m_oe < 0.90 && (0.90..=1.10).contains(&c_oe) && win >= 0.80,
        format!(
            "Mendelian O/E {m_oe:.3}, CNN O/E {c_oe:.3}; AUC Mendelian {:.4} CNN {:.4}; CNN wins {:.1}% of 500 replicates",
            test_auc(&mendel, &s.test_y),
            test_auc(&cnn, &s.test_y),
            100.0 * win
        ),
    );
}

fn c6_scenarios(out: &mut Outcome, s: &Shared, t: &Trained) {
    let rows = scenario_table(&[
        (
            "mendelian",
            Predictor::Mendelian {
                model: &s.model,
                horizon: HORIZON,
            },
        ),
        ("cnn", Predictor::Network(&t.cnn[2])),
    ])
    .unwrap();
    let (m, c) = (&rows[0], &rows[1]);
    let risk = |r: &ScenarioRow, k| r.risk(k).unwrap();
    let fmt = |r: &ScenarioRow| {
        SCENARIOS
            .iter()
            .map(|&k| format!("{:.4}", risk(r, k)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    out.report(
        6,
        m.strictly_increasing() && risk(c, 'A') < risk(c, 'D') && risk(c, 'A') < risk(c, 'E'),
        format!("Mendelian A-E [{}]; CNN A-E [{}]", fmt(m), fmt(c)),
    );
}

fn c7_gradients(out: &mut Outcome) {
    let reference = ReferenceStructure::default_simulation();
    let mut rng = seed::rng(seed::derive_named(SEED, "c7"));
    let xs: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..reference.input_len()).map(|_| rng.gen()).collect())
        .collect();
    let ys: Vec<f64> = (0..8).map(|i| f64::from(i % 2)).collect();
    let mut worst = [0.0f64; 2];
    for (k, base) in [ArchitectureSpec::fcnn(), ArchitectureSpec::cnn()]
        .into_iter()
        .enumerate()
    {
        for loss in [Loss::Mse, Loss::CrossEntropy] {
            let spec = ArchitectureSpec {
                loss,
                seed: 7,
                ..base.clone()
            };
            let g = network_geometry(&spec, &reference, NeighborhoodSizes::default());
            let net = Network::init(spec, g).unwrap();
            worst[k] = worst[k].max(gradient_check(&net, &xs, &ys, 400, 11).unwrap());
        }
    }
    out.report(
        7,
        worst.iter().all(|&e| e < 1e-4),
        format!("max relative error FCNN {:.2e}, CNN {:.2e}", worst[0], worst[1]),
    );
}

fn c8_receptive_field(out: &mut Outcome) {
    let reference = ReferenceStructure::default_simulation();
    let second: Vec<usize> = (0..reference.size())
        .filter(|&s| reference.slot_type(s).degree() == Some(2))
        .collect();
    let grad = |hidden: Vec<usize>| {
        let spec = ArchitectureSpec {
            hidden,
            seed: 13,
            ..ArchitectureSpec::cnn()
        };
        let g = network_geometry(&spec, &reference, NeighborhoodSizes::default());
        let net = Network::init(spec, g).unwrap();
        let mut rng = seed::rng(17);
        let x: Vec<f64> = (0..reference.input_len()).map(|_| rng.gen()).collect();
        net.input_gradient(&x).unwrap()
    };
    let g1 = grad(vec![10]);
    let g2 = grad(vec![10, 5]);
    let entries = |g: &[f64]| -> Vec<f64> {
        second
            .iter()
            .flat_map(|&s| (0..FEATURES).map(move |c| s * FEATURES + c))
            .map(|i| g[i])
            .collect()
    };
    let one_zero = entries(&g1).iter().all(|&v| v == 0.0);
    let two_nonzero = entries(&g2).iter().filter(|&&v| v != 0.0).count();
    out.report(
        8,
        one_zero && two_nonzero > 0,
        format!(
            "{} degree-2 slots; 1-layer gradients all zero: {one_zero}; 2-layer nonzero entries: {two_nonzero}",
            second.len()
        ),
    );
}

fn c9_metrics(out: &mut Outcome) {
    let pair = auc(&[0.1, 0.4, 0.35, 0.8], &[0.0, 0.0, 1.0, 1.0], None).unwrap();
    let tied = auc(&[0.3; 6], &[0.0, 1.0, 0.0, 1.0, 1.0, 0.0], None).unwrap();
    let mut rng = seed::rng(seed::derive_named(SEED, "c9"));
    let n = 200_000;
    let ys: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.gen_bool(0.05)))).collect();
    let ps: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    let prevalence = mean(&ys);
    let ap = average_precision(&ps, &ys, None).unwrap();
    let times = [2.0, 3.0, 4.0, 6.0, 8.0, 12.0];
    let events = [false, true, false, true, false, false];
    let censored = [true, false, true, false, true, false];
    let steps_ok = censoring_survival(&times, &censored) == vec![(2.0, 5.0 / 6.0), (4.0, 5.0 / 8.0), (8.0, 5.0 / 16.0)];
    let w = ipcw_weights(&times, &events, &censored, 10.0).unwrap();
    let fixture_ok = steps_ok && w == vec![0.0, 6.0 / 5.0, 0.0, 8.0 / 5.0, 0.0, 16.0 / 5.0];
    let ones = ipcw_weights(&times, &events, &[false; 6], 10.0)
        .unwrap()
        .iter()
        .all(|&v| v == 1.0);
    out.report(
        9,
        pair == 0.75 && tied == 0.5 && (ap - prevalence).abs() <= 0.005 && fixture_ok && ones,
        format!(
            "pair AUC {pair}, tied AUC {tied}, random PR-AUC {ap:.4} vs prevalence {prevalence:.4}, KM fixture {fixture_ok}, no-censoring ones {ones}"
        ),
    );
}

fn c10_loss(out: &mut Outcome, s: &Shared, t: &Trained) {
    let n = LADDER[2];
    let reference = ReferenceStructure::default_simulation();
    let mut gaps = Vec::new();
    for (k, base) in [ArchitectureSpec::fcnn(), ArchitectureSpec::cnn()]
        .into_iter()
        .enumerate()
    {
        let ce = ArchitectureSpec {
            loss: Loss::CrossEntropy,
            ..spec(base, n)
        };
        let ck = fit_network(&ce, &reference, NeighborhoodSizes::default(), &s.train_peds, &s.train_y).unwrap();
        let a_ce = test_auc(&predict_network(&ck, &s.test_peds).unwrap(), &s.test_y);
        let mse = if k == 0 { &t.fcnn_pred[2] } else { &t.cnn_pred[2] };
        let a_mse = test_auc(mse, &s.test_y);
        gaps.push((a_mse, a_ce));
    }
    let ok = gaps.iter().all(|(a, b)| (a - b).abs() < 0.01);
    out.report(
        10,
        ok,
        format!(
            "FCNN MSE {:.4} CE {:.4}; CNN MSE {:.4} CE {:.4}",
            gaps[0].0, gaps[0].1, gaps[1].0, gaps[1].1
        ),
    );
}

fn c11_reference(out: &mut Outcome, s: &Shared, t: &Trained) {
    let q1s = ReferenceStructure::quartile("Q1s").unwrap();
    let q3s = ReferenceStructure::quartile("Q3s").unwrap();
    let ck = fit_network(
        &spec(ArchitectureSpec::cnn(), LADDER[2]),
        &q1s,
        NeighborhoodSizes::default(),
        &s.train_peds,
        &s.train_y,
    )
    .unwrap();
    let a1 = test_auc(&predict_network(&ck, &s.test_peds).unwrap(), &s.test_y);
    // Q3s and the default simulation reference share one slot layout
    assert_eq!(
        q3s.fingerprint(),
        ReferenceStructure::default_simulation().fingerprint()
    );
    let a3 = test_auc(&t.cnn_pred[2], &s.test_y);
    let l1 = summarize_loss(&s.train_peds, &q1s).unwrap();
    let l3 = summarize_loss(&s.train_peds, &q3s).unwrap();
    out.report(
        11,
        (a1 - a3).abs() <= 0.015 && l1 > l3,
        format!("CNN AUC Q1s {a1:.4} Q3s {a3:.4}; dropped fraction Q1s {l1:.3} Q3s {l3:.3}"),
    );
}

fn main() {
    let mut out = Outcome { results: Vec::new() };
    c1_peeling(&mut out);
    let shared = c2_generator(&mut out);
    c3_lifetime(&mut out);
    let trained = c4_trend(&mut out, &shared);
    c5_misreport(&mut out, &shared);
    c6_scenarios(&mut out, &shared, &trained);
    c7_gradients(&mut out);
    c8_receptive_field(&mut out);
    c9_metrics(&mut out);
    c10_loss(&mut out, &shared, &trained);
    c11_reference(&mut out, &shared, &trained);
    let failed: Vec<usize> = out.results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria passed",
        out.results.len() - failed.len(),
        out.results.len()
    );
    let strict = std::env::var("PEDINET_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}
