use pedinet::encoder::{append_extras, standardize, ReferenceStructure};
use pedinet::genetics::{
    build_default_penetrance, founder_prior, phenotype_likelihood, transmission_prob, CarrierClass, Genotype,
    LocusModel, PenetranceConfig, PenetranceModel,
};
use pedinet::mendelian::{brute_force_posterior, carrier_posterior_peeling, future_risk};
use pedinet::metrics::auc;
use pedinet::pedigree::{classify_all, parse_csv, write_csv, Member, Pedigree, RelativeType, Sex};
use pedinet::sim::{perturb_misreport, simulate_family_seeded, CountDist, MisreportConfig, SimConfig};
use proptest::prelude::*;

fn small_config() -> SimConfig {
    let mut cfg = SimConfig::default();
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
        *c = CountDist::Table(vec![0.7, 0.3]);
    }
    cfg
}

fn model_with(f1: f64, f2: f64) -> PenetranceModel {
    build_default_penetrance(&PenetranceConfig {
        loci: [LocusModel::new("locus1", f1), LocusModel::new("locus2", f2)],
        ..PenetranceConfig::default()
    })
    .unwrap()
}

fn family(seed: u64, cfg: &SimConfig, model: &PenetranceModel) -> Pedigree {
    simulate_family_seeded(&format!("P{seed}"), cfg, model, seed)
        .unwrap()
        .pedigree
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn peeling_matches_brute_force(seed in any::<u64>(), f1 in 0.005f64..0.2, f2 in 0.005f64..0.2) {
        let model = model_with(f1, f2);
        let p = family(seed, &small_config(), &model);
        prop_assume!(p.relatives() <= 8);
        let a = carrier_posterior_peeling(&p, &model).unwrap();
        let b = brute_force_posterior(&p, &model).unwrap();
        prop_assert!(a.max_abs_diff(&b) < 1e-10);
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>()) {
        let model = PenetranceModel::default_synthetic();
        let peds: Vec<Pedigree> = (0..3).map(|k| family(seed.wrapping_add(k), &SimConfig::default(), &model)).collect();
        let mut buf = Vec::new();
        write_csv(&mut buf, &peds).unwrap();
        prop_assert_eq!(parse_csv(buf.as_slice()).unwrap(), peds);
    }

    #[test]
    fn relative_types_agree_with_sex(seed in any::<u64>()) {
        let p = family(seed, &SimConfig::default(), &PenetranceModel::default_synthetic());
        for (m, t) in p.members.iter().zip(classify_all(&p)) {
            if let Some(s) = t.implied_sex() {
                prop_assert_eq!(s, m.sex);
            }
        }
    }

    #[test]
    fn sibling_order_does_not_matter(seed in any::<u64>()) {
        let model = model_with(0.05, 0.05);
        let p = family(seed, &SimConfig::default(), &model);
        let types = classify_all(&p);
        let sisters: Vec<usize> = (0..p.len()).filter(|&i| types[i] == RelativeType::Sister).collect();
        prop_assume!(sisters.len() >= 2);
        let (a, b) = (sisters[0], sisters[1]);
        let mut q = p.clone();
        q.members.swap(a, b);
        q.members[a].id = a;
        q.members[b].id = b;
        let x = carrier_posterior_peeling(&p, &model).unwrap();
        let y = carrier_posterior_peeling(&q, &model).unwrap();
        prop_assert!(x.max_abs_diff(&y) < 1e-12);
    }

    #[test]
    fn unaffected_elderly_aunt_never_raises_both_mass(seed in any::<u64>(), age in 70u32..=94) {
        let model = model_with(0.05, 0.05);
        let p = family(seed, &small_config(), &model);
        let types = classify_all(&p);
        let gm = types.iter().position(|&t| t == RelativeType::MaternalGrandmother).unwrap();
        let gf = types.iter().position(|&t| t == RelativeType::MaternalGrandfather).unwrap();
        let mut q = p.clone();
        q.members.push(Member::new(p.len(), Sex::Female, age).with_parents(Some(gm), Some(gf)));
        let before = carrier_posterior_peeling(&p, &model).unwrap().get(CarrierClass::Both);
        let after = carrier_posterior_peeling(&q, &model).unwrap().get(CarrierClass::Both);
        prop_assert!(after <= before + 1e-12, "{before} -> {after}");
    }

    #[test]
    fn future_risk_grows_with_horizon(seed in any::<u64>(), t in 1u32..30) {
        let model = PenetranceModel::default_synthetic();
        let p = family(seed, &SimConfig::default(), &model);
        let a = future_risk(&p, t, &model).unwrap().risk;
        let b = future_risk(&p, t + 1, &model).unwrap().risk;
        prop_assert!(b >= a - 1e-15);
    }

    #[test]
    fn misreporting_keeps_structure(seed in any::<u64>(), pseed in any::<u64>()) {
        let p = family(seed, &SimConfig::default(), &PenetranceModel::default_synthetic());
        let q = perturb_misreport(&p, &MisreportConfig::default(), pseed);
        prop_assert_eq!(p.len(), q.len());
        prop_assert_eq!(&p.members[0], &q.members[0]);
        for (a, b) in p.members.iter().zip(&q.members) {
            prop_assert_eq!((a.id, a.mother, a.father, a.sex), (b.id, b.mother, b.father, b.sex));
        }
    }

    #[test]
    fn unaffected_likelihood_decreases_with_age(age in 1u32..94, class in 0usize..4, male in any::<bool>()) {
        let model = PenetranceModel::default_synthetic();
        let sex = if male { Sex::Male } else { Sex::Female };
        let class = CarrierClass::ALL[class];
        let l = |a| phenotype_likelihood(&Member::new(1, sex, a), class, &model).unwrap();
        prop_assert!(l(age + 1) <= l(age));
    }

    #[test]
    fn genetic_distributions_are_proper(f1 in 0.0f64..0.5, f2 in 0.0f64..0.5) {
        let prior = founder_prior(&[LocusModel::new("a", f1), LocusModel::new("b", f2)]);
        prop_assert!((prior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for m in Genotype::all() {
            for f in Genotype::all() {
                let s: f64 = Genotype::all().map(|c| transmission_prob(c, m, f)).sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn auc_ignores_monotone_transforms(
        scores in prop::collection::vec(-5.0f64..5.0, 2..200),
        bits in prop::collection::vec(any::<bool>(), 200),
        k in 0.1f64..4.0,
    ) {
        let ys: Vec<f64> = scores.iter().zip(&bits).map(|(_, &b)| f64::from(u8::from(b))).collect();
        let base = auc(&scores, &ys, None);
        let mapped: Vec<f64> = scores.iter().map(|s| (k * s).tanh() * 3.0 + s.powi(3)).collect();
        prop_assert_eq!(base, auc(&mapped, &ys, None));
    }

    #[test]
    fn standardize_is_seed_independent_under_capacity(seed in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        let p = family(seed, &small_config(), &PenetranceModel::default_synthetic());
        let r = ReferenceStructure::default_simulation();
        prop_assert_eq!(standardize(&p, &r, a).x, standardize(&p, &r, b).x);
    }

    #[test]
    fn extras_append_without_touching_slots(x in prop::collection::vec(0.0f64..1.0, 1..50), e in prop::collection::vec(0.0f64..1.0, 0..5)) {
        let y = append_extras(&x, &e);
        prop_assert_eq!(y.len(), x.len() + e.len());
        prop_assert_eq!(&y[..x.len()], &x[..]);
    }
}
