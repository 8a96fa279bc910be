mod common;

use acam::arch_model::ArchConfig;
use acam::device_model::{default_luts, ArchKind, TechParams};
use acam::forest_compiler::synth::{random_forest, random_queries, RandomForestSpec};
use acam::forest_compiler::{measured_mismatch_stats, CompiledForest, Dataset, ForestModel};
use acam::inference::{evaluate_dataset, EvalConfig, Evaluator};
use acam::matchline::{row_match_ideal, DischargeScratch};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn iris() -> (CompiledForest, Dataset) {
    let tech = TechParams::default();
    let m = ForestModel::load(&data_dir("iris").join("model.json")).unwrap();
    let c = CompiledForest::compile(&m, &tech, 64).unwrap();
    (c, Dataset::load(&data_dir("iris").join("test.csv")).unwrap())
}

#[test]
fn ideal_mode_agrees_with_traversal() {
    let (c, test) = iris();
    let r = evaluate_dataset(&c, &test, &EvalConfig::ideal(TechParams::default()))
        .unwrap()
        .report;
    assert_eq!(r.agreement_with_software, Some(1.0));

    let spec = RandomForestSpec::default();
    for seed in 0..5 {
        let m = random_forest(&spec, seed);
        let c = CompiledForest::compile(&m, &TechParams::default(), 4).unwrap();
        let q = random_queries(&m, 200, seed + 100);
        let r = evaluate_dataset(&c, &q, &EvalConfig::ideal(TechParams::default()))
            .unwrap()
            .report;
        assert_eq!(r.agreement_with_software, Some(1.0), "seed {seed}");
        assert_eq!(r.accuracy, Some(1.0));
    }
}

#[test]
fn ideal_lut_behavioral_equals_ideal_on_aligned_words() {
    let tech = TechParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let c = aligned_forest(&mut rng, &tech, 12, 3, 20, 5);
    let ideal = EvalConfig::ideal(tech.clone());
    let beh = EvalConfig::behavioral(default_luts(&tech, ArchKind::Ideal).unwrap(), tech.clone());
    let (ei, eb) = (Evaluator::new(&c, &ideal).unwrap(), Evaluator::new(&c, &beh).unwrap());
    let mut s = DischargeScratch::default();
    for i in 0..300 {
        let x = if i % 2 == 0 {
            midlevel_query(&mut rng, &tech, 12)
        } else {
            let k = rng.gen_range(0..c.words.len());
            query_near_word(&mut rng, &tech, &c.words[k])
        };
        let (qi, qb) = (ei.prepare(&x), eb.prepare(&x));
        for k in 0..c.words.len() {
            assert_eq!(ei.evaluate_word(k, &qi, &mut s), eb.evaluate_word(k, &qb, &mut s));
        }
        let o = eb.classify(&x, &mut s);
        assert_eq!(o.false_decisions, 0);
        assert_eq!(o.predicted, ei.classify(&x, &mut s).predicted);
    }
}

#[test]
fn tiles_and_whole_word_agree() {
    let tech = TechParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let base = aligned_forest(&mut rng, &tech, 10, 2, 10, 64);
    let cfg = EvalConfig::ideal(tech.clone());
    let mut s = DischargeScratch::default();
    for seg in 1..=12 {
        let c = base.with_segment(seg).unwrap();
        assert_eq!(c.tile_map[0].len(), 10usize.div_ceil(seg));
        let ev = Evaluator::new(&c, &cfg).unwrap();
        for _ in 0..100 {
            let k = rng.gen_range(0..c.words.len());
            let x = query_near_word(&mut rng, &tech, &c.words[k]);
            let q = ev.prepare(&x);
            for k in 0..c.words.len() {
                let whole = row_match_ideal(&c.words[k].intervals, &q.normalized);
                assert_eq!(ev.evaluate_word(k, &q, &mut s).is_match(), whole);
            }
        }
    }
}

#[test]
fn sequential_and_parallel_decisions_agree() {
    let tech = TechParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = aligned_forest(&mut rng, &tech, 9, 2, 15, 64);
    let need = c.max_inequalities();
    let salm = default_luts(&tech, ArchKind::Salm).unwrap();
    let mut s = DischargeScratch::default();
    for n_par in 1..=need {
        let n_seq = need.div_ceil(n_par);
        let arch = ArchConfig::new(n_seq, n_par, need).unwrap();
        for cfg in [
            EvalConfig::ideal(tech.clone()).with_arch(arch),
            EvalConfig::behavioral(salm.clone(), tech.clone()).with_arch(arch),
        ] {
            let ev = Evaluator::new(&c, &cfg).unwrap();
            for _ in 0..20 {
                let k = rng.gen_range(0..c.words.len());
                let q = ev.prepare(&query_near_word(&mut rng, &tech, &c.words[k]));
                for k in 0..c.words.len() {
                    let seq = ev.seq_evaluate_word(k, &q).unwrap();
                    assert_eq!(seq.decision, ev.evaluate_word(k, &q, &mut s));
                    assert!(seq.steps <= n_seq);
                    assert!(seq.energy <= (n_seq * n_par) as f64 * tech.e_cell * (1.0 + 1e-12));
                }
            }
        }
    }
}

#[test]
fn measured_energy_matches_stats_prediction() {
    let tech = TechParams::default();
    let (c, test) = iris();
    let stats = measured_mismatch_stats(&c, &test);
    let need = c.max_inequalities();
    for n_par in 1..=need {
        let arch = ArchConfig::new(need.div_ceil(n_par), n_par, need).unwrap();
        let r = evaluate_dataset(&c, &test, &EvalConfig::ideal(tech.clone()).with_arch(arch))
            .unwrap()
            .report;
        let measured = r.energy.unwrap().mean_j;
        let predicted = stats.predicted_energy_per_query(n_par, tech.e_cell);
        assert!(
            ((measured - predicted) / predicted).abs() < 1e-9,
            "n_par {n_par}: {measured} vs {predicted}"
        );
    }
}

#[test]
fn digits_behavioral_accuracy() {
    let tech = TechParams::default();
    let m = ForestModel::load(&data_dir("digits").join("model.json")).unwrap();
    let c = CompiledForest::compile(&m, &tech, 64).unwrap();
    let test = Dataset::load(&data_dir("digits").join("test.csv")).unwrap();
    let run = |kind| {
        let cfg = EvalConfig::behavioral(default_luts(&tech, kind).unwrap(), tech.clone());
        evaluate_dataset(&c, &test, &cfg).unwrap().report
    };
    let salm = run(ArchKind::Salm);
    let six = run(ArchKind::SixT2M);
    assert!(salm.agreement_with_software.unwrap() >= 0.99, "{salm:?}");
    assert!(six.accuracy.unwrap() <= salm.accuracy.unwrap());
}
