use std::sync::Arc;

use quasispec_core::perturb::BoxPartition;
use quasispec_core::*;

fn golden_flow() -> FlowParams {
    FlowParams::new(vec![1.0, (5f64.sqrt() - 1.0) / 2.0], vec![0.0, 0.0]).unwrap()
}

#[test]
fn rotation_coding_on_four_boxes_has_simple_fdp_both_ways() {
    let p = golden_flow();
    let part = BoxPartition::with_counts(p.clone(), vec![2, 2]).unwrap();
    let step = BoxStep::new(part, vec![0.0, 1.0, 2.0, 3.0], 0.25).unwrap();
    let it = itinerary_symbols(&step, &p, 10_000).unwrap();
    let seq = &it.sequence;
    assert!(seq.alphabet().len() <= 4);
    assert!(seq.check_fdp().pass);
    let ell = 3.0 * step.partition().ell_d();
    assert!(seq.check_simple_fdp(ell, seq.len()).unwrap().holds());
    assert!(seq.reverse().check_simple_fdp(ell, seq.len()).unwrap().holds());
    assert!(seq.falsify_eventual_periodicity(200).unwrap().is_falsified());
}

#[test]
fn rotation_coding_symbol_frequencies_follow_box_volumes() {
    let p = golden_flow();
    let part = BoxPartition::with_counts(p.clone(), vec![2, 2]).unwrap();
    let step = BoxStep::new(part, vec![0.0, 1.0, 2.0, 3.0], 0.25).unwrap();
    let it = itinerary_symbols(&step, &p, 20_000).unwrap();
    let mut counts = [0usize; 4];
    for &b in &it.boxes {
        counts[b] += 1;
    }
    for c in counts {
        let freq = c as f64 / it.boxes.len() as f64;
        assert!((freq - 0.25).abs() < 5e-3, "counts {counts:?}");
    }
}

#[test]
fn rational_frequency_gives_periodic_itinerary() {
    let p = FlowParams::new(vec![1.0, 0.0], vec![0.1, 0.3]).unwrap();
    let part = BoxPartition::with_counts(p.clone(), vec![4, 2]).unwrap();
    let mids: Vec<f64> = (0..part.box_count()).map(|i| i as f64).collect();
    let step = BoxStep::new(part, mids, 0.1).unwrap();
    let it = itinerary_symbols(&step, &p, 600).unwrap();
    match it.sequence.falsify_eventual_periodicity(50).unwrap() {
        PeriodicityVerdict::Consistent { period, .. } => assert_eq!(period, 4),
        v => panic!("expected a period, got {v:?}"),
    }
}

#[test]
fn itinerary_reproduces_the_sampled_potential() {
    let f = SamplingFunction::cosine_sum(2);
    let p = FlowParams::new(vec![1.0, 2f64.sqrt()], vec![0.23, 0.61]).unwrap();
    let part = build_partition(&f, &p, 0.8, 2).unwrap();
    let fepsn = build_fepsn(&f, &part, 0.8, 2).unwrap();
    let it = itinerary(&fepsn, &p, 5.0).unwrap();
    let cat = it.sequence.concatenate();
    let g = SamplingFunction::BoxStep(Arc::new(fepsn));
    let s0 = it.sequence.start_offset();
    let mut checked = 0;
    for i in 0..2000 {
        let x = s0 + cat.total_length() * (i as f64 + 0.5) / 2000.0;
        if cat.boundary_distance(x - s0) < 1e-9 {
            continue;
        }
        let direct = g.evaluate(&p.flow(x).unwrap());
        let via_pieces = cat.eval_absolute(x).unwrap();
        assert!((direct - via_pieces).abs() < 1e-12, "x = {x}");
        checked += 1;
    }
    assert!(checked > 1900);
}

#[test]
fn construction_pipeline_passes_every_check() {
    let f = SamplingFunction::cosine_sum(2);
    let p = FlowParams::new(vec![1.0, 2f64.sqrt()], vec![0.0, 0.0]).unwrap();
    let (f, adj) = ensure_aperiodic(&f, 2, 0.8).unwrap();
    assert!(adj.is_none());
    let part = build_partition(&f, &p, 0.8, 2).unwrap();
    assert!(part.delta() <= 0.5);
    let fepsn = build_fepsn(&f, &part, 0.8, 2).unwrap();
    let params = VerifyParams {
        symbols: 3000,
        max_period: 100,
        ..Default::default()
    };
    let report = verify_construction(&f, &fepsn, &p, 0.8, 2, &params).unwrap();
    for c in &report.checks {
        assert!(c.pass, "{} failed: {}", c.name, c.detail);
    }
}

#[test]
fn single_frequency_function_is_adjusted_before_construction() {
    let f = SamplingFunction::trig(vec![TrigTerm::cos(vec![1, 0], 1.0)]);
    let (g, adj) = ensure_aperiodic(&f, 2, 0.4).unwrap();
    let adj = adj.expect("rank one support needs a second frequency");
    assert_eq!(adj.rank_before, 1);
    assert_eq!(adj.rank_after, 2);
    assert!(sup_distance(&f, &g, 2, 64).unwrap() <= 0.4 / 16.0 + 1e-12);
}

#[test]
fn mollified_box_step_converges_in_mean_and_stays_near_f() {
    let f = SamplingFunction::cosine_sum(2);
    let p = FlowParams::new(vec![1.0, 2f64.sqrt()], vec![0.0, 0.0]).unwrap();
    let part = build_partition(&f, &p, 0.8, 2).unwrap();
    let g = SamplingFunction::BoxStep(Arc::new(build_fepsn(&f, &part, 0.8, 2).unwrap()));
    let coarse = g.mollify(0.2, 16).unwrap();
    let fine = g.mollify(0.05, 16).unwrap();
    let l1_coarse = l1_distance(&coarse, &g, 2, 48).unwrap();
    let l1_fine = l1_distance(&fine, &g, 2, 48).unwrap();
    assert!(l1_fine < l1_coarse, "{l1_fine} vs {l1_coarse}");
    assert!(sup_distance(&fine, &f, 2, 48).unwrap() < 0.8);
    let c = SamplingFunction::constant(1.5).mollify(0.05, 8).unwrap();
    assert!((c.eval_coords(&[0.3, 0.4]) - 1.5).abs() < 1e-10);
}

#[test]
fn partition_export_lists_every_box() {
    let p = golden_flow();
    let part = BoxPartition::with_counts(p, vec![2, 3]).unwrap();
    let step = BoxStep::new(part, (0..6).map(|i| i as f64).collect(), 0.1).unwrap();
    let export = step.export();
    assert_eq!(export.boxes.len(), 6);
    assert_eq!(export.counts, vec![2, 3]);
    for (i, b) in export.boxes.iter().enumerate() {
        assert_eq!(b.mid, i as f64);
        assert_eq!(b.gamma, step.partition().gamma(i));
    }
}
