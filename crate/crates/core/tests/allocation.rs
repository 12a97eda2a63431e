use llc_lab::allocator::{
    baseline_equal, baseline_random, baseline_weighted, enumerate_allocations, exhaustive_best,
    memorai_decide, OracleEvaluator,
};
use llc_lab::nn::{init_model, relu_stack, Head};
use llc_lab::platform::{aggregate_compute, OracleParams};
use llc_lab::types::{GlobalContext, LlcAllocation, PlatformSpec, VbsContext};
use llc_lab::Error;

fn spec(n_llc: u32, n_vbs: u32) -> PlatformSpec {
    PlatformSpec {
        n_llc,
        n_vbs,
        core_sets: vec![2; n_vbs as usize],
        ..PlatformSpec::default()
    }
}

#[test]
fn random_baseline_is_uniform_on_two_allocations() {
    let space = enumerate_allocations(3, 2).unwrap();
    assert_eq!(space.len(), 2);
    let draws = 100_000u64;
    let first = (0..draws)
        .filter(|&s| baseline_random(&space, s).ways() == [1, 2])
        .count();
    let freq = first as f64 / draws as f64;
    assert!((freq - 0.5).abs() < 0.01, "{freq}");
    assert_eq!(baseline_random(&space, 42), baseline_random(&space, 42));
}

#[test]
fn equal_partition_examples() {
    let e = baseline_equal(&spec(12, 5)).unwrap();
    assert_eq!((e.ways, e.unallocated), (vec![2; 5], 2));
    let e = baseline_equal(&spec(8, 5)).unwrap();
    assert_eq!((e.ways, e.unallocated), (vec![1; 5], 3));
    let e = baseline_equal(&spec(12, 4)).unwrap();
    assert_eq!((e.ways, e.unallocated), (vec![3; 4], 0));
    assert!(matches!(baseline_equal(&spec(4, 5)), Err(Error::Infeasible(_))));
}

#[test]
fn weighted_examples() {
    let ctx = |d: f64| VbsContext::from_link(d / 2.0, d / 2.0, 20.0).unwrap();
    let gc = GlobalContext::new(vec![ctx(1.0), ctx(0.5), ctx(0.5)]);
    assert_eq!(baseline_weighted(&gc, &spec(12, 3)).unwrap().ways, [6, 3, 3]);
    let gc = GlobalContext::new(vec![ctx(0.8); 5]);
    assert_eq!(baseline_weighted(&gc, &spec(12, 5)).unwrap().ways, [3, 3, 2, 2, 2]);
    let gc = GlobalContext::new(vec![ctx(1.0), ctx(0.0), ctx(0.0)]);
    assert_eq!(baseline_weighted(&gc, &spec(6, 3)).unwrap().ways, [4, 1, 1]);
    let gc = GlobalContext::new(vec![ctx(0.0); 5]);
    let out = baseline_weighted(&gc, &spec(12, 5)).unwrap();
    assert!(out.fell_back);
    assert_eq!(out.ways, [2; 5]);
}

#[test]
fn identical_contexts_choose_a_balanced_optimum() {
    let s = spec(12, 5);
    let p = OracleParams::default().noiseless();
    let space = enumerate_allocations(12, 5).unwrap();
    let ctx = VbsContext::from_link(0.3, 0.2, 18.0).unwrap();
    let gc = GlobalContext::new(vec![ctx; 5]);
    let best = exhaustive_best(&gc, &s, &space, &OracleEvaluator::new(&p)).unwrap();
    let (lo, hi) = (best.allocation.ways().iter().min(), best.allocation.ways().iter().max());
    assert!(hi.unwrap() - lo.unwrap() <= 1, "{}", best.allocation);
    for a in space.allocations() {
        assert!(best.total_cpu <= aggregate_compute(&gc, a, &s, &p, None).unwrap());
    }
}

#[test]
fn single_vbs_gets_every_way() {
    let s = spec(12, 1);
    let space = enumerate_allocations(12, 1).unwrap();
    let gc = GlobalContext::new(vec![VbsContext::from_link(0.3, 0.9, 5.0).unwrap()]);
    let best = exhaustive_best(&gc, &s, &space, &OracleEvaluator::new(&OracleParams::default())).unwrap();
    assert_eq!(best.allocation.ways(), [12]);
}

#[test]
fn classifier_decisions_are_feasible_and_pure() {
    let s = spec(8, 5);
    let space = enumerate_allocations(8, 5).unwrap();
    let clf = init_model(&relu_stack(&[30, 16, 35], 0.2), Head::Classification { classes: 35 }, 3).unwrap();
    for d in 0..10 {
        let ctx = VbsContext::from_link(0.1 * f64::from(d), 0.05 * f64::from(d), 3.0 * f64::from(d)).unwrap();
        let gc = GlobalContext::new(vec![ctx; 5]);
        let a = memorai_decide(&gc, &s, &clf, &space).unwrap();
        assert!(LlcAllocation::new(a.ways().to_vec(), 8).is_ok());
        assert_eq!(a, memorai_decide(&gc, &s, &clf, &space).unwrap());
    }
    let wrong = init_model(&relu_stack(&[30, 16, 330], 0.0), Head::Classification { classes: 330 }, 3).unwrap();
    let gc = GlobalContext::new(vec![VbsContext::from_link(0.5, 0.5, 10.0).unwrap(); 5]);
    assert!(matches!(memorai_decide(&gc, &s, &wrong, &space), Err(Error::ModelSpaceMismatch(_))));
}
