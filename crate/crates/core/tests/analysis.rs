use chainlab::adversary::{NasLimits, PrivateNas, RevealPolicy};
use chainlab::analyzer::{
    chain_growth, chain_quality, check_common_prefix, detect_convergence_delay, detect_convergence_zero_delay,
    fork_cdf, window_stats,
};
use chainlab::simnet::continuous::{run_continuous, ContinuousAttack, ContinuousConfig, ContinuousReveal, TreeRoots};
use chainlab::simnet::{run, HonestRule, NullAdversary, SimConfig};
use chainlab::Truncation;

fn honest_only(seed: u64, horizon: u64) -> SimConfig {
    SimConfig { horizon_slots: horizon, seed, ..Default::default() }
}

#[test]
fn null_adversary_keeps_common_prefix() {
    for seed in 0..5 {
        let cfg = SimConfig { honest_nodes: 4, delay_slots: 3, ..honest_only(seed, 1500) };
        let tr = run(&cfg, &mut NullAdversary).unwrap();
        assert!(check_common_prefix(&tr, Truncation::Finite(10)).is_empty());
    }
}

#[test]
fn infinite_kappa_never_violates() {
    let cfg = SimConfig { beta: 0.45, honest_rule: HonestRule::LongestChain, ..honest_only(3, 1500) };
    let mut adv = PrivateNas::new(1, NasLimits::default(), RevealPolicy::WhenLonger);
    let tr = run(&cfg, &mut adv).unwrap();
    // Above threshold the reveals do reorganise, so a finite kappa trips.
    assert!(!check_common_prefix(&tr, Truncation::Finite(1)).is_empty());
    assert!(check_common_prefix(&tr, Truncation::Infinite).is_empty());
}

#[test]
fn no_adversary_means_perfect_quality() {
    let tr = run(&honest_only(1, 2000), &mut NullAdversary).unwrap();
    assert_eq!(chain_quality(&tr, 20).unwrap(), 1.0);
    assert!(chain_quality(&tr, 0).is_err());
}

#[test]
fn chain_growth_matches_honest_rate() {
    let (f, beta, horizon) = (0.1, 0.2, 5000u64);
    let cfg = SimConfig { beta, f_delta: f, ..honest_only(11, horizon) };
    let tr = run(&cfg, &mut NullAdversary).unwrap();
    let span = horizon - tr.first_slot;
    let growth = chain_growth(&tr, span).unwrap();
    let p = f * (1.0 - beta);
    let sd = (p * (1.0 - p) / span as f64).sqrt();
    assert!((growth - p).abs() < 3.0 * sd, "growth {growth} vs {p} (sd {sd})");
    assert!(chain_growth(&tr, span + 1).is_err());
}

#[test]
fn window_stats_without_adversary() {
    let tr = run(&honest_only(5, 1000), &mut NullAdversary).unwrap();
    let w = window_stats(&tr, 1, 1000, true).unwrap();
    let honest_slots: std::collections::BTreeSet<u64> = tr.honest_arrivals.iter().map(|a| a.0).collect();
    assert_eq!(w.x_count, honest_slots.len() as u64);
    assert!(w.y_count <= w.x_count);
    assert_eq!(w.v_count, 0);
    assert!(window_stats(&tr, 0, 10, true).is_err());
    assert!(window_stats(&tr, 10, 2000, true).is_err());
}

#[test]
fn v_is_nonincreasing_in_window_start() {
    // Above threshold the adversary keeps winning, so its later forks start
    // inside the windows rather than at genesis.
    let cfg = SimConfig { beta: 0.45, ..honest_only(8, 1200) };
    let mut adv = PrivateNas::new(1, NasLimits::default(), RevealPolicy::WhenLonger);
    let tr = run(&cfg, &mut adv).unwrap();
    let mut seen = 0;
    for full in [true, false] {
        for end in [300u64, 800, 1200] {
            let vs: Vec<u64> = (1..=end).step_by(7).map(|s| window_stats(&tr, s, end, full).unwrap().v_count).collect();
            assert!(vs.windows(2).all(|w| w[0] >= w[1]), "end {end}: {vs:?}");
            seen += vs[0];
        }
    }
    assert!(seen > 0);
}

#[test]
fn every_block_converges_without_adversary() {
    let cfg = ContinuousConfig {
        lambda_a: 0.0,
        lambda_h: 1.0,
        horizon: 200.0,
        seed: 4,
        attack: ContinuousAttack::PrivateNas {
            roots: TreeRoots::EveryHonest,
            cap: Some(100),
            reveal: ContinuousReveal::WhenAtLeastAsLong,
            retire_deficit: Some(10),
        },
        ..Default::default()
    };
    let tr = run_continuous(&cfg).unwrap();
    let r = detect_convergence_zero_delay(&tr, 10.0).unwrap();
    assert!(r.eligible > 150);
    assert_eq!(r.events.len(), r.eligible);
    assert_eq!(r.empirical_frequency, 1.0);
    assert!(r.horizon_caveat);
    assert!(r.regen_failures.is_empty());
}

#[test]
fn detected_events_stay_in_the_chain_with_delay() {
    for seed in 0..4 {
        let cfg = ContinuousConfig {
            lambda_a: 0.15,
            lambda_h: 0.85,
            horizon: 400.0,
            delta: 0.3,
            seed,
            attack: ContinuousAttack::PrivateNas {
                roots: TreeRoots::EveryHonest,
                cap: Some(300),
                reveal: ContinuousReveal::WhenAtLeastAsLong,
                retire_deficit: Some(30),
            },
            ..Default::default()
        };
        let tr = run_continuous(&cfg).unwrap();
        let r = detect_convergence_delay(&tr, 10.0 / 0.85).unwrap();
        assert!(!r.events.is_empty());
        assert!(r.regen_failures.is_empty(), "seed {seed}: {:?}", r.regen_failures);
    }
}

#[test]
fn convergence_needs_per_block_trees() {
    let cfg = ContinuousConfig {
        attack: ContinuousAttack::PrivateNas {
            roots: TreeRoots::Genesis,
            cap: None,
            reveal: ContinuousReveal::Never,
            retire_deficit: None,
        },
        horizon: 50.0,
        ..Default::default()
    };
    let tr = run_continuous(&cfg).unwrap();
    assert!(detect_convergence_zero_delay(&tr, 1.0).is_err());
}

#[test]
fn fork_cdf_is_a_cdf() {
    let cdf = fork_cdf(&[3, 1, 3, 7, 0]);
    assert_eq!(cdf.iter().map(|c| c.0).collect::<Vec<_>>(), vec![0, 1, 3, 7]);
    assert!(cdf.windows(2).all(|w| w[0].1 < w[1].1));
    assert!((cdf[2].1 - 0.8).abs() < 1e-12);
    assert_eq!(cdf.last().unwrap().1, 1.0);
}

#[test]
fn same_seed_same_trace() {
    let cfg = SimConfig { beta: 0.25, honest_nodes: 3, delay_slots: 2, ..honest_only(21, 800) };
    let mut a = PrivateNas::new(2, NasLimits::default(), RevealPolicy::WhenLonger);
    let mut b = PrivateNas::new(2, NasLimits::default(), RevealPolicy::WhenLonger);
    let (x, y) = (run(&cfg, &mut a).unwrap(), run(&cfg, &mut b).unwrap());
    assert_eq!(x.final_tree.blocks(), y.final_tree.blocks());
    assert_eq!(x.honest_arrivals, y.honest_arrivals);
}
