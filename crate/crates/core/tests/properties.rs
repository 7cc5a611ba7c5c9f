use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rssi_doa::angle::{circ_diff, wrap_deg};
use rssi_doa::detection::{detection_prob_threshold, detection_prob_total, simulate_batch, SourceState};
use rssi_doa::estimator::{estimate_ml, Estimator, Method};
use rssi_doa::field_data::{binomial_interval, read_rssi_log, write_rssi_log, RssiLog, RssiRecord};
use rssi_doa::likelihood::{
    argmin_grid, eval_grid, nll_full, nll_simplified, profile_rows, scan_min, CostKind, GainTable, Grids,
    LikelihoodGrid, ObsSummary,
};
use rssi_doa::patterns::synth_pattern;
use rssi_doa::sim_harness::default_array;
use rssi_doa::tracker::systematic_counts;

fn scenario(
    seed: u64,
    psi_deg: f64,
    alpha: f64,
    gamma: f64,
    pc: f64,
    batch: usize,
) -> (rssi_doa::ArrayConfig64, Vec<rssi_doa::Observation64>) {
    let array = default_array(2.0, gamma, pc).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = SourceState::from_degrees(psi_deg, alpha).unwrap();
    let obs = simulate_batch(&truth, &array, batch, &mut rng).unwrap();
    (array, obs)
}

fn coarse_grids() -> Grids<f64> {
    Grids::uniform(72, -100.0, 0.0, 0.5).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn full_and_simplified_differ_by_a_constant(
        seed in any::<u64>(),
        psi in -180.0..180.0f64,
        alpha in -90.0..-60.0f64,
        gamma in -95.0..-75.0f64,
        pc in 0.5..1.0f64,
        states in proptest::collection::vec((0.0..std::f64::consts::TAU, -100.0..0.0f64), 2..20),
    ) {
        let (array, obs) = scenario(seed, psi, alpha, gamma, pc, 3);
        let diffs: Vec<f64> = states
            .iter()
            .map(|&(p, a)| {
                let s = SourceState::new(p, a).unwrap();
                nll_full(&obs, &array, &s).unwrap() - nll_simplified(&obs, &array, &s).unwrap()
            })
            .collect();
        for d in &diffs {
            prop_assert!((d - diffs[0]).abs() <= 1e-9);
        }
    }

    #[test]
    fn pruned_argmin_matches_full_scan(
        seed in any::<u64>(),
        psi in -180.0..180.0f64,
        alpha in -90.0..-60.0f64,
        gamma in -95.0..-70.0f64,
        pc in 0.5..1.0f64,
        batch in 1usize..5,
    ) {
        let (array, obs) = scenario(seed, psi, alpha, gamma, pc, batch);
        let grids = coarse_grids();
        let table = GainTable::new(&array, grids.psi()).unwrap();
        let summary = ObsSummary::new(&obs, &array).unwrap();
        for kind in [CostKind::Simplified, CostKind::Baseline] {
            let grid = eval_grid(&obs, &array, &grids, kind).unwrap();
            let full = scan_min(&grid);
            let fast = argmin_grid(&summary, &array, &table, &grids, kind).unwrap();
            prop_assert_eq!((fast.i, fast.j), (full.i, full.j));
            prop_assert_eq!(fast.cost, full.cost);
            let rows = profile_rows(&summary, &array, &table, &grids, kind).unwrap();
            for (i, r) in rows.iter().enumerate() {
                let row_min = grid.row(i).iter().cloned().fold(f64::INFINITY, f64::min);
                prop_assert_eq!(r.cost, row_min);
            }
        }
    }

    #[test]
    fn estimate_ignores_cost_offset(
        seed in any::<u64>(),
        psi in -180.0..180.0f64,
        offset in -1e3..1e3f64,
    ) {
        let (array, obs) = scenario(seed, psi, -75.0, -95.0, 1.0, 2);
        let grids = coarse_grids();
        let grid = eval_grid(&obs, &array, &grids, CostKind::Simplified).unwrap();
        let shifted: Vec<f64> = grid.costs().iter().map(|c| c + offset).collect();
        let moved = LikelihoodGrid::from_parts(&grids, shifted, CostKind::Simplified).unwrap();
        let (a, b) = (estimate_ml(&grid), estimate_ml(&moved));
        prop_assert_eq!((a.psi_index, a.alpha_index), (b.psi_index, b.alpha_index));
    }

    #[test]
    fn very_low_threshold_reduces_to_baseline(
        seed in any::<u64>(),
        psi in -180.0..180.0f64,
        alpha in -90.0..-60.0f64,
    ) {
        let (array, obs) = scenario(seed, psi, alpha, -1e6, 1.0, 2);
        let est = Estimator::new(array, coarse_grids()).unwrap();
        let p = est.estimate(&obs, Method::Proposed).unwrap();
        let b = est.estimate(&obs, Method::Baseline).unwrap();
        prop_assert_eq!((p.psi_index, p.alpha_index), (b.psi_index, b.alpha_index));
    }

    #[test]
    fn detection_probability_bounded_and_monotone(
        mu in -150.0..0.0f64,
        step in 0.0..10.0f64,
        gamma in -100.0..-50.0f64,
        sigma in 0.5..6.0f64,
        pc in 0.0..=1.0f64,
    ) {
        let p1 = detection_prob_total(pc, detection_prob_threshold(mu, gamma, sigma).unwrap()).unwrap();
        let p2 = detection_prob_total(pc, detection_prob_threshold(mu + step, gamma, sigma).unwrap()).unwrap();
        prop_assert!((0.0..=pc).contains(&p1));
        prop_assert!(p2 >= p1);
    }

    #[test]
    fn angles_wrap_into_range(x in -1e4..1e4f64, a in -50.0..50.0f64, b in -50.0..50.0f64) {
        let w = wrap_deg(x);
        prop_assert!(w > -180.0 && w <= 180.0);
        let d = circ_diff(a, b);
        prop_assert!(d > -std::f64::consts::PI - 1e-12 && d <= std::f64::consts::PI + 1e-12);
    }

    #[test]
    fn systematic_resampling_is_proportional(
        raw in proptest::collection::vec(0.0..1.0f64, 1..200),
        u in 0.0..1.0f64,
    ) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 1e-6);
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let counts = systematic_counts(&w, u);
        prop_assert_eq!(counts.iter().sum::<usize>(), w.len());
        let n = w.len() as f64;
        for (c, wi) in counts.iter().zip(&w) {
            prop_assert!((*c as f64 - n * wi).abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn binomial_interval_is_ordered(n in 1usize..200, p in 0.0..=1.0f64) {
        let (lo, hi) = binomial_interval(n, p, 0.95);
        prop_assert!(lo <= hi && hi <= n);
        let mean = n as f64 * p;
        prop_assert!(lo as f64 <= mean + 1.0 && hi as f64 >= mean - 1.0);
    }

    #[test]
    fn rotation_shifts_gain(theta in -10.0..10.0f64, psi in -10.0..10.0f64) {
        let p = synth_pattern(15.0, -10.0, -15.0, 7).unwrap();
        let r = p.rotate(theta).unwrap();
        prop_assert!((r.eval(psi).unwrap() - p.eval(psi - theta).unwrap()).abs() < 1e-9);
        let back = r.rotate(-theta).unwrap();
        for (a, b) in back.coeffs().iter().zip(p.coeffs()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn rssi_log_round_trips(
        rows in proptest::collection::vec((0.0..0.5f64, 0usize..4, 0usize..3, -95.0..-20.0f64), 0..50),
    ) {
        let mut t = 0.0;
        let records: Vec<RssiRecord> = rows
            .iter()
            .map(|&(dt, a, c, y)| {
                t += dt;
                RssiRecord { timestamp_s: t, antenna_id: format!("A{a}"), channel: [37, 38, 39][c], rssi_dbm: y }
            })
            .collect();
        let log = RssiLog::new(records).unwrap();
        let mut buf = Vec::new();
        write_rssi_log(&mut buf, &log).unwrap();
        prop_assert_eq!(read_rssi_log(buf.as_slice(), "mem").unwrap(), log);
    }
}
