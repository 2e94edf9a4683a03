use enpgf::abm;
use enpgf::scenario;

#[test]
fn trapped_location_has_below_average_share() {
    let cfg = scenario::abm_reference();
    for seed in 0..3 {
        let totals = abm::simulate_abm(&cfg, 39_964, seed).unwrap().node_totals();
        let total: u64 = totals.iter().sum();
        let share: Vec<f64> = totals.iter().map(|&c| c as f64 / total as f64).collect();
        let others = [0, 1, 4, 5].iter().map(|&i| share[i]).sum::<f64>() / 4.0;
        assert!(share[3] < others, "seed {seed}: shares {share:?}");
        assert!(totals.iter().all(|&c| c > 0), "seed {seed}: {totals:?}");
    }
}
