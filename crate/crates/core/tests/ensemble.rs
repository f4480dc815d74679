use std::f64::consts::FRAC_PI_2;

use qring::config::Config;
use qring::ensemble::{run_trial, sweep, write_jsonl, FrequencyTable};

fn tiny() -> Config {
    let mut c = Config::default();
    c.model.n_apparatus = 4;
    c.grid.points = 64;
    c.evolve.dt = 1e-3;
    c.evolve.t_final = 0.5;
    c
}

fn csv(t: &FrequencyTable) -> Vec<u8> {
    let mut b = Vec::new();
    t.write_csv(&mut b).unwrap();
    b
}

#[test]
fn replay_is_exact() {
    let c = tiny();
    let a = run_trial(&c, Some(0.3), 42, 7).unwrap();
    let b = run_trial(&c, Some(0.3), 42, 7).unwrap();
    let (mut ja, mut jb) = (Vec::new(), Vec::new());
    write_jsonl(std::slice::from_ref(&a), &mut ja).unwrap();
    write_jsonl(&[b], &mut jb).unwrap();
    assert_eq!(ja, jb);
    let other = run_trial(&c, Some(0.3), 42, 8).unwrap();
    assert_ne!(other.draw, a.draw);
}

#[test]
fn mirrored_pipeline() {
    let c = tiny();
    let mut m = tiny();
    m.sweep.mirror_draws = true;
    for (alpha, index) in [(0.2, 0), (0.7, 1), (1.1, 2)] {
        let a = run_trial(&c, Some(alpha), 5, index).unwrap();
        let b = run_trial(&m, Some(FRAC_PI_2 - alpha), 5, index).unwrap();
        assert!(b.mirrored);
        assert_eq!(b.outcome.system_side, a.outcome.system_side.flipped());
        assert_eq!(b.outcome.meter_side, a.outcome.meter_side.flipped());
        assert!((a.outcome.meter_reading + b.outcome.meter_reading).abs() < 1e-8);
        let (pa, pb) = (
            a.outcome.system_mass_positive.unwrap(),
            b.outcome.system_mass_positive.unwrap(),
        );
        assert!((pa + pb - 1.0).abs() < 1e-8, "{pa} {pb}");
    }
}

#[test]
fn sweep_is_schedule_independent() {
    let c = tiny();
    let alphas = [0.0, 0.5, FRAC_PI_2];
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let three = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let a = one.install(|| sweep(&c, &alphas, 3, 9)).unwrap();
    let b = three.install(|| sweep(&c, &alphas, 3, 9)).unwrap();
    assert_eq!(csv(&a.table), csv(&b.table));
    assert_eq!(
        a.records,
        b.records
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.wall_time = a
                    .records
                    .iter()
                    .find(|x| x.alpha == r.alpha && x.trial_index == r.trial_index)
                    .unwrap()
                    .wall_time;
                r
            })
            .collect::<Vec<_>>()
    );
    for row in &a.table.rows {
        assert_eq!(row.trials, 3);
        assert_eq!(
            row.n_negative + row.n_positive + row.n_undecided + row.n_mismatch,
            3
        );
    }
    // Trial t sees the same apparatus for every alpha.
    assert_eq!(a.records[0].draw, a.records[3].draw);
}
