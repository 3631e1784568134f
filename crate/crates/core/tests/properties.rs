use glhf::diagnostics::{build_ledger, check_energy_identity};
use glhf::dump::{decode, encode};
use glhf::probes::{scaled_energy_of_series, singular_scan_series, DensitySeries, ParabolicCylinder};
use glhf::solver::penalty_substep;
use glhf::{run, Accumulators, CorotationalField, RadialGrid, Scheme, SchemeParams, StepperConfig, Trajectory};
use proptest::prelude::*;

const N: usize = 32;

/// `|u0| = scale`, angle `A r (1-r)^2 + B r^2 (1-r)`, fixed at both ends.
fn datum(grid: &RadialGrid, a: f64, b: f64, scale: f64) -> CorotationalField {
    let h = |r: f64| a * r * (1.0 - r).powi(2) + b * r * r * (1.0 - r);
    let g = (0..grid.nodes()).map(|i| scale * h(grid.r(i)).sin()).collect();
    let z = (0..grid.nodes()).map(|i| scale * h(grid.r(i)).cos()).collect();
    CorotationalField::new(0.0, g, z).unwrap()
}

fn solve_dt(f: &CorotationalField, lambda: f64, dt: f64, scheme: Scheme, stride: usize) -> Trajectory {
    let grid = RadialGrid::new(f.nodes() - 1, 3).unwrap();
    let p = SchemeParams::new(lambda, 0.01, 3).unwrap();
    run(&p, &grid, &StepperConfig::new(dt, scheme, stride), f).unwrap()
}

fn solve(f: &CorotationalField, lambda: f64, scheme: Scheme, stride: usize) -> Trajectory {
    solve_dt(f, lambda, 1e-3, scheme, stride)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn modulus_stays_bounded(a in -8.0..8.0f64, b in -8.0..8.0f64, scale in 0.3..1.0f64,
                             log_lambda in 1.0..12.0f64) {
        let grid = RadialGrid::new(N, 3).unwrap();
        let f = datum(&grid, a, b, scale);
        let traj = solve(&f, log_lambda.exp(), Scheme::Strang, 1);
        prop_assert!(traj.max_modulus_sq().unwrap() <= 1.0 + 1e-10);
        for s in traj.slices() {
            prop_assert!(s.max_modulus_sq() <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn runs_are_bit_reproducible(a in -8.0..8.0f64, b in -8.0..8.0f64, log_lambda in 1.0..12.0f64) {
        let grid = RadialGrid::new(N, 3).unwrap();
        let f = datum(&grid, a, b, 1.0);
        let x = solve(&f, log_lambda.exp(), Scheme::Strang, 3);
        let y = solve(&f, log_lambda.exp(), Scheme::Strang, 3);
        prop_assert_eq!(encode(&x), encode(&y));
    }

    #[test]
    fn penalty_keeps_nodal_direction(gz in proptest::collection::vec((-1.5..1.5f64, -1.5..1.5f64), N + 1),
                                     t in 0.0..10.0f64, dt in 1e-6..1e-2f64) {
        let mut g: Vec<f64> = gz.iter().map(|p| p.0).collect();
        g[0] = 0.0;
        let z: Vec<f64> = gz.iter().map(|p| p.1).collect();
        let f = CorotationalField::new(t, g, z).unwrap();
        let p = SchemeParams::new(1e4, 10.0, 3).unwrap();
        let out = penalty_substep(&f, dt, &p, 1e-12).unwrap();
        for i in 0..f.nodes() {
            let (r0, r1) = (f.modulus_sq(i).sqrt(), out.modulus_sq(i).sqrt());
            if r0 > 1e-150 {
                prop_assert!((f.g[i] / r0 - out.g[i] / r1).abs() <= 1e-12);
                prop_assert!((f.zeta[i] / r0 - out.zeta[i] / r1).abs() <= 1e-12);
            }
        }
    }

    /// Checkpoints end on a heat half-step, so the property is checked for `dt * lambda <= 1`.
    #[test]
    fn energy_is_nonincreasing(a in -8.0..8.0f64, b in -8.0..8.0f64, log_lambda in 1.0..11.5f64) {
        let grid = RadialGrid::new(N, 3).unwrap();
        let traj = solve_dt(&datum(&grid, a, b, 1.0), log_lambda.exp(), 1e-5, Scheme::Strang, 10);
        let ledger = build_ledger(&traj).unwrap();
        prop_assert!(ledger.worst_energy_increase() <= 1e-6);
    }

    #[test]
    fn dump_round_trip_is_bit_exact(bits in proptest::collection::vec(any::<u64>(), 2 * (N + 1)),
                                    t1 in 1e-6..1.0f64) {
        let grid = RadialGrid::new(N, 3).unwrap();
        let vals: Vec<f64> = bits
            .iter()
            .map(|b| f64::from_bits(*b))
            .map(|v| if v.is_finite() { v } else { 0.5 })
            .collect();
        let mut g = vals[..N + 1].to_vec();
        g[0] = 0.0;
        let z = vals[N + 1..].to_vec();
        let s0 = CorotationalField::new(0.0, vec![0.0; N + 1], vec![1.0; N + 1]).unwrap();
        let s1 = CorotationalField::new(t1, g, z).unwrap();
        let p = SchemeParams::new(10.0, t1, 3).unwrap();
        let acc = Accumulators { kinetic: vals[1], chi_dissipation: vals[2], penalty_integral: vals[3] };
        let traj = Trajectory::from_slices(p, grid, t1, 1, vec![s0, s1], None, acc).unwrap();
        let bytes = encode(&traj);
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(encode(&back), bytes);
        for (x, y) in traj.slices().iter().zip(back.slices()) {
            for (p, q) in x.g.iter().chain(&x.zeta).zip(y.g.iter().chain(&y.zeta)) {
                prop_assert_eq!(p.to_bits(), q.to_bits());
            }
        }
    }

    #[test]
    fn scaled_energy_is_linear(c in 0.0..100.0f64, k in 0.0..4.0f64, rho0 in 0.0..0.5f64) {
        let grid = RadialGrid::new(64, 3).unwrap();
        let times: Vec<f64> = (0..=400).map(|j| j as f64 * 2.5e-4).collect();
        let base: Vec<Vec<f64>> = times
            .iter()
            .map(|t| (0..grid.nodes()).map(|i| (1.0 + t) * grid.r(i).powf(k)).collect())
            .collect();
        let scaled: Vec<Vec<f64>> = base.iter().map(|v| v.iter().map(|x| c * x).collect()).collect();
        let cyl = ParabolicCylinder::new(0.09, rho0, 0.1).unwrap();
        let e1 = scaled_energy_of_series(&grid, &DensitySeries::new(times.clone(), base, &grid).unwrap(), &cyl).unwrap();
        let ec = scaled_energy_of_series(&grid, &DensitySeries::new(times, scaled, &grid).unwrap(), &cyl).unwrap();
        prop_assert!(e1 > 0.0);
        prop_assert!((ec - c * e1).abs() <= 1e-12 * (c * e1).max(1e-300));
    }

    #[test]
    fn flagged_set_shrinks_as_eps0_grows(amp in proptest::collection::vec(0.0..50.0f64, 3),
                                         e1 in 0.01..10.0f64, factor in 1.0..10.0f64) {
        let grid = RadialGrid::new(64, 3).unwrap();
        let times: Vec<f64> = (0..=400).map(|j| j as f64 * 2.5e-4).collect();
        let values: Vec<Vec<f64>> = times
            .iter()
            .map(|t| {
                (0..grid.nodes())
                    .map(|i| {
                        let r = grid.r(i);
                        amp[0] / (r * r + 0.01) + amp[1] * (10.0 * t).sin().abs() + amp[2] * r
                    })
                    .collect()
            })
            .collect();
        let series = DensitySeries::new(times, values, &grid).unwrap();
        let centers: Vec<(f64, f64)> = [0.03, 0.05, 0.07]
            .iter()
            .flat_map(|&t| [0.0, 0.2, 0.5].map(|r| (t, r)))
            .collect();
        let ladder = [0.15, 0.1, 0.0625];
        let low = singular_scan_series(&grid, &series, e1, &ladder, &centers).unwrap();
        let high = singular_scan_series(&grid, &series, e1 * factor, &ladder, &centers).unwrap();
        for (h, l) in high.flagged.iter().zip(&low.flagged) {
            prop_assert!(!*h || *l);
        }
        for (h, l) in high.box_counts.iter().zip(&low.box_counts) {
            prop_assert!(h <= l);
        }
    }
}

fn l2_distance(grid: &RadialGrid, a: &CorotationalField, b: &CorotationalField) -> f64 {
    let d: Vec<f64> = (0..grid.nodes())
        .map(|i| (a.g[i] - b.g[i]).powi(2) + (a.zeta[i] - b.zeta[i]).powi(2))
        .collect();
    grid.integrate(&d).sqrt()
}

#[test]
fn smooth_data_converge_at_first_order_in_dt() {
    let grid = RadialGrid::new(128, 3).unwrap();
    let f = datum(&grid, 3.0, 1.0, 1.0);
    let p = SchemeParams::new(1e3, 0.05, 3).unwrap();
    let finals: Vec<CorotationalField> = [1e-3, 5e-4, 2.5e-4, 1.25e-4]
        .iter()
        .map(|&dt| run(&p, &grid, &StepperConfig::new(dt, Scheme::Strang, 1000), &f).unwrap().last().clone())
        .collect();
    let diffs: Vec<f64> = finals.windows(2).map(|w| l2_distance(&grid, &w[0], &w[1])).collect();
    assert!(diffs[0] / diffs[1] >= 1.8, "{diffs:?}");
    assert!(diffs[1] / diffs[2] >= 1.8, "{diffs:?}");
}

#[test]
fn energy_identity_converges_for_compatible_data() {
    let grid = RadialGrid::new(128, 3).unwrap();
    let h = |r: f64| 3.0 * r * (1.0 - r).powi(3);
    let g = (0..grid.nodes()).map(|i| h(grid.r(i)).sin()).collect();
    let z = (0..grid.nodes()).map(|i| h(grid.r(i)).cos()).collect();
    let f = CorotationalField::new(0.0, g, z).unwrap();
    let p = SchemeParams::new(1e4, 0.05, 3).unwrap();
    let res: Vec<f64> = [1e-4, 5e-5, 2.5e-5]
        .iter()
        .map(|&dt| {
            let traj = run(&p, &grid, &StepperConfig::new(dt, Scheme::Strang, 100), &f).unwrap();
            let ledger = build_ledger(&traj).unwrap();
            check_energy_identity(&ledger, 0.0, 0.05).unwrap().abs()
        })
        .collect();
    assert!(res[0] / res[1] >= 1.8 && res[1] / res[2] >= 1.8, "{res:?}");
}
