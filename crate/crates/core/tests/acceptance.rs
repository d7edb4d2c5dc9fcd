//! End-to-end acceptance checks. Runs without the libtest harness so every
//! check prints its PASS/FAIL line; the process fails if any check does.
//! Checks run one after another so the runtime limits are measured without
//! competing for cores.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;

use kawasaki::estimator::{estimate_correlations, estimate_pair_correlation, snapshots_at, sub_poisson_report, RadialBins};
use kawasaki::field::Grid;
use kawasaki::geometry::{Point, Torus};
use kawasaki::horizon::{contraction_factor, existence_horizon, find_t_for_q, op_norm_bound, NormVariant};
use kawasaki::kinetic::{monitor_bounds, picard_solve, solve_rk4, vlasov_first_order, KineticModel, SolverConfig};
use kawasaki::rng::stream;
use kawasaki::scaling::{run_sweep, SweepSpec};
use kawasaki::simulator::{
    detailed_balance_residual, simulate_ensemble, simulate_from, Configuration, Dynamics, EnsembleSpec, InitialDensity,
};
use kawasaki::{DensityField, KernelSpec, PotentialSpec};

fn report(id: u32, name: &str, pass: bool, elapsed: Duration, limit: Duration, detail: String) {
    let within = elapsed <= limit;
    let verdict = if pass && within { "PASS" } else { "FAIL" };
    println!(
        "acceptance {id:>2}/12 {name}: {verdict} ({detail}; {:.2} s of {} s)",
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(pass, "acceptance {id} {name} failed: {detail}");
    assert!(within, "acceptance {id} {name} exceeded its time limit");
}

fn bump(grid: Grid, base: f64, amplitude: f64, width: f64) -> DensityField {
    let torus = grid.torus;
    let center = [0.5 * torus.length; 3];
    DensityField::from_fn(grid, |p| {
        let r = torus.distance(p, &center);
        base + amplitude * (-r * r / (2.0 * width * width)).exp()
    })
    .unwrap()
}

fn particle_number_is_conserved() {
    let start = Instant::now();
    let torus = Torus::new(1, 50.0).unwrap();
    let dynamics = Dynamics::new(
        torus,
        KernelSpec::top_hat(1.0, 0.5, 1).unwrap(),
        PotentialSpec::top_hat(1.0, 2.0, 1).unwrap(),
        1.0,
    )
    .unwrap();
    let spec = EnsembleSpec {
        dynamics,
        initial: InitialDensity::Constant(1.0),
        snapshot_times: vec![],
        t_end: f64::MAX,
        max_proposals: Some(1000),
        n_trajectories: 1000,
        base_seed: 2024,
        stream_offset: 0,
        record_events: false,
    };
    let trajs = simulate_ensemble(&spec).unwrap();
    let conserved = trajs.iter().all(|t| t.final_positions.len() == t.initial_count);
    let full = trajs.iter().filter(|t| t.initial_count > 0).all(|t| t.proposals == 1000);
    let accepted: u64 = trajs.iter().map(|t| t.accepted).sum();
    report(
        1,
        "particle conservation",
        conserved && full && trajs.len() == 1000,
        start.elapsed(),
        Duration::from_secs(30),
        format!("{} trajectories x 1000 events, {accepted} accepted moves", trajs.len()),
    );
}

fn detailed_balance_holds() {
    let start = Instant::now();
    let mut rng = stream(7, 0);
    let potentials = [
        PotentialSpec::top_hat(1.0, 1.5, 1).unwrap(),
        PotentialSpec::gaussian(0.4, 2.0, 2).unwrap(),
        PotentialSpec::exponential(3.0, 1.0, 3).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for trial in 0..10_000 {
        let phi = &potentials[trial % 3];
        let dim = phi.dim();
        let torus = Torus::new(dim, 4.0 * phi.effective_radius() + 2.0).unwrap();
        let n = rng.random_range(1..=50);
        let point = |rng: &mut kawasaki::rng::StreamRng| {
            let mut p = [0.0; 3];
            for x in p.iter_mut().take(dim) {
                *x = torus.length * rng.random::<f64>();
            }
            p
        };
        let positions: Vec<Point> = (0..n).map(|_| point(&mut rng)).collect();
        let config = Configuration::new(torus, positions, phi.effective_radius()).unwrap();
        let x = rng.random_range(0..n);
        let y = point(&mut rng);
        worst = worst.max(detailed_balance_residual(&config, x, &y, phi).abs());
    }
    report(
        2,
        "detailed balance",
        worst <= 1e-10,
        start.elapsed(),
        Duration::from_secs(10),
        format!("max residual {worst:.2e} over 10^4 draws"),
    );
}

fn kinetic_mass_and_stationarity() {
    let start = Instant::now();
    let grid = Grid::new(Torus::new(1, 20.0).unwrap(), 256).unwrap();
    let model = KineticModel::new(
        KernelSpec::top_hat(1.0, 1.0, 1).unwrap(),
        PotentialSpec::top_hat(1.0, 1.0, 1).unwrap(),
        grid,
    )
    .unwrap();
    let config = SolverConfig::rk4(1e-3, 5.0);
    let rho0 = bump(grid, 0.3, 1.0, 1.5);
    let traj = solve_rk4(&model, &rho0, &config, 100).unwrap();
    let m0 = traj.mass(0);
    let drift = (0..traj.times.len()).map(|i| (traj.mass(i) - m0).abs() / m0).fold(0.0, f64::max);
    let flat = solve_rk4(&model, &DensityField::constant(grid, 0.7).unwrap(), &config, 100).unwrap();
    let flat_drift = flat
        .values
        .iter()
        .flat_map(|v| v.iter().map(|x| (x - 0.7).abs()))
        .fold(0.0, f64::max);
    report(
        3,
        "kinetic mass conservation and stationarity",
        drift <= 1e-10 && flat_drift <= 1e-10,
        start.elapsed(),
        Duration::from_secs(10),
        format!("relative mass drift {drift:.2e}, constant drift {flat_drift:.2e}"),
    );
}

fn a_priori_bounds_hold() {
    let start = Instant::now();
    let mut rng = stream(44, 0);
    let mut violations = 0;
    let mut checked = 0;
    for case in 0..10 {
        let grid = Grid::new(Torus::new(1, 20.0).unwrap(), 128).unwrap();
        let height = 0.5 + 1.5 * rng.random::<f64>();
        let kernel = match case % 3 {
            0 => KernelSpec::top_hat(0.5 + rng.random::<f64>(), height, 1),
            1 => KernelSpec::gaussian(0.3 + 0.5 * rng.random::<f64>(), height, 1),
            _ => KernelSpec::exponential(4.0 + 2.0 * rng.random::<f64>(), height, 1),
        }
        .unwrap();
        let strength = 3.0 * rng.random::<f64>();
        let potential = match case % 4 {
            0 => PotentialSpec::local(strength, 1),
            1 => PotentialSpec::top_hat(0.5 + rng.random::<f64>(), strength, 1),
            2 => PotentialSpec::gaussian(0.3 + 0.5 * rng.random::<f64>(), strength, 1),
            _ => PotentialSpec::zero(1),
        }
        .unwrap();
        let model = KineticModel::new(kernel, potential, grid).unwrap();
        let rho0 = bump(grid, 0.2 * rng.random::<f64>(), 0.5 + rng.random::<f64>(), 0.5 + 2.0 * rng.random::<f64>());
        let dt = (0.1 / model.alpha()).min(1e-2);
        let t_end = 2.0 / model.alpha();
        let traj = solve_rk4(&model, &rho0, &SolverConfig::rk4(dt, t_end), 1).unwrap();
        let bounds = monitor_bounds(&traj, model.alpha(), model.is_local()).unwrap();
        violations += bounds.violations.len();
        checked += bounds.checks.len();
    }
    report(
        4,
        "growth, invariant-region and positivity monitors",
        violations == 0,
        start.elapsed(),
        Duration::from_secs(60),
        format!("{violations} violations over {checked} checked times in 10 runs"),
    );
}

fn picard_iteration_is_certified() {
    let start = Instant::now();
    let t = find_t_for_q(0.5, 1.0, 1.0, 1.0).unwrap();
    let q = contraction_factor(1.0, 1.0, 1.0, t).unwrap();
    let grid = Grid::new(Torus::new(1, 20.0).unwrap(), 128).unwrap();
    let model = KineticModel::new(
        KernelSpec::top_hat(0.5, 1.0, 1).unwrap(),
        PotentialSpec::top_hat(0.5, 1.0, 1).unwrap(),
        grid,
    )
    .unwrap();
    // Peak on the centre of cell 64, so sup rho0 = 1.
    let center = grid.cell_center(64);
    let rho0 = DensityField::from_fn(grid, |p| (-(p[0] - center[0]).powi(2) / 2.0).exp()).unwrap();
    let steps = 200.0;
    let config = SolverConfig::picard(t / steps, t, 1e-13, 100);
    let sol = picard_solve(&model, &rho0, &config).unwrap();
    let worst_ratio = sol.ratios.iter().copied().fold(0.0, f64::max);
    let rk4 = solve_rk4(&model, &rho0, &SolverConfig::rk4(t / steps, t), 1).unwrap();
    let gap = sol.trajectory.sup_distance(&rk4);
    report(
        5,
        "Picard certification",
        (q - 0.5).abs() <= 1e-10 && worst_ratio <= 0.55 && gap <= 1e-6,
        start.elapsed(),
        Duration::from_secs(60),
        format!(
            "T = {t:.6}, q(T) = {q:.10}, max ratio {worst_ratio:.3} over {} iterations, gap to RK4 {gap:.2e}",
            sol.deltas.len()
        ),
    );
}

fn chaos_propagation_identity() {
    let start = Instant::now();
    let grid = Grid::new(Torus::new(1, 20.0).unwrap(), 32).unwrap();
    let model = KineticModel::new(
        KernelSpec::top_hat(1.2, 0.7, 1).unwrap(),
        PotentialSpec::gaussian(0.8, 1.5, 1).unwrap(),
        grid,
    )
    .unwrap();
    let mut rng = stream(6, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rho: Vec<f64> = (0..32).map(|_| 3.0 * rng.random::<f64>()).collect();
        let a = vlasov_first_order(&model, &rho);
        let b = model.rhs(&rho);
        worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
    }
    report(
        6,
        "chaos-propagation identity",
        worst <= 1e-10,
        start.elapsed(),
        Duration::from_secs(5),
        format!("max difference {worst:.2e} over 100 fields"),
    );
}

fn horizon_formulas() {
    let start = Instant::now();
    let t = existence_horizon(0.0, -1.0, 1.0, 1.0).unwrap();
    let norm = op_norm_bound(0.0, -1.0, 1.0, 1.0, NormVariant::Delta).unwrap();
    let q = contraction_factor(1.0, 1.0, 1.0, 0.01).unwrap();
    let t_ok = (t - 0.032_996_1).abs() <= 1e-6;
    let norm_ok = norm == 2.0;
    let q_ok = (q - 0.171_439).abs() <= 1e-5;
    report(
        7,
        "horizon formulas",
        t_ok && norm_ok && q_ok,
        start.elapsed(),
        Duration::from_secs(1),
        format!(
            "T(-1) = {t:.9} (expected 0.0329961 +/- 1e-6: {}), norm bound = {norm} ({}), q(0.01) = {q:.7} ({})",
            if t_ok { "ok" } else { "off" },
            if norm_ok { "ok" } else { "off" },
            if q_ok { "ok" } else { "off" }
        ),
    );
}

fn free_case_is_mean_field_exact() {
    let start = Instant::now();
    let torus = Torus::new(1, 20.0).unwrap();
    let fine = Grid::new(torus, 256).unwrap();
    let coarse = Grid::new(torus, 10).unwrap();
    let kernel = KernelSpec::top_hat(1.0, 0.5, 1).unwrap();
    let potential = PotentialSpec::zero(1).unwrap();
    let rho0 = bump(fine, 0.5, 0.3, 2.0);
    let times = vec![0.5, 1.0];
    let dynamics = Dynamics::new(torus, kernel, potential, 1.0).unwrap();
    let spec = EnsembleSpec {
        dynamics,
        initial: InitialDensity::Field(rho0.clone()),
        snapshot_times: times.clone(),
        t_end: 1.0,
        max_proposals: None,
        n_trajectories: 2000,
        base_seed: 88,
        stream_offset: 0,
        record_events: false,
    };
    let trajs = simulate_ensemble(&spec).unwrap();
    let model = KineticModel::new(kernel, potential, fine).unwrap();
    let kinetic = solve_rk4(&model, &rho0, &SolverConfig::rk4(1e-3, 1.0), 500).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        let k = kinetic.times.iter().position(|s| (s - t).abs() < 1e-9).unwrap();
        let reference = kawasaki::scaling::block_average(&fine, &kinetic.values[k], &coarse);
        let est = kawasaki::estimator::estimate_density(&snapshots_at(&trajs, i).unwrap(), t, coarse).unwrap();
        let (mut sup, mut se) = (0.0, 0.0);
        for ((v, s), r) in est.values.iter().zip(&est.stderr).zip(&reference) {
            if (v - r).abs() > sup {
                sup = (v - r).abs();
                se = *s;
            }
        }
        pass &= sup <= 3.0 * se;
        detail.push(format!("t={t}: sup {sup:.4} vs 3se {:.4}", 3.0 * se));
    }
    report(
        8,
        "free-case mean-field exactness",
        pass,
        start.elapsed(),
        Duration::from_secs(300),
        detail.join(", "),
    );
}

fn scaling_ladder_converges() {
    let start = Instant::now();
    let grid = Grid::new(Torus::new(1, 20.0).unwrap(), 160).unwrap();
    let spec = SweepSpec {
        kernel: KernelSpec::top_hat(1.0, 2.0, 1).unwrap(),
        potential: PotentialSpec::top_hat(1.0, 2.0, 1).unwrap(),
        rho0: bump(grid, 0.5, 3.0, 1.5),
        epsilons: vec![1.0, 0.5, 0.25],
        times: vec![1.0],
        n_traj_base: 1_500_000,
        estimator_cells: 10,
        radial_bins: RadialBins::new(3.0, 6),
        dt: 1e-3,
        seed: 909,
        particle_budget: 1e4,
        exclude_mover: false,
    };
    let result = run_sweep(&spec).unwrap();
    let e1 = |eps: f64| result.rows.iter().find(|r| r.epsilon == eps).unwrap().clone();
    let (first, last) = (e1(1.0), e1(0.25));
    let ratio = first.e1 / last.e1;
    let rows: Vec<String> = result
        .rows
        .iter()
        .map(|r| format!("e1({}) = {:.4} +/- {:.4}", r.epsilon, r.e1, r.e1_stderr))
        .collect();
    report(
        9,
        "scaling convergence",
        result.monotone_within_noise && last.e1 < first.e1 / 1.5,
        start.elapsed(),
        Duration::from_secs(1200),
        format!("{}, e1(1)/e1(1/4) = {ratio:.2}", rows.join(", ")),
    );
}

fn rk4_is_fourth_order() {
    let start = Instant::now();
    let grid = Grid::new(Torus::new(1, 20.0).unwrap(), 128).unwrap();
    let model = KineticModel::new(
        KernelSpec::top_hat(1.0, 25.0, 1).unwrap(),
        PotentialSpec::top_hat(1.0, 0.5, 1).unwrap(),
        grid,
    )
    .unwrap();
    let rho0 = bump(grid, 0.2, 10.0, 0.5);
    let solve = |dt: f64| solve_rk4(&model, &rho0, &SolverConfig::rk4(dt, 0.05), usize::MAX).unwrap().last().to_vec();
    let [a, b, c] = [2e-3, 1e-3, 5e-4].map(solve);
    let diff = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    let (coarse, fine) = (diff(&a, &b), diff(&b, &c));
    let order = (coarse / fine).log2();
    report(
        10,
        "RK4 self-convergence",
        order >= 3.5,
        start.elapsed(),
        Duration::from_secs(30),
        format!("differences {coarse:.3e}, {fine:.3e}; observed order {order:.3}"),
    );
}

fn poisson_states_factorize() {
    let start = Instant::now();
    let torus = Torus::new(1, 20.0).unwrap();
    let grid = Grid::new(torus, 40).unwrap();
    let bins = RadialBins::new(3.0, 6);
    let kernel = KernelSpec::top_hat(1.0, 0.5, 1).unwrap();
    let spec = EnsembleSpec {
        dynamics: Dynamics::new(torus, kernel, PotentialSpec::zero(1).unwrap(), 1.0).unwrap(),
        initial: InitialDensity::Field(bump(grid, 0.5, 0.5, 2.5)),
        snapshot_times: vec![0.0, 1.0 / kernel.alpha()],
        t_end: 1.0 / kernel.alpha(),
        max_proposals: None,
        n_trajectories: 4000,
        base_seed: 31,
        stream_offset: 0,
        record_events: false,
    };
    let trajs = simulate_ensemble(&spec).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for (i, &t) in spec.snapshot_times.iter().enumerate() {
        let est = estimate_correlations(&snapshots_at(&trajs, i).unwrap(), t, grid, bins).unwrap();
        let r = sub_poisson_report(&est, 0.0).unwrap();
        pass &= r.factorizes_within(3.0);
        detail.push(format!("t={t}: residual {:.4}, max z {:.2}", r.factorization_residual, r.max_z));
    }
    report(
        11,
        "Poisson factorization",
        pass,
        start.elapsed(),
        Duration::from_secs(300),
        detail.join(", "),
    );
}

fn gibbs_state_is_stationary() {
    let start = Instant::now();
    let torus = Torus::new(1, 200.0).unwrap();
    let kernel = KernelSpec::top_hat(1.0, 0.5, 1).unwrap();
    let potential = PotentialSpec::top_hat(1.0, 2.0, 1).unwrap();
    let sampler = common::Metropolis {
        torus,
        potential,
        epsilon: 1.0,
        step: 1.0,
    };
    let n_traj = 300;
    let initials: Vec<Configuration> = (0..n_traj)
        .map(|i| sampler.sample(200, 200, &mut stream(1212, 1_000_000 + i as u64)))
        .collect();
    let t_end = 5.0 / kernel.alpha();
    let spec = EnsembleSpec {
        dynamics: Dynamics::new(torus, kernel, potential, 1.0).unwrap(),
        initial: InitialDensity::Constant(1.0),
        snapshot_times: vec![0.0, t_end],
        t_end,
        max_proposals: None,
        n_trajectories: n_traj,
        base_seed: 1212,
        stream_offset: 0,
        record_events: false,
    };
    let trajs = simulate_from(&spec, initials).unwrap();
    let bins = RadialBins::new(4.0, 16);
    let before = estimate_pair_correlation(&snapshots_at(&trajs, 0).unwrap(), 0.0, torus, bins).unwrap();
    let after = estimate_pair_correlation(&snapshots_at(&trajs, 1).unwrap(), t_end, torus, bins).unwrap();
    let within = (0..bins.n_bins)
        .filter(|&b| {
            let se = (before.stderr[b].powi(2) + after.stderr[b].powi(2)).sqrt();
            (before.values[b] - after.values[b]).abs() <= 3.0 * se
        })
        .count();
    let depleted = before.values[0] < 0.9;
    let fraction = within as f64 / bins.n_bins as f64;
    report(
        12,
        "equilibrium stationarity",
        fraction >= 0.8 && depleted,
        start.elapsed(),
        Duration::from_secs(600),
        format!(
            "{within}/{} bins within 3 sigma, k2 at contact {:.3} vs bulk {:.3}",
            bins.n_bins,
            before.values[0],
            before.values[bins.n_bins - 1]
        ),
    );
}

fn main() {
    let checks: [(&str, fn()); 12] = [
        ("particle_number_is_conserved", particle_number_is_conserved),
        ("detailed_balance_holds", detailed_balance_holds),
        ("kinetic_mass_and_stationarity", kinetic_mass_and_stationarity),
        ("a_priori_bounds_hold", a_priori_bounds_hold),
        ("picard_iteration_is_certified", picard_iteration_is_certified),
        ("chaos_propagation_identity", chaos_propagation_identity),
        ("horizon_formulas", horizon_formulas),
        ("free_case_is_mean_field_exact", free_case_is_mean_field_exact),
        ("scaling_ladder_converges", scaling_ladder_converges),
        ("rk4_is_fourth_order", rk4_is_fourth_order),
        ("poisson_states_factorize", poisson_states_factorize),
        ("gibbs_state_is_stationary", gibbs_state_is_stationary),
    ];
    let failed: Vec<&str> = checks
        .iter()
        .filter(|(_, check)| std::panic::catch_unwind(check).is_err())
        .map(|(name, _)| *name)
        .collect();
    println!("acceptance: {} of {} passed", checks.len() - failed.len(), checks.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
