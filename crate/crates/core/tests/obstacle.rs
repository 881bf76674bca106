use obstacle_shape::fem::DiscreteObstacleProblem;
use obstacle_shape::mesh::{generate_disk_mesh, Point};
use obstacle_shape::obstacle::{contact_set, psor_oracle, solve_obstacle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn psi(p: Point) -> f64 {
    -0.3 * (p[0] * p[0] + (p[1] - 0.25).powi(2)) - 0.05
}

fn coarse() -> DiscreteObstacleProblem {
    let mesh = generate_disk_mesh(1.75, 0.2, &[[-1.0, 0.0], [0.5, 0.75], [0.5, -1.5]]).unwrap();
    DiscreteObstacleProblem::new(mesh, |_| -10.0, psi).unwrap()
}

#[test]
fn example_data_matches_psor() {
    let p = coarse();
    let u = vec![2.0; p.dirichlet.len()];
    let direct = solve_obstacle(&p, &u, None).unwrap();
    let psor = psor_oracle(&p, &u, 1.8, 1e-13, 1_000_000).unwrap();
    let diff = direct.q.iter().zip(&psor.q).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff <= 1e-8, "max difference {diff:e}");
    assert_eq!(direct.contact_set, psor.contact_set);
    psor.check_kkt(&p, &u, 1e-8, 1e-12).unwrap();
}

#[test]
fn psor_without_obstacle_matches_dirichlet_solve() {
    let p = coarse();
    let p = p.with_obstacle(vec![-1e9; p.num_nodes()]);
    let u: Vec<f64> = p.boundary_thetas().iter().map(|t| 1.0 + t.cos()).collect();
    let psor = psor_oracle(&p, &u, 1.8, 1e-13, 1_000_000).unwrap();
    let y = p.unconstrained_dirichlet_solve(&u).unwrap();
    let diff = psor.q.iter().zip(&y).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff <= 1e-9, "{diff:e}");
    assert!(psor.contact_set.is_empty());
    assert!(contact_set(&p, &y, 1e-12).is_empty());
}

#[test]
fn unit_relaxation_converges() {
    let p = coarse();
    let u = vec![1.0; p.dirichlet.len()];
    let sol = psor_oracle(&p, &u, 1.0, 1e-12, 100_000).unwrap();
    assert!(sol.iterations < 100_000);
}

#[test]
fn solution_minimizes_energy_among_feasible_perturbations() {
    let p = coarse();
    let u: Vec<f64> = p.boundary_thetas().iter().map(|t| 1.5 + 0.5 * (2.0 * t).sin()).collect();
    let sol = solve_obstacle(&p, &u, None).unwrap();
    let boundary = p.boundary_mask();
    let base = p.energy(&sol.q);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let scale = 10f64.powf(rng.gen_range(-6.0..-1.0));
        let perturbed: Vec<f64> = (0..p.num_nodes())
            .map(|i| {
                if boundary[i] {
                    sol.q[i]
                } else {
                    (sol.q[i] + scale * rng.gen_range(-1.0..1.0)).max(p.obstacle[i])
                }
            })
            .collect();
        let e = p.energy(&perturbed);
        assert!(e >= base - 1e-12 * base.abs().max(1.0), "{e} < {base}");
    }
}

#[test]
fn energy_is_monotone_over_feasible_iterates() {
    let p = coarse();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let level = rng.gen_range(0.2..3.0);
        let u: Vec<f64> = p.boundary_thetas().iter().map(|t| level + 0.3 * (3.0 * t).cos()).collect();
        let sol = solve_obstacle(&p, &u, None).unwrap();
        let feasible: Vec<f64> = sol.energy_history.iter().filter(|e| e.1).map(|e| e.0).collect();
        assert_eq!(sol.energy_history.last().map(|e| e.1), Some(true));
        for w in feasible.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{:?}", sol.energy_history);
        }
    }
}

#[test]
fn kkt_invariants_on_random_instances() {
    let p = coarse();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let u: Vec<f64> = p.boundary_thetas().iter().map(|_| rng.gen_range(0.0..3.0)).collect();
        let sol = solve_obstacle(&p, &u, None).unwrap();
        sol.check_kkt(&p, &u, 1e-10, 1e-12).unwrap();
        let warm = solve_obstacle(&p, &u, Some(&sol.contact_set)).unwrap();
        let diff = warm.q.iter().zip(&sol.q).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff <= 1e-12);
    }
}
