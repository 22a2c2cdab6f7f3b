use proptest::prelude::*;

use super::*;

fn engine() -> SimplexEngine {
    SimplexEngine::default()
}

#[test]
fn one_variable_lp() {
    let mut lp = LinearProgram::<f64>::new();
    let x = lp.add_free("x", 1.0);
    lp.add_row("lb", vec![(x, 1.0)], Relation::Ge, 3.0);
    let sol = engine().solve_lp(&lp);
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective - 3.0).abs() < 1e-12);
    assert!((sol.duals[0] - 1.0).abs() < 1e-12);
}

#[test]
fn contradictory_bounds_are_infeasible() {
    let mut lp = LinearProgram::<f64>::new();
    let x = lp.add_var("x", 0.0, f64::INFINITY, 0.0);
    lp.add_row("neg", vec![(x, 1.0)], Relation::Le, -1.0);
    assert_eq!(engine().solve_lp(&lp).status, LpStatus::Infeasible);
}

#[test]
fn unbounded_direction_is_reported() {
    let mut lp = LinearProgram::<f64>::new();
    let x = lp.add_var("x", 0.0, f64::INFINITY, -1.0);
    let y = lp.add_var("y", 0.0, f64::INFINITY, 0.0);
    lp.add_row("r", vec![(x, 1.0), (y, -1.0)], Relation::Le, 2.0);
    assert_eq!(engine().solve_lp(&lp).status, LpStatus::Unbounded);
}

#[test]
fn le_duals_are_nonpositive() {
    // max x + y  s.t. x + 2y <= 4, 3x + y <= 6  ->  x = 1.6, y = 1.2
    let mut lp = LinearProgram::<f64>::new();
    let x = lp.add_var("x", 0.0, f64::INFINITY, -1.0);
    let y = lp.add_var("y", 0.0, f64::INFINITY, -1.0);
    lp.add_row("a", vec![(x, 1.0), (y, 2.0)], Relation::Le, 4.0);
    lp.add_row("b", vec![(x, 3.0), (y, 1.0)], Relation::Le, 6.0);
    let sol = engine().solve_lp(&lp);
    assert!(sol.is_optimal());
    assert!((sol.primal[x] - 1.6).abs() < 1e-9);
    assert!((sol.primal[y] - 1.2).abs() < 1e-9);
    assert!(sol.duals.iter().all(|d| *d <= 1e-12));
    // Strong duality: objective = sum(dual * rhs) when no bound is active.
    let dual_obj = sol.duals[0] * 4.0 + sol.duals[1] * 6.0;
    assert!((dual_obj - sol.objective).abs() < 1e-9);
    assert!((sol.duals[0] + 0.4).abs() < 1e-9);
    assert!((sol.duals[1] + 0.2).abs() < 1e-9);
}

#[test]
fn equality_and_free_columns() {
    // min |t| style: min p + n  s.t. p - n = -2.5
    let mut lp = LinearProgram::<f64>::new();
    let p = lp.add_var("p", 0.0, f64::INFINITY, 1.0);
    let n = lp.add_var("n", 0.0, f64::INFINITY, 1.0);
    let z = lp.add_free("z", 0.0);
    lp.add_row("e", vec![(p, 1.0), (n, -1.0)], Relation::Eq, -2.5);
    lp.add_row("z", vec![(z, 1.0), (p, 1.0)], Relation::Eq, 7.0);
    let sol = engine().solve_lp(&lp);
    assert!(sol.is_optimal());
    assert!((sol.objective - 2.5).abs() < 1e-12);
    assert!((sol.primal[z] - 7.0).abs() < 1e-12);
    assert!((sol.duals[0] + 1.0).abs() < 1e-12);
}

#[test]
fn milp_tie_break_prefers_lowest_index() {
    let mut lp = LinearProgram::<f64>::new();
    let a = lp.add_binary("x1", 1.0);
    let b = lp.add_binary("x2", 1.0);
    lp.add_row("cover", vec![(a, 1.0), (b, 1.0)], Relation::Ge, 1.0);
    let sol = engine().solve_milp(&lp, 1e-6);
    assert_eq!(sol.status, MilpStatus::Optimal);
    assert_eq!(sol.objective, 1.0);
    assert_eq!(sol.primal[a], 1.0);
    assert_eq!(sol.primal[b], 0.0);
}

#[test]
fn knapsack_needs_branching() {
    // max 5a + 4b + 3c  s.t. 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
    let mut lp = LinearProgram::<f64>::new();
    let v: Vec<usize> = ["a", "b", "c"].iter().zip([-5.0, -4.0, -3.0]).map(|(n, c)| lp.add_binary(*n, c)).collect();
    lp.add_row("r1", vec![(v[0], 2.0), (v[1], 3.0), (v[2], 1.0)], Relation::Le, 5.0);
    lp.add_row("r2", vec![(v[0], 4.0), (v[1], 1.0), (v[2], 2.0)], Relation::Le, 11.0);
    lp.add_row("r3", vec![(v[0], 3.0), (v[1], 4.0), (v[2], 2.0)], Relation::Le, 8.0);
    let sol = engine().solve_milp(&lp, 1e-9);
    assert_eq!(sol.status, MilpStatus::Optimal);
    assert_eq!(sol.objective, -9.0);
    let relaxed = engine().solve_lp(&lp);
    assert!(relaxed.objective <= sol.objective + 1e-9);
}

#[test]
fn milp_infeasible() {
    let mut lp = LinearProgram::<f64>::new();
    let a = lp.add_binary("a", 1.0);
    let b = lp.add_binary("b", 1.0);
    lp.add_row("r", vec![(a, 1.0), (b, 1.0)], Relation::Eq, 1.5);
    assert_eq!(engine().solve_milp(&lp, 1e-6).status, MilpStatus::Infeasible);
}

#[test]
fn f32_lp_solves() {
    let mut lp = LinearProgram::<f32>::new();
    let x = lp.add_var("x", 0.0, 10.0, -1.0);
    let y = lp.add_var("y", 0.0, 10.0, -2.0);
    lp.add_row("a", vec![(x, 1.0), (y, 1.0)], Relation::Le, 4.0);
    lp.add_row("b", vec![(x, 1.0), (y, 3.0)], Relation::Le, 6.0);
    let sol = engine().solve_lp(&lp);
    assert!(sol.is_optimal());
    assert!((sol.objective + 5.0).abs() < 1e-4);
}

#[test]
fn lp_text_dump_uses_fixed_keywords() {
    let mut lp = LinearProgram::<f64>::new();
    let a = lp.add_binary("x_1", 3.0);
    let t = lp.add_free("theta 2", 0.0);
    let r = lp.add_var("r", 0.0, 5.0, 1.0);
    lp.add_row("c1", vec![(a, 1.0), (t, -2.0)], Relation::Ge, 1.0);
    lp.add_row("c2", vec![(r, 1.0)], Relation::Eq, 2.0);
    let mut buf = Vec::new();
    write_lp(&lp, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    for kw in ["MINIMIZE", "SUBJECT TO", "BOUNDS", "BINARY", "END"] {
        assert!(text.contains(kw), "missing {kw}\n{text}");
    }
    assert!(text.contains(" c1: 1 x_1 - 2 theta_2 >= 1"));
    assert!(text.contains(" theta_2 free"));
    assert!(text.contains(" 0 <= r <= 5"));
}

/// Random bounded LPs: primal feasible, weak/strong duality with bound terms,
/// sign convention, and repeatability.
fn random_lp(seed: u64, n: usize, m: usize) -> LinearProgram<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut lp = LinearProgram::new();
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    for (j, v) in x0.iter().enumerate() {
        let lo = v - rng.random_range(0.1..3.0);
        let hi = v + rng.random_range(0.1..3.0);
        lp.add_var(format!("x{j}"), lo, hi, rng.random_range(-5.0..5.0));
    }
    for i in 0..m {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.6) {
                coeffs.push((j, rng.random_range(-3.0..3.0)));
            }
        }
        let act: f64 = coeffs.iter().map(|(j, a)| a * x0[*j]).sum();
        let (rel, rhs) = match i % 3 {
            0 => (Relation::Le, act + rng.random_range(0.0..2.0)),
            1 => (Relation::Ge, act - rng.random_range(0.0..2.0)),
            _ => (Relation::Eq, act),
        };
        lp.add_row(format!("r{i}"), coeffs, rel, rhs);
    }
    lp
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_lps_satisfy_duality(seed in 0u64..10_000, n in 2usize..9, m in 1usize..8) {
        let lp = random_lp(seed, n, m);
        let sol = engine().solve_lp(&lp);
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        prop_assert!(lp.max_violation(&sol.primal) < 1e-7);
        for (row, d) in lp.rows.iter().zip(&sol.duals) {
            match row.relation {
                Relation::Le => prop_assert!(*d <= 1e-9),
                Relation::Ge => prop_assert!(*d >= -1e-9),
                Relation::Eq => {}
            }
        }
        // Lagrangian value: rows plus active bounds reproduce the objective.
        let mut dual_obj = lp.offset;
        for (row, d) in lp.rows.iter().zip(&sol.duals) {
            dual_obj += d * row.rhs;
        }
        for (j, rc) in sol.reduced_costs.iter().enumerate() {
            if rc.abs() > 1e-12 {
                let bound = if *rc > 0.0 { lp.lower[j] } else { lp.upper[j] };
                dual_obj += rc * bound;
            }
        }
        prop_assert!((dual_obj - sol.objective).abs() < 1e-7 * (1.0 + sol.objective.abs()));
        let again = engine().solve_lp(&lp);
        prop_assert_eq!(again.objective.to_bits(), sol.objective.to_bits());
    }

    #[test]
    fn random_binary_programs_match_enumeration(seed in 0u64..10_000, n in 2usize..7, m in 1usize..5) {
        let mut lp = random_lp(seed, n, m);
        for j in 0..n {
            lp.binary[j] = true;
            lp.lower[j] = 0.0;
            lp.upper[j] = 1.0;
        }
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            let x: Vec<f64> = (0..n).map(|j| (mask >> j & 1) as f64).collect();
            if lp.max_violation(&x) <= 1e-9 {
                best = best.min(lp.evaluate(&x));
            }
        }
        let sol = engine().solve_milp(&lp, 1e-9);
        if best.is_finite() {
            prop_assert_eq!(sol.status, MilpStatus::Optimal);
            prop_assert!((sol.objective - best).abs() < 1e-7);
            let relaxed = engine().solve_lp(&lp);
            prop_assert!(relaxed.objective <= sol.objective + 1e-7);
            for w in sol.incumbent_history.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        } else {
            prop_assert_eq!(sol.status, MilpStatus::Infeasible);
        }
    }
}
