//! The per-round fairness program.
//!
//! Given estimated rewards a and pairwise caps c, the policy is the optimal
//! solution of max <a, p> subject to |p_i - p_j| <= c_ij plus a budget:
//! sum p <= 1 when one arm is pulled per round, 0 <= p <= 1 per arm when
//! every arm is pulled independently. Similar contexts are forced to
//! similar probabilities no matter how different their rewards look.

use fairbandit::fair_lp::{perturb_one_cap, solve_fair_lp, LpInstance, LpMode};
use fairbandit::pairs::PairVec;

fn print_solution(label: &str, sol: &fairbandit::fair_lp::LpSolution) {
    println!("{label}:");
    println!("  policy    = {:?}", sol.policy);
    println!("  objective = {:.6}", sol.objective);
    println!("  tight     = {:?}", sol.tight_pairs);
}

fn main() {
    // Arm 0 looks twice as good as arm 3, but arms 0 and 3 are close in
    // the metric (cap 0.1), so their probabilities must stay close. Arm 2
    // looks actively harmful.
    let rewards = vec![1.0, 0.4, -0.2, 0.5];
    let caps = PairVec::from_values(4, vec![0.9, 0.8, 0.1, 0.7, 0.9, 0.6]).unwrap();

    let single = LpInstance::new(rewards.clone(), caps.clone(), LpMode::Single).unwrap();
    let sol = solve_fair_lp(&single).unwrap();
    print_solution("single pull, sum p <= 1", &sol);
    for ((i, j), cap) in single.caps().iter() {
        let gap = (sol.policy[i] - sol.policy[j]).abs();
        assert!(gap <= cap + 1e-9, "pair ({i},{j})");
    }

    // Relaxing the binding cap can only help, and strictly helps here.
    let relaxed = perturb_one_cap(&single, (0, 3), 0.2).unwrap();
    let better = solve_fair_lp(&relaxed).unwrap();
    println!(
        "relax cap(0,3) by 0.2: objective {:.6} -> {:.6}",
        sol.objective, better.objective
    );
    assert!(better.objective >= sol.objective - 1e-9);

    // Multi mode drops the shared budget: every profitable arm goes to 1,
    // and the bad arm gets dragged up to 0.4 anyway because it may not
    // trail arm 3 by more than 0.6. Fairness costs reward here.
    let multi = LpInstance::new(rewards, caps, LpMode::Multi).unwrap();
    let sol = solve_fair_lp(&multi).unwrap();
    print_solution("independent pulls, 0 <= p <= 1", &sol);
    assert!(sol.policy.iter().all(|p| (-1e-9..=1.0 + 1e-9).contains(p)));
    assert!((sol.policy[2] - 0.4).abs() < 1e-9);
    assert!(sol.tight_pairs.contains(&(2, 3)));
}
