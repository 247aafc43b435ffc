//! Cross-module scenarios that exercise how the pieces compose beyond the
//! acceptance gate.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use expconcave::diagnostics::ProblemInstance;
use expconcave::online::{
    average_iterates, o2b_excess_bound, ons_run, regret_bound, regret_of, LearnerKind,
    RegretBoundParams,
};
use expconcave::seeds::derive_seed;

/// On realizable data the minimizer has zero loss almost surely, so the
/// realized regret of ONS stays far below its worst-case bound, and the
/// excess-risk bound fed with the *measured* regret is correspondingly much
/// tighter than the one fed with the worst-case regret. Both must still
/// hold against the oracle excess risk of the averaged iterate.
#[test]
fn realizable_ons_excess_bound_consumes_measured_regret() {
    let problem = ProblemInstance::by_name("realizable_1d", None).unwrap();
    let eta = problem.loss.eta();
    let b = problem.loss.diameter();
    let (g, d_bound) = (problem.online.g, problem.online.d);
    let n = 512usize;
    let delta = 0.05;
    let worst_case = regret_bound(
        LearnerKind::Ons,
        &RegretBoundParams { eta, g_bound: g, d_bound, nu: 0.0, dim: 1, n: n as f64 },
    )
    .unwrap();
    let bound_from_worst = o2b_excess_bound(worst_case, eta, b, n, delta).unwrap();
    // Regret-independent part of the bound; the regret-driven component is
    // everything above it.
    let floor = o2b_excess_bound(0.0, eta, b, n, delta).unwrap();

    let mut violations = 0usize;
    for s in 0..20u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(99, "realizable", n as u64, s));
        let seq = problem.sample(&mut rng, n);
        let run = ons_run(&problem.loss, &problem.domain, &seq, eta, g, d_bound).unwrap();
        let trace = regret_of(&problem.loss, &problem.domain, &seq, &run).unwrap();
        assert!(
            trace.regret <= 0.05 * worst_case,
            "seed {s}: realized regret {} not far below worst case {worst_case}",
            trace.regret
        );
        let avg = average_iterates(&run).unwrap();
        let (excess, _) = problem.excess_risk(&avg).unwrap();
        let bound_from_measured = o2b_excess_bound(trace.regret, eta, b, n, delta).unwrap();
        assert!(
            bound_from_measured - floor <= 0.05 * (bound_from_worst - floor),
            "seed {s}: regret-driven component {} did not collapse (worst-case component {})",
            bound_from_measured - floor,
            bound_from_worst - floor
        );
        if excess > bound_from_measured {
            violations += 1;
        }
    }
    assert_eq!(violations, 0, "measured-regret excess bound violated");
}
