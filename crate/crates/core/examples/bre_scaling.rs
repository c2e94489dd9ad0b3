//! Reabsorption probabilities of a single Lambda-system atom next to a
//! condensate, order by order in `epsilon N0`.

use atomlaser::bre::{compute_order_terms, exact_probabilities, scaling_report, LambdaSystemSpec, ReducedBREModel, ScalingSettings};

fn main() -> atomlaser::Result<()> {
    let spec = LambdaSystemSpec::default().with_epsilon(1e-3);
    let model = ReducedBREModel::with_condensate(4, 10);
    let terms = compute_order_terms(&model, &spec)?;
    let exact = exact_probabilities(&model, &spec)?;
    println!("epsilon = 1e-3, N0 = 10");
    println!("  A0 = {:.6e}  A1a = {:.6e}  A1b = {:.6e}", terms.a0, terms.a1a, terms.a1b);
    println!("  A2a bad = {:.6e}  A2b = {:.6e}", terms.a2a_bad, terms.a2b);
    println!("  exact bad = {:.6e}, residual = {:.3e}", exact.fast.bad, terms.residual());

    let settings = ScalingSettings {
        epsilons: vec![1e-4, 1e-3, 1e-2],
        n0s: vec![1, 10, 30],
        convergence_tolerance: None,
        ..ScalingSettings::default()
    };
    let report = scaling_report(&settings)?;
    let e = &report.a2a_bad;
    println!("\nA2a bad ~ epsilon^{:.3} N0^{:.3}", e.exponent_epsilon.value, e.exponent_n0.map_or(f64::NAN, |x| x.value));
    println!("A1a ~ epsilon^{:.3}", report.a1a.exponent_epsilon.value);
    println!("competition-limit error {:.2e}", report.competition_limit_error);
    Ok(())
}
