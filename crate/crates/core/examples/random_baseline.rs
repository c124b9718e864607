//! Expected scores of uniform random guessing: closed form against a
//! seeded Monte Carlo estimate.

use cq_workbench::harness::random_baseline_counts;

fn main() -> anyhow::Result<()> {
    for (yes, no) in [(1204, 189), (10, 10), (15, 5)] {
        let b = random_baseline_counts(yes, no, 10_000, 1)?;
        println!(
            "{yes:>5} yes / {no:>4} no: closed form macro-F1 {:.4}, Monte Carlo {:.4} (accuracy {:.3})",
            b.closed_form.macro_f1, b.monte_carlo.macro_f1, b.monte_carlo.accuracy
        );
    }
    Ok(())
}
