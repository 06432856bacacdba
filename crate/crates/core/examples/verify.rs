//! The reduced self-check suite, as run by `riesz verify --quick`.

use riesz::verify::{print_table, run_suite, Mode};

fn main() -> riesz::Result<()> {
    let outcomes = run_suite(Mode::Quick, 0);
    print_table(&outcomes, &mut std::io::stdout())
}
