//! Acceptance criteria A1 to A15, one PASS/FAIL line each.
//! `RIESZ_ACCEPTANCE=quick` selects reduced sample sizes.

use riesz::verify::{format_line, run_check, Mode, CRITERIA};

fn main() {
    let mode = match std::env::var("RIESZ_ACCEPTANCE").as_deref() {
        Ok("quick") => Mode::Quick,
        _ => Mode::Full,
    };
    let mut failed = 0;
    let mut total = 0;
    for (id, _) in CRITERIA {
        for o in run_check(id, mode, 0) {
            println!("{}", format_line(&o));
            total += 1;
            if !o.passed {
                failed += 1;
            }
        }
    }
    println!("{}/{total} acceptance checks passed", total - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
