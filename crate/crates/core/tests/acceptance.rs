use fqhe_core::verify::{run_criterion, CRITERIA};

fn main() {
    let mut failed = Vec::new();
    for (id, _) in CRITERIA {
        let outcome = run_criterion(id);
        println!("{outcome}");
        if !outcome.passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria PASS", CRITERIA.len());
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
