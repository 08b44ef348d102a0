//! Runs the analytic verification suite: closed forms against quadrature and
//! exact-constant identities.

fn main() {
    let checks = mating_trees::cli::analytic_suite();
    for c in &checks {
        println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("{} checks, {failed} failed", checks.len());
    std::process::exit(i32::from(failed > 0));
}
