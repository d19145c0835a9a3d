//! Case A with the four corner sensors, centralized or distributed.
//!
//! `cargo run --release --example case_a_network -- [centralized|distributed] [runs]`

use possibility_lmb::sim::{monte_carlo, Method, ScenarioConfig};

fn main() -> possibility_lmb::Result<()> {
    let mut args = std::env::args().skip(1);
    let method: Method = args
        .next()
        .map(|s| s.parse().map_err(possibility_lmb::Error::Argument))
        .transpose()?
        .unwrap_or(Method::Centralized);
    let runs = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);
    let cfg = ScenarioConfig {
        mc_runs: runs,
        ..ScenarioConfig::case_a()
    };
    let mc = monte_carlo(&cfg, method)?;
    println!("case A, {method}, {runs} runs");
    println!("step  truth  estimate  OSPA");
    for s in mc.summary.iter().filter(|s| s.step % 5 == 0) {
        println!("{:4}  {:5.2}  {:8.2}  {:6.2}", s.step, s.card_true_mean, s.card_est_mean, s.ospa_mean);
    }
    Ok(())
}
