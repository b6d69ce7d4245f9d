//! Runs every suite with its shipped families, printing timings, failures and
//! the measurements behind the calibrated caps.
//!
//! `cargo run --release --example pilot [suite...]`

use std::time::Instant;

use markov_hitting::generators::FamilySpec;
use markov_hitting::harness::{self, Suite, SuiteConfig};
use markov_hitting::hitting;

fn main() -> markov_hitting::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let suites: Vec<Suite> = if args.is_empty() {
        Suite::ALL.to_vec()
    } else {
        args.iter().map(|a| a.parse()).collect::<markov_hitting::Result<_>>()?
    };
    for suite in suites {
        let sc = SuiteConfig::default_for(suite);
        let start = Instant::now();
        let report = harness::run_suite(suite, &sc)?;
        println!(
            "{}: {} records, {} failed, {:.1}s",
            suite.name(),
            report.summary.total,
            report.summary.failed,
            start.elapsed().as_secs_f64()
        );
        for (k, v) in &report.summary.extremes {
            println!("  {k} = {v:.6}");
        }
        for r in report.failures().take(20) {
            println!("  FAIL {} {:?} lhs={:e} rhs={:e} {:?}", r.id, r.chain.as_ref().map(FamilySpec::label), r.lhs, r.rhs, r.witness);
        }
        if suite == Suite::PendantPath {
            for spec in &sc.families {
                let ex = spec.build_pendant_path()?;
                let audit = hitting::pendant_path_audit(&ex, 0.1, 20, sc.seed)?;
                println!(
                    "  n={} t_rel={:.3} scaled={:.4} max_exit={:.4}",
                    audit.n, audit.t_rel, audit.t_rel_scaled, audit.max_exit
                );
            }
        }
        for r in report.records.iter().filter(|r| r.id.starts_with("separation.")) {
            println!("  {} {:.4} <= {:.4} {}", r.id, r.lhs, r.rhs, r.witness.as_deref().unwrap_or(""));
        }
    }
    Ok(())
}
