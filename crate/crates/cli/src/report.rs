use crate::Format;
use linkcert::certify::{LinkMatrix, PairDiff, Status, VerificationReport};
use std::time::Duration;

fn ms(d: Duration) -> String {
    format!("{:.1}ms", d.as_secs_f64() * 1e3)
}

pub fn print_compute(m: &LinkMatrix, format: Format) {
    let d = &m.diagnostics;
    match format {
        Format::Json => {
            let v = serde_json::json!({
                "num_loops": m.num_loops,
                "entries": m.entries.len(),
                "kernel": m.kernel,
                "diagnostics": d,
            });
            println!("{v}");
        }
        Format::Text => {
            println!(
                "{} loops, {} candidate pairs, {} linked pairs ({} kernel)",
                m.num_loops,
                d.candidate_pairs,
                m.entries.len(),
                m.kernel
            );
            println!(
                "pls {}  discretize {} ({} passes, {} segments)  kernel {}",
                ms(d.pls_time),
                ms(d.discretize_time),
                d.discretization_passes,
                d.segments,
                ms(d.kernel_time)
            );
            for &(i, j) in &d.fallbacks {
                println!("fallback to crossing count: loops {i} and {j}");
            }
            if d.bh_max_e_estimate > 0.0 {
                println!("barnes-hut error estimate (frobenius) up to {:.3e}", d.bh_max_e_estimate);
            }
            for &(i, j, beta) in &d.bh_reruns {
                println!("barnes-hut rerun at beta {beta:.3}: loops {i} and {j}");
            }
        }
    }
}

fn line(kind: &str, d: &PairDiff) -> String {
    format!("{kind} {} {} (reference {}, computed {})", d.i, d.j, d.reference, d.computed)
}

pub fn print_verification(r: &VerificationReport, format: Format) {
    match format {
        Format::Json => println!("{}", serde_json::to_string(r).expect("report serializes")),
        Format::Text => {
            let status = match r.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Aborted => "ABORTED",
            };
            println!("{status}");
            if let Some(m) = &r.message {
                println!("{m}");
            }
            if !r.digest_matches {
                println!("note: model digest differs from the certificate's");
            }
            if let Some(f) = &r.first_failure {
                println!("{}", line("first failure:", f));
            } else {
                for d in &r.destroyed {
                    println!("{}", line("destroyed", d));
                }
                for d in &r.created {
                    println!("{}", line("created", d));
                }
                for d in &r.changed {
                    println!("{}", line("changed", d));
                }
            }
        }
    }
}
