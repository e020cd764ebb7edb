//! Nearest-neighbor moment checks: the upper bound on the unit cube and the
//! scaled lower-side trend.
use dre_core::analysis::{nn_moment_lower_check, nn_moment_upper_check, NnDomain};
use dre_core::synthdata::{stream_rng, MixtureSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = stream_rng(11, &[0]);
    for d in [1, 2, 3] {
        for n in [1, 16, 256] {
            let e = nn_moment_upper_check(&NnDomain::UnitCube(d), n, 1.0, 5000, &mut rng)?;
            println!(
                "d={d} N={n:>3}  E[dist] {:.4} ± {:.4}  bound {:.4}  {}",
                e.estimate, e.stderr, e.bound, e.verdict
            );
        }
    }
    let spec = MixtureSpec::new(3, 1, 0.0, 11)?;
    let lower = nn_moment_lower_check(&spec, &[128, 512, 2048], 1.0, 500, &mut rng)?;
    for e in &lower.trend {
        println!("N={:>4}  N^(1/d)-scaled moment {:.4}", e.n, e.scaled);
    }
    println!("target {:.4}, verdict {}", lower.target, lower.verdict);
    Ok(())
}
