//! The pointwise loss over a dominating measure is minimised at u = dQ/dP,
//! where it equals -f(dQ/dP) dP/dmu.
use dre_core::divergence::{mu_loss_derivative, mu_loss_pointwise, Generator, MuPoint};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (dq, dp) = (1.4, 0.6);
    let r = dq / dp;
    for g in Generator::all_default() {
        let (mut best_u, mut best) = (0.0, f64::INFINITY);
        for k in 1..=10_000 {
            let u = k as f64 * 1e-3;
            let l = mu_loss_pointwise(g, &MuPoint::new(u, dq, dp)?);
            if l < best {
                (best_u, best) = (u, l);
            }
        }
        let at_r = MuPoint::new(r, dq, dp)?;
        println!(
            "{:<18} grid argmin {best_u:.3}  dQ/dP {r:.3}  loss(r) {:.6}  -f(r)dP {:.6}  slope(r) {:.1e}",
            g.name(),
            mu_loss_pointwise(g, &at_r),
            -g.f(r) * dp,
            mu_loss_derivative(g, &at_r).first
        );
    }
    Ok(())
}
