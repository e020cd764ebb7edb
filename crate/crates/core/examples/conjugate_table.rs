//! Generators, their derivatives and conjugates at a few points.
use dre_core::divergence::Generator;

fn main() {
    println!("{:<18} {:>8} {:>12} {:>12} {:>12} {:>12}", "generator", "u", "f(u)", "f'(u)", "f*(f'(u))", "u f' - f");
    for g in Generator::all_default() {
        for u in [0.1, 0.5, 1.0, 2.0, 10.0] {
            let (f, fp) = (g.f(u), g.f_prime(u));
            println!(
                "{:<18} {:>8} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
                g.name(),
                u,
                f,
                fp,
                g.conj_of_fprime(u),
                u * fp - f
            );
        }
    }
}
