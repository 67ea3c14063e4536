use outex::bundle::{width_estimate, Capped, ExtensionPresentation};
use outex::sample;
use outex::words::Word;
use std::time::Instant;

fn main() {
    let cap = 5_000_000usize;
    for (name, p) in [
        ("tribonacci", ExtensionPresentation::new(3, vec![sample::tribonacci()]).unwrap()),
        ("invariant-factor", ExtensionPresentation::new(3, vec![sample::invariant_factor()]).unwrap()),
    ] {
        println!("== {name} ==");
        for s in ["a", "b", "ab"] {
            let a = Word::parse(s, 3).unwrap();
            let t0 = Instant::now();
            let rows = width_estimate(&p, &a, &[2, 4, 6, 8], cap).unwrap();
            for r in &rows {
                match (&r.distance, r.diameter) {
                    (Capped::Exact(d), Some(diam)) => println!("  {s} N={}: d={d} diam={diam}", r.power),
                    (Capped::Exact(d), None) => println!("  {s} N={}: d={d} diam=?", r.power),
                    (Capped::Overflow, _) => println!("  {s} N={}: OVERFLOW", r.power),
                }
            }
            println!("  ({:.1}s)", t0.elapsed().as_secs_f64());
        }
    }
}
