use cflab::{DigitSource, Law, RandomRealStream};
use std::time::Instant;

fn main() {
    for law in [Law::Lebesgue, Law::Gauss] {
        let mut s = RandomRealStream::new(1, law);
        let n = 20_000_000u64;
        let t = Instant::now();
        let mut acc = 0u64;
        for _ in 0..n {
            acc = acc.wrapping_add(s.next_digit().unwrap());
        }
        let dt = t.elapsed().as_secs_f64();
        println!("{law:?}: {:.1} ns/digit, fallbacks {}, checksum {acc}", dt * 1e9 / n as f64, s.exact_fallbacks());
    }
}
