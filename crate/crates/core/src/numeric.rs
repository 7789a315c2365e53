//! Small numeric helpers shared by the modules.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// `ln(e^a - e^b)` for `a > b`.
pub fn ln_diff_exp(a: f64, b: f64) -> f64 {
    a + (-(b - a).exp_m1()).ln()
}

/// `ln(e^a + e^b)`.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Natural log of a big integer.
pub fn ln_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().map_or(f64::INFINITY, f64::ln);
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `floor(e^x)` as a big integer, for `x >= 0`.
///
/// Values below `2^52` are exact up to the rounding of `exp`; beyond that the
/// low bits come from a 52-bit mantissa.
pub fn exp_floor(x: f64) -> BigUint {
    exp_round(x, f64::floor)
}

/// `ceil(e^x)` as a big integer, for `x >= 0`.
pub fn exp_ceil(x: f64) -> BigUint {
    exp_round(x, f64::ceil)
}

fn exp_round(x: f64, round: fn(f64) -> f64) -> BigUint {
    assert!(x.is_finite(), "exponent must be finite");
    if x < 36.0 {
        return BigUint::from(round(x.exp()).max(0.0) as u64);
    }
    let log2 = x / std::f64::consts::LN_2;
    let shift = (log2 - 52.0).floor().max(0.0);
    let mantissa = (log2 - shift).exp2();
    BigUint::from(round(mantissa) as u64) << (shift as u64)
}

/// Uniform integer in `[0, bound)`.
pub fn uniform_below<R: RngCore>(rng: &mut R, bound: &BigUint) -> BigUint {
    assert!(!bound.is_zero(), "empty range");
    if let Some(b) = bound.to_u64() {
        let zone = u64::MAX - (u64::MAX - b + 1) % b;
        loop {
            let v = rng.next_u64();
            if v <= zone {
                return BigUint::from(v % b);
            }
        }
    }
    let bits = bound.bits();
    let words = bits.div_ceil(64);
    let top_mask = if bits % 64 == 0 { u64::MAX } else { (1u64 << (bits % 64)) - 1 };
    loop {
        let mut v = BigUint::zero();
        for w in 0..words {
            let mut word = rng.next_u64();
            if w == 0 {
                word &= top_mask;
            }
            v = (v << 64u32) | BigUint::from(word);
        }
        if &v < bound {
            return v;
        }
    }
}

/// Uniform integer in `[lo, hi]`.
pub fn uniform_between<R: RngCore>(rng: &mut R, lo: &BigUint, hi: &BigUint) -> BigUint {
    lo + uniform_below(rng, &(hi - lo + BigUint::one()))
}

/// Mean, median and standard error of a sample.
pub fn summarize(xs: &[f64]) -> (f64, f64, Option<f64>) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, None);
    }
    let mean = xs.iter().copied().collect::<NeumaierSum>().value() / n as f64;
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let se = (n >= 2).then(|| {
        let ss = xs.iter().map(|x| (x - mean) * (x - mean)).collect::<NeumaierSum>().value();
        (ss / (n - 1) as f64 / n as f64).sqrt()
    });
    (mean, median, se)
}
