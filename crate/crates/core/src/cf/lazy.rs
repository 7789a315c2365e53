//! Lazily refined dyadic boxes for a Gauss-distributed starting point.

use num_bigint::BigUint;
use num_traits::One;
use rand::RngCore;

/// A point known to lie in `[num / 2^bits, (num + 1) / 2^bits)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DyadicBox {
    pub num: BigUint,
    pub bits: u64,
}

impl DyadicBox {
    /// Appends 64 uniform bits. Valid whenever the point is uniform on the box.
    pub fn refine<R: RngCore>(&mut self, rng: &mut R) {
        self.num = (&self.num << 64u32) | BigUint::from(rng.next_u64());
        self.bits += 64;
    }

    pub fn midpoint_f64(&self) -> f64 {
        let shift = self.bits.saturating_sub(60);
        let top: BigUint = &self.num >> shift;
        let top = top.iter_u64_digits().next().unwrap_or(0) as f64 + 0.5;
        top * (-((self.bits - shift) as f64)).exp2()
    }
}

/// Draws a point with density `1/((1+x) ln 2)` by lazy rejection.
///
/// Proposals `x` and `v` are uniform and revealed 64 bits at a time; the pair is
/// accepted once the whole box lies under `v = 1/(1+x)`. Conditioned on acceptance
/// the point is uniform on the returned box, so further bits may be drawn freely.
pub fn sample_gauss_box<R: RngCore>(rng: &mut R) -> DyadicBox {
    loop {
        let mut x = DyadicBox { num: BigUint::from(0u8), bits: 0 };
        let mut v = DyadicBox { num: BigUint::from(0u8), bits: 0 };
        loop {
            x.refine(rng);
            v.refine(rng);
            let scale = BigUint::one() << x.bits;
            let square = &scale * &scale;
            // v_hi (1 + x_hi) < 1
            if (&v.num + 1u32) * (&scale + &x.num + 1u32) < square {
                return x;
            }
            // v_lo (1 + x_lo) >= 1
            if &v.num * (&scale + &x.num) >= square {
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gauss_box_has_gauss_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 40_000;
        let mut below_half = 0usize;
        for _ in 0..n {
            if sample_gauss_box(&mut rng).midpoint_f64() < 0.5 {
                below_half += 1;
            }
        }
        // mu([0, 1/2]) = log2(3/2)
        let p = 1.5f64.log2();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((below_half as f64 / n as f64 - p).abs() < 4.0 * se);
    }
}
