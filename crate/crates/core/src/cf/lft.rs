//! Bit-stream to digit transducer built on an integer Möbius state.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::RngCore;
use rand_chacha::ChaCha8Rng;

use super::lazy::sample_gauss_box;
use super::stream::Law;
use super::CfError;

/// Integer state `(a, b; c, d)` for the remaining value `(a y + b) / (c y + d)`,
/// where `y` in `[0, 1]` stands for the unread bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LftState {
    a: BigInt,
    b: BigInt,
    c: BigInt,
    d: BigInt,
}

impl Default for LftState {
    fn default() -> Self {
        Self::identity()
    }
}

impl LftState {
    pub fn identity() -> Self {
        Self { a: BigInt::one(), b: BigInt::zero(), c: BigInt::zero(), d: BigInt::one() }
    }

    pub fn entries(&self) -> [&BigInt; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    pub fn determinant(&self) -> BigInt {
        &self.a * &self.d - &self.b * &self.c
    }

    /// Bit length of the largest entry.
    pub fn max_entry_bits(&self) -> u64 {
        self.entries().iter().map(|e| e.bits()).max().unwrap_or(0)
    }

    /// Reads one more input bit: `y -> (bit + y) / 2`.
    pub fn absorb_bit(&mut self, bit: bool) {
        let b2 = &self.b << 1u32;
        let d2 = &self.d << 1u32;
        if bit {
            self.b = &self.a + b2;
            self.d = &self.c + d2;
        } else {
            self.b = b2;
            self.d = d2;
        }
        self.renormalize();
    }

    /// Emits the next digit if every `y` in `[0, 1]` gives the same one.
    ///
    /// Endpoint images landing exactly on an integer count as undetermined.
    pub fn try_emit(&mut self) -> Result<Option<u64>, CfError> {
        let (n0, d0) = (&self.b, &self.d);
        let n1 = &self.a + &self.b;
        let d1 = &self.c + &self.d;
        if !n0.is_positive() || !n1.is_positive() {
            return Ok(None);
        }
        let (k0, r0) = d0.div_rem(n0);
        let (k1, r1) = d1.div_rem(&n1);
        if k0 != k1 || r0.is_zero() || r1.is_zero() || !k0.is_positive() {
            return Ok(None);
        }
        let k = k0.to_u64().ok_or(CfError::DigitOverflow)?;
        let kb = BigInt::from(k);
        let (a, b) = (self.a.clone(), self.b.clone());
        self.a = &self.c - &kb * &a;
        self.b = &self.d - &kb * &b;
        self.c = a;
        self.d = b;
        self.renormalize();
        Ok(Some(k))
    }

    fn renormalize(&mut self) {
        let g = self.a.gcd(&self.b).gcd(&self.c).gcd(&self.d);
        if g > BigInt::one() {
            self.a /= &g;
            self.b /= &g;
            self.c /= &g;
            self.d /= &g;
        }
    }
}

/// Digits and input interval after freezing a transducer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrozenPrefix {
    pub digits: Vec<u64>,
    /// The consumed bits as `[num / 2^bits, (num + 1) / 2^bits]`.
    pub num: BigUint,
    pub bits: u64,
}

/// Exact digit stream of a uniform (or Gauss) random real read bit by bit.
///
/// Entry sizes grow with the number of bits read, so this is meant for short
/// prefixes; `bit_budget` caps the entry size.
#[derive(Clone, Debug)]
pub struct BitTransducer {
    lft: LftState,
    rng: ChaCha8Rng,
    pending: Vec<bool>,
    consumed: BigUint,
    bits: u64,
    bit_budget: u64,
    emitted: Vec<u64>,
}

impl BitTransducer {
    pub fn new(mut rng: ChaCha8Rng, law: Law, bit_budget: u64) -> Self {
        let mut pending = Vec::new();
        if law == Law::Gauss {
            let b = sample_gauss_box(&mut rng);
            for i in (0..b.bits).rev() {
                pending.push(b.num.bit(i));
            }
            pending.reverse();
        }
        Self {
            lft: LftState::identity(),
            rng,
            pending,
            consumed: BigUint::zero(),
            bits: 0,
            bit_budget,
            emitted: Vec::new(),
        }
    }

    pub fn state(&self) -> &LftState {
        &self.lft
    }

    pub fn bits_consumed(&self) -> u64 {
        self.bits
    }

    fn next_bit(&mut self) -> bool {
        match self.pending.pop() {
            Some(b) => b,
            None => self.rng.next_u32() & 1 == 1,
        }
    }

    fn absorb(&mut self) -> Result<(), CfError> {
        if self.lft.max_entry_bits() >= self.bit_budget {
            return Err(CfError::BudgetExceeded { budget: self.bit_budget });
        }
        let bit = self.next_bit();
        self.consumed = (&self.consumed << 1u32) | BigUint::from(bit as u8);
        self.bits += 1;
        self.lft.absorb_bit(bit);
        Ok(())
    }

    pub fn next_digit(&mut self) -> Result<u64, CfError> {
        loop {
            if let Some(k) = self.lft.try_emit()? {
                self.emitted.push(k);
                return Ok(k);
            }
            self.absorb()?;
        }
    }

    /// Reads exactly `bits` input bits, emitting every digit they determine.
    pub fn freeze_after(mut self, bits: u64) -> Result<FrozenPrefix, CfError> {
        loop {
            while let Some(k) = self.lft.try_emit()? {
                self.emitted.push(k);
            }
            if self.bits >= bits {
                break;
            }
            self.absorb()?;
        }
        Ok(FrozenPrefix { digits: self.emitted, num: self.consumed, bits: self.bits })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn absorb_fraction(num: u64, den: u64, bits: u32) -> LftState {
        let mut s = LftState::identity();
        let x = ((num as u128) << bits) / den as u128;
        for i in (0..bits).rev() {
            s.absorb_bit((x >> i) & 1 == 1);
        }
        s
    }

    fn drain(s: &mut LftState) -> Vec<u64> {
        let mut out = Vec::new();
        while let Some(k) = s.try_emit().unwrap() {
            out.push(k);
        }
        out
    }

    #[test]
    fn boundary_point_stays_undetermined() {
        // 1/3 sits between I(2) and I(3): no digit is ever forced.
        let mut s = absorb_fraction(1, 3, 40);
        assert!(drain(&mut s).is_empty());
    }

    #[test]
    fn emits_forced_digits_only() {
        // 3/10 = [3, 3]; after the first digit the remainder 1/3 is a boundary again.
        let mut s = absorb_fraction(3, 10, 40);
        assert_eq!(drain(&mut s), vec![3]);
        // 5/17 = [3, 2, 2]; the last remainder 1/2 is a boundary.
        let mut s = absorb_fraction(5, 17, 60);
        assert_eq!(drain(&mut s), vec![3, 2]);
    }

    #[test]
    fn determinant_is_a_power_of_two() {
        let mut s = LftState::identity();
        for i in 0..30 {
            s.absorb_bit(i % 3 == 0);
            drain(&mut s);
        }
        let det = s.determinant().abs();
        assert!(det.is_positive());
        assert!((BigInt::from(1u64 << 30) % &det).is_zero());
    }

    #[test]
    fn budget_is_enforced() {
        let mut t = BitTransducer::new(ChaCha8Rng::seed_from_u64(1), Law::Lebesgue, 64);
        let mut hit = false;
        for _ in 0..1000 {
            if let Err(e) = t.next_digit() {
                assert_eq!(e, CfError::BudgetExceeded { budget: 64 });
                hit = true;
                break;
            }
        }
        assert!(hit);
    }
}
