//! Random digit streams.
//!
//! The default engine samples the digit chain of the Gauss map natural extension:
//! given `s_n = q_{n-1}/q_n` the next digit is `floor((1 + s_n)/U - s_n)` with `U`
//! uniform on `(0, 1]`, and `s_{n+1} = 1/(a_{n+1} + s_n)`. Starting from `s_0 = 0`
//! gives Lebesgue-distributed digits, starting from `s_0 ~ mu` gives the stationary
//! Gauss law. Every digit is certified on a box of `(s, U)` values; when the
//! floating-point box is inconclusive the decision is redone with exact rationals.

use std::collections::VecDeque;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lazy::{sample_gauss_box, DyadicBox};
use super::lft::BitTransducer;
use super::CfError;

/// Default cap, in bits, on exact refinement of one digit decision.
pub const DEFAULT_BIT_BUDGET: u64 = 4096;

const HISTORY: usize = 1024;
const S_ERR: f64 = 1e-12;
const REL: f64 = 1e-12;
const TWO_POW_M64: f64 = 1.0 / 18_446_744_073_709_551_616.0;
const FAST_LIMIT: f64 = 4_503_599_627_370_496.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Law {
    Lebesgue,
    Gauss,
}

impl std::str::FromStr for Law {
    type Err = CfError;
    fn from_str(s: &str) -> Result<Self, CfError> {
        match s {
            "lebesgue" => Ok(Law::Lebesgue),
            "gauss" => Ok(Law::Gauss),
            other => Err(CfError::Domain(format!("unknown law `{other}`"))),
        }
    }
}

/// Anything that yields partial quotients one at a time.
pub trait DigitSource {
    fn next_digit(&mut self) -> Result<u64, CfError>;

    fn skip_digits(&mut self, k: u64) -> Result<(), CfError> {
        for _ in 0..k {
            self.next_digit()?;
        }
        Ok(())
    }
}

/// A fixed digit list, handy for tests and replay.
#[derive(Clone, Debug)]
pub struct FiniteDigits {
    digits: Vec<u64>,
    pos: usize,
}

impl FiniteDigits {
    pub fn new(digits: Vec<u64>) -> Self {
        Self { digits, pos: 0 }
    }
}

impl DigitSource for FiniteDigits {
    fn next_digit(&mut self) -> Result<u64, CfError> {
        let d = *self.digits.get(self.pos).ok_or(CfError::Exhausted(self.pos as u64))?;
        self.pos += 1;
        Ok(d)
    }
}

#[derive(Clone, Debug)]
struct Chain {
    rng: ChaCha8Rng,
    s: f64,
    history: VecDeque<u64>,
    origin: Option<DyadicBox>,
    bit_budget: u64,
    audit: Option<Vec<DyadicBox>>,
    fallbacks: u64,
    exact_only: bool,
}

impl Chain {
    fn new(mut rng: ChaCha8Rng, law: Law, bit_budget: u64) -> Self {
        let origin = match law {
            Law::Lebesgue => None,
            Law::Gauss => Some(sample_gauss_box(&mut rng)),
        };
        let s = origin.as_ref().map_or(0.0, DyadicBox::midpoint_f64);
        Self {
            rng,
            s,
            history: VecDeque::with_capacity(HISTORY),
            origin,
            bit_budget,
            audit: None,
            fallbacks: 0,
            exact_only: false,
        }
    }

    fn next(&mut self, emitted: u64) -> Result<u64, CfError> {
        let m = self.rng.next_u64();
        let k = match self.fast(m) {
            Some(k) => {
                if let Some(a) = self.audit.as_mut() {
                    a.push(DyadicBox { num: BigUint::from(m), bits: 64 });
                }
                k
            }
            None => {
                self.fallbacks += 1;
                self.exact(m, emitted)?
            }
        };
        self.s = 1.0 / (k as f64 + self.s);
        if self.history.len() == HISTORY {
            self.history.pop_front();
        }
        self.history.push_back(k);
        Ok(k)
    }

    fn fast(&self, m: u64) -> Option<u64> {
        if m == 0 || self.exact_only {
            return None;
        }
        let s_lo = (self.s - S_ERR).max(0.0);
        let s_hi = (self.s + S_ERR).min(1.0);
        let u_lo = m as f64 * TWO_POW_M64;
        let u_hi = (m as f64 + 1.0) * TWO_POW_M64;
        let g_lo = ((1.0 + s_lo) / u_hi - s_lo) * (1.0 - REL);
        let g_hi = ((1.0 + s_hi) / u_lo - s_hi) * (1.0 + REL);
        if !(g_hi < FAST_LIMIT) {
            return None;
        }
        let k = g_lo.floor();
        if k >= 1.0 && g_lo > k && g_hi.floor() == k {
            Some(k as u64)
        } else {
            None
        }
    }

    /// Exact bounds for `s_n` using the last `look` digits.
    fn s_interval(&self, look: usize, emitted: u64) -> (BigRational, BigRational) {
        let (mut p2, mut p1) = (BigInt::one(), BigInt::zero());
        let (mut q2, mut q1) = (BigInt::zero(), BigInt::one());
        for &h in self.history.iter().rev().take(look) {
            let h = BigInt::from(h);
            let p = &h * &p1 + &p2;
            let q = &h * &q1 + &q2;
            p2 = std::mem::replace(&mut p1, p);
            q2 = std::mem::replace(&mut q1, q);
        }
        let at = |t: &BigRational| {
            BigRational::new(
                &p1 * t.denom() + &p2 * t.numer(),
                &q1 * t.denom() + &q2 * t.numer(),
            )
        };
        let (t_lo, t_hi) = if look as u64 == emitted {
            match &self.origin {
                None => (BigRational::zero(), BigRational::zero()),
                Some(b) => {
                    let scale = BigInt::one() << b.bits;
                    (
                        BigRational::new(BigInt::from(b.num.clone()), scale.clone()),
                        BigRational::new(BigInt::from(&b.num + 1u32), scale),
                    )
                }
            }
        } else {
            (BigRational::zero(), BigRational::one())
        };
        let (a, b) = (at(&t_lo), at(&t_hi));
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    fn exact(&mut self, m: u64, emitted: u64) -> Result<u64, CfError> {
        let mut u = DyadicBox { num: BigUint::from(m), bits: 64 };
        let avail = self.history.len();
        let mut look = avail.min(32);
        let one = BigRational::one();
        loop {
            let (s_lo, s_hi) = self.s_interval(look, emitted);
            if !u.num.is_zero() {
                let scale = BigInt::one() << u.bits;
                let u_lo = BigRational::new(BigInt::from(u.num.clone()), scale.clone());
                let u_hi = BigRational::new(BigInt::from(&u.num + 1u32), scale);
                let g_min = (&one + &s_lo) / &u_hi - &s_lo;
                let g_max = (&one + &s_hi) / &u_lo - &s_hi;
                let k = g_min.floor();
                if g_max.floor() == k && g_min > k {
                    let k = k.to_integer().to_u64().ok_or(CfError::DigitOverflow)?;
                    if let Some(a) = self.audit.as_mut() {
                        a.push(u);
                    }
                    return Ok(k);
                }
            }
            if u.bits >= self.bit_budget {
                return Err(CfError::BudgetExceeded { budget: self.bit_budget });
            }
            u.refine(&mut self.rng);
            if look < avail {
                look = (2 * look).min(avail);
            } else if look as u64 == emitted {
                if let Some(b) = self.origin.as_mut() {
                    b.refine(&mut self.rng);
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Engine {
    Chain(Box<Chain>),
    Transducer(Box<BitTransducer>),
}

/// Digits of a random real drawn from `law`, reproducible from `(seed, stream)`.
#[derive(Clone, Debug)]
pub struct RandomRealStream {
    seed: u64,
    stream: u64,
    law: Law,
    engine: Engine,
    emitted: u64,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl RandomRealStream {
    pub fn new(seed: u64, law: Law) -> Self {
        Self::with_stream(seed, 0, law)
    }

    /// Independent stream `stream` under the same master seed.
    pub fn with_stream(seed: u64, stream: u64, law: Law) -> Self {
        let chain = Chain::new(rng_for(seed, stream), law, DEFAULT_BIT_BUDGET);
        Self { seed, stream, law, engine: Engine::Chain(Box::new(chain)), emitted: 0 }
    }

    /// The bit-by-bit transducer engine. Exact, but the state grows with every
    /// input bit, so it only suits prefixes of a few thousand digits.
    pub fn transducer(seed: u64, stream: u64, law: Law, bit_budget: u64) -> Self {
        let t = BitTransducer::new(rng_for(seed, stream), law, bit_budget);
        Self { seed, stream, law, engine: Engine::Transducer(Box::new(t)), emitted: 0 }
    }

    /// Records the uniform box behind each digit so it can be re-verified.
    pub fn with_audit(mut self) -> Self {
        if let Engine::Chain(c) = &mut self.engine {
            c.audit = Some(Vec::new());
        }
        self
    }

    /// Decides every digit with exact rationals. Slow; used to cross-check the fast path.
    pub fn exact_only(mut self) -> Self {
        if let Engine::Chain(c) = &mut self.engine {
            c.exact_only = true;
        }
        self
    }

    pub fn with_bit_budget(mut self, bits: u64) -> Self {
        if let Engine::Chain(c) = &mut self.engine {
            c.bit_budget = bits;
        }
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn law(&self) -> Law {
        self.law
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Uniform boxes recorded since [`with_audit`](Self::with_audit).
    pub fn audit(&self) -> Option<&[DyadicBox]> {
        match &self.engine {
            Engine::Chain(c) => c.audit.as_deref(),
            Engine::Transducer(_) => None,
        }
    }

    /// The box holding the Gauss starting point `s_0`, if any.
    pub fn origin(&self) -> Option<&DyadicBox> {
        match &self.engine {
            Engine::Chain(c) => c.origin.as_ref(),
            Engine::Transducer(_) => None,
        }
    }

    /// Number of digits that needed exact rational arithmetic.
    pub fn exact_fallbacks(&self) -> u64 {
        match &self.engine {
            Engine::Chain(c) => c.fallbacks,
            Engine::Transducer(_) => 0,
        }
    }

    /// Drops the next `k` digits, continuing the same real.
    pub fn shifted(mut self, k: u64) -> Result<Self, CfError> {
        self.skip_digits(k)?;
        Ok(self)
    }
}

impl DigitSource for RandomRealStream {
    fn next_digit(&mut self) -> Result<u64, CfError> {
        let k = match &mut self.engine {
            Engine::Chain(c) => c.next(self.emitted)?,
            Engine::Transducer(t) => t.next_digit()?,
        };
        self.emitted += 1;
        Ok(k)
    }
}

impl Iterator for RandomRealStream {
    type Item = Result<u64, CfError>;
    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_digit())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn take(s: &mut RandomRealStream, n: usize) -> Vec<u64> {
        (0..n).map(|_| s.next_digit().unwrap()).collect()
    }

    #[test]
    fn reproducible_per_seed_and_stream() {
        let a = take(&mut RandomRealStream::with_stream(9, 3, Law::Gauss), 500);
        let b = take(&mut RandomRealStream::with_stream(9, 3, Law::Gauss), 500);
        let c = take(&mut RandomRealStream::with_stream(9, 4, Law::Gauss), 500);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn shift_continues_the_same_real() {
        let full = take(&mut RandomRealStream::new(2, Law::Lebesgue), 50);
        let mut tail = RandomRealStream::new(2, Law::Lebesgue).shifted(20).unwrap();
        assert_eq!(take(&mut tail, 30), full[20..]);
    }

    #[test]
    fn first_digit_one_has_gauss_probability() {
        let n = 20_000;
        let ones = (0..n)
            .filter(|&i| RandomRealStream::with_stream(1, i, Law::Gauss).next_digit().unwrap() == 1)
            .count();
        let p = (4.0f64 / 3.0).log2();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((ones as f64 / n as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn tiny_budget_forces_error_on_fallback() {
        let mut s = RandomRealStream::new(0, Law::Lebesgue).with_bit_budget(64);
        for _ in 0..10_000 {
            match s.next_digit() {
                Ok(_) => {}
                Err(e) => {
                    assert_eq!(e, CfError::BudgetExceeded { budget: 64 });
                    return;
                }
            }
        }
    }

    #[test]
    fn exact_path_agrees_with_fast_path() {
        for law in [Law::Lebesgue, Law::Gauss] {
            let fast = take(&mut RandomRealStream::with_stream(11, 0, law), 300);
            let mut e = RandomRealStream::with_stream(11, 0, law).exact_only();
            assert_eq!(take(&mut e, 300), fast);
            assert_eq!(e.exact_fallbacks(), 300);
        }
    }

    #[test]
    fn finite_digits_run_out() {
        let mut f = FiniteDigits::new(vec![1, 2]);
        assert_eq!(f.next_digit(), Ok(1));
        assert_eq!(f.next_digit(), Ok(2));
        assert_eq!(f.next_digit(), Err(CfError::Exhausted(2)));
    }
}
