use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::CfError;

/// A finite sequence of partial quotients, every entry at least 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct DigitSequence(Vec<u64>);

impl DigitSequence {
    pub fn new(digits: Vec<u64>) -> Result<Self, CfError> {
        if digits.iter().any(|&d| d == 0) {
            return Err(CfError::Domain("digits must be positive".into()));
        }
        Ok(Self(digits))
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<u64> {
        self.0
    }

    /// Canonical finite expansions end in a digit of at least 2, except `[1]` which is 1.
    pub fn is_canonical(&self) -> bool {
        match self.0.last() {
            None => true,
            Some(&last) => last >= 2 || self.0.len() == 1,
        }
    }

    /// Drops the first `k` digits.
    pub fn shift(&self, k: usize) -> Result<Self, CfError> {
        if k > self.0.len() {
            return Err(CfError::Domain(format!(
                "cannot shift {} digits off a sequence of length {}",
                k,
                self.0.len()
            )));
        }
        Ok(Self(self.0[k..].to_vec()))
    }

    /// The rational `[0; a1, ..., an]`.
    pub fn value(&self) -> BigRational {
        match convergents(self).last() {
            Some(c) => BigRational::new(c.p.clone(), c.q.clone()),
            None => BigRational::zero(),
        }
    }
}

/// The convergent `p_k / q_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Convergent {
    pub p: BigInt,
    pub q: BigInt,
}

/// Expands `numerator / denominator` in `(0, 1)` using at most `max_digits` digits.
///
/// The expansion is canonical: a terminating expansion never ends in 1 unless it is `[1]`.
pub fn expand_rational(
    numerator: &BigInt,
    denominator: &BigInt,
    max_digits: usize,
) -> Result<DigitSequence, CfError> {
    if denominator.sign() != Sign::Plus || numerator.sign() != Sign::Plus {
        return Err(CfError::Domain("expected 0 < p/q".into()));
    }
    if numerator > denominator {
        return Err(CfError::Domain("expected p/q <= 1".into()));
    }
    let mut digits = Vec::new();
    let (mut p, mut q) = (numerator.clone(), denominator.clone());
    while !p.is_zero() && digits.len() < max_digits {
        let (a, r) = q.div_rem(&p);
        digits.push(a.to_u64().ok_or(CfError::DigitOverflow)?);
        q = p;
        p = r;
    }
    Ok(DigitSequence(digits))
}

/// Convergents `p_k/q_k` for `k = 1..=n`, using `p_{-1}=1, p_0=0, q_{-1}=0, q_0=1`.
pub fn convergents(digits: &DigitSequence) -> Vec<Convergent> {
    let (mut p2, mut p1) = (BigInt::one(), BigInt::zero());
    let (mut q2, mut q1) = (BigInt::zero(), BigInt::one());
    let mut out = Vec::with_capacity(digits.len());
    for &a in digits.as_slice() {
        let a = BigInt::from(a);
        let p = &a * &p1 + &p2;
        let q = &a * &q1 + &q2;
        p2 = std::mem::replace(&mut p1, p.clone());
        q2 = std::mem::replace(&mut q1, q.clone());
        out.push(Convergent { p, q });
    }
    out
}

/// The cylinder `I(a1..an)`: all points whose first `n` digits are `a1..an`.
///
/// The endpoint `p_n/q_n` is included and `(p_n+p_{n-1})/(q_n+q_{n-1})` is excluded.
/// For odd `n` the included endpoint is the right one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CylinderInterval {
    pub digits: DigitSequence,
    pub lo: BigRational,
    pub hi: BigRational,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl CylinderInterval {
    pub fn length(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn is_odd(&self) -> bool {
        self.digits.len() % 2 == 1
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        let above = if self.lo_closed { x >= &self.lo } else { x > &self.lo };
        let below = if self.hi_closed { x <= &self.hi } else { x < &self.hi };
        above && below
    }

    /// Strict interior membership.
    pub fn interior_contains(&self, x: &BigRational) -> bool {
        x > &self.lo && x < &self.hi
    }
}

pub fn cylinder(digits: &DigitSequence) -> Result<CylinderInterval, CfError> {
    if digits.is_empty() {
        return Err(CfError::Domain("cylinder needs at least one digit".into()));
    }
    let conv = convergents(digits);
    let n = conv.len();
    let last = &conv[n - 1];
    let (pp, qp) = if n >= 2 {
        (conv[n - 2].p.clone(), conv[n - 2].q.clone())
    } else {
        (BigInt::zero(), BigInt::one())
    };
    let included = BigRational::new(last.p.clone(), last.q.clone());
    let excluded = BigRational::new(&last.p + pp, &last.q + qp);
    let odd = n % 2 == 1;
    let (lo, hi) = if odd { (excluded, included) } else { (included, excluded) };
    Ok(CylinderInterval {
        digits: digits.clone(),
        lo,
        hi,
        lo_closed: !odd,
        hi_closed: odd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[u64]) -> DigitSequence {
        DigitSequence::new(v.to_vec()).unwrap()
    }

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn expands_small_rationals() {
        let d = expand_rational(&BigInt::from(3), &BigInt::from(7), 10).unwrap();
        assert_eq!(d.as_slice(), &[2, 3]);
        let d = expand_rational(&BigInt::from(1), &BigInt::from(1), 10).unwrap();
        assert_eq!(d.as_slice(), &[1]);
        assert!(expand_rational(&BigInt::from(0), &BigInt::from(1), 10).is_err());
        assert!(expand_rational(&BigInt::from(5), &BigInt::from(4), 10).is_err());
    }

    #[test]
    fn truncates_at_max_digits() {
        let d = expand_rational(&BigInt::from(13), &BigInt::from(21), 3).unwrap();
        assert_eq!(d.as_slice(), &[1, 1, 1]);
    }

    #[test]
    fn cylinder_of_one_digit() {
        let c = cylinder(&seq(&[1])).unwrap();
        assert_eq!((c.lo.clone(), c.hi.clone()), (rat(1, 2), rat(1, 1)));
        assert!(!c.lo_closed && c.hi_closed);
    }

    #[test]
    fn cylinder_of_two_digits() {
        let c = cylinder(&seq(&[1, 1])).unwrap();
        assert_eq!((c.lo.clone(), c.hi.clone()), (rat(1, 2), rat(2, 3)));
        assert!(c.lo_closed && !c.hi_closed);
        let c = cylinder(&seq(&[3, 2])).unwrap();
        assert_eq!((c.lo.clone(), c.hi.clone()), (rat(2, 7), rat(3, 10)));
    }

    #[test]
    fn value_and_shift() {
        let s = seq(&[2, 3, 4]);
        assert_eq!(s.value(), rat(13, 30));
        assert_eq!(s.shift(1).unwrap().as_slice(), &[3, 4]);
        assert!(s.shift(4).is_err());
        assert!(DigitSequence::new(vec![1, 0]).is_err());
    }
}
