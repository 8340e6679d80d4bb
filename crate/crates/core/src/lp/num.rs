//! Exact rationals that stay on machine words until an operation overflows.

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, Signed, ToPrimitive, Zero};

use crate::poly::Rational;

#[derive(Clone, Debug)]
pub(crate) enum Q {
    Small(Ratio<i128>),
    Big(Rational),
}

impl Q {
    pub(crate) fn zero() -> Q {
        Q::Small(Ratio::zero())
    }

    pub(crate) fn from_rational(r: &Rational) -> Q {
        match (r.numer().to_i128(), r.denom().to_i128()) {
            (Some(n), Some(d)) if n != i128::MIN => Q::Small(Ratio::new_raw(n, d)),
            _ => Q::Big(r.clone()),
        }
    }

    pub(crate) fn to_rational(&self) -> Rational {
        match self {
            Q::Small(r) => Rational::new_raw((*r.numer()).into(), (*r.denom()).into()),
            Q::Big(r) => r.clone(),
        }
    }

    fn demote(r: Rational) -> Q {
        Q::from_rational(&r)
    }

    fn small_or_big(
        a: &Q,
        b: &Q,
        small: impl Fn(&Ratio<i128>, &Ratio<i128>) -> Option<Ratio<i128>>,
        big: impl Fn(Rational, Rational) -> Rational,
    ) -> Q {
        if let (Q::Small(x), Q::Small(y)) = (a, b) {
            if let Some(r) = small(x, y) {
                if *r.numer() != i128::MIN {
                    return Q::Small(r);
                }
            }
        }
        Q::demote(big(a.to_rational(), b.to_rational()))
    }

    pub(crate) fn is_zero(&self) -> bool {
        match self {
            Q::Small(r) => r.is_zero(),
            Q::Big(r) => r.is_zero(),
        }
    }

    pub(crate) fn is_one(&self) -> bool {
        match self {
            Q::Small(r) => r.is_one(),
            Q::Big(r) => r.is_one(),
        }
    }

    pub(crate) fn is_positive(&self) -> bool {
        match self {
            Q::Small(r) => r.is_positive(),
            Q::Big(r) => r.is_positive(),
        }
    }

    pub(crate) fn is_negative(&self) -> bool {
        match self {
            Q::Small(r) => r.is_negative(),
            Q::Big(r) => r.is_negative(),
        }
    }
}

impl PartialEq for Q {
    fn eq(&self, other: &Q) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Q {}

impl PartialOrd for Q {
    fn partial_cmp(&self, other: &Q) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Q {
    fn cmp(&self, other: &Q) -> Ordering {
        match (self, other) {
            (Q::Small(a), Q::Small(b)) => a.cmp(b),
            _ => self.to_rational().cmp(&other.to_rational()),
        }
    }
}

impl Add for &Q {
    type Output = Q;
    fn add(self, o: &Q) -> Q {
        Q::small_or_big(self, o, |a, b| a.checked_add(b), |a, b| a + b)
    }
}

impl Sub for &Q {
    type Output = Q;
    fn sub(self, o: &Q) -> Q {
        Q::small_or_big(self, o, |a, b| a.checked_sub(b), |a, b| a - b)
    }
}

impl Mul for &Q {
    type Output = Q;
    fn mul(self, o: &Q) -> Q {
        Q::small_or_big(self, o, |a, b| a.checked_mul(b), |a, b| a * b)
    }
}

impl Div for &Q {
    type Output = Q;
    fn div(self, o: &Q) -> Q {
        Q::small_or_big(self, o, |a, b| a.checked_div(b), |a, b| a / b)
    }
}

impl Neg for &Q {
    type Output = Q;
    fn neg(self) -> Q {
        match self {
            // i128::MIN never occurs as a small numerator.
            Q::Small(r) => Q::Small(-r),
            Q::Big(r) => Q::demote(-r),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i128, d: i128) -> Q {
        Q::from_rational(&Rational::new(n.into(), d.into()))
    }

    #[test]
    fn overflow_promotes() {
        let big = q(i128::MAX, 1);
        let s = &big + &big;
        assert!(matches!(s, Q::Big(_)));
        assert_eq!(s.to_rational(), Rational::from_integer(i128::MAX.into()) * Rational::from_integer(2.into()));
        let back = &s - &big;
        assert!(matches!(back, Q::Small(_)));
        assert_eq!(back, big);
    }

    proptest! {
        #[test]
        fn agrees_with_bigint(a in any::<i64>(), b in 1i64..i64::MAX, c in any::<i64>(), d in 1i64..i64::MAX) {
            let (x, y) = (Rational::new(a.into(), b.into()), Rational::new(c.into(), d.into()));
            let (qx, qy) = (Q::from_rational(&x), Q::from_rational(&y));
            prop_assert_eq!((&qx + &qy).to_rational(), &x + &y);
            prop_assert_eq!((&qx - &qy).to_rational(), &x - &y);
            prop_assert_eq!((&qx * &qy).to_rational(), &x * &y);
            prop_assert_eq!((-&qx).to_rational(), -x.clone());
            prop_assert_eq!(qx.cmp(&qy), x.cmp(&y));
            if !y.is_zero() {
                prop_assert_eq!((&qx / &qy).to_rational(), &x / &y);
            }
        }
    }
}
