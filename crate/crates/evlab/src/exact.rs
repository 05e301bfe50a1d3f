//! Exact rational arithmetic helpers and circle interval-set arithmetic.
//!
//! Everything that feeds a classification or an exact measure computation goes
//! through `Rat` (arbitrary-precision rationals) or `CircleSet` (finite unions
//! of half-open intervals on the circle [0,1)). Floating point only appears at
//! the reporting boundary.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::str::FromStr;

pub type Rat = BigRational;

/// Parse a rational from "p/q" or a plain integer string "p".
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n = BigInt::from_str(num.trim()).map_err(|e| format!("bad numerator {num:?}: {e}"))?;
        let d = BigInt::from_str(den.trim()).map_err(|e| format!("bad denominator {den:?}: {e}"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in {s:?}"));
        }
        Ok(Rat::new(n, d))
    } else {
        let n = BigInt::from_str(s).map_err(|e| format!("bad rational {s:?}: {e}"))?;
        Ok(Rat::from_integer(n))
    }
}

/// Render as "p/q" (or "p" for integers); inverse of `parse_rat`.
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Reduce into [0, 1) (fractional part; works for negative values too).
pub fn frac(r: &Rat) -> Rat {
    let f = r.fract();
    if f.is_negative() {
        f + Rat::one()
    } else {
        f
    }
}

/// Circle distance min(|x−y|, 1−|x−y|) for x, y in [0,1).
pub fn circle_dist(x: &Rat, y: &Rat) -> Rat {
    let d = (x - y).abs();
    let alt = Rat::one() - &d;
    if d <= alt {
        d
    } else {
        alt
    }
}

/// A finite union of disjoint half-open intervals [lo, hi) with
/// 0 <= lo < hi <= 1, sorted by lo. Represents a subset of the circle.
#[derive(Clone, Debug, PartialEq)]
pub struct CircleSet {
    pieces: Vec<(Rat, Rat)>,
}

impl CircleSet {
    pub fn empty() -> Self {
        CircleSet { pieces: Vec::new() }
    }

    pub fn full() -> Self {
        CircleSet {
            pieces: vec![(Rat::zero(), Rat::one())],
        }
    }

    /// Build from raw (lo, hi) pairs in circle coordinates; hi − lo may
    /// exceed 1 (full circle) and the interval may straddle 0.
    pub fn from_interval(lo: &Rat, hi: &Rat) -> Self {
        if hi <= lo {
            return CircleSet::empty();
        }
        if hi - lo >= Rat::one() {
            return CircleSet::full();
        }
        let l = frac(lo);
        let h = &l + (hi - lo);
        let mut pieces = Vec::new();
        if h <= Rat::one() {
            pieces.push((l, h));
        } else {
            pieces.push((Rat::zero(), &h - Rat::one()));
            pieces.push((l, Rat::one()));
        }
        let mut s = CircleSet { pieces };
        s.normalize();
        s
    }

    /// Metric ball B_r(c) on the circle as a set; r >= 1/2 gives the whole circle.
    pub fn ball(center: &Rat, radius: &Rat) -> Self {
        CircleSet::from_interval(&(center - radius), &(center + radius))
    }

    fn normalize(&mut self) {
        self.pieces.retain(|(a, b)| b > a);
        self.pieces.sort();
        let mut merged: Vec<(Rat, Rat)> = Vec::with_capacity(self.pieces.len());
        for (a, b) in self.pieces.drain(..) {
            match merged.last_mut() {
                Some((_, pb)) if *pb >= a => {
                    if b > *pb {
                        *pb = b;
                    }
                }
                _ => merged.push((a, b)),
            }
        }
        self.pieces = merged;
    }

    pub fn pieces(&self) -> &[(Rat, Rat)] {
        &self.pieces
    }

    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn measure(&self) -> Rat {
        self.pieces
            .iter()
            .fold(Rat::zero(), |acc, (a, b)| acc + (b - a))
    }

    pub fn contains(&self, x: &Rat) -> bool {
        self.pieces.iter().any(|(a, b)| a <= x && x < b)
    }

    pub fn union(&self, other: &CircleSet) -> CircleSet {
        let mut pieces = self.pieces.clone();
        pieces.extend(other.pieces.iter().cloned());
        let mut s = CircleSet { pieces };
        s.normalize();
        s
    }

    pub fn intersect(&self, other: &CircleSet) -> CircleSet {
        let mut pieces = Vec::new();
        for (a, b) in &self.pieces {
            for (c, d) in &other.pieces {
                let lo = if a > c { a.clone() } else { c.clone() };
                let hi = if b < d { b.clone() } else { d.clone() };
                if hi > lo {
                    pieces.push((lo, hi));
                }
            }
        }
        let mut s = CircleSet { pieces };
        s.normalize();
        s
    }

    pub fn subtract(&self, other: &CircleSet) -> CircleSet {
        let mut pieces = Vec::new();
        for (a, b) in &self.pieces {
            let mut cur = a.clone();
            for (c, d) in &other.pieces {
                if d <= &cur || c >= b {
                    continue;
                }
                if c > &cur {
                    pieces.push((cur.clone(), c.clone()));
                }
                if d > &cur {
                    cur = d.clone();
                }
                if &cur >= b {
                    break;
                }
            }
            if &cur < b {
                pieces.push((cur, b.clone()));
            }
        }
        let mut s = CircleSet { pieces };
        s.normalize();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_roundtrip() {
        for s in ["1/3", "0", "7", "-2/5", "613/1000"] {
            let r = parse_rat(s).unwrap();
            assert_eq!(parse_rat(&format_rat(&r)).unwrap(), r);
        }
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("x").is_err());
    }

    #[test]
    fn frac_reduces_into_unit_interval() {
        assert_eq!(frac(&rat(7, 3)), rat(1, 3));
        assert_eq!(frac(&rat(-1, 3)), rat(2, 3));
        assert_eq!(frac(&rat(2, 1)), rat(0, 1));
    }

    #[test]
    fn circle_distance_wraps() {
        assert_eq!(circle_dist(&rat(1, 10), &rat(9, 10)), rat(1, 5));
        assert_eq!(circle_dist(&rat(1, 3), &rat(0, 1)), rat(1, 3));
        assert_eq!(circle_dist(&rat(2, 3), &rat(0, 1)), rat(1, 3));
    }

    #[test]
    fn ball_straddles_zero() {
        let b = CircleSet::ball(&rat(0, 1), &rat(1, 10));
        assert_eq!(b.piece_count(), 2);
        assert_eq!(b.measure(), rat(1, 5));
        assert!(b.contains(&rat(19, 20)));
        assert!(b.contains(&rat(1, 20)));
        assert!(!b.contains(&rat(1, 2)));
    }

    #[test]
    fn set_algebra() {
        let a = CircleSet::from_interval(&rat(0, 1), &rat(1, 2));
        let b = CircleSet::from_interval(&rat(1, 4), &rat(3, 4));
        assert_eq!(a.intersect(&b).measure(), rat(1, 4));
        assert_eq!(a.union(&b).measure(), rat(3, 4));
        assert_eq!(a.subtract(&b).measure(), rat(1, 4));
        assert_eq!(a.subtract(&a), CircleSet::empty());
        let full = a.union(&a.complement_helper());
        assert_eq!(full.measure(), Rat::one());
    }

    impl CircleSet {
        fn complement_helper(&self) -> CircleSet {
            CircleSet::full().subtract(self)
        }
    }
}
