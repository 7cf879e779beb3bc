//! Error-free transformations and a minimal double-double type.
//!
//! Only what the circle arithmetic needs: exact sums and products of two
//! doubles, a normalized `hi + lo` pair, and reduction modulo 1.

/// Knuth's two-sum: `a + b == s + e` exactly.
#[inline(always)]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Dekker's fast two-sum, valid when `|a| >= |b|`.
#[inline(always)]
pub fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

/// `a * b == p + e` exactly (requires hardware FMA semantics of `mul_add`).
#[inline(always)]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };

    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        DoubleDouble { hi, lo }
    }

    pub fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, other: DoubleDouble) -> Self {
        let (s, e) = two_sum(self.hi, other.hi);
        let (t, f) = two_sum(self.lo, other.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DoubleDouble { hi, lo }
    }

    pub fn add_f64(self, b: f64) -> Self {
        let (s, e) = two_sum(self.hi, b);
        let (hi, lo) = quick_two_sum(s, e + self.lo);
        DoubleDouble { hi, lo }
    }

    pub fn neg(self) -> Self {
        DoubleDouble { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, other: DoubleDouble) -> Self {
        self.add(other.neg())
    }

    pub fn mul(self, other: DoubleDouble) -> Self {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + (self.hi * other.lo + self.lo * other.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }

    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        DoubleDouble { hi, lo }
    }

    pub fn div(self, other: DoubleDouble) -> Self {
        let q1 = self.hi / other.hi;
        let r = self.sub(other.mul_f64(q1));
        let q2 = r.hi / other.hi;
        let r = r.sub(other.mul_f64(q2));
        let q3 = r.hi / other.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DoubleDouble { hi, lo }.add_f64(q3)
    }

    pub fn recip(self) -> Self {
        DoubleDouble::from_f64(1.0).div(self)
    }

    pub fn floor(self) -> Self {
        let f = self.hi.floor();
        if f == self.hi {
            DoubleDouble::new(f, self.lo.floor())
        } else {
            DoubleDouble { hi: f, lo: 0.0 }
        }
    }

    /// Fractional part in `[0, 1)`.
    pub fn frac(self) -> Self {
        let r = self.sub(self.floor());
        if r.hi < 0.0 {
            r.add_f64(1.0)
        } else {
            r
        }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return DoubleDouble::ZERO;
        }
        let s = self.hi.sqrt();
        // one Newton correction: s + (x - s^2) / (2s)
        let (sq, sq_err) = two_prod(s, s);
        let resid = ((self.hi - sq) - sq_err) + self.lo;
        DoubleDouble::new(s, resid / (2.0 * s))
    }

    /// Parses a plain decimal literal (`[-]digits[.digits]`) to ~32 digits.
    pub fn parse_decimal(text: &str) -> Option<Self> {
        let text = text.trim();
        let (negative, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text.strip_prefix('+').unwrap_or(text)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return None;
        }
        let mut acc = DoubleDouble::ZERO;
        for c in int_part.chars() {
            acc = acc.mul_f64(10.0).add_f64(f64::from(c as u8 - b'0'));
        }
        let mut scale = DoubleDouble::from_f64(1.0);
        for c in frac_part.chars().take(40) {
            acc = acc.mul_f64(10.0).add_f64(f64::from(c as u8 - b'0'));
            scale = scale.mul_f64(10.0);
        }
        let value = acc.div(scale);
        Some(if negative { value.neg() } else { value })
    }
}
