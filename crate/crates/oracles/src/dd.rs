//! Double-double arithmetic (~31 significant digits).
//!
//! A value is an unevaluated sum hi + lo with |lo| <= ulp(hi)/2. Enough
//! precision to re-evaluate the subsampling bound far beyond f64 so the
//! log-space production path can be checked to 1e-10 relative error.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    /// ln(2) to double-double precision.
    pub const LN2: Dd = Dd {
        hi: std::f64::consts::LN_2,
        lo: 2.3190468138462996e-17,
    };

    pub fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    pub fn sub(self, other: Dd) -> Dd {
        self.add(Dd {
            hi: -other.hi,
            lo: -other.lo,
        })
    }

    pub fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div(self, other: Dd) -> Dd {
        let q1 = self.hi / other.hi;
        let r = self.sub(other.mul(Dd::from(q1)));
        let q2 = r.hi / other.hi;
        let r = r.sub(other.mul(Dd::from(q2)));
        let q3 = r.hi / other.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::from(q3))
    }

    pub fn scale(self, k: f64) -> Dd {
        self.mul(Dd::from(k))
    }

    pub fn powi(self, mut n: u32) -> Dd {
        let mut base = self;
        let mut acc = Dd::ONE;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            n >>= 1;
        }
        acc
    }

    /// exp via 2^k * exp(r) with |r| <= ln2/2, r further halved 16 times
    /// before a Taylor series, then squared back.
    pub fn exp(self) -> Dd {
        if self.hi < -700.0 {
            return Dd::ZERO;
        }
        let k = (self.hi / std::f64::consts::LN_2).round();
        let r = self.sub(Dd::LN2.scale(k));
        const HALVINGS: u32 = 16;
        let r = r.scale(1.0 / (1u64 << HALVINGS) as f64);
        // Taylor: with |r| <= ~5.3e-6, ten terms reach ~1e-60.
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for i in 1..=10u32 {
            term = term.mul(r).scale(1.0 / i as f64);
            sum = sum.add(term);
        }
        let mut e = sum;
        for _ in 0..HALVINGS {
            e = e.mul(e);
        }
        // scale by 2^k exactly
        let p = 2f64.powi(k as i32);
        e.scale(p)
    }

    /// ln via Newton iteration on exp, seeded with the f64 log.
    pub fn ln(self) -> Dd {
        assert!(self.hi > 0.0, "ln of nonpositive double-double");
        let mut y = Dd::from(self.hi.ln());
        for _ in 0..3 {
            // y <- y + x * exp(-y) - 1
            let e = Dd {
                hi: -y.hi,
                lo: -y.lo,
            }
            .exp();
            y = y.add(self.mul(e)).sub(Dd::ONE);
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_ln_round_trip() {
        for &x in &[1e-8, 0.1, 1.0, 2.5, 10.0, 123.456] {
            let d = Dd::from(x);
            let back = d.ln().exp().to_f64();
            assert!((back - x).abs() <= 1e-15 * x, "{x} -> {back}");
        }
    }

    #[test]
    fn exp_matches_f64_beyond_its_precision() {
        // exp(1) to 30+ digits: 2.718281828459045235360287471352...
        let e = Dd::ONE.exp();
        assert!((e.hi - std::f64::consts::E).abs() < 1e-15);
        let tail = e.to_f64() - e.hi;
        // the lo word must carry the next digits, not junk
        assert!((e.lo - 1.4456468917292502e-16).abs() < 1e-22, "lo = {}", e.lo);
        let _ = tail;
    }

    #[test]
    fn mul_keeps_cross_terms() {
        let a = Dd::from(1.0).add(Dd::from(1e-20));
        let sq = a.mul(a);
        // (1 + 1e-20)^2 = 1 + 2e-20 + 1e-40
        assert_eq!(sq.hi, 1.0);
        assert!((sq.lo - 2e-20).abs() < 1e-30);
    }
}
