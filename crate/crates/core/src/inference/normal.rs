//! Standard normal tail masses in log space.

use libm::{erf, erfc};
use std::f64::consts::{LN_2, SQRT_2};

/// `ln(1 / sqrt(2 pi))`
const LN_INV_SQRT_2PI: f64 = -0.918_938_533_204_672_8;

/// Log density of the standard normal.
#[inline]
pub fn log_phi(x: f64) -> f64 {
    LN_INV_SQRT_2PI - 0.5 * x * x
}

/// `ln P(N(0,1) > x)`.
pub fn log_upper_tail(x: f64) -> f64 {
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x < 30.0 {
        if x < -1.0 {
            // the tail is near one; ln(1 - lower tail) keeps precision
            return (-0.5 * erfc(-x / SQRT_2)).ln_1p();
        }
        return (0.5 * erfc(x / SQRT_2)).ln();
    }
    // Mills ratio Q(x) / phi(x) by its continued fraction (modified Lentz)
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut dd = 0.0;
    for k in 1..200 {
        let ak = k as f64;
        dd = x + ak * dd;
        if dd.abs() < tiny {
            dd = tiny;
        }
        c = x + ak / c;
        if c.abs() < tiny {
            c = tiny;
        }
        dd = 1.0 / dd;
        let delta = c * dd;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    log_phi(x) - f.ln()
}

/// 20-point Gauss-Legendre nodes and weights on `[-1, 1]` (positive half).
const GL_X: [f64; 10] = [
    0.076_526_521_133_497_33,
    0.227_785_851_141_645_08,
    0.373_706_088_715_419_55,
    0.510_867_001_950_827_1,
    0.636_053_680_726_515,
    0.746_331_906_460_150_8,
    0.839_116_971_822_218_8,
    0.912_234_428_251_326,
    0.963_971_927_277_913_8,
    0.993_128_599_185_094_9,
];
const GL_W: [f64; 10] = [
    0.152_753_387_130_725_85,
    0.149_172_986_472_603_75,
    0.142_096_109_318_382_05,
    0.131_688_638_449_176_63,
    0.118_194_531_961_518_42,
    0.101_930_119_817_240_44,
    0.083_276_741_576_704_75,
    0.062_672_048_334_109_06,
    0.040_601_429_800_386_94,
    0.017_614_007_139_152_118,
];

/// `ln` of the standard normal mass of `[lo, hi]`, `lo <= hi`.
pub fn log_mass(lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi);
    if lo == hi {
        return f64::NEG_INFINITY;
    }
    if hi <= 0.0 {
        return log_mass(-hi, -lo);
    }
    if lo < 0.0 {
        // straddles zero: both pieces are at most one half, no cancellation
        let m = 0.5 * (erf(hi / SQRT_2) + erf(-lo / SQRT_2));
        return m.ln();
    }
    // 0 <= lo < hi
    let w = hi - lo;
    if hi.is_finite() && w * hi < 1.0 {
        // narrow: integrate phi(x) / phi(lo) directly
        let (c, h) = (0.5 * (lo + hi), 0.5 * w);
        let mut s = 0.0;
        for (x, wt) in GL_X.iter().zip(GL_W) {
            for t in [c - h * x, c + h * x] {
                s += wt * (-0.5 * (t - lo) * (t + lo)).exp();
            }
        }
        return log_phi(lo) + (s * h).ln();
    }
    let ql = log_upper_tail(lo);
    if ql == f64::NEG_INFINITY {
        return ql;
    }
    let qh = log_upper_tail(hi);
    ql + (-(qh - ql).exp_m1()).ln()
}

/// Log-sum-exp of values, summed largest first.
pub fn log_sum(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| b.total_cmp(a));
    let Some(&top) = values.first() else {
        return f64::NEG_INFINITY;
    };
    if top == f64::NEG_INFINITY {
        return top;
    }
    let s: f64 = values.iter().map(|v| (v - top).exp()).sum();
    top + s.ln()
}

/// Two-sided normal p-value `P(|N(0,1)| >= |x|)`, in log space.
pub fn log_two_sided(x: f64) -> f64 {
    LN_2 + log_upper_tail(x.abs())
}
