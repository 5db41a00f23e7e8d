//! Small numerical kernels shared across modules.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::sync::OnceLock;

use statrs::function::erf;

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        1.0
    } else if z == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erf::erfc(-z * FRAC_1_SQRT_2)
    }
}

/// `ln Φ(z)`, accurate far into the lower tail.
pub fn ln_norm_cdf(z: f64) -> f64 {
    if z > -30.0 {
        return norm_cdf(z).ln();
    }
    // Asymptotic expansion of the Mills ratio.
    let z2 = z * z;
    let mut term = 1.0;
    let mut series = 1.0;
    for k in 1..8 {
        term *= -((2 * k - 1) as f64) / z2;
        series += term;
    }
    -0.5 * z2 - (-z * (2.0 * PI).sqrt()).ln() + series.ln()
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        -SQRT_2 * erf::erfc_inv(2.0 * p)
    }
}

pub fn norm_ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - 0.5 * (2.0 * PI).ln()
}

/// Student-t CDF with `dof` degrees of freedom.
pub fn student_t_cdf(t: f64, dof: f64) -> f64 {
    if t == f64::INFINITY {
        return 1.0;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    if dof == 1.0 {
        return 0.5 + t.atan() / PI;
    }
    let x = dof / (dof + t * t);
    let tail = 0.5 * statrs::function::beta::beta_reg(0.5 * dof, 0.5, x);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Bivariate standard normal probability `P(X ≤ h, Y ≤ k)` with correlation
/// `r` (Drezner–Wesolowsky with Genz's refinements, ~1e-15 accuracy).
pub fn bvn_cdf(h: f64, k: f64, r: f64) -> f64 {
    bvn_upper(-h, -k, r)
}

/// `P(X > h, Y > k)` for the bivariate standard normal with correlation `r`.
fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY {
            1.0
        } else {
            norm_cdf(-k)
        };
    }
    if k == f64::NEG_INFINITY {
        return norm_cdf(-h);
    }
    if r == 0.0 {
        return norm_cdf(-h) * norm_cdf(-k);
    }
    const W6: [f64; 3] = [0.1713244923791705, 0.3607615730481384, 0.4679139345726904];
    const X6: [f64; 3] = [0.9324695142031522, 0.6612093864662647, 0.238619186083197];
    const W12: [f64; 6] = [
        0.04717533638651177,
        0.1069393259953183,
        0.1600783285433464,
        0.2031674267230659,
        0.2334925365383547,
        0.2491470458134029,
    ];
    const X12: [f64; 6] = [
        0.9815606342467191,
        0.904117256370475,
        0.769902674194305,
        0.5873179542866171,
        0.3678314989981802,
        0.1252334085114692,
    ];
    const W20: [f64; 10] = [
        0.01761400713915212,
        0.04060142980038694,
        0.06267204833410906,
        0.08327674157670475,
        0.1019301198172404,
        0.1181945319615184,
        0.1316886384491766,
        0.1420961093183821,
        0.1491729864726037,
        0.1527533871307259,
    ];
    const X20: [f64; 10] = [
        0.9931285991850949,
        0.9639719272779138,
        0.912234428251326,
        0.8391169718222188,
        0.7463319064601508,
        0.636053680726515,
        0.5108670019508271,
        0.3737060887154196,
        0.2277858511416451,
        0.07652652113349733,
    ];
    let (w, x): (&[f64], &[f64]) = if r.abs() < 0.3 {
        (&W6, &X6)
    } else if r.abs() < 0.75 {
        (&W12, &X12)
    } else {
        (&W20, &X20)
    };
    // Nodes mirrored onto [0, 2].
    let nodes = || {
        w.iter()
            .zip(x)
            .flat_map(|(&wi, &xi)| [(wi, 1.0 - xi), (wi, 1.0 + xi)])
    };
    let tp = 2.0 * PI;
    let mut hk = h * k;
    let bvn;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin() / 2.0;
        let mut acc = 0.0;
        for (wi, xi) in nodes() {
            let sn = (asr * xi).sin();
            acc += wi * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
        }
        bvn = acc * asr / tp + norm_cdf(-h) * norm_cdf(-k);
    } else {
        let mut k = k;
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        let mut acc = 0.0;
        if r.abs() < 1.0 {
            let as_ = 1.0 - r * r;
            let mut a = as_.sqrt();
            let bs = (h - k) * (h - k);
            let asr = -(bs / as_ + hk) / 2.0;
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 80.0;
            if asr > -100.0 {
                acc = a * asr.exp() * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_);
            }
            if hk > -100.0 {
                let b = bs.sqrt();
                let sp = tp.sqrt() * norm_cdf(-b / a);
                acc -= (-hk / 2.0).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a /= 2.0;
            let mut quad = 0.0;
            for (wi, xi) in nodes() {
                let xs = (a * xi) * (a * xi);
                let asr = -(bs / xs + hk) / 2.0;
                if asr > -100.0 {
                    let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                    let rs = (1.0 - xs).sqrt();
                    let ep = (-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))).exp() / rs;
                    quad += wi * asr.exp() * (sp - ep);
                }
            }
            acc = (a * quad - acc) / tp;
        }
        if r > 0.0 {
            acc += norm_cdf(-h.max(k));
        } else if h >= k {
            acc = -acc;
        } else {
            let l = if h < 0.0 {
                norm_cdf(k) - norm_cdf(h)
            } else {
                norm_cdf(-h) - norm_cdf(-k)
            };
            acc = l - acc;
        }
        bvn = acc;
    }
    bvn.clamp(0.0, 1.0)
}

/// Bivariate standard Student-t probability `P(X ≤ h, Y ≤ k)` with integer
/// degrees of freedom `nu` and correlation `r` (Dunnett–Sobel recursion as
/// arranged by Genz).
pub fn bvt_cdf(nu: u32, h: f64, k: f64, r: f64) -> f64 {
    let nuf = nu as f64;
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    if h == f64::INFINITY {
        return student_t_cdf(k, nuf);
    }
    if k == f64::INFINITY {
        return student_t_cdf(h, nuf);
    }
    const EPS: f64 = 1e-15;
    if 1.0 - r <= EPS {
        return student_t_cdf(h.min(k), nuf);
    }
    if r + 1.0 <= EPS {
        return if h > -k {
            student_t_cdf(h, nuf) - student_t_cdf(-k, nuf)
        } else {
            0.0
        };
    }
    let tpi = 2.0 * PI;
    let ors = 1.0 - r * r;
    let hrk = h - r * k;
    let krh = k - r * h;
    let (xnhk, xnkh) = if hrk.abs() + ors > 0.0 {
        (
            hrk * hrk / (hrk * hrk + ors * (nuf + k * k)),
            krh * krh / (krh * krh + ors * (nuf + h * h)),
        )
    } else {
        (0.0, 0.0)
    };
    let hs = sign(h - r * k);
    let ks = sign(k - r * h);
    let mut bvt;
    if nu.is_multiple_of(2) {
        bvt = ors.sqrt().atan2(-r) / tpi;
        let mut gmph = h / (16.0 * (nuf + h * h)).sqrt();
        let mut gmpk = k / (16.0 * (nuf + k * k)).sqrt();
        let mut btnckh = 2.0 * xnkh.sqrt().atan2((1.0 - xnkh).sqrt()) / PI;
        let mut btpdkh = 2.0 * (xnkh * (1.0 - xnkh)).sqrt() / PI;
        let mut btnchk = 2.0 * xnhk.sqrt().atan2((1.0 - xnhk).sqrt()) / PI;
        let mut btpdhk = 2.0 * (xnhk * (1.0 - xnhk)).sqrt() / PI;
        for j in 1..=(nu / 2) {
            let jf = j as f64;
            bvt += gmph * (1.0 + ks * btnckh);
            bvt += gmpk * (1.0 + hs * btnchk);
            btnckh += btpdkh;
            btpdkh = 2.0 * jf * btpdkh * (1.0 - xnkh) / (2.0 * jf + 1.0);
            btnchk += btpdhk;
            btpdhk = 2.0 * jf * btpdhk * (1.0 - xnhk) / (2.0 * jf + 1.0);
            gmph = gmph * (2.0 * jf - 1.0) / (2.0 * jf * (1.0 + h * h / nuf));
            gmpk = gmpk * (2.0 * jf - 1.0) / (2.0 * jf * (1.0 + k * k / nuf));
        }
    } else {
        let qhrk = (h * h + k * k - 2.0 * r * h * k + nuf * ors).sqrt();
        let hkrn = h * k + r * nuf;
        let hkn = h * k - nuf;
        let hpk = h + k;
        bvt = (-nuf.sqrt() * (hkn * qhrk + hpk * hkrn)).atan2(hkn * hkrn - nuf * hpk * qhrk) / tpi;
        if bvt < -EPS {
            bvt += 1.0;
        }
        let mut gmph = h / (tpi * nuf.sqrt() * (1.0 + h * h / nuf));
        let mut gmpk = k / (tpi * nuf.sqrt() * (1.0 + k * k / nuf));
        let mut btnckh = xnkh.sqrt();
        let mut btpdkh = btnckh;
        let mut btnchk = xnhk.sqrt();
        let mut btpdhk = btnchk;
        for j in 1..=((nu - 1) / 2) {
            let jf = j as f64;
            bvt += gmph * (1.0 + ks * btnckh);
            bvt += gmpk * (1.0 + hs * btnchk);
            btpdkh = (2.0 * jf - 1.0) * btpdkh * (1.0 - xnkh) / (2.0 * jf);
            btnckh += btpdkh;
            btpdhk = (2.0 * jf - 1.0) * btpdhk * (1.0 - xnhk) / (2.0 * jf);
            btnchk += btpdhk;
            gmph = gmph * 2.0 * jf / ((2.0 * jf + 1.0) * (1.0 + h * h / nuf));
            gmpk = gmpk * 2.0 * jf / ((2.0 * jf + 1.0) * (1.0 + k * k / nuf));
        }
    }
    bvt.clamp(0.0, 1.0)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gauss–Hermite rule for `∫ e^{-t²} f(t) dt`: `(nodes, weights)`.
pub fn gauss_hermite() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite_rule(48))
}

fn gauss_hermite_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Root of a nondecreasing function `f` on a bracket where it crosses `target`,
/// by bisection to machine resolution.
pub fn bisect_increasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Order-independent sum: terms are sorted before compensated summation, so
/// any permutation of the same multiset yields a bitwise-identical result.
pub fn canonical_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(|a, b| a.total_cmp(b));
    neumaier_sum(terms.iter().copied())
}

pub fn neumaier_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// `ln Σ exp(v_i)` without overflow.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    let s: f64 = values.into_iter().map(|v| (v - max).exp()).sum();
    max + s.ln()
}
