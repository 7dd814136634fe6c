//! Numerical kernels: Gauss-Legendre rules, adaptive Gauss-Kronrod,
//! bracketing root search, golden-section maximisation and log-space sums.

/// `ln(exp(a) + exp(b))` without overflow; `-inf` is the additive identity.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(sum(exp(x_i)))`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes are the roots of `P_n`, found by Newton iteration from the
    /// Chebyshev-like initial guesses; nodes come out in increasing order.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Nodes and weights mapped affinely onto `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let nodes = self.nodes.iter().map(|x| mid + half * x).collect();
        let weights = self.weights.iter().map(|w| half * w).collect();
        (nodes, weights)
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let (xs, ws) = self.on_interval(a, b);
        xs.iter().zip(&ws).map(|(x, w)| w * f(*x)).sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const GK_XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const GK_WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * GK_WGK[7];
    let mut gauss = fc * GK_WG[3];
    for j in 0..7 {
        let dx = half * GK_XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += GK_WGK[j] * s;
        if j % 2 == 1 {
            gauss += GK_WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss-Kronrod (7/15) quadrature with a global absolute tolerance.
///
/// The interval with the largest error estimate is bisected until the summed
/// estimate drops below `abs_tol` or `max_intervals` is reached.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    const MAX_INTERVALS: usize = 4000;
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    loop {
        let total_err: f64 = parts.iter().map(|p| p.3).sum();
        if total_err <= abs_tol || parts.len() >= MAX_INTERVALS {
            break;
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval can no longer be split in floating point
            let (v, _) = gk15(&f, lo, hi);
            parts.push((lo, hi, v, 0.0));
            continue;
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    parts.iter().map(|p| p.2).sum()
}

/// Shrinks `[lo, hi]` around the point where a monotone predicate flips from
/// `false` (at `lo`) to `true` (at `hi`), until the bracket is narrower than `tol`.
/// Returns the final bracket.
pub fn bisect_flip<P: FnMut(f64) -> bool>(mut lo: f64, mut hi: f64, tol: f64, mut pred: P) -> (f64, f64) {
    debug_assert!(lo <= hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// Illinois-modified false position for a monotone `f` with `f(neg) < 0 <= f(pos)`.
///
/// `neg` and `pos` may be in either order. Returns the final `(neg, pos)`
/// bracket, at most `tol` wide. Infinite values fall back to bisection steps.
pub fn regula_falsi<F: FnMut(f64) -> f64>(mut f: F, mut neg: f64, mut pos: f64, tol: f64) -> (f64, f64) {
    let mut f_neg = f(neg);
    let mut f_pos = f(pos);
    let mut last_moved_pos: Option<bool> = None;
    for _ in 0..300 {
        let width = (pos - neg).abs();
        if width <= tol {
            break;
        }
        let (lo, hi) = (neg.min(pos), neg.max(pos));
        let mut x = if f_neg.is_finite() && f_pos.is_finite() && f_pos > f_neg {
            pos - f_pos * (pos - neg) / (f_pos - f_neg)
        } else {
            0.5 * (lo + hi)
        };
        if !x.is_finite() {
            x = 0.5 * (lo + hi);
        }
        let margin = (0.5 * tol).min(0.25 * width);
        x = x.clamp(lo + margin, hi - margin);
        if x <= lo || x >= hi {
            break;
        }
        let fx = f(x);
        if fx >= 0.0 {
            pos = x;
            f_pos = fx;
            if last_moved_pos == Some(true) {
                f_neg *= 0.5;
            }
            last_moved_pos = Some(true);
        } else {
            neg = x;
            f_neg = fx;
            if last_moved_pos == Some(false) {
                f_pos *= 0.5;
            }
            last_moved_pos = Some(false);
        }
    }
    (neg, pos)
}

/// Golden-section search for the maximiser of a unimodal function on `[a, b]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Formats `x` with `digits` significant digits, like C's `%.{digits}g`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_legendre_weights_and_polynomials() {
        for n in [2, 5, 16, 64, 128] {
            let gl = GaussLegendre::new(n);
            assert_abs_diff_eq!(gl.weights.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            assert!(gl.nodes.windows(2).all(|w| w[0] < w[1]));
            // exact for degree 2n - 1
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 1 { 1.0 / (deg as f64 + 1.0) } else { 0.0 };
            let got = gl.integrate(0.0, 1.0, |x| x.powi(deg as i32));
            assert_abs_diff_eq!(got, exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        // integral of x^{-1/2} on [0,1] is 2
        let v = integrate_adaptive(|x| if x > 0.0 { x.powf(-0.5) } else { 0.0 }, 0.0, 1.0, 1e-9);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-6);
        let v = integrate_adaptive(f64::sin, 0.0, std::f64::consts::PI, 1e-12);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn log_sum_exp_edges() {
        assert_eq!(log_sum_exp([]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_abs_diff_eq!(log_sum_exp([0.0, 0.0]), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(log_sum_exp([1000.0, 1000.0]), 1000.0 + 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(log_add(4f64.ln(), f64::NEG_INFINITY), 4f64.ln());
    }

    #[test]
    fn bisect_and_golden() {
        let (lo, hi) = bisect_flip(0.0, 2.0, 1e-12, |x| x * x >= 2.0);
        assert!(hi - lo <= 1e-12);
        assert_abs_diff_eq!(hi, 2f64.sqrt(), epsilon = 1e-12);
        let m = golden_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-10);
        assert_abs_diff_eq!(m, 0.3, epsilon = 1e-9);
    }

    #[test]
    fn regula_falsi_brackets_roots() {
        let (n, p) = regula_falsi(|x| x * x * x - 2.0, 0.0, 5.0, 1e-12);
        assert!((p - n).abs() <= 1e-12);
        assert!(p.powi(3) >= 2.0 && n.powi(3) < 2.0);
        // decreasing direction and a steep exponential
        let (n, p) = regula_falsi(|x| (-50.0 * x).exp() - 10.0, 1.0, -1.0, 1e-10);
        assert!((p - n).abs() <= 1e-10);
        assert_abs_diff_eq!(p, -(10f64.ln()) / 50.0, epsilon = 1e-10);
        // infinite values on one side
        let (n, p) = regula_falsi(|x| if x > 0.7 { f64::INFINITY } else { x - 0.3 }, 0.0, 1.0, 1e-9);
        assert_abs_diff_eq!(p, 0.3, epsilon = 1e-9);
        assert!(n < 0.3);
    }

    #[test]
    fn significant_digits() {
        let g9 = |x| format_sig(x, 9);
        assert_eq!(g9(1.0), "1");
        assert_eq!(g9(0.6), "0.6");
        assert_eq!(g9(0.895233167768), "0.895233168");
        assert_eq!(g9(0.012142960691147), "0.0121429607");
        assert_eq!(g9(-3.0026), "-3.0026");
        assert_eq!(g9(1.5e-7), "1.5e-07");
        assert_eq!(g9(123456789012.0), "1.23456789e+11");
        assert_eq!(g9(999999999.7), "1e+09");
        assert_eq!(g9(f64::NEG_INFINITY), "-inf");
        assert_eq!(g9(0.99999999999), "1");
        assert_eq!(format_sig(246.70526, 4), "246.7");
    }
}
