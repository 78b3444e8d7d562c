//! Adaptive Gauss–Kronrod (7/15) quadrature for vector-valued integrands.
//!
//! Intervals are bisected globally by largest error estimate. The order in
//! which intervals are split depends only on the integrand, so results are
//! bit-reproducible across runs and thread counts.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
/// Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-15,
            rel_tol: 1e-11,
            max_intervals: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub intervals: usize,
}

struct Piece<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
    priority: f64,
}

impl<const N: usize> PartialEq for Piece<N> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<const N: usize> Eq for Piece<N> {}
impl<const N: usize> PartialOrd for Piece<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Piece<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            // tie-break on position to keep the split order fully determined
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gk15<const N: usize, F>(f: &F, a: f64, b: f64) -> ([f64; N], [f64; N])
where
    F: Fn(f64) -> [f64; N],
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    let fc = f(c);
    for i in 0..N {
        kron[i] = WGK[7] * fc[i];
        gauss[i] = WG[3] * fc[i];
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for i in 0..N {
            let s = f1[i] + f2[i];
            kron[i] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[i] += WG[j / 2] * s;
            }
        }
    }
    let mut err = [0.0; N];
    for i in 0..N {
        kron[i] *= h;
        gauss[i] *= h;
        err[i] = (kron[i] - gauss[i]).abs();
    }
    (kron, err)
}

/// Integrates `f` over the union of consecutive intervals defined by the
/// sorted `breakpoints` (at least two entries).
pub fn integrate<const N: usize, F>(f: F, breakpoints: &[f64], opts: QuadOptions) -> QuadResult<N>
where
    F: Fn(f64) -> [f64; N],
{
    assert!(breakpoints.len() >= 2, "need at least one interval");
    let mut heap = BinaryHeap::new();
    let mut total = [0.0; N];
    let mut total_err = [0.0; N];

    let priority = |err: &[f64; N], scale: &[f64; N]| -> f64 {
        err.iter()
            .zip(scale)
            .map(|(e, s)| e / (s.abs() + opts.abs_tol))
            .fold(0.0, f64::max)
    };

    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let (v, e) = gk15(&f, a, b);
        for i in 0..N {
            total[i] += v[i];
            total_err[i] += e[i];
        }
        heap.push(Piece {
            a,
            b,
            value: v,
            error: e,
            priority: 0.0,
        });
    }
    // Priorities relative to the first-pass totals.
    let scale = total;
    let mut pieces: Vec<Piece<N>> = heap.into_vec();
    for p in &mut pieces {
        p.priority = priority(&p.error, &scale);
    }
    let mut heap: BinaryHeap<Piece<N>> = pieces.into();

    let converged = |total: &[f64; N], err: &[f64; N]| {
        (0..N).all(|i| err[i] <= opts.abs_tol.max(opts.rel_tol * total[i].abs()))
    };

    while !converged(&total, &total_err) && heap.len() < opts.max_intervals {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in f64
            heap.push(Piece {
                priority: -1.0,
                ..worst
            });
            break;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        for i in 0..N {
            total[i] += v1[i] + v2[i] - worst.value[i];
            total_err[i] += e1[i] + e2[i] - worst.error[i];
        }
        heap.push(Piece {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
            priority: priority(&e1, &scale),
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
            priority: priority(&e2, &scale),
        });
    }

    // Re-sum in interval order so the result does not carry the running-sum
    // rounding history.
    let mut pieces = heap.into_vec();
    pieces.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for p in &pieces {
        for i in 0..N {
            value[i] += p.value[i];
            error[i] += p.error[i];
        }
    }
    QuadResult {
        value,
        error,
        intervals: pieces.len(),
    }
}

/// Scalar convenience wrapper over `[a, b]`.
pub fn integrate_scalar<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> f64 {
    integrate(|x| [f(x)], &[a, b], opts).value[0]
}

/// Sorts, deduplicates and clips candidate breakpoints into `[lo, hi]`,
/// always keeping both ends.
pub fn prepare_breakpoints(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.retain(|p| p.is_finite() && *p > lo && *p < hi);
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    let span = hi - lo;
    pts.dedup_by(|b, a| (*b - *a).abs() <= 1e-15 * span);
    pts
}


/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((mid + half * x, half * w));
    }
    out.sort_by(|p, q| p.0.total_cmp(&q.0));
    out
}
