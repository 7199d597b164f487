//! Gauss–Legendre rules and small integration helpers shared by the kernels.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// An `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on `P_n`, starting from the Chebyshev-like guess.
    pub fn compute(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Shared, lazily computed rule.
    pub fn get(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard.entry(n).or_insert_with(|| Arc::new(GaussLegendre::compute(n))).clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Result of a panel integration with a conservative error estimate.
#[derive(Debug, Clone, Copy)]
pub struct PanelEstimate {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Adaptive bisection on `[a, b]`: each panel is accepted when the 16- and
/// 24-point rules agree to `tol`; the 24-point value is kept and the
/// difference is reported as the error.
pub fn adaptive_gl<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64, max_depth: u32) -> PanelEstimate {
    let g16 = GaussLegendre::get(16);
    let g24 = GaussLegendre::get(24);
    adaptive_rec(f, a, b, tol, max_depth, &g16, &g24)
}

fn adaptive_rec<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
    g16: &GaussLegendre,
    g24: &GaussLegendre,
) -> PanelEstimate {
    let lo = g16.integrate(a, b, &mut *f);
    let hi = g24.integrate(a, b, &mut *f);
    let err = (hi - lo).abs();
    if err <= tol || depth == 0 {
        return PanelEstimate { value: hi, error: err, panels: 1 };
    }
    let m = 0.5 * (a + b);
    let l = adaptive_rec(f, a, m, 0.5 * tol, depth - 1, g16, g24);
    let r = adaptive_rec(f, m, b, 0.5 * tol, depth - 1, g16, g24);
    PanelEstimate {
        value: l.value + r.value,
        error: l.error + r.error,
        panels: l.panels + r.panels,
    }
}

/// Quadrature weights on arbitrary increasing nodes, exact for quadratics on
/// each pair of intervals (non-uniform Simpson). An odd trailing interval is
/// handled with the quadratic through the last three nodes.
pub fn simpson_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    match n {
        0 | 1 => return w,
        2 => {
            let h = x[1] - x[0];
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
            return w;
        }
        _ => {}
    }
    let mut i = 0;
    while i + 2 < n {
        let (a, b, c) = quadratic_weights(x[i], x[i + 1], x[i + 2], x[i], x[i + 2]);
        w[i] += a;
        w[i + 1] += b;
        w[i + 2] += c;
        i += 2;
    }
    if i + 1 == n - 1 {
        // one interval [x[n-2], x[n-1]] left over
        let (a, b, c) = quadratic_weights(x[n - 3], x[n - 2], x[n - 1], x[n - 2], x[n - 1]);
        w[n - 3] += a;
        w[n - 2] += b;
        w[n - 1] += c;
    }
    w
}

/// Weights of `∫_lo^hi p(x) dx` where `p` interpolates at `x0, x1, x2`.
fn quadratic_weights(x0: f64, x1: f64, x2: f64, lo: f64, hi: f64) -> (f64, f64, f64) {
    // ∫ (x - xa)(x - xb) dx over [lo, hi], via the antiderivative
    let int = |xa: f64, xb: f64| {
        let f = |x: f64| x * x * x / 3.0 - 0.5 * (xa + xb) * x * x + xa * xb * x;
        f(hi) - f(lo)
    };
    (
        int(x1, x2) / ((x0 - x1) * (x0 - x2)),
        int(x0, x2) / ((x1 - x0) * (x1 - x2)),
        int(x0, x1) / ((x2 - x0) * (x2 - x1)),
    )
}

/// Panel edges on `[a, b]`: `interior` uniform panels, plus `levels`
/// geometrically shrinking panels (ratio 1/4) toward `a` and/or `b`.
pub fn graded_edges(a: f64, b: f64, interior: usize, grade_left: bool, grade_right: bool, levels: usize) -> Vec<f64> {
    let core_lo = if grade_left { 0.25 } else { 0.0 };
    let core_hi = if grade_right { 0.75 } else { 1.0 };
    let mut t = Vec::with_capacity(interior + 2 * levels + 2);
    if grade_left {
        t.push(0.0);
        for l in (1..=levels).rev() {
            t.push(core_lo * 0.25f64.powi(l as i32));
        }
    }
    let interior = interior.max(1);
    for k in 0..=interior {
        t.push(core_lo + (core_hi - core_lo) * k as f64 / interior as f64);
    }
    if grade_right {
        for l in 1..=levels {
            t.push(1.0 - (1.0 - core_hi) * 0.25f64.powi(l as i32));
        }
        t.push(1.0);
    }
    t.into_iter().map(|x| a + (b - a) * x).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [4usize, 8, 16, 24] {
            let g = GaussLegendre::compute(n);
            let s: f64 = g.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-14);
            // ∫_{-1}^{1} x^{2n-2} = 2/(2n-1)
            let p = (2 * n - 2) as i32;
            let v = g.integrate(-1.0, 1.0, |x| x.powi(p));
            assert!((v - 2.0 / (p as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn adaptive_handles_sqrt_endpoint() {
        let mut f = |x: f64| x.sqrt();
        let est = adaptive_gl(&mut f, 0.0, 1.0, 1e-12, 40);
        assert!((est.value - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn simpson_weights_exact_for_quadratics() {
        for n in [3usize, 4, 7, 10] {
            let x: Vec<f64> = (0..n).map(|i| 0.1 * 1.3f64.powi(i as i32)).collect();
            let w = simpson_weights(&x);
            let v: f64 = x.iter().zip(&w).map(|(x, w)| w * (x * x - 2.0 * x + 3.0)).sum();
            let f = |t: f64| t * t * t / 3.0 - t * t + 3.0 * t;
            let exact = f(x[n - 1]) - f(x[0]);
            assert!((v - exact).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn graded_edges_are_increasing_and_span() {
        let e = graded_edges(1.0, 3.0, 4, true, true, 3);
        assert_eq!(e[0], 1.0);
        assert_eq!(*e.last().unwrap(), 3.0);
        assert!(e.windows(2).all(|w| w[1] > w[0]));
        assert!(e[1] - e[0] < 0.02);
    }
}
