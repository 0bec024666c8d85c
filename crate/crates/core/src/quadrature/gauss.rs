//! Gauss-Legendre rules on `[-1, 1]`.

use std::sync::OnceLock;

use crate::scalar::Real;

/// Orders of the embedded pair used for error estimates.
pub const HIGH: usize = 8;
pub const LOW: usize = 5;

const MAX_CACHED: usize = 16;

/// Nodes and weights of the `order`-point rule, computed by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    assert!(order >= 1);
    let n = order;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn table() -> &'static Vec<Vec<(f64, f64)>> {
    static T: OnceLock<Vec<Vec<(f64, f64)>>> = OnceLock::new();
    T.get_or_init(|| (0..=MAX_CACHED).map(|o| if o == 0 { vec![] } else { gauss_legendre(o) }).collect())
}

/// Cached rule for small orders.
pub fn rule(order: usize) -> &'static [(f64, f64)] {
    assert!((1..=MAX_CACHED).contains(&order), "order {order} not cached");
    &table()[order]
}

/// Nodes and weights mapped to `[a, b]`.
pub fn mapped<T: Real>(order: usize, a: T, b: T) -> impl Iterator<Item = (T, T)> {
    let half = (b - a) / T::lit(2.0);
    let mid = a + half;
    rule(order).iter().map(move |&(x, w)| (mid + half * T::lit(x), half * T::lit(w)))
}

/// High and low order estimates of a 1D integral over `[a, b]`.
pub fn pair<T: Real>(a: T, b: T, mut f: impl FnMut(T) -> T) -> (T, T) {
    let hi = mapped(HIGH, a, b).map(|(x, w)| w * f(x)).fold(T::zero(), |s, v| s + v);
    let lo = mapped(LOW, a, b).map(|(x, w)| w * f(x)).fold(T::zero(), |s, v| s + v);
    (hi, lo)
}

/// Tensor-product nodes of the `order` rule on the box `[lo, hi]`.
pub fn tensor<T: Real>(order: usize, lo: &[T], hi: &[T]) -> Vec<(Vec<T>, T)> {
    let axes: Vec<Vec<(T, T)>> = lo.iter().zip(hi).map(|(&a, &b)| mapped(order, a, b).collect()).collect();
    let mut out: Vec<(Vec<T>, T)> = vec![(Vec::with_capacity(lo.len()), T::one())];
    for axis in &axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for (p, w) in &out {
            for &(x, wx) in axis {
                let mut q = p.clone();
                q.push(x);
                next.push((q, *w * wx));
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for order in 1..=MAX_CACHED {
            let r = rule(order);
            for deg in 0..(2 * order) {
                let s: f64 = r.iter().map(|&(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((s - exact).abs() < 1e-13, "order {order} degree {deg}");
            }
        }
    }

    #[test]
    fn weights_sum_to_two_and_nodes_symmetric() {
        let r = rule(HIGH);
        let s: f64 = r.iter().map(|p| p.1).sum();
        assert!((s - 2.0).abs() < 1e-14);
        for i in 0..r.len() {
            assert!((r[i].0 + r[r.len() - 1 - i].0).abs() < 1e-15);
        }
    }

    #[test]
    fn pair_and_tensor() {
        let (h, l) = pair(0.0f64, 1.0, |x| x.exp());
        assert!((h - (1f64.exp() - 1.0)).abs() < 1e-14);
        assert!((l - h).abs() < 1e-9);
        let nodes = tensor(LOW, &[0.0f64, -1.0], &[2.0, 1.0]);
        assert_eq!(nodes.len(), 25);
        let s: f64 = nodes.iter().map(|(p, w)| w * p[0] * p[1] * p[1]).sum();
        assert!((s - 4.0 / 3.0).abs() < 1e-13);
    }
}
