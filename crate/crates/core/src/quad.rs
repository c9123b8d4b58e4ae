//! Composite midpoint rule.

/// Integrates `f` over `[a, b]` with panels of exactly `step` anchored at `a`,
/// plus one shorter panel for the remainder.
///
/// Anchoring keeps the sample positions `a + (k + ½)·step` independent of `b`, so
/// integrals from lattice-translated origins sample the integrand at translated
/// points. Returns 0 for empty or reversed intervals. Summation runs in panel order.
pub fn midpoint<F: FnMut(f64) -> f64>(a: f64, b: f64, step: f64, mut f: F) -> f64 {
    let len = b - a;
    if !(len > 0.0) {
        return 0.0;
    }
    let ratio = len / step;
    let mut full = ratio.floor();
    // Lengths within rounding of a whole number of panels take no remainder panel.
    if ratio - full > 1.0 - 1e-9 {
        full += 1.0;
    }
    let full_panels = full as usize;
    let mut sum = 0.0;
    for k in 0..full_panels {
        sum += f(a + (k as f64 + 0.5) * step);
    }
    sum *= step;
    let rest = len - full * step;
    if rest > 1e-9 * step {
        sum += rest * f(a + full * step + 0.5 * rest);
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_linear_integrands() {
        let v = midpoint(0.0, 2.0, 0.3, |x| 3.0 * x + 1.0);
        assert!((v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_error_is_second_order() {
        let exact = 1.0 / 3.0;
        let e1 = (midpoint(0.0, 1.0, 0.1, |x| x * x) - exact).abs();
        let e2 = (midpoint(0.0, 1.0, 0.05, |x| x * x) - exact).abs();
        assert!((e1 / e2 - 4.0).abs() < 1e-6);
    }

    #[test]
    fn remainder_panel_keeps_linear_exactness() {
        let v = midpoint(0.0, 1.05, 0.1, |x| 2.0 * x - 1.0);
        assert!((v - (1.05 * 1.05 - 1.05)).abs() < 1e-12);
        let mut points = Vec::new();
        midpoint(0.0, 0.37, 0.1, |x| {
            points.push(x);
            0.0
        });
        let expected = [0.05, 0.15, 0.25, 0.335];
        assert_eq!(points.len(), 4);
        for (p, e) in points.iter().zip(expected) {
            assert!((p - e).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(midpoint(1.0, 1.0, 0.1, |_| 1.0), 0.0);
        assert_eq!(midpoint(1.0, 0.0, 0.1, |_| 1.0), 0.0);
    }
}
