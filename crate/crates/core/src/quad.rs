//! Numerical integration helpers.

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    refine(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Composite Simpson weights for `intervals + 1` equally spaced nodes.
/// `intervals` must be even.
pub fn simpson_weights(intervals: usize, h: f64) -> Vec<f64> {
    assert!(intervals >= 2 && intervals.is_multiple_of(2));
    (0..=intervals)
        .map(|i| {
            let w = if i == 0 || i == intervals {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_smooth_functions() {
        let v = adaptive_simpson(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-10);
        let v = adaptive_simpson(|x: f64| (-x * x).exp(), -6.0, 6.0, 1e-12);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn weights_integrate_cubics_exactly() {
        let n = 10;
        let h = 2.0 / n as f64;
        let w = simpson_weights(n, h);
        let s: f64 = w
            .iter()
            .enumerate()
            .map(|(i, wi)| {
                let x = -1.0 + i as f64 * h;
                wi * (x * x * x + x * x)
            })
            .sum();
        assert!((s - 2.0 / 3.0).abs() < 1e-14);
    }
}
