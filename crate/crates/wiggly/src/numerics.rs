//! Small numeric kernels shared across the crate: root bracketing, golden
//! section, and Simpson quadrature. All routines are scalar and allocation
//! free.

/// Bisection for a root of `f` on `[lo, hi]`, assuming `f(lo) <= 0 <= f(hi)`.
/// Runs a fixed number of halvings, which is cheap and fully deterministic.
pub(crate) fn bisect_root<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: u32) -> f64 {
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section search for a local minimum of `f` on `[a, b]`.
pub(crate) fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Composite Simpson rule with `panels` panels (must be even and >= 2).
pub(crate) fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    debug_assert!(panels >= 2 && panels.is_multiple_of(2));
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson_3<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    // The argument list is the full interval state of the classic recursion;
    // bundling it into a struct would only rename the same ten values.
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson_3(f, a, fa, m, fm);
        let (right, rm, frm) = simpson_3(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson_3(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_cubic_root() {
        let r = bisect_root(|x| x * x * x - 2.0, 0.0, 2.0, 200);
        assert!((r - 2f64.powf(1.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn golden_finds_parabola_min() {
        let m = golden_min(|x| (x - 0.3).powi(2), -1.0, 1.0, 1e-10);
        assert!((m - 0.3).abs() < 1e-8);
    }

    #[test]
    fn simpson_integrates_cubic_exactly() {
        let v = simpson(|x| x * x * x, 0.0, 1.0, 16);
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn adaptive_simpson_handles_steep_integrand() {
        let v = adaptive_simpson(&|x: f64| 1.0 / (1e-3 + x * x), 0.0, 1.0, 1e-12);
        let exact = (1.0 / 1e-3f64.sqrt()) * (1.0 / 1e-3f64.sqrt()).atan();
        assert!((v - exact).abs() < 1e-9, "got {v}, want {exact}");
    }
}
