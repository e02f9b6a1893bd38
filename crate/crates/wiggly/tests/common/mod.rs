//! Brute-force minimization oracle shared by the integration tests. It knows
//! nothing about cells or closed forms: a coarse dense scan, a refined scan
//! around the best coarse point, then a golden-section polish.

const COARSE_POINTS: usize = 200_000;
const FINE_POINTS: usize = 200_000;
const GOLDEN_ITERS: usize = 120;

fn scan(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> f64 {
    let mut best_x = lo;
    let mut best_v = f(lo);
    for i in 1..=points {
        let x = lo + (hi - lo) * i as f64 / points as f64;
        let v = f(x);
        if v < best_v {
            best_v = v;
            best_x = x;
        }
    }
    best_x
}

fn golden(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..GOLDEN_ITERS {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
        if hi - lo <= 1e-14 * (1.0 + lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Global minimizer of `f` over `[lo, hi]`, accurate to well below 1e-6 for
/// piecewise-smooth objectives whose global minimum is interior and locally
/// smooth. Ties resolve toward the leftmost scanned point, matching the
/// library's selection rule.
pub fn grid_argmin(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let coarse = scan(f, lo, hi, COARSE_POINTS);
    let spacing = (hi - lo) / COARSE_POINTS as f64;
    let flo = (coarse - 2.0 * spacing).max(lo);
    let fhi = (coarse + 2.0 * spacing).min(hi);
    let fine = scan(f, flo, fhi, FINE_POINTS);
    let fine_spacing = (fhi - flo) / FINE_POINTS as f64;
    golden(f, (fine - fine_spacing).max(lo), (fine + fine_spacing).min(hi))
}
