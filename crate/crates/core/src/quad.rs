//! Adaptive Simpson quadrature for the 1-D reference computations
//! (toy posterior normalisers, TV distances, folded-normal moments).

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance
/// `tol`. Panics are avoided by a depth cap; accuracy then degrades
/// gracefully, which the callers' tolerances absorb.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    simpson_rec(f, a, b, fa, fb, fm, simpson(a, b, fa, fm, fb), tol, 50)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, fm, flm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, fb, frm, right, 0.5 * tol, depth - 1)
    }
}

/// Standard normal density.
pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let z = x - mean;
    (-(z * z) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// `E[phi(|Z|)]` for `Z ~ N(mean, var)`, by quadrature over a 10-sigma window.
pub fn folded_normal_expectation(phi: &dyn Fn(f64) -> f64, mean: f64, var: f64, tol: f64) -> f64 {
    let sd = var.sqrt();
    let lo = mean - 10.0 * sd;
    let hi = mean + 10.0 * sd;
    integrate(&|z| phi(z.abs()) * normal_pdf(z, mean, var), lo, hi, tol)
}
