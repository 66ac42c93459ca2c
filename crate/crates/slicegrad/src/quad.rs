//! Numerical quadrature used by conformance checks.
//!
//! Two integrators: adaptive Simpson for smooth integrands, and tanh-sinh
//! (double-exponential) for integrands with integrable endpoint
//! singularities such as the BetaSlice density at its support edges.

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
///
/// The caller is responsible for splitting at interior kinks; the
/// integrand must be continuous on the interval.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 52)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
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
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Tanh-sinh quadrature on the finite interval `[a, b]`.
///
/// Converges at double-exponential rate even when the integrand blows up
/// integrably at one or both endpoints, because the substitution pushes the
/// abscissas toward the endpoints faster than any power. Each halving of
/// the step reuses all previously evaluated points.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let h = 0.5 * (b - a);
    // x(t) = c + h tanh(pi/2 sinh t), evaluated as an offset from the
    // nearest endpoint (1 - tanh s = 2 e^{-2s} / (1 + e^{-2s})) so abscissas
    // approach a singular endpoint at full floating-point resolution instead
    // of stalling at cancellation distance.
    let g = |t: f64| {
        let s = 0.5 * std::f64::consts::PI * t.sinh();
        let em = (-2.0 * s.abs()).exp();
        let offset = h * 2.0 * em / (1.0 + em);
        let x = if t >= 0.0 { b - offset } else { a + offset };
        let ch = s.cosh();
        let w = 0.5 * std::f64::consts::PI * t.cosh() / (ch * ch);
        if x <= a || x >= b || w == 0.0 {
            return 0.0; // underflowed into an endpoint; negligible weight
        }
        let v = f(x);
        if v.is_finite() {
            h * w * v
        } else {
            0.0
        }
    };

    // Deep enough that both the weights and the endpoint offsets underflow
    // before the cutoff; strong endpoint singularities keep contributing
    // until offsets of ~1e-90.
    const T_MAX: f64 = 6.0;
    // Level 0: unit step over the integers.
    let mut total = g(0.0);
    let mut k = 1.0;
    while k <= T_MAX {
        total += g(k) + g(-k);
        k += 1.0;
    }
    let mut step = 1.0;
    let mut prev = total * step;
    for _ in 0..12 {
        // Halve the step: evaluate the new odd multiples only.
        let half = 0.5 * step;
        let mut t = half;
        while t <= T_MAX {
            total += g(t) + g(-t);
            t += step;
        }
        step = half;
        let estimate = total * step;
        if (estimate - prev).abs() <= tol {
            return estimate;
        }
        prev = estimate;
    }
    prev
}
