//! Brent's method on a sign-changing bracket.

/// Finds `x` in `[a, b]` where `f` changes sign, given `fa = f(a)` and
/// `fb = f(b)` of opposite signs (or one of them zero). Stops once the bracket
/// is narrower than `xtol` or `|f(x)| <= ftol`. Returns the endpoint on the
/// `f >= 0` side of the final bracket.
pub fn brent<F, E>(mut f: F, a: f64, b: f64, fa: f64, fb: f64, xtol: f64, ftol: f64) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    debug_assert!(fa.signum() != fb.signum());
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb.abs() <= ftol {
            break;
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
        if fb == 0.0 {
            return Ok(b);
        }
    }
    Ok(if fb >= 0.0 { b } else { c })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cubic_root() {
        let f = |x: f64| Ok::<f64, ()>(x * x * x - 2.0);
        let r = brent(f, 0.0, 3.0, -2.0, 25.0, 1e-14, 0.0).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn handles_a_jump() {
        let f = |x: f64| Ok::<f64, ()>(if x < 0.3 { -1.0 } else { 1.0 });
        let r = brent(f, 0.0, 1.0, -1.0, 1.0, 1e-12, 0.0).unwrap();
        assert!((r - 0.3).abs() < 1e-11 && r >= 0.3);
    }
}
