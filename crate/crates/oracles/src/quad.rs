//! Composite-Simpson quadrature with interval doubling.

/// Integrate f over [a, b] with composite Simpson, doubling panels until the
/// estimate stabilizes to `rel_tol` (or the panel budget runs out).
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut n = 64usize;
    let mut last = simpson_fixed(f, a, b, n);
    loop {
        n *= 2;
        let next = simpson_fixed(f, a, b, n);
        let scale = next.abs().max(1e-300);
        if ((next - last) / scale).abs() < rel_tol || n >= 1 << 22 {
            return next;
        }
        last = next;
    }
}

pub fn simpson_fixed<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + (n % 2); // even panel count
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let x = a + h * i as f64;
        sum += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

/// Tensor-product Simpson over a rectangle.
pub fn simpson2d<F: Fn(f64, f64) -> f64>(
    f: &F,
    ax: f64,
    bx: f64,
    ay: f64,
    by: f64,
    n: usize,
) -> f64 {
    simpson_fixed(&|x| simpson_fixed(&|y| f(x, y), ay, by, n), ax, bx, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_a_gaussian() {
        let sigma: f64 = 1.7;
        let f = |x: f64| (-x * x / (2.0 * sigma * sigma)).exp();
        let got = simpson(&f, -30.0, 30.0, 1e-12);
        let want = (2.0 * std::f64::consts::PI).sqrt() * sigma;
        assert!((got - want).abs() < 1e-10 * want);
    }
}
