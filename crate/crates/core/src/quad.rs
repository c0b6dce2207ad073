//! Composite Simpson quadrature on equispaced nodes.

/// Default node count over the unit interval.
pub const UNIT_NODES: usize = 2001;

/// Composite Simpson rule over `[a, b]` with `nodes` equispaced nodes
/// (`nodes` odd, at least 3).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, nodes: usize) -> f64 {
    assert!(nodes >= 3 && nodes % 2 == 1, "simpson needs an odd node count >= 3");
    let n = nodes - 1;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `int_0^1 f` on the default grid.
pub fn integrate_unit(f: impl Fn(f64) -> f64) -> f64 {
    simpson(f, 0.0, 1.0, UNIT_NODES)
}

/// Simpson weights over `[0, 1]` applied to values that may fail to
/// evaluate. Stops at the first error.
pub fn try_integrate_unit<T>(f: impl Fn(f64) -> Result<f64, T>) -> Result<f64, T> {
    let n = UNIT_NODES - 1;
    let h = 1.0 / n as f64;
    let mut s = 0.0;
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * f(i as f64 * h)?;
    }
    Ok(s * h / 3.0)
}
