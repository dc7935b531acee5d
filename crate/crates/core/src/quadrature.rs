//! Adaptive Gauss-Legendre quadrature with an algebraic change of variables for
//! integrable endpoint singularities.
//!
//! A 32-point rule is applied per subinterval; a subinterval is accepted once
//! the rule and the sum over its two halves agree to the requested relative
//! tolerance, otherwise both halves are refined recursively.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const ORDER: usize = 32;
const MAX_DEPTH: u32 = 48;
pub const DEFAULT_REL_TOL: f64 = 1e-10;

struct Rule {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let (nodes, weights) = legendre_rule(ORDER);
        let mut r = Rule {
            nodes: [0.0; ORDER],
            weights: [0.0; ORDER],
        };
        r.nodes.copy_from_slice(&nodes);
        r.weights.copy_from_slice(&weights);
        r
    })
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// by Newton iteration on the Legendre polynomial recurrence.
pub fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn fixed<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let r = rule();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in r.nodes.iter().zip(r.weights.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Adaptive integral of a bounded integrand over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let whole = fixed(&f, a, b);
    // Absolute floor so that subintervals where the integrand vanishes terminate.
    let floor = rel_tol * whole.abs() * 1e-3;
    refine(&f, a, b, whole, rel_tol, floor, 0)
}

fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    rel_tol: f64,
    floor: f64,
    depth: u32,
) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let left = fixed(f, a, mid);
    let right = fixed(f, mid, b);
    let split = left + right;
    if !split.is_finite() {
        return Err(Error::Quadrature {
            lower: a,
            upper: b,
            depth,
        });
    }
    if (split - whole).abs() <= (rel_tol * split.abs()).max(floor) {
        return Ok(split);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Quadrature {
            lower: a,
            upper: b,
            depth,
        });
    }
    Ok(refine(f, a, mid, left, rel_tol, floor, depth + 1)?
        + refine(f, mid, b, right, rel_tol, floor, depth + 1)?)
}

/// Integral over `[a, b]` of an integrand behaving like `(x - a)^exponent`
/// near the left endpoint, with `exponent > -1`.
///
/// Substitutes `x = a + (b - a) w^g`, `g = 1 / (exponent + 1)`, which turns
/// the leading power into a bounded integrand in `w` on `[0, 1]`.
pub fn integrate_left_singular<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    exponent: f64,
    rel_tol: f64,
) -> Result<f64> {
    if exponent <= -1.0 {
        return Err(Error::invalid(format!(
            "endpoint exponent {exponent} is not integrable"
        )));
    }
    if exponent == 0.0 {
        return integrate(f, a, b, rel_tol);
    }
    let g = 1.0 / (exponent + 1.0);
    let len = b - a;
    integrate(
        |w: f64| {
            let wg = w.powf(g);
            f(a + len * wg) * len * g * wg / w
        },
        0.0,
        1.0,
        rel_tol,
    )
}
