//! Independent oracles: a shooting method for `u'' = u³ − λu` on `(0, π)`
//! with `u(0) = u(π) = 0`, integrated by classical RK4 in physical space.

#![allow(dead_code)]

use std::f64::consts::PI;

fn rk4_step(lambda: f64, u: f64, v: f64, h: f64) -> (f64, f64) {
    let acc = |u: f64| u * u * u - lambda * u;
    let (k1u, k1v) = (v, acc(u));
    let (k2u, k2v) = (v + 0.5 * h * k1v, acc(u + 0.5 * h * k1u));
    let (k3u, k3v) = (v + 0.5 * h * k2v, acc(u + 0.5 * h * k2u));
    let (k4u, k4v) = (v + h * k3v, acc(u + h * k3u));
    (
        u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
        v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )
}

/// `u(π)` for initial slope `s`.
pub fn endpoint(lambda: f64, s: f64, steps: usize) -> f64 {
    let h = PI / steps as f64;
    let (mut u, mut v) = (0.0, s);
    for _ in 0..steps {
        (u, v) = rk4_step(lambda, u, v, h);
    }
    u
}

/// Positive initial slopes of nontrivial solutions. Bounded orbits need
/// `s < λ/√2`, the slope of the separatrix through `u² = λ`.
pub fn shooting_slopes(lambda: f64) -> Vec<f64> {
    if lambda <= 0.0 {
        return Vec::new();
    }
    let steps = 4000;
    let s_max = lambda / 2f64.sqrt();
    // uniform in s, then geometric toward the separatrix where periods diverge
    let mut grid: Vec<f64> = (1..4000).map(|i| s_max * i as f64 / 4000.0).collect();
    grid.extend((60..1400).map(|k| s_max * (1.0 - 10f64.powf(-k as f64 / 100.0))));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut roots = Vec::new();
    let mut prev_s = s_max * 1e-6;
    let mut prev = endpoint(lambda, prev_s, steps);
    for &s in &grid {
        let val = endpoint(lambda, s, steps);
        if prev.signum() != val.signum() && prev != 0.0 {
            let (mut a, mut b, mut fa) = (prev_s, s, prev);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                let fm = endpoint(lambda, mid, steps);
                if fm.signum() == fa.signum() {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
                if b - a <= 1e-16 * s_max {
                    break;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = val;
        prev_s = s;
    }
    roots
}

/// Number of solutions, counting `0` and both signs.
pub fn equilibrium_count(lambda: f64) -> usize {
    1 + 2 * shooting_slopes(lambda).len()
}

/// Solution values at the interior nodes `qπ/n`, `q = 1..n−1`.
pub fn profile(lambda: f64, s: f64, intervals: usize, substeps: usize) -> Vec<f64> {
    let h = PI / (intervals * substeps) as f64;
    let (mut u, mut v) = (0.0, s);
    let mut out = Vec::with_capacity(intervals - 1);
    for _ in 1..intervals {
        for _ in 0..substeps {
            (u, v) = rk4_step(lambda, u, v, h);
        }
        out.push(u);
    }
    out
}

/// Brute-force `sup_a inf_b ‖a − b‖` over coefficient vectors.
pub fn brute_semidist(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for x in a {
        let mut best = f64::INFINITY;
        for y in b {
            let d = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            best = best.min(d);
        }
        worst = worst.max(best);
    }
    worst
}
