use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Domain {
    /// `(0, length)` with homogeneous Dirichlet conditions.
    Interval { length: f64 },
    /// Tensor-product box `(0, lx) × (0, ly)`.
    Rectangle { lx: f64, ly: f64 },
}

impl Domain {
    /// The default domain `(0, π)`, where `λ_j = j²`.
    pub fn unit() -> Self {
        Domain::Interval { length: PI }
    }
}

impl Default for Domain {
    fn default() -> Self {
        Self::unit()
    }
}

/// Dirichlet sine eigenbasis `w_j = sqrt(2/L) sin(jπx/L)` with a uniform
/// quadrature grid of `N` subintervals.
///
/// The trapezoidal rule on that grid is exact for trigonometric
/// polynomials of degree below `2N`, so with `N ≥ 4m` products of four
/// basis functions integrate exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    m: usize,
    intervals: usize,
    domain: Domain,
    length: f64,
    eigenvalues: Vec<f64>,
    nodes: Vec<f64>,
    weight: f64,
    // row-major [node][mode]
    modes: Vec<f64>,
}

impl SpectralBasis {
    pub fn new(m: usize, domain: Domain) -> Result<Self> {
        Self::with_grid(m, 4 * m, domain)
    }

    pub fn with_grid(m: usize, intervals: usize, domain: Domain) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("mode count must be at least 1".into()));
        }
        if intervals < 4 * m {
            return Err(Error::InvalidParameter(format!(
                "quadrature grid of {intervals} intervals is below 4m = {}",
                4 * m
            )));
        }
        let length = match domain {
            Domain::Interval { length } if length > 0.0 && length.is_finite() => length,
            Domain::Interval { length } => {
                return Err(Error::UnsupportedDomain(format!("interval of length {length}")))
            }
            Domain::Rectangle { .. } => {
                return Err(Error::UnsupportedDomain(
                    "rectangular boxes are not implemented".into(),
                ))
            }
        };
        let k = PI / length;
        let eigenvalues = (1..=m).map(|j| (k * j as f64).powi(2)).collect();
        let nodes: Vec<f64> = (1..intervals)
            .map(|q| length * q as f64 / intervals as f64)
            .collect();
        let norm = (2.0 / length).sqrt();
        let mut modes = Vec::with_capacity(nodes.len() * m);
        for q in 1..intervals {
            for j in 1..=m {
                modes.push(norm * sin_pi_ratio(j * q, intervals));
            }
        }
        Ok(Self {
            m,
            intervals,
            domain,
            length,
            eigenvalues,
            nodes,
            weight: length / intervals as f64,
            modes,
        })
    }

    pub fn mode_count(&self) -> usize {
        self.m
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of interior quadrature nodes (`N - 1`).
    pub fn grid_len(&self) -> usize {
        self.nodes.len()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Measure of the domain.
    pub fn volume(&self) -> f64 {
        self.length
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Poincaré constant `1/λ₁` in `‖u‖² ≤ C ‖u‖²_{H₀¹}`.
    pub fn poincare_constant(&self) -> f64 {
        1.0 / self.eigenvalues[0]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// `w_j(x_q)` for node `q` and zero-based mode `j`.
    #[inline]
    pub fn mode_value(&self, q: usize, j: usize) -> f64 {
        self.modes[q * self.m + j]
    }

    /// Evaluate the basis expansion at the quadrature nodes.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(coeffs.len(), self.m);
        self.modes
            .chunks_exact(self.m)
            .map(|row| row.iter().zip(coeffs).map(|(w, a)| w * a).sum())
            .collect()
    }

    /// L² inner products of grid values against each basis function.
    ///
    /// Nodes `x` and `L − x` are summed in pairs, so fields of definite
    /// parity about the midpoint project with exact zeros in the other
    /// parity class.
    pub fn analyze(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.nodes.len());
        let mut out = vec![0.0; self.m];
        let mut pair = vec![0.0; self.m];
        for (q, mirror) in self.mirror_pairs() {
            for (j, p) in pair.iter_mut().enumerate() {
                *p = self.mode_value(q, j) * values[q];
                if let Some(r) = mirror {
                    *p += self.mode_value(r, j) * values[r];
                }
            }
            for (o, p) in out.iter_mut().zip(&pair) {
                *o += p;
            }
        }
        out.iter_mut().for_each(|o| *o *= self.weight);
        out
    }

    /// Node indices grouped as `(q, Some(mirror))`, ending with the
    /// midpoint `(q, None)` when it is a node.
    pub fn mirror_pairs(&self) -> impl Iterator<Item = (usize, Option<usize>)> + '_ {
        let n = self.nodes.len();
        (0..n / 2)
            .map(move |q| (q, Some(n - 1 - q)))
            .chain((n % 2 == 1).then_some((n / 2, None)))
    }

    /// Quadrature of grid values over the domain.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weight * values.iter().sum::<f64>()
    }
}

/// `sin(π r / n)` with exact symmetries `sin(π − θ) = sin θ` and
/// `sin(θ + π) = −sin θ` on the lattice.
fn sin_pi_ratio(r: usize, n: usize) -> f64 {
    let r = r % (2 * n);
    let (r, sign) = if r >= n { (r - n, -1.0) } else { (r, 1.0) };
    let r = r.min(n - r);
    if r == 0 {
        return 0.0;
    }
    sign * (std::f64::consts::PI * r as f64 / n as f64).sin()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_on_unit_interval() {
        let b = SpectralBasis::new(3, Domain::unit()).unwrap();
        for (l, e) in b.eigenvalues().iter().zip([1.0, 4.0, 9.0]) {
            assert!((l - e).abs() < 1e-12);
        }
        let b1 = SpectralBasis::new(1, Domain::unit()).unwrap();
        assert!((b1.lambda1() - 1.0).abs() < 1e-14);
        assert!((b1.poincare_constant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SpectralBasis::new(0, Domain::unit()).is_err());
        assert!(matches!(
            SpectralBasis::new(4, Domain::Rectangle { lx: 1.0, ly: 1.0 }),
            Err(Error::UnsupportedDomain(_))
        ));
        assert!(SpectralBasis::new(4, Domain::Interval { length: -1.0 }).is_err());
        assert!(SpectralBasis::with_grid(8, 16, Domain::unit()).is_err());
    }

    #[test]
    fn orthonormal_modes() {
        let b = SpectralBasis::new(6, Domain::unit()).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let prod: Vec<f64> = (0..b.grid_len())
                    .map(|q| b.mode_value(q, i) * b.mode_value(q, j))
                    .collect();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((b.integrate(&prod) - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn fourth_power_quadrature() {
        // ∫₀^π (2/π)² sin⁴x dx = 3/(2π)
        let b = SpectralBasis::new(1, Domain::unit()).unwrap();
        let vals: Vec<f64> = (0..b.grid_len()).map(|q| b.mode_value(q, 0).powi(4)).collect();
        assert!((b.integrate(&vals) - 3.0 / (2.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn mirror_parity_is_exact() {
        let b = SpectralBasis::new(6, Domain::unit()).unwrap();
        let n = b.grid_len();
        for q in 0..n {
            for j in 0..6 {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                assert_eq!(b.mode_value(n - 1 - q, j), s * b.mode_value(q, j));
            }
        }
        let a = [0.0, 0.7, 0.0, -0.2, 0.0, 0.05];
        let cubed: Vec<f64> = b.synthesize(&a).iter().map(|u| u * u * u).collect();
        let p = b.analyze(&cubed);
        assert!(p.iter().step_by(2).all(|c| *c == 0.0));
    }

    #[test]
    fn general_interval_eigenvalues() {
        let b = SpectralBasis::new(2, Domain::Interval { length: 2.0 }).unwrap();
        assert!((b.eigenvalues()[1] - PI * PI).abs() < 1e-12);
    }
}
