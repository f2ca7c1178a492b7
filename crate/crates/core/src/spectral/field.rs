use std::sync::Arc;

use serde::Serialize;

use super::basis::SpectralBasis;
use crate::error::{Error, Result};
use crate::msflow::{Metric, State};

/// Coefficients of a function in the Dirichlet eigenbasis.
#[derive(Debug, Clone)]
pub struct SpectralField {
    basis: Arc<SpectralBasis>,
    coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub l4: f64,
}

impl SpectralField {
    pub fn new(basis: Arc<SpectralBasis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.mode_count() {
            return Err(Error::BasisMismatch(basis.mode_count(), coeffs.len()));
        }
        if let Some(j) = coeffs.iter().position(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter(format!("coefficient {} is not finite", j + 1)));
        }
        Ok(Self { basis, coeffs })
    }

    pub(crate) fn from_parts(basis: Arc<SpectralBasis>, coeffs: Vec<f64>) -> Self {
        Self { basis, coeffs }
    }

    pub fn zeros(basis: &Arc<SpectralBasis>) -> Self {
        Self::from_parts(basis.clone(), vec![0.0; basis.mode_count()])
    }

    /// `amplitude · w_j`, with `j` counted from 1.
    pub fn mode(basis: &Arc<SpectralBasis>, j: usize, amplitude: f64) -> Result<Self> {
        if j == 0 || j > basis.mode_count() {
            return Err(Error::InvalidParameter(format!(
                "mode {j} outside 1..={}",
                basis.mode_count()
            )));
        }
        let mut f = Self::zeros(basis);
        f.coeffs[j - 1] = amplitude;
        Ok(f)
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Self {
        debug_assert_eq!(coeffs.len(), self.coeffs.len());
        Self::from_parts(self.basis.clone(), coeffs)
    }

    pub fn same_basis(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.basis, &other.basis) || *self.basis == *other.basis {
            Ok(())
        } else {
            Err(Error::BasisMismatch(
                self.basis.mode_count(),
                other.basis.mode_count(),
            ))
        }
    }

    pub fn grid_values(&self) -> Vec<f64> {
        self.basis.synthesize(&self.coeffs)
    }

    pub fn l2_sq(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum()
    }

    pub fn l2(&self) -> f64 {
        self.l2_sq().sqrt()
    }

    /// `‖u‖²_{H₀¹} = Σ λ_j a_j²`.
    pub fn h1_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(self.basis.eigenvalues())
            .map(|(a, l)| l * a * a)
            .sum()
    }

    pub fn h1(&self) -> f64 {
        self.h1_sq().sqrt()
    }

    /// `‖Δu‖ = (Σ λ_j² a_j²)^{1/2}`.
    pub fn laplacian_norm(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(self.basis.eigenvalues())
            .map(|(a, l)| (l * a).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn l4(&self) -> f64 {
        let v: Vec<f64> = self.grid_values().iter().map(|u| u.powi(4)).collect();
        self.basis.integrate(&v).powf(0.25)
    }

    /// Largest absolute value on the quadrature grid.
    pub fn sup_norm(&self) -> f64 {
        self.grid_values().iter().fold(0.0, |m, u| m.max(u.abs()))
    }

    pub fn norms(&self) -> Norms {
        Norms {
            l2: self.l2(),
            h1: self.h1(),
            l4: self.l4(),
        }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.with_coeffs(self.coeffs.iter().map(|a| s * a).collect())
    }

    /// `self + s · other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        self.with_coeffs(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + s * b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    pub fn neg(&self) -> Self {
        self.scaled(-1.0)
    }

    /// Coefficients in a basis with `m` modes: truncated or zero-padded.
    pub fn resized(&self, basis: &Arc<SpectralBasis>) -> Self {
        let mut coeffs = vec![0.0; basis.mode_count()];
        for (c, a) in coeffs.iter_mut().zip(&self.coeffs) {
            *c = *a;
        }
        Self::from_parts(basis.clone(), coeffs)
    }

    pub fn distance_l2(&self, other: &Self) -> f64 {
        self.sub(other).l2()
    }

    pub fn distance_h1(&self, other: &Self) -> f64 {
        self.sub(other).h1()
    }
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs && *self.basis == *other.basis
    }
}

impl State for SpectralField {
    fn distance(&self, other: &Self, metric: Metric) -> f64 {
        match metric {
            Metric::L2 => self.distance_l2(other),
            Metric::H1 => self.distance_h1(other),
        }
    }

    fn lerp(&self, other: &Self, theta: f64) -> Self {
        self.with_coeffs(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + theta * (b - a))
                .collect(),
        )
    }

    fn coordinates(&self) -> Vec<f64> {
        self.coeffs.clone()
    }
}

/// `P_m` applied to grid values: L² inner products against each `w_j`.
pub fn project(point_values: &[f64], basis: &Arc<SpectralBasis>) -> Result<SpectralField> {
    if point_values.len() != basis.grid_len() {
        return Err(Error::GridMismatch {
            expected: basis.grid_len(),
            got: point_values.len(),
        });
    }
    SpectralField::new(basis.clone(), basis.analyze(point_values))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::spectral::Domain;

    fn basis(m: usize) -> Arc<SpectralBasis> {
        Arc::new(SpectralBasis::new(m, Domain::unit()).unwrap())
    }

    #[test]
    fn projection_of_modes_and_zero() {
        let b = basis(5);
        let w2 = SpectralField::mode(&b, 2, 1.0).unwrap();
        let p = project(&w2.grid_values(), &b).unwrap();
        for (j, a) in p.coeffs().iter().enumerate() {
            let e = if j == 1 { 1.0 } else { 0.0 };
            assert!((a - e).abs() < 1e-14);
        }
        let z = project(&vec![0.0; b.grid_len()], &b).unwrap();
        assert!(z.coeffs().iter().all(|a| *a == 0.0));
        assert!(matches!(project(&[1.0, 2.0], &b), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn projection_of_cubed_mode() {
        // sin³x = (3 sin x − sin 3x)/4, so w₁³ = (2/π)^{3/2}(3 sin x − sin 3x)/4 and
        // in the normalized basis the coefficients are (2/π)(3/4, 0, −1/4).
        let b = basis(4);
        let w1 = SpectralField::mode(&b, 1, 1.0).unwrap();
        let cubed: Vec<f64> = w1.grid_values().iter().map(|u| u.powi(3)).collect();
        let p = project(&cubed, &b).unwrap();
        let s = 2.0 / PI;
        let expect = [0.75 * s, 0.0, -0.25 * s, 0.0];
        for (a, e) in p.coeffs().iter().zip(expect) {
            assert!((a - e).abs() < 1e-14, "{a} vs {e}");
        }
    }

    #[test]
    fn norms_in_closed_form() {
        let b = basis(4);
        let w1 = SpectralField::mode(&b, 1, 1.0).unwrap();
        let n = w1.norms();
        assert!((n.l2 - 1.0).abs() < 1e-15);
        assert!((n.h1 - 1.0).abs() < 1e-15);
        assert!((n.l4.powi(4) - 3.0 / (2.0 * PI)).abs() < 1e-14);
        let u = SpectralField::mode(&b, 2, 2.0).unwrap();
        assert!((u.h1_sq() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn parseval_against_quadrature() {
        let b = basis(8);
        let u = SpectralField::new(b.clone(), (1..=8).map(|j| 1.0 / j as f64).collect()).unwrap();
        let sq: Vec<f64> = u.grid_values().iter().map(|v| v * v).collect();
        let quad = b.integrate(&sq);
        assert!((quad - u.l2_sq()).abs() <= 1e-10 * u.l2_sq());
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        let b = basis(3);
        assert!(SpectralField::new(b.clone(), vec![0.0; 2]).is_err());
        assert!(SpectralField::new(b.clone(), vec![0.0, f64::NAN, 0.0]).is_err());
        assert!(SpectralField::mode(&b, 4, 1.0).is_err());
    }
}
