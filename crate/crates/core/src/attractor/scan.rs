use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::equilibria::{linearize, HYPERBOLICITY_TOLERANCE};
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearTerm;
use crate::spectral::{GalerkinProblem, SpectralBasis, SpectralField};

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub k: u64,
    pub sqrt_k: f64,
    /// `#{j : λ_j < √k}`.
    pub n_k: usize,
    /// Unstable dimension of the linearization at 0.
    pub linearized: usize,
    pub non_hyperbolic: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionScan {
    pub modes: usize,
    pub rows: Vec<ScanRow>,
}

impl DimensionScan {
    pub fn strictly_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].n_k > w[0].n_k)
    }

    pub fn consistent(&self) -> bool {
        self.rows.iter().all(|r| r.n_k == r.linearized && r.non_hyperbolic == 0)
    }
}

/// `#{j ≤ m : λ_j < √k}` by direct count.
pub fn count_below(basis: &SpectralBasis, k: u64) -> usize {
    let s = (k as f64).sqrt();
    basis.eigenvalues().iter().filter(|l| **l < s).count()
}

/// The eigenvalue equal to `√k` within the hyperbolicity tolerance, if any.
pub fn resonance(basis: &SpectralBasis, k: u64) -> Option<f64> {
    let s = (k as f64).sqrt();
    basis.eigenvalues().iter().copied().find(|l| (l - s).abs() <= HYPERBOLICITY_TOLERANCE * (1.0 + s))
}

/// Nearest `k' ≥ 1` with no resonance, searching `k−1, k+1, k−2, …`.
pub fn nearest_safe_k(basis: &SpectralBasis, k: u64) -> u64 {
    for d in 1..=k.max(16) {
        if k > d && resonance(basis, k - d).is_none() {
            return k - d;
        }
        if resonance(basis, k + d).is_none() {
            return k + d;
        }
    }
    k + 1
}

/// Spectrum size at `u* = 0` for `f_k(u) = u³ − k^{−1/2} sin(ku)`.
pub fn linearized_count(basis: &Arc<SpectralBasis>, k: u64) -> Result<(usize, usize)> {
    let term = NonlinearTerm::builtin("remark3", &[("k", k as f64)])?;
    let p = GalerkinProblem::unforced(basis, term);
    let s = linearize(&p, &SpectralField::zeros(basis));
    Ok((s.unstable_dim, s.non_hyperbolic))
}

/// `n_k` over a ladder of `k`, cross-checked against the linearization at 0.
/// Resonant `k` are rejected with the nearest safe value.
pub fn dimension_scan(k_list: &[u64], basis: &Arc<SpectralBasis>) -> Result<DimensionScan> {
    for &k in k_list {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if let Some(eigenvalue) = resonance(basis, k) {
            return Err(Error::Resonant { k, eigenvalue, suggestion: nearest_safe_k(basis, k) });
        }
        let lm = basis.eigenvalues()[basis.mode_count() - 1];
        if (k as f64).sqrt() >= lm {
            return Err(Error::InvalidParameter(format!(
                "√k = {} is not below λ_m = {lm}; more modes are needed",
                (k as f64).sqrt()
            )));
        }
    }
    let rows = k_list
        .par_iter()
        .map(|&k| {
            let (linearized, non_hyperbolic) = linearized_count(basis, k)?;
            Ok(ScanRow { k, sqrt_k: (k as f64).sqrt(), n_k: count_below(basis, k), linearized, non_hyperbolic })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DimensionScan { modes: basis.mode_count(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_basis, Domain};

    #[test]
    fn counts() {
        let b = make_basis(20, Domain::unit()).unwrap();
        assert_eq!(count_below(&b, 2401), 6);
        assert_eq!(count_below(&b, 1), 0);
        assert_eq!(count_below(&b, 38416), 13);
    }

    #[test]
    fn resonant_k_rejected_with_suggestion() {
        let b = make_basis(20, Domain::unit()).unwrap();
        match dimension_scan(&[2401], &b) {
            Err(Error::Resonant { k, eigenvalue, suggestion }) => {
                assert_eq!(k, 2401);
                assert_eq!(eigenvalue, 49.0);
                assert_eq!(suggestion, 2400);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_resonant_ladder() {
        let b = make_basis(20, Domain::unit()).unwrap();
        let scan = dimension_scan(&[17, 2400, 38415], &b).unwrap();
        let n: Vec<usize> = scan.rows.iter().map(|r| r.n_k).collect();
        assert_eq!(n, vec![2, 6, 13]);
        assert!(scan.consistent());
        assert!(scan.strictly_increasing());
    }
}
