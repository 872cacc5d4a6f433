//! Adiabatic (instantaneous) eigenvalues.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DiabaticModel;

/// Sorted eigenvalues on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrack {
    pub times: Vec<f64>,
    pub energies: Vec<Vec<f64>>,
}

/// Ascending eigenvalues of H(t).
pub fn eigenvalues_at(model: &DiabaticModel, t: f64) -> Result<Vec<f64>> {
    let h = model.real_hamiltonian_at(t);
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 10_000).ok_or(Error::EigensolveFailure { t })?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

pub fn adiabatic_spectrum(model: &DiabaticModel, t_min: f64, t_max: f64, n_points: usize) -> Result<SpectrumTrack> {
    if !(t_min < t_max) || n_points < 2 {
        return Err(Error::BadDimension(format!("grid [{t_min}, {t_max}] with {n_points} points")));
    }
    let step = (t_max - t_min) / (n_points - 1) as f64;
    let times: Vec<f64> = (0..n_points).map(|k| t_min + step * k as f64).collect();
    let energies = times.iter().map(|&t| eigenvalues_at(model, t)).collect::<Result<_>>()?;
    Ok(SpectrumTrack { times, energies })
}
