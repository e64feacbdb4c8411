//! Free-space emission spectra and the one-dimensional Planck curve.

use rayon::prelude::*;
use thiserror::Error;

use crate::constants::{HBAR, K_B};
use crate::kinetics::{lorentzian, KineticState};
use crate::modes::Mode;
use crate::scalar::{lit, Scalar};

/// Number of samples on the default detector grid.
pub const DETECTOR_SAMPLES: usize = 2000;

#[derive(Debug, Error, PartialEq)]
pub enum SpectrumError {
    #[error("state has {got} photon numbers but {expected} modes were given")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("spectra sampled on different grids ({0} vs {1} points)")]
    GridMismatch(usize, usize),
    #[error("reference spectrum is zero at omega = {0:e}")]
    ZeroReference(f64),
    #[error("detector resolution must be positive, got {0:e}")]
    BadResolution(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    Raw,
    Detector,
    Blackbody,
    Ratio,
}

impl SpectrumKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Raw => "raw",
            Self::Detector => "detector",
            Self::Blackbody => "blackbody",
            Self::Ratio => "ratio",
        }
    }
}

impl std::fmt::Display for SpectrumKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sampled spectrum. Values carry units of rad/s except for ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub omega: Vec<T>,
    pub value: Vec<T>,
    pub kind: SpectrumKind,
}

impl<T: Scalar> Spectrum<T> {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

/// `(Ω_k, Ω_k·N_k·(1 − Γ_k))` for every mode.
pub fn emission_raw<T: Scalar>(state: &KineticState<T>, modes: &[Mode<T>]) -> Result<Spectrum<T>, SpectrumError> {
    let omega: Vec<T> = modes.iter().map(|m| m.omega).collect();
    let gamma: Vec<T> = modes.iter().map(|m| m.gamma).collect();
    emission_raw_parts(&state.photons, &omega, &gamma)
}

pub fn emission_raw_parts<T: Scalar>(photons: &[T], omega: &[T], gamma: &[T]) -> Result<Spectrum<T>, SpectrumError> {
    if photons.len() != omega.len() || gamma.len() != omega.len() {
        return Err(SpectrumError::DimensionMismatch { expected: omega.len(), got: photons.len() });
    }
    let value = photons
        .iter()
        .zip(omega)
        .zip(gamma)
        .map(|((n, w), g)| *w * *n * (T::one() - *g))
        .collect();
    Ok(Spectrum { omega: omega.to_vec(), value, kind: SpectrumKind::Raw })
}

/// `i·ω_max/(n + 1)` for `i = 1..=n`.
pub fn detector_grid<T: Scalar>(omega_max: T, n: usize) -> Vec<T> {
    let step = omega_max / T::count(n + 1);
    (1..=n).map(|i| step * T::count(i)).collect()
}

/// Raw spectrum seen through a Lorentzian detector of half-width `gamma_d`.
pub fn emission_detector<T: Scalar>(
    state: &KineticState<T>,
    modes: &[Mode<T>],
    samples: &[T],
    gamma_d: T,
) -> Result<Spectrum<T>, SpectrumError> {
    detector_response(&emission_raw(state, modes)?, samples, gamma_d)
}

pub fn detector_response<T: Scalar>(raw: &Spectrum<T>, samples: &[T], gamma_d: T) -> Result<Spectrum<T>, SpectrumError> {
    if !(gamma_d > T::zero()) {
        return Err(SpectrumError::BadResolution(gamma_d.to_f64_lossy()));
    }
    let value = samples
        .par_iter()
        .map(|&w| {
            raw.omega
                .iter()
                .zip(&raw.value)
                .map(|(&o, &s)| lorentzian(w - o, gamma_d) * s)
                .sum::<T>()
        })
        .collect();
    Ok(Spectrum { omega: samples.to_vec(), value, kind: SpectrumKind::Detector })
}

/// `ω/(e^{ħω/k_BT} − 1)`, which tends to `k_BT/ħ` as `ω → 0`.
pub fn blackbody_1d<T: Scalar>(samples: &[T], temperature: T) -> Spectrum<T> {
    let scale = temperature * lit(K_B / HBAR);
    let value = samples
        .iter()
        .map(|&w| {
            let x = w / scale;
            if x.abs() < lit(1e-4) {
                // x/(eˣ − 1) = 1 − x/2 + x²/12 − …
                scale * (T::one() - x / lit(2.0) + x * x / lit(12.0))
            } else {
                w / x.exp_m1()
            }
        })
        .collect();
    Spectrum { omega: samples.to_vec(), value, kind: SpectrumKind::Blackbody }
}

/// Pointwise `spec / reference` on a shared grid.
pub fn spectral_ratio<T: Scalar>(spec: &Spectrum<T>, reference: &Spectrum<T>) -> Result<Spectrum<T>, SpectrumError> {
    if spec.len() != reference.len() {
        return Err(SpectrumError::GridMismatch(spec.len(), reference.len()));
    }
    let value = spec
        .value
        .iter()
        .zip(&reference.value)
        .zip(&reference.omega)
        .map(|((s, r), w)| {
            if *r == T::zero() {
                Err(SpectrumError::ZeroReference(w.to_f64_lossy()))
            } else {
                Ok(*s / *r)
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(Spectrum { omega: spec.omega.clone(), value, kind: SpectrumKind::Ratio })
}
