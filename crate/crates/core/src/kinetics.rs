//! Coupled electron-population / photon-number rate equations.
//!
//! With `S_nk = (2n_n − 1)N_k + n_n` and `W_nk = Ω_kΓ_kL_nk`:
//!
//! ```text
//! dn_n/dt = −g_a Σ_k W_nk S_nk − γ_r (n_n − f_n) + Λ_n (1 − n_n)
//! dN_k/dt =  g_p Σ_n W_nk S_nk − γ_c N_k
//! ```
//!
//! The state vector is laid out as `[n_1 … n_{Nω}, N_1 … N_K]`.

use rayon::prelude::*;
use thiserror::Error;

use crate::atoms::{coupling_constants, fermi_dirac, pump_rate, AtomGrid, CouplingConstants};
use crate::config::PhysicalParams;
use crate::modes::{Mode, ModeClass};
use crate::scalar::{lit, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KineticsError {
    #[error("state has {got} entries, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in state at index {0}")]
    NonFinite(usize),
    #[error("no steady state: denominator {0:e} is not positive (population inversion)")]
    NoSteadyState(f64),
}

/// Dot product with a fixed 8-lane accumulation pattern. The summation order
/// depends only on the length, so results are identical on any thread count.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail = tail + *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Lorentzian weight `[1 + (Δ/γ)²]⁻¹`.
#[inline]
pub fn lorentzian<T: Scalar>(detuning: T, width: T) -> T {
    let x = detuning / width;
    (T::one() + x * x).recip()
}

/// Precomputed mode-atom coupling.
#[derive(Debug, Clone)]
pub struct CouplingTables<T> {
    pub n_atoms: usize,
    pub n_modes: usize,
    /// `L_nk`, row-major `n_atoms × n_modes`.
    pub lorentz: Vec<T>,
    /// `W_nk = Ω_kΓ_kL_nk`, row-major `n_atoms × n_modes`.
    pub weights: Vec<T>,
    /// `W` transposed, row-major `n_modes × n_atoms`.
    pub weights_t: Vec<T>,
    /// `Σ_k W_nk`.
    pub row_sums: Vec<T>,
    /// `Σ_n W_nk`.
    pub col_sums: Vec<T>,
    pub coupling: CouplingConstants<T>,
    pub class: Vec<ModeClass>,
}

impl<T: Scalar> CouplingTables<T> {
    /// Tables for modes given by `(Ω_k, Γ_k, class)`. Lorentzian entries below
    /// `cutoff` are stored as exact zeros.
    pub fn from_parts(
        mode_omega: &[T],
        mode_gamma: &[T],
        class: &[ModeClass],
        atom_omega: &[T],
        params: &PhysicalParams,
        cutoff: T,
    ) -> Self {
        let (na, nk) = (atom_omega.len(), mode_omega.len());
        let width: T = lit(params.gamma);
        let lorentz: Vec<T> = atom_omega
            .par_iter()
            .flat_map_iter(|&w| {
                mode_omega.iter().map(move |&o| {
                    let l = lorentzian(w - o, width);
                    if l < cutoff {
                        T::zero()
                    } else {
                        l
                    }
                })
            })
            .collect();
        let weights: Vec<T> = lorentz
            .par_chunks(nk.max(1))
            .flat_map_iter(|row| row.iter().enumerate().map(|(k, &l)| mode_omega[k] * mode_gamma[k] * l))
            .collect();
        let weights_t: Vec<T> = (0..nk)
            .into_par_iter()
            .flat_map_iter(|k| {
                let w = &weights;
                (0..na).map(move |n| w[n * nk + k])
            })
            .collect();
        let ones_k = vec![T::one(); nk];
        let ones_n = vec![T::one(); na];
        let row_sums = weights.par_chunks(nk.max(1)).map(|r| dot(r, &ones_k)).collect();
        let col_sums = weights_t.par_chunks(na.max(1)).map(|c| dot(c, &ones_n)).collect();
        Self {
            n_atoms: na,
            n_modes: nk,
            lorentz,
            weights,
            weights_t,
            row_sums,
            col_sums,
            coupling: coupling_constants(params),
            class: class.to_vec(),
        }
    }

    #[inline]
    pub fn lorentz_at(&self, n: usize, k: usize) -> T {
        self.lorentz[n * self.n_modes + k]
    }

    #[inline]
    pub fn weight_at(&self, n: usize, k: usize) -> T {
        self.weights[n * self.n_modes + k]
    }

    pub fn max_weight(&self) -> T {
        self.weights.iter().copied().fold(T::zero(), T::max)
    }
}

pub fn build_tables<T: Scalar>(
    modes: &[Mode<T>],
    grid: &AtomGrid<T>,
    params: &PhysicalParams,
    cutoff: T,
) -> CouplingTables<T> {
    let omega: Vec<T> = modes.iter().map(|m| m.omega).collect();
    let gamma: Vec<T> = modes.iter().map(|m| m.gamma).collect();
    let class: Vec<ModeClass> = modes.iter().map(|m| m.class).collect();
    CouplingTables::from_parts(&omega, &gamma, &class, &grid.omega, params, cutoff)
}

/// Electron populations and photon numbers at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState<T> {
    pub n_e: Vec<T>,
    pub photons: Vec<T>,
    pub t: T,
}

impl<T: Scalar> KineticState<T> {
    pub fn zeros(n_atoms: usize, n_modes: usize) -> Self {
        Self { n_e: vec![T::zero(); n_atoms], photons: vec![T::zero(); n_modes], t: T::zero() }
    }

    pub fn from_vector(y: &[T], n_atoms: usize, t: T) -> Self {
        Self { n_e: y[..n_atoms].to_vec(), photons: y[n_atoms..].to_vec(), t }
    }

    pub fn to_vector(&self) -> Vec<T> {
        self.n_e.iter().chain(&self.photons).copied().collect()
    }

    /// Checks `0 ≤ n_e ≤ 1`, `N_k ≥ 0` and finiteness.
    pub fn is_valid(&self) -> bool {
        self.n_e.iter().all(|&x| x.is_finite() && x >= T::zero() && x <= T::one())
            && self.photons.iter().all(|&x| x.is_finite() && x >= T::zero())
    }
}

/// Rate-equation model: coupling tables plus the per-atom thermal and pump
/// terms and the relaxation rates.
#[derive(Debug, Clone)]
pub struct KineticModel<T> {
    pub tables: CouplingTables<T>,
    /// `f_n(T)`.
    pub fermi: Vec<T>,
    /// `Λ(ω_n, T)`.
    pub pump: Vec<T>,
    pub gamma_r: T,
    pub gamma_c: T,
    pub atoms_per_frequency: T,
    pub atom_omega: Vec<T>,
    pub mode_omega: Vec<T>,
    pub mode_gamma: Vec<T>,
}

impl<T: Scalar> KineticModel<T> {
    pub fn new(modes: &[Mode<T>], grid: &AtomGrid<T>, params: &PhysicalParams, cutoff: T) -> Self {
        let omega: Vec<T> = modes.iter().map(|m| m.omega).collect();
        let gamma: Vec<T> = modes.iter().map(|m| m.gamma).collect();
        let class: Vec<ModeClass> = modes.iter().map(|m| m.class).collect();
        Self::from_parts(&omega, &gamma, &class, &grid.omega, params, cutoff)
    }

    pub fn from_parts(
        mode_omega: &[T],
        mode_gamma: &[T],
        class: &[ModeClass],
        atom_omega: &[T],
        params: &PhysicalParams,
        cutoff: T,
    ) -> Self {
        let temp: T = lit(params.temperature);
        Self {
            tables: CouplingTables::from_parts(mode_omega, mode_gamma, class, atom_omega, params, cutoff),
            fermi: atom_omega.iter().map(|&w| fermi_dirac(w, temp)).collect(),
            pump: atom_omega.iter().map(|&w| pump_rate(w, temp, params)).collect(),
            gamma_r: lit(params.gamma_r),
            gamma_c: lit(params.gamma_c),
            atoms_per_frequency: T::count(params.atoms_per_frequency),
            atom_omega: atom_omega.to_vec(),
            mode_omega: mode_omega.to_vec(),
            mode_gamma: mode_gamma.to_vec(),
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.tables.n_atoms
    }

    pub fn n_modes(&self) -> usize {
        self.tables.n_modes
    }

    pub fn dim(&self) -> usize {
        self.n_atoms() + self.n_modes()
    }

    /// Largest rate scale of the system: `max(γ_r, γ_c, g_p·max W)`.
    pub fn max_rate(&self) -> T {
        self.gamma_r.max(self.gamma_c).max(self.tables.coupling.g_p * self.tables.max_weight())
    }

    pub fn check(&self, y: &[T]) -> Result<(), KineticsError> {
        if y.len() != self.dim() {
            return Err(KineticsError::DimensionMismatch { expected: self.dim(), got: y.len() });
        }
        match y.iter().position(|x| !x.is_finite()) {
            Some(i) => Err(KineticsError::NonFinite(i)),
            None => Ok(()),
        }
    }

    /// Writes the split `F(y) = c ∘ y + r`, where `c` is each variable's own
    /// linear coefficient and `r ≥ 0` collects the remaining terms.
    pub fn split_into(&self, y: &[T], c: &mut [T], r: &mut [T]) {
        let (na, nk) = (self.n_atoms(), self.n_modes());
        let (ne, np) = y.split_at(na);
        let (ce, cp) = c.split_at_mut(na);
        let (re, rp) = r.split_at_mut(na);
        let t = &self.tables;
        let g = t.coupling;
        let two = lit::<T>(2.0);

        ce.par_iter_mut().zip(re.par_iter_mut()).enumerate().with_min_len(64).for_each(|(n, (c, r))| {
            let s1 = dot(&t.weights[n * nk..(n + 1) * nk], np);
            *c = -g.g_a * (two * s1 + t.row_sums[n]) - self.gamma_r - self.pump[n];
            *r = g.g_a * s1 + self.gamma_r * self.fermi[n] + self.pump[n];
        });
        cp.par_iter_mut().zip(rp.par_iter_mut()).enumerate().with_min_len(256).for_each(|(k, (c, r))| {
            let s2 = dot(&t.weights_t[k * na..(k + 1) * na], ne);
            *c = g.g_p * (two * s2 - t.col_sums[k]) - self.gamma_c;
            *r = g.g_p * s2;
        });
    }

    /// `dy = F(y)`.
    pub fn rhs_into(&self, y: &[T], dy: &mut [T]) {
        let mut c = vec![T::zero(); y.len()];
        self.split_into(y, &mut c, dy);
        for i in 0..y.len() {
            dy[i] = c[i] * y[i] + dy[i];
        }
    }

    /// Time derivatives `(dn_e/dt, dN_k/dt)` of a state.
    pub fn rhs(&self, state: &KineticState<T>) -> Result<(Vec<T>, Vec<T>), KineticsError> {
        let y = state.to_vector();
        self.check(&y)?;
        let mut dy = vec![T::zero(); y.len()];
        self.rhs_into(&y, &mut dy);
        let photons = dy.split_off(self.n_atoms());
        Ok((dy, photons))
    }

    /// Coupling terms only (no relaxation, pumping or loss).
    pub fn interaction_into(&self, y: &[T], dy: &mut [T]) {
        let (na, nk) = (self.n_atoms(), self.n_modes());
        let (ne, np) = y.split_at(na);
        let (de, dp) = dy.split_at_mut(na);
        let t = &self.tables;
        let g = t.coupling;
        let two = lit::<T>(2.0);
        de.par_iter_mut().enumerate().for_each(|(n, d)| {
            let s1 = dot(&t.weights[n * nk..(n + 1) * nk], np);
            *d = -g.g_a * ((two * ne[n] - T::one()) * s1 + ne[n] * t.row_sums[n]);
        });
        dp.par_iter_mut().enumerate().for_each(|(k, d)| {
            let s2 = dot(&t.weights_t[k * na..(k + 1) * na], ne);
            *d = g.g_p * ((two * s2 - t.col_sums[k]) * np[k] + s2);
        });
    }

    /// `Σ_k N_k + N_j·Σ_n n_n` for a packed state vector.
    pub fn total_excitation(&self, y: &[T]) -> T {
        let (ne, np) = y.split_at(self.n_atoms());
        np.iter().copied().sum::<T>() + self.atoms_per_frequency * ne.iter().copied().sum::<T>()
    }
}

/// `Σ_k N_k + N_j·Σ_n n_e`.
pub fn total_excitation<T: Scalar>(state: &KineticState<T>, params: &PhysicalParams) -> T {
    state.photons.iter().copied().sum::<T>() + T::count(params.atoms_per_frequency) * state.n_e.iter().copied().sum::<T>()
}

/// Fixed point of the photon equation for a single resonant pair:
/// `N = G·n / (γ_c + G·(1 − 2n))`, with `gain = G = g_p·Ω·Γ`.
pub fn quasi_steady_photon<T: Scalar>(n_e: T, gamma_c: T, gain: T) -> Result<T, KineticsError> {
    let denom = gamma_c + gain * (T::one() - lit::<T>(2.0) * n_e);
    if !(denom > T::zero()) {
        return Err(KineticsError::NoSteadyState(denom.to_f64_lossy()));
    }
    Ok(gain * n_e / denom)
}
