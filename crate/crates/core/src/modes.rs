//! Eigenmodes of a closed cavity with an embedded delta-plane photonic crystal.
//!
//! The field obeys `u'' + q²u = 0` between planes (`q = Ω/c`), vanishes at both
//! perfect mirrors, and its derivative jumps by `-q²η u(zᵢ)` at each plane.
//! Frequencies are found by shooting from `z = 0`. The shooting state is kept
//! as a Prüfer angle θ in the `(u, u'/q)` plane, so `sin θ(L)` is an O(1)
//! mismatch and `floor(θ(L)/π)` counts the eigenfrequencies below Ω.

use num_complex::Complex;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::PhysicalParams;
use crate::constants::{C_LIGHT, EPS0};
use crate::roots::{brent, RootError};
use crate::scalar::{lit, Scalar};

/// Scan spacing in units of the empty-cavity mode spacing `πc/L`.
pub const SCAN_FRACTION: f64 = 0.3;
/// Relative tolerance of eigenfrequency refinement.
pub const ROOT_RTOL: f64 = 1e-12;
/// Maximum `|sin θ(L)|` accepted by [`Cavity::build_mode`].
pub const MISMATCH_TOL: f64 = 1e-6;
/// Minimum samples per vacuum wavelength when counting field peaks.
pub const PEAK_SAMPLES_PER_WAVELENGTH: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModeError {
    #[error("position z = {z:e} m lies outside the cavity [0, {length:e}] m")]
    OutsideCavity { z: f64, length: f64 },
    #[error("angular frequency must be positive and finite (got {0:e})")]
    InvalidFrequency(f64),
    #[error("Ω = {omega:e} rad/s is not an eigenfrequency (mismatch {mismatch:e})")]
    NotARoot { omega: f64, mismatch: f64 },
    #[error("field reconstruction produced non-finite values at Ω = {0:e} rad/s")]
    NonFinite(f64),
    #[error("root refinement failed for eigenvalue #{n}: {source}")]
    Root {
        n: i64,
        #[source]
        source: RootError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeClass {
    PhotonicCrystal,
    InBandGap,
}

impl ModeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeClass::PhotonicCrystal => "PhotonicCrystal",
            ModeClass::InBandGap => "InBandGap",
        }
    }
}

impl std::str::FromStr for ModeClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PhotonicCrystal" => Ok(ModeClass::PhotonicCrystal),
            "InBandGap" => Ok(ModeClass::InBandGap),
            other => Err(format!("unknown mode class `{other}`")),
        }
    }
}

/// Field on one plane-free interval.
///
/// `u(z) = a·e^{iqz} + b·e^{-iqz}`, equivalently
/// `amp_sin·sin(q(z - z_start)) + amp_cos·cos(q(z - z_start))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region<T> {
    pub z_start: T,
    pub z_end: T,
    pub a: Complex<T>,
    pub b: Complex<T>,
    pub amp_sin: T,
    pub amp_cos: T,
}

impl<T: Scalar> Region<T> {
    fn new(z_start: T, z_end: T, amp_sin: T, amp_cos: T, q: T) -> Self {
        let half = lit::<T>(0.5);
        let phase = Complex::from_polar(T::one(), -q * z_start);
        let a = Complex::new(amp_cos * half, -amp_sin * half) * phase;
        let b = Complex::new(amp_cos * half, amp_sin * half) * phase.conj();
        Self { z_start, z_end, a, b, amp_sin, amp_cos }
    }

    fn scaled(&self, s: T, q: T) -> Self {
        Self::new(self.z_start, self.z_end, self.amp_sin * s, self.amp_cos * s, q)
    }

    #[inline]
    pub fn field(&self, q: T, z: T) -> T {
        let (s, c) = (q * (z - self.z_start)).sin_cos();
        self.amp_sin * s + self.amp_cos * c
    }

    #[inline]
    fn derivative(&self, q: T, z: T) -> T {
        let (s, c) = (q * (z - self.z_start)).sin_cos();
        q * (self.amp_sin * c - self.amp_cos * s)
    }

    /// `∫ u² dz` from `z_start` to `min(z_end, upto)`, in closed form.
    pub fn intensity_integral(&self, q: T, upto: T) -> T {
        let end = self.z_end.min(upto);
        if end <= self.z_start {
            return T::zero();
        }
        let x = q * (end - self.z_start);
        let half = lit::<T>(0.5);
        let quarter = lit::<T>(0.25);
        let s2 = (x + x).sin();
        let s = x.sin();
        let (aa, bb) = (self.amp_sin, self.amp_cos);
        (aa * aa * (x * half - s2 * quarter) + bb * bb * (x * half + s2 * quarter) + aa * bb * s * s) / q
    }
}

/// One normalized cavity eigenmode.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode<T> {
    pub index: usize,
    /// Eigenfrequency Ω_k, rad/s.
    pub omega: T,
    pub regions: Vec<Region<T>>,
    /// Delta-plane strength the mode was computed for, m.
    pub eta: T,
    /// Confinement factor Γ_k.
    pub gamma: T,
    pub m_peak: usize,
    /// `2π·m_peak / L_c`, rad/m.
    pub k_assigned: T,
    pub class: ModeClass,
}

impl<T: Scalar> Mode<T> {
    #[inline]
    pub fn wavenumber(&self) -> T {
        self.omega / lit(C_LIGHT)
    }

    /// Field value `u(z)` (units such that the normalization integral is 1).
    pub fn field(&self, z: T) -> T {
        let i = self.regions.partition_point(|r| r.z_end < z).min(self.regions.len() - 1);
        self.regions[i].field(self.wavenumber(), z)
    }

    /// `∫₀^upto u² dz`, excluding delta-plane terms.
    pub fn intensity_integral(&self, upto: T) -> T {
        let q = self.wavenumber();
        self.regions.iter().map(|r| r.intensity_integral(q, upto)).sum()
    }

    /// `η·Σᵢ u(zᵢ)²` over the planes.
    pub fn plane_weight(&self) -> T {
        self.eta * self.regions.iter().skip(1).map(|r| r.amp_cos * r.amp_cos).sum::<T>()
    }

    /// `∫ε|u|²dz / ε₀`, delta planes included. Equal to 1 for a normalized mode.
    pub fn norm(&self) -> T {
        let length = self.regions.last().map(|r| r.z_end).unwrap_or_else(T::zero);
        self.intensity_integral(length) + self.plane_weight()
    }
}

/// Background permittivity at a point plus the delta planes of the structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Permittivity {
    /// ε₀, F/m.
    pub background: f64,
    /// Plane positions zᵢ, m. Empty when η = 0.
    pub planes: Vec<f64>,
    pub eta: f64,
}

/// Permittivity profile at `z`. The delta planes are reported analytically.
pub fn permittivity(z: f64, params: &PhysicalParams) -> Result<Permittivity, ModeError> {
    if !(0.0..=params.length).contains(&z) {
        return Err(ModeError::OutsideCavity { z, length: params.length });
    }
    let planes = if params.eta > 0.0 { params.plane_positions() } else { Vec::new() };
    Ok(Permittivity { background: EPS0, planes, eta: params.eta })
}

/// Cavity geometry in the working scalar type.
#[derive(Debug, Clone, PartialEq)]
pub struct Cavity<T> {
    pub length: T,
    pub crystal_length: T,
    pub planes: Vec<T>,
    pub eta: T,
}

impl<T: Scalar> Cavity<T> {
    pub fn new(params: &PhysicalParams) -> Self {
        Self {
            length: lit(params.length),
            crystal_length: lit(params.crystal_length),
            planes: params.plane_positions().into_iter().map(lit).collect(),
            eta: lit(params.eta),
        }
    }

    /// Empty-cavity mode spacing `πc/L`, rad/s.
    pub fn mode_spacing(&self) -> T {
        T::PI() * lit(C_LIGHT) / self.length
    }

    fn active_planes(&self) -> &[T] {
        if self.eta > T::zero() {
            &self.planes
        } else {
            &[]
        }
    }

    /// Prüfer angle of the shooting solution at `z = L`.
    pub fn prufer_angle(&self, omega: T) -> T {
        let pi = T::PI();
        let q = omega / lit(C_LIGHT);
        let qeta = q * self.eta;
        let mut theta = T::zero();
        let mut z = T::zero();
        for &zp in self.active_planes() {
            theta = theta + q * (zp - z);
            z = zp;
            let m = (theta / pi).floor();
            let (s, c) = (theta - m * pi).sin_cos();
            theta = m * pi + s.atan2(c - qeta * s);
        }
        theta + q * (self.length - z)
    }

    /// Number of eigenfrequencies in `(0, omega]`.
    pub fn count_below(&self, omega: T) -> i64 {
        (self.prufer_angle(omega) / T::PI()).floor().to_i64().unwrap_or(i64::MAX)
    }

    /// Scaled end-wall field `sin θ(L)`; zero exactly at eigenfrequencies.
    pub fn shoot_mismatch(&self, omega: T) -> Result<T, ModeError> {
        if !(omega > T::zero()) || !omega.is_finite() {
            return Err(ModeError::InvalidFrequency(omega.to_f64_lossy()));
        }
        Ok(self.prufer_angle(omega).sin())
    }

    /// All eigenfrequencies in `(omega_min, omega_max]`, ascending.
    pub fn find_eigenfrequencies(&self, omega_min: T, omega_max: T) -> Result<Vec<T>, ModeError> {
        let lo = omega_min.max(T::zero());
        if !(omega_max > lo) {
            return Ok(Vec::new());
        }
        let spacing = self.mode_spacing() * lit(SCAN_FRACTION);
        let cells = ((omega_max - lo) / spacing).ceil().to_usize().unwrap_or(1).max(1);
        let width = (omega_max - lo) / T::count(cells);
        let grid: Vec<T> = (0..=cells)
            .map(|i| if i == cells { omega_max } else { lo + width * T::count(i) })
            .collect();
        let counts: Vec<i64> = grid.par_iter().map(|&w| if w > T::zero() { self.count_below(w) } else { 0 }).collect();

        let tasks: Vec<(usize, i64)> = counts
            .windows(2)
            .enumerate()
            .flat_map(|(i, c)| (c[0] + 1..=c[1]).map(move |n| (i, n)))
            .collect();

        let rtol = lit::<T>(ROOT_RTOL).max(T::epsilon() * lit(4.0));
        tasks
            .par_iter()
            .map(|&(i, n)| {
                let target = T::PI() * T::from_i64(n).expect("eigenvalue index");
                brent(|w| self.prufer_angle(w) - target, grid[i], grid[i + 1], T::zero(), rtol, 200)
                    .map_err(|source| ModeError::Root { n, source })
            })
            .collect()
    }

    /// Builds the normalized mode at eigenfrequency `omega`. The returned
    /// mode has `index` 0; callers assign indices.
    pub fn build_mode(&self, omega: T) -> Result<Mode<T>, ModeError> {
        let mismatch = self.shoot_mismatch(omega)?;
        let tol = lit::<T>(MISMATCH_TOL).max(T::epsilon() * self.prufer_angle(omega).abs() * lit(64.0));
        if mismatch.abs() > tol {
            return Err(ModeError::NotARoot { omega: omega.to_f64_lossy(), mismatch: mismatch.to_f64_lossy() });
        }
        let q = omega / lit(C_LIGHT);
        let regions = self.shoot_regions(q);
        if regions.iter().any(|r| !r.amp_sin.is_finite() || !r.amp_cos.is_finite()) {
            return Err(ModeError::NonFinite(omega.to_f64_lossy()));
        }
        let mut mode = Mode {
            index: 0,
            omega,
            regions,
            eta: self.eta,
            gamma: T::zero(),
            m_peak: 0,
            k_assigned: T::zero(),
            class: ModeClass::InBandGap,
        };
        let norm = mode.norm();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(ModeError::NonFinite(omega.to_f64_lossy()));
        }
        let s = norm.sqrt().recip();
        mode.regions = mode.regions.iter().map(|r| r.scaled(s, q)).collect();

        mode.gamma = mode.intensity_integral(self.crystal_length) / mode.intensity_integral(self.length);
        mode.m_peak = count_peaks(&mode, self.crystal_length);
        mode.k_assigned = lit::<T>(2.0) * T::PI() * T::count(mode.m_peak) / self.crystal_length;
        mode.class = if mode.gamma > self.crystal_length / self.length {
            ModeClass::PhotonicCrystal
        } else {
            ModeClass::InBandGap
        };
        Ok(mode)
    }

    /// Unnormalized shooting solution with `u(0) = 0`, `u'(0) = 1`.
    fn shoot_regions(&self, q: T) -> Vec<Region<T>> {
        let limit = T::max_value().sqrt().sqrt();
        let mut regions = Vec::with_capacity(self.active_planes().len() + 1);
        let (mut amp_sin, mut amp_cos) = (q.recip(), T::zero());
        let mut z0 = T::zero();
        for &zp in self.active_planes() {
            let r = Region::new(z0, zp, amp_sin, amp_cos, q);
            let u = r.field(q, zp);
            let du = r.derivative(q, zp) - q * q * self.eta * u;
            regions.push(r);
            amp_sin = du / q;
            amp_cos = u;
            z0 = zp;
            let size = amp_sin.abs().max(amp_cos.abs());
            if size > limit {
                let s = size.recip();
                for r in regions.iter_mut() {
                    *r = r.scaled(s, q);
                }
                amp_sin = amp_sin * s;
                amp_cos = amp_cos * s;
            }
        }
        regions.push(Region::new(z0, self.length, amp_sin, amp_cos, q));
        regions
    }

    /// Modes for the given eigenfrequencies, indexed in ascending order, with
    /// numerical duplicates removed.
    pub fn modes_from_frequencies(&self, omegas: &[T]) -> Result<Vec<Mode<T>>, ModeError> {
        let built: Vec<Mode<T>> = omegas.par_iter().map(|&w| self.build_mode(w)).collect::<Result<_, _>>()?;
        let mut modes: Vec<Mode<T>> = Vec::with_capacity(built.len());
        for m in built {
            if let Some(prev) = modes.last() {
                let close = (m.omega - prev.omega).abs() <= lit::<T>(1e-9) * m.omega.abs();
                if close && m.m_peak == prev.m_peak {
                    continue;
                }
            }
            modes.push(m);
        }
        for (i, m) in modes.iter_mut().enumerate() {
            m.index = i;
        }
        Ok(modes)
    }

    /// Every mode in `(0, omega_max]`.
    pub fn find_modes(&self, omega_max: T) -> Result<Vec<Mode<T>>, ModeError> {
        let omegas = self.find_eigenfrequencies(T::zero(), omega_max)?;
        self.modes_from_frequencies(&omegas)
    }
}

/// Scaled end-wall mismatch for the cavity described by `params`.
pub fn shoot_mismatch<T: Scalar>(omega: T, params: &PhysicalParams) -> Result<T, ModeError> {
    Cavity::<T>::new(params).shoot_mismatch(omega)
}

/// Sorted eigenfrequencies in `(omega_min, omega_max]`.
pub fn find_eigenfrequencies<T: Scalar>(
    params: &PhysicalParams,
    omega_min: T,
    omega_max: T,
) -> Result<Vec<T>, ModeError> {
    Cavity::<T>::new(params).find_eigenfrequencies(omega_min, omega_max)
}

pub fn build_mode<T: Scalar>(omega: T, params: &PhysicalParams) -> Result<Mode<T>, ModeError> {
    Cavity::<T>::new(params).build_mode(omega)
}

/// Every mode below `params.omega_max`.
pub fn find_modes<T: Scalar>(params: &PhysicalParams) -> Result<Vec<Mode<T>>, ModeError> {
    Cavity::<T>::new(params).find_modes(lit(params.omega_max))
}

/// Local maxima of the real field `u` (taken with `u'(0) > 0`) on
/// `(0, crystal_length)`.
pub fn count_peaks<T: Scalar>(mode: &Mode<T>, crystal_length: T) -> usize {
    let wavelength = lit::<T>(2.0) * T::PI() / mode.wavenumber();
    let per = T::count(PEAK_SAMPLES_PER_WAVELENGTH);
    let n = (crystal_length / wavelength * per).ceil().to_usize().unwrap_or(0).max(2) + 1;
    let dz = crystal_length / T::count(n);
    let u: Vec<T> = (0..=n).map(|i| mode.field(dz * T::count(i))).collect();
    u.windows(3).filter(|w| w[1] > w[0] && w[1] >= w[2]).count()
}

/// PhotonicCrystal-mode dispersion points and band-gap intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct BandStructure<T> {
    /// `(k_assigned, Ω_k)` for PhotonicCrystal modes, ascending in Ω.
    pub points: Vec<(T, T)>,
    /// Gap intervals `[ω_lo, ω_hi]`, ascending.
    pub gaps: Vec<(T, T)>,
}

impl<T: Scalar> BandStructure<T> {
    pub fn in_gap(&self, omega: T) -> bool {
        self.gaps.iter().any(|&(lo, hi)| omega > lo && omega < hi)
    }

    pub fn gap_measure(&self) -> T {
        self.gaps.iter().map(|&(lo, hi)| hi - lo).sum()
    }
}

fn median<T: Scalar>(values: &mut [T]) -> T {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) * lit(0.5)
    }
}

/// Band structure of one mode set (one η).
///
/// PhotonicCrystal modes are grouped into clusters wherever consecutive ones
/// sit more than 3× the typical mode spacing apart. A hole between clusters is
/// a gap when it is more than 3× wider than the median of up to three
/// neighbouring holes on each side; a single hole is a gap.
/// Gaps are PhotonicCrystal-free holes wider than 3× the median mode spacing
/// whose deepest mode is confined less than `GAP_DEPTH` times `threshold`
/// (the classification ratio `L_c/L`). Holes between modes of one band keep
/// Γ near the threshold and are not reported.
pub fn band_structure<T: Scalar>(modes: &[Mode<T>], threshold: T) -> BandStructure<T> {
    let points = modes
        .iter()
        .filter(|m| m.class == ModeClass::PhotonicCrystal)
        .map(|m| (m.k_assigned, m.omega))
        .collect();
    if modes.len() < 2 {
        return BandStructure { points, gaps: Vec::new() };
    }
    let mut spacings: Vec<T> = modes.windows(2).map(|w| w[1].omega - w[0].omega).collect();
    let min_width = lit::<T>(3.0) * median(&mut spacings);
    let depth = lit::<T>(GAP_DEPTH) * threshold;

    let pc: Vec<usize> = (0..modes.len()).filter(|&i| modes[i].class == ModeClass::PhotonicCrystal).collect();
    let gaps = pc
        .windows(2)
        .filter(|w| modes[w[1]].omega - modes[w[0]].omega > min_width)
        .filter(|w| modes[w[0] + 1..w[1]].iter().any(|m| m.gamma < depth))
        .map(|w| (modes[w[0]].omega, modes[w[1]].omega))
        .collect();
    BandStructure { points, gaps }
}

/// Fraction of the classification threshold below which a hole counts as a gap.
pub const GAP_DEPTH: f64 = 0.02;
