//! Two-level-atom frequency grid, thermal distributions and coupling constants.

use crate::config::PhysicalParams;
use crate::constants::{EPS0, HBAR, K_B};
use crate::scalar::{lit, Scalar};

/// Beyond this value of ħω/k_BT the Fermi-Dirac factor is evaluated as `e^{-x}`.
pub const EXP_ARG_LIMIT: f64 = 700.0;

/// Uniform interior grid of atom resonance frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomGrid<T> {
    pub omega: Vec<T>,
    pub spacing: T,
}

impl<T: Scalar> AtomGrid<T> {
    /// `ω_n = n·Δω`, `Δω = omega_max/(N_omega + 1)`, `n = 1..=N_omega`.
    pub fn new(omega_max: T, n_omega: usize) -> Self {
        let spacing = omega_max / T::count(n_omega + 1);
        let omega = (1..=n_omega).map(|n| spacing * T::count(n)).collect();
        Self { omega, spacing }
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

pub fn build_grid<T: Scalar>(params: &PhysicalParams) -> AtomGrid<T> {
    AtomGrid::new(lit(params.omega_max), params.n_omega)
}

/// `ħω / k_BT`.
#[inline]
pub fn reduced_energy<T: Scalar>(omega: T, temperature: T) -> T {
    omega * lit(HBAR / K_B) / temperature
}

/// `1 / (1 + e^{ħω/k_BT})`.
pub fn fermi_dirac<T: Scalar>(omega: T, temperature: T) -> T {
    let x = reduced_energy(omega, temperature);
    if x > lit(EXP_ARG_LIMIT) {
        (-x).exp()
    } else {
        (T::one() + x.exp()).recip()
    }
}

/// `1 / (e^{ħω/k_BT} − 1)` for `ω > 0`.
pub fn bose_einstein<T: Scalar>(omega: T, temperature: T) -> T {
    let x = reduced_energy(omega, temperature);
    if x > lit(EXP_ARG_LIMIT) {
        (-x).exp()
    } else {
        x.exp_m1().recip()
    }
}

/// `Λ₀·e^{ħ(ω₀ − ω)/k_BT}`, with the exponent capped to avoid overflow.
pub fn pump_rate<T: Scalar>(omega: T, temperature: T, params: &PhysicalParams) -> T {
    let lambda_0: T = lit(params.lambda_0);
    if lambda_0 == T::zero() {
        return T::zero();
    }
    let cap = lit::<T>(EXP_ARG_LIMIT).min(T::max_value().ln() - lambda_0.ln() - T::one());
    let x = reduced_energy(lit::<T>(params.omega_0) - omega, temperature);
    lambda_0 * x.min(cap).exp()
}

/// Dimensionless atom-side and photon-side coupling constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingConstants<T> {
    pub g_a: T,
    pub g_p: T,
}

/// `g_a = 2µ²n_V/(ħε₀γ)`, `g_p = N_j·g_a`.
pub fn coupling_constants<T: Scalar>(params: &PhysicalParams) -> CouplingConstants<T> {
    let g_a = 2.0 * params.mu * params.mu * params.n_v / (HBAR * EPS0 * params.gamma);
    let g_a: T = lit(g_a);
    CouplingConstants { g_a, g_p: g_a * T::count(params.atoms_per_frequency) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::thermal_frequency;
    use proptest::prelude::*;

    #[test]
    fn default_grid_spacing() {
        let g: AtomGrid<f64> = build_grid(&PhysicalParams::default());
        assert_eq!(g.len(), 500);
        assert!((g.spacing - 9.980e11).abs() / 9.98e11 < 1e-4);
        assert_eq!(g.omega[0], g.spacing);
        assert!((g.omega[499] - 4.990e14).abs() / 4.99e14 < 1e-4);
        assert!(g.omega.iter().all(|&w| w > 0.0 && w < 5e14));
        assert!(g.omega.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn single_point_grid_is_midpoint() {
        let g = AtomGrid::<f64>::new(5e14, 1);
        assert_eq!(g.omega, vec![2.5e14]);
    }

    #[test]
    fn fermi_dirac_reference_values() {
        assert_eq!(fermi_dirac(0.0, 400.0), 0.5);
        let w = thermal_frequency(400.0);
        assert!((w - 5.237e13).abs() / 5.237e13 < 1e-3);
        let expected = 1.0 / (1.0 + std::f64::consts::E);
        assert!((fermi_dirac(w, 400.0) - expected).abs() < 1e-15);
        assert!((expected - 0.26894).abs() < 1e-5);
        let far: f64 = fermi_dirac(1000.0 * w, 400.0);
        assert!((0.0..1e-300).contains(&far));
    }

    #[test]
    fn pump_rate_reference_values() {
        let p = PhysicalParams::default();
        assert!((pump_rate::<f64>(p.omega_0, 400.0, &p) - p.lambda_0).abs() < 1e-6);
        let w = p.omega_0 + thermal_frequency(400.0);
        assert!((pump_rate::<f64>(w, 400.0, &p) - p.lambda_0 / std::f64::consts::E).abs() < 1e-5);
        let off = PhysicalParams { lambda_0: 0.0, ..p.clone() };
        assert_eq!(pump_rate(1e14, 400.0, &off), 0.0);
        let cold: f64 = pump_rate(1.0, 1e-3, &p);
        assert!(cold.is_finite());
    }

    #[test]
    fn coupling_constants_reference_values() {
        let p = PhysicalParams::default();
        let g: CouplingConstants<f64> = coupling_constants(&p);
        assert!((g.g_p - 4.65).abs() / 4.65 < 0.01);
        assert_eq!(g.g_p, g.g_a * 600.0);
        let weak: CouplingConstants<f64> = coupling_constants(&p.with_n_atom(5e22));
        assert!((weak.g_p - 0.0465).abs() / 0.0465 < 0.01);
        let none: CouplingConstants<f64> = coupling_constants(&p.with_n_atom(0.0));
        assert_eq!((none.g_a, none.g_p), (0.0, 0.0));
    }

    #[test]
    fn bose_einstein_matches_pair_fixed_point() {
        for w in [1e13, 9.43e13, 3e14] {
            let f: f64 = fermi_dirac(w, 400.0);
            let n: f64 = bose_einstein(w, 400.0);
            assert!((f / (1.0 - 2.0 * f) - n).abs() <= 1e-13 * n);
        }
        assert!((bose_einstein::<f64>(9.43e13, 400.0) - 0.1979).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn fermi_dirac_reflection(x in -600.0f64..600.0, t in 10.0f64..5000.0) {
            let w = x * thermal_frequency(t);
            let s = fermi_dirac(w, t) + fermi_dirac(-w, t);
            prop_assert!((s - 1.0).abs() < 1e-14);
        }

        #[test]
        fn distributions_decrease(w in 1e11f64..4.9e14, dw in 1e9f64..1e13, t in 50.0f64..2000.0) {
            let p = PhysicalParams::default();
            prop_assert!(fermi_dirac(w + dw, t) < fermi_dirac(w, t));
            prop_assert!(fermi_dirac(w, t) > 0.0);
            prop_assert!(pump_rate(w + dw, t, &p) < pump_rate(w, t, &p));
            prop_assert!(pump_rate(w, t, &p) > 0.0);
        }

        #[test]
        fn coupling_scaling(n in 1e20f64..1e26, mu_scale in 0.1f64..10.0, gamma_scale in 0.1f64..10.0) {
            let base = PhysicalParams::default();
            let g0: CouplingConstants<f64> = coupling_constants(&base);
            let p = PhysicalParams {
                mu: base.mu * mu_scale,
                gamma: base.gamma * gamma_scale,
                ..base.with_n_atom(n)
            };
            let g: CouplingConstants<f64> = coupling_constants(&p);
            let expected = g0.g_p * (n / base.n_atom) * mu_scale * mu_scale / gamma_scale;
            prop_assert!((g.g_p - expected).abs() <= 1e-12 * expected);
            prop_assert_eq!(g.g_p, g.g_a * 600.0);
        }
    }
}
