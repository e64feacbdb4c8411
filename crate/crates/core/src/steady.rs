//! Steady states of the rate equations by Jacobian-free Newton–Krylov.

use crate::integrate::SplitSystem;
use crate::kinetics::{quasi_steady_photon, KineticModel, KineticState, KineticsError};
use crate::krylov::gmres;
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyOptions {
    /// Convergence tolerance on both residual measures.
    pub tol: f64,
    pub max_newton: usize,
    pub max_halvings: usize,
    pub gmres_restart: usize,
    pub gmres_tol: f64,
    pub gmres_max_iter: usize,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_newton: 50, max_halvings: 10, gmres_restart: 50, gmres_tol: 1e-2, gmres_max_iter: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyFailure {
    LineSearch,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyResult<T> {
    pub state: KineticState<T>,
    /// `‖F‖₂ / (‖y‖₂ · max-rate)`.
    pub residual_norm: T,
    /// RMS of `F_i / (|c_i|·max(|y_i|, floor))`: each residual measured
    /// against its own relaxation rate.
    pub relative_residual: T,
    /// Relative residual of the guess and of each accepted iterate.
    pub history: Vec<T>,
    pub newton_iterations: usize,
    pub krylov_iterations: usize,
    pub converged: bool,
    pub failure: Option<SteadyFailure>,
}

/// Absolute floor on `|y_i|` in the relative residual.
const VALUE_FLOOR: f64 = 1e-12;


struct Residual<T> {
    f: Vec<T>,
    c: Vec<T>,
    scaled: T,
    relative: T,
}

fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|x| *x * *x).sum::<T>().sqrt()
}

fn evaluate<T: Scalar>(model: &KineticModel<T>, y: &[T], max_rate: T) -> Residual<T> {
    let n = y.len();
    let mut c = vec![T::zero(); n];
    let mut f = vec![T::zero(); n];
    model.split_into(y, &mut c, &mut f);
    for i in 0..n {
        f[i] = c[i] * y[i] + f[i];
    }
    let floor = lit::<T>(VALUE_FLOOR);
    let tiny = max_rate * lit(1e-14);
    let rel: T = f
        .iter()
        .zip(&c)
        .zip(y)
        .map(|((fi, ci), yi)| {
            let q = *fi / (ci.abs().max(tiny) * yi.abs().max(floor));
            q * q
        })
        .sum::<T>()
        / T::count(n.max(1));
    let scaled = norm(&f) / (norm(y).max(floor) * max_rate);
    Residual { f, c, scaled, relative: rel.sqrt() }
}

fn project<T: Scalar>(y: &mut [T], n_atoms: usize) {
    for (i, v) in y.iter_mut().enumerate() {
        if *v < T::zero() {
            *v = T::zero();
        } else if i < n_atoms && *v > T::one() {
            *v = T::one();
        }
    }
}

struct Solver<'a, T> {
    model: &'a KineticModel<T>,
    opts: &'a SteadyOptions,
    max_rate: T,
    krylov: usize,
    fy: Vec<T>,
    probe: Vec<T>,
}

impl<T: Scalar> Solver<'_, T> {
    /// Solves `J·dx = −F` by GMRES, left-preconditioned with `diag(c)`.
    fn direction(&mut self, y: &[T], res: &Residual<T>) -> Vec<T> {
        let n = y.len();
        let tiny = self.max_rate * lit(1e-14);
        let precond: Vec<T> = res
            .c
            .iter()
            .map(|c| if c.abs() > tiny { *c } else { -tiny })
            .collect();
        let b: Vec<T> = res.f.iter().zip(&precond).map(|(f, m)| -*f / *m).collect();
        let ynorm = norm(y);
        let sqrt_eps = T::epsilon().sqrt();
        let (model, fy, probe) = (self.model, &mut self.fy, &mut self.probe);
        let lin = gmres(
            |v, out| {
                let vnorm = norm(v);
                if vnorm == T::zero() {
                    out.iter_mut().for_each(|o| *o = T::zero());
                    return;
                }
                let eps = sqrt_eps * (T::one() + ynorm) / vnorm;
                for i in 0..n {
                    probe[i] = y[i] + eps * v[i];
                }
                model.rhs_into(probe, fy);
                for i in 0..n {
                    out[i] = ((fy[i] - res.f[i]) / eps) / precond[i];
                }
            },
            &b,
            self.opts.gmres_restart,
            lit(self.opts.gmres_tol),
            self.opts.gmres_max_iter,
        );
        self.krylov += lin.iterations;
        lin.x
    }

    fn trial(&self, y: &[T], dx: &[T], lambda: T) -> (Vec<T>, Residual<T>) {
        let mut t: Vec<T> = y.iter().zip(dx).map(|(a, d)| *a + lambda * *d).collect();
        project(&mut t, self.model.n_atoms());
        let r = evaluate(self.model, &t, self.max_rate);
        (t, r)
    }
}

fn done<T: Scalar>(res: &Residual<T>, tol: T) -> bool {
    res.scaled < tol && res.relative < tol
}

/// Newton–Krylov solve of `rhs(state) = 0` from `guess`.
///
/// Converges when both the scaled residual `‖F‖/(‖y‖·max-rate)` and the
/// componentwise relative residual are below `opts.tol`. The scaled residual
/// alone is dominated by the fastest rows and accepts states whose slow
/// components are still drifting.
pub fn solve_steady<T: Scalar>(
    guess: &KineticState<T>,
    model: &KineticModel<T>,
    opts: &SteadyOptions,
) -> Result<SteadyResult<T>, KineticsError> {
    let mut y = guess.to_vector();
    model.check(&y)?;
    let tol: T = lit(opts.tol);
    let n = y.len();
    let mut s = Solver {
        model,
        opts,
        max_rate: model.max_rate(),
        krylov: 0,
        fy: vec![T::zero(); n],
        probe: vec![T::zero(); n],
    };
    let mut res = evaluate(model, &y, s.max_rate);
    let mut newton = 0usize;
    let mut failure = None;
    let mut history = vec![res.relative];

    while !done(&res, tol) {
        if newton >= opts.max_newton {
            failure = Some(SteadyFailure::IterationCap);
            break;
        }
        newton += 1;
        let dx = s.direction(&y, &res);
        let mut lambda = T::one();
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let (t, r) = s.trial(&y, &dx, lambda);
            if r.relative < res.relative {
                accepted = Some((t, r));
                break;
            }
            lambda = lambda * lit(0.5);
        }
        match accepted {
            Some((t, r)) => {
                y = t;
                res = r;
                history.push(res.relative);
            }
            None => {
                failure = Some(SteadyFailure::LineSearch);
                break;
            }
        }
    }

    Ok(SteadyResult {
        state: KineticState::from_vector(&y, model.n_atoms(), guess.t),
        residual_norm: res.scaled,
        relative_residual: res.relative,
        history,
        newton_iterations: newton,
        krylov_iterations: s.krylov,
        converged: failure.is_none(),
        failure,
    })
}

/// Analytic starting point: pumped Fermi–Dirac electrons and the
/// single-pair photon fixed point at the Lorentzian-weighted population.
pub fn seed_guess<T: Scalar>(model: &KineticModel<T>) -> KineticState<T> {
    let cap = lit::<T>(0.499);
    let n_e: Vec<T> = model
        .fermi
        .iter()
        .zip(&model.pump)
        .map(|(&f, &lam)| {
            let denom = lam + model.gamma_r;
            let boost = if denom > T::zero() { lam / denom * (T::one() - f) } else { T::zero() };
            (f + boost).min(cap)
        })
        .collect();
    let t = &model.tables;
    let g_p = t.coupling.g_p;
    let photons = (0..model.n_modes())
        .map(|k| {
            let col = &t.weights_t[k * t.n_atoms..(k + 1) * t.n_atoms];
            let csum = t.col_sums[k];
            if csum == T::zero() {
                return T::zero();
            }
            let nbar = col.iter().zip(&n_e).map(|(w, n)| *w * *n).sum::<T>() / csum;
            quasi_steady_photon(nbar, model.gamma_c, g_p * csum).unwrap_or(T::zero())
        })
        .collect();
    KineticState { n_e, photons, t: T::zero() }
}

/// `F(y)` for a state, as a packed vector.
pub fn residual_vector<T: Scalar>(model: &KineticModel<T>, state: &KineticState<T>) -> Vec<T> {
    let y = state.to_vector();
    let mut f = vec![T::zero(); y.len()];
    SplitSystem::rhs(model, &y, &mut f);
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::{bose_einstein, fermi_dirac, AtomGrid};
    use crate::config::PhysicalParams;
    use crate::modes::ModeClass;

    fn pair(params: &PhysicalParams, omega: f64) -> KineticModel<f64> {
        KineticModel::from_parts(&[omega], &[0.76], &[ModeClass::PhotonicCrystal], &[omega], params, 0.0)
    }

    #[test]
    fn clamped_pair_matches_oracle() {
        let p = PhysicalParams { gamma_c: 0.0, lambda_0: 0.0, gamma_r: 1e30, ..PhysicalParams::default() };
        let omega = 9.43e13;
        let m = pair(&p, omega);
        let r = solve_steady(&seed_guess(&m), &m, &SteadyOptions::default()).unwrap();
        assert!(r.converged);
        let n = r.state.n_e[0];
        let gain = m.tables.coupling.g_p * omega * 0.76;
        let oracle = quasi_steady_photon(n, 0.0, gain).unwrap();
        assert!((r.state.photons[0] - oracle).abs() <= 1e-12 * oracle);
        let be = bose_einstein(omega, p.temperature);
        assert!((r.state.photons[0] - be).abs() <= 1e-12 * be);
    }

    #[test]
    fn exact_fixed_point_needs_no_steps() {
        let p = PhysicalParams { gamma_c: 0.0, lambda_0: 0.0, ..PhysicalParams::default() };
        let omega = 9.43e13;
        let m = pair(&p, omega);
        let f = fermi_dirac(omega, p.temperature);
        let guess = KineticState { n_e: vec![f], photons: vec![bose_einstein(omega, p.temperature)], t: 0.0 };
        let r = solve_steady(&guess, &m, &SteadyOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.newton_iterations <= 1);
    }

    #[test]
    fn seed_guess_examples() {
        let grid = AtomGrid::<f64>::new(5e14, 50);
        let omega: Vec<f64> = (1..=20).map(|k| k as f64 * 2.3e13).collect();
        let gamma = vec![0.5; 20];
        let class = vec![ModeClass::PhotonicCrystal; 20];

        let off = PhysicalParams { lambda_0: 0.0, ..PhysicalParams::default() };
        let m = KineticModel::from_parts(&omega, &gamma, &class, &grid.omega, &off, 0.0);
        let s = seed_guess(&m);
        for (n, f) in s.n_e.iter().zip(&m.fermi) {
            assert_eq!(n, f);
        }
        assert!(s.is_valid());

        // γ_r ≫ Λ₀: the offset from Fermi–Dirac is Λ/(Λ+γ_r)·(1 − f).
        let eq = PhysicalParams::default();
        let m = KineticModel::from_parts(&omega, &gamma, &class, &grid.omega, &eq, 0.0);
        let s = seed_guess(&m);
        for i in 0..grid.len() {
            let (f, lam) = (m.fermi[i], m.pump[i]);
            let bound = lam / (lam + eq.gamma_r) * (1.0 - f);
            assert!((s.n_e[i] - f) <= bound * (1.0 + 1e-12));
            assert!((s.n_e[i] - f) / f < 0.025);
        }

        // Λ₀ = γ_r at ω = ω₀.
        let strong = PhysicalParams { lambda_0: 1e13, ..PhysicalParams::default() };
        let m = KineticModel::from_parts(&[1.6e14], &[0.5], &[ModeClass::PhotonicCrystal], &[1.6e14], &strong, 0.0);
        let f: f64 = fermi_dirac(1.6e14, 400.0);
        let s = seed_guess(&m);
        assert!((s.n_e[0] - (f + (1.0 - f) / 2.0).min(0.499)).abs() < 1e-12);
    }

    fn small_model(n_atom: f64, gamma_c: f64, lambda_0: f64, n_modes: usize) -> KineticModel<f64> {
        let p = PhysicalParams { gamma_c, lambda_0, ..PhysicalParams::default() }.with_n_atom(n_atom);
        let grid = AtomGrid::<f64>::new(p.omega_max, 40);
        let omega: Vec<f64> = (1..=n_modes).map(|k| k as f64 * p.omega_max / (n_modes + 1) as f64).collect();
        let gamma: Vec<f64> = (0..n_modes).map(|k| if k % 5 == 2 { 1e-3 } else { 0.7 }).collect();
        let class: Vec<ModeClass> = gamma
            .iter()
            .map(|&g| if g > 0.5 { ModeClass::PhotonicCrystal } else { ModeClass::InBandGap })
            .collect();
        KineticModel::from_parts(&omega, &gamma, &class, &grid.omega, &p, 0.0)
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

        #[test]
        fn equilibrium_solves_converge_and_verify(
            log_n in 22.0f64..25.0,
            log_gc in 8.0f64..13.0,
            n_modes in 3usize..30,
        ) {
            let m = small_model(10f64.powf(log_n), 10f64.powf(log_gc), 1e10, n_modes);
            let opts = SteadyOptions::default();
            let r = solve_steady(&seed_guess(&m), &m, &opts).unwrap();
            proptest::prop_assert!(r.history.windows(2).all(|w| w[1] < w[0]));
            proptest::prop_assert!(r.converged, "{:?}", r.failure);
            if r.converged {
                proptest::prop_assert!(r.state.is_valid());
                proptest::prop_assert!(r.residual_norm < opts.tol);
                let f = residual_vector(&m, &r.state);
                let y = r.state.to_vector();
                let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let again = norm(&f) / (norm(&y) * m.max_rate());
                proptest::prop_assert!(again < opts.tol);
                let resolved = solve_steady(&r.state, &m, &opts).unwrap();
                proptest::prop_assert_eq!(resolved.newton_iterations, 0);
            }
        }
    }
}
