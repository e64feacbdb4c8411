//! Regime presets, run manifests and the staged pipeline
//! `modes → bands → dynamics → steady → spectrum`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;
use toml::{Table as TomlTable, Value};

use crate::atoms::{build_grid, AtomGrid};
use crate::config::{ConfigError, PhysicalParams, Scale};
use crate::integrate::{integrate, Method, Options};
use crate::io::{self, fmt_f64, IoError, Table};
use crate::kinetics::{KineticModel, KineticState};
use crate::modes::{band_structure, Cavity, Mode, ModeClass};
use crate::spectra::{self, Spectrum};
use crate::steady::{seed_guess, solve_steady, SteadyOptions};

pub const PRESETS: [&str; 4] = ["eq-strong", "eq-weak", "eq-lossy", "noneq"];

/// Name of the sidecar manifest written next to every run's outputs.
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("unknown preset `{0}` (valid presets: eq-strong, eq-weak, eq-lossy, noneq)")]
    UnknownPreset(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: Stage, message: String },
}

/// Parameter overrides of a named regime.
pub fn preset(name: &str) -> Result<Vec<(String, Value)>, PipelineError> {
    let values: [(&str, f64); 4] = match name {
        "eq-strong" => [("gamma_r", 1e13), ("Lambda_0", 1e10), ("n_atom", 5e24), ("gamma_c", 1e9)],
        "eq-weak" => [("gamma_r", 1e13), ("Lambda_0", 1e10), ("n_atom", 5e22), ("gamma_c", 1e9)],
        "eq-lossy" => [("gamma_r", 1e13), ("Lambda_0", 1e10), ("n_atom", 5e24), ("gamma_c", 5e12)],
        "noneq" => [("gamma_r", 1e10), ("Lambda_0", 1e10), ("n_atom", 5e24), ("gamma_c", 1e9)],
        other => return Err(PipelineError::UnknownPreset(other.into())),
    };
    Ok(values.iter().map(|(k, v)| (k.to_string(), Value::Float(*v))).collect())
}

/// Parameters from an optional config document, a preset and `key=value`
/// overrides (later sources win), at the requested scale.
pub fn resolve_params(
    config: Option<&Path>,
    preset_name: Option<&str>,
    overrides: &[(String, Value)],
    scale: Scale,
) -> Result<PhysicalParams, PipelineError> {
    let mut all = match preset_name {
        Some(name) => preset(name)?,
        None => Vec::new(),
    };
    all.extend(overrides.iter().cloned());
    Ok(PhysicalParams::load(config, &all)?.scaled(scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Modes,
    Bands,
    Dynamics,
    Steady,
    Spectrum,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Modes, Stage::Bands, Stage::Dynamics, Stage::Steady, Stage::Spectrum];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Modes => "modes",
            Stage::Bands => "bands",
            Stage::Dynamics => "dynamics",
            Stage::Steady => "steady",
            Stage::Spectrum => "spectrum",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage `{s}` (expected modes, bands, dynamics, steady or spectrum)"))
    }
}

/// Everything needed to reproduce a run, plus what the run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub params: PhysicalParams,
    pub preset: Option<String>,
    pub scale: Scale,
    pub stages: Vec<Stage>,
    pub out_dir: PathBuf,
    /// Mode-set cache; `<out_dir>/cache` when unset.
    pub cache_dir: Option<PathBuf>,
    pub t_end: f64,
    pub integrate: Options,
    pub steady: SteadyOptions,
    /// Trajectory CSV whose last row seeds the steady solve.
    pub seed_from: Option<PathBuf>,
    /// Photon CSV used by the spectrum stage instead of a computed state.
    pub spectrum_input: Option<PathBuf>,
    pub detector_samples: usize,
    pub blackbody: bool,
    pub ratio: bool,
    pub outputs: Vec<PathBuf>,
    /// `(name, value)` run metrics, in stage order.
    pub metrics: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(params: PhysicalParams, stages: Vec<Stage>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            params,
            preset: None,
            scale: Scale::Full,
            stages,
            out_dir: out_dir.into(),
            cache_dir: None,
            t_end: 1e-7,
            integrate: Options { method: Method::ExponentialDiagonal, ..Options::default() },
            steady: SteadyOptions::default(),
            seed_from: None,
            spectrum_input: None,
            detector_samples: spectra::DETECTOR_SAMPLES,
            blackbody: true,
            ratio: true,
            outputs: Vec::new(),
            metrics: Vec::new(),
        }
    }

    /// Reads a run description: top-level run settings and a `[params]`
    /// table of parameter keys. Relative paths resolve against `base`.
    pub fn from_toml_str(doc: &str, base: &Path, extra: &[(String, Value)]) -> Result<Self, PipelineError> {
        let table: TomlTable = doc.parse().map_err(|e: toml::de::Error| PipelineError::Manifest(e.message().into()))?;
        let bad = |key: &str, what: &str| PipelineError::Manifest(format!("`{key}` must be {what}"));
        let string = |key: &str| -> Result<Option<String>, PipelineError> {
            match table.get(key) {
                None => Ok(None),
                Some(Value::String(s)) => Ok(Some(s.clone())),
                Some(_) => Err(bad(key, "a string")),
            }
        };
        let number = |key: &str| -> Result<Option<f64>, PipelineError> {
            match table.get(key) {
                None => Ok(None),
                Some(Value::Float(x)) => Ok(Some(*x)),
                Some(Value::Integer(i)) => Ok(Some(*i as f64)),
                Some(_) => Err(bad(key, "a number")),
            }
        };
        let flag = |key: &str, default: bool| -> Result<bool, PipelineError> {
            match table.get(key) {
                None => Ok(default),
                Some(Value::Boolean(b)) => Ok(*b),
                Some(_) => Err(bad(key, "a boolean")),
            }
        };
        const KNOWN: [&str; 20] = [
            "preset", "scale", "stages", "out_dir", "cache_dir", "t_end", "method", "rtol", "atol", "steady_tol",
            "seed_from", "spectrum_input", "detector_samples", "blackbody", "ratio", "params", "version", "resolved",
            "outputs", "metrics",
        ];
        if let Some(k) = table.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(PipelineError::Manifest(format!("unknown key `{k}`")));
        }

        let scale = match string("scale")? {
            Some(s) => s.parse().map_err(PipelineError::Manifest)?,
            None => Scale::Reduced,
        };
        let preset_name = string("preset")?;
        // Sidecars store fully resolved parameters: no preset or rescaling.
        let resolved = flag("resolved", false)?;
        let mut overrides = match preset_name.as_deref() {
            Some(p) if !resolved => preset(p)?,
            Some(p) => {
                preset(p)?;
                Vec::new()
            }
            None => Vec::new(),
        };
        match table.get("params") {
            None => {}
            Some(Value::Table(t)) => overrides.extend(t.iter().map(|(k, v)| (k.clone(), v.clone()))),
            Some(_) => return Err(bad("params", "a table")),
        }
        overrides.extend(extra.iter().cloned());
        let params = PhysicalParams::from_toml_str_with_overrides("", &overrides)?;
        let params = if resolved { params } else { params.scaled(scale) };

        let stages = match table.get("stages") {
            None => Stage::ALL.to_vec(),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.parse().map_err(PipelineError::Manifest),
                    _ => Err(bad("stages", "an array of strings")),
                })
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(bad("stages", "an array of strings")),
        };
        let path = |key: &str| -> Result<Option<PathBuf>, PipelineError> { Ok(string(key)?.map(|s| base.join(s))) };

        let mut m = RunManifest::new(params, stages, path("out_dir")?.unwrap_or_else(|| base.join("out")));
        m.preset = preset_name;
        m.scale = scale;
        m.cache_dir = path("cache_dir")?;
        m.seed_from = path("seed_from")?;
        m.spectrum_input = path("spectrum_input")?;
        if let Some(t) = number("t_end")? {
            m.t_end = t;
        }
        if let Some(s) = string("method")? {
            m.integrate.method = s.parse().map_err(|e: String| PipelineError::Manifest(e))?;
        }
        if let Some(x) = number("rtol")? {
            m.integrate.rtol = x;
        }
        if let Some(x) = number("atol")? {
            m.integrate.atol = x;
        }
        if let Some(x) = number("steady_tol")? {
            m.steady.tol = x;
        }
        if let Some(x) = number("detector_samples")? {
            if x < 1.0 || x.fract() != 0.0 {
                return Err(bad("detector_samples", "a positive integer"));
            }
            m.detector_samples = x as usize;
        }
        m.blackbody = flag("blackbody", true)?;
        m.ratio = flag("ratio", true)?;
        Ok(m)
    }

    pub fn load(path: &Path, extra: &[(String, Value)]) -> Result<Self, PipelineError> {
        let doc = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Manifest(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&doc, path.parent().unwrap_or(Path::new(".")), extra)
    }

    /// Sidecar document: the resolved parameters, run settings, outputs and
    /// metrics.
    pub fn to_toml_string(&self) -> String {
        let mut s = String::new();
        let q = |x: &str| Value::String(x.into()).to_string();
        s.push_str(&format!("version = {}\n", q(env!("CARGO_PKG_VERSION"))));
        s.push_str("resolved = true\n");
        if let Some(p) = &self.preset {
            s.push_str(&format!("preset = {}\n", q(p)));
        }
        s.push_str(&format!("scale = {}\n", q(&self.scale.to_string())));
        let stages: Vec<String> = self.stages.iter().map(|st| q(st.as_str())).collect();
        s.push_str(&format!("stages = [{}]\n", stages.join(", ")));
        s.push_str(&format!("out_dir = {}\n", q(&self.out_dir.display().to_string())));
        if let Some(c) = &self.cache_dir {
            s.push_str(&format!("cache_dir = {}\n", q(&c.display().to_string())));
        }
        s.push_str(&format!("t_end = {:e}\n", self.t_end));
        s.push_str(&format!("method = {}\n", q(self.integrate.method.as_str())));
        s.push_str(&format!("rtol = {:e}\natol = {:e}\n", self.integrate.rtol, self.integrate.atol));
        s.push_str(&format!("steady_tol = {:e}\n", self.steady.tol));
        if let Some(p) = &self.seed_from {
            s.push_str(&format!("seed_from = {}\n", q(&p.display().to_string())));
        }
        if let Some(p) = &self.spectrum_input {
            s.push_str(&format!("spectrum_input = {}\n", q(&p.display().to_string())));
        }
        s.push_str(&format!("detector_samples = {}\n", self.detector_samples));
        s.push_str(&format!("blackbody = {}\nratio = {}\n", self.blackbody, self.ratio));
        let outputs: Vec<String> = self.outputs.iter().map(|p| q(&p.display().to_string())).collect();
        s.push_str(&format!("outputs = [{}]\n", outputs.join(", ")));
        s.push_str("\n[params]\n");
        s.push_str(&self.params.to_toml_string());
        s.push_str("\n[metrics]\n");
        for (k, v) in &self.metrics {
            s.push_str(&format!("{k} = {}\n", q(v)));
        }
        s
    }

    fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.out_dir.join("cache"))
    }

    /// Requested stages plus their prerequisites, in execution order.
    pub fn closure(&self) -> Vec<Stage> {
        let mut need: Vec<Stage> = self.stages.clone();
        if need.contains(&Stage::Spectrum) && self.spectrum_input.is_none() && !need.contains(&Stage::Dynamics) {
            need.push(Stage::Steady);
        }
        let computes = |s: &Stage| matches!(s, Stage::Bands | Stage::Dynamics | Stage::Steady);
        let spectrum_needs_modes = need.contains(&Stage::Spectrum) && self.spectrum_input.is_none();
        if need.iter().any(computes) || spectrum_needs_modes {
            need.push(Stage::Modes);
        }
        need.sort();
        need.dedup();
        need
    }
}

/// File-name key of a mode set: everything the eigenproblem depends on.
pub fn mode_cache_key(p: &PhysicalParams) -> String {
    format!(
        "modes_eta{}_L{}_Lc{}_lp{}_n{}_wmax{}.csv",
        fmt_f64(p.eta),
        fmt_f64(p.length),
        fmt_f64(p.crystal_length),
        fmt_f64(p.lattice_constant),
        p.n_planes,
        fmt_f64(p.omega_max)
    )
}

/// Mode set for `params`, read from the cache when present.
pub fn cached_modes(params: &PhysicalParams, cache_dir: &Path) -> Result<(Vec<Mode<f64>>, bool), PipelineError> {
    let stage_err = |message: String| PipelineError::Stage { stage: Stage::Modes, message };
    let cavity = Cavity::<f64>::new(params);
    let path = cache_dir.join(mode_cache_key(params));
    if path.exists() {
        let table = Table::load(&path).map_err(|e| stage_err(e.to_string()))?;
        let omegas = table.f64_column("omega").map_err(|e| stage_err(e.to_string()))?;
        let modes = cavity.modes_from_frequencies(&omegas).map_err(|e| stage_err(format!("stale mode cache {}: {e}", path.display())))?;
        return Ok((modes, true));
    }
    let modes = cavity.find_modes(params.omega_max).map_err(|e| stage_err(e.to_string()))?;
    io::modes_table(&modes).save(&path).map_err(|e| stage_err(e.to_string()))?;
    Ok((modes, false))
}

/// In-memory results of a pipeline run.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub modes: Vec<Mode<f64>>,
    pub dynamics_final: Option<KineticState<f64>>,
    pub steady: Option<KineticState<f64>>,
    pub steady_converged: Option<bool>,
    pub spectra: Vec<Spectrum<f64>>,
}

struct Run<'a> {
    m: &'a mut RunManifest,
}

impl Run<'_> {
    fn emit(&mut self, stage: Stage, name: &str, mut table: Table) -> Result<(), PipelineError> {
        let path = self.m.out_dir.join(name);
        table.meta.insert(0, ("manifest".into(), MANIFEST_FILE.into()));
        table.meta.insert(1, ("stage".into(), stage.as_str().into()));
        table.save(&path).map_err(|e| io_stage(stage, e))?;
        self.m.outputs.push(PathBuf::from(name));
        Ok(())
    }

    fn metric(&mut self, key: String, value: impl ToString) {
        self.m.metrics.push((key, value.to_string()));
    }
}

fn io_stage(stage: Stage, e: IoError) -> PipelineError {
    PipelineError::Stage { stage, message: e.to_string() }
}

/// Runs the manifest's stages (with prerequisites) and writes every output
/// plus the sidecar manifest into `out_dir`. On failure the outputs of
/// completed stages and a manifest recording the failure are kept.
pub fn run_pipeline(manifest: &mut RunManifest) -> Result<RunOutcome, PipelineError> {
    manifest.outputs.clear();
    manifest.metrics.clear();
    let mut outcome = RunOutcome::default();
    let result = run_stages(manifest, &mut outcome);
    if let Err(e) = &result {
        manifest.metrics.push(("status".into(), format!("failed: {e}")));
    } else {
        manifest.metrics.push(("status".into(), "ok".into()));
    }
    let sidecar = manifest.out_dir.join(MANIFEST_FILE);
    let written = std::fs::create_dir_all(&manifest.out_dir)
        .and_then(|_| std::fs::write(&sidecar, manifest.to_toml_string()));
    result?;
    written.map_err(|e| PipelineError::Manifest(format!("{}: {e}", sidecar.display())))?;
    Ok(outcome)
}

fn run_stages(manifest: &mut RunManifest, out: &mut RunOutcome) -> Result<(), PipelineError> {
    let stages = manifest.closure();
    let params = manifest.params.clone();
    let grid: AtomGrid<f64> = build_grid(&params);
    let mut model: Option<KineticModel<f64>> = None;
    let mut run = Run { m: manifest };

    for stage in stages {
        let clock = Instant::now();
        match stage {
            Stage::Modes => {
                let (modes, hit) = cached_modes(&params, &run.m.cache_dir())?;
                run.metric("modes.count".into(), modes.len());
                run.metric("modes.cache".into(), if hit { "hit" } else { "miss" });
                run.emit(stage, "modes.csv", io::modes_table(&modes))?;
                out.modes = modes;
            }
            Stage::Bands => {
                let bands = band_structure(&out.modes, params.crystal_length / params.length);
                run.metric("bands.gaps".into(), bands.gaps.len());
                run.emit(stage, "bands.csv", io::bands_table(&bands))?;
            }
            Stage::Dynamics => {
                let km = model.get_or_insert_with(|| KineticModel::new(&out.modes, &grid, &params, 0.0));
                let s0 = KineticState::zeros(km.n_atoms(), km.n_modes());
                let traj = integrate(&s0, run.m.t_end, km, &run.m.integrate)
                    .map_err(|e| PipelineError::Stage { stage, message: e.to_string() })?;
                let meta = &traj.meta;
                run.metric("dynamics.accepted_steps".into(), meta.accepted_steps);
                run.metric("dynamics.rejected_steps".into(), meta.rejected_steps);
                run.metric("dynamics.rhs_evaluations".into(), meta.rhs_evaluations);
                run.metric("dynamics.max_violation".into(), fmt_f64(meta.max_violation));
                run.emit(stage, "trajectory.csv", io::trajectory_table(&traj).with_meta("method", meta.method))?;
                let (w, g, c) = mode_columns(&out.modes);
                run.emit(stage, "dynamics_photons.csv", io::photons_table(&traj.final_state, &w, &g, &c))?;
                run.emit(stage, "dynamics_electrons.csv", io::electrons_table(&traj.final_state, &grid))?;
                out.dynamics_final = Some(traj.final_state);
            }
            Stage::Steady => {
                let km = model.get_or_insert_with(|| KineticModel::new(&out.modes, &grid, &params, 0.0));
                let (guess, seed) = match (&run.m.seed_from, &out.dynamics_final) {
                    (Some(path), _) => {
                        let table = Table::load(path).map_err(|e| io_stage(stage, e))?;
                        let s = io::state_from_trajectory(&table, km.n_atoms(), km.n_modes())
                            .map_err(|e| io_stage(stage, e))?;
                        (s, path.display().to_string())
                    }
                    (None, Some(s)) => (s.clone(), "dynamics".to_string()),
                    (None, None) => (seed_guess(km), "analytic".to_string()),
                };
                let r = solve_steady(&guess, km, &run.m.steady)
                    .map_err(|e| PipelineError::Stage { stage, message: e.to_string() })?;
                run.metric("steady.seed".into(), &seed);
                run.metric("steady.converged".into(), r.converged);
                run.metric("steady.newton_iterations".into(), r.newton_iterations);
                run.metric("steady.krylov_iterations".into(), r.krylov_iterations);
                run.metric("steady.residual_norm".into(), fmt_f64(r.residual_norm));
                run.metric("steady.relative_residual".into(), fmt_f64(r.relative_residual));
                let (w, g, c) = mode_columns(&out.modes);
                let conv = r.converged.to_string();
                run.emit(stage, "photons.csv", io::photons_table(&r.state, &w, &g, &c).with_meta("converged", &conv))?;
                run.emit(stage, "electrons.csv", io::electrons_table(&r.state, &grid).with_meta("converged", &conv))?;
                out.steady_converged = Some(r.converged);
                out.steady = Some(r.state);
            }
            Stage::Spectrum => {
                let (photons, omega, gamma, source) = match (&run.m.spectrum_input, &out.steady, &out.dynamics_final) {
                    (Some(path), _, _) => {
                        let table = Table::load(path).map_err(|e| io_stage(stage, e))?;
                        let rec = io::read_photons(&table).map_err(|e| io_stage(stage, e))?;
                        (rec.photons, rec.omega, rec.gamma, path.display().to_string())
                    }
                    (None, Some(s), _) | (None, None, Some(s)) => {
                        let (w, g, _) = mode_columns(&out.modes);
                        let src = if out.steady.is_some() { "steady" } else { "dynamics" };
                        (s.photons.clone(), w, g, src.to_string())
                    }
                    (None, None, None) => unreachable!("closure adds the steady stage"),
                };
                let err = |e: spectra::SpectrumError| PipelineError::Stage { stage, message: e.to_string() };
                let raw = spectra::emission_raw_parts(&photons, &omega, &gamma).map_err(err)?;
                let samples = spectra::detector_grid(params.omega_max, run.m.detector_samples);
                let det = spectra::detector_response(&raw, &samples, params.gamma_d).map_err(err)?;
                let mut list = vec![det];
                if run.m.blackbody || run.m.ratio {
                    let bb = spectra::blackbody_1d(&samples, params.temperature);
                    if run.m.ratio {
                        list.push(spectra::spectral_ratio(&list[0], &bb).map_err(err)?);
                    }
                    if run.m.blackbody {
                        list.insert(1, bb);
                    }
                }
                let refs: Vec<&Spectrum<f64>> = list.iter().collect();
                let table = io::spectra_table(&refs).map_err(|e| io_stage(stage, e))?;
                run.metric("spectrum.source".into(), &source);
                run.emit(stage, "spectrum.csv", table.with_meta("gamma_d", fmt_f64(params.gamma_d)))?;
                run.emit(stage, "spectrum_raw.csv", io::spectra_table(&[&raw]).map_err(|e| io_stage(stage, e))?)?;
                out.spectra = std::iter::once(raw).chain(list).collect();
            }
        }
        run.metric(format!("{stage}.seconds"), format!("{:.3}", clock.elapsed().as_secs_f64()));
    }
    Ok(())
}

fn mode_columns(modes: &[Mode<f64>]) -> (Vec<f64>, Vec<f64>, Vec<ModeClass>) {
    (
        modes.iter().map(|m| m.omega).collect(),
        modes.iter().map(|m| m.gamma).collect(),
        modes.iter().map(|m| m.class).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_regimes() {
        let p = resolve_params(None, Some("eq-strong"), &[], Scale::Full).unwrap();
        assert_eq!((p.gamma_r, p.lambda_0, p.n_atom, p.gamma_c), (1e13, 1e10, 5e24, 1e9));
        let p = resolve_params(None, Some("eq-weak"), &[], Scale::Full).unwrap();
        assert_eq!(p.n_atom, 5e22);
        assert_eq!(p.n_v * 600.0, 5e22);
        let p = resolve_params(None, Some("eq-lossy"), &[], Scale::Full).unwrap();
        assert_eq!(p.gamma_c, 5e12);
        let p = resolve_params(None, Some("noneq"), &[], Scale::Full).unwrap();
        assert_eq!((p.gamma_r, p.lambda_0, p.n_atom, p.gamma_c), (1e10, 1e10, 5e24, 1e9));
    }

    #[test]
    fn unknown_preset_lists_valid_names() {
        let msg = preset("bogus").unwrap_err().to_string();
        for name in PRESETS {
            assert!(msg.contains(name), "{msg}");
        }
    }

    #[test]
    fn overrides_beat_presets() {
        let o = vec![crate::config::parse_override("gamma_c=2e9").unwrap()];
        let p = resolve_params(None, Some("eq-lossy"), &o, Scale::Reduced).unwrap();
        assert_eq!(p.gamma_c, 2e9);
        assert!((p.length - 1.2e-3).abs() < 1e-18);
    }

    #[test]
    fn closure_adds_prerequisites() {
        let m = RunManifest::new(PhysicalParams::default(), vec![Stage::Spectrum], "out");
        assert_eq!(m.closure(), vec![Stage::Modes, Stage::Steady, Stage::Spectrum]);
        let m = RunManifest::new(PhysicalParams::default(), vec![Stage::Dynamics], "out");
        assert_eq!(m.closure(), vec![Stage::Modes, Stage::Dynamics]);
        let mut m = RunManifest::new(PhysicalParams::default(), vec![Stage::Spectrum], "out");
        m.spectrum_input = Some("photons.csv".into());
        assert_eq!(m.closure(), vec![Stage::Spectrum]);
    }

    #[test]
    fn manifest_document_round_trip() {
        let doc = r#"
            preset = "eq-weak"
            scale = "reduced"
            stages = ["modes", "bands"]
            t_end = 1e-9
            method = "adaptive-explicit"
            [params]
            eta = 6.4e-6
        "#;
        let m = RunManifest::from_toml_str(doc, Path::new("/tmp/x"), &[]).unwrap();
        assert_eq!(m.stages, vec![Stage::Modes, Stage::Bands]);
        assert_eq!(m.params.eta, 6.4e-6);
        assert_eq!(m.params.n_atom, 5e22);
        assert_eq!(m.integrate.method, Method::AdaptiveExplicit);
        assert_eq!(m.out_dir, Path::new("/tmp/x/out"));
        let back = RunManifest::from_toml_str(&m.to_toml_string(), Path::new("/"), &[]).unwrap();
        assert_eq!(back.params, m.params);
        assert_eq!(back.stages, m.stages);
        assert_eq!(back.t_end, 1e-9);
        assert!(RunManifest::from_toml_str("bogus = 1", Path::new("."), &[]).is_err());
        assert!(RunManifest::from_toml_str("preset = \"nope\"", Path::new("."), &[]).is_err());
    }

    #[test]
    fn cache_key_tracks_geometry() {
        let a = PhysicalParams::default();
        let b = PhysicalParams { eta: 6.4e-6, ..a.clone() };
        let c = PhysicalParams { gamma_r: 1.0, ..a.clone() };
        assert_ne!(mode_cache_key(&a), mode_cache_key(&b));
        assert_eq!(mode_cache_key(&a), mode_cache_key(&c));
    }
}
