//! Simulation configuration: a sectioned TOML document in laboratory units.
//!
//! Every key has a default taken from the reference apparatus, so an empty
//! file is a complete configuration. Unknown keys are rejected.
//!
//! ```toml
//! [species]
//! name = "C70"
//!
//! [grating]
//! power_w = 9.5
//!
//! [velocity]
//! peak_m_s = 120.0
//! fwhm_ratio = 0.17
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beamline::{BeamlineGeometry, Normalization, PatternMode};
use crate::distributions::{
    parse_velocity_histogram, DetectorModel, KernelShape, VelocityDistribution, VerticalProfile,
};
use crate::error::{Error, Result};
use crate::grating::{GratingBeam, DEFAULT_SAMPLES_PER_PERIOD, DEFAULT_TAIL_EPS};
use crate::spectrum::DEFAULT_M_MAX;
use crate::units::{lookup_species, ComplexPolarizability, MoleculeSpecies};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeciesSection {
    /// Catalog name, or the label of an inline species.
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_amu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_real_a3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_imag_a3: Option<f64>,
}

impl Default for SpeciesSection {
    fn default() -> Self {
        Self {
            name: "C60".into(),
            mass_amu: None,
            alpha_real_a3: None,
            alpha_imag_a3: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GratingSection {
    pub wavelength_nm: f64,
    /// Power in each of the two counter-propagating beams.
    pub power_w: f64,
    pub waist_y_um: f64,
    pub waist_z_um: f64,
}

impl Default for GratingSection {
    fn default() -> Self {
        Self {
            wavelength_nm: 514.5,
            power_w: 9.5,
            waist_y_um: 1300.0,
            waist_z_um: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamlineSection {
    pub slit1_um: f64,
    pub slit2_um: f64,
    pub slit_separation_m: f64,
    pub detector_distance_m: f64,
    pub detector_span_um: f64,
    pub fine_step_um: f64,
}

impl Default for BeamlineSection {
    fn default() -> Self {
        let g = BeamlineGeometry::paper();
        Self {
            slit1_um: 7.0,
            slit2_um: 5.0,
            slit_separation_m: g.l12,
            detector_distance_m: g.l2d,
            detector_span_um: 240.0,
            fine_step_um: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VelocitySection {
    pub peak_m_s: f64,
    pub fwhm_ratio: f64,
    /// Two-column `v weight` table; replaces the Gaussian when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram_file: Option<PathBuf>,
    pub nodes: usize,
}

impl Default for VelocitySection {
    fn default() -> Self {
        Self {
            peak_m_s: 120.0,
            fwhm_ratio: 0.17,
            histogram_file: None,
            nodes: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerticalSection {
    pub beam_fwhm_um: f64,
    pub nodes: usize,
}

impl Default for VerticalSection {
    fn default() -> Self {
        Self {
            beam_fwhm_um: 625.0,
            nodes: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub nodes: usize,
}

impl Default for SourceSection {
    fn default() -> Self {
        Self { nodes: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub width_um: f64,
    pub step_um: f64,
    pub kernel: KernelShape,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            width_um: 6.0,
            step_um: 2.0,
            kernel: KernelShape::Gaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsSection {
    pub samples_per_period: usize,
    pub m_max: usize,
    pub tail_eps: f64,
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self {
            samples_per_period: DEFAULT_SAMPLES_PER_PERIOD,
            m_max: DEFAULT_M_MAX,
            tail_eps: DEFAULT_TAIL_EPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergencePolicy {
    Off,
    /// Report the doubling study in the summary.
    Warn,
    /// As `warn`, and fail the run when an axis moves the pattern by more
    /// than the limit.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub mode: PatternMode,
    pub normalization: Normalization,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    pub output_dir: PathBuf,
    pub pattern_csv: String,
    pub summary_json: String,
    pub convergence: ConvergencePolicy,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            mode: PatternMode::Wave,
            normalization: Normalization::UnitSum,
            threads: 0,
            output_dir: PathBuf::from("out"),
            pattern_csv: "pattern.csv".into(),
            summary_json: "summary.json".into(),
            convergence: ConvergencePolicy::Off,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub species: SpeciesSection,
    pub grating: GratingSection,
    pub beamline: BeamlineSection,
    pub velocity: VelocitySection,
    pub vertical: VerticalSection,
    pub source: SourceSection,
    pub detector: DetectorSection,
    pub numerics: NumericsSection,
    pub run: RunSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// Everything the beamline needs, in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub species: MoleculeSpecies,
    pub beam: GratingBeam,
    pub geometry: BeamlineGeometry,
    pub velocity: VelocityDistribution,
    pub vertical: VerticalProfile,
    pub detector: DetectorModel,
    pub source_nodes: usize,
    pub velocity_nodes: usize,
    pub vertical_nodes: usize,
    pub samples_per_period: usize,
    pub m_max: usize,
    pub tail_eps: f64,
    pub mode: PatternMode,
    pub normalization: Normalization,
    pub threads: usize,
    pub digest: String,
}

impl Simulation {
    /// The reference apparatus with C60 at 9.5 W.
    pub fn paper_defaults() -> Self {
        SimulationConfig::default()
            .resolve()
            .expect("defaults are valid")
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]`, if the file sets it.
fn locate(text: &str, path: &str) -> Option<usize> {
    let (section, key) = path.split_once('.')?;
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
        } else if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim().trim_matches('"') == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn keyed<T>(key: &str, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        Error::Config { .. } => e,
        other => Error::config(key, other.to_string()),
    })
}

fn positive(key: &str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::config(key, format!("must be positive, got {value}")))
    }
}

fn at_least_one(key: &str, value: usize) -> Result<usize> {
    if value >= 1 {
        Ok(value)
    } else {
        Err(Error::config(key, "must be at least 1"))
    }
}

impl SimulationConfig {
    pub fn species(&self) -> Result<MoleculeSpecies> {
        let s = &self.species;
        let base = lookup_species(&s.name);
        let missing = |key: &str| {
            Error::config(
                format!("species.{key}"),
                format!("required for species `{}` not in the catalog", s.name),
            )
        };
        let mass = match (s.mass_amu, &base) {
            (Some(m), _) => m,
            (None, Some(b)) => b.mass,
            (None, None) => return Err(missing("mass_amu")),
        };
        let re = match (s.alpha_real_a3, &base) {
            (Some(v), _) => v,
            (None, Some(b)) => b.polarizability.real_volume,
            (None, None) => return Err(missing("alpha_real_a3")),
        };
        let im = match (s.alpha_imag_a3, &base) {
            (Some(v), _) => v,
            (None, Some(b)) => b.polarizability.imag_volume,
            (None, None) => return Err(missing("alpha_imag_a3")),
        };
        if !re.is_finite() {
            return Err(Error::config("species.alpha_real_a3", "must be finite"));
        }
        let pol = keyed("species.alpha_imag_a3", ComplexPolarizability::new(re, im))?;
        keyed(
            "species.mass_amu",
            MoleculeSpecies::new(s.name.clone(), mass, pol),
        )
    }

    pub fn beam(&self) -> Result<GratingBeam> {
        let g = &self.grating;
        let wavelength = positive("grating.wavelength_nm", g.wavelength_nm)? / 1e9;
        if !(g.power_w >= 0.0) || !g.power_w.is_finite() {
            return Err(Error::config(
                "grating.power_w",
                format!("must be nonnegative, got {}", g.power_w),
            ));
        }
        let wy = positive("grating.waist_y_um", g.waist_y_um)? / 1e6;
        let wz = positive("grating.waist_z_um", g.waist_z_um)? / 1e6;
        keyed("grating", GratingBeam::new(wavelength, g.power_w, wy, wz))
    }

    pub fn geometry(&self) -> Result<BeamlineGeometry> {
        let b = &self.beamline;
        if !(b.detector_distance_m >= 0.0) || !b.detector_distance_m.is_finite() {
            return Err(Error::config(
                "beamline.detector_distance_m",
                "must be nonnegative",
            ));
        }
        Ok(BeamlineGeometry {
            slit1_width: positive("beamline.slit1_um", b.slit1_um)? / 1e6,
            slit2_width: positive("beamline.slit2_um", b.slit2_um)? / 1e6,
            l12: positive("beamline.slit_separation_m", b.slit_separation_m)?,
            l2d: b.detector_distance_m,
            detector_span: positive("beamline.detector_span_um", b.detector_span_um)? / 1e6,
            fine_step: positive("beamline.fine_step_um", b.fine_step_um)? / 1e6,
        })
    }

    fn resolve_path(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn histogram_text(&self) -> Result<Option<String>> {
        let Some(file) = &self.velocity.histogram_file else {
            return Ok(None);
        };
        let path = self.resolve_path(file);
        std::fs::read_to_string(&path).map(Some).map_err(|e| {
            Error::config(
                "velocity.histogram_file",
                format!("{}: {e}", path.display()),
            )
        })
    }

    pub fn velocity_distribution(&self) -> Result<VelocityDistribution> {
        let v = &self.velocity;
        match self.histogram_text()? {
            Some(text) => keyed(
                "velocity.histogram_file",
                parse_velocity_histogram(&text).and_then(VelocityDistribution::histogram),
            ),
            None => {
                positive("velocity.peak_m_s", v.peak_m_s)?;
                if !(v.fwhm_ratio > 0.0 && v.fwhm_ratio < 1.0) {
                    return Err(Error::config(
                        "velocity.fwhm_ratio",
                        format!("must lie in (0, 1), got {}", v.fwhm_ratio),
                    ));
                }
                VelocityDistribution::gaussian(v.peak_m_s, v.fwhm_ratio)
            }
        }
    }

    pub fn vertical_profile(&self) -> Result<VerticalProfile> {
        let fwhm = positive("vertical.beam_fwhm_um", self.vertical.beam_fwhm_um)? / 1e6;
        VerticalProfile::new(fwhm, self.beam()?.waist_y)
    }

    pub fn detector(&self) -> Result<DetectorModel> {
        let d = &self.detector;
        if !(d.width_um >= 0.0) || !d.width_um.is_finite() {
            return Err(Error::config("detector.width_um", "must be nonnegative"));
        }
        let step = positive("detector.step_um", d.step_um)? / 1e6;
        keyed(
            "detector",
            DetectorModel::new(d.width_um / 1e6, step, d.kernel),
        )
    }

    /// Canonical TOML text. Parsing it back yields an equal configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 over the canonical text of everything that shapes the
    /// pattern (output locations and thread count excluded) and the
    /// velocity histogram contents, if any.
    pub fn digest(&self) -> Result<String> {
        let mut physics = self.clone();
        let run = RunSection::default();
        physics.run = RunSection {
            mode: self.run.mode,
            normalization: self.run.normalization,
            ..run
        };
        let mut hasher = Sha256::new();
        hasher.update(physics.to_toml().as_bytes());
        if let Some(text) = self.histogram_text()? {
            hasher.update(b"\0histogram\0");
            hasher.update(text.as_bytes());
        }
        Ok(hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect())
    }

    pub fn resolve(&self) -> Result<Simulation> {
        let n = &self.numerics;
        if n.samples_per_period < 4 || !n.samples_per_period.is_multiple_of(2) {
            return Err(Error::config(
                "numerics.samples_per_period",
                "must be even and at least 4",
            ));
        }
        if n.m_max == 0 {
            return Err(Error::config("numerics.m_max", "must be at least 1"));
        }
        if !(n.tail_eps > 0.0 && n.tail_eps < 1.0) {
            return Err(Error::config("numerics.tail_eps", "must lie in (0, 1)"));
        }
        let geometry = self.geometry()?;
        let detector = self.detector()?;
        let ratio = detector.step / geometry.fine_step;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio || ratio.round() < 1.0 {
            return Err(Error::config(
                "detector.step_um",
                "must be a whole multiple of beamline.fine_step_um",
            ));
        }
        if self.run.pattern_csv.is_empty() || self.run.summary_json.is_empty() {
            return Err(Error::config(
                "run.pattern_csv",
                "output file names must not be empty",
            ));
        }
        Ok(Simulation {
            species: self.species()?,
            beam: self.beam()?,
            geometry,
            velocity: self.velocity_distribution()?,
            vertical: self.vertical_profile()?,
            detector,
            source_nodes: at_least_one("source.nodes", self.source.nodes)?,
            velocity_nodes: at_least_one("velocity.nodes", self.velocity.nodes)?,
            vertical_nodes: at_least_one("vertical.nodes", self.vertical.nodes)?,
            samples_per_period: n.samples_per_period,
            m_max: n.m_max,
            tail_eps: n.tail_eps,
            mode: self.run.mode,
            normalization: self.run.normalization,
            threads: self.run.threads,
            digest: self.digest()?,
        })
    }

    /// Output directory: `LIGHTGRATING_OUT_DIR` when set, else `run.output_dir`
    /// relative to the config file.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.resolve_path(&self.run.output_dir),
        }
    }
}

/// Environment variable overriding `run.output_dir`.
pub const OUT_DIR_ENV: &str = "LIGHTGRATING_OUT_DIR";

/// Parses and validates a configuration. Errors name the offending key and,
/// where the file sets it, its line.
pub fn parse_config(text: &str) -> Result<SimulationConfig> {
    parse_config_in(text, None)
}

fn parse_config_in(text: &str, base_dir: Option<PathBuf>) -> Result<SimulationConfig> {
    let mut cfg: SimulationConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of_offset(text, s.start));
        let message = e.message().to_string();
        let key = message
            .strip_prefix("unknown field `")
            .and_then(|r| r.split('`').next())
            .unwrap_or("")
            .to_string();
        Error::Config { key, line, message }
    })?;
    cfg.base_dir = base_dir;
    cfg.resolve().map_err(|e| match e {
        Error::Config {
            key,
            line: None,
            message,
        } => {
            let line = locate(text, &key);
            Error::Config { key, line, message }
        }
        other => other,
    })?;
    Ok(cfg)
}

/// Reads a configuration file; relative paths inside it resolve against
/// its directory.
pub fn load_config(path: &Path) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path)?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_in(&text, Some(dir))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_reference_apparatus() {
        let cfg = parse_config("").unwrap();
        let sim = cfg.resolve().unwrap();
        assert_eq!(sim.species, MoleculeSpecies::c60());
        assert_eq!(sim.beam.wavelength, 514.5e-9);
        assert_eq!(sim.geometry.slit1_width, 7e-6);
        assert_eq!(sim.geometry.slit2_width, 5e-6);
        assert_eq!(sim.geometry.l12, 1.13);
        assert_eq!(sim.geometry.l2d, 1.2);
        assert_eq!(sim.velocity.v_peak, 120.0);
        assert_eq!(sim.velocity.fwhm_ratio, 0.17);
        assert_eq!(sim.detector.width, 6e-6);
        assert_eq!(sim.detector.step, 2e-6);
        assert_eq!((sim.velocity_nodes, sim.vertical_nodes), (16, 16));
    }

    #[test]
    fn negative_power_names_key_and_line() {
        let err =
            parse_config("[species]\nname = \"C70\"\n\n[grating]\npower_w = -1\n").unwrap_err();
        match err {
            Error::Config { key, line, .. } => {
                assert_eq!(key, "grating.power_w");
                assert_eq!(line, Some(5));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let err = parse_config("[grating]\npower_w = 2.0\npowr = 3\n").unwrap_err();
        match err {
            Error::Config { key, line, .. } => {
                assert_eq!(key, "powr");
                assert_eq!(line, Some(3));
            }
            other => panic!("{other}"),
        }
        assert!(parse_config("[lasers]\n").is_err());
    }

    #[test]
    fn inline_species_requires_all_fields() {
        let err = parse_config("[species]\nname = \"C84\"\nmass_amu = 1008\n").unwrap_err();
        assert!(
            matches!(err, Error::Config { ref key, .. } if key == "species.alpha_real_a3"),
            "{err}"
        );
        let cfg = parse_config(
            "[species]\nname = \"C84\"\nmass_amu = 1008\nalpha_real_a3 = 140\nalpha_imag_a3 = 10\n",
        )
        .unwrap();
        let s = cfg.species().unwrap();
        assert_eq!(s.mass, 1008.0);
        assert_eq!(s.polarizability.imag_volume, 10.0);
    }

    #[test]
    fn round_trip() {
        let text = "[species]\nname = \"c70\"\n[grating]\npower_w = 3\n[detector]\nkernel = \"tophat\"\nwidth_um = 4.5\n[run]\nmode = \"orders\"\nnormalization = \"peak\"\n";
        let a = parse_config(text).unwrap();
        let b = parse_config(&a.to_toml()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.digest().unwrap(), b.digest().unwrap());
    }

    #[test]
    fn digest_ignores_output_settings() {
        let a = parse_config("").unwrap();
        let b = parse_config("[run]\nthreads = 3\noutput_dir = \"elsewhere\"\n").unwrap();
        let c = parse_config("[grating]\npower_w = 9.6\n").unwrap();
        assert_eq!(a.digest().unwrap(), b.digest().unwrap());
        assert_ne!(a.digest().unwrap(), c.digest().unwrap());
        assert_eq!(a.digest().unwrap().len(), 64);
    }

    #[test]
    fn step_must_divide() {
        let err = parse_config("[detector]\nstep_um = 0.3\n").unwrap_err();
        assert!(
            matches!(err, Error::Config { ref key, line: Some(2), .. } if key == "detector.step_um"),
            "{err}"
        );
    }
}
