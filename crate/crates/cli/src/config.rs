use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vortex_core::domain::Shape;
use vortex_core::potential::{FlowPreset, FluxSamples};
use vortex_core::routh::{MaskSpec, VortexConfig};
use vortex_core::Point;

use crate::output::StageError;

/// Key reference printed by `--help`.
pub const CONFIG_HELP: &str = "\
CONFIG FILE (TOML; unknown keys are rejected)

[domain]
  kind        disk | ellipse | rectangle | annulus | polygon
  radius      disk radius
  a, b        ellipse semi-axes
  width, height
  inner, outer  annulus radii
  center      [x, y]                       default [0, 0]
  vertices    [[x, y], ...]                polygon, counter-clockwise
  resolution  grid cells across the box     default 128

[flow]        one of preset / samples / file
  preset      none | uniform | strain      default none
  u, v        uniform stream velocity
  c           strain rate
  samples     [[v_n, ...], ...]            one array per boundary component
  file        CSV with columns component,v_n
  gauge       constant added to psi0       default 0

[vortex]
  m           vortex count (checked against kappa)
  kappa       [k1, k2, ...]
  z           [[x, y], ...]                seed positions
  use_masks   bool                         default true
  mask_radii  [r1, ...]                    explicit mask disks
  voronoi_gap float                        Voronoi masks shrunk by the gap
  rho         separation floor              default 0.1 * inradius

[solver]
  p               exponent                 default 2
  eps             [e1, e2, ...]            default [0.1, 0.07, 0.05]
  newton_tol      residual max norm        default 1e-10 * max kappa
  max_iter        Newton iterations         default 50
  profile_tol     shooting tolerance        default 1e-10
  critical_tol    gradient-norm tolerance   default 1e-10
  critical_max_iter                         default 100
  strict_bracket  hard core-radius bracket  default false
  continuation    seed each eps from the previous solve  default false

[verify]
  circulation_tol   relative error at the smallest eps   default 0.03
  centroid_cells    centroid distance to Z* in cells     default 2
  radius_spread     core radius / eps spread             default 0.2
  max_newton_iter   iterations per eps                   default 15

output = \"dir\"   top-level key, output directory
";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output: Option<PathBuf>,
    pub domain: Option<DomainSection>,
    pub flow: Option<FlowSection>,
    pub vortex: Option<VortexSection>,
    pub solver: Option<SolverSection>,
    pub verify: Option<VerifySection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub kind: String,
    pub radius: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub width: Option<f64>,
    pub height: Option<f64>,
    pub inner: Option<f64>,
    pub outer: Option<f64>,
    pub center: Option<[f64; 2]>,
    pub vertices: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

fn default_resolution() -> usize {
    128
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    #[serde(default = "default_preset")]
    pub preset: String,
    pub u: Option<f64>,
    pub v: Option<f64>,
    pub c: Option<f64>,
    pub samples: Option<Vec<Vec<f64>>>,
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub gauge: f64,
}

fn default_preset() -> String {
    "none".into()
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            preset: default_preset(),
            u: None,
            v: None,
            c: None,
            samples: None,
            file: None,
            gauge: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexSection {
    pub m: Option<usize>,
    pub kappa: Vec<f64>,
    pub z: Vec<[f64; 2]>,
    #[serde(default = "yes")]
    pub use_masks: bool,
    pub mask_radii: Option<Vec<f64>>,
    pub voronoi_gap: Option<f64>,
    pub rho: Option<f64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub p: f64,
    pub eps: Vec<f64>,
    pub newton_tol: Option<f64>,
    pub max_iter: usize,
    pub profile_tol: f64,
    pub critical_tol: f64,
    pub critical_max_iter: usize,
    pub strict_bracket: bool,
    pub continuation: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            p: 2.0,
            eps: vec![0.1, 0.07, 0.05],
            newton_tol: None,
            max_iter: 50,
            profile_tol: 1e-10,
            critical_tol: 1e-10,
            critical_max_iter: 100,
            strict_bracket: false,
            continuation: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub circulation_tol: f64,
    pub centroid_cells: f64,
    pub radius_spread: f64,
    pub max_newton_iter: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            circulation_tol: 0.03,
            centroid_cells: 2.0,
            radius_spread: 0.2,
            max_newton_iter: 15,
        }
    }
}

fn bad(msg: impl Into<String>) -> StageError {
    StageError::config(msg)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, StageError> {
        toml::from_str(text).map_err(|e| bad(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<RunConfig, StageError> {
        let text = fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| bad(format!("{}: {}", path.display(), e.message)))?;
        // Relative sample files are resolved against the config's directory.
        if let Some(flow) = cfg.flow.as_mut() {
            if let (Some(f), Some(dir)) = (flow.file.as_mut(), path.parent()) {
                if f.is_relative() {
                    *f = dir.join(&*f);
                }
            }
        }
        Ok(cfg)
    }

    pub fn domain(&self) -> Result<&DomainSection, StageError> {
        self.domain.as_ref().ok_or_else(|| bad("missing [domain] section"))
    }

    pub fn vortex(&self) -> Result<&VortexSection, StageError> {
        self.vortex.as_ref().ok_or_else(|| bad("missing [vortex] section"))
    }

    pub fn flow(&self) -> FlowSection {
        self.flow.clone().unwrap_or_default()
    }

    pub fn solver(&self) -> SolverSection {
        self.solver.clone().unwrap_or_default()
    }

    pub fn verify(&self) -> VerifySection {
        self.verify.clone().unwrap_or_default()
    }
}

fn pt(p: [f64; 2]) -> Point {
    Point::new(p[0], p[1])
}

impl DomainSection {
    pub fn shape(&self) -> Result<Shape, StageError> {
        let center = self.center.map(pt).unwrap_or(Point::ORIGIN);
        let given = [
            ("radius", self.radius.is_some()),
            ("a", self.a.is_some()),
            ("b", self.b.is_some()),
            ("width", self.width.is_some()),
            ("height", self.height.is_some()),
            ("inner", self.inner.is_some()),
            ("outer", self.outer.is_some()),
            ("center", self.center.is_some()),
            ("vertices", self.vertices.is_some()),
        ];
        let allowed: &[&str] = match self.kind.as_str() {
            "disk" => &["radius", "center"],
            "ellipse" => &["a", "b", "center"],
            "rectangle" => &["width", "height", "center"],
            "annulus" => &["inner", "outer", "center"],
            "polygon" => &["vertices"],
            k => return Err(bad(format!("unknown domain kind `{k}`"))),
        };
        if let Some((key, _)) = given.iter().find(|(k, set)| *set && !allowed.contains(k)) {
            return Err(bad(format!("key `{key}` does not apply to a {} domain", self.kind)));
        }
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| bad(format!("{} domain needs `{key}`", self.kind)));
        Ok(match self.kind.as_str() {
            "disk" => Shape::Disk {
                radius: need(self.radius, "radius")?,
                center,
            },
            "ellipse" => Shape::Ellipse {
                a: need(self.a, "a")?,
                b: need(self.b, "b")?,
                center,
            },
            "rectangle" => Shape::Rectangle {
                width: need(self.width, "width")?,
                height: need(self.height, "height")?,
                center,
            },
            "annulus" => Shape::Annulus {
                inner: need(self.inner, "inner")?,
                outer: need(self.outer, "outer")?,
                center,
            },
            _ => Shape::Polygon {
                vertices: self
                    .vertices
                    .as_ref()
                    .ok_or_else(|| bad("polygon domain needs `vertices`"))?
                    .iter()
                    .map(|&v| pt(v))
                    .collect(),
            },
        })
    }
}

/// Where the boundary data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowSource {
    Preset(FlowPreset),
    Samples(FluxSamples),
}

impl FlowSection {
    pub fn source(&self) -> Result<FlowSource, StageError> {
        let preset = self.preset.as_str();
        let picked = [preset != "none", self.samples.is_some(), self.file.is_some()];
        if picked.iter().filter(|b| **b).count() > 1 {
            return Err(bad("[flow] takes only one of preset, samples and file"));
        }
        if let Some(s) = &self.samples {
            return Ok(FlowSource::Samples(FluxSamples { components: s.clone() }));
        }
        if let Some(path) = &self.file {
            return read_flux_csv(path).map(FlowSource::Samples);
        }
        let unused = |keys: &[(&str, bool)]| match keys.iter().find(|(_, set)| *set) {
            Some((k, _)) => Err(bad(format!("key `{k}` does not apply to preset {preset}"))),
            None => Ok(()),
        };
        let (u, v, c) = (self.u.is_some(), self.v.is_some(), self.c.is_some());
        match preset {
            "none" => {
                unused(&[("u", u), ("v", v), ("c", c)])?;
                Ok(FlowSource::Preset(FlowPreset::None))
            }
            "uniform" => {
                unused(&[("c", c)])?;
                Ok(FlowSource::Preset(FlowPreset::Uniform {
                    u: self.u.unwrap_or(0.0),
                    v: self.v.unwrap_or(0.0),
                }))
            }
            "strain" => {
                unused(&[("u", u), ("v", v)])?;
                let c = self.c.ok_or_else(|| bad("strain preset needs `c`"))?;
                Ok(FlowSource::Preset(FlowPreset::Strain { c }))
            }
            p => Err(bad(format!("unknown flow preset `{p}`"))),
        }
    }
}

/// `component,v_n` rows, samples in arclength order within each component.
fn read_flux_csv(path: &Path) -> Result<FluxSamples, StageError> {
    let text = fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let mut components: Vec<Vec<f64>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with("component")) {
            continue;
        }
        let parse = || -> Option<(usize, f64)> {
            let (a, b) = line.split_once(',')?;
            Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
        };
        let (c, v) = parse().ok_or_else(|| bad(format!("{}:{}: expected component,v_n", path.display(), n + 1)))?;
        if c >= components.len() {
            components.resize(c + 1, Vec::new());
        }
        components[c].push(v);
    }
    Ok(FluxSamples { components })
}

impl VortexSection {
    pub fn config(&self) -> Result<VortexConfig, StageError> {
        if let Some(m) = self.m {
            if m != self.kappa.len() {
                return Err(bad(format!("m = {m} but {} strengths given", self.kappa.len())));
            }
        }
        if self.z.len() != self.kappa.len() {
            return Err(bad(format!(
                "{} strengths but {} positions",
                self.kappa.len(),
                self.z.len()
            )));
        }
        let masks = match (&self.mask_radii, self.voronoi_gap) {
            (Some(_), Some(_)) => return Err(bad("give mask_radii or voronoi_gap, not both")),
            (Some(r), None) => MaskSpec::DiskRadii { radii: r.clone() },
            (None, Some(gap)) => MaskSpec::Voronoi { gap },
            (None, None) => MaskSpec::Disks,
        };
        Ok(VortexConfig {
            kappa: self.kappa.clone(),
            z: self.z.iter().map(|&p| pt(p)).collect(),
            masks,
            rho: self.rho,
            use_masks: self.use_masks,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DISK: &str = r#"
        [domain]
        kind = "disk"
        radius = 1.0
        resolution = 64

        [vortex]
        kappa = [1.0]
        z = [[0.0, 0.0]]
    "#;

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = RunConfig::parse(DISK).unwrap();
        assert_eq!(cfg.solver().eps, vec![0.1, 0.07, 0.05]);
        assert_eq!(cfg.verify().max_newton_iter, 15);
        assert_eq!(cfg.flow().source().unwrap(), FlowSource::Preset(FlowPreset::None));
        let v = cfg.vortex().unwrap().config().unwrap();
        assert!(v.use_masks);
        assert_eq!(v.masks, MaskSpec::Disks);
        assert_eq!(cfg.domain().unwrap().shape().unwrap(), Shape::unit_disk());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::parse(&format!("{DISK}\n[solver]\nepsilon = [0.1]\n")).unwrap_err();
        assert_eq!(e.code, "CONFIG");
        assert!(e.message.contains("epsilon"), "{}", e.message);
        assert!(RunConfig::parse("colour = 1").is_err());
    }

    #[test]
    fn keys_must_fit_the_kind() {
        let text = DISK.replace("radius = 1.0", "radius = 1.0\nwidth = 2.0");
        let cfg = RunConfig::parse(&text).unwrap();
        assert!(cfg.domain().unwrap().shape().is_err());
        let f = FlowSection {
            preset: "strain".into(),
            u: Some(1.0),
            c: Some(0.1),
            ..FlowSection::default()
        };
        assert!(f.source().is_err());
    }

    #[test]
    fn mismatched_counts_fail() {
        let v = VortexSection {
            m: Some(2),
            kappa: vec![1.0],
            z: vec![[0.0, 0.0]],
            use_masks: true,
            mask_radii: None,
            voronoi_gap: None,
            rho: None,
        };
        assert!(v.config().is_err());
    }
}
