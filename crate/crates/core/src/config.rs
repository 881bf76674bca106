//! Run configuration as flat `section.key = value` text.
//!
//! Lines starting with `#` and blank lines are ignored. Every key has a
//! default, so a file only needs the keys it changes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bfgs::{OptimizerConfig, Variant};
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::objective::ObjectiveConfig;

/// Which optimizer variants a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantChoice {
    Standard,
    WeakWolfe,
    Both,
}

impl VariantChoice {
    pub fn variants(self) -> Vec<Variant> {
        match self {
            VariantChoice::Standard => vec![Variant::Standard],
            VariantChoice::WeakWolfe => vec![Variant::WeakWolfe],
            VariantChoice::Both => vec![Variant::Standard, Variant::WeakWolfe],
        }
    }

    fn name(self) -> &'static str {
        match self {
            VariantChoice::Standard => "standard",
            VariantChoice::WeakWolfe => "weak_wolfe",
            VariantChoice::Both => "both",
        }
    }
}

impl FromStr for VariantChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(VariantChoice::Both),
            _ => Ok(match s.parse::<Variant>()? {
                Variant::Standard => VariantChoice::Standard,
                Variant::WeakWolfe => VariantChoice::WeakWolfe,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub radius: f64,
    pub omega0: Vec<Point>,
    /// Constant right-hand side.
    pub f: f64,
    /// Obstacle `ψ(x) = c1 (x₁² + (x₂ − c2)²) + c3`.
    pub psi_c1: f64,
    pub psi_c2: f64,
    pub psi_c3: f64,
    pub h: f64,
    /// Number of control coefficients.
    pub n: usize,
    pub objective: ObjectiveConfig,
    pub variant: VariantChoice,
    pub max_feval: usize,
    pub grad_tol: f64,
    pub init_step: f64,
    /// Constant initial control value.
    pub a0: f64,
    /// Seed of the random direction used by the optional gradient check.
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            radius: 1.75,
            omega0: vec![[-1.0, 0.0], [0.5, 0.75], [0.5, -1.5]],
            f: -10.0,
            psi_c1: -0.3,
            psi_c2: 0.25,
            psi_c3: -0.05,
            h: 0.05,
            n: 30,
            objective: ObjectiveConfig::default(),
            variant: VariantChoice::Both,
            max_feval: 400,
            grad_tol: 1e-6,
            init_step: 1.0,
            a0: 2.0,
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidInput(format!("{key}: cannot parse {value:?}")))
}

fn parse_polygon(value: &str) -> Result<Vec<Point>> {
    value
        .split(';')
        .map(|vertex| {
            let parts: Vec<&str> = vertex.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [x, y] => Ok([parse_num("geometry.omega0", x)?, parse_num("geometry.omega0", y)?]),
                _ => Err(Error::InvalidInput(format!(
                    "geometry.omega0: expected `x, y` vertices separated by `;`, got {vertex:?}"
                ))),
            }
        })
        .collect()
}

impl RunConfig {
    /// Obstacle function described by the three coefficients.
    pub fn psi(&self) -> impl Fn(Point) -> f64 + Copy {
        let (c1, c2, c3) = (self.psi_c1, self.psi_c2, self.psi_c3);
        move |p: Point| c1 * (p[0] * p[0] + (p[1] - c2) * (p[1] - c2)) + c3
    }

    pub fn optimizer(&self, variant: Variant) -> OptimizerConfig {
        OptimizerConfig {
            max_feval: self.max_feval,
            grad_tol: self.grad_tol,
            init_step: self.init_step,
            ..OptimizerConfig::new(variant)
        }
    }

    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "geometry.radius" => self.radius = parse_num(key, value)?,
            "geometry.omega0" => self.omega0 = parse_polygon(value)?,
            "physics.f" => self.f = parse_num(key, value)?,
            "physics.psi_c1" => self.psi_c1 = parse_num(key, value)?,
            "physics.psi_c2" => self.psi_c2 = parse_num(key, value)?,
            "physics.psi_c3" => self.psi_c3 = parse_num(key, value)?,
            "discretization.h" => self.h = parse_num(key, value)?,
            "discretization.n" => self.n = parse_num(key, value)?,
            "objective.beta" => self.objective.beta = parse_num(key, value)?,
            "objective.eps" => self.objective.eps = parse_num(key, value)?,
            "objective.gamma" => self.objective.gamma = parse_num(key, value)?,
            "objective.u_min" => self.objective.u_min = parse_num(key, value)?,
            "objective.u_max" => self.objective.u_max = parse_num(key, value)?,
            "optimizer.variant" => self.variant = value.parse()?,
            "optimizer.max_feval" => self.max_feval = parse_num(key, value)?,
            "optimizer.grad_tol" => self.grad_tol = parse_num(key, value)?,
            "optimizer.init_step" => self.init_step = parse_num(key, value)?,
            "control.a0" => self.a0 = parse_num(key, value)?,
            "run.seed" => self.seed = parse_num(key, value)?,
            "run.output_dir" => self.output_dir = PathBuf::from(value),
            _ => return Err(Error::InvalidInput(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            Error::InvalidInput(format!("override {assignment:?} is not of the form key=value"))
        })?;
        self.set(key.trim(), value)
    }

    /// Parses configuration text on top of the defaults.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fail = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail("expected `key = value`".into()))?;
            cfg.set(key.trim(), value).map_err(|e| fail(e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn serialize(&self) -> String {
        let polygon: Vec<String> = self.omega0.iter().map(|p| format!("{}, {}", p[0], p[1])).collect();
        let entries: [(&str, String); 20] = [
            ("geometry.radius", self.radius.to_string()),
            ("geometry.omega0", polygon.join("; ")),
            ("physics.f", self.f.to_string()),
            ("physics.psi_c1", self.psi_c1.to_string()),
            ("physics.psi_c2", self.psi_c2.to_string()),
            ("physics.psi_c3", self.psi_c3.to_string()),
            ("discretization.h", self.h.to_string()),
            ("discretization.n", self.n.to_string()),
            ("objective.beta", self.objective.beta.to_string()),
            ("objective.eps", self.objective.eps.to_string()),
            ("objective.gamma", self.objective.gamma.to_string()),
            ("objective.u_min", self.objective.u_min.to_string()),
            ("objective.u_max", self.objective.u_max.to_string()),
            ("optimizer.variant", self.variant.name().to_string()),
            ("optimizer.max_feval", self.max_feval.to_string()),
            ("optimizer.grad_tol", self.grad_tol.to_string()),
            ("optimizer.init_step", self.init_step.to_string()),
            ("control.a0", self.a0.to_string()),
            ("run.seed", self.seed.to_string()),
            ("run.output_dir", self.output_dir.display().to_string()),
        ];
        let mut out = String::new();
        for (key, value) in entries {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return bad(format!("geometry.radius must be positive, got {}", self.radius));
        }
        if !(self.h.is_finite() && self.h > 0.0 && self.h < self.radius) {
            return bad(format!("discretization.h must lie in (0, R), got {}", self.h));
        }
        if self.n < 3 {
            return bad(format!("discretization.n must be at least 3, got {}", self.n));
        }
        if self.omega0.len() < 3 {
            return bad("geometry.omega0 needs at least 3 vertices".into());
        }
        let coefficients = [self.f, self.psi_c1, self.psi_c2, self.psi_c3, self.a0];
        if coefficients.iter().any(|v| !v.is_finite()) {
            return bad("physics coefficients and control.a0 must be finite".into());
        }
        self.objective.validate()?;
        self.optimizer(Variant::Standard).validate()?;
        self.optimizer(Variant::WeakWolfe).validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_values() {
        let c = RunConfig::default();
        assert_eq!(c.radius, 1.75);
        assert_eq!(c.f, -10.0);
        assert_eq!((c.psi_c1, c.psi_c2, c.psi_c3), (-0.3, 0.25, -0.05));
        assert_eq!(c.omega0, vec![[-1.0, 0.0], [0.5, 0.75], [0.5, -1.5]]);
        assert_eq!((c.objective.u_min, c.objective.u_max), (0.01, 10.0));
        assert_eq!((c.objective.beta, c.objective.eps, c.objective.gamma), (1e-3, 1e-3, 1e-3));
        assert_eq!((c.n, c.a0, c.h), (30, 2.0, 0.05));
        assert_eq!(c.max_feval, 400);
        assert_eq!((c.psi())([0.0, 0.0]), -0.3 * 0.0625 - 0.05);
    }

    #[test]
    fn serialize_round_trips() {
        let mut c = RunConfig {
            h: 0.1 + 0.2,
            ..RunConfig::default()
        };
        c.objective.beta = 1.0 / 3.0;
        c.variant = VariantChoice::WeakWolfe;
        c.omega0[1] = [std::f64::consts::PI / 7.0, -1e-17];
        c.output_dir = PathBuf::from("runs/a b");
        let back = RunConfig::parse(&c.serialize(), Path::new("x")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn comments_blank_lines_and_overrides() {
        let text = "# comment\n\n objective.beta = 2e-3 \noptimizer.variant=standard\n";
        let mut c = RunConfig::parse(text, Path::new("x")).unwrap();
        assert_eq!(c.objective.beta, 2e-3);
        assert_eq!(c.variant, VariantChoice::Standard);
        c.apply_override("discretization.h=0.1").unwrap();
        assert_eq!(c.h, 0.1);
        assert!(c.apply_override("discretization.h").is_err());
        assert!(c.apply_override("nope=1").is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match RunConfig::parse("physics.f = -10\nphysics.f = ten\n", Path::new("c.txt")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(RunConfig::parse("just text", Path::new("c")), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut c = RunConfig {
            h: -0.1,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        c = RunConfig::default();
        c.objective.u_min = 20.0;
        assert!(c.validate().is_err());
        c = RunConfig::default();
        c.max_feval = 0;
        assert!(c.validate().is_err());
        RunConfig::default().validate().unwrap();
    }
}
