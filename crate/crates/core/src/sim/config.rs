use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::filter::{BirthMode, BirthModel, MotionModel, SensorModel, UpdateConfig};
use crate::fusion::MissedDetectionModel;
use crate::network::{ConsensusConfig, NetworkModel, Region, SensorGraph};
use crate::possibility::MixtureReduction;

/// Which of the two evaluation scenarios to simulate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    /// Four fixed corner sensors, three targets from fixed birth points.
    A,
    /// Four moving sensors, Poisson target births at random positions.
    B,
}

impl FromStr for Case {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "A" | "a" => Ok(Case::A),
            "B" | "b" => Ok(Case::B),
            other => Err(format!("unknown case {other:?}, expected A or B")),
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::A => "A",
            Case::B => "B",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BirthKind {
    /// Measurement-driven births from weakly used measurements.
    Adaptive,
    /// Births declared at the scenario's fixed birth locations.
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Topology {
    Ring,
    Line,
    Complete,
    Star,
    File(PathBuf),
}

/// Every knob of a simulated scenario. Field names double as the keys of
/// the configuration file.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub case: Case,
    /// The surveillance area is `[-a, a]²`.
    pub area_half_width: f64,
    pub steps: usize,
    pub dt: f64,
    pub sigma_r: f64,
    pub lambda_fa: f64,
    pub sigma_s: f64,
    /// Process-noise intensity assumed by the filter.
    pub sigma_q: f64,
    /// Process-noise intensity of the simulated targets.
    pub truth_sigma_q: f64,
    pub lambda_b: f64,
    pub sigma_v: f64,
    pub birth_cutoff: usize,
    pub mc_runs: usize,
    pub seed: u64,

    pub case_a_birth_steps: Vec<usize>,
    pub case_a_death_step: usize,
    pub case_a_speed: f64,
    pub sensor_speed: f64,

    pub survival: f64,
    pub death: f64,
    pub gamma_b: f64,
    pub tau_b: f64,
    pub birth_velocity_std: f64,
    pub birth_mode: BirthKind,
    pub fixed_birth_std: f64,
    pub usage_threshold: f64,
    pub max_hypotheses: usize,
    pub gate: f64,
    pub prune_threshold: f64,
    pub merge_threshold: f64,
    pub max_components: usize,
    pub existence_threshold: f64,
    pub temper_shared_prior: bool,
    pub match_threshold: f64,
    pub r0: f64,
    pub r1: f64,
    /// Seed births only inside the surveillance area and drop tracks that
    /// leave it.
    pub restrict_to_area: bool,
    /// `None` means `2π σ_s²`.
    pub clutter_volume: Option<f64>,

    pub consensus_iterations: usize,
    /// `None` means `1 / |V_i|` per node.
    pub discount: Option<f64>,
    pub topology: Topology,

    pub ospa_c: f64,
    pub ospa_p: f64,
    pub ospa2_window: usize,
}

impl ScenarioConfig {
    pub fn case_a() -> Self {
        Self {
            case: Case::A,
            area_half_width: 1000.0,
            steps: 100,
            dt: 1.0,
            sigma_r: 5.0,
            lambda_fa: 10.0,
            sigma_s: 1000.0,
            sigma_q: 5.0,
            truth_sigma_q: 0.2,
            lambda_b: 0.3,
            sigma_v: 3.0,
            birth_cutoff: 30,
            mc_runs: 100,
            seed: 1,
            case_a_birth_steps: vec![1, 10, 20],
            case_a_death_step: 50,
            case_a_speed: 10.0,
            sensor_speed: 50.0,
            survival: 1.0,
            death: 0.05,
            gamma_b: 1e-3,
            tau_b: 1.0,
            birth_velocity_std: 15.0,
            birth_mode: BirthKind::Adaptive,
            fixed_birth_std: 50.0,
            usage_threshold: 0.9,
            max_hypotheses: 100,
            gate: 1e-4,
            prune_threshold: 1e-3,
            merge_threshold: 0.1,
            max_components: 30,
            existence_threshold: 1e-4,
            temper_shared_prior: true,
            match_threshold: 1e-2,
            r0: 1.0,
            r1: 1.0,
            restrict_to_area: true,
            clutter_volume: None,
            consensus_iterations: 3,
            discount: None,
            topology: Topology::Ring,
            ospa_c: 100.0,
            ospa_p: 2.0,
            ospa2_window: 10,
        }
    }

    pub fn case_b() -> Self {
        Self {
            case: Case::B,
            sigma_s: 500.0,
            ..Self::case_a()
        }
    }

    pub fn for_case(case: Case) -> Self {
        match case {
            Case::A => Self::case_a(),
            Case::B => Self::case_b(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area_half_width", self.area_half_width),
            ("dt", self.dt),
            ("sigma_r", self.sigma_r),
            ("sigma_s", self.sigma_s),
            ("sigma_q", self.sigma_q),
            ("birth_velocity_std", self.birth_velocity_std),
            ("fixed_birth_std", self.fixed_birth_std),
            ("ospa_c", self.ospa_c),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Argument(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("lambda_fa", self.lambda_fa),
            ("truth_sigma_q", self.truth_sigma_q),
            ("lambda_b", self.lambda_b),
            ("sigma_v", self.sigma_v),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Argument(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.steps == 0 || self.mc_runs == 0 || self.ospa2_window == 0 || self.consensus_iterations == 0 {
            return Err(Error::Argument(
                "steps, mc_runs, ospa2_window and consensus_iterations must be at least 1".into(),
            ));
        }
        if self.ospa_p < 1.0 {
            return Err(Error::Argument("ospa_p must be at least 1".into()));
        }
        Ok(())
    }

    pub fn motion(&self) -> Result<MotionModel> {
        MotionModel::constant_velocity(self.dt, self.sigma_q, self.survival, self.death)
    }

    /// Case A birth points.
    pub fn case_a_birth_locations(&self) -> Vec<Vector2<f64>> {
        vec![Vector2::new(800.0, 500.0), Vector2::new(-800.0, 500.0), Vector2::new(0.0, -800.0)]
    }

    pub fn birth_model(&self) -> BirthModel {
        let mut b = BirthModel::measurement_driven(self.birth_velocity_std);
        b.gamma_b = self.gamma_b;
        b.tau_b = self.tau_b;
        b.mode = match self.birth_mode {
            BirthKind::Adaptive => BirthMode::MeasurementDriven {
                usage_threshold: self.usage_threshold,
            },
            BirthKind::Fixed => BirthMode::Fixed {
                locations: self.case_a_birth_locations(),
                position_std: self.fixed_birth_std,
            },
        };
        b
    }

    pub fn sensor(&self, id: usize, position: Vector2<f64>) -> SensorModel {
        let mut s = SensorModel::position_sensor(id, position, self.sigma_r, self.sigma_s, self.lambda_fa);
        if let Some(v) = self.clutter_volume {
            s.clutter_volume = v;
        }
        s
    }

    pub fn update_config(&self) -> UpdateConfig {
        UpdateConfig {
            max_hypotheses: self.max_hypotheses,
            gate: self.gate,
            reduction: MixtureReduction {
                prune_threshold: self.prune_threshold,
                merge_threshold: self.merge_threshold,
                max_components: self.max_components,
            },
        }
    }

    /// Network model with sensors at the given positions.
    pub fn network_model(&self, positions: &[Vector2<f64>]) -> Result<NetworkModel> {
        let mut m = NetworkModel::new(
            self.motion()?,
            positions
                .iter()
                .enumerate()
                .map(|(i, p)| self.sensor(i, *p))
                .collect(),
            self.birth_model(),
        );
        m.update = self.update_config();
        m.existence_threshold = self.existence_threshold;
        m.temper_shared_prior = self.temper_shared_prior;
        m.missed = MissedDetectionModel { r0: self.r0, r1: self.r1 };
        m.match_threshold = self.match_threshold;
        m.region = self.restrict_to_area.then(|| Region::square(self.area_half_width));
        Ok(m)
    }

    pub fn consensus(&self) -> ConsensusConfig {
        ConsensusConfig {
            iterations: self.consensus_iterations,
            discount: self.discount,
        }
    }

    pub fn graph(&self, nodes: usize) -> Result<SensorGraph> {
        let g = match &self.topology {
            Topology::Ring => SensorGraph::ring(nodes)?,
            Topology::Line => SensorGraph::line(nodes)?,
            Topology::Complete => SensorGraph::complete(nodes)?,
            Topology::Star => SensorGraph::star(nodes)?,
            Topology::File(path) => SensorGraph::parse(&std::fs::read_to_string(path)?)?,
        };
        if g.node_count() != nodes {
            return Err(Error::Topology(format!(
                "topology has {} nodes but the scenario has {nodes} sensors",
                g.node_count()
            )));
        }
        Ok(g)
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment
    /// line; unknown keys are errors.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { line: lineno + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            self.set(key.trim(), value.trim()).map_err(err)?;
        }
        self.validate()
    }

    /// Parses a configuration file; `case` (if present) selects the defaults
    /// the remaining keys override.
    pub fn parse(text: &str) -> Result<Self> {
        let mut case = Case::A;
        for (lineno, raw) in text.lines().enumerate() {
            if let Some((k, v)) = raw.trim().split_once('=') {
                if k.trim() == "case" && !raw.trim().starts_with('#') {
                    case = v.trim().parse().map_err(|msg| Error::Parse { line: lineno + 1, msg })?;
                }
            }
        }
        let mut cfg = Self::for_case(case);
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(v: &str) -> std::result::Result<T, String>
        where
            T::Err: fmt::Display,
        {
            v.parse::<T>().map_err(|e| format!("{v:?}: {e}"))
        }
        fn flag(v: &str) -> std::result::Result<bool, String> {
            match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(format!("{v:?} is not a boolean")),
            }
        }
        fn auto(v: &str) -> std::result::Result<Option<f64>, String> {
            if v == "auto" {
                Ok(None)
            } else {
                num(v).map(Some)
            }
        }
        match key {
            "case" => self.case = value.parse()?,
            "area_half_width" => self.area_half_width = num(value)?,
            "steps" => self.steps = num(value)?,
            "dt" => self.dt = num(value)?,
            "sigma_r" => self.sigma_r = num(value)?,
            "lambda_fa" => self.lambda_fa = num(value)?,
            "sigma_s" => self.sigma_s = num(value)?,
            "sigma_q" => self.sigma_q = num(value)?,
            "truth_sigma_q" => self.truth_sigma_q = num(value)?,
            "lambda_b" => self.lambda_b = num(value)?,
            "sigma_v" => self.sigma_v = num(value)?,
            "birth_cutoff" => self.birth_cutoff = num(value)?,
            "mc_runs" => self.mc_runs = num(value)?,
            "seed" => self.seed = num(value)?,
            "case_a_birth_steps" => {
                self.case_a_birth_steps = value
                    .split(',')
                    .map(|s| num(s.trim()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "case_a_death_step" => self.case_a_death_step = num(value)?,
            "case_a_speed" => self.case_a_speed = num(value)?,
            "sensor_speed" => self.sensor_speed = num(value)?,
            "survival" => self.survival = num(value)?,
            "death" => self.death = num(value)?,
            "gamma_b" => self.gamma_b = num(value)?,
            "tau_b" => self.tau_b = num(value)?,
            "birth_velocity_std" => self.birth_velocity_std = num(value)?,
            "birth_mode" => {
                self.birth_mode = match value {
                    "adaptive" => BirthKind::Adaptive,
                    "fixed" => BirthKind::Fixed,
                    _ => return Err(format!("birth_mode {value:?}, expected adaptive or fixed")),
                }
            }
            "fixed_birth_std" => self.fixed_birth_std = num(value)?,
            "usage_threshold" => self.usage_threshold = num(value)?,
            "max_hypotheses" => self.max_hypotheses = num(value)?,
            "gate" => self.gate = num(value)?,
            "prune_threshold" => self.prune_threshold = num(value)?,
            "merge_threshold" => self.merge_threshold = num(value)?,
            "max_components" => self.max_components = num(value)?,
            "existence_threshold" => self.existence_threshold = num(value)?,
            "temper_shared_prior" => self.temper_shared_prior = flag(value)?,
            "match_threshold" => self.match_threshold = num(value)?,
            "r0" => self.r0 = num(value)?,
            "r1" => self.r1 = num(value)?,
            "restrict_to_area" => self.restrict_to_area = flag(value)?,
            "clutter_volume" => self.clutter_volume = auto(value)?,
            "consensus_iterations" => self.consensus_iterations = num(value)?,
            "discount" => self.discount = auto(value)?,
            "topology" => {
                self.topology = match value {
                    "ring" => Topology::Ring,
                    "line" => Topology::Line,
                    "complete" => Topology::Complete,
                    "star" => Topology::Star,
                    path => Topology::File(PathBuf::from(path)),
                }
            }
            "ospa_c" => self.ospa_c = num(value)?,
            "ospa_p" => self.ospa_p = num(value)?,
            "ospa2_window" => self.ospa2_window = num(value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_per_case() {
        assert_eq!(ScenarioConfig::case_a().sigma_s, 1000.0);
        assert_eq!(ScenarioConfig::case_b().sigma_s, 500.0);
        assert!(ScenarioConfig::case_a().validate().is_ok());
    }

    #[test]
    fn parse_overrides() {
        let cfg = ScenarioConfig::parse(
            "# comment\ncase = B\nsteps = 20\nseed=7\ntemper_shared_prior = false\nclutter_volume = 4e6\ndiscount = auto\ntopology = line\ncase_a_birth_steps = 1, 5\n",
        )
        .unwrap();
        assert_eq!(cfg.case, Case::B);
        assert_eq!(cfg.sigma_s, 500.0);
        assert_eq!(cfg.steps, 20);
        assert_eq!(cfg.seed, 7);
        assert!(!cfg.temper_shared_prior);
        assert_eq!(cfg.clutter_volume, Some(4e6));
        assert_eq!(cfg.discount, None);
        assert_eq!(cfg.topology, Topology::Line);
        assert_eq!(cfg.case_a_birth_steps, vec![1, 5]);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(ScenarioConfig::parse("bogus = 1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(ScenarioConfig::parse("\nsteps = x\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(ScenarioConfig::parse("steps\n"), Err(Error::Parse { line: 1, .. })));
        assert!(ScenarioConfig::parse("steps = 0\n").is_err());
    }
}
