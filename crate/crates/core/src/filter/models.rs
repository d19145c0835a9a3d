use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::{Error, Result};
use crate::labeled::{BernoulliTrack, Label, LmbDensity};
use crate::possibility::{eval_gaussian, GaussianComponent, MaxMixture};

/// Smallest clutter possibility used when the clutter model vanishes.
pub const CLUTTER_FLOOR: f64 = 1e-300;

/// Linear-Gaussian motion with state-independent survival and death
/// possibilities.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionModel {
    pub f: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub survival: f64,
    pub death: f64,
}

impl MotionModel {
    pub fn new(f: DMatrix<f64>, q: DMatrix<f64>, survival: f64, death: f64) -> Result<Self> {
        if !f.is_square() || f.shape() != q.shape() {
            return Err(Error::Shape(format!(
                "transition {:?} and process noise {:?}",
                f.shape(),
                q.shape()
            )));
        }
        for v in [survival, death] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidWeight(v));
            }
        }
        if (survival.max(death) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(
                "max(survival, death) must equal 1".into(),
            ));
        }
        Ok(Self {
            f,
            q,
            survival,
            death,
        })
    }

    /// Planar constant velocity on `[px, py, vx, vy]` driven by continuous
    /// white acceleration noise of intensity `sigma_q²`.
    pub fn constant_velocity(dt: f64, sigma_q: f64, survival: f64, death: f64) -> Result<Self> {
        Self::new(cv_transition(dt), cv_process_noise(dt, sigma_q), survival, death)
    }

    pub fn dim(&self) -> usize {
        self.f.nrows()
    }
}

pub fn cv_transition(dt: f64) -> DMatrix<f64> {
    let mut f = DMatrix::identity(4, 4);
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

pub fn cv_process_noise(dt: f64, sigma_q: f64) -> DMatrix<f64> {
    let s2 = sigma_q * sigma_q;
    let (a, b, c) = (dt.powi(3) / 3.0, dt * dt / 2.0, dt);
    let mut q = DMatrix::zeros(4, 4);
    for k in 0..2 {
        q[(k, k)] = s2 * a;
        q[(k, k + 2)] = s2 * b;
        q[(k + 2, k)] = s2 * b;
        q[(k + 2, k + 2)] = s2 * c;
    }
    q
}

/// Position-only sensor with a Gaussian-shaped detection possibility around
/// its location and Gaussian-shaped clutter.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorModel {
    pub id: usize,
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub position: Vector2<f64>,
    pub sigma_s: f64,
    pub detect_success: f64,
    pub clutter_rate: f64,
    pub clutter_volume: f64,
}

impl SensorModel {
    /// Sensor observing `[px, py]` of a 4-d constant-velocity state with
    /// isotropic noise `sigma_r`; the clutter volume defaults to `2π σ_s²`.
    pub fn position_sensor(id: usize, position: Vector2<f64>, sigma_r: f64, sigma_s: f64, clutter_rate: f64) -> Self {
        let mut h = DMatrix::zeros(2, 4);
        h[(0, 0)] = 1.0;
        h[(1, 1)] = 1.0;
        Self {
            id,
            h,
            r: DMatrix::identity(2, 2) * (sigma_r * sigma_r),
            position,
            sigma_s,
            detect_success: 1.0,
            clutter_rate,
            clutter_volume: 2.0 * std::f64::consts::PI * sigma_s * sigma_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h.nrows() != 2 || self.r.shape() != (2, 2) {
            return Err(Error::Shape("sensor observes 2-d positions".into()));
        }
        if !(self.detect_success > 0.0 && self.detect_success <= 1.0) {
            return Err(Error::InvalidWeight(self.detect_success));
        }
        if !(self.sigma_s > 0.0) || !(self.clutter_volume > 0.0) || !(self.clutter_rate >= 0.0) {
            return Err(Error::InvalidModel("sensor scales must be positive".into()));
        }
        Ok(())
    }

    fn position_cov(&self) -> DMatrix<f64> {
        DMatrix::identity(2, 2) * (self.sigma_s * self.sigma_s)
    }

    fn position_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(self.position.as_slice())
    }

    /// `N̄(z; sensor position, σ_s² I)` for an observed position `z`.
    pub fn detection_shape(&self, z: &DVector<f64>) -> f64 {
        let d = z - self.position_vec();
        (-0.5 * d.norm_squared() / (self.sigma_s * self.sigma_s)).exp()
    }

    /// Detection possibility (also the simulated detection probability).
    pub fn detection_probability(&self, x: &DVector<f64>) -> f64 {
        self.detection_shape(&(&self.h * x))
    }

    /// Detection-failure possibility `1 − N̄(Hx; position, σ_s² I)`.
    pub fn detect_fail(&self, x: &DVector<f64>) -> f64 {
        1.0 - self.detection_probability(x)
    }

    /// Clutter possibility `(1/V)·2π·sqrt(det R)·λ_fa·N̄(z; position, σ_s² I)`.
    pub fn clutter_possibility(&self, z: &DVector<f64>) -> f64 {
        let scale = 2.0 * std::f64::consts::PI * self.r.determinant().sqrt() * self.clutter_rate / self.clutter_volume;
        let shape = eval_gaussian(z, &self.position_vec(), &self.position_cov()).unwrap_or(0.0);
        (scale * shape).max(CLUTTER_FLOOR)
    }
}

/// How new tracks enter the filter.
#[derive(Clone, Debug, PartialEq)]
pub enum BirthMode {
    /// Tracks declared at fixed positions every step.
    Fixed { locations: Vec<Vector2<f64>>, position_std: f64 },
    /// One track per weakly explained measurement of the previous step.
    MeasurementDriven { usage_threshold: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BirthModel {
    pub gamma_b: f64,
    pub tau_b: f64,
    pub velocity_prior_cov: DMatrix<f64>,
    pub mode: BirthMode,
}

impl BirthModel {
    pub fn measurement_driven(velocity_std: f64) -> Self {
        Self {
            gamma_b: 1e-3,
            tau_b: 1.0,
            velocity_prior_cov: DMatrix::identity(2, 2) * (velocity_std * velocity_std),
            mode: BirthMode::MeasurementDriven { usage_threshold: 0.9 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.gamma_b, self.tau_b] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidWeight(v));
            }
        }
        if (self.gamma_b.max(self.tau_b) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel("max(gamma_b, tau_b) must equal 1".into()));
        }
        Ok(())
    }

    fn track(&self, label: Label, pos: &DVector<f64>, pos_cov: &DMatrix<f64>) -> Result<BernoulliTrack> {
        let mut mean = DVector::zeros(4);
        mean.rows_mut(0, 2).copy_from(pos);
        let mut cov = DMatrix::zeros(4, 4);
        cov.view_mut((0, 0), (2, 2)).copy_from(pos_cov);
        cov.view_mut((2, 2), (2, 2)).copy_from(&self.velocity_prior_cov);
        let f = MaxMixture::single(GaussianComponent::new(1.0, mean, cov)?);
        BernoulliTrack::new(label, self.tau_b, self.gamma_b, f)
    }
}

/// Birth tracks from the previous step's measurements whose association
/// usage stayed below the threshold. Labels are `(k, index_offset + j)`.
pub fn adaptive_birth(
    z_prev: &[DVector<f64>],
    usage: &[f64],
    birth: &BirthModel,
    sensor: &SensorModel,
    k: u32,
    index_offset: u32,
) -> Result<LmbDensity> {
    birth.validate()?;
    let threshold = match birth.mode {
        BirthMode::MeasurementDriven { usage_threshold } => usage_threshold,
        BirthMode::Fixed { .. } => {
            return Err(Error::Argument("adaptive birth needs a measurement-driven model".into()))
        }
    };
    if usage.len() != z_prev.len() {
        return Err(Error::Shape(format!(
            "{} measurements but {} usage values",
            z_prev.len(),
            usage.len()
        )));
    }
    let mut out = LmbDensity::new();
    for (j, (z, &u)) in z_prev.iter().zip(usage).enumerate() {
        if u < threshold {
            out.insert(birth.track(Label::new(k, index_offset + j as u32), z, &sensor.r)?)?;
        }
    }
    Ok(out)
}

/// Birth tracks at the fixed locations of a [`BirthMode::Fixed`] model,
/// labeled `(k, index_offset + i)`.
pub fn fixed_birth(birth: &BirthModel, k: u32, index_offset: u32) -> Result<LmbDensity> {
    birth.validate()?;
    let BirthMode::Fixed { locations, position_std } = &birth.mode else {
        return Err(Error::Argument("fixed birth needs fixed locations".into()));
    };
    let pos_cov = DMatrix::identity(2, 2) * (position_std * position_std);
    let mut out = LmbDensity::new();
    for (i, p) in locations.iter().enumerate() {
        let pos = DVector::from_column_slice(p.as_slice());
        out.insert(birth.track(Label::new(k, index_offset + i as u32), &pos, &pos_cov)?)?;
    }
    Ok(out)
}
