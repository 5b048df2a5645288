//! Run configuration: `section.key = value` lines, `#` starts a comment.
//! Every key must be known; a key may appear once per file. Command-line
//! `--set section.key=value` overrides are applied after the file.

use std::fmt;
use std::fs;
use std::path::Path;

use graspkit::antipodal::{GripperModel, SamplerConfig};
use graspkit::camera::{CameraIntrinsics, RigidPose, ZBand};
use graspkit::cloud::PatchConfig;
use graspkit::dataset::SynthConfig;
use graspkit::grasp::EvalConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Camera-to-world pose: row-major rotation, then translation.
    pub camera_pose: [f64; 12],
    pub z_min: f64,
    pub z_max: f64,
    pub patch_k: usize,
    pub patch_radius: Option<f64>,
    pub n_seeds: usize,
    pub n_orientations: usize,
    pub rng_seed: u64,
    pub gripper: GripperModel,
    pub synth: SynthConfig,
    pub jaccard_threshold: f64,
    pub angle_deg: f64,
    pub angle_check: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sampler = SamplerConfig::default();
        let eval = EvalConfig::default();
        Self {
            fx: 600.0,
            fy: 600.0,
            cx: 320.0,
            cy: 240.0,
            camera_pose: RigidPose::identity().to_row_major(),
            z_min: 0.5,
            z_max: 1.5,
            patch_k: sampler.patch.k,
            patch_radius: sampler.patch.radius,
            n_seeds: sampler.n_seeds,
            n_orientations: sampler.n_orientations,
            rng_seed: sampler.rng_seed,
            gripper: GripperModel::default(),
            synth: SynthConfig::default(),
            jaccard_threshold: eval.jaccard_threshold,
            angle_deg: eval.angle_threshold.to_degrees(),
            angle_check: eval.angle_check_enabled,
        }
    }
}

#[cfg(test)]
const KEYS: [&str; 24] = [
    "camera.fx",
    "camera.fy",
    "camera.cx",
    "camera.cy",
    "camera.pose",
    "crop.z_min",
    "crop.z_max",
    "cloud.patch_k",
    "cloud.patch_radius",
    "grasp.n_seeds",
    "grasp.n_orientations",
    "grasp.rng_seed",
    "grasp.mu_cos",
    "gripper.max_opening",
    "gripper.finger_thickness",
    "gripper.finger_depth",
    "gripper.finger_width",
    "gripper.palm_clearance",
    "synth.density",
    "synth.noise_sigma",
    "synth.seed",
    "eval.jaccard_threshold",
    "eval.angle_deg",
    "eval.angle_check",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| ConfigError(format!("{key}: cannot parse {v:?}")))
}

fn boolean(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ConfigError(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "camera.fx" => self.fx = num(key, v)?,
            "camera.fy" => self.fy = num(key, v)?,
            "camera.cx" => self.cx = num(key, v)?,
            "camera.cy" => self.cy = num(key, v)?,
            "camera.pose" => {
                let vals: Vec<f64> = v
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|t| !t.is_empty())
                    .map(|t| num(key, t))
                    .collect::<Result<_, _>>()?;
                self.camera_pose = vals.try_into().map_err(|v: Vec<f64>| {
                    ConfigError(format!("{key}: expected 12 numbers, got {}", v.len()))
                })?;
            }
            "crop.z_min" => self.z_min = num(key, v)?,
            "crop.z_max" => self.z_max = num(key, v)?,
            "cloud.patch_k" => self.patch_k = num(key, v)?,
            "cloud.patch_radius" => {
                self.patch_radius = match v {
                    "none" => None,
                    _ => Some(num(key, v)?),
                }
            }
            "grasp.n_seeds" => self.n_seeds = num(key, v)?,
            "grasp.n_orientations" => self.n_orientations = num(key, v)?,
            "grasp.rng_seed" => self.rng_seed = num(key, v)?,
            "grasp.mu_cos" => self.gripper.mu_cos = num(key, v)?,
            "gripper.max_opening" => self.gripper.max_opening = num(key, v)?,
            "gripper.finger_thickness" => self.gripper.finger_thickness = num(key, v)?,
            "gripper.finger_depth" => self.gripper.finger_depth = num(key, v)?,
            "gripper.finger_width" => self.gripper.finger_width = num(key, v)?,
            "gripper.palm_clearance" => self.gripper.palm_clearance = num(key, v)?,
            "synth.density" => self.synth.density = num(key, v)?,
            "synth.noise_sigma" => self.synth.noise_sigma = num(key, v)?,
            "synth.seed" => self.synth.seed = num(key, v)?,
            "eval.jaccard_threshold" => self.jaccard_threshold = num(key, v)?,
            "eval.angle_deg" => self.angle_deg = num(key, v)?,
            "eval.angle_check" => self.angle_check = boolean(key, v)?,
            _ => return Err(ConfigError(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` or `key = value`.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("expected key=value, got {pair:?}")))?;
        self.set(k.trim(), v)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!("line {}: expected 'section.key = value'", i + 1))
            })?;
            let k = k.trim();
            if seen.iter().any(|s| s == k) {
                return Err(ConfigError(format!("line {}: duplicate key {k:?}", i + 1)));
            }
            self.set(k, v)
                .map_err(|e| ConfigError(format!("line {}: {}", i + 1, e.0)))?;
            seen.push(k.to_string());
        }
        Ok(())
    }

    /// Defaults, then `path` if given, then `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        if let Some(p) = path {
            let text = fs::read_to_string(p)
                .map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
            cfg.apply_text(&text)
                .map_err(|e| ConfigError(format!("{}: {}", p.display(), e.0)))?;
        }
        for o in overrides {
            cfg.set_pair(o)?;
        }
        Ok(cfg)
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics, ConfigError> {
        CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy)
            .map_err(|e| ConfigError(format!("camera: {e}")))
    }

    pub fn pose(&self) -> Result<RigidPose, ConfigError> {
        RigidPose::from_row_major(&self.camera_pose)
            .map_err(|e| ConfigError(format!("camera.pose: {e}")))
    }

    pub fn band(&self) -> Result<ZBand, ConfigError> {
        ZBand::new(self.z_min, self.z_max).map_err(|e| ConfigError(format!("crop: {e}")))
    }

    pub fn sampler(&self) -> Result<SamplerConfig, ConfigError> {
        let s = SamplerConfig {
            n_seeds: self.n_seeds,
            n_orientations: self.n_orientations,
            rng_seed: self.rng_seed,
            patch: PatchConfig {
                k: self.patch_k,
                radius: self.patch_radius,
            },
        };
        s.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(s)
    }

    pub fn gripper(&self) -> Result<GripperModel, ConfigError> {
        self.gripper
            .validate()
            .map_err(|e| ConfigError(e.to_string()))?;
        Ok(self.gripper)
    }

    pub fn eval(&self) -> Result<EvalConfig, ConfigError> {
        let e = EvalConfig {
            jaccard_threshold: self.jaccard_threshold,
            angle_threshold: self.angle_deg.to_radians(),
            angle_check_enabled: self.angle_check,
        };
        e.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(e)
    }
}
