//! Generator configuration: every randomized range in the pipeline lives
//! here, so a config plus a master seed fully determines the output.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Schema version embedded in manifests and printed by the CLI.
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Documented constants for downstream trainers. They are not consumed by
/// this library; they record the training regime the generated data targets.
pub const TRAIN_BATCH_SIZE: u32 = 18;
pub const TRAIN_LEARNING_RATE: f64 = 1e-5;
pub const TRAIN_WEIGHT_DECAY: f64 = 5e-4;

/// Where blur masks come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    /// Softmax-sampled object proposals (self-supervised).
    Proposals,
    /// Largest object of a semantic label map (weakly supervised).
    Labels,
}

/// Ranges for the randomized blur parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlurConfig {
    /// Probability that a sample receives motion blur instead of defocus.
    pub motion_ratio: f64,
    /// Defocus standard deviation range in pixels.
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Motion length range in pixels (inclusive).
    pub length_min: u32,
    pub length_max: u32,
    /// Maximum elastic displacement, as a fraction of the motion length m.
    /// The per-sample amplitude is a uniform draw in [0, frac * m].
    pub elastic_amplitude_frac: f64,
    /// Elastic smoothing sigma as a fraction of the motion length m.
    pub elastic_smoothness_frac: f64,
}

impl Default for BlurConfig {
    fn default() -> Self {
        BlurConfig {
            motion_ratio: 0.5,
            sigma_min: 1.0,
            sigma_max: 5.0,
            length_min: 5,
            length_max: 31,
            elastic_amplitude_frac: 0.25,
            elastic_smoothness_frac: 0.25,
        }
    }
}

impl BlurConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.motion_ratio) {
            return Err(Error::Config(format!("motion_ratio {} outside [0, 1]", self.motion_ratio)));
        }
        if !(self.sigma_min > 0.0) || self.sigma_max < self.sigma_min {
            return Err(Error::Config(format!(
                "sigma range [{}, {}] must satisfy 0 < min <= max",
                self.sigma_min, self.sigma_max
            )));
        }
        if self.length_min < 1 || self.length_max < self.length_min {
            return Err(Error::Config(format!(
                "length range [{}, {}] must satisfy 1 <= min <= max",
                self.length_min, self.length_max
            )));
        }
        if self.elastic_amplitude_frac < 0.0 || !self.elastic_amplitude_frac.is_finite() {
            return Err(Error::Config("elastic_amplitude_frac must be >= 0".into()));
        }
        if !(self.elastic_smoothness_frac > 0.0) {
            return Err(Error::Config("elastic_smoothness_frac must be > 0".into()));
        }
        // Elastic displacement may not exceed half the kernel support.
        if self.elastic_amplitude_frac > 0.5 {
            return Err(Error::Config(
                "elastic_amplitude_frac > 0.5 lets mass escape the kernel support".into(),
            ));
        }
        Ok(())
    }
}

/// Joint image/mask augmentation ranges. The transform set follows the usual
/// segmentation-training recipe; every magnitude is overridable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub rotation_max_deg: f64,
    pub translation_max_frac: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub hflip_prob: f64,
    pub brightness_min: f64,
    pub brightness_max: f64,
    pub contrast_min: f64,
    pub contrast_max: f64,
    pub saturation_min: f64,
    pub saturation_max: f64,
    /// Crop window fraction per dimension.
    pub crop_frac_min: f64,
    pub crop_frac_max: f64,
    pub jpeg_prob: f64,
    pub jpeg_quality_min: u8,
    pub jpeg_quality_max: u8,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            rotation_max_deg: 15.0,
            translation_max_frac: 0.1,
            scale_min: 0.9,
            scale_max: 1.1,
            hflip_prob: 0.5,
            brightness_min: 0.8,
            brightness_max: 1.2,
            contrast_min: 0.8,
            contrast_max: 1.2,
            saturation_min: 0.8,
            saturation_max: 1.2,
            crop_frac_min: 0.6,
            crop_frac_max: 1.0,
            jpeg_prob: 0.5,
            jpeg_quality_min: 30,
            jpeg_quality_max: 95,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("scale", self.scale_min, self.scale_max),
            ("brightness", self.brightness_min, self.brightness_max),
            ("contrast", self.contrast_min, self.contrast_max),
            ("saturation", self.saturation_min, self.saturation_max),
            ("crop_frac", self.crop_frac_min, self.crop_frac_max),
        ];
        for (name, lo, hi) in ranges {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::Config(format!("{} range [{}, {}] is empty", name, lo, hi)));
            }
        }
        if self.rotation_max_deg < 0.0 || self.translation_max_frac < 0.0 {
            return Err(Error::Config("rotation/translation maxima must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.hflip_prob) {
            return Err(Error::Config(format!("hflip_prob {} outside [0, 1]", self.hflip_prob)));
        }
        if self.crop_frac_min <= 0.0 || self.crop_frac_max > 1.0 {
            return Err(Error::Config("crop fractions must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.jpeg_prob) {
            return Err(Error::Config(format!("jpeg_prob {} outside [0, 1]", self.jpeg_prob)));
        }
        if self.jpeg_quality_min < 1
            || self.jpeg_quality_max > 100
            || self.jpeg_quality_max < self.jpeg_quality_min
        {
            return Err(Error::Config(format!(
                "jpeg quality range [{}, {}] must lie in 1..=100",
                self.jpeg_quality_min, self.jpeg_quality_max
            )));
        }
        Ok(())
    }
}

/// Full pipeline configuration. Serializes to/from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Directory of source images (PNG/JPEG), indexed in sorted filename order.
    pub source_dir: PathBuf,
    pub mask_mode: MaskMode,
    /// Per-image proposal directories: `<proposal_dir>/<image-stem>/`.
    pub proposal_dir: Option<PathBuf>,
    /// Label map PNGs: `<label_dir>/<image-stem>.png`.
    pub label_dir: Option<PathBuf>,
    /// Probability of inverting the extracted blur mask.
    pub p_inv: f64,
    pub blur: BlurConfig,
    /// Telea inpainting neighborhood radius in pixels.
    pub inpaint_radius: u32,
    pub augment: AugmentConfig,
    /// Side length of emitted samples.
    pub output_size: u32,
    pub samples_per_image: u32,
    pub master_seed: u64,
    /// 0 = use all logical cores.
    pub workers: usize,
    pub output_dir: PathBuf,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            source_dir: PathBuf::from("."),
            mask_mode: MaskMode::Proposals,
            proposal_dir: None,
            label_dir: None,
            p_inv: 0.5,
            blur: BlurConfig::default(),
            inpaint_radius: 5,
            augment: AugmentConfig::default(),
            output_size: 224,
            samples_per_image: 1,
            master_seed: 0,
            workers: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        self.blur.validate()?;
        self.augment.validate()?;
        if !(0.0..=1.0).contains(&self.p_inv) {
            return Err(Error::Config(format!("p_inv {} outside [0, 1]", self.p_inv)));
        }
        if self.output_size == 0 {
            return Err(Error::Config("output_size must be positive".into()));
        }
        if self.samples_per_image == 0 {
            return Err(Error::Config("samples_per_image must be positive".into()));
        }
        if self.inpaint_radius == 0 {
            return Err(Error::Config("inpaint_radius must be positive".into()));
        }
        match self.mask_mode {
            MaskMode::Proposals if self.proposal_dir.is_none() => {
                Err(Error::Config("mask_mode = proposals requires proposal_dir".into()))
            }
            MaskMode::Labels if self.label_dir.is_none() => {
                Err(Error::Config("mask_mode = labels requires label_dir".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: GeneratorConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("toml parse: {}", e)))?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Canonical JSON rendering used for config hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_when_dirs_set() {
        let mut cfg = GeneratorConfig::default();
        cfg.proposal_dir = Some(PathBuf::from("props"));
        cfg.validate().unwrap();
    }

    #[test]
    fn labels_mode_without_dir_is_config_error() {
        let mut cfg = GeneratorConfig::default();
        cfg.mask_mode = MaskMode::Labels;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn bad_ranges_rejected() {
        let mut cfg = GeneratorConfig::default();
        cfg.proposal_dir = Some(PathBuf::from("p"));
        cfg.blur.sigma_min = 3.0;
        cfg.blur.sigma_max = 1.0;
        assert!(cfg.validate().is_err());

        let mut cfg = GeneratorConfig::default();
        cfg.proposal_dir = Some(PathBuf::from("p"));
        cfg.p_inv = 1.2;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_roundtrip_preserves_config() {
        let mut cfg = GeneratorConfig::default();
        cfg.master_seed = 123456789;
        cfg.blur.motion_ratio = 0.25;
        cfg.label_dir = Some(PathBuf::from("labels"));
        let text = cfg.to_toml_string();
        let back = GeneratorConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let cfg = GeneratorConfig::from_toml_str(
            "source_dir = \"imgs\"\nmaster_seed = 7\n[blur]\nmotion_ratio = 1.0\n",
        )
        .unwrap();
        assert_eq!(cfg.master_seed, 7);
        assert_eq!(cfg.blur.motion_ratio, 1.0);
        assert_eq!(cfg.blur.sigma_max, 5.0);
        assert_eq!(cfg.output_size, 224);
    }
}
