//! Loading and fitting steps shared by the batch commands and the server.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use phyllo::descriptor::lint;
use phyllo::io::{read_point_cloud, CloudFormat, LengthUnit, PointCloud};
use phyllo::metrics::{chamfer, sample_model, ChamferReport};
use phyllo::{generate_plant, parse_descriptor, resolve_parameters, PlantDescriptor, PlantModel};

pub const DEFAULT_SAMPLE_U: usize = 64;
pub const DEFAULT_SAMPLE_V: usize = 16;
pub const DEFAULT_FIT_SAMPLES: usize = 50_000;

/// A problem with the invocation itself (missing input, bad precondition).
/// The binary exits with status 2 for these and 1 for everything else.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn read_input(path: &Path, what: &str) -> Result<Vec<u8>> {
    match std::fs::read(path) {
        Ok(bytes) => Ok(bytes),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(UsageError(format!("{what} not found: {}", path.display())).into())
        }
        Err(e) => Err(e).with_context(|| format!("reading {}", path.display())),
    }
}

/// Parse and resolve descriptor text; errors carry the document name.
pub fn descriptor_from_text(text: &str, name: &str) -> Result<PlantDescriptor> {
    let raw = parse_descriptor(text).with_context(|| format!("{name}: invalid descriptor"))?;
    resolve_parameters(&raw).with_context(|| format!("{name}: invalid descriptor"))
}

pub fn load_descriptor(path: &Path) -> Result<PlantDescriptor> {
    let bytes = read_input(path, "descriptor")?;
    let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
    descriptor_from_text(&text, &path.display().to_string())
}

pub fn build_model(pd: &PlantDescriptor) -> Result<(PlantModel, Vec<String>)> {
    let model = generate_plant(pd).context("geometry generation failed")?;
    Ok((model, lint(pd)))
}

pub fn load_cloud(path: &Path, format: Option<CloudFormat>, unit: LengthUnit) -> Result<PointCloud> {
    let bytes = read_input(path, "point cloud")?;
    let format = match format {
        Some(f) => f,
        None => CloudFormat::from_path(path).with_context(|| format!("{}: pass --format", path.display()))?,
    };
    read_point_cloud(&bytes, format, unit).with_context(|| format!("reading {}", path.display()))
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub samples: usize,
    pub seed: Option<u64>,
    pub sample_u: usize,
    pub sample_v: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { samples: DEFAULT_FIT_SAMPLES, seed: None, sample_u: DEFAULT_SAMPLE_U, sample_v: DEFAULT_SAMPLE_V }
    }
}

/// Chamfer distance between `n` area-weighted model samples and the cloud.
/// The sampling seed defaults to the descriptor seed.
pub fn fit(pd: &PlantDescriptor, model: &PlantModel, cloud: &PointCloud, opts: FitOptions) -> Result<ChamferReport> {
    let seed = opts.seed.unwrap_or(pd.seed);
    let samples = sample_model(model, opts.samples, seed, opts.sample_u, opts.sample_v)?;
    Ok(chamfer(&samples, cloud)?)
}

/// Warn when the cloud is one or two orders of magnitude off the model,
/// which usually means `--unit` is wrong.
pub fn unit_warning(model: &PlantModel, cloud: &PointCloud, unit: LengthUnit) -> Option<String> {
    let (lo, hi) = model.bounding_box()?;
    let model_extent = lo.amax().max(hi.amax());
    let cloud_extent = cloud.extent();
    if model_extent <= 0.0 || cloud_extent <= 0.0 {
        return None;
    }
    let ratio = cloud_extent / model_extent;
    (!(0.05..=20.0).contains(&ratio)).then(|| {
        let unit = match unit {
            LengthUnit::M => "m",
            LengthUnit::Cm => "cm",
        };
        format!(
            "point cloud extent {:.4} m vs model extent {:.4} m (ratio {ratio:.3}); check that --unit {unit} is right",
            cloud_extent / 100.0,
            model_extent / 100.0,
        )
    })
}

/// `dir/<name>`, unless `explicit` was given.
pub fn output_path(explicit: Option<PathBuf>, dir: &Path, name: &str) -> PathBuf {
    explicit.unwrap_or_else(|| dir.join(name))
}

pub fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use phyllo::Vec3;

    #[test]
    fn missing_file_is_a_usage_error() {
        let err = load_descriptor(Path::new("/nonexistent/plant.yaml")).unwrap_err();
        let usage = err.downcast_ref::<UsageError>().expect("usage error");
        assert!(usage.0.starts_with("descriptor not found"));
    }

    #[test]
    fn invalid_descriptor_names_the_document() {
        let err = descriptor_from_text("seed: 3\n", "plant.yaml").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("plant.yaml") && msg.contains("node-z"), "{msg}");
    }

    #[test]
    fn unit_mismatch_is_flagged() {
        let pd = descriptor_from_text("node-z: [10, 20, 30]\n", "pd").unwrap();
        let (model, _) = build_model(&pd).unwrap();
        let scaled = PointCloud::new(vec![Vec3::new(0.0, 0.0, 3000.0)]);
        assert!(unit_warning(&model, &scaled, LengthUnit::M).is_some());
        let fine = PointCloud::new(vec![Vec3::new(0.0, 0.0, 30.0)]);
        assert!(unit_warning(&model, &fine, LengthUnit::M).is_none());
    }
}
