use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{DateTime, Duration, SecondsFormat, Utc};
use phyllo::io::{read_smesh, read_stl, stl_bytes, write_smesh, CloudFormat, LengthUnit, StlMode};
use phyllo::{resolve_parameters, seed_template, surface_census, Family};
use serde::{Deserialize, Serialize};

use crate::pipeline::{self, FitOptions, UsageError};

pub struct GenerateArgs {
    pub descriptor: PathBuf,
    pub stl: Option<PathBuf>,
    pub smesh: Option<PathBuf>,
    pub stl_mode: StlMode,
    pub sample_u: usize,
    pub sample_v: usize,
    pub out_dir: PathBuf,
}

fn output_stem(pd_outfile: Option<&str>, descriptor: &Path) -> String {
    pd_outfile
        .and_then(|f| Path::new(f).file_stem())
        .or_else(|| descriptor.file_stem())
        .map_or_else(|| "plant".to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let pd = pipeline::load_descriptor(&args.descriptor)?;
    let (model, warnings) = pipeline::build_model(&pd)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let (mesh, _) = model.tessellate(args.sample_u, args.sample_v).context("tessellation failed")?;

    let stem = output_stem(pd.outfile.as_deref(), &args.descriptor);
    let stl_path = pipeline::output_path(args.stl, &args.out_dir, &format!("{stem}.stl"));
    let smesh_path = pipeline::output_path(args.smesh, &args.out_dir, &format!("{stem}.smesh"));
    let stl = stl_bytes(&mesh, args.stl_mode, &stem);
    let smesh = write_smesh(&model);

    // Refuse to report success for files our own readers reject.
    read_stl(&stl).context("generated STL does not parse")?;
    read_smesh(&smesh).context("generated SMESH does not parse")?;
    pipeline::write_output(&stl_path, &stl)?;
    pipeline::write_output(&smesh_path, smesh.as_bytes())?;

    let census = surface_census(&model.organs);
    println!("descriptor: {} ({})", args.descriptor.display(), pd.family.as_str());
    println!("fingerprint: {}", model.fingerprint);
    println!("census: {census}");
    for organ in &model.organs {
        let (rows, cols) = organ.surface.grid_size();
        println!("  {:<34} {:<9} {rows}x{cols}", organ.path, organ.kind.as_str());
    }
    println!("triangles: {} ({} degenerate)", mesh.triangles.len(), mesh.degenerate);
    if let Some((lo, hi)) = model.bounding_box() {
        let size = hi - lo;
        println!(
            "bounding box (cm): min ({:.2}, {:.2}, {:.2}) max ({:.2}, {:.2}, {:.2}) size {:.2} x {:.2} x {:.2}",
            lo.x, lo.y, lo.z, hi.x, hi.y, hi.z, size.x, size.y, size.z
        );
    }
    println!("wrote {} ({} bytes)", stl_path.display(), stl.len());
    println!("wrote {} ({} bytes)", smesh_path.display(), smesh.len());
    Ok(())
}

pub struct SeedArgs {
    pub node_z: Vec<f64>,
    pub leaves: usize,
    pub family: Family,
    pub out: Option<PathBuf>,
    pub out_dir: PathBuf,
}

pub fn seed(args: SeedArgs) -> Result<()> {
    if args.leaves > args.node_z.len() {
        return Err(UsageError(format!(
            "{} leaves requested but only {} node heights given",
            args.leaves,
            args.node_z.len()
        ))
        .into());
    }
    let raw = seed_template(&args.node_z, args.leaves, args.family).map_err(|e| UsageError(e.to_string()))?;
    resolve_parameters(&raw).map_err(|e| UsageError(format!("node heights rejected: {e}")))?;
    let path = pipeline::output_path(args.out, &args.out_dir, &format!("{}_template.yaml", args.family.as_str()));
    pipeline::write_output(&path, raw.to_yaml()?.as_bytes())?;
    println!(
        "wrote {} ({} nodes, {} leaves, {})",
        path.display(),
        args.node_z.len(),
        args.leaves,
        args.family.as_str()
    );
    Ok(())
}

pub struct FitArgs {
    pub descriptor: PathBuf,
    pub cloud: PathBuf,
    pub format: Option<CloudFormat>,
    pub unit: LengthUnit,
    pub fit: FitOptions,
    pub history: Option<PathBuf>,
    pub out_dir: PathBuf,
}

/// One line of the fit history file.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct HistoryRecord {
    pub timestamp: DateTime<Utc>,
    pub descriptor: String,
    pub pd_hash: String,
    pub cloud: String,
    pub samples: usize,
    pub cd_m: f64,
    pub forward_m: f64,
    pub backward_m: f64,
}

fn last_timestamp(path: &Path) -> Option<DateTime<Utc>> {
    let file = std::fs::File::open(path).ok()?;
    let last = BufReader::new(file).lines().map_while(Result::ok).filter(|l| !l.trim().is_empty()).last()?;
    serde_json::from_str::<HistoryRecord>(&last).ok().map(|r| r.timestamp)
}

/// Append `record`, nudging its timestamp past the previous entry so the
/// history stays strictly ordered even if the clock steps back.
pub fn append_history(path: &Path, mut record: HistoryRecord) -> Result<HistoryRecord> {
    if let Some(prev) = last_timestamp(path) {
        if record.timestamp <= prev {
            record.timestamp = prev + Duration::microseconds(1);
        }
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    writeln!(file, "{}", serde_json::to_string(&record)?)?;
    Ok(record)
}

pub fn fit_report(args: FitArgs) -> Result<()> {
    let pd = pipeline::load_descriptor(&args.descriptor)?;
    let cloud = pipeline::load_cloud(&args.cloud, args.format, args.unit)?;
    let (model, _) = pipeline::build_model(&pd)?;
    if let Some(w) = pipeline::unit_warning(&model, &cloud, args.unit) {
        eprintln!("warning: {w}");
    }
    let report = pipeline::fit(&pd, &model, &cloud, args.fit)?;
    println!("chamfer distance: {:.6} m", report.cd);
    println!("  model -> cloud: {:.6} m ({} samples)", report.forward, report.count_a);
    println!("  cloud -> model: {:.6} m ({} points)", report.backward, report.count_b);

    let history = pipeline::output_path(args.history, &args.out_dir, "fit_history.jsonl");
    let record = append_history(
        &history,
        HistoryRecord {
            timestamp: Utc::now(),
            descriptor: args.descriptor.display().to_string(),
            pd_hash: model.fingerprint.clone(),
            cloud: args.cloud.display().to_string(),
            samples: report.count_a,
            cd_m: report.cd,
            forward_m: report.forward,
            backward_m: report.backward,
        },
    )?;
    println!(
        "history: {} ({})",
        history.display(),
        record.timestamp.to_rfc3339_opts(SecondsFormat::Micros, true)
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(ts: DateTime<Utc>) -> HistoryRecord {
        HistoryRecord {
            timestamp: ts,
            descriptor: "pd.yaml".into(),
            pd_hash: "ab".into(),
            cloud: "c.xyz".into(),
            samples: 10,
            cd_m: 0.5,
            forward_m: 0.4,
            backward_m: 0.6,
        }
    }

    #[test]
    fn history_timestamps_never_go_backwards() {
        let dir = std::env::temp_dir().join(format!("phyllo-history-{}", std::process::id()));
        let path = dir.join("h.jsonl");
        let _ = std::fs::remove_file(&path);
        let now = Utc::now();
        let a = append_history(&path, record(now)).unwrap();
        let b = append_history(&path, record(now - Duration::seconds(5))).unwrap();
        assert!(b.timestamp > a.timestamp);
        let lines: Vec<HistoryRecord> = std::fs::read_to_string(&path)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines, vec![a, b]);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn output_stem_prefers_descriptor_outfile() {
        assert_eq!(output_stem(Some("out/cml238.stl"), Path::new("x/pd.yaml")), "cml238");
        assert_eq!(output_stem(None, Path::new("x/pd.yaml")), "pd");
    }
}
