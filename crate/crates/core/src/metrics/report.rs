use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ms_ssim, psnr, ssim, MetricError, SsimSettings, SsimWindow};
use crate::imagecore::load_srgb;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
    /// `None` when the pair is below the multi-scale minimum size.
    pub msssim: Option<f64>,
    /// Reserved for externally computed perceptual scores.
    pub lpips: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMeans {
    pub count: usize,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub msssim: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ssim_window: SsimWindow,
    pub records: Vec<EvalRecord>,
    pub means: EvalMeans,
    /// File names present in only one of the two directories.
    pub unmatched: Vec<String>,
}

fn image_names(dir: &Path) -> Result<BTreeSet<String>, MetricError> {
    let entries = std::fs::read_dir(dir).map_err(|e| MetricError::Io(format!("{}: {e}", dir.display())))?;
    let mut names = BTreeSet::new();
    for entry in entries {
        let entry = entry.map_err(|e| MetricError::Io(format!("{}: {e}", dir.display())))?;
        let path = entry.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) {
            if let Some(n) = path.file_name().and_then(|n| n.to_str()) {
                names.insert(n.to_string());
            }
        }
    }
    Ok(names)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Scores every image in `pred_dir` against the same-named image in
/// `gt_dir`. Records are sorted by name.
pub fn evaluate_dirs(pred_dir: &Path, gt_dir: &Path, settings: &SsimSettings) -> Result<EvalReport, MetricError> {
    let pred = image_names(pred_dir)?;
    let gt = image_names(gt_dir)?;
    let paired: Vec<&String> = pred.intersection(&gt).collect();
    let unmatched = pred.symmetric_difference(&gt).cloned().collect();

    let records = paired
        .par_iter()
        .map(|name| {
            let a = load_srgb(pred_dir.join(name))?;
            let b = load_srgb(gt_dir.join(name))?;
            let msssim = match ms_ssim(&a, &b) {
                Ok(v) => Some(v),
                Err(MetricError::TooSmall { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(EvalRecord {
                name: (*name).clone(),
                psnr: psnr(&a, &b)?,
                ssim: ssim(&a, &b, settings)?,
                msssim,
                lpips: None,
            })
        })
        .collect::<Result<Vec<_>, MetricError>>()?;

    let means = EvalMeans {
        count: records.len(),
        psnr: mean(records.iter().map(|r| r.psnr)),
        ssim: mean(records.iter().map(|r| r.ssim)),
        msssim: mean(records.iter().filter_map(|r| r.msssim)),
    };
    Ok(EvalReport { ssim_window: settings.window, records, means, unmatched })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::{save_png, SrgbImage};

    #[test]
    fn self_comparison_report() {
        let dir = tempfile::tempdir().unwrap();
        let img = SrgbImage::new(12, 10, (0..360).map(|i| (i * 7 % 256) as u8).collect()).unwrap();
        save_png(&img, dir.path().join("a.png")).unwrap();
        save_png(&SrgbImage::filled(12, 10, [9, 80, 200]), dir.path().join("b.png")).unwrap();
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let report = evaluate_dirs(dir.path(), dir.path(), &SsimSettings::default()).unwrap();
        assert_eq!(report.records.len(), 2);
        assert_eq!(report.records[0].name, "a.png");
        for r in &report.records {
            assert_eq!(r.psnr, 100.0);
            assert_eq!(r.ssim, 1.0);
            assert_eq!(r.msssim, None);
        }
        assert_eq!(report.means.psnr, Some(100.0));
        assert!(report.unmatched.is_empty());
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["ssim_window"], "uniform7");
        assert!(json["records"][0]["lpips"].is_null());
    }

    #[test]
    fn unmatched_names_listed() {
        let p = tempfile::tempdir().unwrap();
        let g = tempfile::tempdir().unwrap();
        save_png(&SrgbImage::filled(8, 8, [1; 3]), p.path().join("x.png")).unwrap();
        save_png(&SrgbImage::filled(8, 8, [1; 3]), g.path().join("y.png")).unwrap();
        let report = evaluate_dirs(p.path(), g.path(), &SsimSettings::default()).unwrap();
        assert!(report.records.is_empty());
        assert_eq!(report.means.psnr, None);
        assert_eq!(report.unmatched, vec!["x.png".to_string(), "y.png".to_string()]);
    }
}
