//! Evaluating directories of predicted masks against ground truth.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use sonarwreck_core::eval::{aggregate_by_site, confusion, EvalReport, ImageCounts};

use crate::dataset::Record;
use crate::io;

/// Site lookup keyed by sample id and by the file names of its image and mask.
pub fn site_index(records: &[Record]) -> HashMap<String, Option<String>> {
    let mut map = HashMap::new();
    for r in records {
        for key in [&r.id, &r.image, &r.mask] {
            let name = Path::new(key).file_name().map_or(key.clone(), |n| n.to_string_lossy().into_owned());
            map.insert(name, r.site.clone());
        }
    }
    map
}

/// Pair every PNG in `gt_dir` with the same file name in `pred_dir`.
///
/// Sites come from `sites` (file name or file stem); images it does not tag
/// fall back to `default_site`.
pub fn evaluate_dirs(
    pred_dir: &Path,
    gt_dir: &Path,
    sites: Option<&HashMap<String, Option<String>>>,
    default_site: Option<&str>,
) -> Result<EvalReport> {
    let gts = io::list_files(gt_dir, "png")?;
    if gts.is_empty() {
        bail!("no ground-truth masks in {}", gt_dir.display());
    }
    let images: Vec<ImageCounts> = gts
        .par_iter()
        .map(|gt_path| -> Result<ImageCounts> {
            let name = gt_path.file_name().unwrap().to_string_lossy().into_owned();
            let stem = gt_path.file_stem().unwrap().to_string_lossy().into_owned();
            let pred_path = pred_dir.join(&name);
            let gt = io::read_mask(gt_path)?;
            let pred = io::read_mask(&pred_path).with_context(|| format!("prediction for {name}"))?;
            let counts = confusion(&pred, &gt).with_context(|| name.clone())?;
            let tagged = sites.and_then(|m| m.get(&name).or_else(|| m.get(&stem))).cloned().flatten();
            Ok(ImageCounts {
                id: name,
                site: tagged.or_else(|| default_site.map(String::from)),
                counts,
            })
        })
        .collect::<Result<_>>()?;
    Ok(aggregate_by_site(&images)?)
}
