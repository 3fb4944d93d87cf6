//! Per-class IOU, mIOU and shipwreck F1, pooled per site then macro-averaged.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;
use core::ops::{Add, AddAssign};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::LabelMask;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("prediction is {pred:?}, ground truth is {gt:?}")]
    ShapeMismatch { pred: (usize, usize), gt: (usize, usize) },
    #[error("{which} mask has value {value} at ({u}, {v})")]
    NonBinary {
        which: &'static str,
        u: usize,
        v: usize,
        value: u8,
    },
    #[error("image {0} has no site id")]
    MissingSite(String),
}

/// Pixel counts with shipwreck as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Counts with prediction and ground truth exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            fp: self.fn_,
            fn_: self.fp,
            ..*self
        }
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl core::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

fn check_binary(mask: &LabelMask, which: &'static str) -> Result<(), EvalError> {
    match mask.iter_indexed().find(|(_, _, &x)| x > 1) {
        Some((u, v, &value)) => Err(EvalError::NonBinary { which, u, v, value }),
        None => Ok(()),
    }
}

pub fn confusion(pred: &LabelMask, gt: &LabelMask) -> Result<ConfusionCounts, EvalError> {
    if !pred.same_shape(gt) {
        return Err(EvalError::ShapeMismatch {
            pred: pred.dims(),
            gt: gt.dims(),
        });
    }
    check_binary(pred, "prediction")?;
    check_binary(gt, "ground truth")?;
    // Index 2·gt + pred into a 4-bin histogram.
    let mut hist = [0u64; 4];
    for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
        hist[(2 * g + p) as usize] += 1;
    }
    Ok(ConfusionCounts {
        tn: hist[0],
        fp: hist[1],
        fn_: hist[2],
        tp: hist[3],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub iou_ship: f64,
    pub iou_terr: f64,
    pub miou: f64,
    pub f1: f64,
}

/// `num / den`, with 0/0 read as a perfect score (class absent everywhere).
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    let iou_ship = ratio(c.tp, c.tp + c.fp + c.fn_);
    let iou_terr = ratio(c.tn, c.tn + c.fp + c.fn_);
    Metrics {
        iou_ship,
        iou_terr,
        miou: (iou_ship + iou_terr) / 2.0,
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteResult {
    pub site: String,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Sorted by site id.
    pub sites: Vec<SiteResult>,
    /// Unweighted mean over sites; `None` when there are no sites.
    pub macro_avg: Option<Metrics>,
}

impl EvalReport {
    pub fn site_count(&self) -> usize {
        self.sites.len()
    }
}

/// One evaluated image: identifier, optional site tag and its counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageCounts {
    pub id: String,
    pub site: Option<String>,
    pub counts: ConfusionCounts,
}

/// Pool counts within each site, compute metrics per site, then average sites equally.
pub fn aggregate_by_site(images: &[ImageCounts]) -> Result<EvalReport, EvalError> {
    let mut pooled: BTreeMap<&str, ConfusionCounts> = BTreeMap::new();
    for img in images {
        let site = img.site.as_deref().ok_or_else(|| EvalError::MissingSite(img.id.clone()))?;
        *pooled.entry(site).or_default() += img.counts;
    }
    let sites: Vec<SiteResult> = pooled
        .into_iter()
        .map(|(site, counts)| SiteResult {
            site: site.into(),
            counts,
            metrics: metrics(&counts),
        })
        .collect();
    let macro_avg = (!sites.is_empty()).then(|| {
        let n = sites.len() as f64;
        let mean = |f: fn(&Metrics) -> f64| sites.iter().map(|s| f(&s.metrics)).sum::<f64>() / n;
        Metrics {
            iou_ship: mean(|m| m.iou_ship),
            iou_terr: mean(|m| m.iou_terr),
            miou: mean(|m| m.miou),
            f1: mean(|m| m.f1),
        }
    });
    Ok(EvalReport { sites, macro_avg })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

pub const MACRO_ROW: &str = "macro";
const COLUMNS: [&str; 4] = ["IOU_ship", "IOU_terr", "mIOU", "F1"];

fn values(m: &Metrics) -> [f64; 4] {
    [m.iou_ship, m.iou_terr, m.miou, m.f1]
}

/// Render a report as CSV (full precision) or a markdown table (2 decimals).
pub fn emit_report(report: &EvalReport, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            let _ = writeln!(out, "site,{}", COLUMNS.join(","));
            for s in &report.sites {
                let v = values(&s.metrics);
                let _ = writeln!(out, "{},{:?},{:?},{:?},{:?}", csv_field(&s.site), v[0], v[1], v[2], v[3]);
            }
            match &report.macro_avg {
                Some(m) => {
                    let v = values(m);
                    let _ = writeln!(out, "{MACRO_ROW},{:?},{:?},{:?},{:?}", v[0], v[1], v[2], v[3]);
                }
                None => {
                    let _ = writeln!(out, "{MACRO_ROW},n/a,n/a,n/a,n/a");
                }
            }
        }
        ReportFormat::Markdown => {
            let _ = writeln!(out, "| site | {} |", COLUMNS.join(" | "));
            let _ = writeln!(out, "|---|---|---|---|---|");
            for s in &report.sites {
                let _ = writeln!(out, "| {} | {} |", s.site.replace('|', "\\|"), markdown_cells(&s.metrics));
            }
            match &report.macro_avg {
                Some(m) => {
                    let _ = writeln!(out, "| {MACRO_ROW} | {} |", markdown_cells(m));
                }
                None => {
                    let _ = writeln!(out, "| {MACRO_ROW} | n/a | n/a | n/a | n/a |");
                }
            }
        }
    }
    out
}

fn markdown_cells(m: &Metrics) -> String {
    let v = values(m);
    format!("{:.2} | {:.2} | {:.2} | {:.2}", v[0], v[1], v[2], v[3])
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.into()
    }
}
