//! One-factor-at-a-time loss sweeps.
//!
//! A sweep fixes a target box, perturbs a prediction along a single factor
//! (joint scale, rotation, center shift along +x, aspect ratio at fixed
//! area) and records each requested loss per grid point.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{skew_iou, ObbCenterWHAngle};
use crate::loss::{ln_norm_boundary_min, ln_norm_loss, mdl, mdl_boundary_min, CovarianceSource, NormKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepFactor {
    Scale,
    Angle,
    CenterShift,
    AspectRatio,
}

impl FromStr for SweepFactor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scale" => Ok(Self::Scale),
            "angle" => Ok(Self::Angle),
            "shift" | "center-shift" | "centershift" => Ok(Self::CenterShift),
            "aspect" | "aspect-ratio" | "aspectratio" => Ok(Self::AspectRatio),
            other => Err(Error::invalid(format!("unknown sweep factor '{other}'"))),
        }
    }
}

/// Loss columns. Declaration order is the CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SweepLoss {
    MdlT,
    MdlP,
    L1,
    L2,
    SmoothL1,
    OneMinusSkewIoU,
}

impl SweepLoss {
    pub const ALL: [SweepLoss; 6] = [
        SweepLoss::MdlT,
        SweepLoss::MdlP,
        SweepLoss::L1,
        SweepLoss::L2,
        SweepLoss::SmoothL1,
        SweepLoss::OneMinusSkewIoU,
    ];

    pub fn column_name(self) -> &'static str {
        match self {
            SweepLoss::MdlT => "mdl_t",
            SweepLoss::MdlP => "mdl_p",
            SweepLoss::L1 => "l1",
            SweepLoss::L2 => "l2",
            SweepLoss::SmoothL1 => "smooth_l1",
            SweepLoss::OneMinusSkewIoU => "one_minus_skew_iou",
        }
    }
}

impl fmt::Display for SweepLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column_name())
    }
}

impl FromStr for SweepLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "mdlt" => Ok(Self::MdlT),
            "mdlp" => Ok(Self::MdlP),
            "l1" => Ok(Self::L1),
            "l2" => Ok(Self::L2),
            "smoothl1" => Ok(Self::SmoothL1),
            "oneminusskewiou" | "1skewiou" | "skewiou" | "iou" => Ok(Self::OneMinusSkewIoU),
            _ => Err(Error::invalid(format!("unknown loss '{s}'"))),
        }
    }
}

/// Parses a comma-separated loss list such as `mdlt,l1,smooth_l1`.
pub fn parse_loss_list(s: &str) -> Result<BTreeSet<SweepLoss>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(SweepLoss::from_str)
        .collect()
}

/// Fixed perturbation applied to the prediction before the swept factor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoxDelta {
    pub dcx: f64,
    pub dcy: f64,
    pub dw: f64,
    pub dh: f64,
    pub dtheta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub factor: SweepFactor,
    pub base_box: ObbCenterWHAngle,
    #[serde(default)]
    pub pred_offset: BoxDelta,
    pub range: (f64, f64),
    pub steps: usize,
    pub losses: BTreeSet<SweepLoss>,
    #[serde(default)]
    pub boundary_min: bool,
}

impl SweepSpec {
    pub fn default_base() -> ObbCenterWHAngle {
        ObbCenterWHAngle {
            cx: 0.0,
            cy: 0.0,
            w: 4.0,
            h: 2.0,
            theta: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base_box.validate()?;
        let (lo, hi) = self.range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("sweep range needs lo < hi, got [{lo}, {hi}]")));
        }
        if self.steps < 2 {
            return Err(Error::invalid(format!(
                "sweep needs at least 2 steps, got {}",
                self.steps
            )));
        }
        if self.losses.is_empty() {
            return Err(Error::invalid("sweep needs at least one loss"));
        }
        let d = &self.pred_offset;
        if ![d.dcx, d.dcy, d.dw, d.dh, d.dtheta].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("prediction offset must be finite"));
        }
        Ok(())
    }

    /// Evenly spaced grid from `lo` to `hi` inclusive.
    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = self.range;
        let n = self.steps - 1;
        (0..self.steps)
            .map(|k| {
                if k == n {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / n as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub factor_value: f64,
    /// One entry per requested loss; NaN in every column when `error` is set.
    pub loss_values: BTreeMap<SweepLoss, f64>,
    pub error: Option<String>,
}

/// Target and prediction boxes for one grid value.
pub fn perturb(spec: &SweepSpec, v: f64) -> (ObbCenterWHAngle, ObbCenterWHAngle) {
    let base = spec.base_box;
    let d = spec.pred_offset;
    let mut pred = ObbCenterWHAngle {
        cx: base.cx + d.dcx,
        cy: base.cy + d.dcy,
        w: base.w + d.dw,
        h: base.h + d.dh,
        theta: base.theta + d.dtheta,
    };
    let mut target = base;
    match spec.factor {
        SweepFactor::Scale => {
            for b in [&mut target, &mut pred] {
                b.cx *= v;
                b.cy *= v;
                b.w *= v;
                b.h *= v;
            }
        }
        SweepFactor::Angle => pred.theta += v,
        SweepFactor::CenterShift => pred.cx += v,
        SweepFactor::AspectRatio => {
            let area = pred.w * pred.h;
            pred.w = (area * v).sqrt();
            pred.h = (area / v).sqrt();
        }
    }
    (target, pred)
}

fn evaluate(spec: &SweepSpec, v: f64) -> Result<BTreeMap<SweepLoss, f64>> {
    let (target, pred) = perturb(spec, v);
    for b in [&target, &pred] {
        if !(b.w > 0.0 && b.h > 0.0) {
            return Err(Error::invalid(format!("zero-area box at factor value {v}")));
        }
    }
    let (t, p) = (target.to_vertices()?, pred.to_vertices()?);
    let min = spec.boundary_min;
    let mdl_value = |src| {
        if min {
            mdl_boundary_min(&p, &t, src)
        } else {
            mdl(&p, &t, src)
        }
    };
    let norm = |k| {
        if min {
            ln_norm_boundary_min(&p, &t, k)
        } else {
            ln_norm_loss(&p, &t, k)
        }
    };
    let mut out = BTreeMap::new();
    for &loss in &spec.losses {
        let value = match loss {
            SweepLoss::MdlT => mdl_value(CovarianceSource::FromTarget)?,
            SweepLoss::MdlP => mdl_value(CovarianceSource::FromPrediction)?,
            SweepLoss::L1 => norm(NormKind::L1),
            SweepLoss::L2 => norm(NormKind::L2),
            SweepLoss::SmoothL1 => norm(NormKind::SmoothL1),
            SweepLoss::OneMinusSkewIoU => 1.0 - skew_iou(&p, &t)?,
        };
        out.insert(loss, value);
    }
    Ok(out)
}

/// Evaluates every grid point. A degenerate perturbation yields a sentinel
/// row (all NaN, `error` set) instead of aborting the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    Ok(spec
        .grid()
        .into_iter()
        .map(|v| match evaluate(spec, v) {
            Ok(loss_values) => SweepRow {
                factor_value: v,
                loss_values,
                error: None,
            },
            Err(e) => SweepRow {
                factor_value: v,
                loss_values: spec.losses.iter().map(|&l| (l, f64::NAN)).collect(),
                error: Some(e.to_string()),
            },
        })
        .collect())
}

/// `%.9g`-style formatting: nine significant digits, trailing zeros trimmed.
pub fn format_sig9(v: f64) -> String {
    if v.is_nan() {
        return "NaN".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let fixed = format!("{:.*}", (8 - exp) as usize, v);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let first = rows.first().ok_or_else(|| Error::invalid("no rows to write"))?;
    let columns: Vec<SweepLoss> = first.loss_values.keys().copied().collect();
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    let mut header = vec!["factor".to_string()];
    header.extend(columns.iter().map(|c| c.column_name().to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        let mut rec = vec![format_sig9(row.factor_value)];
        for c in &columns {
            let v = row
                .loss_values
                .get(c)
                .ok_or_else(|| Error::invalid(format!("row is missing column {c}")))?;
            rec.push(format_sig9(*v));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(rows, std::io::BufWriter::new(file))
}

/// Parsed CSV: column names (without `factor`) and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<(f64, Vec<f64>)>,
}

impl SweepTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|(_, v)| v[i]).collect())
    }
}

pub fn read_csv(path: &Path) -> Result<SweepTable> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let header = r.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    if header.get(0) != Some("factor") {
        return Err(Error::Parse {
            line: 1,
            message: "first column must be 'factor'".into(),
        });
    }
    let columns = header.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
        let nums = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 2,
                    message: format!("not a number: '{s}'"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((nums[0], nums[1..].to_vec()));
    }
    Ok(SweepTable { columns, rows })
}
