use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ObbVertices, Point2};

/// The fifteen DOTA-v1.0 categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DotaCategory {
    Plane,
    Ship,
    StorageTank,
    BaseballDiamond,
    TennisCourt,
    BasketballCourt,
    GroundTrackField,
    Harbor,
    Bridge,
    LargeVehicle,
    SmallVehicle,
    Helicopter,
    Roundabout,
    SoccerBallField,
    SwimmingPool,
}

impl DotaCategory {
    pub const ALL: [DotaCategory; 15] = [
        DotaCategory::Plane,
        DotaCategory::Ship,
        DotaCategory::StorageTank,
        DotaCategory::BaseballDiamond,
        DotaCategory::TennisCourt,
        DotaCategory::BasketballCourt,
        DotaCategory::GroundTrackField,
        DotaCategory::Harbor,
        DotaCategory::Bridge,
        DotaCategory::LargeVehicle,
        DotaCategory::SmallVehicle,
        DotaCategory::Helicopter,
        DotaCategory::Roundabout,
        DotaCategory::SoccerBallField,
        DotaCategory::SwimmingPool,
    ];

    /// Name as written in DOTA annotation and submission files.
    pub fn name(self) -> &'static str {
        match self {
            DotaCategory::Plane => "plane",
            DotaCategory::Ship => "ship",
            DotaCategory::StorageTank => "storage-tank",
            DotaCategory::BaseballDiamond => "baseball-diamond",
            DotaCategory::TennisCourt => "tennis-court",
            DotaCategory::BasketballCourt => "basketball-court",
            DotaCategory::GroundTrackField => "ground-track-field",
            DotaCategory::Harbor => "harbor",
            DotaCategory::Bridge => "bridge",
            DotaCategory::LargeVehicle => "large-vehicle",
            DotaCategory::SmallVehicle => "small-vehicle",
            DotaCategory::Helicopter => "helicopter",
            DotaCategory::Roundabout => "roundabout",
            DotaCategory::SoccerBallField => "soccer-ball-field",
            DotaCategory::SwimmingPool => "swimming-pool",
        }
    }

    pub fn abbreviation(self) -> &'static str {
        match self {
            DotaCategory::Plane => "PL",
            DotaCategory::Ship => "SH",
            DotaCategory::StorageTank => "ST",
            DotaCategory::BaseballDiamond => "BD",
            DotaCategory::TennisCourt => "TC",
            DotaCategory::BasketballCourt => "BC",
            DotaCategory::GroundTrackField => "GTF",
            DotaCategory::Harbor => "HB",
            DotaCategory::Bridge => "BR",
            DotaCategory::LargeVehicle => "LV",
            DotaCategory::SmallVehicle => "SV",
            DotaCategory::Helicopter => "HC",
            DotaCategory::Roundabout => "RA",
            DotaCategory::SoccerBallField => "SBF",
            DotaCategory::SwimmingPool => "SP",
        }
    }

    /// Position in [`DotaCategory::ALL`]; used as the detection class id.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for DotaCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DotaCategory {
    type Err = Error;

    /// Accepts the file name (`storage-tank`) or the abbreviation (`ST`).
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s || c.abbreviation().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown DOTA category '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DotaInstance {
    pub bbox: ObbVertices,
    pub category: DotaCategory,
    pub difficult: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DotaAnnotation {
    pub image_id: String,
    pub instances: Vec<DotaInstance>,
}

fn parse_f64(tok: &str, line: usize, what: &str) -> Result<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            message: format!("{what} is not a finite number: '{tok}'"),
        }),
    }
}

fn parse_quad(toks: &[&str], line: usize) -> Result<ObbVertices> {
    let mut v = [0.0; 8];
    for (i, t) in toks.iter().enumerate() {
        v[i] = parse_f64(t, line, &format!("coordinate {}", i + 1))?;
    }
    ObbVertices::from_points([
        Point2::new(v[0], v[1]),
        Point2::new(v[2], v[3]),
        Point2::new(v[4], v[5]),
        Point2::new(v[6], v[7]),
    ])
    .map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })
}

/// Parses a DOTA-v1.0 label file: optional `imagesource:` / `gsd:` header
/// lines, then `x1 y1 x2 y2 x3 y3 x4 y4 category difficult` per instance.
/// A missing difficult flag reads as 0.
pub fn parse_annotation(image_id: &str, text: &str) -> Result<DotaAnnotation> {
    let mut instances = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with("imagesource:") || l.starts_with("gsd:") {
            continue;
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 9 && toks.len() != 10 {
            return Err(Error::Parse {
                line,
                message: format!("expected 9 or 10 fields, found {}", toks.len()),
            });
        }
        let bbox = parse_quad(&toks[..8], line)?;
        let category = toks[8].parse::<DotaCategory>().map_err(|_| Error::Parse {
            line,
            message: format!("unknown category '{}'", toks[8]),
        })?;
        let difficult = match toks.get(9).copied() {
            None | Some("0") => false,
            Some("1") => true,
            Some(other) => {
                return Err(Error::Parse {
                    line,
                    message: format!("difficult flag must be 0 or 1, found '{other}'"),
                })
            }
        };
        instances.push(DotaInstance {
            bbox,
            category,
            difficult,
        });
    }
    Ok(DotaAnnotation {
        image_id: image_id.to_string(),
        instances,
    })
}

/// Parses one Task-1 submission line: `image_id score x1 y1 ... x4 y4`.
pub fn parse_submission_line(text: &str, line: usize) -> Result<(String, f64, ObbVertices)> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    if toks.len() != 10 {
        return Err(Error::Parse {
            line,
            message: format!("expected 10 fields, found {}", toks.len()),
        });
    }
    let score = parse_f64(toks[1], line, "score")?;
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::Parse {
            line,
            message: format!("score {score} outside [0, 1]"),
        });
    }
    Ok((toks[0].to_string(), score, parse_quad(&toks[2..], line)?))
}
