use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{build_snowflake, SnowflakeSpec};
use super::{half_disks, rectangle, regular_polygon, unit_square, Point2, Polygon};
use crate::error::{Error, Result};

/// Named domain constructors, as written in configuration files and on the
/// command line:
///
/// - `disk:<r>[:<sides>]` regular 256-gon (or `sides`-gon) about the origin
/// - `square` the unit square `[0,1]²`; `square:<s>` side `s` about the origin
/// - `rect:<x0>:<y0>:<x1>:<y1>`
/// - `snowflake:<eta>:<depth>[:<side>]` about the origin
/// - `halfdisk:upper:<r>` / `halfdisk:lower:<r>` (128 arc segments)
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ShapeSpec {
    Disk { radius: f64, sides: usize },
    UnitSquare,
    Square { side: f64 },
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    Snowflake(SnowflakeSpec),
    HalfDisk { upper: bool, radius: f64 },
}

pub const DISK_SIDES: usize = 256;
pub const HALF_DISK_ARC: usize = 128;

impl ShapeSpec {
    pub fn build(&self) -> Result<Polygon> {
        match *self {
            ShapeSpec::Disk { radius, sides } => regular_polygon(sides, radius, Point2::default()),
            ShapeSpec::UnitSquare => Ok(unit_square()),
            ShapeSpec::Square { side } => {
                let h = side / 2.0;
                rectangle(-h, -h, h, h)
            }
            ShapeSpec::Rect { x0, y0, x1, y1 } => rectangle(x0, y0, x1, y1),
            ShapeSpec::Snowflake(s) => build_snowflake(&s),
            ShapeSpec::HalfDisk { upper, radius } => {
                let (u, l) = half_disks(radius, HALF_DISK_ARC)?;
                Ok(if upper { u } else { l })
            }
        }
    }

    /// Dimension of the limiting boundary, if the shape approximates a
    /// snowflake.
    pub fn snowflake(&self) -> Option<SnowflakeSpec> {
        match self {
            ShapeSpec::Snowflake(s) => Some(*s),
            _ => None,
        }
    }
}

impl fmt::Display for ShapeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeSpec::Disk { radius, sides } => {
                if *sides == DISK_SIDES {
                    write!(f, "disk:{radius}")
                } else {
                    write!(f, "disk:{radius}:{sides}")
                }
            }
            ShapeSpec::UnitSquare => write!(f, "square"),
            ShapeSpec::Square { side } => write!(f, "square:{side}"),
            ShapeSpec::Rect { x0, y0, x1, y1 } => write!(f, "rect:{x0}:{y0}:{x1}:{y1}"),
            ShapeSpec::Snowflake(s) => {
                if s.side == 1.0 {
                    write!(f, "snowflake:{}:{}", s.eta, s.depth)
                } else {
                    write!(f, "snowflake:{}:{}:{}", s.eta, s.depth, s.side)
                }
            }
            ShapeSpec::HalfDisk { upper, radius } => {
                write!(f, "halfdisk:{}:{radius}", if *upper { "upper" } else { "lower" })
            }
        }
    }
}

fn num(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::invalid(format!("bad number `{s}` in shape")))
}

impl FromStr for ShapeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::invalid(format!("unrecognized shape `{s}`"));
        match parts.as_slice() {
            ["disk", r] => Ok(ShapeSpec::Disk {
                radius: num(r)?,
                sides: DISK_SIDES,
            }),
            ["disk", r, n] => Ok(ShapeSpec::Disk {
                radius: num(r)?,
                sides: n.parse().map_err(|_| bad())?,
            }),
            ["square"] => Ok(ShapeSpec::UnitSquare),
            ["square", side] => Ok(ShapeSpec::Square { side: num(side)? }),
            ["rect", a, b, c, d] => Ok(ShapeSpec::Rect {
                x0: num(a)?,
                y0: num(b)?,
                x1: num(c)?,
                y1: num(d)?,
            }),
            ["snowflake", eta, depth] => Ok(ShapeSpec::Snowflake(SnowflakeSpec::new(
                num(eta)?,
                depth.parse().map_err(|_| bad())?,
            ))),
            ["snowflake", eta, depth, side] => Ok(ShapeSpec::Snowflake(
                SnowflakeSpec::new(num(eta)?, depth.parse().map_err(|_| bad())?).with_side(num(side)?),
            )),
            ["halfdisk", which, r] => Ok(ShapeSpec::HalfDisk {
                upper: match *which {
                    "upper" => true,
                    "lower" => false,
                    _ => return Err(bad()),
                },
                radius: num(r)?,
            }),
            _ => Err(bad()),
        }
    }
}

impl From<ShapeSpec> for String {
    fn from(s: ShapeSpec) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for ShapeSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}
