//! Polygon import and export as CSV vertex lists and SVG paths.

use std::fmt::Write as _;
use std::io::{Read, Write};

use super::{Point2, Polygon};
use crate::error::{Error, Result};

/// Writes `x,y` rows with a header.
pub fn write_csv<W: Write>(poly: &Polygon, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["x", "y"])?;
    for v in poly.vertices() {
        wr.write_record([format!("{}", v.x), format!("{}", v.y)])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Polygon> {
    let mut rd = csv::Reader::from_reader(r);
    let mut v = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::invalid("vertex row needs x and y"));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad coordinate `{s}`")))
        };
        v.push(Point2::new(parse(&rec[0])?, parse(&rec[1])?));
    }
    Polygon::new(v)
}

/// SVG path data: one `M`, one `L` per further vertex and a closing `Z`.
pub fn svg_path_data(poly: &Polygon) -> String {
    let mut s = String::with_capacity(poly.len() * 24);
    for (i, v) in poly.vertices().iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        // The y axis is flipped so the shape appears upright.
        let _ = write!(s, "{cmd}{} {} ", v.x, -v.y);
    }
    s.push('Z');
    s
}

/// Self-contained SVG document showing the polygon.
pub fn to_svg(poly: &Polygon) -> String {
    let b = poly.bbox();
    let pad = 0.05 * b.width().max(b.height());
    let (x, y) = (b.min.x - pad, -b.max.y - pad);
    let (w, h) = (b.width() + 2.0 * pad, b.height() + 2.0 * pad);
    let stroke = 0.002 * w.max(h);
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{x} {y} {w} {h}\" width=\"600\" height=\"{}\">\n\
         <path d=\"{}\" fill=\"#dde6f3\" stroke=\"#1b3a6b\" stroke-width=\"{stroke}\"/>\n</svg>\n",
        (600.0 * h / w).round(),
        svg_path_data(poly)
    )
}

/// Counts path commands (`M`, `L`, `Z`, ...) in SVG path data.
pub fn count_path_commands(d: &str) -> usize {
    d.chars()
        .filter(|c| c.is_ascii_alphabetic() && *c != 'e' && *c != 'E')
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_snowflake, SnowflakeSpec};

    #[test]
    fn csv_round_trip() {
        let p = build_snowflake(&SnowflakeSpec::new(4.0, 2)).unwrap();
        let mut buf = Vec::new();
        write_csv(&p, &mut buf).unwrap();
        let q = read_csv(buf.as_slice()).unwrap();
        assert_eq!(p.vertices(), q.vertices());
    }

    #[test]
    fn svg_command_count() {
        for d in 0..5 {
            let p = build_snowflake(&SnowflakeSpec::new(3.0, d)).unwrap();
            let path = svg_path_data(&p);
            assert_eq!(count_path_commands(&path), 3 * 4usize.pow(d) + 1);
        }
    }
}
