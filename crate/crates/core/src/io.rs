//! Serialization helpers: hex floats, point-set exports, versioned JSON
//! documents and SVG plots of planar sets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gap::PointSet;
use crate::norm::NormOracle;
use crate::SCHEMA;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IoError {
    #[error("malformed hex float {0:?}")]
    HexFloat(String),
    #[error("line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Exact C99-style hex rendering, e.g. `0x1.8p+1` for 3.
pub fn format_hex(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 && frac == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, e) = if exp == 0 { (0, -1022) } else { (1, exp - 1023) };
    let mut digits = format!("{frac:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    let dot = if digits.is_empty() { String::new() } else { format!(".{digits}") };
    let esign = if e >= 0 { "+" } else { "-" };
    format!("{sign}0x{lead}{dot}p{esign}{}", e.abs())
}

/// Inverse of [`format_hex`]; also accepts plain decimal input.
pub fn parse_hex(s: &str) -> Result<f64, IoError> {
    let err = || IoError::HexFloat(s.to_string());
    let t = s.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) else {
        return t.parse::<f64>().map_err(|_| err());
    };
    let (mant, exp) = hex.split_once(['p', 'P']).ok_or_else(err)?;
    let exp: i64 = exp.parse().map_err(|_| err())?;
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(err());
    }
    // Accumulate up to 60 significant bits exactly, then scale.
    let mut value: u64 = 0;
    let mut shift: i64 = 0;
    let mut sticky = false;
    for (i, c) in int.chars().chain(frac.chars()).enumerate() {
        let dgt = c.to_digit(16).ok_or_else(err)? as u64;
        let in_frac = i >= int.len();
        if value >> 56 == 0 {
            value = value << 4 | dgt;
            if in_frac {
                shift -= 4;
            }
        } else {
            sticky |= dgt != 0;
            if !in_frac {
                shift += 4;
            }
        }
    }
    if sticky {
        value |= 1;
    }
    let mag = ldexp(value as f64, shift + exp);
    Ok(if neg { -mag } else { mag })
}

/// `v * 2^e`, scaling in steps so intermediates stay normal and only the last product rounds.
fn ldexp(mut v: f64, mut e: i64) -> f64 {
    while e > 500 {
        v *= 2f64.powi(500);
        e -= 500;
    }
    while e < -500 {
        v *= 2f64.powi(-500);
        e += 500;
    }
    v * 2f64.powi(e as i32)
}

/// One point per row, coordinates as hex floats.
pub fn points_csv(ps: &PointSet) -> String {
    let d = ps.dim();
    let mut out = (0..d).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for p in ps.points() {
        out.push_str(&p.iter().map(|v| format_hex(*v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

pub fn parse_points_csv(text: &str) -> Result<Vec<Vec<f64>>, IoError> {
    let mut rows = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(parse_hex)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| IoError::Csv { line: i + 1, msg: e.to_string() })?;
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(IoError::Csv { line: i + 1, msg: "ragged row".into() });
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct PointsDocument {
    pub d: usize,
    pub tau: f64,
    pub points: Vec<Vec<f64>>,
}

impl PointsDocument {
    pub fn from_set(ps: &PointSet) -> Self {
        PointsDocument {
            d: ps.dim(),
            tau: ps.tau(),
            points: ps.points().map(|p| p.to_vec()).collect(),
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'static str,
    kind: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with `"schema"` and `"kind"` fields ahead of the payload's own.
pub fn to_document<T: Serialize>(kind: &str, body: &T) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope { schema: SCHEMA, kind, body })?;
    s.push('\n');
    Ok(s)
}

/// Reads a document written by [`to_document`], checking schema and kind.
pub fn from_document<T: for<'de> Deserialize<'de>>(kind: &str, text: &str) -> Result<T, String> {
    let mut v: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let obj = v.as_object_mut().ok_or("document is not a JSON object")?;
    match obj.remove("schema") {
        Some(serde_json::Value::String(s)) if s == SCHEMA => {}
        other => return Err(format!("unsupported schema {other:?}")),
    }
    match obj.remove("kind") {
        Some(serde_json::Value::String(k)) if k == kind => {}
        other => return Err(format!("expected kind {kind:?}, found {other:?}")),
    }
    serde_json::from_value(v).map_err(|e| e.to_string())
}

/// SVG of a planar point set with the unit sphere of `norm` drawn at every
/// point of `overlay` (typically one or two points).
pub fn svg_plot(ps: &PointSet, norm: Option<&NormOracle>, overlay: &[Vec<f64>]) -> Option<String> {
    if ps.dim() != 2 {
        return None;
    }
    const SIZE: f64 = 800.0;
    const SAMPLES: usize = 256;
    let sphere: Vec<[f64; 2]> = match norm {
        Some(n) if n.dim() == 2 => (0..SAMPLES)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / SAMPLES as f64;
                let v = [a.cos(), a.sin()];
                let g = n.gauge(&v);
                [v[0] / g, v[1] / g]
            })
            .collect(),
        _ => Vec::new(),
    };
    let (mut lo, mut hi) = ps.bbox();
    for c in overlay {
        for s in &sphere {
            for k in 0..2 {
                lo[k] = lo[k].min(c[k] + s[k]);
                hi[k] = hi[k].max(c[k] + s[k]);
            }
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let scale = 0.9 * SIZE / span;
    let map = |x: f64, y: f64| (0.05 * SIZE + (x - lo[0]) * scale, SIZE - 0.05 * SIZE - (y - lo[1]) * scale);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for c in overlay {
        let pts: Vec<String> = sphere
            .iter()
            .map(|s| {
                let (x, y) = map(c[0] + s[0], c[1] + s[1]);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        out.push_str(&format!(
            "<polygon points=\"{}\" fill=\"none\" stroke=\"#c33\" stroke-width=\"1\"/>\n",
            pts.join(" ")
        ));
    }
    let r = (SIZE / (ps.len() as f64).sqrt() / 8.0).clamp(0.5, 4.0);
    for p in ps.points() {
        let (x, y) = map(p[0], p[1]);
        out.push_str(&format!("<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"{r:.2}\" fill=\"#135\"/>\n"));
    }
    out.push_str("</svg>\n");
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_examples() {
        assert_eq!(format_hex(3.0), "0x1.8p+1");
        assert_eq!(format_hex(1.0), "0x1p+0");
        assert_eq!(format_hex(-0.0), "-0x0p+0");
        assert_eq!(format_hex(0.1), "0x1.999999999999ap-4");
        assert_eq!(format_hex(f64::MIN_POSITIVE / 4.0), "0x0.4p-1022");
        for x in [0.1, -2.5e-300, 1e300, f64::MIN_POSITIVE / 3.0, 5e-324, f64::MAX] {
            assert_eq!(parse_hex(&format_hex(x)).unwrap().to_bits(), x.to_bits(), "{x}");
        }
        assert_eq!(parse_hex("1.5").unwrap(), 1.5);
        assert!(parse_hex("0xzp1").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ps = PointSet::from_points(2, 1e-9, [[0.1, -3.0], [1.0 / 3.0, 7.5]]);
        let rows = parse_points_csv(&points_csv(&ps)).unwrap();
        assert_eq!(rows, vec![vec![0.1, -3.0], vec![1.0 / 3.0, 7.5]]);
    }

    #[test]
    fn documents_carry_schema() {
        let doc = PointsDocument { d: 1, tau: 1e-9, points: vec![vec![2.0]] };
        let text = to_document("points", &doc).unwrap();
        assert!(text.contains("\"schema\": \"udf/1\""));
        assert_eq!(from_document::<PointsDocument>("points", &text).unwrap(), doc);
        assert!(from_document::<PointsDocument>("report", &text).is_err());
    }

    #[test]
    fn svg_only_in_the_plane() {
        let ps = PointSet::from_points(2, 1e-9, [[0.0, 0.0], [1.0, 0.0]]);
        let svg = svg_plot(&ps, Some(&NormOracle::euclidean(2)), &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg_plot(&PointSet::from_points(3, 1e-9, [[0.0; 3]]), None, &[]).is_none());
    }
}
