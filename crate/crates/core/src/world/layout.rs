//! Plain-text scenario layout: one record per line.
//!
//! ```text
//! # comment
//! IOT x y
//! LBD x y z
//! UAV x y
//! ```
//!
//! Coordinates are meters. Records of each kind are indexed in file order.

use super::config::Layout;
use super::WorldError;

fn parse_coords(line_no: usize, fields: &[&str], want: usize) -> Result<Vec<f64>, WorldError> {
    if fields.len() != want {
        return Err(WorldError::Layout {
            line: line_no,
            message: format!("expected {want} coordinates, found {}", fields.len()),
        });
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| WorldError::Layout {
                    line: line_no,
                    message: format!("invalid coordinate `{f}`"),
                })
        })
        .collect()
}

/// Parses one layout line into `layout`. Returns `Ok(false)` when the line
/// is not a layout record (so callers can mix layout records with other
/// syntax).
pub fn parse_layout_line(layout: &mut Layout, line_no: usize, line: &str) -> Result<bool, WorldError> {
    let body = line.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return Ok(true);
    }
    let fields: Vec<&str> = body.split_whitespace().collect();
    match fields[0].to_ascii_uppercase().as_str() {
        "IOT" => {
            let c = parse_coords(line_no, &fields[1..], 2)?;
            layout.iots.push([c[0], c[1]]);
        }
        "UAV" => {
            let c = parse_coords(line_no, &fields[1..], 2)?;
            layout.uavs.push([c[0], c[1]]);
        }
        "LBD" => {
            let c = parse_coords(line_no, &fields[1..], 3)?;
            layout.lbds.push([c[0], c[1], c[2]]);
        }
        _ => return Ok(false),
    }
    Ok(true)
}

pub fn parse_layout(text: &str) -> Result<Layout, WorldError> {
    let mut layout = Layout::default();
    for (i, line) in text.lines().enumerate() {
        if !parse_layout_line(&mut layout, i + 1, line)? {
            return Err(WorldError::Layout {
                line: i + 1,
                message: format!("unknown record `{}`", line.trim()),
            });
        }
    }
    Ok(layout)
}

pub fn format_layout(layout: &Layout) -> String {
    let mut out = String::new();
    for p in &layout.uavs {
        out.push_str(&format!("UAV {} {}\n", p[0], p[1]));
    }
    for p in &layout.lbds {
        out.push_str(&format!("LBD {} {} {}\n", p[0], p[1], p[2]));
    }
    for p in &layout.iots {
        out.push_str(&format!("IOT {} {}\n", p[0], p[1]));
    }
    out
}
