//! Columnar text snapshots of fields.
//!
//! ```text
//! # ckn-field 1
//! # kind axisym
//! # t_min -30
//! # t_max 30
//! # count 2048
//! # panel 8
//! # rescalings 0.5 2
//! # dimension 4
//! # angular 128
//! r psi value grad_r grad_psi
//! ...
//! ```
//!
//! Numbers are written in shortest round-trip form, so reading a snapshot back
//! reproduces every sample bit for bit. Radial snapshots carry ψ = 0 and
//! ∂_ψ u = 0 columns and may add an `# analytic <json>` line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{CknError, Result};
use crate::field::{AnalyticShape, AxisymField, Field, RadialProfile};
use crate::grid::{AngularRule, GridSpec, RadialGrid, PANEL_ORDER};

const MAGIC: &str = "ckn-field 1";
const COLUMNS: &str = "r psi value grad_r grad_psi";

fn bad(msg: impl Into<String>) -> CknError {
    CknError::Snapshot(msg.into())
}

pub fn write_snapshot(field: &Field, out: &mut impl Write) -> Result<()> {
    let spec = field.grid().spec();
    writeln!(out, "# {MAGIC}")?;
    writeln!(out, "# kind {}", if field.is_radial() { "radial" } else { "axisym" })?;
    writeln!(out, "# t_min {}", spec.t_min)?;
    writeln!(out, "# t_max {}", spec.t_max)?;
    writeln!(out, "# count {}", spec.count)?;
    writeln!(out, "# panel {PANEL_ORDER}")?;
    let resc: Vec<String> = spec.rescalings.iter().map(|v| v.to_string()).collect();
    writeln!(out, "# rescalings {}", resc.join(" "))?;
    match field {
        Field::Radial(p) => {
            if let Some(shape) = &p.analytic {
                let json = serde_json::to_string(shape).map_err(|e| bad(e.to_string()))?;
                writeln!(out, "# analytic {json}")?;
            }
            writeln!(out, "{COLUMNS}")?;
            for ((r, v), d) in p.grid.nodes().iter().zip(&p.values).zip(&p.derivative) {
                writeln!(out, "{r} 0 {v} {d} 0")?;
            }
        }
        Field::Axisym(f) => {
            writeln!(out, "# dimension {}", f.angular.dimension())?;
            writeln!(out, "# angular {}", f.angular.len())?;
            writeln!(out, "{COLUMNS}")?;
            let m = f.angular.len();
            for (i, r) in f.grid.nodes().iter().enumerate() {
                for (j, psi) in f.angular.psi().iter().enumerate() {
                    let k = i * m + j;
                    writeln!(out, "{r} {psi} {} {} {}", f.values[k], f.grad_r[k], f.grad_psi[k])?;
                }
            }
        }
    }
    Ok(())
}

#[derive(Default)]
struct Header {
    kind: Option<String>,
    t_min: Option<f64>,
    t_max: Option<f64>,
    count: Option<usize>,
    rescalings: Vec<f64>,
    dimension: Option<usize>,
    angular: Option<usize>,
    analytic: Option<AnalyticShape>,
}

fn parse_num<T: std::str::FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| bad(format!("bad value for {key}: {s:?}")))
}

pub fn read_snapshot(input: impl BufRead) -> Result<Field> {
    let mut lines = input.lines().enumerate();
    let mut header = Header::default();
    let mut saw_magic = false;
    loop {
        let (no, line) = lines.next().ok_or_else(|| bad("missing column line"))?;
        let line = line?;
        if line == COLUMNS {
            break;
        }
        let body = line
            .strip_prefix("# ")
            .ok_or_else(|| bad(format!("line {}: expected a header line", no + 1)))?;
        if body == MAGIC {
            saw_magic = true;
            continue;
        }
        let (key, value) = body.split_once(' ').unwrap_or((body, ""));
        match key {
            "kind" => header.kind = Some(value.to_string()),
            "t_min" => header.t_min = Some(parse_num(key, value)?),
            "t_max" => header.t_max = Some(parse_num(key, value)?),
            "count" => header.count = Some(parse_num(key, value)?),
            "panel" => {
                let panel: usize = parse_num(key, value)?;
                if panel != PANEL_ORDER {
                    return Err(bad(format!("panel order {panel} is not supported")));
                }
            }
            "rescalings" => {
                header.rescalings = value
                    .split_whitespace()
                    .map(|v| parse_num(key, v))
                    .collect::<Result<_>>()?
            }
            "dimension" => header.dimension = Some(parse_num(key, value)?),
            "angular" => header.angular = Some(parse_num(key, value)?),
            "analytic" => header.analytic = Some(serde_json::from_str(value).map_err(|e| bad(e.to_string()))?),
            other => return Err(bad(format!("unknown header key {other:?}"))),
        }
    }
    if !saw_magic {
        return Err(bad("missing format line"));
    }
    let spec = GridSpec {
        t_min: header.t_min.ok_or_else(|| bad("missing t_min"))?,
        t_max: header.t_max.ok_or_else(|| bad("missing t_max"))?,
        count: header.count.ok_or_else(|| bad("missing count"))?,
        rescalings: header.rescalings,
    };
    let grid = Arc::new(RadialGrid::from_spec(&spec)?);
    let m = match header.kind.as_deref() {
        Some("radial") => 1,
        Some("axisym") => header.angular.ok_or_else(|| bad("missing angular"))?,
        other => return Err(bad(format!("unknown kind {other:?}"))),
    };
    let mut cols: [Vec<f64>; 5] = Default::default();
    for (no, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        for col in cols.iter_mut() {
            let tok = parts.next().ok_or_else(|| bad(format!("line {}: too few columns", no + 1)))?;
            col.push(parse_num("sample", tok)?);
        }
        if parts.next().is_some() {
            return Err(bad(format!("line {}: too many columns", no + 1)));
        }
    }
    if cols[0].len() != grid.len() * m {
        return Err(bad(format!("{} rows for {} nodes", cols[0].len(), grid.len() * m)));
    }
    for (i, r) in grid.nodes().iter().enumerate() {
        if cols[0][i * m].to_bits() != r.to_bits() {
            return Err(bad(format!("radius column disagrees with the grid at node {i}")));
        }
    }
    let [_, psi, values, grad_r, grad_psi] = cols;
    if m == 1 && header.kind.as_deref() == Some("radial") {
        return Ok(Field::Radial(RadialProfile {
            grid,
            values,
            derivative: grad_r,
            analytic: header.analytic,
        }));
    }
    let n = header.dimension.ok_or_else(|| bad("missing dimension"))?;
    let angular = Arc::new(AngularRule::new(n, m)?);
    if angular.psi().iter().zip(&psi).any(|(a, b)| a.to_bits() != b.to_bits()) {
        return Err(bad("angle column disagrees with the angular rule"));
    }
    Ok(Field::Axisym(AxisymField {
        grid,
        angular,
        values,
        grad_r,
        grad_psi,
    }))
}

pub fn save_snapshot(field: &Field, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_snapshot(field, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<Field> {
    read_snapshot(BufReader::new(File::open(path)?))
}
