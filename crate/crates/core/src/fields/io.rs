//! Field serialization: a one-line JSON header followed by raw
//! little-endian `f64` (re, im) pairs in row-major order, plus a CSV
//! exporter for 1-D slices.

use std::io::{BufRead, BufReader, Read, Write};

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{GridSpec, Rep, SampledField};

#[derive(Serialize, Deserialize)]
struct Header {
    d: usize,
    n_x: usize,
    aux_kind: super::AuxKind,
    n_aux: usize,
    rep: Rep,
}

/// Serialize a field: JSON header line, then the values as little-endian
/// `f64` (re, im) pairs in row-major index order.
pub fn write_field(field: &SampledField, mut out: impl Write) -> Result<()> {
    let grid = field.grid();
    let header = Header {
        d: grid.d,
        n_x: grid.n_x,
        aux_kind: grid.aux_kind,
        n_aux: grid.n_aux,
        rep: field.rep(),
    };
    let mut line = serde_json::to_string(&header)?;
    line.push('\n');
    out.write_all(line.as_bytes())?;
    let mut buf = Vec::with_capacity(field.values().len() * 16);
    for v in field.values().iter() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Deserialize a field written by [`write_field`].
pub fn read_field(input: impl Read) -> Result<SampledField> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: Header = serde_json::from_str(line.trim_end())?;
    let grid = GridSpec::new(header.d, header.n_x, header.aux_kind, header.n_aux)?;
    let shape = grid.shape();
    let count: usize = shape.iter().product();
    let mut bytes = vec![0u8; count * 16];
    reader.read_exact(&mut bytes)?;
    let mut flat = Vec::with_capacity(count);
    for chunk in bytes.chunks_exact(16) {
        let re = f64::from_le_bytes(chunk[..8].try_into().expect("8-byte chunk"));
        let im = f64::from_le_bytes(chunk[8..].try_into().expect("8-byte chunk"));
        flat.push(Complex64::new(re, im));
    }
    let values = ArrayD::from_shape_vec(IxDyn(&shape), flat)
        .map_err(|e| Error::InvalidArgument(format!("field payload shape: {e}")))?;
    SampledField::from_values(grid, header.rep, values)
}

/// Export one 1-D slice of a field as CSV rows `coordinate,re,im,abs`.
///
/// `axis` selects which array axis varies; `fixed` pins every other index.
pub fn export_axis_csv(
    field: &SampledField,
    axis: usize,
    fixed: &[usize],
    out: impl Write,
) -> Result<()> {
    let shape = field.values().shape().to_vec();
    if axis >= shape.len() {
        return Err(Error::InvalidArgument(format!(
            "export_axis_csv: axis {axis} out of range for {} axes",
            shape.len()
        )));
    }
    if fixed.len() != shape.len() {
        return Err(Error::DimMismatch {
            expected: format!("{} fixed indices", shape.len()),
            found: format!("{}", fixed.len()),
        });
    }
    let coords: Vec<f64> = if axis == shape.len() - 1 {
        field.grid().aux_points()
    } else {
        field.grid().x_points()
    };
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["coordinate", "re", "im", "abs"])?;
    let mut idx = fixed.to_vec();
    for i in 0..shape[axis] {
        idx[axis] = i;
        let v = field.values()[IxDyn(&idx)];
        writer.write_record([
            format!("{:.12e}", coords[i]),
            format!("{:.12e}", v.re),
            format!("{:.12e}", v.im),
            format!("{:.12e}", v.norm()),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
