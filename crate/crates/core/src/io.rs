//! File formats: legacy ASCII VTK for nodal fields, Matrix Market for
//! sparse operators, and plain one-value-per-line vectors.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{ElementKind, Mesh};
use crate::sparse::CsrMatrix;

fn vtk_cell_type(kind: ElementKind) -> u8 {
    match kind {
        ElementKind::Tri3 => 5,
        ElementKind::Quad4 => 9,
    }
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

/// Writes the mesh with a single scalar point-data array.
pub fn write_vtk<W: Write>(out: W, mesh: &Mesh, title: &str, name: &str, values: &[f64]) -> Result<()> {
    if values.len() != mesh.num_nodes() {
        return Err(Error::InvalidInput("point data length differs from node count".into()));
    }
    let mut w = BufWriter::new(out);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.num_nodes())?;
    for p in &mesh.nodes {
        writeln!(w, "{:e} {:e} 0", p[0], p[1])?;
    }
    let npe = mesh.kind.nodes_per_element();
    let ne = mesh.num_elements();
    writeln!(w, "CELLS {} {}", ne, ne * (npe + 1))?;
    for el in &mesh.elements {
        write!(w, "{npe}")?;
        for n in el {
            write!(w, " {n}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_TYPES {ne}")?;
    let ct = vtk_cell_type(mesh.kind);
    for _ in 0..ne {
        writeln!(w, "{ct}")?;
    }
    writeln!(w, "POINT_DATA {}", mesh.num_nodes())?;
    writeln!(w, "SCALARS {} double 1", sanitize(name))?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in values {
        writeln!(w, "{v:e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_vtk_file(path: &Path, mesh: &Mesh, title: &str, name: &str, values: &[f64]) -> Result<()> {
    write_vtk(File::create(path)?, mesh, title, name, values)
}

/// Reads back the scalar array of a file produced by [`write_vtk`].
pub fn read_vtk_point_data<R: Read>(input: R) -> Result<Vec<f64>> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines();
    let mut count = None;
    for line in lines.by_ref() {
        let line = line?;
        if let Some(rest) = line.strip_prefix("POINT_DATA ") {
            count = Some(rest.trim().parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?);
        }
        if line.starts_with("LOOKUP_TABLE") {
            break;
        }
    }
    let count = count.ok_or_else(|| Error::Parse("no POINT_DATA section".into()))?;
    let values: Vec<f64> = lines
        .take(count)
        .map(|l| l.map_err(Error::from)?.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
        .collect::<Result<_>>()?;
    if values.len() != count {
        return Err(Error::Parse(format!("expected {count} values, found {}", values.len())));
    }
    Ok(values)
}

/// Matrix Market coordinate format, all stored entries, 1-based.
pub fn write_matrix_market<W: Write>(out: W, a: &CsrMatrix) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    w.flush()?;
    Ok(())
}

/// Matrix Market dense array format, one column.
pub fn write_matrix_market_vector<W: Write>(out: W, v: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", v.len())?;
    for x in v {
        writeln!(w, "{x:e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_market<R: Read>(input: R) -> Result<CsrMatrix> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty Matrix Market file".into()))??;
    let h = header.to_ascii_lowercase();
    if !h.starts_with("%%matrixmarket matrix coordinate") {
        return Err(Error::Parse(format!("unsupported Matrix Market header `{header}`")));
    }
    let symmetric = h.contains("symmetric");
    if h.contains("complex") || h.contains("pattern") {
        return Err(Error::Parse("only real matrices are supported".into()));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
    let mut size = None;
    let mut triplets = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(Error::Parse(format!("bad size line `{t}`")));
                }
                size = Some((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
            }
            Some(_) => {
                if fields.len() != 3 {
                    return Err(Error::Parse(format!("bad entry line `{t}`")));
                }
                let (i, j) = (parse(fields[0])?, parse(fields[1])?);
                if i == 0 || j == 0 {
                    return Err(Error::Parse("Matrix Market indices are 1-based".into()));
                }
                let v: f64 = fields[2].parse().map_err(|e| Error::Parse(format!("`{}`: {e}", fields[2])))?;
                triplets.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or_else(|| Error::Parse("missing size line".into()))?;
    let stored = if symmetric { triplets.iter().filter(|t| t.0 >= t.1).count() } else { triplets.len() };
    if stored != nnz {
        return Err(Error::Parse(format!("expected {nnz} entries, found {stored}")));
    }
    CsrMatrix::from_triplets(nr, nc, &triplets)
}

pub fn write_vector<W: Write>(out: W, v: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(out);
    for x in v {
        writeln!(w, "{x:e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vector<R: Read>(input: R) -> Result<Vec<f64>> {
    BufReader::new(input)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| {
            let l = l?;
            l.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{l}`: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_structured;
    use proptest::prelude::*;

    #[test]
    fn vtk_layout() {
        let mesh = generate_structured([0.0, 0.0], [1.0, 1.0], [3, 2], ElementKind::Tri3).unwrap();
        let values: Vec<f64> = (0..mesh.num_nodes()).map(|i| i as f64 * 0.5 - 1.0).collect();
        let mut buf = Vec::new();
        write_vtk(&mut buf, &mesh, "test", "c A", &values).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0\ntest\nASCII\nDATASET UNSTRUCTURED_GRID\n"));
        assert!(text.contains("CELLS 4 16\n"));
        assert!(text.contains("SCALARS c_A double 1\n"));
        assert!(text.contains("CELL_TYPES 4\n5\n5\n5\n5\nPOINT_DATA 6\n"));
        assert_eq!(read_vtk_point_data(&buf[..]).unwrap(), values);
    }

    #[test]
    fn vtk_rejects_wrong_length() {
        let mesh = generate_structured([0.0, 0.0], [1.0, 1.0], [3, 3], ElementKind::Quad4).unwrap();
        assert!(write_vtk(Vec::new(), &mesh, "t", "x", &[1.0]).is_err());
    }

    #[test]
    fn matrix_market_round_trip() {
        let a = CsrMatrix::from_dense(&[vec![4.0, -1.0, 0.0], vec![-1.0, 4.0, 0.25], vec![0.0, 0.25, 1e-300]]);
        let mut buf = Vec::new();
        write_matrix_market(&mut buf, &a).unwrap();
        let b = read_matrix_market(&buf[..]).unwrap();
        assert_eq!(a.to_dense(), b.to_dense());
    }

    #[test]
    fn matrix_market_vector_layout() {
        let mut buf = Vec::new();
        write_matrix_market_vector(&mut buf, &[1.5, -2.0]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "%%MatrixMarket matrix array real general\n2 1\n1.5e0\n-2e0\n");
    }

    #[test]
    fn matrix_market_symmetric_input() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 2\n1 1 2.0\n2 1 -1.0\n";
        let a = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(a.to_dense(), vec![vec![2.0, -1.0], vec![-1.0, 0.0]]);
        assert!(read_matrix_market("%%MatrixMarket matrix array real general\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn vector_round_trip(v in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::ZERO, 0..64)) {
            let mut buf = Vec::new();
            write_vector(&mut buf, &v).unwrap();
            let back = read_vector(&buf[..]).unwrap();
            prop_assert_eq!(back.len(), v.len());
            for (a, b) in back.iter().zip(&v) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
