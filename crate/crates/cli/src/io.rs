//! CSV tables, solution dumps and MatrixMarket files.
//!
//! Floats are written with 17 significant digits so that files round-trip and
//! identical runs produce identical bytes.

use std::io::{self, BufRead, Write};

use nlschwarz_core::mesh::{DofMap, Mesh};
use nlschwarz_core::schwarz::IterationTrace;
use nlschwarz_core::sparse::CsrMatrix;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `iteration,residual`, one row per trace entry.
pub fn write_trace(w: &mut dyn Write, trace: &IterationTrace) -> io::Result<()> {
    writeln!(w, "iteration,residual")?;
    for (k, r) in trace.residuals.iter().enumerate() {
        writeln!(w, "{k},{}", num(*r))?;
    }
    Ok(())
}

/// One row of the GMRES benchmark table.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub h: f64,
    pub s: f64,
    pub delta2: f64,
    pub solver: String,
    pub iterations: usize,
    pub cond_estimate: f64,
}

pub fn write_bench(w: &mut dyn Write, rows: &[BenchRow]) -> io::Result<()> {
    writeln!(w, "h,s,delta2,solver,iterations,cond_estimate")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.h, r.s, r.delta2, r.solver, r.iterations, num(r.cond_estimate))?;
    }
    Ok(())
}

/// One row of the h-convergence table; `slope` is the fitted order of its series.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub series: String,
    pub h: f64,
    pub l2_error: f64,
    pub slope: f64,
}

pub fn write_convergence(w: &mut dyn Write, rows: &[ConvergenceRow]) -> io::Result<()> {
    writeln!(w, "series,h,l2_error,slope")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.series, r.h, num(r.l2_error), num(r.slope))?;
    }
    Ok(())
}

/// `dof,x,y,owner,value` for every DOF; prescribed DOFs have an empty owner.
pub fn write_solution(w: &mut dyn Write, mesh: &Mesh, dofmap: &DofMap, coeffs: &[f64]) -> io::Result<()> {
    writeln!(w, "dof,x,y,owner,value")?;
    for (k, (d, v)) in dofmap.dofs.iter().zip(coeffs).enumerate() {
        let p = mesh.vertices[d.vertex];
        let owner = d.owner.map(|o| o.to_string()).unwrap_or_default();
        writeln!(w, "{k},{},{},{owner},{}", num(p.x), num(p.y), num(*v))?;
    }
    Ok(())
}

/// Write `m` in MatrixMarket coordinate format (one-based indices).
pub fn write_matrix_market(w: &mut dyn Write, m: &CsrMatrix) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.nrows, m.ncols, m.nnz())?;
    for i in 0..m.nrows {
        for (j, v) in m.row(i) {
            writeln!(w, "{} {} {}", i + 1, j + 1, num(v))?;
        }
    }
    Ok(())
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

/// Read a real MatrixMarket coordinate file, `general` or `symmetric`.
pub fn read_matrix_market(r: &mut dyn BufRead) -> io::Result<CsrMatrix> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| invalid("empty file"))??;
    let fields: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(invalid("expected a MatrixMarket coordinate header"));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(invalid(format!("unsupported field type {}", fields[3])));
    }
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(invalid(format!("unsupported symmetry {other}"))),
    };
    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                let p: Vec<usize> = parts
                    .iter()
                    .map(|x| x.parse().map_err(|_| invalid(format!("bad size line {t:?}"))))
                    .collect::<io::Result<_>>()?;
                if p.len() != 3 {
                    return Err(invalid(format!("bad size line {t:?}")));
                }
                size = Some((p[0], p[1], p[2]));
                triplets.reserve(p[2]);
            }
            Some((nr, nc, _)) => {
                if parts.len() != 3 {
                    return Err(invalid(format!("bad entry {t:?}")));
                }
                let i: usize = parts[0].parse().map_err(|_| invalid(format!("bad row in {t:?}")))?;
                let j: usize = parts[1].parse().map_err(|_| invalid(format!("bad column in {t:?}")))?;
                let v: f64 = parts[2].parse().map_err(|_| invalid(format!("bad value in {t:?}")))?;
                if i == 0 || j == 0 || i > nr || j > nc {
                    return Err(invalid(format!("entry ({i}, {j}) out of range")));
                }
                triplets.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or_else(|| invalid("missing size line"))?;
    let stored = if symmetric { triplets.iter().filter(|t| t.0 >= t.1).count() } else { triplets.len() };
    if stored != nnz {
        return Err(invalid(format!("expected {nnz} entries, found {stored}")));
    }
    Ok(CsrMatrix::from_triplets(nr, nc, &triplets))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_market_round_trip() {
        let m = CsrMatrix::from_triplets(3, 2, &[(0, 0, 1.5), (2, 1, -1.0 / 3.0), (1, 0, 1e-300)]);
        let mut buf = Vec::new();
        write_matrix_market(&mut buf, &m).unwrap();
        let back = read_matrix_market(&mut buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn matrix_market_symmetric_and_errors() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 2\n2 1 -1\n";
        let m = read_matrix_market(&mut text.as_bytes()).unwrap();
        assert_eq!(m.get(0, 1), -1.0);
        assert_eq!(m.get(1, 0), -1.0);
        let short = "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 2\n";
        assert!(read_matrix_market(&mut short.as_bytes()).is_err());
        let range = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 2\n";
        assert!(read_matrix_market(&mut range.as_bytes()).is_err());
    }

    #[test]
    fn trace_csv() {
        let t = IterationTrace { residuals: vec![1.0, 0.5], iterations: 1, converged: true, phase_times: vec![] };
        let mut buf = Vec::new();
        write_trace(&mut buf, &t).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "iteration,residual\n0,1.0000000000000000e0\n1,5.0000000000000000e-1\n");
    }
}
