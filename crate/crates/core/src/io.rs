//! Snapshot files (binary little-endian with a text sidecar) and CSV
//! emitters for diagnostics and steady-state indexes.

use std::io::{Read, Write};
use std::path::Path;

use crate::domain::Domain;
use crate::dynamics::LambdaSeries;
use crate::equilibria::EquilibriumRecord;
use crate::error::{CoreError, Result};
use crate::field::Field;
use crate::solver::Trajectory;

const MAGIC: &[u8; 4] = b"PSNP";
const VERSION: u32 = 1;

/// Write a field snapshot: binary payload at `path`, human-readable sidecar
/// at `path.txt`. The domain rides along as its text document, so the file
/// is self-describing and the geometry round-trips bit-exactly.
pub fn write_snapshot(path: &Path, t: f64, field: &Field) -> Result<()> {
    let domain_text = field.domain().to_text();
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(domain_text.len() as u32).to_le_bytes());
    buf.extend_from_slice(domain_text.as_bytes());
    buf.extend_from_slice(&t.to_le_bytes());
    buf.extend_from_slice(&(field.len() as u32).to_le_bytes());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;

    let sidecar = path.with_extension(format!(
        "{}txt",
        path.extension()
            .map(|e| format!("{}.", e.to_string_lossy()))
            .unwrap_or_default()
    ));
    let domain = field.domain();
    let mut text = String::new();
    text.push_str(&format!("snapshot format v{VERSION}\n"));
    text.push_str(&format!("t {t:?}\n"));
    text.push_str(&format!("values {}\n", field.len()));
    text.push_str(&format!("sup_norm {:?}\n", field.sup_norm()));
    text.push_str(&format!("min {:?}\n", field.min()));
    text.push_str(&format!("max {:?}\n", field.max()));
    text.push_str("domain:\n");
    text.push_str(&domain.to_text());
    std::fs::write(sidecar, text)?;
    Ok(())
}

/// Read back a snapshot written by [`write_snapshot`].
pub fn read_snapshot(path: &Path) -> Result<(f64, Field)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cursor = 0usize;
    let take = |cursor: &mut usize, n: usize| -> Result<&[u8]> {
        if *cursor + n > bytes.len() {
            return Err(CoreError::MalformedFile("snapshot truncated".into()));
        }
        let slice = &bytes[*cursor..*cursor + n];
        *cursor += n;
        Ok(slice)
    };
    if take(&mut cursor, 4)? != MAGIC {
        return Err(CoreError::MalformedFile("bad snapshot magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(CoreError::MalformedFile(format!(
            "unsupported snapshot version {version}"
        )));
    }
    let dom_len = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
    let domain_text = std::str::from_utf8(take(&mut cursor, dom_len)?)
        .map_err(|_| CoreError::MalformedFile("domain text is not utf-8".into()))?
        .to_string();
    let domain = Domain::from_text(&domain_text)?;
    let t = f64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap());
    let n = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
    if n != domain.interior_count() {
        return Err(CoreError::MalformedFile(format!(
            "snapshot holds {n} values but the domain has {} interior nodes",
            domain.interior_count()
        )));
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(f64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()));
    }
    Ok((t, Field::from_values(&domain, values)?))
}

/// Per-snapshot diagnostics CSV: `t,min_u,max_u,lambda,symmetry_defect`.
/// The series must have been tracked on the same trajectory.
pub fn diagnostics_csv(traj: &Trajectory, series: &LambdaSeries) -> String {
    let mut out = String::from("t,min_u,max_u,lambda,symmetry_defect\n");
    for ((t, u), sample) in traj.snapshots.iter().zip(&series.entries) {
        debug_assert_eq!(*t, sample.t);
        out.push_str(&format!(
            "{:?},{:?},{:?},{:?},{:?}\n",
            t,
            u.min(),
            u.max(),
            sample.result.lambda.value,
            crate::reflection::symmetry_defect(u),
        ));
    }
    out
}

/// Steady-state index CSV: `name,class,lambda,residual,n_nodal_components`.
pub fn equilibrium_index_csv(records: &[(String, &EquilibriumRecord)]) -> String {
    let mut out = String::from("name,class,lambda,residual,n_nodal_components\n");
    for (name, record) in records {
        out.push_str(&format!(
            "{},{},{:?},{:?},{}\n",
            name,
            record.class,
            record.lambda.lambda.value,
            record.residual,
            record.nodal_components.len(),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{track_lambda, DynamicsTols};
    use crate::nonlinearity::{catalog_get, Forcing};
    use crate::solver::{evolve, SolverParams};

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join("parasym-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("state.psnap");

        let d = Domain::build_interval(1.5, 32).unwrap();
        let field = Field::from_fn(&d, |x, _| (2.3 * x).sin() + 0.017);
        write_snapshot(&path, 4.25, &field).unwrap();
        let (t, loaded) = read_snapshot(&path).unwrap();
        assert_eq!(t, 4.25);
        assert_eq!(loaded.len(), field.len());
        for (a, b) in loaded.values().iter().zip(field.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(*loaded.domain().as_ref(), *field.domain().as_ref());
        assert!(path.with_extension("psnap.txt").exists());
    }

    #[test]
    fn corrupted_snapshots_are_rejected() {
        let dir = std::env::temp_dir().join("parasym-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.psnap");
        std::fs::write(&path, b"not a snapshot").unwrap();
        assert!(read_snapshot(&path).is_err());
    }

    #[test]
    fn diagnostics_csv_has_one_row_per_snapshot() {
        let d = Domain::build_interval(2.0, 32).unwrap();
        let f = catalog_get("logistic").unwrap();
        let u0 = Field::from_fn(&d, |x, _| (1.0 - x * x).max(0.0));
        let params = SolverParams::new(0.1, 1.0).with_stride(2);
        let traj = evolve(&u0, &f, &Forcing::none(), &params, None).unwrap();
        let series = track_lambda(&traj, &DynamicsTols::default());
        let csv = diagnostics_csv(&traj, &series);
        assert_eq!(csv.lines().count(), traj.snapshots.len() + 1);
        assert!(csv.starts_with("t,min_u,max_u,lambda,symmetry_defect"));
    }
}
