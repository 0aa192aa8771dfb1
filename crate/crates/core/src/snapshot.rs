//! Versioned text snapshot of an [`EmbeddingStore`].
//!
//! ```text
//! OMBA-EMB-v1
//! dim 32
//! step_count 1200
//! units 2
//! P\t0\t"milk"\t17\t<d floats>\t<d floats>
//! U\t1\t"42"\t9\t<d floats>\t<d floats>
//! ```
//!
//! One line per unit in dense-index order: kind tag, index, JSON-quoted id,
//! occurrence count, vector, AdaGrad accumulator. Floats are written in
//! shortest round-trip form, so save → load → save is byte-identical.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::{EmbeddingStore, UnitId, UnitKind};

pub const MAGIC: &str = "OMBA-EMB-v1";

fn floats(xs: &[f64]) -> String {
    let mut s = String::with_capacity(xs.len() * 12);
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&format!("{x:e}"));
    }
    s
}

pub fn write_snapshot<W: Write>(store: &EmbeddingStore, mut out: W) -> Result<()> {
    let io = |e| Error::io("<snapshot>", e);
    writeln!(out, "{MAGIC}").map_err(io)?;
    writeln!(out, "dim {}", store.dim()).map_err(io)?;
    writeln!(out, "step_count {}", store.step_count()).map_err(io)?;
    writeln!(out, "units {}", store.len()).map_err(io)?;
    for (i, unit) in store.units().iter().enumerate() {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            unit.kind.tag(),
            i,
            serde_json::to_string(&unit.id)?,
            store.occurrences(i),
            floats(store.vector(i)),
            floats(store.accumulator(i)),
        )
        .map_err(io)?;
    }
    Ok(())
}

fn header<R: BufRead>(lines: &mut std::io::Lines<R>, key: &str) -> Result<u64> {
    let line = lines
        .next()
        .ok_or_else(|| Error::Snapshot(format!("missing `{key}` line")))?
        .map_err(|e| Error::io("<snapshot>", e))?;
    let value = line
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| Error::Snapshot(format!("expected `{key} <n>`, got `{line}`")))?;
    value
        .parse()
        .map_err(|_| Error::Snapshot(format!("bad `{key}` value `{value}`")))
}

fn parse_floats(field: &str, dim: usize, line: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = field
        .split(' ')
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Snapshot(format!("unit line {line}: bad float")))?;
    if v.len() != dim {
        return Err(Error::Snapshot(format!(
            "unit line {line}: expected {dim} values, got {}",
            v.len()
        )));
    }
    Ok(v)
}

pub fn read_snapshot<R: BufRead>(input: R) -> Result<EmbeddingStore> {
    let mut lines = input.lines();
    let magic = lines
        .next()
        .ok_or_else(|| Error::Snapshot("empty file".into()))?
        .map_err(|e| Error::io("<snapshot>", e))?;
    if magic != MAGIC {
        return Err(Error::Snapshot(format!("bad magic `{magic}`, expected `{MAGIC}`")));
    }
    let dim = header(&mut lines, "dim")? as usize;
    if dim == 0 {
        return Err(Error::Snapshot("dimension must be positive".into()));
    }
    let steps = header(&mut lines, "step_count")?;
    let count = header(&mut lines, "units")? as usize;
    let mut store = EmbeddingStore::new(dim);
    for k in 0..count {
        let line = lines
            .next()
            .ok_or_else(|| Error::Snapshot(format!("expected {count} units, found {k}")))?
            .map_err(|e| Error::io("<snapshot>", e))?;
        let fields: Vec<&str> = line.split('\t').collect();
        let [tag, idx, id, occ, vec, acc] = fields[..] else {
            return Err(Error::Snapshot(format!("unit line {k}: expected 6 fields")));
        };
        let kind = UnitKind::from_tag(tag)
            .ok_or_else(|| Error::Snapshot(format!("unit line {k}: bad kind `{tag}`")))?;
        if idx.parse::<usize>().ok() != Some(k) {
            return Err(Error::Snapshot(format!("unit line {k}: index `{idx}` out of order")));
        }
        let id: String = serde_json::from_str(id)?;
        let occurrences = occ
            .parse()
            .map_err(|_| Error::Snapshot(format!("unit line {k}: bad occurrence count")))?;
        let unit = UnitId { kind, id };
        if store.index_of(&unit).is_some() {
            return Err(Error::Snapshot(format!("unit line {k}: duplicate {unit}")));
        }
        store.restore_unit(
            unit,
            &parse_floats(vec, dim, k)?,
            &parse_floats(acc, dim, k)?,
            occurrences,
        );
    }
    store.set_step_count(steps);
    Ok(store)
}
