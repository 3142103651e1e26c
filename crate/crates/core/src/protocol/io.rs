//! CSV tables (`a,b,k,l,value`, 1-based indices) with a JSON sidecar holding
//! the shape and acquisition metadata.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array4;
use serde::{Deserialize, Serialize};

use super::noise::BlockAlignment;
use super::table::{CountTable, ProbabilityTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSidecar {
    /// `"probability"` or `"counts"`.
    pub kind: String,
    pub dim: usize,
    pub bases_alice: usize,
    pub bases_bob: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integration_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coincidence_window: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    /// Labels of Alice's bases, in setting order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub basis_labels: Vec<String>,
    /// Block alignment of each matched setting, when the bases have one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub block_alignment: Vec<BlockAlignment>,
}

impl TableSidecar {
    fn for_shape(kind: &str, dim: usize, k: usize, l: usize) -> Self {
        Self {
            kind: kind.into(),
            dim,
            bases_alice: k,
            bases_bob: l,
            integration_time: None,
            coincidence_window: None,
            seed: None,
            generator: None,
            basis_labels: Vec::new(),
            block_alignment: Vec::new(),
        }
    }

    pub fn for_probability(table: &ProbabilityTable) -> Self {
        Self::for_shape("probability", table.dim(), table.alice_bases(), table.bob_bases())
    }

    pub fn for_counts(table: &CountTable) -> Self {
        Self {
            integration_time: Some(table.integration_time),
            coincidence_window: Some(table.coincidence_window),
            seed: table.seed,
            generator: table.generator.clone(),
            ..Self::for_shape("counts", table.dim(), table.alice_bases(), table.bob_bases())
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(w.flush()?)
    }
}

/// `counts.csv` -> `counts.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

#[derive(Debug, Serialize, Deserialize)]
struct Row<V> {
    a: usize,
    b: usize,
    k: usize,
    l: usize,
    value: V,
}

fn write_rows<V: Serialize + Copy>(path: &Path, values: &Array4<V>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let (kk, ll, d, _) = values.dim();
    for k in 0..kk {
        for l in 0..ll {
            for a in 0..d {
                for b in 0..d {
                    w.serialize(Row {
                        a: a + 1,
                        b: b + 1,
                        k: k + 1,
                        l: l + 1,
                        value: values[[k, l, a, b]],
                    })?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn read_rows<V>(path: &Path, meta: &TableSidecar) -> Result<Array4<V>>
where
    V: for<'de> Deserialize<'de> + Clone + Default,
{
    let (kk, ll, d) = (meta.bases_alice, meta.bases_bob, meta.dim);
    let mut values = Array4::from_elem((kk, ll, d, d), V::default());
    let mut seen = Array4::from_elem((kk, ll, d, d), false);
    let mut r = csv::Reader::from_path(path)?;
    for row in r.deserialize() {
        let row: Row<V> = row?;
        let in_range = (1..=d).contains(&row.a)
            && (1..=d).contains(&row.b)
            && (1..=kk).contains(&row.k)
            && (1..=ll).contains(&row.l);
        if !in_range {
            return Err(Error::Format(format!(
                "row (a={}, b={}, k={}, l={}) outside the declared shape",
                row.a, row.b, row.k, row.l
            )));
        }
        let idx = [row.k - 1, row.l - 1, row.a - 1, row.b - 1];
        if seen[idx] {
            return Err(Error::Format(format!(
                "duplicate row (a={}, b={}, k={}, l={})",
                row.a, row.b, row.k, row.l
            )));
        }
        seen[idx] = true;
        values[idx] = row.value;
    }
    if let Some(((k, l, a, b), _)) = seen.indexed_iter().find(|(_, s)| !**s) {
        return Err(Error::Format(format!(
            "missing row (a={}, b={}, k={}, l={})",
            a + 1,
            b + 1,
            k + 1,
            l + 1
        )));
    }
    Ok(values)
}

/// Writes `path` and its sidecar. Extra sidecar fields (labels, alignment)
/// are taken from `extra` when given.
pub fn write_probability_table(path: &Path, table: &ProbabilityTable, extra: Option<&TableSidecar>) -> Result<()> {
    write_rows(path, table.values())?;
    let mut meta = TableSidecar::for_probability(table);
    if let Some(x) = extra {
        meta.basis_labels = x.basis_labels.clone();
        meta.block_alignment = x.block_alignment.clone();
    }
    meta.write(&sidecar_path(path))
}

pub fn read_probability_table(path: &Path) -> Result<(ProbabilityTable, TableSidecar)> {
    let meta = TableSidecar::read(&sidecar_path(path))?;
    if meta.kind != "probability" {
        return Err(Error::Format(format!(
            "sidecar kind is '{}', expected 'probability'",
            meta.kind
        )));
    }
    let values = read_rows::<f64>(path, &meta)?;
    Ok((ProbabilityTable::new(values)?, meta))
}

pub fn write_count_table(path: &Path, table: &CountTable, extra: Option<&TableSidecar>) -> Result<()> {
    write_rows(path, &table.counts)?;
    let mut meta = TableSidecar::for_counts(table);
    if let Some(x) = extra {
        meta.basis_labels = x.basis_labels.clone();
        meta.block_alignment = x.block_alignment.clone();
    }
    meta.write(&sidecar_path(path))
}

pub fn read_count_table(path: &Path) -> Result<(CountTable, TableSidecar)> {
    let meta = TableSidecar::read(&sidecar_path(path))?;
    if meta.kind != "counts" {
        return Err(Error::Format(format!(
            "sidecar kind is '{}', expected 'counts'",
            meta.kind
        )));
    }
    let counts = read_rows::<u64>(path, &meta)?;
    let table = CountTable {
        counts,
        integration_time: meta.integration_time.unwrap_or(0.0),
        coincidence_window: meta.coincidence_window.unwrap_or(0.0),
        seed: meta.seed,
        generator: meta.generator.clone(),
    };
    Ok((table, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mub::{full_mub_set, Basis};
    use crate::protocol::{apply_noise, ideal_prob_table, sample_counts, CountSettings, NoiseModel};

    fn noisy_table() -> ProbabilityTable {
        let set = full_mub_set(3).unwrap();
        let bob: Vec<Basis> = set.bases().iter().map(Basis::conjugate).collect();
        let t = ideal_prob_table(set.bases(), &bob).unwrap();
        apply_noise(&t, &NoiseModel::uniform(0.137).unwrap()).unwrap()
    }

    #[test]
    fn probability_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let t = noisy_table();
        write_probability_table(&path, &t, None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("a,b,k,l,value\n"));
        let (back, meta) = read_probability_table(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(meta.kind, "probability");
    }

    #[test]
    fn counts_round_trip_with_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let s = CountSettings {
            pair_rate: 500.0,
            accidental_rate: 3.0,
            integration_time: 2.0,
            coincidence_window: 400e-12,
        };
        let c = sample_counts(&noisy_table(), &s, 17).unwrap();
        let extra = TableSidecar {
            block_alignment: vec![BlockAlignment::Row, BlockAlignment::Column],
            ..TableSidecar::for_counts(&c)
        };
        write_count_table(&path, &c, Some(&extra)).unwrap();
        let (back, meta) = read_count_table(&path).unwrap();
        assert_eq!(back, c);
        assert_eq!(meta.seed, Some(17));
        assert_eq!(meta.block_alignment.len(), 2);
        assert!(read_probability_table(&path).is_err());
    }

    #[test]
    fn missing_rows_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        write_probability_table(&path, &noisy_table(), None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        std::fs::write(&path, truncated).unwrap();
        assert!(matches!(read_probability_table(&path), Err(Error::Format(_))));
    }
}
