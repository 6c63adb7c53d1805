use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clusternet::{argmax, ClusterNet, GateMode};
use crate::datasets::NormalizedDataset;
use crate::error::{Error, Result};

/// One traced sample. `real` and `predicted` are in raw units; `f` and `c`
/// stay on the normalized scale the networks see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub id: usize,
    pub allocation_value: Option<f64>,
    pub real: Vec<f64>,
    pub predicted: Vec<f64>,
    pub f: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub activated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationTrace {
    pub allocation_column: Option<String>,
    pub target_names: Vec<String>,
    pub q: usize,
    pub rows: Vec<TraceRow>,
}

/// Share of a group's rows that activate its most common cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dominance {
    pub group: usize,
    pub cluster: usize,
    pub fraction: f64,
    pub rows: usize,
}

/// Traces dataset rows `ids` through `model`. `allocation_dimension` names
/// the input column reported next to each id.
pub fn activation_trace(
    model: &ClusterNet,
    data: &NormalizedDataset,
    ids: &[usize],
    allocation_dimension: Option<usize>,
    mode: GateMode,
) -> Result<ActivationTrace> {
    if model.input_width() != data.input_width() || model.output_width() != data.target_width() {
        return Err(Error::invalid("model and dataset widths differ"));
    }
    if let Some(d) = allocation_dimension {
        if d >= data.input_width() {
            return Err(Error::invalid(format!(
                "allocation dimension {d} out of range"
            )));
        }
    }
    if let Some(&bad) = ids.iter().find(|&&i| i >= data.len()) {
        return Err(Error::invalid(format!("row {bad} out of range")));
    }
    let rows = ids
        .par_iter()
        .map(|&id| {
            let x = data.inputs.row(id).to_vec();
            let out = model.forward(&x)?;
            let activated = argmax(&out.c);
            let normalized = match mode {
                GateMode::Soft => out.y.clone(),
                GateMode::Hard => out.f[activated].clone(),
            };
            let predicted = normalized
                .iter()
                .zip(&data.target_transforms)
                .map(|(&z, t)| t.denormalize(z))
                .collect();
            Ok(TraceRow {
                id,
                allocation_value: allocation_dimension.map(|d| data.raw.inputs[[id, d]]),
                real: data.raw.targets.row(id).to_vec(),
                predicted,
                f: out.f,
                c: out.c,
                activated,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ActivationTrace {
        allocation_column: allocation_dimension.map(|d| data.raw.input_names[d].clone()),
        target_names: data.raw.target_names.clone(),
        q: model.q(),
        rows,
    })
}

impl ActivationTrace {
    /// For each distinct group label, the dominant activated cluster.
    /// `groups[i]` is the group of `rows[i]`.
    pub fn dominance(&self, groups: &[usize]) -> Result<Vec<Dominance>> {
        if groups.len() != self.rows.len() {
            return Err(Error::invalid("one group label per traced row required"));
        }
        let n_groups = groups.iter().max().map_or(0, |g| g + 1);
        let mut counts = vec![vec![0usize; self.q]; n_groups];
        for (row, &g) in self.rows.iter().zip(groups) {
            counts[g][row.activated] += 1;
        }
        Ok(counts
            .into_iter()
            .enumerate()
            .filter_map(|(group, c)| {
                let total: usize = c.iter().sum();
                if total == 0 {
                    return None;
                }
                let cluster = (0..c.len()).fold(0, |b, j| if c[j] > c[b] { j } else { b });
                Some(Dominance {
                    group,
                    cluster,
                    fraction: c[cluster] as f64 / total as f64,
                    rows: total,
                })
            })
            .collect())
    }

    /// Header: `id, <allocation column>, real_<t>.., pred_<t>.., f<j>_<t>.., c<j>.., activated`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string()];
        if let Some(col) = &self.allocation_column {
            header.push(col.clone());
        }
        header.extend(self.target_names.iter().map(|t| format!("real_{t}")));
        header.extend(self.target_names.iter().map(|t| format!("pred_{t}")));
        for j in 0..self.q {
            header.extend(self.target_names.iter().map(|t| format!("f{j}_{t}")));
            header.push(format!("c{j}"));
        }
        header.push("activated".into());
        wtr.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.id.to_string()];
            if let Some(v) = row.allocation_value {
                rec.push(v.to_string());
            }
            rec.extend(row.real.iter().map(f64::to_string));
            rec.extend(row.predicted.iter().map(f64::to_string));
            for (fj, cj) in row.f.iter().zip(&row.c) {
                rec.extend(fj.iter().map(f64::to_string));
                rec.push(cj.to_string());
            }
            rec.push(row.activated.to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()
            .map_err(|e| Error::io("<activation trace>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}
