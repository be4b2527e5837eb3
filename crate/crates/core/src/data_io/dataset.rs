use crate::label::Label;
use crate::{Error, Result};

/// Dense row-major feature matrix with column names.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    names: Vec<String>,
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let d = names.len();
        if d == 0 {
            return Err(Error::InvalidArgument("no feature columns".into()));
        }
        if values.len() % d != 0 {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: values.len() % d,
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite feature value at row {}, column {}",
                pos / d + 1,
                pos % d + 1
            )));
        }
        Ok(Self {
            n: values.len() / d,
            d,
            names,
            values,
        })
    }

    /// Table with generated column names `x1..xD`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Self::new((1..=d).map(|i| format!("x{i}")).collect(), rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.d)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.d + j]
    }
}

/// Labelled samples: features plus one label in `1..=k` per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: FeatureTable,
    label_name: String,
    labels: Vec<Label>,
    k: usize,
}

impl Dataset {
    pub fn new(
        features: FeatureTable,
        label_name: impl Into<String>,
        labels: Vec<Label>,
        k: usize,
    ) -> Result<Self> {
        if features.n() == 0 {
            return Err(Error::EmptyData);
        }
        if labels.len() != features.n() {
            return Err(Error::DimensionMismatch {
                expected: features.n(),
                found: labels.len(),
            });
        }
        if k < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 classes, got {k}"
            )));
        }
        for l in &labels {
            l.check(k)?;
        }
        Ok(Self {
            features,
            label_name: label_name.into(),
            labels,
            k,
        })
    }

    /// Convenience constructor from raw rows and one-based labels.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[usize], k: usize) -> Result<Self> {
        let labels = labels
            .iter()
            .map(|&v| Label::new(v).ok_or(Error::LabelOutOfRange { label: v, k }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(FeatureTable::from_rows(rows)?, "label", labels, k)
    }

    pub fn n(&self) -> usize {
        self.features.n()
    }

    pub fn d(&self) -> usize {
        self.features.d()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn features(&self) -> &FeatureTable {
        &self.features
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Number of samples per class, indexed by zero-based label position.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order. Keeps `k`.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.d());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(
            FeatureTable::new(self.features.names.clone(), values)?,
            self.label_name.clone(),
            labels,
            self.k,
        )
    }
}
