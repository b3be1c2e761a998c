//! Label vocabularies, semantic tables, feature datasets and zero-shot splits.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{l2_normalize_rows, Mat};
use crate::rng::seeded_rng;

/// Index of a class in a [`Vocab`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelId(pub usize);

impl LabelId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered set of unique label strings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    labels: Vec<String>,
    index: HashMap<String, LabelId>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails on the first duplicate, returning its position.
    pub fn from_labels<I, S>(labels: I) -> std::result::Result<Self, usize>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::new();
        for (pos, label) in labels.into_iter().enumerate() {
            if vocab.insert(label.into()).1 {
                return Err(pos);
            }
        }
        Ok(vocab)
    }

    /// Inserts a label if absent. Returns its id and whether it already existed.
    pub fn insert(&mut self, label: String) -> (LabelId, bool) {
        if let Some(&id) = self.index.get(&label) {
            return (id, true);
        }
        let id = LabelId(self.labels.len());
        self.index.insert(label.clone(), id);
        self.labels.push(label);
        (id, false)
    }

    pub fn get(&self, label: &str) -> Option<LabelId> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: LabelId) -> &str {
        &self.labels[id.0]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = LabelId> {
        (0..self.labels.len()).map(LabelId)
    }

    pub fn names(&self, ids: &[LabelId]) -> Vec<String> {
        ids.iter().map(|&id| self.label(id).to_owned()).collect()
    }
}

/// Label to semantic vector lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticTable {
    pub vocab: Vocab,
    pub dim: usize,
    /// One row per vocab entry.
    pub vectors: Mat,
}

impl SemanticTable {
    pub fn new(vocab: Vocab, vectors: Mat) -> Result<Self> {
        if vectors.nrows() != vocab.len() {
            return Err(Error::shape(format!(
                "{} labels but {} vectors",
                vocab.len(),
                vectors.nrows()
            )));
        }
        if vectors.ncols() == 0 {
            return Err(Error::invalid("semantic dimension must be >= 1"));
        }
        Ok(Self {
            dim: vectors.ncols(),
            vocab,
            vectors,
        })
    }

    pub fn vector(&self, label: &str) -> Option<nalgebra::DVector<f64>> {
        self.vocab
            .get(label)
            .map(|id| self.vectors.row(id.0).transpose())
    }

    /// Parses the word2vec text format: a `count dim` header, then one
    /// `token v1 .. v_dim` line per entry.
    pub fn parse_word2vec(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        let (_, header) = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or_else(|| Error::parse(1, "missing `count dim` header"))?;
        let header_fields: Vec<&str> = header.split_ascii_whitespace().collect();
        let parse_count = |s: &str| s.parse::<usize>().ok();
        let (count, dim) = match header_fields.as_slice() {
            [c, d] => match (parse_count(c), parse_count(d)) {
                (Some(c), Some(d)) if d > 0 => (c, d),
                _ => return Err(Error::parse(1, format!("malformed header `{header}`"))),
            },
            _ => return Err(Error::parse(1, format!("malformed header `{header}`"))),
        };

        let mut vocab = Vocab::new();
        let mut values = Vec::with_capacity(count * dim);
        let mut last_line = 1;
        for (line_no, line) in lines {
            last_line = line_no;
            if line.trim().is_empty() {
                continue;
            }
            if vocab.len() == count {
                return Err(Error::parse(
                    line_no,
                    format!("header declares {count} rows but more follow"),
                ));
            }
            let mut fields = line.split_ascii_whitespace();
            let token = fields.next().expect("non-blank line has a token");
            let start = values.len();
            for field in fields {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("non-numeric value `{field}`")))?;
                if !v.is_finite() {
                    return Err(Error::parse(line_no, format!("non-finite value `{field}`")));
                }
                values.push(v);
            }
            let got = values.len() - start;
            if got != dim {
                return Err(Error::parse(
                    line_no,
                    format!("expected {dim} values, found {got}"),
                ));
            }
            if vocab.insert(token.to_owned()).1 {
                return Err(Error::parse(line_no, format!("duplicate token `{token}`")));
            }
        }
        if vocab.len() != count {
            return Err(Error::parse(
                last_line,
                format!("header declares {count} rows, found {}", vocab.len()),
            ));
        }
        let vectors = Mat::from_row_slice(count, dim, &values);
        Ok(Self {
            vocab,
            dim,
            vectors,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse_word2vec(&text)
    }

    /// Word2vec text with every value at 17 significant digits.
    pub fn to_word2vec(&self) -> String {
        let mut out = format!("{} {}\n", self.vocab.len(), self.dim);
        for (i, label) in self.vocab.labels().iter().enumerate() {
            out.push_str(label);
            for v in self.vectors.row(i).iter() {
                let _ = write!(out, " {}", fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_word2vec())?;
        Ok(())
    }
}

/// Formats with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads a word2vec text file.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<SemanticTable> {
    SemanticTable::load(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub features: Vec<f64>,
    pub label: LabelId,
}

/// Labelled feature vectors. Label ids index `classes`, which lists every
/// class in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub classes: Vocab,
    pub dim: usize,
    pub instances: Vec<Instance>,
}

impl FeatureDataset {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Parses `label,f0,f1,...` CSV and checks every label against `table`.
    pub fn parse_csv(text: &str, table: &SemanticTable) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(1, e.to_string()))?
            .clone();
        if headers.get(0).map(str::trim) != Some("label") {
            return Err(Error::parse(1, "first column must be named `label`"));
        }
        let dim = headers.len() - 1;
        if dim == 0 {
            return Err(Error::parse(1, "no feature columns"));
        }

        let mut classes = Vocab::new();
        let mut instances = Vec::new();
        let mut missing = BTreeSet::new();
        for (row, record) in reader.records().enumerate() {
            let line = row + 2;
            let record = record.map_err(|e| Error::parse(line, e.to_string()))?;
            if record.len() != dim + 1 {
                return Err(Error::parse(
                    line,
                    format!("expected {} fields, found {}", dim + 1, record.len()),
                ));
            }
            let label = record[0].trim();
            if table.vocab.get(label).is_none() {
                missing.insert(label.to_owned());
                continue;
            }
            let features = record
                .iter()
                .skip(1)
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::parse(line, format!("non-numeric feature `{f}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            let (id, _) = classes.insert(label.to_owned());
            instances.push(Instance {
                features,
                label: id,
            });
        }
        if !missing.is_empty() {
            return Err(Error::Coverage(missing.into_iter().collect()));
        }
        if instances.is_empty() {
            return Err(Error::EmptyDataset(
                "dataset has a header but no rows".into(),
            ));
        }
        Ok(Self {
            classes,
            dim,
            instances,
        })
    }

    pub fn load(path: impl AsRef<Path>, table: &SemanticTable) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse_csv(&text, table)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label");
        for j in 0..self.dim {
            let _ = write!(out, ",f{j}");
        }
        out.push('\n');
        for inst in &self.instances {
            out.push_str(self.classes.label(inst.label));
            for v in &inst.features {
                let _ = write!(out, ",{}", fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Semantic vectors for every class, rows in class-id order.
    pub fn class_semantics(&self, table: &SemanticTable) -> Result<Mat> {
        let mut out = Mat::zeros(self.n_classes(), table.dim);
        let mut missing = Vec::new();
        for (i, label) in self.classes.labels().iter().enumerate() {
            match table.vocab.get(label) {
                Some(id) => out.row_mut(i).copy_from(&table.vectors.row(id.0)),
                None => missing.push(label.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::Coverage(missing));
        }
        Ok(out)
    }

    /// Features of the selected instances stacked as rows.
    pub fn feature_matrix<'a>(&self, instances: impl IntoIterator<Item = &'a Instance>) -> Mat {
        let rows: Vec<&Instance> = instances.into_iter().collect();
        let mut m = Mat::zeros(rows.len(), self.dim);
        for (i, inst) in rows.iter().enumerate() {
            m.row_mut(i).copy_from_slice(&inst.features);
        }
        m
    }

    pub fn instances_with<'a>(
        &'a self,
        labels: &'a BTreeSet<LabelId>,
    ) -> impl Iterator<Item = &'a Instance> + 'a {
        self.instances
            .iter()
            .filter(move |inst| labels.contains(&inst.label))
    }

    /// Copy with per-column zero-mean, unit-variance scaling estimated on
    /// instances whose label is in `fit_on`. Constant columns are only centered.
    pub fn standardized(&self, fit_on: &BTreeSet<LabelId>) -> Result<Self> {
        let fit: Vec<&Instance> = self.instances_with(fit_on).collect();
        if fit.is_empty() {
            return Err(Error::MissingData(
                "no instances to estimate feature scaling".into(),
            ));
        }
        let n = fit.len() as f64;
        let mut mean = vec![0.0; self.dim];
        for inst in &fit {
            for (m, v) in mean.iter_mut().zip(&inst.features) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; self.dim];
        for inst in &fit {
            for ((s, v), m) in var.iter_mut().zip(&inst.features).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale: Vec<f64> = var
            .iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        let instances = self
            .instances
            .iter()
            .map(|inst| Instance {
                features: inst
                    .features
                    .iter()
                    .zip(&mean)
                    .zip(&scale)
                    .map(|((v, m), s)| (v - m) / s)
                    .collect(),
                label: inst.label,
            })
            .collect();
        Ok(Self {
            classes: self.classes.clone(),
            dim: self.dim,
            instances,
        })
    }
}

/// Reads a dataset CSV.
pub fn load_dataset(path: impl AsRef<Path>, table: &SemanticTable) -> Result<FeatureDataset> {
    FeatureDataset::load(path, table)
}

/// Partition of the classes into seen and unseen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub unseen: BTreeSet<LabelId>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(unseen: BTreeSet<LabelId>, seed: u64, n_classes: usize) -> Result<Self> {
        if unseen.is_empty() {
            return Err(Error::invalid("split needs at least one unseen label"));
        }
        if unseen.len() >= n_classes {
            return Err(Error::invalid("split must leave at least one seen label"));
        }
        if let Some(bad) = unseen.iter().find(|id| id.0 >= n_classes) {
            return Err(Error::invalid(format!("label id {} out of range", bad.0)));
        }
        Ok(Self { unseen, seed })
    }

    pub fn seen(&self, n_classes: usize) -> BTreeSet<LabelId> {
        (0..n_classes)
            .map(LabelId)
            .filter(|id| !self.unseen.contains(id))
            .collect()
    }

    pub fn to_file(&self, classes: &Vocab) -> SplitFile {
        SplitFile {
            seed: self.seed,
            unseen: self
                .unseen
                .iter()
                .map(|&id| classes.label(id).to_owned())
                .collect(),
        }
    }

    pub fn from_file(file: &SplitFile, classes: &Vocab) -> Result<Self> {
        let mut unseen = BTreeSet::new();
        let mut missing = Vec::new();
        for label in &file.unseen {
            match classes.get(label) {
                Some(id) => {
                    unseen.insert(id);
                }
                None => missing.push(label.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::Coverage(missing));
        }
        Self::new(unseen, file.seed, classes.len())
    }
}

/// On-disk form of a split: label strings rather than ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitFile {
    pub seed: u64,
    pub unseen: Vec<String>,
}

/// Samples `n_unseen` classes uniformly without replacement.
pub fn make_split(ds: &FeatureDataset, n_unseen: usize, seed: u64) -> Result<SplitSpec> {
    let n = ds.n_classes();
    if n_unseen == 0 || n_unseen >= n {
        return Err(Error::invalid(format!(
            "n_unseen must be in 1..{n} for {n} labels, got {n_unseen}"
        )));
    }
    let unseen = sample_labels(n, n_unseen, seed);
    SplitSpec::new(unseen, seed, n)
}

pub(crate) fn sample_labels(n: usize, k: usize, seed: u64) -> BTreeSet<LabelId> {
    let mut rng = seeded_rng(seed);
    rand::seq::index::sample(&mut rng, n, k)
        .into_iter()
        .map(LabelId)
        .collect()
}

/// Per-label mean feature vector, one row per requested label.
pub fn average_by_label(ds: &FeatureDataset, labels: &[LabelId]) -> Result<Mat> {
    let mut sums = Mat::zeros(labels.len(), ds.dim);
    let mut counts = vec![0usize; labels.len()];
    let mut slot = HashMap::with_capacity(labels.len());
    for (row, &id) in labels.iter().enumerate() {
        slot.entry(id).or_insert_with(Vec::new).push(row);
    }
    for inst in &ds.instances {
        if let Some(rows) = slot.get(&inst.label) {
            for &row in rows {
                for (acc, v) in sums.row_mut(row).iter_mut().zip(&inst.features) {
                    *acc += v;
                }
                counts[row] += 1;
            }
        }
    }
    if let Some(row) = counts.iter().position(|&c| c == 0) {
        let id = labels[row];
        let name = ds
            .classes
            .labels()
            .get(id.0)
            .cloned()
            .unwrap_or_else(|| format!("#{}", id.0));
        return Err(Error::MissingData(format!(
            "label `{name}` has no instances"
        )));
    }
    for (row, &c) in counts.iter().enumerate() {
        sums.row_mut(row).unscale_mut(c as f64);
    }
    Ok(sums)
}

/// Unit-normalized semantic rows. Zero rows are left in place.
pub fn normalized_semantics(class_semantics: &Mat) -> Mat {
    l2_normalize_rows(class_semantics).mat
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_ab() -> SemanticTable {
        SemanticTable::parse_word2vec("2 3\na 1 0 0\nb 0 1 0").unwrap()
    }

    #[test]
    fn parse_small_table() {
        let t = table_ab();
        assert_eq!(t.vocab.labels(), ["a", "b"]);
        assert_eq!(t.dim, 3);
        assert_eq!(t.vectors[(1, 1)], 1.0);
    }

    #[test]
    fn crlf_and_trailing_blank_lines() {
        let t = SemanticTable::parse_word2vec("2 2\r\nx 1 2\r\ny 3 4\r\n\r\n").unwrap();
        assert_eq!(t.vocab.labels(), ["x", "y"]);
        assert_eq!(t.vectors[(1, 0)], 3.0);
    }

    #[test]
    fn table_errors_name_lines() {
        let err = SemanticTable::parse_word2vec("3 3\na 1 0 0\nb 0 1 0").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");

        let err = SemanticTable::parse_word2vec("2 3\na 1 0 0\na 0 1 0").unwrap_err();
        assert_eq!(err, Error::parse(3, "duplicate token `a`"));

        let err = SemanticTable::parse_word2vec("2 3\na 1 0\nb 0 1 0").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

        let err = SemanticTable::parse_word2vec("1 2\na 1 x").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

        let err = SemanticTable::parse_word2vec("two 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");

        let err = SemanticTable::parse_word2vec("1 2\na 1 2\nb 3 4").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn load_dataset_cases() {
        let t = table_ab();
        let ds = FeatureDataset::parse_csv("label,f0,f1\na,1.5,2\nb,0,-1\n", &t).unwrap();
        assert_eq!(ds.instances.len(), 2);
        assert_eq!(ds.dim, 2);
        assert_eq!(ds.classes.labels(), ["a", "b"]);

        let err = FeatureDataset::parse_csv("label,f0\na,1\nzzz,2\n", &t).unwrap_err();
        assert_eq!(err, Error::Coverage(vec!["zzz".into()]));

        let err = FeatureDataset::parse_csv("label,f0,f1\n", &t).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset(_)));

        let err = FeatureDataset::parse_csv("label,f0,f1\na,1,2\nb,1\n", &t).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");

        let err = FeatureDataset::parse_csv("name,f0\na,1\n", &t).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn csv_round_trip() {
        let t = table_ab();
        let ds = FeatureDataset::parse_csv("label,f0,f1\na,0.1,2e-3\nb,1e300,-7\n", &t).unwrap();
        let back = FeatureDataset::parse_csv(&ds.to_csv(), &t).unwrap();
        assert_eq!(ds, back);
    }

    fn dataset_with_classes(n: usize, per_class: usize) -> (FeatureDataset, SemanticTable) {
        let labels: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let vocab = Vocab::from_labels(labels.clone()).unwrap();
        let table = SemanticTable::new(vocab.clone(), Mat::identity(n, n)).unwrap();
        let instances = (0..n)
            .flat_map(|c| {
                (0..per_class).map(move |k| Instance {
                    features: vec![c as f64, k as f64],
                    label: LabelId(c),
                })
            })
            .collect();
        (
            FeatureDataset {
                classes: vocab,
                dim: 2,
                instances,
            },
            table,
        )
    }

    #[test]
    fn split_is_deterministic() {
        let (ds, _) = dataset_with_classes(60, 1);
        let a = make_split(&ds, 1, 7).unwrap();
        assert_eq!(a.unseen.len(), 1);
        assert_eq!(a, make_split(&ds, 1, 7).unwrap());
        assert!(matches!(
            make_split(&ds, 60, 7),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            make_split(&ds, 0, 7),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn split_at_large_label_count() {
        let (ds, _) = dataset_with_classes(5303, 1);
        let s = make_split(&ds, 100, 1).unwrap();
        assert_eq!(s.unseen.len(), 100);
        assert_eq!(s.seen(ds.n_classes()).len(), 5203);
    }

    #[test]
    fn split_is_roughly_uniform() {
        let (ds, _) = dataset_with_classes(10, 1);
        let mut hits = [0usize; 10];
        let draws = 2000;
        for seed in 0..draws {
            for id in make_split(&ds, 3, seed).unwrap().unseen {
                hits[id.0] += 1;
            }
        }
        for h in hits {
            let freq = h as f64 / draws as f64;
            assert!((freq - 0.3).abs() <= 0.05, "{freq}");
        }
    }

    #[test]
    fn split_file_round_trip() {
        let (ds, _) = dataset_with_classes(6, 1);
        let s = make_split(&ds, 2, 3).unwrap();
        let file = s.to_file(&ds.classes);
        let json = serde_json::to_string(&file).unwrap();
        let back: SplitFile = serde_json::from_str(&json).unwrap();
        assert_eq!(SplitSpec::from_file(&back, &ds.classes).unwrap(), s);
    }

    #[test]
    fn averages() {
        let (ds, _) = dataset_with_classes(3, 1);
        let m = average_by_label(&ds, &[LabelId(2), LabelId(0)]).unwrap();
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), vec![2.0, 0.0]);

        let t = table_ab();
        let ds = FeatureDataset::parse_csv("label,f0,f1\na,0,0\na,2,2\nb,5,5\n", &t).unwrap();
        let m = average_by_label(&ds, &[LabelId(0)]).unwrap();
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0]);

        let (ds, _) = dataset_with_classes(60, 6);
        let ids: Vec<LabelId> = ds.classes.ids().collect();
        assert_eq!(average_by_label(&ds, &ids).unwrap().shape(), (60, 2));

        let err = average_by_label(&ds, &[LabelId(70)]).unwrap_err();
        assert!(matches!(err, Error::MissingData(_)));
    }

    #[test]
    fn standardization_uses_fit_labels() {
        let (ds, _) = dataset_with_classes(4, 5);
        let fit: BTreeSet<LabelId> = [LabelId(0), LabelId(1), LabelId(2)].into();
        let std = ds.standardized(&fit).unwrap();
        let x = std.feature_matrix(std.instances_with(&fit));
        for j in 0..x.ncols() {
            let col = x.column(j);
            assert!(col.mean().abs() < 1e-12);
            assert!((col.variance() - 1.0).abs() < 1e-12);
        }
    }
}
