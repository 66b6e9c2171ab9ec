use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{CsrGraph, LabeledDataset, SplitSource, Splits};
use crate::tensor::{SeededRng, Tensor};

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.tsv";
pub const LABELS_FILE: &str = "labels.tsv";
pub const SPLITS_FILE: &str = "splits.tsv";
pub const META_FILE: &str = "meta.tsv";

/// Contents of `meta.tsv`: `name`, `classes` and `features` as `key\tvalue` lines.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetMeta {
    pub name: String,
    pub classes: usize,
    pub features: usize,
}

/// One file's non-blank lines with 1-based line numbers, split on tabs.
struct TsvFile {
    path: PathBuf,
    rows: Vec<(usize, Vec<String>)>,
}

impl TsvFile {
    fn read(path: PathBuf) -> Result<Self> {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self::parse(path, &text))
    }

    fn parse(path: PathBuf, text: &str) -> Self {
        let rows = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r').split('\t').map(str::to_owned).collect()))
            .collect();
        Self { path, rows }
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::parse(&self.path, line, msg)
    }

    fn field<T: FromStr>(&self, line: usize, value: &str, what: &str) -> Result<T> {
        value
            .trim()
            .parse()
            .map_err(|_| self.err(line, format!("cannot parse {what} from `{value}`")))
    }

    fn columns<'a>(&self, line: usize, cols: &'a [String], n: usize) -> Result<&'a [String]> {
        if cols.len() != n {
            return Err(self.err(line, format!("expected {n} columns, found {}", cols.len())));
        }
        Ok(cols)
    }

    /// Node id in column 0, checked against `0..n` and for repeats.
    fn node_id(&self, line: usize, value: &str, n: usize, seen: &mut [bool]) -> Result<usize> {
        let id: usize = self.field(line, value, "node id")?;
        if id >= n {
            return Err(self.err(line, format!("node id {id} outside 0..{n}")));
        }
        if std::mem::replace(&mut seen[id], true) {
            return Err(self.err(line, format!("node id {id} listed twice")));
        }
        Ok(id)
    }

    fn last_line(&self) -> usize {
        self.rows.last().map_or(0, |r| r.0)
    }

    fn require_all(&self, seen: &[bool]) -> Result<()> {
        match seen.iter().position(|&s| !s) {
            Some(id) => Err(self.err(self.last_line(), format!("node {id} has no entry"))),
            None => Ok(()),
        }
    }
}

fn parse_meta(file: &TsvFile) -> Result<DatasetMeta> {
    let (mut name, mut classes, mut features) = (None, None, None);
    for (line, cols) in &file.rows {
        let cols = file.columns(*line, cols, 2)?;
        match cols[0].trim() {
            "name" => name = Some(cols[1].trim().to_owned()),
            "classes" => classes = Some(file.field::<usize>(*line, &cols[1], "class count")?),
            "features" => features = Some(file.field::<usize>(*line, &cols[1], "feature width")?),
            other => return Err(file.err(*line, format!("unknown key `{other}`"))),
        }
    }
    let missing = |key: &str| file.err(file.last_line(), format!("missing key `{key}`"));
    let meta = DatasetMeta {
        name: name.ok_or_else(|| missing("name"))?,
        classes: classes.ok_or_else(|| missing("classes"))?,
        features: features.ok_or_else(|| missing("features"))?,
    };
    if meta.classes < 2 || meta.features == 0 {
        return Err(file.err(file.last_line(), "need at least 2 classes and 1 feature"));
    }
    Ok(meta)
}

fn parse_features(file: &TsvFile, d: usize) -> Result<Tensor> {
    let n = file.rows.len();
    if n == 0 {
        return Err(file.err(0, "no feature rows"));
    }
    let mut seen = vec![false; n];
    let mut data = vec![0.0; n * d];
    for (line, cols) in &file.rows {
        let cols = file.columns(*line, cols, d + 1)?;
        let id = file.node_id(*line, &cols[0], n, &mut seen)?;
        for (j, v) in cols[1..].iter().enumerate() {
            let x: f64 = file.field(*line, v, "feature value")?;
            if !x.is_finite() {
                return Err(file.err(*line, format!("non-finite feature value `{v}`")));
            }
            data[id * d + j] = x;
        }
    }
    Tensor::matrix(n, d, data)
}

fn parse_labels(file: &TsvFile, n: usize, classes: usize) -> Result<Vec<usize>> {
    let mut seen = vec![false; n];
    let mut labels = vec![0; n];
    for (line, cols) in &file.rows {
        let cols = file.columns(*line, cols, 2)?;
        let id = file.node_id(*line, &cols[0], n, &mut seen)?;
        let c: usize = file.field(*line, &cols[1], "class")?;
        if c >= classes {
            return Err(file.err(*line, format!("class {c} >= {classes}")));
        }
        labels[id] = c;
    }
    file.require_all(&seen)?;
    Ok(labels)
}

fn parse_edges(file: &TsvFile, n: usize) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::with_capacity(file.rows.len());
    for (line, cols) in &file.rows {
        let cols = file.columns(*line, cols, 2)?;
        let u: usize = file.field(*line, &cols[0], "node id")?;
        let v: usize = file.field(*line, &cols[1], "node id")?;
        if u >= n || v >= n {
            return Err(file.err(*line, format!("edge ({u}, {v}) references a node outside 0..{n}")));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

fn parse_splits(file: &TsvFile, n: usize) -> Result<Splits> {
    let mut seen = vec![false; n];
    let mut splits = Splits::default();
    for (line, cols) in &file.rows {
        let cols = file.columns(*line, cols, 2)?;
        let id = file.node_id(*line, &cols[0], n, &mut seen)?;
        match cols[1].trim() {
            "train" => splits.train.push(id),
            "val" => splits.val.push(id),
            "test" => splits.test.push(id),
            other => return Err(file.err(*line, format!("unknown split `{other}`"))),
        }
    }
    for (name, ids) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
        if ids.is_empty() {
            return Err(file.err(file.last_line(), format!("{name} split is empty")));
        }
    }
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();
    Ok(splits)
}

/// Loads a dataset directory. Without `splits.tsv`, a stratified 60/20/20
/// split is drawn from `split_seed`.
pub fn load_dataset(dir: &Path, split_seed: u64) -> Result<LabeledDataset> {
    let meta = parse_meta(&TsvFile::read(dir.join(META_FILE))?)?;
    let features = parse_features(&TsvFile::read(dir.join(FEATURES_FILE))?, meta.features)?;
    let n = features.rows();
    let labels = parse_labels(&TsvFile::read(dir.join(LABELS_FILE))?, n, meta.classes)?;
    let edges = parse_edges(&TsvFile::read(dir.join(EDGES_FILE))?, n)?;
    let splits_path = dir.join(SPLITS_FILE);
    let (splits, source) = if splits_path.exists() {
        (parse_splits(&TsvFile::read(splits_path)?, n)?, SplitSource::File)
    } else {
        let mut rng = SeededRng::new(split_seed);
        (Splits::stratified(&labels, meta.classes, &mut rng), SplitSource::Seeded(split_seed))
    };
    let graph = CsrGraph::from_edges(&edges, n)?;
    LabeledDataset::new(meta.name, graph, features, labels, meta.classes, splits, source)
}

fn write(path: PathBuf, text: String) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub(crate) fn meta_text(meta: &DatasetMeta) -> String {
    format!("name\t{}\nclasses\t{}\nfeatures\t{}\n", meta.name, meta.classes, meta.features)
}

pub(crate) fn feature_line(out: &mut String, id: usize, row: &[f64]) {
    write!(out, "{id}").expect("string write");
    for x in row {
        write!(out, "\t{x}").expect("string write");
    }
    out.push('\n');
}

/// Writes every file of the directory format, splits included.
pub fn save_dataset(dataset: &LabeledDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = DatasetMeta {
        name: dataset.name.clone(),
        classes: dataset.num_classes,
        features: dataset.dim(),
    };
    let mut features = String::new();
    let mut labels = String::new();
    for i in 0..dataset.n_nodes() {
        feature_line(&mut features, i, dataset.features.row(i));
        writeln!(labels, "{i}\t{}", dataset.labels[i]).expect("string write");
    }
    let mut edges = String::new();
    for (u, v) in dataset.graph.edges().filter(|(u, v)| u < v) {
        writeln!(edges, "{u}\t{v}").expect("string write");
    }
    write(dir.join(META_FILE), meta_text(&meta))?;
    write(dir.join(FEATURES_FILE), features)?;
    write(dir.join(LABELS_FILE), labels)?;
    write(dir.join(EDGES_FILE), edges)?;
    let mut splits = String::new();
    let s = &dataset.splits;
    for (name, ids) in [("train", &s.train), ("val", &s.val), ("test", &s.test)] {
        for i in ids {
            writeln!(splits, "{i}\t{name}").expect("string write");
        }
    }
    write(dir.join(SPLITS_FILE), splits)
}
