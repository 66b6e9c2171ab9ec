use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{feature_line, meta_text, DatasetMeta, EDGES_FILE, FEATURES_FILE, LABELS_FILE, META_FILE};
use crate::error::{Error, Result};

/// What a content/cites conversion produced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionLog {
    pub nodes: usize,
    pub edges: usize,
    /// Cites lines naming an id absent from the content file.
    pub dropped_edges: usize,
    pub features: usize,
    /// Label strings in class-index order.
    pub classes: Vec<String>,
}

/// Converts whitespace-separated `<id> <f_1..f_d> <label>` content lines and
/// `<id> <id>` cites lines into a dataset directory. Node ids follow first
/// appearance in the content file; class indices follow sorted label order.
/// Nothing is written unless both inputs parse.
pub fn convert_content_cites(content: &Path, cites: &Path, out_dir: &Path, name: &str) -> Result<ConversionLog> {
    let content_text = fs::read_to_string(content).map_err(|e| Error::io(content, e))?;
    let cites_text = fs::read_to_string(cites).map_err(|e| Error::io(cites, e))?;

    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut rows: Vec<(Vec<f64>, &str)> = Vec::new();
    let mut width = None;
    for (i, line) in content_text.lines().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let line_no = i + 1;
        if tokens.len() < 3 {
            return Err(Error::parse(content, line_no, "expected an id, at least one feature and a label"));
        }
        let d = tokens.len() - 2;
        if *width.get_or_insert(d) != d {
            return Err(Error::parse(
                content,
                line_no,
                format!("{d} features where earlier lines have {}", width.unwrap_or(d)),
            ));
        }
        let mut values = Vec::with_capacity(d);
        for t in &tokens[1..=d] {
            match t.parse::<f64>() {
                Ok(x) if x.is_finite() => values.push(x),
                _ => return Err(Error::parse(content, line_no, format!("cannot parse feature value `{t}`"))),
            }
        }
        if ids.insert(tokens[0], rows.len()).is_some() {
            return Err(Error::parse(content, line_no, format!("id `{}` listed twice", tokens[0])));
        }
        rows.push((values, tokens[d + 1]));
    }
    let Some(d) = width else {
        return Err(Error::parse(content, 0, "no content lines"));
    };

    let mut edges = Vec::new();
    let mut dropped = 0;
    for (i, line) in cites_text.lines().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            [a, b] => match (ids.get(a), ids.get(b)) {
                (Some(&u), Some(&v)) => edges.push((u, v)),
                _ => dropped += 1,
            },
            _ => return Err(Error::parse(cites, i + 1, format!("expected 2 ids, found {}", tokens.len()))),
        }
    }

    let classes: Vec<String> = rows.iter().map(|r| r.1.to_owned()).collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(Error::parse(content, 0, "need at least 2 distinct labels"));
    }
    let class_of: HashMap<&str, usize> = classes.iter().enumerate().map(|(c, s)| (s.as_str(), c)).collect();

    let mut features = String::new();
    let mut labels = String::new();
    for (i, (values, label)) in rows.iter().enumerate() {
        feature_line(&mut features, i, values);
        writeln!(labels, "{i}\t{}", class_of[label]).expect("string write");
    }
    let mut edge_text = String::new();
    for (u, v) in &edges {
        writeln!(edge_text, "{u}\t{v}").expect("string write");
    }
    let meta = DatasetMeta {
        name: name.to_owned(),
        classes: classes.len(),
        features: d,
    };

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for (file, text) in [
        (META_FILE, meta_text(&meta)),
        (FEATURES_FILE, features),
        (LABELS_FILE, labels),
        (EDGES_FILE, edge_text),
    ] {
        let path = out_dir.join(file);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    let log = ConversionLog {
        nodes: rows.len(),
        edges: edges.len(),
        dropped_edges: dropped,
        features: d,
        classes,
    };
    log::info!(
        "converted {} nodes, {} edges, {} dropped cites lines",
        log.nodes,
        log.edges,
        log.dropped_edges
    );
    Ok(log)
}
