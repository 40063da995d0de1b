//! SWC morphology files: `id type x y z radius parent`, one node per line.
//!
//! Writers number nodes contiguously from 1 across all trees, give roots
//! type 1 (soma) and parent -1, and every other node type 0. Summary weights
//! go to a sidecar `id weight` table since SWC has no weight column.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{SkeletonTree, TreeNode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwcRecord {
    pub id: i64,
    pub kind: i32,
    pub position: [f64; 3],
    pub radius: f64,
    pub parent: i64,
}

pub fn parse_swc_records(text: &str) -> Result<Vec<SwcRecord>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 7 {
            return Err(Error::parse(
                ln + 1,
                format!("expected 7 fields, found {}", toks.len()),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            toks[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(ln + 1, format!("bad number `{}`", toks[i])))
        };
        let int = |i: usize| -> Result<i64> {
            toks[i]
                .parse::<i64>()
                .map_err(|_| Error::parse(ln + 1, format!("bad integer `{}`", toks[i])))
        };
        out.push(SwcRecord {
            id: int(0)?,
            kind: int(1)? as i32,
            position: [num(2)?, num(3)?, num(4)?],
            radius: num(5)?,
            parent: int(6)?,
        });
    }
    Ok(out)
}

/// Group SWC records into trees, one per root, in order of root appearance.
pub fn records_to_trees(records: &[SwcRecord]) -> Result<Vec<SkeletonTree>> {
    build_trees(records, None)
}

fn build_trees(
    records: &[SwcRecord],
    weights: Option<&HashMap<i64, f64>>,
) -> Result<Vec<SkeletonTree>> {
    let mut index = HashMap::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if index.insert(r.id, i).is_some() {
            return Err(Error::structure(format!("duplicate SWC id {}", r.id)));
        }
    }
    let parent: Vec<Option<usize>> = records
        .iter()
        .map(|r| {
            if r.parent < 0 {
                Ok(None)
            } else {
                index.get(&r.parent).copied().map(Some).ok_or_else(|| {
                    Error::structure(format!("node {} has unknown parent {}", r.id, r.parent))
                })
            }
        })
        .collect::<Result<_>>()?;

    // Resolve each record's root; detects cycles.
    let mut root_of = vec![usize::MAX; records.len()];
    for start in 0..records.len() {
        let mut path = Vec::new();
        let mut cur = start;
        while root_of[cur] == usize::MAX {
            path.push(cur);
            if path.len() > records.len() {
                return Err(Error::structure("SWC parent links contain a cycle"));
            }
            match parent[cur] {
                None => {
                    root_of[cur] = cur;
                    break;
                }
                Some(p) => cur = p,
            }
        }
        let r = root_of[cur];
        for p in path {
            root_of[p] = r;
        }
    }

    let roots: Vec<usize> = (0..records.len())
        .filter(|&i| parent[i].is_none())
        .collect();
    let mut trees = Vec::with_capacity(roots.len());
    for &r in &roots {
        let members: Vec<usize> = (0..records.len()).filter(|&i| root_of[i] == r).collect();
        let local: HashMap<usize, usize> =
            members.iter().enumerate().map(|(l, &g)| (g, l)).collect();
        let nodes = members
            .iter()
            .map(|&g| {
                let mut n = TreeNode::new(records[g].position, parent[g].map(|p| local[&p]));
                n.radius = records[g].radius;
                n.weight = weights
                    .and_then(|w| w.get(&records[g].id).copied())
                    .unwrap_or(0.0);
                n
            })
            .collect();
        trees.push(SkeletonTree::from_nodes(nodes)?.0);
    }
    Ok(trees)
}

pub fn parse_swc(text: &str) -> Result<Vec<SkeletonTree>> {
    records_to_trees(&parse_swc_records(text)?)
}

pub fn read_swc(path: impl AsRef<Path>) -> Result<Vec<SkeletonTree>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_swc(&text)
}

pub fn format_swc(trees: &[SkeletonTree]) -> String {
    let mut s = String::from("# id type x y z radius parent\n");
    let mut base = 0usize;
    for t in trees {
        for (i, n) in t.nodes().iter().enumerate() {
            let id = base + i + 1;
            let (kind, parent) = match n.parent {
                None => (1, -1i64),
                Some(p) => (0, (base + p + 1) as i64),
            };
            let [x, y, z] = n.position;
            writeln!(s, "{id} {kind} {x} {y} {z} {} {parent}", n.radius).unwrap();
        }
        base += t.len();
    }
    s
}

pub fn write_swc(trees: &[SkeletonTree], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_swc(trees)).map_err(|e| Error::io(path, e))
}

/// `id weight` table aligned with [`format_swc`] numbering.
pub fn format_weights(trees: &[SkeletonTree]) -> String {
    let mut s = String::from("# id weight\n");
    let mut id = 1usize;
    for t in trees {
        for n in t.nodes() {
            writeln!(s, "{id} {}", n.weight).unwrap();
            id += 1;
        }
    }
    s
}

pub fn write_weights(trees: &[SkeletonTree], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_weights(trees)).map_err(|e| Error::io(path, e))
}

/// Parse an `id weight` sidecar into a map.
pub fn parse_weights(text: &str) -> Result<HashMap<i64, f64>> {
    let mut out = HashMap::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(id), Some(w)) = (it.next(), it.next()) else {
            return Err(Error::parse(ln + 1, "expected `id weight`"));
        };
        let id = id.parse().map_err(|_| Error::parse(ln + 1, "bad id"))?;
        let w: f64 = w.parse().map_err(|_| Error::parse(ln + 1, "bad weight"))?;
        out.insert(id, w);
    }
    Ok(out)
}

/// Read an SWC together with its weight sidecar; node weights are matched
/// by SWC id (missing ids get weight 0).
pub fn read_weighted_swc(
    swc: impl AsRef<Path>,
    weights: impl AsRef<Path>,
) -> Result<Vec<SkeletonTree>> {
    let swc = swc.as_ref();
    let text = fs::read_to_string(swc).map_err(|e| Error::io(swc, e))?;
    let records = parse_swc_records(&text)?;
    let wpath = weights.as_ref();
    let wtext = fs::read_to_string(wpath).map_err(|e| Error::io(wpath, e))?;
    let wmap = parse_weights(&wtext)?;
    build_trees(&records, Some(&wmap))
}
