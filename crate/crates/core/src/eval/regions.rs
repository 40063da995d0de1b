//! Region label volumes and per-region weight reports.
//!
//! Label files are a short text header followed by raw little-endian labels
//! in x-fastest order:
//!
//! ```text
//! DMSKEL-LABELS 1
//! DIMENSIONS 4 4 2
//! SPACING 1 1 1
//! ORIGIN 0 0 0
//! ENCODING u16le
//! LABELS 2
//! 1 L CP
//! 2 R MOs
//! DATA
//! <binary>
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tree::SkeletonTree;
use crate::volume::{DensityField, Grid};

const MAGIC: &str = "DMSKEL-LABELS 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Hemisphere {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionInfo {
    pub name: String,
    pub hemisphere: Option<Hemisphere>,
}

/// Integer label per voxel; 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionLabelVolume {
    grid: Grid,
    labels: Vec<u32>,
    table: BTreeMap<u32, RegionInfo>,
}

impl RegionLabelVolume {
    /// Every non-zero label in the volume needs a table entry.
    pub fn new(grid: Grid, labels: Vec<u32>, table: BTreeMap<u32, RegionInfo>) -> Result<Self> {
        if labels.len() != grid.len() {
            return Err(Error::structure(format!(
                "label volume has {} voxels, grid needs {}",
                labels.len(),
                grid.len()
            )));
        }
        if table.contains_key(&0) {
            return Err(Error::structure("label 0 is reserved for background"));
        }
        if let Some(l) = labels.iter().find(|&&l| l != 0 && !table.contains_key(&l)) {
            return Err(Error::structure(format!("label {l} has no table entry")));
        }
        Ok(Self {
            grid,
            labels,
            table,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn table(&self) -> &BTreeMap<u32, RegionInfo> {
        &self.table
    }

    pub fn label_at(&self, lin: usize) -> u32 {
        self.labels[lin]
    }
}

fn header_line<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    key: &str,
) -> Result<(usize, Vec<&'a str>)> {
    let (no, line) = lines
        .next()
        .ok_or_else(|| Error::parse(0, format!("missing {key} line")))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(Error::parse(no, format!("expected {key}")));
    }
    Ok((no, parts.collect()))
}

fn numbers<T: std::str::FromStr>(no: usize, parts: &[&str], n: usize) -> Result<Vec<T>> {
    if parts.len() != n {
        return Err(Error::parse(no, format!("expected {n} values")));
    }
    parts
        .iter()
        .map(|p| {
            p.parse()
                .map_err(|_| Error::parse(no, format!("bad number `{p}`")))
        })
        .collect()
}

/// Parse a label file from bytes.
pub fn parse_labels(bytes: &[u8]) -> Result<RegionLabelVolume> {
    // Locate the end of the text header ("DATA\n").
    let mut header_end = None;
    let mut start = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'\n' {
            if bytes[start..i].trim_ascii() == b"DATA" {
                header_end = Some((start, i + 1));
                break;
            }
            start = i + 1;
        }
    }
    let (text_end, data_start) = header_end.ok_or_else(|| Error::parse(0, "missing DATA line"))?;
    let text = std::str::from_utf8(&bytes[..text_end])
        .map_err(|_| Error::parse(0, "header is not UTF-8"))?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        Some((no, _)) => return Err(Error::parse(no, format!("expected `{MAGIC}`"))),
        None => return Err(Error::parse(1, "empty header")),
    }
    let (no, p) = header_line(&mut lines, "DIMENSIONS")?;
    let d: Vec<usize> = numbers(no, &p, 3)?;
    let (no, p) = header_line(&mut lines, "SPACING")?;
    let s: Vec<f64> = numbers(no, &p, 3)?;
    let (no, p) = header_line(&mut lines, "ORIGIN")?;
    let o: Vec<f64> = numbers(no, &p, 3)?;
    let grid = Grid::new([d[0], d[1], d[2]], [s[0], s[1], s[2]], [o[0], o[1], o[2]])?;
    let (no, p) = header_line(&mut lines, "ENCODING")?;
    let width = match p.as_slice() {
        ["u8"] => 1,
        ["u16le"] => 2,
        ["u32le"] => 4,
        _ => return Err(Error::parse(no, "encoding must be u8, u16le or u32le")),
    };
    let (no, p) = header_line(&mut lines, "LABELS")?;
    let count: usize = numbers(no, &p, 1)?[0];
    let mut table = BTreeMap::new();
    for _ in 0..count {
        let (no, line) = lines
            .next()
            .ok_or_else(|| Error::parse(no, "label table is short"))?;
        let mut parts = line.split_whitespace();
        let id: u32 = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(no, "bad label id"))?;
        let hemisphere = match parts.next() {
            Some("L") => Some(Hemisphere::Left),
            Some("R") => Some(Hemisphere::Right),
            Some("-") => None,
            _ => return Err(Error::parse(no, "hemisphere must be L, R or -")),
        };
        let name = parts.collect::<Vec<_>>().join(" ");
        if name.is_empty() {
            return Err(Error::parse(no, "missing region name"));
        }
        if table.insert(id, RegionInfo { name, hemisphere }).is_some() {
            return Err(Error::parse(no, format!("label {id} listed twice")));
        }
    }
    if let Some((no, _)) = lines.next() {
        return Err(Error::parse(no, "unexpected line before DATA"));
    }
    let data = &bytes[data_start..];
    if data.len() != grid.len() * width {
        return Err(Error::structure(format!(
            "label data has {} bytes, expected {}",
            data.len(),
            grid.len() * width
        )));
    }
    let labels = data
        .chunks_exact(width)
        .map(|c| match width {
            1 => c[0] as u32,
            2 => u16::from_le_bytes([c[0], c[1]]) as u32,
            _ => u32::from_le_bytes([c[0], c[1], c[2], c[3]]),
        })
        .collect();
    RegionLabelVolume::new(grid, labels, table)
}

pub fn read_labels(path: &Path) -> Result<RegionLabelVolume> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&bytes)
}

/// Serialise with the narrowest encoding that holds every label.
pub fn encode_labels(vol: &RegionLabelVolume) -> Vec<u8> {
    let max = vol.labels.iter().copied().max().unwrap_or(0);
    let (enc, width) = if max <= u8::MAX as u32 {
        ("u8", 1)
    } else if max <= u16::MAX as u32 {
        ("u16le", 2)
    } else {
        ("u32le", 4)
    };
    let g = &vol.grid;
    let mut head = format!(
        "{MAGIC}\nDIMENSIONS {} {} {}\nSPACING {:?} {:?} {:?}\nORIGIN {:?} {:?} {:?}\nENCODING {enc}\nLABELS {}\n",
        g.dims[0],
        g.dims[1],
        g.dims[2],
        g.spacing[0],
        g.spacing[1],
        g.spacing[2],
        g.origin[0],
        g.origin[1],
        g.origin[2],
        vol.table.len()
    );
    for (id, info) in &vol.table {
        let h = match info.hemisphere {
            Some(Hemisphere::Left) => "L",
            Some(Hemisphere::Right) => "R",
            None => "-",
        };
        let _ = writeln!(head, "{id} {h} {}", info.name);
    }
    head.push_str("DATA\n");
    let mut out = head.into_bytes();
    for &l in &vol.labels {
        out.extend_from_slice(&l.to_le_bytes()[..width]);
    }
    out
}

pub fn write_labels(vol: &RegionLabelVolume, path: &Path) -> Result<()> {
    std::fs::write(path, encode_labels(vol)).map_err(|e| Error::io(path, e))
}

/// What to bin: summary weights of tree nodes, or raw voxel densities.
#[derive(Debug, Clone, Copy)]
pub enum RegionSource<'a> {
    Trees(&'a [SkeletonTree]),
    Field(&'a DensityField),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionEntry {
    pub label: u32,
    pub name: String,
    pub hemisphere: Option<Hemisphere>,
    pub weight: f64,
    /// Share of the weight inside labelled regions, in percent.
    pub percent: f64,
    /// 1-based rank by weight among covered regions.
    pub rank: Option<usize>,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionReport {
    /// One entry per table label, ascending.
    pub entries: Vec<RegionEntry>,
    /// Weight of the whole input.
    pub total: f64,
    pub background: f64,
    /// Weight of tree nodes outside the label grid.
    pub outside: f64,
}

impl RegionReport {
    pub fn region_total(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    pub fn entry(&self, label: u32) -> Option<&RegionEntry> {
        self.entries.iter().find(|e| e.label == label)
    }
}

/// Bin weights by label and rank the regions.
pub fn region_report(source: RegionSource, labels: &RegionLabelVolume) -> Result<RegionReport> {
    let mut bins: BTreeMap<u32, f64> = labels.table.keys().map(|&k| (k, 0.0)).collect();
    let mut background = 0.0;
    let mut outside = 0.0;
    let mut total = 0.0;
    let mut add = |label: Option<u32>, w: f64| {
        total += w;
        match label {
            None => outside += w,
            Some(0) => background += w,
            Some(l) => *bins.get_mut(&l).expect("validated label") += w,
        }
    };
    match source {
        RegionSource::Field(f) => {
            if f.dims() != labels.grid.dims {
                return Err(Error::structure(format!(
                    "field dims {:?} differ from label dims {:?}",
                    f.dims(),
                    labels.grid.dims
                )));
            }
            for (lin, &v) in f.values().iter().enumerate() {
                add(Some(labels.labels[lin]), v as f64);
            }
        }
        RegionSource::Trees(trees) => {
            for t in trees {
                for n in t.nodes() {
                    let label = labels
                        .grid
                        .nearest_voxel(n.position)
                        .map(|v| labels.labels[labels.grid.linear(v)]);
                    add(label, n.weight);
                }
            }
        }
    }
    let region_total: f64 = bins.values().sum();
    let mut ranked: Vec<(u32, f64)> = bins
        .iter()
        .filter(|(_, &w)| w > 0.0)
        .map(|(&l, &w)| (l, w))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let entries = bins
        .iter()
        .map(|(&label, &weight)| {
            let info = &labels.table[&label];
            RegionEntry {
                label,
                name: info.name.clone(),
                hemisphere: info.hemisphere,
                weight,
                percent: if region_total > 0.0 {
                    100.0 * weight / region_total
                } else {
                    0.0
                },
                rank: ranked.iter().position(|r| r.0 == label).map(|p| p + 1),
                covered: weight > 0.0,
            }
        })
        .collect();
    Ok(RegionReport {
        entries,
        total,
        background,
        outside,
    })
}

/// Fraction of the reference weight lying in regions the method covers,
/// background excluded; per hemisphere where tags exist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub whole: f64,
    pub left: Option<f64>,
    pub right: Option<f64>,
}

pub fn coverage(reference: &RegionReport, method: &RegionReport) -> Result<Coverage> {
    let rate = |keep: &dyn Fn(&RegionEntry) -> bool| -> Option<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for e in reference.entries.iter().filter(|e| keep(e)) {
            den += e.weight;
            if method.entry(e.label).is_some_and(|m| m.covered) {
                num += e.weight;
            }
        }
        (den > 0.0).then(|| num / den)
    };
    let whole = rate(&|_| true)
        .ok_or_else(|| Error::invalid("reference has no weight inside labelled regions"))?;
    Ok(Coverage {
        whole,
        left: rate(&|e| e.hemisphere == Some(Hemisphere::Left)),
        right: rate(&|e| e.hemisphere == Some(Hemisphere::Right)),
    })
}

/// Aligned text table, ranked regions first.
pub fn format_region_report(report: &RegionReport, cov: Option<&Coverage>) -> String {
    let mut s = String::from(
        "# weights on background (label 0) are excluded from percentages and coverage\n",
    );
    let _ = writeln!(
        s,
        "# total {} background {} outside {} regions {}",
        report.total,
        report.background,
        report.outside,
        report.region_total()
    );
    if let Some(c) = cov {
        let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(
            s,
            "# coverage whole {:.6} left {} right {}",
            c.whole,
            opt(c.left),
            opt(c.right)
        );
    }
    let _ = writeln!(
        s,
        "{:>5} {:>8} {:<24} {:>4} {:>16} {:>9} {:>7}",
        "rank", "label", "name", "hemi", "weight", "percent", "covered"
    );
    let mut rows: Vec<&RegionEntry> = report.entries.iter().collect();
    rows.sort_by_key(|e| (e.rank.unwrap_or(usize::MAX), e.label));
    for e in rows {
        let _ = writeln!(
            s,
            "{:>5} {:>8} {:<24} {:>4} {:>16.6} {:>9.4} {:>7}",
            e.rank.map_or("-".to_string(), |r| r.to_string()),
            e.label,
            e.name,
            hemi_tag(e.hemisphere),
            e.weight,
            e.percent,
            if e.covered { "yes" } else { "no" }
        );
    }
    s
}

fn hemi_tag(h: Option<Hemisphere>) -> &'static str {
    match h {
        Some(Hemisphere::Left) => "L",
        Some(Hemisphere::Right) => "R",
        None => "-",
    }
}

/// Tab-separated region table in label order.
pub fn format_region_tsv(report: &RegionReport) -> String {
    let mut s = String::from("label\tname\themisphere\tweight\tpercent\trank\tcovered\n");
    for e in &report.entries {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            e.label,
            e.name,
            hemi_tag(e.hemisphere),
            e.weight,
            e.percent,
            e.rank.map_or(String::new(), |r| r.to_string()),
            e.covered
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_region_volume() -> RegionLabelVolume {
        let g = Grid::unit([4, 1, 1]).unwrap();
        let table = BTreeMap::from([
            (
                1,
                RegionInfo {
                    name: "CP".into(),
                    hemisphere: Some(Hemisphere::Left),
                },
            ),
            (
                2,
                RegionInfo {
                    name: "MOs".into(),
                    hemisphere: Some(Hemisphere::Right),
                },
            ),
            (
                3,
                RegionInfo {
                    name: "SC".into(),
                    hemisphere: None,
                },
            ),
        ]);
        RegionLabelVolume::new(g, vec![0, 1, 2, 3], table).unwrap()
    }

    #[test]
    fn seventy_thirty_split() {
        let vol = two_region_volume();
        let f = DensityField::new(*vol.grid(), vec![5.0, 7.0, 3.0, 0.0]).unwrap();
        let r = region_report(RegionSource::Field(&f), &vol).unwrap();
        assert_eq!(r.total, 15.0);
        assert_eq!(r.background, 5.0);
        let cp = r.entry(1).unwrap();
        assert_eq!((cp.percent, cp.rank), (70.0, Some(1)));
        let mo = r.entry(2).unwrap();
        assert!((mo.percent - 30.0).abs() < 1e-12);
        assert_eq!(mo.rank, Some(2));
        assert!(!r.entry(3).unwrap().covered);
    }

    #[test]
    fn coverage_against_reference() {
        let vol = two_region_volume();
        let f = DensityField::new(*vol.grid(), vec![5.0, 7.0, 3.0, 0.0]).unwrap();
        let reference = region_report(RegionSource::Field(&f), &vol).unwrap();
        let mut t = SkeletonTree::from_parents(&[[1.0, 0.0, 0.0]], &[None]).unwrap();
        t.nodes_mut()[0].weight = 2.0;
        let method = region_report(RegionSource::Trees(&[t]), &vol).unwrap();
        let c = coverage(&reference, &method).unwrap();
        assert!((c.whole - 0.7).abs() < 1e-12);
        assert_eq!(c.left, Some(1.0));
        assert_eq!(c.right, Some(0.0));
    }

    #[test]
    fn label_file_round_trip_and_errors() {
        let vol = two_region_volume();
        let bytes = encode_labels(&vol);
        assert_eq!(parse_labels(&bytes).unwrap(), vol);
        let f = DensityField::zeros(Grid::unit([3, 1, 1]).unwrap());
        assert!(matches!(
            region_report(RegionSource::Field(&f), &vol),
            Err(Error::Structure(_))
        ));
        let mut short = bytes.clone();
        short.pop();
        assert!(matches!(parse_labels(&short), Err(Error::Structure(_))));
        assert!(matches!(
            parse_labels(b"NOPE\nDATA\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
