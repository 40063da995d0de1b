//! Legacy VTK `STRUCTURED_POINTS` files with one scalar point-data array.
//!
//! ASCII and big-endian BINARY encodings are read for every legacy scalar
//! type; values are converted to `f32`. Files are written as BINARY `float`,
//! which round-trips a [`DensityField`] bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{DensityField, Grid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Ascii,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    U8,
    I8,
    U16,
    I16,
    U32,
    I32,
    U64,
    I64,
    F32,
    F64,
}

impl ScalarType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "unsigned_char" | "bit" => Self::U8,
            "char" => Self::I8,
            "unsigned_short" => Self::U16,
            "short" => Self::I16,
            "unsigned_int" => Self::U32,
            "int" => Self::I32,
            "unsigned_long" | "vtktypeuint64" => Self::U64,
            "long" | "vtktypeint64" => Self::I64,
            "float" => Self::F32,
            "double" => Self::F64,
            _ => return None,
        })
    }

    fn width(self) -> usize {
        match self {
            Self::U8 | Self::I8 => 1,
            Self::U16 | Self::I16 => 2,
            Self::U32 | Self::I32 | Self::F32 => 4,
            Self::U64 | Self::I64 | Self::F64 => 8,
        }
    }

    fn decode_be(self, b: &[u8]) -> f32 {
        match self {
            Self::U8 => b[0] as f32,
            Self::I8 => b[0] as i8 as f32,
            Self::U16 => u16::from_be_bytes([b[0], b[1]]) as f32,
            Self::I16 => i16::from_be_bytes([b[0], b[1]]) as f32,
            Self::U32 => u32::from_be_bytes(b[..4].try_into().unwrap()) as f32,
            Self::I32 => i32::from_be_bytes(b[..4].try_into().unwrap()) as f32,
            Self::U64 => u64::from_be_bytes(b[..8].try_into().unwrap()) as f32,
            Self::I64 => i64::from_be_bytes(b[..8].try_into().unwrap()) as f32,
            Self::F32 => f32::from_be_bytes(b[..4].try_into().unwrap()),
            Self::F64 => f64::from_be_bytes(b[..8].try_into().unwrap()) as f32,
        }
    }
}

/// Byte cursor that keeps track of line numbers.
struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self {
            buf,
            pos: 0,
            line: 0,
        }
    }

    /// Next raw line without its terminator, or `None` at EOF.
    fn next_line(&mut self) -> Option<&'a str> {
        if self.pos >= self.buf.len() {
            return None;
        }
        let rest = &self.buf[self.pos..];
        let end = rest.iter().position(|&b| b == b'\n').unwrap_or(rest.len());
        self.pos += (end + 1).min(rest.len());
        self.line += 1;
        let raw = &rest[..end];
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        Some(std::str::from_utf8(raw).unwrap_or("\u{FFFD}"))
    }

    /// Next line that is not blank.
    fn next_content_line(&mut self) -> Option<&'a str> {
        loop {
            let l = self.next_line()?;
            if !l.trim().is_empty() {
                return Some(l);
            }
        }
    }
}

fn parse_triple<T: std::str::FromStr>(line: usize, toks: &[&str], what: &str) -> Result<[T; 3]> {
    if toks.len() != 4 {
        return Err(Error::parse(line, format!("{what} expects 3 values")));
    }
    let mut out = Vec::with_capacity(3);
    for t in &toks[1..] {
        out.push(
            t.parse::<T>()
                .map_err(|_| Error::parse(line, format!("bad {what} value `{t}`")))?,
        );
    }
    match <[T; 3]>::try_from(out) {
        Ok(a) => Ok(a),
        Err(_) => unreachable!(),
    }
}

/// Parse a legacy VTK structured-points file from memory.
pub fn parse_vtk(buf: &[u8]) -> Result<DensityField> {
    let mut cur = Cursor::new(buf);

    let version = cur
        .next_line()
        .ok_or_else(|| Error::parse(1, "empty file"))?;
    if !version
        .trim_start()
        .to_ascii_lowercase()
        .starts_with("# vtk datafile")
    {
        return Err(Error::parse(
            cur.line,
            "missing `# vtk DataFile Version` header",
        ));
    }
    cur.next_line()
        .ok_or_else(|| Error::parse(cur.line + 1, "missing title line"))?;

    let enc_line = cur
        .next_content_line()
        .ok_or_else(|| Error::parse(cur.line + 1, "missing ASCII/BINARY line"))?;
    let encoding = match enc_line.trim().to_ascii_uppercase().as_str() {
        "ASCII" => Encoding::Ascii,
        "BINARY" => Encoding::Binary,
        other => {
            return Err(Error::parse(
                cur.line,
                format!("unknown encoding `{other}`"),
            ))
        }
    };

    let ds = cur
        .next_content_line()
        .ok_or_else(|| Error::parse(cur.line + 1, "missing DATASET line"))?;
    let toks: Vec<&str> = ds.split_whitespace().collect();
    if toks.len() != 2 || !toks[0].eq_ignore_ascii_case("DATASET") {
        return Err(Error::parse(
            cur.line,
            "expected `DATASET STRUCTURED_POINTS`",
        ));
    }
    if !toks[1].eq_ignore_ascii_case("STRUCTURED_POINTS") {
        return Err(Error::parse(
            cur.line,
            format!("unsupported dataset `{}`; only STRUCTURED_POINTS", toks[1]),
        ));
    }

    let mut dims: Option<[usize; 3]> = None;
    let mut spacing = [1.0f64; 3];
    let mut origin = [0.0f64; 3];
    let mut npoints: Option<usize> = None;
    let scalar: ScalarType;

    // Geometry keywords, then POINT_DATA, then SCALARS [+ LOOKUP_TABLE].
    loop {
        let line = cur
            .next_content_line()
            .ok_or_else(|| Error::parse(cur.line + 1, "unexpected end of header"))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let key = toks[0].to_ascii_uppercase();
        match key.as_str() {
            "DIMENSIONS" => dims = Some(parse_triple(cur.line, &toks, "DIMENSIONS")?),
            "SPACING" | "ASPECT_RATIO" => spacing = parse_triple(cur.line, &toks, "SPACING")?,
            "ORIGIN" => origin = parse_triple(cur.line, &toks, "ORIGIN")?,
            "POINT_DATA" => {
                if toks.len() != 2 {
                    return Err(Error::parse(cur.line, "POINT_DATA expects a count"));
                }
                npoints = Some(
                    toks[1]
                        .parse()
                        .map_err(|_| Error::parse(cur.line, "bad POINT_DATA count"))?,
                );
            }
            "SCALARS" => {
                if npoints.is_none() {
                    return Err(Error::parse(cur.line, "SCALARS before POINT_DATA"));
                }
                if toks.len() < 3 || toks.len() > 4 {
                    return Err(Error::parse(
                        cur.line,
                        "SCALARS expects `name type [ncomp]`",
                    ));
                }
                scalar = ScalarType::parse(toks[2]).ok_or_else(|| {
                    Error::parse(cur.line, format!("unknown scalar type `{}`", toks[2]))
                })?;
                if toks.len() == 4 && toks[3] != "1" {
                    return Err(Error::parse(
                        cur.line,
                        "only single-component scalars supported",
                    ));
                }
                // Optional LOOKUP_TABLE line; ASCII files sometimes omit it.
                let save = (cur.pos, cur.line);
                match cur.next_content_line() {
                    Some(l)
                        if l.trim_start()
                            .to_ascii_uppercase()
                            .starts_with("LOOKUP_TABLE") => {}
                    _ => (cur.pos, cur.line) = save,
                }
                break;
            }
            "CELL_DATA" => {
                return Err(Error::parse(
                    cur.line,
                    "CELL_DATA not supported; expected POINT_DATA",
                ))
            }
            other => {
                return Err(Error::parse(
                    cur.line,
                    format!("unexpected keyword `{other}`"),
                ))
            }
        }
    }

    let dims = dims.ok_or_else(|| Error::structure("missing DIMENSIONS"))?;
    let npoints = npoints.unwrap_or(0);
    let grid = Grid::new(dims, spacing, origin).map_err(|e| Error::structure(e.to_string()))?;
    if npoints != grid.len() {
        return Err(Error::structure(format!(
            "POINT_DATA {npoints} does not match DIMENSIONS {dims:?} ({} points)",
            grid.len()
        )));
    }

    let values = match encoding {
        Encoding::Binary => {
            let w = scalar.width();
            let rest = &buf[cur.pos.min(buf.len())..];
            if rest.len() < npoints * w {
                return Err(Error::structure(format!(
                    "binary payload holds {} scalars, expected {npoints}",
                    rest.len() / w
                )));
            }
            rest[..npoints * w]
                .chunks_exact(w)
                .map(|c| scalar.decode_be(c))
                .collect::<Vec<_>>()
        }
        Encoding::Ascii => {
            let mut values = Vec::with_capacity(npoints);
            while values.len() < npoints {
                let Some(line) = cur.next_line() else { break };
                for tok in line.split_whitespace() {
                    if values.len() == npoints {
                        break;
                    }
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| Error::parse(cur.line, format!("bad scalar `{tok}`")))?;
                    values.push(v as f32);
                }
            }
            if values.len() != npoints {
                return Err(Error::structure(format!(
                    "file provides {} scalars, expected {npoints}",
                    values.len()
                )));
            }
            values
        }
    };

    DensityField::new(grid, values)
}

pub fn read_vtk(path: impl AsRef<Path>) -> Result<DensityField> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_vtk(&buf)
}

/// Serialize a field as a legacy VTK file.
pub fn encode_vtk(field: &DensityField, encoding: Encoding) -> Vec<u8> {
    let g = field.grid();
    let [nx, ny, nz] = g.dims;
    let mut out = Vec::with_capacity(field.len() * 4 + 256);
    let enc = match encoding {
        Encoding::Ascii => "ASCII",
        Encoding::Binary => "BINARY",
    };
    // `{:?}` prints the shortest representation that parses back exactly.
    let header = format!(
        "# vtk DataFile Version 3.0\ndmskel density\n{enc}\nDATASET STRUCTURED_POINTS\n\
         DIMENSIONS {nx} {ny} {nz}\nSPACING {:?} {:?} {:?}\nORIGIN {:?} {:?} {:?}\n\
         POINT_DATA {}\nSCALARS density float 1\nLOOKUP_TABLE default\n",
        g.spacing[0],
        g.spacing[1],
        g.spacing[2],
        g.origin[0],
        g.origin[1],
        g.origin[2],
        field.len()
    );
    out.extend_from_slice(header.as_bytes());
    match encoding {
        Encoding::Binary => {
            for v in field.values() {
                out.extend_from_slice(&v.to_be_bytes());
            }
            out.push(b'\n');
        }
        Encoding::Ascii => {
            for row in field.values().chunks(nx.max(1)) {
                let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    out
}

pub fn write_vtk(field: &DensityField, path: impl AsRef<Path>) -> Result<()> {
    write_vtk_with(field, path, Encoding::Binary)
}

pub fn write_vtk_with(
    field: &DensityField,
    path: impl AsRef<Path>,
    encoding: Encoding,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_vtk(field, encoding);
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const MINIMAL: &str = "# vtk DataFile Version 3.0\nminimal\nASCII\nDATASET STRUCTURED_POINTS\n\
DIMENSIONS 2 2 2\nSPACING 1 1 1\nORIGIN 0 0 0\nPOINT_DATA 8\nSCALARS d float\nLOOKUP_TABLE default\n\
0 1 2 3\n4 5 6 7\n";

    #[test]
    fn reads_minimal_ascii() {
        let f = parse_vtk(MINIMAL.as_bytes()).unwrap();
        assert_eq!(f.dims(), [2, 2, 2]);
        assert_eq!(f.values(), &[0., 1., 2., 3., 4., 5., 6., 7.]);
    }

    #[test]
    fn short_payload_is_structural() {
        let text = MINIMAL.replace("4 5 6 7", "4 5 6");
        assert!(matches!(
            parse_vtk(text.as_bytes()),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn point_count_mismatch_is_structural() {
        let text = MINIMAL.replace("POINT_DATA 8", "POINT_DATA 9");
        assert!(matches!(
            parse_vtk(text.as_bytes()),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn bad_header_reports_line() {
        let text = MINIMAL.replace("SPACING 1 1 1", "SPACING 1 x 1");
        match parse_vtk(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
        let text = MINIMAL.replace("STRUCTURED_POINTS", "POLYDATA");
        assert!(matches!(
            parse_vtk(text.as_bytes()),
            Err(Error::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn reads_binary_unsigned_short() {
        let mut buf = b"# vtk DataFile Version 2.0\nu16\nBINARY\nDATASET STRUCTURED_POINTS\n\
DIMENSIONS 3 1 1\nSPACING 10 10 50\nORIGIN 0 0 0\nPOINT_DATA 3\nSCALARS s unsigned_short 1\nLOOKUP_TABLE default\n"
            .to_vec();
        for v in [0u16, 256, 65535] {
            buf.extend_from_slice(&v.to_be_bytes());
        }
        let f = parse_vtk(&buf).unwrap();
        assert_eq!(f.values(), &[0.0, 256.0, 65535.0]);
        assert_eq!(f.spacing(), [10.0, 10.0, 50.0]);
    }

    #[test]
    fn constant_field_writes_27_ones() {
        let g = Grid::unit([3, 3, 3]).unwrap();
        let f = DensityField::new(g, vec![1.0; 27]).unwrap();
        let bytes = encode_vtk(&f, Encoding::Ascii);
        let text = String::from_utf8(bytes).unwrap();
        let data: Vec<&str> = text
            .lines()
            .skip_while(|l| !l.starts_with("LOOKUP_TABLE"))
            .skip(1)
            .flat_map(|l| l.split_whitespace())
            .collect();
        assert_eq!(data.len(), 27);
        assert!(data.iter().all(|t| t.parse::<f32>().unwrap() == 1.0));
    }

    #[test]
    fn random_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = Grid::new([5, 4, 3], [0.3, 1.7, 2.0], [-4.25, 0.1, 3.0]).unwrap();
        let vals: Vec<f32> = (0..g.len()).map(|_| rng.random::<f32>() * 1e4).collect();
        let f = DensityField::new(g, vals).unwrap();
        for enc in [Encoding::Binary, Encoding::Ascii] {
            let back = parse_vtk(&encode_vtk(&f, enc)).unwrap();
            assert_eq!(back.grid(), f.grid());
            let a: Vec<u32> = f.values().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.values().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b, "{enc:?}");
        }
    }
}
