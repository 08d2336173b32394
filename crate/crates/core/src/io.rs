//! XYZ and ASCII PLY reading and writing.
//!
//! Coordinates are written with Rust's shortest round-trip float formatting,
//! so `read_cloud(write_cloud(c)) == c` bit for bit.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Xyz,
    PlyAscii,
}

impl CloudFormat {
    /// `.ply` selects PLY, anything else XYZ.
    pub fn from_path(path: &Path) -> CloudFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("ply") => CloudFormat::PlyAscii,
            _ => CloudFormat::Xyz,
        }
    }
}

impl FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xyz" => Ok(CloudFormat::Xyz),
            "ply" | "ply-ascii" => Ok(CloudFormat::PlyAscii),
            other => Err(Error::invalid(format!("unknown cloud format '{other}'"))),
        }
    }
}

pub fn read_cloud(path: impl AsRef<Path>, format: CloudFormat) -> Result<PointCloud> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_cloud(BufReader::new(file), format, path)
}

/// Reads a cloud, choosing the format from the file extension.
pub fn read_cloud_auto(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    read_cloud(path, CloudFormat::from_path(path))
}

pub fn write_cloud(cloud: &PointCloud, path: impl AsRef<Path>, format: CloudFormat) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode_cloud(cloud, &mut w, format)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_cloud_auto(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_cloud(cloud, path, CloudFormat::from_path(path))
}

pub fn encode_cloud<W: Write + ?Sized>(cloud: &PointCloud, w: &mut W, format: CloudFormat) -> std::io::Result<()> {
    if format == CloudFormat::PlyAscii {
        writeln!(w, "ply")?;
        writeln!(w, "format ascii 1.0")?;
        writeln!(w, "element vertex {}", cloud.len())?;
        writeln!(w, "property double x")?;
        writeln!(w, "property double y")?;
        writeln!(w, "property double z")?;
        writeln!(w, "end_header")?;
    }
    for p in cloud {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

/// Parses a cloud from any reader. `origin` is only used in error messages.
pub fn parse_cloud<R: Read>(reader: R, format: CloudFormat, origin: &Path) -> Result<PointCloud> {
    let reader = BufReader::new(reader);
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let points = match format {
        CloudFormat::Xyz => parse_xyz(&mut lines, origin)?,
        CloudFormat::PlyAscii => parse_ply(&mut lines, origin)?,
    };
    PointCloud::new(points)
}

type NumberedLines<'a> = dyn Iterator<Item = (usize, std::io::Result<String>)> + 'a;

fn parse_err(origin: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: origin.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn next_line(lines: &mut NumberedLines<'_>, origin: &Path) -> Result<Option<(usize, String)>> {
    match lines.next() {
        None => Ok(None),
        Some((n, Ok(s))) => Ok(Some((n, s))),
        Some((_, Err(e))) => Err(Error::io(origin, e)),
    }
}

fn parse_coord(tok: &str, origin: &Path, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(origin, line, format!("cannot parse '{tok}' as a number")))?;
    if !v.is_finite() {
        return Err(parse_err(origin, line, format!("non-finite coordinate '{tok}'")));
    }
    Ok(v)
}

fn parse_xyz(lines: &mut NumberedLines<'_>, origin: &Path) -> Result<Vec<Point3>> {
    let mut points = Vec::new();
    while let Some((n, line)) = next_line(lines, origin)? {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 3 {
            return Err(parse_err(
                origin,
                n,
                format!("expected 3 coordinates, found {}", fields.len()),
            ));
        }
        points.push(Point3::new(
            parse_coord(fields[0], origin, n)?,
            parse_coord(fields[1], origin, n)?,
            parse_coord(fields[2], origin, n)?,
        ));
    }
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(points)
}

#[derive(Debug)]
enum PlyProperty {
    Scalar(String),
    List,
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

const PLY_SCALAR_TYPES: &[&str] = &[
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double", "int8", "uint8", "int16",
    "uint16", "int32", "uint32", "float32", "float64",
];

fn parse_ply_header(lines: &mut NumberedLines<'_>, origin: &Path) -> Result<Vec<PlyElement>> {
    match next_line(lines, origin)? {
        Some((_, l)) if l.trim() == "ply" => {}
        Some((n, _)) => return Err(parse_err(origin, n, "missing 'ply' magic line")),
        None => return Err(parse_err(origin, 1, "empty file")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut saw_format = false;
    loop {
        let Some((n, line)) = next_line(lines, origin)? else {
            return Err(parse_err(origin, 0, "header ended without 'end_header'"));
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                if toks.get(1) != Some(&"ascii") {
                    return Err(parse_err(origin, n, "only 'format ascii 1.0' is supported"));
                }
                saw_format = true;
            }
            Some("element") => {
                let (Some(name), Some(count)) = (toks.get(1), toks.get(2)) else {
                    return Err(parse_err(origin, n, "malformed element line"));
                };
                let count = count
                    .parse()
                    .map_err(|_| parse_err(origin, n, format!("bad element count '{count}'")))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let Some(element) = elements.last_mut() else {
                    return Err(parse_err(origin, n, "property before any element"));
                };
                let prop = match toks.as_slice() {
                    ["property", "list", _, _, _] => PlyProperty::List,
                    ["property", ty, name] if PLY_SCALAR_TYPES.contains(ty) => {
                        PlyProperty::Scalar(name.to_string())
                    }
                    _ => return Err(parse_err(origin, n, "malformed property line")),
                };
                element.properties.push(prop);
            }
            Some("end_header") => break,
            Some(other) => return Err(parse_err(origin, n, format!("unknown header keyword '{other}'"))),
        }
    }
    if !saw_format {
        return Err(parse_err(origin, 1, "missing format line"));
    }
    Ok(elements)
}

fn parse_ply(lines: &mut NumberedLines<'_>, origin: &Path) -> Result<Vec<Point3>> {
    let elements = parse_ply_header(lines, origin)?;
    let vertex = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| parse_err(origin, 0, "no vertex element in header"))?;
    let slot = |axis: &str| {
        elements[vertex].properties.iter().position(|p| matches!(p, PlyProperty::Scalar(n) if n == axis))
    };
    let (Some(ix), Some(iy), Some(iz)) = (slot("x"), slot("y"), slot("z")) else {
        return Err(parse_err(origin, 0, "vertex element lacks x, y, z properties"));
    };

    let mut points = Vec::with_capacity(elements[vertex].count);
    for (e_idx, element) in elements.iter().enumerate() {
        for _ in 0..element.count {
            let (n, line) = loop {
                match next_line(lines, origin)? {
                    Some((_, l)) if l.trim().is_empty() => continue,
                    Some(v) => break v,
                    None => return Err(parse_err(origin, 0, format!("truncated '{}' data", element.name))),
                }
            };
            if e_idx != vertex {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let mut values = [0.0f64; 3];
            let mut cursor = 0usize;
            for (p_idx, prop) in element.properties.iter().enumerate() {
                let tok = toks
                    .get(cursor)
                    .ok_or_else(|| parse_err(origin, n, "too few values for vertex properties"))?;
                match prop {
                    PlyProperty::List => {
                        let len: usize = tok
                            .parse()
                            .map_err(|_| parse_err(origin, n, format!("bad list length '{tok}'")))?;
                        cursor += 1 + len;
                    }
                    PlyProperty::Scalar(_) => {
                        if let Some(axis) = [ix, iy, iz].iter().position(|&s| s == p_idx) {
                            values[axis] = parse_coord(tok, origin, n)?;
                        }
                        cursor += 1;
                    }
                }
            }
            if cursor != toks.len() {
                return Err(parse_err(
                    origin,
                    n,
                    format!("expected {cursor} values, found {}", toks.len()),
                ));
            }
            points.push(Point3::from(values));
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(points)
}
