//! STL and PLY reading and writing.
//!
//! STL stores each facet with its own copy of the corner coordinates, so the
//! reader rebuilds shared vertices by exact coordinate match (or by an
//! optional weld tolerance). PLY is read and written in its ASCII form with
//! an optional per-vertex `distance` scalar and 8-bit colors.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::mesh::{triangle_area, TriangleMesh, DEGENERATE_AREA};
use crate::{Error, Point3, Result};

/// On-disk mesh encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    StlAscii,
    StlBinary,
    Ply,
}

impl MeshFormat {
    /// Guesses the format from the extension and, for STL, the content.
    pub fn detect(path: &Path, bytes: &[u8]) -> Result<MeshFormat> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("ply") => Ok(MeshFormat::Ply),
            Some("stl") => Ok(if looks_like_binary_stl(bytes) {
                MeshFormat::StlBinary
            } else {
                MeshFormat::StlAscii
            }),
            _ if bytes.starts_with(b"ply") => Ok(MeshFormat::Ply),
            _ => Err(Error::invalid(format!(
                "cannot determine mesh format of {}",
                path.display()
            ))),
        }
    }
}

fn looks_like_binary_stl(bytes: &[u8]) -> bool {
    if bytes.len() >= 84 {
        let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
        if 84usize.checked_add(n.saturating_mul(50)) == Some(bytes.len()) {
            return true;
        }
    }
    !bytes.trim_ascii_start().starts_with(b"solid")
}

/// Options applied while loading.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LoadOptions {
    /// Merge STL corners closer than this (mm). `None` merges only exact matches.
    pub weld_tolerance: Option<f64>,
}

pub fn load_mesh(path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<TriangleMesh> {
    load_mesh_with_options(path, format, LoadOptions::default())
}

pub fn load_mesh_with_options(
    path: impl AsRef<Path>,
    format: Option<MeshFormat>,
    options: LoadOptions,
) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = match format {
        Some(f) => f,
        None => MeshFormat::detect(path, &bytes)?,
    };
    let mesh = match format {
        MeshFormat::StlAscii => stl_from_facets(parse_stl_ascii(&bytes)?, options)?,
        MeshFormat::StlBinary => stl_from_facets(parse_stl_binary(&bytes)?, options)?,
        MeshFormat::Ply => parse_ply(&bytes)?.0,
    };
    if mesh.is_empty() {
        return Err(Error::invalid(format!("{} contains no usable triangles", path.display())));
    }
    for w in mesh.warnings() {
        log::warn!("{}: {w}", path.display());
    }
    Ok(mesh)
}

/// Reads a PLY mesh and its `distance` vertex property, if present.
pub fn load_ply_with_scalars(path: impl AsRef<Path>) -> Result<(TriangleMesh, Option<Vec<f64>>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes)
}

type Facet = [[f32; 3]; 3];

fn parse_stl_binary(bytes: &[u8]) -> Result<Vec<Facet>> {
    if bytes.len() < 84 {
        return Err(Error::parse(bytes.len(), "binary STL shorter than its 84-byte header"));
    }
    let count = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
    let mut facets = Vec::with_capacity(count.min(bytes.len() / 50));
    for i in 0..count {
        let start = 84 + i * 50;
        let record = bytes
            .get(start..start + 50)
            .ok_or_else(|| Error::parse(start, format!("truncated facet {i} of {count}")))?;
        let f = |k: usize| f32::from_le_bytes([record[k], record[k + 1], record[k + 2], record[k + 3]]);
        let mut facet = [[0f32; 3]; 3];
        for (v, corner) in facet.iter_mut().enumerate() {
            for (c, x) in corner.iter_mut().enumerate() {
                *x = f(12 + v * 12 + c * 4);
            }
        }
        facets.push(facet);
    }
    if bytes.len() > 84 + count * 50 {
        return Err(Error::parse(84 + count * 50, "trailing bytes after last facet"));
    }
    Ok(facets)
}

/// Whitespace tokenizer that remembers byte offsets for error reporting.
struct Tokens<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        Self { text, pos: 0 }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let rest = &self.text[self.pos..];
        let skip = rest.len() - rest.trim_start().len();
        let start = self.pos + skip;
        if start >= self.text.len() {
            self.pos = start;
            return None;
        }
        let len = self.text[start..]
            .find(char::is_whitespace)
            .unwrap_or(self.text.len() - start);
        self.pos = start + len;
        Some((start, &self.text[start..start + len]))
    }

    fn expect(&mut self, keyword: &str) -> Result<usize> {
        match self.next() {
            Some((off, tok)) if tok.eq_ignore_ascii_case(keyword) => Ok(off),
            Some((off, tok)) => Err(Error::parse(off, format!("expected '{keyword}', found '{tok}'"))),
            None => Err(Error::parse(self.pos, format!("expected '{keyword}', found end of file"))),
        }
    }

    fn number<T: std::str::FromStr>(&mut self) -> Result<T> {
        match self.next() {
            Some((off, tok)) => tok
                .parse()
                .map_err(|_| Error::parse(off, format!("expected a number, found '{tok}'"))),
            None => Err(Error::parse(self.pos, "expected a number, found end of file")),
        }
    }

    fn skip_line(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.find('\n').map_or(rest.len(), |i| i + 1);
    }
}

fn parse_stl_ascii(bytes: &[u8]) -> Result<Vec<Facet>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::parse(e.valid_up_to(), "ASCII STL is not valid UTF-8"))?;
    let mut tok = Tokens::new(text);
    tok.expect("solid")?;
    tok.skip_line();
    let mut facets = Vec::new();
    loop {
        match tok.next() {
            Some((_, t)) if t.eq_ignore_ascii_case("facet") => {}
            Some((_, t)) if t.eq_ignore_ascii_case("endsolid") => break,
            Some((off, t)) => return Err(Error::parse(off, format!("expected 'facet' or 'endsolid', found '{t}'"))),
            None => return Err(Error::parse(text.len(), "missing 'endsolid'")),
        }
        tok.expect("normal")?;
        for _ in 0..3 {
            tok.number::<f32>()?;
        }
        tok.expect("outer")?;
        tok.expect("loop")?;
        let mut facet = [[0f32; 3]; 3];
        for corner in facet.iter_mut() {
            tok.expect("vertex")?;
            for x in corner.iter_mut() {
                *x = tok.number()?;
            }
        }
        tok.expect("endloop")?;
        tok.expect("endfacet")?;
        facets.push(facet);
    }
    Ok(facets)
}

fn key(p: &[f32; 3]) -> [u32; 3] {
    // +0.0 and -0.0 are the same coordinate.
    p.map(|c| if c == 0.0 { 0 } else { c.to_bits() })
}

fn stl_from_facets(facets: Vec<Facet>, options: LoadOptions) -> Result<TriangleMesh> {
    let mut warnings = Vec::new();
    let mut vertices: Vec<Point3> = Vec::new();
    let mut triangles = Vec::with_capacity(facets.len());
    let mut exact: HashMap<[u32; 3], usize> = HashMap::new();
    let mut welder = options
        .weld_tolerance
        .filter(|t| *t > 0.0)
        .map(Welder::new);

    for (f, facet) in facets.iter().enumerate() {
        let pts = facet.map(|c| Point3::new(c[0] as f64, c[1] as f64, c[2] as f64));
        let area = triangle_area(&pts[0], &pts[1], &pts[2]);
        if area <= DEGENERATE_AREA {
            warnings.push(format!("dropped degenerate facet {f} (area {area:.3e} mm²)"));
            continue;
        }
        let mut tri = [0usize; 3];
        for k in 0..3 {
            tri[k] = match welder.as_mut() {
                Some(w) => w.index_of(&pts[k], &mut vertices),
                None => *exact.entry(key(&facet[k])).or_insert_with(|| {
                    vertices.push(pts[k]);
                    vertices.len() - 1
                }),
            };
        }
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            warnings.push(format!("dropped facet {f} collapsed by welding"));
            continue;
        }
        triangles.push(tri);
    }
    let mut mesh = TriangleMesh::new(vertices, triangles)?;
    warnings.append(&mut mesh.warnings);
    mesh.warnings = warnings;
    Ok(mesh)
}

/// Grid-hashed vertex welding; the first vertex seen in a neighbourhood wins.
struct Welder {
    tol: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl Welder {
    fn new(tol: f64) -> Self {
        Self {
            tol,
            cells: HashMap::new(),
        }
    }

    fn cell(&self, p: &Point3) -> [i64; 3] {
        [0, 1, 2].map(|k| (p[k] / self.tol).floor() as i64)
    }

    fn index_of(&mut self, p: &Point3, vertices: &mut Vec<Point3>) -> usize {
        let c = self.cell(p);
        let mut best: Option<(f64, usize)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &i in ids {
                            let d = (vertices[i] - p).norm();
                            if d <= self.tol && best.is_none_or(|(bd, bi)| d < bd || (d == bd && i < bi)) {
                                best = Some((d, i));
                            }
                        }
                    }
                }
            }
        }
        if let Some((_, i)) = best {
            return i;
        }
        vertices.push(*p);
        let i = vertices.len() - 1;
        self.cells.entry(c).or_default().push(i);
        i
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyScalar {
    Float,
    Int,
}

fn ply_scalar_type(name: &str) -> Option<PlyScalar> {
    match name {
        "float" | "float32" | "double" | "float64" => Some(PlyScalar::Float),
        "char" | "uchar" | "short" | "ushort" | "int" | "uint" | "int8" | "uint8" | "int16"
        | "uint16" | "int32" | "uint32" => Some(PlyScalar::Int),
        _ => None,
    }
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

fn parse_ply(bytes: &[u8]) -> Result<(TriangleMesh, Option<Vec<f64>>)> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::parse(e.valid_up_to(), "PLY is not valid UTF-8 (only ASCII PLY is supported)"))?;

    let mut offset = 0usize;
    let mut lines = text.split_inclusive('\n').map(|l| {
        let start = offset;
        offset += l.len();
        (start, l.trim_end_matches(['\n', '\r']))
    });

    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::parse(0, "missing 'ply' magic")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut saw_format = false;
    loop {
        let (off, line) = lines
            .next()
            .ok_or_else(|| Error::parse(text.len(), "missing 'end_header'"))?;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["format", "ascii", _] => saw_format = true,
            ["format", other, ..] => {
                return Err(Error::parse(off, format!("unsupported PLY format '{other}', expected ascii")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| Error::parse(off, format!("bad element count '{count}'")))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", count_ty, item_ty, _name] => {
                if ply_scalar_type(count_ty).is_none() || ply_scalar_type(item_ty).is_none() {
                    return Err(Error::parse(off, format!("unknown list types in '{line}'")));
                }
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(off, "property before any element"))?;
                el.properties.push(PlyProperty::List);
            }
            ["property", ty, name] => {
                if ply_scalar_type(ty).is_none() {
                    return Err(Error::parse(off, format!("unknown property type '{ty}'")));
                }
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(off, "property before any element"))?;
                el.properties.push(PlyProperty::Scalar(name.to_string()));
            }
            ["end_header"] => break,
            _ => return Err(Error::parse(off, format!("unrecognised header line '{line}'"))),
        }
    }
    if !saw_format {
        return Err(Error::parse(0, "missing 'format' line"));
    }

    let mut vertices = Vec::new();
    let mut scalars: Option<Vec<f64>> = None;
    let mut triangles = Vec::new();
    let mut data_lines = lines.filter(|(_, l)| !l.trim().is_empty());

    for el in &elements {
        let col = |name: &str| {
            el.properties
                .iter()
                .position(|p| matches!(p, PlyProperty::Scalar(n) if n == name))
        };
        let (xi, yi, zi, di) = (col("x"), col("y"), col("z"), col("distance"));
        if el.name == "vertex" {
            if xi.is_none() || yi.is_none() || zi.is_none() {
                return Err(Error::parse(0, "vertex element lacks x/y/z properties"));
            }
            if di.is_some() {
                scalars = Some(Vec::with_capacity(el.count));
            }
        }
        for row in 0..el.count {
            let (off, line) = data_lines.next().ok_or_else(|| {
                Error::parse(text.len(), format!("expected {} {} rows, found {row}", el.count, el.name))
            })?;
            let mut values: Vec<(usize, f64)> = Vec::new();
            let mut lists: Vec<Vec<usize>> = Vec::new();
            let mut words = line.split_whitespace();
            let word_off = |w: &str| off + (w.as_ptr() as usize - line.as_ptr() as usize);
            for prop in &el.properties {
                let w = words
                    .next()
                    .ok_or_else(|| Error::parse(off, format!("too few values in {} row {row}", el.name)))?;
                match prop {
                    PlyProperty::Scalar(_) => {
                        let v: f64 = w
                            .parse()
                            .map_err(|_| Error::parse(word_off(w), format!("bad number '{w}'")))?;
                        values.push((values.len(), v));
                    }
                    PlyProperty::List => {
                        let n: usize = w
                            .parse()
                            .map_err(|_| Error::parse(word_off(w), format!("bad list length '{w}'")))?;
                        let mut items = Vec::with_capacity(n);
                        for _ in 0..n {
                            let w = words
                                .next()
                                .ok_or_else(|| Error::parse(off, format!("list in {} row {row} is short", el.name)))?;
                            items.push(
                                w.parse()
                                    .map_err(|_| Error::parse(word_off(w), format!("bad index '{w}'")))?,
                            );
                        }
                        values.push((values.len(), f64::NAN));
                        lists.push(items);
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => {
                    let get = |i: Option<usize>| values[i.expect("checked above")].1;
                    vertices.push(Point3::new(get(xi), get(yi), get(zi)));
                    if let (Some(s), Some(d)) = (scalars.as_mut(), di) {
                        s.push(values[d].1);
                    }
                }
                "face" => {
                    let poly = lists
                        .first()
                        .ok_or_else(|| Error::parse(off, "face element has no index list"))?;
                    if poly.len() < 3 {
                        return Err(Error::parse(off, format!("face with {} indices", poly.len())));
                    }
                    for k in 1..poly.len() - 1 {
                        triangles.push([poly[0], poly[k], poly[k + 1]]);
                    }
                }
                _ => {}
            }
        }
    }

    let mesh = TriangleMesh::new(vertices, triangles)?;
    Ok((mesh, scalars))
}

/// Fixed-precision number formatting used by every export.
pub(crate) fn fmt6(v: f64) -> String {
    let s = format!("{v:.6}");
    // Avoid "-0.000000" so identical magnitudes serialize identically.
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// ASCII PLY text with optional `distance` scalar and vertex colors.
pub(crate) fn ply_text(mesh: &TriangleMesh, scalars: Option<&[f64]>, colors: Option<&[[u8; 3]]>) -> String {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\ncomment orbitfit\n");
    let _ = writeln!(out, "element vertex {}", mesh.vertex_count());
    out.push_str("property float x\nproperty float y\nproperty float z\n");
    if scalars.is_some() {
        out.push_str("property float distance\n");
    }
    if colors.is_some() {
        out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    let _ = writeln!(out, "element face {}", mesh.triangle_count());
    out.push_str("property list uchar int vertex_indices\nend_header\n");
    for (i, p) in mesh.vertices().iter().enumerate() {
        let _ = write!(out, "{} {} {}", fmt6(p.x), fmt6(p.y), fmt6(p.z));
        if let Some(s) = scalars {
            let _ = write!(out, " {}", fmt6(s[i]));
        }
        if let Some(c) = colors {
            let _ = write!(out, " {} {} {}", c[i][0], c[i][1], c[i][2]);
        }
        out.push('\n');
    }
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(out, "3 {a} {b} {c}");
    }
    out
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes an ASCII PLY with one `distance` value per vertex.
pub fn save_mesh_with_scalars(mesh: &TriangleMesh, scalars: &[f64], path: impl AsRef<Path>) -> Result<()> {
    if scalars.len() != mesh.vertex_count() {
        return Err(Error::invalid(format!(
            "{} scalars for {} vertices",
            scalars.len(),
            mesh.vertex_count()
        )));
    }
    write_file(path.as_ref(), ply_text(mesh, Some(scalars), None))
}

/// Writes an ASCII PLY storing coordinates as doubles in shortest round-trip form.
pub fn save_ply(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\ncomment orbitfit\n");
    let _ = writeln!(out, "element vertex {}", mesh.vertex_count());
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    let _ = writeln!(out, "element face {}", mesh.triangle_count());
    out.push_str("property list uchar int vertex_indices\nend_header\n");
    for p in mesh.vertices() {
        let _ = writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z);
    }
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(out, "3 {a} {b} {c}");
    }
    write_file(path.as_ref(), out)
}

pub fn save_stl_binary(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::with_capacity(84 + 50 * mesh.triangle_count());
    let mut header = [0u8; 80];
    header[..13].copy_from_slice(b"orbitfit mesh");
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.triangle_count() as u32).to_le_bytes());
    for t in 0..mesh.triangle_count() {
        let n = mesh.face_normal(t);
        for c in n.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        for p in mesh.triangle_points(t) {
            for c in p.iter() {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&[0, 0]);
    }
    write_file(path.as_ref(), out)
}

pub fn save_stl_ascii(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("solid orbitfit\n");
    for t in 0..mesh.triangle_count() {
        let n = mesh.face_normal(t);
        let _ = writeln!(out, "  facet normal {:e} {:e} {:e}", n.x as f32, n.y as f32, n.z as f32);
        out.push_str("    outer loop\n");
        for p in mesh.triangle_points(t) {
            let _ = writeln!(out, "      vertex {:e} {:e} {:e}", p.x as f32, p.y as f32, p.z as f32);
        }
        out.push_str("    endloop\n  endfacet\n");
    }
    out.push_str("endsolid orbitfit\n");
    write_file(path.as_ref(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn binary_cube_dedups_to_eight_vertices() {
        let dir = tmp();
        let path = dir.path().join("cube.stl");
        save_stl_binary(&synthetic::unit_cube(), &path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 84 + 12 * 50);
        let m = load_mesh(&path, None).unwrap();
        assert_eq!(m.vertex_count(), 8);
        assert_eq!(m.triangle_count(), 12);
        assert!(m.is_watertight());
    }

    #[test]
    fn ascii_stl_drops_zero_area_facet() {
        let dir = tmp();
        let path = dir.path().join("t.stl");
        let text = "solid t\n\
            facet normal 0 0 1\n outer loop\n vertex 0 0 0\n vertex 1 0 0\n vertex 0 1 0\n endloop\n endfacet\n\
            facet normal 0 0 1\n outer loop\n vertex 0 0 0\n vertex 1 0 0\n vertex 2 0 0\n endloop\n endfacet\n\
            endsolid t\n";
        std::fs::write(&path, text).unwrap();
        let m = load_mesh(&path, Some(MeshFormat::StlAscii)).unwrap();
        assert_eq!(m.triangle_count(), 1);
        assert_eq!(m.vertex_count(), 3);
        assert_eq!(m.warnings().len(), 1);
        assert!(m.warnings()[0].contains("degenerate"));
    }

    #[test]
    fn malformed_ascii_reports_offset() {
        let dir = tmp();
        let path = dir.path().join("bad.stl");
        let text = "solid t\nfacet normal 0 0 1\n outer loop\n vertex 0 0 zz\n";
        std::fs::write(&path, text).unwrap();
        match load_mesh(&path, Some(MeshFormat::StlAscii)) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, text.find("zz").unwrap()),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_binary_reports_offset() {
        let dir = tmp();
        let path = dir.path().join("cube.stl");
        save_stl_binary(&synthetic::unit_cube(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(84 + 50 * 3 + 10);
        std::fs::write(&path, &bytes).unwrap();
        match load_mesh(&path, Some(MeshFormat::StlBinary)) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 84 + 150),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_stl_is_invalid() {
        let dir = tmp();
        let path = dir.path().join("empty.stl");
        std::fs::write(&path, "solid e\nendsolid e\n").unwrap();
        assert!(matches!(load_mesh(&path, None), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn tetrahedron_ply_normals_point_outward() {
        let dir = tmp();
        let path = dir.path().join("tet.ply");
        let text = "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n\
            element face 4\nproperty list uchar int vertex_indices\nend_header\n\
            0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";
        std::fs::write(&path, text).unwrap();
        let m = load_mesh(&path, None).unwrap();
        assert_eq!((m.vertex_count(), m.triangle_count()), (4, 4));
        let c = m.centroid();
        for (p, n) in m.vertices().iter().zip(m.vertex_normals()) {
            assert!((p - c).dot(n) > 0.0, "normal at {p:?} points inward");
        }
        for t in 0..4 {
            let [a, b, cc] = m.triangle_points(t);
            let fc = (a.coords + b.coords + cc.coords) / 3.0;
            assert!((fc - c.coords).dot(&m.face_normal(t)) > 0.0);
        }
    }

    #[test]
    fn scalars_round_trip() {
        let dir = tmp();
        let path = dir.path().join("s.ply");
        let m = synthetic::uv_sphere(Point3::new(1.0, 2.0, 3.0), 4.0, 12, 6);
        let z: Vec<f64> = m.vertices().iter().map(|p| p.z).collect();
        save_mesh_with_scalars(&m, &z, &path).unwrap();
        let (back, s) = load_ply_with_scalars(&path).unwrap();
        let s = s.unwrap();
        assert_eq!(back.vertex_count(), m.vertex_count());
        for (a, b) in s.iter().zip(&z) {
            assert!((a - b).abs() <= 1e-6);
        }
        let zeros = vec![0.0; m.vertex_count()];
        save_mesh_with_scalars(&m, &zeros, &path).unwrap();
        assert!(load_ply_with_scalars(&path).unwrap().1.unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn short_scalar_list_rejected() {
        let m = synthetic::unit_cube();
        let dir = tmp();
        let err = save_mesh_with_scalars(&m, &[0.0; 7], dir.path().join("x.ply")).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn weld_merges_near_duplicates() {
        let facets = vec![
            [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            [[1.0, 0.0, 1e-5], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
        ];
        let exact = stl_from_facets(facets.clone(), LoadOptions::default()).unwrap();
        assert_eq!(exact.vertex_count(), 5);
        let welded = stl_from_facets(facets, LoadOptions { weld_tolerance: Some(1e-3) }).unwrap();
        assert_eq!(welded.vertex_count(), 4);
    }

    #[test]
    fn double_ply_round_trip_is_exact() {
        let dir = tmp();
        let path = dir.path().join("d.ply");
        let m = synthetic::uv_sphere(Point3::new(0.1, 0.2, 0.3), 7.3, 12, 5);
        save_ply(&m, &path).unwrap();
        let back = load_mesh(&path, None).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.triangles(), m.triangles());
    }
}
