//! OFF and OBJ readers/writers (triangles only).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{MeshError, TriMesh, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(Self::Off),
            "obj" => Some(Self::Obj),
            _ => None,
        }
    }
}

impl FromStr for MeshFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(Self::Off),
            "obj" => Ok(Self::Obj),
            other => Err(format!("unknown mesh format '{other}'")),
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> MeshError {
    MeshError::Io { path: path.to_path_buf(), source }
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse { line, message: message.into() }
}

pub fn read_mesh(path: &Path, format: MeshFormat) -> Result<TriMesh, MeshError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let (v, f) = match format {
        MeshFormat::Off => parse_off(&text)?,
        MeshFormat::Obj => parse_obj(&text)?,
    };
    TriMesh::build(v, f)
}

pub fn write_mesh(mesh: &TriMesh, path: &Path, format: MeshFormat) -> Result<(), MeshError> {
    let text = match format {
        MeshFormat::Off => to_off(mesh),
        MeshFormat::Obj => to_obj(mesh),
    };
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt_coord(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_off(mesh: &TriMesh) -> String {
    let mut s = String::new();
    s.push_str("OFF\n");
    let _ = writeln!(s, "{} {} {}", mesh.num_vertices(), mesh.num_faces(), mesh.num_edges());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", fmt_coord(p.x), fmt_coord(p.y), fmt_coord(p.z));
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    s
}

pub fn to_obj(mesh: &TriMesh) -> String {
    let mut s = String::new();
    for p in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", fmt_coord(p.x), fmt_coord(p.y), fmt_coord(p.z));
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

fn parse_num<T: FromStr>(tok: &str, line: usize) -> Result<T, MeshError> {
    tok.parse().map_err(|_| parse_err(line, format!("invalid number '{tok}'")))
}

/// Lines with comments stripped, paired with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

pub fn parse_off(text: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>), MeshError> {
    let mut lines = content_lines(text);
    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let mut toks: Vec<&str> = header.split_whitespace().collect();
    if toks.first() != Some(&"OFF") {
        return Err(parse_err(ln, "missing OFF header"));
    }
    toks.remove(0);
    // Counts may follow the header on the same line.
    let (ln, counts) = if toks.is_empty() {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "missing counts line"))?;
        (ln, l.split_whitespace().collect::<Vec<_>>())
    } else {
        (ln, toks)
    };
    if counts.len() < 2 {
        return Err(parse_err(ln, "expected 'V F E' counts"));
    }
    let nv: usize = parse_num(counts[0], ln)?;
    let nf: usize = parse_num(counts[1], ln)?;

    let mut verts = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "unexpected end of vertex list"))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 3 {
            return Err(parse_err(ln, "vertex needs three coordinates"));
        }
        verts.push(Vec3::new(parse_num(t[0], ln)?, parse_num(t[1], ln)?, parse_num(t[2], ln)?));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "unexpected end of face list"))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        let n: usize = parse_num(t[0], ln)?;
        if n != 3 {
            return Err(parse_err(ln, format!("only triangles are supported, found {n}-gon")));
        }
        if t.len() < 4 {
            return Err(parse_err(ln, "face needs three indices"));
        }
        faces.push([parse_num(t[1], ln)?, parse_num(t[2], ln)?, parse_num(t[3], ln)?]);
    }
    Ok((verts, faces))
}

pub fn parse_obj(text: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>), MeshError> {
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    for (ln, l) in content_lines(text) {
        let mut t = l.split_whitespace();
        match t.next() {
            Some("v") => {
                let c: Vec<&str> = t.collect();
                if c.len() < 3 {
                    return Err(parse_err(ln, "vertex needs three coordinates"));
                }
                verts.push(Vec3::new(parse_num(c[0], ln)?, parse_num(c[1], ln)?, parse_num(c[2], ln)?));
            }
            Some("f") => {
                let c: Vec<&str> = t.collect();
                if c.len() != 3 {
                    return Err(parse_err(ln, format!("only triangles are supported, found {}-gon", c.len())));
                }
                let mut f = [0usize; 3];
                for (k, tok) in c.iter().enumerate() {
                    // "i", "i/t", "i//n" and "i/t/n" all start with the vertex index.
                    let head = tok.split('/').next().unwrap_or("");
                    let i: i64 = parse_num(head, ln)?;
                    f[k] = if i > 0 {
                        (i - 1) as usize
                    } else if i < 0 && (-i) as usize <= verts.len() {
                        verts.len() - (-i) as usize
                    } else {
                        return Err(parse_err(ln, format!("invalid vertex index {i}")));
                    };
                }
                faces.push(f);
            }
            _ => {}
        }
    }
    Ok((verts, faces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tests::tetrahedron;

    #[test]
    fn quad_in_obj_is_rejected() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        match parse_obj(text) {
            Err(MeshError::Parse { line: 5, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quad_in_off_is_rejected() {
        let text = "OFF\n4 1 4\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        assert!(matches!(parse_off(text), Err(MeshError::Parse { line: 7, .. })));
    }

    #[test]
    fn bad_number_reports_line() {
        let text = "OFF\n# comment\n4 4 6\n0 0 0\n1 x 0\n";
        assert!(matches!(parse_off(text), Err(MeshError::Parse { line: 5, .. })));
    }

    #[test]
    fn obj_slash_and_negative_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2//1 -1\n";
        let (v, f) = parse_obj(text).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(f, vec![[0, 1, 2]]);
    }

    #[test]
    fn off_roundtrip_is_exact() {
        let t = tetrahedron();
        let (v, f) = parse_off(&to_off(&t)).unwrap();
        assert_eq!(f, t.faces());
        assert_eq!(v, t.vertices());
    }

    #[test]
    fn empty_path_is_io_error() {
        let t = tetrahedron();
        assert!(matches!(write_mesh(&t, Path::new(""), MeshFormat::Off), Err(MeshError::Io { .. })));
    }
}
