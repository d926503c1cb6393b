//! Wavefront OBJ + MTL reader and writer.
//!
//! Only what textured scans need: `v`, `vt`, `vn`, polygonal `f` (fan
//! triangulated, negative indices allowed), `mtllib`, `usemtl`, and the MTL
//! keys `Ka`, `Kd`, `Ks`, `Ns`, `map_Kd`.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::Vector3;

use super::mesh::{area_weighted_normals, Material, TexturedMesh};
use super::GeometryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Element {
    Position,
    TexCoord,
    Normal,
}

impl std::fmt::Display for Element {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Element::Position => "vertex",
            Element::TexCoord => "texture coordinate",
            Element::Normal => "normal",
        })
    }
}

#[derive(Debug, Default, Clone)]
struct MtlEntry {
    material: Material,
    texture: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Corner {
    v: usize,
    vt: Option<usize>,
    vn: Option<usize>,
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> GeometryError {
    GeometryError::Malformed {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_floats<const N: usize>(
    path: &Path,
    line: usize,
    fields: &[&str],
    min: usize,
) -> Result<[f64; N], GeometryError> {
    if fields.len() < min {
        return Err(malformed(path, line, format!("expected at least {min} numbers")));
    }
    let mut out = [0.0; N];
    for (slot, text) in out.iter_mut().zip(fields) {
        *slot = text
            .parse::<f64>()
            .map_err(|_| malformed(path, line, format!("invalid number `{text}`")))?;
    }
    Ok(out)
}

fn resolve_index(path: &Path, line: usize, text: &str, element: Element, count: usize) -> Result<usize, GeometryError> {
    let raw: i64 = text
        .parse()
        .map_err(|_| malformed(path, line, format!("invalid index `{text}`")))?;
    let resolved = match raw {
        0 => return Err(malformed(path, line, "index 0 is not valid in OBJ")),
        r if r > 0 => r - 1,
        r => count as i64 + r,
    };
    if resolved < 0 || resolved as usize >= count {
        return Err(GeometryError::ObjIndexOutOfRange {
            path: path.to_path_buf(),
            line,
            element,
            index: raw,
            count,
        });
    }
    Ok(resolved as usize)
}

fn read_text(path: &Path) -> Result<String, GeometryError> {
    fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            GeometryError::FileNotFound(path.to_path_buf())
        } else {
            GeometryError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

fn parse_mtl(path: &Path) -> Result<HashMap<String, MtlEntry>, GeometryError> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = HashMap::new();
    let mut current: Option<(String, MtlEntry)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut fields = content.split_whitespace();
        let Some(key) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        if key == "newmtl" {
            if let Some((name, entry)) = current.take() {
                out.insert(name, entry);
            }
            let name = rest.join(" ");
            current = Some((name, MtlEntry::default()));
            continue;
        }
        let Some((_, entry)) = current.as_mut() else {
            continue;
        };
        match key {
            "Ka" | "Kd" | "Ks" => {
                let rgb: [f64; 3] = parse_floats(path, line, &rest, 1)?;
                let value = if rest.len() >= 3 {
                    rgb.iter().sum::<f64>() / 3.0
                } else {
                    rgb[0]
                };
                match key {
                    "Ka" => entry.material.ambient = value,
                    "Kd" => entry.material.diffuse = value,
                    _ => entry.material.specular = value,
                }
            }
            "Ns" => {
                let [ns]: [f64; 1] = parse_floats(path, line, &rest, 1)?;
                entry.material.shininess = ns;
            }
            "map_Kd" => {
                // Options such as `-s 1 1 1` precede the file name.
                let file = rest
                    .last()
                    .ok_or_else(|| malformed(path, line, "map_Kd without a file name"))?;
                entry.texture = Some(base.join(file));
            }
            _ => {}
        }
    }
    if let Some((name, entry)) = current.take() {
        out.insert(name, entry);
    }
    Ok(out)
}

/// Reads an OBJ mesh with its MTL-referenced diffuse texture.
///
/// Normals missing from the file are recomputed with area weighting, shared
/// across UV seams.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TexturedMesh, GeometryError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new("."));

    let mut positions: Vec<Vector3<f64>> = Vec::new();
    let mut texcoords: Vec<[f64; 2]> = Vec::new();
    let mut file_normals: Vec<Vector3<f64>> = Vec::new();
    let mut materials: HashMap<String, MtlEntry> = HashMap::new();
    let mut used_material: Option<String> = None;

    let mut corner_ids: HashMap<Corner, u32> = HashMap::new();
    let mut corners: Vec<Corner> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut fields = content.split_whitespace();
        let Some(key) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        match key {
            "v" => {
                let [x, y, z]: [f64; 3] = parse_floats(path, line, &rest, 3)?;
                positions.push(Vector3::new(x, y, z));
            }
            "vt" => {
                let [u, v]: [f64; 2] = parse_floats(path, line, &rest, 1)?;
                texcoords.push([u, v]);
            }
            "vn" => {
                let [x, y, z]: [f64; 3] = parse_floats(path, line, &rest, 3)?;
                file_normals.push(Vector3::new(x, y, z));
            }
            "f" => {
                if rest.len() < 3 {
                    return Err(malformed(path, line, "face needs at least 3 corners"));
                }
                let mut face = Vec::with_capacity(rest.len());
                for token in &rest {
                    let mut parts = token.split('/');
                    let v = resolve_index(
                        path,
                        line,
                        parts.next().unwrap_or(""),
                        Element::Position,
                        positions.len(),
                    )?;
                    let vt = match parts.next() {
                        Some(t) if !t.is_empty() => {
                            Some(resolve_index(path, line, t, Element::TexCoord, texcoords.len())?)
                        }
                        _ => None,
                    };
                    let vn = match parts.next() {
                        Some(t) if !t.is_empty() => {
                            Some(resolve_index(path, line, t, Element::Normal, file_normals.len())?)
                        }
                        _ => None,
                    };
                    let corner = Corner { v, vt, vn };
                    let id = *corner_ids.entry(corner).or_insert_with(|| {
                        corners.push(corner);
                        (corners.len() - 1) as u32
                    });
                    face.push(id);
                }
                for k in 1..face.len() - 1 {
                    triangles.push([face[0], face[k], face[k + 1]]);
                }
            }
            "mtllib" => {
                let file = rest.join(" ");
                if file.is_empty() {
                    return Err(malformed(path, line, "mtllib without a file name"));
                }
                materials.extend(parse_mtl(&base.join(file))?);
            }
            "usemtl" => {
                let name = rest.join(" ");
                let textured = materials.get(&name).is_some_and(|m| m.texture.is_some());
                match &used_material {
                    None => used_material = Some(name),
                    Some(prev) if *prev != name && textured => {
                        log::warn!(
                            "{}: only the first textured material is used; ignoring `{name}`",
                            path.display()
                        );
                    }
                    Some(_) => {}
                }
            }
            _ => {}
        }
    }

    if triangles.is_empty() {
        return Err(malformed(path, 0, "no faces"));
    }

    let entry = used_material
        .as_ref()
        .and_then(|name| materials.get(name))
        .filter(|m| m.texture.is_some())
        .or_else(|| {
            let mut textured: Vec<_> = materials.iter().filter(|(_, m)| m.texture.is_some()).collect();
            textured.sort_by(|a, b| a.0.cmp(b.0));
            textured.first().map(|(_, m)| *m)
        })
        .ok_or_else(|| GeometryError::MissingTexture {
            path: path.to_path_buf(),
            material: used_material.clone(),
        })?;
    let texture_path = entry.texture.clone().expect("filtered on texture");
    if !texture_path.exists() {
        return Err(GeometryError::TextureNotFound {
            mesh: path.to_path_buf(),
            texture: texture_path,
        });
    }
    let texture = image::open(&texture_path)
        .map_err(|source| GeometryError::TextureDecode {
            path: texture_path.clone(),
            source,
        })?
        .to_rgb8();

    let vertices: Vec<_> = corners.iter().map(|c| positions[c.v]).collect();
    let uvs: Vec<_> = corners
        .iter()
        .map(|c| c.vt.map_or([0.0, 0.0], |t| texcoords[t]))
        .collect();
    let has_normals = corners.iter().all(|c| c.vn.is_some());
    let normals = if has_normals {
        corners
            .iter()
            .map(|c| {
                let n = file_normals[c.vn.unwrap()];
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    Vector3::z()
                }
            })
            .collect()
    } else {
        let group: Vec<usize> = corners.iter().map(|c| c.v).collect();
        area_weighted_normals(&vertices, &triangles, &group)
    };

    TexturedMesh::new(vertices, normals, uvs, triangles, Arc::new(texture), entry.material)
}

/// Writes `<stem>.obj`, `<stem>.mtl` and `<stem>.png` into `dir`.
pub fn write_mesh(mesh: &TexturedMesh, dir: &Path, stem: &str) -> Result<PathBuf, GeometryError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| GeometryError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let obj_path = dir.join(format!("{stem}.obj"));
    let mtl_path = dir.join(format!("{stem}.mtl"));
    let png_path = dir.join(format!("{stem}.png"));

    mesh.texture
        .save(&png_path)
        .map_err(|source| GeometryError::TextureDecode {
            path: png_path.clone(),
            source,
        })?;

    let m = mesh.material;
    let mtl = format!(
        "newmtl {stem}\nKa {a} {a} {a}\nKd {d} {d} {d}\nKs {s} {s} {s}\nNs {n}\nmap_Kd {stem}.png\n",
        a = m.ambient,
        d = m.diffuse,
        s = m.specular,
        n = m.shininess
    );
    fs::write(&mtl_path, mtl).map_err(io(&mtl_path))?;

    let mut out = Vec::new();
    let w = |out: &mut Vec<u8>, s: String| out.extend_from_slice(s.as_bytes());
    w(&mut out, format!("mtllib {stem}.mtl\nusemtl {stem}\n"));
    for v in &mesh.vertices {
        w(&mut out, format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for t in &mesh.uvs {
        w(&mut out, format!("vt {} {}\n", t[0], t[1]));
    }
    for n in &mesh.normals {
        w(&mut out, format!("vn {} {} {}\n", n.x, n.y, n.z));
    }
    for tri in &mesh.triangles {
        let [a, b, c] = tri.map(|i| i + 1);
        w(&mut out, format!("f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}\n"));
    }
    let mut file = fs::File::create(&obj_path).map_err(io(&obj_path))?;
    file.write_all(&out).map_err(io(&obj_path))?;
    Ok(obj_path)
}
