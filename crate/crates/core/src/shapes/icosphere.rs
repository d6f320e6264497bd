use std::collections::HashMap;

use crate::mesh::{TriMesh, Vec3};

use super::ShapeError;

pub const MAX_ICOSPHERE_LEVEL: u32 = 8;

/// Icosahedron refined `level` times by 4-to-1 subdivision, vertices on the unit sphere.
///
/// Has `10·4^level + 2` vertices.
pub fn icosphere(level: u32) -> Result<TriMesh, ShapeError> {
    if level > MAX_ICOSPHERE_LEVEL {
        return Err(ShapeError::LevelTooLarge(level));
    }
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];

    for _ in 0..level {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Ok(TriMesh::build(verts, faces)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_follow_subdivision_formula() {
        for level in 0..=4 {
            let m = icosphere(level).unwrap();
            assert_eq!(m.num_vertices(), 10 * 4usize.pow(level) + 2);
            assert_eq!(m.num_faces(), 20 * 4usize.pow(level));
        }
        assert_eq!(icosphere(3).unwrap().num_vertices(), 642);
    }

    #[test]
    fn vertices_lie_on_unit_sphere() {
        let m = icosphere(3).unwrap();
        let worst = m.vertices().iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-15, "{worst}");
    }

    #[test]
    fn level_too_large() {
        assert!(matches!(icosphere(9), Err(ShapeError::LevelTooLarge(9))));
    }
}
