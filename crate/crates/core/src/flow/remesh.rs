//! Local remeshing: long-edge splits, short-edge collapses, Delaunay flips
//! and tangential smoothing of the vertices those operations touched.
//!
//! Every operation is quality guarded: it is skipped if it would create a
//! face angle smaller than the smallest angle of the input mesh, or fold a
//! face over. Hence the minimum face angle never decreases.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use crate::mesh::{face_angles, TriMesh, Vec3};

use super::{FlowConfig, FlowError};

const MAX_FLIP_PASSES: usize = 20;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RemeshStats {
    pub splits: usize,
    pub collapses: usize,
    pub flips: usize,
    pub smoothed: usize,
}

impl RemeshStats {
    pub fn changed(&self) -> bool {
        self.topology_changed() || self.smoothed > 0
    }

    pub fn topology_changed(&self) -> bool {
        self.splits + self.collapses + self.flips > 0
    }
}

/// Remeshes toward the configured edge-length band; the input is returned
/// unchanged when no edge is out of band and no flip applies.
pub fn remesh(mesh: &TriMesh, config: &FlowConfig) -> Result<TriMesh, FlowError> {
    remesh_with_stats(mesh, config).map(|(m, _)| m)
}

pub fn remesh_with_stats(mesh: &TriMesh, config: &FlowConfig) -> Result<(TriMesh, RemeshStats), FlowError> {
    let mut w = Work {
        pos: mesh.vertices().to_vec(),
        faces: mesh.faces().to_vec(),
        min_angle: mesh.min_angle(),
        touched: HashSet::new(),
    };
    let mean = mesh.mean_edge_length();
    let (lo, hi) = config.edge_len_band;
    let mut stats = RemeshStats {
        splits: w.split_long(hi * mean),
        collapses: w.collapse_short(lo * mean),
        ..Default::default()
    };
    for _ in 0..MAX_FLIP_PASSES {
        let n = w.flip_pass();
        stats.flips += n;
        if n == 0 {
            break;
        }
    }
    if !stats.topology_changed() {
        return Ok((mesh.clone(), stats));
    }
    stats.smoothed = w.smooth(config.tangential_smooth_weight);
    let (pos, faces) = w.compact();
    let out = TriMesh::build(pos, faces).map_err(|e| FlowError::RemeshFailed(e.to_string()))?;
    Ok((out, stats))
}

struct Work {
    pos: Vec<Vec3>,
    /// Removed faces are marked with `usize::MAX` in the first slot.
    faces: Vec<[usize; 3]>,
    /// Smallest face angle of the input; no operation may go below it.
    min_angle: f64,
    touched: HashSet<usize>,
}

const REMOVED: usize = usize::MAX;

fn rotate_to(f: [usize; 3], first: usize) -> [usize; 3] {
    let k = f.iter().position(|&v| v == first).expect("vertex in face");
    [f[k], f[(k + 1) % 3], f[(k + 2) % 3]]
}

fn normal(p: &[Vec3; 3]) -> Vec3 {
    (p[1] - p[0]).cross(&(p[2] - p[0]))
}

fn ring(faces: &[[usize; 3]], vf: &[Vec<usize>], v: usize) -> HashSet<usize> {
    vf[v].iter().flat_map(|&f| faces[f]).filter(|&u| u != v).collect()
}

fn min_face_angle(p: &[Vec3; 3]) -> f64 {
    face_angles(p).into_iter().fold(PI, f64::min)
}

impl Work {
    fn tri(&self, f: [usize; 3]) -> [Vec3; 3] {
        [self.pos[f[0]], self.pos[f[1]], self.pos[f[2]]]
    }

    /// Directed edge `(a, b)` -> face holding it.
    fn directed_edges(&self) -> HashMap<(usize, usize), usize> {
        let mut map = HashMap::with_capacity(3 * self.faces.len());
        for (fi, f) in self.faces.iter().enumerate() {
            if f[0] == REMOVED {
                continue;
            }
            for k in 0..3 {
                map.insert((f[k], f[(k + 1) % 3]), fi);
            }
        }
        map
    }

    fn vertex_faces(&self) -> Vec<Vec<usize>> {
        let mut vf = vec![Vec::new(); self.pos.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            if f[0] == REMOVED {
                continue;
            }
            for &v in f {
                vf[v].push(fi);
            }
        }
        vf
    }

    fn undirected(map: &HashMap<(usize, usize), usize>) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = map.keys().copied().filter(|(a, b)| a < b).collect();
        e.sort_unstable();
        e
    }

    fn split_long(&mut self, max_len: f64) -> usize {
        let map = self.directed_edges();
        let mut long: Vec<(f64, usize, usize)> = Self::undirected(&map)
            .into_iter()
            .map(|(a, b)| ((self.pos[a] - self.pos[b]).norm(), a, b))
            .filter(|e| e.0 > max_len)
            .collect();
        long.sort_by(|x, y| y.0.total_cmp(&x.0));
        let mut dirty = HashSet::new();
        let mut count = 0;
        for (_, a, b) in long {
            let (f1, f2) = (map[&(a, b)], map[&(b, a)]);
            if dirty.contains(&f1) || dirty.contains(&f2) {
                continue;
            }
            let [_, _, c] = rotate_to(self.faces[f1], a);
            let [_, _, d] = rotate_to(self.faces[f2], b);
            let mid = (self.pos[a] + self.pos[b]) * 0.5;
            let m = self.pos.len();
            self.pos.push(mid);
            let new = [[a, m, c], [m, b, c], [b, m, d], [m, a, d]];
            let ok = new.iter().all(|&f| min_face_angle(&self.tri(f)) >= self.min_angle);
            if !ok {
                self.pos.pop();
                continue;
            }
            self.faces[f1] = new[0];
            self.faces[f2] = new[2];
            dirty.extend([f1, f2, self.faces.len(), self.faces.len() + 1]);
            self.faces.push(new[1]);
            self.faces.push(new[3]);
            self.touched.extend([a, b, c, d, m]);
            count += 1;
        }
        count
    }

    fn collapse_short(&mut self, min_len: f64) -> usize {
        let map = self.directed_edges();
        let vf = self.vertex_faces();
        let mut short: Vec<(f64, usize, usize)> = Self::undirected(&map)
            .into_iter()
            .map(|(a, b)| ((self.pos[a] - self.pos[b]).norm(), a, b))
            .filter(|e| e.0 < min_len)
            .collect();
        short.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut locked = HashSet::new();
        let mut alive = self.faces.iter().filter(|f| f[0] != REMOVED).count();
        let mut count = 0;
        for (_, a, b) in short {
            if locked.contains(&a) || locked.contains(&b) || alive <= 4 {
                continue;
            }
            let (f1, f2) = (map[&(a, b)], map[&(b, a)]);
            let [_, _, c] = rotate_to(self.faces[f1], a);
            let [_, _, d] = rotate_to(self.faces[f2], b);
            let (na, nb) = (ring(&self.faces, &vf, a), ring(&self.faces, &vf, b));
            let common: HashSet<usize> = na.intersection(&nb).copied().collect();
            if common != HashSet::from([c, d]) || ring(&self.faces, &vf, c).len() <= 3 || ring(&self.faces, &vf, d).len() <= 3 {
                continue;
            }
            let mid = (self.pos[a] + self.pos[b]) * 0.5;
            let mut updates = Vec::new();
            let mut ok = true;
            for &fi in vf[a].iter().chain(&vf[b]) {
                if fi == f1 || fi == f2 {
                    continue;
                }
                let old = self.faces[fi];
                let new = old.map(|v| if v == b { a } else { v });
                let before = self.tri(old);
                let mut after = self.tri(new);
                for k in 0..3 {
                    if new[k] == a {
                        after[k] = mid;
                    }
                }
                if normal(&before).dot(&normal(&after)) <= 0.0 || min_face_angle(&after) < self.min_angle {
                    ok = false;
                    break;
                }
                updates.push((fi, new));
            }
            if !ok {
                continue;
            }
            for (fi, new) in updates {
                self.faces[fi] = new;
            }
            self.faces[f1] = [REMOVED; 3];
            self.faces[f2] = [REMOVED; 3];
            alive -= 2;
            self.pos[a] = mid;
            locked.extend(na.iter().chain(&nb).copied());
            locked.extend([a, b]);
            self.touched.extend(na.iter().copied().filter(|&v| v != b));
            self.touched.insert(a);
            self.touched.remove(&b);
            count += 1;
        }
        count
    }

    fn flip_pass(&mut self) -> usize {
        let map = self.directed_edges();
        let mut edges: HashSet<(usize, usize)> = Self::undirected(&map).into_iter().collect();
        let mut valence = vec![0usize; self.pos.len()];
        for &(a, b) in &edges {
            valence[a] += 1;
            valence[b] += 1;
        }
        let mut dirty = HashSet::new();
        let mut count = 0;
        for (a, b) in Self::undirected(&map) {
            let (f1, f2) = (map[&(a, b)], map[&(b, a)]);
            if dirty.contains(&f1) || dirty.contains(&f2) || valence[a] <= 3 || valence[b] <= 3 {
                continue;
            }
            let [_, _, c] = rotate_to(self.faces[f1], a);
            let [_, _, d] = rotate_to(self.faces[f2], b);
            if edges.contains(&(c.min(d), c.max(d))) {
                continue;
            }
            let (t1, t2) = (self.tri([a, b, c]), self.tri([b, a, d]));
            if face_angles(&t1)[2] + face_angles(&t2)[2] <= PI + 1e-12 {
                continue;
            }
            let (n1, n2) = ([a, d, c], [d, b, c]);
            let (s1, s2) = (self.tri(n1), self.tri(n2));
            let old_n = normal(&t1) + normal(&t2);
            if normal(&s1).dot(&old_n) <= 0.0 || normal(&s2).dot(&old_n) <= 0.0 {
                continue;
            }
            let old_min = min_face_angle(&t1).min(min_face_angle(&t2));
            let new_min = min_face_angle(&s1).min(min_face_angle(&s2));
            if new_min <= old_min {
                continue;
            }
            self.faces[f1] = n1;
            self.faces[f2] = n2;
            edges.remove(&(a, b));
            edges.insert((c.min(d), c.max(d)));
            valence[a] -= 1;
            valence[b] -= 1;
            valence[c] += 1;
            valence[d] += 1;
            dirty.extend([f1, f2]);
            self.touched.extend([a, b, c, d]);
            count += 1;
        }
        count
    }

    /// Moves each touched vertex toward its one-ring centroid within its
    /// tangent plane; a move is kept only if the local minimum angle does not drop.
    fn smooth(&mut self, weight: f64) -> usize {
        if weight == 0.0 {
            return 0;
        }
        let vf = self.vertex_faces();
        let mut touched: Vec<usize> = self.touched.iter().copied().collect();
        touched.sort_unstable();
        let mut count = 0;
        for v in touched {
            if vf[v].is_empty() {
                continue;
            }
            let ring: HashSet<usize> = vf[v].iter().flat_map(|&f| self.faces[f]).filter(|&u| u != v).collect();
            let centroid = ring.iter().map(|&u| self.pos[u]).sum::<Vec3>() / ring.len() as f64;
            let mut n = Vec3::zeros();
            for &fi in &vf[v] {
                let f = rotate_to(self.faces[fi], v);
                let t = self.tri(f);
                n += normal(&t).normalize() * face_angles(&t)[0];
            }
            let n = n.normalize();
            let disp = (centroid - self.pos[v]) * weight;
            let disp = disp - n * disp.dot(&n);
            let local_min = |w: &Work| vf[v].iter().map(|&f| min_face_angle(&w.tri(w.faces[f]))).fold(PI, f64::min);
            let before = local_min(self);
            let old = self.pos[v];
            let normals: Vec<Vec3> = vf[v].iter().map(|&f| normal(&self.tri(self.faces[f]))).collect();
            self.pos[v] = old + disp;
            let folded = vf[v].iter().zip(&normals).any(|(&f, n0)| normal(&self.tri(self.faces[f])).dot(n0) <= 0.0);
            if folded || local_min(self) < before {
                self.pos[v] = old;
            } else {
                count += 1;
            }
        }
        count
    }

    /// Drops removed faces and orphaned vertices.
    fn compact(self) -> (Vec<Vec3>, Vec<[usize; 3]>) {
        let faces: Vec<[usize; 3]> = self.faces.into_iter().filter(|f| f[0] != REMOVED).collect();
        let mut used = vec![false; self.pos.len()];
        for f in &faces {
            for &v in f {
                used[v] = true;
            }
        }
        let mut remap = vec![usize::MAX; self.pos.len()];
        let mut pos = Vec::new();
        for (i, p) in self.pos.into_iter().enumerate() {
            if used[i] {
                remap[i] = pos.len();
                pos.push(p);
            }
        }
        let faces = faces.into_iter().map(|f| f.map(|v| remap[v])).collect();
        (pos, faces)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::icosphere;

    #[test]
    fn uniform_icosphere_is_unchanged() {
        let m = icosphere(3).unwrap();
        let (r, stats) = remesh_with_stats(&m, &FlowConfig::default()).unwrap();
        assert!(!stats.changed());
        assert_eq!(r.vertices(), m.vertices());
        assert_eq!(r.faces(), m.faces());
    }

    #[test]
    fn short_edges_collapse() {
        let m = icosphere(2).unwrap();
        let mean = m.mean_edge_length();
        // Pull one vertex toward a neighbour so a single edge falls under the band.
        let (a, b) = (m.edges()[0][0], m.edges()[0][1]);
        let mut p = m.vertices().to_vec();
        p[a] = p[b] + (p[a] - p[b]) * 0.2;
        let m = m.with_positions(p).unwrap();
        assert!(m.edge_length(0) < 0.3 * mean);
        let cfg = FlowConfig { edge_len_band: (0.3, 3.0), ..Default::default() };
        let (r, stats) = remesh_with_stats(&m, &cfg).unwrap();
        assert_eq!(stats.collapses, 1);
        assert_eq!(r.num_vertices(), m.num_vertices() - 1);
        assert_eq!(r.num_edges(), m.num_edges() - 3);
        assert!(r.min_angle() >= m.min_angle());
    }
}
