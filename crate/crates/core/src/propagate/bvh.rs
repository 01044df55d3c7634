//! Bounding volume hierarchy over world-space triangles.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use crate::geom::Vec3;

/// Hits closer than this to the ray origin are ignored.
pub const RAY_EPSILON: f64 = 1e-7;
const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub a: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
    /// Unit normal following the winding order.
    pub normal: Vec3,
    pub object: u32,
}

impl Triangle {
    pub fn new(a: Vec3, b: Vec3, c: Vec3, object: u32) -> Self {
        let e1 = b - a;
        let e2 = c - a;
        Triangle {
            a,
            e1,
            e2,
            normal: e1.cross(e2).normalized(),
            object,
        }
    }

    fn bounds(&self) -> Aabb {
        let b = self.a + self.e1;
        let c = self.a + self.e2;
        Aabb {
            lo: self.a.min(b).min(c),
            hi: self.a.max(b).max(c),
        }
    }

    fn centroid(&self) -> Vec3 {
        self.a + (self.e1 + self.e2) / 3.0
    }

    /// Möller–Trumbore; distance along `dir` if the ray crosses the triangle.
    pub fn intersect(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        let p = dir.cross(self.e2);
        let det = self.e1.dot(p);
        if det.abs() < 1e-14 {
            return None;
        }
        let inv = 1.0 / det;
        let s = origin - self.a;
        let u = s.dot(p) * inv;
        if !(0.0..=1.0).contains(&u) {
            return None;
        }
        let q = s.cross(self.e1);
        let v = dir.dot(q) * inv;
        if v < 0.0 || u + v > 1.0 {
            return None;
        }
        let t = self.e2.dot(q) * inv;
        (t > RAY_EPSILON).then_some(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    const EMPTY: Aabb = Aabb {
        lo: Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
        hi: Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
    };

    fn union(self, o: Aabb) -> Aabb {
        Aabb {
            lo: self.lo.min(o.lo),
            hi: self.hi.max(o.hi),
        }
    }

    /// Entry distance of the slab test, if the box is reached before `t_max`.
    fn hit(&self, origin: Vec3, inv_dir: Vec3, t_max: f64) -> Option<f64> {
        let mut t0: f64 = 0.0;
        let mut t1 = t_max;
        for i in 0..3 {
            let mut ta = (self.lo[i] - origin[i]) * inv_dir[i];
            let mut tb = (self.hi[i] - origin[i]) * inv_dir[i];
            if ta > tb {
                core::mem::swap(&mut ta, &mut tb);
            }
            // NaN from 0·∞ keeps the previous bound
            if ta > t0 {
                t0 = ta;
            }
            if tb < t1 {
                t1 = tb;
            }
            if t0 > t1 * (1.0 + 1e-12) + 1e-12 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: `first..first+count` in the triangle array. Inner: children
    /// at `first` and `first + 1` in the node array, `count == 0`.
    first: usize,
    count: usize,
}

/// Closest intersection along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub triangle: usize,
    pub object: u32,
}

#[derive(Debug, Clone, Default)]
pub struct Bvh {
    triangles: Vec<Triangle>,
    nodes: Vec<Node>,
}

impl Bvh {
    pub fn build(mut triangles: Vec<Triangle>) -> Self {
        if triangles.is_empty() {
            return Bvh::default();
        }
        let mut nodes = Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1);
        nodes.push(Node {
            bounds: Aabb::EMPTY,
            first: 0,
            count: triangles.len(),
        });
        let mut stack = alloc::vec![0usize];
        while let Some(ni) = stack.pop() {
            let (first, count) = (nodes[ni].first, nodes[ni].count);
            let tris = &mut triangles[first..first + count];
            let bounds = tris.iter().fold(Aabb::EMPTY, |b, t| b.union(t.bounds()));
            nodes[ni].bounds = bounds;
            if count <= LEAF_SIZE {
                continue;
            }
            let cb = tris.iter().fold(Aabb::EMPTY, |b, t| {
                let c = t.centroid();
                b.union(Aabb { lo: c, hi: c })
            });
            let ext = cb.hi - cb.lo;
            let axis = if ext.x >= ext.y && ext.x >= ext.z {
                0
            } else if ext.y >= ext.z {
                1
            } else {
                2
            };
            let mid = count / 2;
            tris.select_nth_unstable_by(mid, |a, b| a.centroid()[axis].total_cmp(&b.centroid()[axis]));
            let left = nodes.len();
            nodes.push(Node {
                bounds: Aabb::EMPTY,
                first,
                count: mid,
            });
            nodes.push(Node {
                bounds: Aabb::EMPTY,
                first: first + mid,
                count: count - mid,
            });
            nodes[ni].first = left;
            nodes[ni].count = 0;
            stack.push(left);
            stack.push(left + 1);
        }
        Bvh { triangles, nodes }
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Closest hit within `(RAY_EPSILON, t_max)`, skipping `skip_object`.
    pub fn closest(&self, origin: Vec3, dir: Vec3, t_max: f64, skip_object: Option<u32>) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<Hit> = None;
        let mut limit = t_max;
        let mut stack = [0usize; 64];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp]];
            if node.bounds.hit(origin, inv, limit).is_none() {
                continue;
            }
            if node.count > 0 {
                for i in node.first..node.first + node.count {
                    let tri = &self.triangles[i];
                    if Some(tri.object) == skip_object {
                        continue;
                    }
                    if let Some(t) = tri.intersect(origin, dir) {
                        if t < limit {
                            limit = t;
                            best = Some(Hit {
                                t,
                                triangle: i,
                                object: tri.object,
                            });
                        }
                    }
                }
            } else {
                stack[sp] = node.first;
                stack[sp + 1] = node.first + 1;
                sp += 2;
            }
        }
        best
    }

    /// Every hit within `(RAY_EPSILON, t_max)`, in no particular order.
    pub fn all_hits(&self, origin: Vec3, dir: Vec3, t_max: f64, out: &mut Vec<Hit>) {
        out.clear();
        if self.nodes.is_empty() {
            return;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack = [0usize; 64];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp]];
            if node.bounds.hit(origin, inv, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                for i in node.first..node.first + node.count {
                    let tri = &self.triangles[i];
                    if let Some(t) = tri.intersect(origin, dir) {
                        if t < t_max {
                            out.push(Hit {
                                t,
                                triangle: i,
                                object: tri.object,
                            });
                        }
                    }
                }
            } else {
                stack[sp] = node.first;
                stack[sp + 1] = node.first + 1;
                sp += 2;
            }
        }
    }

    /// Whether the segment `a → b` crosses no triangle.
    pub fn segment_clear(&self, a: Vec3, b: Vec3) -> bool {
        let d = b - a;
        let len = d.norm();
        if len <= RAY_EPSILON {
            return true;
        }
        self.closest(a, d / len, len - RAY_EPSILON, None).is_none()
    }
}
