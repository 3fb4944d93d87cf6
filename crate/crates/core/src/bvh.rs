//! Bounding volume hierarchy over triangles for nearest-hit ray queries.

use alloc::vec::Vec;

use crate::geometry::{Aabb, Ray, Triangle, Vec3};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: first primitive. Interior: index of the right child (left is `self + 1`).
    index: u32,
    /// Primitive count; zero for interior nodes.
    count: u32,
}

/// Result of a nearest-hit query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub distance: f64,
    /// Index into the triangle list the BVH was built from.
    pub triangle: usize,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Triangle indices, permuted so each leaf owns a contiguous range.
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(triangles: &[Triangle]) -> Self {
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let centroids: Vec<Vec3> = triangles.iter().map(Triangle::centroid).collect();
        let bounds: Vec<Aabb> = triangles.iter().map(Triangle::bounds).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1);
        if !triangles.is_empty() {
            build_node(&mut nodes, &mut order, 0, &centroids, &bounds);
        }
        Self { nodes, order }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nearest triangle hit closer than `t_max`. Ties keep the lower triangle index.
    pub fn nearest(&self, triangles: &[Triangle], ray: &Ray, t_max: f64) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z);
        let mut best: Option<Hit> = None;
        let mut limit = t_max;
        let mut stack = [0u32; 64];
        let mut sp = 1usize;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            // `limit` widened by an ulp-ish margin so equal-distance ties are still visited.
            if node.bounds.hit(ray, inv, limit + 1e-9).is_none() {
                continue;
            }
            if node.count > 0 {
                let start = node.index as usize;
                for &ti in &self.order[start..start + node.count as usize] {
                    let ti = ti as usize;
                    if let Some(t) = triangles[ti].intersect(ray, limit + 1e-9) {
                        let better = match best {
                            None => t < limit,
                            Some(b) => t < b.distance || (t == b.distance && ti < b.triangle),
                        };
                        if better {
                            best = Some(Hit {
                                distance: t,
                                triangle: ti,
                            });
                            limit = t;
                        }
                    }
                }
            } else {
                let here = stack[sp] + 1;
                let left = here;
                let right = node.index;
                stack[sp] = right;
                stack[sp + 1] = left;
                sp += 2;
            }
        }
        best
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [u32],
    first: usize,
    centroids: &[Vec3],
    bounds: &[Aabb],
) -> usize {
    let me = nodes.len();
    let node_bounds = order
        .iter()
        .fold(Aabb::EMPTY, |b, &i| b.union(bounds[i as usize]));
    nodes.push(Node {
        bounds: node_bounds,
        index: first as u32,
        count: order.len() as u32,
    });
    if order.len() <= LEAF_SIZE {
        return me;
    }
    let cbounds = order
        .iter()
        .fold(Aabb::EMPTY, |b, &i| b.grow(centroids[i as usize]));
    let ext = cbounds.extent();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    if ext.axis(axis) <= 0.0 {
        // All centroids coincide; splitting cannot help.
        return me;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        let ca = centroids[a as usize].axis(axis);
        let cb = centroids[b as usize].axis(axis);
        ca.total_cmp(&cb).then(a.cmp(&b))
    });
    let (lo, hi) = order.split_at_mut(mid);
    build_node(nodes, lo, first, centroids, bounds);
    let right = build_node(nodes, hi, first + mid, centroids, bounds);
    nodes[me].index = right as u32;
    nodes[me].count = 0;
    me
}

/// Linear scan over every triangle. Used as the reference for BVH queries.
pub fn nearest_brute_force(triangles: &[Triangle], ray: &Ray, t_max: f64) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (i, tri) in triangles.iter().enumerate() {
        if let Some(t) = tri.intersect(ray, t_max) {
            if best.is_none_or(|b| t < b.distance) {
                best = Some(Hit {
                    distance: t,
                    triangle: i,
                });
            }
        }
    }
    best
}
