//! Binary axis-aligned bounding-box hierarchy.
//!
//! Built top-down by splitting at the median box center along the longest
//! axis of the center bounds. Ties are broken by input index so the tree is a
//! pure function of its input.

use crate::geom::Aabb;
use std::cmp::Ordering;

pub const DEFAULT_LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
pub struct BvhNode {
    pub bounds: Aabb,
    /// Indices of the two children, or `None` for a leaf.
    pub children: Option<[usize; 2]>,
    /// Range into [`BvhTree::order`] covered by this subtree.
    pub start: usize,
    pub count: usize,
}

impl BvhNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct BvhTree {
    nodes: Vec<BvhNode>,
    order: Vec<usize>,
    boxes: Vec<Aabb>,
}

/// Build with the default leaf size.
pub fn build_bvh(boxes: Vec<Aabb>) -> BvhTree {
    BvhTree::build(boxes, DEFAULT_LEAF_SIZE)
}

impl BvhTree {
    pub fn build(boxes: Vec<Aabb>, leaf_size: usize) -> BvhTree {
        assert!(!boxes.is_empty(), "BVH needs at least one box");
        let leaf_size = leaf_size.max(1);
        let mut order: Vec<usize> = (0..boxes.len()).collect();
        let centers: Vec<[f64; 3]> = boxes.iter().map(|b| b.center().to_array()).collect();
        let mut nodes = Vec::with_capacity(2 * boxes.len() / leaf_size + 1);
        build_node(&boxes, &centers, &mut order, 0, leaf_size, &mut nodes);
        BvhTree { nodes, order, boxes }
    }

    pub fn root(&self) -> &BvhNode {
        &self.nodes[0]
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &BvhNode {
        &self.nodes[i]
    }

    /// Permutation of input indices; each node covers a contiguous range.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn boxes(&self) -> &[Aabb] {
        &self.boxes
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Primitive indices stored under node `i`.
    pub fn primitives(&self, i: usize) -> &[usize] {
        let n = &self.nodes[i];
        &self.order[n.start..n.start + n.count]
    }

    pub fn depth(&self) -> usize {
        fn rec(t: &BvhTree, i: usize) -> usize {
            match t.nodes[i].children {
                None => 0,
                Some([l, r]) => 1 + rec(t, l).max(rec(t, r)),
            }
        }
        rec(self, 0)
    }

    /// Call `f` with every primitive whose box overlaps `query`.
    pub fn query<F: FnMut(usize)>(&self, query: &Aabb, mut f: F) {
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if !node.bounds.overlaps(query) {
                continue;
            }
            match node.children {
                Some([l, r]) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => {
                    for &p in self.primitives(i) {
                        if self.boxes[p].overlaps(query) {
                            f(p);
                        }
                    }
                }
            }
        }
    }

    /// Call `f(i, j)` for every primitive `i` of `self` and `j` of `other`
    /// whose boxes overlap.
    pub fn for_each_intersecting_pair<F: FnMut(usize, usize)>(&self, other: &BvhTree, mut f: F) {
        let mut stack = vec![(0usize, 0usize)];
        while let Some((a, b)) = stack.pop() {
            let na = &self.nodes[a];
            let nb = &other.nodes[b];
            if !na.bounds.overlaps(&nb.bounds) {
                continue;
            }
            match (na.children, nb.children) {
                (None, None) => {
                    for &i in self.primitives(a) {
                        let bi = &self.boxes[i];
                        for &j in other.primitives(b) {
                            if bi.overlaps(&other.boxes[j]) {
                                f(i, j);
                            }
                        }
                    }
                }
                (Some([l, r]), None) => {
                    stack.push((r, b));
                    stack.push((l, b));
                }
                (None, Some([l, r])) => {
                    stack.push((a, r));
                    stack.push((a, l));
                }
                (Some([al, ar]), Some([bl, br])) => {
                    if na.bounds.diameter() >= nb.bounds.diameter() {
                        stack.push((ar, b));
                        stack.push((al, b));
                    } else {
                        stack.push((a, br));
                        stack.push((a, bl));
                    }
                }
            }
        }
    }
}

/// All `(i, j)` with box `i` of `a` overlapping box `j` of `b`, unordered.
/// When `a` and `b` are the same tree the diagonal pairs `(i, i)` appear.
pub fn intersecting_pairs(a: &BvhTree, b: &BvhTree) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    a.for_each_intersecting_pair(b, |i, j| out.push((i, j)));
    out
}

fn build_node(
    boxes: &[Aabb],
    centers: &[[f64; 3]],
    order: &mut [usize],
    offset: usize,
    leaf_size: usize,
    nodes: &mut Vec<BvhNode>,
) -> usize {
    let bounds = order.iter().fold(Aabb::EMPTY, |b, &i| b.union(boxes[i]));
    let idx = nodes.len();
    nodes.push(BvhNode { bounds, children: None, start: offset, count: order.len() });
    if order.len() <= leaf_size {
        return idx;
    }
    let center_bounds = order.iter().fold(Aabb::EMPTY, |b, &i| b.include(centers[i].into()));
    let axis = center_bounds.longest_axis();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centers[a][axis].partial_cmp(&centers[b][axis]).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    let (lo, hi) = order.split_at_mut(mid);
    let l = build_node(boxes, centers, lo, offset, leaf_size, nodes);
    let r = build_node(boxes, centers, hi, offset + mid, leaf_size, nodes);
    nodes[idx].children = Some([l, r]);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;

    fn unit_box_at(x: f64) -> Aabb {
        Aabb::new(Vec3::new(x, 0.0, 0.0), Vec3::new(x + 1.0, 1.0, 1.0))
    }

    #[test]
    fn single_box_is_leaf() {
        let t = build_bvh(vec![unit_box_at(0.0)]);
        assert_eq!(t.nodes().len(), 1);
        assert!(t.root().is_leaf());
    }

    #[test]
    fn eight_boxes_on_a_line_balance() {
        let boxes: Vec<Aabb> = (0..8).map(|k| unit_box_at(3.0 * k as f64)).collect();
        let single = BvhTree::build(boxes.clone(), 1);
        assert_eq!(single.depth(), 3);
        assert_eq!(single.nodes().len(), 15);
        let default = build_bvh(boxes);
        assert_eq!(default.depth(), 1);
        assert_eq!(default.primitives(1), &[0, 1, 2, 3]);
    }

    #[test]
    fn disjoint_boxes_have_no_pairs() {
        let a = build_bvh(vec![unit_box_at(0.0)]);
        let b = build_bvh(vec![unit_box_at(5.0)]);
        assert!(intersecting_pairs(&a, &b).is_empty());
    }

    #[test]
    fn all_overlapping_gives_n_squared() {
        let boxes: Vec<Aabb> = (0..9).map(|k| unit_box_at(0.01 * k as f64)).collect();
        let t = build_bvh(boxes);
        assert_eq!(intersecting_pairs(&t, &t).len(), 81);
    }

    #[test]
    fn query_matches_scan() {
        let boxes: Vec<Aabb> = (0..50).map(|k| unit_box_at(0.7 * k as f64)).collect();
        let t = build_bvh(boxes.clone());
        let q = Aabb::new(Vec3::new(10.0, 0.5, 0.5), Vec3::new(12.0, 0.6, 0.6));
        let mut got = Vec::new();
        t.query(&q, |i| got.push(i));
        got.sort_unstable();
        let want: Vec<usize> = (0..50).filter(|&i| boxes[i].overlaps(&q)).collect();
        assert_eq!(got, want);
    }
}
