//! Barnes–Hut evaluation of the Gauss linking integral.
//!
//! Each loop gets a binary tree over its segments carrying multipole moments
//! of the curve about the node's box center. Well-separated node pairs are
//! evaluated with a truncated Taylor expansion of the Gauss kernel; the rest
//! recurse down to exact segment pairs.

use crate::bvh::BvhTree;
use crate::geom::{Aabb, Vec3};
use crate::model::PolylineLoop;
use serde::{Deserialize, Serialize};
use std::borrow::Cow;
use std::f64::consts::PI;

use super::direct::segment_pair_lambda;

pub type Tensor2 = [[f64; 3]; 3];
/// Rank-3 tensor symmetric in its last two indices, stored as
/// `t[i][SYM[j][k]]`.
pub type SymTensor3 = [[f64; 6]; 3];

/// Packed position of the symmetric index pair `(j, k)`.
pub const SYM: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    Dipole,
    #[default]
    Quadrupole,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarnesHutParams {
    pub beta_init: f64,
    pub beta_max: f64,
    pub e_target: f64,
    pub k_const: f64,
    pub order: Order,
    /// Allow the single rerun at a larger β when the error estimate is high.
    pub adaptive: bool,
}

impl Default for BarnesHutParams {
    fn default() -> Self {
        BarnesHutParams {
            beta_init: 2.0,
            beta_max: 10.0,
            e_target: 0.2,
            k_const: 1.0 / (4.0 * PI),
            order: Order::Quadrupole,
            adaptive: true,
        }
    }
}

impl BarnesHutParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.beta_init >= 1.0 && self.beta_init <= self.beta_max) {
            return Err(format!("need 1 <= beta_init <= beta_max, got {} and {}", self.beta_init, self.beta_max));
        }
        if !(self.e_target > 0.0) {
            return Err(format!("e_target must be positive, got {}", self.e_target));
        }
        if !(self.k_const >= 0.0) {
            return Err(format!("k_const must be non-negative, got {}", self.k_const));
        }
        Ok(())
    }
}

/// Child link in a moment tree. Leaves are single segments and are not
/// stored; their moments follow directly from the segment.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum NodeRef {
    Inner(u32),
    Leaf(u32),
}

#[derive(Clone, Debug)]
pub struct MomentNode {
    pub center: Vec3,
    /// Half the box diagonal.
    pub radius: f64,
    pub c_m: Vec3,
    /// `c_d[i][j] = ∫ dr_i (r - center)_j`
    pub c_d: Tensor2,
    /// `c_q[i][SYM[j][k]] = ∫ dr_i (r - center)_j (r - center)_k`
    pub c_q: SymTensor3,
    pub children: Option<[NodeRef; 2]>,
    /// Segment index for leaves.
    pub segment: usize,
}

impl MomentNode {
    /// Moments of one straight segment about its midpoint.
    pub fn leaf(segment: usize, a: Vec3, b: Vec3) -> MomentNode {
        let e = b - a;
        let mut c_q = [[0.0; 6]; 3];
        for p in 0..3 {
            for (k, &(q, r)) in PAIRS.iter().enumerate() {
                c_q[p][k] = e[p] * e[q] * e[r] / 12.0;
            }
        }
        MomentNode {
            center: (a + b) * 0.5,
            radius: 0.5 * (b - a).norm(),
            c_m: e,
            c_d: [[0.0; 3]; 3],
            c_q,
            children: None,
            segment,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn quadrupole(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c_q[i][SYM[j][k]]
    }
}

#[derive(Clone, Debug)]
pub struct MomentTree {
    /// Inner nodes; children follow their parent.
    nodes: Vec<MomentNode>,
    segments: Vec<(Vec3, Vec3)>,
    root: NodeRef,
}

pub fn build_moment_tree(lp: &PolylineLoop) -> MomentTree {
    let segments: Vec<(Vec3, Vec3)> = lp.segments().collect();
    let boxes: Vec<Aabb> = segments.iter().map(|&(a, b)| Aabb::from_point(a).include(b)).collect();
    let bvh = BvhTree::build(boxes, 1);

    // renumber BVH nodes: inner nodes keep their relative order
    let mut refs = Vec::with_capacity(bvh.nodes().len());
    let mut inner = 0u32;
    for (i, n) in bvh.nodes().iter().enumerate() {
        refs.push(if n.is_leaf() {
            NodeRef::Leaf(bvh.primitives(i)[0] as u32)
        } else {
            inner += 1;
            NodeRef::Inner(inner - 1)
        });
    }
    let mut nodes: Vec<MomentNode> = bvh
        .nodes()
        .iter()
        .filter_map(|n| {
            let [l, r] = n.children?;
            Some(MomentNode {
                center: n.bounds.center(),
                radius: 0.5 * n.bounds.diameter(),
                c_m: Vec3::ZERO,
                c_d: [[0.0; 3]; 3],
                c_q: [[0.0; 6]; 3],
                children: Some([refs[l], refs[r]]),
                segment: usize::MAX,
            })
        })
        .collect();

    // reverse sweep: every child is final before its parent
    for i in (0..nodes.len()).rev() {
        let (center, children) = (nodes[i].center, nodes[i].children.expect("inner node"));
        let mut c_m = Vec3::ZERO;
        let mut c_d = [[0.0; 3]; 3];
        let mut c_q = [[0.0; 6]; 3];
        for c in children {
            let leaf;
            let ch = match c {
                NodeRef::Inner(k) => &nodes[k as usize],
                NodeRef::Leaf(s) => {
                    let (a, b) = segments[s as usize];
                    leaf = MomentNode::leaf(s as usize, a, b);
                    &leaf
                }
            };
            let rc = ch.center - center;
            c_m += ch.c_m;
            for p in 0..3 {
                for q in 0..3 {
                    c_d[p][q] += ch.c_d[p][q] + ch.c_m[p] * rc[q];
                }
                for (k, &(q, s)) in PAIRS.iter().enumerate() {
                    c_q[p][k] += ch.c_q[p][k] + ch.c_d[p][q] * rc[s] + ch.c_d[p][s] * rc[q] + ch.c_m[p] * rc[q] * rc[s];
                }
            }
        }
        let n = &mut nodes[i];
        n.c_m = c_m;
        n.c_d = c_d;
        n.c_q = c_q;
    }
    MomentTree { nodes, segments, root: refs[0] }
}

impl MomentTree {
    pub fn root(&self) -> Cow<'_, MomentNode> {
        self.node(self.root)
    }

    pub fn root_ref(&self) -> NodeRef {
        self.root
    }

    pub fn node(&self, r: NodeRef) -> Cow<'_, MomentNode> {
        match r {
            NodeRef::Inner(k) => Cow::Borrowed(&self.nodes[k as usize]),
            NodeRef::Leaf(s) => Cow::Owned(self.leaf(s as usize)),
        }
    }

    pub fn leaf(&self, segment: usize) -> MomentNode {
        let (a, b) = self.segments[segment];
        MomentNode::leaf(segment, a, b)
    }

    /// Stored inner nodes.
    pub fn inner_nodes(&self) -> &[MomentNode] {
        &self.nodes
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    /// Center and radius without building a leaf's moments.
    fn extent(&self, r: NodeRef) -> (Vec3, f64) {
        match r {
            NodeRef::Inner(k) => {
                let n = &self.nodes[k as usize];
                (n.center, n.radius)
            }
            NodeRef::Leaf(s) => {
                let (a, b) = self.segments[s as usize];
                ((a + b) * 0.5, 0.5 * (b - a).norm())
            }
        }
    }

    fn children(&self, r: NodeRef) -> Option<[NodeRef; 2]> {
        match r {
            NodeRef::Inner(k) => self.nodes[k as usize].children,
            NodeRef::Leaf(_) => None,
        }
    }
}

fn frob2(t: &Tensor2) -> f64 {
    t.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

fn frob3(t: &SymTensor3) -> f64 {
    let mut sum = 0.0;
    for row in t {
        for (k, &(q, r)) in PAIRS.iter().enumerate() {
            let w = if q == r { 1.0 } else { 2.0 };
            sum += w * row[k] * row[k];
        }
    }
    sum.sqrt()
}

#[inline]
fn col2(t: &Tensor2, n: usize) -> Vec3 {
    Vec3::new(t[0][n], t[1][n], t[2][n])
}

#[inline]
fn col3(t: &SymTensor3, n: usize, p: usize) -> Vec3 {
    let k = SYM[n][p];
    Vec3::new(t[0][k], t[1][k], t[2][k])
}

/// Far-field approximation of the Gauss integral between the curve pieces
/// summarized by two nodes. The expansion is about `r = c2 - c1`.
pub fn far_field_eval(n1: &MomentNode, n2: &MomentNode, order: Order) -> f64 {
    let r = n2.center - n1.center;
    let r2 = r.norm_squared();
    let rn = r2.sqrt();
    let inv4pi = 1.0 / (4.0 * PI);
    let inv3 = inv4pi / (r2 * rn);
    let inv5 = inv3 / r2;

    let mono = -(r * inv3).dot(n1.c_m.cross(n2.c_m));

    let mut dip = 0.0;
    for n in 0..3 {
        let w = n1.c_m.cross(col2(&n2.c_d, n)) - col2(&n1.c_d, n).cross(n2.c_m);
        for m in 0..3 {
            let delta = if m == n { r2 } else { 0.0 };
            let h = (delta - 3.0 * r[m] * r[n]) * inv5;
            dip -= h * w[m];
        }
    }
    if order == Order::Dipole {
        return mono + dip;
    }

    let inv7 = inv5 / r2;
    let mut quad = 0.0;
    for n in 0..3 {
        for p in 0..3 {
            let x = n1.c_m.cross(col3(&n2.c_q, n, p)) + col3(&n1.c_q, n, p).cross(n2.c_m);
            let y = col2(&n1.c_d, n).cross(col2(&n2.c_d, p));
            let g = y - x * 0.5;
            for m in 0..3 {
                let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                let t =
                    -3.0 * (r[m] * d(n, p) + r[n] * d(m, p) + r[p] * d(m, n)) * inv5 + 15.0 * r[m] * r[n] * r[p] * inv7;
                quad += t * g[m];
            }
        }
    }
    mono + dip + quad
}

/// Next-order magnitude estimate for one far-field interaction.
fn error_term(n1: &MomentNode, n2: &MomentNode, k: f64) -> f64 {
    let r = (n2.center - n1.center).norm();
    let (q1, q2) = (frob3(&n1.c_q), frob3(&n2.c_q));
    let (d1, d2) = (frob2(&n1.c_d), frob2(&n2.c_d));
    k / r.powi(5) * (n1.radius * n2.c_m.norm() * q1 + n2.radius * n1.c_m.norm() * q2 + 3.0 * (d1 * q2 + q1 * d2))
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BhPass {
    pub beta: f64,
    pub value: f64,
    pub e_estimate: f64,
    pub far_evals: u64,
    pub near_evals: u64,
}

impl BhPass {
    fn merge(self, o: BhPass) -> BhPass {
        BhPass {
            beta: self.beta,
            value: self.value + o.value,
            e_estimate: self.e_estimate + o.e_estimate,
            far_evals: self.far_evals + o.far_evals,
            near_evals: self.near_evals + o.near_evals,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BhOutcome {
    pub value: f64,
    pub first: BhPass,
    pub rerun: Option<BhPass>,
}

/// Node pairs below this segment count are evaluated on the current thread.
const PAR_CUTOFF: usize = 4096;

struct Ctx<'a> {
    t1: &'a MomentTree,
    t2: &'a MomentTree,
    beta: f64,
    order: Order,
    k: f64,
}

impl Ctx<'_> {
    fn eval(&self, i: NodeRef, j: NodeRef, work: usize) -> BhPass {
        let (c1, r1) = self.t1.extent(i);
        let (c2, r2) = self.t2.extent(j);
        let zero = BhPass { beta: self.beta, ..BhPass::default() };
        if (c1 - c2).norm() > self.beta * (r1 + r2) {
            let (n1, n2) = (self.t1.node(i), self.t2.node(j));
            return BhPass {
                value: far_field_eval(&n1, &n2, self.order),
                e_estimate: error_term(&n1, &n2, self.k),
                far_evals: 1,
                ..zero
            };
        }
        match (self.t1.children(i), self.t2.children(j)) {
            (None, None) => {
                let (NodeRef::Leaf(s1), NodeRef::Leaf(s2)) = (i, j) else { unreachable!("childless inner node") };
                let (a, b) = self.t1.segments[s1 as usize];
                let (c, d) = self.t2.segments[s2 as usize];
                BhPass { value: segment_pair_lambda(a, b, c, d), near_evals: 1, ..zero }
            }
            (Some([l, r]), None) => self.split(work, (l, j), (r, j)),
            (Some([l, r]), Some(_)) if r1 > r2 => self.split(work, (l, j), (r, j)),
            (_, Some([l, r])) => self.split(work, (i, l), (i, r)),
        }
    }

    fn split(&self, work: usize, a: (NodeRef, NodeRef), b: (NodeRef, NodeRef)) -> BhPass {
        let half = work / 2;
        if work > PAR_CUTOFF {
            let (x, y) = rayon::join(|| self.eval(a.0, a.1, half), || self.eval(b.0, b.1, half));
            x.merge(y)
        } else {
            self.eval(a.0, a.1, half).merge(self.eval(b.0, b.1, half))
        }
    }
}

/// One dual-tree pass at a fixed opening parameter.
pub fn barnes_hut_pass(t1: &MomentTree, t2: &MomentTree, beta: f64, order: Order, k_const: f64) -> BhPass {
    let ctx = Ctx { t1, t2, beta, order, k: k_const };
    let work = t1.segment_count() + t2.segment_count();
    ctx.eval(t1.root, t2.root, work)
}

pub fn link_barnes_hut(t1: &MomentTree, t2: &MomentTree, params: &BarnesHutParams) -> BhOutcome {
    let first = barnes_hut_pass(t1, t2, params.beta_init, params.order, params.k_const);
    let mut out = BhOutcome { value: first.value, first, rerun: None };
    if params.adaptive {
        let beta_t = (first.e_estimate / params.e_target).powf(0.25) * params.beta_init;
        if beta_t > params.beta_init {
            let second = barnes_hut_pass(t1, t2, beta_t.min(params.beta_max), params.order, params.k_const);
            out.value = second.value;
            out.rerun = Some(second);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn circle(n: usize, c: Vec3, u: Vec3, v: Vec3) -> PolylineLoop {
        PolylineLoop::new(
            (0..n)
                .map(|k| {
                    let a = TAU * k as f64 / n as f64;
                    c + u * a.cos() + v * a.sin()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_segment_leaf_moments() {
        let tri = PolylineLoop::new(vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 2.0, 0.0)]).unwrap();
        let t = build_moment_tree(&tri);
        let leaf = t.leaf(0);
        assert_eq!(leaf.c_m, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(leaf.c_d, [[0.0; 3]; 3]);
        assert!((leaf.quadrupole(0, 0, 0) - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn closed_loop_root_monopole_vanishes() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        let y = Vec3::new(0.0, 1.0, 0.0);
        let c = circle(64, Vec3::new(0.3, -0.2, 0.1), x, y);
        let t = build_moment_tree(&c);
        assert!(t.root().c_m.norm() < 1e-12 * c.length());
    }

    #[test]
    fn root_moments_match_direct_integrals() {
        let x = Vec3::new(1.0, 0.2, 0.0);
        let y = Vec3::new(0.0, 1.0, 0.5);
        let c = circle(37, Vec3::new(0.3, -0.2, 0.1), x, y);
        let t = build_moment_tree(&c);
        let ctr = t.root().center;
        let mut d = [[0.0; 3]; 3];
        let mut q = [[[0.0; 3]; 3]; 3];
        for (a, b) in c.segments() {
            let e = b - a;
            let m = (a + b) * 0.5 - ctr;
            for i in 0..3 {
                for j in 0..3 {
                    d[i][j] += e[i] * m[j];
                    for k in 0..3 {
                        q[i][j][k] += e[i] * (m[j] * m[k] + e[j] * e[k] / 12.0);
                    }
                }
            }
        }
        for (i, (di, qi)) in d.iter().zip(&q).enumerate() {
            for j in 0..3 {
                assert!((di[j] - t.root().c_d[i][j]).abs() < 1e-12);
                for (k, &qk) in qi[j].iter().enumerate() {
                    assert!((qk - t.root().quadrupole(i, j, k)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn distant_leaves_match_exact_pair() {
        let a = PolylineLoop::new(vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.3)]).unwrap();
        let off = Vec3::new(100.0, 20.0, -30.0);
        let b = PolylineLoop::new(vec![off, off + Vec3::new(0.0, 0.0, 1.0), off + Vec3::new(0.7, 1.0, 0.0)]).unwrap();
        let (ta, tb) = (build_moment_tree(&a), build_moment_tree(&b));
        let la = ta.leaf(0);
        let lb = tb.leaf(0);
        let exact = segment_pair_lambda(a.segment(0).0, a.segment(0).1, b.segment(0).0, b.segment(0).1);
        let approx = far_field_eval(&la, &lb, Order::Quadrupole);
        assert!(exact.abs() > 1e-9);
        assert!((exact - approx).abs() < 1e-6 * exact.abs().max(1e-6), "{exact} vs {approx}");
    }

    #[test]
    fn closed_roots_have_no_monopole_and_monopole_scales() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        let y = Vec3::new(0.0, 1.0, 0.0);
        let mut n1 = build_moment_tree(&circle(16, Vec3::ZERO, x, y)).root().into_owned();
        let mut n2 = n1.clone();
        n2.center = Vec3::new(10.0, 3.0, 1.0);
        n1.c_m = Vec3::new(0.0, 1.0, 0.0);
        n2.c_m = Vec3::new(0.0, 0.0, 1.0);
        let zero = |n: &MomentNode| MomentNode { c_d: [[0.0; 3]; 3], c_q: [[0.0; 6]; 3], ..n.clone() };
        let (m1, m2) = (zero(&n1), zero(&n2));
        let near = far_field_eval(&m1, &m2, Order::Dipole);
        let mut far2 = m2.clone();
        far2.center = m2.center * 2.0;
        let far = far_field_eval(&m1, &far2, Order::Dipole);
        assert!((far / near - 0.25).abs() < 1e-12);
    }
}
