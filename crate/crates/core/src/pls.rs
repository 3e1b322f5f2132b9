//! Potential link search: loop pairs whose bounding boxes overlap.
//!
//! Linked loops cannot have disjoint convex bounds, so every pair with a
//! nonzero linking number survives this cull.

use crate::bvh::build_bvh;
use crate::geom::Aabb;
use crate::model::CurveModel;
use rayon::prelude::*;
use std::collections::BTreeSet;

/// Sorted, duplicate-free `(i, j)` loop pairs with `i < j`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairList {
    pairs: Vec<(usize, usize)>,
}

impl PairList {
    /// Normalizes orientation, sorts and deduplicates. Self pairs are dropped.
    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(pairs: I) -> Self {
        let set: BTreeSet<(usize, usize)> =
            pairs.into_iter().filter(|(i, j)| i != j).map(|(i, j)| if i < j { (i, j) } else { (j, i) }).collect();
        PairList { pairs: set.into_iter().collect() }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let key = if i < j { (i, j) } else { (j, i) };
        self.pairs.binary_search(&key).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }
}

/// Pair set with orientation-insensitive membership, for exclusions.
pub type PairSet = BTreeSet<(usize, usize)>;

pub fn normalized_pair(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Union of tight segment boxes for each loop.
pub fn loop_boxes(model: &CurveModel) -> Vec<Aabb> {
    model.loops().par_iter().map(|l| l.aabb()).collect()
}

pub fn potential_link_search(model: &CurveModel, excluded: &PairSet) -> PairList {
    if model.is_empty() {
        return PairList::default();
    }
    let boxes = loop_boxes(model);
    let tree = build_bvh(boxes);
    let mut raw = Vec::new();
    tree.for_each_intersecting_pair(&tree, |i, j| {
        if i < j && !excluded.contains(&(i, j)) {
            raw.push((i, j));
        }
    });
    PairList::from_pairs(raw)
}
