//! Point indexes answering "which items lie in this bounding box".
//!
//! Both return every item whose point is inside the query box (inclusive
//! bounds) and nothing else; callers then apply their exact predicate.

use crate::model::{BBox, GeoPoint};

const GRID_CELLS: usize = 64;
const RTREE_CAPACITY: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexLayout {
    /// No index: every query scans all items.
    Scan,
    Grid,
    RTree,
}

#[derive(Clone, Debug)]
pub enum SpatialIndex {
    Scan { lon: Vec<f64>, lat: Vec<f64> },
    Grid(Grid),
    RTree(RTree),
}

impl SpatialIndex {
    pub fn build(layout: IndexLayout, lon: &[f64], lat: &[f64]) -> Self {
        match layout {
            IndexLayout::Scan => SpatialIndex::Scan { lon: lon.to_vec(), lat: lat.to_vec() },
            IndexLayout::Grid => SpatialIndex::Grid(Grid::build(lon, lat)),
            IndexLayout::RTree => SpatialIndex::RTree(RTree::build(lon, lat)),
        }
    }

    /// Calls `f` with the id of every item inside `q`.
    pub fn query(&self, q: &BBox, mut f: impl FnMut(u32)) {
        match self {
            SpatialIndex::Scan { lon, lat } => {
                for i in 0..lon.len() {
                    if q.contains(lon[i], lat[i]) {
                        f(i as u32);
                    }
                }
            }
            SpatialIndex::Grid(g) => g.query(q, f),
            SpatialIndex::RTree(t) => t.query(q, f),
        }
    }
}

/// Fixed 64x64 cell grid over the items' bounding box, in CSR layout.
#[derive(Clone, Debug)]
pub struct Grid {
    bbox: BBox,
    cell_w: f64,
    cell_h: f64,
    /// `offsets[c]..offsets[c + 1]` indexes `items` for cell `c`.
    offsets: Vec<u32>,
    items: Vec<u32>,
    lon: Vec<f64>,
    lat: Vec<f64>,
}

impl Grid {
    fn build(lon: &[f64], lat: &[f64]) -> Self {
        let mut bbox = BBox::empty();
        for i in 0..lon.len() {
            bbox.extend(lon[i], lat[i]);
        }
        let cell_w = (bbox.width() / GRID_CELLS as f64).max(f64::MIN_POSITIVE);
        let cell_h = (bbox.height() / GRID_CELLS as f64).max(f64::MIN_POSITIVE);
        let mut grid = Grid { bbox, cell_w, cell_h, offsets: vec![0; GRID_CELLS * GRID_CELLS + 1], items: Vec::new(), lon: lon.to_vec(), lat: lat.to_vec() };
        let cells: Vec<usize> = (0..lon.len()).map(|i| grid.cell_of(lon[i], lat[i])).collect();
        for &c in &cells {
            grid.offsets[c + 1] += 1;
        }
        for c in 0..GRID_CELLS * GRID_CELLS {
            grid.offsets[c + 1] += grid.offsets[c];
        }
        let mut fill = grid.offsets.clone();
        grid.items = vec![0; lon.len()];
        for (i, &c) in cells.iter().enumerate() {
            grid.items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        grid
    }

    fn col(&self, lon: f64) -> usize {
        (((lon - self.bbox.min_lon) / self.cell_w).floor().max(0.0) as usize).min(GRID_CELLS - 1)
    }

    fn row(&self, lat: f64) -> usize {
        (((lat - self.bbox.min_lat) / self.cell_h).floor().max(0.0) as usize).min(GRID_CELLS - 1)
    }

    fn cell_of(&self, lon: f64, lat: f64) -> usize {
        self.row(lat) * GRID_CELLS + self.col(lon)
    }

    fn query(&self, q: &BBox, mut f: impl FnMut(u32)) {
        if self.items.is_empty() || !self.bbox.intersects(q) {
            return;
        }
        let (c0, c1) = (self.col(q.min_lon), self.col(q.max_lon));
        let (r0, r1) = (self.row(q.min_lat), self.row(q.max_lat));
        for r in r0..=r1 {
            for c in c0..=c1 {
                let cell = r * GRID_CELLS + c;
                for &i in &self.items[self.offsets[cell] as usize..self.offsets[cell + 1] as usize] {
                    if q.contains(self.lon[i as usize], self.lat[i as usize]) {
                        f(i);
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Children {
    /// Range into `items`.
    Items { first: u32, len: u32 },
    Nodes(Vec<u32>),
}

#[derive(Clone, Debug)]
struct Node {
    bbox: BBox,
    children: Children,
}

/// Sort-tile-recursive bulk-loaded R-tree with node capacity 16.
#[derive(Clone, Debug)]
pub struct RTree {
    nodes: Vec<Node>,
    root: Option<u32>,
    items: Vec<u32>,
    lon: Vec<f64>,
    lat: Vec<f64>,
}

/// Orders `ids` into STR tiles of `cap` entries by their center coordinates.
fn str_order(ids: &mut [u32], x: impl Fn(u32) -> f64, y: impl Fn(u32) -> f64, cap: usize) {
    let n = ids.len();
    let leaves = n.div_ceil(cap);
    let slices = (leaves as f64).sqrt().ceil().max(1.0) as usize;
    let per_slice = slices * cap;
    ids.sort_by(|&a, &b| x(a).total_cmp(&x(b)).then(a.cmp(&b)));
    for slice in ids.chunks_mut(per_slice) {
        slice.sort_by(|&a, &b| y(a).total_cmp(&y(b)).then(a.cmp(&b)));
    }
}

impl RTree {
    fn build(lon: &[f64], lat: &[f64]) -> Self {
        let mut tree = RTree { nodes: Vec::new(), root: None, items: (0..lon.len() as u32).collect(), lon: lon.to_vec(), lat: lat.to_vec() };
        if lon.is_empty() {
            return tree;
        }
        let mut items = std::mem::take(&mut tree.items);
        str_order(&mut items, |i| lon[i as usize], |i| lat[i as usize], RTREE_CAPACITY);
        let mut level: Vec<u32> = Vec::new();
        for (chunk_idx, chunk) in items.chunks(RTREE_CAPACITY).enumerate() {
            let mut bbox = BBox::empty();
            for &i in chunk {
                bbox.extend(lon[i as usize], lat[i as usize]);
            }
            level.push(tree.nodes.len() as u32);
            tree.nodes.push(Node {
                bbox,
                children: Children::Items { first: (chunk_idx * RTREE_CAPACITY) as u32, len: chunk.len() as u32 },
            });
        }
        tree.items = items;
        while level.len() > 1 {
            let centers: Vec<GeoPoint> = tree.nodes.iter().map(|n| n.bbox.center()).collect();
            str_order(&mut level, |n| centers[n as usize].lon, |n| centers[n as usize].lat, RTREE_CAPACITY);
            let mut next = Vec::with_capacity(level.len().div_ceil(RTREE_CAPACITY));
            for chunk in level.chunks(RTREE_CAPACITY) {
                let bbox = chunk.iter().fold(BBox::empty(), |b, &c| b.union(&tree.nodes[c as usize].bbox));
                next.push(tree.nodes.len() as u32);
                tree.nodes.push(Node { bbox, children: Children::Nodes(chunk.to_vec()) });
            }
            level = next;
        }
        tree.root = Some(level[0]);
        tree
    }

    fn query(&self, q: &BBox, mut f: impl FnMut(u32)) {
        let Some(root) = self.root else { return };
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if !node.bbox.intersects(q) {
                continue;
            }
            match &node.children {
                Children::Items { first, len } => {
                    for &i in &self.items[*first as usize..(*first + *len) as usize] {
                        if q.contains(self.lon[i as usize], self.lat[i as usize]) {
                            f(i);
                        }
                    }
                }
                Children::Nodes(children) => stack.extend_from_slice(children),
            }
        }
    }

    #[cfg(test)]
    fn check_structure(&self) {
        fn walk(t: &RTree, n: u32, depth: usize, leaf_depth: &mut Option<usize>, seen: &mut Vec<u32>) {
            let node = &t.nodes[n as usize];
            match &node.children {
                Children::Items { first, len } => {
                    assert!(*len >= 1 && *len as usize <= RTREE_CAPACITY);
                    assert_eq!(*leaf_depth.get_or_insert(depth), depth, "unbalanced tree");
                    for &i in &t.items[*first as usize..(*first + *len) as usize] {
                        assert!(node.bbox.contains(t.lon[i as usize], t.lat[i as usize]));
                        seen.push(i);
                    }
                }
                Children::Nodes(children) => {
                    assert!(!children.is_empty() && children.len() <= RTREE_CAPACITY);
                    for &c in children {
                        let child = &t.nodes[c as usize].bbox;
                        assert!(node.bbox.contains(child.min_lon, child.min_lat));
                        assert!(node.bbox.contains(child.max_lon, child.max_lat));
                        walk(t, c, depth + 1, leaf_depth, seen);
                    }
                }
            }
        }
        let mut seen = Vec::new();
        if let Some(root) = self.root {
            walk(self, root, 0, &mut None, &mut seen);
        }
        seen.sort_unstable();
        assert_eq!(seen, (0..self.lon.len() as u32).collect::<Vec<_>>());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(lon: &[f64], lat: &[f64], q: &BBox) -> Vec<u32> {
        (0..lon.len() as u32).filter(|&i| q.contains(lon[i as usize], lat[i as usize])).collect()
    }

    #[test]
    fn indexes_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [0usize, 1, 15, 16, 17, 300, 5000] {
            let lon: Vec<f64> = (0..n).map(|_| rng.gen_range(13.0..14.0)).collect();
            // clustered latitudes exercise uneven cells
            let lat: Vec<f64> = (0..n).map(|i| if i % 3 == 0 { 52.5 } else { rng.gen_range(52.0..53.0) }).collect();
            let grid = SpatialIndex::build(IndexLayout::Grid, &lon, &lat);
            let tree = RTree::build(&lon, &lat);
            tree.check_structure();
            let tree = SpatialIndex::RTree(tree);
            for _ in 0..200 {
                let (a, b) = (rng.gen_range(12.9..14.1), rng.gen_range(12.9..14.1));
                let (c, d) = (rng.gen_range(51.9..53.1), rng.gen_range(51.9..53.1));
                let q = BBox { min_lon: f64::min(a, b), max_lon: f64::max(a, b), min_lat: f64::min(c, d), max_lat: f64::max(c, d) };
                let want = brute(&lon, &lat, &q);
                for idx in [&grid, &tree] {
                    let mut got = Vec::new();
                    idx.query(&q, |i| got.push(i));
                    got.sort_unstable();
                    assert_eq!(got, want, "n={n}");
                }
            }
            // a box touching points exactly on its boundary
            if n > 0 {
                let q = BBox { min_lon: lon[0], max_lon: lon[0], min_lat: lat[0], max_lat: lat[0] };
                let mut got = Vec::new();
                grid.query(&q, |i| got.push(i));
                assert!(got.contains(&0));
            }
        }
    }
}
