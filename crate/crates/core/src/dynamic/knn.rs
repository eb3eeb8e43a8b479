//! Small 3D kd-tree for k-nearest-neighbor queries.

use crate::geometry::Point3;

pub struct KdTree {
    // Implicit balanced tree over a permutation of point indices:
    // nodes[lo..hi] is a subtree with the median at the midpoint.
    order: Vec<u32>,
    points: Vec<[f64; 3]>,
}

impl KdTree {
    pub fn build(points: &[Point3]) -> Self {
        let pts: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut order: Vec<u32> = (0..pts.len() as u32).collect();
        if !order.is_empty() {
            build_recursive(&mut order, &pts, 0);
        }
        Self { order, points: pts }
    }

    /// Indices of the `k` nearest neighbors of `query`, excluding the point
    /// with index `exclude` (pass usize::MAX for none). Ties are broken by
    /// point index so results are deterministic.
    pub fn k_nearest(&self, query: &Point3, k: usize, exclude: usize) -> Vec<(usize, f64)> {
        let mut heap = BoundedHeap::new(k);
        if k > 0 && !self.order.is_empty() {
            self.search(0, self.order.len(), 0, &[query.x, query.y, query.z], exclude, &mut heap);
        }
        heap.into_sorted()
    }

    fn search(
        &self,
        lo: usize,
        hi: usize,
        axis: usize,
        query: &[f64; 3],
        exclude: usize,
        heap: &mut BoundedHeap,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid] as usize;
        let p = &self.points[idx];
        if idx != exclude {
            let d2 = dist2(p, query);
            heap.push(idx, d2);
        }
        let delta = query[axis] - p[axis];
        let next_axis = (axis + 1) % 3;
        let (near_lo, near_hi, far_lo, far_hi) = if delta < 0.0 {
            (lo, mid, mid + 1, hi)
        } else {
            (mid + 1, hi, lo, mid)
        };
        self.search(near_lo, near_hi, next_axis, query, exclude, heap);
        if !heap.full() || delta * delta <= heap.worst() {
            self.search(far_lo, far_hi, next_axis, query, exclude, heap);
        }
    }
}

fn build_recursive(order: &mut [u32], points: &[[f64; 3]], axis: usize) {
    if order.len() <= 1 {
        return;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .partial_cmp(&points[b as usize][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let next = (axis + 1) % 3;
    let (left, rest) = order.split_at_mut(mid);
    build_recursive(left, points, next);
    build_recursive(&mut rest[1..], points, next);
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Max-heap of the k best (smallest-distance) candidates.
struct BoundedHeap {
    k: usize,
    entries: Vec<(f64, usize)>,
}

impl BoundedHeap {
    fn new(k: usize) -> Self {
        Self {
            k,
            entries: Vec::with_capacity(k + 1),
        }
    }

    fn full(&self) -> bool {
        self.entries.len() >= self.k
    }

    fn worst(&self) -> f64 {
        self.entries.first().map_or(f64::INFINITY, |e| e.0)
    }

    fn push(&mut self, idx: usize, d2: f64) {
        if self.full() {
            let worst = self.entries[0];
            if (d2, idx) >= (worst.0, worst.1) {
                return;
            }
            self.pop_root();
        }
        self.entries.push((d2, idx));
        let mut i = self.entries.len() - 1;
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.entries[parent] < self.entries[i] {
                self.entries.swap(parent, i);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn pop_root(&mut self) {
        let last = self.entries.len() - 1;
        self.entries.swap(0, last);
        self.entries.pop();
        let mut i = 0;
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut largest = i;
            if l < self.entries.len() && self.entries[l] > self.entries[largest] {
                largest = l;
            }
            if r < self.entries.len() && self.entries[r] > self.entries[largest] {
                largest = r;
            }
            if largest == i {
                break;
            }
            self.entries.swap(i, largest);
            i = largest;
        }
    }

    fn into_sorted(self) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self
            .entries
            .into_iter()
            .map(|(d2, i)| (i, d2.sqrt()))
            .collect();
        v.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        v
    }
}
