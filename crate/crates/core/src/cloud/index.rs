use std::collections::HashMap;

use nalgebra::Point3;

use super::CloudError;

/// Sparse uniform voxel grid over a point set, used for exact k-nearest
/// neighbor queries.
#[derive(Debug, Clone)]
pub struct VoxelIndex {
    points: Vec<Point3<f64>>,
    origin: Point3<f64>,
    cell: f64,
    /// Point indices grouped by cell, ascending within each cell.
    order: Vec<u32>,
    cells: HashMap<[i64; 3], (u32, u32)>,
    lo: [i64; 3],
    hi: [i64; 3],
}

/// Average number of points per occupied cell on surface-like clouds.
const POINTS_PER_CELL: f64 = 8.0;

impl VoxelIndex {
    pub fn new(points: &[Point3<f64>]) -> Self {
        let n = points.len();
        let mut min = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut max = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            for a in 0..3 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        if n == 0 {
            min = Point3::origin();
            max = Point3::origin();
        }
        let extent = (0..3).map(|a| max[a] - min[a]).fold(0.0, f64::max);
        // Sized for points spread over a 2-D surface, the common case for
        // scanned clouds. Volumetric clouds just get fuller cells.
        let cell = if extent > 0.0 {
            (extent * (POINTS_PER_CELL / n as f64).sqrt()).max(extent / 4096.0)
        } else {
            1.0
        };

        let key_of = |p: &Point3<f64>| -> [i64; 3] {
            [0, 1, 2].map(|a| ((p[a] - min[a]) / cell).floor() as i64)
        };
        let mut keyed: Vec<([i64; 3], u32)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (key_of(p), i as u32))
            .collect();
        keyed.sort_unstable();

        let mut cells = HashMap::new();
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        let mut start = 0usize;
        while start < keyed.len() {
            let key = keyed[start].0;
            let mut end = start;
            while end < keyed.len() && keyed[end].0 == key {
                end += 1;
            }
            cells.insert(key, (start as u32, end as u32));
            for a in 0..3 {
                lo[a] = lo[a].min(key[a]);
                hi[a] = hi[a].max(key[a]);
            }
            start = end;
        }
        Self {
            points: points.to_vec(),
            origin: min,
            cell,
            order: keyed.into_iter().map(|(_, i)| i).collect(),
            cells,
            lo,
            hi,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn cell_of(&self, p: &Point3<f64>) -> [i64; 3] {
        // Saturating float-to-int casts keep far-away queries well defined.
        [0, 1, 2].map(|a| ((p[a] - self.origin[a]) / self.cell).floor() as i64)
    }

    /// Exact k nearest neighbors, nearest first; equal distances are ordered
    /// by lower index.
    pub fn knn(&self, query: &Point3<f64>, k: usize) -> Result<Vec<usize>, CloudError> {
        if k == 0 {
            return Err(CloudError::KZero);
        }
        if k > self.points.len() {
            return Err(CloudError::KTooLarge {
                k,
                len: self.points.len(),
            });
        }
        let qc = self.cell_of(query);
        let gap = |a: usize| (self.lo[a] - qc[a]).max(qc[a] - self.hi[a]).max(0);
        let reach = |a: usize| (qc[a] - self.lo[a]).abs().max((self.hi[a] - qc[a]).abs());
        let r_start = gap(0).max(gap(1)).max(gap(2));
        let r_end = reach(0).max(reach(1)).max(reach(2));

        let mut cand: Vec<(f64, u32)> = Vec::with_capacity(4 * k);
        for r in r_start..=r_end {
            self.visit_ring(qc, r, |i| {
                let d2 = (self.points[i as usize] - query).norm_squared();
                cand.push((d2, i));
            });
            if cand.len() >= k {
                let kth = kth_smallest(&mut cand, k);
                // Anything in ring r+1 or beyond is at least r cells away.
                let bound = r as f64 * self.cell * (1.0 - 1e-12);
                if kth < bound * bound {
                    break;
                }
            }
        }
        cand.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(cand.into_iter().take(k).map(|(_, i)| i as usize).collect())
    }

    /// Calls `f` for every point in the cells at Chebyshev distance exactly
    /// `r` from `qc`, restricted to the occupied bounding box.
    fn visit_ring(&self, qc: [i64; 3], r: i64, mut f: impl FnMut(u32)) {
        let range = |a: usize| ((qc[a] - r).max(self.lo[a]), (qc[a] + r).min(self.hi[a]));
        let (x0, x1) = range(0);
        let (y0, y1) = range(1);
        let (z0, z1) = range(2);
        let mut emit = |key: [i64; 3]| {
            if let Some(&(s, e)) = self.cells.get(&key) {
                for &i in &self.order[s as usize..e as usize] {
                    f(i);
                }
            }
        };
        for x in x0..=x1 {
            for y in y0..=y1 {
                if (x - qc[0]).abs() == r || (y - qc[1]).abs() == r {
                    for z in z0..=z1 {
                        emit([x, y, z]);
                    }
                } else {
                    // Interior column: only the two z caps lie on the shell.
                    for z in [qc[2] - r, qc[2] + r] {
                        if z >= z0 && z <= z1 {
                            emit([x, y, z]);
                        }
                    }
                }
            }
        }
    }
}

/// k-th smallest squared distance (1-based), with ties resolved by index.
fn kth_smallest(cand: &mut [(f64, u32)], k: usize) -> f64 {
    let (_, kth, _) =
        cand.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    kth.0
}
