//! Uniform-bin spatial index over a point cloud (dimensions up to 4).
//!
//! Supports exact nearest-atom and fixed-radius queries; this is the generic
//! backend, generator-specific fast paths live in `geometry`.

use std::collections::HashMap;

const MAX_DIM: usize = 4;

#[derive(Debug, Clone)]
pub struct SpatialIndex {
    n: usize,
    cell: f64,
    origin: [f64; MAX_DIM],
    cell_lo: [i64; MAX_DIM],
    cell_hi: [i64; MAX_DIM],
    bins: HashMap<u64, Vec<u32>>,
    count: usize,
}

fn key(ix: &[i64]) -> u64 {
    // Pack up to 4 signed 16-bit-ish cell coordinates; clamp wild outliers.
    let mut k: u64 = 0;
    for &c in ix {
        let c = c.clamp(-32_000, 32_000) + 32_768;
        k = (k << 16) | (c as u64 & 0xffff);
    }
    k
}

impl SpatialIndex {
    pub fn build(coords: &[f64], n: usize, cell: f64) -> Self {
        assert!(n >= 1 && n <= MAX_DIM);
        assert!(cell > 0.0);
        let count = coords.len() / n;
        let mut origin = [0.0; MAX_DIM];
        if count > 0 {
            for j in 0..n {
                origin[j] = coords[j];
            }
            for i in 0..count {
                for j in 0..n {
                    origin[j] = origin[j].min(coords[i * n + j]);
                }
            }
        }
        let mut bins: HashMap<u64, Vec<u32>> = HashMap::new();
        let mut ix = [0i64; MAX_DIM];
        let mut cell_lo = [i64::MAX; MAX_DIM];
        let mut cell_hi = [i64::MIN; MAX_DIM];
        for i in 0..count {
            for j in 0..n {
                ix[j] = ((coords[i * n + j] - origin[j]) / cell).floor() as i64;
                cell_lo[j] = cell_lo[j].min(ix[j]);
                cell_hi[j] = cell_hi[j].max(ix[j]);
            }
        }
        for i in 0..count {
            for j in 0..n {
                ix[j] = ((coords[i * n + j] - origin[j]) / cell).floor() as i64;
            }
            bins.entry(key(&ix[..n])).or_default().push(i as u32);
        }
        SpatialIndex { n, cell, origin, cell_lo, cell_hi, bins, count }
    }

    fn cell_of(&self, x: &[f64], out: &mut [i64]) {
        for j in 0..self.n {
            out[j] = ((x[j] - self.origin[j]) / self.cell).floor() as i64;
        }
    }

    /// Visits every occupied-range cell of the block `home ± reach`, calling
    /// `visit` with the cell coordinates.
    fn for_block(&self, home: &[i64], reach: i64, mut visit: impl FnMut(&[i64])) {
        let n = self.n;
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for j in 0..n {
            lo[j] = (home[j] - reach).max(self.cell_lo[j]);
            hi[j] = (home[j] + reach).min(self.cell_hi[j]);
            if lo[j] > hi[j] {
                return;
            }
        }
        let mut ix = lo;
        loop {
            visit(&ix[..n]);
            let mut axis = n;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                ix[axis] += 1;
                if ix[axis] <= hi[axis] {
                    break;
                }
                ix[axis] = lo[axis];
                if axis == 0 {
                    return;
                }
            }
        }
    }

    /// Exact nearest atom: expanding block search over occupied bins.
    pub fn nearest(&self, coords: &[f64], x: &[f64]) -> Option<(usize, f64)> {
        if self.count == 0 {
            return None;
        }
        let n = self.n;
        let mut home = [0i64; MAX_DIM];
        self.cell_of(x, &mut home);
        let mut best: Option<(usize, f64)> = None;
        let mut reach: i64 = 1;
        // Start the search with a reach that actually touches the occupied box.
        for j in 0..n {
            let gap = (self.cell_lo[j] - home[j]).max(home[j] - self.cell_hi[j]).max(0);
            reach = reach.max(gap + 1);
        }
        let mut prev: i64 = -1;
        loop {
            self.for_block(&home[..n], reach, |ix| {
                // Skip the interior already scanned at the previous reach.
                let mut interior = true;
                for j in 0..n {
                    if (ix[j] - home[j]).abs() > prev {
                        interior = false;
                        break;
                    }
                }
                if interior && prev >= 0 {
                    return;
                }
                if let Some(list) = self.bins.get(&key(ix)) {
                    for &i in list {
                        let d2 = dist2(&coords[i as usize * n..i as usize * n + n], x);
                        if best.map_or(true, |(_, b)| d2 < b) {
                            best = Some((i as usize, d2));
                        }
                    }
                }
            });
            if let Some((i, b2)) = best {
                // Any atom in an unscanned cell is at least this far away.
                let guaranteed = reach as f64 * self.cell;
                if guaranteed * guaranteed >= b2 {
                    return Some((i, b2.sqrt()));
                }
            }
            prev = reach;
            reach *= 2;
            if reach > (1 << 40) {
                return None;
            }
        }
    }

    /// Indices of all atoms within Euclidean distance `r` of `x`.
    pub fn within(&self, coords: &[f64], x: &[f64], r: f64, out: &mut Vec<usize>) {
        out.clear();
        if self.count == 0 || r < 0.0 {
            return;
        }
        let n = self.n;
        let reach = (r / self.cell).ceil() as i64 + 1;
        let mut home = [0i64; MAX_DIM];
        self.cell_of(x, &mut home);
        let r2 = r * r;
        self.for_block(&home[..n], reach, |ix| {
            if let Some(list) = self.bins.get(&key(ix)) {
                for &i in list {
                    let d2 = dist2(&coords[i as usize * n..i as usize * n + n], x);
                    if d2 <= r2 {
                        out.push(i as usize);
                    }
                }
            }
        });
    }
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        acc += t * t;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SplitMix64;

    #[test]
    fn nearest_and_within_match_brute_force() {
        let mut rng = SplitMix64::new(7);
        let n = 3;
        let coords: Vec<f64> = (0..600).map(|_| rng.range_f64(-1.0, 1.0)).collect();
        let index = SpatialIndex::build(&coords, n, 0.23);
        let mut hits = Vec::new();
        for _ in 0..200 {
            let q = [rng.range_f64(-1.4, 1.4), rng.range_f64(-1.4, 1.4), rng.range_f64(-1.4, 1.4)];
            let (bi, bd) = index.nearest(&coords, &q).unwrap();
            let mut want = (usize::MAX, f64::INFINITY);
            for i in 0..coords.len() / n {
                let d2 = dist2(&coords[i * n..i * n + n], &q);
                if d2 < want.1 {
                    want = (i, d2);
                }
            }
            assert_eq!(bi, want.0, "query {q:?}");
            assert!((bd - want.1.sqrt()).abs() < 1e-12);

            let r = 0.4;
            index.within(&coords, &q, r, &mut hits);
            let mut expect: Vec<usize> = (0..coords.len() / n)
                .filter(|&i| dist2(&coords[i * n..i * n + n], &q) <= r * r)
                .collect();
            hits.sort_unstable();
            expect.sort_unstable();
            assert_eq!(hits, expect);
        }
    }

    #[test]
    fn far_queries_on_a_line_cloud_are_cheap_and_exact() {
        // 1-D cloud embedded in 3-D: block clamping must keep this fast.
        let m = 2001;
        let mut coords = Vec::with_capacity(3 * m);
        for i in 0..m {
            coords.push(-10.0 + i as f64 * 0.01);
            coords.push(0.0);
            coords.push(0.0);
        }
        let index = SpatialIndex::build(&coords, 3, 0.04);
        let mut rng = SplitMix64::new(1);
        let mut hits = Vec::new();
        for _ in 0..500 {
            let q = [rng.range_f64(-12.0, 12.0), rng.range_f64(-4.0, 4.0), rng.range_f64(-4.0, 4.0)];
            let (_, dist) = index.nearest(&coords, &q).unwrap();
            let snapped = (q[0] / 0.01).round().clamp(-1000.0, 1000.0) * 0.01;
            let expect =
                ((q[0] - snapped).powi(2) + q[1] * q[1] + q[2] * q[2]).sqrt();
            assert!((dist - expect).abs() < 1e-12, "{q:?}");
            index.within(&coords, &q, 5.0, &mut hits);
            let expect_count = (0..m)
                .filter(|&i| dist2(&coords[i * 3..i * 3 + 3], &q) <= 25.0)
                .count();
            assert_eq!(hits.len(), expect_count);
        }
    }
}
