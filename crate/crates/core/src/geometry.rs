//! Boundary sets: low-dimensional sets Γ ⊂ Rⁿ (d < n-1) carried as weighted
//! atom clouds approximating an Ahlfors-regular measure σ, together with the
//! generators used across the test suite and an empirical regularity checker.

use crate::numeric::SplitMix64;
use crate::spatial::{dist2, SpatialIndex};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// Hard cap on generated atom counts.
pub const POINT_BUDGET: usize = 1 << 21;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("boundary dimension must satisfy d < n-1 (got d={d}, n={n})")]
    BadCodimension { d: usize, n: usize },
    #[error("invalid generator parameter: {0}")]
    BadParameter(String),
    #[error("point budget exceeded: {requested} atoms > {budget}")]
    PointBudget { requested: usize, budget: usize },
    #[error("sampled profile slope {observed:.4} exceeds 1.5 x declared Lipschitz constant {declared:.4}")]
    SlopeMismatch { observed: f64, declared: f64 },
    #[error("empty scale range: minimum trustworthy radius {r_min:.3e} exceeds diameter/4 = {r_max:.3e}")]
    ScaleRange { r_min: f64, r_max: f64 },
    #[error("radius {r:.3e} is below the trust floor {floor:.3e} (10 x resolution)")]
    RadiusBelowFloor { r: f64, floor: f64 },
    #[error("csv parse error at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Transverse profile of a Lipschitz graph t -> (t, phi(t)) in R^n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum ProfileSpec {
    /// phi = 0: the graph degenerates to the flat line.
    Zero,
    /// phi_1(t) = amplitude * sin(frequency * t), other components zero.
    Sine { amplitude: f64, frequency: f64 },
}

impl ProfileSpec {
    pub fn value(&self, t: f64, out: &mut [f64]) {
        out.fill(0.0);
        match *self {
            ProfileSpec::Zero => {}
            ProfileSpec::Sine { amplitude, frequency } => out[0] = amplitude * (frequency * t).sin(),
        }
    }

    pub fn derivative(&self, t: f64, out: &mut [f64]) {
        out.fill(0.0);
        match *self {
            ProfileSpec::Zero => {}
            ProfileSpec::Sine { amplitude, frequency } => {
                out[0] = amplitude * frequency * (frequency * t).cos()
            }
        }
    }

    /// Supremum of |phi| over the real line.
    pub fn sup_abs(&self) -> f64 {
        match *self {
            ProfileSpec::Zero => 0.0,
            ProfileSpec::Sine { amplitude, .. } => amplitude.abs(),
        }
    }

    /// Supremum of |phi'|.
    pub fn sup_slope(&self) -> f64 {
        match *self {
            ProfileSpec::Zero => 0.0,
            ProfileSpec::Sine { amplitude, frequency } => (amplitude * frequency).abs(),
        }
    }

    /// Period of the profile oscillation (0 when the profile is flat).
    pub fn oscillation_period(&self) -> f64 {
        match *self {
            ProfileSpec::Zero => 0.0,
            ProfileSpec::Sine { frequency, .. } => std::f64::consts::TAU / frequency.abs(),
        }
    }

    /// Arc-speed sqrt(1 + |phi'|²) averaged over one period; cached.
    pub fn mean_speed(&self) -> f64 {
        match *self {
            ProfileSpec::Zero => 1.0,
            ProfileSpec::Sine { amplitude, frequency } => {
                use std::sync::Mutex;
                static CACHE: Mutex<Option<std::collections::HashMap<(u64, u64), f64>>> =
                    Mutex::new(None);
                let key = (amplitude.to_bits(), frequency.to_bits());
                if let Some(v) =
                    CACHE.lock().unwrap().get_or_insert_with(Default::default).get(&key)
                {
                    return *v;
                }
                let period = std::f64::consts::TAU / frequency.abs();
                let mut f = |t: f64| {
                    let d = amplitude * frequency * (frequency * t).cos();
                    (1.0 + d * d).sqrt()
                };
                let v = crate::numeric::adaptive_integral(&mut f, 0.0, period, 1e-13)
                    .expect("periodic speed integral")
                    / period;
                CACHE.lock().unwrap().as_mut().unwrap().insert(key, v);
                v
            }
        }
    }
}

/// Generator tag plus parameters; enough to reconstruct the set and to drive
/// generator-specific fast paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometryDescriptor {
    Flat { d: usize, n: usize, extent: f64, h: f64 },
    LipschitzGraph { n: usize, profile: ProfileSpec, lip_const: f64, extent: f64, h: f64 },
    CantorGarnett { level: u32, n: usize, scale: f64 },
    Cloud { source: String },
}

impl GeometryDescriptor {
    pub fn kind_name(&self) -> &'static str {
        match self {
            GeometryDescriptor::Flat { .. } => "flat",
            GeometryDescriptor::LipschitzGraph { .. } => "lipschitz_graph",
            GeometryDescriptor::CantorGarnett { .. } => "cantor_garnett",
            GeometryDescriptor::Cloud { .. } => "cloud",
        }
    }
}

/// Result of the empirical Ahlfors-regularity sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AhlforsReport {
    pub c_low: f64,
    pub c_high: f64,
    pub samples: usize,
    pub scale_range: (f64, f64),
}

/// A boundary set Γ: immutable after construction, safe to share across
/// threads. Coordinates are stored flat (row-major, stride `n`).
#[derive(Debug)]
pub struct BoundarySet {
    coords: Vec<f64>,
    weights: Vec<f64>,
    d: usize,
    n: usize,
    resolution_h: f64,
    c_emp: f64,
    descriptor: GeometryDescriptor,
    index: SpatialIndex,
    bbox_lo: Vec<f64>,
    bbox_hi: Vec<f64>,
    total_weight: f64,
}

impl BoundarySet {
    fn assemble(
        coords: Vec<f64>,
        weights: Vec<f64>,
        d: usize,
        n: usize,
        resolution_h: f64,
        c_emp: f64,
        descriptor: GeometryDescriptor,
    ) -> Result<Self, GeometryError> {
        if d + 1 >= n {
            return Err(GeometryError::BadCodimension { d, n });
        }
        let count = weights.len();
        if count == 0 {
            return Err(GeometryError::BadParameter("empty point cloud".into()));
        }
        if coords.len() != count * n {
            return Err(GeometryError::BadParameter("coordinate/weight length mismatch".into()));
        }
        if count > POINT_BUDGET {
            return Err(GeometryError::PointBudget { requested: count, budget: POINT_BUDGET });
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(GeometryError::BadParameter("weights must be strictly positive".into()));
        }
        let mut bbox_lo = coords[..n].to_vec();
        let mut bbox_hi = coords[..n].to_vec();
        for i in 0..count {
            for j in 0..n {
                let c = coords[i * n + j];
                bbox_lo[j] = bbox_lo[j].min(c);
                bbox_hi[j] = bbox_hi[j].max(c);
            }
        }
        let span = bbox_lo
            .iter()
            .zip(&bbox_hi)
            .map(|(a, b)| b - a)
            .fold(0.0f64, f64::max)
            .max(resolution_h);
        // Bin size balances shell-search cost against bin occupancy.
        let cell = (resolution_h * 4.0).max(span / 512.0);
        let index = SpatialIndex::build(&coords, n, cell);
        let total_weight = weights.iter().sum();
        Ok(BoundarySet {
            coords,
            weights,
            d,
            n,
            resolution_h,
            c_emp,
            descriptor,
            index,
            bbox_lo,
            bbox_hi,
            total_weight,
        })
    }

    /// Builds a set from raw atoms (no generator attached; evaluation falls
    /// back to the cloud route).
    pub fn from_parts(
        coords: Vec<f64>,
        weights: Vec<f64>,
        d: usize,
        n: usize,
        resolution_h: f64,
        c_emp: f64,
    ) -> Result<Self, GeometryError> {
        Self::assemble(
            coords,
            weights,
            d,
            n,
            resolution_h,
            c_emp,
            GeometryDescriptor::Cloud { source: "in-memory".to_string() },
        )
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim_d(&self) -> usize {
        self.d
    }

    pub fn dim_n(&self) -> usize {
        self.n
    }

    pub fn resolution_h(&self) -> f64 {
        self.resolution_h
    }

    /// Declared empirical Ahlfors constant for this generator.
    pub fn c_emp(&self) -> f64 {
        self.c_emp
    }

    pub fn descriptor(&self) -> &GeometryDescriptor {
        &self.descriptor
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.n..(i + 1) * self.n]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn coords_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn bbox(&self) -> (&[f64], &[f64]) {
        (&self.bbox_lo, &self.bbox_hi)
    }

    /// Diameter of the atom cloud (bounding-box diagonal; exact enough for
    /// scale bookkeeping).
    pub fn diameter(&self) -> f64 {
        dist2(&self.bbox_lo, &self.bbox_hi).sqrt()
    }

    /// Nearest atom to `x` and its distance. Uses closed-form projections for
    /// grid-structured generators, the spatial index otherwise.
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        debug_assert_eq!(x.len(), self.n);
        match &self.descriptor {
            GeometryDescriptor::Flat { d, h, extent, .. } => {
                let per_axis = grid_points_per_axis(*extent, *h);
                let k = (per_axis - 1) / 2;
                let mut idx = 0usize;
                let mut d2 = 0.0;
                for j in 0..*d {
                    let snapped = (x[j] / h).round().clamp(-(k as f64), k as f64) as i64;
                    let t = x[j] - snapped as f64 * h;
                    d2 += t * t;
                    idx = idx * per_axis + (snapped + k as i64) as usize;
                }
                for j in *d..self.n {
                    d2 += x[j] * x[j];
                }
                (idx, d2.sqrt())
            }
            GeometryDescriptor::LipschitzGraph { extent, h, .. } => {
                // Any atom with |t_i - x_0| greater than the best distance so
                // far can be discarded, so scan outward from the projection.
                let per_axis = grid_points_per_axis(*extent, *h);
                let k = ((per_axis - 1) / 2) as i64;
                let i0 = (x[0] / h).round().clamp(-(k as f64), k as f64) as i64;
                let at = |i: i64| (i + k) as usize;
                let mut best = (at(i0), dist2(self.point(at(i0)), x));
                let mut off = 1i64;
                loop {
                    let t_gap = off as f64 * h - (x[0] - i0 as f64 * h).abs();
                    if t_gap > 0.0 && t_gap * t_gap >= best.1 {
                        break;
                    }
                    let mut advanced = false;
                    for i in [i0 - off, i0 + off] {
                        if i >= -k && i <= k {
                            advanced = true;
                            let d2 = dist2(self.point(at(i)), x);
                            if d2 < best.1 {
                                best = (at(i), d2);
                            }
                        }
                    }
                    if !advanced {
                        break;
                    }
                    off += 1;
                }
                (best.0, best.1.sqrt())
            }
            _ => {
                let (i, dist) = self
                    .index
                    .nearest(&self.coords, x)
                    .expect("non-empty set");
                (i, dist)
            }
        }
    }

    /// dist(x, Γ) against the atom cloud.
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.nearest(x).1
    }

    /// Atom indices within `B(x, r)`.
    pub fn atoms_within(&self, x: &[f64], r: f64, out: &mut Vec<usize>) {
        self.index.within(&self.coords, x, r, out);
    }

    /// σ(B(x, r)) as the weighted atom count. Closed-form count on the flat
    /// line generator, where the sweeps downstream query it millions of
    /// times.
    pub fn sigma_ball(&self, x: &[f64], r: f64) -> f64 {
        if let GeometryDescriptor::Flat { d: 1, h, extent, .. } = &self.descriptor {
            let mut perp2 = 0.0;
            for j in 1..self.n {
                perp2 += x[j] * x[j];
            }
            if perp2 > r * r {
                return 0.0;
            }
            let t = (r * r - perp2).sqrt();
            let k = ((grid_points_per_axis(*extent, *h) - 1) / 2) as i64;
            let klo = (((x[0] - t) / h) - 1e-9).ceil().max(-(k as f64)) as i64;
            let khi = (((x[0] + t) / h) + 1e-9).floor().min(k as f64) as i64;
            return (khi - klo + 1).max(0) as f64 * h;
        }
        let mut hits = Vec::new();
        self.atoms_within(x, r, &mut hits);
        hits.iter().map(|&i| self.weights[i]).sum()
    }

    /// Serializes the cloud as CSV: n coordinates then the weight, per row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), GeometryError> {
        for i in 0..self.len() {
            let mut row = String::new();
            for j in 0..self.n {
                row.push_str(&format!("{:.17e},", self.coords[i * self.n + j]));
            }
            row.push_str(&format!("{:.17e}\n", self.weights[i]));
            out.write_all(row.as_bytes())?;
        }
        Ok(())
    }

    /// Reads a cloud from CSV rows of `n` coordinates plus a weight.
    pub fn read_csv<R: BufRead>(
        reader: R,
        d: usize,
        n: usize,
        source: &str,
    ) -> Result<Self, GeometryError> {
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').collect();
            if fields.len() != n + 1 {
                return Err(GeometryError::Csv {
                    line: lineno + 1,
                    message: format!("expected {} fields, got {}", n + 1, fields.len()),
                });
            }
            for (j, field) in fields.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|e| GeometryError::Csv {
                    line: lineno + 1,
                    message: format!("{e}"),
                })?;
                if j < n {
                    coords.push(v);
                } else {
                    weights.push(v);
                }
            }
        }
        // Estimate the resolution as the median nearest-neighbor gap of a
        // deterministic subsample.
        let count = weights.len();
        if count == 0 {
            return Err(GeometryError::BadParameter("empty csv".into()));
        }
        let probe = SpatialIndex::build(&coords, n, estimate_cell(&coords, n));
        let stride = (count / 256).max(1);
        let mut gaps: Vec<f64> = Vec::new();
        for i in (0..count).step_by(stride) {
            let x = &coords[i * n..(i + 1) * n];
            // Nearest other atom: query, and if it returns itself look slightly around.
            if let Some((j, dist)) = probe.nearest(&coords, x) {
                if j != i && dist > 0.0 {
                    gaps.push(dist);
                } else {
                    let mut best = f64::INFINITY;
                    for k in 0..count {
                        if k != i {
                            best = best.min(dist2(&coords[k * n..(k + 1) * n], x));
                        }
                    }
                    gaps.push(best.sqrt());
                }
            }
        }
        gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let h = gaps.get(gaps.len() / 2).copied().unwrap_or(1e-3).max(1e-12);
        Self::assemble(
            coords,
            weights,
            d,
            n,
            h,
            16.0,
            GeometryDescriptor::Cloud { source: source.to_string() },
        )
    }

    /// Structured JSON descriptor {kind, params, d, n, h, count}.
    pub fn descriptor_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.descriptor.kind_name(),
            "params": self.descriptor,
            "d": self.d,
            "n": self.n,
            "h": self.resolution_h,
            "count": self.len(),
        })
    }
}

fn estimate_cell(coords: &[f64], n: usize) -> f64 {
    let count = coords.len() / n;
    let mut lo = coords[..n].to_vec();
    let mut hi = coords[..n].to_vec();
    for i in 0..count {
        for j in 0..n {
            lo[j] = lo[j].min(coords[i * n + j]);
            hi[j] = hi[j].max(coords[i * n + j]);
        }
    }
    let span = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0f64, f64::max);
    (span / 256.0).max(1e-9)
}

fn grid_points_per_axis(extent: f64, h: f64) -> usize {
    (2.0 * extent / h).round() as usize + 1
}

/// Uniform grid of atoms on the coordinate d-plane {t = 0} inside
/// [-extent, extent]^d, each carrying weight h^d.
pub fn make_flat(d: usize, n: usize, extent: f64, h: f64) -> Result<BoundarySet, GeometryError> {
    if d + 1 >= n {
        return Err(GeometryError::BadCodimension { d, n });
    }
    if !(extent > 0.0) || !(h > 0.0) {
        return Err(GeometryError::BadParameter("extent and h must be positive".into()));
    }
    let per_axis = grid_points_per_axis(extent, h);
    let count = per_axis.pow(d as u32);
    if count > POINT_BUDGET {
        return Err(GeometryError::PointBudget { requested: count, budget: POINT_BUDGET });
    }
    let k = ((per_axis - 1) / 2) as i64;
    let mut coords = Vec::with_capacity(count * n);
    let mut idx = vec![-k; d];
    loop {
        for &i in &idx {
            coords.push(i as f64 * h);
        }
        for _ in d..n {
            coords.push(0.0);
        }
        // Odometer increment over the d grid axes (last axis fastest would
        // also work; this order matches the fast nearest-path indexing).
        let mut axis = d;
        loop {
            if axis == 0 {
                break;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] <= k {
                break;
            }
            idx[axis] = -k;
            if axis == 0 {
                break;
            }
        }
        if idx.iter().all(|&i| i == -k) {
            break;
        }
    }
    let weights = vec![h.powi(d as i32); count];
    BoundarySet::assemble(
        coords,
        weights,
        d,
        n,
        h,
        1.5,
        GeometryDescriptor::Flat { d, n, extent, h },
    )
}

/// Arc-length-weighted atoms along the graph t -> (t, phi(t)) for
/// t in [-extent, extent] at parameter spacing h.
pub fn make_lipschitz_graph(
    n: usize,
    profile: ProfileSpec,
    lip_const: f64,
    extent: f64,
    h: f64,
) -> Result<BoundarySet, GeometryError> {
    let d = 1;
    if d + 1 >= n {
        return Err(GeometryError::BadCodimension { d, n });
    }
    if !(extent > 0.0) || !(h > 0.0) || !(lip_const >= 0.0) {
        return Err(GeometryError::BadParameter("extent, h, lip_const must be valid".into()));
    }
    let per_axis = grid_points_per_axis(extent, h);
    if per_axis > POINT_BUDGET {
        return Err(GeometryError::PointBudget { requested: per_axis, budget: POINT_BUDGET });
    }
    let k = ((per_axis - 1) / 2) as i64;
    let mut coords = Vec::with_capacity(per_axis * n);
    let mut weights = Vec::with_capacity(per_axis);
    let mut phi = vec![0.0; n - 1];
    let mut dphi = vec![0.0; n - 1];
    let mut max_slope = 0.0f64;
    for i in -k..=k {
        let t = i as f64 * h;
        profile.value(t, &mut phi);
        profile.derivative(t, &mut dphi);
        let slope2: f64 = dphi.iter().map(|v| v * v).sum();
        max_slope = max_slope.max(slope2.sqrt());
        coords.push(t);
        coords.extend_from_slice(&phi);
        weights.push((1.0 + slope2).sqrt() * h);
    }
    if max_slope > 1.5 * lip_const + 1e-12 {
        return Err(GeometryError::SlopeMismatch { observed: max_slope, declared: lip_const });
    }
    BoundarySet::assemble(
        coords,
        weights,
        d,
        n,
        h,
        2.0,
        GeometryDescriptor::LipschitzGraph { n, profile, lip_const, extent, h },
    )
}

/// Four-corner Cantor iteration (contraction 1/4) in the coordinate 2-plane,
/// embedded in Rⁿ: the purely-unrectifiable control set. Atoms are cell
/// centers with the normalized weight 4^{-level}.
pub fn make_cantor_garnett(level: u32, n: usize, scale: f64) -> Result<BoundarySet, GeometryError> {
    let d = 1;
    if d + 1 >= n {
        return Err(GeometryError::BadCodimension { d, n });
    }
    if level == 0 {
        return Err(GeometryError::BadParameter("level must be >= 1".into()));
    }
    if (scale - 0.25).abs() > 1e-12 {
        // Only the 1/4 ratio gives an integer-dimensional (d = 1) limit set.
        return Err(GeometryError::BadParameter(format!(
            "contraction ratio must be 1/4 (got {scale}); other ratios give non-integer dimension"
        )));
    }
    let count = 4usize.pow(level);
    if count > POINT_BUDGET {
        return Err(GeometryError::PointBudget { requested: count, budget: POINT_BUDGET });
    }
    let mut cells = vec![(0.0f64, 0.0f64, 1.0f64)];
    for _ in 0..level {
        let mut next = Vec::with_capacity(cells.len() * 4);
        for (x0, y0, side) in cells {
            let s = side * scale;
            let far = side - s;
            next.push((x0, y0, s));
            next.push((x0 + far, y0, s));
            next.push((x0, y0 + far, s));
            next.push((x0 + far, y0 + far, s));
        }
        cells = next;
    }
    let mut coords = Vec::with_capacity(count * n);
    for &(x0, y0, side) in &cells {
        coords.push(x0 + side * 0.5);
        coords.push(y0 + side * 0.5);
        for _ in 2..n {
            coords.push(0.0);
        }
    }
    let weights = vec![0.25f64.powi(level as i32); count];
    let h = 0.25f64.powi(level as i32);
    BoundarySet::assemble(
        coords,
        weights,
        d,
        n,
        h,
        8.0,
        GeometryDescriptor::CantorGarnett { level, n, scale },
    )
}

/// Samples σ(B(x, r)) / r^d over seeded centers and log-spaced radii in
/// [10h, diam/4] and reports the extreme ratios.
pub fn check_ahlfors(
    set: &BoundarySet,
    n_centers: usize,
    n_radii: usize,
    seed: u64,
) -> Result<AhlforsReport, GeometryError> {
    let r_min = 10.0 * set.resolution_h();
    let r_max = set.diameter() / 4.0;
    check_ahlfors_in_range(set, n_centers, n_radii, seed, r_min, r_max)
}

/// Same sweep with an explicit radius range; rejects ranges below the trust
/// floor of 10 x resolution.
pub fn check_ahlfors_in_range(
    set: &BoundarySet,
    n_centers: usize,
    n_radii: usize,
    seed: u64,
    r_min: f64,
    r_max: f64,
) -> Result<AhlforsReport, GeometryError> {
    if n_centers == 0 || n_radii == 0 {
        return Err(GeometryError::BadParameter("need n_centers, n_radii >= 1".into()));
    }
    let floor = 10.0 * set.resolution_h();
    if r_min < floor * (1.0 - 1e-12) {
        return Err(GeometryError::RadiusBelowFloor { r: r_min, floor });
    }
    if r_min > r_max {
        return Err(GeometryError::ScaleRange { r_min, r_max });
    }
    let mut rng = SplitMix64::new(seed);
    let mut c_low = f64::INFINITY;
    let mut c_high = 0.0f64;
    let mut samples = 0usize;
    let d = set.dim_d() as i32;
    for _ in 0..n_centers {
        let center_idx = rng.below(set.len());
        let x = set.point(center_idx).to_vec();
        for j in 0..n_radii {
            let t = if n_radii == 1 { 0.0 } else { j as f64 / (n_radii - 1) as f64 };
            let r = r_min * (r_max / r_min).powf(t);
            let ratio = set.sigma_ball(&x, r) / r.powi(d);
            c_low = c_low.min(ratio);
            c_high = c_high.max(ratio);
            samples += 1;
        }
    }
    Ok(AhlforsReport { c_low, c_high, samples, scale_range: (r_min, r_max) })
}
