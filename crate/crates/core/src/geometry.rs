//! Design-point sets on boxes and the fill distance, separation radius and
//! mesh ratio that control every error bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("design size must be at least 1 (got n = 0)")]
    EmptyDesign,
    #[error("dimension must be 1 or 2 (got {0})")]
    UnsupportedDimension(usize),
    #[error("axis {axis} is degenerate: lower {lower} must be below upper {upper}")]
    DegenerateRegion { axis: usize, lower: f64, upper: f64 },
    #[error("experimental box is not contained in the ambient box on axis {axis}")]
    NotContained { axis: usize },
    #[error("point {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("points {i} and {j} coincide; separation radius would be zero")]
    DuplicatePoints { i: usize, j: usize },
    #[error("separation radius needs at least 2 points (got {0})")]
    TooFewPoints(usize),
    #[error("fill-distance resolution {got} per axis is below the minimum {min}")]
    ResolutionTooSmall { got: usize, min: usize },
    #[error("grid designs in 2 dimensions need a perfect-square n (got {0})")]
    NotPerfectSquare(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn scalar(x: f64) -> Self {
        Self { coords: vec![x] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        distance(&self.coords, &other.coords)
    }
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    match (a, b) {
        ([x], [y]) => (x - y).abs(),
        _ => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
    }
}

/// Axis-aligned experimental box Ω inside an ambient box D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub ambient_lower: Vec<f64>,
    pub ambient_upper: Vec<f64>,
}

impl Region {
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        ambient_lower: Vec<f64>,
        ambient_upper: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        let r = Self { lower, upper, ambient_lower, ambient_upper };
        r.validate()?;
        Ok(r)
    }

    /// Ω = D = (a, b).
    pub fn interval(a: f64, b: f64) -> Result<Self, GeometryError> {
        Self::new(vec![a], vec![b], vec![a], vec![b])
    }

    /// Ω = (a, b) inside D = (da, db).
    pub fn interval_in(a: f64, b: f64, da: f64, db: f64) -> Result<Self, GeometryError> {
        Self::new(vec![a], vec![b], vec![da], vec![db])
    }

    /// The unit cube (0, 1)^d.
    pub fn unit(d: usize) -> Result<Self, GeometryError> {
        Self::new(vec![0.0; d], vec![1.0; d], vec![0.0; d], vec![1.0; d])
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let d = self.lower.len();
        if d != 1 && d != 2 {
            return Err(GeometryError::UnsupportedDimension(d));
        }
        if self.upper.len() != d || self.ambient_lower.len() != d || self.ambient_upper.len() != d
        {
            return Err(GeometryError::DimensionMismatch {
                index: 0,
                expected: d,
                got: self.upper.len(),
            });
        }
        for axis in 0..d {
            let (lo, hi) = (self.lower[axis], self.upper[axis]);
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(GeometryError::DegenerateRegion { axis, lower: lo, upper: hi });
            }
            let (alo, ahi) = (self.ambient_lower[axis], self.ambient_upper[axis]);
            if !(alo < ahi) {
                return Err(GeometryError::DegenerateRegion { axis, lower: alo, upper: ahi });
            }
            if lo < alo || hi > ahi {
                return Err(GeometryError::NotContained { axis });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(a, b)| b - a).product()
    }

    /// Ω strictly inside D on every axis.
    pub fn strictly_contained(&self) -> bool {
        (0..self.dim()).all(|i| {
            self.ambient_lower[i] < self.lower[i] && self.upper[i] < self.ambient_upper[i]
        })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(i, &v)| v >= self.lower[i] && v <= self.upper[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    #[serde(alias = "midpoint")]
    MidpointGrid,
    #[serde(alias = "jittered")]
    JitteredGrid,
    #[serde(alias = "iid")]
    IidUniform,
}

impl std::str::FromStr for DesignKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "midpoint-grid" | "midpoint" => Ok(Self::MidpointGrid),
            "jittered-grid" | "jittered" => Ok(Self::JitteredGrid),
            "iid-uniform" | "iid" => Ok(Self::IidUniform),
            other => Err(format!(
                "unknown design kind '{other}' (expected midpoint-grid, jittered-grid or iid-uniform)"
            )),
        }
    }
}

/// Jitter amplitude as a fraction of the grid spacing.
pub const JITTER_FRACTION: f64 = 0.25;

/// Default fill-distance resolution per axis.
pub fn default_resolution(d: usize) -> usize {
    if d == 1 {
        10_001
    } else {
        301
    }
}

fn min_resolution(d: usize) -> usize {
    if d == 1 {
        1000
    } else {
        32
    }
}

/// An immutable design with cached geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSet {
    region: Region,
    points: Vec<Point>,
    h: f64,
    q: f64,
    rho: f64,
}

#[derive(Serialize)]
struct DesignJson<'a> {
    d: usize,
    points: Vec<&'a [f64]>,
    h: f64,
    q: f64,
    rho: f64,
}

impl DesignSet {
    pub fn new(region: Region, points: Vec<Point>) -> Result<Self, GeometryError> {
        let m = default_resolution(region.dim());
        Self::with_resolution(region, points, m)
    }

    pub fn with_resolution(
        region: Region,
        points: Vec<Point>,
        resolution: usize,
    ) -> Result<Self, GeometryError> {
        region.validate()?;
        let d = region.dim();
        check_points(&points, d)?;
        let h = fill_distance(&points, &region, resolution)?;
        let q = if points.len() == 1 {
            boundary_gap(&points[0].coords, &region)
        } else {
            separation_radius(&points)?
        };
        Ok(Self { region, points, h, q, rho: h / q })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    pub fn fill_distance(&self) -> f64 {
        self.h
    }

    pub fn separation_radius(&self) -> f64 {
        self.q
    }

    pub fn mesh_ratio(&self) -> f64 {
        self.rho
    }

    /// First coordinates, for one-dimensional designs.
    pub fn scalars(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.coords[0]).collect()
    }

    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        let mut out = header.join(",");
        out.push('\n');
        for p in &self.points {
            let row: Vec<String> = p.coords.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let j = DesignJson {
            d: self.dim(),
            points: self.points.iter().map(|p| p.coords.as_slice()).collect(),
            h: self.h,
            q: self.q,
            rho: self.rho,
        };
        serde_json::to_value(j).expect("design serializes")
    }
}

fn check_points(points: &[Point], d: usize) -> Result<(), GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptyDesign);
    }
    for (index, p) in points.iter().enumerate() {
        if p.dim() != d {
            return Err(GeometryError::DimensionMismatch { index, expected: d, got: p.dim() });
        }
        if p.coords.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite { index });
        }
    }
    Ok(())
}

fn boundary_gap(x: &[f64], region: &Region) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, &v)| (v - region.lower[i]).min(region.upper[i] - v))
        .fold(f64::INFINITY, f64::min)
}

fn integer_sqrt(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

/// Generate a design; deterministic in `(kind, n, seed)`.
pub fn make_design(
    kind: DesignKind,
    n: usize,
    region: &Region,
    seed: u64,
) -> Result<DesignSet, GeometryError> {
    region.validate()?;
    if n == 0 {
        return Err(GeometryError::EmptyDesign);
    }
    let d = region.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_axis = if d == 1 {
        n
    } else {
        match kind {
            DesignKind::IidUniform => n,
            _ => integer_sqrt(n).ok_or(GeometryError::NotPerfectSquare(n))?,
        }
    };
    let points: Vec<Point> = match kind {
        DesignKind::IidUniform => (0..n)
            .map(|_| {
                Point::new(
                    (0..d)
                        .map(|a| rng.gen_range(region.lower[a]..region.upper[a]))
                        .collect(),
                )
            })
            .collect(),
        DesignKind::MidpointGrid | DesignKind::JitteredGrid => {
            let jitter = kind == DesignKind::JitteredGrid;
            let axis_coord = |a: usize, i: usize, rng: &mut ChaCha8Rng| {
                let width = region.upper[a] - region.lower[a];
                let spacing = width / per_axis as f64;
                let mut t = region.lower[a] + (2 * i + 1) as f64 * width / (2 * per_axis) as f64;
                if jitter {
                    t += rng.gen_range(-JITTER_FRACTION..JITTER_FRACTION) * spacing;
                }
                t
            };
            if d == 1 {
                (0..n).map(|i| Point::scalar(axis_coord(0, i, &mut rng))).collect()
            } else {
                let mut pts = Vec::with_capacity(n);
                for i in 0..per_axis {
                    for j in 0..per_axis {
                        let x = axis_coord(0, i, &mut rng);
                        let y = axis_coord(1, j, &mut rng);
                        pts.push(Point::new(vec![x, y]));
                    }
                }
                pts
            }
        }
    };
    DesignSet::new(region.clone(), points)
}

fn axis_grid(region: &Region, axis: usize, m: usize) -> impl Fn(usize) -> f64 + Sync + '_ {
    let a = region.lower[axis];
    let w = region.upper[axis] - a;
    move |j| a + w * j as f64 / (m - 1) as f64
}

/// Max over a uniform closed grid with `resolution` points per axis of the
/// distance to the nearest design point.
pub fn fill_distance(
    points: &[Point],
    region: &Region,
    resolution: usize,
) -> Result<f64, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptyDesign);
    }
    let d = region.dim();
    if resolution < min_resolution(d) {
        return Err(GeometryError::ResolutionTooSmall { got: resolution, min: min_resolution(d) });
    }
    check_points(points, d)?;
    let m = resolution;
    const CHUNK: usize = 4096;
    if d == 1 {
        let mut xs: Vec<f64> = points.iter().map(|p| p.coords[0]).collect();
        xs.sort_by(f64::total_cmp);
        let g = axis_grid(region, 0, m);
        let h = (0..m)
            .into_par_iter()
            .with_min_len(CHUNK)
            .map(|j| {
                let t = g(j);
                let k = xs.partition_point(|&x| x < t);
                let right = xs.get(k).map_or(f64::INFINITY, |&x| x - t);
                let left = if k > 0 { t - xs[k - 1] } else { f64::INFINITY };
                right.min(left)
            })
            .reduce(|| 0.0, f64::max);
        Ok(h)
    } else {
        let gx = axis_grid(region, 0, m);
        let gy = axis_grid(region, 1, m);
        let h = (0..m * m)
            .into_par_iter()
            .with_min_len(CHUNK)
            .map(|idx| {
                let t = [gx(idx / m), gy(idx % m)];
                points
                    .iter()
                    .map(|p| distance(&t, &p.coords))
                    .fold(f64::INFINITY, f64::min)
            })
            .reduce(|| 0.0, f64::max);
        Ok(h)
    }
}

/// Half the smallest pairwise distance; exact.
pub fn separation_radius(points: &[Point]) -> Result<f64, GeometryError> {
    if points.len() < 2 {
        return Err(GeometryError::TooFewPoints(points.len()));
    }
    let mut best = f64::INFINITY;
    let mut pair = (0, 1);
    if points.iter().all(|p| p.dim() == 1) {
        let mut idx: Vec<usize> = (0..points.len()).collect();
        idx.sort_by(|&a, &b| points[a].coords[0].total_cmp(&points[b].coords[0]));
        for w in idx.windows(2) {
            let g = (points[w[1]].coords[0] - points[w[0]].coords[0]).abs();
            if g < best {
                best = g;
                pair = (w[0].min(w[1]), w[0].max(w[1]));
            }
        }
    } else {
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                let g = points[i].distance(&points[j]);
                if g < best {
                    best = g;
                    pair = (i, j);
                }
            }
        }
    }
    if best == 0.0 {
        return Err(GeometryError::DuplicatePoints { i: pair.0, j: pair.1 });
    }
    Ok(0.5 * best)
}

/// ρ = h / q.
pub fn mesh_ratio(design: &DesignSet) -> f64 {
    design.fill_distance() / design.separation_radius()
}
