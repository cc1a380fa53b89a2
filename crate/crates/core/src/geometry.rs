//! Point clouds, grids, distances, nearest neighbors and the micro/macro
//! clustering step of the control learning algorithm.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::Error;
use crate::linalg::{distance, squared_distance};

/// Ordered, finite set of points in ℝⁿ stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    /// Builds a cloud from a flat coordinate buffer (`len` points of `dim` each).
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self, Error> {
        if dim == 0 {
            return Err(Error::InvalidParameter("point dimension must be at least 1"));
        }
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch { expected: dim, found: coords.len() % dim });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("point coordinates must be finite"));
        }
        Ok(PointCloud { dim, coords })
    }

    pub fn empty(dim: usize) -> Self {
        PointCloud { dim, coords: Vec::new() }
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self, Error> {
        let dim = points.first().map(|p| p.as_ref().len()).ok_or(Error::EmptyPointSet)?;
        let mut coords = Vec::with_capacity(dim * points.len());
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
            }
            coords.extend_from_slice(p);
        }
        PointCloud::new(dim, coords)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn push(&mut self, p: &[f64]) -> Result<(), Error> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: p.len() });
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("point coordinates must be finite"));
        }
        self.coords.extend_from_slice(p);
        Ok(())
    }

    pub fn subset(&self, indices: &[usize]) -> PointCloud {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointCloud { dim: self.dim, coords }
    }

    /// Points lying in the closed box.
    pub fn restrict_to(&self, domain: &AxisBox) -> PointCloud {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| domain.contains(self.point(i))).collect();
        self.subset(&idx)
    }

    /// Index of the first point exactly equal to `x`.
    pub fn position(&self, x: &[f64]) -> Option<usize> {
        self.iter().position(|p| p == x)
    }

    /// First pair of coinciding points, if any (by lexicographic sort).
    pub fn first_duplicate(&self) -> Option<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| lex_cmp(self.point(a), self.point(b)).then(a.cmp(&b)));
        order
            .windows(2)
            .filter(|w| self.point(w[0]) == self.point(w[1]))
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
            .min()
    }

    pub fn is_pairwise_distinct(&self) -> bool {
        self.first_duplicate().is_none()
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Closed axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl AxisBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, Error> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), found: upper.len() });
        }
        if lower.is_empty() {
            return Err(Error::InvalidParameter("box must have at least one axis"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidParameter("box requires finite lower < upper on every axis"));
        }
        Ok(AxisBox { lower, upper })
    }

    /// `[lo, hi]ⁿ`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self, Error> {
        AxisBox::new(vec![lo; dim], vec![hi; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn diameter(&self) -> f64 {
        distance(&self.lower, &self.upper)
    }

    pub fn max_edge(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).fold(0.0, f64::max)
    }
}

/// Cartesian product of per-axis coordinate lists; first axis varies slowest.
fn tensor_product(axes: &[Vec<f64>]) -> PointCloud {
    let dim = axes.len();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut coords = Vec::with_capacity(total * dim);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        for (a, &i) in idx.iter().enumerate() {
            coords.push(axes[a][i]);
        }
        for a in (0..dim).rev() {
            idx[a] += 1;
            if idx[a] < axes[a].len() {
                break;
            }
            idx[a] = 0;
        }
    }
    PointCloud { dim, coords }
}

const LATTICE_SLACK: f64 = 1e-9;

fn lattice_axis(lo: f64, hi: f64, delta: f64, offset: f64) -> Vec<f64> {
    let kmin = libm::ceil((lo - offset) / delta - LATTICE_SLACK) as i64;
    let kmax = libm::floor((hi - offset) / delta + LATTICE_SLACK) as i64;
    (kmin..=kmax).map(|k| k as f64 * delta + offset).collect()
}

/// All points of the lattice `δℤⁿ` in the closed box, lexicographically ordered.
pub fn uniform_grid(domain: &AxisBox, delta: f64) -> Result<PointCloud, Error> {
    shifted_lattice(domain, delta, 0.0)
}

/// Staggered lattice `(δℤ + δ/2)ⁿ` in the box, used for validation so that
/// no validation point coincides with a data site of a `δ`-refinement.
pub fn staggered_grid(domain: &AxisBox, delta: f64) -> Result<PointCloud, Error> {
    shifted_lattice(domain, delta, delta / 2.0)
}

fn shifted_lattice(domain: &AxisBox, delta: f64, offset: f64) -> Result<PointCloud, Error> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter("grid spacing must be positive"));
    }
    let axes: Vec<Vec<f64>> = domain
        .lower
        .iter()
        .zip(&domain.upper)
        .map(|(&lo, &hi)| lattice_axis(lo, hi, delta, offset))
        .collect();
    if axes.iter().any(Vec::is_empty) {
        return Err(Error::EmptyPointSet);
    }
    Ok(tensor_product(&axes))
}

/// Chebyshev–Gauss–Lobatto nodes on `[lo, hi]`, ascending, endpoints included.
pub fn chebyshev_nodes(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let m = (count - 1) as f64;
    (0..count)
        .map(|j| {
            if j == 0 {
                lo
            } else if j == count - 1 {
                hi
            } else {
                // −cos(πj/m) written as a sine so the node set is exactly symmetric.
                let t = core::f64::consts::PI * (2.0 * j as f64 - m) / (2.0 * m);
                mid + half * libm::sin(t)
            }
        })
        .collect()
}

/// Tensor product of Chebyshev–Gauss–Lobatto nodes mapped onto each axis.
pub fn chebyshev_grid(domain: &AxisBox, points_per_axis: usize) -> Result<PointCloud, Error> {
    if points_per_axis < 2 {
        return Err(Error::InvalidParameter("Chebyshev grid needs at least 2 points per axis"));
    }
    let axes: Vec<Vec<f64>> = domain
        .lower
        .iter()
        .zip(&domain.upper)
        .map(|(&lo, &hi)| chebyshev_nodes(lo, hi, points_per_axis))
        .collect();
    Ok(tensor_product(&axes))
}

/// Euclidean distance from `x` to the nearest cloud point.
pub fn dist_to_cloud(x: &[f64], cloud: &PointCloud) -> f64 {
    libm::sqrt(cloud.iter().map(|p| squared_distance(x, p)).fold(f64::INFINITY, f64::min))
}

/// Default probe spacing for [`fill_distance`]: longest box edge / 400.
pub fn default_probe_resolution(domain: &AxisBox) -> f64 {
    domain.max_edge() / 400.0
}

/// Fill distance `sup_{x∈Ω} dist(x, X)` approximated on a probe lattice of
/// spacing at most `probe_resolution` that includes the box corners. The
/// result is a lower bound on the true value, off by at most
/// `probe_resolution·√n/2`.
pub fn fill_distance(cloud: &PointCloud, domain: &AxisBox, probe_resolution: f64) -> Result<f64, Error> {
    if cloud.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if cloud.dim() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), found: cloud.dim() });
    }
    if !(probe_resolution > 0.0) {
        return Err(Error::InvalidParameter("probe resolution must be positive"));
    }
    let axes: Vec<Vec<f64>> = domain
        .lower
        .iter()
        .zip(&domain.upper)
        .map(|(&lo, &hi)| {
            let steps = libm::ceil((hi - lo) / probe_resolution - LATTICE_SLACK).max(1.0) as usize;
            (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect()
        })
        .collect();
    let probes = tensor_product(&axes);
    let mut best2 = 0.0f64;
    let mut hint = 0usize;
    for x in probes.iter() {
        // A probe can only raise the maximum if every cloud point is farther
        // than the current best; the previous nearest point is a good witness.
        if squared_distance(x, cloud.point(hint)) <= best2 {
            continue;
        }
        let mut nearest2 = f64::INFINITY;
        let mut nearest_idx = hint;
        for (i, p) in cloud.iter().enumerate() {
            let d2 = squared_distance(x, p);
            if d2 < nearest2 {
                nearest2 = d2;
                nearest_idx = i;
                if d2 <= best2 {
                    break;
                }
            }
        }
        hint = nearest_idx;
        best2 = best2.max(nearest2);
    }
    Ok(libm::sqrt(best2))
}

/// Indices of the `count` nearest cloud points, by ascending distance with
/// ties broken by the lower index.
pub fn nearest_neighbors(x: &[f64], cloud: &PointCloud, count: usize) -> Result<Vec<usize>, Error> {
    if count > cloud.len() {
        return Err(Error::NotEnoughPoints { requested: count, available: cloud.len() });
    }
    if x.len() != cloud.dim() {
        return Err(Error::DimensionMismatch { expected: cloud.dim(), found: x.len() });
    }
    let mut keyed: Vec<(f64, usize)> = cloud.iter().map(|p| squared_distance(x, p)).zip(0..).collect();
    let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if count == 0 {
        return Ok(Vec::new());
    }
    if count < keyed.len() {
        keyed.select_nth_unstable_by(count - 1, by_key);
        keyed.truncate(count);
    }
    keyed.sort_unstable_by(by_key);
    Ok(keyed.into_iter().map(|(_, i)| i).collect())
}

/// Greedy farthest-point selection of `count` centers from a cloud, starting
/// at index `start`. Approximately minimizes the fill distance of the subset.
pub fn farthest_point_centers(cloud: &PointCloud, count: usize, start: usize) -> Result<PointCloud, Error> {
    if count > cloud.len() {
        return Err(Error::NotEnoughPoints { requested: count, available: cloud.len() });
    }
    if count == 0 {
        return Ok(PointCloud::empty(cloud.dim()));
    }
    let mut chosen = vec![start];
    let mut d2: Vec<f64> = cloud.iter().map(|p| squared_distance(p, cloud.point(start))).collect();
    while chosen.len() < count {
        let (next, _) = d2
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        chosen.push(next);
        for (i, p) in cloud.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(p, cloud.point(next)));
        }
    }
    Ok(cloud.subset(&chosen))
}

/// Result of the clustering step: for each macro center, its `N` nearest
/// micro samples and their controls.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub centers: PointCloud,
    pub neighbor_indices: Vec<Vec<usize>>,
    /// Per center, `N` control vectors of length `m`, concatenated.
    pub controls: Vec<Vec<f64>>,
    pub control_dim: usize,
    /// Largest distance from a micro sample to its center.
    pub max_radius_eps: f64,
}

impl ClusterAssignment {
    pub fn cluster_size(&self) -> usize {
        self.neighbor_indices.first().map_or(0, Vec::len)
    }

    /// `j`-th control of cluster `l`.
    pub fn control(&self, l: usize, j: usize) -> &[f64] {
        &self.controls[l][j * self.control_dim..(j + 1) * self.control_dim]
    }
}

/// Assigns each center its `N` nearest micro samples. `micro_controls` holds
/// one control vector of length `control_dim` per micro point, concatenated.
pub fn build_clusters(
    micro: &PointCloud,
    micro_controls: &[f64],
    control_dim: usize,
    centers: &PointCloud,
    neighbors: usize,
) -> Result<ClusterAssignment, Error> {
    if control_dim == 0 {
        return Err(Error::InvalidParameter("control dimension must be at least 1"));
    }
    if micro_controls.len() != micro.len() * control_dim {
        return Err(Error::DimensionMismatch {
            expected: micro.len() * control_dim,
            found: micro_controls.len(),
        });
    }
    if centers.dim() != micro.dim() {
        return Err(Error::DimensionMismatch { expected: micro.dim(), found: centers.dim() });
    }
    if neighbors == 0 {
        return Err(Error::InvalidParameter("cluster size N must be positive"));
    }
    if micro.len() < neighbors {
        return Err(Error::NotEnoughPoints { requested: neighbors, available: micro.len() });
    }
    let mut neighbor_indices = Vec::with_capacity(centers.len());
    let mut controls = Vec::with_capacity(centers.len());
    let mut eps = 0.0f64;
    for c in centers.iter() {
        let idx = nearest_neighbors(c, micro, neighbors)?;
        let mut u = Vec::with_capacity(neighbors * control_dim);
        for &i in &idx {
            eps = eps.max(distance(c, micro.point(i)));
            u.extend_from_slice(&micro_controls[i * control_dim..(i + 1) * control_dim]);
        }
        neighbor_indices.push(idx);
        controls.push(u);
    }
    Ok(ClusterAssignment {
        centers: centers.clone(),
        neighbor_indices,
        controls,
        control_dim,
        max_radius_eps: eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(lo: f64, hi: f64) -> AxisBox {
        AxisBox::cube(2, lo, hi).unwrap()
    }

    #[test]
    fn uniform_grid_counts() {
        assert_eq!(uniform_grid(&square(-2.0, 2.0), 0.2).unwrap().len(), 441);
        assert_eq!(uniform_grid(&square(-2.0, 2.0), 0.1).unwrap().len(), 1681);
        assert_eq!(uniform_grid(&square(-2.0, 2.0), 0.05).unwrap().len(), 6561);
        let coarse = uniform_grid(&square(-2.0, 2.0), 2.0).unwrap();
        assert_eq!(coarse.len(), 9);
        assert_eq!(coarse.point(0), &[-2.0, -2.0]);
        assert_eq!(coarse.point(1), &[-2.0, 0.0]);
        assert_eq!(coarse.point(8), &[2.0, 2.0]);
        let line = uniform_grid(&AxisBox::cube(1, 0.0, 1.0).unwrap(), 0.5).unwrap();
        assert_eq!(line.as_flat(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn uniform_grid_contains_origin_and_rejects_empty() {
        let g = uniform_grid(&square(-2.0, 2.0), 0.2).unwrap();
        assert!(g.position(&[0.0, 0.0]).is_some());
        assert_eq!(uniform_grid(&square(0.1, 0.2), 1.0), Err(Error::EmptyPointSet));
        assert!(uniform_grid(&square(0.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn staggered_grid_avoids_lattice() {
        let v = staggered_grid(&square(-2.0, 2.0), 0.025).unwrap();
        assert_eq!(v.len(), 160 * 160);
        assert!((v.point(0)[0] + 1.9875).abs() < 1e-12);
    }

    #[test]
    fn chebyshev_grid_examples() {
        assert_eq!(chebyshev_grid(&square(-2.0, 2.0), 21).unwrap().len(), 441);
        let two = chebyshev_grid(&AxisBox::cube(1, 0.0, 1.0).unwrap(), 2).unwrap();
        assert_eq!(two.as_flat(), &[0.0, 1.0]);
        let three = chebyshev_grid(&AxisBox::cube(1, -1.0, 1.0).unwrap(), 3).unwrap();
        assert_eq!(three.as_flat(), &[-1.0, 0.0, 1.0]);
        let nodes = chebyshev_nodes(-2.0, 2.0, 9);
        for (j, x) in nodes.iter().enumerate() {
            let want = -2.0 * libm::cos(core::f64::consts::PI * j as f64 / 8.0);
            assert!((x - want).abs() < 1e-15);
        }
        assert!(chebyshev_grid(&square(0.0, 1.0), 1).is_err());
    }

    #[test]
    fn fill_distance_examples() {
        let b = square(-2.0, 2.0);
        let g = uniform_grid(&b, 0.2).unwrap();
        let h = fill_distance(&g, &b, default_probe_resolution(&b)).unwrap();
        assert!((h - 0.2 / libm::sqrt(2.0)).abs() < 1e-12, "{h}");

        let unit = square(0.0, 1.0);
        let center = PointCloud::from_points(&[[0.5, 0.5]]).unwrap();
        let h = fill_distance(&center, &unit, 0.01).unwrap();
        assert!((h - libm::sqrt(0.5)).abs() < 1e-12);

        let probe_equal = uniform_grid(&unit, 0.25).unwrap();
        assert_eq!(fill_distance(&probe_equal, &unit, 0.25).unwrap(), 0.0);
    }

    #[test]
    fn dist_to_cloud_examples() {
        let c = PointCloud::from_points(&[[0.0, 0.0]]).unwrap();
        assert_eq!(dist_to_cloud(&[3.0, 4.0], &c), 5.0);
        assert_eq!(dist_to_cloud(&[0.0, 0.0], &c), 0.0);
    }

    #[test]
    fn nearest_neighbors_examples_and_errors() {
        let c = PointCloud::from_points(&[[0.0], [1.0], [2.0], [3.0], [1.0]]).unwrap();
        assert_eq!(nearest_neighbors(&[1.0], &c, 1).unwrap(), vec![1]);
        // Tie at distance 0 between 1 and 4, then distance 1 between 0 and 2.
        assert_eq!(nearest_neighbors(&[1.0], &c, 4).unwrap(), vec![1, 4, 0, 2]);
        let mut all = nearest_neighbors(&[10.0], &c, 5).unwrap();
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
        assert_eq!(
            nearest_neighbors(&[0.0], &c, 6),
            Err(Error::NotEnoughPoints { requested: 6, available: 5 })
        );
    }

    #[test]
    fn clusters_of_own_centers_have_zero_radius() {
        let g = uniform_grid(&square(-1.0, 1.0), 0.5).unwrap();
        let controls: Vec<f64> = (0..g.len()).map(|i| i as f64).collect();
        let a = build_clusters(&g, &controls, 1, &g, 1).unwrap();
        assert_eq!(a.cluster_size(), 1);
        assert_eq!(a.max_radius_eps, 0.0);
        for (l, idx) in a.neighbor_indices.iter().enumerate() {
            assert_eq!(idx, &vec![l]);
            assert_eq!(a.control(l, 0), &[l as f64]);
        }
        let wider = build_clusters(&g, &controls, 1, &g, 2).unwrap();
        assert!((wider.max_radius_eps - 0.5).abs() < 1e-15);
        assert!(build_clusters(&g, &controls, 1, &g, 0).is_err());
    }

    #[test]
    fn clusters_on_a_line() {
        let micro = PointCloud::from_points(&[[0.0], [0.4], [1.0], [-0.3], [5.0]]).unwrap();
        let centers = PointCloud::from_points(&[[0.1]]).unwrap();
        let u = [1.0, 2.0, 3.0, 4.0, 5.0];
        let a = build_clusters(&micro, &u, 1, &centers, 3).unwrap();
        assert_eq!(a.neighbor_indices[0], vec![0, 1, 3]);
        assert_eq!(a.controls[0], vec![1.0, 2.0, 4.0]);
        assert!((a.max_radius_eps - 0.4).abs() < 1e-15);
    }

    #[test]
    fn cluster_preconditions() {
        let micro = PointCloud::from_points(&[[0.0], [1.0]]).unwrap();
        let centers = micro.clone();
        assert!(matches!(
            build_clusters(&micro, &[0.0, 1.0], 1, &centers, 3),
            Err(Error::NotEnoughPoints { .. })
        ));
        assert!(build_clusters(&micro, &[0.0], 1, &centers, 2).is_err());
    }

    #[test]
    fn duplicates_are_found() {
        let c = PointCloud::from_points(&[[0.0, 1.0], [2.0, 1.0], [0.0, 1.0]]).unwrap();
        assert_eq!(c.first_duplicate(), Some((0, 2)));
        assert!(uniform_grid(&square(-2.0, 2.0), 0.1).unwrap().is_pairwise_distinct());
    }

    #[test]
    fn farthest_point_spreads_out() {
        let g = uniform_grid(&square(0.0, 1.0), 0.1).unwrap();
        let c = farthest_point_centers(&g, 4, 0).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(c.point(0), &[0.0, 0.0]);
        assert_eq!(c.point(1), &[1.0, 1.0]);
        let b = square(0.0, 1.0);
        let h4 = fill_distance(&c, &b, 0.01).unwrap();
        let h9 = fill_distance(&farthest_point_centers(&g, 9, 0).unwrap(), &b, 0.01).unwrap();
        assert!(h9 <= h4);
    }

    #[test]
    fn invalid_clouds_rejected() {
        assert!(PointCloud::new(2, vec![0.0, 1.0, 2.0]).is_err());
        assert!(PointCloud::new(1, vec![f64::NAN]).is_err());
        assert!(AxisBox::new(vec![0.0], vec![0.0]).is_err());
    }
}
