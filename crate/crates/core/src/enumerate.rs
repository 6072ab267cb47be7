//! Exact enumeration of the affine regions of a CPA network inside a 2D
//! window, either in input space or on an affine 2D slice of it.
//!
//! Cells are refined breadth-first, one hidden layer at a time. Every cell
//! carries the affine map from slice coordinates to the current hidden
//! representation; each neuron's pre-activation is therefore affine on the
//! cell and its breakpoint level sets are straight lines there.

use std::collections::HashSet;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::cpa::{ActivationPattern, AffineMap, LinearLayer, Mode, Network};
use crate::error::{Error, Result};
use crate::hyperplane::Window;
use crate::polygon::{ConvexPolygon, LineFn, Point, Split};
use crate::scalar::Scalar;

/// Affine embedding `t -> P t + o` of the plane into input space.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceMap<T> {
    /// `D0 x 2`, full column rank.
    pub basis: Array2<T>,
    pub origin: Array1<T>,
}

impl<T: Scalar> SliceMap<T> {
    pub fn new(basis: Array2<T>, origin: Array1<T>) -> Result<Self> {
        if basis.ncols() != 2 || basis.nrows() != origin.len() {
            return Err(Error::DimensionMismatch(format!(
                "slice basis is {}x{}, origin has {} entries",
                basis.nrows(),
                basis.ncols(),
                origin.len()
            )));
        }
        let (_, smin) = singular_values_2col(&basis);
        if !(smin > T::zero()) {
            return Err(Error::RankDeficient {
                rank: if basis.iter().any(|v| *v != T::zero()) { 1 } else { 0 },
                required: 2,
                sigma_min: smin.as_f64(),
            });
        }
        Ok(Self { basis, origin })
    }

    /// The identity slice of the plane.
    pub fn identity() -> Self {
        Self {
            basis: Array2::eye(2),
            origin: Array1::zeros(2),
        }
    }

    /// Plane through `origin` spanned by two random orthonormal directions
    /// (Gram-Schmidt on Gaussian-like draws). This is a convenience
    /// convention for choosing slices, not a canonical construction.
    pub fn random_orthonormal<R: Rng>(origin: Array1<T>, rng: &mut R) -> Self {
        let d = origin.len();
        assert!(d >= 2, "slice needs ambient dimension >= 2");
        loop {
            let mut draw = || -> Array1<T> {
                Array1::from_shape_fn(d, |_| {
                    // sum of uniforms is close enough to isotropic for a direction
                    let s: f64 = (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0;
                    T::lit(s)
                })
            };
            let a = draw();
            let b = draw();
            let na = a.dot(&a).sqrt();
            if na < T::lit(1e-6) {
                continue;
            }
            let a = a / na;
            let b = &b - &(&a * a.dot(&b));
            let nb = b.dot(&b).sqrt();
            if nb < T::lit(1e-6) {
                continue;
            }
            let b = b / nb;
            let mut basis = Array2::zeros((d, 2));
            basis.column_mut(0).assign(&a);
            basis.column_mut(1).assign(&b);
            return Self { basis, origin };
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.origin.len()
    }

    pub fn apply(&self, t: &Point<T>) -> Array1<T> {
        let mut x = self.origin.clone();
        for i in 0..x.len() {
            x[i] = x[i] + self.basis[[i, 0]] * t[0] + self.basis[[i, 1]] * t[1];
        }
        x
    }

    fn as_affine(&self) -> AffineMap<T> {
        AffineMap {
            a: self.basis.clone(),
            b: self.origin.clone(),
        }
    }
}

/// Largest and smallest singular values of a matrix with two columns.
pub fn singular_values_2col<T: Scalar>(a: &Array2<T>) -> (T, T) {
    let c0 = a.column(0);
    let c1 = a.column(1);
    let g00 = c0.dot(&c0);
    let g11 = c1.dot(&c1);
    let g01 = c0.dot(&c1);
    let tr = g00 + g11;
    let det = (g00 * g11 - g01 * g01).max(T::zero());
    let disc = ((g00 - g11) * (g00 - g11) + T::lit(4.0) * g01 * g01).sqrt();
    let lmax = (tr + disc) / T::lit(2.0);
    // det / lmax avoids cancellation in (tr - disc) / 2
    let lmin = if lmax > T::zero() { det / lmax } else { T::zero() };
    (lmax.sqrt(), lmin.max(T::zero()).sqrt())
}

/// Geometric tolerances of the subdivision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerationConfig<T> {
    /// Vertices within this signed distance of a splitting line lie on it.
    pub snap: T,
    /// Pieces smaller than this fraction of the window area are not split off.
    pub area_floor_rel: T,
    /// Process the pending cells of a layer with rayon.
    pub parallel: bool,
}

impl<T: Scalar> Default for EnumerationConfig<T> {
    fn default() -> Self {
        Self {
            snap: T::snap_tol(),
            area_floor_rel: T::lit(1e-14),
            parallel: true,
        }
    }
}

/// One affine region of the network restricted to the window.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionCell<T> {
    /// Polygon in slice coordinates.
    pub polygon: ConvexPolygon<T>,
    pub pattern: ActivationPattern,
    /// Network output as an affine function of slice coordinates.
    pub affine: AffineMap<T>,
    /// Some neuron was constant on the cell and equal to a breakpoint.
    pub on_boundary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration<T> {
    pub cells: Vec<RegionCell<T>>,
    pub window: ConvexPolygon<T>,
    pub slice: SliceMap<T>,
    /// Splits suppressed because a piece fell below the area floor.
    pub sliver_merges: usize,
}

impl<T: Scalar> Enumeration<T> {
    pub fn count(&self) -> usize {
        self.cells.len()
    }
}

struct WorkCell<T> {
    polygon: ConvexPolygon<T>,
    pattern: Vec<Vec<u16>>,
    /// Slice coordinates to the current representation.
    map: AffineMap<T>,
    on_boundary: bool,
}

/// Regions of `net` inside a window of its 2D input space.
pub fn enumerate_regions<T: Scalar>(net: &Network<T>, mode: Mode<'_, T>, window: &Window<T>) -> Result<Enumeration<T>> {
    if net.input_dim() != 2 || window.dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "input-space enumeration needs a 2D network and window (got {} and {})",
            net.input_dim(),
            window.dim()
        )));
    }
    enumerate_on_slice(net, mode, &SliceMap::identity(), window)
}

/// Regions of `t -> net(P t + o)` inside a window in slice coordinates.
pub fn enumerate_on_slice<T: Scalar>(
    net: &Network<T>,
    mode: Mode<'_, T>,
    slice: &SliceMap<T>,
    window: &Window<T>,
) -> Result<Enumeration<T>> {
    if window.dim() != 2 {
        return Err(Error::DimensionMismatch("slice window must be 2D".into()));
    }
    let poly = ConvexPolygon::square([window.center[0], window.center[1]], window.radius);
    enumerate_polygon(net, mode, slice, &poly, &EnumerationConfig::default())
}

/// Regions of the network restricted to an arbitrary convex polygon in slice coordinates.
pub fn enumerate_polygon<T: Scalar>(
    net: &Network<T>,
    mode: Mode<'_, T>,
    slice: &SliceMap<T>,
    polygon: &ConvexPolygon<T>,
    config: &EnumerationConfig<T>,
) -> Result<Enumeration<T>> {
    if slice.ambient_dim() != net.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "slice maps into dimension {}, network input is {}",
            slice.ambient_dim(),
            net.input_dim()
        )));
    }
    let layers = net.effective_layers(mode)?;
    let floor = config.area_floor_rel * polygon.area();
    let mut cells = vec![WorkCell {
        polygon: polygon.clone(),
        pattern: Vec::new(),
        map: slice.as_affine(),
        on_boundary: false,
    }];
    let mut merges = 0usize;
    for layer in &layers {
        let step = |cell: WorkCell<T>| refine_cell(cell, layer, net, config.snap, floor);
        let refined: Vec<(Vec<WorkCell<T>>, usize)> = if config.parallel {
            cells.into_par_iter().map(step).collect()
        } else {
            cells.into_iter().map(step).collect()
        };
        cells = Vec::with_capacity(refined.iter().map(|(c, _)| c.len()).sum());
        for (sub, m) in refined {
            merges += m;
            cells.extend(sub);
        }
    }
    let out_layer = net.output();
    let mut result: Vec<RegionCell<T>> = cells
        .into_iter()
        .map(|c| RegionCell {
            affine: c.map.compose_after(out_layer),
            polygon: c.polygon,
            pattern: ActivationPattern { layers: c.pattern },
            on_boundary: c.on_boundary,
        })
        .collect();
    sort_cells(&mut result);
    Ok(Enumeration {
        cells: result,
        window: polygon.clone(),
        slice: slice.clone(),
        sliver_merges: merges,
    })
}

fn sort_cells<T: Scalar>(cells: &mut [RegionCell<T>]) {
    cells.sort_by(|a, b| {
        let (pa, pb) = (a.polygon.min_vertex(), b.polygon.min_vertex());
        pa[0].as_f64()
            .total_cmp(&pb[0].as_f64())
            .then(pa[1].as_f64().total_cmp(&pb[1].as_f64()))
            .then_with(|| a.pattern.cmp(&b.pattern))
    });
}

/// Splits one cell by every breakpoint line of `layer` and advances its
/// affine map through the activation.
fn refine_cell<T: Scalar>(
    cell: WorkCell<T>,
    layer: &LinearLayer<T>,
    net: &Network<T>,
    snap: T,
    floor: T,
) -> (Vec<WorkCell<T>>, usize) {
    let act = net.activation();
    let pre = cell.map.compose_after(layer);
    let width = layer.out_dim();
    let mut pieces = vec![cell.polygon];
    let mut merges = 0usize;
    let mut on_boundary = cell.on_boundary;
    for j in 0..width {
        let grad = [pre.a[[j, 0]], pre.a[[j, 1]]];
        let zero_grad = grad[0] == T::zero() && grad[1] == T::zero();
        for &tau in act.breakpoints() {
            if zero_grad {
                if (pre.b[j] - tau).abs() <= T::breakpoint_tol() {
                    on_boundary = true;
                }
                continue;
            }
            let line = LineFn::new(grad, pre.b[j] - tau);
            let mut next = Vec::with_capacity(pieces.len() + 1);
            for p in pieces {
                match p.split(&line, snap) {
                    Split::Both(a, b) => {
                        if a.area() < floor || b.area() < floor {
                            merges += 1;
                            next.push(p);
                        } else {
                            next.push(a);
                            next.push(b);
                        }
                    }
                    _ => next.push(p),
                }
            }
            pieces = next;
        }
    }
    let out = pieces
        .into_iter()
        .map(|polygon| {
            let c = polygon.centroid();
            let pieces_here: Vec<u16> = (0..width)
                .map(|j| {
                    let z = pre.a[[j, 0]] * c[0] + pre.a[[j, 1]] * c[1] + pre.b[j];
                    act.piece_of(z) as u16
                })
                .collect();
            let map = pre.gate(act, &pieces_here);
            let mut pattern = cell.pattern.clone();
            pattern.push(pieces_here);
            WorkCell {
                polygon,
                pattern,
                map,
                on_boundary,
            }
        })
        .collect();
    (out, merges)
}

/// Region count divided by the window volume `(2r)^dim`.
pub fn local_region_density(count: usize, r: f64, dim: u32) -> f64 {
    count as f64 / (2.0 * r).powi(dim as i32)
}

/// Counts and densities along a radius grid, per center.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub radii: Vec<f64>,
    /// `counts[c][i]` for center `c` and radius `radii[i]`.
    pub counts: Vec<Vec<usize>>,
    pub densities: Vec<Vec<f64>>,
    /// Weighted average of the per-center densities, when weights are given.
    pub aggregate: Option<Vec<f64>>,
}

pub fn density_profile<T: Scalar>(
    net: &Network<T>,
    mode: Mode<'_, T>,
    centers: &[Array1<T>],
    radii: &[T],
    weights: Option<&[f64]>,
) -> Result<DensityProfile> {
    if radii.is_empty() || radii.iter().any(|&r| !(r > T::zero())) {
        return Err(Error::InvalidParameter("radii must be positive".into()));
    }
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("radii must be strictly increasing".into()));
    }
    if let Some(w) = weights {
        if w.len() != centers.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} centers",
                w.len(),
                centers.len()
            )));
        }
        let total: f64 = w.iter().sum();
        if w.iter().any(|&x| x < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("weights must be nonnegative and sum to 1".into()));
        }
    }
    let mut counts = Vec::with_capacity(centers.len());
    let mut densities = Vec::with_capacity(centers.len());
    for c in centers {
        let mut row = Vec::with_capacity(radii.len());
        let mut drow = Vec::with_capacity(radii.len());
        for &r in radii {
            let window = Window::new(c.clone(), r)?;
            let n = enumerate_regions(net, mode, &window)?.count();
            row.push(n);
            drow.push(local_region_density(n, r.as_f64(), 2));
        }
        counts.push(row);
        densities.push(drow);
    }
    let aggregate = weights.map(|w| {
        (0..radii.len())
            .map(|i| w.iter().zip(&densities).map(|(wc, d)| wc * d[i]).sum())
            .collect()
    });
    Ok(DensityProfile {
        radii: radii.iter().map(|r| r.as_f64()).collect(),
        counts,
        densities,
        aggregate,
    })
}

/// Outcome of the per-run consistency checks on an enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheck {
    /// `|sum of cell areas - window area| / window area`.
    pub area_rel_error: f64,
    /// Cells where some sampled interior point had a different pattern.
    pub impure_cells: usize,
    /// Largest `|affine(t) - forward(P t + o)|_inf / (1 + |forward|_inf)`.
    pub max_affine_error: f64,
    /// Patterns occurring in more than one cell.
    pub duplicate_patterns: usize,
    pub samples_per_cell: usize,
}

impl SelfCheck {
    pub fn passes(&self, area_tol: f64, affine_tol: f64) -> bool {
        self.area_rel_error <= area_tol
            && self.impure_cells == 0
            && self.max_affine_error <= affine_tol
            && self.duplicate_patterns == 0
    }
}

/// Area conservation, pattern purity at `samples` random interior points
/// per cell, and agreement of each cell's affine map with the forward pass.
pub fn self_check<T: Scalar>(
    net: &Network<T>,
    mode: Mode<'_, T>,
    enumeration: &Enumeration<T>,
    samples: usize,
    seed: u64,
) -> Result<SelfCheck> {
    let window_area = enumeration.window.area();
    let total: T = enumeration.cells.iter().map(|c| c.polygon.area()).sum();
    let area_rel_error = ((total - window_area) / window_area).abs().as_f64();

    let per_cell: Vec<Result<(bool, f64)>> = enumeration
        .cells
        .par_iter()
        .enumerate()
        .map(|(i, cell)| {
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let nv = cell.polygon.len();
            let mut pure = true;
            let mut worst = 0.0f64;
            for s in 0..samples {
                let t = if s == 0 {
                    cell.polygon.centroid()
                } else {
                    let w: Vec<T> = (0..nv).map(|_| T::lit(rng.random::<f64>() + 1e-3)).collect();
                    cell.polygon.interior_point(&w, T::lit(0.5))
                };
                let x = enumeration.slice.apply(&t);
                let (y, _) = net.forward(x.view(), mode)?;
                let pattern = net.activation_pattern_tol(x.view(), mode, T::zero());
                match pattern {
                    Ok(p) if p == cell.pattern => {}
                    _ => pure = false,
                }
                let ta = Array1::from(vec![t[0], t[1]]);
                let ya = cell.affine.apply(ta.view());
                let scale = T::one() + y.iter().fold(T::zero(), |m, v| m.max(v.abs()));
                let err = (&ya - &y).iter().fold(T::zero(), |m, v| m.max(v.abs())) / scale;
                worst = worst.max(err.as_f64());
            }
            Ok((pure, worst))
        })
        .collect();
    let mut impure = 0;
    let mut max_affine_error = 0.0f64;
    for r in per_cell {
        let (pure, err) = r?;
        if !pure {
            impure += 1;
        }
        max_affine_error = max_affine_error.max(err);
    }
    let mut seen = HashSet::with_capacity(enumeration.cells.len());
    let duplicate_patterns = enumeration
        .cells
        .iter()
        .filter(|c| !seen.insert(&c.pattern))
        .count();
    Ok(SelfCheck {
        area_rel_error,
        impure_cells: impure,
        max_affine_error,
        duplicate_patterns,
        samples_per_cell: samples,
    })
}

/// Input-space point of a slice coordinate, as a row of a batch.
pub fn slice_points<T: Scalar>(slice: &SliceMap<T>, pts: &[Point<T>]) -> Array2<T> {
    let mut out = Array2::zeros((pts.len(), slice.ambient_dim()));
    for (mut row, p) in out.axis_iter_mut(Axis(0)).zip(pts) {
        row.assign(&slice.apply(p));
    }
    out
}

/// Label of `x` as the argmax of the logits, lowest index on ties.
pub fn argmax<T: Scalar>(logits: ArrayView1<T>) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best
}
