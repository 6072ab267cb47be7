//! Closed-form region counts for local hyperplane arrangements, a generator
//! of window-stable test arrangements, and the matching validity check.

use ndarray::{array, Array1, Array2};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::cpa::{CpaActivation, HiddenBlock, LinearLayer, Network};
use crate::error::{Error, Result};
use crate::hyperplane::{Hyperplane, Window};
use crate::polygon::{ConvexPolygon, LineFn, Split};
use crate::scalar::Scalar;

/// `sum_{k=0}^{d} C(m, k)`: regions cut out of a window by `m` lines in
/// general position whose pairwise intersections all lie inside it.
pub fn region_count_simple(m: u64, d: u64) -> BigUint {
    let mut total = BigUint::zero();
    let mut binom = BigUint::one();
    for k in 0..=d.min(m) {
        total += &binom;
        // C(m, k+1) = C(m, k) (m - k) / (k + 1), exact at every step
        binom = binom * BigUint::from(m - k) / BigUint::from(k + 1);
    }
    total
}

/// Sum over subsets `S` of families with `|S| <= d` of `prod_{j in S} m_j`.
///
/// Evaluated through the elementary symmetric polynomials `e_0..e_d`.
pub fn region_count_parallel(m: &[u64], d: u64) -> BigUint {
    let d = d as usize;
    let mut e = vec![BigUint::zero(); d + 1];
    e[0] = BigUint::one();
    for &mj in m {
        let mj = BigUint::from(mj);
        for k in (1..=d).rev() {
            let add = &e[k - 1] * &mj;
            e[k] += add;
        }
    }
    e.into_iter().sum()
}

/// [`region_count_simple`] as a machine integer.
pub fn region_count_simple_u64(m: u64, d: u64) -> Result<u64> {
    region_count_simple(m, d).to_u64().ok_or(Error::CountOverflow)
}

/// [`region_count_parallel`] as a machine integer.
pub fn region_count_parallel_u64(m: &[u64], d: u64) -> Result<u64> {
    region_count_parallel(m, d).to_u64().ok_or(Error::CountOverflow)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArrangementKind {
    /// `m` lines, pairwise transverse.
    Simple(usize),
    /// One family of parallel lines per entry.
    ParallelFamilies(Vec<usize>),
}

impl ArrangementKind {
    pub fn family_sizes(&self) -> Vec<usize> {
        match self {
            ArrangementKind::Simple(m) => vec![1; *m],
            ArrangementKind::ParallelFamilies(v) => v.clone(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ArrangementKind::Simple(_) => "simple",
            ArrangementKind::ParallelFamilies(_) => "parallel",
        }
    }

    /// Closed-form in-window count for a valid planar instance.
    pub fn formula_count(&self) -> BigUint {
        match self {
            ArrangementKind::Simple(m) => region_count_simple(*m as u64, 2),
            ArrangementKind::ParallelFamilies(v) => {
                let m: Vec<u64> = v.iter().map(|&x| x as u64).collect();
                region_count_parallel(&m, 2)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrangementValidityReport {
    pub family_parallel_ok: bool,
    pub distinct_ok: bool,
    pub transverse_ok: bool,
    /// No point of the plane lies on three lines.
    pub no_triple_point: bool,
    /// `r - max |p - x0|_inf` over cross-family intersection points `p`
    /// (and over each line's normalized offset when there are none).
    pub eta: f64,
    pub overall_valid: bool,
}

fn unit_cross(a: &Hyperplane<f64>, b: &Hyperplane<f64>) -> f64 {
    let (u, v) = (&a.normal, &b.normal);
    (u[0] * v[1] - u[1] * v[0]) / (a.l2_norm() * b.l2_norm())
}

fn intersection(a: &Hyperplane<f64>, b: &Hyperplane<f64>) -> [f64; 2] {
    let (u, v) = (&a.normal, &b.normal);
    let det = u[0] * v[1] - u[1] * v[0];
    [(a.offset * v[1] - b.offset * u[1]) / det, (u[0] * b.offset - v[0] * a.offset) / det]
}

/// Checks the window-stability conditions on a planar arrangement grouped
/// into families of (intended) parallel lines.
pub fn check_validity<T: Scalar>(families: &[Vec<Hyperplane<T>>], window: &Window<T>, tol: f64) -> ArrangementValidityReport {
    let fams: Vec<Vec<Hyperplane<f64>>> = families
        .iter()
        .map(|f| {
            f.iter()
                .map(|h| Hyperplane {
                    normal: h.normal.mapv(|x| x.as_f64()),
                    offset: h.offset.as_f64(),
                })
                .collect()
        })
        .collect();
    let x0 = [window.center[0].as_f64(), window.center[1].as_f64()];
    let r = window.radius.as_f64();

    let mut family_parallel_ok = true;
    let mut distinct_ok = true;
    for fam in &fams {
        for i in 0..fam.len() {
            for k in i + 1..fam.len() {
                let (a, b) = (&fam[i], &fam[k]);
                if unit_cross(a, b).abs() > tol {
                    family_parallel_ok = false;
                    continue;
                }
                let sign = if a.normal.dot(&b.normal) >= 0.0 { 1.0 } else { -1.0 };
                if (a.offset / a.l2_norm() - sign * b.offset / b.l2_norm()).abs() <= tol {
                    distinct_ok = false;
                }
            }
        }
    }

    let lines: Vec<(usize, &Hyperplane<f64>)> = fams
        .iter()
        .enumerate()
        .flat_map(|(f, fam)| fam.iter().map(move |h| (f, h)))
        .collect();
    let mut transverse_ok = true;
    let mut no_triple_point = true;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..lines.len() {
        for k in i + 1..lines.len() {
            let ((fi, a), (fk, b)) = (lines[i], lines[k]);
            if fi == fk {
                continue;
            }
            if unit_cross(a, b).abs() <= tol {
                transverse_ok = false;
                continue;
            }
            let p = intersection(a, b);
            worst = worst.max((p[0] - x0[0]).abs().max((p[1] - x0[1]).abs()));
            for (n, &(_, c)) in lines.iter().enumerate() {
                if n == i || n == k {
                    continue;
                }
                let resid = (c.normal[0] * p[0] + c.normal[1] * p[1] - c.offset).abs() / c.l2_norm();
                if resid < tol {
                    no_triple_point = false;
                }
            }
        }
    }
    for (_, h) in &lines {
        // normalized offset from the center; a line misses the open window when it is >= r
        let delta = (h.offset - h.normal[0] * x0[0] - h.normal[1] * x0[1]).abs() / h.l1_norm();
        worst = worst.max(delta);
    }
    let eta = if lines.is_empty() { r } else { r - worst };
    let overall_valid = family_parallel_ok && distinct_ok && transverse_ok && no_triple_point && eta > 0.0;
    ArrangementValidityReport {
        family_parallel_ok,
        distinct_ok,
        transverse_ok,
        no_triple_point,
        eta,
        overall_valid,
    }
}

/// A generated arrangement with its validity report.
#[derive(Debug, Clone)]
pub struct GeneratedArrangement {
    pub kind: ArrangementKind,
    pub families: Vec<Vec<Hyperplane<f64>>>,
    pub window: Window<f64>,
    pub report: ArrangementValidityReport,
}

impl GeneratedArrangement {
    pub fn lines(&self) -> impl Iterator<Item = &Hyperplane<f64>> {
        self.families.iter().flatten()
    }
}

pub const VALIDITY_TOL: f64 = 1e-9;

/// Rejection-samples a planar arrangement of the given kind that passes
/// [`check_validity`] with margin `eta > min_eta_frac * r`.
///
/// Family directions are stratified over the half circle and offsets are
/// kept small relative to `r`, so nearly every draw is accepted.
pub fn generate_valid_arrangement<R: Rng>(
    kind: &ArrangementKind,
    window: &Window<f64>,
    min_eta_frac: f64,
    rng: &mut R,
) -> Result<GeneratedArrangement> {
    if window.dim() != 2 {
        return Err(Error::DimensionMismatch("arrangements are generated in 2D".into()));
    }
    let sizes = kind.family_sizes();
    if sizes.contains(&0) {
        return Err(Error::InvalidParameter("empty family".into()));
    }
    const ATTEMPTS: usize = 1000;
    let n = sizes.len();
    let r = window.radius;
    for _ in 0..ATTEMPTS {
        let phase: f64 = rng.random::<f64>() * std::f64::consts::PI;
        let mut families = Vec::with_capacity(n);
        for (f, &size) in sizes.iter().enumerate() {
            let theta = phase + (f as f64 + rng.random_range(0.25..0.75)) * std::f64::consts::PI / n as f64;
            let dir = [theta.cos(), theta.sin()];
            let spread = 0.3 * r / (1.0 + n as f64);
            let mut offsets: Vec<f64> = (0..size).map(|_| rng.random_range(-spread..spread)).collect();
            offsets.sort_by(f64::total_cmp);
            if offsets.windows(2).any(|w| w[1] - w[0] < 1e-3 * r) {
                offsets.clear();
            }
            let fam: Vec<Hyperplane<f64>> = offsets
                .iter()
                .map(|&s| {
                    // random positive scale so normalization is exercised
                    let scale = rng.random_range(0.5..2.0);
                    let normal = array![dir[0] * scale, dir[1] * scale];
                    let offset = scale * (dir[0] * window.center[0] + dir[1] * window.center[1] + s);
                    Hyperplane { normal, offset }
                })
                .collect();
            families.push(fam);
        }
        if families.iter().zip(&sizes).any(|(f, &s)| f.len() != s) {
            continue;
        }
        let report = check_validity(&families, window, VALIDITY_TOL);
        if report.overall_valid && report.eta > min_eta_frac * r {
            return Ok(GeneratedArrangement {
                kind: kind.clone(),
                families,
                window: window.clone(),
                report,
            });
        }
    }
    Err(Error::GenerationFailed(ATTEMPTS))
}

/// Number of cells the lines cut out of the open window, by successive
/// polygon splitting. Lines that only touch the boundary do not split.
pub fn enumerate_arrangement(lines: &[Hyperplane<f64>], window: &Window<f64>) -> usize {
    let mut cells = vec![ConvexPolygon::square([window.center[0], window.center[1]], window.radius)];
    for h in lines {
        let f = LineFn::new([h.normal[0], h.normal[1]], -h.offset);
        let mut next = Vec::with_capacity(cells.len() * 2);
        for c in cells {
            match c.split(&f, f64::snap_tol()) {
                Split::Both(a, b) => {
                    next.push(a);
                    next.push(b);
                }
                _ => next.push(c),
            }
        }
        cells = next;
    }
    cells.len()
}

/// One-hidden-layer ReLU network with one neuron per line, whose switching
/// set inside the window is exactly the arrangement.
pub fn arrangement_network(lines: &[Hyperplane<f64>]) -> Result<Network<f64>> {
    if lines.is_empty() {
        return Err(Error::InvalidParameter("arrangement has no lines".into()));
    }
    let m = lines.len();
    let mut w = Array2::zeros((m, 2));
    let mut b = Array1::zeros(m);
    for (i, h) in lines.iter().enumerate() {
        w[[i, 0]] = h.normal[0];
        w[[i, 1]] = h.normal[1];
        b[i] = -h.offset;
    }
    let hidden = LinearLayer::new(w, b)?;
    let out = LinearLayer::new(Array2::ones((1, m)), Array1::zeros(1))?;
    Network::new(vec![HiddenBlock { linear: hidden, bn: None }], out, CpaActivation::relu())
}
