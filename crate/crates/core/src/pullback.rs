//! Transfer of a layer's arrangement through the affine prefix map of a
//! parent region.
//!
//! Inside the parent region `R` of the first `l - 1` hidden layers the
//! prefix map is `x -> A x + d` with `A` of shape `d x 2`. When `A` has full
//! column rank, the image of `R` lies in the 2D affine subspace
//! `S = u_bar + Im(A)`, and layer `l` can be studied either intrinsically in
//! `S` or pulled back to the input plane. Both counts are computed here
//! independently and compared.

use ndarray::{Array1, Array2};

use crate::cpa::{LinearLayer, Mode, Network};
use crate::enumerate::singular_values_2col;
use crate::error::{Error, Result};
use crate::polygon::{ConvexPolygon, LineFn, Point, Split};
use crate::scalar::Scalar;

/// Singular values below this count as rank loss.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullbackConfig {
    /// Side of the membership grid used for the in-region support estimate.
    pub grid: usize,
    /// Minimum fraction of window grid points that must lie in the parent region.
    pub coverage_threshold: f64,
    /// Also match cells across the two domains and report the worst Jaccard overlap.
    pub jaccard: bool,
}

impl Default for PullbackConfig {
    fn default() -> Self {
        Self {
            grid: 64,
            coverage_threshold: 0.95,
            jaccard: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullbackReport {
    /// 1-based hidden layer whose arrangement is transferred.
    pub layer: usize,
    /// Hash of the parent pattern on the first `layer - 1` layers.
    pub parent_id: String,
    pub rank: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Fraction of window grid points inside the parent region.
    pub coverage: f64,
    pub coverage_threshold: f64,
    pub input_count: usize,
    pub intrinsic_count: usize,
    pub counts_equal: bool,
    /// `sqrt(det(A^T A))`: intrinsic areas are input areas times this factor.
    pub jacobian: f64,
    /// Worst overlap among cells matched by layer pattern, when requested.
    pub min_jaccard: Option<f64>,
}

/// Thin QR of a `d x 2` matrix by twice-applied Gram-Schmidt.
fn thin_qr<T: Scalar>(a: &Array2<T>) -> (Array2<T>, [[T; 2]; 2]) {
    let a0 = a.column(0).to_owned();
    let a1 = a.column(1).to_owned();
    let r00 = a0.dot(&a0).sqrt();
    let q0 = &a0 / r00;
    let mut v = a1.clone();
    let mut r01 = T::zero();
    for _ in 0..2 {
        let c = q0.dot(&v);
        r01 = r01 + c;
        v = &v - &(&q0 * c);
    }
    let r11 = v.dot(&v).sqrt();
    let q1 = &v / r11;
    let mut q = Array2::zeros((a.nrows(), 2));
    q.column_mut(0).assign(&q0);
    q.column_mut(1).assign(&q1);
    (q, [[r00, r01], [T::zero(), r11]])
}

/// Half-planes `f <= 0` in input coordinates cutting out the region of
/// the first `depth` layers with the pattern of `x`.
fn parent_constraints<T: Scalar>(
    net: &Network<T>,
    layers: &[LinearLayer<T>],
    pattern: &crate::cpa::ActivationPattern,
    depth: usize,
) -> Vec<LineFn<T>> {
    let act = net.activation();
    let taus = act.breakpoints();
    let mut out = Vec::new();
    let mut map = crate::cpa::AffineMap::identity(2);
    for (l, layer) in layers.iter().enumerate().take(depth) {
        let pre = map.compose_after(layer);
        for j in 0..pre.out_dim() {
            let k = pattern.layers[l][j] as usize;
            let grad = [pre.a[[j, 0]], pre.a[[j, 1]]];
            if grad[0] == T::zero() && grad[1] == T::zero() {
                continue;
            }
            if k > 0 {
                // tau_{k-1} <= z
                out.push(LineFn::new([-grad[0], -grad[1]], taus[k - 1] - pre.b[j]));
            }
            if k < taus.len() {
                // z <= tau_k
                out.push(LineFn::new(grad, pre.b[j] - taus[k]));
            }
        }
        map = pre.gate(act, &pattern.layers[l]);
    }
    out
}

/// Composition of `f` with `s -> origin + m s`.
fn pull_line<T: Scalar>(f: &LineFn<T>, m: [[T; 2]; 2], origin: Point<T>) -> LineFn<T> {
    let g = [
        f.grad[0] * m[0][0] + f.grad[1] * m[1][0],
        f.grad[0] * m[0][1] + f.grad[1] * m[1][1],
    ];
    LineFn::new(g, f.eval(&origin))
}

fn split_all<T: Scalar>(domain: ConvexPolygon<T>, lines: &[LineFn<T>]) -> Vec<ConvexPolygon<T>> {
    let snap = T::snap_tol();
    let mut cells = vec![domain];
    for f in lines {
        let mut next = Vec::with_capacity(cells.len() + 1);
        for c in cells {
            match c.split(f, snap) {
                Split::Both(a, b) => {
                    next.push(a);
                    next.push(b);
                }
                _ => next.push(c),
            }
        }
        cells = next;
    }
    cells
}

fn sign_vector<T: Scalar>(lines: &[LineFn<T>], p: &Point<T>) -> Vec<bool> {
    lines.iter().map(|f| f.eval(p) > T::zero()).collect()
}

/// Counts the layer-`layer` arrangement inside the window `B_inf(g(x), r)`
/// of the parent region's image subspace, both intrinsically and pulled
/// back to the input plane.
pub fn pullback_check<T: Scalar>(
    net: &Network<T>,
    mode: Mode<'_, T>,
    layer: usize,
    anchor: &Array1<T>,
    r: T,
    config: &PullbackConfig,
) -> Result<PullbackReport> {
    if net.input_dim() != 2 || anchor.len() != 2 {
        return Err(Error::DimensionMismatch("pullback checks need 2D inputs".into()));
    }
    if layer == 0 || layer > net.num_hidden() {
        return Err(Error::InvalidParameter(format!(
            "layer must be in 1..={}, got {layer}",
            net.num_hidden()
        )));
    }
    if !(r > T::zero()) {
        return Err(Error::InvalidParameter("radius must be positive".into()));
    }
    let depth = layer - 1;
    let layers = net.effective_layers(mode)?;
    let full = net.activation_pattern(anchor.view(), mode)?;
    let parent = full.prefix(depth);
    let prefix = net.prefix_affine_map(&parent, mode, depth)?;

    let (smax, smin) = singular_values_2col(&prefix.a);
    let rank = [smax, smin].iter().filter(|s| s.as_f64() > RANK_TOL).count();
    if rank < 2 {
        return Err(Error::RankDeficient {
            rank,
            required: 2,
            sigma_min: smin.as_f64(),
        });
    }
    let (q, rm) = thin_qr(&prefix.a);
    let det = rm[0][0] * rm[1][1];
    // s = R (x - x_a)  <=>  x = x_a + R^{-1} s
    let rinv = [
        [T::one() / rm[0][0], -rm[0][1] / det],
        [T::zero(), T::one() / rm[1][1]],
    ];
    let xa = [anchor[0], anchor[1]];
    let u_bar = prefix.apply(anchor.view());

    // window B_inf(u_bar, r) within the image plane, in intrinsic coordinates
    let d = q.nrows();
    let reach = r * T::lit((d as f64).sqrt());
    let mut window = ConvexPolygon::square([T::zero(), T::zero()], reach);
    for i in 0..d {
        let qi = [q[[i, 0]], q[[i, 1]]];
        for sign in [T::one(), -T::one()] {
            let f = LineFn::new([sign * qi[0], sign * qi[1]], -r);
            window = window.clip(&f, T::zero()).ok_or_else(|| {
                Error::NonFinite("intrinsic window collapsed".into())
            })?;
        }
    }

    // support of the parent region on a membership grid, judged by forward passes
    let (lo, hi) = window.bbox();
    let n = config.grid.max(2);
    let mut in_window = 0usize;
    let mut in_both = 0usize;
    for a in 0..n {
        for b in 0..n {
            let s = [
                lo[0] + (hi[0] - lo[0]) * T::lit((a as f64 + 0.5) / n as f64),
                lo[1] + (hi[1] - lo[1]) * T::lit((b as f64 + 0.5) / n as f64),
            ];
            if !window.contains(&s, T::zero()) {
                continue;
            }
            in_window += 1;
            let x = Array1::from(vec![
                xa[0] + rinv[0][0] * s[0] + rinv[0][1] * s[1],
                xa[1] + rinv[1][1] * s[1],
            ]);
            if let Ok(p) = net.activation_pattern_tol(x.view(), mode, T::zero()) {
                if p.prefix(depth) == parent {
                    in_both += 1;
                }
            }
        }
    }
    let coverage = if in_window == 0 { 0.0 } else { in_both as f64 / in_window as f64 };
    if coverage < config.coverage_threshold {
        return Err(Error::WindowNotContained {
            coverage,
            threshold: config.coverage_threshold,
        });
    }

    // clip to the image of the parent region
    let mut domain_s = window;
    for f in parent_constraints(net, &layers, &parent, depth) {
        let g = pull_line(&f, rinv, xa);
        domain_s = domain_s
            .clip(&g, T::zero())
            .ok_or(Error::WindowNotContained { coverage: 0.0, threshold: config.coverage_threshold })?;
    }

    // layer `layer` breakpoint lines, intrinsically: u = u_bar + Q s
    let eff = &layers[depth];
    let wq = eff.weight.dot(&q);
    let zc = eff.apply(u_bar.view());
    // and in the input plane: u = A x + d
    let wa = eff.weight.dot(&prefix.a);
    let zb = eff.apply(prefix.b.view());
    let mut lines_s = Vec::new();
    let mut lines_x = Vec::new();
    for j in 0..eff.out_dim() {
        let gs = [wq[[j, 0]], wq[[j, 1]]];
        let gx = [wa[[j, 0]], wa[[j, 1]]];
        if gs[0] == T::zero() && gs[1] == T::zero() {
            continue;
        }
        for &tau in net.activation().breakpoints() {
            lines_s.push(LineFn::new(gs, zc[j] - tau));
            lines_x.push(LineFn::new(gx, zb[j] - tau));
        }
    }
    let intrinsic = split_all(domain_s.clone(), &lines_s);
    let domain_x = domain_s.map_affine(rinv, xa)?;
    let input = split_all(domain_x, &lines_x);

    let min_jaccard = if config.jaccard {
        let r_fwd = [[rm[0][0], rm[0][1]], [T::zero(), rm[1][1]]];
        let mut worst = 1.0f64;
        for cx in &input {
            let key = sign_vector(&lines_x, &cx.centroid());
            let image = cx.map_affine(r_fwd, [-(rm[0][0] * xa[0] + rm[0][1] * xa[1]), -(rm[1][1] * xa[1])])?;
            let matched = intrinsic.iter().find(|cs| sign_vector(&lines_s, &cs.centroid()) == key);
            let j = match matched {
                Some(cs) => {
                    let inter = image.intersect(cs).map(|p| p.area()).unwrap_or(T::zero());
                    let union = image.area() + cs.area() - inter;
                    (inter / union).as_f64()
                }
                None => 0.0,
            };
            worst = worst.min(j);
        }
        Some(worst)
    } else {
        None
    };

    Ok(PullbackReport {
        layer,
        parent_id: parent.hash_hex(),
        rank,
        sigma_min: smin.as_f64(),
        sigma_max: smax.as_f64(),
        coverage,
        coverage_threshold: config.coverage_threshold,
        input_count: input.len(),
        intrinsic_count: intrinsic.len(),
        counts_equal: input.len() == intrinsic.len(),
        jacobian: (smax * smin).as_f64(),
        min_jaccard,
    })
}

/// Rank and smallest singular value of the prefix map at each sample point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningStats {
    pub sigma_min: Vec<f64>,
    pub ranks: Vec<usize>,
    /// Points skipped because they sit on a switching set.
    pub skipped: usize,
    pub drop_rank_ratio: f64,
}

pub fn parent_region_conditioning<T: Scalar>(
    net: &Network<T>,
    mode: Mode<'_, T>,
    points: &Array2<T>,
    depth: usize,
) -> Result<ConditioningStats> {
    if net.input_dim() != 2 {
        return Err(Error::DimensionMismatch("conditioning statistics need 2D inputs".into()));
    }
    let mut sigma_min = Vec::with_capacity(points.nrows());
    let mut ranks = Vec::with_capacity(points.nrows());
    let mut skipped = 0;
    for x in points.rows() {
        let pattern = match net.activation_pattern(x, mode) {
            Ok(p) => p,
            Err(Error::BreakpointHit { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let map = net.prefix_affine_map(&pattern, mode, depth)?;
        let (smax, smin) = singular_values_2col(&map.a);
        ranks.push([smax, smin].iter().filter(|s| s.as_f64() > RANK_TOL).count());
        sigma_min.push(smin.as_f64());
    }
    let drops = ranks.iter().filter(|&&r| r < 2).count();
    let drop_rank_ratio = if ranks.is_empty() { 0.0 } else { drops as f64 / ranks.len() as f64 };
    Ok(ConditioningStats {
        sigma_min,
        ranks,
        skipped,
        drop_rank_ratio,
    })
}
