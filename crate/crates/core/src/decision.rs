//! Decision regions and decision boundaries assembled from enumerated cells.

use crate::enumerate::RegionCell;
use crate::error::{Error, Result};
use crate::polygon::{ConvexPolygon, LineFn, Point};
use crate::scalar::Scalar;

/// Part of a region cell on which one class has the largest logit.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionCell<T> {
    /// Index of the originating cell in the enumeration.
    pub cell: usize,
    pub label: usize,
    pub polygon: ConvexPolygon<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionMap<T> {
    pub cells: Vec<DecisionCell<T>>,
    /// Segments separating differently labelled pieces.
    pub boundary: Vec<(Point<T>, Point<T>)>,
    /// Cells where two classes tie identically; the lower index wins.
    pub ties: usize,
    pub num_classes: usize,
}

impl<T: Scalar> DecisionMap<T> {
    /// Total area carrying each label.
    pub fn label_areas(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.num_classes];
        for c in &self.cells {
            out[c.label] = out[c.label] + c.polygon.area();
        }
        out
    }

    /// Label at a point, if it lies in some piece.
    pub fn label_at(&self, p: &Point<T>, tol: T) -> Option<usize> {
        self.cells.iter().find(|c| c.polygon.contains(p, tol)).map(|c| c.label)
    }
}

fn logit_line<T: Scalar>(cell: &RegionCell<T>, k: usize, c: usize) -> LineFn<T> {
    let a = &cell.affine.a;
    let b = &cell.affine.b;
    LineFn::new([a[[k, 0]] - a[[c, 0]], a[[k, 1]] - a[[c, 1]]], b[k] - b[c])
}

/// Splits every cell into argmax pieces of its affine logits and collects
/// the boundary segments between different labels.
pub fn decision_regions<T: Scalar>(cells: &[RegionCell<T>]) -> Result<DecisionMap<T>> {
    let Some(first) = cells.first() else {
        return Err(Error::EmptySample);
    };
    let classes = first.affine.out_dim();
    if classes < 2 {
        return Err(Error::InvalidParameter("decision regions need at least two classes".into()));
    }
    let snap = T::snap_tol();
    let mut out = Vec::new();
    let mut boundary = Vec::new();
    let mut ties = 0usize;
    for (idx, cell) in cells.iter().enumerate() {
        let floor = cell.polygon.area() * T::lit(1e-12);
        let mut tied_here = false;
        for c in 0..classes {
            let mut piece = Some(cell.polygon.clone());
            for k in 0..classes {
                if k == c {
                    continue;
                }
                let Some(p) = piece.take() else { break };
                let f = logit_line(cell, k, c);
                if f.grad[0] == T::zero() && f.grad[1] == T::zero() {
                    if f.constant == T::zero() {
                        tied_here = true;
                    }
                    if f.constant > T::zero() || (f.constant == T::zero() && k < c) {
                        continue;
                    }
                    piece = Some(p);
                    continue;
                }
                piece = p.clip(&f, snap);
            }
            let Some(poly) = piece else { continue };
            if poly.area() <= floor {
                continue;
            }
            for (a, b) in poly.edges() {
                if let Some(k) = tie_partner(cell, c, &a, &b) {
                    if c < k {
                        boundary.push((a, b));
                    }
                }
            }
            out.push(DecisionCell {
                cell: idx,
                label: c,
                polygon: poly,
            });
        }
        if tied_here {
            ties += 1;
            log::debug!("identical logits on cell {idx}; lowest class index wins");
        }
    }
    Ok(DecisionMap {
        cells: out,
        boundary,
        ties,
        num_classes: classes,
    })
}

/// Class `k != c` whose logit matches class `c`'s along the whole edge.
fn tie_partner<T: Scalar>(cell: &RegionCell<T>, c: usize, a: &Point<T>, b: &Point<T>) -> Option<usize> {
    let classes = cell.affine.out_dim();
    for k in 0..classes {
        if k == c {
            continue;
        }
        let f = logit_line(cell, k, c);
        if f.grad[0] == T::zero() && f.grad[1] == T::zero() {
            continue;
        }
        let tol = T::lit(1e-8) * (f.grad_norm() * (a[0].abs() + a[1].abs() + b[0].abs() + b[1].abs()) + f.constant.abs() + T::one());
        if f.eval(a).abs() <= tol && f.eval(b).abs() <= tol {
            return Some(k);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpa::{CpaActivation, HiddenBlock, LinearLayer, Mode, Network};
    use crate::enumerate::enumerate_regions;
    use crate::hyperplane::Window;
    use ndarray::{array, Array1, Array2};

    #[test]
    fn linear_two_class_net() {
        // hidden identity on a LeakyReLU(1) net, logits (x, y): boundary x = y
        let net = Network::new(
            vec![HiddenBlock {
                linear: LinearLayer::new(Array2::eye(2), Array1::zeros(2)).unwrap(),
                bn: None,
            }],
            LinearLayer::new(Array2::eye(2), Array1::zeros(2)).unwrap(),
            CpaActivation::<f64>::leaky_relu(1.0),
        )
        .unwrap();
        let w = Window::new(array![0.0, 0.0], 1.0).unwrap();
        let e = enumerate_regions(&net, Mode::NoBn, &w).unwrap();
        let d = decision_regions(&e.cells).unwrap();
        let areas = d.label_areas();
        assert!((areas[0] - 2.0).abs() < 1e-12 && (areas[1] - 2.0).abs() < 1e-12);
        let len: f64 = d
            .boundary
            .iter()
            .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
            .sum();
        assert!((len - 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_logits_single_label() {
        let net = Network::new(
            vec![HiddenBlock {
                linear: LinearLayer::new(Array2::eye(2), Array1::zeros(2)).unwrap(),
                bn: None,
            }],
            LinearLayer::new(Array2::zeros((3, 2)), array![0.5, 0.5, 0.1]).unwrap(),
            CpaActivation::<f64>::relu(),
        )
        .unwrap();
        let w = Window::new(array![0.0, 0.0], 1.0).unwrap();
        let e = enumerate_regions(&net, Mode::NoBn, &w).unwrap();
        let d = decision_regions(&e.cells).unwrap();
        assert!(d.cells.iter().all(|c| c.label == 0));
        assert!(d.boundary.is_empty());
        assert_eq!(d.ties, e.count());
    }
}
