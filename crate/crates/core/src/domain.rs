use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{LabError, Result};
use crate::geometry::{Point, PolyPos, Polyline, Tolerance};
use crate::spatial::{Nearest, SegmentIndex};
use crate::winding::WindingTree;

/// Where a domain came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Repeller { name: String, generation: usize },
    Atlas { description: String },
    Reflected(Box<Provenance>),
    Custom(String),
}

/// Bounded Jordan domain: a closed simple counterclockwise polyline and an
/// interior basepoint, with spatial and winding indices.
#[derive(Clone, Debug)]
pub struct JordanDomain {
    boundary: Polyline,
    basepoint: Point,
    provenance: Provenance,
    index: SegmentIndex,
    winding: WindingTree,
    tol: Tolerance,
    eps: f64,
    reoriented: bool,
}

impl JordanDomain {
    /// Validates simplicity and containment; clockwise input is reversed.
    pub fn new(boundary: Polyline, basepoint: Point, provenance: Provenance) -> Result<Self> {
        Self::with_tolerance(boundary, basepoint, provenance, Tolerance::default(), true)
    }

    /// As [`JordanDomain::new`], optionally skipping the simplicity check for
    /// curves that are simple by construction.
    pub fn with_tolerance(
        boundary: Polyline,
        basepoint: Point,
        provenance: Provenance,
        tol: Tolerance,
        check_simple: bool,
    ) -> Result<Self> {
        if !boundary.is_closed() {
            return Err(LabError::InvalidPolyline("domain boundary must be closed".into()));
        }
        let eps = boundary.eps_geom(tol);
        let reoriented = boundary.signed_area() < 0.0;
        let boundary = if reoriented { boundary.reversed() } else { boundary };
        if check_simple {
            if let Some((i, j)) = boundary.find_self_intersection(eps) {
                return Err(LabError::NotSimple { first: i, second: j });
            }
        }
        let index = SegmentIndex::build(&boundary);
        let winding = WindingTree::build(&boundary);
        let d = index.nearest(basepoint, None).dist;
        if d <= eps || winding.total(&boundary, basepoint) < PI {
            return Err(LabError::BasepointOutside);
        }
        Ok(JordanDomain {
            boundary,
            basepoint,
            provenance,
            index,
            winding,
            tol,
            eps,
            reoriented,
        })
    }

    pub fn boundary(&self) -> &Polyline {
        &self.boundary
    }

    pub fn basepoint(&self) -> Point {
        self.basepoint
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn index(&self) -> &SegmentIndex {
        &self.index
    }

    pub fn winding(&self) -> &WindingTree {
        &self.winding
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tol
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// True if the input vertex order was reversed to make it counterclockwise.
    pub fn reoriented(&self) -> bool {
        self.reoriented
    }

    pub fn segment_count(&self) -> usize {
        self.boundary.segment_count()
    }

    pub fn nearest(&self, z: Point) -> Nearest {
        self.index.nearest(z, None)
    }

    pub fn dist_to_boundary(&self, z: Point) -> f64 {
        self.index.nearest(z, None).dist
    }

    /// Inside test in O(log n). Near-boundary points give `Boundary`.
    pub fn contains(&self, z: Point) -> Result<bool> {
        if self.dist_to_boundary(z) <= self.eps {
            return Err(LabError::Boundary);
        }
        Ok(self.winding.total(&self.boundary, z) > PI)
    }

    pub fn point_at(&self, pos: PolyPos) -> Point {
        self.boundary.point_at(pos)
    }

    pub fn diameter(&self) -> f64 {
        self.boundary.diameter()
    }

    /// Complex conjugate domain, reoriented counterclockwise. Segment `k` of
    /// the result is the mirror of segment `(n - 2 - k) mod n` of `self`.
    pub fn reflect(&self) -> JordanDomain {
        let b = self.boundary.conj().reversed();
        let index = SegmentIndex::build(&b);
        let winding = WindingTree::build(&b);
        JordanDomain {
            boundary: b,
            basepoint: self.basepoint.conj(),
            provenance: match &self.provenance {
                Provenance::Reflected(inner) => (**inner).clone(),
                p => Provenance::Reflected(Box::new(p.clone())),
            },
            index,
            winding,
            tol: self.tol,
            eps: self.eps,
            reoriented: false,
        }
    }

    /// Segment of the reflected domain corresponding to segment `k` here.
    pub fn reflected_segment(&self, k: usize) -> usize {
        let n = self.segment_count();
        (2 * n - 2 - k) % n
    }
}
