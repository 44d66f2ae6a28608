//! Assembly of candidate foliations at a fixed radius `ε`.
//!
//! A picture is an ordered sequence of nodes along the line: angles at
//! attracting roots of `f'''`, chordal domains born at repelling roots
//! (optionally crowned by a trolleybus or birdie), and multicups with fixed
//! contact arcs. Between and outside the nodes run tangent bands. Solving a
//! picture determines every free parameter (angle positions, crown chord
//! lengths, free arc ends) from force balances, and produces an ordered
//! list of regions that tile the parabolic strip and can be evaluated
//! pointwise.

use crate::boundary::{BoundaryError, BoundaryFunction, RootKind, RootLoc};
use crate::candidates::{
    angle_coeffs, band_value, in_strip, linear_value, seed_left, seed_right, tangent_u_left,
    tangent_u_right, Slope, SlopeError,
};
use crate::chords::{chord_coeffs, differentials, ChordError, ChordSeed, ChordalDomain};
use crate::forces::{Force, ForceError, ForceSource, Side};
use crate::numerics::{brent_root, scan_first_sign_change};
use serde::{Deserialize, Serialize};

/// Errors from picture solving and evaluation.
#[derive(Debug, Clone, thiserror::Error)]
pub enum FoliationError {
    #[error("boundary: {0}")]
    Boundary(#[from] BoundaryError),
    #[error("chordal domain: {0}")]
    Chord(#[from] ChordError),
    #[error("force: {0}")]
    Force(#[from] ForceError),
    #[error("slope: {0}")]
    Slope(#[from] SlopeError),
    #[error("node {node}: no angle balance root in [{lo}, {hi}]")]
    NoBalance { node: usize, lo: f64, hi: f64 },
    #[error("node {node}: crown equation has no root in (0, {l_max}]")]
    CrownUnsolved { node: usize, l_max: f64 },
    #[error("point ({x1}, {x2}) not covered by any region")]
    NotCovered { x1: f64, x2: f64 },
    #[error("unsupported configuration: {0}")]
    UnknownConfiguration(String),
    #[error("incompatible node interfaces at gap {gap}: {detail}")]
    BadSequence { gap: usize, detail: String },
}

/// Crown of a chordal or multicup node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Crown {
    /// Top chord of full length `2ε`; both bands outgoing.
    Full,
    /// Incoming right band at the left end of the top chord.
    TrolleybusR,
    /// Incoming left band at the right end of the top chord.
    TrolleybusL,
    /// Incoming bands on both sides.
    Birdie,
}

/// Combinatorial node of a picture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum NodeKind {
    /// Linearity domain with a single parabola contact; `hint` seeds the
    /// balance search.
    Angle { hint: f64 },
    /// Chordal domain born at the point root `c`.
    Cup { c: f64 },
    /// Multicup with contact arcs `(lo, hi)` (rays allowed via ±∞);
    /// `closed` switches to growth above the convex hull of the arcs.
    Arcs { arcs: Vec<(f64, f64)>, closed: bool },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Node {
    pub kind: NodeKind,
    pub crown: Crown,
}

impl Node {
    pub fn angle(hint: f64) -> Self {
        Node { kind: NodeKind::Angle { hint }, crown: Crown::Full }
    }
    pub fn cup(c: f64) -> Self {
        Node { kind: NodeKind::Cup { c }, crown: Crown::Full }
    }
    pub fn arcs(arcs: Vec<(f64, f64)>, closed: bool) -> Self {
        Node { kind: NodeKind::Arcs { arcs, closed }, crown: Crown::Full }
    }

    /// Representative abscissa for ordering.
    pub fn position_hint(&self) -> f64 {
        match &self.kind {
            NodeKind::Angle { hint } => *hint,
            NodeKind::Cup { c } => *c,
            NodeKind::Arcs { arcs, .. } => {
                let lo = arcs.first().map(|a| a.0).unwrap_or(0.0);
                let hi = arcs.last().map(|a| a.1).unwrap_or(0.0);
                RootLoc { lo, hi }.anchor()
            }
        }
    }
}

/// A picture: ordered nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Picture {
    pub nodes: Vec<Node>,
}

/// Interface of a node toward one side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IFace {
    EmitR,
    EmitL,
    SinkR,
    SinkL,
    /// No interface (a ray arc swallows the whole side).
    Ray,
}

pub(crate) fn interfaces(node: &Node) -> (IFace, IFace) {
    let ray_left = matches!(&node.kind, NodeKind::Arcs { arcs, .. }
        if arcs.first().map(|a| a.0 == f64::NEG_INFINITY).unwrap_or(false));
    let ray_right = matches!(&node.kind, NodeKind::Arcs { arcs, .. }
        if arcs.last().map(|a| a.1 == f64::INFINITY).unwrap_or(false));
    let base = match (&node.kind, node.crown) {
        (NodeKind::Angle { .. }, _) => (IFace::SinkR, IFace::SinkL),
        (_, Crown::Full) => (IFace::EmitL, IFace::EmitR),
        (_, Crown::TrolleybusR) => (IFace::SinkR, IFace::EmitR),
        (_, Crown::TrolleybusL) => (IFace::EmitL, IFace::SinkL),
        (_, Crown::Birdie) => (IFace::SinkR, IFace::SinkL),
    };
    (
        if ray_left { IFace::Ray } else { base.0 },
        if ray_right { IFace::Ray } else { base.1 },
    )
}

/// Solved data of a node.
#[derive(Debug, Clone)]
pub enum SolvedNode {
    Angle {
        w: f64,
        m_r: f64,
        m_l: f64,
        coeffs: (f64, f64, f64),
    },
    Chordal {
        dom: ChordalDomain,
        a_top: f64,
        b_top: f64,
        l_top: f64,
        /// Linearity coefficients above the top chord (crowned nodes).
        crown_coeffs: Option<(f64, f64, f64)>,
        /// Birdie: the two independently solved base lengths `(l_r, l_l)`
        /// from the left-incoming and right-incoming equations.
        birdie_ls: Option<(f64, f64)>,
        /// Closed multicup: frozen structure below the hull chord.
        under: Option<Under>,
    },
    Multicup {
        /// Arcs with solved outer ends.
        arcs: Vec<(f64, f64)>,
        gaps: Vec<GapDomain>,
        slope2: f64,
        coeffs: (f64, f64, f64),
    },
}

/// Structure of a closed multicup below its hull chord.
#[derive(Debug, Clone)]
pub struct Under {
    pub arcs: Vec<(f64, f64)>,
    pub gaps: Vec<GapDomain>,
    pub hull: (f64, f64),
    pub coeffs: (f64, f64, f64),
}

/// A frozen chordal domain filling one gap between consecutive arcs.
#[derive(Debug, Clone)]
pub struct GapDomain {
    pub lo: f64,
    pub hi: f64,
    pub dom: ChordalDomain,
}

/// Region of the strip with an evaluation rule.
#[derive(Debug, Clone)]
pub enum Element {
    /// Tangent band with parameters `u ∈ [u_lo, u_hi]`.
    Band { slope: Slope, u_lo: f64, u_hi: f64 },
    /// Chordal region: chords of `dom` with length in `[l_lo, l_hi]`.
    Chordal { node: usize, dom: ChordalDomain, l_lo: f64, l_hi: f64 },
    /// Linearity region.
    Linear { node: usize, coeffs: (f64, f64, f64), region: LinRegion },
}

/// Shape of a linearity region.
#[derive(Debug, Clone)]
pub enum LinRegion {
    Angle { w: f64 },
    CrownR { a0: f64, b0: f64 },
    CrownL { a0: f64, b0: f64 },
    CrownBoth { a0: f64, b0: f64 },
    /// Open multicup: between outer tangents, above the gap chords.
    MulticupTop { a_l: f64, a_r: f64, gaps: Vec<(f64, f64)> },
    /// Closed multicup: below the hull chord, above the gap chords.
    UnderHull { hull: (f64, f64), gaps: Vec<(f64, f64)> },
}

/// A fully solved picture at radius `eps`.
#[derive(Debug, Clone)]
pub struct Solved {
    pub eps: f64,
    pub picture: Picture,
    pub nodes: Vec<SolvedNode>,
    pub elements: Vec<Element>,
}

/// Result of a pointwise evaluation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Eval {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub element: usize,
}

/// Emission data of a node toward one side.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Emission {
    pub(crate) pos: f64,
    pub(crate) seed: f64,
    pub(crate) source: ForceSource,
}

impl Solved {
    /// Horizontal extent of solved node `i` on the boundary line.
    pub fn node_span(&self, i: usize) -> (f64, f64) {
        match &self.nodes[i] {
            SolvedNode::Angle { w, .. } => (*w, *w),
            SolvedNode::Chordal { a_top, b_top, under, .. } => {
                let lo = under
                    .as_ref()
                    .and_then(|u| u.arcs.first())
                    .map(|a| a.0.min(*a_top))
                    .unwrap_or(*a_top);
                let hi = under
                    .as_ref()
                    .and_then(|u| u.arcs.last())
                    .map(|a| a.1.max(*b_top))
                    .unwrap_or(*b_top);
                (lo, hi)
            }
            SolvedNode::Multicup { arcs, .. } => {
                (arcs.first().unwrap().0, arcs.last().unwrap().1)
            }
        }
    }

    /// Emission toward the right of node `i` (`None` if the node does not
    /// emit a right band).
    pub(crate) fn emission_right(&self, bf: &BoundaryFunction, i: usize) -> Option<Emission> {
        match &self.nodes[i] {
            SolvedNode::Angle { .. } => None,
            SolvedNode::Chordal { a_top, b_top, .. } => Some(Emission {
                pos: *b_top,
                seed: seed_right(bf, *b_top, *a_top, *b_top, self.eps),
                source: ForceSource::Chord { a0: *a_top, b0: *b_top },
            }),
            SolvedNode::Multicup { arcs, slope2, .. } => {
                let ar = arcs.last().unwrap().1;
                if !ar.is_finite() {
                    return None;
                }
                Some(Emission {
                    pos: ar,
                    seed: bf.f1(ar) - self.eps * slope2,
                    source: ForceSource::Seeded { origin: ar, d: bf.f2(ar) - slope2 },
                })
            }
        }
    }

    pub(crate) fn emission_left(&self, bf: &BoundaryFunction, i: usize) -> Option<Emission> {
        match &self.nodes[i] {
            SolvedNode::Angle { .. } => None,
            SolvedNode::Chordal { a_top, b_top, .. } => Some(Emission {
                pos: *a_top,
                seed: seed_left(bf, *a_top, *a_top, *b_top, self.eps),
                source: ForceSource::Chord { a0: *a_top, b0: *b_top },
            }),
            SolvedNode::Multicup { arcs, slope2, .. } => {
                let al = arcs.first().unwrap().0;
                if !al.is_finite() {
                    return None;
                }
                Some(Emission {
                    pos: al,
                    seed: bf.f1(al) + self.eps * slope2,
                    source: ForceSource::Seeded { origin: al, d: -(bf.f2(al) - slope2) },
                })
            }
        }
    }
}

/// The collinear second-derivative level of a multicup: the common slope of
/// the line through the contact points of `f'`.
fn multicup_slope2(bf: &BoundaryFunction, arcs: &[(f64, f64)]) -> f64 {
    for &(lo, hi) in arcs {
        if !lo.is_finite() {
            return bf.f2(hi - 1.0);
        }
        if !hi.is_finite() {
            return bf.f2(lo + 1.0);
        }
        if hi - lo > 1e-12 {
            return bf.f2(0.5 * (lo + hi));
        }
    }
    // all point arcs: averaged second derivative over the hull
    let al = arcs.first().unwrap().0;
    let ar = arcs.last().unwrap().1;
    bf.avg_f2(al, ar)
}

/// Linearity coefficients of a multicup from a finite contact point `a` and
/// the collinear slope `s`: the quadratic `β₂x₂+β₁x₁+β₀` with `β₂ = s/2`
/// touching the boundary data at `(a, a², f(a))` with slope `f'(a)`.
fn multicup_coeffs(bf: &BoundaryFunction, a: f64, s: f64) -> (f64, f64, f64) {
    let b2 = 0.5 * s;
    let b1 = bf.f1(a) - 2.0 * b2 * a;
    let b0 = bf.f(a) - a * bf.f1(a) + b2 * a * a;
    (b2, b1, b0)
}

/// Smallest distance from `c` to another root anchor (defaults to 1).
pub(crate) fn local_gap(bf: &BoundaryFunction, c: f64) -> f64 {
    let mut gap = f64::INFINITY;
    for (_, loc) in bf.roots.ordered_finite() {
        for x in [loc.lo, loc.hi] {
            if x.is_finite() && (x - c).abs() > 1e-12 {
                gap = gap.min((x - c).abs());
            }
        }
    }
    if gap.is_finite() {
        gap
    } else {
        1.0
    }
}

/// Build the frozen gap domains of a multicup.
fn build_gaps(
    bf: &BoundaryFunction,
    arcs: &[(f64, f64)],
) -> Result<Vec<GapDomain>, FoliationError> {
    let mut gaps = Vec::new();
    for w in arcs.windows(2) {
        let (lo, hi) = (w[0].1, w[1].0);
        if hi - lo <= 1e-12 {
            continue;
        }
        // the gap is filled by the frozen chordal domain of the root inside
        let mut c_in = None;
        for (kind, loc) in bf.roots.ordered_finite() {
            if kind == RootKind::C && loc.anchor() > lo && loc.anchor() < hi {
                c_in = Some(loc.anchor());
            }
        }
        let c = c_in.ok_or_else(|| {
            FoliationError::UnknownConfiguration(format!(
                "no repelling root inside multicup gap [{lo}, {hi}]"
            ))
        })?;
        let dom = ChordalDomain::grow(bf, ChordSeed::Point(c), hi - lo, local_gap(bf, c))?;
        let (ga, gb) = dom.chord_at(bf, hi - lo)?;
        if (ga - lo).abs() > 1e-6 * (1.0 + lo.abs()) || (gb - hi).abs() > 1e-6 * (1.0 + hi.abs())
        {
            return Err(FoliationError::UnknownConfiguration(format!(
                "gap domain top chord [{ga}, {gb}] does not match the gap [{lo}, {hi}]"
            )));
        }
        gaps.push(GapDomain { lo, hi, dom });
    }
    Ok(gaps)
}

/// Solve `picture` at radius `eps`.
pub fn solve(
    bf: &BoundaryFunction,
    picture: &Picture,
    eps: f64,
) -> Result<Solved, FoliationError> {
    let n = picture.nodes.len();
    // interface compatibility
    for gap in 0..=n {
        let left = if gap == 0 {
            None
        } else {
            Some(interfaces(&picture.nodes[gap - 1]).1)
        };
        let right = if gap == n {
            None
        } else {
            Some(interfaces(&picture.nodes[gap]).0)
        };
        let ok = match (left, right) {
            (Some(IFace::Ray), _) | (_, Some(IFace::Ray)) => {
                // a ray side must face the outside world
                matches!((left, right), (Some(IFace::Ray), None) | (None, Some(IFace::Ray)))
            }
            (Some(IFace::EmitR), Some(IFace::SinkR)) => true,
            (Some(IFace::SinkL), Some(IFace::EmitL)) => true,
            (None, Some(IFace::SinkR))
            | (None, Some(IFace::EmitL))
            | (Some(IFace::EmitR), None)
            | (Some(IFace::SinkL), None)
            | (None, None) => true,
            _ => false,
        };
        if !ok {
            return Err(FoliationError::BadSequence {
                gap,
                detail: format!("{left:?} against {right:?}"),
            });
        }
    }

    let mut solved: Vec<Option<SolvedNode>> = vec![None; n];

    // pass 1: bodies that do not depend on neighbors
    for (i, node) in picture.nodes.iter().enumerate() {
        match (&node.kind, node.crown) {
            (NodeKind::Cup { c }, Crown::Full) => {
                let dom = ChordalDomain::grow(bf, ChordSeed::Point(*c), 2.0 * eps, local_gap(bf, *c))?;
                let (a, b) = dom.chord_at(bf, 2.0 * eps)?;
                solved[i] = Some(SolvedNode::Chordal {
                    dom,
                    a_top: a,
                    b_top: b,
                    l_top: 2.0 * eps,
                    crown_coeffs: None,
                    birdie_ls: None,
                    under: None,
                });
            }
            (NodeKind::Cup { .. }, _) => {} // crowned: pass 2/3
            (NodeKind::Arcs { arcs, closed }, crown) => {
                let gaps = build_gaps(bf, arcs)?;
                let slope2 = multicup_slope2(bf, arcs);
                if *closed {
                    if crown != Crown::Full {
                        return Err(FoliationError::UnknownConfiguration(
                            "crowned closed multicup not supported".into(),
                        ));
                    }
                    let (hl, hr) = (arcs.first().unwrap().0, arcs.last().unwrap().1);
                    if !hl.is_finite() || !hr.is_finite() {
                        return Err(FoliationError::UnknownConfiguration(
                            "closed multicup with ray arcs".into(),
                        ));
                    }
                    let dom = ChordalDomain::grow(bf, ChordSeed::Chord { a: hl, b: hr }, 2.0 * eps, 1.0)?;
                    let (a, b) = dom.chord_at(bf, 2.0 * eps)?;
                    let contact = finite_contact(arcs);
                    solved[i] = Some(SolvedNode::Chordal {
                        dom,
                        a_top: a,
                        b_top: b,
                        l_top: 2.0 * eps,
                        crown_coeffs: None,
                        birdie_ls: None,
                        under: Some(Under {
                            arcs: arcs.clone(),
                            gaps,
                            hull: (hl, hr),
                            coeffs: multicup_coeffs(bf, contact, slope2),
                        }),
                    });
                } else if crown == Crown::Full {
                    let contact = finite_contact(arcs);
                    solved[i] = Some(SolvedNode::Multicup {
                        arcs: arcs.clone(),
                        gaps,
                        slope2,
                        coeffs: multicup_coeffs(bf, contact, slope2),
                    });
                } // crowned open multicups: pass 2/3
            }
            (NodeKind::Angle { .. }, _) => {}
        }
    }

    // pass 2: right-moving crowns left to right
    for i in 0..n {
        let node = &picture.nodes[i];
        let needs_left_eq =
            matches!(node.crown, Crown::TrolleybusR | Crown::Birdie) && !matches!(node.kind, NodeKind::Angle { .. });
        if !needs_left_eq {
            continue;
        }
        let src = incoming_source(bf, picture, &solved, i, Side::Right, eps)?;
        solve_crown_equation(bf, picture, &mut solved, i, Side::Right, src, eps)?;
    }
    // pass 3: left-moving crowns right to left
    for i in (0..n).rev() {
        let node = &picture.nodes[i];
        let needs_right_eq =
            matches!(node.crown, Crown::TrolleybusL | Crown::Birdie) && !matches!(node.kind, NodeKind::Angle { .. });
        if !needs_right_eq {
            continue;
        }
        let src = incoming_source(bf, picture, &solved, i, Side::Left, eps)?;
        solve_crown_equation(bf, picture, &mut solved, i, Side::Left, src, eps)?;
    }

    // pass 4: angles
    for i in 0..n {
        if !matches!(picture.nodes[i].kind, NodeKind::Angle { hint: _ }) {
            continue;
        }
        let hint = match picture.nodes[i].kind {
            NodeKind::Angle { hint } => hint,
            _ => unreachable!(),
        };
        let left = neighbor_emission(bf, &solved, i, Side::Left, eps);
        let right = neighbor_emission(bf, &solved, i, Side::Right, eps);
        let right_force = Force::right(
            left.map(|e| e.source).unwrap_or(ForceSource::Infinity),
            eps,
        );
        let left_force = Force::left(
            right.map(|e| e.source).unwrap_or(ForceSource::Infinity),
            eps,
        );
        let tiny = 1e-10 * (1.0 + hint.abs());
        let lo = left.map(|e| e.pos + tiny);
        let hi = right.map(|e| e.pos - tiny);
        // expand brackets toward infinite sources
        let w = {
            let mut k = 0;
            loop {
                let span = eps * 2f64.powi(k) + 1.0 * k as f64;
                let blo = lo.unwrap_or(hint - span);
                let bhi = hi.unwrap_or(hint + span);
                match crate::forces::balance_root(bf, &right_force, &left_force, blo, bhi) {
                    Ok(w) => break w,
                    Err(_) if (lo.is_none() || hi.is_none()) && k < 24 => {
                        k += 1;
                        continue;
                    }
                    Err(_) => {
                        return Err(FoliationError::NoBalance { node: i, lo: blo, hi: bhi })
                    }
                }
            }
        };
        let m_r = match left {
            Some(e) => Slope::right_anchored(e.pos, e.seed, eps).m(bf, w)?,
            None => Slope::right_from_infinity(eps).m(bf, w)?,
        };
        let m_l = match right {
            Some(e) => Slope::left_anchored(e.pos, e.seed, eps).m(bf, w)?,
            None => Slope::left_from_infinity(eps).m(bf, w)?,
        };
        let coeffs = angle_coeffs(bf, w, m_r, m_l, eps);
        solved[i] = Some(SolvedNode::Angle { w, m_r, m_l, coeffs });
    }

    let nodes: Vec<SolvedNode> = solved
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| FoliationError::UnknownConfiguration("unsolved node remained".into()))?;

    let mut out = Solved { eps, picture: picture.clone(), nodes, elements: vec![] };
    build_elements(bf, &mut out)?;
    Ok(out)
}

fn finite_contact(arcs: &[(f64, f64)]) -> f64 {
    for &(lo, hi) in arcs {
        if lo.is_finite() {
            return lo;
        }
        if hi.is_finite() {
            return hi;
        }
    }
    0.0
}

/// The emission feeding node `i` from the neighbor on the given side
/// (`Side::Right` means the incoming band travels rightward, i.e. comes
/// from the left neighbor).
fn incoming_source(
    bf: &BoundaryFunction,
    _picture: &Picture,
    solved: &[Option<SolvedNode>],
    i: usize,
    side: Side,
    eps: f64,
) -> Result<ForceSource, FoliationError> {
    let j = match side {
        Side::Right => i.checked_sub(1),
        Side::Left => {
            if i + 1 < solved.len() {
                Some(i + 1)
            } else {
                None
            }
        }
    };
    match j {
        None => Ok(ForceSource::Infinity),
        Some(j) => {
            let tmp = Solved {
                eps,
                picture: Picture { nodes: vec![] },
                nodes: vec![solved[j].clone().ok_or_else(|| {
                    FoliationError::UnknownConfiguration(format!(
                        "crown source node {j} not solved before node {i}"
                    ))
                })?],
                elements: vec![],
            };
            let e = match side {
                Side::Right => tmp.emission_right(bf, 0),
                Side::Left => tmp.emission_left(bf, 0),
            };
            Ok(e.map(|e| e.source).unwrap_or(ForceSource::Infinity))
        }
    }
}

fn neighbor_emission(
    bf: &BoundaryFunction,
    solved: &[Option<SolvedNode>],
    i: usize,
    side: Side,
    eps: f64,
) -> Option<Emission> {
    let j = match side {
        Side::Left => i.checked_sub(1)?,
        Side::Right => {
            if i + 1 < solved.len() {
                i + 1
            } else {
                return None;
            }
        }
    };
    let tmp = Solved {
        eps,
        picture: Picture { nodes: vec![] },
        nodes: vec![solved[j].clone()?],
        elements: vec![],
    };
    match side {
        Side::Left => tmp.emission_right(bf, 0),
        Side::Right => tmp.emission_left(bf, 0),
    }
}

/// Solve one crown equation for node `i`.
///
/// `side = Right`: incoming right band; the base equation is
/// `F_in(a(l)) - D_L(a(l), b(l)) = 0`.
/// `side = Left`: incoming left band; `F_in(b(l)) + D_R(a(l), b(l)) = 0`.
fn solve_crown_equation(
    bf: &BoundaryFunction,
    picture: &Picture,
    solved: &mut Vec<Option<SolvedNode>>,
    i: usize,
    side: Side,
    src: ForceSource,
    eps: f64,
) -> Result<(), FoliationError> {
    let node = &picture.nodes[i];
    let force = match side {
        Side::Right => Force::right(src, eps),
        Side::Left => Force::left(src, eps),
    };
    match &node.kind {
        NodeKind::Cup { c } => {
            let gap = local_gap(bf, *c);
            let l_floor = 1e-4 * gap;
            let mut dom = ChordalDomain::grow(bf, ChordSeed::Point(*c), l_floor * 2.0, gap)?;
            // extend as far as possible up to the full chord
            let l_max = match dom.extend_to(bf, 2.0 * eps) {
                Ok(()) => 2.0 * eps,
                Err(_) => dom.max_l(),
            };
            let g = |l: f64| -> f64 {
                match dom.chord_at(bf, l) {
                    Ok((a, b)) => {
                        let (dl, dr) = differentials(bf, a, b);
                        match side {
                            Side::Right => match force.eval(bf, a) {
                                Ok(f) => f - dl,
                                Err(_) => f64::NAN,
                            },
                            Side::Left => match force.eval(bf, b) {
                                Ok(f) => f + dr,
                                Err(_) => f64::NAN,
                            },
                        }
                    }
                    Err(_) => f64::NAN,
                }
            };
            let bracket = scan_first_sign_change(&g, l_floor, l_max, 512)
                .ok_or(FoliationError::CrownUnsolved { node: i, l_max })?;
            let l = brent_root(&g, bracket.0, bracket.1, 1e-12 * (1.0 + l_max))
                .map_err(|_| FoliationError::CrownUnsolved { node: i, l_max })?;
            let (a, b) = dom.chord_at(bf, l)?;
            merge_crown_solution(solved, i, side, dom, a, b, l, chord_coeffs(bf, a, b));
            Ok(())
        }
        NodeKind::Arcs { arcs, closed } => {
            if *closed {
                return Err(FoliationError::UnknownConfiguration(
                    "crowned closed multicup not supported".into(),
                ));
            }
            // the free parameter is the outer arc end on the incoming side
            let (idx_arc, lo, hi) = match side {
                Side::Right => {
                    let a = arcs.first().unwrap();
                    (0usize, a.0, a.1)
                }
                Side::Left => {
                    let a = arcs.last().unwrap();
                    (arcs.len() - 1, a.0, a.1)
                }
            };
            if lo == hi {
                return Err(FoliationError::UnknownConfiguration(
                    "crowned multicup with a pinned point arc".into(),
                ));
            }
            let slope2 = multicup_slope2(bf, arcs);
            let g = |e: f64| -> f64 {
                let d = bf.f2(e) - slope2;
                match side {
                    Side::Right => match force.eval(bf, e) {
                        Ok(f) => f - d,
                        Err(_) => f64::NAN,
                    },
                    Side::Left => match force.eval(bf, e) {
                        Ok(f) => f + d,
                        Err(_) => f64::NAN,
                    },
                }
            };
            // clamp the search inside the arc, away from the exact ends
            let span = (hi.min(lo + 1e6) - lo.max(hi - 1e6)).abs().max(1.0);
            let slo = if lo.is_finite() { lo + 1e-9 * span } else { hi - 64.0 * eps - 10.0 };
            let shi = if hi.is_finite() { hi - 1e-9 * span } else { lo + 64.0 * eps + 10.0 };
            let bracket = scan_first_sign_change(&g, slo, shi, 512)
                .ok_or(FoliationError::CrownUnsolved { node: i, l_max: shi - slo })?;
            let e = brent_root(&g, bracket.0, bracket.1, 1e-12 * (1.0 + shi.abs()))
                .map_err(|_| FoliationError::CrownUnsolved { node: i, l_max: shi - slo })?;
            let mut new_arcs = arcs.clone();
            match side {
                Side::Right => new_arcs[idx_arc].0 = e,
                Side::Left => new_arcs[idx_arc].1 = e,
            }
            let gaps = build_gaps(bf, &new_arcs)?;
            let contact = finite_contact(&new_arcs);
            solved[i] = Some(SolvedNode::Multicup {
                arcs: new_arcs,
                gaps,
                slope2,
                coeffs: multicup_coeffs(bf, contact, slope2),
            });
            Ok(())
        }
        NodeKind::Angle { .. } => unreachable!(),
    }
}

/// Store a crown solution, merging birdie data when both sides are solved.
fn merge_crown_solution(
    solved: &mut [Option<SolvedNode>],
    i: usize,
    side: Side,
    dom: ChordalDomain,
    a: f64,
    b: f64,
    l: f64,
    coeffs: (f64, f64, f64),
) {
    match solved[i].take() {
        Some(SolvedNode::Chordal {
            dom: dom0,
            a_top,
            b_top,
            l_top,
            crown_coeffs,
            ..
        }) => {
            // birdie: second equation solved; keep the averaged base
            let (l_r, l_l) = match side {
                Side::Left => (l_top, l),
                Side::Right => (l, l_top),
            };
            let use_left = l_l <= l_r;
            let (fdom, fl) = if use_left { (dom, l) } else { (dom0, l_top) };
            let (fa, fb) = if use_left { (a, b) } else { (a_top, b_top) };
            solved[i] = Some(SolvedNode::Chordal {
                dom: fdom,
                a_top: fa,
                b_top: fb,
                l_top: fl,
                crown_coeffs: crown_coeffs.or(Some(coeffs)),
                birdie_ls: Some((l_r, l_l)),
                under: None,
            });
        }
        _ => {
            solved[i] = Some(SolvedNode::Chordal {
                dom,
                a_top: a,
                b_top: b,
                l_top: l,
                crown_coeffs: Some(coeffs),
                birdie_ls: None,
                under: None,
            });
        }
    }
}

/// Build the ordered region list of a solved picture.
fn build_elements(bf: &BoundaryFunction, s: &mut Solved) -> Result<(), FoliationError> {
    let n = s.nodes.len();
    let eps = s.eps;
    let mut elements: Vec<Element> = Vec::new();

    // band in gap `g` (between node g-1 and node g; g ranges 0..=n)
    for g in 0..=n {
        let left_node = if g == 0 { None } else { Some(g - 1) };
        let right_node = if g == n { None } else { Some(g) };
        // determine the band (if any): an emitter on one side, a sink or
        // infinity on the other
        let left_iface = left_node.map(|i| interfaces(&s.picture.nodes[i]).1);
        let right_iface = right_node.map(|i| interfaces(&s.picture.nodes[i]).0);
        let left_emit = if left_iface == Some(IFace::EmitR) {
            left_node.and_then(|i| s.emission_right(bf, i))
        } else {
            None
        };
        let right_emit = if right_iface == Some(IFace::EmitL) {
            right_node.and_then(|i| s.emission_left(bf, i))
        } else {
            None
        };
        if left_iface == Some(IFace::Ray) || right_iface == Some(IFace::Ray) {
            // the multicup linearity swallows this side: no band, but the
            // node to the right still owns its regions
            if let Some(i) = right_node {
                push_node_regions(s, i, &mut elements);
            }
            continue;
        }
        let sink_pos = |i: Option<usize>, side: Side| -> Option<f64> {
            i.map(|i| match &s.nodes[i] {
                SolvedNode::Angle { w, .. } => *w,
                SolvedNode::Chordal { a_top, b_top, .. } => match side {
                    Side::Right => *a_top,
                    Side::Left => *b_top,
                },
                SolvedNode::Multicup { arcs, .. } => match side {
                    Side::Right => arcs.first().unwrap().0,
                    Side::Left => arcs.last().unwrap().1,
                },
            })
        };
        match (left_emit, right_emit) {
            (Some(e), None) => {
                // right band from the left emitter toward the sink / +∞
                let u_hi = sink_pos(right_node, Side::Right).unwrap_or(f64::INFINITY);
                elements.push(Element::Band {
                    slope: Slope::right_anchored(e.pos, e.seed, eps),
                    u_lo: e.pos,
                    u_hi,
                });
            }
            (None, Some(e)) => {
                let u_lo = sink_pos(left_node, Side::Left).unwrap_or(f64::NEG_INFINITY);
                elements.push(Element::Band {
                    slope: Slope::left_anchored(e.pos, e.seed, eps),
                    u_lo,
                    u_hi: e.pos,
                });
            }
            (None, None) => {
                // band between two sinks / infinities: direction from the
                // sink types (right sink ⇒ right band from -∞, etc.)
                match (left_iface, right_iface) {
                    (_, Some(IFace::SinkR)) | (Some(IFace::EmitR), _) => {
                        let u_hi = sink_pos(right_node, Side::Right).unwrap_or(f64::INFINITY);
                        elements.push(Element::Band {
                            slope: Slope::right_from_infinity(eps),
                            u_lo: f64::NEG_INFINITY,
                            u_hi,
                        });
                    }
                    (Some(IFace::SinkL), _) | (_, Some(IFace::EmitL)) => {
                        let u_lo = sink_pos(left_node, Side::Left).unwrap_or(f64::NEG_INFINITY);
                        elements.push(Element::Band {
                            slope: Slope::left_from_infinity(eps),
                            u_lo,
                            u_hi: f64::INFINITY,
                        });
                    }
                    (None, None) => {
                        // empty picture: a single band, oriented by the sign
                        // of f''' at the far right (toward +∞ repelling ⇒
                        // left band from +∞)
                        let from_plus = bf
                            .roots
                            .c
                            .last()
                            .map(|r| r.hi == f64::INFINITY)
                            .unwrap_or(true);
                        if from_plus {
                            elements.push(Element::Band {
                                slope: Slope::left_from_infinity(eps),
                                u_lo: f64::NEG_INFINITY,
                                u_hi: f64::INFINITY,
                            });
                        } else {
                            elements.push(Element::Band {
                                slope: Slope::right_from_infinity(eps),
                                u_lo: f64::NEG_INFINITY,
                                u_hi: f64::INFINITY,
                            });
                        }
                    }
                    _ => {
                        return Err(FoliationError::BadSequence {
                            gap: g,
                            detail: format!("{left_iface:?} / {right_iface:?} with no emitter"),
                        })
                    }
                }
            }
            (Some(_), Some(_)) => {
                return Err(FoliationError::BadSequence {
                    gap: g,
                    detail: "two emitters face each other without an angle".into(),
                })
            }
        }

        // regions of the node to the right of this gap
        if let Some(i) = right_node {
            push_node_regions(s, i, &mut elements);
        }
    }
    s.elements = elements;
    Ok(())
}

/// Append the regions owned by solved node `i` to `elements`.
fn push_node_regions(s: &Solved, i: usize, elements: &mut Vec<Element>) {
    match &s.nodes[i] {
        SolvedNode::Angle { w, coeffs, .. } => {
            elements.push(Element::Linear {
                node: i,
                coeffs: *coeffs,
                region: LinRegion::Angle { w: *w },
            });
        }
        SolvedNode::Chordal {
            dom,
            a_top,
            b_top,
            l_top,
            crown_coeffs,
            under,
            ..
        } => {
            if let Some(coeffs) = crown_coeffs {
                let region = match s.picture.nodes[i].crown {
                    Crown::TrolleybusR => LinRegion::CrownR { a0: *a_top, b0: *b_top },
                    Crown::TrolleybusL => LinRegion::CrownL { a0: *a_top, b0: *b_top },
                    Crown::Birdie => LinRegion::CrownBoth { a0: *a_top, b0: *b_top },
                    Crown::Full => LinRegion::CrownBoth { a0: *a_top, b0: *b_top },
                };
                elements.push(Element::Linear { node: i, coeffs: *coeffs, region });
            }
            elements.push(Element::Chordal {
                node: i,
                dom: dom.clone(),
                l_lo: dom.min_l(),
                l_hi: *l_top,
            });
            if let Some(u) = under {
                elements.push(Element::Linear {
                    node: i,
                    coeffs: u.coeffs,
                    region: LinRegion::UnderHull {
                        hull: u.hull,
                        gaps: u.gaps.iter().map(|g| (g.lo, g.hi)).collect(),
                    },
                });
                for gd in &u.gaps {
                    elements.push(Element::Chordal {
                        node: i,
                        dom: gd.dom.clone(),
                        l_lo: gd.dom.min_l(),
                        l_hi: gd.hi - gd.lo,
                    });
                }
            }
        }
        SolvedNode::Multicup { arcs, gaps, coeffs, .. } => {
            elements.push(Element::Linear {
                node: i,
                coeffs: *coeffs,
                region: LinRegion::MulticupTop {
                    a_l: arcs.first().unwrap().0,
                    a_r: arcs.last().unwrap().1,
                    gaps: gaps.iter().map(|g| (g.lo, g.hi)).collect(),
                },
            });
            for gd in gaps {
                elements.push(Element::Chordal {
                    node: i,
                    dom: gd.dom.clone(),
                    l_lo: gd.dom.min_l(),
                    l_hi: gd.hi - gd.lo,
                });
            }
        }
    }
}

/// Chord line value at `x1` for the chord `[a, b]`.
fn chord_line(a: f64, b: f64, x1: f64) -> f64 {
    (a + b) * x1 - a * b
}

impl Solved {
    /// Membership test for element `idx` at `(x1, x2)` with slack `tol`.
    fn member(&self, bf: &BoundaryFunction, idx: usize, x1: f64, x2: f64, tol: f64) -> bool {
        let eps = self.eps;
        if !in_strip(x1, x2, eps, tol) {
            return false;
        }
        match &self.elements[idx] {
            Element::Band { slope, u_lo, u_hi } => {
                let u = match slope.side {
                    Side::Right => tangent_u_right(x1, x2, eps),
                    Side::Left => tangent_u_left(x1, x2, eps),
                };
                u >= u_lo - tol && u <= u_hi + tol
            }
            Element::Chordal { dom, l_lo, l_hi, .. } => {
                // inside iff below the top chord, above the bottom chord,
                // and on a chord of the family
                let top = dom.chord_at(bf, *l_hi);
                let Ok((a, b)) = top else { return false };
                if x1 < a - tol || x1 > b + tol {
                    return false;
                }
                if x2 > chord_line(a, b, x1) + tol {
                    return false;
                }
                // Point-seeded cups reach all the way down to the seed point;
                // only chord-seeded domains have a genuine lower chord.
                let has_floor = matches!(dom.seed, crate::chords::ChordSeed::Chord { .. });
                if has_floor && *l_lo > 1e-9 {
                    if let Ok((a0, b0)) = dom.chord_at(bf, *l_lo) {
                        if x1 > a0 - tol && x1 < b0 + tol && x2 < chord_line(a0, b0, x1) - tol {
                            return false;
                        }
                    }
                }
                true
            }
            Element::Linear { region, .. } => match region {
                LinRegion::Angle { w } => {
                    (x1 - w).abs() <= eps + tol
                        && x2 >= 2.0 * w * x1 - w * w + 2.0 * eps * (w - x1).abs() - tol
                }
                LinRegion::CrownR { a0, b0 } => {
                    let u = tangent_u_right(x1, x2, eps);
                    u >= a0 - tol && u <= b0 + tol && x2 >= chord_line(*a0, *b0, x1) - tol
                }
                LinRegion::CrownL { a0, b0 } => {
                    let u = tangent_u_left(x1, x2, eps);
                    u >= a0 - tol && u <= b0 + tol && x2 >= chord_line(*a0, *b0, x1) - tol
                }
                LinRegion::CrownBoth { a0, b0 } => {
                    let ur = tangent_u_right(x1, x2, eps);
                    let ul = tangent_u_left(x1, x2, eps);
                    ur >= a0 - tol && ul <= b0 + tol && x2 >= chord_line(*a0, *b0, x1) - tol
                }
                LinRegion::MulticupTop { a_l, a_r, gaps } => {
                    let ul = tangent_u_left(x1, x2, eps);
                    let ur = tangent_u_right(x1, x2, eps);
                    if a_l.is_finite() && ul < a_l - tol {
                        return false;
                    }
                    if a_r.is_finite() && ur > a_r + tol {
                        return false;
                    }
                    for (glo, ghi) in gaps {
                        if x1 > *glo && x1 < *ghi && x2 < chord_line(*glo, *ghi, x1) - tol {
                            return false;
                        }
                    }
                    true
                }
                LinRegion::UnderHull { hull, gaps } => {
                    if x1 < hull.0 - tol || x1 > hull.1 + tol {
                        return false;
                    }
                    if x2 > chord_line(hull.0, hull.1, x1) + tol {
                        return false;
                    }
                    for (glo, ghi) in gaps {
                        if x1 > *glo && x1 < *ghi && x2 < chord_line(*glo, *ghi, x1) - tol {
                            return false;
                        }
                    }
                    true
                }
            },
        }
    }

    /// Index of the region containing `(x1, x2)`; ties resolve to the
    /// smallest index.
    pub fn locate(&self, bf: &BoundaryFunction, x1: f64, x2: f64) -> Option<usize> {
        let tol = 1e-9 * (1.0 + x1 * x1 + self.eps * self.eps);
        (0..self.elements.len()).find(|&i| self.member(bf, i, x1, x2, tol))
    }

    /// Evaluate the candidate at `(x1, x2)`.
    pub fn eval(&self, bf: &BoundaryFunction, x1: f64, x2: f64) -> Result<Eval, FoliationError> {
        let idx = self
            .locate(bf, x1, x2)
            .ok_or(FoliationError::NotCovered { x1, x2 })?;
        self.eval_in(bf, idx, x1, x2)
    }

    /// Evaluate assuming membership of element `idx`.
    pub fn eval_in(
        &self,
        bf: &BoundaryFunction,
        idx: usize,
        x1: f64,
        x2: f64,
    ) -> Result<Eval, FoliationError> {
        match &self.elements[idx] {
            Element::Band { slope, .. } => {
                let (_, b, d1, d2) = band_value(bf, slope, x1, x2)?;
                Ok(Eval { value: b, d1, d2, element: idx })
            }
            Element::Chordal { dom, .. } => {
                // points in the sliver below the birth chord of a point-seeded
                // cup fall back onto the bottom row
                let (a, b) = match dom.locate(bf, x1, x2) {
                    Some((_, a, b)) => (a, b),
                    None => dom
                        .chord_at(bf, dom.min_l())
                        .map_err(|_| FoliationError::NotCovered { x1, x2 })?,
                };
                let (b2, b1, b0) = chord_coeffs(bf, a, b);
                Ok(Eval { value: b2 * x2 + b1 * x1 + b0, d1: b1, d2: b2, element: idx })
            }
            Element::Linear { coeffs, .. } => {
                let (v, d1, d2) = linear_value(*coeffs, x1, x2);
                Ok(Eval { value: v, d1, d2, element: idx })
            }
        }
    }

    /// Admissibility report: empty when the solved picture passes all
    /// structural checks (force signs on bands, angle balances, and value /
    /// gradient continuity at gluings).
    pub fn check_admissible(&self, bf: &BoundaryFunction) -> Vec<String> {
        let mut problems = Vec::new();
        let eps = self.eps;
        // 1. force signs on bands: ε·m'' ≤ 0 on right bands, ≥ 0 on left
        for (i, el) in self.elements.iter().enumerate() {
            if let Element::Band { slope, u_lo, u_hi } = el {
                let lo = if u_lo.is_finite() { *u_lo } else { u_hi.min(8.0 * eps) - 8.0 * eps - 4.0 };
                let hi = if u_hi.is_finite() { *u_hi } else { u_lo.max(-8.0 * eps) + 8.0 * eps + 4.0 };
                for k in 0..8 {
                    let u = lo + (hi - lo) * (k as f64 + 0.5) / 8.0;
                    let m2 = match slope.m2(bf, u) {
                        Ok(v) => v,
                        Err(e) => {
                            problems.push(format!("element {i}: slope failed at u={u}: {e}"));
                            continue;
                        }
                    };
                    let scale = 1.0 + bf.f2(u).abs();
                    let bad = match slope.side {
                        Side::Right => m2 > 1e-7 * scale,
                        Side::Left => m2 < -1e-7 * scale,
                    };
                    if bad {
                        problems.push(format!(
                            "element {i}: band force has the wrong sign at u={u}: eps*m''={}",
                            eps * m2
                        ));
                    }
                }
            }
        }
        // 2. angle balances
        for (i, sn) in self.nodes.iter().enumerate() {
            if let SolvedNode::Angle { w, m_r, m_l, .. } = sn {
                let resid = m_r + m_l - 2.0 * bf.f1(*w);
                if resid.abs() > 1e-7 * (1.0 + bf.f1(*w).abs()) {
                    problems.push(format!("node {i}: angle balance residual {resid} at w={w}"));
                }
            }
        }
        // 3. continuity at region interfaces: sample points on shared
        // boundaries of consecutive elements
        let samples = self.interface_samples(bf);
        for (a, b, x1, x2) in samples {
            let ea = self.eval_in(bf, a, x1, x2);
            let eb = self.eval_in(bf, b, x1, x2);
            match (ea, eb) {
                (Ok(ea), Ok(eb)) => {
                    let scale = 1.0 + ea.value.abs();
                    if (ea.value - eb.value).abs() > 1e-8 * scale {
                        problems.push(format!(
                            "elements {a}/{b}: value jump {} at ({x1}, {x2})",
                            ea.value - eb.value
                        ));
                    }
                    let gscale = 1.0 + ea.d1.abs() + ea.d2.abs();
                    if (ea.d1 - eb.d1).abs() > 1e-6 * gscale
                        || (ea.d2 - eb.d2).abs() > 1e-6 * gscale
                    {
                        problems.push(format!(
                            "elements {a}/{b}: gradient jump ({}, {}) at ({x1}, {x2})",
                            ea.d1 - eb.d1,
                            ea.d2 - eb.d2
                        ));
                    }
                }
                (Err(e), _) | (_, Err(e)) => {
                    problems.push(format!("elements {a}/{b}: evaluation failed at interface: {e}"))
                }
            }
        }
        problems
    }

    /// Sample points on shared boundaries between adjacent elements.
    fn interface_samples(&self, bf: &BoundaryFunction) -> Vec<(usize, usize, f64, f64)> {
        let eps = self.eps;
        let mut out = Vec::new();
        // interfaces are extremal segments at known parameters: collect the
        // boundary tangency parameters of each element and midpoints
        let boundary_point_right = |u: f64| -> (f64, f64) {
            // midpoint of the right extremal at u
            let x1 = u - 0.5 * eps;
            (x1, 2.0 * (u - eps) * x1 - u * (u - 2.0 * eps))
        };
        let boundary_point_left = |u: f64| -> (f64, f64) {
            let x1 = u + 0.5 * eps;
            (x1, 2.0 * (u + eps) * x1 - u * (u + 2.0 * eps))
        };
        for i in 0..self.elements.len() {
            for j in (i + 1)..self.elements.len() {
                // candidate shared tangency parameters
                let mut pts: Vec<(f64, f64)> = Vec::new();
                let params = |el: &Element| -> Vec<(Side, f64)> {
                    match el {
                        Element::Band { slope, u_lo, u_hi } => {
                            let mut v = Vec::new();
                            if u_lo.is_finite() {
                                v.push((slope.side, *u_lo));
                            }
                            if u_hi.is_finite() {
                                v.push((slope.side, *u_hi));
                            }
                            v
                        }
                        Element::Chordal { dom, l_hi, .. } => match dom.chord_at(bf, *l_hi) {
                            Ok((a, b)) => vec![(Side::Left, a), (Side::Right, b)],
                            Err(_) => vec![],
                        },
                        Element::Linear { region, .. } => match region {
                            LinRegion::Angle { w } => {
                                vec![(Side::Right, *w), (Side::Left, *w)]
                            }
                            LinRegion::CrownR { a0, b0 }
                            | LinRegion::CrownL { a0, b0 }
                            | LinRegion::CrownBoth { a0, b0 } => {
                                vec![(Side::Right, *a0), (Side::Left, *b0), (Side::Right, *b0), (Side::Left, *a0)]
                            }
                            LinRegion::MulticupTop { a_l, a_r, .. } => {
                                let mut v = Vec::new();
                                if a_l.is_finite() {
                                    v.push((Side::Left, *a_l));
                                }
                                if a_r.is_finite() {
                                    v.push((Side::Right, *a_r));
                                }
                                v
                            }
                            LinRegion::UnderHull { hull, .. } => {
                                vec![(Side::Left, hull.0), (Side::Right, hull.1)]
                            }
                        },
                    }
                };
                let pi = params(&self.elements[i]);
                let pj = params(&self.elements[j]);
                for (sa, ua) in &pi {
                    for (sb, ub) in &pj {
                        if sa == sb && (ua - ub).abs() < 1e-7 * (1.0 + ua.abs()) {
                            let p = match sa {
                                Side::Right => boundary_point_right(*ua),
                                Side::Left => boundary_point_left(*ua),
                            };
                            pts.push(p);
                        }
                    }
                }
                pts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12);
                for (x1, x2) in pts {
                    let tol = 1e-7 * (1.0 + x1 * x1 + eps * eps);
                    if self.member(bf, i, x1, x2, tol) && self.member(bf, j, x1, x2, tol) {
                        out.push((i, j, x1, x2));
                    }
                }
            }
        }
        out
    }

    /// Graph export: vertices and band edges of the foliation.
    pub fn export_graph(&self, bf: &BoundaryFunction) -> GraphExport {
        let mut vertices = Vec::new();
        for (i, sn) in self.nodes.iter().enumerate() {
            let (kind, lo, hi) = match sn {
                SolvedNode::Angle { w, .. } => ("angle".to_string(), *w, *w),
                SolvedNode::Chordal { a_top, b_top, under, .. } => {
                    let crown = match self.picture.nodes[i].crown {
                        Crown::Full => {
                            if under.is_some() {
                                "closed_multicup"
                            } else {
                                "cup"
                            }
                        }
                        Crown::TrolleybusR => "trolleybus_r",
                        Crown::TrolleybusL => "trolleybus_l",
                        Crown::Birdie => "birdie",
                    };
                    (crown.to_string(), *a_top, *b_top)
                }
                SolvedNode::Multicup { arcs, .. } => (
                    "multicup".to_string(),
                    arcs.first().unwrap().0,
                    arcs.last().unwrap().1,
                ),
            };
            vertices.push(GraphVertex { id: i, kind, lo, hi, fictious: false });
        }
        // fictious vertices: attracting roots traversed by a band without an
        // angle (momentary degenerate linearity domains)
        let mut next_id = vertices.len();
        let mut edges = Vec::new();
        for el in &self.elements {
            if let Element::Band { slope, u_lo, u_hi } = el {
                edges.push(GraphEdge {
                    from: *u_lo,
                    to: *u_hi,
                    side: match slope.side {
                        Side::Right => "right".into(),
                        Side::Left => "left".into(),
                    },
                });
                for (kind, loc) in bf.roots.ordered_finite() {
                    if kind == RootKind::V {
                        let a = loc.anchor();
                        if a > *u_lo + 1e-9 && a < *u_hi - 1e-9 {
                            vertices.push(GraphVertex {
                                id: next_id,
                                kind: "fictious".into(),
                                lo: a,
                                hi: a,
                                fictious: true,
                            });
                            next_id += 1;
                        }
                    }
                }
            }
        }
        GraphExport { eps: self.eps, vertices, edges }
    }
}

/// Serializable foliation graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphExport {
    pub eps: f64,
    pub vertices: Vec<GraphVertex>,
    pub edges: Vec<GraphEdge>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphVertex {
    pub id: usize,
    pub kind: String,
    pub lo: f64,
    pub hi: f64,
    pub fictious: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: f64,
    pub to: f64,
    pub side: String,
}

/// The simple picture read off the root structure: a cup at every finite
/// repelling point root, a single-arc multicup at every interval or ray
/// repelling root, and an angle at every attracting root.
pub fn simple_picture(bf: &BoundaryFunction, eps: f64) -> Picture {
    let mut nodes = Vec::new();
    for (kind, loc) in bf.roots.ordered() {
        match kind {
            RootKind::C => {
                if loc.lo.is_finite() && loc.hi.is_finite() && loc.is_point() {
                    nodes.push(Node::cup(loc.lo));
                } else if loc.lo.is_finite() || loc.hi.is_finite() {
                    let hull = if loc.lo.is_finite() && loc.hi.is_finite() {
                        loc.hi - loc.lo
                    } else {
                        f64::INFINITY
                    };
                    nodes.push(Node::arcs(vec![(loc.lo, loc.hi)], hull <= 2.0 * eps));
                }
                // point roots at ±∞ contribute no node (bands from infinity)
            }
            RootKind::V => {
                if loc.lo.is_finite() || loc.hi.is_finite() {
                    nodes.push(Node::angle(loc.anchor()));
                }
            }
        }
    }
    Picture { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{BoundaryFunction, PieceSpec};
    use crate::term::Term;

    fn single(terms: Vec<Term>, eps_inf: f64) -> BoundaryFunction {
        BoundaryFunction::new(
            vec![PieceSpec { lo: f64::NEG_INFINITY, hi: f64::INFINITY, terms }],
            eps_inf,
            None,
        )
        .unwrap()
    }

    fn bf_quadratic() -> BoundaryFunction {
        single(vec![Term::Poly(vec![0.0, 0.0, 1.0])], 1e6)
    }
    fn bf_abs_cubed() -> BoundaryFunction {
        BoundaryFunction::new(
            vec![
                PieceSpec {
                    lo: f64::NEG_INFINITY,
                    hi: 0.0,
                    terms: vec![Term::Poly(vec![0.0, 0.0, 0.0, -1.0])],
                },
                PieceSpec {
                    lo: 0.0,
                    hi: f64::INFINITY,
                    terms: vec![Term::Poly(vec![0.0, 0.0, 0.0, 1.0])],
                },
            ],
            1e6,
            None,
        )
        .unwrap()
    }
    fn bf_neg_quartic() -> BoundaryFunction {
        // f = -(t-0.3)^4/24: one repelling root at 0.3, cup for every ε
        let t = Term::Poly(vec![0.3f64.powi(4), -4.0 * 0.3f64.powi(3), 6.0 * 0.3 * 0.3, -4.0 * 0.3, 1.0]);
        single(vec![t.scale(-1.0 / 24.0)], 1e6)
    }
    fn bf_pos_quartic() -> BoundaryFunction {
        let t = Term::Poly(vec![0.3f64.powi(4), -4.0 * 0.3f64.powi(3), 6.0 * 0.3 * 0.3, -4.0 * 0.3, 1.0]);
        single(vec![t.scale(1.0 / 24.0)], 1e6)
    }
    fn bf_solid_cubic() -> BoundaryFunction {
        BoundaryFunction::new(
            vec![
                PieceSpec {
                    lo: f64::NEG_INFINITY,
                    hi: -1.0,
                    terms: vec![Term::Poly(vec![1.0, 3.0, 3.0, 1.0])],
                },
                PieceSpec { lo: -1.0, hi: 1.0, terms: vec![Term::Poly(vec![])] },
                PieceSpec {
                    lo: 1.0,
                    hi: f64::INFINITY,
                    terms: vec![Term::Poly(vec![1.0, -3.0, 3.0, -1.0])],
                },
            ],
            1e6,
            None,
        )
        .unwrap()
    }

    #[test]
    fn quadratic_single_band_identity() {
        let bf = bf_quadratic();
        let eps = 0.8;
        let pic = simple_picture(&bf, eps);
        assert!(pic.nodes.is_empty());
        let s = solve(&bf, &pic, eps).unwrap();
        assert_eq!(s.elements.len(), 1);
        for &(x1, frac) in &[(0.0, 0.5), (-2.0, 0.1), (1.3, 0.95)] {
            let x2 = x1 * x1 + frac * eps * eps;
            let e = s.eval(&bf, x1, x2).unwrap();
            assert!((e.value - x2).abs() < 1e-9, "B={} vs {}", e.value, x2);
        }
        assert!(s.check_admissible(&bf).is_empty());
    }

    #[test]
    fn abs_cubed_angle_at_zero() {
        let bf = bf_abs_cubed();
        let eps = 0.5;
        let pic = simple_picture(&bf, eps);
        assert_eq!(pic.nodes.len(), 1);
        let s = solve(&bf, &pic, eps).unwrap();
        match &s.nodes[0] {
            SolvedNode::Angle { w, m_r, m_l, .. } => {
                assert!(w.abs() < 1e-9);
                // m_R(0) = -6ε², m_L(0) = +6ε²
                assert!((m_r + 6.0 * eps * eps).abs() < 1e-9);
                assert!((m_l - 6.0 * eps * eps).abs() < 1e-9);
            }
            _ => panic!("expected an angle"),
        }
        // boundary values on the lower parabola equal f
        for &x1 in &[-2.0, -0.2, 0.0, 0.7, 3.0] {
            let e = s.eval(&bf, x1, x1 * x1).unwrap();
            assert!(
                (e.value - bf.f(x1)).abs() < 1e-9 * (1.0 + bf.f(x1).abs()),
                "x1={x1}: {} vs {}",
                e.value,
                bf.f(x1)
            );
        }
        let problems = s.check_admissible(&bf);
        assert!(problems.is_empty(), "{problems:?}");
    }

    #[test]
    fn neg_quartic_full_cup() {
        let bf = bf_neg_quartic();
        let eps = 0.6;
        let pic = simple_picture(&bf, eps);
        assert_eq!(pic.nodes.len(), 1);
        let s = solve(&bf, &pic, eps).unwrap();
        let (a, b, l) = match &s.nodes[0] {
            SolvedNode::Chordal { a_top, b_top, l_top, .. } => (*a_top, *b_top, *l_top),
            _ => panic!("expected a chordal node"),
        };
        assert!((l - 2.0 * eps).abs() < 1e-12);
        assert!(a < 0.3 && 0.3 < b);
        // the top chord midpoint lies on the free boundary; the value there
        // is the mean of the endpoint values
        let m = 0.5 * (a + b);
        let e = s.eval(&bf, m, m * m + eps * eps).unwrap();
        let want = 0.5 * (bf.f(a) + bf.f(b));
        assert!((e.value - want).abs() < 1e-8 * (1.0 + want.abs()));
        let problems = s.check_admissible(&bf);
        assert!(problems.is_empty(), "{problems:?}");
        // boundary values
        for &x1 in &[-1.0, 0.3, 2.0] {
            let e = s.eval(&bf, x1, x1 * x1).unwrap();
            assert!((e.value - bf.f(x1)).abs() < 1e-8 * (1.0 + bf.f(x1).abs()));
        }
    }

    #[test]
    fn pos_quartic_angle_stays_at_vertex() {
        let bf = bf_pos_quartic();
        for &eps in &[0.3, 1.0, 2.0] {
            let s = solve(&bf, &simple_picture(&bf, eps), eps).unwrap();
            match &s.nodes[0] {
                SolvedNode::Angle { w, .. } => {
                    assert!((w - 0.3).abs() < 1e-9, "eps={eps}: w={w}")
                }
                _ => panic!(),
            }
        }
    }

    #[test]
    fn solid_cubic_open_multicup_below_unit_radius() {
        let bf = bf_solid_cubic();
        let eps = 0.5;
        let pic = simple_picture(&bf, eps);
        assert_eq!(pic.nodes.len(), 1);
        assert!(matches!(pic.nodes[0].kind, NodeKind::Arcs { closed: false, .. }));
        let s = solve(&bf, &pic, eps).unwrap();
        // on the flat stretch the candidate vanishes
        for &(x1, frac) in &[(0.0, 0.0), (0.0, 0.9), (0.5, 0.4), (-0.8, 0.2)] {
            let x2 = x1 * x1 + frac * eps * eps;
            let e = s.eval(&bf, x1, x2).unwrap();
            assert!(e.value.abs() < 1e-9, "B({x1},{x2}) = {}", e.value);
        }
        let problems = s.check_admissible(&bf);
        assert!(problems.is_empty(), "{problems:?}");
    }

    #[test]
    fn solid_cubic_closed_multicup_above_unit_radius() {
        let bf = bf_solid_cubic();
        let eps = 1.2;
        let pic = simple_picture(&bf, eps);
        assert!(matches!(pic.nodes[0].kind, NodeKind::Arcs { closed: true, .. }));
        let s = solve(&bf, &pic, eps).unwrap();
        // below the hull the candidate is still zero
        let e = s.eval(&bf, 0.0, 0.5).unwrap();
        assert!(e.value.abs() < 1e-9);
        // above the hull the chords join strictly negative boundary values,
        // so the candidate dips below zero
        let e2 = s.eval(&bf, 0.0, 1.0 + 1e-3).unwrap();
        assert!(e2.value < 0.0, "B above hull = {}", e2.value);
        let problems = s.check_admissible(&bf);
        assert!(problems.is_empty(), "{problems:?}");
        for &x1 in &[-2.0, -1.0, 0.0, 1.5] {
            let e = s.eval(&bf, x1, x1 * x1).unwrap();
            assert!((e.value - bf.f(x1)).abs() < 1e-8 * (1.0 + bf.f(x1).abs()));
        }
    }

    #[test]
    fn graph_export_shapes() {
        let bf = bf_abs_cubed();
        let s = solve(&bf, &simple_picture(&bf, 0.4), 0.4).unwrap();
        let g = s.export_graph(&bf);
        assert_eq!(g.eps, 0.4);
        assert_eq!(g.vertices.iter().filter(|v| !v.fictious).count(), 1);
        assert_eq!(g.edges.len(), 2);
        let json = serde_json::to_string(&g).unwrap();
        assert!(json.contains("\"angle\""));
    }
}
