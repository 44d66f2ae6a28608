//! Evolution of foliation pictures in the radius `ε`.
//!
//! Starting from a certified simple picture at a small radius, the picture is
//! continued adaptively in `ε`. Monitored event quantities (gaps between
//! figures, crown-death force values, birdie base mismatches, multicup hull
//! widths) are tracked along the way; a sign change brackets a critical
//! point, which is located by bisection (and, for crown deaths, refined on an
//! exact force root). At each critical point the picture is rewritten by the
//! concatenation rules and the evolution continues with the new picture.

use crate::boundary::BoundaryFunction;
use crate::foliation::{
    simple_picture, solve, Crown, FoliationError, Node, NodeKind, Picture, Solved, SolvedNode,
};
use crate::forces::{Force, ForceSource, Side};
use crate::numerics::brent_root;
use serde::Serialize;

/// Errors from the evolution driver.
#[derive(Debug, Clone, thiserror::Error)]
pub enum EvolutionError {
    #[error("foliation: {0}")]
    Foliation(#[from] FoliationError),
    #[error("no certified starting picture found down to eps = {eps}: {detail}")]
    StartFailed { eps: f64, detail: String },
    #[error("unrecognized crash at eps = {eps}: {detail}")]
    UnknownCrash { eps: f64, detail: String },
}

/// A monitored event quantity; a sign change marks a critical point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EventKind {
    /// The tangent edge between nodes `left` and `right` shrinks to zero.
    Touch { left: usize, right: usize },
    /// The crown chord of a trolleybus or birdie shrinks to zero (the
    /// incoming force vanishes at the seed point).
    CrownDeath { node: usize },
    /// A birdie's two base equations disagree beyond tolerance.
    BirdieSplit { node: usize },
    /// An open multicup's hull width reaches the full chord length `2ε`.
    MulticupFill { node: usize },
}

impl EventKind {
    fn describe(&self) -> String {
        match self {
            EventKind::Touch { left, right } => format!("edge between {left} and {right} closes"),
            EventKind::CrownDeath { node } => format!("crown of node {node} dies"),
            EventKind::BirdieSplit { node } => format!("birdie {node} desintegrates"),
            EventKind::MulticupFill { node } => format!("multicup {node} fills"),
        }
    }
}

/// One sampled point of a segment's parameter paths.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentSample {
    pub eps: f64,
    /// Flattened node parameters: angle `w`; chordal `a, b, l`; multicup
    /// outer ends.
    pub params: Vec<f64>,
}

/// A maximal ε-interval on which the combinatorial type is constant.
#[derive(Debug, Clone, Serialize)]
pub struct Segment {
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub picture: Picture,
    pub samples: Vec<SegmentSample>,
}

/// A located critical point with the applied modification.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    pub eps: f64,
    pub events: Vec<String>,
    /// Whether the chordal part of the picture changed.
    pub essential: bool,
    pub before: Picture,
    pub after: Picture,
    /// Max relative deviation of the candidate across the modification.
    pub continuity_dev: f64,
}

/// The full evolution record over `(eps_start, eps_target]`.
#[derive(Debug, Clone, Serialize)]
pub struct EvolutionTrace {
    pub eps_start: f64,
    pub eps_target: f64,
    pub segments: Vec<Segment>,
    pub criticals: Vec<CriticalPoint>,
    /// True when the per-unit-ε event cap was hit and the trace is partial.
    pub capped: bool,
}

impl EvolutionTrace {
    pub fn essential_criticals(&self) -> Vec<&CriticalPoint> {
        self.criticals.iter().filter(|c| c.essential).collect()
    }

    /// Final picture of the trace.
    pub fn final_picture(&self) -> &Picture {
        &self.segments.last().unwrap().picture
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("trace serialization")
    }

    /// Critical-point log: `eps,essential,events`.
    pub fn criticals_csv(&self) -> String {
        let mut out = String::from("eps,essential,events\n");
        for c in &self.criticals {
            out.push_str(&format!(
                "{:.16e},{},{}\n",
                c.eps,
                c.essential,
                c.events.join("; ")
            ));
        }
        out
    }
}

/// Flatten the solved node parameters for path sampling.
fn params_of(s: &Solved) -> Vec<f64> {
    let mut out = Vec::new();
    for n in &s.nodes {
        match n {
            SolvedNode::Angle { w, .. } => out.push(*w),
            SolvedNode::Chordal { a_top, b_top, l_top, .. } => {
                out.extend_from_slice(&[*a_top, *b_top, *l_top])
            }
            SolvedNode::Multicup { arcs, .. } => {
                out.push(arcs.first().unwrap().0);
                out.push(arcs.last().unwrap().1);
            }
        }
    }
    out
}

/// Incoming force value at `u` for node `i`'s crown from the given side,
/// using the neighbor emissions of `s`.
fn incoming_force_at(
    bf: &BoundaryFunction,
    s: &Solved,
    i: usize,
    side: Side,
    u: f64,
) -> Option<f64> {
    let src = incoming_src(bf, s, i, side);
    let force = match side {
        Side::Right => Force::right(src, s.eps),
        Side::Left => Force::left(src, s.eps),
    };
    force.eval(bf, u).ok()
}

fn incoming_src(bf: &BoundaryFunction, s: &Solved, i: usize, side: Side) -> ForceSource {
    match side {
        Side::Right => match i.checked_sub(1) {
            None => ForceSource::Infinity,
            Some(j) => s
                .emission_right(bf, j)
                .map(|e| e.source)
                .unwrap_or(ForceSource::Infinity),
        },
        Side::Left => {
            if i + 1 >= s.nodes.len() {
                ForceSource::Infinity
            } else {
                s.emission_left(bf, i + 1)
                    .map(|e| e.source)
                    .unwrap_or(ForceSource::Infinity)
            }
        }
    }
}

/// All event monitors of a solved picture, in a deterministic order.
fn monitors(bf: &BoundaryFunction, pic: &Picture, s: &Solved) -> Vec<(EventKind, f64)> {
    let n = pic.nodes.len();
    let mut out = Vec::new();
    for i in 0..n.saturating_sub(1) {
        let r = s.node_span(i).1;
        let l = s.node_span(i + 1).0;
        if r.is_finite() && l.is_finite() {
            out.push((EventKind::Touch { left: i, right: i + 1 }, l - r));
        }
    }
    for (i, node) in pic.nodes.iter().enumerate() {
        match (&node.kind, node.crown) {
            (NodeKind::Cup { c }, Crown::TrolleybusR) => {
                if let Some(v) = incoming_force_at(bf, s, i, Side::Right, *c) {
                    out.push((EventKind::CrownDeath { node: i }, v));
                }
            }
            (NodeKind::Cup { c }, Crown::TrolleybusL) => {
                if let Some(v) = incoming_force_at(bf, s, i, Side::Left, *c) {
                    out.push((EventKind::CrownDeath { node: i }, v));
                }
            }
            (NodeKind::Cup { c }, Crown::Birdie) => {
                // at base death both incoming forces vanish at the seed; the
                // difference avoids the balance identity `F_R + F_L = 0`
                // which holds trivially for symmetric data
                if let (Some(vr), Some(vl)) = (
                    incoming_force_at(bf, s, i, Side::Right, *c),
                    incoming_force_at(bf, s, i, Side::Left, *c),
                ) {
                    out.push((EventKind::CrownDeath { node: i }, vr - vl));
                }
                if let SolvedNode::Chordal {
                    birdie_ls: Some((lr, ll)),
                    l_top,
                    ..
                } = &s.nodes[i]
                {
                    out.push((
                        EventKind::BirdieSplit { node: i },
                        1e-7 * (1.0 + l_top) - (lr - ll).abs(),
                    ));
                }
            }
            (NodeKind::Arcs { closed: false, .. }, Crown::Full) => {
                if let SolvedNode::Multicup { arcs, .. } = &s.nodes[i] {
                    let (lo, hi) = (arcs.first().unwrap().0, arcs.last().unwrap().1);
                    if lo.is_finite() && hi.is_finite() {
                        out.push((EventKind::MulticupFill { node: i }, (hi - lo) - 2.0 * s.eps));
                    }
                }
            }
            _ => {}
        }
    }
    out
}

struct Status {
    solved: Solved,
    mons: Vec<(EventKind, f64)>,
}

fn status(bf: &BoundaryFunction, pic: &Picture, eps: f64) -> Result<Status, FoliationError> {
    let solved = solve(bf, pic, eps)?;
    let mons = monitors(bf, pic, &solved);
    Ok(Status { solved, mons })
}

/// `Ok` only when the picture solves and no monitor has crossed the
/// reference signs captured at the segment start.
fn clean_status(
    bf: &BoundaryFunction,
    pic: &Picture,
    eps: f64,
    signs: &[f64],
) -> Result<Status, FoliationError> {
    let st = status(bf, pic, eps)?;
    for (k, (_, v)) in st.mons.iter().enumerate() {
        if k < signs.len() && v * signs[k] <= 0.0 {
            return Err(FoliationError::UnknownConfiguration(format!(
                "monitor {k} crossed at eps = {eps}"
            )));
        }
    }
    Ok(st)
}

/// Node rewrite actions applied at a critical point.
#[derive(Debug, Clone)]
enum Action {
    Keep,
    Remove,
    Replace(Node),
    InsertAfter(Node),
    InsertBefore(Node),
}

/// Compute the modified picture from the located events and the last clean
/// solve. Returns the new picture and whether the change is essential.
fn modify(
    _bf: &BoundaryFunction,
    pic: &Picture,
    s: &Solved,
    events: &[EventKind],
    eps: f64,
) -> Result<(Picture, bool), EvolutionError> {
    let n = pic.nodes.len();
    let mut actions: Vec<Action> = vec![Action::Keep; n];
    let mut essential = false;
    let is_angle = |i: usize| matches!(pic.nodes[i].kind, NodeKind::Angle { .. });
    let is_cuplike = |i: usize| !is_angle(i);

    // group the touch events per angle
    let mut touched_left: Vec<bool> = vec![false; n]; // the node's left edge is touched
    let mut touched_right: Vec<bool> = vec![false; n];
    for e in events {
        if let EventKind::Touch { left, right } = e {
            touched_right[*left] = true;
            touched_left[*right] = true;
        }
    }

    for i in 0..n {
        if is_angle(i) && touched_left[i] && touched_right[i] {
            // the angle meets two cups simultaneously: multicup merge with
            // the neighbors, keeping the outer contacts and the angle point
            if i == 0 || i + 1 >= n || !is_cuplike(i - 1) || !is_cuplike(i + 1) {
                return Err(EvolutionError::UnknownCrash {
                    eps,
                    detail: "double touch without chordal neighbors".into(),
                });
            }
            let (al, w, br) = match (&s.nodes[i - 1], &s.nodes[i], &s.nodes[i + 1]) {
                (
                    SolvedNode::Chordal { a_top, .. },
                    SolvedNode::Angle { w, .. },
                    SolvedNode::Chordal { b_top, .. },
                ) => (*a_top, *w, *b_top),
                _ => {
                    return Err(EvolutionError::UnknownCrash {
                        eps,
                        detail: "double touch with non-cup neighbors".into(),
                    })
                }
            };
            let arcs = vec![(al, al), (w, w), (br, br)];
            let closed = br - al <= 2.0 * eps;
            actions[i - 1] = Action::Replace(Node::arcs(arcs, closed));
            actions[i] = Action::Remove;
            actions[i + 1] = Action::Remove;
            essential = true;
        }
    }

    // one-sided touches: angle merges into the neighboring chordal node
    // (a cup touched on both sides stacks both crowns into a birdie)
    for e in events {
        let EventKind::Touch { left, right } = e else { continue };
        let (l, r) = (*left, *right);
        // skip pairs already consumed by a double-touch multicup merge
        if matches!(actions[l], Action::Remove) || matches!(actions[r], Action::Remove) {
            continue;
        }
        let effective = |a: &Action, i: usize| -> Node {
            match a {
                Action::Replace(nn) => nn.clone(),
                _ => pic.nodes[i].clone(),
            }
        };
        if is_cuplike(l) && is_angle(r) {
            // angle on the right end: the node gains a left-incoming crown
            let mut node = effective(&actions[l], l);
            node.crown = match node.crown {
                Crown::Full => Crown::TrolleybusL,
                Crown::TrolleybusR => Crown::Birdie,
                c => {
                    return Err(EvolutionError::UnknownCrash {
                        eps,
                        detail: format!("touch on crown {c:?}"),
                    })
                }
            };
            actions[l] = Action::Replace(node);
            actions[r] = Action::Remove;
            essential = true;
        } else if is_angle(l) && is_cuplike(r) {
            let mut node = effective(&actions[r], r);
            node.crown = match node.crown {
                Crown::Full => Crown::TrolleybusR,
                Crown::TrolleybusL => Crown::Birdie,
                c => {
                    return Err(EvolutionError::UnknownCrash {
                        eps,
                        detail: format!("touch on crown {c:?}"),
                    })
                }
            };
            actions[r] = Action::Replace(node);
            actions[l] = Action::Remove;
            essential = true;
        } else {
            return Err(EvolutionError::UnknownCrash {
                eps,
                detail: format!("touch between nodes {l} and {r} of incompatible kinds"),
            });
        }
    }

    for e in events {
        match e {
            EventKind::CrownDeath { node } => {
                let i = *node;
                match pic.nodes[i].crown {
                    Crown::TrolleybusR | Crown::TrolleybusL => {
                        actions[i] = Action::Remove;
                    }
                    Crown::Birdie => {
                        let c = match pic.nodes[i].kind {
                            NodeKind::Cup { c } => c,
                            _ => {
                                return Err(EvolutionError::UnknownCrash {
                                    eps,
                                    detail: "crown death on a non-cup node".into(),
                                })
                            }
                        };
                        actions[i] = Action::Replace(Node::angle(c));
                    }
                    Crown::Full => {
                        return Err(EvolutionError::UnknownCrash {
                            eps,
                            detail: "crown death on an uncrowned node".into(),
                        })
                    }
                }
                essential = true;
            }
            EventKind::BirdieSplit { node } => {
                let i = *node;
                let (lr, ll, a_top, b_top) = match &s.nodes[i] {
                    SolvedNode::Chordal {
                        birdie_ls: Some((lr, ll)),
                        a_top,
                        b_top,
                        ..
                    } => (*lr, *ll, *a_top, *b_top),
                    _ => {
                        return Err(EvolutionError::UnknownCrash {
                            eps,
                            detail: "birdie split without birdie data".into(),
                        })
                    }
                };
                if lr <= ll {
                    // the right-incoming equation wins: keep the trolleybus
                    // and release an angle at the right chord end
                    let mut nn = pic.nodes[i].clone();
                    nn.crown = Crown::TrolleybusR;
                    actions[i] = Action::Replace(nn);
                    actions.insert(i + 1, Action::InsertAfter(Node::angle(b_top)));
                } else {
                    let mut nn = pic.nodes[i].clone();
                    nn.crown = Crown::TrolleybusL;
                    actions[i] = Action::Replace(nn);
                    actions.insert(i, Action::InsertBefore(Node::angle(a_top)));
                }
            }
            EventKind::MulticupFill { node } => {
                let i = *node;
                let arcs = match &s.nodes[i] {
                    SolvedNode::Multicup { arcs, .. } => arcs.clone(),
                    _ => {
                        return Err(EvolutionError::UnknownCrash {
                            eps,
                            detail: "fill event on a non-multicup node".into(),
                        })
                    }
                };
                let mut nn = pic.nodes[i].clone();
                nn.kind = NodeKind::Arcs { arcs, closed: true };
                actions[i] = Action::Replace(nn);
                essential = true;
            }
            EventKind::Touch { .. } => {}
        }
    }

    // assemble
    let mut nodes = Vec::new();
    let mut src = 0usize;
    for a in actions {
        match a {
            Action::Keep => {
                nodes.push(pic.nodes[src].clone());
                src += 1;
            }
            Action::Remove => src += 1,
            Action::Replace(nn) => {
                nodes.push(nn);
                src += 1;
            }
            Action::InsertAfter(nn) | Action::InsertBefore(nn) => nodes.push(nn),
        }
    }
    Ok((Picture { nodes }, essential))
}

/// Max relative deviation of the candidate between two solved pictures at 50
/// fixed quasi-random strip points.
fn continuity_dev(bf: &BoundaryFunction, before: &Solved, after: &Solved) -> f64 {
    let eps = before.eps.min(after.eps);
    // sampling window around the node extents
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..before.nodes.len() {
        let (a, b) = before.node_span(i);
        if a.is_finite() {
            lo = lo.min(a);
        }
        if b.is_finite() {
            hi = hi.max(b);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = -1.0;
        hi = 1.0;
    }
    lo -= 3.0 * eps + 0.5;
    hi += 3.0 * eps + 0.5;
    let mut dev: f64 = 0.0;
    // low-discrepancy (Weyl) sequence: deterministic and parameter-free
    let (mut s1, mut s2) = (0.5f64, 0.5f64);
    for _ in 0..50 {
        s1 = (s1 + 0.754_877_666_246_692_9).fract();
        s2 = (s2 + 0.569_840_290_998_053_2).fract();
        let x1 = lo + (hi - lo) * s1;
        let x2 = x1 * x1 + (0.999 * s2 + 0.0005) * eps * eps;
        if let (Ok(eb), Ok(ea)) = (before.eval(bf, x1, x2), after.eval(bf, x1, x2)) {
            dev = dev.max((eb.value - ea.value).abs() / (1.0 + eb.value.abs()));
        }
    }
    dev
}

/// Refine a crown-death moment on the exact incoming-force root using the
/// modified picture (solvable on both sides of the death).
fn refine_crown_death(
    bf: &BoundaryFunction,
    after: &Picture,
    before: &Picture,
    node: usize,
    lo: f64,
    hi: f64,
) -> Option<f64> {
    let (c, crown) = match (&before.nodes[node].kind, before.nodes[node].crown) {
        (NodeKind::Cup { c }, crown) => (*c, crown),
        _ => return None,
    };
    let mon = |e: f64| -> f64 {
        let s = match solve(bf, after, e) {
            Ok(s) => s,
            Err(_) => return f64::NAN,
        };
        // in the modified picture the removed node's former neighbors sit at
        // `node-1` (unchanged) and at `node` (removal) or `node+1` (angle)
        let kept = matches!(crown, Crown::Birdie);
        let right_neighbor = if kept { node + 1 } else { node };
        let src_r = match node.checked_sub(1) {
            None => ForceSource::Infinity,
            Some(j) => s
                .emission_right(bf, j)
                .map(|e| e.source)
                .unwrap_or(ForceSource::Infinity),
        };
        let src_l = if right_neighbor >= s.nodes.len() {
            ForceSource::Infinity
        } else {
            s.emission_left(bf, right_neighbor)
                .map(|e| e.source)
                .unwrap_or(ForceSource::Infinity)
        };
        match crown {
            Crown::TrolleybusR => Force::right(src_r, e).eval(bf, c).unwrap_or(f64::NAN),
            Crown::TrolleybusL => Force::left(src_l, e).eval(bf, c).unwrap_or(f64::NAN),
            Crown::Birdie => {
                let r = Force::right(src_r, e).eval(bf, c).unwrap_or(f64::NAN);
                let l = Force::left(src_l, e).eval(bf, c).unwrap_or(f64::NAN);
                r - l
            }
            Crown::Full => f64::NAN,
        }
    };
    let v_lo = mon(lo);
    if !v_lo.is_finite() {
        return None;
    }
    // expand the upper end until the sign flips
    let mut hi_r = hi;
    let mut step = (hi - lo).max(1e-6);
    for _ in 0..48 {
        let v = mon(hi_r);
        if !v.is_finite() {
            return None;
        }
        if v * v_lo <= 0.0 {
            return brent_root(&mon, lo, hi_r, 1e-13 * (1.0 + hi_r)).ok();
        }
        hi_r += step;
        step *= 1.6;
    }
    None
}

/// Find the largest certified starting radius by halving from `eps_target`.
pub fn certified_start(
    bf: &BoundaryFunction,
    eps_target: f64,
) -> Result<(f64, Picture, Solved), EvolutionError> {
    let mut eps = eps_target;
    let mut last = String::new();
    for _ in 0..60 {
        let pic = simple_picture(bf, eps);
        match status(bf, &pic, eps) {
            Ok(st) => {
                let geo_ok = st.mons.iter().all(|(k, v)| match k {
                    EventKind::Touch { .. } | EventKind::MulticupFill { .. } => *v > 0.0,
                    _ => true,
                });
                if geo_ok {
                    let problems = st.solved.check_admissible(bf);
                    if problems.is_empty() {
                        return Ok((eps, pic, st.solved));
                    }
                    last = problems.join("; ");
                } else {
                    last = "figures overlap".into();
                }
            }
            Err(e) => last = e.to_string(),
        }
        eps *= 0.5;
    }
    Err(EvolutionError::StartFailed { eps, detail: last })
}

/// Evolve the picture from a certified simple start up to `eps_target`.
pub fn evolve(bf: &BoundaryFunction, eps_target: f64) -> Result<EvolutionTrace, EvolutionError> {
    let (eps_start, mut pic, mut cur) = certified_start(bf, eps_target)?;
    let mut eps = eps_start;
    let mut signs: Vec<f64> = monitors(bf, &pic, &cur)
        .iter()
        .map(|(_, v)| if *v >= 0.0 { 1.0 } else { -1.0 })
        .collect();
    let mut seg = Segment {
        eps_lo: eps_start,
        eps_hi: eps_start,
        picture: pic.clone(),
        samples: vec![SegmentSample { eps, params: params_of(&cur) }],
    };
    let mut segments = Vec::new();
    let mut criticals = Vec::new();
    let cap = ((64.0 * (eps_target - eps_start)).ceil() as usize).max(16);
    let mut capped = false;

    'outer: while eps < eps_target - 1e-12 {
        // adaptive step limited by the smallest gap
        let min_gap = monitors(bf, &pic, &cur)
            .iter()
            .filter(|(k, _)| matches!(k, EventKind::Touch { .. }))
            .map(|(_, v)| v.abs())
            .fold(f64::INFINITY, f64::min);
        let mut d_eps = eps / 8.0;
        if min_gap.is_finite() {
            d_eps = d_eps.min(min_gap / 4.0);
        }
        d_eps = d_eps.max(1e-7);
        let eps_next = (eps + d_eps).min(eps_target);
        match clean_status(bf, &pic, eps_next, &signs) {
            Ok(st) => {
                eps = eps_next;
                cur = st.solved;
                seg.eps_hi = eps;
                seg.samples.push(SegmentSample { eps, params: params_of(&cur) });
                continue;
            }
            Err(_) => {
                // bisect the event in (eps, eps_next]
                let (mut blo, mut bhi) = (eps, eps_next);
                while bhi - blo > 1e-9 {
                    let mid = 0.5 * (blo + bhi);
                    match clean_status(bf, &pic, mid, &signs) {
                        Ok(st) => {
                            blo = mid;
                            cur = st.solved;
                        }
                        Err(_) => bhi = mid,
                    }
                }
                // identify the events
                let events: Vec<EventKind> = match status(bf, &pic, bhi) {
                    Ok(st) => st
                        .mons
                        .iter()
                        .enumerate()
                        .filter(|(k, (kind, v))| {
                            // crossed monitors, plus touches within roundoff
                            // of zero (simultaneous symmetric crashes)
                            (*k < signs.len() && v * signs[*k] <= 0.0)
                                || (matches!(kind, EventKind::Touch { .. })
                                    && v.abs() <= 1e-7 * (1.0 + bhi))
                        })
                        .map(|(_, (kind, _))| *kind)
                        .collect(),
                    Err(FoliationError::CrownUnsolved { node, .. }) => {
                        vec![EventKind::CrownDeath { node }]
                    }
                    Err(e) => {
                        // a figure ran into a neighbor: pick the smallest
                        // gaps at the last clean radius (ties are
                        // simultaneous symmetric crashes)
                        let candidates: Vec<(EventKind, f64)> = monitors(bf, &pic, &cur)
                            .into_iter()
                            .filter(|(k, _)| matches!(k, EventKind::Touch { .. }))
                            .collect();
                        let vmin = candidates
                            .iter()
                            .map(|(_, v)| v.abs())
                            .fold(f64::INFINITY, f64::min);
                        let picked: Vec<EventKind> = candidates
                            .into_iter()
                            .filter(|(_, v)| v.abs() <= 10.0 * vmin + 1e-12)
                            .map(|(k, _)| k)
                            .collect();
                        if picked.is_empty() {
                            return Err(EvolutionError::UnknownCrash {
                                eps: bhi,
                                detail: e.to_string(),
                            });
                        }
                        picked
                    }
                };
                if events.is_empty() {
                    return Err(EvolutionError::UnknownCrash {
                        eps: bhi,
                        detail: "no monitor explains the failed step".into(),
                    });
                }

                let (after_pic, mut essential) = modify(bf, &pic, &cur, &events, blo)?;
                let mut eps_star = 0.5 * (blo + bhi);
                if let Some(EventKind::CrownDeath { node }) = events
                    .iter()
                    .find(|e| matches!(e, EventKind::CrownDeath { .. }))
                {
                    if let Some(refined) =
                        refine_crown_death(bf, &after_pic, &pic, *node, blo, bhi)
                    {
                        eps_star = refined;
                    }
                }
                if events.iter().all(|e| matches!(e, EventKind::BirdieSplit { .. })) {
                    essential = false;
                }

                // close the current segment
                seg.eps_hi = eps_star;
                segments.push(seg.clone());

                // resume with the modified picture
                let eps_resume = eps_star.max(bhi).min(eps_target);
                let mut after_pic = after_pic;
                let st_after = loop {
                    match status(bf, &after_pic, eps_resume) {
                        Ok(st) => {
                            // immediate desintegration of freshly formed
                            // asymmetric birdies
                            let split: Vec<EventKind> = st
                                .mons
                                .iter()
                                .filter(|(k, v)| {
                                    matches!(k, EventKind::BirdieSplit { .. }) && *v <= 0.0
                                })
                                .map(|(k, _)| *k)
                                .collect();
                            if split.is_empty() {
                                break st;
                            }
                            let (p2, _) = modify(bf, &after_pic, &st.solved, &split, eps_resume)?;
                            after_pic = p2;
                        }
                        Err(e) => {
                            return Err(EvolutionError::UnknownCrash {
                                eps: eps_resume,
                                detail: format!("modified picture does not solve: {e}"),
                            })
                        }
                    }
                };

                let dev = continuity_dev(bf, &cur, &st_after.solved);
                criticals.push(CriticalPoint {
                    eps: eps_star,
                    events: events.iter().map(|e| e.describe()).collect(),
                    essential,
                    before: pic.clone(),
                    after: after_pic.clone(),
                    continuity_dev: dev,
                });
                if criticals.len() >= cap {
                    capped = true;
                    // keep a degenerate final segment so the trace stays valid
                    segments.push(Segment {
                        eps_lo: eps_resume,
                        eps_hi: eps_resume,
                        picture: after_pic.clone(),
                        samples: vec![SegmentSample {
                            eps: eps_resume,
                            params: params_of(&st_after.solved),
                        }],
                    });
                    break 'outer;
                }

                pic = after_pic;
                cur = st_after.solved;
                eps = eps_resume;
                signs = st_after
                    .mons
                    .iter()
                    .map(|(_, v)| if *v >= 0.0 { 1.0 } else { -1.0 })
                    .collect();
                seg = Segment {
                    eps_lo: eps,
                    eps_hi: eps,
                    picture: pic.clone(),
                    samples: vec![SegmentSample { eps, params: params_of(&cur) }],
                };
            }
        }
    }
    if !capped {
        segments.push(seg);
    }
    Ok(EvolutionTrace {
        eps_start,
        eps_target,
        segments,
        criticals,
        capped,
    })
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

    #[test]
    fn exponential_single_band_no_criticals() {
        let bf = single(vec![Term::Exp { a: 1.0, b: 1.0 }], 0.99);
        let trace = evolve(&bf, 0.9).unwrap();
        assert!(trace.criticals.is_empty());
        assert_eq!(trace.segments.len(), 1);
        assert!(trace.final_picture().nodes.is_empty());
    }

    #[test]
    fn pos_quartic_angle_tracks_vertex() {
        let v = 0.3f64;
        let t = Term::Poly(vec![v.powi(4), -4.0 * v.powi(3), 6.0 * v * v, -4.0 * v, 1.0]);
        let bf = single(vec![t.scale(1.0 / 24.0)], 1e6);
        let trace = evolve(&bf, 1.5).unwrap();
        assert!(trace.criticals.is_empty());
        for seg in &trace.segments {
            for s in &seg.samples {
                assert!((s.params[0] - v).abs() < 1e-9, "w drifted: {}", s.params[0]);
            }
        }
    }

    #[test]
    fn quintic_trolleybus_touch_and_death() {
        // f = t^5 + 5 t^4: the angle meets the cup at sqrt(1225/1614), the
        // resulting trolleybus dies at 1
        let bf = single(vec![Term::Poly(vec![0.0, 0.0, 0.0, 0.0, 5.0, 1.0])], 1e6);
        let trace = evolve(&bf, 1.2).unwrap();
        let eps: Vec<f64> = trace.criticals.iter().map(|c| c.eps).collect();
        assert_eq!(eps.len(), 2, "criticals: {eps:?}");
        let e1 = (1225.0f64 / 1614.0).sqrt();
        assert!((eps[0] - e1).abs() < 1e-6, "touch at {} vs {e1}", eps[0]);
        assert!((eps[1] - 1.0).abs() < 1e-6, "death at {} vs 1", eps[1]);
        // after the touch: a single left trolleybus; after the death: empty
        assert_eq!(trace.segments.len(), 3);
        assert_eq!(trace.segments[1].picture.nodes.len(), 1);
        assert_eq!(trace.segments[1].picture.nodes[0].crown, Crown::TrolleybusL);
        assert!(trace.segments[2].picture.nodes.is_empty());
        for c in &trace.criticals {
            assert!(c.essential);
            assert!(c.continuity_dev < 1e-7, "continuity dev {}", c.continuity_dev);
        }
    }

    #[test]
    fn pos_sextic_birdie_criticals() {
        // f''' = t^3 - 3t: angles at ±√3 crash into the cup at 0 at
        // ε₁ = √35/9, the birdie dies at ε₂ = 1/√2
        let bf = single(
            vec![Term::Poly(vec![0.0, 0.0, 0.0, 0.0, -1.0 / 8.0, 0.0, 1.0 / 120.0])],
            1e6,
        );
        let trace = evolve(&bf, 0.8).unwrap();
        let eps: Vec<f64> = trace.criticals.iter().map(|c| c.eps).collect();
        assert_eq!(eps.len(), 2, "criticals: {eps:?}");
        let e1 = 35.0f64.sqrt() / 9.0;
        let e2 = 0.5f64.sqrt();
        assert!((eps[0] - e1).abs() < 1e-6, "touch at {} vs {e1}", eps[0]);
        assert!((eps[1] - e2).abs() < 1e-6, "death at {} vs {e2}", eps[1]);
        assert_eq!(trace.segments[1].picture.nodes[0].crown, Crown::Birdie);
        assert!(matches!(
            trace.segments[2].picture.nodes[0].kind,
            NodeKind::Angle { .. }
        ));
    }

    #[test]
    fn neg_sextic_multicup_criticals() {
        // f''' = 3t - t^3: cups at ±√3 meet the central angle at
        // ε₁ = √(15/8); the multicup fills at ε₃ = √(15/2)
        let bf = single(
            vec![Term::Poly(vec![0.0, 0.0, 0.0, 0.0, 1.0 / 8.0, 0.0, -1.0 / 120.0])],
            1e6,
        );
        let trace = evolve(&bf, 2.9).unwrap();
        let eps: Vec<f64> = trace.criticals.iter().map(|c| c.eps).collect();
        assert_eq!(eps.len(), 2, "criticals: {eps:?}");
        let e1 = (15.0f64 / 8.0).sqrt();
        let e3 = (15.0f64 / 2.0).sqrt();
        assert!((eps[0] - e1).abs() < 1e-6, "merge at {} vs {e1}", eps[0]);
        assert!((eps[1] - e3).abs() < 1e-6, "fill at {} vs {e3}", eps[1]);
        assert!(matches!(
            trace.segments[1].picture.nodes[0].kind,
            NodeKind::Arcs { closed: false, .. }
        ));
        assert!(matches!(
            trace.segments[2].picture.nodes[0].kind,
            NodeKind::Arcs { closed: true, .. }
        ));
    }

    #[test]
    fn segments_are_admissible_inside() {
        let bf = single(vec![Term::Poly(vec![0.0, 0.0, 0.0, 0.0, 5.0, 1.0])], 1e6);
        let trace = evolve(&bf, 1.2).unwrap();
        for seg in &trace.segments {
            if seg.eps_hi - seg.eps_lo < 1e-6 {
                continue;
            }
            for k in 0..8 {
                let e = seg.eps_lo + (seg.eps_hi - seg.eps_lo) * (k as f64 + 0.5) / 8.0;
                let s = solve(&bf, &seg.picture, e).unwrap();
                let problems = s.check_admissible(&bf);
                assert!(problems.is_empty(), "eps={e}: {problems:?}");
            }
        }
    }
}
