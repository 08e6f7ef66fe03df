//! Equivalence relations on principal bundles: isomorphic, locally isomorphic and
//! fiberwise isomorphic, plus brute-force Čech classification for finite groups.
//!
//! Decidable class for local comparisons: pullbacks of the unit bundle of a finite
//! action groupoid over a 1-dimensional base, or cocycle bundles on a common cover
//! graph. Anything else yields `Verdict::Unknown`.
//!
//! Over a 1-d base the stabilizer of `q(b)` is assumed to jump only on a set with
//! empty interior, so a change of the forced matching label across a non-free run
//! of samples is an obstruction.

use crate::config::Tolerances;
use crate::euclid::Point;
use crate::exec::Exec;
use crate::groupoid::{
    FiberDescriptor, FiniteGroup, GroupElem, GroupModel, GroupoidError, PrincipalBundle,
};
use crate::verdict::{Refutation, Verdict};
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

pub use crate::groupoid::{Stabilizer, TotalPoint};

/// Upper bound on enumerated cocycles times coboundary relabelings.
pub const SEARCH_BOUND: u64 = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BundleError {
    #[error("cocycle condition fails: {0}")]
    NotACocycle(String),
    #[error("cover graph is malformed: {0}")]
    BadCoverGraph(String),
    #[error("search space of {0} exceeds the bound")]
    SearchTooLarge(u64),
    #[error(transparent)]
    Groupoid(#[from] GroupoidError),
}

/// Overlap component between pieces `i` and `j`, oriented `i → j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Overlap {
    pub i: usize,
    pub j: usize,
}

/// Triple-overlap component imposing `g[ij]·g[jk] = g[ik]` on overlap indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Triple {
    pub ij: usize,
    pub jk: usize,
    pub ik: usize,
}

/// Nerve data of an open cover of an abstract 1-d base.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoverGraph {
    pub name: String,
    pub pieces: usize,
    pub overlaps: Vec<Overlap>,
    pub triples: Vec<Triple>,
}

impl CoverGraph {
    pub fn new(
        name: impl Into<String>,
        pieces: usize,
        overlaps: Vec<Overlap>,
        triples: Vec<Triple>,
    ) -> Result<Self, BundleError> {
        if pieces == 0 {
            return Err(BundleError::BadCoverGraph("no pieces".into()));
        }
        if let Some(o) = overlaps
            .iter()
            .find(|o| o.i >= pieces || o.j >= pieces || o.i == o.j)
        {
            return Err(BundleError::BadCoverGraph(format!("bad overlap {o:?}")));
        }
        for t in &triples {
            let m = overlaps.len();
            if t.ij >= m || t.jk >= m || t.ik >= m {
                return Err(BundleError::BadCoverGraph(format!("bad triple {t:?}")));
            }
            let (a, b, c) = (&overlaps[t.ij], &overlaps[t.jk], &overlaps[t.ik]);
            if a.j != b.i || a.i != c.i || b.j != c.j {
                return Err(BundleError::BadCoverGraph(format!(
                    "triple {t:?} is not i→j→k"
                )));
            }
        }
        Ok(CoverGraph {
            name: name.into(),
            pieces,
            overlaps,
            triples,
        })
    }

    /// Circle as two arcs whose intersection has two components.
    pub fn circle_two_arcs() -> Self {
        CoverGraph {
            name: "S1(2 arcs)".into(),
            pieces: 2,
            overlaps: vec![Overlap { i: 0, j: 1 }, Overlap { i: 0, j: 1 }],
            triples: vec![],
        }
    }

    /// Circle as `n ≥ 3` arcs, consecutive ones overlapping in one component.
    pub fn circle_arcs(n: usize) -> Result<Self, BundleError> {
        if n < 3 {
            return Err(BundleError::BadCoverGraph(
                "use circle_two_arcs below three arcs".into(),
            ));
        }
        let overlaps = (0..n).map(|i| Overlap { i, j: (i + 1) % n }).collect();
        CoverGraph::new(format!("S1({n} arcs)"), n, overlaps, vec![])
    }

    pub fn interval_single() -> Self {
        CoverGraph {
            name: "I(1 piece)".into(),
            pieces: 1,
            overlaps: vec![],
            triples: vec![],
        }
    }
}

/// Transition functions on each overlap component, as finite-group element indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Cocycle {
    pub graph: Arc<CoverGraph>,
    pub group: Arc<FiniteGroup>,
    pub transitions: Vec<usize>,
}

fn satisfies_cocycle(group: &FiniteGroup, graph: &CoverGraph, g: &[usize]) -> Option<usize> {
    graph
        .triples
        .iter()
        .position(|t| group.mul(g[t.ij], g[t.jk]) != g[t.ik])
}

impl Cocycle {
    pub fn new(
        graph: Arc<CoverGraph>,
        group: Arc<FiniteGroup>,
        transitions: Vec<usize>,
    ) -> Result<Self, BundleError> {
        if transitions.len() != graph.overlaps.len() {
            return Err(BundleError::NotACocycle(format!(
                "{} transitions for {} overlaps",
                transitions.len(),
                graph.overlaps.len()
            )));
        }
        if let Some(&g) = transitions.iter().find(|&&g| g >= group.order()) {
            return Err(BundleError::NotACocycle(format!(
                "{g} is not in {}",
                group.name
            )));
        }
        if let Some(t) = satisfies_cocycle(&group, &graph, &transitions) {
            return Err(BundleError::NotACocycle(format!("{:?}", graph.triples[t])));
        }
        Ok(Cocycle {
            graph,
            group,
            transitions,
        })
    }

    /// `g'_ij = h_i g_ij h_j⁻¹`.
    pub fn relabeled(&self, h: &[usize]) -> Vec<usize> {
        relabel(&self.group, &self.graph, &self.transitions, h)
    }

    /// Lexicographically least member of the coboundary orbit.
    pub fn canonical(&self) -> Vec<usize> {
        canonical(&self.group, &self.graph, &self.transitions)
    }
}

fn relabel(group: &FiniteGroup, graph: &CoverGraph, g: &[usize], h: &[usize]) -> Vec<usize> {
    graph
        .overlaps
        .iter()
        .zip(g)
        .map(|(o, &gij)| group.mul(group.mul(h[o.i], gij), group.inv(h[o.j])))
        .collect()
}

fn digits(mut k: u64, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for d in out.iter_mut() {
        *d = (k % base as u64) as usize;
        k /= base as u64;
    }
    out
}

fn canonical(group: &FiniteGroup, graph: &CoverGraph, g: &[usize]) -> Vec<usize> {
    let n = group.order();
    let relabelings = (n as u64).pow(graph.pieces as u32);
    (0..relabelings)
        .map(|k| relabel(group, graph, g, &digits(k, n, graph.pieces)))
        .min()
        .unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CocycleClass {
    pub representative: Vec<usize>,
    pub members: Vec<Vec<usize>>,
}

/// All cocycles on `graph` with values in `group`, grouped by coboundary orbit.
/// Classes are ordered by representative.
pub fn cocycle_classes(
    group: &FiniteGroup,
    graph: &CoverGraph,
    exec: Exec,
) -> Result<Vec<CocycleClass>, BundleError> {
    let n = group.order() as u64;
    let m = graph.overlaps.len() as u32;
    let total = n
        .checked_pow(m)
        .ok_or(BundleError::SearchTooLarge(u64::MAX))?;
    let work = total.saturating_mul(n.saturating_pow(graph.pieces as u32));
    if work > SEARCH_BOUND {
        return Err(BundleError::SearchTooLarge(work));
    }
    let keyed: Vec<Option<(Vec<usize>, Vec<usize>)>> = exec.map_range(total as usize, |k| {
        let g = digits(k as u64, group.order(), m as usize);
        satisfies_cocycle(group, graph, &g)
            .is_none()
            .then(|| (canonical(group, graph, &g), g))
    });
    let mut classes: BTreeMap<Vec<usize>, Vec<Vec<usize>>> = BTreeMap::new();
    for (rep, g) in keyed.into_iter().flatten() {
        classes.entry(rep).or_default().push(g);
    }
    Ok(classes
        .into_iter()
        .map(|(representative, mut members)| {
            members.sort();
            CocycleClass {
                representative,
                members,
            }
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct CocycleBundle {
    pub name: String,
    pub cocycle: Cocycle,
}

#[derive(Clone, Debug)]
pub enum Bundle {
    Pullback(PrincipalBundle),
    Cocycle(CocycleBundle),
}

impl Bundle {
    pub fn name(&self) -> &str {
        match self {
            Bundle::Pullback(p) => &p.name,
            Bundle::Cocycle(c) => &c.name,
        }
    }
}

/// One piece of a local isomorphism: on `[lo, hi]` the matching sends `(b, γ, x)` to
/// `(b, c·γ, x)` with `c = label`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchPiece {
    pub lo: f64,
    pub hi: f64,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalIsoReport {
    pub verdict: Verdict,
    pub matching: Vec<MatchPiece>,
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Labels `c` with `c·q(b) = q'(b)`; the tolerance scales down with `|q|` so
/// points of tiny norm still register as free.
fn labels_at(p: &PrincipalBundle, q: &PrincipalBundle, b: &[f64], tol: &Tolerances) -> Vec<usize> {
    let g = &p.groupoid;
    let (qb, qpb) = (p.classifying.eval(b), q.classifying.eval(b));
    let scale = sup_norm(&qb).max(sup_norm(&qpb)).min(1.0);
    g.group
        .tested_elements()
        .into_iter()
        .filter_map(|c| {
            let d = sup_dist(&g.act(&c, &qb), &qpb);
            match c {
                GroupElem::Finite(k) if d <= tol.eq_tol * scale => Some(k),
                _ => None,
            }
        })
        .collect()
}

fn pullback_class_check(p: &PrincipalBundle, q: &PrincipalBundle) -> Result<(), String> {
    if p.base().name() != q.base().name() || p.base().samples() != q.base().samples() {
        return Err("bundles have different bases".into());
    }
    if !Arc::ptr_eq(&p.groupoid, &q.groupoid) && p.groupoid.name != q.groupoid.name {
        return Err("bundles come from different groupoids".into());
    }
    if !matches!(p.groupoid.group, GroupModel::Finite(_)) {
        return Err("structure group is not finite".into());
    }
    Ok(())
}

/// Samples of `p`'s base grouped by cell, each sorted along the axis.
fn sorted_cells(p: &PrincipalBundle) -> Vec<Vec<Point>> {
    let base = p.base();
    let mut cells = vec![Vec::new(); base.cells().len()];
    for s in base.samples() {
        if let Some(c) = base.cell_of(s) {
            cells[c].push(s.clone());
        }
    }
    for c in &mut cells {
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
    }
    cells
}

fn obstruction_point(specials: &[Point], lo: f64, hi: f64, nonfree: &[f64]) -> f64 {
    let center = if nonfree.is_empty() {
        0.5 * (lo + hi)
    } else {
        0.5 * (nonfree[0] + nonfree[nonfree.len() - 1])
    };
    specials
        .iter()
        .map(|s| s[0])
        .filter(|&s| s > lo && s < hi)
        .min_by(|a, b| (a - center).abs().total_cmp(&(b - center).abs()))
        .unwrap_or(center)
}

fn local_iso_cell(
    p: &PrincipalBundle,
    q: &PrincipalBundle,
    cell: usize,
    samples: &[Point],
    tol: &Tolerances,
    exec: Exec,
) -> Result<MatchPiece, Refutation> {
    let labels: Vec<Vec<usize>> = exec.map(samples, |b| labels_at(p, q, b, tol));
    if let Some(i) = labels.iter().position(|c| c.is_empty()) {
        return Err(Refutation {
            reason: "fibers are not isomorphic".into(),
            point: samples[i].clone(),
            piece: Some(cell),
            deviation: None,
        });
    }
    let cell_box = &p.base().cells()[cell];
    let mut current: Option<(usize, f64)> = None;
    let mut pending: Vec<usize> = Vec::new();
    for (i, c) in labels.iter().enumerate() {
        if c.len() != 1 {
            pending.push(i);
            continue;
        }
        let label = c[0];
        match current {
            Some((prev, at)) if prev != label => {
                let nonfree: Vec<f64> = pending.iter().map(|&k| samples[k][0]).collect();
                let x = obstruction_point(&p.special_points, at, samples[i][0], &nonfree);
                return Err(Refutation {
                    reason: format!("forced matching label jumps from {prev} to {label}"),
                    point: vec![x],
                    piece: Some(cell),
                    deviation: None,
                });
            }
            _ => {}
        }
        if let Some(&k) = pending.iter().find(|&&k| !labels[k].contains(&label)) {
            return Err(Refutation {
                reason: format!("label {label} is not a matching at a non-free point"),
                point: samples[k].clone(),
                piece: Some(cell),
                deviation: None,
            });
        }
        pending.clear();
        current = Some((label, samples[i][0]));
    }
    let label = match current {
        Some((l, _)) => l,
        None => {
            // No free sample: any label common to all samples.
            let mut common = labels[0].clone();
            for (i, c) in labels.iter().enumerate() {
                common.retain(|l| c.contains(l));
                if common.is_empty() {
                    return Err(Refutation {
                        reason: "no common matching label on a non-free cell".into(),
                        point: samples[i].clone(),
                        piece: Some(cell),
                        deviation: None,
                    });
                }
            }
            common[0]
        }
    };
    Ok(MatchPiece {
        lo: cell_box.lo[0],
        hi: cell_box.hi[0],
        label,
    })
}

/// Locally isomorphic, with an explicit piecewise matching on `Pass`.
pub fn locally_isomorphic(a: &Bundle, b: &Bundle, tol: &Tolerances) -> LocalIsoReport {
    locally_isomorphic_with(a, b, tol, Exec::default())
}

pub fn locally_isomorphic_with(
    a: &Bundle,
    b: &Bundle,
    tol: &Tolerances,
    exec: Exec,
) -> LocalIsoReport {
    let unknown = |r: String| LocalIsoReport {
        verdict: Verdict::unknown(r),
        matching: vec![],
    };
    match (a, b) {
        (Bundle::Cocycle(x), Bundle::Cocycle(y)) => match cocycle_comparable(x, y) {
            // Every cocycle bundle is trivial on each piece of its cover.
            Ok(()) => LocalIsoReport {
                verdict: Verdict::Pass,
                matching: vec![],
            },
            Err(r) => unknown(r),
        },
        (Bundle::Pullback(p), Bundle::Pullback(q)) => {
            if let Err(r) = pullback_class_check(p, q) {
                return unknown(r);
            }
            if p.base().dim() != 1 {
                return unknown("base is not 1-dimensional".into());
            }
            let mut matching = Vec::new();
            for (cell, samples) in sorted_cells(p).iter().enumerate() {
                if samples.is_empty() {
                    continue;
                }
                match local_iso_cell(p, q, cell, samples, tol, exec) {
                    Ok(m) => matching.push(m),
                    Err(r) => {
                        return LocalIsoReport {
                            verdict: Verdict::Refuted(r),
                            matching: vec![],
                        }
                    }
                }
            }
            LocalIsoReport {
                verdict: Verdict::Pass,
                matching,
            }
        }
        _ => unknown("bundles of different kinds".into()),
    }
}

/// Locally isomorphic, computed separately on each piece of a working cover given
/// by sub-intervals of the common base.
pub fn locally_isomorphic_on(
    p: &PrincipalBundle,
    q: &PrincipalBundle,
    pieces: &[(f64, f64)],
    tol: &Tolerances,
) -> Result<Verdict, BundleError> {
    let mut out = Vec::new();
    for (k, &(lo, hi)) in pieces.iter().enumerate() {
        let d = p.base().sub_box(&[(lo, hi)]).map_err(GroupoidError::from)?;
        let (pr, qr) = (p.restrict(d.clone()), q.restrict(d));
        let v = locally_isomorphic(&Bundle::Pullback(pr), &Bundle::Pullback(qr), tol).verdict;
        out.push(v.in_piece(k));
    }
    Ok(Verdict::all(out))
}

fn cocycle_comparable(x: &CocycleBundle, y: &CocycleBundle) -> Result<(), String> {
    if x.cocycle.group.table() != y.cocycle.group.table() {
        return Err("cocycles take values in different groups".into());
    }
    if x.cocycle.graph != y.cocycle.graph {
        return Err("cocycles live on different cover graphs".into());
    }
    Ok(())
}

/// Isomorphic as bundles: one equivariant anchor-preserving matching on each
/// connected cell (pullbacks), or equal coboundary class (cocycles).
pub fn isomorphic(a: &Bundle, b: &Bundle, tol: &Tolerances) -> Verdict {
    match (a, b) {
        (Bundle::Cocycle(x), Bundle::Cocycle(y)) => match cocycle_comparable(x, y) {
            Ok(()) if x.cocycle.canonical() == y.cocycle.canonical() => Verdict::Pass,
            Ok(()) => Verdict::refuted(format!(
                "coboundary classes {:?} and {:?} differ",
                x.cocycle.canonical(),
                y.cocycle.canonical()
            )),
            Err(r) => Verdict::unknown(r),
        },
        (Bundle::Pullback(p), Bundle::Pullback(q)) => {
            if let Err(r) = pullback_class_check(p, q) {
                return Verdict::unknown(r);
            }
            if p.base().dim() != 1 {
                return Verdict::unknown("base is not 1-dimensional");
            }
            for (cell, samples) in sorted_cells(p).iter().enumerate() {
                let Some(first) = samples.first() else {
                    continue;
                };
                let mut common = labels_at(p, q, first, tol);
                for s in samples {
                    let c = labels_at(p, q, s, tol);
                    common.retain(|l| c.contains(l));
                    if common.is_empty() {
                        return Verdict::refuted_at("no global matching label", s).in_piece(cell);
                    }
                }
            }
            Verdict::Pass
        }
        _ => Verdict::unknown("bundles of different kinds"),
    }
}

/// Fibers over every base sample are equivariantly isomorphic, decided by orbit
/// equality of anchors.
pub fn fiberwise_isomorphic(a: &Bundle, b: &Bundle, tol: &Tolerances) -> Verdict {
    fiberwise_isomorphic_with(a, b, tol, Exec::default())
}

pub fn fiberwise_isomorphic_with(a: &Bundle, b: &Bundle, tol: &Tolerances, exec: Exec) -> Verdict {
    match (a, b) {
        (Bundle::Cocycle(x), Bundle::Cocycle(y)) => match cocycle_comparable(x, y) {
            // Every fiber is a Γ-torsor over the single point of G₀.
            Ok(()) => Verdict::Pass,
            Err(r) => Verdict::unknown(r),
        },
        (Bundle::Pullback(p), Bundle::Pullback(q)) => {
            if p.base().samples() != q.base().samples() {
                return Verdict::unknown("bundles have different bases");
            }
            let dist = match p.groupoid.orbit_distance() {
                Ok(d) => d,
                Err(e) => return Verdict::unknown(e.to_string()),
            };
            let samples = p.base().samples();
            let hit = exec.find_first(samples.len(), |i| {
                let b = &samples[i];
                let (x, y) = (p.classifying.eval(b), q.classifying.eval(b));
                let d = dist(
                    &crate::diffeology::Element::point(x),
                    &crate::diffeology::Element::point(y),
                );
                (d > tol.eq_tol).then_some(d)
            });
            match hit {
                None => Verdict::Pass,
                Some((i, d)) => Verdict::Refuted(Refutation {
                    reason: "anchors lie in different orbits".into(),
                    point: samples[i].clone(),
                    piece: None,
                    deviation: Some(d),
                }),
            }
        }
        _ => Verdict::unknown("bundles of different kinds"),
    }
}

/// Exhaustive search for an equivariant, anchor-preserving bijection between two
/// finite fibers. `None` when either fiber is not finite.
pub fn gamma_set_isomorphic(
    p: &PrincipalBundle,
    q: &PrincipalBundle,
    b: &[f64],
    tol: &Tolerances,
) -> Result<Option<bool>, GroupoidError> {
    let (FiberDescriptor::Finite { points: fp, .. }, FiberDescriptor::Finite { points: fq, .. }) =
        (p.fiber(b, tol)?, q.fiber(b, tol)?)
    else {
        return Ok(None);
    };
    if fp.len() != fq.len() {
        return Ok(Some(false));
    }
    let deltas = p.groupoid.group.tested_elements();
    let index_of = |pts: &[TotalPoint], t: &TotalPoint| {
        pts.iter()
            .position(|s| s.gamma == t.gamma && sup_dist(&s.anchor, &t.anchor) <= tol.eq_tol)
    };
    // act[d][i]: index of fp[i]·deltas[d] in fp (same for fq).
    let table = |bundle: &PrincipalBundle, pts: &[TotalPoint]| -> Option<Vec<Vec<usize>>> {
        deltas
            .iter()
            .map(|d| {
                pts.iter()
                    .map(|t| index_of(pts, &bundle.act_right(t, d)))
                    .collect()
            })
            .collect()
    };
    let (Some(ap), Some(aq)) = (table(p, &fp), table(q, &fq)) else {
        return Ok(Some(false));
    };
    let n = fp.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let ok = |perm: &[usize]| {
        (0..n).all(|i| sup_dist(&fp[i].anchor, &fq[perm[i]].anchor) <= tol.eq_tol)
            && ap
                .iter()
                .zip(&aq)
                .all(|(rp, rq)| (0..n).all(|i| perm[rp[i]] == rq[perm[i]]))
    };
    Ok(Some(heap_permutations(&mut perm, &ok)))
}

fn heap_permutations(a: &mut [usize], ok: &dyn Fn(&[usize]) -> bool) -> bool {
    let n = a.len();
    let mut c = vec![0; n];
    if ok(a) {
        return true;
    }
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            if ok(a) {
                return true;
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    false
}

/// Partition of a bundle list. Indices whose comparison came back `Unknown` form
/// flagged singleton classes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Partition {
    pub classes: Vec<Vec<usize>>,
    pub unknown: Vec<usize>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_of(&self, i: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(&i))
    }

    /// Every class of `self` lies inside a class of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.classes.iter().all(|c| {
            let k = coarser.class_of(c[0]);
            k.is_some() && c.iter().all(|&i| coarser.class_of(i) == k)
        })
    }
}

pub fn partition_by(bundles: &[Bundle], rel: impl Fn(&Bundle, &Bundle) -> Verdict) -> Partition {
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut unknown = Vec::new();
    'outer: for (i, b) in bundles.iter().enumerate() {
        for class in classes.iter_mut() {
            if unknown.contains(&class[0]) {
                continue;
            }
            match rel(&bundles[class[0]], b) {
                Verdict::Pass => {
                    class.push(i);
                    continue 'outer;
                }
                Verdict::Refuted(_) => {}
                Verdict::Unknown { .. } => {
                    unknown.push(i);
                    classes.push(vec![i]);
                    continue 'outer;
                }
            }
        }
        classes.push(vec![i]);
    }
    Partition { classes, unknown }
}

pub fn isomorphism_classes(bundles: &[Bundle], tol: &Tolerances) -> Partition {
    partition_by(bundles, |a, b| isomorphic(a, b, tol))
}

pub fn discretization_classes(bundles: &[Bundle], tol: &Tolerances) -> Partition {
    partition_by(bundles, |a, b| locally_isomorphic(a, b, tol).verdict)
}

pub fn coarse_classes(bundles: &[Bundle], tol: &Tolerances) -> Partition {
    partition_by(bundles, |a, b| fiberwise_isomorphic(a, b, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euclid::{Domain, SmoothEuclMap};
    use crate::expr::catalog;
    use crate::groupoid::{pullback_unit_bundle, ActionGroupoid, ActionKind};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn refl() -> Arc<ActionGroupoid> {
        Arc::new(
            ActionGroupoid::new(
                "refl",
                GroupModel::Finite(FiniteGroup::cyclic(2)),
                Domain::interval(-4.0, 4.0).unwrap(),
                ActionKind::Reflection,
                None,
                &tol(),
            )
            .unwrap(),
        )
    }

    fn pull(exprs: Vec<crate::expr::ScalarExpr>, name: &str, base: Domain) -> PrincipalBundle {
        let q = SmoothEuclMap::from_exprs(name, base, exprs).unwrap();
        pullback_unit_bundle(&refl(), &q, &tol())
            .unwrap()
            .with_special_points(vec![vec![0.0]])
    }

    fn p1() -> PrincipalBundle {
        pull(
            catalog::odd_profile(),
            "p1",
            Domain::interval(-1.0, 1.0).unwrap(),
        )
    }

    fn p2() -> PrincipalBundle {
        pull(
            catalog::negated_profile(),
            "p2",
            Domain::interval(-1.0, 1.0).unwrap(),
        )
    }

    #[test]
    fn z2_two_arc_classes() {
        let g = FiniteGroup::cyclic(2);
        let cls = cocycle_classes(&g, &CoverGraph::circle_two_arcs(), Exec::default()).unwrap();
        assert_eq!(cls.len(), 2);
        assert_eq!(cls[0].members, vec![vec![0, 0], vec![1, 1]]);
        assert_eq!(cls[1].members, vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn cocycle_class_counts() {
        let two = CoverGraph::circle_two_arcs();
        let count = |g: &FiniteGroup, c: &CoverGraph| {
            cocycle_classes(g, c, Exec::Sequential).unwrap().len()
        };
        assert_eq!(count(&FiniteGroup::cyclic(3), &two), 3);
        assert_eq!(
            count(&FiniteGroup::cyclic(2), &CoverGraph::interval_single()),
            1
        );
        // Conjugacy classes of S3.
        assert_eq!(count(&FiniteGroup::symmetric3(), &two), 3);
        assert_eq!(
            count(
                &FiniteGroup::cyclic(4),
                &CoverGraph::circle_arcs(3).unwrap()
            ),
            4
        );
    }

    #[test]
    fn triple_overlaps_constrain_cocycles() {
        // Three pieces with all pairwise overlaps and one triple: a contractible nerve.
        let graph = CoverGraph::new(
            "tri",
            3,
            vec![
                Overlap { i: 0, j: 1 },
                Overlap { i: 1, j: 2 },
                Overlap { i: 0, j: 2 },
            ],
            vec![Triple {
                ij: 0,
                jk: 1,
                ik: 2,
            }],
        )
        .unwrap();
        let g = FiniteGroup::cyclic(3);
        let cls = cocycle_classes(&g, &graph, Exec::default()).unwrap();
        assert_eq!(cls.len(), 1);
        assert_eq!(cls[0].members.len(), 9);
        let bad = Cocycle::new(Arc::new(graph), Arc::new(g), vec![1, 1, 0]);
        assert!(matches!(bad, Err(BundleError::NotACocycle(_))));
    }

    #[test]
    fn reflection_example_verdicts() {
        let (a, b) = (Bundle::Pullback(p1()), Bundle::Pullback(p2()));
        assert!(fiberwise_isomorphic(&a, &b, &tol()).is_pass());
        let r = locally_isomorphic(&a, &b, &tol());
        let w = r.verdict.refutation().expect("refuted");
        assert!(w.point[0].abs() <= 1e-3, "{w:?}");
        assert!(isomorphic(&a, &b, &tol()).is_refuted());
        assert!(locally_isomorphic(&a, &a, &tol()).verdict.is_pass());
    }

    #[test]
    fn obstruction_found_without_declared_special_point() {
        let mut a = p1();
        let mut b = p2();
        a.special_points.clear();
        b.special_points.clear();
        let r = locally_isomorphic(&Bundle::Pullback(a), &Bundle::Pullback(b), &tol());
        assert!(r.verdict.refutation().unwrap().point[0].abs() < 0.1);
    }

    #[test]
    fn positive_half_is_locally_isomorphic_by_label_swap() {
        let half = Domain::interval(0.0, 1.0).unwrap();
        let a = pull(catalog::odd_profile(), "p1", half.clone());
        let b = pull(catalog::negated_profile(), "p2", half);
        let r = locally_isomorphic(&Bundle::Pullback(a), &Bundle::Pullback(b), &tol());
        assert!(r.verdict.is_pass());
        assert_eq!(
            r.matching,
            vec![MatchPiece {
                lo: 0.0,
                hi: 1.0,
                label: 1
            }]
        );
    }

    #[test]
    fn different_orbits_refuted_everywhere() {
        let base = Domain::interval(-1.0, 1.0).unwrap();
        let a = pull(catalog::constant(&[1.0]), "one", base.clone());
        let b = pull(catalog::constant(&[2.0]), "two", base.clone());
        for s in base.samples() {
            let pa = a.restrict(base.sub_box(&[(s[0] - 1e-3, s[0] + 1e-3)]).unwrap());
            let pb = b.restrict(base.sub_box(&[(s[0] - 1e-3, s[0] + 1e-3)]).unwrap());
            assert!(
                fiberwise_isomorphic(&Bundle::Pullback(pa), &Bundle::Pullback(pb), &tol())
                    .is_refuted()
            );
        }
    }

    #[test]
    fn refinement_invariance_on_reflection_base() {
        let (a, b) = (p1(), p2());
        let coarse = locally_isomorphic_on(&a, &b, &[(-1.0, 0.3), (-0.3, 1.0)], &tol()).unwrap();
        let fine = locally_isomorphic_on(
            &a,
            &b,
            &[(-1.0, -0.4), (-0.5, 0.2), (-0.1, 0.6), (0.5, 1.0)],
            &tol(),
        )
        .unwrap();
        assert!(coarse.is_refuted() && fine.is_refuted());
        assert!(coarse.refutation().unwrap().point[0].abs() <= 1e-3);
        assert!(fine.refutation().unwrap().point[0].abs() <= 1e-3);
        let away = locally_isomorphic_on(&a, &b, &[(0.1, 0.6), (0.5, 1.0)], &tol()).unwrap();
        assert!(away.is_pass());
    }

    #[test]
    fn gamma_set_fallback_agrees_with_orbit_test() {
        let base = Domain::interval(-1.0, 1.0).unwrap();
        let bundles = [
            p1(),
            p2(),
            pull(catalog::constant(&[1.0]), "one", base.clone()),
            pull(catalog::constant(&[-1.0]), "minus_one", base.clone()),
            pull(catalog::constant(&[2.0]), "two", base.clone()),
        ];
        for x in &bundles {
            for y in &bundles {
                for s in base.samples().iter().step_by(5) {
                    let orbit = x
                        .groupoid
                        .same_orbit(&x.classifying.eval(s), &y.classifying.eval(s), &tol())
                        .unwrap();
                    assert_eq!(gamma_set_isomorphic(x, y, s, &tol()).unwrap(), Some(orbit));
                }
            }
        }
    }

    fn bz(n: usize) -> Vec<Bundle> {
        let g = Arc::new(FiniteGroup::cyclic(n));
        let graph = Arc::new(CoverGraph::circle_two_arcs());
        cocycle_classes(&g, &graph, Exec::default())
            .unwrap()
            .into_iter()
            .enumerate()
            .map(|(k, c)| {
                Bundle::Cocycle(CocycleBundle {
                    name: format!("c{k}"),
                    cocycle: Cocycle::new(graph.clone(), g.clone(), c.representative).unwrap(),
                })
            })
            .collect()
    }

    #[test]
    fn gerbe_partitions() {
        for n in [2, 3] {
            let bs = bz(n);
            let iso = isomorphism_classes(&bs, &tol());
            let disc = discretization_classes(&bs, &tol());
            let coarse = coarse_classes(&bs, &tol());
            assert_eq!(iso.len(), n);
            assert_eq!(disc.len(), 1);
            assert_eq!(coarse.len(), 1);
            assert!(iso.refines(&disc) && disc.refines(&coarse));
        }
    }

    #[test]
    fn reflection_partitions() {
        let bs = vec![
            Bundle::Pullback(p1()),
            Bundle::Pullback(p2()),
            Bundle::Pullback(p1()),
        ];
        let iso = isomorphism_classes(&bs, &tol());
        let disc = discretization_classes(&bs, &tol());
        let coarse = coarse_classes(&bs, &tol());
        assert_eq!(disc.classes, vec![vec![0, 2], vec![1]]);
        assert_eq!(coarse.classes, vec![vec![0, 1, 2]]);
        assert!(iso.refines(&disc) && disc.refines(&coarse));
    }

    #[test]
    fn mixed_kinds_are_unknown_singletons() {
        let mut bs = bz(2);
        bs.push(Bundle::Pullback(p1()));
        let disc = discretization_classes(&bs, &tol());
        assert_eq!(disc.unknown, vec![2]);
        assert_eq!(disc.classes, vec![vec![0, 1], vec![2]]);
    }
}
