//! Action groupoids `Γ × G₀ ⇉ G₀`, their orbit spaces, and pullbacks of the unit
//! bundle `t: G₁ → G₀` along maps into `G₀`.

use crate::config::Tolerances;
use crate::diffeology::{
    manifold_space, quotient, DiffeologicalSpace, DiffeologyError, Element, ElementDistance, Plot,
    PlotWitness,
};
use crate::euclid::{Domain, EuclidError, Point, SmoothEuclMap};
use crate::verdict::{Refutation, Verdict};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupoidError {
    #[error("not a group: {0}")]
    NotAGroup(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("orbit relation of a circle action cannot be decided without a declared invariant")]
    OrbitEqUndecided,
    #[error("empty fiber over {0:?}")]
    EmptyFiber(Point),
    #[error("no section over {0}")]
    NoSection(String),
    #[error(transparent)]
    Diffeology(#[from] DiffeologyError),
    #[error(transparent)]
    Euclid(#[from] EuclidError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum GroupElem {
    Finite(usize),
    Angle(f64),
}

/// Finite group given by its multiplication table `table[a][b] = a·b`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteGroup {
    pub name: String,
    table: Vec<Vec<usize>>,
    identity: usize,
    inverse: Vec<usize>,
}

impl FiniteGroup {
    pub fn from_table(
        name: impl Into<String>,
        table: Vec<Vec<usize>>,
    ) -> Result<Self, GroupoidError> {
        let n = table.len();
        if n == 0
            || table
                .iter()
                .any(|r| r.len() != n || r.iter().any(|&x| x >= n))
        {
            return Err(GroupoidError::NotAGroup(
                "table is not square over 0..n".into(),
            ));
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|a| table[e][a] == a && table[a][e] == a))
            .ok_or_else(|| GroupoidError::NotAGroup("no identity".into()))?;
        let inverse = (0..n)
            .map(|a| {
                (0..n)
                    .find(|&b| table[a][b] == identity && table[b][a] == identity)
                    .ok_or_else(|| GroupoidError::NotAGroup(format!("{a} has no inverse")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return Err(GroupoidError::NotAGroup(format!(
                            "associativity fails on ({a},{b},{c})"
                        )));
                    }
                }
            }
        }
        Ok(FiniteGroup {
            name: name.into(),
            table,
            identity,
            inverse,
        })
    }

    pub fn cyclic(n: usize) -> Self {
        let table = (0..n)
            .map(|a| (0..n).map(|b| (a + b) % n).collect())
            .collect();
        FiniteGroup::from_table(format!("Z{n}"), table).expect("cyclic table is a group")
    }

    /// The symmetric group on three letters, elements as permutations in lexicographic order.
    pub fn symmetric3() -> Self {
        let perms: Vec<[usize; 3]> = vec![
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let idx = |p: [usize; 3]| perms.iter().position(|q| *q == p).unwrap();
        let table = perms
            .iter()
            .map(|a| {
                perms
                    .iter()
                    .map(|b| idx([a[b[0]], a[b[1]], a[b[2]]]))
                    .collect()
            })
            .collect();
        FiniteGroup::from_table("S3", table).expect("S3 table is a group")
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }

    pub fn is_abelian(&self) -> bool {
        (0..self.order()).all(|a| (0..self.order()).all(|b| self.mul(a, b) == self.mul(b, a)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GroupModel {
    Finite(FiniteGroup),
    /// `SO(2)` as angles mod 2π; `grid` angles are used wherever elements are sampled.
    Circle {
        grid: usize,
    },
}

fn wrap_angle(a: f64) -> f64 {
    a.rem_euclid(TAU)
}

impl GroupModel {
    pub fn circle() -> Self {
        GroupModel::Circle { grid: 32 }
    }

    pub fn name(&self) -> String {
        match self {
            GroupModel::Finite(g) => g.name.clone(),
            GroupModel::Circle { .. } => "SO(2)".into(),
        }
    }

    pub fn identity(&self) -> GroupElem {
        match self {
            GroupModel::Finite(g) => GroupElem::Finite(g.identity()),
            GroupModel::Circle { .. } => GroupElem::Angle(0.0),
        }
    }

    pub fn compose(&self, a: &GroupElem, b: &GroupElem) -> GroupElem {
        match (self, a, b) {
            (GroupModel::Finite(g), GroupElem::Finite(x), GroupElem::Finite(y)) => {
                GroupElem::Finite(g.mul(*x, *y))
            }
            (GroupModel::Circle { .. }, GroupElem::Angle(x), GroupElem::Angle(y)) => {
                GroupElem::Angle(wrap_angle(x + y))
            }
            _ => panic!("group element does not belong to {}", self.name()),
        }
    }

    pub fn inverse(&self, a: &GroupElem) -> GroupElem {
        match (self, a) {
            (GroupModel::Finite(g), GroupElem::Finite(x)) => GroupElem::Finite(g.inv(*x)),
            (GroupModel::Circle { .. }, GroupElem::Angle(x)) => GroupElem::Angle(wrap_angle(-x)),
            _ => panic!("group element does not belong to {}", self.name()),
        }
    }

    /// All elements of a finite group, or the angle grid of the circle.
    pub fn tested_elements(&self) -> Vec<GroupElem> {
        match self {
            GroupModel::Finite(g) => (0..g.order()).map(GroupElem::Finite).collect(),
            GroupModel::Circle { grid } => (0..*grid)
                .map(|k| GroupElem::Angle(TAU * k as f64 / *grid as f64))
                .collect(),
        }
    }

    pub fn order(&self) -> Option<usize> {
        match self {
            GroupModel::Finite(g) => Some(g.order()),
            GroupModel::Circle { .. } => None,
        }
    }

    pub fn as_finite(&self) -> Option<&FiniteGroup> {
        match self {
            GroupModel::Finite(g) => Some(g),
            GroupModel::Circle { .. } => None,
        }
    }

    fn elem_distance(&self, a: &GroupElem, b: &GroupElem) -> f64 {
        match (a, b) {
            (GroupElem::Finite(x), GroupElem::Finite(y)) => {
                if x == y {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            (GroupElem::Angle(x), GroupElem::Angle(y)) => {
                let d = wrap_angle(x - y);
                d.min(TAU - d)
            }
            _ => f64::INFINITY,
        }
    }

    /// Group axioms: exhaustive for finite tables (already checked on construction),
    /// sampled triples for the circle.
    pub fn check_axioms(&self, tol: &Tolerances) -> Verdict {
        let els = self.tested_elements();
        let e = self.identity();
        for a in &els {
            if self.elem_distance(&self.compose(&e, a), a) > tol.eq_tol
                || self.elem_distance(&self.compose(a, &self.inverse(a)), &e) > tol.eq_tol
            {
                return Verdict::refuted(format!("identity/inverse fails at {a:?}"));
            }
            for b in els.iter().step_by(3) {
                for c in els.iter().step_by(5) {
                    let l = self.compose(&self.compose(a, b), c);
                    let r = self.compose(a, &self.compose(b, c));
                    if self.elem_distance(&l, &r) > tol.eq_tol {
                        return Verdict::refuted(format!(
                            "associativity fails at {a:?},{b:?},{c:?}"
                        ));
                    }
                }
            }
        }
        Verdict::Pass
    }
}

/// Linear actions from the fixed catalog.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    /// Order-two group flipping the first coordinate; on ℝ this is `x ↦ ±x`.
    Reflection,
    /// Order-two group acting by `v ↦ ±v`.
    Scaling,
    /// Rotations of the plane: by angle for the circle, by `2πk/n` for `Z_n`.
    Rotation,
    Trivial,
}

/// Orbit invariant a scenario may declare to decide orbit equality exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbitInvariant {
    Norm,
}

/// Arrow `(γ, x): x → γ·x` of an action groupoid.
#[derive(Clone, Debug, PartialEq)]
pub struct Arrow {
    pub gamma: GroupElem,
    pub x: Point,
}

#[derive(Clone, Debug)]
pub struct ActionGroupoid {
    pub name: String,
    pub group: GroupModel,
    pub space: Domain,
    pub kind: ActionKind,
    pub invariant: Option<OrbitInvariant>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

impl ActionGroupoid {
    pub fn new(
        name: impl Into<String>,
        group: GroupModel,
        space: Domain,
        kind: ActionKind,
        invariant: Option<OrbitInvariant>,
        tol: &Tolerances,
    ) -> Result<Self, GroupoidError> {
        let g = ActionGroupoid {
            name: name.into(),
            group,
            space,
            kind,
            invariant,
        };
        match (kind, &g.group) {
            (ActionKind::Reflection | ActionKind::Scaling, GroupModel::Finite(f))
                if f.order() == 2 => {}
            (ActionKind::Reflection | ActionKind::Scaling, _) => {
                return Err(GroupoidError::InvalidAction(format!(
                    "{kind:?} needs a group of order two"
                )))
            }
            (ActionKind::Rotation, _) if g.space.dim() != 2 => {
                return Err(GroupoidError::InvalidAction(
                    "rotation acts on the plane".into(),
                ))
            }
            _ => {}
        }
        if let Verdict::Refuted(r) = g.group.check_axioms(tol) {
            return Err(GroupoidError::NotAGroup(r.reason));
        }
        if let Verdict::Refuted(r) = g.check_action_axioms(tol) {
            return Err(GroupoidError::InvalidAction(r.reason));
        }
        Ok(g)
    }

    /// Matrix of `x ↦ γ·x`.
    pub fn matrix(&self, gamma: &GroupElem) -> DMatrix<f64> {
        let n = self.space.dim();
        let id = DMatrix::<f64>::identity(n, n);
        let nontrivial = *gamma != self.group.identity();
        match (self.kind, gamma) {
            (ActionKind::Trivial, _) => id,
            (ActionKind::Reflection, _) => {
                let mut m = id;
                if nontrivial {
                    m[(0, 0)] = -1.0;
                }
                m
            }
            (ActionKind::Scaling, _) => {
                if nontrivial {
                    -id
                } else {
                    id
                }
            }
            (ActionKind::Rotation, g) => {
                let theta = match (g, &self.group) {
                    (GroupElem::Angle(a), _) => *a,
                    (GroupElem::Finite(k), GroupModel::Finite(f)) => {
                        TAU * *k as f64 / f.order() as f64
                    }
                    _ => 0.0,
                };
                let (s, c) = theta.sin_cos();
                DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
            }
        }
    }

    pub fn act(&self, gamma: &GroupElem, x: &[f64]) -> Point {
        (self.matrix(gamma) * DVector::from_column_slice(x))
            .iter()
            .copied()
            .collect()
    }

    /// `act(γ, ·)` as a smooth self-map of `G₀` with analytic jacobian.
    pub fn act_map(&self, gamma: &GroupElem) -> SmoothEuclMap {
        SmoothEuclMap::linear(
            format!("act({gamma:?})"),
            self.space.clone(),
            self.matrix(gamma),
        )
    }

    pub fn source(&self, a: &Arrow) -> Point {
        a.x.clone()
    }

    pub fn target(&self, a: &Arrow) -> Point {
        self.act(&a.gamma, &a.x)
    }

    pub fn unit(&self, x: &[f64]) -> Arrow {
        Arrow {
            gamma: self.group.identity(),
            x: x.to_vec(),
        }
    }

    /// `second ∘ first`, defined when `target(first) = source(second)`.
    pub fn compose(&self, first: &Arrow, second: &Arrow, tol: &Tolerances) -> Option<Arrow> {
        (sup_dist(&self.target(first), &second.x) <= tol.eq_tol).then(|| Arrow {
            gamma: self.group.compose(&second.gamma, &first.gamma),
            x: first.x.clone(),
        })
    }

    pub fn inverse_arrow(&self, a: &Arrow) -> Arrow {
        Arrow {
            gamma: self.group.inverse(&a.gamma),
            x: self.target(a),
        }
    }

    /// Arrows `Γ_tested × samples(G₀)`.
    pub fn arrow_samples(&self) -> Vec<Arrow> {
        let els = self.group.tested_elements();
        self.space
            .samples()
            .iter()
            .flat_map(|x| {
                els.iter().map(move |g| Arrow {
                    gamma: g.clone(),
                    x: x.clone(),
                })
            })
            .collect()
    }

    pub fn check_action_axioms(&self, tol: &Tolerances) -> Verdict {
        let els = self.group.tested_elements();
        let e = self.group.identity();
        for x in self.space.samples().iter().step_by(4) {
            if sup_dist(&self.act(&e, x), x) > tol.eq_tol {
                return Verdict::refuted_at("identity does not act trivially", x);
            }
            for a in &els {
                for b in els.iter().step_by(3) {
                    let lhs = self.act(a, &self.act(b, x));
                    let rhs = self.act(&self.group.compose(a, b), x);
                    if sup_dist(&lhs, &rhs) > tol.eq_tol {
                        return Verdict::refuted_at(
                            format!("act({a:?}, act({b:?}, x)) ≠ act({a:?}{b:?}, x)"),
                            x,
                        );
                    }
                }
            }
        }
        Verdict::Pass
    }

    /// Distance whose zero set is the orbit relation.
    pub fn orbit_distance(&self) -> Result<ElementDistance, GroupoidError> {
        match (&self.group, self.invariant) {
            (_, Some(OrbitInvariant::Norm)) => Ok(Arc::new(|a: &Element, b: &Element| {
                (norm(&a.cont) - norm(&b.cont)).abs()
            })),
            (GroupModel::Finite(_), None) => {
                let me = self.clone();
                let els = self.group.tested_elements();
                Ok(Arc::new(move |a: &Element, b: &Element| {
                    els.iter()
                        .map(|g| sup_dist(&me.act(g, &a.cont), &b.cont))
                        .fold(f64::INFINITY, f64::min)
                }))
            }
            (GroupModel::Circle { .. }, None) => Err(GroupoidError::OrbitEqUndecided),
        }
    }

    pub fn same_orbit(
        &self,
        x: &[f64],
        y: &[f64],
        tol: &Tolerances,
    ) -> Result<bool, GroupoidError> {
        let d = self.orbit_distance()?;
        Ok(d(&Element::point(x.to_vec()), &Element::point(y.to_vec())) <= tol.eq_tol)
    }

    /// Stabilizer of `x` among the tested group elements.
    pub fn stabilizer(&self, x: &[f64], tol: &Tolerances) -> Stabilizer {
        let els = self.group.tested_elements();
        let fixing = els
            .iter()
            .filter(|g| sup_dist(&self.act(g, x), x) <= tol.eq_tol)
            .count();
        match (fixing, &self.group) {
            (1, _) => Stabilizer::Trivial,
            (k, GroupModel::Circle { grid }) if k == *grid => Stabilizer::Full,
            (k, _) => Stabilizer::Finite(k),
        }
    }
}

/// Stabilizer descriptor; `Finite(k)` counts tested elements fixing the point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Stabilizer {
    Trivial,
    Finite(usize),
    Full,
}

/// Orbit space `G₀/G₁` with the quotient diffeology.
pub fn orbit_space(
    g: &ActionGroupoid,
    tol: &Tolerances,
) -> Result<DiffeologicalSpace, GroupoidError> {
    let base = manifold_space(&g.space);
    let dist = g.orbit_distance()?;
    Ok(quotient(&base, dist, &format!("π_{}", g.name), tol)?)
}

/// One point `(b, γ, x)` of a total space, with `q(b) = γ·x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TotalPoint {
    pub gamma: GroupElem,
    pub anchor: Point,
}

/// Fiber `ρ⁻¹(b)` as a Γ-set with anchors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum FiberDescriptor {
    /// Exhaustive for finite groups.
    Finite {
        base_point: Point,
        points: Vec<TotalPoint>,
    },
    /// Circle fibers: anchor orbit point and its stabilizer.
    Implicit {
        base_point: Point,
        orbit_point: Point,
        stabilizer: Stabilizer,
    },
}

impl FiberDescriptor {
    pub fn base_point(&self) -> &[f64] {
        match self {
            FiberDescriptor::Finite { base_point, .. }
            | FiberDescriptor::Implicit { base_point, .. } => base_point,
        }
    }
}

/// Pullback `q*(t: G₁ → G₀)` of the unit bundle.
#[derive(Clone)]
pub struct PrincipalBundle {
    pub name: String,
    pub groupoid: Arc<ActionGroupoid>,
    pub classifying: SmoothEuclMap,
    /// Base points where the scenario expects the stabilizer to jump.
    pub special_points: Vec<Point>,
}

impl fmt::Debug for PrincipalBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "PrincipalBundle({} = {}*t over {})",
            self.name,
            self.classifying.name(),
            self.base().name()
        )
    }
}

impl PrincipalBundle {
    pub fn base(&self) -> &Domain {
        self.classifying.domain()
    }

    /// `ρ(b, γ, x) = b`.
    pub fn rho<'a>(&self, b: &'a [f64], _p: &TotalPoint) -> &'a [f64] {
        b
    }

    /// `α(b, γ, x) = x`.
    pub fn anchor<'a>(&self, p: &'a TotalPoint) -> &'a [f64] {
        &p.anchor
    }

    /// Right action of `δ ∈ Γ`: `(b, γ, x)·δ = (b, γδ, δ⁻¹x)`.
    pub fn act_right(&self, p: &TotalPoint, delta: &GroupElem) -> TotalPoint {
        let g = &self.groupoid;
        TotalPoint {
            gamma: g.group.compose(&p.gamma, delta),
            anchor: g.act(&g.group.inverse(delta), &p.anchor),
        }
    }

    pub fn satisfies_equation(&self, b: &[f64], p: &TotalPoint, tol: &Tolerances) -> bool {
        sup_dist(
            &self.classifying.eval(b),
            &self.groupoid.act(&p.gamma, &p.anchor),
        ) <= tol.eq_tol
    }

    pub fn fiber(&self, b: &[f64], tol: &Tolerances) -> Result<FiberDescriptor, GroupoidError> {
        let g = &self.groupoid;
        let qb = self.classifying.eval(b);
        match &g.group {
            GroupModel::Finite(_) => {
                let points: Vec<TotalPoint> = g
                    .group
                    .tested_elements()
                    .into_iter()
                    .map(|gamma| {
                        let anchor = g.act(&g.group.inverse(&gamma), &qb);
                        TotalPoint { gamma, anchor }
                    })
                    .filter(|p| g.space.contains(&p.anchor) && self.satisfies_equation(b, p, tol))
                    .collect();
                if points.is_empty() {
                    return Err(GroupoidError::EmptyFiber(b.to_vec()));
                }
                Ok(FiberDescriptor::Finite {
                    base_point: b.to_vec(),
                    points,
                })
            }
            GroupModel::Circle { .. } => {
                if !g.space.contains(&qb) {
                    return Err(GroupoidError::EmptyFiber(b.to_vec()));
                }
                Ok(FiberDescriptor::Implicit {
                    base_point: b.to_vec(),
                    stabilizer: g.stabilizer(&qb, tol),
                    orbit_point: qb,
                })
            }
        }
    }

    /// Every sample fiber has exactly `|Γ|` points (finite groups).
    pub fn fiber_sizes_consistent(&self, tol: &Tolerances) -> Result<Verdict, GroupoidError> {
        let Some(n) = self.groupoid.group.order() else {
            return Ok(Verdict::Pass);
        };
        for b in self.base().samples() {
            if let FiberDescriptor::Finite { points, .. } = self.fiber(b, tol)? {
                if points.len() != n {
                    return Ok(Verdict::refuted_at(
                        format!("fiber has {} points, group has {n}", points.len()),
                        b,
                    ));
                }
            }
        }
        Ok(Verdict::Pass)
    }

    pub fn restrict(&self, domain: Domain) -> PrincipalBundle {
        PrincipalBundle {
            name: format!("{}|{}", self.name, domain.name()),
            groupoid: self.groupoid.clone(),
            classifying: self.classifying.restricted_to(domain),
            special_points: self.special_points.clone(),
        }
    }

    pub fn with_special_points(mut self, pts: Vec<Point>) -> Self {
        self.special_points = pts;
        self
    }

    /// The global section `b ↦ (b, e, q(b))`.
    pub fn canonical_section(&self) -> Section {
        let q = self.classifying.eval_fn();
        let e = self.groupoid.group.identity();
        Section {
            name: "σ_e".into(),
            domain: self.base().clone(),
            eval: Arc::new(move |b: &[f64]| TotalPoint {
                gamma: e.clone(),
                anchor: q(b),
            }),
        }
    }
}

pub type SectionFn = Arc<dyn Fn(&[f64]) -> TotalPoint + Send + Sync>;

/// Local section `σ` of `ρ` over `domain`.
#[derive(Clone)]
pub struct Section {
    pub name: String,
    pub domain: Domain,
    pub eval: SectionFn,
}

impl Section {
    /// `b ↦ σ(b)·δ`.
    pub fn translated(&self, bundle: &PrincipalBundle, delta: GroupElem) -> Section {
        let (s, p) = (self.eval.clone(), bundle.clone());
        Section {
            name: format!("{}·{delta:?}", self.name),
            domain: self.domain.clone(),
            eval: Arc::new(move |b: &[f64]| p.act_right(&s(b), &delta)),
        }
    }

    /// A map claiming to be a section with constant anchor `x0` and group element `e`.
    pub fn anchored_at(bundle: &PrincipalBundle, x0: Point) -> Section {
        let e = bundle.groupoid.group.identity();
        Section {
            name: format!("anchored{x0:?}"),
            domain: bundle.base().clone(),
            eval: Arc::new(move |_b: &[f64]| TotalPoint {
                gamma: e.clone(),
                anchor: x0.clone(),
            }),
        }
    }
}

pub fn pullback_unit_bundle(
    g: &Arc<ActionGroupoid>,
    q: &SmoothEuclMap,
    tol: &Tolerances,
) -> Result<PrincipalBundle, GroupoidError> {
    if q.codim() != g.space.dim() {
        return Err(EuclidError::DimensionMismatch {
            expected: g.space.dim(),
            found: q.codim(),
        }
        .into());
    }
    let bundle = PrincipalBundle {
        name: format!("{}*t", q.name()),
        groupoid: g.clone(),
        classifying: q.clone(),
        special_points: Vec::new(),
    };
    for b in q.domain().samples() {
        bundle.fiber(b, tol)?;
    }
    Ok(bundle)
}

/// Sections must satisfy `q(b) = γ·x` at every sample of their domain.
pub fn validate_section(p: &PrincipalBundle, s: &Section, tol: &Tolerances) -> Verdict {
    for b in s.domain.samples() {
        if !p.satisfies_equation(b, &(s.eval)(b), tol) {
            return Verdict::refuted_at(format!("{} is not a section", s.name), b);
        }
    }
    Verdict::Pass
}

/// Plot `b ↦ π_G(α(σ(b)))` of the orbit space, with a lift witness through `q`.
pub fn plot_from_bundle(
    p: &PrincipalBundle,
    section: Option<&Section>,
) -> Result<(Plot, PlotWitness), GroupoidError> {
    let canonical = p.canonical_section();
    let s = section.unwrap_or(&canonical);
    if let Some(b) = p.base().samples().iter().find(|b| !s.domain.contains(b)) {
        return Err(GroupoidError::NoSection(format!("{} misses {b:?}", s.name)));
    }
    let eval = s.eval.clone();
    let plot = Plot::new(
        format!("π∘α∘{}", s.name),
        p.base().clone(),
        Arc::new(move |b: &[f64]| Element::point(eval(b).anchor)),
    );
    Ok((plot, PlotWitness::lift_through(&p.classifying)))
}

/// `π_G∘α∘σ₁ = π_G∘α∘σ₂` at every common sample.
pub fn section_independence(
    p: &PrincipalBundle,
    s1: &Section,
    s2: &Section,
    tol: &Tolerances,
) -> Result<Verdict, GroupoidError> {
    let dist = p.groupoid.orbit_distance()?;
    for b in p.base().samples() {
        if !(s1.domain.contains(b) && s2.domain.contains(b)) {
            continue;
        }
        let (a1, a2) = ((s1.eval)(b).anchor, (s2.eval)(b).anchor);
        let d = dist(&Element::point(a1), &Element::point(a2));
        if d > tol.eq_tol {
            return Ok(Verdict::Refuted(Refutation {
                reason: "anchors lie in different orbits".into(),
                point: b.clone(),
                piece: None,
                deviation: Some(d),
            }));
        }
    }
    Ok(Verdict::Pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeology::verify_plot;
    use crate::expr::catalog;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn reflection() -> Arc<ActionGroupoid> {
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

    fn rotation() -> Arc<ActionGroupoid> {
        Arc::new(
            ActionGroupoid::new(
                "rot",
                GroupModel::circle(),
                Domain::boxed(&[(-3.0, 3.0), (-3.0, 3.0)], Default::default()).unwrap(),
                ActionKind::Rotation,
                Some(OrbitInvariant::Norm),
                &tol(),
            )
            .unwrap(),
        )
    }

    fn base() -> Domain {
        Domain::interval(-1.0, 1.0).unwrap()
    }

    fn p1() -> SmoothEuclMap {
        SmoothEuclMap::from_exprs("p1", base(), catalog::odd_profile()).unwrap()
    }

    fn p2() -> SmoothEuclMap {
        SmoothEuclMap::from_exprs("p2", base(), catalog::negated_profile()).unwrap()
    }

    #[test]
    fn group_tables() {
        assert!(FiniteGroup::from_table("bad", vec![vec![0, 1], vec![0, 1]]).is_err());
        let s3 = FiniteGroup::symmetric3();
        assert_eq!(s3.order(), 6);
        assert!(!s3.is_abelian());
        assert!(FiniteGroup::cyclic(5).is_abelian());
        assert!(GroupModel::circle().check_axioms(&tol()).is_pass());
    }

    #[test]
    fn groupoid_structure_maps() {
        for g in [reflection(), rotation()] {
            for a in g.arrow_samples().iter().step_by(7) {
                assert_eq!(g.target(a), g.act(&a.gamma, &g.source(a)));
                let u = g.unit(&a.x);
                assert_eq!(g.source(&u), a.x);
                assert!(sup_dist(&g.target(&u), &a.x) < 1e-12);
                let inv = g.inverse_arrow(a);
                let loop_ = g.compose(a, &inv, &tol()).unwrap();
                assert!(sup_dist(&g.target(&loop_), &a.x) < 1e-9);
            }
        }
    }

    #[test]
    fn reflection_needs_order_two() {
        let bad = ActionGroupoid::new(
            "r3",
            GroupModel::Finite(FiniteGroup::cyclic(3)),
            Domain::interval(-1.0, 1.0).unwrap(),
            ActionKind::Reflection,
            None,
            &tol(),
        );
        assert!(matches!(bad, Err(GroupoidError::InvalidAction(_))));
        // A finite rotation whose table is not the standard cyclic one fails the action axioms.
        let s3_rot = ActionGroupoid::new(
            "s3",
            GroupModel::Finite(FiniteGroup::symmetric3()),
            Domain::boxed(&[(-1.0, 1.0), (-1.0, 1.0)], Default::default()).unwrap(),
            ActionKind::Rotation,
            None,
            &tol(),
        );
        assert!(s3_rot.is_err());
    }

    #[test]
    fn total_space_points_over_the_profile() {
        let g = reflection();
        let pb1 = pullback_unit_bundle(&g, &p1(), &tol()).unwrap();
        // τ < 0: (τ, 1, −e^{−1/τ²}) with the identity labelled 0.
        let t = -0.5;
        let e = (-1.0f64 / (t * t)).exp();
        let FiberDescriptor::Finite { points, .. } = pb1.fiber(&[t], &tol()).unwrap() else {
            panic!()
        };
        assert!(points.contains(&TotalPoint {
            gamma: GroupElem::Finite(0),
            anchor: vec![-e]
        }));
        assert!(points.contains(&TotalPoint {
            gamma: GroupElem::Finite(1),
            anchor: vec![e]
        }));
        let FiberDescriptor::Finite { points, .. } = pb1.fiber(&[0.0], &tol()).unwrap() else {
            panic!()
        };
        assert_eq!(points.len(), 2);
        assert!(points.iter().all(|p| p.anchor == vec![0.0]));

        let pb2 = pullback_unit_bundle(&g, &p2(), &tol()).unwrap();
        for t in [-0.5f64, 0.5] {
            let e = (-1.0 / (t * t)).exp();
            let FiberDescriptor::Finite { points, .. } = pb2.fiber(&[t], &tol()).unwrap() else {
                panic!()
            };
            assert!(points.contains(&TotalPoint {
                gamma: GroupElem::Finite(0),
                anchor: vec![-e]
            }));
        }
        assert!(pb1.fiber_sizes_consistent(&tol()).unwrap().is_pass());
    }

    #[test]
    fn constant_classifying_map_gives_trivial_bundle() {
        let g = reflection();
        let q = SmoothEuclMap::constant(base(), vec![1.5]);
        let pb = pullback_unit_bundle(&g, &q, &tol()).unwrap();
        let f0 = pb.fiber(&base().samples()[0], &tol()).unwrap();
        for b in base().samples() {
            let FiberDescriptor::Finite { points, .. } = pb.fiber(b, &tol()).unwrap() else {
                panic!()
            };
            let FiberDescriptor::Finite { points: p0, .. } = &f0 else {
                panic!()
            };
            assert_eq!(&points, p0);
        }
        let (plot, w) = plot_from_bundle(&pb, None).unwrap();
        let q = orbit_space(&g, &tol()).unwrap();
        assert!(verify_plot(&q, &plot, &w, &tol()).unwrap().is_pass());
        assert!(base()
            .samples()
            .iter()
            .all(|b| plot.eval(b).cont == vec![1.5]));
    }

    #[test]
    fn classifying_map_outside_space_has_empty_fibers() {
        let g = reflection();
        let q = SmoothEuclMap::constant(base(), vec![10.0]);
        assert!(matches!(
            pullback_unit_bundle(&g, &q, &tol()),
            Err(GroupoidError::EmptyFiber(_))
        ));
    }

    #[test]
    fn induced_plots_agree_and_lift() {
        let g = reflection();
        let q = orbit_space(&g, &tol()).unwrap();
        let (a, wa) =
            plot_from_bundle(&pullback_unit_bundle(&g, &p1(), &tol()).unwrap(), None).unwrap();
        let (b, wb) =
            plot_from_bundle(&pullback_unit_bundle(&g, &p2(), &tol()).unwrap(), None).unwrap();
        assert!(verify_plot(&q, &a, &wa, &tol()).unwrap().is_pass());
        assert!(verify_plot(&q, &b, &wb, &tol()).unwrap().is_pass());
        for t in base().samples() {
            assert!(q.carrier.equal(&a.eval(t), &b.eval(t), &tol()));
        }
    }

    #[test]
    fn section_choice_does_not_matter() {
        let g = reflection();
        let pb = pullback_unit_bundle(&g, &p1(), &tol()).unwrap();
        let s = pb.canonical_section();
        let flipped = s.translated(&pb, GroupElem::Finite(1));
        assert!(validate_section(&pb, &flipped, &tol()).is_pass());
        assert!(section_independence(&pb, &s, &s, &tol()).unwrap().is_pass());
        assert!(section_independence(&pb, &s, &flipped, &tol())
            .unwrap()
            .is_pass());
        let bad = Section::anchored_at(&pb, vec![2.0]);
        assert!(!validate_section(&pb, &bad, &tol()).is_pass());
        assert!(section_independence(&pb, &s, &bad, &tol())
            .unwrap()
            .is_refuted());
        let (plot, _) = plot_from_bundle(&pb, Some(&flipped)).unwrap();
        let (plot0, _) = plot_from_bundle(&pb, None).unwrap();
        let q = orbit_space(&g, &tol()).unwrap();
        for b in base().samples() {
            assert!(q.carrier.equal(&plot.eval(b), &plot0.eval(b), &tol()));
        }
    }

    #[test]
    fn circle_without_invariant_is_undecided() {
        let g = ActionGroupoid::new(
            "rot",
            GroupModel::circle(),
            Domain::boxed(&[(-1.0, 1.0), (-1.0, 1.0)], Default::default()).unwrap(),
            ActionKind::Rotation,
            None,
            &tol(),
        )
        .unwrap();
        assert!(matches!(
            orbit_space(&g, &tol()),
            Err(GroupoidError::OrbitEqUndecided)
        ));
    }

    #[test]
    fn circle_fibers_are_implicit() {
        let g = rotation();
        let q = SmoothEuclMap::from_exprs(
            "c",
            base(),
            catalog::affine(&[vec![1.0], vec![0.5]], &[0.0, 0.0]),
        )
        .unwrap();
        let pb = pullback_unit_bundle(&g, &q, &tol()).unwrap();
        let FiberDescriptor::Implicit { stabilizer, .. } = pb.fiber(&[0.0], &tol()).unwrap() else {
            panic!()
        };
        assert_eq!(stabilizer, Stabilizer::Full);
        let FiberDescriptor::Implicit { stabilizer, .. } = pb.fiber(&[0.5], &tol()).unwrap() else {
            panic!()
        };
        assert_eq!(stabilizer, Stabilizer::Trivial);
    }

    #[test]
    fn trivial_group_orbit_space_matches_base() {
        let d = Domain::interval(-2.0, 2.0).unwrap();
        let g = ActionGroupoid::new(
            "triv",
            GroupModel::Finite(FiniteGroup::cyclic(1)),
            d.clone(),
            ActionKind::Trivial,
            None,
            &tol(),
        )
        .unwrap();
        let q = orbit_space(&g, &tol()).unwrap();
        let m = manifold_space(&d);
        let id = SmoothEuclMap::identity(d);
        let plot = Plot::from_map(&id);
        assert!(
            verify_plot(&q, &plot, &PlotWitness::factor(0, id.clone()), &tol())
                .unwrap()
                .is_pass()
        );
        assert!(verify_plot(&m, &plot, &PlotWitness::factor(0, id), &tol())
            .unwrap()
            .is_pass());
    }
}
