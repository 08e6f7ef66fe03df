//! Diffeological spaces given by a finite generating family of plots.
//!
//! Plot membership is never searched for. A caller supplies a [`PlotWitness`]: an open
//! cover of the plot's domain and, on each piece, a reason the plot is locally a plot
//! (constant, factorization through a generator, or a local lift through a quotient map).
//! [`verify_plot`] checks the witness at the sample points.

use crate::config::Tolerances;
use crate::euclid::{check_cover, Domain, EuclidError, OpenCover, Point, SmoothEuclMap};
use crate::exec::Exec;
use crate::verdict::{Refutation, Verdict};
use serde::Serialize;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffeologyError {
    #[error(
        "factor map has codomain dimension {found}, generator domain has dimension {expected}"
    )]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no generator with index {0}")]
    UnknownGenerator(usize),
    #[error("lift witness supplied for a space that is not a quotient")]
    LiftOnNonQuotient,
    #[error("orbit relation is not an equivalence on tested elements: {0}")]
    NotEquivalence(String),
    #[error("{probes} probes but only {witnesses} output witnesses")]
    MissingWitness { probes: usize, witnesses: usize },
    #[error("probe {0} does not verify as a plot of the source space")]
    ProbeNotPlot(usize),
    #[error(transparent)]
    Euclid(#[from] EuclidError),
}

/// Carrier element: a continuous part and a discrete tag.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Element {
    pub cont: Vec<f64>,
    pub tag: i64,
}

impl Element {
    pub fn point(cont: Vec<f64>) -> Self {
        Element { cont, tag: 0 }
    }

    pub fn tagged(tag: i64) -> Self {
        Element {
            cont: Vec::new(),
            tag,
        }
    }
}

/// Distance between elements; the relation "distance ≤ eq_tol" is the carrier equality.
pub type ElementDistance = Arc<dyn Fn(&Element, &Element) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum CarrierEq {
    /// Exact tags, sup-norm on continuous parts.
    Exact,
    /// Orbit relation of a quotient.
    Orbit(ElementDistance),
}

#[derive(Clone)]
pub struct Carrier {
    pub name: String,
    pub eq: CarrierEq,
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

impl Carrier {
    pub fn exact(name: impl Into<String>) -> Self {
        Carrier {
            name: name.into(),
            eq: CarrierEq::Exact,
        }
    }

    pub fn distance(&self, a: &Element, b: &Element) -> f64 {
        if a.tag != b.tag {
            return f64::INFINITY;
        }
        match &self.eq {
            CarrierEq::Exact => sup_distance(&a.cont, &b.cont),
            CarrierEq::Orbit(d) => d(a, b),
        }
    }

    pub fn equal(&self, a: &Element, b: &Element, tol: &Tolerances) -> bool {
        self.distance(a, b) <= tol.eq_tol
    }
}

pub type PlotFn = Arc<dyn Fn(&[f64]) -> Element + Send + Sync>;
type ClaimFn = Box<dyn Fn(&[f64]) -> Result<Element, String> + Send + Sync>;

/// A parametrization `U → X` of a carrier by an open domain.
#[derive(Clone)]
pub struct Plot {
    name: String,
    domain: Domain,
    eval: PlotFn,
}

impl fmt::Debug for Plot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Plot({} on {})", self.name, self.domain.name())
    }
}

impl Plot {
    pub fn new(name: impl Into<String>, domain: Domain, eval: PlotFn) -> Self {
        Plot {
            name: name.into(),
            domain,
            eval,
        }
    }

    /// The map itself as a plot with untagged point values.
    pub fn from_map(f: &SmoothEuclMap) -> Self {
        let e = f.eval_fn();
        Plot::new(
            f.name(),
            f.domain().clone(),
            Arc::new(move |u: &[f64]| Element::point(e(u))),
        )
    }

    pub fn constant(domain: Domain, value: Element) -> Self {
        Plot::new("const", domain, Arc::new(move |_u: &[f64]| value.clone()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn eval(&self, u: &[f64]) -> Element {
        (self.eval)(u)
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn restricted_to(&self, domain: Domain) -> Self {
        Plot {
            name: self.name.clone(),
            domain,
            eval: self.eval.clone(),
        }
    }

    /// `self ∘ f`, defined on the domain of `f`.
    pub fn precompose(&self, f: &SmoothEuclMap) -> Self {
        let (p, g) = (self.eval.clone(), f.eval_fn());
        Plot::new(
            format!("{}∘{}", self.name, f.name()),
            f.domain().clone(),
            Arc::new(move |u: &[f64]| p(&g(u))),
        )
    }

    /// `F ∘ self` for a set map `F` between carriers.
    pub fn postcompose(
        &self,
        name: &str,
        map: Arc<dyn Fn(&Element) -> Element + Send + Sync>,
    ) -> Self {
        let p = self.eval.clone();
        Plot::new(
            format!("{name}∘{}", self.name),
            self.domain.clone(),
            Arc::new(move |u: &[f64]| map(&p(u))),
        )
    }
}

#[derive(Clone)]
pub struct QuotientData {
    pub base: Arc<DiffeologicalSpace>,
    pub label: String,
}

/// A set with the diffeology generated by a finite family of plots.
#[derive(Clone)]
pub struct DiffeologicalSpace {
    pub name: String,
    pub carrier: Carrier,
    pub generators: Vec<Plot>,
    pub quotient: Option<QuotientData>,
}

impl fmt::Debug for DiffeologicalSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffeologicalSpace")
            .field("name", &self.name)
            .field("generators", &self.generators)
            .field("quotient", &self.quotient.as_ref().map(|q| q.label.clone()))
            .finish()
    }
}

/// Why a plot is locally a plot on one piece of a witness cover.
#[derive(Clone)]
pub enum PieceKind {
    ConstantAt(Element),
    Factor {
        generator: usize,
        map: SmoothEuclMap,
    },
    /// `plot = π ∘ lift` on the piece, with `lift` a plot of the base space.
    Lift {
        plot: Plot,
        witness: Box<PlotWitness>,
    },
}

#[derive(Clone)]
pub struct WitnessPiece {
    pub domain: Domain,
    pub kind: PieceKind,
}

#[derive(Clone, Default)]
pub struct PlotWitness {
    pub pieces: Vec<WitnessPiece>,
}

impl PlotWitness {
    pub fn single(domain: Domain, kind: PieceKind) -> Self {
        PlotWitness {
            pieces: vec![WitnessPiece { domain, kind }],
        }
    }

    pub fn constant(domain: Domain, value: Element) -> Self {
        Self::single(domain, PieceKind::ConstantAt(value))
    }

    pub fn factor(generator: usize, map: SmoothEuclMap) -> Self {
        Self::single(map.domain().clone(), PieceKind::Factor { generator, map })
    }

    /// One-piece lift witness through a map into the base of a quotient whose only
    /// generator is the identity (the manifold case).
    pub fn lift_through(map: &SmoothEuclMap) -> Self {
        Self::single(
            map.domain().clone(),
            PieceKind::Lift {
                plot: Plot::from_map(map),
                witness: Box::new(PlotWitness::factor(0, map.clone())),
            },
        )
    }

    pub fn cover(&self, parent: &Domain) -> OpenCover {
        OpenCover::new(
            parent.clone(),
            self.pieces.iter().map(|p| p.domain.clone()).collect(),
        )
    }

    /// Witness for `p ∘ f` obtained by pulling every piece back along `f`.
    pub fn pullback(&self, f: &SmoothEuclMap) -> PlotWitness {
        let pieces = self
            .pieces
            .iter()
            .enumerate()
            .map(|(i, piece)| {
                let target = piece.domain.clone();
                let g = f.eval_fn();
                let domain = f.domain().restricted(
                    format!("{}^-1({})", f.name(), target.name()),
                    Arc::new(move |u: &[f64]| target.contains(&g(u))),
                );
                let fr = f
                    .restricted_to(domain.clone())
                    .renamed(format!("{}|{i}", f.name()));
                let kind = match &piece.kind {
                    PieceKind::ConstantAt(e) => PieceKind::ConstantAt(e.clone()),
                    PieceKind::Factor { generator, map } => PieceKind::Factor {
                        generator: *generator,
                        map: fr.then(map).expect("composable by construction"),
                    },
                    PieceKind::Lift { plot, witness } => PieceKind::Lift {
                        plot: plot.precompose(&fr),
                        witness: Box::new(witness.pullback(&fr)),
                    },
                };
                WitnessPiece { domain, kind }
            })
            .collect();
        PlotWitness { pieces }
    }
}

/// Sample points used for a witness piece: its own samples and the parent samples it contains.
fn piece_points(piece: &Domain, parent: &Domain) -> Vec<Point> {
    let mut pts: Vec<Point> = piece.samples().to_vec();
    pts.extend(
        parent
            .samples()
            .iter()
            .filter(|x| piece.contains(x))
            .cloned(),
    );
    pts
}

pub fn verify_plot(
    space: &DiffeologicalSpace,
    plot: &Plot,
    witness: &PlotWitness,
    tol: &Tolerances,
) -> Result<Verdict, DiffeologyError> {
    verify_plot_with(space, plot, witness, tol, Exec::default())
}

pub fn verify_plot_with(
    space: &DiffeologicalSpace,
    plot: &Plot,
    witness: &PlotWitness,
    tol: &Tolerances,
    exec: Exec,
) -> Result<Verdict, DiffeologyError> {
    let cover_verdict = check_cover(&witness.cover(plot.domain()))?;
    if !cover_verdict.is_pass() {
        return Ok(cover_verdict);
    }
    for (pi, piece) in witness.pieces.iter().enumerate() {
        let pts = piece_points(&piece.domain, plot.domain());
        // Resolve the claimed local formula once per piece.
        let claim: ClaimFn = match &piece.kind {
            PieceKind::ConstantAt(e) => {
                let e = e.clone();
                Box::new(move |_u: &[f64]| Ok(e.clone()))
            }
            PieceKind::Factor { generator, map } => {
                let g = space
                    .generators
                    .get(*generator)
                    .ok_or(DiffeologyError::UnknownGenerator(*generator))?
                    .clone();
                if map.codim() != g.domain().dim() {
                    return Err(DiffeologyError::DimensionMismatch {
                        expected: g.domain().dim(),
                        found: map.codim(),
                    });
                }
                let map = map.clone();
                Box::new(move |u: &[f64]| {
                    let v = map.eval(u);
                    if g.domain().contains(&v) {
                        Ok(g.eval(&v))
                    } else {
                        Err(format!(
                            "factor map leaves the domain of generator {}",
                            g.name()
                        ))
                    }
                })
            }
            PieceKind::Lift {
                plot: lift,
                witness: lw,
            } => {
                let q = space
                    .quotient
                    .as_ref()
                    .ok_or(DiffeologyError::LiftOnNonQuotient)?;
                let base_verdict = verify_plot_with(&q.base, lift, lw, tol, exec)?;
                if let Verdict::Refuted(mut r) = base_verdict {
                    r.reason = format!("lift is not a plot of the base: {}", r.reason);
                    r.piece = Some(pi);
                    return Ok(Verdict::Refuted(r));
                }
                let lift = lift.clone();
                Box::new(move |u: &[f64]| {
                    if lift.domain().contains(u) {
                        Ok(lift.eval(u))
                    } else {
                        Err("piece leaves the domain of the lift".into())
                    }
                })
            }
        };
        let failure = exec.find_first(pts.len(), |k| {
            let u = &pts[k];
            if !plot.domain().contains(u) {
                return Some((u.clone(), "piece leaves the plot domain".to_string(), None));
            }
            match claim(u) {
                Err(msg) => Some((u.clone(), msg, None)),
                Ok(expected) => {
                    let d = space.carrier.distance(&plot.eval(u), &expected);
                    (d > tol.eq_tol).then(|| {
                        (
                            u.clone(),
                            "plot differs from the claimed local form".to_string(),
                            Some(d),
                        )
                    })
                }
            }
        });
        if let Some((_, (point, reason, deviation))) = failure {
            return Ok(Verdict::Refuted(Refutation {
                reason,
                point,
                piece: Some(pi),
                deviation,
            }));
        }
    }
    Ok(Verdict::Pass)
}

/// Open domain with the manifold diffeology: the identity is the only generator.
pub fn manifold_space(d: &Domain) -> DiffeologicalSpace {
    let id = SmoothEuclMap::identity(d.clone());
    DiffeologicalSpace {
        name: d.name().to_string(),
        carrier: Carrier::exact(d.name()),
        generators: vec![Plot::from_map(&id).renamed("id")],
        quotient: None,
    }
}

/// Elements used to sample-test the orbit relation.
fn probe_elements(base: &DiffeologicalSpace, per_generator: usize) -> Vec<Element> {
    let mut out = Vec::new();
    for g in &base.generators {
        let s = g.domain().samples();
        let step = (s.len() / per_generator.max(1)).max(1);
        out.extend(
            s.iter()
                .step_by(step)
                .take(per_generator)
                .map(|u| g.eval(u)),
        );
    }
    out
}

/// Quotient of `base` by the relation `orbit_distance ≤ eq_tol`.
pub fn quotient(
    base: &DiffeologicalSpace,
    orbit_distance: ElementDistance,
    pi_label: &str,
    tol: &Tolerances,
) -> Result<DiffeologicalSpace, DiffeologyError> {
    let carrier = Carrier {
        name: format!("{}/{}", base.carrier.name, pi_label),
        eq: CarrierEq::Orbit(orbit_distance),
    };
    let elems = probe_elements(base, 32);
    let eq = |a: &Element, b: &Element| carrier.equal(a, b, tol);
    for (i, a) in elems.iter().enumerate() {
        if !eq(a, a) {
            return Err(DiffeologyError::NotEquivalence(format!(
                "not reflexive at {a:?}"
            )));
        }
        for b in &elems[i + 1..] {
            if eq(a, b) != eq(b, a) {
                return Err(DiffeologyError::NotEquivalence(format!(
                    "not symmetric on {a:?}, {b:?}"
                )));
            }
        }
    }
    for a in &elems {
        for b in elems.iter().filter(|b| eq(a, b)) {
            if let Some(c) = elems.iter().find(|c| eq(b, c) && !eq(a, c)) {
                return Err(DiffeologyError::NotEquivalence(format!(
                    "not transitive on {a:?}, {b:?}, {c:?}"
                )));
            }
        }
    }
    Ok(DiffeologicalSpace {
        name: format!("{}/{}", base.name, pi_label),
        carrier,
        generators: base
            .generators
            .iter()
            .map(|g| g.clone().renamed(format!("{pi_label}∘{}", g.name())))
            .collect(),
        quotient: Some(QuotientData {
            base: Arc::new(base.clone()),
            label: pi_label.to_string(),
        }),
    })
}

pub type SetMap = Arc<dyn Fn(&Element) -> Element + Send + Sync>;

/// `F: X → Y` is smooth on the probes if each `F ∘ p` verifies against `Y`.
pub fn check_smooth_map(
    map: SetMap,
    x: &DiffeologicalSpace,
    y: &DiffeologicalSpace,
    probes: &[(Plot, PlotWitness)],
    witnesses_out: &[PlotWitness],
    tol: &Tolerances,
) -> Result<Verdict, DiffeologyError> {
    if witnesses_out.len() < probes.len() {
        return Err(DiffeologyError::MissingWitness {
            probes: probes.len(),
            witnesses: witnesses_out.len(),
        });
    }
    for (i, ((p, w), wo)) in probes.iter().zip(witnesses_out).enumerate() {
        if !verify_plot(x, p, w, tol)?.is_pass() {
            return Err(DiffeologyError::ProbeNotPlot(i));
        }
        let composite = p.postcompose("F", map.clone());
        let v = verify_plot(y, &composite, wo, tol)?;
        if let Verdict::Refuted(mut r) = v {
            r.reason = format!("F∘probe {i} is not a plot: {}", r.reason);
            r.piece = Some(i);
            return Ok(Verdict::Refuted(r));
        }
    }
    Ok(Verdict::Pass)
}

/// Semi-decides whether `{indicator}` is D-open: its preimage under each probe must be
/// open at every sample, tested on the fixed radius ladder.
pub fn d_open(
    space: &DiffeologicalSpace,
    indicator: &(dyn Fn(&Element) -> bool + Sync),
    probes: &[(Plot, PlotWitness)],
    tol: &Tolerances,
) -> Result<Verdict, DiffeologyError> {
    for (i, (p, w)) in probes.iter().enumerate() {
        if !verify_plot(space, p, w, tol)?.is_pass() {
            return Err(DiffeologyError::ProbeNotPlot(i));
        }
        let dom = p.domain();
        for u in dom.samples() {
            if !indicator(&p.eval(u)) {
                continue;
            }
            let open = Domain::open_radius(u, |y| dom.contains(y) && indicator(&p.eval(y)));
            if open.is_none() {
                return Ok(Verdict::Refuted(Refutation {
                    reason: "preimage is not open at this resolution".into(),
                    point: u.clone(),
                    piece: Some(i),
                    deviation: None,
                }));
            }
        }
    }
    Ok(Verdict::Pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::catalog;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn reflection_quotient() -> DiffeologicalSpace {
        let r = manifold_space(&Domain::interval(-4.0, 4.0).unwrap());
        quotient(
            &r,
            Arc::new(|a: &Element, b: &Element| {
                (a.cont[0] - b.cont[0])
                    .abs()
                    .min((a.cont[0] + b.cont[0]).abs())
            }),
            "±",
            &tol(),
        )
        .unwrap()
    }

    #[test]
    fn constant_plot_verifies() {
        let x = manifold_space(&Domain::interval(0.0, 1.0).unwrap());
        let u = Domain::boxed(&[(0.0, 1.0), (0.0, 1.0)], Default::default()).unwrap();
        let e = Element::point(vec![0.25]);
        let p = Plot::constant(u.clone(), e.clone());
        assert!(verify_plot(&x, &p, &PlotWitness::constant(u, e), &tol())
            .unwrap()
            .is_pass());
    }

    #[test]
    fn precomposition_with_square_verifies() {
        let x = manifold_space(&Domain::interval(-4.0, 4.0).unwrap());
        let q = SmoothEuclMap::from_exprs(
            "q",
            Domain::interval(-2.0, 2.0).unwrap(),
            catalog::odd_profile(),
        )
        .unwrap();
        let f =
            SmoothEuclMap::from_exprs("sq", Domain::interval(0.0, 1.0).unwrap(), catalog::square())
                .unwrap();
        let qf = f.then(&q).unwrap();
        let p = Plot::from_map(&qf);
        assert!(verify_plot(&x, &p, &PlotWitness::factor(0, qf), &tol())
            .unwrap()
            .is_pass());
    }

    #[test]
    fn perturbed_plot_is_refuted_with_deviation() {
        let d = Domain::interval(-4.0, 4.0).unwrap();
        let x = manifold_space(&d);
        let f =
            SmoothEuclMap::from_exprs("sq", Domain::interval(0.0, 1.0).unwrap(), catalog::square())
                .unwrap();
        let fe = f.eval_fn();
        let bumped = Plot::new(
            "bumped",
            f.domain().clone(),
            Arc::new(move |u: &[f64]| {
                let mut v = fe(u);
                if u[0] > 0.6 {
                    v[0] += 0.1;
                }
                Element::point(v)
            }),
        );
        let v = verify_plot(&x, &bumped, &PlotWitness::factor(0, f), &tol()).unwrap();
        let d = v.refutation().unwrap().deviation.unwrap();
        assert!((d - 0.1).abs() < 1e-12);
    }

    #[test]
    fn factor_dimension_mismatch_is_an_error() {
        let x = manifold_space(&Domain::interval(-4.0, 4.0).unwrap());
        let f = SmoothEuclMap::from_exprs(
            "c",
            Domain::interval(0.0, 1.0).unwrap(),
            catalog::circle(1.0),
        )
        .unwrap();
        let p = Plot::from_map(&f);
        assert!(matches!(
            verify_plot(&x, &p, &PlotWitness::factor(0, f), &tol()),
            Err(DiffeologyError::DimensionMismatch {
                expected: 1,
                found: 2
            })
        ));
    }

    #[test]
    fn witness_that_misses_points_is_refuted() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let x = manifold_space(&d);
        let id = SmoothEuclMap::identity(d.clone());
        let left = d.sub_box(&[(0.0, 0.5)]).unwrap();
        let w = PlotWitness::factor(0, id.restricted_to(left));
        let v = verify_plot(&x, &Plot::from_map(&id), &w, &tol()).unwrap();
        assert!(v.is_refuted());
    }

    #[test]
    fn refinement_keeps_witness_passing() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let x = manifold_space(&Domain::interval(-4.0, 4.0).unwrap());
        let f = SmoothEuclMap::from_exprs("p1", d.clone(), catalog::odd_profile()).unwrap();
        let coarse = PlotWitness::factor(0, f.clone());
        assert!(verify_plot(&x, &Plot::from_map(&f), &coarse, &tol())
            .unwrap()
            .is_pass());
        let fine = PlotWitness {
            pieces: [(-1.0, -0.2), (-0.3, 0.4), (0.3, 1.0)]
                .iter()
                .map(|&b| {
                    let piece = d.sub_box(&[b]).unwrap();
                    WitnessPiece {
                        domain: piece.clone(),
                        kind: PieceKind::Factor {
                            generator: 0,
                            map: f.restricted_to(piece),
                        },
                    }
                })
                .collect(),
        };
        assert!(verify_plot(&x, &Plot::from_map(&f), &fine, &tol())
            .unwrap()
            .is_pass());
    }

    #[test]
    fn quotient_by_equality_has_base_plots() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let x = manifold_space(&d);
        let q = quotient(
            &x,
            Arc::new(|a: &Element, b: &Element| sup_distance(&a.cont, &b.cont)),
            "id",
            &tol(),
        )
        .unwrap();
        let id = SmoothEuclMap::identity(d);
        let p = Plot::from_map(&id);
        assert!(
            verify_plot(&q, &p, &PlotWitness::factor(0, id.clone()), &tol())
                .unwrap()
                .is_pass()
        );
        assert!(verify_plot(&q, &p, &PlotWitness::lift_through(&id), &tol())
            .unwrap()
            .is_pass());
    }

    #[test]
    fn non_equivalence_is_rejected() {
        let x = manifold_space(&Domain::interval(0.0, 4.0).unwrap());
        let near = quotient(
            &x,
            Arc::new(|a: &Element, b: &Element| {
                if (a.cont[0] - b.cont[0]).abs() < 0.3 {
                    0.0
                } else {
                    1.0
                }
            }),
            "near",
            &tol(),
        );
        assert!(matches!(near, Err(DiffeologyError::NotEquivalence(_))));
    }

    #[test]
    fn quotient_generator_lifts() {
        let q = reflection_quotient();
        let base = q.quotient.as_ref().unwrap().base.clone();
        for g in &q.generators {
            let id = SmoothEuclMap::identity(g.domain().clone());
            let w = PlotWitness::lift_through(&id);
            assert!(verify_plot(&q, g, &w, &tol()).unwrap().is_pass());
        }
        assert_eq!(base.generators.len(), q.generators.len());
    }

    #[test]
    fn so2_orbit_space_identifies_circles() {
        let plane = manifold_space(
            &Domain::boxed(&[(-2.0, 2.0), (-2.0, 2.0)], Default::default()).unwrap(),
        );
        let norm = |v: &[f64]| (v[0] * v[0] + v[1] * v[1]).sqrt();
        let q = quotient(
            &plane,
            Arc::new(move |a: &Element, b: &Element| (norm(&a.cont) - norm(&b.cont)).abs()),
            "SO(2)",
            &tol(),
        )
        .unwrap();
        let a = Element::point(vec![1.0, 0.0]);
        let b = Element::point(vec![0.0, -1.0]);
        let c = Element::point(vec![0.5, 0.0]);
        assert!(q.carrier.equal(&a, &b, &tol()));
        assert!(!q.carrier.equal(&a, &c, &tol()));
    }

    #[test]
    fn projection_to_reflection_quotient_is_smooth() {
        let d = Domain::interval(-4.0, 4.0).unwrap();
        let r = manifold_space(&d);
        let q = reflection_quotient();
        let id = SmoothEuclMap::identity(d);
        let probes = vec![(Plot::from_map(&id), PlotWitness::factor(0, id.clone()))];
        let outs = vec![PlotWitness::lift_through(&id)];
        let pi: SetMap = Arc::new(|e: &Element| e.clone());
        assert!(check_smooth_map(pi.clone(), &r, &q, &probes, &outs, &tol())
            .unwrap()
            .is_pass());
        assert!(matches!(
            check_smooth_map(pi, &r, &q, &probes, &[], &tol()),
            Err(DiffeologyError::MissingWitness { .. })
        ));
    }

    #[test]
    fn identity_is_smooth() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let x = manifold_space(&d);
        let id = SmoothEuclMap::identity(d);
        let probes = vec![(Plot::from_map(&id), PlotWitness::factor(0, id.clone()))];
        let outs = vec![PlotWitness::factor(0, id.clone())];
        let f: SetMap = Arc::new(|e: &Element| e.clone());
        assert!(check_smooth_map(f, &x, &x, &probes, &outs, &tol())
            .unwrap()
            .is_pass());
    }

    /// The discrete two-point carrier has no generators: only locally constant maps are plots.
    fn discrete_signs() -> DiffeologicalSpace {
        DiffeologicalSpace {
            name: "signs".into(),
            carrier: Carrier::exact("signs"),
            generators: vec![],
            quotient: None,
        }
    }

    #[test]
    fn sign_is_not_smooth_for_any_constant_witness() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let x = manifold_space(&d);
        let y = discrete_signs();
        let id = SmoothEuclMap::identity(d.clone());
        let sign: SetMap = Arc::new(|e: &Element| {
            Element::tagged(if e.cont[0] > 0.0 {
                1
            } else if e.cont[0] < 0.0 {
                -1
            } else {
                0
            })
        });
        let probes = vec![(Plot::from_map(&id), PlotWitness::factor(0, id.clone()))];
        // Exhaust constant-piece witnesses whose cut points come from the sample grid.
        let grid: Vec<f64> = d.samples().iter().map(|x| x[0]).collect();
        let mut tried = 0;
        for &a in grid.iter().step_by(4) {
            for &b in grid.iter().step_by(4).filter(|&&b| b > a) {
                let pieces = [(-1.0, b), (a, 1.0)];
                for (ta, tb) in [(-1, 1), (-1, 0), (0, 1), (1, -1), (0, 0)] {
                    let w = PlotWitness {
                        pieces: pieces
                            .iter()
                            .zip([ta, tb])
                            .map(|(&bd, t)| WitnessPiece {
                                domain: d.sub_box(&[bd]).unwrap(),
                                kind: PieceKind::ConstantAt(Element::tagged(t)),
                            })
                            .collect(),
                    };
                    let v = check_smooth_map(sign.clone(), &x, &y, &probes, &[w], &tol()).unwrap();
                    assert!(v.is_refuted());
                    tried += 1;
                }
            }
        }
        assert!(tried > 100);
    }

    #[test]
    fn d_topology_on_reflection_quotient() {
        let q = reflection_quotient();
        let d = Domain::interval(-4.0, 4.0).unwrap();
        let id = SmoothEuclMap::identity(d);
        let probes = vec![(Plot::from_map(&id), PlotWitness::lift_through(&id))];
        let zero = Element::point(vec![0.0]);
        let qc = q.carrier.clone();
        let t = tol();
        let singleton = move |e: &Element| qc.equal(e, &zero, &t);
        let v = d_open(&q, &singleton, &probes, &tol()).unwrap();
        assert_eq!(v.refutation().unwrap().point, vec![0.0]);

        let band = |e: &Element| (1.0..2.0).contains(&e.cont[0].abs()) && e.cont[0].abs() > 1.0;
        assert!(d_open(&q, &band, &probes, &tol()).unwrap().is_pass());
        assert!(d_open(&q, &|_e: &Element| true, &probes, &tol())
            .unwrap()
            .is_pass());
    }

    #[test]
    fn d_open_agrees_with_box_openness_on_manifold() {
        let d = Domain::interval(-4.0, 4.0).unwrap();
        let x = manifold_space(&d);
        let id = SmoothEuclMap::identity(d.clone());
        let probes = vec![(Plot::from_map(&id), PlotWitness::factor(0, id))];
        let sub = d.sub_box(&[(-1.0, 2.5)]).unwrap();
        let s2 = sub.clone();
        assert!(d_open(
            &x,
            &move |e: &Element| s2.contains(&e.cont),
            &probes,
            &tol()
        )
        .unwrap()
        .is_pass());
        let closed = |e: &Element| e.cont[0] >= 0.0;
        assert!(d_open(&x, &closed, &probes, &tol()).unwrap().is_refuted());
    }
}
