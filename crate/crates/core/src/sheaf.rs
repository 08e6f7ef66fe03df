//! Presheaves of finite sets on finite probe sites: concreteness, concretization,
//! sheafification by the plus construction, and an exhaustive check of the
//! concretization adjunction.
//!
//! A site has a distinguished point object (index 0) and at most one designated
//! cover per object. Restrictions along an arrow `f: A → B` are stored as maps
//! `P(B) → P(A)`. Compositions `g∘f` are declared explicitly, except that
//! identities compose implicitly.

use crate::bundleclass::{cocycle_classes, CoverGraph};
use crate::config::Tolerances;
use crate::euclid::{Domain, Point, SmoothEuclMap};
use crate::exec::Exec;
use crate::expr::ScalarExpr;
use crate::forms::{pullback, EuclForm};
use crate::groupoid::FiniteGroup;
use crate::verdict::Verdict;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Default bound on the number of candidate morphisms in the adjunction search.
pub const ADJUNCTION_SEARCH_BOUND: u64 = 1_000_000;
/// Bound on matching families enumerated per covered object.
pub const FAMILY_BOUND: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SheafError {
    #[error("malformed site: {0}")]
    Site(String),
    #[error("malformed presheaf: {0}")]
    Presheaf(String),
    #[error("object {0} has no point inclusions")]
    NoPoints(String),
    #[error("restriction does not descend to point classes: {0}")]
    DescentFailure(String),
    #[error("restrictions through the cover are inconsistent: {0}")]
    InconsistentSite(String),
    #[error("sheafification did not stabilize after {0} plus steps")]
    NonTermination(usize),
    #[error("search space of {0} candidates exceeds the bound")]
    SearchTooLarge(u64),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

#[derive(Clone)]
pub struct SiteObject {
    pub name: String,
    pub geometry: Option<Domain>,
}

#[derive(Clone)]
pub struct SiteArrow {
    pub name: String,
    pub src: usize,
    pub dst: usize,
    /// Image point, for point inclusions of geometric objects.
    pub at: Option<Point>,
    pub map: Option<SmoothEuclMap>,
    pub identity: bool,
}

/// Overlap of pieces `a` and `b` of a cover, with its arrows into both pieces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoverOverlap {
    pub a: usize,
    pub b: usize,
    pub object: usize,
    pub to_a: usize,
    pub to_b: usize,
}

/// Pieces are arrows `U_i → U`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SiteCover {
    pub pieces: Vec<usize>,
    pub overlaps: Vec<CoverOverlap>,
}

#[derive(Clone)]
pub struct ProbeSite {
    pub name: String,
    objects: Vec<SiteObject>,
    arrows: Vec<SiteArrow>,
    identities: Vec<usize>,
    /// `(f, g) ↦ g∘f` for declared composable pairs.
    compositions: HashMap<(usize, usize), usize>,
    covers: Vec<Option<SiteCover>>,
}

impl fmt::Debug for ProbeSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ProbeSite({}: {} objects, {} arrows)",
            self.name,
            self.objects.len(),
            self.arrows.len()
        )
    }
}

pub const POINT: usize = 0;

impl ProbeSite {
    pub fn new(name: impl Into<String>) -> Self {
        let mut s = ProbeSite {
            name: name.into(),
            objects: Vec::new(),
            arrows: Vec::new(),
            identities: Vec::new(),
            compositions: HashMap::new(),
            covers: Vec::new(),
        };
        s.add_object("pt", None);
        s
    }

    pub fn add_object(&mut self, name: impl Into<String>, geometry: Option<Domain>) -> usize {
        let name = name.into();
        let k = self.objects.len();
        self.objects.push(SiteObject {
            name: name.clone(),
            geometry,
        });
        self.arrows.push(SiteArrow {
            name: format!("id_{name}"),
            src: k,
            dst: k,
            at: None,
            map: None,
            identity: true,
        });
        self.identities.push(self.arrows.len() - 1);
        self.covers.push(None);
        k
    }

    fn push_arrow(&mut self, a: SiteArrow) -> Result<usize, SheafError> {
        if a.src >= self.objects.len() || a.dst >= self.objects.len() {
            return Err(SheafError::Site(format!(
                "arrow {} has an unknown endpoint",
                a.name
            )));
        }
        if self.arrows.iter().any(|b| b.name == a.name) {
            return Err(SheafError::Site(format!("duplicate arrow name {}", a.name)));
        }
        self.arrows.push(a);
        Ok(self.arrows.len() - 1)
    }

    pub fn add_point(
        &mut self,
        name: impl Into<String>,
        obj: usize,
        at: Option<Point>,
    ) -> Result<usize, SheafError> {
        if let (Some(p), Some(Some(d))) = (&at, self.objects.get(obj).map(|o| &o.geometry)) {
            if !d.contains(p) {
                return Err(SheafError::Site(format!(
                    "point {p:?} is not in {}",
                    d.name()
                )));
            }
        }
        self.push_arrow(SiteArrow {
            name: name.into(),
            src: POINT,
            dst: obj,
            at,
            map: None,
            identity: false,
        })
    }

    pub fn add_arrow(
        &mut self,
        name: impl Into<String>,
        src: usize,
        dst: usize,
        map: Option<SmoothEuclMap>,
    ) -> Result<usize, SheafError> {
        self.push_arrow(SiteArrow {
            name: name.into(),
            src,
            dst,
            at: None,
            map,
            identity: false,
        })
    }

    /// Declare `gf = g∘f`.
    pub fn add_composition(&mut self, f: usize, g: usize, gf: usize) -> Result<(), SheafError> {
        let (af, ag, agf) = (&self.arrows[f], &self.arrows[g], &self.arrows[gf]);
        if af.dst != ag.src || agf.src != af.src || agf.dst != ag.dst {
            return Err(SheafError::Site(format!(
                "{} ∘ {} = {} has mismatched endpoints",
                ag.name, af.name, agf.name
            )));
        }
        if let Some(&old) = self.compositions.get(&(f, g)) {
            if old != gf {
                return Err(SheafError::Site(format!(
                    "{} ∘ {} declared twice",
                    ag.name, af.name
                )));
            }
        }
        self.compositions.insert((f, g), gf);
        Ok(())
    }

    /// Compose a point inclusion with a map arrow whenever the image point is
    /// itself a declared point inclusion.
    pub fn derive_point_compositions(&mut self, tol: &Tolerances) {
        let mut found = Vec::new();
        for (a, pa) in self.arrows.iter().enumerate() {
            let Some(p) = &pa.at else { continue };
            for (f, af) in self.arrows.iter().enumerate() {
                let Some(m) = &af.map else { continue };
                if af.src != pa.dst {
                    continue;
                }
                let img = m.eval(p);
                if let Some(b) = self.arrows.iter().position(|x| {
                    x.src == POINT
                        && x.dst == af.dst
                        && x.at.as_ref().is_some_and(|q| {
                            q.iter().zip(&img).all(|(u, v)| (u - v).abs() <= tol.eq_tol)
                        })
                }) {
                    found.push((a, f, b));
                }
            }
        }
        for (a, f, b) in found {
            self.compositions.entry((a, f)).or_insert(b);
        }
    }

    pub fn set_cover(&mut self, obj: usize, cover: SiteCover) -> Result<(), SheafError> {
        for &p in &cover.pieces {
            if self.arrows.get(p).map(|a| a.dst) != Some(obj) {
                return Err(SheafError::Site(format!(
                    "cover piece {p} does not map into {obj}"
                )));
            }
        }
        for o in &cover.overlaps {
            let ok = o.a < cover.pieces.len()
                && o.b < cover.pieces.len()
                && o.object < self.objects.len()
                && self.arrows.get(o.to_a).map(|a| (a.src, a.dst))
                    == Some((o.object, self.arrows[cover.pieces[o.a]].src))
                && self.arrows.get(o.to_b).map(|a| (a.src, a.dst))
                    == Some((o.object, self.arrows[cover.pieces[o.b]].src));
            if !ok {
                return Err(SheafError::Site(format!("overlap {o:?} is malformed")));
            }
        }
        self.covers[obj] = Some(cover);
        Ok(())
    }

    pub fn objects(&self) -> &[SiteObject] {
        &self.objects
    }

    pub fn arrows(&self) -> &[SiteArrow] {
        &self.arrows
    }

    pub fn object_index(&self, name: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.name == name)
    }

    pub fn arrow_index(&self, name: &str) -> Option<usize> {
        self.arrows.iter().position(|a| a.name == name)
    }

    pub fn identity(&self, obj: usize) -> usize {
        self.identities[obj]
    }

    pub fn cover(&self, obj: usize) -> Option<&SiteCover> {
        self.covers[obj].as_ref()
    }

    /// `g∘f`, if declared or if either is an identity.
    pub fn compose(&self, f: usize, g: usize) -> Option<usize> {
        let (af, ag) = (&self.arrows[f], &self.arrows[g]);
        if af.dst != ag.src {
            return None;
        }
        if af.identity {
            return Some(g);
        }
        if ag.identity {
            return Some(f);
        }
        self.compositions.get(&(f, g)).copied()
    }

    pub fn compositions(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.compositions.iter().map(|(&(f, g), &gf)| (f, g, gf))
    }

    /// Point inclusions of `obj`; for the point object this is its identity.
    pub fn points_of(&self, obj: usize) -> Vec<usize> {
        if obj == POINT {
            return vec![self.identities[POINT]];
        }
        (0..self.arrows.len())
            .filter(|&a| {
                self.arrows[a].src == POINT && self.arrows[a].dst == obj && !self.arrows[a].identity
            })
            .collect()
    }

    /// All `g` with `u∘g = h`.
    pub fn factorizations(&self, h: usize, u: usize) -> Vec<usize> {
        let src = self.arrows[h].src;
        (0..self.arrows.len())
            .filter(|&g| self.arrows[g].src == src && self.compose(g, u) == Some(h))
            .collect()
    }

    /// Every object has a point, covers reference real objects, and declared
    /// compositions associate.
    pub fn validate(&self) -> Result<(), SheafError> {
        for (k, o) in self.objects.iter().enumerate() {
            if self.points_of(k).is_empty() {
                return Err(SheafError::NoPoints(o.name.clone()));
            }
        }
        for (&(f, g), &gf) in &self.compositions {
            for h in 0..self.arrows.len() {
                let (Some(hg), Some(hgf)) = (self.compose(g, h), self.compose(gf, h)) else {
                    continue;
                };
                if let Some(l) = self.compose(f, hg) {
                    if l != hgf {
                        return Err(SheafError::Site(format!(
                            "({}∘{})∘{} ≠ {}∘({}∘{})",
                            self.arrows[h].name,
                            self.arrows[g].name,
                            self.arrows[f].name,
                            self.arrows[h].name,
                            self.arrows[g].name,
                            self.arrows[f].name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Finite sets `P(U)` with restriction maps `P(B) → P(A)` for each arrow `A → B`.
#[derive(Clone, Debug)]
pub struct FinitePresheaf {
    pub site: Arc<ProbeSite>,
    pub labels: Vec<Vec<String>>,
    pub restr: Vec<Vec<usize>>,
}

impl FinitePresheaf {
    /// `restr` gives one map per non-identity arrow, keyed by arrow index; identities
    /// are filled in.
    pub fn from_maps(
        site: Arc<ProbeSite>,
        labels: Vec<Vec<String>>,
        maps: HashMap<usize, Vec<usize>>,
    ) -> Result<Self, SheafError> {
        let restr = (0..site.arrows.len())
            .map(|a| {
                let arr = &site.arrows[a];
                if arr.identity {
                    Ok((0..labels.get(arr.dst).map_or(0, Vec::len)).collect())
                } else {
                    maps.get(&a).cloned().ok_or_else(|| {
                        SheafError::Presheaf(format!("no restriction along {}", arr.name))
                    })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        FinitePresheaf::new(site, labels, restr)
    }

    pub fn new(
        site: Arc<ProbeSite>,
        labels: Vec<Vec<String>>,
        restr: Vec<Vec<usize>>,
    ) -> Result<Self, SheafError> {
        if labels.len() != site.objects.len() || restr.len() != site.arrows.len() {
            return Err(SheafError::Presheaf(
                "table sizes do not match the site".into(),
            ));
        }
        if let Some(k) = labels.iter().position(Vec::is_empty) {
            return Err(SheafError::Presheaf(format!(
                "{} has no elements",
                site.objects[k].name
            )));
        }
        for (a, arr) in site.arrows.iter().enumerate() {
            let (n_src, n_dst) = (labels[arr.src].len(), labels[arr.dst].len());
            if restr[a].len() != n_dst || restr[a].iter().any(|&x| x >= n_src) {
                return Err(SheafError::Presheaf(format!(
                    "restriction along {} is not a map",
                    arr.name
                )));
            }
            if arr.identity && restr[a].iter().enumerate().any(|(i, &x)| i != x) {
                return Err(SheafError::Presheaf(format!(
                    "{} does not act as the identity",
                    arr.name
                )));
            }
        }
        let p = FinitePresheaf {
            site,
            labels,
            restr,
        };
        for (f, g, gf) in p.site.compositions() {
            for z in 0..p.size(p.site.arrows[g].dst) {
                if p.restr[gf][z] != p.restr[f][p.restr[g][z]] {
                    return Err(SheafError::Presheaf(format!(
                        "restriction along {} is not the composite of {} and {}",
                        p.site.arrows[gf].name, p.site.arrows[g].name, p.site.arrows[f].name
                    )));
                }
            }
        }
        Ok(p)
    }

    pub fn size(&self, obj: usize) -> usize {
        self.labels[obj].len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.labels.iter().map(Vec::len).collect()
    }

    pub fn restrict(&self, arrow: usize, x: usize) -> usize {
        self.restr[arrow][x]
    }

    /// `(a*x)` for every point inclusion `a` of `obj`.
    pub fn point_tuple(&self, obj: usize, x: usize) -> Vec<usize> {
        self.site
            .points_of(obj)
            .iter()
            .map(|&a| self.restr[a][x])
            .collect()
    }

    pub fn identity_morphism(&self) -> PresheafMorphism {
        PresheafMorphism {
            components: self.labels.iter().map(|l| (0..l.len()).collect()).collect(),
        }
    }
}

/// Components `P(U) → Q(U)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PresheafMorphism {
    pub components: Vec<Vec<usize>>,
}

impl PresheafMorphism {
    pub fn is_natural(&self, p: &FinitePresheaf, q: &FinitePresheaf) -> Verdict {
        for (a, arr) in p.site.arrows.iter().enumerate() {
            for y in 0..p.size(arr.dst) {
                let lhs = self.components[arr.src][p.restr[a][y]];
                let rhs = q.restr[a][self.components[arr.dst][y]];
                if lhs != rhs {
                    return Verdict::refuted(format!(
                        "naturality fails along {} at {}",
                        arr.name, p.labels[arr.dst][y]
                    ))
                    .in_piece(a);
                }
            }
        }
        Verdict::Pass
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &PresheafMorphism) -> PresheafMorphism {
        PresheafMorphism {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(f, g)| f.iter().map(|&x| g[x]).collect())
                .collect(),
        }
    }

    pub fn is_bijective(&self, target_sizes: &[usize]) -> bool {
        self.components.iter().zip(target_sizes).all(|(c, &n)| {
            let mut seen = vec![false; n];
            c.len() == n
                && c.iter()
                    .all(|&x| x < n && !std::mem::replace(&mut seen[x], true))
        })
    }
}

pub fn is_concrete_at(p: &FinitePresheaf, obj: usize) -> Result<Verdict, SheafError> {
    if p.site.points_of(obj).is_empty() {
        return Err(SheafError::NoPoints(p.site.objects[obj].name.clone()));
    }
    let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
    for x in 0..p.size(obj) {
        if let Some(&y) = seen.get(&p.point_tuple(obj, x)) {
            return Ok(Verdict::refuted(format!(
                "{} and {} have the same point values",
                p.labels[obj][y], p.labels[obj][x]
            ))
            .in_piece(obj));
        }
        seen.insert(p.point_tuple(obj, x), x);
    }
    Ok(Verdict::Pass)
}

pub fn is_concrete(p: &FinitePresheaf) -> Result<Verdict, SheafError> {
    let vs = (0..p.site.objects.len())
        .map(|k| is_concrete_at(p, k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Verdict::all(vs))
}

/// Quotient by equality of point values, with the quotient map as unit.
pub fn concretize_kappa(
    p: &FinitePresheaf,
) -> Result<(FinitePresheaf, PresheafMorphism), SheafError> {
    let site = &p.site;
    let mut class_of = Vec::new();
    let mut labels = Vec::new();
    for obj in 0..site.objects.len() {
        if site.points_of(obj).is_empty() {
            return Err(SheafError::NoPoints(site.objects[obj].name.clone()));
        }
        let mut keys: Vec<Vec<usize>> = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut cls = Vec::with_capacity(p.size(obj));
        for x in 0..p.size(obj) {
            let t = p.point_tuple(obj, x);
            let k = keys.iter().position(|s| *s == t).unwrap_or_else(|| {
                keys.push(t);
                members.push(Vec::new());
                keys.len() - 1
            });
            members[k].push(x);
            cls.push(k);
        }
        labels.push(
            members
                .iter()
                .map(|m| {
                    if m.len() == 1 {
                        p.labels[obj][m[0]].clone()
                    } else {
                        format!(
                            "[{}]",
                            m.iter()
                                .map(|&x| p.labels[obj][x].as_str())
                                .collect::<Vec<_>>()
                                .join("|")
                        )
                    }
                })
                .collect::<Vec<_>>(),
        );
        class_of.push(cls);
    }
    let mut restr = Vec::with_capacity(site.arrows.len());
    for (a, arr) in site.arrows.iter().enumerate() {
        let mut m = vec![usize::MAX; labels[arr.dst].len()];
        for y in 0..p.size(arr.dst) {
            let (cy, cx) = (class_of[arr.dst][y], class_of[arr.src][p.restr[a][y]]);
            if m[cy] == usize::MAX {
                m[cy] = cx;
            } else if m[cy] != cx {
                return Err(SheafError::DescentFailure(format!(
                    "restriction along {} separates {}",
                    arr.name, labels[arr.dst][cy]
                )));
            }
        }
        restr.push(m);
    }
    let q = FinitePresheaf::new(site.clone(), labels, restr)?;
    Ok((
        q,
        PresheafMorphism {
            components: class_of,
        },
    ))
}

fn matching_families(p: &FinitePresheaf, cover: &SiteCover) -> Result<Vec<Vec<usize>>, SheafError> {
    let site = &p.site;
    let sizes: Vec<usize> = cover
        .pieces
        .iter()
        .map(|&u| p.size(site.arrows[u].src))
        .collect();
    let total = sizes
        .iter()
        .try_fold(1u64, |acc, &n| acc.checked_mul(n as u64));
    match total {
        Some(t) if t <= FAMILY_BOUND => {}
        _ => return Err(SheafError::SearchTooLarge(total.unwrap_or(u64::MAX))),
    }
    let mut out = Vec::new();
    let mut x = vec![0usize; sizes.len()];
    loop {
        if cover
            .overlaps
            .iter()
            .all(|o| p.restr[o.to_a][x[o.a]] == p.restr[o.to_b][x[o.b]])
        {
            out.push(x.clone());
        }
        let mut i = 0;
        loop {
            if i == x.len() {
                return Ok(out);
            }
            x[i] += 1;
            if x[i] < sizes[i] {
                break;
            }
            x[i] = 0;
            i += 1;
        }
    }
}

/// Unique gluing of matching families on every declared cover.
pub fn is_sheaf(p: &FinitePresheaf) -> Result<Verdict, SheafError> {
    let site = &p.site;
    for obj in 0..site.objects.len() {
        let Some(cover) = site.cover(obj) else {
            continue;
        };
        let fams = matching_families(p, cover)?;
        let image: Vec<Vec<usize>> = (0..p.size(obj))
            .map(|y| cover.pieces.iter().map(|&u| p.restr[u][y]).collect())
            .collect();
        for (y, fam) in image.iter().enumerate() {
            if let Some(z) = image[..y].iter().position(|f| f == fam) {
                return Ok(Verdict::refuted(format!(
                    "{} and {} agree on the cover of {}",
                    p.labels[obj][z], p.labels[obj][y], site.objects[obj].name
                ))
                .in_piece(obj));
            }
        }
        if let Some(f) = fams.iter().find(|f| !image.contains(f)) {
            return Ok(Verdict::refuted(format!(
                "matching family {f:?} on the cover of {} does not glue",
                site.objects[obj].name
            ))
            .in_piece(obj));
        }
    }
    Ok(Verdict::Pass)
}

/// One plus step: covered objects get their matching families.
pub fn plus(p: &FinitePresheaf) -> Result<(FinitePresheaf, PresheafMorphism), SheafError> {
    let site = p.site.clone();
    let n = site.objects.len();
    let mut fams: Vec<Option<Vec<Vec<usize>>>> = vec![None; n];
    for (obj, f) in fams.iter_mut().enumerate() {
        if let Some(c) = site.cover(obj) {
            *f = Some(matching_families(p, c)?);
        }
    }
    let labels: Vec<Vec<String>> = (0..n)
        .map(|obj| match (&fams[obj], site.cover(obj)) {
            (Some(fs), Some(c)) => fs
                .iter()
                .map(|f| {
                    let parts: Vec<&str> = f
                        .iter()
                        .zip(&c.pieces)
                        .map(|(&x, &u)| p.labels[site.arrows[u].src][x].as_str())
                        .collect();
                    format!("({})", parts.join(","))
                })
                .collect(),
            _ => p.labels[obj].clone(),
        })
        .collect();
    if let Some(k) = labels.iter().position(Vec::is_empty) {
        return Err(SheafError::InconsistentSite(format!(
            "no matching family on the cover of {}",
            site.objects[k].name
        )));
    }
    // Value in P(X) of x ∈ P⁺(B) along h: X → B, for uncovered X.
    let eval = |h: usize, x: usize| -> Result<usize, SheafError> {
        let b = site.arrows[h].dst;
        let (Some(fs), Some(c)) = (&fams[b], site.cover(b)) else {
            return Ok(p.restr[h][x]);
        };
        let mut val: Option<usize> = None;
        for (i, &u) in c.pieces.iter().enumerate() {
            for g in site.factorizations(h, u) {
                let v = p.restr[g][fs[x][i]];
                match val {
                    Some(w) if w != v => {
                        return Err(SheafError::InconsistentSite(format!(
                            "factorizations of {} through the cover disagree",
                            site.arrows[h].name
                        )))
                    }
                    _ => val = Some(v),
                }
            }
        }
        val.ok_or_else(|| {
            SheafError::InconsistentSite(format!(
                "{} does not factor through the cover of {}",
                site.arrows[h].name, site.objects[b].name
            ))
        })
    };
    let mut restr = Vec::with_capacity(site.arrows.len());
    for (f, arr) in site.arrows.iter().enumerate() {
        if arr.identity {
            restr.push((0..labels[arr.dst].len()).collect());
            continue;
        }
        let mut m = Vec::with_capacity(labels[arr.dst].len());
        for x in 0..labels[arr.dst].len() {
            let v = match (&fams[arr.src], site.cover(arr.src)) {
                (Some(fs), Some(c)) => {
                    let comps = c
                        .pieces
                        .iter()
                        .map(|&u| {
                            if site.cover(site.arrows[u].src).is_some() {
                                return Err(SheafError::Site(
                                    "cover pieces must not be covered".into(),
                                ));
                            }
                            let h = site.compose(u, f).ok_or_else(|| {
                                SheafError::InconsistentSite(format!(
                                    "{} ∘ {} is not declared",
                                    arr.name, site.arrows[u].name
                                ))
                            })?;
                            eval(h, x)
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    fs.iter().position(|fam| *fam == comps).ok_or_else(|| {
                        SheafError::InconsistentSite(format!(
                            "restriction along {} is not a matching family",
                            arr.name
                        ))
                    })?
                }
                _ => eval(f, x)?,
            };
            m.push(v);
        }
        restr.push(m);
    }
    let unit = PresheafMorphism {
        components: (0..n)
            .map(|obj| match (&fams[obj], site.cover(obj)) {
                (Some(fs), Some(c)) => (0..p.size(obj))
                    .map(|y| {
                        let fam: Vec<usize> = c.pieces.iter().map(|&u| p.restr[u][y]).collect();
                        fs.iter()
                            .position(|f| *f == fam)
                            .expect("restrictions form a matching family")
                    })
                    .collect(),
                _ => (0..p.size(obj)).collect(),
            })
            .collect(),
    };
    let q = FinitePresheaf::new(site.clone(), labels, restr)
        .map_err(|e| SheafError::InconsistentSite(e.to_string()))?;
    Ok((q, unit))
}

/// Plus construction until the sheaf condition holds, with the composite unit.
pub fn sheafify(p: &FinitePresheaf) -> Result<(FinitePresheaf, PresheafMorphism), SheafError> {
    const GUARD: usize = 3;
    let mut cur = p.clone();
    let mut unit = p.identity_morphism();
    for _ in 0..GUARD {
        if is_sheaf(&cur)?.is_pass() {
            return Ok((cur, unit));
        }
        let (next, eta) = plus(&cur)?;
        unit = unit.then(&eta);
        cur = next;
    }
    if is_sheaf(&cur)?.is_pass() {
        Ok((cur, unit))
    } else {
        Err(SheafError::NonTermination(GUARD))
    }
}

/// `sheafify(κ(P))` with the composite unit `P → κ̂(P)`.
pub fn kappa_hat(p: &FinitePresheaf) -> Result<(FinitePresheaf, PresheafMorphism), SheafError> {
    let (k, eta1) = concretize_kappa(p)?;
    let (s, eta2) = sheafify(&k)?;
    Ok((s, eta1.then(&eta2)))
}

/// Exhaustive isomorphism search between two presheaves on the same site.
pub fn find_isomorphism(
    p: &FinitePresheaf,
    q: &FinitePresheaf,
    bound: u64,
) -> Result<Option<PresheafMorphism>, SheafError> {
    if p.sizes() != q.sizes() {
        return Ok(None);
    }
    let fact = |n: usize| (1..=n as u64).product::<u64>();
    let total = p
        .sizes()
        .iter()
        .try_fold(1u64, |acc, &n| acc.checked_mul(fact(n)));
    match total {
        Some(t) if t <= bound => {}
        _ => return Err(SheafError::SearchTooLarge(total.unwrap_or(u64::MAX))),
    }
    let perms: Vec<Vec<Vec<usize>>> = p.sizes().iter().map(|&n| permutations(n)).collect();
    let mut idx = vec![0usize; perms.len()];
    loop {
        let m = PresheafMorphism {
            components: idx
                .iter()
                .zip(&perms)
                .map(|(&i, ps)| ps[i].clone())
                .collect(),
        };
        if m.is_natural(p, q).is_pass() {
            return Ok(Some(m));
        }
        let mut i = 0;
        loop {
            if i == idx.len() {
                return Ok(None);
            }
            idx[i] += 1;
            if idx[i] < perms[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdjunctionReport {
    pub verdict: Verdict,
    /// Number of factorizations found, capped at 2.
    pub factorizations: usize,
    /// Candidate morphisms examined.
    pub searched: u64,
    pub psi: Option<PresheafMorphism>,
}

/// Exactly one `ψ: κ̂(P) → C` with `ψ∘η = φ`. Components on the image of `η` are
/// forced by `φ`; the remaining elements are searched exhaustively.
pub fn verify_left_adjoint_factorization(
    p: &FinitePresheaf,
    c: &FinitePresheaf,
    phi: &PresheafMorphism,
    bound: u64,
    exec: Exec,
) -> Result<AdjunctionReport, SheafError> {
    if let Verdict::Refuted(r) = is_concrete(c)? {
        return Err(SheafError::Precondition(format!(
            "target is not concrete: {}",
            r.reason
        )));
    }
    if let Verdict::Refuted(r) = is_sheaf(c)? {
        return Err(SheafError::Precondition(format!(
            "target is not a sheaf: {}",
            r.reason
        )));
    }
    if let Verdict::Refuted(r) = phi.is_natural(p, c) {
        return Err(SheafError::Precondition(format!(
            "φ is not natural: {}",
            r.reason
        )));
    }
    let (k, eta) = kappa_hat(p)?;
    let n = k.site.objects.len();
    let mut forced: Vec<Vec<Option<usize>>> = (0..n).map(|o| vec![None; k.size(o)]).collect();
    for (obj, slots) in forced.iter_mut().enumerate() {
        for (x, &kx) in eta.components[obj].iter().enumerate() {
            let v = phi.components[obj][x];
            match slots[kx] {
                Some(w) if w != v => {
                    return Ok(AdjunctionReport {
                        verdict: Verdict::refuted(format!(
                            "φ separates elements identified in κ̂ at {}",
                            k.site.objects[obj].name
                        ))
                        .in_piece(obj),
                        factorizations: 0,
                        searched: 0,
                        psi: None,
                    })
                }
                _ => slots[kx] = Some(v),
            }
        }
    }
    let free: Vec<(usize, usize)> = (0..n)
        .flat_map(|o| (0..k.size(o)).map(move |x| (o, x)))
        .filter(|&(o, x)| forced[o][x].is_none())
        .collect();
    let radices: Vec<u64> = free.iter().map(|&(o, _)| c.size(o) as u64).collect();
    let total = radices.iter().try_fold(1u64, |acc, &r| acc.checked_mul(r));
    let total = match total {
        Some(t) if t <= bound => t,
        _ => return Err(SheafError::SearchTooLarge(total.unwrap_or(u64::MAX))),
    };
    let build = |mut idx: u64| -> PresheafMorphism {
        let mut comps: Vec<Vec<usize>> = forced
            .iter()
            .map(|f| f.iter().map(|v| v.unwrap_or(0)).collect())
            .collect();
        for (&(o, x), &r) in free.iter().zip(&radices) {
            comps[o][x] = (idx % r) as usize;
            idx /= r;
        }
        PresheafMorphism { components: comps }
    };
    const CHUNK: u64 = 4096;
    let chunks = total.div_ceil(CHUNK) as usize;
    let hits: Vec<Vec<u64>> = exec.map_range(chunks, |ch| {
        let lo = ch as u64 * CHUNK;
        let hi = (lo + CHUNK).min(total);
        (lo..hi)
            .filter(|&i| build(i).is_natural(&k, c).is_pass())
            .take(2)
            .collect()
    });
    let sols: Vec<u64> = hits.into_iter().flatten().take(2).collect();
    let verdict = match sols.len() {
        1 => Verdict::Pass,
        0 => Verdict::refuted("no factorization through κ̂ exists"),
        _ => Verdict::refuted("factorization through κ̂ is not unique"),
    };
    Ok(AdjunctionReport {
        verdict,
        factorizations: sols.len(),
        searched: total,
        psi: (sols.len() == 1).then(|| build(sols[0])),
    })
}

/// `pt`, `V`, `U` with points `v0, v1 → V`, `u0, u1 → U`, `ι: V → U` covering `U`
/// and `ι∘v_k = u_k`.
pub fn trial_site() -> Arc<ProbeSite> {
    let mut s = ProbeSite::new("trial");
    let v = s.add_object("V", None);
    let u = s.add_object("U", None);
    let v0 = s.add_point("v0", v, None).unwrap();
    let v1 = s.add_point("v1", v, None).unwrap();
    let u0 = s.add_point("u0", u, None).unwrap();
    let u1 = s.add_point("u1", u, None).unwrap();
    let i = s.add_arrow("ι", v, u, None).unwrap();
    s.add_composition(v0, i, u0).unwrap();
    s.add_composition(v1, i, u1).unwrap();
    s.set_cover(
        u,
        SiteCover {
            pieces: vec![i],
            overlaps: vec![],
        },
    )
    .unwrap();
    Arc::new(s)
}

#[derive(Clone, Debug)]
pub struct AdjunctionTrial {
    pub p: FinitePresheaf,
    pub c: FinitePresheaf,
    pub phi: PresheafMorphism,
}

/// Random presheaf on [`trial_site`] (at most 4 elements per object), a random
/// concrete sheaf built from tuples of point values, and the natural map forced
/// by a random `φ_pt`.
pub fn random_adjunction_trial(seed: u64) -> AdjunctionTrial {
    let site = trial_site();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = |name: &str| site.arrow_index(name).unwrap();
    let (v0, v1, u0, u1, i) = (idx("v0"), idx("v1"), idx("u0"), idx("u1"), idx("ι"));
    let sizes: Vec<usize> = (0..3).map(|_| rng.gen_range(1..=4)).collect();
    let mut rand_map = |from: usize, to: usize| -> Vec<usize> {
        (0..from).map(|_| rng.gen_range(0..to)).collect()
    };
    let r_i = rand_map(sizes[2], sizes[1]);
    let r_v0 = rand_map(sizes[1], sizes[0]);
    let r_v1 = rand_map(sizes[1], sizes[0]);
    let r_u0: Vec<usize> = r_i.iter().map(|&y| r_v0[y]).collect();
    let r_u1: Vec<usize> = r_i.iter().map(|&y| r_v1[y]).collect();
    let labels =
        |prefix: &str, n: usize| (0..n).map(|k| format!("{prefix}{k}")).collect::<Vec<_>>();
    let p = FinitePresheaf::from_maps(
        site.clone(),
        vec![
            labels("p", sizes[0]),
            labels("v", sizes[1]),
            labels("u", sizes[2]),
        ],
        HashMap::from([
            (v0, r_v0.clone()),
            (v1, r_v1.clone()),
            (u0, r_u0.clone()),
            (u1, r_u1.clone()),
            (i, r_i.clone()),
        ]),
    )
    .expect("functorial by construction");

    let m = rng.gen_range(1..=4usize);
    let phi_pt: Vec<usize> = (0..sizes[0]).map(|_| rng.gen_range(0..m)).collect();
    let mut tuples: Vec<(usize, usize)> = (0..sizes[1])
        .map(|y| (phi_pt[r_v0[y]], phi_pt[r_v1[y]]))
        .collect();
    tuples.sort_unstable();
    tuples.dedup();
    // Extra tuples never displace those in the image of φ, and C stays within 4 elements.
    for _ in 0..rng.gen_range(0..=2) {
        let tp = (rng.gen_range(0..m), rng.gen_range(0..m));
        if tuples.len() < 4 && !tuples.contains(&tp) {
            tuples.push(tp);
        }
    }
    tuples.sort_unstable();
    let t = tuples.len();
    let pos = |tp: (usize, usize)| tuples.iter().position(|&s| s == tp).unwrap();
    let c = FinitePresheaf::from_maps(
        site.clone(),
        vec![
            labels("c", m),
            tuples.iter().map(|(a, b)| format!("c{a}c{b}")).collect(),
            tuples.iter().map(|(a, b)| format!("c{a}c{b}")).collect(),
        ],
        HashMap::from([
            (v0, tuples.iter().map(|s| s.0).collect()),
            (v1, tuples.iter().map(|s| s.1).collect()),
            (u0, tuples.iter().map(|s| s.0).collect()),
            (u1, tuples.iter().map(|s| s.1).collect()),
            (i, (0..t).collect()),
        ]),
    )
    .expect("functorial by construction");
    let phi_v: Vec<usize> = (0..sizes[1])
        .map(|y| pos((phi_pt[r_v0[y]], phi_pt[r_v1[y]])))
        .collect();
    let phi_u: Vec<usize> = r_i.iter().map(|&y| phi_v[y]).collect();
    AdjunctionTrial {
        p,
        c,
        phi: PresheafMorphism {
            components: vec![phi_pt, phi_v, phi_u],
        },
    }
}

/// Run `n` seeded trials; each report is paired with its seed.
pub fn run_adjunction_trials(
    seed: u64,
    n: usize,
    exec: Exec,
) -> Vec<(u64, Result<AdjunctionReport, SheafError>)> {
    exec.map_range(n, |k| {
        let s = seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(k as u64);
        let t = random_adjunction_trial(s);
        (
            s,
            verify_left_adjoint_factorization(
                &t.p,
                &t.c,
                &t.phi,
                ADJUNCTION_SEARCH_BOUND,
                Exec::Sequential,
            ),
        )
    })
}

/// `pt`, arcs `A`, `B`, their two-component overlap `AB`, and the circle `S`
/// covered by `{A, B}`.
pub fn circle_site() -> Arc<ProbeSite> {
    let mut s = ProbeSite::new("circle");
    let a = s.add_object("A", None);
    let b = s.add_object("B", None);
    let ab = s.add_object("AB", None);
    let c = s.add_object("S", None);
    let ia = s.add_arrow("iA", a, c, None).unwrap();
    let ib = s.add_arrow("iB", b, c, None).unwrap();
    let ja = s.add_arrow("jA", ab, a, None).unwrap();
    let jb = s.add_arrow("jB", ab, b, None).unwrap();
    let k = s.add_arrow("k", ab, c, None).unwrap();
    s.add_composition(ja, ia, k).unwrap();
    s.add_composition(jb, ib, k).unwrap();
    let a0 = s.add_point("a0", a, None).unwrap();
    let b0 = s.add_point("b0", b, None).unwrap();
    let sa = s.add_point("sA", c, None).unwrap();
    let sb = s.add_point("sB", c, None).unwrap();
    s.add_composition(a0, ia, sa).unwrap();
    s.add_composition(b0, ib, sb).unwrap();
    for comp in 1..=2 {
        let e = s.add_point(format!("e{comp}"), ab, None).unwrap();
        let ak = s.add_point(format!("a{comp}"), a, None).unwrap();
        let bk = s.add_point(format!("b{comp}"), b, None).unwrap();
        let sk = s.add_point(format!("s{comp}"), c, None).unwrap();
        s.add_composition(e, ja, ak).unwrap();
        s.add_composition(e, jb, bk).unwrap();
        s.add_composition(ak, ia, sk).unwrap();
        s.add_composition(bk, ib, sk).unwrap();
        s.add_composition(e, k, sk).unwrap();
    }
    s.set_cover(
        c,
        SiteCover {
            pieces: vec![ia, ib],
            overlaps: vec![CoverOverlap {
                a: 0,
                b: 1,
                object: ab,
                to_a: ja,
                to_b: jb,
            }],
        },
    )
    .unwrap();
    Arc::new(s)
}

/// Isomorphism classes of `Γ`-bundles on [`circle_site`]: one on every contractible
/// object, one per Čech class on the circle.
pub fn pi0_gerbe_table(group: &FiniteGroup, exec: Exec) -> Result<FinitePresheaf, SheafError> {
    let site = circle_site();
    let classes = cocycle_classes(group, &CoverGraph::circle_two_arcs(), exec)
        .map_err(|e| SheafError::Presheaf(e.to_string()))?;
    let s = site.object_index("S").expect("circle object");
    let labels: Vec<Vec<String>> = (0..site.objects.len())
        .map(|o| {
            if o == s {
                classes
                    .iter()
                    .map(|c| format!("{:?}", c.representative))
                    .collect()
            } else {
                vec!["triv".to_string()]
            }
        })
        .collect();
    let restr = site
        .arrows
        .iter()
        .map(|a| {
            if a.identity {
                (0..labels[a.dst].len()).collect()
            } else {
                vec![0; labels[a.dst].len()]
            }
        })
        .collect();
    FinitePresheaf::new(site, labels, restr)
}

/// `pt`, an interval `I`, a square `D`, the curve `c(t) = (t, t/2)` and point
/// inclusions at a few sample points.
pub fn forms_site(tol: &Tolerances) -> Arc<ProbeSite> {
    let mut s = ProbeSite::new("forms");
    let i = Domain::interval(-1.0, 1.0).expect("valid interval");
    let d = Domain::boxed(&[(-1.0, 1.0), (-1.0, 1.0)], Default::default()).expect("valid box");
    let oi = s.add_object("I", Some(i.clone()));
    let od = s.add_object("D", Some(d));
    let curve = SmoothEuclMap::from_exprs(
        "c",
        i,
        vec![
            ScalarExpr::Coord(0),
            ScalarExpr::scale(0.5, ScalarExpr::Coord(0)),
        ],
    )
    .expect("valid curve");
    s.add_arrow("c", oi, od, Some(curve)).unwrap();
    for (name, t) in [("i-", -0.5), ("i+", 0.5)] {
        s.add_point(name, oi, Some(vec![t])).unwrap();
    }
    for (name, p) in [
        ("d0", [0.0, 0.0]),
        ("d-", [-0.5, -0.25]),
        ("d+", [0.5, 0.25]),
    ] {
        s.add_point(name, od, Some(p.to_vec())).unwrap();
    }
    s.derive_point_compositions(tol);
    Arc::new(s)
}

enum SiteValue {
    Form(EuclForm),
    Scalar(Vec<f64>),
}

impl SiteValue {
    fn signature(&self, samples: &[Point]) -> Vec<f64> {
        match self {
            SiteValue::Scalar(v) => v.clone(),
            SiteValue::Form(f) => samples.iter().flat_map(|x| f.eval(x)).collect(),
        }
    }

    fn label(&self) -> String {
        match self {
            SiteValue::Scalar(v) if v.is_empty() => "0".into(),
            SiteValue::Scalar(v) => format!("{}", v[0]),
            SiteValue::Form(f) => f.name().to_string(),
        }
    }
}

/// Degree-`k` forms on a geometric site: seeded per object, closed under all
/// restrictions, elements identified by their coefficients at object samples.
pub fn omega_table(
    site: &Arc<ProbeSite>,
    k: usize,
    seeds: &[(usize, Vec<EuclForm>)],
    tol: &Tolerances,
) -> Result<FinitePresheaf, SheafError> {
    const MAX_ELEMENTS: usize = 64;
    let n = site.objects.len();
    let samples: Vec<Vec<Point>> = site
        .objects
        .iter()
        .map(|o| {
            o.geometry.as_ref().map_or_else(Vec::new, |d| {
                d.samples().iter().step_by(4).cloned().collect()
            })
        })
        .collect();
    let mut values: Vec<Vec<SiteValue>> = (0..n).map(|_| Vec::new()).collect();
    for (obj, forms) in seeds {
        for f in forms {
            if f.degree() != k {
                return Err(SheafError::Presheaf(format!(
                    "{} has degree {}, not {k}",
                    f.name(),
                    f.degree()
                )));
            }
            values[*obj].push(SiteValue::Form(f.clone()));
        }
    }
    let same = |a: &[f64], b: &[f64]| {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol.form_tol)
    };
    let pull = |arrow: &SiteArrow, v: &SiteValue| -> Result<SiteValue, SheafError> {
        match (v, &arrow.at, &arrow.map) {
            (SiteValue::Form(f), Some(p), _) => Ok(SiteValue::Scalar(if k == 0 {
                f.eval(p)
            } else {
                Vec::new()
            })),
            (SiteValue::Form(f), None, Some(m)) => pullback(m, f, tol)
                .map(SiteValue::Form)
                .map_err(|e| SheafError::Site(e.to_string())),
            _ => Err(SheafError::Site(format!(
                "{} carries no geometry",
                arrow.name
            ))),
        }
    };
    let find = |vals: &[SiteValue], sig: &[f64], samples: &[Point]| {
        vals.iter().position(|w| same(&w.signature(samples), sig))
    };
    loop {
        let mut grew = false;
        for arr in site.arrows.iter().filter(|a| !a.identity) {
            let mut j = 0;
            while j < values[arr.dst].len() {
                let img = pull(arr, &values[arr.dst][j])?;
                let sig = img.signature(&samples[arr.src]);
                if find(&values[arr.src], &sig, &samples[arr.src]).is_none() {
                    values[arr.src].push(img);
                    grew = true;
                    if values[arr.src].len() > MAX_ELEMENTS {
                        return Err(SheafError::Presheaf("form table does not close up".into()));
                    }
                }
                j += 1;
            }
        }
        if !grew {
            break;
        }
    }
    for (obj, v) in values.iter_mut().enumerate() {
        if v.is_empty() && obj == POINT {
            v.push(SiteValue::Scalar(if k == 0 {
                vec![0.0]
            } else {
                Vec::new()
            }));
        }
    }
    let mut restr = Vec::with_capacity(site.arrows.len());
    for arr in &site.arrows {
        if arr.identity {
            restr.push((0..values[arr.dst].len()).collect());
            continue;
        }
        let m = values[arr.dst]
            .iter()
            .map(|v| {
                let img = pull(arr, v)?;
                find(
                    &values[arr.src],
                    &img.signature(&samples[arr.src]),
                    &samples[arr.src],
                )
                .ok_or_else(|| SheafError::Presheaf("restriction escaped the table".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        restr.push(m);
    }
    let labels = values
        .iter()
        .map(|vs| vs.iter().map(SiteValue::label).collect())
        .collect();
    FinitePresheaf::new(site.clone(), labels, restr)
}

/// Seed forms of degree `k ∈ {0, 1, 2}` on [`forms_site`].
pub fn omega_seeds(site: &ProbeSite, k: usize) -> Vec<(usize, Vec<EuclForm>)> {
    let (oi, od) = (
        site.object_index("I").unwrap(),
        site.object_index("D").unwrap(),
    );
    let i = site.objects[oi].geometry.clone().unwrap();
    let d = site.objects[od].geometry.clone().unwrap();
    let e = |name: &str, dom: &Domain, deg: usize, c: Vec<ScalarExpr>| {
        EuclForm::from_exprs(name, dom.clone(), deg, c).expect("seed shape")
    };
    use ScalarExpr::{Const, Coord};
    let mono = |p: Vec<u32>| ScalarExpr::Monomial {
        coef: 1.0,
        powers: p,
    };
    match k {
        0 => vec![
            (
                oi,
                vec![
                    e("1", &i, 0, vec![Const(1.0)]),
                    e("t", &i, 0, vec![Coord(0)]),
                    e("t²", &i, 0, vec![mono(vec![2])]),
                ],
            ),
            (
                od,
                vec![
                    e("1", &d, 0, vec![Const(1.0)]),
                    e("x", &d, 0, vec![Coord(0)]),
                    e("y", &d, 0, vec![Coord(1)]),
                    e("xy", &d, 0, vec![mono(vec![1, 1])]),
                ],
            ),
        ],
        1 => vec![
            (
                oi,
                vec![
                    e("0", &i, 1, vec![Const(0.0)]),
                    e("dt", &i, 1, vec![Const(1.0)]),
                    e("t dt", &i, 1, vec![Coord(0)]),
                ],
            ),
            (
                od,
                vec![
                    e("dx", &d, 1, vec![Const(1.0), Const(0.0)]),
                    e("dy", &d, 1, vec![Const(0.0), Const(1.0)]),
                    e("x dy", &d, 1, vec![Const(0.0), Coord(0)]),
                ],
            ),
        ],
        _ => vec![(
            od,
            vec![
                e("0", &d, 2, vec![Const(0.0)]),
                e("dx∧dy", &d, 2, vec![Const(1.0)]),
                e("x dx∧dy", &d, 2, vec![Coord(0)]),
            ],
        )],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn singleton(site: &Arc<ProbeSite>) -> FinitePresheaf {
        let n = site.objects().len();
        FinitePresheaf::new(
            site.clone(),
            vec![vec!["*".into()]; n],
            vec![vec![0]; site.arrows().len()],
        )
        .unwrap()
    }

    /// All natural maps `p → q`, by brute force over every component assignment.
    fn all_morphisms(p: &FinitePresheaf, q: &FinitePresheaf) -> Vec<PresheafMorphism> {
        let slots: Vec<(usize, usize)> = (0..p.sizes().len())
            .flat_map(|o| (0..p.size(o)).map(move |x| (o, x)))
            .collect();
        let total: usize = slots.iter().map(|&(o, _)| q.size(o)).product();
        (0..total)
            .filter_map(|mut i| {
                let mut comps: Vec<Vec<usize>> = p.sizes().iter().map(|&n| vec![0; n]).collect();
                for &(o, x) in &slots {
                    comps[o][x] = i % q.size(o);
                    i /= q.size(o);
                }
                let m = PresheafMorphism { components: comps };
                m.is_natural(p, q).is_pass().then_some(m)
            })
            .collect()
    }

    #[test]
    fn sites_validate() {
        circle_site().validate().unwrap();
        trial_site().validate().unwrap();
        forms_site(&tol()).validate().unwrap();
        let mut s = ProbeSite::new("bad");
        s.add_object("X", None);
        assert!(matches!(s.validate(), Err(SheafError::NoPoints(_))));
    }

    #[test]
    fn forms_site_derives_point_compositions() {
        let s = forms_site(&tol());
        let c = s.arrow_index("c").unwrap();
        let ip = s.arrow_index("i+").unwrap();
        assert_eq!(s.compose(ip, c), s.arrow_index("d+"));
    }

    #[test]
    fn omega_one_and_two_collapse() {
        let site = forms_site(&tol());
        for k in [1, 2] {
            let t = omega_table(&site, k, &omega_seeds(&site, k), &tol()).unwrap();
            let i = site.object_index("I").unwrap();
            if k == 1 {
                assert!(t.size(i) >= 2);
                assert!(is_concrete_at(&t, i).unwrap().is_refuted());
            }
            let (kt, _) = concretize_kappa(&t).unwrap();
            assert!(kt.sizes().iter().all(|&n| n == 1), "{:?}", kt.sizes());
        }
    }

    #[test]
    fn omega_zero_is_concrete() {
        let site = forms_site(&tol());
        let t = omega_table(&site, 0, &omega_seeds(&site, 0), &tol()).unwrap();
        assert!(is_concrete(&t).unwrap().is_pass());
        let (kt, unit) = concretize_kappa(&t).unwrap();
        assert!(unit.is_bijective(&kt.sizes()));
        assert!(unit.is_natural(&t, &kt).is_pass());
        // I carries 1, t, t², t/2, t²/2 after closing under c.
        assert_eq!(t.size(site.object_index("I").unwrap()), 5);
    }

    #[test]
    fn singleton_presheaf_is_concrete_sheaf() {
        let site = circle_site();
        let p = singleton(&site);
        assert!(is_concrete(&p).unwrap().is_pass());
        assert!(is_sheaf(&p).unwrap().is_pass());
        let (s, u) = sheafify(&p).unwrap();
        assert!(u.is_bijective(&s.sizes()));
    }

    #[test]
    fn bz2_table_collapses_at_the_circle() {
        for (n, classes) in [(2, 2), (3, 3)] {
            let t = pi0_gerbe_table(&FiniteGroup::cyclic(n), Exec::default()).unwrap();
            let s = t.site.object_index("S").unwrap();
            assert_eq!(t.size(s), classes);
            assert!(is_sheaf(&t).unwrap().is_refuted());
            let (sh, unit) = sheafify(&t).unwrap();
            assert_eq!(sh.size(s), 1);
            assert!(is_sheaf(&sh).unwrap().is_pass());
            assert!(unit.is_natural(&t, &sh).is_pass());
        }
    }

    #[test]
    fn sheafify_once_or_twice_after_kappa() {
        let t = pi0_gerbe_table(&FiniteGroup::cyclic(2), Exec::default()).unwrap();
        let (a, _) = sheafify(&concretize_kappa(&sheafify(&t).unwrap().0).unwrap().0).unwrap();
        let (b, _) = sheafify(&concretize_kappa(&t).unwrap().0).unwrap();
        assert!(find_isomorphism(&a, &b, 1_000_000).unwrap().is_some());
    }

    /// Two-piece cover of `X` by `L`, `R` with overlap `O`, one point each.
    fn two_piece_site() -> Arc<ProbeSite> {
        let mut s = ProbeSite::new("two");
        let l = s.add_object("L", None);
        let r = s.add_object("R", None);
        let o = s.add_object("O", None);
        let x = s.add_object("X", None);
        let il = s.add_arrow("iL", l, x, None).unwrap();
        let ir = s.add_arrow("iR", r, x, None).unwrap();
        let jl = s.add_arrow("jL", o, l, None).unwrap();
        let jr = s.add_arrow("jR", o, r, None).unwrap();
        let k = s.add_arrow("k", o, x, None).unwrap();
        s.add_composition(jl, il, k).unwrap();
        s.add_composition(jr, ir, k).unwrap();
        let po = s.add_point("o", o, None).unwrap();
        let pl = s.add_point("l", l, None).unwrap();
        let pr = s.add_point("r", r, None).unwrap();
        let px = s.add_point("x", x, None).unwrap();
        s.add_composition(po, jl, pl).unwrap();
        s.add_composition(po, jr, pr).unwrap();
        s.add_composition(pl, il, px).unwrap();
        s.add_composition(pr, ir, px).unwrap();
        s.add_composition(po, k, px).unwrap();
        s.set_cover(
            x,
            SiteCover {
                pieces: vec![il, ir],
                overlaps: vec![CoverOverlap {
                    a: 0,
                    b: 1,
                    object: o,
                    to_a: jl,
                    to_b: jr,
                }],
            },
        )
        .unwrap();
        Arc::new(s)
    }

    #[test]
    fn mismatched_sections_glue_to_hand_enumeration() {
        let site = two_piece_site();
        let a = |n: &str| site.arrow_index(n).unwrap();
        // P(L) = {l0,l1,l2}, P(R) = {r0,r1}, P(O) = {o0,o1}, P(X) = {x0,x1,x2,x3}.
        // Restrictions to O: l0,l1 ↦ o0, l2 ↦ o1; r0 ↦ o0, r1 ↦ o1.
        let jl = vec![0, 0, 1];
        let jr = vec![0, 1];
        // x0, x1 restrict to the same family (l0, r0); x2 ↦ (l2, r1); x3 ↦ (l0, r0).
        let il = vec![0, 0, 2, 0];
        let ir = vec![0, 0, 1, 0];
        let k: Vec<usize> = il.iter().map(|&y| jl[y]).collect();
        let po = vec![0, 1];
        let pl: Vec<usize> = jl.iter().map(|&y| po[y]).collect();
        let pr: Vec<usize> = jr.iter().map(|&y| po[y]).collect();
        let px: Vec<usize> = il.iter().map(|&y| pl[y]).collect();
        let p = FinitePresheaf::from_maps(
            site.clone(),
            vec![
                vec!["a".into(), "b".into()],
                vec!["l0".into(), "l1".into(), "l2".into()],
                vec!["r0".into(), "r1".into()],
                vec!["o0".into(), "o1".into()],
                vec!["x0".into(), "x1".into(), "x2".into(), "x3".into()],
            ],
            HashMap::from([
                (a("iL"), il),
                (a("iR"), ir),
                (a("jL"), jl),
                (a("jR"), jr),
                (a("k"), k),
                (a("o"), po),
                (a("l"), pl),
                (a("r"), pr),
                (a("x"), px),
            ]),
        )
        .unwrap();
        assert!(is_sheaf(&p).unwrap().is_refuted());
        // Matching families by hand: (l0,r0), (l1,r0), (l2,r1).
        let (s, unit) = sheafify(&p).unwrap();
        let x = site.object_index("X").unwrap();
        assert_eq!(s.labels[x], vec!["(l0,r0)", "(l1,r0)", "(l2,r1)"]);
        assert_eq!(unit.components[x], vec![0, 0, 2, 0]);
    }

    #[test]
    fn kappa_hat_is_idempotent_and_concrete() {
        let site = forms_site(&tol());
        let mut tables: Vec<FinitePresheaf> = (0..3)
            .map(|k| omega_table(&site, k, &omega_seeds(&site, k), &tol()).unwrap())
            .collect();
        tables.push(pi0_gerbe_table(&FiniteGroup::cyclic(2), Exec::default()).unwrap());
        for t in tables {
            let (k1, _) = kappa_hat(&t).unwrap();
            assert!(is_concrete(&k1).unwrap().is_pass());
            let (k2, u) = kappa_hat(&k1).unwrap();
            assert!(u.is_bijective(&k2.sizes()));
            assert_eq!(concretize_kappa(&k1).unwrap().0.sizes(), k1.sizes());
        }
    }

    #[test]
    fn identity_factorization_for_concrete_sheaf() {
        let site = forms_site(&tol());
        let t = omega_table(&site, 0, &omega_seeds(&site, 0), &tol()).unwrap();
        let r = verify_left_adjoint_factorization(
            &t,
            &t,
            &t.identity_morphism(),
            ADJUNCTION_SEARCH_BOUND,
            Exec::default(),
        )
        .unwrap();
        assert!(r.verdict.is_pass());
        assert_eq!(r.psi.unwrap(), t.identity_morphism());
    }

    #[test]
    fn collapse_to_terminal_factors_uniquely() {
        let site = forms_site(&tol());
        let t = omega_table(&site, 1, &omega_seeds(&site, 1), &tol()).unwrap();
        let one = singleton(&site);
        let phi = PresheafMorphism {
            components: t.sizes().iter().map(|&n| vec![0; n]).collect(),
        };
        let r = verify_left_adjoint_factorization(
            &t,
            &one,
            &phi,
            ADJUNCTION_SEARCH_BOUND,
            Exec::default(),
        )
        .unwrap();
        assert!(r.verdict.is_pass());
        assert_eq!(r.factorizations, 1);
    }

    #[test]
    fn search_bound_is_reported() {
        let t = random_adjunction_trial(3);
        let r = verify_left_adjoint_factorization(&t.p, &t.c, &t.phi, 0, Exec::default());
        assert!(matches!(r, Err(SheafError::SearchTooLarge(_))) || r.unwrap().searched == 1);
    }

    #[test]
    fn random_trials_match_full_brute_force() {
        for seed in 0..40 {
            let t = random_adjunction_trial(seed);
            assert!(is_concrete(&t.c).unwrap().is_pass());
            assert!(is_sheaf(&t.c).unwrap().is_pass());
            assert!(t.phi.is_natural(&t.p, &t.c).is_pass());
            let r = verify_left_adjoint_factorization(
                &t.p,
                &t.c,
                &t.phi,
                ADJUNCTION_SEARCH_BOUND,
                Exec::Sequential,
            )
            .unwrap();
            let (k, eta) = kappa_hat(&t.p).unwrap();
            let oracle: Vec<PresheafMorphism> = all_morphisms(&k, &t.c)
                .into_iter()
                .filter(|psi| eta.then(psi) == t.phi)
                .collect();
            assert_eq!(oracle.len(), 1, "seed {seed}");
            assert_eq!(r.psi.as_ref(), Some(&oracle[0]), "seed {seed}");
        }
    }

    #[test]
    fn concrete_on_pieces_implies_concrete_on_cover_target() {
        for seed in 0..20 {
            let t = random_adjunction_trial(seed);
            let (s, _) = kappa_hat(&t.p).unwrap();
            let v = s.site.object_index("V").unwrap();
            let u = s.site.object_index("U").unwrap();
            if is_concrete_at(&s, v).unwrap().is_pass() {
                assert!(is_concrete_at(&s, u).unwrap().is_pass());
            }
        }
    }

    #[test]
    fn non_functorial_table_is_rejected() {
        let site = trial_site();
        let a = |n: &str| site.arrow_index(n).unwrap();
        let r = FinitePresheaf::from_maps(
            site.clone(),
            vec![
                vec!["a".into(), "b".into()],
                vec!["v".into()],
                vec!["u".into()],
            ],
            HashMap::from([
                (a("v0"), vec![0]),
                (a("v1"), vec![0]),
                (a("u0"), vec![1]),
                (a("u1"), vec![0]),
                (a("ι"), vec![0]),
            ]),
        );
        assert!(matches!(r, Err(SheafError::Presheaf(_))));
    }
}
