//! Assertions a scenario can make, and their evaluation against a resolved [`World`].

use crate::scenario::World;
use crate::CliError;
use coarse_core::bundleclass::{
    coarse_classes, cocycle_classes, discretization_classes, fiberwise_isomorphic, isomorphic,
    isomorphism_classes, locally_isomorphic, Bundle, Partition,
};
use coarse_core::diffeology::{d_open, verify_plot, Element, Plot, PlotWitness};
use coarse_core::euclid::SmoothEuclMap;
use coarse_core::forms::{
    basic_check, basic_to_orbit_form, lift_independence, max_deviation, orbit_form_to_basic,
    FormError,
};
use coarse_core::groupoid::{
    orbit_space, plot_from_bundle, pullback_unit_bundle, ActionGroupoid, PrincipalBundle,
};
use coarse_core::sheaf::{
    concretize_kappa, find_isomorphism, is_concrete, is_concrete_at, is_sheaf, kappa_hat,
    run_adjunction_trials, sheafify, verify_left_adjoint_factorization, FinitePresheaf,
    PresheafMorphism, ADJUNCTION_SEARCH_BOUND,
};
use coarse_core::{Exec, Refutation, Verdict};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Check {
    FiberwiseIsomorphic {
        a: String,
        b: String,
    },
    LocallyIsomorphic {
        a: String,
        b: String,
    },
    Isomorphic {
        a: String,
        b: String,
    },
    /// Induced orbit-space plots agree at every base sample.
    PlotsEqual {
        a: String,
        b: String,
    },
    /// The induced plot verifies in the orbit space through its lift witness.
    PlotLifts {
        bundle: String,
    },
    /// Every orbit-space generator is the induced plot of a pulled-back unit bundle.
    GeneratorsFromBundles {
        action: String,
    },
    CocycleClasses {
        group: String,
        cover: String,
    },
    IsomorphismClasses {
        list: String,
    },
    DiscretizationClasses {
        list: String,
    },
    CoarseClasses {
        list: String,
    },
    PartitionChain {
        list: String,
    },
    BasicCheck {
        form: String,
        action: String,
    },
    OrbitRoundTrip {
        form: String,
        action: String,
        within: Option<f64>,
    },
    LiftIndependence {
        form: String,
        action: String,
        lifts: Vec<String>,
    },
    /// D-openness in the orbit space of the orbit of a point, or of a norm band.
    DOpen {
        action: String,
        orbit_of: Option<Vec<f64>>,
        norm_between: Option<(f64, f64)>,
    },
    Jacobian {
        map: String,
    },
    Concrete {
        presheaf: String,
        object: Option<String>,
    },
    SheafCondition {
        presheaf: String,
    },
    KappaSingletons {
        presheaf: String,
    },
    KappaPreserves {
        presheaf: String,
    },
    Sheafify {
        presheaf: String,
        object: String,
    },
    KappaHatIdempotent {
        presheaf: String,
    },
    SheafifyOnce {
        presheaf: String,
    },
    /// `phi` is `identity` or `collapse`.
    Adjunction {
        presheaf: String,
        target: String,
        phi: String,
    },
    AdjunctionTrials {
        trials: usize,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    #[default]
    Pass,
    Refuted,
    Unknown,
}

impl Expect {
    pub fn tag(self) -> &'static str {
        match self {
            Expect::Pass => "pass",
            Expect::Refuted => "refuted",
            Expect::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct Assertion {
    #[serde(flatten)]
    pub check: Check,
    #[serde(default)]
    pub expect: Expect,
    pub count: Option<usize>,
    /// Refutation witness must lie within `witness_within` (sup norm) of this point.
    pub witness_near: Option<Vec<f64>>,
    pub witness_within: Option<f64>,
    /// Every key of the table; flattening hides unknown keys from serde.
    #[serde(flatten)]
    keys: BTreeMap<String, toml::Value>,
}

impl Assertion {
    /// Keys that belong neither to the check nor to the expectation.
    pub fn stray_keys(&self) -> Vec<&str> {
        let known = serde_json::to_value(&self.check).expect("checks serialize");
        let own = ["expect", "count", "witness_near", "witness_within"];
        self.keys
            .keys()
            .map(String::as_str)
            .filter(|k| !own.contains(k) && known.get(k).is_none())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expected {
    pub verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_near: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_within: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub index: usize,
    pub op: String,
    pub subject: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, Value>,
    pub matched: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mismatch: Option<String>,
}

/// Result of a check before it is compared with expectations.
pub struct Measured {
    pub subject: String,
    pub verdict: Verdict,
    pub count: Option<usize>,
    pub details: BTreeMap<String, Value>,
}

impl Measured {
    fn new(subject: impl Into<String>, verdict: Verdict) -> Self {
        Measured {
            subject: subject.into(),
            verdict,
            count: None,
            details: BTreeMap::new(),
        }
    }

    fn count(mut self, n: usize) -> Self {
        self.count = Some(n);
        self
    }

    fn detail(mut self, key: &str, v: Value) -> Self {
        self.details.insert(key.to_string(), v);
        self
    }
}

impl Check {
    pub fn op(&self) -> &'static str {
        match self {
            Check::FiberwiseIsomorphic { .. } => "fiberwise_isomorphic",
            Check::LocallyIsomorphic { .. } => "locally_isomorphic",
            Check::Isomorphic { .. } => "isomorphic",
            Check::PlotsEqual { .. } => "plots_equal",
            Check::PlotLifts { .. } => "plot_lifts",
            Check::GeneratorsFromBundles { .. } => "generators_from_bundles",
            Check::CocycleClasses { .. } => "cocycle_classes",
            Check::IsomorphismClasses { .. } => "isomorphism_classes",
            Check::DiscretizationClasses { .. } => "discretization_classes",
            Check::CoarseClasses { .. } => "coarse_classes",
            Check::PartitionChain { .. } => "partition_chain",
            Check::BasicCheck { .. } => "basic_check",
            Check::OrbitRoundTrip { .. } => "orbit_round_trip",
            Check::LiftIndependence { .. } => "lift_independence",
            Check::DOpen { .. } => "d_open",
            Check::Jacobian { .. } => "jacobian",
            Check::Concrete { .. } => "concrete",
            Check::SheafCondition { .. } => "sheaf_condition",
            Check::KappaSingletons { .. } => "kappa_singletons",
            Check::KappaPreserves { .. } => "kappa_preserves",
            Check::Sheafify { .. } => "sheafify",
            Check::KappaHatIdempotent { .. } => "kappa_hat_idempotent",
            Check::SheafifyOnce { .. } => "sheafify_once",
            Check::Adjunction { .. } => "adjunction",
            Check::AdjunctionTrials { .. } => "adjunction_trials",
        }
    }
}

fn unresolved(kind: &'static str, name: &str) -> CliError {
    CliError::UnresolvedName {
        kind,
        name: name.to_string(),
    }
}

fn get<'a, T>(
    m: &'a std::collections::HashMap<String, T>,
    kind: &'static str,
    name: &str,
) -> Result<&'a T, CliError> {
    m.get(name).ok_or_else(|| unresolved(kind, name))
}

fn pullback_bundle<'a>(w: &'a World, name: &str) -> Result<&'a PrincipalBundle, CliError> {
    match get(&w.bundles, "bundle", name)? {
        Bundle::Pullback(p) => Ok(p),
        Bundle::Cocycle(_) => Err(CliError::Invalid(format!(
            "{name} is not a pullback bundle"
        ))),
    }
}

fn list<'a>(w: &'a World, name: &str) -> Result<(Vec<Bundle>, &'a [String]), CliError> {
    let names = get(&w.lists, "list", name)?;
    let bundles = names
        .iter()
        .map(|n| get(&w.bundles, "bundle", n).cloned())
        .collect::<Result<Vec<_>, _>>()?;
    Ok((bundles, names))
}

fn partition_json(p: &Partition, names: &[String]) -> Value {
    let classes: Vec<Vec<&str>> = p
        .classes
        .iter()
        .map(|c| c.iter().map(|&i| names[i].as_str()).collect())
        .collect();
    let unknown: Vec<&str> = p.unknown.iter().map(|&i| names[i].as_str()).collect();
    if unknown.is_empty() {
        json!({ "classes": classes })
    } else {
        json!({ "classes": classes, "unknown": unknown })
    }
}

fn sizes_json(p: &FinitePresheaf) -> Value {
    let m: BTreeMap<&str, usize> = p
        .site
        .objects()
        .iter()
        .enumerate()
        .map(|(k, o)| (o.name.as_str(), p.size(k)))
        .collect();
    json!(m)
}

fn core(e: impl std::fmt::Display) -> Verdict {
    Verdict::unknown(e.to_string())
}

/// Identity lift probe of the whole object space.
fn identity_probe(g: &ActionGroupoid) -> (Plot, PlotWitness) {
    let id = SmoothEuclMap::identity(g.space.clone());
    (Plot::from_map(&id), PlotWitness::lift_through(&id))
}

pub fn measure(w: &World, check: &Check) -> Result<Measured, CliError> {
    let tol = &w.config.tol;
    Ok(match check {
        Check::FiberwiseIsomorphic { a, b } => {
            let (x, y) = (get(&w.bundles, "bundle", a)?, get(&w.bundles, "bundle", b)?);
            Measured::new(format!("{a} ~ {b}"), fiberwise_isomorphic(x, y, tol))
        }
        Check::Isomorphic { a, b } => {
            let (x, y) = (get(&w.bundles, "bundle", a)?, get(&w.bundles, "bundle", b)?);
            Measured::new(format!("{a} ~ {b}"), isomorphic(x, y, tol))
        }
        Check::LocallyIsomorphic { a, b } => {
            let (x, y) = (get(&w.bundles, "bundle", a)?, get(&w.bundles, "bundle", b)?);
            let r = locally_isomorphic(x, y, tol);
            let m = Measured::new(format!("{a} ~ {b}"), r.verdict);
            if r.matching.is_empty() {
                m
            } else {
                m.detail("matching", json!(r.matching))
            }
        }
        Check::PlotsEqual { a, b } => {
            let (x, y) = (pullback_bundle(w, a)?, pullback_bundle(w, b)?);
            let subject = format!("{a} ~ {b}");
            let q = match orbit_space(&x.groupoid, tol) {
                Ok(q) => q,
                Err(e) => return Ok(Measured::new(subject, core(e))),
            };
            let (px, py) = match (plot_from_bundle(x, None), plot_from_bundle(y, None)) {
                (Ok((px, _)), Ok((py, _))) => (px, py),
                (Err(e), _) | (_, Err(e)) => return Ok(Measured::new(subject, core(e))),
            };
            let samples = x.base().samples();
            let mut worst = 0.0f64;
            let mut verdict = Verdict::Pass;
            for s in samples {
                let d = q.carrier.distance(&px.eval(s), &py.eval(s));
                worst = worst.max(d);
                if d > tol.eq_tol && verdict.is_pass() {
                    verdict = Verdict::Refuted(Refutation {
                        reason: "induced plots differ in the orbit space".into(),
                        point: s.clone(),
                        piece: None,
                        deviation: Some(d),
                    });
                }
            }
            Measured::new(subject, verdict)
                .count(samples.len())
                .detail("max_distance", json!(worst))
        }
        Check::PlotLifts { bundle } => {
            let p = pullback_bundle(w, bundle)?;
            let v = orbit_space(&p.groupoid, tol)
                .map_err(|e| e.to_string())
                .and_then(|q| {
                    let (plot, wit) = plot_from_bundle(p, None).map_err(|e| e.to_string())?;
                    verify_plot(&q, &plot, &wit, tol).map_err(|e| e.to_string())
                })
                .unwrap_or_else(Verdict::unknown);
            Measured::new(bundle.clone(), v)
        }
        Check::GeneratorsFromBundles { action } => {
            let g = get(&w.actions, "action", action)?;
            let q = match orbit_space(g, tol) {
                Ok(q) => q,
                Err(e) => return Ok(Measured::new(action.clone(), core(e))),
            };
            let mut verdict = Verdict::Pass;
            for (i, gen) in q.generators.iter().enumerate() {
                let id = SmoothEuclMap::identity(gen.domain().clone());
                let v = pullback_unit_bundle(g, &id, tol)
                    .map_err(|e| e.to_string())
                    .and_then(|b| plot_from_bundle(&b, None).map_err(|e| e.to_string()))
                    .and_then(|(plot, wit)| {
                        let v = verify_plot(&q, &plot, &wit, tol).map_err(|e| e.to_string())?;
                        if !v.is_pass() {
                            return Ok(v);
                        }
                        Ok(gen
                            .domain()
                            .samples()
                            .iter()
                            .find(|s| !q.carrier.equal(&plot.eval(s), &gen.eval(s), tol))
                            .map_or(Verdict::Pass, |s| {
                                Verdict::refuted_at(
                                    format!("generator {} is not recovered", gen.name()),
                                    s,
                                )
                            }))
                    })
                    .unwrap_or_else(Verdict::unknown);
                if !v.is_pass() {
                    verdict = v.in_piece(i);
                    break;
                }
            }
            Measured::new(action.clone(), verdict).count(q.generators.len())
        }
        Check::CocycleClasses { group, cover } => {
            let subject = format!("{group} on {cover}");
            let coarse_core::groupoid::GroupModel::Finite(g) = get(&w.groups, "group", group)?
            else {
                return Err(CliError::Invalid(format!("{group} is not a finite group")));
            };
            let graph = crate::scenario::cover_graph_by_name(cover)?;
            match cocycle_classes(g, &graph, Exec::default()) {
                Ok(cls) => {
                    let reps: Vec<&Vec<usize>> = cls.iter().map(|c| &c.representative).collect();
                    Measured::new(subject, Verdict::Pass)
                        .count(cls.len())
                        .detail("representatives", json!(reps))
                }
                Err(e) => Measured::new(subject, core(e)),
            }
        }
        Check::IsomorphismClasses { list: l }
        | Check::DiscretizationClasses { list: l }
        | Check::CoarseClasses { list: l } => {
            let (bundles, names) = list(w, l)?;
            let p = match check {
                Check::IsomorphismClasses { .. } => isomorphism_classes(&bundles, tol),
                Check::DiscretizationClasses { .. } => discretization_classes(&bundles, tol),
                _ => coarse_classes(&bundles, tol),
            };
            let verdict = if p.unknown.is_empty() {
                Verdict::Pass
            } else {
                Verdict::unknown("some comparisons are undecided")
            };
            Measured::new(l.clone(), verdict)
                .count(p.len())
                .detail("partition", partition_json(&p, names))
        }
        Check::PartitionChain { list: l } => {
            let (bundles, names) = list(w, l)?;
            let iso = isomorphism_classes(&bundles, tol);
            let disc = discretization_classes(&bundles, tol);
            let coarse = coarse_classes(&bundles, tol);
            let verdict = if !iso.refines(&disc) {
                Verdict::refuted("isomorphism classes do not refine discretization classes")
            } else if !disc.refines(&coarse) {
                Verdict::refuted("discretization classes do not refine coarse classes")
            } else {
                Verdict::Pass
            };
            Measured::new(l.clone(), verdict)
                .detail("isomorphism", partition_json(&iso, names))
                .detail("discretization", partition_json(&disc, names))
                .detail("coarse", partition_json(&coarse, names))
        }
        Check::BasicCheck { form, action } => {
            let (mu, g) = (
                get(&w.forms, "form", form)?,
                get(&w.actions, "action", action)?,
            );
            Measured::new(
                format!("{form} on {action}"),
                basic_check(mu, g, tol).unwrap_or_else(core),
            )
        }
        Check::OrbitRoundTrip {
            form,
            action,
            within,
        } => {
            let (mu, g) = (
                get(&w.forms, "form", form)?,
                get(&w.actions, "action", action)?,
            );
            let bound = within.unwrap_or(1e-12);
            let subject = format!("{form} on {action}");
            let run = || -> Result<(f64, f64), FormError> {
                let alpha = basic_to_orbit_form(mu, g, tol)?;
                let back = orbit_form_to_basic(&alpha, g, tol)?;
                let forward = max_deviation(&back, mu, g.space.samples());
                let again = basic_to_orbit_form(&back, g, tol)?;
                let reverse = again
                    .rule
                    .iter()
                    .zip(&alpha.rule)
                    .map(|(a, b)| max_deviation(a, b, a.domain().samples()))
                    .fold(0.0, f64::max);
                Ok((forward, reverse))
            };
            match run() {
                Ok((f, r)) => {
                    let d = f.max(r);
                    let verdict = if d <= bound {
                        Verdict::Pass
                    } else {
                        Verdict::Refuted(Refutation {
                            reason: "round trip moves the form".into(),
                            point: Vec::new(),
                            piece: None,
                            deviation: Some(d),
                        })
                    };
                    Measured::new(subject, verdict)
                        .detail("basic_round_trip", json!(f))
                        .detail("orbit_round_trip", json!(r))
                }
                Err(FormError::NotBasic(r)) => Measured::new(subject, Verdict::Refuted(r)),
                Err(e) => Measured::new(subject, core(e)),
            }
        }
        Check::LiftIndependence {
            form,
            action,
            lifts,
        } => {
            let (mu, g) = (
                get(&w.forms, "form", form)?,
                get(&w.actions, "action", action)?,
            );
            let maps = lifts
                .iter()
                .map(|l| get(&w.maps, "map", l).cloned())
                .collect::<Result<Vec<_>, _>>()?;
            let subject = format!("{form} via {}", lifts.join(", "));
            let v = basic_to_orbit_form(mu, g, tol)
                .and_then(|alpha| lift_independence(&alpha, &maps, tol));
            let verdict = match v {
                Ok(v) => v,
                Err(FormError::LiftsDisagree(r) | FormError::NotBasic(r)) => Verdict::Refuted(r),
                Err(e) => core(e),
            };
            Measured::new(subject, verdict)
        }
        Check::DOpen {
            action,
            orbit_of,
            norm_between,
        } => {
            let g = get(&w.actions, "action", action)?;
            let q = match orbit_space(g, tol) {
                Ok(q) => q,
                Err(e) => return Ok(Measured::new(action.clone(), core(e))),
            };
            let probes = vec![identity_probe(g)];
            let (subject, v) = match (orbit_of, norm_between) {
                (Some(p), None) => {
                    let (carrier, t, target) = (q.carrier.clone(), *tol, Element::point(p.clone()));
                    let ind = move |e: &Element| carrier.equal(e, &target, &t);
                    (
                        format!("[{p:?}] in {}", q.name),
                        d_open(&q, &ind, &probes, tol),
                    )
                }
                (None, Some((lo, hi))) => {
                    let (lo, hi) = (*lo, *hi);
                    let ind = move |e: &Element| {
                        let n = e.cont.iter().map(|x| x * x).sum::<f64>().sqrt();
                        lo < n && n < hi
                    };
                    (
                        format!("{lo} < |x| < {hi} in {}", q.name),
                        d_open(&q, &ind, &probes, tol),
                    )
                }
                _ => {
                    return Err(CliError::Invalid(
                        "d_open needs exactly one of orbit_of, norm_between".into(),
                    ))
                }
            };
            Measured::new(subject, v.unwrap_or_else(core))
        }
        Check::Jacobian { map } => {
            let f = get(&w.maps, "map", map)?;
            let verdict = match f.jacobian_deviation(tol.fd_step) {
                Ok(Some(d)) if d <= tol.fd_tol => Verdict::Pass,
                Ok(Some(d)) => Verdict::Refuted(Refutation {
                    reason: "finite differences disagree with the analytic jacobian".into(),
                    point: Vec::new(),
                    piece: None,
                    deviation: Some(d),
                }),
                Ok(None) => Verdict::unknown("no analytic jacobian"),
                Err(e) => core(e),
            };
            Measured::new(map.clone(), verdict)
        }
        Check::Concrete { presheaf, object } => {
            let p = get(&w.presheaves, "presheaf", presheaf)?;
            let v = match object {
                Some(o) => {
                    let k = p
                        .site
                        .object_index(o)
                        .ok_or_else(|| unresolved("object", o))?;
                    is_concrete_at(p, k)
                }
                None => is_concrete(p),
            };
            let subject = object
                .as_ref()
                .map_or(presheaf.clone(), |o| format!("{presheaf} at {o}"));
            Measured::new(subject, v.unwrap_or_else(core))
        }
        Check::SheafCondition { presheaf } => {
            let p = get(&w.presheaves, "presheaf", presheaf)?;
            Measured::new(presheaf.clone(), is_sheaf(p).unwrap_or_else(core))
        }
        Check::KappaSingletons { presheaf } => {
            let p = get(&w.presheaves, "presheaf", presheaf)?;
            match concretize_kappa(p) {
                Ok((k, _)) => {
                    let bad = k.sizes().iter().position(|&n| n != 1);
                    let v = bad.map_or(Verdict::Pass, |o| {
                        Verdict::refuted(format!("{} is not a singleton", k.site.objects()[o].name))
                            .in_piece(o)
                    });
                    Measured::new(presheaf.clone(), v)
                        .detail("before", sizes_json(p))
                        .detail("after", sizes_json(&k))
                }
                Err(e) => Measured::new(presheaf.clone(), core(e)),
            }
        }
        Check::KappaPreserves { presheaf } => {
            let p = get(&w.presheaves, "presheaf", presheaf)?;
            match concretize_kappa(p) {
                Ok((k, unit)) => {
                    let v = if unit.is_bijective(&k.sizes()) {
                        unit.is_natural(p, &k)
                    } else {
                        Verdict::refuted("the unit of κ identifies distinct elements")
                    };
                    Measured::new(presheaf.clone(), v).detail("sizes", sizes_json(&k))
                }
                Err(e) => Measured::new(presheaf.clone(), core(e)),
            }
        }
        Check::Sheafify { presheaf, object } => {
            let p = get(&w.presheaves, "presheaf", presheaf)?;
            let k = p
                .site
                .object_index(object)
                .ok_or_else(|| unresolved("object", object))?;
            let subject = format!("{presheaf} at {object}");
            match sheafify(p) {
                Ok((s, _)) => Measured::new(subject, is_sheaf(&s).unwrap_or_else(core))
                    .count(s.size(k))
                    .detail("before", sizes_json(p))
                    .detail("after", sizes_json(&s)),
                Err(e) => Measured::new(subject, core(e)),
            }
        }
        Check::KappaHatIdempotent { presheaf } => {
            let p = get(&w.presheaves, "presheaf", presheaf)?;
            let v = kappa_hat(p).and_then(|(k1, _)| {
                let (k2, u) = kappa_hat(&k1)?;
                Ok(if u.is_bijective(&k2.sizes()) {
                    Verdict::Pass
                } else {
                    Verdict::refuted("κ̂ changes κ̂(P)")
                })
            });
            Measured::new(presheaf.clone(), v.unwrap_or_else(core))
        }
        Check::SheafifyOnce { presheaf } => {
            let p = get(&w.presheaves, "presheaf", presheaf)?;
            let v = (|| {
                let twice = sheafify(&concretize_kappa(&sheafify(p)?.0)?.0)?.0;
                let once = sheafify(&concretize_kappa(p)?.0)?.0;
                Ok::<_, coarse_core::sheaf::SheafError>(
                    match find_isomorphism(&twice, &once, ADJUNCTION_SEARCH_BOUND)? {
                        Some(_) => Verdict::Pass,
                        None => Verdict::refuted("the two constructions are not isomorphic"),
                    },
                )
            })();
            Measured::new(presheaf.clone(), v.unwrap_or_else(core))
        }
        Check::Adjunction {
            presheaf,
            target,
            phi,
        } => {
            let (p, c) = (
                get(&w.presheaves, "presheaf", presheaf)?,
                get(&w.presheaves, "presheaf", target)?,
            );
            let morphism = match phi.as_str() {
                "identity" => p.identity_morphism(),
                "collapse" => PresheafMorphism {
                    components: p.sizes().iter().map(|&n| vec![0; n]).collect(),
                },
                other => return Err(unresolved("morphism", other)),
            };
            let subject = format!("{presheaf} → {target} ({phi})");
            if !Arc::ptr_eq(&p.site, &c.site) {
                return Err(CliError::Invalid(format!(
                    "{presheaf} and {target} live on different sites"
                )));
            }
            match verify_left_adjoint_factorization(
                p,
                c,
                &morphism,
                ADJUNCTION_SEARCH_BOUND,
                Exec::default(),
            ) {
                Ok(r) => Measured::new(subject, r.verdict)
                    .count(r.factorizations)
                    .detail("searched", json!(r.searched)),
                Err(e) => Measured::new(subject, core(e)),
            }
        }
        Check::AdjunctionTrials { trials } => {
            let results = run_adjunction_trials(w.config.seed, *trials, Exec::default());
            let mut passed = 0;
            let mut failures = Vec::new();
            let mut searched = 0u64;
            for (seed, r) in &results {
                match r {
                    Ok(rep) if rep.verdict.is_pass() && rep.factorizations == 1 => {
                        passed += 1;
                        searched = searched.max(rep.searched);
                    }
                    Ok(rep) => failures.push(json!({ "seed": seed, "verdict": rep.verdict })),
                    Err(e) => failures.push(json!({ "seed": seed, "error": e.to_string() })),
                }
            }
            let verdict = if failures.is_empty() {
                Verdict::Pass
            } else {
                Verdict::refuted(format!("{} of {trials} trials failed", failures.len()))
            };
            let m = Measured::new(format!("{trials} trials"), verdict)
                .count(passed)
                .detail("max_searched", json!(searched));
            if failures.is_empty() {
                m
            } else {
                m.detail("failures", json!(failures))
            }
        }
    })
}

fn witness_distance(r: &Refutation, near: &[f64]) -> f64 {
    if r.point.len() != near.len() {
        return f64::INFINITY;
    }
    r.point
        .iter()
        .zip(near)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

pub fn evaluate(index: usize, w: &World, a: &Assertion) -> Result<Outcome, CliError> {
    let m = measure(w, &a.check)?;
    let mut mismatch = None;
    if m.verdict.tag() != a.expect.tag() {
        mismatch = Some(format!(
            "expected {}, got {}",
            a.expect.tag(),
            m.verdict.tag()
        ));
    } else if let (Some(n), got) = (a.count, m.count) {
        if got != Some(n) {
            mismatch = Some(format!(
                "expected count {n}, got {}",
                got.map_or("none".into(), |g| g.to_string())
            ));
        }
    }
    if mismatch.is_none() {
        if let (Some(near), Some(r)) = (&a.witness_near, m.verdict.refutation()) {
            let within = a.witness_within.unwrap_or(w.config.tol.eq_tol);
            let d = witness_distance(r, near);
            if d > within {
                mismatch = Some(format!("witness {:?} is {d:.3e} from {near:?}", r.point));
            }
        }
    }
    Ok(Outcome {
        index,
        op: a.check.op().to_string(),
        subject: m.subject,
        expected: Some(Expected {
            verdict: a.expect.tag(),
            count: a.count,
            witness_near: a.witness_near.clone(),
            witness_within: a
                .witness_near
                .as_ref()
                .map(|_| a.witness_within.unwrap_or(w.config.tol.eq_tol)),
        }),
        verdict: m.verdict,
        count: m.count,
        details: m.details,
        matched: mismatch.is_none(),
        mismatch,
    })
}

/// Informational outcome without expectations.
pub fn observe(index: usize, w: &World, check: &Check) -> Result<Outcome, CliError> {
    let m = measure(w, check)?;
    Ok(Outcome {
        index,
        op: check.op().to_string(),
        subject: m.subject,
        expected: None,
        verdict: m.verdict,
        count: m.count,
        details: m.details,
        matched: true,
        mismatch: None,
    })
}
