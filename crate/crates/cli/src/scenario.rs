//! Declarative scenario files (TOML, schema 1) and their resolution into core objects.

use crate::CliError;
use coarse_core::bundleclass::{cocycle_classes, Bundle, Cocycle, CocycleBundle, CoverGraph};
use coarse_core::euclid::{Domain, SmoothEuclMap};
use coarse_core::expr::{catalog, ScalarExpr};
use coarse_core::forms::EuclForm;
use coarse_core::groupoid::{
    pullback_unit_bundle, ActionGroupoid, ActionKind, FiniteGroup, GroupModel, OrbitInvariant,
    PrincipalBundle,
};
use coarse_core::sheaf::{
    circle_site, forms_site, omega_seeds, omega_table, pi0_gerbe_table, trial_site, CoverOverlap,
    FinitePresheaf, ProbeSite, SiteCover,
};
use coarse_core::{Exec, SampleConfig, Tolerances};
use serde::Deserialize;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
    #[serde(default)]
    pub domain: Vec<DomainDecl>,
    #[serde(default)]
    pub group: Vec<GroupDecl>,
    #[serde(default)]
    pub action: Vec<ActionDecl>,
    #[serde(default)]
    pub map: Vec<MapDecl>,
    #[serde(default)]
    pub bundle: Vec<BundleDecl>,
    #[serde(default)]
    pub gerbe: Vec<GerbeDecl>,
    #[serde(default)]
    pub list: Vec<ListDecl>,
    #[serde(default)]
    pub form: Vec<FormDecl>,
    #[serde(default)]
    pub site: Vec<SiteDecl>,
    #[serde(default)]
    pub presheaf: Vec<PresheafDecl>,
    #[serde(default, rename = "assert")]
    pub assertions: Vec<crate::checks::Assertion>,
}

#[derive(Debug, Default, Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub eq_tol: Option<f64>,
    pub fd_tol: Option<f64>,
    pub fd_step: Option<f64>,
    pub form_tol: Option<f64>,
}

impl ToleranceOverrides {
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), CliError> {
        let slot = match key {
            "eq_tol" => &mut self.eq_tol,
            "fd_tol" => &mut self.fd_tol,
            "fd_step" => &mut self.fd_step,
            "form_tol" => &mut self.form_tol,
            _ => {
                return Err(CliError::UnresolvedName {
                    kind: "tolerance",
                    name: key.into(),
                })
            }
        };
        *slot = Some(value);
        Ok(())
    }

    /// Later overrides win.
    pub fn merged(self, later: ToleranceOverrides) -> ToleranceOverrides {
        ToleranceOverrides {
            eq_tol: later.eq_tol.or(self.eq_tol),
            fd_tol: later.fd_tol.or(self.fd_tol),
            fd_step: later.fd_step.or(self.fd_step),
            form_tol: later.form_tol.or(self.form_tol),
        }
    }

    pub fn apply(self, base: Tolerances) -> Result<Tolerances, CliError> {
        let t = Tolerances {
            eq_tol: self.eq_tol.unwrap_or(base.eq_tol),
            fd_tol: self.fd_tol.unwrap_or(base.fd_tol),
            fd_step: self.fd_step.unwrap_or(base.fd_step),
            form_tol: self.form_tol.unwrap_or(base.form_tol),
        };
        for (key, value) in [
            ("eq_tol", t.eq_tol),
            ("fd_tol", t.fd_tol),
            ("fd_step", t.fd_step),
            ("form_tol", t.form_tol),
        ] {
            if !(value.is_finite() && value > 0.0 && value <= 1e-1) {
                return Err(CliError::ToleranceOutOfRange {
                    key: key.into(),
                    value,
                });
            }
        }
        Ok(t)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainDecl {
    pub name: String,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum GroupKind {
    Cyclic { order: usize },
    Symmetric3,
    Circle,
    Table { table: Vec<Vec<usize>> },
}

#[derive(Debug, Deserialize)]
pub struct GroupDecl {
    pub name: String,
    #[serde(flatten)]
    pub kind: GroupKind,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDecl {
    pub name: String,
    pub group: String,
    pub space: String,
    pub kind: ActionKind,
    pub invariant: Option<OrbitInvariant>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDecl {
    pub name: String,
    pub domain: String,
    /// Parameterless catalog entry.
    pub catalog: Option<String>,
    pub exprs: Option<Vec<ScalarExpr>>,
    /// Row-major matrix with an optional offset.
    pub affine: Option<Vec<Vec<f64>>>,
    pub offset: Option<Vec<f64>>,
    pub constant: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleDecl {
    pub name: String,
    pub action: String,
    pub map: String,
    #[serde(default)]
    pub special_points: Vec<Vec<f64>>,
}

/// One cocycle bundle per Čech class; also registers a list under `name`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GerbeDecl {
    pub name: String,
    pub group: String,
    pub cover: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ListDecl {
    pub name: String,
    pub bundles: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormDecl {
    pub name: String,
    pub domain: String,
    pub degree: usize,
    pub coeffs: Option<Vec<ScalarExpr>>,
    /// `radial` (Σ xᵢ dxᵢ) or `zero`.
    pub catalog: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointDecl {
    pub name: String,
    pub object: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrowDecl {
    pub name: String,
    pub src: String,
    pub dst: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlapDecl {
    pub a: usize,
    pub b: usize,
    pub object: String,
    pub to_a: String,
    pub to_b: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverDecl {
    pub object: String,
    pub pieces: Vec<String>,
    #[serde(default)]
    pub overlaps: Vec<OverlapDecl>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteDecl {
    pub name: String,
    /// `circle`, `forms` or `trial`; excludes the explicit fields.
    pub builtin: Option<String>,
    #[serde(default)]
    pub objects: Vec<String>,
    #[serde(default)]
    pub points: Vec<PointDecl>,
    #[serde(default)]
    pub arrows: Vec<ArrowDecl>,
    /// `[f, g, g∘f]`.
    #[serde(default)]
    pub compositions: Vec<(String, String, String)>,
    #[serde(default)]
    pub covers: Vec<CoverDecl>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresheafDecl {
    pub name: String,
    /// `pi0_gerbe` (needs `group`) or `omega` (needs `degree`).
    pub builtin: Option<String>,
    pub group: Option<String>,
    pub degree: Option<usize>,
    pub site: Option<String>,
    #[serde(default)]
    pub values: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub restrictions: BTreeMap<String, Vec<usize>>,
}

/// Effective run configuration after command-line overrides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub samples: usize,
    pub tol: Tolerances,
}

/// All declarations of a scenario, resolved.
pub struct World {
    pub config: RunConfig,
    pub domains: HashMap<String, Domain>,
    pub groups: HashMap<String, GroupModel>,
    pub actions: HashMap<String, Arc<ActionGroupoid>>,
    pub maps: HashMap<String, SmoothEuclMap>,
    pub bundles: HashMap<String, Bundle>,
    pub lists: HashMap<String, Vec<String>>,
    pub forms: HashMap<String, EuclForm>,
    pub sites: HashMap<String, Arc<ProbeSite>>,
    pub presheaves: HashMap<String, FinitePresheaf>,
    /// Presheaf names in declaration order.
    pub presheaf_order: Vec<String>,
}

fn lookup<'a, T>(
    m: &'a HashMap<String, T>,
    kind: &'static str,
    name: &str,
) -> Result<&'a T, CliError> {
    m.get(name).ok_or_else(|| CliError::UnresolvedName {
        kind,
        name: name.to_string(),
    })
}

fn insert_unique<T>(
    m: &mut HashMap<String, T>,
    kind: &'static str,
    name: &str,
    v: T,
) -> Result<(), CliError> {
    if m.insert(name.to_string(), v).is_some() {
        return Err(CliError::Invalid(format!(
            "{kind} {name} is declared twice"
        )));
    }
    Ok(())
}

fn invalid(what: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(format!("{what}: {e}"))
}

pub fn cover_graph_by_name(name: &str) -> Result<CoverGraph, CliError> {
    match name {
        "circle_two_arcs" => Ok(CoverGraph::circle_two_arcs()),
        "interval" => Ok(CoverGraph::interval_single()),
        s => {
            let n = s
                .strip_prefix("circle_arcs:")
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| CliError::UnresolvedName {
                    kind: "cover",
                    name: s.into(),
                })?;
            CoverGraph::circle_arcs(n).map_err(|e| invalid(s, e))
        }
    }
}

pub fn parse(text: &str, file: &str) -> Result<Scenario, CliError> {
    let s: Scenario = toml::from_str(text).map_err(|e| CliError::Parse {
        file: file.to_string(),
        message: e.to_string(),
    })?;
    if s.schema != SCHEMA_VERSION {
        return Err(CliError::Schema(s.schema));
    }
    for (i, a) in s.assertions.iter().enumerate() {
        if let Some(k) = a.stray_keys().first() {
            return Err(CliError::Parse {
                file: file.to_string(),
                message: format!("assertion {i} ({}): unknown key `{k}`", a.check.op()),
            });
        }
    }
    Ok(s)
}

impl World {
    pub fn build(s: &Scenario, config: RunConfig) -> Result<World, CliError> {
        let tol = config.tol;
        let sampling = SampleConfig {
            count: config.samples,
            seed: config.seed,
        };
        let mut w = World {
            config,
            domains: HashMap::new(),
            groups: HashMap::new(),
            actions: HashMap::new(),
            maps: HashMap::new(),
            bundles: HashMap::new(),
            lists: HashMap::new(),
            forms: HashMap::new(),
            sites: HashMap::new(),
            presheaves: HashMap::new(),
            presheaf_order: Vec::new(),
        };
        for d in &s.domain {
            let dom = Domain::boxed(&d.bounds, sampling).map_err(|e| invalid(&d.name, e))?;
            insert_unique(&mut w.domains, "domain", &d.name, dom)?;
        }
        for g in &s.group {
            let model = match &g.kind {
                GroupKind::Cyclic { order } if *order >= 1 => {
                    GroupModel::Finite(FiniteGroup::cyclic(*order))
                }
                GroupKind::Cyclic { .. } => {
                    return Err(CliError::Invalid(format!("{} has order 0", g.name)))
                }
                GroupKind::Symmetric3 => GroupModel::Finite(FiniteGroup::symmetric3()),
                GroupKind::Circle => GroupModel::circle(),
                GroupKind::Table { table } => GroupModel::Finite(
                    FiniteGroup::from_table(g.name.clone(), table.clone())
                        .map_err(|e| invalid(&g.name, e))?,
                ),
            };
            insert_unique(&mut w.groups, "group", &g.name, model)?;
        }
        for a in &s.action {
            let group = lookup(&w.groups, "group", &a.group)?.clone();
            let space = lookup(&w.domains, "domain", &a.space)?.clone();
            let g = ActionGroupoid::new(a.name.clone(), group, space, a.kind, a.invariant, &tol)
                .map_err(|e| invalid(&a.name, e))?;
            insert_unique(&mut w.actions, "action", &a.name, Arc::new(g))?;
        }
        for m in &s.map {
            let dom = lookup(&w.domains, "domain", &m.domain)?.clone();
            let exprs = match (&m.catalog, &m.exprs, &m.affine, &m.constant) {
                (Some(c), None, None, None) => {
                    catalog::by_name(c, dom.dim()).ok_or_else(|| CliError::UnresolvedName {
                        kind: "catalog map",
                        name: c.clone(),
                    })?
                }
                (None, Some(e), None, None) => e.clone(),
                (None, None, Some(rows), None) => {
                    let offset = m.offset.clone().unwrap_or_else(|| vec![0.0; rows.len()]);
                    catalog::affine(rows, &offset)
                }
                (None, None, None, Some(c)) => catalog::constant(c),
                _ => {
                    return Err(CliError::Invalid(format!(
                        "map {} needs exactly one of catalog, exprs, affine, constant",
                        m.name
                    )))
                }
            };
            let f = SmoothEuclMap::from_exprs(m.name.clone(), dom, exprs)
                .map_err(|e| invalid(&m.name, e))?;
            insert_unique(&mut w.maps, "map", &m.name, f)?;
        }
        for b in &s.bundle {
            let g = lookup(&w.actions, "action", &b.action)?;
            let q = lookup(&w.maps, "map", &b.map)?;
            let mut p: PrincipalBundle = pullback_unit_bundle(g, q, &tol)
                .map_err(|e| invalid(&b.name, e))?
                .with_special_points(b.special_points.clone());
            p.name = b.name.clone();
            insert_unique(&mut w.bundles, "bundle", &b.name, Bundle::Pullback(p))?;
        }
        for gd in &s.gerbe {
            let group = match lookup(&w.groups, "group", &gd.group)? {
                GroupModel::Finite(f) => Arc::new(f.clone()),
                _ => {
                    return Err(CliError::Invalid(format!(
                        "gerbe {} needs a finite group",
                        gd.name
                    )))
                }
            };
            let graph = Arc::new(cover_graph_by_name(&gd.cover)?);
            let classes = cocycle_classes(&group, &graph, Exec::default())
                .map_err(|e| invalid(&gd.name, e))?;
            let mut names = Vec::new();
            for (k, c) in classes.into_iter().enumerate() {
                let name = format!("{}[{k}]", gd.name);
                let cocycle = Cocycle::new(graph.clone(), group.clone(), c.representative)
                    .map_err(|e| invalid(&name, e))?;
                insert_unique(
                    &mut w.bundles,
                    "bundle",
                    &name,
                    Bundle::Cocycle(CocycleBundle {
                        name: name.clone(),
                        cocycle,
                    }),
                )?;
                names.push(name);
            }
            insert_unique(&mut w.lists, "list", &gd.name, names)?;
        }
        for l in &s.list {
            for b in &l.bundles {
                lookup(&w.bundles, "bundle", b)?;
            }
            insert_unique(&mut w.lists, "list", &l.name, l.bundles.clone())?;
        }
        for f in &s.form {
            let dom = lookup(&w.domains, "domain", &f.domain)?.clone();
            let form = match (&f.coeffs, f.catalog.as_deref()) {
                (Some(c), None) => EuclForm::from_exprs(f.name.clone(), dom, f.degree, c.clone()),
                (None, Some("radial")) if f.degree == 1 => {
                    Ok(EuclForm::radial(dom).renamed(f.name.clone()))
                }
                (None, Some("zero")) => Ok(EuclForm::zero(dom, f.degree).renamed(f.name.clone())),
                _ => {
                    return Err(CliError::Invalid(format!(
                        "form {} needs coeffs or a catalog entry",
                        f.name
                    )))
                }
            }
            .map_err(|e| invalid(&f.name, e))?;
            insert_unique(&mut w.forms, "form", &f.name, form)?;
        }
        for sd in &s.site {
            let site = build_site(sd, &tol)?;
            insert_unique(&mut w.sites, "site", &sd.name, site)?;
        }
        for pd in &s.presheaf {
            let p = w.build_presheaf(pd)?;
            insert_unique(&mut w.presheaves, "presheaf", &pd.name, p)?;
            w.presheaf_order.push(pd.name.clone());
        }
        Ok(w)
    }

    /// A declared site, or a builtin registered under its own name on first use.
    fn site_or_builtin(&mut self, name: &str) -> Result<Arc<ProbeSite>, CliError> {
        if let Some(s) = self.sites.get(name) {
            return Ok(s.clone());
        }
        let s = match name {
            "circle" => circle_site(),
            "forms" => forms_site(&self.config.tol),
            "trial" => trial_site(),
            _ => {
                return Err(CliError::UnresolvedName {
                    kind: "site",
                    name: name.into(),
                })
            }
        };
        self.sites.insert(name.into(), s.clone());
        Ok(s)
    }

    fn build_presheaf(&mut self, pd: &PresheafDecl) -> Result<FinitePresheaf, CliError> {
        let tol = self.config.tol;
        match pd.builtin.as_deref() {
            Some("pi0_gerbe") => {
                let gname = pd
                    .group
                    .as_deref()
                    .ok_or_else(|| CliError::Invalid(format!("{} needs a group", pd.name)))?;
                let GroupModel::Finite(g) = lookup(&self.groups, "group", gname)? else {
                    return Err(CliError::Invalid(format!(
                        "{} needs a finite group",
                        pd.name
                    )));
                };
                pi0_gerbe_table(g, Exec::default()).map_err(|e| invalid(&pd.name, e))
            }
            Some("omega") => {
                let k = pd
                    .degree
                    .ok_or_else(|| CliError::Invalid(format!("{} needs a degree", pd.name)))?;
                let site = self.site_or_builtin("forms")?;
                omega_table(&site, k, &omega_seeds(&site, k), &tol)
                    .map_err(|e| invalid(&pd.name, e))
            }
            Some("terminal") => {
                let sname = pd
                    .site
                    .as_deref()
                    .ok_or_else(|| CliError::Invalid(format!("{} needs a site", pd.name)))?;
                let site = self.site_or_builtin(sname)?;
                let n = site.objects().len();
                FinitePresheaf::new(
                    site.clone(),
                    vec![vec!["*".into()]; n],
                    vec![vec![0]; site.arrows().len()],
                )
                .map_err(|e| invalid(&pd.name, e))
            }
            Some(other) => Err(CliError::UnresolvedName {
                kind: "presheaf builtin",
                name: other.into(),
            }),
            None => {
                let sname = pd
                    .site
                    .as_deref()
                    .ok_or_else(|| CliError::Invalid(format!("{} needs a site", pd.name)))?;
                let site = self.site_or_builtin(sname)?;
                let mut labels = Vec::new();
                for o in site.objects() {
                    labels.push(pd.values.get(&o.name).cloned().ok_or_else(|| {
                        CliError::Invalid(format!("{} has no values at {}", pd.name, o.name))
                    })?);
                }
                for key in pd.values.keys() {
                    site.object_index(key)
                        .ok_or_else(|| CliError::UnresolvedName {
                            kind: "object",
                            name: key.clone(),
                        })?;
                }
                let mut maps = HashMap::new();
                for (arrow, m) in &pd.restrictions {
                    let a = site
                        .arrow_index(arrow)
                        .ok_or_else(|| CliError::UnresolvedName {
                            kind: "arrow",
                            name: arrow.clone(),
                        })?;
                    maps.insert(a, m.clone());
                }
                FinitePresheaf::from_maps(site, labels, maps).map_err(|e| invalid(&pd.name, e))
            }
        }
    }
}

fn build_site(sd: &SiteDecl, tol: &Tolerances) -> Result<Arc<ProbeSite>, CliError> {
    if let Some(b) = &sd.builtin {
        if !(sd.objects.is_empty() && sd.arrows.is_empty() && sd.points.is_empty()) {
            return Err(CliError::Invalid(format!(
                "site {} mixes builtin and explicit tables",
                sd.name
            )));
        }
        return match b.as_str() {
            "circle" => Ok(circle_site()),
            "forms" => Ok(forms_site(tol)),
            "trial" => Ok(trial_site()),
            _ => Err(CliError::UnresolvedName {
                kind: "site builtin",
                name: b.clone(),
            }),
        };
    }
    let err = |e| invalid(&sd.name, e);
    let mut s = ProbeSite::new(sd.name.clone());
    for o in &sd.objects {
        if o == "pt" {
            continue;
        }
        s.add_object(o.clone(), None);
    }
    let obj = |s: &ProbeSite, n: &str| {
        s.object_index(n).ok_or_else(|| CliError::UnresolvedName {
            kind: "object",
            name: n.into(),
        })
    };
    let arrow = |s: &ProbeSite, n: &str| {
        s.arrow_index(n).ok_or_else(|| CliError::UnresolvedName {
            kind: "arrow",
            name: n.into(),
        })
    };
    for p in &sd.points {
        let o = obj(&s, &p.object)?;
        s.add_point(p.name.clone(), o, None).map_err(err)?;
    }
    for a in &sd.arrows {
        let (src, dst) = (obj(&s, &a.src)?, obj(&s, &a.dst)?);
        s.add_arrow(a.name.clone(), src, dst, None).map_err(err)?;
    }
    for (f, g, gf) in &sd.compositions {
        let (f, g, gf) = (arrow(&s, f)?, arrow(&s, g)?, arrow(&s, gf)?);
        s.add_composition(f, g, gf).map_err(err)?;
    }
    for c in &sd.covers {
        let o = obj(&s, &c.object)?;
        let pieces = c
            .pieces
            .iter()
            .map(|p| arrow(&s, p))
            .collect::<Result<Vec<_>, _>>()?;
        let overlaps = c
            .overlaps
            .iter()
            .map(|ov| {
                Ok(CoverOverlap {
                    a: ov.a,
                    b: ov.b,
                    object: obj(&s, &ov.object)?,
                    to_a: arrow(&s, &ov.to_a)?,
                    to_b: arrow(&s, &ov.to_b)?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        s.set_cover(o, SiteCover { pieces, overlaps })
            .map_err(err)?;
    }
    s.validate().map_err(err)?;
    Ok(Arc::new(s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> RunConfig {
        RunConfig {
            seed: 0,
            samples: 16,
            tol: Tolerances::default(),
        }
    }

    fn world(text: &str) -> Result<World, CliError> {
        World::build(&parse(text, "t.toml")?, cfg())
    }

    #[test]
    fn later_tolerance_overrides_win() {
        let mut scenario = ToleranceOverrides::default();
        scenario.set("eq_tol", 1e-8).unwrap();
        scenario.set("fd_tol", 1e-5).unwrap();
        let mut cli = ToleranceOverrides::default();
        cli.set("eq_tol", 1e-7).unwrap();
        let t = scenario.merged(cli).apply(Tolerances::default()).unwrap();
        assert_eq!((t.eq_tol, t.fd_tol, t.form_tol), (1e-7, 1e-5, 1e-6));
    }

    #[test]
    fn tolerances_outside_range_are_rejected() {
        for v in [0.0, -1e-9, 0.2, f64::NAN, f64::INFINITY] {
            let mut o = ToleranceOverrides::default();
            o.set("form_tol", v).unwrap();
            assert!(
                matches!(
                    o.apply(Tolerances::default()),
                    Err(CliError::ToleranceOutOfRange { .. })
                ),
                "{v}"
            );
        }
        let mut o = ToleranceOverrides::default();
        o.set("form_tol", 0.1).unwrap();
        assert!(o.apply(Tolerances::default()).is_ok());
        assert!(matches!(
            o.set("nope", 1e-3),
            Err(CliError::UnresolvedName { .. })
        ));
    }

    #[test]
    fn unknown_fields_are_parse_errors() {
        let e = parse("schema = 1\nname = \"x\"\n[[domain]]\nname = \"D\"\nbounds = [[0.0, 1.0]]\ncolour = 1\n", "t.toml");
        assert!(matches!(e, Err(CliError::Parse { .. })));
    }

    #[test]
    fn misspelt_assertion_keys_are_parse_errors() {
        let e = parse("schema = 1\nname = \"x\"\n[[assert]]\nop = \"jacobian\"\nmap = \"m\"\nexepct = \"refuted\"\n", "t.toml");
        match e {
            Err(CliError::Parse { message, .. }) => {
                assert!(message.contains("exepct"), "{message}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let text = "schema = 1\nname = \"x\"\n[[group]]\nname = \"G\"\nkind = \"circle\"\n[[group]]\nname = \"G\"\nkind = \"circle\"\n";
        assert!(matches!(world(text), Err(CliError::Invalid(_))));
    }

    #[test]
    fn maps_need_exactly_one_definition() {
        let text = "schema = 1\nname = \"x\"\n[[domain]]\nname = \"I\"\nbounds = [[-1.0, 1.0]]\n\
                    [[map]]\nname = \"m\"\ndomain = \"I\"\ncatalog = \"square\"\nconstant = [1.0]\n";
        assert!(world(text).is_err());
    }

    #[test]
    fn affine_maps_evaluate_with_offset() {
        let text = "schema = 1\nname = \"x\"\n[[domain]]\nname = \"I\"\nbounds = [[-1.0, 1.0]]\n\
                    [[map]]\nname = \"m\"\ndomain = \"I\"\naffine = [[2.0], [0.5]]\noffset = [1.0, -1.0]\n";
        let w = world(text).unwrap();
        assert_eq!(w.maps["m"].eval(&[0.5]), vec![2.0, -0.75]);
    }

    #[test]
    fn gerbes_register_one_bundle_per_class() {
        let text =
            "schema = 1\nname = \"x\"\n[[group]]\nname = \"Z3\"\nkind = \"cyclic\"\norder = 3\n\
                    [[gerbe]]\nname = \"g\"\ngroup = \"Z3\"\ncover = \"circle_arcs:3\"\n";
        let w = world(text).unwrap();
        assert_eq!(w.lists["g"], vec!["g[0]", "g[1]", "g[2]"]);
        assert!(w.bundles.contains_key("g[2]"));
    }

    #[test]
    fn cover_names_resolve() {
        assert!(cover_graph_by_name("circle_arcs:4").is_ok());
        assert!(matches!(
            cover_graph_by_name("torus"),
            Err(CliError::UnresolvedName { .. })
        ));
        assert!(cover_graph_by_name("circle_arcs:x").is_err());
    }

    #[test]
    fn builtin_sites_are_shared_between_presheaves() {
        let text = "schema = 1\nname = \"x\"\n[[presheaf]]\nname = \"a\"\nbuiltin = \"omega\"\ndegree = 1\n\
                    [[presheaf]]\nname = \"b\"\nbuiltin = \"terminal\"\nsite = \"forms\"\n";
        let w = world(text).unwrap();
        assert!(Arc::ptr_eq(
            &w.presheaves["a"].site,
            &w.presheaves["b"].site
        ));
        assert_eq!(w.presheaf_order, vec!["a", "b"]);
    }

    #[test]
    fn explicit_presheaves_must_be_functorial() {
        let text = "schema = 1\nname = \"x\"\n[[site]]\nname = \"s\"\nbuiltin = \"trial\"\n\
                    [[presheaf]]\nname = \"p\"\nsite = \"s\"\n\
                    values = { pt = [\"a\"], V = [\"v\"], U = [\"u0\", \"u1\"] }\n\
                    restrictions = { v0 = [0], v1 = [0], u0 = [0, 0], u1 = [0, 0], \"ι\" = [0, 7] }\n";
        assert!(world(text).is_err());
    }
}
