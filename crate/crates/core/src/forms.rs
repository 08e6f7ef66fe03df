//! Differential forms: Euclidean k-forms with pullback, forms on diffeological
//! spaces given by a rule on generators, and basic forms of action groupoids.

use crate::config::Tolerances;
use crate::diffeology::{
    DiffeologicalSpace, DiffeologyError, Element, PieceKind, Plot, PlotWitness,
};
use crate::euclid::{Domain, EuclidError, Point, SmoothEuclMap};
use crate::exec::Exec;
use crate::expr::ScalarExpr;
use crate::groupoid::{orbit_space, ActionGroupoid, GroupModel, GroupoidError};
use crate::verdict::{Refutation, Verdict};
use nalgebra::DMatrix;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error("expected {expected} coefficients, found {found}")]
    CoefficientCount { expected: usize, found: usize },
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("map target dimension {map} does not match form dimension {form}")]
    DimensionMismatch { map: usize, form: usize },
    #[error("map sends {0:?} outside the form's domain")]
    MapLeavesDomain(Point),
    #[error("rule has {rule} entries for {generators} generators")]
    RuleMismatch { rule: usize, generators: usize },
    #[error("form is not basic: {0}")]
    NotBasic(Refutation),
    #[error("lifts do not define the same quotient plot: {0}")]
    LiftsDisagree(Refutation),
    #[error("witness piece {0} has no form")]
    UnsupportedPiece(usize),
    #[error(transparent)]
    Euclid(#[from] EuclidError),
    #[error(transparent)]
    Diffeology(#[from] DiffeologyError),
    #[error(transparent)]
    Groupoid(#[from] GroupoidError),
}

/// Increasing multi-indices of length `k` in `0..dim`, in lexicographic order.
pub fn multi_indices(dim: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, dim: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..dim {
            cur.push(i);
            go(i + 1, dim, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= dim {
        go(0, dim, k, &mut Vec::new(), &mut out);
    }
    out
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

pub type CoeffFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// Gradients of every coefficient, one row per coefficient.
type GradFn = Arc<dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync>;

/// `Σ_I ω_I dx_I` with `I` ranging over [`multi_indices`].
#[derive(Clone)]
pub struct EuclForm {
    name: String,
    domain: Domain,
    degree: usize,
    coeffs: CoeffFn,
    exprs: Option<Vec<ScalarExpr>>,
}

impl fmt::Debug for EuclForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "EuclForm({}, degree {} on {})",
            self.name,
            self.degree,
            self.domain.name()
        )
    }
}

impl EuclForm {
    pub fn new(name: impl Into<String>, domain: Domain, degree: usize, coeffs: CoeffFn) -> Self {
        EuclForm {
            name: name.into(),
            domain,
            degree,
            coeffs,
            exprs: None,
        }
    }

    pub fn from_exprs(
        name: impl Into<String>,
        domain: Domain,
        degree: usize,
        exprs: Vec<ScalarExpr>,
    ) -> Result<Self, FormError> {
        let expected = binomial(domain.dim(), degree);
        if exprs.len() != expected {
            return Err(FormError::CoefficientCount {
                expected,
                found: exprs.len(),
            });
        }
        if let Some(a) = exprs.iter().filter_map(|e| e.max_axis()).max() {
            if a >= domain.dim() {
                return Err(EuclidError::DimensionMismatch {
                    expected: domain.dim(),
                    found: a + 1,
                }
                .into());
            }
        }
        let e = exprs.clone();
        Ok(EuclForm {
            name: name.into(),
            domain,
            degree,
            coeffs: Arc::new(move |x: &[f64]| e.iter().map(|c| c.eval(x)).collect()),
            exprs: Some(exprs),
        })
    }

    pub fn zero(domain: Domain, degree: usize) -> Self {
        let n = binomial(domain.dim(), degree);
        EuclForm::from_exprs("0", domain, degree, vec![ScalarExpr::Const(0.0); n])
            .expect("zero form has the right shape")
    }

    /// `Σ x_i dx_i`.
    pub fn radial(domain: Domain) -> Self {
        let n = domain.dim();
        EuclForm::from_exprs(
            "Σ x_i dx_i",
            domain,
            1,
            (0..n).map(ScalarExpr::Coord).collect(),
        )
        .expect("one coefficient per axis")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficient_count(&self) -> usize {
        binomial(self.domain.dim(), self.degree)
    }

    pub fn exprs(&self) -> Option<&[ScalarExpr]> {
        self.exprs.as_deref()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.coeffs)(x)
    }

    pub fn coeff_fn(&self) -> CoeffFn {
        self.coeffs.clone()
    }

    pub fn restricted_to(&self, domain: Domain) -> Self {
        EuclForm {
            domain,
            ..self.clone()
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &EuclForm, b: f64) -> Result<Self, FormError> {
        if self.degree != other.degree {
            return Err(FormError::DegreeMismatch(self.degree, other.degree));
        }
        let (f, g) = (self.coeffs.clone(), other.coeffs.clone());
        Ok(EuclForm::new(
            format!("{a}·{} + {b}·{}", self.name, other.name),
            self.domain.clone(),
            self.degree,
            Arc::new(move |x: &[f64]| f(x).iter().zip(g(x)).map(|(u, v)| a * u + b * v).collect()),
        ))
    }
}

fn minor(j: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() {
        return 1.0;
    }
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| j[(rows[r], cols[c])]).determinant()
}

/// `(f*ω)(u)` via `(f*ω)_I = Σ_J ω_J(f(u)) det Jf[J, I]`.
fn pullback_at(
    f: &SmoothEuclMap,
    omega: &CoeffFn,
    k: usize,
    src_idx: &[Vec<usize>],
    dst_idx: &[Vec<usize>],
    h: f64,
    u: &[f64],
) -> Vec<f64> {
    let Ok(jac) = f.jacobian(u, h) else {
        return vec![f64::NAN; src_idx.len()];
    };
    let w = omega(&f.eval(u));
    if k == 0 {
        return w;
    }
    src_idx
        .iter()
        .map(|i| {
            dst_idx
                .iter()
                .zip(&w)
                .map(|(jj, wj)| wj * minor(&jac, jj, i))
                .sum()
        })
        .collect()
}

/// Pullback along `f`; a zero form with no coefficients when the degree exceeds the
/// source dimension.
pub fn pullback(
    f: &SmoothEuclMap,
    omega: &EuclForm,
    tol: &Tolerances,
) -> Result<EuclForm, FormError> {
    if f.codim() != omega.domain.dim() {
        return Err(FormError::DimensionMismatch {
            map: f.codim(),
            form: omega.domain.dim(),
        });
    }
    if let Some(u) = f
        .domain()
        .samples()
        .iter()
        .find(|u| !omega.domain.contains(&f.eval(u)))
    {
        return Err(FormError::MapLeavesDomain(u.clone()));
    }
    let k = omega.degree;
    let name = format!("{}*{}", f.name(), omega.name);
    if k > f.domain().dim() {
        return Ok(EuclForm::new(
            name,
            f.domain().clone(),
            k,
            Arc::new(|_u: &[f64]| Vec::new()),
        ));
    }
    let src_idx = multi_indices(f.domain().dim(), k);
    let dst_idx = multi_indices(omega.domain.dim(), k);
    let (f2, w, h) = (f.clone(), omega.coeffs.clone(), tol.fd_step);
    Ok(EuclForm::new(
        name,
        f.domain().clone(),
        k,
        Arc::new(move |u: &[f64]| pullback_at(&f2, &w, k, &src_idx, &dst_idx, h, u)),
    ))
}

/// Sup-norm of `a − b` over `points`; refuted at the first point beyond `bound`.
pub fn compare_forms(a: &EuclForm, b: &EuclForm, points: &[Point], bound: f64) -> Verdict {
    compare_forms_with(a, b, points, bound, Exec::default())
}

pub fn compare_forms_with(
    a: &EuclForm,
    b: &EuclForm,
    points: &[Point],
    bound: f64,
    exec: Exec,
) -> Verdict {
    if a.degree != b.degree {
        return Verdict::refuted(format!("degrees {} and {} differ", a.degree, b.degree));
    }
    let devs = exec.map(points, |x| {
        let (u, v) = (a.eval(x), b.eval(x));
        if u.len() != v.len() {
            return f64::INFINITY;
        }
        u.iter()
            .zip(&v)
            .map(|(p, q)| {
                if p.is_finite() && q.is_finite() {
                    (p - q).abs()
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    });
    match devs.iter().position(|&d| d > bound) {
        None => Verdict::Pass,
        Some(i) => Verdict::Refuted(Refutation {
            reason: format!("{} ≠ {}", a.name, b.name),
            point: points[i].clone(),
            piece: None,
            deviation: Some(devs[i]),
        }),
    }
}

/// Largest coefficient difference over `points`.
pub fn max_deviation(a: &EuclForm, b: &EuclForm, points: &[Point]) -> f64 {
    points
        .iter()
        .map(|x| {
            a.eval(x)
                .iter()
                .zip(b.eval(x))
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

fn shuffle_sign(i: &[usize], j: &[usize]) -> f64 {
    let inversions = i
        .iter()
        .map(|a| j.iter().filter(|b| *b < a).count())
        .sum::<usize>();
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn wedge(a: &EuclForm, b: &EuclForm) -> Result<EuclForm, FormError> {
    let n = a.domain.dim();
    if b.domain.dim() != n {
        return Err(EuclidError::DimensionMismatch {
            expected: n,
            found: b.domain.dim(),
        }
        .into());
    }
    let (p, q) = (a.degree, b.degree);
    let (ia, ib, ik) = (
        multi_indices(n, p),
        multi_indices(n, q),
        multi_indices(n, p + q),
    );
    // (index into ia, index into ib, sign) for each output multi-index.
    let terms: Vec<Vec<(usize, usize, f64)>> = ik
        .iter()
        .map(|k| {
            let mut t = Vec::new();
            for (x, i) in ia.iter().enumerate() {
                for (y, j) in ib.iter().enumerate() {
                    let mut u: Vec<usize> = i.iter().chain(j).copied().collect();
                    u.sort_unstable();
                    if u == *k {
                        t.push((x, y, shuffle_sign(i, j)));
                    }
                }
            }
            t
        })
        .collect();
    let (f, g) = (a.coeffs.clone(), b.coeffs.clone());
    Ok(EuclForm::new(
        format!("{}∧{}", a.name, b.name),
        a.domain.clone(),
        p + q,
        Arc::new(move |x: &[f64]| {
            let (u, v) = (f(x), g(x));
            terms
                .iter()
                .map(|t| t.iter().map(|&(i, j, s)| s * u[i] * v[j]).sum())
                .collect()
        }),
    ))
}

/// Exterior derivative; analytic when the coefficients come from expressions,
/// central differences with step `h` otherwise.
pub fn exterior_derivative(omega: &EuclForm, h: f64) -> EuclForm {
    let n = omega.domain.dim();
    let k = omega.degree;
    let (src, dst) = (multi_indices(n, k), multi_indices(n, k + 1));
    // For each output index K: (axis i, source index J, sign) with K = {i} ∪ J.
    let terms: Vec<Vec<(usize, usize, f64)>> = dst
        .iter()
        .map(|kk| {
            src.iter()
                .enumerate()
                .filter_map(|(jx, j)| {
                    let rest: Vec<usize> = kk.iter().copied().filter(|x| !j.contains(x)).collect();
                    (rest.len() == 1 && j.iter().all(|x| kk.contains(x)))
                        .then(|| (rest[0], jx, shuffle_sign(&rest, j)))
                })
                .collect()
        })
        .collect();
    let grads: GradFn = match &omega.exprs {
        Some(es) => {
            let es = es.clone();
            Arc::new(move |x: &[f64]| es.iter().map(|e| e.grad(x)).collect())
        }
        None => {
            let f = omega.coeffs.clone();
            Arc::new(move |x: &[f64]| {
                let mut out = vec![vec![0.0; x.len()]; f(x).len()];
                for i in 0..x.len() {
                    let (mut a, mut b) = (x.to_vec(), x.to_vec());
                    a[i] += h;
                    b[i] -= h;
                    for (o, (p, q)) in out.iter_mut().zip(f(&a).into_iter().zip(f(&b))) {
                        o[i] = (p - q) / (2.0 * h);
                    }
                }
                out
            })
        }
    };
    EuclForm::new(
        format!("d{}", omega.name),
        omega.domain.clone(),
        k + 1,
        Arc::new(move |x: &[f64]| {
            let g = grads(x);
            terms
                .iter()
                .map(|t| t.iter().map(|&(i, j, s)| s * g[j][i]).sum())
                .collect()
        }),
    )
}

/// Form on a diffeological space, given by its value on each generator.
#[derive(Clone, Debug)]
pub struct DiffeologicalForm {
    pub space: Arc<DiffeologicalSpace>,
    pub degree: usize,
    pub rule: Vec<EuclForm>,
}

impl DiffeologicalForm {
    pub fn new(
        space: Arc<DiffeologicalSpace>,
        degree: usize,
        rule: Vec<EuclForm>,
    ) -> Result<Self, FormError> {
        if rule.len() != space.generators.len() {
            return Err(FormError::RuleMismatch {
                rule: rule.len(),
                generators: space.generators.len(),
            });
        }
        for (r, g) in rule.iter().zip(&space.generators) {
            if r.degree != degree {
                return Err(FormError::DegreeMismatch(r.degree, degree));
            }
            if r.domain.dim() != g.domain().dim() {
                return Err(EuclidError::DimensionMismatch {
                    expected: g.domain().dim(),
                    found: r.domain.dim(),
                }
                .into());
            }
        }
        Ok(DiffeologicalForm {
            space,
            degree,
            rule,
        })
    }

    /// `α(p)` on `domain`, assembled from the witness: the first piece containing a
    /// point decides its value there.
    pub fn assemble(
        &self,
        domain: &Domain,
        witness: &PlotWitness,
        tol: &Tolerances,
    ) -> Result<EuclForm, FormError> {
        let mut pieces: Vec<(Domain, EuclForm)> = Vec::new();
        for (i, piece) in witness.pieces.iter().enumerate() {
            let form = match &piece.kind {
                PieceKind::ConstantAt(_) => EuclForm::zero(piece.domain.clone(), self.degree),
                PieceKind::Factor { generator, map } => {
                    let r = self
                        .rule
                        .get(*generator)
                        .ok_or(FormError::UnsupportedPiece(i))?;
                    pullback(map, r, tol)?
                }
                PieceKind::Lift { witness: inner, .. } => {
                    if self.space.quotient.is_none() {
                        return Err(FormError::UnsupportedPiece(i));
                    }
                    // Quotient generators are the base generators, so the same rule applies.
                    self.assemble(&piece.domain, inner, tol)?
                }
            };
            pieces.push((piece.domain.clone(), form));
        }
        let k = self.degree;
        let n = binomial(domain.dim(), k);
        Ok(EuclForm::new(
            format!("α[{}]", domain.name()),
            domain.clone(),
            k,
            Arc::new(move |u: &[f64]| {
                pieces
                    .iter()
                    .find(|(d, _)| d.contains(u))
                    .map(|(_, f)| f.eval(u))
                    .unwrap_or_else(|| vec![f64::NAN; n])
            }),
        ))
    }

    /// Overlapping witness pieces assemble to the same form.
    pub fn check_piece_agreement(
        &self,
        domain: &Domain,
        witness: &PlotWitness,
        tol: &Tolerances,
    ) -> Result<Verdict, FormError> {
        let forms: Vec<(Domain, EuclForm)> = witness
            .pieces
            .iter()
            .map(|p| {
                let single = PlotWitness {
                    pieces: vec![p.clone()],
                };
                Ok((p.domain.clone(), self.assemble(&p.domain, &single, tol)?))
            })
            .collect::<Result<_, FormError>>()?;
        for (a, (da, fa)) in forms.iter().enumerate() {
            for (db, fb) in forms.iter().skip(a + 1) {
                let pts: Vec<Point> = domain
                    .samples()
                    .iter()
                    .chain(da.samples())
                    .filter(|x| da.contains(x) && db.contains(x))
                    .cloned()
                    .collect();
                let v = compare_forms(fa, fb, &pts, tol.form_tol);
                if !v.is_pass() {
                    return Ok(v);
                }
            }
        }
        Ok(Verdict::Pass)
    }
}

/// `α(p∘f) = f*α(p)` at the samples of `f`'s domain. The witness for `p∘f` defaults
/// to the pulled-back witness of `p`.
pub fn check_compatibility(
    alpha: &DiffeologicalForm,
    plot: &Plot,
    witness: &PlotWitness,
    f: &SmoothEuclMap,
    composite_witness: Option<&PlotWitness>,
    tol: &Tolerances,
) -> Result<Verdict, FormError> {
    let ap = alpha.assemble(plot.domain(), witness, tol)?;
    let lhs_w = composite_witness
        .cloned()
        .unwrap_or_else(|| witness.pullback(f));
    let lhs = alpha.assemble(f.domain(), &lhs_w, tol)?;
    let rhs = pullback(f, &ap, tol)?;
    Ok(compare_forms(
        &lhs,
        &rhs,
        f.domain().samples(),
        tol.form_tol,
    ))
}

/// `act(γ,·)*μ = μ` for each tested `γ`, at samples whose image stays in `G₀`.
/// Circle groups additionally get a central-difference check of infinitesimal invariance.
pub fn basic_check(
    mu: &EuclForm,
    g: &ActionGroupoid,
    tol: &Tolerances,
) -> Result<Verdict, FormError> {
    if mu.domain.dim() != g.space.dim() {
        return Err(EuclidError::DimensionMismatch {
            expected: g.space.dim(),
            found: mu.domain.dim(),
        }
        .into());
    }
    let pts = |gamma: &crate::groupoid::GroupElem| -> Vec<Point> {
        g.space
            .samples()
            .iter()
            .filter(|x| g.space.contains(&g.act(gamma, x)) && mu.domain.contains(x))
            .cloned()
            .collect()
    };
    for gamma in g.group.tested_elements() {
        let a = g.act_map(&gamma);
        let p = pts(&gamma);
        let a = a.restricted_to(g.space.restricted(format!("{}∩act⁻¹", g.space.name()), {
            let (g2, gm) = (g.clone(), gamma.clone());
            Arc::new(move |x: &[f64]| g2.space.contains(&g2.act(&gm, x)))
        }));
        let pulled = pullback(&a, mu, tol)?;
        let v = compare_forms(&pulled, mu, &p, tol.form_tol);
        if v.is_refuted() {
            return Ok(v);
        }
    }
    if let GroupModel::Circle { .. } = g.group {
        let h = tol.fd_step;
        let plus = g.act_map(&crate::groupoid::GroupElem::Angle(h));
        let minus = g.act_map(&crate::groupoid::GroupElem::Angle(-h));
        let idx = multi_indices(g.space.dim(), mu.degree);
        let w = mu.coeffs.clone();
        let k = mu.degree;
        let p = pts(&crate::groupoid::GroupElem::Angle(h));
        for x in &p {
            let a = pullback_at(&plus, &w, k, &idx, &idx, h, x);
            let b = pullback_at(&minus, &w, k, &idx, &idx, h, x);
            let d = a
                .iter()
                .zip(&b)
                .map(|(u, v)| ((u - v) / (2.0 * h)).abs())
                .fold(0.0, f64::max);
            if d > tol.fd_tol {
                return Ok(Verdict::Refuted(Refutation {
                    reason: "not infinitesimally invariant under rotation".into(),
                    point: x.clone(),
                    piece: None,
                    deviation: Some(d),
                }));
            }
        }
    }
    Ok(Verdict::Pass)
}

/// The form on the orbit space whose value on `π∘q` is `q*μ`.
pub fn basic_to_orbit_form(
    mu: &EuclForm,
    g: &ActionGroupoid,
    tol: &Tolerances,
) -> Result<DiffeologicalForm, FormError> {
    if let Verdict::Refuted(r) = basic_check(mu, g, tol)? {
        return Err(FormError::NotBasic(r));
    }
    let space = Arc::new(orbit_space(g, tol)?);
    let rule = space
        .generators
        .iter()
        .map(|p| mu.restricted_to(p.domain().clone()))
        .collect();
    DiffeologicalForm::new(space, mu.degree, rule)
}

/// `α(π∘id)` as a form on `G₀`.
pub fn orbit_form_to_basic(
    alpha: &DiffeologicalForm,
    g: &ActionGroupoid,
    tol: &Tolerances,
) -> Result<EuclForm, FormError> {
    let id = SmoothEuclMap::identity(g.space.clone());
    Ok(alpha
        .assemble(&g.space, &PlotWitness::lift_through(&id), tol)?
        .renamed("α(π∘id)"))
}

/// `α(π∘q)` computed through each lift agrees, after checking the lifts define
/// the same quotient plot.
pub fn lift_independence(
    alpha: &DiffeologicalForm,
    lifts: &[SmoothEuclMap],
    tol: &Tolerances,
) -> Result<Verdict, FormError> {
    let Some(first) = lifts.first() else {
        return Ok(Verdict::Pass);
    };
    let carrier = &alpha.space.carrier;
    let samples = first.domain().samples();
    for q in &lifts[1..] {
        for u in samples {
            let (a, b) = (Element::point(first.eval(u)), Element::point(q.eval(u)));
            if !carrier.equal(&a, &b, tol) {
                return Err(FormError::LiftsDisagree(Refutation {
                    reason: format!("π∘{} ≠ π∘{}", first.name(), q.name()),
                    point: u.clone(),
                    piece: None,
                    deviation: Some(carrier.distance(&a, &b)),
                }));
            }
        }
    }
    let base = alpha.assemble(first.domain(), &PlotWitness::lift_through(first), tol)?;
    for q in &lifts[1..] {
        let other = alpha.assemble(q.domain(), &PlotWitness::lift_through(q), tol)?;
        let v = compare_forms(&base, &other, samples, tol.eq_tol);
        if !v.is_pass() {
            return Ok(v);
        }
    }
    Ok(Verdict::Pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeology::manifold_space;
    use crate::expr::catalog;
    use crate::groupoid::{ActionKind, FiniteGroup, OrbitInvariant};
    use approx::assert_relative_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn line() -> Domain {
        Domain::interval(-4.0, 4.0).unwrap()
    }

    fn x_dx() -> EuclForm {
        EuclForm::radial(line())
    }

    fn dx() -> EuclForm {
        EuclForm::from_exprs("dx", line(), 1, vec![ScalarExpr::Const(1.0)]).unwrap()
    }

    fn refl() -> ActionGroupoid {
        ActionGroupoid::new(
            "refl",
            GroupModel::Finite(FiniteGroup::cyclic(2)),
            line(),
            ActionKind::Reflection,
            None,
            &tol(),
        )
        .unwrap()
    }

    fn rot() -> ActionGroupoid {
        ActionGroupoid::new(
            "rot",
            GroupModel::circle(),
            Domain::boxed(&[(-3.0, 3.0), (-3.0, 3.0)], Default::default()).unwrap(),
            ActionKind::Rotation,
            Some(OrbitInvariant::Norm),
            &tol(),
        )
        .unwrap()
    }

    fn p(exprs: Vec<ScalarExpr>, name: &str) -> SmoothEuclMap {
        SmoothEuclMap::from_exprs(name, Domain::interval(-1.0, 1.0).unwrap(), exprs).unwrap()
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(
            multi_indices(3, 2),
            vec![vec![0, 1], vec![0, 2], vec![1, 2]]
        );
        assert_eq!(multi_indices(2, 0), vec![Vec::<usize>::new()]);
        assert!(multi_indices(1, 2).is_empty());
        for n in 0..6 {
            for k in 0..6 {
                assert_eq!(multi_indices(n, k).len(), binomial(n, k));
            }
        }
    }

    #[test]
    fn pullback_identity_and_constant() {
        let w = x_dx();
        let id = SmoothEuclMap::identity(line());
        let pulled = pullback(&id, &w, &tol()).unwrap();
        assert!(compare_forms(&pulled, &w, line().samples(), 0.0).is_pass());
        let c = SmoothEuclMap::constant(Domain::interval(-1.0, 1.0).unwrap(), vec![0.5]);
        let z = pullback(&c, &w, &tol()).unwrap();
        assert!(Domain::interval(-1.0, 1.0)
            .unwrap()
            .samples()
            .iter()
            .all(|u| z.eval(u) == vec![0.0]));
    }

    #[test]
    fn profile_pullback_at_one() {
        let p1 = p(catalog::odd_profile(), "p1");
        let pulled = pullback(&p1, &x_dx(), &tol()).unwrap();
        let expected = 2.0 * (-2.0f64).exp();
        assert_relative_eq!(pulled.eval(&[1.0 - 1e-12])[0], expected, epsilon = 1e-10);
        let d = Domain::interval(0.5, 1.5).unwrap();
        let p1b = SmoothEuclMap::from_exprs("p1", d, catalog::odd_profile()).unwrap();
        assert_relative_eq!(
            pullback(&p1b, &x_dx(), &tol()).unwrap().eval(&[1.0])[0],
            expected,
            epsilon = 1e-15
        );
    }

    #[test]
    fn degree_above_source_dimension_is_zero() {
        let plane = Domain::boxed(&[(-1.0, 1.0), (-1.0, 1.0)], Default::default()).unwrap();
        let area = EuclForm::from_exprs("dx∧dy", plane, 2, vec![ScalarExpr::Const(1.0)]).unwrap();
        let curve = SmoothEuclMap::from_exprs(
            "c",
            Domain::interval(-0.5, 0.5).unwrap(),
            catalog::circle(0.5),
        )
        .unwrap();
        let z = pullback(&curve, &area, &tol()).unwrap();
        assert_eq!(z.coefficient_count(), 0);
        assert!(z.eval(&[0.1]).is_empty());
    }

    #[test]
    fn area_form_pulls_back_by_determinant() {
        let plane = Domain::boxed(&[(-5.0, 5.0), (-5.0, 5.0)], Default::default()).unwrap();
        let area = EuclForm::from_exprs("dx∧dy", plane, 2, vec![ScalarExpr::Const(1.0)]).unwrap();
        let sq = Domain::boxed(&[(-1.0, 1.0), (-1.0, 1.0)], Default::default()).unwrap();
        let a = SmoothEuclMap::from_exprs(
            "A",
            sq.clone(),
            catalog::affine(&[vec![2.0, 1.0], vec![1.0, 3.0]], &[0.0, 0.0]),
        )
        .unwrap();
        let pulled = pullback(&a, &area, &tol()).unwrap();
        for u in sq.samples() {
            assert_relative_eq!(pulled.eval(u)[0], 5.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn wedge_and_d_plumbing() {
        let plane = Domain::boxed(&[(-1.0, 1.0), (-1.0, 1.0)], Default::default()).unwrap();
        let dx = EuclForm::from_exprs(
            "dx",
            plane.clone(),
            1,
            vec![ScalarExpr::Const(1.0), ScalarExpr::Const(0.0)],
        )
        .unwrap();
        let dy = EuclForm::from_exprs(
            "dy",
            plane.clone(),
            1,
            vec![ScalarExpr::Const(0.0), ScalarExpr::Const(1.0)],
        )
        .unwrap();
        assert_eq!(wedge(&dx, &dy).unwrap().eval(&[0.0, 0.0]), vec![1.0]);
        assert_eq!(wedge(&dy, &dx).unwrap().eval(&[0.0, 0.0]), vec![-1.0]);
        // d(x dy − y dx) = 2 dx∧dy
        let w = EuclForm::from_exprs(
            "x dy - y dx",
            plane.clone(),
            1,
            vec![
                ScalarExpr::scale(-1.0, ScalarExpr::Coord(1)),
                ScalarExpr::Coord(0),
            ],
        )
        .unwrap();
        assert_relative_eq!(
            exterior_derivative(&w, 1e-5).eval(&[0.3, 0.2])[0],
            2.0,
            epsilon = 1e-12
        );
        let w_fd = EuclForm::new("fd", plane, 1, w.coeff_fn());
        assert_relative_eq!(
            exterior_derivative(&w_fd, 1e-5).eval(&[0.3, 0.2])[0],
            2.0,
            epsilon = 1e-8
        );
        // d∘d = 0 on a 0-form
        let f = EuclForm::from_exprs(
            "f",
            Domain::boxed(&[(-1.0, 1.0), (-1.0, 1.0)], Default::default()).unwrap(),
            0,
            vec![ScalarExpr::Prod(vec![
                ScalarExpr::Sin { axis: 0, freq: 2.0 },
                ScalarExpr::Coord(1),
            ])],
        )
        .unwrap();
        let dd = exterior_derivative(&exterior_derivative(&f, 1e-4), 1e-4);
        assert!(dd.eval(&[0.2, 0.4])[0].abs() < 1e-6);
    }

    #[test]
    fn basic_checks() {
        assert!(basic_check(&x_dx(), &refl(), &tol()).unwrap().is_pass());
        let v = basic_check(&dx(), &refl(), &tol()).unwrap();
        assert_relative_eq!(
            v.refutation().unwrap().deviation.unwrap(),
            2.0,
            epsilon = 1e-12
        );
        let plane = rot().space.clone();
        assert!(
            basic_check(&EuclForm::radial(plane.clone()), &rot(), &tol())
                .unwrap()
                .is_pass()
        );
        let rot_form = EuclForm::from_exprs(
            "x dy - y dx",
            plane,
            1,
            vec![
                ScalarExpr::scale(-1.0, ScalarExpr::Coord(1)),
                ScalarExpr::Coord(0),
            ],
        )
        .unwrap();
        assert!(basic_check(&rot_form, &rot(), &tol()).unwrap().is_pass());
    }

    #[test]
    fn grid_aligned_non_invariance_is_caught_infinitesimally() {
        // μ_x = R(32θ)·x is invariant under every grid rotation but not under small ones.
        let g = rot();
        let angular = EuclForm::new(
            "R(32θ)x·dx",
            g.space.clone(),
            1,
            Arc::new(|x: &[f64]| {
                let (s, c) = (32.0 * x[1].atan2(x[0])).sin_cos();
                vec![c * x[0] - s * x[1], s * x[0] + c * x[1]]
            }),
        );
        let v = basic_check(&angular, &g, &tol()).unwrap();
        assert!(v.is_refuted());
        assert!(v.refutation().unwrap().reason.contains("infinitesimally"));
    }

    #[test]
    fn orbit_form_round_trips() {
        for (mu, g) in [
            (x_dx(), refl()),
            (EuclForm::radial(rot().space.clone()), rot()),
        ] {
            let alpha = basic_to_orbit_form(&mu, &g, &tol()).unwrap();
            let back = orbit_form_to_basic(&alpha, &g, &tol()).unwrap();
            assert!(max_deviation(&back, &mu, g.space.samples()) <= 1e-12);
            let again = basic_to_orbit_form(&back, &g, &tol()).unwrap();
            for (a, b) in again.rule.iter().zip(&alpha.rule) {
                assert!(max_deviation(a, b, g.space.samples()) <= 1e-12);
            }
        }
        let z = EuclForm::zero(line(), 1);
        let alpha = basic_to_orbit_form(&z, &refl(), &tol()).unwrap();
        assert!(
            orbit_form_to_basic(&alpha, &refl(), &tol())
                .unwrap()
                .eval(&[1.0])
                == vec![0.0]
        );
        assert!(matches!(
            basic_to_orbit_form(&dx(), &refl(), &tol()),
            Err(FormError::NotBasic(_))
        ));
    }

    #[test]
    fn two_lifts_give_the_same_form() {
        let alpha = basic_to_orbit_form(&x_dx(), &refl(), &tol()).unwrap();
        let lifts = [
            p(catalog::odd_profile(), "p1"),
            p(catalog::negated_profile(), "p2"),
        ];
        assert!(lift_independence(&alpha, &lifts, &tol()).unwrap().is_pass());
        let other = p(catalog::identity(1), "id");
        assert!(matches!(
            lift_independence(&alpha, &[lifts[0].clone(), other], &tol()),
            Err(FormError::LiftsDisagree(_))
        ));
    }

    #[test]
    fn compatibility_and_corruption() {
        let d = Domain::interval(-2.0, 2.0).unwrap();
        let m = manifold_space(&d);
        let mut two = m.clone();
        two.generators
            .push(two.generators[0].clone().renamed("id'"));
        let two = Arc::new(two);
        let w = EuclForm::radial(d.clone());
        let good = DiffeologicalForm::new(two.clone(), 1, vec![w.clone(), w.clone()]).unwrap();
        let bad = DiffeologicalForm::new(
            two.clone(),
            1,
            vec![w.clone(), w.combine(2.0, &w, 0.0).unwrap()],
        )
        .unwrap();
        let id = SmoothEuclMap::identity(d.clone());
        let plot = Plot::from_map(&id);
        let wit = PlotWitness::factor(0, id.clone());
        let f = SmoothEuclMap::from_exprs(
            "sq",
            Domain::interval(-1.0, 1.0).unwrap(),
            catalog::square(),
        )
        .unwrap();
        let via_other = PlotWitness::factor(1, f.clone());
        for a in [&good, &bad] {
            assert!(check_compatibility(a, &plot, &wit, &f, None, &tol())
                .unwrap()
                .is_pass());
        }
        assert!(
            check_compatibility(&good, &plot, &wit, &f, Some(&via_other), &tol())
                .unwrap()
                .is_pass()
        );
        assert!(
            check_compatibility(&bad, &plot, &wit, &f, Some(&via_other), &tol())
                .unwrap()
                .is_refuted()
        );
        // Inclusion of a cover piece.
        let inc = SmoothEuclMap::identity(d.sub_box(&[(-1.0, 0.5)]).unwrap());
        assert!(check_compatibility(&good, &plot, &wit, &inc, None, &tol())
            .unwrap()
            .is_pass());
    }

    #[test]
    fn orbit_forms_are_compatible_along_catalog_maps() {
        let g = refl();
        let alpha = basic_to_orbit_form(&x_dx(), &g, &tol()).unwrap();
        let p1 = p(catalog::odd_profile(), "p1");
        let plot = Plot::from_map(&p1);
        let wit = PlotWitness::lift_through(&p1);
        let small = Domain::interval(-0.9, 0.9).unwrap();
        for f in [
            SmoothEuclMap::from_exprs("sq", small.clone(), catalog::square()).unwrap(),
            SmoothEuclMap::identity(small.clone()),
            SmoothEuclMap::from_exprs("sin", small, vec![ScalarExpr::Sin { axis: 0, freq: 1.0 }])
                .unwrap(),
        ] {
            assert!(check_compatibility(&alpha, &plot, &wit, &f, None, &tol())
                .unwrap()
                .is_pass());
        }
    }
}
