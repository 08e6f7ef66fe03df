//! Open subsets of Euclidean space, smooth maps between them, numeric jacobians and
//! finite open covers.
//!
//! A [`Domain`] is a finite disjoint union of open boxes, optionally cut down by a
//! membership predicate. Every domain carries a deterministic list of interior sample
//! points; all checks in the crate quantify over these samples.

use crate::config::{SampleConfig, RADIUS_LADDER};
use crate::expr::ScalarExpr;
use crate::verdict::{Refutation, Verdict};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

pub type Point = Vec<f64>;
pub type Predicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;
pub type EvalFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type JacFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EuclidError {
    #[error("point {0:?} lies outside the domain")]
    PointOutsideDomain(Point),
    #[error("non-finite value at {0:?}")]
    NonFiniteValue(Point),
    #[error("step {0} is outside (0, min extent / 4)")]
    InvalidStep(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid box: {0}")]
    InvalidBox(String),
}

/// An open axis-aligned box `Π (lo_i, hi_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cell {
    pub fn new(bounds: &[(f64, f64)]) -> Result<Self, EuclidError> {
        if bounds.is_empty() {
            return Err(EuclidError::InvalidBox("zero-dimensional box".into()));
        }
        for &(lo, hi) in bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(EuclidError::InvalidBox(format!("({lo}, {hi})")));
            }
        }
        Ok(Cell {
            lo: bounds.iter().map(|b| b.0).collect(),
            hi: bounds.iter().map(|b| b.1).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *l < *v && *v < *h)
    }

    pub fn min_extent(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn center(&self) -> Point {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }
}

/// Open subset of `ℝ^dim` with deterministic interior samples.
#[derive(Clone)]
pub struct Domain {
    name: String,
    dim: usize,
    cells: Vec<Cell>,
    predicate: Option<Predicate>,
    samples: Arc<Vec<Point>>,
    config: SampleConfig,
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Domain")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("cells", &self.cells)
            .field("samples", &self.samples.len())
            .finish()
    }
}

const FIRST_PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base as u64) as f64 * inv;
        i /= base as u64;
        inv /= b;
    }
    r
}

impl Domain {
    /// Union of disjoint open boxes, optionally restricted by `predicate`.
    pub fn new(
        name: impl Into<String>,
        cells: Vec<Cell>,
        predicate: Option<Predicate>,
        config: SampleConfig,
    ) -> Result<Self, EuclidError> {
        let dim = cells
            .first()
            .map(Cell::dim)
            .ok_or_else(|| EuclidError::InvalidBox("no cells".into()))?;
        if let Some(c) = cells.iter().find(|c| c.dim() != dim) {
            return Err(EuclidError::DimensionMismatch {
                expected: dim,
                found: c.dim(),
            });
        }
        let mut d = Domain {
            name: name.into(),
            dim,
            cells,
            predicate,
            samples: Arc::new(Vec::new()),
            config,
        };
        d.samples = Arc::new(d.generate_samples());
        Ok(d)
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self, EuclidError> {
        Self::boxed(&[(lo, hi)], SampleConfig::default())
    }

    pub fn boxed(bounds: &[(f64, f64)], config: SampleConfig) -> Result<Self, EuclidError> {
        let name = bounds
            .iter()
            .map(|(l, h)| format!("({l},{h})"))
            .collect::<Vec<_>>()
            .join("x");
        Self::new(name, vec![Cell::new(bounds)?], None, config)
    }

    /// Same ambient cells, further restricted by `pred`; samples are regenerated.
    pub fn restricted(&self, name: impl Into<String>, pred: Predicate) -> Self {
        let predicate: Predicate = match &self.predicate {
            Some(p) => {
                let p = p.clone();
                Arc::new(move |x: &[f64]| p(x) && pred(x))
            }
            None => pred,
        };
        let mut d = Domain {
            name: name.into(),
            dim: self.dim,
            cells: self.cells.clone(),
            predicate: Some(predicate),
            samples: Arc::new(Vec::new()),
            config: self.config,
        };
        d.samples = Arc::new(d.generate_samples());
        d
    }

    /// Sub-box of this domain: intersection with the open box `bounds`.
    pub fn sub_box(&self, bounds: &[(f64, f64)]) -> Result<Self, EuclidError> {
        if bounds.len() != self.dim {
            return Err(EuclidError::DimensionMismatch {
                expected: self.dim,
                found: bounds.len(),
            });
        }
        let b = Cell::new(bounds)?;
        let cells: Vec<Cell> = self
            .cells
            .iter()
            .filter_map(|c| {
                let lo: Vec<f64> = c.lo.iter().zip(&b.lo).map(|(a, b)| a.max(*b)).collect();
                let hi: Vec<f64> = c.hi.iter().zip(&b.hi).map(|(a, b)| a.min(*b)).collect();
                lo.iter()
                    .zip(&hi)
                    .all(|(l, h)| l < h)
                    .then_some(Cell { lo, hi })
            })
            .collect();
        if cells.is_empty() {
            return Err(EuclidError::InvalidBox("empty intersection".into()));
        }
        let name = format!("{}∩{}", self.name, Domain::boxed(bounds, self.config)?.name);
        Self::new(name, cells, self.predicate.clone(), self.config)
    }

    /// Same region, different sampling.
    pub fn resampled(&self, config: SampleConfig) -> Self {
        let mut d = self.clone();
        d.config = config;
        d.samples = Arc::new(d.generate_samples());
        d
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn samples(&self) -> &[Point] {
        &self.samples
    }

    pub fn config(&self) -> SampleConfig {
        self.config
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim
            && x.iter().all(|v| v.is_finite())
            && self.cells.iter().any(|c| c.contains(x))
            && self.predicate.as_ref().is_none_or(|p| p(x))
    }

    /// Index of the cell containing `x` (cells are the connected pieces of the box part).
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        self.cells.iter().position(|c| c.contains(x))
    }

    pub fn min_extent(&self) -> f64 {
        self.cells
            .iter()
            .map(Cell::min_extent)
            .fold(f64::INFINITY, f64::min)
    }

    /// Bounding box of all cells.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|i| {
                let lo = self
                    .cells
                    .iter()
                    .map(|c| c.lo[i])
                    .fold(f64::INFINITY, f64::min);
                let hi = self
                    .cells
                    .iter()
                    .map(|c| c.hi[i])
                    .fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            })
            .collect()
    }

    /// Largest ladder radius at which all `2·dim` axis neighbors of `x` satisfy `pred`.
    pub fn open_radius(x: &[f64], pred: impl Fn(&[f64]) -> bool) -> Option<f64> {
        RADIUS_LADDER.iter().copied().find(|&r| {
            (0..x.len()).all(|i| {
                [r, -r].iter().all(|&s| {
                    let mut y = x.to_vec();
                    y[i] += s;
                    pred(&y)
                })
            })
        })
    }

    fn generate_samples(&self) -> Vec<Point> {
        let n = self.config.count;
        let k = self.cells.len();
        let mut out = Vec::with_capacity(n);
        for (ci, cell) in self.cells.iter().enumerate() {
            let quota = n / k + usize::from(ci < n % k);
            let mut rng = ChaCha8Rng::seed_from_u64(
                self.config.seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(ci as u64 + 1)),
            );
            let candidates = if self.dim == 1 {
                Self::grid_1d(cell, quota, &mut rng)
            } else {
                Self::halton(cell, quota, &mut rng)
            };
            let mut taken = 0;
            for x in candidates {
                if taken == quota {
                    break;
                }
                if self.predicate.as_ref().is_none_or(|p| p(&x))
                    && Self::open_radius(&x, |y| self.contains(y)).is_some()
                {
                    out.push(x);
                    taken += 1;
                }
            }
        }
        out
    }

    /// Jittered stratified grid; the midpoint of the cell is always included.
    fn grid_1d(cell: &Cell, quota: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
        let (lo, hi) = (cell.lo[0], cell.hi[0]);
        let mut pts = Vec::with_capacity(quota * 4);
        // Extra candidates at finer strata back-fill when a predicate rejects grid points.
        for &m in &[1usize, 2, 4] {
            let n = quota * m;
            for i in 0..n {
                let t = if m == 1 && i == n / 2 {
                    0.5
                } else {
                    (i as f64 + 0.5 + 0.5 * (rng.gen::<f64>() - 0.5)) / n as f64
                };
                pts.push(vec![lo + t * (hi - lo)]);
            }
        }
        let mut first: Vec<Point> = pts.drain(..quota).collect();
        first.sort_by(|a, b| a[0].total_cmp(&b[0]));
        first.extend(pts);
        first
    }

    /// Center first, then a Cranley–Patterson rotated Halton sequence.
    fn halton(cell: &Cell, quota: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
        let d = cell.dim();
        let shift: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let margin = 0.01;
        let mut pts = vec![cell.center()];
        for i in 1..(quota as u64 * 8 + 8) {
            let p = (0..d)
                .map(|a| {
                    let u = (radical_inverse(i, FIRST_PRIMES[a % FIRST_PRIMES.len()]) + shift[a])
                        .fract();
                    let t = margin + (1.0 - 2.0 * margin) * u;
                    cell.lo[a] + t * (cell.hi[a] - cell.lo[a])
                })
                .collect();
            pts.push(p);
        }
        pts
    }
}

/// Smooth map from a domain into `ℝ^codim`, optionally with an analytic jacobian.
#[derive(Clone)]
pub struct SmoothEuclMap {
    name: String,
    domain: Domain,
    codim: usize,
    eval: EvalFn,
    jac: Option<JacFn>,
}

impl fmt::Debug for SmoothEuclMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothEuclMap")
            .field("name", &self.name)
            .field("domain", &self.domain.name())
            .field("codim", &self.codim)
            .field("analytic_jacobian", &self.jac.is_some())
            .finish()
    }
}

impl SmoothEuclMap {
    pub fn new(name: impl Into<String>, domain: Domain, codim: usize, eval: EvalFn) -> Self {
        SmoothEuclMap {
            name: name.into(),
            domain,
            codim,
            eval,
            jac: None,
        }
    }

    pub fn with_jacobian(mut self, jac: JacFn) -> Self {
        self.jac = Some(jac);
        self
    }

    /// Map given by one catalog expression per component, with analytic jacobian.
    pub fn from_exprs(
        name: impl Into<String>,
        domain: Domain,
        exprs: Vec<ScalarExpr>,
    ) -> Result<Self, EuclidError> {
        let dim = domain.dim();
        if let Some(a) = exprs.iter().filter_map(ScalarExpr::max_axis).max() {
            if a >= dim {
                return Err(EuclidError::DimensionMismatch {
                    expected: dim,
                    found: a + 1,
                });
            }
        }
        let exprs = Arc::new(exprs);
        let e2 = exprs.clone();
        let codim = exprs.len();
        Ok(SmoothEuclMap::new(
            name,
            domain,
            codim,
            Arc::new(move |x: &[f64]| exprs.iter().map(|e| e.eval(x)).collect()),
        )
        .with_jacobian(Arc::new(move |x: &[f64]| {
            DMatrix::from_fn(e2.len(), x.len(), |i, j| e2[i].grad(x)[j])
        })))
    }

    pub fn identity(domain: Domain) -> Self {
        let dim = domain.dim();
        SmoothEuclMap::new("id", domain, dim, Arc::new(|x: &[f64]| x.to_vec()))
            .with_jacobian(Arc::new(move |_x: &[f64]| DMatrix::identity(dim, dim)))
    }

    pub fn constant(domain: Domain, value: Point) -> Self {
        let (m, n) = (value.len(), domain.dim());
        let name = format!("const{value:?}");
        SmoothEuclMap::new(name, domain, m, Arc::new(move |_x: &[f64]| value.clone()))
            .with_jacobian(Arc::new(move |_x: &[f64]| DMatrix::zeros(m, n)))
    }

    /// Linear map `x ↦ A x` with its constant jacobian.
    pub fn linear(name: impl Into<String>, domain: Domain, a: DMatrix<f64>) -> Self {
        let a2 = a.clone();
        SmoothEuclMap::new(
            name,
            domain,
            a.nrows(),
            Arc::new(move |x: &[f64]| {
                (&a * nalgebra::DVector::from_column_slice(x))
                    .iter()
                    .copied()
                    .collect()
            }),
        )
        .with_jacobian(Arc::new(move |_x: &[f64]| a2.clone()))
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

    pub fn codim(&self) -> usize {
        self.codim
    }

    pub fn has_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    pub fn eval(&self, x: &[f64]) -> Point {
        (self.eval)(x)
    }

    pub fn eval_fn(&self) -> EvalFn {
        self.eval.clone()
    }

    pub fn analytic_jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.jac.as_ref().map(|j| j(x))
    }

    /// Analytic jacobian if present, otherwise central differences with step `h`
    /// shrunk until the stencil fits in the domain.
    pub fn jacobian(&self, x: &[f64], h: f64) -> Result<DMatrix<f64>, EuclidError> {
        if let Some(j) = &self.jac {
            return Ok(j(x));
        }
        let mut step = h.min(self.domain.min_extent() / 8.0);
        loop {
            match fd_jacobian(self, x, step) {
                Err(EuclidError::PointOutsideDomain(_)) if step > 1e-9 => step /= 10.0,
                r => return r,
            }
        }
    }

    /// Same formula on a different (sub)domain.
    pub fn restricted_to(&self, domain: Domain) -> Self {
        SmoothEuclMap {
            name: self.name.clone(),
            domain,
            codim: self.codim,
            eval: self.eval.clone(),
            jac: self.jac.clone(),
        }
    }

    /// `outer ∘ self`. The jacobian is analytic iff both factors are.
    pub fn then(&self, outer: &SmoothEuclMap) -> Result<SmoothEuclMap, EuclidError> {
        if self.codim != outer.domain.dim() {
            return Err(EuclidError::DimensionMismatch {
                expected: outer.domain.dim(),
                found: self.codim,
            });
        }
        let (f, g) = (self.eval.clone(), outer.eval.clone());
        let mut out = SmoothEuclMap::new(
            format!("{}∘{}", outer.name, self.name),
            self.domain.clone(),
            outer.codim,
            Arc::new(move |x: &[f64]| g(&f(x))),
        );
        if let (Some(jf), Some(jg)) = (self.jac.clone(), outer.jac.clone()) {
            let f = self.eval.clone();
            out.jac = Some(Arc::new(move |x: &[f64]| jg(&f(x)) * jf(x)));
        }
        Ok(out)
    }

    /// Largest deviation between analytic and finite-difference jacobians over the
    /// domain samples. `None` if the map carries no analytic jacobian.
    pub fn jacobian_deviation(&self, h: f64) -> Result<Option<f64>, EuclidError> {
        let Some(jac) = &self.jac else {
            return Ok(None);
        };
        let mut worst: f64 = 0.0;
        for x in self.domain.samples() {
            let mut step = h;
            let fd = loop {
                match fd_jacobian(self, x, step) {
                    Err(EuclidError::PointOutsideDomain(_)) if step > 1e-9 => step /= 10.0,
                    r => break r?,
                }
            };
            let a = jac(x);
            worst = worst.max((fd - a).amax());
        }
        Ok(Some(worst))
    }
}

/// Central-difference jacobian of `f` at `x` with step `h`.
pub fn fd_jacobian(f: &SmoothEuclMap, x: &[f64], h: f64) -> Result<DMatrix<f64>, EuclidError> {
    let dom = f.domain();
    if !dom.contains(x) {
        return Err(EuclidError::PointOutsideDomain(x.to_vec()));
    }
    if !(h > 0.0 && h < dom.min_extent() / 4.0) {
        return Err(EuclidError::InvalidStep(h));
    }
    let n = dom.dim();
    let mut jac = DMatrix::zeros(f.codim(), n);
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        for y in [&xp, &xm] {
            if !dom.contains(y) {
                return Err(EuclidError::PointOutsideDomain(y.clone()));
            }
        }
        let (fp, fm) = (f.eval(&xp), f.eval(&xm));
        if fp.len() != f.codim() || fm.len() != f.codim() {
            return Err(EuclidError::DimensionMismatch {
                expected: f.codim(),
                found: fp.len(),
            });
        }
        for i in 0..f.codim() {
            let d = (fp[i] - fm[i]) / (2.0 * h);
            if !d.is_finite() {
                return Err(EuclidError::NonFiniteValue(x.to_vec()));
            }
            jac[(i, j)] = d;
        }
    }
    Ok(jac)
}

/// Finite open cover of `parent`; inclusions are the coordinate identity.
#[derive(Clone, Debug)]
pub struct OpenCover {
    pub parent: Domain,
    pub pieces: Vec<Domain>,
}

impl OpenCover {
    pub fn new(parent: Domain, pieces: Vec<Domain>) -> Self {
        OpenCover { parent, pieces }
    }

    /// The trivial one-piece cover.
    pub fn trivial(parent: Domain) -> Self {
        OpenCover {
            pieces: vec![parent.clone()],
            parent,
        }
    }

    /// Cover of a one-dimensional parent by intervals.
    pub fn intervals(parent: &Domain, bounds: &[(f64, f64)]) -> Result<Self, EuclidError> {
        let pieces = bounds
            .iter()
            .map(|&b| parent.sub_box(&[b]))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(OpenCover::new(parent.clone(), pieces))
    }
}

/// Every parent sample must lie in some piece. A refutation reports the uncovered
/// sample closest to the centroid of all uncovered samples.
pub fn check_cover(cover: &OpenCover) -> Result<Verdict, EuclidError> {
    let dim = cover.parent.dim();
    if let Some(p) = cover.pieces.iter().find(|p| p.dim() != dim) {
        return Err(EuclidError::DimensionMismatch {
            expected: dim,
            found: p.dim(),
        });
    }
    let uncovered: Vec<&Point> = cover
        .parent
        .samples()
        .iter()
        .filter(|x| !cover.pieces.iter().any(|p| p.contains(x)))
        .collect();
    if uncovered.is_empty() {
        return Ok(Verdict::Pass);
    }
    let centroid: Point = (0..dim)
        .map(|i| uncovered.iter().map(|x| x[i]).sum::<f64>() / uncovered.len() as f64)
        .collect();
    let dist = |x: &Point| -> f64 {
        x.iter()
            .zip(&centroid)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    let witness = uncovered
        .iter()
        .min_by(|a, b| dist(a).total_cmp(&dist(b)))
        .expect("non-empty");
    Ok(Verdict::Refuted(Refutation {
        reason: format!("{} parent samples are uncovered", uncovered.len()),
        point: witness.to_vec(),
        piece: None,
        deviation: None,
    }))
}
