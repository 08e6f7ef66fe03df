use serde::Serialize;
use std::fmt;

/// Outcome of a semi-decision procedure.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Refuted(Refutation),
    /// The question is outside the class the procedure decides.
    Unknown {
        reason: String,
    },
}

/// Concrete evidence for a `Refuted` verdict.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Refutation {
    pub reason: String,
    /// Sample point (in the relevant domain) where the failure was observed.
    pub point: Vec<f64>,
    /// Index of the cover piece / probe / assertion the failure belongs to.
    pub piece: Option<usize>,
    /// Measured deviation, when the failure is metric.
    pub deviation: Option<f64>,
}

impl Verdict {
    pub fn refuted(reason: impl Into<String>) -> Self {
        Verdict::Refuted(Refutation {
            reason: reason.into(),
            point: Vec::new(),
            piece: None,
            deviation: None,
        })
    }

    pub fn refuted_at(reason: impl Into<String>, point: &[f64]) -> Self {
        Verdict::Refuted(Refutation {
            reason: reason.into(),
            point: point.to_vec(),
            piece: None,
            deviation: None,
        })
    }

    pub fn unknown(reason: impl Into<String>) -> Self {
        Verdict::Unknown {
            reason: reason.into(),
        }
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    pub fn is_refuted(&self) -> bool {
        matches!(self, Verdict::Refuted(_))
    }

    pub fn refutation(&self) -> Option<&Refutation> {
        match self {
            Verdict::Refuted(r) => Some(r),
            _ => None,
        }
    }

    /// Short lowercase tag: `pass`, `refuted` or `unknown`.
    pub fn tag(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Refuted(_) => "refuted",
            Verdict::Unknown { .. } => "unknown",
        }
    }

    /// Attach a piece index to a refutation; other verdicts are returned unchanged.
    pub fn in_piece(self, piece: usize) -> Self {
        match self {
            Verdict::Refuted(mut r) => {
                r.piece.get_or_insert(piece);
                Verdict::Refuted(r)
            }
            v => v,
        }
    }

    /// First non-pass verdict of a sequence, or `Pass`.
    pub fn all<I: IntoIterator<Item = Verdict>>(verdicts: I) -> Verdict {
        verdicts
            .into_iter()
            .find(|v| !v.is_pass())
            .unwrap_or(Verdict::Pass)
    }
}

impl Refutation {
    pub fn with_deviation(mut self, d: f64) -> Self {
        self.deviation = Some(d);
        self
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => write!(f, "pass"),
            Verdict::Unknown { reason } => write!(f, "unknown ({reason})"),
            Verdict::Refuted(r) => write!(f, "refuted: {r}"),
        }
    }
}

impl fmt::Display for Refutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.reason)?;
        if !self.point.is_empty() {
            write!(f, " at {:?}", self.point)?;
        }
        if let Some(p) = self.piece {
            write!(f, " [piece {p}]")?;
        }
        if let Some(d) = self.deviation {
            write!(f, " (deviation {d:.3e})")?;
        }
        Ok(())
    }
}
