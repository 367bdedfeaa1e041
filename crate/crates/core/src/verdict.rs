use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::NotApplicable => "n/a",
        }
    }
}

/// A sample site in both grid and physical coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub i: usize,
    pub j: usize,
    #[serde(with = "nonfinite")]
    pub x: f64,
    #[serde(with = "nonfinite")]
    pub y: f64,
}

/// Outcome of one quantified property check.
///
/// `worst_violation` is measured in the units of the checked quantity and is
/// clamped at zero when every sample satisfies the property. A failing
/// verdict always has `worst_violation > tolerance` and at least one
/// location.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyVerdict {
    pub property: String,
    pub status: Status,
    #[serde(with = "nonfinite")]
    pub worst_violation: f64,
    #[serde(with = "nonfinite")]
    pub tolerance: f64,
    pub locations: Vec<Location>,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl PropertyVerdict {
    pub fn not_applicable(property: &str, note: impl Into<String>) -> Self {
        Self {
            property: property.to_string(),
            status: Status::NotApplicable,
            worst_violation: 0.0,
            tolerance: 0.0,
            locations: Vec::new(),
            samples: 0,
            note: note.into(),
        }
    }

    /// Builds a verdict from the worst violation; fails iff it exceeds `tolerance`.
    pub fn from_violation(
        property: &str,
        worst: f64,
        tolerance: f64,
        worst_at: Option<Location>,
        samples: usize,
    ) -> Self {
        let worst = if worst.is_nan() { f64::INFINITY } else { worst.max(0.0) };
        let status = Status::from_bool(worst <= tolerance);
        let locations = match (status, worst_at) {
            (Status::Fail, Some(l)) => vec![l],
            (Status::Fail, None) => vec![Location {
                i: 0,
                j: 0,
                x: f64::NAN,
                y: f64::NAN,
            }],
            (_, Some(l)) if worst > 0.0 => vec![l],
            _ => Vec::new(),
        };
        Self {
            property: property.to_string(),
            status,
            worst_violation: worst,
            tolerance,
            locations,
            samples,
            note: String::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }

    /// `tolerance / worst_violation`; infinite when nothing was violated.
    pub fn margin(&self) -> f64 {
        if self.worst_violation == 0.0 {
            f64::INFINITY
        } else {
            self.tolerance / self.worst_violation
        }
    }
}

/// Folds per-item verdicts (e.g. one per streamline) into one.
///
/// Fails if any part fails, is not applicable if every part is; otherwise
/// the part closest to its tolerance is reported.
pub fn combine(property: &str, parts: &[PropertyVerdict]) -> PropertyVerdict {
    let applicable: Vec<&PropertyVerdict> =
        parts.iter().filter(|v| v.status != Status::NotApplicable).collect();
    if applicable.is_empty() {
        let note = parts.first().map(|v| v.note.clone()).unwrap_or_default();
        return PropertyVerdict::not_applicable(property, note);
    }
    let ratio = |v: &PropertyVerdict| {
        if v.worst_violation == 0.0 {
            0.0
        } else if v.tolerance == 0.0 {
            f64::INFINITY
        } else {
            v.worst_violation / v.tolerance
        }
    };
    let failing = applicable.iter().filter(|v| v.failed()).count();
    let worst = applicable
        .iter()
        .copied()
        .max_by(|a, b| {
            // failures first, then by closeness to the tolerance
            (a.failed(), ratio(a))
                .partial_cmp(&(b.failed(), ratio(b)))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("nonempty");
    let mut out = worst.clone();
    out.property = property.to_string();
    out.samples = applicable.iter().map(|v| v.samples).sum();
    out.status = if failing > 0 { Status::Fail } else { Status::Pass };
    let summary = format!("{failing} of {} parts fail", applicable.len());
    out.note = if worst.note.is_empty() {
        summary
    } else {
        format!("{summary}; worst part: {}", worst.note)
    };
    out
}

/// Tracks the running maximum violation and where it happened.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Worst {
    pub value: f64,
    pub at: Option<Location>,
}

impl Worst {
    pub fn new() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            at: None,
        }
    }

    pub fn push(&mut self, value: f64, at: Location) {
        if self.value.is_nan() {
            return;
        }
        if value.is_nan() || value > self.value {
            self.value = value;
            self.at = Some(at);
        }
    }
}

/// JSON has no infinities or NaN; those are written as the strings
/// `"inf"`, `"-inf"` and `"nan"`.
pub mod nonfinite {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("expected a number, found {other:?}"))),
            },
        }
    }
}
