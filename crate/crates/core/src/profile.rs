//! 1-periodic scalar coefficient profiles.

use crate::error::{Error, Result};

/// Internal representation of a 1-periodic coefficient.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileRepr {
    /// Piecewise-constant on one period: `values[i]` holds on
    /// `[breakpoints[i], breakpoints[i+1])` (last piece wraps to 1).
    /// Breakpoints are strictly increasing in `[0, 1)` and start at 0.
    PiecewiseConstant { breakpoints: Vec<f64>, values: Vec<f64> },
    /// Uniform samples over one period, `samples[i] = a((i + 1/2) / n)`.
    Sampled { samples: Vec<f64> },
}

/// A 1-periodic coefficient `a(y)`, evaluated on the rescaled axis as
/// `a(x / epsilon)` by [`PeriodicProfile::eval_scaled`].
///
/// Pointwise bounds over the period are cached at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicProfile {
    repr: ProfileRepr,
    min: f64,
    max: f64,
}

impl PeriodicProfile {
    /// Constant profile `a == c`.
    pub fn constant(c: f64) -> Self {
        Self::piecewise_constant(vec![0.0], vec![c]).expect("single piece is always valid")
    }

    /// Two-valued profile: `lo_value` on `[0, split)`, `hi_value` on `[split, 1)`.
    pub fn two_valued(lo_value: f64, hi_value: f64, split: f64) -> Result<Self> {
        Self::piecewise_constant(vec![0.0, split], vec![lo_value, hi_value])
    }

    pub fn piecewise_constant(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::Domain(format!(
                "need equal, nonzero counts of breakpoints and values, got {} and {}",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::Domain(format!(
                "first breakpoint must be 0 so pieces cover one period, got {}",
                breakpoints[0]
            )));
        }
        for w in breakpoints.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Domain(format!(
                    "breakpoints must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if *breakpoints.last().unwrap() >= 1.0 {
            return Err(Error::Domain("breakpoints must lie in [0, 1)".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("profile values must be finite".into()));
        }
        let (min, max) = min_max(&values);
        Ok(Self { repr: ProfileRepr::PiecewiseConstant { breakpoints, values }, min, max })
    }

    pub fn sampled(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("sampled profile needs at least one sample".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("profile samples must be finite".into()));
        }
        let (min, max) = min_max(&samples);
        Ok(Self { repr: ProfileRepr::Sampled { samples }, min, max })
    }

    pub fn repr(&self) -> &ProfileRepr {
        &self.repr
    }

    /// Cached pointwise bounds `(min, max)` over one period.
    pub fn bounds(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.min > 0.0
    }

    /// Largest absolute value over the period, `sup |a|`.
    pub fn sup_abs(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }

    /// Evaluate at `y`, reduced periodically into `[0, 1)`.
    pub fn eval(&self, y: f64) -> f64 {
        let y = wrap_unit(y);
        match &self.repr {
            ProfileRepr::PiecewiseConstant { breakpoints, values } => {
                // Index of the last breakpoint <= y.
                let idx = match breakpoints.binary_search_by(|b| b.partial_cmp(&y).unwrap()) {
                    Ok(i) => i,
                    Err(i) => i - 1,
                };
                values[idx]
            }
            ProfileRepr::Sampled { samples } => {
                let n = samples.len();
                let idx = ((y * n as f64).floor() as usize).min(n - 1);
                samples[idx]
            }
        }
    }

    /// Evaluate the oscillatory coefficient `a(x / epsilon)`.
    pub fn eval_scaled(&self, x: f64, epsilon: f64) -> f64 {
        self.eval(x / epsilon)
    }

    /// Breakpoints of `a(x / epsilon)` inside `[lo, hi]`, sorted.
    ///
    /// Empty for sampled profiles with one sample (constants); for sampled
    /// profiles each sample-cell edge counts as a breakpoint.
    pub fn scaled_breakpoints(&self, epsilon: f64, lo: f64, hi: f64) -> Vec<f64> {
        let unit: Vec<f64> = match &self.repr {
            ProfileRepr::PiecewiseConstant { breakpoints, .. } => {
                if breakpoints.len() == 1 {
                    return Vec::new();
                }
                breakpoints.clone()
            }
            ProfileRepr::Sampled { samples } => {
                if samples.len() == 1 {
                    return Vec::new();
                }
                (0..samples.len()).map(|i| i as f64 / samples.len() as f64).collect()
            }
        };
        let mut out = Vec::new();
        let k_lo = (lo / epsilon).floor() as i64 - 1;
        let k_hi = (hi / epsilon).ceil() as i64 + 1;
        for k in k_lo..=k_hi {
            for b in &unit {
                let x = (k as f64 + b) * epsilon;
                if x > lo && x < hi {
                    out.push(x);
                }
            }
        }
        out.sort_by(|p, q| p.partial_cmp(q).unwrap());
        out
    }

    /// Period average of a pointwise transform: `∫₀¹ T(a(y)) dy`.
    ///
    /// Exact breakpoint-weighted sum for piecewise-constant profiles;
    /// composite midpoint on the sample grid otherwise. The transform must
    /// be finite on the profile's range (e.g. inversion requires a
    /// strictly positive profile).
    pub fn average<T: Fn(f64) -> f64>(&self, transform: T) -> Result<f64> {
        let apply = |v: f64| -> Result<f64> {
            let t = transform(v);
            if !t.is_finite() {
                return Err(Error::Domain(format!(
                    "transform produced non-finite value {t} at profile value {v}"
                )));
            }
            Ok(t)
        };
        match &self.repr {
            ProfileRepr::PiecewiseConstant { breakpoints, values } => {
                let mut acc = 0.0;
                for i in 0..values.len() {
                    let right = if i + 1 < breakpoints.len() { breakpoints[i + 1] } else { 1.0 };
                    acc += (right - breakpoints[i]) * apply(values[i])?;
                }
                Ok(acc)
            }
            ProfileRepr::Sampled { samples } => {
                let mut acc = 0.0;
                for &v in samples {
                    acc += apply(v)?;
                }
                Ok(acc / samples.len() as f64)
            }
        }
    }

    /// Serialize to the structured-text block format accepted by
    /// [`PeriodicProfile::from_text`].
    pub fn to_text(&self) -> String {
        match &self.repr {
            ProfileRepr::PiecewiseConstant { breakpoints, values } => format!(
                "type = piecewise-constant\nbreakpoints = {}\nvalues = {}\n",
                join_floats(breakpoints),
                join_floats(values)
            ),
            ProfileRepr::Sampled { samples } => {
                format!("type = sampled\nsamples = {}\n", join_floats(samples))
            }
        }
    }

    /// Parse a structured-text block of the form
    ///
    /// ```text
    /// type = piecewise-constant
    /// breakpoints = 0, 0.5
    /// values = 1, 2
    /// ```
    ///
    /// or `type = sampled` with a `samples` line. Unknown keys are
    /// rejected, naming the offending key.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut ty: Option<String> = None;
        let mut breakpoints: Option<Vec<f64>> = None;
        let mut values: Option<Vec<f64>> = None;
        let mut samples: Option<Vec<f64>> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, val) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
            })?;
            let key = key.trim();
            let val = val.trim();
            match key {
                "type" => ty = Some(val.to_string()),
                "breakpoints" => breakpoints = Some(parse_floats(val)?),
                "values" => values = Some(parse_floats(val)?),
                "samples" => samples = Some(parse_floats(val)?),
                other => return Err(Error::Parse(format!("unknown key `{other}`"))),
            }
        }
        match ty.as_deref() {
            Some("piecewise-constant") => {
                let b = breakpoints
                    .ok_or_else(|| Error::Parse("missing key `breakpoints`".into()))?;
                let v = values.ok_or_else(|| Error::Parse("missing key `values`".into()))?;
                Self::piecewise_constant(b, v)
            }
            Some("sampled") => {
                let s = samples.ok_or_else(|| Error::Parse("missing key `samples`".into()))?;
                Self::sampled(s)
            }
            Some(other) => Err(Error::Parse(format!("unknown profile type `{other}`"))),
            None => Err(Error::Parse("missing key `type`".into())),
        }
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    (min, max)
}

/// Reduce `y` into `[0, 1)`.
pub fn wrap_unit(y: f64) -> f64 {
    let w = y - y.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

fn join_floats(vals: &[f64]) -> String {
    vals.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(", ")
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("not a number: `{}`", tok.trim())))
        })
        .collect()
}
