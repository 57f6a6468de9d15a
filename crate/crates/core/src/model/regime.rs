use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

/// Tolerance for deciding equalities between scale exponents.
pub const EXP_TOL: f64 = 1e-12;

fn eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= EXP_TOL * (1.0 + a.abs().max(b.abs()))
}

fn gt(a: f64, b: f64) -> bool {
    a > b && !eq(a, b)
}

/// Power-law scales: alpha = eps^a, beta = eps^b, gamma = eps^g.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSchedule {
    pub a_exp: f64,
    pub b_exp: f64,
    pub g_exp: f64,
}

impl ScaleSchedule {
    /// Checks `a > 0`, `b, g >= 0` and the standing assumption `2a > b`.
    pub fn new(a_exp: f64, b_exp: f64, g_exp: f64) -> Result<Self> {
        for (name, v) in [("a_exp", a_exp), ("b_exp", b_exp), ("g_exp", g_exp)] {
            if !v.is_finite() {
                return Err(Error::Validation(format!("{name} must be finite, got {v}")));
            }
        }
        if a_exp <= 0.0 {
            return Err(Error::Validation(format!("a_exp must be > 0, got {a_exp}")));
        }
        if b_exp < 0.0 || g_exp < 0.0 {
            return Err(Error::Validation(format!(
                "b_exp and g_exp must be >= 0, got b_exp={b_exp}, g_exp={g_exp}"
            )));
        }
        if !gt(2.0 * a_exp, b_exp) {
            return Err(Error::Validation(format!(
                "standing assumption alpha^2/beta -> 0 requires 2*a_exp > b_exp, got a_exp={a_exp}, b_exp={b_exp}"
            )));
        }
        Ok(ScaleSchedule { a_exp, b_exp, g_exp })
    }

    /// Zeroes the exponents of absent terms (beta = 1 without c, gamma = 1 without H).
    pub fn normalized(self, c_present: bool, h_present: bool) -> Self {
        ScaleSchedule {
            a_exp: self.a_exp,
            b_exp: if c_present { self.b_exp } else { 0.0 },
            g_exp: if h_present { self.g_exp } else { 0.0 },
        }
    }

    pub fn alpha(&self, eps: f64) -> f64 {
        eps.powf(self.a_exp)
    }

    pub fn beta(&self, eps: f64) -> f64 {
        eps.powf(self.b_exp)
    }

    pub fn gamma(&self, eps: f64) -> f64 {
        eps.powf(self.g_exp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeClass {
    Regime1,
    Regime2,
    NoHomogenization,
    Unclassified,
}

impl fmt::Display for RegimeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegimeClass::Regime1 => "Regime1",
            RegimeClass::Regime2 => "Regime2",
            RegimeClass::NoHomogenization => "NoHomogenization",
            RegimeClass::Unclassified => "Unclassified",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DevTag {
    R0_1,
    R0_2,
    R0_3,
    R1_1,
    R1_2,
    R1_3,
    R2_1,
    R2_2,
    R2_3,
}

impl DevTag {
    pub const ALL: [DevTag; 9] = [
        DevTag::R0_1,
        DevTag::R0_2,
        DevTag::R0_3,
        DevTag::R1_1,
        DevTag::R1_2,
        DevTag::R1_3,
        DevTag::R2_1,
        DevTag::R2_2,
        DevTag::R2_3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DevTag::R0_1 => "R0_1",
            DevTag::R0_2 => "R0_2",
            DevTag::R0_3 => "R0_3",
            DevTag::R1_1 => "R1_1",
            DevTag::R1_2 => "R1_2",
            DevTag::R1_3 => "R1_3",
            DevTag::R2_1 => "R2_1",
            DevTag::R2_2 => "R2_2",
            DevTag::R2_3 => "R2_3",
        }
    }

    /// 0, 1 or 2: which averaging family the tag belongs to.
    pub fn family(self) -> u8 {
        match self {
            DevTag::R0_1 | DevTag::R0_2 | DevTag::R0_3 => 0,
            DevTag::R1_1 | DevTag::R1_2 | DevTag::R1_3 => 1,
            DevTag::R2_1 | DevTag::R2_2 | DevTag::R2_3 => 2,
        }
    }

    /// 1, 2 or 3: drift only, diffusion only, or both.
    pub fn sub(self) -> u8 {
        match self {
            DevTag::R0_1 | DevTag::R1_1 | DevTag::R2_1 => 1,
            DevTag::R0_2 | DevTag::R1_2 | DevTag::R2_2 => 2,
            DevTag::R0_3 | DevTag::R1_3 | DevTag::R2_3 => 3,
        }
    }

    pub fn has_drift_extra(self) -> bool {
        self.sub() != 2
    }

    pub fn has_sigma_extra(self) -> bool {
        self.sub() != 1
    }
}

impl fmt::Display for DevTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DevTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DevTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Validation(format!("unknown deviation regime tag \"{s}\"")))
    }
}

/// Deviation sub-regime together with the exponent of eta = eps^eta_exp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationRegime {
    pub tag: DevTag,
    pub eta_exp: f64,
}

impl DeviationRegime {
    pub fn eta(&self, eps: f64) -> f64 {
        eps.powf(self.eta_exp)
    }
}

/// Regularity and moment parameters entering the predicted rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateModel {
    pub theta: f64,
    pub delta: f64,
    pub q: f64,
}

impl Default for RateModel {
    fn default() -> Self {
        RateModel {
            theta: 1.0,
            delta: 1.0,
            q: 2.0,
        }
    }
}

impl RateModel {
    pub fn new(theta: f64, delta: f64, q: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::Validation(format!("theta must lie in (0,1], got {theta}")));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Validation(format!("delta must lie in (0,1], got {delta}")));
        }
        if !(q >= 1.0 && q.is_finite()) {
            return Err(Error::Validation(format!("q must be >= 1, got {q}")));
        }
        Ok(RateModel { theta, delta, q })
    }
}

pub fn classify_averaging_regime(s: &ScaleSchedule, h_present: bool) -> RegimeClass {
    if !h_present {
        return RegimeClass::NoHomogenization;
    }
    let (a, b, g) = (s.a_exp, s.b_exp, s.g_exp);
    if !gt(a, g) {
        return RegimeClass::Unclassified;
    }
    if eq(2.0 * a, b + g) {
        RegimeClass::Regime2
    } else if gt(2.0 * a, b + g) {
        RegimeClass::Regime1
    } else {
        RegimeClass::Unclassified
    }
}

pub fn classify_deviation_regime(s: &ScaleSchedule, regime: RegimeClass) -> Result<DeviationRegime> {
    let (a, b, g) = (s.a_exp, s.b_exp, s.g_exp);
    let fail = |why: &str| {
        Err(Error::BoundaryUnclassifiable(format!(
            "{regime} with a_exp={a}, b_exp={b}, g_exp={g}: {why}"
        )))
    };
    if !gt(2.0 * a, b) {
        return fail("requires 2a > b");
    }
    let (tag, eta_exp) = match regime {
        RegimeClass::Unclassified => return fail("schedule lies outside both averaging regimes"),
        RegimeClass::NoHomogenization => {
            if gt(b, a) {
                (DevTag::R0_1, 2.0 * a - b)
            } else if gt(a, b) {
                (DevTag::R0_2, a)
            } else {
                (DevTag::R0_3, a)
            }
        }
        RegimeClass::Regime1 => {
            if !gt(a, g) || !gt(2.0 * a, b + g) {
                return fail("requires a > g and 2a > b + g");
            }
            if gt(b, a) {
                (DevTag::R1_1, 2.0 * a - b - g)
            } else if gt(a, b) {
                (DevTag::R1_2, a - g)
            } else {
                (DevTag::R1_3, a - g)
            }
        }
        RegimeClass::Regime2 => {
            if !gt(a, g) || !eq(2.0 * a, b + g) {
                return fail("requires a > g and 2a = b + g");
            }
            if gt(b, a + g) {
                (DevTag::R2_1, 2.0 * a - b)
            } else if gt(a + g, b) {
                (DevTag::R2_2, a - g)
            } else {
                (DevTag::R2_3, a - g)
            }
        }
    };
    Ok(DeviationRegime { tag, eta_exp })
}

/// Exponent r with sup_t E|Y - Ybar|^q ~ eps^(q r); returned without the q factor.
pub fn predicted_strong_rate(s: &ScaleSchedule, regime: RegimeClass, rates: &RateModel) -> Result<f64> {
    let (a, b, g) = (s.a_exp, s.b_exp, s.g_exp);
    let th = rates.theta.min(1.0);
    match regime {
        RegimeClass::Regime1 | RegimeClass::NoHomogenization => Ok((a * th - g).min(2.0 * a - b - g)),
        RegimeClass::Regime2 => Ok((a * th - g).min(2.0 * a - b)),
        RegimeClass::Unclassified => Err(Error::BoundaryUnclassifiable(format!(
            "no strong rate for an unclassified schedule (a_exp={a}, b_exp={b}, g_exp={g})"
        ))),
    }
}

/// Exponent of the weak (CLT) rate for the given deviation regime.
pub fn predicted_weak_rate(s: &ScaleSchedule, dev: &DeviationRegime, rates: &RateModel) -> f64 {
    let (a, b, g) = (s.a_exp, s.b_exp, s.g_exp);
    let th = rates.theta.min(1.0);
    match dev.tag {
        DevTag::R0_1 => (2.0 * b - 2.0 * a).min(th * (2.0 * a - b)),
        DevTag::R0_2 => (a - b).min(th * a),
        DevTag::R0_3 => th * a,
        DevTag::R1_1 => g.min(2.0 * b - 2.0 * a).min(th * (2.0 * a - b - g)),
        DevTag::R1_2 => g.min(a - b).min(th * (a - g)),
        DevTag::R1_3 => g.min(th * (a - g)),
        DevTag::R2_1 => (2.0 * b - 2.0 * a - 2.0 * g).min(th * (2.0 * a - b)),
        DevTag::R2_2 => (a + g - b).min(th * (a - g)),
        DevTag::R2_3 => th * (a - g),
    }
}

/// Exponent of the strong fluctuation bound for a centered f, without the q factor.
pub fn predicted_fluctuation_rate(s: &ScaleSchedule, rates: &RateModel) -> f64 {
    (s.a_exp * rates.theta.min(1.0)).min(2.0 * s.a_exp - s.b_exp)
}
