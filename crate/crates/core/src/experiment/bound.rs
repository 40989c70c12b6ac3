use std::fmt;

use crate::bias::log2_bound;
use crate::Result;

/// Closed-form success bound for a space too large to materialise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundReport {
    pub log2: f64,
}

impl BoundReport {
    pub fn compute(log2_n: f64, log2_k: f64, q_min: f64, bias: f64) -> Result<Self> {
        Ok(Self { log2: log2_bound(log2_n, log2_k, q_min, bias)? })
    }

    /// `2^e` with integral exponents printed without a fraction.
    pub fn power_form(&self) -> String {
        let v = self.log2;
        if v == f64::NEG_INFINITY {
            "2^-inf".to_owned()
        } else if v.fract() == 0.0 && v.abs() < 1e15 {
            format!("2^{}", v as i64)
        } else {
            format!("2^{v:.6}")
        }
    }

    /// Decimal scientific form, computed in log space so it never underflows.
    pub fn scientific_form(&self) -> String {
        if self.log2 == f64::NEG_INFINITY {
            return "0".to_owned();
        }
        let l10 = self.log2 * std::f64::consts::LOG10_2;
        let mut exp = l10.floor();
        let mut mantissa = 10f64.powf(l10 - exp);
        if mantissa >= 9.9999995 {
            mantissa /= 10.0;
            exp += 1.0;
        }
        format!("{mantissa:.6}e{}", exp as i64)
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "log2 bound: {}", self.power_form())?;
        write!(f, "decimal:    {}", self.scientific_form())
    }
}

pub fn format_bound(log2_n: f64, log2_k: f64, q_min: f64, bias: f64) -> Result<String> {
    BoundReport::compute(log2_n, log2_k, q_min, bias).map(|r| r.to_string())
}
