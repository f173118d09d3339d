//! Logistic link helpers.

/// Logistic function, evaluated without overflow for either sign.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `ln(1 + e^t)` as `max(t, 0) + ln1p(e^{-|t|})`.
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

pub(crate) fn check_open_probability(name: &str, p: f64) -> crate::Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(crate::Error::InvalidInput(format!("{name} = {p} must lie strictly inside (0, 1)")))
    }
}
