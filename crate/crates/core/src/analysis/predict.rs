//! Closed-form next-period predictions for the group-composition treatments.

use serde::Serialize;

use crate::error::{Error, Result};

/// Predicted `a_{t+1} / a_t` for best responders facing `n_fixed` players
/// locked at 0: `p * n_responders / n`.
pub fn predicted_ratio_fixed(n_fixed: u32, n_responders: u32, p: f64) -> Result<f64> {
    let n = n_fixed + n_responders;
    if n == 0 {
        return Err(Error::invalid("group size must be positive"));
    }
    Ok(p * f64::from(n_responders) / f64::from(n))
}

/// Next-period action of a best responder believing there are `believed_high`
/// H and `believed_low` L agents: `p * (B_H/n * a_H + B_L/n * a_L)`.
pub fn predicted_next_mixed(
    believed_high: u32,
    believed_low: u32,
    a_high: f64,
    a_low: f64,
    p: f64,
    n: u32,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("group size must be positive"));
    }
    if believed_high + believed_low != n {
        return Err(Error::invalid(format!(
            "believed counts {believed_high}+{believed_low} do not sum to {n}"
        )));
    }
    let n = f64::from(n);
    // an empty group contributes nothing whatever its nominal action
    let part = |count: u32, action: f64| {
        if count == 0 {
            0.0
        } else {
            f64::from(count) / n * action
        }
    };
    Ok(p * (part(believed_high, a_high) + part(believed_low, a_low)))
}

/// Coefficients of the per-type ratio formulas:
/// `a_{H,t+1}/a_{H,t} = cross_high * (a_L/a_H) + own_high` and
/// `a_{L,t+1}/a_{L,t} = cross_low * (a_H/a_L) + own_low`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypeRatioCoefficients {
    pub cross_high: f64,
    pub own_high: f64,
    pub cross_low: f64,
    pub own_low: f64,
}

pub fn per_type_coefficients(n_high: u32, n_low: u32, p: f64) -> Result<TypeRatioCoefficients> {
    let n = n_high + n_low;
    if n == 0 {
        return Err(Error::invalid("group size must be positive"));
    }
    let share = |k: u32| p * f64::from(k) / f64::from(n);
    Ok(TypeRatioCoefficients {
        cross_high: share(n_low),
        own_high: share(n_high),
        cross_low: share(n_high),
        own_low: share(n_low),
    })
}

/// `(a_{H,t+1}/a_{H,t}, a_{L,t+1}/a_{L,t})` under correct beliefs.
pub fn per_type_ratio_mixed(
    n_high: u32,
    n_low: u32,
    a_high: f64,
    a_low: f64,
    p: f64,
) -> Result<(f64, f64)> {
    if !(a_high > 0.0 && a_low > 0.0) {
        return Err(Error::invalid("per-type ratios need positive actions"));
    }
    let c = per_type_coefficients(n_high, n_low, p)?;
    Ok((
        c.cross_high * (a_low / a_high) + c.own_high,
        c.cross_low * (a_high / a_low) + c.own_low,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: f64 = 2.0 / 3.0;

    #[test]
    fn fixed_ratios_match_reported_values() {
        let cases = [(9, 1, 0.067), (5, 5, 0.333), (1, 9, 0.6), (0, 10, 0.667)];
        for (nf, nl, reported) in cases {
            let r = predicted_ratio_fixed(nf, nl, P).unwrap();
            assert!((r - reported).abs() < 5e-4, "({nf},{nl}) -> {r}");
        }
        assert!((predicted_ratio_fixed(9, 1, P).unwrap() - 1.0 / 15.0).abs() < 1e-15);
        assert!(predicted_ratio_fixed(0, 0, P).is_err());
    }

    #[test]
    fn mixed_examples() {
        let v = predicted_next_mixed(9, 1, 20.0, 50.0, P, 10).unwrap();
        assert!((v - 46.0 / 3.0).abs() < 1e-12);
        let a = 37.0;
        let v = predicted_next_mixed(5, 5, a, a, P, 10).unwrap();
        assert!((v - P * a).abs() < 1e-12);
        let v = predicted_next_mixed(10, 0, 30.0, f64::NAN, P, 10).unwrap();
        assert!((v - 20.0).abs() < 1e-12);
        assert!(predicted_next_mixed(4, 4, 1.0, 1.0, P, 10).is_err());
        assert!(predicted_next_mixed(0, 0, 1.0, 1.0, P, 0).is_err());
    }

    #[test]
    fn per_type_coefficients_match_reported_formulas() {
        // (9,1): 0.067 a_L/a_H + 0.6 and 0.6 a_H/a_L + 0.067
        let c = per_type_coefficients(9, 1, P).unwrap();
        assert!((c.cross_high - 0.067).abs() < 5e-4 && (c.own_high - 0.6).abs() < 1e-12);
        assert!((c.cross_low - 0.6).abs() < 1e-12 && (c.own_low - 0.067).abs() < 5e-4);
        // (5,5): 0.333 on both sides
        let c = per_type_coefficients(5, 5, P).unwrap();
        for v in [c.cross_high, c.own_high, c.cross_low, c.own_low] {
            assert!((v - 0.333).abs() < 5e-4);
        }
        // (1,9): 0.6 a_L/a_H + 0.067 and 0.067 a_H/a_L + 0.6
        let c = per_type_coefficients(1, 9, P).unwrap();
        assert!((c.cross_high - 0.6).abs() < 1e-12 && (c.own_high - 0.067).abs() < 5e-4);
        assert!((c.cross_low - 0.067).abs() < 5e-4 && (c.own_low - 0.6).abs() < 1e-12);
    }

    #[test]
    fn equal_actions_collapse_to_p() {
        for (h, l) in [(9, 1), (5, 5), (1, 9)] {
            let (rh, rl) = per_type_ratio_mixed(h, l, 12.0, 12.0, P).unwrap();
            assert!((rh - P).abs() < 1e-12 && (rl - P).abs() < 1e-12);
        }
        assert!(per_type_ratio_mixed(5, 5, 0.0, 1.0, P).is_err());
    }
}
