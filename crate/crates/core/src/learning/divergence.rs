use super::check_same_len;
use crate::error::{Error, Result};

fn check_reference(q: &[f64]) -> Result<()> {
    if let Some(x) = q.iter().find(|&&x| !(x.is_finite() && x > 0.0)) {
        return Err(Error::Precondition(format!(
            "reference distribution needs positive entries, got {x}"
        )));
    }
    Ok(())
}

/// `D_KL(p ‖ q) = Σ p_i log(p_i / q_i)` with `0 log 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_same_len(p, q, "kl_divergence")?;
    check_reference(q)?;
    Ok(p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum())
}

/// `R(p ‖ q) = ½ Σ q_i (p_i / q_i − 1)²`, the regularizer for which the REP
/// step is the proximal update. Weighted by the reference `q`.
pub fn rep_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_same_len(p, q, "rep_divergence")?;
    check_reference(q)?;
    Ok(0.5
        * p.iter()
            .zip(q)
            .map(|(&pi, &qi)| {
                let r = pi / qi - 1.0;
                qi * r * r
            })
            .sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergences_vanish_on_identical_inputs() {
        let p = [0.1, 0.2, 0.7];
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        assert_eq!(rep_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn closed_forms() {
        let kl = kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((kl - 2f64.ln()).abs() < 1e-15);
        let r = rep_divergence(&[0.75, 0.25], &[0.5, 0.5]).unwrap();
        assert!((r - 0.125).abs() < 1e-15);
    }

    #[test]
    fn zero_reference_entry_is_rejected() {
        assert!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).is_err());
        assert!(rep_divergence(&[0.5, 0.5], &[1.0, 0.0]).is_err());
    }
}
