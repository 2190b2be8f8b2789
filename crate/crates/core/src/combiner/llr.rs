//! LLR-level combining: per-round extrinsics are added before decoding.

use super::LlrGrid;
use crate::{Error, Result};

pub fn llr_level_combine(extrinsic_per_round: &[LlrGrid]) -> Result<LlrGrid> {
    let first = extrinsic_per_round
        .first()
        .ok_or_else(|| Error::Protocol("no rounds to combine".into()))?;
    let mut out = first.clone();
    for g in &extrinsic_per_round[1..] {
        if g.shape() != first.shape() {
            return Err(Error::framing("LLR grid", first.len(), g.len()));
        }
        for (o, v) in out.values.iter_mut().zip(g.values()) {
            *o += v;
        }
    }
    out.clip();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_round_is_identity() {
        let g = LlrGrid::from_vec(2, 1, 2, vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        assert_eq!(llr_level_combine(&[g.clone()]).unwrap(), g);
    }

    #[test]
    fn opposite_llrs_cancel() {
        let g = LlrGrid::from_vec(2, 1, 1, vec![1.5, -2.0]).unwrap();
        let n = LlrGrid::from_vec(2, 1, 1, vec![-1.5, 2.0]).unwrap();
        assert_eq!(llr_level_combine(&[g, n]).unwrap().values(), &[0.0, 0.0]);
    }

    #[test]
    fn independent_bpsk_observations_add() {
        // y_k = x + n_k with x = +-1, n_k ~ N(0, s_k^2): the joint LLR of
        // x = -1 (bit 1) is the sum of the per-observation LLRs
        let obs = [(0.3, 0.5), (-0.8, 1.2)];
        let llr = |y: f64, s2: f64| -2.0 * y / s2;
        let grids: Vec<LlrGrid> = obs
            .iter()
            .map(|&(y, s2)| LlrGrid::from_vec(1, 1, 1, vec![llr(y, s2)]).unwrap())
            .collect();
        let joint: f64 = {
            let lik = |x: f64| obs.iter().map(|&(y, s2)| -(y - x) * (y - x) / (2.0 * s2)).sum::<f64>();
            lik(-1.0) - lik(1.0)
        };
        assert!((llr_level_combine(&grids).unwrap().values()[0] - joint).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(llr_level_combine(&[LlrGrid::zeros(2, 1, 1), LlrGrid::zeros(2, 1, 2)]).is_err());
        assert!(llr_level_combine(&[]).is_err());
    }
}
