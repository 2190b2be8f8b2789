//! Operation counts of the signal-level combiner.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComplexityReport {
    /// Extra complex additions for absorbing round `k > 1` into `z_i` and
    /// `Upsilon`: `N_T^2 (kappa + L - 1)^2 + N_R kappa T`.
    pub delta_n_add: u64,
    /// Order of the per-iteration filter inversion, `N_T^3 kappa^3`.
    pub inversion_order: u64,
}

pub fn complexity_estimate(
    n_tx: usize,
    n_rx: usize,
    kappa: usize,
    n_taps: usize,
    n_uses: usize,
    k: usize,
) -> ComplexityReport {
    let (n_tx, n_rx, kappa, n_taps, n_uses) =
        (n_tx as u64, n_rx as u64, kappa as u64, n_taps as u64, n_uses as u64);
    let width = kappa + n_taps - 1;
    let delta_n_add = if k > 1 {
        n_tx * n_tx * width * width + n_rx * kappa * n_uses
    } else {
        0
    };
    ComplexityReport {
        delta_n_add,
        inversion_order: (n_tx * kappa).pow(3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_count() {
        assert_eq!(complexity_estimate(2, 2, 9, 2, 906, 2).delta_n_add, 16708);
        assert_eq!(complexity_estimate(2, 2, 9, 2, 906, 1).delta_n_add, 0);
    }

    #[test]
    fn first_term_scales_quadratically() {
        let a = complexity_estimate(2, 2, 40, 1, 0, 2).delta_n_add;
        let b = complexity_estimate(2, 2, 80, 1, 0, 2).delta_n_add;
        assert_eq!(b, 4 * a);
    }
}
