//! Log-MAP (BCJR) soft-input/soft-output decoder for zero-tailed
//! convolutional codes.
//!
//! LLRs follow `lambda = log P(b = 1) / P(b = 0)`. The decoder takes a-priori
//! LLRs on the (deinterleaved) coded bits and returns a-posteriori LLRs on
//! the data bits together with extrinsic LLRs on the coded bits. State
//! metrics are combined with the exact Jacobian logarithm; branch sums are
//! combined with a max-shifted log-sum-exp, which is the same quantity.

use crate::tx::ConvCode;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderIo {
    pub apriori_coded: Vec<f64>,
    /// A-posteriori minus a-priori, per coded bit.
    pub extrinsic_coded: Vec<f64>,
    /// A-posteriori LLRs of the data bits (tail excluded).
    pub app_info: Vec<f64>,
}

impl DecoderIo {
    /// Hard decisions on the data bits.
    pub fn decisions(&self) -> Vec<u8> {
        self.app_info.iter().map(|&l| u8::from(l > 0.0)).collect()
    }
}

/// `log(exp(a) + exp(b))`.
#[inline]
pub fn max_star(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let d = (a - b).abs();
    // exp(-37) is below the resolution of any metric it could be added to
    if d > 37.0 {
        m
    } else {
        m + (-d).exp().ln_1p()
    }
}

/// Trellis tables plus reusable scratch memory.
#[derive(Debug, Clone)]
pub struct SisoDecoder {
    code: ConvCode,
    next: Vec<[usize; 2]>,
    out: Vec<[u32; 2]>,
    /// Predecessors `(state, input)` of every state.
    pred: Vec<[(usize, u8); 2]>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    beta_next: Vec<f64>,
    metrics: Vec<f64>,
}

impl SisoDecoder {
    pub fn new(code: &ConvCode) -> Self {
        let ns = code.num_states();
        let mut next = vec![[0usize; 2]; ns];
        let mut out = vec![[0u32; 2]; ns];
        let mut pred = vec![Vec::with_capacity(2); ns];
        for s in 0..ns {
            for u in 0..2u8 {
                let (o, n) = code.step(s, u);
                next[s][u as usize] = n;
                out[s][u as usize] = o;
                pred[n].push((s, u));
            }
        }
        let pred = pred.into_iter().map(|p| [p[0], p[1]]).collect();
        SisoDecoder {
            code: code.clone(),
            next,
            out,
            pred,
            alpha: Vec::new(),
            beta: vec![0.0; ns],
            beta_next: vec![0.0; ns],
            metrics: vec![0.0; 2 * ns],
        }
    }

    pub fn code(&self) -> &ConvCode {
        &self.code
    }

    pub fn decode(&mut self, apriori_coded: &[f64]) -> Result<DecoderIo> {
        let n = self.code.outputs();
        let ns = self.code.num_states();
        if apriori_coded.is_empty() || apriori_coded.len() % n != 0 {
            return Err(Error::Config(format!(
                "{} coded LLRs do not form whole trellis steps of {n}",
                apriori_coded.len()
            )));
        }
        let steps = apriori_coded.len() / n;
        if steps <= self.code.memory() {
            return Err(Error::framing("trellis", self.code.memory() + 1, steps));
        }
        let n_codes = 1usize << n;
        let branch = |k: usize, g: &mut Vec<f64>| {
            g.clear();
            let lam = &apriori_coded[k * n..(k + 1) * n];
            for code in 0..n_codes {
                let mut acc = 0.0;
                for (j, &l) in lam.iter().enumerate() {
                    if (code >> j) & 1 == 1 {
                        acc += l;
                    }
                }
                g.push(acc);
            }
        };
        let mut g = Vec::with_capacity(n_codes);

        // forward
        self.alpha.clear();
        self.alpha.resize((steps + 1) * ns, f64::NEG_INFINITY);
        self.alpha[0] = 0.0;
        for k in 0..steps {
            branch(k, &mut g);
            let (cur, rest) = self.alpha.split_at_mut((k + 1) * ns);
            let cur = &cur[k * ns..];
            let nxt = &mut rest[..ns];
            let mut norm = f64::NEG_INFINITY;
            for (s2, slot) in nxt.iter_mut().enumerate() {
                let [(sa, ua), (sb, ub)] = self.pred[s2];
                let a = cur[sa] + g[self.out[sa][ua as usize] as usize];
                let b = cur[sb] + g[self.out[sb][ub as usize] as usize];
                *slot = max_star(a, b);
                norm = norm.max(*slot);
            }
            for v in nxt.iter_mut() {
                *v -= norm;
            }
        }

        // backward with on-the-fly soft outputs
        let sets = 2 * (n + 1);
        let mut app_coded = vec![0.0; apriori_coded.len()];
        let mut app_info = vec![0.0; steps - self.code.memory()];
        self.beta_next.fill(f64::NEG_INFINITY);
        self.beta_next[0] = 0.0;
        let mut set_max = vec![f64::NEG_INFINITY; sets];
        let mut set_sum = vec![0.0; sets];
        for k in (0..steps).rev() {
            branch(k, &mut g);
            let alpha = &self.alpha[k * ns..(k + 1) * ns];
            let mut global = f64::NEG_INFINITY;
            set_max.fill(f64::NEG_INFINITY);
            for s in 0..ns {
                for u in 0..2 {
                    let o = self.out[s][u];
                    let m = alpha[s] + g[o as usize] + self.beta_next[self.next[s][u]];
                    self.metrics[2 * s + u] = m;
                    global = global.max(m);
                    set_max[u] = set_max[u].max(m);
                    for j in 0..n {
                        let idx = 2 + 2 * j + ((o >> j) & 1) as usize;
                        set_max[idx] = set_max[idx].max(m);
                    }
                }
            }
            set_sum.fill(0.0);
            for s in 0..ns {
                for u in 0..2 {
                    let m = self.metrics[2 * s + u];
                    if m == f64::NEG_INFINITY {
                        continue;
                    }
                    let e = (m - global).exp();
                    let o = self.out[s][u];
                    set_sum[u] += e;
                    for j in 0..n {
                        set_sum[2 + 2 * j + ((o >> j) & 1) as usize] += e;
                    }
                }
            }
            // sets far below the global maximum lose precision in the shared
            // exponentials; recompute those against their own maximum
            let log_set = |idx: usize, metrics: &[f64], set_sum: &[f64]| -> f64 {
                let mx = set_max[idx];
                if mx == f64::NEG_INFINITY {
                    return mx;
                }
                if mx - global > -600.0 {
                    return global + set_sum[idx].ln();
                }
                let mut acc = 0.0;
                for s in 0..ns {
                    for u in 0..2 {
                        let o = self.out[s][u];
                        let member = if idx < 2 {
                            u == idx
                        } else {
                            let j = (idx - 2) / 2;
                            ((o >> j) & 1) as usize == (idx - 2) % 2
                        };
                        if member {
                            acc += (metrics[2 * s + u] - mx).exp();
                        }
                    }
                }
                mx + acc.ln()
            };
            if k < app_info.len() {
                app_info[k] = log_set(1, &self.metrics, &set_sum) - log_set(0, &self.metrics, &set_sum);
            }
            for j in 0..n {
                app_coded[k * n + j] = log_set(2 + 2 * j + 1, &self.metrics, &set_sum)
                    - log_set(2 + 2 * j, &self.metrics, &set_sum);
            }

            // beta_k
            let mut norm = f64::NEG_INFINITY;
            for s in 0..ns {
                let a = g[self.out[s][0] as usize] + self.beta_next[self.next[s][0]];
                let b = g[self.out[s][1] as usize] + self.beta_next[self.next[s][1]];
                self.beta[s] = max_star(a, b);
                norm = norm.max(self.beta[s]);
            }
            for v in self.beta.iter_mut() {
                *v -= norm;
            }
            std::mem::swap(&mut self.beta, &mut self.beta_next);
        }

        let extrinsic_coded = app_coded
            .iter()
            .zip(apriori_coded)
            .map(|(p, a)| p - a)
            .collect();
        Ok(DecoderIo {
            apriori_coded: apriori_coded.to_vec(),
            extrinsic_coded,
            app_info,
        })
    }
}

/// One-shot decode; builds the trellis tables on every call.
pub fn bcjr_decode(apriori_coded: &[f64], code: &ConvCode) -> Result<DecoderIo> {
    SisoDecoder::new(code).decode(apriori_coded)
}
