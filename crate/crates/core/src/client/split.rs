use serde::{Deserialize, Serialize};

/// How a shot budget is divided among healthy endpoints.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    /// Equal shares, remainder to the first endpoints.
    #[default]
    Equal,
    /// Shares proportional to per-endpoint weights (indexed like the pool);
    /// endpoints that are down get nothing.
    Weighted(Vec<f64>),
    /// Everything to the first healthy endpoint.
    AllToOne,
}

impl SplitPolicy {
    /// `(endpoint index, shots)` for every endpoint receiving a nonzero share.
    pub fn shares(&self, total: u64, up: &[usize], pool_len: usize) -> Vec<(usize, u64)> {
        if up.is_empty() {
            return Vec::new();
        }
        let weights: Vec<f64> = match self {
            SplitPolicy::Equal => vec![1.0; up.len()],
            SplitPolicy::AllToOne => {
                let mut w = vec![0.0; up.len()];
                w[0] = 1.0;
                w
            }
            SplitPolicy::Weighted(w) => {
                assert_eq!(w.len(), pool_len, "one weight per endpoint");
                let ws: Vec<f64> = up.iter().map(|&i| w[i].max(0.0)).collect();
                if ws.iter().sum::<f64>() > 0.0 {
                    ws
                } else {
                    vec![1.0; up.len()]
                }
            }
        };
        up.iter()
            .copied()
            .zip(split_shots(total, &weights))
            .filter(|&(_, s)| s > 0)
            .collect()
    }
}

/// Largest-remainder apportionment of `total` by `weights`; ties go to the
/// earlier entry. Always sums to `total`.
pub fn split_shots(total: u64, weights: &[f64]) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut shares: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = shares.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned) as usize) {
        shares[i] += 1;
    }
    shares
}
